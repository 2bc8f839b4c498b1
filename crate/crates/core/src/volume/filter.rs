//! Separable Gaussian smoothing and spacing-aware finite differences.
//!
//! Borders replicate the edge voxel throughout.

use super::Grid;

/// Normalized discrete Gaussian truncated at 3 sigma (sigma in voxels).
fn kernel(sigma_vox: f64) -> Vec<f64> {
    let radius = (3.0 * sigma_vox).ceil().max(1.0) as i64;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma_vox * sigma_vox)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

fn convolve_axis(grid: &Grid, src: &[f64], dst: &mut [f64], axis: usize, k: &[f64]) {
    let [nx, ny, nz] = grid.dims;
    let n = grid.dims[axis] as i64;
    let r = (k.len() / 2) as i64;
    let stride = match axis {
        0 => 1,
        1 => nx,
        _ => nx * ny,
    };
    let mut line = vec![0.0; n as usize];
    let (outer_a, outer_b) = match axis {
        0 => (ny, nz),
        1 => (nx, nz),
        _ => (nx, ny),
    };
    for b in 0..outer_b {
        for a in 0..outer_a {
            let start = match axis {
                0 => grid.index(0, a, b),
                1 => grid.index(a, 0, b),
                _ => grid.index(a, b, 0),
            };
            for (i, l) in line.iter_mut().enumerate() {
                *l = src[start + i * stride];
            }
            for i in 0..n {
                let mut acc = 0.0;
                for (j, w) in k.iter().enumerate() {
                    let t = (i + j as i64 - r).clamp(0, n - 1);
                    acc += w * line[t as usize];
                }
                dst[start + i as usize * stride] = acc;
            }
        }
    }
}

/// Gaussian smoothing with physical sigma (mm); axes whose sigma is below
/// 1e-3 voxel are left untouched.
pub fn gaussian_smooth(grid: &Grid, data: &[f64], sigma_mm: f64) -> Vec<f64> {
    let mut cur = data.to_vec();
    let mut tmp = vec![0.0; data.len()];
    for axis in 0..3 {
        let s = sigma_mm / grid.spacing[axis];
        if s < 1e-3 || grid.dims[axis] == 1 {
            continue;
        }
        let k = kernel(s);
        convolve_axis(grid, &cur, &mut tmp, axis, &k);
        std::mem::swap(&mut cur, &mut tmp);
    }
    cur
}

#[inline]
fn clamp_offset(grid: &Grid, x: usize, y: usize, z: usize, d: [i64; 3]) -> usize {
    let c = |v: usize, dv: i64, n: usize| (v as i64 + dv).clamp(0, n as i64 - 1) as usize;
    grid.index(
        c(x, d[0], grid.dims[0]),
        c(y, d[1], grid.dims[1]),
        c(z, d[2], grid.dims[2]),
    )
}

/// Central-difference gradient at one voxel.
pub fn central_gradient(grid: &Grid, data: &[f64], x: usize, y: usize, z: usize) -> [f64; 3] {
    let mut g = [0.0; 3];
    for (a, ga) in g.iter_mut().enumerate() {
        let mut dp = [0i64; 3];
        let mut dm = [0i64; 3];
        dp[a] = 1;
        dm[a] = -1;
        let fp = data[clamp_offset(grid, x, y, z, dp)];
        let fm = data[clamp_offset(grid, x, y, z, dm)];
        *ga = (fp - fm) / (2.0 * grid.spacing[a]);
    }
    g
}

/// Second-derivative matrix `[xx, yy, zz, xy, xz, yz]` at one voxel.
pub fn hessian_at(grid: &Grid, data: &[f64], x: usize, y: usize, z: usize) -> [f64; 6] {
    let f = |d: [i64; 3]| data[clamp_offset(grid, x, y, z, d)];
    let c = f([0, 0, 0]);
    let h = grid.spacing;
    let mut out = [0.0; 6];
    for a in 0..3 {
        let mut dp = [0i64; 3];
        dp[a] = 1;
        let dm = [-dp[0], -dp[1], -dp[2]];
        out[a] = (f(dp) - 2.0 * c + f(dm)) / (h[a] * h[a]);
    }
    let mixed = |a: usize, b: usize| {
        let mut pp = [0i64; 3];
        pp[a] = 1;
        pp[b] = 1;
        let mut pm = [0i64; 3];
        pm[a] = 1;
        pm[b] = -1;
        let mut mp = [0i64; 3];
        mp[a] = -1;
        mp[b] = 1;
        let mut mm = [0i64; 3];
        mm[a] = -1;
        mm[b] = -1;
        (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h[a] * h[b])
    };
    out[3] = mixed(0, 1);
    out[4] = mixed(0, 2);
    out[5] = mixed(1, 2);
    out
}

/// Discrete Laplacian with replicated borders.
pub fn laplacian(grid: &Grid, data: &[f64]) -> Vec<f64> {
    let [nx, ny, nz] = grid.dims;
    let h2 = grid.spacing.map(|s| s * s);
    let mut out = vec![0.0; data.len()];
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = grid.index(x, y, z);
                let c = data[i];
                let mut acc = 0.0;
                for (a, h2a) in h2.iter().enumerate() {
                    let mut dp = [0i64; 3];
                    dp[a] = 1;
                    let dm = [-dp[0], -dp[1], -dp[2]];
                    acc += (data[clamp_offset(grid, x, y, z, dp)] - 2.0 * c
                        + data[clamp_offset(grid, x, y, z, dm)])
                        / h2a;
                }
                out[i] = acc;
            }
        }
    }
    out
}
