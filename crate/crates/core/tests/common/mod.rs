#![allow(dead_code)]

pub mod medial;
pub mod topology;

use airway_core::gvf::VectorField;
use airway_core::volume::Grid;
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random field with magnitudes in `[lo, 1]`.
pub fn random_field(grid: Grid, seed: u64, lo: f64) -> VectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..grid.len())
        .map(|_| {
            let d = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let d = if d.norm() < 1e-6 { Vector3::x() } else { d.normalize() };
            d * rng.random_range(lo..=1.0)
        })
        .collect();
    VectorField { grid, data }
}

/// Independent gradient descent on
/// `E(V) = sum w |V - F|^2 + mu sum_edges |V_i - V_j|^2 / h^2`:
/// the gradient is accumulated edge by edge, then `V -= step * grad / 2`.
pub struct DescentOracle {
    pub f: Vec<Vector3<f64>>,
    pub v: Vec<Vector3<f64>>,
    pub dims: [usize; 3],
    pub h: [f64; 3],
    pub mu: f64,
}

impl DescentOracle {
    pub fn new(f: &VectorField, mu: f64) -> Self {
        Self { f: f.data.clone(), v: f.data.clone(), dims: f.grid.dims, h: f.grid.spacing, mu }
    }

    pub fn gradient(&self) -> Vec<Vector3<f64>> {
        let [nx, ny, nz] = self.dims;
        let id = |x: usize, y: usize, z: usize| x + nx * (y + ny * z);
        let mut g: Vec<Vector3<f64>> =
            self.v.iter().zip(&self.f).map(|(v, f)| (v - f) * (2.0 * f.norm_squared())).collect();
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let i = id(x, y, z);
                    let nbrs = [
                        (x + 1 < nx).then(|| (id(x + 1, y, z), self.h[0])),
                        (y + 1 < ny).then(|| (id(x, y + 1, z), self.h[1])),
                        (z + 1 < nz).then(|| (id(x, y, z + 1), self.h[2])),
                    ];
                    for (j, h) in nbrs.into_iter().flatten() {
                        let d = (self.v[i] - self.v[j]) * (2.0 * self.mu / (h * h));
                        g[i] += d;
                        g[j] -= d;
                    }
                }
            }
        }
        g
    }

    pub fn step(&mut self, dt: f64) -> f64 {
        let g = self.gradient();
        let mut worst: f64 = 0.0;
        for (v, gi) in self.v.iter_mut().zip(&g) {
            *v -= gi * (dt / 2.0);
            worst = worst.max(gi.norm());
        }
        worst
    }
}

/// Seed voxel a few mm below the phantom's entry point.
pub fn phantom_seed(grid: &Grid) -> [usize; 3] {
    airway_core::phantom::seed_voxel(grid).expect("seed inside the phantom")
}

/// Distance from `p` to a polyline (a single point counts as a polyline).
pub fn polyline_distance(p: &Vector3<f64>, pts: &[Vector3<f64>]) -> f64 {
    match pts {
        [] => f64::INFINITY,
        [a] => (p - a).norm(),
        _ => pts
            .windows(2)
            .map(|w| {
                let d = w[1] - w[0];
                let t = if d.norm_squared() > 0.0 { ((p - w[0]).dot(&d) / d.norm_squared()).clamp(0.0, 1.0) } else { 0.0 };
                (p - (w[0] + d * t)).norm()
            })
            .fold(f64::INFINITY, f64::min),
    }
}

/// Midpoint of a polyline by arc length.
pub fn arc_midpoint(pts: &[Vector3<f64>]) -> Vector3<f64> {
    let total: f64 = pts.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    let mut left = total / 2.0;
    for w in pts.windows(2) {
        let l = (w[1] - w[0]).norm();
        if left <= l && l > 0.0 {
            return w[0] + (w[1] - w[0]) * (left / l);
        }
        left -= l;
    }
    pts[pts.len() - 1]
}
