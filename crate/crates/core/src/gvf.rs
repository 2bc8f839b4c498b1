//! Gradient vector flow: normalized edge force and its diffusion.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::par;
use crate::volume::{central_gradient, gaussian_smooth, BinaryMask, Grid, ScalarVolume};

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    pub data: Vec<Vector3<f64>>,
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        Self { data: vec![Vector3::zeros(); grid.len()], grid }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> Vector3<f64> {
        self.data[self.grid.index(x, y, z)]
    }

    /// Trilinear interpolation at a world point; `None` outside the hull.
    pub fn sample_world(&self, p: &Vector3<f64>) -> Option<Vector3<f64>> {
        let c = self.grid.continuous_index(p);
        let w = crate::volume::trilinear_weights(&self.grid, &c)?;
        Some(w.iter().map(|&(i, t)| self.data[i] * t).sum())
    }

    /// One scalar volume per component.
    pub fn components(&self) -> [ScalarVolume; 3] {
        std::array::from_fn(|k| {
            ScalarVolume::from_f64(self.grid, &self.data.iter().map(|v| v[k]).collect::<Vec<_>>())
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GvfParams {
    /// Gaussian scale of the edge map (mm).
    pub sigma: f64,
    /// Gradient magnitude cap; `None` uses the 99th percentile of |F|.
    pub f_max: Option<f64>,
    pub mu: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for GvfParams {
    fn default() -> Self {
        Self { sigma: 1.0, f_max: None, mu: 0.1, max_iters: 400, tol: 1e-4 }
    }
}

impl GvfParams {
    pub fn validate(&self) -> Result<()> {
        let fmax_ok = self.f_max.is_none_or(|f| f > 0.0);
        if !(self.sigma > 0.0) || !(self.mu > 0.0) || !(self.tol > 0.0) || !fmax_ok {
            return Err(Error::InvalidParameter(format!(
                "GVF needs sigma, mu, tol and f_max > 0 (got {self:?})"
            )));
        }
        Ok(())
    }
}

/// Value at quantile `q` (nearest rank below) of `values`.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    let k = ((v.len() - 1) as f64 * q).floor() as usize;
    let (_, x, _) = v.select_nth_unstable_by(k, |a, b| a.total_cmp(b));
    *x
}

/// `F = -grad(G_sigma * v)`, rescaled so that `|F^n| = min(|F|, f_max) / f_max`.
pub fn initial_field(v: &ScalarVolume, p: &GvfParams) -> Result<VectorField> {
    initial_field_within(v, p, None)
}

/// As [`initial_field`], with the automatic `f_max` percentile taken over
/// `region` only (e.g. the part of a VOI inside the scanned volume).
pub fn initial_field_within(v: &ScalarVolume, p: &GvfParams, region: Option<&BinaryMask>) -> Result<VectorField> {
    p.validate()?;
    if let Some(r) = region {
        v.grid.check_same(&r.grid, "f_max region")?;
    }
    let g = v.grid;
    let smooth = gaussian_smooth(&g, &v.to_f64(), p.sigma);
    let [nx, ny, _] = g.dims;
    let mut raw = vec![Vector3::zeros(); g.len()];
    par::for_each_slab(&mut raw, nx * ny, |z, slab| {
        for y in 0..ny {
            for x in 0..nx {
                let d = central_gradient(&g, &smooth, x, y, z);
                slab[x + nx * y] = -Vector3::new(d[0], d[1], d[2]);
            }
        }
    });
    let f_max = match p.f_max {
        Some(f) => f,
        None => {
            let norms: Vec<f64> =
                raw.iter().enumerate().filter(|(i, _)| region.is_none_or(|r| r.data[*i])).map(|(_, f)| f.norm()).collect();
            quantile(&norms, 0.99)
        }
    };
    if !(f_max > 0.0) {
        return Ok(VectorField::zeros(g));
    }
    let data = raw
        .into_iter()
        .map(|f| {
            let n = f.norm();
            if n == 0.0 {
                Vector3::zeros()
            } else {
                f * (n.min(f_max) / (f_max * n))
            }
        })
        .collect();
    Ok(VectorField { grid: g, data })
}

/// Discrete GVF energy
/// `sum_i |F_i|^2 |V_i - F_i|^2 + mu * sum_{edges ij} |V_i - V_j|^2 / h_ij^2`,
/// the edge sum running over lattice-neighbor pairs inside the domain.
pub fn gvf_energy(v: &VectorField, f: &VectorField, mu: f64) -> f64 {
    let g = v.grid;
    let [nx, ny, nz] = g.dims;
    let ih2 = g.spacing.map(|h| 1.0 / (h * h));
    let mut data = 0.0;
    let mut smooth = 0.0;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = g.index(x, y, z);
                data += f.data[i].norm_squared() * (v.data[i] - f.data[i]).norm_squared();
                let c = [x, y, z];
                for a in 0..3 {
                    if c[a] + 1 < g.dims[a] {
                        let mut n = c;
                        n[a] += 1;
                        let j = g.index(n[0], n[1], n[2]);
                        smooth += (v.data[i] - v.data[j]).norm_squared() * ih2[a];
                    }
                }
            }
        }
    }
    data + mu * smooth
}

/// Explicit diffusion `V <- V + dt (mu lap V - |F|^2 (V - F))` with
/// zero-flux boundaries, started from `V = F`.
///
/// Each step is a gradient-descent step on [`gvf_energy`]; the step
/// `dt = 1 / (2 mu sum_a 1/h_a^2 + max |F|^2)` keeps it strictly inside the
/// descent-stable range, so the energy never increases.
pub struct GvfSolver {
    f: VectorField,
    w: Vec<f64>,
    v: VectorField,
    scratch: Vec<Vector3<f64>>,
    mu: f64,
    dt: f64,
    iterations: usize,
}

impl GvfSolver {
    pub fn new(f: &VectorField, mu: f64) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::InvalidParameter(format!("mu must be > 0, got {mu}")));
        }
        if f.data.iter().any(|x| !x.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite);
        }
        let w: Vec<f64> = f.data.iter().map(|x| x.norm_squared()).collect();
        let w_max = w.iter().cloned().fold(0.0, f64::max);
        let s: f64 = f.grid.spacing.iter().map(|h| 1.0 / (h * h)).sum();
        let dt = 1.0 / (2.0 * mu * s + w_max);
        Ok(Self {
            f: f.clone(),
            w,
            v: f.clone(),
            scratch: vec![Vector3::zeros(); f.data.len()],
            mu,
            dt,
            iterations: 0,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn field(&self) -> &VectorField {
        &self.v
    }

    pub fn into_field(self) -> VectorField {
        self.v
    }

    pub fn energy(&self) -> f64 {
        gvf_energy(&self.v, &self.f, self.mu)
    }

    /// One update; returns the largest per-voxel change in norm.
    pub fn step(&mut self) -> f64 {
        let g = self.v.grid;
        let [nx, ny, _] = g.dims;
        let ih2 = g.spacing.map(|h| 1.0 / (h * h));
        let (v, f, w) = (&self.v.data, &self.f.data, &self.w);
        let (mu, dt) = (self.mu, self.dt);
        par::for_each_slab(&mut self.scratch, nx * ny, |z, slab| {
            for y in 0..ny {
                for x in 0..nx {
                    let i = g.index(x, y, z);
                    let c = [x, y, z];
                    let mut lap = Vector3::zeros();
                    for a in 0..3 {
                        let stride = [1, nx, nx * ny][a];
                        if c[a] > 0 {
                            lap += (v[i - stride] - v[i]) * ih2[a];
                        }
                        if c[a] + 1 < g.dims[a] {
                            lap += (v[i + stride] - v[i]) * ih2[a];
                        }
                    }
                    slab[x + nx * y] = v[i] + (lap * mu - (v[i] - f[i]) * w[i]) * dt;
                }
            }
        });
        let change = self
            .scratch
            .iter()
            .zip(&self.v.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        std::mem::swap(&mut self.scratch, &mut self.v.data);
        self.iterations += 1;
        change
    }

    /// Iterate until `max_iters` or the largest change drops below `tol`.
    pub fn run(&mut self, max_iters: usize, tol: f64) {
        while self.iterations < max_iters {
            if self.step() < tol {
                break;
            }
        }
    }
}

pub fn solve_gvf(f: &VectorField, p: &GvfParams) -> Result<VectorField> {
    p.validate()?;
    let mut s = GvfSolver::new(f, p.mu)?;
    s.run(p.max_iters, p.tol);
    Ok(s.into_field())
}

pub fn magnitude_map(f: &VectorField) -> ScalarVolume {
    ScalarVolume::from_f64(f.grid, &f.data.iter().map(|v| v.norm()).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_volume_gives_zero_field() {
        let v = ScalarVolume::filled(Grid::unit([6, 6, 6]), -900.0);
        let f = initial_field(&v, &GvfParams::default()).unwrap();
        assert!(f.data.iter().all(|x| x.norm() == 0.0));
    }

    #[test]
    fn saturated_ramp_is_unit_minus_x() {
        let g = Grid::unit([12, 8, 8]);
        let v = ScalarVolume::from_fn(g, |x, _, _| 50.0 * x as f32);
        let p = GvfParams { f_max: Some(10.0), ..GvfParams::default() };
        let f = initial_field(&v, &p).unwrap();
        for z in 0..8 {
            for y in 0..8 {
                for x in 4..8 {
                    assert!((f.at(x, y, z) - Vector3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn fixed_points() {
        let g = Grid::unit([5, 4, 3]);
        let zero = VectorField::zeros(g);
        let p = GvfParams { max_iters: 7, tol: 1e-30, ..GvfParams::default() };
        assert_eq!(solve_gvf(&zero, &p).unwrap(), zero);
        let unit = VectorField { grid: g, data: vec![Vector3::new(0.6, 0.0, -0.8); g.len()] };
        let out = solve_gvf(&unit, &p).unwrap();
        assert!(out.data.iter().zip(&unit.data).all(|(a, b)| (a - b).norm() < 1e-15));
        assert!(magnitude_map(&out).data.iter().all(|&m| (m - 1.0).abs() < 1e-6));
    }

    #[test]
    fn non_finite_rejected() {
        let mut f = VectorField::zeros(Grid::unit([2, 2, 2]));
        f.data[3].x = f64::NAN;
        assert!(matches!(solve_gvf(&f, &GvfParams::default()), Err(Error::NonFinite)));
    }

    #[test]
    fn quantile_picks_rank() {
        let v: Vec<f64> = (0..101).map(|i| (100 - i) as f64).collect();
        assert_eq!(quantile(&v, 0.99), 99.0);
        assert_eq!(quantile(&v, 0.0), 0.0);
    }
}
