//! LoG sharpening and the cavity enhancement filter (CEF).

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::par;
use crate::volume::{gaussian_smooth, hessian_at, laplacian, BinaryMask, ScalarVolume};

#[derive(Debug, Clone, PartialEq)]
pub struct EnhanceParams {
    pub beta: f64,
    pub log_sigma: f64,
    pub cef_hu_threshold: f64,
    pub cef_scales: Vec<f64>,
    pub cef_score_threshold: f64,
}

impl Default for EnhanceParams {
    fn default() -> Self {
        Self {
            beta: 0.05,
            log_sigma: 1.0,
            cef_hu_threshold: -800.0,
            cef_scales: vec![0.5, 1.0, 2.0],
            cef_score_threshold: 10.0,
        }
    }
}

impl EnhanceParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.log_sigma > 0.0) || self.cef_scales.is_empty() || self.cef_scales.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidParameter("LoG sigma and CEF scales must be > 0".into()));
        }
        Ok(())
    }
}

/// `v - beta * LoG(v)`; `beta = 0` returns the input unchanged.
pub fn sharpen_log(v: &ScalarVolume, beta: f64, log_sigma: f64) -> ScalarVolume {
    if beta == 0.0 {
        return v.clone();
    }
    let data = v.to_f64();
    let smooth = gaussian_smooth(&v.grid, &data, log_sigma);
    let lap = laplacian(&v.grid, &smooth);
    let out: Vec<f64> = data.iter().zip(&lap).map(|(a, l)| a - beta * l).collect();
    ScalarVolume::from_f64(v.grid, &out)
}

/// Ascending eigenvalues of the sigma^2-normalized Hessian of the
/// sigma-smoothed volume, per voxel.
pub fn hessian_eigenvalues(v: &ScalarVolume, sigma: f64) -> Vec<[f64; 3]> {
    let g = v.grid;
    let smooth = gaussian_smooth(&g, &v.to_f64(), sigma);
    let s2 = sigma * sigma;
    let [nx, ny, _] = g.dims;
    let mut out = vec![[0.0; 3]; g.len()];
    par::for_each_slab(&mut out, nx * ny, |z, slab| {
        for y in 0..ny {
            for x in 0..nx {
                let h = hessian_at(&g, &smooth, x, y, z);
                let m = Matrix3::new(h[0], h[3], h[4], h[3], h[1], h[5], h[4], h[5], h[2]) * s2;
                let e = m.symmetric_eigenvalues();
                let mut l = [e[0], e[1], e[2]];
                l.sort_by(|a, b| a.total_cmp(b));
                slab[x + nx * y] = l;
            }
        }
    });
    out
}

/// Dark-tube response from sorted eigenvalues.
pub fn tube_response(l: &[f64; 3]) -> f64 {
    let [l1, l2, l3] = *l;
    if l2 > 0.0 && l3 > 0.0 && l1.abs() < 0.5 * l2 {
        l2
    } else {
        0.0
    }
}

/// Multiscale dark-tube score and the gated candidate mask.
pub fn cef(v: &ScalarVolume, p: &EnhanceParams) -> Result<(ScalarVolume, BinaryMask)> {
    p.validate()?;
    let mut score = vec![0.0f64; v.grid.len()];
    for &sigma in &p.cef_scales {
        for (s, l) in score.iter_mut().zip(hessian_eigenvalues(v, sigma)) {
            *s = s.max(tube_response(&l));
        }
    }
    let candidates = BinaryMask {
        grid: v.grid,
        data: v
            .data
            .iter()
            .zip(&score)
            .map(|(&x, &s)| x as f64 <= p.cef_hu_threshold && s >= p.cef_score_threshold)
            .collect(),
    };
    Ok((ScalarVolume::from_f64(v.grid, &score), candidates))
}
