//! Oriented volume of interest.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::volume::Grid;

/// Oriented box tracking one branch.
///
/// Local frame: `x` along `up`, `y` along `side = axis × up`, `z` along
/// `axis`. The entry face is the plane `z = 0` through `base`; the front face
/// is `z = length`. The cross-section is a `cross_size` square centered on
/// the axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Voi {
    pub base: Vector3<f64>,
    pub axis: Vector3<f64>,
    pub up: Vector3<f64>,
    pub cross_size: f64,
    pub length: f64,
    pub generation: usize,
}

/// Deterministic unit vector orthogonal to `axis`.
pub fn complete_frame(axis: &Vector3<f64>) -> Vector3<f64> {
    let mut best = 0;
    for a in 1..3 {
        if axis[a].abs() < axis[best].abs() {
            best = a;
        }
    }
    let mut e = Vector3::zeros();
    e[best] = 1.0;
    (e - axis * axis.dot(&e)).normalize()
}

impl Voi {
    pub fn new(
        base: Vector3<f64>,
        axis: Vector3<f64>,
        cross_size: f64,
        length: f64,
        generation: usize,
    ) -> Result<Self> {
        let n = axis.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::DegenerateVoi("axis must be a nonzero vector".into()));
        }
        let axis = axis / n;
        let voi = Self { base, axis, up: complete_frame(&axis), cross_size, length, generation };
        voi.validate()?;
        Ok(voi)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cross_size > 0.0) || !(self.length > 0.0) {
            return Err(Error::DegenerateVoi(format!(
                "extents must be positive (cross {} mm, length {} mm)",
                self.cross_size, self.length
            )));
        }
        let ok = (self.axis.norm() - 1.0).abs() < 1e-6
            && (self.up.norm() - 1.0).abs() < 1e-6
            && self.axis.dot(&self.up).abs() < 1e-6;
        if !ok {
            return Err(Error::DegenerateVoi("axis and up must be orthonormal".into()));
        }
        Ok(())
    }

    pub fn side(&self) -> Vector3<f64> {
        self.axis.cross(&self.up)
    }

    /// Lattice covering the box at `pitch`; origin is in local coordinates.
    pub fn lattice(&self, pitch: f64) -> Result<Grid> {
        self.validate()?;
        if !(pitch > 0.0) {
            return Err(Error::InvalidParameter(format!("voxel pitch must be > 0, got {pitch}")));
        }
        let nc = ((self.cross_size / pitch).round() as usize).max(1);
        let nl = ((self.length / pitch).round() as usize).max(1);
        let c0 = -((nc - 1) as f64) * pitch / 2.0;
        Grid::new([nc, nc, nl], [pitch; 3], [c0, c0, 0.5 * pitch])
    }

    pub fn local_to_world(&self, local: &Vector3<f64>) -> Vector3<f64> {
        self.base + self.up * local.x + self.side() * local.y + self.axis * local.z
    }

    pub fn world_to_local(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let d = p - self.base;
        Vector3::new(d.dot(&self.up), d.dot(&self.side()), d.dot(&self.axis))
    }

    pub fn direction_to_world(&self, local: &Vector3<f64>) -> Vector3<f64> {
        self.up * local.x + self.side() * local.y + self.axis * local.z
    }

    /// World-space corners of the box.
    pub fn corners(&self) -> [Vector3<f64>; 8] {
        let h = self.cross_size / 2.0;
        let mut out = [Vector3::zeros(); 8];
        for (i, c) in out.iter_mut().enumerate() {
            let u = if i & 1 == 0 { -h } else { h };
            let w = if i & 2 == 0 { -h } else { h };
            let s = if i & 4 == 0 { 0.0 } else { self.length };
            *c = self.local_to_world(&Vector3::new(u, w, s));
        }
        out
    }
}
