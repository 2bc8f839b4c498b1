use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::voi::Voi;

/// VOI sizing constants, all relative to the branch radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoiSizing {
    /// Cross-section is `max(cross_factor r, cross_floor + cross_radius_factor r)`.
    pub cross_factor: f64,
    pub cross_floor: f64,
    pub cross_radius_factor: f64,
    /// Initial length is `length_factor r`.
    pub length_factor: f64,
    /// Extension step is `step_factor r`.
    pub step_factor: f64,
    /// A chain is rebased once its length would exceed `max_length_factor r`.
    pub max_length_factor: f64,
}

impl Default for VoiSizing {
    fn default() -> Self {
        Self {
            cross_factor: 4.0,
            cross_floor: 3.0,
            cross_radius_factor: 2.0,
            length_factor: 4.0,
            step_factor: 2.0,
            max_length_factor: 12.0,
        }
    }
}

impl VoiSizing {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.cross_factor,
            self.cross_floor,
            self.cross_radius_factor,
            self.length_factor,
            self.step_factor,
            self.max_length_factor,
        ];
        if all.iter().any(|v| !(*v >= 0.0)) || !(self.length_factor > 0.0) || !(self.step_factor > 0.0) {
            return Err(Error::InvalidParameter(format!("invalid VOI sizing {self:?}")));
        }
        Ok(())
    }

    pub fn size(&self, radius: f64, direction: Vector3<f64>, base: Vector3<f64>, generation: usize) -> Result<Voi> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!("branch radius must be > 0, got {radius}")));
        }
        let cross = (self.cross_factor * radius).max(self.cross_floor + self.cross_radius_factor * radius);
        Voi::new(base, direction, cross, self.length_factor * radius, generation)
    }
}

/// VOI for a branch of the given radius starting at `base`, with the
/// default sizing: cross-section `max(4r, 3 mm + 2r)`, length `4r`.
pub fn size_voi(radius: f64, direction: Vector3<f64>, base: Vector3<f64>, generation: usize) -> Result<Voi> {
    VoiSizing::default().size(radius, direction, base, generation)
}

/// Same frame, front face pushed forward by `step`.
pub fn extend_voi(voi: &Voi, step: f64) -> Result<Voi> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!("extension step must be > 0, got {step}")));
    }
    let mut v = *voi;
    v.length += step;
    v.validate()?;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizing_rule() {
        let v = size_voi(4.0, Vector3::z(), Vector3::zeros(), 0).unwrap();
        assert_eq!((v.cross_size, v.length), (16.0, 16.0));
        let v = size_voi(0.5, Vector3::z(), Vector3::zeros(), 0).unwrap();
        assert_eq!(v.cross_size, 4.0);
        let d = Vector3::new(0.2, -0.4, 0.9);
        assert_eq!(size_voi(1.2, d, Vector3::x(), 3).unwrap(), size_voi(1.2, d, Vector3::x(), 3).unwrap());
        assert!(size_voi(0.0, d, Vector3::x(), 0).is_err());
    }

    #[test]
    fn extension() {
        let v = Voi::new(Vector3::new(1.0, 2.0, 3.0), Vector3::y(), 4.0, 8.0, 1).unwrap();
        let e = extend_voi(&v, 2.0).unwrap();
        assert_eq!(e.length, 10.0);
        assert_eq!(e.base, v.base);
        let mut r = v;
        for _ in 0..5 {
            r = extend_voi(&r, 0.75).unwrap();
        }
        assert!((r.length - extend_voi(&v, 3.75).unwrap().length).abs() < 1e-12);
        assert!(extend_voi(&v, 0.0).is_err());
    }
}
