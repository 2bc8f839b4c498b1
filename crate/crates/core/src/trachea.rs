//! Trachea extraction by adaptive-threshold region growing.

use std::collections::VecDeque;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};
use crate::tracer::size_voi;
use crate::voi::Voi;
use crate::volume::{BinaryMask, Connectivity, Grid, ScalarVolume};

/// Depth of the mask top used to orient the root VOI.
pub const ROOT_WINDOW_MM: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowParams {
    pub hu_start: f64,
    pub hu_step: f64,
    pub hu_max: f64,
    pub explosion_ratio: f64,
}

impl Default for GrowParams {
    fn default() -> Self {
        Self { hu_start: -950.0, hu_step: 25.0, hu_max: -775.0, explosion_ratio: 1.5 }
    }
}

impl GrowParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.hu_start < self.hu_max) || !(self.hu_step > 0.0) || !(self.explosion_ratio > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "grow parameters need hu_start < hu_max, hu_step > 0, explosion_ratio > 1 (got {self:?})"
            )));
        }
        Ok(())
    }

    /// The threshold ladder `hu_start, hu_start + step, ...` up to `hu_max`.
    pub fn thresholds(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 0;
        loop {
            let t = self.hu_start + k as f64 * self.hu_step;
            if t > self.hu_max + 1e-9 {
                break;
            }
            out.push(t);
            k += 1;
        }
        out
    }
}

fn seed_index(grid: &Grid, seed: [usize; 3]) -> Result<usize> {
    grid.checked_index(seed[0] as i64, seed[1] as i64, seed[2] as i64)
        .ok_or(Error::OutOfBounds(seed[0] as i64, seed[1] as i64, seed[2] as i64))
}

/// 26-connected region of voxels `<= threshold` containing the seed.
pub fn threshold_region(v: &ScalarVolume, seed: [usize; 3], threshold: f64) -> Result<BinaryMask> {
    let s = seed_index(&v.grid, seed)?;
    let mut m = BinaryMask::empty(v.grid);
    if v.data[s] as f64 > threshold {
        return Ok(m);
    }
    m.data[s] = true;
    let mut queue = VecDeque::from([s]);
    while let Some(i) = queue.pop_front() {
        for n in v.grid.neighbors(i, Connectivity::TwentySix) {
            if !m.data[n] && v.data[n] as f64 <= threshold {
                m.data[n] = true;
                queue.push_back(n);
            }
        }
    }
    Ok(m)
}

/// Number of distinct lattice faces the mask touches.
pub fn faces_touched(m: &BinaryMask) -> usize {
    let [nx, ny, nz] = m.grid.dims;
    let mut hit = [false; 6];
    for i in m.indices() {
        let [x, y, z] = m.grid.coords(i);
        hit[0] |= x == 0;
        hit[1] |= x == nx - 1;
        hit[2] |= y == 0;
        hit[3] |= y == ny - 1;
        hit[4] |= z == 0;
        hit[5] |= z == nz - 1;
    }
    hit.iter().filter(|&&h| h).count()
}

/// Grow the trachea from `seed`, raising the threshold step by step until
/// one step would multiply the region volume by more than
/// `explosion_ratio`. Returns the region at the last accepted threshold.
pub fn grow_trachea(v: &ScalarVolume, seed: [usize; 3], p: &GrowParams) -> Result<BinaryMask> {
    p.validate()?;
    let s = seed_index(&v.grid, seed)?;
    let value = v.data[s] as f64;
    if value > p.hu_start {
        return Err(Error::SeedNotInAir { value, threshold: p.hu_start });
    }
    let grid = v.grid;
    let mut region = BinaryMask::empty(grid);
    // voxels adjacent to the region that were too bright so far
    let mut queued = vec![false; grid.len()];
    let mut pending: Vec<usize> = vec![s];
    queued[s] = true;
    let mut size = 0usize;
    for (k, t) in p.thresholds().into_iter().enumerate() {
        let mut next = region.clone();
        let mut next_queued = queued.clone();
        let mut still_pending = Vec::new();
        let mut queue = VecDeque::new();
        for &i in &pending {
            if v.data[i] as f64 <= t {
                next.data[i] = true;
                queue.push_back(i);
            } else {
                still_pending.push(i);
            }
        }
        let mut added = queue.len();
        while let Some(i) = queue.pop_front() {
            for n in grid.neighbors(i, Connectivity::TwentySix) {
                if next_queued[n] {
                    continue;
                }
                next_queued[n] = true;
                if v.data[n] as f64 <= t {
                    next.data[n] = true;
                    added += 1;
                    queue.push_back(n);
                } else {
                    still_pending.push(n);
                }
            }
        }
        let new_size = size + added;
        if k == 0 {
            let faces = faces_touched(&next);
            if faces >= 3 {
                return Err(Error::SeedOutsideBody { faces });
            }
        } else if new_size as f64 > p.explosion_ratio * size as f64 {
            break;
        }
        region = next;
        queued = next_queued;
        pending = still_pending;
        size = new_size;
    }
    Ok(region)
}

/// Root branch estimate from the top of a trachea mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootEstimate {
    pub base: Vector3<f64>,
    pub axis: Vector3<f64>,
    pub radius: f64,
}

/// Root VOI from the top of the trachea mask: axis along the principal
/// direction of the top `ROOT_WINDOW_MM`, pointing caudally (-z); base at the
/// centroid of the topmost slice; size from that slice's equivalent-disk
/// radius.
pub fn estimate_root_voi(m: &BinaryMask) -> Result<Voi> {
    let r = estimate_root(m)?;
    size_voi(r.radius, r.axis, r.base, 0)
}

pub fn estimate_root(m: &BinaryMask) -> Result<RootEstimate> {
    let g = m.grid;
    let top = m.indices().map(|i| g.coords(i)[2]).max().ok_or(Error::EmptyMask)?;
    let z_top = g.world(0, 0, top).z;
    let mut pts = Vec::new();
    let mut top_pts = Vec::new();
    let mut min_z = top;
    for i in m.indices() {
        let p = g.world_of_index(i);
        if p.z >= z_top - ROOT_WINDOW_MM {
            min_z = min_z.min(g.coords(i)[2]);
            pts.push(p);
        }
        if g.coords(i)[2] == top {
            top_pts.push(p);
        }
    }
    if min_z == top {
        return Err(Error::InsufficientExtent("mask spans a single slice; cannot orient root VOI".into()));
    }
    let mean = pts.iter().sum::<Vector3<f64>>() / pts.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in &pts {
        let d = p - mean;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let k = eig.eigenvalues.imax();
    let mut axis: Vector3<f64> = eig.eigenvectors.column(k).into_owned();
    if axis.z > 0.0 {
        axis = -axis;
    }
    let base = top_pts.iter().sum::<Vector3<f64>>() / top_pts.len() as f64;
    let area = top_pts.len() as f64 * g.spacing[0] * g.spacing[1];
    let radius = (area / std::f64::consts::PI).sqrt();
    Ok(RootEstimate { base, axis, radius })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{generate_cylinder, PhantomSpec};

    fn center_seed(m: &BinaryMask) -> [usize; 3] {
        let d = m.grid.dims;
        [d[0] / 2, d[1] / 2, d[2] / 2]
    }

    #[test]
    fn cylinder_grows_to_exact_lumen() {
        let (v, truth) = generate_cylinder(2.0, 12.0, Vector3::z(), &PhantomSpec::default()).unwrap();
        let m = grow_trachea(&v, center_seed(&truth.mask), &GrowParams::default()).unwrap();
        assert_eq!(m, truth.mask);
    }

    #[test]
    fn uniform_air_is_outside_body() {
        let v = ScalarVolume::filled(Grid::unit([6, 6, 6]), -1000.0);
        assert!(matches!(
            grow_trachea(&v, [2, 2, 2], &GrowParams::default()),
            Err(Error::SeedOutsideBody { faces: 6 })
        ));
    }

    #[test]
    fn bright_seed_rejected() {
        let v = ScalarVolume::filled(Grid::unit([4, 4, 4]), 0.0);
        assert!(matches!(grow_trachea(&v, [1, 1, 1], &GrowParams::default()), Err(Error::SeedNotInAir { .. })));
        assert!(grow_trachea(&v, [9, 1, 1], &GrowParams::default()).is_err());
    }

    #[test]
    fn single_slice_cannot_orient() {
        let m = BinaryMask::from_fn(Grid::unit([5, 5, 5]), |_, _, z| z == 4);
        assert!(matches!(estimate_root_voi(&m), Err(Error::InsufficientExtent(_))));
        assert!(matches!(estimate_root_voi(&BinaryMask::empty(Grid::unit([2, 2, 2]))), Err(Error::EmptyMask)));
    }

    #[test]
    fn threshold_ladder() {
        let t = GrowParams::default().thresholds();
        assert_eq!(t.first(), Some(&-950.0));
        assert_eq!(t.last(), Some(&-775.0));
        assert_eq!(t.len(), 8);
    }
}
