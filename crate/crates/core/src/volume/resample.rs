use nalgebra::Vector3;

use super::{BinaryMask, ScalarVolume};
use crate::error::{Error, Result};
use crate::voi::Voi;

/// Padding for samples outside the source volume (solid-tissue sentinel).
pub const OUTSIDE_HU: f32 = 1000.0;

/// Resample the VOI box from `v` at `pitch` with trilinear interpolation.
pub fn resample_to_voi(v: &ScalarVolume, voi: &Voi, pitch: f64) -> Result<ScalarVolume> {
    let grid = voi.lattice(pitch)?;
    let [nx, ny, nz] = grid.dims;
    let mut data = Vec::with_capacity(grid.len());
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let local = grid.world(i, j, k);
                let p = voi.local_to_world(&local);
                data.push(v.sample_world(&p).map(|x| x as f32).unwrap_or(OUTSIDE_HU));
            }
        }
    }
    ScalarVolume::new(grid, data)
}

/// Back-project a VOI-frame mask into the global lattice (nearest neighbor).
///
/// The result is `target ∪ projection`; bits are never cleared.
pub fn project_mask_to_global(
    m: &BinaryMask,
    voi: &Voi,
    target: &BinaryMask,
) -> Result<BinaryMask> {
    let pitch = m.grid.spacing[0];
    let expected = voi.lattice(pitch)?;
    if expected.dims != m.grid.dims {
        return Err(Error::GeometryMismatch(format!(
            "VOI mask dims {:?} do not match VOI lattice {:?}",
            m.grid.dims, expected.dims
        )));
    }
    let mut out = target.clone();
    for i in projected_indices(m, voi, &target.grid) {
        out.data[i] = true;
    }
    Ok(out)
}

/// Global voxels whose nearest VOI-lattice voxel is set in `m`.
pub(crate) fn projected_indices(m: &BinaryMask, voi: &Voi, g: &super::Grid) -> Vec<usize> {
    let mut out = Vec::new();
    if m.is_empty_set() {
        return out;
    }
    let corners = voi.corners();
    let mut lo = [i64::MAX; 3];
    let mut hi = [i64::MIN; 3];
    for c in &corners {
        let ci = g.continuous_index(c);
        for a in 0..3 {
            lo[a] = lo[a].min(ci[a].floor() as i64 - 1);
            hi[a] = hi[a].max(ci[a].ceil() as i64 + 1);
        }
    }
    for a in 0..3 {
        lo[a] = lo[a].max(0);
        hi[a] = hi[a].min(g.dims[a] as i64 - 1);
    }
    let lg = m.grid;
    for z in lo[2]..=hi[2] {
        for y in lo[1]..=hi[1] {
            for x in lo[0]..=hi[0] {
                let p = g.world(x as usize, y as usize, z as usize);
                let local = voi.world_to_local(&p);
                let c = lg.continuous_index(&local);
                let r = Vector3::new(c.x.round(), c.y.round(), c.z.round());
                if let Some(li) = lg.checked_index(r.x as i64, r.y as i64, r.z as i64) {
                    if m.data[li] {
                        out.push(g.index(x as usize, y as usize, z as usize));
                    }
                }
            }
        }
    }
    out
}
