//! Circle-flux tube-likeness, centerline extraction and branch points.

mod graph;

pub use graph::{find_branch_points, BranchPoint, CenterlineGraph};

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};
use crate::gvf::VectorField;
use crate::par;
use crate::voi::complete_frame;
use crate::volume::{thin_3d, BinaryMask, ScalarVolume};

/// Factor between raw field units and the threshold units of `t_m`/`t_l`.
pub const THRESHOLD_SCALE: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TubeParams {
    /// Tube-likeness threshold, in units of 1/1000 mean flow.
    pub t_l: f64,
    /// GVF magnitude threshold, in units of 1/1000 field magnitude.
    pub t_m: f64,
    pub r_max: f64,
    pub samples: usize,
    /// Radius growth stops once the mean flow falls below its running
    /// maximum divided by this factor.
    pub edge_stop: f64,
}

impl Default for TubeParams {
    fn default() -> Self {
        Self { t_l: 500.0, t_m: 250.0, r_max: 8.0, samples: 32, edge_stop: 2.0 }
    }
}

impl TubeParams {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 8 || !(self.r_max > 0.0) || !(self.edge_stop > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tube parameters need samples >= 8, r_max > 0, edge_stop > 1 (got {self:?})"
            )));
        }
        Ok(())
    }
}

/// Unit directions of a `samples`-point ring in the plane normal to `normal`.
fn ring(normal: &Vector3<f64>, samples: usize) -> Vec<Vector3<f64>> {
    let n = normal.normalize();
    let u = complete_frame(&n);
    let w = n.cross(&u);
    (0..samples)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / samples as f64;
            u * a.cos() + w * a.sin()
        })
        .collect()
}

/// Mean inward flow `-<V, D>` over `samples` points on the circle of radius
/// `r` around `x` in the plane normal to `normal`. `None` if any sample
/// falls outside the field.
pub fn mean_flow<F>(sample: F, x: &Vector3<f64>, normal: &Vector3<f64>, r: f64, samples: usize) -> Option<f64>
where
    F: Fn(&Vector3<f64>) -> Option<Vector3<f64>>,
{
    let dirs = ring(normal, samples);
    let mut flow = 0.0;
    for d in &dirs {
        flow -= sample(&(x + d * r))?.dot(d);
    }
    Some(flow / samples as f64)
}

/// Mean inward flow through circles of growing radius around `x` in the
/// plane normal to `normal`.
///
/// Radii start at one lattice pitch and grow by half a pitch up to `r_max`.
/// Growth stops when the mean flow falls below its running maximum divided
/// by `edge_stop` (the circle has reached the wall, where the flow turns
/// outward) or when a sample leaves the field. Returns the best mean flow
/// and the radius at which growth stopped.
pub fn tube_likeness(
    field: &VectorField,
    x: &Vector3<f64>,
    normal: &Vector3<f64>,
    p: &TubeParams,
) -> Result<(f64, f64)> {
    let dirs = ring(normal, p.samples);
    let pitch = field.grid.min_spacing();
    let mut best = f64::NEG_INFINITY;
    let mut radius = pitch;
    let mut r = pitch;
    let mut first = true;
    while r <= p.r_max + 1e-9 {
        let mut flow = 0.0;
        for d in &dirs {
            let Some(v) = field.sample_world(&(x + d * r)) else {
                if first {
                    return Err(Error::TooCloseToBoundary);
                }
                return Ok((best, radius));
            };
            flow -= v.dot(d);
        }
        flow /= p.samples as f64;
        first = false;
        radius = r;
        if flow > best {
            best = flow;
        } else if flow < best / p.edge_stop {
            break;
        }
        r += 0.5 * pitch;
    }
    Ok((best, radius))
}

/// Axis estimate at a voxel: eigenvector of the smallest eigenvalue of the
/// field's structure tensor over the 3x3x3 neighborhood. Inside a tube the
/// flow lies in the cross-section plane, so this is the tube direction.
pub fn local_axis(field: &VectorField, x: usize, y: usize, z: usize) -> Vector3<f64> {
    let g = field.grid;
    let mut t = Matrix3::zeros();
    for dz in -1i64..=1 {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if let Some(i) = g.checked_index(x as i64 + dx, y as i64 + dy, z as i64 + dz) {
                    let v = field.data[i];
                    t += v * v.transpose();
                }
            }
        }
    }
    if t.norm() == 0.0 {
        return Vector3::z();
    }
    let e = SymmetricEigen::new(t);
    e.eigenvectors.column(e.eigenvalues.imin()).into_owned()
}

/// The local axis plus the two lattice axes closest to it.
fn candidate_normals(axis: &Vector3<f64>) -> [Vector3<f64>; 3] {
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| axis[b].abs().total_cmp(&axis[a].abs()));
    let unit = |k: usize| {
        let mut e = Vector3::zeros();
        e[k] = 1.0;
        e
    };
    [*axis, unit(order[0]), unit(order[1])]
}

fn score_at(field: &VectorField, x: usize, y: usize, z: usize, p: &TubeParams) -> f64 {
    let c = field.grid.world(x, y, z);
    let mut best = 0.0f64;
    let mut any = false;
    for n in candidate_normals(&local_axis(field, x, y, z)) {
        if let Ok((s, _)) = tube_likeness(field, &c, &n, p) {
            best = if any { best.max(s) } else { s };
            any = true;
        }
    }
    best
}

/// Per-voxel tube-likeness, maximized over the candidate normals; voxels
/// where no circle fits score 0.
pub fn tube_likeness_map(field: &VectorField, p: &TubeParams) -> Result<ScalarVolume> {
    p.validate()?;
    tube_likeness_map_masked(field, None, p)
}

/// As [`tube_likeness_map`], evaluated only inside `mask` (0 elsewhere).
pub fn tube_likeness_map_masked(
    field: &VectorField,
    mask: Option<&BinaryMask>,
    p: &TubeParams,
) -> Result<ScalarVolume> {
    p.validate()?;
    let g = field.grid;
    if let Some(m) = mask {
        g.check_same(&m.grid, "tube-likeness mask")?;
    }
    let [nx, ny, _] = g.dims;
    let mut out = vec![0.0f64; g.len()];
    par::for_each_slab(&mut out, nx * ny, |z, slab| {
        for y in 0..ny {
            for x in 0..nx {
                if mask.is_none_or(|m| m.data[g.index(x, y, z)]) {
                    slab[x + nx * y] = score_at(field, x, y, z, p);
                }
            }
        }
    });
    Ok(ScalarVolume::from_f64(g, &out))
}

/// Voxels passing both thresholds inside `candidates` (scaled units).
pub fn centerline_candidates(
    magnitude: &ScalarVolume,
    tubeness: &ScalarVolume,
    candidates: &BinaryMask,
    p: &TubeParams,
) -> Result<BinaryMask> {
    magnitude.grid.check_same(&tubeness.grid, "centerline inputs")?;
    magnitude.grid.check_same(&candidates.grid, "centerline inputs")?;
    let data = (0..candidates.data.len())
        .map(|i| {
            candidates.data[i]
                && THRESHOLD_SCALE * (magnitude.data[i] as f64) < p.t_m
                && THRESHOLD_SCALE * (tubeness.data[i] as f64) > p.t_l
        })
        .collect();
    Ok(BinaryMask { grid: candidates.grid, data })
}

/// Threshold, thin, and build the centerline graph.
pub fn extract_centerline(
    magnitude: &ScalarVolume,
    tubeness: &ScalarVolume,
    candidates: &BinaryMask,
    p: &TubeParams,
) -> Result<(BinaryMask, CenterlineGraph)> {
    let c = centerline_candidates(magnitude, tubeness, candidates, p)?;
    let thin = thin_3d(&c);
    let graph = CenterlineGraph::from_mask(&thin);
    Ok((thin, graph))
}
