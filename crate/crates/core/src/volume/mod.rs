//! Voxel lattices, MetaImage I/O, VOI resampling, labeling and thinning.
//!
//! All lattices store samples in x-fastest order. World coordinates (mm) of
//! voxel `(i, j, k)` are `origin + (i, j, k) * spacing`, i.e. the origin is the
//! center of the first voxel.

mod filter;
mod label;
mod metaimage;
mod resample;
mod thin;

pub use filter::{central_gradient, gaussian_smooth, hessian_at, laplacian};
pub use label::{connected_components, Connectivity, LabelMap};
pub use metaimage::{load_mask, load_volume, save_mask, save_volume, ElementType};
pub use resample::{project_mask_to_global, resample_to_voi, OUTSIDE_HU};
pub(crate) use resample::projected_indices;
pub use thin::{is_simple_point, thin_3d};

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Lattice geometry shared by every voxel container.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl Grid {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidParameter(format!("dims must be >= 1, got {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "spacing must be > 0, got {spacing:?}"
            )));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidParameter("origin must be finite".into()));
        }
        Ok(Self { dims, spacing, origin })
    }

    /// Unit-spaced grid at the origin.
    pub fn unit(dims: [usize; 3]) -> Self {
        Self { dims, spacing: [1.0; 3], origin: [0.0; 3] }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    /// Checked linear index for signed coordinates.
    #[inline]
    pub fn checked_index(&self, x: i64, y: i64, z: i64) -> Option<usize> {
        if x < 0 || y < 0 || z < 0 {
            return None;
        }
        let (x, y, z) = (x as usize, y as usize, z as usize);
        if x >= self.dims[0] || y >= self.dims[1] || z >= self.dims[2] {
            return None;
        }
        Some(self.index(x, y, z))
    }

    pub fn world(&self, x: usize, y: usize, z: usize) -> Vector3<f64> {
        Vector3::new(
            self.origin[0] + x as f64 * self.spacing[0],
            self.origin[1] + y as f64 * self.spacing[1],
            self.origin[2] + z as f64 * self.spacing[2],
        )
    }

    pub fn world_of_index(&self, idx: usize) -> Vector3<f64> {
        let [x, y, z] = self.coords(idx);
        self.world(x, y, z)
    }

    /// Continuous voxel coordinates of a world point.
    pub fn continuous_index(&self, p: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(
            (p.x - self.origin[0]) / self.spacing[0],
            (p.y - self.origin[1]) / self.spacing[1],
            (p.z - self.origin[2]) / self.spacing[2],
        )
    }

    /// Nearest voxel to a world point, if it lies inside the lattice.
    pub fn nearest_voxel(&self, p: &Vector3<f64>) -> Option<[usize; 3]> {
        let c = self.continuous_index(p);
        let r = [c.x.round() as i64, c.y.round() as i64, c.z.round() as i64];
        self.checked_index(r[0], r[1], r[2])
            .map(|_| [r[0] as usize, r[1] as usize, r[2] as usize])
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn same_geometry(&self, other: &Grid) -> bool {
        self.dims == other.dims
            && self
                .spacing
                .iter()
                .zip(other.spacing.iter())
                .all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(1.0))
            && self
                .origin
                .iter()
                .zip(other.origin.iter())
                .all(|(a, b)| (a - b).abs() <= 1e-6)
    }

    pub fn check_same(&self, other: &Grid, what: &str) -> Result<()> {
        if self.same_geometry(other) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!(
                "{what}: {:?}/{:?}/{:?} vs {:?}/{:?}/{:?}",
                self.dims, self.spacing, self.origin, other.dims, other.spacing, other.origin
            )))
        }
    }

    /// Iterate the in-bounds 26-neighborhood (or 6-neighborhood) of a voxel.
    pub fn neighbors(
        &self,
        idx: usize,
        connectivity: Connectivity,
    ) -> impl Iterator<Item = usize> + '_ {
        let [x, y, z] = self.coords(idx);
        connectivity
            .offsets()
            .iter()
            .filter_map(move |&[dx, dy, dz]| {
                self.checked_index(x as i64 + dx, y as i64 + dy, z as i64 + dz)
            })
    }
}

/// Scalar lattice (CT intensities in HU, or filter responses).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVolume {
    pub grid: Grid,
    pub data: Vec<f32>,
}

impl ScalarVolume {
    pub fn new(grid: Grid, data: Vec<f32>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "volume of {} voxels needs {} values, got {}",
                grid.len(),
                grid.len(),
                data.len()
            )));
        }
        Ok(Self { grid, data })
    }

    pub fn filled(grid: Grid, value: f32) -> Self {
        Self { data: vec![value; grid.len()], grid }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(usize, usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for z in 0..grid.dims[2] {
            for y in 0..grid.dims[1] {
                for x in 0..grid.dims[0] {
                    data.push(f(x, y, z));
                }
            }
        }
        Self { grid, data }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    /// Bounds-checked lookup.
    pub fn get(&self, x: i64, y: i64, z: i64) -> Result<f32> {
        self.grid
            .checked_index(x, y, z)
            .map(|i| self.data[i])
            .ok_or(Error::OutOfBounds(x, y, z))
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> f32 {
        self.data[self.grid.index(x, y, z)]
    }

    /// Trilinear interpolation at a world point; `None` outside the lattice hull.
    pub fn sample_world(&self, p: &Vector3<f64>) -> Option<f64> {
        let c = self.grid.continuous_index(p);
        trilinear(&self.grid, &c, |i| self.data[i] as f64)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }

    pub fn from_f64(grid: Grid, data: &[f64]) -> Self {
        Self { grid, data: data.iter().map(|&v| v as f32).collect() }
    }
}

/// Voxel membership lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    pub grid: Grid,
    pub data: Vec<bool>,
}

impl BinaryMask {
    pub fn empty(grid: Grid) -> Self {
        Self { data: vec![false; grid.len()], grid }
    }

    pub fn full(grid: Grid) -> Self {
        Self { data: vec![true; grid.len()], grid }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(usize, usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for z in 0..grid.dims[2] {
            for y in 0..grid.dims[1] {
                for x in 0..grid.dims[0] {
                    data.push(f(x, y, z));
                }
            }
        }
        Self { grid, data }
    }

    pub fn from_indices(grid: Grid, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut m = Self::empty(grid);
        for i in indices {
            m.data[i] = true;
        }
        m
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty_set(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> bool {
        self.data[self.grid.index(x, y, z)]
    }

    pub fn get(&self, x: i64, y: i64, z: i64) -> bool {
        self.grid.checked_index(x, y, z).map(|i| self.data[i]).unwrap_or(false)
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let i = self.grid.index(x, y, z);
        self.data[i] = value;
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.data.iter().enumerate().filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn union_with(&mut self, other: &BinaryMask) -> Result<()> {
        self.grid.check_same(&other.grid, "mask union")?;
        for (a, &b) in self.data.iter_mut().zip(other.data.iter()) {
            *a |= b;
        }
        Ok(())
    }

    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.grid.check_same(&other.grid, "mask intersection")?;
        Ok(BinaryMask {
            grid: self.grid,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a && b).collect(),
        })
    }

    /// Dilation by the 3x3x3 cube.
    pub fn dilate26(&self) -> BinaryMask {
        let mut out = self.clone();
        for i in self.indices() {
            for n in self.grid.neighbors(i, Connectivity::TwentySix) {
                out.data[n] = true;
            }
        }
        out
    }

    /// 26-erosion; voxels beyond the lattice count as set, so shapes cut by
    /// the boundary are not eaten from the outside.
    pub fn erode26(&self) -> BinaryMask {
        let g = self.grid;
        let data = (0..g.len())
            .map(|i| {
                if !self.data[i] {
                    return false;
                }
                let [x, y, z] = g.coords(i);
                Connectivity::TwentySix.offsets().iter().all(|o| {
                    g.checked_index(x as i64 + o[0], y as i64 + o[1], z as i64 + o[2]).is_none_or(|n| self.data[n])
                })
            })
            .collect();
        BinaryMask { grid: g, data }
    }
}

/// Trilinear interpolation in continuous index space.
///
/// Points outside `[0, n-1]` along any axis return `None` (a tolerance of
/// 1e-9 voxel absorbs rounding at the hull).
pub(crate) fn trilinear(
    grid: &Grid,
    c: &Vector3<f64>,
    value: impl Fn(usize) -> f64,
) -> Option<f64> {
    Some(trilinear_weights(grid, c)?.iter().map(|&(i, w)| value(i) * w).sum())
}

/// The eight (index, weight) pairs of a trilinear lookup.
pub(crate) fn trilinear_weights(grid: &Grid, c: &Vector3<f64>) -> Option<[(usize, f64); 8]> {
    const EPS: f64 = 1e-9;
    let mut base = [0usize; 3];
    let mut frac = [0.0f64; 3];
    for a in 0..3 {
        let n = grid.dims[a];
        let mut t = c[a];
        if t < -EPS || t > (n - 1) as f64 + EPS {
            return None;
        }
        t = t.clamp(0.0, (n - 1) as f64);
        let mut i = t.floor() as usize;
        if i >= n - 1 {
            i = n.saturating_sub(2);
        }
        base[a] = i;
        frac[a] = if n == 1 { 0.0 } else { t - i as f64 };
    }
    let step = |a: usize| if grid.dims[a] > 1 { 1 } else { 0 };
    let (sx, sy, sz) = (step(0), step(1), step(2));
    let [fx, fy, fz] = frac;
    let mut out = [(0usize, 0.0f64); 8];
    for (k, o) in out.iter_mut().enumerate() {
        let (dx, dy, dz) = (k & 1, (k >> 1) & 1, (k >> 2) & 1);
        let w = (if dx == 1 { fx } else { 1.0 - fx })
            * (if dy == 1 { fy } else { 1.0 - fy })
            * (if dz == 1 { fz } else { 1.0 - fz });
        *o = (grid.index(base[0] + dx * sx, base[1] + dy * sy, base[2] + dz * sz), w);
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_of_range_lookup_is_an_error() {
        let v = ScalarVolume::filled(Grid::unit([2, 3, 4]), 1.0);
        assert!(v.get(1, 2, 3).is_ok());
        assert!(matches!(v.get(2, 0, 0), Err(Error::OutOfBounds(2, 0, 0))));
        assert!(v.get(0, -1, 0).is_err());
    }

    #[test]
    fn grid_rejects_bad_metadata() {
        assert!(Grid::new([0, 1, 1], [1.0; 3], [0.0; 3]).is_err());
        assert!(Grid::new([1, 1, 1], [1.0, 0.0, 1.0], [0.0; 3]).is_err());
        assert!(Grid::new([1, 1, 1], [1.0; 3], [0.0; 3]).is_ok());
    }

    #[test]
    fn trilinear_reproduces_lattice_values_and_linear_functions() {
        let g = Grid::new([4, 5, 6], [0.5, 1.0, 2.0], [1.0, -2.0, 3.0]).unwrap();
        let v = ScalarVolume::from_fn(g, |x, y, z| (x + 10 * y + 100 * z) as f32);
        let p = g.world(2, 3, 4);
        assert_eq!(v.sample_world(&p), Some(432.0));
        // halfway between lattice points along x
        let q = p + Vector3::new(0.25, 0.0, 0.0);
        assert!((v.sample_world(&q).unwrap() - 432.5).abs() < 1e-9);
        assert_eq!(v.sample_world(&g.world(3, 4, 5)), Some(543.0));
        assert!(v.sample_world(&(g.world(3, 4, 5) + Vector3::new(0.01, 0.0, 0.0))).is_none());
    }
}
