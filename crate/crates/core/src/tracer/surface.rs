use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::voi::Voi;
use crate::volume::{connected_components, BinaryMask, Connectivity, Grid};

/// Exit components smaller than this are noise.
pub const MIN_EXIT_VOXELS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Face {
    Entry,
    Front,
    XMin,
    XMax,
    YMin,
    YMax,
}

impl Face {
    /// Faces a voxel lies on, entry and front first.
    fn of(c: [usize; 3], dims: [usize; 3]) -> impl Iterator<Item = Face> {
        [
            (c[2] == 0, Face::Entry),
            (c[2] == dims[2] - 1, Face::Front),
            (c[0] == 0, Face::XMin),
            (c[0] == dims[0] - 1, Face::XMax),
            (c[1] == 0, Face::YMin),
            (c[1] == dims[1] - 1, Face::YMax),
        ]
        .into_iter()
        .filter_map(|(on, f)| on.then_some(f))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExitComponent {
    pub face: Face,
    pub label: u32,
    pub voxel_count: usize,
    /// Centroid in VOI-local coordinates (mm).
    pub centroid: Vector3<f64>,
}

fn check_lattice(m: &BinaryMask, voi: &Voi) -> Result<()> {
    let expected = voi.lattice(m.grid.spacing[0])?;
    if expected.dims != m.grid.dims {
        return Err(Error::GeometryMismatch(format!(
            "mask dims {:?} do not match VOI lattice {:?}",
            m.grid.dims, expected.dims
        )));
    }
    Ok(())
}

/// Connected pieces of `candidates` on the front and side faces (the entry
/// slice is excluded). Shell voxels are labeled jointly with 26-adjacency;
/// each component is reported on the face holding most of its voxels.
pub fn surface_exit_components(candidates: &BinaryMask, voi: &Voi) -> Result<Vec<ExitComponent>> {
    check_lattice(candidates, voi)?;
    let g = candidates.grid;
    let dims = g.dims;
    let shell = BinaryMask {
        grid: g,
        data: (0..g.len())
            .map(|i| {
                let c = g.coords(i);
                candidates.data[i]
                    && c[2] > 0
                    && (c[2] == dims[2] - 1 || c[0] == 0 || c[0] == dims[0] - 1 || c[1] == 0 || c[1] == dims[1] - 1)
            })
            .collect(),
    };
    let labels = connected_components(&shell, Connectivity::TwentySix);
    let n = labels.component_count;
    let mut count = vec![0usize; n];
    let mut sum = vec![Vector3::zeros(); n];
    let mut votes = vec![[0usize; 6]; n];
    for i in shell.indices() {
        let l = labels.labels[i] as usize - 1;
        count[l] += 1;
        sum[l] += g.world_of_index(i);
        if let Some(f) = Face::of(g.coords(i), dims).find(|f| *f != Face::Entry) {
            votes[l][f as usize] += 1;
        }
    }
    let mut out = Vec::new();
    for l in 0..n {
        if count[l] < MIN_EXIT_VOXELS {
            continue;
        }
        let best = (1..6).max_by_key(|&k| (votes[l][k], std::cmp::Reverse(k))).unwrap();
        let face = [Face::Entry, Face::Front, Face::XMin, Face::XMax, Face::YMin, Face::YMax][best];
        out.push(ExitComponent {
            face,
            label: l as u32 + 1,
            voxel_count: count[l],
            centroid: sum[l] / count[l] as f64,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakParams {
    pub s_ratio_max: f64,
    pub circularity_min: f64,
}

impl Default for LeakParams {
    fn default() -> Self {
        Self { s_ratio_max: 0.33, circularity_min: 0.4 }
    }
}

impl LeakParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.s_ratio_max > 0.0 && self.s_ratio_max < 1.0) || !(0.0..=1.0).contains(&self.circularity_min) {
            return Err(Error::InvalidParameter(format!(
                "leak parameters need 0 < s_ratio_max < 1 and 0 <= circularity_min <= 1 (got {self:?})"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LeakReason {
    SurfaceRatio(f64),
    Circularity(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LeakVerdict {
    Ok,
    Leak(LeakReason),
}

/// Number of voxels on the six faces of a lattice.
pub fn surface_voxel_count(dims: [usize; 3]) -> usize {
    let inner = |n: usize| n.saturating_sub(2);
    dims.iter().product::<usize>() - inner(dims[0]) * inner(dims[1]) * inner(dims[2])
}

/// Candidate voxels on the VOI faces over all surface voxels.
pub fn surface_ratio(candidates: &BinaryMask) -> f64 {
    let g = candidates.grid;
    let on = candidates.indices().filter(|&i| Face::of(g.coords(i), g.dims).next().is_some()).count();
    on as f64 / surface_voxel_count(g.dims) as f64
}

/// Pixels of a 2-D binary image, row-major `w x h`.
///
/// Contour measures work on the image smoothed by a separable `[1, 2, 1] / 4`
/// kernel, with linearly interpolated marching squares at level 1/2.
/// Components one pixel wide vanish under the smoothing and have no contour.
pub struct Plane<'a> {
    pub w: usize,
    pub h: usize,
    pub data: &'a [bool],
}

const LEVEL: f64 = 0.5;

/// Smoothed image over pixel coordinates `-1..=w` by `-1..=h`.
struct Smoothed {
    w: usize,
    v: Vec<f64>,
}

impl Smoothed {
    fn get(&self, x: i64, y: i64) -> f64 {
        self.v[(x + 1) as usize + self.w * (y + 1) as usize]
    }
}

impl Plane<'_> {
    fn at(&self, x: i64, y: i64) -> f64 {
        let on = x >= 0 && y >= 0 && (x as usize) < self.w && (y as usize) < self.h && self.data[x as usize + self.w * y as usize];
        on as u8 as f64
    }

    fn smoothed(&self) -> Smoothed {
        let (w, h) = (self.w as i64, self.h as i64);
        let k = [0.25, 0.5, 0.25];
        let sw = (w + 2) as usize;
        let mut rows = vec![0.0; sw * (h + 2) as usize];
        for y in -1..=h {
            for x in -1..=w {
                rows[(x + 1) as usize + sw * (y + 1) as usize] = (-1..=1).map(|d| k[(d + 1) as usize] * self.at(x + d, y)).sum();
            }
        }
        let row = |x: i64, y: i64| if (-1..=h).contains(&y) { rows[(x + 1) as usize + sw * (y + 1) as usize] } else { 0.0 };
        let mut v = vec![0.0; rows.len()];
        for y in -1..=h {
            for x in -1..=w {
                v[(x + 1) as usize + sw * (y + 1) as usize] = (-1..=1).map(|d| k[(d + 1) as usize] * row(x, y + d)).sum();
            }
        }
        Smoothed { w: sw, v }
    }

    /// Contour length and enclosed area, both in pixel units.
    fn contour(&self) -> (f64, f64) {
        let s = self.smoothed();
        let (mut length, mut area) = (0.0, 0.0);
        for y in -1..self.h as i64 {
            for x in -1..self.w as i64 {
                let p = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
                let v = [s.get(x, y), s.get(x + 1, y), s.get(x + 1, y + 1), s.get(x, y + 1)];
                let inside = v.map(|a| a > LEVEL);
                let cross = |k: usize| {
                    let j = (k + 1) % 4;
                    let t = (LEVEL - v[k]) / (v[j] - v[k]);
                    (p[k].0 + t * (p[j].0 - p[k].0), p[k].1 + t * (p[j].1 - p[k].1))
                };
                let cuts: Vec<usize> = (0..4).filter(|&k| inside[k] != inside[(k + 1) % 4]).collect();
                let dist = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).hypot(a.1 - b.1);
                let separated = cuts.len() == 4 && v.iter().sum::<f64>() / 4.0 <= LEVEL;
                if separated {
                    // two inside corners cut off on their own
                    for k in (0..4).filter(|&k| inside[k]) {
                        let (a, b) = (cross((k + 3) % 4), cross(k));
                        length += dist(a, b);
                        area += polygon_area(&[p[k], b, a]);
                    }
                    continue;
                }
                match cuts.len() {
                    2 => length += dist(cross(cuts[0]), cross(cuts[1])),
                    // joined saddle: pair each cut with the next outside corner's other edge
                    4 => {
                        for k in (0..4).filter(|&k| !inside[k]) {
                            length += dist(cross((k + 3) % 4), cross(k));
                        }
                    }
                    _ => {}
                }
                // inside part of the cell: walk corners, keeping inside ones and crossings
                let mut poly = Vec::with_capacity(8);
                for k in 0..4 {
                    if inside[k] {
                        poly.push(p[k]);
                    }
                    if inside[k] != inside[(k + 1) % 4] {
                        poly.push(cross(k));
                    }
                }
                area += polygon_area(&poly);
            }
        }
        (length, area)
    }

    /// Length of the iso-contour.
    pub fn perimeter(&self) -> f64 {
        self.contour().0
    }

    /// Area enclosed by the iso-contour.
    pub fn area(&self) -> f64 {
        self.contour().1
    }

    /// `4 pi A / P^2`; 0 when there is no contour.
    pub fn circularity(&self) -> f64 {
        let (p, a) = self.contour();
        if p == 0.0 {
            return 0.0;
        }
        4.0 * std::f64::consts::PI * a / (p * p)
    }
}

fn polygon_area(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len();
    if n < 3 {
        return 0.0;
    }
    let twice: f64 = (0..n).map(|i| pts[i].0 * pts[(i + 1) % n].1 - pts[(i + 1) % n].0 * pts[i].1).sum();
    twice.abs() / 2.0
}

/// Largest 8-connected component of the front face, as a plane image.
fn largest_front_component(candidates: &BinaryMask) -> Option<Vec<bool>> {
    let g = candidates.grid;
    let [nx, ny, nz] = g.dims;
    let face = Grid::new([nx, ny, 1], [1.0; 3], [0.0; 3]).ok()?;
    let slice = BinaryMask { grid: face, data: (0..nx * ny).map(|i| candidates.data[i + nx * ny * (nz - 1)]).collect() };
    let labels = connected_components(&slice, Connectivity::TwentySix);
    let sizes = labels.sizes();
    let (best, _) = sizes.iter().enumerate().max_by_key(|&(k, &s)| (s, std::cmp::Reverse(k)))?;
    Some(labels.labels.iter().map(|&l| l as usize == best + 1).collect())
}

/// Face-coverage and exit-contour tests; the first failing test wins.
pub fn detect_leak(candidates: &BinaryMask, voi: &Voi, p: &LeakParams) -> Result<LeakVerdict> {
    check_lattice(candidates, voi)?;
    p.validate()?;
    let s = surface_ratio(candidates);
    if s > p.s_ratio_max {
        return Ok(LeakVerdict::Leak(LeakReason::SurfaceRatio(s)));
    }
    if let Some(face) = largest_front_component(candidates).filter(|f| f.iter().filter(|&&b| b).count() >= MIN_EXIT_VOXELS) {
        let [nx, ny, _] = candidates.grid.dims;
        let c = Plane { w: nx, h: ny, data: &face }.circularity();
        if c < p.circularity_min {
            return Ok(LeakVerdict::Leak(LeakReason::Circularity(c)));
        }
    }
    Ok(LeakVerdict::Ok)
}
