//! Synthetic airway-tree phantoms with exact ground truth.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::{parse_kv, parse_value};
use crate::error::{Error, Result};
use crate::tracer::{AirwayTree, BranchRecord, BranchStatus};
use crate::volume::{gaussian_smooth, BinaryMask, Grid, ScalarVolume};

/// Wall thickness in voxels.
pub const WALL_VOXELS: usize = 2;
const MARGIN_MM: f64 = 3.0;
const SPONGE_SIGMA_MM: f64 = 0.5;
/// Air where the smoothed field exceeds this many standard deviations
/// (about 69% air).
const SPONGE_CUT_SD: f64 = -0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub generations: usize,
    pub root_radius: f64,
    pub radius_decay: f64,
    /// Angle between sibling branches, degrees.
    pub branch_angle: f64,
    pub branch_length_factor: f64,
    pub lumen_hu: f64,
    pub wall_hu: f64,
    pub background_hu: f64,
    pub noise_sigma: f64,
    pub rng_seed: u64,
    /// Isotropic voxel pitch of the generated volume (mm).
    pub spacing: f64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            generations: 3,
            root_radius: 4.0,
            radius_decay: 0.75,
            branch_angle: 60.0,
            branch_length_factor: 6.0,
            lumen_hu: -1000.0,
            wall_hu: 0.0,
            background_hu: -900.0,
            noise_sigma: 0.0,
            rng_seed: 0,
            spacing: 0.5,
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.generations < 1 {
            return bad("generations must be >= 1");
        }
        if !(self.radius_decay > 0.0 && self.radius_decay < 1.0) {
            return bad("radius_decay must lie in (0, 1)");
        }
        if !(self.lumen_hu < self.wall_hu) {
            return bad("lumen_hu must be below wall_hu");
        }
        if !(self.root_radius > 0.0) || !(self.spacing > 0.0) || !(self.branch_length_factor > 0.0) {
            return bad("root_radius, spacing and branch_length_factor must be > 0");
        }
        if !(self.noise_sigma >= 0.0) {
            return bad("noise_sigma must be >= 0");
        }
        if !(0.0..180.0).contains(&self.branch_angle) {
            return bad("branch_angle must lie in [0, 180)");
        }
        Ok(())
    }

    pub fn radius_at(&self, generation: usize) -> f64 {
        self.root_radius * self.radius_decay.powi(generation as i32)
    }

    /// Parse a flat `key = value` description; omitted keys keep defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Self::default();
        for (key, value) in parse_kv(text)? {
            let k = key.strip_prefix("phantom.").unwrap_or(&key);
            match k {
                "generations" => s.generations = parse_value(&key, &value)?,
                "root_radius" => s.root_radius = parse_value(&key, &value)?,
                "radius_decay" => s.radius_decay = parse_value(&key, &value)?,
                "branch_angle" => s.branch_angle = parse_value(&key, &value)?,
                "branch_length_factor" => s.branch_length_factor = parse_value(&key, &value)?,
                "lumen_hu" => s.lumen_hu = parse_value(&key, &value)?,
                "wall_hu" => s.wall_hu = parse_value(&key, &value)?,
                "background_hu" => s.background_hu = parse_value(&key, &value)?,
                "noise_sigma" => s.noise_sigma = parse_value(&key, &value)?,
                "rng_seed" => s.rng_seed = parse_value(&key, &value)?,
                "spacing" => s.spacing = parse_value(&key, &value)?,
                _ => return Err(Error::UnknownConfigKey(key)),
            }
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub mask: BinaryMask,
    pub tree: AirwayTree,
}

/// One straight tube piece of a phantom, in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: Vector3<f64>,
    pub end: Vector3<f64>,
    pub radius: f64,
}

impl Segment {
    fn contains(&self, p: &Vector3<f64>) -> bool {
        let d = self.end - self.start;
        let len2 = d.norm_squared();
        let t = (p - self.start).dot(&d) / len2;
        if !(0.0..=1.0).contains(&t) {
            return false;
        }
        (p - (self.start + d * t)).norm_squared() <= self.radius * self.radius
    }
}

/// Planned branch geometry: segments in breadth-first order with parents.
struct Layout {
    segments: Vec<Segment>,
    parents: Vec<Option<usize>>,
    generations: Vec<usize>,
}

fn layout(spec: &PhantomSpec) -> Layout {
    let half = (spec.branch_angle / 2.0).to_radians();
    let r0 = spec.root_radius;
    let root = Segment {
        start: Vector3::zeros(),
        end: Vector3::new(0.0, 0.0, -spec.branch_length_factor * r0),
        radius: r0,
    };
    let mut segments = vec![root];
    let mut parents = vec![None];
    let mut generations = vec![0];
    let mut bends = vec![Vector3::x()];
    let mut i = 0;
    while i < segments.len() {
        let g = generations[i];
        if g + 1 < spec.generations {
            let s = segments[i];
            let d = (s.end - s.start).normalize();
            let b = bends[i];
            let r = spec.radius_at(g + 1);
            for sign in [1.0, -1.0] {
                let dc = (d * half.cos() + b * (sign * half.sin())).normalize();
                segments.push(Segment { start: s.end, end: s.end + dc * spec.branch_length_factor * r, radius: r });
                parents.push(Some(i));
                generations.push(g + 1);
                bends.push(dc.cross(&b).normalize());
            }
        }
        i += 1;
    }
    Layout { segments, parents, generations }
}

/// Everything inside the segments or the junction balls at interior ends.
fn rasterize(grid: &Grid, segments: &[Segment], balls: &[(Vector3<f64>, f64)]) -> BinaryMask {
    let mut m = BinaryMask::empty(*grid);
    let mut fill = |lo: Vector3<f64>, hi: Vector3<f64>, inside: &dyn Fn(&Vector3<f64>) -> bool| {
        let a = grid.continuous_index(&lo);
        let b = grid.continuous_index(&hi);
        let range = |k: usize| {
            let l = a[k].min(b[k]).floor().max(0.0) as usize;
            let h = (a[k].max(b[k]).ceil().max(0.0) as usize).min(grid.dims[k] - 1);
            l..=h
        };
        for z in range(2) {
            for y in range(1) {
                for x in range(0) {
                    if inside(&grid.world(x, y, z)) {
                        m.set(x, y, z, true);
                    }
                }
            }
        }
    };
    for s in segments {
        let r = Vector3::repeat(s.radius);
        let lo = s.start.inf(&s.end) - r;
        let hi = s.start.sup(&s.end) + r;
        fill(lo, hi, &|p| s.contains(p));
    }
    for &(c, r) in balls {
        let rv = Vector3::repeat(r);
        fill(c - rv, c + rv, &|p| (p - c).norm_squared() <= r * r);
    }
    m
}

/// Paint intensities from a lumen mask: a `WALL_VOXELS` shell at wall_hu,
/// everything else at background_hu, then seeded Gaussian noise rounded to
/// whole HU.
fn paint(lumen: &BinaryMask, spec: &PhantomSpec) -> ScalarVolume {
    let mut shell = lumen.clone();
    for _ in 0..WALL_VOXELS {
        shell = shell.dilate26();
    }
    let mut data: Vec<f32> = lumen
        .data
        .iter()
        .zip(&shell.data)
        .map(|(&l, &s)| {
            if l {
                spec.lumen_hu as f32
            } else if s {
                spec.wall_hu as f32
            } else {
                spec.background_hu as f32
            }
        })
        .collect();
    if spec.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
        let normal = Normal::new(0.0, spec.noise_sigma).expect("sigma validated");
        for v in data.iter_mut() {
            *v = (*v as f64 + normal.sample(&mut rng)).round() as f32;
        }
    }
    ScalarVolume { grid: lumen.grid, data }
}

fn polyline(s: &Segment, step: f64) -> Vec<Vector3<f64>> {
    let len = (s.end - s.start).norm();
    let n = ((len / step).ceil() as usize).max(1);
    (0..=n).map(|k| s.start + (s.end - s.start) * (k as f64 / n as f64)).collect()
}

fn truth_tree(layout: &Layout, mask: BinaryMask, step: f64) -> AirwayTree {
    let branches = layout
        .segments
        .iter()
        .enumerate()
        .map(|(i, s)| BranchRecord {
            id: i,
            parent: layout.parents[i],
            generation: layout.generations[i],
            vois: Vec::new(),
            centerline: polyline(s, step),
            mean_radius: s.radius,
            status: BranchStatus::Terminated,
        })
        .collect();
    AirwayTree { branches, root: 0, mask, truncated: false }
}

/// Extra volume content used to build adversarial phantoms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AirPocket {
    /// Which branch (breadth-first index) the breach opens from.
    pub branch: usize,
    /// Pocket radius (mm).
    pub radius: f64,
}

/// A voxel a few millimetres down the root lumen, suitable as a trace seed.
pub fn seed_voxel(grid: &Grid) -> Option<[usize; 3]> {
    grid.nearest_voxel(&Vector3::new(0.0, 0.0, -3.0))
}

/// Full binary tree phantom. The root enters through the top (max z) face
/// and runs along -z; sibling pairs open by `branch_angle` in planes that
/// alternate per generation.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<(ScalarVolume, GroundTruth)> {
    spec.validate()?;
    let deepest = spec.generations - 1;
    let r = spec.radius_at(deepest);
    if r < spec.spacing {
        return Err(Error::UnresolvableGeneration { generation: deepest, radius_mm: r, pitch_mm: spec.spacing });
    }
    let lay = layout(spec);
    let grid = tree_grid(spec, &lay.segments, &[])?;
    let balls = junction_balls(&lay);
    let lumen = rasterize(&grid, &lay.segments, &balls);
    let volume = paint(&lumen, spec);
    let tree = truth_tree(&lay, lumen.clone(), spec.spacing);
    Ok((volume, GroundTruth { mask: lumen, tree }))
}

/// Tree phantom whose end wall is breached at the tip of one terminal
/// branch, opening into a spongy air pocket straight ahead: a ball whose
/// inside is a random network of air tunnels and thin walls, like
/// emphysematous parenchyma. Returns the pocket air voxels (not part of the
/// truth) as the third element.
pub fn generate_breach_phantom(
    spec: &PhantomSpec,
    pocket: AirPocket,
) -> Result<(ScalarVolume, GroundTruth, BinaryMask)> {
    spec.validate()?;
    if !(pocket.radius > 0.0) {
        return Err(Error::InvalidParameter(format!("pocket radius must be > 0, got {}", pocket.radius)));
    }
    let lay = layout(spec);
    let s = *lay
        .segments
        .get(pocket.branch)
        .ok_or_else(|| Error::InvalidParameter(format!("no branch {} in phantom", pocket.branch)))?;
    if lay.parents.contains(&Some(pocket.branch)) {
        return Err(Error::InvalidParameter(format!("branch {} is not terminal", pocket.branch)));
    }
    let d = (s.end - s.start).normalize();
    let breach = s.end;
    let gap = WALL_VOXELS as f64 * spec.spacing + 1.5 * spec.spacing;
    let center = breach + d * (gap + pocket.radius);
    let channel = Segment { start: breach, end: center, radius: (s.radius * 0.6).max(spec.spacing) };
    let extra = [Segment { start: center, end: center + d * 1e-9, radius: pocket.radius }];
    let grid = tree_grid(spec, &lay.segments, &extra)?;
    let balls = junction_balls(&lay);
    let lumen = rasterize(&grid, &lay.segments, &balls);
    let ball = rasterize(&grid, &[], &[(center, pocket.radius)]);
    let tunnels = sponge(&grid, &ball, spec.rng_seed ^ 0x5eed);
    let mut opening = rasterize(&grid, &[channel], &[]);
    opening.union_with(&tunnels)?;
    let mut air = lumen.clone();
    air.union_with(&opening)?;
    let volume = paint(&air, spec);
    let pocket_mask = BinaryMask {
        grid,
        data: opening.data.iter().zip(&lumen.data).map(|(&o, &l)| o && !l).collect(),
    };
    let tree = truth_tree(&lay, lumen.clone(), spec.spacing);
    Ok((volume, GroundTruth { mask: lumen, tree }, pocket_mask))
}

/// Air phase of a smoothed Gaussian random field inside `region`.
fn sponge(grid: &Grid, region: &BinaryMask, seed: u64) -> BinaryMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let noise: Vec<f64> = (0..grid.len()).map(|_| normal.sample(&mut rng)).collect();
    let field = gaussian_smooth(grid, &noise, SPONGE_SIGMA_MM);
    let sd = (field.iter().map(|f| f * f).sum::<f64>() / field.len() as f64).sqrt();
    let cut = SPONGE_CUT_SD * sd;
    BinaryMask { grid: *grid, data: region.data.iter().zip(&field).map(|(&r, &f)| r && f > cut).collect() }
}

fn junction_balls(lay: &Layout) -> Vec<(Vector3<f64>, f64)> {
    (0..lay.segments.len())
        .filter(|&i| lay.parents.iter().any(|p| *p == Some(i)))
        .map(|i| (lay.segments[i].end, lay.segments[i].radius))
        .collect()
}

/// Lattice bounding the segments plus wall and margin, with the top voxel
/// layer through the root's entry point (world z = 0).
fn tree_grid(spec: &PhantomSpec, segments: &[Segment], extra: &[Segment]) -> Result<Grid> {
    let h = spec.spacing;
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for s in segments.iter().chain(extra) {
        let pad = s.radius + WALL_VOXELS as f64 * h + MARGIN_MM;
        lo = lo.inf(&(s.start.inf(&s.end) - Vector3::repeat(pad)));
        hi = hi.sup(&(s.start.sup(&s.end) + Vector3::repeat(pad)));
    }
    hi.z = 0.0;
    let n = |a: usize| ((hi[a] - lo[a]) / h).ceil() as usize + 1;
    let dims = [n(0), n(1), n(2)];
    let origin = [lo.x, lo.y, -((dims[2] - 1) as f64) * h];
    Grid::new(dims, [h; 3], origin)
}

/// Single straight tube of the given radius through the center of a
/// centered lattice; the tube is an infinite line clipped by the box, so it
/// opens on the faces it crosses. The box covers `length` along the axis
/// plus the tube cross-section, wall and margin.
pub fn generate_cylinder(
    radius: f64,
    length: f64,
    axis: Vector3<f64>,
    profile: &PhantomSpec,
) -> Result<(ScalarVolume, GroundTruth)> {
    if !(radius > 0.0) || !(length > 0.0) || !(profile.spacing > 0.0) {
        return Err(Error::InvalidParameter("cylinder radius, length and spacing must be > 0".into()));
    }
    if !(profile.lumen_hu < profile.wall_hu) {
        return Err(Error::InvalidParameter("lumen_hu must be below wall_hu".into()));
    }
    let n = axis.norm();
    if !(n > 0.0) {
        return Err(Error::InvalidParameter("cylinder axis must be nonzero".into()));
    }
    let a = axis / n;
    let h = profile.spacing;
    let pad = radius + WALL_VOXELS as f64 * h + MARGIN_MM;
    let mut dims = [0usize; 3];
    let mut origin = [0.0; 3];
    for k in 0..3 {
        let half = a[k].abs() * length / 2.0 + pad;
        let m = (half / h).ceil() as usize;
        dims[k] = 2 * m + 1;
        origin[k] = -(m as f64) * h;
    }
    let grid = Grid::new(dims, [h; 3], origin)?;
    let lumen = BinaryMask::from_fn(grid, |x, y, z| {
        let p = grid.world(x, y, z);
        (p - a * p.dot(&a)).norm_squared() <= radius * radius
    });
    let volume = paint(&lumen, profile);
    // chord of the axis line inside the lattice hull
    let mut t_lo = f64::NEG_INFINITY;
    let mut t_hi = f64::INFINITY;
    for k in 0..3 {
        if a[k].abs() > 1e-12 {
            let (t0, t1) = (origin[k] / a[k], -origin[k] / a[k]);
            t_lo = t_lo.max(t0.min(t1));
            t_hi = t_hi.min(t0.max(t1));
        }
    }
    let seg = Segment { start: a * t_hi, end: a * t_lo, radius };
    let lay = Layout { segments: vec![seg], parents: vec![None], generations: vec![0] };
    let tree = truth_tree(&lay, lumen.clone(), h);
    Ok((volume, GroundTruth { mask: lumen, tree }))
}
