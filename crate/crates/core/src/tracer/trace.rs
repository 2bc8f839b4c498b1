use std::collections::VecDeque;

use nalgebra::Vector3;

use super::placement::extend_voi;
use super::surface::{detect_leak, surface_exit_components, ExitComponent, LeakVerdict};
use super::tree::{AirwayTree, BranchRecord, BranchStatus, TracedVoi};
use crate::config::Config;
use crate::enhance::{cef, sharpen_log};
use crate::error::Result;
use crate::gvf::{initial_field, initial_field_within, magnitude_map, solve_gvf, VectorField};
use crate::trachea::{estimate_root, grow_trachea};
use crate::tube::{extract_centerline, find_branch_points, tube_likeness_map_masked, CenterlineGraph, THRESHOLD_SCALE};
use crate::voi::Voi;
use crate::volume::{
    connected_components, projected_indices, resample_to_voi, BinaryMask, Connectivity, Grid, ScalarVolume,
};

const NONE: usize = usize::MAX;
const CLOSING_STEPS: usize = 2;

struct Task {
    branch: usize,
    voi: Voi,
}

/// Intermediate volumes of one VOI, for inspection.
#[derive(Debug, Clone)]
pub struct VoiInspection {
    pub resampled: ScalarVolume,
    pub sharpened: ScalarVolume,
    pub cef_score: ScalarVolume,
    pub candidates: BinaryMask,
    pub gvf: VectorField,
    pub gvf_magnitude: ScalarVolume,
    pub tubeness: ScalarVolume,
    pub centerline: BinaryMask,
}

/// Run the per-VOI filters on one box without tracking. The tube-likeness
/// map covers the whole lattice.
pub fn inspect_voi(v: &ScalarVolume, voi: &Voi, pitch: f64, cfg: &Config) -> Result<VoiInspection> {
    cfg.validate()?;
    let resampled = resample_to_voi(v, voi, pitch)?;
    let sharpened = sharpen_log(&resampled, cfg.enhance.beta, cfg.enhance.log_sigma);
    let (cef_score, candidates) = cef(&sharpened, &cfg.enhance)?;
    let field = solve_gvf(&initial_field(&resampled, &cfg.gvf)?, &cfg.gvf)?;
    let gvf_magnitude = magnitude_map(&field);
    let tubeness = tube_likeness_map_masked(&field, None, &cfg.tube)?;
    let (centerline, _) = extract_centerline(&gvf_magnitude, &tubeness, &candidates, &cfg.tube)?;
    Ok(VoiInspection { resampled, sharpened, cef_score, candidates, gvf: field, gvf_magnitude, tubeness, centerline })
}

/// Union of the accepted VOI regions projected into `grid`.
pub fn reconstruct(tree: &AirwayTree, grid: &Grid) -> Result<BinaryMask> {
    let mut out = BinaryMask::empty(*grid);
    for b in &tree.branches {
        for tv in &b.vois {
            if let Some(m) = &tv.mask {
                for i in projected_indices(m, &tv.voi, grid) {
                    out.data[i] = true;
                }
            }
        }
    }
    Ok(out)
}

/// Breadth-first search tree over a lattice mask.
struct Geodesic {
    parent: Vec<usize>,
    depth: Vec<usize>,
}

impl Geodesic {
    fn new(m: &BinaryMask, start: usize) -> Self {
        let g = m.grid;
        let mut parent = vec![NONE; g.len()];
        let mut depth = vec![NONE; g.len()];
        depth[start] = 0;
        let mut q = VecDeque::from([start]);
        while let Some(i) = q.pop_front() {
            for n in g.neighbors(i, Connectivity::TwentySix) {
                if m.data[n] && depth[n] == NONE {
                    depth[n] = depth[i] + 1;
                    parent[n] = i;
                    q.push_back(n);
                }
            }
        }
        Self { parent, depth }
    }

    fn path_to_root(&self, mut i: usize) -> Vec<usize> {
        let mut out = vec![i];
        while self.parent[i] != NONE {
            i = self.parent[i];
            out.push(i);
        }
        out
    }

    /// First voxel shared by the root paths of `a` and `b`.
    fn merge(&self, a: usize, b: usize) -> usize {
        let on_a: std::collections::HashSet<usize> = self.path_to_root(a).into_iter().collect();
        self.path_to_root(b).into_iter().find(|i| on_a.contains(i)).unwrap_or(b)
    }
}

fn nearest_voxel_in(m: &BinaryMask, p: &Vector3<f64>) -> Option<usize> {
    m.indices().min_by(|&a, &b| {
        (m.grid.world_of_index(a) - p).norm_squared().total_cmp(&(m.grid.world_of_index(b) - p).norm_squared())
    })
}

/// The 26-component of `m` closest to the VOI base (local origin), if it
/// comes within `reach`. Returns the component and its voxel nearest the
/// base.
fn anchored_component(m: &BinaryMask, reach: f64) -> Option<(BinaryMask, usize)> {
    let labels = connected_components(m, Connectivity::TwentySix);
    let g = m.grid;
    let mut best: Option<(f64, usize)> = None;
    for i in m.indices() {
        let d = g.world_of_index(i).norm();
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, i));
        }
    }
    let (d, i) = best?;
    if d > reach {
        return None;
    }
    Some((labels.mask_of(labels.labels[i]), i))
}

/// Morphological closing of `comp` by `steps` 26-steps, admitting only
/// voxels with `v <= threshold`. Fills pockets the tube filter misses at
/// junctions without crossing walls brighter than the threshold.
fn close_dark(comp: &BinaryMask, v: &ScalarVolume, threshold: f64, steps: usize) -> BinaryMask {
    let mut closed = comp.clone();
    for _ in 0..steps {
        closed = closed.dilate26();
    }
    for _ in 0..steps {
        closed = closed.erode26();
    }
    let data = (0..comp.data.len())
        .map(|i| comp.data[i] || (closed.data[i] && v.data[i] as f64 <= threshold))
        .collect();
    BinaryMask { grid: comp.grid, data }
}

/// Exits that are not the entry region: components whose centroid lies
/// closer to the entry than half the box (a sibling crossing the side
/// faces next to the branch point) are dropped.
fn forward_exits(comp: &BinaryMask, voi: &Voi) -> Result<Vec<ExitComponent>> {
    let band = (voi.cross_size / 2.0).min(voi.length / 2.0);
    Ok(surface_exit_components(comp, voi)?.into_iter().filter(|e| e.centroid.z >= band).collect())
}

/// GVF, tube-likeness and thinning inside the segmented region.
fn centerline_graph(
    resampled: &ScalarVolume,
    inside: &BinaryMask,
    comp: &BinaryMask,
    cfg: &Config,
) -> Result<CenterlineGraph> {
    // keep the percentile clear of the smoothed padding edge
    let mut region = inside.clone();
    for _ in 0..(3.0 * cfg.gvf.sigma / resampled.grid.min_spacing()).ceil() as usize + 1 {
        region = region.erode26();
    }
    let region = if region.is_empty_set() { inside } else { &region };
    let f0 = initial_field_within(resampled, &cfg.gvf, Some(region))?;
    let field = solve_gvf(&f0, &cfg.gvf)?;
    let mag = magnitude_map(&field);
    let gate = BinaryMask {
        grid: comp.grid,
        data: comp.data.iter().zip(&mag.data).map(|(&c, &m)| c && THRESHOLD_SCALE * (m as f64) < cfg.tube.t_m).collect(),
    };
    let tube = tube_likeness_map_masked(&field, Some(&gate), &cfg.tube)?;
    Ok(extract_centerline(&mag, &tube, comp, &cfg.tube)?.1)
}

/// Shortest centerline-graph path between the nodes nearest `from` and
/// `to` (local mm); a straight segment when the graph does not connect
/// them within `reach`.
fn centerline_path(g: &CenterlineGraph, from: &Vector3<f64>, to: &Vector3<f64>, reach: f64) -> Vec<Vector3<f64>> {
    let straight = || {
        let n = (((to - from).norm() / g.grid.min_spacing()).ceil() as usize).max(1);
        (0..=n).map(|k| from + (to - from) * (k as f64 / n as f64)).collect()
    };
    let nearest = |p: &Vector3<f64>| {
        (0..g.nodes.len())
            .map(|a| ((g.position(a) - p).norm(), a))
            .min_by(|x, y| x.0.total_cmp(&y.0))
            .filter(|(d, _)| *d <= reach)
            .map(|(_, a)| a)
    };
    let (Some(s), Some(t)) = (nearest(from), nearest(to)) else {
        return straight();
    };
    let mut adj = vec![Vec::new(); g.nodes.len()];
    for &(a, b) in &g.edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut prev = vec![NONE; g.nodes.len()];
    prev[s] = s;
    let mut q = VecDeque::from([s]);
    while let Some(a) = q.pop_front() {
        for &b in &adj[a] {
            if prev[b] == NONE {
                prev[b] = a;
                q.push_back(b);
            }
        }
    }
    if prev[t] == NONE {
        return straight();
    }
    let mut path = vec![t];
    let mut a = t;
    while a != s {
        a = prev[a];
        path.push(a);
    }
    path.reverse();
    path.into_iter().map(|a| g.position(a)).collect()
}

fn lexicographic(a: &Vector3<f64>, b: &Vector3<f64>) -> std::cmp::Ordering {
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)).then(a.z.total_cmp(&b.z))
}

struct Tracer<'a> {
    v: &'a ScalarVolume,
    cfg: &'a Config,
    pitch: f64,
    trachea: BinaryMask,
    owner: Vec<usize>,
    mask: BinaryMask,
    branches: Vec<BranchRecord>,
    radius: Vec<f64>,
    /// Branch has committed an extended VOI whose centerline is not yet drawn.
    pending: Vec<bool>,
    queue: VecDeque<Task>,
}

impl Tracer<'_> {
    fn eligible(&self, branch: usize, owner: usize) -> bool {
        if owner == NONE || owner == branch {
            return true;
        }
        let parent = self.branches[branch].parent;
        parent == Some(owner) || (parent.is_some() && self.branches[owner].parent == parent)
    }

    fn finish(&mut self, branch: usize, status: BranchStatus) {
        self.branches[branch].status = status;
    }

    fn commit(&mut self, branch: usize, comp: &BinaryMask, voi: &Voi) {
        for i in projected_indices(comp, voi, &self.mask.grid) {
            if !self.mask.data[i] {
                self.mask.data[i] = true;
                self.owner[i] = branch;
            }
        }
    }

    fn spawn(&mut self, parent: usize, voi: Voi, radius: f64) {
        let id = self.branches.len();
        let generation = self.branches[parent].generation + 1;
        debug_assert!(parent < id);
        self.branches.push(BranchRecord {
            id,
            parent: Some(parent),
            generation,
            vois: Vec::new(),
            centerline: Vec::new(),
            mean_radius: radius,
            status: BranchStatus::Open,
        });
        self.radius.push(radius);
        self.pending.push(false);
        self.queue.push_back(Task { branch: id, voi });
    }

    fn inside(&self, voi: &Voi, lg: Grid) -> BinaryMask {
        let grid = self.mask.grid;
        BinaryMask::from_fn(lg, |x, y, z| grid.nearest_voxel(&voi.local_to_world(&lg.world(x, y, z))).is_some())
    }

    /// Centerline through the last committed VOI of a branch that stopped
    /// while extending, up to its geodesically farthest voxel.
    fn settle(&mut self, branch: usize) -> Result<()> {
        if !std::mem::take(&mut self.pending[branch]) {
            return Ok(());
        }
        let Some((voi, comp)) =
            self.branches[branch].vois.iter().rev().find_map(|t| t.mask.as_ref().map(|m| (t.voi, m.clone())))
        else {
            return Ok(());
        };
        let resampled = resample_to_voi(self.v, &voi, self.pitch)?;
        let lg = comp.grid;
        let graph = centerline_graph(&resampled, &self.inside(&voi, lg), &comp, self.cfg)?;
        let Some(anchor) = nearest_voxel_in(&comp, &Vector3::zeros()) else { return Ok(()) };
        let geo = Geodesic::new(&comp, anchor);
        let far = comp.indices().max_by_key(|&i| (geo.depth[i], std::cmp::Reverse(i))).unwrap_or(anchor);
        let reach = 1.5 * self.radius[branch] + self.pitch;
        let path = centerline_path(&graph, &lg.world_of_index(anchor), &lg.world_of_index(far), reach);
        self.branches[branch].centerline.extend(path.iter().map(|p| voi.local_to_world(p)));
        Ok(())
    }

    fn step(&mut self, task: Task) -> Result<()> {
        let Task { branch, voi } = task;
        let r = self.radius[branch];
        let cfg = self.cfg;
        let grid = self.mask.grid;
        let resampled = resample_to_voi(self.v, &voi, self.pitch)?;
        let sharp = sharpen_log(&resampled, cfg.enhance.beta, cfg.enhance.log_sigma);
        let (_, mut cand) = cef(&sharp, &cfg.enhance)?;
        let lg = cand.grid;
        let mut inside = BinaryMask::empty(lg);
        for i in 0..lg.len() {
            let global = grid.nearest_voxel(&voi.local_to_world(&lg.world_of_index(i))).map(|c| grid.index(c[0], c[1], c[2]));
            inside.data[i] = global.is_some();
            cand.data[i] = match global {
                None => false,
                Some(gi) => {
                    let seen = cand.data[i] || (branch == 0 && self.trachea.data[gi]);
                    seen && self.eligible(branch, self.owner[gi])
                }
            };
        }
        let Some((comp, anchor)) = anchored_component(&cand, r.max(2.0 * self.pitch)) else {
            self.branches[branch].vois.push(TracedVoi { voi, mask: None });
            self.finish(branch, BranchStatus::Terminated);
            return self.settle(branch);
        };
        let comp = close_dark(&comp, &sharp, cfg.enhance.cef_hu_threshold, CLOSING_STEPS);
        let verdict = detect_leak(&comp, &voi, &cfg.leak)?;
        if let LeakVerdict::Leak(_) = verdict {
            self.branches[branch].vois.push(TracedVoi { voi, mask: None });
            self.finish(branch, BranchStatus::Leaked);
            return self.settle(branch);
        }
        self.commit(branch, &comp, &voi);
        let exits = forward_exits(&comp, &voi)?;
        self.branches[branch].vois.push(TracedVoi { voi, mask: Some(comp.clone()) });

        let step = cfg.voi.step_factor * r;
        if exits.len() == 1
            && exits[0].face == super::surface::Face::Front
            && voi.length + step <= cfg.voi.max_length_factor * r
        {
            self.queue.push_back(Task { branch, voi: extend_voi(&voi, step)? });
            self.pending[branch] = true;
            return Ok(());
        }
        self.pending[branch] = false;

        let graph = centerline_graph(&resampled, &inside, &comp, cfg)?;
        let reach = 1.5 * r + self.pitch;
        let origin = lg.world_of_index(anchor);
        let geo = Geodesic::new(&comp, anchor);
        let target = match exits.len() {
            0 => {
                let far = comp.indices().max_by_key(|&i| (geo.depth[i], std::cmp::Reverse(i))).unwrap_or(anchor);
                lg.world_of_index(far)
            }
            1 => exits[0].centroid,
            _ => {
                let ends: Vec<usize> =
                    exits.iter().map(|e| nearest_voxel_in(&comp, &e.centroid).unwrap_or(anchor)).collect();
                let mut split = ends[0];
                let mut best = NONE;
                for a in 0..ends.len() {
                    for b in a + 1..ends.len() {
                        let m = geo.merge(ends[a], ends[b]);
                        if geo.depth[m] < best {
                            best = geo.depth[m];
                            split = m;
                        }
                    }
                }
                lg.world_of_index(split)
            }
        };
        let mut arms = Vec::new();
        let mut target = target;
        if exits.len() >= 2 {
            let snapped = find_branch_points(&graph)
                .into_iter()
                .map(|bp| ((bp.point - target).norm(), bp))
                .filter(|(d, _)| *d <= r)
                .min_by(|a, b| a.0.total_cmp(&b.0));
            if let Some((_, bp)) = snapped {
                target = bp.point;
                arms = bp.directions;
            }
        }
        let path = centerline_path(&graph, &origin, &target, reach);
        let world: Vec<Vector3<f64>> = path.iter().map(|p| voi.local_to_world(p)).collect();
        self.branches[branch].centerline.extend(world);

        match exits.len() {
            0 => self.finish(branch, BranchStatus::Terminated),
            1 => {
                if self.branches[branch].vois.len() >= cfg.max_vois_per_branch {
                    return Ok(());
                }
                let e = &exits[0];
                let dir = voi.direction_to_world(&(e.centroid - origin).normalize());
                let base = voi.local_to_world(&e.centroid) - dir * r;
                let next = cfg.voi.size(r, dir, base, voi.generation)?;
                self.queue.push_back(Task { branch, voi: next });
            }
            _ => {
                self.finish(branch, BranchStatus::Terminated);
                let generation = self.branches[branch].generation + 1;
                if generation > cfg.generation_cap {
                    return Ok(());
                }
                let mut exits = exits;
                exits.sort_by(|a, b| lexicographic(&voi.local_to_world(&a.centroid), &voi.local_to_world(&b.centroid)));
                let area = self.pitch * self.pitch;
                for e in &exits {
                    let chord = e.centroid - target;
                    if chord.norm() == 0.0 {
                        continue;
                    }
                    let chord = chord.normalize();
                    let mut dir = chord;
                    if let Some(arm) = arms.iter().max_by(|a, b| a.dot(&chord).total_cmp(&b.dot(&chord))) {
                        if arm.dot(&chord) > 0.5 {
                            dir = (chord + arm).normalize();
                        }
                    }
                    let radius = (e.voxel_count as f64 * area / std::f64::consts::PI).sqrt().clamp(self.pitch, r);
                    let child =
                        cfg.voi.size(radius, voi.direction_to_world(&dir), voi.local_to_world(&target), generation)?;
                    self.spawn(branch, child, radius);
                }
            }
        }
        Ok(())
    }
}

/// Trace the airway tree from a seed inside the trachea.
///
/// The trachea is grown from the seed and fixes the root VOI. VOIs are then
/// processed in FIFO order: each is resampled, sharpened and filtered; the
/// candidate component attached to the VOI base is tested for leaks, then
/// committed. One front exit extends the VOI, one other exit starts a new
/// VOI of the same branch, two or more close the branch at its branch point
/// and spawn one child per exit, none terminates it. Leaking VOIs are
/// discarded and end their branch.
pub fn trace(v: &ScalarVolume, seed: [usize; 3], cfg: &Config) -> Result<AirwayTree> {
    cfg.validate()?;
    let pitch = cfg.pitch.unwrap_or_else(|| v.grid.min_spacing());
    let trachea = grow_trachea(v, seed, &cfg.grow)?;
    let root = estimate_root(&trachea)?;
    let root_voi = cfg.voi.size(root.radius, root.axis, root.base, 0)?;
    let mut t = Tracer {
        v,
        cfg,
        pitch,
        trachea,
        owner: vec![NONE; v.grid.len()],
        mask: BinaryMask::empty(v.grid),
        branches: vec![BranchRecord {
            id: 0,
            parent: None,
            generation: 0,
            vois: Vec::new(),
            centerline: Vec::new(),
            mean_radius: root.radius,
            status: BranchStatus::Open,
        }],
        radius: vec![root.radius],
        pending: vec![false],
        queue: VecDeque::from([Task { branch: 0, voi: root_voi }]),
    };
    let mut truncated = false;
    while let Some(task) = t.queue.pop_front() {
        if t.mask.count() > cfg.voxel_budget {
            truncated = true;
            break;
        }
        t.step(task)?;
    }
    let tree = AirwayTree { branches: t.branches, root: 0, mask: t.mask, truncated };
    tree.validate()?;
    Ok(tree)
}
