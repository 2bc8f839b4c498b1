use std::collections::{HashMap, VecDeque};

use nalgebra::Vector3;

use crate::volume::{BinaryMask, Connectivity, Grid};

/// Voxels sampled along each arm for its direction.
pub const ARM_VOXELS: usize = 5;

/// 26-adjacency graph of a thinned centerline mask.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterlineGraph {
    pub grid: Grid,
    /// Lattice index of each node.
    pub nodes: Vec<usize>,
    pub degrees: Vec<usize>,
    /// Node-id pairs, `a < b`.
    pub edges: Vec<(usize, usize)>,
    /// Node ids of degree 1.
    pub endpoints: Vec<usize>,
    /// Furcations: clusters of 26-adjacent nodes of degree >= 3.
    pub furcations: Vec<Vec<usize>>,
}

impl CenterlineGraph {
    pub fn from_mask(m: &BinaryMask) -> Self {
        let grid = m.grid;
        let nodes: Vec<usize> = m.indices().collect();
        let id: HashMap<usize, usize> = nodes.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        let mut degrees = vec![0; nodes.len()];
        let mut edges = Vec::new();
        for (a, &i) in nodes.iter().enumerate() {
            for n in grid.neighbors(i, Connectivity::TwentySix) {
                if let Some(&b) = id.get(&n) {
                    degrees[a] += 1;
                    if a < b {
                        edges.push((a, b));
                    }
                }
            }
        }
        let endpoints = (0..nodes.len()).filter(|&a| degrees[a] == 1).collect();
        let mut furcations = Vec::new();
        let mut seen = vec![false; nodes.len()];
        for start in 0..nodes.len() {
            if degrees[start] < 3 || seen[start] {
                continue;
            }
            seen[start] = true;
            let mut cluster = vec![start];
            let mut q = VecDeque::from([start]);
            while let Some(a) = q.pop_front() {
                for n in grid.neighbors(nodes[a], Connectivity::TwentySix) {
                    if let Some(&b) = id.get(&n) {
                        if degrees[b] >= 3 && !seen[b] {
                            seen[b] = true;
                            cluster.push(b);
                            q.push_back(b);
                        }
                    }
                }
            }
            cluster.sort_unstable();
            furcations.push(cluster);
        }
        Self { grid, nodes, degrees, edges, endpoints, furcations }
    }

    pub fn position(&self, node: usize) -> Vector3<f64> {
        self.grid.world_of_index(self.nodes[node])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchPoint {
    /// World position (centroid of the furcation cluster).
    pub point: Vector3<f64>,
    /// Unit direction of each arm leaving the furcation.
    pub directions: Vec<Vector3<f64>>,
}

/// Furcations with their arm directions. Each arm direction is the mean of
/// unit vectors from the furcation to the arm's first `ARM_VOXELS` voxels
/// (by graph distance).
pub fn find_branch_points(g: &CenterlineGraph) -> Vec<BranchPoint> {
    let id: HashMap<usize, usize> = g.nodes.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let nbrs = |a: usize| {
        g.grid.neighbors(g.nodes[a], Connectivity::TwentySix).filter_map(|n| id.get(&n).copied())
    };
    let mut out = Vec::new();
    for cluster in &g.furcations {
        let in_cluster = |a: usize| cluster.binary_search(&a).is_ok();
        let point = cluster.iter().map(|&a| g.position(a)).sum::<Vector3<f64>>() / cluster.len() as f64;
        let mut claimed: HashMap<usize, usize> = HashMap::new();
        let mut arms: Vec<Vec<usize>> = Vec::new();
        // arm seeds: non-cluster neighbors of the cluster, in node order
        let mut seeds: Vec<usize> = cluster.iter().flat_map(|&a| nbrs(a)).filter(|&b| !in_cluster(b)).collect();
        seeds.sort_unstable();
        seeds.dedup();
        for s in seeds {
            if claimed.contains_key(&s) {
                continue;
            }
            let arm_id = arms.len();
            let mut layer = vec![s];
            claimed.insert(s, arm_id);
            let mut voxels = Vec::new();
            for _ in 0..ARM_VOXELS {
                if layer.is_empty() {
                    break;
                }
                voxels.extend(layer.iter().copied());
                let mut next = Vec::new();
                for &a in &layer {
                    for b in nbrs(a) {
                        if !in_cluster(b) && !claimed.contains_key(&b) {
                            claimed.insert(b, arm_id);
                            next.push(b);
                        }
                    }
                }
                next.sort_unstable();
                layer = next;
            }
            arms.push(voxels);
        }
        let directions: Vec<Vector3<f64>> = arms
            .iter()
            .filter_map(|voxels| {
                let sum: Vector3<f64> = voxels
                    .iter()
                    .map(|&a| g.position(a) - point)
                    .filter(|d| d.norm() > 0.0)
                    .map(|d| d.normalize())
                    .sum();
                (sum.norm() > 0.0).then(|| sum.normalize())
            })
            .collect();
        out.push(BranchPoint { point, directions });
    }
    out
}
