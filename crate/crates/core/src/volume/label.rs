use std::collections::VecDeque;

use super::{BinaryMask, Grid};

/// Voxel adjacency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    Six,
    #[default]
    TwentySix,
}

const OFFSETS_6: [[i64; 3]; 6] = [
    [-1, 0, 0],
    [1, 0, 0],
    [0, -1, 0],
    [0, 1, 0],
    [0, 0, -1],
    [0, 0, 1],
];

const fn offsets_26() -> [[i64; 3]; 26] {
    let mut out = [[0i64; 3]; 26];
    let mut n = 0;
    let mut z = -1;
    while z <= 1 {
        let mut y = -1;
        while y <= 1 {
            let mut x = -1;
            while x <= 1 {
                if !(x == 0 && y == 0 && z == 0) {
                    out[n] = [x, y, z];
                    n += 1;
                }
                x += 1;
            }
            y += 1;
        }
        z += 1;
    }
    out
}

const OFFSETS_26: [[i64; 3]; 26] = offsets_26();

impl Connectivity {
    pub fn offsets(self) -> &'static [[i64; 3]] {
        match self {
            Connectivity::Six => &OFFSETS_6,
            Connectivity::TwentySix => &OFFSETS_26,
        }
    }
}

/// Dense component labels; 0 is background.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    pub grid: Grid,
    pub labels: Vec<u32>,
    pub component_count: usize,
}

impl LabelMap {
    /// Voxel count per label, indexed by `label - 1`.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.component_count];
        for &l in &self.labels {
            if l > 0 {
                sizes[l as usize - 1] += 1;
            }
        }
        sizes
    }

    pub fn mask_of(&self, label: u32) -> BinaryMask {
        BinaryMask { grid: self.grid, data: self.labels.iter().map(|&l| l == label).collect() }
    }
}

/// Connected-component labeling; labels are assigned in scanline order of
/// each component's first voxel.
pub fn connected_components(m: &BinaryMask, connectivity: Connectivity) -> LabelMap {
    let grid = m.grid;
    let mut labels = vec![0u32; grid.len()];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..grid.len() {
        if !m.data[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            for n in grid.neighbors(i, connectivity) {
                if m.data[n] && labels[n] == 0 {
                    labels[n] = next;
                    queue.push_back(n);
                }
            }
        }
    }
    LabelMap { grid, labels, component_count: next as usize }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask_with(dims: [usize; 3], pts: &[[usize; 3]]) -> BinaryMask {
        let g = Grid::unit(dims);
        BinaryMask::from_indices(g, pts.iter().map(|p| g.index(p[0], p[1], p[2])))
    }

    #[test]
    fn empty_mask_has_no_components() {
        let m = BinaryMask::empty(Grid::unit([4, 4, 4]));
        assert_eq!(connected_components(&m, Connectivity::TwentySix).component_count, 0);
    }

    #[test]
    fn distant_voxels_are_separate() {
        let m = mask_with([6, 6, 6], &[[0, 0, 0], [5, 5, 5]]);
        let l = connected_components(&m, Connectivity::TwentySix);
        assert_eq!(l.component_count, 2);
        assert_eq!(l.labels[0], 1);
        assert_eq!(l.sizes(), vec![1, 1]);
    }

    #[test]
    fn diagonal_pair_depends_on_adjacency() {
        let m = mask_with([2, 2, 2], &[[0, 0, 0], [1, 1, 1]]);
        assert_eq!(connected_components(&m, Connectivity::TwentySix).component_count, 1);
        assert_eq!(connected_components(&m, Connectivity::Six).component_count, 2);
    }

    /// Union-find over an arbitrary visiting order.
    fn partition_by_union_find(m: &BinaryMask, order: &[usize], conn: Connectivity) -> Vec<usize> {
        let mut parent: Vec<usize> = (0..m.grid.len()).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for &i in order {
            if !m.data[i] {
                continue;
            }
            for n in m.grid.neighbors(i, conn) {
                if m.data[n] {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, n));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
        (0..m.grid.len()).map(|i| find(&mut parent, i)).collect()
    }

    proptest! {
        #[test]
        fn partition_matches_any_visiting_order(
            bits in proptest::collection::vec(proptest::bool::weighted(0.35), 5 * 4 * 6),
            seed in any::<u64>(),
        ) {
            let g = Grid::unit([5, 4, 6]);
            let m = BinaryMask { grid: g, data: bits };
            let mut order: Vec<usize> = (0..g.len()).collect();
            // deterministic shuffle from the seed
            let mut s = seed | 1;
            for i in (1..order.len()).rev() {
                s ^= s << 13; s ^= s >> 7; s ^= s << 17;
                order.swap(i, (s % (i as u64 + 1)) as usize);
            }
            for conn in [Connectivity::Six, Connectivity::TwentySix] {
                let l = connected_components(&m, conn);
                let roots = partition_by_union_find(&m, &order, conn);
                for a in 0..g.len() {
                    for b in (a + 1)..g.len() {
                        if m.data[a] && m.data[b] {
                            prop_assert_eq!(l.labels[a] == l.labels[b], roots[a] == roots[b]);
                        }
                    }
                }
                // labels dense from 1
                let sizes = l.sizes();
                prop_assert!(sizes.iter().all(|&s| s > 0));
            }
        }
    }
}
