//! Topology-preserving curve thinning.
//!
//! Six directional sub-iterations peel border voxels that are simple points
//! (26-connectivity for the object, 6-connectivity for the background) and
//! are not curve endpoints. Candidates of one sub-iteration are re-checked
//! sequentially before deletion, which keeps every single deletion simple.

use super::BinaryMask;

/// Position of offset `(dx, dy, dz)` in a 3x3x3 neighborhood.
#[inline]
const fn nb(dx: i64, dy: i64, dz: i64) -> usize {
    ((dx + 1) + 3 * (dy + 1) + 9 * (dz + 1)) as usize
}

const CENTER: usize = 13;

struct Adjacency {
    adj26: [u32; 27],
    adj6: [u32; 27],
    n18: u32,
    n6: u32,
}

const fn build_adjacency() -> Adjacency {
    let mut adj26 = [0u32; 27];
    let mut adj6 = [0u32; 27];
    let mut n18 = 0u32;
    let mut n6 = 0u32;
    let mut a = 0;
    while a < 27 {
        let ax = (a % 3) as i64;
        let ay = ((a / 3) % 3) as i64;
        let az = (a / 9) as i64;
        let d = (ax - 1).abs() + (ay - 1).abs() + (az - 1).abs();
        if d == 1 {
            n6 |= 1 << a;
        }
        if d == 1 || d == 2 {
            n18 |= 1 << a;
        }
        let mut b = 0;
        while b < 27 {
            if a != b {
                let bx = (b % 3) as i64;
                let by = ((b / 3) % 3) as i64;
                let bz = (b / 9) as i64;
                let dx = (ax - bx).abs();
                let dy = (ay - by).abs();
                let dz = (az - bz).abs();
                if dx <= 1 && dy <= 1 && dz <= 1 {
                    adj26[a] |= 1 << b;
                    if dx + dy + dz == 1 {
                        adj6[a] |= 1 << b;
                    }
                }
            }
            b += 1;
        }
        a += 1;
    }
    Adjacency { adj26, adj6, n18, n6 }
}

const ADJ: Adjacency = build_adjacency();

/// Number of connected components of `set` under the given adjacency table.
fn count_components(set: u32, adj: &[u32; 27], seeds: u32) -> usize {
    let mut remaining = set;
    let mut count = 0;
    while remaining & seeds != 0 {
        let start = (remaining & seeds).trailing_zeros();
        let mut frontier = 1u32 << start;
        let mut comp = frontier;
        while frontier != 0 {
            let b = frontier.trailing_zeros() as usize;
            frontier &= frontier - 1;
            let next = adj[b] & set & !comp;
            comp |= next;
            frontier |= next;
        }
        remaining &= !comp;
        count += 1;
    }
    count
}

/// Simple-point test on a 3x3x3 neighborhood bitmask. Offset `(dx, dy, dz)`
/// is bit `(dx + 1) + 3 (dy + 1) + 9 (dz + 1)`; bit 13, the voxel itself, is
/// ignored.
pub fn is_simple_point(neighborhood: u32) -> bool {
    let fg = neighborhood & !(1 << CENTER) & ((1 << 27) - 1);
    // exactly one 26-component of object voxels in N26*
    if count_components(fg, &ADJ.adj26, fg) != 1 {
        return false;
    }
    // exactly one 6-component of background in N18 that touches a 6-neighbor
    let bg = !fg & ADJ.n18;
    count_components(bg, &ADJ.adj6, ADJ.n6 & bg) == 1
}

fn neighborhood(m: &BinaryMask, x: usize, y: usize, z: usize) -> u32 {
    let mut bits = 0u32;
    for dz in -1..=1i64 {
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                if m.get(x as i64 + dx, y as i64 + dy, z as i64 + dz) {
                    bits |= 1 << nb(dx, dy, dz);
                }
            }
        }
    }
    bits
}

const DIRECTIONS: [[i64; 3]; 6] = [
    [0, 0, 1],
    [0, 0, -1],
    [0, 1, 0],
    [0, -1, 0],
    [1, 0, 0],
    [-1, 0, 0],
];

/// Deletable in the current state: simple and not a curve endpoint.
fn deletable(m: &BinaryMask, x: usize, y: usize, z: usize) -> bool {
    let bits = neighborhood(m, x, y, z);
    let degree = (bits & !(1 << CENTER)).count_ones();
    degree > 1 && is_simple_point(bits)
}

/// Reduce a mask to a one-voxel-thick curve skeleton.
pub fn thin_3d(m: &BinaryMask) -> BinaryMask {
    let mut out = m.clone();
    let grid = m.grid;
    let mut fg: Vec<usize> = out.indices().collect();
    loop {
        let mut removed_any = false;
        for d in DIRECTIONS {
            let candidates: Vec<usize> = fg
                .iter()
                .copied()
                .filter(|&i| {
                    let [x, y, z] = grid.coords(i);
                    !out.get(x as i64 + d[0], y as i64 + d[1], z as i64 + d[2])
                        && deletable(&out, x, y, z)
                })
                .collect();
            for i in candidates {
                let [x, y, z] = grid.coords(i);
                if deletable(&out, x, y, z) {
                    out.data[i] = false;
                    removed_any = true;
                }
            }
            fg.retain(|&i| out.data[i]);
        }
        if !removed_any {
            break;
        }
    }
    out
}
