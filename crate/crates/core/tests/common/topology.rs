//! Digital topology oracles for thinning.

use std::collections::HashSet;

use airway_core::volume::{connected_components, is_simple_point, thin_3d, BinaryMask, Connectivity, Grid};

/// Euler characteristic of the union of closed unit cubes, one per set
/// voxel. Cells are keyed by their centers in doubled coordinates; the
/// dimension of a cell is the number of odd coordinates.
pub fn euler(m: &BinaryMask) -> i64 {
    let mut cells = HashSet::new();
    for i in m.indices() {
        let [x, y, z] = m.grid.coords(i).map(|c| 2 * c as i64);
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    cells.insert((x + a, y + b, z + c));
                }
            }
        }
    }
    cells
        .iter()
        .map(|&(a, b, c)| if (a & 1) + (b & 1) + (c & 1) == 1 || (a & 1) + (b & 1) + (c & 1) == 3 { -1 } else { 1 })
        .sum()
}

/// Copy with one empty voxel of padding on every side.
pub fn padded(m: &BinaryMask) -> BinaryMask {
    let [nx, ny, nz] = m.grid.dims;
    let g = Grid::unit([nx + 2, ny + 2, nz + 2]);
    BinaryMask::from_fn(g, |x, y, z| x > 0 && y > 0 && z > 0 && m.get(x as i64 - 1, y as i64 - 1, z as i64 - 1))
}

/// (object components at 26, background components at 6, Euler number).
/// With object components b0 and cavities b2 = background - 1, the number
/// of tunnels follows as b1 = b0 + b2 - euler.
pub fn topology(m: &BinaryMask) -> (usize, usize, i64) {
    let p = padded(m);
    let bg = BinaryMask { grid: p.grid, data: p.data.iter().map(|b| !b).collect() };
    (
        connected_components(m, Connectivity::TwentySix).component_count,
        connected_components(&bg, Connectivity::Six).component_count,
        euler(m),
    )
}

pub fn tunnels(m: &BinaryMask) -> i64 {
    let (b0, bg, chi) = topology(m);
    b0 as i64 + (bg as i64 - 1) - chi
}

pub fn neighborhood(m: &BinaryMask, i: usize) -> u32 {
    // bit (dx + 1) + 3 (dy + 1) + 9 (dz + 1)
    let [x, y, z] = m.grid.coords(i).map(|c| c as i64);
    let mut bits = 0;
    for dz in -1..=1 {
        for dy in -1..=1 {
            for dx in -1..=1 {
                if m.get(x + dx, y + dy, z + dz) {
                    bits |= 1 << ((dx + 1) + 3 * (dy + 1) + 9 * (dz + 1));
                }
            }
        }
    }
    bits
}

/// Every thinned property at once: subset, idempotent, same topology, and
/// no remaining voxel removable except curve endpoints.
pub fn check_thinning(m: &BinaryMask) -> BinaryMask {
    let t = thin_3d(m);
    assert!(t.data.iter().zip(&m.data).all(|(&a, &b)| !a || b), "not a subset");
    assert_eq!(thin_3d(&t), t, "not idempotent");
    assert_eq!(topology(&t), topology(m), "topology changed");
    for i in t.indices() {
        let bits = neighborhood(&t, i);
        let degree = (bits & !(1 << 13)).count_ones();
        assert!(degree <= 1 || !is_simple_point(bits), "voxel {:?} still deletable", t.grid.coords(i));
    }
    t
}

pub fn shape(dims: [usize; 3], f: impl Fn(f64, f64, f64) -> bool) -> BinaryMask {
    BinaryMask::from_fn(Grid::unit(dims), |x, y, z| f(x as f64, y as f64, z as f64))
}

pub fn torus(big: f64, small: f64) -> BinaryMask {
    let n = (2.0 * (big + small) + 3.0).ceil() as usize;
    let c = (n as f64 - 1.0) / 2.0;
    let h = (2.0 * small + 3.0).ceil() as usize;
    let cz = (h as f64 - 1.0) / 2.0;
    shape([n, n, h], |x, y, z| {
        let rho = ((x - c).powi(2) + (y - c).powi(2)).sqrt() - big;
        rho * rho + (z - cz).powi(2) <= small * small
    })
}
