use airway_core::tracer::{
    detect_leak, extend_voi, size_voi, surface_exit_components, surface_ratio, surface_voxel_count, Face, LeakParams,
    LeakReason, LeakVerdict, Plane,
};
use airway_core::voi::Voi;
use airway_core::volume::BinaryMask;
use nalgebra::Vector3;
use proptest::prelude::*;

const PITCH: f64 = 0.5;

fn voi() -> Voi {
    Voi::new(Vector3::new(1.0, -2.0, 3.0), Vector3::new(0.3, 0.1, -1.0), 10.0, 10.0, 0).unwrap()
}

/// Mask on the VOI lattice from a predicate on local mm coordinates.
fn local_mask(v: &Voi, f: impl Fn(Vector3<f64>) -> bool) -> BinaryMask {
    let g = v.lattice(PITCH).unwrap();
    BinaryMask::from_fn(g, |x, y, z| f(g.world(x, y, z)))
}

fn tube(a: Vector3<f64>, b: Vector3<f64>, r: f64) -> impl Fn(Vector3<f64>) -> bool {
    move |p| {
        let d = b - a;
        let t = ((p - a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
        (p - (a + d * t)).norm() <= r
    }
}

#[test]
fn straight_tube_has_one_front_exit() {
    let v = voi();
    let m = local_mask(&v, tube(Vector3::new(0.0, 0.0, -1.0), Vector3::new(0.0, 0.0, 20.0), 2.0));
    let exits = surface_exit_components(&m, &v).unwrap();
    assert_eq!(exits.len(), 1);
    assert_eq!(exits[0].face, Face::Front);
    assert!(exits[0].centroid.x.abs() < 1e-9 && exits[0].centroid.y.abs() < 1e-9);
    assert_eq!(detect_leak(&m, &v, &LeakParams::default()).unwrap(), LeakVerdict::Ok);
}

#[test]
fn y_has_two_exits() {
    let v = voi();
    let stem = tube(Vector3::new(0.0, 0.0, -1.0), Vector3::new(0.0, 0.0, 4.0), 1.5);
    let left = tube(Vector3::new(0.0, 0.0, 4.0), Vector3::new(-4.0, 0.0, 12.0), 1.2);
    let right = tube(Vector3::new(0.0, 0.0, 4.0), Vector3::new(4.0, 0.0, 12.0), 1.2);
    let m = local_mask(&v, |p| stem(p) || left(p) || right(p));
    let exits = surface_exit_components(&m, &v).unwrap();
    assert_eq!(exits.len(), 2);
    let mut xs: Vec<f64> = exits.iter().map(|e| e.centroid.x).collect();
    xs.sort_by(f64::total_cmp);
    assert!(xs[0] < -1.0 && xs[1] > 1.0, "{xs:?}");
}

#[test]
fn empty_mask_has_no_exits() {
    let v = voi();
    let m = local_mask(&v, |_| false);
    assert!(surface_exit_components(&m, &v).unwrap().is_empty());
    assert_eq!(surface_ratio(&m), 0.0);
}

#[test]
fn entry_only_blob_is_not_an_exit() {
    let v = voi();
    let m = local_mask(&v, |p| p.z < 1.0 && p.x.abs() < 1.0 && p.y.abs() < 1.0);
    assert!(surface_exit_components(&m, &v).unwrap().is_empty());
}

#[test]
fn full_coverage_is_a_surface_leak() {
    let v = voi();
    let m = local_mask(&v, |_| true);
    assert_eq!(surface_ratio(&m), 1.0);
    assert_eq!(detect_leak(&m, &v, &LeakParams::default()).unwrap(), LeakVerdict::Leak(LeakReason::SurfaceRatio(1.0)));
}

/// 10x10x10 fixture: a 3x3 column through the entry and front faces, a
/// full x = 0 plate, and a line along the y = 0, z = 0 edge.
#[test]
fn hand_counted_ten_cube() {
    let v = Voi::new(Vector3::zeros(), Vector3::z(), 10.0, 10.0, 0).unwrap();
    let g = v.lattice(1.0).unwrap();
    assert_eq!(g.dims, [10, 10, 10]);
    let m = BinaryMask::from_fn(g, |x, y, z| {
        let column = (4..=6).contains(&x) && (4..=6).contains(&y);
        let plate = x == 0;
        let edge = y == 0 && z == 0;
        column || plate || edge
    });
    // faces: 6 * 100 minus 12 edges of 10 counted twice, plus 8 corners counted thrice
    assert_eq!(surface_voxel_count([10, 10, 10]), 6 * 100 - 12 * 10 + 8);
    // column: 9 on entry + 9 on front; plate: 100; edge line: x = 1..=9 outside the plate
    let on_surface = 9 + 9 + 100 + 9;
    assert_eq!(surface_ratio(&m), on_surface as f64 / 488.0);
}

/// Independent contour measures: direct 3x3 binomial smoothing, one
/// oriented segment per contour piece (inside on the left), length summed
/// and area from Green's theorem over the oriented segments.
fn circularity_oracle(w: usize, h: usize, px: &[bool]) -> f64 {
    let pix = |x: i64, y: i64| x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && px[x as usize + w * y as usize];
    let val = |x: i64, y: i64| {
        let mut s = 0.0;
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                let k = (2 - dx.abs()) * (2 - dy.abs());
                if pix(x + dx, y + dy) {
                    s += k as f64 / 16.0;
                }
            }
        }
        s
    };
    let (mut len, mut twice_area) = (0.0, 0.0);
    for y in -2..=h as i64 {
        for x in -2..=w as i64 {
            let c = [(x, y), (x + 1, y), (x + 1, y + 1), (x, y + 1)];
            let v: Vec<f64> = c.iter().map(|&(a, b)| val(a, b)).collect();
            let inside: Vec<bool> = v.iter().map(|&a| a > 0.5).collect();
            let pt = |k: usize| {
                let j = (k + 1) % 4;
                let t = (0.5 - v[k]) / (v[j] - v[k]);
                let (a, b) = (c[k], c[j]);
                (a.0 as f64 + t * (b.0 - a.0) as f64, a.1 as f64 + t * (b.1 - a.1) as f64)
            };
            let cuts: Vec<usize> = (0..4).filter(|&k| inside[k] != inside[(k + 1) % 4]).collect();
            // each segment isolates `corner` from the other three
            let mut segs: Vec<((f64, f64), (f64, f64), usize)> = Vec::new();
            if cuts.len() == 2 {
                let corner = (0..4).find(|&k| inside[k]).unwrap();
                segs.push((pt(cuts[0]), pt(cuts[1]), corner));
            } else if cuts.len() == 4 {
                let joined = v.iter().sum::<f64>() / 4.0 > 0.5;
                for k in 0..4 {
                    if inside[k] != joined {
                        segs.push((pt((k + 3) % 4), pt(k), k));
                    }
                }
            }
            for (a, b, k) in segs {
                let (cx, cy) = (c[k].0 as f64, c[k].1 as f64);
                // a corner on the inside side of the segment, found by value
                let side = (b.0 - a.0) * (cy - a.1) - (b.1 - a.1) * (cx - a.0);
                let left_is_inside = (side > 0.0) == inside[k];
                let (a, b) = if left_is_inside { (a, b) } else { (b, a) };
                len += (b.0 - a.0).hypot(b.1 - a.1);
                twice_area += a.0 * b.1 - b.0 * a.1;
            }
        }
    }
    if len == 0.0 {
        return 0.0;
    }
    4.0 * std::f64::consts::PI * (twice_area / 2.0) / (len * len)
}

#[test]
fn disk_is_nearly_circular() {
    let n = 15;
    let px: Vec<bool> = (0..n * n)
        .map(|i| {
            let (x, y) = ((i % n) as f64 - 7.0, (i / n) as f64 - 7.0);
            x * x + y * y <= 5.0 * 5.0
        })
        .collect();
    let c = Plane { w: n, h: n, data: &px }.circularity();
    assert!((c - 1.0).abs() < 0.1, "{c}");
    assert!((c - circularity_oracle(n, n, &px)).abs() < 1e-9);
}

#[test]
fn square_matches_oracle_and_tends_to_quarter_pi() {
    for s in [4, 8, 40] {
        let px = vec![true; s * s];
        let c = Plane { w: s, h: s, data: &px }.circularity();
        assert!((c - circularity_oracle(s, s, &px)).abs() < 1e-9, "side {s}");
        assert!(c >= 0.4);
    }
    let px = vec![true; 1600];
    let c = Plane { w: 40, h: 40, data: &px }.circularity();
    assert!((c - std::f64::consts::FRAC_PI_4).abs() < 0.05 * std::f64::consts::FRAC_PI_4, "{c}");
}

#[test]
fn zigzag_line_is_far_from_circular() {
    // ten pixels alternating between two rows, diagonally connected
    let (w, h) = (10, 2);
    let mut px = vec![false; w * h];
    for x in 0..w {
        px[x + w * (x % 2)] = true;
    }
    let c = Plane { w, h, data: &px }.circularity();
    assert_eq!(c, circularity_oracle(w, h, &px));
    assert!(c < 0.1, "{c}");
}

#[test]
fn random_blobs_match_oracle() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let (w, h) = (rng.random_range(1..12), rng.random_range(1..12));
        let px: Vec<bool> = (0..w * h).map(|_| rng.random_bool(0.6)).collect();
        let c = Plane { w, h, data: &px }.circularity();
        assert!((c - circularity_oracle(w, h, &px)).abs() < 1e-9, "{w}x{h}: {c}");
    }
}

#[test]
fn ragged_front_is_a_contour_leak() {
    let v = voi();
    let g = v.lattice(PITCH).unwrap();
    let [nx, ny, nz] = g.dims;
    // thin staircase reaching the front face only
    let m = BinaryMask::from_fn(g, |x, y, z| z + 1 == nz && (x == y || x == y + 1) && x < nx / 2 && y < ny / 2);
    match detect_leak(&m, &v, &LeakParams::default()).unwrap() {
        LeakVerdict::Leak(LeakReason::Circularity(c)) => assert!(c < 0.4),
        other => panic!("{other:?}"),
    }
}

proptest! {
    #[test]
    fn extension_is_additive(a in 0.01f64..20.0, b in 0.01f64..20.0, r in 0.5f64..5.0) {
        let v = size_voi(r, Vector3::new(0.1, 0.2, -1.0), Vector3::new(3.0, 1.0, 0.0), 2).unwrap();
        let two = extend_voi(&extend_voi(&v, a).unwrap(), b).unwrap();
        let one = extend_voi(&v, a + b).unwrap();
        prop_assert!((two.length - one.length).abs() < 1e-9);
        prop_assert_eq!((two.base, two.axis, two.up, two.cross_size, two.generation), (one.base, one.axis, one.up, one.cross_size, one.generation));
    }

    #[test]
    fn surface_ratio_matches_brute_force(seed in 0u64..10_000, nx in 1usize..7, ny in 1usize..7, nz in 1usize..7) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = airway_core::volume::Grid::new([nx, ny, nz], [1.0; 3], [0.0; 3]).unwrap();
        let m = BinaryMask { grid: g, data: (0..g.len()).map(|_| rng.random_bool(0.4)).collect() };
        let mut on = 0usize;
        let mut total = 0usize;
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let face = x == 0 || y == 0 || z == 0 || x + 1 == nx || y + 1 == ny || z + 1 == nz;
                    if face {
                        total += 1;
                        on += m.data[g.index(x, y, z)] as usize;
                    }
                }
            }
        }
        prop_assert_eq!(surface_voxel_count([nx, ny, nz]), total);
        prop_assert_eq!(surface_ratio(&m), on as f64 / total as f64);
    }
}
