//! Tube phantoms with their GVF, and medial-axis checks on them.

use airway_core::gvf::{initial_field, magnitude_map, solve_gvf, GvfParams, VectorField};
use airway_core::phantom::{generate_cylinder, GroundTruth, PhantomSpec};
use airway_core::tube::{tube_likeness_map_masked, TubeParams};
use airway_core::volume::ScalarVolume;
use nalgebra::Vector3;

pub fn cylinder_field(radius: f64, axis: Vector3<f64>) -> (ScalarVolume, GroundTruth, VectorField) {
    let (v, truth) = generate_cylinder(radius, 10.0, axis, &PhantomSpec::default()).unwrap();
    let p = GvfParams::default();
    let f = solve_gvf(&initial_field(&v, &p).unwrap(), &p).unwrap();
    (v, truth, f)
}

/// Unit field pointing at the z axis, evaluated analytically.
pub fn inward(p: &Vector3<f64>) -> Option<Vector3<f64>> {
    let q = Vector3::new(p.x, p.y, 0.0);
    Some(-q / q.norm())
}

/// Fraction of cross-sections whose argmin of |V| and argmax of
/// tube-likeness over the lumen lie within one voxel of the true axis.
pub fn medial_fraction(axis: Vector3<f64>) -> (f64, f64) {
    let (v, truth, f) = cylinder_field(2.5, axis);
    let a = axis.normalize();
    let mag = magnitude_map(&f);
    let tube = tube_likeness_map_masked(&f, Some(&truth.mask), &TubeParams::default()).unwrap();
    let g = v.grid;
    let pitch = g.min_spacing();
    let [nx, ny, nz] = g.dims;
    let (mut slices, mut hit_mag, mut hit_tube) = (0, 0, 0);
    for z in 0..nz {
        let mut lo: Option<(f32, usize)> = None;
        let mut hi: Option<(f32, usize)> = None;
        for y in 0..ny {
            for x in 0..nx {
                let i = g.index(x, y, z);
                if !truth.mask.data[i] {
                    continue;
                }
                if lo.is_none_or(|(m, _)| mag.data[i] < m) {
                    lo = Some((mag.data[i], i));
                }
                if hi.is_none_or(|(t, _)| tube.data[i] > t) {
                    hi = Some((tube.data[i], i));
                }
            }
        }
        let (Some((_, i_lo)), Some((_, i_hi))) = (lo, hi) else { continue };
        slices += 1;
        // the axis crosses this slice at the point where the z coordinate matches
        let zw = g.world_of_index(i_lo).z;
        let on_axis = a * (zw / a.z);
        let near = |i: usize| {
            let p = g.world_of_index(i);
            (p - on_axis).norm() <= pitch + 1e-9
        };
        hit_mag += near(i_lo) as usize;
        hit_tube += near(i_hi) as usize;
    }
    (hit_mag as f64 / slices as f64, hit_tube as f64 / slices as f64)
}
