//! Phantom demo state and rendering, independent of the JS bindings.

use airway_core::config::Config;
use airway_core::eval::{evaluate, report, Metrics};
use airway_core::phantom::{generate_phantom, seed_voxel, GroundTruth, PhantomSpec};
use airway_core::tracer::{inspect_voi, trace, AirwayTree};
use airway_core::voi::Voi;
use airway_core::volume::{BinaryMask, ScalarVolume};
use airway_core::{Error, Result};
use nalgebra::Vector3;

/// Display window for CT intensities (HU).
const HU_LOW: f64 = -1000.0;
const HU_HIGH: f64 = 200.0;
const VOI_CROSS_MM: f64 = 12.0;
const VOI_LENGTH_MM: f64 = 10.0;

const TRACED: [u8; 3] = [60, 200, 90];
const FALSE_POSITIVE: [u8; 3] = [230, 60, 50];

/// Row-major RGBA image.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub rgba: Vec<u8>,
}

impl Image {
    fn gray(width: usize, height: usize, values: &[f64]) -> Self {
        let rgba = values.iter().flat_map(|&v| {
            let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
            [g, g, g, 255]
        });
        Self { width, height, rgba: rgba.collect() }
    }

    fn tint(&mut self, i: usize, c: [u8; 3]) {
        let px = &mut self.rgba[4 * i..4 * i + 3];
        for k in 0..3 {
            px[k] = ((px[k] as u16 + 2 * c[k] as u16) / 3) as u8;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceKind {
    Cef,
    Gvf,
    Tubeness,
    Centerline,
}

impl SliceKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cef" => Ok(Self::Cef),
            "gvf" => Ok(Self::Gvf),
            "tubeness" => Ok(Self::Tubeness),
            "centerline" => Ok(Self::Centerline),
            _ => Err(Error::InvalidParameter(format!("unknown slice kind `{s}`"))),
        }
    }
}

pub struct Demo {
    pub volume: ScalarVolume,
    pub truth: GroundTruth,
    pub tree: Option<AirwayTree>,
    pub metrics: Option<Metrics>,
}

impl Demo {
    pub fn new(spec: &PhantomSpec) -> Result<Self> {
        let (volume, truth) = generate_phantom(spec)?;
        Ok(Self { volume, truth, tree: None, metrics: None })
    }

    /// Projection size: x across, z down.
    pub fn size(&self) -> (usize, usize) {
        let [nx, _, nz] = self.volume.grid.dims;
        (nx, nz)
    }

    /// Length of the root segment (mm), the useful range for `voi_slice`.
    pub fn root_length(&self) -> f64 {
        let c = &self.truth.tree.branches[0].centerline;
        (c[c.len() - 1] - c[0]).norm()
    }

    /// Minimum-intensity projection along y, top of the volume first. A
    /// traced mask is overlaid: green where it meets the truth, red outside.
    pub fn projection(&self) -> Image {
        let g = self.volume.grid;
        let [nx, ny, nz] = g.dims;
        let mut vals = vec![0.0; nx * nz];
        let mut traced = vec![false; nx * nz];
        let mut stray = vec![false; nx * nz];
        let near = self.tree.as_ref().map(|_| self.truth.mask.dilate26());
        for z in 0..nz {
            let row = nz - 1 - z;
            for x in 0..nx {
                let mut lo = f64::INFINITY;
                for y in 0..ny {
                    let i = g.index(x, y, z);
                    lo = lo.min(self.volume.data[i] as f64);
                    if let (Some(t), Some(n)) = (&self.tree, &near) {
                        if t.mask.data[i] {
                            traced[x + nx * row] = true;
                            stray[x + nx * row] |= !n.data[i];
                        }
                    }
                }
                vals[x + nx * row] = (lo - HU_LOW) / (HU_HIGH - HU_LOW);
            }
        }
        let mut img = Image::gray(nx, nz, &vals);
        for i in 0..nx * nz {
            if stray[i] {
                img.tint(i, FALSE_POSITIVE);
            } else if traced[i] {
                img.tint(i, TRACED);
            }
        }
        img
    }

    /// Trace from the phantom's seed and score against the truth.
    pub fn trace(&mut self) -> Result<String> {
        let seed = seed_voxel(&self.volume.grid)
            .ok_or_else(|| Error::InsufficientExtent("no seed voxel in the root".into()))?;
        let tree = trace(&self.volume, seed, &Config::default())?;
        let m = evaluate(&tree.mask, &self.truth)?;
        let text = report(&m, None);
        self.tree = Some(tree);
        self.metrics = Some(m);
        Ok(text)
    }

    /// One VOI on the root axis, `depth` mm below the entry, shown as the
    /// longitudinal plane through its axis (cross direction across, depth
    /// down). Values are min-max scaled.
    pub fn voi_slice(&self, kind: SliceKind, depth: f64) -> Result<Image> {
        let voi = Voi::new(Vector3::new(0.0, 0.0, -depth), -Vector3::z(), VOI_CROSS_MM, VOI_LENGTH_MM, 0)?;
        let ins = inspect_voi(&self.volume, &voi, self.volume.grid.min_spacing(), &Config::default())?;
        let (vol, mask): (Option<&ScalarVolume>, Option<&BinaryMask>) = match kind {
            SliceKind::Cef => (Some(&ins.cef_score), None),
            SliceKind::Gvf => (Some(&ins.gvf_magnitude), None),
            SliceKind::Tubeness => (Some(&ins.tubeness), None),
            SliceKind::Centerline => (None, Some(&ins.centerline)),
        };
        let g = ins.resampled.grid;
        let [nx, ny, nz] = g.dims;
        let y = ny / 2;
        let mut vals: Vec<f64> = Vec::with_capacity(nx * nz);
        for z in 0..nz {
            for x in 0..nx {
                let i = g.index(x, y, z);
                vals.push(match (vol, mask) {
                    (Some(v), _) => v.data[i] as f64,
                    (_, Some(m)) => {
                        // a thinned curve rarely sits exactly on the plane
                        let hit = (-1..=1).any(|d| m.get(x as i64, y as i64 + d, z as i64));
                        hit as u8 as f64
                    }
                    _ => 0.0,
                });
            }
        }
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            vals.iter_mut().for_each(|v| *v = (*v - lo) / (hi - lo));
        } else {
            vals.iter_mut().for_each(|v| *v = 0.0);
        }
        Ok(Image::gray(nx, nz, &vals))
    }
}
