//! Branch extraction and false-positive metrics against ground truth.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::phantom::GroundTruth;
use crate::volume::{BinaryMask, Grid};

/// A truth branch is extracted when at least this fraction of its
/// centerline voxels lie near the result.
pub const HIT_FRACTION: f64 = 0.5;
/// "Near" means within this many voxels (Euclidean, index units).
pub const HIT_DISTANCE_VOXELS: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub branches_extracted: usize,
    pub branches_total: usize,
    /// Percent of truth branches extracted.
    pub extraction_ratio: f64,
    /// Percent of result voxels outside the one-voxel dilation of the truth.
    pub fpr: f64,
    pub fp_voxels: usize,
    pub tp_voxels: usize,
}

impl Metrics {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Voxels visited by a world-space polyline, sampled at a quarter pitch.
pub fn centerline_voxels(grid: &Grid, pts: &[Vector3<f64>]) -> BTreeSet<usize> {
    let step = 0.25 * grid.min_spacing();
    let mut out = BTreeSet::new();
    let mut visit = |p: &Vector3<f64>| {
        if let Some([x, y, z]) = grid.nearest_voxel(p) {
            out.insert(grid.index(x, y, z));
        }
    };
    if let [only] = pts {
        visit(only);
    }
    for w in pts.windows(2) {
        let n = ((w[1] - w[0]).norm() / step).ceil().max(1.0) as usize;
        for k in 0..=n {
            visit(&(w[0] + (w[1] - w[0]) * (k as f64 / n as f64)));
        }
    }
    out
}

/// Whether any set voxel of `m` lies within `HIT_DISTANCE_VOXELS` of `idx`.
fn near_result(m: &BinaryMask, idx: usize) -> bool {
    let g = m.grid;
    let [x, y, z] = g.coords(idx).map(|c| c as i64);
    let r = HIT_DISTANCE_VOXELS.floor() as i64;
    let r2 = HIT_DISTANCE_VOXELS * HIT_DISTANCE_VOXELS;
    for dz in -r..=r {
        for dy in -r..=r {
            for dx in -r..=r {
                if ((dx * dx + dy * dy + dz * dz) as f64) <= r2 && m.get(x + dx, y + dy, z + dz) {
                    return true;
                }
            }
        }
    }
    false
}

pub fn evaluate(result: &BinaryMask, truth: &GroundTruth) -> Result<Metrics> {
    result.grid.check_same(&truth.mask.grid, "evaluation masks")?;
    let grid = result.grid;
    let total = truth.tree.branches.len();
    let extracted = truth
        .tree
        .branches
        .iter()
        .filter(|b| {
            let voxels = centerline_voxels(&grid, &b.centerline);
            let hits = voxels.iter().filter(|&&i| near_result(result, i)).count();
            !voxels.is_empty() && hits as f64 >= HIT_FRACTION * voxels.len() as f64
        })
        .count();
    let near_truth = truth.mask.dilate26();
    let (mut fp, mut tp) = (0, 0);
    for i in result.indices() {
        if near_truth.data[i] {
            tp += 1;
        } else {
            fp += 1;
        }
    }
    let n = result.count();
    Ok(Metrics {
        branches_extracted: extracted,
        branches_total: total,
        extraction_ratio: if total == 0 { 0.0 } else { 100.0 * extracted as f64 / total as f64 },
        fpr: if n == 0 { 0.0 } else { 100.0 * fp as f64 / n as f64 },
        fp_voxels: fp,
        tp_voxels: tp,
    })
}

const HEADERS: [&str; 4] = ["Method", "Average Extracted Numbers", "Ratio of Extracted Number(%)", "FPR(%)"];

fn row(out: &mut String, name: &str, cells: [String; 3]) {
    let _ = write!(out, "{:<10}", name);
    for (h, c) in HEADERS[1..].iter().zip(cells) {
        let _ = write!(out, "  {:>w$}", c, w = h.len());
    }
    out.push('\n');
}

fn values(m: &Metrics) -> [f64; 3] {
    [m.branches_extracted as f64, m.extraction_ratio, m.fpr]
}

/// Plain-text results table: one row per method with the extracted branch
/// count, extraction ratio and FPR at two decimals. A baseline adds its own
/// row above the result and a signed delta row below.
pub fn report(m: &Metrics, baseline: Option<&Metrics>) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<10}", HEADERS[0]);
    for h in &HEADERS[1..] {
        let _ = write!(out, "  {h}");
    }
    out.push('\n');
    if let Some(b) = baseline {
        row(&mut out, "Baseline", values(b).map(|v| format!("{v:.2}")));
    }
    row(&mut out, "Result", values(m).map(|v| format!("{v:.2}")));
    if let Some(b) = baseline {
        let (a, b) = (values(m), values(b));
        row(&mut out, "Delta", [0, 1, 2].map(|k| format!("{:+.2}", a[k] - b[k])));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(n: usize, ratio: f64, fpr: f64) -> Metrics {
        Metrics { branches_extracted: n, branches_total: 8, extraction_ratio: ratio, fpr, fp_voxels: 0, tp_voxels: 0 }
    }

    #[test]
    fn report_layout() {
        let t = report(&metrics(7, 79.3, 0.26), None);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("Method"));
        assert!(lines[0].contains("Ratio of Extracted Number(%)"));
        let cells: Vec<&str> = lines[1].split_whitespace().collect();
        assert_eq!(cells, ["Result", "7.00", "79.30", "0.26"]);
    }

    #[test]
    fn report_with_baseline_has_delta() {
        let t = report(&metrics(7, 79.3, 0.26), Some(&metrics(6, 76.5, 0.76)));
        let lines: Vec<Vec<&str>> = t.lines().map(|l| l.split_whitespace().collect()).collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1], ["Baseline", "6.00", "76.50", "0.76"]);
        assert_eq!(lines[3], ["Delta", "+1.00", "+2.80", "-0.50"]);
        // columns line up under their headers
        let widths: Vec<usize> = t.lines().map(str::len).collect();
        assert!(widths.iter().all(|&w| w == widths[0]));
    }

    #[test]
    fn straight_line_voxels() {
        let g = Grid::new([10, 3, 3], [1.0; 3], [0.0; 3]).unwrap();
        let v = centerline_voxels(&g, &[Vector3::new(0.0, 1.0, 1.0), Vector3::new(9.0, 1.0, 1.0)]);
        assert_eq!(v.len(), 10);
    }
}
