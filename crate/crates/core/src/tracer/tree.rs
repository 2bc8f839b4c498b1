use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::voi::Voi;
use crate::volume::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchStatus {
    Open,
    Terminated,
    Leaked,
}

/// One VOI of a branch chain and, if it was accepted, its segmented region
/// in the VOI lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct TracedVoi {
    pub voi: Voi,
    pub mask: Option<BinaryMask>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchRecord {
    pub id: usize,
    pub parent: Option<usize>,
    pub generation: usize,
    pub vois: Vec<TracedVoi>,
    /// Polyline in world coordinates (mm).
    pub centerline: Vec<Vector3<f64>>,
    pub mean_radius: f64,
    pub status: BranchStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AirwayTree {
    pub branches: Vec<BranchRecord>,
    pub root: usize,
    pub mask: BinaryMask,
    /// Set when tracing stopped early on the voxel budget.
    pub truncated: bool,
}

#[derive(Serialize, Deserialize)]
struct BranchJson {
    id: usize,
    parent: Option<usize>,
    generation: usize,
    centerline: Vec<[f64; 3]>,
    mean_radius: f64,
    status: BranchStatus,
}

#[derive(Serialize, Deserialize)]
struct TreeJson {
    branches: Vec<BranchJson>,
    voxel_count: usize,
    #[serde(default)]
    truncated: bool,
}

impl AirwayTree {
    pub fn branch(&self, id: usize) -> Option<&BranchRecord> {
        self.branches.iter().find(|b| b.id == id)
    }

    pub fn count_with_status(&self, status: BranchStatus) -> usize {
        self.branches.iter().filter(|b| b.status == status).count()
    }

    /// Check the rooted-tree invariants: unique ids, exactly one root, every
    /// parent exists, no cycles, and child generation = parent + 1.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(format!("invalid tree: {m}")));
        let mut ids: Vec<usize> = self.branches.iter().map(|b| b.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return bad("duplicate branch id".into());
        }
        let roots = self.branches.iter().filter(|b| b.parent.is_none()).count();
        if !self.branches.is_empty() && roots != 1 {
            return bad(format!("{roots} roots"));
        }
        for b in &self.branches {
            let mut cur = b;
            let mut steps = 0;
            while let Some(p) = cur.parent {
                let Some(parent) = self.branch(p) else {
                    return bad(format!("branch {} has missing parent {p}", cur.id));
                };
                if parent.generation + 1 != cur.generation {
                    return bad(format!("generation jump at branch {}", cur.id));
                }
                cur = parent;
                steps += 1;
                if steps > self.branches.len() {
                    return bad(format!("cycle through branch {}", b.id));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = TreeJson {
            branches: self
                .branches
                .iter()
                .map(|b| BranchJson {
                    id: b.id,
                    parent: b.parent,
                    generation: b.generation,
                    centerline: b.centerline.iter().map(|p| [p.x, p.y, p.z]).collect(),
                    mean_radius: b.mean_radius,
                    status: b.status,
                })
                .collect(),
            voxel_count: self.mask.count(),
            truncated: self.truncated,
        };
        Ok(serde_json::to_string_pretty(&doc)? + "\n")
    }

    /// Rebuild a tree from its JSON form and the mask it was saved with.
    pub fn from_json(json: &str, mask: BinaryMask) -> Result<Self> {
        let doc: TreeJson = serde_json::from_str(json)?;
        let branches: Vec<BranchRecord> = doc
            .branches
            .into_iter()
            .map(|b| BranchRecord {
                id: b.id,
                parent: b.parent,
                generation: b.generation,
                vois: Vec::new(),
                centerline: b.centerline.iter().map(|p| Vector3::new(p[0], p[1], p[2])).collect(),
                mean_radius: b.mean_radius,
                status: b.status,
            })
            .collect();
        let root = branches.iter().find(|b| b.parent.is_none()).map(|b| b.id).unwrap_or(0);
        let tree = Self { branches, root, mask, truncated: doc.truncated };
        tree.validate()?;
        Ok(tree)
    }
}
