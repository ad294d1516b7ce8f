//! Ternary ground truth from binary rater masks.
//!
//! The binary consensus keeps its Lesion set unchanged. Voxels the
//! consensus leaves as Background but at least `threshold` raters mark as
//! lesion become Uncertainty.

use crate::error::{Error, Result};
use crate::volume::{Label, LabelVolume, Mask, Volume};

/// Default rater-agreement threshold for seven raters.
pub const DEFAULT_THRESHOLD: usize = 3;

#[derive(Clone, Debug)]
pub struct RaterSet {
    raters: Vec<Mask>,
    consensus: Mask,
    pub subject_id: String,
}

impl RaterSet {
    pub fn new(subject_id: impl Into<String>, raters: Vec<Mask>, consensus: Mask) -> Result<Self> {
        if raters.is_empty() {
            return Err(Error::invalid("a rater set needs at least one rater"));
        }
        for (i, r) in raters.iter().enumerate() {
            consensus
                .geometry()
                .ensure_same(r.geometry(), &format!("rater {i} vs consensus"))?;
        }
        Ok(RaterSet {
            raters,
            consensus,
            subject_id: subject_id.into(),
        })
    }

    pub fn raters(&self) -> &[Mask] {
        &self.raters
    }

    pub fn consensus(&self) -> &Mask {
        &self.consensus
    }

    /// Per-voxel number of raters marking lesion.
    pub fn votes(&self) -> Vec<usize> {
        let mut votes = vec![0usize; self.consensus.len()];
        for r in &self.raters {
            for (v, &on) in votes.iter_mut().zip(r.data()) {
                *v += on as usize;
            }
        }
        votes
    }
}

pub fn build_ternary_consensus(rs: &RaterSet, threshold: usize) -> Result<LabelVolume> {
    let n = rs.raters.len();
    if threshold < 1 || threshold > n {
        return Err(Error::invalid(format!(
            "threshold {threshold} must lie in 1..={n}"
        )));
    }
    let data = rs
        .votes()
        .into_iter()
        .zip(rs.consensus.data())
        .map(|(votes, &lesion)| {
            if lesion {
                Label::Lesion
            } else if votes >= threshold {
                Label::Uncertainty
            } else {
                Label::Background
            }
        })
        .collect();
    Volume::new(*rs.consensus.geometry(), data)
}
