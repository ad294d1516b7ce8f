use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::volume::{connected_components, Connectivity, Mask};

use super::ratio;

/// Object-level (connected component) tallies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectCounts {
    /// Ground-truth objects touched by the prediction.
    pub tp_o: u64,
    /// Predicted objects touching no ground-truth object.
    pub fp_o: u64,
    /// Ground-truth objects the prediction misses.
    pub fn_o: u64,
}

/// Object scores plus the detection/outline error rates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectScores {
    pub counts: ObjectCounts,
    /// Voxels of predicted objects with no ground-truth overlap.
    pub detection_error: u64,
    /// `|A ∪ G| - |A ∩ G|` over overlapping objects of both masks.
    pub outline_error: u64,
    /// Mean of the two positive-voxel counts.
    pub mean_total_area: f64,
    pub osens: Option<f64>,
    pub oppv: Option<f64>,
    pub f1: Option<f64>,
    pub der: Option<f64>,
    pub oer: Option<f64>,
}

/// Harmonic mean; zero when both inputs are zero.
pub(crate) fn f1_of(osens: Option<f64>, oppv: Option<f64>) -> Option<f64> {
    let (s, p) = (osens?, oppv?);
    if s + p == 0.0 {
        Some(0.0)
    } else {
        Some(2.0 * s * p / (s + p))
    }
}

pub fn object_scores(pred: &Mask, gt: &Mask, connectivity: Connectivity) -> Result<ObjectScores> {
    pred.geometry().ensure_same(gt.geometry(), "object scores")?;
    let pc = connected_components(pred, connectivity);
    let gc = connected_components(gt, connectivity);
    let (p, g) = (pred.data(), gt.data());

    let mut counts = ObjectCounts::default();
    let mut overlap = vec![false; p.len()];
    for comp in &gc.components {
        if comp.iter().any(|&i| p[i]) {
            counts.tp_o += 1;
            comp.iter().for_each(|&i| overlap[i] = true);
        } else {
            counts.fn_o += 1;
        }
    }
    let mut detection_error = 0u64;
    for comp in &pc.components {
        if comp.iter().any(|&i| g[i]) {
            comp.iter().for_each(|&i| overlap[i] = true);
        } else {
            counts.fp_o += 1;
            detection_error += comp.len() as u64;
        }
    }
    let intersection = p.iter().zip(g).filter(|(&a, &b)| a && b).count() as u64;
    let outline_error = overlap.iter().filter(|&&o| o).count() as u64 - intersection;
    let mean_total_area = (pred.count() + gt.count()) as f64 / 2.0;

    let mut s = ObjectScores {
        counts,
        detection_error,
        outline_error,
        mean_total_area,
        ..ObjectScores::default()
    };
    if mean_total_area == 0.0 {
        return Ok(s);
    }
    let (tp, fp, fn_) = (counts.tp_o as f64, counts.fp_o as f64, counts.fn_o as f64);
    s.osens = ratio(tp, tp + fn_);
    s.oppv = ratio(tp, tp + fp);
    s.f1 = f1_of(s.osens, s.oppv);
    s.der = Some(detection_error as f64 / mean_total_area);
    s.oer = Some(outline_error as f64 / mean_total_area);
    Ok(s)
}
