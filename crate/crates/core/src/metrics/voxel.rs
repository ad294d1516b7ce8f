use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::volume::{Label, LabelVolume, Mask, Orientation};

use super::ratio;

/// Voxel-level confusion tallies for one class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Ground-truth positives.
    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    fn add(&mut self, pred: bool, gt: bool) {
        match (pred, gt) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }
}

pub fn confusion_counts(pred: &Mask, gt: &Mask) -> Result<ConfusionCounts> {
    pred.geometry().ensure_same(gt.geometry(), "confusion counts")?;
    let mut c = ConfusionCounts::default();
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        c.add(p, g);
    }
    Ok(c)
}

/// Scores and error ratios derived from [`ConfusionCounts`]. `None` marks a
/// zero denominator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VoxelScores {
    pub sens: Option<f64>,
    pub spec: Option<f64>,
    pub acc: Option<f64>,
    pub ppv: Option<f64>,
    pub dice: Option<f64>,
    pub iou: Option<f64>,
    pub ef: Option<f64>,
    pub fde: Option<f64>,
    pub rae: Option<f64>,
}

pub fn voxel_scores(c: &ConfusionCounts) -> VoxelScores {
    let (tp, fp, tn, fn_) = (c.tp as f64, c.fp as f64, c.tn as f64, c.fn_ as f64);
    let p = tp + fn_;
    let sens = ratio(tp, tp + fn_);
    let spec = ratio(tn, tn + fp);
    VoxelScores {
        sens,
        spec,
        acc: sens.zip(spec).map(|(a, b)| (a + b) / 2.0),
        ppv: ratio(tp, tp + fp),
        dice: ratio(2.0 * tp, 2.0 * tp + fp + fn_),
        iou: ratio(tp, tp + fp + fn_),
        ef: ratio(fp, p),
        fde: ratio(fp, p),
        rae: ratio((tp + fp - p).abs(), p),
    }
}

/// Pearson correlation of two indicator vectors; `None` if either is constant.
pub fn pcc(a: &Mask, b: &Mask) -> Result<Option<f64>> {
    let c = confusion_counts(a, b)?;
    let n = c.total() as f64;
    let na = (c.tp + c.fp) as f64;
    let nb = (c.tp + c.fn_) as f64;
    let denom = (na * (n - na)).sqrt() * (nb * (n - nb)).sqrt();
    if denom == 0.0 {
        return Ok(None);
    }
    let r = (n * c.tp as f64 - na * nb) / denom;
    Ok(Some(r.clamp(-1.0, 1.0)))
}

/// How Image Dice treats slices where both masks are empty.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmptySlicePolicy {
    #[default]
    Exclude,
    CountAsOne,
}

/// Dice per 2D slice along `orientation`, averaged.
pub fn image_dice(
    pred: &LabelVolume,
    gt: &LabelVolume,
    class: Label,
    orientation: Orientation,
    policy: EmptySlicePolicy,
) -> Result<Option<f64>> {
    let g = pred.geometry();
    g.ensure_same(gt.geometry(), "image dice")?;
    let (_, _, fixed) = orientation.axes();
    let mut per_slice = vec![ConfusionCounts::default(); g.dims[fixed]];
    for (i, (&p, &t)) in pred.data().iter().zip(gt.data()).enumerate() {
        per_slice[g.coords(i)[fixed]].add(p == class, t == class);
    }
    let scores: Vec<f64> = per_slice
        .iter()
        .filter_map(|c| {
            let denom = 2 * c.tp + c.fp + c.fn_;
            match (denom, policy) {
                (0, EmptySlicePolicy::Exclude) => None,
                (0, EmptySlicePolicy::CountAsOne) => Some(1.0),
                _ => Some(2.0 * c.tp as f64 / denom as f64),
            }
        })
        .collect();
    Ok(super::mean(&scores))
}
