//! Lesion-by-lesion evaluation.
//!
//! Each ground-truth component is evaluated inside its own window: the
//! component dilated by `margin` voxels (cube structuring element). Both
//! masks are restricted to that window before scoring.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::volume::{connected_components, Connectivity, Geometry, Label, LabelVolume, Mask};

use super::{confusion_counts, distance, object, voxel_scores};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LesionOptions {
    pub margin: usize,
    pub connectivity: Connectivity,
}

impl Default for LesionOptions {
    fn default() -> Self {
        LesionOptions {
            margin: 2,
            connectivity: Connectivity::Vertex,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LesionMetrics {
    /// Index of the ground-truth component (ascending minimum voxel index).
    pub lesion: usize,
    pub voxels: usize,
    pub volume_mm3: f64,
    pub dice: f64,
    /// Object F1 inside the window; a missed lesion scores 0.
    pub f1: f64,
    /// Surface distance in mm; `None` when the restricted prediction is empty.
    pub sd: Option<f64>,
}

pub fn per_lesion_metrics(
    pred: &LabelVolume,
    gt: &LabelVolume,
    class: Label,
    opts: &LesionOptions,
) -> Result<Vec<LesionMetrics>> {
    let g = *pred.geometry();
    g.ensure_same(gt.geometry(), "per-lesion metrics")?;
    let pm = pred.indicator(class);
    let gm = gt.indicator(class);
    let comps = connected_components(&gm, opts.connectivity);
    let m = opts.margin;

    let mut out = Vec::with_capacity(comps.len());
    for (lesion, comp) in comps.components.iter().enumerate() {
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        for &i in comp {
            let c = g.coords(i);
            for a in 0..3 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
        }
        for a in 0..3 {
            lo[a] = lo[a].saturating_sub(m);
            hi[a] = (hi[a] + m).min(g.dims[a] - 1);
        }
        let crop = Geometry::new(
            [hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1],
            g.spacing,
        )?;
        let local = |c: [usize; 3]| crop.index(c[0] - lo[0], c[1] - lo[1], c[2] - lo[2]);

        let mut window = vec![false; crop.len()];
        for &i in comp {
            let c = g.coords(i);
            let from = |a: usize| c[a].saturating_sub(m).max(lo[a]);
            let to = |a: usize| (c[a] + m).min(hi[a]);
            for z in from(2)..=to(2) {
                for y in from(1)..=to(1) {
                    for x in from(0)..=to(0) {
                        window[local([x, y, z])] = true;
                    }
                }
            }
        }
        let restrict = |mask: &Mask| {
            Mask::from_fn(crop, |[x, y, z]| {
                window[crop.index(x, y, z)] && mask.get(x + lo[0], y + lo[1], z + lo[2])
            })
        };
        let pr = restrict(&pm)?;
        let gr = restrict(&gm)?;

        let dice = voxel_scores(&confusion_counts(&pr, &gr)?)
            .dice
            .unwrap_or(0.0);
        let f1 = object::object_scores(&pr, &gr, opts.connectivity)?
            .f1
            .unwrap_or(0.0);
        let sd = distance::surface_distance(&pr, &gr)?;
        out.push(LesionMetrics {
            lesion,
            voxels: comp.len(),
            volume_mm3: comps.volumes_mm3[lesion],
            dice,
            f1,
            sd,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_lesions() -> LabelVolume {
        let g = Geometry::new([16, 8, 8], [1.0, 1.0, 2.0]).unwrap();
        LabelVolume::from_fn(g, |[x, y, z]| {
            let a = (2..5).contains(&x) && (2..5).contains(&y) && (2..5).contains(&z);
            let b = (10..12).contains(&x) && (3..5).contains(&y) && (3..5).contains(&z);
            if a || b {
                Label::Lesion
            } else {
                Label::Background
            }
        })
        .unwrap()
    }

    #[test]
    fn perfect_prediction() {
        let gt = two_lesions();
        let r = per_lesion_metrics(&gt, &gt, Label::Lesion, &LesionOptions::default()).unwrap();
        assert_eq!(r.len(), 2);
        for l in &r {
            assert_eq!((l.dice, l.f1, l.sd), (1.0, 1.0, Some(0.0)));
        }
        assert_eq!(r[0].voxels, 27);
        assert_eq!(r[0].volume_mm3, 54.0);
        assert_eq!(r[1].volume_mm3, 16.0);
    }

    #[test]
    fn missed_lesion() {
        let gt = two_lesions();
        let pred = gt.map(|l| l);
        let pred = LabelVolume::from_fn(*gt.geometry(), |[x, y, z]| {
            if x < 8 {
                pred.get(x, y, z)
            } else {
                Label::Background
            }
        })
        .unwrap();
        let r = per_lesion_metrics(&pred, &gt, Label::Lesion, &LesionOptions::default()).unwrap();
        assert_eq!((r[0].dice, r[0].f1, r[0].sd), (1.0, 1.0, Some(0.0)));
        assert_eq!((r[1].dice, r[1].f1, r[1].sd), (0.0, 0.0, None));
    }
}
