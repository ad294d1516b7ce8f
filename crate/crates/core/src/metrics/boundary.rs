//! Per-slice boundary F1.
//!
//! A boundary pixel counts as matched when the other mask has a boundary
//! pixel within `θ = max(tolerance_fraction * slice diagonal, 1)` pixels.

use crate::error::Result;
use crate::volume::{boundary_pixels, extract_slices, Image2, Label, LabelVolume, Orientation};

pub const DEFAULT_BF_TOLERANCE: f64 = 0.0075;

pub fn boundary_f1(
    pred: &LabelVolume,
    gt: &LabelVolume,
    class: Label,
    orientation: Orientation,
    tolerance_fraction: f64,
) -> Result<Option<f64>> {
    pred.geometry().ensure_same(gt.geometry(), "boundary F1")?;
    let ps = extract_slices(&pred.indicator(class), orientation);
    let gs = extract_slices(&gt.indicator(class), orientation);
    let scores: Vec<f64> = ps
        .slices
        .iter()
        .zip(&gs.slices)
        .filter_map(|(p, g)| slice_f1(p, g, tolerance_fraction))
        .collect();
    Ok(super::mean(&scores))
}

/// `None` when neither slice has a boundary.
pub fn slice_f1(pred: &Image2<bool>, gt: &Image2<bool>, tolerance_fraction: f64) -> Option<f64> {
    let bp = boundary_pixels(pred);
    let bg = boundary_pixels(gt);
    if bp.is_empty() && bg.is_empty() {
        return None;
    }
    if bp.is_empty() || bg.is_empty() {
        return Some(0.0);
    }
    let diag = ((pred.width * pred.width + pred.height * pred.height) as f64).sqrt();
    let theta = (tolerance_fraction * diag).max(1.0);

    let as_image = |pts: &[(usize, usize)]| {
        let mut img = Image2::filled(pred.width, pred.height, false);
        for &(u, v) in pts {
            img.set(u, v, true);
        }
        img
    };
    let gi = as_image(&bg);
    let pi = as_image(&bp);
    let precision = matched(&bp, &gi, theta) as f64 / bp.len() as f64;
    let recall = matched(&bg, &pi, theta) as f64 / bg.len() as f64;
    if precision + recall == 0.0 {
        Some(0.0)
    } else {
        Some(2.0 * precision * recall / (precision + recall))
    }
}

fn matched(points: &[(usize, usize)], target: &Image2<bool>, theta: f64) -> usize {
    let r = theta.floor() as isize;
    let t2 = theta * theta;
    points
        .iter()
        .filter(|&&(u, v)| {
            for dv in -r..=r {
                for du in -r..=r {
                    if (du * du + dv * dv) as f64 > t2 {
                        continue;
                    }
                    let (x, y) = (u as isize + du, v as isize + dv);
                    if x >= 0
                        && y >= 0
                        && (x as usize) < target.width
                        && (y as usize) < target.height
                        && target.get(x as usize, y as usize)
                    {
                        return true;
                    }
                }
            }
            false
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Geometry;

    fn square(n: usize, x0: usize, y0: usize, side: usize) -> LabelVolume {
        let g = Geometry::with_dims([n, n, 1]).unwrap();
        LabelVolume::from_fn(g, |[x, y, _]| {
            if (x0..x0 + side).contains(&x) && (y0..y0 + side).contains(&y) {
                Label::Lesion
            } else {
                Label::Background
            }
        })
        .unwrap()
    }

    fn bf(a: &LabelVolume, b: &LabelVolume) -> Option<f64> {
        boundary_f1(a, b, Label::Lesion, Orientation::Axial, DEFAULT_BF_TOLERANCE).unwrap()
    }

    #[test]
    fn identical_is_one() {
        let a = square(20, 4, 4, 6);
        assert_eq!(bf(&a, &a), Some(1.0));
    }

    #[test]
    fn one_pixel_shift_is_fully_matched() {
        // diag of 20x20 is ~28.3, so theta is clamped to 1 pixel
        assert_eq!(bf(&square(20, 4, 4, 6), &square(20, 5, 4, 6)), Some(1.0));
    }

    #[test]
    fn far_shift_is_zero() {
        assert_eq!(bf(&square(30, 2, 2, 4), &square(30, 20, 20, 4)), Some(0.0));
    }

    #[test]
    fn empty_slices_are_skipped() {
        let g = Geometry::with_dims([5, 5, 1]).unwrap();
        let e = LabelVolume::filled(g, Label::Background);
        assert_eq!(bf(&e, &e), None);
        assert_eq!(bf(&square(5, 1, 1, 2), &e), Some(0.0));
    }
}
