use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-7;

/// Multi-label cross entropy over three classes, averaged over observations.
///
/// `loss = -(1/N) Σ_n Σ_i [T log Y + (1 - T) log(1 - Y)]` with `Y` clamped to
/// `[ε, 1 - ε]`. The leading minus makes the loss non-negative.
pub fn cross_entropy_loss(
    predicted: &[[f64; 3]],
    targets: &[[f64; 3]],
    epsilon: f64,
) -> Result<f64> {
    if predicted.len() != targets.len() {
        return Err(Error::invalid(format!(
            "{} predictions vs {} targets",
            predicted.len(),
            targets.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::invalid("cross entropy needs at least one observation"));
    }
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::invalid(format!("epsilon {epsilon} outside (0, 0.5)")));
    }
    let mut total = 0.0;
    for (y, t) in predicted.iter().zip(targets) {
        for (&yi, &ti) in y.iter().zip(t) {
            if !(0.0..=1.0).contains(&yi) || !(0.0..=1.0).contains(&ti) {
                return Err(Error::invalid(format!(
                    "probability {yi} or target {ti} outside [0, 1]"
                )));
            }
            let yc = yi.clamp(epsilon, 1.0 - epsilon);
            total += ti * yc.ln() + (1.0 - ti) * (1.0 - yc).ln();
        }
    }
    Ok(-total / predicted.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_prediction() {
        let l = cross_entropy_loss(&[[1.0 / 3.0; 3]], &[[1.0, 0.0, 0.0]], DEFAULT_EPSILON).unwrap();
        let expected = -((1.0f64 / 3.0).ln() + 2.0 * (2.0f64 / 3.0).ln());
        assert!((l - expected).abs() < 1e-12);
        assert!((l - 1.9095).abs() < 1e-4);
    }

    #[test]
    fn exact_prediction_is_near_zero() {
        let t = [[0.0, 1.0, 0.0]];
        let l = cross_entropy_loss(&t, &t, DEFAULT_EPSILON).unwrap();
        assert!(l >= 0.0);
        assert!(l <= 3.0 * (1.0 - DEFAULT_EPSILON).ln().abs() + 1e-9);
    }

    #[test]
    fn mean_over_identical_observations() {
        let y = [0.2, 0.5, 0.3];
        let t = [0.0, 1.0, 0.0];
        let one = cross_entropy_loss(&[y], &[t], DEFAULT_EPSILON).unwrap();
        let many = cross_entropy_loss(&[y; 7], &[t; 7], DEFAULT_EPSILON).unwrap();
        assert!((one - many).abs() < 1e-12);
    }

    #[test]
    fn decreases_toward_target() {
        let t = [[1.0, 0.0, 0.0]];
        let mut last = f64::INFINITY;
        for k in 1..10 {
            let p = k as f64 / 10.0;
            let l = cross_entropy_loss(&[[p, 0.1, 0.1]], &t, DEFAULT_EPSILON).unwrap();
            assert!(l < last);
            last = l;
        }
    }

    #[test]
    fn shape_mismatch() {
        assert!(cross_entropy_loss(&[[0.5; 3]], &[], DEFAULT_EPSILON).is_err());
        assert!(cross_entropy_loss(&[[1.5, 0.0, 0.0]], &[[1.0, 0.0, 0.0]], DEFAULT_EPSILON).is_err());
    }
}
