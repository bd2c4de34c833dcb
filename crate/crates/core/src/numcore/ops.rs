//! Differentiable primitives: activations, softmax, cross-entropy, dropout.

use super::mat::Mat;
use crate::error::{Error, Result};
use rand::Rng;

#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Elementwise logistic function; saturates at 0/1, never NaN for finite input.
pub fn sigmoid(x: &Mat) -> Mat {
    x.map(sigmoid_scalar)
}

/// Elementwise tanh.
pub fn tanh(x: &Mat) -> Mat {
    x.map(f64::tanh)
}

/// Numerically stable softmax with max-subtraction.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// Floor applied inside the cross-entropy log so saturated predictions do
/// not produce -inf early in training.
pub const CE_FLOOR: f64 = 1e-12;

/// `-ln p[y]`, clamped at [`CE_FLOOR`]. Callers that care whether the clamp
/// fired should test `p[y] <= CE_FLOOR` and record it in their diagnostics.
pub fn cross_entropy(p: &[f64], y: usize) -> f64 {
    -p[y].max(CE_FLOOR).ln()
}

/// Inverted-dropout mask: entries are 0 with probability `rate`, otherwise
/// `1/(1-rate)`, so the expectation of `x ⊙ mask` equals `x`.
pub fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut impl Rng) -> Result<Mat> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidParam(format!(
            "dropout rate {rate} outside [0, 1)"
        )));
    }
    let keep = 1.0 / (1.0 - rate);
    let mut m = Mat::zeros(rows, cols);
    for v in m.data_mut() {
        *v = if rng.gen::<f64>() < rate { 0.0 } else { keep };
    }
    Ok(m)
}

/// Inverted dropout. In eval mode (or at rate 0) the output is bit-identical
/// to the input.
pub fn dropout(x: &Mat, rate: f64, rng: &mut impl Rng, train_mode: bool) -> Result<Mat> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidParam(format!(
            "dropout rate {rate} outside [0, 1)"
        )));
    }
    if !train_mode || rate == 0.0 {
        return Ok(x.clone());
    }
    let mask = dropout_mask(x.rows(), x.cols(), rate, rng)?;
    x.hadamard(&mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::seeded_rng;

    #[test]
    fn sigmoid_symmetry_point_and_oracle() {
        assert_eq!(sigmoid_scalar(0.0), 0.5);
        // scalar math-library oracle: 1/(1+exp(-1))
        let want = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((sigmoid_scalar(1.0) - want).abs() < 1e-15);
        assert!((sigmoid_scalar(1.0) - 0.7310585786300049).abs() < 1e-12);
    }

    #[test]
    fn tanh_is_odd_at_zero() {
        assert_eq!(0.0f64.tanh(), 0.0);
        let m = tanh(&Mat::col(&[0.0, 1.0, -1.0]));
        assert_eq!(m.get(0, 0), 0.0);
        assert!((m.get(1, 0) + m.get(2, 0)).abs() < 1e-15);
    }

    #[test]
    fn saturation_never_produces_nan() {
        let extreme = Mat::col(&[1e6, -1e6, 750.0, -750.0]);
        assert!(sigmoid(&extreme).is_finite());
        assert!(tanh(&extreme).is_finite());
        let p = softmax(&[1e6, -1e6, 0.0]);
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn softmax_uniform_on_equal_logits() {
        let p = softmax(&[0.0, 0.0, 0.0]);
        for v in &p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_shift_invariance() {
        let z = [0.3, -1.2, 2.5];
        let a = softmax(&z);
        let b = softmax(&z.map(|v| v + 123.456));
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_direct_exponential_oracle() {
        // direct exponential-sum oracle, no max subtraction
        let z = [1.0f64, 2.0, 3.0];
        let exps: Vec<f64> = z.iter().map(|v| v.exp()).collect();
        let sum: f64 = exps.iter().sum();
        let want: Vec<f64> = exps.iter().map(|e| e / sum).collect();
        let got = softmax(&z);
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() < 1e-14);
        }
        assert!((got[0] - 0.09003057317038046).abs() < 1e-10);
        assert!((got[1] - 0.24472847105479767).abs() < 1e-10);
        assert!((got[2] - 0.6652409557748219).abs() < 1e-10);
        let total: f64 = got.iter().sum();
        assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn cross_entropy_closed_forms() {
        assert_eq!(cross_entropy(&[0.0, 1.0, 0.0], 1), 0.0);
        let uniform = [1.0 / 3.0; 3];
        assert!((cross_entropy(&uniform, 0) - 3.0f64.ln()).abs() < 1e-12);
        assert!((cross_entropy(&[0.7, 0.2, 0.1], 1) - (-0.2f64.ln())).abs() < 1e-12);
        assert!((cross_entropy(&[0.7, 0.2, 0.1], 1) - 1.6094379124341003).abs() < 1e-10);
    }

    #[test]
    fn cross_entropy_clamps_at_floor() {
        let loss = cross_entropy(&[1.0, 0.0, 0.0], 1);
        assert!((loss - (-CE_FLOOR.ln())).abs() < 1e-9);
        assert!(loss.is_finite());
    }

    #[test]
    fn dropout_rate_zero_and_eval_are_identity() {
        let x = Mat::col(&[1.0, 2.0, 3.0]);
        let mut rng = seeded_rng(5, 0);
        assert_eq!(dropout(&x, 0.0, &mut rng, true).unwrap(), x);
        assert_eq!(dropout(&x, 0.9, &mut rng, false).unwrap(), x);
    }

    #[test]
    fn dropout_rejects_rate_one() {
        let x = Mat::col(&[1.0]);
        let mut rng = seeded_rng(5, 0);
        assert!(dropout(&x, 1.0, &mut rng, true).is_err());
        assert!(dropout(&x, -0.1, &mut rng, true).is_err());
    }

    #[test]
    fn dropout_monte_carlo_expectation() {
        // mean over 1e6 draws of dropout(1.0, rate=0.1) should be 1.0 +- 0.01
        let mut rng = seeded_rng(99, 0);
        let n = 1_000_000;
        let x = Mat::filled(1, 1, 1.0);
        let mut sum = 0.0;
        for _ in 0..n {
            sum += dropout(&x, 0.1, &mut rng, true).unwrap().get(0, 0);
        }
        let mean = sum / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }
}
