//! Central finite-difference verification of hand-derived backward passes.

use super::mat::Mat;
use crate::error::{Error, Result};

/// Anything whose trainable parameters can be enumerated as an ordered list
/// of named matrix blocks. The order must be stable: gradients, optimizer
/// state and the checker all address blocks by position.
pub trait ParamBlocks {
    fn block_names(&self) -> Vec<String>;
    fn blocks(&self) -> Vec<&Mat>;
    fn blocks_mut(&mut self) -> Vec<&mut Mat>;
}

/// A flat, ordered bag of named blocks; the simplest `ParamBlocks` carrier.
pub struct NamedBlocks {
    pub names: Vec<String>,
    pub mats: Vec<Mat>,
}

impl ParamBlocks for NamedBlocks {
    fn block_names(&self) -> Vec<String> {
        self.names.clone()
    }
    fn blocks(&self) -> Vec<&Mat> {
        self.mats.iter().collect()
    }
    fn blocks_mut(&mut self) -> Vec<&mut Mat> {
        self.mats.iter_mut().collect()
    }
}

#[derive(Clone, Debug)]
pub struct BlockCheck {
    pub name: String,
    pub max_rel_err: f64,
}

pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Noise floor in the relative-error denominator. Central differences of an
/// O(1) loss in f64 at step 1e-5 carry ~1e-11 of cancellation noise, so
/// entries whose true gradient is near zero measure pure noise; the floor
/// turns them into an absolute comparison at `tol * NOISE_FLOOR`.
pub const NOISE_FLOOR: f64 = 1e-6;

/// Compares `analytic` (one gradient block per parameter block, same order)
/// against central finite differences of `loss_fn`, perturbing one entry at
/// a time. Returns the max relative error per block, where relative error is
/// `|a - n| / max(|a|, |n|, NOISE_FLOOR)`.
///
/// `loss_fn` must be pure: same parameters, same loss. Parameters are
/// restored exactly before returning.
pub fn grad_check<P, F>(
    params: &mut P,
    analytic: &[Mat],
    mut loss_fn: F,
    step: f64,
) -> Result<Vec<BlockCheck>>
where
    P: ParamBlocks,
    F: FnMut(&P) -> Result<f64>,
{
    let names = params.block_names();
    if analytic.len() != names.len() {
        return Err(Error::Dim(format!(
            "grad_check: {} analytic blocks for {} parameter blocks",
            analytic.len(),
            names.len()
        )));
    }
    let mut out = Vec::with_capacity(names.len());
    for (b, name) in names.iter().enumerate() {
        let n_entries = params.blocks()[b].len();
        if analytic[b].len() != n_entries {
            return Err(Error::Dim(format!(
                "grad_check block {name}: analytic has {} entries, parameter has {}",
                analytic[b].len(),
                n_entries
            )));
        }
        let mut worst = 0.0f64;
        for i in 0..n_entries {
            let orig = params.blocks()[b].data()[i];
            params.blocks_mut()[b].data_mut()[i] = orig + step;
            let plus = loss_fn(params)?;
            params.blocks_mut()[b].data_mut()[i] = orig - step;
            let minus = loss_fn(params)?;
            params.blocks_mut()[b].data_mut()[i] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss at perturbed entry {i} of block {name}"
                )));
            }
            let numeric = (plus - minus) / (2.0 * step);
            let a = analytic[b].data()[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(NOISE_FLOOR);
            if rel > worst {
                worst = rel;
            }
        }
        out.push(BlockCheck {
            name: name.clone(),
            max_rel_err: worst,
        });
    }
    Ok(out)
}

/// Largest per-block error in a check result.
pub fn max_rel_err(checks: &[BlockCheck]) -> f64 {
    checks.iter().map(|c| c.max_rel_err).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::seeded_rng;

    fn linear_setup() -> (NamedBlocks, Mat) {
        let mut rng = seeded_rng(3, 0);
        let w = Mat::uniform(1, 6, -1.0, 1.0, &mut rng);
        let x = Mat::uniform(6, 1, -1.0, 1.0, &mut rng);
        (
            NamedBlocks {
                names: vec!["w".into()],
                mats: vec![w],
            },
            x,
        )
    }

    #[test]
    fn linear_loss_is_exact() {
        let (mut params, x) = linear_setup();
        // loss = w . x, so dloss/dw = x^T
        let analytic = vec![Mat::from_vec(1, 6, x.data().to_vec()).unwrap()];
        let checks = grad_check(
            &mut params,
            &analytic,
            |p: &NamedBlocks| Ok(p.mats[0].matmul(&x)?.get(0, 0)),
            DEFAULT_FD_STEP,
        )
        .unwrap();
        assert!(max_rel_err(&checks) <= 1e-10, "{}", max_rel_err(&checks));
    }

    #[test]
    fn perturbed_gradient_fails_the_check() {
        let (mut params, x) = linear_setup();
        let mut grad = Mat::from_vec(1, 6, x.data().to_vec()).unwrap();
        let v = grad.get(0, 2);
        grad.set(0, 2, v + 1e-2);
        let checks = grad_check(
            &mut params,
            &[grad],
            |p: &NamedBlocks| Ok(p.mats[0].matmul(&x)?.get(0, 0)),
            DEFAULT_FD_STEP,
        )
        .unwrap();
        assert!(max_rel_err(&checks) > 1e-4);
    }

    #[test]
    fn parameters_are_restored() {
        let (mut params, x) = linear_setup();
        let before = params.mats[0].clone();
        let analytic = vec![Mat::from_vec(1, 6, x.data().to_vec()).unwrap()];
        grad_check(
            &mut params,
            &analytic,
            |p: &NamedBlocks| Ok(p.mats[0].matmul(&x)?.get(0, 0)),
            DEFAULT_FD_STEP,
        )
        .unwrap();
        assert_eq!(params.mats[0], before);
    }

    #[test]
    fn non_finite_loss_is_an_error() {
        let (mut params, _) = linear_setup();
        let analytic = vec![Mat::zeros(1, 6)];
        let res = grad_check(
            &mut params,
            &analytic,
            |_: &NamedBlocks| Ok(f64::NAN),
            DEFAULT_FD_STEP,
        );
        assert!(res.is_err());
    }
}
