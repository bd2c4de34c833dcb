//! Adam optimizer over an ordered list of parameter blocks.

use super::mat::Mat;
use crate::error::{Error, Result};

/// Per-parameter first/second moment state plus the step counter.
///
/// Blocks are identified by position; callers must pass parameters and
/// gradients in the same order on every step.
#[derive(Clone, Debug)]
pub struct AdamState {
    m: Vec<Mat>,
    v: Vec<Mat>,
    t: u64,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &[&Mat], alpha: f64) -> Self {
        AdamState {
            m: params.iter().map(|p| Mat::zeros(p.rows(), p.cols())).collect(),
            v: params.iter().map(|p| Mat::zeros(p.rows(), p.cols())).collect(),
            t: 0,
            alpha,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One bias-corrected Adam update applied in place.
    pub fn step(&mut self, params: &mut [&mut Mat], grads: &[&Mat]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Dim(format!(
                "adam: {} blocks in state, {} params, {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (b, param) in params.iter_mut().enumerate() {
            let g = grads[b];
            if !param.same_shape(g) || !param.same_shape(&self.m[b]) {
                return Err(Error::Dim(format!(
                    "adam block {b}: param {}x{}, grad {}x{}",
                    param.rows(),
                    param.cols(),
                    g.rows(),
                    g.cols()
                )));
            }
            let m = self.m[b].data_mut();
            let v = self.v[b].data_mut();
            let p = param.data_mut();
            for i in 0..p.len() {
                let gi = g.data()[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= self.alpha * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
