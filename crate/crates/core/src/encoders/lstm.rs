//! The LSTM cell and sequence runner, with hand-derived backward passes.
//!
//! Gate layout follows the standard formulation: with `H = [x_t; h_{t-1}]`,
//!
//! ```text
//! i_t = sigmoid(W_i H + b_i)
//! f_t = sigmoid(W_f H + b_f)
//! o_t = sigmoid(W_o H + b_o)
//! c_t = f_t (.) c_{t-1} + i_t (.) tanh(W_c H + b_c)
//! h_t = o_t (.) tanh(c_t)
//! ```
//!
//! Every weight matrix is `k x (d+k)`, every bias `k x 1`. Forward passes
//! cache the activations needed for backpropagation through time; gradients
//! accumulate additively into [`LstmGrads`].

use crate::error::{Error, Result};
use crate::numcore::{sigmoid, tanh, Mat, ParamBlocks};
use rand::Rng;

#[derive(Clone, Debug)]
pub struct LstmParams {
    pub w_i: Mat,
    pub w_f: Mat,
    pub w_o: Mat,
    pub w_c: Mat,
    pub b_i: Mat,
    pub b_f: Mat,
    pub b_o: Mat,
    pub b_c: Mat,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let (d, k) = (input_dim, hidden_dim);
        LstmParams {
            w_i: Mat::zeros(k, d + k),
            w_f: Mat::zeros(k, d + k),
            w_o: Mat::zeros(k, d + k),
            w_c: Mat::zeros(k, d + k),
            b_i: Mat::zeros(k, 1),
            b_f: Mat::zeros(k, 1),
            b_o: Mat::zeros(k, 1),
            b_c: Mat::zeros(k, 1),
            input_dim: d,
            hidden_dim: k,
        }
    }

    /// Weights uniform in [-0.1, 0.1]; forget-gate bias set to `forget_bias`
    /// (1.0 by default upstream), other biases zero.
    pub fn seeded(
        input_dim: usize,
        hidden_dim: usize,
        forget_bias: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let (d, k) = (input_dim, hidden_dim);
        LstmParams {
            w_i: Mat::uniform(k, d + k, -0.1, 0.1, rng),
            w_f: Mat::uniform(k, d + k, -0.1, 0.1, rng),
            w_o: Mat::uniform(k, d + k, -0.1, 0.1, rng),
            w_c: Mat::uniform(k, d + k, -0.1, 0.1, rng),
            b_i: Mat::zeros(k, 1),
            b_f: Mat::filled(k, 1, forget_bias),
            b_o: Mat::zeros(k, 1),
            b_c: Mat::zeros(k, 1),
            input_dim: d,
            hidden_dim: k,
        }
    }

    pub const BLOCK_SUFFIXES: [&'static str; 8] =
        ["w_i", "w_f", "w_o", "w_c", "b_i", "b_f", "b_o", "b_c"];

    pub fn blocks(&self) -> Vec<&Mat> {
        vec![
            &self.w_i, &self.w_f, &self.w_o, &self.w_c, &self.b_i, &self.b_f, &self.b_o,
            &self.b_c,
        ]
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut Mat> {
        vec![
            &mut self.w_i,
            &mut self.w_f,
            &mut self.w_o,
            &mut self.w_c,
            &mut self.b_i,
            &mut self.b_f,
            &mut self.b_o,
            &mut self.b_c,
        ]
    }
}

impl ParamBlocks for LstmParams {
    fn block_names(&self) -> Vec<String> {
        Self::BLOCK_SUFFIXES.iter().map(|s| s.to_string()).collect()
    }
    fn blocks(&self) -> Vec<&Mat> {
        LstmParams::blocks(self)
    }
    fn blocks_mut(&mut self) -> Vec<&mut Mat> {
        LstmParams::blocks_mut(self)
    }
}

#[derive(Clone, Debug)]
pub struct LstmGrads {
    pub w_i: Mat,
    pub w_f: Mat,
    pub w_o: Mat,
    pub w_c: Mat,
    pub b_i: Mat,
    pub b_f: Mat,
    pub b_o: Mat,
    pub b_c: Mat,
}

impl LstmGrads {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let (d, k) = (input_dim, hidden_dim);
        LstmGrads {
            w_i: Mat::zeros(k, d + k),
            w_f: Mat::zeros(k, d + k),
            w_o: Mat::zeros(k, d + k),
            w_c: Mat::zeros(k, d + k),
            b_i: Mat::zeros(k, 1),
            b_f: Mat::zeros(k, 1),
            b_o: Mat::zeros(k, 1),
            b_c: Mat::zeros(k, 1),
        }
    }

    pub fn blocks(&self) -> Vec<&Mat> {
        vec![
            &self.w_i, &self.w_f, &self.w_o, &self.w_c, &self.b_i, &self.b_f, &self.b_o,
            &self.b_c,
        ]
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut Mat> {
        vec![
            &mut self.w_i,
            &mut self.w_f,
            &mut self.w_o,
            &mut self.w_c,
            &mut self.b_i,
            &mut self.b_f,
            &mut self.b_o,
            &mut self.b_c,
        ]
    }
}

/// Output vector `h` and memory `c`, both `k x 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub h: Mat,
    pub c: Mat,
}

impl LstmState {
    pub fn zeros(hidden_dim: usize) -> Self {
        LstmState {
            h: Mat::zeros(hidden_dim, 1),
            c: Mat::zeros(hidden_dim, 1),
        }
    }
}

/// Activations cached by one cell application for the backward pass.
#[derive(Clone, Debug)]
pub struct CellCache {
    joint: Mat,  // [x; h_prev]
    c_prev: Mat,
    i: Mat,
    f: Mat,
    o: Mat,
    g: Mat,  // tanh(W_c H + b_c)
    tc: Mat, // tanh(c_t)
}

/// One LSTM step; returns the next state and the BPTT cache.
pub fn lstm_cell(x: &Mat, prev: &LstmState, p: &LstmParams) -> Result<(LstmState, CellCache)> {
    if x.rows() != p.input_dim || x.cols() != 1 {
        return Err(Error::Dim(format!(
            "lstm_cell input {}x{}, expected {}x1",
            x.rows(),
            x.cols(),
            p.input_dim
        )));
    }
    if prev.h.rows() != p.hidden_dim || prev.c.rows() != p.hidden_dim {
        return Err(Error::Dim(format!(
            "lstm_cell state {}x1, expected {}x1",
            prev.h.rows(),
            p.hidden_dim
        )));
    }
    let joint = Mat::vconcat(x, &prev.h)?;
    let i = sigmoid(&p.w_i.matmul(&joint)?.add(&p.b_i)?);
    let f = sigmoid(&p.w_f.matmul(&joint)?.add(&p.b_f)?);
    let o = sigmoid(&p.w_o.matmul(&joint)?.add(&p.b_o)?);
    let g = tanh(&p.w_c.matmul(&joint)?.add(&p.b_c)?);
    let c = f.hadamard(&prev.c)?.add(&i.hadamard(&g)?)?;
    let tc = tanh(&c);
    let h = o.hadamard(&tc)?;
    Ok((
        LstmState { h, c: c.clone() },
        CellCache {
            joint,
            c_prev: prev.c.clone(),
            i,
            f,
            o,
            g,
            tc,
        },
    ))
}

/// Backward through one cell. `dh`/`dc_in` are the gradients arriving at
/// this step's outputs; returns gradients for the input and previous state
/// and accumulates parameter gradients into `grads`.
pub fn lstm_cell_backward(
    cache: &CellCache,
    p: &LstmParams,
    dh: &Mat,
    dc_in: &Mat,
    grads: &mut LstmGrads,
) -> Result<(Mat, Mat, Mat)> {
    let d_o = dh.hadamard(&cache.tc)?;
    // dc = dc_in + dh (.) o (.) (1 - tanh(c)^2)
    let dtc = dh.hadamard(&cache.o)?;
    let dc = dc_in.add(&dtc.hadamard(&cache.tc.map(|t| 1.0 - t * t))?)?;

    let d_f = dc.hadamard(&cache.c_prev)?;
    let d_i = dc.hadamard(&cache.g)?;
    let d_g = dc.hadamard(&cache.i)?;
    let dc_prev = dc.hadamard(&cache.f)?;

    let da_i = d_i.hadamard(&cache.i.map(|v| v * (1.0 - v)))?;
    let da_f = d_f.hadamard(&cache.f.map(|v| v * (1.0 - v)))?;
    let da_o = d_o.hadamard(&cache.o.map(|v| v * (1.0 - v)))?;
    let da_g = d_g.hadamard(&cache.g.map(|v| 1.0 - v * v))?;

    grads.w_i.add_outer(&da_i, &cache.joint)?;
    grads.w_f.add_outer(&da_f, &cache.joint)?;
    grads.w_o.add_outer(&da_o, &cache.joint)?;
    grads.w_c.add_outer(&da_g, &cache.joint)?;
    grads.b_i.add_assign(&da_i)?;
    grads.b_f.add_assign(&da_f)?;
    grads.b_o.add_assign(&da_o)?;
    grads.b_c.add_assign(&da_g)?;

    let mut djoint = p.w_i.t_matmul(&da_i)?;
    djoint.add_assign(&p.w_f.t_matmul(&da_f)?)?;
    djoint.add_assign(&p.w_o.t_matmul(&da_o)?)?;
    djoint.add_assign(&p.w_c.t_matmul(&da_g)?)?;
    let (dx, dh_prev) = djoint.split_rows(p.input_dim)?;
    Ok((dx, dh_prev, dc_prev))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Reversed,
}

/// Forward fold over a sequence with all intermediate states retained.
#[derive(Clone, Debug)]
pub struct LstmTrace {
    pub states: Vec<LstmState>, // consumption order
    caches: Vec<CellCache>,
    pub final_state: LstmState,
    pub direction: Direction,
}

/// Runs the cell over `xs`; `Reversed` consumes the sequence back to front.
pub fn run_lstm(
    xs: &[Mat],
    start: &LstmState,
    p: &LstmParams,
    direction: Direction,
) -> Result<LstmTrace> {
    if xs.is_empty() {
        return Err(Error::Empty("lstm input sequence".into()));
    }
    let mut states = Vec::with_capacity(xs.len());
    let mut caches = Vec::with_capacity(xs.len());
    let mut state = start.clone();
    let order: Box<dyn Iterator<Item = &Mat>> = match direction {
        Direction::Forward => Box::new(xs.iter()),
        Direction::Reversed => Box::new(xs.iter().rev()),
    };
    for x in order {
        let (next, cache) = lstm_cell(x, &state, p)?;
        states.push(next.clone());
        caches.push(cache);
        state = next;
    }
    Ok(LstmTrace {
        states,
        caches,
        final_state: state,
        direction,
    })
}

/// BPTT over a trace. `d_final_h` / `d_final_c` are the gradients arriving
/// at the final state. Returns per-input gradients in the ORIGINAL `xs`
/// order plus the gradient with respect to the start state.
pub fn run_lstm_backward(
    trace: &LstmTrace,
    p: &LstmParams,
    d_final_h: &Mat,
    d_final_c: &Mat,
    grads: &mut LstmGrads,
) -> Result<(Vec<Mat>, LstmState)> {
    let mut dh = d_final_h.clone();
    let mut dc = d_final_c.clone();
    let mut dxs = Vec::with_capacity(trace.caches.len());
    for cache in trace.caches.iter().rev() {
        let (dx, dh_prev, dc_prev) = lstm_cell_backward(cache, p, &dh, &dc, grads)?;
        dxs.push(dx);
        dh = dh_prev;
        dc = dc_prev;
    }
    // reverse consumption order == original order for a reversed run
    if trace.direction == Direction::Forward {
        dxs.reverse();
    }
    Ok((dxs, LstmState { h: dh, c: dc }))
}
