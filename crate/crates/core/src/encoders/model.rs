//! The five model variants plus the bag-of-word-vectors baseline.
//!
//! * `TweetOnly` — single LSTM over the tweet, target ignored.
//! * `Concat` — target and tweet encoded independently; the head projects
//!   both final outputs with separate weight matrices.
//! * `TweetCondTar` — target encoded first, tweet LSTM starts from the
//!   target's final memory cell (hidden output reset to zero).
//! * `TarCondTweet` — the mirror image: tweet first, target conditioned on
//!   it, classification from the target encoder's final output.
//! * `BiCond` — forward and reversed target encoders seed forward and
//!   reversed tweet encoders; the head reads both final tweet outputs.
//! * `Bowv` — mean word vectors of tweet and target concatenated, softmax
//!   regression with an L2 penalty on the weights.
//!
//! All heads end in a softmax; LSTM heads squash the projection with tanh
//! first. The conditional handoff carries the memory cell `c` and resets the
//! output `h` (optionally carried too via `carry_hidden`).

use super::lstm::{
    run_lstm, run_lstm_backward, Direction, LstmGrads, LstmParams, LstmState, LstmTrace,
};
use crate::embed::{lookup, EmbeddingSet, Sharing};
use crate::error::{Error, Result};
use crate::numcore::{cross_entropy, dropout_mask, softmax, Mat, ParamBlocks};
use crate::textprep::{encode, tokenize, Vocab, UNK};
use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    TweetOnly,
    Concat,
    TarCondTweet,
    TweetCondTar,
    BiCond,
    Bowv,
}

pub const ALL_VARIANTS: [Variant; 6] = [
    Variant::TweetOnly,
    Variant::Concat,
    Variant::TarCondTweet,
    Variant::TweetCondTar,
    Variant::BiCond,
    Variant::Bowv,
];

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::TweetOnly => "TweetOnly",
            Variant::Concat => "Concat",
            Variant::TarCondTweet => "TarCondTweet",
            Variant::TweetCondTar => "TweetCondTar",
            Variant::BiCond => "BiCond",
            Variant::Bowv => "BoWV",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "TweetOnly" => Ok(Variant::TweetOnly),
            "Concat" => Ok(Variant::Concat),
            "TarCondTweet" => Ok(Variant::TarCondTweet),
            "TweetCondTar" => Ok(Variant::TweetCondTar),
            "BiCond" => Ok(Variant::BiCond),
            "BoWV" | "Bowv" | "BOWV" => Ok(Variant::Bowv),
            other => Err(Error::InvalidParam(format!("unknown variant {other:?}"))),
        }
    }

    /// LSTM roles in declaration order.
    pub fn lstm_roles(&self) -> &'static [&'static str] {
        match self {
            Variant::TweetOnly => &["tweet"],
            Variant::Concat => &["target", "tweet"],
            Variant::TweetCondTar => &["target", "tweet"],
            Variant::TarCondTweet => &["tweet", "target"],
            Variant::BiCond => &["target_fwd", "target_rev", "tweet_fwd", "tweet_rev"],
            Variant::Bowv => &[],
        }
    }

    fn head_input_dim(&self, hidden_dim: usize, input_dim: usize) -> usize {
        match self {
            Variant::TweetOnly | Variant::TarCondTweet | Variant::TweetCondTar => hidden_dim,
            Variant::Concat => hidden_dim, // two separate k-dim inputs
            Variant::BiCond => 2 * hidden_dim,
            Variant::Bowv => 2 * input_dim,
        }
    }
}

/// Index sequences for one example. Target tokens come first in the paper's
/// `x_1..x_T` / `x_{T+1}..x_N` layout; both halves are non-empty.
#[derive(Clone, Debug)]
pub struct EncodedPair {
    pub target: Vec<usize>,
    pub tweet: Vec<usize>,
}

impl EncodedPair {
    pub fn new(target: Vec<usize>, tweet: Vec<usize>) -> Result<Self> {
        if target.is_empty() || tweet.is_empty() {
            return Err(Error::Empty(
                "encoded pair requires at least one target and one tweet token".into(),
            ));
        }
        Ok(EncodedPair { target, tweet })
    }
}

#[derive(Clone, Debug)]
pub enum HeadParams {
    Single { w: Mat, b: Option<Mat> },
    Pair {
        w_target: Mat,
        w_tweet: Mat,
        b: Option<Mat>,
    },
}

impl HeadParams {
    fn block_names(&self) -> Vec<String> {
        match self {
            HeadParams::Single { b, .. } => {
                let mut names = vec!["head.w".to_string()];
                if b.is_some() {
                    names.push("head.b".to_string());
                }
                names
            }
            HeadParams::Pair { b, .. } => {
                let mut names = vec!["head.w_target".to_string(), "head.w_tweet".to_string()];
                if b.is_some() {
                    names.push("head.b".to_string());
                }
                names
            }
        }
    }

    fn blocks(&self) -> Vec<&Mat> {
        match self {
            HeadParams::Single { w, b } => {
                let mut v = vec![w];
                if let Some(b) = b {
                    v.push(b);
                }
                v
            }
            HeadParams::Pair { w_target, w_tweet, b } => {
                let mut v = vec![w_target, w_tweet];
                if let Some(b) = b {
                    v.push(b);
                }
                v
            }
        }
    }

    fn blocks_mut(&mut self) -> Vec<&mut Mat> {
        match self {
            HeadParams::Single { w, b } => {
                let mut v = vec![w];
                if let Some(b) = b {
                    v.push(b);
                }
                v
            }
            HeadParams::Pair { w_target, w_tweet, b } => {
                let mut v = vec![w_target, w_tweet];
                if let Some(b) = b {
                    v.push(b);
                }
                v
            }
        }
    }
}

#[derive(Clone, Debug)]
pub enum HeadGrads {
    Single { w: Mat, b: Option<Mat> },
    Pair {
        w_target: Mat,
        w_tweet: Mat,
        b: Option<Mat>,
    },
}

impl HeadGrads {
    fn zeros_like(head: &HeadParams) -> Self {
        match head {
            HeadParams::Single { w, b } => HeadGrads::Single {
                w: Mat::zeros(w.rows(), w.cols()),
                b: b.as_ref().map(|b| Mat::zeros(b.rows(), b.cols())),
            },
            HeadParams::Pair { w_target, w_tweet, b } => HeadGrads::Pair {
                w_target: Mat::zeros(w_target.rows(), w_target.cols()),
                w_tweet: Mat::zeros(w_tweet.rows(), w_tweet.cols()),
                b: b.as_ref().map(|b| Mat::zeros(b.rows(), b.cols())),
            },
        }
    }

    fn blocks(&self) -> Vec<&Mat> {
        match self {
            HeadGrads::Single { w, b } => {
                let mut v = vec![w];
                if let Some(b) = b {
                    v.push(b);
                }
                v
            }
            HeadGrads::Pair { w_target, w_tweet, b } => {
                let mut v = vec![w_target, w_tweet];
                if let Some(b) = b {
                    v.push(b);
                }
                v
            }
        }
    }

    fn blocks_mut(&mut self) -> Vec<&mut Mat> {
        match self {
            HeadGrads::Single { w, b } => {
                let mut v = vec![w];
                if let Some(b) = b {
                    v.push(b);
                }
                v
            }
            HeadGrads::Pair { w_target, w_tweet, b } => {
                let mut v = vec![w_target, w_tweet];
                if let Some(b) = b {
                    v.push(b);
                }
                v
            }
        }
    }
}

/// Architecture settings needed to build a model.
#[derive(Clone, Debug)]
pub struct ModelInit {
    pub variant: Variant,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub head_bias: bool,
    pub carry_hidden: bool,
    pub forget_bias: f64,
    pub l2: f64,
}

/// A complete classifier: vocabulary, embeddings, encoders and head.
#[derive(Clone, Debug)]
pub struct Model {
    pub variant: Variant,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub head_bias: bool,
    pub carry_hidden: bool,
    pub l2: f64,
    pub vocab: Vocab,
    pub embeddings: EmbeddingSet,
    pub lstms: Vec<LstmParams>,
    pub head: HeadParams,
}

pub fn init_model(
    init: &ModelInit,
    vocab: Vocab,
    embeddings: EmbeddingSet,
    rng: &mut impl Rng,
) -> Result<Model> {
    if embeddings.dim() != init.input_dim {
        return Err(Error::Dim(format!(
            "embedding dim {} but input_dim {}",
            embeddings.dim(),
            init.input_dim
        )));
    }
    if embeddings.tweet.vocab_size() != vocab.len()
        || embeddings.target_table().vocab_size() != vocab.len()
    {
        return Err(Error::Dim(format!(
            "embedding rows {} but vocab size {}",
            embeddings.tweet.vocab_size(),
            vocab.len()
        )));
    }
    let (d, k) = (init.input_dim, init.hidden_dim);
    let lstms: Vec<LstmParams> = init
        .variant
        .lstm_roles()
        .iter()
        .map(|_| LstmParams::seeded(d, k, init.forget_bias, rng))
        .collect();
    let m = init.variant.head_input_dim(k, d);
    let bias = init.head_bias.then(|| Mat::zeros(3, 1));
    let head = match init.variant {
        Variant::Concat => HeadParams::Pair {
            w_target: Mat::uniform(3, k, -0.1, 0.1, rng),
            w_tweet: Mat::uniform(3, k, -0.1, 0.1, rng),
            b: bias,
        },
        _ => HeadParams::Single {
            w: Mat::uniform(3, m, -0.1, 0.1, rng),
            b: bias,
        },
    };
    Ok(Model {
        variant: init.variant,
        input_dim: d,
        hidden_dim: k,
        head_bias: init.head_bias,
        carry_hidden: init.carry_hidden,
        l2: init.l2,
        vocab,
        embeddings,
        lstms,
        head,
    })
}

/// Dropout masks for one example: one mask per input token plus the
/// pre-projection mask(s). Fixed masks keep train-mode passes deterministic
/// and replayable in the backward pass.
#[derive(Clone, Debug)]
pub struct DropoutMasks {
    pub target_inputs: Vec<Mat>,
    pub tweet_inputs: Vec<Mat>,
    pub head: HeadMask,
}

#[derive(Clone, Debug)]
pub enum HeadMask {
    Single(Mat),
    Pair(Mat, Mat), // target mask, tweet mask
}

/// The pre-projection representation, masked, plus its LSTM traces.
pub struct ForwardPass {
    pub probs: Vec<f64>,
    z: Vec<f64>,
    traces: Vec<LstmTrace>,
    rep_masked: Rep,
}

enum Rep {
    Single(Mat),
    Pair { target: Mat, tweet: Mat },
}

impl Model {
    /// Tokenizes and encodes raw strings against this model's vocabulary.
    /// Sequences left empty by filtering fall back to a single UNK token so
    /// the pair invariants hold for any input text.
    pub fn encode_instance(&self, target: &str, tweet: &str) -> EncodedPair {
        let mut t = encode(&tokenize(target), &self.vocab);
        let mut w = encode(&tokenize(tweet), &self.vocab);
        if t.is_empty() {
            t.push(UNK);
        }
        if w.is_empty() {
            w.push(UNK);
        }
        EncodedPair { target: t, tweet: w }
    }

    pub fn sample_masks(
        &self,
        pair: &EncodedPair,
        rate: f64,
        rng: &mut impl Rng,
    ) -> Result<DropoutMasks> {
        let d = self.input_dim;
        let target_inputs = (0..pair.target.len())
            .map(|_| dropout_mask(d, 1, rate, rng))
            .collect::<Result<Vec<_>>>()?;
        let tweet_inputs = (0..pair.tweet.len())
            .map(|_| dropout_mask(d, 1, rate, rng))
            .collect::<Result<Vec<_>>>()?;
        let head = match self.variant {
            Variant::Concat => HeadMask::Pair(
                dropout_mask(self.hidden_dim, 1, rate, rng)?,
                dropout_mask(self.hidden_dim, 1, rate, rng)?,
            ),
            v => HeadMask::Single(dropout_mask(
                v.head_input_dim(self.hidden_dim, self.input_dim),
                1,
                rate,
                rng,
            )?),
        };
        Ok(DropoutMasks {
            target_inputs,
            tweet_inputs,
            head,
        })
    }

    fn input_vectors(
        &self,
        pair: &EncodedPair,
        masks: Option<&DropoutMasks>,
    ) -> Result<(Vec<Mat>, Vec<Mat>)> {
        let mut target_xs = lookup(self.embeddings.target_table(), &pair.target)?;
        let mut tweet_xs = lookup(self.embeddings.tweet_table(), &pair.tweet)?;
        if let Some(m) = masks {
            for (x, mask) in target_xs.iter_mut().zip(&m.target_inputs) {
                *x = x.hadamard(mask)?;
            }
            for (x, mask) in tweet_xs.iter_mut().zip(&m.tweet_inputs) {
                *x = x.hadamard(mask)?;
            }
        }
        Ok((target_xs, tweet_xs))
    }

    pub fn forward(&self, pair: &EncodedPair, masks: Option<&DropoutMasks>) -> Result<ForwardPass> {
        let (target_xs, tweet_xs) = self.input_vectors(pair, masks)?;
        let k = self.hidden_dim;
        let zeros = LstmState::zeros(k);

        let (traces, rep) = match self.variant {
            Variant::TweetOnly => {
                let t = run_lstm(&tweet_xs, &zeros, &self.lstms[0], Direction::Forward)?;
                let rep = t.final_state.h.clone();
                (vec![t], Rep::Single(rep))
            }
            Variant::Concat => {
                let ta = run_lstm(&target_xs, &zeros, &self.lstms[0], Direction::Forward)?;
                let tw = run_lstm(&tweet_xs, &zeros, &self.lstms[1], Direction::Forward)?;
                let rep = Rep::Pair {
                    target: ta.final_state.h.clone(),
                    tweet: tw.final_state.h.clone(),
                };
                (vec![ta, tw], rep)
            }
            Variant::TweetCondTar | Variant::TarCondTweet => {
                let (first_xs, second_xs) = if self.variant == Variant::TweetCondTar {
                    (&target_xs, &tweet_xs)
                } else {
                    (&tweet_xs, &target_xs)
                };
                let first = run_lstm(first_xs, &zeros, &self.lstms[0], Direction::Forward)?;
                let handoff = LstmState {
                    h: if self.carry_hidden {
                        first.final_state.h.clone()
                    } else {
                        Mat::zeros(k, 1)
                    },
                    c: first.final_state.c.clone(),
                };
                let second = run_lstm(second_xs, &handoff, &self.lstms[1], Direction::Forward)?;
                let rep = second.final_state.h.clone();
                (vec![first, second], Rep::Single(rep))
            }
            Variant::BiCond => {
                let ta_f = run_lstm(&target_xs, &zeros, &self.lstms[0], Direction::Forward)?;
                let ta_r = run_lstm(&target_xs, &zeros, &self.lstms[1], Direction::Reversed)?;
                let start_f = LstmState {
                    h: if self.carry_hidden {
                        ta_f.final_state.h.clone()
                    } else {
                        Mat::zeros(k, 1)
                    },
                    c: ta_f.final_state.c.clone(),
                };
                let start_r = LstmState {
                    h: if self.carry_hidden {
                        ta_r.final_state.h.clone()
                    } else {
                        Mat::zeros(k, 1)
                    },
                    c: ta_r.final_state.c.clone(),
                };
                let tw_f = run_lstm(&tweet_xs, &start_f, &self.lstms[2], Direction::Forward)?;
                let tw_r = run_lstm(&tweet_xs, &start_r, &self.lstms[3], Direction::Reversed)?;
                let rep = Mat::vconcat(&tw_f.final_state.h, &tw_r.final_state.h)?;
                (vec![ta_f, ta_r, tw_f, tw_r], Rep::Single(rep))
            }
            Variant::Bowv => {
                let rep = Mat::vconcat(&mean_vec(&tweet_xs)?, &mean_vec(&target_xs)?)?;
                (Vec::new(), Rep::Single(rep))
            }
        };

        let rep_masked = apply_head_mask(rep, masks)?;
        let (z, probs) = self.apply_head(&rep_masked)?;
        Ok(ForwardPass {
            probs,
            z,
            traces,
            rep_masked,
        })
    }

    fn apply_head(&self, rep: &Rep) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut a = match (&self.head, rep) {
            (HeadParams::Single { w, .. }, Rep::Single(r)) => w.matmul(r)?,
            (HeadParams::Pair { w_target, w_tweet, .. }, Rep::Pair { target, tweet }) => {
                w_target.matmul(target)?.add(&w_tweet.matmul(tweet)?)?
            }
            _ => return Err(Error::Dim("head/representation kind mismatch".into())),
        };
        if let Some(b) = head_bias(&self.head) {
            a = a.add(b)?;
        }
        let z: Vec<f64> = if self.variant == Variant::Bowv {
            a.data().to_vec()
        } else {
            a.data().iter().map(|v| v.tanh()).collect()
        };
        let probs = softmax(&z);
        Ok((z, probs))
    }

    /// Cross-entropy of the gold class (plus the L2 weight penalty for the
    /// bag-of-vectors head). Pure for fixed inputs and masks.
    pub fn example_loss(
        &self,
        pair: &EncodedPair,
        gold: usize,
        masks: Option<&DropoutMasks>,
    ) -> Result<f64> {
        let fwd = self.forward(pair, masks)?;
        let mut loss = cross_entropy(&fwd.probs, gold);
        if self.variant == Variant::Bowv {
            if let HeadParams::Single { w, .. } = &self.head {
                loss += self.l2 * w.frobenius_sq();
            }
        }
        Ok(loss)
    }

    /// Backpropagates one example, accumulating into `grads`. The same
    /// masks passed to `forward` must be supplied here.
    pub fn backward(
        &self,
        pair: &EncodedPair,
        fwd: &ForwardPass,
        masks: Option<&DropoutMasks>,
        gold: usize,
        grads: &mut ModelGrads,
    ) -> Result<()> {
        // softmax + cross-entropy shortcut, then through the tanh
        let mut dz = Mat::col(&fwd.probs);
        dz.data_mut()[gold] -= 1.0;
        let da = if self.variant == Variant::Bowv {
            dz
        } else {
            let one_minus_z2 = Mat::col(&fwd.z).map(|v| 1.0 - v * v);
            dz.hadamard(&one_minus_z2)?
        };

        // head gradients and gradient of the masked representation
        let drep_masked = match (&self.head, &mut grads.head, &fwd.rep_masked) {
            (HeadParams::Single { w, .. }, HeadGrads::Single { w: gw, b: gb }, Rep::Single(r)) => {
                gw.add_outer(&da, r)?;
                if let Some(gb) = gb {
                    gb.add_assign(&da)?;
                }
                if self.variant == Variant::Bowv && self.l2 != 0.0 {
                    gw.add_assign(&w.scale(2.0 * self.l2))?;
                }
                Rep::Single(w.t_matmul(&da)?)
            }
            (
                HeadParams::Pair { w_target, w_tweet, .. },
                HeadGrads::Pair {
                    w_target: gwt,
                    w_tweet: gww,
                    b: gb,
                },
                Rep::Pair { target, tweet },
            ) => {
                gwt.add_outer(&da, target)?;
                gww.add_outer(&da, tweet)?;
                if let Some(gb) = gb {
                    gb.add_assign(&da)?;
                }
                Rep::Pair {
                    target: w_target.t_matmul(&da)?,
                    tweet: w_tweet.t_matmul(&da)?,
                }
            }
            _ => return Err(Error::Dim("head/gradient kind mismatch".into())),
        };

        // undo the pre-projection mask
        let drep = unmask_rep(drep_masked, masks)?;

        let k = self.hidden_dim;
        let zero_k = Mat::zeros(k, 1);
        let mut d_target_xs: Vec<Mat>;
        let mut d_tweet_xs: Vec<Mat>;

        match self.variant {
            Variant::TweetOnly => {
                let dh = rep_single(&drep)?;
                let (dxs, _) = run_lstm_backward(
                    &fwd.traces[0],
                    &self.lstms[0],
                    dh,
                    &zero_k,
                    &mut grads.lstms[0],
                )?;
                d_tweet_xs = dxs;
                d_target_xs = zero_grads_like(pair.target.len(), self.input_dim);
            }
            Variant::Concat => {
                let (dh_ta, dh_tw) = rep_pair(&drep)?;
                let (dxs_ta, _) = run_lstm_backward(
                    &fwd.traces[0],
                    &self.lstms[0],
                    dh_ta,
                    &zero_k,
                    &mut grads.lstms[0],
                )?;
                let (dxs_tw, _) = run_lstm_backward(
                    &fwd.traces[1],
                    &self.lstms[1],
                    dh_tw,
                    &zero_k,
                    &mut grads.lstms[1],
                )?;
                d_target_xs = dxs_ta;
                d_tweet_xs = dxs_tw;
            }
            Variant::TweetCondTar | Variant::TarCondTweet => {
                let dh = rep_single(&drep)?;
                let (dxs_second, d_start) = run_lstm_backward(
                    &fwd.traces[1],
                    &self.lstms[1],
                    dh,
                    &zero_k,
                    &mut grads.lstms[1],
                )?;
                // the handoff carried c (and optionally h)
                let dh_final = if self.carry_hidden { &d_start.h } else { &zero_k };
                let (dxs_first, _) = run_lstm_backward(
                    &fwd.traces[0],
                    &self.lstms[0],
                    dh_final,
                    &d_start.c,
                    &mut grads.lstms[0],
                )?;
                if self.variant == Variant::TweetCondTar {
                    d_target_xs = dxs_first;
                    d_tweet_xs = dxs_second;
                } else {
                    d_tweet_xs = dxs_first;
                    d_target_xs = dxs_second;
                }
            }
            Variant::BiCond => {
                let dh_cat = rep_single(&drep)?;
                let (dh_f, dh_r) = dh_cat.split_rows(k)?;
                let (dxs_tw_f, d_start_f) = run_lstm_backward(
                    &fwd.traces[2],
                    &self.lstms[2],
                    &dh_f,
                    &zero_k,
                    &mut grads.lstms[2],
                )?;
                let (dxs_tw_r, d_start_r) = run_lstm_backward(
                    &fwd.traces[3],
                    &self.lstms[3],
                    &dh_r,
                    &zero_k,
                    &mut grads.lstms[3],
                )?;

                let dh_ta_f = if self.carry_hidden { &d_start_f.h } else { &zero_k };
                let dh_ta_r = if self.carry_hidden { &d_start_r.h } else { &zero_k };
                let (dxs_ta_f, _) = run_lstm_backward(
                    &fwd.traces[0],
                    &self.lstms[0],
                    dh_ta_f,
                    &d_start_f.c,
                    &mut grads.lstms[0],
                )?;
                let (dxs_ta_r, _) = run_lstm_backward(
                    &fwd.traces[1],
                    &self.lstms[1],
                    dh_ta_r,
                    &d_start_r.c,
                    &mut grads.lstms[1],
                )?;

                d_target_xs = sum_vecs(dxs_ta_f, dxs_ta_r)?;
                d_tweet_xs = sum_vecs(dxs_tw_f, dxs_tw_r)?;
            }
            Variant::Bowv => {
                let dfeat = rep_single(&drep)?;
                let (dmean_tweet, dmean_target) = dfeat.split_rows(self.input_dim)?;
                let tw_scale = 1.0 / pair.tweet.len() as f64;
                let ta_scale = 1.0 / pair.target.len() as f64;
                d_tweet_xs = (0..pair.tweet.len())
                    .map(|_| dmean_tweet.scale(tw_scale))
                    .collect();
                d_target_xs = (0..pair.target.len())
                    .map(|_| dmean_target.scale(ta_scale))
                    .collect();
            }
        }

        // undo input masks, then scatter into embedding gradients
        if let Some(m) = masks {
            for (dx, mask) in d_target_xs.iter_mut().zip(&m.target_inputs) {
                *dx = dx.hadamard(mask)?;
            }
            for (dx, mask) in d_tweet_xs.iter_mut().zip(&m.tweet_inputs) {
                *dx = dx.hadamard(mask)?;
            }
        }

        let sep = self.embeddings.sharing == Sharing::Sep;
        if let Some(gt) = grads.emb_target.as_mut() {
            scatter_rows(gt, &pair.target, &d_target_xs)?;
        } else if !sep {
            if let Some(gw) = grads.emb_tweet.as_mut() {
                scatter_rows(gw, &pair.target, &d_target_xs)?;
            }
        }
        if let Some(gw) = grads.emb_tweet.as_mut() {
            scatter_rows(gw, &pair.tweet, &d_tweet_xs)?;
        }
        Ok(())
    }

    /// Forward + backward + loss in one call (train-mode workhorse).
    pub fn loss_and_grad(
        &self,
        pair: &EncodedPair,
        gold: usize,
        masks: Option<&DropoutMasks>,
        grads: &mut ModelGrads,
    ) -> Result<(f64, Vec<f64>)> {
        let fwd = self.forward(pair, masks)?;
        let mut loss = cross_entropy(&fwd.probs, gold);
        if self.variant == Variant::Bowv {
            if let HeadParams::Single { w, .. } = &self.head {
                loss += self.l2 * w.frobenius_sq();
            }
        }
        self.backward(pair, &fwd, masks, gold, grads)?;
        Ok((loss, fwd.probs))
    }

    /// Eval-mode class probabilities.
    pub fn predict_probs(&self, pair: &EncodedPair) -> Result<Vec<f64>> {
        Ok(self.forward(pair, None)?.probs)
    }

    fn emb_trainable(&self) -> (bool, bool) {
        // (tweet table, sep target table)
        let tweet = self.embeddings.tweet.trainable;
        let target = self
            .embeddings
            .target
            .as_ref()
            .map(|t| t.trainable)
            .unwrap_or(false);
        (tweet, target)
    }
}

impl ParamBlocks for Model {
    fn block_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (role, _) in self.variant.lstm_roles().iter().zip(&self.lstms) {
            for suffix in LstmParams::BLOCK_SUFFIXES {
                names.push(format!("{role}.{suffix}"));
            }
        }
        names.extend(self.head.block_names());
        let (tweet_tr, target_tr) = self.emb_trainable();
        match self.embeddings.sharing {
            Sharing::Sing => {
                if tweet_tr {
                    names.push("emb".to_string());
                }
            }
            Sharing::Sep => {
                if target_tr {
                    names.push("emb_target".to_string());
                }
                if tweet_tr {
                    names.push("emb_tweet".to_string());
                }
            }
        }
        names
    }

    fn blocks(&self) -> Vec<&Mat> {
        let mut blocks = Vec::new();
        for lstm in &self.lstms {
            blocks.extend(lstm.blocks());
        }
        blocks.extend(self.head.blocks());
        let (tweet_tr, target_tr) = self.emb_trainable();
        if self.embeddings.sharing == Sharing::Sep {
            if target_tr {
                blocks.push(&self.embeddings.target.as_ref().unwrap().vectors);
            }
            if tweet_tr {
                blocks.push(&self.embeddings.tweet.vectors);
            }
        } else if tweet_tr {
            blocks.push(&self.embeddings.tweet.vectors);
        }
        blocks
    }

    fn blocks_mut(&mut self) -> Vec<&mut Mat> {
        let sep = self.embeddings.sharing == Sharing::Sep;
        let (tweet_tr, target_tr) = self.emb_trainable();
        let mut blocks = Vec::new();
        for lstm in &mut self.lstms {
            blocks.extend(lstm.blocks_mut());
        }
        blocks.extend(self.head.blocks_mut());
        if sep {
            if target_tr {
                blocks.push(&mut self.embeddings.target.as_mut().unwrap().vectors);
            }
            if tweet_tr {
                blocks.push(&mut self.embeddings.tweet.vectors);
            }
        } else if tweet_tr {
            blocks.push(&mut self.embeddings.tweet.vectors);
        }
        blocks
    }
}

/// Gradient buffers aligned block-for-block with the model's trainable
/// parameters.
#[derive(Clone, Debug)]
pub struct ModelGrads {
    pub lstms: Vec<LstmGrads>,
    pub head: HeadGrads,
    pub emb_target: Option<Mat>,
    pub emb_tweet: Option<Mat>,
}

impl ModelGrads {
    pub fn zeros_like(model: &Model) -> Self {
        let lstms = model
            .lstms
            .iter()
            .map(|p| LstmGrads::zeros(p.input_dim, p.hidden_dim))
            .collect();
        let (tweet_tr, target_tr) = model.emb_trainable();
        let emb_tweet = tweet_tr.then(|| {
            Mat::zeros(
                model.embeddings.tweet.vocab_size(),
                model.embeddings.tweet.dim,
            )
        });
        let emb_target = (model.embeddings.sharing == Sharing::Sep && target_tr).then(|| {
            let t = model.embeddings.target.as_ref().unwrap();
            Mat::zeros(t.vocab_size(), t.dim)
        });
        ModelGrads {
            lstms,
            head: HeadGrads::zeros_like(&model.head),
            emb_target,
            emb_tweet,
        }
    }

    pub fn zero(&mut self) {
        for lstm in &mut self.lstms {
            for b in lstm.blocks_mut() {
                b.fill(0.0);
            }
        }
        for b in self.head.blocks_mut() {
            b.fill(0.0);
        }
        if let Some(m) = self.emb_target.as_mut() {
            m.fill(0.0);
        }
        if let Some(m) = self.emb_tweet.as_mut() {
            m.fill(0.0);
        }
    }

    pub fn scale_assign(&mut self, s: f64) {
        for b in self.blocks_mut() {
            b.scale_assign(s);
        }
    }

    pub fn blocks(&self) -> Vec<&Mat> {
        let mut blocks = Vec::new();
        for lstm in &self.lstms {
            blocks.extend(lstm.blocks());
        }
        blocks.extend(self.head.blocks());
        if let Some(m) = &self.emb_target {
            blocks.push(m);
        }
        if let Some(m) = &self.emb_tweet {
            blocks.push(m);
        }
        blocks
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut Mat> {
        let mut blocks = Vec::new();
        for lstm in &mut self.lstms {
            blocks.extend(lstm.blocks_mut());
        }
        blocks.extend(self.head.blocks_mut());
        if let Some(m) = self.emb_target.as_mut() {
            blocks.push(m);
        }
        if let Some(m) = self.emb_tweet.as_mut() {
            blocks.push(m);
        }
        blocks
    }

    pub fn global_norm(&self) -> f64 {
        self.blocks()
            .iter()
            .map(|b| b.frobenius_sq())
            .sum::<f64>()
            .sqrt()
    }
}

fn mean_vec(xs: &[Mat]) -> Result<Mat> {
    if xs.is_empty() {
        return Err(Error::Empty("mean of zero vectors".into()));
    }
    let mut acc = xs[0].clone();
    for x in &xs[1..] {
        acc.add_assign(x)?;
    }
    Ok(acc.scale(1.0 / xs.len() as f64))
}

fn head_bias(head: &HeadParams) -> Option<&Mat> {
    match head {
        HeadParams::Single { b, .. } => b.as_ref(),
        HeadParams::Pair { b, .. } => b.as_ref(),
    }
}

fn apply_head_mask(rep: Rep, masks: Option<&DropoutMasks>) -> Result<Rep> {
    let Some(masks) = masks else { return Ok(rep) };
    match (rep, &masks.head) {
        (Rep::Single(r), HeadMask::Single(m)) => Ok(Rep::Single(r.hadamard(m)?)),
        (Rep::Pair { target, tweet }, HeadMask::Pair(mt, mw)) => Ok(Rep::Pair {
            target: target.hadamard(mt)?,
            tweet: tweet.hadamard(mw)?,
        }),
        _ => Err(Error::Dim("head mask kind mismatch".into())),
    }
}

fn unmask_rep(drep: Rep, masks: Option<&DropoutMasks>) -> Result<Rep> {
    let Some(masks) = masks else { return Ok(drep) };
    match (drep, &masks.head) {
        (Rep::Single(r), HeadMask::Single(m)) => Ok(Rep::Single(r.hadamard(m)?)),
        (Rep::Pair { target, tweet }, HeadMask::Pair(mt, mw)) => Ok(Rep::Pair {
            target: target.hadamard(mt)?,
            tweet: tweet.hadamard(mw)?,
        }),
        _ => Err(Error::Dim("head mask kind mismatch".into())),
    }
}

fn rep_single(rep: &Rep) -> Result<&Mat> {
    match rep {
        Rep::Single(r) => Ok(r),
        _ => Err(Error::Dim("expected single representation".into())),
    }
}

fn rep_pair(rep: &Rep) -> Result<(&Mat, &Mat)> {
    match rep {
        Rep::Pair { target, tweet } => Ok((target, tweet)),
        _ => Err(Error::Dim("expected pair representation".into())),
    }
}

fn zero_grads_like(n: usize, dim: usize) -> Vec<Mat> {
    (0..n).map(|_| Mat::zeros(dim, 1)).collect()
}

fn sum_vecs(a: Vec<Mat>, b: Vec<Mat>) -> Result<Vec<Mat>> {
    a.into_iter()
        .zip(b)
        .map(|(mut x, y)| {
            x.add_assign(&y)?;
            Ok(x)
        })
        .collect()
}

fn scatter_rows(grad: &mut Mat, indices: &[usize], dxs: &[Mat]) -> Result<()> {
    for (&idx, dx) in indices.iter().zip(dxs) {
        let row = grad.row_slice_mut(idx);
        for (r, d) in row.iter_mut().zip(dx.data()) {
            *r += d;
        }
    }
    Ok(())
}

/// Mean-of-word-vectors features: tweet half first, then target half.
pub fn bowv_features(pair: &EncodedPair, set: &EmbeddingSet) -> Result<Mat> {
    let tweet_xs = lookup(set.tweet_table(), &pair.tweet)?;
    let target_xs = lookup(set.target_table(), &pair.target)?;
    Mat::vconcat(&mean_vec(&tweet_xs)?, &mean_vec(&target_xs)?)
}
