//! Supervised training: mini-batch Adam on mean cross-entropy with
//! per-example BPTT, dropout on input embeddings and the pre-projection
//! representation, and dev-macro-F1 model selection.
//!
//! Single-threaded and bit-reproducible from (data, config, seed). Wall
//! times are tracked in memory for progress display but never written into
//! rendered histories, so artifacts stay byte-identical across runs.

use crate::corpus::{Instance, Stance};
use crate::embed::{init_table, EmbeddingMode, EmbeddingSet, PretrainedEmbeddings, Sharing};
use crate::encoders::{init_model, EncodedPair, Model, ModelGrads, ModelInit, Variant};
use crate::error::{Error, Result};
use crate::eval::{per_class_prf, postprocess, EvalReport};
use crate::numcore::{AdamState, ParamBlocks, CE_FLOOR};
use crate::textprep::{build_vocab, tokenize, AliasMap, Vocab};
use crate::util::seeded_rng;
use rand::seq::SliceRandom;
use std::time::Instant;

pub use crate::encoders::{load_model, save_model};

/// Architecture plus training hyperparameters. Defaults follow the
/// published recipe: input 100, hidden 60, max 50 epochs, Adam at 1e-3,
/// dropout 0.1, cross-entropy loss.
#[derive(Clone, Debug)]
pub struct ModelConfig {
    pub variant: Variant,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub max_epochs: usize,
    pub lr: f64,
    pub dropout: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub embedding_mode: EmbeddingMode,
    pub sharing: Sharing,
    pub head_bias: bool,
    pub carry_hidden: bool,
    pub forget_bias: f64,
    pub l2: f64,
    pub clip_norm: Option<f64>,
    pub vocab_min_count: usize,
    pub aliases: AliasMap,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: Variant::BiCond,
            input_dim: 100,
            hidden_dim: 60,
            max_epochs: 50,
            lr: 1e-3,
            dropout: 0.1,
            batch_size: 32,
            seed: 1,
            embedding_mode: EmbeddingMode::Random,
            sharing: Sharing::Sing,
            head_bias: true,
            carry_hidden: false,
            forget_bias: 1.0,
            l2: 1e-3,
            clip_norm: None,
            vocab_min_count: 1,
            aliases: AliasMap::default(),
        }
    }
}

impl ModelConfig {
    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::InvalidParam("dims must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidParam(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::InvalidParam(
                "batch_size and max_epochs must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_macro_f1: Option<f64>,
    pub clamped: usize,
    pub wall_secs: f64,
}

#[derive(Clone, Debug)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
}

impl TrainHistory {
    /// Column-aligned table (wall time deliberately excluded; see module
    /// docs).
    pub fn table(&self) -> String {
        let mut out = String::from("epoch   train_loss          dev_macro_f1        clamped\n");
        for r in &self.epochs {
            let dev = r
                .dev_macro_f1
                .map_or("-".to_string(), |v| format!("{v:.6}"));
            out.push_str(&format!(
                "{:<8}{:<20.12}{:<20}{}\n",
                r.epoch, r.train_loss, dev, r.clamped
            ));
        }
        out.push_str(&format!("best_epoch {}\n", self.best_epoch));
        out
    }

    /// Line-delimited record stream, one `key=value` record per epoch.
    pub fn records(&self) -> String {
        let mut out = String::new();
        for r in &self.epochs {
            let dev = r
                .dev_macro_f1
                .map_or("NA".to_string(), |v| format!("{v:.16e}"));
            out.push_str(&format!(
                "epoch={} train_loss={:.16e} dev_macro_f1={} clamped={}\n",
                r.epoch, r.train_loss, dev, r.clamped
            ));
        }
        out.push_str(&format!("best_epoch={}\n", self.best_epoch));
        out
    }
}

fn require_gold(instances: &[Instance], what: &str) -> Result<Vec<usize>> {
    instances
        .iter()
        .map(|i| {
            i.stance
                .map(|s| s.index())
                .ok_or_else(|| Error::InvalidParam(format!("unlabeled instance in {what} set")))
        })
        .collect()
}

/// Model vocabulary: training tokens (tweets and targets) at
/// `vocab_min_count`, extended with pretrained tokens when an embedding
/// file is supplied so dev/test words seen in pretraining keep their
/// vectors.
fn model_vocab(
    train: &[Instance],
    min_count: usize,
    pretrained: Option<&PretrainedEmbeddings>,
) -> Result<Vocab> {
    let mut seqs: Vec<Vec<String>> = Vec::with_capacity(train.len() * 2);
    for inst in train {
        seqs.push(tokenize(&inst.target));
        seqs.push(tokenize(&inst.tweet));
    }
    let base = build_vocab(seqs.iter().map(|s| s.as_slice()), min_count)?;
    let Some(pre) = pretrained else {
        return Ok(base);
    };
    let mut tokens = base.tokens().to_vec();
    for token in &pre.tokens {
        if base.get(token).is_none() && token != crate::textprep::UNK_TOKEN {
            tokens.push(token.clone());
        }
    }
    Vocab::from_tokens(tokens)
}

fn build_embeddings(
    vocab: &Vocab,
    cfg: &ModelConfig,
    pretrained: Option<&PretrainedEmbeddings>,
) -> Result<EmbeddingSet> {
    match cfg.sharing {
        Sharing::Sing => {
            let table = init_table(
                vocab,
                cfg.input_dim,
                cfg.embedding_mode,
                pretrained,
                crate::util::mix_seed(cfg.seed, 100),
            )?;
            Ok(EmbeddingSet::sing(table))
        }
        Sharing::Sep => {
            let tweet = init_table(
                vocab,
                cfg.input_dim,
                cfg.embedding_mode,
                pretrained,
                crate::util::mix_seed(cfg.seed, 100),
            )?;
            let target = init_table(
                vocab,
                cfg.input_dim,
                cfg.embedding_mode,
                pretrained,
                crate::util::mix_seed(cfg.seed, 101),
            )?;
            EmbeddingSet::sep(tweet, target)
        }
    }
}

/// Trains on `train`, selects the checkpoint with the best dev macro-F1
/// (earliest epoch on ties; last epoch when `dev` is empty), and returns it
/// with the full history.
pub fn train_supervised(
    train: &[Instance],
    dev: &[Instance],
    cfg: &ModelConfig,
    pretrained: Option<&PretrainedEmbeddings>,
) -> Result<(Model, TrainHistory)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    let gold = require_gold(train, "training")?;
    if matches!(cfg.embedding_mode, EmbeddingMode::PreFixed | EmbeddingMode::PreCont)
        && pretrained.is_none()
    {
        return Err(Error::InvalidParam(format!(
            "{} mode requires a pretrained embedding file",
            cfg.embedding_mode.as_str()
        )));
    }

    let vocab = model_vocab(train, cfg.vocab_min_count, pretrained)?;
    let embeddings = build_embeddings(&vocab, cfg, pretrained)?;
    let init = ModelInit {
        variant: cfg.variant,
        input_dim: cfg.input_dim,
        hidden_dim: cfg.hidden_dim,
        head_bias: cfg.head_bias,
        carry_hidden: cfg.carry_hidden,
        forget_bias: cfg.forget_bias,
        l2: cfg.l2,
    };
    let mut init_rng = seeded_rng(cfg.seed, 200);
    let mut model = init_model(&init, vocab, embeddings, &mut init_rng)?;

    let pairs: Vec<EncodedPair> = train
        .iter()
        .map(|i| model.encode_instance(&i.target, &i.tweet))
        .collect();
    let dev_pairs: Vec<EncodedPair> = dev
        .iter()
        .map(|i| model.encode_instance(&i.target, &i.tweet))
        .collect();
    let dev_gold: Option<Vec<Stance>> = if dev.is_empty() {
        None
    } else {
        Some(
            require_gold(dev, "dev")?
                .into_iter()
                .map(|i| Stance::from_index(i).unwrap())
                .collect(),
        )
    };

    let mut adam = AdamState::new(&ParamBlocks::blocks(&model), cfg.lr);
    let mut grads = ModelGrads::zeros_like(&model);
    let mut train_rng = seeded_rng(cfg.seed, 300);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut history = TrainHistory {
        epochs: Vec::with_capacity(cfg.max_epochs),
        best_epoch: 0,
    };
    let mut best_f1 = f64::NEG_INFINITY;
    let mut best_model: Option<Model> = None;

    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        order.shuffle(&mut train_rng);
        let mut loss_sum = 0.0;
        let mut clamped = 0usize;

        for (batch_no, batch) in order.chunks(cfg.batch_size).enumerate() {
            grads.zero();
            for &i in batch {
                let masks = if cfg.dropout > 0.0 {
                    Some(model.sample_masks(&pairs[i], cfg.dropout, &mut train_rng)?)
                } else {
                    None
                };
                let (loss, probs) =
                    model.loss_and_grad(&pairs[i], gold[i], masks.as_ref(), &mut grads)?;
                if !loss.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "training loss at epoch {epoch}, batch {batch_no}"
                    )));
                }
                if probs[gold[i]] <= CE_FLOOR {
                    clamped += 1;
                }
                loss_sum += loss;
            }
            grads.scale_assign(1.0 / batch.len() as f64);
            if let Some(clip) = cfg.clip_norm {
                let norm = grads.global_norm();
                if norm > clip {
                    grads.scale_assign(clip / norm);
                }
            }
            adam.step(&mut model.blocks_mut(), &grads.blocks())?;
        }

        let dev_macro_f1 = match (&dev_gold, dev.is_empty()) {
            (Some(gold), false) => {
                let mut preds = Vec::with_capacity(dev.len());
                for (inst, pair) in dev.iter().zip(&dev_pairs) {
                    let probs = model.predict_probs(pair)?;
                    preds.push(postprocess(
                        &probs,
                        &inst.tweet,
                        &inst.target,
                        cfg.aliases.aliases_for(&inst.target),
                    ));
                }
                Some(per_class_prf(gold, &preds)?.macro_f1)
            }
            _ => None,
        };

        if let Some(f1) = dev_macro_f1 {
            if f1 > best_f1 {
                best_f1 = f1;
                history.best_epoch = epoch;
                best_model = Some(model.clone());
            }
        } else {
            history.best_epoch = epoch; // no dev: last epoch wins
        }

        history.epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            dev_macro_f1,
            clamped,
            wall_secs: started.elapsed().as_secs_f64(),
        });
    }

    Ok((best_model.unwrap_or(model), history))
}

/// Eval-mode predictions with post-processing applied.
pub fn predict_dataset(
    model: &Model,
    data: &[Instance],
    aliases: &AliasMap,
) -> Result<Vec<(Stance, Vec<f64>)>> {
    data.iter()
        .map(|inst| {
            let pair = model.encode_instance(&inst.target, &inst.tweet);
            let probs = model.predict_probs(&pair)?;
            let stance = postprocess(
                &probs,
                &inst.tweet,
                &inst.target,
                aliases.aliases_for(&inst.target),
            );
            Ok((stance, probs))
        })
        .collect()
}

/// Scores a labeled dataset; returns the report and the instances with
/// predicted stances substituted (ready to write as a prediction file).
pub fn evaluate_on(
    data: &[Instance],
    model: &Model,
    aliases: &AliasMap,
) -> Result<(EvalReport, Vec<Instance>)> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation set".into()));
    }
    let gold: Vec<Stance> = require_gold(data, "evaluation")?
        .into_iter()
        .map(|i| Stance::from_index(i).unwrap())
        .collect();
    let preds = predict_dataset(model, data, aliases)?;
    let pred_labels: Vec<Stance> = preds.iter().map(|(s, _)| *s).collect();
    let report = per_class_prf(&gold, &pred_labels)?;
    let predicted = data
        .iter()
        .zip(&pred_labels)
        .map(|(inst, &stance)| Instance {
            stance: Some(stance),
            ..inst.clone()
        })
        .collect();
    Ok((report, predicted))
}

/// Training accuracy of a model on labeled data (no post-processing).
pub fn plain_accuracy(model: &Model, data: &[Instance]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("accuracy set".into()));
    }
    let mut correct = 0usize;
    for inst in data {
        let pair = model.encode_instance(&inst.target, &inst.tweet);
        let probs = model.predict_probs(&pair)?;
        let mut best = 0;
        for i in 1..3 {
            if probs[i] > probs[best] {
                best = i;
            }
        }
        if Some(best) == inst.stance.map(|s| s.index()) {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}
