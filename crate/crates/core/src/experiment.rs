//! The two experiment protocols: unseen-target (no labeled data for any
//! test target may appear in train or dev) and weakly supervised (training
//! on an automatically labeled corpus for the test target).

use crate::corpus::{parse_semeval_tsv, Instance};
use crate::embed::{load_embeddings, PretrainedEmbeddings};
use crate::encoders::Model;
use crate::error::{Error, Result};
use crate::eval::{report_table, EvalReport};
use crate::train::{evaluate_on, train_supervised, ModelConfig, TrainHistory};
use std::collections::HashSet;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentMode {
    UnseenTarget,
    WeaklySupervised,
}

impl ExperimentMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentMode::UnseenTarget => "unseen_target",
            ExperimentMode::WeaklySupervised => "weakly_supervised",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "unseen_target" => Ok(ExperimentMode::UnseenTarget),
            "weakly_supervised" => Ok(ExperimentMode::WeaklySupervised),
            other => Err(Error::InvalidParam(format!(
                "unknown experiment mode {other:?}"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub mode: ExperimentMode,
    pub train_path: PathBuf,
    pub dev_path: Option<PathBuf>,
    pub test_path: PathBuf,
    pub embeddings_path: Option<PathBuf>,
    pub cfg: ModelConfig,
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub method: String,
    pub report: EvalReport,
    pub predictions: Vec<Instance>,
    pub history: TrainHistory,
    pub model: Model,
}

fn normalized(target: &str) -> String {
    target.trim().to_lowercase()
}

/// The unseen-target constraint: no train/dev instance may carry a target
/// that appears in the test set.
fn check_unseen_constraint(
    train: &[Instance],
    dev: &[Instance],
    test: &[Instance],
) -> Result<()> {
    let test_targets: HashSet<String> = test.iter().map(|i| normalized(&i.target)).collect();
    for (name, set) in [("train", train), ("dev", dev)] {
        if let Some(bad) = set
            .iter()
            .find(|i| test_targets.contains(&normalized(&i.target)))
        {
            return Err(Error::Protocol(format!(
                "unseen-target mode, but {name} set contains test target {:?}",
                bad.target
            )));
        }
    }
    Ok(())
}

/// Loads corpora, enforces the protocol, trains with dev selection, and
/// evaluates on the test set with post-processing.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    let train = parse_semeval_tsv(&spec.train_path)?;
    let dev = match &spec.dev_path {
        Some(p) => parse_semeval_tsv(p)?,
        None => Vec::new(),
    };
    let test = parse_semeval_tsv(&spec.test_path)?;
    if test.is_empty() {
        return Err(Error::Empty("test set".into()));
    }
    if spec.mode == ExperimentMode::UnseenTarget {
        check_unseen_constraint(&train, &dev, &test)?;
    }
    let pretrained: Option<PretrainedEmbeddings> = spec
        .embeddings_path
        .as_ref()
        .map(|p| load_embeddings(p))
        .transpose()?;
    let (model, history) = train_supervised(&train, &dev, &spec.cfg, pretrained.as_ref())?;
    let (report, predictions) = evaluate_on(&test, &model, &spec.cfg.aliases)?;
    Ok(ExperimentOutput {
        method: spec.cfg.variant.as_str().to_string(),
        report,
        predictions,
        history,
        model,
    })
}

/// Writes the result files into `dir`: `report.txt` (result table),
/// `predictions.tsv` (scoreable prediction file), `history.txt` and
/// `history.records` (epoch table and record stream). All outputs are
/// deterministic for a fixed spec and seed.
pub fn write_outputs(out: &ExperimentOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, contents: &str| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(|e| Error::io(path, e))
    };
    write(
        "report.txt",
        &report_table(&[(out.method.clone(), out.report)]),
    )?;
    write(
        "predictions.tsv",
        &crate::corpus::render_semeval_tsv(&out.predictions),
    )?;
    write("history.txt", &out.history.table())?;
    write("history.records", &out.history.records())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{write_semeval_tsv, Stance};
    use crate::encoders::Variant;

    fn inst(id: usize, target: &str, tweet: &str, stance: Stance) -> Instance {
        Instance {
            id: id.to_string(),
            target: target.into(),
            tweet: tweet.into(),
            stance: Some(stance),
        }
    }

    fn spec_in(dir: &Path, mode: ExperimentMode) -> ExperimentSpec {
        let train = vec![
            inst(1, "apples", "sweet and crisp fruit", Stance::Favor),
            inst(2, "apples", "worms ruin every bite", Stance::Against),
            inst(3, "pears", "sweet and crisp fruit", Stance::Against),
            inst(4, "pears", "worms ruin every bite", Stance::Favor),
        ];
        let test = vec![
            inst(1, "plums", "sweet and crisp fruit", Stance::Favor),
            inst(2, "plums", "worms ruin every bite", Stance::Against),
        ];
        write_semeval_tsv(&dir.join("train.tsv"), &train).unwrap();
        write_semeval_tsv(&dir.join("test.tsv"), &test).unwrap();
        let cfg = ModelConfig {
            variant: Variant::TweetOnly,
            input_dim: 6,
            hidden_dim: 6,
            max_epochs: 2,
            dropout: 0.0,
            batch_size: 2,
            seed: 4,
            ..ModelConfig::default()
        };
        ExperimentSpec {
            mode,
            train_path: dir.join("train.tsv"),
            dev_path: None,
            test_path: dir.join("test.tsv"),
            embeddings_path: None,
            cfg,
        }
    }

    #[test]
    fn unseen_guard_aborts_on_target_leak() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = spec_in(dir.path(), ExperimentMode::UnseenTarget);
        // poison the training set with a test-target instance
        let mut train = parse_semeval_tsv(&spec.train_path).unwrap();
        train.push(inst(9, "Plums", "leaked example", Stance::Favor));
        write_semeval_tsv(&dir.path().join("train2.tsv"), &train).unwrap();
        spec.train_path = dir.path().join("train2.tsv");
        let err = run_experiment(&spec).unwrap_err().to_string();
        assert!(err.contains("protocol"), "{err}");
        assert!(err.to_lowercase().contains("plums"), "{err}");
    }

    #[test]
    fn clean_unseen_spec_runs() {
        let dir = tempfile::tempdir().unwrap();
        let spec = spec_in(dir.path(), ExperimentMode::UnseenTarget);
        let out = run_experiment(&spec).unwrap();
        assert_eq!(out.predictions.len(), 2);
    }

    #[test]
    fn weakly_supervised_mode_allows_test_target_in_train() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = spec_in(dir.path(), ExperimentMode::WeaklySupervised);
        let mut train = parse_semeval_tsv(&spec.train_path).unwrap();
        train.push(inst(9, "plums", "fine here", Stance::Favor));
        write_semeval_tsv(&dir.path().join("train2.tsv"), &train).unwrap();
        spec.train_path = dir.path().join("train2.tsv");
        assert!(run_experiment(&spec).is_ok());
    }

    #[test]
    fn same_spec_and_seed_give_byte_identical_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let spec = spec_in(dir.path(), ExperimentMode::UnseenTarget);
        let out1 = run_experiment(&spec).unwrap();
        let out2 = run_experiment(&spec).unwrap();
        let d1 = dir.path().join("run1");
        let d2 = dir.path().join("run2");
        write_outputs(&out1, &d1).unwrap();
        write_outputs(&out2, &d2).unwrap();
        for name in ["report.txt", "predictions.tsv", "history.txt", "history.records"] {
            assert_eq!(
                std::fs::read(d1.join(name)).unwrap(),
                std::fs::read(d2.join(name)).unwrap(),
                "{name} differs"
            );
        }
    }
}
