//! Flat `key = value` configuration files with one section per module.
//!
//! ```text
//! [model]
//! variant = BiCond
//! hidden_dim = 60
//!
//! [aliases]
//! donald trump = trump, realdonaldtrump
//!
//! [experiment]
//! mode = unseen_target
//! train = train.tsv
//! test = test.tsv
//! ```
//!
//! Unset keys take the published defaults. `resolved_*` functions render
//! the fully resolved configuration back out in canonical key order; that
//! text goes into reproduction manifests.

use crate::embed::{EmbeddingMode, Sharing, SkipgramConfig};
use crate::encoders::Variant;
use crate::error::{Error, Result};
use crate::experiment::{ExperimentMode, ExperimentSpec};
use crate::textprep::AliasMap;
use crate::train::ModelConfig;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, Default)]
pub struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, (String, usize)>>,
    source: String,
}

const KNOWN_SECTIONS: [&str; 4] = ["model", "aliases", "experiment", "skipgram"];

impl RawConfig {
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, (String, usize)>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                if !KNOWN_SECTIONS.contains(&name) {
                    return Err(Error::parse(
                        source,
                        idx + 1,
                        format!("unknown section [{name}]"),
                    ));
                }
                current = Some(name.to_string());
                sections.entry(name.to_string()).or_default();
                continue;
            }
            let Some(section) = &current else {
                return Err(Error::parse(source, idx + 1, "key before any [section]"));
            };
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(source, idx + 1, format!("expected key = value, got {line:?}"))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if sections
                .get_mut(section)
                .unwrap()
                .insert(key.clone(), (value, idx + 1))
                .is_some()
            {
                return Err(Error::parse(
                    source,
                    idx + 1,
                    format!("duplicate key {key:?} in [{section}]"),
                ));
            }
        }
        Ok(RawConfig {
            sections,
            source: source.to_string(),
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    fn get(&self, section: &str, key: &str) -> Option<&(String, usize)> {
        self.sections.get(section).and_then(|s| s.get(key))
    }

    fn section_keys(&self, section: &str) -> Vec<&str> {
        self.sections
            .get(section)
            .map(|s| s.keys().map(String::as_str).collect())
            .unwrap_or_default()
    }

    fn check_known(&self, section: &str, known: &[&str]) -> Result<()> {
        for key in self.section_keys(section) {
            if !known.contains(&key) {
                let line = self.get(section, key).map(|(_, l)| *l).unwrap_or(0);
                return Err(Error::parse(
                    &self.source,
                    line,
                    format!("unknown key {key:?} in [{section}]"),
                ));
            }
        }
        Ok(())
    }

    fn parse_into<T: std::str::FromStr>(&self, section: &str, key: &str, out: &mut T) -> Result<()> {
        if let Some((value, line)) = self.get(section, key) {
            *out = value.parse().map_err(|_| {
                Error::parse(
                    &self.source,
                    *line,
                    format!("bad value {value:?} for {key}"),
                )
            })?;
        }
        Ok(())
    }

    fn with_value<T>(
        &self,
        section: &str,
        key: &str,
        out: &mut T,
        f: impl Fn(&str) -> Result<T>,
    ) -> Result<()> {
        if let Some((value, line)) = self.get(section, key) {
            *out = f(value).map_err(|e| Error::parse(&self.source, *line, e.to_string()))?;
        }
        Ok(())
    }
}

const MODEL_KEYS: [&str; 16] = [
    "variant",
    "input_dim",
    "hidden_dim",
    "max_epochs",
    "lr",
    "dropout",
    "batch_size",
    "seed",
    "embedding_mode",
    "sharing",
    "head_bias",
    "carry_hidden",
    "forget_bias",
    "l2",
    "clip_norm",
    "vocab_min_count",
];

pub fn model_config_from(raw: &RawConfig) -> Result<ModelConfig> {
    raw.check_known("model", &MODEL_KEYS)?;
    let mut cfg = ModelConfig::default();
    raw.with_value("model", "variant", &mut cfg.variant, Variant::parse)?;
    raw.parse_into("model", "input_dim", &mut cfg.input_dim)?;
    raw.parse_into("model", "hidden_dim", &mut cfg.hidden_dim)?;
    raw.parse_into("model", "max_epochs", &mut cfg.max_epochs)?;
    raw.parse_into("model", "lr", &mut cfg.lr)?;
    raw.parse_into("model", "dropout", &mut cfg.dropout)?;
    raw.parse_into("model", "batch_size", &mut cfg.batch_size)?;
    raw.parse_into("model", "seed", &mut cfg.seed)?;
    raw.with_value(
        "model",
        "embedding_mode",
        &mut cfg.embedding_mode,
        EmbeddingMode::parse,
    )?;
    raw.with_value("model", "sharing", &mut cfg.sharing, Sharing::parse)?;
    raw.parse_into("model", "head_bias", &mut cfg.head_bias)?;
    raw.parse_into("model", "carry_hidden", &mut cfg.carry_hidden)?;
    raw.parse_into("model", "forget_bias", &mut cfg.forget_bias)?;
    raw.parse_into("model", "l2", &mut cfg.l2)?;
    raw.with_value("model", "clip_norm", &mut cfg.clip_norm, |v| {
        if v == "none" {
            Ok(None)
        } else {
            v.parse::<f64>()
                .map(Some)
                .map_err(|_| Error::InvalidParam(format!("bad clip_norm {v:?}")))
        }
    })?;
    raw.parse_into("model", "vocab_min_count", &mut cfg.vocab_min_count)?;

    let mut aliases = AliasMap::default();
    for key in raw.section_keys("aliases") {
        let (value, _) = raw.get("aliases", key).unwrap();
        let list: Vec<String> = value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
        aliases.insert(key, list);
    }
    cfg.aliases = aliases;
    Ok(cfg)
}

const SKIPGRAM_KEYS: [&str; 7] = [
    "dim",
    "window",
    "min_count",
    "negatives",
    "epochs",
    "start_lr",
    "seed",
];

pub fn skipgram_config_from(raw: &RawConfig) -> Result<SkipgramConfig> {
    raw.check_known("skipgram", &SKIPGRAM_KEYS)?;
    let mut cfg = SkipgramConfig::default();
    raw.parse_into("skipgram", "dim", &mut cfg.dim)?;
    raw.parse_into("skipgram", "window", &mut cfg.window)?;
    raw.parse_into("skipgram", "min_count", &mut cfg.min_count)?;
    raw.parse_into("skipgram", "negatives", &mut cfg.negatives)?;
    raw.parse_into("skipgram", "epochs", &mut cfg.epochs)?;
    raw.parse_into("skipgram", "start_lr", &mut cfg.start_lr)?;
    raw.parse_into("skipgram", "seed", &mut cfg.seed)?;
    Ok(cfg)
}

const EXPERIMENT_KEYS: [&str; 5] = ["mode", "train", "dev", "test", "embeddings"];

/// Relative paths resolve against `base` (the spec file's directory).
pub fn experiment_spec_from(raw: &RawConfig, base: &Path) -> Result<ExperimentSpec> {
    raw.check_known("experiment", &EXPERIMENT_KEYS)?;
    let cfg = model_config_from(raw)?;
    let resolve = |v: &str| -> PathBuf {
        let p = PathBuf::from(v);
        if p.is_absolute() {
            p
        } else {
            base.join(p)
        }
    };
    let require = |key: &str| -> Result<PathBuf> {
        raw.get("experiment", key)
            .map(|(v, _)| resolve(v))
            .ok_or_else(|| {
                Error::InvalidParam(format!("[experiment] is missing required key {key:?}"))
            })
    };
    let mut mode = ExperimentMode::UnseenTarget;
    raw.with_value("experiment", "mode", &mut mode, ExperimentMode::parse)?;
    Ok(ExperimentSpec {
        mode,
        train_path: require("train")?,
        dev_path: raw.get("experiment", "dev").map(|(v, _)| resolve(v)),
        test_path: require("test")?,
        embeddings_path: raw.get("experiment", "embeddings").map(|(v, _)| resolve(v)),
        cfg,
    })
}

fn render_aliases(out: &mut String, aliases: &AliasMap) {
    if aliases.is_empty() {
        return;
    }
    out.push_str("\n[aliases]\n");
    for (target, list) in aliases.entries() {
        out.push_str(&format!("{target} = {}\n", list.join(", ")));
    }
}

/// Canonical dump of a fully resolved model configuration.
pub fn resolved_model_text(cfg: &ModelConfig) -> String {
    let clip = cfg
        .clip_norm
        .map_or("none".to_string(), |v| v.to_string());
    let mut out = format!(
        "[model]\nvariant = {}\ninput_dim = {}\nhidden_dim = {}\nmax_epochs = {}\nlr = {}\ndropout = {}\nbatch_size = {}\nseed = {}\nembedding_mode = {}\nsharing = {}\nhead_bias = {}\ncarry_hidden = {}\nforget_bias = {}\nl2 = {}\nclip_norm = {}\nvocab_min_count = {}\n",
        cfg.variant.as_str(),
        cfg.input_dim,
        cfg.hidden_dim,
        cfg.max_epochs,
        cfg.lr,
        cfg.dropout,
        cfg.batch_size,
        cfg.seed,
        cfg.embedding_mode.as_str(),
        cfg.sharing.as_str(),
        cfg.head_bias,
        cfg.carry_hidden,
        cfg.forget_bias,
        cfg.l2,
        clip,
        cfg.vocab_min_count,
    );
    render_aliases(&mut out, &cfg.aliases);
    out
}

pub fn resolved_skipgram_text(cfg: &SkipgramConfig) -> String {
    format!(
        "[skipgram]\ndim = {}\nwindow = {}\nmin_count = {}\nnegatives = {}\nepochs = {}\nstart_lr = {}\nseed = {}\n",
        cfg.dim, cfg.window, cfg.min_count, cfg.negatives, cfg.epochs, cfg.start_lr, cfg.seed
    )
}

pub fn resolved_experiment_text(spec: &ExperimentSpec) -> String {
    let mut out = format!(
        "[experiment]\nmode = {}\ntrain = {}\n",
        spec.mode.as_str(),
        spec.train_path.display()
    );
    if let Some(dev) = &spec.dev_path {
        out.push_str(&format!("dev = {}\n", dev.display()));
    }
    out.push_str(&format!("test = {}\n", spec.test_path.display()));
    if let Some(e) = &spec.embeddings_path {
        out.push_str(&format!("embeddings = {}\n", e.display()));
    }
    out.push('\n');
    out.push_str(&resolved_model_text(&spec.cfg));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_recipe() {
        let raw = RawConfig::parse("", "t").unwrap();
        let cfg = model_config_from(&raw).unwrap();
        assert_eq!(cfg.input_dim, 100);
        assert_eq!(cfg.hidden_dim, 60);
        assert_eq!(cfg.max_epochs, 50);
        assert_eq!(cfg.lr, 1e-3);
        assert_eq!(cfg.dropout, 0.1);
    }

    #[test]
    fn overrides_and_aliases_parse() {
        let text = "\
[model]
variant = TweetCondTar
hidden_dim = 16
lr = 0.01
clip_norm = 5.0

[aliases]
donald trump = trump, realdonaldtrump, the donald
";
        let raw = RawConfig::parse(text, "t").unwrap();
        let cfg = model_config_from(&raw).unwrap();
        assert_eq!(cfg.variant, Variant::TweetCondTar);
        assert_eq!(cfg.hidden_dim, 16);
        assert_eq!(cfg.lr, 0.01);
        assert_eq!(cfg.clip_norm, Some(5.0));
        assert_eq!(
            cfg.aliases.aliases_for("Donald Trump"),
            &["trump", "realdonaldtrump", "the donald"]
        );
    }

    #[test]
    fn unknown_key_is_an_error_with_line() {
        let text = "[model]\nhiden_dim = 60\n";
        let err = model_config_from(&RawConfig::parse(text, "cfg").unwrap())
            .unwrap_err()
            .to_string();
        assert!(err.contains("cfg:2"), "{err}");
        assert!(err.contains("hiden_dim"), "{err}");
    }

    #[test]
    fn bad_value_is_an_error_with_line() {
        let text = "[model]\nlr = fast\n";
        let err = model_config_from(&RawConfig::parse(text, "cfg").unwrap())
            .unwrap_err()
            .to_string();
        assert!(err.contains("cfg:2"), "{err}");
    }

    #[test]
    fn duplicate_key_is_rejected() {
        let text = "[model]\nlr = 0.1\nlr = 0.2\n";
        assert!(RawConfig::parse(text, "t").is_err());
    }

    #[test]
    fn experiment_spec_resolves_relative_paths() {
        let text = "\
[experiment]
mode = weakly_supervised
train = data/train.tsv
test = /abs/test.tsv
";
        let raw = RawConfig::parse(text, "t").unwrap();
        let spec = experiment_spec_from(&raw, Path::new("/work")).unwrap();
        assert_eq!(spec.mode, ExperimentMode::WeaklySupervised);
        assert_eq!(spec.train_path, PathBuf::from("/work/data/train.tsv"));
        assert_eq!(spec.test_path, PathBuf::from("/abs/test.tsv"));
        assert!(spec.dev_path.is_none());
    }

    #[test]
    fn resolved_text_reparses_to_the_same_config() {
        let text = "\
[model]
variant = Concat
hidden_dim = 24
dropout = 0.2

[aliases]
x = y, z
";
        let raw = RawConfig::parse(text, "t").unwrap();
        let cfg = model_config_from(&raw).unwrap();
        let rendered = resolved_model_text(&cfg);
        let reparsed =
            model_config_from(&RawConfig::parse(&rendered, "rendered").unwrap()).unwrap();
        assert_eq!(resolved_model_text(&reparsed), rendered);
    }
}
