//! Rule-based automatic stance annotation of unlabeled corpora.
//!
//! A tweet is labeled FAVOR if any positive expression matches, else
//! AGAINST if any negative expression matches, else NONE with probability
//! `neutral_rate`, else discarded. Matching is case-insensitive on the raw
//! text. Each line is labeled under its own seed derived from (global seed,
//! line index), so output is independent of iteration chunking.

use crate::corpus::{Instance, Stance};
use crate::error::{Error, Result};
use crate::util::seeded_rng;
use rand::Rng;
use regex::RegexBuilder;
use std::path::Path;

/// The rule file shipped with the crate (Donald Trump stance rules).
pub const DEFAULT_RULE_FILE: &str = include_str!("../data/trump_rules.txt");

#[derive(Clone, Debug)]
pub struct RuleSet {
    positive: Vec<regex::Regex>,
    negative: Vec<regex::Regex>,
    positive_src: Vec<String>,
    negative_src: Vec<String>,
    pub neutral_rate: f64,
    pub seed: u64,
}

impl RuleSet {
    pub fn positive_patterns(&self) -> &[String] {
        &self.positive_src
    }

    pub fn negative_patterns(&self) -> &[String] {
        &self.negative_src
    }

    pub fn matches_positive(&self, text: &str) -> bool {
        self.positive.iter().any(|re| re.is_match(text))
    }

    pub fn matches_negative(&self, text: &str) -> bool {
        self.negative.iter().any(|re| re.is_match(text))
    }
}

/// A comment line starts with `#` followed by whitespace (or is a bare
/// `#`); `#word` is a pattern, since several rules are hashtags.
fn is_comment(line: &str) -> bool {
    match line.strip_prefix('#') {
        Some(rest) => rest.is_empty() || rest.starts_with(char::is_whitespace) || rest.starts_with('#'),
        None => false,
    }
}

pub fn compile_rules(text: &str, source: &str) -> Result<RuleSet> {
    let mut positive_src: Vec<String> = Vec::new();
    let mut negative_src: Vec<String> = Vec::new();
    let mut neutral_rate = 0.02;
    let mut section = "";
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || is_comment(line) {
            continue;
        }
        match line {
            "[positive]" => {
                section = "positive";
                continue;
            }
            "[negative]" => {
                section = "negative";
                continue;
            }
            "[meta]" => {
                section = "meta";
                continue;
            }
            _ => {}
        }
        match section {
            "positive" | "negative" => {
                let list = if section == "positive" {
                    &mut positive_src
                } else {
                    &mut negative_src
                };
                if !list.iter().any(|p| p == line) {
                    list.push(line.to_string());
                }
            }
            "meta" => {
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    Error::parse(source, idx + 1, "expected key=value in [meta]")
                })?;
                match key.trim() {
                    "neutral_rate" => {
                        neutral_rate = value.trim().parse().map_err(|_| {
                            Error::parse(source, idx + 1, format!("bad neutral_rate {value:?}"))
                        })?;
                        if !(0.0..=1.0).contains(&neutral_rate) {
                            return Err(Error::parse(
                                source,
                                idx + 1,
                                "neutral_rate outside [0, 1]",
                            ));
                        }
                    }
                    other => {
                        return Err(Error::parse(
                            source,
                            idx + 1,
                            format!("unknown meta key {other:?}"),
                        ))
                    }
                }
            }
            _ => {
                return Err(Error::parse(
                    source,
                    idx + 1,
                    "pattern outside any [positive]/[negative]/[meta] section",
                ))
            }
        }
    }

    let compile = |patterns: &[String]| -> Result<Vec<regex::Regex>> {
        patterns
            .iter()
            .map(|p| {
                RegexBuilder::new(p)
                    .case_insensitive(true)
                    .build()
                    .map_err(|e| {
                        let line = text
                            .lines()
                            .position(|l| l.trim() == p)
                            .map(|i| i + 1)
                            .unwrap_or(0);
                        Error::parse(source, line, format!("bad pattern {p:?}: {e}"))
                    })
            })
            .collect()
    };

    Ok(RuleSet {
        positive: compile(&positive_src)?,
        negative: compile(&negative_src)?,
        positive_src,
        negative_src,
        neutral_rate,
        seed: 0,
    })
}

pub fn compile_rules_file(path: &Path) -> Result<RuleSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    compile_rules(&text, &path.display().to_string())
}

pub fn default_rules() -> RuleSet {
    compile_rules(DEFAULT_RULE_FILE, "builtin").expect("shipped rule file compiles")
}

/// Labeling outcome for one raw tweet.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeakLabel {
    Favor,
    Against,
    None,
    Discard,
}

impl WeakLabel {
    pub fn stance(&self) -> Option<Stance> {
        match self {
            WeakLabel::Favor => Some(Stance::Favor),
            WeakLabel::Against => Some(Stance::Against),
            WeakLabel::None => Some(Stance::None),
            WeakLabel::Discard => None,
        }
    }
}

/// Positive expressions take precedence; unmatched text becomes NONE with
/// probability `neutral_rate` and is otherwise discarded.
pub fn label_tweet(text: &str, rules: &RuleSet, rng: &mut impl Rng) -> WeakLabel {
    if rules.matches_positive(text) {
        WeakLabel::Favor
    } else if rules.matches_negative(text) {
        WeakLabel::Against
    } else if rng.gen::<f64>() < rules.neutral_rate {
        WeakLabel::None
    } else {
        WeakLabel::Discard
    }
}

/// Per-class counts emitted by [`label_corpus`], indexed by class order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LabelCounts {
    pub favor: usize,
    pub against: usize,
    pub none: usize,
    pub discarded: usize,
}

/// Labels every line under a per-line seed; discarded lines are omitted.
pub fn label_corpus(
    lines: &[String],
    rules: &RuleSet,
    global_seed: u64,
    target: &str,
) -> (Vec<Instance>, LabelCounts) {
    let mut instances = Vec::new();
    let mut counts = LabelCounts::default();
    for (idx, line) in lines.iter().enumerate() {
        let mut rng = seeded_rng(global_seed, idx as u64);
        match label_tweet(line, rules, &mut rng) {
            WeakLabel::Favor => {
                counts.favor += 1;
                instances.push(instance(idx, target, line, Stance::Favor));
            }
            WeakLabel::Against => {
                counts.against += 1;
                instances.push(instance(idx, target, line, Stance::Against));
            }
            WeakLabel::None => {
                counts.none += 1;
                instances.push(instance(idx, target, line, Stance::None));
            }
            WeakLabel::Discard => counts.discarded += 1,
        }
    }
    (instances, counts)
}

fn instance(idx: usize, target: &str, tweet: &str, stance: Stance) -> Instance {
    Instance {
        id: (idx + 1).to_string(),
        target: target.to_string(),
        tweet: tweet.to_string(),
        stance: Some(stance),
    }
}
