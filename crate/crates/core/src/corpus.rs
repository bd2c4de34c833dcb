//! Labeled instances and the SemEval TSV file format.

use crate::error::{Error, Result};
use std::io::Write;
use std::path::Path;

/// Class order is fixed everywhere: FAVOR=0, AGAINST=1, NONE=2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stance {
    Favor,
    Against,
    None,
}

pub const CLASSES: [Stance; 3] = [Stance::Favor, Stance::Against, Stance::None];

impl Stance {
    pub fn index(&self) -> usize {
        match self {
            Stance::Favor => 0,
            Stance::Against => 1,
            Stance::None => 2,
        }
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(Stance::Favor),
            1 => Ok(Stance::Against),
            2 => Ok(Stance::None),
            _ => Err(Error::InvalidParam(format!("class index {i} out of range"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Stance::Favor => "FAVOR",
            Stance::Against => "AGAINST",
            Stance::None => "NONE",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "FAVOR" => Ok(Stance::Favor),
            "AGAINST" => Ok(Stance::Against),
            "NONE" => Ok(Stance::None),
            other => Err(Error::InvalidParam(format!(
                "unknown stance literal {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for Stance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One example: a (target, tweet) pair with an optional gold stance.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub id: String,
    pub target: String,
    pub tweet: String,
    pub stance: Option<Stance>,
}

pub const TSV_HEADER: &str = "ID\tTarget\tTweet\tStance";

/// Parses the official four-column format. Exactly one header line is
/// skipped; the stance literal `UNKNOWN` maps to an unlabeled instance.
pub fn parse_semeval_tsv(path: &Path) -> Result<Vec<Instance>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_semeval_tsv_str(&text, &path.display().to_string())
}

pub fn parse_semeval_tsv_str(text: &str, source: &str) -> Result<Vec<Instance>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 {
            continue; // header
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                source,
                idx + 1,
                format!("expected 4 tab-separated fields, found {}", fields.len()),
            ));
        }
        if fields[2].is_empty() {
            return Err(Error::parse(source, idx + 1, "empty tweet"));
        }
        let stance = match fields[3] {
            "UNKNOWN" => None,
            literal => Some(
                Stance::parse(literal)
                    .map_err(|e| Error::parse(source, idx + 1, e.to_string()))?,
            ),
        };
        out.push(Instance {
            id: fields[0].to_string(),
            target: fields[1].to_string(),
            tweet: fields[2].to_string(),
            stance,
        });
    }
    Ok(out)
}

/// Writes the same four-column format (with header) so the output can be
/// scored by external tooling unchanged. Unlabeled rows get `UNKNOWN`.
pub fn write_semeval_tsv(path: &Path, instances: &[Instance]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(render_semeval_tsv(instances).as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn render_semeval_tsv(instances: &[Instance]) -> String {
    let mut out = String::from(TSV_HEADER);
    out.push('\n');
    for inst in instances {
        let stance = inst.stance.map_or("UNKNOWN", |s| s.as_str());
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            inst.id, inst.target, inst.tweet, stance
        ));
    }
    out
}

/// Raw one-tweet-per-line corpus (for pretraining and weak labeling).
/// Blank lines are skipped.
pub fn read_raw_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(String::from)
        .collect())
}
