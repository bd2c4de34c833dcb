//! Tweet-aware tokenization, filtering, and vocabulary construction.
//!
//! The tokenizer is a self-contained rule list so corpus preprocessing is
//! reproducible without external tools:
//!
//! 1. split on Unicode whitespace;
//! 2. per chunk, keep URLs (scheme prefix or `xx.yy/` domain pattern) and
//!    known emoticons whole, keep `#hashtag` / `@mention` prefixes attached,
//!    and peel leading/trailing ASCII punctuation runs off as their own
//!    tokens (internal punctuation, e.g. in contractions, stays put);
//! 3. lowercase everything;
//! 4. drop URL tokens, pure-punctuation tokens that are not emoticons, and
//!    the Twitter stopwords `rt`, `#semst`, `via`.
//!
//! Numbers and emoji are retained.

use crate::error::{Error, Result};
use regex::Regex;
use std::collections::HashMap;
use std::path::Path;
use std::sync::OnceLock;

/// Ordered token sequence produced by [`tokenize`].
pub type TokenSeq = Vec<String>;

pub const DEFAULT_STOPWORDS: [&str; 3] = ["rt", "#semst", "via"];

/// Lowercase canonical forms; membership is checked case-insensitively.
const EMOTICONS: [&str; 28] = [
    ":)", ":(", ":d", ":p", ":/", ":|", ":o", ":*", ":3", ":s", ";)", ";(",
    ":-)", ":-(", ":-d", ":-p", ":-/", ";-)", ":'(", ":')", "<3", "</3",
    "=)", "=(", "=d", "=/", "^^", "-_-",
];

fn hashtag_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[#@]\w+").unwrap())
}

fn domain_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^[A-Za-z0-9-]+(\.[A-Za-z0-9-]+)+/").unwrap())
}

pub fn is_url(token: &str) -> bool {
    let lower = token.to_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || domain_re().is_match(token)
}

pub fn is_emoticon(token: &str) -> bool {
    let lower = token.to_lowercase();
    EMOTICONS.contains(&lower.as_str())
}

fn is_punct_char(c: char) -> bool {
    c.is_ascii_punctuation()
}

fn is_pure_punct(token: &str) -> bool {
    !token.is_empty() && token.chars().all(is_punct_char)
}

/// Length in bytes of the leading ASCII-punctuation run, stopping before a
/// `#`/`@` that starts a tag.
fn leading_punct_len(chunk: &str) -> usize {
    let mut end = 0;
    let mut iter = chunk.char_indices().peekable();
    while let Some((idx, c)) = iter.next() {
        if !is_punct_char(c) {
            break;
        }
        if (c == '#' || c == '@')
            && iter
                .peek()
                .is_some_and(|&(_, next)| next.is_alphanumeric() || next == '_')
        {
            break;
        }
        end = idx + c.len_utf8();
    }
    end
}

/// Byte index where the trailing ASCII-punctuation run begins.
fn trailing_punct_start(chunk: &str) -> usize {
    let mut start = chunk.len();
    for (idx, c) in chunk.char_indices().rev() {
        if is_punct_char(c) {
            start = idx;
        } else {
            break;
        }
    }
    start
}

fn split_chunk(chunk: &str, out: &mut Vec<String>) {
    if chunk.is_empty() {
        return;
    }
    if is_url(chunk) || is_emoticon(chunk) {
        out.push(chunk.to_string());
        return;
    }
    if let Some(m) = hashtag_re().find(chunk) {
        out.push(chunk[..m.end()].to_string());
        split_chunk(&chunk[m.end()..], out);
        return;
    }
    let lead = leading_punct_len(chunk);
    if lead > 0 {
        out.push(chunk[..lead].to_string());
        split_chunk(&chunk[lead..], out);
        return;
    }
    let trail = trailing_punct_start(chunk);
    if trail < chunk.len() {
        out.push(chunk[..trail].to_string());
        out.push(chunk[trail..].to_string());
        return;
    }
    out.push(chunk.to_string());
}

/// Tokenizes with the default stopword set.
pub fn tokenize(text: &str) -> TokenSeq {
    tokenize_with(text, &DEFAULT_STOPWORDS.map(String::from))
}

pub fn tokenize_with(text: &str, stopwords: &[String]) -> TokenSeq {
    let mut raw = Vec::new();
    for chunk in text.split_whitespace() {
        split_chunk(chunk, &mut raw);
    }
    raw.iter()
        .map(|t| t.to_lowercase())
        .filter(|t| {
            !is_url(t)
                && !(is_pure_punct(t) && !is_emoticon(t))
                && !stopwords.iter().any(|s| s == t)
        })
        .collect()
}

pub const UNK_TOKEN: &str = "<unk>";
pub const UNK: usize = 0;

/// Frequency-thresholded token-to-index map. Index 0 is always the
/// out-of-vocabulary token; real tokens get dense indices ordered by
/// (frequency desc, token asc) so construction is deterministic.
#[derive(Clone, Debug)]
pub struct Vocab {
    index_of: HashMap<String, usize>,
    tokens: Vec<String>,
    min_count: usize,
}

impl Vocab {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index_of.get(token).copied()
    }

    pub fn index_or_unk(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK)
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Rebuilds a vocabulary from an index-ordered token list (e.g. read
    /// back from an embedding file). `tokens[0]` must be the UNK literal.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.first().map(String::as_str) != Some(UNK_TOKEN) {
            return Err(Error::InvalidParam(format!(
                "vocab token list must start with {UNK_TOKEN}"
            )));
        }
        let mut index_of = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index_of.insert(t.clone(), i).is_some() {
                return Err(Error::InvalidParam(format!("duplicate vocab token {t:?}")));
            }
        }
        Ok(Vocab {
            index_of,
            tokens,
            min_count: 1,
        })
    }
}

pub fn build_vocab<'a>(
    corpus: impl IntoIterator<Item = &'a [String]>,
    min_count: usize,
) -> Result<Vocab> {
    if min_count < 1 {
        return Err(Error::InvalidParam("min_count must be >= 1".into()));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for seq in corpus {
        for token in seq {
            *counts.entry(token.as_str()).or_insert(0) += 1;
        }
    }
    let mut kept: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

    let mut tokens = Vec::with_capacity(kept.len() + 1);
    tokens.push(UNK_TOKEN.to_string());
    tokens.extend(kept.iter().map(|&(t, _)| t.to_string()));
    let index_of = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();
    Ok(Vocab {
        index_of,
        tokens,
        min_count,
    })
}

/// Maps each token to its index, or UNK. Length is preserved.
pub fn encode(seq: &[String], vocab: &Vocab) -> Vec<usize> {
    seq.iter().map(|t| vocab.index_or_unk(t)).collect()
}

/// Case-insensitive substring test for the target name or any alias.
pub fn contains_target(tweet: &str, target: &str, aliases: &[String]) -> bool {
    let tweet = tweet.to_lowercase();
    if tweet.contains(&target.to_lowercase()) {
        return true;
    }
    aliases
        .iter()
        .any(|a| !a.is_empty() && tweet.contains(&a.to_lowercase()))
}

/// Per-target alias lists, keyed by lowercased target name.
#[derive(Clone, Debug, Default)]
pub struct AliasMap {
    map: HashMap<String, Vec<String>>,
}

impl AliasMap {
    pub fn insert(&mut self, target: &str, aliases: Vec<String>) {
        self.map.insert(target.to_lowercase(), aliases);
    }

    pub fn aliases_for(&self, target: &str) -> &[String] {
        self.map
            .get(&target.to_lowercase())
            .map_or(&[], Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Entries sorted by target for deterministic serialization.
    pub fn entries(&self) -> Vec<(&str, &[String])> {
        let mut out: Vec<(&str, &[String])> = self
            .map
            .iter()
            .map(|(k, v)| (k.as_str(), v.as_slice()))
            .collect();
        out.sort_by_key(|(k, _)| *k);
        out
    }
}

/// Loads a plain list file: one entry per line, trimmed, blank lines skipped.
pub fn load_list_file(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}
