//! Skip-gram word-vector pretraining and embedding-table management.
//!
//! Pretraining is skip-gram with negative sampling: per center position the
//! effective window is sampled uniformly from `[1, window]`, negatives come
//! from the unigram distribution raised to 0.75, and the learning rate
//! decays linearly from `start_lr` to `start_lr/100` across all training
//! pairs. Window draws and negative draws use separate seeded streams so the
//! total pair count can be established up front without disturbing training
//! randomness. Only input vectors are exported; context vectors are
//! discarded after training.

use crate::error::{Error, Result};
use crate::numcore::{sigmoid_scalar, Mat};
use crate::textprep::{build_vocab, Vocab, UNK_TOKEN};
use crate::util::seeded_rng;
use rand::Rng;
use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbeddingMode {
    Random,
    PreFixed,
    PreCont,
}

impl EmbeddingMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            EmbeddingMode::Random => "Random",
            EmbeddingMode::PreFixed => "PreFixed",
            EmbeddingMode::PreCont => "PreCont",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "Random" => Ok(EmbeddingMode::Random),
            "PreFixed" => Ok(EmbeddingMode::PreFixed),
            "PreCont" => Ok(EmbeddingMode::PreCont),
            other => Err(Error::InvalidParam(format!(
                "unknown embedding mode {other:?} (expected Random, PreFixed or PreCont)"
            ))),
        }
    }
}

/// Shared vs separate embedding matrices for tweet and target lookups.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sharing {
    Sing,
    Sep,
}

impl Sharing {
    pub fn as_str(&self) -> &'static str {
        match self {
            Sharing::Sing => "Sing",
            Sharing::Sep => "Sep",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "Sing" => Ok(Sharing::Sing),
            "Sep" => Ok(Sharing::Sep),
            other => Err(Error::InvalidParam(format!(
                "unknown sharing {other:?} (expected Sing or Sep)"
            ))),
        }
    }
}

/// Vocabulary-indexed matrix of word vectors; row index = vocab index.
#[derive(Clone, Debug)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub vectors: Mat,
    pub trainable: bool,
    pub mode: EmbeddingMode,
}

impl EmbeddingTable {
    pub fn vocab_size(&self) -> usize {
        self.vectors.rows()
    }

    pub fn row(&self, index: usize) -> &[f64] {
        self.vectors.row_slice(index)
    }
}

/// Returns one column vector per index; errors on out-of-range indices.
pub fn lookup(table: &EmbeddingTable, indices: &[usize]) -> Result<Vec<Mat>> {
    indices
        .iter()
        .map(|&i| {
            if i >= table.vocab_size() {
                Err(Error::Dim(format!(
                    "embedding index {i} out of range for vocab of {}",
                    table.vocab_size()
                )))
            } else {
                Ok(Mat::col(table.row(i)))
            }
        })
        .collect()
}

/// One or two tables depending on sharing mode. In `Sing` mode the target
/// side reads from the tweet table, so there is exactly one matrix.
#[derive(Clone, Debug)]
pub struct EmbeddingSet {
    pub sharing: Sharing,
    pub tweet: EmbeddingTable,
    pub target: Option<EmbeddingTable>,
}

impl EmbeddingSet {
    pub fn sing(table: EmbeddingTable) -> Self {
        EmbeddingSet {
            sharing: Sharing::Sing,
            tweet: table,
            target: None,
        }
    }

    pub fn sep(tweet: EmbeddingTable, target: EmbeddingTable) -> Result<Self> {
        if tweet.dim != target.dim {
            return Err(Error::Dim(format!(
                "separate tables with dims {} vs {}",
                tweet.dim, target.dim
            )));
        }
        Ok(EmbeddingSet {
            sharing: Sharing::Sep,
            tweet,
            target: Some(target),
        })
    }

    pub fn dim(&self) -> usize {
        self.tweet.dim
    }

    pub fn tweet_table(&self) -> &EmbeddingTable {
        &self.tweet
    }

    pub fn target_table(&self) -> &EmbeddingTable {
        self.target.as_ref().unwrap_or(&self.tweet)
    }
}

/// Raw pretrained vectors: token list in row order plus the vector matrix.
#[derive(Clone, Debug)]
pub struct PretrainedEmbeddings {
    pub dim: usize,
    pub tokens: Vec<String>,
    pub vectors: Mat,
    row_of: HashMap<String, usize>,
}

impl PretrainedEmbeddings {
    pub fn new(dim: usize, tokens: Vec<String>, vectors: Mat) -> Result<Self> {
        if vectors.rows() != tokens.len() || vectors.cols() != dim {
            return Err(Error::Dim(format!(
                "{} tokens for a {}x{} vector matrix (dim {dim})",
                tokens.len(),
                vectors.rows(),
                vectors.cols()
            )));
        }
        let row_of = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(PretrainedEmbeddings {
            dim,
            tokens,
            vectors,
            row_of,
        })
    }

    pub fn row_for(&self, token: &str) -> Option<&[f64]> {
        self.row_of.get(token).map(|&i| self.vectors.row_slice(i))
    }
}

#[derive(Clone, Debug)]
pub struct SkipgramConfig {
    pub dim: usize,
    pub window: usize,
    pub min_count: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub start_lr: f64,
    pub seed: u64,
}

impl Default for SkipgramConfig {
    fn default() -> Self {
        SkipgramConfig {
            dim: 100,
            window: 5,
            min_count: 5,
            negatives: 5,
            epochs: 5,
            start_lr: 0.025,
            seed: 1,
        }
    }
}

impl SkipgramConfig {
    fn validate(&self) -> Result<()> {
        if self.dim < 1 || self.window < 1 || self.negatives < 1 {
            return Err(Error::InvalidParam(
                "skip-gram dim, window and negatives must all be >= 1".into(),
            ));
        }
        if self.epochs < 1 {
            return Err(Error::InvalidParam("skip-gram epochs must be >= 1".into()));
        }
        Ok(())
    }
}

/// Cumulative table over counts^0.75 for negative sampling.
struct UnigramTable {
    cum: Vec<f64>,
}

impl UnigramTable {
    fn new(counts: &[usize]) -> Self {
        let mut cum = Vec::with_capacity(counts.len());
        let mut acc = 0.0;
        for &c in counts {
            acc += (c as f64).powf(0.75);
            cum.push(acc);
        }
        UnigramTable { cum }
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        let total = *self.cum.last().unwrap();
        let u = rng.gen::<f64>() * total;
        self.cum.partition_point(|&c| c <= u).min(self.cum.len() - 1)
    }
}

/// Trains skip-gram embeddings; deterministic for a fixed (corpus, config).
pub fn train_skipgram(
    corpus: &[Vec<String>],
    cfg: &SkipgramConfig,
) -> Result<(PretrainedEmbeddings, Vocab)> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::Empty("skip-gram corpus".into()));
    }
    let vocab = build_vocab(corpus.iter().map(|s| s.as_slice()), cfg.min_count)?;
    let sentences: Vec<Vec<usize>> = corpus
        .iter()
        .map(|seq| crate::textprep::encode(seq, &vocab))
        .collect();

    let mut counts = vec![0usize; vocab.len()];
    for s in &sentences {
        for &i in s {
            counts[i] += 1;
        }
    }
    let table = UnigramTable::new(&counts);

    // Pair-count pass: replays only the window stream.
    let mut window_rng = seeded_rng(cfg.seed, 1);
    let mut total_pairs: u64 = 0;
    for _ in 0..cfg.epochs {
        for s in &sentences {
            for t in 0..s.len() {
                let b = window_rng.gen_range(1..=cfg.window);
                let lo = t.saturating_sub(b);
                let hi = (t + b).min(s.len() - 1);
                total_pairs += (hi - lo) as u64; // excludes t itself
            }
        }
    }
    if total_pairs == 0 {
        return Err(Error::Empty(
            "corpus yields no (center, context) training pair".into(),
        ));
    }

    let mut init_rng = seeded_rng(cfg.seed, 0);
    let span = 0.5 / cfg.dim as f64;
    let mut syn0 = Mat::uniform(vocab.len(), cfg.dim, -span, span, &mut init_rng);
    let mut syn1 = Mat::zeros(vocab.len(), cfg.dim);

    let mut window_rng = seeded_rng(cfg.seed, 1);
    let mut neg_rng = seeded_rng(cfg.seed, 2);
    let mut pair_idx: u64 = 0;
    let mut neu1e = vec![0.0f64; cfg.dim];

    for _ in 0..cfg.epochs {
        for s in &sentences {
            for t in 0..s.len() {
                let b = window_rng.gen_range(1..=cfg.window);
                let lo = t.saturating_sub(b);
                let hi = (t + b).min(s.len() - 1);
                for j in lo..=hi {
                    if j == t {
                        continue;
                    }
                    let center = s[t];
                    let context = s[j];
                    let lr = cfg.start_lr
                        * (1.0 - 0.99 * (pair_idx as f64 / total_pairs as f64));
                    pair_idx += 1;

                    neu1e.iter_mut().for_each(|v| *v = 0.0);
                    // positive target, then sampled negatives; draws that
                    // collide with the positive are skipped
                    for k in 0..=cfg.negatives {
                        let (tgt, label) = if k == 0 {
                            (context, 1.0)
                        } else {
                            let n = table.sample(&mut neg_rng);
                            if n == context {
                                continue;
                            }
                            (n, 0.0)
                        };
                        let dot: f64 = syn0
                            .row_slice(center)
                            .iter()
                            .zip(syn1.row_slice(tgt))
                            .map(|(a, b)| a * b)
                            .sum();
                        let g = (label - sigmoid_scalar(dot)) * lr;
                        let (c_row, t_row) = (center, tgt);
                        for d in 0..cfg.dim {
                            neu1e[d] += g * syn1.row_slice(t_row)[d];
                        }
                        let center_copy: Vec<f64> = syn0.row_slice(c_row).to_vec();
                        let t_slice = syn1.row_slice_mut(t_row);
                        for d in 0..cfg.dim {
                            t_slice[d] += g * center_copy[d];
                        }
                    }
                    let c_slice = syn0.row_slice_mut(center);
                    for d in 0..cfg.dim {
                        c_slice[d] += neu1e[d];
                    }
                }
            }
        }
    }

    syn0.check_finite("skip-gram vectors")?;
    let pretrained = PretrainedEmbeddings::new(cfg.dim, vocab.tokens().to_vec(), syn0)?;
    Ok((pretrained, vocab))
}

/// Builds the model-facing table for a vocabulary under the given
/// initialization regime. Tokens absent from the pretrained vectors fall
/// back to Random rows; the trainable flag follows the mode.
pub fn init_table(
    vocab: &Vocab,
    dim: usize,
    mode: EmbeddingMode,
    pretrained: Option<&PretrainedEmbeddings>,
    seed: u64,
) -> Result<EmbeddingTable> {
    let mut rng = seeded_rng(seed, 3);
    let pre = match mode {
        EmbeddingMode::Random => None,
        _ => Some(pretrained.ok_or_else(|| {
            Error::InvalidParam(format!(
                "{} initialization requires pretrained embeddings",
                mode.as_str()
            ))
        })?),
    };
    if let Some(p) = pre {
        if p.dim != dim {
            return Err(Error::Dim(format!(
                "pretrained dim {} but table dim {}",
                p.dim, dim
            )));
        }
    }
    let mut vectors = Mat::zeros(vocab.len(), dim);
    for i in 0..vocab.len() {
        let token = vocab.token(i);
        match pre.and_then(|p| p.row_for(token)) {
            Some(row) => vectors.row_slice_mut(i).copy_from_slice(row),
            None => {
                for v in vectors.row_slice_mut(i) {
                    *v = rng.gen_range(-0.1..0.1);
                }
            }
        }
    }
    Ok(EmbeddingTable {
        dim,
        vectors,
        trainable: mode != EmbeddingMode::PreFixed,
        mode,
    })
}

/// Writes `<vocab_size> <dim>` then one `<token> <values...>` line per row,
/// 17 significant digits so values round-trip exactly.
pub fn save_embeddings(pre: &PretrainedEmbeddings, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("{} {}\n", pre.tokens.len(), pre.dim));
    for (i, token) in pre.tokens.iter().enumerate() {
        out.push_str(token);
        for v in pre.vectors.row_slice(i) {
            out.push(' ');
            out.push_str(&format!("{v:.16e}"));
        }
        out.push('\n');
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_embeddings(path: &Path) -> Result<PretrainedEmbeddings> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let path_s = path.display().to_string();
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(&path_s, 1, "empty embedding file"))?;
    let mut parts = header.split_whitespace();
    let n: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::parse(&path_s, 1, "bad vocab size in header"))?;
    let dim: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::parse(&path_s, 1, "bad dimension in header"))?;

    let mut tokens = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * dim);
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(' ');
        let token = fields
            .next()
            .ok_or_else(|| Error::parse(&path_s, idx + 1, "missing token"))?;
        let mut count = 0;
        for field in fields {
            let v: f64 = field.parse().map_err(|_| {
                Error::parse(&path_s, idx + 1, format!("bad float {field:?}"))
            })?;
            data.push(v);
            count += 1;
        }
        if count != dim {
            return Err(Error::parse(
                &path_s,
                idx + 1,
                format!("expected {dim} values, found {count}"),
            ));
        }
        tokens.push(token.to_string());
    }
    if tokens.len() != n {
        return Err(Error::parse(
            &path_s,
            1,
            format!("header claims {n} rows, file has {}", tokens.len()),
        ));
    }
    let vectors = Mat::from_vec(tokens.len(), dim, data)?;
    PretrainedEmbeddings::new(dim, tokens, vectors)
}

/// Convenience: vocabulary wrapper over a pretrained token list when the
/// list already starts with the UNK literal, otherwise UNK is prepended
/// conceptually by the caller via `init_table` fallback rows.
pub fn vocab_from_pretrained(pre: &PretrainedEmbeddings) -> Result<Vocab> {
    if pre.tokens.first().map(String::as_str) == Some(UNK_TOKEN) {
        Vocab::from_tokens(pre.tokens.clone())
    } else {
        let mut tokens = Vec::with_capacity(pre.tokens.len() + 1);
        tokens.push(UNK_TOKEN.to_string());
        tokens.extend(pre.tokens.iter().cloned());
        Vocab::from_tokens(tokens)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::UNK;

    fn toy_corpus() -> Vec<Vec<String>> {
        let mut corpus = Vec::new();
        for _ in 0..40 {
            corpus.push(vec!["a".into(), "b".into(), "c".into()]);
            corpus.push(vec!["x".into(), "y".into(), "z".into()]);
        }
        corpus
    }

    fn small_cfg(seed: u64) -> SkipgramConfig {
        SkipgramConfig {
            dim: 12,
            window: 2,
            min_count: 1,
            negatives: 4,
            epochs: 12,
            start_lr: 0.05,
            seed,
        }
    }

    #[test]
    fn degenerate_single_token_corpus_completes() {
        let corpus = vec![vec!["only".to_string(); 8]];
        let mut cfg = small_cfg(1);
        cfg.min_count = 1;
        let (pre, vocab) = train_skipgram(&corpus, &cfg).unwrap();
        assert!(pre.vectors.is_finite());
        assert_eq!(vocab.get("only"), Some(1));
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let corpus = toy_corpus();
        let cfg = small_cfg(7);
        let (a, _) = train_skipgram(&corpus, &cfg).unwrap();
        let (b, _) = train_skipgram(&corpus, &cfg).unwrap();
        assert_eq!(a.vectors, b.vectors);
    }

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn disjoint_clusters_separate_in_cosine() {
        // statistical oracle over 5 seeds: words that co-occur end up closer
        for seed in 1..=5u64 {
            let corpus = toy_corpus();
            let (pre, vocab) = train_skipgram(&corpus, &small_cfg(seed)).unwrap();
            let row = |t: &str| pre.vectors.row_slice(vocab.get(t).unwrap()).to_vec();
            let cluster1 = [row("a"), row("b"), row("c")];
            let cluster2 = [row("x"), row("y"), row("z")];
            let mut intra = Vec::new();
            let mut inter = Vec::new();
            for i in 0..3 {
                for j in (i + 1)..3 {
                    intra.push(cosine(&cluster1[i], &cluster1[j]));
                    intra.push(cosine(&cluster2[i], &cluster2[j]));
                }
                for j in 0..3 {
                    inter.push(cosine(&cluster1[i], &cluster2[j]));
                }
            }
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            assert!(
                mean(&intra) > mean(&inter),
                "seed {seed}: intra {} <= inter {}",
                mean(&intra),
                mean(&inter)
            );
        }
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let corpus: Vec<Vec<String>> = vec![];
        assert!(train_skipgram(&corpus, &small_cfg(1)).is_err());
        // a single one-token sentence yields no pair
        let one = vec![vec!["w".to_string()]];
        assert!(train_skipgram(&one, &small_cfg(1)).is_err());
    }

    #[test]
    fn random_init_is_seeded_and_in_range() {
        let corpus = vec![vec!["a".to_string(), "b".to_string()]];
        let vocab = build_vocab(corpus.iter().map(|s| s.as_slice()), 1).unwrap();
        let t1 = init_table(&vocab, 8, EmbeddingMode::Random, None, 5).unwrap();
        let t2 = init_table(&vocab, 8, EmbeddingMode::Random, None, 5).unwrap();
        assert_eq!(t1.vectors, t2.vectors);
        assert!(t1.trainable);
        assert!(t1.vectors.data().iter().all(|v| (-0.1..0.1).contains(v)));
    }

    #[test]
    fn prefixed_copies_rows_and_freezes() {
        let corpus = toy_corpus();
        let (pre, _) = train_skipgram(&corpus, &small_cfg(3)).unwrap();
        let vocab = build_vocab(corpus.iter().map(|s| s.as_slice()), 1).unwrap();
        let table = init_table(&vocab, 12, EmbeddingMode::PreFixed, Some(&pre), 5).unwrap();
        assert!(!table.trainable);
        for i in 0..vocab.len() {
            let token = vocab.token(i);
            assert_eq!(table.vectors.row_slice(i), pre.row_for(token).unwrap());
        }
        let cont = init_table(&vocab, 12, EmbeddingMode::PreCont, Some(&pre), 5).unwrap();
        assert!(cont.trainable);
    }

    #[test]
    fn init_table_dim_mismatch_is_an_error() {
        let corpus = toy_corpus();
        let (pre, vocab) = train_skipgram(&corpus, &small_cfg(3)).unwrap();
        assert!(init_table(&vocab, 7, EmbeddingMode::PreFixed, Some(&pre), 5).is_err());
        assert!(init_table(&vocab, 12, EmbeddingMode::PreCont, None, 5).is_err());
    }

    #[test]
    fn lookup_basics() {
        let corpus = vec![vec!["a".to_string(), "b".to_string()]];
        let vocab = build_vocab(corpus.iter().map(|s| s.as_slice()), 1).unwrap();
        let table = init_table(&vocab, 4, EmbeddingMode::Random, None, 5).unwrap();
        let got = lookup(&table, &[UNK]).unwrap();
        assert_eq!(got[0].data(), table.row(UNK));
        let rep = lookup(&table, &[1, 1]).unwrap();
        assert_eq!(rep[0], rep[1]);
        assert!(lookup(&table, &[99]).is_err());
    }

    #[test]
    fn sing_mode_shares_one_matrix() {
        let corpus = vec![vec!["trump".to_string(), "b".to_string()]];
        let vocab = build_vocab(corpus.iter().map(|s| s.as_slice()), 1).unwrap();
        let table = init_table(&vocab, 4, EmbeddingMode::Random, None, 5).unwrap();
        let set = EmbeddingSet::sing(table);
        assert!(std::ptr::eq(set.tweet_table(), set.target_table()));
        let idx = vocab.get("trump").unwrap();
        assert_eq!(set.tweet_table().row(idx), set.target_table().row(idx));
    }

    #[test]
    fn embedding_file_roundtrip_is_exact() {
        let corpus = toy_corpus();
        let (pre, _) = train_skipgram(&corpus, &small_cfg(9)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vectors.txt");
        save_embeddings(&pre, &path).unwrap();
        let loaded = load_embeddings(&path).unwrap();
        assert_eq!(loaded.tokens, pre.tokens);
        assert_eq!(loaded.vectors, pre.vectors);
        // save -> load -> save is byte identical
        let path2 = dir.path().join("vectors2.txt");
        save_embeddings(&loaded, &path2).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }
}
