//! Model checkpoint container: a versioned text manifest (architecture,
//! dims, sharing, class order, vocabulary) followed by named parameter
//! blocks as raw little-endian f64, in declaration order. Round-trips are
//! bit-exact.

use super::lstm::LstmParams;
use super::model::{HeadParams, Model, Variant};
use crate::embed::{EmbeddingMode, EmbeddingSet, EmbeddingTable, Sharing};
use crate::error::{Error, Result};
use crate::numcore::Mat;
use crate::textprep::Vocab;
use std::collections::HashMap;
use std::path::Path;

const MAGIC: &str = "stance-model v1";

fn serial_block_specs(
    variant: Variant,
    input_dim: usize,
    hidden_dim: usize,
    sharing: Sharing,
    head_bias: bool,
    vocab_len: usize,
) -> Vec<(String, usize, usize)> {
    let (d, k) = (input_dim, hidden_dim);
    let mut specs = Vec::new();
    match sharing {
        Sharing::Sing => specs.push(("emb".to_string(), vocab_len, d)),
        Sharing::Sep => {
            specs.push(("emb_target".to_string(), vocab_len, d));
            specs.push(("emb_tweet".to_string(), vocab_len, d));
        }
    }
    for role in variant.lstm_roles() {
        for suffix in LstmParams::BLOCK_SUFFIXES {
            let (r, c) = if suffix.starts_with('w') {
                (k, d + k)
            } else {
                (k, 1)
            };
            specs.push((format!("{role}.{suffix}"), r, c));
        }
    }
    let m = match variant {
        Variant::BiCond => 2 * k,
        Variant::Bowv => 2 * d,
        _ => k,
    };
    match variant {
        Variant::Concat => {
            specs.push(("head.w_target".to_string(), 3, k));
            specs.push(("head.w_tweet".to_string(), 3, k));
        }
        _ => specs.push(("head.w".to_string(), 3, m)),
    }
    if head_bias {
        specs.push(("head.b".to_string(), 3, 1));
    }
    specs
}

fn serial_blocks(model: &Model) -> Vec<(&str, &Mat)> {
    let mut blocks: Vec<(&str, &Mat)> = Vec::new();
    match model.embeddings.sharing {
        Sharing::Sing => blocks.push(("emb", &model.embeddings.tweet.vectors)),
        Sharing::Sep => {
            blocks.push((
                "emb_target",
                &model.embeddings.target.as_ref().unwrap().vectors,
            ));
            blocks.push(("emb_tweet", &model.embeddings.tweet.vectors));
        }
    }
    for lstm in &model.lstms {
        blocks.push(("w_i", &lstm.w_i));
        blocks.push(("w_f", &lstm.w_f));
        blocks.push(("w_o", &lstm.w_o));
        blocks.push(("w_c", &lstm.w_c));
        blocks.push(("b_i", &lstm.b_i));
        blocks.push(("b_f", &lstm.b_f));
        blocks.push(("b_o", &lstm.b_o));
        blocks.push(("b_c", &lstm.b_c));
    }
    match &model.head {
        HeadParams::Single { w, b } => {
            blocks.push(("head.w", w));
            if let Some(b) = b {
                blocks.push(("head.b", b));
            }
        }
        HeadParams::Pair { w_target, w_tweet, b } => {
            blocks.push(("head.w_target", w_target));
            blocks.push(("head.w_tweet", w_tweet));
            if let Some(b) = b {
                blocks.push(("head.b", b));
            }
        }
    }
    blocks
}

pub fn model_to_bytes(model: &Model) -> Vec<u8> {
    let specs = serial_block_specs(
        model.variant,
        model.input_dim,
        model.hidden_dim,
        model.embeddings.sharing,
        model.head_bias,
        model.vocab.len(),
    );
    let mut header = String::new();
    header.push_str(MAGIC);
    header.push('\n');
    header.push_str(&format!("variant = {}\n", model.variant.as_str()));
    header.push_str(&format!("input_dim = {}\n", model.input_dim));
    header.push_str(&format!("hidden_dim = {}\n", model.hidden_dim));
    header.push_str(&format!(
        "sharing = {}\n",
        model.embeddings.sharing.as_str()
    ));
    header.push_str(&format!(
        "embedding_mode = {}\n",
        model.embeddings.tweet.mode.as_str()
    ));
    header.push_str(&format!("head_bias = {}\n", model.head_bias));
    header.push_str(&format!("carry_hidden = {}\n", model.carry_hidden));
    header.push_str(&format!("l2 = {:.16e}\n", model.l2));
    header.push_str("classes = FAVOR,AGAINST,NONE\n");
    header.push_str(&format!("vocab_size = {}\n", model.vocab.len()));
    header.push_str(&format!("blocks = {}\n", specs.len()));
    header.push_str("[vocab]\n");
    for token in model.vocab.tokens() {
        header.push_str(token);
        header.push('\n');
    }
    header.push_str("[blocks]\n");
    for (name, r, c) in &specs {
        header.push_str(&format!("{name} {r} {c}\n"));
    }
    header.push_str("[data]\n");

    let mut bytes = header.into_bytes();
    for (_, mat) in serial_blocks(model) {
        for v in mat.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    bytes
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_bytes(model)).map_err(|e| Error::io(path, e))
}

struct LineReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    line_no: usize,
}

impl<'a> LineReader<'a> {
    fn next_line(&mut self) -> Result<&'a str> {
        if self.pos >= self.bytes.len() {
            return Err(Error::ModelFile(format!(
                "unexpected end of file at line {}",
                self.line_no
            )));
        }
        let rest = &self.bytes[self.pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::ModelFile("missing newline in header".into()))?;
        let line = std::str::from_utf8(&rest[..end])
            .map_err(|_| Error::ModelFile(format!("non-UTF-8 header line {}", self.line_no)))?;
        self.pos += end + 1;
        self.line_no += 1;
        Ok(line)
    }
}

fn expect_kv<'a>(line: &'a str, key: &str) -> Result<&'a str> {
    let (k, v) = line
        .split_once(" = ")
        .ok_or_else(|| Error::ModelFile(format!("malformed manifest line {line:?}")))?;
    if k != key {
        return Err(Error::ModelFile(format!(
            "expected manifest key {key:?}, found {k:?}"
        )));
    }
    Ok(v)
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<Model> {
    let mut r = LineReader {
        bytes,
        pos: 0,
        line_no: 1,
    };
    let magic = r.next_line()?;
    if magic != MAGIC {
        return Err(Error::ModelFile(format!(
            "bad magic {magic:?}, expected {MAGIC:?}"
        )));
    }
    let variant = Variant::parse(expect_kv(r.next_line()?, "variant")?)?;
    let input_dim: usize = expect_kv(r.next_line()?, "input_dim")?
        .parse()
        .map_err(|_| Error::ModelFile("bad input_dim".into()))?;
    let hidden_dim: usize = expect_kv(r.next_line()?, "hidden_dim")?
        .parse()
        .map_err(|_| Error::ModelFile("bad hidden_dim".into()))?;
    let sharing = Sharing::parse(expect_kv(r.next_line()?, "sharing")?)?;
    let mode = EmbeddingMode::parse(expect_kv(r.next_line()?, "embedding_mode")?)?;
    let head_bias: bool = expect_kv(r.next_line()?, "head_bias")?
        .parse()
        .map_err(|_| Error::ModelFile("bad head_bias".into()))?;
    let carry_hidden: bool = expect_kv(r.next_line()?, "carry_hidden")?
        .parse()
        .map_err(|_| Error::ModelFile("bad carry_hidden".into()))?;
    let l2: f64 = expect_kv(r.next_line()?, "l2")?
        .parse()
        .map_err(|_| Error::ModelFile("bad l2".into()))?;
    let classes = expect_kv(r.next_line()?, "classes")?;
    if classes != "FAVOR,AGAINST,NONE" {
        return Err(Error::ModelFile(format!(
            "unsupported class order {classes:?}"
        )));
    }
    let vocab_size: usize = expect_kv(r.next_line()?, "vocab_size")?
        .parse()
        .map_err(|_| Error::ModelFile("bad vocab_size".into()))?;
    let block_count: usize = expect_kv(r.next_line()?, "blocks")?
        .parse()
        .map_err(|_| Error::ModelFile("bad block count".into()))?;

    if r.next_line()? != "[vocab]" {
        return Err(Error::ModelFile("missing [vocab] section".into()));
    }
    let mut tokens = Vec::with_capacity(vocab_size);
    for _ in 0..vocab_size {
        tokens.push(r.next_line()?.to_string());
    }
    let vocab = Vocab::from_tokens(tokens)?;

    if r.next_line()? != "[blocks]" {
        return Err(Error::ModelFile("missing [blocks] section".into()));
    }
    let expected = serial_block_specs(variant, input_dim, hidden_dim, sharing, head_bias, vocab_size);
    if block_count != expected.len() {
        return Err(Error::ModelFile(format!(
            "{block_count} blocks in file, architecture requires {}",
            expected.len()
        )));
    }
    let mut file_specs = Vec::with_capacity(block_count);
    for _ in 0..block_count {
        let line = r.next_line()?;
        let mut parts = line.split(' ');
        let name = parts
            .next()
            .ok_or_else(|| Error::ModelFile(format!("bad block line {line:?}")))?;
        let rows: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::ModelFile(format!("bad block line {line:?}")))?;
        let cols: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::ModelFile(format!("bad block line {line:?}")))?;
        file_specs.push((name.to_string(), rows, cols));
    }
    for (got, want) in file_specs.iter().zip(&expected) {
        if got != want {
            return Err(Error::ModelFile(format!(
                "block {:?} is {}x{}, expected block {:?} of {}x{}",
                got.0, got.1, got.2, want.0, want.1, want.2
            )));
        }
    }

    if r.next_line()? != "[data]" {
        return Err(Error::ModelFile("missing [data] section".into()));
    }
    let data = &bytes[r.pos..];
    let total_entries: usize = expected.iter().map(|(_, r, c)| r * c).sum();
    if data.len() != total_entries * 8 {
        return Err(Error::ModelFile(format!(
            "data section has {} bytes, expected {} (truncated or trailing bytes)",
            data.len(),
            total_entries * 8
        )));
    }

    let mut offset = 0;
    let mut mats: HashMap<String, Mat> = HashMap::new();
    for (name, rows, cols) in &expected {
        let n = rows * cols;
        let mut values = Vec::with_capacity(n);
        for i in 0..n {
            let start = offset + i * 8;
            let mut buf = [0u8; 8];
            buf.copy_from_slice(&data[start..start + 8]);
            values.push(f64::from_le_bytes(buf));
        }
        offset += n * 8;
        mats.insert(name.clone(), Mat::from_vec(*rows, *cols, values)?);
    }

    let take = |mats: &mut HashMap<String, Mat>, name: &str| -> Result<Mat> {
        mats.remove(name)
            .ok_or_else(|| Error::ModelFile(format!("missing block {name:?}")))
    };

    let trainable = mode != EmbeddingMode::PreFixed;
    let embeddings = match sharing {
        Sharing::Sing => EmbeddingSet::sing(EmbeddingTable {
            dim: input_dim,
            vectors: take(&mut mats, "emb")?,
            trainable,
            mode,
        }),
        Sharing::Sep => EmbeddingSet::sep(
            EmbeddingTable {
                dim: input_dim,
                vectors: take(&mut mats, "emb_tweet")?,
                trainable,
                mode,
            },
            EmbeddingTable {
                dim: input_dim,
                vectors: take(&mut mats, "emb_target")?,
                trainable,
                mode,
            },
        )?,
    };

    let mut lstms = Vec::new();
    for role in variant.lstm_roles() {
        lstms.push(LstmParams {
            w_i: take(&mut mats, &format!("{role}.w_i"))?,
            w_f: take(&mut mats, &format!("{role}.w_f"))?,
            w_o: take(&mut mats, &format!("{role}.w_o"))?,
            w_c: take(&mut mats, &format!("{role}.w_c"))?,
            b_i: take(&mut mats, &format!("{role}.b_i"))?,
            b_f: take(&mut mats, &format!("{role}.b_f"))?,
            b_o: take(&mut mats, &format!("{role}.b_o"))?,
            b_c: take(&mut mats, &format!("{role}.b_c"))?,
            input_dim,
            hidden_dim,
        });
    }

    let bias = if head_bias {
        Some(take(&mut mats, "head.b")?)
    } else {
        None
    };
    let head = match variant {
        Variant::Concat => HeadParams::Pair {
            w_target: take(&mut mats, "head.w_target")?,
            w_tweet: take(&mut mats, "head.w_tweet")?,
            b: bias,
        },
        _ => HeadParams::Single {
            w: take(&mut mats, "head.w")?,
            b: bias,
        },
    };

    Ok(Model {
        variant,
        input_dim,
        hidden_dim,
        head_bias,
        carry_hidden,
        l2,
        vocab,
        embeddings,
        lstms,
        head,
    })
}

pub fn load_model(path: &Path) -> Result<Model> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::model::{init_model, EncodedPair, ModelInit, ALL_VARIANTS};
    use crate::textprep::build_vocab;
    use crate::util::seeded_rng;

    fn sample_model(variant: Variant, sharing: Sharing) -> Model {
        let corpus: Vec<Vec<String>> =
            vec![(0..8).map(|i| format!("w{i}")).collect::<Vec<_>>()];
        let vocab = build_vocab(corpus.iter().map(|s| s.as_slice()), 1).unwrap();
        let mut rng = seeded_rng(77, 0);
        let table = |rng: &mut rand_chacha::ChaCha8Rng| EmbeddingTable {
            dim: 5,
            vectors: Mat::uniform(vocab.len(), 5, -0.1, 0.1, rng),
            trainable: true,
            mode: EmbeddingMode::Random,
        };
        let embeddings = match sharing {
            Sharing::Sing => EmbeddingSet::sing(table(&mut rng)),
            Sharing::Sep => EmbeddingSet::sep(table(&mut rng), table(&mut rng)).unwrap(),
        };
        let init = ModelInit {
            variant,
            input_dim: 5,
            hidden_dim: 4,
            head_bias: true,
            carry_hidden: false,
            forget_bias: 1.0,
            l2: 0.0,
        };
        init_model(&init, vocab, embeddings, &mut rng).unwrap()
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        for variant in ALL_VARIANTS {
            let model = sample_model(variant, Sharing::Sing);
            let bytes = model_to_bytes(&model);
            let loaded = model_from_bytes(&bytes).unwrap();
            assert_eq!(model_to_bytes(&loaded), bytes, "{variant:?}");
        }
        let sep = sample_model(Variant::BiCond, Sharing::Sep);
        let bytes = model_to_bytes(&sep);
        assert_eq!(model_to_bytes(&model_from_bytes(&bytes).unwrap()), bytes);
    }

    #[test]
    fn loaded_model_predicts_identically() {
        let model = sample_model(Variant::BiCond, Sharing::Sing);
        let loaded = model_from_bytes(&model_to_bytes(&model)).unwrap();
        let pair = EncodedPair::new(vec![1, 2], vec![3, 4, 5]).unwrap();
        assert_eq!(
            model.predict_probs(&pair).unwrap(),
            loaded.predict_probs(&pair).unwrap()
        );
    }

    #[test]
    fn truncated_file_is_an_error() {
        let model = sample_model(Variant::TweetOnly, Sharing::Sing);
        let bytes = model_to_bytes(&model);
        let truncated = &bytes[..bytes.len() - 17];
        let err = model_from_bytes(truncated).unwrap_err().to_string();
        assert!(err.contains("truncated") || err.contains("bytes"), "{err}");
    }

    #[test]
    fn foreign_variant_blocks_are_rejected_by_name() {
        // serialize a Concat model, then claim it is TweetOnly
        let model = sample_model(Variant::Concat, Sharing::Sing);
        let bytes = model_to_bytes(&model);
        let text_end = bytes.windows(7).position(|w| w == b"[data]\n").unwrap();
        let header = String::from_utf8(bytes[..text_end].to_vec()).unwrap();
        let patched = header.replace("variant = Concat", "variant = TweetOnly");
        let mut forged = patched.into_bytes();
        forged.extend_from_slice(&bytes[text_end..]);
        let err = model_from_bytes(&forged).unwrap_err().to_string();
        assert!(err.contains("block") || err.contains("blocks"), "{err}");
    }

    #[test]
    fn bad_magic_is_rejected() {
        assert!(model_from_bytes(b"not a model\n").is_err());
    }
}
