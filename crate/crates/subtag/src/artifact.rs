//! Versioned model container with exact round-trip guarantees.
//!
//! The file is a UTF-8 text header (format version, configuration, all
//! vocabularies, the compiled lexicon, and one name/shape line per
//! parameter) followed by a single binary block of raw little-endian
//! 64-bit floats holding every tensor in declared order. The version line
//! is checked before anything else is parsed; every declared shape and the
//! total payload length are verified before a model is constructed, so a
//! truncated or oversized file never yields a partial model.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use subtag_core::crf::TagSet;
use subtag_core::featurize::{ByteCodec, CharVocab, Featurizer, PhonemeLexicon, WordVocab};
use subtag_core::model::{Model, ModelConfig, ModelParams, UnitSet, VocabSizes};
use subtag_core::rng::seeded;
use subtag_core::tensor::Tensor;

use crate::error::FormatError;

pub const FORMAT_VERSION_LINE: &str = "subtag-model v1";

pub fn model_to_bytes(model: &Model) -> Vec<u8> {
    let mut header = String::new();
    let line = |s: &str, header: &mut String| {
        header.push_str(s);
        header.push('\n');
    };
    line(FORMAT_VERSION_LINE, &mut header);

    line("[config]", &mut header);
    let cfg = &model.config;
    let _ = writeln!(header, "units = {}", cfg.units);
    let _ = writeln!(header, "word_embeddings = {}", cfg.use_word_embeddings);
    let _ = writeln!(header, "subword_embed_dim = {}", cfg.subword_embed_dim);
    let _ = writeln!(header, "subword_hidden_dim = {}", cfg.subword_hidden_dim);
    let _ = writeln!(header, "word_embed_dim = {}", cfg.word_embed_dim);
    let _ = writeln!(header, "word_hidden_dim = {}", cfg.word_hidden_dim);

    let labels = model.tags.labels();
    let _ = writeln!(header, "[tags {}]", labels.len());
    for label in labels {
        line(label, &mut header);
    }

    let chars = model.featurizer.chars.chars();
    let _ = writeln!(header, "[chars {}]", chars.len());
    for &c in chars {
        let _ = writeln!(header, "U+{:04X}", c as u32);
    }

    let tokens = model.featurizer.lexicon.tokens();
    let _ = writeln!(header, "[phoneme_tokens {}]", tokens.len());
    for t in tokens {
        line(t, &mut header);
    }

    let entries: Vec<(&str, Vec<&str>)> = model.featurizer.lexicon.entries().collect();
    let _ = writeln!(header, "[lexicon {}]", entries.len());
    for (word, seq) in &entries {
        let _ = writeln!(header, "{word}\t{}", seq.join(" "));
    }

    let words = model.featurizer.words.words();
    let _ = writeln!(header, "[words {}]", words.len());
    for w in words {
        line(w, &mut header);
    }

    let named = model.params.named();
    let _ = writeln!(header, "[params {}]", named.len());
    let mut payload: Vec<u8> = Vec::new();
    for (name, tensor) in &named {
        let shape: Vec<String> = tensor.shape().iter().map(usize::to_string).collect();
        let _ = writeln!(header, "{name}\t{}", shape.join(","));
        for v in tensor.data() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    let _ = writeln!(header, "[binary {}]", payload.len());

    let mut out = header.into_bytes();
    out.extend_from_slice(&payload);
    out
}

struct Lines<'a> {
    bytes: &'a [u8],
    offset: usize,
    line_no: usize,
    path: &'a str,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<&'a str, FormatError> {
        if self.offset >= self.bytes.len() {
            return Err(FormatError::Truncated(format!(
                "{}: header ends at line {}",
                self.path, self.line_no
            )));
        }
        let rest = &self.bytes[self.offset..];
        let end = rest.iter().position(|&b| b == b'\n').ok_or_else(|| {
            FormatError::Truncated(format!("{}: unterminated header line", self.path))
        })?;
        let line = std::str::from_utf8(&rest[..end]).map_err(|_| {
            FormatError::parse(self.path, self.line_no + 1, "header is not UTF-8")
        })?;
        self.offset += end + 1;
        self.line_no += 1;
        Ok(line)
    }

    fn expect_section(&mut self, name: &str) -> Result<usize, FormatError> {
        let line_no = self.line_no + 1;
        let line = self.next_line()?;
        parse_section(line)
            .filter(|(n, _)| *n == name)
            .map(|(_, count)| count)
            .ok_or_else(|| {
                FormatError::parse(self.path, line_no, format!("expected [{name} N], got '{line}'"))
            })
    }
}

fn parse_section(line: &str) -> Option<(&str, usize)> {
    let inner = line.strip_prefix('[')?.strip_suffix(']')?;
    let (name, count) = inner.split_once(' ')?;
    Some((name, count.parse().ok()?))
}

pub fn model_from_bytes(bytes: &[u8], path: &str) -> Result<Model, FormatError> {
    let mut lines = Lines {
        bytes,
        offset: 0,
        line_no: 0,
        path,
    };

    let version = lines.next_line()?;
    if version != FORMAT_VERSION_LINE {
        return Err(FormatError::UnknownVersion(version.to_string()));
    }

    let config_header = lines.next_line()?;
    if config_header != "[config]" {
        return Err(FormatError::parse(path, lines.line_no, "expected [config]"));
    }
    let mut cfg = ModelConfig::default();
    loop {
        let line_no = lines.line_no + 1;
        let line = lines.next_line()?;
        if let Some((name, count)) = parse_section(line) {
            if name != "tags" {
                return Err(FormatError::parse(path, line_no, "expected [tags N]"));
            }
            let mut labels = Vec::with_capacity(count);
            for _ in 0..count {
                labels.push(lines.next_line()?.to_string());
            }
            let tags = TagSet::from_ordered(labels)?;
            return finish_model(bytes, lines, cfg, tags);
        }
        let (key, value) = line
            .split_once(" = ")
            .ok_or_else(|| FormatError::parse(path, line_no, "expected 'key = value'"))?;
        let bad = |what: &str| FormatError::parse(path, line_no, format!("bad {what} '{value}'"));
        match key {
            "units" => cfg.units = UnitSet::parse(value).map_err(|_| bad("units"))?,
            "word_embeddings" => {
                cfg.use_word_embeddings = value.parse().map_err(|_| bad("bool"))?
            }
            "subword_embed_dim" => cfg.subword_embed_dim = value.parse().map_err(|_| bad("dim"))?,
            "subword_hidden_dim" => {
                cfg.subword_hidden_dim = value.parse().map_err(|_| bad("dim"))?
            }
            "word_embed_dim" => cfg.word_embed_dim = value.parse().map_err(|_| bad("dim"))?,
            "word_hidden_dim" => cfg.word_hidden_dim = value.parse().map_err(|_| bad("dim"))?,
            other => {
                return Err(FormatError::parse(path, line_no, format!("unknown key '{other}'")))
            }
        }
    }
}

fn finish_model(
    bytes: &[u8],
    mut lines: Lines<'_>,
    cfg: ModelConfig,
    tags: TagSet,
) -> Result<Model, FormatError> {
    let path = lines.path.to_string();

    let n = lines.expect_section("chars")?;
    let mut chars = Vec::with_capacity(n);
    for _ in 0..n {
        let line_no = lines.line_no + 1;
        let line = lines.next_line()?;
        let c = line
            .strip_prefix("U+")
            .and_then(|h| u32::from_str_radix(h, 16).ok())
            .and_then(char::from_u32)
            .ok_or_else(|| FormatError::parse(&path, line_no, format!("bad character '{line}'")))?;
        chars.push(c);
    }
    let char_vocab = CharVocab::from_sorted_chars(chars)?;

    let n = lines.expect_section("phoneme_tokens")?;
    let mut tokens = Vec::with_capacity(n);
    for _ in 0..n {
        tokens.push(lines.next_line()?.to_string());
    }

    let n = lines.expect_section("lexicon")?;
    let mut entries = Vec::with_capacity(n);
    for _ in 0..n {
        let line_no = lines.line_no + 1;
        let line = lines.next_line()?;
        let (word, seq) = line
            .split_once('\t')
            .ok_or_else(|| FormatError::parse(&path, line_no, "expected 'word<TAB>tokens'"))?;
        let seq: Vec<String> = seq.split(' ').map(str::to_string).collect();
        entries.push((word.to_string(), seq));
    }
    let lexicon = PhonemeLexicon::from_marked(tokens, entries)?;

    let n = lines.expect_section("words")?;
    let mut words = Vec::with_capacity(n);
    for _ in 0..n {
        words.push(lines.next_line()?.to_string());
    }
    let word_vocab = WordVocab::from_sorted_words(words)?;

    let featurizer = Featurizer {
        chars: char_vocab,
        lexicon,
        bytes: ByteCodec,
        words: word_vocab,
    };
    let sizes = VocabSizes::of(&featurizer);

    let n = lines.expect_section("params")?;
    let mut declared: Vec<(String, Vec<usize>)> = Vec::with_capacity(n);
    for _ in 0..n {
        let line_no = lines.line_no + 1;
        let line = lines.next_line()?;
        let (name, shape) = line
            .split_once('\t')
            .ok_or_else(|| FormatError::parse(&path, line_no, "expected 'name<TAB>shape'"))?;
        let dims: Vec<usize> = shape
            .split(',')
            .map(|d| {
                d.parse::<usize>()
                    .map_err(|_| FormatError::parse(&path, line_no, format!("bad shape '{shape}'")))
            })
            .collect::<Result<_, _>>()?;
        declared.push((name.to_string(), dims));
    }

    let payload_len = lines.expect_section("binary")?;
    let payload = &bytes[lines.offset..];

    // Every declared tensor must match the layout the configuration and
    // vocabularies imply, in order.
    let mut template = ModelParams::init(&cfg, &sizes, tags.len(), &mut seeded(0));
    {
        let expected = template.named();
        if expected.len() != declared.len() {
            return Err(FormatError::TensorShape {
                name: format!("{} declared tensors", declared.len()),
                expected: format!("{} tensors", expected.len()),
                got: String::from("different parameter inventory"),
            });
        }
        for ((name, dims), (expected_name, tensor)) in declared.iter().zip(&expected) {
            if name != expected_name || dims != tensor.shape() {
                return Err(FormatError::TensorShape {
                    name: name.clone(),
                    expected: format!("{expected_name} {:?}", tensor.shape()),
                    got: format!("{name} {dims:?}"),
                });
            }
        }
    }
    let expected_bytes: usize = declared
        .iter()
        .map(|(_, dims)| dims.iter().product::<usize>() * 8)
        .sum();
    if payload_len != expected_bytes {
        return Err(FormatError::Truncated(format!(
            "{path}: payload declares {payload_len} bytes, parameters require {expected_bytes}"
        )));
    }
    if payload.len() < payload_len {
        return Err(FormatError::Truncated(format!(
            "{path}: payload has {} of {payload_len} bytes",
            payload.len()
        )));
    }
    if payload.len() > payload_len {
        return Err(FormatError::TrailingData);
    }

    let mut offset = 0usize;
    for (name, tensor) in template.named_mut() {
        let n_bytes = tensor.numel() * 8;
        let chunk = &payload[offset..offset + n_bytes];
        offset += n_bytes;
        let data: Vec<f64> = chunk
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
            .collect();
        *tensor = Tensor::from_vec(tensor.shape().to_vec(), data).map_err(|_| {
            FormatError::TensorShape {
                name: name.clone(),
                expected: String::from("finite values"),
                got: String::from("non-finite payload"),
            }
        })?;
    }

    Ok(Model {
        config: cfg,
        featurizer,
        tags,
        params: template,
    })
}

pub fn save_model(model: &Model, path: &Path) -> Result<(), FormatError> {
    Ok(fs::write(path, model_to_bytes(model))?)
}

pub fn load_model(path: &Path) -> Result<Model, FormatError> {
    let bytes = fs::read(path)?;
    model_from_bytes(&bytes, &path.display().to_string())
}
