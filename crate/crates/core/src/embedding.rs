//! Embedding matrices, cosine similarity and the word2vec text format.
//!
//! The text format starts with a `<count> <dim>` header, followed by one
//! `<token> v1 ... v_dim` line per row. Values are written with 8
//! significant digits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::vocab::Vocabulary;

/// A `|vocab| x dim` matrix of finite reals; row `i` belongs to token `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    vocab: Vocabulary,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    /// Builds a matrix from row-major data, checking shape and finiteness.
    pub fn new(vocab: Vocabulary, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("embedding dimension must be positive".into()));
        }
        if data.len() != vocab.len() * dim {
            return Err(Error::dims(
                "embedding data length",
                vocab.len() * dim,
                data.len(),
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("row {} ({:?})", pos / dim, vocab.token(pos / dim)),
            });
        }
        Ok(EmbeddingMatrix { vocab, dim, data })
    }

    pub fn from_rows(vocab: Vocabulary, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::dims("embedding row", dim, bad.len()));
        }
        Self::new(vocab, dim, rows.concat())
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn row(&self, idx: usize) -> &[f64] {
        &self.data[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn row_of(&self, token: &str) -> Option<&[f64]> {
        self.vocab.index_of(token).map(|i| self.row(i))
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// Row-major backing storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_parts(self) -> (Vocabulary, usize, Vec<f64>) {
        (self.vocab, self.dim, self.data)
    }

    /// Same rows, every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.vocab.clone(),
            self.dim,
            self.data.iter().map(|v| v * factor).collect(),
        )
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dims("cosine similarity", a.len(), b.len()));
    }
    let (na2, nb2) = (dot(a, a), dot(b, b));
    if na2 == 0.0 || nb2 == 0.0 {
        return Err(Error::ZeroVector { token: None });
    }
    Ok(cosine_from_parts(dot(a, b), na2, nb2))
}

/// `ab / sqrt(aa * bb)` clamped; identical inputs give exactly 1.
pub(crate) fn cosine_from_parts(ab: f64, aa: f64, bb: f64) -> f64 {
    (ab / (aa * bb).sqrt()).clamp(-1.0, 1.0)
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_word2vec_text(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Parses word2vec text. Tokens get frequency 0 and none are special.
pub fn read_word2vec_text<R: BufRead>(reader: R) -> Result<EmbeddingMatrix> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => line.map_err(|e| Error::io("<embeddings>", e))?,
        None => return Err(Error::parse(1, "missing `<count> <dim>` header")),
    };
    let mut fields = header.split_whitespace();
    let (count, dim) = match (fields.next(), fields.next(), fields.next()) {
        (Some(c), Some(d), None) => {
            let count = c
                .parse::<usize>()
                .map_err(|_| Error::parse(1, format!("invalid count {c:?}")))?;
            let dim = d
                .parse::<usize>()
                .map_err(|_| Error::parse(1, format!("invalid dimension {d:?}")))?;
            (count, dim)
        }
        _ => return Err(Error::parse(1, "expected `<count> <dim>` header")),
    };
    if dim == 0 {
        return Err(Error::parse(1, "dimension must be positive"));
    }

    let mut tokens: Vec<String> = Vec::with_capacity(count);
    let mut seen = std::collections::HashMap::with_capacity(count);
    let mut data = Vec::with_capacity(count * dim);
    for (offset, line) in lines.enumerate() {
        let lineno = offset + 2;
        let line = line.map_err(|e| Error::io("<embeddings>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        if tokens.len() == count {
            return Err(Error::parse(lineno, format!("more rows than the declared {count}")));
        }
        let mut fields = line.split_whitespace();
        let token = fields.next().expect("non-empty line has a field");
        if seen.insert(token.to_owned(), lineno).is_some() {
            return Err(Error::parse(lineno, format!("duplicate token {token:?}")));
        }
        let start = data.len();
        for field in fields {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::parse(lineno, format!("invalid number {field:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(lineno, format!("non-finite value {field:?}")));
            }
            data.push(v);
        }
        let found = data.len() - start;
        if found != dim {
            return Err(Error::parse(
                lineno,
                format!("row length {found} != dim {dim}"),
            ));
        }
        tokens.push(token.to_owned());
    }
    if tokens.len() != count {
        return Err(Error::parse(
            tokens.len() + 2,
            format!("expected {count} rows, found {}", tokens.len()),
        ));
    }
    EmbeddingMatrix::new(Vocabulary::new(tokens)?, dim, data)
}

pub fn save_embeddings(emb: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    check_tokens_writable(emb.vocab())?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_rows(emb, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_word2vec_text<W: Write>(emb: &EmbeddingMatrix, out: &mut W) -> Result<()> {
    check_tokens_writable(emb.vocab())?;
    write_rows(emb, out).map_err(|e| Error::io("<embeddings>", e))
}

fn check_tokens_writable(vocab: &Vocabulary) -> Result<()> {
    for token in vocab.tokens() {
        if token.is_empty() {
            return Err(Error::InvalidToken {
                token: token.clone(),
                reason: "empty tokens cannot be written",
            });
        }
        if token.chars().any(char::is_whitespace) {
            return Err(Error::InvalidToken {
                token: token.clone(),
                reason: "whitespace inside tokens is not supported by word2vec text",
            });
        }
    }
    Ok(())
}

fn write_rows<W: Write>(emb: &EmbeddingMatrix, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{} {}", emb.len(), emb.dim())?;
    let mut line = String::new();
    for (token, row) in emb.vocab().tokens().iter().zip(emb.rows()) {
        line.clear();
        line.push_str(token);
        for &v in row {
            line.push(' ');
            line.push_str(&format_value(v));
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

const SIGNIFICANT_DIGITS: i32 = 8;

/// Formats with 8 significant digits, plain decimal for moderate
/// magnitudes and exponent notation otherwise.
pub(crate) fn format_value(v: f64) -> String {
    if v == 0.0 {
        return "0".to_owned();
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-5..SIGNIFICANT_DIGITS).contains(&exp) {
        return format!("{:.*e}", (SIGNIFICANT_DIGITS - 1) as usize, v);
    }
    let decimals = (SIGNIFICANT_DIGITS - 1 - exp).max(0) as usize;
    let mut s = format!("{v:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".to_owned();
    }
    s
}
