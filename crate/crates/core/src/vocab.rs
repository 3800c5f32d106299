//! Token vocabularies and the plain-text vocabulary file format.
//!
//! A vocabulary file holds one entry per line, `<token>` or
//! `<token> <count>`. Tokens equal to one of [`DEFAULT_SPECIALS`] are
//! marked special on load.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Padding, begin/end of sentence and unknown markers.
pub const DEFAULT_SPECIALS: [&str; 4] = ["<pad>", "<s>", "</s>", "<unk>"];

/// Ordered list of unique tokens with frequencies and special markers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    frequencies: Vec<u64>,
    special: BTreeSet<usize>,
}

impl Vocabulary {
    /// Builds a vocabulary with all frequencies set to zero.
    pub fn new<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::with_frequencies(tokens.into_iter().map(|t| (t, 0)))
    }

    pub fn with_frequencies<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, u64)>,
        S: Into<String>,
    {
        let mut tokens = Vec::new();
        let mut frequencies = Vec::new();
        let mut index = HashMap::new();
        for (token, freq) in entries {
            let token = token.into();
            if index.contains_key(&token) {
                return Err(Error::DuplicateToken { token });
            }
            index.insert(token.clone(), tokens.len());
            tokens.push(token);
            frequencies.push(freq);
        }
        Ok(Vocabulary {
            tokens,
            index,
            frequencies,
            special: BTreeSet::new(),
        })
    }

    /// Marks the given indices as special tokens.
    pub fn with_specials<I: IntoIterator<Item = usize>>(mut self, indices: I) -> Result<Self> {
        for idx in indices {
            if idx >= self.tokens.len() {
                return Err(Error::InvalidConfig(format!(
                    "special index {idx} out of range for vocabulary of size {}",
                    self.tokens.len()
                )));
            }
            self.special.insert(idx);
        }
        Ok(self)
    }

    /// Marks every token found in [`DEFAULT_SPECIALS`] as special.
    pub fn with_default_specials(self) -> Self {
        let found: Vec<usize> = DEFAULT_SPECIALS
            .iter()
            .filter_map(|s| self.index_of(s))
            .collect();
        self.with_specials(found).expect("indices come from the vocabulary")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, idx: usize) -> &str {
        &self.tokens[idx]
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn frequency(&self, idx: usize) -> u64 {
        self.frequencies[idx]
    }

    pub fn frequencies(&self) -> &[u64] {
        &self.frequencies
    }

    pub fn is_special(&self, idx: usize) -> bool {
        self.special.contains(&idx)
    }

    /// Special token indices in ascending order.
    pub fn specials(&self) -> impl Iterator<Item = usize> + '_ {
        self.special.iter().copied()
    }
}

/// Reads a vocabulary file (`<token>` or `<token> <count>` per line).
pub fn read_vocab(path: impl AsRef<Path>) -> Result<Vocabulary> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_vocab(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn parse_vocab<R: BufRead>(reader: R) -> Result<Vocabulary> {
    let mut entries: Vec<(String, u64)> = Vec::new();
    let mut seen = HashMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<vocab>", e))?;
        let lineno = lineno + 1;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else {
            continue;
        };
        let count = match fields.next() {
            Some(c) => c
                .parse::<u64>()
                .map_err(|_| Error::parse(lineno, format!("invalid count {c:?}")))?,
            None => 0,
        };
        if fields.next().is_some() {
            return Err(Error::parse(lineno, "expected `<token> [count]`"));
        }
        if seen.insert(token.to_owned(), lineno).is_some() {
            return Err(Error::parse(lineno, format!("duplicate token {token:?}")));
        }
        entries.push((token.to_owned(), count));
    }
    Ok(Vocabulary::with_frequencies(entries)?.with_default_specials())
}

/// Writes `<token> <count>` lines.
pub fn write_vocab(vocab: &Vocabulary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_vocab_to(vocab, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_vocab_to<W: Write>(vocab: &Vocabulary, out: &mut W) -> std::io::Result<()> {
    for (token, freq) in vocab.tokens.iter().zip(&vocab.frequencies) {
        writeln!(out, "{token} {freq}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_matches_position() {
        let v = Vocabulary::new(["a", "b", "c"]).unwrap();
        for (i, t) in v.tokens().iter().enumerate() {
            assert_eq!(v.index_of(t), Some(i));
        }
        assert_eq!(v.frequency(1), 0);
    }

    #[test]
    fn duplicate_rejected() {
        let err = Vocabulary::new(["a", "a"]).unwrap_err();
        assert!(matches!(err, Error::DuplicateToken { token } if token == "a"));
    }

    #[test]
    fn special_out_of_range() {
        let v = Vocabulary::new(["a"]).unwrap();
        assert!(v.with_specials([1]).is_err());
    }

    #[test]
    fn parse_marks_defaults() {
        let text = "<pad> 0\n<s>\n</s> 0\n<unk> 0\nhello 12\n";
        let v = parse_vocab(text.as_bytes()).unwrap();
        assert_eq!(v.len(), 5);
        assert_eq!(v.specials().collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        assert_eq!(v.frequency(4), 12);
    }

    #[test]
    fn parse_rejects_bad_count() {
        let err = parse_vocab("a x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn write_then_parse() {
        let v = Vocabulary::with_frequencies([("<unk>", 0), ("x", 3)])
            .unwrap()
            .with_default_specials();
        let mut buf = Vec::new();
        write_vocab_to(&v, &mut buf).unwrap();
        assert_eq!(parse_vocab(buf.as_slice()).unwrap(), v);
    }
}
