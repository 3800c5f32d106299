//! Named-tensor checkpoints and embedding-layer replacement.
//!
//! # File layout
//!
//! ```text
//! magic           8 bytes   "VOCADAPT"
//! version         u32 LE    FORMAT_VERSION
//! manifest_len    u64 LE
//! manifest        UTF-8 JSON, manifest_len bytes
//! payloads        f32 LE tensor data, concatenated in manifest order
//! ```
//!
//! The manifest names the tensors filling each embedding role, whether the
//! decoder output projection is tied to the decoder embedding, the
//! vocabulary files the embedding rows refer to, and every tensor's shape.
//! Tensors without a role are carried as opaque payloads.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::vocab::Vocabulary;

pub const MAGIC: [u8; 8] = *b"VOCADAPT";
pub const FORMAT_VERSION: u32 = 1;

const HEADER_LEN: usize = 8 + 4 + 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let expected = element_count(&shape)?;
        if expected != data.len() {
            return Err(Error::dims("tensor data length", expected, data.len()));
        }
        Ok(Tensor { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Row `i` of a rank-2 tensor.
    pub fn row(&self, i: usize) -> &[f32] {
        let width = self.shape[1];
        &self.data[i * width..(i + 1) * width]
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.data.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    /// Bitwise equality, so NaN payloads compare equal to themselves.
    pub fn bit_eq(&self, other: &Tensor) -> bool {
        self.shape == other.shape
            && self.data.len() == other.data.len()
            && self.data.iter().zip(&other.data).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

fn element_count(shape: &[usize]) -> Result<usize> {
    shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Checkpoint(format!("tensor shape {shape:?} overflows")))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VocabRef {
    pub file: String,
    pub size: usize,
}

/// Role assignments and vocabulary references of a checkpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roles {
    pub encoder_embedding: String,
    pub decoder_embedding: String,
    /// Decoder output projection; equal to `decoder_embedding` when tied.
    pub decoder_output: String,
    pub tied_decoder: bool,
    pub encoder_vocab: VocabRef,
    pub decoder_vocab: VocabRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    #[serde(flatten)]
    pub roles: Roles,
    pub tensors: Vec<TensorSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Encoder,
    Decoder,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Encoder, Side::Decoder];

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Encoder => "encoder",
            Side::Decoder => "decoder",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "encoder" => Ok(Side::Encoder),
            "decoder" => Ok(Side::Decoder),
            other => Err(Error::InvalidConfig(format!(
                "unknown side {other:?} (expected encoder or decoder)"
            ))),
        }
    }
}

/// An immutable named-tensor store with embedding-role metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    roles: Roles,
    tensors: BTreeMap<String, Tensor>,
}

impl Checkpoint {
    /// Assembles a checkpoint without checking role consistency; use
    /// [`validate_checkpoint`] for a full report.
    pub fn new(roles: Roles, tensors: BTreeMap<String, Tensor>) -> Self {
        Checkpoint { roles, tensors }
    }

    pub fn roles(&self) -> &Roles {
        &self.roles
    }

    pub fn tensors(&self) -> &BTreeMap<String, Tensor> {
        &self.tensors
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn embedding_key(&self, side: Side) -> &str {
        match side {
            Side::Encoder => &self.roles.encoder_embedding,
            Side::Decoder => &self.roles.decoder_embedding,
        }
    }

    pub fn vocab_ref(&self, side: Side) -> &VocabRef {
        match side {
            Side::Encoder => &self.roles.encoder_vocab,
            Side::Decoder => &self.roles.decoder_vocab,
        }
    }

    pub fn embedding(&self, side: Side) -> Result<&Tensor> {
        let key = self.embedding_key(side);
        self.tensor(key)
            .ok_or_else(|| Error::Checkpoint(format!("{side} embedding tensor {key:?} is missing")))
    }

    /// The tensor serving as decoder output projection.
    pub fn decoder_output(&self) -> Result<&Tensor> {
        let key = &self.roles.decoder_output;
        self.tensor(key)
            .ok_or_else(|| Error::Checkpoint(format!("decoder output tensor {key:?} is missing")))
    }

    /// Embedding width of one side.
    pub fn embedding_width(&self, side: Side) -> Result<usize> {
        let t = self.embedding(side)?;
        match t.shape() {
            [_, width] => Ok(*width),
            other => Err(Error::Checkpoint(format!(
                "{side} embedding must be rank 2, found shape {other:?}"
            ))),
        }
    }

    /// The side's embedding rows as a matrix over `vocab`.
    pub fn embedding_matrix(&self, side: Side, vocab: &Vocabulary) -> Result<EmbeddingMatrix> {
        let width = self.embedding_width(side)?;
        let t = self.embedding(side)?;
        if t.shape()[0] != vocab.len() {
            return Err(Error::dims(
                format!("{side} embedding rows vs vocabulary size"),
                vocab.len(),
                t.shape()[0],
            ));
        }
        EmbeddingMatrix::new(
            vocab.clone(),
            width,
            t.data().iter().map(|&v| f64::from(v)).collect(),
        )
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            format_version: FORMAT_VERSION,
            roles: self.roles.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|(name, t)| TensorSpec {
                    name: name.clone(),
                    shape: t.shape.clone(),
                })
                .collect(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let manifest = serde_json::to_vec_pretty(&self.manifest()).expect("manifest serializes");
        let payload: usize = self.tensors.values().map(|t| t.data.len() * 4).sum();
        let mut out = Vec::with_capacity(HEADER_LEN + manifest.len() + payload);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
        out.extend_from_slice(&manifest);
        for t in self.tensors.values() {
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// Parses a checkpoint; nothing is returned unless the whole buffer
    /// is consistent.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Checkpoint(format!(
                "truncated header ({} of {HEADER_LEN} bytes)",
                bytes.len()
            )));
        }
        if bytes[..8] != MAGIC {
            return Err(Error::Checkpoint("bad magic bytes".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let manifest_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
        let remaining = (bytes.len() - HEADER_LEN) as u64;
        if manifest_len > remaining {
            return Err(Error::Checkpoint(format!(
                "manifest length {manifest_len} exceeds remaining {remaining} bytes"
            )));
        }
        let manifest_end = HEADER_LEN + manifest_len as usize;
        let manifest: Manifest = serde_json::from_slice(&bytes[HEADER_LEN..manifest_end])
            .map_err(|e| Error::Checkpoint(format!("invalid manifest: {e}")))?;
        if manifest.format_version != version {
            return Err(Error::Checkpoint(format!(
                "manifest version {} disagrees with header version {version}",
                manifest.format_version
            )));
        }

        let mut tensors = BTreeMap::new();
        let mut offset = manifest_end;
        for spec in &manifest.tensors {
            let count = element_count(&spec.shape)?;
            let len = count
                .checked_mul(4)
                .ok_or_else(|| Error::Checkpoint(format!("tensor {:?} too large", spec.name)))?;
            if bytes.len() - offset < len {
                return Err(Error::Checkpoint(format!(
                    "truncated payload for tensor {:?}",
                    spec.name
                )));
            }
            let data = bytes[offset..offset + len]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            offset += len;
            let tensor = Tensor {
                shape: spec.shape.clone(),
                data,
            };
            if tensors.insert(spec.name.clone(), tensor).is_some() {
                return Err(Error::Checkpoint(format!("duplicate tensor {:?}", spec.name)));
            }
        }
        if offset != bytes.len() {
            return Err(Error::Checkpoint(format!(
                "{} trailing bytes after tensor payloads",
                bytes.len() - offset
            )));
        }

        let cp = Checkpoint {
            roles: manifest.roles,
            tensors,
        };
        for key in cp.role_keys() {
            if !cp.tensors.contains_key(key) {
                return Err(Error::Checkpoint(format!(
                    "manifest references missing tensor {key:?}"
                )));
            }
        }
        Ok(cp)
    }

    fn role_keys(&self) -> [&str; 3] {
        [
            &self.roles.encoder_embedding,
            &self.roles.decoder_embedding,
            &self.roles.decoder_output,
        ]
    }
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

pub fn write_checkpoint(cp: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, cp.to_bytes()).map_err(|e| Error::io(path, e))
}

/// Prepends the source vocabulary's special tokens (zero rows) to a
/// projected matrix, skipping any target token spelled like a special.
/// The specials are marked in the returned vocabulary.
pub fn with_source_specials(
    source_vocab: &Vocabulary,
    projected: &EmbeddingMatrix,
) -> Result<EmbeddingMatrix> {
    let specials: Vec<&str> = source_vocab.specials().map(|i| source_vocab.token(i)).collect();
    let mut entries: Vec<(String, u64)> = specials.iter().map(|s| ((*s).to_owned(), 0)).collect();
    let dim = projected.dim();
    let mut data = vec![0.0; specials.len() * dim];
    let vocab = projected.vocab();
    for (i, token) in vocab.tokens().iter().enumerate() {
        if specials.contains(&token.as_str()) {
            continue;
        }
        entries.push((token.clone(), vocab.frequency(i)));
        data.extend_from_slice(projected.row(i));
    }
    let new_vocab = Vocabulary::with_frequencies(entries)?.with_specials(0..specials.len())?;
    EmbeddingMatrix::new(new_vocab, dim, data)
}

/// Returns a copy of `cp` whose `side` embedding is replaced by `new_emb`.
///
/// Rows of special tokens are copied from the old tensor at their index in
/// `source_vocab`. For a tied decoder the single shared tensor is replaced;
/// an untied output projection receives the same rows.
pub fn swap_embeddings(
    cp: &Checkpoint,
    side: Side,
    new_vocab: &Vocabulary,
    new_emb: &EmbeddingMatrix,
    source_vocab: &Vocabulary,
    vocab_file: &str,
) -> Result<Checkpoint> {
    if new_emb.vocab().tokens() != new_vocab.tokens() {
        return Err(Error::InvalidConfig(format!(
            "{side} embedding vocabulary does not match the new vocabulary"
        )));
    }
    let width = cp.embedding_width(side)?;
    if new_emb.dim() != width {
        return Err(Error::dims(format!("{side} embedding width"), width, new_emb.dim()));
    }
    let old = cp.embedding(side)?;
    let old_rows = old.shape()[0];
    if source_vocab.len() != old_rows {
        return Err(Error::dims(
            format!("{side} source vocabulary vs embedding rows"),
            old_rows,
            source_vocab.len(),
        ));
    }

    let missing: Vec<String> = source_vocab
        .specials()
        .map(|i| source_vocab.token(i))
        .filter(|t| !new_vocab.contains(t))
        .map(str::to_owned)
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingSpecials(missing));
    }

    let mut data: Vec<f32> = new_emb.as_slice().iter().map(|&v| v as f32).collect();
    for s in source_vocab.specials() {
        let r = new_vocab
            .index_of(source_vocab.token(s))
            .expect("checked above");
        data[r * width..(r + 1) * width].copy_from_slice(old.row(s));
    }
    let tensor = Tensor::new(vec![new_vocab.len(), width], data)?;

    let mut tensors = cp.tensors.clone();
    let mut roles = cp.roles.clone();
    let vocab_ref = VocabRef {
        file: vocab_file.to_owned(),
        size: new_vocab.len(),
    };
    match side {
        Side::Encoder => {
            tensors.insert(roles.encoder_embedding.clone(), tensor);
            roles.encoder_vocab = vocab_ref;
        }
        Side::Decoder => {
            if !roles.tied_decoder && roles.decoder_output != roles.decoder_embedding {
                tensors.insert(roles.decoder_output.clone(), tensor.clone());
            }
            tensors.insert(roles.decoder_embedding.clone(), tensor);
            roles.decoder_vocab = vocab_ref;
        }
    }
    Ok(Checkpoint { roles, tensors })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    MissingTensor { role: String, key: String },
    TiedKeyMismatch { embedding: String, output: String },
    DataLength { tensor: String, expected: usize, found: usize },
    NotRank2 { tensor: String, shape: Vec<usize> },
    RowCount { tensor: String, rows: usize, vocab_size: usize },
    NonFinite { tensor: String, index: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingTensor { role, key } => {
                write!(f, "{role} tensor {key:?} is missing")
            }
            Violation::TiedKeyMismatch { embedding, output } => write!(
                f,
                "tied decoder but output projection {output:?} differs from embedding {embedding:?}"
            ),
            Violation::DataLength { tensor, expected, found } => {
                write!(f, "tensor {tensor:?} has {found} values, shape implies {expected}")
            }
            Violation::NotRank2 { tensor, shape } => {
                write!(f, "embedding tensor {tensor:?} has shape {shape:?}, expected rank 2")
            }
            Violation::RowCount { tensor, rows, vocab_size } => write!(
                f,
                "tensor {tensor:?} has {rows} rows but its vocabulary has {vocab_size} tokens"
            ),
            Violation::NonFinite { tensor, index } => {
                write!(f, "tensor {tensor:?} has a non-finite value at flat index {index}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            return writeln!(f, "PASS");
        }
        writeln!(f, "FAIL ({} violation(s))", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

pub fn validate_checkpoint(cp: &Checkpoint) -> ValidationReport {
    let mut violations = Vec::new();
    let roles = &cp.roles;

    if roles.tied_decoder && roles.decoder_output != roles.decoder_embedding {
        violations.push(Violation::TiedKeyMismatch {
            embedding: roles.decoder_embedding.clone(),
            output: roles.decoder_output.clone(),
        });
    }

    for (name, t) in &cp.tensors {
        match element_count(&t.shape) {
            Ok(n) if n == t.data.len() => {}
            Ok(n) => violations.push(Violation::DataLength {
                tensor: name.clone(),
                expected: n,
                found: t.data.len(),
            }),
            Err(_) => violations.push(Violation::DataLength {
                tensor: name.clone(),
                expected: usize::MAX,
                found: t.data.len(),
            }),
        }
        if let Some(index) = t.data.iter().position(|v| !v.is_finite()) {
            violations.push(Violation::NonFinite {
                tensor: name.clone(),
                index,
            });
        }
    }

    let embedding_roles = [
        ("encoder embedding", &roles.encoder_embedding, roles.encoder_vocab.size),
        ("decoder embedding", &roles.decoder_embedding, roles.decoder_vocab.size),
        ("decoder output", &roles.decoder_output, roles.decoder_vocab.size),
    ];
    let mut checked: Vec<&str> = Vec::new();
    for (role, key, vocab_size) in embedding_roles {
        let Some(t) = cp.tensors.get(key.as_str()) else {
            violations.push(Violation::MissingTensor {
                role: role.to_owned(),
                key: key.clone(),
            });
            continue;
        };
        if checked.contains(&key.as_str()) {
            continue;
        }
        checked.push(key);
        match t.shape() {
            [rows, _] if *rows != vocab_size => violations.push(Violation::RowCount {
                tensor: key.clone(),
                rows: *rows,
                vocab_size,
            }),
            [_, _] => {}
            shape => violations.push(Violation::NotRank2 {
                tensor: key.clone(),
                shape: shape.to_vec(),
            }),
        }
    }
    ValidationReport { violations }
}

/// Import manifest for third-party checkpoints: role assignments plus one
/// raw little-endian f32 file per tensor, paths relative to the manifest.
#[derive(Debug, Clone, Deserialize)]
pub struct ImportManifest {
    #[serde(flatten)]
    pub roles: Roles,
    pub tensors: Vec<ImportTensor>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImportTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub file: String,
}

/// Builds a checkpoint from an [`ImportManifest`] JSON file.
pub fn import_checkpoint(manifest_path: impl AsRef<Path>) -> Result<Checkpoint> {
    let manifest_path = manifest_path.as_ref();
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: ImportManifest = serde_json::from_str(&text)
        .map_err(|e| Error::Checkpoint(format!("invalid import manifest: {e}")))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut tensors = BTreeMap::new();
    for spec in manifest.tensors {
        let path = base.join(&spec.file);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        if bytes.len() % 4 != 0 {
            return Err(Error::Checkpoint(format!(
                "{}: length {} is not a multiple of 4",
                path.display(),
                bytes.len()
            )));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let tensor = Tensor::new(spec.shape, data).map_err(|e| Error::Checkpoint(format!("tensor {:?}: {e}", spec.name)))?;
        if tensors.insert(spec.name.clone(), tensor).is_some() {
            return Err(Error::Checkpoint(format!("duplicate tensor {:?}", spec.name)));
        }
    }
    let cp = Checkpoint::new(manifest.roles, tensors);
    for key in cp.role_keys() {
        if !cp.tensors.contains_key(key) {
            return Err(Error::Checkpoint(format!(
                "manifest references missing tensor {key:?}"
            )));
        }
    }
    Ok(cp)
}
