//! Small file helpers shared by the subcommands and the pipeline.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Reads a tokenized corpus, one sentence per line.
pub fn read_lines(path: &Path) -> Result<Vec<String>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(text.lines().map(str::to_owned).collect())
}

/// Reads an anchor list: the first field of each line; blank lines and
/// `#` comments are skipped.
pub fn read_anchor_tokens(path: &Path) -> Result<Vec<String>, CliError> {
    Ok(read_lines(path)?
        .into_iter()
        .filter_map(|l| {
            let t = l.split_whitespace().next()?;
            (!t.starts_with('#')).then(|| t.to_owned())
        })
        .collect())
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
