use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::vocab::Vocabulary;

/// A token present in both vocabularies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Anchor {
    pub token: String,
    pub target_index: usize,
    pub source_index: usize,
}

/// Tokens shared by the target-domain and source-model vocabularies,
/// ordered by target index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharedAnchorSet {
    entries: Vec<Anchor>,
}

impl SharedAnchorSet {
    pub fn entries(&self) -> &[Anchor] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize) -> &Anchor {
        &self.entries[i]
    }

    /// Anchors for an explicit token list (e.g. an anchor file). Every
    /// token must be present in both vocabularies.
    pub fn from_tokens<I, S>(tokens: I, target: &Vocabulary, source: &Vocabulary) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut seen = HashSet::new();
        let mut entries = Vec::new();
        for token in tokens {
            let token = token.as_ref();
            if !seen.insert(token.to_owned()) {
                continue;
            }
            let target_index = target
                .index_of(token)
                .ok_or_else(|| Error::UnknownToken(token.to_owned()))?;
            let source_index = source
                .index_of(token)
                .ok_or_else(|| Error::UnknownToken(token.to_owned()))?;
            entries.push(Anchor {
                token: token.to_owned(),
                target_index,
                source_index,
            });
        }
        entries.sort_by_key(|a| a.target_index);
        Self::from_entries(entries)
    }

    fn from_entries(entries: Vec<Anchor>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::NoSharedAnchors);
        }
        Ok(SharedAnchorSet { entries })
    }

    /// Keeps the `n` anchors with the highest target-side frequency
    /// (ties by target index), preserving target order.
    pub fn top_by_frequency(&self, n: usize, target: &Vocabulary) -> Result<Self> {
        let mut ranked: Vec<&Anchor> = self.entries.iter().collect();
        ranked.sort_by(|a, b| {
            target
                .frequency(b.target_index)
                .cmp(&target.frequency(a.target_index))
                .then(a.target_index.cmp(&b.target_index))
        });
        ranked.truncate(n);
        let mut entries: Vec<Anchor> = ranked.into_iter().cloned().collect();
        entries.sort_by_key(|a| a.target_index);
        Self::from_entries(entries)
    }
}

/// Exact string intersection of the two vocabularies, special tokens
/// excluded, in target-vocabulary order.
pub fn compute_shared(target: &Vocabulary, source: &Vocabulary) -> Result<SharedAnchorSet> {
    let entries = target
        .tokens()
        .iter()
        .enumerate()
        .filter(|(i, _)| !target.is_special(*i))
        .filter_map(|(target_index, token)| {
            let source_index = source.index_of(token)?;
            (!source.is_special(source_index)).then(|| Anchor {
                token: token.clone(),
                target_index,
                source_index,
            })
        })
        .collect();
    SharedAnchorSet::from_entries(entries)
}
