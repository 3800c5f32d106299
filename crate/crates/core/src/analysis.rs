//! Embedding diagnostics: nearest neighbors, semantic shift of shared
//! tokens, and vocabulary overlap.
//!
//! Every report renders as an aligned text table and as JSON lines.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::Serialize;

use crate::embedding::{cosine_from_parts, dot, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::projection::SharedAnchorSet;
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeighborEntry {
    pub token: String,
    pub cosine: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeighborReport {
    pub query: String,
    /// Candidates were limited to shared tokens.
    pub shared_only: bool,
    pub neighbors: Vec<NeighborEntry>,
}

impl NeighborReport {
    pub fn to_table(&self) -> String {
        let scope = if self.shared_only { "shared tokens" } else { "all tokens" };
        let mut out = format!("nearest neighbors of {} ({scope})\n", self.query);
        let width = self
            .neighbors
            .iter()
            .map(|n| n.token.chars().count())
            .max()
            .unwrap_or(5)
            .max(5);
        let _ = writeln!(out, "{:>4}  {:<width$}  {:>8}", "rank", "token", "cosine");
        for (i, n) in self.neighbors.iter().enumerate() {
            let _ = writeln!(out, "{:>4}  {:<width$}  {:>8.4}", i + 1, n.token, n.cosine);
        }
        out
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (i, n) in self.neighbors.iter().enumerate() {
            let record = serde_json::json!({
                "query": self.query,
                "shared_only": self.shared_only,
                "rank": i + 1,
                "token": n.token,
                "cosine": n.cosine,
            });
            out.push_str(&record.to_string());
            out.push('\n');
        }
        out
    }
}

/// Top-`n` tokens by cosine to `token`, the token itself excluded. With
/// `restrict`, only shared tokens are candidates. Ties go to the lower
/// vocabulary index.
pub fn nearest_neighbors_report(
    token: &str,
    emb: &EmbeddingMatrix,
    restrict: Option<&SharedAnchorSet>,
    n: usize,
) -> Result<NeighborReport> {
    let query_index = emb
        .vocab()
        .index_of(token)
        .ok_or_else(|| Error::UnknownToken(token.to_owned()))?;
    let query = emb.row(query_index);
    let qq = dot(query, query);
    if qq == 0.0 {
        return Err(Error::ZeroVector {
            token: Some(token.to_owned()),
        });
    }

    let candidates: Vec<usize> = match restrict {
        Some(shared) => {
            let mut idx: Vec<usize> = shared
                .entries()
                .iter()
                .filter_map(|a| emb.vocab().index_of(&a.token))
                .collect();
            idx.sort_unstable();
            idx.dedup();
            idx
        }
        None => (0..emb.len()).collect(),
    };

    let mut scored: Vec<(usize, f64)> = candidates
        .into_iter()
        .filter(|&i| i != query_index)
        .filter_map(|i| {
            let row = emb.row(i);
            let rr = dot(row, row);
            (rr > 0.0).then(|| (i, cosine_from_parts(dot(query, row), qq, rr)))
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(n);

    Ok(NeighborReport {
        query: token.to_owned(),
        shared_only: restrict.is_some(),
        neighbors: scored
            .into_iter()
            .map(|(i, cosine)| NeighborEntry {
                token: emb.vocab().token(i).to_owned(),
                cosine,
            })
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftEntry {
    pub token: String,
    /// `1 - cosine` between the pre-trained and projected vectors.
    pub shift: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ShiftReport {
    /// Descending by shift.
    pub ranked: Vec<ShiftEntry>,
    /// Tokens with a zero vector on either side.
    pub zero_norm: Vec<String>,
}

impl ShiftReport {
    pub fn to_table(&self) -> String {
        let width = self
            .ranked
            .iter()
            .map(|e| e.token.chars().count())
            .chain(self.zero_norm.iter().map(|t| t.chars().count()))
            .max()
            .unwrap_or(5)
            .max(5);
        let mut out = String::new();
        let _ = writeln!(out, "{:>5}  {:<width$}  {:>10}", "rank", "token", "shift");
        for (i, e) in self.ranked.iter().enumerate() {
            let _ = writeln!(out, "{:>5}  {:<width$}  {:>10.6}", i + 1, e.token, e.shift);
        }
        if !self.zero_norm.is_empty() {
            let _ = writeln!(out, "zero-norm (not ranked): {}", self.zero_norm.join(" "));
        }
        out
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (i, e) in self.ranked.iter().enumerate() {
            let record = serde_json::json!({"rank": i + 1, "token": e.token, "shift": e.shift});
            out.push_str(&record.to_string());
            out.push('\n');
        }
        for t in &self.zero_norm {
            let record = serde_json::json!({"token": t, "shift": null, "zero_norm": true});
            out.push_str(&record.to_string());
            out.push('\n');
        }
        out
    }
}

/// Ranks shared tokens by `1 - cos(S_w, T_w)` between the pre-trained
/// source vectors and the projected target vectors.
pub fn semantic_shift_report(
    shared: &SharedAnchorSet,
    source: &EmbeddingMatrix,
    projected: &EmbeddingMatrix,
) -> Result<ShiftReport> {
    if source.dim() != projected.dim() {
        return Err(Error::dims("semantic shift", source.dim(), projected.dim()));
    }
    let mut report = ShiftReport::default();
    for anchor in shared.entries() {
        let s = source
            .row_of(&anchor.token)
            .ok_or_else(|| Error::UnknownToken(anchor.token.clone()))?;
        let t = projected
            .row_of(&anchor.token)
            .ok_or_else(|| Error::UnknownToken(anchor.token.clone()))?;
        let (ss, tt) = (dot(s, s), dot(t, t));
        if ss == 0.0 || tt == 0.0 {
            report.zero_norm.push(anchor.token.clone());
            continue;
        }
        report.ranked.push(ShiftEntry {
            token: anchor.token.clone(),
            shift: 1.0 - cosine_from_parts(dot(s, t), ss, tt),
        });
    }
    report.ranked.sort_by(|a, b| b.shift.total_cmp(&a.shift));
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapStats {
    pub size_a: usize,
    pub size_b: usize,
    pub intersection: usize,
    pub union: usize,
    pub jaccard: f64,
    pub unique_a: usize,
    pub unique_b: usize,
    /// Distinct tokens of corpus B, when a corpus was supplied.
    pub corpus_types: Option<usize>,
    /// Distinct corpus-B tokens present in vocabulary A.
    pub covered_types: Option<usize>,
    /// `covered_types / corpus_types`.
    pub coverage: Option<f64>,
}

impl OverlapStats {
    pub fn to_table(&self) -> String {
        let mut rows = vec![
            ("|A|", self.size_a.to_string()),
            ("|B|", self.size_b.to_string()),
            ("|A & B|", self.intersection.to_string()),
            ("|A | B|", self.union.to_string()),
            ("jaccard", format!("{:.6}", self.jaccard)),
            ("only in A", self.unique_a.to_string()),
            ("only in B", self.unique_b.to_string()),
        ];
        if let (Some(types), Some(covered), Some(cov)) =
            (self.corpus_types, self.covered_types, self.coverage)
        {
            rows.push(("corpus B types", types.to_string()));
            rows.push(("covered by A", covered.to_string()));
            rows.push(("coverage", format!("{cov:.6}")));
        }
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<16}{v:>12}");
        }
        out
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = serde_json::to_string(self).expect("stats serialize");
        s.push('\n');
        s
    }
}

/// Set statistics between two vocabularies, plus the type coverage of an
/// optional corpus for vocabulary B by vocabulary A.
pub fn vocab_overlap_stats<I, S>(a: &Vocabulary, b: &Vocabulary, corpus_b: Option<I>) -> OverlapStats
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let intersection = a.tokens().iter().filter(|t| b.contains(t)).count();
    let union = a.len() + b.len() - intersection;
    let jaccard = if union == 0 {
        1.0
    } else {
        intersection as f64 / union as f64
    };

    let (corpus_types, covered_types, coverage) = match corpus_b {
        Some(lines) => {
            let mut types: HashSet<String> = HashSet::new();
            for line in lines {
                for token in line.as_ref().split_whitespace() {
                    if !types.contains(token) {
                        types.insert(token.to_owned());
                    }
                }
            }
            let covered = types.iter().filter(|t| a.contains(t)).count();
            let cov = if types.is_empty() {
                0.0
            } else {
                covered as f64 / types.len() as f64
            };
            (Some(types.len()), Some(covered), Some(cov))
        }
        None => (None, None, None),
    };

    OverlapStats {
        size_a: a.len(),
        size_b: b.len(),
        intersection,
        union,
        jaccard,
        unique_a: a.len() - intersection,
        unique_b: b.len() - intersection,
        corpus_types,
        covered_types,
        coverage,
    }
}
