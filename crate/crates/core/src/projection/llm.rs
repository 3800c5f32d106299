//! Locally Linear Mapping.
//!
//! Each target-domain vector is reconstructed as an affine combination of
//! its nearest shared anchors in the target space; the same weights are
//! then applied to the anchors' source-space vectors.

use std::cmp::Ordering;

use rayon::prelude::*;

use super::anchors::SharedAnchorSet;
use super::ProjectionConfig;
use crate::embedding::{dot, norm, EmbeddingMatrix};
use crate::error::{Error, Result};

/// Gram conditioning applied when neighbors outnumber dimensions and no
/// explicit strength is configured.
pub const DEFAULT_GRAM_EPSILON: f64 = 1e-3;

/// Relative pivot size below which a Gram system is treated as singular.
const PIVOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    /// Position in the [`SharedAnchorSet`].
    pub anchor: usize,
    pub target_index: usize,
    pub cosine: f64,
}

/// Reconstruction weights for one target token.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalReconstruction {
    pub token_index: usize,
    /// Positions in the [`SharedAnchorSet`], nearest first.
    pub neighbors: Vec<usize>,
    pub weights: Vec<f64>,
}

struct AnchorNorms {
    norms: Vec<f64>,
}

impl AnchorNorms {
    fn new(target: &EmbeddingMatrix, shared: &SharedAnchorSet) -> Self {
        AnchorNorms {
            norms: shared
                .entries()
                .iter()
                .map(|a| norm(target.row(a.target_index)))
                .collect(),
        }
    }

    fn eligible_for(&self, shared: &SharedAnchorSet, token_index: usize) -> usize {
        shared
            .entries()
            .iter()
            .zip(&self.norms)
            .filter(|(a, &n)| a.target_index != token_index && n > 0.0)
            .count()
    }
}

/// Up to `k` shared anchors nearest to `token_index` by cosine in the
/// target space, excluding the token itself and zero-norm anchors. Ties
/// go to the lower target index.
pub fn knn_shared(
    token_index: usize,
    target: &EmbeddingMatrix,
    shared: &SharedAnchorSet,
    k: usize,
) -> Result<Vec<Neighbor>> {
    knn_with_norms(token_index, target, shared, &AnchorNorms::new(target, shared), k)
}

fn knn_with_norms(
    token_index: usize,
    target: &EmbeddingMatrix,
    shared: &SharedAnchorSet,
    anchor_norms: &AnchorNorms,
    k: usize,
) -> Result<Vec<Neighbor>> {
    if shared.is_empty() {
        return Err(Error::NoSharedAnchors);
    }
    let query = target.row(token_index);
    let query_norm = norm(query);
    if query_norm == 0.0 {
        return Err(Error::ZeroVector {
            token: Some(target.vocab().token(token_index).to_owned()),
        });
    }
    let mut candidates: Vec<Neighbor> = shared
        .entries()
        .iter()
        .zip(&anchor_norms.norms)
        .enumerate()
        .filter(|(_, (a, &n))| a.target_index != token_index && n > 0.0)
        .map(|(anchor, (a, &n))| Neighbor {
            anchor,
            target_index: a.target_index,
            cosine: (dot(query, target.row(a.target_index)) / (query_norm * n)).clamp(-1.0, 1.0),
        })
        .collect();

    let order = |a: &Neighbor, b: &Neighbor| {
        b.cosine
            .partial_cmp(&a.cosine)
            .unwrap_or(Ordering::Equal)
            .then(a.target_index.cmp(&b.target_index))
    };
    if k < candidates.len() {
        candidates.select_nth_unstable_by(k, order);
        candidates.truncate(k);
    }
    candidates.sort_by(order);
    Ok(candidates)
}

/// Solves `min ||query - sum_j a_j n_j||^2` subject to `sum_j a_j = 1`.
///
/// With `z_j = n_j - query` and Gram matrix `G_jl = z_j . z_l`, the
/// Lagrange conditions are `G a = mu 1`, `1^T a = 1`; for invertible `G`
/// this is `a = G^-1 1 / (1^T G^-1 1)`. The bordered system is solved
/// directly so that a singular `G` with a unique constrained minimizer
/// (e.g. a query collinear with two neighbors) still has a solution.
/// When `gram_epsilon > 0`, `G` is conditioned as
/// `G + gram_epsilon * tr(G) / k * I` first. Weights may be negative.
pub fn solve_local_weights(query: &[f64], neighbors: &[&[f64]], gram_epsilon: f64) -> Result<Vec<f64>> {
    let k = neighbors.len();
    if k == 0 {
        return Err(Error::InvalidConfig("at least one neighbor is required".into()));
    }
    if gram_epsilon.is_nan() || gram_epsilon < 0.0 {
        return Err(Error::InvalidConfig("gram_epsilon must be non-negative".into()));
    }
    if let Some(bad) = neighbors.iter().find(|n| n.len() != query.len()) {
        return Err(Error::dims("local reconstruction neighbor", query.len(), bad.len()));
    }
    if k == 1 {
        return Ok(vec![1.0]);
    }

    let diffs: Vec<Vec<f64>> = neighbors
        .iter()
        .map(|n| n.iter().zip(query).map(|(a, b)| a - b).collect())
        .collect();
    let mut gram = vec![0.0; k * k];
    for j in 0..k {
        for l in j..k {
            let g = dot(&diffs[j], &diffs[l]);
            gram[j * k + l] = g;
            gram[l * k + j] = g;
        }
    }
    let trace: f64 = (0..k).map(|j| gram[j * k + j]).sum();
    if trace == 0.0 {
        // Every neighbor coincides with the query; any affine weights
        // reconstruct it exactly.
        return Ok(vec![1.0 / k as f64; k]);
    }

    // Scale G to unit mean diagonal so the pivot tolerance is unit-free;
    // the minimizer is unchanged.
    let scale = trace / k as f64;
    let n = k + 1;
    let mut system = vec![0.0; n * n];
    for j in 0..k {
        for l in 0..k {
            system[j * n + l] = gram[j * k + l] / scale;
        }
        system[j * n + j] += gram_epsilon;
        system[j * n + k] = 1.0;
        system[k * n + j] = 1.0;
    }
    let mut rhs = vec![0.0; n];
    rhs[k] = 1.0;

    let solution = solve_dense(&mut system, n, rhs).ok_or(Error::SingularGram { neighbors: k })?;
    let mut weights = solution[..k].to_vec();
    let total: f64 = weights.iter().sum();
    if total == 0.0 || !total.is_finite() {
        return Err(Error::SingularGram { neighbors: k });
    }
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(weights)
}

/// Gaussian elimination with partial pivoting on a row-major `n x n`
/// system. Returns `None` when a pivot falls below the relative tolerance.
fn solve_dense(a: &mut [f64], n: usize, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    let tol = PIVOT_TOLERANCE * scale;
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs()))
            .expect("non-empty range");
        if a[pivot_row * n + col].abs() <= tol {
            return None;
        }
        if pivot_row != col {
            for c in 0..n {
                a.swap(col * n + c, pivot_row * n + c);
            }
            b.swap(col, pivot_row);
        }
        let pivot = a[col * n + col];
        for r in col + 1..n {
            let factor = a[r * n + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                a[r * n + c] -= factor * a[col * n + c];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|c| a[r * n + c] * x[c]).sum();
        x[r] = (b[r] - tail) / a[r * n + r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// `sum_j a_j S[n_j]`, accumulated in neighbor order.
pub fn reconstruct_row(
    recon: &LocalReconstruction,
    shared: &SharedAnchorSet,
    source: &EmbeddingMatrix,
) -> Vec<f64> {
    let mut out = vec![0.0; source.dim()];
    for (&anchor, &w) in recon.neighbors.iter().zip(&recon.weights) {
        let row = source.row(shared.get(anchor).source_index);
        for (o, s) in out.iter_mut().zip(row) {
            *o += w * s;
        }
    }
    out
}

fn effective_epsilon(config: &ProjectionConfig, neighbors: usize, dim: usize) -> f64 {
    match config.gram_epsilon {
        Some(eps) => eps,
        None if neighbors > dim => DEFAULT_GRAM_EPSILON,
        None => 0.0,
    }
}

/// Projects every target token into the source space and returns the
/// per-token reconstructions alongside the projected matrix.
pub fn llm_project_detailed(
    target: &EmbeddingMatrix,
    source: &EmbeddingMatrix,
    shared: &SharedAnchorSet,
    config: &ProjectionConfig,
) -> Result<(EmbeddingMatrix, Vec<LocalReconstruction>)> {
    config.validate()?;
    let dim = target.dim();
    if source.dim() != dim {
        return Err(Error::dims("locally linear mapping (source dim)", dim, source.dim()));
    }
    if shared.is_empty() {
        return Err(Error::NoSharedAnchors);
    }
    let anchor_norms = AnchorNorms::new(target, shared);

    let clamped = (0..target.len())
        .filter(|&i| anchor_norms.eligible_for(shared, i) < config.k)
        .count();
    if clamped > 0 {
        log::info!(
            "k={} exceeds the eligible anchors for {clamped} token(s); using all eligible anchors",
            config.k
        );
    }

    let results: Vec<(Vec<f64>, LocalReconstruction)> = (0..target.len())
        .into_par_iter()
        .map(|i| {
            let token = target.vocab().token(i);
            let neighbors = knn_with_norms(i, target, shared, &anchor_norms, config.k)
                .map_err(|e| e.at_token(token))?;
            if neighbors.is_empty() {
                // A lone anchor has nothing to reconstruct from but itself.
                let own = shared
                    .entries()
                    .iter()
                    .position(|a| a.target_index == i)
                    .ok_or_else(|| Error::NoSharedAnchors.at_token(token))?;
                let recon = LocalReconstruction {
                    token_index: i,
                    neighbors: vec![own],
                    weights: vec![1.0],
                };
                return Ok((reconstruct_row(&recon, shared, source), recon));
            }
            let rows: Vec<&[f64]> = neighbors.iter().map(|n| target.row(n.target_index)).collect();
            let eps = effective_epsilon(config, neighbors.len(), dim);
            let weights = solve_local_weights(target.row(i), &rows, eps)
                .map_err(|e| e.at_token(token))?;
            let recon = LocalReconstruction {
                token_index: i,
                neighbors: neighbors.iter().map(|n| n.anchor).collect(),
                weights,
            };
            Ok((reconstruct_row(&recon, shared, source), recon))
        })
        .collect::<Result<_>>()?;

    let mut data = Vec::with_capacity(target.len() * dim);
    let mut recons = Vec::with_capacity(target.len());
    for (row, recon) in results {
        data.extend_from_slice(&row);
        recons.push(recon);
    }
    Ok((EmbeddingMatrix::new(target.vocab().clone(), dim, data)?, recons))
}

pub fn llm_project(
    target: &EmbeddingMatrix,
    source: &EmbeddingMatrix,
    shared: &SharedAnchorSet,
    config: &ProjectionConfig,
) -> Result<EmbeddingMatrix> {
    llm_project_detailed(target, source, shared, config).map(|(emb, _)| emb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::compute_shared;
    use crate::vocab::Vocabulary;

    fn matrix(tokens: &[&str], rows: &[Vec<f64>]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(Vocabulary::new(tokens.iter().copied()).unwrap(), rows).unwrap()
    }

    #[test]
    fn knn_orders_by_cosine() {
        let t = matrix(
            &["q", "a", "b", "c"],
            &[vec![1.0, 0.0], vec![1.0, 0.01], vec![0.0, 1.0], vec![-1.0, 0.0]],
        );
        let s = matrix(&["a", "b", "c"], &[vec![0.0; 2], vec![0.0; 2], vec![0.0; 2]]);
        let shared = compute_shared(t.vocab(), s.vocab()).unwrap();
        let nn = knn_shared(0, &t, &shared, 2).unwrap();
        let idx: Vec<_> = nn.iter().map(|n| n.target_index).collect();
        assert_eq!(idx, vec![1, 2]);
    }

    #[test]
    fn knn_excludes_self() {
        let t = matrix(&["a", "b", "c"], &[vec![1.0, 0.0], vec![0.9, 0.1], vec![0.0, 1.0]]);
        let shared = compute_shared(t.vocab(), t.vocab()).unwrap();
        let nn = knn_shared(0, &t, &shared, 5).unwrap();
        assert_eq!(nn.len(), 2);
        assert!(nn.iter().all(|n| n.target_index != 0));
    }

    #[test]
    fn knn_tie_break_by_index() {
        let t = matrix(
            &["q", "a", "b"],
            &[vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, -1.0]],
        );
        let shared = compute_shared(t.vocab(), t.vocab()).unwrap();
        let nn = knn_shared(0, &t, &shared, 1).unwrap();
        assert_eq!(nn[0].target_index, 1);
        let t = matrix(
            &["q", "b", "a"],
            &[vec![1.0, 0.0], vec![1.0, -1.0], vec![1.0, 1.0]],
        );
        let shared = compute_shared(t.vocab(), t.vocab()).unwrap();
        assert_eq!(knn_shared(0, &t, &shared, 1).unwrap()[0].target_index, 1);
    }

    #[test]
    fn knn_skips_zero_anchor_and_rejects_zero_query() {
        let t = matrix(&["q", "z", "a"], &[vec![1.0, 0.0], vec![0.0, 0.0], vec![0.0, 1.0]]);
        let shared = compute_shared(t.vocab(), t.vocab()).unwrap();
        let nn = knn_shared(0, &t, &shared, 3).unwrap();
        assert_eq!(nn.iter().map(|n| n.target_index).collect::<Vec<_>>(), vec![2]);
        assert!(matches!(knn_shared(1, &t, &shared, 3), Err(Error::ZeroVector { .. })));
    }

    #[test]
    fn midpoint_weights() {
        let w = solve_local_weights(&[0.5, 0.5], &[&[1.0, 0.0], &[0.0, 1.0]], 0.0).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-12 && (w[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn exact_neighbor_limit() {
        let w = solve_local_weights(&[1.0, 2.0], &[&[1.0, 2.0], &[3.0, -1.0]], 1e-8).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-6, "{w:?}");
        assert!(w[1].abs() < 1e-6);
    }

    #[test]
    fn singular_without_conditioning() {
        let err = solve_local_weights(&[0.0, 0.0], &[&[1.0, 1.0], &[1.0, 1.0]], 0.0).unwrap_err();
        assert!(matches!(err, Error::SingularGram { neighbors: 2 }));
        assert!(err.to_string().contains("gram_epsilon > 0"));
        let w = solve_local_weights(&[0.0, 0.0], &[&[1.0, 1.0], &[1.0, 1.0]], 1e-3).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_neighbor_weight_is_one() {
        assert_eq!(solve_local_weights(&[3.0], &[&[1.0]], 0.0).unwrap(), vec![1.0]);
    }

    #[test]
    fn affine_weights_may_be_negative() {
        // query lies outside the segment, on the far side of neighbor 1
        let w = solve_local_weights(&[2.0, 0.0], &[&[1.0, 0.0], &[0.0, 0.0]], 0.0).unwrap();
        assert!((w[0] - 2.0).abs() < 1e-12 && (w[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_anchor_copies_source_row() {
        let t = matrix(&["a", "x", "y"], &[vec![1.0, 0.0], vec![0.3, 0.7], vec![-1.0, 2.0]]);
        let s = matrix(&["q", "a"], &[vec![9.0, 9.0], vec![0.25, -4.0]]);
        let shared = compute_shared(t.vocab(), s.vocab()).unwrap();
        let cfg = ProjectionConfig::default();
        let out = llm_project(&t, &s, &shared, &cfg).unwrap();
        assert_eq!(out.row(1), &[0.25, -4.0]);
        assert_eq!(out.row(2), &[0.25, -4.0]);
        assert_eq!(out.row(0), &[0.25, -4.0]);
    }
}
