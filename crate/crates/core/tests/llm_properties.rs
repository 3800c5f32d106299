mod common;

use proptest::prelude::*;
use vocadapt_core::projection::{
    compute_shared, knn_shared, llm_project, llm_project_detailed, Method, ProjectionConfig,
    SharedAnchorSet,
};
use vocadapt_core::EmbeddingMatrix;

fn llm_config(k: usize, eps: Option<f64>) -> ProjectionConfig {
    ProjectionConfig {
        method: Method::Llm,
        k,
        gram_epsilon: eps,
        ..ProjectionConfig::default()
    }
}

/// Target space of `n` tokens, the first `n_shared` of which also exist in a
/// source space equal to the target rotated by a random orthogonal matrix.
fn rotated_pair(seed: u64, n: usize, n_shared: usize, d: usize) -> (EmbeddingMatrix, EmbeddingMatrix, Vec<Vec<f64>>) {
    let mut rng = common::rng(seed);
    let r = common::random_orthogonal(&mut rng, d);
    let t_rows = common::random_rows(&mut rng, n, d);
    let truth = common::rotate(&t_rows, &r);
    let t_tokens = common::tokens("w", n);
    let t = common::matrix(&t_tokens, &t_rows);
    let mut s_tokens = t_tokens[..n_shared].to_vec();
    let mut s_rows = truth[..n_shared].to_vec();
    // source-only tokens never act as anchors
    s_tokens.push("source_only".into());
    s_rows.push(vec![3.0; d]);
    let s = common::matrix(&s_tokens, &s_rows);
    (t, s, truth)
}

#[test]
fn identical_spaces_map_through_unchanged() {
    let mut rng = common::rng(1);
    let d = 4;
    let rows = common::random_rows(&mut rng, 30, d);
    let toks = common::tokens("t", 30);
    let t = common::matrix(&toks, &rows);
    let shared = compute_shared(t.vocab(), t.vocab()).unwrap();
    let (out, recons) = llm_project_detailed(&t, &t, &shared, &llm_config(d + 1, Some(0.0))).unwrap();
    for (i, recon) in recons.iter().enumerate() {
        // reconstruction residual in the target space is zero
        let mut residual = t.row(i).to_vec();
        for (&a, &w) in recon.neighbors.iter().zip(&recon.weights) {
            for (r, v) in residual.iter_mut().zip(t.row(shared.get(a).target_index)) {
                *r -= w * v;
            }
        }
        assert!(residual.iter().all(|r| r.abs() < 1e-9));
        assert!(common::max_abs_diff(out.row(i), t.row(i)) <= 1e-4);
    }
}

#[test]
fn rotation_equivariance_with_extra_neighbors() {
    let d = 6;
    let (t, s, truth) = rotated_pair(42, 80, 40, d);
    let shared = compute_shared(t.vocab(), s.vocab()).unwrap();
    assert_eq!(shared.len(), 40);
    let out = llm_project(&t, &s, &shared, &llm_config(d + 2, Some(1e-9))).unwrap();
    for i in 0..t.len() {
        assert!(common::cosine(out.row(i), &truth[i]) >= 0.999);
        assert!(common::max_abs_diff(out.row(i), &truth[i]) <= 1e-4, "row {i}");
    }
}

#[test]
fn reconstruction_identity_is_bit_exact() {
    let (t, s, _) = rotated_pair(7, 50, 25, 4);
    let shared = compute_shared(t.vocab(), s.vocab()).unwrap();
    let (out, recons) = llm_project_detailed(&t, &s, &shared, &llm_config(10, None)).unwrap();
    for recon in &recons {
        let mut row = vec![0.0; s.dim()];
        for (&a, &w) in recon.neighbors.iter().zip(&recon.weights) {
            let src = s.row(shared.entries()[a].source_index);
            for j in 0..row.len() {
                row[j] += w * src[j];
            }
        }
        assert_eq!(out.row(recon.token_index), row.as_slice());
        assert!((recon.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn shared_tokens_exclude_themselves() {
    let (t, s, _) = rotated_pair(9, 40, 20, 3);
    let shared = compute_shared(t.vocab(), s.vocab()).unwrap();
    let (_, recons) = llm_project_detailed(&t, &s, &shared, &llm_config(5, None)).unwrap();
    for recon in &recons {
        for &a in &recon.neighbors {
            assert_ne!(shared.get(a).target_index, recon.token_index);
        }
        assert!(!recon.neighbors.is_empty() && recon.neighbors.len() <= 5);
    }
}

#[test]
fn k_clamped_to_available_anchors() {
    let (t, s, _) = rotated_pair(5, 12, 3, 3);
    let shared = compute_shared(t.vocab(), s.vocab()).unwrap();
    let (_, recons) = llm_project_detailed(&t, &s, &shared, &llm_config(10, None)).unwrap();
    assert_eq!(recons[0].neighbors.len(), 2);
    assert_eq!(recons[5].neighbors.len(), 3);
}

#[test]
fn deterministic() {
    let (t, s, _) = rotated_pair(13, 200, 100, 8);
    let shared = compute_shared(t.vocab(), s.vocab()).unwrap();
    let cfg = llm_config(10, None);
    let a = llm_project(&t, &s, &shared, &cfg).unwrap();
    let b = llm_project(&t, &s, &shared, &cfg).unwrap();
    assert!(a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn knn_returns_at_most_k_sorted() {
    let (t, s, _) = rotated_pair(21, 60, 30, 5);
    let shared: SharedAnchorSet = compute_shared(t.vocab(), s.vocab()).unwrap();
    let nn = knn_shared(45, &t, &shared, 7).unwrap();
    assert_eq!(nn.len(), 7);
    assert!(nn.windows(2).all(|w| w[0].cosine >= w[1].cosine));
    // brute-force check: nothing outside the list beats the last entry
    let last = nn.last().unwrap().cosine;
    for a in shared.entries() {
        if nn.iter().any(|n| n.target_index == a.target_index) {
            continue;
        }
        assert!(common::cosine(t.row(45), t.row(a.target_index)) <= last);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn permutation_invariant(seed in any::<u64>(), rot in 1usize..29) {
        let (t, s, _) = rotated_pair(seed, 30, 15, 4);
        let cfg = llm_config(6, None);
        let shared = compute_shared(t.vocab(), s.vocab()).unwrap();
        let base = llm_project(&t, &s, &shared, &cfg).unwrap();

        let order: Vec<usize> = (0..t.len()).map(|i| (i + rot) % t.len()).collect();
        let toks: Vec<String> = order.iter().map(|&i| t.vocab().token(i).to_owned()).collect();
        let rows: Vec<Vec<f64>> = order.iter().map(|&i| t.row(i).to_vec()).collect();
        let t2 = common::matrix(&toks, &rows);
        let shared2 = compute_shared(t2.vocab(), s.vocab()).unwrap();
        let permuted = llm_project(&t2, &s, &shared2, &cfg).unwrap();
        for tok in t.vocab().tokens() {
            prop_assert!(common::max_abs_diff(base.row_of(tok).unwrap(), permuted.row_of(tok).unwrap()) <= 1e-9);
        }
    }

    #[test]
    fn rotation_equivariance_property(seed in any::<u64>(), d in 2usize..6) {
        let (t, s, truth) = rotated_pair(seed, 40, 25, d);
        let shared = compute_shared(t.vocab(), s.vocab()).unwrap();
        let out = llm_project(&t, &s, &shared, &llm_config(d + 1, Some(0.0))).unwrap();
        for i in 0..t.len() {
            prop_assert!(common::max_abs_diff(out.row(i), &truth[i]) <= 1e-4);
        }
    }
}
