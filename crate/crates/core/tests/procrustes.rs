mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use vocadapt_core::projection::{apply_orthogonal, compute_shared, fit_orthogonal, OrthogonalMap};

fn procrustes_objective(t: &[Vec<f64>], s: &[Vec<f64>], w: &DMatrix<f64>) -> f64 {
    let mapped = common::rotate(t, w);
    mapped
        .iter()
        .zip(s)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>())
        .sum()
}

#[test]
fn recovers_known_rotation() {
    let mut rng = common::rng(8);
    let r = common::random_orthogonal(&mut rng, 8);
    let t_rows = common::random_rows(&mut rng, 100, 8);
    let s_rows = common::rotate(&t_rows, &r);
    let toks = common::tokens("w", 100);
    let t = common::matrix(&toks, &t_rows);
    let s = common::matrix(&toks, &s_rows);
    let shared = compute_shared(t.vocab(), s.vocab()).unwrap();
    let w = fit_orthogonal(&shared, &t, &s, false).unwrap();
    assert!((w.matrix() - &r).norm() <= 1e-5);
    assert!(w.orthogonality_error() <= 1e-6);

    // normalized anchors recover the same rotation
    let w = fit_orthogonal(&shared, &t, &s, true).unwrap();
    assert!((w.matrix() - &r).norm() <= 1e-5);
}

#[test]
fn beats_random_orthogonal_search() {
    let mut rng = common::rng(25);
    let t_rows = common::random_rows(&mut rng, 25, 4);
    let s_rows = common::random_rows(&mut rng, 25, 4);
    let toks = common::tokens("a", 25);
    let t = common::matrix(&toks, &t_rows);
    let s = common::matrix(&toks, &s_rows);
    let shared = compute_shared(t.vocab(), s.vocab()).unwrap();
    let w = fit_orthogonal(&shared, &t, &s, false).unwrap();
    let fitted = procrustes_objective(&t_rows, &s_rows, w.matrix());
    for _ in 0..1000 {
        let candidate = common::random_orthogonal(&mut rng, 4);
        assert!(fitted <= procrustes_objective(&t_rows, &s_rows, &candidate) + 1e-12);
    }
}

#[test]
fn only_anchor_rows_drive_the_fit() {
    // rotated anchors plus unrelated non-shared rows
    let mut rng = common::rng(11);
    let r = common::random_orthogonal(&mut rng, 3);
    let anchors = common::random_rows(&mut rng, 10, 3);
    let extra = common::random_rows(&mut rng, 5, 3);
    let mut t_tokens = common::tokens("s", 10);
    t_tokens.extend(common::tokens("t_only", 5));
    let t = common::matrix(&t_tokens, &[anchors.clone(), extra].concat());
    let mut s_tokens = common::tokens("s", 10);
    s_tokens.push("src_only".into());
    let mut s_rows = common::rotate(&anchors, &r);
    s_rows.push(vec![5.0, 5.0, 5.0]);
    let s = common::matrix(&s_tokens, &s_rows);
    let shared = compute_shared(t.vocab(), s.vocab()).unwrap();
    assert_eq!(shared.len(), 10);
    let w = fit_orthogonal(&shared, &t, &s, false).unwrap();
    assert!((w.matrix() - &r).norm() <= 1e-8);
    let mapped = apply_orthogonal(&w, &t).unwrap();
    assert_eq!(mapped.vocab(), t.vocab());
}

proptest! {
    #[test]
    fn fitted_map_is_orthogonal(seed in any::<u64>(), d in 1usize..10, n in 1usize..30) {
        let mut rng = common::rng(seed);
        let toks = common::tokens("x", n);
        let t = common::matrix(&toks, &common::random_rows(&mut rng, n, d));
        let s = common::matrix(&toks, &common::random_rows(&mut rng, n, d));
        let shared = compute_shared(t.vocab(), s.vocab()).unwrap();
        let w = fit_orthogonal(&shared, &t, &s, false).unwrap();
        prop_assert!(w.orthogonality_error() <= 1e-5);
    }

    #[test]
    fn application_preserves_norms(seed in any::<u64>(), d in 1usize..10) {
        let mut rng = common::rng(seed);
        let map = OrthogonalMap::new(common::random_orthogonal(&mut rng, d)).unwrap();
        let toks = common::tokens("x", 20);
        let t = common::matrix(&toks, &common::random_rows(&mut rng, 20, d));
        let out = apply_orthogonal(&map, &t).unwrap();
        for (a, b) in t.rows().zip(out.rows()) {
            let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!((na - nb).abs() <= 1e-9);
        }
    }
}
