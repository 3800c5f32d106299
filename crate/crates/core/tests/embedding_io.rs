mod common;

use proptest::prelude::*;
use vocadapt_core::embedding::{load_embeddings, save_embeddings};
use vocadapt_core::{cosine_similarity, EmbeddingMatrix, Vocabulary};

#[test]
fn file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("emb.txt");
    let emb = EmbeddingMatrix::from_rows(
        Vocabulary::new(["a", "b"]).unwrap(),
        &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
    )
    .unwrap();
    save_embeddings(&emb, &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "2 3\na 1 0 0\nb 0 1 0\n");
    assert_eq!(load_embeddings(&path).unwrap(), emb);
}

#[test]
fn missing_file_is_io_error() {
    let err = load_embeddings("/nonexistent/emb.txt").unwrap_err();
    assert!(err.is_io());
}

proptest! {
    #[test]
    fn save_load_within_tolerance(
        rows in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 3), 0..20),
    ) {
        let tokens = common::tokens("tok", rows.len());
        let vocab = Vocabulary::new(tokens.clone()).unwrap();
        let emb = EmbeddingMatrix::new(vocab, 3, rows.concat()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.txt");
        save_embeddings(&emb, &path).unwrap();
        let back = load_embeddings(&path).unwrap();
        prop_assert_eq!(back.vocab().tokens(), tokens.as_slice());
        for (a, b) in back.as_slice().iter().zip(emb.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn cosine_symmetric_and_scale_invariant(
        a in prop::collection::vec(-10.0f64..10.0, 4),
        b in prop::collection::vec(-10.0f64..10.0, 4),
        c in 1e-3f64..1e3,
    ) {
        prop_assume!(a.iter().any(|v| v.abs() > 1e-3) && b.iter().any(|v| v.abs() > 1e-3));
        let ab = cosine_similarity(&a, &b).unwrap();
        let ba = cosine_similarity(&b, &a).unwrap();
        let scaled: Vec<f64> = a.iter().map(|v| v * c).collect();
        let cb = cosine_similarity(&scaled, &b).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12);
        prop_assert!((ab - cb).abs() <= 1e-12);
        prop_assert!((-1.0..=1.0).contains(&ab));
    }
}
