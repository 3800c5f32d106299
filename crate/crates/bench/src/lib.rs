//! Seeded fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vocadapt_core::{EmbeddingMatrix, Vocabulary};

/// Random embeddings for `n` tokens named `{prefix}{i}`.
pub fn random_embeddings(seed: u64, prefix: &str, n: usize, d: usize) -> EmbeddingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = Vocabulary::new((0..n).map(|i| format!("{prefix}{i}"))).expect("distinct tokens");
    let data = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    EmbeddingMatrix::new(vocab, d, data).expect("finite data")
}

/// Target and source spaces sharing their first `n_shared` tokens.
pub fn spaces(n: usize, n_shared: usize, d: usize) -> (EmbeddingMatrix, EmbeddingMatrix) {
    let target = random_embeddings(1, "w", n, d);
    let source = random_embeddings(2, "w", n_shared, d);
    (target, source)
}

/// Sentences over `types` tokens grouped into topics of eight.
pub fn topic_corpus(seed: u64, lines: usize, types: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topics = types.div_ceil(8);
    (0..lines)
        .map(|_| {
            let t = rng.random_range(0..topics);
            let len = rng.random_range(6..14);
            (0..len)
                .map(|_| format!("t{}", (t * 8 + rng.random_range(0..8)).min(types - 1)))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}
