//! Vocabulary adaptation for pre-trained translation models.
//!
//! The pipeline induces target-domain embeddings with CBOW ([`cbow`]),
//! projects them into a pre-trained model's embedding space ([`projection`])
//! and swaps them into a checkpoint ([`checkpoint`]). [`analysis`] provides
//! neighbor, semantic-shift and vocabulary-overlap reports.

pub mod analysis;
pub mod cbow;
pub mod checkpoint;
pub mod embedding;
mod error;
pub mod projection;
pub mod vocab;

pub use analysis::{
    nearest_neighbors_report, semantic_shift_report, vocab_overlap_stats, NeighborReport,
    OverlapStats, ShiftReport,
};
pub use cbow::{build_vocab, train_cbow, CbowConfig};
pub use checkpoint::{
    read_checkpoint, swap_embeddings, validate_checkpoint, write_checkpoint, Checkpoint, Side,
    ValidationReport,
};
pub use embedding::{cosine_similarity, load_embeddings, save_embeddings, EmbeddingMatrix};
pub use error::{Error, Result};
pub use projection::{
    apply_orthogonal, compute_shared, fit_orthogonal, knn_shared, llm_project, project,
    solve_local_weights, LocalReconstruction, Method, OrthogonalMap, ProjectionConfig,
    SharedAnchorSet,
};
pub use vocab::Vocabulary;
