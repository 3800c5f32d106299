//! Cross-domain projection of target-domain embeddings into a pre-trained
//! model's embedding space.

mod anchors;
mod llm;
mod orthogonal;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use anchors::{compute_shared, Anchor, SharedAnchorSet};
pub use llm::{
    knn_shared, llm_project, llm_project_detailed, reconstruct_row, solve_local_weights,
    LocalReconstruction, Neighbor, DEFAULT_GRAM_EPSILON,
};
pub use orthogonal::{apply_orthogonal, fit_orthogonal, OrthogonalMap};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};

/// Neighbor count used by locally linear mapping unless overridden.
pub const DEFAULT_K: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Orthogonal Procrustes map fitted on shared anchors.
    Linear,
    /// Locally linear mapping.
    Llm,
    /// Target-domain vectors used unchanged.
    CbowAsIs,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Linear => "linear",
            Method::Llm => "llm",
            Method::CbowAsIs => "cbow-as-is",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Method::Linear),
            "llm" => Ok(Method::Llm),
            "cbow-as-is" => Ok(Method::CbowAsIs),
            other => Err(Error::InvalidConfig(format!(
                "unknown projection method {other:?} (expected linear, llm or cbow-as-is)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionConfig {
    pub method: Method,
    /// Neighbor count for locally linear mapping.
    pub k: usize,
    /// Length-normalize anchor rows before the Procrustes fit.
    pub normalize_anchors: bool,
    /// Gram conditioning strength. `None` selects
    /// [`DEFAULT_GRAM_EPSILON`] when a token has more neighbors than
    /// dimensions and 0 otherwise.
    pub gram_epsilon: Option<f64>,
    /// Restrict linear anchors to the `n` most frequent shared tokens.
    pub linear_top_n: Option<usize>,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            method: Method::Llm,
            k: DEFAULT_K,
            normalize_anchors: false,
            gram_epsilon: None,
            linear_top_n: None,
        }
    }
}

impl ProjectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if let Some(eps) = self.gram_epsilon {
            if !(eps.is_finite() && eps >= 0.0) {
                return Err(Error::InvalidConfig("gram_epsilon must be non-negative".into()));
            }
        }
        if self.linear_top_n == Some(0) {
            return Err(Error::InvalidConfig("linear_top_n must be positive".into()));
        }
        Ok(())
    }
}

/// Projects `target` into the space of `source` with the configured
/// method, computing the shared anchors from the two vocabularies.
pub fn project(
    target: &EmbeddingMatrix,
    source: &EmbeddingMatrix,
    config: &ProjectionConfig,
) -> Result<EmbeddingMatrix> {
    project_with_anchors(target, source, None, config)
}

/// Like [`project`], with an optional explicit anchor set.
pub fn project_with_anchors(
    target: &EmbeddingMatrix,
    source: &EmbeddingMatrix,
    anchors: Option<&SharedAnchorSet>,
    config: &ProjectionConfig,
) -> Result<EmbeddingMatrix> {
    config.validate()?;
    if target.dim() != source.dim() {
        return Err(Error::dims(
            format!("{} projection (target vs source dim)", config.method),
            source.dim(),
            target.dim(),
        ));
    }
    if config.method == Method::CbowAsIs {
        return Ok(target.clone());
    }
    let computed;
    let shared = match anchors {
        Some(a) => a,
        None => {
            computed = compute_shared(target.vocab(), source.vocab())?;
            &computed
        }
    };
    match config.method {
        Method::Linear => {
            let limited;
            let anchors = match config.linear_top_n {
                Some(n) => {
                    limited = shared.top_by_frequency(n, target.vocab())?;
                    &limited
                }
                None => shared,
            };
            let map = fit_orthogonal(anchors, target, source, config.normalize_anchors)?;
            apply_orthogonal(&map, target)
        }
        Method::Llm => llm_project(target, source, shared, config),
        Method::CbowAsIs => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::Vocabulary;

    #[test]
    fn defaults() {
        let cfg = ProjectionConfig::default();
        assert_eq!(cfg.method, Method::Llm);
        assert_eq!(cfg.k, 10);
        assert!(!cfg.normalize_anchors);
        assert_eq!(cfg.gram_epsilon, None);
    }

    #[test]
    fn method_parse_round_trip() {
        for m in [Method::Linear, Method::Llm, Method::CbowAsIs] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("procrustes".parse::<Method>().is_err());
    }

    #[test]
    fn as_is_returns_input() {
        let t = EmbeddingMatrix::from_rows(
            Vocabulary::new(["x", "y"]).unwrap(),
            &[vec![1.0, 2.0], vec![3.0, 4.0]],
        )
        .unwrap();
        let s = EmbeddingMatrix::from_rows(Vocabulary::new(["z"]).unwrap(), &[vec![0.0, 1.0]]).unwrap();
        let cfg = ProjectionConfig { method: Method::CbowAsIs, ..Default::default() };
        assert_eq!(project(&t, &s, &cfg).unwrap(), t);
    }

    #[test]
    fn linear_dimension_error() {
        let t = EmbeddingMatrix::from_rows(Vocabulary::new(["x"]).unwrap(), &[vec![1.0, 2.0]]).unwrap();
        let s = EmbeddingMatrix::from_rows(Vocabulary::new(["x"]).unwrap(), &[vec![1.0, 2.0, 3.0]])
            .unwrap();
        let cfg = ProjectionConfig { method: Method::Linear, ..Default::default() };
        assert!(matches!(project(&t, &s, &cfg), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn invalid_config() {
        let cfg = ProjectionConfig { k: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = ProjectionConfig { gram_epsilon: Some(-1.0), ..Default::default() };
        assert!(cfg.validate().is_err());
    }
}
