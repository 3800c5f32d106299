//! Orthogonal Procrustes alignment over shared anchors.

use nalgebra::DMatrix;

use super::anchors::SharedAnchorSet;
use crate::embedding::{norm, EmbeddingMatrix};
use crate::error::{Error, Result};

/// An orthogonal `d x d` map applied to row vectors as `x W`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalMap {
    matrix: DMatrix<f64>,
}

impl OrthogonalMap {
    pub fn identity(dim: usize) -> Self {
        OrthogonalMap {
            matrix: DMatrix::identity(dim, dim),
        }
    }

    /// Wraps `matrix` after checking `||W^T W - I||_F <= 1e-5`.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::dims("orthogonal map columns", matrix.nrows(), matrix.ncols()));
        }
        let map = OrthogonalMap { matrix };
        let err = map.orthogonality_error();
        if err.is_nan() || err > 1e-5 {
            return Err(Error::InvalidConfig(format!(
                "matrix is not orthogonal (||W^T W - I||_F = {err:e})"
            )));
        }
        Ok(map)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `||W^T W - I||_F`.
    pub fn orthogonality_error(&self) -> f64 {
        let d = self.dim();
        (self.matrix.transpose() * &self.matrix - DMatrix::<f64>::identity(d, d)).norm()
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|j| (0..d).map(|i| row[i] * self.matrix[(i, j)]).sum())
            .collect()
    }
}

/// Fits `W = argmin_{W^T W = I} sum ||T_w W - S_w||^2` over the anchors via
/// the SVD of the anchor cross-covariance `T_A^T S_A = U S V^T`, `W = U V^T`.
pub fn fit_orthogonal(
    shared: &SharedAnchorSet,
    target: &EmbeddingMatrix,
    source: &EmbeddingMatrix,
    normalize_anchors: bool,
) -> Result<OrthogonalMap> {
    let d = target.dim();
    if source.dim() != d {
        return Err(Error::dims("orthogonal fit (source dim)", d, source.dim()));
    }
    if shared.is_empty() {
        return Err(Error::NoSharedAnchors);
    }

    let mut cross = DMatrix::<f64>::zeros(d, d);
    for anchor in shared.entries() {
        let mut t = target.row(anchor.target_index).to_vec();
        let mut s = source.row(anchor.source_index).to_vec();
        if normalize_anchors {
            normalize_in_place(&mut t);
            normalize_in_place(&mut s);
        }
        for i in 0..d {
            if t[i] == 0.0 {
                continue;
            }
            for j in 0..d {
                cross[(i, j)] += t[i] * s[j];
            }
        }
    }
    if cross.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateAnchors);
    }

    let svd = cross.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    Ok(OrthogonalMap { matrix: u * v_t })
}

/// Maps every row of `target` (shared tokens included) through `map`.
pub fn apply_orthogonal(map: &OrthogonalMap, target: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    if map.dim() != target.dim() {
        return Err(Error::dims("orthogonal map application", map.dim(), target.dim()));
    }
    let data = target.rows().flat_map(|row| map.apply_row(row)).collect();
    EmbeddingMatrix::new(target.vocab().clone(), target.dim(), data)
}

fn normalize_in_place(v: &mut [f64]) {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
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
    fn identity_recovery() {
        let rows = vec![
            vec![1.0, 0.2, -0.3],
            vec![0.1, 1.0, 0.4],
            vec![-0.5, 0.3, 1.0],
            vec![0.7, -0.2, 0.1],
        ];
        let t = matrix(&["a", "b", "c", "d"], &rows);
        let shared = compute_shared(t.vocab(), t.vocab()).unwrap();
        let w = fit_orthogonal(&shared, &t, &t, false).unwrap();
        let err = (w.matrix() - DMatrix::<f64>::identity(3, 3)).norm();
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn rotation_90_degrees() {
        let w = OrthogonalMap::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])).unwrap();
        let t = matrix(&["a"], &[vec![1.0, 0.0]]);
        let out = apply_orthogonal(&w, &t).unwrap();
        assert_eq!(out.row(0), &[0.0, 1.0]);
    }

    #[test]
    fn identity_map_is_noop() {
        let t = matrix(&["a", "b"], &[vec![0.3, -1.5], vec![2.0, 0.25]]);
        let out = apply_orthogonal(&OrthogonalMap::identity(2), &t).unwrap();
        assert_eq!(out, t);
    }

    #[test]
    fn rejects_non_orthogonal() {
        assert!(OrthogonalMap::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0])).is_err());
    }

    #[test]
    fn zero_anchors_degenerate() {
        let t = matrix(&["a", "b"], &[vec![0.0, 0.0], vec![0.0, 0.0]]);
        let shared = compute_shared(t.vocab(), t.vocab()).unwrap();
        assert!(matches!(
            fit_orthogonal(&shared, &t, &t, false),
            Err(Error::DegenerateAnchors)
        ));
    }

    #[test]
    fn dimension_mismatch() {
        let t = matrix(&["a"], &[vec![1.0, 0.0]]);
        let s = matrix(&["a"], &[vec![1.0, 0.0, 0.0]]);
        let shared = compute_shared(t.vocab(), s.vocab()).unwrap();
        assert!(matches!(
            fit_orthogonal(&shared, &t, &s, false),
            Err(Error::DimensionMismatch { .. })
        ));
        let w = OrthogonalMap::identity(3);
        assert!(apply_orthogonal(&w, &t).is_err());
    }
}
