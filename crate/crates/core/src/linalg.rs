//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::DMatrix;

/// Matrix whose columns are `cols` (all of length `dim`).
pub fn from_columns(dim: usize, cols: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(dim, cols.len(), |i, j| cols[j][i])
}

/// Singular values of the matrix with the given columns, in descending order.
pub fn singular_values(dim: usize, cols: &[Vec<f64>]) -> Vec<f64> {
    if cols.is_empty() || dim == 0 {
        return Vec::new();
    }
    let m = from_columns(dim, cols);
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Count of singular values strictly above `rel_tol * s_max`; zero when `s_max = 0`.
pub fn numerical_rank(sv: &[f64], rel_tol: f64) -> usize {
    let smax = sv.first().copied().unwrap_or(0.0);
    if !(smax > 0.0) {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Minimum-norm right inverse `A^T (A A^T)^{-1}` of a full-row-rank `n x m` matrix.
/// Returns `None` when `A A^T` is numerically singular.
pub fn right_inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let aat = a * a.transpose();
    let sv = aat.singular_values();
    let smax = sv.max();
    if !(smax > 0.0) || sv.min() <= 1e-12 * smax {
        return None;
    }
    let inv = aat.try_inverse()?;
    Some(a.transpose() * inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_simple_sets() {
        let cols = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![1.0, 1.0, 0.0]];
        let sv = singular_values(3, &cols);
        assert_eq!(sv.len(), 3);
        assert!(sv[0] >= sv[1] && sv[1] >= sv[2]);
        assert_eq!(numerical_rank(&sv, 1e-8), 2);
        assert_eq!(numerical_rank(&singular_values(3, &[vec![0.0; 3]]), 1e-8), 0);
        assert_eq!(numerical_rank(&[], 1e-8), 0);
    }

    #[test]
    fn projection_right_inverse() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let r = right_inverse(&a).unwrap();
        assert_eq!(r, DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]));
        assert_eq!(&a * &r, DMatrix::identity(2, 2));
        let sing = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(right_inverse(&sing).is_none());
    }
}
