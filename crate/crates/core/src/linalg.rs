//! Small dense helpers on top of nalgebra's SVD.

use nalgebra::{DMatrix, DVector, SVD};

/// Index and value of the smallest and largest singular values.
pub(crate) fn singular_extremes(svd: &SVD<f64, nalgebra::Dyn, nalgebra::Dyn>) -> (usize, f64, f64) {
    let s = &svd.singular_values;
    let mut imin = 0;
    for i in 1..s.len() {
        if s[i] < s[imin] {
            imin = i;
        }
    }
    let smax = s.iter().copied().fold(0.0, f64::max);
    (imin, s[imin], smax)
}

/// A unit vector `c` minimizing `|A c|`, taken as the right singular vector
/// of the smallest singular value. Rows are zero-padded so the full right
/// singular basis is available when `A` is wide.
pub(crate) fn null_vector(a: &DMatrix<f64>) -> DVector<f64> {
    let (rows, cols) = a.shape();
    let square = if rows < cols {
        let mut padded = DMatrix::zeros(cols, cols);
        padded.view_mut((0, 0), (rows, cols)).copy_from(a);
        padded
    } else {
        a.clone()
    };
    let svd = SVD::new(square, false, true);
    let (imin, _, _) = singular_extremes(&svd);
    let v_t = svd.v_t.expect("requested right singular vectors");
    v_t.row(imin).transpose()
}

/// Singular values of `a` in descending order.
pub(crate) fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Minimum-norm least-squares solution of `a x = b`, discarding singular
/// values below `rcond` times the largest.
pub(crate) fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, rcond: f64) -> DVector<f64> {
    let svd = SVD::new(a.clone(), true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = (rcond * smax).max(f64::MIN_POSITIVE);
    svd.solve(b, eps).expect("both singular bases were computed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_vector_of_wide_matrix() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 0.0, 1.0, 1.0]);
        let c = null_vector(&a);
        assert!((a * &c).norm() < 1e-14);
        assert!((c.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn least_squares_min_norm() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let x = lstsq(&a, &DVector::from_vec(vec![2.0]), 1e-14);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }
}
