//! Dense symmetric solves shared by the fitter and the spline constraint.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// Cholesky factorization, adding `ridge · max(1, max diag)` to the diagonal
/// (growing tenfold per attempt) when the matrix is not numerically positive
/// definite. Returns the factor and the ridge that was applied.
pub(crate) fn robust_cholesky(matrix: &DMatrix<f64>, ridge: f64) -> Option<(Cholesky<f64, Dyn>, f64)> {
    if let Some(chol) = Cholesky::new(matrix.clone()) {
        return Some((chol, 0.0));
    }
    let scale = matrix.diagonal().iter().fold(1.0f64, |m, &d| m.max(d.abs()));
    let mut bump = ridge.max(f64::EPSILON) * scale;
    for _ in 0..12 {
        let mut guarded = matrix.clone();
        for i in 0..guarded.nrows() {
            guarded[(i, i)] += bump;
        }
        if let Some(chol) = Cholesky::new(guarded) {
            return Some((chol, bump));
        }
        bump *= 10.0;
    }
    None
}

pub(crate) fn solve_spd(matrix: &DMatrix<f64>, rhs: &DVector<f64>, ridge: f64) -> Option<DVector<f64>> {
    robust_cholesky(matrix, ridge).map(|(chol, _)| chol.solve(rhs))
}

pub(crate) fn inverse_spd(matrix: &DMatrix<f64>, ridge: f64) -> Option<DMatrix<f64>> {
    robust_cholesky(matrix, ridge).map(|(chol, _)| chol.inverse())
}

/// Column-ordered Cholesky sweep over a Gram matrix. Returns the first
/// column whose residual pivot falls below `tol` times its diagonal, i.e. the
/// first column that is (numerically) a combination of earlier ones.
pub(crate) fn first_dependent_column(gram: &DMatrix<f64>, tol: f64) -> Option<usize> {
    let p = gram.nrows();
    let mut lower = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        let diag = gram[(j, j)];
        let mut pivot = diag;
        for k in 0..j {
            pivot -= lower[(j, k)] * lower[(j, k)];
        }
        if !(diag > 0.0) || pivot <= tol * diag {
            return Some(j);
        }
        let root = pivot.sqrt();
        lower[(j, j)] = root;
        for i in (j + 1)..p {
            let mut v = gram[(i, j)];
            for k in 0..j {
                v -= lower[(i, k)] * lower[(j, k)];
            }
            lower[(i, j)] = v / root;
        }
    }
    None
}
