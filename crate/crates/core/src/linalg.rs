//! Small dense kernels shared by the builders: symmetrisation, sorted
//! eigen/singular decompositions, orthonormal basis growth and subspace
//! comparison.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative asymmetry `‖M − Mᵀ‖_F / ‖M‖_F` (zero for the zero matrix).
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let norm = m.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (m - m.transpose()).norm() / norm
}

/// Replaces `m` with `(m + mᵀ) / 2` in place.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        return 0.0;
    }
    (a - b).norm() / scale
}

/// Symmetric eigendecomposition with eigenvalues sorted nonincreasing and
/// eigenvectors permuted to match.
pub fn sorted_symmetric_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

/// Thin SVD returning `(U, singular values)` sorted nonincreasing. Right
/// singular vectors are never needed by the builders.
pub fn sorted_left_svd(m: DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return Ok((DMatrix::zeros(m.nrows(), 0), Vec::new()));
    }
    let svd = m
        .try_svd(true, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::InvalidArgument("SVD failed to converge".into()))?;
    let u = svd.u.expect("requested U");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    Ok((u, values))
}

/// Singular values only, sorted nonincreasing.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = m.singular_values().iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Extreme eigenvalues `(λmin, λmax)` of a symmetric matrix.
pub fn extreme_eigenvalues(m: &DMatrix<f64>) -> (f64, f64) {
    let values = m.clone().symmetric_eigenvalues();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// Stacks columns into a matrix with `nrows` rows (valid for zero columns).
pub fn from_columns(nrows: usize, cols: &[DVector<f64>]) -> DMatrix<f64> {
    if cols.is_empty() {
        DMatrix::zeros(nrows, 0)
    } else {
        DMatrix::from_columns(cols)
    }
}

/// `(I − QQᵀ) M (I − QQᵀ)` for orthonormal `Q`, symmetrised.
pub fn project_symmetric(m: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    if q.ncols() == 0 {
        let mut out = m.clone();
        symmetrize(&mut out);
        return out;
    }
    let qt = q.transpose();
    let w = m - q * (&qt * m);
    let mut out = &w - (&w * q) * &qt;
    symmetrize(&mut out);
    out
}

/// `(I − QQᵀ) C` for orthonormal `Q`.
pub fn project_out(c: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    if q.ncols() == 0 {
        return c.clone();
    }
    c - q * (q.transpose() * c)
}

/// Columns whose norm after projection falls below this fraction of their
/// original norm are treated as already contained in the basis.
pub const DROP_TOLERANCE: f64 = 1e-12;

/// Appends the columns of `candidates` to the orthonormal set `basis`.
///
/// Each candidate is orthogonalised against the current basis (and the
/// candidates accepted before it) with two Gram–Schmidt passes. Candidates
/// left with a relative norm below [`DROP_TOLERANCE`] are dropped. Returns the
/// number of columns appended.
pub fn append_orthonormal(basis: &mut Vec<DVector<f64>>, candidates: &DMatrix<f64>) -> usize {
    let mut added = 0;
    for c in candidates.column_iter() {
        let original = c.norm();
        if original == 0.0 || !original.is_finite() {
            continue;
        }
        let mut v: DVector<f64> = c.into_owned();
        for _ in 0..2 {
            for q in basis.iter() {
                let coef = q.dot(&v);
                v.axpy(-coef, q, 1.0);
            }
        }
        let norm = v.norm();
        if norm < DROP_TOLERANCE * original {
            continue;
        }
        basis.push(v / norm);
        added += 1;
    }
    added
}

/// `‖QᵀQ − I‖_F`.
pub fn orthonormality_defect(q: &DMatrix<f64>) -> f64 {
    let m = q.ncols();
    (q.transpose() * q - DMatrix::<f64>::identity(m, m)).norm()
}

/// Sine of the largest principal angle between two subspaces given by
/// orthonormal bases of equal dimension: `‖(I − UUᵀ)V‖₂`.
pub fn max_principal_angle_sine(u: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    let residual = project_out(v, u);
    singular_values(&residual).first().copied().unwrap_or(0.0)
}

/// Orthonormal basis of the range of `m`, keeping singular values above
/// `rel_tol · σ_max`.
pub fn range_basis(m: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    let (u, values) = sorted_left_svd(m.clone())?;
    let top = values.first().copied().unwrap_or(0.0);
    let r = values.iter().take_while(|&&s| s > rel_tol * top && s > 0.0).count();
    Ok(u.columns(0, r).into_owned())
}
