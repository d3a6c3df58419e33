//! Split preconditioning `A(σ) = R⁻¹ K(σ) R⁻ᵀ` with `K̄ = R Rᵀ`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::linalg;
use crate::paramsys::ParametricMatrix;

/// A preconditioned family together with the factor needed to map
/// solutions back to the original unknowns.
#[derive(Debug, Clone)]
pub struct SplitPreconditioned {
    pub family: ParametricMatrix,
    /// `R⁻¹ b̂` for every supplied load.
    pub loads: Vec<DVector<f64>>,
    factor: Cholesky<f64, Dyn>,
}

impl SplitPreconditioned {
    /// Lower-triangular Cholesky factor `R` of `K̄`.
    pub fn factor(&self) -> DMatrix<f64> {
        self.factor.l()
    }

    /// `x̂ = R⁻ᵀ x`, mapping a preconditioned solution back.
    pub fn recover(&self, x: &DVector<f64>) -> DVector<f64> {
        self.factor
            .l_dirty()
            .tr_solve_lower_triangular(x)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// `R⁻¹ v`.
    pub fn transform_load(&self, v: &DVector<f64>) -> DVector<f64> {
        self.factor
            .l_dirty()
            .solve_lower_triangular(v)
            .expect("Cholesky factor has a positive diagonal")
    }
}

/// Factors `K̄ = R Rᵀ` and returns `{R⁻¹ Kᵢ R⁻ᵀ}` (symmetrised) with the
/// transformed loads `R⁻¹ b̂`.
pub fn precondition_split(terms: Vec<DMatrix<f64>>, kbar: &DMatrix<f64>, loads: &[DVector<f64>]) -> Result<SplitPreconditioned> {
    let n = kbar.nrows();
    if kbar.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "K̄ must be square",
            expected: n,
            got: kbar.ncols(),
        });
    }
    for t in &terms {
        if t.nrows() != n || t.ncols() != n {
            return Err(Error::DimensionMismatch {
                what: "stiffness term dimension",
                expected: n,
                got: t.nrows(),
            });
        }
    }
    for l in loads {
        if l.len() != n {
            return Err(Error::DimensionMismatch {
                what: "load length",
                expected: n,
                got: l.len(),
            });
        }
    }
    let factor = kbar
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("K̄ Cholesky factorisation failed".into()))?;
    // R⁻¹ formed once; each term then costs two matrix products
    let r_inv = factor
        .l_dirty()
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or_else(|| Error::NotPositiveDefinite("singular Cholesky factor".into()))?;
    let r_inv = r_inv.lower_triangle();
    // Kᵢ lives on the nodes of one subdomain, so only those columns of R⁻¹
    // enter the congruence
    let preconditioned = terms
        .into_iter()
        .map(|k| {
            let support: Vec<usize> = (0..n).filter(|&j| k.column(j).iter().any(|&v| v != 0.0)).collect();
            let y = r_inv.select_columns(&support);
            let k_jj = k.select_rows(&support).select_columns(&support);
            let z = &y * k_jj;
            let mut a = z * y.transpose();
            linalg::symmetrize(&mut a);
            a
        })
        .collect();
    let family = ParametricMatrix::new(preconditioned)?;
    let out = SplitPreconditioned {
        family,
        loads: Vec::new(),
        factor,
    };
    let loads = loads.iter().map(|l| out.transform_load(l)).collect();
    Ok(SplitPreconditioned { loads, ..out })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |i, j| ((i * 5 + j * 3) % 7) as f64 / 7.0);
        &m * m.transpose() + DMatrix::identity(n, n)
    }

    #[test]
    fn single_term_equal_to_kbar_gives_identity() {
        let k = spd(6);
        let pre = precondition_split(vec![k.clone()], &k, &[]).unwrap();
        assert!((pre.family.term(0) - DMatrix::<f64>::identity(6, 6)).norm() < 1e-10);
    }

    #[test]
    fn recovery_matches_unpreconditioned_solve() {
        let k1 = spd(5);
        let k2 = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0]));
        let kbar = &k1 + &k2;
        let b = DVector::from_vec(vec![1.0, -1.0, 0.5, 2.0, 0.0]);
        let pre = precondition_split(vec![k1.clone(), k2.clone()], &kbar, std::slice::from_ref(&b)).unwrap();
        let sigma = [2.0, 0.5];
        let x = crate::krylov::direct_solve(&pre.family, &sigma, &pre.loads[0]).unwrap();
        let xhat = pre.recover(&x);
        let direct = (&k1 * 2.0 + &k2 * 0.5).cholesky().unwrap().solve(&b);
        assert!((xhat - &direct).norm() <= 1e-9 * direct.norm());
    }

    #[test]
    fn rejects_indefinite_kbar() {
        let k = -DMatrix::<f64>::identity(3, 3);
        assert!(matches!(precondition_split(vec![k.clone()], &k, &[]), Err(Error::NotPositiveDefinite(_))));
    }
}
