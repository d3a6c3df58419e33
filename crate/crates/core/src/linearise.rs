//! The linearisation function `L(C) = [A₁C | A₂C | … | A_sC]` of an affine
//! family, its functional powers, and the normal-form recursion
//! `L_k L_kᵀ = Σᵢ Aᵢ (L_{k−1} L_{k−1}ᵀ) Aᵢᵀ` that tracks the range of `L_k`
//! without ever forming its `s^k` columns.
//!
//! Explicit powers `L^k(b)` are kept for oracles and small instances only;
//! their width grows exponentially and they are guarded by a column budget.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::paramsys::ParametricMatrix;

/// A carrier block whose columns span candidate directions.
pub type LinearisationBlock = DMatrix<f64>;

/// Upper bound on the number of entries of a block produced by
/// [`apply_linearisation`] (about 800 MB of `f64`).
pub const DEFAULT_MAX_ENTRIES: usize = 100_000_000;

/// Default entry budget of [`explicit_linearisation_power`]: `n · s^k ≤ 10⁶`.
pub const DEFAULT_EXPLICIT_ENTRIES: usize = 1_000_000;

/// `[A₁C | … | A_sC]` in term order.
pub fn apply_linearisation(p: &ParametricMatrix, c: &LinearisationBlock) -> Result<LinearisationBlock> {
    apply_linearisation_with_budget(p, c, DEFAULT_MAX_ENTRIES)
}

pub fn apply_linearisation_with_budget(
    p: &ParametricMatrix,
    c: &LinearisationBlock,
    max_entries: usize,
) -> Result<LinearisationBlock> {
    let n = p.n();
    if c.nrows() != n {
        return Err(Error::DimensionMismatch {
            what: "linearisation block rows",
            expected: n,
            got: c.nrows(),
        });
    }
    let m = c.ncols();
    let cols = p
        .s()
        .checked_mul(m)
        .ok_or_else(|| Error::Overflow("linearisation column count".into()))?;
    if cols.saturating_mul(n.max(1)) > max_entries {
        return Err(Error::BudgetExceeded {
            requested: cols,
            budget: max_entries / n.max(1),
        });
    }
    let mut out = DMatrix::zeros(n, cols);
    for (i, a) in p.terms().iter().enumerate() {
        out.columns_mut(i * m, m).gemm(1.0, a, c, 0.0);
    }
    Ok(out)
}

/// The explicit `L^k(b) ∈ ℝ^{n × s^k}` with `L^k(b) σ^⊗k = A(σ)^k b`.
pub fn explicit_linearisation_power(p: &ParametricMatrix, b: &DVector<f64>, k: usize) -> Result<DMatrix<f64>> {
    explicit_linearisation_power_with_budget(p, b, k, DEFAULT_EXPLICIT_ENTRIES)
}

pub fn explicit_linearisation_power_with_budget(
    p: &ParametricMatrix,
    b: &DVector<f64>,
    k: usize,
    max_entries: usize,
) -> Result<DMatrix<f64>> {
    if k == 0 {
        return Err(Error::InvalidArgument("linearisation power needs k ≥ 1".into()));
    }
    let n = p.n();
    let budget = max_entries / n.max(1);
    let cols = u32::try_from(k)
        .ok()
        .and_then(|k| p.s().checked_pow(k))
        .ok_or(Error::BudgetExceeded {
            requested: usize::MAX,
            budget,
        })?;
    if cols > budget {
        return Err(Error::BudgetExceeded { requested: cols, budget });
    }
    let mut block: DMatrix<f64> = DMatrix::from_column_slice(b.len(), 1, b.as_slice());
    for _ in 0..k {
        block = apply_linearisation_with_budget(p, &block, max_entries)?;
    }
    Ok(block)
}

/// The normal form `L_k L_kᵀ` after `k` recursion steps.
#[derive(Debug, Clone)]
pub struct NormalForm {
    matrix: DMatrix<f64>,
    k: usize,
}

impl NormalForm {
    /// `M₀ = b bᵀ`.
    pub fn initial(b: &DVector<f64>) -> Self {
        Self {
            matrix: b * b.transpose(),
            k: 0,
        }
    }

    pub fn from_matrix(matrix: DMatrix<f64>, k: usize) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                what: "normal form must be square",
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        Ok(Self { matrix, k })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// Singular values of `L_k`, `√max(λ, 0)` over the eigenvalues of the
    /// (symmetrised) normal form, nonincreasing. Negative rounding noise is
    /// clamped here, never in the stored matrix.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut m = self.matrix.clone();
        linalg::symmetrize(&mut m);
        let mut v: Vec<f64> = m
            .symmetric_eigenvalues()
            .iter()
            .map(|&l| l.max(0.0).sqrt())
            .collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }
}

/// One step of the normal-form recursion: `Σᵢ Aᵢ M Aᵢᵀ`, accumulated in term
/// order `i = 1…s`.
pub fn normal_form_step(p: &ParametricMatrix, m: &NormalForm) -> Result<NormalForm> {
    let n = p.n();
    if m.matrix.nrows() != n {
        return Err(Error::DimensionMismatch {
            what: "normal form dimension",
            expected: n,
            got: m.matrix.nrows(),
        });
    }
    let mut acc = DMatrix::zeros(n, n);
    let mut tmp = DMatrix::zeros(n, n);
    for a in p.terms() {
        tmp.gemm(1.0, a, &m.matrix, 0.0);
        // terms are symmetric, so Aᵢᵀ = Aᵢ
        acc.gemm(1.0, &tmp, a, 1.0);
    }
    Ok(NormalForm { matrix: acc, k: m.k + 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_family() -> (ParametricMatrix, DVector<f64>) {
        let a1 = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        let a2 = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.5, 0.0, 1.0, 0.0, 0.5, 0.0, 2.0]);
        let b = DVector::from_vec(vec![1.0, -1.0, 2.0]);
        (ParametricMatrix::new(vec![a1, a2]).unwrap(), b)
    }

    #[test]
    fn single_column_gives_term_products() {
        let (p, b) = small_family();
        let c = DMatrix::from_column_slice(3, 1, b.as_slice());
        let l = apply_linearisation(&p, &c).unwrap();
        assert_eq!(l.ncols(), 2);
        assert_eq!(l.column(0).into_owned(), p.term(0) * &b);
        assert_eq!(l.column(1).into_owned(), p.term(1) * &b);
    }

    #[test]
    fn shape_law() {
        let (p, _) = small_family();
        let c = DMatrix::from_element(3, 4, 1.0);
        assert_eq!(apply_linearisation(&p, &c).unwrap().ncols(), 8);
        assert!(matches!(
            apply_linearisation_with_budget(&p, &c, 20),
            Err(Error::BudgetExceeded { .. })
        ));
        let bad = DMatrix::zeros(2, 1);
        assert!(matches!(apply_linearisation(&p, &bad), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn explicit_power_first_step_and_single_term() {
        let (p, b) = small_family();
        let c = DMatrix::from_column_slice(3, 1, b.as_slice());
        assert_eq!(explicit_linearisation_power(&p, &b, 1).unwrap(), apply_linearisation(&p, &c).unwrap());

        let single = ParametricMatrix::new(vec![p.term(0).clone()]).unwrap();
        let l3 = explicit_linearisation_power(&single, &b, 3).unwrap();
        let expected = p.term(0) * p.term(0) * p.term(0) * &b;
        assert_eq!(l3.ncols(), 1);
        assert!((l3.column(0) - expected).norm() < 1e-12);
        assert!(matches!(
            explicit_linearisation_power_with_budget(&p, &b, 3, 3 * 4),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn normal_form_single_term_one_step() {
        let (p, b) = small_family();
        let single = ParametricMatrix::new(vec![p.term(0).clone()]).unwrap();
        let m1 = normal_form_step(&single, &NormalForm::initial(&b)).unwrap();
        let ab = p.term(0) * &b;
        assert_eq!(m1.k(), 1);
        assert!(linalg::relative_frobenius(m1.matrix(), &(&ab * ab.transpose())) < 1e-15);
    }

    #[test]
    fn normal_form_stays_symmetric_psd() {
        let (p, b) = small_family();
        let mut m = NormalForm::initial(&b);
        for _ in 0..4 {
            m = normal_form_step(&p, &m).unwrap();
            assert!(linalg::asymmetry(m.matrix()) < 1e-12);
            let (lo, hi) = linalg::extreme_eigenvalues(m.matrix());
            assert!(lo >= -1e-10 * hi);
        }
        assert_eq!(m.k(), 4);
        let sv = m.singular_values();
        assert!(sv.windows(2).all(|w| w[0] >= w[1]));
    }
}
