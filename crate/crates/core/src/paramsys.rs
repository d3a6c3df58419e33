//! Affine matrix families `A(σ) = Σ σᵢ Aᵢ` and the parameter-space
//! primitives used throughout the crate.

use std::ops::Deref;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Asymmetry (relative Frobenius) above which construction logs a warning
/// before symmetrising.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// A parameter point σ ∈ ℝˢ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(pub Vec<f64>);

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn ones(s: usize) -> Self {
        Self(vec![1.0; s])
    }

    pub fn unit(s: usize, i: usize) -> Self {
        let mut v = vec![0.0; s];
        v[i] = 1.0;
        Self(v)
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl Deref for ParameterVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ParameterVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl From<&[f64]> for ParameterVector {
    fn from(v: &[f64]) -> Self {
        Self(v.to_vec())
    }
}

/// Componentwise bounds describing the admissible parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParameterBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                what: "parameter box bounds",
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::InvalidArgument("parameter box is empty".into()));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::InvalidArgument(format!(
                    "parameter box component {i}: [{lo}, {hi}] is not a finite interval"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The cube `[lo, hi]ˢ`.
    pub fn cube(s: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; s], vec![hi; s])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, sigma: &[f64]) -> bool {
        sigma.len() == self.dim()
            && sigma
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| lo <= x && x <= hi)
    }

    /// Largest Euclidean norm attained in the box.
    pub fn max_norm(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| {
                let m = lo.abs().max(hi.abs());
                m * m
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// An affine family of dense symmetric matrices.
#[derive(Debug, Clone)]
pub struct ParametricMatrix {
    terms: Vec<DMatrix<f64>>,
    n: usize,
}

impl ParametricMatrix {
    /// Builds the family from its terms. Every term is symmetrised; terms
    /// whose asymmetry exceeds [`SYMMETRY_TOLERANCE`] are reported.
    pub fn new(terms: Vec<DMatrix<f64>>) -> Result<Self> {
        let Some(first) = terms.first() else {
            return Err(Error::InvalidArgument("a parametric matrix needs at least one term".into()));
        };
        let n = first.nrows();
        let mut terms = terms;
        for (i, t) in terms.iter_mut().enumerate() {
            if t.nrows() != n || t.ncols() != n {
                return Err(Error::DimensionMismatch {
                    what: "term dimension",
                    expected: n,
                    got: if t.nrows() != n { t.nrows() } else { t.ncols() },
                });
            }
            if t.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(format!("term {} has non-finite entries", i + 1)));
            }
            let asym = linalg::asymmetry(t);
            if asym > SYMMETRY_TOLERANCE {
                log::warn!("term {} is asymmetric (relative {asym:.3e}); symmetrising", i + 1);
            }
            linalg::symmetrize(t);
        }
        Ok(Self { terms, n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[DMatrix<f64>] {
        &self.terms
    }

    pub fn term(&self, i: usize) -> &DMatrix<f64> {
        &self.terms[i]
    }

    fn check_sigma(&self, sigma: &[f64]) -> Result<()> {
        if sigma.len() != self.s() {
            return Err(Error::DimensionMismatch {
                what: "parameter vector length",
                expected: self.s(),
                got: sigma.len(),
            });
        }
        Ok(())
    }

    fn check_vector(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                what: "vector length",
                expected: self.n,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Dense `A(σ) = Σ σᵢ Aᵢ`.
    pub fn evaluate(&self, sigma: &[f64]) -> Result<DMatrix<f64>> {
        self.check_sigma(sigma)?;
        let mut out = DMatrix::zeros(self.n, self.n);
        for (t, &s) in self.terms.iter().zip(sigma) {
            out.zip_apply(t, |o, v| *o += s * v);
        }
        Ok(out)
    }

    /// Matrix-free `A(σ) v = Σ σᵢ (Aᵢ v)`.
    pub fn apply(&self, sigma: &[f64], v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_sigma(sigma)?;
        self.check_vector(v)?;
        let mut out = DVector::zeros(self.n);
        for (t, &s) in self.terms.iter().zip(sigma) {
            out.gemv(s, t, v, 1.0);
        }
        Ok(out)
    }

    /// `‖v‖_{A(σ)} = √(vᵀ A(σ) v)`.
    ///
    /// A quadratic form more negative than rounding can explain is reported as
    /// a non-SPD evaluation.
    pub fn a_norm(&self, sigma: &[f64], v: &DVector<f64>) -> Result<f64> {
        let av = self.apply(sigma, v)?;
        let q = v.dot(&av);
        let tol = 1e-12 * v.norm() * av.norm();
        if q < -tol {
            return Err(Error::NotPositiveDefinite(format!(
                "vᵀA(σ)v = {q:e} at σ = {sigma:?}"
            )));
        }
        Ok(q.max(0.0).sqrt())
    }
}

/// `σ^⊗k`, the k-fold Kronecker power, left-factor-major: block `i` of length
/// `s^(k−1)` is `σᵢ · σ^⊗(k−1)`.
pub fn kron_power(sigma: &[f64], k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::InvalidArgument("Kronecker power needs k ≥ 1".into()));
    }
    let s = sigma.len();
    let len = u32::try_from(k)
        .ok()
        .and_then(|k| s.checked_pow(k))
        .ok_or_else(|| Error::Overflow(format!("{s}^{k} Kronecker power length")))?;
    // Guard against requests that fit in usize but cannot be allocated.
    if len > isize::MAX as usize / std::mem::size_of::<f64>() {
        return Err(Error::Overflow(format!("{s}^{k} Kronecker power length")));
    }
    let mut out = sigma.to_vec();
    for _ in 1..k {
        let mut next = Vec::with_capacity(out.len() * s);
        for &si in sigma {
            next.extend(out.iter().map(|x| si * x));
        }
        out = next;
    }
    debug_assert_eq!(out.len(), len);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(v))
    }

    #[test]
    fn evaluate_unit_vector_gives_term() {
        let p = ParametricMatrix::new(vec![diag(&[2.0, 1.0]), diag(&[1.0, 3.0])]).unwrap();
        assert_eq!(p.evaluate(&ParameterVector::unit(2, 1)).unwrap(), diag(&[1.0, 3.0]));
        assert_eq!(p.evaluate(&[1.0, 2.0]).unwrap(), diag(&[4.0, 7.0]));
    }

    #[test]
    fn apply_zero_sigma_and_single_term() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let p = ParametricMatrix::new(vec![a.clone()]).unwrap();
        let v = DVector::from_vec(vec![1.0, -2.0]);
        assert_eq!(p.apply(&[0.0], &v).unwrap(), DVector::zeros(2));
        assert_eq!(p.apply(&[1.5], &v).unwrap(), &a * &v * 1.5);
    }

    #[test]
    fn dimension_errors() {
        let p = ParametricMatrix::new(vec![diag(&[1.0, 1.0])]).unwrap();
        assert!(matches!(p.evaluate(&[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
        let v = DVector::zeros(3);
        assert!(matches!(p.apply(&[1.0], &v), Err(Error::DimensionMismatch { .. })));
        assert!(ParametricMatrix::new(vec![diag(&[1.0]), diag(&[1.0, 2.0])]).is_err());
        assert!(ParametricMatrix::new(vec![]).is_err());
    }

    #[test]
    fn construction_symmetrises() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let p = ParametricMatrix::new(vec![a]).unwrap();
        assert_eq!(p.term(0)[(0, 1)], 1.0);
        assert_eq!(p.term(0)[(1, 0)], 1.0);
    }

    #[test]
    fn kron_power_examples() {
        assert_eq!(kron_power(&[1.0, 2.0], 2).unwrap(), vec![1.0, 2.0, 2.0, 4.0]);
        assert_eq!(kron_power(&[3.0, -1.0, 2.0], 1).unwrap(), vec![3.0, -1.0, 2.0]);
        // left-factor-major convention: block i is σᵢ σ^⊗(k−1)
        let s = [2.0, 3.0, 5.0];
        let k3 = kron_power(&s, 3).unwrap();
        let k2 = kron_power(&s, 2).unwrap();
        for (i, si) in s.iter().enumerate() {
            for (a, b) in k3[i * 9..(i + 1) * 9].iter().zip(&k2) {
                assert_eq!(*a, si * b);
            }
        }
        assert!(kron_power(&s, 0).is_err());
        assert!(matches!(kron_power(&s, 200), Err(Error::Overflow(_))));
    }

    #[test]
    fn a_norm_identity_and_zero() {
        let p = ParametricMatrix::new(vec![diag(&[1.0, 1.0, 1.0])]).unwrap();
        let v = DVector::from_vec(vec![3.0, 0.0, 4.0]);
        assert!((p.a_norm(&[1.0], &v).unwrap() - 5.0).abs() < 1e-15);
        assert_eq!(p.a_norm(&[1.0], &DVector::zeros(3)).unwrap(), 0.0);
        assert!(matches!(p.a_norm(&[-1.0], &v), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn parameter_box_validation() {
        assert!(ParameterBox::new(vec![1.0], vec![0.0]).is_err());
        assert!(ParameterBox::new(vec![], vec![]).is_err());
        let b = ParameterBox::cube(3, 1.0, 20.0).unwrap();
        assert!(b.contains(&[1.0, 20.0, 5.0]));
        assert!(!b.contains(&[0.5, 2.0, 2.0]));
        assert!((b.max_norm() - (3.0f64 * 400.0).sqrt()).abs() < 1e-12);
    }
}
