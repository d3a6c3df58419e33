//! The online stage: project the affine family onto a reduced basis once,
//! then solve the small Galerkin system `(Σ σᵢ Âᵢ) z = b̂` per parameter.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::krylov;
use crate::linalg;
use crate::offline::ReducedBasis;
use crate::paramsys::ParametricMatrix;

/// Compressed terms `Âᵢ = QᵀAᵢQ` and right-hand side `b̂ = Qᵀb`.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    reduced_terms: Vec<DMatrix<f64>>,
    reduced_rhs: DVector<f64>,
    basis: ReducedBasis,
}

/// A reduced solution: coefficients `z` and the lifted vector `x̂ = Qz`.
#[derive(Debug, Clone)]
pub struct OnlineSolution {
    pub x: DVector<f64>,
    pub z: DVector<f64>,
}

pub fn compress(p: &ParametricMatrix, b: &DVector<f64>, basis: &ReducedBasis) -> Result<ReducedSystem> {
    if basis.n() != p.n() {
        return Err(Error::DimensionMismatch {
            what: "basis rows vs family dimension",
            expected: p.n(),
            got: basis.n(),
        });
    }
    if b.len() != p.n() {
        return Err(Error::DimensionMismatch {
            what: "right-hand side length",
            expected: p.n(),
            got: b.len(),
        });
    }
    let q = basis.q();
    let qt = q.transpose();
    let reduced_terms = p
        .terms()
        .iter()
        .map(|a| {
            let mut t = &qt * (a * q);
            linalg::symmetrize(&mut t);
            t
        })
        .collect();
    Ok(ReducedSystem {
        reduced_terms,
        reduced_rhs: &qt * b,
        basis: basis.clone(),
    })
}

impl ReducedSystem {
    pub fn reduced_terms(&self) -> &[DMatrix<f64>] {
        &self.reduced_terms
    }

    pub fn reduced_rhs(&self) -> &DVector<f64> {
        &self.reduced_rhs
    }

    pub fn basis(&self) -> &ReducedBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.reduced_rhs.len()
    }

    pub fn s(&self) -> usize {
        self.reduced_terms.len()
    }

    /// `Qᵀv` for another right-hand side sharing this basis.
    pub fn project_rhs(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.basis.n() {
            return Err(Error::DimensionMismatch {
                what: "right-hand side length",
                expected: self.basis.n(),
                got: v.len(),
            });
        }
        Ok(self.basis.q().transpose() * v)
    }

    /// `Σ σᵢ Âᵢ`.
    pub fn reduced_matrix(&self, sigma: &[f64]) -> Result<DMatrix<f64>> {
        if sigma.len() != self.s() {
            return Err(Error::DimensionMismatch {
                what: "parameter vector length",
                expected: self.s(),
                got: sigma.len(),
            });
        }
        let m = self.dim();
        let mut out = DMatrix::zeros(m, m);
        for (t, &s) in self.reduced_terms.iter().zip(sigma) {
            out.zip_apply(t, |o, v| *o += s * v);
        }
        Ok(out)
    }

    /// Galerkin solve at one σ for the stored right-hand side.
    pub fn solve(&self, sigma: &[f64]) -> Result<OnlineSolution> {
        self.solve_with_rhs(sigma, &self.reduced_rhs)
    }

    /// Galerkin solve at one σ for an already projected right-hand side.
    pub fn solve_with_rhs(&self, sigma: &[f64], reduced_rhs: &DVector<f64>) -> Result<OnlineSolution> {
        if reduced_rhs.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "reduced right-hand side length",
                expected: self.dim(),
                got: reduced_rhs.len(),
            });
        }
        let a = self.reduced_matrix(sigma)?;
        let z = krylov::dense_spd_solve(&a, reduced_rhs)
            .map_err(|_| Error::NotPositiveDefinite(format!("reduced matrix at σ = {sigma:?}")))?;
        let x = self.basis.q() * &z;
        Ok(OnlineSolution { x, z })
    }
}

/// Batch Galerkin solves. Failures are reported per σ; the output order
/// matches the input order.
pub fn solve_online<S: AsRef<[f64]>>(rs: &ReducedSystem, sigmas: &[S]) -> Vec<Result<OnlineSolution>> {
    sigmas.iter().map(|s| rs.solve(s.as_ref())).collect()
}

/// `‖x(σ) − x̂‖_{A(σ)}` with `x(σ)` from a dense direct solve.
pub fn galerkin_error(p: &ParametricMatrix, b: &DVector<f64>, sigma: &[f64], xhat: &DVector<f64>) -> Result<f64> {
    let x = krylov::direct_solve(p, sigma, b)?;
    p.a_norm(sigma, &(x - xhat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::offline::{build_ck_exact, Method};

    fn family() -> (ParametricMatrix, DVector<f64>) {
        let a1 = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.0, 0.0, 0.0, 2.0]);
        let a2 = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 2.0, 1.0, 0.0, 1.0, 3.0]);
        (ParametricMatrix::new(vec![a1, a2]).unwrap(), DVector::from_vec(vec![1.0, 2.0, -1.0]))
    }

    #[test]
    fn identity_basis_reproduces_family() {
        let (p, b) = family();
        let basis = ReducedBasis::from_parts(DMatrix::identity(3, 3), Method::Exact, 1, None, vec![3]).unwrap();
        let rs = compress(&p, &b, &basis).unwrap();
        assert_eq!(rs.reduced_terms()[0], *p.term(0));
        assert_eq!(rs.reduced_rhs(), &b);
        let sol = rs.solve(&[1.0, 2.0]).unwrap();
        assert!(galerkin_error(&p, &b, &[1.0, 2.0], &sol.x).unwrap() < 1e-12);
    }

    #[test]
    fn one_dimensional_galerkin() {
        let (p, b) = family();
        let basis = build_ck_exact(&p, &b, 1).unwrap();
        let rs = compress(&p, &b, &basis).unwrap();
        let bn2 = b.dot(&b);
        assert!((rs.reduced_rhs()[0] - bn2.sqrt()).abs() < 1e-14);
        assert!((rs.reduced_terms()[0][(0, 0)] - b.dot(&(p.term(0) * &b)) / bn2).abs() < 1e-14);
        let sigma = [0.7, 1.3];
        let sol = rs.solve(&sigma).unwrap();
        let ab = p.apply(&sigma, &b).unwrap();
        let expected = &b * (bn2 / b.dot(&ab));
        assert!((sol.x - expected).norm() < 1e-13);
    }

    #[test]
    fn failures_are_per_sigma() {
        let (p, b) = family();
        let basis = build_ck_exact(&p, &b, 2).unwrap();
        let rs = compress(&p, &b, &basis).unwrap();
        let out = solve_online(&rs, &[vec![1.0, 1.0], vec![-1.0, -1.0], vec![2.0, 0.5]]);
        assert!(out[0].is_ok());
        assert!(matches!(out[1], Err(Error::NotPositiveDefinite(_))));
        assert!(out[2].is_ok());
        assert!(rs.solve(&[1.0]).is_err());
    }

    #[test]
    fn galerkin_error_of_zero_is_solution_norm() {
        let (p, b) = family();
        let sigma = [1.0, 0.5];
        let x = krylov::direct_solve(&p, &sigma, &b).unwrap();
        let e = galerkin_error(&p, &b, &sigma, &DVector::zeros(3)).unwrap();
        assert!((e - p.a_norm(&sigma, &x).unwrap()).abs() < 1e-13);
        assert!(galerkin_error(&p, &b, &sigma, &x).unwrap() < 1e-12 * e);
    }
}
