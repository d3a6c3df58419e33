//! Reference solvers used to judge the reduced solutions: dense Cholesky
//! solves, plain conjugate gradients with a per-iterate error trace, the
//! classical Chebyshev error bound and the Chebyshev candidate `v*_j`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::paramsys::ParametricMatrix;

/// Largest order for which [`gamma_coeffs`] is supported. The monomial
/// expansion of the scaled Chebyshev polynomial loses accuracy quickly as the
/// order grows.
pub const MAX_GAMMA_ORDER: usize = 30;

/// Solves `A x = b` for a dense SPD matrix by Cholesky factorisation.
pub fn dense_spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows() != b.len() || a.ncols() != b.len() {
        return Err(Error::DimensionMismatch {
            what: "system dimension",
            expected: a.nrows(),
            got: b.len(),
        });
    }
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorisation failed".into()))?;
    Ok(chol.solve(b))
}

/// `x(σ)` by a dense direct solve of `A(σ) x = b`.
pub fn direct_solve(p: &ParametricMatrix, sigma: &[f64], b: &DVector<f64>) -> Result<DVector<f64>> {
    let a = p.evaluate(sigma)?;
    dense_spd_solve(&a, b)
}

/// `(λmin, λmax)` of `A(σ)` by a dense symmetric eigensolve.
pub fn spectral_bounds(p: &ParametricMatrix, sigma: &[f64]) -> Result<(f64, f64)> {
    Ok(linalg::extreme_eigenvalues(&p.evaluate(sigma)?))
}

#[derive(Debug, Clone)]
pub struct CgIterate {
    /// Iteration index; iterate `j` lies in `K_j(A, b)`.
    pub j: usize,
    pub x: DVector<f64>,
    /// `‖x_exact − x‖_A`, when an exact solution was supplied.
    pub a_norm_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CgTrace {
    pub iterates: Vec<CgIterate>,
    /// Spectral condition number of `A`, when it was computed.
    pub kappa_estimate: Option<f64>,
    /// Iteration at which the residual vanished to rounding level; later
    /// iterates equal the last recorded one.
    pub converged_at: Option<usize>,
    /// Iteration at which a non-positive curvature `pᵀAp ≤ 0` was met.
    pub breakdown: Option<usize>,
}

impl CgTrace {
    /// Iterate `j`, or the last recorded iterate when the iteration stopped
    /// early. `j = 0` is not stored (it is the zero vector).
    pub fn iterate(&self, j: usize) -> Option<&CgIterate> {
        if j == 0 || self.iterates.is_empty() {
            return None;
        }
        let idx = j.min(self.iterates.len()) - 1;
        self.iterates.get(idx)
    }

    pub fn last(&self) -> Option<&CgIterate> {
        self.iterates.last()
    }
}

/// CG on `A(σ) x = b` from a zero initial guess, recording `j_max` iterates
/// and estimating `κ(A(σ))` by a dense eigensolve.
pub fn cg_solve(
    p: &ParametricMatrix,
    sigma: &[f64],
    b: &DVector<f64>,
    j_max: usize,
    x_exact: Option<&DVector<f64>>,
) -> Result<CgTrace> {
    let a = p.evaluate(sigma)?;
    cg_solve_dense(&a, b, j_max, x_exact, true)
}

/// CG on a dense SPD system. See [`cg_solve`].
pub fn cg_solve_dense(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    j_max: usize,
    x_exact: Option<&DVector<f64>>,
    estimate_kappa: bool,
) -> Result<CgTrace> {
    let n = b.len();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "system dimension",
            expected: a.nrows(),
            got: n,
        });
    }
    if let Some(x) = x_exact {
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                what: "exact solution length",
                expected: n,
                got: x.len(),
            });
        }
    }
    let kappa_estimate = if estimate_kappa {
        let (lo, hi) = linalg::extreme_eigenvalues(a);
        if lo <= 0.0 {
            return Err(Error::NotPositiveDefinite(format!("λmin = {lo:e}")));
        }
        Some(hi / lo)
    } else {
        None
    };

    let error_of = |x: &DVector<f64>| {
        x_exact.map(|xe| {
            let e = xe - x;
            e.dot(&(a * &e)).max(0.0).sqrt()
        })
    };

    let b_norm = b.norm();
    let mut x = DVector::zeros(n);
    let mut r = b.clone();
    let mut dir = r.clone();
    let mut rr = r.dot(&r);
    let mut trace = CgTrace {
        iterates: Vec::with_capacity(j_max),
        kappa_estimate,
        converged_at: None,
        breakdown: None,
    };
    if b_norm == 0.0 {
        trace.converged_at = Some(0);
        return Ok(trace);
    }
    for j in 1..=j_max {
        let ad = a * &dir;
        let curvature = dir.dot(&ad);
        if curvature <= 0.0 || !curvature.is_finite() {
            trace.breakdown = Some(j);
            break;
        }
        let alpha = rr / curvature;
        x.axpy(alpha, &dir, 1.0);
        r.axpy(-alpha, &ad, 1.0);
        trace.iterates.push(CgIterate {
            j,
            x: x.clone(),
            a_norm_error: error_of(&x),
        });
        let rr_next = r.dot(&r);
        if rr_next.sqrt() <= 1e-15 * b_norm {
            trace.converged_at = Some(j);
            break;
        }
        let beta = rr_next / rr;
        rr = rr_next;
        dir *= beta;
        dir += &r;
    }
    Ok(trace)
}

/// `2 ((√κ − 1)/(√κ + 1))^j`.
pub fn cheb_bound(kappa: f64, j: usize) -> Result<f64> {
    if !(kappa >= 1.0) || !kappa.is_finite() {
        return Err(Error::InvalidArgument(format!("condition number {kappa} must be finite and ≥ 1")));
    }
    let root = kappa.sqrt();
    let rate = (root - 1.0) / (root + 1.0);
    Ok(2.0 * rate.powi(j as i32))
}

/// Monomial coefficients `γ_{j0} … γ_{jj}` of the scaled and translated
/// Chebyshev polynomial
/// `q*_j(t) = T_j((λmax + λmin − 2t)/(λmax − λmin)) / T_j((λmax + λmin)/(λmax − λmin))`,
/// the degree-`j` polynomial with `q*_j(0) = 1` of least maximum modulus on
/// `[λmin, λmax]`. When `λmin = λmax = λ` the limit `(1 − t/λ)^j` is returned.
pub fn gamma_coeffs(lambda_min: f64, lambda_max: f64, j: usize) -> Result<Vec<f64>> {
    if !(lambda_min > 0.0) || !(lambda_max >= lambda_min) || !lambda_max.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "spectral bounds must satisfy 0 < λmin ≤ λmax, got [{lambda_min}, {lambda_max}]"
        )));
    }
    if j > MAX_GAMMA_ORDER {
        return Err(Error::InvalidArgument(format!(
            "order {j} exceeds the supported maximum {MAX_GAMMA_ORDER}"
        )));
    }
    if lambda_max == lambda_min {
        // (1 − t/λ)^j via binomial coefficients
        let mut coeffs = vec![0.0; j + 1];
        let mut binom = 1.0;
        for (k, c) in coeffs.iter_mut().enumerate() {
            *c = binom * (-1.0 / lambda_min).powi(k as i32);
            binom = binom * (j - k) as f64 / (k + 1) as f64;
        }
        return Ok(coeffs);
    }
    let width = lambda_max - lambda_min;
    let c0 = (lambda_max + lambda_min) / width;
    let c1 = -2.0 / width;
    // T_k(c0 + c1 t) by the three-term recurrence on coefficient vectors
    let mut prev = vec![1.0];
    let mut cur = vec![c0, c1];
    if j == 0 {
        return Ok(vec![1.0]);
    }
    for _ in 1..j {
        let mut next = vec![0.0; cur.len() + 1];
        for (k, &c) in cur.iter().enumerate() {
            next[k] += 2.0 * c0 * c;
            next[k + 1] += 2.0 * c1 * c;
        }
        for (k, &c) in prev.iter().enumerate() {
            next[k] -= c;
        }
        prev = cur;
        cur = next;
    }
    let scale = cur[0];
    Ok(cur.into_iter().map(|c| c / scale).collect())
}

/// The Chebyshev candidate `v*_j ∈ K_j(A(σ), b)` whose error multiplier is
/// `q*_j`, i.e. `x − v*_j = q*_j(A(σ)) x`:
/// `v*_j = −Σ_{k=1…j} γ_jk A(σ)^{k−1} b`.
pub fn v_star(
    p: &ParametricMatrix,
    sigma: &[f64],
    b: &DVector<f64>,
    j: usize,
    lambda_min: f64,
    lambda_max: f64,
) -> Result<DVector<f64>> {
    let gamma = gamma_coeffs(lambda_min, lambda_max, j)?;
    let mut power = b.clone();
    let mut out = DVector::zeros(b.len());
    for (k, g) in gamma.iter().enumerate().skip(1) {
        if k > 1 {
            power = p.apply(sigma, &power)?;
        }
        out.axpy(-g, &power, 1.0);
    }
    if j == 0 {
        // K_0 is trivial; keep dimension checks consistent
        p.apply(sigma, b)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cheb_bound_closed_forms() {
        assert_eq!(cheb_bound(1.0, 3).unwrap(), 0.0);
        assert_eq!(cheb_bound(7.0, 0).unwrap(), 2.0);
        assert!((cheb_bound(4.0, 2).unwrap() - 2.0 / 9.0).abs() < 1e-15);
        assert!(cheb_bound(0.5, 1).is_err());
        assert!(cheb_bound(f64::NAN, 1).is_err());
    }

    #[test]
    fn gamma_first_order() {
        let g = gamma_coeffs(0.5, 3.0, 1).unwrap();
        assert_eq!(g.len(), 2);
        assert!((g[0] - 1.0).abs() < 1e-15);
        assert!((g[1] + 2.0 / 3.5).abs() < 1e-15);
        let deg = gamma_coeffs(2.0, 2.0, 2).unwrap();
        assert_eq!(deg, vec![1.0, -1.0, 0.25]);
        assert!(gamma_coeffs(0.0, 1.0, 2).is_err());
        assert!(gamma_coeffs(2.0, 1.0, 2).is_err());
        assert!(gamma_coeffs(1.0, 2.0, MAX_GAMMA_ORDER + 1).is_err());
    }

    #[test]
    fn direct_solve_identity_and_diagonal() {
        let p = ParametricMatrix::new(vec![DMatrix::identity(3, 3)]).unwrap();
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!((direct_solve(&p, &[1.0], &b).unwrap() - &b).norm() < 1e-15);
        let d = ParametricMatrix::new(vec![DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 4.0, 8.0]))]).unwrap();
        let x = direct_solve(&d, &[1.0], &b).unwrap();
        assert!((x - DVector::from_vec(vec![0.5, 0.5, 0.375])).norm() < 1e-15);
        assert!(matches!(direct_solve(&d, &[-1.0], &b), Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn cg_eigenvector_converges_in_one_step() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0, 5.0]));
        let b = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        let x = DVector::from_vec(vec![0.0, 1.0 / 3.0, 0.0]);
        let trace = cg_solve_dense(&a, &b, 3, Some(&x), true).unwrap();
        assert!(trace.iterate(1).unwrap().a_norm_error.unwrap() <= 1e-12);
        assert_eq!(trace.converged_at, Some(1));
        assert!((trace.kappa_estimate.unwrap() - 2.5).abs() < 1e-12);
        assert_eq!(trace.iterate(3).unwrap().j, 1);
    }

    #[test]
    fn cg_reports_breakdown_on_indefinite() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        let b = DVector::from_vec(vec![1.0, 1.0]);
        let trace = cg_solve_dense(&a, &b, 2, None, false).unwrap();
        assert_eq!(trace.breakdown, Some(1));
        assert!(trace.iterates.is_empty());
    }

    #[test]
    fn v_star_first_order_is_richardson_step() {
        let p = ParametricMatrix::new(vec![DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0]))]).unwrap();
        let b = DVector::from_vec(vec![1.0, 1.0]);
        let v = v_star(&p, &[1.0], &b, 1, 1.0, 3.0).unwrap();
        let g = gamma_coeffs(1.0, 3.0, 1).unwrap();
        assert!((v - &b * (-g[1])).norm() < 1e-15);
    }
}
