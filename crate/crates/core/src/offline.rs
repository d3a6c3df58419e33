//! Offline construction of compound Krylov bases.
//!
//! All builders start from `Q = [b/‖b‖₂]` and grow the basis one step at a
//! time. Step `k` adds an orthonormal basis of the part of the `k`-th
//! linearisation matrix (exact, truncated, or recursively truncated) that is
//! not already in `range(Q)`:
//!
//! - [`build_ck_exact`] forms `L^k(b)` explicitly and keeps its numerical
//!   range. Small instances only.
//! - [`build_ck1`] advances the normal form `L_k L_kᵀ` and keeps the
//!   eigenvectors of `(I − QQᵀ) L_k L_kᵀ (I − QQᵀ)` whose singular values
//!   `√λ` reach the step cut-off `δ_k`.
//! - [`build_ck2`] carries a low-rank factor `C_k = U_r Σ_r` and takes the
//!   `δ_k`-accurate SVD of `(I − QQᵀ) L(C_{k−1})` at each step.
//!
//! Every basis of order `j` built with a schedule is a column prefix of the
//! basis of order `j + 1` built with the extended schedule.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::krylov;
use crate::linalg;
use crate::linearise::{self, NormalForm};
use crate::paramsys::ParametricMatrix;

/// Relative rank tolerance used by [`build_ck_exact`].
pub const EXACT_RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Ck1,
    Ck2,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Ck1 => "ck1",
            Method::Ck2 => "ck2",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Method::Exact),
            "ck1" => Ok(Method::Ck1),
            "ck2" => Ok(Method::Ck2),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

/// Per-step cut-off tolerances `δ₁ … δ_{j−1}` for a basis of order `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CutoffSchedule {
    deltas: Vec<f64>,
}

impl CutoffSchedule {
    pub fn new(deltas: Vec<f64>) -> Result<Self> {
        if let Some(bad) = deltas.iter().find(|d| !(**d > 0.0) || !d.is_finite()) {
            return Err(Error::InvalidArgument(format!("cut-off tolerance {bad} must be positive and finite")));
        }
        Ok(Self { deltas })
    }

    /// `δ_k = δ` for `k = 1 … j−1`.
    pub fn constant(delta: f64, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("order must be at least 1".into()));
        }
        Self::new(vec![delta; order - 1])
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    /// The order `j` this schedule builds (`deltas.len() + 1`).
    pub fn order(&self) -> usize {
        self.deltas.len() + 1
    }

    /// The schedule for a lower order `j` (its first `j − 1` tolerances).
    pub fn prefix(&self, order: usize) -> Self {
        Self {
            deltas: self.deltas[..order.saturating_sub(1).min(self.deltas.len())].to_vec(),
        }
    }

    /// Same schedule with every tolerance scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.deltas.iter().map(|d| d * factor).collect())
    }
}

/// Rank of the `δ`-accurate truncation of a nonincreasing spectrum: the
/// largest `r` with `values[r−1] ≥ δ`, so ties at `δ` are kept.
pub fn truncate_spectrum(values: &[f64], delta: f64) -> Result<usize> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("cut-off {delta} must be positive")));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("spectrum contains NaN".into()));
    }
    if values.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidArgument("spectrum is not sorted nonincreasing".into()));
    }
    Ok(values.iter().take_while(|&&v| v >= delta).count())
}

/// Singular values seen at one growth step, nonincreasing, with the number
/// kept by the truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSpectrum {
    /// Right-hand side the values belong to (non-zero only for merged bases).
    pub rhs: usize,
    /// Growth step `k ≥ 1`.
    pub step: usize,
    pub values: Vec<f64>,
    pub retained: usize,
}

/// The low-rank carrier `C_k = U_r Σ_r` of the CK² recursion.
#[derive(Debug, Clone)]
pub struct LowRankCarrier {
    pub step: usize,
    pub c: DMatrix<f64>,
}

/// Which carrier recursion [`build_ck2_with`] follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ck2Variant {
    /// The carrier is the truncated SVD of the projected block
    /// `(I − QQᵀ) L(C_{k−1})`, the same factorisation that extends `Q`.
    #[default]
    Projected,
    /// The carrier is the truncated SVD of the unprojected `L(C_{k−1})`,
    /// so that `range(C_k)` equals the range of the approximate
    /// linearisation matrix `L̂_k`; `Q` is extended by `range(C_k)`.
    Unprojected,
}

/// An orthonormal basis of a compound Krylov subspace with build metadata.
#[derive(Debug, Clone)]
pub struct ReducedBasis {
    q: DMatrix<f64>,
    method: Method,
    order: usize,
    schedule: Option<CutoffSchedule>,
    /// Columns contributed by each step; entry 0 is the initial block
    /// (one column per right-hand side).
    block_sizes: Vec<usize>,
    spectra: Vec<StepSpectrum>,
}

impl ReducedBasis {
    /// Assembles a basis from stored parts, checking consistency.
    pub fn from_parts(
        q: DMatrix<f64>,
        method: Method,
        order: usize,
        schedule: Option<CutoffSchedule>,
        block_sizes: Vec<usize>,
    ) -> Result<Self> {
        let total: usize = block_sizes.iter().sum();
        if total != q.ncols() {
            return Err(Error::DimensionMismatch {
                what: "basis columns vs block sizes",
                expected: total,
                got: q.ncols(),
            });
        }
        if block_sizes.len() != order {
            return Err(Error::DimensionMismatch {
                what: "block count vs order",
                expected: order,
                got: block_sizes.len(),
            });
        }
        if let Some(s) = &schedule {
            if s.order() != order {
                return Err(Error::DimensionMismatch {
                    what: "schedule order",
                    expected: order,
                    got: s.order(),
                });
            }
        }
        Ok(Self {
            q,
            method,
            order,
            schedule,
            block_sizes,
            spectra: Vec::new(),
        })
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    /// Number of basis columns `m`.
    pub fn dim(&self) -> usize {
        self.q.ncols()
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn schedule(&self) -> Option<&CutoffSchedule> {
        self.schedule.as_ref()
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    /// Columns added at steps `1 … j−1`.
    pub fn ranks(&self) -> &[usize] {
        &self.block_sizes[1..]
    }

    pub fn spectra(&self) -> &[StepSpectrum] {
        &self.spectra
    }

    pub fn orthonormality_defect(&self) -> f64 {
        linalg::orthonormality_defect(&self.q)
    }

    /// The nested basis of a lower order: a column prefix of this one.
    pub fn truncate_order(&self, order: usize) -> Result<Self> {
        if order == 0 || order > self.order {
            return Err(Error::InvalidArgument(format!(
                "cannot truncate a basis of order {} to order {order}",
                self.order
            )));
        }
        let block_sizes = self.block_sizes[..order].to_vec();
        let m: usize = block_sizes.iter().sum();
        Ok(Self {
            q: self.q.columns(0, m).into_owned(),
            method: self.method,
            order,
            schedule: self.schedule.as_ref().map(|s| s.prefix(order)),
            block_sizes,
            spectra: self.spectra.iter().filter(|s| s.step < order).cloned().collect(),
        })
    }

    /// Union of two bases of the same order built for different right-hand
    /// sides. Step blocks are interleaved (`self` first) so that truncating
    /// the result by order still gives nested bases.
    pub fn merge(&self, other: &ReducedBasis) -> Result<Self> {
        if self.n() != other.n() {
            return Err(Error::DimensionMismatch {
                what: "merged basis rows",
                expected: self.n(),
                got: other.n(),
            });
        }
        let order = self.order.max(other.order);
        let mut cols: Vec<DVector<f64>> = Vec::with_capacity(self.dim() + other.dim());
        let mut block_sizes = Vec::with_capacity(order);
        let offsets = |sizes: &[usize]| -> Vec<usize> {
            let mut acc = 0;
            sizes
                .iter()
                .map(|s| {
                    let o = acc;
                    acc += s;
                    o
                })
                .collect()
        };
        let (off_a, off_b) = (offsets(&self.block_sizes), offsets(&other.block_sizes));
        for t in 0..order {
            let mut added = 0;
            for (basis, offs) in [(self, &off_a), (other, &off_b)] {
                if t < basis.block_sizes.len() {
                    let block = basis.q.columns(offs[t], basis.block_sizes[t]).into_owned();
                    added += linalg::append_orthonormal(&mut cols, &block);
                }
            }
            block_sizes.push(added);
        }
        let rhs_shift = self.spectra.iter().map(|s| s.rhs + 1).max().unwrap_or(1);
        let mut spectra = self.spectra.clone();
        spectra.extend(other.spectra.iter().map(|s| StepSpectrum {
            rhs: s.rhs + rhs_shift,
            ..s.clone()
        }));
        Ok(Self {
            q: linalg::from_columns(self.n(), &cols),
            method: self.method,
            order,
            schedule: if self.order >= other.order {
                self.schedule.clone()
            } else {
                other.schedule.clone()
            },
            block_sizes,
            spectra,
        })
    }
}

fn check_inputs(p: &ParametricMatrix, b: &DVector<f64>, order: usize) -> Result<f64> {
    if b.len() != p.n() {
        return Err(Error::DimensionMismatch {
            what: "right-hand side length",
            expected: p.n(),
            got: b.len(),
        });
    }
    if order == 0 {
        return Err(Error::InvalidArgument("order must be at least 1".into()));
    }
    let norm = b.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::InvalidArgument("right-hand side must be a nonzero finite vector".into()));
    }
    Ok(norm)
}

fn check_schedule(order: usize, schedule: &CutoffSchedule) -> Result<()> {
    if schedule.order() != order {
        return Err(Error::DimensionMismatch {
            what: "cut-off schedule length (order − 1)",
            expected: order - 1,
            got: schedule.deltas().len(),
        });
    }
    Ok(())
}

/// Basis of `CK¹_j`: truncated eigendecompositions of the projected normal
/// forms.
pub fn build_ck1(
    p: &ParametricMatrix,
    b: &DVector<f64>,
    order: usize,
    schedule: &CutoffSchedule,
) -> Result<ReducedBasis> {
    let norm = check_inputs(p, b, order)?;
    check_schedule(order, schedule)?;
    let n = p.n();
    let mut cols = vec![b / norm];
    let mut block_sizes = vec![1];
    let mut spectra = Vec::with_capacity(order - 1);
    let mut normal = NormalForm::initial(b);
    for (step, &delta) in (1..order).zip(schedule.deltas()) {
        normal = linearise::normal_form_step(p, &normal).map_err(|e| Error::Build {
            step,
            reason: e.to_string(),
        })?;
        let q = linalg::from_columns(n, &cols);
        let projected = linalg::project_symmetric(normal.matrix(), &q);
        if projected.iter().any(|x| !x.is_finite()) {
            return Err(Error::Build {
                step,
                reason: "normal form is not finite".into(),
            });
        }
        let (lambdas, vectors) = linalg::sorted_symmetric_eigen(projected);
        let values: Vec<f64> = lambdas.iter().map(|l| l.max(0.0).sqrt()).collect();
        let r = truncate_spectrum(&values, delta).map_err(|e| Error::Build {
            step,
            reason: e.to_string(),
        })?;
        let added = linalg::append_orthonormal(&mut cols, &vectors.columns(0, r).into_owned());
        log::debug!("ck1 step {step}: retained {r}, appended {added}");
        block_sizes.push(added);
        spectra.push(StepSpectrum {
            rhs: 0,
            step,
            values,
            retained: r,
        });
    }
    Ok(ReducedBasis {
        q: linalg::from_columns(n, &cols),
        method: Method::Ck1,
        order,
        schedule: Some(schedule.clone()),
        block_sizes,
        spectra,
    })
}

/// Basis of `CK²_j` with the projected carrier recursion.
pub fn build_ck2(
    p: &ParametricMatrix,
    b: &DVector<f64>,
    order: usize,
    schedule: &CutoffSchedule,
) -> Result<ReducedBasis> {
    build_ck2_with(p, b, order, schedule, Ck2Variant::Projected).map(|(basis, _)| basis)
}

/// Basis of `CK²_j` together with the carriers `C_1 … C_{j−1}`.
pub fn build_ck2_with(
    p: &ParametricMatrix,
    b: &DVector<f64>,
    order: usize,
    schedule: &CutoffSchedule,
    variant: Ck2Variant,
) -> Result<(ReducedBasis, Vec<LowRankCarrier>)> {
    let norm = check_inputs(p, b, order)?;
    check_schedule(order, schedule)?;
    let n = p.n();
    let mut cols = vec![b / norm];
    let mut block_sizes = vec![1];
    let mut spectra = Vec::with_capacity(order - 1);
    let mut carriers = Vec::with_capacity(order - 1);
    let mut carrier: DMatrix<f64> = DMatrix::from_column_slice(n, 1, b.as_slice());
    let build_err = |step: usize| move |e: Error| Error::Build { step, reason: e.to_string() };

    for (step, &delta) in (1..order).zip(schedule.deltas()) {
        let lifted = linearise::apply_linearisation(p, &carrier).map_err(build_err(step))?;
        let q = linalg::from_columns(n, &cols);
        let (values, r, added) = match variant {
            Ck2Variant::Projected => {
                let projected = linalg::project_out(&lifted, &q);
                let (u, values) = linalg::sorted_left_svd(projected).map_err(build_err(step))?;
                let r = truncate_spectrum(&values, delta).map_err(build_err(step))?;
                let ur = u.columns(0, r).into_owned();
                let added = linalg::append_orthonormal(&mut cols, &ur);
                carrier = scale_columns(ur, &values[..r]);
                (values, r, added)
            }
            Ck2Variant::Unprojected => {
                let (u, values) = linalg::sorted_left_svd(lifted).map_err(build_err(step))?;
                let r = truncate_spectrum(&values, delta).map_err(build_err(step))?;
                let ur = u.columns(0, r).into_owned();
                let added = linalg::append_orthonormal(&mut cols, &ur);
                carrier = scale_columns(ur, &values[..r]);
                (values, r, added)
            }
        };
        log::debug!("ck2 step {step}: retained {r}, appended {added}");
        block_sizes.push(added);
        carriers.push(LowRankCarrier {
            step,
            c: carrier.clone(),
        });
        spectra.push(StepSpectrum {
            rhs: 0,
            step,
            values,
            retained: r,
        });
    }
    let basis = ReducedBasis {
        q: linalg::from_columns(n, &cols),
        method: Method::Ck2,
        order,
        schedule: Some(schedule.clone()),
        block_sizes,
        spectra,
    };
    Ok((basis, carriers))
}

fn scale_columns(mut u: DMatrix<f64>, values: &[f64]) -> DMatrix<f64> {
    for (mut col, &s) in u.column_iter_mut().zip(values) {
        col *= s;
    }
    u
}

/// Basis of the exact `CK_j = span{b} ⊕ range L¹(b) ⊕ … ⊕ range L^{j−1}(b)`,
/// forming each `L^k(b)` explicitly (guarded by the default explicit-power
/// budget).
pub fn build_ck_exact(p: &ParametricMatrix, b: &DVector<f64>, order: usize) -> Result<ReducedBasis> {
    build_ck_exact_with_budget(p, b, order, linearise::DEFAULT_EXPLICIT_ENTRIES)
}

pub fn build_ck_exact_with_budget(
    p: &ParametricMatrix,
    b: &DVector<f64>,
    order: usize,
    max_entries: usize,
) -> Result<ReducedBasis> {
    let norm = check_inputs(p, b, order)?;
    let n = p.n();
    let mut cols = vec![b / norm];
    let mut block_sizes = vec![1];
    let mut spectra = Vec::with_capacity(order.saturating_sub(1));
    let mut power: DMatrix<f64> = DMatrix::from_column_slice(n, 1, b.as_slice());
    for step in 1..order {
        let build_err = |e: Error| match e {
            e @ Error::BudgetExceeded { .. } => e,
            e => Error::Build {
                step,
                reason: e.to_string(),
            },
        };
        power = linearise::apply_linearisation_with_budget(p, &power, max_entries).map_err(build_err)?;
        let top = linalg::singular_values(&power).first().copied().unwrap_or(0.0);
        let q = linalg::from_columns(n, &cols);
        let (u, values) = linalg::sorted_left_svd(linalg::project_out(&power, &q)).map_err(build_err)?;
        let threshold = EXACT_RANK_TOLERANCE * top;
        let r = values.iter().take_while(|&&v| v > threshold).count();
        let added = linalg::append_orthonormal(&mut cols, &u.columns(0, r).into_owned());
        block_sizes.push(added);
        spectra.push(StepSpectrum {
            rhs: 0,
            step,
            values,
            retained: r,
        });
    }
    Ok(ReducedBasis {
        q: linalg::from_columns(n, &cols),
        method: Method::Exact,
        order,
        schedule: None,
        block_sizes,
        spectra,
    })
}

/// Dispatches to the builder for `method`. The exact builder ignores the
/// schedule.
pub fn build(
    method: Method,
    p: &ParametricMatrix,
    b: &DVector<f64>,
    order: usize,
    schedule: &CutoffSchedule,
) -> Result<ReducedBasis> {
    match method {
        Method::Exact => build_ck_exact(p, b, order),
        Method::Ck1 => build_ck1(p, b, order, schedule),
        Method::Ck2 => build_ck2(p, b, order, schedule),
    }
}

/// Left side of the CK¹ tolerance condition,
/// `λmax Σ_{k=1}^{j−1} δ_k |γ_{j,k+1}| ‖σ^⊗k‖₂`, with `‖σ^⊗k‖₂ = ‖σ‖₂^k`.
pub fn ck1_error_aggregate(deltas: &[f64], gamma: &[f64], lambda_max: f64, sigma_norm: f64) -> f64 {
    deltas
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let k = i + 1;
            d * gamma.get(k + 1).map_or(0.0, |g| g.abs()) * sigma_norm.powi(k as i32)
        })
        .sum::<f64>()
        * lambda_max
}

/// Left side of the CK² tolerance condition,
/// `λmax Σ_{k=1}^{j−1} |γ_{j,k+1}| Σ_{l=1}^{k} δ_l ‖A‖₂^{k−l} ‖σ‖₂^l`.
pub fn ck2_error_aggregate(deltas: &[f64], gamma: &[f64], lambda_max: f64, a_norm: f64, sigma_norm: f64) -> f64 {
    let mut total = 0.0;
    for k in 1..=deltas.len() {
        let inner: f64 = (1..=k)
            .map(|l| deltas[l - 1] * a_norm.powi((k - l) as i32) * sigma_norm.powi(l as i32))
            .sum();
        total += gamma.get(k + 1).map_or(0.0, |g| g.abs()) * inner;
    }
    lambda_max * total
}

/// A constant cut-off schedule for which the CK¹ tolerance condition holds
/// at level `tol` for every σ with `‖σ‖₂ ≤ sigma_norm_bound`,
/// `λmax(A(σ)) ≤ lambda_max_bound` and `κ(A(σ)) ≤ kappa_bound`.
///
/// The `γ` coefficients are evaluated on `[λmax/κ, λmax]` and the sum over
/// the `j − 1` steps is bounded by `j` times its largest term, giving
/// `δ = tol / (j · λmax · max_k |γ_{j,k+1}| ρ^k)`.
pub fn suggest_cutoffs(
    tol: f64,
    order: usize,
    kappa_bound: f64,
    lambda_max_bound: f64,
    sigma_norm_bound: f64,
) -> Result<CutoffSchedule> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    if order == 0 {
        return Err(Error::InvalidArgument("order must be at least 1".into()));
    }
    for (name, v) in [
        ("kappa_bound", kappa_bound),
        ("lambda_max_bound", lambda_max_bound),
        ("sigma_norm_bound", sigma_norm_bound),
    ] {
        if !v.is_finite() || !(v > 0.0) {
            return Err(Error::InvalidArgument(format!("{name} = {v} must be positive and finite")));
        }
    }
    if kappa_bound < 1.0 {
        return Err(Error::InvalidArgument(format!("kappa_bound = {kappa_bound} must be ≥ 1")));
    }
    if order == 1 {
        return CutoffSchedule::new(Vec::new());
    }
    let gamma = krylov::gamma_coeffs(lambda_max_bound / kappa_bound, lambda_max_bound, order)?;
    let worst = (1..order)
        .map(|k| gamma[k + 1].abs() * sigma_norm_bound.powi(k as i32))
        .fold(0.0, f64::max);
    let delta = tol / (order as f64 * lambda_max_bound * worst);
    if !delta.is_finite() || !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bounds produce an unusable cut-off ({delta})"
        )));
    }
    CutoffSchedule::constant(delta, order)
}
