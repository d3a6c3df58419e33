//! Compound Krylov (CK) reduced-basis solvers for parametric linear systems
//! `A(σ) x = b` whose coefficient matrix depends affinely on the parameter,
//! `A(σ) = Σ σᵢ Aᵢ`, and is symmetric positive definite on the admissible set.
//!
//! The work is split into an expensive σ-independent offline stage, which
//! builds an orthonormal basis of a compound Krylov subspace
//! ([`offline::build_ck1`], [`offline::build_ck2`], [`offline::build_ck_exact`]),
//! and a cheap online stage that projects the family onto that basis once
//! ([`online::compress`]) and then solves a small dense system per parameter
//! ([`online::solve_online`]).
//!
//! [`krylov`] carries the reference machinery (CG, dense direct solves, the
//! Chebyshev bound) used to check the reduced solutions, [`fem`] generates the
//! two finite element benchmark families and [`harness`] drives experiments
//! end to end, writing CSV reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail these checks

pub mod error;
pub mod fem;
pub mod harness;
pub mod io;
pub mod krylov;
pub mod linalg;
pub mod linearise;
pub mod offline;
pub mod online;
pub mod paramsys;

pub use error::{Error, Result};
pub use offline::{CutoffSchedule, Method, ReducedBasis};
pub use online::ReducedSystem;
pub use paramsys::{ParameterBox, ParameterVector, ParametricMatrix};
