//! The checkerboard and translated-hole benchmark families.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fem::assembly::{assemble_load, assemble_subdomain_stiffness, Coefficient};
use crate::fem::mesh::Mesh;
use crate::fem::precond::{precondition_split, SplitPreconditioned};
use crate::paramsys::{ParameterBox, ParameterVector, ParametricMatrix};

/// A generated FE family: raw stiffness terms and loads on the free nodes
/// plus their split-preconditioned form.
#[derive(Debug, Clone)]
pub struct FemProblem {
    pub mesh: Mesh,
    /// `Kᵢ`, one per parameter.
    pub stiffness_terms: Vec<DMatrix<f64>>,
    /// `b̂`. The hole problem carries two loads, `b̂₀` and `b̂₁`.
    pub loads: Vec<DVector<f64>>,
    pub split: SplitPreconditioned,
    pub parameter_box: ParameterBox,
    /// Lower bound on the spectrum of `A(σ)` over the box.
    pub alpha: f64,
    /// Upper bound on the spectrum of `A(σ)` over the box.
    pub beta: f64,
}

impl FemProblem {
    /// `{R⁻¹ Kᵢ R⁻ᵀ}`.
    pub fn preconditioned(&self) -> &ParametricMatrix {
        &self.split.family
    }

    /// `R⁻¹ b̂` for the primary load.
    pub fn rhs(&self) -> &DVector<f64> {
        &self.split.loads[0]
    }

    /// Transformed loads in the order of [`FemProblem::loads`].
    pub fn rhs_all(&self) -> &[DVector<f64>] {
        &self.split.loads
    }

    pub fn kbar_factor(&self) -> DMatrix<f64> {
        self.split.factor()
    }

    /// Upper bound `β/α` on the condition number of `A(σ)`.
    pub fn kappa_bound(&self) -> f64 {
        self.beta / self.alpha
    }

    pub fn n(&self) -> usize {
        self.split.family.n()
    }

    pub fn s(&self) -> usize {
        self.split.family.s()
    }

    /// `K(σ) = Σ σᵢ Kᵢ`.
    pub fn stiffness(&self, sigma: &[f64]) -> Result<DMatrix<f64>> {
        ParametricMatrix::new(self.stiffness_terms.clone())?.evaluate(sigma)
    }

    /// Scatters a free-node vector (in original, unpreconditioned unknowns)
    /// to all mesh nodes, with zeros on Dirichlet nodes.
    pub fn to_nodal(&self, x_hat: &DVector<f64>) -> Vec<f64> {
        self.mesh
            .free_index()
            .iter()
            .map(|i| i.map_or(0.0, |i| x_hat[i]))
            .collect()
    }
}

fn finish(
    mesh: Mesh,
    terms: Vec<DMatrix<f64>>,
    loads: Vec<DVector<f64>>,
    parameter_box: ParameterBox,
    alpha: f64,
    beta: f64,
) -> Result<FemProblem> {
    let n = terms[0].nrows();
    let mut kbar = DMatrix::zeros(n, n);
    for k in &terms {
        kbar += k;
    }
    let split = precondition_split(terms.clone(), &kbar, &loads)?;
    log::debug!("FE problem: {} free nodes, {} terms", n, terms.len());
    Ok(FemProblem {
        mesh,
        stiffness_terms: terms,
        loads,
        split,
        parameter_box,
        alpha,
        beta,
    })
}

/// The unit-square mesh tagged by an `N × M` grid of subdomains (`N` rows
/// along `y`, `M` columns along `x`), tags row-major from 1.
pub fn checkerboard_mesh(rows: usize, cols: usize, divisions: usize) -> Result<Mesh> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument("checkerboard needs at least one subdomain".into()));
    }
    if !divisions.is_multiple_of(rows) || !divisions.is_multiple_of(cols) {
        return Err(Error::InvalidArgument(format!(
            "{divisions} divisions do not conform to a {rows}x{cols} checkerboard"
        )));
    }
    let cell = |v: f64, count: usize| ((v * count as f64).floor() as usize).min(count - 1);
    Mesh::unit_square(divisions, |c| cell(c[1], rows) * cols + cell(c[0], cols) + 1)
}

/// Checkerboard family with conductivity `σᵢ` on subdomain `i` and box
/// `[1, a]^{NM}`.
pub fn gen_checkerboard_problem(rows: usize, cols: usize, divisions: usize, a: f64) -> Result<FemProblem> {
    if !(a >= 1.0) || !a.is_finite() {
        return Err(Error::InvalidArgument(format!("checkerboard upper bound a={a} must be ≥ 1")));
    }
    let mesh = checkerboard_mesh(rows, cols, divisions)?;
    let s = rows * cols;
    let patterns: Vec<Vec<(usize, Coefficient)>> = (1..=s).map(|tag| vec![(tag, Coefficient::identity())]).collect();
    let terms = assemble_subdomain_stiffness(&mesh, &patterns)?;
    let load = assemble_load(&mesh, |_| 1.0);
    finish(mesh, terms, vec![load], ParameterBox::cube(s, 1.0, a)?, 1.0, a)
}

/// Geometry of the translated-hole problem: a disc of radius `radius`
/// centred at `center`, moved vertically by `l ∈ (−a, a)` through a map that
/// is piecewise linear in `y` on three horizontal strips.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoleGeometry {
    pub center: [f64; 2],
    pub radius: f64,
    pub a: f64,
}

impl HoleGeometry {
    pub fn new(a: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0 / 3.0) {
            return Err(Error::InvalidArgument(format!("translation bound a={a} must lie in (0, 1/3)")));
        }
        Ok(Self {
            center: [0.5, 0.5],
            radius: 0.15,
            a,
        })
    }

    /// Strip index 1, 2 or 3 for a height `y` (strips split at 1/3, 2/3).
    pub fn strip(y: f64) -> usize {
        if y < 1.0 / 3.0 {
            1
        } else if y < 2.0 / 3.0 {
            2
        } else {
            3
        }
    }

    /// `τ'` on each strip: the derivative of the strip function.
    pub fn tau_prime(strip: usize) -> f64 {
        match strip {
            1 => 3.0,
            3 => -3.0,
            _ => 0.0,
        }
    }

    /// The transformed map `F_l(x, y) = (x, y + l·τ(y))`.
    pub fn map(&self, l: f64, p: [f64; 2]) -> [f64; 2] {
        let y = p[1];
        let tau = if y < 1.0 / 3.0 {
            3.0 * y
        } else if y < 2.0 / 3.0 {
            1.0
        } else {
            3.0 * (1.0 - y)
        };
        [p[0], y + l * tau]
    }

    pub fn sigma_of_l(&self, l: f64) -> Result<ParameterVector> {
        sigma_of_l(l, self.a)
    }

    /// Box containing `σ(l)` for every `|l| ≤ a`.
    pub fn parameter_box(&self) -> Result<ParameterBox> {
        let t = 3.0 * self.a;
        ParameterBox::new(
            vec![1.0 - t, 1.0 / (1.0 + t), 1.0, 1.0, 1.0 - t, 1.0 / (1.0 + t)],
            vec![1.0 + t, 1.0 / (1.0 - t), 1.0, 1.0, 1.0 + t, 1.0 / (1.0 - t)],
        )
    }
}

/// `σ(l) = (1+3l, (1+3l)⁻¹, 1, 1, 1−3l, (1−3l)⁻¹)`.
pub fn sigma_of_l(l: f64, a: f64) -> Result<ParameterVector> {
    if !(l.abs() < a) {
        return Err(Error::InvalidArgument(format!("translation l={l} must satisfy |l| < a={a}")));
    }
    let (up, down) = (1.0 + 3.0 * l, 1.0 - 3.0 * l);
    Ok(ParameterVector::new(vec![up, 1.0 / up, 1.0, 1.0, down, 1.0 / down]))
}

/// Unit square minus the disc `B((0.5, 0.5), 0.15)`, tagged by strip.
pub fn hole_mesh(divisions: usize) -> Result<Mesh> {
    if divisions == 0 || !divisions.is_multiple_of(3) {
        return Err(Error::InvalidArgument(format!(
            "{divisions} divisions do not conform to the three strips"
        )));
    }
    let mesh = Mesh::unit_square_with_hole(divisions, [0.5, 0.5], 0.15, |c| HoleGeometry::strip(c[1]))?;
    mesh.validate(Some(3))?;
    Ok(mesh)
}

/// The hole mesh with three strips, six
/// diagonal coefficient terms (`x` then `y` component per strip) and the
/// two loads `b̂₀` (from `f = 1`) and `b̂₁` (from `f = τ'`). The solution for
/// translation `l` is `û₀ + l·û₁`.
pub fn gen_hole_problem(divisions: usize, a: f64) -> Result<FemProblem> {
    let geom = HoleGeometry::new(a)?;
    let mesh = hole_mesh(divisions)?;
    let ex = Coefficient::new(1.0, 0.0, 0.0, 0.0);
    let ey = Coefficient::new(0.0, 0.0, 0.0, 1.0);
    let patterns: Vec<Vec<(usize, Coefficient)>> =
        (1..=3).flat_map(|strip| [vec![(strip, ex)], vec![(strip, ey)]]).collect();
    let terms = assemble_subdomain_stiffness(&mesh, &patterns)?;
    let b0 = assemble_load(&mesh, |_| 1.0);
    let b1 = assemble_load(&mesh, HoleGeometry::tau_prime);
    let t = 3.0 * a;
    finish(mesh, terms, vec![b0, b1], geom.parameter_box()?, 1.0 - t, 1.0 / (1.0 - t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkerboard_identity_at_ones() {
        let p = gen_checkerboard_problem(2, 2, 8, 20.0).unwrap();
        assert_eq!(p.n(), 49);
        assert_eq!(p.s(), 4);
        let a = p.preconditioned().evaluate(&[1.0; 4]).unwrap();
        assert!((a - DMatrix::<f64>::identity(49, 49)).norm() < 1e-10);
        p.mesh.validate(Some(4)).unwrap();
    }

    #[test]
    fn checkerboard_tags_are_row_major() {
        let p = gen_checkerboard_problem(2, 4, 8, 5.0).unwrap();
        let t = p.mesh.triangles.iter().find(|t| {
            let c = p.mesh.centroid(t);
            c[0] > 0.75 && c[1] < 0.5
        });
        assert_eq!(t.unwrap().tag, 4);
        assert_eq!(p.mesh.max_tag(), 8);
    }

    #[test]
    fn nonconforming_divisions_rejected() {
        assert!(gen_checkerboard_problem(3, 2, 8, 2.0).is_err());
        assert!(gen_hole_problem(10, 0.2).is_err());
        assert!(gen_hole_problem(12, 0.34).is_err());
    }

    #[test]
    fn sigma_of_l_examples() {
        let s = sigma_of_l(0.2, 0.3).unwrap();
        let want = [1.6, 0.625, 1.0, 1.0, 0.4, 2.5];
        for (x, w) in s.iter().zip(want) {
            assert!((x - w).abs() < 1e-14);
        }
        assert!(sigma_of_l(0.3, 0.3).is_err());
        assert_eq!(sigma_of_l(0.0, 0.1).unwrap().0, vec![1.0; 6]);
    }

    #[test]
    fn hole_problem_identity_at_zero_translation() {
        let p = gen_hole_problem(12, 0.3).unwrap();
        let a = p.preconditioned().evaluate(&sigma_of_l(0.0, 0.3).unwrap()).unwrap();
        assert!((a - DMatrix::<f64>::identity(p.n(), p.n())).norm() < 1e-10);
        assert_eq!(p.loads.len(), 2);
        assert!((p.kappa_bound() - 100.0).abs() < 1e-9);
        for l in [-0.29, 0.0, 0.29] {
            assert!(p.parameter_box.contains(&sigma_of_l(l, 0.3).unwrap()));
        }
    }
}
