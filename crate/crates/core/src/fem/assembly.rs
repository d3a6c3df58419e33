//! P1 stiffness and load assembly with piecewise-constant coefficient
//! tensors, Dirichlet nodes eliminated.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix2x3, Matrix3};

use crate::error::{Error, Result};
use crate::fem::mesh::Mesh;

/// A constant symmetric 2×2 coefficient tensor on one subdomain.
pub type Coefficient = Matrix2<f64>;

/// Element stiffness `area · Gᵀ C G` for the P1 basis on a triangle, where
/// the columns of `G` are the (constant) basis-function gradients.
pub fn local_stiffness(vertices: [[f64; 2]; 3], coef: &Coefficient) -> Result<Matrix3<f64>> {
    let [a, b, c] = vertices;
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let area = 0.5 * det;
    if !(area.abs() > 1e-300) || !area.is_finite() {
        return Err(Error::DegenerateElement { index: usize::MAX, area });
    }
    let g = Matrix2x3::new(
        b[1] - c[1],
        c[1] - a[1],
        a[1] - b[1],
        c[0] - b[0],
        a[0] - c[0],
        b[0] - a[0],
    ) / det;
    Ok(g.transpose() * coef * g * area.abs())
}

/// Stiffness over the whole node set (no boundary elimination) for a
/// coefficient given per subdomain tag; tags mapped to `None` contribute
/// nothing.
pub fn assemble_full_stiffness(mesh: &Mesh, coef: impl Fn(usize) -> Option<Coefficient>) -> Result<DMatrix<f64>> {
    let n = mesh.node_count();
    let mut k = DMatrix::zeros(n, n);
    for (idx, t) in mesh.triangles.iter().enumerate() {
        let Some(c) = coef(t.tag) else { continue };
        let local = local_stiffness(t.nodes.map(|v| mesh.nodes[v]), &c).map_err(|e| match e {
            Error::DegenerateElement { area, .. } => Error::DegenerateElement { index: idx, area },
            e => e,
        })?;
        for (a, &ga) in t.nodes.iter().enumerate() {
            for (b, &gb) in t.nodes.iter().enumerate() {
                k[(ga, gb)] += local[(a, b)];
            }
        }
    }
    Ok(k)
}

/// Restricts a node-indexed matrix to the free (non-Dirichlet) nodes.
pub fn restrict_to_free(mesh: &Mesh, full: &DMatrix<f64>) -> DMatrix<f64> {
    let free = mesh.free_nodes();
    DMatrix::from_fn(free.len(), free.len(), |i, j| full[(free[i], free[j])])
}

/// One stiffness matrix per affine term on the free nodes. Term `i` is
/// described by the list of `(subdomain tag, tensor)` pairs it covers.
pub fn assemble_subdomain_stiffness(mesh: &Mesh, patterns: &[Vec<(usize, Coefficient)>]) -> Result<Vec<DMatrix<f64>>> {
    for (idx, t) in mesh.triangles.iter().enumerate() {
        let area = mesh.signed_area(t);
        if !(area > 0.0) {
            return Err(Error::DegenerateElement { index: idx, area });
        }
    }
    patterns
        .iter()
        .map(|pattern| {
            let full = assemble_full_stiffness(mesh, |tag| {
                pattern.iter().find(|(t, _)| *t == tag).map(|(_, c)| *c)
            })?;
            Ok(restrict_to_free(mesh, &full))
        })
        .collect()
}

/// Load vector `∫ f φᵢ` on the free nodes for `f` constant per subdomain,
/// by the vertex rule (exact for constant `f`).
pub fn assemble_load(mesh: &Mesh, f: impl Fn(usize) -> f64) -> DVector<f64> {
    let free = mesh.free_index();
    let mut out = DVector::zeros(free.iter().flatten().count());
    for t in &mesh.triangles {
        let w = mesh.signed_area(t) / 3.0 * f(t.tag);
        for &v in &t.nodes {
            if let Some(i) = free[v] {
                out[i] += w;
            }
        }
    }
    out
}
