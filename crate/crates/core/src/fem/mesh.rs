//! Triangular meshes of the unit square (optionally with a circular hole)
//! and their plain-text format:
//!
//! ```text
//! nodes <count>
//! <x> <y> <boundary_flag>        one line per node, flag 0 or 1
//! triangles <count>
//! <i> <j> <k> <subdomain_tag>    0-based node indices, tag ≥ 1
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triangle {
    pub nodes: [usize; 3],
    pub tag: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    /// Homogeneous Dirichlet flag per node.
    pub boundary: Vec<bool>,
    pub triangles: Vec<Triangle>,
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn on_unit_square_boundary(p: [f64; 2]) -> bool {
    const EPS: f64 = 1e-12;
    p[0].abs() < EPS || p[1].abs() < EPS || (p[0] - 1.0).abs() < EPS || (p[1] - 1.0).abs() < EPS
}

impl Mesh {
    /// Structured mesh of the unit square with `divisions` squares per side,
    /// each split into two counter-clockwise triangles along the diagonal
    /// that points towards the centre of the square (a "union jack" grid,
    /// mirror symmetric about both midlines). `tag` maps a triangle centroid
    /// to its subdomain tag.
    pub fn unit_square(divisions: usize, tag: impl Fn([f64; 2]) -> usize) -> Result<Self> {
        if divisions == 0 {
            return Err(Error::InvalidArgument("mesh needs at least one division".into()));
        }
        let d = divisions;
        let h = 1.0 / d as f64;
        let idx = |i: usize, j: usize| j * (d + 1) + i;
        let mut nodes = Vec::with_capacity((d + 1) * (d + 1));
        let mut boundary = Vec::with_capacity(nodes.capacity());
        for j in 0..=d {
            for i in 0..=d {
                // exact grid values at the ends so boundary detection is exact
                let x = if i == d { 1.0 } else { i as f64 * h };
                let y = if j == d { 1.0 } else { j as f64 * h };
                nodes.push([x, y]);
                boundary.push(i == 0 || j == 0 || i == d || j == d);
            }
        }
        let mut triangles = Vec::with_capacity(2 * d * d);
        for j in 0..d {
            for i in 0..d {
                let (a, b, c, e) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
                let rising = (2 * i < d) == (2 * j < d);
                let tris = if rising { [[a, b, c], [a, c, e]] } else { [[a, b, e], [b, c, e]] };
                for tri in tris {
                    let centroid = centroid_of(&nodes, tri);
                    triangles.push(Triangle {
                        nodes: tri,
                        tag: tag(centroid),
                    });
                }
            }
        }
        Ok(Self {
            nodes,
            boundary,
            triangles,
        })
    }

    /// The structured unit-square mesh with every triangle whose centroid
    /// lies inside the disc `B(center, radius)` removed. Nodes on the new
    /// inner boundary are flagged Dirichlet and moved radially onto the
    /// circle, except where the move would invert an element.
    pub fn unit_square_with_hole(
        divisions: usize,
        center: [f64; 2],
        radius: f64,
        tag: impl Fn([f64; 2]) -> usize,
    ) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!("hole radius {radius} must be positive")));
        }
        let full = Self::unit_square(divisions, tag)?;
        let dist = |p: [f64; 2]| ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2)).sqrt();
        let kept: Vec<Triangle> = full
            .triangles
            .iter()
            .copied()
            .filter(|t| dist(centroid_of(&full.nodes, t.nodes)) >= radius)
            .collect();
        if kept.len() == full.triangles.len() {
            return Err(Error::InvalidMesh("hole removes no elements; refine the mesh".into()));
        }

        // compact node numbering, preserving the original order
        let mut used = vec![false; full.nodes.len()];
        for t in &kept {
            for &v in &t.nodes {
                used[v] = true;
            }
        }
        let mut new_index = vec![usize::MAX; full.nodes.len()];
        let mut nodes = Vec::new();
        let mut boundary = Vec::new();
        for (old, &u) in used.iter().enumerate() {
            if u {
                new_index[old] = nodes.len();
                nodes.push(full.nodes[old]);
                boundary.push(full.boundary[old]);
            }
        }
        let triangles: Vec<Triangle> = kept
            .iter()
            .map(|t| Triangle {
                nodes: t.nodes.map(|v| new_index[v]),
                tag: t.tag,
            })
            .collect();
        let mut mesh = Self {
            nodes,
            boundary,
            triangles,
        };

        let hole_nodes: Vec<usize> = mesh
            .boundary_edge_nodes()
            .into_iter()
            .filter(|&v| !on_unit_square_boundary(mesh.nodes[v]))
            .collect();
        for &v in &hole_nodes {
            mesh.boundary[v] = true;
        }
        let original = mesh.nodes.clone();
        for &v in &hole_nodes {
            let p = mesh.nodes[v];
            let r = dist(p);
            if r > 0.0 {
                mesh.nodes[v] = [
                    center[0] + (p[0] - center[0]) * radius / r,
                    center[1] + (p[1] - center[1]) * radius / r,
                ];
            }
        }
        // undo moves that invert or flatten elements
        loop {
            let mut reverted = false;
            for t in &mesh.triangles {
                let [a, b, c] = t.nodes;
                if signed_area(mesh.nodes[a], mesh.nodes[b], mesh.nodes[c]) <= 1e-14 {
                    for v in t.nodes {
                        if mesh.nodes[v] != original[v] {
                            mesh.nodes[v] = original[v];
                            reverted = true;
                        }
                    }
                }
            }
            if !reverted {
                break;
            }
        }
        Ok(mesh)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn signed_area(&self, t: &Triangle) -> f64 {
        let [a, b, c] = t.nodes;
        signed_area(self.nodes[a], self.nodes[b], self.nodes[c])
    }

    pub fn centroid(&self, t: &Triangle) -> [f64; 2] {
        centroid_of(&self.nodes, t.nodes)
    }

    /// Nodes lying on edges that belong to exactly one triangle, sorted.
    pub fn boundary_edge_nodes(&self) -> Vec<usize> {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            let [a, b, c] = t.nodes;
            for (u, v) in [(a, b), (b, c), (c, a)] {
                *count.entry((u.min(v), u.max(v))).or_default() += 1;
            }
        }
        let mut out: Vec<usize> = count
            .into_iter()
            .filter(|&(_, c)| c == 1)
            .flat_map(|((u, v), _)| [u, v])
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Indices of the nodes that carry unknowns.
    pub fn free_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&v| !self.boundary[v]).collect()
    }

    /// Map from node index to unknown index (`None` on Dirichlet nodes).
    pub fn free_index(&self) -> Vec<Option<usize>> {
        let mut next = 0;
        self.boundary
            .iter()
            .map(|&b| {
                if b {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect()
    }

    pub fn max_tag(&self) -> usize {
        self.triangles.iter().map(|t| t.tag).max().unwrap_or(0)
    }

    /// Checks index ranges, tags in `1..=max_tag`, positive orientation and
    /// that every node on a boundary edge is flagged.
    pub fn validate(&self, max_tag: Option<usize>) -> Result<()> {
        if self.boundary.len() != self.nodes.len() {
            return Err(Error::InvalidMesh(format!(
                "{} boundary flags for {} nodes",
                self.boundary.len(),
                self.nodes.len()
            )));
        }
        if let Some(p) = self.nodes.iter().find(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::InvalidMesh(format!("non-finite node coordinate {p:?}")));
        }
        for (i, t) in self.triangles.iter().enumerate() {
            if let Some(&v) = t.nodes.iter().find(|&&v| v >= self.nodes.len()) {
                return Err(Error::InvalidMesh(format!("triangle {i} references missing node {v}")));
            }
            if t.tag == 0 || max_tag.is_some_and(|m| t.tag > m) {
                return Err(Error::InvalidMesh(format!("triangle {i} has invalid subdomain tag {}", t.tag)));
            }
            let area = self.signed_area(t);
            if !(area > 0.0) {
                return Err(Error::DegenerateElement { index: i, area });
            }
        }
        if let Some(v) = self.boundary_edge_nodes().into_iter().find(|&v| !self.boundary[v]) {
            return Err(Error::InvalidMesh(format!("node {v} lies on a boundary edge but is not flagged")));
        }
        Ok(())
    }

    /// Value at `point` of the P1 interpolant with the given nodal values,
    /// or `None` outside the mesh.
    pub fn interpolate(&self, point: [f64; 2], nodal: &[f64]) -> Option<f64> {
        const EPS: f64 = 1e-12;
        for t in &self.triangles {
            let [a, b, c] = t.nodes.map(|v| self.nodes[v]);
            let area = signed_area(a, b, c);
            let la = signed_area(point, b, c) / area;
            let lb = signed_area(a, point, c) / area;
            let lc = 1.0 - la - lb;
            if la >= -EPS && lb >= -EPS && lc >= -EPS {
                let [i, j, k] = t.nodes;
                return Some(la * nodal[i] + lb * nodal[j] + lc * nodal[k]);
            }
        }
        None
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "nodes {}", self.nodes.len());
        for (p, &b) in self.nodes.iter().zip(&self.boundary) {
            let _ = writeln!(out, "{:?} {:?} {}", p[0], p[1], u8::from(b));
        }
        let _ = writeln!(out, "triangles {}", self.triangles.len());
        for t in &self.triangles {
            let _ = writeln!(out, "{} {} {} {}", t.nodes[0], t.nodes[1], t.nodes[2], t.tag);
        }
        out
    }

    /// Parses the text format. Structural consistency (counts, indices,
    /// flags) is checked here; geometric checks are left to [`Mesh::validate`].
    pub fn parse(text: &str) -> Result<Self> {
        const SRC: &str = "mesh";
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());

        let header = |lines: &mut dyn Iterator<Item = (usize, &str)>, key: &str| -> Result<usize> {
            let (no, line) = lines
                .next()
                .ok_or_else(|| Error::parse(SRC, 0, format!("missing `{key}` header")))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(key) {
                return Err(Error::parse(SRC, no, format!("expected `{key} <count>`")));
            }
            let count = parts
                .next()
                .and_then(|c| c.parse::<usize>().ok())
                .ok_or_else(|| Error::parse(SRC, no, "invalid count"))?;
            if parts.next().is_some() {
                return Err(Error::parse(SRC, no, "trailing tokens after count"));
            }
            Ok(count)
        };

        let node_count = header(&mut lines, "nodes")?;
        let mut nodes = Vec::new();
        let mut boundary = Vec::new();
        for _ in 0..node_count {
            let (no, line) = lines
                .next()
                .ok_or_else(|| Error::parse(SRC, 0, format!("expected {node_count} nodes, found {}", nodes.len())))?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::parse(SRC, no, "node line needs `x y boundary_flag`"));
            }
            let x: f64 = parts[0].parse().map_err(|_| Error::parse(SRC, no, "invalid x"))?;
            let y: f64 = parts[1].parse().map_err(|_| Error::parse(SRC, no, "invalid y"))?;
            if !x.is_finite() || !y.is_finite() {
                return Err(Error::parse(SRC, no, "non-finite coordinate"));
            }
            let flag = match parts[2] {
                "0" => false,
                "1" => true,
                _ => return Err(Error::parse(SRC, no, "boundary flag must be 0 or 1")),
            };
            nodes.push([x, y]);
            boundary.push(flag);
        }

        let tri_count = header(&mut lines, "triangles")?;
        let mut triangles = Vec::new();
        for _ in 0..tri_count {
            let (no, line) = lines.next().ok_or_else(|| {
                Error::parse(SRC, 0, format!("expected {tri_count} triangles, found {}", triangles.len()))
            })?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 {
                return Err(Error::parse(SRC, no, "triangle line needs `i j k subdomain_tag`"));
            }
            let mut vals = [0usize; 4];
            for (v, p) in vals.iter_mut().zip(&parts) {
                *v = p.parse().map_err(|_| Error::parse(SRC, no, format!("invalid integer {p:?}")))?;
            }
            let tri = [vals[0], vals[1], vals[2]];
            if tri.iter().any(|&v| v >= node_count) {
                return Err(Error::parse(SRC, no, "node index out of range"));
            }
            if vals[3] == 0 {
                return Err(Error::parse(SRC, no, "subdomain tags start at 1"));
            }
            triangles.push(Triangle { nodes: tri, tag: vals[3] });
        }
        if let Some((no, _)) = lines.next() {
            return Err(Error::parse(SRC, no, "unexpected content after triangles"));
        }
        Ok(Self {
            nodes,
            boundary,
            triangles,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

fn centroid_of(nodes: &[[f64; 2]], tri: [usize; 3]) -> [f64; 2] {
    let [a, b, c] = tri.map(|v| nodes[v]);
    [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_TRIANGLES: &str = "nodes 4\n0 0 1\n1 0 1\n1 1 1\n0 1 1\ntriangles 2\n0 1 2 1\n0 2 3 1\n";

    #[test]
    fn parses_two_triangle_square() {
        let m = Mesh::parse(TWO_TRIANGLES).unwrap();
        assert_eq!(m.node_count(), 4);
        assert_eq!(m.triangles.len(), 2);
        m.validate(Some(1)).unwrap();
    }

    #[test]
    fn round_trip_is_bitwise() {
        let m = Mesh::unit_square(7, |_| 1).unwrap();
        let back = Mesh::parse(&m.to_text()).unwrap();
        assert_eq!(back, m);
        for (a, b) in m.nodes.iter().zip(&back.nodes) {
            assert_eq!(a[0].to_bits(), b[0].to_bits());
            assert_eq!(a[1].to_bits(), b[1].to_bits());
        }
    }

    #[test]
    fn rejects_malformed_text() {
        for bad in [
            "",
            "nodes x\n",
            "nodes 1\n0 0\n",
            "nodes 1\n0 0 2\ntriangles 0\n",
            "nodes 1\n0 0 1\ntriangles 1\n0 0 5 1\n",
            "nodes 3\n0 0 1\n1 0 1\n0 1 1\ntriangles 1\n0 1 2 0\n",
            "nodes 1\n0 0 1\ntriangles 0\nextra\n",
            "nodes 2\n0 0 1\n",
            "nodes 1\nnan 0 1\ntriangles 0\n",
        ] {
            assert!(Mesh::parse(bad).is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn validation_catches_orientation_and_flags() {
        let mut m = Mesh::parse(TWO_TRIANGLES).unwrap();
        m.triangles[0].nodes.swap(1, 2);
        assert!(matches!(m.validate(None), Err(Error::DegenerateElement { index: 0, .. })));
        let mut m = Mesh::parse(TWO_TRIANGLES).unwrap();
        m.boundary[1] = false;
        assert!(matches!(m.validate(None), Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn structured_mesh_is_valid() {
        let m = Mesh::unit_square(8, |c| if c[0] < 0.5 { 1 } else { 2 }).unwrap();
        m.validate(Some(2)).unwrap();
        assert_eq!(m.free_nodes().len(), 49);
        assert_eq!(m.triangles.len(), 128);
    }

    #[test]
    fn hole_mesh_is_valid_and_hole_nodes_on_circle() {
        let m = Mesh::unit_square_with_hole(36, [0.5, 0.5], 0.15, |_| 1).unwrap();
        m.validate(Some(1)).unwrap();
        let on_circle = m
            .nodes
            .iter()
            .zip(&m.boundary)
            .filter(|(p, &b)| b && !on_unit_square_boundary(**p))
            .filter(|(p, _)| (((p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2)).sqrt() - 0.15).abs() < 1e-12)
            .count();
        assert!(on_circle > 20);
    }

    #[test]
    fn interpolation_reproduces_linear_functions() {
        let m = Mesh::unit_square(5, |_| 1).unwrap();
        let vals: Vec<f64> = m.nodes.iter().map(|p| 2.0 * p[0] - p[1] + 0.5).collect();
        let v = m.interpolate([0.33, 0.71], &vals).unwrap();
        assert!((v - (0.66 - 0.71 + 0.5)).abs() < 1e-12);
        assert!(m.interpolate([1.5, 0.5], &vals).is_none());
    }
}
