//! 2D conforming meshes of triangles and quadrilaterals with an explicit
//! skeleton (unique edge list). Edges are canonically oriented from the lower
//! to the higher vertex index, which fixes a global parameterization used by
//! the trace space.

use crate::error::{Error, Result};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementShape {
    Tri,
    Quad,
}

#[derive(Debug, Clone)]
pub struct Element {
    pub shape: ElementShape,
    pub verts: Vec<usize>,
    /// Optional per-element method tag from the mesh file (multinumerics).
    pub tag: Option<String>,
}

impl Element {
    pub fn num_edges(&self) -> usize {
        self.verts.len()
    }

    /// Local edge i runs from verts[i] to verts[(i+1) % n], counterclockwise.
    pub fn local_edge(&self, i: usize) -> (usize, usize) {
        let n = self.verts.len();
        (self.verts[i], self.verts[(i + 1) % n])
    }
}

/// A skeleton edge. `verts` is sorted ascending; the global edge parameter
/// runs from verts[0] (t=0) to verts[1] (t=1).
#[derive(Debug, Clone)]
pub struct Edge {
    pub verts: [usize; 2],
    pub left: usize,
    pub right: Option<usize>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    pub elements: Vec<Element>,
    pub edges: Vec<Edge>,
    /// Per element: (edge id, true if the element's ccw traversal of the edge
    /// agrees with the edge's canonical low-to-high orientation).
    pub elem_edges: Vec<Vec<(usize, bool)>>,
}

impl Mesh {
    /// Assemble skeleton and adjacency from vertices and elements. Elements
    /// with negative area are reordered to counterclockwise.
    pub fn from_elements(vertices: Vec<[f64; 2]>, mut elements: Vec<Element>) -> Result<Self> {
        for (i, el) in elements.iter_mut().enumerate() {
            for &v in &el.verts {
                if v >= vertices.len() {
                    return Err(Error::MeshTopology(format!(
                        "element {i} references vertex {v} out of range"
                    )));
                }
            }
            let area = polygon_area(&vertices, &el.verts);
            if area < 0.0 {
                el.verts.reverse();
            }
            if polygon_area(&vertices, &el.verts).abs() < 1e-14 {
                return Err(Error::MeshTopology(format!("element {i} is degenerate")));
            }
        }

        let mut edge_map: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
        for (ei, el) in elements.iter().enumerate() {
            for le in 0..el.num_edges() {
                let (a, b) = el.local_edge(le);
                if a == b {
                    return Err(Error::MeshTopology(format!(
                        "element {ei} has a zero-length edge"
                    )));
                }
                let key = (a.min(b), a.max(b));
                edge_map.entry(key).or_default().push((ei, le));
            }
        }

        let mut edges = Vec::with_capacity(edge_map.len());
        let mut elem_edges = vec![Vec::new(); elements.len()];
        for el in &elements {
            let _ = el;
        }
        for (i, ee) in elem_edges.iter_mut().enumerate() {
            ee.resize(elements[i].num_edges(), (usize::MAX, false));
        }
        for ((a, b), incident) in edge_map {
            if incident.len() > 2 {
                return Err(Error::MeshTopology(format!(
                    "edge ({a},{b}) has {} incident elements",
                    incident.len()
                )));
            }
            let id = edges.len();
            let left = incident[0].0;
            let right = incident.get(1).map(|&(e, _)| e);
            edges.push(Edge {
                verts: [a, b],
                left,
                right,
            });
            for &(ei, le) in &incident {
                let (va, _vb) = elements[ei].local_edge(le);
                elem_edges[ei][le] = (id, va == a);
            }
        }

        Ok(Mesh {
            vertices,
            elements,
            edges,
            elem_edges,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_boundary_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.is_boundary()).count()
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e].verts;
        dist(self.vertices[a], self.vertices[b])
    }

    pub fn edge_midpoint(&self, e: usize) -> [f64; 2] {
        let [a, b] = self.edges[e].verts;
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
    }

    /// Element diameter: maximum vertex-to-vertex distance.
    pub fn elem_diameter(&self, ei: usize) -> f64 {
        let vs = &self.elements[ei].verts;
        let mut d: f64 = 0.0;
        for i in 0..vs.len() {
            for j in i + 1..vs.len() {
                d = d.max(dist(self.vertices[vs[i]], self.vertices[vs[j]]));
            }
        }
        d
    }

    pub fn elem_centroid(&self, ei: usize) -> [f64; 2] {
        let vs = &self.elements[ei].verts;
        let mut c = [0.0, 0.0];
        for &v in vs {
            c[0] += self.vertices[v][0];
            c[1] += self.vertices[v][1];
        }
        [c[0] / vs.len() as f64, c[1] / vs.len() as f64]
    }

    pub fn elem_area(&self, ei: usize) -> f64 {
        polygon_area(&self.vertices, &self.elements[ei].verts)
    }

    /// Minimum diameter of the elements adjacent to an edge.
    pub fn edge_hmin(&self, e: usize) -> f64 {
        let ed = &self.edges[e];
        let mut h = self.elem_diameter(ed.left);
        if let Some(r) = ed.right {
            h = h.min(self.elem_diameter(r));
        }
        h
    }

    /// Element adjacency across shared edges.
    pub fn element_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.elements.len()];
        for e in &self.edges {
            if let Some(r) = e.right {
                adj[e.left].push(r);
                adj[r].push(e.left);
            }
        }
        adj
    }

    /// Element containing a point, by sign tests against each edge. Returns
    /// the lowest-index containing element.
    pub fn element_containing(&self, p: [f64; 2]) -> Option<usize> {
        'outer: for (ei, el) in self.elements.iter().enumerate() {
            let n = el.verts.len();
            for i in 0..n {
                let a = self.vertices[el.verts[i]];
                let b = self.vertices[el.verts[(i + 1) % n]];
                let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
                if cross < -1e-12 {
                    continue 'outer;
                }
            }
            return Some(ei);
        }
        None
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn polygon_area(vertices: &[[f64; 2]], vs: &[usize]) -> f64 {
    let n = vs.len();
    let mut a = 0.0;
    for i in 0..n {
        let p = vertices[vs[i]];
        let q = vertices[vs[(i + 1) % n]];
        a += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * a
}

/// n-by-n quadrilateral mesh of the unit square. Vertices and edges are
/// ordered deterministically (row-major vertices, sorted edge keys).
pub fn build_structured_quad_mesh(n: usize) -> Mesh {
    assert!(n >= 1);
    let m = n + 1;
    let mut vertices = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    let mut elements = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let v0 = j * m + i;
            elements.push(Element {
                shape: ElementShape::Quad,
                verts: vec![v0, v0 + 1, v0 + 1 + m, v0 + m],
                tag: None,
            });
        }
    }
    Mesh::from_elements(vertices, elements).expect("structured quad mesh is valid")
}

/// Unit square triangulated by splitting each cell of an n-by-n grid along
/// the diagonal from its lower-left corner.
pub fn build_structured_tri_mesh(n: usize) -> Mesh {
    assert!(n >= 1);
    let m = n + 1;
    let mut vertices = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    let mut elements = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let v0 = j * m + i;
            elements.push(Element {
                shape: ElementShape::Tri,
                verts: vec![v0, v0 + 1, v0 + 1 + m],
                tag: None,
            });
            elements.push(Element {
                shape: ElementShape::Tri,
                verts: vec![v0, v0 + 1 + m, v0 + m],
                tag: None,
            });
        }
    }
    Mesh::from_elements(vertices, elements).expect("structured tri mesh is valid")
}

/// Parse the plain-text mesh format:
/// line 1: `nv ne`; then nv lines `x y`; then ne lines
/// `shape v0 v1 v2 [v3] [method_tag]` with shape in {3,4}.
/// `#` starts a comment.
pub fn parse_mesh_text(text: &str) -> Result<Mesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::MeshParse { line: 0, msg: "empty file".into() })?;
    let mut it = header.split_whitespace();
    let nv: usize = parse_field(it.next(), hline, "vertex count")?;
    let ne: usize = parse_field(it.next(), hline, "element count")?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| Error::MeshParse { line: 0, msg: "unexpected end of file in vertex list".into() })?;
        let mut it = l.split_whitespace();
        let x: f64 = parse_field(it.next(), ln, "x coordinate")?;
        let y: f64 = parse_field(it.next(), ln, "y coordinate")?;
        vertices.push([x, y]);
    }

    let mut elements = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| Error::MeshParse { line: 0, msg: "unexpected end of file in element list".into() })?;
        let mut it = l.split_whitespace();
        let shape: usize = parse_field(it.next(), ln, "element shape")?;
        let (sh, nverts) = match shape {
            3 => (ElementShape::Tri, 3),
            4 => (ElementShape::Quad, 4),
            s => {
                return Err(Error::MeshParse {
                    line: ln,
                    msg: format!("unsupported element shape {s}"),
                })
            }
        };
        let mut verts = Vec::with_capacity(nverts);
        for k in 0..nverts {
            let v: usize = parse_field(it.next(), ln, &format!("vertex index {k}"))?;
            verts.push(v);
        }
        let tag = it.next().map(|s| s.to_string());
        elements.push(Element { shape: sh, verts, tag });
    }

    Mesh::from_elements(vertices, elements)
}

fn parse_field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.ok_or_else(|| Error::MeshParse {
        line,
        msg: format!("missing {what}"),
    })?
    .parse()
    .map_err(|_| Error::MeshParse {
        line,
        msg: format!("invalid {what}"),
    })
}

/// Read a mesh file from disk. The skeleton is rebuilt from connectivity.
pub fn import_tri_mesh(path: &std::path::Path) -> Result<Mesh> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh_text(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_quad_counts() {
        let m = build_structured_quad_mesh(1);
        assert_eq!(m.num_elements(), 1);
        assert_eq!(m.num_edges(), 4);
        assert_eq!(m.num_boundary_edges(), 4);
    }

    #[test]
    fn structured_counts_n4() {
        // 2*n*(n+1) edges by direct enumeration of horizontal/vertical runs.
        let m = build_structured_quad_mesh(4);
        assert_eq!(m.num_elements(), 16);
        assert_eq!(m.num_edges(), 40);
        assert_eq!(m.num_boundary_edges(), 16);
    }

    #[test]
    fn structured_counts_n128() {
        let m = build_structured_quad_mesh(128);
        assert_eq!(m.num_elements(), 16384);
        assert_eq!(m.num_edges(), 2 * 128 * 129);
    }

    #[test]
    fn two_triangle_square() {
        let text = "4 2\n0 0\n1 0\n1 1\n0 1\n3 0 1 2\n3 0 2 3\n";
        let m = parse_mesh_text(text).unwrap();
        assert_eq!(m.num_elements(), 2);
        assert_eq!(m.num_edges(), 5);
        assert_eq!(m.num_edges() - m.num_boundary_edges(), 1);
    }

    #[test]
    fn duplicated_element_is_topology_error() {
        let text = "4 3\n0 0\n1 0\n1 1\n0 1\n3 0 1 2\n3 0 2 3\n3 0 1 2\n";
        match parse_mesh_text(text) {
            Err(Error::MeshTopology(_)) => {}
            other => panic!("expected topology error, got {other:?}"),
        }
    }

    #[test]
    fn parse_error_carries_line_number() {
        let text = "4 2\n0 0\n1 0\n1 1\nbad line\n3 0 1 2\n3 0 2 3\n";
        match parse_mesh_text(text) {
            Err(Error::MeshParse { line, .. }) => assert_eq!(line, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn cw_elements_are_reoriented() {
        let text = "4 2\n0 0\n1 0\n1 1\n0 1\n3 0 2 1\n3 0 3 2\n";
        let m = parse_mesh_text(text).unwrap();
        for ei in 0..2 {
            assert!(m.elem_area(ei) > 0.0);
        }
    }

    #[test]
    fn elem_edges_orientation_consistent() {
        let m = build_structured_quad_mesh(2);
        for (ei, ee) in m.elem_edges.iter().enumerate() {
            for (le, &(eid, fwd)) in ee.iter().enumerate() {
                let (a, b) = m.elements[ei].local_edge(le);
                let ev = m.edges[eid].verts;
                if fwd {
                    assert_eq!([a, b], ev);
                } else {
                    assert_eq!([b, a], ev);
                }
            }
        }
    }

    #[test]
    fn point_location() {
        let m = build_structured_quad_mesh(4);
        assert_eq!(m.element_containing([0.1, 0.1]), Some(0));
        assert!(m.element_containing([1.5, 0.5]).is_none());
    }
}
