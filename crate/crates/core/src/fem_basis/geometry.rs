//! Per-element geometry: reference-to-physical maps (affine triangles,
//! bilinear quads) together with precomputed volume and edge quadrature
//! points carrying physical weights, outward normals, inverse-transpose
//! Jacobians, and the global parameter of each edge point.

use super::quadrature::{self, QuadRule};
use crate::mesh::{ElementShape, Mesh};

#[derive(Debug, Clone, Copy)]
pub struct VolPoint {
    pub ref_xy: [f64; 2],
    pub xy: [f64; 2],
    /// Physical weight (reference weight times |det J|).
    pub w: f64,
    /// Inverse transpose of the Jacobian; maps reference gradients to
    /// physical gradients.
    pub invjt: [[f64; 2]; 2],
}

#[derive(Debug, Clone, Copy)]
pub struct EdgePoint {
    pub ref_xy: [f64; 2],
    pub xy: [f64; 2],
    /// Physical arclength weight.
    pub w: f64,
    /// Unit outward normal of the element.
    pub normal: [f64; 2],
    /// Parameter in the edge's global (low-to-high vertex) orientation.
    pub s: f64,
    pub invjt: [[f64; 2]; 2],
}

#[derive(Debug, Clone)]
pub struct ElementGeometry {
    pub shape: ElementShape,
    pub vol: Vec<VolPoint>,
    /// Per local edge, in the element's ccw traversal order.
    pub edges: Vec<Vec<EdgePoint>>,
    pub diameter: f64,
    pub area: f64,
}

pub fn phys_grad(invjt: &[[f64; 2]; 2], g_ref: [f64; 2]) -> [f64; 2] {
    [
        invjt[0][0] * g_ref[0] + invjt[0][1] * g_ref[1],
        invjt[1][0] * g_ref[0] + invjt[1][1] * g_ref[1],
    ]
}

impl ElementGeometry {
    /// Build quadrature data for element `ei` with `n_vol` points per
    /// direction in the volume and `n_edge` Gauss points per edge.
    pub fn new(mesh: &Mesh, ei: usize, n_vol: usize, n_edge: usize) -> Self {
        let el = &mesh.elements[ei];
        let verts: Vec<[f64; 2]> = el.verts.iter().map(|&v| mesh.vertices[v]).collect();

        let rule: QuadRule = match el.shape {
            ElementShape::Tri => quadrature::tri_quadrature(n_vol),
            ElementShape::Quad => quadrature::quad_quadrature(n_vol),
        };
        let mut vol = Vec::with_capacity(rule.points.len());
        for (&r, &w) in rule.points.iter().zip(&rule.weights) {
            let (xy, j) = map_point(el.shape, &verts, r);
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            let invjt = [
                [j[1][1] / det, -j[1][0] / det],
                [-j[0][1] / det, j[0][0] / det],
            ];
            vol.push(VolPoint {
                ref_xy: r,
                xy,
                w: w * det.abs(),
                invjt,
            });
        }

        let (t_pts, t_wts) = quadrature::gauss_legendre(n_edge);
        let mut edges = Vec::with_capacity(el.num_edges());
        for le in 0..el.num_edges() {
            let (va, vb) = el.local_edge(le);
            let (a, b) = (mesh.vertices[va], mesh.vertices[vb]);
            let tang = [b[0] - a[0], b[1] - a[1]];
            let len = (tang[0] * tang[0] + tang[1] * tang[1]).sqrt();
            // ccw traversal puts the element on the left; outward normal is
            // the tangent rotated clockwise.
            let normal = [tang[1] / len, -tang[0] / len];
            let (_, fwd) = mesh.elem_edges[ei][le];
            let mut pts = Vec::with_capacity(t_pts.len());
            for (&t, &wt) in t_pts.iter().zip(&t_wts) {
                let ref_xy = edge_ref_point(el.shape, le, t);
                let (xy, j) = map_point(el.shape, &verts, ref_xy);
                let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                let invjt = [
                    [j[1][1] / det, -j[1][0] / det],
                    [-j[0][1] / det, j[0][0] / det],
                ];
                pts.push(EdgePoint {
                    ref_xy,
                    xy,
                    w: wt * len,
                    normal,
                    s: if fwd { t } else { 1.0 - t },
                    invjt,
                });
            }
            edges.push(pts);
        }

        ElementGeometry {
            shape: el.shape,
            vol,
            edges,
            diameter: mesh.elem_diameter(ei),
            area: mesh.elem_area(ei),
        }
    }
}

/// Reference coordinates of local edge `le` at traversal parameter t.
fn edge_ref_point(shape: ElementShape, le: usize, t: f64) -> [f64; 2] {
    match shape {
        ElementShape::Tri => match le {
            0 => [t, 0.0],
            1 => [1.0 - t, t],
            _ => [0.0, 1.0 - t],
        },
        ElementShape::Quad => match le {
            0 => [t, 0.0],
            1 => [1.0, t],
            2 => [1.0 - t, 1.0],
            _ => [0.0, 1.0 - t],
        },
    }
}

/// Physical point and Jacobian of the reference map at a reference point.
fn map_point(shape: ElementShape, v: &[[f64; 2]], r: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
    let (u, w) = (r[0], r[1]);
    match shape {
        ElementShape::Tri => {
            let xy = [
                v[0][0] + u * (v[1][0] - v[0][0]) + w * (v[2][0] - v[0][0]),
                v[0][1] + u * (v[1][1] - v[0][1]) + w * (v[2][1] - v[0][1]),
            ];
            let j = [
                [v[1][0] - v[0][0], v[2][0] - v[0][0]],
                [v[1][1] - v[0][1], v[2][1] - v[0][1]],
            ];
            (xy, j)
        }
        ElementShape::Quad => {
            let mut xy = [0.0; 2];
            let mut j = [[0.0; 2]; 2];
            for d in 0..2 {
                let (a, b, c, dd) = (v[0][d], v[1][d], v[2][d], v[3][d]);
                xy[d] = a + u * (b - a) + w * (dd - a) + u * w * (a - b + c - dd);
                j[d][0] = (b - a) + w * (a - b + c - dd);
                j[d][1] = (dd - a) + u * (a - b + c - dd);
            }
            (xy, j)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_quad_mesh, build_structured_tri_mesh, Element, Mesh};
    use approx::assert_relative_eq;

    fn distorted_quad() -> Mesh {
        let vertices = vec![[0.0, 0.0], [1.2, 0.1], [1.0, 1.3], [-0.2, 0.9]];
        let elements = vec![Element {
            shape: ElementShape::Quad,
            verts: vec![0, 1, 2, 3],
            tag: None,
        }];
        Mesh::from_elements(vertices, elements).unwrap()
    }

    #[test]
    fn volume_weights_sum_to_area() {
        let mesh = distorted_quad();
        let g = ElementGeometry::new(&mesh, 0, 4, 4);
        let wsum: f64 = g.vol.iter().map(|p| p.w).sum();
        assert_relative_eq!(wsum, mesh.elem_area(0), epsilon = 1e-12);

        let tm = build_structured_tri_mesh(3);
        for ei in 0..tm.num_elements() {
            let g = ElementGeometry::new(&tm, ei, 3, 3);
            let wsum: f64 = g.vol.iter().map(|p| p.w).sum();
            assert_relative_eq!(wsum, tm.elem_area(ei), epsilon = 1e-13);
        }
    }

    #[test]
    fn normals_unit_and_outward() {
        let mesh = distorted_quad();
        let g = ElementGeometry::new(&mesh, 0, 3, 3);
        let c = mesh.elem_centroid(0);
        for edge in &g.edges {
            for p in edge {
                let n = p.normal;
                assert_relative_eq!(n[0] * n[0] + n[1] * n[1], 1.0, epsilon = 1e-13);
                let to_pt = [p.xy[0] - c[0], p.xy[1] - c[1]];
                assert!(n[0] * to_pt[0] + n[1] * to_pt[1] > 0.0);
            }
        }
    }

    /// Divergence theorem on a distorted quad: for F = (x^2 y, -x y^2),
    /// the volume integral of div F must equal the boundary flux.
    #[test]
    fn divergence_theorem() {
        let mesh = distorted_quad();
        let g = ElementGeometry::new(&mesh, 0, 6, 6);
        let div = |x: f64, y: f64| 2.0 * x * y - 2.0 * x * y; // = 0
        let f = |x: f64, y: f64| [x * x * y, -x * y * y];
        let vol: f64 = g.vol.iter().map(|p| p.w * div(p.xy[0], p.xy[1])).sum();
        let flux: f64 = g
            .edges
            .iter()
            .flatten()
            .map(|p| {
                let fv = f(p.xy[0], p.xy[1]);
                p.w * (fv[0] * p.normal[0] + fv[1] * p.normal[1])
            })
            .sum();
        assert_relative_eq!(vol, flux, epsilon = 1e-11);

        // A second field with nonzero divergence.
        let f2 = |x: f64, y: f64| [x * x * x, y * y];
        let div2 = |x: f64, y: f64| 3.0 * x * x + 2.0 * y;
        let vol2: f64 = g.vol.iter().map(|p| p.w * div2(p.xy[0], p.xy[1])).sum();
        let flux2: f64 = g
            .edges
            .iter()
            .flatten()
            .map(|p| {
                let fv = f2(p.xy[0], p.xy[1]);
                p.w * (fv[0] * p.normal[0] + fv[1] * p.normal[1])
            })
            .sum();
        assert_relative_eq!(vol2, flux2, epsilon = 1e-11);
    }

    /// Two elements sharing an edge see the same physical point at the same
    /// global parameter, with opposite normals.
    #[test]
    fn shared_edge_parameter_consistency() {
        for mesh in [build_structured_quad_mesh(2), build_structured_tri_mesh(2)] {
            for (eid, edge) in mesh.edges.iter().enumerate() {
                let Some(right) = edge.right else { continue };
                let left = edge.left;
                let find = |ei: usize| {
                    let le = mesh.elem_edges[ei].iter().position(|&(e, _)| e == eid).unwrap();
                    let g = ElementGeometry::new(&mesh, ei, 3, 3);
                    g.edges[le].clone()
                };
                let pl = find(left);
                let pr = find(right);
                for a in &pl {
                    let b = pr
                        .iter()
                        .find(|b| (b.s - a.s).abs() < 1e-12)
                        .expect("matching global parameter");
                    assert_relative_eq!(a.xy[0], b.xy[0], epsilon = 1e-12);
                    assert_relative_eq!(a.xy[1], b.xy[1], epsilon = 1e-12);
                    assert_relative_eq!(a.normal[0], -b.normal[0], epsilon = 1e-12);
                    assert_relative_eq!(a.normal[1], -b.normal[1], epsilon = 1e-12);
                }
            }
        }
    }

    /// Oracle: P1 stiffness matrix on the unit reference triangle is
    /// [[1, -1/2, -1/2], [-1/2, 1/2, 0], [-1/2, 0, 1/2]].
    #[test]
    fn p1_triangle_stiffness() {
        let vertices = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let elements = vec![Element {
            shape: ElementShape::Tri,
            verts: vec![0, 1, 2],
            tag: None,
        }];
        let mesh = Mesh::from_elements(vertices, elements).unwrap();
        let g = ElementGeometry::new(&mesh, 0, 3, 3);
        // P1 hat functions in reference coordinates.
        let grads = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
        let mut k = [[0.0; 3]; 3];
        for p in &g.vol {
            for i in 0..3 {
                for j in 0..3 {
                    let gi = phys_grad(&p.invjt, grads[i]);
                    let gj = phys_grad(&p.invjt, grads[j]);
                    k[i][j] += p.w * (gi[0] * gj[0] + gi[1] * gj[1]);
                }
            }
        }
        let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(k[i][j], expect[i][j], epsilon = 1e-13);
            }
        }
    }
}
