//! Raviart-Thomas vector bases of order 0 and 1 on physical triangles.
//! The basis is constructed per element by inverting the Vandermonde matrix
//! of the canonical degrees of freedom (edge normal moments against shifted
//! Legendre polynomials in the edge's global parameter, plus constant vector
//! interior moments for order 1) on monomial generators expressed in
//! centroid-centered, diameter-scaled coordinates.

use super::geometry::ElementGeometry;
use super::shifted_legendre;
use crate::error::{Error, Result};
use crate::mesh::{ElementShape, Mesh};
use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub struct RtBasis {
    pub order: usize,
    dim: usize,
    n_gen: usize,
    /// coeffs[(g, i)]: weight of generator g in basis function i.
    coeffs: DMatrix<f64>,
    center: [f64; 2],
    scale: f64,
}

impl RtBasis {
    pub fn new(mesh: &Mesh, ei: usize, order: usize) -> Result<Self> {
        if mesh.elements[ei].shape != ElementShape::Tri {
            return Err(Error::Config(
                "Raviart-Thomas basis requires triangular elements".into(),
            ));
        }
        if order > 1 {
            return Err(Error::Config(format!(
                "Raviart-Thomas order {order} not supported (max 1)"
            )));
        }
        let center = mesh.elem_centroid(ei);
        let scale = mesh.elem_diameter(ei);
        let n_gen = if order == 0 { 3 } else { 8 };
        let dim = n_gen;
        let n_edge_pts = order + 2;
        let geo = ElementGeometry::new(mesh, ei, order + 2, n_edge_pts);

        // Vandermonde: row d = degree of freedom, column g = generator.
        let mut v = DMatrix::zeros(dim, n_gen);
        let mut row = 0;
        for le in 0..3 {
            for m in 0..=order {
                for g in 0..n_gen {
                    let mut acc = 0.0;
                    for p in &geo.edges[le] {
                        let val = gen_eval(order, g, local(p.xy, center, scale));
                        let vn = val[0] * p.normal[0] + val[1] * p.normal[1];
                        acc += p.w * vn * shifted_legendre(m, p.s);
                    }
                    v[(row, g)] = acc;
                }
                row += 1;
            }
        }
        if order == 1 {
            for comp in 0..2 {
                for g in 0..n_gen {
                    let mut acc = 0.0;
                    for p in &geo.vol {
                        acc += p.w * gen_eval(order, g, local(p.xy, center, scale))[comp];
                    }
                    v[(row, g)] = acc / geo.area;
                }
                row += 1;
            }
        }
        debug_assert_eq!(row, dim);

        let coeffs = v.try_inverse().ok_or_else(|| Error::SingularLocal {
            element: ei,
            msg: "Raviart-Thomas degree-of-freedom Vandermonde is singular".into(),
        })?;
        Ok(RtBasis {
            order,
            dim,
            n_gen,
            coeffs,
            center,
            scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, i: usize, xy: [f64; 2]) -> [f64; 2] {
        let p = local(xy, self.center, self.scale);
        let mut v = [0.0, 0.0];
        for g in 0..self.n_gen {
            let c = self.coeffs[(g, i)];
            if c != 0.0 {
                let gv = gen_eval(self.order, g, p);
                v[0] += c * gv[0];
                v[1] += c * gv[1];
            }
        }
        v
    }

    pub fn div(&self, i: usize, xy: [f64; 2]) -> f64 {
        let p = local(xy, self.center, self.scale);
        let mut d = 0.0;
        for g in 0..self.n_gen {
            let c = self.coeffs[(g, i)];
            if c != 0.0 {
                d += c * gen_div(self.order, g, p) / self.scale;
            }
        }
        d
    }
}

fn local(xy: [f64; 2], c: [f64; 2], h: f64) -> [f64; 2] {
    [(xy[0] - c[0]) / h, (xy[1] - c[1]) / h]
}

/// Generators of RT_k in scaled coordinates: [P_k]^2 plus (x, y) times the
/// homogeneous polynomials of degree k.
fn gen_eval(order: usize, g: usize, p: [f64; 2]) -> [f64; 2] {
    let [x, y] = p;
    if order == 0 {
        match g {
            0 => [1.0, 0.0],
            1 => [0.0, 1.0],
            _ => [x, y],
        }
    } else {
        match g {
            0 => [1.0, 0.0],
            1 => [0.0, 1.0],
            2 => [x, 0.0],
            3 => [0.0, x],
            4 => [y, 0.0],
            5 => [0.0, y],
            6 => [x * x, x * y],
            _ => [x * y, y * y],
        }
    }
}

/// Divergence of each generator in scaled coordinates.
fn gen_div(order: usize, g: usize, p: [f64; 2]) -> f64 {
    let [x, y] = p;
    if order == 0 {
        match g {
            0 | 1 => 0.0,
            _ => 2.0,
        }
    } else {
        match g {
            0 | 1 | 3 | 4 => 0.0,
            2 | 5 => 1.0,
            6 => 3.0 * x,
            _ => 3.0 * y,
        }
    }
}
