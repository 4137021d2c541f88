//! Polynomial bases: configurable trace bases on edges, tensor-product
//! nodal bases on quads, orthonormalized monomial bases on triangles, and
//! Raviart-Thomas bases built per physical element.

pub mod geometry;
pub mod quadrature;
pub mod raviart_thomas;

use nalgebra::{DMatrix, DVector};

/// 1D Lagrange basis on a given node set.
#[derive(Debug, Clone)]
pub struct Lagrange1d {
    pub nodes: Vec<f64>,
}

impl Lagrange1d {
    pub fn new(nodes: Vec<f64>) -> Self {
        Self { nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn eval(&self, j: usize, s: f64) -> f64 {
        let xj = self.nodes[j];
        let mut v = 1.0;
        for (m, &xm) in self.nodes.iter().enumerate() {
            if m != j {
                v *= (s - xm) / (xj - xm);
            }
        }
        v
    }

    pub fn deriv(&self, j: usize, s: f64) -> f64 {
        let xj = self.nodes[j];
        let mut sum = 0.0;
        for (k, &xk) in self.nodes.iter().enumerate() {
            if k == j {
                continue;
            }
            let mut term = 1.0 / (xj - xk);
            for (m, &xm) in self.nodes.iter().enumerate() {
                if m != j && m != k {
                    term *= (s - xm) / (xj - xm);
                }
            }
            sum += term;
        }
        sum
    }

    pub fn eval_all(&self, s: f64) -> Vec<f64> {
        (0..self.len()).map(|j| self.eval(j, s)).collect()
    }
}

/// Choice of basis for the trace unknowns on each edge. Pointwise relaxation
/// (and so point-smoother iteration counts) depends on this choice; block
/// relaxation does not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceBasis {
    /// L2-orthonormal shifted Legendre modes on [0,1]: the trace mass matrix
    /// is the identity, so pointwise relaxation acts per mode.
    Modal,
    /// Lagrange basis at the Gauss-Legendre points of [0,1].
    GaussNodal,
    /// Lagrange basis at the Chebyshev-Gauss points of [0,1].
    ChebyshevNodal,
    /// Lagrange basis at nodes four fifths of the way from the Gauss-Legendre
    /// points toward the Chebyshev-Gauss points of [0,1]. The wider node
    /// spread balances the diagonal of the condensed trace operator so that
    /// pointwise relaxation stays effective across polynomial orders; this is
    /// the default.
    BlendedNodal,
    /// Lagrange basis at the Gauss-Lobatto points of [0,1] (edge endpoints
    /// included).
    LobattoNodal,
}

/// Trace basis on an edge in the edge's canonical parameter on [0,1].
#[derive(Debug, Clone)]
pub struct EdgeBasis {
    pub order: usize,
    pub kind: TraceBasis,
    nodal: Option<Lagrange1d>,
}

/// Chebyshev-Gauss points of [0,1] (zeros of the degree-n Chebyshev
/// polynomial, mapped from [-1,1]).
fn chebyshev_nodes(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (1.0 - ((2 * i + 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos()))
        .collect()
}

impl EdgeBasis {
    pub fn new(order: usize, kind: TraceBasis) -> Self {
        let nodal = match kind {
            TraceBasis::Modal => None,
            TraceBasis::GaussNodal => Some(Lagrange1d::new(quadrature::gauss_legendre(order + 1).0)),
            TraceBasis::ChebyshevNodal => Some(Lagrange1d::new(chebyshev_nodes(order + 1))),
            TraceBasis::BlendedNodal => {
                let n = order + 1;
                let c = chebyshev_nodes(n);
                let g = quadrature::gauss_legendre(n).0;
                Some(Lagrange1d::new(
                    (0..n).map(|i| 0.8 * c[i] + 0.2 * g[i]).collect(),
                ))
            }
            TraceBasis::LobattoNodal => Some(Lagrange1d::new(if order == 0 {
                vec![0.5]
            } else {
                quadrature::gauss_lobatto(order + 1).0
            })),
        };
        Self { order, kind, nodal }
    }

    pub fn dim(&self) -> usize {
        self.order + 1
    }

    /// Interpolation nodes in [0, 1] for the nodal kinds, `None` for modal.
    pub fn nodes(&self) -> Option<&[f64]> {
        self.nodal.as_ref().map(|l| l.nodes.as_slice())
    }

    pub fn eval(&self, j: usize, s: f64) -> f64 {
        match &self.nodal {
            None => (2.0 * j as f64 + 1.0).sqrt() * shifted_legendre(j, s),
            Some(l) => l.eval(j, s),
        }
    }

    pub fn eval_all(&self, s: f64) -> Vec<f64> {
        (0..self.dim()).map(|j| self.eval(j, s)).collect()
    }

    /// Coefficients in this basis of the affine function taking the value v0
    /// at s = 0 and v1 at s = 1.
    pub fn affine_coeffs(&self, v0: f64, v1: f64) -> DVector<f64> {
        match &self.nodal {
            None => {
                let mut c = DVector::zeros(self.dim());
                c[0] = 0.5 * (v0 + v1);
                if self.order >= 1 {
                    c[1] = (v1 - v0) / (2.0 * 3f64.sqrt());
                }
                c
            }
            Some(l) => DVector::from_iterator(
                self.dim(),
                l.nodes.iter().map(|&t| v0 + (v1 - v0) * t),
            ),
        }
    }

    /// Mass matrix of the basis on [0,1] (the identity for the modal basis).
    pub fn mass(&self) -> DMatrix<f64> {
        let n = self.dim();
        let (qs, qw) = quadrature::gauss_legendre(self.order + 2);
        let mut m = DMatrix::zeros(n, n);
        for (&s, &w) in qs.iter().zip(&qw) {
            let phi = self.eval_all(s);
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] += w * phi[i] * phi[j];
                }
            }
        }
        m
    }
}

/// Scalar volume basis on the reference element.
#[derive(Debug, Clone)]
pub enum ElementBasis {
    /// Tensor-product nodal Lagrange (Gauss-Lobatto nodes) on [0,1]^2.
    QuadTensor { order: usize, line: Lagrange1d },
    /// Orthonormalized monomials of total degree <= order on the reference
    /// triangle; coeffs rows expand each basis function in monomials.
    TriOrtho {
        order: usize,
        exponents: Vec<(u32, u32)>,
        coeffs: DMatrix<f64>,
    },
}

impl ElementBasis {
    pub fn quad(order: usize) -> Self {
        let nodes = if order == 0 {
            vec![0.5]
        } else {
            quadrature::gauss_lobatto(order + 1).0
        };
        ElementBasis::QuadTensor {
            order,
            line: Lagrange1d::new(nodes),
        }
    }

    pub fn tri(order: usize) -> Self {
        let mut exponents = Vec::new();
        for d in 0..=order as u32 {
            for a in (0..=d).rev() {
                exponents.push((a, d - a));
            }
        }
        let n = exponents.len();
        // Exact Gram matrix of monomials on the reference triangle:
        // integral of x^a y^b equals a! b! / (a+b+2)!.
        fn fact(n: u32) -> f64 {
            (1..=n).map(|k| k as f64).product()
        }
        let mut gram = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let a = exponents[i].0 + exponents[j].0;
                let b = exponents[i].1 + exponents[j].1;
                gram[(i, j)] = fact(a) * fact(b) / fact(a + b + 2);
            }
        }
        let chol = gram.cholesky().expect("monomial Gram matrix is SPD");
        // coeffs = L^{-1}: row i orthonormalizes monomial i against 0..i-1.
        let coeffs = chol.l().solve_lower_triangular(&DMatrix::identity(n, n)).unwrap();
        ElementBasis::TriOrtho {
            order,
            exponents,
            coeffs,
        }
    }

    pub fn order(&self) -> usize {
        match self {
            ElementBasis::QuadTensor { order, .. } => *order,
            ElementBasis::TriOrtho { order, .. } => *order,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ElementBasis::QuadTensor { order, .. } => (order + 1) * (order + 1),
            ElementBasis::TriOrtho { exponents, .. } => exponents.len(),
        }
    }

    pub fn eval(&self, j: usize, p: [f64; 2]) -> f64 {
        match self {
            ElementBasis::QuadTensor { order, line } => {
                let n = order + 1;
                line.eval(j % n, p[0]) * line.eval(j / n, p[1])
            }
            ElementBasis::TriOrtho {
                exponents, coeffs, ..
            } => {
                let mut v = 0.0;
                for (m, &(a, b)) in exponents.iter().enumerate() {
                    let c = coeffs[(j, m)];
                    if c != 0.0 {
                        v += c * p[0].powi(a as i32) * p[1].powi(b as i32);
                    }
                }
                v
            }
        }
    }

    /// Gradient with respect to reference coordinates.
    pub fn grad_ref(&self, j: usize, p: [f64; 2]) -> [f64; 2] {
        match self {
            ElementBasis::QuadTensor { order, line } => {
                let n = order + 1;
                let (jx, jy) = (j % n, j / n);
                [
                    line.deriv(jx, p[0]) * line.eval(jy, p[1]),
                    line.eval(jx, p[0]) * line.deriv(jy, p[1]),
                ]
            }
            ElementBasis::TriOrtho {
                exponents, coeffs, ..
            } => {
                let mut g = [0.0, 0.0];
                for (m, &(a, b)) in exponents.iter().enumerate() {
                    let c = coeffs[(j, m)];
                    if c == 0.0 {
                        continue;
                    }
                    if a > 0 {
                        g[0] += c * a as f64 * p[0].powi(a as i32 - 1) * p[1].powi(b as i32);
                    }
                    if b > 0 {
                        g[1] += c * b as f64 * p[0].powi(a as i32) * p[1].powi(b as i32 - 1);
                    }
                }
                g
            }
        }
    }
}

/// Legendre polynomial of degree m mapped to [0,1]; used for moment degrees
/// of freedom.
pub fn shifted_legendre(m: usize, s: f64) -> f64 {
    let x = 2.0 * s - 1.0;
    match m {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut pm, mut p) = (1.0, x);
            for k in 1..m {
                let kf = k as f64;
                let pn = ((2.0 * kf + 1.0) * x * p - kf * pm) / (kf + 1.0);
                pm = p;
                p = pn;
            }
            p
        }
    }
}
