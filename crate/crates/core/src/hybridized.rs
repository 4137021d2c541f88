//! Hybridized discretizations of -div(K grad q) = f with Dirichlet data.
//! Each element is statically condensed to a map from its edge traces to its
//! interior unknowns together with a trace-space contribution; summing the
//! numerical-flux continuity conditions over all elements yields the global
//! trace system A lambda = g on the interior skeleton.

use crate::error::{Error, Result};
use crate::fem_basis::geometry::{phys_grad, ElementGeometry};
use crate::fem_basis::raviart_thomas::RtBasis;
use crate::fem_basis::{EdgeBasis, ElementBasis, TraceBasis};
use crate::mesh::{Element, ElementShape, Mesh};
use crate::trace_system::{BlockMatrixBuilder, BlockSparseMatrix};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Mixed hybridizable discontinuous Galerkin; flux hat(u).n = u.n + tau (q - lambda).
    Hdg,
    /// Hybridized interior-penalty DG, nonsymmetric variant.
    NipgH,
    /// Hybridized interior-penalty DG, incomplete variant.
    IipgH,
    /// Hybridized interior-penalty DG, symmetric variant.
    SipgH,
    /// Hybridized Raviart-Thomas of the given order (0 or 1, triangles only).
    RtH(usize),
}

impl Scheme {
    /// Symmetrization sign of the interior-penalty variants.
    fn ip_sign(self) -> f64 {
        match self {
            Scheme::NipgH => -1.0,
            Scheme::IipgH => 0.0,
            Scheme::SipgH => 1.0,
            _ => unreachable!("not an interior-penalty scheme"),
        }
    }

    pub fn trace_order(self, volume_order: usize) -> usize {
        match self {
            Scheme::RtH(k) => k,
            _ => volume_order,
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hdg" => Ok(Scheme::Hdg),
            "nipg" | "nipg-h" => Ok(Scheme::NipgH),
            "iipg" | "iipg-h" => Ok(Scheme::IipgH),
            "sipg" | "sipg-h" => Ok(Scheme::SipgH),
            "rt0" | "rt0-h" => Ok(Scheme::RtH(0)),
            "rt1" | "rt1-h" => Ok(Scheme::RtH(1)),
            other => Err(Error::Config(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Stabilization parameter rules, evaluated per edge. h_min is the smaller
/// diameter of the edge's adjacent elements; kappa is evaluated at the edge
/// midpoint.
#[derive(Debug, Clone, Copy)]
pub enum TauRule {
    Constant(f64),
    OverHmin(f64),
    PolyOverHmin(f64),
    KappaOverHmin(f64),
    KappaPolyOverHmin(f64),
}

impl TauRule {
    pub fn eval(&self, hmin: f64, kappa_mid: f64, order: usize) -> f64 {
        let poly = ((order + 1) * (order + 2)) as f64;
        match *self {
            TauRule::Constant(c) => c,
            TauRule::OverHmin(c) => c / hmin,
            TauRule::PolyOverHmin(c) => c * poly / hmin,
            TauRule::KappaOverHmin(c) => c * kappa_mid / hmin,
            TauRule::KappaPolyOverHmin(c) => c * kappa_mid * poly / hmin,
        }
    }
}

pub struct Problem {
    pub kappa: Box<dyn Fn([f64; 2]) -> f64>,
    pub source: Box<dyn Fn([f64; 2]) -> f64>,
    pub dirichlet: Box<dyn Fn([f64; 2]) -> f64>,
}

impl Problem {
    pub fn poisson(
        source: impl Fn([f64; 2]) -> f64 + 'static,
        dirichlet: impl Fn([f64; 2]) -> f64 + 'static,
    ) -> Self {
        Problem {
            kappa: Box::new(|_| 1.0),
            source: Box::new(source),
            dirichlet: Box::new(dirichlet),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MethodConfig {
    pub scheme: Scheme,
    /// Volume polynomial order (the Raviart-Thomas order for RtH).
    pub order: usize,
    pub tau: TauRule,
    /// Basis for the edge trace unknowns.
    pub trace_basis: TraceBasis,
    /// Per-element scheme overrides keyed by the mesh element tag.
    pub tag_schemes: Vec<(String, Scheme)>,
}

impl MethodConfig {
    pub fn new(scheme: Scheme, order: usize, tau: TauRule) -> Self {
        MethodConfig {
            scheme,
            order,
            tau,
            trace_basis: TraceBasis::BlendedNodal,
            tag_schemes: Vec::new(),
        }
    }

    pub fn scheme_for(&self, el: &Element) -> Result<Scheme> {
        let Some(tag) = &el.tag else {
            return Ok(self.scheme);
        };
        for (t, s) in &self.tag_schemes {
            if t == tag {
                return Ok(*s);
            }
        }
        Ok(self.scheme)
    }
}

/// Condensed element: interior unknowns x = l * lambda_loc + r, and the
/// element's additive contribution s * lambda_loc - b to the assembled trace
/// residual (rows are stacked edge trace degrees of freedom).
#[derive(Debug, Clone)]
pub struct LocalElement {
    pub scheme: Scheme,
    /// (global edge id, orientation flag) in local traversal order.
    pub edges: Vec<(usize, bool)>,
    pub l: DMatrix<f64>,
    pub r: DVector<f64>,
    pub s: DMatrix<f64>,
    pub b: DVector<f64>,
    /// Offset of the primal variable q within the interior unknown vector.
    pub q_offset: usize,
    /// Dimension of the primal variable block.
    pub nq: usize,
}

#[derive(Debug)]
pub struct TraceSystem {
    pub a: BlockSparseMatrix,
    pub g: DVector<f64>,
    /// Global ids of interior (non-Dirichlet) edges, ascending; block i of
    /// the system corresponds to free_edges[i].
    pub free_edges: Vec<usize>,
    /// Inverse map: global edge id to free block index.
    pub edge_block: Vec<Option<usize>>,
    /// L2-projected Dirichlet trace coefficients on boundary edges.
    pub dirichlet: Vec<Option<DVector<f64>>>,
    /// Trace degrees of freedom per edge.
    pub block_size: usize,
    /// Basis the trace coefficients are expressed in.
    pub trace_basis: TraceBasis,
}

pub struct Discretization<'m> {
    pub mesh: &'m Mesh,
    pub config: MethodConfig,
    pub trace_order: usize,
    pub locals: Vec<LocalElement>,
    pub system: TraceSystem,
}

/// Quadrature points per direction for a given polynomial order.
fn n_vol_points(order: usize) -> usize {
    order + 3
}

fn n_edge_points(order: usize) -> usize {
    order + 3
}

fn volume_basis(scheme: Scheme, shape: ElementShape, order: usize) -> ElementBasis {
    match (scheme, shape) {
        (Scheme::RtH(k), _) => ElementBasis::tri(k),
        (_, ElementShape::Quad) => ElementBasis::quad(order),
        (_, ElementShape::Tri) => ElementBasis::tri(order),
    }
}

pub fn discretize<'m>(
    mesh: &'m Mesh,
    config: &MethodConfig,
    problem: &Problem,
) -> Result<Discretization<'m>> {
    // Uniform trace order across all elements (required for a conforming
    // trace space when schemes are mixed per element).
    let mut trace_order: Option<usize> = None;
    for el in &mesh.elements {
        let s = config.scheme_for(el)?;
        if let Scheme::RtH(k) = s {
            if k > 1 {
                return Err(Error::Config(format!("Raviart-Thomas order {k} not supported")));
            }
            if el.shape != ElementShape::Tri {
                return Err(Error::Config(
                    "Raviart-Thomas elements must be triangles".into(),
                ));
            }
        }
        let t = s.trace_order(config.order);
        match trace_order {
            None => trace_order = Some(t),
            Some(t0) if t0 != t => {
                return Err(Error::Config(format!(
                    "mixed schemes must share the trace order (got {t0} and {t})"
                )))
            }
            _ => {}
        }
    }
    let trace_order = trace_order.ok_or_else(|| Error::Config("empty mesh".into()))?;
    let bs = trace_order + 1;
    let ebasis = EdgeBasis::new(trace_order, config.trace_basis);

    // Stabilization per element face: the kappa-dependent rules use the
    // owning element's permeability (centroid value), so the two sides of a
    // coefficient jump each carry their own penalty.
    let taus: Vec<Vec<f64>> = (0..mesh.num_elements())
        .map(|ei| {
            let kap = (problem.kappa)(mesh.elem_centroid(ei));
            mesh.elem_edges[ei]
                .iter()
                .map(|&(ge, _)| config.tau.eval(mesh.edge_hmin(ge), kap, config.order))
                .collect()
        })
        .collect();

    // Dirichlet traces: nodal interpolation of the boundary data for nodal
    // bases, L2 projection for the modal basis (the mass solve is in the edge
    // parameter, so one factorization serves every edge).
    let (qs, qw) = crate::fem_basis::quadrature::gauss_legendre(n_edge_points(trace_order));
    let mass_lu = ebasis.mass().lu();
    let mut dirichlet: Vec<Option<DVector<f64>>> = vec![None; mesh.num_edges()];
    let mut free_edges = Vec::new();
    let mut edge_block = vec![None; mesh.num_edges()];
    for (e, edge) in mesh.edges.iter().enumerate() {
        if edge.is_boundary() {
            let a = mesh.vertices[edge.verts[0]];
            let b = mesh.vertices[edge.verts[1]];
            let at = |s: f64| {
                (problem.dirichlet)([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])])
            };
            dirichlet[e] = Some(match ebasis.nodes() {
                Some(nodes) => DVector::from_iterator(bs, nodes.iter().map(|&s| at(s))),
                None => {
                    let mut vals = DVector::zeros(bs);
                    for (&s, &w) in qs.iter().zip(&qw) {
                        let gv = at(s);
                        for j in 0..bs {
                            vals[j] += w * gv * ebasis.eval(j, s);
                        }
                    }
                    mass_lu.solve(&vals).ok_or_else(|| {
                        Error::Singular("edge trace mass matrix is singular".into())
                    })?
                }
            });
        } else {
            edge_block[e] = Some(free_edges.len());
            free_edges.push(e);
        }
    }

    let mut builder = BlockMatrixBuilder::square(vec![bs; free_edges.len()]);
    let mut g = DVector::zeros(bs * free_edges.len());
    let mut locals = Vec::with_capacity(mesh.num_elements());

    for ei in 0..mesh.num_elements() {
        let scheme = config.scheme_for(&mesh.elements[ei])?;
        let local = condense(mesh, ei, scheme, config.order, &taus[ei], &ebasis, problem)?;
        let ne = local.edges.len();
        for (li, &(ge_i, _)) in local.edges.iter().enumerate() {
            let Some(bi) = edge_block[ge_i] else { continue };
            // Right-hand side from the source term.
            for r in 0..bs {
                g[bi * bs + r] += local.b[li * bs + r];
            }
            for (lj, &(ge_j, _)) in local.edges.iter().enumerate() {
                let blk = local.s.view((li * bs, lj * bs), (bs, bs)).into_owned();
                match edge_block[ge_j] {
                    Some(bj) => builder.add_block(bi, bj, &blk),
                    None => {
                        // Fold known Dirichlet traces into the right side.
                        let lam = dirichlet[ge_j].as_ref().unwrap();
                        let contrib = blk * lam;
                        for r in 0..bs {
                            g[bi * bs + r] -= contrib[r];
                        }
                    }
                }
            }
        }
        debug_assert_eq!(ne, mesh.elem_edges[ei].len());
        locals.push(local);
    }

    Ok(Discretization {
        mesh,
        config: config.clone(),
        trace_order,
        locals,
        system: TraceSystem {
            a: builder.build(),
            g,
            free_edges,
            edge_block,
            dirichlet,
            block_size: bs,
            trace_basis: config.trace_basis,
        },
    })
}

fn condense(
    mesh: &Mesh,
    ei: usize,
    scheme: Scheme,
    order: usize,
    taus: &[f64],
    ebasis: &EdgeBasis,
    problem: &Problem,
) -> Result<LocalElement> {
    let qorder = match scheme {
        Scheme::RtH(k) => k,
        _ => order,
    };
    let geo = ElementGeometry::new(mesh, ei, n_vol_points(qorder.max(order)), n_edge_points(qorder.max(order)));
    let parts = match scheme {
        Scheme::Hdg => hdg_blocks(mesh, ei, &geo, order, taus, ebasis, problem),
        Scheme::NipgH | Scheme::IipgH | Scheme::SipgH => {
            ipdg_blocks(mesh, ei, &geo, scheme, order, taus, ebasis, problem)
        }
        Scheme::RtH(k) => rth_blocks(mesh, ei, &geo, k, ebasis, problem)?,
    };
    let LocalBlocks {
        p,
        q,
        rhs0,
        rc,
        w,
        q_offset,
        nq,
    } = parts;

    let lu = p.lu();
    let l = lu
        .solve(&(-&q))
        .ok_or_else(|| Error::SingularLocal {
            element: ei,
            msg: "condensed interior block is singular".into(),
        })?;
    let r = lu.solve(&rhs0).ok_or_else(|| Error::SingularLocal {
        element: ei,
        msg: "condensed interior block is singular".into(),
    })?;
    // Numerical-flux rows: flux = rc x + w lambda. Summed over elements they
    // vanish; negating makes the assembled operator positive definite for
    // the symmetric schemes.
    let s = -(&rc * &l + w);
    let b = &rc * &r;

    Ok(LocalElement {
        scheme,
        edges: mesh.elem_edges[ei].clone(),
        l,
        r: DVector::from_column_slice(r.as_slice()),
        s,
        b: DVector::from_column_slice(b.as_slice()),
        q_offset,
        nq,
    })
}

struct LocalBlocks {
    /// Interior-interior coupling.
    p: DMatrix<f64>,
    /// Interior-trace coupling (moved to the left side).
    q: DMatrix<f64>,
    rhs0: DMatrix<f64>,
    /// Flux rows applied to interior unknowns.
    rc: DMatrix<f64>,
    /// Flux rows applied directly to the trace.
    w: DMatrix<f64>,
    q_offset: usize,
    nq: usize,
}

fn hdg_blocks(
    mesh: &Mesh,
    ei: usize,
    geo: &ElementGeometry,
    order: usize,
    taus: &[f64],
    ebasis: &EdgeBasis,
    problem: &Problem,
) -> LocalBlocks {
    let basis = volume_basis(Scheme::Hdg, mesh.elements[ei].shape, order);
    let nv = basis.dim();
    let bs = ebasis.dim();
    let ne = mesh.elem_edges[ei].len();
    let nlam = ne * bs;
    let nx = 3 * nv; // (u_x, u_y, q)

    let mut a = DMatrix::zeros(2 * nv, 2 * nv);
    let mut bmat = DMatrix::zeros(2 * nv, nv);
    let mut f = DVector::zeros(nv);
    for p in &geo.vol {
        let kinv = 1.0 / (problem.kappa)(p.xy);
        let phi: Vec<f64> = (0..nv).map(|j| basis.eval(j, p.ref_xy)).collect();
        let grad: Vec<[f64; 2]> = (0..nv)
            .map(|j| phys_grad(&p.invjt, basis.grad_ref(j, p.ref_xy)))
            .collect();
        for i in 0..nv {
            for j in 0..nv {
                let m = p.w * kinv * phi[i] * phi[j];
                a[(i, j)] += m;
                a[(nv + i, nv + j)] += m;
                for c in 0..2 {
                    bmat[(c * nv + i, j)] += p.w * phi[j] * grad[i][c];
                }
            }
            f[i] += p.w * (problem.source)(p.xy) * phi[i];
        }
    }

    let mut c = DMatrix::zeros(2 * nv, nlam);
    let mut mtau = DMatrix::zeros(nv, nv);
    let mut ctau = DMatrix::zeros(nv, nlam);
    let mut mtau_l = DMatrix::zeros(nlam, nlam);
    for (le, pts) in geo.edges.iter().enumerate() {
        let tau = taus[le];
        for p in pts {
            let phi: Vec<f64> = (0..nv).map(|j| basis.eval(j, p.ref_xy)).collect();
            let mu: Vec<f64> = ebasis.eval_all(p.s);
            for i in 0..nv {
                for k in 0..bs {
                    let col = le * bs + k;
                    for cc in 0..2 {
                        c[(cc * nv + i, col)] += p.w * phi[i] * p.normal[cc] * mu[k];
                    }
                    ctau[(i, col)] += p.w * tau * phi[i] * mu[k];
                }
                for j in 0..nv {
                    mtau[(i, j)] += p.w * tau * phi[i] * phi[j];
                }
            }
            for k in 0..bs {
                for k2 in 0..bs {
                    mtau_l[(le * bs + k, le * bs + k2)] += p.w * tau * mu[k] * mu[k2];
                }
            }
        }
    }

    let mut pm = DMatrix::zeros(nx, nx);
    pm.view_mut((0, 0), (2 * nv, 2 * nv)).copy_from(&a);
    pm.view_mut((0, 2 * nv), (2 * nv, nv)).copy_from(&(-&bmat));
    pm.view_mut((2 * nv, 0), (nv, 2 * nv)).copy_from(&bmat.transpose());
    pm.view_mut((2 * nv, 2 * nv), (nv, nv)).copy_from(&mtau);

    let mut qm = DMatrix::zeros(nx, nlam);
    qm.view_mut((0, 0), (2 * nv, nlam)).copy_from(&c);
    qm.view_mut((2 * nv, 0), (nv, nlam)).copy_from(&(-&ctau));

    let mut rhs0 = DMatrix::zeros(nx, 1);
    rhs0.view_mut((2 * nv, 0), (nv, 1)).copy_from(&f);

    let mut rc = DMatrix::zeros(nlam, nx);
    rc.view_mut((0, 0), (nlam, 2 * nv)).copy_from(&c.transpose());
    rc.view_mut((0, 2 * nv), (nlam, nv)).copy_from(&ctau.transpose());

    LocalBlocks {
        p: pm,
        q: qm,
        rhs0,
        rc,
        w: -mtau_l,
        q_offset: 2 * nv,
        nq: nv,
    }
}

#[allow(clippy::too_many_arguments)]
fn ipdg_blocks(
    mesh: &Mesh,
    ei: usize,
    geo: &ElementGeometry,
    scheme: Scheme,
    order: usize,
    taus: &[f64],
    ebasis: &EdgeBasis,
    problem: &Problem,
) -> LocalBlocks {
    let sf = scheme.ip_sign();
    let basis = volume_basis(scheme, mesh.elements[ei].shape, order);
    let nv = basis.dim();
    let bs = ebasis.dim();
    let ne = mesh.elem_edges[ei].len();
    let nlam = ne * bs;

    let mut stiff = DMatrix::zeros(nv, nv);
    let mut f = DMatrix::zeros(nv, 1);
    for p in &geo.vol {
        let kap = (problem.kappa)(p.xy);
        let phi: Vec<f64> = (0..nv).map(|j| basis.eval(j, p.ref_xy)).collect();
        let grad: Vec<[f64; 2]> = (0..nv)
            .map(|j| phys_grad(&p.invjt, basis.grad_ref(j, p.ref_xy)))
            .collect();
        for i in 0..nv {
            for j in 0..nv {
                stiff[(i, j)] += p.w * kap * (grad[i][0] * grad[j][0] + grad[i][1] * grad[j][1]);
            }
            f[(i, 0)] += p.w * (problem.source)(p.xy) * phi[i];
        }
    }

    // bn[j, i] = <K grad(phi_i).n, phi_j>; cnb[k, i] = <K grad(phi_i).n, mu_k>
    let mut bn = DMatrix::zeros(nv, nv);
    let mut cnb = DMatrix::zeros(nlam, nv);
    let mut mtau = DMatrix::zeros(nv, nv);
    let mut ctau = DMatrix::zeros(nv, nlam);
    let mut mtau_l = DMatrix::zeros(nlam, nlam);
    for (le, pts) in geo.edges.iter().enumerate() {
        let tau = taus[le];
        for p in pts {
            let kap = (problem.kappa)(p.xy);
            let phi: Vec<f64> = (0..nv).map(|j| basis.eval(j, p.ref_xy)).collect();
            let gn: Vec<f64> = (0..nv)
                .map(|j| {
                    let g = phys_grad(&p.invjt, basis.grad_ref(j, p.ref_xy));
                    kap * (g[0] * p.normal[0] + g[1] * p.normal[1])
                })
                .collect();
            let mu: Vec<f64> = ebasis.eval_all(p.s);
            for i in 0..nv {
                for j in 0..nv {
                    bn[(j, i)] += p.w * gn[i] * phi[j];
                    mtau[(i, j)] += p.w * tau * phi[i] * phi[j];
                }
                for k in 0..bs {
                    let col = le * bs + k;
                    cnb[(col, i)] += p.w * gn[i] * mu[k];
                    ctau[(i, col)] += p.w * tau * phi[i] * mu[k];
                }
            }
            for k in 0..bs {
                for k2 in 0..bs {
                    mtau_l[(le * bs + k, le * bs + k2)] += p.w * tau * mu[k] * mu[k2];
                }
            }
        }
    }

    let p = &stiff - &bn - sf * bn.transpose() + &mtau;
    let q = sf * cnb.transpose() - &ctau;
    let rc = ctau.transpose() - &cnb;

    LocalBlocks {
        p,
        q,
        rhs0: f,
        rc,
        w: -mtau_l,
        q_offset: 0,
        nq: nv,
    }
}

fn rth_blocks(
    mesh: &Mesh,
    ei: usize,
    geo: &ElementGeometry,
    k: usize,
    ebasis: &EdgeBasis,
    problem: &Problem,
) -> Result<LocalBlocks> {
    let rt = RtBasis::new(mesh, ei, k)?;
    let nu = rt.dim();
    let qb = ElementBasis::tri(k);
    let nq = qb.dim();
    let bs = ebasis.dim();
    let nlam = 3 * bs;
    let nx = nu + nq;

    let mut art = DMatrix::zeros(nu, nu);
    let mut brt = DMatrix::zeros(nu, nq);
    let mut f = DVector::zeros(nq);
    for p in &geo.vol {
        let kinv = 1.0 / (problem.kappa)(p.xy);
        let vals: Vec<[f64; 2]> = (0..nu).map(|i| rt.eval(i, p.xy)).collect();
        let divs: Vec<f64> = (0..nu).map(|i| rt.div(i, p.xy)).collect();
        let phi: Vec<f64> = (0..nq).map(|j| qb.eval(j, p.ref_xy)).collect();
        for i in 0..nu {
            for j in 0..nu {
                art[(i, j)] += p.w * kinv * (vals[i][0] * vals[j][0] + vals[i][1] * vals[j][1]);
            }
            for j in 0..nq {
                brt[(i, j)] += p.w * phi[j] * divs[i];
            }
        }
        for j in 0..nq {
            f[j] += p.w * (problem.source)(p.xy) * phi[j];
        }
    }

    let mut crt = DMatrix::zeros(nu, nlam);
    for (le, pts) in geo.edges.iter().enumerate() {
        for p in pts {
            let mu: Vec<f64> = ebasis.eval_all(p.s);
            for i in 0..nu {
                let v = rt.eval(i, p.xy);
                let vn = v[0] * p.normal[0] + v[1] * p.normal[1];
                for m in 0..bs {
                    crt[(i, le * bs + m)] += p.w * vn * mu[m];
                }
            }
        }
    }

    let mut pm = DMatrix::zeros(nx, nx);
    pm.view_mut((0, 0), (nu, nu)).copy_from(&art);
    pm.view_mut((0, nu), (nu, nq)).copy_from(&(-&brt));
    pm.view_mut((nu, 0), (nq, nu)).copy_from(&brt.transpose());

    let mut qm = DMatrix::zeros(nx, nlam);
    qm.view_mut((0, 0), (nu, nlam)).copy_from(&crt);

    let mut rhs0 = DMatrix::zeros(nx, 1);
    rhs0.view_mut((nu, 0), (nq, 1)).copy_from(&f);

    let mut rc = DMatrix::zeros(nlam, nx);
    rc.view_mut((0, 0), (nlam, nu)).copy_from(&crt.transpose());

    Ok(LocalBlocks {
        p: pm,
        q: qm,
        rhs0,
        rc,
        w: DMatrix::zeros(nlam, nlam),
        q_offset: nu,
        nq,
    })
}

impl<'m> Discretization<'m> {
    /// Per-edge trace values combining the solved interior traces with the
    /// projected Dirichlet data.
    pub fn full_edge_values(&self, solution: &DVector<f64>) -> Vec<DVector<f64>> {
        let bs = self.system.block_size;
        (0..self.mesh.num_edges())
            .map(|e| match self.system.edge_block[e] {
                Some(b) => solution.rows(b * bs, bs).into_owned(),
                None => self.system.dirichlet[e].clone().unwrap(),
            })
            .collect()
    }

    fn local_lambda(&self, ei: usize, edge_values: &[DVector<f64>]) -> DVector<f64> {
        let bs = self.system.block_size;
        let local = &self.locals[ei];
        let mut lam = DVector::zeros(local.edges.len() * bs);
        for (li, &(ge, _)) in local.edges.iter().enumerate() {
            lam.rows_mut(li * bs, bs).copy_from(&edge_values[ge]);
        }
        lam
    }

    /// Interior unknowns of an element from the trace values.
    pub fn recover(&self, ei: usize, edge_values: &[DVector<f64>]) -> DVector<f64> {
        let local = &self.locals[ei];
        &local.l * self.local_lambda(ei, edge_values) + &local.r
    }

    /// Net numerical flux out of an element; equals the element's source
    /// integral for any solution of the trace system (local conservation).
    pub fn net_outflux(&self, ei: usize, edge_values: &[DVector<f64>]) -> f64 {
        let local = &self.locals[ei];
        let lam = self.local_lambda(ei, edge_values);
        let flux = &local.b - &local.s * lam;
        // Test against the constant trace: expand 1 in the edge basis and
        // take the matching combination of flux rows per edge.
        let bs = self.system.block_size;
        let ones = EdgeBasis::new(self.trace_order, self.system.trace_basis).affine_coeffs(1.0, 1.0);
        (0..local.edges.len())
            .map(|li| (0..bs).map(|j| ones[j] * flux[li * bs + j]).sum::<f64>())
            .sum()
    }

    /// L2 error of the recovered primal variable against a reference.
    pub fn q_l2_error(
        &self,
        solution: &DVector<f64>,
        exact: &dyn Fn([f64; 2]) -> f64,
    ) -> f64 {
        let edge_values = self.full_edge_values(solution);
        let mut err2 = 0.0;
        for ei in 0..self.mesh.num_elements() {
            let local = &self.locals[ei];
            let x = self.recover(ei, &edge_values);
            let qorder = match local.scheme {
                Scheme::RtH(k) => k,
                _ => self.config.order,
            };
            let basis = volume_basis(local.scheme, self.mesh.elements[ei].shape, self.config.order);
            let geo = ElementGeometry::new(self.mesh, ei, n_vol_points(qorder) + 2, 2);
            for p in &geo.vol {
                let mut qh = 0.0;
                for j in 0..local.nq {
                    qh += x[local.q_offset + j] * basis.eval(j, p.ref_xy);
                }
                let d = qh - exact(p.xy);
                err2 += p.w * d * d;
            }
        }
        err2.sqrt()
    }

    /// Dense direct solve of the trace system (testing and coarse scales).
    pub fn solve_dense(&self) -> Result<DVector<f64>> {
        if self.system.a.nrows() == 0 {
            return Ok(DVector::zeros(0));
        }
        crate::trace_system::dense_solve(self.system.a.densify(), self.system.g.clone(), "trace system")
    }
}
