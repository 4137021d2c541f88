//! Geometric multigrid on the skeletal trace system. Coarse levels live on
//! macro-edge chains of an agglomeration hierarchy and carry linear traces
//! in the chain arclength parameter. Each transition eliminates the trace
//! unknowns interior to the coarser macros exactly (a Schur complement per
//! macro), so the Galerkin coarse operator is the discrete
//! Dirichlet-to-Neumann map of the coarse skeleton. For trace order p > 1 an
//! extra order-reduction level to p = 1 on the fine skeleton is inserted
//! below the finest level.

use crate::agglomeration::{AgglomerationHierarchy, EdgeClass, LevelPartition};
use crate::error::{Error, Result};
use crate::fem_basis::{EdgeBasis, TraceBasis};
use crate::hybridized::TraceSystem;
use crate::krylov::{SolveReport, SolveStatus};
use crate::mesh::Mesh;
use crate::smoothers::{Smoother, SmootherKind};
use crate::trace_system::{BlockMatrixBuilder, BlockSparseMatrix};
use nalgebra::{DMatrix, DVector};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// Smoothing steps double on each coarser level (base count on the
    /// finest level).
    Doubling,
    /// The same number of steps on every level.
    Constant(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct MgOptions {
    pub smoother: SmootherKind,
    /// Smoothing steps on the finest level.
    pub base_steps: usize,
    pub schedule: Schedule,
    /// Exact per-macro solve on the interior trace block before the coarse
    /// correction.
    pub local_correction: bool,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MgOptions {
    fn default() -> Self {
        MgOptions {
            smoother: SmootherKind::BlockJacobi,
            base_steps: 2,
            schedule: Schedule::Doubling,
            local_correction: true,
            tol: 1e-9,
            max_iter: 200,
        }
    }
}

/// One inter-level transfer. Block rows of the finer level split into an
/// interior set I (strictly inside a coarser macro) and a boundary set B (on
/// coarser macro interfaces). J injects coarse linear traces into the B
/// rows; the I rows are eliminated exactly with per-macro inverses.
struct Transition {
    i_set: Vec<usize>,
    /// Per coarser macro: its interior block rows and the inverse of their
    /// coupling block.
    groups: Vec<(Vec<usize>, DMatrix<f64>)>,
    /// Per finer block row: target coarse block and injection block (None
    /// for interior rows).
    j_rows: Vec<Option<(usize, DMatrix<f64>)>>,
    n_coarse: usize,
    coarse_bs: usize,
}

impl Transition {
    fn coarse_len(&self) -> usize {
        self.n_coarse * self.coarse_bs
    }

    /// x_I = A_II^{-1} r_I, zero elsewhere.
    fn local_correct(&self, a: &BlockSparseMatrix, r: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(a.nrows());
        for (grp, inv) in &self.groups {
            let sub = a.gather_rows(grp, r);
            a.scatter_rows(grp, &(inv * sub), &mut out);
        }
        out
    }

    /// r_c = J^T (r_B - A_BI A_II^{-1} r_I).
    fn restrict(&self, a: &BlockSparseMatrix, r: &DVector<f64>) -> DVector<f64> {
        let corrected = if self.i_set.is_empty() {
            None
        } else {
            Some(a.matvec(&self.local_correct(a, r)))
        };
        let mut out = DVector::zeros(self.coarse_len());
        for (i, jr) in self.j_rows.iter().enumerate() {
            let Some((ci, jblk)) = jr else { continue };
            let r0 = a.row_offset(i);
            let bs = a.row_block_size(i);
            let mut y = DVector::zeros(bs);
            for rr in 0..bs {
                y[rr] = r[r0 + rr] - corrected.as_ref().map_or(0.0, |t| t[r0 + rr]);
            }
            let contrib = jblk.transpose() * y;
            for c in 0..self.coarse_bs {
                out[ci * self.coarse_bs + c] += contrib[c];
            }
        }
        out
    }

    /// e_B = J e_c; e_I = -A_II^{-1} A_IB e_B (discrete harmonic extension).
    fn prolong(&self, a: &BlockSparseMatrix, ec: &DVector<f64>) -> DVector<f64> {
        let mut x = DVector::zeros(a.nrows());
        for (i, jr) in self.j_rows.iter().enumerate() {
            let Some((ci, jblk)) = jr else { continue };
            let mut e_loc = DVector::zeros(self.coarse_bs);
            for c in 0..self.coarse_bs {
                e_loc[c] = ec[ci * self.coarse_bs + c];
            }
            let xb = jblk * e_loc;
            let r0 = a.row_offset(i);
            for rr in 0..xb.len() {
                x[r0 + rr] = xb[rr];
            }
        }
        if !self.i_set.is_empty() {
            let t = a.matvec(&x);
            for (grp, inv) in &self.groups {
                let sub = a.gather_rows(grp, &t);
                a.scatter_rows(grp, &(-(inv * sub)), &mut x);
            }
        }
        x
    }
}

pub struct MgLevel {
    pub a: BlockSparseMatrix,
    smoother: Option<Smoother>,
    m: usize,
    /// Transfer to the next coarser level (None at the coarsest level).
    down: Option<Transition>,
}

pub struct MgHierarchy {
    /// Coarsest level first.
    levels: Vec<MgLevel>,
    coarse_inv: DMatrix<f64>,
    opts: MgOptions,
}

/// A trace edge of one multigrid level: its endpoint vertices, the pair of
/// macros it separates at that level, and one fine mesh edge on it.
struct LevelEdge {
    start: usize,
    end: usize,
    sep: (usize, usize),
    rep_fine: usize,
}

fn fine_level_edges(mesh: &Mesh, system: &TraceSystem) -> Result<Vec<LevelEdge>> {
    system
        .free_edges
        .iter()
        .map(|&e| {
            let edge = &mesh.edges[e];
            let right = edge.right.ok_or_else(|| {
                Error::Agglomeration(format!("free trace edge {e} lies on the domain boundary"))
            })?;
            Ok(LevelEdge {
                start: edge.verts[0],
                end: edge.verts[1],
                sep: (edge.left, right),
                rep_fine: e,
            })
        })
        .collect()
}

/// Interior macro-edges of an agglomeration level, plus a map from
/// macro-edge id to coarse block index.
fn coarse_level_edges(lvl: &LevelPartition) -> (Vec<LevelEdge>, BTreeMap<usize, usize>) {
    let mut edges = Vec::new();
    let mut map = BTreeMap::new();
    for (id, me) in lvl.macro_edges.iter().enumerate() {
        let (m1, Some(m2)) = me.macros else { continue };
        map.insert(id, edges.len());
        let (start, end) = me.endpoints();
        edges.push(LevelEdge {
            start,
            end,
            sep: (m1, m2),
            rep_fine: me.fine_edges[0].0,
        });
    }
    (edges, map)
}

/// Injection block for a finer edge into the coarse linear trace on its
/// containing macro-edge chain. A coarse linear trace composed with the
/// affine chain parameter s(t) = (1-t) s0 + t s1 is affine in the edge's own
/// parameter t, so each column is the expansion of one coarse basis function
/// (order 1, same basis kind) in the finer edge's basis.
fn injection_block(basis: &EdgeBasis, s0: f64, s1: f64) -> DMatrix<f64> {
    let coarse = EdgeBasis::new(1, basis.kind);
    let mut j = DMatrix::zeros(basis.dim(), 2);
    for c in 0..2 {
        j.set_column(c, &basis.affine_coeffs(coarse.eval(c, s0), coarse.eval(c, s1)));
    }
    j
}

/// Order-reduction transition: same skeleton, trace order p replaced by 1
/// (the injection embeds the linear traces in the order-p edge basis).
fn p_transition(a: &BlockSparseMatrix, basis: &EdgeBasis) -> (Transition, BlockSparseMatrix) {
    let j = injection_block(basis, 0.0, 1.0);
    let nb = a.num_block_rows();
    let mut builder = BlockMatrixBuilder::square(vec![2; nb]);
    a.for_each_block(|i, k, blk| {
        builder.add_block(i, k, &(j.transpose() * blk * &j));
    });
    let tr = Transition {
        i_set: Vec::new(),
        groups: Vec::new(),
        j_rows: (0..nb).map(|i| Some((i, j.clone()))).collect(),
        n_coarse: nb,
        coarse_bs: 2,
    };
    (tr, builder.build())
}

/// Agglomeration transition from the current trace level to the next
/// coarser one, with the Galerkin coarse operator
/// A_c = J^T (A_BB - A_BI A_II^{-1} A_IB) J.
fn h_transition(
    a: &BlockSparseMatrix,
    kind: TraceBasis,
    cur: &[LevelEdge],
    parent: &[usize],
    coarse_lvl: &LevelPartition,
    coarse_map: &BTreeMap<usize, usize>,
    n_coarse: usize,
) -> Result<(Transition, BlockSparseMatrix)> {
    let mut i_set = Vec::new();
    let mut group_rows: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut j_rows: Vec<Option<(usize, DMatrix<f64>)>> = Vec::with_capacity(cur.len());
    for (i, le) in cur.iter().enumerate() {
        let (p1, p2) = (parent[le.sep.0], parent[le.sep.1]);
        if p1 == p2 {
            i_set.push(i);
            group_rows.entry(p1).or_default().push(i);
            j_rows.push(None);
        } else {
            let me_id = match coarse_lvl.edge_class[le.rep_fine] {
                EdgeClass::Boundary { macro_edge } => macro_edge,
                EdgeClass::Interior => {
                    return Err(Error::Agglomeration(
                        "trace edge between distinct macros is interior at the coarser level"
                            .into(),
                    ))
                }
            };
            let ci = *coarse_map.get(&me_id).ok_or_else(|| {
                Error::Agglomeration("trace edge maps to a boundary macro-edge".into())
            })?;
            let me = &coarse_lvl.macro_edges[me_id];
            let s0 = me.param_of_vertex(le.start).ok_or_else(|| {
                Error::Agglomeration("edge endpoint missing from its macro-edge chain".into())
            })?;
            let s1 = me.param_of_vertex(le.end).ok_or_else(|| {
                Error::Agglomeration("edge endpoint missing from its macro-edge chain".into())
            })?;
            let basis = EdgeBasis::new(a.row_block_size(i) - 1, kind);
            j_rows.push(Some((ci, injection_block(&basis, s0, s1))));
        }
    }

    // Per-macro inverses of the interior coupling blocks.
    let mut groups = Vec::with_capacity(group_rows.len());
    for (_, grp) in group_rows {
        let dense = a.extract(&grp, &grp).densify();
        let inv = dense.try_inverse().ok_or_else(|| {
            Error::Singular("interior trace block of a macro is singular".into())
        })?;
        groups.push((grp, inv));
    }

    // S = A_BB - sum over macros of A_BI A_II^{-1} A_IB, on the B rows.
    let b_set: Vec<usize> = j_rows
        .iter()
        .enumerate()
        .filter(|(_, j)| j.is_some())
        .map(|(i, _)| i)
        .collect();
    let b_pos: BTreeMap<usize, usize> = b_set.iter().enumerate().map(|(p, &i)| (i, p)).collect();
    let b_bs: Vec<usize> = b_set.iter().map(|&i| a.row_block_size(i)).collect();
    let mut s_builder = BlockMatrixBuilder::square(b_bs.clone());
    a.extract(&b_set, &b_set).for_each_block(|bi, bj, blk| {
        s_builder.add_block(bi, bj, blk);
    });
    for (grp, inv) in &groups {
        let grp_set: BTreeSet<usize> = grp.iter().copied().collect();
        let mut b_adj: BTreeSet<usize> = BTreeSet::new();
        for &i in grp {
            for &j in a.block_cols_of_row(i) {
                if b_pos.contains_key(&j) {
                    b_adj.insert(j);
                }
            }
        }
        for &b in &b_set {
            if a.block_cols_of_row(b).iter().any(|j| grp_set.contains(j)) {
                b_adj.insert(b);
            }
        }
        let b_adj: Vec<usize> = b_adj.into_iter().collect();
        if b_adj.is_empty() {
            continue;
        }
        let a_ib = a.extract(grp, &b_adj).densify();
        let a_bi = a.extract(&b_adj, grp).densify();
        let corr = a_bi * inv * a_ib;
        // Scatter -corr into the builder blockwise.
        let mut roff = Vec::with_capacity(b_adj.len() + 1);
        roff.push(0);
        for &b in &b_adj {
            roff.push(roff.last().unwrap() + a.row_block_size(b));
        }
        for (xi, &bx) in b_adj.iter().enumerate() {
            for (yi, &by) in b_adj.iter().enumerate() {
                let sub = corr.view(
                    (roff[xi], roff[yi]),
                    (roff[xi + 1] - roff[xi], roff[yi + 1] - roff[yi]),
                );
                s_builder.add_block(b_pos[&bx], b_pos[&by], &(-sub.clone_owned()));
            }
        }
    }
    let s = s_builder.build();

    let mut c_builder = BlockMatrixBuilder::square(vec![2; n_coarse]);
    s.for_each_block(|bi, bj, blk| {
        let (ci, ji) = j_rows[b_set[bi]].as_ref().unwrap();
        let (cj, jj) = j_rows[b_set[bj]].as_ref().unwrap();
        c_builder.add_block(*ci, *cj, &(ji.transpose() * blk * jj));
    });
    let a_coarse = c_builder.build();

    let tr = Transition {
        i_set,
        groups,
        j_rows,
        n_coarse,
        coarse_bs: 2,
    };
    Ok((tr, a_coarse))
}

impl MgHierarchy {
    pub fn build(
        mesh: &Mesh,
        agg: &AgglomerationHierarchy,
        system: &TraceSystem,
        opts: MgOptions,
    ) -> Result<MgHierarchy> {
        // Built finest-first, reversed at the end.
        let mut rev: Vec<(BlockSparseMatrix, Option<Transition>)> = Vec::new();
        let mut a = system.a.clone();

        if system.block_size > 2 {
            let basis = EdgeBasis::new(system.block_size - 1, system.trace_basis);
            let (tr, coarse) = p_transition(&a, &basis);
            rev.push((a, Some(tr)));
            a = coarse;
        }

        let mut cur_edges = fine_level_edges(mesh, system)?;
        for k in (2..=agg.num_levels).rev() {
            let parent = agg.parent_map(k);
            let coarse_lvl = agg.level(k - 1);
            let (coarse_edges, coarse_map) = coarse_level_edges(coarse_lvl);
            let (tr, coarse) = h_transition(
                &a,
                system.trace_basis,
                &cur_edges,
                &parent,
                coarse_lvl,
                &coarse_map,
                coarse_edges.len(),
            )?;
            rev.push((a, Some(tr)));
            a = coarse;
            cur_edges = coarse_edges;
        }
        rev.push((a, None));

        let coarse_inv = {
            let bottom = &rev.last().unwrap().0;
            if bottom.nrows() == 0 {
                DMatrix::zeros(0, 0)
            } else {
                bottom.densify().try_inverse().ok_or_else(|| {
                    Error::Singular("coarsest trace operator is singular".into())
                })?
            }
        };

        let n_levels = rev.len();
        let mut levels = Vec::with_capacity(n_levels);
        for (fi, (a, down)) in rev.into_iter().enumerate() {
            // fi = 0 is the finest level here.
            let is_coarsest = fi == n_levels - 1;
            let (smoother, m) = if is_coarsest {
                (None, 0)
            } else {
                let m = match opts.schedule {
                    Schedule::Doubling => opts.base_steps << fi,
                    Schedule::Constant(c) => c,
                };
                (Some(Smoother::prepare(opts.smoother, &a)?), m)
            };
            levels.push(MgLevel {
                a,
                smoother,
                m,
                down,
            });
        }
        levels.reverse();

        Ok(MgHierarchy {
            levels,
            coarse_inv,
            opts,
        })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, i: usize) -> &MgLevel {
        &self.levels[i]
    }

    /// The finest-level operator.
    pub fn operator(&self) -> &BlockSparseMatrix {
        &self.levels.last().unwrap().a
    }

    /// Unknown counts per level, coarsest first.
    pub fn level_dims(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.a.nrows()).collect()
    }

    /// Inject a level i-1 correction into level i (levels are coarsest
    /// first, so i >= 1). Includes the harmonic extension of interior rows.
    pub fn prolong(&self, i: usize, ec: &DVector<f64>) -> DVector<f64> {
        let lvl = &self.levels[i];
        lvl.down.as_ref().unwrap().prolong(&lvl.a, ec)
    }

    /// Restrict a level i residual onto level i-1 (i >= 1).
    pub fn restrict(&self, i: usize, r: &DVector<f64>) -> DVector<f64> {
        let lvl = &self.levels[i];
        lvl.down.as_ref().unwrap().restrict(&lvl.a, r)
    }

    fn vcycle(&self, li: usize, r: &DVector<f64>) -> DVector<f64> {
        let lvl = &self.levels[li];
        if li == 0 {
            return &self.coarse_inv * r;
        }
        let tr = lvl.down.as_ref().unwrap();
        let smoother = lvl.smoother.as_ref().unwrap();

        let mut e = DVector::zeros(r.len());
        smoother.smooth(&mut e, r, lvl.m);
        if self.opts.local_correction && !tr.i_set.is_empty() {
            let res = r - lvl.a.matvec(&e);
            e += tr.local_correct(&lvl.a, &res);
        }
        let res = r - lvl.a.matvec(&e);
        let ec = self.vcycle(li - 1, &tr.restrict(&lvl.a, &res));
        e += tr.prolong(&lvl.a, &ec);
        smoother.smooth(&mut e, r, lvl.m);
        e
    }

    /// One V-cycle applied to a residual (the preconditioner action).
    pub fn apply(&self, r: &DVector<f64>) -> DVector<f64> {
        self.vcycle(self.levels.len() - 1, r)
    }

    /// Stationary iteration x <- x + B(g - A x) from a zero initial guess,
    /// judged on the true relative residual.
    pub fn solve(&self, g: &DVector<f64>) -> (DVector<f64>, SolveReport) {
        let a = self.operator();
        let gnorm = g.norm();
        if gnorm == 0.0 {
            return (
                DVector::zeros(a.ncols()),
                SolveReport {
                    status: SolveStatus::Converged,
                    iterations: 0,
                    residuals: vec![0.0],
                    final_residual: 0.0,
                },
            );
        }
        let mut x = DVector::zeros(a.ncols());
        let mut residuals = vec![1.0];
        let mut status = SolveStatus::MaxIterations;
        for _ in 1..=self.opts.max_iter {
            let r = g - a.matvec(&x);
            x += self.apply(&r);
            let res = (g - a.matvec(&x)).norm() / gnorm;
            residuals.push(res);
            if res <= self.opts.tol {
                status = SolveStatus::Converged;
                break;
            }
            if !res.is_finite() || res > 1e6 * residuals[0] {
                status = SolveStatus::Diverged;
                break;
            }
        }
        let final_residual = *residuals.last().unwrap();
        let iterations = residuals.len() - 1;
        (
            x,
            SolveReport {
                status,
                iterations,
                residuals,
                final_residual,
            },
        )
    }
}
