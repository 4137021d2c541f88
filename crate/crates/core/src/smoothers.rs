//! Stationary smoothers for the trace system: damped point Jacobi,
//! Chebyshev-accelerated Jacobi, symmetric point Gauss-Seidel (one forward
//! plus one backward sweep per step), and undamped block Jacobi on the edge
//! blocks.

use crate::error::{Error, Result};
use crate::trace_system::BlockSparseMatrix;
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmootherKind {
    /// x += (2/3) D^{-1} (b - A x)
    DampedJacobi,
    /// Chebyshev polynomial of the given degree in D^{-1}A, targeting the
    /// upper part [lambda_max/30, lambda_max] of the spectrum.
    ChebyshevJacobi { degree: usize },
    /// One forward and one backward point Gauss-Seidel sweep per step.
    SymmetricGaussSeidel,
    /// Exact solves on the per-edge diagonal blocks, no damping.
    BlockJacobi,
}

#[derive(Debug, Clone)]
pub struct Smoother {
    pub kind: SmootherKind,
    /// Scalar CSR copy of the operator rows.
    rows: Vec<Vec<(usize, f64)>>,
    /// Gauss-Seidel visit order: even-indexed edge blocks first, then odd
    /// ones. The two-color sweep decouples updates of neighboring edges.
    sweep_order: Vec<usize>,
    diag: DVector<f64>,
    /// Inverted diagonal blocks (block Jacobi only).
    block_inv: Vec<DMatrix<f64>>,
    block_offsets: Vec<(usize, usize)>,
    /// Largest eigenvalue estimate of D^{-1}A (Chebyshev only).
    pub lambda_max: f64,
}

impl Smoother {
    pub fn prepare(kind: SmootherKind, a: &BlockSparseMatrix) -> Result<Self> {
        let n = a.nrows();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for bi in 0..a.num_block_rows() {
            let r0 = a.row_offset(bi);
            for bj in 0..a.num_block_cols() {
                if let Some(blk) = a.block(bi, bj) {
                    let c0 = a.col_offset(bj);
                    for r in 0..blk.nrows() {
                        for c in 0..blk.ncols() {
                            let v = blk[(r, c)];
                            if v != 0.0 {
                                rows[r0 + r].push((c0 + c, v));
                            }
                        }
                    }
                }
            }
        }
        let mut diag = DVector::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            let d = row.iter().find(|&&(j, _)| j == i).map(|&(_, v)| v).unwrap_or(0.0);
            if d == 0.0 {
                return Err(Error::Smoother(format!("zero diagonal at row {i}")));
            }
            diag[i] = d;
        }

        let mut block_inv = Vec::new();
        let mut block_offsets = Vec::new();
        if kind == SmootherKind::BlockJacobi {
            for bi in 0..a.num_block_rows() {
                let blk = a.block(bi, bi).ok_or_else(|| {
                    Error::Smoother(format!("missing diagonal block {bi}"))
                })?;
                let inv = blk.clone().try_inverse().ok_or_else(|| {
                    Error::Smoother(format!("singular diagonal block {bi}"))
                })?;
                block_offsets.push((a.row_offset(bi), blk.nrows()));
                block_inv.push(inv);
            }
        }

        let mut sweep_order = Vec::with_capacity(n);
        for parity in 0..2 {
            for bi in (parity..a.num_block_rows()).step_by(2) {
                let r0 = a.row_offset(bi);
                sweep_order.extend(r0..r0 + a.row_block_size(bi));
            }
        }

        let mut s = Smoother {
            kind,
            rows,
            sweep_order,
            diag,
            block_inv,
            block_offsets,
            lambda_max: 0.0,
        };
        if let SmootherKind::ChebyshevJacobi { .. } = kind {
            s.lambda_max = s.estimate_lambda_max();
        }
        Ok(s)
    }

    fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(x.len());
        for (i, row) in self.rows.iter().enumerate() {
            let mut acc = 0.0;
            for &(j, v) in row {
                acc += v * x[j];
            }
            y[i] = acc;
        }
        y
    }

    /// Largest eigenvalue of D^{-1}A by a short Lanczos run in the
    /// D-weighted inner product (where D^{-1}A is self-adjoint for a
    /// symmetric A), with full reorthogonalization. The result is inflated
    /// by 5% so the Chebyshev interval covers the top of the spectrum.
    pub fn estimate_lambda_max(&self) -> f64 {
        let n = self.diag.len();
        let m = 50.min(n);
        let dnorm = |x: &DVector<f64>| {
            x.iter()
                .zip(self.diag.iter())
                .map(|(&xi, &di)| di * xi * xi)
                .sum::<f64>()
                .sqrt()
        };
        let ddot = |x: &DVector<f64>, y: &DVector<f64>| {
            x.iter()
                .zip(y.iter())
                .zip(self.diag.iter())
                .map(|((&xi, &yi), &di)| di * xi * yi)
                .sum::<f64>()
        };
        let mut vs: Vec<DVector<f64>> = Vec::with_capacity(m);
        let v0 = DVector::from_element(n, 1.0);
        let nv = dnorm(&v0);
        if nv == 0.0 {
            return 1.0;
        }
        vs.push(v0 / nv);
        let mut alphas = Vec::new();
        let mut betas = Vec::new();
        for j in 0..m {
            let mut w = self.matvec(&vs[j]);
            w.component_div_assign(&self.diag);
            let alpha = ddot(&w, &vs[j]);
            alphas.push(alpha);
            for v in &vs {
                let c = ddot(&w, v);
                w.axpy(-c, v, 1.0);
            }
            let beta = dnorm(&w);
            if beta < 1e-12 || j + 1 == m {
                break;
            }
            betas.push(beta);
            vs.push(w / beta);
        }
        let k = alphas.len();
        let mut t = DMatrix::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alphas[i];
            if i + 1 < k {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let lam = t
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::MIN, |a, &b| a.max(b));
        1.05 * lam.max(0.0).max(1e-300)
    }

    /// Apply `steps` smoothing iterations to x in place for A x = b.
    pub fn smooth(&self, x: &mut DVector<f64>, b: &DVector<f64>, steps: usize) {
        for _ in 0..steps {
            match self.kind {
                SmootherKind::DampedJacobi => {
                    let mut r = b - self.matvec(x);
                    r.component_div_assign(&self.diag);
                    *x += (2.0 / 3.0) * r;
                }
                SmootherKind::ChebyshevJacobi { degree } => {
                    self.chebyshev_step(x, b, degree);
                }
                SmootherKind::SymmetricGaussSeidel => {
                    self.gs_sweep(x, b, false);
                    self.gs_sweep(x, b, true);
                }
                SmootherKind::BlockJacobi => {
                    let r = b - self.matvec(x);
                    for (k, &(off, len)) in self.block_offsets.iter().enumerate() {
                        let dr = &self.block_inv[k] * r.rows(off, len);
                        let mut v = x.rows_mut(off, len);
                        v += dr;
                    }
                }
            }
        }
    }

    fn gs_sweep(&self, x: &mut DVector<f64>, b: &DVector<f64>, backward: bool) {
        let idx: Box<dyn Iterator<Item = &usize>> = if backward {
            Box::new(self.sweep_order.iter().rev())
        } else {
            Box::new(self.sweep_order.iter())
        };
        for &i in idx {
            let mut s = b[i];
            for &(j, v) in &self.rows[i] {
                if j != i {
                    s -= v * x[j];
                }
            }
            x[i] = s / self.diag[i];
        }
    }

    fn chebyshev_step(&self, x: &mut DVector<f64>, b: &DVector<f64>, degree: usize) {
        let lmax = self.lambda_max;
        let lmin = lmax / 30.0;
        let theta = 0.5 * (lmax + lmin);
        let delta = 0.5 * (lmax - lmin);
        let sigma1 = theta / delta;
        let mut rho_old = 1.0 / sigma1;

        let mut r = b - self.matvec(x);
        let mut d = r.component_div(&self.diag) / theta;
        for _ in 1..degree {
            *x += &d;
            r = b - self.matvec(x);
            let rho = 1.0 / (2.0 * sigma1 - rho_old);
            d = rho * rho_old * d + (2.0 * rho / delta) * r.component_div(&self.diag);
            rho_old = rho;
        }
        *x += &d;
    }
}
