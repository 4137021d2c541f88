//! Full (unrestarted) GMRES with modified Gram-Schmidt Arnoldi, Givens
//! rotations, and optional left preconditioning. Convergence is judged on
//! the relative residual of the (left-preconditioned) system, read off the
//! Arnoldi recurrence at every step; without a preconditioner this is the
//! true relative residual.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    Diverged,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub iterations: usize,
    /// Relative residuals of the (preconditioned) system, one entry per
    /// iteration (index 0 is the initial residual 1.0 for a zero initial
    /// guess).
    pub residuals: Vec<f64>,
    pub final_residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct GmresOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        GmresOptions {
            tol: 1e-9,
            max_iter: 200,
        }
    }
}

type Operator<'a> = &'a dyn Fn(&DVector<f64>) -> DVector<f64>;

/// Solve A x = b from a zero initial guess. `precond` applies M^{-1} (left
/// preconditioning); pass None for plain GMRES.
pub fn gmres(
    apply_a: Operator,
    b: &DVector<f64>,
    precond: Option<Operator>,
    opts: &GmresOptions,
) -> (DVector<f64>, SolveReport) {
    let n = b.len();
    let bnorm = b.norm();
    if bnorm == 0.0 {
        return (
            DVector::zeros(n),
            SolveReport {
                status: SolveStatus::Converged,
                iterations: 0,
                residuals: vec![0.0],
                final_residual: 0.0,
            },
        );
    }
    let apply_m = |v: &DVector<f64>| match precond {
        Some(m) => m(v),
        None => v.clone(),
    };

    let r0 = apply_m(b);
    let beta = r0.norm();
    if beta == 0.0 || !beta.is_finite() {
        return (
            DVector::zeros(n),
            SolveReport {
                status: SolveStatus::Diverged,
                iterations: 0,
                residuals: vec![1.0],
                final_residual: 1.0,
            },
        );
    }

    let maxit = opts.max_iter.min(n);
    let mut basis: Vec<DVector<f64>> = vec![&r0 / beta];
    let mut h = DMatrix::<f64>::zeros(maxit + 1, maxit);
    let mut cs = vec![0.0f64; maxit];
    let mut sn = vec![0.0f64; maxit];
    let mut g = DVector::<f64>::zeros(maxit + 1);
    g[0] = beta;
    let mut residuals = vec![1.0];

    for j in 0..maxit {
        let mut w = apply_m(&apply_a(&basis[j]));
        for (i, v) in basis.iter().enumerate() {
            let hij = w.dot(v);
            h[(i, j)] = hij;
            w.axpy(-hij, v, 1.0);
        }
        let hnext = w.norm();
        h[(j + 1, j)] = hnext;
        let breakdown = hnext < 1e-14 * beta;
        if !breakdown {
            basis.push(w / hnext);
        }

        // Givens rotations reduce H to triangular form.
        for i in 0..j {
            let t = cs[i] * h[(i, j)] + sn[i] * h[(i + 1, j)];
            h[(i + 1, j)] = -sn[i] * h[(i, j)] + cs[i] * h[(i + 1, j)];
            h[(i, j)] = t;
        }
        let denom = (h[(j, j)] * h[(j, j)] + h[(j + 1, j)] * h[(j + 1, j)]).sqrt();
        if denom == 0.0 {
            return finish(reconstruct(&basis, &h, &g, j), SolveStatus::Diverged, residuals);
        }
        cs[j] = h[(j, j)] / denom;
        sn[j] = h[(j + 1, j)] / denom;
        h[(j, j)] = denom;
        h[(j + 1, j)] = 0.0;
        let t = cs[j] * g[j];
        g[j + 1] = -sn[j] * g[j];
        g[j] = t;

        // Residual estimate from the Arnoldi recurrence: |g[j+1]| equals the
        // norm of the (preconditioned) residual of the current iterate, so no
        // extra operator application is needed per step.
        let res = g[j + 1].abs() / beta;
        residuals.push(res);

        if res <= opts.tol {
            let x = reconstruct(&basis, &h, &g, j + 1);
            return finish(x, SolveStatus::Converged, residuals);
        }
        if !res.is_finite() || res > 1e6 * residuals[0] {
            let x = reconstruct(&basis, &h, &g, j + 1);
            return finish(x, SolveStatus::Diverged, residuals);
        }
        if breakdown {
            // The Krylov space is exhausted without meeting the tolerance.
            let x = reconstruct(&basis, &h, &g, j + 1);
            return finish(x, SolveStatus::Diverged, residuals);
        }
    }
    let x = reconstruct(&basis, &h, &g, maxit.min(basis.len() - 1).max(1));
    finish(x, SolveStatus::MaxIterations, residuals)
}

/// Solve the leading k-by-k triangular system and expand in the basis.
fn reconstruct(
    basis: &[DVector<f64>],
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    k: usize,
) -> DVector<f64> {
    let mut y = DVector::zeros(k);
    for i in (0..k).rev() {
        let mut s = g[i];
        for j in i + 1..k {
            s -= h[(i, j)] * y[j];
        }
        y[i] = s / h[(i, i)];
    }
    let mut x = DVector::zeros(basis[0].len());
    for i in 0..k {
        x.axpy(y[i], &basis[i], 1.0);
    }
    x
}

fn finish(
    x: DVector<f64>,
    status: SolveStatus,
    residuals: Vec<f64>,
) -> (DVector<f64>, SolveReport) {
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
