//! Krylov solvers and preconditioners for the matrix-free operators.

use nalgebra::{DMatrix, DVector, LU};

use crate::error::{Error, Result};
use crate::field::{axpy, dot, norm2};
use crate::mesh::StructuredMesh2D;

/// Linear map on coefficient vectors.
pub trait LinearOperator {
    fn len(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// The all-ones coefficient vector spans the kernel (pure Neumann problems).
    fn constant_nullspace(&self) -> bool {
        false
    }
}

pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

/// No preconditioning.
#[derive(Clone, Copy, Debug, Default)]
pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

/// Closure-backed operator.
pub struct FnOperator<F: Fn(&[f64], &mut [f64])> {
    pub n: usize,
    pub f: F,
    pub nullspace: bool,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(n: usize, f: F) -> Self {
        Self { n, f, nullspace: false }
    }

    pub fn with_constant_nullspace(mut self) -> Self {
        self.nullspace = true;
        self
    }
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn len(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
    fn constant_nullspace(&self) -> bool {
        self.nullspace
    }
}

/// Closure-backed preconditioner.
pub struct FnPreconditioner<F: Fn(&[f64], &mut [f64])>(pub F);

impl<F: Fn(&[f64], &mut [f64])> Preconditioner for FnPreconditioner<F> {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        (self.0)(r, z)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Final residual relative to the initial one (or to the right-hand side).
    pub residual: f64,
    pub converged: bool,
}

impl SolveReport {
    fn trivial() -> Self {
        Self { iterations: 0, residual: 0.0, converged: true }
    }
}

/// Tolerances for linear solves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearOptions {
    /// Relative tolerance on `||b - A x|| / ||b||`.
    pub tol: f64,
    /// Absolute floor below which the residual counts as converged.
    pub abs_tol: f64,
    pub max_iter: usize,
    /// Restart length (GMRES only).
    pub restart: usize,
}

impl Default for LinearOptions {
    fn default() -> Self {
        Self { tol: 1e-10, abs_tol: 1e-14, max_iter: 2000, restart: 50 }
    }
}

fn remove_mean(x: &mut [f64]) {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter_mut().for_each(|v| *v -= m);
}

/// Preconditioned conjugate gradients. `x` holds the initial guess on entry.
/// For operators with constant null space the right-hand side, the
/// iterates and the preconditioned residuals are projected orthogonally to the
/// all-ones vector.
pub fn cg_solve(
    op: &dyn LinearOperator,
    rhs: &[f64],
    x: &mut [f64],
    opts: &LinearOptions,
    precond: &dyn Preconditioner,
) -> Result<SolveReport> {
    let n = op.len();
    crate::error::check_len(n, rhs.len())?;
    crate::error::check_len(n, x.len())?;
    let singular = op.constant_nullspace();
    let mut b = rhs.to_vec();
    if singular {
        remove_mean(&mut b);
        remove_mean(x);
    }
    let bnorm = norm2(&b);
    if bnorm == 0.0 {
        x.fill(0.0);
        return Ok(SolveReport::trivial());
    }
    let mut r = vec![0.0; n];
    op.apply(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let target = (opts.tol * bnorm).max(opts.abs_tol);
    let mut rnorm = norm2(&r);
    if rnorm <= target {
        return Ok(SolveReport { iterations: 0, residual: rnorm / bnorm, converged: true });
    }
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    if singular {
        remove_mean(&mut z);
    }
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for it in 1..=opts.max_iter {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Breakdown {
                solver: "cg",
                iteration: it,
                reason: format!("non-positive curvature p^T A p = {pap:e}"),
            });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        rnorm = norm2(&r);
        if rnorm <= target {
            if singular {
                remove_mean(x);
            }
            return Ok(SolveReport { iterations: it, residual: rnorm / bnorm, converged: true });
        }
        precond.apply(&r, &mut z);
        if singular {
            remove_mean(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NotConverged { solver: "cg", iterations: opts.max_iter, residual: rnorm / bnorm })
}

/// Restarted right-preconditioned GMRES. `x` holds the initial guess on entry.
pub fn gmres_solve(
    op: &dyn LinearOperator,
    rhs: &[f64],
    x: &mut [f64],
    opts: &LinearOptions,
    precond: &dyn Preconditioner,
) -> Result<SolveReport> {
    let n = op.len();
    crate::error::check_len(n, rhs.len())?;
    crate::error::check_len(n, x.len())?;
    let bnorm = norm2(rhs);
    if bnorm == 0.0 {
        x.fill(0.0);
        return Ok(SolveReport::trivial());
    }
    let target = (opts.tol * bnorm).max(opts.abs_tol);
    let m = opts.restart.max(1);
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut total = 0;
    let mut rnorm;
    loop {
        op.apply(x, &mut r);
        for i in 0..n {
            r[i] = rhs[i] - r[i];
        }
        rnorm = norm2(&r);
        if rnorm <= target {
            return Ok(SolveReport { iterations: total, residual: rnorm / bnorm, converged: true });
        }
        if total >= opts.max_iter {
            return Err(Error::NotConverged { solver: "gmres", iterations: total, residual: rnorm / bnorm });
        }
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / rnorm).collect());
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = rnorm;
        let mut k_used = 0;
        for j in 0..m {
            precond.apply(&basis[j], &mut z);
            op.apply(&z, &mut w);
            // modified Gram-Schmidt
            for (i, v) in basis.iter().enumerate() {
                h[i][j] = dot(&w, v);
                axpy(-h[i][j], v, &mut w);
            }
            let hn = norm2(&w);
            h[j + 1][j] = hn;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let denom = h[j][j].hypot(h[j + 1][j]);
            if denom == 0.0 {
                return Err(Error::Breakdown { solver: "gmres", iteration: total, reason: "zero Hessenberg column".into() });
            }
            cs[j] = h[j][j] / denom;
            sn[j] = h[j + 1][j] / denom;
            h[j][j] = denom;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            total += 1;
            k_used = j + 1;
            if g[j + 1].abs() <= target || total >= opts.max_iter || hn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        // back substitution
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for l in i + 1..k_used {
                s -= h[i][l] * y[l];
            }
            y[i] = s / h[i][i];
        }
        let mut u = vec![0.0; n];
        for (i, yi) in y.iter().enumerate() {
            axpy(*yi, &basis[i], &mut u);
        }
        precond.apply(&u, &mut z);
        axpy(1.0, &z, x);
    }
}

/// Residual of a nonlinear system `F(x) = 0`.
pub trait NonlinearSystem {
    fn len(&self) -> usize;
    fn residual(&self, x: &[f64], r: &mut [f64]);

    /// Directional derivative `J(x) dx`; `fx = F(x)` is supplied for finite differencing.
    fn jacobian_apply(&self, x: &[f64], fx: &[f64], dx: &[f64], out: &mut [f64]) {
        let dn = norm2(dx);
        if dn == 0.0 {
            out.fill(0.0);
            return;
        }
        // affine residuals are differenced with unit step, which is exact
        let eps = if self.is_affine() { 1.0 } else { f64::EPSILON.sqrt() * (1.0 + norm2(x)) / dn };
        let xp: Vec<f64> = x.iter().zip(dx).map(|(a, b)| a + eps * b).collect();
        self.residual(&xp, out);
        for (o, f) in out.iter_mut().zip(fx) {
            *o = (*o - f) / eps;
        }
    }

    /// Affine residuals converge in one exact Newton step.
    fn is_affine(&self) -> bool {
        false
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    /// Relative tolerance on `||F(x)|| / ||F(x0)||`.
    pub tol: f64,
    pub abs_tol: f64,
    pub max_newton: usize,
    /// Inner linear tolerance (inexact Newton forcing term).
    pub linear: LinearOptions,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            abs_tol: 1e-13,
            max_newton: 20,
            linear: LinearOptions { tol: 1e-4, abs_tol: 1e-15, max_iter: 1000, restart: 50 },
        }
    }
}

/// Newton iteration with GMRES inner solves; `x` holds the initial guess.
/// The reported iteration count is the number of Newton steps.
pub fn newton_krylov_solve(
    sys: &dyn NonlinearSystem,
    x: &mut [f64],
    opts: &NewtonOptions,
    precond: &dyn Preconditioner,
) -> Result<SolveReport> {
    let n = sys.len();
    crate::error::check_len(n, x.len())?;
    let mut f = vec![0.0; n];
    sys.residual(x, &mut f);
    let f0 = norm2(&f);
    let target = (opts.tol * f0).max(opts.abs_tol);
    if f0 <= opts.abs_tol {
        return Ok(SolveReport { iterations: 0, residual: 0.0, converged: true });
    }
    let mut lin = opts.linear;
    if sys.is_affine() {
        // one accurate inner solve suffices
        lin.tol = lin.tol.min(0.1 * opts.tol);
        lin.abs_tol = lin.abs_tol.min(0.1 * opts.abs_tol);
    }
    let mut fnorm = f0;
    for it in 1..=opts.max_newton {
        let xk = x.to_vec();
        let fk = f.clone();
        let jac = FnOperator::new(n, |dx: &[f64], out: &mut [f64]| sys.jacobian_apply(&xk, &fk, dx, out));
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        let mut dx = vec![0.0; n];
        let lin_report = gmres_solve(&jac, &rhs, &mut dx, &lin, precond);
        match lin_report {
            Ok(_) | Err(Error::NotConverged { .. }) => {}
            Err(e) => return Err(e),
        }
        axpy(1.0, &dx, x);
        sys.residual(x, &mut f);
        fnorm = norm2(&f);
        if fnorm <= target {
            return Ok(SolveReport { iterations: it, residual: fnorm / f0, converged: true });
        }
    }
    Err(Error::NotConverged { solver: "newton", iterations: opts.max_newton, residual: fnorm / f0 })
}

/// Exact inverse of cell-diagonal blocks, each factorized densely.
#[derive(Clone, Debug)]
pub struct BlockJacobi {
    block: usize,
    lu: Vec<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl BlockJacobi {
    /// Builds from explicit row-major blocks.
    pub fn from_blocks(block: usize, blocks: &[Vec<f64>]) -> Result<Self> {
        let mut lu = Vec::with_capacity(blocks.len());
        for (cell, b) in blocks.iter().enumerate() {
            crate::error::check_len(block * block, b.len())?;
            let f = DMatrix::from_row_slice(block, block, b).lu();
            if !f.is_invertible() || pivot_ratio(&f) < 1e-14 {
                return Err(Error::SingularBlock { cell });
            }
            lu.push(f);
        }
        Ok(Self { block, lu })
    }

    /// Extracts the cell-diagonal blocks of `op` by probing: all cells of a
    /// colour are excited simultaneously, which is exact for operators
    /// coupling only face neighbours.
    pub fn probe(op: &dyn LinearOperator, mesh: &StructuredMesh2D, block: usize) -> Result<Self> {
        let blocks = probe_blocks(op, mesh, block)?;
        Self::from_blocks(block, &blocks)
    }

    pub fn num_blocks(&self) -> usize {
        self.lu.len()
    }
}

fn pivot_ratio(f: &LU<f64, nalgebra::Dyn, nalgebra::Dyn>) -> f64 {
    let u = f.u();
    let d = u.diagonal();
    let max = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = d.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if max == 0.0 {
        0.0
    } else {
        min / max
    }
}

/// Cell-diagonal blocks (row-major) of a face-neighbour operator.
pub fn probe_blocks(op: &dyn LinearOperator, mesh: &StructuredMesh2D, block: usize) -> Result<Vec<Vec<f64>>> {
    let ncells = mesh.num_cells();
    crate::error::check_len(ncells * block, op.len())?;
    let (ncolors, colors) = mesh.cell_coloring();
    let mut blocks = vec![vec![0.0; block * block]; ncells];
    let mut x = vec![0.0; op.len()];
    let mut y = vec![0.0; op.len()];
    for color in 0..ncolors {
        for j in 0..block {
            x.fill(0.0);
            for c in (0..ncells).filter(|&c| colors[c] == color) {
                x[c * block + j] = 1.0;
            }
            op.apply(&x, &mut y);
            for c in (0..ncells).filter(|&c| colors[c] == color) {
                for i in 0..block {
                    blocks[c][i * block + j] = y[c * block + i];
                }
            }
        }
    }
    Ok(blocks)
}

impl Preconditioner for BlockJacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let b = self.block;
        for (c, f) in self.lu.iter().enumerate() {
            let rhs = DVector::from_column_slice(&r[c * b..(c + 1) * b]);
            let sol = f.solve(&rhs).expect("factorization checked at construction");
            z[c * b..(c + 1) * b].copy_from_slice(sol.as_slice());
        }
    }
}
