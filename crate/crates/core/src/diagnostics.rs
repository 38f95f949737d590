//! Scalar functionals, error norms and per-step records.
//!
//! All integrals use `p + 2` Gauss points per direction.

use crate::basis::{eval_cell_into, unit_gauss, BasisTable, CellValues, TensorBasis1D};
use crate::error::{Error, Result};
use crate::field::DGField;
use crate::forms::Discretization;

/// Analytic reference solution.
pub trait ExactSolution {
    fn velocity(&self, x: [f64; 2], t: f64) -> [f64; 2];
    /// `g[i][j] = d v_i / d x_j`
    fn velocity_gradient(&self, x: [f64; 2], t: f64) -> [[f64; 2]; 2];
    fn pressure(&self, x: [f64; 2], t: f64) -> f64;
}

/// One row of benchmark output.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkRecord {
    pub t: f64,
    pub e_kin: f64,
    pub enstrophy: f64,
    pub dissipation: f64,
    pub max_div: f64,
    pub max_mass_residual: f64,
    pub err_v_l2: Option<f64>,
    pub err_v_h1: Option<f64>,
    pub err_p_l2: Option<f64>,
}

/// Velocity values and physical gradients at the overintegration points of one cell.
struct Sampler {
    tab: BasisTable,
    cx: CellValues,
    cy: CellValues,
    scratch: Vec<f64>,
}

impl Sampler {
    fn new(disc: &Discretization) -> Result<Self> {
        let p = disc.degree();
        let rule = unit_gauss(p + 2)?;
        let tab = BasisTable::new(&TensorBasis1D::new(p), &rule);
        let n = tab.npoints();
        Ok(Self { tab, cx: CellValues::zeros(n), cy: CellValues::zeros(n), scratch: Vec::new() })
    }

    fn load(&mut self, v: &DGField, cell: usize) {
        eval_cell_into(v.block(cell, 0), &self.tab, &mut self.cx, &mut self.scratch);
        eval_cell_into(v.block(cell, 1), &self.tab, &mut self.cy, &mut self.scratch);
    }

    /// Integrates `f(value, gradient)` over the mesh.
    fn integrate(&mut self, disc: &Discretization, v: &DGField, f: impl Fn([f64; 2], [[f64; 2]; 2]) -> f64) -> f64 {
        let mesh = &disc.mesh;
        let (hx, hy) = (mesh.hx(), mesh.hy());
        let nq = self.tab.nq;
        let w = self.tab.rule.weights.clone();
        let mut total = 0.0;
        for cell in 0..mesh.num_cells() {
            self.load(v, cell);
            let mut s = 0.0;
            for qy in 0..nq {
                for qx in 0..nq {
                    let q = qy * nq + qx;
                    let val = [self.cx.val[q], self.cy.val[q]];
                    let grad = [
                        [self.cx.d_xi[q] / hx, self.cx.d_eta[q] / hy],
                        [self.cy.d_xi[q] / hx, self.cy.d_eta[q] / hy],
                    ];
                    s += w[qx] * w[qy] * f(val, grad);
                }
            }
            total += s;
        }
        total * mesh.cell_measure()
    }
}

fn check_velocity(disc: &Discretization, v: &DGField) -> Result<()> {
    if v.ncomp != 2 || v.degree != disc.degree() || v.len() != disc.velocity_len() {
        return Err(Error::InvalidDegree(format!("expected velocity of degree {}", disc.degree())));
    }
    Ok(())
}

/// `E = 1/2 (v, v)`
pub fn kinetic_energy(disc: &Discretization, v: &DGField) -> Result<f64> {
    check_velocity(disc, v)?;
    Ok(0.5 * Sampler::new(disc)?.integrate(disc, v, |u, _| u[0] * u[0] + u[1] * u[1]))
}

/// `1/2 (curl_h v, curl_h v)` with the scalar curl `d1 v2 - d2 v1`.
pub fn enstrophy(disc: &Discretization, v: &DGField) -> Result<f64> {
    check_velocity(disc, v)?;
    Ok(0.5 * Sampler::new(disc)?.integrate(disc, v, |_, g| (g[1][0] - g[0][1]).powi(2)))
}

/// `nu / |Omega| (grad_h v, grad_h v)`
pub fn dissipation(disc: &Discretization, v: &DGField, nu: f64) -> Result<f64> {
    check_velocity(disc, v)?;
    let s = Sampler::new(disc)?.integrate(disc, v, |_, g| g.iter().flatten().map(|x| x * x).sum());
    Ok(nu * s / disc.mesh.domain_measure())
}

/// Largest `|div v|` over the overintegration points of all cells.
pub fn max_pointwise_divergence(disc: &Discretization, v: &DGField) -> Result<f64> {
    check_velocity(disc, v)?;
    let mut s = Sampler::new(disc)?;
    let (hx, hy) = (disc.mesh.hx(), disc.mesh.hy());
    let mut m = 0.0f64;
    for cell in 0..disc.mesh.num_cells() {
        s.load(v, cell);
        for q in 0..s.tab.npoints() {
            m = m.max((s.cx.d_xi[q] / hx + s.cy.d_eta[q] / hy).abs());
        }
    }
    Ok(m)
}

/// Largest per-cell flux imbalance.
pub fn max_local_mass_residual(disc: &Discretization, v: &DGField, t: f64) -> Result<f64> {
    Ok(disc.local_mass_residual(v, t)?.iter().fold(0.0f64, |m, r| m.max(r.abs())))
}

/// Broken L2 norm of a velocity field.
pub fn velocity_l2_norm(disc: &Discretization, v: &DGField) -> Result<f64> {
    Ok((2.0 * kinetic_energy(disc, v)?).sqrt())
}

/// `(||v - v_ex||, |v - v_ex|_{1,h}, ||p - p_ex||)` with the pressure
/// difference mean-aligned before norming.
pub fn error_norms(
    disc: &Discretization,
    v: &DGField,
    p: &DGField,
    exact: &dyn ExactSolution,
    t: f64,
) -> Result<(f64, f64, f64)> {
    check_velocity(disc, v)?;
    if p.ncomp != 1 || p.degree + 1 != disc.degree() {
        return Err(Error::InvalidDegree(format!("expected pressure of degree {}", disc.pressure_degree())));
    }
    let mesh = &disc.mesh;
    let deg = disc.degree();
    let rule = unit_gauss(deg + 2)?;
    let vt = BasisTable::new(&TensorBasis1D::new(deg), &rule);
    let pt = BasisTable::new(&TensorBasis1D::new(deg - 1), &rule);
    let nq = rule.len();
    let (hx, hy) = (mesh.hx(), mesh.hy());
    let jac = hx * hy;
    let mut cx = CellValues::zeros(vt.npoints());
    let mut cy = CellValues::zeros(vt.npoints());
    let mut cp = CellValues::zeros(pt.npoints());
    let mut scratch = Vec::new();
    let (mut el2, mut eh1) = (0.0, 0.0);
    // pressure differences with weights; mean-aligned in a second pass
    let mut dp: Vec<(f64, f64)> = Vec::with_capacity(mesh.num_cells() * nq * nq);
    for cell in 0..mesh.num_cells() {
        eval_cell_into(v.block(cell, 0), &vt, &mut cx, &mut scratch);
        eval_cell_into(v.block(cell, 1), &vt, &mut cy, &mut scratch);
        eval_cell_into(p.block(cell, 0), &pt, &mut cp, &mut scratch);
        for qy in 0..nq {
            for qx in 0..nq {
                let q = qy * nq + qx;
                let wq = rule.weights[qx] * rule.weights[qy] * jac;
                let x = mesh.map_point(cell, rule.points[qx], rule.points[qy]);
                let ve = exact.velocity(x, t);
                let ge = exact.velocity_gradient(x, t);
                el2 += wq * ((cx.val[q] - ve[0]).powi(2) + (cy.val[q] - ve[1]).powi(2));
                eh1 += wq
                    * ((cx.d_xi[q] / hx - ge[0][0]).powi(2)
                        + (cx.d_eta[q] / hy - ge[0][1]).powi(2)
                        + (cy.d_xi[q] / hx - ge[1][0]).powi(2)
                        + (cy.d_eta[q] / hy - ge[1][1]).powi(2));
                let d = cp.val[q] - exact.pressure(x, t);
                dp.push((wq, d));
            }
        }
    }
    let area = mesh.domain_measure();
    let mean = dp.iter().map(|(w, d)| w * d).sum::<f64>() / area;
    let ep: f64 = dp.iter().map(|(w, d)| w * (d - mean).powi(2)).sum();
    Ok((el2.sqrt(), eh1.sqrt(), ep.sqrt()))
}

/// `sqrt(int_0^T e(t)^2 dt)` by the trapezoidal rule over `(t, e)` samples.
pub fn cumulative_norm(samples: &[(f64, f64)]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "cumulative norm needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    let s: f64 = samples
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 * w[0].1 + w[1].1 * w[1].1))
        .sum();
    Ok(s.sqrt())
}

/// Collects all diagnostics of a state.
pub fn record(
    disc: &Discretization,
    v: &DGField,
    p: &DGField,
    t: f64,
    exact: Option<&dyn ExactSolution>,
) -> Result<BenchmarkRecord> {
    let nu = disc.config.mu / disc.config.rho;
    let errs = match exact {
        Some(e) => Some(error_norms(disc, v, p, e, t)?),
        None => None,
    };
    Ok(BenchmarkRecord {
        t,
        e_kin: kinetic_energy(disc, v)?,
        enstrophy: enstrophy(disc, v)?,
        dissipation: dissipation(disc, v, nu)?,
        max_div: max_pointwise_divergence(disc, v)?,
        max_mass_residual: max_local_mass_residual(disc, v, t)?,
        err_v_l2: errs.map(|e| e.0),
        err_v_h1: errs.map(|e| e.1),
        err_p_l2: errs.map(|e| e.2),
    })
}
