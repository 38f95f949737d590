//! Discrete Helmholtz decompositions `w = v + grad psi`.
//!
//! All variants share the pressure-Poisson step
//! `alpha(psi, q) = b(w, q) - r(q; t)`; they differ in how `v` is recovered
//! from `w` and `psi`.

use nalgebra::{DMatrix, DVector};

use crate::basis::{eval_cell_into, eval_face_into, integrate_cell, integrate_face, CellValues, FaceValues};
use crate::error::{Error, Result};
use crate::field::DGField;
use crate::forms::{axis_component, Discretization, Space};
use crate::krylov::{cg_solve, BlockJacobi, FnOperator, Identity, LinearOptions, Preconditioner, SolveReport};
use crate::mesh::{FaceKind, Side};
use crate::rt::{reconstruct_helmholtz_flux, reconstruct_pressure_flux, rt_embed_to_dg};

/// How a penalty constant is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Penalty {
    /// Scaled by the time step, viscosity and local velocity magnitude.
    Default,
    /// The same value on every cell/face.
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProjectionVariant {
    DivDiv { tau_d: Penalty },
    DivDivConti { tau_d: Penalty, tau_c: Penalty },
    PressurePoissonRT { k: usize },
    HelmholtzRT { k: usize },
}

impl ProjectionVariant {
    pub fn div_div() -> Self {
        Self::DivDiv { tau_d: Penalty::Default }
    }

    pub fn div_div_conti() -> Self {
        Self::DivDivConti { tau_d: Penalty::Default, tau_c: Penalty::Default }
    }

    /// `RT^{p-2}` pressure-flux variant for velocity degree `p`.
    pub fn pressure_poisson_rt(p: usize) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidDegree(format!("pressure-Poisson RT needs p >= 2, got {p}")));
        }
        Ok(Self::PressurePoissonRT { k: p - 2 })
    }

    /// `RT^{p-1}` Helmholtz-flux variant for velocity degree `p`.
    pub fn helmholtz_rt(p: usize) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidDegree(format!("Helmholtz-flux RT needs p >= 2, got {p}")));
        }
        Ok(Self::HelmholtzRT { k: p - 1 })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::DivDiv { .. } => "div_div",
            Self::DivDivConti { .. } => "div_div_conti",
            Self::PressurePoissonRT { .. } => "pressure_poisson_rt",
            Self::HelmholtzRT { .. } => "helmholtz_rt",
        }
    }

    /// Checks penalties and the RT degree against velocity degree `p`.
    pub fn validate(&self, p: usize) -> Result<()> {
        let bad = |t: &Penalty| matches!(t, Penalty::Fixed(v) if !(*v >= 0.0));
        match self {
            Self::DivDiv { tau_d } if bad(tau_d) => Err(Error::InvalidParameter("tau_D must be nonnegative".into())),
            Self::DivDivConti { tau_d, tau_c } if bad(tau_d) || bad(tau_c) => {
                Err(Error::InvalidParameter("tau_D and tau_C must be nonnegative".into()))
            }
            Self::PressurePoissonRT { k } if p < 2 || *k + 2 < p || *k + 1 > p => Err(Error::InvalidDegree(format!(
                "pressure-Poisson RT degree must be p-2 or p-1, got {k} for p = {p}"
            ))),
            Self::HelmholtzRT { k } if p < 2 || *k != p - 1 => {
                Err(Error::InvalidDegree(format!("Helmholtz-flux RT degree must be p-1 = {}", p as i64 - 1)))
            }
            _ => Ok(()),
        }
    }
}

/// Data entering the default penalty scalings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PenaltyContext {
    pub dt: f64,
    /// Kinematic viscosity.
    pub nu: f64,
}

#[derive(Clone, Debug)]
pub struct HelmholtzResult {
    pub velocity: DGField,
    /// Mean-free potential.
    pub potential: DGField,
    pub poisson: SolveReport,
    /// Report of the global penalized solve (div-div-conti only).
    pub projection: Option<SolveReport>,
}

/// Reference element matrices used by the penalized projections, all
/// `2 nv x 2 nv` row-major in cell-local ordering.
#[derive(Clone, Debug)]
struct LocalMatrices {
    n: usize,
    mass: Vec<f64>,
    divdiv: Vec<f64>,
    /// Trace mass of the normal component on each side (W, E, S, N).
    normal_trace: [Vec<f64>; 4],
}

const SIDES: [Side; 4] = [Side::West, Side::East, Side::South, Side::North];

fn side_slot(side: Side) -> usize {
    match side {
        Side::West => 0,
        Side::East => 1,
        Side::South => 2,
        Side::North => 3,
    }
}

impl LocalMatrices {
    fn new(disc: &Discretization) -> Self {
        let tab = disc.velocity_table();
        let nv = tab.ncoeffs();
        let n = 2 * nv;
        let nq = tab.nq;
        let w = &tab.rule.weights;
        let mesh = &disc.mesh;
        let (hx, hy) = (mesh.hx(), mesh.hy());
        let jac = hx * hy;
        let mut mass = vec![0.0; n * n];
        let mut divdiv = vec![0.0; n * n];
        let mut normal_trace = [vec![0.0; n * n], vec![0.0; n * n], vec![0.0; n * n], vec![0.0; n * n]];
        let mut cv = CellValues::zeros(tab.npoints());
        let mut scratch = Vec::new();
        let mut unit = vec![0.0; nv];
        let mut val = vec![0.0; tab.npoints()];
        let mut gx = vec![0.0; tab.npoints()];
        let mut gy = vec![0.0; tab.npoints()];
        let mut col = vec![0.0; nv];
        let mut fv = FaceValues::zeros(nq);
        let mut fval = vec![0.0; nq];
        for comp in 0..2 {
            for j in 0..nv {
                unit.fill(0.0);
                unit[j] = 1.0;
                eval_cell_into(&unit, tab, &mut cv, &mut scratch);
                for qy in 0..nq {
                    for qx in 0..nq {
                        let q = qy * nq + qx;
                        let wq = w[qx] * w[qy] * jac;
                        val[q] = wq * cv.val[q];
                        let div = if comp == 0 { cv.d_xi[q] / hx } else { cv.d_eta[q] / hy };
                        gx[q] = wq * div / hx;
                        gy[q] = wq * div / hy;
                    }
                }
                let jj = comp * nv + j;
                col.fill(0.0);
                integrate_cell(tab, Some(&val), None, None, &mut col, &mut scratch);
                for i in 0..nv {
                    mass[(comp * nv + i) * n + jj] = col[i];
                }
                // div phi_i for both components of the test function
                col.fill(0.0);
                integrate_cell(tab, None, Some(&gx), None, &mut col, &mut scratch);
                for i in 0..nv {
                    divdiv[i * n + jj] = col[i];
                }
                col.fill(0.0);
                integrate_cell(tab, None, None, Some(&gy), &mut col, &mut scratch);
                for i in 0..nv {
                    divdiv[(nv + i) * n + jj] = col[i];
                }
                for side in SIDES {
                    if axis_component(side.axis()) != comp {
                        continue;
                    }
                    let measure = match side.axis() {
                        crate::mesh::Axis::X => hy,
                        crate::mesh::Axis::Y => hx,
                    };
                    eval_face_into(&unit, tab, side, &mut fv);
                    for q in 0..nq {
                        fval[q] = w[q] * measure * fv.val[q];
                    }
                    col.fill(0.0);
                    integrate_face(tab, side, &fval, None, &mut col);
                    let m = &mut normal_trace[side_slot(side)];
                    for i in 0..nv {
                        m[(comp * nv + i) * n + jj] = col[i];
                    }
                }
            }
        }
        Self { n, mass, divdiv, normal_trace }
    }
}

/// Projection driver holding reusable preconditioners and element matrices.
pub struct Projector<'a> {
    pub disc: &'a Discretization,
    pub variant: ProjectionVariant,
    /// Options of the pressure-Poisson solve.
    pub poisson: LinearOptions,
    /// Options of the global penalized solve (div-div-conti).
    pub penalized: LinearOptions,
    alpha_pc: Option<BlockJacobi>,
    local: Option<LocalMatrices>,
}

impl<'a> Projector<'a> {
    pub fn new(disc: &'a Discretization, variant: ProjectionVariant) -> Result<Self> {
        if disc.degree() < 2 {
            return Err(Error::InvalidDegree(
                "projections need velocity degree >= 2 (pressure Poisson is degenerate for constant pressure)".into(),
            ));
        }
        variant.validate(disc.degree())?;
        let np = disc.pressure_len();
        let op = FnOperator::new(np, |x: &[f64], y: &mut [f64]| disc.apply_alpha_raw(x, y));
        let alpha_pc = match BlockJacobi::probe(&op, &disc.mesh, disc.cell_block_len(Space::Pressure)) {
            Ok(pc) => Some(pc),
            Err(Error::SingularBlock { .. }) => None,
            Err(e) => return Err(e),
        };
        let local = match variant {
            ProjectionVariant::DivDiv { .. } | ProjectionVariant::DivDivConti { .. } => Some(LocalMatrices::new(disc)),
            _ => None,
        };
        Ok(Self {
            disc,
            variant,
            poisson: LinearOptions { tol: 1e-10, abs_tol: 1e-14, max_iter: 5000, restart: 50 },
            penalized: LinearOptions { tol: 1e-10, abs_tol: 1e-14, max_iter: 5000, restart: 50 },
            alpha_pc,
            local,
        })
    }

    pub fn with_poisson_options(mut self, opts: LinearOptions) -> Self {
        self.poisson = opts;
        self
    }

    /// Mean-free `psi` with `alpha(psi, q) = b(w, q) - r(q; t)` for all `q`.
    pub fn solve_pressure_poisson(&self, w: &DGField, t: f64) -> Result<(DGField, SolveReport)> {
        let disc = self.disc;
        let mut rhs = disc.apply_b(w)?;
        let r = disc.rhs_r(t);
        rhs.axpy(-1.0, &r);
        self.solve_alpha(&rhs)
    }

    /// Mean-free solution of `alpha(psi, q) = rhs(q)`; the right-hand side is
    /// made compatible by removing its component along the constants.
    pub fn solve_alpha(&self, rhs: &DGField) -> Result<(DGField, SolveReport)> {
        let disc = self.disc;
        let np = disc.pressure_len();
        let op = FnOperator::new(np, |x: &[f64], y: &mut [f64]| disc.apply_alpha_raw(x, y)).with_constant_nullspace();
        let mut psi = disc.pressure_zeros();
        let pc: &dyn Preconditioner = match &self.alpha_pc {
            Some(pc) => pc,
            None => &Identity,
        };
        let report = cg_solve(&op, &rhs.data, &mut psi.data, &self.poisson, pc)?;
        disc.remove_mean(&mut psi);
        Ok((psi, report))
    }

    /// Runs the selected decomposition on a tentative velocity.
    pub fn project(&self, w: &DGField, t: f64, ctx: PenaltyContext) -> Result<HelmholtzResult> {
        let (psi, poisson) = self.solve_pressure_poisson(w, t)?;
        let disc = self.disc;
        let p = disc.degree();
        let (velocity, projection) = match self.variant {
            ProjectionVariant::DivDiv { tau_d } => (self.divdiv(w, &psi, tau_d, ctx)?, None),
            ProjectionVariant::DivDivConti { tau_d, tau_c } => {
                let (v, rep) = self.divdiv_conti(w, &psi, tau_d, tau_c, ctx)?;
                (v, Some(rep))
            }
            ProjectionVariant::PressurePoissonRT { k } => {
                let g = reconstruct_pressure_flux(disc, &psi, k)?;
                let mut v = rt_embed_to_dg(&g, p)?;
                v.axpy(1.0, w);
                (v, None)
            }
            ProjectionVariant::HelmholtzRT { .. } => {
                let r = reconstruct_helmholtz_flux(disc, w, &psi, t)?;
                (rt_embed_to_dg(&r, p)?, None)
            }
        };
        Ok(HelmholtzResult { velocity, potential: psi, poisson, projection })
    }

    /// Per-cell grad-div penalty `tau_D`.
    pub fn tau_d(&self, w: &DGField, tau: Penalty, ctx: PenaltyContext) -> Vec<f64> {
        let mesh = &self.disc.mesh;
        match tau {
            Penalty::Fixed(v) => vec![v; mesh.num_cells()],
            Penalty::Default => {
                let h = mesh.cell_measure().sqrt();
                (0..mesh.num_cells())
                    .map(|c| ctx.dt * cell_max_speed(w, c) * h + ctx.dt * ctx.nu)
                    .collect()
            }
        }
    }

    /// Per-face continuity penalty `tau_C` (zero on boundary faces).
    pub fn tau_c(&self, w: &DGField, tau: Penalty, ctx: PenaltyContext) -> Vec<f64> {
        let mesh = &self.disc.mesh;
        mesh.faces()
            .iter()
            .map(|f| match (f.kind, tau) {
                (FaceKind::Dirichlet, _) => 0.0,
                (_, Penalty::Fixed(v)) => v,
                (_, Penalty::Default) => {
                    let speed = 0.5 * (cell_max_speed(w, f.left_cell) + cell_max_speed(w, f.right_cell.unwrap()));
                    ctx.dt * speed + ctx.dt * ctx.nu / mesh.face_h_e(f)
                }
            })
            .collect()
    }

    fn penalized_rhs(&self, w: &DGField, psi: &DGField) -> Vec<f64> {
        let disc = self.disc;
        let mut rhs = vec![0.0; disc.velocity_len()];
        disc.mass_apply_raw(Space::Velocity, &w.data, &mut rhs);
        let mut g = vec![0.0; rhs.len()];
        disc.apply_grad_raw(&psi.data, &mut g);
        crate::field::axpy(-1.0, &g, &mut rhs);
        rhs
    }

    fn divdiv(&self, w: &DGField, psi: &DGField, tau: Penalty, ctx: PenaltyContext) -> Result<DGField> {
        let loc = self.local.as_ref().expect("local matrices built for penalized variants");
        let taus = self.tau_d(w, tau, ctx);
        let rhs = self.penalized_rhs(w, psi);
        let n = loc.n;
        let mut v = w.zeros_like();
        for (cell, tau) in taus.iter().enumerate() {
            let a = DMatrix::from_fn(n, n, |i, j| loc.mass[i * n + j] + tau * loc.divdiv[i * n + j]);
            let b = DVector::from_column_slice(&rhs[cell * n..(cell + 1) * n]);
            let x = a.cholesky().ok_or(Error::SingularBlock { cell })?.solve(&b);
            v.cell_mut(cell).copy_from_slice(x.as_slice());
        }
        Ok(v)
    }

    fn divdiv_conti(
        &self,
        w: &DGField,
        psi: &DGField,
        tau_d: Penalty,
        tau_c: Penalty,
        ctx: PenaltyContext,
    ) -> Result<(DGField, SolveReport)> {
        let disc = self.disc;
        let loc = self.local.as_ref().expect("local matrices built for penalized variants");
        let td = self.tau_d(w, tau_d, ctx);
        let tc = self.tau_c(w, tau_c, ctx);
        let rhs = self.penalized_rhs(w, psi);
        let n = loc.n;
        let mesh = &disc.mesh;
        let mut blocks = Vec::with_capacity(mesh.num_cells());
        for (cell, tau) in td.iter().enumerate() {
            let mut b: Vec<f64> = loc.mass.iter().zip(&loc.divdiv).map(|(m, d)| m + tau * d).collect();
            for (slot, fid) in mesh.cell_faces(cell).into_iter().enumerate() {
                let t = tc[fid];
                if t != 0.0 {
                    crate::field::axpy(t, &loc.normal_trace[slot], &mut b);
                }
            }
            blocks.push(b);
        }
        let pc = BlockJacobi::from_blocks(n, &blocks)?;
        let op = FnOperator::new(disc.velocity_len(), |x: &[f64], y: &mut [f64]| {
            penalized_apply(disc, loc, &td, &tc, x, y)
        });
        let mut v = w.clone();
        let rep = cg_solve(&op, &rhs, &mut v.data, &self.penalized, &pc)?;
        Ok((v, rep))
    }

    /// Applies the div-div-conti system matrix (exposed for residual checks).
    pub fn penalized_operator(&self, w: &DGField, ctx: PenaltyContext) -> Option<impl Fn(&[f64], &mut [f64]) + '_> {
        let loc = self.local.as_ref()?;
        let (td, tc) = match self.variant {
            ProjectionVariant::DivDiv { tau_d } => (self.tau_d(w, tau_d, ctx), vec![0.0; self.disc.mesh.faces().len()]),
            ProjectionVariant::DivDivConti { tau_d, tau_c } => (self.tau_d(w, tau_d, ctx), self.tau_c(w, tau_c, ctx)),
            _ => return None,
        };
        let disc = self.disc;
        Some(move |x: &[f64], y: &mut [f64]| penalized_apply(disc, loc, &td, &tc, x, y))
    }

    /// Right-hand side `(w, phi) - (grad_h psi, phi)` of the penalized systems.
    pub fn penalized_rhs_for(&self, w: &DGField, psi: &DGField) -> Vec<f64> {
        self.penalized_rhs(w, psi)
    }
}

fn cell_max_speed(w: &DGField, cell: usize) -> f64 {
    let (bx, by) = (w.block(cell, 0), w.block(cell, 1));
    bx.iter().zip(by).fold(0.0f64, |m, (a, b)| m.max(a.hypot(*b)))
}

/// `y = (M + sum tau_D K_E) x + sum_int tau_C ([x].n, [phi].n)`
fn penalized_apply(disc: &Discretization, loc: &LocalMatrices, td: &[f64], tc: &[f64], x: &[f64], y: &mut [f64]) {
    let n = loc.n;
    let mesh = &disc.mesh;
    for (cell, tau) in td.iter().enumerate() {
        let xs = &x[cell * n..(cell + 1) * n];
        let ys = &mut y[cell * n..(cell + 1) * n];
        for i in 0..n {
            let (mut s, row) = (0.0, i * n);
            for j in 0..n {
                s += (loc.mass[row + j] + tau * loc.divdiv[row + j]) * xs[j];
            }
            ys[i] = s;
        }
    }
    let tab = disc.velocity_table();
    let (nq, nv) = (tab.nq, tab.ncoeffs());
    let w = &tab.rule.weights;
    let mut fl = FaceValues::zeros(nq);
    let mut fr = FaceValues::zeros(nq);
    let mut val = vec![0.0; nq];
    let mut neg = vec![0.0; nq];
    for (fid, face) in mesh.faces().iter().enumerate() {
        let t = tc[fid];
        if t == 0.0 || face.kind != FaceKind::Interior {
            continue;
        }
        let comp = axis_component(face.axis);
        let right = face.right_cell.unwrap();
        let rside = face.right_side.unwrap();
        let ol = (face.left_cell * 2 + comp) * nv;
        let or = (right * 2 + comp) * nv;
        eval_face_into(&x[ol..ol + nv], tab, face.left_side, &mut fl);
        eval_face_into(&x[or..or + nv], tab, rside, &mut fr);
        for q in 0..nq {
            val[q] = t * w[q] * face.measure * (fl.val[q] - fr.val[q]);
            neg[q] = -val[q];
        }
        integrate_face(tab, face.left_side, &val, None, &mut y[ol..ol + nv]);
        integrate_face(tab, rside, &neg, None, &mut y[or..or + nv]);
    }
}
