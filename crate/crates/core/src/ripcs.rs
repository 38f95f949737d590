//! Rotational incremental pressure-correction time stepping.
//!
//! One step: (1) viscous/convective substep with the pressure frozen at
//! `p^k`, integrated by a two-stage DIRK; (2) Helmholtz projection of the
//! tentative velocity; (3) rotational pressure update
//! `p^{k+1} = p^k + omega * delta_p - mu * B_h v_tilde`.

use crate::error::{Error, Result};
use crate::field::{axpy, DGField};
use crate::forms::{Discretization, Space};
use crate::krylov::{newton_krylov_solve, BlockJacobi, FnOperator, NewtonOptions, NonlinearSystem, SolveReport};
use crate::projection::{HelmholtzResult, PenaltyContext, ProjectionVariant, Projector};

/// Diagonally implicit Runge-Kutta tableau with two stages.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DIRKTableau {
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
    pub c: [f64; 2],
}

impl DIRKTableau {
    /// Alexander's second-order, strongly S-stable scheme.
    pub fn alexander2() -> Self {
        let g = 1.0 - std::f64::consts::SQRT_2 / 2.0;
        Self {
            a: [[g, 0.0], [1.0 - g, g]],
            b: [1.0 - g, g],
            c: [g, 1.0],
        }
    }

    /// Residuals of `sum b = 1`, `b . c = 1/2` and row-sum consistency.
    pub fn order_residuals(&self) -> [f64; 3] {
        let sb = self.b[0] + self.b[1] - 1.0;
        let bc = self.b[0] * self.c[0] + self.b[1] * self.c[1] - 0.5;
        let rows = (self.a[0][0] + self.a[0][1] - self.c[0]).abs() + (self.a[1][0] + self.a[1][1] - self.c[1]).abs();
        [sb, bc, rows]
    }

    pub fn is_stiffly_accurate(&self) -> bool {
        self.a[1] == self.b
    }
}

/// Velocity, mean-free pressure and time.
#[derive(Clone, Debug)]
pub struct SplittingState {
    pub velocity: DGField,
    pub pressure: DGField,
    pub t: f64,
}

impl SplittingState {
    pub fn zero(disc: &Discretization, t: f64) -> Self {
        Self { velocity: disc.velocity_zeros(), pressure: disc.pressure_zeros(), t }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct StepperConfig {
    /// Rotational weight on the pressure increment.
    pub omega: f64,
    /// Navier-Stokes (`true`) or Stokes mode.
    pub convection: bool,
    pub newton: NewtonOptions,
    pub tableau: DIRKTableau,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            omega: 1.5,
            convection: true,
            newton: NewtonOptions::default(),
            tableau: DIRKTableau::alexander2(),
        }
    }
}

/// Diagnostics of one step.
#[derive(Clone, Debug)]
pub struct StepReport {
    pub stages: Vec<SolveReport>,
    pub projection: HelmholtzResult,
    pub dt: f64,
}

/// Implicit stage `rho M V + coef R(V, t) = known`, with
/// `R(V, t) = a(V) + rho c(V; t) + b(., p*) - l(t)`.
struct StageSystem<'a> {
    disc: &'a Discretization,
    coef: f64,
    t: f64,
    convection: bool,
    /// `b(., p*) - l(t)`
    forcing: Vec<f64>,
    known: Vec<f64>,
}

impl StageSystem<'_> {
    fn momentum_residual(&self, v: &[f64], out: &mut [f64]) {
        // R(V) = a(V) + rho c(V) + forcing
        let disc = self.disc;
        disc.apply_a_raw(v, out);
        if self.convection {
            let mut c = vec![0.0; v.len()];
            disc.apply_c_raw(v, self.t, &mut c);
            axpy(disc.config.rho, &c, out);
        }
        axpy(1.0, &self.forcing, out);
    }
}

impl NonlinearSystem for StageSystem<'_> {
    fn len(&self) -> usize {
        self.known.len()
    }

    fn residual(&self, x: &[f64], r: &mut [f64]) {
        let disc = self.disc;
        let mut m = vec![0.0; x.len()];
        disc.mass_apply_raw(Space::Velocity, x, &mut m);
        self.momentum_residual(x, r);
        for i in 0..r.len() {
            r[i] = disc.config.rho * m[i] + self.coef * r[i] - self.known[i];
        }
    }

    fn jacobian_apply(&self, x: &[f64], fx: &[f64], dx: &[f64], out: &mut [f64]) {
        // exact linear part, finite-differenced convection
        let disc = self.disc;
        let rho = disc.config.rho;
        let mut m = vec![0.0; x.len()];
        disc.mass_apply_raw(Space::Velocity, dx, &mut m);
        disc.apply_a_raw(dx, out);
        for i in 0..out.len() {
            out[i] = rho * m[i] + self.coef * out[i];
        }
        if self.convection {
            let _ = fx;
            let dn = crate::field::norm2(dx);
            if dn == 0.0 {
                return;
            }
            let eps = f64::EPSILON.sqrt() * (1.0 + crate::field::norm2(x)) / dn;
            let xp: Vec<f64> = x.iter().zip(dx).map(|(a, b)| a + eps * b).collect();
            let mut c0 = vec![0.0; x.len()];
            let mut c1 = vec![0.0; x.len()];
            disc.apply_c_raw(x, self.t, &mut c0);
            disc.apply_c_raw(&xp, self.t, &mut c1);
            let s = self.coef * rho / eps;
            for i in 0..out.len() {
                out[i] += s * (c1[i] - c0[i]);
            }
        }
    }

    fn is_affine(&self) -> bool {
        !self.convection
    }
}

/// Pressure-correction stepper bound to a discretization.
pub struct Ripcs<'a> {
    pub disc: &'a Discretization,
    pub projector: Projector<'a>,
    pub config: StepperConfig,
    stage_pc: Option<(f64, BlockJacobi)>,
}

impl<'a> Ripcs<'a> {
    pub fn new(disc: &'a Discretization, variant: ProjectionVariant, config: StepperConfig) -> Result<Self> {
        let t = config.tableau;
        if t.a[0][1] != 0.0 || t.a[0][0] <= 0.0 || t.a[1][1] <= 0.0 {
            return Err(Error::InvalidParameter("tableau must be diagonally implicit with positive diagonal".into()));
        }
        Ok(Self { disc, projector: Projector::new(disc, variant)?, config, stage_pc: None })
    }

    /// Kinematic viscosity `mu / rho`.
    pub fn nu(&self) -> f64 {
        self.disc.config.mu / self.disc.config.rho
    }

    fn stage_preconditioner(&mut self, coef: f64) -> Result<&BlockJacobi> {
        let rebuild = !matches!(&self.stage_pc, Some((c, _)) if *c == coef);
        if rebuild {
            let disc = self.disc;
            let rho = disc.config.rho;
            let n = disc.velocity_len();
            let op = FnOperator::new(n, |x: &[f64], y: &mut [f64]| {
                let mut m = vec![0.0; n];
                disc.mass_apply_raw(Space::Velocity, x, &mut m);
                disc.apply_a_raw(x, y);
                for i in 0..n {
                    y[i] = rho * m[i] + coef * y[i];
                }
            });
            let pc = BlockJacobi::probe(&op, &disc.mesh, disc.cell_block_len(Space::Velocity))?;
            self.stage_pc = Some((coef, pc));
        }
        Ok(&self.stage_pc.as_ref().unwrap().1)
    }

    /// DIRK integration of the momentum equation with frozen pressure.
    pub fn viscous_substep(&mut self, state: &SplittingState, dt: f64) -> Result<(DGField, Vec<SolveReport>)> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        let disc = self.disc;
        let tab = self.config.tableau;
        let rho = disc.config.rho;
        let n = disc.velocity_len();
        let mut bt_p = vec![0.0; n];
        disc.apply_bt_raw(&state.pressure.data, &mut bt_p);
        let mut mv = vec![0.0; n];
        disc.mass_apply_raw(Space::Velocity, &state.velocity.data, &mut mv);
        mv.iter_mut().for_each(|x| *x *= rho);

        let mut stage_r: Vec<Vec<f64>> = Vec::with_capacity(2);
        let mut reports = Vec::with_capacity(2);
        let mut v = state.velocity.data.clone();
        for i in 0..2 {
            let ti = state.t + tab.c[i] * dt;
            let mut forcing = bt_p.clone();
            let mut l = vec![0.0; n];
            disc.rhs_l_raw(ti, &mut l);
            axpy(-1.0, &l, &mut forcing);
            let mut known = mv.clone();
            for (j, rj) in stage_r.iter().enumerate() {
                axpy(-dt * tab.a[i][j], rj, &mut known);
            }
            let sys = StageSystem {
                disc,
                coef: dt * tab.a[i][i],
                t: ti,
                convection: self.config.convection,
                forcing,
                known,
            };
            let newton = self.config.newton;
            let pc = self.stage_preconditioner(sys.coef)?;
            let rep = newton_krylov_solve(&sys, &mut v, &newton, pc)?;
            reports.push(rep);
            let mut r = vec![0.0; n];
            sys.momentum_residual(&v, &mut r);
            stage_r.push(r);
        }
        let v = if tab.is_stiffly_accurate() {
            v
        } else {
            // v^k + dt M^{-1} sum b_j (-R_j) / rho
            let mut acc = vec![0.0; n];
            for (j, rj) in stage_r.iter().enumerate() {
                axpy(-dt * tab.b[j] / rho, rj, &mut acc);
            }
            let mut inc = vec![0.0; n];
            disc.inverse_mass_raw(Space::Velocity, &acc, &mut inc);
            let mut out = state.velocity.data.clone();
            axpy(1.0, &inc, &mut out);
            out
        };
        Ok((DGField::from_data(disc.mesh.num_cells(), 2, disc.degree(), v)?, reports))
    }

    /// One full pressure-correction step of size `dt`.
    pub fn step(&mut self, state: &SplittingState, dt: f64) -> Result<(SplittingState, StepReport)> {
        let disc = self.disc;
        let (tentative, stages) = self.viscous_substep(state, dt)?;
        let t1 = state.t + dt;
        let ctx = PenaltyContext { dt, nu: self.nu() };
        let proj = self.projector.project(&tentative, t1, ctx)?;
        // p^{k+1} = p* + omega rho psi / dt - mu B_h v_tilde
        let mut pressure = state.pressure.clone();
        pressure.axpy(self.config.omega * disc.config.rho / dt, &proj.potential);
        let div = disc.discrete_divergence(&tentative, t1)?;
        pressure.axpy(-disc.config.mu, &div);
        disc.remove_mean(&mut pressure);
        let next = SplittingState { velocity: proj.velocity.clone(), pressure, t: t1 };
        Ok((next, StepReport { stages, projection: proj, dt }))
    }

    /// Consistent initial pressure from the momentum balance at `t`, ignoring
    /// the time derivative of the boundary data.
    pub fn initial_pressure(&self, velocity: &DGField, t: f64) -> Result<DGField> {
        let disc = self.disc;
        let n = disc.velocity_len();
        let mut rhs = vec![0.0; n];
        disc.rhs_l_raw(t, &mut rhs);
        let mut a = vec![0.0; n];
        disc.apply_a_raw(&velocity.data, &mut a);
        axpy(-1.0, &a, &mut rhs);
        if self.config.convection {
            disc.apply_c_raw(&velocity.data, t, &mut a);
            axpy(-disc.config.rho, &a, &mut rhs);
        }
        let mut z = disc.velocity_zeros();
        disc.inverse_mass_raw(Space::Velocity, &rhs, &mut z.data);
        let bz = disc.apply_b(&z)?;
        // grad p = z in the discrete sense: alpha(p, q) = b(z, q)
        Ok(self.projector.solve_alpha(&bz)?.0)
    }
}

/// Number and sizes of steps from `t0` to `t_end`, truncating the last one.
pub fn step_sizes(t0: f64, t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    if t_end < t0 {
        return Err(Error::InvalidParameter(format!("final time {t_end} precedes start {t0}")));
    }
    let span = t_end - t0;
    let n = (span / dt - 1e-10).ceil().max(0.0) as usize;
    let sizes = (0..n).map(|k| if k + 1 == n { span - k as f64 * dt } else { dt }).collect();
    Ok(sizes)
}

/// Advances `initial` to `t_end`, calling `on_step(state, report)` after each step.
/// On failure the error carries the step index and time; earlier callbacks have run.
pub fn run_simulation<F>(
    stepper: &mut Ripcs<'_>,
    initial: SplittingState,
    t_end: f64,
    dt: f64,
    mut on_step: F,
) -> Result<SplittingState>
where
    F: FnMut(&SplittingState, &StepReport) -> Result<()>,
{
    let mut state = initial;
    for (k, h) in step_sizes(state.t, t_end, dt)?.into_iter().enumerate() {
        let time = state.t;
        let (next, report) = stepper
            .step(&state, h)
            .map_err(|e| Error::Step { step: k + 1, time, source: Box::new(e) })?;
        state = next;
        on_step(&state, &report).map_err(|e| Error::Step { step: k + 1, time: state.t, source: Box::new(e) })?;
    }
    Ok(state)
}
