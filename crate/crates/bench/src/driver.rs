//! Single runs, convergence studies and viscosity sweeps.

use std::sync::Arc;

use dgflow_core::diagnostics::{self, cumulative_norm};
use dgflow_core::krylov::NewtonOptions;
use dgflow_core::{
    run_simulation, BenchmarkRecord, DGField, Discretization, FormConfig, PenaltyContext, ProjectionVariant,
    Projector, Ripcs, SplittingState, StepperConfig, StructuredMesh2D,
};

use crate::config::RunConfig;
use crate::error::Result;
use crate::problems::ProblemSpec;

/// Mesh and forms for `spec` with the degree, grid and quadrature of `cfg`.
pub fn build_discretization(spec: &ProblemSpec, cfg: &RunConfig) -> Result<Discretization> {
    let p = cfg.degree;
    let mesh = Arc::new(StructuredMesh2D::new(cfg.nx, cfg.ny, spec.bounds, spec.periodic)?);
    let forms = FormConfig {
        mu: spec.nu * spec.rho,
        rho: spec.rho,
        dirichlet: spec.dirichlet.clone(),
        force: spec.force.clone(),
        ..FormConfig::default()
    };
    let n_std = cfg.quadrature_points.unwrap_or(p + 1);
    let n_conv = cfg.convection_points.unwrap_or(p + 2);
    Ok(Discretization::with_quadrature(mesh, p, forms, n_std, n_conv)?)
}

pub fn stepper_config(cfg: &RunConfig, spec: &ProblemSpec) -> StepperConfig {
    let mut newton = NewtonOptions { tol: cfg.newton_tol, max_newton: cfg.max_newton, ..NewtonOptions::default() };
    newton.linear.tol = cfg.linear_tol;
    StepperConfig { omega: cfg.omega, convection: spec.convection, newton, ..StepperConfig::default() }
}

pub fn build_stepper<'a>(
    disc: &'a Discretization,
    variant: ProjectionVariant,
    cfg: &RunConfig,
    spec: &ProblemSpec,
) -> Result<Ripcs<'a>> {
    let mut stepper = Ripcs::new(disc, variant, stepper_config(cfg, spec))?;
    stepper.projector.poisson.tol = cfg.poisson_tol;
    stepper.projector.penalized.tol = cfg.poisson_tol;
    Ok(stepper)
}

/// Interpolated initial velocity and analytic or Poisson-consistent pressure at `t = 0`.
pub fn initial_state(stepper: &Ripcs<'_>, spec: &ProblemSpec) -> Result<SplittingState> {
    let disc = stepper.disc;
    let v0 = &spec.initial_velocity;
    let velocity = disc.interpolate_velocity(|x, y| v0([x, y], 0.0));
    let mut pressure = match &spec.initial_pressure {
        Some(p0) => disc.interpolate_pressure(|x, y| p0([x, y], 0.0)),
        None => stepper.initial_pressure(&velocity, 0.0)?,
    };
    disc.remove_mean(&mut pressure);
    Ok(SplittingState { velocity, pressure, t: 0.0 })
}

pub fn record_state(disc: &Discretization, spec: &ProblemSpec, state: &SplittingState) -> Result<BenchmarkRecord> {
    let exact = spec.exact.as_deref().map(|e| e as &dyn dgflow_core::ExactSolution);
    Ok(diagnostics::record(disc, &state.velocity, &state.pressure, state.t, exact)?)
}

/// Result of one time integration.
#[derive(Clone, Debug)]
pub struct RunOutput {
    /// Diagnostics of the initial state.
    pub initial: BenchmarkRecord,
    /// One record per step.
    pub records: Vec<BenchmarkRecord>,
    pub velocity: DGField,
    pub pressure: DGField,
}

impl RunOutput {
    /// `L2(0, T; L2)` velocity error including the initial state.
    pub fn cumulative_velocity_error(&self) -> Option<f64> {
        let samples: Option<Vec<(f64, f64)>> =
            std::iter::once(&self.initial).chain(&self.records).map(|r| r.err_v_l2.map(|e| (r.t, e))).collect();
        cumulative_norm(&samples?).ok()
    }

    pub fn last(&self) -> &BenchmarkRecord {
        self.records.last().unwrap_or(&self.initial)
    }
}

/// Runs `spec` with the discretization settings of `cfg`; `on_record` sees every step.
pub fn run_spec(
    spec: &ProblemSpec,
    cfg: &RunConfig,
    mut on_record: impl FnMut(&BenchmarkRecord),
) -> Result<RunOutput> {
    let disc = build_discretization(spec, cfg)?;
    let mut stepper = build_stepper(&disc, cfg.projection_variant()?, cfg, spec)?;
    let state = initial_state(&stepper, spec)?;
    let initial = record_state(&disc, spec, &state)?;
    let mut records = Vec::new();
    let dt = cfg.dt.unwrap_or(spec.default_dt);
    let last = run_simulation(&mut stepper, state, spec.t_end, dt, |s, _| {
        let r = record_state(&disc, spec, s).map_err(|e| match e {
            crate::error::BenchError::Solver(e) => e,
            other => dgflow_core::Error::InvalidParameter(other.to_string()),
        })?;
        on_record(&r);
        records.push(r);
        Ok(())
    })?;
    Ok(RunOutput { initial, records, velocity: last.velocity, pressure: last.pressure })
}

pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    run_spec(&cfg.problem_spec(), cfg, |_| {})
}

/// Final-time errors of one refinement level and rates against the previous one.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub level: u32,
    pub cells: usize,
    pub h: f64,
    pub err_v_l2: f64,
    pub err_v_h1: f64,
    pub err_p_l2: f64,
    pub rate_v_l2: Option<f64>,
    pub rate_v_h1: Option<f64>,
    pub rate_p_l2: Option<f64>,
}

/// Observed order `log2(e_coarse / e_fine)` for halved mesh size.
pub fn observed_rate(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// Runs level `l` on a `2^(l+2)` square grid for every `l` in `levels`.
pub fn convergence(cfg: &RunConfig, levels: std::ops::RangeInclusive<u32>) -> Result<Vec<ConvergenceRow>> {
    let spec = cfg.problem_spec();
    if spec.exact.is_none() {
        return Err(crate::error::BenchError::config("problem.name", "convergence study needs an exact solution"));
    }
    let runs: Vec<(u32, Result<RunOutput>)> = std::thread::scope(|s| {
        let handles: Vec<_> = levels
            .map(|l| {
                let spec = &spec;
                let mut c = cfg.clone();
                c.nx = 1 << (l + 2);
                c.ny = c.nx;
                (l, s.spawn(move || run_spec(spec, &c, |_| {})))
            })
            .collect();
        handles.into_iter().map(|(l, h)| (l, h.join().expect("convergence worker panicked"))).collect()
    });
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for (level, out) in runs {
        let out = out?;
        let r = out.last();
        let cells = 1usize << (level + 2);
        let (ev, eh, ep) = (r.err_v_l2.unwrap_or(f64::NAN), r.err_v_h1.unwrap_or(f64::NAN), r.err_p_l2.unwrap_or(f64::NAN));
        let prev = rows.last();
        rows.push(ConvergenceRow {
            level,
            cells,
            h: (spec.bounds[1] - spec.bounds[0]) / cells as f64,
            err_v_l2: ev,
            err_v_h1: eh,
            err_p_l2: ep,
            rate_v_l2: prev.map(|p| observed_rate(p.err_v_l2, ev)),
            rate_v_h1: prev.map(|p| observed_rate(p.err_v_h1, eh)),
            rate_p_l2: prev.map(|p| observed_rate(p.err_p_l2, ep)),
        });
    }
    Ok(rows)
}

/// Cumulative errors of one viscosity in a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct RobustnessRow {
    pub nu: f64,
    pub cumulative_v_l2: f64,
    pub final_v_l2: f64,
    pub final_p_l2: f64,
}

pub fn robustness(cfg: &RunConfig, nus: &[f64]) -> Result<Vec<RobustnessRow>> {
    let outs: Vec<Result<RunOutput>> = std::thread::scope(|s| {
        let handles: Vec<_> = nus
            .iter()
            .map(|&nu| {
                let mut c = cfg.clone();
                c.nu = Some(nu);
                s.spawn(move || run(&c))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("robustness worker panicked")).collect()
    });
    nus.iter()
        .zip(outs)
        .map(|(&nu, out)| {
            let out = out?;
            let cum = out.cumulative_velocity_error().ok_or_else(|| {
                crate::error::BenchError::config("problem.name", "robustness sweep needs an exact solution")
            })?;
            let r = out.last();
            Ok(RobustnessRow {
                nu,
                cumulative_v_l2: cum,
                final_v_l2: r.err_v_l2.unwrap_or(f64::NAN),
                final_p_l2: r.err_p_l2.unwrap_or(f64::NAN),
            })
        })
        .collect()
}

/// Properties of one projection applied to a synthetic tentative velocity.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionReport {
    pub norm_w: f64,
    pub max_pointwise_div: f64,
    /// `max_q |b(v, q) - r(q)|` over pressure basis functions.
    pub max_continuity_residual: f64,
    pub max_mass_residual: f64,
    /// `||P(Pw) - Pw||`
    pub idempotency_defect: f64,
}

/// Projects `w = v_0 + grad phi` with `phi = sin(2 pi x) cos(2 pi y)`-like
/// perturbation of the problem's initial velocity.
pub fn project_test(cfg: &RunConfig) -> Result<ProjectionReport> {
    let spec = cfg.problem_spec();
    let disc = build_discretization(&spec, cfg)?;
    let projector = Projector::new(&disc, cfg.projection_variant()?)?;
    let [x0, x1, y0, y1] = spec.bounds;
    let (kx, ky) = (2.0 * std::f64::consts::PI / (x1 - x0), 2.0 * std::f64::consts::PI / (y1 - y0));
    let v0 = &spec.initial_velocity;
    let w = disc.interpolate_velocity(|x, y| {
        let v = v0([x, y], 0.0);
        let (sx, cx) = (kx * (x - x0)).sin_cos();
        let (sy, cy) = (ky * (y - y0)).sin_cos();
        [v[0] + kx * cx * cy, v[1] - ky * sx * sy]
    });
    let t = 0.0;
    let ctx = PenaltyContext { dt: cfg.dt.unwrap_or(spec.default_dt), nu: spec.nu };
    let v = projector.project(&w, t, ctx)?.velocity;
    let vv = projector.project(&v, t, ctx)?.velocity;
    let mut d = vv.clone();
    d.axpy(-1.0, &v);
    let bv = disc.apply_b(&v)?;
    let r = disc.rhs_r(t);
    let cont = bv.data.iter().zip(&r.data).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    Ok(ProjectionReport {
        norm_w: diagnostics::velocity_l2_norm(&disc, &w)?,
        max_pointwise_div: diagnostics::max_pointwise_divergence(&disc, &v)?,
        max_continuity_residual: cont,
        max_mass_residual: diagnostics::max_local_mass_residual(&disc, &v, t)?,
        idempotency_defect: diagnostics::velocity_l2_norm(&disc, &d)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ProblemKind, VariantKind};

    #[test]
    fn rate_of_halved_error() {
        assert!((observed_rate(8.0, 1.0) - 3.0).abs() < 1e-15);
        assert!((observed_rate(1e-3, 2.5e-4) - 2.0).abs() < 1e-12);
        assert!(observed_rate(1.0, 1.0).abs() < 1e-15);
    }

    fn stokes_cfg(variant: VariantKind) -> RunConfig {
        RunConfig {
            problem: ProblemKind::StationaryStokes,
            t_end: Some(0.05),
            degree: 2,
            nx: 3,
            ny: 3,
            dt: Some(0.01),
            variant,
            ..RunConfig::default()
        }
    }

    #[test]
    fn run_records_every_step_and_keeps_the_steady_state() {
        let out = run(&stokes_cfg(VariantKind::HelmholtzRT)).unwrap();
        assert_eq!(out.records.len(), 5);
        assert_eq!(out.initial.t, 0.0);
        assert!((out.last().t - 0.05).abs() < 1e-14);
        assert!(out.last().err_v_l2.unwrap() < 1e-10);
        let cum = out.cumulative_velocity_error().unwrap();
        assert!(cum < 1e-10);
    }

    #[test]
    fn project_test_on_steady_problem() {
        let r = project_test(&stokes_cfg(VariantKind::HelmholtzRT)).unwrap();
        assert!(r.norm_w > 0.0);
        assert!(r.max_pointwise_div < 1e-9 * r.norm_w);
        assert!(r.max_continuity_residual < 1e-9);
        assert!(r.idempotency_defect < 1e-10 * r.norm_w);
    }

    #[test]
    fn sweeps_need_exact_solutions() {
        let cfg = RunConfig { problem: ProblemKind::Gresho, ..stokes_cfg(VariantKind::DivDiv) };
        assert!(convergence(&cfg, 0..=1).is_err());
    }

    #[test]
    fn convergence_rows_carry_rates_from_the_second_level_on() {
        let rows = convergence(&stokes_cfg(VariantKind::DivDiv), 0..=1).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].cells, 4);
        assert!(rows[0].rate_v_l2.is_none() && rows[1].rate_v_l2.is_some());
    }
}
