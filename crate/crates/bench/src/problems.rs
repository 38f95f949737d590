//! Analytic benchmark problems.

use std::f64::consts::PI;
use std::sync::Arc;

use dgflow_core::{ExactSolution, VectorFn};

pub type ScalarFn = Arc<dyn Fn([f64; 2], f64) -> f64 + Send + Sync>;

/// Everything needed to set up a run, independent of the discretization.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: &'static str,
    /// `[x_min, x_max, y_min, y_max]`
    pub bounds: [f64; 4],
    pub periodic: [bool; 2],
    pub nu: f64,
    pub rho: f64,
    pub initial_velocity: VectorFn,
    /// Analytic initial pressure; a Poisson solve is used when absent.
    pub initial_pressure: Option<ScalarFn>,
    pub exact: Option<Arc<dyn ExactSolution + Send + Sync>>,
    pub dirichlet: Option<VectorFn>,
    pub force: Option<VectorFn>,
    pub t_end: f64,
    pub default_dt: f64,
    pub convection: bool,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("bounds", &self.bounds)
            .field("periodic", &self.periodic)
            .field("nu", &self.nu)
            .field("t_end", &self.t_end)
            .field("convection", &self.convection)
            .finish_non_exhaustive()
    }
}

fn from_exact(e: Arc<dyn ExactSolution + Send + Sync>) -> (VectorFn, ScalarFn, VectorFn) {
    let (a, b, c) = (e.clone(), e.clone(), e);
    (
        Arc::new(move |x, t| a.velocity(x, t)),
        Arc::new(move |x, t| b.pressure(x, t)),
        Arc::new(move |x, t| c.velocity(x, t)),
    )
}

/// Harmonic potential `chi = 5x^4 y + y^5 - 10 x^2 y^3` and its gradient/Hessian.
pub mod potential {
    pub fn chi(x: [f64; 2]) -> f64 {
        let [x, y] = x;
        5.0 * x.powi(4) * y + y.powi(5) - 10.0 * x * x * y.powi(3)
    }

    pub fn grad_chi(x: [f64; 2]) -> [f64; 2] {
        let [x, y] = x;
        [
            20.0 * x.powi(3) * y - 20.0 * x * y.powi(3),
            5.0 * x.powi(4) + 5.0 * y.powi(4) - 30.0 * x * x * y * y,
        ]
    }

    pub fn hessian_chi(x: [f64; 2]) -> [[f64; 2]; 2] {
        let [x, y] = x;
        let xx = 60.0 * x * x * y - 20.0 * y.powi(3);
        let xy = 20.0 * x.powi(3) - 60.0 * x * y * y;
        [[xx, xy], [xy, -xx]]
    }

    /// `psi = exp(-10 (1 - x + 2y))`
    pub fn psi(x: [f64; 2]) -> f64 {
        (-10.0 * (1.0 - x[0] + 2.0 * x[1])).exp()
    }

    pub fn grad_psi(x: [f64; 2]) -> [f64; 2] {
        let e = psi(x);
        [10.0 * e, -20.0 * e]
    }
}

struct PotentialFlow {
    forced: bool,
}

impl ExactSolution for PotentialFlow {
    fn velocity(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        potential::grad_chi(x).map(|g| t * g)
    }
    fn velocity_gradient(&self, x: [f64; 2], t: f64) -> [[f64; 2]; 2] {
        potential::hessian_chi(x).map(|r| r.map(|h| t * h))
    }
    fn pressure(&self, x: [f64; 2], _: f64) -> f64 {
        let p = -potential::chi(x);
        if self.forced {
            p + potential::psi(x)
        } else {
            p
        }
    }
}

/// Stokes flow `v = t grad chi`, `p = -chi (+ psi)` on the unit square with
/// Dirichlet data everywhere; the forced variant adds `f = grad psi`.
pub fn potential_flow(forced: bool, nu: f64) -> ProblemSpec {
    let exact: Arc<dyn ExactSolution + Send + Sync> = Arc::new(PotentialFlow { forced });
    let (v0, p0, g) = from_exact(exact.clone());
    let force: Option<VectorFn> = forced.then(|| Arc::new(|x, _| potential::grad_psi(x)) as VectorFn);
    ProblemSpec {
        name: if forced { "potential_flow_forced" } else { "potential_flow" },
        bounds: [0.0, 1.0, 0.0, 1.0],
        periodic: [false, false],
        nu,
        rho: 1.0,
        initial_velocity: v0,
        initial_pressure: Some(p0),
        exact: Some(exact),
        dirichlet: Some(g),
        force,
        t_end: 1.0,
        default_dt: 5e-3,
        convection: false,
    }
}

/// Vortex centred at `(0.5, 0.5)`, without the wind.
pub fn gresho_profile(x: [f64; 2]) -> [f64; 2] {
    let xt = [x[0] - 0.5, x[1] - 0.5];
    let r = xt[0].hypot(xt[1]);
    if r < 0.2 {
        [-5.0 * xt[1], 5.0 * xt[0]]
    } else if r < 0.4 {
        [-2.0 * xt[1] / r + 5.0 * xt[1], 2.0 * xt[0] / r - 5.0 * xt[0]]
    } else {
        [0.0, 0.0]
    }
}

/// Periodic unit square, `nu = 1e-5`, wind `(1/3, 1/3)` when moving.
pub fn gresho(moving: bool) -> ProblemSpec {
    let w0 = if moving { 1.0 / 3.0 } else { 0.0 };
    ProblemSpec {
        name: if moving { "gresho_moving" } else { "gresho" },
        bounds: [0.0, 1.0, 0.0, 1.0],
        periodic: [true, true],
        nu: 1e-5,
        rho: 1.0,
        initial_velocity: Arc::new(move |x, _| {
            let v = gresho_profile(x);
            [v[0] + w0, v[1] + w0]
        }),
        initial_pressure: None,
        exact: None,
        dirichlet: None,
        force: None,
        t_end: 3.0,
        default_dt: 2e-3,
        convection: true,
    }
}

/// Decaying vortex on `(-1, 1)^2`.
pub struct TaylorGreen2D {
    pub nu: f64,
}

impl ExactSolution for TaylorGreen2D {
    fn velocity(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let e = (-2.0 * PI * PI * self.nu * t).exp();
        let (sx, cx) = (PI * x[0]).sin_cos();
        let (sy, cy) = (PI * x[1]).sin_cos();
        [-cx * sy * e, sx * cy * e]
    }
    fn velocity_gradient(&self, x: [f64; 2], t: f64) -> [[f64; 2]; 2] {
        let e = PI * (-2.0 * PI * PI * self.nu * t).exp();
        let (sx, cx) = (PI * x[0]).sin_cos();
        let (sy, cy) = (PI * x[1]).sin_cos();
        [[sx * sy * e, -cx * cy * e], [cx * cy * e, -sx * sy * e]]
    }
    fn pressure(&self, x: [f64; 2], t: f64) -> f64 {
        let e = (-4.0 * PI * PI * self.nu * t).exp();
        -0.25 * ((2.0 * PI * x[0]).cos() + (2.0 * PI * x[1]).cos()) * e
    }
}

/// `nu = 1/100`, Dirichlet data from the exact trace.
pub fn taylor_green_2d() -> ProblemSpec {
    taylor_green_2d_nu(0.01)
}

pub fn taylor_green_2d_nu(nu: f64) -> ProblemSpec {
    let exact: Arc<dyn ExactSolution + Send + Sync> = Arc::new(TaylorGreen2D { nu });
    let (v0, p0, g) = from_exact(exact.clone());
    ProblemSpec {
        name: "taylor_green_2d",
        bounds: [-1.0, 1.0, -1.0, 1.0],
        periodic: [false, false],
        nu,
        rho: 1.0,
        initial_velocity: v0,
        initial_pressure: Some(p0),
        exact: Some(exact),
        dirichlet: Some(g),
        force: None,
        t_end: 1.0,
        default_dt: 1e-2,
        convection: true,
    }
}

struct StationaryStokes;

impl ExactSolution for StationaryStokes {
    fn velocity(&self, x: [f64; 2], _: f64) -> [f64; 2] {
        [x[0] * x[0], -2.0 * x[0] * x[1]]
    }
    fn velocity_gradient(&self, x: [f64; 2], _: f64) -> [[f64; 2]; 2] {
        [[2.0 * x[0], 0.0], [-2.0 * x[1], -2.0 * x[0]]]
    }
    fn pressure(&self, x: [f64; 2], _: f64) -> f64 {
        x[0] + x[1] - 1.0
    }
}

/// Steady Stokes flow `v = (x^2, -2xy)`, `p = x + y - 1`, `f = (1 - 2 nu, 1)`.
pub fn stationary_stokes(nu: f64) -> ProblemSpec {
    let exact: Arc<dyn ExactSolution + Send + Sync> = Arc::new(StationaryStokes);
    let (v0, p0, g) = from_exact(exact.clone());
    ProblemSpec {
        name: "stationary_stokes",
        bounds: [0.0, 1.0, 0.0, 1.0],
        periodic: [false, false],
        nu,
        rho: 1.0,
        initial_velocity: v0,
        initial_pressure: Some(p0),
        exact: Some(exact),
        dirichlet: Some(g),
        force: Some(Arc::new(move |_, _| [1.0 - 2.0 * nu, 1.0])),
        t_end: 1.0,
        default_dt: 1e-2,
        convection: false,
    }
}
