//! Run configuration in sectioned `key = value` text.
//!
//! ```text
//! [problem]
//! name = taylor_green_2d
//! [discretization]
//! degree = 4
//! nx = 16
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use dgflow_core::{Penalty, ProjectionVariant};

use crate::error::{BenchError, Result};
use crate::problems::{self, ProblemSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    TaylorGreen2D,
    PotentialFlow,
    PotentialFlowForced,
    Gresho,
    GreshoMoving,
    StationaryStokes,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 6] = [
        Self::TaylorGreen2D,
        Self::PotentialFlow,
        Self::PotentialFlowForced,
        Self::Gresho,
        Self::GreshoMoving,
        Self::StationaryStokes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::TaylorGreen2D => "taylor_green_2d",
            Self::PotentialFlow => "potential_flow",
            Self::PotentialFlowForced => "potential_flow_forced",
            Self::Gresho => "gresho",
            Self::GreshoMoving => "gresho_moving",
            Self::StationaryStokes => "stationary_stokes",
        }
    }

    /// Problem with its default viscosity.
    pub fn spec(self) -> ProblemSpec {
        match self {
            Self::TaylorGreen2D => problems::taylor_green_2d(),
            Self::PotentialFlow => problems::potential_flow(false, 1e-1),
            Self::PotentialFlowForced => problems::potential_flow(true, 1e-1),
            Self::Gresho => problems::gresho(false),
            Self::GreshoMoving => problems::gresho(true),
            Self::StationaryStokes => problems::stationary_stokes(1.0),
        }
    }

    /// Problem at viscosity `nu`. Taylor-Green's exact solution depends on
    /// `nu`, so it is rebuilt rather than patched.
    pub fn spec_with_nu(self, nu: f64) -> ProblemSpec {
        match self {
            Self::TaylorGreen2D => problems::taylor_green_2d_nu(nu),
            Self::PotentialFlow => problems::potential_flow(false, nu),
            Self::PotentialFlowForced => problems::potential_flow(true, nu),
            Self::StationaryStokes => problems::stationary_stokes(nu),
            Self::Gresho | Self::GreshoMoving => ProblemSpec { nu, ..self.spec() },
        }
    }
}

impl FromStr for ProblemKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown problem `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VariantKind {
    DivDiv,
    DivDivConti,
    PressurePoissonRT,
    HelmholtzRT,
}

impl VariantKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::DivDiv => "div_div",
            Self::DivDivConti => "div_div_conti",
            Self::PressurePoissonRT => "pressure_poisson_rt",
            Self::HelmholtzRT => "helmholtz_rt",
        }
    }
}

impl FromStr for VariantKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [Self::DivDiv, Self::DivDivConti, Self::PressurePoissonRT, Self::HelmholtzRT]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown projection variant `{s}`"))
    }
}

/// Scaling of kinetic energy and enstrophy in the output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnergyNormalization {
    /// Plain integrals.
    Raw,
    /// Divided by `rho |Omega|`.
    Volume,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub nu: Option<f64>,
    pub t_end: Option<f64>,
    pub degree: usize,
    pub nx: usize,
    pub ny: usize,
    pub dt: Option<f64>,
    /// Gauss points per direction for volume/face terms; default `p + 1`.
    pub quadrature_points: Option<usize>,
    /// Gauss points per direction for convection; default `p + 2`.
    pub convection_points: Option<usize>,
    pub variant: VariantKind,
    /// RT degree; defaults to `p - 2` (pressure Poisson) or `p - 1` (Helmholtz flux).
    pub rt_degree: Option<usize>,
    pub tau_d: Penalty,
    pub tau_c: Penalty,
    pub omega: f64,
    pub newton_tol: f64,
    pub linear_tol: f64,
    pub poisson_tol: f64,
    pub max_newton: usize,
    pub output: Option<PathBuf>,
    pub normalization: EnergyNormalization,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemKind::TaylorGreen2D,
            nu: None,
            t_end: None,
            degree: 2,
            nx: 8,
            ny: 8,
            dt: None,
            quadrature_points: None,
            convection_points: None,
            variant: VariantKind::HelmholtzRT,
            rt_degree: None,
            tau_d: Penalty::Default,
            tau_c: Penalty::Default,
            omega: 1.5,
            newton_tol: 1e-9,
            linear_tol: 1e-4,
            poisson_tol: 1e-10,
            max_newton: 20,
            output: None,
            normalization: EnergyNormalization::Raw,
        }
    }
}

const KEYS: &[(&str, &[&str])] = &[
    ("problem", &["name", "nu", "t_end"]),
    ("discretization", &["degree", "nx", "ny", "dt", "quadrature_points", "convection_points"]),
    ("projection", &["variant", "rt_degree", "tau_d", "tau_c"]),
    ("solver", &["omega", "newton_tol", "linear_tol", "poisson_tol", "max_newton"]),
    ("output", &["csv", "normalization"]),
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e: T::Err| BenchError::config(key, format!("cannot parse `{value}`: {e}")))
}

fn parse_penalty(key: &str, value: &str) -> Result<Penalty> {
    match value.trim() {
        "default" => Ok(Penalty::Default),
        v => Ok(Penalty::Fixed(parse(key, v)?)),
    }
}

fn penalty_str(p: Penalty) -> String {
    match p {
        Penalty::Default => "default".into(),
        Penalty::Fixed(v) => format!("{v:e}"),
    }
}

impl RunConfig {
    pub fn from_str_config(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| BenchError::ConfigSyntax(e.to_string()))?;
        let mut cfg = Self::default();
        for (section, props) in ini.iter() {
            let Some(section) = section else {
                if let Some((k, _)) = props.iter().next() {
                    return Err(BenchError::config(k, "key outside of any section"));
                }
                continue;
            };
            let known = KEYS
                .iter()
                .find(|(s, _)| *s == section)
                .ok_or_else(|| BenchError::config(format!("[{section}]"), "unknown section"))?
                .1;
            for (key, value) in props.iter() {
                let full = format!("{section}.{key}");
                if !known.contains(&key) {
                    return Err(BenchError::config(full, "unknown key"));
                }
                cfg.set(section, key, value).map_err(|e| match e {
                    BenchError::Config { message, .. } => BenchError::config(full.clone(), message),
                    e => e,
                })?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io { path: path.into(), source })?;
        Self::from_str_config(&text)
    }

    fn set(&mut self, section: &str, key: &str, v: &str) -> Result<()> {
        match (section, key) {
            ("problem", "name") => self.problem = parse(key, v)?,
            ("problem", "nu") => self.nu = Some(parse(key, v)?),
            ("problem", "t_end") => self.t_end = Some(parse(key, v)?),
            ("discretization", "degree") => self.degree = parse(key, v)?,
            ("discretization", "nx") => self.nx = parse(key, v)?,
            ("discretization", "ny") => self.ny = parse(key, v)?,
            ("discretization", "dt") => self.dt = Some(parse(key, v)?),
            ("discretization", "quadrature_points") => self.quadrature_points = Some(parse(key, v)?),
            ("discretization", "convection_points") => self.convection_points = Some(parse(key, v)?),
            ("projection", "variant") => self.variant = parse(key, v)?,
            ("projection", "rt_degree") => self.rt_degree = Some(parse(key, v)?),
            ("projection", "tau_d") => self.tau_d = parse_penalty(key, v)?,
            ("projection", "tau_c") => self.tau_c = parse_penalty(key, v)?,
            ("solver", "omega") => self.omega = parse(key, v)?,
            ("solver", "newton_tol") => self.newton_tol = parse(key, v)?,
            ("solver", "linear_tol") => self.linear_tol = parse(key, v)?,
            ("solver", "poisson_tol") => self.poisson_tol = parse(key, v)?,
            ("solver", "max_newton") => self.max_newton = parse(key, v)?,
            ("output", "csv") => self.output = Some(PathBuf::from(v.trim())),
            ("output", "normalization") => {
                self.normalization = match v.trim() {
                    "raw" => EnergyNormalization::Raw,
                    "volume" => EnergyNormalization::Volume,
                    other => return Err(BenchError::config(key, format!("expected raw or volume, got `{other}`"))),
                }
            }
            _ => return Err(BenchError::config(key, "unknown key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(BenchError::config("discretization.nx", "cell counts must be positive"));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(BenchError::config("discretization.dt", "time step must be positive"));
            }
        }
        if self.quadrature_points == Some(0) || self.convection_points == Some(0) {
            return Err(BenchError::config("discretization.quadrature_points", "need at least one point"));
        }
        if self.degree < 2 {
            return Err(BenchError::config("discretization.degree", "velocity degree must be at least 2"));
        }
        self.projection_variant()
            .and_then(|v| v.validate(self.degree))
            .map_err(|e| BenchError::config("projection.variant", e.to_string()))?;
        Ok(())
    }

    pub fn projection_variant(&self) -> dgflow_core::Result<ProjectionVariant> {
        let p = self.degree;
        Ok(match self.variant {
            VariantKind::DivDiv => ProjectionVariant::DivDiv { tau_d: self.tau_d },
            VariantKind::DivDivConti => ProjectionVariant::DivDivConti { tau_d: self.tau_d, tau_c: self.tau_c },
            VariantKind::PressurePoissonRT => match self.rt_degree {
                Some(k) => ProjectionVariant::PressurePoissonRT { k },
                None => ProjectionVariant::pressure_poisson_rt(p)?,
            },
            VariantKind::HelmholtzRT => match self.rt_degree {
                Some(k) => ProjectionVariant::HelmholtzRT { k },
                None => ProjectionVariant::helmholtz_rt(p)?,
            },
        })
    }

    /// Problem with overrides applied.
    pub fn problem_spec(&self) -> ProblemSpec {
        let mut spec = match self.nu {
            Some(nu) => self.problem.spec_with_nu(nu),
            None => self.problem.spec(),
        };
        if let Some(t) = self.t_end {
            spec.t_end = t;
        }
        spec
    }

    /// Serializes to the text format; `from_str_config` inverts it.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[problem]\nname = {}", self.problem.name());
        if let Some(nu) = self.nu {
            let _ = writeln!(s, "nu = {nu:e}");
        }
        if let Some(t) = self.t_end {
            let _ = writeln!(s, "t_end = {t:e}");
        }
        let _ = writeln!(s, "\n[discretization]\ndegree = {}\nnx = {}\nny = {}", self.degree, self.nx, self.ny);
        if let Some(dt) = self.dt {
            let _ = writeln!(s, "dt = {dt:e}");
        }
        if let Some(n) = self.quadrature_points {
            let _ = writeln!(s, "quadrature_points = {n}");
        }
        if let Some(n) = self.convection_points {
            let _ = writeln!(s, "convection_points = {n}");
        }
        let _ = writeln!(s, "\n[projection]\nvariant = {}", self.variant.name());
        if let Some(k) = self.rt_degree {
            let _ = writeln!(s, "rt_degree = {k}");
        }
        let _ = writeln!(s, "tau_d = {}\ntau_c = {}", penalty_str(self.tau_d), penalty_str(self.tau_c));
        let _ = writeln!(
            s,
            "\n[solver]\nomega = {:e}\nnewton_tol = {:e}\nlinear_tol = {:e}\npoisson_tol = {:e}\nmax_newton = {}",
            self.omega, self.newton_tol, self.linear_tol, self.poisson_tol, self.max_newton
        );
        let _ = writeln!(s, "\n[output]");
        if let Some(p) = &self.output {
            let _ = writeln!(s, "csv = {}", p.display());
        }
        let norm = match self.normalization {
            EnergyNormalization::Raw => "raw",
            EnergyNormalization::Volume => "volume",
        };
        let _ = writeln!(s, "normalization = {norm}");
        s
    }
}
