use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dgflow_bench::output::{convergence_to_csv, emit_csv, renormalize, robustness_to_csv, write_text};
use dgflow_bench::{driver, EnergyNormalization, Result, RunConfig, VariantKind};

#[derive(Parser)]
#[command(name = "dgflow", version, about = "DG incompressible-flow benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time-integrate one configuration and write per-step diagnostics.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `[output] csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mesh refinement study on 2^(l+2) cells per direction.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        /// Inclusive range such as `2..4`.
        #[arg(long, default_value = "1..3", value_parser = parse_levels)]
        levels: (u32, u32),
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cumulative velocity errors over a list of viscosities.
    Robustness {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1e-1,1e-3,1e-5")]
        nu: Vec<f64>,
        /// Overrides `[projection] variant`.
        #[arg(long)]
        variant: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Applies the configured projection once and reports its invariants.
    ProjectTest {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_levels(s: &str) -> std::result::Result<(u32, u32), String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected `lo..hi`, got `{s}`"))?;
    let lo: u32 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: u32 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if lo > hi {
        return Err(format!("empty level range {s}"));
    }
    Ok((lo, hi))
}

fn emit(text: &str, out: Option<PathBuf>) -> Result<()> {
    match out {
        Some(p) => write_text(&p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = RunConfig::from_path(&config)?;
            let spec = cfg.problem_spec();
            let mut output = driver::run_spec(&spec, &cfg, |r| {
                eprintln!("t = {:.6}  E = {:.8e}  err_v = {:?}", r.t, r.e_kin, r.err_v_l2);
            })?;
            if cfg.normalization == EnergyNormalization::Volume {
                let [x0, x1, y0, y1] = spec.bounds;
                renormalize(&mut output.records, spec.rho * (x1 - x0) * (y1 - y0));
            }
            match out.or(cfg.output.clone()) {
                Some(p) => emit_csv(&output.records, &p),
                None => emit(&dgflow_bench::output::records_to_csv(&output.records), None),
            }
        }
        Command::Convergence { config, levels, out } => {
            let cfg = RunConfig::from_path(&config)?;
            let rows = driver::convergence(&cfg, levels.0..=levels.1)?;
            emit(&convergence_to_csv(&rows), out)
        }
        Command::Robustness { config, nu, variant, out } => {
            let mut cfg = RunConfig::from_path(&config)?;
            if let Some(v) = variant {
                cfg.variant = v
                    .parse::<VariantKind>()
                    .map_err(|m| dgflow_bench::BenchError::Config { key: "--variant".into(), message: m })?;
                cfg.validate()?;
            }
            let rows = driver::robustness(&cfg, &nu)?;
            emit(&robustness_to_csv(&rows), out)
        }
        Command::ProjectTest { config } => {
            let cfg = RunConfig::from_path(&config)?;
            let r = driver::project_test(&cfg)?;
            println!("variant               {}", cfg.variant.name());
            println!("||w||                 {:e}", r.norm_w);
            println!("max |div v|           {:e}", r.max_pointwise_div);
            println!("max |b(v,q) - r(q)|   {:e}", r.max_continuity_residual);
            println!("max mass residual     {:e}", r.max_mass_residual);
            println!("||P(Pw) - Pw||        {:e}", r.idempotency_defect);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
