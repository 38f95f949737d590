//! CSV emission.

use std::path::Path;

use dgflow_core::BenchmarkRecord;

use crate::driver::{ConvergenceRow, RobustnessRow};
use crate::error::{BenchError, Result};

pub const HEADER: &str = "t,e_kin,enstrophy,dissipation,max_div,max_mass_residual,err_v_l2,err_v_h1,err_p_l2";

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Header plus rows, each already formatted.
fn table(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    // writing into memory cannot fail
    w.write_record(header.split(',')).expect("in-memory csv");
    for row in rows {
        w.write_record(&row).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv output is utf-8")
}

pub fn records_to_csv(records: &[BenchmarkRecord]) -> String {
    table(
        HEADER,
        records.iter().map(|r| {
            vec![
                num(r.t),
                num(r.e_kin),
                num(r.enstrophy),
                num(r.dissipation),
                num(r.max_div),
                num(r.max_mass_residual),
                opt(r.err_v_l2),
                opt(r.err_v_h1),
                opt(r.err_p_l2),
            ]
        }),
    )
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| BenchError::Io { path: path.into(), source })
}

pub fn emit_csv(records: &[BenchmarkRecord], path: &Path) -> Result<()> {
    write_text(path, &records_to_csv(records))
}

/// Divides energy and enstrophy by `factor` (e.g. `rho |Omega|`).
pub fn renormalize(records: &mut [BenchmarkRecord], factor: f64) {
    for r in records {
        r.e_kin /= factor;
        r.enstrophy /= factor;
    }
}

pub fn convergence_to_csv(rows: &[ConvergenceRow]) -> String {
    table(
        "level,cells,h,err_v_l2,err_v_h1,err_p_l2,rate_v_l2,rate_v_h1,rate_p_l2",
        rows.iter().map(|r| {
            vec![
                r.level.to_string(),
                r.cells.to_string(),
                num(r.h),
                num(r.err_v_l2),
                num(r.err_v_h1),
                num(r.err_p_l2),
                opt(r.rate_v_l2),
                opt(r.rate_v_h1),
                opt(r.rate_p_l2),
            ]
        }),
    )
}

pub fn robustness_to_csv(rows: &[RobustnessRow]) -> String {
    table(
        "nu,cumulative_v_l2,final_v_l2,final_p_l2",
        rows.iter().map(|r| vec![num(r.nu), num(r.cumulative_v_l2), num(r.final_v_l2), num(r.final_p_l2)]),
    )
}
