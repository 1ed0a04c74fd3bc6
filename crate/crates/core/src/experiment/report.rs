use std::path::{Path, PathBuf};

use serde::Serialize;

use super::run::{Outcome, RunKind, RunReport};
use crate::error::{Error, Result};

/// Column order of `terminal.csv`.
pub const TERMINAL_HEADER: [&str; 5] = ["seed", "level", "P_T", "exponent", "cert_pass"];
/// Column order of `residuals.csv`.
pub const RESIDUALS_HEADER: [&str; 5] = [
    "level",
    "mean_maxabs",
    "median_maxabs",
    "max_maxabs",
    "qv_of_integral",
];
/// Column order of `calculus.csv`.
pub const CALCULUS_HEADER: [&str; 4] = ["verifier", "level", "mean_residual", "slope_so_far"];

/// Shortest round-trip text for a float, in scientific form outside
/// `[1e-4, 1e15)` so tiny residuals stay short.
pub fn format_float(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Configuration(format!("cannot write {}: {e}", path.display()))
}

fn write_csv<const N: usize>(
    path: &Path,
    header: [&str; N],
    rows: impl Iterator<Item = [String; N]>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

#[derive(Serialize)]
struct Summary<'a> {
    kind: RunKind,
    version: &'a str,
    outcome: Outcome,
    exit_code: i32,
    wall_time_seconds: f64,
    num_failures: usize,
    slopes: &'a std::collections::BTreeMap<String, f64>,
    verdicts: &'a [super::run::Verdict],
    failures: &'a [super::run::SeedFailure],
    config: &'a super::config::ExperimentConfig,
}

/// Writes the report's tables and `summary.json` into `dir`, creating it if
/// needed. Returns the paths written.
pub fn write_report(report: &RunReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut written = Vec::new();

    match report.kind {
        RunKind::Experiment => {
            let p = dir.join("terminal.csv");
            write_csv(
                &p,
                TERMINAL_HEADER,
                report.terminal.iter().map(|r| {
                    [
                        r.seed.to_string(),
                        r.level.to_string(),
                        format_float(r.p_t),
                        format_float(r.exponent),
                        r.cert_pass.to_string(),
                    ]
                }),
            )?;
            written.push(p);

            let p = dir.join("residuals.csv");
            write_csv(
                &p,
                RESIDUALS_HEADER,
                report.levels.iter().map(|s| {
                    [
                        s.level.to_string(),
                        format_float(s.mean_maxabs),
                        format_float(s.median_maxabs),
                        format_float(s.max_maxabs),
                        format_float(s.qv_of_integral),
                    ]
                }),
            )?;
            written.push(p);
        }
        RunKind::Calculus => {
            let p = dir.join("calculus.csv");
            write_csv(
                &p,
                CALCULUS_HEADER,
                report.calculus.iter().map(|r| {
                    [
                        r.verifier.clone(),
                        r.level.to_string(),
                        format_float(r.mean_residual),
                        format_float(r.slope_so_far),
                    ]
                }),
            )?;
            written.push(p);
        }
    }

    let summary = Summary {
        kind: report.kind,
        version: &report.version,
        outcome: report.outcome(),
        exit_code: report.exit_code(),
        wall_time_seconds: report.wall_time_seconds,
        num_failures: report.failures.len(),
        slopes: &report.slopes,
        verdicts: &report.verdicts,
        failures: &report.failures,
        config: &report.config,
    };
    let p = dir.join("summary.json");
    // serde_json writes non-finite floats as null.
    let text = serde_json::to_string_pretty(&summary).map_err(|e| io_err(&p, e))?;
    std::fs::write(&p, text + "\n").map_err(|e| io_err(&p, e))?;
    written.push(p);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_round_trips() {
        for x in [0.0, 0.0625, 1.0, -3.5, 1e-20, 2.5e-5, 123456.789, 1e300] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(format_float(0.0625), "0.0625");
        assert_eq!(format_float(1e-20), "1e-20");
        assert_eq!(format_float(f64::NAN), "NaN");
    }
}
