//! Subcommand implementations.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analysis::{
    check_status_quo_bias, estimate_contraction, find_equilibria, prop3_case_persistence,
    theorem2_verdict, theorem4_limits_with_atlas, ContractionReport, EquilibriumAtlas,
    LimitComparison, LimitOptions, PersistenceRecord, StatusQuoBias, Theorem2Verdict,
};
use crate::dynamics::{TimeMode, TrajectoryRecord};
use crate::policy::PolicyMode;
use crate::stereotype::{stereotype_trajectory, StereotypeSpec};

use super::output::{
    export_field, write_comparison_csv, write_field_csv, write_trajectory_csv, ComparisonRow,
    DEFAULT_FIELD_RESOLUTION,
};
use super::scenario::{Resolved, Scenario};
use super::{verify::run_verification, Cli, CliError};

pub const ANALYSIS_RESOLUTION: usize = 256;

fn load(path: &Path) -> Result<Resolved, CliError> {
    Scenario::load(path)?.resolve()
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::io(path, std::io::Error::other(e))
}

/// Runs a resolved scenario under `mode`.
pub fn trajectory(sc: &Resolved, mode: PolicyMode, strict: bool) -> Result<TrajectoryRecord, CliError> {
    let spec = sc.stereotype.clone().unwrap_or_else(StereotypeSpec::none);
    Ok(stereotype_trajectory(
        sc.state,
        mode,
        &sc.utility,
        &sc.dynamics,
        &spec,
        sc.horizon,
        strict,
    )?)
}

fn simulate_one(cli: &Cli, path: &Path) -> Result<(PathBuf, TrajectoryRecord), CliError> {
    let sc = load(path)?;
    let rec = trajectory(&sc, sc.mode, cli.strict)?;
    let out = cli.out.join(format!("{}_trajectory.csv", sc.name));
    write_trajectory_csv(&rec, create(&out)?).map_err(|e| csv_err(&out, e))?;
    Ok((out, rec))
}

pub fn simulate(cli: &Cli, paths: &[PathBuf]) -> Result<String, CliError> {
    let names = paths
        .iter()
        .map(|p| Scenario::load(p).map(|s| s.name))
        .collect::<Result<Vec<_>, _>>()?;
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(CliError::Scenario(format!("duplicate scenario name `{n}` in batch")));
        }
    }
    let results: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = paths
            .iter()
            .map(|p| s.spawn(move || simulate_one(cli, p)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation threads do not panic"))
            .collect()
    });
    let mut summary = String::new();
    for r in results {
        let (out, rec) = r?;
        let end = rec.final_state();
        writeln!(
            summary,
            "{}: {} rows, final (piA, piB) = ({:.6}, {:.6}), cumulative utility {:.6}",
            out.display(),
            rec.len(),
            end.pi_a(),
            end.pi_b(),
            rec.cumulative_utility
        )
        .expect("writing to a String");
    }
    Ok(summary)
}

#[derive(Debug, Serialize)]
pub struct AnalysisReport {
    pub scenario: String,
    pub contraction: ContractionReport,
    pub status_quo_bias: StatusQuoBias,
    pub persistence: PersistenceRecord,
    pub theorem2: Option<Theorem2Verdict>,
    pub equilibria_ct: EquilibriumAtlas,
    pub equilibria_dt: EquilibriumAtlas,
    pub limits: Option<LimitComparison>,
}

pub fn analysis_report(sc: &Resolved) -> Result<AnalysisReport, CliError> {
    let contraction = estimate_contraction(&sc.dynamics, ANALYSIS_RESOLUTION);
    let g_a = sc.state.g_a();
    let equilibria_ct = find_equilibria(&sc.dynamics, TimeMode::Continuous);
    let limits = if equilibria_ct.k_valid {
        Some(theorem4_limits_with_atlas(
            &sc.dynamics,
            &equilibria_ct,
            sc.state,
            &sc.utility,
            &LimitOptions::default(),
        )?)
    } else {
        None
    };
    Ok(AnalysisReport {
        scenario: sc.name.clone(),
        status_quo_bias: check_status_quo_bias(&sc.dynamics, ANALYSIS_RESOLUTION),
        persistence: prop3_case_persistence(g_a, &sc.utility),
        theorem2: theorem2_verdict(contraction.l_un, contraction.l_aa2, g_a, &sc.utility).ok(),
        contraction,
        equilibria_dt: find_equilibria(&sc.dynamics, TimeMode::Discrete),
        equilibria_ct,
        limits,
    })
}

pub fn analyze(cli: &Cli, path: &Path) -> Result<String, CliError> {
    let sc = load(path)?;
    let report = analysis_report(&sc)?;
    let text = toml::to_string(&report).map_err(|e| CliError::Scenario(format!("report serialization: {e}")))?;
    let out = cli.out.join(format!("{}_report.toml", sc.name));
    std::fs::write(&out, text).map_err(|e| CliError::io(&out, e))?;
    let c = &report.contraction;
    Ok(format!(
        "{}: L_UN = {:.6}, L_AA1 = {:.6}, L_AA2 = {:.6}, {} CT attracting points\n",
        out.display(),
        c.l_un,
        c.l_aa1,
        c.l_aa2,
        report.equilibria_ct.attracting.len()
    ))
}

pub fn comparison(sc: &Resolved, strict: bool) -> Result<Vec<ComparisonRow>, CliError> {
    [PolicyMode::Un, PolicyMode::Aa, PolicyMode::Aa1, PolicyMode::Aa2]
        .into_iter()
        .map(|mode| {
            let rec = trajectory(sc, mode, strict)?;
            let end = rec.final_state();
            Ok(ComparisonRow {
                mode,
                cumulative_utility: rec.cumulative_utility,
                final_pi_a: end.pi_a(),
                final_pi_b: end.pi_b(),
                case_switches: rec.case_switches(),
            })
        })
        .collect()
}

pub fn compare(cli: &Cli, path: &Path) -> Result<String, CliError> {
    let sc = load(path)?;
    let rows = comparison(&sc, cli.strict)?;
    let out = cli.out.join(format!("{}_compare.csv", sc.name));
    write_comparison_csv(&rows, create(&out)?).map_err(|e| csv_err(&out, e))?;
    let mut summary = format!("{}\n", out.display());
    for r in &rows {
        writeln!(summary, "  {:>3}: cumulative utility {:.6}", r.mode.as_str(), r.cumulative_utility)
            .expect("writing to a String");
    }
    Ok(summary)
}

pub fn field(cli: &Cli, path: &Path) -> Result<String, CliError> {
    let sc = load(path)?;
    let n = cli
        .resolution
        .or(sc.field_resolution)
        .unwrap_or(DEFAULT_FIELD_RESOLUTION);
    if n < 2 {
        return Err(CliError::Scenario("field resolution must be at least 2".into()));
    }
    let points = export_field(&sc.dynamics, sc.mode, &sc.utility, sc.state.g_a(), n);
    let out = cli.out.join(format!("{}_field.csv", sc.name));
    write_field_csv(&points, create(&out)?).map_err(|e| csv_err(&out, e))?;
    Ok(format!("{}: {} points\n", out.display(), points.len()))
}

pub fn verify(seed: u64, instances: usize) -> Result<String, CliError> {
    let results = run_verification(seed, instances);
    let mut summary = String::new();
    for r in &results {
        writeln!(summary, "{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail)
            .expect("writing to a String");
    }
    if results.iter().all(|r| r.passed) {
        Ok(summary)
    } else {
        Err(CliError::VerifyFailed(summary))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const WORKED_EXAMPLE: &str = r#"
name = "worked-example"
mode = "AA"
time = "CT"

[dynamics]
builtin = "appendixC"

[state]
piA = 0.9
piB = 0.1
gA = 0.5

[utility]
u0 = -1.0
u1 = 1.0

[horizon]
tEnd = 1.0
h = 0.01
"#;

    #[test]
    fn analysis_report_serializes() {
        let sc = Scenario::from_toml(WORKED_EXAMPLE).unwrap().resolve().unwrap();
        let report = analysis_report(&sc).unwrap();
        assert_eq!(report.equilibria_ct.attracting.len(), 3);
        assert!(report.limits.is_some());
        let text = toml::to_string(&report).unwrap();
        assert!(text.contains("l_un"));
        assert!(text.contains("[equilibria_ct]"));
    }

    #[test]
    fn comparison_covers_every_mode() {
        let sc = Scenario::from_toml(WORKED_EXAMPLE).unwrap().resolve().unwrap();
        let rows = comparison(&sc, false).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].mode, PolicyMode::Un);
        assert!(rows.iter().all(|r| r.cumulative_utility.is_finite()));
    }
}
