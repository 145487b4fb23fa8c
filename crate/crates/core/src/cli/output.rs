//! Serialization of trajectories, gradient fields and mode comparisons.
//!
//! Every float is written with 17 significant digits so files are
//! byte-identical across runs on the same platform.

use std::io::Write;

use crate::dynamics::{ct_derivative, DynamicsSpec, TrajectoryRecord};
use crate::model::{selection_rates, Group, PopulationState, UtilitySpec};
use crate::policy::{policy_for_mode, PolicyMode};

pub const TRAJECTORY_HEADER: [&str; 14] = [
    "t",
    "piA",
    "piB",
    "delta",
    "tau1A",
    "tau0A",
    "tau1B",
    "tau0B",
    "betaA",
    "betaB",
    "stepUtility",
    "cumUtility",
    "caseTag",
    "eventFlags",
];

pub const FIELD_HEADER: [&str; 6] = ["piB", "piA", "dA", "dB", "diffA", "diffB"];

pub const DEFAULT_FIELD_RESOLUTION: usize = 41;

pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_trajectory_csv<W: Write>(record: &TrajectoryRecord, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    for i in 0..record.len() {
        let s = &record.states[i];
        let p = &record.policies[i];
        let rates = selection_rates(s, p);
        let nums = [
            record.times[i],
            s.pi_a(),
            s.pi_b(),
            record.delta[i],
            p.tau1(Group::A),
            p.tau0(Group::A),
            p.tau1(Group::B),
            p.tau0(Group::B),
            rates.aggregate(Group::A),
            rates.aggregate(Group::B),
            record.step_utility[i],
            record.running_utility[i],
        ];
        let mut row: Vec<String> = nums.iter().map(|&x| fmt_num(x)).collect();
        row.push(record.cases[i].as_str().to_string());
        row.push(record.event_flags(i));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Continuous-time gradient at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldPoint {
    pub pi_b: f64,
    pub pi_a: f64,
    pub d_a: f64,
    pub d_b: f64,
    /// Gradient under `mode` minus the gradient under the unconstrained
    /// policy; zero for the unconstrained mode itself.
    pub diff_a: f64,
    pub diff_b: f64,
}

/// Gradient field on the grid `i / (resolution - 1)`, with `piB` in the
/// outer loop.
pub fn export_field(
    dyn_: &DynamicsSpec,
    mode: PolicyMode,
    u: &UtilitySpec,
    g_a: f64,
    resolution: usize,
) -> Vec<FieldPoint> {
    let n = resolution.max(2);
    let coord = |i: usize| i as f64 / (n - 1) as f64;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (pi_b, pi_a) = (coord(i), coord(j));
            let state = PopulationState::clamped(pi_a, pi_b, g_a);
            let (policy, _) = policy_for_mode(mode, &state, u);
            let (d, _) = ct_derivative(&state, &policy, dyn_);
            let (base, _) = ct_derivative(&state, &policy_for_mode(PolicyMode::Un, &state, u).0, dyn_);
            out.push(FieldPoint {
                pi_b,
                pi_a,
                d_a: d[0],
                d_b: d[1],
                diff_a: d[0] - base[0],
                diff_b: d[1] - base[1],
            });
        }
    }
    out
}

pub fn write_field_csv<W: Write>(points: &[FieldPoint], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FIELD_HEADER)?;
    for p in points {
        w.write_record([p.pi_b, p.pi_a, p.d_a, p.d_b, p.diff_a, p.diff_b].map(fmt_num))?;
    }
    w.flush()?;
    Ok(())
}

/// One line of a mode comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRow {
    pub mode: PolicyMode,
    pub cumulative_utility: f64,
    pub final_pi_a: f64,
    pub final_pi_b: f64,
    pub case_switches: usize,
}

pub fn write_comparison_csv<W: Write>(rows: &[ComparisonRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["mode", "cumUtility", "finalPiA", "finalPiB", "finalDelta", "caseSwitches"])?;
    for r in rows {
        w.write_record([
            r.mode.as_str().to_string(),
            fmt_num(r.cumulative_utility),
            fmt_num(r.final_pi_a),
            fmt_num(r.final_pi_b),
            fmt_num(r.final_pi_a - r.final_pi_b),
            r.case_switches.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{builtin, dt_trajectory};

    #[test]
    fn number_format_has_seventeen_digits() {
        assert_eq!(fmt_num(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_num(0.0), "0.0000000000000000e0");
        assert_eq!(fmt_num(-2.5), "-2.5000000000000000e0");
    }

    #[test]
    fn trajectory_csv_shape() {
        let d = builtin::constant(0.2, 0.8).unwrap();
        let s = PopulationState::new(0.9, 0.1, 0.5).unwrap();
        let u = UtilitySpec::new(-1.0, 1.0).unwrap();
        let rec = dt_trajectory(s, PolicyMode::Aa, &u, &d, 4);
        let mut buf = Vec::new();
        write_trajectory_csv(&rec, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[0], TRAJECTORY_HEADER.join(","));
        assert!(lines[1].ends_with(",AA2,"));
        assert_eq!(lines[1].split(',').count(), 14);
    }

    #[test]
    fn field_on_diagonal_matches_unconstrained() {
        let d = builtin::appendix_c();
        let u = UtilitySpec::new(-1.0, 1.0).unwrap();
        for mode in [PolicyMode::Aa1, PolicyMode::Aa2, PolicyMode::Aa] {
            let field = export_field(&d, mode, &u, 0.5, 11);
            assert_eq!(field.len(), 121);
            for p in field.iter().filter(|p| p.pi_a == p.pi_b) {
                assert_eq!((p.diff_a, p.diff_b), (0.0, 0.0));
            }
        }
        let un = export_field(&d, PolicyMode::Un, &u, 0.5, 5);
        assert!(un.iter().all(|p| p.diff_a == 0.0 && p.diff_b == 0.0));
        assert_eq!((un[1].pi_b, un[1].pi_a), (0.0, 0.25));
    }

    #[test]
    fn field_vanishes_at_joint_equilibrium() {
        let d = builtin::constant(0.2, 0.8).unwrap();
        let u = UtilitySpec::new(-1.0, 1.0).unwrap();
        let field = export_field(&d, PolicyMode::Aa1, &u, 0.5, 3);
        let centre = field[4];
        assert_eq!((centre.pi_a, centre.pi_b), (0.5, 0.5));
        assert!(centre.d_a.abs() < 1e-10 && centre.d_b.abs() < 1e-10);
    }
}
