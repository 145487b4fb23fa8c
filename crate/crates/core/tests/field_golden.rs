//! Frozen gradient-field values for the worked-example dynamics.

use parity_dynamics::cli::output::export_field;
use parity_dynamics::dynamics::builtin;
use parity_dynamics::{PolicyMode, UtilitySpec};

fn field(mode: PolicyMode) -> Vec<parity_dynamics::cli::output::FieldPoint> {
    let u = UtilitySpec::new(-1.0, 1.0).unwrap();
    export_field(&builtin::appendix_c(), mode, &u, 0.5, 41)
}

/// Continuous-time drift of one group receiving rates `(b0, b1)`.
fn drift(pi: f64, b0: f64, b1: f64) -> f64 {
    let d = builtin::appendix_c();
    pi * (d.f1(b0, b1) - 1.0) + (1.0 - pi) * d.f0(b0, b1)
}

#[test]
fn under_acceptance_difference_matches_hand_drift() {
    let f = field(PolicyMode::Aa1);
    // Row piB = 0.05, column piA = 0.45: both groups get b1 = piB, b0 = 0.
    let p = f[2 * 41 + 18];
    assert_eq!((p.pi_b, p.pi_a), (0.05, 0.45));
    let expected = drift(0.45, 0.0, 0.05) - drift(0.45, 0.0, 0.45);
    assert!((p.diff_a - expected).abs() < 1e-15);
    assert_eq!(p.diff_b, 0.0);
    assert!((p.d_b - drift(0.05, 0.0, 0.05)).abs() < 1e-15);
}

#[test]
fn frozen_samples() {
    let f = field(PolicyMode::Aa1);
    assert_eq!(f.len(), 1681);
    let a = f[100];
    assert_eq!(a.diff_a, -0.26286003354240023);
    assert_eq!(a.d_b, 0.05223777405084443);
    let b = f[500];
    assert_eq!((b.pi_b, b.pi_a), (0.3, 0.2));
    assert!((b.diff_b - -0.07).abs() < 1e-15);
    let c = f[1200];
    assert_eq!((b.diff_a, c.diff_a), (0.0, 0.0));
    assert_eq!(c.diff_b, -0.7586395028557532);
    assert_eq!(f[840].d_a, 0.11820209966070577);
    assert_eq!((f[1680].d_a, f[1680].d_b), (-1.0, -1.0));
}

/// The advantaged group's drift is not uniformly lowered by under-acceptance
/// here: `f1(0, .)` is non-monotone, so only some off-diagonal points have a
/// nonpositive difference.
#[test]
fn advantaged_component_sign_count() {
    let f = field(PolicyMode::Aa1);
    let off: Vec<_> = f.iter().filter(|p| p.pi_a != p.pi_b).collect();
    let nonpositive = off
        .iter()
        .filter(|p| if p.pi_a > p.pi_b { p.diff_a } else { p.diff_b } <= 0.0)
        .count();
    assert_eq!((nonpositive, off.len()), (1032, 1640));
}
