//! Seeded randomized self-checks run by the `verify` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{builtin, dt_trajectory};
use crate::model::{selection_rates, Policy, PopulationState, UtilitySpec};
use crate::policy::{aa_policy, lp_oracle, unconstrained_policy, PolicyMode};

use super::expr::parse_dynamics;

pub const WORKED_EXAMPLE_F0_SRC: &str = "(b1 + b1/5)/1.2 + 0.01";
pub const WORKED_EXAMPLE_F1_SRC: &str =
    "0.5*(b1 + b1/5)/1.4 + exp(-0.000000001*(b0+b1))*sin(18*(b0+b1)) + 0.1";

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// `i`-th element of the van der Corput sequence in `base`.
pub fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    out
}

/// Random state and utility, with a share of equal profiles, extreme
/// profiles and exact case-boundary utilities mixed in.
pub fn random_instance(rng: &mut ChaCha8Rng) -> (PopulationState, UtilitySpec) {
    let mut pi = || match rng.gen_range(0..10) {
        0 => 0.0,
        1 => 1.0,
        _ => rng.gen_range(0.0..=1.0),
    };
    let (mut a, b) = (pi(), pi());
    if rng.gen_bool(0.1) {
        a = b;
    }
    let g = rng.gen_range(0.01..0.99);
    let state = PopulationState::new(a, b, g).expect("sampled in range");
    let u1 = rng.gen_range(0.0..3.0);
    let u0 = if rng.gen_bool(0.1) {
        let g_adv = state.share(state.advantaged());
        -g_adv * u1 / (1.0 - g_adv)
    } else {
        -rng.gen_range(0.0..3.0)
    };
    (state, UtilitySpec::new(u0.min(0.0), u1).expect("sampled in range"))
}

fn outcome(name: &'static str, passed: bool, detail: String) -> VerifyOutcome {
    VerifyOutcome { name, passed, detail }
}

pub fn run_verification(seed: u64, instances: usize) -> Vec<VerifyOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_gap: f64 = 0.0;
    let mut worst_parity: f64 = 0.0;
    let mut unconstrained_mismatches = 0usize;
    let mut dominance_violations = 0usize;
    let mut mirror_mismatches = 0usize;
    for _ in 0..instances {
        let (s, u) = random_instance(&mut rng);
        let aa = aa_policy(&s, &u);
        let oracle = lp_oracle(&s, &u, true);
        worst_gap = worst_gap.max((aa.achieved_utility - oracle.achieved_utility).abs());
        worst_parity = worst_parity
            .max(selection_rates(&s, &aa.policy).parity_residual())
            .max(selection_rates(&s, &oracle.policy).parity_residual());
        if lp_oracle(&s, &u, false).policy != Policy::unconstrained() {
            unconstrained_mismatches += 1;
        }
        if aa.achieved_utility > unconstrained_policy(&s, &u).achieved_utility + 1e-12 {
            dominance_violations += 1;
        }
        // Mirroring perturbs the shares by an ulp, which can flip the case
        // at a boundary utility, so those instances are skipped.
        let g_adv = s.share(s.advantaged());
        let on_boundary = (g_adv * u.u1() + (1.0 - g_adv) * u.u0()).abs() <= 1e-12;
        if s.pi_a() != s.pi_b() && !on_boundary && aa_policy(&s.swapped(), &u).policy != aa.policy.swapped() {
            mirror_mismatches += 1;
        }
    }

    let mut out = vec![
        outcome(
            "closed-form-vs-oracle",
            worst_gap <= 1e-9 && worst_parity <= 1e-12,
            format!("{instances} instances, max utility gap {worst_gap:e}, max parity residual {worst_parity:e}"),
        ),
        outcome(
            "unconstrained-oracle",
            unconstrained_mismatches == 0,
            format!("{unconstrained_mismatches} mismatches"),
        ),
        outcome(
            "one-step-dominance",
            dominance_violations == 0,
            format!("{dominance_violations} violations"),
        ),
        outcome(
            "mirror-symmetry",
            mirror_mismatches == 0,
            format!("{mirror_mismatches} mismatches"),
        ),
    ];

    let d = builtin::constant(0.2, 0.8).expect("valid constants");
    let u = UtilitySpec::new(-1.0, 1.0).expect("valid utilities");
    let mut rate_violations = 0usize;
    for _ in 0..100 {
        let s = PopulationState::new(rng.gen_range(0.0..=1.0), rng.gen_range(0.0..=1.0), 0.5).expect("in range");
        let dev0 = (s.pi_a() - 0.5).abs().max((s.pi_b() - 0.5).abs());
        let rec = dt_trajectory(s, PolicyMode::Un, &u, &d, 50);
        rate_violations += rec
            .delta
            .iter()
            .enumerate()
            .filter(|(t, x)| x.abs() > 2.0 * dev0 * 0.6f64.powi(*t as i32) + 1e-9)
            .count();
    }
    out.push(outcome(
        "dt-contraction-rate",
        rate_violations == 0,
        format!("{rate_violations} samples above the envelope"),
    ));

    let parsed = parse_dynamics(WORKED_EXAMPLE_F0_SRC, WORKED_EXAMPLE_F1_SRC).expect("embedded sources parse");
    let reference = builtin::appendix_c();
    let mut worst: f64 = 0.0;
    for i in 1..=10_000u64 {
        let (b0, b1) = (radical_inverse(i, 2), radical_inverse(i, 3));
        worst = worst
            .max((parsed.raw_f0(b0, b1) - reference.raw_f0(b0, b1)).abs())
            .max((parsed.raw_f1(b0, b1) - reference.raw_f1(b0, b1)).abs());
    }
    out.push(outcome(
        "parser-fidelity",
        worst <= 1e-12,
        format!("max deviation {worst:e} over 10000 points"),
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn van_der_corput_prefix() {
        let got: Vec<f64> = (1..=4).map(|i| radical_inverse(i, 2)).collect();
        assert_eq!(got, vec![0.5, 0.25, 0.75, 0.125]);
        assert!((radical_inverse(1, 3) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn verification_passes() {
        let results = run_verification(7, 2000);
        for r in &results {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
        assert_eq!(results.len(), 6);
    }
}
