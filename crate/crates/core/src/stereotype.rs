//! Policies actually implemented when the institution acts on biased
//! estimates `pi + eps` of each group's qualified fraction.
//!
//! A negative error (`eps < 0`) means only `(pi + eps) / pi` of the qualified
//! are recognized; a positive one means `eps / (1 - pi)` of the unqualified are
//! mistaken for qualified. The nominal closed-form policy is computed on the
//! estimates and translated back into selection probabilities on the true
//! classes.

use crate::dynamics::{simulate_ct, simulate_dt, CtOptions, DynamicsSpec, PolicySource, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::model::{Group, Policy, PopulationState, UtilitySpec};
use crate::policy::{determine_aa_case, policy_for_mode, CaseTag, PolicyMode};

/// Error applied to one group over time.
#[derive(Debug, Clone, PartialEq)]
pub enum EpsSchedule {
    Constant(f64),
    /// Entry `k` applies at step `k` (or during `[k, k + 1)` in continuous
    /// time); the last entry is held afterwards.
    Tabulated(Vec<f64>),
}

impl EpsSchedule {
    pub fn at(&self, step: usize) -> f64 {
        match self {
            EpsSchedule::Constant(e) => *e,
            EpsSchedule::Tabulated(v) => v[step.min(v.len() - 1)],
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            EpsSchedule::Constant(e) => *e == 0.0,
            EpsSchedule::Tabulated(v) => v.iter().all(|&e| e == 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StereotypeSpec {
    eps_a: EpsSchedule,
    eps_b: EpsSchedule,
}

impl StereotypeSpec {
    pub fn constant(eps_a: f64, eps_b: f64) -> Self {
        Self {
            eps_a: EpsSchedule::Constant(eps_a),
            eps_b: EpsSchedule::Constant(eps_b),
        }
    }

    pub fn none() -> Self {
        Self::constant(0.0, 0.0)
    }

    pub fn tabulated(eps_a: Vec<f64>, eps_b: Vec<f64>) -> Result<Self> {
        if eps_a.is_empty() || eps_b.is_empty() {
            return Err(Error::InvalidArgument("stereotype schedules must not be empty".into()));
        }
        Ok(Self {
            eps_a: EpsSchedule::Tabulated(eps_a),
            eps_b: EpsSchedule::Tabulated(eps_b),
        })
    }

    pub fn schedule(&self, g: Group) -> &EpsSchedule {
        match g {
            Group::A => &self.eps_a,
            Group::B => &self.eps_b,
        }
    }

    /// `(eps_A, eps_B)` at `step`.
    pub fn at(&self, step: usize) -> (f64, f64) {
        (self.eps_a.at(step), self.eps_b.at(step))
    }

    pub fn is_zero(&self) -> bool {
        self.eps_a.is_zero() && self.eps_b.is_zero()
    }
}

/// Checks `-pi <= eps <= 1 - pi` per group and that the errors cannot make
/// the disadvantaged group look more qualified.
pub fn validate(state: &PopulationState, eps_a: f64, eps_b: f64) -> Result<()> {
    for (g, eps) in [(Group::A, eps_a), (Group::B, eps_b)] {
        let pi = state.pi(g);
        let invalid = |reason| Error::InvalidStereotype {
            group: g.label(),
            eps,
            profile: pi,
            reason,
        };
        if !eps.is_finite() {
            return Err(invalid("error must be finite"));
        }
        if eps < -pi {
            return Err(invalid("estimate falls below zero"));
        }
        if eps > 1.0 - pi {
            return Err(invalid("estimate exceeds one"));
        }
    }
    let adv = state.advantaged();
    let dis = adv.other();
    let eps_of = |g: Group| if g == Group::A { eps_a } else { eps_b };
    if eps_of(dis) - eps_of(adv) > state.pi(adv) - state.pi(dis) {
        return Err(Error::InvalidStereotype {
            group: dis.label(),
            eps: eps_of(dis),
            profile: state.pi(dis),
            reason: "errors reverse which group is advantaged",
        });
    }
    Ok(())
}

fn ratio_or(num: f64, den: f64, fallback: f64) -> f64 {
    if den > 0.0 {
        (num / den).clamp(0.0, 1.0)
    } else {
        fallback
    }
}

/// `(tau1, tau0)` actually applied to one group when the unconstrained policy
/// is computed on its biased estimate.
fn unconstrained_effective(pi: f64, eps: f64) -> (f64, f64) {
    if eps >= 0.0 {
        (1.0, ratio_or(eps, 1.0 - pi, 0.0))
    } else {
        (ratio_or(pi + eps, pi, 1.0), 0.0)
    }
}

/// Effective policy for `mode` at `state` under errors `(eps_a, eps_b)`.
///
/// With both errors zero the result is exactly the unbiased policy.
pub fn effective_policy(
    mode: PolicyMode,
    state: &PopulationState,
    u: &UtilitySpec,
    eps_a: f64,
    eps_b: f64,
) -> Result<(Policy, CaseTag)> {
    validate(state, eps_a, eps_b)?;
    if eps_a == 0.0 && eps_b == 0.0 {
        return Ok(policy_for_mode(mode, state, u));
    }
    let case = match mode {
        PolicyMode::Un => CaseTag::Un,
        PolicyMode::Aa => determine_aa_case(state, u).resolved(),
        PolicyMode::Aa1 => CaseTag::Aa1,
        PolicyMode::Aa2 => CaseTag::Aa2,
    };
    let adv = state.advantaged();
    let dis = adv.other();
    let (pa, pd) = (state.pi(adv), state.pi(dis));
    let eps_of = |g: Group| if g == Group::A { eps_a } else { eps_b };
    let (ea, ed) = (eps_of(adv), eps_of(dis));

    // (tau1, tau0) for the advantaged and disadvantaged group.
    let (adv_taus, dis_taus) = match case {
        CaseTag::Un => (unconstrained_effective(pa, ea), unconstrained_effective(pd, ed)),
        CaseTag::Aa1 => {
            let tau1_adv = ratio_or(pd + ed, pa, 1.0);
            if ed >= 0.0 {
                ((tau1_adv, 0.0), (1.0, ratio_or(ed, 1.0 - pd, 0.0)))
            } else {
                ((tau1_adv, 0.0), (ratio_or(pd + ed, pd, 1.0), 0.0))
            }
        }
        CaseTag::Aa2 => {
            let adv_taus = unconstrained_effective(pa, ea);
            let tau0_dis = ratio_or(pa - pd + ea - ed, 1.0 - pd, 0.0);
            (adv_taus, (1.0, tau0_dis))
        }
    };
    let mut tau1 = [0.0; 2];
    let mut tau0 = [0.0; 2];
    tau1[adv.index()] = adv_taus.0;
    tau0[adv.index()] = adv_taus.1;
    tau1[dis.index()] = dis_taus.0;
    tau0[dis.index()] = dis_taus.1;
    Ok((Policy::from_parts(tau1, tau0), case))
}

/// Policy source applying a stereotype schedule on top of a closed-form mode.
#[derive(Debug, Clone, PartialEq)]
pub struct StereotypeSource {
    pub mode: PolicyMode,
    pub spec: StereotypeSpec,
}

impl PolicySource for StereotypeSource {
    fn policy_at(&self, state: &PopulationState, t: f64, u: &UtilitySpec) -> Result<(Policy, CaseTag)> {
        let (ea, eb) = self.spec.at(t.max(0.0).floor() as usize);
        effective_policy(self.mode, state, u, ea, eb)
    }

    fn symmetric_at_equality(&self) -> bool {
        self.spec.is_zero()
    }
}

/// Horizon of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Steps(usize),
    Continuous(CtOptions),
}

/// Trajectory with effective (biased) policies substituted at every step.
pub fn stereotype_trajectory(
    state0: PopulationState,
    mode: PolicyMode,
    u: &UtilitySpec,
    dyn_: &DynamicsSpec,
    spec: &StereotypeSpec,
    horizon: Horizon,
    strict: bool,
) -> Result<TrajectoryRecord> {
    let source = StereotypeSource {
        mode,
        spec: spec.clone(),
    };
    match horizon {
        Horizon::Steps(steps) => simulate_dt(state0, &source, u, dyn_, steps, strict),
        Horizon::Continuous(opts) => simulate_ct(state0, &source, u, dyn_, &CtOptions { strict, ..opts }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{builtin, ct_integrate, dt_trajectory};
    use crate::model::selection_rates;

    const MODES: [PolicyMode; 4] = [PolicyMode::Un, PolicyMode::Aa, PolicyMode::Aa1, PolicyMode::Aa2];

    fn state(a: f64, b: f64) -> PopulationState {
        PopulationState::new(a, b, 0.5).unwrap()
    }

    fn util() -> UtilitySpec {
        UtilitySpec::new(-2.0, 1.0).unwrap()
    }

    #[test]
    fn zero_errors_reproduce_unbiased_policies() {
        for s in [state(0.8, 0.4), state(0.2, 0.7), state(0.0, 0.0), state(1.0, 0.3)] {
            for mode in MODES {
                assert_eq!(
                    effective_policy(mode, &s, &util(), 0.0, 0.0).unwrap(),
                    policy_for_mode(mode, &s, &util())
                );
            }
        }
    }

    #[test]
    fn negative_stereotype_under_unconstrained() {
        let s = state(0.5, 0.3);
        let (p, _) = effective_policy(PolicyMode::Un, &s, &util(), -0.1, 0.0).unwrap();
        assert!((p.tau1(Group::A) - 0.8).abs() < 1e-15);
        assert_eq!(p.tau0(Group::A), 0.0);
    }

    #[test]
    fn positive_stereotype_under_unconstrained() {
        let s = state(0.6, 0.5);
        let (p, _) = effective_policy(PolicyMode::Un, &s, &util(), 0.1, 0.0).unwrap();
        assert_eq!(p.tau1(Group::A), 1.0);
        assert!((p.tau0(Group::A) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn under_acceptance_with_negative_stereotype() {
        let s = state(0.8, 0.4);
        let (p, case) = effective_policy(PolicyMode::Aa1, &s, &util(), -0.05, -0.1).unwrap();
        assert_eq!(case, CaseTag::Aa1);
        assert!((p.tau1(Group::A) - 0.375).abs() < 1e-15);
        assert!((p.tau1(Group::B) - 0.75).abs() < 1e-15);
        assert_eq!((p.tau0(Group::A), p.tau0(Group::B)), (0.0, 0.0));
    }

    #[test]
    fn under_acceptance_with_positive_stereotype_caps_at_one() {
        // (0.4 + 0.45) / 0.8 > 1
        let s = state(0.8, 0.4);
        let (p, _) = effective_policy(PolicyMode::Aa1, &s, &util(), 0.15, 0.45).unwrap();
        assert_eq!(p.tau1(Group::A), 1.0);
        assert!((p.tau0(Group::B) - 0.45 / 0.6).abs() < 1e-15);
    }

    #[test]
    fn over_acceptance_rows() {
        let s = state(0.8, 0.4);
        let (p, _) = effective_policy(PolicyMode::Aa2, &s, &util(), -0.2, 0.1).unwrap();
        assert!((p.tau1(Group::A) - 0.75).abs() < 1e-15);
        assert_eq!(p.tau1(Group::B), 1.0);
        assert!((p.tau0(Group::B) - (0.4 - 0.2 - 0.1) / 0.6).abs() < 1e-15);
        let (p, _) = effective_policy(PolicyMode::Aa2, &s, &util(), 0.1, -0.1).unwrap();
        assert!((p.tau0(Group::A) - 0.5).abs() < 1e-15);
        assert!((p.tau0(Group::B) - 0.6 / 0.6).abs() < 1e-15);
    }

    #[test]
    fn roles_follow_the_advantaged_group() {
        let s = state(0.4, 0.8);
        let (p, _) = effective_policy(PolicyMode::Aa1, &s, &util(), -0.1, 0.0).unwrap();
        assert!((p.tau1(Group::B) - 0.375).abs() < 1e-15);
        assert!((p.tau1(Group::A) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn invalid_errors_are_rejected() {
        let s = state(0.8, 0.4);
        assert!(effective_policy(PolicyMode::Un, &s, &util(), -0.9, 0.0).is_err());
        assert!(effective_policy(PolicyMode::Un, &s, &util(), 0.3, 0.0).is_err());
        // B would look more qualified than A.
        assert!(matches!(
            effective_policy(PolicyMode::Aa, &s, &util(), -0.3, 0.2),
            Err(Error::InvalidStereotype { group: 'B', .. })
        ));
        let empty = state(0.0, 0.0);
        assert!(effective_policy(PolicyMode::Un, &empty, &util(), -0.1, -0.1).is_err());
    }

    #[test]
    fn tabulated_schedule_holds_last_entry() {
        let spec = StereotypeSpec::tabulated(vec![0.0, -0.1], vec![0.1]).unwrap();
        assert_eq!(spec.at(0), (0.0, 0.1));
        assert_eq!(spec.at(7), (-0.1, 0.1));
        assert!(StereotypeSpec::tabulated(vec![], vec![0.0]).is_err());
    }

    #[test]
    fn zero_errors_give_identical_records() {
        let d = builtin::appendix_c();
        for mode in MODES {
            let plain = dt_trajectory(state(0.7, 0.2), mode, &util(), &d, 25);
            let biased = stereotype_trajectory(
                state(0.7, 0.2),
                mode,
                &util(),
                &d,
                &StereotypeSpec::none(),
                Horizon::Steps(25),
                false,
            )
            .unwrap();
            assert_eq!(plain, biased);
        }
        let plain = ct_integrate(state(0.7, 0.2), PolicyMode::Aa, &util(), &d, 1.0, 1e-2).unwrap();
        let biased = stereotype_trajectory(
            state(0.7, 0.2),
            PolicyMode::Aa,
            &util(),
            &d,
            &StereotypeSpec::none(),
            Horizon::Continuous(CtOptions::new(1.0).step(1e-2)),
            false,
        )
        .unwrap();
        assert_eq!(plain, biased);
    }

    #[test]
    fn invalid_schedule_aborts_the_run() {
        let d = builtin::constant(0.2, 0.8).unwrap();
        let spec = StereotypeSpec::constant(0.0, -0.3);
        let err = stereotype_trajectory(state(0.9, 0.1), PolicyMode::Aa1, &util(), &d, &spec, Horizon::Steps(5), false);
        assert!(matches!(err, Err(Error::InvalidStereotype { .. })));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        /// A state and errors satisfying every validity condition.
        fn arb_valid() -> impl Strategy<Value = (PopulationState, f64, f64)> {
            (0.0..=1.0f64, 0.0..=1.0f64, 0.05..0.95f64, 0.0..=1.0f64, 0.0..=1.0f64).prop_filter_map(
                "invalid errors",
                |(a, b, g, ua, ub)| {
                    let s = PopulationState::new(a, b, g).ok()?;
                    let ea = -a + ua * 1.0;
                    let eb = -b + ub * 1.0;
                    validate(&s, ea, eb).ok().map(|_| (s, ea, eb))
                },
            )
        }

        proptest! {
            #[test]
            fn effective_policies_are_probabilities((s, ea, eb) in arb_valid(), mode_ix in 0usize..4) {
                let (p, _) = effective_policy(MODES[mode_ix], &s, &util(), ea, eb).unwrap();
                prop_assert!(p.as_array().iter().all(|t| (0.0..=1.0).contains(t)));
                prop_assert!(Policy::new(p.tau1(Group::A), p.tau0(Group::A), p.tau1(Group::B), p.tau0(Group::B)).is_ok());
            }

            #[test]
            fn negative_stereotype_keeps_qualified_rates_equal((s, ea, eb) in arb_valid()) {
                let dis = s.advantaged().other();
                let eps_dis = if dis == Group::A { ea } else { eb };
                prop_assume!(eps_dis <= 0.0);
                let (p, _) = effective_policy(PolicyMode::Aa1, &s, &util(), ea, eb).unwrap();
                prop_assert!(selection_rates(&s, &p).qualified_gap() <= 1e-12);
            }
        }
    }
}
