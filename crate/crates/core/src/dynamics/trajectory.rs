//! Trajectory generation in discrete and continuous time.
//!
//! Every step recomputes the policy from the current state through a
//! [`PolicySource`], records utility and rates, and advances both groups.
//! Continuous time uses a fixed-step classical Runge-Kutta scheme with the
//! policy re-evaluated at every stage.

use crate::error::{Error, Result};
use crate::model::{selection_rates, utility, Group, Policy, PopulationState, UtilitySpec};
use crate::policy::{policy_for_mode, CaseTag, PolicyMode};

use super::{dt_step_counted, DynamicsSpec, TimeMode};

/// Below this gap continuous trajectories are merged onto one path.
pub const MERGE_THRESHOLD: f64 = 1e-10;
/// Endpoint tolerance of the step-halving check.
pub const HALVING_TOLERANCE: f64 = 1e-6;

/// Supplies the policy applied at a given state and time.
pub trait PolicySource {
    fn policy_at(&self, state: &PopulationState, t: f64, u: &UtilitySpec) -> Result<(Policy, CaseTag)>;

    /// Whether equal profiles always receive mirrored policies, so that
    /// merged groups stay merged.
    fn symmetric_at_equality(&self) -> bool {
        true
    }
}

/// Closed-form policy for a fixed [`PolicyMode`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeSource(pub PolicyMode);

impl PolicySource for ModeSource {
    fn policy_at(&self, state: &PopulationState, _t: f64, u: &UtilitySpec) -> Result<(Policy, CaseTag)> {
        Ok(policy_for_mode(self.0, state, u))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    /// The parity case changed between consecutive steps.
    CaseSwitch { from: CaseTag, to: CaseTag },
    /// At least one rate-map output was clamped at this step.
    RateClamp { count: u32 },
    /// The sign of `piA - piB` flipped.
    AdvantageCrossing,
    /// Continuous-time groups were snapped onto a shared path.
    Merge,
    /// Halving the step moved the endpoint by more than the tolerance.
    HalvingFailed { difference: f64 },
    /// Integration stopped because the derivative fell below the threshold.
    Stationary,
}

impl EventKind {
    /// One-letter code used in serialized event flags.
    pub fn code(&self) -> char {
        match self {
            EventKind::CaseSwitch { .. } => 'S',
            EventKind::RateClamp { .. } => 'C',
            EventKind::AdvantageCrossing => 'X',
            EventKind::Merge => 'M',
            EventKind::HalvingFailed { .. } => 'H',
            EventKind::Stationary => 'Z',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    /// Index of the first recorded row at or after the event.
    pub row: usize,
    pub time: f64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalvingCheck {
    pub difference: f64,
    pub passed: bool,
}

/// Time-indexed record of a run. All per-row vectors have equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub time_mode: TimeMode,
    pub times: Vec<f64>,
    pub states: Vec<PopulationState>,
    pub policies: Vec<Policy>,
    pub cases: Vec<CaseTag>,
    pub step_utility: Vec<f64>,
    /// Running cumulative utility at each row.
    pub running_utility: Vec<f64>,
    /// `piA - piB`.
    pub delta: Vec<f64>,
    /// `|beta(1;A) - beta(1;B)|`.
    pub qualified_gap: Vec<f64>,
    pub events: Vec<Event>,
    pub rate_clamps: u64,
    /// Updates whose unclamped result left `[0, 1]`.
    pub state_violations: u64,
    pub cumulative_utility: f64,
    pub halving: Option<HalvingCheck>,
    /// Time at which an early stationary stop happened.
    pub stationary_at: Option<f64>,
}

impl TrajectoryRecord {
    fn new(time_mode: TimeMode) -> Self {
        Self {
            time_mode,
            times: Vec::new(),
            states: Vec::new(),
            policies: Vec::new(),
            cases: Vec::new(),
            step_utility: Vec::new(),
            running_utility: Vec::new(),
            delta: Vec::new(),
            qualified_gap: Vec::new(),
            events: Vec::new(),
            rate_clamps: 0,
            state_violations: 0,
            cumulative_utility: 0.0,
            halving: None,
            stationary_at: None,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> PopulationState {
        *self.states.last().expect("records always hold the initial state")
    }

    pub fn final_delta(&self) -> f64 {
        *self.delta.last().expect("records always hold the initial state")
    }

    pub fn case_switches(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::CaseSwitch { .. }))
            .count()
    }

    pub fn has_event(&self, pred: impl Fn(&EventKind) -> bool) -> bool {
        self.events.iter().any(|e| pred(&e.kind))
    }

    /// Distinct event codes attached to `row`, in order of first occurrence,
    /// joined by `|`.
    pub fn event_flags(&self, row: usize) -> String {
        let mut codes: Vec<char> = Vec::new();
        for e in self.events.iter().filter(|e| e.row == row) {
            let c = e.kind.code();
            if !codes.contains(&c) {
                codes.push(c);
            }
        }
        codes.iter().map(char::to_string).collect::<Vec<_>>().join("|")
    }

    #[allow(clippy::too_many_arguments)]
    fn push_row(
        &mut self,
        t: f64,
        state: PopulationState,
        policy: Policy,
        case: CaseTag,
        step_utility: f64,
        running: f64,
    ) {
        let rates = selection_rates(&state, &policy);
        self.times.push(t);
        self.states.push(state);
        self.policies.push(policy);
        self.cases.push(case);
        self.step_utility.push(step_utility);
        self.running_utility.push(running);
        self.delta.push(state.delta());
        self.qualified_gap.push(rates.qualified_gap());
    }
}

fn is_parity_case(c: CaseTag) -> bool {
    matches!(c, CaseTag::Aa1 | CaseTag::Aa2)
}

fn crossed(before: f64, after: f64) -> bool {
    (before > 0.0 && after < 0.0) || (before < 0.0 && after > 0.0)
}

/// Discrete-time run of `steps` updates; the record holds `steps + 1` rows and
/// the cumulative utility is the plain sum over them.
///
/// With `strict`, the first switch between the two parity cases aborts.
pub fn simulate_dt(
    state0: PopulationState,
    source: &dyn PolicySource,
    u: &UtilitySpec,
    dyn_: &DynamicsSpec,
    steps: usize,
    strict: bool,
) -> Result<TrajectoryRecord> {
    let mut rec = TrajectoryRecord::new(TimeMode::Discrete);
    let mut state = state0;
    let mut total = 0.0;
    let mut prev_case: Option<CaseTag> = None;
    for step in 0..=steps {
        let t = step as f64;
        let (policy, case) = source.policy_at(&state, t, u)?;
        if let Some(prev) = prev_case {
            if prev != case && is_parity_case(prev) && is_parity_case(case) {
                if strict {
                    return Err(Error::CaseSwitch {
                        time: t,
                        from: prev.as_str(),
                        to: case.as_str(),
                    });
                }
                rec.events.push(Event {
                    row: step,
                    time: t,
                    kind: EventKind::CaseSwitch { from: prev, to: case },
                });
            }
        }
        if let Some(&before) = rec.delta.last() {
            if crossed(before, state.delta()) {
                rec.events.push(Event {
                    row: step,
                    time: t,
                    kind: EventKind::AdvantageCrossing,
                });
            }
        }
        prev_case = Some(case);
        let step_u = utility(&state, &policy, u);
        total += step_u;
        rec.push_row(t, state, policy, case, step_u, total);
        if step == steps {
            break;
        }

        let rates = selection_rates(&state, &policy);
        let mut next = [0.0; 2];
        let mut clamps = 0;
        for g in Group::BOTH {
            let out = dt_step_counted(state.profile(g), rates.group(g), dyn_);
            next[g.index()] = out.profile.p1();
            clamps += out.clamps;
            rec.state_violations += u64::from(out.out_of_range);
        }
        if clamps > 0 {
            rec.rate_clamps += u64::from(clamps);
            rec.events.push(Event {
                row: step,
                time: t,
                kind: EventKind::RateClamp { count: clamps },
            });
        }
        state = PopulationState::clamped(next[0], next[1], state.g_a());
    }
    rec.cumulative_utility = total;
    Ok(rec)
}

/// Discrete-time run under a closed-form policy mode; case switches are
/// recorded, never fatal.
pub fn dt_trajectory(
    state0: PopulationState,
    mode: PolicyMode,
    u: &UtilitySpec,
    dyn_: &DynamicsSpec,
    steps: usize,
) -> TrajectoryRecord {
    simulate_dt(state0, &ModeSource(mode), u, dyn_, steps, false)
        .expect("closed-form policies never fail and non-strict runs never abort")
}

/// Continuous-time integration settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtOptions {
    pub t_end: f64,
    pub step: f64,
    /// Row spacing; must be a whole number of steps. `None` records every step.
    pub sample_every: Option<f64>,
    /// Re-run at half the step and compare endpoints. Skipped when
    /// `stop_when_stationary` is set.
    pub check_halving: bool,
    /// Abort on parity-case switches and failed halving checks.
    pub strict: bool,
    /// Stop once `max |d pi / dt|` drops below this value.
    pub stop_when_stationary: Option<f64>,
}

impl CtOptions {
    pub const DEFAULT_STEP: f64 = 1e-3;

    pub fn new(t_end: f64) -> Self {
        Self {
            t_end,
            step: Self::DEFAULT_STEP,
            sample_every: None,
            check_halving: true,
            strict: false,
            stop_when_stationary: None,
        }
    }

    pub fn step(mut self, h: f64) -> Self {
        self.step = h;
        self
    }

    pub fn sample_every(mut self, every: f64) -> Self {
        self.sample_every = Some(every);
        self
    }

    pub fn check_halving(mut self, on: bool) -> Self {
        self.check_halving = on;
        self
    }

    pub fn strict(mut self, on: bool) -> Self {
        self.strict = on;
        self
    }

    pub fn stop_when_stationary(mut self, tol: f64) -> Self {
        self.stop_when_stationary = Some(tol);
        self
    }

    /// `(number of steps, effective step, steps per row)`.
    fn grid(&self) -> Result<(usize, f64, usize)> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "step size must be positive, got {}",
                self.step
            )));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "end time must be finite and nonnegative, got {}",
                self.t_end
            )));
        }
        let n = (self.t_end / self.step - 1e-9).ceil().max(0.0) as usize;
        let h = if n == 0 { self.step } else { self.t_end / n as f64 };
        let per_row = match self.sample_every {
            None => 1,
            Some(every) => {
                let k = (every / h).round();
                if !(k >= 1.0) || ((k * h - every).abs() > 1e-9 * every.max(1.0)) {
                    return Err(Error::InvalidArgument(format!(
                        "sample spacing {every} is not a whole number of steps of {h}"
                    )));
                }
                k as usize
            }
        };
        Ok((n, h, per_row))
    }
}

/// `d pi / dt` for both groups under `policy`, plus the number of clamps.
pub fn ct_derivative(state: &PopulationState, policy: &Policy, dyn_: &DynamicsSpec) -> ([f64; 2], u32) {
    let rates = selection_rates(state, policy);
    let mut d = [0.0; 2];
    let mut clamps = 0;
    for g in Group::BOTH {
        let r = rates.group(g);
        let resp = dyn_.response(r.beta0, r.beta1);
        let pi = state.pi(g);
        d[g.index()] = pi * (resp.f1 - 1.0) + (1.0 - pi) * resp.f0;
        clamps += resp.clamps;
    }
    (d, clamps)
}

struct StageEval {
    d: [f64; 2],
    state: PopulationState,
    policy: Policy,
    case: CaseTag,
    clamps: u32,
}

fn stage(
    y: [f64; 2],
    g_a: f64,
    t: f64,
    source: &dyn PolicySource,
    u: &UtilitySpec,
    dyn_: &DynamicsSpec,
) -> Result<StageEval> {
    let state = PopulationState::clamped(y[0], y[1], g_a);
    let (policy, case) = source.policy_at(&state, t, u)?;
    let (d, clamps) = ct_derivative(&state, &policy, dyn_);
    Ok(StageEval {
        d,
        state,
        policy,
        case,
        clamps,
    })
}

fn rk4_step(
    y: [f64; 2],
    k1: [f64; 2],
    g_a: f64,
    t: f64,
    h: f64,
    source: &dyn PolicySource,
    u: &UtilitySpec,
    dyn_: &DynamicsSpec,
) -> Result<[f64; 2]> {
    let shift = |k: [f64; 2], s: f64| [y[0] + s * k[0], y[1] + s * k[1]];
    let k2 = stage(shift(k1, h / 2.0), g_a, t + h / 2.0, source, u, dyn_)?.d;
    let k3 = stage(shift(k2, h / 2.0), g_a, t + h / 2.0, source, u, dyn_)?.d;
    let k4 = stage(shift(k3, h), g_a, t + h, source, u, dyn_)?.d;
    Ok(std::array::from_fn(|i| {
        y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    }))
}

/// Continuous-time run driven by an arbitrary policy source.
///
/// Utility is integrated by the trapezoid rule over every internal step.
pub fn simulate_ct(
    state0: PopulationState,
    source: &dyn PolicySource,
    u: &UtilitySpec,
    dyn_: &DynamicsSpec,
    opts: &CtOptions,
) -> Result<TrajectoryRecord> {
    let (n, h, per_row) = opts.grid()?;
    let g_a = state0.g_a();
    let may_merge = source.symmetric_at_equality();
    let mut rec = TrajectoryRecord::new(TimeMode::Continuous);
    let mut y = [state0.pi_a(), state0.pi_b()];
    let mut merged = false;
    let mut total = 0.0;
    let mut prev_utility: Option<f64> = None;
    let mut prev_case: Option<CaseTag> = None;
    let mut prev_delta = state0.delta();
    let row_of = |i: usize| i.div_ceil(per_row);

    for i in 0..=n {
        let t = i as f64 * h;
        let here = stage(y, g_a, t, source, u, dyn_)?;
        let step_u = utility(&here.state, &here.policy, u);
        if let Some(prev) = prev_utility {
            total += h / 2.0 * (prev + step_u);
        }
        prev_utility = Some(step_u);

        if let Some(prev) = prev_case {
            if prev != here.case && is_parity_case(prev) && is_parity_case(here.case) {
                if opts.strict {
                    return Err(Error::CaseSwitch {
                        time: t,
                        from: prev.as_str(),
                        to: here.case.as_str(),
                    });
                }
                rec.events.push(Event {
                    row: row_of(i),
                    time: t,
                    kind: EventKind::CaseSwitch { from: prev, to: here.case },
                });
            }
        }
        prev_case = Some(here.case);
        if here.clamps > 0 {
            rec.rate_clamps += u64::from(here.clamps);
            rec.events.push(Event {
                row: row_of(i),
                time: t,
                kind: EventKind::RateClamp { count: here.clamps },
            });
        }

        let stationary = opts
            .stop_when_stationary
            .is_some_and(|tol| here.d[0].abs().max(here.d[1].abs()) < tol);
        if i % per_row == 0 || i == n || stationary {
            rec.push_row(t, here.state, here.policy, here.case, step_u, total);
        }
        if stationary {
            rec.stationary_at = Some(t);
            rec.events.push(Event {
                row: rec.len() - 1,
                time: t,
                kind: EventKind::Stationary,
            });
            break;
        }
        if i == n {
            break;
        }

        let mut next = rk4_step(y, here.d, g_a, t, h, source, u, dyn_)?;
        for v in next.iter_mut() {
            if !(0.0..=1.0).contains(v) {
                rec.state_violations += 1;
                *v = v.clamp(0.0, 1.0);
            }
        }
        if merged {
            next[1] = next[0];
        } else if may_merge && (next[0] - next[1]).abs() < MERGE_THRESHOLD {
            let mid = 0.5 * (next[0] + next[1]);
            next = [mid, mid];
            merged = true;
            rec.events.push(Event {
                row: row_of(i + 1),
                time: t + h,
                kind: EventKind::Merge,
            });
        }
        let delta = next[0] - next[1];
        if crossed(prev_delta, delta) {
            rec.events.push(Event {
                row: row_of(i + 1),
                time: t + h,
                kind: EventKind::AdvantageCrossing,
            });
        }
        prev_delta = delta;
        y = next;
    }
    rec.cumulative_utility = total;

    if opts.check_halving && opts.stop_when_stationary.is_none() && n > 0 {
        let fine = CtOptions {
            step: h / 2.0,
            sample_every: Some(opts.t_end),
            check_halving: false,
            strict: false,
            ..*opts
        };
        let other = simulate_ct(state0, source, u, dyn_, &fine)?.final_state();
        let end = rec.final_state();
        let difference = (end.pi_a() - other.pi_a())
            .abs()
            .max((end.pi_b() - other.pi_b()).abs());
        let passed = difference <= HALVING_TOLERANCE;
        rec.halving = Some(HalvingCheck { difference, passed });
        if !passed {
            if opts.strict {
                return Err(Error::StepHalving {
                    difference,
                    tolerance: HALVING_TOLERANCE,
                });
            }
            rec.events.push(Event {
                row: rec.len() - 1,
                time: opts.t_end,
                kind: EventKind::HalvingFailed { difference },
            });
        }
    }
    Ok(rec)
}

/// Continuous-time run under a closed-form policy mode, recording every step.
pub fn ct_integrate(
    state0: PopulationState,
    mode: PolicyMode,
    u: &UtilitySpec,
    dyn_: &DynamicsSpec,
    t_end: f64,
    step: f64,
) -> Result<TrajectoryRecord> {
    simulate_ct(state0, &ModeSource(mode), u, dyn_, &CtOptions::new(t_end).step(step))
}

/// Coefficient `c` in `U = u1 * pi_adv - c * |delta|` for each closed form.
fn delta_coefficient(case: CaseTag, u: &UtilitySpec, g_dis: f64) -> f64 {
    match case {
        CaseTag::Un => g_dis * u.u1(),
        CaseTag::Aa1 => u.u1(),
        CaseTag::Aa2 => g_dis * (u.u1() + u.u0().abs()),
    }
}

/// Infinite-horizon bracket for the continuous-time cumulative utility: the
/// finite integral plus the tail of the gap-dependent utility term, whose
/// gap decays between `e^{-t(1+L)}` and `e^{-t(1-L)}` after the last row.
pub fn cumulative_utility_with_tail(
    record: &TrajectoryRecord,
    l: f64,
    u: &UtilitySpec,
    g_a: f64,
) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&l) {
        return Err(Error::NotContractive(l));
    }
    if record.time_mode != TimeMode::Continuous {
        return Err(Error::InvalidArgument(
            "tail brackets are defined for continuous-time records only".into(),
        ));
    }
    let end = record.final_state();
    let case = *record.cases.last().expect("records always hold the initial state");
    let g_dis = match end.advantaged() {
        Group::A => 1.0 - g_a,
        Group::B => g_a,
    };
    let c = delta_coefficient(case, u, g_dis);
    let d = end.delta().abs();
    let f = record.cumulative_utility;
    Ok((f - c * d / (1.0 - l), f - c * d / (1.0 + l)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::builtin;

    fn state(a: f64, b: f64) -> PopulationState {
        PopulationState::new(a, b, 0.5).unwrap()
    }

    fn util() -> UtilitySpec {
        UtilitySpec::new(-1.0, 1.0).unwrap()
    }

    #[test]
    fn zero_steps_hold_only_initial_state() {
        let d = builtin::constant(0.2, 0.8).unwrap();
        let rec = dt_trajectory(state(0.9, 0.1), PolicyMode::Un, &util(), &d, 0);
        assert_eq!(rec.len(), 1);
        assert_eq!(rec.final_state(), state(0.9, 0.1));
        assert_eq!(rec.cumulative_utility, rec.step_utility[0]);
    }

    #[test]
    fn constant_dynamics_contract_geometrically() {
        let d = builtin::constant(0.2, 0.8).unwrap();
        let rec = dt_trajectory(state(0.9, 0.1), PolicyMode::Un, &util(), &d, 30);
        for (t, s) in rec.states.iter().enumerate() {
            let expected_a = 0.4 * 0.6f64.powi(t as i32);
            assert!(((s.pi_a() - 0.5).abs() - expected_a).abs() < 1e-14);
            assert!(((s.pi_b() - 0.5).abs() - expected_a).abs() < 1e-14);
        }
        let sum: f64 = rec.step_utility.iter().sum();
        assert_eq!(rec.cumulative_utility, sum);
    }

    #[test]
    fn equal_profiles_make_aa_match_un() {
        let d = builtin::appendix_c();
        let un = dt_trajectory(state(0.4, 0.4), PolicyMode::Un, &util(), &d, 20);
        let aa = dt_trajectory(state(0.4, 0.4), PolicyMode::Aa, &util(), &d, 20);
        assert_eq!(un.states, aa.states);
        assert_eq!(un.step_utility, aa.step_utility);
    }

    #[test]
    fn ct_matches_linear_solution() {
        let d = builtin::constant(0.2, 0.8).unwrap();
        let rec = ct_integrate(state(0.9, 0.9), PolicyMode::Un, &util(), &d, 10.0, 1e-3).unwrap();
        let exact = 0.5 + 0.4 * (-4.0f64).exp();
        assert!((rec.final_state().pi_a() - exact).abs() < 1e-6);
        assert!(rec.halving.unwrap().passed);
        assert!((rec.times.last().unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn ct_row_count_follows_sampling() {
        let d = builtin::constant(0.2, 0.8).unwrap();
        let opts = CtOptions::new(2.5).step(1e-2).sample_every(0.1);
        let rec = simulate_ct(state(0.9, 0.1), &ModeSource(PolicyMode::Un), &util(), &d, &opts).unwrap();
        assert_eq!(rec.len(), 26);
        assert!(simulate_ct(
            state(0.9, 0.1),
            &ModeSource(PolicyMode::Un),
            &util(),
            &d,
            &CtOptions::new(1.0).step(0.1).sample_every(0.15)
        )
        .is_err());
    }

    #[test]
    fn ct_rejects_nonpositive_step() {
        let d = builtin::identity();
        assert!(ct_integrate(state(0.5, 0.5), PolicyMode::Un, &util(), &d, 1.0, 0.0).is_err());
        assert!(ct_integrate(state(0.5, 0.5), PolicyMode::Un, &util(), &d, 1.0, -1e-3).is_err());
    }

    #[test]
    fn equilibrium_start_stays_put() {
        let d = builtin::constant(0.2, 0.8).unwrap();
        let rec = ct_integrate(state(0.5, 0.5), PolicyMode::Aa, &util(), &d, 3.0, 1e-2).unwrap();
        assert!(rec.states.iter().all(|s| s.pi_a() == 0.5 && s.pi_b() == 0.5));
    }

    #[test]
    fn ct_trapezoid_on_constant_utility() {
        // Equilibrium start: U is constant, so the integral is U * t_end.
        let d = builtin::constant(0.2, 0.8).unwrap();
        let rec = ct_integrate(state(0.5, 0.5), PolicyMode::Un, &util(), &d, 4.0, 1e-2).unwrap();
        assert!((rec.cumulative_utility - 0.5 * 4.0).abs() < 1e-12);
    }

    #[test]
    fn aa_with_equal_start_traces_un() {
        let d = builtin::appendix_c();
        let un = ct_integrate(state(0.3, 0.3), PolicyMode::Un, &util(), &d, 2.0, 1e-2).unwrap();
        let aa = ct_integrate(state(0.3, 0.3), PolicyMode::Aa, &util(), &d, 2.0, 1e-2).unwrap();
        assert_eq!(un.states, aa.states);
    }

    #[test]
    fn strict_dt_aborts_on_case_switch() {
        struct Flip;
        impl PolicySource for Flip {
            fn policy_at(&self, s: &PopulationState, t: f64, _: &UtilitySpec) -> Result<(Policy, CaseTag)> {
                let mode = if t < 2.0 { PolicyMode::Aa1 } else { PolicyMode::Aa2 };
                Ok(policy_for_mode(mode, s, &util()))
            }
        }
        let d = builtin::constant(0.2, 0.8).unwrap();
        let lenient = simulate_dt(state(0.9, 0.1), &Flip, &util(), &d, 5, false).unwrap();
        assert_eq!(lenient.case_switches(), 1);
        assert_eq!(lenient.event_flags(2), "S");
        let err = simulate_dt(state(0.9, 0.1), &Flip, &util(), &d, 5, true).unwrap_err();
        assert!(matches!(err, Error::CaseSwitch { .. }));
    }

    #[test]
    fn tail_bracket() {
        let d = builtin::constant(0.2, 0.8).unwrap();
        let rec = ct_integrate(state(0.5, 0.5), PolicyMode::Un, &util(), &d, 1.0, 1e-2).unwrap();
        let (lo, hi) = cumulative_utility_with_tail(&rec, 0.6, &util(), 0.5).unwrap();
        assert_eq!(lo, hi);
        assert_eq!(lo, rec.cumulative_utility);
        assert!(matches!(
            cumulative_utility_with_tail(&rec, 1.0, &util(), 0.5),
            Err(Error::NotContractive(_))
        ));

        // Unmerged end gap d: widths c d / (1 - L) and c d / (1 + L).
        let rec = ct_integrate(state(0.9, 0.1), PolicyMode::Un, &util(), &d, 0.0, 1e-2).unwrap();
        let (lo, hi) = cumulative_utility_with_tail(&rec, 0.6, &util(), 0.5).unwrap();
        let c = 0.5;
        assert!((rec.cumulative_utility - lo - c * 0.8 / 0.4).abs() < 1e-12);
        assert!((rec.cumulative_utility - hi - c * 0.8 / 1.6).abs() < 1e-12);

        let zero = UtilitySpec::new(0.0, 0.0).unwrap();
        let (lo, hi) = cumulative_utility_with_tail(&rec, 0.6, &zero, 0.5).unwrap();
        assert_eq!((lo, hi), (rec.cumulative_utility, rec.cumulative_utility));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn ct_preserves_order(a in 0.0..=1.0f64, b in 0.0..=1.0f64, mode_ix in 0usize..4) {
                let mode = [PolicyMode::Un, PolicyMode::Aa, PolicyMode::Aa1, PolicyMode::Aa2][mode_ix];
                let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
                let d = builtin::appendix_c();
                let opts = CtOptions::new(5.0).step(1e-2).check_halving(false);
                let rec = simulate_ct(state(hi, lo), &ModeSource(mode), &util(), &d, &opts).unwrap();
                prop_assert!(rec.delta.iter().all(|&x| x >= -1e-8));
                prop_assert!(rec.delta.iter().all(|&x| x.abs() <= 1.0));
                prop_assert!(rec.times.windows(2).all(|w| w[1] > w[0]));
            }

            #[test]
            fn dt_states_stay_in_range(a in 0.0..=1.0f64, b in 0.0..=1.0f64, mode_ix in 0usize..4) {
                let mode = [PolicyMode::Un, PolicyMode::Aa, PolicyMode::Aa1, PolicyMode::Aa2][mode_ix];
                let d = builtin::appendix_c();
                let rec = dt_trajectory(state(a, b), mode, &util(), &d, 40);
                prop_assert_eq!(rec.state_violations, 0);
                prop_assert!(rec.states.iter().all(|s| (0.0..=1.0).contains(&s.pi_a()) && (0.0..=1.0).contains(&s.pi_b())));
            }
        }
    }
}
