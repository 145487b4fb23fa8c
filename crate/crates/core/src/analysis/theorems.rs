//! Convergence envelopes and verdicts on the equality and utility
//! conditions.

use serde::Serialize;

use crate::dynamics::{simulate_ct, CtOptions, DynamicsSpec, ModeSource, TimeMode};
use crate::error::{Error, Result};
use crate::model::{utility, PopulationState, UtilitySpec};
use crate::policy::{policy_for_mode, PolicyMode};

use super::equilibria::{find_equilibria, EquilibriumAtlas};

/// `(lower, upper)` envelope for the gap between groups at time `t`, starting
/// from gap (or, in discrete time, maximal initial deviation) `delta0`.
///
/// Continuous: `delta0 e^{-t(1+L)}` to `delta0 e^{-t(1-L)}`.
/// Discrete: `0` to `2 delta0 L^t`.
pub fn delta_bounds(l: f64, delta0: f64, t: f64, mode: TimeMode) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&l) {
        return Err(Error::NotContractive(l));
    }
    if !(delta0 >= 0.0 && t >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gap and time must be nonnegative, got delta0 = {delta0}, t = {t}"
        )));
    }
    Ok(match mode {
        TimeMode::Continuous => (delta0 * (-t * (1.0 + l)).exp(), delta0 * (-t * (1.0 - l)).exp()),
        TimeMode::Discrete => (0.0, 2.0 * delta0 * l.powf(t)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Theorem2Verdict {
    pub alpha: f64,
    /// `l_un >= 1 - alpha`.
    pub lower_ok: bool,
    /// `1 + (l_un - 1) / alpha`; negative infinity when `alpha == 0`.
    pub upper_threshold: f64,
    /// `l_aa2 <= upper_threshold`; false when `alpha == 0`.
    pub upper_ok: bool,
    /// Both conditions hold and both constants are below 1.
    pub applies: bool,
}

/// Evaluates when over-acceptance beats the unconstrained policy in
/// long-run continuous-time utility.
pub fn theorem2_verdict(l_un: f64, l_aa2: f64, g_a: f64, u: &UtilitySpec) -> Result<Theorem2Verdict> {
    let num = (1.0 - g_a) * u.u1();
    let den = num + u.u0().abs();
    if den <= 0.0 {
        return Err(Error::InvalidArgument(
            "alpha is undefined when u1 and u0 are both zero".into(),
        ));
    }
    let alpha = num / den;
    let lower_ok = l_un >= 1.0 - alpha;
    let (upper_threshold, upper_ok) = if alpha > 0.0 {
        let th = 1.0 + (l_un - 1.0) / alpha;
        (th, l_aa2 <= th)
    } else {
        (f64::NEG_INFINITY, false)
    };
    Ok(Theorem2Verdict {
        alpha,
        lower_ok,
        upper_threshold,
        upper_ok,
        applies: lower_ok && upper_ok && l_un < 1.0 && l_aa2 < 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Persistence {
    /// Under-acceptance is optimal whichever group is advantaged.
    AlwaysAa1,
    /// Over-acceptance is optimal whichever group is advantaged.
    AlwaysAa2,
    /// Both sufficient conditions hold: every share-weighted sum is zero.
    Both,
    /// An advantage swap may switch the case.
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PersistenceRecord {
    /// `g_j u1 + (1 - g_j) u0` for `j = A, B`.
    pub weighted_a: f64,
    pub weighted_b: f64,
    pub always_aa1: bool,
    pub always_aa2: bool,
    pub outcome: Persistence,
}

/// Checks whether the parity case is fixed regardless of which group is
/// advantaged.
pub fn prop3_case_persistence(g_a: f64, u: &UtilitySpec) -> PersistenceRecord {
    let weighted = |g: f64| g * u.u1() + (1.0 - g) * u.u0();
    let (wa, wb) = (weighted(g_a), weighted(1.0 - g_a));
    let always_aa1 = wa <= 0.0 && wb <= 0.0;
    let always_aa2 = wa >= 0.0 && wb >= 0.0;
    let outcome = match (always_aa1, always_aa2) {
        (true, true) => Persistence::Both,
        (true, false) => Persistence::AlwaysAa1,
        (false, true) => Persistence::AlwaysAa2,
        (false, false) => Persistence::Neither,
    };
    PersistenceRecord {
        weighted_a: wa,
        weighted_b: wb,
        always_aa1,
        always_aa2,
        outcome,
    }
}

/// Integration settings for limit runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitOptions {
    pub t_end: f64,
    pub step: f64,
    /// Stop once `max |d pi / dt|` is below this.
    pub stationary_tol: f64,
    /// Tolerance for matching limits to equilibria.
    pub match_tol: f64,
}

impl Default for LimitOptions {
    fn default() -> Self {
        Self {
            t_end: 1000.0,
            step: 5e-3,
            stationary_tol: 1e-10,
            match_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeLimit {
    pub mode: PolicyMode,
    pub limit: (f64, f64),
    pub converged: bool,
    /// Time of the stationary stop, or the cap.
    pub time: f64,
    pub equalized: bool,
    pub utility_at_limit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Check {
    Pass,
    Fail,
    NotConverged,
    /// The check's premise does not hold (e.g. over-acceptance never
    /// equalized, or a start sits on a delimiter).
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitComparison {
    pub un: ModeLimit,
    pub aa1: ModeLimit,
    pub aa2: ModeLimit,
    /// Equilibria of the basins holding each group's start.
    pub basin_limits: (Option<f64>, Option<f64>),
    /// Unconstrained limit equals the pair of basin equilibria.
    pub un_check: Check,
    /// Under-acceptance limit equals the disadvantaged group's equilibrium.
    pub aa1_check: Check,
    /// Over-acceptance limit equals the advantaged group's equilibrium.
    pub aa2_check: Check,
    /// `U(AA1) <= U(UN) <= U(AA2) + 1e-9` at the limits.
    pub ordering_check: Check,
}

fn run_to_limit(
    dyn_: &DynamicsSpec,
    state0: PopulationState,
    u: &UtilitySpec,
    mode: PolicyMode,
    opts: &LimitOptions,
) -> Result<ModeLimit> {
    let ct = CtOptions::new(opts.t_end)
        .step(opts.step)
        .sample_every(opts.t_end.max(opts.step))
        .check_halving(false)
        .stop_when_stationary(opts.stationary_tol);
    let rec = simulate_ct(state0, &ModeSource(mode), u, dyn_, &ct)?;
    let end = rec.final_state();
    let (policy, _) = policy_for_mode(mode, &end, u);
    Ok(ModeLimit {
        mode,
        limit: (end.pi_a(), end.pi_b()),
        converged: rec.stationary_at.is_some(),
        time: *rec.times.last().expect("records always hold the initial state"),
        equalized: end.delta().abs() < opts.match_tol,
        utility_at_limit: utility(&end, &policy, u),
    })
}

fn near(x: (f64, f64), target: (f64, f64), tol: f64) -> bool {
    (x.0 - target.0).abs() <= tol && (x.1 - target.1).abs() <= tol
}

/// Runs the unconstrained, under-acceptance and over-acceptance policies to
/// their continuous-time limits and checks them against the basin structure.
///
/// Errors unless the continuous-time atlas is a valid k-equilibrium atlas.
pub fn theorem4_limits(
    dyn_: &DynamicsSpec,
    state0: PopulationState,
    u: &UtilitySpec,
    opts: &LimitOptions,
) -> Result<LimitComparison> {
    let atlas = find_equilibria(dyn_, TimeMode::Continuous);
    theorem4_limits_with_atlas(dyn_, &atlas, state0, u, opts)
}

pub fn theorem4_limits_with_atlas(
    dyn_: &DynamicsSpec,
    atlas: &EquilibriumAtlas,
    state0: PopulationState,
    u: &UtilitySpec,
    opts: &LimitOptions,
) -> Result<LimitComparison> {
    if !atlas.k_valid || atlas.time_mode != TimeMode::Continuous {
        return Err(Error::InvalidArgument(
            "limit comparison needs a valid continuous-time k-equilibrium atlas".into(),
        ));
    }
    let un = run_to_limit(dyn_, state0, u, PolicyMode::Un, opts)?;
    let aa1 = run_to_limit(dyn_, state0, u, PolicyMode::Aa1, opts)?;
    let aa2 = run_to_limit(dyn_, state0, u, PolicyMode::Aa2, opts)?;

    let ea = atlas.limit_of(state0.pi_a());
    let eb = atlas.limit_of(state0.pi_b());
    let adv = state0.advantaged();
    let (e_adv, e_dis) = match adv {
        crate::model::Group::A => (ea, eb),
        crate::model::Group::B => (eb, ea),
    };
    let tol = opts.match_tol;

    let un_check = match (un.converged, ea, eb) {
        (false, _, _) => Check::NotConverged,
        (true, Some(a), Some(b)) => pass(near(un.limit, (a, b), tol)),
        _ => Check::NotApplicable,
    };
    let aa1_check = match (aa1.converged, e_dis) {
        (false, _) => Check::NotConverged,
        (true, Some(e)) => pass(near(aa1.limit, (e, e), tol)),
        _ => Check::NotApplicable,
    };
    let aa2_check = match (aa2.converged, aa2.equalized, e_adv) {
        (false, _, _) => Check::NotConverged,
        (true, true, Some(e)) => pass(near(aa2.limit, (e, e), tol)),
        _ => Check::NotApplicable,
    };
    let ordering_check = if !(un.converged && aa1.converged && aa2.converged) {
        Check::NotConverged
    } else if !aa2.equalized {
        Check::NotApplicable
    } else {
        pass(
            aa1.utility_at_limit <= un.utility_at_limit + 1e-9
                && un.utility_at_limit <= aa2.utility_at_limit + 1e-9,
        )
    };
    Ok(LimitComparison {
        un,
        aa1,
        aa2,
        basin_limits: (ea, eb),
        un_check,
        aa1_check,
        aa2_check,
        ordering_check,
    })
}

fn pass(ok: bool) -> Check {
    if ok {
        Check::Pass
    } else {
        Check::Fail
    }
}
