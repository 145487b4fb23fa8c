//! One-step utility-maximizing selection policies.
//!
//! The unconstrained optimum selects exactly the qualified. Under demographic
//! parity the optimum takes one of two closed forms depending only on the
//! advantaged group's share and the utilities: under-acceptance (`Aa1`), which
//! rations the advantaged group's qualified, or over-acceptance (`Aa2`), which
//! admits unqualified members of the disadvantaged group. [`lp_oracle`] solves
//! the same problems by brute-force vertex enumeration and exists to check the
//! closed forms.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{utility, Group, Policy, PopulationState, UtilitySpec};

/// Which closed form produced a policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseTag {
    Un,
    Aa1,
    Aa2,
}

impl CaseTag {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseTag::Un => "UN",
            CaseTag::Aa1 => "AA1",
            CaseTag::Aa2 => "AA2",
        }
    }
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Sign of `g_adv * u1 + (1 - g_adv) * u0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AaKind {
    /// Strictly negative.
    Aa1,
    /// Strictly positive.
    Aa2,
    /// Exactly zero; both closed forms are optimal.
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AaCase {
    pub kind: AaKind,
    pub advantaged: Group,
}

impl AaCase {
    /// Boundary resolves to over-acceptance.
    pub fn resolved(&self) -> CaseTag {
        match self.kind {
            AaKind::Aa1 => CaseTag::Aa1,
            AaKind::Aa2 | AaKind::Boundary => CaseTag::Aa2,
        }
    }
}

/// How a trajectory recomputes its policy at each state.
///
/// `Aa` picks the optimal parity case from the current state; `Aa1` and `Aa2`
/// force one closed form regardless of optimality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyMode {
    #[serde(rename = "UN")]
    Un,
    #[serde(rename = "AA")]
    Aa,
    #[serde(rename = "AA1")]
    Aa1,
    #[serde(rename = "AA2")]
    Aa2,
}

impl PolicyMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyMode::Un => "UN",
            PolicyMode::Aa => "AA",
            PolicyMode::Aa1 => "AA1",
            PolicyMode::Aa2 => "AA2",
        }
    }

    pub fn is_parity_constrained(self) -> bool {
        !matches!(self, PolicyMode::Un)
    }
}

impl fmt::Display for PolicyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "UN" => Ok(PolicyMode::Un),
            "AA" => Ok(PolicyMode::Aa),
            "AA1" => Ok(PolicyMode::Aa1),
            "AA2" => Ok(PolicyMode::Aa2),
            other => Err(format!("unknown policy mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicySolution {
    pub policy: Policy,
    pub case: CaseTag,
    pub achieved_utility: f64,
}

impl PolicySolution {
    fn new(state: &PopulationState, u: &UtilitySpec, policy: Policy, case: CaseTag) -> Self {
        Self {
            policy,
            case,
            achieved_utility: utility(state, &policy, u),
        }
    }
}

pub fn unconstrained_policy(state: &PopulationState, u: &UtilitySpec) -> PolicySolution {
    PolicySolution::new(state, u, Policy::unconstrained(), CaseTag::Un)
}

pub fn determine_aa_case(state: &PopulationState, u: &UtilitySpec) -> AaCase {
    let advantaged = state.advantaged();
    let g = state.share(advantaged);
    let s = g * u.u1() + (1.0 - g) * u.u0();
    let kind = if s < 0.0 {
        AaKind::Aa1
    } else if s > 0.0 {
        AaKind::Aa2
    } else {
        AaKind::Boundary
    };
    AaCase { kind, advantaged }
}

fn assemble(adv: Group, tau1_adv: f64, tau0_adv: f64, tau1_dis: f64, tau0_dis: f64) -> Policy {
    match adv {
        Group::A => Policy::from_parts([tau1_adv, tau1_dis], [tau0_adv, tau0_dis]),
        Group::B => Policy::from_parts([tau1_dis, tau1_adv], [tau0_dis, tau0_adv]),
    }
}

/// Under-acceptance: select `pi_dis / pi_adv` of the advantaged qualified.
pub fn under_acceptance_policy(state: &PopulationState) -> Policy {
    let adv = state.advantaged();
    let pa = state.pi(adv);
    let pd = state.pi(adv.other());
    // pa == 0 forces pd == 0; any rate is parity-feasible.
    let tau1_adv = if pa > 0.0 { (pd / pa).min(1.0) } else { 1.0 };
    assemble(adv, tau1_adv, 0.0, 1.0, 0.0)
}

/// Over-acceptance: admit enough unqualified of the disadvantaged group to
/// match the advantaged group's rate.
pub fn over_acceptance_policy(state: &PopulationState) -> Policy {
    let adv = state.advantaged();
    let pa = state.pi(adv);
    let pd = state.pi(adv.other());
    // pd == 1 forces pa == 1; nothing left to admit.
    let tau0_dis = if pd < 1.0 {
        ((pa - pd) / (1.0 - pd)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    assemble(adv, 1.0, 0.0, 1.0, tau0_dis)
}

/// Optimal policy under demographic parity.
pub fn aa_policy(state: &PopulationState, u: &UtilitySpec) -> PolicySolution {
    let case = determine_aa_case(state, u).resolved();
    let policy = match case {
        CaseTag::Aa1 => under_acceptance_policy(state),
        _ => over_acceptance_policy(state),
    };
    PolicySolution::new(state, u, policy, case)
}

/// Policy and case tag for `mode` at `state`.
pub fn policy_for_mode(mode: PolicyMode, state: &PopulationState, u: &UtilitySpec) -> (Policy, CaseTag) {
    match mode {
        PolicyMode::Un => (Policy::unconstrained(), CaseTag::Un),
        PolicyMode::Aa => {
            let sol = aa_policy(state, u);
            (sol.policy, sol.case)
        }
        PolicyMode::Aa1 => (under_acceptance_policy(state), CaseTag::Aa1),
        PolicyMode::Aa2 => (over_acceptance_policy(state), CaseTag::Aa2),
    }
}

const VERTEX_TOL: f64 = 1e-12;

/// Maximizes utility over `[0,1]^4`, optionally subject to parity, by
/// enumerating every basic feasible solution.
///
/// Variables are ordered `(tau1A, tau1B, tau0A, tau0B)`. Among optimal
/// vertices the one with the largest `tau1` entries and smallest `tau0`
/// entries (lexicographically) wins.
pub fn lp_oracle(state: &PopulationState, u: &UtilitySpec, parity: bool) -> PolicySolution {
    let (pa, pb) = (state.pi_a(), state.pi_b());
    let (ga, gb) = (state.share(Group::A), state.share(Group::B));
    let c = [
        ga * u.u1() * pa,
        gb * u.u1() * pb,
        ga * u.u0() * (1.0 - pa),
        gb * u.u0() * (1.0 - pb),
    ];
    let row = [pa, -pb, 1.0 - pa, -(1.0 - pb)];
    let dot = |a: &[f64; 4], x: &[f64; 4]| a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>();

    let mut candidates: Vec<[f64; 4]> = Vec::with_capacity(48);
    for mask in 0u32..16 {
        let x: [f64; 4] = std::array::from_fn(|i| f64::from((mask >> i) & 1));
        if !parity || dot(&row, &x).abs() <= VERTEX_TOL {
            candidates.push(x);
        }
    }
    if parity {
        for free in 0..4 {
            if row[free].abs() <= f64::EPSILON {
                continue;
            }
            for mask in 0u32..8 {
                let mut x = [0.0; 4];
                let mut bit = 0;
                for (i, xi) in x.iter_mut().enumerate() {
                    if i != free {
                        *xi = f64::from((mask >> bit) & 1);
                        bit += 1;
                    }
                }
                let rest: f64 = (0..4).filter(|&i| i != free).map(|i| row[i] * x[i]).sum();
                let value = -rest / row[free];
                if (-VERTEX_TOL..=1.0 + VERTEX_TOL).contains(&value) {
                    x[free] = value.clamp(0.0, 1.0);
                    candidates.push(x);
                }
            }
        }
    }

    let best = candidates
        .iter()
        .map(|x| dot(&c, x))
        .fold(f64::NEG_INFINITY, f64::max);
    let preference = |x: &[f64; 4]| [-x[0], -x[1], x[2], x[3]];
    let chosen = candidates
        .iter()
        .filter(|x| dot(&c, x) >= best - VERTEX_TOL)
        .min_by(|a, b| {
            preference(a)
                .partial_cmp(&preference(b))
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .copied()
        .unwrap_or([0.0; 4]);

    let policy = Policy::from_parts([chosen[0], chosen[1]], [chosen[2], chosen[3]]);
    let case = if parity {
        determine_aa_case(state, u).resolved()
    } else {
        CaseTag::Un
    };
    PolicySolution::new(state, u, policy, case)
}
