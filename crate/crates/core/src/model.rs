//! Domain types shared by every other module: qualification profiles, the
//! two-group population, utilities, selection policies and the selection
//! rates they induce.
//!
//! All values are immutable `Copy` types; constructors validate the range
//! invariants and the accessors never hand out a way to break them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default absolute tolerance for comparing utilities.
pub const UTILITY_TOL: f64 = 1e-9;
/// Default absolute tolerance for comparing probabilities and rates.
pub const PROB_TOL: f64 = 1e-12;

/// Group label. Only two groups are modeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    A,
    B,
}

impl Group {
    pub const BOTH: [Group; 2] = [Group::A, Group::B];

    pub fn other(self) -> Group {
        match self {
            Group::A => Group::B,
            Group::B => Group::A,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Group::A => 0,
            Group::B => 1,
        }
    }

    pub fn label(self) -> char {
        match self {
            Group::A => 'A',
            Group::B => 'B',
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// Fraction of a group evaluated as qualified (`v = 1`).
///
/// The unqualified fraction is always derived as `1 - p1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct QualificationProfile(f64);

impl QualificationProfile {
    pub fn new(p1: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&p1) {
            Ok(Self(p1))
        } else {
            Err(Error::InvalidProfile(p1))
        }
    }

    /// Clamps into `[0, 1]`. NaN maps to 0.
    pub(crate) fn clamped(p1: f64) -> Self {
        if p1.is_nan() {
            Self(0.0)
        } else {
            Self(p1.clamp(0.0, 1.0))
        }
    }

    pub fn p1(self) -> f64 {
        self.0
    }

    pub fn p0(self) -> f64 {
        1.0 - self.0
    }

    /// Mass for evaluation `v` (`true` = qualified).
    pub fn mass(self, qualified: bool) -> f64 {
        if qualified {
            self.p1()
        } else {
            self.p0()
        }
    }
}

/// Qualification profiles of both groups together with group A's share of
/// the population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationState {
    profiles: [QualificationProfile; 2],
    g_a: f64,
}

impl PopulationState {
    pub fn new(pi_a: f64, pi_b: f64, g_a: f64) -> Result<Self> {
        let a = QualificationProfile::new(pi_a)?;
        let b = QualificationProfile::new(pi_b)?;
        Self::from_profiles(a, b, g_a)
    }

    pub fn from_profiles(
        a: QualificationProfile,
        b: QualificationProfile,
        g_a: f64,
    ) -> Result<Self> {
        if !(g_a > 0.0 && g_a < 1.0) {
            return Err(Error::InvalidShare(g_a));
        }
        Ok(Self {
            profiles: [a, b],
            g_a,
        })
    }

    /// Builds a state from raw values that may have drifted marginally out of
    /// range (integrator stages); profiles are clamped, the share is trusted.
    pub(crate) fn clamped(pi_a: f64, pi_b: f64, g_a: f64) -> Self {
        Self {
            profiles: [
                QualificationProfile::clamped(pi_a),
                QualificationProfile::clamped(pi_b),
            ],
            g_a,
        }
    }

    pub fn profile(&self, g: Group) -> QualificationProfile {
        self.profiles[g.index()]
    }

    pub fn pi(&self, g: Group) -> f64 {
        self.profiles[g.index()].p1()
    }

    pub fn pi_a(&self) -> f64 {
        self.pi(Group::A)
    }

    pub fn pi_b(&self) -> f64 {
        self.pi(Group::B)
    }

    pub fn share(&self, g: Group) -> f64 {
        match g {
            Group::A => self.g_a,
            Group::B => 1.0 - self.g_a,
        }
    }

    pub fn g_a(&self) -> f64 {
        self.g_a
    }

    /// `pi(1|A) - pi(1|B)`.
    pub fn delta(&self) -> f64 {
        self.pi_a() - self.pi_b()
    }

    /// Group with the larger qualified fraction; ties go to A.
    pub fn advantaged(&self) -> Group {
        if self.pi_a() >= self.pi_b() {
            Group::A
        } else {
            Group::B
        }
    }

    /// Same population with the group labels exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            profiles: [self.profiles[1], self.profiles[0]],
            g_a: 1.0 - self.g_a,
        }
    }

    pub fn with_profiles(&self, pi_a: f64, pi_b: f64) -> Result<Self> {
        Self::new(pi_a, pi_b, self.g_a)
    }
}

/// Institutional utility per evaluation: `u0` for selecting an unqualified
/// individual, `u1` for a qualified one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilitySpec {
    u0: f64,
    u1: f64,
}

impl UtilitySpec {
    pub fn new(u0: f64, u1: f64) -> Result<Self> {
        if u0.is_finite() && u1.is_finite() && u0 <= 0.0 && u1 >= 0.0 {
            Ok(Self { u0, u1 })
        } else {
            Err(Error::InvalidUtility { u0, u1 })
        }
    }

    pub fn u0(&self) -> f64 {
        self.u0
    }

    pub fn u1(&self) -> f64 {
        self.u1
    }

    pub fn value(&self, qualified: bool) -> f64 {
        if qualified {
            self.u1
        } else {
            self.u0
        }
    }
}

/// Selection probabilities `tau(v; j)` for each evaluation and group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Policy {
    tau1: [f64; 2],
    tau0: [f64; 2],
}

impl Policy {
    pub fn new(tau1_a: f64, tau0_a: f64, tau1_b: f64, tau0_b: f64) -> Result<Self> {
        let entries = [
            ("tau(1;A)", tau1_a),
            ("tau(0;A)", tau0_a),
            ("tau(1;B)", tau1_b),
            ("tau(0;B)", tau0_b),
        ];
        for (entry, value) in entries {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidPolicy { entry, value });
            }
        }
        Ok(Self {
            tau1: [tau1_a, tau1_b],
            tau0: [tau0_a, tau0_b],
        })
    }

    /// Builds a policy from formula outputs that are in range by construction.
    pub(crate) fn from_parts(tau1: [f64; 2], tau0: [f64; 2]) -> Self {
        debug_assert!(tau1
            .iter()
            .chain(tau0.iter())
            .all(|t| (0.0..=1.0).contains(t)));
        Self { tau1, tau0 }
    }

    /// Select every qualified individual and nobody else.
    pub fn unconstrained() -> Self {
        Self {
            tau1: [1.0, 1.0],
            tau0: [0.0, 0.0],
        }
    }

    pub fn zero() -> Self {
        Self {
            tau1: [0.0, 0.0],
            tau0: [0.0, 0.0],
        }
    }

    pub fn tau(&self, qualified: bool, g: Group) -> f64 {
        if qualified {
            self.tau1[g.index()]
        } else {
            self.tau0[g.index()]
        }
    }

    pub fn tau1(&self, g: Group) -> f64 {
        self.tau1[g.index()]
    }

    pub fn tau0(&self, g: Group) -> f64 {
        self.tau0[g.index()]
    }

    /// Entries in the order `(tau1A, tau1B, tau0A, tau0B)`.
    pub fn as_array(&self) -> [f64; 4] {
        [self.tau1[0], self.tau1[1], self.tau0[0], self.tau0[1]]
    }

    pub fn swapped(&self) -> Self {
        Self {
            tau1: [self.tau1[1], self.tau1[0]],
            tau0: [self.tau0[1], self.tau0[0]],
        }
    }
}

/// Selection rates of one group: `beta(0)` and `beta(1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupRates {
    pub beta0: f64,
    pub beta1: f64,
}

impl GroupRates {
    pub fn aggregate(&self) -> f64 {
        self.beta0 + self.beta1
    }
}

/// Per-evaluation and aggregate selection rates for both groups.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionRates {
    groups: [GroupRates; 2],
}

impl SelectionRates {
    pub fn group(&self, g: Group) -> GroupRates {
        self.groups[g.index()]
    }

    pub fn beta(&self, qualified: bool, g: Group) -> f64 {
        let r = self.groups[g.index()];
        if qualified {
            r.beta1
        } else {
            r.beta0
        }
    }

    pub fn aggregate(&self, g: Group) -> f64 {
        self.groups[g.index()].aggregate()
    }

    /// `|beta(A) - beta(B)|`; zero exactly when demographic parity holds.
    pub fn parity_residual(&self) -> f64 {
        (self.aggregate(Group::A) - self.aggregate(Group::B)).abs()
    }

    /// `|beta(1;A) - beta(1;B)|`.
    pub fn qualified_gap(&self) -> f64 {
        (self.groups[0].beta1 - self.groups[1].beta1).abs()
    }
}

pub fn selection_rates(state: &PopulationState, policy: &Policy) -> SelectionRates {
    let rates = |g: Group| {
        let p = state.profile(g);
        GroupRates {
            beta0: policy.tau0(g) * p.p0(),
            beta1: policy.tau1(g) * p.p1(),
        }
    };
    SelectionRates {
        groups: [rates(Group::A), rates(Group::B)],
    }
}

/// Average institutional utility of `policy` over the whole population.
pub fn utility(state: &PopulationState, policy: &Policy, u: &UtilitySpec) -> f64 {
    Group::BOTH
        .iter()
        .map(|&g| {
            let p = state.profile(g);
            let per_group = u.u1() * policy.tau1(g) * p.p1() + u.u0() * policy.tau0(g) * p.p0();
            state.share(g) * per_group
        })
        .sum()
}
