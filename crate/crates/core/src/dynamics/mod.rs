//! Influence dynamics: how each group's qualified fraction responds to the
//! selection rates it experiences.
//!
//! A [`DynamicsSpec`] holds two rate maps over `(beta0, beta1)`: `f1`, the
//! probability that a qualified individual stays qualified, and `f0`, the
//! probability that an unqualified one becomes qualified. Outputs are clamped
//! to `[0, 1]` and every clamp is counted.

pub mod builtin;
pub mod trajectory;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GroupRates, QualificationProfile};

pub use trajectory::{
    ct_derivative, ct_integrate, cumulative_utility_with_tail, dt_trajectory, simulate_ct,
    simulate_dt, CtOptions, Event, EventKind, HalvingCheck, ModeSource, PolicySource,
    TrajectoryRecord,
};

/// A rate map over `(beta0, beta1)`.
pub type RateMap = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Discrete steps or continuous time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TimeMode {
    #[serde(rename = "DT")]
    Discrete,
    #[serde(rename = "CT")]
    Continuous,
}

impl TimeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TimeMode::Discrete => "DT",
            TimeMode::Continuous => "CT",
        }
    }
}

impl fmt::Display for TimeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Side length of the grid used to validate declared Lipschitz constants.
pub const LIPSCHITZ_VALIDATION_GRID: usize = 256;
const LIPSCHITZ_SLACK: f64 = 1e-6;

/// Clamped responses at one rate pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Response {
    pub f0: f64,
    pub f1: f64,
    /// Number of the two outputs that left `[0, 1]` (0..=2).
    pub clamps: u32,
}

#[derive(Clone)]
pub struct DynamicsSpec {
    name: String,
    f0: RateMap,
    f1: RateMap,
    declared: Option<(f64, f64)>,
}

impl fmt::Debug for DynamicsSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DynamicsSpec")
            .field("name", &self.name)
            .field("declared", &self.declared)
            .finish_non_exhaustive()
    }
}

fn clamp_unit(x: f64) -> (f64, bool) {
    // NaN clamps to 0.
    if x.is_nan() || x < 0.0 {
        (0.0, true)
    } else if x > 1.0 {
        (1.0, true)
    } else {
        (x, false)
    }
}

impl DynamicsSpec {
    pub fn new<F0, F1>(name: impl Into<String>, f0: F0, f1: F1) -> Self
    where
        F0: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        F1: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            f0: Arc::new(f0),
            f1: Arc::new(f1),
            declared: None,
        }
    }

    pub fn from_maps(name: impl Into<String>, f0: RateMap, f1: RateMap) -> Self {
        Self {
            name: name.into(),
            f0,
            f1,
            declared: None,
        }
    }

    /// Attaches `l1`-Lipschitz constants for `f0` and `f1` after checking them
    /// against axis finite differences on a 256 x 256 grid.
    pub fn with_declared_lipschitz(mut self, l0: f64, l1: f64) -> Result<Self> {
        for (map, declared) in [("f0", l0), ("f1", l1)] {
            if !(declared.is_finite() && declared >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "Lipschitz constant for {map} must be finite and nonnegative, got {declared}"
                )));
            }
        }
        let n = LIPSCHITZ_VALIDATION_GRID;
        let observed0 = self.sampled_lipschitz(false, n);
        let observed1 = self.sampled_lipschitz(true, n);
        if observed0 > l0 + LIPSCHITZ_SLACK {
            return Err(Error::LipschitzViolation {
                map: "f0",
                declared: l0,
                observed: observed0,
            });
        }
        if observed1 > l1 + LIPSCHITZ_SLACK {
            return Err(Error::LipschitzViolation {
                map: "f1",
                declared: l1,
                observed: observed1,
            });
        }
        self.declared = Some((l0, l1));
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Declared `(L0, L1)`, if any.
    pub fn declared_lipschitz(&self) -> Option<(f64, f64)> {
        self.declared
    }

    pub fn raw_f0(&self, b0: f64, b1: f64) -> f64 {
        (self.f0)(b0, b1)
    }

    pub fn raw_f1(&self, b0: f64, b1: f64) -> f64 {
        (self.f1)(b0, b1)
    }

    pub fn f0(&self, b0: f64, b1: f64) -> f64 {
        clamp_unit(self.raw_f0(b0, b1)).0
    }

    pub fn f1(&self, b0: f64, b1: f64) -> f64 {
        clamp_unit(self.raw_f1(b0, b1)).0
    }

    pub fn response(&self, b0: f64, b1: f64) -> Response {
        let (f0, c0) = clamp_unit(self.raw_f0(b0, b1));
        let (f1, c1) = clamp_unit(self.raw_f1(b0, b1));
        Response {
            f0,
            f1,
            clamps: u32::from(c0) + u32::from(c1),
        }
    }

    /// One-dimensional map a group follows under the unconstrained policy:
    /// `pi * f1(0, pi) + (1 - pi) * f0(0, pi)`.
    pub fn unconstrained_map(&self, pi: f64) -> f64 {
        pi * self.f1(0.0, pi) + (1.0 - pi) * self.f0(0.0, pi)
    }

    /// Largest axis finite-difference ratio of the clamped `f1` (or `f0`) on
    /// an `n x n` grid with unit spacing `1 / (n - 1)`.
    pub fn sampled_lipschitz(&self, retention: bool, n: usize) -> f64 {
        let n = n.max(2);
        let h = 1.0 / (n - 1) as f64;
        let eval = |i: usize, j: usize| {
            let (x, y) = (i as f64 * h, j as f64 * h);
            if retention {
                self.f1(x, y)
            } else {
                self.f0(x, y)
            }
        };
        let values: Vec<f64> = (0..n * n).map(|k| eval(k / n, k % n)).collect();
        let at = |i: usize, j: usize| values[i * n + j];
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i + 1 < n {
                    worst = worst.max((at(i + 1, j) - at(i, j)).abs() / h);
                }
                if j + 1 < n {
                    worst = worst.max((at(i, j + 1) - at(i, j)).abs() / h);
                }
            }
        }
        worst
    }
}

/// Outcome of one discrete update of a single group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub profile: QualificationProfile,
    pub clamps: u32,
    /// The convex combination left `[0, 1]` before the final clamp.
    pub out_of_range: bool,
}

/// `p1' = clamp(p1 * f1 + (1 - p1) * f0)` with both maps evaluated at the
/// group's own selection rates.
pub fn dt_step(profile: QualificationProfile, rates: GroupRates, dyn_: &DynamicsSpec) -> QualificationProfile {
    dt_step_counted(profile, rates, dyn_).profile
}

pub fn dt_step_counted(profile: QualificationProfile, rates: GroupRates, dyn_: &DynamicsSpec) -> StepOutcome {
    let r = dyn_.response(rates.beta0, rates.beta1);
    let p = profile.p1();
    let next = p * r.f1 + (1.0 - p) * r.f0;
    StepOutcome {
        profile: QualificationProfile::clamped(next),
        clamps: r.clamps,
        out_of_range: !(0.0..=1.0).contains(&next),
    }
}
