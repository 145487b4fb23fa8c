//! Scenario files.
//!
//! A scenario is a TOML document of flat `key = value` sections:
//!
//! ```toml
//! name = "cross-basin"
//! mode = "AA"            # UN | AA | AA1 | AA2
//! time = "CT"            # DT | CT
//!
//! [dynamics]
//! builtin = "appendixC"  # or: f0 = "...", f1 = "..." with optional l0, l1
//! params = []
//!
//! [state]
//! piA = 0.9
//! piB = 0.1
//! gA = 0.5
//!
//! [utility]
//! u0 = -1.0
//! u1 = 1.0
//!
//! [horizon]
//! tEnd = 30.0            # CT; DT uses `steps`
//! h = 0.001
//! sampleEvery = 0.1
//!
//! [stereotype]           # optional
//! epsA = 0.0             # or scheduleA = [...]
//! epsB = -0.05
//!
//! [outputs]              # optional
//! resolution = 41
//! ```

use serde::{Deserialize, Serialize};

use crate::dynamics::{builtin, CtOptions, DynamicsSpec, TimeMode};
use crate::model::{PopulationState, UtilitySpec};
use crate::policy::PolicyMode;
use crate::stereotype::{Horizon, StereotypeSpec};

use super::expr::parse_dynamics;
use super::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub mode: PolicyMode,
    pub time: TimeMode,
    pub dynamics: DynamicsSection,
    pub state: StateSection,
    pub utility: UtilitySection,
    pub horizon: HorizonSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stereotype: Option<StereotypeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<OutputsSection>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f0: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l1: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSection {
    #[serde(rename = "piA")]
    pub pi_a: f64,
    #[serde(rename = "piB")]
    pub pi_b: f64,
    #[serde(rename = "gA")]
    pub g_a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilitySection {
    pub u0: f64,
    pub u1: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, rename = "tEnd", skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, rename = "sampleEvery", skip_serializing_if = "Option::is_none")]
    pub sample_every: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StereotypeSection {
    #[serde(default, rename = "epsA", skip_serializing_if = "Option::is_none")]
    pub eps_a: Option<f64>,
    #[serde(default, rename = "epsB", skip_serializing_if = "Option::is_none")]
    pub eps_b: Option<f64>,
    #[serde(default, rename = "scheduleA", skip_serializing_if = "Option::is_none")]
    pub schedule_a: Option<Vec<f64>>,
    #[serde(default, rename = "scheduleB", skip_serializing_if = "Option::is_none")]
    pub schedule_b: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    /// Field grid points per axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
}

/// A scenario with every section turned into library values.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub name: String,
    pub mode: PolicyMode,
    pub time: TimeMode,
    pub dynamics: DynamicsSpec,
    pub state: PopulationState,
    pub utility: UtilitySpec,
    pub horizon: Horizon,
    pub stereotype: Option<StereotypeSpec>,
    pub field_resolution: Option<usize>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Scenario(msg.into())
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| invalid(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario fields are always representable in TOML")
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    fn dynamics_spec(&self) -> Result<DynamicsSpec, CliError> {
        let d = &self.dynamics;
        let spec = match (&d.builtin, &d.f0, &d.f1) {
            (Some(name), None, None) => {
                builtin::by_name(name, d.params.as_deref().unwrap_or(&[])).map_err(|e| invalid(e.to_string()))?
            }
            (None, Some(f0), Some(f1)) => {
                if d.params.is_some() {
                    return Err(invalid("`params` only applies to builtin dynamics"));
                }
                parse_dynamics(f0, f1)?
            }
            _ => {
                return Err(invalid(
                    "[dynamics] needs either `builtin` or both `f0` and `f1`",
                ))
            }
        };
        match (d.l0, d.l1) {
            (Some(l0), Some(l1)) => spec.with_declared_lipschitz(l0, l1).map_err(|e| invalid(e.to_string())),
            (None, None) => Ok(spec),
            _ => Err(invalid("declare both `l0` and `l1` or neither")),
        }
    }

    fn horizon_spec(&self) -> Result<Horizon, CliError> {
        let h = &self.horizon;
        match self.time {
            TimeMode::Discrete => {
                if h.t_end.is_some() || h.h.is_some() || h.sample_every.is_some() {
                    return Err(invalid("DT horizons take only `steps`"));
                }
                h.steps
                    .map(Horizon::Steps)
                    .ok_or_else(|| invalid("DT horizon needs `steps`"))
            }
            TimeMode::Continuous => {
                if h.steps.is_some() {
                    return Err(invalid("CT horizons take `tEnd`, `h` and `sampleEvery`, not `steps`"));
                }
                let t_end = h.t_end.ok_or_else(|| invalid("CT horizon needs `tEnd`"))?;
                let mut opts = CtOptions::new(t_end);
                if let Some(step) = h.h {
                    if !(step > 0.0) {
                        return Err(invalid(format!("step size must be positive, got {step}")));
                    }
                    opts = opts.step(step);
                }
                if let Some(every) = h.sample_every {
                    opts = opts.sample_every(every);
                }
                Ok(Horizon::Continuous(opts))
            }
        }
    }

    fn stereotype_spec(&self) -> Result<Option<StereotypeSpec>, CliError> {
        let Some(s) = &self.stereotype else {
            return Ok(None);
        };
        let spec = match (s.eps_a, s.eps_b, &s.schedule_a, &s.schedule_b) {
            (ea, eb, None, None) => StereotypeSpec::constant(ea.unwrap_or(0.0), eb.unwrap_or(0.0)),
            (None, None, a, b) => {
                let a = a.clone().unwrap_or_else(|| vec![0.0]);
                let b = b.clone().unwrap_or_else(|| vec![0.0]);
                StereotypeSpec::tabulated(a, b).map_err(|e| invalid(e.to_string()))?
            }
            _ => return Err(invalid("use either constant `epsA`/`epsB` or schedules, not both")),
        };
        Ok(Some(spec))
    }

    /// Validates every section and builds the library values.
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.')
        {
            return Err(invalid(format!(
                "scenario name `{}` must be nonempty and use only letters, digits, `-`, `_` or `.`",
                self.name
            )));
        }
        let state = PopulationState::new(self.state.pi_a, self.state.pi_b, self.state.g_a)
            .map_err(|e| invalid(e.to_string()))?;
        let utility = UtilitySpec::new(self.utility.u0, self.utility.u1).map_err(|e| invalid(e.to_string()))?;
        let field_resolution = self.outputs.and_then(|o| o.resolution);
        if field_resolution.is_some_and(|n| n < 2) {
            return Err(invalid("field resolution must be at least 2"));
        }
        Ok(Resolved {
            name: self.name.clone(),
            mode: self.mode,
            time: self.time,
            dynamics: self.dynamics_spec()?,
            state,
            utility,
            horizon: self.horizon_spec()?,
            stereotype: self.stereotype_spec()?,
            field_resolution,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const WORKED_EXAMPLE: &str = r#"
name = "cross-basin"
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
tEnd = 2.0
h = 0.01
sampleEvery = 0.1
"#;

    #[test]
    fn parses_and_resolves() {
        let s = Scenario::from_toml(WORKED_EXAMPLE).unwrap();
        assert_eq!(s.mode, PolicyMode::Aa);
        assert_eq!(s.time, TimeMode::Continuous);
        let r = s.resolve().unwrap();
        assert_eq!(r.dynamics.name(), "appendixC");
        assert!(matches!(r.horizon, Horizon::Continuous(o) if o.step == 0.01 && o.sample_every == Some(0.1)));
        assert!(r.stereotype.is_none());
    }

    #[test]
    fn serialization_round_trips() {
        let s = Scenario::from_toml(WORKED_EXAMPLE).unwrap();
        let once = s.to_toml();
        let back = Scenario::from_toml(&once).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_toml(), once);

        let mut with_all = s.clone();
        with_all.dynamics = DynamicsSection {
            f0: Some("0.2".into()),
            f1: Some("0.8 - 0.1*b1".into()),
            l0: Some(0.0),
            l1: Some(0.1),
            ..Default::default()
        };
        with_all.stereotype = Some(StereotypeSection {
            schedule_a: Some(vec![0.0, -0.01]),
            schedule_b: Some(vec![1e-3]),
            ..Default::default()
        });
        with_all.outputs = Some(OutputsSection { resolution: Some(9) });
        let text = with_all.to_toml();
        let back = Scenario::from_toml(&text).unwrap();
        assert_eq!(back, with_all);
        assert_eq!(back.to_toml(), text);
        assert!(back.resolve().is_ok());
    }

    #[test]
    fn rejects_invalid_sections() {
        let swap = |from: &str, to: &str| Scenario::from_toml(&WORKED_EXAMPLE.replace(from, to));
        assert!(swap("piA = 0.9", "piA = 1.9").unwrap().resolve().is_err());
        assert!(swap("u0 = -1.0", "u0 = 1.0").unwrap().resolve().is_err());
        assert!(swap("builtin = \"appendixC\"", "builtin = \"nope\"").unwrap().resolve().is_err());
        assert!(swap("tEnd = 2.0", "steps = 3").unwrap().resolve().is_err());
        assert!(swap("mode = \"AA\"", "mode = \"XX\"").is_err());
        assert!(swap("gA = 0.5", "gA = 0.5\nextra = 1").is_err());
        let bad_expr = swap("builtin = \"appendixC\"", "f0 = \"b2\"\nf1 = \"1\"").unwrap();
        assert!(matches!(bad_expr.resolve(), Err(CliError::Expression(_))));
        let bad_l = swap("builtin = \"appendixC\"", "f0 = \"0.5*b0\"\nf1 = \"1\"\nl0 = 0.1\nl1 = 0.0").unwrap();
        assert!(bad_l.resolve().is_err());
    }
}
