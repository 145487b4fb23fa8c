//! Built-in dynamics families.

use crate::error::{Error, Result};

use super::DynamicsSpec;

/// Names accepted by [`by_name`].
pub const NAMES: [&str; 4] = ["constant", "affine", "appendixC", "identity"];

/// `f1 == 1`, `f0 == 0`: nobody's qualification ever changes.
pub fn identity() -> DynamicsSpec {
    DynamicsSpec::new("identity", |_, _| 0.0, |_, _| 1.0)
        .with_declared_lipschitz(0.0, 0.0)
        .expect("constant maps have zero Lipschitz constant")
}

/// Rates that ignore the selection rates entirely.
pub fn constant(c0: f64, c1: f64) -> Result<DynamicsSpec> {
    for (name, c) in [("f0", c0), ("f1", c1)] {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::InvalidArgument(format!(
                "constant {name} must lie in [0, 1], got {c}"
            )));
        }
    }
    DynamicsSpec::new("constant", move |_, _| c0, move |_, _| c1).with_declared_lipschitz(0.0, 0.0)
}

/// `intercept + b0_coef * beta0 + b1_coef * beta1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub intercept: f64,
    pub b0_coef: f64,
    pub b1_coef: f64,
}

impl AffineMap {
    pub fn eval(&self, b0: f64, b1: f64) -> f64 {
        self.intercept + self.b0_coef * b0 + self.b1_coef * b1
    }

    /// `l1`-Lipschitz constant of a linear map: the largest coefficient.
    pub fn lipschitz(&self) -> f64 {
        self.b0_coef.abs().max(self.b1_coef.abs())
    }

    fn within_unit_square(&self) -> bool {
        [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]
            .iter()
            .all(|&(x, y)| (0.0..=1.0).contains(&self.eval(x, y)))
    }
}

/// Affine rate maps, rejected unless both stay inside `[0, 1]` on the whole
/// unit square (checked at the corners, which suffices for affine maps).
pub fn affine(f0: AffineMap, f1: AffineMap) -> Result<DynamicsSpec> {
    for (name, m) in [("f0", f0), ("f1", f1)] {
        if !m.within_unit_square() {
            return Err(Error::InvalidArgument(format!(
                "affine {name} leaves [0, 1] on the unit square: {m:?}"
            )));
        }
    }
    DynamicsSpec::new("affine", move |b0, b1| f0.eval(b0, b1), move |b0, b1| f1.eval(b0, b1))
        .with_declared_lipschitz(f0.lipschitz(), f1.lipschitz())
}

/// Three-equilibrium example: an oscillating retention rate over a linear
/// improvement rate. Leaves `[0, 1]` near the top of the square and relies on
/// clamping there.
pub fn appendix_c() -> DynamicsSpec {
    DynamicsSpec::new("appendixC", appendix_c_f0, appendix_c_f1)
}

pub fn appendix_c_f1(b0: f64, b1: f64) -> f64 {
    0.5 * (b1 + b1 / 5.0) / 1.4 + (-0.000000001 * (b0 + b1)).exp() * (18.0 * (b0 + b1)).sin() + 0.1
}

pub fn appendix_c_f0(_b0: f64, b1: f64) -> f64 {
    (b1 + b1 / 5.0) / 1.2 + 0.01
}

/// Looks up a built-in family by name.
///
/// Parameters: `constant` takes `[c0, c1]`; `affine` takes
/// `[a0, k00, k01, a1, k10, k11]` for `f0 = a0 + k00 b0 + k01 b1` and
/// `f1 = a1 + k10 b0 + k11 b1`; the others take none.
pub fn by_name(name: &str, params: &[f64]) -> Result<DynamicsSpec> {
    let expect = |n: usize| {
        if params.len() == n {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "builtin `{name}` takes {n} parameters, got {}",
                params.len()
            )))
        }
    };
    match name {
        "constant" => {
            expect(2)?;
            constant(params[0], params[1])
        }
        "affine" => {
            expect(6)?;
            affine(
                AffineMap {
                    intercept: params[0],
                    b0_coef: params[1],
                    b1_coef: params[2],
                },
                AffineMap {
                    intercept: params[3],
                    b0_coef: params[4],
                    b1_coef: params[5],
                },
            )
        }
        "appendixC" => {
            expect(0)?;
            Ok(appendix_c())
        }
        "identity" => {
            expect(0)?;
            Ok(identity())
        }
        other => Err(Error::InvalidArgument(format!(
            "unknown builtin dynamics `{other}` (known: {})",
            NAMES.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example_values() {
        // f1(0, 0.5) = 0.5 * 0.6 / 1.4 + e^{-5e-10} sin(9) + 0.1
        let expected = 0.3 / 1.4 + (-5e-10f64).exp() * 9f64.sin() + 0.1;
        assert!((appendix_c_f1(0.0, 0.5) - expected).abs() < 1e-15);
        assert!((appendix_c_f0(0.3, 0.5) - 0.51).abs() < 1e-15);
    }

    #[test]
    fn worked_example_clamps_at_the_top() {
        let d = appendix_c();
        assert!(d.raw_f0(0.0, 1.0) > 1.0);
        assert_eq!(d.f0(0.0, 1.0), 1.0);
        assert_eq!(d.response(0.0, 1.0).clamps, 2);
    }

    #[test]
    fn affine_rejects_escaping_maps() {
        let ok = AffineMap { intercept: 0.1, b0_coef: 0.2, b1_coef: 0.3 };
        let bad = AffineMap { intercept: 0.9, b0_coef: 0.2, b1_coef: 0.3 };
        assert!(affine(ok, ok).is_ok());
        assert!(affine(ok, bad).is_err());
        assert_eq!(affine(ok, ok).unwrap().declared_lipschitz(), Some((0.3, 0.3)));
    }

    #[test]
    fn lookup() {
        assert_eq!(by_name("constant", &[0.2, 0.8]).unwrap().f1(0.4, 0.1), 0.8);
        assert!(by_name("constant", &[0.2]).is_err());
        assert!(by_name("spiral", &[]).is_err());
        assert_eq!(by_name("appendixC", &[]).unwrap().name(), "appendixC");
    }
}
