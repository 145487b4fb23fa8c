//! Grid estimates of the contraction constants under the unconstrained,
//! under-acceptance and over-acceptance policies, and the status-quo-bias
//! check.
//!
//! All suprema are taken over nested grids `i / n`, so an estimate at
//! resolution `2n` is never below the estimate at `n`.

use serde::Serialize;

use crate::dynamics::DynamicsSpec;

/// Estimates below `1 - CONTRACTION_MARGIN` count as contractive.
pub const CONTRACTION_MARGIN: f64 = 1e-6;
pub const MIN_RESOLUTION: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ContractionMethod {
    /// Lipschitz constants of the rate maps estimated from the grid; all
    /// results are lower bounds.
    Grid,
    /// Declared Lipschitz constants used; upper bounds are available.
    GridDeclared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionReport {
    pub l_un: f64,
    pub l_aa1: f64,
    pub l_aa2: f64,
    /// Lipschitz constants of `f0` and `f1` that entered the estimates.
    pub l0: f64,
    pub l1: f64,
    pub resolution: usize,
    pub method: ContractionMethod,
    /// Rigorous upper bounds `(l_un, l_aa1, l_aa2)` when constants are declared.
    pub upper_bounds: Option<(f64, f64, f64)>,
    pub contractive_un: bool,
    pub contractive_aa1: bool,
    pub contractive_aa2: bool,
}

/// Clamped `f0` and `f1` on the `(n + 1) x (n + 1)` grid, row-major in `b0`.
struct Tabulated {
    n: usize,
    f0: Vec<f64>,
    f1: Vec<f64>,
}

impl Tabulated {
    fn new(dyn_: &DynamicsSpec, n: usize) -> Self {
        let side = n + 1;
        let mut f0 = Vec::with_capacity(side * side);
        let mut f1 = Vec::with_capacity(side * side);
        for i in 0..side {
            let b0 = i as f64 / n as f64;
            for j in 0..side {
                let b1 = j as f64 / n as f64;
                let r = dyn_.response(b0, b1);
                f0.push(r.f0);
                f1.push(r.f1);
            }
        }
        Self { n, f0, f1 }
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.n + 1) + j
    }

    fn gap(&self, i: usize, j: usize) -> f64 {
        let k = self.idx(i, j);
        (self.f1[k] - self.f0[k]).abs()
    }

    /// Largest axis difference quotient at dyadic spacings of `values`.
    fn lipschitz(&self, values: &[f64]) -> f64 {
        let side = self.n + 1;
        let unit = 1.0 / self.n as f64;
        let mut worst: f64 = 0.0;
        let mut s = 1;
        while s <= self.n {
            let width = s as f64 * unit;
            for i in 0..side {
                for j in 0..side {
                    let here = values[self.idx(i, j)];
                    if i + s < side {
                        worst = worst.max((values[self.idx(i + s, j)] - here).abs() / width);
                    }
                    if j + s < side {
                        worst = worst.max((values[self.idx(i, j + s)] - here).abs() / width);
                    }
                }
            }
            s *= 2;
        }
        worst
    }
}

fn contractive(l: f64) -> bool {
    l < 1.0 - CONTRACTION_MARGIN
}

/// Estimates the three contraction constants on the grid `i / resolution`.
///
/// `resolution` is raised to [`MIN_RESOLUTION`] if smaller.
pub fn estimate_contraction(dyn_: &DynamicsSpec, resolution: usize) -> ContractionReport {
    let n = resolution.max(MIN_RESOLUTION);
    let tab = Tabulated::new(dyn_, n);
    let (l0, l1, method) = match dyn_.declared_lipschitz() {
        Some((l0, l1)) => (l0, l1, ContractionMethod::GridDeclared),
        None => (tab.lipschitz(&tab.f0), tab.lipschitz(&tab.f1), ContractionMethod::Grid),
    };
    let weight = |pi: f64| pi * l1 + (1.0 - pi) * l0;

    let mut l_un: f64 = 0.0;
    let mut l_aa1: f64 = 0.0;
    let mut prefix_gap: f64 = 0.0;
    for i in 0..=n {
        let pi = i as f64 / n as f64;
        let gap = tab.gap(0, i);
        l_aa1 = l_aa1.max(gap);
        prefix_gap = prefix_gap.max(gap);
        l_un = l_un.max(weight(pi) + prefix_gap);
    }

    let mut l_aa2: f64 = 0.0;
    for i in 0..=n {
        let pi = i as f64 / n as f64;
        let base = 2.0 * weight(pi);
        for delta in 0..=i {
            l_aa2 = l_aa2.max(base + tab.gap(delta, i - delta));
        }
    }

    let upper_bounds = (method == ContractionMethod::GridDeclared).then(|| {
        let h = 1.0 / n as f64;
        let slack = (l0 + l1) * 2.0 * h + 2.0 * (l1 - l0).abs() * h;
        (l_un + slack, l_aa1 + slack, l_aa2 + slack)
    });

    ContractionReport {
        l_un,
        l_aa1,
        l_aa2,
        l0,
        l1,
        resolution: n,
        method,
        upper_bounds,
        contractive_un: contractive(l_un),
        contractive_aa1: contractive(l_aa1),
        contractive_aa2: contractive(l_aa2),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StatusQuoBias {
    pub holds: bool,
    /// First grid point `(beta0, beta1)` with `f1 < f0`, scanning `beta0`
    /// in the outer loop.
    pub counterexample: Option<(f64, f64)>,
}

/// Checks `f1 >= f0 - 1e-12` on the grid `i / resolution`.
pub fn check_status_quo_bias(dyn_: &DynamicsSpec, resolution: usize) -> StatusQuoBias {
    let n = resolution.max(MIN_RESOLUTION);
    for i in 0..=n {
        let b0 = i as f64 / n as f64;
        for j in 0..=n {
            let b1 = j as f64 / n as f64;
            let r = dyn_.response(b0, b1);
            if r.f1 < r.f0 - 1e-12 {
                return StatusQuoBias {
                    holds: false,
                    counterexample: Some((b0, b1)),
                };
            }
        }
    }
    StatusQuoBias {
        holds: true,
        counterexample: None,
    }
}
