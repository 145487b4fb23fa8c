//! Fixed points of the one-dimensional unconstrained map and their
//! classification into attracting equilibria and unstable delimiters.

use serde::Serialize;

use crate::dynamics::{DynamicsSpec, TimeMode};

pub const DEFAULT_SCAN_CELLS: usize = 4096;
const BISECTION_TOL: f64 = 1e-12;
const DEGENERATE_TOL: f64 = 1e-12;
const DERIVATIVE_STEP: f64 = 1e-6;
/// Candidate neighborhood radii for the local rate, largest first.
const RADII: [f64; 7] = [0.05, 0.02, 0.01, 0.005, 0.002, 0.001, 1e-4];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AttractingPoint {
    pub value: f64,
    pub derivative: f64,
    /// Largest `|f'|` sampled on `[value - radius, value + radius]`.
    pub local_rate: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UnstablePoint {
    pub value: f64,
    pub derivative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumAtlas {
    pub time_mode: TimeMode,
    pub attracting: Vec<AttractingPoint>,
    pub unstable: Vec<UnstablePoint>,
    /// The sampled map satisfies the k-equilibrium conditions for
    /// `time_mode`.
    pub k_valid: bool,
    /// Some scan cell had `|f(pi) - pi|` below `1e-12` throughout.
    pub degenerate: bool,
    pub scan_cells: usize,
}

impl EquilibriumAtlas {
    /// Unstable points strictly between the first and last attracting point.
    pub fn delimiters(&self) -> Vec<f64> {
        let (Some(first), Some(last)) = (self.attracting.first(), self.attracting.last()) else {
            return Vec::new();
        };
        self.unstable
            .iter()
            .map(|p| p.value)
            .filter(|&v| v > first.value && v < last.value)
            .collect()
    }

    /// Index of the attracting point whose basin contains `pi`, or `None`
    /// when `pi` sits exactly on a delimiter or no attracting point exists.
    pub fn basin_index(&self, pi: f64) -> Option<usize> {
        if self.attracting.is_empty() {
            return None;
        }
        let delimiters = self.delimiters();
        if delimiters.contains(&pi) {
            return None;
        }
        Some(delimiters.iter().filter(|&&d| d < pi).count())
    }

    /// Attracting point reached from `pi` under the unconstrained policy.
    pub fn limit_of(&self, pi: f64) -> Option<f64> {
        self.basin_index(pi).map(|i| self.attracting[i].value)
    }

    /// Midpoint of each basin, in order.
    pub fn basin_representatives(&self) -> Vec<f64> {
        let mut edges = vec![0.0];
        edges.extend(self.delimiters());
        edges.push(1.0);
        edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Every listed point with its fixed-point residual `|f(pi) - pi|`.
    pub fn residuals(&self, dyn_: &DynamicsSpec) -> Vec<(f64, f64)> {
        self.attracting
            .iter()
            .map(|p| p.value)
            .chain(self.unstable.iter().map(|p| p.value))
            .map(|v| (v, (dyn_.unconstrained_map(v) - v).abs()))
            .collect()
    }
}

fn derivative(dyn_: &DynamicsSpec, x: f64) -> f64 {
    let lo = (x - DERIVATIVE_STEP).max(0.0);
    let hi = (x + DERIVATIVE_STEP).min(1.0);
    (dyn_.unconstrained_map(hi) - dyn_.unconstrained_map(lo)) / (hi - lo)
}

fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, g_lo: f64) -> f64 {
    let lo_positive = g_lo > 0.0;
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if gm == 0.0 {
            return mid;
        }
        if (gm > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Root found by the scan with the sign of `f(pi) - pi` on either side
/// (0 when the side lies outside `[0, 1]`).
struct Root {
    value: f64,
    left: f64,
    right: f64,
}

fn largest_rate(dyn_: &DynamicsSpec, center: f64, radius: f64) -> f64 {
    let lo = (center - radius).max(0.0);
    let hi = (center + radius).min(1.0);
    let samples = 64;
    (0..=samples)
        .map(|k| derivative(dyn_, lo + (hi - lo) * k as f64 / samples as f64).abs())
        .fold(0.0, f64::max)
}

/// Locates and classifies the fixed points of `f(pi) = pi f1(0, pi) +
/// (1 - pi) f0(0, pi)` with the default scan of 4096 cells.
pub fn find_equilibria(dyn_: &DynamicsSpec, mode: TimeMode) -> EquilibriumAtlas {
    find_equilibria_with(dyn_, mode, DEFAULT_SCAN_CELLS)
}

pub fn find_equilibria_with(dyn_: &DynamicsSpec, mode: TimeMode, cells: usize) -> EquilibriumAtlas {
    let cells = cells.max(2);
    let g = |x: f64| dyn_.unconstrained_map(x) - x;
    let xs: Vec<f64> = (0..=cells).map(|k| k as f64 / cells as f64).collect();
    let gs: Vec<f64> = xs.iter().map(|&x| g(x)).collect();

    let flat: Vec<bool> = (0..cells)
        .map(|k| {
            let mid = 0.5 * (xs[k] + xs[k + 1]);
            gs[k].abs() < DEGENERATE_TOL && gs[k + 1].abs() < DEGENERATE_TOL && g(mid).abs() < DEGENERATE_TOL
        })
        .collect();
    let degenerate = flat.iter().any(|&f| f);

    let mut roots: Vec<Root> = Vec::new();
    for k in 0..=cells {
        let touches_flat = (k > 0 && flat[k - 1]) || (k < cells && flat[k]);
        if gs[k] == 0.0 && !touches_flat {
            roots.push(Root {
                value: xs[k],
                left: if k > 0 { gs[k - 1] } else { 0.0 },
                right: if k < cells { gs[k + 1] } else { 0.0 },
            });
        }
        if k < cells && !flat[k] && gs[k] * gs[k + 1] < 0.0 {
            roots.push(Root {
                value: bisect(g, xs[k], xs[k + 1], gs[k]),
                left: gs[k],
                right: gs[k + 1],
            });
        }
    }

    let mut attracting_values = Vec::new();
    let mut unstable = Vec::new();
    for r in &roots {
        let d = derivative(dyn_, r.value);
        let attracts = match mode {
            TimeMode::Continuous => {
                let from_left = r.value == 0.0 || r.left > 0.0;
                let from_right = r.value == 1.0 || r.right < 0.0;
                from_left && from_right
            }
            TimeMode::Discrete => d.abs() < 1.0,
        };
        if attracts {
            attracting_values.push((r.value, d));
        } else {
            unstable.push(UnstablePoint {
                value: r.value,
                derivative: d,
            });
        }
    }

    let all_values: Vec<f64> = roots.iter().map(|r| r.value).collect();
    let attracting: Vec<AttractingPoint> = attracting_values
        .iter()
        .map(|&(value, derivative)| {
            let gap = all_values
                .iter()
                .filter(|&&v| v != value)
                .map(|&v| (v - value).abs())
                .fold(f64::INFINITY, f64::min);
            let mut chosen = None;
            for &radius in RADII.iter().filter(|&&r| r < gap / 2.0 || gap.is_infinite()) {
                let rate = largest_rate(dyn_, value, radius);
                if rate < 1.0 {
                    chosen = Some((radius, rate));
                    break;
                }
            }
            let (radius, local_rate) = chosen.unwrap_or_else(|| {
                let r = RADII[RADII.len() - 1];
                (r, largest_rate(dyn_, value, r))
            });
            AttractingPoint {
                value,
                derivative,
                local_rate,
                radius,
            }
        })
        .collect();

    let mut atlas = EquilibriumAtlas {
        time_mode: mode,
        attracting,
        unstable,
        k_valid: false,
        degenerate,
        scan_cells: cells,
    };
    atlas.k_valid = !degenerate && conditions_hold(&atlas, &xs, &gs);
    atlas
}

/// Alternation of attracting points and delimiters, plus the sign (and, in
/// discrete time, overshoot and local-rate) conditions on every scan sample.
fn conditions_hold(atlas: &EquilibriumAtlas, xs: &[f64], gs: &[f64]) -> bool {
    if atlas.attracting.is_empty() {
        return false;
    }
    let mut labeled: Vec<(f64, bool)> = atlas
        .attracting
        .iter()
        .map(|p| (p.value, true))
        .chain(atlas.unstable.iter().map(|p| (p.value, false)))
        .collect();
    labeled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let inner: Vec<(f64, bool)> = labeled
        .iter()
        .copied()
        .filter(|&(v, attracting)| attracting || (v > 0.0 && v < 1.0))
        .collect();
    let alternates = inner.first().is_some_and(|f| f.1)
        && inner.last().is_some_and(|l| l.1)
        && inner.windows(2).all(|w| w[0].1 != w[1].1);
    if !alternates {
        return false;
    }

    let delimiters = atlas.delimiters();
    for (&x, &gx) in xs.iter().zip(gs) {
        if labeled.iter().any(|&(v, _)| v == x) {
            continue;
        }
        let basin = delimiters.iter().filter(|&&d| d < x).count();
        let e = atlas.attracting[basin].value;
        let fx = gx + x;
        let ok = if x < e {
            gx > 0.0 && (atlas.time_mode == TimeMode::Continuous || fx < e)
        } else if x > e {
            gx < 0.0 && (atlas.time_mode == TimeMode::Continuous || fx > e)
        } else {
            true
        };
        if !ok {
            return false;
        }
    }
    atlas.time_mode == TimeMode::Continuous || atlas.attracting.iter().all(|p| p.local_rate < 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::builtin;

    /// Worked-example fixed points from an independent bisection in double
    /// precision (scan of 4096 cells, bisection to 1e-13).
    const WORKED_EXAMPLE_ROOTS: [f64; 5] = [
        0.17705095084174127,
        0.3537302994300385,
        0.5133265291496283,
        0.7153379694710014,
        0.8507455941899836,
    ];

    #[test]
    fn constant_dynamics_single_equilibrium() {
        let d = builtin::constant(0.2, 0.8).unwrap();
        for mode in [TimeMode::Continuous, TimeMode::Discrete] {
            let atlas = find_equilibria(&d, mode);
            assert_eq!(atlas.attracting.len(), 1);
            assert!((atlas.attracting[0].value - 0.5).abs() < 1e-12);
            assert!(atlas.unstable.is_empty());
            assert!(atlas.k_valid);
            assert!((atlas.attracting[0].local_rate - 0.6).abs() < 1e-6);
        }
    }

    #[test]
    fn worked_example_has_three_attracting_points_in_continuous_time() {
        let d = builtin::appendix_c();
        let atlas = find_equilibria(&d, TimeMode::Continuous);
        assert_eq!(atlas.attracting.len(), 3);
        assert_eq!(atlas.unstable.len(), 2);
        assert!(atlas.k_valid);
        let got: Vec<f64> = atlas.attracting.iter().map(|p| p.value).collect();
        for (g, e) in got.iter().zip([WORKED_EXAMPLE_ROOTS[0], WORKED_EXAMPLE_ROOTS[2], WORKED_EXAMPLE_ROOTS[4]]) {
            assert!((g - e).abs() < 1e-10, "{g} vs {e}");
        }
        for (g, e) in atlas.unstable.iter().zip([WORKED_EXAMPLE_ROOTS[1], WORKED_EXAMPLE_ROOTS[3]]) {
            assert!((g.value - e).abs() < 1e-10);
        }
        for (_, residual) in atlas.residuals(&d) {
            assert!(residual <= 1e-10);
        }
        assert_eq!(atlas.basin_index(0.1), Some(0));
        assert_eq!(atlas.basin_index(0.45), Some(1));
        assert_eq!(atlas.basin_index(0.9), Some(2));
        assert_eq!(atlas.basin_representatives().len(), 3);
    }

    #[test]
    fn worked_example_oscillates_in_discrete_time() {
        let atlas = find_equilibria(&builtin::appendix_c(), TimeMode::Discrete);
        assert!(atlas.attracting.is_empty());
        assert_eq!(atlas.unstable.len(), 5);
        assert!(!atlas.k_valid);
        assert!(atlas.unstable.iter().all(|p| p.derivative.abs() > 1.0));
    }

    #[test]
    fn identity_map_is_degenerate() {
        let atlas = find_equilibria(&builtin::identity(), TimeMode::Continuous);
        assert!(atlas.degenerate);
        assert!(!atlas.k_valid);
        assert!(atlas.attracting.is_empty());
    }

    #[test]
    fn endpoint_fixed_points() {
        // f(pi) = pi^2: 0 attracts, 1 repels.
        let d = DynamicsSpec::new("square", |_, _| 0.0, |_, b1| b1);
        let atlas = find_equilibria(&d, TimeMode::Continuous);
        assert_eq!(atlas.attracting.len(), 1);
        assert_eq!(atlas.attracting[0].value, 0.0);
        assert_eq!(atlas.unstable.len(), 1);
        assert_eq!(atlas.unstable[0].value, 1.0);
        assert!(atlas.k_valid);
    }

    #[test]
    fn oscillating_map_fails_discrete_conditions() {
        // f(pi) = 1 - pi: fixed point 0.5 with f' = -1.
        let d = DynamicsSpec::new("flip", |_, _| 1.0, |_, _| 0.0);
        assert!(find_equilibria(&d, TimeMode::Continuous).k_valid);
        let dt = find_equilibria(&d, TimeMode::Discrete);
        assert!(!dt.k_valid);
    }
}
