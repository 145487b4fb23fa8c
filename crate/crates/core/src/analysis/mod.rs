//! Numerical checks of the equality and utility conditions: contraction
//! constants, fixed points of the unconstrained map, convergence envelopes
//! and theorem verdicts.

pub mod contraction;
pub mod equilibria;
pub mod theorems;

pub use contraction::{
    check_status_quo_bias, estimate_contraction, ContractionMethod, ContractionReport, StatusQuoBias,
    CONTRACTION_MARGIN,
};
pub use equilibria::{find_equilibria, find_equilibria_with, AttractingPoint, EquilibriumAtlas, UnstablePoint};
pub use theorems::{
    delta_bounds, prop3_case_persistence, theorem2_verdict, theorem4_limits, theorem4_limits_with_atlas,
    Check, LimitComparison, LimitOptions, ModeLimit, Persistence, PersistenceRecord, Theorem2Verdict,
};
