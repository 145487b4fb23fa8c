//! Two-group selection under influence dynamics.
//!
//! An institution selects individuals from two groups whose members are
//! evaluated as qualified or not. Each round it picks a one-step optimal
//! policy, either unconstrained or under demographic parity, and the groups'
//! qualified fractions respond through a pair of rate maps `(f0, f1)`. This
//! crate computes those policies, evolves the population in discrete or
//! continuous time, and checks when the two groups become indistinguishable.

pub mod analysis;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod model;
pub mod policy;
pub mod stereotype;

pub use error::{Error, Result};
pub use model::{
    selection_rates, utility, Group, GroupRates, Policy, PopulationState, QualificationProfile,
    SelectionRates, UtilitySpec,
};
pub use policy::{
    aa_policy, determine_aa_case, lp_oracle, policy_for_mode, unconstrained_policy, AaCase,
    AaKind, CaseTag, PolicyMode, PolicySolution,
};
