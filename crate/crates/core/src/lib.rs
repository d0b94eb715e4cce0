//! Penalty-based solvers for simple bilevel optimization
//!
//! Minimize an upper-level convex objective `F` over the minimizers of a
//! lower-level convex objective `G` by solving the penalized problem
//! `min F + γ·(G − G*)` with accelerated proximal gradient or subgradient
//! methods, then certify the bilevel gaps of the result.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod apg;
pub mod data;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod model;
pub mod penalty;
pub mod prox;
pub mod reference;
pub mod subgrad;

pub use adaptive::{apb_apg, apb_apg_sc, ladder_entry_index, run_ladder, Engine, LadderConfig, LadderResult, Stage};
pub use apg::{iteration_budget, next_theta, pb_apg, pb_apg_sc, sc_budget, ApgConfig, SolveResult, SolverTrace, Termination, TraceRecord};
pub use error::{Error, Result};
pub use model::{
    assemble_penalized, BilevelInstance, ErrorBound, NonsmoothKind, NonsmoothTerm, PenalizedObjective, SmoothTerm,
};
pub use penalty::{certify, gamma_star, gamma_total, suboptimality_lower_bound, Certificate, PenaltyPlan};
pub use prox::{compose_prox, project_l1_ball, prox_l1, ProxSpec};
pub use subgrad::{penalized_subgradient, subgrad_solve, subgradient_oracle, Domain, StepSchedule, SubgradConfig};
