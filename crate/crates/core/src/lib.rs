//! Sliding-window EIRP budgets and smooth EIRP control for EMF compliance.
//!
//! The crate is organised bottom-up:
//!
//! - [`budget`]: the exact budget (from-scratch and iterative updates) and the
//!   constant-time conservative budget, plus brute-force oracles.
//! - [`policy`]: alpha-fair utility, the drift-plus-penalty virtual queue and
//!   control law, and the greedy/cautious baselines.
//! - [`traffic`]: sparse Zipf demand and the cap/backlog consumption model.
//! - [`sim`]: the closed loop, the compliance verifier, trace scoring and the
//!   V-sweep / budget-comparison experiments.
//! - [`bench`]: per-update timing of the budget algorithms.
//! - [`cli`]: the `eirp` command-line front end.

pub mod bench;
pub mod budget;
pub mod cli;
mod error;
pub mod policy;
pub mod sim;
pub mod traffic;

pub use budget::{
    budget_from_omega, budget_scratch, BudgetState, ConservativeBudgetState, EmfConfig,
    UpdateBranch,
};
pub use error::{Error, Result};
pub use policy::{
    alpha_fair, cautious_control, dpp_control, greedy_control, queue_update, ControlDecision,
    DppConfig, DppState, PolicyKind, CLAMP_TOLERANCE,
};
pub use sim::{
    compare_budgets, run_simulation, score_trace, sweep_v, verify_compliance, ComplianceReport,
    PeriodRecord, SimConfig, SimTrace,
};
pub use traffic::{TrafficConfig, TrafficState};
