//! Per-period EIRP control policies.
//!
//! Every policy maps the current budget to a control `γ_t` in
//! `[ρC̄, max(Γ_t, ρC̄)]`. The drift-plus-penalty policy additionally reads a
//! virtual queue that accumulates consumption above `βC̄`; as the queue grows
//! the control is pulled below the budget before the budget itself depletes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::budget::EmfConfig;
use crate::error::{check_consumption, Error, Result};

/// Alpha-fair utility: `x^{1−α}/(1−α)`, or `ln x` when `α = 1`.
pub fn alpha_fair(x: f64, alpha: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "alpha must be finite and nonnegative, got {alpha}"
        )));
    }
    if !(x > 0.0) {
        return Err(Error::Domain(format!(
            "alpha-fair utility needs a positive argument, got {x}"
        )));
    }
    if alpha == 1.0 {
        Ok(x.ln())
    } else {
        Ok(x.powf(1.0 - alpha) / (1.0 - alpha))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DppConfig {
    v_weight: f64,
    alpha: f64,
    beta: f64,
}

impl DppConfig {
    pub fn new(v_weight: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !(v_weight.is_finite() && v_weight > 0.0) {
            return Err(Error::InvalidConfig(format!("V must be positive, got {v_weight}")));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be nonnegative, got {alpha}"
            )));
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::InvalidConfig(format!("beta must lie in [0, 1], got {beta}")));
        }
        Ok(Self {
            v_weight,
            alpha,
            beta,
        })
    }

    pub fn v_weight(&self) -> f64 {
        self.v_weight
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn with_v_weight(self, v_weight: f64) -> Result<Self> {
        Self::new(v_weight, self.alpha, self.beta)
    }

    pub fn with_beta(self, beta: f64) -> Result<Self> {
        Self::new(self.v_weight, self.alpha, beta)
    }
}

impl Default for DppConfig {
    fn default() -> Self {
        Self {
            v_weight: 15.0,
            alpha: 1.0,
            beta: 0.95,
        }
    }
}

/// Virtual queue `Q̄^β_t`. Starts empty.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct DppState {
    pub queue: f64,
}

/// `Q̄' = [Q̄ + c_t − βC̄]^+`.
pub fn queue_update(
    state: DppState,
    consumption: f64,
    cfg: &EmfConfig,
    dpp: &DppConfig,
) -> Result<DppState> {
    check_consumption(consumption)?;
    Ok(DppState {
        queue: (state.queue + consumption - dpp.beta * cfg.threshold()).max(0.0),
    })
}

/// Slack, in units of `C̄`, within which `γ` counts as sitting on the floor or
/// the budget. Budgets are sums of up to `W` rounded terms, so a depleted
/// budget lands near the floor rather than on it.
pub const CLAMP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControlDecision {
    pub gamma: f64,
    pub budget_used: f64,
    /// `γ` sits on the guaranteed floor.
    pub clamped_low: bool,
    /// `γ` sits on the budget.
    pub clamped_high: bool,
}

impl ControlDecision {
    fn clamp(target: f64, budget: f64, cfg: &EmfConfig) -> Self {
        let floor = cfg.floor();
        let slack = CLAMP_TOLERANCE * cfg.threshold();
        // a budget below the floor can only come from an infeasible forced
        // history; the floor wins
        let gamma = target.max(floor).min(budget).max(floor);
        Self {
            gamma,
            budget_used: budget,
            clamped_low: gamma <= floor + slack,
            clamped_high: (gamma - budget).abs() <= slack,
        }
    }
}

/// Unconstrained minimiser of `Q̄γ − V f(γ)`: `(V/Q̄)^{1/α}`, infinite when
/// the queue is empty. With `α = 0` the objective is linear and the answer is
/// bang-bang.
fn dpp_target(queue: f64, floor: f64, dpp: &DppConfig) -> f64 {
    if queue <= 0.0 {
        f64::INFINITY
    } else if dpp.alpha == 0.0 {
        if queue < dpp.v_weight {
            f64::INFINITY
        } else {
            floor
        }
    } else if dpp.alpha == 1.0 {
        dpp.v_weight / queue
    } else {
        (dpp.v_weight / queue).powf(1.0 / dpp.alpha)
    }
}

/// Drift-plus-penalty control `min(max((V/Q̄)^{1/α}, ρC̄), Γ_t)`.
pub fn dpp_control(
    state: &DppState,
    budget: f64,
    cfg: &EmfConfig,
    dpp: &DppConfig,
) -> ControlDecision {
    let floor = cfg.floor();
    ControlDecision::clamp(dpp_target(state.queue, floor, dpp), budget, cfg)
}

/// Spend the whole budget.
pub fn greedy_control(budget: f64, cfg: &EmfConfig) -> ControlDecision {
    ControlDecision::clamp(f64::INFINITY, budget, cfg)
}

/// Constant `γ = C̄`. Never above the budget on a history it produced itself.
pub fn cautious_control(cfg: &EmfConfig) -> ControlDecision {
    let gamma = cfg.threshold();
    ControlDecision {
        gamma,
        budget_used: gamma,
        clamped_low: gamma <= cfg.floor() + CLAMP_TOLERANCE * gamma,
        clamped_high: false,
    }
}

/// Which policy drives the loop, and which budget it reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    DppExact,
    DppConservative,
    GreedyExact,
    GreedyConservative,
    Cautious,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::DppExact,
        PolicyKind::DppConservative,
        PolicyKind::GreedyExact,
        PolicyKind::GreedyConservative,
        PolicyKind::Cautious,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyKind::DppExact => "dpp_exact",
            PolicyKind::DppConservative => "dpp_conservative",
            PolicyKind::GreedyExact => "greedy_exact",
            PolicyKind::GreedyConservative => "greedy_conservative",
            PolicyKind::Cautious => "cautious",
        }
    }

    pub fn uses_conservative_budget(&self) -> bool {
        matches!(self, PolicyKind::DppConservative | PolicyKind::GreedyConservative)
    }

    pub fn decide(
        &self,
        budget_exact: f64,
        budget_conservative: f64,
        queue: &DppState,
        cfg: &EmfConfig,
        dpp: &DppConfig,
    ) -> ControlDecision {
        let budget = if self.uses_conservative_budget() {
            budget_conservative
        } else {
            budget_exact
        };
        match self {
            PolicyKind::DppExact | PolicyKind::DppConservative => {
                dpp_control(queue, budget, cfg, dpp)
            }
            PolicyKind::GreedyExact | PolicyKind::GreedyConservative => {
                greedy_control(budget, cfg)
            }
            PolicyKind::Cautious => cautious_control(cfg),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown policy {s:?}; expected one of dpp_exact, dpp_conservative, \
                     greedy_exact, greedy_conservative, cautious"
                ))
            })
    }
}
