//! Sliding-window EIRP budget.
//!
//! For a window of `W` periods, threshold `C̄` and guaranteed ratio `ρ`, the
//! largest control compatible with every future window staying compliant
//! (while still leaving `ρC̄` available forever after) is
//!
//! ```text
//! Γ_t = ρC̄ + C̄(1 − ρ)W − Ω_t,   Ω_t = max_{0 ≤ k ≤ min(t, W−1)} Σ_{i=1..k} (c_{t−i} − ρC̄)
//! ```
//!
//! [`budget_scratch`] folds the window in `O(W)`. [`BudgetState`] maintains
//! `Ω_t` incrementally and only falls back to the fold when the maximising
//! suffix spans the whole window. [`ConservativeBudgetState`] replaces the
//! maximum by the sum of clipped excesses, which always updates in `O(1)` and
//! never exceeds the exact budget.
//!
//! Consumption before period 0 is taken to be zero.

pub mod oracle;

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{check_consumption, Error, Result};

/// The compliance triple: window length, threshold and guaranteed ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmfConfig {
    window: usize,
    threshold: f64,
    guaranteed_ratio: f64,
}

impl EmfConfig {
    pub fn new(window: usize, threshold: f64, guaranteed_ratio: f64) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidConfig("window must be at least 1 period".into()));
        }
        if !(threshold.is_finite() && threshold > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "threshold must be positive and finite, got {threshold}"
            )));
        }
        if !(0.0..=1.0).contains(&guaranteed_ratio) {
            return Err(Error::InvalidConfig(format!(
                "guaranteed ratio must lie in [0, 1], got {guaranteed_ratio}"
            )));
        }
        Ok(Self {
            window,
            threshold,
            guaranteed_ratio,
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn guaranteed_ratio(&self) -> f64 {
        self.guaranteed_ratio
    }

    /// Guaranteed EIRP level `ρC̄`.
    pub fn floor(&self) -> f64 {
        self.guaranteed_ratio * self.threshold
    }

    /// Budget with no excess in the window, `ρC̄ + C̄(1 − ρ)W`.
    pub fn max_budget(&self) -> f64 {
        self.floor() + self.threshold * (1.0 - self.guaranteed_ratio) * self.window as f64
    }
}

impl Default for EmfConfig {
    fn default() -> Self {
        Self {
            window: 10,
            threshold: 1.0,
            guaranteed_ratio: 0.15,
        }
    }
}

/// `Γ = ρC̄ + C̄(1 − ρ)W − Ω`. Not clamped: under a compliant history the
/// result is at least `ρC̄`, callers that need a usable control clamp it.
pub fn budget_from_omega(omega: f64, cfg: &EmfConfig) -> f64 {
    cfg.max_budget() - omega
}

/// Result of the from-scratch fold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScratchBudget {
    pub budget: f64,
    pub omega: f64,
    /// Smallest maximising suffix length.
    pub argmax_len: usize,
}

/// From-scratch exact budget. `window` holds the most recent consumptions,
/// oldest first, at most `W − 1` of them (longer slices are truncated to
/// their newest `W − 1` entries).
pub fn budget_scratch(window: &[f64], cfg: &EmfConfig) -> ScratchBudget {
    let keep = window.len().min(cfg.window - 1);
    let (omega, argmax_len) = fold_excess(&window[window.len() - keep..], cfg.floor());
    ScratchBudget {
        budget: budget_from_omega(omega, cfg),
        omega,
        argmax_len,
    }
}

fn fold_excess<'a>(window: impl IntoIterator<Item = &'a f64>, floor: f64) -> (f64, usize) {
    window
        .into_iter()
        .fold((0.0_f64, 0_usize), |(omega, len), &c| {
            let next = (omega + c - floor).max(0.0);
            if next > 0.0 {
                (next, len + 1)
            } else {
                (0.0, 0)
            }
        })
}

/// Which step of the iterative exact update produced `Ω_{t+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateBranch {
    /// The last `W` samples are all at or above `ρC̄`: sliding-sum update.
    AllAbove,
    /// The maximising suffix is shorter than `W − 1`: one clipped step.
    Recursive,
    /// The maximising suffix spans the window: full fold.
    Scratch,
}

/// Iteratively maintained exact budget.
#[derive(Debug, Clone)]
pub struct BudgetState {
    cfg: EmfConfig,
    omega: f64,
    argmax_len: usize,
    /// `c_{t−W+1} .. c_{t−1}`, oldest first, always `W − 1` long.
    window: VecDeque<f64>,
    /// Consecutive most recent samples `≥ ρC̄`, saturating at `W`.
    above_run: usize,
    /// Stored samples strictly above `ρC̄`. With none, `Ω = 0` exactly and
    /// any rounding residue from the running sums is dropped.
    positive: usize,
    period: u64,
}

impl BudgetState {
    pub fn new(cfg: EmfConfig) -> Self {
        let floor = cfg.floor();
        Self {
            cfg,
            omega: 0.0,
            argmax_len: 0,
            window: std::iter::repeat_n(0.0, cfg.window - 1).collect(),
            // the zero pre-history counts as "above" only when the floor is zero
            above_run: if 0.0 >= floor { cfg.window } else { 0 },
            positive: 0,
            period: 0,
        }
    }

    pub fn config(&self) -> &EmfConfig {
        &self.cfg
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn argmax_len(&self) -> usize {
        self.argmax_len
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    /// Exact budget `Γ_t` for the current period.
    pub fn budget(&self) -> f64 {
        budget_from_omega(self.omega, &self.cfg)
    }

    /// The stored window, oldest first.
    pub fn window(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.window.iter().copied()
    }

    /// Advances from period `t` to `t + 1` after observing `c_t`.
    pub fn update(&mut self, consumption: f64) -> Result<UpdateBranch> {
        check_consumption(consumption)?;
        let floor = self.cfg.floor();
        let last = self.cfg.window - 1;

        self.above_run = if consumption >= floor {
            (self.above_run + 1).min(self.cfg.window)
        } else {
            0
        };
        // c_{t−W+1}; with W = 1 the window is empty and the leaving sample is c_t
        let leaving = self.window.front().copied().unwrap_or(consumption);

        let branch = if self.above_run >= self.cfg.window {
            UpdateBranch::AllAbove
        } else if self.argmax_len < last {
            UpdateBranch::Recursive
        } else {
            UpdateBranch::Scratch
        };

        if last > 0 {
            self.window.pop_front();
            self.window.push_back(consumption);
            self.positive += usize::from(consumption > floor);
            self.positive -= usize::from(leaving > floor);
        }

        match branch {
            UpdateBranch::AllAbove => {
                self.omega = (self.omega + consumption - leaving).max(0.0);
                // every excess is nonnegative, so the full window is a maximiser
                self.argmax_len = if self.omega > 0.0 { last } else { 0 };
            }
            UpdateBranch::Recursive => {
                self.omega = (self.omega + consumption - floor).max(0.0);
                self.argmax_len = if self.omega > 0.0 {
                    self.argmax_len + 1
                } else {
                    0
                };
            }
            UpdateBranch::Scratch => {
                let (omega, len) = fold_excess(&self.window, floor);
                self.omega = omega;
                self.argmax_len = len;
            }
        }
        if self.positive == 0 {
            self.omega = 0.0;
            self.argmax_len = 0;
        }
        self.period += 1;
        Ok(branch)
    }

    pub fn snapshot(&self) -> BudgetSnapshot {
        BudgetSnapshot {
            omega: self.omega,
            argmax_len: self.argmax_len,
            window: self.window.iter().copied().collect(),
            period: self.period,
        }
    }
}

/// Plain key-value view of a budget state for trace dumps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetSnapshot {
    pub omega: f64,
    pub argmax_len: usize,
    pub window: Vec<f64>,
    pub period: u64,
}

/// Conservative budget `Γ̃_t`, updated in constant time.
#[derive(Debug, Clone)]
pub struct ConservativeBudgetState {
    cfg: EmfConfig,
    omega_tilde: f64,
    window: VecDeque<f64>,
    /// Stored samples strictly above `ρC̄`; see [`BudgetState`].
    positive: usize,
    period: u64,
}

impl ConservativeBudgetState {
    pub fn new(cfg: EmfConfig) -> Self {
        Self {
            cfg,
            omega_tilde: 0.0,
            window: std::iter::repeat_n(0.0, cfg.window - 1).collect(),
            positive: 0,
            period: 0,
        }
    }

    pub fn omega_tilde(&self) -> f64 {
        self.omega_tilde
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    pub fn budget(&self) -> f64 {
        budget_from_omega(self.omega_tilde, &self.cfg)
    }

    pub fn window(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.window.iter().copied()
    }

    fn excess(&self, c: f64) -> f64 {
        (c - self.cfg.floor()).max(0.0)
    }

    pub fn update(&mut self, consumption: f64) -> Result<()> {
        check_consumption(consumption)?;
        let leaving = if self.window.is_empty() {
            consumption
        } else {
            let oldest = self.window.pop_front().unwrap_or(0.0);
            self.window.push_back(consumption);
            oldest
        };
        let floor = self.cfg.floor();
        if !self.window.is_empty() {
            self.positive += usize::from(consumption > floor);
            self.positive -= usize::from(leaving > floor);
        }
        self.omega_tilde = if self.positive == 0 {
            0.0
        } else {
            (self.omega_tilde + self.excess(consumption) - self.excess(leaving)).max(0.0)
        };
        self.period += 1;
        Ok(())
    }

    /// `Σ [c − ρC̄]^+` recomputed over the stored window.
    pub fn recomputed_omega(&self) -> f64 {
        self.window.iter().map(|&c| self.excess(c)).sum()
    }

    pub fn snapshot(&self) -> BudgetSnapshot {
        BudgetSnapshot {
            omega: self.omega_tilde,
            argmax_len: 0,
            window: self.window.iter().copied().collect(),
            period: self.period,
        }
    }
}
