//! Brute-force reference evaluations of the exact budget.
//!
//! Both routes evaluate every candidate suffix length independently, in
//! `O(W²)` per period. They exist to cross-check the fold and the iterative
//! update and are not used on any control path.

use super::EmfConfig;
use crate::error::{check_consumption, Error, Result};

/// `Ω_t` and its smallest maximiser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaArgmax {
    pub omega: f64,
    pub argmax_len: usize,
}

fn check_history(history: &[f64], t: usize) -> Result<()> {
    if history.len() < t {
        return Err(Error::InvalidInput(format!(
            "history has {} samples, period {t} needs c_0..c_{{t-1}}",
            history.len()
        )));
    }
    history[..t].iter().try_for_each(|&c| check_consumption(c))
}

/// Direct evaluation of `max_{0≤k≤min(t,W−1)} Σ_{i=1..k} (c_{t−i} − ρC̄)`.
///
/// `history[i]` is `c_i`; only `c_{t−min(t,W−1)} .. c_{t−1}` are read.
pub fn omega_naive(history: &[f64], t: usize, cfg: &EmfConfig) -> Result<OmegaArgmax> {
    check_history(history, t)?;
    let floor = cfg.floor();
    let depth = t.min(cfg.window() - 1);
    let mut best = OmegaArgmax {
        omega: 0.0,
        argmax_len: 0,
    };
    for k in 1..=depth {
        let partial: f64 = (1..=k).map(|i| history[t - i] - floor).sum();
        if partial > best.omega {
            best = OmegaArgmax {
                omega: partial,
                argmax_len: k,
            };
        }
    }
    Ok(best)
}

/// Exact budget through the min-form identity
/// `Γ_t = min_{0≤k≤W−1} WC̄ − Σ_{i=1..min(t,k)} c_{t−i} − (W−k−1)ρC̄`.
pub fn budget_oracle_minform(history: &[f64], t: usize, cfg: &EmfConfig) -> Result<f64> {
    check_history(history, t)?;
    let w = cfg.window();
    let total = w as f64 * cfg.threshold();
    let floor = cfg.floor();
    let value = (0..w)
        .map(|k| {
            let used: f64 = (1..=t.min(k)).map(|i| history[t - i]).sum();
            total - used - (w - k - 1) as f64 * floor
        })
        .fold(f64::INFINITY, f64::min);
    Ok(value)
}
