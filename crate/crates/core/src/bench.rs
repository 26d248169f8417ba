//! Per-update timing of the three budget algorithms.
//!
//! Updates are timed in small batches; the reported per-update costs are the
//! batch means' median and 99th percentile. Workloads are generated from a
//! fixed seed so that runs differ only by timing noise.

use std::hint::black_box;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::budget::{budget_scratch, BudgetState, ConservativeBudgetState, EmfConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// From-scratch fold over the window.
    Scratch,
    /// Iterative exact update.
    ExactUpdate,
    /// Constant-time conservative update.
    ConservativeUpdate,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [
        Algorithm::Scratch,
        Algorithm::ExactUpdate,
        Algorithm::ConservativeUpdate,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Scratch => "scratch",
            Algorithm::ExactUpdate => "exact_update",
            Algorithm::ConservativeUpdate => "conservative_update",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Workload {
    /// `c ~ U[0, C̄]`: compliant, crosses the floor often.
    RandomCompliant,
    /// `c ~ U[ρC̄, C̄]`: every sample at or above the floor.
    AllAbove,
}

impl Workload {
    pub fn as_str(&self) -> &'static str {
        match self {
            Workload::RandomCompliant => "random_compliant",
            Workload::AllAbove => "all_above",
        }
    }

    pub fn generate(&self, cfg: &EmfConfig, len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let low = match self {
            Workload::RandomCompliant => 0.0,
            Workload::AllAbove => cfg.floor(),
        };
        (0..len)
            .map(|_| rng.random_range(low..=cfg.threshold()))
            .collect()
    }
}

impl FromStr for Workload {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random_compliant" | "random" => Ok(Workload::RandomCompliant),
            "all_above" => Ok(Workload::AllAbove),
            _ => Err(Error::InvalidConfig(format!(
                "unknown workload {s:?}; expected random_compliant or all_above"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchStats {
    pub window: usize,
    pub algorithm: Algorithm,
    pub updates: usize,
    pub p50_ns: f64,
    pub p99_ns: f64,
    pub mean_ns: f64,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

/// Times `updates` updates of `algorithm` in batches of `batch`, after a
/// warm-up window of `W` samples.
pub fn measure(
    algorithm: Algorithm,
    cfg: &EmfConfig,
    workload: Workload,
    updates: usize,
    batch: usize,
    seed: u64,
) -> Result<BenchStats> {
    if updates == 0 || batch == 0 {
        return Err(Error::InvalidInput("updates and batch must be positive".into()));
    }
    let w = cfg.window();
    let samples = workload.generate(cfg, w + updates, seed);
    let (warmup, timed) = samples.split_at(w);
    let mut per_update = Vec::with_capacity(updates.div_ceil(batch));

    match algorithm {
        Algorithm::Scratch => {
            for (b, chunk) in timed.chunks(batch).enumerate() {
                let offset = w + b * batch;
                let start = Instant::now();
                for i in 0..chunk.len() {
                    let t = offset + i;
                    black_box(budget_scratch(black_box(&samples[t + 1 - w..t]), cfg));
                }
                per_update.push(start.elapsed().as_nanos() as f64 / chunk.len() as f64);
            }
        }
        Algorithm::ExactUpdate => {
            let mut state = BudgetState::new(*cfg);
            for &c in warmup {
                state.update(c)?;
            }
            for chunk in timed.chunks(batch) {
                let start = Instant::now();
                for &c in chunk {
                    black_box(state.update(black_box(c))?);
                }
                per_update.push(start.elapsed().as_nanos() as f64 / chunk.len() as f64);
                black_box(state.budget());
            }
        }
        Algorithm::ConservativeUpdate => {
            let mut state = ConservativeBudgetState::new(*cfg);
            for &c in warmup {
                state.update(c)?;
            }
            for chunk in timed.chunks(batch) {
                let start = Instant::now();
                for &c in chunk {
                    state.update(black_box(c))?;
                }
                per_update.push(start.elapsed().as_nanos() as f64 / chunk.len() as f64);
                black_box(state.budget());
            }
        }
    }

    let mean_ns = per_update.iter().sum::<f64>() / per_update.len() as f64;
    per_update.sort_by(f64::total_cmp);
    Ok(BenchStats {
        window: w,
        algorithm,
        updates,
        p50_ns: percentile(&per_update, 0.5),
        p99_ns: percentile(&per_update, 0.99),
        mean_ns,
    })
}

/// Least-squares fit `y = a + b x`; returns `(a, b, R²)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (intercept, slope, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn workloads_respect_bounds() {
        let cfg = EmfConfig::new(10, 2.0, 0.25).unwrap();
        let xs = Workload::AllAbove.generate(&cfg, 1000, 1);
        assert!(xs.iter().all(|&x| (0.5..=2.0).contains(&x)));
        let ys = Workload::RandomCompliant.generate(&cfg, 1000, 1);
        assert!(ys.iter().all(|&x| (0.0..=2.0).contains(&x)));
        assert_eq!(ys, Workload::RandomCompliant.generate(&cfg, 1000, 1));
    }

    #[test]
    fn measure_runs_every_algorithm() {
        let cfg = EmfConfig::new(16, 1.0, 0.15).unwrap();
        for alg in Algorithm::ALL {
            let s = measure(alg, &cfg, Workload::RandomCompliant, 500, 50, 3).unwrap();
            assert_eq!(s.window, 16);
            assert!(s.p50_ns >= 0.0 && s.p99_ns >= s.p50_ns);
        }
        assert!(measure(Algorithm::Scratch, &cfg, Workload::AllAbove, 0, 1, 0).is_err());
    }

    #[test]
    fn single_period_window() {
        let cfg = EmfConfig::new(1, 1.0, 0.15).unwrap();
        assert!(measure(Algorithm::Scratch, &cfg, Workload::AllAbove, 10, 3, 0).is_ok());
    }

    #[test]
    fn fit_recovers_a_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [3.0, 5.0, 7.0, 9.0];
        let (a, b, r2) = linear_fit(&xs, &ys);
        assert!((a - 1.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }
}
