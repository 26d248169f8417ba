//! Closed-loop simulation and the experiments built on it.
//!
//! Each period runs, in order: read the budgets for `t`, let the policy pick
//! `γ_t`, draw demand and serve `c_t = min(backlog + d_t, γ_t)`, then update
//! the virtual queue and both budget states with `c_t`. The exact and the
//! conservative budget are tracked side by side whichever one the policy
//! reads.

use rayon::prelude::*;
use serde::Serialize;

use crate::budget::{BudgetState, ConservativeBudgetState, EmfConfig};
use crate::error::{check_consumption, Error, Result};
use crate::policy::{alpha_fair, queue_update, DppConfig, DppState, PolicyKind};
use crate::traffic::{TrafficConfig, TrafficState};

pub const DEFAULT_HORIZON: usize = 1000;
pub const DEFAULT_REPLICATIONS: usize = 100;
pub const COMPLIANCE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub emf: EmfConfig,
    pub dpp: DppConfig,
    pub traffic: TrafficConfig,
    pub horizon: usize,
    pub policy: PolicyKind,
    pub replications: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be at least 1".into()));
        }
        self.traffic.validate()
    }

    pub fn with_load(mut self, load: f64) -> Self {
        self.traffic.load = load;
        self
    }

    pub fn with_policy(mut self, policy: PolicyKind) -> Self {
        self.policy = policy;
        self
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        let emf = EmfConfig::default();
        Self {
            emf,
            dpp: DppConfig::default(),
            traffic: TrafficConfig::with_defaults(emf.threshold(), 0.5, 0)
                .expect("default traffic is valid"),
            horizon: DEFAULT_HORIZON,
            policy: PolicyKind::DppExact,
            replications: DEFAULT_REPLICATIONS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodRecord {
    pub t: u64,
    pub demand: f64,
    /// Unserved demand after this period's service.
    pub backlog: f64,
    pub gamma: f64,
    pub consumption: f64,
    pub budget_exact: f64,
    pub budget_conservative: f64,
    /// Virtual queue at decision time.
    pub queue: f64,
    pub clamped_low: bool,
    pub clamped_high: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplianceReport {
    pub compliant: bool,
    pub worst_window_start: usize,
    pub worst_window_average: f64,
    /// `C̄` minus the worst windowed average.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceSummary {
    pub policy: PolicyKind,
    pub horizon: usize,
    /// `None` when some control is zero and the utility is unbounded below.
    pub mean_utility: Option<f64>,
    pub floor_periods: usize,
    /// Floor-clamped periods that left demand unserved.
    pub shortage_periods: usize,
    pub peak_backlog: f64,
    pub final_backlog: f64,
    pub total_demand: f64,
    pub total_consumption: f64,
    pub mean_gamma: f64,
    pub mean_budget_exact: f64,
    pub mean_budget_conservative: f64,
    /// Longest stretch of consecutive periods with a nonempty virtual queue.
    pub longest_queue_busy_run: usize,
    pub compliance: ComplianceReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub records: Vec<PeriodRecord>,
    pub summary: TraceSummary,
}

impl SimTrace {
    pub fn consumption(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.consumption).collect()
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.gamma).collect()
    }
}

/// Runs one replication of `cfg`. The demand stream is selected by
/// `replication`, so the same index gives the same demand under every policy.
pub fn run_simulation(cfg: &SimConfig, replication: u64) -> Result<SimTrace> {
    cfg.validate()?;
    let mut exact = BudgetState::new(cfg.emf);
    let mut conservative = ConservativeBudgetState::new(cfg.emf);
    let mut queue = DppState::default();
    let mut traffic = TrafficState::new(&cfg.traffic, replication)?;
    let mut records = Vec::with_capacity(cfg.horizon);

    for t in 0..cfg.horizon {
        let budget_exact = exact.budget();
        let budget_conservative = conservative.budget();
        let decision =
            cfg.policy
                .decide(budget_exact, budget_conservative, &queue, &cfg.emf, &cfg.dpp);
        let demand = traffic.sample_demand();
        let consumption = traffic.consume(demand, decision.gamma)?;
        let queue_at_decision = queue.queue;
        queue = queue_update(queue, consumption, &cfg.emf, &cfg.dpp)?;
        exact.update(consumption)?;
        conservative.update(consumption)?;
        records.push(PeriodRecord {
            t: t as u64,
            demand,
            backlog: traffic.backlog(),
            gamma: decision.gamma,
            consumption,
            budget_exact,
            budget_conservative,
            queue: queue_at_decision,
            clamped_low: decision.clamped_low,
            clamped_high: decision.clamped_high,
        });
    }

    let summary = summarize(cfg, &records)?;
    Ok(SimTrace { records, summary })
}

fn summarize(cfg: &SimConfig, records: &[PeriodRecord]) -> Result<TraceSummary> {
    let n = records.len() as f64;
    let gammas: Vec<f64> = records.iter().map(|r| r.gamma).collect();
    let consumption: Vec<f64> = records.iter().map(|r| r.consumption).collect();
    let mean = |f: fn(&PeriodRecord) -> f64| records.iter().map(f).sum::<f64>() / n;

    let mut busy = 0;
    let mut longest_busy = 0;
    for r in records {
        busy = if r.queue > 0.0 { busy + 1 } else { 0 };
        longest_busy = longest_busy.max(busy);
    }

    Ok(TraceSummary {
        policy: cfg.policy,
        horizon: records.len(),
        mean_utility: score_trace(&gammas, cfg.dpp.alpha()).ok(),
        floor_periods: records.iter().filter(|r| r.clamped_low).count(),
        shortage_periods: records
            .iter()
            .filter(|r| r.clamped_low && r.backlog > 0.0)
            .count(),
        peak_backlog: records.iter().map(|r| r.backlog).fold(0.0, f64::max),
        final_backlog: records.last().map_or(0.0, |r| r.backlog),
        total_demand: records.iter().map(|r| r.demand).sum(),
        total_consumption: consumption.iter().sum(),
        mean_gamma: mean(|r| r.gamma),
        mean_budget_exact: mean(|r| r.budget_exact),
        mean_budget_conservative: mean(|r| r.budget_conservative),
        longest_queue_busy_run: longest_busy,
        compliance: verify_compliance(&consumption, &cfg.emf, COMPLIANCE_TOLERANCE)?,
    })
}

/// Checks `(1/W) Σ_{i=t−min(t,W−1)..t} c_i ≤ C̄` for every `t`, summing each
/// window directly from the consumption sequence.
pub fn verify_compliance(
    consumption: &[f64],
    cfg: &EmfConfig,
    tolerance: f64,
) -> Result<ComplianceReport> {
    if consumption.is_empty() {
        return Err(Error::InvalidInput("cannot verify an empty trace".into()));
    }
    consumption.iter().try_for_each(|&c| check_consumption(c))?;
    let w = cfg.window();
    let mut worst_start = 0;
    let mut worst = f64::NEG_INFINITY;
    for t in 0..consumption.len() {
        let start = t - t.min(w - 1);
        let average = consumption[start..=t].iter().sum::<f64>() / w as f64;
        if average > worst {
            worst = average;
            worst_start = start;
        }
    }
    Ok(ComplianceReport {
        compliant: worst <= cfg.threshold() + tolerance,
        worst_window_start: worst_start,
        worst_window_average: worst,
        margin: cfg.threshold() - worst,
    })
}

/// Empirical average alpha-fair utility of a control sequence.
pub fn score_trace(gammas: &[f64], alpha: f64) -> Result<f64> {
    if gammas.is_empty() {
        return Err(Error::InvalidInput("cannot score an empty trace".into()));
    }
    let total = gammas
        .iter()
        .map(|&g| alpha_fair(g, alpha))
        .sum::<Result<f64>>()?;
    Ok(total / gammas.len() as f64)
}

/// Sample mean and 95% normal-approximation half-width.
pub fn mean_half_width(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub load: f64,
    pub v_weight: f64,
    pub mean_score: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub load: f64,
    pub v_star: f64,
    pub mean_score: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub grid: Vec<SweepPoint>,
}

/// For every load, the `V` in `v_grid` maximising the mean trace score over
/// `replications` runs of `base.policy`. Replication `r` sees the same demand
/// for every `V`. Ties go to the smaller `V`.
pub fn sweep_v(
    base: &SimConfig,
    loads: &[f64],
    v_grid: &[f64],
    replications: usize,
) -> Result<SweepResult> {
    if loads.is_empty() || v_grid.is_empty() {
        return Err(Error::InvalidInput("sweep grids must be nonempty".into()));
    }
    if replications == 0 {
        return Err(Error::InvalidInput("replications must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(loads.len());
    let mut grid = Vec::with_capacity(loads.len() * v_grid.len());
    for &load in loads {
        let configs = v_grid
            .iter()
            .map(|&v| {
                Ok(SimConfig {
                    dpp: base.dpp.with_v_weight(v)?,
                    ..base.with_load(load)
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let jobs: Vec<(usize, u64)> = (0..configs.len())
            .flat_map(|i| (0..replications as u64).map(move |r| (i, r)))
            .collect();
        let scores = jobs
            .par_iter()
            .map(|&(i, r)| {
                let trace = run_simulation(&configs[i], r)?;
                score_trace(&trace.gammas(), base.dpp.alpha())
            })
            .collect::<Result<Vec<f64>>>()?;

        let mut best: Option<SweepPoint> = None;
        for (i, chunk) in scores.chunks(replications).enumerate() {
            let (mean_score, half_width) = mean_half_width(chunk);
            let point = SweepPoint {
                load,
                v_weight: v_grid[i],
                mean_score,
                half_width,
            };
            grid.push(point);
            let better = match best {
                None => true,
                Some(b) => {
                    point.mean_score > b.mean_score
                        || (point.mean_score == b.mean_score && point.v_weight < b.v_weight)
                }
            };
            if better {
                best = Some(point);
            }
        }
        let best = best.expect("v_grid is nonempty");
        rows.push(SweepRow {
            load,
            v_star: best.v_weight,
            mean_score: best.mean_score,
            half_width: best.half_width,
        });
    }
    Ok(SweepResult { rows, grid })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BudgetGapRow {
    pub load: f64,
    pub mean_budget_exact: f64,
    pub mean_budget_conservative: f64,
    pub mean_gap: f64,
    /// Share of periods whose whole stored window sits at or above `ρC̄`.
    pub all_above_fraction: f64,
}

/// Time- and replication-averaged exact and conservative budgets along
/// greedy (exact budget) traces.
pub fn compare_budgets(
    base: &SimConfig,
    loads: &[f64],
    replications: usize,
) -> Result<Vec<BudgetGapRow>> {
    if loads.is_empty() {
        return Err(Error::InvalidInput("load grid must be nonempty".into()));
    }
    if replications == 0 {
        return Err(Error::InvalidInput("replications must be at least 1".into()));
    }
    loads
        .iter()
        .map(|&load| {
            let cfg = base.with_load(load).with_policy(PolicyKind::GreedyExact);
            let per_rep = (0..replications as u64)
                .into_par_iter()
                .map(|r| {
                    let trace = run_simulation(&cfg, r)?;
                    let n = trace.records.len() as f64;
                    let above = all_above_periods(&trace.consumption(), &cfg.emf);
                    Ok((
                        trace.summary.mean_budget_exact,
                        trace.summary.mean_budget_conservative,
                        trace
                            .records
                            .iter()
                            .map(|r| r.budget_exact - r.budget_conservative)
                            .sum::<f64>()
                            / n,
                        above as f64 / n,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            let reps = per_rep.len() as f64;
            let avg = |f: fn(&(f64, f64, f64, f64)) -> f64| per_rep.iter().map(f).sum::<f64>() / reps;
            Ok(BudgetGapRow {
                load,
                mean_budget_exact: avg(|x| x.0),
                mean_budget_conservative: avg(|x| x.1),
                mean_gap: avg(|x| x.2),
                all_above_fraction: avg(|x| x.3),
            })
        })
        .collect()
}

/// Number of periods `t` at which every stored sample `c_{t−1}..c_{t−W+1}`
/// (zero before period 0) is at least `ρC̄`.
pub fn all_above_periods(consumption: &[f64], cfg: &EmfConfig) -> usize {
    let floor = cfg.floor();
    let need = cfg.window() - 1;
    let mut run = if 0.0 >= floor { need } else { 0 };
    let mut count = 0;
    for &c in consumption {
        if run >= need {
            count += 1;
        }
        run = if c >= floor { (run + 1).min(need) } else { 0 };
    }
    count
}
