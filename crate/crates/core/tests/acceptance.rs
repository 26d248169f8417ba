//! Acceptance suite. Prints one `[PASS]` or `[FAIL]` line per criterion and
//! exits nonzero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use eirp_core::bench::{linear_fit, measure, Algorithm, Workload};
use eirp_core::budget::oracle::{budget_oracle_minform, omega_naive};
use eirp_core::{
    budget_from_omega, budget_scratch, compare_budgets, queue_update, run_simulation, sweep_v,
    verify_compliance, BudgetState, ConservativeBudgetState, DppState, EmfConfig,
    PolicyKind, SimConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const AGREEMENT_TOL: f64 = 1e-9;
const COMPLIANCE_TOL: f64 = 1e-9;

const SUITE_SEQUENCES: usize = 1000;
const SUITE_LEN: usize = 200;
const SUITE_WINDOWS: [usize; 6] = [1, 2, 3, 5, 10, 32];
const SUITE_RHOS: [f64; 4] = [0.0, 0.15, 0.5, 1.0];

const SEEDS: u64 = 100;
const COMPLIANCE_LOADS: [f64; 4] = [0.05, 0.2, 0.5, 0.9];
const COMPLIANCE_HORIZON: usize = 10_000;

/// High-load bursty scenario: every period carries a demand whose mean is
/// well above `C̄`.
const BURST_LOAD: f64 = 1.0;
const BURST_SCALE: f64 = 1.0;

const SWEEP_LOADS: [f64; 7] = [0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9];
const V_GRID: [f64; 10] = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0];
const COMPARE_LOADS: [f64; 9] = [0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9, 1.0];
const BENCH_WINDOWS: [usize; 4] = [10, 100, 1_000, 10_000];

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

struct Case {
    cfg: EmfConfig,
    seq: Vec<f64>,
}

fn suite() -> Vec<Case> {
    (0..SUITE_SEQUENCES)
        .map(|i| {
            let w = SUITE_WINDOWS[i % SUITE_WINDOWS.len()];
            let rho = SUITE_RHOS[(i / SUITE_WINDOWS.len()) % SUITE_RHOS.len()];
            let cfg = EmfConfig::new(w, 1.0, rho).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
            let seq = (0..SUITE_LEN)
                .map(|_| rng.random_range(0.0..=2.0 * cfg.threshold()))
                .collect();
            Case { cfg, seq }
        })
        .collect()
}

fn oracle_equivalence(cases: &[Case]) -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut mismatches = 0usize;
    for case in cases {
        let cfg = &case.cfg;
        let w = cfg.window();
        let mut state = BudgetState::new(*cfg);
        for t in 0..=case.seq.len() {
            let naive = budget_from_omega(omega_naive(&case.seq, t, cfg).unwrap().omega, cfg);
            let lo = t.saturating_sub(w - 1);
            let scratch = budget_scratch(&case.seq[lo..t], cfg).budget;
            let minform = budget_oracle_minform(&case.seq, t, cfg).unwrap();
            let iterated = state.budget();
            for v in [scratch, minform, iterated] {
                let err = (v - naive).abs();
                worst = worst.max(err);
                if err > AGREEMENT_TOL {
                    mismatches += 1;
                }
            }
            if t < case.seq.len() {
                state.update(case.seq[t]).unwrap();
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        mismatches == 0 && elapsed < Duration::from_secs(10),
        format!(
            "{} sequences, max deviation {worst:.2e}, {mismatches} mismatches, {:.2} s",
            cases.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn conservative_bound(cases: &[Case]) -> Outcome {
    let (mut periods, mut above, mut below, mut eq_all_above, mut eq_all_zero) = (0, 0, 0, 0, 0);
    let mut worst_above = 0.0f64;
    let mut zero_mismatch = 0;
    for (i, case) in cases.iter().enumerate() {
        // every fourth sequence gets zero runs so the all-zero case is exercised
        let seq: Vec<f64> = if i % 4 == 3 {
            case.seq
                .iter()
                .enumerate()
                .map(|(t, &c)| if (t / 40) % 2 == 0 { 0.0 } else { c })
                .collect()
        } else {
            case.seq.clone()
        };
        let cfg = &case.cfg;
        let w = cfg.window();
        let mut exact = BudgetState::new(*cfg);
        let mut cons = ConservativeBudgetState::new(*cfg);
        for t in 0..=seq.len() {
            let (g, gt) = (exact.budget(), cons.budget());
            periods += 1;
            if gt > g + AGREEMENT_TOL {
                above += 1;
            }
            let recent = &seq[t.saturating_sub(w - 1)..t];
            if recent.iter().all(|&c| c >= cfg.floor()) {
                eq_all_above += 1;
                worst_above = worst_above.max((g - gt).abs());
                if (g - gt).abs() > AGREEMENT_TOL {
                    below += 1;
                }
            }
            if recent.iter().all(|&c| c == 0.0) {
                eq_all_zero += 1;
                if g != gt {
                    zero_mismatch += 1;
                }
            }
            if t < seq.len() {
                exact.update(seq[t]).unwrap();
                cons.update(seq[t]).unwrap();
            }
        }
    }
    check(
        above == 0 && below == 0 && zero_mismatch == 0 && eq_all_above > 0 && eq_all_zero > 0,
        format!(
            "{periods} periods, {above} with conservative above exact; \
             all-above windows {eq_all_above} (max gap {worst_above:.2e}, {below} unequal); \
             all-zero windows {eq_all_zero} ({zero_mismatch} unequal)"
        ),
    )
}

fn base_config() -> SimConfig {
    SimConfig::default()
}

/// Runs every policy over the compliance grid, handing each trace's
/// consumption to `visit` along with its configuration.
fn compliance_traces(mut visit: impl FnMut(&SimConfig, &[f64])) {
    for scale in [None, Some(BURST_SCALE)] {
        for &load in &COMPLIANCE_LOADS {
            for policy in PolicyKind::ALL {
                let mut cfg = base_config().with_load(load).with_policy(policy);
                cfg.horizon = COMPLIANCE_HORIZON;
                if let Some(s) = scale {
                    cfg.traffic.demand_scale = s * cfg.emf.threshold();
                }
                for seed in 0..SEEDS {
                    let trace = run_simulation(&cfg, seed).unwrap();
                    visit(&cfg, &trace.consumption());
                }
            }
        }
    }
}

/// Longest run of consecutive periods after which the `β = 1` queue stays
/// above `slack`, and the largest nonzero queue value counted as drained.
fn longest_positive_queue_run(consumption: &[f64], cfg: &SimConfig, slack: f64) -> (usize, f64) {
    let dpp = cfg.dpp.with_beta(1.0).unwrap();
    let mut q = DppState::default();
    let (mut run, mut longest, mut residue) = (0usize, 0usize, 0.0f64);
    for &c in consumption {
        q = queue_update(q, c, &cfg.emf, &dpp).unwrap();
        if q.queue <= slack {
            residue = residue.max(q.queue);
            run = 0;
        } else {
            run += 1;
        }
        longest = longest.max(run);
    }
    (longest, residue)
}

fn compliance_and_queue() -> (Outcome, Outcome) {
    let (mut traces, mut violations, mut compliant, mut offending) = (0, 0, 0, 0);
    let mut worst_margin = f64::INFINITY;
    let (mut longest, mut residue) = (0, 0.0f64);
    compliance_traces(|cfg, c| {
        let report = verify_compliance(c, &cfg.emf, COMPLIANCE_TOL).unwrap();
        traces += 1;
        worst_margin = worst_margin.min(report.margin);
        if !report.compliant {
            violations += 1;
            return;
        }
        compliant += 1;
        // a window accepted by the verifier may overshoot W·C̄ by W·tol
        let slack = cfg.emf.window() as f64 * COMPLIANCE_TOL;
        let (run, r) = longest_positive_queue_run(c, cfg, slack);
        longest = longest.max(run);
        residue = residue.max(r);
        if run >= cfg.emf.window() {
            offending += 1;
        }
    });
    (
        check(
            violations == 0,
            format!(
                "{traces} traces of {COMPLIANCE_HORIZON} periods, {violations} violations, \
                 smallest margin {worst_margin:.3e}"
            ),
        ),
        check(
            offending == 0 && compliant > 0,
            format!(
                "{compliant} compliant traces, {offending} with W consecutive nonzero \
                 queue values, longest nonzero run {longest}, largest drained residue {residue:.2e}"
            ),
        ),
    )
}

fn burst_config(policy: PolicyKind) -> SimConfig {
    let mut cfg = base_config().with_load(BURST_LOAD).with_policy(policy);
    cfg.traffic.demand_scale = BURST_SCALE * cfg.emf.threshold();
    cfg
}

fn greedy_versus_dpp() -> Outcome {
    let start = Instant::now();
    let greedy = burst_config(PolicyKind::GreedyExact);
    let dpp = burst_config(PolicyKind::DppExact);
    let (mut floor_wins, mut score_wins) = (0, 0);
    for seed in 0..SEEDS {
        let g = run_simulation(&greedy, seed).unwrap().summary;
        let d = run_simulation(&dpp, seed).unwrap().summary;
        floor_wins += usize::from(g.floor_periods > d.floor_periods);
        score_wins += usize::from(d.mean_utility.unwrap() > g.mean_utility.unwrap());
    }
    let elapsed = start.elapsed();
    check(
        floor_wins >= 90 && score_wins >= 90 && elapsed < Duration::from_secs(60),
        format!(
            "greedy floors more often in {floor_wins}/{SEEDS} pairs, \
             dpp scores higher in {score_wins}/{SEEDS}, {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let less = xs.iter().filter(|&&y| y < x).count() as f64;
            let ties = xs.iter().filter(|&&y| y == x).count() as f64;
            less + (ties + 1.0) / 2.0
        })
        .collect()
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn optimal_v_trend() -> Outcome {
    let base = burst_config(PolicyKind::DppExact);
    let result = sweep_v(&base, &SWEEP_LOADS, &V_GRID, SEEDS as usize).unwrap();
    let v: Vec<f64> = result.rows.iter().map(|r| r.v_star).collect();
    let rho = spearman(&SWEEP_LOADS, &v);
    // a constant V* has no rank correlation; NaN fails the comparison
    check(
        rho <= -0.6,
        format!("V* over loads {SWEEP_LOADS:?} = {v:?}, Spearman {rho:.3}"),
    )
}

fn budget_gap_profile() -> Outcome {
    let base = base_config();
    let rows = compare_budgets(&base, &COMPARE_LOADS, SEEDS as usize).unwrap();
    let c_bar = base.emf.threshold();
    let w = base.emf.window() as f64;
    let first = rows.first().unwrap();
    let last = rows.last().unwrap();
    let peak = rows[1..rows.len() - 1]
        .iter()
        .max_by(|a, b| a.mean_gap.total_cmp(&b.mean_gap))
        .unwrap();
    check(
        first.mean_gap < 0.01 * c_bar * w
            && last.mean_gap < 0.01 * c_bar * w
            && peak.mean_gap > 0.05 * c_bar,
        format!(
            "gap {:.3e} at load {}, {:.3e} at load {} (all-above share {:.3}), \
             peak {:.3} at load {}",
            first.mean_gap,
            first.load,
            last.mean_gap,
            last.load,
            last.all_above_fraction,
            peak.mean_gap,
            peak.load
        ),
    )
}

fn p50(alg: Algorithm, w: usize, workload: Workload) -> f64 {
    let cfg = EmfConfig::new(w, 1.0, 0.15).unwrap();
    let updates = if alg == Algorithm::Scratch { 20_000 } else { 200_000 };
    measure(alg, &cfg, workload, updates, 32, 7).unwrap().p50_ns
}

fn complexity() -> Outcome {
    let cons: Vec<f64> = BENCH_WINDOWS
        .iter()
        .map(|&w| p50(Algorithm::ConservativeUpdate, w, Workload::RandomCompliant))
        .collect();
    let scratch: Vec<f64> = BENCH_WINDOWS
        .iter()
        .map(|&w| p50(Algorithm::Scratch, w, Workload::RandomCompliant))
        .collect();
    let spread = cons.iter().cloned().fold(0.0, f64::max)
        / cons.iter().cloned().fold(f64::INFINITY, f64::min);
    let xs: Vec<f64> = BENCH_WINDOWS.iter().map(|&w| w as f64).collect();
    let (_, _, r2) = linear_fit(&xs, &scratch);
    let big = *BENCH_WINDOWS.last().unwrap();
    let exact_big = p50(Algorithm::ExactUpdate, big, Workload::AllAbove);
    let scratch_big = p50(Algorithm::Scratch, big, Workload::AllAbove);
    let ratio = exact_big / scratch_big;
    check(
        spread < 2.0 && r2 >= 0.95 && ratio <= 0.10,
        format!(
            "conservative p50 {cons:.1?} ns (spread {spread:.2}x); \
             scratch p50 {scratch:.0?} ns (R² {r2:.4}); \
             exact/scratch at W={big} all-above {ratio:.4}"
        ),
    )
}

fn eirp(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_eirp"))
        .args(args)
        .env_remove("EIRP_SEED")
        .output()
        .expect("binary runs")
        .status
        .code()
        .unwrap_or(-1)
}

/// Every file in `first` except manifests, compared byte for byte with its
/// namesake in `second`.
fn diff_outputs(first: &Path, second: &Path) -> Vec<String> {
    let mut bad = Vec::new();
    for entry in std::fs::read_dir(first).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if name.ends_with(".manifest.json") {
            continue;
        }
        match std::fs::read(second.join(&name)) {
            Ok(bytes) if bytes == std::fs::read(&path).unwrap() => {}
            _ => bad.push(name),
        }
    }
    bad
}

fn replay_determinism() -> Outcome {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let out = |name: &str| first.path().join(name).to_string_lossy().into_owned();
    let runs: [(&str, Vec<String>); 3] = [
        (
            "trace.csv",
            ["simulate", "--seed", "11", "--load", "0.7", "--horizon", "2000"]
                .map(String::from)
                .to_vec(),
        ),
        (
            "sweep.csv",
            ["sweep-v", "--seed", "3", "--reps", "20", "--loads", "0.1,0.5,0.9"]
                .map(String::from)
                .to_vec(),
        ),
        (
            "gap.csv",
            ["compare-budgets", "--seed", "5", "--reps", "20"]
                .map(String::from)
                .to_vec(),
        ),
    ];
    let mut problems = Vec::new();
    for (file, args) in &runs {
        let mut full: Vec<&str> = args.iter().map(String::as_str).collect();
        let target = out(file);
        full.extend(["--out", target.as_str()]);
        let code = eirp(&full);
        if code != 0 {
            problems.push(format!("{} exited {code}", args[0]));
            continue;
        }
        let manifest = Path::new(&target).with_extension("manifest.json");
        let code = eirp(&[
            "replay",
            "--manifest",
            &manifest.to_string_lossy(),
            "--out-dir",
            &second.path().to_string_lossy(),
        ]);
        if code != 0 {
            problems.push(format!("replay of {} exited {code}", args[0]));
        }
    }
    let files = std::fs::read_dir(first.path()).unwrap().count();
    problems.extend(diff_outputs(first.path(), second.path()));
    check(
        problems.is_empty(),
        format!("{files} files from simulate, sweep-v, compare-budgets replayed; differing: {problems:?}"),
    )
}

fn main() {
    let start = Instant::now();
    let cases = suite();
    let (compliance, queue) = compliance_and_queue();
    let results: Vec<(&str, Outcome)> = vec![
        ("1 budget oracle equivalence", oracle_equivalence(&cases)),
        ("2 conservative budget never exceeds exact", conservative_bound(&cases)),
        ("3 end-to-end compliance", compliance),
        ("4 unit-drain queue empties within every window", queue),
        ("5 greedy versus drift-plus-penalty under bursty load", greedy_versus_dpp()),
        ("6 optimal V falls with load", optimal_v_trend()),
        ("7 budget gap profile over load", budget_gap_profile()),
        ("8 per-update cost scaling", complexity()),
        ("9 manifest replay is byte-identical", replay_determinism()),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("[PASS] criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] criterion {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {}/{} passed in {:.1} s",
        results.len() - failed,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
