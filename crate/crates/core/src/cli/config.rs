//! Parameter resolution: command-line flag, then config file, then built-in
//! default. The default seed can also be supplied through `EIRP_SEED`.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::budget::EmfConfig;
use crate::policy::{DppConfig, PolicyKind};
use crate::sim::{SimConfig, DEFAULT_HORIZON, DEFAULT_REPLICATIONS};
use crate::traffic::{TrafficConfig, DEFAULT_ZIPF_EXPONENT, DEFAULT_ZIPF_SUPPORT};

pub const SEED_ENV: &str = "EIRP_SEED";

/// Model parameters shared by the simulation subcommands.
#[derive(Args, Debug, Clone, Default)]
pub struct ModelArgs {
    /// Flat JSON config file; keys mirror the flag names.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_policy)]
    pub policy: Option<PolicyKind>,
    /// Window length in periods.
    #[arg(long = "W")]
    pub window: Option<usize>,
    /// Actual EIRP threshold (linear units).
    #[arg(long = "C-bar")]
    pub threshold: Option<f64>,
    /// Guaranteed EIRP ratio.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Drift-plus-penalty weight.
    #[arg(long = "V")]
    pub v_weight: Option<f64>,
    /// Probability of a nonzero demand per period.
    #[arg(long)]
    pub load: Option<f64>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "zipf-exponent")]
    pub zipf_exponent: Option<f64>,
    #[arg(long = "zipf-support")]
    pub zipf_support: Option<u64>,
    /// EIRP units per unit Zipf draw (default C-bar / 4).
    #[arg(long = "demand-scale")]
    pub demand_scale: Option<f64>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Report headline quantities in dBm, taking C-bar to be this many dBm.
    #[arg(long = "c-bar-dbm")]
    pub c_bar_dbm: Option<f64>,
}

fn parse_policy(s: &str) -> Result<PolicyKind, String> {
    s.parse().map_err(|e: crate::Error| e.to_string())
}

/// Config-file contents; every key optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub policy: Option<PolicyKind>,
    #[serde(rename = "W")]
    pub window: Option<usize>,
    #[serde(rename = "C-bar")]
    pub threshold: Option<f64>,
    pub rho: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    #[serde(rename = "V")]
    pub v_weight: Option<f64>,
    pub load: Option<f64>,
    pub horizon: Option<usize>,
    pub seed: Option<u64>,
    #[serde(rename = "zipf-exponent")]
    pub zipf_exponent: Option<f64>,
    #[serde(rename = "zipf-support")]
    pub zipf_support: Option<u64>,
    #[serde(rename = "demand-scale")]
    pub demand_scale: Option<f64>,
    pub reps: Option<usize>,
    #[serde(rename = "c-bar-dbm")]
    pub c_bar_dbm: Option<f64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: bad config file: {e}", path.display())))
    }
}

/// Every parameter with its final value. Serialises to the same flat form a
/// config file uses, so a manifest's config block can be fed back in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolvedConfig {
    pub policy: PolicyKind,
    #[serde(rename = "W")]
    pub window: usize,
    #[serde(rename = "C-bar")]
    pub threshold: f64,
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
    #[serde(rename = "V")]
    pub v_weight: f64,
    pub load: f64,
    pub horizon: usize,
    pub seed: u64,
    #[serde(rename = "zipf-exponent")]
    pub zipf_exponent: f64,
    #[serde(rename = "zipf-support")]
    pub zipf_support: u64,
    #[serde(rename = "demand-scale")]
    pub demand_scale: f64,
    pub reps: usize,
    #[serde(rename = "c-bar-dbm", skip_serializing_if = "Option::is_none", default)]
    pub c_bar_dbm: Option<f64>,
}

fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

impl ResolvedConfig {
    pub fn resolve(args: &ModelArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let emf = EmfConfig::default();
        let dpp = DppConfig::default();
        let threshold = args.threshold.or(file.threshold).unwrap_or(emf.threshold());
        let seed = match args.seed.or(file.seed) {
            Some(s) => s,
            None => env_seed()?.unwrap_or(0),
        };
        Ok(Self {
            policy: args.policy.or(file.policy).unwrap_or(PolicyKind::DppExact),
            window: args.window.or(file.window).unwrap_or(emf.window()),
            threshold,
            rho: args.rho.or(file.rho).unwrap_or(emf.guaranteed_ratio()),
            alpha: args.alpha.or(file.alpha).unwrap_or(dpp.alpha()),
            beta: args.beta.or(file.beta).unwrap_or(dpp.beta()),
            v_weight: args.v_weight.or(file.v_weight).unwrap_or(dpp.v_weight()),
            load: args.load.or(file.load).unwrap_or(0.5),
            horizon: args.horizon.or(file.horizon).unwrap_or(DEFAULT_HORIZON),
            seed,
            zipf_exponent: args
                .zipf_exponent
                .or(file.zipf_exponent)
                .unwrap_or(DEFAULT_ZIPF_EXPONENT),
            zipf_support: args
                .zipf_support
                .or(file.zipf_support)
                .unwrap_or(DEFAULT_ZIPF_SUPPORT),
            demand_scale: args
                .demand_scale
                .or(file.demand_scale)
                .unwrap_or(threshold / 4.0),
            reps: args.reps.or(file.reps).unwrap_or(DEFAULT_REPLICATIONS),
            c_bar_dbm: args.c_bar_dbm.or(file.c_bar_dbm),
        })
    }

    pub fn emf(&self) -> crate::Result<EmfConfig> {
        EmfConfig::new(self.window, self.threshold, self.rho)
    }

    pub fn sim_config(&self) -> crate::Result<SimConfig> {
        let cfg = SimConfig {
            emf: self.emf()?,
            dpp: DppConfig::new(self.v_weight, self.alpha, self.beta)?,
            traffic: TrafficConfig::new(
                self.load,
                self.zipf_exponent,
                self.zipf_support,
                self.demand_scale,
                self.seed,
            )?,
            horizon: self.horizon,
            policy: self.policy,
            replications: self.reps,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
