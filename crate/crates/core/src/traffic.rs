//! Sparse Zipf demand and the cap/backlog consumption model.
//!
//! Each period a demand arrives with probability `load`; its size is
//! `demand_scale · Z` with `P(Z = k) ∝ k^{−s}` on `{1..K}`. Demand is expressed
//! directly in EIRP-consumption units. Whatever the control does not serve is
//! carried over to the next period.
//!
//! Randomness comes from ChaCha8 seeded with the configured seed; replication
//! `r` uses stream `r` of that seed, so replications never share draws and the
//! sequence is identical across platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use serde::Serialize;

use crate::error::{check_consumption, Error, Result};

pub const DEFAULT_ZIPF_EXPONENT: f64 = 2.0;
pub const DEFAULT_ZIPF_SUPPORT: u64 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrafficConfig {
    pub load: f64,
    pub zipf_exponent: f64,
    pub zipf_support: u64,
    pub demand_scale: f64,
    pub seed: u64,
}

impl TrafficConfig {
    pub fn new(
        load: f64,
        zipf_exponent: f64,
        zipf_support: u64,
        demand_scale: f64,
        seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            load,
            zipf_exponent,
            zipf_support,
            demand_scale,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Default shape for a given threshold: exponent 2, support 20 and a unit
    /// draw worth a quarter of the threshold.
    pub fn with_defaults(threshold: f64, load: f64, seed: u64) -> Result<Self> {
        Self::new(
            load,
            DEFAULT_ZIPF_EXPONENT,
            DEFAULT_ZIPF_SUPPORT,
            threshold / 4.0,
            seed,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.load) {
            return Err(Error::InvalidConfig(format!(
                "load must lie in [0, 1], got {}",
                self.load
            )));
        }
        if !(self.zipf_exponent.is_finite() && self.zipf_exponent > 1.0) {
            return Err(Error::InvalidConfig(format!(
                "zipf exponent must exceed 1, got {}",
                self.zipf_exponent
            )));
        }
        if self.zipf_support == 0 {
            return Err(Error::InvalidConfig("zipf support must be at least 1".into()));
        }
        if !(self.demand_scale.is_finite() && self.demand_scale > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "demand scale must be positive, got {}",
                self.demand_scale
            )));
        }
        Ok(())
    }
}

/// Demand generator plus the backlog of unserved demand.
#[derive(Debug, Clone)]
pub struct TrafficState {
    cfg: TrafficConfig,
    zipf: Zipf<f64>,
    rng: ChaCha8Rng,
    backlog: f64,
}

impl TrafficState {
    pub fn new(cfg: &TrafficConfig, replication: u64) -> Result<Self> {
        cfg.validate()?;
        let zipf = Zipf::new(cfg.zipf_support as f64, cfg.zipf_exponent)
            .map_err(|e| Error::InvalidConfig(format!("zipf: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(replication);
        Ok(Self {
            cfg: *cfg,
            zipf,
            rng,
            backlog: 0.0,
        })
    }

    pub fn backlog(&self) -> f64 {
        self.backlog
    }

    /// Next period's fresh demand `d_t`.
    pub fn sample_demand(&mut self) -> f64 {
        let active = self.rng.random::<f64>() < self.cfg.load;
        if active {
            self.cfg.demand_scale * self.zipf.sample(&mut self.rng)
        } else {
            0.0
        }
    }

    /// Serves `min(backlog + d_t, γ)` and carries the rest over.
    pub fn consume(&mut self, demand: f64, gamma: f64) -> Result<f64> {
        check_consumption(demand)?;
        if !(gamma >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "control must be nonnegative, got {gamma}"
            )));
        }
        let requested = self.backlog + demand;
        let served = requested.min(gamma);
        self.backlog = requested - served;
        Ok(served)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traffic(load: f64, support: u64, exponent: f64) -> TrafficConfig {
        TrafficConfig::new(load, exponent, support, 0.5, 11).unwrap()
    }

    #[test]
    fn zero_load_never_demands() {
        let mut s = TrafficState::new(&traffic(0.0, 20, 2.0), 0).unwrap();
        assert!((0..1000).all(|_| s.sample_demand() == 0.0));
    }

    #[test]
    fn degenerate_support_is_constant() {
        let mut s = TrafficState::new(&traffic(1.0, 1, 2.0), 3).unwrap();
        assert!((0..1000).all(|_| s.sample_demand() == 0.5));
    }

    #[test]
    fn two_point_zipf_frequency() {
        // P(Z = 1) = 1 / (1 + 2^{−2}) = 0.8
        let mut s = TrafficState::new(&traffic(1.0, 2, 2.0), 0).unwrap();
        let n = 100_000;
        let ones = (0..n).filter(|_| s.sample_demand() == 0.5).count();
        let p = ones as f64 / n as f64;
        assert!((p - 0.8).abs() < 0.02, "empirical P(Z=1) = {p}");
    }

    #[test]
    fn load_controls_activity() {
        let mut s = TrafficState::new(&traffic(0.3, 20, 2.0), 0).unwrap();
        let n = 50_000;
        let active = (0..n).filter(|_| s.sample_demand() > 0.0).count();
        assert!((active as f64 / n as f64 - 0.3).abs() < 0.01);
    }

    #[test]
    fn values_are_scaled_integers() {
        let mut s = TrafficState::new(&traffic(1.0, 20, 1.5), 0).unwrap();
        for _ in 0..1000 {
            let z = s.sample_demand() / 0.5;
            assert!((1.0..=20.0).contains(&z) && z.fract() == 0.0);
        }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let cfg = traffic(0.5, 20, 2.0);
        let draw = |rep| {
            let mut s = TrafficState::new(&cfg, rep).unwrap();
            (0..200).map(|_| s.sample_demand()).collect::<Vec<_>>()
        };
        assert_eq!(draw(4), draw(4));
        assert_ne!(draw(4), draw(5));
    }

    #[test]
    fn consume_examples() {
        let cfg = traffic(0.5, 20, 2.0);
        let mut s = TrafficState::new(&cfg, 0).unwrap();
        assert_eq!(s.consume(0.3, 1.0).unwrap(), 0.3);
        assert_eq!(s.backlog(), 0.0);

        s.backlog = 0.4;
        assert_eq!(s.consume(0.3, 0.5).unwrap(), 0.5);
        assert!((s.backlog() - 0.2).abs() < 1e-12);

        let mut s = TrafficState::new(&cfg, 0).unwrap();
        assert_eq!(s.consume(0.7, 0.0).unwrap(), 0.0);
        assert_eq!(s.backlog(), 0.7);
        assert!(s.consume(-1.0, 1.0).is_err());
        assert!(s.consume(1.0, -1.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrafficConfig::new(1.5, 2.0, 20, 0.25, 0).is_err());
        assert!(TrafficConfig::new(0.5, 1.0, 20, 0.25, 0).is_err());
        assert!(TrafficConfig::new(0.5, 2.0, 0, 0.25, 0).is_err());
        assert!(TrafficConfig::new(0.5, 2.0, 20, 0.0, 0).is_err());
        let d = TrafficConfig::with_defaults(2.0, 0.5, 9).unwrap();
        assert_eq!(d.demand_scale, 0.5);
    }
}
