use core::fmt;

use serde::{Deserialize, Serialize};

/// Churn-process parameterization and engine schedule for one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Initial node count.
    pub n0: u32,
    /// Key-space size is `2^bits`; also the finger-table length.
    pub bits: u32,
    /// Successor-list length `S`.
    pub succ_len: usize,
    /// Stabilization-to-failure rate ratio `r`.
    pub stab_ratio: f64,
    /// Fraction of stabilizations devoted to the successor pointer.
    pub alpha: f64,
    /// Failure (and join) rate per node; pure time normalization.
    pub lambda_f: f64,
    /// Seed; fully determines the run.
    pub seed: u64,
    /// Churn/stabilization events to process before measuring.
    pub burnin_events: u64,
    /// Events to process while measuring.
    pub measure_events: u64,
    /// Probe lookups per metrics sample.
    pub probe_lookups_per_sample: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        let n0 = 1000;
        SimConfig {
            n0,
            bits: 20,
            succ_len: 6,
            stab_ratio: 500.0,
            alpha: 0.5,
            lambda_f: 1.0,
            seed: 1,
            burnin_events: 20 * n0 as u64,
            measure_events: 200 * n0 as u64,
            probe_lookups_per_sample: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfigError(pub &'static str);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid simulation config: {}", self.0)
    }
}

impl core::error::Error for ConfigError {}

impl SimConfig {
    pub fn key_space(&self) -> u64 {
        1u64 << self.bits
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.bits < 3 || self.bits > 26 {
            return Err(ConfigError("bits must be in 3..=26"));
        }
        if (self.n0 as u64) >= self.key_space() {
            return Err(ConfigError("initial node count must be below the key-space size"));
        }
        if self.succ_len == 0 {
            return Err(ConfigError("successor list length must be >= 1"));
        }
        if (self.n0 as usize) < self.succ_len + 2 {
            return Err(ConfigError("initial node count must be at least S + 2"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(ConfigError("alpha must be in [0, 1]"));
        }
        if !(self.stab_ratio >= 0.0) {
            return Err(ConfigError("stabilization ratio must be >= 0"));
        }
        if !(self.lambda_f > 0.0) {
            return Err(ConfigError("lambda_f must be positive"));
        }
        Ok(())
    }
}
