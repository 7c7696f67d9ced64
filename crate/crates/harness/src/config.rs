//! Run configuration read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spinchain::krotov::{KrotovSettings, DEFAULT_STEP_WEIGHT, DEFAULT_STRENGTH_GAIN};
use spinchain::model::{make_chain, ChainConfig, ControlPulse};

use crate::error::{HarnessError, Result};
use crate::io::read_pulse;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub chain: ChainSection,
    #[serde(default)]
    pub baseline: BaselineSection,
    #[serde(default)]
    pub krotov: KrotovSection,
    #[serde(default)]
    pub scan: Option<ScanSection>,
    #[serde(default)]
    pub outputs: OutputsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub n_sites: usize,
    #[serde(default = "one")]
    pub coupling: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Needed by every command except `scan`, which picks its own times.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_time: Option<f64>,
}

/// Seed pulse: either a linear ramp `d = ramp_speed * t`, `C = strength`, or
/// a pulse file. Omitted ramp values default to `(N - 1)/T` and 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ramp_speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KrotovSection {
    #[serde(default = "default_step_weight")]
    pub step_weight: f64,
    #[serde(default = "default_strength_gain")]
    pub strength_gain: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_threshold")]
    pub infidelity_threshold: f64,
    #[serde(default = "yes")]
    pub adaptive_backoff: bool,
}

impl Default for KrotovSection {
    fn default() -> Self {
        Self {
            step_weight: DEFAULT_STEP_WEIGHT,
            strength_gain: DEFAULT_STRENGTH_GAIN,
            max_iterations: default_max_iterations(),
            infidelity_threshold: default_threshold(),
            adaptive_backoff: true,
        }
    }
}

/// Speed-limit scan. Times are given per chain edge, `T = x (N - 1)`: a
/// descending coarse sweep from `per_edge_max` in steps of `per_edge_step`
/// runs down to `per_edge_min`, or until `patience` cells in a row miss the
/// threshold. Then `bisection_steps` halvings narrow the gap between the
/// shortest passing time and the failing grid point below it. The optimizer's
/// outcome is not monotone in `T`, hence the patience.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub n_list: Vec<usize>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_budget")]
    pub iterations: usize,
    #[serde(default = "default_edge_max")]
    pub per_edge_max: f64,
    #[serde(default = "default_edge_step")]
    pub per_edge_step: f64,
    #[serde(default = "default_edge_min")]
    pub per_edge_min: f64,
    #[serde(default = "default_bisection")]
    pub bisection_steps: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsSection {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    /// Steps between trajectory rows; 0 picks about 1000 rows.
    #[serde(default)]
    pub snapshot_stride: usize,
    /// Fractions of `T` at which full site-probability snapshots are written.
    #[serde(default = "default_fractions")]
    pub snapshot_fractions: Vec<f64>,
}

impl Default for OutputsSection {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            snapshot_stride: 0,
            snapshot_fractions: default_fractions(),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_dt() -> f64 {
    0.01
}
fn default_step_weight() -> f64 {
    DEFAULT_STEP_WEIGHT
}
fn default_strength_gain() -> f64 {
    DEFAULT_STRENGTH_GAIN
}
fn default_max_iterations() -> usize {
    1000
}
fn default_threshold() -> f64 {
    1e-3
}
fn default_budget() -> usize {
    5000
}
fn default_edge_max() -> f64 {
    1.5
}
fn default_edge_step() -> f64 {
    0.1
}
fn default_edge_min() -> f64 {
    0.2
}
fn default_bisection() -> usize {
    4
}
fn default_patience() -> usize {
    3
}
fn default_directory() -> PathBuf {
    PathBuf::from("out")
}
fn default_fractions() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        // Pulse files are resolved against the config file's directory.
        if let (Some(p), Some(dir)) = (cfg.baseline.pulse_file.as_mut(), path.parent()) {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.chain;
        let bad = |m: String| Err(HarnessError::Config(m));
        if c.n_sites < 2 {
            return bad(format!("chain.n_sites must be at least 2, got {}", c.n_sites));
        }
        if !(c.coupling > 0.0 && c.coupling.is_finite()) {
            return bad(format!("chain.coupling must be positive, got {}", c.coupling));
        }
        if !(c.dt > 0.0 && c.dt.is_finite()) {
            return bad(format!("chain.dt must be positive, got {}", c.dt));
        }
        if let Some(t) = c.total_time {
            if !(t >= 0.0 && t.is_finite()) {
                return bad(format!("chain.total_time must be non-negative, got {t}"));
            }
        }
        let b = &self.baseline;
        if b.pulse_file.is_some() && (b.ramp_speed.is_some() || b.strength.is_some()) {
            return bad("baseline takes either ramp parameters or pulse_file, not both".into());
        }
        if let Some(k) = b.strength {
            if !(k >= 0.0 && k.is_finite()) {
                return bad(format!("baseline.strength must be non-negative, got {k}"));
            }
        }
        if let Some(s) = b.ramp_speed {
            if !s.is_finite() {
                return bad("baseline.ramp_speed must be finite".into());
            }
        }
        self.krotov_settings().validate().map_err(|e| HarnessError::Config(format!("krotov: {e}")))?;
        if let Some(s) = &self.scan {
            if s.n_list.is_empty() || s.n_list.iter().any(|&n| n < 2) {
                return bad("scan.n_list needs chain lengths of at least 2".into());
            }
            if !(s.threshold > 0.0 && s.threshold < 1.0) {
                return bad(format!("scan.threshold must lie in (0, 1), got {}", s.threshold));
            }
            if s.patience == 0 {
                return bad("scan.patience must be at least 1".into());
            }
            if s.iterations == 0 {
                return bad("scan.iterations must be positive".into());
            }
            if !(s.per_edge_min > 0.0 && s.per_edge_step > 0.0 && s.per_edge_max >= s.per_edge_min) {
                return bad("scan grid needs 0 < per_edge_min <= per_edge_max and a positive step".into());
            }
        }
        if self.outputs.snapshot_fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return bad("outputs.snapshot_fractions must lie in [0, 1]".into());
        }
        Ok(())
    }

    pub fn total_time(&self) -> Result<f64> {
        self.chain
            .total_time
            .ok_or_else(|| HarnessError::Config("chain.total_time is required for this command".into()))
    }

    pub fn chain_config(&self) -> Result<ChainConfig<f64>> {
        self.chain_with(self.chain.n_sites, self.total_time()?)
    }

    pub fn chain_with(&self, n_sites: usize, total_time: f64) -> Result<ChainConfig<f64>> {
        make_chain(n_sites, self.chain.coupling, self.chain.dt, total_time)
            .map_err(|e| HarnessError::Config(format!("chain: {e}")))
    }

    pub fn krotov_settings(&self) -> KrotovSettings<f64> {
        let k = &self.krotov;
        KrotovSettings {
            step_weight: k.step_weight,
            strength_gain: k.strength_gain,
            max_iterations: k.max_iterations,
            infidelity_threshold: k.infidelity_threshold,
            adaptive_backoff: k.adaptive_backoff,
        }
    }

    /// Seed pulse on `cfg`'s grid.
    pub fn baseline_pulse(&self, cfg: &ChainConfig<f64>) -> Result<ControlPulse<f64>> {
        if let Some(path) = &self.baseline.pulse_file {
            let pulse = read_pulse(path)?;
            pulse.check_grid(cfg).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
            return Ok(pulse);
        }
        ramp_seed(cfg, self.baseline.ramp_speed, self.baseline.strength)
    }
}

/// Linear ramp with the default speed `(N - 1)/T` and strength 1.
pub fn ramp_seed(cfg: &ChainConfig<f64>, speed: Option<f64>, strength: Option<f64>) -> Result<ControlPulse<f64>> {
    let total = cfg.total_time();
    let speed = match speed {
        Some(s) => s,
        None if total > 0.0 => (cfg.n_sites() - 1) as f64 / total,
        None => 0.0,
    };
    Ok(ControlPulse::linear_ramp(cfg, speed, strength.unwrap_or(1.0))?)
}
