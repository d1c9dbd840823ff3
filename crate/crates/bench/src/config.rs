//! Experiment configuration, presets and validation.

use std::fs;
use std::path::{Path, PathBuf};

use gam_core::corrchan::{AttenuationSpec, RisGrid, DEFAULT_RANK_TOLERANCE};
use gam_core::echelon::{Method, DEFAULT_ROTATION_TRIALS};
use gam_core::xcvr::{med_for_target_ser, DEFAULT_TARGET_SER};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{BenchError, Result};

/// How the received-domain MED is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MedPolicy {
    /// MED whose hexagonal union bound `6·Q(d/√2)` equals this SER.
    TargetSer(f64),
    /// Explicit received MED.
    ReceivedMed(f64),
}

impl Default for MedPolicy {
    fn default() -> Self {
        MedPolicy::TargetSer(DEFAULT_TARGET_SER)
    }
}

impl MedPolicy {
    pub fn received_med(&self) -> Result<f64> {
        match *self {
            MedPolicy::TargetSer(p) => med_for_target_ser(p).map_err(|e| BenchError::Config(e.to_string())),
            MedPolicy::ReceivedMed(m) if m.is_finite() && m > 0.0 => Ok(m),
            MedPolicy::ReceivedMed(m) => Err(BenchError::Config(format!("received_med must be positive, got {m}"))),
        }
    }
}

/// SER simulation over one pinned channel or averaged over many.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SerMode {
    #[default]
    Single,
    Averaged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: RisGrid,
    pub n_r: usize,
    pub attenuation: AttenuationSpec,
    pub snr_db: Vec<f64>,
    /// SNR at which constellations are designed; defaults to the largest
    /// entry of `snr_db`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design_snr_db: Option<f64>,
    /// Element counts for `rre-bench`; empty means the grid itself.
    #[serde(default)]
    pub element_sweep: Vec<usize>,
    /// Spacings (in wavelengths) for `rre-bench`; empty means the grid's.
    #[serde(default)]
    pub spacing_sweep: Vec<f64>,
    pub methods: Vec<Method>,
    pub realizations: usize,
    pub frames: u64,
    #[serde(default = "default_rotation_trials")]
    pub rotation_trials: usize,
    #[serde(default)]
    pub med_policy: MedPolicy,
    pub seed: u64,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub mode: SerMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_seed: Option<u64>,
    #[serde(default = "default_rank_tolerance")]
    pub rank_tolerance: f64,
    /// Fill the `seconds_mean` column. Off by default so reruns are
    /// byte-identical.
    #[serde(default)]
    pub record_timing: bool,
}

fn default_rotation_trials() -> usize {
    DEFAULT_ROTATION_TRIALS
}

fn default_rank_tolerance() -> f64 {
    DEFAULT_RANK_TOLERANCE
}

pub const PRESETS: [&str; 5] = ["fig3-small", "fig3-paper", "fig5", "fig6", "small-example"];

fn base(out: &str) -> ExperimentConfig {
    ExperimentConfig {
        grid: RisGrid::new(32, 32, 0.125).expect("valid grid"),
        n_r: 4,
        attenuation: AttenuationSpec { mu_los_db: -60.0, mu_rr_db: -5.0, mu_tr_db: -5.0 },
        snr_db: vec![49.0],
        design_snr_db: None,
        element_sweep: vec![],
        spacing_sweep: vec![],
        methods: vec![Method::Cp, Method::RandomRotation, Method::GramSchmidt],
        realizations: 100,
        frames: 100_000,
        rotation_trials: DEFAULT_ROTATION_TRIALS,
        med_policy: MedPolicy::default(),
        seed: 1,
        out_dir: PathBuf::from(out),
        mode: SerMode::Single,
        channel_seed: None,
        rank_tolerance: DEFAULT_RANK_TOLERANCE,
        record_timing: false,
    }
}

/// Named configurations. `fig3-paper` and `fig6` run at full
/// scale and take hours on one core.
pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let snr_grid: Vec<f64> = (43..=55).map(f64::from).collect();
    Some(match name {
        "fig3-small" => ExperimentConfig {
            element_sweep: vec![64, 256],
            spacing_sweep: vec![0.5, 0.25, 0.125],
            ..base("results/fig3-small")
        },
        "fig3-paper" => ExperimentConfig {
            element_sweep: vec![16, 64, 256, 1024],
            spacing_sweep: vec![0.5, 0.25, 0.125],
            realizations: 1000,
            ..base("results/fig3-paper")
        },
        "fig5" => ExperimentConfig {
            snr_db: snr_grid,
            design_snr_db: Some(49.0),
            methods: vec![Method::Cp, Method::Qr],
            realizations: 1,
            channel_seed: Some(1),
            ..base("results/fig5")
        },
        "fig6" => ExperimentConfig {
            snr_db: snr_grid,
            design_snr_db: Some(49.0),
            methods: vec![Method::Cp, Method::Qr],
            realizations: 1000,
            frames: 10_000,
            mode: SerMode::Averaged,
            ..base("results/fig6")
        },
        "small-example" => ExperimentConfig {
            grid: RisGrid::new(3, 2, 0.125).expect("valid grid"),
            n_r: 3,
            attenuation: AttenuationSpec { mu_los_db: -25.0, mu_rr_db: -5.0, mu_tr_db: -5.0 },
            snr_db: vec![20.0, 25.0, 30.0],
            design_snr_db: Some(25.0),
            methods: vec![Method::Cp, Method::Qr, Method::RandomRotation, Method::GramSchmidt],
            channel_seed: Some(1),
            ..base("results/small-example")
        },
        _ => return None,
    })
}

impl ExperimentConfig {
    /// Element counts swept by `rre-bench`.
    pub fn element_counts(&self) -> Vec<usize> {
        if self.element_sweep.is_empty() {
            vec![self.grid.len()]
        } else {
            self.element_sweep.clone()
        }
    }

    pub fn spacings(&self) -> Vec<f64> {
        if self.spacing_sweep.is_empty() {
            vec![self.grid.spacing()]
        } else {
            self.spacing_sweep.clone()
        }
    }

    /// Grid for a sweep cell: the configured layout when the element count
    /// is unchanged, otherwise the most nearly square layout of `n`.
    pub fn grid_for(&self, n: usize, spacing: f64) -> Result<RisGrid> {
        let grid = if n == self.grid.len() {
            RisGrid::new(self.grid.n_x(), self.grid.n_y(), spacing)
        } else {
            RisGrid::near_square(n, spacing)
        };
        grid.map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn design_snr(&self) -> f64 {
        self.design_snr_db.unwrap_or_else(|| self.snr_db.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(BenchError::Config(msg));
        if self.n_r == 0 {
            return fail("n_r must be at least 1".into());
        }
        for n in self.element_counts() {
            if n == 0 {
                return fail("element counts must be at least 1".into());
            }
            if self.n_r > n + 1 {
                return fail(format!(
                    "n_r = {} exceeds n + 1 = {} for n = {n} elements: the equivalent channel would have more rows than columns",
                    self.n_r,
                    n + 1
                ));
            }
        }
        if self.spacings().iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return fail("spacings must be finite and positive".into());
        }
        if self.snr_db.is_empty() {
            return fail("snr_db must list at least one value".into());
        }
        if self.snr_db.iter().chain(self.design_snr_db.iter()).any(|s| !s.is_finite()) {
            return fail("SNR values must be finite".into());
        }
        if self.methods.is_empty() {
            return fail("methods must list at least one decomposition".into());
        }
        if self.realizations == 0 || self.frames == 0 || self.rotation_trials == 0 {
            return fail("realizations, frames and rotation_trials must be at least 1".into());
        }
        if !(self.rank_tolerance.is_finite() && (0.0..1.0).contains(&self.rank_tolerance)) {
            return fail(format!("rank_tolerance must lie in [0, 1), got {}", self.rank_tolerance));
        }
        self.attenuation.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        self.med_policy.received_med()?;
        Ok(())
    }

    /// Canonical JSON used for hashing and manifests.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn sha256(&self) -> String {
        format!("{:x}", Sha256::digest(self.canonical_json().as_bytes()))
    }
}

/// A manifest embeds the config it was produced from, so it can be passed
/// back as `--config`.
#[derive(Deserialize)]
struct Embedded {
    config: ExperimentConfig,
}

/// Reads a config file, or the config embedded in a run manifest.
pub fn load(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    match serde_json::from_str::<ExperimentConfig>(&text) {
        Ok(cfg) => Ok(cfg),
        Err(first) => match serde_json::from_str::<Embedded>(&text) {
            Ok(m) => Ok(m.config),
            Err(_) => Err(BenchError::parse(path, first)),
        },
    }
}

/// Where the configuration comes from plus command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct ConfigSource {
    pub config: Option<PathBuf>,
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl ConfigSource {
    /// Loads the file or preset (`default_preset` when neither is given),
    /// applies overrides and validates.
    pub fn resolve(&self, default_preset: &str) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(_), Some(_)) => return Err(BenchError::Config("--config and --preset are mutually exclusive".into())),
            (Some(path), None) => load(path)?,
            (None, name) => {
                let name = name.as_deref().unwrap_or(default_preset);
                preset(name).ok_or_else(|| BenchError::Config(format!("unknown preset `{name}` (available: {})", PRESETS.join(", "))))?
            }
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
