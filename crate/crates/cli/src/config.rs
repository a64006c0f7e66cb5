//! Experiment configuration: built-in bundles overlaid with user TOML.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use superrad::{Integrator, ModelKind, SystemParams};

use crate::error::{CliError, CliResult};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Collective decay rate used by every bundle; pumps are quoted in its units.
pub const BUNDLE_GAMMA_C: f64 = 1.0;
/// Bundle cavity decay rate, large enough that κ/(NΓc) = 100 at N = 10.
pub const BUNDLE_KAPPA: f64 = 1000.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentId {
    Fig3,
    Fig4,
    Fig5a,
    Fig5b,
    Fig5c,
    Sweep,
    Custom,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 7] = [
        ExperimentId::Fig3,
        ExperimentId::Fig4,
        ExperimentId::Fig5a,
        ExperimentId::Fig5b,
        ExperimentId::Fig5c,
        ExperimentId::Sweep,
        ExperimentId::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Fig3 => "fig3",
            ExperimentId::Fig4 => "fig4",
            ExperimentId::Fig5a => "fig5a",
            ExperimentId::Fig5b => "fig5b",
            ExperimentId::Fig5c => "fig5c",
            ExperimentId::Sweep => "sweep",
            ExperimentId::Custom => "custom",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        ExperimentId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown experiment '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSettings {
    pub n_trajectories: usize,
    /// Per-trajectory duration, burn-in included.
    pub duration: f64,
    pub burn_in: f64,
    /// Moment sampling stride for state-based estimates.
    pub sample_stride: f64,
    #[serde(default)]
    pub integrator: Integrator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSettings {
    /// Histogram bin width; absent means the regime default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin_width: Option<f64>,
    pub n_lags: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    pub n_atoms: Vec<usize>,
    pub w_min_over_gc: f64,
    /// Upper pump as a multiple of N; the grid for N ends at this times N.
    pub w_max_over_n_gc: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: ExperimentId,
    pub master_seed: u64,
    pub model: ModelKind,
    pub system: SystemParams,
    /// Pumps in units of Γc; Monte Carlo experiments run one ensemble per entry.
    pub pump_grid: Vec<f64>,
    pub ensemble: EnsembleSettings,
    pub estimator: EstimatorSettings,
    pub sweep: SweepSettings,
}

impl ExperimentConfig {
    /// Built-in defaults for `id`. Budgets are sized for a single core.
    pub fn bundle(id: ExperimentId) -> Self {
        let system = SystemParams::with_gamma_c(10, BUNDLE_GAMMA_C, BUNDLE_KAPPA, 1.0);
        let ensemble = |n_trajectories, duration, burn_in| EnsembleSettings {
            n_trajectories,
            duration,
            burn_in,
            sample_stride: 0.05,
            integrator: Integrator::Auto,
        };
        let mut cfg = ExperimentConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            experiment: id,
            master_seed: 1,
            model: ModelKind::Adiabatic,
            system,
            pump_grid: vec![1.0],
            ensemble: ensemble(4, 1010.0, 10.0),
            estimator: EstimatorSettings {
                bin_width: None,
                n_lags: 50,
            },
            sweep: SweepSettings {
                n_atoms: vec![10, 100, 1000],
                w_min_over_gc: 0.1,
                w_max_over_n_gc: 10.0,
                points: 200,
            },
        };
        match id {
            ExperimentId::Fig3 => {
                cfg.pump_grid = vec![0.1, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0];
                cfg.ensemble = ensemble(4, 1510.0, 10.0);
                cfg.ensemble.sample_stride = 0.2;
                cfg.estimator.n_lags = 1;
            }
            ExperimentId::Fig4 | ExperimentId::Sweep => {}
            ExperimentId::Fig5a => {
                cfg.pump_grid = vec![0.25];
                cfg.ensemble = ensemble(4, 5020.0, 20.0);
                cfg.estimator = EstimatorSettings {
                    bin_width: Some(0.1),
                    n_lags: 100,
                };
            }
            ExperimentId::Fig5b => {
                cfg.pump_grid = vec![5.0];
                cfg.ensemble = ensemble(4, 510.0, 10.0);
                cfg.estimator = EstimatorSettings {
                    bin_width: Some(0.02),
                    n_lags: 50,
                };
            }
            ExperimentId::Fig5c => {
                cfg.pump_grid = vec![100.0];
                cfg.ensemble = ensemble(4, 2510.0, 10.0);
                cfg.estimator = EstimatorSettings {
                    bin_width: Some(0.001),
                    n_lags: 60,
                };
            }
            ExperimentId::Custom => {
                cfg.system = SystemParams::with_gamma_c(3, BUNDLE_GAMMA_C, BUNDLE_KAPPA, 2.0);
                cfg.pump_grid = vec![2.0];
                cfg.ensemble = ensemble(4, 210.0, 10.0);
            }
        }
        cfg
    }

    /// Resolves a configuration from an optional TOML overlay and an optional
    /// experiment override. Keys absent from the overlay keep bundle values.
    pub fn resolve(overlay: Option<&str>, experiment: Option<ExperimentId>) -> CliResult<Self> {
        let table: toml::Table = match overlay {
            Some(text) => text.parse()?,
            None => toml::Table::new(),
        };
        if let Some(v) = table.get("schema_version") {
            if v.as_integer() != Some(CONFIG_SCHEMA_VERSION as i64) {
                return Err(CliError::Config(format!(
                    "unsupported schema_version {v}; expected {CONFIG_SCHEMA_VERSION}"
                )));
            }
        }
        let id = match (experiment, table.get("experiment")) {
            (Some(id), _) => id,
            (None, Some(v)) => v
                .as_str()
                .ok_or_else(|| CliError::Config("'experiment' must be a string".into()))?
                .parse()?,
            (None, None) => {
                return Err(CliError::Config(
                    "no experiment given; pass --experiment or set 'experiment'".into(),
                ))
            }
        };
        let mut base = toml::Table::try_from(Self::bundle(id))
            .map_err(|e| CliError::Config(e.to_string()))?;
        merge(&mut base, table);
        base.insert("experiment".into(), toml::Value::String(id.name().into()));
        let cfg: ExperimentConfig = base.try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        self.system.validate()?;
        if self.model == ModelKind::Full {
            self.system.validate_full()?;
        }
        let e = &self.ensemble;
        if e.n_trajectories == 0 {
            return bad("ensemble.n_trajectories must be positive".into());
        }
        if !(e.duration > 0.0 && e.duration.is_finite()) {
            return bad(format!("ensemble.duration must be positive, got {}", e.duration));
        }
        if !(e.burn_in >= 0.0 && e.burn_in < e.duration) {
            return bad(format!("ensemble.burn_in must lie in [0, duration), got {}", e.burn_in));
        }
        if !(e.sample_stride > 0.0) {
            return bad("ensemble.sample_stride must be positive".into());
        }
        if let Some(bw) = self.estimator.bin_width {
            if !(bw > 0.0 && bw.is_finite()) {
                return bad(format!("estimator.bin_width must be positive, got {bw}"));
            }
        }
        if self.estimator.n_lags == 0 {
            return bad("estimator.n_lags must be positive".into());
        }
        if self.pump_grid.is_empty() || self.pump_grid.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return bad("pump_grid must be a non-empty list of non-negative pumps".into());
        }
        let s = &self.sweep;
        if s.n_atoms.iter().any(|&n| n < 3) || s.n_atoms.is_empty() {
            return bad("sweep.n_atoms entries must be at least 3".into());
        }
        if !(s.w_min_over_gc > 0.0 && s.w_max_over_n_gc > 0.0) || s.points < 2 {
            return bad("sweep range must be positive with at least two points".into());
        }
        Ok(())
    }

    /// Canonical TOML rendering; hashed into the manifest.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn hash(&self) -> String {
        hex_digest(self.to_toml().as_bytes())
    }

    pub fn gamma_c(&self) -> CliResult<f64> {
        Ok(self.system.gamma_c()?)
    }
}

fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (k, v) in overlay {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundles_validate_and_round_trip() {
        for id in ExperimentId::ALL {
            let cfg = ExperimentConfig::bundle(id);
            cfg.validate().unwrap();
            let back = ExperimentConfig::resolve(Some(&cfg.to_toml()), None).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn overlay_keeps_unmentioned_keys() {
        let cfg = ExperimentConfig::resolve(Some("[ensemble]\nn_trajectories = 2\n"), Some(ExperimentId::Fig5c)).unwrap();
        assert_eq!(cfg.ensemble.n_trajectories, 2);
        assert_eq!(cfg.ensemble.duration, 2510.0);
        assert_eq!(cfg.estimator.bin_width, Some(0.001));
    }

    #[test]
    fn flag_overrides_file_experiment() {
        let cfg = ExperimentConfig::resolve(Some("experiment = \"fig4\""), Some(ExperimentId::Sweep)).unwrap();
        assert_eq!(cfg.experiment, ExperimentId::Sweep);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "experiment = \"fig9\"",
            "experiment = \"sweep\"\nschema_version = 7",
            "experiment = \"sweep\"\nbogus = 1",
            "experiment = \"custom\"\n[ensemble]\nburn_in = 1e6",
            "experiment = \"custom\"\n[system]\nn_atoms = 0",
        ] {
            let err = ExperimentConfig::resolve(Some(text), None).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}: {err}");
        }
        assert!(ExperimentConfig::resolve(None, None).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::bundle(ExperimentId::Fig3);
        let mut b = a.clone();
        b.master_seed += 1;
        assert_eq!(a.hash(), ExperimentConfig::bundle(ExperimentId::Fig3).hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
