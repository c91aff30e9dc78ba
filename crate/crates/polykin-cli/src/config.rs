//! JSON run configurations. Every run echoes its full configuration into the
//! manifest so outputs are reproducible from one file.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use polykin_core::relaxation::RunConfig;
use polykin_core::GridSpec;

use crate::{CliError, CliResult};

/// Initial condition for relaxation and slab runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialCondition {
    Maxwellian {
        rho: f64,
        u: [f64; 3],
        t: f64,
    },
    /// Anisotropic Gaussian with prescribed stress eigensystem.
    Anisotropic {
        rho: f64,
        u: [f64; 3],
        theta_diag: [f64; 3],
        /// (xy, xz, yz) entries; defaults to zero.
        #[serde(default)]
        theta_offdiag: [f64; 3],
        t_i: f64,
    },
    /// Equal-mass counter-streaming Maxwellians along the x-axis.
    Bimodal {
        rho: f64,
        separation: f64,
        t: f64,
    },
    Snapshot {
        path: String,
    },
    /// Slab runs: Maxwellian per cell with
    /// T(x) = t0 (1 + amplitude cos(2 pi mode x / L)).
    TemperatureProfile {
        rho: f64,
        t0: f64,
        amplitude: f64,
        mode: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelaxConfig {
    #[serde(flatten)]
    pub run: RunConfig,
    pub initial: InitialCondition,
    #[serde(default)]
    pub seed: u64,
}

impl RelaxConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: RelaxConfig = serde_json::from_str(&text)?;
        cfg.run
            .validate()
            .map_err(|e| CliError::Malformed(format!("run config: {e}")))?;
        if cfg.run.params.delta != cfg.run.grid.delta {
            return Err(CliError::Malformed(
                "params.delta and grid.delta disagree".into(),
            ));
        }
        Ok(cfg)
    }
}

/// Ensemble sweep over the parameter lattice.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    #[serde(default)]
    pub seed: u64,
    pub ensemble: usize,
    pub nu_list: Vec<f64>,
    pub theta_list: Vec<f64>,
    pub delta_list: Vec<f64>,
    /// Also probe nu < 0 cells; their rows are report-only and never
    /// asserted (the sign of R there is an open question).
    #[serde(default)]
    pub probe_negative_nu: bool,
}

impl SweepConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: SweepConfig = serde_json::from_str(&text)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> CliResult<()> {
        if self.ensemble == 0 {
            return Err(CliError::Malformed("ensemble must be positive".into()));
        }
        for &nu in &self.nu_list {
            if !(-0.5..1.0).contains(&nu) {
                return Err(CliError::Malformed(format!("nu {nu} outside (-1/2, 1)")));
            }
        }
        for &theta in &self.theta_list {
            if !(0.0..=1.0).contains(&theta) {
                return Err(CliError::Malformed(format!("theta {theta} outside [0, 1]")));
            }
        }
        for &delta in &self.delta_list {
            if !(delta > 0.0) {
                return Err(CliError::Malformed(format!("delta {delta} must be positive")));
            }
        }
        Ok(())
    }
}

/// Generator config for the `snapshot` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotGenConfig {
    pub grid: GridSpec,
    pub initial: InitialCondition,
    #[serde(default = "default_encoding")]
    pub encoding: crate::snapshot::Encoding,
}

fn default_encoding() -> crate::snapshot::Encoding {
    crate::snapshot::Encoding::Binary
}

impl SnapshotGenConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: SnapshotGenConfig = serde_json::from_str(&text)?;
        cfg.grid
            .validate()
            .map_err(|e| CliError::Malformed(format!("grid: {e}")))?;
        Ok(cfg)
    }
}

/// Point-count presets; extents stay whatever the config says.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridPreset {
    Coarse,
    Default,
    Fine,
}

impl GridPreset {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "coarse" => Some(GridPreset::Coarse),
            "default" => Some(GridPreset::Default),
            "fine" => Some(GridPreset::Fine),
            _ => None,
        }
    }

    pub fn apply(self, spec: GridSpec) -> CliResult<GridSpec> {
        let (nv, ne) = match self {
            GridPreset::Coarse => (16, 16),
            GridPreset::Default => (32, 32),
            GridPreset::Fine => (48, 32),
        };
        spec.with_points(nv, ne)
            .map_err(|e| CliError::Malformed(format!("grid preset: {e}")))
    }
}
