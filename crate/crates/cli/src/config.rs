//! The TOML run configuration.
//!
//! Every field may be omitted. The defaults reproduce the weak-coupling
//! setting: `η = 0.084`, `ν = 1`, four Fock levels, three pulses with
//! `Ω = 0.1` and `Δ = 1`, durations in `[0, 4π/(ηΩ)]`, a SWAP of
//! `|g,0⟩` and `|e,1⟩` as the target.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use phononcp::optimizer::{PsoConfig, RefineConfig};
use phononcp::robustness::{Probe, PulseSelection, SweepAxis, SweepSpec};
use phononcp::thermometry::{thermal_distribution, PhononDistribution, ThermometrySetup};
use phononcp::{Regime, SystemConfig, TargetPreset};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Schema version; only 1 is understood.
    pub version: u32,
    pub system: SystemConfig,
    /// `weak`: `Ω = 0.1`, `Δ = 1` fixed. `strong`: `Ω = 1`, shared `Δ` free.
    pub regime: Regime,
    pub pulse_count: usize,
    /// `swap(n)` or `shelve(n)`.
    pub target: TargetPreset,
    pub optimizer: OptimizerSection,
    /// One full design run per seed; the best result is kept.
    pub seeds: Vec<u64>,
    /// Reports land here, stored pulses under `library/`.
    pub output_dir: PathBuf,
    pub thermometry: ThermometrySection,
    pub robustness: RobustnessSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            system: SystemConfig::default(),
            regime: Regime::Weak,
            pulse_count: 3,
            target: TargetPreset::Swap(0),
            optimizer: OptimizerSection::default(),
            seeds: vec![0],
            output_dir: PathBuf::from("phononcp-out"),
            thermometry: ThermometrySection::default(),
            robustness: RobustnessSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub pso: PsoConfig,
    pub refine: RefineConfig,
    /// Designs whose loss ends above this are reported as failures.
    pub max_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThermometrySection {
    /// Fock numbers measured, one pulse each.
    pub window: Vec<usize>,
    pub pulse_count: usize,
    /// Fock levels of the design space, counted from 0. Ignored when `pad`
    /// is set.
    pub design_cutoff: usize,
    /// Fock levels of the simulated measurement.
    pub truth_cutoff: usize,
    /// Design on `[min(window) - pad, max(window) + pad)` instead of
    /// `[0, design_cutoff)`; meant for windows far above the ground state.
    pub pad: Option<usize>,
    pub distribution: DistributionSpec,
    /// Library ids of pulses to reuse, one per window state. Empty means
    /// design new ones.
    pub pulses: Vec<String>,
    /// Sample every readout with this many shots instead of reading the
    /// exact excited population.
    pub shots: Option<u64>,
}

impl Default for ThermometrySection {
    fn default() -> Self {
        Self {
            window: vec![0, 1, 2, 3],
            pulse_count: 6,
            design_cutoff: 10,
            truth_cutoff: 100,
            pad: None,
            distribution: DistributionSpec::Thermal { nbar: 1.0 },
            pulses: Vec::new(),
            shots: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    Thermal {
        nbar: f64,
    },
    /// `[[n, P_n], ...]`; unlisted levels are empty.
    Explicit {
        populations: Vec<(usize, f64)>,
    },
}

impl DistributionSpec {
    pub fn build(&self, big_cutoff: usize) -> CliResult<PhononDistribution> {
        let built = match self {
            DistributionSpec::Thermal { nbar } => thermal_distribution(*nbar, big_cutoff),
            DistributionSpec::Explicit { populations } => {
                PhononDistribution::from_entries(big_cutoff, populations)
            }
        };
        built.map_err(|e| CliError::input(format!("thermometry.distribution: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustnessSection {
    pub axis: SweepAxis,
    pub which: PulseSelection,
    pub range: (f64, f64),
    pub points: usize,
    pub probe: Probe,
    /// Probability that counts as "still working" for the reported window.
    pub threshold: f64,
}

impl Default for RobustnessSection {
    fn default() -> Self {
        Self {
            axis: SweepAxis::PhaseOffset,
            which: PulseSelection::All,
            range: (-PI / 2.0, PI / 2.0),
            points: 81,
            probe: Probe::w01(),
            threshold: 0.99,
        }
    }
}

impl RobustnessSection {
    pub fn spec(&self) -> CliResult<SweepSpec> {
        let spec = SweepSpec {
            axis: self.axis,
            which: self.which,
            range: self.range,
            points: self.points,
        };
        spec.validate()
            .map_err(|e| CliError::input(format!("robustness: {e}")))?;
        Ok(spec)
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::input(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration is always representable")
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.version != CONFIG_VERSION {
            return Err(CliError::input(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.system
            .validate()
            .map_err(|e| CliError::input(format!("system: {e}")))?;
        if self.pulse_count == 0 {
            return Err(CliError::input("pulse_count must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(CliError::input("seeds must list at least one seed"));
        }
        self.optimizer
            .pso
            .validate()
            .map_err(|e| CliError::input(format!("optimizer.pso: {e}")))?;
        self.optimizer
            .refine
            .validate()
            .map_err(|e| CliError::input(format!("optimizer.refine: {e}")))?;
        Ok(())
    }

    /// The thermometry design and truth spaces plus optimizer settings.
    pub fn thermometry_setup(&self) -> CliResult<ThermometrySetup> {
        let t = &self.thermometry;
        let mut setup = match t.pad {
            Some(pad) => ThermometrySetup::shifted_window(t.window.clone(), pad, t.truth_cutoff)
                .map_err(|e| CliError::input(format!("thermometry: {e}")))?,
            None => ThermometrySetup {
                design: SystemConfig {
                    cutoff: t.design_cutoff,
                    fock_offset: 0,
                    ..self.system
                },
                window: t.window.clone(),
                ..ThermometrySetup::default()
            },
        };
        setup.design.eta = self.system.eta;
        setup.design.nu = self.system.nu;
        setup.design.hbar = self.system.hbar;
        setup.truth = SystemConfig {
            cutoff: t.truth_cutoff,
            fock_offset: 0,
            ..self.system
        };
        setup.regime = self.regime;
        setup.pulse_count = t.pulse_count;
        setup.pso = self.optimizer.pso.clone();
        setup.refine = self.optimizer.refine.clone();
        setup
            .validate()
            .map_err(|e| CliError::input(format!("thermometry: {e}")))?;
        Ok(setup)
    }
}
