//! Experiment files: one TOML document per reproduced table.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use oscnet::solver::RetrainPolicy;
use oscnet::training::{FitConfig, MappingMode, MappingSetup, ParametrizationKind};
use oscnet::types::CombinedInit;
use oscnet::{CanonicalWeights, Padding, DEFAULT_DELTA};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    #[default]
    Fit,
    Stencils,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    #[default]
    Single,
    Coupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelVariant {
    /// Two filters: damping and spring terms.
    #[default]
    Dissipative,
    /// Single filter, no damping term.
    Conservative,
    /// First-order residual baseline.
    Euler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observed {
    #[default]
    All,
    /// Only the first oscillator; the second is mapped.
    First,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingWindow {
    /// Largest window shorter than a quarter damped period, at least 5 samples.
    QuarterPeriod,
}

/// Per-oscillator physical constants, index 0 first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Chain {
    pub masses: Vec<f64>,
    pub dampings: Vec<f64>,
    pub springs: Vec<f64>,
}

impl Chain {
    pub fn weights(&self) -> Result<Vec<CanonicalWeights<f64>>> {
        ensure!(
            self.masses.len() == self.dampings.len() && self.masses.len() == self.springs.len(),
            "masses, dampings and springs must have the same length"
        );
        self.masses
            .iter()
            .zip(&self.dampings)
            .zip(&self.springs)
            .map(|((&m, &b), &k)| Ok(CanonicalWeights::new(m, b, k)?))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialStateConfig {
    pub positions: Vec<f64>,
    #[serde(default)]
    pub velocities: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MappingConfig {
    pub kernel: usize,
    pub padding: Padding,
    pub stencil_order: usize,
    pub ifl: bool,
}

impl Default for MappingConfig {
    fn default() -> Self {
        Self {
            kernel: 1,
            padding: Padding::Valid,
            stencil_order: 5,
            ifl: false,
        }
    }
}

impl MappingConfig {
    pub fn setup(&self) -> Result<MappingSetup> {
        Ok(MappingSetup {
            mode: MappingMode::from_kernel_size(self.kernel)?,
            padding: self.padding,
            stencil_accuracy: self.stencil_order,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct ForecastConfig {
    pub retrain: RetrainPolicy,
}

/// A variant of the base experiment, e.g. one padding mode of a table.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub label: String,
    pub kernel: Option<usize>,
    pub padding: Option<Padding>,
    pub ifl: Option<bool>,
    /// Published learned values by parameter name, for comparison only.
    #[serde(default)]
    pub reference: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub parameter: String,
    pub value: f64,
    pub rel_tol: f64,
}

/// Post-hoc checks of a reproduction run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcceptanceConfig {
    /// Every learned parameter within this relative error of the truth.
    pub truth_rel_tol: Option<f64>,
    /// Parameters that must still equal their initial value bit for bit.
    pub frozen: Vec<String>,
    /// Parameters that must stay within an absolute distance of their init.
    pub near_init: BTreeMap<String, f64>,
    pub targets: Vec<Target>,
    /// Forecast RMSE bound as a fraction of the peak amplitude.
    pub forecast_rmse_tol: Option<f64>,
    /// Bound on the forecast's relative peak-amplitude change.
    pub max_amplitude_change: Option<f64>,
    /// Minimum relative amplitude decay of the true continuation.
    pub min_truth_decay: Option<f64>,
    /// Forecast with the inner feedback loop must beat the frozen forecast.
    pub ifl_improves: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StencilConfig {
    pub order: usize,
    /// Expected coefficients as exact fractions, e.g. "3/2". Dropped when
    /// the order is overridden.
    #[serde(default)]
    pub expected_d1: Option<Vec<String>>,
    #[serde(default)]
    pub expected_d2: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub kind: Kind,
    #[serde(default)]
    pub system: System,
    #[serde(default)]
    pub model: ModelVariant,
    #[serde(default)]
    pub observed: Observed,
    #[serde(default)]
    pub parametrization: ParametrizationKind,
    #[serde(default)]
    pub combined_init: CombinedInit,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_n")]
    pub n_train: usize,
    #[serde(default)]
    pub training_window: Option<TrainingWindow>,
    #[serde(default = "default_n")]
    pub n_forecast: usize,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub truth: Option<Chain>,
    pub init: Option<Chain>,
    #[serde(default)]
    pub initial_state: Option<InitialStateConfig>,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub forecast: ForecastConfig,
    #[serde(default)]
    pub mapping: MappingConfig,
    #[serde(default)]
    pub runs: Vec<RunConfig>,
    #[serde(default)]
    pub reference: BTreeMap<String, f64>,
    #[serde(default)]
    pub acceptance: AcceptanceConfig,
    pub stencils: Option<StencilConfig>,
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

fn default_n() -> usize {
    60
}

/// Command-line overrides applied on top of a file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub ifl: bool,
    pub padding: Option<Padding>,
    pub kernel: Option<usize>,
    pub stencil_order: Option<usize>,
    pub seed: Option<u64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if o.ifl {
            self.mapping.ifl = true;
            for r in &mut self.runs {
                r.ifl = Some(true);
            }
        }
        if let Some(p) = o.padding {
            self.mapping.padding = p;
            for r in &mut self.runs {
                r.padding = Some(p);
            }
        }
        if let Some(k) = o.kernel {
            self.mapping.kernel = k;
            for r in &mut self.runs {
                r.kernel = Some(k);
            }
        }
        if let Some(s) = o.stencil_order {
            self.mapping.stencil_order = s;
            if let Some(st) = self.stencils.as_mut().filter(|st| st.order != s) {
                st.order = s;
                st.expected_d1 = None;
                st.expected_d2 = None;
            }
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
            self.fit.seed = seed;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(!self.name.is_empty(), "experiment name must not be empty");
        match self.kind {
            Kind::Stencils => {
                ensure!(self.stencils.is_some(), "stencil experiments need a [stencils] section");
                return Ok(());
            }
            Kind::Fit => {}
        }
        ensure!(
            self.delta > 0.0 && self.delta.is_finite(),
            "delta must be positive, got {}",
            self.delta
        );
        ensure!(self.n_train >= 3, "n_train must be at least 3, got {}", self.n_train);
        ensure!(self.noise_std >= 0.0, "noise_std must be non-negative");
        self.fit.validate()?;
        let truth = self.truth.as_ref().context("missing [truth] section")?;
        let init = self.init.as_ref().context("missing [init] section")?;
        truth.weights()?;
        init.weights()?;
        let want = match self.system {
            System::Single => 1,
            System::Coupled => 2,
        };
        ensure!(
            truth.len() == want && init.len() == want,
            "{:?} system needs {want} oscillator(s) in truth and init",
            self.system
        );
        if self.system == System::Single {
            ensure!(
                self.observed == Observed::All,
                "a single oscillator is always fully observed"
            );
            ensure!(
                self.parametrization == ParametrizationKind::Canonical,
                "combined weights need a coupled system"
            );
        } else {
            ensure!(
                self.model == ModelVariant::Dissipative,
                "coupled systems use the dissipative step"
            );
            ensure!(
                self.training_window.is_none(),
                "training_window applies to single oscillators"
            );
        }
        if self.observed == Observed::First {
            self.mapping.setup()?;
            for r in &self.runs {
                self.mapping_for(r).setup()?;
            }
        }
        if let Some(s) = &self.initial_state {
            ensure!(
                s.positions.len() == want,
                "initial_state.positions needs {want} entries"
            );
            if let Some(v) = &s.velocities {
                ensure!(v.len() == want, "initial_state.velocities needs {want} entries");
            }
        }
        Ok(())
    }

    /// Runs to execute: the declared variants, or the base experiment alone.
    pub fn runs(&self) -> Vec<RunConfig> {
        if self.runs.is_empty() {
            vec![RunConfig {
                label: String::new(),
                reference: self.reference.clone(),
                ..RunConfig::default()
            }]
        } else {
            self.runs.clone()
        }
    }

    pub fn mapping_for(&self, run: &RunConfig) -> MappingConfig {
        MappingConfig {
            kernel: run.kernel.unwrap_or(self.mapping.kernel),
            padding: run.padding.unwrap_or(self.mapping.padding),
            stencil_order: self.mapping.stencil_order,
            ifl: run.ifl.unwrap_or(self.mapping.ifl),
        }
    }

    pub fn output_dir(&self, cli: Option<&Path>) -> PathBuf {
        cli.map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out").join(&self.name))
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig {
            seed: self.seed,
            parametrization: self.parametrization,
            ..self.fit.clone()
        }
    }
}

/// Checked-in experiment file for a table number.
pub fn builtin(table: u8) -> Result<&'static str> {
    Ok(match table {
        1 => include_str!("../../../experiments/table1.toml"),
        2 => include_str!("../../../experiments/table2.toml"),
        3 => include_str!("../../../experiments/table3.toml"),
        4 => include_str!("../../../experiments/table4.toml"),
        5 => include_str!("../../../experiments/table5.toml"),
        6 => include_str!("../../../experiments/table6.toml"),
        7 => include_str!("../../../experiments/table7.toml"),
        8 => include_str!("../../../experiments/table8.toml"),
        other => bail!("table must be in 1..=8, got {other}"),
    })
}
