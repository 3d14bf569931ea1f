//! Experiment configuration: JSON file of record, overridden by flags.

use std::path::{Path, PathBuf};

use adpqis_core::{GepInstance, RunConfig, SamplerKind};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSettings {
    /// Normalized price grid spacing of the scenario tree.
    pub grid_step: f64,
    /// Lattice spacing of the shares the oracle may choose.
    pub shares_step: f64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        OracleSettings {
            grid_step: 0.1,
            shares_step: 0.25,
        }
    }
}

/// Sweep axes. Each listed value becomes one cell; an empty spec sweeps only
/// the base run configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepAxes {
    /// Base configuration under each of these samplers.
    pub samplers: Vec<SamplerKind>,
    /// Epsilon-greedy cells.
    pub epsilons: Vec<f64>,
    /// Epsilon-decay cells: every initial value paired with every final value.
    pub decay_initial: Vec<f64>,
    pub decay_final: Vec<f64>,
    /// Base sampler with the iteration count varied.
    pub iterations: Vec<usize>,
    /// Base sampler with the samples per iteration varied.
    pub samples: Vec<usize>,
    /// Base sampler with the reevaluation period varied.
    pub reeval_every: Vec<usize>,
}

impl SweepAxes {
    pub fn is_empty(&self) -> bool {
        self.samplers.is_empty()
            && self.epsilons.is_empty()
            && self.decay_initial.is_empty()
            && self.decay_final.is_empty()
            && self.iterations.is_empty()
            && self.samples.is_empty()
            && self.reeval_every.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Example1Settings {
    pub samples: usize,
    pub iterations: usize,
    /// Sample against a learned approximation instead of the objective.
    pub learn: bool,
    pub lambda: f64,
    pub bins: usize,
}

impl Default for Example1Settings {
    fn default() -> Self {
        Example1Settings {
            samples: 1000,
            iterations: 5,
            learn: false,
            lambda: 0.1,
            bins: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Dataset file; the bundled dataset when absent.
    pub dataset: Option<PathBuf>,
    /// Base run; its seed is the base seed of replications.
    pub run: RunConfig,
    pub replications: usize,
    pub oracle: OracleSettings,
    pub sweep: SweepAxes,
    pub example1: Example1Settings,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            dataset: None,
            run: RunConfig::default(),
            replications: 10,
            oracle: OracleSettings::default(),
            sweep: SweepAxes::default(),
            example1: Example1Settings::default(),
        }
    }
}

/// Flag values; `None` leaves the file or default value in place.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dataset: Option<PathBuf>,
    pub sampler: Option<SamplerKind>,
    pub epsilon: Option<f64>,
    pub epsilon_initial: Option<f64>,
    pub epsilon_final: Option<f64>,
    pub iterations: Option<usize>,
    pub samples: Option<usize>,
    pub reeval_every: Option<usize>,
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub seed: Option<u64>,
    pub replications: Option<usize>,
}

impl ExperimentSpec {
    pub fn from_json(text: &str, path: &Path) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::ConfigParse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::ConfigRead {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text, path)
    }

    /// File (or defaults) with flags applied on top.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> CliResult<Self> {
        let mut spec = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        spec.apply(overrides);
        spec.validate()?;
        Ok(spec)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(d) = &o.dataset {
            self.dataset = Some(d.clone());
        }
        let r = &mut self.run;
        if let Some(v) = o.sampler {
            r.sampler = v;
        }
        if let Some(v) = o.epsilon {
            r.epsilon = v;
        }
        if let Some(v) = o.epsilon_initial {
            r.epsilon_initial = v;
        }
        if let Some(v) = o.epsilon_final {
            r.epsilon_final = v;
        }
        if let Some(v) = o.iterations {
            r.iterations = v;
        }
        if let Some(v) = o.samples {
            r.samples = v;
        }
        if let Some(v) = o.reeval_every {
            r.reeval_every = v;
        }
        if let Some(v) = o.lambda {
            r.lambda = v;
        }
        if let Some(v) = o.gamma {
            r.gamma = v;
        }
        if let Some(v) = o.seed {
            r.seed = v;
        }
        if let Some(v) = o.replications {
            self.replications = v;
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        self.run.validate().map_err(|e| CliError::Invalid(e.to_string()))?;
        if self.replications == 0 {
            return Err(CliError::Invalid("replications must be at least 1".into()));
        }
        if self.example1.samples == 0 || self.example1.iterations == 0 || self.example1.bins == 0 {
            return Err(CliError::Invalid("example1 samples, iterations and bins must be positive".into()));
        }
        let s = &self.sweep;
        if s.decay_initial.is_empty() != s.decay_final.is_empty() {
            return Err(CliError::Invalid(
                "decay_initial and decay_final must both be given or both be empty".into(),
            ));
        }
        if s.iterations.contains(&0) || s.samples.contains(&0) || s.reeval_every.contains(&0) {
            return Err(CliError::Invalid("sweep counts must be positive".into()));
        }
        if s.epsilons.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(CliError::Invalid("sweep epsilons must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn instance(&self) -> CliResult<GepInstance> {
        match &self.dataset {
            None => Ok(GepInstance::bundled()),
            Some(p) if !p.is_file() => Err(CliError::DatasetMissing(p.clone())),
            Some(p) => Ok(GepInstance::load(p)?),
        }
    }

    /// SHA-256 of the canonical JSON form of the resolved configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("configuration serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
