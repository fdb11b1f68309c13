//! The run configuration: one TOML file, resolved with flag overrides and
//! copied into every output directory.

use std::path::{Path, PathBuf};

use mann_core::config::{InitialMemory, InitialReadout, ModelConfig, Precision, Variant};
use mann_core::train::TrainConfig;
use mann_tasks::TaskKind;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Seed for dataset and probe generation.
    pub seed: u64,
    /// Directory holding `train.txt`, `dev.txt` and `test.txt`; generated in
    /// memory from the fields below when unset.
    pub dir: Option<PathBuf>,
    pub train_size: Option<usize>,
    pub dev_size: Option<usize>,
    pub test_size: Option<usize>,
    pub min_len: usize,
    /// Longest mirror sequence in train and dev.
    pub max_len: usize,
    /// Longest mirror sequence in the test set.
    pub test_max_len: usize,
    /// Largest #LPO in M10AE train data.
    pub max_lpo: usize,
    /// Largest #LPO in M10AE dev and test data.
    pub test_max_lpo: usize,
    /// Length of mirror probe sequences.
    pub probe_len: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dir: None,
            train_size: None,
            dev_size: None,
            test_size: None,
            min_len: 1,
            max_len: 5,
            test_max_len: 10,
            max_lpo: 14,
            test_max_lpo: 20,
            probe_len: mann_tasks::probe::DEFAULT_MIRROR_PROBE_LEN,
        }
    }
}

impl DataConfig {
    pub fn sizes(&self, task: TaskKind) -> (usize, usize, usize) {
        let (tr, dev, test) = match task {
            TaskKind::Mirror => (20_000, 1_000, 5_000),
            TaskKind::M10ae => (80_000, 2_000, 20_000),
        };
        (self.train_size.unwrap_or(tr), self.dev_size.unwrap_or(dev), self.test_size.unwrap_or(test))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub variant: Variant,
    /// Memory size; defaults to 20 for mirror and 10 for M10AE.
    pub memory_cells: Option<usize>,
    pub controller_dim: Option<usize>,
    pub cell_dim: Option<usize>,
    pub max_pops: Option<usize>,
    pub precision: Precision,
    pub initial_readout: InitialReadout,
    pub initial_memory: InitialMemory,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            variant: Variant::Sann,
            memory_cells: None,
            controller_dim: None,
            cell_dim: None,
            max_pops: None,
            precision: Precision::F32,
            initial_readout: InitialReadout::default(),
            initial_memory: InitialMemory::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct PathsConfig {
    pub checkpoint: Option<PathBuf>,
    pub probes: Option<PathBuf>,
    pub traces: Option<PathBuf>,
    pub specs: Vec<PathBuf>,
    pub inputs: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task: TaskKind,
    /// Seed for model initialization and batch sampling.
    pub seed: u64,
    pub out: PathBuf,
    pub data: DataConfig,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub paths: PathsConfig,
    /// Whether the loaded file set `train.max_steps` itself.
    #[serde(skip)]
    steps_explicit: bool,
}

pub const M10AE_MAX_STEPS: usize = 500_000;

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            task: TaskKind::Mirror,
            seed: 0,
            out: PathBuf::from("runs/default"),
            data: DataConfig::default(),
            model: ModelSection::default(),
            train: TrainConfig::default(),
            paths: PathsConfig::default(),
            steps_explicit: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let bad = |e: toml::de::Error| CliError::config(format!("{}: {}", path.display(), e.message()));
        let table: toml::Table = toml::from_str(&text).map_err(bad)?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(bad)?;
        cfg.steps_explicit = table.get("train").and_then(|t| t.get("max_steps")).is_some();
        Ok(cfg)
    }

    /// Sets `train.max_steps` explicitly; a rerun from the written config
    /// then needs no defaults.
    pub fn set_max_steps(&mut self, steps: usize) {
        self.train.max_steps = steps;
        self.steps_explicit = true;
    }

    /// Applies task-dependent defaults not fixed by the file or flags.
    pub fn resolve(&mut self) {
        if !self.steps_explicit && self.task == TaskKind::M10ae {
            self.train.max_steps = M10AE_MAX_STEPS;
        }
        self.steps_explicit = true;
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs serialize")
    }

    /// Writes the resolved config into the output directory.
    pub fn write_to_out(&self) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.out)?;
        std::fs::write(self.out.join(CONFIG_FILE), self.to_toml())?;
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        let base = match self.task {
            TaskKind::Mirror => ModelConfig::mirror(self.model.variant, self.seed),
            TaskKind::M10ae => ModelConfig::m10ae(self.model.variant, 10, self.seed),
        };
        let m = &self.model;
        ModelConfig {
            memory_cells: m.memory_cells.unwrap_or(base.memory_cells),
            controller_dim: m.controller_dim.unwrap_or(base.controller_dim),
            cell_dim: m.cell_dim.unwrap_or(base.cell_dim),
            max_pops: m.max_pops.unwrap_or(base.max_pops),
            precision: m.precision,
            initial_readout: m.initial_readout,
            initial_memory: m.initial_memory,
            ..base
        }
    }

    /// The training config with the run seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { seed: self.seed, ..self.train.clone() }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model_config().validate().map_err(|e| CliError::config(e.to_string()))?;
        self.train_config().validate().map_err(|e| CliError::config(e.to_string()))?;
        let d = &self.data;
        if d.min_len == 0 || d.min_len > d.max_len || d.max_len > d.test_max_len {
            return Err(CliError::config("need 1 <= min_len <= max_len <= test_max_len"));
        }
        if d.max_lpo > d.test_max_lpo {
            return Err(CliError::config("need max_lpo <= test_max_lpo"));
        }
        if d.probe_len == 0 {
            return Err(CliError::config("probe_len must be positive"));
        }
        Ok(())
    }
}
