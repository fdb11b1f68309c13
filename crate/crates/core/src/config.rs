//! Model configuration.

use serde::{Deserialize, Serialize};

use crate::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// LSTM controller with a differentiable stack.
    Sann,
    /// LSTM controller with an addressable tape.
    Tann,
    /// LSTM without external memory.
    Lstm,
    /// Tanh RNN without external memory.
    Simprnn,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Sann, Variant::Tann, Variant::Lstm, Variant::Simprnn];

    pub fn has_memory(self) -> bool {
        matches!(self, Variant::Sann | Variant::Tann)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Sann => "sann",
            Variant::Tann => "tann",
            Variant::Lstm => "lstm",
            Variant::Simprnn => "simprnn",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.to_string() == s.to_ascii_lowercase())
            .ok_or_else(|| CoreError::Config(format!("unknown variant `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InputSpec {
    /// Dense input vectors of width `dim`.
    Vector { dim: usize },
    /// Token indices looked up in a trainable `vocab × dim` table.
    Embedding { vocab: usize, dim: usize },
}

impl InputSpec {
    pub fn width(self) -> usize {
        match self {
            InputSpec::Vector { dim } | InputSpec::Embedding { dim, .. } => dim,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    /// Nine independent sigmoid bits.
    Bits9,
    /// Ten-way classification logits.
    Class10,
}

impl HeadKind {
    pub fn width(self) -> usize {
        match self {
            HeadKind::Bits9 => 9,
            HeadKind::Class10 => 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

/// Readout fed to the controller at the first step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialReadout {
    Zeros,
    /// Read the initial memory: the (zero) stack top, or the tape at the initial read weights.
    #[default]
    MemoryRead,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialMemory {
    /// Every tape entry starts at [`INITIAL_TAPE_VALUE`].
    #[default]
    Constant,
    /// A trainable `N × d` initial tape.
    Learned,
}

pub const INITIAL_TAPE_VALUE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub controller_dim: usize,
    pub memory_cells: usize,
    pub cell_dim: usize,
    /// Largest number of pops `K` of a single stack action.
    pub max_pops: usize,
    pub input: InputSpec,
    pub head: HeadKind,
    #[serde(default)]
    pub precision: Precision,
    pub seed: u64,
    #[serde(default)]
    pub initial_readout: InitialReadout,
    #[serde(default)]
    pub initial_memory: InitialMemory,
}

impl ModelConfig {
    /// Mirror task dimensions: 20 cells of size 20, controller 100.
    pub fn mirror(variant: Variant, seed: u64) -> Self {
        Self {
            variant,
            controller_dim: 100,
            memory_cells: 20,
            cell_dim: 20,
            max_pops: 4,
            input: InputSpec::Vector { dim: mann_tasks::mirror::INPUT_DIM },
            head: HeadKind::Bits9,
            precision: Precision::F64,
            seed,
            initial_readout: InitialReadout::MemoryRead,
            initial_memory: InitialMemory::Constant,
        }
    }

    /// M10AE dimensions: embeddings, cells and controller all of size 100.
    pub fn m10ae(variant: Variant, memory_cells: usize, seed: u64) -> Self {
        Self {
            variant,
            controller_dim: 100,
            memory_cells,
            cell_dim: 100,
            max_pops: 4,
            input: InputSpec::Embedding { vocab: mann_tasks::m10ae::VOCAB_SIZE, dim: 100 },
            head: HeadKind::Class10,
            precision: Precision::F64,
            seed,
            initial_readout: InitialReadout::MemoryRead,
            initial_memory: InitialMemory::Constant,
        }
    }

    /// Width of the memory readout; 0 for the memoryless baselines.
    pub fn readout_dim(&self) -> usize {
        if self.variant.has_memory() {
            self.cell_dim
        } else {
            0
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(CoreError::Config(msg.to_string()));
        if self.controller_dim == 0 || self.input.width() == 0 {
            return fail("controller and input dimensions must be positive");
        }
        if let InputSpec::Embedding { vocab: 0, .. } = self.input {
            return fail("embedding vocabulary must be nonempty");
        }
        match self.variant {
            Variant::Sann => {
                if self.memory_cells < 2 {
                    return fail("a stack needs at least 2 cells for its convolutional policy");
                }
                if self.max_pops > self.memory_cells {
                    return fail("max_pops must not exceed memory_cells");
                }
            }
            Variant::Tann => {
                if self.memory_cells < 3 {
                    return fail("a tape needs at least 3 cells for its shift kernel");
                }
            }
            Variant::Lstm | Variant::Simprnn => {}
        }
        if self.variant.has_memory() && self.cell_dim == 0 {
            return fail("cell_dim must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for v in Variant::ALL {
            ModelConfig::mirror(v, 0).validate().unwrap();
            for n in [5, 10, 20] {
                ModelConfig::m10ae(v, n, 0).validate().unwrap();
            }
        }
    }

    #[test]
    fn bad_configs_rejected() {
        let mut c = ModelConfig::mirror(Variant::Sann, 0);
        c.memory_cells = 1;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::mirror(Variant::Sann, 0);
        c.max_pops = 30;
        assert!(c.validate().is_err());
    }

    #[test]
    fn serde_round_trip() {
        let c = ModelConfig::m10ae(Variant::Tann, 10, 7);
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<ModelConfig>(&s).unwrap(), c);
        assert!(s.contains("\"variant\":\"tann\""));
        assert_eq!("SANN".parse::<Variant>().unwrap(), Variant::Sann);
    }
}
