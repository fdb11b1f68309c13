//! Memory-augmented recurrent networks.
//!
//! An LSTM controller drives either a differentiable stack ([`stack_memory`])
//! or an addressable tape ([`tape_memory`]); plain LSTM and tanh-RNN
//! baselines share the same code path without memory. [`model`] assembles
//! the pieces, [`train`] fits them, and [`introspect`] records and averages
//! what happens inside.

pub mod batch;
pub mod checkpoint;
pub mod config;
mod error;
pub mod eval;
pub mod introspect;
pub mod model;
pub mod optim;
pub mod params;
pub mod recurrent;
pub mod stack_memory;
pub mod tape_memory;
pub mod train;

pub use error::CoreError;

pub type Result<T, E = CoreError> = std::result::Result<T, E>;
