//! Dense 2-D tensor arithmetic with define-by-run reverse-mode automatic
//! differentiation.
//!
//! Every value lives on a [`Tape`] as a row-major matrix; vectors are `1 × n`
//! and batches of vectors are `B × n`. Operations are recorded in execution
//! order, so the node list is already a topological order and [`Tape::backward`]
//! is a single reverse sweep.
//!
//! ```
//! use mann_tensor::{Tape, arr2};
//!
//! let mut tape = Tape::<f64>::new();
//! let x = tape.param(arr2(&[[1.0, 2.0, 3.0]])).unwrap();
//! let sq = tape.mul(x, x).unwrap();
//! let loss = tape.sum(sq);
//! tape.backward(loss).unwrap();
//! assert_eq!(tape.grad(x).unwrap(), &arr2(&[[2.0, 4.0, 6.0]]));
//! ```

mod error;
pub mod gradcheck;
mod ops;
mod scalar;
mod tape;

pub use error::TensorError;
pub use ndarray::{arr2, Array2};
pub use scalar::Scalar;
pub use tape::{Tape, Tensor, Var};

pub type Result<T, E = TensorError> = std::result::Result<T, E>;
