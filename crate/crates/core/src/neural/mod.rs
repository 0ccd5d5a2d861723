//! A small reverse-mode differentiation engine over dense matrices, with the
//! layers the agent needs: dense, elementwise activations, softmax, the
//! relation-typed graph layer and mean pooling.

pub mod checkpoint;
mod gradcheck;
mod layers;
mod matrix;
mod optim;
mod params;
mod tape;

pub use gradcheck::{check_gradients, GradCheck, GRADCHECK_FLOOR};
pub use layers::{Activation, Dense, RelGnnLayer};
pub use matrix::Matrix;
pub use optim::Adam;
pub use params::{Gradients, Param, ParamId, ParamStore};
pub use tape::{Adjacency, Tape, Var};
