//! Minimal neural-network toolkit: a reverse-mode tape over 2-d tensors,
//! named parameter stores with JSON checkpoints, Adam, a BiLSTM, and a
//! finite-difference gradient checker.

pub mod adam;
pub mod gradcheck;
pub mod lstm;
pub mod params;
pub mod tape;

pub use adam::Adam;
pub use gradcheck::{finite_difference_check, relative_error, GradCheckReport};
pub use lstm::{bilstm_forward, init_bilstm};
pub use params::{load_checkpoint, save_checkpoint, ParamStore, CHECKPOINT_SCHEMA_VERSION};
pub use tape::{Tape, Var};
