//! Planning and analysis of fast, vibration-free point-to-point motions of a
//! robot arm carrying a flexible beam.

pub mod beam_model;
pub mod cli;
pub mod error;
pub mod estimation;
pub mod input_shaping;
pub mod kinematics;
pub mod linalg;
pub mod nlp_solver;
pub mod scalar;
pub mod simulator;
pub mod task;
pub mod trajectory;
pub mod transcription;

pub use error::{Error, Result};
