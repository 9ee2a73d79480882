//! Color-knowledge probing: human ground truth, corpus statistics, zero-shot
//! scoring of model predictions and representation probing.

pub mod annotations;
pub mod color;
pub mod corpus;
pub mod error;
pub mod grouping;
pub mod loss_data;
pub mod probe;
pub mod rank;
pub mod synthetic;
pub mod zeroshot;

pub use color::{Color, ColorDistribution, NUM_COLORS};
pub use error::{Error, Result};
