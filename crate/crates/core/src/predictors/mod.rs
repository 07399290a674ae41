//! Accuracy predictors: max-softmax thresholding, robust linear regression on
//! the Fréchet distance, and a small network on the full dataset
//! representation.

mod confidence;
mod linear;
mod neural;
mod representation;
mod set;

pub use confidence::predict_confidence;
pub use linear::{fit_linear, fit_linear_report, predict_linear, LinearFit, LinearPredictor, HUBER_DELTA};
pub use neural::{fit_neural, predict_neural, NeuralConfig, NeuralNormalizer, NeuralPredictor};
pub use representation::{assemble_representation, DatasetRepresentation};
pub use set::PredictorSet;
