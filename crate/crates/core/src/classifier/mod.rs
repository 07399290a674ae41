//! Desk-scale image classifier: training, penultimate-layer features,
//! ground-truth accuracy, and the feature-bundle file format.

mod bundle;
mod mlp;
mod raster;

pub use bundle::{
    import_feature_bundle, label_accuracy, FeatureBundle, BUNDLE_MAGIC, BUNDLE_VERSION,
    IMPORT_SOFTMAX_TOL, SOFTMAX_TOL,
};
pub use mlp::{accuracy, argmax, extract_features, softmax, train_classifier, TinyClassifier, TrainConfig};
pub use raster::{LabeledImageSet, Raster, Shape};
