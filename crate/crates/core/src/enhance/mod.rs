//! Clean-token prediction from degraded speech.
//!
//! A [`SpectralFeatureExtractor`] turns the degraded waveform into one
//! conditioning vector per token frame. Each [`PredictionBranch`] embeds the
//! degraded token of its group, concatenates the frame features and maps the
//! result through a small classifier to a distribution over clean tokens;
//! the clean token is its argmax. In the parallel model the branches share
//! nothing and run concurrently. The serial baseline runs over residual
//! tokens and lets stage `n` see the clean tokens chosen by stages `1..n`.

mod branch;
mod container;
mod features;
mod model;
mod train;

pub use branch::{branch_forward, sample_token, softmax, Classifier, MlpClassifier, PredictionBranch};
pub use container::{AnyEnhancer, ENHANCER_MAGIC, ENHANCER_VERSION};
pub use features::{extract_features, FeatureConfig, SpectralFeatureExtractor};
pub use model::{
    enhance_parallel, enhance_serial, EnhancerModel, PredictionMode, PredictorConfig, SerialEnhancerModel,
    TokenPredictor,
};
pub use train::{
    fit_predictor, train_enhancer, train_serial_enhancer, ContextRows, EnhancerConfig, FrameBatch, FrameDataset,
    TrainReport,
};

use ndarray::{Array, Dimension};

/// Row-major copy when `a` is not already in standard layout.
pub(crate) fn standard<D: Dimension>(a: Array<f64, D>) -> Array<f64, D> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}
