//! The two-branch classifier: LSTM over per-bin tokens, dense layers over the
//! general vector, element-wise gated fusion, and a softmax over SES classes.

mod check;
mod config;
mod metrics;
mod network;
mod train;

pub use check::check_model_gradients;
pub use config::{ModelConfig, Pooling, Variant};
pub use metrics::{class_name, evaluate, random_guess_baseline, report_from_confusion, ClassMetrics, EpochRecord, EvalReport};
pub use network::{ForwardTrace, S2sModel, Sample};
pub use train::{
    argmax, checkpoint_tensors, fit, load_checkpoint, logistic_baseline, predict, score, stratified_split, train,
    Classifier, LogisticModel, Split, TrainOptions, Trained, MODEL_DIMS, NORM_MEAN, NORM_STD,
};
