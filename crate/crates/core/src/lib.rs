//! Retinal fundus image enhancement, a from-scratch convolutional network
//! with SGD training, lesion-count grading and multiclass evaluation metrics.

pub mod tensor;
pub mod model;
pub mod metrics;
pub mod preprocess;
pub mod dataset;
pub mod training;
pub mod gradcheck;
