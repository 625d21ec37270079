//! A self-contained daily-temperature forecasting engine.
//!
//! Everything numeric is built from first principles on a minimal dense
//! tensor core: a Conv1D + double-LSTM + dense forecasting model with exact
//! analytic backward passes, Adam training on MAE loss, the evaluation
//! metrics, and three comparison baselines. The `data` module ingests the
//! eight-field daily temperature CSV, cleans missing-value sentinels,
//! normalizes, and windows series into supervised datasets.
//!
//! Determinism is a design rule throughout: kernels accumulate in fixed
//! order, parallel sections reduce over fixed-size chunks, and all
//! randomness flows from explicit seeds.

pub mod baseline;
pub mod data;
pub mod error;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod tensor;
pub mod train;

pub use baseline::{
    build_cnn_only, build_lstm_only, cnn_only_spec, cnn_only_spec_with_window, compare_models,
    linreg_fit, lstm_only_spec, lstm_only_spec_with_window, render_table, LinRegModel,
    ModelComparison,
};
pub use data::{
    chronological_split, clean_series, make_windows, normalize, parse_csv, prepare_datasets,
    synthesize_series, synthesize_series_with, CityKey, CitySeries, IngestStats, MissingPolicy,
    NormStats, PreparedData, Provenance, RawRecord, SynthParams, WindowedDataset,
    DEFAULT_MISSING_THRESHOLD,
};
pub use error::{Error, Result};
pub use layers::{AffineScale, Conv1DLayer, DenseLayer, GlobalAvgPool, Layer, LstmLayer};
pub use metrics::{explained_variance, mae, r2_score, EvalReport};
pub use model::{
    build_cnn_lstm, build_model, cnn_lstm_spec, cnn_lstm_spec_double_conv,
    cnn_lstm_spec_with_window, LayerSpec, Model, ModelGrads, ModelSpec, ParameterCounts,
    MODEL_FORMAT_VERSION,
};
pub use tensor::{activation, conv1d_valid, reduce_mean, Activation, Tensor};
pub use train::{evaluate, mae_loss, predict_all, train, Adam, EpochRecord, TrainConfig, TrainHistory};
