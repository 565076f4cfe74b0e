//! Forecasting models: ridge regression, LSTM, GRU, a vanilla transformer
//! and the hybrid transformer that fuses signals into its input.

mod batch;
mod config;
mod fusion;
mod linreg;
mod network;
mod recurrent;
mod train;
mod transformer;

pub use batch::Batch;
pub use config::{Fusion, GateMode, ModelConfig, ModelKind, Pooling};
pub use fusion::{concat_fuse, gated_fuse, Gated};
pub use linreg::{fit_ridge, RidgeFit};
pub use network::{hybrid_forward, vanilla_forward, Forward, ForwardOptions, Network};
pub use recurrent::{gru_encode, lstm_encode, HiddenStates};
pub use train::{increment_scale, mse, train, TrainedModel, MODEL_FORMAT, MODEL_VERSION};
pub use transformer::{
    encoder_param_shapes, positional_encoding, transformer_encode, EncodedOutput, EncoderShape,
    LAYER_NORM_EPS,
};
