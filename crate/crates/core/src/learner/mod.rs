//! Position regressor: network, optimizer, training loop and model files.

mod adam;
mod io;
mod network;
mod train;

pub use adam::{Adam, AdamConfig};
pub use io::{
    history_to_csv, load_model, save_model, HISTORY_CSV_HEADER, MODEL_MAGIC, MODEL_VERSION,
};
pub use network::{mmse_loss, Cache, ConvSpec, Dense, Mode, Network, NetworkSpec, Params, Real};
pub use train::{
    epoch_order, predict, predict_inputs, predict_view, train, train_with_observer, EpochRecord,
    Model, TrainConfig,
};
