//! From clean fingerprints to network inputs: noise, detection threshold,
//! encoding, dataset assembly and persistence.

mod dataset;
mod format;
mod noise;
mod preprocess;

pub use dataset::{
    assemble_dataset, config_digest, epoch_view, position_id, test_view, test_views, AssemblyStats,
    ConfigDigest, Dataset, LabelScaler, View,
};
pub use format::{
    dataset_to_csv, load_dataset, load_dataset_checked, save_dataset, DATASET_CSV_HEADER,
    DATASET_MAGIC, DATASET_VERSION,
};
pub(crate) use format::{put_f32, Reader};
pub use noise::{apply_noise, NoiseModel};
pub use preprocess::{
    apply_threshold, binarize, normalize_float, normalize_per_row, preprocess, InputMode,
    Normalization, PreprocessConfig, DEFAULT_CEILING_DBM, FLOAT_FLOOR,
};
