//! Data ingestion, preprocessing, configuration and on-disk formats.

pub mod config;
pub mod csv;
pub mod plots;
pub mod preprocess;
pub mod spectrogram;
pub mod trace;

pub use config::{InputFormat, RunConfig, StftConfig};
pub use csv::{load_csv, parse_csv, save_csv, to_csv};
pub use preprocess::{
    cholesky_whiten, invert_all, preprocess, scale_unit_variance, standardize,
    standardize_and_shift, subtract_min, Step, Transform,
};
pub use spectrogram::{load_waveform, stft_spectrogram, Window};
pub use trace::{read_trace, write_trace, Manifest, StoredTrace};
