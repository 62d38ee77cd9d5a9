//! The end-to-end classifier, its configuration and checkpoint format.

pub mod checkpoint;
pub mod config;
pub mod crnn;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use config::{CrnnConfig, Stage};
pub use crnn::{CrnnModel, ModelGrads, ParamRow, ParamTable, BUFFER_NAMES, PARAM_NAMES};
