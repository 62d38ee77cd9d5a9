//! Signal ingestion, windowing, splitting and synthetic data.

pub mod archive;
pub mod signal;
pub mod split;
pub mod synth;
pub mod window;

pub use archive::{load_archive, read_manifest, save_archive, Manifest};
pub use signal::{
    load_binary_matrix, load_matrix, load_text_matrix, save_binary_matrix, SignalMatrix,
};
pub use split::{split, split_three, SplitSpec};
pub use synth::{synth_generate, SynthClass, SynthSpec};
pub use window::{assemble, one_hot, window, WindowSet};
