#![allow(dead_code)]

use bearing_crnn::data::{assemble, synth_generate, window};
use bearing_crnn::{CrnnConfig, Result, SynthSpec, WindowSet};

/// Four synthetic classes of 64x2 windows, 128 per class.
pub fn desk_windows() -> Result<WindowSet> {
    let spec = SynthSpec::default();
    let mut classes = Vec::new();
    for (class, signal) in spec.classes.iter().zip(synth_generate(&spec)?) {
        classes.push((class.name.clone(), window(&signal, 64)?));
    }
    assemble(classes)
}

/// The reduced architecture used for desk-scale learning.
pub fn desk_config(channels: usize, classes: usize) -> CrnnConfig {
    let mut c = CrnnConfig::new(64, channels, classes);
    c.conv_filters = 16;
    c.conv_kernel = 16;
    c.pool_size = 4;
    c.lstm_units = 12;
    c
}

/// T=20, C=2, F=4, K=5, pool 2, H=3, four classes.
pub fn toy_config() -> CrnnConfig {
    let mut c = CrnnConfig::new(20, 2, 4);
    c.conv_filters = 4;
    c.conv_kernel = 5;
    c.pool_size = 2;
    c.lstm_units = 3;
    c
}
