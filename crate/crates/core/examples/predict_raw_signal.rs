//! Trains a small model on synthetic data, then classifies a fresh
//! recording that was never windowed into the training set.
//!
//! cargo run --release --example predict_raw_signal

use bearing_crnn::data::{assemble, split, synth_generate, window};
use bearing_crnn::training::{fit, init_model};
use bearing_crnn::{CrnnConfig, SplitSpec, SynthSpec, TrainConfig};

fn main() -> bearing_crnn::Result<()> {
    let spec = SynthSpec::default();
    let mut parts = Vec::new();
    for (class, signal) in spec.classes.iter().zip(synth_generate(&spec)?) {
        parts.push((class.name.clone(), window(&signal, 64)?));
    }
    let data = assemble(parts)?;
    let (train, test) = split(
        &data,
        &SplitSpec {
            train_fraction: 0.5,
            batch_size: 16,
            seed: 0,
            stratified: true,
        },
    )?;

    let mut cfg = CrnnConfig::new(64, data.channels(), data.num_classes());
    cfg.conv_filters = 16;
    cfg.conv_kernel = 16;
    cfg.pool_size = 4;
    cfg.lstm_units = 12;
    let mut model = init_model(cfg, 0)?;
    model.set_class_names(data.class_names().to_vec())?;
    let train_cfg = TrainConfig {
        epochs: 10,
        batch_size: 16,
        learning_rate: 0.05,
        ..TrainConfig::default()
    };
    let history = fit(&mut model, &train, &test, &train_cfg, 0, false, |_, _| {
        Ok(())
    })?;
    let last = history.last().expect("at least one epoch");
    println!(
        "after {} epochs: held-out accuracy {:.3}",
        last.epoch, last.test_accuracy
    );

    // a new recording with a different noise seed
    let fresh = SynthSpec {
        seed: spec.seed + 1000,
        duration_s: 1.0,
        ..spec.clone()
    };
    for (class, signal) in fresh.classes.iter().zip(synth_generate(&fresh)?) {
        let windows = window(&signal, 64)?;
        let predicted = model.predict(&windows)?;
        let mut votes = vec![0usize; model.class_names().len()];
        for p in &predicted {
            votes[*p] += 1;
        }
        let best = (0..votes.len())
            .max_by_key(|&k| (votes[k], std::cmp::Reverse(k)))
            .unwrap();
        println!(
            "{:>16}: {} windows, majority {:<16} votes {:?}",
            class.name,
            predicted.len(),
            model.class_names()[best],
            votes
        );
    }
    Ok(())
}
