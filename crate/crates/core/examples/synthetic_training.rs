//! Trains a reduced network on synthetic four-class bearing vibration and
//! prints the learning curve.
//!
//! cargo run --release --example synthetic_training -- [epochs] [learning_rate] [seed]

use std::time::Instant;

use bearing_crnn::data::{assemble, split, synth_generate, window};
use bearing_crnn::training::{fit, init_model, METRICS_CSV_HEADER};
use bearing_crnn::{CrnnConfig, SplitSpec, SynthSpec, TrainConfig};

fn main() -> bearing_crnn::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().map_or(30, |a| a.parse().expect("epochs"));
    let learning_rate = args
        .next()
        .map_or(0.05, |a| a.parse().expect("learning rate"));
    let seed = args.next().map_or(1, |a| a.parse().expect("seed"));

    let spec = SynthSpec::default();
    let mut classes = Vec::new();
    for (class, signal) in spec.classes.iter().zip(synth_generate(&spec)?) {
        classes.push((class.name.clone(), window(&signal, 64)?));
    }
    let data = assemble(classes)?;
    println!(
        "{} windows of 64x{} in {} classes",
        data.len(),
        data.channels(),
        data.num_classes()
    );

    let train_cfg = TrainConfig {
        epochs,
        batch_size: 16,
        learning_rate,
        seed,
        ..TrainConfig::default()
    };
    let (train, test) = split(
        &data,
        &SplitSpec {
            train_fraction: 0.5,
            batch_size: 16,
            seed,
            stratified: true,
        },
    )?;

    let mut cfg = CrnnConfig::new(64, data.channels(), data.num_classes());
    cfg.conv_filters = 16;
    cfg.conv_kernel = 16;
    cfg.pool_size = 4;
    cfg.lstm_units = 12;
    let mut model = init_model(cfg, seed)?;
    model.set_class_names(data.class_names().to_vec())?;
    println!("trainable parameters: {}", model.param_count().trainable());

    let started = Instant::now();
    println!("{METRICS_CSV_HEADER}");
    fit(&mut model, &train, &test, &train_cfg, 0, true, |m, _| {
        println!("{}", m.csv_row());
        Ok(())
    })?;
    println!("total {:.1} s", started.elapsed().as_secs_f64());
    Ok(())
}
