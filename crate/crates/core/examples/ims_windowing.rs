//! Windowing and splitting at the full four-class IMS scale, using
//! placeholder signals of the right size. Prints window counts, the split
//! and the layer-by-layer shapes of the full network.
//!
//! cargo run --release --example ims_windowing

use bearing_crnn::data::{assemble, split, window};
use bearing_crnn::{CrnnConfig, CrnnModel, Rng, SignalMatrix, SplitSpec};

fn main() -> bearing_crnn::Result<()> {
    // 300 recordings of 20,480 rows x 8 channels per class would be the real
    // thing; 30 files (614,400 rows) give 4096 windows of 150 steps
    let rows = 614_400;
    let mut classes = Vec::new();
    for (k, name) in ["healthy", "outer_race", "inner_race", "rolling_element"]
        .iter()
        .enumerate()
    {
        let mut rng = Rng::new(k as u64);
        let data = (0..rows * 8).map(|_| rng.normal() * 0.1).collect();
        let signal = SignalMatrix::new(rows, 8, data, 20_000.0)?;
        let w = window(&signal, 150)?;
        println!("{name:>16}: {rows} rows -> {:?}", w.shape());
        classes.push((name.to_string(), w));
    }
    let all = assemble(classes)?;

    let spec = SplitSpec {
        train_fraction: 0.25,
        batch_size: 64,
        seed: 0,
        stratified: true,
    };
    let (train, test) = split(&all, &spec)?;
    println!(
        "{} windows: {} train, {} test",
        all.len(),
        train.len(),
        test.len()
    );
    println!("train per class {:?}", train.class_counts());

    let cfg = CrnnConfig::ims();
    for stage in cfg.shape_chain()? {
        println!("{:>10}  {:?}", stage.name, stage.shape);
    }
    let model = CrnnModel::build(cfg, &mut Rng::new(0))?;
    let table = model.param_count();
    for row in &table.rows {
        println!(
            "{:>10}  trainable {:>6}  non-trainable {:>4}",
            row.layer, row.trainable, row.non_trainable
        );
    }
    println!("total trainable {}", table.trainable());
    Ok(())
}
