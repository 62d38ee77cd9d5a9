//! Saves a full-size model, reloads it and checks that inference agrees.
//!
//! cargo run --release --example checkpoint_roundtrip -- [path]

use bearing_crnn::model::{load_checkpoint, save_checkpoint};
use bearing_crnn::{CrnnConfig, CrnnModel, Rng, Tensor};

fn main() -> bearing_crnn::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("ims_example.crn1"), Into::into);

    let mut model = CrnnModel::build(CrnnConfig::ims(), &mut Rng::new(1))?;
    model.set_class_names(
        ["healthy", "outer_race", "inner_race", "rolling_element"]
            .map(String::from)
            .to_vec(),
    )?;
    save_checkpoint(&model, &path)?;
    let bytes = std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
    println!("wrote {} ({bytes} bytes)", path.display());

    let back = load_checkpoint(&path)?;
    println!("classes {:?}", back.class_names());
    println!("trainable parameters {}", back.param_count().trainable());

    let x = Tensor::uniform(&mut Rng::new(2), &[8, 150, 8], -2.0, 2.0)?;
    let diff = back.infer(&x)?.max_abs_diff(&model.infer(&x)?)?;
    println!("largest score difference after reload: {diff:.2e}");
    println!("predictions {:?}", back.predict(&x)?);
    Ok(())
}
