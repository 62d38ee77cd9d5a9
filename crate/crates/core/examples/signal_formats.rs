//! Reads a whitespace-separated text recording, converts it to the binary
//! VIB1 format and back, and builds a class archive from it.
//!
//! cargo run --example signal_formats

use bearing_crnn::data::{
    assemble, load_archive, load_binary_matrix, load_text_matrix, save_archive, save_binary_matrix,
    window,
};

fn main() -> bearing_crnn::Result<()> {
    let dir = std::env::temp_dir().join("bearing_crnn_signal_formats");
    std::fs::create_dir_all(&dir).expect("temp dir");

    // one row per sample, one column per accelerometer channel
    let text_path = dir.join("recording.txt");
    let mut text = String::new();
    for r in 0..1000 {
        let t = r as f64 / 20_000.0;
        let a = (2.0 * std::f64::consts::PI * 160.0 * t).sin();
        let b = 0.5 * (2.0 * std::f64::consts::PI * 236.4 * t).cos();
        text.push_str(&format!("{a:.6}\t{b:.6}\n"));
    }
    std::fs::write(&text_path, text).expect("write text recording");

    let signal = load_text_matrix(&text_path)?;
    println!("text: {} rows x {} channels", signal.rows(), signal.cols());

    let bin_path = dir.join("recording.vib1");
    save_binary_matrix(&signal, &bin_path)?;
    let back = load_binary_matrix(&bin_path)?;
    let err = back
        .data()
        .iter()
        .zip(signal.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!(
        "vib1: {} bytes, largest difference {err:.1e} (values are stored as f32)",
        std::fs::metadata(&bin_path).map(|m| m.len()).unwrap_or(0)
    );

    let windows = window(&signal, 100)?;
    let ws = assemble(vec![
        ("tone_a".into(), windows.clone()),
        ("tone_b".into(), windows.map(|v| -v)),
    ])?;
    let archive = dir.join("archive");
    let manifest = save_archive(&ws, &archive, 20_000.0, 0)?;
    println!(
        "archive: {} windows of {}x{}, classes {:?}",
        manifest.num_samples,
        ws.window_len(),
        ws.channels(),
        ws.class_names()
    );
    let (reloaded, _) = load_archive(&archive)?;
    println!(
        "reloaded {} windows, labels {:?}",
        reloaded.len(),
        reloaded.class_counts()
    );
    Ok(())
}
