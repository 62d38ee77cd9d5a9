//! Runs the finite-difference gradient check over every layer and a small
//! end-to-end model, then prints the per-tensor error table.
//!
//! cargo run --release --example gradient_check -- [seed]

use bearing_crnn::training::gradcheck;

fn main() -> bearing_crnn::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .map_or(0, |a| a.parse().expect("seed"));
    let report = gradcheck::check_all(seed)?;
    print!("{report}");
    println!("largest relative error: {:.3e}", report.max_rel_error());
    if !report.passed() {
        std::process::exit(1);
    }
    Ok(())
}
