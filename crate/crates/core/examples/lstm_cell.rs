//! Steps one LSTM cell by hand and compares it with the layer.
//!
//! cargo run --example lstm_cell

use bearing_crnn::layers::activation::sigmoid_scalar;
use bearing_crnn::layers::{Gate, Lstm};
use bearing_crnn::{Rng, Tensor};

fn main() -> bearing_crnn::Result<()> {
    let (input, hidden) = (2, 3);
    let mut rng = Rng::new(7);
    let weights =
        Gate::ALL.map(|_| Tensor::uniform(&mut rng, &[hidden, hidden + input], -0.5, 0.5).unwrap());
    let mut biases = Gate::ALL.map(|_| Tensor::zeros(&[hidden]).unwrap());
    biases[Gate::Forget as usize] = Tensor::from_vec(&[hidden], vec![1.0; hidden])?;
    let lstm = Lstm::from_parts(weights, biases, false)?;

    let x = Tensor::from_vec(&[1, input], vec![0.4, -1.2])?;
    let h0 = Tensor::from_vec(&[1, hidden], vec![0.1, 0.0, -0.3])?;
    let c0 = Tensor::from_vec(&[1, hidden], vec![0.5, -0.2, 0.0])?;
    let (h, c, _) = lstm.cell_forward(&x, &h0, &c0)?;

    // the same step written out: gates see [h_prev, x]
    let z: Vec<f64> = h0.data().iter().chain(x.data()).copied().collect();
    let pre = |g: Gate, j: usize| {
        let w = &lstm.weights[g as usize].data()[j * (hidden + input)..(j + 1) * (hidden + input)];
        w.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() + lstm.biases[g as usize].data()[j]
    };
    println!(" j      h (layer)      h (by hand)    c");
    for j in 0..hidden {
        let i = sigmoid_scalar(pre(Gate::Input, j));
        let f = sigmoid_scalar(pre(Gate::Forget, j));
        let o = sigmoid_scalar(pre(Gate::Output, j));
        let g = pre(Gate::Candidate, j).tanh();
        let cj = f * c0.data()[j] + i * g;
        let hj = o * cj.tanh();
        println!(
            "{j:2}  {:+.12}  {:+.12}  {:+.6}",
            h.data()[j],
            hj,
            c.data()[j]
        );
        assert!((hj - h.data()[j]).abs() < 1e-15 && (cj - c.data()[j]).abs() < 1e-15);
    }

    // all-zero parameters: every gate is 0.5, the candidate is 0
    let zero = Lstm::zeros(input, hidden, false)?;
    let (h, c, _) = zero.cell_forward(
        &x,
        &Tensor::zeros(&[1, hidden])?,
        &Tensor::zeros(&[1, hidden])?,
    )?;
    println!("zero parameters: h = {:?}, c = {:?}", h.data(), c.data());
    Ok(())
}
