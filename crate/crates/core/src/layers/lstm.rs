//! LSTM layer with backpropagation through time.
//!
//! Each gate has one weight matrix `[hidden, hidden + input]` that multiplies
//! the concatenation `[h_{t-1}, x_t]` (hidden state first):
//!
//! ```text
//! i_t  = sigmoid(W_i [h_{t-1}, x_t] + b_i)
//! f_t  = sigmoid(W_f [h_{t-1}, x_t] + b_f)
//! o_t  = sigmoid(W_o [h_{t-1}, x_t] + b_o)
//! c~_t = tanh(W_c [h_{t-1}, x_t] + b_c)
//! c_t  = f_t * c_{t-1} + i_t * c~_t
//! h_t  = o_t * tanh(c_t)
//! ```

use crate::error::{Error, Result};
use crate::layers::activation::sigmoid_scalar;
use crate::tensor::Tensor;

/// Gate order used for every `[Tensor; 4]` in this module.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Input = 0,
    Forget = 1,
    Output = 2,
    Candidate = 3,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Input, Gate::Forget, Gate::Output, Gate::Candidate];

    pub fn suffix(self) -> &'static str {
        match self {
            Gate::Input => "i",
            Gate::Forget => "f",
            Gate::Output => "o",
            Gate::Candidate => "c",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Lstm {
    pub weights: [Tensor; 4],
    pub biases: [Tensor; 4],
    pub stateful: bool,
    /// `(h, c)` carried to the next call when `stateful`.
    state: Option<(Tensor, Tensor)>,
}

#[derive(Debug, Clone)]
pub struct CellCache {
    concat: Tensor,
    c_prev: Tensor,
    /// Post-nonlinearity gate values, in [`Gate`] order.
    gates: [Tensor; 4],
    tanh_c: Tensor,
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    input_shape: Vec<usize>,
    steps: Vec<CellCache>,
}

#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub d_input: Tensor,
    pub d_weights: [Tensor; 4],
    pub d_biases: [Tensor; 4],
    pub d_h0: Tensor,
    pub d_c0: Tensor,
}

impl Lstm {
    pub fn zeros(input: usize, hidden: usize, stateful: bool) -> Result<Self> {
        let w = Tensor::zeros(&[hidden, hidden + input])?;
        let b = Tensor::zeros(&[hidden])?;
        Ok(Lstm {
            weights: [w.clone(), w.clone(), w.clone(), w],
            biases: [b.clone(), b.clone(), b.clone(), b],
            stateful,
            state: None,
        })
    }

    pub fn from_parts(weights: [Tensor; 4], biases: [Tensor; 4], stateful: bool) -> Result<Self> {
        let shape = weights[0].shape().to_vec();
        let &[hidden, width] = &shape[..] else {
            return Err(Error::Shape(format!(
                "LSTM gate weights must be [hidden, hidden + input], got {shape:?}"
            )));
        };
        if width <= hidden {
            return Err(Error::Shape(format!(
                "LSTM gate weights {shape:?} leave no room for the input"
            )));
        }
        for (w, b) in weights.iter().zip(&biases) {
            w.expect_shape(&shape, "LSTM gate weights")?;
            b.expect_shape(&[hidden], "LSTM gate bias")?;
        }
        Ok(Lstm {
            weights,
            biases,
            stateful,
            state: None,
        })
    }

    pub fn hidden(&self) -> usize {
        self.weights[0].shape()[0]
    }

    pub fn input_size(&self) -> usize {
        self.weights[0].shape()[1] - self.hidden()
    }

    pub fn reset_state(&mut self) {
        self.state = None;
    }

    pub fn carried_state(&self) -> Option<&(Tensor, Tensor)> {
        self.state.as_ref()
    }

    /// One time step. Returns `(h_t, c_t, cache)`.
    pub fn cell_forward(
        &self,
        x_t: &Tensor,
        h_prev: &Tensor,
        c_prev: &Tensor,
    ) -> Result<(Tensor, Tensor, CellCache)> {
        let (hidden, input) = (self.hidden(), self.input_size());
        let &[batch, d] = x_t.shape() else {
            return Err(Error::Shape(format!(
                "LSTM step input must be [batch, input], got {:?}",
                x_t.shape()
            )));
        };
        if d != input {
            return Err(Error::Shape(format!(
                "LSTM expects input size {input}, got {d}"
            )));
        }
        h_prev.expect_shape(&[batch, hidden], "LSTM h_prev")?;
        c_prev.expect_shape(&[batch, hidden], "LSTM c_prev")?;

        let mut concat = Vec::with_capacity(batch * (hidden + input));
        for b in 0..batch {
            concat.extend_from_slice(&h_prev.data()[b * hidden..(b + 1) * hidden]);
            concat.extend_from_slice(&x_t.data()[b * input..(b + 1) * input]);
        }
        let concat = Tensor::from_vec(&[batch, hidden + input], concat)?;

        let gate = |g: Gate| -> Result<Tensor> {
            let mut z = concat.matmul_transposed(&self.weights[g as usize])?;
            let bias = self.biases[g as usize].data();
            for row in z.data_mut().chunks_mut(hidden) {
                for (v, b) in row.iter_mut().zip(bias) {
                    *v += b;
                }
            }
            Ok(match g {
                Gate::Candidate => z.map(f64::tanh),
                _ => z.map(sigmoid_scalar),
            })
        };
        let gates = [
            gate(Gate::Input)?,
            gate(Gate::Forget)?,
            gate(Gate::Output)?,
            gate(Gate::Candidate)?,
        ];
        let [i, f, o, g] = &gates;
        let c = f.hadamard(c_prev)?.add(&i.hadamard(g)?)?;
        let tanh_c = c.map(f64::tanh);
        let h = o.hadamard(&tanh_c)?;
        let cache = CellCache {
            concat,
            c_prev: c_prev.clone(),
            gates,
            tanh_c,
        };
        Ok((h, c, cache))
    }

    /// Unrolls over `x: [batch, time, input]` from the given initial state and
    /// returns `(h_T, c_T, cache)`. Does not touch the carried state.
    pub fn forward_from(
        &self,
        x: &Tensor,
        h0: &Tensor,
        c0: &Tensor,
    ) -> Result<(Tensor, Tensor, LstmCache)> {
        let &[batch, steps, input] = x.shape() else {
            return Err(Error::Shape(format!(
                "LSTM input must be [batch, time, input], got {:?}",
                x.shape()
            )));
        };
        let mut h = h0.clone();
        let mut c = c0.clone();
        let mut caches = Vec::with_capacity(steps);
        let mut x_t = vec![0.0; batch * input];
        for t in 0..steps {
            for b in 0..batch {
                let src = (b * steps + t) * input;
                x_t[b * input..(b + 1) * input].copy_from_slice(&x.data()[src..src + input]);
            }
            let x_t = Tensor::from_vec(&[batch, input], x_t.clone())?;
            let (h_next, c_next, cache) = self.cell_forward(&x_t, &h, &c)?;
            h = h_next;
            c = c_next;
            caches.push(cache);
        }
        Ok((
            h,
            c,
            LstmCache {
                input_shape: x.shape().to_vec(),
                steps: caches,
            },
        ))
    }

    /// Unrolls over the sequence starting from zeros, or from the carried
    /// state when the layer is stateful, and returns the last hidden state.
    pub fn forward(&mut self, x: &Tensor) -> Result<(Tensor, LstmCache)> {
        let batch = x.shape()[0];
        let hidden = self.hidden();
        let (h0, c0) = match (&self.state, self.stateful) {
            (Some((h, c)), true) => {
                if h.shape()[0] != batch {
                    return Err(Error::State(format!(
                        "stateful LSTM carries {} batch lanes but got a batch of {batch}",
                        h.shape()[0]
                    )));
                }
                (h.clone(), c.clone())
            }
            _ => (
                Tensor::zeros(&[batch, hidden])?,
                Tensor::zeros(&[batch, hidden])?,
            ),
        };
        let (h, c, cache) = self.forward_from(x, &h0, &c0)?;
        if self.stateful {
            self.state = Some((h.clone(), c));
        }
        Ok((h, cache))
    }

    /// Backpropagation through time from a gradient on the final hidden state.
    pub fn backward(&self, cache: &LstmCache, d_h_last: &Tensor) -> Result<LstmGrads> {
        let &[batch, steps, input] = &cache.input_shape[..] else {
            unreachable!("cache input is rank 3");
        };
        if cache.steps.len() != steps {
            return Err(Error::State("LSTM cache does not match its input".into()));
        }
        let hidden = self.hidden();
        d_h_last.expect_shape(&[batch, hidden], "LSTM backward d_h")?;

        let mut d_weights = self.weights.clone().map(|w| w.map(|_| 0.0));
        let mut d_biases = self.biases.clone().map(|b| b.map(|_| 0.0));
        let mut d_input = vec![0.0; batch * steps * input];
        let mut dh = d_h_last.clone();
        let mut dc = Tensor::zeros(&[batch, hidden])?;

        for (t, step) in cache.steps.iter().enumerate().rev() {
            let [i, f, o, g] = &step.gates;
            let (dhd, dcd) = (dh.data(), dc.data_mut());
            let n = batch * hidden;
            let mut dz = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
            let mut dc_prev = vec![0.0; n];
            for k in 0..n {
                let (iv, fv, ov, gv) = (i.data()[k], f.data()[k], o.data()[k], g.data()[k]);
                let tc = step.tanh_c.data()[k];
                let d_o = dhd[k] * tc;
                let d_c = dcd[k] + dhd[k] * ov * (1.0 - tc * tc);
                let d_i = d_c * gv;
                let d_g = d_c * iv;
                let d_f = d_c * step.c_prev.data()[k];
                dc_prev[k] = d_c * fv;
                dz[Gate::Input as usize][k] = d_i * iv * (1.0 - iv);
                dz[Gate::Forget as usize][k] = d_f * fv * (1.0 - fv);
                dz[Gate::Output as usize][k] = d_o * ov * (1.0 - ov);
                dz[Gate::Candidate as usize][k] = d_g * (1.0 - gv * gv);
            }
            let mut d_concat = Tensor::zeros(&[batch, hidden + input])?;
            for gate in Gate::ALL {
                let idx = gate as usize;
                let dz_t = Tensor::from_vec(&[batch, hidden], std::mem::take(&mut dz[idx]))?;
                d_weights[idx].add_assign(&dz_t.transposed_matmul(&step.concat)?)?;
                d_biases[idx].add_assign(&dz_t.column_sums()?)?;
                d_concat.add_assign(&dz_t.matmul(&self.weights[idx])?)?;
            }
            let mut dh_prev = vec![0.0; batch * hidden];
            for b in 0..batch {
                let row = &d_concat.data()[b * (hidden + input)..(b + 1) * (hidden + input)];
                dh_prev[b * hidden..(b + 1) * hidden].copy_from_slice(&row[..hidden]);
                let dst = (b * steps + t) * input;
                d_input[dst..dst + input].copy_from_slice(&row[hidden..]);
            }
            dh = Tensor::from_vec(&[batch, hidden], dh_prev)?;
            dc = Tensor::from_vec(&[batch, hidden], dc_prev)?;
        }

        Ok(LstmGrads {
            d_input: Tensor::from_vec(&cache.input_shape, d_input)?,
            d_weights,
            d_biases,
            d_h0: dh,
            d_c0: dc,
        })
    }
}
