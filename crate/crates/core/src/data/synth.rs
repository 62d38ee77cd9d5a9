//! Synthetic bearing vibration with class-specific fault signatures.
//!
//! Channel `c` of a class is
//!
//! ```text
//! x_c(t) = g_c * [ A0 * sin(2 pi f_rot t + c pi / 2)
//!                  + sum_k A * exp(-(t - t_k) / tau) * [t >= t_k] ]
//!          + noise_std * N(0, 1)
//! ```
//!
//! with impulse times `t_k = t_0 + k / f_fault`, a seeded offset `t_0`, and
//! channel gain `g_c = 1 / (1 + c / 2)`. A class with `fault_hz == 0` has no
//! impulses. The one-sided exponential gives each impulse a single peak.

use serde::{Deserialize, Serialize};

use crate::data::SignalMatrix;
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthClass {
    pub name: String,
    pub rotation_hz: f64,
    /// Impulse repetition rate; 0 disables impulses.
    pub fault_hz: f64,
    pub impulse_amplitude: f64,
    pub noise_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub channels: usize,
    pub base_amplitude: f64,
    pub impulse_decay_s: f64,
    pub seed: u64,
    pub classes: Vec<SynthClass>,
}

impl Default for SynthSpec {
    /// Four health states at 2048 Hz for 4 s on 2 channels: 8192 rows per
    /// class, i.e. 128 windows of 64 rows.
    fn default() -> Self {
        let class = |name: &str, fault_hz: f64, impulse_amplitude: f64| SynthClass {
            name: name.to_string(),
            rotation_hz: 29.5,
            fault_hz,
            impulse_amplitude,
            noise_std: 0.2,
        };
        SynthSpec {
            sample_rate_hz: 2048.0,
            duration_s: 4.0,
            channels: 2,
            base_amplitude: 1.0,
            impulse_decay_s: 0.001,
            seed: 7,
            classes: vec![
                class("healthy", 0.0, 0.0),
                class("outer_race", 48.0, 6.0),
                class("inner_race", 110.0, 6.0),
                class("rolling_element", 240.0, 6.0),
            ],
        }
    }
}

impl SynthSpec {
    pub fn rows(&self) -> usize {
        (self.sample_rate_hz * self.duration_s).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.sample_rate_hz > 0.0) {
            return bad(format!(
                "sample rate must be positive, got {}",
                self.sample_rate_hz
            ));
        }
        if self.rows() == 0 {
            return bad("duration yields no samples".into());
        }
        if self.channels == 0 {
            return bad("at least one channel is required".into());
        }
        if !(self.impulse_decay_s > 0.0) {
            return bad("impulse decay must be positive".into());
        }
        if self.classes.is_empty() {
            return bad("at least one class is required".into());
        }
        let nyquist = self.sample_rate_hz / 2.0;
        for c in &self.classes {
            for (what, f) in [("rotation", c.rotation_hz), ("fault", c.fault_hz)] {
                if !(0.0..nyquist).contains(&f) {
                    return bad(format!(
                        "class {:?}: {what} frequency {f} Hz must be in [0, {nyquist}) Hz",
                        c.name
                    ));
                }
            }
            if !(c.noise_std >= 0.0) {
                return bad(format!("class {:?}: noise std must be >= 0", c.name));
            }
        }
        Ok(())
    }
}

fn generate_class(spec: &SynthSpec, class: &SynthClass, rng: &mut Rng) -> Result<SignalMatrix> {
    let rows = spec.rows();
    let sr = spec.sample_rate_hz;
    let tau = spec.impulse_decay_s;
    let period = if class.fault_hz > 0.0 {
        1.0 / class.fault_hz
    } else {
        0.0
    };
    let t0 = if period > 0.0 {
        rng.uniform(0.0, period)
    } else {
        0.0
    };
    // impulses older than this contribute less than 1e-9 of their amplitude
    let horizon = tau * 21.0;

    let mut data = Vec::with_capacity(rows * spec.channels);
    for n in 0..rows {
        let t = n as f64 / sr;
        let mut impulses = 0.0;
        if period > 0.0 && t >= t0 {
            let mut k = ((t - t0) / period).floor();
            while k >= 0.0 {
                let age = t - (t0 + k * period);
                if age > horizon {
                    break;
                }
                if age >= 0.0 {
                    impulses += class.impulse_amplitude * (-age / tau).exp();
                }
                k -= 1.0;
            }
        }
        for c in 0..spec.channels {
            let gain = 1.0 / (1.0 + c as f64 / 2.0);
            let phase = c as f64 * std::f64::consts::FRAC_PI_2;
            let tone = spec.base_amplitude
                * (2.0 * std::f64::consts::PI * class.rotation_hz * t + phase).sin();
            let noise = if class.noise_std > 0.0 {
                class.noise_std * rng.normal()
            } else {
                0.0
            };
            data.push(gain * (tone + impulses) + noise);
        }
    }
    let mut m = SignalMatrix::new(rows, spec.channels, data, sr)?;
    m.label = Some(class.name.clone());
    Ok(m)
}

/// One recording per class, in class order. Class `i` draws from stream `i`
/// of the spec's seed.
pub fn synth_generate(spec: &SynthSpec) -> Result<Vec<SignalMatrix>> {
    spec.validate()?;
    spec.classes
        .iter()
        .enumerate()
        .map(|(i, class)| generate_class(spec, class, &mut Rng::stream(spec.seed, i as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(fault_hz: f64, amp: f64, noise: f64) -> SynthSpec {
        SynthSpec {
            sample_rate_hz: 2048.0,
            duration_s: 3.0,
            channels: 1,
            base_amplitude: 1.0,
            impulse_decay_s: 0.001,
            seed: 3,
            classes: vec![SynthClass {
                name: "c".into(),
                rotation_hz: 30.0,
                fault_hz,
                impulse_amplitude: amp,
                noise_std: noise,
            }],
        }
    }

    fn peaks_above(m: &SignalMatrix, threshold: f64) -> usize {
        let x: Vec<f64> = m.column(0).collect();
        (1..x.len() - 1)
            .filter(|&i| x[i] > threshold && x[i] >= x[i - 1] && x[i] > x[i + 1])
            .count()
    }

    #[test]
    fn pure_sinusoid() {
        let m = &synth_generate(&single(0.0, 0.0, 0.0)).unwrap()[0];
        let peak = m.data().iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        assert!(peak <= 1.0 + 1e-12);
        // sampling can miss the crest by at most half a sample of phase
        let worst = (std::f64::consts::PI * 30.0 / 2048.0).cos();
        assert!(peak >= worst, "peak {peak}");
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = SynthSpec::default();
        assert_eq!(
            synth_generate(&spec).unwrap(),
            synth_generate(&spec).unwrap()
        );
        let mut other = spec.clone();
        other.seed += 1;
        assert_ne!(
            synth_generate(&spec).unwrap(),
            synth_generate(&other).unwrap()
        );
    }

    #[test]
    fn impulse_rate_is_recoverable() {
        for (fault, noise) in [(37.0, 0.0), (110.0, 0.0), (73.0, 0.05)] {
            let m = &synth_generate(&single(fault, 8.0, noise)).unwrap()[0];
            let per_second = peaks_above(m, 3.0) as f64 / 3.0;
            assert!(
                (per_second - fault).abs() <= 1.0,
                "{fault} Hz: counted {per_second}/s"
            );
        }
    }

    #[test]
    fn nyquist_rejected() {
        let mut spec = single(1024.0, 1.0, 0.0);
        assert!(matches!(synth_generate(&spec), Err(Error::Config(_))));
        spec.classes[0].fault_hz = 10.0;
        spec.classes[0].noise_std = -1.0;
        assert!(synth_generate(&spec).is_err());
    }

    #[test]
    fn default_sizes() {
        let spec = SynthSpec::default();
        let out = synth_generate(&spec).unwrap();
        assert_eq!(out.len(), 4);
        for m in &out {
            assert_eq!((m.rows(), m.cols()), (8192, 2));
        }
    }
}
