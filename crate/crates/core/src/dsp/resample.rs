//! Band-limited resampling with a Kaiser-windowed sinc kernel.

use std::f64::consts::PI;

use crate::error::{arg_err, Result};

/// Half-width of the kernel, in samples at the lower of the two rates.
const HALF_TAPS: f64 = 32.0;
const KAISER_BETA: f64 = 8.6;

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..64 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Resamples `x` from `from` Hz to `to` Hz. The output holds
/// `round(len * to / from)` samples.
pub fn resample(x: &[f64], from: u32, to: u32) -> Result<Vec<f64>> {
    if from == 0 || to == 0 {
        return arg_err("resample: sample rates must be positive");
    }
    if from == to {
        return Ok(x.to_vec());
    }
    let ratio = to as f64 / from as f64;
    let cutoff = ratio.min(1.0);
    // kernel half-width in input samples
    let half = HALF_TAPS / cutoff;
    let norm = bessel_i0(KAISER_BETA);
    let out_len = (x.len() as f64 * ratio).round() as usize;
    let mut out = Vec::with_capacity(out_len);
    for i in 0..out_len {
        let t = i as f64 / ratio;
        let lo = (t - half).ceil().max(0.0) as usize;
        let hi = ((t + half).floor() as usize).min(x.len().saturating_sub(1));
        let mut acc = 0.0;
        for (j, &v) in x.iter().enumerate().take(hi + 1).skip(lo) {
            let d = t - j as f64;
            let r = d / half;
            let w = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / norm;
            acc += v * cutoff * sinc(cutoff * d) * w;
        }
        out.push(acc);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_rate_is_copy() {
        let x = vec![0.1, -0.2, 0.3];
        assert_eq!(resample(&x, 22050, 22050).unwrap(), x);
    }

    #[test]
    fn tone_survives_downsampling() {
        let (from, to) = (44100u32, 22050u32);
        let x: Vec<f64> = (0..44100)
            .map(|i| (2.0 * PI * 440.0 * i as f64 / from as f64).sin())
            .collect();
        let y = resample(&x, from, to).unwrap();
        assert_eq!(y.len(), 22050);
        let err = (2000..20000)
            .map(|i| (y[i] - (2.0 * PI * 440.0 * i as f64 / to as f64).sin()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn zero_rate_is_rejected() {
        assert!(resample(&[0.0], 0, 22050).is_err());
    }
}
