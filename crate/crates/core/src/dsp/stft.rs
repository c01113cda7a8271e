//! Centered STFT with reflection padding and its least-squares inverse.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{AudioBuffer, Spectrogram, HOP, N_FFT, SAMPLE_RATE};
use crate::error::{arg_err, dim_err, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StftParams {
    pub n_fft: usize,
    pub hop: usize,
}

impl Default for StftParams {
    fn default() -> Self {
        Self {
            n_fft: N_FFT,
            hop: HOP,
        }
    }
}

/// Reusable FFT plans and analysis window for one [`StftParams`].
pub struct StftEngine {
    params: StftParams,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl StftEngine {
    pub fn new(params: StftParams) -> Self {
        let n = params.n_fft;
        let mut planner = FftPlanner::new();
        // periodic Hann
        let window = (0..n)
            .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
            .collect();
        Self {
            params,
            window,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn params(&self) -> StftParams {
        self.params
    }

    pub fn bins(&self) -> usize {
        self.params.n_fft / 2 + 1
    }

    pub fn n_frames(&self, len: usize) -> usize {
        1 + len / self.params.hop
    }

    /// Complex one-sided STFT as `(bins, frames)` row-major.
    pub fn analyze(&self, samples: &[f64]) -> Result<Vec<Complex64>> {
        let n = self.params.n_fft;
        let pad = n / 2;
        if samples.is_empty() {
            return arg_err("stft of empty audio");
        }
        if samples.len() < n {
            return arg_err(format!(
                "stft needs at least {n} samples, got {}",
                samples.len()
            ));
        }
        let len = samples.len();
        let frames = self.n_frames(len);
        let bins = self.bins();
        let mut out = vec![Complex64::default(); bins * frames];
        let mut buf = vec![Complex64::default(); n];
        let mut scratch = vec![Complex64::default(); self.forward.get_inplace_scratch_len()];
        for t in 0..frames {
            let start = t * self.params.hop;
            for (i, b) in buf.iter_mut().enumerate() {
                let v = samples[reflect(start + i, pad, len)];
                *b = Complex64::new(v * self.window[i], 0.0);
            }
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            for k in 0..bins {
                out[k * frames + t] = buf[k];
            }
        }
        Ok(out)
    }

    /// Least-squares signal estimate of length `len` from one-sided complex
    /// frames laid out `(bins, frames)`.
    ///
    /// Windowed overlap-add is divided by the summed squared window, with the
    /// reflected padding folded back onto the samples it was copied from, so
    /// the result is the exact minimizer of `||STFT(x) - spec||`.
    pub fn synthesize(&self, spec: &[Complex64], frames: usize, len: usize) -> Result<Vec<f64>> {
        let n = self.params.n_fft;
        let pad = n / 2;
        let bins = self.bins();
        if spec.len() != bins * frames {
            return dim_err(format!(
                "istft: {} coefficients for {bins} bins x {frames} frames",
                spec.len()
            ));
        }
        if len < n || self.n_frames(len) != frames {
            return dim_err(format!(
                "istft: length {len} is inconsistent with {frames} frames"
            ));
        }
        let mut num = vec![0.0; len];
        let mut den = vec![0.0; len];
        let mut buf = vec![Complex64::default(); n];
        let mut scratch = vec![Complex64::default(); self.inverse.get_inplace_scratch_len()];
        let scale = 1.0 / n as f64;
        for t in 0..frames {
            for k in 0..bins {
                buf[k] = spec[k * frames + t];
            }
            buf[0].im = 0.0;
            if n % 2 == 0 {
                buf[n / 2].im = 0.0;
            }
            for k in 1..n - bins + 1 {
                buf[n - k] = buf[k].conj();
            }
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            let start = t * self.params.hop;
            for i in 0..n {
                let src = reflect(start + i, pad, len);
                let w = self.window[i];
                num[src] += w * buf[i].re * scale;
                den[src] += w * w;
            }
        }
        Ok(num
            .iter()
            .zip(&den)
            .map(|(&a, &d)| if d > 1e-10 { a / d } else { 0.0 })
            .collect())
    }
}

/// Maps an index of the padded signal onto the source sample it mirrors.
fn reflect(padded_idx: usize, pad: usize, len: usize) -> usize {
    let q = padded_idx as isize - pad as isize;
    let n = len as isize;
    let r = if q < 0 {
        -q
    } else if q >= n {
        2 * (n - 1) - q
    } else {
        q
    };
    r as usize
}

fn to_polar(spec: &[Complex64], bins: usize, frames: usize) -> Result<(Tensor<f64>, Tensor<f64>)> {
    let mags = Tensor::new(&[bins, frames], spec.iter().map(|c| c.norm()).collect())?;
    let phase = Tensor::new(&[bins, frames], spec.iter().map(|c| c.arg()).collect())?;
    Ok((mags, phase))
}

/// Magnitude and phase of the centered STFT (`n_fft` 1024, hop 256, Hann).
pub fn stft_with_phase(a: &AudioBuffer) -> Result<(Spectrogram, Tensor<f64>)> {
    let engine = StftEngine::new(StftParams::default());
    let spec = engine.analyze(&a.samples)?;
    let frames = engine.n_frames(a.len());
    let (mags, phase) = to_polar(&spec, engine.bins(), frames)?;
    Ok((Spectrogram { mags }, phase))
}

pub fn stft(a: &AudioBuffer) -> Result<Spectrogram> {
    Ok(stft_with_phase(a)?.0)
}

/// Inverse STFT from magnitudes and per-bin phases. `len` defaults to
/// `(frames - 1) * hop`, the shortest signal with that many frames.
pub fn istft(mags: &Spectrogram, phase: &Tensor<f64>, len: Option<usize>) -> Result<AudioBuffer> {
    if mags.mags.shape() != phase.shape() {
        return dim_err(format!(
            "istft: magnitudes {:?} vs phase {:?}",
            mags.mags.shape(),
            phase.shape()
        ));
    }
    let engine = StftEngine::new(StftParams::default());
    let frames = mags.n_frames();
    let len = len.unwrap_or((frames.max(1) - 1) * HOP);
    let spec: Vec<Complex64> = mags
        .mags
        .data()
        .iter()
        .zip(phase.data())
        .map(|(&m, &p)| Complex64::from_polar(m, p))
        .collect();
    let samples = engine.synthesize(&spec, frames, len)?;
    AudioBuffer::new(samples, SAMPLE_RATE)
}
