//! Signal processing: STFT, Griffin-Lim, mel filterbank, YIN pitch tracking,
//! energy-based voicing, mel-cepstral distortion and WAV I/O.

mod griffin_lim;
mod mcd;
mod mel;
mod resample;
mod stft;
mod vuv;
mod wav;
mod yin;

pub use griffin_lim::{
    griffin_lim, griffin_lim_with, spectral_convergence, GriffinLimOutput, GriffinLimParams,
    PhaseInit, PEAK_LEVEL,
};
pub use mcd::{mcd, mcd_audio, mcd_from_cepstra, mel_cepstrum, MCD_SCALE};
pub use mel::{log_mel, mel_filterbank, mel_spectrogram, MelConfig, LOG_FLOOR};
pub use resample::resample;
pub use stft::{istft, stft, stft_with_phase, StftEngine, StftParams};
pub use vuv::{median_smooth, vuv_detect, VuvParams};
pub use wav::{read_wav, write_wav};
pub use yin::{yin_f0, F0Track, YinParams};

use crate::error::{arg_err, Result};
use crate::tensor::Tensor;

pub const SAMPLE_RATE: u32 = 22_050;
pub const N_FFT: usize = 1024;
pub const HOP: usize = 256;
pub const N_BINS: usize = N_FFT / 2 + 1;

/// Frames per second of the analysis grid.
pub fn frame_rate() -> f64 {
    SAMPLE_RATE as f64 / HOP as f64
}

/// Mono audio.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return arg_err("sample rate must be positive");
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return arg_err(format!("sample {i} is not finite"));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn silence(len: usize) -> Self {
        Self {
            samples: vec![0.0; len],
            sample_rate: SAMPLE_RATE,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Number of analysis frames on the centered hop grid.
    pub fn n_frames(&self) -> usize {
        1 + self.samples.len() / HOP
    }
}

/// Linear magnitude spectrogram, `(bins, frames)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrogram {
    pub mags: Tensor<f64>,
}

impl Spectrogram {
    pub fn new(mags: Tensor<f64>) -> Result<Self> {
        mags.expect_rank(2, "spectrogram")?;
        if mags.dim(0) != N_BINS {
            return crate::error::dim_err(format!(
                "spectrogram has {} bins, expected {N_BINS}",
                mags.dim(0)
            ));
        }
        if let Some(v) = mags.data().iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return arg_err(format!(
                "spectrogram magnitude {v} is not a finite non-negative value"
            ));
        }
        Ok(Self { mags })
    }

    pub fn n_frames(&self) -> usize {
        self.mags.dim(1)
    }

    pub fn n_bins(&self) -> usize {
        self.mags.dim(0)
    }

    /// Copies frames `[start, end)`.
    pub fn slice_frames(&self, start: usize, end: usize) -> Tensor<f64> {
        let t = self.n_frames();
        let bins = self.n_bins();
        let len = end - start;
        Tensor::from_fn(&[bins, len], |i| {
            self.mags.data()[(i / len) * t + start + i % len]
        })
    }
}
