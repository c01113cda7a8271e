use serde::{Deserialize, Serialize};

use super::{Spectrogram, N_BINS, N_FFT, SAMPLE_RATE};
use crate::error::{arg_err, Result};
use crate::tensor::{Scalar, Tensor};

/// Floor applied before the natural log of mel energies.
pub const LOG_FLOOR: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MelConfig {
    pub n_mels: usize,
    pub fmin: f64,
    pub fmax: f64,
    /// Number of cepstral coefficients compared by MCD (c1..cN, c0 excluded).
    pub cepstral_order: usize,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            n_mels: 80,
            fmin: 0.0,
            fmax: 11_025.0,
            cepstral_order: 13,
        }
    }
}

impl MelConfig {
    pub fn validate(&self) -> Result<()> {
        let nyquist = SAMPLE_RATE as f64 / 2.0;
        if !(self.fmin >= 0.0 && self.fmin < self.fmax && self.fmax <= nyquist) {
            return arg_err(format!(
                "mel range [{}, {}] must satisfy 0 <= fmin < fmax <= {nyquist}",
                self.fmin, self.fmax
            ));
        }
        if self.n_mels == 0 || self.n_mels >= N_BINS {
            return arg_err(format!(
                "n_mels must be in 1..{N_BINS}, got {}",
                self.n_mels
            ));
        }
        if self.cepstral_order == 0 || self.cepstral_order >= self.n_mels {
            return arg_err(format!(
                "cepstral order {} must be in 1..{}",
                self.cepstral_order, self.n_mels
            ));
        }
        Ok(())
    }
}

// Slaney mel scale: linear below 1 kHz, logarithmic above.
const F_SP: f64 = 200.0 / 3.0;
const MIN_LOG_HZ: f64 = 1000.0;
const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;

fn logstep() -> f64 {
    6.4f64.ln() / 27.0
}

fn hz_to_mel(f: f64) -> f64 {
    if f < MIN_LOG_HZ {
        f / F_SP
    } else {
        MIN_LOG_MEL + (f / MIN_LOG_HZ).ln() / logstep()
    }
}

fn mel_to_hz(m: f64) -> f64 {
    if m < MIN_LOG_MEL {
        m * F_SP
    } else {
        MIN_LOG_HZ * (logstep() * (m - MIN_LOG_MEL)).exp()
    }
}

/// Triangular filterbank `(n_mels, bins)` with Slaney area normalization.
pub fn mel_filterbank(cfg: &MelConfig) -> Result<Tensor<f64>> {
    cfg.validate()?;
    let (lo, hi) = (hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax));
    let edges: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (cfg.n_mels + 1) as f64))
        .collect();
    let bin_hz = SAMPLE_RATE as f64 / N_FFT as f64;
    let mut fb = Tensor::zeros(&[cfg.n_mels, N_BINS]);
    for m in 0..cfg.n_mels {
        let (f0, f1, f2) = (edges[m], edges[m + 1], edges[m + 2]);
        let norm = 2.0 / (f2 - f0);
        let row = &mut fb.data_mut()[m * N_BINS..(m + 1) * N_BINS];
        for (k, w) in row.iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            let rising = (f - f0) / (f1 - f0);
            let falling = (f2 - f) / (f2 - f1);
            *w = rising.min(falling).max(0.0) * norm;
        }
    }
    Ok(fb)
}

/// Linear mel energies `(n_mels, frames)` of a magnitude spectrogram.
pub fn mel_spectrogram(s: &Spectrogram, cfg: &MelConfig) -> Result<Tensor<f64>> {
    let fb = mel_filterbank(cfg)?;
    let frames = s.n_frames();
    let mut out = vec![0.0; cfg.n_mels * frames];
    f64::gemm(
        cfg.n_mels,
        N_BINS,
        frames,
        fb.data(),
        false,
        s.mags.data(),
        false,
        &mut out,
        false,
    );
    Tensor::new(&[cfg.n_mels, frames], out)
}

/// `ln(max(mel, 1e-5))`.
pub fn log_mel(s: &Spectrogram, cfg: &MelConfig) -> Result<Tensor<f64>> {
    Ok(mel_spectrogram(s, cfg)?.map(|v| v.max(LOG_FLOOR).ln()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_scale_round_trips() {
        for f in [0.0, 440.0, 999.0, 1000.0, 5000.0, 11025.0] {
            assert!((mel_to_hz(hz_to_mel(f)) - f).abs() < 1e-9);
        }
    }

    #[test]
    fn every_filter_has_positive_mass() {
        let fb = mel_filterbank(&MelConfig::default()).unwrap();
        for row in fb.data().chunks(N_BINS) {
            assert!(row.iter().sum::<f64>() > 0.0);
        }
    }

    #[test]
    fn single_bin_touches_at_most_two_bands() {
        let fb = mel_filterbank(&MelConfig::default()).unwrap();
        for k in 0..N_BINS {
            let active = (0..80).filter(|&m| fb.data()[m * N_BINS + k] > 0.0).count();
            assert!(active <= 2, "bin {k} in {active} bands");
        }
    }

    #[test]
    fn zero_spectrogram_hits_log_floor() {
        let s = Spectrogram::new(Tensor::zeros(&[N_BINS, 4])).unwrap();
        let lm = log_mel(&s, &MelConfig::default()).unwrap();
        assert!(lm.data().iter().all(|&v| v == LOG_FLOOR.ln()));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = MelConfig::default();
        c.fmax = 20_000.0;
        assert!(c.validate().is_err());
        let mut c = MelConfig::default();
        c.n_mels = 600;
        assert!(c.validate().is_err());
    }
}
