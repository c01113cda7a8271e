use std::f64::consts::{LN_10, PI};

use super::{log_mel, stft, AudioBuffer, MelConfig, Spectrogram};
use crate::error::{arg_err, dim_err, Result};
use crate::tensor::Tensor;

/// `10 / ln 10`, the dB scale factor of mel-cepstral distortion.
pub const MCD_SCALE: f64 = 10.0 / LN_10;

/// Mel cepstra `c1..cN` per frame, `(frames, cepstral_order)`, from an
/// orthonormal DCT-II of the log-mel spectrum.
pub fn mel_cepstrum(s: &Spectrogram, cfg: &MelConfig) -> Result<Tensor<f64>> {
    let lm = log_mel(s, cfg)?;
    let (n, frames) = (cfg.n_mels, s.n_frames());
    let order = cfg.cepstral_order;
    let basis: Vec<f64> = (1..=order)
        .flat_map(|k| {
            (0..n).map(move |i| {
                (2.0 / n as f64).sqrt()
                    * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos()
            })
        })
        .collect();
    let mut out = vec![0.0; frames * order];
    for t in 0..frames {
        for k in 0..order {
            let row = &basis[k * n..(k + 1) * n];
            out[t * order + k] = (0..n).map(|i| row[i] * lm.data()[i * frames + t]).sum();
        }
    }
    Tensor::new(&[frames, order], out)
}

/// Mean over frames of `(10/ln10) * sqrt(2 * sum_d (c_d - c'_d)^2)`, after
/// trimming both sequences to the shorter one.
pub fn mcd_from_cepstra(reference: &Tensor<f64>, synth: &Tensor<f64>) -> Result<f64> {
    reference.expect_rank(2, "reference cepstra")?;
    synth.expect_rank(2, "synthesized cepstra")?;
    let order = reference.dim(1);
    if synth.dim(1) != order {
        return dim_err(format!(
            "cepstral orders differ: {} vs {}",
            order,
            synth.dim(1)
        ));
    }
    let frames = reference.dim(0).min(synth.dim(0));
    if frames == 0 {
        return arg_err("mcd needs at least one frame in each input");
    }
    let total: f64 = (0..frames)
        .map(|t| {
            let a = &reference.data()[t * order..(t + 1) * order];
            let b = &synth.data()[t * order..(t + 1) * order];
            let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            MCD_SCALE * (2.0 * sq).sqrt()
        })
        .sum();
    Ok(total / frames as f64)
}

pub fn mcd(reference: &Spectrogram, synth: &Spectrogram, cfg: &MelConfig) -> Result<f64> {
    if reference.n_frames() == 0 || synth.n_frames() == 0 {
        return arg_err("mcd needs at least one frame in each input");
    }
    mcd_from_cepstra(&mel_cepstrum(reference, cfg)?, &mel_cepstrum(synth, cfg)?)
}

pub fn mcd_audio(reference: &AudioBuffer, synth: &AudioBuffer, cfg: &MelConfig) -> Result<f64> {
    mcd(&stft(reference)?, &stft(synth)?, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_coefficient_unit_difference() {
        let a = Tensor::new(&[1, 13], vec![0.0; 13]).unwrap();
        let mut bd = vec![0.0; 13];
        bd[4] = 1.0;
        let b = Tensor::new(&[1, 13], bd).unwrap();
        let d = mcd_from_cepstra(&a, &b).unwrap();
        assert!((d - MCD_SCALE * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn empty_input_is_rejected() {
        let a = Tensor::<f64>::zeros(&[0, 13]);
        let b = Tensor::zeros(&[3, 13]);
        assert!(matches!(
            mcd_from_cepstra(&a, &b),
            Err(crate::Error::Argument(_))
        ));
    }

    #[test]
    fn trims_to_shorter_sequence() {
        let a = Tensor::<f64>::zeros(&[2, 13]);
        let mut b = Tensor::<f64>::zeros(&[5, 13]);
        b.data_mut()[3 * 13] = 100.0;
        assert_eq!(mcd_from_cepstra(&a, &b).unwrap(), 0.0);
    }
}
