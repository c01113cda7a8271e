use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use susing_core::dsp::*;
use susing_core::Tensor;

fn tone(partials: &[(f64, f64)], secs: f64) -> AudioBuffer {
    let n = (secs * SAMPLE_RATE as f64) as usize;
    let sr = SAMPLE_RATE as f64;
    let s = (0..n)
        .map(|i| {
            partials
                .iter()
                .map(|&(f, a)| a * (2.0 * PI * f * i as f64 / sr).sin())
                .sum()
        })
        .collect();
    AudioBuffer::new(s, SAMPLE_RATE).unwrap()
}

fn noise(n: usize, seed: u64) -> AudioBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    AudioBuffer::new(
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        SAMPLE_RATE,
    )
    .unwrap()
}

/// Centered frame of the reflect-padded signal, Hann-windowed, by direct DFT.
fn dft_power_oracle(x: &[f64]) -> f64 {
    let n = 1024usize;
    let pad = n / 2;
    let len = x.len() as isize;
    let frames = 1 + x.len() / 256;
    let win: Vec<f64> = (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect();
    let mut total = 0.0;
    for t in 0..frames {
        let frame: Vec<f64> = (0..n)
            .map(|i| {
                let mut q = (t * 256 + i) as isize - pad as isize;
                if q < 0 {
                    q = -q;
                }
                if q >= len {
                    q = 2 * (len - 1) - q;
                }
                x[q as usize] * win[i]
            })
            .collect();
        for k in 0..=n / 2 {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, v) in frame.iter().enumerate() {
                let ang = -2.0 * PI * (k * i % n) as f64 / n as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            total += re * re + im * im;
        }
    }
    total
}

#[test]
fn stft_power_matches_direct_dft() {
    let a = noise(4000, 11);
    let s = stft(&a).unwrap();
    let ours = s.mags.sq_norm();
    let oracle = dft_power_oracle(&a.samples);
    assert!((ours - oracle).abs() / oracle < 1e-6, "{ours} vs {oracle}");
}

fn snr_db(a: &[f64], b: &[f64]) -> f64 {
    let sig: f64 = a.iter().map(|v| v * v).sum();
    let err: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    10.0 * (sig / err.max(1e-300)).log10()
}

#[test]
fn stft_round_trip_on_noise_exceeds_100_db() {
    let a = noise(22050, 5);
    let (m, p) = stft_with_phase(&a).unwrap();
    let b = istft(&m, &p, Some(a.len())).unwrap();
    let snr = snr_db(&a.samples, &b.samples);
    assert!(snr > 100.0, "{snr}");
}

#[test]
fn istft_shape_mismatch_is_rejected() {
    let m = Spectrogram::new(Tensor::zeros(&[513, 10])).unwrap();
    assert!(istft(&m, &Tensor::zeros(&[513, 9]), None).is_err());
}

#[test]
fn griffin_lim_converges_on_tone() {
    // 2 s, the length of a typical corpus utterance
    let s = stft(&tone(&[(440.0, 0.5)], 2.0)).unwrap();
    for seed in 0..3 {
        let out = griffin_lim(&s, 60, seed).unwrap();
        assert_eq!(out.convergence.len(), 61);
        let last = *out.convergence.last().unwrap();
        assert!(last <= 0.05, "seed {seed}: SC {last}");
        for w in out.convergence.windows(2) {
            assert!(w[1] <= w[0] + 1e-6, "{w:?}");
        }
        assert!((out.audio.peak() - 0.95).abs() < 1e-12);
    }
}

#[test]
fn plain_griffin_lim_from_random_phase_is_monotone() {
    let s = stft(&tone(&[(300.0, 0.4), (900.0, 0.1)], 0.5)).unwrap();
    let p = GriffinLimParams {
        iters: 20,
        seed: 4,
        init: PhaseInit::Random,
        momentum: 0.0,
    };
    let out = griffin_lim_with(&s, &p).unwrap();
    for w in out.convergence.windows(2) {
        assert!(w[1] <= w[0] + 1e-6, "{w:?}");
    }
    assert!(out.convergence[20] < out.convergence[0]);
}

#[test]
fn griffin_lim_is_monotone_on_noise_magnitudes() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mags = Tensor::from_fn(&[513, 40], |_| rng.random_range(0.0..1.0));
    let out = griffin_lim(&Spectrogram::new(mags).unwrap(), 30, 1).unwrap();
    for w in out.convergence.windows(2) {
        assert!(w[1] <= w[0] + 1e-6, "{w:?}");
    }
}

#[test]
fn griffin_lim_zero_mags_is_silence() {
    let s = Spectrogram::new(Tensor::zeros(&[513, 12])).unwrap();
    let out = griffin_lim(&s, 5, 3).unwrap();
    assert!(out.audio.samples.iter().all(|&v| v == 0.0));
}

#[test]
fn mel_matches_dense_oracle() {
    let cfg = MelConfig::default();
    let fb = mel_filterbank(&cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mags = Tensor::from_fn(&[513, 7], |_| rng.random_range(0.0..2.0));
    let s = Spectrogram::new(mags.clone()).unwrap();
    let ours = mel_spectrogram(&s, &cfg).unwrap();
    for m in 0..80 {
        for t in 0..7 {
            let mut acc = 0.0;
            for k in 0..513 {
                acc += fb.data()[m * 513 + k] * mags.data()[k * 7 + t];
            }
            assert!((ours.data()[m * 7 + t] - acc).abs() < 1e-10);
        }
    }
}

#[test]
fn yin_tracks_reference_tones() {
    for f in [220.0, 440.0, 880.0] {
        let tr = yin_f0(&tone(&[(f, 0.5)], 1.0), &YinParams::default()).unwrap();
        let med = tr.voiced_median().unwrap();
        assert!((med - f).abs() / f < 0.01, "{f}: {med}");
        let good = tr
            .f0_hz
            .iter()
            .filter(|&&x| (x - f).abs() / f < 0.01)
            .count();
        assert!(
            good as f64 >= 0.95 * tr.len() as f64,
            "{f}: {good}/{}",
            tr.len()
        );
    }
}

#[test]
fn yin_avoids_octave_error_with_third_harmonic() {
    let tr = yin_f0(
        &tone(&[(220.0, 0.5), (660.0, 0.15)], 1.0),
        &YinParams::default(),
    )
    .unwrap();
    let med = tr.voiced_median().unwrap();
    assert!((med - 220.0).abs() / 220.0 < 0.01, "{med}");
}

#[test]
fn yin_f0_and_voicing_agree() {
    let tr = yin_f0(&tone(&[(300.0, 0.5)], 0.5), &YinParams::default()).unwrap();
    for (f, v) in tr.f0_hz.iter().zip(&tr.voiced) {
        assert_eq!(*f > 0.0, *v);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn yin_median_within_one_percent(f in 100.0f64..1000.0) {
        let tr = yin_f0(&tone(&[(f, 0.4)], 0.4), &YinParams::default()).unwrap();
        let med = tr.voiced_median().unwrap();
        prop_assert!((med - f).abs() / f < 0.01, "{} -> {}", f, med);
    }

    #[test]
    fn vuv_is_gain_invariant(alpha in 0.01f64..50.0, seed in 0u64..100) {
        let mut a = tone(&[(330.0, 0.3)], 0.6);
        let n = noise(a.len(), seed);
        for (i, v) in a.samples.iter_mut().enumerate() {
            if i > 5000 && i < 8000 { *v = 0.0; }
            *v += 1e-4 * n.samples[i];
        }
        let b = AudioBuffer::new(a.samples.iter().map(|v| v * alpha).collect(), SAMPLE_RATE).unwrap();
        let p = VuvParams::default();
        prop_assert_eq!(vuv_detect(&a, &p).unwrap(), vuv_detect(&b, &p).unwrap());
    }

    #[test]
    fn mcd_is_symmetric_and_non_negative(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Tensor::from_fn(&[6, 13], |_| rng.random_range(-3.0..3.0));
        let b = Tensor::from_fn(&[4, 13], |_| rng.random_range(-3.0..3.0));
        let ab = mcd_from_cepstra(&a, &b).unwrap();
        let ba = mcd_from_cepstra(&b, &a).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert_eq!(mcd_from_cepstra(&a, &a).unwrap(), 0.0);
    }
}

#[test]
fn vuv_matches_constructed_mask() {
    let sr = SAMPLE_RATE as usize;
    let t = tone(&[(440.0, 0.5)], 1.0);
    let mut s = t.samples.clone();
    s.extend(std::iter::repeat(0.0).take(sr));
    s.extend_from_slice(&t.samples);
    let a = AudioBuffer::new(s, SAMPLE_RATE).unwrap();
    let mask = vuv_detect(&a, &VuvParams::default()).unwrap();
    let fr = frame_rate();
    let agree = mask
        .iter()
        .enumerate()
        .filter(|(i, &m)| {
            let c = *i as f64 / fr;
            let ideal = c < 1.0 || (2.0..3.0).contains(&c);
            ideal == m
        })
        .count();
    let ratio = agree as f64 / mask.len() as f64;
    assert!(ratio >= 0.99, "{ratio}");
}

#[test]
fn mcd_identity_and_closed_form() {
    let a = tone(&[(440.0, 0.5), (880.0, 0.1)], 0.5);
    assert_eq!(mcd_audio(&a, &a, &MelConfig::default()).unwrap(), 0.0);
    let z = Tensor::zeros(&[1, 13]);
    let mut one = Tensor::zeros(&[1, 13]);
    one.data_mut()[0] = 1.0;
    let d = mcd_from_cepstra(&z, &one).unwrap();
    assert!((d - (10.0 / std::f64::consts::LN_10) * 2f64.sqrt()).abs() < 1e-9);
}

#[test]
fn mcd_cepstra_use_orthonormal_dct() {
    // a constant log-mel spectrum has no energy in c1..c13
    let cfg = MelConfig::default();
    let s = Spectrogram::new(Tensor::zeros(&[513, 3])).unwrap();
    let c = mel_cepstrum(&s, &cfg).unwrap();
    assert_eq!(c.shape(), &[3, 13]);
    assert!(c.data().iter().all(|v| v.abs() < 1e-9));
}
