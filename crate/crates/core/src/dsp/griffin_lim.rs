use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use super::{AudioBuffer, Spectrogram, StftEngine, StftParams, SAMPLE_RATE};
use crate::error::{arg_err, Result};

pub const PEAK_LEVEL: f64 = 0.95;

const TINY: f64 = 1e-300;
const ROTATIONS: usize = 16;

#[derive(Clone, Debug)]
pub struct GriffinLimOutput {
    pub audio: AudioBuffer,
    /// Spectral convergence after the random-phase inversion (index 0) and
    /// after every iteration.
    pub convergence: Vec<f64>,
}

/// `|| |X| - target ||_F / ||target||_F` over the two-sided spectrum: the
/// one-sided interior bins count twice, DC and Nyquist once.
pub fn spectral_convergence(
    estimate: &[Complex64],
    target: &[f64],
    bins: usize,
    frames: usize,
) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..bins {
        let weight = if k == 0 || k == bins - 1 { 1.0 } else { 2.0 };
        for t in 0..frames {
            let idx = k * frames + t;
            let d = estimate[idx].norm() - target[idx];
            num += weight * d * d;
            den += weight * target[idx] * target[idx];
        }
    }
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (num / den).sqrt()
    }
}

/// How the phase is initialized before iterating.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PhaseInit {
    /// Independent uniform phase per bin and frame.
    Random,
    /// Seeded uniform phase per bin, then advanced frame to frame at the
    /// interpolated frequency of the spectral peak each bin belongs to, with
    /// all bins of a peak locked to it. Avoids the phase slips that trap
    /// iterations started from independent random phases.
    #[default]
    PeakLocked,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GriffinLimParams {
    pub iters: usize,
    pub seed: u64,
    pub init: PhaseInit,
    /// Extrapolation weight of the accelerated update; 0 gives the plain
    /// alternating projection.
    pub momentum: f64,
}

impl Default for GriffinLimParams {
    fn default() -> Self {
        Self {
            iters: 60,
            seed: 0,
            init: PhaseInit::default(),
            momentum: 0.99,
        }
    }
}

/// Griffin-Lim with default initialization and momentum.
pub fn griffin_lim(mags: &Spectrogram, iters: usize, seed: u64) -> Result<GriffinLimOutput> {
    griffin_lim_with(
        mags,
        &GriffinLimParams {
            iters,
            seed,
            ..Default::default()
        },
    )
}

/// Alternating projection between consistent spectrograms and the target
/// magnitudes.
///
/// Each iteration first tries the accelerated step (projection of the
/// extrapolated spectrogram). If that would raise the spectral convergence,
/// the plain projection step is taken instead, which never does, so the
/// convergence sequence is non-increasing.
///
/// With `iters == 0` the result is the inversion of the initial phase. The
/// returned audio has `(frames - 1) * hop` samples and is peak-normalized to
/// 0.95 unless silent.
pub fn griffin_lim_with(mags: &Spectrogram, p: &GriffinLimParams) -> Result<GriffinLimOutput> {
    if let Some(v) = mags.mags.data().iter().find(|v| !(**v >= 0.0)) {
        return arg_err(format!("griffin_lim: negative magnitude {v}"));
    }
    if !(0.0..2.0).contains(&p.momentum) {
        return arg_err(format!(
            "griffin_lim: momentum {} outside [0, 2)",
            p.momentum
        ));
    }
    let engine = StftEngine::new(StftParams::default());
    let bins = mags.n_bins();
    let frames = mags.n_frames();
    let len = (frames.max(1) - 1) * engine.params().hop;
    let target = mags.mags.data();

    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let phase = match p.init {
        PhaseInit::Random => (0..target.len())
            .map(|_| rng.random_range(0.0..2.0 * PI))
            .collect(),
        PhaseInit::PeakLocked => {
            let start = (0..bins).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
            let sp = engine.params();
            peak_locked_phase(target, bins, frames, sp.n_fft, sp.hop, start)
        }
    };
    let polar = |offset: f64| -> Vec<Complex64> {
        target
            .iter()
            .zip(&phase)
            .map(|(&m, &p)| Complex64::from_polar(m, p + offset))
            .collect()
    };
    // A common rotation of all phases leaves interior frames consistent but
    // not the reflection-padded edge frames, and iterating rotates phase
    // very slowly, so the starting rotation is picked from a small grid.
    let mut init = polar(0.0);
    if p.init == PhaseInit::PeakLocked {
        let mut best = f64::INFINITY;
        for r in 0..ROTATIONS {
            let cand = polar(2.0 * PI * r as f64 / ROTATIONS as f64);
            let est = engine.analyze(&engine.synthesize(&cand, frames, len)?)?;
            let sc = spectral_convergence(&est, target, bins, frames);
            if sc < best {
                best = sc;
                init = cand;
            }
        }
    }

    let project = |c: &[Complex64]| -> Vec<Complex64> {
        c.iter()
            .zip(target)
            .map(|(e, &m)| {
                let norm = e.norm();
                if norm > 0.0 {
                    e * (m / norm)
                } else {
                    Complex64::new(m, 0.0)
                }
            })
            .collect()
    };

    let mut signal = engine.synthesize(&init, frames, len)?;
    let mut current = engine.analyze(&signal)?;
    let mut sc = spectral_convergence(&current, target, bins, frames);
    let mut convergence = Vec::with_capacity(p.iters + 1);
    convergence.push(sc);
    let mut extrapolated = current.clone();
    for _ in 0..p.iters {
        let mut next_signal = engine.synthesize(&project(&extrapolated), frames, len)?;
        let mut next = engine.analyze(&next_signal)?;
        let mut next_sc = spectral_convergence(&next, target, bins, frames);
        if next_sc > sc && p.momentum > 0.0 {
            next_signal = engine.synthesize(&project(&current), frames, len)?;
            next = engine.analyze(&next_signal)?;
            next_sc = spectral_convergence(&next, target, bins, frames);
        }
        extrapolated = next
            .iter()
            .zip(&current)
            .map(|(n, c)| n + (n - c) * p.momentum)
            .collect();
        signal = next_signal;
        current = next;
        sc = next_sc;
        convergence.push(sc);
    }

    let peak = signal.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        let g = PEAK_LEVEL / peak;
        signal.iter_mut().for_each(|v| *v *= g);
    }
    Ok(GriffinLimOutput {
        audio: AudioBuffer::new(signal, SAMPLE_RATE)?,
        convergence,
    })
}

/// Phase for `(bins, frames)` magnitudes from per-bin starting phases.
///
/// A sinusoid of frequency `w` (rad/sample) shows up in bin `k` of a
/// frame-start-referenced STFT with phase `w * t * hop + theta - pi * k`
/// across its main lobe. Each frame's peaks are located by parabolic
/// interpolation; the running phase `theta` of every bin in a peak's basin
/// is set to the peak's advanced phase.
fn peak_locked_phase(
    mags: &[f64],
    bins: usize,
    frames: usize,
    n_fft: usize,
    hop: usize,
    mut acc: Vec<f64>,
) -> Vec<f64> {
    let mut out = vec![0.0; bins * frames];
    let mut col = vec![0.0; bins];
    let mut next = acc.clone();
    for t in 0..frames {
        for k in 0..bins {
            col[k] = mags[k * frames + t];
        }
        next.copy_from_slice(&acc);
        for k in 1..bins - 1 {
            if !(col[k] > col[k - 1] && col[k] >= col[k + 1]) {
                continue;
            }
            // parabola through log magnitudes: nearly unbiased for Hann lobes
            let (a, b, c) = (
                col[k - 1].max(TINY).ln(),
                col[k].ln(),
                col[k + 1].max(TINY).ln(),
            );
            let denom = a - 2.0 * b + c;
            let p = if denom < 0.0 {
                (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
            } else {
                0.0
            };
            let w = 2.0 * PI * (k as f64 + p) / n_fft as f64;
            let theta = (acc[k] + w * hop as f64).rem_euclid(2.0 * PI);
            next[k] = theta;
            let mut j = k;
            while j > 0 && col[j - 1] < col[j] {
                j -= 1;
                next[j] = theta;
            }
            let mut j = k;
            while j + 1 < bins && col[j + 1] < col[j] {
                j += 1;
                next[j] = theta;
            }
        }
        std::mem::swap(&mut acc, &mut next);
        for k in 0..bins {
            out[k * frames + t] = acc[k] - PI * k as f64;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn zero_magnitudes_give_silence() {
        let mags = Spectrogram::new(Tensor::zeros(&[513, 12])).unwrap();
        let out = griffin_lim(&mags, 5, 1).unwrap();
        assert!(out.audio.samples.iter().all(|&v| v == 0.0));
        assert!(out.convergence.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn zero_iterations_is_random_phase_inversion() {
        let mags = Spectrogram::new(Tensor::full(&[513, 12], 1.0)).unwrap();
        let p = GriffinLimParams {
            iters: 0,
            seed: 1,
            init: PhaseInit::Random,
            momentum: 0.0,
        };
        let out = griffin_lim_with(&mags, &p).unwrap();
        assert_eq!(out.convergence.len(), 1);
        assert!((out.audio.peak() - PEAK_LEVEL).abs() < 1e-12);
    }

    #[test]
    fn seed_determines_output() {
        let mags = Spectrogram::new(Tensor::from_fn(&[513, 10], |i| (i % 7) as f64)).unwrap();
        let a = griffin_lim(&mags, 3, 9).unwrap();
        let b = griffin_lim(&mags, 3, 9).unwrap();
        let c = griffin_lim(&mags, 3, 10).unwrap();
        assert_eq!(a.audio, b.audio);
        assert_ne!(a.audio, c.audio);
    }
}
