//! YIN fundamental-frequency estimation on the centered hop grid.

use super::{AudioBuffer, HOP};
use crate::error::{arg_err, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct YinParams {
    pub fmin: f64,
    pub fmax: f64,
    pub threshold: f64,
    /// Analysis frame; the difference function integrates over its first half.
    pub frame_length: usize,
    pub hop: usize,
}

impl Default for YinParams {
    fn default() -> Self {
        Self {
            fmin: 60.0,
            fmax: 1200.0,
            threshold: 0.15,
            frame_length: 2048,
            hop: HOP,
        }
    }
}

/// Per-frame F0 in Hz, zero where unvoiced.
#[derive(Clone, Debug, PartialEq)]
pub struct F0Track {
    pub f0_hz: Vec<f64>,
    pub voiced: Vec<bool>,
}

impl F0Track {
    pub fn len(&self) -> usize {
        self.f0_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f0_hz.is_empty()
    }

    /// Median F0 over voiced frames.
    pub fn voiced_median(&self) -> Option<f64> {
        let mut v: Vec<f64> = self.f0_hz.iter().copied().filter(|&f| f > 0.0).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(|a, b| a.total_cmp(b));
        let n = v.len();
        Some(if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        })
    }
}

pub fn yin_f0(a: &AudioBuffer, p: &YinParams) -> Result<F0Track> {
    if !(p.fmin > 0.0 && p.fmin < p.fmax) {
        return arg_err(format!(
            "yin: need 0 < fmin < fmax, got {} and {}",
            p.fmin, p.fmax
        ));
    }
    if !(p.threshold > 0.0) || p.hop == 0 {
        return arg_err("yin: threshold and hop must be positive");
    }
    let sr = a.sample_rate as f64;
    let tau_max = (sr / p.fmin).ceil() as usize;
    let tau_min = ((sr / p.fmax).floor() as usize).max(2);
    let window = p.frame_length / 2;
    if p.frame_length < 2 * tau_max || tau_max + window > p.frame_length {
        return arg_err(format!(
            "yin: frame of {} samples does not cover two periods of {} Hz",
            p.frame_length, p.fmin
        ));
    }
    if a.is_empty() {
        return arg_err("yin of empty audio");
    }

    let frames = 1 + a.len() / p.hop;
    let half = p.frame_length as isize / 2;
    let mut buf = vec![0.0; p.frame_length];
    let mut diff = vec![0.0; tau_max + 2];
    let mut cmnd = vec![1.0; tau_max + 2];
    let mut track = F0Track {
        f0_hz: vec![0.0; frames],
        voiced: vec![false; frames],
    };
    for t in 0..frames {
        let start = (t * p.hop) as isize - half;
        for (i, b) in buf.iter_mut().enumerate() {
            let idx = start + i as isize;
            *b = if idx >= 0 && (idx as usize) < a.len() {
                a.samples[idx as usize]
            } else {
                0.0
            };
        }
        // difference function d(tau) for tau = 1..=tau_max+1
        for tau in 1..=tau_max + 1 {
            let mut s = 0.0;
            for j in 0..window {
                let d = buf[j] - buf[j + tau];
                s += d * d;
            }
            diff[tau] = s;
        }
        // cumulative mean normalized difference
        let mut running = 0.0;
        for tau in 1..=tau_max + 1 {
            running += diff[tau];
            cmnd[tau] = if running > 0.0 {
                diff[tau] * tau as f64 / running
            } else {
                1.0
            };
        }
        let mut pick = None;
        let mut tau = tau_min;
        while tau <= tau_max {
            if cmnd[tau] < p.threshold {
                while tau < tau_max && cmnd[tau + 1] < cmnd[tau] {
                    tau += 1;
                }
                pick = Some(tau);
                break;
            }
            tau += 1;
        }
        if let Some(tau) = pick {
            let (l, c, r) = (cmnd[tau - 1], cmnd[tau], cmnd[tau + 1]);
            let denom = l - 2.0 * c + r;
            let shift = if denom.abs() > 1e-12 {
                (0.5 * (l - r) / denom).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            let f0 = sr / (tau as f64 + shift);
            if f0 >= p.fmin && f0 <= p.fmax {
                track.f0_hz[t] = f0;
                track.voiced[t] = true;
            }
        }
    }
    Ok(track)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::SAMPLE_RATE;
    use std::f64::consts::PI;

    #[test]
    fn silence_is_unvoiced() {
        let tr = yin_f0(&AudioBuffer::silence(8000), &YinParams::default()).unwrap();
        assert!(tr.voiced.iter().all(|v| !v));
        assert!(tr.f0_hz.iter().all(|&f| f == 0.0));
    }

    #[test]
    fn bad_range_is_rejected() {
        let p = YinParams {
            fmin: 500.0,
            fmax: 400.0,
            ..Default::default()
        };
        assert!(yin_f0(&AudioBuffer::silence(4000), &p).is_err());
    }

    #[test]
    fn tone_is_tracked() {
        let n = SAMPLE_RATE as usize;
        let s = (0..n)
            .map(|i| 0.5 * (2.0 * PI * 440.0 * i as f64 / SAMPLE_RATE as f64).sin())
            .collect();
        let tr = yin_f0(
            &AudioBuffer::new(s, SAMPLE_RATE).unwrap(),
            &YinParams::default(),
        )
        .unwrap();
        let med = tr.voiced_median().unwrap();
        assert!((med - 440.0).abs() / 440.0 < 0.01, "{med}");
    }
}
