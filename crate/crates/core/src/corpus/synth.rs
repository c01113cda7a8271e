use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::{AudioBuffer, SAMPLE_RATE};
use crate::error::{arg_err, Result};
use crate::score::{midi_to_hz, NoteEvent, PhonemeEvent, PhonemeInventory};

/// Harmonic stand-in for a singer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyVoiceConfig {
    pub n_harmonics: usize,
    /// Tokens rendered as band-passed noise instead of harmonics.
    pub unvoiced_phonemes: Vec<String>,
    pub attack_sec: f64,
    pub release_sec: f64,
    /// Amplitude of the fundamental; harmonic `k` gets `amplitude / k`.
    pub amplitude: f64,
    /// RMS of the unvoiced noise.
    pub noise_rms: f64,
    pub seed: u64,
}

impl Default for ToyVoiceConfig {
    fn default() -> Self {
        Self {
            n_harmonics: 10,
            unvoiced_phonemes: [
                "k", "s", "t", "h", "p", "ch", "ts", "sh", "f", "ky", "hy", "py",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            attack_sec: 0.01,
            release_sec: 0.01,
            amplitude: 0.1,
            noise_rms: 0.02,
            seed: 0,
        }
    }
}

impl ToyVoiceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_harmonics == 0 {
            return arg_err("n_harmonics must be at least 1");
        }
        if !(self.attack_sec >= 0.0 && self.release_sec >= 0.0) {
            return arg_err("ramp durations must be non-negative");
        }
        if !(self.amplitude > 0.0 && self.noise_rms >= 0.0) {
            return arg_err("amplitude must be positive and noise_rms non-negative");
        }
        let peak = self.amplitude * (1..=self.n_harmonics).map(|k| 1.0 / k as f64).sum::<f64>();
        if peak > 1.0 {
            return arg_err(format!("harmonic sum peaks at {peak:.3} and would clip"));
        }
        Ok(())
    }
}

/// RBJ band-pass biquad (constant 0 dB peak gain).
struct BandPass {
    b: [f64; 3],
    a: [f64; 2],
    x: [f64; 2],
    y: [f64; 2],
}

impl BandPass {
    fn new(center_hz: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * center_hz / SAMPLE_RATE as f64;
        let alpha = w0.sin() / (2.0 * q);
        let a0 = 1.0 + alpha;
        Self {
            b: [alpha / a0, 0.0, -alpha / a0],
            a: [-2.0 * w0.cos() / a0, (1.0 - alpha) / a0],
            x: [0.0; 2],
            y: [0.0; 2],
        }
    }

    fn tick(&mut self, v: f64) -> f64 {
        let out = self.b[0] * v + self.b[1] * self.x[0] + self.b[2] * self.x[1]
            - self.a[0] * self.y[0]
            - self.a[1] * self.y[1];
        self.x = [v, self.x[0]];
        self.y = [out, self.y[0]];
        out
    }
}

/// RMS gain of the band-pass on unit white noise: the square root of its
/// impulse-response energy.
fn noise_gain(center_hz: f64, q: f64) -> f64 {
    let mut f = BandPass::new(center_hz, q);
    let mut e = 0.0;
    for n in 0..20_000 {
        let h = f.tick(if n == 0 { 1.0 } else { 0.0 });
        e += h * h;
    }
    e.sqrt()
}

const NOISE_CENTER_HZ: f64 = 4000.0;
const NOISE_Q: f64 = 0.7;

/// Renders aligned note and phoneme events.
///
/// Voiced phonemes over pitched notes sound `sum_k (A / k) sin(k phi)`,
/// with `phi` advancing at the active note's frequency so phase is
/// continuous across note changes; harmonics at or above Nyquist are
/// dropped. Unvoiced phonemes sound seeded band-passed noise. Rests and
/// `SIL` are silent. Every phoneme gets linear attack and release ramps.
pub fn toy_synth_utterance(
    notes: &[NoteEvent],
    phonemes: &[PhonemeEvent],
    inv: &PhonemeInventory,
    cfg: &ToyVoiceConfig,
) -> Result<AudioBuffer> {
    cfg.validate()?;
    let ramps = cfg.attack_sec + cfg.release_sec;
    if let Some(p) = phonemes
        .iter()
        .find(|p| p.phoneme != 0 && p.offset_sec - p.onset_sec < ramps)
    {
        return arg_err(format!(
            "phoneme at {:.3} s lasts {:.3} s, shorter than its ramps ({ramps} s)",
            p.onset_sec,
            p.offset_sec - p.onset_sec
        ));
    }
    let sr = SAMPLE_RATE as f64;
    let end = notes
        .iter()
        .map(|n| n.offset_sec)
        .chain(phonemes.iter().map(|p| p.offset_sec))
        .fold(0.0f64, f64::max);
    let len = (end * sr).round() as usize;
    let unvoiced: Vec<bool> = (0..inv.len())
        .map(|id| {
            inv.token(id)
                .is_some_and(|t| cfg.unvoiced_phonemes.iter().any(|u| u == t))
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut bp = BandPass::new(NOISE_CENTER_HZ, NOISE_Q);
    let noise_scale = cfg.noise_rms / noise_gain(NOISE_CENTER_HZ, NOISE_Q);
    let mut out = vec![0.0; len];
    let mut phi = 0.0f64;
    let (mut ni, mut pi) = (0, 0);
    for (n, sample) in out.iter_mut().enumerate() {
        let t = n as f64 / sr;
        while ni < notes.len() && notes[ni].offset_sec <= t {
            ni += 1;
        }
        while pi < phonemes.len() && phonemes[pi].offset_sec <= t {
            pi += 1;
        }
        // the noise filter runs continuously so its state stays seeded
        let noise = bp.tick(rng.sample::<f64, _>(rand_distr::StandardNormal));
        let note = notes.get(ni).filter(|x| x.onset_sec <= t);
        let ph = phonemes.get(pi).filter(|x| x.onset_sec <= t);
        let f0 = note.and_then(|x| x.midi).map(midi_to_hz);
        if let Some(f) = f0 {
            phi = (phi + 2.0 * PI * f / sr) % (2.0 * PI);
        }
        let Some(ph) = ph.filter(|p| p.phoneme != 0) else {
            continue;
        };
        let env = {
            let up = if cfg.attack_sec > 0.0 {
                ((t - ph.onset_sec) / cfg.attack_sec).min(1.0)
            } else {
                1.0
            };
            let down = if cfg.release_sec > 0.0 {
                ((ph.offset_sec - t) / cfg.release_sec).min(1.0)
            } else {
                1.0
            };
            up.min(down).max(0.0)
        };
        if unvoiced.get(ph.phoneme).copied().unwrap_or(false) {
            *sample = env * noise * noise_scale;
        } else if let Some(f) = f0 {
            let mut v = 0.0;
            for k in 1..=cfg.n_harmonics {
                if k as f64 * f >= sr / 2.0 {
                    break;
                }
                v += (k as f64 * phi).sin() / k as f64;
            }
            *sample = env * cfg.amplitude * v;
        }
    }
    AudioBuffer::new(out, SAMPLE_RATE)
}
