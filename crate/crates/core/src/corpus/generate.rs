use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{toy_synth_utterance, ToyVoiceConfig};
use crate::dsp::{read_wav, stft, write_wav, SAMPLE_RATE};
use crate::error::{arg_err, Error, Result};
use crate::score::{
    align_frames, parse_notes, parse_phonemes, write_notes, write_phonemes, FrameScore, NoteEvent,
    PhonemeEvent, PhonemeInventory, SIL,
};
use crate::tensor::io::{decode, encode};
use crate::tensor::Tensor;

pub const MANIFEST: &str = "manifest.json";
const SPEC_MAGIC: &[u8; 4] = b"SUSM";
const SPEC_VERSION: u32 = 1;

const VOWELS: [&str; 5] = ["a", "i", "u", "e", "o"];
const CONSONANTS: [&str; 14] = [
    "k", "s", "t", "n", "h", "m", "y", "r", "w", "g", "z", "d", "b", "sh",
];
const MIDI_RANGE: (u8, u8) = (55, 76);

/// Train/test membership of a prepared corpus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub sample_rate: u32,
}

/// Size and split of a generated corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    pub n_utts: usize,
    pub n_test: usize,
    pub min_duration_sec: f64,
    pub max_duration_sec: f64,
    pub voice: ToyVoiceConfig,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            n_utts: 8,
            n_test: 2,
            min_duration_sec: 1.5,
            max_duration_sec: 2.5,
            voice: ToyVoiceConfig::default(),
        }
    }
}

fn ms(t: f64) -> f64 {
    (t * 1000.0).round() / 1000.0
}

/// A random melody of CV syllables framed by silence, lasting `dur` s.
pub fn random_score(
    rng: &mut ChaCha8Rng,
    inv: &PhonemeInventory,
    dur: f64,
) -> Result<(Vec<NoteEvent>, Vec<PhonemeEvent>)> {
    let id = |tok: &str| {
        inv.id(tok)
            .ok_or_else(|| Error::Argument(format!("inventory lacks toy token {tok:?}")))
    };
    let sil = id(SIL)?;
    let mut notes = Vec::new();
    let mut phones = Vec::new();
    let push_rest = |notes: &mut Vec<NoteEvent>, phones: &mut Vec<PhonemeEvent>, a, b| {
        notes.push(NoteEvent {
            onset_sec: a,
            offset_sec: b,
            midi: None,
        });
        phones.push(PhonemeEvent {
            onset_sec: a,
            offset_sec: b,
            phoneme: sil,
        });
    };
    let lead = ms(rng.random_range(0.10..0.20));
    push_rest(&mut notes, &mut phones, 0.0, lead);
    let stop = dur - 0.1;
    let mut t = lead;
    let mut midi = rng.random_range(MIDI_RANGE.0..=MIDI_RANGE.1) as i32;
    while stop - t >= 0.25 {
        let d = rng.random_range(0.25..0.55f64).min(stop - t);
        let end = ms(t + d);
        if notes.len() > 1 && rng.random_bool(0.12) {
            push_rest(&mut notes, &mut phones, t, end);
            t = end;
            continue;
        }
        midi = (midi + rng.random_range(-4..=4)).clamp(MIDI_RANGE.0 as i32, MIDI_RANGE.1 as i32);
        notes.push(NoteEvent {
            onset_sec: t,
            offset_sec: end,
            midi: Some(midi as u8),
        });
        let mut v_start = t;
        if rng.random_bool(0.6) {
            let c = CONSONANTS[rng.random_range(0..CONSONANTS.len())];
            let c_end = ms(t + rng.random_range(0.05..0.08));
            phones.push(PhonemeEvent {
                onset_sec: t,
                offset_sec: c_end,
                phoneme: id(c)?,
            });
            v_start = c_end;
        }
        let v = VOWELS[rng.random_range(0..VOWELS.len())];
        phones.push(PhonemeEvent {
            onset_sec: v_start,
            offset_sec: end,
            phoneme: id(v)?,
        });
        t = end;
    }
    push_rest(&mut notes, &mut phones, t, ms(dur));
    Ok((notes, phones))
}

pub fn utt_id(i: usize) -> String {
    format!("utt{i:02}")
}

fn is_nonempty_dir(dir: &Path) -> Result<bool> {
    match std::fs::read_dir(dir) {
        Ok(mut it) => Ok(it.next().is_some()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(false),
        Err(e) => Err(e.into()),
    }
}

/// Writes `n_utts` toy utterances (WAV plus note and phoneme label files)
/// and `manifest.json` into `dir`. The last `n_test` utterances form the
/// test split. Refuses a non-empty directory unless `force`.
pub fn gen_corpus(dir: &Path, cfg: &CorpusConfig, force: bool) -> Result<Manifest> {
    cfg.voice.validate()?;
    if cfg.n_utts == 0 || cfg.n_test >= cfg.n_utts {
        return arg_err(format!(
            "need at least one training utterance: {} utterances, {} for test",
            cfg.n_utts, cfg.n_test
        ));
    }
    if !(cfg.min_duration_sec >= 0.6 && cfg.min_duration_sec <= cfg.max_duration_sec) {
        return arg_err(format!(
            "utterance durations [{}, {}] s must be ordered and at least 0.6 s",
            cfg.min_duration_sec, cfg.max_duration_sec
        ));
    }
    if !force && is_nonempty_dir(dir)? {
        return Err(Error::State(format!(
            "{} is not empty; pass --force to overwrite",
            dir.display()
        )));
    }
    std::fs::create_dir_all(dir)?;
    let inv = PhonemeInventory::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.voice.seed);
    let mut ids = Vec::with_capacity(cfg.n_utts);
    for i in 0..cfg.n_utts {
        let id = utt_id(i);
        let dur = if cfg.max_duration_sec > cfg.min_duration_sec {
            rng.random_range(cfg.min_duration_sec..cfg.max_duration_sec)
        } else {
            cfg.min_duration_sec
        };
        let (notes, phones) = random_score(&mut rng, &inv, dur)?;
        let voice = ToyVoiceConfig {
            seed: rng.random(),
            ..cfg.voice.clone()
        };
        let audio = toy_synth_utterance(&notes, &phones, &inv, &voice)?;
        write_notes(&dir.join(format!("{id}.notes.tsv")), &notes)?;
        write_phonemes(&dir.join(format!("{id}.phones.tsv")), &phones, &inv)?;
        write_wav(&dir.join(format!("{id}.wav")), &audio)?;
        ids.push(id);
    }
    let test = ids.split_off(cfg.n_utts - cfg.n_test);
    let manifest = Manifest {
        train: ids,
        test,
        sample_rate: SAMPLE_RATE,
    };
    std::fs::write(
        dir.join(MANIFEST),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(manifest)
}

/// [`gen_corpus`] followed by caching every utterance's magnitude STFT.
pub fn prepare_corpus(dir: &Path, cfg: &CorpusConfig, force: bool) -> Result<Manifest> {
    let manifest = gen_corpus(dir, cfg, force)?;
    let corpus = Corpus::open(dir)?;
    for id in manifest.train.iter().chain(&manifest.test) {
        let mags = stft(&read_wav(&corpus.wav_path(id))?)?.mags.cast::<f32>();
        let bytes = encode(SPEC_MAGIC, SPEC_VERSION, "{}", [("mags", &mags)]);
        std::fs::write(corpus.spec_path(id), bytes)?;
    }
    Ok(manifest)
}

/// One utterance with its frame-level score and magnitudes.
#[derive(Clone, Debug)]
pub struct Utterance {
    pub id: String,
    pub notes: Vec<NoteEvent>,
    pub phonemes: Vec<PhonemeEvent>,
    pub score: FrameScore,
    /// `(bins, frames)` linear magnitudes.
    pub mags: Tensor<f64>,
}

/// A prepared corpus directory.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub inventory: PhonemeInventory,
}

impl Corpus {
    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("{}: {e}", path.display()),
            ))
        })?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        if manifest.sample_rate != SAMPLE_RATE {
            return arg_err(format!(
                "corpus sample rate {} differs from {SAMPLE_RATE}",
                manifest.sample_rate
            ));
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
            inventory: PhonemeInventory::default(),
        })
    }

    pub fn wav_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.wav"))
    }

    pub fn notes_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.notes.tsv"))
    }

    pub fn phones_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.phones.tsv"))
    }

    pub fn spec_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.spec"))
    }

    /// Loads labels and magnitudes, preferring the cached STFT.
    pub fn load(&self, id: &str) -> Result<Utterance> {
        let notes = parse_notes(&self.notes_path(id))?;
        let phonemes = parse_phonemes(&self.phones_path(id), &self.inventory)?;
        let score = align_frames(&notes, &phonemes, crate::dsp::frame_rate())?;
        let spec = self.spec_path(id);
        let mags = if spec.exists() {
            let bytes = std::fs::read(&spec)?;
            let d = decode(&bytes, SPEC_MAGIC, SPEC_VERSION)?;
            match d.blocks.as_slice() {
                [b] if b.name == "mags" => b.to_tensor::<f64>(),
                _ => {
                    return Err(Error::Integrity(format!(
                        "{}: bad block layout",
                        spec.display()
                    )))
                }
            }
        } else {
            stft(&read_wav(&self.wav_path(id))?)?.mags
        };
        Ok(Utterance {
            id: id.to_string(),
            notes,
            phonemes,
            score,
            mags,
        })
    }
}
