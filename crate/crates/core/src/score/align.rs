use super::events::{NoteEvent, PhonemeEvent};
use crate::error::{arg_err, Error, Result};

/// Note id of a rest; pitched notes use `midi + 1`.
pub const REST_ID: usize = 0;
pub const N_NOTE_IDS: usize = 129;

/// Per-frame note and phoneme ids of one utterance.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FrameScore {
    pub note_ids: Vec<usize>,
    pub phoneme_ids: Vec<usize>,
}

impl FrameScore {
    pub fn new(note_ids: Vec<usize>, phoneme_ids: Vec<usize>) -> Result<Self> {
        if note_ids.len() != phoneme_ids.len() {
            return arg_err(format!(
                "frame score streams differ in length: {} notes vs {} phonemes",
                note_ids.len(),
                phoneme_ids.len()
            ));
        }
        if let Some(&id) = note_ids.iter().find(|&&id| id >= N_NOTE_IDS) {
            return Err(Error::Index(format!("note id {id} >= {N_NOTE_IDS}")));
        }
        Ok(Self {
            note_ids,
            phoneme_ids,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.note_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.note_ids.is_empty()
    }

    /// Frames `[start, end)`, with frames past the end filled by rest/SIL.
    pub fn slice_padded(&self, start: usize, end: usize) -> Self {
        let get = |v: &[usize], i: usize| v.get(i).copied().unwrap_or(0);
        Self {
            note_ids: (start..end).map(|i| get(&self.note_ids, i)).collect(),
            phoneme_ids: (start..end).map(|i| get(&self.phoneme_ids, i)).collect(),
        }
    }

    /// MIDI note per frame, `None` for rests.
    pub fn midi(&self, frame: usize) -> Option<u8> {
        match self.note_ids[frame] {
            REST_ID => None,
            id => Some((id - 1) as u8),
        }
    }
}

/// Samples both streams at frame centers `(i + 0.5) / frame_rate`. The
/// length follows the shorter stream; gaps become rest / SIL.
pub fn align_frames(
    notes: &[NoteEvent],
    phonemes: &[PhonemeEvent],
    frame_rate: f64,
) -> Result<FrameScore> {
    if notes.is_empty() || phonemes.is_empty() {
        return arg_err("align_frames needs non-empty note and phoneme streams");
    }
    if !(frame_rate > 0.0) {
        return arg_err(format!("frame rate must be positive, got {frame_rate}"));
    }
    let end = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0f64, f64::max);
    let dur = end(&mut notes.iter().map(|n| n.offset_sec))
        .min(end(&mut phonemes.iter().map(|p| p.offset_sec)));
    let n_frames = (dur * frame_rate).floor() as usize;
    if n_frames == 0 {
        return arg_err(format!("note and phoneme streams overlap for only {dur} s"));
    }
    let mut note_ids = vec![REST_ID; n_frames];
    let mut phoneme_ids = vec![0; n_frames];
    let (mut ni, mut pi) = (0, 0);
    for i in 0..n_frames {
        let t = (i as f64 + 0.5) / frame_rate;
        while ni < notes.len() && notes[ni].offset_sec <= t {
            ni += 1;
        }
        if let Some(n) = notes.get(ni).filter(|n| n.onset_sec <= t) {
            note_ids[i] = n.midi.map_or(REST_ID, |m| m as usize + 1);
        }
        while pi < phonemes.len() && phonemes[pi].offset_sec <= t {
            pi += 1;
        }
        if let Some(p) = phonemes.get(pi).filter(|p| p.onset_sec <= t) {
            phoneme_ids[i] = p.phoneme;
        }
    }
    FrameScore::new(note_ids, phoneme_ids)
}
