//! Score input: phoneme inventory, note/phoneme label files, and alignment
//! of both event streams onto the spectrogram frame grid.

mod align;
mod events;
mod inventory;

pub use align::{align_frames, FrameScore, N_NOTE_IDS, REST_ID};
pub use events::{
    parse_events, parse_notes, parse_notes_str, parse_phonemes, parse_phonemes_str, write_notes,
    write_phonemes, EventSchema, Events, NoteEvent, PhonemeEvent,
};
pub use inventory::{load_inventory, PhonemeInventory, DEFAULT_INVENTORY, SIL};

/// Equal-tempered frequency of a MIDI note, A4 = 69 = 440 Hz.
pub fn midi_to_hz(midi: u8) -> f64 {
    440.0 * 2f64.powf((midi as f64 - 69.0) / 12.0)
}
