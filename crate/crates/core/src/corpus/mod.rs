//! Toy corpus generation and objective evaluation.
//!
//! The toy voice is a harmonic synthesizer driven by the score, standing in
//! for recorded singing: every label file it is rendered from is exact
//! ground truth for pitch and voicing.

mod eval;
mod generate;
mod synth;

pub use eval::{
    cents, evaluate, mean_entry, write_matrix_csv, write_report, EvalEntry, REPORT_HEADER,
};
pub use generate::{
    gen_corpus, prepare_corpus, random_score, utt_id, Corpus, CorpusConfig, Manifest, Utterance,
    MANIFEST,
};
pub use synth::{toy_synth_utterance, ToyVoiceConfig};
