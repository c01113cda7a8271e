//! Label files: one event per line, `onset offset value`, separated by tabs
//! or spaces, `#` comments allowed. Note values are MIDI numbers or `R`;
//! phoneme values are inventory tokens.

use std::fmt::Write as _;
use std::path::Path;

use super::inventory::{parse_err, strip_comment, PhonemeInventory};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoteEvent {
    pub onset_sec: f64,
    pub offset_sec: f64,
    /// `None` is a rest.
    pub midi: Option<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhonemeEvent {
    pub onset_sec: f64,
    pub offset_sec: f64,
    /// Inventory id; never SIL when parsed from a file unless written as such.
    pub phoneme: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventSchema {
    Note,
    Phoneme,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Events {
    Notes(Vec<NoteEvent>),
    Phonemes(Vec<PhonemeEvent>),
}

pub fn parse_events(path: &Path, schema: EventSchema, inv: &PhonemeInventory) -> Result<Events> {
    Ok(match schema {
        EventSchema::Note => Events::Notes(parse_notes(path)?),
        EventSchema::Phoneme => Events::Phonemes(parse_phonemes(path, inv)?),
    })
}

pub fn parse_notes(path: &Path) -> Result<Vec<NoteEvent>> {
    parse_notes_str(&std::fs::read_to_string(path)?, &path.display().to_string())
}

pub fn parse_phonemes(path: &Path, inv: &PhonemeInventory) -> Result<Vec<PhonemeEvent>> {
    parse_phonemes_str(
        &std::fs::read_to_string(path)?,
        inv,
        &path.display().to_string(),
    )
}

pub fn parse_notes_str(text: &str, origin: &str) -> Result<Vec<NoteEvent>> {
    let rows = parse_rows(text, origin, |value, line| {
        if value == "R" {
            return Ok(None);
        }
        match value.parse::<u8>() {
            Ok(m) if m <= 127 => Ok(Some(m)),
            _ => Err(parse_err(
                origin,
                line,
                format!("invalid note value {value:?} (MIDI 0..127 or R)"),
            )),
        }
    })?;
    Ok(rows
        .into_iter()
        .map(|(onset_sec, offset_sec, midi)| NoteEvent {
            onset_sec,
            offset_sec,
            midi,
        })
        .collect())
}

pub fn parse_phonemes_str(
    text: &str,
    inv: &PhonemeInventory,
    origin: &str,
) -> Result<Vec<PhonemeEvent>> {
    let rows = parse_rows(text, origin, |value, line| {
        inv.id(value)
            .ok_or_else(|| parse_err(origin, line, format!("unknown phoneme {value:?}")))
    })?;
    Ok(rows
        .into_iter()
        .map(|(onset_sec, offset_sec, phoneme)| PhonemeEvent {
            onset_sec,
            offset_sec,
            phoneme,
        })
        .collect())
}

/// Parses, validates and sorts `(onset, offset, value)` rows.
fn parse_rows<V>(
    text: &str,
    origin: &str,
    mut value: impl FnMut(&str, usize) -> Result<V>,
) -> Result<Vec<(f64, f64, V)>> {
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = strip_comment(raw);
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(
                origin,
                line,
                format!("expected 3 fields, got {}", fields.len()),
            ));
        }
        let time = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|t| t.is_finite())
                .ok_or_else(|| parse_err(origin, line, format!("invalid time {s:?}")))
        };
        let (on, off) = (time(fields[0])?, time(fields[1])?);
        if on < 0.0 || off < 0.0 {
            return Err(parse_err(origin, line, "negative time".into()));
        }
        if off <= on {
            return Err(parse_err(origin, line, "offset before onset".into()));
        }
        rows.push((line, on, off, value(fields[2], line)?));
    }
    rows.sort_by(|a, b| a.1.total_cmp(&b.1));
    for w in rows.windows(2) {
        if w[1].1 < w[0].2 {
            return Err(parse_err(
                origin,
                w[1].0,
                format!("event overlaps the one on line {}", w[0].0),
            ));
        }
    }
    Ok(rows
        .into_iter()
        .map(|(_, on, off, v)| (on, off, v))
        .collect())
}

pub fn write_notes(path: &Path, notes: &[NoteEvent]) -> Result<()> {
    let mut s = String::new();
    for n in notes {
        let v = n.midi.map_or("R".to_string(), |m| m.to_string());
        writeln!(s, "{}\t{}\t{v}", n.onset_sec, n.offset_sec).expect("write to string");
    }
    std::fs::write(path, s).map_err(Error::from)
}

pub fn write_phonemes(
    path: &Path,
    phonemes: &[PhonemeEvent],
    inv: &PhonemeInventory,
) -> Result<()> {
    let mut s = String::new();
    for p in phonemes {
        let tok = inv
            .token(p.phoneme)
            .ok_or_else(|| Error::Index(format!("phoneme id {} not in inventory", p.phoneme)))?;
        writeln!(s, "{}\t{}\t{tok}", p.onset_sec, p.offset_sec).expect("write to string");
    }
    std::fs::write(path, s).map_err(Error::from)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn notes_with_rest() {
        let n = parse_notes_str("0.0\t0.5\t60\n0.5 1.0 R\n", "t").unwrap();
        assert_eq!(n.len(), 2);
        assert_eq!(n[0].midi, Some(60));
        assert_eq!(n[1].midi, None);
    }

    #[test]
    fn phoneme_lookup() {
        let inv = PhonemeInventory::default();
        let p = parse_phonemes_str("0.0\t0.4\ta\n", &inv, "t").unwrap();
        assert_eq!(
            p,
            vec![PhonemeEvent {
                onset_sec: 0.0,
                offset_sec: 0.4,
                phoneme: inv.id("a").unwrap()
            }]
        );
    }

    #[test]
    fn offset_before_onset() {
        let e = parse_notes_str("0.5\t0.4\t60\n", "t").unwrap_err();
        assert_eq!(e.to_string(), "t: line 1: offset before onset");
    }

    #[test]
    fn overlap_negative_and_unknown_are_rejected() {
        let inv = PhonemeInventory::default();
        assert!(matches!(
            parse_notes_str("0 1 60\n0.5 2 61\n", "t"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_notes_str("-1 1 60\n", "t"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_phonemes_str("# hdr\n0 1 qq\n", &inv, "t"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn unsorted_input_is_sorted() {
        let n = parse_notes_str("1 2 62\n0 1 60\n", "t").unwrap();
        assert_eq!(n[0].midi, Some(60));
    }
}
