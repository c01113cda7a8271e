use proptest::prelude::*;
use susing_core::dsp::frame_rate;
use susing_core::score::*;

/// Contiguous events with random durations, occasionally separated by gaps.
fn stream() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.05f64..0.6, prop::bool::weighted(0.2)), 1..12).prop_map(|durs| {
        let mut t = 0.0;
        let mut out = Vec::new();
        for (d, gap) in durs {
            if gap {
                t += 0.1;
            }
            out.push((t, t + d));
            t += d;
        }
        out
    })
}

/// Frame indices where the id sequence changes.
fn boundaries(ids: &[usize]) -> Vec<usize> {
    (1..ids.len()).filter(|&i| ids[i] != ids[i - 1]).collect()
}

proptest! {
    #[test]
    fn alignment_recovers_boundaries(spans in stream(), seed in 0usize..1000) {
        let inv = PhonemeInventory::default();
        // neighbouring events get distinct ids so every boundary is visible
        let phonemes: Vec<PhonemeEvent> = spans
            .iter()
            .enumerate()
            .map(|(i, &(on, off))| PhonemeEvent {
                onset_sec: on,
                offset_sec: off,
                phoneme: 1 + (seed + i) % (inv.len() - 1),
            })
            .collect();
        let end = spans.last().unwrap().1;
        let notes = vec![NoteEvent { onset_sec: 0.0, offset_sec: end, midi: Some(64) }];
        let fs = align_frames(&notes, &phonemes, frame_rate()).unwrap();
        prop_assert_eq!(fs.note_ids.len(), fs.phoneme_ids.len());
        prop_assert_eq!(fs.n_frames(), (end * frame_rate()).floor() as usize);
        prop_assert_eq!(&fs, &align_frames(&notes, &phonemes, frame_rate()).unwrap());
        for &id in &fs.phoneme_ids {
            prop_assert!(inv.token(id).is_some());
        }

        // each true event edge inside the grid shows up within one frame
        let found = boundaries(&fs.phoneme_ids);
        let fr = frame_rate();
        let mut edges: Vec<f64> = Vec::new();
        for (i, &(on, off)) in spans.iter().enumerate() {
            if i > 0 && spans[i - 1].1 < on {
                edges.push(on);
            }
            edges.push(off);
        }
        for e in edges {
            let f = e * fr;
            if f < 1.0 || f > fs.n_frames() as f64 - 1.0 {
                continue;
            }
            prop_assert!(
                found.iter().any(|&b| (b as f64 - f).abs() <= 1.0),
                "edge at frame {} not found in {:?}", f, found
            );
        }
    }
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let inv = PhonemeInventory::default();
    let notes = vec![
        NoteEvent {
            onset_sec: 0.0,
            offset_sec: 0.5,
            midi: Some(60),
        },
        NoteEvent {
            onset_sec: 0.5,
            offset_sec: 1.25,
            midi: None,
        },
    ];
    let phones = vec![
        PhonemeEvent {
            onset_sec: 0.0,
            offset_sec: 0.1,
            phoneme: inv.id("k").unwrap(),
        },
        PhonemeEvent {
            onset_sec: 0.1,
            offset_sec: 0.5,
            phoneme: inv.id("a").unwrap(),
        },
    ];
    let (np, pp) = (
        dir.path().join("u.notes.tsv"),
        dir.path().join("u.phones.tsv"),
    );
    write_notes(&np, &notes).unwrap();
    write_phonemes(&pp, &phones, &inv).unwrap();
    assert_eq!(
        parse_events(&np, EventSchema::Note, &inv).unwrap(),
        Events::Notes(notes)
    );
    assert_eq!(
        parse_events(&pp, EventSchema::Phoneme, &inv).unwrap(),
        Events::Phonemes(phones)
    );
}

#[test]
fn inventory_file_loads() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("phonemes.txt");
    std::fs::write(&p, DEFAULT_INVENTORY).unwrap();
    let inv = load_inventory(&p).unwrap();
    assert_eq!(inv.len(), 35);
    assert_eq!(inv, PhonemeInventory::default());
}

#[test]
fn midi_frequencies() {
    assert!((midi_to_hz(69) - 440.0).abs() < 1e-12);
    assert!((midi_to_hz(81) - 880.0).abs() < 1e-9);
}
