//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::Path;

use dataeff::dataset::{CorpusRow, CorpusTable, Split};
use dataeff::frame::parse_frame;
use dataeff::rng::SplitMix64;

pub const CANONICAL: (f64, f64, f64) = (-27.26, 0.35, 97.79);

pub fn canonical(x: f64) -> f64 {
    CANONICAL.0 / x.powf(CANONICAL.1) + CANONICAL.2
}

/// Frame text for a row with one intent and up to two slots.
pub fn frame_text(intent: &str, slots: &[&str], word: &str) -> String {
    let mut s = format!("[{intent} {word}");
    for slot in slots {
        let _ = write!(s, " [{slot} {word} ]");
    }
    s.push_str(" ]");
    s
}

fn row(domain: &str, frame: &str, split: Split, i: usize) -> CorpusRow {
    CorpusRow {
        domain: domain.into(),
        utterance: format!("utt {i}"),
        frame: parse_frame(frame).expect("fixture frames parse"),
        split,
    }
}

/// A target domain with `train` train rows and `test` test rows over
/// `intents` intents and `slots` slots, plus a small source domain.
pub fn synthetic_corpus(
    target: &str,
    train: usize,
    test: usize,
    intents: usize,
    slots: usize,
    seed: u64,
) -> CorpusTable {
    let mut rng = SplitMix64::new(seed);
    let intent_names: Vec<String> = (0..intents).map(|i| format!("IN:INTENT_{}", letter(i))).collect();
    let slot_names: Vec<String> = (0..slots).map(|i| format!("SL:SLOT_{}", letter(i))).collect();
    let mut rows = Vec::new();
    for (split, count) in [(Split::Train, train), (Split::Test, test)] {
        for i in 0..count {
            let intent = &intent_names[rng.below(intents as u64) as usize];
            let n_slots = if slots == 0 { 0 } else { rng.below(3) as usize };
            let chosen: Vec<&str> = (0..n_slots)
                .map(|_| slot_names[rng.below(slots as u64) as usize].as_str())
                .collect();
            rows.push(row(target, &frame_text(intent, &chosen, &format!("w{i}")), split, rows.len()));
        }
    }
    for (i, split) in [Split::Train, Split::Train, Split::Eval, Split::Test].into_iter().enumerate() {
        rows.push(row("source", &frame_text("IN:SOURCE_TASK", &["SL:THING"], &format!("s{i}")), split, rows.len()));
    }
    CorpusTable::from_rows(rows)
}

fn letter(i: usize) -> String {
    let mut s = String::new();
    let mut n = i;
    loop {
        s.insert(0, (b'A' + (n % 26) as u8) as char);
        n /= 26;
        if n == 0 {
            break s;
        }
        n -= 1;
    }
}

pub fn write_tsv(table: &CorpusTable, path: &Path) {
    let mut buf = Vec::new();
    table.write_tsv(&mut buf).unwrap();
    std::fs::write(path, buf).unwrap();
}
