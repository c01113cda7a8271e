use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::dsp::{
    mcd_audio, vuv_detect, yin_f0, AudioBuffer, MelConfig, VuvParams, YinParams, N_FFT, SAMPLE_RATE,
};
use crate::error::{arg_err, Result};
use crate::tensor::Tensor;

/// Objective scores of one synthesized utterance against its reference.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EvalEntry {
    pub mcd_db: f64,
    /// RMS F0 difference over frames both YIN tracks call voiced; NaN when
    /// there are none.
    pub f0_rmse_cents: f64,
    /// Agreement of the two YIN voicing decisions, percent of frames.
    pub f0_vuv_pct: f64,
    /// Agreement of the two energy-based voicing masks, percent of frames.
    pub vuv_pct: f64,
}

fn check(a: &AudioBuffer, what: &str) -> Result<()> {
    if a.sample_rate != SAMPLE_RATE {
        return arg_err(format!(
            "{what} audio is {} Hz; resample to {SAMPLE_RATE} Hz first",
            a.sample_rate
        ));
    }
    if a.len() < N_FFT {
        return arg_err(format!(
            "{what} audio has {} samples, less than one {N_FFT}-sample frame",
            a.len()
        ));
    }
    Ok(())
}

fn agreement(a: &[bool], b: &[bool]) -> f64 {
    let n = a.len().min(b.len());
    if n == 0 {
        return 0.0;
    }
    100.0 * a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n as f64
}

/// Cents between two frequencies.
pub fn cents(reference_hz: f64, hz: f64) -> f64 {
    1200.0 * (hz / reference_hz).log2()
}

/// Compares `syn` against `reference`; frame-wise metrics use the shorter
/// of the two tracks.
pub fn evaluate(reference: &AudioBuffer, syn: &AudioBuffer) -> Result<EvalEntry> {
    check(reference, "reference")?;
    check(syn, "synthesized")?;
    let mcd_db = mcd_audio(reference, syn, &MelConfig::default())?;
    let yp = YinParams::default();
    let (fr, fs) = (yin_f0(reference, &yp)?, yin_f0(syn, &yp)?);
    let mut sq = 0.0;
    let mut n = 0usize;
    for i in 0..fr.len().min(fs.len()) {
        if fr.voiced[i] && fs.voiced[i] {
            sq += cents(fr.f0_hz[i], fs.f0_hz[i]).powi(2);
            n += 1;
        }
    }
    let f0_rmse_cents = if n == 0 {
        f64::NAN
    } else {
        (sq / n as f64).sqrt()
    };
    let vp = VuvParams::default();
    Ok(EvalEntry {
        mcd_db,
        f0_rmse_cents,
        f0_vuv_pct: agreement(&fr.voiced, &fs.voiced),
        vuv_pct: agreement(&vuv_detect(reference, &vp)?, &vuv_detect(syn, &vp)?),
    })
}

fn mean_of(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values
        .filter(|v| !v.is_nan())
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Column means; NaN entries are skipped.
pub fn mean_entry(entries: &[(String, EvalEntry)]) -> EvalEntry {
    let col = |f: fn(&EvalEntry) -> f64| mean_of(entries.iter().map(|(_, e)| f(e)));
    EvalEntry {
        mcd_db: col(|e| e.mcd_db),
        f0_rmse_cents: col(|e| e.f0_rmse_cents),
        f0_vuv_pct: col(|e| e.f0_vuv_pct),
        vuv_pct: col(|e| e.vuv_pct),
    }
}

pub const REPORT_HEADER: &str = "utt,mcd_db,f0_rmse_cents,f0_vuv_pct,vuv_pct";

/// Writes one CSV row per entry plus a final `mean` row and returns the
/// means.
pub fn write_report(entries: &[(String, EvalEntry)], path: &Path) -> Result<EvalEntry> {
    if entries.is_empty() {
        return arg_err("report needs at least one entry");
    }
    let mean = mean_entry(entries);
    let mut s = String::from(REPORT_HEADER);
    s.push('\n');
    for (id, e) in entries
        .iter()
        .map(|(i, e)| (i.as_str(), e))
        .chain([("mean", &mean)])
    {
        writeln!(
            s,
            "{id},{:.6},{:.6},{:.6},{:.6}",
            e.mcd_db, e.f0_rmse_cents, e.f0_vuv_pct, e.vuv_pct
        )
        .expect("write to string");
    }
    std::fs::write(path, s)?;
    Ok(mean)
}

/// Writes a `(rows, cols)` matrix as CSV, one row per line.
pub fn write_matrix_csv(m: &Tensor<f64>, path: &Path) -> Result<()> {
    m.expect_rank(2, "matrix")?;
    let cols = m.dim(1);
    let mut s = String::with_capacity(m.len() * 10);
    for row in m.data().chunks(cols.max(1)) {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            write!(s, "{v:.6}").expect("write to string");
        }
        s.push('\n');
    }
    std::fs::write(path, s)?;
    Ok(())
}
