use std::time::Instant;

use susing_core::corpus::{
    evaluate, prepare_corpus, write_matrix_csv, write_report, Corpus, EvalEntry,
};
use susing_core::dsp::{
    frame_rate, griffin_lim, log_mel, read_wav, stft, write_wav, AudioBuffer, MelConfig,
};
use susing_core::model::gradient_suite;
use susing_core::score::{align_frames, parse_notes, parse_phonemes, FrameScore, PhonemeInventory};
use susing_core::train::{
    evaluate_loss, infer_autoregressive, train_loop, Checkpoint, FINAL_CHECKPOINT,
};

use crate::settings::Settings;
use crate::{CliError, Command, EvalArgs, GradcheckArgs, PrepareArgs, SynthArgs, TrainArgs};

/// Report file written by `eval` into its output directory.
pub const REPORT_FILE: &str = "report.csv";

pub fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Prepare(a) => prepare(a),
        Command::Train(a) => train(a),
        Command::Synth(a) => synth(a),
        Command::Eval(a) => eval(a),
        Command::Gradcheck(a) => gradcheck(a),
    }
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(format!("invalid settings: {e}"))
}

fn echo(command: &str, s: &Settings) {
    eprintln!("# susing {command}: effective settings");
    for line in s.to_toml().lines() {
        eprintln!("#   {line}");
    }
}

fn prepare(a: PrepareArgs) -> Result<(), CliError> {
    let mut s = Settings::load(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        s.corpus.voice.seed = seed;
    }
    s.corpus.voice.validate().map_err(usage)?;
    echo("prepare", &s);
    let m = prepare_corpus(&a.out, &s.corpus, a.force)?;
    println!(
        "prepared {} training and {} test utterances in {}",
        m.train.len(),
        m.test.len(),
        a.out.display()
    );
    Ok(())
}

fn train(a: TrainArgs) -> Result<(), CliError> {
    let mut s = Settings::load(a.config.as_deref())?;
    let resume = a.ckpt.as_deref().map(Checkpoint::load).transpose()?;
    if let Some(c) = &resume {
        s.model = c.model;
        s.train = c.train;
    }
    if let Some(v) = a.steps {
        s.train.max_steps = v;
    }
    if let Some(v) = a.seed {
        s.train.seed = v;
    }
    if let Some(v) = a.segment_frames {
        s.train.segment_frames = v;
    }
    if let Some(v) = a.lr {
        s.train.lr = v;
    }
    if let Some(v) = a.batch {
        s.train.batch_size = v;
    }
    if a.ablate_stripe || a.ablate_skips {
        if resume.is_some() {
            return Err(CliError::Usage(
                "ablation flags cannot change a resumed model".into(),
            ));
        }
        s.model.sunet.use_stripe &= !a.ablate_stripe;
        s.model.sunet.use_skips &= !a.ablate_skips;
    }
    s.model.validate().map_err(usage)?;
    s.train.validate().map_err(usage)?;
    echo("train", &s);

    if resume.is_none() && !a.force && a.out.join(FINAL_CHECKPOINT).exists() {
        return Err(susing_core::Error::State(format!(
            "{} already holds a trained model; pass --force to start over or --ckpt to resume",
            a.out.display()
        ))
        .into());
    }
    let start = Instant::now();
    let outcome = train_loop(&a.corpus, &s.model, &s.train, &a.out, resume)?;
    let c = &outcome.checkpoint;
    let final_loss = evaluate_loss(&outcome.segments, &c.params, &c.model)?;
    println!(
        "trained to step {} in {:.1} s; teacher-forced loss over the training set {final_loss:.6}",
        c.step,
        start.elapsed().as_secs_f64()
    );
    println!("checkpoint {}", a.out.join(FINAL_CHECKPOINT).display());
    Ok(())
}

fn vocode(fs: &FrameScore, c: &Checkpoint, s: &Settings) -> Result<AudioBuffer, CliError> {
    let spec = infer_autoregressive(fs, &c.params, &c.model, c.train.segment_frames)?;
    Ok(griffin_lim(&spec, s.synth.gl_iters, s.synth.seed)?.audio)
}

fn synth(a: SynthArgs) -> Result<(), CliError> {
    let mut s = Settings::load(a.config.as_deref())?;
    if let Some(v) = a.gl_iters {
        s.synth.gl_iters = v;
    }
    if let Some(v) = a.seed {
        s.synth.seed = v;
    }
    echo("synth", &s);
    let c = Checkpoint::load(&a.ckpt)?;
    match (&a.score, &a.phones, &a.corpus) {
        (Some(notes), Some(phones), _) => {
            let inv = PhonemeInventory::default();
            let fs = align_frames(
                &parse_notes(notes)?,
                &parse_phonemes(phones, &inv)?,
                frame_rate(),
            )?;
            let audio = vocode(&fs, &c, &s)?;
            write_wav(&a.out, &audio)?;
            println!(
                "{}: {} frames, {} samples",
                a.out.display(),
                fs.n_frames(),
                audio.samples.len()
            );
        }
        (None, None, Some(dir)) => {
            let corpus = Corpus::open(dir)?;
            std::fs::create_dir_all(&a.out)?;
            for id in &corpus.manifest.test {
                let notes = parse_notes(&corpus.notes_path(id))?;
                let phones = parse_phonemes(&corpus.phones_path(id), &corpus.inventory)?;
                let fs = align_frames(&notes, &phones, frame_rate())?;
                let path = a.out.join(format!("{id}.wav"));
                write_wav(&path, &vocode(&fs, &c, &s)?)?;
                println!("{}", path.display());
            }
        }
        _ => {
            return Err(CliError::Usage(
                "synth needs --score and --phones, or --corpus".into(),
            ))
        }
    }
    Ok(())
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "n/a".into()
    } else {
        format!("{v:.3}")
    }
}

fn eval(a: EvalArgs) -> Result<(), CliError> {
    let s = Settings::load(a.config.as_deref())?;
    echo("eval", &s);
    let corpus = Corpus::open(&a.corpus)?;
    if corpus.manifest.test.is_empty() {
        return Err(CliError::Usage("the corpus has no test utterances".into()));
    }
    let mel = MelConfig::default();
    let mut entries: Vec<(String, EvalEntry)> = Vec::new();
    for id in &corpus.manifest.test {
        let reference = read_wav(&corpus.wav_path(id))?;
        let syn = read_wav(&a.out.join(format!("{id}.wav")))?;
        entries.push((id.clone(), evaluate(&reference, &syn)?));
        write_matrix_csv(
            &log_mel(&stft(&syn)?, &mel)?,
            &a.out.join(format!("{id}.mel.csv")),
        )?;
    }
    let report = a.out.join(REPORT_FILE);
    let mean = write_report(&entries, &report)?;
    println!(
        "{:<8} {:>9} {:>14} {:>11} {:>8}",
        "utt", "mcd_db", "f0_rmse_cents", "f0_vuv_pct", "vuv_pct"
    );
    for (id, e) in entries
        .iter()
        .map(|(i, e)| (i.as_str(), e))
        .chain([("mean", &mean)])
    {
        println!(
            "{id:<8} {:>9} {:>14} {:>11} {:>8}",
            fmt(e.mcd_db),
            fmt(e.f0_rmse_cents),
            fmt(e.f0_vuv_pct),
            fmt(e.vuv_pct)
        );
    }
    println!("report {}", report.display());
    Ok(())
}

fn gradcheck(a: GradcheckArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let rows = gradient_suite(a.seed)?;
    println!(
        "{:<18} {:>7} {:>14}  {:<6} worst tensor",
        "op", "coords", "max_rel_error", "status"
    );
    for r in &rows {
        println!(
            "{:<18} {:>7} {:>14.3e}  {:<6} {}",
            r.op,
            r.coords,
            r.max_rel_error,
            if r.passed() { "ok" } else { "FAIL" },
            r.worst
        );
    }
    let failed = rows.iter().filter(|r| !r.passed()).count();
    println!(
        "{} ops checked in {:.1} s, seed {}",
        rows.len(),
        start.elapsed().as_secs_f64(),
        a.seed
    );
    if failed > 0 {
        return Err(CliError::Failed(format!(
            "{failed} op(s) exceed the tolerance"
        )));
    }
    Ok(())
}
