use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{make_segments, train_step, AdamState, Checkpoint, RngState, Segment, TrainConfig};
use crate::corpus::Corpus;
use crate::error::{arg_err, Error, Result};
use crate::model::{ModelConfig, ModelParams};

/// Final checkpoint name inside the output directory.
pub const FINAL_CHECKPOINT: &str = "model.susg";
/// Per-step `step,loss,seconds` log inside the output directory.
pub const TRAIN_LOG: &str = "train_log.csv";

/// Epoch-wise shuffled order over `n` items, resumable from the generator
/// state at the start of the current epoch and the position within it.
#[derive(Clone, Debug)]
pub struct DataOrder {
    n: usize,
    epoch_start: ChaCha8Rng,
    rng: ChaCha8Rng,
    perm: Vec<usize>,
    cursor: usize,
}

impl DataOrder {
    pub fn new(n: usize, epoch_start: ChaCha8Rng, cursor: usize) -> Result<Self> {
        if n == 0 {
            return arg_err("no training segments");
        }
        if cursor >= n {
            return arg_err(format!("cursor {cursor} outside an epoch of {n}"));
        }
        let mut o = Self {
            n,
            epoch_start: epoch_start.clone(),
            rng: epoch_start,
            perm: Vec::new(),
            cursor,
        };
        o.shuffle();
        Ok(o)
    }

    fn shuffle(&mut self) {
        self.epoch_start = self.rng.clone();
        self.perm = (0..self.n).collect();
        self.perm.shuffle(&mut self.rng);
    }

    /// Next `k` indices; a new epoch starts as soon as one is exhausted.
    pub fn take(&mut self, k: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(k);
        for _ in 0..k {
            out.push(self.perm[self.cursor]);
            self.cursor += 1;
            if self.cursor == self.n {
                self.cursor = 0;
                self.shuffle();
            }
        }
        out
    }

    pub fn epoch_start(&self) -> &ChaCha8Rng {
        &self.epoch_start
    }
}

/// Data-order generator for `seed`, on a stream separate from parameter
/// initialization.
fn data_rng(seed: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(1);
    r
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    /// `(step, loss)` of every step run in this call.
    pub losses: Vec<(u64, f64)>,
    /// All training segments, for evaluating the final model.
    pub segments: Vec<Segment>,
}

/// Loads the training split of a prepared corpus as segments.
pub fn load_segments(corpus_dir: &Path, segment_frames: usize) -> Result<Vec<Segment>> {
    let corpus = Corpus::open(corpus_dir)?;
    let mut segments = Vec::new();
    for id in &corpus.manifest.train {
        let u = corpus.load(id)?;
        segments.extend(make_segments(&u.score, &u.mags, segment_frames)?);
    }
    Ok(segments)
}

/// Teacher-forced training on the training split of `corpus_dir`.
///
/// Writes `train_log.csv`, a checkpoint every `checkpoint_every` steps
/// (`step_NNNNNN.susg`) and `model.susg` at the end into `out_dir`. With
/// `resume`, continues from that checkpoint (its model configuration wins)
/// and appends to the log; the loss curve matches an uninterrupted run.
pub fn train_loop(
    corpus_dir: &Path,
    model: &ModelConfig,
    cfg: &TrainConfig,
    out_dir: &Path,
    resume: Option<Checkpoint>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let segments = load_segments(corpus_dir, cfg.segment_frames)?;
    if segments.is_empty() {
        return arg_err("corpus has no training utterances");
    }
    let n = segments.len();
    let (model, mut params, mut adam, mut step, order_rng) = match resume {
        Some(c) => {
            if c.train.segment_frames != cfg.segment_frames
                || c.train.batch_size != cfg.batch_size
                || c.train.seed != cfg.seed
            {
                return arg_err(
                    "resume requires the checkpoint's segment length, batch size and seed",
                );
            }
            (c.model, c.params, c.adam, c.step, c.rng.restore()?)
        }
        None => {
            model.validate()?;
            let p = ModelParams::init(model, cfg.seed)?;
            let a = AdamState::new(&p);
            (*model, p, a, 0, data_rng(cfg.seed))
        }
    };
    let consumed = step as u128 * cfg.batch_size as u128;
    let mut order = DataOrder::new(n, order_rng, (consumed % n as u128) as usize)?;

    std::fs::create_dir_all(out_dir)?;
    let log_path = out_dir.join(TRAIN_LOG);
    let fresh = step == 0 || !log_path.exists();
    let mut log = OpenOptions::new()
        .create(true)
        .write(true)
        .append(!fresh)
        .truncate(fresh)
        .open(&log_path)?;
    if fresh {
        writeln!(log, "step,loss,seconds")?;
    }

    let snapshot =
        |params: &ModelParams<f32>, adam: &AdamState, step, order: &DataOrder| Checkpoint {
            model,
            train: *cfg,
            params: params.clone(),
            adam: adam.clone(),
            step,
            rng: RngState::capture(order.epoch_start()),
        };
    let started = Instant::now();
    let mut losses = Vec::new();
    while step < cfg.max_steps {
        let batch: Vec<Segment> = order
            .take(cfg.batch_size)
            .into_iter()
            .map(|i| segments[i].clone())
            .collect();
        let stats = match train_step(&batch, &mut params, &mut adam, &model, cfg) {
            Err(Error::NonFinite { tensor, .. }) => {
                return Err(Error::NonFinite {
                    step: step + 1,
                    tensor,
                })
            }
            r => r?,
        };
        step += 1;
        let secs = started.elapsed().as_secs_f64();
        writeln!(log, "{step},{:.6},{secs:.3}", stats.loss)?;
        losses.push((step, stats.loss));
        if step % 50 == 0 || step == cfg.max_steps {
            log::info!("step {step}: loss {:.5} ({secs:.0} s)", stats.loss);
        }
        if cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 && step < cfg.max_steps {
            snapshot(&params, &adam, step, &order)
                .save(&out_dir.join(format!("step_{step:06}.susg")))?;
        }
    }
    log.flush()?;
    let checkpoint = snapshot(&params, &adam, step, &order);
    checkpoint.save(&out_dir.join(FINAL_CHECKPOINT))?;
    Ok(TrainOutcome {
        checkpoint,
        losses,
        segments,
    })
}
