use crate::error::{arg_err, Result};
use crate::score::FrameScore;
use crate::tensor::Tensor;

/// One training window: the score of frames `[kS, (k+1)S)`, the ground
/// truth of the window before it and the target magnitudes. Frames at or
/// past `valid` are zero padding and excluded from the loss.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub score: FrameScore,
    pub prev: Tensor<f32>,
    pub target: Tensor<f32>,
    pub valid: usize,
}

impl Segment {
    pub fn frames(&self) -> usize {
        self.score.n_frames()
    }

    pub fn mask(&self) -> Vec<bool> {
        (0..self.frames()).map(|t| t < self.valid).collect()
    }
}

fn window(mags: &Tensor<f64>, start: usize, end: usize, s: usize) -> Tensor<f32> {
    let (bins, total) = (mags.dim(0), mags.dim(1));
    let mut out = Tensor::zeros(&[bins, s]);
    let d = out.data_mut();
    for b in 0..bins {
        for t in start..end {
            d[b * s + t - start] = mags.data()[b * total + t] as f32;
        }
    }
    out
}

/// Splits an utterance into non-overlapping `s`-frame windows.
///
/// Score and magnitudes are trimmed to the shorter of the two. The last
/// window is zero-padded; the first window's `prev` is all zeros.
pub fn make_segments(fs: &FrameScore, mags: &Tensor<f64>, s: usize) -> Result<Vec<Segment>> {
    mags.expect_rank(2, "segment magnitudes")?;
    if s == 0 {
        return arg_err("segment length must be positive");
    }
    let frames = fs.n_frames().min(mags.dim(1));
    if frames == 0 {
        return arg_err("cannot segment an empty utterance");
    }
    let fs = fs.slice_padded(0, frames);
    let bins = mags.dim(0);
    let mut prev = Tensor::zeros(&[bins, s]);
    let mut out = Vec::with_capacity(frames.div_ceil(s));
    for start in (0..frames).step_by(s) {
        let end = (start + s).min(frames);
        let target = window(mags, start, end, s);
        out.push(Segment {
            score: fs.slice_padded(start, start + s),
            prev: std::mem::replace(&mut prev, target.clone()),
            target,
            valid: end - start,
        });
    }
    Ok(out)
}
