use crate::dsp::Spectrogram;
use crate::error::{arg_err, Result};
use crate::model::{acoustic_forward, ModelConfig, ModelParams};
use crate::score::FrameScore;
use crate::tensor::Tensor;

/// Autoregressive magnitudes `(bins, len(fs))`: each window's previous
/// spectrum is the model's own prediction for the window before (zeros for
/// the first).
pub fn infer_magnitudes(
    fs: &FrameScore,
    params: &ModelParams<f32>,
    model: &ModelConfig,
    segment_frames: usize,
) -> Result<Tensor<f64>> {
    if fs.is_empty() {
        return arg_err("cannot synthesize an empty score");
    }
    if segment_frames == 0 {
        return arg_err("segment length must be positive");
    }
    let (bins, total, s) = (model.bins, fs.n_frames(), segment_frames);
    let mut out = Tensor::<f64>::zeros(&[bins, total]);
    let mut prev = Tensor::<f32>::zeros(&[bins, s]);
    for start in (0..total).step_by(s) {
        let pred = acoustic_forward(&fs.slice_padded(start, start + s), &prev, params, model)?;
        let end = (start + s).min(total);
        let d = out.data_mut();
        for b in 0..bins {
            for t in start..end {
                d[b * total + t] = pred.data()[b * s + t - start] as f64;
            }
        }
        prev = pred;
    }
    Ok(out)
}

/// [`infer_magnitudes`] for full-resolution models.
pub fn infer_autoregressive(
    fs: &FrameScore,
    params: &ModelParams<f32>,
    model: &ModelConfig,
    segment_frames: usize,
) -> Result<Spectrogram> {
    Spectrogram::new(infer_magnitudes(fs, params, model, segment_frames)?)
}
