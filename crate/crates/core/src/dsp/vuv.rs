use super::{AudioBuffer, HOP};
use crate::error::{arg_err, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VuvParams {
    /// Frames whose RMS is within this many dB of the loudest frame are voiced.
    pub rel_db_threshold: f64,
    /// Median filter width in frames (1 disables smoothing).
    pub smooth_frames: usize,
    /// RMS window, centered on each hop-grid frame.
    pub frame_length: usize,
    pub hop: usize,
}

impl Default for VuvParams {
    fn default() -> Self {
        Self {
            rel_db_threshold: -40.0,
            smooth_frames: 5,
            frame_length: 2 * HOP,
            hop: HOP,
        }
    }
}

/// Mute-threshold voice activity: `true` marks a voiced frame.
pub fn vuv_detect(a: &AudioBuffer, p: &VuvParams) -> Result<Vec<bool>> {
    if a.is_empty() {
        return arg_err("vuv_detect of empty audio");
    }
    if p.hop == 0 || p.frame_length == 0 {
        return arg_err("vuv_detect: hop and frame length must be positive");
    }
    let frames = 1 + a.len() / p.hop;
    let half = p.frame_length as isize / 2;
    let rms: Vec<f64> = (0..frames)
        .map(|t| {
            let start = (t * p.hop) as isize - half;
            let mut s = 0.0;
            for i in 0..p.frame_length as isize {
                let idx = start + i;
                if idx >= 0 && (idx as usize) < a.len() {
                    let v = a.samples[idx as usize];
                    s += v * v;
                }
            }
            (s / p.frame_length as f64).sqrt()
        })
        .collect();
    let loudest = rms.iter().fold(0.0f64, |m, &v| m.max(v));
    if loudest == 0.0 {
        return Ok(vec![false; frames]);
    }
    let ratio = 10f64.powf(p.rel_db_threshold / 20.0);
    let raw: Vec<bool> = rms.iter().map(|&r| r / loudest > ratio).collect();
    Ok(median_smooth(&raw, p.smooth_frames))
}

/// Median filter over a boolean sequence; windows are truncated at the ends
/// and ties keep the original value.
pub fn median_smooth(mask: &[bool], width: usize) -> Vec<bool> {
    if width <= 1 {
        return mask.to_vec();
    }
    let half = width / 2;
    (0..mask.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(mask.len());
            let on = mask[lo..hi].iter().filter(|&&v| v).count();
            let n = hi - lo;
            match (2 * on).cmp(&n) {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Less => false,
                std::cmp::Ordering::Equal => mask[i],
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn silence_is_all_unvoiced() {
        let m = vuv_detect(&AudioBuffer::silence(5000), &VuvParams::default()).unwrap();
        assert!(m.iter().all(|v| !v));
    }

    #[test]
    fn median_removes_single_dropout() {
        let mut mask = vec![true; 12];
        mask[6] = false;
        assert!(median_smooth(&mask, 5).iter().all(|&v| v));
    }

    #[test]
    fn empty_audio_is_rejected() {
        assert!(vuv_detect(&AudioBuffer::silence(0), &VuvParams::default()).is_err());
    }
}
