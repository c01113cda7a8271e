//! Score embedding, the two pre-nets, and the full acoustic model
//! `(FrameScore, previous spectrum) -> spectrum`.

use super::config::ModelConfig;
use super::params::{Grads, ModelParams};
use super::sunet::{sunet_backward_with, sunet_forward_cached, ClampGrad, SUNetCache};
use crate::error::{arg_err, dim_err, Error, Result};
use crate::score::FrameScore;
use crate::tensor::{
    activation, activation_backward, conv1d, conv1d_backward, dense, dense_backward, Activation,
    ConvSpec, Scalar, Tensor,
};

/// Per-frame phoneme and note embeddings stacked as `(288, T)`.
pub fn embed_score<T: Scalar>(
    fs: &FrameScore,
    params: &ModelParams<T>,
    cfg: &ModelConfig,
) -> Result<Tensor<T>> {
    let e = &cfg.embed;
    let (ph, nt) = (params.get("embed.phoneme")?, params.get("embed.note")?);
    let t_len = fs.n_frames();
    if fs.phoneme_ids.len() != t_len {
        return arg_err("frame score streams differ in length");
    }
    let d = e.concat_dim();
    let mut out = vec![T::zero(); d * t_len];
    for t in 0..t_len {
        let (p, n) = (fs.phoneme_ids[t], fs.note_ids[t]);
        if p >= e.phoneme_vocab {
            return Err(Error::Index(format!(
                "phoneme id {p} at frame {t} >= {}",
                e.phoneme_vocab
            )));
        }
        if n >= e.note_vocab {
            return Err(Error::Index(format!(
                "note id {n} at frame {t} >= {}",
                e.note_vocab
            )));
        }
        for r in 0..e.phoneme_dim {
            out[r * t_len + t] = ph.data()[p * e.phoneme_dim + r];
        }
        for r in 0..e.note_dim {
            out[(e.phoneme_dim + r) * t_len + t] = nt.data()[n * e.note_dim + r];
        }
    }
    Tensor::new(&[d, t_len], out)
}

fn embed_backward<T: Scalar>(
    fs: &FrameScore,
    cfg: &ModelConfig,
    g: &Tensor<T>,
    grads: &mut Grads<T>,
) -> Result<()> {
    let e = &cfg.embed;
    let t_len = fs.n_frames();
    let mut gp = Tensor::zeros(&[e.phoneme_vocab, e.phoneme_dim]);
    let mut gn = Tensor::zeros(&[e.note_vocab, e.note_dim]);
    for t in 0..t_len {
        let (p, n) = (fs.phoneme_ids[t], fs.note_ids[t]);
        for r in 0..e.phoneme_dim {
            let v = &mut gp.data_mut()[p * e.phoneme_dim + r];
            *v = *v + g.data()[r * t_len + t];
        }
        for r in 0..e.note_dim {
            let v = &mut gn.data_mut()[n * e.note_dim + r];
            *v = *v + g.data()[(e.phoneme_dim + r) * t_len + t];
        }
    }
    grads.accumulate("embed.phoneme", &gp)?;
    grads.accumulate("embed.note", &gn)
}

fn conv1d_spec<'a, T: Scalar>(p: &'a ModelParams<T>, name: &str) -> Result<ConvSpec<'a, T>> {
    let w = p.get(&format!("{name}.weight"))?;
    Ok(ConvSpec::new(
        w,
        Some(p.get(&format!("{name}.bias"))?),
        1,
        w.dim(2) / 2,
    ))
}

/// Two length-preserving 1-D convolutions with a leaky ReLU between.
#[derive(Clone, Debug)]
struct ConvPairCache<T: Scalar> {
    input: Tensor<T>,
    pre: Tensor<T>,
    act: Tensor<T>,
}

fn conv_pair<T: Scalar>(
    x: &Tensor<T>,
    params: &ModelParams<T>,
    prefix: &str,
    slope: f64,
) -> Result<(Tensor<T>, ConvPairCache<T>)> {
    let pre = conv1d(x, &conv1d_spec(params, &format!("{prefix}.conv1"))?)?;
    let act = activation(&pre, Activation::LeakyRelu(slope));
    let out = conv1d(&act, &conv1d_spec(params, &format!("{prefix}.conv2"))?)?;
    Ok((
        out,
        ConvPairCache {
            input: x.clone(),
            pre,
            act,
        },
    ))
}

fn conv_pair_backward<T: Scalar>(
    params: &ModelParams<T>,
    prefix: &str,
    slope: f64,
    c: &ConvPairCache<T>,
    g: &Tensor<T>,
    grads: &mut Grads<T>,
) -> Result<Tensor<T>> {
    let (n1, n2) = (format!("{prefix}.conv1"), format!("{prefix}.conv2"));
    let second = conv1d_backward(&c.act, &conv1d_spec(params, &n2)?, g)?;
    let gpre = activation_backward(&c.pre, &c.act, Activation::LeakyRelu(slope), &second.input)?;
    let first = conv1d_backward(&c.input, &conv1d_spec(params, &n1)?, &gpre)?;
    for (n, gr) in [(&n1, &first), (&n2, &second)] {
        grads.accumulate(&format!("{n}.weight"), &gr.weight)?;
        grads.accumulate(&format!("{n}.bias"), &gr.bias)?;
    }
    Ok(first.input)
}

#[derive(Clone, Debug)]
struct ScorePrenetCache<T: Scalar> {
    embedded_t: Tensor<T>,
    convs: ConvPairCache<T>,
}

fn score_prenet_cached<T: Scalar>(
    e: &Tensor<T>,
    params: &ModelParams<T>,
    cfg: &ModelConfig,
) -> Result<(Tensor<T>, ScorePrenetCache<T>)> {
    e.expect_rank(2, "score pre-net input")?;
    if e.dim(0) != cfg.embed.concat_dim() {
        return dim_err(format!(
            "score pre-net: {} features, expected {}",
            e.dim(0),
            cfg.embed.concat_dim()
        ));
    }
    let embedded_t = e.transpose2()?;
    let d = dense(
        &embedded_t,
        params.get("score.dense.weight")?,
        params.get("score.dense.bias")?,
    )?;
    let (out, convs) = conv_pair(&d.transpose2()?, params, "score", cfg.sunet.leaky_slope)?;
    Ok((out, ScorePrenetCache { embedded_t, convs }))
}

/// Dense `288 -> bins` per frame, then two `bins -> bins` 1-D convolutions
/// (kernel 5, padding 2) with a leaky ReLU between.
pub fn score_prenet<T: Scalar>(
    e: &Tensor<T>,
    params: &ModelParams<T>,
    cfg: &ModelConfig,
) -> Result<Tensor<T>> {
    Ok(score_prenet_cached(e, params, cfg)?.0)
}

/// Two `bins -> bins` 1-D convolutions with a leaky ReLU between.
pub fn spec_prenet<T: Scalar>(
    prev: &Tensor<T>,
    params: &ModelParams<T>,
    cfg: &ModelConfig,
) -> Result<Tensor<T>> {
    check_spectrum(prev, cfg)?;
    Ok(conv_pair(prev, params, "spec", cfg.sunet.leaky_slope)?.0)
}

fn check_spectrum<T: Scalar>(s: &Tensor<T>, cfg: &ModelConfig) -> Result<()> {
    s.expect_rank(2, "spectrum segment")?;
    if s.dim(0) != cfg.bins {
        return dim_err(format!(
            "spectrum has {} bins, expected {}",
            s.dim(0),
            cfg.bins
        ));
    }
    Ok(())
}

/// Everything [`acoustic_backward`] needs.
#[derive(Clone, Debug)]
pub struct AcousticCache<T: Scalar> {
    score: FrameScore,
    score_prenet: ScorePrenetCache<T>,
    spec_prenet: ConvPairCache<T>,
    sunet: SUNetCache<T>,
}

/// Predicts a `(bins, T)` spectrum from a score segment and the previous
/// spectrum segment.
pub fn acoustic_forward<T: Scalar>(
    fs: &FrameScore,
    prev: &Tensor<T>,
    params: &ModelParams<T>,
    cfg: &ModelConfig,
) -> Result<Tensor<T>> {
    Ok(acoustic_forward_cached(fs, prev, params, cfg)?.0)
}

pub fn acoustic_forward_cached<T: Scalar>(
    fs: &FrameScore,
    prev: &Tensor<T>,
    params: &ModelParams<T>,
    cfg: &ModelConfig,
) -> Result<(Tensor<T>, AcousticCache<T>)> {
    check_spectrum(prev, cfg)?;
    let t_len = prev.dim(1);
    if fs.n_frames() != t_len {
        return arg_err(format!(
            "score has {} frames, previous spectrum {t_len}",
            fs.n_frames()
        ));
    }
    let e = embed_score(fs, params, cfg)?;
    let (s, score_cache) = score_prenet_cached(&e, params, cfg)?;
    let (p, spec_cache) = conv_pair(prev, params, "spec", cfg.sunet.leaky_slope)?;
    let b = cfg.bins;
    let x = Tensor::concat0(&[&s.reshape(&[1, b, t_len])?, &p.reshape(&[1, b, t_len])?])?;
    let (y, sunet) = sunet_forward_cached(&x, params, &cfg.sunet)?;
    Ok((
        y.reshape(&[b, t_len])?,
        AcousticCache {
            score: fs.clone(),
            score_prenet: score_cache,
            spec_prenet: spec_cache,
            sunet,
        },
    ))
}

/// Gradients of all parameters given the upstream gradient of the
/// predicted spectrum.
pub fn acoustic_backward<T: Scalar>(
    params: &ModelParams<T>,
    cfg: &ModelConfig,
    cache: &AcousticCache<T>,
    grad_out: &Tensor<T>,
) -> Result<Grads<T>> {
    acoustic_backward_with(params, cfg, cache, grad_out, ClampGrad::Exact)
}

/// [`acoustic_backward`] with a choice of output-clamp derivative.
pub fn acoustic_backward_with<T: Scalar>(
    params: &ModelParams<T>,
    cfg: &ModelConfig,
    cache: &AcousticCache<T>,
    grad_out: &Tensor<T>,
    clamp: ClampGrad,
) -> Result<Grads<T>> {
    let (b, t_len) = (cfg.bins, cache.score.n_frames());
    if grad_out.shape() != [b, t_len] {
        return dim_err(format!(
            "acoustic backward: gradient {:?}, expected {:?}",
            grad_out.shape(),
            [b, t_len]
        ));
    }
    let mut grads = ModelParams::new();
    let g = grad_out.clone().reshape(&[1, b, t_len])?;
    let gx = sunet_backward_with(params, &cfg.sunet, &cache.sunet, &g, clamp, &mut grads)?;
    let mut planes = gx.split0(&[1, 1])?;
    let gp = planes.pop().expect("two planes").reshape(&[b, t_len])?;
    let gs = planes.pop().expect("two planes").reshape(&[b, t_len])?;
    let slope = cfg.sunet.leaky_slope;
    conv_pair_backward(params, "spec", slope, &cache.spec_prenet, &gp, &mut grads)?;
    let gd = conv_pair_backward(
        params,
        "score",
        slope,
        &cache.score_prenet.convs,
        &gs,
        &mut grads,
    )?;
    let dg = dense_backward(
        &cache.score_prenet.embedded_t,
        params.get("score.dense.weight")?,
        params.get("score.dense.bias")?,
        &gd.transpose2()?,
    )?;
    grads.accumulate("score.dense.weight", &dg.weight)?;
    grads.accumulate("score.dense.bias", &dg.bias)?;
    embed_backward(&cache.score, cfg, &dg.input.transpose2()?, &mut grads)?;
    Ok(grads)
}
