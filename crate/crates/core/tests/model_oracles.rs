use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use susing_core::model::*;
use susing_core::score::FrameScore;
use susing_core::tensor::gradcheck::check_gradient;
use susing_core::Tensor;

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn stripe_params(c: usize, k: usize, rng: &mut ChaCha8Rng) -> ModelParams<f64> {
    let mut p = ModelParams::new();
    p.insert("s.conv_h.weight", Tensor::randn(&[c, c, k], 0.5, rng));
    p.insert("s.conv_h.bias", Tensor::randn(&[c], 0.5, rng));
    p.insert("s.conv_v.weight", Tensor::randn(&[c, c, k], 0.5, rng));
    p.insert("s.conv_v.bias", Tensor::randn(&[c], 0.5, rng));
    p.insert("s.fuse.weight", Tensor::randn(&[c, c, 1, 1], 0.5, rng));
    p.insert("s.fuse.bias", Tensor::randn(&[c], 0.5, rng));
    p
}

/// Direct loops: row/column means, 1-D convolutions, fusion and gate.
fn stripe_oracle(x: &Tensor<f64>, p: &ModelParams<f64>) -> Vec<f64> {
    let (c, h, w) = (x.dim(0), x.dim(1), x.dim(2));
    let at = |ch: usize, i: usize, j: usize| x.data()[(ch * h + i) * w + j];
    let g = |n: &str| p.get(n).unwrap().data().to_vec();
    let (wh, bh, wv, bv, wf, bf) = (
        g("s.conv_h.weight"),
        g("s.conv_h.bias"),
        g("s.conv_v.weight"),
        g("s.conv_v.bias"),
        g("s.fuse.weight"),
        g("s.fuse.bias"),
    );
    let k = p.get("s.conv_h.weight").unwrap().dim(2);
    let pad = (k / 2) as isize;
    // row and column means
    let mut xh = vec![vec![0.0; h]; c];
    let mut xv = vec![vec![0.0; w]; c];
    for ch in 0..c {
        for i in 0..h {
            xh[ch][i] = (0..w).map(|j| at(ch, i, j)).sum::<f64>() / w as f64;
        }
        for j in 0..w {
            xv[ch][j] = (0..h).map(|i| at(ch, i, j)).sum::<f64>() / h as f64;
        }
    }
    // 1-D convolutions along each stripe direction
    let conv = |src: &Vec<Vec<f64>>, wt: &[f64], b: &[f64], len: usize| {
        let mut out = vec![vec![0.0; len]; c];
        for o in 0..c {
            for n in 0..len {
                let mut acc = b[o];
                for ci in 0..c {
                    for t in 0..k {
                        let idx = n as isize + t as isize - pad;
                        if idx >= 0 && (idx as usize) < len {
                            acc += wt[(o * c + ci) * k + t] * src[ci][idx as usize];
                        }
                    }
                }
                out[o][n] = acc;
            }
        }
        out
    };
    let yh = conv(&xh, &wh, &bh, h);
    let yv = conv(&xv, &wv, &bv, w);
    let mut z = vec![0.0; c * h * w];
    for o in 0..c {
        for i in 0..h {
            for j in 0..w {
                let mut f = bf[o];
                for ci in 0..c {
                    f += wf[o * c + ci] * (yh[ci][i] + yv[ci][j]);
                }
                z[(o * h + i) * w + j] = at(o, i, j) * sigmoid(f);
            }
        }
    }
    z
}

#[test]
fn stripe_pool_matches_loop_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut shapes = vec![
        (2, 6, 5),
        (1, 1, 1),
        (3, 1, 7),
        (3, 7, 1),
        (1, 1, 9),
        (2, 9, 1),
    ];
    while shapes.len() < 24 {
        shapes.push((
            rng.random_range(1..5),
            rng.random_range(1..12),
            rng.random_range(1..12),
        ));
    }
    for (c, h, w) in shapes {
        let p = stripe_params(c, 3, &mut rng);
        let sp = StripePoolParams::from_params(&p, "s").unwrap();
        let x = Tensor::randn(&[c, h, w], 1.0, &mut rng);
        let z = stripe_pool(&x, &sp).unwrap();
        assert_eq!(z.shape(), x.shape());
        let oracle = stripe_oracle(&x, &p);
        let err = z
            .data()
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "{c}x{h}x{w}: {err}");
    }
}

#[test]
fn stripe_pool_identity_weights_give_constant_gate() {
    let c = 3;
    let mut p = ModelParams::<f64>::new();
    let mut eye1 = Tensor::zeros(&[c, c, 3]);
    let mut eye2 = Tensor::zeros(&[c, c, 1, 1]);
    for i in 0..c {
        eye1.data_mut()[(i * c + i) * 3 + 1] = 1.0;
        eye2.data_mut()[i * c + i] = 1.0;
    }
    p.insert("s.conv_h.weight", eye1.clone());
    p.insert("s.conv_v.weight", eye1);
    p.insert("s.fuse.weight", eye2);
    for n in ["s.conv_h.bias", "s.conv_v.bias", "s.fuse.bias"] {
        p.insert(n, Tensor::zeros(&[c]));
    }
    let sp = StripePoolParams::from_params(&p, "s").unwrap();
    for cval in [-1.5, 0.3, 2.0] {
        let x = Tensor::full(&[c, 4, 6], cval);
        let z = stripe_pool(&x, &sp).unwrap();
        let want = cval * sigmoid(2.0 * cval);
        assert!(z.data().iter().all(|&v| (v - want).abs() < 1e-12));
    }
}

#[test]
fn stripe_pool_rejects_channel_mismatch() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = stripe_params(2, 3, &mut rng);
    let sp = StripePoolParams::from_params(&p, "s").unwrap();
    assert!(stripe_pool(&Tensor::zeros(&[3, 4, 4]), &sp).is_err());
}

proptest! {
    #[test]
    fn stripe_gate_shrinks_every_nonzero_entry(
        c in 1usize..4, h in 1usize..9, w in 1usize..9, seed in 0u64..10_000, scale in 0.01f64..20.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = stripe_params(c, 3, &mut rng);
        let sp = StripePoolParams::from_params(&p, "s").unwrap();
        let x = Tensor::randn(&[c, h, w], scale, &mut rng);
        let z = stripe_pool(&x, &sp).unwrap();
        for (a, b) in x.data().iter().zip(z.data()) {
            if *a != 0.0 {
                prop_assert!(b.abs() < a.abs());
            } else {
                prop_assert_eq!(*b, 0.0);
            }
        }
    }
}

#[test]
fn stripe_pool_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = stripe_params(2, 3, &mut rng);
    let x = Tensor::randn(&[2, 6, 5], 1.0, &mut rng);
    let sp = StripePoolParams::from_params(&p, "s").unwrap();
    let (z, cache) = stripe_pool_forward(&x, &sp).unwrap();
    let g = stripe_pool_backward(&sp, &cache, &Tensor::full(z.shape(), 1.0)).unwrap();
    let rep = check_gradient(|xp| Ok(stripe_pool(xp, &sp)?.sum()), &x, &g.input, 1e-5).unwrap();
    assert!(rep.max_rel_error < 1e-4, "{rep:?}");

    let mut grads = ModelParams::new();
    g.accumulate_into(&mut grads, "s").unwrap();
    for name in p.names() {
        let rep = check_gradient(
            |t| {
                let mut q = p.clone();
                q.insert(name.clone(), t.clone());
                let sp = StripePoolParams::from_params(&q, "s")?;
                Ok(stripe_pool(&x, &sp)?.sum())
            },
            p.get(name).unwrap(),
            grads.get(name).unwrap(),
            1e-5,
        )
        .unwrap();
        assert!(rep.max_rel_error < 1e-4, "{name}: {rep:?}");
    }
}

#[test]
fn gradient_suite_passes_for_seed_3() {
    let rows = gradient_suite(3).unwrap();
    for r in &rows {
        eprintln!(
            "{:<18} {:>6} {:.3e} ({})",
            r.op, r.coords, r.max_rel_error, r.worst
        );
    }
    let ops: Vec<&str> = rows.iter().map(|r| r.op.as_str()).collect();
    for op in [
        "conv2d",
        "transposed_conv2d",
        "conv1d",
        "dense",
        "relu",
        "leaky_relu",
        "sigmoid",
        "stripe_pool",
        "sunet_mini",
    ] {
        assert!(ops.contains(&op), "{op} missing");
    }
    assert!(rows.iter().all(|r| r.passed()), "{rows:?}");
}

#[test]
fn full_size_pyramid_and_channels() {
    let cfg = SUNetConfig::default();
    let model = ModelConfig::default();
    let params = ModelParams::<f32>::init(&model, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = Tensor::<f32>::randn(&[2, 513, 128], 1.0, &mut rng);
    let out = sunet_forward(&x, &params, &cfg).unwrap();
    let heights: Vec<usize> = out.down_sizes.iter().map(|s| s.0).collect();
    assert_eq!(heights, [257, 129, 65, 33, 17, 9, 5]);
    let widths: Vec<usize> = out.down_sizes.iter().map(|s| s.1).collect();
    assert_eq!(widths, [64, 32, 16, 8, 4, 2, 1]);
    assert_eq!(out.down_channels, [16, 32, 64, 128, 256, 512, 512]);
    // up path mirrors: sizes before each down layer, bottom to top
    let mut mirror: Vec<(usize, usize)> = vec![(513, 128)];
    mirror.extend(out.down_sizes[..6].iter().copied());
    mirror.reverse();
    assert_eq!(out.up_sizes, mirror);
    assert_eq!(out.up_channels, [512, 256, 128, 64, 32, 16, 16]);
    assert_eq!(out.output.shape(), &[1, 513, 128]);
    assert!(out.output.data().iter().all(|&v| v >= 0.0));
}

#[test]
fn output_shape_for_any_length() {
    let model = ModelConfig::default();
    let params = ModelParams::<f32>::init(&model, 0).unwrap();
    for t in [1usize, 7, 64, 128] {
        let x = Tensor::<f32>::full(&[2, 513, t], 0.5);
        for (stripe, skips) in [(true, true), (false, false), (true, false), (false, true)] {
            let cfg = SUNetConfig {
                use_stripe: stripe,
                use_skips: skips,
                ..Default::default()
            };
            let m = ModelConfig {
                sunet: cfg,
                ..model
            };
            let p = if stripe && skips {
                params.clone()
            } else {
                ModelParams::init(&m, 0).unwrap()
            };
            let y = sunet_forward(&x, &p, &cfg).unwrap().output;
            assert_eq!(
                y.shape(),
                &[1, 513, t],
                "T={t} stripe={stripe} skips={skips}"
            );
        }
    }
}

#[test]
fn ablation_parameter_counts_are_monotone() {
    let full = ModelConfig::default();
    let no_stripe = ModelConfig {
        sunet: SUNetConfig {
            use_stripe: false,
            ..full.sunet
        },
        ..full
    };
    let no_skips = ModelConfig {
        sunet: SUNetConfig {
            use_skips: false,
            ..full.sunet
        },
        ..full
    };
    assert!(full.n_params() > no_stripe.n_params());
    assert!(full.n_params() > no_skips.n_params());
}

fn score(n: usize, rng: &mut ChaCha8Rng) -> FrameScore {
    FrameScore::new(
        (0..n).map(|_| rng.random_range(0..129)).collect(),
        (0..n).map(|_| rng.random_range(0..35)).collect(),
    )
    .unwrap()
}

#[test]
fn embedding_layout() {
    let cfg = ModelConfig::default();
    let p = ModelParams::<f64>::init(&cfg, 4).unwrap();
    let one = FrameScore::new(vec![61], vec![3]).unwrap();
    assert_eq!(embed_score(&one, &p, &cfg).unwrap().shape(), &[288, 1]);

    let two = FrameScore::new(vec![61, 61], vec![3, 3]).unwrap();
    let e = embed_score(&two, &p, &cfg).unwrap();
    for r in 0..288 {
        assert_eq!(e.data()[r * 2], e.data()[r * 2 + 1]);
    }
    let other = FrameScore::new(vec![61, 70], vec![3, 3]).unwrap();
    let f = embed_score(&other, &p, &cfg).unwrap();
    for r in 0..288 {
        let same = e.data()[r * 2 + 1] == f.data()[r * 2 + 1];
        assert_eq!(same, r < 256, "row {r}");
    }
    let bad = FrameScore::new(vec![0], vec![35]).unwrap();
    assert!(matches!(
        embed_score(&bad, &p, &cfg),
        Err(susing_core::Error::Index(_))
    ));
}

fn naive_conv1d(x: &[f64], len: usize, w: &Tensor<f64>, b: &Tensor<f64>) -> Vec<f64> {
    let (co, ci, k) = (w.dim(0), w.dim(1), w.dim(2));
    let pad = (k / 2) as isize;
    let mut y = vec![0.0; co * len];
    for o in 0..co {
        for n in 0..len {
            let mut acc = b.data()[o];
            for c in 0..ci {
                for t in 0..k {
                    let idx = n as isize + t as isize - pad;
                    if idx >= 0 && (idx as usize) < len {
                        acc += w.data()[(o * ci + c) * k + t] * x[c * len + idx as usize];
                    }
                }
            }
            y[o * len + n] = acc;
        }
    }
    y
}

fn leaky(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.2 * v
    }
}

#[test]
fn prenets_match_composed_oracles() {
    let cfg = ModelConfig {
        bins: 40,
        ..Default::default()
    };
    let p = ModelParams::<f64>::init(&cfg, 6).unwrap();
    let mut p2 = p.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (name, t) in p2.iter_mut() {
        if name.ends_with(".bias") {
            *t = Tensor::randn(t.shape(), 0.3, &mut rng);
        }
    }
    let t_len = 11;
    let e = Tensor::randn(&[288, t_len], 1.0, &mut rng);
    let g = |n: &str| p2.get(n).unwrap();
    // dense per frame
    let (wd, bd) = (g("score.dense.weight"), g("score.dense.bias"));
    let mut d = vec![0.0; 40 * t_len];
    for o in 0..40 {
        for t in 0..t_len {
            d[o * t_len + t] = bd.data()[o]
                + (0..288)
                    .map(|i| wd.data()[o * 288 + i] * e.data()[i * t_len + t])
                    .sum::<f64>();
        }
    }
    let a: Vec<f64> = naive_conv1d(&d, t_len, g("score.conv1.weight"), g("score.conv1.bias"))
        .into_iter()
        .map(leaky)
        .collect();
    let want = naive_conv1d(&a, t_len, g("score.conv2.weight"), g("score.conv2.bias"));
    let got = score_prenet(&e, &p2, &cfg).unwrap();
    assert_eq!(got.shape(), &[40, t_len]);
    let err = got
        .data()
        .iter()
        .zip(&want)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-10, "{err}");

    let prev = Tensor::randn(&[40, t_len], 1.0, &mut rng);
    let a: Vec<f64> = naive_conv1d(
        prev.data(),
        t_len,
        g("spec.conv1.weight"),
        g("spec.conv1.bias"),
    )
    .into_iter()
    .map(leaky)
    .collect();
    let want = naive_conv1d(&a, t_len, g("spec.conv2.weight"), g("spec.conv2.bias"));
    let got = spec_prenet(&prev, &p2, &cfg).unwrap();
    let err = got
        .data()
        .iter()
        .zip(&want)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-10, "{err}");
    assert!(spec_prenet(&Tensor::zeros(&[41, 3]), &p2, &cfg).is_err());

    // zero input and zero biases give zero output
    let z = score_prenet(&Tensor::zeros(&[288, 5]), &p, &cfg).unwrap();
    assert!(z.data().iter().all(|&v| v == 0.0));
    let z = spec_prenet(&Tensor::zeros(&[40, 5]), &p, &cfg).unwrap();
    assert!(z.data().iter().all(|&v| v == 0.0));
}

#[test]
fn acoustic_model_contract() {
    let cfg = ModelConfig::default();
    let p = ModelParams::<f32>::init(&cfg, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let fs = score(128, &mut rng);
    let prev = Tensor::<f32>::rand_uniform(&[513, 128], 0.0, 2.0, &mut rng);
    let y = acoustic_forward(&fs, &prev, &p, &cfg).unwrap();
    assert_eq!(y.shape(), &[513, 128]);
    assert!(y.data().iter().all(|&v| v >= 0.0));
    assert_eq!(y, acoustic_forward(&fs, &prev, &p, &cfg).unwrap());
    let zero = ModelParams::<f32>::zeros(&cfg);
    let y0 = acoustic_forward(&fs, &prev, &zero, &cfg).unwrap();
    assert!(y0.data().iter().all(|&v| v == 0.0));
    assert!(acoustic_forward(&score(127, &mut rng), &prev, &p, &cfg).is_err());
}
