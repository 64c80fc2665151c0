mod common;

use common::{rand_tensor, rng};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use waveforge::autodiff::{Tape, Var};
use waveforge::data::{gen_sinusoid_toy, EpochDataset, PhaseMode, SAMPLE_RATE};
use waveforge::experiment::init_models;
use waveforge::layers::softmax_cross_entropy;
use waveforge::models::{ModelSpec, UpsampleScheme, Variant};
use waveforge::training::{
    gradient_penalty, interpolate, loss_classifier, loss_discriminator, loss_generator, loss_generator_cc, train,
    wasserstein_estimate, write_log_csv, Adam, TrainConfig, Trainer, LOG_HEADER,
};
use waveforge::{Error, Result, Tensor};

fn var(tape: &Tape, shape: &[usize], data: Vec<f64>) -> Var {
    tape.constant(Tensor::new(shape.to_vec(), data).unwrap())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn wasserstein_estimate_is_difference_of_means() {
    assert_eq!(wasserstein_estimate(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 1.0);
    assert_eq!(wasserstein_estimate(&[0.3, -2.0], &[0.3, -2.0]).unwrap(), 0.0);
    let mut r = rng(1);
    let a: Vec<f64> = (0..17).map(|_| r.random_range(-3.0..3.0)).collect();
    let b: Vec<f64> = (0..17).map(|_| r.random_range(-3.0..3.0)).collect();
    let w = wasserstein_estimate(&a, &b).unwrap();
    assert!((w - (mean(&a) - mean(&b))).abs() < 1e-12);
    assert!(wasserstein_estimate(&[], &[]).is_err());
    assert!(wasserstein_estimate(&[1.0], &[1.0, 2.0]).is_err());
}

#[test]
fn discriminator_loss_cases() {
    let tape = Tape::new();
    let m = 2.5;
    let real = var(&tape, &[3, 1], vec![m; 3]);
    let fake = var(&tape, &[3, 1], vec![0.0; 3]);
    let zero = tape.constant(Tensor::scalar(0.0));
    assert_eq!(loss_discriminator(&real, &fake, &zero, 10.0).unwrap().item().unwrap(), -m);

    let mut r = rng(2);
    let a: Vec<f64> = (0..8).map(|_| r.random_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..8).map(|_| r.random_range(-1.0..1.0)).collect();
    let (dr, df) = (var(&tape, &[8, 1], a.clone()), var(&tape, &[8, 1], b.clone()));
    let gp = tape.constant(Tensor::scalar(0.37));
    let l0 = loss_discriminator(&dr, &df, &gp, 0.0).unwrap().item().unwrap();
    assert!((l0 + wasserstein_estimate(&a, &b).unwrap()).abs() < 1e-12);
    let l = loss_discriminator(&dr, &df, &gp, 10.0).unwrap().item().unwrap();
    assert!((l - (mean(&b) - mean(&a) + 10.0 * 0.37)).abs() < 1e-12);
}

#[test]
fn generator_loss_cases() {
    let tape = Tape::new();
    let df = var(&tape, &[2, 1], vec![5.0, 5.0]);
    assert_eq!(loss_generator(&df).unwrap().item().unwrap(), -5.0);

    // confidently correct logits: cross-entropy vanishes
    let logits = var(&tape, &[2, 2], vec![60.0, -60.0, -60.0, 60.0]);
    let cc = loss_generator_cc(&df, &logits, &[0, 1]).unwrap().item().unwrap();
    assert!((cc + 5.0).abs() < 1e-12);

    let mut r = rng(3);
    let lg = rand_tensor(&[5, 3], &mut r);
    let labels = [0, 2, 1, 1, 0];
    let scores = rand_tensor(&[5, 1], &mut r);
    let ce = cross_entropy(&lg, &labels);
    let got = loss_generator_cc(&tape.constant(scores.clone()), &tape.constant(lg), &labels)
        .unwrap()
        .item()
        .unwrap();
    assert!((got - (-mean(scores.data()) + ce)).abs() < 1e-12);
    assert!(loss_generator_cc(&df, &logits, &[0]).is_err());
}

/// Independent mean cross-entropy.
fn cross_entropy(logits: &Tensor, labels: &[usize]) -> f64 {
    let k = logits.shape()[1];
    let rows: Vec<f64> = logits
        .data()
        .chunks(k)
        .zip(labels)
        .map(|(row, &y)| {
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = mx + row.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
            lse - row[y]
        })
        .collect();
    mean(&rows)
}

#[test]
fn classifier_loss_cases() {
    let tape = Tape::new();
    let uniform = var(&tape, &[4, 2], vec![0.0; 8]);
    let l = loss_classifier(&uniform, &[0, 1, 0, 1], &uniform, &[1, 1, 0, 0]).unwrap().item().unwrap();
    assert!((l - 2.0 * 2f64.ln()).abs() < 1e-12);

    let sure = var(&tape, &[2, 2], vec![50.0, -50.0, -50.0, 50.0]);
    assert!(loss_classifier(&sure, &[0, 1], &sure, &[0, 1]).unwrap().item().unwrap() < 1e-12);

    let mut r = rng(4);
    let (a, b) = (rand_tensor(&[6, 2], &mut r), rand_tensor(&[3, 2], &mut r));
    let (ya, yb) = ([0, 1, 1, 0, 1, 0], [1, 0, 0]);
    let got = loss_classifier(&tape.constant(a.clone()), &ya, &tape.constant(b.clone()), &yb)
        .unwrap()
        .item()
        .unwrap();
    assert!((got - (cross_entropy(&a, &ya) + cross_entropy(&b, &yb))).abs() < 1e-12);
    let direct = softmax_cross_entropy(&tape.constant(a.clone()), &ya).unwrap().item().unwrap();
    assert!((direct - cross_entropy(&a, &ya)).abs() < 1e-12);
    assert!(loss_classifier(&sure, &[0], &sure, &[0, 1]).is_err());
}

fn linear_critic(a: Vec<f64>) -> impl FnMut(&Var) -> Result<Var> {
    move |x: &Var| {
        let b = x.shape()[0];
        let n = x.value().numel() / b;
        let w = x.tape().constant(Tensor::new(vec![n, 1], a.clone())?);
        x.reshape(&[b, n])?.matmul(&w)
    }
}

fn batch_pair(seed: u64) -> (Tape, Var, Var) {
    let mut r = rng(seed);
    let tape = Tape::new();
    let xr = tape.constant(rand_tensor(&[6, 1, 1, 64], &mut r));
    let xf = tape.constant(rand_tensor(&[6, 1, 1, 64], &mut r));
    (tape, xr, xf)
}

#[test]
fn penalty_of_unit_norm_linear_critic_is_zero() {
    let (_tape, xr, xf) = batch_pair(5);
    let mut r = rng(6);
    let a: Vec<f64> = (0..64).map(|_| r.random_range(-1.0..1.0)).collect();
    let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let a: Vec<f64> = a.iter().map(|v| v / norm).collect();
    let gp = gradient_penalty(linear_critic(a), &xr, &xf, &mut r).unwrap().item().unwrap();
    assert!(gp.abs() < 1e-10, "{gp}");
}

#[test]
fn penalty_of_zero_critic_is_one() {
    let (_tape, xr, xf) = batch_pair(7);
    let gp = gradient_penalty(linear_critic(vec![0.0; 64]), &xr, &xf, &mut rng(8)).unwrap().item().unwrap();
    assert!((gp - 1.0).abs() < 1e-10, "{gp}");
}

#[test]
fn penalty_scales_with_gradient_norm() {
    // ‖a‖ = 3 everywhere: (3 - 1)^2 = 4
    let (_tape, xr, xf) = batch_pair(9);
    let mut a = vec![0.0; 64];
    a[10] = 3.0;
    let gp = gradient_penalty(linear_critic(a), &xr, &xf, &mut rng(1)).unwrap().item().unwrap();
    assert!((gp - 4.0).abs() < 1e-10);
}

#[test]
fn penalty_rejects_mismatched_batches() {
    let tape = Tape::new();
    let mut r = rng(1);
    let xr = tape.constant(rand_tensor(&[2, 1, 1, 64], &mut r));
    let xf = tape.constant(rand_tensor(&[3, 1, 1, 64], &mut r));
    assert!(gradient_penalty(linear_critic(vec![1.0; 64]), &xr, &xf, &mut r).is_err());
}

proptest! {
    #[test]
    fn interpolates_lie_between_endpoints(seed in 0u64..1000, b in 1usize..5) {
        let mut r = rng(seed);
        let xr = rand_tensor(&[b, 1, 1, 8], &mut r);
        let xf = rand_tensor(&[b, 1, 1, 8], &mut r);
        let eps: Vec<f64> = (0..b).map(|_| r.random::<f64>()).collect();
        let xh = interpolate(&xr, &xf, &eps).unwrap();
        for (i, ((h, a), c)) in xh.data().iter().zip(xr.data()).zip(xf.data()).enumerate() {
            prop_assert!(*h >= a.min(*c) - 1e-15 && *h <= a.max(*c) + 1e-15);
            // one ε per sample, shared by its coordinates
            let e = eps[i / 8];
            prop_assert!((h - (e * a + (1.0 - e) * c)).abs() < 1e-15);
        }
    }

    #[test]
    fn penalty_is_non_negative(seed in 0u64..1000) {
        let (_tape, xr, xf) = batch_pair(seed);
        let mut r = rng(seed + 1);
        let a: Vec<f64> = (0..64).map(|_| r.random_range(-0.3..0.3)).collect();
        let gp = gradient_penalty(linear_critic(a), &xr, &xf, &mut r).unwrap().item().unwrap();
        prop_assert!(gp >= 0.0);
    }
}

#[test]
fn adam_first_step_moves_by_learning_rate() {
    let mut opt = Adam::new(0.1, (0.9, 0.999), 1e-8);
    let mut p = [1.0];
    opt.update(&mut [&mut p[..]], &[&[1.0][..]]).unwrap();
    assert!((p[0] - (1.0 - 0.1 / (1.0 + 1e-8))).abs() < 1e-15);
}

#[test]
fn adam_matches_hand_rolled_trajectory() {
    let (lr, b1, b2, eps) = (0.05, 0.5, 0.9, 1e-8);
    let grads = [0.3, -1.2, 2.0, 0.0, 0.7];
    let mut opt = Adam::new(lr, (b1, b2), eps);
    let mut p = [0.4];
    let (mut q, mut m, mut v) = (0.4f64, 0.0f64, 0.0f64);
    for (t, g) in grads.iter().enumerate() {
        opt.update(&mut [&mut p[..]], &[&[*g][..]]).unwrap();
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let k = (t + 1) as i32;
        q -= lr * (m / (1.0 - b1.powi(k))) / ((v / (1.0 - b2.powi(k))).sqrt() + eps);
        assert!((p[0] - q).abs() < 1e-14);
    }
    assert_eq!(opt.steps(), 5);
}

#[test]
fn adam_zero_gradient_leaves_parameters() {
    let mut opt = Adam::new(0.1, (0.0, 0.9), 1e-8);
    let mut p = [0.5, -2.0];
    opt.update(&mut [&mut p[..]], &[&[0.0, 0.0][..]]).unwrap();
    assert_eq!(p, [0.5, -2.0]);
}

#[test]
fn adam_rejects_non_finite_gradient_without_mutating() {
    let mut opt = Adam::new(0.1, (0.0, 0.9), 1e-8);
    let mut p = [0.5, 1.0];
    let err = opt.update(&mut [&mut p[..]], &[&[1.0, f64::NAN][..]]).unwrap_err();
    assert!(matches!(err, Error::NonFinite { .. }));
    assert_eq!(p, [0.5, 1.0]);
    assert_eq!(opt.steps(), 0);
}

#[test]
fn linear_critic_loss_decreases_without_penalty() {
    let mut r = rng(12);
    let real = rand_tensor(&[16, 8], &mut r);
    let fake = rand_tensor(&[16, 8], &mut r);
    let mut w = vec![0.0; 8];
    let mut opt = Adam::new(1e-2, (0.0, 0.9), 1e-8);
    let mut last = f64::INFINITY;
    for _ in 0..20 {
        let tape = Tape::new();
        let wv = tape.leaf(Tensor::new(vec![8, 1], w.clone()).unwrap().with_requires_grad(true));
        let dr = tape.constant(real.clone()).matmul(&wv).unwrap();
        let df = tape.constant(fake.clone()).matmul(&wv).unwrap();
        let zero = tape.constant(Tensor::scalar(0.0));
        let loss = loss_discriminator(&dr, &df, &zero, 0.0).unwrap();
        let l = loss.item().unwrap();
        assert!(l < last, "{l} !< {last}");
        last = l;
        loss.backward().unwrap();
        let g = wv.grad().unwrap();
        opt.update(&mut [&mut w[..]], &[g.data()]).unwrap();
    }
}

fn small_spec(variant: Variant) -> ModelSpec {
    ModelSpec {
        latent_dim: 16,
        ..ModelSpec::new(variant).with_width_scale(0.125).with_scheme(UpsampleScheme::BcDcbl)
    }
}

fn small_cfg(seed: u64) -> TrainConfig {
    TrainConfig {
        latent_dim: 16,
        batch_size: 16,
        max_steps: 4,
        eval_every: 2,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn zero_steps_returns_initial_state() {
    let data = gen_sinusoid_toy(40, 5.0, 1.0, 1.0, PhaseMode::Random, 1).unwrap();
    let spec = small_spec(Variant::Gen1ch);
    let (g, c) = init_models(&spec, 1).unwrap();
    let before = g.params.clone();
    let t = train(g, c, &data, TrainConfig { max_steps: 0, ..small_cfg(1) }).unwrap();
    assert_eq!(t.state.step, 0);
    assert!(t.state.best_auc.is_none() && t.state.best_checkpoint.is_none());
    assert!(t.state.log.is_empty());
    assert_eq!(t.generator.params, before);
}

#[test]
fn training_is_deterministic() {
    let data = gen_sinusoid_toy(40, 5.0, 1.0, 1.0, PhaseMode::Random, 1).unwrap();
    let run = || {
        let (g, c) = init_models(&small_spec(Variant::Gen1ch), 3).unwrap();
        let t = train(g, c, &data, small_cfg(3)).unwrap();
        let mut log = Vec::new();
        write_log_csv(&mut log, &t.state.log).unwrap();
        (t.generator.params.clone(), t.critic.params.clone(), log)
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    let text = String::from_utf8(a.2).unwrap();
    assert_eq!(text.lines().next(), Some(LOG_HEADER));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn different_seeds_diverge() {
    let data = gen_sinusoid_toy(40, 5.0, 1.0, 1.0, PhaseMode::Random, 1).unwrap();
    let run = |s| {
        let (g, c) = init_models(&small_spec(Variant::Gen1ch), 3).unwrap();
        train(g, c, &data, small_cfg(s)).unwrap().generator.params
    };
    assert_ne!(run(1), run(2));
}

#[test]
fn non_finite_data_aborts_with_step() {
    let mut data = gen_sinusoid_toy(40, 5.0, 1.0, 1.0, PhaseMode::Random, 1).unwrap();
    data.samples.data_mut().iter_mut().for_each(|v| *v = f64::NAN);
    let (g, c) = init_models(&small_spec(Variant::Gen1ch), 1).unwrap();
    let Err(err) = train(g, c, &data, small_cfg(1)) else {
        panic!("training on NaN data succeeded");
    };
    assert!(matches!(err, Error::NonFinite { step: 0, .. }), "{err:?}");
}

#[test]
fn conditional_training_needs_labels() {
    let data = gen_sinusoid_toy(40, 5.0, 1.0, 1.0, PhaseMode::Random, 1).unwrap();
    let (g, c) = init_models(&small_spec(Variant::CCGen), 1).unwrap();
    let cfg = TrainConfig { class_conditioned: true, ..small_cfg(1) };
    assert!(Trainer::new(g, c, &data, cfg).is_err());
}

/// Two classes separated by the sign of a fixed template.
fn separable(n: usize, seed: u64) -> EpochDataset {
    let mut r = rng(seed);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let mut data = Vec::with_capacity(n * 64);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = (i % 2) as u8;
        let s = if y == 1 { 1.0 } else { -1.0 };
        for t in 0..64 {
            data.push(s * (t as f64 / 64.0 * std::f64::consts::TAU).sin() + noise.sample(&mut r));
        }
        labels.push(y);
    }
    EpochDataset::new(Tensor::new(vec![n, 1, 64], data).unwrap(), Some(labels), SAMPLE_RATE, "").unwrap()
}

#[test]
fn conditional_training_separates_separable_classes() {
    let data = separable(200, 4);
    let (g, c) = init_models(&small_spec(Variant::CCGen), 4).unwrap();
    let cfg = TrainConfig {
        class_conditioned: true,
        ratio_d_to_g: (1, 1),
        learning_rate: 1e-3,
        batch_size: 32,
        max_steps: 40,
        eval_every: 5,
        ..small_cfg(4)
    };
    let t = train(g, c, &data, cfg).unwrap();
    let best = t.state.best_auc.unwrap();
    assert!(best >= 0.95, "best AUC {best}");
    let events = &t.state.checkpoint_events;
    assert!(!events.is_empty());
    assert!(events.windows(2).all(|w| w[1].auc >= w[0].auc && w[1].step > w[0].step));
    assert_eq!(events.last().unwrap().auc, best);
    assert!(t.best_checkpoint().is_some());
    assert!(t.state.log.iter().all(|r| r.auc.is_some() && r.loss_c.is_some()));
}
