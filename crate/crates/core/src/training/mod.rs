//! WGAN-GP and class-conditioned WGAN-GP training.

mod adam;
mod losses;

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub use adam::{adam_step, Adam};
pub use losses::{
    gradient_penalty, gradient_penalty_at, interpolate, interpolation_weights, loss_classifier,
    loss_discriminator, loss_generator, loss_generator_cc, wasserstein_estimate,
};

use crate::autodiff::Tape;
use crate::checkpoint::Checkpoint;
use crate::data::EpochDataset;
use crate::error::{Error, Result};
use crate::evaluation::roc_auc;
use crate::layers::{softmax_cross_entropy, Mode};
use crate::models::{Critic, Generator, ModelParams, ParamGroup};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lambda_gp: f64,
    /// `(critic updates, generator updates)` per iteration.
    pub ratio_d_to_g: (usize, usize),
    pub learning_rate: f64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub batch_size: usize,
    /// Iterations; each runs the full critic/generator update ratio.
    pub max_steps: usize,
    pub seed: u64,
    pub latent_dim: usize,
    pub class_conditioned: bool,
    pub eval_every: usize,
    /// Trailing share of the shuffled data held out for AUC (conditional
    /// mode only).
    pub holdout_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda_gp: 10.0,
            ratio_d_to_g: (1, 5),
            learning_rate: 1e-4,
            adam_betas: (0.0, 0.9),
            adam_eps: 1e-8,
            batch_size: 64,
            max_steps: 1000,
            seed: 0,
            latent_dim: 120,
            class_conditioned: false,
            eval_every: 50,
            holdout_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(m.to_string()));
        if !(self.lambda_gp >= 0.0 && self.lambda_gp.is_finite()) {
            return bad("lambda_gp must be >= 0");
        }
        if self.ratio_d_to_g.0 == 0 || self.ratio_d_to_g.1 == 0 {
            return bad("update ratio entries must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        let in_unit = |b: f64| (0.0..1.0).contains(&b);
        if !in_unit(self.adam_betas.0) || !in_unit(self.adam_betas.1) {
            return bad("adam betas must lie in [0, 1)");
        }
        if self.adam_eps.is_nan() || self.adam_eps <= 0.0 {
            return bad("adam_eps must be > 0");
        }
        if self.batch_size < 2 {
            return bad("batch_size must be >= 2");
        }
        if self.latent_dim == 0 {
            return bad("latent_dim must be positive");
        }
        if self.eval_every == 0 {
            return bad("eval_every must be positive");
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return bad("holdout_fraction must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Interval averages written to the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub step: usize,
    pub loss_d: f64,
    pub loss_g: f64,
    pub loss_c: Option<f64>,
    pub wasserstein: f64,
    pub gp: f64,
    pub auc: Option<f64>,
}

/// A best-AUC snapshot event.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointEvent {
    pub step: usize,
    pub auc: f64,
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub step: usize,
    pub generator: ModelParams,
    pub critic: ModelParams,
}

#[derive(Clone, Debug)]
pub struct TrainState {
    pub step: usize,
    pub gen_opt: Adam,
    pub critic_opt: Adam,
    pub best_auc: Option<f64>,
    pub best_checkpoint: Option<Snapshot>,
    pub checkpoint_events: Vec<CheckpointEvent>,
    pub rng: ChaCha8Rng,
    pub log: Vec<LogRow>,
}

#[derive(Default)]
struct Accum {
    n_d: usize,
    n_g: usize,
    loss_d: f64,
    loss_g: f64,
    loss_c: f64,
    w: f64,
    gp: f64,
}

/// Owns the models and data of one training run.
pub struct Trainer {
    pub cfg: TrainConfig,
    pub generator: Generator,
    pub critic: Critic,
    pub state: TrainState,
    train_x: Tensor,
    train_y: Vec<usize>,
    holdout: Option<(Tensor, Vec<bool>)>,
    order: Vec<usize>,
    cursor: usize,
    acc: Accum,
    gen_idx: Vec<usize>,
    critic_idx: Vec<usize>,
}

fn rows(x: &Tensor, idx: &[usize]) -> Result<Tensor> {
    let w = x.numel() / x.shape()[0];
    let mut data = Vec::with_capacity(idx.len() * w);
    for &i in idx {
        data.extend_from_slice(&x.data()[i * w..(i + 1) * w]);
    }
    let mut shape = x.shape().to_vec();
    shape[0] = idx.len();
    Tensor::new(shape, data)
}

fn check_finite(v: f64, what: &str, step: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite {
            what: what.to_string(),
            step,
        })
    }
}

impl Trainer {
    pub fn new(
        generator: Generator,
        critic: Critic,
        data: &EpochDataset,
        cfg: TrainConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if data.is_empty() {
            return Err(Error::invalid("training dataset is empty"));
        }
        if cfg.latent_dim != generator.spec.latent_dim {
            return Err(Error::invalid(
                "latent_dim differs between config and generator",
            ));
        }
        if cfg.class_conditioned != generator.is_conditional()
            || cfg.class_conditioned != critic.is_conditional()
        {
            return Err(Error::invalid("class_conditioned must match both models"));
        }
        let x = data.model_input()?;
        if x.shape()[1..] != critic.trunk.input_shape[..] {
            return Err(Error::shape(
                "training data",
                &x.shape()[1..],
                &critic.trunk.input_shape,
            ));
        }
        let n = x.shape()[0];
        let all: Vec<usize> = (0..n).collect();
        let (train_idx, holdout) = if cfg.class_conditioned {
            let labels = data
                .labels
                .as_ref()
                .ok_or_else(|| Error::invalid("conditional training needs labels"))?;
            if let Some(&bad) = labels
                .iter()
                .find(|&&l| l as usize >= generator.spec.num_classes)
            {
                return Err(Error::LabelOutOfRange {
                    label: bad as usize,
                    num_classes: generator.spec.num_classes,
                });
            }
            if n < 2 {
                return Err(Error::invalid(
                    "conditional training needs at least two epochs",
                ));
            }
            let mut perm = all.clone();
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(
                cfg.seed ^ 0x5eed_5711_7000_0001,
            ));
            let n_hold = ((n as f64) * cfg.holdout_fraction).round() as usize;
            let split = n - n_hold.clamp(1, n - 1);
            let (tr, ho) = perm.split_at(split);
            let ho_labels: Vec<bool> = ho.iter().map(|&i| labels[i] == 1).collect();
            if ho_labels.iter().all(|l| *l) || ho_labels.iter().all(|l| !*l) {
                return Err(Error::invalid("held-out split lacks one of the classes"));
            }
            (tr.to_vec(), Some((rows(&x, ho)?, ho_labels)))
        } else {
            (all, None)
        };
        if train_idx.len() < cfg.batch_size {
            return Err(Error::invalid(format!(
                "batch_size {} exceeds the {} training epochs",
                cfg.batch_size,
                train_idx.len()
            )));
        }
        let train_x = rows(&x, &train_idx)?;
        let train_y = match &data.labels {
            Some(l) => train_idx.iter().map(|&i| l[i] as usize).collect(),
            None => vec![0; train_idx.len()],
        };
        let gen_idx = generator.params.trainable_indices(&[ParamGroup::Generator]);
        let critic_idx = critic.params.trainable_indices(&[
            ParamGroup::SharedTrunk,
            ParamGroup::Discriminator,
            ParamGroup::Classifier,
        ]);
        let state = TrainState {
            step: 0,
            gen_opt: Adam::new(cfg.learning_rate, cfg.adam_betas, cfg.adam_eps),
            critic_opt: Adam::new(cfg.learning_rate, cfg.adam_betas, cfg.adam_eps),
            best_auc: None,
            best_checkpoint: None,
            checkpoint_events: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            log: Vec::new(),
        };
        let order = (0..train_x.shape()[0]).collect();
        Ok(Trainer {
            cfg,
            generator,
            critic,
            state,
            train_x,
            train_y,
            holdout,
            order,
            cursor: usize::MAX,
            acc: Accum::default(),
            gen_idx,
            critic_idx,
        })
    }

    /// Next real batch from a per-pass shuffled order.
    fn next_batch(&mut self) -> Result<(Tensor, Vec<usize>)> {
        let b = self.cfg.batch_size;
        if self.cursor.saturating_add(b) > self.order.len() {
            self.order.shuffle(&mut self.state.rng);
            self.cursor = 0;
        }
        let idx = self.order[self.cursor..self.cursor + b].to_vec();
        self.cursor += b;
        let y = idx.iter().map(|&i| self.train_y[i]).collect();
        Ok((rows(&self.train_x, &idx)?, y))
    }

    fn latent(&mut self) -> Result<(Tensor, Option<Vec<usize>>)> {
        let b = self.cfg.batch_size;
        let z = (0..b * self.cfg.latent_dim)
            .map(|_| StandardNormal.sample(&mut self.state.rng))
            .collect();
        let z = Tensor::new(vec![b, self.cfg.latent_dim], z)?;
        let labels = self.cfg.class_conditioned.then(|| {
            (0..b)
                .map(|_| {
                    self.state
                        .rng
                        .random_range(0..self.generator.spec.num_classes)
                })
                .collect()
        });
        Ok((z, labels))
    }

    fn critic_step(&mut self) -> Result<()> {
        let step = self.state.step;
        let (x_real, y_real) = self.next_batch()?;
        let (z, y_fake) = self.latent()?;
        let eps = interpolation_weights(self.cfg.batch_size, &mut self.state.rng);
        let tape = Tape::new();
        let gb = self.generator.params.bind(&tape, false);
        let cb = self.critic.params.bind(&tape, true);
        let rng = &mut self.state.rng;
        let zv = tape.constant(z);
        let x_fake = self
            .generator
            .forward(&zv, y_fake.as_deref(), &gb, Mode::Train, rng)?;
        let xr = tape.constant(x_real);
        let real = self.critic.forward(&xr, &cb, Mode::Train, rng)?;
        let fake = self.critic.forward(&x_fake, &cb, Mode::Train, rng)?;
        let x_hat =
            tape.leaf(interpolate(xr.value(), x_fake.value(), &eps)?.with_requires_grad(true));
        let critic = &mut self.critic;
        let gp = gradient_penalty_at(|x| critic.score(x, &cb, Mode::Train, rng), &x_hat)?;
        let mut loss = loss_discriminator(&real.score, &fake.score, &gp, self.cfg.lambda_gp)?;
        let mut loss_c = 0.0;
        if let (Some(lr), Some(lf), Some(yf)) = (&real.logits, &fake.logits, &y_fake) {
            let lc = loss_classifier(lr, &y_real, lf, yf)?;
            loss_c = check_finite(lc.item()?, "L_C", step)?;
            loss = loss.add(&lc)?;
        }
        let w = wasserstein_estimate(real.score.data(), fake.score.data())?;
        let ld = check_finite(loss.item()?, "L_D", step)?;
        loss.backward()?;
        let grads = cb.grads(&self.critic_idx);
        adam_step(
            &mut self.critic.params,
            &self.critic_idx,
            &grads,
            &mut self.state.critic_opt,
        )
        .map_err(|e| match e {
            Error::NonFinite { what, .. } => Error::NonFinite {
                what: format!("critic {what}"),
                step,
            },
            e => e,
        })?;
        self.acc.n_d += 1;
        self.acc.loss_d += ld;
        self.acc.loss_c += loss_c;
        self.acc.w += w;
        self.acc.gp += gp.item()?;
        Ok(())
    }

    fn generator_step(&mut self) -> Result<()> {
        let step = self.state.step;
        let (z, y_fake) = self.latent()?;
        let tape = Tape::new();
        let gb = self.generator.params.bind(&tape, true);
        let cb = self.critic.params.bind(&tape, false);
        let rng = &mut self.state.rng;
        let zv = tape.constant(z);
        let x_fake = self
            .generator
            .forward(&zv, y_fake.as_deref(), &gb, Mode::Train, rng)?;
        let out = self.critic.forward(&x_fake, &cb, Mode::Train, rng)?;
        let loss = match (&out.logits, &y_fake) {
            (Some(l), Some(y)) => loss_generator(&out.score)?.add(&softmax_cross_entropy(l, y)?)?,
            _ => loss_generator(&out.score)?,
        };
        let lg = check_finite(loss.item()?, "L_G", step)?;
        loss.backward()?;
        let grads = gb.grads(&self.gen_idx);
        adam_step(
            &mut self.generator.params,
            &self.gen_idx,
            &grads,
            &mut self.state.gen_opt,
        )
        .map_err(|e| match e {
            Error::NonFinite { what, .. } => Error::NonFinite {
                what: format!("generator {what}"),
                step,
            },
            e => e,
        })?;
        self.acc.n_g += 1;
        self.acc.loss_g += lg;
        Ok(())
    }

    /// Held-out AUC of the classifier branch (`logit_1 - logit_0`).
    pub fn holdout_auc(&mut self) -> Result<Option<f64>> {
        let Some((x, labels)) = &self.holdout else {
            return Ok(None);
        };
        let (_, logits) = self.critic.evaluate(x, &mut self.state.rng)?;
        let logits = logits.ok_or_else(|| Error::invalid("critic has no classifier branch"))?;
        let c = logits.shape()[1];
        let scores: Vec<f64> = logits.data().chunks(c).map(|r| r[1] - r[0]).collect();
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite {
                what: "classifier logits".into(),
                step: self.state.step,
            });
        }
        roc_auc(&scores, labels).map(Some)
    }

    /// One iteration; returns the log row when an evaluation interval
    /// closes.
    pub fn step(&mut self) -> Result<Option<LogRow>> {
        let (d, g) = self.cfg.ratio_d_to_g;
        for _ in 0..d {
            self.critic_step()?;
        }
        for _ in 0..g {
            self.generator_step()?;
        }
        self.state.step += 1;
        let step = self.state.step;
        if !step.is_multiple_of(self.cfg.eval_every) && step != self.cfg.max_steps {
            return Ok(None);
        }
        let auc = self.holdout_auc()?;
        if let Some(a) = auc {
            if self.state.best_auc.is_none_or(|b| a > b) {
                self.state.best_auc = Some(a);
                self.state.best_checkpoint = Some(Snapshot {
                    step,
                    generator: self.generator.params.clone(),
                    critic: self.critic.params.clone(),
                });
                self.state
                    .checkpoint_events
                    .push(CheckpointEvent { step, auc: a });
            }
        }
        let acc = std::mem::take(&mut self.acc);
        let nd = acc.n_d.max(1) as f64;
        let row = LogRow {
            step,
            loss_d: acc.loss_d / nd,
            loss_g: acc.loss_g / acc.n_g.max(1) as f64,
            loss_c: self.cfg.class_conditioned.then(|| acc.loss_c / nd),
            wasserstein: acc.w / nd,
            gp: acc.gp / nd,
            auc,
        };
        self.state.log.push(row.clone());
        Ok(Some(row))
    }

    /// Runs the remaining iterations up to `max_steps`.
    pub fn run(&mut self) -> Result<()> {
        while self.state.step < self.cfg.max_steps {
            self.step()?;
        }
        Ok(())
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::from_models(
            &self.generator.spec,
            &self.generator.params,
            &self.critic.params,
        )
    }

    pub fn best_checkpoint(&self) -> Option<Checkpoint> {
        self.state
            .best_checkpoint
            .as_ref()
            .map(|s| Checkpoint::from_models(&self.generator.spec, &s.generator, &s.critic))
    }
}

/// Trains `generator` against `critic` on `data` for `cfg.max_steps`
/// iterations.
pub fn train(
    generator: Generator,
    critic: Critic,
    data: &EpochDataset,
    cfg: TrainConfig,
) -> Result<Trainer> {
    let mut t = Trainer::new(generator, critic, data, cfg)?;
    t.run()?;
    Ok(t)
}

fn opt_f64(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub const LOG_HEADER: &str = "step,L_D,L_G,L_C,W,gp,auc";

pub fn write_log_csv<W: Write>(mut w: W, rows: &[LogRow]) -> Result<()> {
    writeln!(w, "{LOG_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.step,
            r.loss_d,
            r.loss_g,
            opt_f64(r.loss_c),
            r.wasserstein,
            r.gp,
            opt_f64(r.auc)
        )?;
    }
    Ok(())
}

/// Draws a latent batch `z ~ N(0, I)` of shape `[n, latent_dim]`.
pub fn sample_latent<R: Rng + ?Sized>(n: usize, latent_dim: usize, rng: &mut R) -> Result<Tensor> {
    let z = (0..n * latent_dim)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    Tensor::new(vec![n, latent_dim], z)
}
