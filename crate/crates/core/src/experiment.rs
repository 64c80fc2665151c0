//! Upsampling-scheme comparison on the sinusoid toy set.

use std::f64::consts::FRAC_PI_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{gen_sinusoid_toy, EpochDataset, PhaseMode};
use crate::error::Result;
use crate::evaluation::{averaged_waveform, bin_amplitude, dominant_bin, spectral_artifact_ratio};
use crate::models::{build_generator, critic_for, Critic, Generator, ModelSpec, UpsampleScheme, Variant};
use crate::training::{sample_latent, TrainConfig, Trainer};

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeRunConfig {
    pub width_scale: f64,
    pub n_data: usize,
    pub freq_hz: f64,
    pub amplitude: f64,
    pub noise_var: f64,
    pub phase: PhaseMode,
    /// Generated samples used for the metrics.
    pub n_eval: usize,
    pub train: TrainConfig,
}

impl Default for SchemeRunConfig {
    fn default() -> Self {
        SchemeRunConfig {
            width_scale: 0.125,
            n_data: 5000,
            freq_hz: 5.0,
            amplitude: 1.0,
            noise_var: 1.0,
            phase: PhaseMode::Fixed(FRAC_PI_2),
            n_eval: 1000,
            train: TrainConfig {
                ratio_d_to_g: (5, 1),
                learning_rate: 1e-3,
                adam_betas: (0.5, 0.9),
                max_steps: 600,
                eval_every: 100,
                ..TrainConfig::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeResult {
    pub scheme: UpsampleScheme,
    pub seed: u64,
    /// Dominant positive-frequency bin of the averaged generated waveform.
    pub dominant_bin: usize,
    /// Amplitude of the averaged generated waveform at the target bin.
    pub amplitude: f64,
    /// Mean artifact ratio of the generated samples (target bin as band).
    pub artifact_ratio: f64,
    pub averaged: Vec<f64>,
}

/// Training data of a run: the toy set drawn with the run seed.
pub fn toy_dataset(cfg: &SchemeRunConfig, seed: u64) -> Result<EpochDataset> {
    gen_sinusoid_toy(
        cfg.n_data,
        cfg.freq_hz,
        cfg.amplitude,
        cfg.noise_var,
        cfg.phase,
        seed,
    )
}

/// Freshly initialized generator and matching critic for a run seed.
pub fn init_models(spec: &ModelSpec, seed: u64) -> Result<(Generator, Critic)> {
    let mut init = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x1000));
    let generator = build_generator(spec, &mut init)?;
    let critic = critic_for(spec, &mut init)?;
    Ok((generator, critic))
}

/// Builds and trains one scheme; returns the trainer for checkpointing.
pub fn train_scheme(cfg: &SchemeRunConfig, scheme: UpsampleScheme, seed: u64) -> Result<Trainer> {
    let data = toy_dataset(cfg, seed)?;
    let spec = ModelSpec {
        latent_dim: cfg.train.latent_dim,
        ..ModelSpec::new(Variant::Gen1ch)
            .with_width_scale(cfg.width_scale)
            .with_scheme(scheme)
    };
    let (generator, critic) = init_models(&spec, seed)?;
    let train = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let mut trainer = Trainer::new(generator, critic, &data, train)?;
    trainer.run()?;
    Ok(trainer)
}

/// Spectral metrics of `cfg.n_eval` evaluation-mode samples.
pub fn evaluate_scheme(
    cfg: &SchemeRunConfig,
    trainer: &mut Trainer,
    seed: u64,
) -> Result<SchemeResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x2000));
    let z = sample_latent(cfg.n_eval, trainer.generator.spec.latent_dim, &mut rng)?;
    let samples = trainer.generator.generate(&z, None, &mut rng)?;
    let rows: Vec<&[f64]> = samples.data().chunks(64).collect();
    let averaged = averaged_waveform(&rows)?;
    let bin = cfg.freq_hz.round() as usize;
    Ok(SchemeResult {
        scheme: trainer.generator.spec.upsample_scheme,
        seed,
        dominant_bin: dominant_bin(&averaged)?,
        amplitude: bin_amplitude(&averaged, bin)?,
        artifact_ratio: spectral_artifact_ratio(&rows, &[bin])?,
        averaged,
    })
}

pub fn run_scheme(
    cfg: &SchemeRunConfig,
    scheme: UpsampleScheme,
    seed: u64,
) -> Result<SchemeResult> {
    let mut trainer = train_scheme(cfg, scheme, seed)?;
    evaluate_scheme(cfg, &mut trainer, seed)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Per-scheme aggregate over seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct SchemeSummary {
    pub scheme: UpsampleScheme,
    pub runs: Vec<SchemeResult>,
    pub median_artifact_ratio: f64,
    pub mean_amplitude: f64,
    /// Runs whose dominant bin is the target and amplitude lies in
    /// `[0.6, 1.4]` times the true amplitude.
    pub hits: usize,
}

pub fn summarize(
    cfg: &SchemeRunConfig,
    scheme: UpsampleScheme,
    runs: Vec<SchemeResult>,
) -> SchemeSummary {
    let bin = cfg.freq_hz.round() as usize;
    let ratios: Vec<f64> = runs.iter().map(|r| r.artifact_ratio).collect();
    let hits = runs
        .iter()
        .filter(|r| r.dominant_bin == bin && (0.6..=1.4).contains(&(r.amplitude / cfg.amplitude)))
        .count();
    SchemeSummary {
        scheme,
        median_artifact_ratio: median(&ratios),
        mean_amplitude: runs.iter().map(|r| r.amplitude).sum::<f64>() / runs.len().max(1) as f64,
        hits,
        runs,
    }
}
