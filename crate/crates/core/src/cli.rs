//! Command-line front end.
//!
//! Every option can also come from a flat `key = value` file passed with
//! `--config`; flags win over file keys, which win over built-in defaults.
//! Exit codes: 0 success, 2 usage, 3 numerical abort, 4 I/O or format.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::checkpoint::Checkpoint;
use crate::config::parse_kv;
use crate::data::{self, EpochDataset, PhaseMode, SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::evaluation::{
    averaged_waveform, quality_report, CovarianceType, EvalOptions, GmmConfig, KChoice,
};
use crate::experiment::{self, SchemeRunConfig, SchemeSummary};
use crate::models::{ModelSpec, UpsampleScheme, Variant};
use crate::plot::{line_chart, Series};
use crate::tensor::Tensor;
use crate::training::{sample_latent, write_log_csv, TrainConfig, Trainer};

#[derive(Parser, Debug)]
#[command(name = "waveforge", version, about = "WGAN-GP generation of short signal epochs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset (sinusoid toy set or ERP surrogate).
    GenData(GenDataArgs),
    /// Train a generator/critic pair on a dataset.
    Train(TrainArgs),
    /// Draw samples from a trained checkpoint.
    Generate(GenerateArgs),
    /// Score generated epochs against real ones.
    Evaluate(EvaluateArgs),
    /// Train every upsampling scheme on the toy set and rank them.
    CompareUpsampling(CompareArgs),
}

#[derive(Args, Debug)]
struct GenDataArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// sinusoid | erp
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    freq: Option<f64>,
    #[arg(long)]
    amp: Option<f64>,
    #[arg(long)]
    noise_var: Option<f64>,
    /// `random`, `fixed` or a fixed phase in radians.
    #[arg(long)]
    phase: Option<String>,
    #[arg(long)]
    n_per_class: Option<usize>,
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Also export the epochs as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Checkpoint path; the log and best snapshot are written next to it.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    cc: Option<bool>,
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    width: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    /// Critic and generator updates per iteration, `d:g`.
    #[arg(long)]
    ratio: Option<String>,
    #[arg(long)]
    latent_dim: Option<usize>,
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    holdout: Option<f64>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(short = 'c', long)]
    checkpoint: Option<PathBuf>,
    #[arg(short, long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Class of conditional samples: `0`, `1` or `balanced`.
    #[arg(long)]
    label: Option<String>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    real: Option<PathBuf>,
    #[arg(long)]
    gen: Option<PathBuf>,
    /// `auto` (BIC) or a fixed component count.
    #[arg(long)]
    gmm_k: Option<String>,
    #[arg(long)]
    max_k: Option<usize>,
    /// diag | full
    #[arg(long)]
    covariance: Option<String>,
    /// Comma-separated signal bins for the artifact ratio.
    #[arg(long)]
    band: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seeds `1..=seeds`.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    width: Option<f64>,
    #[arg(long)]
    n_data: Option<usize>,
    #[arg(long)]
    n_eval: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    ratio: Option<String>,
    #[arg(short, long)]
    out_dir: Option<PathBuf>,
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonFinite { .. } => 3,
        Error::Io(_) | Error::Format(_) | Error::CheckpointMismatch(_) => 4,
        Error::InvalidArgument(_) | Error::LabelOutOfRange { .. } => 2,
        _ => 1,
    }
}

/// Runs the command line `args` (program name first) and returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let res = configure_threads().and_then(|_| match cli.command {
        Command::GenData(a) => cmd_gen_data(a),
        Command::Train(a) => cmd_train(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::CompareUpsampling(a) => cmd_compare_upsampling(a),
    });
    match res {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("WAVEFORGE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::invalid(format!("WAVEFORGE_THREADS must be a positive integer, got '{v}'")))?;
    // a pool may already exist when called repeatedly in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Config-file keys of one command, merged with flags and defaults.
struct Settings {
    kv: BTreeMap<String, String>,
}

impl Settings {
    fn load(path: Option<&Path>, allowed: &[&str]) -> Result<Self> {
        let kv = match path {
            None => BTreeMap::new(),
            Some(p) => parse_kv(&fs::read_to_string(p)?)?,
        };
        if let Some(k) = kv.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::invalid(format!("unknown config key '{k}'")));
        }
        Ok(Settings { kv })
    }

    fn opt<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        self.kv
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::invalid(format!("config key '{key}': cannot parse '{v}'")))
            })
            .transpose()
    }

    fn get<T: FromStr>(&self, key: &str, flag: Option<T>, default: T) -> Result<T> {
        Ok(self.opt(key, flag)?.unwrap_or(default))
    }

    fn required<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<T> {
        self.opt(key, flag)?
            .ok_or_else(|| Error::invalid(format!("missing required option '{key}'")))
    }
}

fn parse_ratio(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::invalid(format!("ratio must look like d:g, got '{s}'"));
    let (d, g) = s.split_once(':').ok_or_else(bad)?;
    Ok((d.trim().parse().map_err(|_| bad())?, g.trim().parse().map_err(|_| bad())?))
}

fn parse_phase(s: &str) -> Result<PhaseMode> {
    match s {
        "random" => Ok(PhaseMode::Random),
        "fixed" => Ok(PhaseMode::Fixed(std::f64::consts::FRAC_PI_2)),
        v => v
            .parse()
            .map(PhaseMode::Fixed)
            .map_err(|_| Error::invalid(format!("phase must be random, fixed or radians, got '{v}'"))),
    }
}

fn input_file(p: &Path) -> Result<()> {
    if !p.is_file() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{} does not exist", p.display()),
        )));
    }
    Ok(())
}

/// The parent directory of an output file must already exist.
fn output_file(p: &Path) -> Result<()> {
    let parent = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if !parent.is_dir() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("output directory {} does not exist", parent.display()),
        )));
    }
    Ok(())
}

fn create(p: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(p)?))
}

fn describe(ds: &EpochDataset) -> String {
    let labels = match ds.label_counts() {
        Some((a, b)) => format!("{a} non-target / {b} target"),
        None => "none".to_string(),
    };
    format!("N={} C={} T={} labels: {labels}", ds.len(), ds.channels(), ds.epoch_len())
}

fn cmd_gen_data(a: GenDataArgs) -> Result<()> {
    let s = Settings::load(
        a.config.as_deref(),
        &["kind", "n", "freq", "amp", "noise_var", "phase", "n_per_class", "channels", "seed", "output", "csv"],
    )?;
    let output: PathBuf = s.required("output", a.output)?;
    let csv: Option<PathBuf> = s.opt("csv", a.csv)?;
    let kind: String = s.get("kind", a.kind, "sinusoid".into())?;
    let seed = s.get("seed", a.seed, 0)?;
    output_file(&output)?;
    if let Some(c) = &csv {
        output_file(c)?;
    }
    let ds = match kind.as_str() {
        "sinusoid" => {
            let phase = parse_phase(&s.get("phase", a.phase, "random".into())?)?;
            data::gen_sinusoid_toy(
                s.get("n", a.n, 5000)?,
                s.get("freq", a.freq, 5.0)?,
                s.get("amp", a.amp, 1.0)?,
                s.get("noise_var", a.noise_var, 1.0)?,
                phase,
                seed,
            )?
        }
        "erp" => data::gen_erp_surrogate(s.get("n_per_class", a.n_per_class, 500)?, s.get("channels", a.channels, 1)?, seed)?,
        k => return Err(Error::invalid(format!("unknown dataset kind '{k}'"))),
    };
    data::save_dataset(&output, &ds)?;
    if let Some(c) = csv {
        data::write_csv(create(&c)?, &ds)?;
    }
    println!("wrote {}: {}", output.display(), describe(&ds));
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let s = Settings::load(
        a.config.as_deref(),
        &[
            "data", "output", "log", "cc", "scheme", "width", "steps", "seed", "lr", "beta1", "beta2", "lambda", "batch",
            "ratio", "latent_dim", "eval_every", "holdout",
        ],
    )?;
    let data_path: PathBuf = s.required("data", a.data)?;
    let output: PathBuf = s.required("output", a.output)?;
    let log_path: PathBuf = s.get("log", a.log, output.with_extension("log.csv"))?;
    let d = TrainConfig::default();
    let cc = s.get("cc", a.cc, false)?;
    let cfg = TrainConfig {
        lambda_gp: s.get("lambda", a.lambda, d.lambda_gp)?,
        ratio_d_to_g: match s.opt("ratio", a.ratio)? {
            Some(r) => parse_ratio(&r)?,
            None => d.ratio_d_to_g,
        },
        learning_rate: s.get("lr", a.lr, d.learning_rate)?,
        adam_betas: (s.get("beta1", a.beta1, d.adam_betas.0)?, s.get("beta2", a.beta2, d.adam_betas.1)?),
        batch_size: s.get("batch", a.batch, d.batch_size)?,
        max_steps: s.get("steps", a.steps, d.max_steps)?,
        seed: s.get("seed", a.seed, d.seed)?,
        latent_dim: s.get("latent_dim", a.latent_dim, d.latent_dim)?,
        class_conditioned: cc,
        eval_every: s.get("eval_every", a.eval_every, d.eval_every)?,
        holdout_fraction: s.get("holdout", a.holdout, d.holdout_fraction)?,
        ..d
    };
    cfg.validate()?;
    let scheme: UpsampleScheme = s.get::<String>("scheme", a.scheme, "bc-dcbl".into())?.parse()?;
    let width = s.get("width", a.width, 1.0)?;
    input_file(&data_path)?;
    for p in [&output, &log_path] {
        output_file(p)?;
    }

    let ds = data::load_dataset(&data_path)?;
    let variant = match (cc, ds.channels()) {
        (true, _) => Variant::CCGen,
        (false, 1) => Variant::Gen1ch,
        (false, 64) => Variant::Gen64ch,
        (false, c) => return Err(Error::invalid(format!("datasets must have 1 or 64 channels, got {c}"))),
    };
    let spec = ModelSpec {
        latent_dim: cfg.latent_dim,
        cc_channels: ds.channels(),
        ..ModelSpec::new(variant).with_width_scale(width).with_scheme(scheme)
    };
    spec.validate()?;
    let (generator, critic) = experiment::init_models(&spec, cfg.seed)?;
    let mut trainer = Trainer::new(generator, critic, &ds, cfg)?;
    println!("training {} on {} ({})", spec.variant, data_path.display(), describe(&ds));
    let outcome = (|| -> Result<()> {
        while trainer.state.step < trainer.cfg.max_steps {
            if let Some(r) = trainer.step()? {
                let auc = r.auc.map_or_else(String::new, |v| format!(" auc {v:.4}"));
                println!(
                    "step {:>6}  L_D {:>10.4}  L_G {:>10.4}  W {:>8.4}  gp {:>8.4}{auc}",
                    r.step, r.loss_d, r.loss_g, r.wasserstein, r.gp
                );
            }
        }
        Ok(())
    })();
    // the log is kept even when training aborts
    write_log_csv(create(&log_path)?, &trainer.state.log)?;
    outcome?;
    trainer.checkpoint().save(&output)?;
    println!("wrote {} and {}", output.display(), log_path.display());
    if let Some(best) = trainer.best_checkpoint() {
        let p = output.with_extension("best.wfts");
        best.save(&p)?;
        println!("best held-out AUC {:.4}, snapshot {}", trainer.state.best_auc.unwrap_or(f64::NAN), p.display());
    }
    Ok(())
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let s = Settings::load(a.config.as_deref(), &["checkpoint", "n", "seed", "label", "output", "csv"])?;
    let ckpt_path: PathBuf = s.required("checkpoint", a.checkpoint)?;
    let output: PathBuf = s.required("output", a.output)?;
    let csv: Option<PathBuf> = s.opt("csv", a.csv)?;
    let n: usize = s.get("n", a.n, 1000)?;
    let seed = s.get("seed", a.seed, 0)?;
    let label: String = s.get("label", a.label, "balanced".into())?;
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    input_file(&ckpt_path)?;
    output_file(&output)?;
    if let Some(c) = &csv {
        output_file(c)?;
    }
    let ckpt = Checkpoint::load(&ckpt_path)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut generator = ckpt.generator(&mut rng)?;
    let labels: Option<Vec<usize>> = if generator.is_conditional() {
        let k = generator.spec.num_classes;
        Some(match label.as_str() {
            "balanced" => (0..n).map(|i| i % k).collect(),
            v => {
                let l: usize = v
                    .parse()
                    .map_err(|_| Error::invalid(format!("label must be a class index or 'balanced', got '{v}'")))?;
                if l >= k {
                    return Err(Error::LabelOutOfRange { label: l, num_classes: k });
                }
                vec![l; n]
            }
        })
    } else {
        None
    };
    let shape = generator.spec.sample_shape();
    let (c, t) = (shape[1], shape[2]);
    let mut out = Vec::with_capacity(n * c * t);
    let chunk = 256;
    for start in (0..n).step_by(chunk) {
        let m = chunk.min(n - start);
        let z = sample_latent(m, generator.spec.latent_dim, &mut rng)?;
        let y = labels.as_ref().map(|l| &l[start..start + m]);
        out.extend_from_slice(generator.generate(&z, y, &mut rng)?.data());
    }
    let ds = EpochDataset::new(
        Tensor::new(vec![n, c, t], out)?,
        labels.map(|l| l.into_iter().map(|v| v as u8).collect()),
        SAMPLE_RATE,
        format!("generated from {}", ckpt_path.display()),
    )?;
    data::save_dataset(&output, &ds)?;
    if let Some(c) = csv {
        data::write_csv(create(&c)?, &ds)?;
    }
    println!("wrote {}: {}", output.display(), describe(&ds));
    Ok(())
}

fn parse_band(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|b| {
            b.trim()
                .parse()
                .map_err(|_| Error::invalid(format!("band must be comma-separated bins, got '{s}'")))
        })
        .collect()
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let s = Settings::load(
        a.config.as_deref(),
        &["real", "gen", "gmm_k", "max_k", "covariance", "band", "seed", "out_dir"],
    )?;
    let real_path: PathBuf = s.required("real", a.real)?;
    let gen_path: PathBuf = s.required("gen", a.gen)?;
    let out_dir: PathBuf = s.required("out_dir", a.out_dir)?;
    let max_k = s.get("max_k", a.max_k, 6)?;
    let k = match s.get("gmm_k", a.gmm_k, "auto".to_string())?.as_str() {
        "auto" => KChoice::Auto { max: max_k },
        v => KChoice::Fixed(
            v.parse()
                .map_err(|_| Error::invalid(format!("gmm-k must be 'auto' or a count, got '{v}'")))?,
        ),
    };
    let covariance = match s.get("covariance", a.covariance, "diag".to_string())?.as_str() {
        "diag" => CovarianceType::Diagonal,
        "full" => CovarianceType::Full,
        v => return Err(Error::invalid(format!("covariance must be diag or full, got '{v}'"))),
    };
    let opts = EvalOptions {
        k,
        gmm: GmmConfig {
            covariance,
            seed: s.get("seed", a.seed, 0)?,
            ..GmmConfig::default()
        },
        band: parse_band(&s.get("band", a.band, "5".to_string())?)?,
    };
    input_file(&real_path)?;
    input_file(&gen_path)?;
    if !out_dir.is_dir() {
        fs::create_dir_all(&out_dir)?;
    }
    let real = data::load_dataset(&real_path)?;
    let gen = data::load_dataset(&gen_path)?;
    let report = quality_report(&real, &gen, &opts)?;
    report.write_csv(create(&out_dir.join("report.csv"))?)?;
    fs::write(out_dir.join("report.txt"), report.summary())?;
    let mut w = create(&out_dir.join("waveform.csv"))?;
    {
        use std::io::Write;
        writeln!(w, "index,real,gen")?;
        for (i, (r, g)) in report.avg_real.iter().zip(&report.avg_gen).enumerate() {
            writeln!(w, "{i},{r},{g}")?;
        }
    }
    let svg = line_chart(
        "Averaged waveform",
        "sample",
        "amplitude",
        &[
            Series::new("real", report.avg_real.clone()),
            Series::new("generated", report.avg_gen.clone()),
        ],
    );
    fs::write(out_dir.join("waveform.svg"), svg)?;
    print!("{}", report.summary());
    println!("wrote report.csv, report.txt, waveform.csv, waveform.svg to {}", out_dir.display());
    Ok(())
}

fn cmd_compare_upsampling(a: CompareArgs) -> Result<()> {
    let s = Settings::load(
        a.config.as_deref(),
        &["seeds", "steps", "width", "n_data", "n_eval", "lr", "ratio", "out_dir"],
    )?;
    let d = SchemeRunConfig::default();
    let out_dir: PathBuf = s.required("out_dir", a.out_dir)?;
    let seeds = s.get("seeds", a.seeds, 5)?;
    if seeds == 0 {
        return Err(Error::invalid("seeds must be positive"));
    }
    let cfg = SchemeRunConfig {
        width_scale: s.get("width", a.width, d.width_scale)?,
        n_data: s.get("n_data", a.n_data, d.n_data)?,
        n_eval: s.get("n_eval", a.n_eval, d.n_eval)?,
        train: TrainConfig {
            max_steps: s.get("steps", a.steps, d.train.max_steps)?,
            learning_rate: s.get("lr", a.lr, d.train.learning_rate)?,
            ratio_d_to_g: match s.opt("ratio", a.ratio)? {
                Some(r) => parse_ratio(&r)?,
                None => d.train.ratio_d_to_g,
            },
            ..d.train.clone()
        },
        ..d
    };
    cfg.train.validate()?;
    if !out_dir.is_dir() {
        fs::create_dir_all(&out_dir)?;
    }
    let jobs: Vec<(UpsampleScheme, u64)> = UpsampleScheme::ALL
        .iter()
        .flat_map(|&sc| (1..=seeds).map(move |seed| (sc, seed)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(sc, seed)| experiment::run_scheme(&cfg, sc, seed))
        .collect::<Result<Vec<_>>>()?;
    let mut summaries: Vec<SchemeSummary> = UpsampleScheme::ALL
        .iter()
        .map(|&sc| {
            let runs = results.iter().filter(|r| r.scheme == sc).cloned().collect();
            experiment::summarize(&cfg, sc, runs)
        })
        .collect();

    let mut series = Vec::new();
    let real = experiment::toy_dataset(&cfg, 1)?;
    let rows: Vec<&[f64]> = real.samples.data().chunks(real.epoch_len()).collect();
    series.push(Series::new("real", averaged_waveform(&rows)?));
    for sm in &summaries {
        let avgs: Vec<&[f64]> = sm.runs.iter().map(|r| r.averaged.as_slice()).collect();
        series.push(Series::new(sm.scheme.name(), averaged_waveform(&avgs)?));
    }
    fs::write(
        out_dir.join("compare.svg"),
        line_chart("Averaged generated waveform per scheme", "sample", "amplitude", &series),
    )?;

    summaries.sort_by(|x, y| x.median_artifact_ratio.total_cmp(&y.median_artifact_ratio));
    let mut w = create(&out_dir.join("compare.csv"))?;
    {
        use std::io::Write;
        writeln!(w, "rank,scheme,median_artifact_ratio,mean_amplitude,hits,runs")?;
        println!("{:<4} {:<10} {:>14} {:>10} {:>6}", "rank", "scheme", "median ratio", "mean amp", "hits");
        for (i, sm) in summaries.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                i + 1,
                sm.scheme,
                sm.median_artifact_ratio,
                sm.mean_amplitude,
                sm.hits,
                sm.runs.len()
            )?;
            println!(
                "{:<4} {:<10} {:>14.4} {:>10.4} {:>3}/{}",
                i + 1,
                sm.scheme.name(),
                sm.median_artifact_ratio,
                sm.mean_amplitude,
                sm.hits,
                sm.runs.len()
            );
        }
    }
    println!("wrote compare.csv and compare.svg to {}", out_dir.display());
    Ok(())
}
