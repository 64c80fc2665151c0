//! Synthetic epoch datasets and the `WFDS` dataset file format.
//!
//! File layout: magic `WFDS`, version byte, `N`, `C`, `T` (u64 LE), the
//! `N * C * T` samples as f32 LE, a label-presence byte, then `N` label
//! bytes when present. Version 1 appends the sample rate (f64 LE) and a
//! length-prefixed (u64 LE) UTF-8 metadata string.

use std::f64::consts::PI;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"WFDS";
pub const VERSION: u8 = 1;
pub const EPOCH_LEN: usize = 64;
pub const SAMPLE_RATE: f64 = 64.0;

#[derive(Clone, Debug, PartialEq)]
pub struct EpochDataset {
    /// `[N, C, T]`.
    pub samples: Tensor,
    /// 0 = non-target, 1 = target.
    pub labels: Option<Vec<u8>>,
    pub sample_rate: f64,
    pub metadata: String,
}

impl EpochDataset {
    pub fn new(
        samples: Tensor,
        labels: Option<Vec<u8>>,
        sample_rate: f64,
        metadata: impl Into<String>,
    ) -> Result<Self> {
        if samples.rank() != 3 {
            return Err(Error::InvalidShape {
                shape: samples.shape().to_vec(),
                reason: "dataset samples must be [N, C, T]".into(),
            });
        }
        if let Some(l) = &labels {
            if l.len() != samples.shape()[0] {
                return Err(Error::shape(
                    "dataset labels",
                    &[l.len()],
                    &samples.shape()[..1],
                ));
            }
        }
        Ok(EpochDataset {
            samples,
            labels,
            sample_rate,
            metadata: metadata.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channels(&self) -> usize {
        self.samples.shape()[1]
    }

    pub fn epoch_len(&self) -> usize {
        self.samples.shape()[2]
    }

    pub fn epoch(&self, i: usize) -> &[f64] {
        let w = self.channels() * self.epoch_len();
        &self.samples.data()[i * w..(i + 1) * w]
    }

    /// Samples reshaped to the model layout `[N, 1, C, T]`.
    pub fn model_input(&self) -> Result<Tensor> {
        let s = self.samples.shape();
        self.samples.reshaped(&[s[0], 1, s[1], s[2]])
    }

    /// `(non-target, target)` counts.
    pub fn label_counts(&self) -> Option<(usize, usize)> {
        self.labels.as_ref().map(|l| {
            let t = l.iter().filter(|v| **v == 1).count();
            (l.len() - t, t)
        })
    }

    /// Epochs with the given label, as a new dataset.
    pub fn select_label(&self, label: u8) -> Result<EpochDataset> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::invalid("dataset has no labels"))?;
        let idx: Vec<usize> = (0..self.len()).filter(|&i| labels[i] == label).collect();
        self.subset(&idx)
    }

    pub fn subset(&self, idx: &[usize]) -> Result<EpochDataset> {
        let mut data = Vec::with_capacity(idx.len() * self.channels() * self.epoch_len());
        for &i in idx {
            data.extend_from_slice(self.epoch(i));
        }
        let samples = Tensor::new(vec![idx.len(), self.channels(), self.epoch_len()], data)?;
        let labels = self
            .labels
            .as_ref()
            .map(|l| idx.iter().map(|&i| l[i]).collect());
        EpochDataset::new(samples, labels, self.sample_rate, self.metadata.clone())
    }
}

/// Phase of the toy sinusoid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PhaseMode {
    /// Independent `U(0, 2π)` phase per sample.
    Random,
    /// The same phase (radians) for every sample.
    Fixed(f64),
}

/// Noisy sinusoids `A sin(2π f t / 64 + φ) + ε`, `ε ~ N(0, noise_var)`,
/// one channel of 64 points each.
pub fn gen_sinusoid_toy(
    n: usize,
    freq_hz: f64,
    amplitude: f64,
    noise_var: f64,
    phase: PhaseMode,
    seed: u64,
) -> Result<EpochDataset> {
    if n == 0 {
        return Err(Error::invalid("sinusoid dataset needs n >= 1"));
    }
    if !(0.0..SAMPLE_RATE / 2.0).contains(&freq_hz) {
        return Err(Error::invalid(format!(
            "frequency must lie in [0, 32) Hz, got {freq_hz}"
        )));
    }
    if noise_var.is_nan() || noise_var < 0.0 {
        return Err(Error::invalid("noise variance must be >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_var.sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
    let mut data = Vec::with_capacity(n * EPOCH_LEN);
    for _ in 0..n {
        let phi = match phase {
            PhaseMode::Random => rng.random_range(0.0..2.0 * PI),
            PhaseMode::Fixed(p) => p,
        };
        for t in 0..EPOCH_LEN {
            let clean = amplitude * (2.0 * PI * freq_hz * t as f64 / SAMPLE_RATE + phi).sin();
            data.push(clean + noise.sample(&mut rng));
        }
    }
    let phase_desc = match phase {
        PhaseMode::Random => "random".to_string(),
        PhaseMode::Fixed(p) => format!("{p}"),
    };
    EpochDataset::new(
        Tensor::new(vec![n, 1, EPOCH_LEN], data)?,
        None,
        SAMPLE_RATE,
        format!("sinusoid freq={freq_hz} amp={amplitude} noise_var={noise_var} phase={phase_desc} seed={seed}"),
    )
}

/// Whole-epoch z-score `(x - mean) / std` (population std).
pub fn zscore_epoch(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::invalid("cannot z-score an empty epoch"));
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std.is_nan() || std <= 1e-12 * (1.0 + mean.abs()) {
        return Err(Error::Degenerate("epoch has zero variance".into()));
    }
    Ok(x.iter().map(|v| (v - mean) / std).collect())
}

/// Parameters of the ERP-like surrogate. Amplitudes are in units of the
/// white-noise standard deviation before z-scoring.
#[derive(Clone, Debug, PartialEq)]
pub struct ErpParams {
    pub background_hz: f64,
    pub background_amp: f64,
    pub noise_std: f64,
    pub bump_amp: f64,
    pub bump_center_ms: f64,
    pub bump_width_ms: f64,
    /// Offset of the two negative side lobes from the peak.
    pub lobe_offset_ms: f64,
    /// Channels (64-channel case) carrying the full bump amplitude.
    pub occipital: std::ops::Range<usize>,
    /// Bump amplitude factor on the remaining channels.
    pub other_channel_gain: f64,
}

impl Default for ErpParams {
    fn default() -> Self {
        ErpParams {
            background_hz: 5.0,
            background_amp: 1.0,
            noise_std: 1.0,
            bump_amp: 1.0,
            bump_center_ms: 300.0,
            bump_width_ms: 60.0,
            lobe_offset_ms: 100.0,
            occipital: 54..64,
            other_channel_gain: 0.15,
        }
    }
}

impl ErpParams {
    /// Time bin of the bump peak.
    pub fn center_bin(&self) -> f64 {
        self.bump_center_ms / 1000.0 * SAMPLE_RATE
    }

    /// Target-only waveform: a positive Gaussian flanked by two negative
    /// lobes of half weight, with the discrete mean removed so the epoch
    /// mean is unaffected.
    pub fn bump_template(&self) -> Vec<f64> {
        let ms_to_bin = SAMPLE_RATE / 1000.0;
        let c = self.center_bin();
        let sigma = self.bump_width_ms * ms_to_bin;
        let off = self.lobe_offset_ms * ms_to_bin;
        let g = |t: f64, mu: f64| (-(t - mu).powi(2) / (2.0 * sigma * sigma)).exp();
        let mut b: Vec<f64> = (0..EPOCH_LEN)
            .map(|t| {
                let t = t as f64;
                self.bump_amp * (g(t, c) - 0.5 * g(t, c - off) - 0.5 * g(t, c + off))
            })
            .collect();
        let mean = b.iter().sum::<f64>() / EPOCH_LEN as f64;
        b.iter_mut().for_each(|v| *v -= mean);
        b
    }
}

/// Labeled ERP-like surrogate: every epoch carries a stimulus-locked 5 Hz
/// oscillation plus white noise; targets add the bump of
/// [`ErpParams::bump_template`]. Epochs are z-scored and shuffled.
pub fn gen_erp_surrogate(n_per_class: usize, channels: usize, seed: u64) -> Result<EpochDataset> {
    gen_erp_surrogate_with(n_per_class, channels, &ErpParams::default(), seed)
}

pub fn gen_erp_surrogate_with(
    n_per_class: usize,
    channels: usize,
    p: &ErpParams,
    seed: u64,
) -> Result<EpochDataset> {
    if n_per_class == 0 {
        return Err(Error::invalid("n_per_class must be >= 1"));
    }
    if channels != 1 && channels != 64 {
        return Err(Error::invalid("channels must be 1 or 64"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, p.noise_std).map_err(|e| Error::invalid(e.to_string()))?;
    let bump = p.bump_template();
    let background: Vec<f64> = (0..EPOCH_LEN)
        .map(|t| p.background_amp * (2.0 * PI * p.background_hz * t as f64 / SAMPLE_RATE).sin())
        .collect();
    let gain = |ch: usize| {
        if channels == 1 || p.occipital.contains(&ch) {
            1.0
        } else {
            p.other_channel_gain
        }
    };
    let mut labels: Vec<u8> = (0..2 * n_per_class)
        .map(|i| (i >= n_per_class) as u8)
        .collect();
    labels.shuffle(&mut rng);
    let w = channels * EPOCH_LEN;
    let mut data = Vec::with_capacity(labels.len() * w);
    for &label in &labels {
        let mut epoch = Vec::with_capacity(w);
        for ch in 0..channels {
            let g = gain(ch) * label as f64;
            for t in 0..EPOCH_LEN {
                epoch.push(background[t] + g * bump[t] + noise.sample(&mut rng));
            }
        }
        data.extend(zscore_epoch(&epoch)?);
    }
    EpochDataset::new(
        Tensor::new(vec![labels.len(), channels, EPOCH_LEN], data)?,
        Some(labels),
        SAMPLE_RATE,
        format!("erp-surrogate n_per_class={n_per_class} channels={channels} seed={seed}"),
    )
}

pub fn write_dataset<W: Write>(mut w: W, ds: &EpochDataset) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;
    for d in ds.samples.shape() {
        w.write_all(&(*d as u64).to_le_bytes())?;
    }
    for v in ds.samples.data() {
        w.write_all(&(*v as f32).to_le_bytes())?;
    }
    match &ds.labels {
        Some(l) => {
            w.write_all(&[1])?;
            w.write_all(l)?;
        }
        None => w.write_all(&[0])?,
    }
    w.write_all(&ds.sample_rate.to_le_bytes())?;
    w.write_all(&(ds.metadata.len() as u64).to_le_bytes())?;
    w.write_all(ds.metadata.as_bytes())?;
    w.flush()?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if n > self.buf.len() {
            return Err(Error::Format(format!(
                "truncated dataset while reading {what}"
            )));
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }
}

pub fn read_dataset<R: Read>(mut r: R) -> Result<EpochDataset> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut c = Cursor { buf: &bytes };
    if c.take(4, "magic").ok() != Some(&MAGIC[..]) {
        return Err(Error::Format("not a WFDS dataset (bad magic)".into()));
    }
    let version = c.take(1, "version")?[0];
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported dataset version {version}"
        )));
    }
    let shape = [c.u64("N")?, c.u64("C")?, c.u64("T")?].map(|d| d as usize);
    let count = shape
        .iter()
        .try_fold(1usize, |a, d| a.checked_mul(*d))
        .filter(|n| *n > 0 && n.checked_mul(4).is_some())
        .ok_or_else(|| Error::Format(format!("invalid dataset shape {shape:?}")))?;
    let data = c
        .take(4 * count, "samples")?
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    let labels = match c.take(1, "label flag")?[0] {
        0 => None,
        1 => Some(c.take(shape[0], "labels")?.to_vec()),
        f => return Err(Error::Format(format!("invalid label flag {f}"))),
    };
    let sample_rate = f64::from_le_bytes(c.take(8, "sample rate")?.try_into().expect("8 bytes"));
    let mlen = c.u64("metadata length")? as usize;
    let metadata = std::str::from_utf8(c.take(mlen, "metadata")?)
        .map_err(|_| Error::Format("metadata is not UTF-8".into()))?
        .to_string();
    if !c.buf.is_empty() {
        return Err(Error::Format("trailing bytes after dataset".into()));
    }
    EpochDataset::new(
        Tensor::new(shape.to_vec(), data)?,
        labels,
        sample_rate,
        metadata,
    )
}

pub fn save_dataset(path: &Path, ds: &EpochDataset) -> Result<()> {
    write_dataset(BufWriter::new(fs::File::create(path)?), ds)
}

pub fn load_dataset(path: &Path) -> Result<EpochDataset> {
    read_dataset(fs::File::open(path)?)
}

/// One row per epoch, values channel-major; a leading `label` column when
/// labels are present.
pub fn write_csv<W: Write>(mut w: W, ds: &EpochDataset) -> Result<()> {
    let mut header: Vec<String> = Vec::new();
    if ds.labels.is_some() {
        header.push("label".into());
    }
    for c in 0..ds.channels() {
        for t in 0..ds.epoch_len() {
            header.push(format!("c{c}_t{t}"));
        }
    }
    writeln!(w, "{}", header.join(","))?;
    for i in 0..ds.len() {
        let mut row: Vec<String> = Vec::new();
        if let Some(l) = &ds.labels {
            row.push(l[i].to_string());
        }
        row.extend(ds.epoch(i).iter().map(|v| v.to_string()));
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}
