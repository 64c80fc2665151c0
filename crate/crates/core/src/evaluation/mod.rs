//! Sample-quality metrics: GMM log-likelihood scoring, spectral artifacts,
//! averaged waveforms and ROC-AUC.

mod gmm;
mod spectral;

use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;

pub use gmm::{
    bic, gmm_fit_em, gmm_log_likelihood, gmm_select_k, log_sum_exp, CovarianceType, Covariances,
    GmmConfig, GmmFit, GmmModel, KSelection,
};
pub use spectral::{bin_amplitude, dominant_bin, magnitude_spectrum, spectral_artifact_ratio};

use crate::data::EpochDataset;
use crate::error::{Error, Result};

/// Pointwise mean of equally long signals.
pub fn averaged_waveform(samples: &[&[f64]]) -> Result<Vec<f64>> {
    let first = samples
        .first()
        .ok_or_else(|| Error::invalid("cannot average an empty set"))?;
    let mut acc = vec![0.0; first.len()];
    for s in samples {
        if s.len() != acc.len() {
            return Err(Error::shape("averaged_waveform", &[s.len()], &[acc.len()]));
        }
        acc.iter_mut().zip(*s).for_each(|(a, v)| *a += v);
    }
    let n = samples.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

/// Area under the ROC curve from the Mann-Whitney rank statistic, ties
/// receiving average ranks.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape("roc_auc", &[scores.len()], &[labels.len()]));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("NaN score"));
    }
    let n_pos = labels.iter().filter(|l| **l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid("AUC needs both classes"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let avg = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum_pos += avg;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}

/// How the mixture size is chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum KChoice {
    Fixed(usize),
    /// BIC over `1..=max`.
    Auto {
        max: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    pub k: KChoice,
    pub gmm: GmmConfig,
    /// Frequency bins regarded as signal for the artifact ratio.
    pub band: Vec<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            k: KChoice::Auto { max: 6 },
            gmm: GmmConfig::default(),
            band: vec![5],
        }
    }
}

/// GMM scores of one channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelScore {
    pub channel: usize,
    pub k: usize,
    /// Mean log-likelihood of the real epochs under the mixture fitted to
    /// them.
    pub real_score: f64,
    pub gen_score: f64,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QualityReport {
    pub channels: Vec<ChannelScore>,
    /// Channel means of the scores and distances.
    pub real_score: f64,
    pub gen_score: f64,
    pub distance: f64,
    pub artifact_ratio_real: f64,
    pub artifact_ratio_gen: f64,
    /// Averaged waveforms of the first channel.
    pub avg_real: Vec<f64>,
    pub avg_gen: Vec<f64>,
}

fn as_refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
    v.iter().map(|s| s.as_slice()).collect()
}

fn channel_rows(ds: &EpochDataset, ch: usize) -> Vec<Vec<f64>> {
    let t = ds.epoch_len();
    (0..ds.len())
        .map(|i| ds.epoch(i)[ch * t..(ch + 1) * t].to_vec())
        .collect()
}

fn score_channel(
    real: &EpochDataset,
    gen: &EpochDataset,
    ch: usize,
    opts: &EvalOptions,
) -> Result<ChannelScore> {
    let r = channel_rows(real, ch);
    let g = channel_rows(gen, ch);
    let (k, model) = match opts.k {
        KChoice::Fixed(k) => (k, gmm_fit_em(&r, k, &opts.gmm)?.model),
        KChoice::Auto { max } => {
            let sel = gmm_select_k(&r, 1..=max, &opts.gmm)?;
            (sel.k, sel.model)
        }
    };
    let real_score = gmm_log_likelihood(&model, &r)?;
    let gen_score = gmm_log_likelihood(&model, &g)?;
    Ok(ChannelScore {
        channel: ch,
        k,
        real_score,
        gen_score,
        distance: (real_score - gen_score).abs(),
    })
}

/// Fits a mixture per channel on the real epochs and scores both sets;
/// channels run in parallel, each with the same seed schedule.
pub fn quality_report(
    real: &EpochDataset,
    gen: &EpochDataset,
    opts: &EvalOptions,
) -> Result<QualityReport> {
    if real.channels() != gen.channels() || real.epoch_len() != gen.epoch_len() {
        return Err(Error::shape(
            "quality_report",
            &real.samples.shape()[1..],
            &gen.samples.shape()[1..],
        ));
    }
    let channels: Vec<ChannelScore> = (0..real.channels())
        .into_par_iter()
        .map(|ch| score_channel(real, gen, ch, opts))
        .collect::<Result<_>>()?;
    let nc = channels.len() as f64;
    let mean = |f: fn(&ChannelScore) -> f64| channels.iter().map(f).sum::<f64>() / nc;
    let (real_score, gen_score, distance) = (
        mean(|c| c.real_score),
        mean(|c| c.gen_score),
        mean(|c| c.distance),
    );
    let first = |ds: &EpochDataset| channel_rows(ds, 0);
    let (rr, gr) = (first(real), first(gen));
    Ok(QualityReport {
        real_score,
        gen_score,
        distance,
        artifact_ratio_real: spectral_artifact_ratio(&as_refs(&rr), &opts.band)?,
        artifact_ratio_gen: spectral_artifact_ratio(&as_refs(&gr), &opts.band)?,
        avg_real: averaged_waveform(&as_refs(&rr))?,
        avg_gen: averaged_waveform(&as_refs(&gr))?,
        channels,
    })
}

impl QualityReport {
    /// `metric,value` rows followed by a per-channel block.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "metric,value")?;
        writeln!(w, "real_score,{}", self.real_score)?;
        writeln!(w, "gen_score,{}", self.gen_score)?;
        writeln!(w, "distance,{}", self.distance)?;
        writeln!(w, "artifact_ratio_real,{}", self.artifact_ratio_real)?;
        writeln!(w, "artifact_ratio_gen,{}", self.artifact_ratio_gen)?;
        for c in &self.channels {
            let ch = c.channel;
            writeln!(w, "k_ch{ch},{}", c.k)?;
            writeln!(w, "real_score_ch{ch},{}", c.real_score)?;
            writeln!(w, "gen_score_ch{ch},{}", c.gen_score)?;
            writeln!(w, "distance_ch{ch},{}", c.distance)?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let ks: Vec<String> = self.channels.iter().map(|c| c.k.to_string()).collect();
        let _ = writeln!(s, "channels evaluated: {}", self.channels.len());
        let _ = writeln!(s, "components (BIC): {}", ks.join(" "));
        let _ = writeln!(s, "Real~GMM log-likelihood: {:.4}", self.real_score);
        let _ = writeln!(s, "Gen~GMM log-likelihood:  {:.4}", self.gen_score);
        let _ = writeln!(s, "distance: {:.4}", self.distance);
        let _ = writeln!(
            s,
            "artifact ratio real/gen: {:.4} / {:.4}",
            self.artifact_ratio_real, self.artifact_ratio_gen
        );
        s
    }
}

/// Two-column `index,value` CSV.
pub fn write_series_csv<W: Write>(mut w: W, header: (&str, &str), values: &[f64]) -> Result<()> {
    writeln!(w, "{},{}", header.0, header.1)?;
    for (i, v) in values.iter().enumerate() {
        writeln!(w, "{i},{v}")?;
    }
    Ok(())
}
