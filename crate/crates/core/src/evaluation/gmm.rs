//! Gaussian mixture models fitted by expectation maximization.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovarianceType {
    Diagonal,
    Full,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Covariances {
    /// Per-component variances.
    Diagonal(Vec<Vec<f64>>),
    Full(Vec<DMatrix<f64>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Covariances,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GmmConfig {
    pub covariance: CovarianceType,
    /// Lower bound on variances (diagonal) or eigenvalues (full).
    pub floor: f64,
    pub max_iter: usize,
    /// Relative log-likelihood change that stops EM.
    pub tol: f64,
    /// Restarts; the best final likelihood wins.
    pub n_init: usize,
    pub seed: u64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            covariance: CovarianceType::Diagonal,
            floor: 1e-6,
            max_iter: 500,
            tol: 1e-7,
            n_init: 3,
            seed: 0,
        }
    }
}

/// A fitted model with its EM trace.
#[derive(Clone, Debug)]
pub struct GmmFit {
    pub model: GmmModel,
    /// Mean log-likelihood before each M-step of the winning restart; the
    /// last entry belongs to the returned model.
    pub log_likelihoods: Vec<f64>,
    pub converged: bool,
}

/// Per-component density evaluator.
enum Component {
    Diag {
        mean: Vec<f64>,
        inv_var: Vec<f64>,
        log_norm: f64,
    },
    Full {
        mean: DVector<f64>,
        chol_l: DMatrix<f64>,
        log_norm: f64,
    },
}

impl Component {
    fn log_density(&self, x: &[f64]) -> f64 {
        match self {
            Component::Diag {
                mean,
                inv_var,
                log_norm,
            } => {
                let q: f64 = x
                    .iter()
                    .zip(mean)
                    .zip(inv_var)
                    .map(|((x, m), iv)| (x - m) * (x - m) * iv)
                    .sum();
                log_norm - 0.5 * q
            }
            Component::Full {
                mean,
                chol_l,
                log_norm,
            } => {
                let diff =
                    DVector::from_iterator(x.len(), x.iter().zip(mean.iter()).map(|(a, b)| a - b));
                let y = chol_l
                    .solve_lower_triangular(&diff)
                    .expect("cholesky factor is invertible");
                log_norm - 0.5 * y.norm_squared()
            }
        }
    }
}

impl GmmModel {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn covariance_type(&self) -> CovarianceType {
        match self.covariances {
            Covariances::Diagonal(_) => CovarianceType::Diagonal,
            Covariances::Full(_) => CovarianceType::Full,
        }
    }

    /// Free parameters: `K - 1` weights, `K d` means and the covariances.
    pub fn num_free_params(&self) -> usize {
        let (k, d) = (self.k(), self.dim());
        let cov = match self.covariance_type() {
            CovarianceType::Diagonal => k * d,
            CovarianceType::Full => k * d * (d + 1) / 2,
        };
        k - 1 + k * d + cov
    }

    fn components(&self) -> Result<Vec<Component>> {
        let d = self.dim() as f64;
        match &self.covariances {
            Covariances::Diagonal(vars) => Ok(self
                .means
                .iter()
                .zip(vars)
                .map(|(m, v)| {
                    let log_det: f64 = v.iter().map(|x| x.ln()).sum();
                    Component::Diag {
                        mean: m.clone(),
                        inv_var: v.iter().map(|x| 1.0 / x).collect(),
                        log_norm: -0.5 * (d * LN_2PI + log_det),
                    }
                })
                .collect()),
            Covariances::Full(covs) => self
                .means
                .iter()
                .zip(covs)
                .map(|(m, c)| {
                    let chol = c.clone().cholesky().ok_or_else(|| {
                        Error::Degenerate("covariance is not positive definite".into())
                    })?;
                    let l = chol.l();
                    let log_det = 2.0 * l.diagonal().iter().map(|x| x.ln()).sum::<f64>();
                    Ok(Component::Full {
                        mean: DVector::from_column_slice(m),
                        chol_l: l,
                        log_norm: -0.5 * (d * LN_2PI + log_det),
                    })
                })
                .collect(),
        }
    }

    /// `log p(x)` per sample.
    pub fn log_densities(&self, samples: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_dims(samples, self.dim())?;
        let comps = self.components()?;
        let log_w: Vec<f64> = self.weights.iter().map(|w| w.ln()).collect();
        let mut buf = vec![0.0; self.k()];
        Ok(samples
            .iter()
            .map(|x| {
                for (j, c) in comps.iter().enumerate() {
                    buf[j] = log_w[j] + c.log_density(x);
                }
                log_sum_exp(&buf)
            })
            .collect())
    }
}

fn check_dims(samples: &[Vec<f64>], dim: usize) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::invalid("no samples"));
    }
    if let Some(bad) = samples.iter().find(|s| s.len() != dim) {
        return Err(Error::shape("gmm samples", &[bad.len()], &[dim]));
    }
    Ok(())
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Mean log-likelihood of `samples` under `model`.
pub fn gmm_log_likelihood(model: &GmmModel, samples: &[Vec<f64>]) -> Result<f64> {
    let ld = model.log_densities(samples)?;
    Ok(ld.iter().sum::<f64>() / ld.len() as f64)
}

/// `p ln n - 2 ln L` for the model on `samples`.
pub fn bic(model: &GmmModel, samples: &[Vec<f64>]) -> Result<f64> {
    let n = samples.len() as f64;
    let ll = gmm_log_likelihood(model, samples)? * n;
    Ok(model.num_free_params() as f64 * n.ln() - 2.0 * ll)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: first centre uniform, the rest drawn proportionally
/// to squared distance from the nearest chosen centre.
fn kmeans_pp(samples: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = samples.len();
    let mut centres = vec![samples[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = samples.iter().map(|x| sq_dist(x, &centres[0])).collect();
    while centres.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, w) in d2.iter().enumerate() {
                if u < *w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        let c = samples[idx].clone();
        for (d, x) in d2.iter_mut().zip(samples) {
            *d = d.min(sq_dist(x, &c));
        }
        centres.push(c);
    }
    centres
}

/// Closed-form M-step from responsibilities `resp[i * k + j]`.
fn m_step(
    samples: &[Vec<f64>],
    resp: &[f64],
    k: usize,
    cfg: &GmmConfig,
    prev: Option<&GmmModel>,
) -> GmmModel {
    let (n, d) = (samples.len(), samples[0].len());
    let mut weights = vec![0.0; k];
    let mut means = vec![vec![0.0; d]; k];
    for (i, x) in samples.iter().enumerate() {
        for j in 0..k {
            let r = resp[i * k + j];
            weights[j] += r;
            for (m, v) in means[j].iter_mut().zip(x) {
                *m += r * v;
            }
        }
    }
    // a component with no support keeps its previous parameters
    let empty: Vec<bool> = weights.iter().map(|w| *w < 1e-12).collect();
    for j in 0..k {
        if empty[j] {
            means[j] = prev.map_or_else(|| samples[j % n].clone(), |p| p.means[j].clone());
        } else {
            means[j].iter_mut().for_each(|m| *m /= weights[j]);
        }
    }
    let covariances = match cfg.covariance {
        CovarianceType::Diagonal => {
            let mut vars = vec![vec![0.0; d]; k];
            for (i, x) in samples.iter().enumerate() {
                for j in 0..k {
                    let r = resp[i * k + j];
                    for ((v, xv), m) in vars[j].iter_mut().zip(x).zip(&means[j]) {
                        *v += r * (xv - m) * (xv - m);
                    }
                }
            }
            for j in 0..k {
                if empty[j] {
                    vars[j] = match prev.map(|p| &p.covariances) {
                        Some(Covariances::Diagonal(v)) => v[j].clone(),
                        _ => vec![1.0; d],
                    };
                } else {
                    vars[j]
                        .iter_mut()
                        .for_each(|v| *v = (*v / weights[j]).max(cfg.floor));
                }
            }
            Covariances::Diagonal(vars)
        }
        CovarianceType::Full => {
            let mut covs = vec![DMatrix::<f64>::zeros(d, d); k];
            for (i, x) in samples.iter().enumerate() {
                for j in 0..k {
                    let r = resp[i * k + j];
                    let diff =
                        DVector::from_iterator(d, x.iter().zip(&means[j]).map(|(a, b)| a - b));
                    covs[j] += &diff * diff.transpose() * r;
                }
            }
            for j in 0..k {
                if empty[j] {
                    covs[j] = match prev.map(|p| &p.covariances) {
                        Some(Covariances::Full(c)) => c[j].clone(),
                        _ => DMatrix::identity(d, d),
                    };
                } else {
                    covs[j] /= weights[j];
                    covs[j] = clamp_eigenvalues(&covs[j], cfg.floor);
                }
            }
            Covariances::Full(covs)
        }
    };
    let total: f64 = weights.iter().sum();
    let weights = weights
        .iter()
        .map(|w| (w / total).max(f64::MIN_POSITIVE))
        .collect();
    GmmModel {
        weights,
        means,
        covariances,
    }
}

/// Nearest symmetric matrix with every eigenvalue at least `floor`.
fn clamp_eigenvalues(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let vals = eig.eigenvalues.map(|v| v.max(floor));
    let q = &eig.eigenvectors;
    q * DMatrix::from_diagonal(&vals) * q.transpose()
}

/// E-step: mean log-likelihood and responsibilities.
fn e_step(model: &GmmModel, samples: &[Vec<f64>], resp: &mut [f64]) -> Result<f64> {
    let k = model.k();
    let comps = model.components()?;
    let log_w: Vec<f64> = model.weights.iter().map(|w| w.ln()).collect();
    let mut total = 0.0;
    for (i, x) in samples.iter().enumerate() {
        let row = &mut resp[i * k..(i + 1) * k];
        for j in 0..k {
            row[j] = log_w[j] + comps[j].log_density(x);
        }
        let lse = log_sum_exp(row);
        total += lse;
        row.iter_mut().for_each(|r| *r = (*r - lse).exp());
    }
    Ok(total / samples.len() as f64)
}

fn fit_once(samples: &[Vec<f64>], k: usize, cfg: &GmmConfig, seed: u64) -> Result<GmmFit> {
    let n = samples.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres = kmeans_pp(samples, k, &mut rng);
    let mut resp = vec![0.0; n * k];
    for (i, x) in samples.iter().enumerate() {
        let j = (0..k)
            .min_by(|&a, &b| sq_dist(x, &centres[a]).total_cmp(&sq_dist(x, &centres[b])))
            .expect("k >= 1");
        resp[i * k + j] = 1.0;
    }
    let mut model = m_step(samples, &resp, k, cfg, None);
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        let ll = e_step(&model, samples, &mut resp)?;
        if !ll.is_finite() {
            return Err(Error::NonFinite {
                what: "GMM log-likelihood".into(),
                step: history.len(),
            });
        }
        if let Some(prev) = history.last() {
            let prev: f64 = *prev;
            if (ll - prev).abs() <= cfg.tol * prev.abs().max(1e-300) {
                history.push(ll);
                converged = true;
                break;
            }
        }
        history.push(ll);
        model = m_step(samples, &resp, k, cfg, Some(&model));
    }
    if !converged {
        // score the final M-step so the trace ends at the returned model
        history.push(e_step(&model, samples, &mut resp)?);
    }
    Ok(GmmFit {
        model,
        log_likelihoods: history,
        converged,
    })
}

/// Fits a `k`-component mixture, keeping the best of `cfg.n_init` seeded
/// restarts.
pub fn gmm_fit_em(samples: &[Vec<f64>], k: usize, cfg: &GmmConfig) -> Result<GmmFit> {
    if k == 0 {
        return Err(Error::invalid("GMM needs k >= 1"));
    }
    let d = samples.first().map_or(0, |s| s.len());
    if d == 0 {
        return Err(Error::invalid(
            "GMM needs non-empty samples of dimension >= 1",
        ));
    }
    check_dims(samples, d)?;
    if samples.len() <= k {
        return Err(Error::invalid(format!(
            "GMM needs more samples than components ({} <= {k})",
            samples.len()
        )));
    }
    if samples.iter().all(|s| s == &samples[0]) {
        return Err(Error::Degenerate("all samples are identical".into()));
    }
    if samples.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("samples contain non-finite values"));
    }
    let mut best: Option<GmmFit> = None;
    for r in 0..cfg.n_init.max(1) {
        let fit = fit_once(
            samples,
            k,
            cfg,
            cfg.seed.wrapping_mul(1_000_003).wrapping_add(r as u64),
        )?;
        let better = best
            .as_ref()
            .is_none_or(|b| fit.log_likelihoods.last() > b.log_likelihoods.last());
        if better {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// BIC model selection result.
#[derive(Clone, Debug)]
pub struct KSelection {
    pub k: usize,
    pub model: GmmModel,
    /// `(k, bic)` for every candidate.
    pub bics: Vec<(usize, f64)>,
}

/// Fits each `k` in `k_range` with the same seed schedule and returns the
/// BIC minimizer.
pub fn gmm_select_k(
    samples: &[Vec<f64>],
    k_range: std::ops::RangeInclusive<usize>,
    cfg: &GmmConfig,
) -> Result<KSelection> {
    if k_range.is_empty() || *k_range.start() == 0 {
        return Err(Error::invalid(
            "k range must be non-empty and start at 1 or above",
        ));
    }
    let mut best: Option<(f64, usize, GmmModel)> = None;
    let mut bics = Vec::new();
    for k in k_range {
        if k >= samples.len() {
            break;
        }
        let fit = gmm_fit_em(samples, k, cfg)?;
        let b = bic(&fit.model, samples)?;
        bics.push((k, b));
        if best.as_ref().is_none_or(|(bb, _, _)| b < *bb) {
            best = Some((b, k, fit.model));
        }
    }
    let (_, k, model) = best.ok_or_else(|| Error::invalid("k range exceeds the sample count"))?;
    Ok(KSelection { k, model, bics })
}
