use rand::Rng;

use crate::autodiff::Var;
use crate::error::{Error, Result};
use crate::layers::softmax_cross_entropy;
use crate::tensor::Tensor;

/// `mean(d_real) - mean(d_fake)`.
pub fn wasserstein_estimate(d_real: &[f64], d_fake: &[f64]) -> Result<f64> {
    if d_real.is_empty() || d_fake.is_empty() {
        return Err(Error::invalid("wasserstein estimate of an empty batch"));
    }
    if d_real.len() != d_fake.len() {
        return Err(Error::shape(
            "wasserstein_estimate",
            &[d_real.len()],
            &[d_fake.len()],
        ));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(mean(d_real) - mean(d_fake))
}

/// Critic objective `mean(d_fake) - mean(d_real) + λ gp`.
pub fn loss_discriminator(d_real: &Var, d_fake: &Var, gp: &Var, lambda: f64) -> Result<Var> {
    d_fake
        .mean()?
        .sub(&d_real.mean()?)?
        .add(&gp.mul_scalar(lambda)?)
}

/// Generator objective `-mean(d_fake)`.
pub fn loss_generator(d_fake: &Var) -> Result<Var> {
    d_fake.mean()?.neg()
}

/// Conditional generator objective `-mean(d_fake) + CE(logits_fake, y_f)`.
pub fn loss_generator_cc(d_fake: &Var, class_logits_fake: &Var, y_fake: &[usize]) -> Result<Var> {
    loss_generator(d_fake)?.add(&softmax_cross_entropy(class_logits_fake, y_fake)?)
}

/// Classifier objective `CE(real) + CE(fake)`.
pub fn loss_classifier(
    class_logits_real: &Var,
    y_real: &[usize],
    class_logits_fake: &Var,
    y_fake: &[usize],
) -> Result<Var> {
    softmax_cross_entropy(class_logits_real, y_real)?
        .add(&softmax_cross_entropy(class_logits_fake, y_fake)?)
}

/// One mixing weight `ε ~ U(0, 1)` per sample.
pub fn interpolation_weights<R: Rng + ?Sized>(batch: usize, rng: &mut R) -> Vec<f64> {
    (0..batch).map(|_| rng.random::<f64>()).collect()
}

/// `x̂ = ε x_r + (1 - ε) x_f` with one `ε` per sample.
pub fn interpolate(x_real: &Tensor, x_fake: &Tensor, eps: &[f64]) -> Result<Tensor> {
    if x_real.shape() != x_fake.shape() {
        return Err(Error::shape(
            "gradient_penalty",
            x_real.shape(),
            x_fake.shape(),
        ));
    }
    let b = x_real.shape()[0];
    if eps.len() != b {
        return Err(Error::shape("gradient_penalty eps", &[eps.len()], &[b]));
    }
    let w = x_real.numel() / b;
    let data = x_real
        .data()
        .iter()
        .zip(x_fake.data())
        .enumerate()
        .map(|(i, (r, f))| {
            let e = eps[i / w];
            e * r + (1.0 - e) * f
        })
        .collect();
    Tensor::new(x_real.shape().to_vec(), data)
}

/// Squared-norm offset keeping the norm differentiable at a zero gradient.
const NORM_EPS: f64 = 1e-24;

/// Mean over the batch of `(‖∇_x̂ D(x̂)‖₂ - 1)²` at given interpolates. The
/// result stays differentiable with respect to the critic parameters.
pub fn gradient_penalty_at<F>(mut critic: F, x_hat: &Var) -> Result<Var>
where
    F: FnMut(&Var) -> Result<Var>,
{
    let b = x_hat.shape()[0];
    let scores = critic(x_hat)?;
    if scores.value().numel() != b {
        return Err(Error::shape("critic output", scores.shape(), &[b, 1]));
    }
    let total = scores.sum()?;
    let grads = x_hat.tape().grad(&total, &[x_hat], true)?;
    let g = &grads[0];
    let w = g.value().numel() / b;
    let sq = g.square()?.reshape(&[b, w])?.sum_to(&[b, 1])?;
    sq.add_scalar(NORM_EPS)?
        .sqrt()?
        .add_scalar(-1.0)?
        .square()?
        .mean()
}

/// Gradient penalty on random interpolates between a real and a fake
/// batch.
pub fn gradient_penalty<F, R>(critic: F, x_real: &Var, x_fake: &Var, rng: &mut R) -> Result<Var>
where
    F: FnMut(&Var) -> Result<Var>,
    R: Rng + ?Sized,
{
    let eps = interpolation_weights(x_real.shape()[0], rng);
    let x_hat = interpolate(x_real.value(), x_fake.value(), &eps)?;
    let x_hat = x_real.tape().leaf(x_hat.with_requires_grad(true));
    gradient_penalty_at(critic, &x_hat)
}
