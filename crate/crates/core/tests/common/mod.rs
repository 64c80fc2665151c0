//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use waveforge::autodiff::{ConvGeom, Tape, Var};
use waveforge::layers::{
    self, batch_norm, center_crop, class_embedding, conv2d_bias, deconv_kernel_size, deconv_padding, dense,
    gaussian_noise, leaky_relu, log_softmax, softmax_cross_entropy, upsample_interpolate, zero_mean_normalize,
    InterpMethod, Mode, RunningStats,
};
use waveforge::training::{gradient_penalty_at, loss_classifier, loss_discriminator, loss_generator, loss_generator_cc};
use waveforge::{Result, Tensor};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform entries in `[-1, 1]`, kept at least `0.02` away from zero so
/// that leaky-ReLU kinks are never straddled by a finite difference.
pub fn rand_tensor(shape: &[usize], r: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let v: f64 = r.random_range(0.02..1.0);
            if r.random::<bool>() {
                v
            } else {
                -v
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// Projects an output onto fixed random weights, giving a scalar whose
/// gradient exercises every output element.
fn project(out: &Var, w: &Tensor) -> Result<Var> {
    out.mul(&out.tape().constant(w.clone()))?.sum()
}

/// Compares reverse-mode gradients of `sum(f(inputs) * w)` with central
/// differences on up to `probe` entries per input. Returns the worst
/// norm-wise relative error `|g - g_fd| / max(|g|, |g_fd|)` over inputs.
pub fn grad_check<F>(inputs: &[Tensor], f: F, seed: u64, probe: usize) -> f64
where
    F: Fn(&[Var]) -> Result<Var>,
{
    let mut r = rng(seed ^ 0xfd);
    let tape = Tape::new();
    let leaves: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone().with_requires_grad(true))).collect();
    let out = f(&leaves).unwrap();
    let w = rand_tensor(out.shape(), &mut r);
    project(&out, &w).unwrap().backward().unwrap();
    let analytic: Vec<Vec<f64>> = leaves
        .iter()
        .map(|l| l.grad().map(|g| g.data().to_vec()).unwrap_or_else(|| vec![0.0; l.value().numel()]))
        .collect();

    let eval = |xs: &[Tensor]| -> f64 {
        let t = Tape::new();
        let vs: Vec<Var> = xs.iter().map(|x| t.leaf(x.clone().with_requires_grad(true))).collect();
        project(&f(&vs).unwrap(), &w).unwrap().item().unwrap()
    };
    let h = 1e-5;
    let mut worst = 0.0f64;
    for (i, x) in inputs.iter().enumerate() {
        let n = x.numel();
        let idx: Vec<usize> = if n <= probe {
            (0..n).collect()
        } else {
            (0..probe).map(|_| r.random_range(0..n)).collect()
        };
        let (mut diff, mut na, mut nn) = (0.0, 0.0, 0.0);
        for &j in &idx {
            let mut xs = inputs.to_vec();
            xs[i].data_mut()[j] = x.data()[j] + h;
            let up = eval(&xs);
            xs[i].data_mut()[j] = x.data()[j] - h;
            let down = eval(&xs);
            let fd = (up - down) / (2.0 * h);
            let a = analytic[i][j];
            diff += (a - fd).powi(2);
            na += a * a;
            nn += fd * fd;
        }
        let scale = na.sqrt().max(nn.sqrt());
        if scale > 1e-12 {
            worst = worst.max(diff.sqrt() / scale);
        }
    }
    worst
}

/// One finite-difference configuration of the suite.
pub struct GradCase {
    pub name: String,
    pub rel_err: f64,
    pub tol: f64,
}

impl GradCase {
    pub fn ok(&self) -> bool {
        self.rel_err < self.tol
    }
}

const TOL: f64 = 1e-4;
const TOL_NESTED: f64 = 1e-3;

/// Small critic `D(x) = dense(flatten(lrelu(conv(x, k) + b)), w, c)` on
/// `[B, 1, 1, 16]` inputs.
fn tiny_critic(x: &Var, p: &[Var], stride: usize) -> Result<Var> {
    let b = x.shape()[0];
    let h = conv2d_bias(x, &p[0], &p[1], ConvGeom::new((1, stride), (0, 1)))?;
    let h = leaky_relu(&h, layers::LEAKY_RELU_SLOPE)?;
    let n = h.value().numel() / b;
    dense(&h.reshape(&[b, n])?, &p[2], &p[3])
}

fn tiny_critic_params(stride: usize, filters: usize, r: &mut ChaCha8Rng) -> Vec<Tensor> {
    let w_out = (16 + 2 - 3) / stride + 1;
    vec![
        rand_tensor(&[filters, 1, 1, 3], r),
        rand_tensor(&[filters], r),
        rand_tensor(&[filters * w_out, 1], r),
        rand_tensor(&[1], r),
    ]
}

/// Finite-difference checks over every layer kind and both loss families;
/// at least 100 configurations drawn from `seed`.
pub fn gradient_suite(seed: u64) -> Vec<GradCase> {
    let mut r = rng(seed);
    let mut cases = Vec::new();
    let mut push = |name: String, rel_err: f64, tol: f64| cases.push(GradCase { name, rel_err, tol });
    let probe = 12;

    for k in 0..10 {
        let (b, i, o) = (r.random_range(1..5), r.random_range(1..9), r.random_range(1..7));
        let xs = [rand_tensor(&[b, i], &mut r), rand_tensor(&[i, o], &mut r), rand_tensor(&[o], &mut r)];
        let e = grad_check(&xs, |v| dense(&v[0], &v[1], &v[2]), seed + k, probe);
        push(format!("dense {b}x{i}->{o}"), e, TOL);
    }
    for k in 0..16 {
        let (kh, kw) = (r.random_range(1..4), r.random_range(1..5));
        let (sh, sw) = (r.random_range(1..3), r.random_range(1..4));
        let (ph, pw) = (r.random_range(0..kh), r.random_range(0..kw));
        let (c, f) = (r.random_range(1..4), r.random_range(1..4));
        let (h, w) = (r.random_range(kh..kh + 4), r.random_range(kw..kw + 7));
        let xs = [
            rand_tensor(&[2, c, h, w], &mut r),
            rand_tensor(&[f, c, kh, kw], &mut r),
            rand_tensor(&[f], &mut r),
        ];
        let g = ConvGeom::new((sh, sw), (ph, pw));
        let e = grad_check(&xs, |v| conv2d_bias(&v[0], &v[1], &v[2], g), seed + 100 + k, probe);
        push(format!("conv2d k{kh}x{kw} s{sh}x{sw} p{ph}x{pw} c{c} f{f} in{h}x{w}"), e, TOL);
    }
    for k in 0..16 {
        let (sh, sw) = (r.random_range(1..4), r.random_range(1..5));
        let (kh, kw) = (deconv_kernel_size(sh).unwrap(), deconv_kernel_size(sw).unwrap());
        let (ph, pw) = (deconv_padding(sh).unwrap(), deconv_padding(sw).unwrap());
        let (ci, co) = (r.random_range(1..4), r.random_range(1..4));
        let (h, w) = (r.random_range(1..4), r.random_range(2..7));
        let xs = [rand_tensor(&[2, ci, h, w], &mut r), rand_tensor(&[ci, co, kh, kw], &mut r)];
        let g = ConvGeom::new((sh, sw), (ph, pw));
        let e = grad_check(&xs, |v| v[0].transposed_conv2d(&v[1], g, (0, 0)), seed + 200 + k, probe);
        push(format!("transposed conv k{kh}x{kw} s{sh}x{sw} ci{ci} co{co} in{h}x{w}"), e, TOL);
    }
    for k in 0..10 {
        let method = if k % 2 == 0 { InterpMethod::Bicubic } else { InterpMethod::Nearest };
        let fac = (r.random_range(1..3), r.random_range(2..5));
        let (h, w) = (r.random_range(1..4), r.random_range(2..9));
        let xs = [rand_tensor(&[2, 2, h, w], &mut r)];
        let e = grad_check(&xs, |v| upsample_interpolate(&v[0], fac, method), seed + 300 + k, probe);
        push(format!("upsample {method:?} x{fac:?} in{h}x{w}"), e, TOL);
    }
    for k in 0..10 {
        let mode = if k % 2 == 0 { Mode::Train } else { Mode::Eval };
        let shape: Vec<usize> = if k % 3 == 0 {
            vec![r.random_range(2..6), r.random_range(1..5)]
        } else {
            vec![r.random_range(2..5), r.random_range(1..4), r.random_range(1..3), r.random_range(2..6)]
        };
        let c = shape[1];
        let xs = [rand_tensor(&shape, &mut r), rand_tensor(&[c], &mut r), rand_tensor(&[c], &mut r)];
        let stats: Vec<f64> = (0..c).map(|i| 0.1 * i as f64).collect();
        let vars: Vec<f64> = (0..c).map(|i| 0.5 + 0.3 * i as f64).collect();
        let e = grad_check(
            &xs,
            |v| {
                let (mut m, mut s) = (stats.clone(), vars.clone());
                let running = RunningStats { mean: &mut m, var: &mut s, momentum: layers::BN_MOMENTUM };
                batch_norm(&v[0], &v[1], &v[2], running, mode, layers::BN_EPS)
            },
            seed + 400 + k,
            probe,
        );
        push(format!("batch_norm {mode:?} {shape:?}"), e, TOL);
    }
    for k in 0..5 {
        let xs = [rand_tensor(&[3, 2, 1, 7], &mut r)];
        let e = grad_check(&xs, |v| leaky_relu(&v[0], layers::LEAKY_RELU_SLOPE), seed + 500 + k, probe);
        push("leaky_relu".into(), e, TOL);
    }
    for k in 0..5 {
        let xs = [rand_tensor(&[2, 3, 1, 6], &mut r)];
        let e = grad_check(
            &xs,
            |v| gaussian_noise(&v[0], layers::NOISE_STD, Mode::Train, &mut rng(k)),
            seed + 550 + k,
            probe,
        );
        push("gaussian_noise".into(), e, TOL);
    }
    for k in 0..5 {
        let xs = [rand_tensor(&[2, 1, 5 + k as usize, 9], &mut r)];
        let e = grad_check(
            &xs,
            |v| center_crop(&v[0], 3, 6)?.reshape(&[2, 18]),
            seed + 600 + k,
            probe,
        );
        push("center_crop + reshape".into(), e, TOL);
    }
    for k in 0..5 {
        let xs = [rand_tensor(&[3, 1, 2, 5], &mut r)];
        let e = grad_check(&xs, |v| zero_mean_normalize(&v[0]), seed + 650 + k, probe);
        push("zero_mean_normalize".into(), e, TOL);
    }
    for k in 0..5 {
        let labels: Vec<usize> = (0..4).map(|_| r.random_range(0..3)).collect();
        let xs = [rand_tensor(&[4, 5], &mut r), rand_tensor(&[3, 5], &mut r)];
        let e = grad_check(&xs, |v| v[0].mul(&class_embedding(&labels, &v[1])?), seed + 700 + k, probe);
        push("class_embedding".into(), e, TOL);
    }
    for k in 0..8 {
        let (b, cl) = (r.random_range(1..6), r.random_range(2..5));
        let labels: Vec<usize> = (0..b).map(|_| r.random_range(0..cl)).collect();
        let xs = [rand_tensor(&[b, 3], &mut r), rand_tensor(&[3, cl], &mut r), rand_tensor(&[cl], &mut r)];
        let e = if k % 2 == 0 {
            grad_check(&xs, |v| softmax_cross_entropy(&dense(&v[0], &v[1], &v[2])?, &labels), seed + 750 + k, probe)
        } else {
            grad_check(&xs, |v| log_softmax(&dense(&v[0], &v[1], &v[2])?), seed + 750 + k, probe)
        };
        push(format!("softmax head b{b} classes{cl}"), e, TOL);
    }

    // Adversarial losses through small networks.
    for k in 0..6 {
        let stride = 1 + (k as usize % 2);
        let mut params = tiny_critic_params(stride, 3, &mut r);
        params.push(rand_tensor(&[4, 1, 1, 16], &mut r));
        params.push(rand_tensor(&[4, 1, 1, 16], &mut r));
        let lambda = 10.0;
        let e = grad_check(
            &params,
            |v| {
                let real = tiny_critic(&v[4], &v[..4], stride)?;
                let fake = tiny_critic(&v[5], &v[..4], stride)?;
                let gp = gradient_penalty_at(|x| tiny_critic(x, &v[..4], stride), &v[4].mul_scalar(0.3)?.add(&v[5].mul_scalar(0.7)?)?)?;
                loss_discriminator(&real, &fake, &gp, lambda)
            },
            seed + 800 + k,
            probe,
        );
        push(format!("critic loss with penalty, stride {stride}"), e, TOL_NESTED);
    }
    for k in 0..6 {
        let stride = 1 + (k as usize % 2);
        let mut params = tiny_critic_params(stride, 2 + k as usize % 3, &mut r);
        params.push(rand_tensor(&[3, 1, 1, 16], &mut r));
        let e = grad_check(
            &params,
            |v| gradient_penalty_at(|x| tiny_critic(x, &v[..4], stride), &v[4]),
            seed + 850 + k,
            probe,
        );
        push(format!("nested penalty gradient, stride {stride}"), e, TOL_NESTED);
    }
    for k in 0..4 {
        // generator z -> dense -> reshape -> deconv -> critic
        let mut params = tiny_critic_params(1, 2, &mut r);
        params.push(rand_tensor(&[3, 5], &mut r));
        params.push(rand_tensor(&[5, 8], &mut r));
        params.push(rand_tensor(&[1, 1, 1, 4], &mut r));
        let conditional = k % 2 == 1;
        let labels = vec![0, 1, 1];
        let e = grad_check(
            &params,
            |v| {
                let h = v[4].matmul(&v[5])?.reshape(&[3, 1, 1, 8])?;
                let x = h.transposed_conv2d(&v[6], ConvGeom::new((1, 2), (0, 1)), (0, 0))?;
                let score = tiny_critic(&x, &v[..4], 1)?;
                if conditional {
                    let logits = x.reshape(&[3, 16])?.crop(&[0, 0], &[3, 2])?;
                    loss_generator_cc(&score, &logits, &labels)
                } else {
                    loss_generator(&score)
                }
            },
            seed + 900 + k,
            probe,
        );
        push(format!("generator loss (conditional: {conditional})"), e, TOL);
    }
    for k in 0..4 {
        let xs = [rand_tensor(&[4, 3], &mut r), rand_tensor(&[4, 3], &mut r)];
        let e = grad_check(
            &xs,
            |v| loss_classifier(&v[0], &[0, 1, 2, 1], &v[1], &[2, 2, 0, 1]),
            seed + 950 + k,
            probe,
        );
        push("classifier loss".into(), e, TOL);
    }
    cases
}
