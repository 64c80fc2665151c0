//! Layer vocabulary of the generator and critic stacks.
//!
//! Every function here is differentiable through the tape. Layers that draw
//! randomness take the RNG of the owning training context explicitly.

mod upsample;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{ConvGeom, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub use upsample::{
    bilinear_init_weights, bilinear_kernel_2d, cubic_kernel, deconv_kernel_size, deconv_padding,
    interpolation_matrix, source_coordinate, upsample_interpolate, InterpMethod, BICUBIC_A,
};

pub const LEAKY_RELU_SLOPE: f64 = 0.2;
pub const NOISE_STD: f64 = 0.05;
pub const BN_MOMENTUM: f64 = 0.99;
pub const BN_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Initialization scheme for a parameterized layer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum WeightInit {
    /// Linear-interpolation kernel for a transposed convolution; output
    /// channel `o` reads input channel `o % c_in`.
    BilinearDeconv,
    /// Uniform in `[-s, s]`, `s = sqrt(6 / (fan_in + fan_out))`.
    UniformSmall,
    Zeros,
}

/// Declarative description of one layer.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerConfig {
    Dense {
        units: usize,
    },
    Conv2d {
        filters: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: (usize, usize),
    },
    TransposedConv2d {
        filters: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: (usize, usize),
        init: WeightInit,
    },
    UpsampleNearest {
        factor: (usize, usize),
    },
    UpsampleBicubic {
        factor: (usize, usize),
    },
    BatchNorm,
    LeakyReLU {
        slope: f64,
    },
    GaussianNoise {
        sigma: f64,
    },
    /// Per-sample target shape (batch axis excluded).
    Reshape {
        shape: Vec<usize>,
    },
    CenterCrop {
        height: usize,
        width: usize,
    },
    ZeroMeanNormalize,
    /// Label embedding multiplied elementwise into the latent vector.
    ClassEmbedding {
        num_classes: usize,
    },
    /// Fully connected layer producing class logits.
    SoftmaxHead {
        classes: usize,
    },
}

impl LayerConfig {
    /// Checks kind-specific preconditions.
    pub fn validate(&self) -> Result<()> {
        match self {
            LayerConfig::Dense { units } | LayerConfig::SoftmaxHead { classes: units }
                if *units == 0 =>
            {
                Err(Error::invalid("dense layer needs at least one unit"))
            }
            LayerConfig::Conv2d {
                filters,
                kernel,
                stride,
                ..
            } => {
                if *filters == 0 || kernel.0 == 0 || kernel.1 == 0 || stride.0 == 0 || stride.1 == 0
                {
                    Err(Error::invalid(format!("invalid conv layer {self:?}")))
                } else {
                    Ok(())
                }
            }
            LayerConfig::TransposedConv2d {
                filters,
                kernel,
                stride,
                init,
                ..
            } => {
                if *filters == 0 || stride.0 == 0 || stride.1 == 0 {
                    return Err(Error::invalid(format!("invalid deconv layer {self:?}")));
                }
                if *init == WeightInit::BilinearDeconv
                    && (kernel.0 != deconv_kernel_size(stride.0)?
                        || kernel.1 != deconv_kernel_size(stride.1)?)
                {
                    return Err(Error::InvalidArgument(format!(
                        "bilinear init needs kernel 2*stride - stride%2 per axis, got {kernel:?} for stride {stride:?}"
                    )));
                }
                Ok(())
            }
            LayerConfig::UpsampleNearest { factor } | LayerConfig::UpsampleBicubic { factor }
                if factor.0 == 0 || factor.1 == 0 =>
            {
                Err(Error::invalid("upsampling factor must be >= 1"))
            }
            LayerConfig::GaussianNoise { sigma } if sigma.is_nan() || *sigma < 0.0 => {
                Err(Error::invalid("noise sigma must be >= 0"))
            }
            LayerConfig::ClassEmbedding { num_classes } if *num_classes == 0 => {
                Err(Error::invalid("embedding needs at least one class"))
            }
            _ => Ok(()),
        }
    }
}

pub fn leaky_relu(x: &Var, slope: f64) -> Result<Var> {
    x.leaky_relu(slope)
}

/// `x [B, in] · w [in, out] + b [out]`.
pub fn dense(x: &Var, w: &Var, b: &Var) -> Result<Var> {
    let y = x.matmul(w)?;
    let out = y.shape()[1];
    let bias = b.reshape(&[1, out])?.broadcast_to(y.shape())?;
    y.add(&bias)
}

/// Convolution plus per-filter bias.
pub fn conv2d_bias(x: &Var, w: &Var, b: &Var, geom: ConvGeom) -> Result<Var> {
    let y = x.conv2d(w, geom)?;
    add_channel_bias(&y, b)
}

pub(crate) fn add_channel_bias(y: &Var, b: &Var) -> Result<Var> {
    let c = y.shape()[1];
    let bias = b.reshape(&[1, c, 1, 1])?.broadcast_to(y.shape())?;
    y.add(&bias)
}

/// Adds i.i.d. `N(0, sigma^2)` noise in training mode; identity otherwise.
pub fn gaussian_noise<R: Rng + ?Sized>(
    x: &Var,
    sigma: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<Var> {
    if sigma.is_nan() || sigma < 0.0 {
        return Err(Error::invalid("noise sigma must be >= 0"));
    }
    if mode == Mode::Eval || sigma == 0.0 {
        return Ok(x.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let noise: Vec<f64> = (0..x.value().numel()).map(|_| normal.sample(rng)).collect();
    let noise = x.tape().constant(Tensor::new(x.shape().to_vec(), noise)?);
    x.add(&noise)
}

/// Offsets of a centred crop along one axis; odd excess is dropped from the
/// trailing edge.
pub fn crop_offset(from: usize, to: usize) -> usize {
    (from - to) / 2
}

/// Crops the two trailing axes to `target_h x target_w`.
pub fn center_crop(x: &Var, target_h: usize, target_w: usize) -> Result<Var> {
    let shape = x.shape();
    let r = shape.len();
    if r < 2 {
        return Err(Error::InvalidShape {
            shape: shape.to_vec(),
            reason: "center_crop needs at least two axes".into(),
        });
    }
    let (h, w) = (shape[r - 2], shape[r - 1]);
    if target_h > h || target_w > w || target_h == 0 || target_w == 0 {
        return Err(Error::shape("center_crop", shape, &[target_h, target_w]));
    }
    let mut offsets = vec![0; r];
    offsets[r - 2] = crop_offset(h, target_h);
    offsets[r - 1] = crop_offset(w, target_w);
    let mut target = shape.to_vec();
    target[r - 2] = target_h;
    target[r - 1] = target_w;
    x.crop(&offsets, &target)
}

/// Subtracts each sample's mean (over all non-batch axes).
pub fn zero_mean_normalize(x: &Var) -> Result<Var> {
    let shape = x.shape().to_vec();
    let mut stat = vec![1; shape.len()];
    stat[0] = shape[0];
    let per_sample = (x.value().numel() / shape[0]) as f64;
    let mean = x.sum_to(&stat)?.mul_scalar(1.0 / per_sample)?;
    x.sub(&mean.broadcast_to(&shape)?)
}

/// Running statistics of a batch-norm layer.
#[derive(Debug)]
pub struct RunningStats<'a> {
    pub mean: &'a mut [f64],
    pub var: &'a mut [f64],
    pub momentum: f64,
}

/// Batch normalization over axis 1 of a `[N, C]` or `[N, C, H, W]` tensor.
///
/// In training mode the batch statistics are used and the running averages
/// are updated as `running = momentum * running + (1 - momentum) * batch`
/// (unbiased batch variance). Evaluation mode normalizes with the running
/// averages.
pub fn batch_norm(
    x: &Var,
    gamma: &Var,
    beta: &Var,
    running: RunningStats<'_>,
    mode: Mode,
    eps: f64,
) -> Result<Var> {
    let shape = x.shape().to_vec();
    if shape.len() < 2 {
        return Err(Error::InvalidShape {
            shape,
            reason: "batch_norm needs [N, C, ...]".into(),
        });
    }
    let c = shape[1];
    if gamma.shape() != [c]
        || beta.shape() != [c]
        || running.mean.len() != c
        || running.var.len() != c
    {
        return Err(Error::shape("batch_norm", &shape, gamma.shape()));
    }
    let mut stat = vec![1; shape.len()];
    stat[1] = c;
    let gamma_b = gamma.reshape(&stat)?.broadcast_to(&shape)?;
    let beta_b = beta.reshape(&stat)?.broadcast_to(&shape)?;
    let tape = x.tape();
    let normalized = match mode {
        Mode::Train => {
            if shape[0] < 2 {
                return Err(Error::invalid(
                    "batch_norm in training mode needs a batch of at least 2",
                ));
            }
            let m = (x.value().numel() / c) as f64;
            let mean = x.sum_to(&stat)?.mul_scalar(1.0 / m)?;
            let centered = x.sub(&mean.broadcast_to(&shape)?)?;
            let var = centered.square()?.sum_to(&stat)?.mul_scalar(1.0 / m)?;
            let inv_std = var.add_scalar(eps)?.sqrt()?.recip()?;
            for ch in 0..c {
                let unbiased = var.data()[ch] * m / (m - 1.0);
                running.mean[ch] = running.momentum * running.mean[ch]
                    + (1.0 - running.momentum) * mean.data()[ch];
                running.var[ch] =
                    running.momentum * running.var[ch] + (1.0 - running.momentum) * unbiased;
            }
            centered.mul(&inv_std.broadcast_to(&shape)?)?
        }
        Mode::Eval => {
            let mean = tape.constant(Tensor::new(stat.clone(), running.mean.to_vec())?);
            let inv: Vec<f64> = running.var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
            let inv = tape.constant(Tensor::new(stat.clone(), inv)?);
            x.sub(&mean.broadcast_to(&shape)?)?
                .mul(&inv.broadcast_to(&shape)?)?
        }
    };
    normalized.mul(&gamma_b)?.add(&beta_b)
}

/// Rows of the `[num_classes, dim]` embedding table selected by `labels`.
pub fn class_embedding(labels: &[usize], table: &Var) -> Result<Var> {
    table.gather_rows(labels)
}

/// Row-wise softmax of `[B, K]` logits.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    let [b, k] = <[usize; 2]>::try_from(logits.shape()).map_err(|_| Error::InvalidShape {
        shape: logits.shape().to_vec(),
        reason: "softmax expects [batch, classes]".into(),
    })?;
    let mut out = Vec::with_capacity(b * k);
    for row in logits.data().chunks(k) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        out.extend(exps.into_iter().map(|e| e / z));
    }
    Tensor::new(vec![b, k], out)
}

/// Row-wise log-softmax of `[B, K]` logits, stabilized by the (constant)
/// row maximum.
pub fn log_softmax(logits: &Var) -> Result<Var> {
    let shape = logits.shape().to_vec();
    if shape.len() != 2 {
        return Err(Error::InvalidShape {
            shape,
            reason: "log_softmax expects [batch, classes]".into(),
        });
    }
    let (b, k) = (shape[0], shape[1]);
    let maxes: Vec<f64> = logits
        .data()
        .chunks(k)
        .map(|r| r.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let maxes = logits.tape().constant(Tensor::new(vec![b, 1], maxes)?);
    let shifted = logits.sub(&maxes.broadcast_to(&shape)?)?;
    let lse = shifted.exp()?.sum_to(&[b, 1])?.ln()?;
    shifted.sub(&lse.broadcast_to(&shape)?)
}

/// Mean negative log-likelihood of `labels` under softmax(`logits`).
pub fn softmax_cross_entropy(logits: &Var, labels: &[usize]) -> Result<Var> {
    let shape = logits.shape();
    if shape.len() != 2 || shape[0] != labels.len() {
        return Err(Error::shape(
            "softmax_cross_entropy",
            shape,
            &[labels.len()],
        ));
    }
    let (b, k) = (shape[0], shape[1]);
    let mut onehot = vec![0.0; b * k];
    for (i, &y) in labels.iter().enumerate() {
        if y >= k {
            return Err(Error::LabelOutOfRange {
                label: y,
                num_classes: k,
            });
        }
        onehot[i * k + y] = 1.0;
    }
    let onehot = logits.tape().constant(Tensor::new(vec![b, k], onehot)?);
    log_softmax(logits)?
        .mul(&onehot)?
        .sum()?
        .mul_scalar(-1.0 / b as f64)
}
