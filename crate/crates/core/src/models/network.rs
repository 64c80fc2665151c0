//! Sequential layer stacks with shape inference.

use rand::{Rng, RngCore};

use super::params::{BoundParams, ModelParams, ParamGroup};
use crate::autodiff::{ConvGeom, Var};
use crate::error::{Error, Result};
use crate::layers::{self, LayerConfig, Mode, RunningStats, WeightInit, BN_EPS, BN_MOMENTUM};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub name: String,
    pub config: LayerConfig,
    /// Per-sample shapes (batch axis excluded).
    pub input_shape: Vec<usize>,
    pub output_shape: Vec<usize>,
    params: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
    pub input_shape: Vec<usize>,
}

impl Network {
    pub fn output_shape(&self) -> &[usize] {
        self.layers
            .last()
            .map_or(&self.input_shape, |l| &l.output_shape)
    }

    pub fn configs(&self) -> Vec<(&str, &LayerConfig)> {
        self.layers
            .iter()
            .map(|l| (l.name.as_str(), &l.config))
            .collect()
    }

    /// Runs the stack on a batch. Batch-norm running statistics in `store`
    /// are updated in training mode.
    pub fn forward(
        &self,
        x: &Var,
        bound: &BoundParams,
        store: &mut ModelParams,
        labels: Option<&[usize]>,
        mode: Mode,
        rng: &mut dyn RngCore,
    ) -> Result<Var> {
        let expected: Vec<usize> = std::iter::once(x.shape()[0])
            .chain(self.input_shape.iter().copied())
            .collect();
        if x.shape() != expected.as_slice() {
            return Err(Error::shape("network input", x.shape(), &expected));
        }
        let batch = x.shape()[0];
        let mut h = x.clone();
        for layer in &self.layers {
            h = apply(layer, &h, bound, store, labels, mode, rng, batch)?;
        }
        Ok(h)
    }
}

#[allow(clippy::too_many_arguments)]
fn apply(
    layer: &Layer,
    x: &Var,
    bound: &BoundParams,
    store: &mut ModelParams,
    labels: Option<&[usize]>,
    mode: Mode,
    rng: &mut dyn RngCore,
    batch: usize,
) -> Result<Var> {
    let p = |i: usize| bound.get(layer.params[i]);
    match &layer.config {
        LayerConfig::Dense { .. } | LayerConfig::SoftmaxHead { .. } => layers::dense(x, p(0), p(1)),
        LayerConfig::Conv2d {
            stride, padding, ..
        } => layers::conv2d_bias(x, p(0), p(1), ConvGeom::new(*stride, *padding)),
        LayerConfig::TransposedConv2d {
            stride, padding, ..
        } => {
            let y = x.transposed_conv2d(p(0), ConvGeom::new(*stride, *padding), (0, 0))?;
            layers::add_channel_bias(&y, p(1))
        }
        LayerConfig::UpsampleNearest { factor } => {
            layers::upsample_interpolate(x, *factor, layers::InterpMethod::Nearest)
        }
        LayerConfig::UpsampleBicubic { factor } => {
            layers::upsample_interpolate(x, *factor, layers::InterpMethod::Bicubic)
        }
        LayerConfig::BatchNorm => {
            let (gamma, beta) = (p(0).clone(), p(1).clone());
            let (mi, vi) = (layer.params[2], layer.params[3]);
            let mut mean = store.get(mi).value.data().to_vec();
            let mut var = store.get(vi).value.data().to_vec();
            let stats = RunningStats {
                mean: &mut mean,
                var: &mut var,
                momentum: BN_MOMENTUM,
            };
            let y = layers::batch_norm(x, &gamma, &beta, stats, mode, BN_EPS)?;
            if mode == Mode::Train {
                store.get_mut(mi).value.data_mut().copy_from_slice(&mean);
                store.get_mut(vi).value.data_mut().copy_from_slice(&var);
            }
            Ok(y)
        }
        LayerConfig::LeakyReLU { slope } => x.leaky_relu(*slope),
        LayerConfig::GaussianNoise { sigma } => layers::gaussian_noise(x, *sigma, mode, rng),
        LayerConfig::Reshape { shape } => {
            let full: Vec<usize> = std::iter::once(batch)
                .chain(shape.iter().copied())
                .collect();
            x.reshape(&full)
        }
        LayerConfig::CenterCrop { height, width } => layers::center_crop(x, *height, *width),
        LayerConfig::ZeroMeanNormalize => layers::zero_mean_normalize(x),
        LayerConfig::ClassEmbedding { .. } => {
            let labels =
                labels.ok_or_else(|| Error::invalid("class-conditioned layer needs labels"))?;
            if labels.len() != batch {
                return Err(Error::shape("class_embedding", &[labels.len()], &[batch]));
            }
            let emb = layers::class_embedding(labels, p(0))?;
            x.mul(&emb)
        }
    }
}

/// Glorot-uniform values.
fn uniform_init(rng: &mut dyn RngCore, n: usize, fan_in: usize, fan_out: usize) -> Vec<f64> {
    let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.random_range(-s..=s)).collect()
}

/// Incrementally builds a [`Network`], creating parameters in `store`.
pub(crate) struct NetBuilder<'a> {
    store: &'a mut ModelParams,
    group: ParamGroup,
    prefix: String,
    rng: &'a mut dyn RngCore,
    input_shape: Vec<usize>,
    shape: Vec<usize>,
    layers: Vec<Layer>,
}

impl<'a> NetBuilder<'a> {
    pub fn new(
        store: &'a mut ModelParams,
        group: ParamGroup,
        prefix: &str,
        input_shape: &[usize],
        rng: &'a mut dyn RngCore,
    ) -> Self {
        NetBuilder {
            store,
            group,
            prefix: prefix.to_string(),
            rng,
            input_shape: input_shape.to_vec(),
            shape: input_shape.to_vec(),
            layers: Vec::new(),
        }
    }

    fn param(&mut self, layer: &str, what: &str, t: Tensor, trainable: bool) -> usize {
        let name = format!("{}.{}.{}", self.prefix, layer, what);
        self.store.push(name, t, self.group, trainable)
    }

    fn chw(&self, config: &LayerConfig) -> Result<(usize, usize, usize)> {
        match self.shape.as_slice() {
            [c, h, w] => Ok((*c, *h, *w)),
            s => Err(Error::InvalidShape {
                shape: s.to_vec(),
                reason: format!("{config:?} expects [C, H, W] input"),
            }),
        }
    }

    pub fn push(&mut self, name: &str, config: LayerConfig) -> Result<&mut Self> {
        config.validate()?;
        let input_shape = self.shape.clone();
        let mut params = Vec::new();
        let output_shape = match &config {
            LayerConfig::Dense { units } | LayerConfig::SoftmaxHead { classes: units } => {
                let [fan_in] = <[usize; 1]>::try_from(self.shape.as_slice()).map_err(|_| {
                    Error::InvalidShape {
                        shape: self.shape.clone(),
                        reason: "dense layers expect flat input".into(),
                    }
                })?;
                let w = uniform_init(self.rng, fan_in * units, fan_in, *units);
                params.push(self.param(
                    name,
                    "weight",
                    Tensor::new(vec![fan_in, *units], w)?,
                    true,
                ));
                params.push(self.param(name, "bias", Tensor::zeros(&[*units])?, true));
                vec![*units]
            }
            LayerConfig::Conv2d {
                filters,
                kernel,
                stride,
                padding,
            } => {
                let (c, h, w) = self.chw(&config)?;
                let out = |n: usize, k: usize, s: usize, p: usize| {
                    (n + 2 * p)
                        .checked_sub(k)
                        .map(|v| v / s + 1)
                        .ok_or_else(|| {
                            Error::invalid(format!("{name}: kernel larger than padded input"))
                        })
                };
                let (ho, wo) = (
                    out(h, kernel.0, stride.0, padding.0)?,
                    out(w, kernel.1, stride.1, padding.1)?,
                );
                let k = kernel.0 * kernel.1;
                let wdata = uniform_init(self.rng, filters * c * k, c * k, filters * k);
                params.push(self.param(
                    name,
                    "weight",
                    Tensor::new(vec![*filters, c, kernel.0, kernel.1], wdata)?,
                    true,
                ));
                params.push(self.param(name, "bias", Tensor::zeros(&[*filters])?, true));
                vec![*filters, ho, wo]
            }
            LayerConfig::TransposedConv2d {
                filters,
                kernel,
                stride,
                padding,
                init,
            } => {
                let (c, h, w) = self.chw(&config)?;
                let out = |n: usize, k: usize, s: usize, p: usize| {
                    ((n - 1) * s + k)
                        .checked_sub(2 * p)
                        .filter(|v| *v > 0)
                        .ok_or_else(|| Error::invalid(format!("{name}: padding exceeds output")))
                };
                let (ho, wo) = (
                    out(h, kernel.0, stride.0, padding.0)?,
                    out(w, kernel.1, stride.1, padding.1)?,
                );
                let k = kernel.0 * kernel.1;
                let n = c * filters * k;
                let wdata = match init {
                    WeightInit::BilinearDeconv => {
                        let (kern, _) = layers::bilinear_kernel_2d(*stride)?;
                        let mut d = vec![0.0; n];
                        for o in 0..*filters {
                            let i = o % c;
                            let base = (i * filters + o) * k;
                            d[base..base + k].copy_from_slice(&kern);
                        }
                        d
                    }
                    WeightInit::UniformSmall => uniform_init(self.rng, n, c * k, filters * k),
                    WeightInit::Zeros => vec![0.0; n],
                };
                params.push(self.param(
                    name,
                    "weight",
                    Tensor::new(vec![c, *filters, kernel.0, kernel.1], wdata)?,
                    true,
                ));
                params.push(self.param(name, "bias", Tensor::zeros(&[*filters])?, true));
                vec![*filters, ho, wo]
            }
            LayerConfig::UpsampleNearest { factor } | LayerConfig::UpsampleBicubic { factor } => {
                let (c, h, w) = self.chw(&config)?;
                vec![c, h * factor.0, w * factor.1]
            }
            LayerConfig::BatchNorm => {
                let c = self.shape[0];
                params.push(self.param(name, "gamma", Tensor::ones(&[c])?, true));
                params.push(self.param(name, "beta", Tensor::zeros(&[c])?, true));
                params.push(self.param(name, "running_mean", Tensor::zeros(&[c])?, false));
                params.push(self.param(name, "running_var", Tensor::ones(&[c])?, false));
                self.shape.clone()
            }
            LayerConfig::LeakyReLU { .. }
            | LayerConfig::GaussianNoise { .. }
            | LayerConfig::ZeroMeanNormalize => self.shape.clone(),
            LayerConfig::Reshape { shape } => {
                let from: usize = self.shape.iter().product();
                let to: usize = shape.iter().product();
                if from != to || shape.contains(&0) {
                    return Err(Error::shape("reshape", &self.shape, shape));
                }
                shape.clone()
            }
            LayerConfig::CenterCrop { height, width } => {
                let (c, h, w) = self.chw(&config)?;
                if *height > h || *width > w {
                    return Err(Error::shape("center_crop", &self.shape, &[*height, *width]));
                }
                vec![c, *height, *width]
            }
            LayerConfig::ClassEmbedding { num_classes } => {
                let [dim] = <[usize; 1]>::try_from(self.shape.as_slice()).map_err(|_| {
                    Error::InvalidShape {
                        shape: self.shape.clone(),
                        reason: "class embedding expects a flat latent vector".into(),
                    }
                })?;
                let t = uniform_init(self.rng, num_classes * dim, *num_classes, dim);
                params.push(self.param(
                    name,
                    "table",
                    Tensor::new(vec![*num_classes, dim], t)?,
                    true,
                ));
                self.shape.clone()
            }
        };
        self.layers.push(Layer {
            name: name.to_string(),
            config,
            input_shape,
            output_shape: output_shape.clone(),
            params,
        });
        self.shape = output_shape;
        Ok(self)
    }

    pub fn finish(self) -> Network {
        Network {
            layers: self.layers,
            input_shape: self.input_shape,
        }
    }
}

/// A one-layer network on per-sample `input_shape`, with its parameters.
pub fn single_layer(
    config: LayerConfig,
    input_shape: &[usize],
    rng: &mut dyn RngCore,
) -> Result<(Network, ModelParams)> {
    let mut store = ModelParams::new();
    let mut b = NetBuilder::new(&mut store, ParamGroup::Generator, "layer", input_shape, rng);
    b.push("l0", config)?;
    let net = b.finish();
    Ok((net, store))
}
