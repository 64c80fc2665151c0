//! Generator, critic and class-conditioned model builders.

mod network;
mod params;

use std::cell::Cell;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::RngCore;

pub use network::{single_layer, Layer, Network};
pub use params::{BoundParams, ModelParams, Param, ParamGroup};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::layers::{
    deconv_kernel_size, deconv_padding, LayerConfig, Mode, WeightInit, LEAKY_RELU_SLOPE, NOISE_STD,
};
use crate::tensor::Tensor;
use network::NetBuilder;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Gen1ch,
    Disc1ch,
    Gen64ch,
    Disc64ch,
    CCGen,
    CCSharedTrunk,
    CCDiscBranch,
    CCClassBranch,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::Gen1ch,
        Variant::Disc1ch,
        Variant::Gen64ch,
        Variant::Disc64ch,
        Variant::CCGen,
        Variant::CCSharedTrunk,
        Variant::CCDiscBranch,
        Variant::CCClassBranch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Gen1ch => "gen1ch",
            Variant::Disc1ch => "disc1ch",
            Variant::Gen64ch => "gen64ch",
            Variant::Disc64ch => "disc64ch",
            Variant::CCGen => "cc-gen",
            Variant::CCSharedTrunk => "cc-trunk",
            Variant::CCDiscBranch => "cc-disc",
            Variant::CCClassBranch => "cc-class",
        }
    }

    pub fn is_cc(self) -> bool {
        matches!(
            self,
            Variant::CCGen
                | Variant::CCSharedTrunk
                | Variant::CCDiscBranch
                | Variant::CCClassBranch
        )
    }

    pub fn is_generator(self) -> bool {
        matches!(self, Variant::Gen1ch | Variant::Gen64ch | Variant::CCGen)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown model variant '{s}'")))
    }
}

/// One upsampling step of the generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UpsampleKind {
    /// Transposed convolution with uniform initialization.
    Deconv,
    /// Transposed convolution initialized to linear interpolation.
    DeconvBilinear,
    Bicubic,
    Nearest,
}

impl UpsampleKind {
    pub fn is_interpolation(self) -> bool {
        matches!(self, UpsampleKind::Bicubic | UpsampleKind::Nearest)
    }
}

/// Combination of the two generator upsampling steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UpsampleScheme {
    DcDc,
    BcBc,
    NnNn,
    BcDcbl,
    DcblBc,
    DcblDcbl,
}

impl UpsampleScheme {
    pub const ALL: [UpsampleScheme; 6] = [
        UpsampleScheme::DcDc,
        UpsampleScheme::BcBc,
        UpsampleScheme::NnNn,
        UpsampleScheme::BcDcbl,
        UpsampleScheme::DcblBc,
        UpsampleScheme::DcblDcbl,
    ];

    pub fn steps(self) -> (UpsampleKind, UpsampleKind) {
        use UpsampleKind::*;
        match self {
            UpsampleScheme::DcDc => (Deconv, Deconv),
            UpsampleScheme::BcBc => (Bicubic, Bicubic),
            UpsampleScheme::NnNn => (Nearest, Nearest),
            UpsampleScheme::BcDcbl => (Bicubic, DeconvBilinear),
            UpsampleScheme::DcblBc => (DeconvBilinear, Bicubic),
            UpsampleScheme::DcblDcbl => (DeconvBilinear, DeconvBilinear),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            UpsampleScheme::DcDc => "DC-DC",
            UpsampleScheme::BcBc => "BC-BC",
            UpsampleScheme::NnNn => "NN-NN",
            UpsampleScheme::BcDcbl => "BC-DCBL",
            UpsampleScheme::DcblBc => "DCBL-BC",
            UpsampleScheme::DcblDcbl => "DCBL-DCBL",
        }
    }
}

impl fmt::Display for UpsampleScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for UpsampleScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('_', "-");
        UpsampleScheme::ALL
            .into_iter()
            .find(|u| u.name().eq_ignore_ascii_case(&norm))
            .ok_or_else(|| Error::invalid(format!("unknown upsampling scheme '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub variant: Variant,
    pub width_scale: f64,
    pub latent_dim: usize,
    pub num_classes: usize,
    pub upsample_scheme: UpsampleScheme,
    /// Signal channels of the class-conditioned model (1 or 64).
    pub cc_channels: usize,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            variant: Variant::Gen1ch,
            width_scale: 1.0,
            latent_dim: 120,
            num_classes: 2,
            upsample_scheme: UpsampleScheme::BcDcbl,
            cc_channels: 1,
        }
    }
}

impl ModelSpec {
    pub fn new(variant: Variant) -> Self {
        ModelSpec {
            variant,
            ..ModelSpec::default()
        }
    }

    pub fn with_width_scale(mut self, width_scale: f64) -> Self {
        self.width_scale = width_scale;
        self
    }

    pub fn with_scheme(mut self, scheme: UpsampleScheme) -> Self {
        self.upsample_scheme = scheme;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width_scale > 0.0 && self.width_scale <= 1.0) {
            return Err(Error::invalid(format!(
                "width_scale must lie in (0, 1], got {}",
                self.width_scale
            )));
        }
        if self.latent_dim == 0 {
            return Err(Error::invalid("latent_dim must be positive"));
        }
        if self.num_classes == 0 {
            return Err(Error::invalid("num_classes must be positive"));
        }
        if self.cc_channels != 1 && self.cc_channels != 64 {
            return Err(Error::invalid("cc_channels must be 1 or 64"));
        }
        Ok(())
    }

    /// Channel or unit count scaled by `width_scale`, rounded up to a
    /// multiple of 4.
    pub fn scaled(&self, n: usize) -> usize {
        let v = (n as f64 * self.width_scale / 4.0).ceil() as usize * 4;
        v.max(4)
    }

    /// Number of signal channels (EEG electrodes) of a sample.
    pub fn signal_channels(&self) -> usize {
        match self.variant {
            Variant::Gen1ch | Variant::Disc1ch => 1,
            Variant::Gen64ch | Variant::Disc64ch => 64,
            _ => self.cc_channels,
        }
    }

    /// Per-sample shape `[1, H, W]` of a generated or real signal.
    pub fn sample_shape(&self) -> Vec<usize> {
        match self.signal_channels() {
            1 => vec![1, 1, 64],
            c => vec![1, c, 64],
        }
    }

    /// The same spec with a different variant.
    pub fn for_variant(&self, variant: Variant) -> ModelSpec {
        ModelSpec {
            variant,
            ..self.clone()
        }
    }

    pub fn to_kv(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("variant".into(), self.variant.to_string());
        m.insert("width_scale".into(), format!("{:?}", self.width_scale));
        m.insert("latent_dim".into(), self.latent_dim.to_string());
        m.insert("num_classes".into(), self.num_classes.to_string());
        m.insert("upsample_scheme".into(), self.upsample_scheme.to_string());
        m.insert("cc_channels".into(), self.cc_channels.to_string());
        m
    }

    /// Parses the keys written by [`ModelSpec::to_kv`]; missing keys take
    /// their defaults, unknown keys are rejected.
    pub fn from_kv(kv: &BTreeMap<String, String>) -> Result<Self> {
        let mut spec = ModelSpec::default();
        for (k, v) in kv {
            let bad = || Error::invalid(format!("invalid value '{v}' for {k}"));
            match k.as_str() {
                "variant" => spec.variant = v.parse()?,
                "width_scale" => spec.width_scale = v.parse().map_err(|_| bad())?,
                "latent_dim" => spec.latent_dim = v.parse().map_err(|_| bad())?,
                "num_classes" => spec.num_classes = v.parse().map_err(|_| bad())?,
                "upsample_scheme" => spec.upsample_scheme = v.parse()?,
                "cc_channels" => spec.cc_channels = v.parse().map_err(|_| bad())?,
                _ => return Err(Error::invalid(format!("unknown model key '{k}'"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn lrelu() -> LayerConfig {
    LayerConfig::LeakyReLU {
        slope: LEAKY_RELU_SLOPE,
    }
}

/// Spatial geometry shared by the 1- and 64-channel stacks.
struct Geometry {
    /// Kernel of ordinary convolutions.
    kernel: (usize, usize),
    pad: (usize, usize),
    /// Upsampling factor per axis.
    up: (usize, usize),
    /// Generator grid before the first upsampling.
    base: (usize, usize),
    /// Generated grid before cropping.
    full: (usize, usize),
}

fn geometry(channels: usize) -> Geometry {
    if channels == 1 {
        Geometry {
            kernel: (1, 3),
            pad: (0, 1),
            up: (1, 2),
            base: (1, 16),
            full: (1, 64),
        }
    } else {
        Geometry {
            kernel: (3, 3),
            pad: (1, 1),
            up: (2, 2),
            base: (18, 18),
            full: (72, 72),
        }
    }
}

fn push_upsample(
    b: &mut NetBuilder<'_>,
    name: &str,
    kind: UpsampleKind,
    in_ch: usize,
    out_ch: usize,
    g: &Geometry,
) -> Result<()> {
    match kind {
        UpsampleKind::Deconv | UpsampleKind::DeconvBilinear => {
            let k = (deconv_kernel_size(g.up.0)?, deconv_kernel_size(g.up.1)?);
            let p = (deconv_padding(g.up.0)?, deconv_padding(g.up.1)?);
            let init = if kind == UpsampleKind::Deconv {
                WeightInit::UniformSmall
            } else {
                WeightInit::BilinearDeconv
            };
            b.push(
                name,
                LayerConfig::TransposedConv2d {
                    filters: out_ch,
                    kernel: k,
                    stride: g.up,
                    padding: p,
                    init,
                },
            )?;
        }
        UpsampleKind::Bicubic | UpsampleKind::Nearest => {
            let cfg = if kind == UpsampleKind::Bicubic {
                LayerConfig::UpsampleBicubic { factor: g.up }
            } else {
                LayerConfig::UpsampleNearest { factor: g.up }
            };
            b.push(name, cfg)?;
            if in_ch != out_ch {
                b.push(
                    &format!("{name}_conv"),
                    LayerConfig::Conv2d {
                        filters: out_ch,
                        kernel: g.kernel,
                        stride: (1, 1),
                        padding: g.pad,
                    },
                )?;
            }
        }
    }
    Ok(())
}

/// Generator layer stack: dense projection, two upsampling steps with
/// batch norm and leaky ReLU, single-filter output convolution.
fn generator_network(
    spec: &ModelSpec,
    store: &mut ModelParams,
    rng: &mut dyn RngCore,
) -> Result<Network> {
    let ch = spec.signal_channels();
    let g = geometry(ch);
    let c1 = spec.scaled(128);
    let c2 = spec.scaled(64);
    let (up1, up2) = spec.upsample_scheme.steps();
    let mut b = NetBuilder::new(store, ParamGroup::Generator, "gen", &[spec.latent_dim], rng);
    if spec.variant == Variant::CCGen {
        b.push(
            "embed",
            LayerConfig::ClassEmbedding {
                num_classes: spec.num_classes,
            },
        )?;
    }
    b.push(
        "fc1",
        LayerConfig::Dense {
            units: spec.scaled(1024),
        },
    )?
    .push("fc1_act", lrelu())?
    .push(
        "fc2",
        LayerConfig::Dense {
            units: c1 * g.base.0 * g.base.1,
        },
    )?
    .push("fc2_bn", LayerConfig::BatchNorm)?
    .push("fc2_act", lrelu())?
    .push(
        "reshape",
        LayerConfig::Reshape {
            shape: vec![c1, g.base.0, g.base.1],
        },
    )?;
    push_upsample(&mut b, "up1", up1, c1, c1, &g)?;
    b.push("up1_bn", LayerConfig::BatchNorm)?
        .push("up1_act", lrelu())?
        .push(
            "conv1",
            LayerConfig::Conv2d {
                filters: c2,
                kernel: g.kernel,
                stride: (1, 1),
                padding: g.pad,
            },
        )?
        .push("conv1_bn", LayerConfig::BatchNorm)?
        .push("conv1_act", lrelu())?;
    push_upsample(&mut b, "up2", up2, c2, c1, &g)?;
    if ch != 1 {
        b.push(
            "crop",
            LayerConfig::CenterCrop {
                height: 64,
                width: 64,
            },
        )?;
    }
    debug_assert!(ch != 1 || g.full == (1, 64));
    b.push("up2_bn", LayerConfig::BatchNorm)?
        .push("up2_act", lrelu())?
        .push(
            "out",
            LayerConfig::Conv2d {
                filters: 1,
                kernel: g.kernel,
                stride: (1, 1),
                padding: g.pad,
            },
        )?;
    if ch != 1 || spec.variant == Variant::CCGen {
        b.push("normalize", LayerConfig::ZeroMeanNormalize)?;
    }
    Ok(b.finish())
}

/// Critic trunk: input noise, three convolutions, flatten, hidden dense.
fn trunk_network(
    spec: &ModelSpec,
    group: ParamGroup,
    store: &mut ModelParams,
    rng: &mut dyn RngCore,
) -> Result<Network> {
    let ch = spec.signal_channels();
    let g = geometry(ch);
    let (d1, d2) = (spec.scaled(64), spec.scaled(128));
    let down = if ch == 1 { (1, 2) } else { (2, 2) };
    let mut b = NetBuilder::new(store, group, "disc", &spec.sample_shape(), rng);
    b.push("noise", LayerConfig::GaussianNoise { sigma: NOISE_STD })?;
    for (i, (filters, stride)) in [(d1, (1, 1)), (d2, down), (d2, down)]
        .into_iter()
        .enumerate()
    {
        b.push(
            &format!("conv{}", i + 1),
            LayerConfig::Conv2d {
                filters,
                kernel: g.kernel,
                stride,
                padding: g.pad,
            },
        )?
        .push(&format!("conv{}_act", i + 1), lrelu())?;
    }
    let flat = if ch == 1 { d2 * 16 } else { d2 * 16 * 16 };
    b.push("flatten", LayerConfig::Reshape { shape: vec![flat] })?
        .push(
            "fc1",
            LayerConfig::Dense {
                units: spec.scaled(1024),
            },
        )?
        .push("fc1_act", lrelu())?;
    Ok(b.finish())
}

fn head_network(
    spec: &ModelSpec,
    kind: Variant,
    group: ParamGroup,
    store: &mut ModelParams,
    rng: &mut dyn RngCore,
) -> Result<Network> {
    let features = [spec.scaled(1024)];
    let mut b;
    if kind == Variant::CCClassBranch {
        b = NetBuilder::new(store, group, "cls", &features, rng);
        b.push(
            "logits",
            LayerConfig::SoftmaxHead {
                classes: spec.num_classes,
            },
        )?;
    } else {
        b = NetBuilder::new(store, group, "disc", &features, rng);
        b.push("score", LayerConfig::Dense { units: 1 })?;
    }
    Ok(b.finish())
}

/// Builds the layer stack of a single variant into `store`. CC branch
/// variants take trunk features as input.
pub fn build_network(
    spec: &ModelSpec,
    store: &mut ModelParams,
    rng: &mut dyn RngCore,
) -> Result<Network> {
    spec.validate()?;
    match spec.variant {
        Variant::Gen1ch | Variant::Gen64ch | Variant::CCGen => generator_network(spec, store, rng),
        Variant::Disc1ch | Variant::Disc64ch => {
            let mut net = trunk_network(spec, ParamGroup::Discriminator, store, rng)?;
            let head = head_network(spec, spec.variant, ParamGroup::Discriminator, store, rng)?;
            net.layers.extend(head.layers);
            Ok(net)
        }
        Variant::CCSharedTrunk => trunk_network(spec, ParamGroup::SharedTrunk, store, rng),
        Variant::CCDiscBranch => {
            head_network(spec, spec.variant, ParamGroup::Discriminator, store, rng)
        }
        Variant::CCClassBranch => {
            head_network(spec, spec.variant, ParamGroup::Classifier, store, rng)
        }
    }
}

/// A generator with its parameters.
#[derive(Clone, Debug)]
pub struct Generator {
    pub spec: ModelSpec,
    pub net: Network,
    pub params: ModelParams,
}

impl Generator {
    pub fn is_conditional(&self) -> bool {
        self.spec.variant == Variant::CCGen
    }

    /// Forward pass on `z: [B, latent]`, returning `[B, 1, H, W]`.
    pub fn forward(
        &mut self,
        z: &Var,
        labels: Option<&[usize]>,
        bound: &BoundParams,
        mode: Mode,
        rng: &mut dyn RngCore,
    ) -> Result<Var> {
        match (self.is_conditional(), labels) {
            (false, Some(_)) => {
                return Err(Error::invalid("labels given to an unconditional generator"))
            }
            (true, None) => return Err(Error::invalid("conditional generator needs labels")),
            _ => {}
        }
        self.net
            .forward(z, bound, &mut self.params, labels, mode, rng)
    }

    /// Evaluation-mode samples for a latent batch.
    pub fn generate(
        &mut self,
        z: &Tensor,
        labels: Option<&[usize]>,
        rng: &mut dyn RngCore,
    ) -> Result<Tensor> {
        let tape = Tape::new();
        tape.set_grad_enabled(false);
        let bound = self.params.bind(&tape, false);
        let zv = tape.constant(z.clone());
        Ok(self
            .forward(&zv, labels, &bound, Mode::Eval, rng)?
            .value()
            .clone())
    }
}

pub fn build_generator(spec: &ModelSpec, rng: &mut dyn RngCore) -> Result<Generator> {
    if !spec.variant.is_generator() {
        return Err(Error::invalid(format!(
            "{} is not a generator variant",
            spec.variant
        )));
    }
    let mut params = ModelParams::new();
    let net = build_network(spec, &mut params, rng)?;
    Ok(Generator {
        spec: spec.clone(),
        net,
        params,
    })
}

/// Critic outputs for one batch.
#[derive(Clone, Debug)]
pub struct CriticOutput {
    /// `[B, 1]` real/fake scores.
    pub score: Var,
    /// `[B, classes]` logits of the classifier branch, when present.
    pub logits: Option<Var>,
}

/// Discriminator, or the shared trunk with discriminator and classifier
/// branches of the class-conditioned model.
#[derive(Clone, Debug)]
pub struct Critic {
    pub spec: ModelSpec,
    pub trunk: Network,
    pub disc_head: Network,
    pub class_head: Option<Network>,
    pub params: ModelParams,
    trunk_evals: Cell<usize>,
}

impl Critic {
    pub fn is_conditional(&self) -> bool {
        self.class_head.is_some()
    }

    /// Number of trunk evaluations so far.
    pub fn trunk_evals(&self) -> usize {
        self.trunk_evals.get()
    }

    pub fn features(
        &mut self,
        x: &Var,
        bound: &BoundParams,
        mode: Mode,
        rng: &mut dyn RngCore,
    ) -> Result<Var> {
        self.trunk_evals.set(self.trunk_evals.get() + 1);
        self.trunk
            .forward(x, bound, &mut self.params, None, mode, rng)
    }

    /// Scores and (for the conditional model) class logits from a single
    /// trunk evaluation.
    pub fn forward(
        &mut self,
        x: &Var,
        bound: &BoundParams,
        mode: Mode,
        rng: &mut dyn RngCore,
    ) -> Result<CriticOutput> {
        let f = self.features(x, bound, mode, rng)?;
        let score = self
            .disc_head
            .forward(&f, bound, &mut self.params, None, mode, rng)?;
        let logits = match &self.class_head {
            Some(head) => Some(head.forward(&f, bound, &mut self.params, None, mode, rng)?),
            None => None,
        };
        Ok(CriticOutput { score, logits })
    }

    pub fn score(
        &mut self,
        x: &Var,
        bound: &BoundParams,
        mode: Mode,
        rng: &mut dyn RngCore,
    ) -> Result<Var> {
        let f = self.features(x, bound, mode, rng)?;
        self.disc_head
            .forward(&f, bound, &mut self.params, None, mode, rng)
    }

    pub fn class_logits(
        &mut self,
        x: &Var,
        bound: &BoundParams,
        mode: Mode,
        rng: &mut dyn RngCore,
    ) -> Result<Var> {
        let head = self
            .class_head
            .as_ref()
            .ok_or_else(|| Error::invalid("critic has no classifier branch"))?;
        self.trunk_evals.set(self.trunk_evals.get() + 1);
        let f = self
            .trunk
            .forward(x, bound, &mut self.params, None, mode, rng)?;
        head.forward(&f, bound, &mut self.params, None, mode, rng)
    }

    /// Evaluation-mode `(scores [B], logits [B, classes])` for a batch.
    pub fn evaluate(
        &mut self,
        x: &Tensor,
        rng: &mut dyn RngCore,
    ) -> Result<(Vec<f64>, Option<Tensor>)> {
        let tape = Tape::new();
        tape.set_grad_enabled(false);
        let bound = self.params.bind(&tape, false);
        let xv = tape.constant(x.clone());
        let out = self.forward(&xv, &bound, Mode::Eval, rng)?;
        Ok((
            out.score.data().to_vec(),
            out.logits.map(|l| l.value().clone()),
        ))
    }
}

/// Plain WGAN critic for a 1- or 64-channel sample.
pub fn build_discriminator(spec: &ModelSpec, rng: &mut dyn RngCore) -> Result<Critic> {
    spec.validate()?;
    if !matches!(spec.variant, Variant::Disc1ch | Variant::Disc64ch) {
        return Err(Error::invalid(format!(
            "{} is not a discriminator variant",
            spec.variant
        )));
    }
    let mut params = ModelParams::new();
    let trunk = trunk_network(spec, ParamGroup::Discriminator, &mut params, rng)?;
    let disc_head = head_network(
        spec,
        spec.variant,
        ParamGroup::Discriminator,
        &mut params,
        rng,
    )?;
    Ok(Critic {
        spec: spec.clone(),
        trunk,
        disc_head,
        class_head: None,
        params,
        trunk_evals: Cell::new(0),
    })
}

/// Class-conditioned critic: shared trunk, discriminator branch and
/// classifier branch. Any CC variant other than the generator is accepted.
pub fn build_cc_model(spec: &ModelSpec, rng: &mut dyn RngCore) -> Result<Critic> {
    spec.validate()?;
    if !spec.variant.is_cc() || spec.variant == Variant::CCGen {
        return Err(Error::invalid(format!(
            "{} is not a class-conditioned critic variant",
            spec.variant
        )));
    }
    let spec = spec.for_variant(Variant::CCSharedTrunk);
    let mut params = ModelParams::new();
    let trunk = trunk_network(&spec, ParamGroup::SharedTrunk, &mut params, rng)?;
    let disc_head = head_network(
        &spec,
        Variant::CCDiscBranch,
        ParamGroup::Discriminator,
        &mut params,
        rng,
    )?;
    let class_head = head_network(
        &spec,
        Variant::CCClassBranch,
        ParamGroup::Classifier,
        &mut params,
        rng,
    )?;
    Ok(Critic {
        spec,
        trunk,
        disc_head,
        class_head: Some(class_head),
        params,
        trunk_evals: Cell::new(0),
    })
}

/// Builds the critic matching a generator spec.
pub fn critic_for(gen_spec: &ModelSpec, rng: &mut dyn RngCore) -> Result<Critic> {
    match gen_spec.variant {
        Variant::Gen1ch | Variant::Disc1ch => {
            build_discriminator(&gen_spec.for_variant(Variant::Disc1ch), rng)
        }
        Variant::Gen64ch | Variant::Disc64ch => {
            build_discriminator(&gen_spec.for_variant(Variant::Disc64ch), rng)
        }
        _ => build_cc_model(&gen_spec.for_variant(Variant::CCSharedTrunk), rng),
    }
}
