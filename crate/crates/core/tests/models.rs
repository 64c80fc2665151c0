use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use waveforge::autodiff::Tape;
use waveforge::layers::{LayerConfig, Mode};
use waveforge::models::{
    build_cc_model, build_discriminator, build_generator, build_network, ModelParams, ModelSpec,
    ParamGroup, UpsampleScheme, Variant,
};
use waveforge::Tensor;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal_batch(shape: &[usize], seed: u64) -> Tensor {
    use rand_distr::{Distribution, StandardNormal};
    let mut r = rng(seed);
    let n = shape.iter().product();
    let data = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

fn output_shapes(net: &waveforge::models::Network) -> Vec<(String, Vec<usize>)> {
    net.layers
        .iter()
        .map(|l| (l.name.clone(), l.output_shape.clone()))
        .collect()
}

#[test]
fn single_channel_generator_rows_and_count() {
    let g = build_generator(&ModelSpec::new(Variant::Gen1ch), &mut rng(0)).unwrap();
    let shapes: Vec<Vec<usize>> = g
        .net
        .layers
        .iter()
        .map(|l| l.output_shape.clone())
        .collect();
    // our layout is [C, H, W]; the table lists (H, W, C)
    let expected: Vec<Vec<usize>> = vec![
        vec![1024],
        vec![1024],
        vec![2048],
        vec![2048],
        vec![2048],
        vec![128, 1, 16],
        vec![128, 1, 32],
        vec![128, 1, 32],
        vec![128, 1, 32],
        vec![64, 1, 32],
        vec![64, 1, 32],
        vec![64, 1, 32],
        vec![128, 1, 64],
        vec![128, 1, 64],
        vec![128, 1, 64],
        vec![1, 1, 64],
    ];
    assert_eq!(shapes, expected);
    assert_eq!(g.params.trainable_count(), 2_285_761);
}

#[test]
fn single_channel_critic_rows_and_count() {
    let d = build_discriminator(&ModelSpec::new(Variant::Disc1ch), &mut rng(0)).unwrap();
    let shapes: Vec<Vec<usize>> = d
        .trunk
        .layers
        .iter()
        .chain(&d.disc_head.layers)
        .map(|l| l.output_shape.clone())
        .collect();
    let expected: Vec<Vec<usize>> = vec![
        vec![1, 1, 64],
        vec![64, 1, 64],
        vec![64, 1, 64],
        vec![128, 1, 32],
        vec![128, 1, 32],
        vec![128, 1, 16],
        vec![128, 1, 16],
        vec![2048],
        vec![1024],
        vec![1024],
        vec![1],
    ];
    assert_eq!(shapes, expected);
    assert_eq!(d.params.trainable_count(), 2_173_441);
    assert_eq!(d.params.total_count(), 2_173_441);
}

#[test]
fn sixty_four_channel_rows_at_full_width() {
    let g = build_generator(&ModelSpec::new(Variant::Gen64ch), &mut rng(0)).unwrap();
    let shapes = output_shapes(&g.net);
    let find = |name: &str| shapes.iter().find(|(n, _)| n == name).unwrap().1.clone();
    assert_eq!(find("fc2"), vec![41_472]);
    assert_eq!(find("reshape"), vec![128, 18, 18]);
    assert_eq!(find("up1"), vec![128, 36, 36]);
    assert_eq!(find("conv1"), vec![64, 36, 36]);
    assert_eq!(find("up2"), vec![128, 72, 72]);
    assert_eq!(find("crop"), vec![128, 64, 64]);
    assert_eq!(find("out"), vec![1, 64, 64]);
    assert_eq!(g.net.output_shape(), &[1, 64, 64]);
    drop(g);

    let d = build_discriminator(&ModelSpec::new(Variant::Disc64ch), &mut rng(0)).unwrap();
    let shapes = output_shapes(&d.trunk);
    let find = |name: &str| shapes.iter().find(|(n, _)| n == name).unwrap().1.clone();
    assert_eq!(find("conv1"), vec![64, 64, 64]);
    assert_eq!(find("conv2"), vec![128, 32, 32]);
    assert_eq!(find("conv3"), vec![128, 16, 16]);
    assert_eq!(find("flatten"), vec![32_768]);
    assert_eq!(find("fc1"), vec![1024]);
    // printed total covers the convolutions and the hidden dense layer
    let head = d.params.by_name("disc.score.weight").unwrap().value.numel() + 1;
    assert_eq!(d.params.trainable_count() - head, 33_777_536);
}

#[test]
fn forward_shapes_for_every_variant_and_scale() {
    for scale in [0.125, 0.25, 1.0] {
        for variant in Variant::ALL {
            if scale == 1.0 && matches!(variant, Variant::Gen64ch | Variant::Disc64ch) {
                continue; // covered by the full-width table test
            }
            let spec = ModelSpec::new(variant).with_width_scale(scale);
            let mut params = ModelParams::new();
            let net = build_network(&spec, &mut params, &mut rng(1)).unwrap();
            let batch = 2;
            let input: Vec<usize> = std::iter::once(batch)
                .chain(net.input_shape.iter().copied())
                .collect();
            let tape = Tape::new();
            let bound = params.bind(&tape, false);
            let x = tape.constant(normal_batch(&input, 2));
            let labels = [0usize, 1];
            let y = net
                .forward(
                    &x,
                    &bound,
                    &mut params,
                    variant.is_cc().then_some(&labels[..]),
                    Mode::Train,
                    &mut rng(3),
                )
                .unwrap();
            let expected: Vec<usize> = match variant {
                Variant::Gen1ch | Variant::CCGen => vec![batch, 1, 1, 64],
                Variant::Gen64ch => vec![batch, 1, 64, 64],
                Variant::Disc1ch | Variant::Disc64ch | Variant::CCDiscBranch => vec![batch, 1],
                Variant::CCClassBranch => vec![batch, 2],
                Variant::CCSharedTrunk => vec![batch, spec.scaled(1024)],
            };
            assert_eq!(y.shape(), expected.as_slice(), "{variant} at {scale}");
        }
    }
}

#[test]
fn sixty_four_channel_forward_at_full_width() {
    let spec = ModelSpec::new(Variant::Gen64ch);
    let mut g = build_generator(&spec, &mut rng(5)).unwrap();
    let z = normal_batch(&[2, 120], 6);
    let y = g.generate(&z, None, &mut rng(7)).unwrap();
    assert_eq!(y.shape(), &[2, 1, 64, 64]);
    drop(g);
    let mut d = build_discriminator(&ModelSpec::new(Variant::Disc64ch), &mut rng(5)).unwrap();
    let (scores, _) = d.evaluate(&y, &mut rng(8)).unwrap();
    assert_eq!(scores.len(), 2);
}

#[test]
fn schemes_differ_only_in_upsampling_blocks() {
    let base_spec = ModelSpec::new(Variant::Gen1ch).with_width_scale(0.25);
    let strip = |scheme: UpsampleScheme| -> Vec<(String, LayerConfig)> {
        let g = build_generator(&base_spec.clone().with_scheme(scheme), &mut rng(0)).unwrap();
        g.net
            .layers
            .iter()
            .filter(|l| {
                !l.name.starts_with("up1") && !l.name.starts_with("up2")
                    || l.name.ends_with("_bn")
                    || l.name.ends_with("_act")
            })
            .map(|l| (l.name.clone(), l.config.clone()))
            .collect()
    };
    let reference = strip(UpsampleScheme::BcDcbl);
    for scheme in UpsampleScheme::ALL {
        assert_eq!(strip(scheme), reference, "{scheme}");
        let g = build_generator(&base_spec.clone().with_scheme(scheme), &mut rng(0)).unwrap();
        let up: Vec<&str> = g
            .net
            .layers
            .iter()
            .filter(|l| {
                (l.name.starts_with("up1") || l.name.starts_with("up2"))
                    && !l.name.ends_with("_bn")
                    && !l.name.ends_with("_act")
            })
            .map(|l| l.name.as_str())
            .collect();
        assert!(up.contains(&"up1") && up.contains(&"up2"));
    }
}

#[test]
fn scheme_selects_named_blocks() {
    let spec = ModelSpec::new(Variant::Gen1ch).with_width_scale(0.125);
    let g = build_generator(
        &spec.clone().with_scheme(UpsampleScheme::BcDcbl),
        &mut rng(0),
    )
    .unwrap();
    let cfg = |name: &str| {
        g.net
            .layers
            .iter()
            .find(|l| l.name == name)
            .unwrap()
            .config
            .clone()
    };
    assert!(matches!(
        cfg("up1"),
        LayerConfig::UpsampleBicubic { factor: (1, 2) }
    ));
    assert!(matches!(
        cfg("up2"),
        LayerConfig::TransposedConv2d {
            kernel: (1, 4),
            stride: (1, 2),
            padding: (0, 1),
            init: waveforge::layers::WeightInit::BilinearDeconv,
            ..
        }
    ));
    let g = build_generator(&spec.with_scheme(UpsampleScheme::NnNn), &mut rng(0)).unwrap();
    assert!(g.net.layers.iter().any(|l| l.name == "up2_conv"));
    assert!(g.net.layers.iter().all(|l| l.name != "up1_conv"));
}

#[test]
fn building_is_deterministic_per_seed() {
    let spec = ModelSpec::new(Variant::Gen1ch).with_width_scale(0.25);
    let mut a = build_generator(&spec, &mut rng(11)).unwrap();
    let mut b = build_generator(&spec, &mut rng(11)).unwrap();
    assert_eq!(a.params, b.params);
    let z = Tensor::zeros(&[3, 120]).unwrap();
    let ya = a.generate(&z, None, &mut rng(0)).unwrap();
    let yb = b.generate(&z, None, &mut rng(0)).unwrap();
    let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&ya), bits(&yb));
    let c = build_generator(&spec, &mut rng(12)).unwrap();
    assert_ne!(a.params, c.params);
}

#[test]
fn eval_mode_scores_are_repeatable() {
    let spec = ModelSpec::new(Variant::Disc1ch).with_width_scale(0.125);
    let mut d = build_discriminator(&spec, &mut rng(0)).unwrap();
    let x = normal_batch(&[4, 1, 1, 64], 1);
    let (s1, _) = d.evaluate(&x, &mut rng(1)).unwrap();
    let (s2, _) = d.evaluate(&x, &mut rng(2)).unwrap();
    assert_eq!(s1, s2);
}

#[test]
fn cc_partitions_are_disjoint_and_complete() {
    let spec = ModelSpec::new(Variant::CCSharedTrunk).with_width_scale(0.25);
    let c = build_cc_model(&spec, &mut rng(0)).unwrap();
    let groups = [
        ParamGroup::SharedTrunk,
        ParamGroup::Discriminator,
        ParamGroup::Classifier,
    ];
    let mut seen = std::collections::HashSet::new();
    let mut sum = 0;
    for g in groups {
        let idx = c.params.trainable_indices(&[g]);
        assert!(!idx.is_empty());
        for i in &idx {
            assert!(seen.insert(*i), "parameter {i} in two groups");
        }
        sum += c.params.group_count(g);
    }
    assert_eq!(sum, c.params.trainable_count());
    assert_eq!(seen.len(), c.params.trainable_indices(&groups).len());
    assert_eq!(
        c.params.group_count(ParamGroup::Classifier),
        spec.scaled(1024) * 2 + 2
    );
    assert_eq!(
        c.params.group_count(ParamGroup::Discriminator),
        spec.scaled(1024) + 1
    );
}

#[test]
fn cc_branches_share_one_trunk_evaluation() {
    let spec = ModelSpec::new(Variant::CCSharedTrunk).with_width_scale(0.125);
    let mut c = build_cc_model(&spec, &mut rng(0)).unwrap();
    let x = normal_batch(&[3, 1, 1, 64], 4);
    let before = c.trunk_evals();
    let (scores, logits) = c.evaluate(&x, &mut rng(1)).unwrap();
    assert_eq!(c.trunk_evals() - before, 1);
    assert_eq!(scores.len(), 3);
    assert_eq!(logits.unwrap().shape(), &[3, 2]);
}

#[test]
fn labels_rejected_by_unconditional_generator() {
    let spec = ModelSpec::new(Variant::Gen1ch).with_width_scale(0.125);
    let mut g = build_generator(&spec, &mut rng(0)).unwrap();
    let z = Tensor::zeros(&[2, 120]).unwrap();
    assert!(g.generate(&z, Some(&[0, 1]), &mut rng(0)).is_err());
    let spec = ModelSpec::new(Variant::CCGen).with_width_scale(0.125);
    let mut g = build_generator(&spec, &mut rng(0)).unwrap();
    assert!(g.generate(&z, None, &mut rng(0)).is_err());
    assert!(g.generate(&z, Some(&[0, 2]), &mut rng(0)).is_err());
    let y = g.generate(&z, Some(&[0, 1]), &mut rng(0)).unwrap();
    assert_eq!(y.shape(), &[2, 1, 1, 64]);
}

#[test]
fn critic_rejects_wrong_input_shape() {
    let spec = ModelSpec::new(Variant::Disc1ch).with_width_scale(0.125);
    let mut d = build_discriminator(&spec, &mut rng(0)).unwrap();
    let x = Tensor::zeros(&[2, 1, 64, 64]).unwrap();
    assert!(d.evaluate(&x, &mut rng(0)).is_err());
}
