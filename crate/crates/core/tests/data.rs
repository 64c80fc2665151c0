mod common;

use std::f64::consts::TAU;

use proptest::prelude::*;
use waveforge::checkpoint::{read_tensors, write_tensors, Checkpoint};
use waveforge::data::{
    gen_erp_surrogate, gen_sinusoid_toy, load_dataset, read_dataset, save_dataset, write_csv,
    write_dataset, zscore_epoch, EpochDataset, ErpParams, PhaseMode, EPOCH_LEN,
};
use waveforge::experiment::init_models;
use waveforge::models::{ModelSpec, Variant};
use waveforge::{Error, Tensor};

#[test]
fn toy_noise_has_requested_variance() {
    // 15625 epochs of 64 points is 10^6 draws
    let n = 15_625;
    let noisy = gen_sinusoid_toy(n, 5.0, 1.0, 1.0, PhaseMode::Fixed(0.0), 3).unwrap();
    let clean = gen_sinusoid_toy(1, 5.0, 1.0, 0.0, PhaseMode::Fixed(0.0), 3).unwrap();
    let resid: Vec<f64> = (0..n)
        .flat_map(|i| noisy.epoch(i).iter().zip(clean.epoch(0)).map(|(a, b)| a - b).collect::<Vec<_>>())
        .collect();
    assert_eq!(resid.len(), 1_000_000);
    let mean = resid.iter().sum::<f64>() / 1e6;
    let var = resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / 1e6;
    assert!((0.99..=1.01).contains(&var), "{var}");
}

#[test]
fn noiseless_toy_is_the_sampled_sinusoid() {
    let ds = gen_sinusoid_toy(3, 5.0, 1.0, 0.0, PhaseMode::Fixed(0.0), 0).unwrap();
    assert_eq!(ds.samples.shape(), &[3, 1, EPOCH_LEN]);
    assert!(ds.labels.is_none());
    let e = ds.epoch(2);
    assert_eq!(e[0], 0.0);
    for (t, v) in e.iter().enumerate() {
        assert!((v - (TAU * 5.0 * t as f64 / 64.0).sin()).abs() < 1e-12);
    }
    // random phase keeps the amplitude
    let r = gen_sinusoid_toy(50, 5.0, 2.0, 0.0, PhaseMode::Random, 1).unwrap();
    for i in 0..50 {
        let peak = r.epoch(i).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(peak <= 2.0 + 1e-12 && peak > 1.9);
    }
}

#[test]
fn toy_rejects_bad_parameters() {
    assert!(gen_sinusoid_toy(10, 32.0, 1.0, 1.0, PhaseMode::Random, 0).is_err());
    assert!(gen_sinusoid_toy(0, 5.0, 1.0, 1.0, PhaseMode::Random, 0).is_err());
    assert!(gen_sinusoid_toy(10, 5.0, 1.0, -1.0, PhaseMode::Random, 0).is_err());
}

#[test]
fn generators_are_deterministic_per_seed() {
    let a = gen_sinusoid_toy(20, 5.0, 1.0, 1.0, PhaseMode::Random, 9).unwrap();
    assert_eq!(a, gen_sinusoid_toy(20, 5.0, 1.0, 1.0, PhaseMode::Random, 9).unwrap());
    assert_ne!(a, gen_sinusoid_toy(20, 5.0, 1.0, 1.0, PhaseMode::Random, 10).unwrap());
    let e = gen_erp_surrogate(10, 64, 4).unwrap();
    assert_eq!(e, gen_erp_surrogate(10, 64, 4).unwrap());
}

fn class_mean(ds: &EpochDataset, label: u8, ch: usize) -> Vec<f64> {
    let sub = ds.select_label(label).unwrap();
    let mut m = vec![0.0; EPOCH_LEN];
    for i in 0..sub.len() {
        for (t, v) in sub.epoch(i)[ch * EPOCH_LEN..(ch + 1) * EPOCH_LEN].iter().enumerate() {
            m[t] += v / sub.len() as f64;
        }
    }
    m
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap()
}

#[test]
fn erp_difference_peaks_near_300ms() {
    for (channels, ch) in [(1, 0), (64, 58)] {
        for seed in 0..5 {
            let ds = gen_erp_surrogate(300, channels, seed).unwrap();
            let (t, n) = (class_mean(&ds, 1, ch), class_mean(&ds, 0, ch));
            let diff: Vec<f64> = t.iter().zip(&n).map(|(a, b)| a - b).collect();
            let peak = argmax(&diff);
            assert!((17..=22).contains(&peak), "channels {channels} seed {seed}: bin {peak}");
        }
    }
    assert_eq!(argmax(&ErpParams::default().bump_template()), 19);
}

#[test]
fn erp_bump_is_strongest_on_occipital_channels() {
    let ds = gen_erp_surrogate(200, 64, 2).unwrap();
    let p = ErpParams::default();
    let c = p.center_bin().round() as usize;
    let effect = |ch: usize| class_mean(&ds, 1, ch)[c] - class_mean(&ds, 0, ch)[c];
    let occ: f64 = p.occipital.clone().map(effect).sum::<f64>() / p.occipital.len() as f64;
    let other: f64 = (0..10).map(effect).sum::<f64>() / 10.0;
    assert!(occ > 3.0 * other.abs(), "{occ} vs {other}");
}

#[test]
fn erp_labels_are_balanced_and_epochs_normalized() {
    let ds = gen_erp_surrogate(37, 64, 1).unwrap();
    assert_eq!(ds.samples.shape(), &[74, 64, EPOCH_LEN]);
    assert_eq!(ds.label_counts(), Some((37, 37)));
    for i in 0..ds.len() {
        let e = ds.epoch(i);
        let n = e.len() as f64;
        let m = e.iter().sum::<f64>() / n;
        let sd = (e.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
        assert!(m.abs() < 1e-10);
        assert!((sd - 1.0).abs() <= 1e-6);
    }
    assert!(gen_erp_surrogate(0, 1, 0).is_err());
    assert!(gen_erp_surrogate(5, 3, 0).is_err());
}

#[test]
fn zscore_cases() {
    assert_eq!(zscore_epoch(&[0.0, 2.0]).unwrap(), vec![-1.0, 1.0]);
    assert!(matches!(zscore_epoch(&[4.0; 8]), Err(Error::Degenerate(_))));
    assert!(zscore_epoch(&[]).is_err());
}

proptest! {
    #[test]
    fn zscore_is_idempotent(x in prop::collection::vec(-100.0f64..100.0, 2..80)) {
        prop_assume!(x.iter().any(|v| (v - x[0]).abs() > 1e-3));
        let once = zscore_epoch(&x).unwrap();
        let twice = zscore_epoch(&once).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dataset_round_trip_is_bit_exact(seed in 0u64..1000, labeled in any::<bool>()) {
        let mut ds = if labeled {
            gen_erp_surrogate(3, 1, seed).unwrap()
        } else {
            gen_sinusoid_toy(4, 5.0, 1.0, 1.0, PhaseMode::Random, seed).unwrap()
        };
        // payload is stored as f32
        let data = ds.samples.data().iter().map(|v| *v as f32 as f64).collect();
        ds.samples = Tensor::new(ds.samples.shape().to_vec(), data).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &ds).unwrap();
        let back = read_dataset(buf.as_slice()).unwrap();
        prop_assert_eq!(&back, &ds);
        let mut again = Vec::new();
        write_dataset(&mut again, &back).unwrap();
        prop_assert_eq!(buf, again);
    }
}

fn encoded(ds: &EpochDataset) -> Vec<u8> {
    let mut buf = Vec::new();
    write_dataset(&mut buf, ds).unwrap();
    buf
}

#[test]
fn dataset_header_layout() {
    let ds = gen_erp_surrogate(2, 1, 0).unwrap();
    let b = encoded(&ds);
    assert_eq!(&b[..4], b"WFDS");
    assert_eq!(b[4], 1);
    assert_eq!(u64::from_le_bytes(b[5..13].try_into().unwrap()), 4);
    assert_eq!(u64::from_le_bytes(b[13..21].try_into().unwrap()), 1);
    assert_eq!(u64::from_le_bytes(b[21..29].try_into().unwrap()), 64);
    let first = f32::from_le_bytes(b[29..33].try_into().unwrap());
    assert_eq!(first, ds.samples.data()[0] as f32);
    // presence byte follows the payload
    assert_eq!(b[29 + 4 * 4 * 64], 1);
}

#[test]
fn corrupt_datasets_are_rejected() {
    let b = encoded(&gen_erp_surrogate(2, 1, 0).unwrap());
    let mut bad = b.clone();
    bad[0] = b'X';
    assert!(matches!(read_dataset(bad.as_slice()), Err(Error::Format(_))));
    let mut ver = b.clone();
    ver[4] = 9;
    assert!(matches!(read_dataset(ver.as_slice()), Err(Error::Format(_))));
    for cut in [0, 3, 10, 40, b.len() - 1] {
        assert!(matches!(read_dataset(&b[..cut]), Err(Error::Format(_))), "cut {cut}");
    }
    let mut flag = b.clone();
    flag[29 + 4 * 4 * 64] = 7;
    assert!(read_dataset(flag.as_slice()).is_err());
    let mut trailing = b;
    trailing.push(0);
    assert!(read_dataset(trailing.as_slice()).is_err());
}

#[test]
fn dataset_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.wfds");
    let ds = gen_sinusoid_toy(5, 5.0, 1.0, 1.0, PhaseMode::Random, 0).unwrap();
    save_dataset(&p, &ds).unwrap();
    let back = load_dataset(&p).unwrap();
    save_dataset(&dir.path().join("e.wfds"), &back).unwrap();
    assert_eq!(load_dataset(&dir.path().join("e.wfds")).unwrap(), back);
    assert_eq!(back.metadata, ds.metadata);
    assert!(matches!(load_dataset(&dir.path().join("missing")), Err(Error::Io(_))));
}

#[test]
fn csv_has_one_row_per_epoch() {
    let ds = gen_erp_surrogate(3, 1, 0).unwrap();
    let mut out = Vec::new();
    write_csv(&mut out, &ds).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 7);
    assert!(lines[0].starts_with("label,c0_t0,c0_t1"));
    for (i, l) in lines[1..].iter().enumerate() {
        let cells: Vec<f64> = l.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cells.len(), 65);
        assert_eq!(cells[0], ds.labels.as_ref().unwrap()[i] as f64);
        assert_eq!(&cells[1..], ds.epoch(i));
    }
}

#[test]
fn tensor_file_round_trip_is_bit_exact() {
    let tensors = vec![
        ("a.weight".to_string(), Tensor::new(vec![2, 3], vec![1.5, -2.25, 0.0, 3.0, 1e-3f32 as f64, 7.0]).unwrap()),
        ("b".to_string(), Tensor::new(vec![4], vec![0.1f32 as f64; 4]).unwrap()),
    ];
    let mut buf = Vec::new();
    write_tensors(&mut buf, &tensors).unwrap();
    assert_eq!(&buf[..4], b"WFTS");
    assert_eq!(read_tensors(buf.as_slice()).unwrap(), tensors);
    let mut bad = buf.clone();
    bad[1] = b'X';
    assert!(matches!(read_tensors(bad.as_slice()), Err(Error::Format(_))));
    assert!(read_tensors(&buf[..buf.len() - 2]).is_err());
}

#[test]
fn checkpoint_round_trip_restores_models() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.wfts");
    let spec = ModelSpec::new(Variant::Gen1ch).with_width_scale(0.125);
    let (g, c) = init_models(&spec, 3).unwrap();
    let ck = Checkpoint::from_models(&spec, &g.params, &c.params);
    ck.save(&p).unwrap();
    let first = std::fs::read(&p).unwrap();
    let loaded = Checkpoint::load(&p).unwrap();
    assert_eq!(loaded.spec, spec);
    loaded.save(&dir.path().join("n.wfts")).unwrap();
    assert_eq!(std::fs::read(dir.path().join("n.wfts")).unwrap(), first);
    let mut r = common::rng(0);
    let g2 = loaded.generator(&mut r).unwrap();
    for (name, t) in g2.params.named_tensors() {
        let orig = g.params.by_name(&name).unwrap();
        let rounded: Vec<f64> = orig.value.data().iter().map(|v| *v as f32 as f64).collect();
        assert_eq!(t.data(), rounded.as_slice(), "{name}");
    }
    assert!(loaded.critic(&mut r).is_ok());
}
