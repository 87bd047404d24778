mod common;

use std::path::PathBuf;

use common::*;
use deepkm::clustering::{kmeans, KMeansSettings};
use deepkm::data::{load_idx, load_idx_concat, make_blobs, write_idx, BlobSpec, Dataset};
use deepkm::metrics::accuracy;
use deepkm::Error;
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist10k")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn idx_round_trip(seed in any::<u64>(), n in 1usize..20, rows in 1usize..6, cols in 1usize..6, gz in any::<bool>()) {
        let mut r = rng(seed);
        let features = Array2::from_shape_fn((n, rows * cols), |_| r.random::<f64>());
        let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..10)).collect();
        let ds = Dataset::new("rt", features.clone(), Some(labels.clone())).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let ext = if gz { ".gz" } else { "" };
        let img = dir.path().join(format!("img{ext}"));
        let lbl = dir.path().join(format!("lbl{ext}"));
        write_idx(&ds, &img, Some(&lbl), rows, cols).unwrap();
        let back = load_idx(&img, Some(&lbl)).unwrap();
        prop_assert_eq!(back.labels().unwrap(), labels.as_slice());
        prop_assert_eq!(back.features().dim(), features.dim());
        for (a, b) in back.features().iter().zip(features.iter()) {
            prop_assert!((a - b).abs() <= 1.0 / 255.0);
        }
    }
}

#[test]
fn concat_preserves_order() {
    let dir = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for part in 0..3usize {
        let f = Array2::from_shape_fn((2, 4), |(i, j)| ((part * 8 + i * 4 + j) as f64) / 255.0);
        let ds = Dataset::new("p", f, Some(vec![part, part])).unwrap();
        let img = dir.path().join(format!("i{part}"));
        let lbl = dir.path().join(format!("l{part}"));
        write_idx(&ds, &img, Some(&lbl), 2, 2).unwrap();
        paths.push((img, Some(lbl)));
    }
    let all = load_idx_concat(&paths, "all").unwrap();
    assert_eq!(all.len(), 6);
    assert_eq!(all.labels().unwrap(), &[0, 0, 1, 1, 2, 2]);
    for i in 0..6 {
        for j in 0..4 {
            assert!((all.features()[[i, j]] * 255.0 - (i * 4 + j) as f64).abs() < 1e-9);
        }
    }
}

#[test]
fn truncated_file_reports_offset() {
    let dir = tempfile::tempdir().unwrap();
    let ds = Dataset::new("t", Array2::zeros((3, 4)), None).unwrap();
    let img = dir.path().join("img");
    write_idx(&ds, &img, None, 2, 2).unwrap();
    let bytes = std::fs::read(&img).unwrap();
    std::fs::write(&img, &bytes[..bytes.len() - 1]).unwrap();
    match load_idx(&img, None) {
        Err(Error::Format { offset, .. }) => assert_eq!(offset, bytes.len() as u64 - 1),
        other => panic!("expected a format error, got {other:?}"),
    }
}

#[test]
fn separated_pair_is_recovered_by_kmeans() {
    for seed in 0..10 {
        let ds = make_blobs(&BlobSpec {
            n_per_cluster: 50,
            k: 2,
            dim: 5,
            separation: 20.0,
            noise_sigma: 1.0,
            seed,
        })
        .unwrap();
        let fit = kmeans(ds.features().view(), 2, seed, KMeansSettings::default()).unwrap();
        assert_eq!(accuracy(fit.assignment.labels(), ds.labels().unwrap()).unwrap(), 1.0);
    }
}

#[test]
fn blob_centers_respect_separation() {
    for (k, dim) in [(4, 50), (6, 2), (3, 3)] {
        let ds = make_blobs(&BlobSpec {
            n_per_cluster: 5,
            k,
            dim,
            separation: 3.0,
            noise_sigma: 0.0,
            seed: 17,
        })
        .unwrap();
        let labels = ds.labels().unwrap();
        let center = |c: usize| ds.features().row(labels.iter().position(|&l| l == c).unwrap()).to_owned();
        for a in 0..k {
            for b in a + 1..k {
                let d = (&center(a) - &center(b)).mapv(|v| v * v).sum().sqrt();
                assert!(d >= 3.0 - 1e-12, "k={k} dim={dim}: {d}");
            }
        }
    }
}

#[test]
fn mnist_fixture_loads() {
    let dir = fixture_dir();
    let ds = load_idx(
        &dir.join("images-idx3-ubyte.gz"),
        Some(&dir.join("labels-idx1-ubyte.gz")),
    )
    .unwrap();
    assert_eq!((ds.len(), ds.dim()), (10_000, 784));
    assert_eq!(ds.n_classes(), Some(10));
    assert!(ds.features().iter().all(|&v| (0.0..=1.0).contains(&v)));
    assert!(ds.features().iter().any(|&v| v == 1.0));
}
