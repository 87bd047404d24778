use deepkm::data::{make_blobs, BlobSpec, Dataset};
use deepkm::harness::{run, run_suite, Method, TrainConfig};
use deepkm_cli::emit::{emit_run, emit_suite, parse_report, report_json, SUITE_HEADER};

fn data() -> Dataset {
    make_blobs(&BlobSpec {
        n_per_cluster: 20,
        k: 3,
        dim: 6,
        separation: 6.0,
        noise_sigma: 0.5,
        seed: 1,
    })
    .unwrap()
}

fn config() -> TrainConfig {
    TrainConfig {
        k: 3,
        latent_dim: 2,
        hidden_dims: vec![8],
        pretrain_epochs: 3,
        finetune_epochs: 2,
        batch_size: 16,
        ..Default::default()
    }
}

#[test]
fn one_run_gives_json_and_loss_table() {
    let dir = tempfile::tempdir().unwrap();
    let report = run(&data(), &config().with_seed(4)).unwrap();
    let files = emit_run(&report, dir.path()).unwrap();
    let names: Vec<String> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(names, ["ours_seed4.json", "ours_seed4_loss.tsv"]);
    let loss = std::fs::read_to_string(&files[1]).unwrap();
    assert!(!loss.contains('\r'));
    let lines: Vec<&str> = loss.lines().collect();
    assert_eq!(lines[0], "phase\tepoch\treconstruction\tclustering");
    assert_eq!(lines.len(), 1 + 3 + 2);
    assert!(lines[4].starts_with("finetune\t0\t"));
}

#[test]
fn json_round_trip_reconstructs_config() {
    let cfg = TrainConfig {
        lambda: None,
        ..config()
    }
    .with_method(Method::Dkm)
    .with_seed(2);
    let report = run(&data(), &cfg).unwrap();
    let back = parse_report(&report_json(&report).unwrap()).unwrap();
    let mut expected = cfg.clone();
    expected.lambda = Some(cfg.lambda());
    assert_eq!(back.config, expected);
    assert_eq!(back.assignments, report.assignments);
    assert_eq!(back.metrics, report.metrics);
    assert_eq!(back.clustering_loss, report.clustering_loss);
    // the echoed config reproduces the run
    let again = run(&data(), &back.config).unwrap();
    assert_eq!(again.assignments, report.assignments);
}

#[test]
fn suite_table_and_byte_identical_re_emit() {
    let suite = run_suite(&data(), &config(), &[0, 1], &[Method::Aekm, Method::Ours]);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let files_a = emit_suite(&suite, a.path()).unwrap();
    let files_b = emit_suite(&suite, b.path()).unwrap();
    assert_eq!(files_a.len(), 4 * 2 + 1);
    for (x, y) in files_a.iter().zip(&files_b) {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{}", x.display());
    }
    let table = std::fs::read_to_string(a.path().join("suite.tsv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], SUITE_HEADER);
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("aekm\t") && lines[2].starts_with("ours\t"));
    let mean: f64 = lines[2].split('\t').nth(3).unwrap().parse().unwrap();
    assert_eq!(mean, suite.rows[1].nmi_mean);
}

#[test]
fn unwritable_directory_is_an_io_error() {
    let file = tempfile::NamedTempFile::new().unwrap();
    let report = run(&data(), &config().with_method(Method::Km)).unwrap();
    let err = emit_run(&report, &file.path().join("sub")).unwrap_err();
    assert!(matches!(err, deepkm_cli::CliError::Io { .. }));
}
