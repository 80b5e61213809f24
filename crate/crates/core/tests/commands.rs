use std::fs;
use std::path::Path;

use agbrecon::commands::{self, Split};
use agbrecon::io::{parse_overrides, read_dataset, read_metrics, Checkpoint, ExperimentConfig};
use agbrecon::Error;

fn config(extra: &[&str]) -> ExperimentConfig {
    let mut pairs: Vec<String> = [
        "height=16",
        "width=16",
        "n_coils=2",
        "count=8",
        "val_count=3",
        "n_ellipses=3",
        "center_lines=2",
        "n_iterations=2",
        "growth=1",
        "kernels_per_conv=4",
        "kernel_size=3",
        "critic_widths=[4, 4, 8, 8]",
        "epochs=2",
        "batch_size=2",
        "embed_dim=2",
        "learning_rate=1e-3",
    ]
    .map(String::from)
    .to_vec();
    pairs.extend(extra.iter().map(|s| s.to_string()));
    ExperimentConfig::from_table(parse_overrides(&pairs).unwrap()).unwrap()
}

fn dataset(dir: &Path, cfg: &ExperimentConfig) -> std::path::PathBuf {
    let path = dir.join("train.ds");
    commands::gen_data(cfg, Split::Train, &path).unwrap();
    path
}

#[test]
fn gen_data_round_trips_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&["height=32", "width=32", "center_lines=4"]);
    let a = dir.path().join("a.ds");
    let report = commands::gen_data(&cfg, Split::Train, &a).unwrap();
    assert_eq!(report.count, 8);
    assert!(
        (report.mean_acceleration - 4.0).abs() < 0.5,
        "{}",
        report.mean_acceleration
    );
    let (spec, samples) = read_dataset(&a).unwrap();
    assert_eq!(
        (spec.height, spec.width, spec.acceleration, spec.center_lines),
        (32, 32, 4.0, 4)
    );
    assert_eq!(samples.len(), 8);

    let b = dir.path().join("b.ds");
    commands::gen_data(&cfg, Split::Train, &b).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let v = dir.path().join("v.ds");
    commands::gen_data(&cfg, Split::Val, &v).unwrap();
    let (_, val) = read_dataset(&v).unwrap();
    assert_eq!(val.len(), 3);
    assert!(val.iter().all(|s| !samples.contains(s)));
}

#[test]
fn infeasible_mask_is_a_config_error() {
    let table = parse_overrides(&["center_lines=20".to_string()]).unwrap();
    assert!(matches!(ExperimentConfig::from_table(table), Err(Error::Config(_))));
}

#[test]
fn baseline_train_writes_metrics_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&["mode=baseline"]);
    let data = dataset(dir.path(), &cfg);
    let out = dir.path().join("run");
    let report = commands::train(&cfg, &data, None, &out, None).unwrap();
    assert_eq!(report.epochs, 2);

    let series = read_metrics(&out.join("metrics.csv")).unwrap();
    assert_eq!(series.len(), 2);

    let last = Checkpoint::read(&out.join("final.json")).unwrap();
    let state = last.train_state().unwrap();
    let snap = Checkpoint::read(&out.join("snapshots/epoch_0002.json")).unwrap();
    assert_eq!(snap.generator().unwrap(), state.params.generator);
    let best = Checkpoint::read(&out.join("best.json")).unwrap();
    let chosen = Checkpoint::read(&out.join(format!("snapshots/epoch_{:04}.json", report.best_epoch))).unwrap();
    assert_eq!(best, chosen);

    let echo = fs::read_to_string(out.join("config.toml")).unwrap();
    assert_eq!(ExperimentConfig::from_table(echo.parse().unwrap()).unwrap(), cfg);
}

#[test]
fn agb_beta_column_never_decreases() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&["epochs=3", "beta_init=1", "ratio=1e-6"]);
    let data = dataset(dir.path(), &cfg);
    let out = dir.path().join("run");
    commands::train(&cfg, &data, None, &out, None).unwrap();
    let betas: Vec<f64> = read_metrics(&out.join("metrics.csv"))
        .unwrap()
        .records
        .iter()
        .map(|r| r.beta)
        .collect();
    assert!(betas.windows(2).all(|w| w[1] >= w[0]), "{betas:?}");
    assert!(betas[0] > 1.0, "{betas:?}");
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let full = config(&["epochs=3"]);
    let data = dataset(dir.path(), &full);

    let a = dir.path().join("a");
    commands::train(&full, &data, None, &a, None).unwrap();

    let b = dir.path().join("b");
    commands::train(&config(&["epochs=1"]), &data, None, &b, None).unwrap();
    let first = b.join("first.json");
    fs::rename(b.join("final.json"), &first).unwrap();
    fs::rename(b.join("final.bin"), first.with_extension("bin")).unwrap();
    commands::train(&full, &data, None, &b, Some(&first)).unwrap();

    for name in ["final.json", "final.bin", "metrics.csv", "best.json", "best.bin"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn resume_rejects_other_network() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&["epochs=1"]);
    let data = dataset(dir.path(), &cfg);
    let out = dir.path().join("run");
    commands::train(&cfg, &data, None, &out, None).unwrap();
    let other = config(&["epochs=2", "growth=2"]);
    let err = commands::train(&other, &data, None, &out, Some(&out.join("final.json"))).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}

#[test]
fn numeric_blowup_leaves_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&["mode=baseline", "learning_rate=1e38"]);
    let data = dataset(dir.path(), &cfg);
    let out = dir.path().join("run");
    let err = commands::train(&cfg, &data, None, &out, None).unwrap_err();
    assert_eq!(err.exit_code(), 4, "{err}");
    let diag: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("diagnostic.json")).unwrap()).unwrap();
    assert!(diag["epoch"].as_u64().unwrap() >= 1);
    assert_eq!(diag["config"]["mode"], "baseline");
}

#[test]
fn eval_reports_are_deterministic_and_identity_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&["mode=baseline", "epochs=1"]);
    let data = dataset(dir.path(), &cfg);
    let out = dir.path().join("run");
    commands::train(&cfg, &data, None, &out, None).unwrap();
    let ckpt = out.join("best.json");

    let a = commands::eval(&ckpt, &data, false).unwrap();
    let b = commands::eval(&ckpt, &data, false).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a.count, 8);
    assert_eq!(a.model_nmse.len(), 8);

    let id = commands::eval(&ckpt, &data, true).unwrap();
    assert_eq!(id.model.nmse_mean, 0.0);
    assert!(id.model.fid.abs() <= 1e-8, "{}", id.model.fid);
    assert_eq!(id.zero_filled, a.zero_filled);
}

#[test]
fn eval_rejects_mismatched_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&["mode=baseline", "epochs=1"]);
    let data = dataset(dir.path(), &cfg);
    let out = dir.path().join("run");
    commands::train(&cfg, &data, None, &out, None).unwrap();
    let big = dir.path().join("big.ds");
    commands::gen_data(&config(&["height=32", "width=32"]), Split::Train, &big).unwrap();
    let err = commands::eval(&out.join("best.json"), &big, false).unwrap_err();
    assert!(matches!(err, Error::Data(_)), "{err}");
}

#[test]
fn panel_has_one_column_per_image_and_matches_eval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&["mode=baseline", "epochs=1"]);
    let data = dataset(dir.path(), &cfg);
    let out = dir.path().join("run");
    commands::train(&cfg, &data, None, &out, None).unwrap();
    let ckpt = out.join("best.json");
    let pgm = dir.path().join("p.pgm");
    let sidecar = commands::export_panel(std::slice::from_ref(&ckpt), &data, 5, &pgm).unwrap();
    assert_eq!(sidecar.panels.len(), 3);
    assert_eq!(sidecar.panels[0].nmse, 0.0);

    let (_, samples) = read_dataset(&data).unwrap();
    let peak = samples[5].m_f.magnitude().into_iter().fold(0.0f32, f32::max);
    assert_eq!(sidecar.scale, peak as f64);

    let report = commands::eval(&ckpt, &data, false).unwrap();
    let rel = (sidecar.panels[2].nmse - report.model_nmse[5]).abs() / report.model_nmse[5];
    assert!(rel < 1e-5, "{} vs {}", sidecar.panels[2].nmse, report.model_nmse[5]);

    let text = fs::read_to_string(&pgm).unwrap();
    let dims: Vec<&str> = text.split_whitespace().skip(1).take(2).collect();
    assert_eq!(dims, vec!["48", "16"]);

    let err = commands::export_panel(&[ckpt], &data, 8, &pgm).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}
