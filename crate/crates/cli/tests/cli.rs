use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sdeonet::sde_lab::{read_dataset, sample_path};
use sdeonet::seed::derive_seed;
use sdeonet_cli::artifacts::*;
use sdeonet_cli::commands;
use sdeonet_cli::config::{OperatorChoice, PceMethod, SdeKind};
use sdeonet_cli::{ErrorKind, ExperimentConfig};
use tempfile::TempDir;

fn small(kind: SdeKind, out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.seed = 7;
    c.out = out.to_path_buf();
    c.sde.kind = kind;
    c.model.basis_size = 8;
    c.model.terms = 4;
    c.model.branch_hidden = vec![8];
    c.model.trunk_hidden = vec![8];
    c.data.samples = 64;
    c.data.sim_level = 8;
    c.train.epochs = 2;
    c.train.batch_size = 16;
    c.evaluate.grid_points = 5;
    c.evaluate.n_eval = 100;
    c.evaluate.realisations = 2;
    c.pce.basis_size = 8;
    c.pce.max_degree = 3;
    c.pce.grid_points = 5;
    c.decompose.grid_points = 5;
    c.decompose.n_eval = 200;
    c.decompose.p_sweep = vec![1, 2, 4, 8, 16];
    c
}

fn write_config(c: &ExperimentConfig, dir: &Path) -> std::path::PathBuf {
    let p = dir.join("experiment.toml");
    fs::write(&p, c.to_toml()).unwrap();
    p
}

fn sdeonet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdeonet")).args(args).output().unwrap()
}

fn error_line(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().expect("an error line");
    serde_json::from_str(line).unwrap()
}

#[test]
fn simulate_writes_one_row_per_sample_and_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let mut c = small(SdeKind::Gbm, &dir.path().join("a"));
    c.data.samples = 10;
    let cfg = write_config(&c, dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = sdeonet(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = fs::read_to_string(a.join(DATASET)).unwrap();
    assert_eq!(text.lines().count(), 11);
    assert!(text.starts_with("path_id,t,x_0,g_0,"));
    assert_eq!(fs::read(a.join(DATASET)).unwrap(), fs::read(b.join(DATASET)).unwrap());
    assert!(a.join(CONFIG_ECHO).exists());
}

#[test]
fn seed_override_changes_the_dataset() {
    let dir = TempDir::new().unwrap();
    let c = small(SdeKind::Ou, dir.path());
    commands::simulate(&c).unwrap();
    let first = fs::read(dir.path().join(DATASET)).unwrap();
    let mut d = c.clone();
    d.seed = 8;
    commands::simulate(&d).unwrap();
    assert_ne!(first, fs::read(dir.path().join(DATASET)).unwrap());
}

#[test]
fn gbm_dataset_rows_match_the_closed_form() {
    let dir = TempDir::new().unwrap();
    let c = small(SdeKind::Gbm, dir.path());
    commands::simulate(&c).unwrap();
    let (samples, d, features) = read_dataset::<f64, _>(fs::File::open(dir.path().join(DATASET)).unwrap()).unwrap();
    assert_eq!((samples.len(), d, features), (64, 1, 8));
    let spec = c.sde.build().unwrap();
    let (mu, sigma, x0) = (c.sde.mu, c.sde.sigma(), c.sde.x0()[0]);
    for s in &samples {
        let (k, path) = sample_path(&spec, c.data.sim_level, derive_seed(c.seed, "simulate"), s.path_id);
        let t = path.time(k);
        let w = path.component(0)[k];
        let exact = x0 * ((mu - 0.5 * sigma * sigma) * t + sigma * w).exp();
        assert_eq!(s.t, t);
        assert!((s.x[0] - exact).abs() <= 1e-12 * exact.abs(), "{} vs {exact}", s.x[0]);
    }
}

#[test]
fn train_writes_one_history_row_per_epoch() {
    let dir = TempDir::new().unwrap();
    let mut c = small(SdeKind::Ou, dir.path());
    c.train.epochs = 1;
    commands::simulate(&c).unwrap();
    let mut logged = Vec::new();
    let rows = commands::train(&c, |e, l| logged.push((e, l))).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(logged.len(), 1);
    let read: Vec<LossRow> = read_rows(&dir.path().join(LOSS_HISTORY)).unwrap();
    assert_eq!(read, rows);
    assert!(read[0].loss.is_finite() && read[0].loss >= 0.0);
}

#[test]
fn checkpoint_round_trip_reproduces_evaluation() {
    let dir = TempDir::new().unwrap();
    let c = small(SdeKind::Ou, dir.path());
    commands::simulate(&c).unwrap();
    commands::train(&c, |_, _| {}).unwrap();
    let ckpt = dir.path().join(CHECKPOINT);
    let bytes = fs::read(&ckpt).unwrap();
    let model = commands::load_model(&c).unwrap();
    let mut again = Vec::new();
    model.write_checkpoint(&mut again).unwrap();
    assert_eq!(bytes, again);
    let first = commands::evaluate(&c).unwrap();
    let second = commands::evaluate(&c).unwrap();
    assert_eq!(first, second);
}

#[test]
fn evaluate_writes_bands_for_every_grid_time() {
    let dir = TempDir::new().unwrap();
    let c = small(SdeKind::Ou, dir.path());
    commands::simulate(&c).unwrap();
    commands::train(&c, |_, _| {}).unwrap();
    let rows = commands::evaluate(&c).unwrap();
    assert_eq!(rows.len(), 5);
    let text = fs::read_to_string(dir.path().join(METRICS)).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,l2_mean,l2_3sig,rel_mean,rel_3sig,w2_mean,w2_3sig");
    let read: Vec<BandRow> = read_rows(&dir.path().join(METRICS)).unwrap();
    assert_eq!(read, rows);
    for r in &rows[1..] {
        assert!(r.l2_mean > 0.0 && r.l2_3sig >= 0.0 && r.w2_mean >= 0.0);
    }
}

#[test]
fn exact_operator_has_zero_error_bands() {
    let dir = TempDir::new().unwrap();
    let mut c = small(SdeKind::Gbm, dir.path());
    c.evaluate.operator = OperatorChoice::Exact;
    let rows = commands::evaluate(&c).unwrap();
    for r in &rows {
        assert!(r.l2_mean < 1e-9 && r.rel_mean < 1e-9, "{r:?}");
        assert!(r.w2_mean < 0.05, "{r:?}");
    }
}

#[test]
fn langevin_pipeline_skips_chaos_stages() {
    let dir = TempDir::new().unwrap();
    let mut c = small(SdeKind::Langevin, dir.path());
    c.sde.dim = 2;
    c.evaluate.sinkhorn_max_points = 100;
    let mut lines = Vec::new();
    commands::all(&c, |l| lines.push(l.to_string())).unwrap();
    assert!(dir.path().join(METRICS).exists());
    assert!(!dir.path().join(COEFFICIENTS).exists());
    assert!(lines.iter().any(|l| l.contains("skipped")));
    let (_, d, features) = read_dataset::<f64, _>(fs::File::open(dir.path().join(DATASET)).unwrap()).unwrap();
    assert_eq!((d, features), (2, 16));
}

#[test]
fn pce_defaults_satisfy_parseval() {
    for kind in [SdeKind::Gbm, SdeKind::Ou] {
        let dir = TempDir::new().unwrap();
        let mut c = ExperimentConfig::default();
        c.out = dir.path().to_path_buf();
        c.sde.kind = kind;
        let (table, rows) = commands::pce(&c).unwrap();
        assert_eq!(rows.len(), c.pce.grid_points);
        assert!(rows.iter().all(|r| r.defect.abs() <= 0.05), "{rows:?}");
        let read: Vec<ParsevalRow> = read_rows(&dir.path().join(PARSEVAL)).unwrap();
        assert_eq!(read, rows);
        let f = fs::File::open(dir.path().join(COEFFICIENTS)).unwrap();
        let back = sdeonet::pce_ref::CoefficientTable::<f64>::read_csv(f).unwrap();
        assert_eq!(back.times(), table.times());
    }
}

#[test]
fn propagator_matches_closed_form_table() {
    let dir = TempDir::new().unwrap();
    let mut c = small(SdeKind::Gbm, dir.path());
    let (closed, _) = commands::pce(&c).unwrap();
    c.pce.method = PceMethod::Propagator;
    let (solved, rows) = commands::pce(&c).unwrap();
    assert!(rows.iter().all(|r| r.defect.abs() <= 0.05));
    for &t in closed.times() {
        let a = closed.truncation_energy(t).unwrap();
        let b = solved.truncation_energy(t).unwrap();
        assert!((a - b).abs() <= 1e-6 * a, "t = {t}: {a} vs {b}");
    }
}

#[test]
fn decompose_with_chaos_stub_isolates_truncation() {
    let dir = TempDir::new().unwrap();
    let mut c = small(SdeKind::Gbm, dir.path());
    c.decompose.operator = OperatorChoice::Pce;
    let (row, sweep) = commands::decompose(&c).unwrap();
    assert!(row.e_approx < 1e-10 && row.e_recon < 1e-10, "{row:?}");
    assert!(row.total <= row.bound);
    assert_eq!(sweep.len(), 5);
    for w in sweep.windows(2) {
        assert!(w[1].e_trunc <= w[0].e_trunc + 1e-12, "{sweep:?}");
    }
    let read: Vec<DecompositionRow> = read_rows(&dir.path().join(DECOMPOSITION)).unwrap();
    assert_eq!(read, vec![row]);
    let read: Vec<SweepRow> = read_rows(&dir.path().join(TRUNCATION_SWEEP)).unwrap();
    assert_eq!(read, sweep);
}

#[test]
fn full_pipeline_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let c = small(SdeKind::Gbm, &dir.path().join("a"));
    let cfg = write_config(&c, dir.path());
    let runs = ["a", "b"].map(|name| {
        let out = dir.path().join(name);
        let o = sdeonet(&["all", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", "1"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    });
    for name in [DATASET, CHECKPOINT, LOSS_HISTORY, METRICS, COEFFICIENTS, PARSEVAL, DECOMPOSITION, TRUNCATION_SWEEP] {
        assert_eq!(fs::read(runs[0].join(name)).unwrap(), fs::read(runs[1].join(name)).unwrap(), "{name}");
    }
}

#[test]
fn usage_errors_exit_2_with_a_json_line() {
    let o = sdeonet(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_line(&o)["error"]["kind"], "usage");

    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[model]\nbasis_size = 12\n").unwrap();
    let o = sdeonet(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_line(&o)["error"]["kind"], "usage");

    fs::write(&cfg, "[model]\nunknown_key = 1\n").unwrap();
    let o = sdeonet(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_checkpoint_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let o = sdeonet(&["evaluate", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = error_line(&o);
    assert_eq!(err["error"]["kind"], "io");
    assert!(err["error"]["message"].as_str().unwrap().contains(CHECKPOINT));

    let c = small(SdeKind::Ou, dir.path());
    assert_eq!(commands::load_model(&c).unwrap_err().kind, ErrorKind::Io);
}

#[test]
fn help_and_version_exit_cleanly() {
    let o = sdeonet(&["--help"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("simulate"));
    assert!(sdeonet(&["--version"]).status.success());
}

#[test]
fn config_toml_round_trips() {
    let c = small(SdeKind::Langevin, Path::new("x"));
    assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let o = sdeonet(&["pce", "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_line(&o)["error"]["kind"], "io");
}

#[test]
fn default_gbm_parseval_matches_golden_file() {
    let dir = TempDir::new().unwrap();
    let mut c = ExperimentConfig::default();
    c.out = dir.path().to_path_buf();
    c.sde.kind = SdeKind::Gbm;
    let (_, rows) = commands::pce(&c).unwrap();
    let golden: Vec<ParsevalRow> =
        read_rows(&Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/gbm_parseval.csv")).unwrap();
    assert_eq!(rows.len(), golden.len());
    for (a, b) in rows.iter().zip(&golden) {
        assert_eq!(a.t, b.t);
        assert!((a.retained_energy - b.retained_energy).abs() <= 1e-12 * b.retained_energy);
        assert!((a.second_moment - b.second_moment).abs() <= 1e-12 * b.second_moment);
    }
}

#[test]
fn default_ou_training_lowers_the_loss() {
    let dir = TempDir::new().unwrap();
    let mut c = ExperimentConfig::default();
    c.out = dir.path().to_path_buf();
    commands::simulate(&c).unwrap();
    let rows = commands::train(&c, |_, _| {}).unwrap();
    assert_eq!(rows.len(), 30);
    assert!(rows.last().unwrap().loss < rows[0].loss, "{rows:?}");
}
