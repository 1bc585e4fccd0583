//! End-to-end runs of the `cellhealth` binary on a tiny, coarse configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TINY: &str = "\
dataset.n = 14
dataset.k = 32
solver.n_r = 8
solver.n_x = 5
solver.dt = 4.0
surrogate.epochs = 2
ident.epochs = 2
soh.epochs = 3
oracle.windows = 1
oracle.budget = 40
trials = 2
";

fn cellhealth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cellhealth")).args(args).output().unwrap()
}

struct Run {
    _dir: tempfile::TempDir,
    out: PathBuf,
    config: PathBuf,
}

impl Run {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let config = dir.path().join("tiny.toml");
        fs::write(&config, TINY).unwrap();
        Self {
            out: dir.path().join("out"),
            config,
            _dir: dir,
        }
    }

    fn cmd(&self, args: &[&str]) -> Output {
        let mut all = vec!["--config", self.config.to_str().unwrap(), "--out", self.out.to_str().unwrap()];
        all.extend_from_slice(args);
        cellhealth(&all)
    }

    fn ok(&self, args: &[&str]) -> String {
        let o = self.cmd(args);
        assert!(o.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8_lossy(&o.stdout).into_owned()
    }
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn first_series(out: &Path) -> PathBuf {
    let mut files: Vec<PathBuf> = fs::read_dir(out.join("dataset/series"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files.remove(0)
}

#[test]
fn zero_samples_is_a_usage_error() {
    let run = Run::new();
    assert_eq!(run.cmd(&["gen-data", "--n", "0"]).status.code(), Some(1));
    assert_eq!(cellhealth(&["train", "everything"]).status.code(), Some(1));
}

#[test]
fn stages_refuse_to_run_out_of_order() {
    let run = Run::new();
    let o = run.cmd(&["train", "ident"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("run.cfg"), "{}", stderr(&o));
    run.ok(&["gen-data"]);
    let o = run.cmd(&["train", "ident"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("checkpoint.txt"), "{}", stderr(&o));
    let o = run.cmd(&["train", "soh"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("identifier.txt"), "{}", stderr(&o));
}

#[test]
fn gen_data_is_reproducible() {
    let (a, b) = (Run::new(), Run::new());
    a.ok(&["gen-data", "--seed", "3"]);
    b.ok(&["gen-data", "--seed", "3"]);
    for rel in ["dataset/manifest.csv", "dataset/run.cfg", "dataset/summary.cfg"] {
        assert_eq!(fs::read(a.out.join(rel)).unwrap(), fs::read(b.out.join(rel)).unwrap(), "{rel}");
    }
    assert_eq!(fs::read(first_series(&a.out)).unwrap(), fs::read(first_series(&b.out)).unwrap());
}

#[test]
fn full_pipeline_and_window_commands() {
    let run = Run::new();
    run.ok(&["gen-data"]);
    run.ok(&["train", "surrogate"]);
    run.ok(&["train", "ident"]);
    run.ok(&["train", "soh"]);
    run.ok(&["eval"]);
    for dir in ["dataset", "surrogate", "ident", "soh", "eval"] {
        let cfg = fs::read_to_string(run.out.join(dir).join("run.cfg")).unwrap();
        assert!(cfg.contains("trials = 2"), "{dir}");
    }
    let metrics = fs::read_to_string(run.out.join("eval/metrics.csv")).unwrap();
    assert!(metrics.starts_with("metric,trial,value"));
    for key in ["recon_rmse_v", "param_rmse_eps_s_neg", "soh_rmse,mean", "latency_identify_estimate_s", "oracle_rmse_v"] {
        assert!(metrics.contains(key), "{key} missing");
    }
    let soh = fs::read_to_string(run.out.join("eval/trial_1/soh.csv")).unwrap();
    assert!(soh.starts_with("sample_id,soh_true,soh_pred,abs_err"));

    let series = first_series(&run.out);
    run.ok(&["identify", series.to_str().unwrap()]);
    let theta = fs::read_to_string(run.out.join("identify/theta.csv")).unwrap();
    assert!(theta.starts_with("sample_id,eps_s_neg,eps_s_pos,x100_neg,x0_neg,x100_pos,x0_pos,recon_rmse_v"));
    assert_eq!(theta.lines().count(), 2);

    run.ok(&["estimate", series.to_str().unwrap(), "--soh-true", "0.9"]);
    let est = fs::read_to_string(run.out.join("estimate/soh.csv")).unwrap();
    let row: Vec<&str> = est.lines().nth(1).unwrap().split(',').collect();
    let pred: f64 = row[2].parse().unwrap();
    assert!(pred > 0.0 && pred < 1.0);

    let bad = run.out.join("bad.csv");
    fs::write(&bad, "time,volts\n0,3.3\n1,3.2\n").unwrap();
    let o = run.cmd(&["identify", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("t_s,current_a,voltage_v"), "{}", stderr(&o));
}

#[test]
fn dqdv_emits_fresh_and_perturbed_curves() {
    let run = Run::new();
    let stdout = run.ok(&["dqdv", "--perturb", "lam_ne"]);
    assert!(stdout.contains("fresh") && stdout.contains("lam_ne"));
    let text = fs::read_to_string(run.out.join("dqdv/dqdv.csv")).unwrap();
    assert!(text.starts_with("v_volts,dq_dv_ah_per_v,case_label"));
    let labels: std::collections::BTreeSet<&str> = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(labels.into_iter().collect::<Vec<_>>(), vec!["fresh", "lam_ne"]);
}

#[test]
fn sensitivity_writes_every_case() {
    let run = Run::new();
    run.ok(&["sensitivity"]);
    let summary = fs::read_to_string(run.out.join("sensitivity/summary.csv")).unwrap();
    for label in ["fresh", "lam_ne", "lam_pe", "lli"] {
        assert!(summary.lines().any(|l| l.starts_with(label)), "{label}");
    }
    assert!(run.out.join("sensitivity/series.csv").exists());
    assert!(run.out.join("sensitivity/run.cfg").exists());
}
