//! Staged pipeline: dataset, surrogate, identifier, SOH head, evaluation.
//!
//! Each stage reads the artifacts of the previous one from a fixed layout
//! under the output root and writes the resolved run configuration next to
//! its own outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cellhealth_core::config::KvConfig;
use cellhealth_core::solver::dataset::CONFIG_FILE;
use cellhealth_core::solver::{build_dataset, DatasetConfig, DatasetManifest};
use cellhealth_core::params::AGING_NAMES;
use cellhealth_core::{OcpPair, Variable};
use cellhealth_models::data::{split_indices, Dataset, Split};
use cellhealth_models::identification::{self, reconstruct_voltage, train_identifier, IdentEpoch, Identifier, IdentifierConfig};
use cellhealth_models::oracle::{iterative_identify, OracleConfig};
use cellhealth_models::report::{rmse, write_csv, EpochRow};
use cellhealth_models::soh::{self, identify_and_estimate, train_soh, Labelled, SohConfig, SohEpoch, SohHead};
use cellhealth_models::surrogate::{train_surrogate, Surrogate, SurrogateConfig};
use cellhealth_models::voltage::VoltageModel;
use cellhealth_models::window::MeasurementWindow;
use cellhealth_models::{Error, Result};

/// Dataset size restoring the published scale.
pub const PAPER_SCALE_N: usize = 5200;
pub const METRICS_FILE: &str = "metrics.csv";
pub const METRICS_HEADER: [&str; 3] = ["metric", "trial", "value"];

/// Seed offsets from the root seed, per stage.
const DATASET_OFFSET: u64 = 7;
const SPLIT_OFFSET: u64 = 1;
const SURROGATE_OFFSET: u64 = 11;
const IDENT_OFFSET: u64 = 23;
const SOH_OFFSET: u64 = 31;
const ORACLE_OFFSET: u64 = 41;

/// Fully resolved settings of every stage.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub train_fraction: f64,
    /// Share of the training pool held out for early stopping.
    pub val_fraction: f64,
    pub split_seed: u64,
    pub surrogate: SurrogateConfig,
    pub ident: IdentifierConfig,
    pub soh: SohConfig,
    pub oracle: OracleConfig,
    /// Test windows the iterative oracle is run on during evaluation.
    pub oracle_windows: usize,
    pub trials: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_config(&KvConfig::new()).expect("defaults are valid")
    }
}

/// Command-line settings layered over a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub n: Option<usize>,
    pub paper_scale: bool,
}

impl Overrides {
    /// A root seed replaces every stage seed, including ones set in the file.
    pub fn apply(&self, cfg: &mut KvConfig) {
        if let Some(seed) = self.seed {
            cfg.set_int("seed", seed as i64);
            for (key, offset) in seed_keys() {
                cfg.set_int(key, seed.wrapping_add(offset) as i64);
            }
        }
        if let Some(t) = self.trials {
            cfg.set_int("trials", t as i64);
        }
        if self.paper_scale {
            cfg.set_int("dataset.n", PAPER_SCALE_N as i64);
        }
        if let Some(n) = self.n {
            cfg.set_int("dataset.n", n as i64);
        }
    }
}

fn seed_keys() -> [(&'static str, u64); 6] {
    [
        ("dataset.seed", DATASET_OFFSET),
        ("split.seed", SPLIT_OFFSET),
        ("surrogate.seed", SURROGATE_OFFSET),
        ("ident.seed", IDENT_OFFSET),
        ("soh.seed", SOH_OFFSET),
        ("oracle.seed", ORACLE_OFFSET),
    ]
}

impl RunConfig {
    /// Stage seeds absent from `cfg` follow the root seed `seed` (default 0).
    pub fn from_config(cfg: &KvConfig) -> Result<Self> {
        let root = cfg.u64_or("seed", 0)?;
        let mut cfg = cfg.clone();
        for (key, offset) in seed_keys() {
            if cfg.get(key).is_none() {
                cfg.set_int(key, root.wrapping_add(offset) as i64);
            }
        }
        let d = OracleConfig::default();
        let out = Self {
            seed: root,
            dataset: DatasetConfig::from_config(&cfg)?,
            train_fraction: cfg.f64_or("split.train_fraction", 0.8)?,
            val_fraction: cfg.f64_or("split.val_fraction", 0.1)?,
            split_seed: cfg.u64_or("split.seed", root)?,
            surrogate: SurrogateConfig::from_config(&cfg)?,
            ident: IdentifierConfig::from_config(&cfg)?,
            soh: SohConfig::from_config(&cfg)?,
            oracle: OracleConfig {
                starts: cfg.usize_or("oracle.starts", d.starts)?,
                budget: cfg.usize_or("oracle.budget", d.budget)?,
                target_rmse: cfg.f64_or("oracle.target_rmse", d.target_rmse)?,
                initial_step: cfg.f64_or("oracle.initial_step", d.initial_step)?,
                seed: cfg.u64_or("oracle.seed", d.seed)?,
            },
            oracle_windows: cfg.usize_or("oracle.windows", 10)?,
            trials: cfg.usize_or("trials", 5)?,
        };
        if out.trials == 0 {
            return Err(Error::Input("trials must be at least 1".into()));
        }
        Ok(out)
    }

    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => KvConfig::load(p)?,
            None => KvConfig::new(),
        };
        overrides.apply(&mut cfg);
        Self::from_config(&cfg)
    }

    pub fn to_config(&self) -> KvConfig {
        let mut cfg = KvConfig::new();
        cfg.set_int("seed", self.seed as i64);
        self.dataset.write_config(&mut cfg);
        cfg.set_f64("split.train_fraction", self.train_fraction);
        cfg.set_f64("split.val_fraction", self.val_fraction);
        cfg.set_int("split.seed", self.split_seed as i64);
        self.surrogate.write_config(&mut cfg);
        self.ident.write_config(&mut cfg);
        self.soh.write_config(&mut cfg);
        cfg.set_int("oracle.starts", self.oracle.starts as i64);
        cfg.set_int("oracle.budget", self.oracle.budget as i64);
        cfg.set_f64("oracle.target_rmse", self.oracle.target_rmse);
        cfg.set_f64("oracle.initial_step", self.oracle.initial_step);
        cfg.set_int("oracle.seed", self.oracle.seed as i64);
        cfg.set_int("oracle.windows", self.oracle_windows as i64);
        cfg.set_int("trials", self.trials as i64);
        cfg
    }

    /// Writes the snapshot `run.cfg` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(CONFIG_FILE);
        fs::write(&path, self.to_config().to_text()).map_err(|e| Error::io(&path, e))
    }

    pub fn split(&self, n: usize) -> Result<Split> {
        split_indices(n, self.train_fraction, self.val_fraction, self.split_seed)
    }
}

/// Directory layout under the output root.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Self { root: root.to_path_buf() }
    }

    pub fn dataset(&self) -> PathBuf {
        self.root.join("dataset")
    }

    pub fn surrogate(&self) -> PathBuf {
        self.root.join("surrogate")
    }

    pub fn ident(&self) -> PathBuf {
        self.root.join("ident")
    }

    pub fn identifier(&self) -> PathBuf {
        self.ident().join(identification::CHECKPOINT_FILE)
    }

    pub fn soh(&self) -> PathBuf {
        self.root.join("soh")
    }

    pub fn soh_trial(&self, trial: usize) -> PathBuf {
        self.soh().join(format!("trial_{trial}"))
    }

    pub fn soh_head(&self, trial: usize) -> PathBuf {
        self.soh_trial(trial).join(soh::CHECKPOINT_FILE)
    }

    pub fn eval(&self) -> PathBuf {
        self.root.join("eval")
    }
}

/// Every dataset sample as an identifier window.
pub fn windows(ds: &Dataset) -> Result<Vec<MeasurementWindow>> {
    ds.samples
        .iter()
        .map(|s| MeasurementWindow::from_series(&s.series, ds.config.k))
        .collect()
}

pub fn voltage_model(ds: &Dataset) -> VoltageModel {
    VoltageModel::new(ds.config.cell.clone(), OcpPair::default(), ds.spec.clone())
}

pub fn gen_data(cfg: &RunConfig, layout: &Layout) -> Result<DatasetManifest> {
    let dir = layout.dataset();
    let manifest = build_dataset(&cfg.dataset, &OcpPair::default(), &dir)?;
    cfg.write(&dir)?;
    Ok(manifest)
}

pub fn train_surrogate_stage(cfg: &RunConfig, layout: &Layout) -> Result<[Vec<EpochRow>; 4]> {
    let ds = Dataset::load(&layout.dataset())?;
    let split = cfg.split(ds.len())?;
    let dir = layout.surrogate();
    let (_, reports) = train_surrogate(&ds, &split.train, &split.val, &cfg.surrogate, Some(&dir))?;
    cfg.write(&dir)?;
    Ok(reports)
}

pub fn train_ident_stage(cfg: &RunConfig, layout: &Layout) -> Result<Vec<IdentEpoch>> {
    let ds = Dataset::load(&layout.dataset())?;
    let surrogate = Surrogate::load(&layout.surrogate())?;
    let split = cfg.split(ds.len())?;
    let all = windows(&ds)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| &all[i]).collect::<Vec<_>>();
    let frozen = Surrogate::checkpoint_paths(&layout.surrogate()).to_vec();
    let dir = layout.ident();
    let (_, history) = train_identifier(
        &pick(&split.train),
        &pick(&split.val),
        &surrogate,
        &frozen,
        &voltage_model(&ds),
        &cfg.ident,
        Some(&dir),
    )?;
    cfg.write(&dir)?;
    Ok(history)
}

/// Checkpoints that must not change once the identifier is trained.
fn upstream_checkpoints(layout: &Layout) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = Surrogate::checkpoint_paths(&layout.surrogate())
        .into_iter()
        .filter(|p| p.exists())
        .collect();
    files.push(layout.identifier());
    files
}

/// Trains one SOH head per trial, seeds `soh.seed + trial`.
pub fn train_soh_stage(cfg: &RunConfig, layout: &Layout) -> Result<Vec<Vec<SohEpoch>>> {
    let ds = Dataset::load(&layout.dataset())?;
    let identifier = Identifier::load(&layout.identifier())?;
    let split = cfg.split(ds.len())?;
    let all = windows(&ds)?;
    let labelled = |idx: &[usize]| {
        idx.iter()
            .map(|&i| Labelled {
                window: &all[i],
                soh: ds.samples[i].soh,
            })
            .collect::<Vec<_>>()
    };
    let (train, val) = (labelled(&split.train), labelled(&split.val));
    let frozen = upstream_checkpoints(layout);
    let mut histories = Vec::with_capacity(cfg.trials);
    for trial in 0..cfg.trials {
        let trial_cfg = SohConfig {
            seed: cfg.soh.seed.wrapping_add(trial as u64),
            ..cfg.soh.clone()
        };
        let dir = layout.soh_trial(trial);
        let (_, history) = train_soh(&identifier, &train, &val, &frozen, &trial_cfg, Some(&dir))?;
        histories.push(history);
    }
    cfg.write(&layout.soh())?;
    Ok(histories)
}

/// Test-split evaluation of every stage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics {
    pub test_windows: usize,
    /// Held-out concentration RMSE per surrogate output, mol/m^3.
    pub surrogate_rmse: [f64; 4],
    /// Mean per-window voltage RMSE with the true parameters, V.
    pub recon_rmse_true_theta: f64,
    /// Mean per-window voltage RMSE with the identified parameters, V.
    pub recon_rmse: f64,
    pub param_rmse: [f64; 6],
    pub soh_rmse: Vec<f64>,
    pub soh_max_abs_err: Vec<f64>,
    /// Decreasing steps of each head along eps_s_neg and eps_s_pos.
    pub soh_monotonicity: Vec<[usize; 2]>,
    /// Standard deviation of the test SOH labels.
    pub soh_label_std: f64,
    /// Mean wall time of identify plus estimate, s.
    pub latency_s: f64,
    pub identifier_macs: usize,
    pub soh_head_macs: usize,
    /// Voltage RMSE of the oracle on each window it was run on, V.
    pub oracle_rmse: Vec<f64>,
    pub oracle_time_s: f64,
    pub oracle_evaluations: f64,
    /// Mean |network - oracle| per parameter over the oracle windows.
    pub oracle_gap: [f64; 6],
    /// Mean multi-start spread of the oracle per parameter.
    pub oracle_spread: [f64; 6],
}

impl Metrics {
    pub fn soh_rmse_mean(&self) -> f64 {
        self.soh_rmse.iter().sum::<f64>() / self.soh_rmse.len().max(1) as f64
    }

    pub fn rows(&self) -> Vec<Vec<String>> {
        let mut rows = Vec::new();
        let mut push = |metric: &str, trial: &str, value: f64| {
            rows.push(vec![metric.to_string(), trial.to_string(), value.to_string()]);
        };
        push("test_windows", "", self.test_windows as f64);
        for (var, v) in Variable::CONCENTRATIONS.iter().zip(self.surrogate_rmse) {
            push(&format!("surrogate_rmse_{}_mol_m3", var.key()), "", v);
        }
        push("recon_rmse_true_theta_v", "", self.recon_rmse_true_theta);
        push("recon_rmse_v", "", self.recon_rmse);
        for (name, v) in AGING_NAMES.iter().zip(self.param_rmse) {
            push(&format!("param_rmse_{name}"), "", v);
        }
        for (t, v) in self.soh_rmse.iter().enumerate() {
            push("soh_rmse", &t.to_string(), *v);
        }
        push("soh_rmse", "mean", self.soh_rmse_mean());
        for (t, v) in self.soh_max_abs_err.iter().enumerate() {
            push("soh_max_abs_err", &t.to_string(), *v);
        }
        let n = self.soh_max_abs_err.len().max(1) as f64;
        push("soh_max_abs_err", "mean", self.soh_max_abs_err.iter().sum::<f64>() / n);
        for (t, m) in self.soh_monotonicity.iter().enumerate() {
            push("soh_monotonicity_violations_eps_s_neg", &t.to_string(), m[0] as f64);
            push("soh_monotonicity_violations_eps_s_pos", &t.to_string(), m[1] as f64);
        }
        push("soh_label_std", "", self.soh_label_std);
        push("latency_identify_estimate_s", "", self.latency_s);
        push("macs_identifier", "", self.identifier_macs as f64);
        push("macs_soh_head", "", self.soh_head_macs as f64);
        if !self.oracle_rmse.is_empty() {
            let k = self.oracle_rmse.len() as f64;
            push("oracle_windows", "", k);
            push("oracle_rmse_v", "mean", self.oracle_rmse.iter().sum::<f64>() / k);
            push("oracle_rmse_v", "max", self.oracle_rmse.iter().copied().fold(0.0, f64::max));
            push("oracle_time_s", "", self.oracle_time_s);
            push("oracle_evaluations", "", self.oracle_evaluations);
            push("oracle_to_network_time_ratio", "", self.oracle_time_s / self.latency_s);
            for (k, name) in AGING_NAMES.iter().enumerate() {
                push(&format!("oracle_network_gap_{name}"), "", self.oracle_gap[k]);
                push(&format!("oracle_start_spread_{name}"), "", self.oracle_spread[k]);
            }
        }
        rows
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len().max(1) as f64
}

/// Evaluates every stage on the test split and writes `eval/metrics.csv`
/// and one `soh.csv` per trial.
pub fn eval_stage(cfg: &RunConfig, layout: &Layout) -> Result<Metrics> {
    let ds = Dataset::load(&layout.dataset())?;
    let surrogate = Surrogate::load(&layout.surrogate())?;
    let identifier = Identifier::load(&layout.identifier())?;
    let heads = (0..cfg.trials)
        .map(|t| SohHead::load(&layout.soh_head(t)))
        .collect::<Result<Vec<_>>>()?;
    let split = cfg.split(ds.len())?;
    if split.test.is_empty() {
        return Err(Error::Input("the test split is empty".into()));
    }
    let all = windows(&ds)?;
    let model = voltage_model(&ds);
    let test: Vec<usize> = split.test.clone();
    let out = layout.eval();
    let mut m = Metrics {
        test_windows: test.len(),
        identifier_macs: identifier.network().macs_per_sample(),
        soh_head_macs: heads[0].network().macs_per_sample(),
        ..Metrics::default()
    };

    let mut pred: [Vec<f64>; 4] = Default::default();
    let mut truth: [Vec<f64>; 4] = Default::default();
    for &i in &test {
        let s = &ds.samples[i];
        let p = surrogate.predict(&s.theta, &s.series.current, &s.series.t)?;
        for (k, col) in p.into_iter().enumerate() {
            pred[k].extend(col);
        }
        truth[0].extend(&s.series.c_ss_neg);
        truth[1].extend(&s.series.c_ss_pos);
        truth[2].extend(&s.series.c_e_0);
        truth[3].extend(&s.series.c_e_l);
    }
    m.surrogate_rmse = std::array::from_fn(|k| rmse(&pred[k], &truth[k]));

    let mut true_recon = Vec::new();
    let mut recon = Vec::new();
    let mut sq = [0.0; 6];
    let mut latency = Vec::new();
    let mut identified = Vec::new();
    for &i in &test {
        let w = &all[i];
        let (v, _) = reconstruct_voltage(&ds.samples[i].theta, w, &surrogate, &model)?;
        true_recon.push(rmse(&v, &w.voltage));
        let start = Instant::now();
        let (theta, _) = identify_and_estimate(w, &identifier, &heads[0])?;
        latency.push(start.elapsed().as_secs_f64());
        let (v, _) = reconstruct_voltage(&theta.0, w, &surrogate, &model)?;
        recon.push(rmse(&v, &w.voltage));
        for (k, s) in sq.iter_mut().enumerate() {
            *s += (theta.0[k] - ds.samples[i].theta[k]).powi(2);
        }
        identified.push(theta);
    }
    m.recon_rmse_true_theta = mean(&true_recon);
    m.recon_rmse = mean(&recon);
    m.param_rmse = sq.map(|s| (s / test.len() as f64).sqrt());
    m.latency_s = mean(&latency);

    let labels: Vec<f64> = test.iter().map(|&i| ds.samples[i].soh).collect();
    let label_mean = mean(&labels);
    m.soh_label_std = (labels.iter().map(|y| (y - label_mean).powi(2)).sum::<f64>() / labels.len() as f64).sqrt();
    let test_windows: Vec<&MeasurementWindow> = test.iter().map(|&i| &all[i]).collect();
    let s_hat = identifier.normalized(&test_windows)?;
    for (t, head) in heads.iter().enumerate() {
        let y = head.predict(&s_hat)?;
        let err: Vec<f64> = y.iter().zip(&labels).map(|(p, l)| (p - l).abs()).collect();
        m.soh_rmse.push(rmse(&y, &labels));
        m.soh_max_abs_err.push(err.iter().copied().fold(0.0, f64::max));
        m.soh_monotonicity.push(head.monotonicity_violations(21)?);
        let rows = test.iter().enumerate().map(|(r, &i)| {
            vec![
                ds.samples[i].id.clone(),
                labels[r].to_string(),
                y[r].to_string(),
                err[r].to_string(),
            ]
        });
        write_csv(&out.join(format!("trial_{t}")).join("soh.csv"), &soh::SOH_HEADER, rows)?;
    }

    let n_oracle = cfg.oracle_windows.min(test.len());
    let mut times = Vec::new();
    let mut evals = Vec::new();
    for (r, &i) in test.iter().take(n_oracle).enumerate() {
        let start = Instant::now();
        let res = iterative_identify(
            &all[i],
            &ds.config.cell,
            &OcpPair::default(),
            &ds.config.solver,
            &ds.config.ranges,
            &cfg.oracle,
            None,
        )?;
        times.push(start.elapsed().as_secs_f64());
        evals.push(res.evaluations as f64);
        m.oracle_rmse.push(res.rmse);
        let spread = res.start_spread();
        for k in 0..6 {
            m.oracle_gap[k] += (identified[r].0[k] - res.theta.0[k]).abs() / n_oracle as f64;
            m.oracle_spread[k] += spread[k] / n_oracle as f64;
        }
    }
    m.oracle_time_s = mean(&times);
    m.oracle_evaluations = mean(&evals);

    write_csv(&out.join(METRICS_FILE), &METRICS_HEADER, m.rows())?;
    cfg.write(&out)?;
    Ok(m)
}
