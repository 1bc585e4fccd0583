//! State-of-health regression on identified parameters, and the dQ/dV
//! sensitivity utilities.

use std::fs;
use std::path::{Path, PathBuf};

use cellhealth_core::config::KvConfig;
use cellhealth_core::solver::{complete_aging, simulate_discharge, SimRecord, SolverSettings};
use cellhealth_core::{AgingParameters, CellParameters, OcpPair};
use cellhealth_nn::{file_sha256, Activation, Adam, Checkpoint, Network, Tape, Tensor};
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::identification::{verify_frozen, Identifier};
use crate::report::write_csv;
use crate::window::MeasurementWindow;
use crate::{Error, Result};

pub const TAG: &str = "soh_head";
pub const CHECKPOINT_FILE: &str = "soh_head.txt";
pub const REPORT_FILE: &str = "soh_report.csv";
pub const REPORT_HEADER: [&str; 3] = ["epoch", "train_loss", "val_loss"];
pub const LAYER_SIZES: [usize; 4] = [6, 64, 32, 1];
pub const SOH_HEADER: [&str; 4] = ["sample_id", "soh_true", "soh_pred", "abs_err"];
pub const DQDV_HEADER: [&str; 3] = ["v_volts", "dq_dv_ah_per_v", "case_label"];
/// Default voltage bin for incremental-capacity curves, V.
pub const DQDV_BIN: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct SohConfig {
    pub epochs: usize,
    pub batch: usize,
    pub patience: usize,
    pub seed: u64,
    pub lr: f64,
}

impl Default for SohConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch: 64,
            patience: 25,
            seed: 31,
            lr: 1e-3,
        }
    }
}

impl SohConfig {
    pub fn from_config(cfg: &KvConfig) -> Result<Self> {
        let d = Self::default();
        let out = Self {
            epochs: cfg.usize_or("soh.epochs", d.epochs)?,
            batch: cfg.usize_or("soh.batch", d.batch)?,
            patience: cfg.usize_or("soh.patience", d.patience)?,
            seed: cfg.u64_or("soh.seed", d.seed)?,
            lr: cfg.f64_or("soh.lr", d.lr)?,
        };
        if out.batch == 0 || out.epochs == 0 {
            return Err(Error::Input("soh.batch and soh.epochs must be positive".into()));
        }
        Ok(out)
    }

    pub fn write_config(&self, cfg: &mut KvConfig) {
        cfg.set_int("soh.epochs", self.epochs as i64);
        cfg.set_int("soh.batch", self.batch as i64);
        cfg.set_int("soh.patience", self.patience as i64);
        cfg.set_int("soh.seed", self.seed as i64);
        cfg.set_f64("soh.lr", self.lr);
    }
}

/// MLP from normalized parameters to SOH; the sigmoid output is the SOH itself.
#[derive(Debug, Clone, PartialEq)]
pub struct SohHead {
    net: Network,
}

impl SohHead {
    pub fn new(seed: u64) -> Result<Self> {
        Ok(Self {
            net: Network::mlp(&LAYER_SIZES, Activation::Relu, Activation::Sigmoid, seed)?,
        })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    /// SOH for each row of normalized parameters.
    pub fn predict(&self, s: &[[f64; 6]]) -> Result<Vec<f64>> {
        let x = Tensor::matrix(s.len(), 6, s.iter().flatten().copied().collect())?;
        Ok(self.net.forward(&x)?.into_data())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        Ok(Checkpoint::new(TAG, self.net.clone(), Vec::new()).save(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::Ordering {
                path: path.to_path_buf(),
                hint: "train the SOH head first (train soh)".into(),
            });
        }
        let ckpt = Checkpoint::load(path)?;
        if ckpt.tag != TAG {
            return Err(Error::Input(format!("{} has tag `{}`, expected `{TAG}`", path.display(), ckpt.tag)));
        }
        Ok(Self { net: ckpt.network })
    }

    /// Counts decreasing steps of the prediction along each active-material
    /// fraction over `steps` grid points, other inputs held at mid-range.
    pub fn monotonicity_violations(&self, steps: usize) -> Result<[usize; 2]> {
        let mut out = [0; 2];
        for (k, count) in out.iter_mut().enumerate() {
            let rows: Vec<[f64; 6]> = (0..steps)
                .map(|i| {
                    let mut r = [0.5; 6];
                    r[k] = i as f64 / (steps - 1).max(1) as f64;
                    r
                })
                .collect();
            let y = self.predict(&rows)?;
            *count = y.windows(2).filter(|w| w[1] < w[0]).count();
        }
        Ok(out)
    }
}

/// Identify, then regress: one identifier pass and one head pass.
pub fn estimate_soh(window: &MeasurementWindow, identifier: &Identifier, head: &SohHead) -> Result<f64> {
    Ok(identify_and_estimate(window, identifier, head)?.1)
}

/// Aging parameters and SOH of one window from a single identifier pass.
pub fn identify_and_estimate(
    window: &MeasurementWindow,
    identifier: &Identifier,
    head: &SohHead,
) -> Result<(AgingParameters, f64)> {
    let s = identifier.normalized(&[window])?;
    let soh = head.predict(&s)?[0];
    Ok((AgingParameters::new(identifier.spec().denormalize_aging(&s[0])), soh))
}

fn mse_loss(tape: &mut Tape, head: &SohHead, params: &[cellhealth_nn::Var], x: &Tensor, y: &[f64]) -> Result<cellhealth_nn::Var> {
    let xv = tape.constant(x.clone());
    let pred = head.net.forward_tape(tape, params, xv)?;
    let target = tape.constant(Tensor::column(y.to_vec()));
    let d = tape.sub(pred, target)?;
    let sq = tape.square(d);
    Ok(tape.mean(sq))
}

/// SOH-head epoch: mean squared errors on the training and validation sets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SohEpoch {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Labelled windows for the SOH stage.
#[derive(Debug, Clone, Copy)]
pub struct Labelled<'a> {
    pub window: &'a MeasurementWindow,
    pub soh: f64,
}

/// Trains the head on the frozen identifier's estimates. Only the head's
/// weights are updated; `frozen_files` are hashed before and after.
pub fn train_soh(
    identifier: &Identifier,
    train: &[Labelled],
    val: &[Labelled],
    frozen_files: &[PathBuf],
    cfg: &SohConfig,
    out_dir: Option<&Path>,
) -> Result<(SohHead, Vec<SohEpoch>)> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::Input("SOH training needs train and validation windows".into()));
    }
    let before: Vec<String> = frozen_files.iter().map(|p| Ok(file_sha256(p)?)).collect::<Result<_>>()?;
    let features = |set: &[Labelled]| -> Result<(Vec<[f64; 6]>, Vec<f64>)> {
        let windows: Vec<&MeasurementWindow> = set.iter().map(|l| l.window).collect();
        Ok((identifier.normalized(&windows)?, set.iter().map(|l| l.soh).collect()))
    };
    let (x_train, y_train) = features(train)?;
    let (x_val, y_val) = features(val)?;
    let to_tensor = |rows: &[[f64; 6]]| Tensor::matrix(rows.len(), 6, rows.iter().flatten().copied().collect());
    let x_val_t = to_tensor(&x_val)?;

    let mut head = SohHead::new(cfg.seed)?;
    let mut adam = Adam::new(&head.net.params(), cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x50f);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best = (f64::INFINITY, head.clone());
    let mut since_best = 0;
    let mut history = Vec::new();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for idx in order.chunks(cfg.batch) {
            let xb: Vec<[f64; 6]> = idx.iter().map(|&i| x_train[i]).collect();
            let yb: Vec<f64> = idx.iter().map(|&i| y_train[i]).collect();
            let mut tape = Tape::new();
            let params = head.net.register(&mut tape, true);
            let loss = mse_loss(&mut tape, &head, &params, &to_tensor(&xb)?, &yb)?;
            let value = tape.value(loss).data()[0];
            if !value.is_finite() {
                return Err(Error::Numerical(format!("SOH loss is {value} at epoch {epoch}")));
            }
            sum += value * idx.len() as f64;
            let mut grads = tape.backward(loss)?;
            let g: Vec<Tensor> = params
                .iter()
                .zip(head.net.params())
                .map(|(&v, p)| grads.take(v).unwrap_or_else(|| Tensor::zeros(p.shape())))
                .collect();
            adam.step(&mut head.net.params_mut(), &g)?;
        }
        let pred = head.net.forward(&x_val_t)?;
        let val_loss = pred.data().iter().zip(&y_val).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / y_val.len() as f64;
        history.push(SohEpoch {
            epoch,
            train_loss: sum / train.len() as f64,
            val_loss,
        });
        if val_loss < best.0 {
            best = (val_loss, head.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    verify_frozen(frozen_files, &before)?;
    let head = best.1;
    if let Some(dir) = out_dir {
        head.save(&dir.join(CHECKPOINT_FILE))?;
        let rows = history
            .iter()
            .map(|h| vec![h.epoch.to_string(), h.train_loss.to_string(), h.val_loss.to_string()]);
        write_csv(&dir.join(REPORT_FILE), &REPORT_HEADER, rows)?;
    }
    Ok((head, history))
}

/// One incremental-capacity bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DqdvPoint {
    /// Bin centre, V.
    pub v: f64,
    /// Bin width, V. Equal to the nominal width except at the two ends.
    pub width: f64,
    /// Charge passed inside the bin divided by its width, Ah/V.
    pub dq_dv: f64,
}

/// Coulomb-counted charge, Ah, at each sample of a discharge.
pub fn coulomb_count(t: &[f64], current: &[f64]) -> Vec<f64> {
    let mut q = vec![0.0; t.len()];
    for i in 1..t.len() {
        q[i] = q[i - 1] + 0.5 * (current[i] + current[i - 1]) * (t[i] - t[i - 1]) / 3600.0;
    }
    q
}

/// Incremental capacity over fixed-width voltage bins.
///
/// Bin edges sit on multiples of `bin_width` between the start and end
/// voltage, with partial bins at both ends. The charge at an edge is taken
/// where the voltage first falls to it, so the bins telescope to the
/// coulomb-counted total.
pub fn dqdv_curve(record: &SimRecord, bin_width: f64) -> Result<Vec<DqdvPoint>> {
    let s = &record.series;
    if !(bin_width > 0.0) || s.len() < 2 {
        return Err(Error::Input("dQ/dV needs a positive bin width and at least two samples".into()));
    }
    let q = coulomb_count(&s.t, &s.current);
    let (v_top, v_end) = (s.voltage[0], s.voltage[s.len() - 1]);
    if !(v_top > v_end) {
        return Err(Error::Input(format!("voltage does not fall over the discharge ({v_top} to {v_end} V)")));
    }
    let mut edges = vec![v_top];
    let mut e = (v_top / bin_width).ceil() * bin_width - bin_width;
    while e > v_end + 1e-12 {
        if e < v_top - 1e-12 {
            edges.push(e);
        }
        e -= bin_width;
    }
    edges.push(v_end);
    if edges.len() < 4 {
        return Err(Error::Input(format!(
            "{} voltage bins between {v_top:.3} and {v_end:.3} V; at least 3 are needed",
            edges.len() - 1
        )));
    }
    // charge at the first crossing of each edge, scanning forward in time
    let mut q_edge = vec![0.0; edges.len()];
    let mut i = 0;
    for (k, &edge) in edges.iter().enumerate().skip(1) {
        while i + 1 < s.len() && s.voltage[i + 1] > edge {
            i += 1;
        }
        q_edge[k] = if i + 1 >= s.len() {
            q[s.len() - 1]
        } else {
            let (v0, v1) = (s.voltage[i], s.voltage[i + 1]);
            let w = if v0 > v1 { ((v0 - edge) / (v0 - v1)).clamp(0.0, 1.0) } else { 1.0 };
            q[i] + w * (q[i + 1] - q[i])
        };
    }
    let last = edges.len() - 1;
    q_edge[last] = q[s.len() - 1];
    let mut out: Vec<DqdvPoint> = edges
        .windows(2)
        .zip(q_edge.windows(2))
        .map(|(e, qq)| {
            let width = e[0] - e[1];
            DqdvPoint {
                v: 0.5 * (e[0] + e[1]),
                width,
                dq_dv: (qq[1] - qq[0]) / width,
            }
        })
        .collect();
    out.reverse();
    Ok(out)
}

/// Charge under a dQ/dV curve, Ah.
pub fn integrate(curve: &[DqdvPoint]) -> f64 {
    curve.iter().map(|p| p.dq_dv * p.width).sum()
}

pub fn write_dqdv_csv(path: &Path, curves: &[(&str, &[DqdvPoint])]) -> Result<()> {
    let rows = curves.iter().flat_map(|(label, curve)| {
        curve
            .iter()
            .map(move |p| vec![p.v.to_string(), p.dq_dv.to_string(), label.to_string()])
    });
    write_csv(path, &DQDV_HEADER, rows)
}

/// Degradation mechanisms of the sensitivity study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mechanism {
    Fresh,
    /// Loss of negative active material.
    LamNe,
    /// Loss of positive active material.
    LamPe,
    /// Loss of lithium inventory.
    Lli,
}

impl Mechanism {
    pub const ALL: [Mechanism; 4] = [Mechanism::Fresh, Mechanism::LamNe, Mechanism::LamPe, Mechanism::Lli];

    pub fn label(self) -> &'static str {
        match self {
            Mechanism::Fresh => "fresh",
            Mechanism::LamNe => "lam_ne",
            Mechanism::LamPe => "lam_pe",
            Mechanism::Lli => "lli",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.label() == s.to_ascii_lowercase())
    }

    /// Aging vector with this mechanism applied at relative size `perturbation`.
    /// LLI shrinks `x100_neg`; the dependent boundaries are re-derived.
    pub fn apply(self, params: &CellParameters, ocps: &OcpPair, perturbation: f64) -> Result<AgingParameters> {
        let fresh = params.aging();
        let keep = 1.0 - perturbation;
        let mut base = [fresh.eps_s_neg(), fresh.eps_s_pos(), fresh.x100_neg(), fresh.x0_pos()];
        match self {
            Mechanism::Fresh => return Ok(fresh),
            Mechanism::LamNe => base[0] *= keep,
            Mechanism::LamPe => base[1] *= keep,
            Mechanism::Lli => base[2] *= keep,
        }
        Ok(complete_aging(base, params, ocps)?)
    }
}

/// One simulated case of the sensitivity study.
#[derive(Debug, Clone)]
pub struct SensitivityCase {
    pub mechanism: Mechanism,
    pub record: SimRecord,
    pub dqdv: Vec<DqdvPoint>,
}

impl SensitivityCase {
    /// Mean rate of change of a surface concentration, mol/(m^3 s).
    pub fn mean_rate(values: &[f64], t: &[f64]) -> f64 {
        let n = values.len();
        (values[n - 1] - values[0]) / (t[n - 1] - t[0])
    }
}

/// Simulates the fresh cell and each mechanism at `perturbation`.
pub fn sensitivity_analysis(
    params: &CellParameters,
    ocps: &OcpPair,
    settings: &SolverSettings,
    perturbation: f64,
) -> Result<Vec<SensitivityCase>> {
    if !(perturbation > 0.0 && perturbation < 1.0) {
        return Err(Error::Input(format!("perturbation must lie in (0, 1), got {perturbation}")));
    }
    let fresh = simulate_discharge(&params.aging(), params, ocps, settings, Some(1.0))?.capacity_ah;
    Mechanism::ALL
        .into_iter()
        .map(|m| {
            let theta = m.apply(params, ocps, perturbation)?;
            let record = simulate_discharge(&theta, params, ocps, settings, Some(fresh))?;
            let dqdv = dqdv_curve(&record, DQDV_BIN)?;
            Ok(SensitivityCase { mechanism: m, record, dqdv })
        })
        .collect()
}
