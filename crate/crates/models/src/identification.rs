//! Self-supervised aging-parameter identification.
//!
//! A 1-D CNN maps a discharge window to six sigmoid outputs `s`, read as
//! `theta = lo + (hi - lo) s` over the sampling box. Training never sees
//! `theta`: the frozen surrogate turns `s` into concentrations, the voltage
//! law turns those into a voltage, and the loss is the normalized voltage MSE.

use std::fs;
use std::path::{Path, PathBuf};

use cellhealth_core::config::KvConfig;
use cellhealth_core::{AgingParameters, NormalizationSpec, Variable};
use cellhealth_nn::{file_sha256, Activation, Adam, Checkpoint, LayerSpec, Network, Tape, Tensor, Var};
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::report::write_csv;
use crate::surrogate::{Surrogate, INPUT_WIDTH};
use crate::voltage::VoltageModel;
use crate::window::MeasurementWindow;
use crate::{Error, Result};

pub const TAG: &str = "identifier";
pub const CHECKPOINT_FILE: &str = "identifier.txt";
pub const REPORT_FILE: &str = "ident_report.csv";
pub const REPORT_HEADER: [&str; 4] = ["epoch", "train_loss", "val_loss", "clamped_fraction"];
/// Input channels: normalized voltage, current and time.
pub const CHANNELS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifierConfig {
    pub epochs: usize,
    pub batch: usize,
    pub patience: usize,
    pub seed: u64,
    pub lr: f64,
}

impl Default for IdentifierConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            batch: 64,
            patience: 25,
            seed: 23,
            lr: 1e-3,
        }
    }
}

impl IdentifierConfig {
    pub fn from_config(cfg: &KvConfig) -> Result<Self> {
        let d = Self::default();
        let out = Self {
            epochs: cfg.usize_or("ident.epochs", d.epochs)?,
            batch: cfg.usize_or("ident.batch", d.batch)?,
            patience: cfg.usize_or("ident.patience", d.patience)?,
            seed: cfg.u64_or("ident.seed", d.seed)?,
            lr: cfg.f64_or("ident.lr", d.lr)?,
        };
        if out.batch == 0 || out.epochs == 0 {
            return Err(Error::Input("ident.batch and ident.epochs must be positive".into()));
        }
        Ok(out)
    }

    pub fn write_config(&self, cfg: &mut KvConfig) {
        cfg.set_int("ident.epochs", self.epochs as i64);
        cfg.set_int("ident.batch", self.batch as i64);
        cfg.set_int("ident.patience", self.patience as i64);
        cfg.set_int("ident.seed", self.seed as i64);
        cfg.set_f64("ident.lr", self.lr);
    }
}

/// Conv(16) - pool - conv(32) - pool - FC(64) - FC(6) over `[k, 3]` windows.
pub fn identifier_network(k: usize, seed: u64) -> Result<Network> {
    let flat = ((k - 2) / 2 - 2) / 2 * 32;
    let specs = [
        LayerSpec::Conv1d { channels: CHANNELS, filters: 16, kernel: 3, activation: Activation::Relu },
        LayerSpec::MaxPool,
        LayerSpec::Conv1d { channels: 16, filters: 32, kernel: 3, activation: Activation::Relu },
        LayerSpec::MaxPool,
        LayerSpec::Flatten,
        LayerSpec::Dense { inputs: flat, outputs: 64, activation: Activation::Relu },
        LayerSpec::Dense { inputs: 64, outputs: 6, activation: Activation::Sigmoid },
    ];
    Ok(Network::new(&[k, CHANNELS], &specs, seed)?)
}

#[derive(Debug, Clone)]
pub struct Identifier {
    net: Network,
    spec: NormalizationSpec,
}

impl Identifier {
    pub fn new(k: usize, spec: NormalizationSpec, seed: u64) -> Result<Self> {
        if k < 10 {
            return Err(Error::Input(format!("window length {k} is too short for the identifier")));
        }
        Ok(Self {
            net: identifier_network(k, seed)?,
            spec,
        })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn spec(&self) -> &NormalizationSpec {
        &self.spec
    }

    /// Expected window length.
    pub fn window_len(&self) -> usize {
        self.net.input_shape()[0]
    }

    fn input(&self, windows: &[&MeasurementWindow]) -> Result<Tensor> {
        let k = self.window_len();
        let mut x = Vec::with_capacity(windows.len() * k * CHANNELS);
        for w in windows {
            if w.len() != k {
                return Err(Error::Input(format!("window has {} points, identifier expects {k}", w.len())));
            }
            x.extend(w.features(&self.spec));
        }
        Ok(Tensor::new(vec![windows.len(), k, CHANNELS], x)?)
    }

    /// Sigmoid outputs, i.e. normalized parameters, one row per window.
    pub fn normalized(&self, windows: &[&MeasurementWindow]) -> Result<Vec<[f64; 6]>> {
        let y = self.net.forward(&self.input(windows)?)?;
        Ok(y.data().chunks(6).map(|r| r.try_into().expect("six outputs")).collect())
    }

    /// Single forward pass, denormalized onto the sampling box.
    pub fn identify(&self, window: &MeasurementWindow) -> Result<AgingParameters> {
        let s = self.normalized(&[window])?[0];
        Ok(AgingParameters::new(self.spec.denormalize_aging(&s)))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        Ok(Checkpoint::new(TAG, self.net.clone(), self.spec.to_lines()).save(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::Ordering {
                path: path.to_path_buf(),
                hint: "train the identifier first (train ident)".into(),
            });
        }
        let ckpt = Checkpoint::load(path)?;
        if ckpt.tag != TAG {
            return Err(Error::Input(format!("{} has tag `{}`, expected `{TAG}`", path.display(), ckpt.tag)));
        }
        Ok(Self {
            spec: NormalizationSpec::from_lines(ckpt.metadata.iter().map(String::as_str))?,
            net: ckpt.network,
        })
    }
}

/// Everything the reconstruction graph needs from a batch of windows,
/// except the parameters themselves.
#[derive(Debug, Clone)]
pub struct ReconstructionBatch {
    pub windows: usize,
    pub k: usize,
    /// Normalized `[I, t]` surrogate input columns, `[windows * k, 2]`.
    pub drive: Tensor,
    /// Applied current per row, A.
    pub current: Vec<f64>,
    /// Measured voltage per row, normalized, `[windows * k, 1]`.
    pub target: Tensor,
}

impl ReconstructionBatch {
    pub fn new(windows: &[&MeasurementWindow], spec: &NormalizationSpec) -> Result<Self> {
        let k = windows.first().map_or(0, |w| w.len());
        let mut drive = Vec::new();
        let mut current = Vec::new();
        let mut target = Vec::new();
        for w in windows {
            if w.len() != k {
                return Err(Error::Input("windows in a batch must share a length".into()));
            }
            for (i, t) in w.times().into_iter().enumerate() {
                drive.push(spec.normalize(Variable::Current, w.current[i]));
                drive.push(spec.normalize(Variable::Time, t));
                current.push(w.current[i]);
                target.push(spec.normalize(Variable::Voltage, w.voltage[i]));
            }
        }
        let rows = windows.len() * k;
        Ok(Self {
            windows: windows.len(),
            k,
            drive: Tensor::matrix(rows, 2, drive)?,
            current,
            target: Tensor::column(target),
        })
    }
}

/// Normalized reconstructed voltage `[windows * k, 1]` for normalized
/// parameters `s` of shape `[windows, 6]`, and the number of clamped states.
pub fn reconstruct_tape(
    tape: &mut Tape,
    surrogate: &Surrogate,
    frozen: &[Vec<Var>; 4],
    model: &VoltageModel,
    s: Var,
    batch: &ReconstructionBatch,
) -> Result<(Var, usize)> {
    let spec = surrogate.spec();
    let per_row = tape.repeat_rows(s, batch.k);
    let drive = tape.constant(batch.drive.clone());
    let x = tape.concat_cols(&[per_row, drive])?;
    debug_assert_eq!(tape.value(x).cols(), INPUT_WIDTH);
    let conc = surrogate.forward_tape(tape, frozen, x)?;
    let eps = |tape: &mut Tape, i: usize| -> Result<Var> {
        let r = spec.range(Variable::Aging(i));
        let col = tape.slice_cols(per_row, i, 1)?;
        let scaled = tape.scale(col, r.width());
        Ok(tape.offset(scaled, r.min))
    };
    let (eps_neg, eps_pos) = (eps(tape, 0)?, eps(tape, 1)?);
    let v = model.voltage_tape(tape, conc, eps_neg, eps_pos, &batch.current)?;
    let r = spec.range(Variable::Voltage);
    let scaled = tape.scale(v.volts, 1.0 / r.width());
    Ok((tape.offset(scaled, -r.min / r.width()), v.clamped))
}

/// Mean squared error between reconstructed and measured normalized voltage.
pub fn reconstruction_loss(tape: &mut Tape, v_hat: Var, batch: &ReconstructionBatch) -> Result<Var> {
    let target = tape.constant(batch.target.clone());
    let d = tape.sub(v_hat, target)?;
    let sq = tape.square(d);
    Ok(tape.mean(sq))
}

/// Reconstructed terminal voltage, V, of `theta` along a window's drive.
pub fn reconstruct_voltage(
    theta: &[f64; 6],
    window: &MeasurementWindow,
    surrogate: &Surrogate,
    model: &VoltageModel,
) -> Result<(Vec<f64>, usize)> {
    let spec = surrogate.spec();
    let batch = ReconstructionBatch::new(&[window], spec)?;
    let mut tape = Tape::new();
    let frozen = surrogate.register_frozen(&mut tape);
    let s = tape.constant(Tensor::matrix(1, 6, spec.normalize_aging(theta).to_vec())?);
    let (v, clamped) = reconstruct_tape(&mut tape, surrogate, &frozen, model, s, &batch)?;
    let r = spec.range(Variable::Voltage);
    Ok((tape.value(v).data().iter().map(|&y| r.denormalize(y)).collect(), clamped))
}

/// Reconstruction MSE (normalized) over `windows` with the identifier's own
/// estimates, and the fraction of clamped states.
pub fn evaluate_reconstruction(
    ident: &Identifier,
    windows: &[&MeasurementWindow],
    surrogate: &Surrogate,
    model: &VoltageModel,
) -> Result<(f64, f64)> {
    const CHUNK: usize = 64;
    let (mut sse, mut clamped, mut rows) = (0.0, 0usize, 0usize);
    for chunk in windows.chunks(CHUNK) {
        let batch = ReconstructionBatch::new(chunk, surrogate.spec())?;
        let mut tape = Tape::new();
        let params = ident.net.register(&mut tape, false);
        let frozen = surrogate.register_frozen(&mut tape);
        let x = tape.constant(ident.input(chunk)?);
        let s = ident.net.forward_tape(&mut tape, &params, x)?;
        let (v, c) = reconstruct_tape(&mut tape, surrogate, &frozen, model, s, &batch)?;
        let loss = reconstruction_loss(&mut tape, v, &batch)?;
        let n = batch.current.len();
        sse += tape.value(loss).data()[0] * n as f64;
        clamped += c;
        rows += n;
    }
    Ok((sse / rows.max(1) as f64, clamped as f64 / rows.max(1) as f64))
}

/// One epoch of the identifier loss curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentEpoch {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub clamped_fraction: f64,
}

fn hashes(paths: &[PathBuf]) -> Result<Vec<String>> {
    paths.iter().map(|p| Ok(file_sha256(p)?)).collect()
}

/// Checks that the files behind `paths` still hash to `before`.
pub fn verify_frozen(paths: &[PathBuf], before: &[String]) -> Result<()> {
    for (p, b) in paths.iter().zip(before) {
        let after = file_sha256(p)?;
        if after != *b {
            return Err(Error::FrozenMutation {
                path: p.clone(),
                before: b.clone(),
                after,
            });
        }
    }
    Ok(())
}

/// Trains the identifier on measured windows only. `frozen_files` are the
/// surrogate checkpoints, hashed before and after training.
#[allow(clippy::too_many_arguments)]
pub fn train_identifier(
    train: &[&MeasurementWindow],
    val: &[&MeasurementWindow],
    surrogate: &Surrogate,
    frozen_files: &[PathBuf],
    model: &VoltageModel,
    cfg: &IdentifierConfig,
    out_dir: Option<&Path>,
) -> Result<(Identifier, Vec<IdentEpoch>)> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::Input("identifier training needs train and validation windows".into()));
    }
    let before = hashes(frozen_files)?;
    let mut ident = Identifier::new(train[0].len(), surrogate.spec().clone(), cfg.seed)?;
    let mut adam = Adam::new(&ident.net.params(), cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best = (f64::INFINITY, ident.clone());
    let mut since_best = 0;
    let mut history = Vec::new();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut sum, mut rows, mut clamped) = (0.0, 0usize, 0usize);
        for idx in order.chunks(cfg.batch) {
            let windows: Vec<&MeasurementWindow> = idx.iter().map(|&i| train[i]).collect();
            let batch = ReconstructionBatch::new(&windows, surrogate.spec())?;
            let mut tape = Tape::new();
            let params = ident.net.register(&mut tape, true);
            let frozen = surrogate.register_frozen(&mut tape);
            let x = tape.constant(ident.input(&windows)?);
            let s = ident.net.forward_tape(&mut tape, &params, x)?;
            let (v, c) = reconstruct_tape(&mut tape, surrogate, &frozen, model, s, &batch)?;
            let loss = reconstruction_loss(&mut tape, v, &batch)?;
            let value = tape.value(loss).data()[0];
            if !value.is_finite() {
                return Err(Error::Numerical(format!("identifier loss is {value} at epoch {epoch}")));
            }
            let n = batch.current.len();
            sum += value * n as f64;
            rows += n;
            clamped += c;
            let mut grads = tape.backward(loss)?;
            let g: Vec<Tensor> = params
                .iter()
                .zip(ident.net.params())
                .map(|(&v, p)| grads.take(v).unwrap_or_else(|| Tensor::zeros(p.shape())))
                .collect();
            adam.step(&mut ident.net.params_mut(), &g)?;
        }
        let (val_loss, _) = evaluate_reconstruction(&ident, val, surrogate, model)?;
        if !val_loss.is_finite() {
            return Err(Error::Numerical(format!("identifier validation loss is {val_loss} at epoch {epoch}")));
        }
        history.push(IdentEpoch {
            epoch,
            train_loss: sum / rows as f64,
            val_loss,
            clamped_fraction: clamped as f64 / rows as f64,
        });
        if val_loss < best.0 {
            best = (val_loss, ident.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    verify_frozen(frozen_files, &before)?;
    let ident = best.1;
    if let Some(dir) = out_dir {
        ident.save(&dir.join(CHECKPOINT_FILE))?;
        let rows = history.iter().map(|h| {
            vec![
                h.epoch.to_string(),
                h.train_loss.to_string(),
                h.val_loss.to_string(),
                h.clamped_fraction.to_string(),
            ]
        });
        write_csv(&dir.join(REPORT_FILE), &REPORT_HEADER, rows)?;
    }
    Ok((ident, history))
}
