//! Hybrid surrogate of the four boundary concentrations.
//!
//! Each concentration has its own MLP mapping `[theta_n (6), I_n, tau]` to a
//! normalized value in (0, 1), where `tau = t / T` with `T` the nominal
//! discharge time of the normalization spec. Training mixes a data loss with
//! the residual of the reduced-order ODE for that concentration.

use std::fs;
use std::path::{Path, PathBuf};

use cellhealth_core::config::{ConfigValue, KvConfig};
use cellhealth_core::kinetics::{specific_interfacial_area, volumetric_current_density};
use cellhealth_core::reduced::{electrolyte_residual, solid_residual, ElectrolyteOdeCoefficients};
use cellhealth_core::{CellParameters, Electrode, NormalizationSpec, Variable};
use cellhealth_nn::{Activation, Adam, Checkpoint, Network, Tape, Tensor, Var};
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::report::{write_csv, EpochRow};
use crate::{Error, Result};

pub const TAGS: [&str; 4] = ["surrogate_css_neg", "surrogate_css_pos", "surrogate_ce0", "surrogate_ceL"];
pub const INPUT_WIDTH: usize = 8;
pub const CURRENT_COLUMN: usize = 6;
pub const TIME_COLUMN: usize = 7;
pub const REPORT_FILE: &str = "surrogate_report.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.txt";
const LAYER_SIZES: [usize; 5] = [INPUT_WIDTH, 64, 64, 64, 1];

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateConfig {
    pub lambda_d: f64,
    pub lambda_p: f64,
    pub epochs: usize,
    pub batch: usize,
    pub patience: usize,
    pub seed: u64,
    pub lr: f64,
    /// Hidden-layer activation; `Relu` makes the time derivative piecewise
    /// constant, which the residual term trains poorly against.
    pub hidden: Activation,
    /// Also put the collector electrolyte ODEs into the physics loss.
    pub electrolyte_physics: bool,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            lambda_d: 1.0,
            lambda_p: 0.05,
            epochs: 500,
            batch: 256,
            patience: 25,
            seed: 11,
            lr: 1e-3,
            hidden: Activation::Tanh,
            electrolyte_physics: false,
        }
    }
}

impl SurrogateConfig {
    pub fn from_config(cfg: &KvConfig) -> Result<Self> {
        let d = Self::default();
        let out = Self {
            lambda_d: cfg.f64_or("surrogate.lambda_d", d.lambda_d)?,
            lambda_p: cfg.f64_or("surrogate.lambda_p", d.lambda_p)?,
            epochs: cfg.usize_or("surrogate.epochs", d.epochs)?,
            batch: cfg.usize_or("surrogate.batch", d.batch)?,
            patience: cfg.usize_or("surrogate.patience", d.patience)?,
            seed: cfg.u64_or("surrogate.seed", d.seed)?,
            lr: cfg.f64_or("surrogate.lr", d.lr)?,
            hidden: match cfg.str_or("surrogate.hidden", d.hidden.name())?.as_str() {
                "tanh" => Activation::Tanh,
                "relu" => Activation::Relu,
                "sigmoid" => Activation::Sigmoid,
                other => return Err(Error::Input(format!("unknown surrogate.hidden `{other}`"))),
            },
            electrolyte_physics: cfg.bool_or("surrogate.electrolyte_physics", d.electrolyte_physics)?,
        };
        if out.batch == 0 || out.epochs == 0 {
            return Err(Error::Input("surrogate.batch and surrogate.epochs must be positive".into()));
        }
        if out.lambda_d < 0.0 || out.lambda_p < 0.0 {
            return Err(Error::Input("loss weights must be non-negative".into()));
        }
        Ok(out)
    }

    pub fn write_config(&self, cfg: &mut KvConfig) {
        cfg.set_f64("surrogate.lambda_d", self.lambda_d);
        cfg.set_f64("surrogate.lambda_p", self.lambda_p);
        cfg.set_int("surrogate.epochs", self.epochs as i64);
        cfg.set_int("surrogate.batch", self.batch as i64);
        cfg.set_int("surrogate.patience", self.patience as i64);
        cfg.set_int("surrogate.seed", self.seed as i64);
        cfg.set_f64("surrogate.lr", self.lr);
        cfg.set("surrogate.hidden", ConfigValue::Text(self.hidden.name().into()));
        cfg.set("surrogate.electrolyte_physics", ConfigValue::Bool(self.electrolyte_physics));
    }
}

/// Network input rows for one sample, row-major `[t.len(), 8]`.
pub fn feature_rows(spec: &NormalizationSpec, theta: &[f64; 6], current: &[f64], t: &[f64]) -> Vec<f64> {
    let theta_n = spec.normalize_aging(theta);
    let mut out = Vec::with_capacity(t.len() * INPUT_WIDTH);
    for (&i, &ti) in current.iter().zip(t) {
        out.extend_from_slice(&theta_n);
        out.push(spec.normalize(Variable::Current, i));
        out.push(spec.normalize(Variable::Time, ti));
    }
    out
}

/// Coefficients `(a, b)` of the normalized residual `dy/dtau + a y + b` of
/// the reduced-order ODE for concentration `var`, or `None` when it has none.
///
/// Residuals are expressed in normalized concentration per normalized time.
pub fn residual_coefficients(
    var: Variable,
    theta: &[f64; 6],
    current: f64,
    spec: &NormalizationSpec,
    params: &CellParameters,
) -> Result<Option<(f64, f64)>> {
    let t_ref = spec.range(Variable::Time).width();
    let range = spec.range(var);
    let solid = |e: Electrode, eps_s: f64| -> Result<(f64, f64)> {
        let p = params.electrode(e);
        let a_s = specific_interfacial_area(eps_s, p.particle_radius)?;
        // insertion current is the negated reaction current
        let j_ins = -volumetric_current_density(current, params.area, p.thickness, e);
        Ok((0.0, solid_residual(0.0, j_ins, p.particle_radius, a_s) * t_ref / range.width()))
    };
    let liquid = |e: Electrode| -> Result<(f64, f64)> {
        let coeffs = ElectrolyteOdeCoefficients::new(params, e, params.electrode(e).eps_e);
        // deviation from the rest concentration; y maps to c = min + width * y
        let a = coeffs.gamma / coeffs.beta * t_ref;
        let b = electrolyte_residual(0.0, range.min - params.c_e0, current, &coeffs)? * t_ref / range.width();
        Ok((a, b))
    };
    Ok(Some(match var {
        Variable::CssNeg => solid(Electrode::Negative, theta[0])?,
        Variable::CssPos => solid(Electrode::Positive, theta[1])?,
        Variable::Ce0Neg => liquid(Electrode::Negative)?,
        Variable::CeLPos => liquid(Electrode::Positive)?,
        _ => return Ok(None),
    }))
}

/// Per-row ODE residual `dy + a * y + b` on the tape.
pub fn ode_residual(tape: &mut Tape, y: Var, dy: Var, a: Var, b: Var) -> Result<Var> {
    let ay = tape.mul(a, y)?;
    let r = tape.add(dy, ay)?;
    Ok(tape.add(r, b)?)
}

/// Terms of the hybrid loss as recorded on the tape.
#[derive(Debug, Clone, Copy)]
pub struct HybridLoss {
    pub total: Var,
    pub data: Var,
    pub physics: Option<Var>,
}

/// `lambda_d * MSE(pred, target) + lambda_p * mean(residual^2)`.
pub fn hybrid_loss(
    tape: &mut Tape,
    pred: Var,
    target: Var,
    residual: Option<Var>,
    lambda_d: f64,
    lambda_p: f64,
) -> Result<HybridLoss> {
    let diff = tape.sub(pred, target)?;
    let sq = tape.square(diff);
    let data = tape.mean(sq);
    let mut total = tape.scale(data, lambda_d);
    let physics = residual.map(|r| {
        let sq = tape.square(r);
        tape.mean(sq)
    });
    if let Some(p) = physics {
        let weighted = tape.scale(p, lambda_p);
        total = tape.add(total, weighted)?;
    }
    Ok(HybridLoss { total, data, physics })
}

/// The four concentration networks with their shared normalization.
#[derive(Debug, Clone)]
pub struct Surrogate {
    nets: [Network; 4],
    spec: NormalizationSpec,
}

impl Surrogate {
    /// Untrained ensemble with seeded initialization.
    pub fn new(spec: NormalizationSpec, hidden: Activation, seed: u64) -> Result<Self> {
        let mut nets = Vec::with_capacity(4);
        for i in 0..4 {
            nets.push(Network::mlp(&LAYER_SIZES, hidden, Activation::Sigmoid, seed + i as u64)?);
        }
        Ok(Self {
            nets: nets.try_into().expect("four networks"),
            spec,
        })
    }

    pub fn from_networks(nets: [Network; 4], spec: NormalizationSpec) -> Self {
        Self { nets, spec }
    }

    pub fn networks(&self) -> &[Network; 4] {
        &self.nets
    }

    pub fn spec(&self) -> &NormalizationSpec {
        &self.spec
    }

    /// Registers all weights as constants.
    pub fn register_frozen(&self, tape: &mut Tape) -> [Vec<Var>; 4] {
        std::array::from_fn(|i| self.nets[i].register(tape, false))
    }

    /// Normalized outputs `[B, 1]` of each network for the input rows `x`.
    pub fn forward_tape(&self, tape: &mut Tape, params: &[Vec<Var>; 4], x: Var) -> Result<[Var; 4]> {
        let mut out = [x; 4];
        for (i, net) in self.nets.iter().enumerate() {
            out[i] = net.forward_tape(tape, &params[i], x)?;
        }
        Ok(out)
    }

    /// Physical concentrations, mol/m^3, in the order css_neg, css_pos, ce0, ceL.
    pub fn predict(&self, theta: &[f64; 6], current: &[f64], t: &[f64]) -> Result<[Vec<f64>; 4]> {
        if current.len() != t.len() {
            return Err(Error::Input("current and time series differ in length".into()));
        }
        let x = Tensor::matrix(t.len(), INPUT_WIDTH, feature_rows(&self.spec, theta, current, t))?;
        let mut out: [Vec<f64>; 4] = Default::default();
        for (i, net) in self.nets.iter().enumerate() {
            let y = net.forward(&x)?;
            let var = Variable::CONCENTRATIONS[i];
            out[i] = y.data().iter().map(|&v| self.spec.denormalize(var, v)).collect();
        }
        Ok(out)
    }

    pub fn checkpoint_path(dir: &Path, index: usize) -> PathBuf {
        dir.join(Variable::CONCENTRATIONS[index].key()).join(CHECKPOINT_FILE)
    }

    pub fn checkpoint_paths(dir: &Path) -> [PathBuf; 4] {
        std::array::from_fn(|i| Self::checkpoint_path(dir, i))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        for (i, net) in self.nets.iter().enumerate() {
            let path = Self::checkpoint_path(dir, i);
            let parent = path.parent().expect("checkpoint has a parent");
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            Checkpoint::new(TAGS[i], net.clone(), self.spec.to_lines()).save(&path)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let mut nets = Vec::with_capacity(4);
        let mut spec = None;
        for (i, path) in Self::checkpoint_paths(dir).iter().enumerate() {
            if !path.exists() {
                return Err(Error::Ordering {
                    path: path.clone(),
                    hint: "train the surrogate first (train surrogate)".into(),
                });
            }
            let ckpt = Checkpoint::load(path)?;
            if ckpt.tag != TAGS[i] {
                return Err(Error::Input(format!("{} has tag `{}`, expected `{}`", path.display(), ckpt.tag, TAGS[i])));
            }
            let s = NormalizationSpec::from_lines(ckpt.metadata.iter().map(String::as_str))?;
            if spec.as_ref().is_some_and(|prev| *prev != s) {
                return Err(Error::Input(format!("{} disagrees on normalization", path.display())));
            }
            spec = Some(s);
            nets.push(ckpt.network);
        }
        Ok(Self {
            nets: nets.try_into().expect("four networks"),
            spec: spec.expect("four checkpoints"),
        })
    }
}

/// Flattened training rows for one concentration network.
#[derive(Debug, Clone, Default)]
pub struct TrainingRows {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Residual coefficients per row; empty when the variable has no ODE.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl TrainingRows {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn build(dataset: &Dataset, indices: &[usize], var: Variable) -> Result<Self> {
        let spec = &dataset.spec;
        let mut rows = TrainingRows::default();
        for &i in indices {
            let s = &dataset.samples[i];
            let target = match var {
                Variable::CssNeg => &s.series.c_ss_neg,
                Variable::CssPos => &s.series.c_ss_pos,
                Variable::Ce0Neg => &s.series.c_e_0,
                Variable::CeLPos => &s.series.c_e_l,
                _ => return Err(Error::Input(format!("`{}` is not a surrogate output", var.key()))),
            };
            rows.x.extend(feature_rows(spec, &s.theta, &s.series.current, &s.series.t));
            rows.y.extend(target.iter().map(|&c| spec.normalize(var, c)));
            for &current in &s.series.current {
                if let Some((a, b)) = residual_coefficients(var, &s.theta, current, spec, &dataset.config.cell)? {
                    rows.a.push(a);
                    rows.b.push(b);
                }
            }
        }
        Ok(rows)
    }

    fn gather(&self, idx: &[usize]) -> (Tensor, Tensor, Option<(Tensor, Tensor)>) {
        let mut x = Vec::with_capacity(idx.len() * INPUT_WIDTH);
        for &r in idx {
            x.extend_from_slice(&self.x[r * INPUT_WIDTH..(r + 1) * INPUT_WIDTH]);
        }
        let col = |v: &[f64]| Tensor::column(idx.iter().map(|&r| v[r]).collect());
        let ab = (!self.a.is_empty()).then(|| (col(&self.a), col(&self.b)));
        (
            Tensor::matrix(idx.len(), INPUT_WIDTH, x).expect("row width"),
            col(&self.y),
            ab,
        )
    }
}

fn time_tangent(rows: usize) -> Tensor {
    let mut dx = Tensor::zeros(&[rows, INPUT_WIDTH]);
    for row in dx.data_mut().chunks_mut(INPUT_WIDTH) {
        row[TIME_COLUMN] = 1.0;
    }
    dx
}

/// Data MSE and mean squared residual of `net` over `rows`, evaluated in chunks.
pub fn evaluate(net: &Network, rows: &TrainingRows) -> Result<(f64, f64)> {
    const CHUNK: usize = 4096;
    let (mut data, mut phys) = (0.0, 0.0);
    let all: Vec<usize> = (0..rows.len()).collect();
    for idx in all.chunks(CHUNK) {
        let (x, y, ab) = rows.gather(idx);
        let (pred, dpred) = net.forward_tangent(&x, &time_tangent(idx.len()))?;
        data += pred.data().iter().zip(y.data()).map(|(p, t)| (p - t).powi(2)).sum::<f64>();
        if let Some((a, b)) = ab {
            for i in 0..idx.len() {
                let r = dpred.data()[i] + a.data()[i] * pred.data()[i] + b.data()[i];
                phys += r * r;
            }
        }
    }
    let n = rows.len().max(1) as f64;
    Ok((data / n, phys / n))
}

/// Trains one concentration network with Adam and early stopping on the
/// validation data loss. Returns the best network and one row per epoch.
pub fn train_network(
    mut net: Network,
    train: &TrainingRows,
    val: &TrainingRows,
    lambda_p: f64,
    cfg: &SurrogateConfig,
    seed: u64,
) -> Result<(Network, Vec<EpochRow>)> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::Input("surrogate training needs non-empty train and validation rows".into()));
    }
    let physics = lambda_p > 0.0 && !train.a.is_empty();
    let mut adam = Adam::new(&net.params(), cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best = (f64::INFINITY, net.clone());
    let mut since_best = 0;
    let mut history = Vec::new();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut data_sum, mut phys_sum) = (0.0, 0.0);
        for idx in order.chunks(cfg.batch) {
            let (x, y, ab) = train.gather(idx);
            let mut tape = Tape::new();
            let params = net.register(&mut tape, true);
            let xv = tape.constant(x);
            let yv = tape.constant(y);
            let (pred, residual) = if physics {
                let dx = tape.constant(time_tangent(idx.len()));
                let (pred, dpred) = net.forward_tangent_tape(&mut tape, &params, xv, dx)?;
                let (a, b) = ab.expect("physics rows carry coefficients");
                let (a, b) = (tape.constant(a), tape.constant(b));
                (pred, Some(ode_residual(&mut tape, pred, dpred, a, b)?))
            } else {
                (net.forward_tape(&mut tape, &params, xv)?, None)
            };
            let loss = hybrid_loss(&mut tape, pred, yv, residual, cfg.lambda_d, lambda_p)?;
            let total = tape.value(loss.total).data()[0];
            if !total.is_finite() {
                return Err(Error::Numerical(format!("surrogate loss is {total} at epoch {epoch}")));
            }
            let w = idx.len() as f64;
            data_sum += w * tape.value(loss.data).data()[0];
            if let Some(p) = loss.physics {
                phys_sum += w * tape.value(p).data()[0];
            }
            let mut grads = tape.backward(loss.total)?;
            let g: Vec<Tensor> = params
                .iter()
                .zip(net.params())
                .map(|(&v, p)| grads.take(v).unwrap_or_else(|| Tensor::zeros(p.shape())))
                .collect();
            adam.step(&mut net.params_mut(), &g)?;
        }
        let n = train.len() as f64;
        let (val_loss, val_phys) = evaluate(&net, val)?;
        if !val_loss.is_finite() {
            return Err(Error::Numerical(format!("surrogate validation loss is {val_loss} at epoch {epoch}")));
        }
        history.push(EpochRow {
            epoch,
            data_loss: data_sum / n,
            // residual of the ODE on validation rows when it is not trained on
            phys_loss: if physics { phys_sum / n } else { val_phys },
            val_loss,
        });
        if val_loss < best.0 {
            best = (val_loss, net.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    Ok((best.1, history))
}

/// Whether the physics term of `var` is trained on under `cfg`.
pub fn physics_weight(var: Variable, cfg: &SurrogateConfig) -> f64 {
    match var {
        Variable::CssNeg | Variable::CssPos => cfg.lambda_p,
        Variable::Ce0Neg | Variable::CeLPos if cfg.electrolyte_physics => cfg.lambda_p,
        _ => 0.0,
    }
}

/// Trains the four networks independently on the `train` samples, stopping
/// early on `val`. When `out_dir` is given, checkpoints and loss curves are
/// written there.
pub fn train_surrogate(
    dataset: &Dataset,
    train: &[usize],
    val: &[usize],
    cfg: &SurrogateConfig,
    out_dir: Option<&Path>,
) -> Result<(Surrogate, [Vec<EpochRow>; 4])> {
    let init = Surrogate::new(dataset.spec.clone(), cfg.hidden, cfg.seed)?;
    let mut nets = Vec::with_capacity(4);
    let mut reports: [Vec<EpochRow>; 4] = Default::default();
    for (i, var) in Variable::CONCENTRATIONS.into_iter().enumerate() {
        let tr = TrainingRows::build(dataset, train, var)?;
        let va = TrainingRows::build(dataset, val, var)?;
        let seed = cfg.seed.wrapping_add(1000 * (i as u64 + 1));
        let (net, history) = train_network(init.nets[i].clone(), &tr, &va, physics_weight(var, cfg), cfg, seed)?;
        if let Some(dir) = out_dir {
            let path = dir.join(var.key()).join(REPORT_FILE);
            write_csv(&path, &EpochRow::HEADER, history.iter().map(EpochRow::fields))?;
        }
        nets.push(net);
        reports[i] = history;
    }
    let surrogate = Surrogate::from_networks(nets.try_into().expect("four networks"), dataset.spec.clone());
    if let Some(dir) = out_dir {
        surrogate.save(dir)?;
    }
    Ok((surrogate, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use cellhealth_core::AgingRanges;

    fn spec() -> NormalizationSpec {
        NormalizationSpec::for_cell(&CellParameters::default(), &AgingRanges::default(), 4.0).unwrap()
    }

    #[test]
    fn feature_layout() {
        let s = spec();
        let theta = AgingRanges::default().midpoint().0;
        let rows = feature_rows(&s, &theta, &[4.4, 4.4], &[0.0, 450.0]);
        assert_eq!(rows.len(), 16);
        assert_relative_eq!(rows[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(rows[CURRENT_COLUMN], 4.4 / 6.6, epsilon = 1e-12);
        assert_relative_eq!(rows[INPUT_WIDTH + TIME_COLUMN], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn solid_forcing_matches_the_surface_flux() {
        let p = CellParameters::default();
        let s = spec();
        let theta = p.aging().0;
        let (a, b) = residual_coefficients(Variable::CssNeg, &theta, 4.4, &s, &p).unwrap().unwrap();
        assert_eq!(a, 0.0);
        // dc/dt = -3 I / (A L F R a_s) for the negative electrode
        let a_s = 3.0 * 0.54 / 1e-6;
        let rate = 3.0 * 4.4 / (0.087 * 3.5e-5 * 96485.0 * 1e-6 * a_s);
        assert_relative_eq!(b, rate * 900.0 / p.neg.c_s_max, max_relative = 1e-12);
        let (_, b_pos) = residual_coefficients(Variable::CssPos, &theta, 4.4, &s, &p).unwrap().unwrap();
        assert!(b_pos < 0.0, "positive particle fills on discharge");
        assert!(residual_coefficients(Variable::Voltage, &theta, 4.4, &s, &p).unwrap().is_none());
    }

    #[test]
    fn electrolyte_rest_state_has_zero_residual() {
        let p = CellParameters::default();
        let s = spec();
        let y = p.c_e0 / s.range(Variable::Ce0Neg).width();
        for var in [Variable::Ce0Neg, Variable::CeLPos] {
            let (a, b) = residual_coefficients(var, &p.aging().0, 0.0, &s, &p).unwrap().unwrap();
            assert!((a * y + b).abs() < 1e-9);
        }
    }

    fn loss_value(pred: &[f64], target: &[f64], residual: Option<&[f64]>, ld: f64, lp: f64) -> (f64, f64, f64) {
        let mut tape = Tape::new();
        let p = tape.leaf(Tensor::column(pred.to_vec()));
        let t = tape.constant(Tensor::column(target.to_vec()));
        let r = residual.map(|r| tape.leaf(Tensor::column(r.to_vec())));
        let l = hybrid_loss(&mut tape, p, t, r, ld, lp).unwrap();
        let phys = l.physics.map_or(0.0, |v| tape.value(v).data()[0]);
        (tape.value(l.total).data()[0], tape.value(l.data).data()[0], phys)
    }

    #[test]
    fn hybrid_loss_decomposes() {
        let (total, _, _) = loss_value(&[0.3, 0.4], &[0.3, 0.4], Some(&[0.0, 0.0]), 1.0, 0.05);
        assert_eq!(total, 0.0);
        let (total, data, _) = loss_value(&[0.3, 0.5], &[0.1, 0.4], Some(&[2.0, 1.0]), 1.0, 0.0);
        assert_eq!(total, data);
        let (total, _, phys) = loss_value(&[0.3, 0.5], &[0.3, 0.5], Some(&[2.0, 1.0]), 1.0, 0.05);
        assert_relative_eq!(phys, 2.5, epsilon = 1e-15);
        assert_relative_eq!(total, 0.05 * 2.5, epsilon = 1e-15);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = Surrogate::new(spec(), Activation::Tanh, 5).unwrap();
        s.save(dir.path()).unwrap();
        let back = Surrogate::load(dir.path()).unwrap();
        let theta = AgingRanges::default().midpoint().0;
        let a = s.predict(&theta, &[4.4; 3], &[0.0, 100.0, 800.0]).unwrap();
        let b = back.predict(&theta, &[4.4; 3], &[0.0, 100.0, 800.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_round_trip() {
        let c = SurrogateConfig {
            hidden: Activation::Relu,
            electrolyte_physics: true,
            epochs: 7,
            ..SurrogateConfig::default()
        };
        let mut kv = KvConfig::new();
        c.write_config(&mut kv);
        let back = SurrogateConfig::from_config(&KvConfig::parse(&kv.to_text()).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn load_without_checkpoints_is_an_ordering_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(Surrogate::load(dir.path()), Err(Error::Ordering { .. })));
    }
}
