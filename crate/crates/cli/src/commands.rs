//! Single-window and analysis commands that sit outside the staged pipeline.

use std::fs;
use std::path::{Path, PathBuf};

use cellhealth_core::params::AGING_NAMES;
use cellhealth_core::OcpPair;
use cellhealth_models::identification::{reconstruct_voltage, Identifier};
use cellhealth_models::report::{rmse, write_csv};
use cellhealth_models::soh::{self, dqdv_curve, write_dqdv_csv, Mechanism, SensitivityCase, SohHead, DQDV_BIN};
use cellhealth_models::surrogate::Surrogate;
use cellhealth_models::voltage::VoltageModel;
use cellhealth_models::window::MeasurementWindow;
use cellhealth_models::{Error, Result};

use crate::pipeline::{Layout, RunConfig};

pub const THETA_FILE: &str = "theta.csv";
pub const SOH_FILE: &str = "soh.csv";
pub const DQDV_FILE: &str = "dqdv.csv";
pub const SERIES_FILE: &str = "series.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

fn sample_id(input: &Path) -> String {
    input.file_stem().map_or_else(|| "input".into(), |s| s.to_string_lossy().into_owned())
}

fn output_dir(layout: &Layout, name: &str, explicit: Option<&Path>) -> PathBuf {
    explicit.map_or_else(|| layout.root.join(name), Path::to_path_buf)
}

/// Identified parameters of one window and its reconstruction RMSE, V.
#[derive(Debug, Clone, PartialEq)]
pub struct Identified {
    pub theta: [f64; 6],
    pub recon_rmse: f64,
}

/// Identifies the window in `input` and writes `theta.csv` into `out`
/// (default `<root>/identify`).
pub fn identify(cfg: &RunConfig, layout: &Layout, input: &Path, out: Option<&Path>) -> Result<Identified> {
    let identifier = Identifier::load(&layout.identifier())?;
    let surrogate = Surrogate::load(&layout.surrogate())?;
    let window = MeasurementWindow::read_csv(input, identifier.window_len())?;
    let theta = identifier.identify(&window)?;
    let model = VoltageModel::new(cfg.dataset.cell.clone(), OcpPair::default(), identifier.spec().clone());
    let (v, _) = reconstruct_voltage(&theta.0, &window, &surrogate, &model)?;
    let result = Identified {
        theta: theta.0,
        recon_rmse: rmse(&v, &window.voltage),
    };
    let dir = output_dir(layout, "identify", out);
    let mut header = vec!["sample_id"];
    header.extend(AGING_NAMES);
    header.push("recon_rmse_v");
    let mut row = vec![sample_id(input)];
    row.extend(result.theta.iter().map(f64::to_string));
    row.push(result.recon_rmse.to_string());
    write_csv(&dir.join(THETA_FILE), &header, [row])?;
    cfg.write(&dir)?;
    Ok(result)
}

/// SOH of the window in `input`, averaged over the trained trial heads, and
/// the per-trial estimates. Writes `soh.csv` into `out` (default `<root>/estimate`).
pub fn estimate(
    cfg: &RunConfig,
    layout: &Layout,
    input: &Path,
    soh_true: Option<f64>,
    out: Option<&Path>,
) -> Result<(f64, Vec<f64>)> {
    let identifier = Identifier::load(&layout.identifier())?;
    let heads = (0..cfg.trials)
        .map(|t| SohHead::load(&layout.soh_head(t)))
        .collect::<Result<Vec<_>>>()?;
    let window = MeasurementWindow::read_csv(input, identifier.window_len())?;
    let s = identifier.normalized(&[&window])?;
    let per_trial = heads
        .iter()
        .map(|h| Ok(h.predict(&s)?[0]))
        .collect::<Result<Vec<f64>>>()?;
    let soh = per_trial.iter().sum::<f64>() / per_trial.len() as f64;
    let dir = output_dir(layout, "estimate", out);
    let (truth, err) = match soh_true {
        Some(y) => (y.to_string(), (soh - y).abs().to_string()),
        None => (String::new(), String::new()),
    };
    write_csv(&dir.join(SOH_FILE), &soh::SOH_HEADER, [vec![sample_id(input), truth, soh.to_string(), err]])?;
    cfg.write(&dir)?;
    Ok((soh, per_trial))
}

/// dQ/dV of the fresh cell and, optionally, one perturbed mechanism.
pub fn dqdv(
    cfg: &RunConfig,
    layout: &Layout,
    perturb: Option<Mechanism>,
    fraction: f64,
    bin_width: f64,
    out: Option<&Path>,
) -> Result<Vec<(Mechanism, f64)>> {
    let ocps = OcpPair::default();
    let cell = &cfg.dataset.cell;
    let settings = &cfg.dataset.solver;
    let fresh = cellhealth_core::solver::simulate_discharge(&cell.aging(), cell, &ocps, settings, Some(1.0))?;
    let mut cases = vec![(Mechanism::Fresh, fresh.clone())];
    if let Some(m) = perturb.filter(|m| *m != Mechanism::Fresh) {
        let theta = m.apply(cell, &ocps, fraction)?;
        let rec = cellhealth_core::solver::simulate_discharge(&theta, cell, &ocps, settings, Some(fresh.capacity_ah))?;
        cases.push((m, rec));
    }
    let curves = cases
        .iter()
        .map(|(m, rec)| Ok((m.label(), dqdv_curve(rec, bin_width)?)))
        .collect::<Result<Vec<_>>>()?;
    let dir = output_dir(layout, "dqdv", out);
    let refs: Vec<(&str, &[soh::DqdvPoint])> = curves.iter().map(|(l, c)| (*l, c.as_slice())).collect();
    write_dqdv_csv(&dir.join(DQDV_FILE), &refs)?;
    cfg.write(&dir)?;
    Ok(cases.iter().map(|(m, r)| (*m, r.capacity_ah)).collect())
}

/// Fresh, LAM_NE, LAM_PE and LLI discharges with their dQ/dV curves, series
/// and a per-case summary.
pub fn sensitivity(cfg: &RunConfig, layout: &Layout, fraction: f64, out: Option<&Path>) -> Result<Vec<SensitivityCase>> {
    let cases = soh::sensitivity_analysis(&cfg.dataset.cell, &OcpPair::default(), &cfg.dataset.solver, fraction)?;
    let dir = output_dir(layout, "sensitivity", out);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let refs: Vec<(&str, &[soh::DqdvPoint])> = cases.iter().map(|c| (c.mechanism.label(), c.dqdv.as_slice())).collect();
    write_dqdv_csv(&dir.join(DQDV_FILE), &refs)?;

    let series_rows = cases.iter().flat_map(|c| {
        let s = &c.record.series;
        (0..s.len()).map(move |i| {
            vec![
                c.mechanism.label().to_string(),
                s.t[i].to_string(),
                s.voltage[i].to_string(),
                s.c_ss_neg[i].to_string(),
                s.c_ss_pos[i].to_string(),
                s.c_e_0[i].to_string(),
                s.c_e_l[i].to_string(),
            ]
        })
    });
    write_csv(
        &dir.join(SERIES_FILE),
        &["case_label", "t_s", "voltage_v", "c_ss_neg", "c_ss_pos", "c_e_0", "c_e_l"],
        series_rows,
    )?;

    let extent = |v: &[f64]| (v.iter().copied().fold(f64::INFINITY, f64::min), v.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let summary = cases.iter().map(|c| {
        let s = &c.record.series;
        let (ce0_lo, ce0_hi) = extent(&s.c_e_0);
        let (cel_lo, cel_hi) = extent(&s.c_e_l);
        vec![
            c.mechanism.label().to_string(),
            c.record.capacity_ah.to_string(),
            c.record.soh.to_string(),
            c.record.duration().to_string(),
            SensitivityCase::mean_rate(&s.c_ss_neg, &s.t).to_string(),
            SensitivityCase::mean_rate(&s.c_ss_pos, &s.t).to_string(),
            ce0_lo.to_string(),
            ce0_hi.to_string(),
            cel_lo.to_string(),
            cel_hi.to_string(),
        ]
    });
    write_csv(
        &dir.join(SUMMARY_FILE),
        &[
            "case_label",
            "capacity_ah",
            "soh",
            "duration_s",
            "mean_rate_c_ss_neg",
            "mean_rate_c_ss_pos",
            "c_e_0_min",
            "c_e_0_max",
            "c_e_l_min",
            "c_e_l_max",
        ],
        summary,
    )?;
    cfg.write(&dir)?;
    Ok(cases)
}

/// Default bin for the `dqdv` command, V.
pub const DEFAULT_BIN: f64 = DQDV_BIN;
