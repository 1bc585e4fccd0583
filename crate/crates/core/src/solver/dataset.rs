//! Latin-hypercube simulation dataset: generation and file I/O.

use std::fs;
use std::path::{Path, PathBuf};

use super::boundary::complete_aging;
use super::discharge::{simulate_discharge, Series, SimRecord, SolverSettings};
use super::lhs::latin_hypercube_sample;
use crate::config::KvConfig;
use crate::ocp::OcpPair;
use crate::params::{AgingParameters, AgingRanges, CellParameters, AGING_NAMES};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const SERIES_DIR: &str = "series";
pub const CONFIG_FILE: &str = "run.cfg";
pub const SUMMARY_FILE: &str = "summary.cfg";

pub const SERIES_COLUMNS: [&str; 8] = [
    "t_s", "t_norm", "current_a", "voltage_v", "css_neg", "css_pos", "ce0_neg", "ceL_pos",
];

/// Discharges shorter than this are treated as abnormal, s.
pub const MIN_DURATION_S: f64 = 60.0;
/// Filtering more than this fraction of samples raises a warning.
pub const FILTER_WARNING_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub n: usize,
    pub seed: u64,
    /// Points per resampled series.
    pub k: usize,
    pub solver: SolverSettings,
    pub cell: CellParameters,
    pub ranges: AgingRanges,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n: 500,
            seed: 7,
            k: 128,
            solver: SolverSettings::default(),
            cell: CellParameters::default(),
            ranges: AgingRanges::default(),
        }
    }
}

impl DatasetConfig {
    pub fn from_config(cfg: &KvConfig) -> Result<Self> {
        let d = Self::default();
        let s = d.solver;
        let out = Self {
            n: cfg.usize_or("dataset.n", d.n)?,
            seed: cfg.u64_or("dataset.seed", d.seed)?,
            k: cfg.usize_or("dataset.k", d.k)?,
            solver: SolverSettings {
                n_r: cfg.usize_or("solver.n_r", s.n_r)?,
                n_x: cfg.usize_or("solver.n_x", s.n_x)?,
                dt: cfg.f64_or("solver.dt", s.dt)?,
                c_rate: cfg.f64_or("solver.c_rate", s.c_rate)?,
                max_time_factor: cfg.f64_or("solver.max_time_factor", s.max_time_factor)?,
            },
            cell: CellParameters::from_config(cfg)?,
            ranges: d.ranges,
        };
        if out.n == 0 {
            return Err(Error::Config("dataset.n must be at least 1".into()));
        }
        if out.k < 2 {
            return Err(Error::Config("dataset.k must be at least 2".into()));
        }
        Ok(out)
    }

    pub fn write_config(&self, cfg: &mut KvConfig) {
        cfg.set_int("dataset.n", self.n as i64);
        cfg.set_int("dataset.seed", self.seed as i64);
        cfg.set_int("dataset.k", self.k as i64);
        cfg.set_int("solver.n_r", self.solver.n_r as i64);
        cfg.set_int("solver.n_x", self.solver.n_x as i64);
        cfg.set_f64("solver.dt", self.solver.dt);
        cfg.set_f64("solver.c_rate", self.solver.c_rate);
        cfg.set_f64("solver.max_time_factor", self.solver.max_time_factor);
        self.cell.write_config(cfg);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub sample_id: String,
    /// Full aging vector; the derived entries are NaN when the closure failed.
    pub theta: [f64; 6],
    pub capacity_ah: f64,
    pub soh: f64,
    pub duration_s: f64,
    pub filtered: bool,
}

impl ManifestRow {
    pub fn aging(&self) -> AgingParameters {
        AgingParameters::new(self.theta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub dir: PathBuf,
    pub rows: Vec<ManifestRow>,
    pub fresh_capacity_ah: f64,
    pub filtered_fraction: f64,
    pub warning: Option<String>,
}

impl DatasetManifest {
    pub fn kept(&self) -> impl Iterator<Item = &ManifestRow> {
        self.rows.iter().filter(|r| !r.filtered)
    }

    pub fn series_path(&self, sample_id: &str) -> PathBuf {
        series_path(&self.dir, sample_id)
    }
}

pub fn series_path(dir: &Path, sample_id: &str) -> PathBuf {
    dir.join(SERIES_DIR).join(format!("{sample_id}.csv"))
}

/// Simulates one sampled point; `Err` means the sample is filtered.
fn simulate_sample(
    sample: [f64; 4],
    cfg: &DatasetConfig,
    ocps: &OcpPair,
    fresh: f64,
) -> std::result::Result<SimRecord, [f64; 6]> {
    let unresolved = [sample[0], sample[1], sample[2], f64::NAN, f64::NAN, sample[3]];
    let theta = complete_aging(sample, &cfg.cell, ocps).map_err(|_| unresolved)?;
    let rec = simulate_discharge(&theta, &cfg.cell, ocps, &cfg.solver, Some(fresh)).map_err(|_| theta.0)?;
    if rec.duration() < MIN_DURATION_S {
        return Err(theta.0);
    }
    Ok(rec)
}

/// Samples, simulates, filters and writes a dataset into `out_dir`.
pub fn build_dataset(cfg: &DatasetConfig, ocps: &OcpPair, out_dir: &Path) -> Result<DatasetManifest> {
    let series_dir = out_dir.join(SERIES_DIR);
    fs::create_dir_all(&series_dir).map_err(|e| Error::io(&series_dir, e))?;
    let fresh = simulate_discharge(&AgingParameters::fresh(), &cfg.cell, ocps, &cfg.solver, Some(1.0))?.capacity_ah;
    let samples = latin_hypercube_sample(cfg.n, &cfg.ranges, cfg.seed);
    let mut rows = Vec::with_capacity(cfg.n);
    for (i, sample) in samples.into_iter().enumerate() {
        let sample_id = format!("s{i:05}");
        let row = match simulate_sample(sample, cfg, ocps, fresh) {
            Ok(rec) => {
                let rec = rec.resampled(cfg.k);
                write_series(&series_path(out_dir, &sample_id), &rec.series)?;
                ManifestRow {
                    sample_id,
                    theta: rec.theta.0,
                    capacity_ah: rec.capacity_ah,
                    soh: rec.soh,
                    duration_s: rec.duration(),
                    filtered: false,
                }
            }
            Err(theta) => ManifestRow {
                sample_id,
                theta,
                capacity_ah: f64::NAN,
                soh: f64::NAN,
                duration_s: f64::NAN,
                filtered: true,
            },
        };
        rows.push(row);
    }
    let n_filtered = rows.iter().filter(|r| r.filtered).count();
    let filtered_fraction = n_filtered as f64 / rows.len() as f64;
    let warning = (filtered_fraction > FILTER_WARNING_FRACTION).then(|| {
        format!(
            "{n_filtered} of {} samples ({:.1}%) were filtered",
            rows.len(),
            100.0 * filtered_fraction
        )
    });
    let manifest = DatasetManifest {
        dir: out_dir.to_path_buf(),
        rows,
        fresh_capacity_ah: fresh,
        filtered_fraction,
        warning,
    };
    write_manifest(&out_dir.join(MANIFEST_FILE), &manifest.rows)?;
    let mut run = KvConfig::new();
    cfg.write_config(&mut run);
    write_text(&out_dir.join(CONFIG_FILE), &run.to_text())?;
    write_text(&out_dir.join(SUMMARY_FILE), &summary_text(&manifest))?;
    Ok(manifest)
}

fn summary_text(m: &DatasetManifest) -> String {
    let mut cfg = KvConfig::new();
    cfg.set_int("samples", m.rows.len() as i64);
    cfg.set_int("filtered", m.rows.iter().filter(|r| r.filtered).count() as i64);
    cfg.set_f64("filtered_fraction", m.filtered_fraction);
    cfg.set_f64("fresh_capacity_ah", m.fresh_capacity_ah);
    if let Some(w) = &m.warning {
        cfg.set("warning", crate::config::ConfigValue::Text(w.clone()));
    }
    cfg.to_text()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["sample_id"];
    header.extend(AGING_NAMES);
    header.extend(["capacity_ah", "soh", "duration_s", "filtered"]);
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.sample_id.clone()];
        rec.extend(r.theta.iter().map(|v| v.to_string()));
        rec.extend([r.capacity_ah, r.soh, r.duration_s].iter().map(|v| v.to_string()));
        rec.push(u8::from(r.filtered).to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_series(path: &Path, s: &Series) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(SERIES_COLUMNS)?;
    let t_norm = s.t_norm();
    for i in 0..s.len() {
        let row = [
            s.t[i], t_norm[i], s.current[i], s.voltage[i], s.c_ss_neg[i], s.c_ss_pos[i], s.c_e_0[i], s.c_e_l[i],
        ];
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn parse_field(path: &Path, line: usize, name: &str, field: Option<&str>) -> Result<f64> {
    let text = field.ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("missing column `{name}`"),
    })?;
    text.trim().parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("`{name}` is not a number: {text:?}"),
    })
}

fn open_csv(path: &Path) -> Result<(csv::Reader<fs::File>, Vec<String>)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r.headers()?.iter().map(str::to_string).collect();
    Ok((r, header))
}

fn column(path: &Path, header: &[String], name: &str) -> Result<usize> {
    header.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        msg: format!("missing column `{name}`"),
    })
}

/// Reads a series file. Only `voltage_v` and one of `t_s`/`t_norm` are
/// required; absent concentration or current columns are left empty.
pub fn read_series(path: &Path) -> Result<Series> {
    let (mut r, header) = open_csv(path)?;
    let voltage_col = column(path, &header, "voltage_v")?;
    let col = |name: &str| header.iter().position(|h| h == name);
    let t_col = col("t_s");
    let tn_col = col("t_norm");
    if t_col.is_none() && tn_col.is_none() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "need a `t_s` or `t_norm` column".into(),
        });
    }
    let optional = [
        col("current_a"),
        col("css_neg"),
        col("css_pos"),
        col("ce0_neg"),
        col("ceL_pos"),
    ];
    let mut s = Series::default();
    let mut extra: [Vec<f64>; 5] = Default::default();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let t = match t_col {
            Some(c) => parse_field(path, line, "t_s", rec.get(c))?,
            None => parse_field(path, line, "t_norm", rec.get(tn_col.unwrap_or(0)))?,
        };
        s.t.push(t);
        s.voltage.push(parse_field(path, line, "voltage_v", rec.get(voltage_col))?);
        for (slot, c) in extra.iter_mut().zip(optional) {
            if let Some(c) = c {
                slot.push(parse_field(path, line, &header[c], rec.get(c))?);
            }
        }
    }
    if s.t.len() < 2 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: s.t.len() + 1,
            msg: "series needs at least two rows".into(),
        });
    }
    let [current, css_neg, css_pos, ce0, cel] = extra;
    s.current = current;
    s.c_ss_neg = css_neg;
    s.c_ss_pos = css_pos;
    s.c_e_0 = ce0;
    s.c_e_l = cel;
    Ok(s)
}

pub fn read_manifest_rows(path: &Path) -> Result<Vec<ManifestRow>> {
    let (mut r, header) = open_csv(path)?;
    let id_col = column(path, &header, "sample_id")?;
    let theta_cols = AGING_NAMES
        .iter()
        .map(|n| column(path, &header, n))
        .collect::<Result<Vec<_>>>()?;
    let cap = column(path, &header, "capacity_ah")?;
    let soh = column(path, &header, "soh")?;
    let dur = column(path, &header, "duration_s")?;
    let filt = column(path, &header, "filtered")?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let mut theta = [0.0; 6];
        for (k, &c) in theta_cols.iter().enumerate() {
            theta[k] = parse_field(path, line, AGING_NAMES[k], rec.get(c))?;
        }
        let filtered = match rec.get(filt).map(str::trim) {
            Some("0") => false,
            Some("1") => true,
            other => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    msg: format!("`filtered` must be 0 or 1, got {other:?}"),
                })
            }
        };
        rows.push(ManifestRow {
            sample_id: rec.get(id_col).unwrap_or_default().to_string(),
            theta,
            capacity_ah: parse_field(path, line, "capacity_ah", rec.get(cap))?,
            soh: parse_field(path, line, "soh", rec.get(soh))?,
            duration_s: parse_field(path, line, "duration_s", rec.get(dur))?,
            filtered,
        });
    }
    Ok(rows)
}

/// Loads a dataset directory written by [`build_dataset`].
pub fn load_dataset(dir: &Path) -> Result<DatasetManifest> {
    let rows = read_manifest_rows(&dir.join(MANIFEST_FILE))?;
    if rows.is_empty() {
        return Err(Error::Parse {
            path: dir.join(MANIFEST_FILE),
            line: 1,
            msg: "manifest has no samples".into(),
        });
    }
    let summary_path = dir.join(SUMMARY_FILE);
    let summary = if summary_path.exists() { KvConfig::load(&summary_path)? } else { KvConfig::new() };
    let n_filtered = rows.iter().filter(|r| r.filtered).count();
    let filtered_fraction = n_filtered as f64 / rows.len() as f64;
    Ok(DatasetManifest {
        dir: dir.to_path_buf(),
        fresh_capacity_ah: summary.f64_or("fresh_capacity_ah", f64::NAN)?,
        warning: match summary.get("warning") {
            Some(crate::config::ConfigValue::Text(w)) => Some(w.clone()),
            _ => None,
        },
        rows,
        filtered_fraction,
    })
}
