//! Measured discharge windows fed to the identifier.

use std::path::Path;

use cellhealth_core::solver::{read_series, Series};
use cellhealth_core::{NormalizationSpec, Variable};

use crate::{Error, Result};

/// Plausible instrument range for terminal voltage, V.
pub const VOLTAGE_BOUNDS: (f64, f64) = (1.5, 4.0);

/// One full discharge resampled onto `K` points.
///
/// `t_norm` runs from 0 to 1; `duration_s` scales it back to seconds so
/// that the discharge length, and with it the capacity, stays observable.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementWindow {
    pub voltage: Vec<f64>,
    pub current: Vec<f64>,
    pub t_norm: Vec<f64>,
    pub duration_s: f64,
}

impl MeasurementWindow {
    pub fn new(voltage: Vec<f64>, current: Vec<f64>, t_norm: Vec<f64>, duration_s: f64) -> Result<Self> {
        let k = t_norm.len();
        if k < 2 || voltage.len() != k || current.len() != k {
            return Err(Error::Input(format!(
                "window columns must share a length of at least 2 (V {}, I {}, t {k})",
                voltage.len(),
                current.len()
            )));
        }
        if t_norm[0].abs() > 1e-9 || (t_norm[k - 1] - 1.0).abs() > 1e-9 {
            return Err(Error::Input("t_norm must run from 0 to 1".into()));
        }
        if t_norm.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Input("t_norm must be strictly increasing".into()));
        }
        if let Some(v) = voltage.iter().find(|v| !(VOLTAGE_BOUNDS.0..=VOLTAGE_BOUNDS.1).contains(*v)) {
            return Err(Error::Input(format!(
                "voltage {v} V outside [{}, {}] V",
                VOLTAGE_BOUNDS.0, VOLTAGE_BOUNDS.1
            )));
        }
        if current.iter().any(|i| !i.is_finite()) {
            return Err(Error::Input("current must be finite".into()));
        }
        if !(duration_s > 0.0 && duration_s.is_finite()) {
            return Err(Error::Input(format!("duration must be positive, got {duration_s}")));
        }
        Ok(Self {
            voltage,
            current,
            t_norm,
            duration_s,
        })
    }

    /// Window over a series with times in seconds, resampled to `k` points.
    pub fn from_series(series: &Series, k: usize) -> Result<Self> {
        if series.len() < 2 || series.current.len() != series.len() {
            return Err(Error::Input("series needs time, current and voltage columns".into()));
        }
        let s = if series.len() == k { series.clone() } else { series.resample(k) };
        let t0 = s.t[0];
        let duration = s.t[k - 1] - t0;
        let t_norm = s.t.iter().map(|t| (t - t0) / duration).collect();
        Self::new(s.voltage, s.current, t_norm, duration)
    }

    /// Reads a series CSV; it must carry `t_s`, `current_a` and `voltage_v`.
    pub fn read_csv(path: &Path, k: usize) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let header = reader.headers()?.clone();
        for col in ["t_s", "current_a", "voltage_v"] {
            if !header.iter().any(|h| h == col) {
                return Err(Error::Core(cellhealth_core::Error::Parse {
                    path: path.to_path_buf(),
                    line: 1,
                    msg: format!(
                        "missing column `{col}`; expected header with t_s,current_a,voltage_v (got `{}`)",
                        header.iter().collect::<Vec<_>>().join(",")
                    ),
                }));
            }
        }
        Self::from_series(&read_series(path)?, k)
    }

    pub fn len(&self) -> usize {
        self.t_norm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_norm.is_empty()
    }

    /// Sample times in seconds from the start of the discharge.
    pub fn times(&self) -> Vec<f64> {
        self.t_norm.iter().map(|t| t * self.duration_s).collect()
    }

    /// Identifier input rows `[V_n, I_n, t / T]`, flattened `[K, 3]`.
    pub fn features(&self, spec: &NormalizationSpec) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() * 3);
        for ((v, i), t) in self.voltage.iter().zip(&self.current).zip(self.times()) {
            out.push(spec.normalize(Variable::Voltage, *v));
            out.push(spec.normalize(Variable::Current, *i));
            out.push(spec.normalize(Variable::Time, t));
        }
        out
    }
}
