//! Open-circuit potential curves as monotone cubic lookup tables.
//!
//! Tables are read from CSV (`x,u_volts`, strictly increasing `x`) and
//! interpolated with a shape-preserving piecewise cubic Hermite scheme
//! (Fritsch-Butland slopes), so the interpolant never overshoots the knot
//! values. Outside the tabulated range the curve is clamped to the end
//! values with zero slope.

use std::io::Read;
use std::path::Path;

use crate::{Error, Result};

const GRAPHITE_CSV: &str = include_str!("../data/graphite_ocp.csv");
const LFP_CSV: &str = include_str!("../data/lfp_ocp.csv");

#[derive(Debug, Clone, PartialEq)]
pub struct OcpCurve {
    x: Vec<f64>,
    u: Vec<f64>,
    slope: Vec<f64>,
}

impl OcpCurve {
    pub fn from_knots(x: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        if x.len() != u.len() {
            return Err(Error::Config("OCP table columns differ in length".into()));
        }
        if x.len() < 2 {
            return Err(Error::Config("OCP table needs at least two knots".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("OCP table x must be strictly increasing".into()));
        }
        if x.iter().chain(&u).any(|v| !v.is_finite()) {
            return Err(Error::Config("OCP table contains non-finite values".into()));
        }
        let slope = pchip_slopes(&x, &u);
        Ok(Self { x, u, slope })
    }

    /// Bundled graphite negative-electrode curve.
    pub fn graphite() -> Self {
        Self::parse_csv(GRAPHITE_CSV.as_bytes(), Path::new("<bundled graphite_ocp.csv>"))
            .expect("bundled graphite table is valid")
    }

    /// Bundled LFP positive-electrode curve.
    pub fn lfp() -> Self {
        Self::parse_csv(LFP_CSV.as_bytes(), Path::new("<bundled lfp_ocp.csv>"))
            .expect("bundled LFP table is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(file, path)
    }

    pub fn parse_csv<R: Read>(reader: R, path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["x", "u_volts"] {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                msg: format!("expected header `x,u_volts`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            });
        }
        let mut xs = Vec::new();
        let mut us = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec?;
            let parse = |idx: usize| -> Result<f64> {
                rec.get(idx)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Parse {
                        path: path.to_path_buf(),
                        line,
                        msg: "expected two numeric fields".into(),
                    })
            };
            let x = parse(0)?;
            let u = parse(1)?;
            if let Some(&prev) = xs.last() {
                if !(x > prev) {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line,
                        msg: format!("x must be strictly increasing ({x} after {prev})"),
                    });
                }
            }
            xs.push(x);
            us.push(u);
        }
        Self::from_knots(xs, us)
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.x, &self.u)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_with_slope(x).0
    }

    /// Value and dU/dx at `x`; the slope is zero in the clamped region.
    pub fn eval_with_slope(&self, x: f64) -> (f64, f64) {
        let n = self.x.len();
        if x <= self.x[0] {
            return (self.u[0], 0.0);
        }
        if x >= self.x[n - 1] {
            return (self.u[n - 1], 0.0);
        }
        // partition_point gives the first knot strictly greater than x
        let k = self.x.partition_point(|&xi| xi <= x) - 1;
        let h = self.x[k + 1] - self.x[k];
        let t = (x - self.x[k]) / h;
        let (y0, y1) = (self.u[k], self.u[k + 1]);
        let (m0, m1) = (self.slope[k] * h, self.slope[k + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let value = h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1;
        let d00 = 6.0 * t2 - 6.0 * t;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = -6.0 * t2 + 6.0 * t;
        let d11 = 3.0 * t2 - 2.0 * t;
        let slope = (d00 * y0 + d10 * m0 + d01 * y1 + d11 * m1) / h;
        (value, slope)
    }
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if n == 2 {
        return vec![delta[0]; 2];
    }
    let mut m = vec![0.0; n];
    for k in 1..n - 1 {
        let (d0, d1) = (delta[k - 1], delta[k]);
        if d0 == 0.0 || d1 == 0.0 || d0.signum() != d1.signum() {
            m[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            m[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
        }
    }
    m[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    m[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    m
}

// One-sided three-point estimate, limited to preserve monotonicity.
fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

/// Negative and positive electrode curves of one cell chemistry.
#[derive(Debug, Clone, PartialEq)]
pub struct OcpPair {
    pub neg: OcpCurve,
    pub pos: OcpCurve,
}

impl OcpPair {
    pub fn lfp_graphite() -> Self {
        Self {
            neg: OcpCurve::graphite(),
            pos: OcpCurve::lfp(),
        }
    }
}

impl Default for OcpPair {
    fn default() -> Self {
        Self::lfp_graphite()
    }
}
