//! Constant-current discharge from full charge to the lower cutoff.

use super::electrolyte::ElectrolyteGrid;
use super::solid::SolidGrid;
use crate::kinetics::{terminal_voltage, volumetric_current_density, BoundaryState};
use crate::ocp::OcpPair;
use crate::params::{AgingParameters, CellParameters, Electrode};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Radial shells per particle.
    pub n_r: usize,
    /// Electrolyte cells per region.
    pub n_x: usize,
    /// Time step, s.
    pub dt: f64,
    pub c_rate: f64,
    /// Discharges longer than this multiple of the nominal duration are rejected.
    pub max_time_factor: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            n_r: 30,
            n_x: 20,
            dt: 1.0,
            c_rate: 4.0,
            max_time_factor: 2.0,
        }
    }
}

/// Time series of one discharge with the four boundary concentrations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Series {
    pub t: Vec<f64>,
    pub current: Vec<f64>,
    pub voltage: Vec<f64>,
    pub c_ss_neg: Vec<f64>,
    pub c_ss_pos: Vec<f64>,
    pub c_e_0: Vec<f64>,
    pub c_e_l: Vec<f64>,
}

impl Series {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.t.last().copied().unwrap_or(0.0)
    }

    pub fn t_norm(&self) -> Vec<f64> {
        let end = self.duration();
        self.t.iter().map(|t| t / end).collect()
    }

    fn push(&mut self, t: f64, current: f64, v: f64, b: &BoundaryState) {
        self.t.push(t);
        self.current.push(current);
        self.voltage.push(v);
        self.c_ss_neg.push(b.c_ss_neg);
        self.c_ss_pos.push(b.c_ss_pos);
        self.c_e_0.push(b.c_e_neg0);
        self.c_e_l.push(b.c_e_pos_l);
    }

    /// Linear interpolation onto `k` uniformly spaced times spanning the series.
    pub fn resample(&self, k: usize) -> Series {
        let end = self.duration();
        let mut out = Series::default();
        let mut seg = 0;
        for i in 0..k {
            let t = if k == 1 { end } else { end * i as f64 / (k - 1) as f64 };
            while seg + 2 < self.t.len() && self.t[seg + 1] < t {
                seg += 1;
            }
            let (t0, t1) = (self.t[seg], self.t[(seg + 1).min(self.t.len() - 1)]);
            let w = if t1 > t0 { ((t - t0) / (t1 - t0)).clamp(0.0, 1.0) } else { 0.0 };
            let lerp = |v: &[f64]| v[seg] + w * (v[(seg + 1).min(v.len() - 1)] - v[seg]);
            out.t.push(t);
            out.current.push(lerp(&self.current));
            out.voltage.push(lerp(&self.voltage));
            out.c_ss_neg.push(lerp(&self.c_ss_neg));
            out.c_ss_pos.push(lerp(&self.c_ss_pos));
            out.c_e_0.push(lerp(&self.c_e_0));
            out.c_e_l.push(lerp(&self.c_e_l));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRecord {
    pub theta: AgingParameters,
    pub series: Series,
    pub capacity_ah: f64,
    pub soh: f64,
}

impl SimRecord {
    pub fn duration(&self) -> f64 {
        self.series.duration()
    }

    /// Copy with the series resampled to `k` points.
    pub fn resampled(&self, k: usize) -> SimRecord {
        SimRecord {
            series: self.series.resample(k),
            ..self.clone()
        }
    }
}

/// Full-order model state.
#[derive(Debug, Clone)]
pub struct CellState {
    pub neg: SolidGrid,
    pub pos: SolidGrid,
    pub electrolyte: ElectrolyteGrid,
}

struct Discharge<'a> {
    params: CellParameters,
    theta: AgingParameters,
    ocps: &'a OcpPair,
    current: f64,
    j_neg: f64,
    j_pos: f64,
    a_neg: f64,
    a_pos: f64,
}

impl Discharge<'_> {
    fn boundary(&self, s: &CellState) -> BoundaryState {
        BoundaryState {
            c_ss_neg: s.neg.surface_concentration(self.j_neg, self.a_neg),
            c_ss_pos: s.pos.surface_concentration(self.j_pos, self.a_pos),
            c_e_neg0: s.electrolyte.at_negative_collector(),
            c_e_pos_l: s.electrolyte.at_positive_collector(),
        }
    }

    fn voltage(&self, b: &BoundaryState) -> Result<f64> {
        terminal_voltage(b, &self.theta, self.current, &self.params, &self.ocps.neg, &self.ocps.pos)
    }

    fn advance(&self, s: &CellState, h: f64) -> Result<(CellState, BoundaryState, f64)> {
        let mut next = s.clone();
        next.neg.advance(self.j_neg, self.a_neg, h)?;
        next.pos.advance(self.j_pos, self.a_pos, h)?;
        next.electrolyte.advance(self.current, h)?;
        let b = self.boundary(&next);
        let v = self.voltage(&b)?;
        Ok((next, b, v))
    }
}

/// Fully charged initial state for an aging vector.
pub fn initial_state(theta: &AgingParameters, params: &CellParameters, settings: &SolverSettings) -> Result<CellState> {
    Ok(CellState {
        neg: SolidGrid::uniform(&params.neg, Electrode::Negative, settings.n_r, theta.x100_neg() * params.neg.c_s_max)?,
        pos: SolidGrid::uniform(&params.pos, Electrode::Positive, settings.n_r, theta.x100_pos() * params.pos.c_s_max)?,
        electrolyte: ElectrolyteGrid::uniform(params, settings.n_x)?,
    })
}

/// Simulates a constant-current discharge until the terminal voltage reaches
/// `V_min`, bisecting the final step so the series ends on the cutoff.
///
/// `fresh_capacity` is the reference for the SOH label; when absent it is
/// obtained by simulating the unaged cell with the same settings.
pub fn simulate_discharge(
    theta: &AgingParameters,
    params: &CellParameters,
    ocps: &OcpPair,
    settings: &SolverSettings,
    fresh_capacity: Option<f64>,
) -> Result<SimRecord> {
    theta.validate()?;
    if !(settings.dt > 0.0) || !(settings.c_rate > 0.0) {
        return Err(Error::Config(format!(
            "dt and c_rate must be positive (got {}, {})",
            settings.dt, settings.c_rate
        )));
    }
    let aged = params.with_aging(theta);
    let current = params.current_for_c_rate(settings.c_rate);
    let run = Discharge {
        j_neg: volumetric_current_density(current, aged.area, aged.neg.thickness, Electrode::Negative),
        j_pos: volumetric_current_density(current, aged.area, aged.pos.thickness, Electrode::Positive),
        a_neg: aged.neg.specific_area(),
        a_pos: aged.pos.specific_area(),
        params: aged,
        theta: *theta,
        ocps,
        current,
    };
    let mut state = initial_state(theta, &run.params, settings)?;
    let mut series = Series::default();
    let b0 = run.boundary(&state);
    let v0 = run.voltage(&b0)?;
    if v0 <= params.v_min {
        return Err(Error::Abnormal(format!("initial voltage {v0:.4} V already below cutoff")));
    }
    series.push(0.0, current, v0, &b0);
    let guard = settings.max_time_factor * 3600.0 / settings.c_rate;
    let mut t = 0.0;
    loop {
        if t >= guard {
            return Err(Error::Abnormal(format!("cutoff not reached within {guard} s")));
        }
        match run.advance(&state, settings.dt) {
            Ok((next, b, v)) if v > params.v_min => {
                t += settings.dt;
                state = next;
                series.push(t, current, v, &b);
            }
            outcome => {
                let failure = outcome.err();
                let (mut lo, mut hi) = (0.0, settings.dt);
                let mut last = None;
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    match run.advance(&state, mid) {
                        Ok((_, b, v)) if v > params.v_min => {
                            lo = mid;
                            last = Some((b, v));
                        }
                        _ => hi = mid,
                    }
                }
                let (b, v) = match last {
                    Some(found) => found,
                    None => return Err(failure.unwrap_or_else(|| Error::Abnormal("cutoff step did not resolve".into()))),
                };
                if (v - params.v_min).abs() > 5e-3 {
                    return Err(failure
                        .unwrap_or_else(|| Error::Abnormal(format!("discharge ended at {v:.4} V, off the cutoff"))));
                }
                t += lo;
                series.push(t, current, v, &b);
                break;
            }
        }
    }
    let capacity_ah = current * t / 3600.0;
    let fresh = match fresh_capacity {
        Some(q) => q,
        None => {
            simulate_discharge(&AgingParameters::fresh(), params, ocps, settings, Some(1.0))?.capacity_ah
        }
    };
    Ok(SimRecord {
        theta: *theta,
        series,
        capacity_ah,
        soh: capacity_ah / fresh,
    })
}
