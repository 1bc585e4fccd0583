//! Iterative identification against the full-order solver.
//!
//! The classic inverse problem, used to check the network: minimize the
//! voltage RMSE between a measured window and a simulated discharge over the
//! four independently sampled aging coordinates. Derivative-free
//! Nelder-Mead on the unit box with reflection at the walls, several starts.

use cellhealth_core::solver::{complete_aging, simulate_discharge, SolverSettings};
use cellhealth_core::{AgingParameters, AgingRanges, CellParameters, OcpPair};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::window::MeasurementWindow;
use crate::{Error, Result};

/// Aging coordinates searched by the oracle; the other two are derived.
pub const SEARCHED: [usize; 4] = [
    AgingParameters::EPS_S_NEG,
    AgingParameters::EPS_S_POS,
    AgingParameters::X100_NEG,
    AgingParameters::X0_POS,
];

/// Objective value for candidates the solver cannot simulate, V.
const INFEASIBLE_RMSE: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub starts: usize,
    /// Total objective evaluations over all starts.
    pub budget: usize,
    /// A start stops once its best RMSE is below this, V.
    pub target_rmse: f64,
    /// Edge of the initial simplex in unit-box coordinates.
    pub initial_step: f64,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            starts: 5,
            budget: 5000,
            target_rmse: 1e-4,
            initial_step: 0.15,
            seed: 41,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub theta: AgingParameters,
    pub rmse: f64,
    pub evaluations: usize,
    /// False when the budget ran out before every start met the target.
    pub converged: bool,
    /// Best parameters of each start.
    pub starts: Vec<AgingParameters>,
}

impl OracleResult {
    /// Standard deviation of each parameter over the per-start optima.
    pub fn start_spread(&self) -> [f64; 6] {
        let n = self.starts.len() as f64;
        std::array::from_fn(|k| {
            let mean = self.starts.iter().map(|t| t.0[k]).sum::<f64>() / n;
            (self.starts.iter().map(|t| (t.0[k] - mean).powi(2)).sum::<f64>() / n).sqrt()
        })
    }
}

/// Folds a coordinate back into [0, 1] by mirror reflection.
fn reflect(x: f64) -> f64 {
    let m = x.rem_euclid(2.0);
    if m > 1.0 {
        2.0 - m
    } else {
        m
    }
}

/// Simulated voltage at the window's sample times; past the end of the
/// simulated discharge its final voltage is held.
fn simulated_rmse(
    theta: &AgingParameters,
    window: &MeasurementWindow,
    params: &CellParameters,
    ocps: &OcpPair,
    settings: &SolverSettings,
) -> f64 {
    let Ok(rec) = simulate_discharge(theta, params, ocps, settings, Some(1.0)) else {
        return INFEASIBLE_RMSE;
    };
    let s = &rec.series;
    let mut seg = 0;
    let mut sse = 0.0;
    for (t, v) in window.times().into_iter().zip(&window.voltage) {
        while seg + 2 < s.len() && s.t[seg + 1] < t {
            seg += 1;
        }
        let sim = if t >= s.duration() {
            s.voltage[s.len() - 1]
        } else {
            let (t0, t1) = (s.t[seg], s.t[seg + 1]);
            let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
            s.voltage[seg] + w * (s.voltage[seg + 1] - s.voltage[seg])
        };
        sse += (sim - v).powi(2);
    }
    (sse / window.len() as f64).sqrt()
}

struct Problem<'a> {
    window: &'a MeasurementWindow,
    params: &'a CellParameters,
    ocps: &'a OcpPair,
    settings: &'a SolverSettings,
    ranges: &'a AgingRanges,
    evaluations: usize,
}

impl Problem<'_> {
    fn theta(&self, u: &[f64; 4]) -> Option<AgingParameters> {
        let sample: [f64; 4] = std::array::from_fn(|i| {
            let (lo, hi) = self.ranges.0[SEARCHED[i]];
            lo + (hi - lo) * u[i]
        });
        complete_aging(sample, self.params, self.ocps).ok()
    }

    fn eval(&mut self, u: &[f64; 4]) -> f64 {
        self.evaluations += 1;
        match self.theta(u) {
            Some(theta) => simulated_rmse(&theta, self.window, self.params, self.ocps, self.settings),
            None => INFEASIBLE_RMSE,
        }
    }
}

/// Nelder-Mead from `start` with at most `budget` evaluations.
fn nelder_mead(problem: &mut Problem, start: [f64; 4], step: f64, target: f64, budget: usize) -> ([f64; 4], f64) {
    const N: usize = 4;
    let used = problem.evaluations;
    let remaining = |p: &Problem| budget.saturating_sub(p.evaluations - used);
    let f0 = problem.eval(&start);
    let mut simplex = vec![(start, f0)];
    if f0 < target {
        return (start, f0);
    }
    for i in 0..N {
        let mut x = start;
        x[i] = reflect(if x[i] + step <= 1.0 { x[i] + step } else { x[i] - step });
        let f = problem.eval(&x);
        simplex.push((x, f));
    }
    let point = |c: &[f64; N], d: &[f64; N], k: f64| -> [f64; N] { std::array::from_fn(|i| reflect(c[i] + k * (d[i] - c[i]))) };
    while remaining(problem) > 0 {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[N].1);
        if best < target || worst - best < 1e-12 {
            break;
        }
        let centroid: [f64; N] = std::array::from_fn(|i| simplex[..N].iter().map(|p| p.0[i]).sum::<f64>() / N as f64);
        let xr = point(&centroid, &simplex[N].0, -1.0);
        let fr = problem.eval(&xr);
        if fr < simplex[0].1 {
            let xe = point(&centroid, &simplex[N].0, -2.0);
            let fe = problem.eval(&xe);
            simplex[N] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[N - 1].1 {
            simplex[N] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[N].1 {
                let xc = point(&centroid, &xr, 0.5);
                (xc, problem.eval(&xc))
            } else {
                let xc = point(&centroid, &simplex[N].0, 0.5);
                (xc, problem.eval(&xc))
            };
            if fc < simplex[N].1.min(fr) {
                simplex[N] = (xc, fc);
            } else {
                let x0 = simplex[0].0;
                for p in simplex.iter_mut().skip(1) {
                    p.0 = point(&x0, &p.0, 0.5);
                    p.1 = problem.eval(&p.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0]
}

/// Multi-start bounded Nelder-Mead; `start` optionally replaces the first
/// random start with a known point.
pub fn iterative_identify(
    window: &MeasurementWindow,
    params: &CellParameters,
    ocps: &OcpPair,
    settings: &SolverSettings,
    ranges: &AgingRanges,
    cfg: &OracleConfig,
    start: Option<&AgingParameters>,
) -> Result<OracleResult> {
    if cfg.starts == 0 || cfg.budget < cfg.starts * 5 {
        return Err(Error::Input("the oracle needs at least one start and five evaluations per start".into()));
    }
    let mut problem = Problem {
        window,
        params,
        ocps,
        settings,
        ranges,
        evaluations: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut optima = Vec::with_capacity(cfg.starts);
    let mut converged = true;
    for k in 0..cfg.starts {
        let u0: [f64; 4] = match (k, start) {
            (0, Some(theta)) => std::array::from_fn(|i| {
                let (lo, hi) = ranges.0[SEARCHED[i]];
                ((theta.0[SEARCHED[i]] - lo) / (hi - lo)).clamp(0.0, 1.0)
            }),
            _ => std::array::from_fn(|_| rng.gen_range(0.0..1.0)),
        };
        let share = (cfg.budget - problem.evaluations) / (cfg.starts - k);
        let (u, f) = nelder_mead(&mut problem, u0, cfg.initial_step, cfg.target_rmse, share);
        converged &= f < cfg.target_rmse;
        optima.push((u, f));
    }
    let thetas: Vec<AgingParameters> = optima
        .iter()
        .map(|(u, _)| problem.theta(u).unwrap_or_else(|| ranges.midpoint()))
        .collect();
    let best = optima
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .expect("at least one start");
    Ok(OracleResult {
        theta: thetas[best],
        rmse: optima[best].1,
        evaluations: problem.evaluations,
        converged,
        starts: thetas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflection_folds_into_the_unit_interval() {
        for (x, r) in [(0.3, 0.3), (-0.2, 0.2), (1.25, 0.75), (2.5, 0.5), (-1.5, 0.5)] {
            assert!((reflect(x) - r).abs() < 1e-12, "{x}");
        }
    }

    fn window_for(theta: &AgingParameters, settings: &SolverSettings) -> MeasurementWindow {
        let p = CellParameters::default();
        let rec = simulate_discharge(theta, &p, &OcpPair::default(), settings, Some(1.0)).unwrap();
        MeasurementWindow::from_series(&rec.series, 64).unwrap()
    }

    fn coarse() -> SolverSettings {
        SolverSettings {
            n_r: 10,
            n_x: 6,
            dt: 4.0,
            ..SolverSettings::default()
        }
    }

    #[test]
    fn starting_at_the_truth_stops_immediately() {
        let (p, ocps, s) = (CellParameters::default(), OcpPair::default(), coarse());
        let ranges = AgingRanges::default();
        let theta = complete_aging([0.5, 0.37, 0.74, 0.8], &p, &ocps).unwrap();
        let w = window_for(&theta, &s);
        let cfg = OracleConfig {
            starts: 1,
            ..OracleConfig::default()
        };
        let r = iterative_identify(&w, &p, &ocps, &s, &ranges, &cfg, Some(&theta)).unwrap();
        assert_eq!(r.evaluations, 1);
        assert!(r.rmse < 1e-9, "{}", r.rmse);
        assert!(r.converged);
    }

    #[test]
    fn recovers_a_simulated_window() {
        let (p, ocps, s) = (CellParameters::default(), OcpPair::default(), coarse());
        let ranges = AgingRanges::default();
        let theta = complete_aging([0.47, 0.39, 0.71, 0.85], &p, &ocps).unwrap();
        let w = window_for(&theta, &s);
        let cfg = OracleConfig {
            starts: 2,
            budget: 1500,
            target_rmse: 2e-3,
            ..OracleConfig::default()
        };
        let r = iterative_identify(&w, &p, &ocps, &s, &ranges, &cfg, None).unwrap();
        assert!(r.rmse < 5e-3, "rmse {}", r.rmse);
        assert!(r.evaluations <= 1500);
        assert_eq!(r.starts.len(), 2);
    }
}
