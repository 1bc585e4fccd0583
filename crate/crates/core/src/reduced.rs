//! Pade-approximation ODEs for the surface and current-collector
//! concentrations, evaluated as residuals.

use crate::constants::FARADAY;
use crate::params::{CellParameters, Electrode};
use crate::{Error, Result};

/// Residual of dc_ss/dt = 3 j / (F R_s a_s), mol/(m^3 s).
///
/// `j` here is the insertion current: positive when lithium enters the
/// particle. Under the discharge-positive cell convention callers pass the
/// negated volumetric reaction current.
pub fn solid_residual(c_ss_dot: f64, j: f64, particle_radius: f64, a_s: f64) -> f64 {
    c_ss_dot - 3.0 * j / (FARADAY * particle_radius * a_s)
}

/// Coefficients of dc_e/dt = (alpha I - gamma c_e) / beta at one current collector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElectrolyteOdeCoefficients {
    /// m.
    pub k: f64,
    pub alpha: f64,
    /// m^3.
    pub beta: f64,
    /// m^3/s.
    pub gamma: f64,
}

impl ElectrolyteOdeCoefficients {
    pub fn new(params: &CellParameters, electrode: Electrode, eps_e: f64) -> Self {
        // upper sign for the positive electrode, lower for the negative
        let s = -electrode.current_sign();
        let l = params.electrode(electrode).thickness;
        let k = params.neg.thickness + s * 2.0 * params.sep_thickness - params.pos.thickness;
        let alpha = s * 3.0 * (1.0 - params.t_plus) * (k + s * 2.0 * l).powi(2) / (FARADAY * params.area);
        let beta = l * eps_e * (3.0 * k * k + 10.0 * k * l + s * 10.0 * l * l);
        let gamma = (12.0 * k + 24.0 * l) * params.effective_diffusivity(eps_e);
        Self { k, alpha, beta, gamma }
    }

    /// The steady value alpha I / gamma.
    pub fn fixed_point(&self, current: f64) -> f64 {
        self.alpha * current / self.gamma
    }
}

/// Coefficients for both electrodes using their tabulated porosities, `[neg, pos]`.
pub fn electrolyte_coefficients(params: &CellParameters) -> [ElectrolyteOdeCoefficients; 2] {
    [
        ElectrolyteOdeCoefficients::new(params, Electrode::Negative, params.neg.eps_e),
        ElectrolyteOdeCoefficients::new(params, Electrode::Positive, params.pos.eps_e),
    ]
}

pub fn electrolyte_residual(c_e_dot: f64, c_e: f64, current: f64, coeffs: &ElectrolyteOdeCoefficients) -> Result<f64> {
    if coeffs.beta == 0.0 {
        return Err(Error::Domain("degenerate geometry: beta = 0".into()));
    }
    Ok(c_e_dot - (coeffs.alpha * current - coeffs.gamma * c_e) / coeffs.beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn solid_forcing_at_four_c() {
        let forcing = 3.0 * 1.445e6 / (FARADAY * 1e-6 * 1.62e6);
        assert_relative_eq!(forcing, 27.73, max_relative = 1e-3);
        assert_eq!(solid_residual(forcing, 1.445e6, 1e-6, 1.62e6), 0.0);
        assert_eq!(solid_residual(0.0, 0.0, 1e-6, 1.62e6), 0.0);
    }

    #[test]
    fn geometry_constants_for_reference_cell() {
        let p = CellParameters::default();
        let [neg, pos] = electrolyte_coefficients(&p);
        assert_relative_eq!(neg.k, -6.5e-5, max_relative = 1e-12);
        assert_relative_eq!(pos.k, 1.5e-5, max_relative = 1e-12);
        let alpha_neg = -3.0 * 0.637 * (-6.5e-5f64 - 7e-5).powi(2) / (96485.0 * 0.087);
        assert_relative_eq!(neg.alpha, alpha_neg, max_relative = 1e-9);
        assert_relative_eq!(pos.alpha, 3.0 * 0.637 * (1.5e-5f64 + 1.2e-4).powi(2) / (96485.0 * 0.087), max_relative = 1e-9);
        // beta(neg) = 3.5e-5 * 0.4 * (3 K^2 + 10 K L - 10 L^2)
        let b = 3.5e-5 * 0.4 * (3.0 * 4.225e-9 - 10.0 * 6.5e-5 * 3.5e-5 - 10.0 * 1.225e-9);
        assert_relative_eq!(neg.beta, b, max_relative = 1e-9);
        assert!(pos.beta > 0.0);
        assert!(neg.gamma > 0.0 && pos.gamma > 0.0);
        assert_relative_eq!(pos.gamma, 1.62e-3 * p.effective_diffusivity(p.pos.eps_e), max_relative = 1e-12);
    }

    #[test]
    fn exponential_relaxation_solves_the_ode() {
        let p = CellParameters::default();
        let c = electrolyte_coefficients(&p)[1];
        let current = 4.4;
        let star = c.fixed_point(current);
        let rate = c.gamma / c.beta;
        let c0 = 1000.0;
        for t in [0.0, 1.0, 10.0, 100.0, 1000.0] {
            let ce = star + (c0 - star) * (-rate * t).exp();
            let dot = -rate * (c0 - star) * (-rate * t).exp();
            let r = electrolyte_residual(dot, ce, current, &c).unwrap();
            assert!(r.abs() < 1e-10, "t = {t}: {r}");
        }
        assert!(electrolyte_residual(0.0, star, current, &c).unwrap().abs() < 1e-12);
        assert_eq!(electrolyte_residual(0.0, 0.0, 0.0, &c).unwrap(), 0.0);
    }

    #[test]
    fn zero_beta_is_rejected() {
        let c = ElectrolyteOdeCoefficients { k: 0.0, alpha: 1.0, beta: 0.0, gamma: 1.0 };
        assert!(electrolyte_residual(0.0, 1.0, 1.0, &c).is_err());
    }

    proptest! {
        #[test]
        fn residuals_are_linear(d1 in -100.0f64..100.0, d2 in -100.0f64..100.0, i in -10.0f64..10.0) {
            let p = CellParameters::default();
            let c = electrolyte_coefficients(&p)[0];
            let r = |d: f64, cur: f64| electrolyte_residual(d, 0.0, cur, &c).unwrap();
            prop_assert!((r(d1 + d2, 2.0 * i) - (r(d1, i) + r(d2, i))).abs() < 1e-9 * (1.0 + d1.abs() + d2.abs()));
            let s = |d: f64, j: f64| solid_residual(d, j, 1e-6, 1.62e6);
            prop_assert!((s(d1 + d2, 2e5 * i) - (s(d1, 1e5 * i) + s(d2, 1e5 * i))).abs() < 1e-9 * (1.0 + d1.abs() + d2.abs() + i.abs()));
        }
    }
}
