//! Electrode and cell capacities from stoichiometric windows.

use crate::constants::FARADAY;
use crate::params::{AgingParameters, CellParameters, ElectrodeParameters};

const COULOMB_PER_AH: f64 = 3600.0;

/// Theoretical capacity A L eps_s c_s_max F of one electrode, Ah.
pub fn theoretical_capacity(electrode: &ElectrodeParameters, area: f64) -> f64 {
    area * electrode.thickness * electrode.eps_s * electrode.c_s_max * FARADAY / COULOMB_PER_AH
}

/// Accessible capacity of each electrode and of the cell, Ah.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellCapacity {
    pub negative: f64,
    pub positive: f64,
}

impl CellCapacity {
    /// The limiting electrode sets the cell capacity.
    pub fn cell(&self) -> f64 {
        self.negative.min(self.positive)
    }
}

pub fn electrode_capacities(theta: &AgingParameters, params: &CellParameters) -> CellCapacity {
    let aged = params.with_aging(theta);
    let q_neg = theoretical_capacity(&aged.neg, aged.area);
    let q_pos = theoretical_capacity(&aged.pos, aged.area);
    CellCapacity {
        negative: (theta.x100_neg() - theta.x0_neg()).abs() * q_neg,
        positive: (theta.x100_pos() - theta.x0_pos()).abs() * q_pos,
    }
}

pub fn cell_capacity(theta: &AgingParameters, params: &CellParameters) -> f64 {
    electrode_capacities(theta, params).cell()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn theoretical_capacity_examples() {
        let p = CellParameters::default();
        assert_relative_eq!(theoretical_capacity(&p.neg, p.area), 1.347, max_relative = 1e-3);
        assert_relative_eq!(theoretical_capacity(&p.pos, p.area), 1.190, max_relative = 1e-3);
        let mut e = p.neg;
        e.eps_s = 0.0;
        assert_eq!(theoretical_capacity(&e, p.area), 0.0);
    }

    #[test]
    fn fresh_cell_capacity() {
        let p = CellParameters::default();
        let c = electrode_capacities(&p.aging(), &p);
        assert_relative_eq!(c.negative, 1.068, max_relative = 2e-3);
        assert_relative_eq!(c.positive, 1.040, max_relative = 2e-3);
        assert!(c.cell() >= 1.0 && c.cell() <= 1.15);
        assert_eq!(c.cell(), c.positive);
    }

    #[test]
    fn halving_active_fraction_halves_electrode_capacity() {
        let p = CellParameters::default();
        let fresh = p.aging();
        let mut half = fresh;
        half.0[AgingParameters::EPS_S_NEG] *= 0.5;
        let a = electrode_capacities(&fresh, &p);
        let b = electrode_capacities(&half, &p);
        assert_relative_eq!(b.negative, 0.5 * a.negative, max_relative = 1e-14);
        assert_eq!(b.positive, a.positive);
    }
}
