//! Cell geometry, transport and kinetic parameters, plus the aging vector.

use crate::constants::PhysicalConstants;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Electrode {
    Negative,
    Positive,
}

impl Electrode {
    pub fn label(self) -> &'static str {
        match self {
            Electrode::Negative => "negative",
            Electrode::Positive => "positive",
        }
    }

    /// Sign of the volumetric reaction current for a discharge-positive current.
    pub fn current_sign(self) -> f64 {
        match self {
            Electrode::Negative => 1.0,
            Electrode::Positive => -1.0,
        }
    }
}

/// Per-electrode parameters (one column of the LFP/graphite parameter table).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElectrodeParameters {
    /// Thickness, m.
    pub thickness: f64,
    /// Particle radius, m.
    pub particle_radius: f64,
    /// Solid diffusivity, m^2/s.
    pub solid_diffusivity: f64,
    /// Active material volume fraction.
    pub eps_s: f64,
    /// Porosity.
    pub eps_e: f64,
    /// Maximum solid concentration, mol/m^3.
    pub c_s_max: f64,
    /// Reaction rate constant, m^2.5 mol^-0.5 s^-1.
    pub k0: f64,
    /// Stoichiometry at 100 % SOC.
    pub x_100: f64,
    /// Stoichiometry at 0 % SOC.
    pub x_0: f64,
}

impl ElectrodeParameters {
    pub fn validate(&self, name: &str) -> Result<()> {
        let positive = [
            ("L", self.thickness),
            ("R_s", self.particle_radius),
            ("D_s", self.solid_diffusivity),
            ("eps_s", self.eps_s),
            ("eps_e", self.eps_e),
            ("c_s_max", self.c_s_max),
            ("k_0", self.k0),
        ];
        for (field, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name}.{field} must be positive, got {v}")));
            }
        }
        if self.eps_s + self.eps_e > 1.0 {
            return Err(Error::Config(format!(
                "{name}: eps_s + eps_e = {} exceeds 1",
                self.eps_s + self.eps_e
            )));
        }
        for (field, v) in [("x_100", self.x_100), ("x_0", self.x_0)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name}.{field} must lie in (0,1), got {v}")));
            }
        }
        Ok(())
    }

    pub fn specific_area(&self) -> f64 {
        3.0 * self.eps_s / self.particle_radius
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellParameters {
    pub neg: ElectrodeParameters,
    pub pos: ElectrodeParameters,
    /// Electrode area, m^2.
    pub area: f64,
    /// Separator thickness, m.
    pub sep_thickness: f64,
    pub sep_eps_e: f64,
    /// Initial electrolyte concentration, mol/m^3.
    pub c_e0: f64,
    /// Cation transference number.
    pub t_plus: f64,
    /// Bulk electrolyte diffusivity, m^2/s.
    pub electrolyte_diffusivity: f64,
    /// Bulk electrolyte conductivity, S/m.
    pub electrolyte_conductivity: f64,
    pub bruggeman: f64,
    pub v_max: f64,
    pub v_min: f64,
    /// Nominal capacity, Ah.
    pub q_nominal: f64,
    /// Temperature, K.
    pub temperature: f64,
}

impl CellParameters {
    /// APR18650M1A LFP/graphite cell with the electrolyte transport defaults.
    pub fn lfp_graphite() -> Self {
        Self {
            neg: ElectrodeParameters {
                thickness: 3.5e-5,
                particle_radius: 1e-6,
                solid_diffusivity: 3.9e-14,
                eps_s: 0.54,
                eps_e: 0.40,
                c_s_max: 30555.0,
                k0: 3e-11,
                x_100: 0.795,
                x_0: 0.0018,
            },
            pos: ElectrodeParameters {
                thickness: 6e-5,
                particle_radius: 2e-6,
                solid_diffusivity: 8e-14,
                eps_s: 0.373,
                eps_e: 0.44,
                c_s_max: 22806.0,
                k0: 1.4e-12,
                x_100: 0.016,
                x_0: 0.89,
            },
            area: 0.087,
            sep_thickness: 2e-5,
            sep_eps_e: 0.54,
            c_e0: 1200.0,
            t_plus: 0.363,
            electrolyte_diffusivity: 2.5e-10,
            electrolyte_conductivity: 1.0,
            bruggeman: 1.5,
            v_max: 3.6,
            v_min: 2.0,
            q_nominal: 1.1,
            temperature: crate::constants::DEFAULT_TEMPERATURE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.neg.validate("neg")?;
        self.pos.validate("pos")?;
        let positive = [
            ("A", self.area),
            ("L_sep", self.sep_thickness),
            ("eps_e_sep", self.sep_eps_e),
            ("c_e0", self.c_e0),
            ("D_e", self.electrolyte_diffusivity),
            ("kappa", self.electrolyte_conductivity),
            ("brug", self.bruggeman),
            ("Q_nominal", self.q_nominal),
            ("T", self.temperature),
        ];
        for (field, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{field} must be positive, got {v}")));
            }
        }
        if !(self.t_plus >= 0.0 && self.t_plus < 1.0) {
            return Err(Error::Config(format!("t_c0 must lie in [0,1), got {}", self.t_plus)));
        }
        if !(self.v_min < self.v_max) {
            return Err(Error::Config(format!(
                "V_min ({}) must be below V_max ({})",
                self.v_min, self.v_max
            )));
        }
        Ok(())
    }

    pub fn constants(&self) -> PhysicalConstants {
        PhysicalConstants {
            temperature: self.temperature,
            ..PhysicalConstants::default()
        }
    }

    pub fn electrode(&self, e: Electrode) -> &ElectrodeParameters {
        match e {
            Electrode::Negative => &self.neg,
            Electrode::Positive => &self.pos,
        }
    }

    pub fn electrode_mut(&mut self, e: Electrode) -> &mut ElectrodeParameters {
        match e {
            Electrode::Negative => &mut self.neg,
            Electrode::Positive => &mut self.pos,
        }
    }

    /// Bruggeman-corrected electrolyte diffusivity for a region porosity.
    pub fn effective_diffusivity(&self, eps_e: f64) -> f64 {
        self.electrolyte_diffusivity * eps_e.powf(self.bruggeman)
    }

    pub fn effective_conductivity(&self, eps_e: f64) -> f64 {
        self.electrolyte_conductivity * eps_e.powf(self.bruggeman)
    }

    /// Constant discharge current for a C-rate relative to the nominal capacity, A.
    pub fn current_for_c_rate(&self, c_rate: f64) -> f64 {
        c_rate * self.q_nominal
    }

    /// Aging vector read back from the electrode parameters.
    pub fn aging(&self) -> AgingParameters {
        AgingParameters::new([
            self.neg.eps_s,
            self.pos.eps_s,
            self.neg.x_100,
            self.neg.x_0,
            self.pos.x_100,
            self.pos.x_0,
        ])
    }

    /// Copy of these parameters with the six aging components replaced.
    pub fn with_aging(&self, theta: &AgingParameters) -> Self {
        let mut p = self.clone();
        p.neg.eps_s = theta.eps_s_neg();
        p.pos.eps_s = theta.eps_s_pos();
        p.neg.x_100 = theta.x100_neg();
        p.neg.x_0 = theta.x0_neg();
        p.pos.x_100 = theta.x100_pos();
        p.pos.x_0 = theta.x0_pos();
        p
    }
}

impl Default for CellParameters {
    fn default() -> Self {
        Self::lfp_graphite()
    }
}

/// Names of the aging components, in vector order.
pub const AGING_NAMES: [&str; 6] = [
    "eps_s_neg",
    "eps_s_pos",
    "x100_neg",
    "x0_neg",
    "x100_pos",
    "x0_pos",
];

/// `[eps_s_neg, eps_s_pos, x100_neg, x0_neg, x100_pos, x0_pos]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgingParameters(pub [f64; 6]);

impl AgingParameters {
    pub const EPS_S_NEG: usize = 0;
    pub const EPS_S_POS: usize = 1;
    pub const X100_NEG: usize = 2;
    pub const X0_NEG: usize = 3;
    pub const X100_POS: usize = 4;
    pub const X0_POS: usize = 5;

    pub fn new(values: [f64; 6]) -> Self {
        Self(values)
    }

    pub fn fresh() -> Self {
        CellParameters::lfp_graphite().aging()
    }

    pub fn eps_s_neg(&self) -> f64 {
        self.0[Self::EPS_S_NEG]
    }
    pub fn eps_s_pos(&self) -> f64 {
        self.0[Self::EPS_S_POS]
    }
    pub fn x100_neg(&self) -> f64 {
        self.0[Self::X100_NEG]
    }
    pub fn x0_neg(&self) -> f64 {
        self.0[Self::X0_NEG]
    }
    pub fn x100_pos(&self) -> f64 {
        self.0[Self::X100_POS]
    }
    pub fn x0_pos(&self) -> f64 {
        self.0[Self::X0_POS]
    }

    pub fn as_array(&self) -> &[f64; 6] {
        &self.0
    }

    /// Components in (0,1) with the discharge stoichiometry ordering.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in AGING_NAMES.iter().zip(self.0) {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Domain(format!("{name} = {v} outside (0,1)")));
            }
        }
        if !(self.x100_neg() > self.x0_neg()) {
            return Err(Error::Domain("x100_neg must exceed x0_neg".into()));
        }
        if !(self.x0_pos() > self.x100_pos()) {
            return Err(Error::Domain("x0_pos must exceed x100_pos".into()));
        }
        Ok(())
    }
}

/// Box Ω of feasible aging parameters, one closed interval per component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgingRanges(pub [(f64, f64); 6]);

impl AgingRanges {
    /// Variation ranges used to build the simulation dataset.
    pub fn lfp_dataset() -> Self {
        Self([
            (0.45, 0.54),
            (0.34, 0.40),
            (0.68, 0.80),
            (0.0015, 0.002),
            (0.015, 0.016),
            (0.70, 0.90),
        ])
    }

    pub fn contains(&self, theta: &AgingParameters) -> bool {
        self.0
            .iter()
            .zip(theta.0)
            .all(|(&(lo, hi), v)| v >= lo && v <= hi)
    }

    pub fn midpoint(&self) -> AgingParameters {
        AgingParameters(self.0.map(|(lo, hi)| 0.5 * (lo + hi)))
    }
}

impl Default for AgingRanges {
    fn default() -> Self {
        Self::lfp_dataset()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        CellParameters::default().validate().unwrap();
        AgingParameters::fresh().validate().unwrap();
    }

    #[test]
    fn aging_round_trips_through_cell_parameters() {
        let theta = AgingParameters::new([0.5, 0.35, 0.7, 0.0016, 0.0155, 0.8]);
        let p = CellParameters::default().with_aging(&theta);
        assert_eq!(p.aging(), theta);
    }

    #[test]
    fn rejects_bad_ordering() {
        let theta = AgingParameters::new([0.5, 0.35, 0.001, 0.002, 0.0155, 0.8]);
        assert!(theta.validate().is_err());
    }

    #[test]
    fn rejects_inverted_cutoffs() {
        let mut p = CellParameters::default();
        p.v_min = 3.7;
        assert!(matches!(p.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn effective_transport_uses_bruggeman() {
        let p = CellParameters::default();
        let d = p.effective_diffusivity(0.4);
        assert!((d - 2.5e-10 * 0.4f64.powf(1.5)).abs() < 1e-24);
    }
}
