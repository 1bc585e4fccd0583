//! Interfacial kinetics, electrolyte potential and the terminal-voltage law.

use crate::constants::PhysicalConstants;
use crate::ocp::OcpCurve;
use crate::params::{AgingParameters, CellParameters, Electrode};
use crate::{Error, Result};

/// Specific interfacial area of spherical particles, 1/m.
pub fn specific_interfacial_area(eps_s: f64, particle_radius: f64) -> Result<f64> {
    if !(eps_s > 0.0) || !(particle_radius > 0.0) {
        return Err(Error::Domain(format!(
            "specific area needs eps_s > 0 and R_s > 0 (got {eps_s}, {particle_radius})"
        )));
    }
    Ok(3.0 * eps_s / particle_radius)
}

/// Uniform volumetric reaction current density, A/m^3.
///
/// Positive current is discharge: the negative electrode carries `+I/(A L)`.
pub fn volumetric_current_density(current: f64, area: f64, thickness: f64, electrode: Electrode) -> f64 {
    electrode.current_sign() * current / (area * thickness)
}

/// Exchange current density, A/m^2.
pub fn exchange_current_density(k0: f64, c_e: f64, c_ss: f64, c_s_max: f64, electrode: Electrode) -> Result<f64> {
    if !(c_ss > 0.0 && c_ss < c_s_max) {
        return Err(Error::Saturation {
            electrode: electrode.label(),
            c_ss,
            c_s_max,
        });
    }
    if !(c_e > 0.0) {
        return Err(Error::Domain(format!("electrolyte concentration must be positive, got {c_e}")));
    }
    Ok(crate::constants::FARADAY * k0 * (c_e * (c_s_max - c_ss) * c_ss).sqrt())
}

/// Symmetric Butler-Volmer overpotential, V.
pub fn overpotential(j: f64, a_s: f64, i0: f64, constants: &PhysicalConstants) -> Result<f64> {
    if !(a_s > 0.0) || !(i0 > 0.0) {
        return Err(Error::Domain(format!("overpotential needs a_s, i0 > 0 (got {a_s}, {i0})")));
    }
    Ok(constants.two_rt_over_f() * (j / (2.0 * a_s * i0)).asinh())
}

/// Lumped ohmic resistance of the electrolyte path, ohm m^2.
pub fn electrolyte_resistance(params: &CellParameters) -> f64 {
    params.pos.thickness / (2.0 * params.effective_conductivity(params.pos.eps_e))
        + params.sep_thickness / params.effective_conductivity(params.sep_eps_e)
        + params.neg.thickness / (2.0 * params.effective_conductivity(params.neg.eps_e))
}

/// Liquid-phase potential difference phi_e(L) - phi_e(0), V.
pub fn electrolyte_potential_drop(current: f64, params: &CellParameters, c_e_pos_l: f64, c_e_neg_0: f64) -> Result<f64> {
    if !(c_e_pos_l > 0.0) || !(c_e_neg_0 > 0.0) {
        return Err(Error::Domain(format!(
            "electrolyte concentrations must be positive (got {c_e_pos_l}, {c_e_neg_0})"
        )));
    }
    let k = params.constants();
    let ohmic = -electrolyte_resistance(params) * current / params.area;
    let diffusion = k.two_rt_over_f() * (1.0 - params.t_plus) * (c_e_pos_l / c_e_neg_0).ln();
    Ok(ohmic + diffusion)
}

/// The four boundary concentrations that enter the terminal voltage, mol/m^3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryState {
    pub c_ss_neg: f64,
    pub c_ss_pos: f64,
    pub c_e_neg0: f64,
    pub c_e_pos_l: f64,
}

/// Individual contributions to the terminal voltage, V.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoltageTerms {
    pub ocp_pos: f64,
    pub ocp_neg: f64,
    pub eta_pos: f64,
    pub eta_neg: f64,
    pub electrolyte: f64,
}

impl VoltageTerms {
    pub fn total(&self) -> f64 {
        self.ocp_pos - self.ocp_neg + self.eta_pos - self.eta_neg + self.electrolyte
    }
}

pub fn voltage_terms(
    state: &BoundaryState,
    theta: &AgingParameters,
    current: f64,
    params: &CellParameters,
    ocp_neg: &OcpCurve,
    ocp_pos: &OcpCurve,
) -> Result<VoltageTerms> {
    let k = params.constants();
    let (neg, pos) = (&params.neg, &params.pos);
    let a_neg = specific_interfacial_area(theta.eps_s_neg(), neg.particle_radius)?;
    let a_pos = specific_interfacial_area(theta.eps_s_pos(), pos.particle_radius)?;
    let j_neg = volumetric_current_density(current, params.area, neg.thickness, Electrode::Negative);
    let j_pos = volumetric_current_density(current, params.area, pos.thickness, Electrode::Positive);
    let i0_neg = exchange_current_density(neg.k0, state.c_e_neg0, state.c_ss_neg, neg.c_s_max, Electrode::Negative)?;
    let i0_pos = exchange_current_density(pos.k0, state.c_e_pos_l, state.c_ss_pos, pos.c_s_max, Electrode::Positive)?;
    Ok(VoltageTerms {
        ocp_pos: ocp_pos.eval(state.c_ss_pos / pos.c_s_max),
        ocp_neg: ocp_neg.eval(state.c_ss_neg / neg.c_s_max),
        eta_pos: overpotential(j_pos, a_pos, i0_pos, &k)?,
        eta_neg: overpotential(j_neg, a_neg, i0_neg, &k)?,
        electrolyte: electrolyte_potential_drop(current, params, state.c_e_pos_l, state.c_e_neg0)?,
    })
}

/// Terminal voltage of the SPMe for the given boundary state, V.
pub fn terminal_voltage(
    state: &BoundaryState,
    theta: &AgingParameters,
    current: f64,
    params: &CellParameters,
    ocp_neg: &OcpCurve,
    ocp_pos: &OcpCurve,
) -> Result<f64> {
    voltage_terms(state, theta, current, params, ocp_neg, ocp_pos).map(|t| t.total())
}

/// Zero-current voltage U+(x_pos) - U-(x_neg).
pub fn rest_voltage(x_neg: f64, x_pos: f64, ocp_neg: &OcpCurve, ocp_pos: &OcpCurve) -> f64 {
    ocp_pos.eval(x_pos) - ocp_neg.eval(x_neg)
}
