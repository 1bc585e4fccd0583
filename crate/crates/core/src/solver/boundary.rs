//! Stoichiometry window closure from the cutoff voltages.

use crate::ocp::{OcpCurve, OcpPair};
use crate::params::{AgingParameters, CellParameters};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySolution {
    pub x0_neg: f64,
    pub x100_pos: f64,
    /// Relative mismatch between the lithium released by the negative
    /// window and the lithium accepted by the positive window.
    pub charge_imbalance: f64,
}

/// Solves the rest-voltage conditions U+(x100_pos) - U-(x100_neg) = V_max and
/// U+(x0_pos) - U-(x0_neg) = V_min for the two dependent boundaries.
///
/// Lithium balance between the two windows is reported, not imposed: with the
/// reference cell the two cutoff equations already pin both unknowns.
pub fn derive_boundary_stoichiometry(
    eps_s_neg: f64,
    eps_s_pos: f64,
    x100_neg: f64,
    x0_pos: f64,
    params: &CellParameters,
    ocps: &OcpPair,
) -> Result<BoundarySolution> {
    let target_pos = params.v_max + ocps.neg.eval(x100_neg);
    let x100_pos = invert(&ocps.pos, target_pos)
        .ok_or_else(|| Error::Infeasible(format!("U+(x100_pos) = {target_pos:.4} V has no root in (0,1)")))?;
    let target_neg = ocps.pos.eval(x0_pos) - params.v_min;
    let x0_neg = invert(&ocps.neg, target_neg)
        .ok_or_else(|| Error::Infeasible(format!("U-(x0_neg) = {target_neg:.4} V has no root in (0,1)")))?;
    if !(x0_neg < x100_neg) || !(x100_pos < x0_pos) {
        return Err(Error::Infeasible(format!(
            "derived window is empty: x_neg [{x0_neg}, {x100_neg}], x_pos [{x100_pos}, {x0_pos}]"
        )));
    }
    let released = eps_s_neg * params.neg.thickness * params.neg.c_s_max * (x100_neg - x0_neg);
    let accepted = eps_s_pos * params.pos.thickness * params.pos.c_s_max * (x0_pos - x100_pos);
    Ok(BoundarySolution {
        x0_neg,
        x100_pos,
        charge_imbalance: (released - accepted) / released,
    })
}

/// Full aging vector from the four independently sampled components
/// `[eps_s_neg, eps_s_pos, x100_neg, x0_pos]`.
pub fn complete_aging(sample: [f64; 4], params: &CellParameters, ocps: &OcpPair) -> Result<AgingParameters> {
    let [eps_neg, eps_pos, x100_neg, x0_pos] = sample;
    let b = derive_boundary_stoichiometry(eps_neg, eps_pos, x100_neg, x0_pos, params, ocps)?;
    let theta = AgingParameters::new([eps_neg, eps_pos, x100_neg, b.x0_neg, b.x100_pos, x0_pos]);
    theta.validate()?;
    Ok(theta)
}

/// Stoichiometry at which a curve reaches `target`, by bisection over the
/// tabulated range. `None` when the target is not bracketed.
fn invert(curve: &OcpCurve, target: f64) -> Option<f64> {
    let (xs, _) = curve.knots();
    let mut lo = xs[0].max(1e-9);
    let mut hi = xs[xs.len() - 1].min(1.0 - 1e-9);
    let f = |x: f64| curve.eval(x) - target;
    let (mut f_lo, f_hi) = (f(lo), f(hi));
    if f_lo == 0.0 {
        return Some(lo);
    }
    if f_hi == 0.0 {
        return Some(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Some(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}
