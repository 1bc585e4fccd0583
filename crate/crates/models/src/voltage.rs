//! The SPMe terminal-voltage law recorded on an autodiff tape.

use cellhealth_core::kinetics::electrolyte_resistance;
use cellhealth_core::{CellParameters, Electrode, NormalizationSpec, OcpCurve, OcpPair, Variable};
use cellhealth_nn::{Tape, Tensor, Var};

use crate::Result;

/// Surface stoichiometries are clamped this far inside (0, 1).
pub const STOICHIOMETRY_MARGIN: f64 = 1e-3;
/// Floor for electrolyte concentrations entering logarithms and roots, mol/m^3.
pub const ELECTROLYTE_FLOOR: f64 = 1.0;

/// Cell data needed to turn predicted concentrations into a voltage.
#[derive(Debug, Clone)]
pub struct VoltageModel {
    pub params: CellParameters,
    pub ocps: OcpPair,
    pub spec: NormalizationSpec,
}

/// Tape output of [`VoltageModel::voltage_tape`].
#[derive(Debug, Clone, Copy)]
pub struct TapedVoltage {
    /// Terminal voltage per row, V, shape `[N, 1]`.
    pub volts: Var,
    /// Rows whose state was clamped; their clamped inputs carry no gradient.
    pub clamped: usize,
}

fn clamp(tape: &mut Tape, x: Var, lo: f64, hi: f64, count: &mut usize) -> Var {
    *count += tape
        .value(x)
        .data()
        .iter()
        .filter(|v| !(**v >= lo && **v <= hi))
        .count();
    tape.map(x, |v| {
        if v < lo || v.is_nan() {
            (lo, 0.0)
        } else if v > hi {
            (hi, 0.0)
        } else {
            (v, 1.0)
        }
    })
}

fn ocp(tape: &mut Tape, x: Var, curve: &OcpCurve) -> Var {
    tape.map(x, |v| curve.eval_with_slope(v))
}

impl VoltageModel {
    pub fn new(params: CellParameters, ocps: OcpPair, spec: NormalizationSpec) -> Self {
        Self { params, ocps, spec }
    }

    /// `asinh(j / (2 a_s i0))` for one electrode, with `i0 / (F k0 c_max)`
    /// written as `sqrt(c_e) sqrt(x (1 - x))`.
    fn overpotential(
        &self,
        tape: &mut Tape,
        electrode: Electrode,
        x: Var,
        c_e: Var,
        eps_s: Var,
        current: &[f64],
    ) -> Result<Var> {
        let p = self.params.electrode(electrode);
        let k = self.params.constants();
        let root_x = tape.map(x, |v| {
            let r = (v * (1.0 - v)).sqrt();
            (r, (1.0 - 2.0 * v) / (2.0 * r))
        });
        let root_c = tape.map(c_e, |v| (v.sqrt(), 0.5 / v.sqrt()));
        let g = tape.mul(root_x, root_c)?;
        let denom = tape.mul(eps_s, g)?;
        // j / (2 a_s i0) with a_s = 3 eps_s / R_s and j = sign I / (A L)
        let scale = p.particle_radius / (6.0 * k.faraday * p.k0 * p.c_s_max * self.params.area * p.thickness);
        let numer = tape.constant(Tensor::column(
            current.iter().map(|i| electrode.current_sign() * i * scale).collect(),
        ));
        let arg = tape.div(numer, denom)?;
        let asinh = tape.map(arg, |v| (v.asinh(), 1.0 / (1.0 + v * v).sqrt()));
        Ok(tape.scale(asinh, k.two_rt_over_f()))
    }

    /// Terminal voltage from the four normalized surrogate outputs, each
    /// `[N, 1]`, the active-material fractions per row and the applied current.
    pub fn voltage_tape(
        &self,
        tape: &mut Tape,
        conc: [Var; 4],
        eps_neg: Var,
        eps_pos: Var,
        current: &[f64],
    ) -> Result<TapedVoltage> {
        let mut clamped = 0;
        let (neg, pos) = (&self.params.neg, &self.params.pos);
        let to_x = |tape: &mut Tape, y: Var, var: Variable, c_max: f64| {
            let r = self.spec.range(var);
            let c = tape.scale(y, r.width() / c_max);
            tape.offset(c, r.min / c_max)
        };
        let to_c = |tape: &mut Tape, y: Var, var: Variable| {
            let r = self.spec.range(var);
            let c = tape.scale(y, r.width());
            tape.offset(c, r.min)
        };
        let (lo, hi) = (STOICHIOMETRY_MARGIN, 1.0 - STOICHIOMETRY_MARGIN);
        let x_neg = to_x(tape, conc[0], Variable::CssNeg, neg.c_s_max);
        let x_neg = clamp(tape, x_neg, lo, hi, &mut clamped);
        let x_pos = to_x(tape, conc[1], Variable::CssPos, pos.c_s_max);
        let x_pos = clamp(tape, x_pos, lo, hi, &mut clamped);
        let ce0 = to_c(tape, conc[2], Variable::Ce0Neg);
        let ce0 = clamp(tape, ce0, ELECTROLYTE_FLOOR, f64::INFINITY, &mut clamped);
        let cel = to_c(tape, conc[3], Variable::CeLPos);
        let cel = clamp(tape, cel, ELECTROLYTE_FLOOR, f64::INFINITY, &mut clamped);

        let u_pos = ocp(tape, x_pos, &self.ocps.pos);
        let u_neg = ocp(tape, x_neg, &self.ocps.neg);
        let mut v = tape.sub(u_pos, u_neg)?;
        let eta_pos = self.overpotential(tape, Electrode::Positive, x_pos, cel, eps_pos, current)?;
        let eta_neg = self.overpotential(tape, Electrode::Negative, x_neg, ce0, eps_neg, current)?;
        v = tape.add(v, eta_pos)?;
        v = tape.sub(v, eta_neg)?;

        let k = self.params.constants();
        let ln_l = tape.map(cel, |c| (c.ln(), 1.0 / c));
        let ln_0 = tape.map(ce0, |c| (c.ln(), 1.0 / c));
        let ln_ratio = tape.sub(ln_l, ln_0)?;
        let diffusion = tape.scale(ln_ratio, k.two_rt_over_f() * (1.0 - self.params.t_plus));
        v = tape.add(v, diffusion)?;
        let r = electrolyte_resistance(&self.params) / self.params.area;
        let ohmic = tape.constant(Tensor::column(current.iter().map(|i| -r * i).collect()));
        v = tape.add(v, ohmic)?;
        Ok(TapedVoltage { volts: v, clamped })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cellhealth_core::{terminal_voltage, AgingParameters, AgingRanges, BoundaryState};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model() -> VoltageModel {
        let p = CellParameters::default();
        let spec = NormalizationSpec::for_cell(&p, &AgingRanges::default(), 4.0).unwrap();
        VoltageModel::new(p, OcpPair::default(), spec)
    }

    /// Random interior states as normalized outputs, eps_s values and currents.
    fn states(n: usize, seed: u64) -> (Vec<[f64; 4]>, Vec<(f64, f64)>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = (0..n)
            .map(|_| {
                [
                    rng.gen_range(0.01..0.95),
                    rng.gen_range(0.05..0.95),
                    rng.gen_range(0.3..0.7),
                    rng.gen_range(0.3..0.7),
                ]
            })
            .collect();
        let eps = (0..n).map(|_| (rng.gen_range(0.45..0.54), rng.gen_range(0.34..0.40))).collect();
        let cur = (0..n).map(|_| rng.gen_range(0.0..6.6)).collect();
        (y, eps, cur)
    }

    fn taped(m: &VoltageModel, y: &[[f64; 4]], eps: &[(f64, f64)], cur: &[f64]) -> (Tape, [Var; 4], Var, Var, TapedVoltage) {
        let mut tape = Tape::new();
        let conc: [Var; 4] = std::array::from_fn(|k| tape.leaf(Tensor::column(y.iter().map(|r| r[k]).collect())));
        let en = tape.leaf(Tensor::column(eps.iter().map(|e| e.0).collect()));
        let ep = tape.leaf(Tensor::column(eps.iter().map(|e| e.1).collect()));
        let v = m.voltage_tape(&mut tape, conc, en, ep, cur).unwrap();
        (tape, conc, en, ep, v)
    }

    #[test]
    fn matches_the_scalar_voltage_law() {
        let m = model();
        let (y, eps, cur) = states(200, 1);
        let (tape, _, _, _, v) = taped(&m, &y, &eps, &cur);
        assert_eq!(v.clamped, 0);
        let p = &m.params;
        for i in 0..y.len() {
            let state = BoundaryState {
                c_ss_neg: y[i][0] * p.neg.c_s_max,
                c_ss_pos: y[i][1] * p.pos.c_s_max,
                c_e_neg0: y[i][2] * 2.0 * p.c_e0,
                c_e_pos_l: y[i][3] * 2.0 * p.c_e0,
            };
            let mut theta = AgingParameters::fresh();
            theta.0[0] = eps[i].0;
            theta.0[1] = eps[i].1;
            let expect = terminal_voltage(&state, &theta, cur[i], p, &m.ocps.neg, &m.ocps.pos).unwrap();
            let got = tape.value(v.volts).data()[i];
            assert!((got - expect).abs() < 1e-10, "row {i}: {got} vs {expect}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let m = model();
        let (y, eps, cur) = states(30, 2);
        let (mut tape, conc, en, ep, v) = taped(&m, &y, &eps, &cur);
        // rows are independent, so the gradient of the sum holds each row's derivatives
        let s = tape.sum(v.volts);
        let grads = tape.backward(s).unwrap();
        let inputs: Vec<Var> = conc.iter().copied().chain([en, ep]).collect();
        let h = 1e-7;
        for i in 0..y.len() {
            for (k, &var) in inputs.iter().enumerate() {
                let ad = grads.get(var).unwrap().data()[i];
                let eval = |d: f64| {
                    let (mut yy, mut ee) = (y[i], eps[i]);
                    match k {
                        0..=3 => yy[k] += d,
                        4 => ee.0 += d,
                        _ => ee.1 += d,
                    }
                    let (t, _, _, _, vv) = taped(&m, &[yy], &[ee], &cur[i..=i]);
                    t.value(vv.volts).data()[0]
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                let err = (fd - ad).abs() / fd.abs().max(ad.abs()).max(1e-3);
                assert!(err < 1e-5, "row {i} input {k}: fd {fd} vs ad {ad}");
            }
        }
    }

    #[test]
    fn saturated_states_are_clamped_and_flagged() {
        let m = model();
        let (tape, conc, _, _, v) = taped(&m, &[[1.2, 0.5, 0.5, 0.5]], &[(0.5, 0.37)], &[4.4]);
        assert_eq!(v.clamped, 1);
        assert!(tape.value(v.volts).is_finite());
        let mut tape = tape;
        let s = tape.sum(v.volts);
        let grads = tape.backward(s).unwrap();
        assert_eq!(grads.get(conc[0]).unwrap().data()[0], 0.0);
    }
}
