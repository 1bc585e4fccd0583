//! One-dimensional electrolyte diffusion across negative electrode, separator
//! and positive electrode.

use super::tridiag;
use crate::constants::FARADAY;
use crate::params::CellParameters;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ElectrolyteGrid {
    /// Cell concentrations, negative current collector first, mol/m^3.
    pub c: Vec<f64>,
    /// Cell widths, m.
    pub widths: Vec<f64>,
    porosity: Vec<f64>,
    /// Source per unit applied current, mol/(m^3 s A).
    source_per_amp: Vec<f64>,
    /// Face conductances D/dx between neighbouring cells, m/s.
    face: Vec<f64>,
    cells_per_region: usize,
    area: f64,
}

impl ElectrolyteGrid {
    pub fn uniform(params: &CellParameters, cells_per_region: usize) -> Result<Self> {
        if cells_per_region < 2 {
            return Err(Error::Config(format!(
                "need at least 2 electrolyte cells per region, got {cells_per_region}"
            )));
        }
        let n = cells_per_region;
        let a = params.area;
        let regions = [
            (params.neg.thickness, params.neg.eps_e, 1.0 / (a * params.neg.thickness)),
            (params.sep_thickness, params.sep_eps_e, 0.0),
            (params.pos.thickness, params.pos.eps_e, -1.0 / (a * params.pos.thickness)),
        ];
        let mut widths = Vec::with_capacity(3 * n);
        let mut porosity = Vec::with_capacity(3 * n);
        let mut diffusivity = Vec::with_capacity(3 * n);
        let mut source_per_amp = Vec::with_capacity(3 * n);
        for (thickness, eps, j_per_amp) in regions {
            for _ in 0..n {
                widths.push(thickness / n as f64);
                porosity.push(eps);
                diffusivity.push(params.effective_diffusivity(eps));
                source_per_amp.push((1.0 - params.t_plus) * j_per_amp / FARADAY);
            }
        }
        let face = (0..3 * n - 1)
            .map(|i| {
                1.0 / (0.5 * widths[i] / diffusivity[i] + 0.5 * widths[i + 1] / diffusivity[i + 1])
            })
            .collect();
        Ok(Self {
            c: vec![params.c_e0; 3 * n],
            widths,
            porosity,
            source_per_amp,
            face,
            cells_per_region: n,
            area: a,
        })
    }

    /// Electrolyte lithium in the cell, mol.
    pub fn inventory(&self) -> f64 {
        self.area
            * self
                .c
                .iter()
                .zip(&self.widths)
                .zip(&self.porosity)
                .map(|((c, dx), eps)| eps * c * dx)
                .sum::<f64>()
    }

    /// Concentration at the negative current collector, x = 0.
    pub fn at_negative_collector(&self) -> f64 {
        (9.0 * self.c[0] - self.c[1]) / 8.0
    }

    /// Concentration at the positive current collector, x = L.
    pub fn at_positive_collector(&self) -> f64 {
        let n = self.c.len();
        (9.0 * self.c[n - 1] - self.c[n - 2]) / 8.0
    }

    pub fn cells_per_region(&self) -> usize {
        self.cells_per_region
    }

    pub fn step(&self, current: f64, dt: f64) -> Result<ElectrolyteGrid> {
        let mut next = self.clone();
        next.advance(current, dt)?;
        Ok(next)
    }

    pub(crate) fn advance(&mut self, current: f64, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
        let n = self.c.len();
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let m = self.porosity[i] * self.widths[i] / dt;
            diag[i] = m;
            rhs[i] = m * self.c[i] + self.widths[i] * self.source_per_amp[i] * current;
            if i > 0 {
                lower[i] = -self.face[i - 1];
                diag[i] += self.face[i - 1];
            }
            if i + 1 < n {
                upper[i] = -self.face[i];
                diag[i] += self.face[i];
            }
        }
        tridiag::solve(&lower, &diag, &upper, &mut rhs);
        self.c = rhs;
        if let Some((i, &c)) = self.c.iter().enumerate().find(|(_, &c)| !(c > 0.0)) {
            return Err(Error::Depletion(c, i));
        }
        let (c0, cl) = (self.at_negative_collector(), self.at_positive_collector());
        if !(c0 > 0.0) {
            return Err(Error::Depletion(c0, 0));
        }
        if !(cl > 0.0) {
            return Err(Error::Depletion(cl, n - 1));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rest_keeps_uniform_profile() {
        let p = CellParameters::default();
        let g = ElectrolyteGrid::uniform(&p, 20).unwrap();
        let next = g.step(0.0, 1.0).unwrap();
        for (a, b) in next.c.iter().zip(&g.c) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn lithium_is_conserved_under_load() {
        let p = CellParameters::default();
        let mut g = ElectrolyteGrid::uniform(&p, 20).unwrap();
        let m0 = g.inventory();
        for _ in 0..1000 {
            g.advance(4.4, 1.0).unwrap();
        }
        assert!(((g.inventory() - m0) / m0).abs() < 1e-6);
    }

    #[test]
    fn discharge_builds_gradient_toward_positive() {
        let p = CellParameters::default();
        let mut g = ElectrolyteGrid::uniform(&p, 20).unwrap();
        for _ in 0..2000 {
            g.advance(4.4, 1.0).unwrap();
        }
        assert!(g.at_negative_collector() > p.c_e0);
        assert!(g.at_positive_collector() < p.c_e0);
        // steady: another step barely moves the profile
        let next = g.step(4.4, 1.0).unwrap();
        let change = next.c.iter().zip(&g.c).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(change < 1e-3, "profile still moving by {change}");
    }

    #[test]
    fn collector_extrapolation_is_exact_for_even_quadratic() {
        let p = CellParameters::default();
        let mut g = ElectrolyteGrid::uniform(&p, 20).unwrap();
        let dx = g.widths[0];
        for (i, c) in g.c.iter_mut().enumerate().take(2) {
            let x = (i as f64 + 0.5) * dx;
            *c = 1000.0 + 3e12 * x * x;
        }
        assert!((g.at_negative_collector() - 1000.0).abs() < 1e-9);
    }
}
