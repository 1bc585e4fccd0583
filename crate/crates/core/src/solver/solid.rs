//! Spherical solid-phase diffusion on concentric finite-volume shells.

use super::tridiag;
use crate::constants::FARADAY;
use crate::params::{Electrode, ElectrodeParameters};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SolidGrid {
    /// Shell-average concentrations from the centre outwards, mol/m^3.
    pub c: Vec<f64>,
    /// Shell volumes divided by 4 pi, m^3.
    pub volumes: Vec<f64>,
    /// Areas of the outer faces divided by 4 pi, m^2.
    face_areas: Vec<f64>,
    dr: f64,
    radius: f64,
    diffusivity: f64,
    c_s_max: f64,
    electrode: Electrode,
}

impl SolidGrid {
    pub fn uniform(electrode: &ElectrodeParameters, which: Electrode, shells: usize, c_init: f64) -> Result<Self> {
        if shells < 2 {
            return Err(Error::Config(format!("need at least 2 radial shells, got {shells}")));
        }
        let radius = electrode.particle_radius;
        let dr = radius / shells as f64;
        let volumes = (0..shells)
            .map(|i| {
                let (r0, r1) = (i as f64 * dr, (i + 1) as f64 * dr);
                (r1.powi(3) - r0.powi(3)) / 3.0
            })
            .collect();
        let face_areas = (0..shells).map(|i| ((i + 1) as f64 * dr).powi(2)).collect();
        Ok(Self {
            c: vec![c_init; shells],
            volumes,
            face_areas,
            dr,
            radius,
            diffusivity: electrode.solid_diffusivity,
            c_s_max: electrode.c_s_max,
            electrode: which,
        })
    }

    /// Lithium held by the particle, mol / (4 pi).
    pub fn inventory(&self) -> f64 {
        self.c.iter().zip(&self.volumes).map(|(c, v)| c * v).sum()
    }

    /// Molar flux density into the particle at r = R, mol/(m^2 s).
    pub fn surface_influx(j: f64, a_s: f64) -> f64 {
        -j / (a_s * FARADAY)
    }

    /// Surface concentration extrapolated from the outer shell with the flux
    /// boundary condition D dc/dr = -j/(a_s F).
    pub fn surface_concentration(&self, j: f64, a_s: f64) -> f64 {
        let n = self.c.len();
        self.c[n - 1] + 0.5 * self.dr * Self::surface_influx(j, a_s) / self.diffusivity
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Backward-Euler step with zero flux at the centre and the reaction flux at the surface.
    pub fn step(&self, j: f64, a_s: f64, dt: f64) -> Result<SolidGrid> {
        let mut next = self.clone();
        next.advance(j, a_s, dt)?;
        Ok(next)
    }

    pub(crate) fn advance(&mut self, j: f64, a_s: f64, dt: f64) -> Result<()> {
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
        let n = self.c.len();
        let coef: Vec<f64> = (0..n - 1)
            .map(|i| self.diffusivity * self.face_areas[i] / self.dr)
            .collect();
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let m = self.volumes[i] / dt;
            diag[i] = m;
            rhs[i] = m * self.c[i];
            if i > 0 {
                lower[i] = -coef[i - 1];
                diag[i] += coef[i - 1];
            }
            if i + 1 < n {
                upper[i] = -coef[i];
                diag[i] += coef[i];
            }
        }
        rhs[n - 1] += self.face_areas[n - 1] * Self::surface_influx(j, a_s);
        tridiag::solve(&lower, &diag, &upper, &mut rhs);
        self.c = rhs;
        let css = self.surface_concentration(j, a_s);
        if !(css > 0.0 && css < self.c_s_max) || self.c.iter().any(|&c| !(c >= 0.0 && c <= self.c_s_max)) {
            return Err(Error::Saturation {
                electrode: self.electrode.label(),
                c_ss: css,
                c_s_max: self.c_s_max,
            });
        }
        Ok(())
    }
}
