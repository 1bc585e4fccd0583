//! Physical constants shared by every electrochemical expression.

/// Faraday constant, C/mol.
pub const FARADAY: f64 = 96485.0;

/// Molar gas constant, J/(mol K).
pub const GAS_CONSTANT: f64 = 8.314;

/// Default isothermal operating temperature, K.
pub const DEFAULT_TEMPERATURE: f64 = 298.15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub faraday: f64,
    pub gas_constant: f64,
    pub temperature: f64,
}

impl PhysicalConstants {
    pub fn at_temperature(temperature: f64) -> crate::Result<Self> {
        if !(temperature > 0.0) || !temperature.is_finite() {
            return Err(crate::Error::Domain(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        Ok(Self {
            faraday: FARADAY,
            gas_constant: GAS_CONSTANT,
            temperature,
        })
    }

    /// Thermal voltage scale 2RT/F used by the symmetric Butler-Volmer law.
    pub fn two_rt_over_f(&self) -> f64 {
        2.0 * self.gas_constant * self.temperature / self.faraday
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            faraday: FARADAY,
            gas_constant: GAS_CONSTANT,
            temperature: DEFAULT_TEMPERATURE,
        }
    }
}
