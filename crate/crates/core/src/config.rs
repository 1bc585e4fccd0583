//! Flat `key = value` configuration text.
//!
//! Files are parsed as TOML, so dotted keys such as `neg.eps_s = 0.54` and
//! `#` comments work as expected; every value is flattened back to its full
//! dotted key. Serialization writes one sorted `key = value` line per entry.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::params::{CellParameters, ElectrodeParameters};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigValue {
    Float(f64),
    Int(i64),
    Text(String),
    Bool(bool),
}

impl fmt::Display for ConfigValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            // keep a decimal point or exponent so the value reads back as a float
            ConfigValue::Float(v) => {
                let s = format!("{v:?}");
                f.write_str(&s)
            }
            ConfigValue::Int(v) => write!(f, "{v}"),
            ConfigValue::Text(s) => write!(f, "{s:?}"),
            ConfigValue::Bool(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvConfig {
    entries: BTreeMap<String, ConfigValue>,
}

impl KvConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].lines().count().max(1))
                .unwrap_or(0);
            Error::Parse {
                path: "<config>".into(),
                line,
                msg: e.message().to_string(),
            }
        })?;
        let mut cfg = Self::new();
        flatten("", &toml::Value::Table(table), &mut cfg.entries)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse { line, msg, .. } => Error::Parse {
                path: path.to_path_buf(),
                line,
                msg,
            },
            other => other,
        })
    }

    pub fn set(&mut self, key: &str, value: ConfigValue) {
        self.entries.insert(key.to_string(), value);
    }

    pub fn set_f64(&mut self, key: &str, value: f64) {
        self.set(key, ConfigValue::Float(value));
    }

    pub fn set_int(&mut self, key: &str, value: i64) {
        self.set(key, ConfigValue::Int(value));
    }

    pub fn get(&self, key: &str) -> Option<&ConfigValue> {
        self.entries.get(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Entries of `other` override entries of `self`.
    pub fn merged(&self, other: &KvConfig) -> KvConfig {
        let mut out = self.clone();
        for (k, v) in &other.entries {
            out.entries.insert(k.clone(), v.clone());
        }
        out
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.entries.get(key) {
            None => Ok(default),
            Some(ConfigValue::Float(v)) => Ok(*v),
            Some(ConfigValue::Int(v)) => Ok(*v as f64),
            Some(other) => Err(Error::Config(format!("`{key}` must be numeric, got {other}"))),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.entries.get(key) {
            None => Ok(default),
            Some(ConfigValue::Int(v)) if *v >= 0 => Ok(*v as u64),
            Some(other) => Err(Error::Config(format!("`{key}` must be a non-negative integer, got {other}"))),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        self.u64_or(key, default as u64).map(|v| v as usize)
    }

    pub fn str_or(&self, key: &str, default: &str) -> Result<String> {
        match self.entries.get(key) {
            None => Ok(default.to_string()),
            Some(ConfigValue::Text(s)) => Ok(s.clone()),
            Some(other) => Err(Error::Config(format!("`{key}` must be a string, got {other}"))),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.entries.get(key) {
            None => Ok(default),
            Some(ConfigValue::Bool(b)) => Ok(*b),
            Some(other) => Err(Error::Config(format!("`{key}` must be true or false, got {other}"))),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut BTreeMap<String, ConfigValue>) -> Result<()> {
    let v = match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out)?;
            }
            return Ok(());
        }
        toml::Value::Float(f) => ConfigValue::Float(*f),
        toml::Value::Integer(i) => ConfigValue::Int(*i),
        toml::Value::String(s) => ConfigValue::Text(s.clone()),
        toml::Value::Boolean(b) => ConfigValue::Bool(*b),
        other => return Err(Error::Config(format!("unsupported value for `{prefix}`: {other}"))),
    };
    out.insert(prefix.to_string(), v);
    Ok(())
}

fn electrode_keys(prefix: &str, e: &ElectrodeParameters, cfg: &mut KvConfig) {
    let fields = [
        ("L", e.thickness),
        ("R_s", e.particle_radius),
        ("D_s", e.solid_diffusivity),
        ("eps_s", e.eps_s),
        ("eps_e", e.eps_e),
        ("c_s_max", e.c_s_max),
        ("k_0", e.k0),
        ("x_100", e.x_100),
        ("x_0", e.x_0),
    ];
    for (k, v) in fields {
        cfg.set_f64(&format!("{prefix}.{k}"), v);
    }
}

fn read_electrode(prefix: &str, base: &ElectrodeParameters, cfg: &KvConfig) -> Result<ElectrodeParameters> {
    let g = |k: &str, d: f64| cfg.f64_or(&format!("{prefix}.{k}"), d);
    Ok(ElectrodeParameters {
        thickness: g("L", base.thickness)?,
        particle_radius: g("R_s", base.particle_radius)?,
        solid_diffusivity: g("D_s", base.solid_diffusivity)?,
        eps_s: g("eps_s", base.eps_s)?,
        eps_e: g("eps_e", base.eps_e)?,
        c_s_max: g("c_s_max", base.c_s_max)?,
        k0: g("k_0", base.k0)?,
        x_100: g("x_100", base.x_100)?,
        x_0: g("x_0", base.x_0)?,
    })
}

impl CellParameters {
    /// Every cell parameter as a config entry.
    pub fn write_config(&self, cfg: &mut KvConfig) {
        electrode_keys("neg", &self.neg, cfg);
        electrode_keys("pos", &self.pos, cfg);
        cfg.set_f64("A", self.area);
        cfg.set_f64("L_sep", self.sep_thickness);
        cfg.set_f64("eps_e_sep", self.sep_eps_e);
        cfg.set_f64("c_e0", self.c_e0);
        cfg.set_f64("t_c0", self.t_plus);
        cfg.set_f64("D_e", self.electrolyte_diffusivity);
        cfg.set_f64("kappa", self.electrolyte_conductivity);
        cfg.set_f64("brug", self.bruggeman);
        cfg.set_f64("V_max", self.v_max);
        cfg.set_f64("V_min", self.v_min);
        cfg.set_f64("Q_nominal", self.q_nominal);
        cfg.set_f64("T", self.temperature);
    }

    /// Parameters from a config, falling back to the built-in cell for absent keys.
    pub fn from_config(cfg: &KvConfig) -> Result<Self> {
        let base = CellParameters::lfp_graphite();
        let p = CellParameters {
            neg: read_electrode("neg", &base.neg, cfg)?,
            pos: read_electrode("pos", &base.pos, cfg)?,
            area: cfg.f64_or("A", base.area)?,
            sep_thickness: cfg.f64_or("L_sep", base.sep_thickness)?,
            sep_eps_e: cfg.f64_or("eps_e_sep", base.sep_eps_e)?,
            c_e0: cfg.f64_or("c_e0", base.c_e0)?,
            t_plus: cfg.f64_or("t_c0", base.t_plus)?,
            electrolyte_diffusivity: cfg.f64_or("D_e", base.electrolyte_diffusivity)?,
            electrolyte_conductivity: cfg.f64_or("kappa", base.electrolyte_conductivity)?,
            bruggeman: cfg.f64_or("brug", base.bruggeman)?,
            v_max: cfg.f64_or("V_max", base.v_max)?,
            v_min: cfg.f64_or("V_min", base.v_min)?,
            q_nominal: cfg.f64_or("Q_nominal", base.q_nominal)?,
            temperature: cfg.f64_or("T", base.temperature)?,
        };
        p.validate()?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_dotted_keys_and_comments() {
        let cfg = KvConfig::parse("# cell\nneg.eps_s = 0.5\nA = 0.09 # m2\ndataset.n = 20\n").unwrap();
        assert_eq!(cfg.f64_or("neg.eps_s", 0.0).unwrap(), 0.5);
        assert_eq!(cfg.f64_or("A", 0.0).unwrap(), 0.09);
        assert_eq!(cfg.usize_or("dataset.n", 0).unwrap(), 20);
        let p = CellParameters::from_config(&cfg).unwrap();
        assert_eq!(p.neg.eps_s, 0.5);
        assert_eq!(p.pos.eps_s, 0.373);
    }

    #[test]
    fn cell_parameters_round_trip_through_text() {
        let p = CellParameters::default();
        let mut cfg = KvConfig::new();
        p.write_config(&mut cfg);
        let text = cfg.to_text();
        assert!(text.contains("neg.eps_s = 0.54\n"));
        let back = CellParameters::from_config(&KvConfig::parse(&text).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn invalid_value_is_reported() {
        let cfg = KvConfig::parse("V_min = 4.0\n").unwrap();
        assert!(matches!(CellParameters::from_config(&cfg), Err(Error::Config(_))));
        let err = KvConfig::parse("a = 1\nb = = 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }
}
