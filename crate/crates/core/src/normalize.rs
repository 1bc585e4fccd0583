//! Min-max normalization of network inputs and outputs.

use std::collections::BTreeMap;

use crate::params::{AgingRanges, CellParameters, AGING_NAMES};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(max > min) || !min.is_finite() || !max.is_finite() {
            return Err(Error::Config(format!("degenerate normalization range [{min}, {max}]")));
        }
        Ok(Self { min, max })
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    /// No clamping: values outside the range map outside [0, 1].
    pub fn normalize(&self, z: f64) -> f64 {
        (z - self.min) / (self.max - self.min)
    }

    pub fn denormalize(&self, z: f64) -> f64 {
        self.min + z * (self.max - self.min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variable {
    Aging(usize),
    Current,
    Time,
    Voltage,
    CssNeg,
    CssPos,
    Ce0Neg,
    CeLPos,
}

impl Variable {
    pub const CONCENTRATIONS: [Variable; 4] = [Variable::CssNeg, Variable::CssPos, Variable::Ce0Neg, Variable::CeLPos];

    pub fn all() -> Vec<Variable> {
        let mut v: Vec<Variable> = (0..6).map(Variable::Aging).collect();
        v.extend([Variable::Current, Variable::Time, Variable::Voltage]);
        v.extend(Self::CONCENTRATIONS);
        v
    }

    pub fn key(&self) -> &'static str {
        match self {
            Variable::Aging(i) => AGING_NAMES[*i],
            Variable::Current => "current",
            Variable::Time => "time",
            Variable::Voltage => "voltage",
            Variable::CssNeg => "css_neg",
            Variable::CssPos => "css_pos",
            Variable::Ce0Neg => "ce0_neg",
            Variable::CeLPos => "ceL_pos",
        }
    }

    pub fn from_key(key: &str) -> Option<Variable> {
        Self::all().into_iter().find(|v| v.key() == key)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationSpec {
    ranges: BTreeMap<Variable, Range>,
}

impl NormalizationSpec {
    pub fn from_ranges(ranges: BTreeMap<Variable, Range>) -> Result<Self> {
        for v in Variable::all() {
            if !ranges.contains_key(&v) {
                return Err(Error::Config(format!("normalization spec is missing `{}`", v.key())));
            }
        }
        Ok(Self { ranges })
    }

    /// Ranges for a cell: aging box, current up to 6C, time over one nominal
    /// discharge at `c_rate`, voltage between the cutoffs, solid
    /// concentrations over [0, c_s_max] and electrolyte over [0, 2 c_e0].
    pub fn for_cell(params: &CellParameters, aging: &AgingRanges, c_rate: f64) -> Result<Self> {
        if !(c_rate > 0.0) {
            return Err(Error::Config(format!("c_rate must be positive, got {c_rate}")));
        }
        let mut ranges = BTreeMap::new();
        for (i, &(lo, hi)) in aging.0.iter().enumerate() {
            ranges.insert(Variable::Aging(i), Range::new(lo, hi)?);
        }
        ranges.insert(Variable::Current, Range::new(0.0, 6.0 * params.q_nominal)?);
        ranges.insert(Variable::Time, Range::new(0.0, 3600.0 / c_rate)?);
        ranges.insert(Variable::Voltage, Range::new(params.v_min, params.v_max)?);
        ranges.insert(Variable::CssNeg, Range::new(0.0, params.neg.c_s_max)?);
        ranges.insert(Variable::CssPos, Range::new(0.0, params.pos.c_s_max)?);
        ranges.insert(Variable::Ce0Neg, Range::new(0.0, 2.0 * params.c_e0)?);
        ranges.insert(Variable::CeLPos, Range::new(0.0, 2.0 * params.c_e0)?);
        Ok(Self { ranges })
    }

    pub fn range(&self, v: Variable) -> Range {
        self.ranges[&v]
    }

    pub fn normalize(&self, v: Variable, z: f64) -> f64 {
        self.range(v).normalize(z)
    }

    pub fn denormalize(&self, v: Variable, z: f64) -> f64 {
        self.range(v).denormalize(z)
    }

    pub fn normalize_aging(&self, theta: &[f64; 6]) -> [f64; 6] {
        std::array::from_fn(|i| self.normalize(Variable::Aging(i), theta[i]))
    }

    pub fn denormalize_aging(&self, theta: &[f64; 6]) -> [f64; 6] {
        std::array::from_fn(|i| self.denormalize(Variable::Aging(i), theta[i]))
    }

    /// `norm.<key> = <min>,<max>` lines, one per variable.
    pub fn to_lines(&self) -> Vec<String> {
        self.ranges
            .iter()
            .map(|(v, r)| format!("norm.{} = {},{}", v.key(), r.min, r.max))
            .collect()
    }

    pub fn from_lines<'a>(lines: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let mut ranges = BTreeMap::new();
        for line in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("malformed normalization line `{line}`")))?;
            let key = key.trim().strip_prefix("norm.").ok_or_else(|| Error::Config(format!("unexpected key `{key}`")))?;
            let var = Variable::from_key(key).ok_or_else(|| Error::Config(format!("unknown variable `{key}`")))?;
            let (lo, hi) = value
                .trim()
                .split_once(',')
                .ok_or_else(|| Error::Config(format!("expected `min,max` for `{key}`")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad number `{s}` for `{key}`")))
            };
            ranges.insert(var, Range::new(parse(lo)?, parse(hi)?)?);
        }
        Self::from_ranges(ranges)
    }
}
