//! TOML pair files.
//!
//! ```toml
//! [interval]
//! r = 4.0
//! r_included = true          # l = 0 unless given; l = -inf is allowed
//!
//! [scale]
//! segments = [
//!   { x0 = 0.0, x1 = 2.0, kind = "affine", params = [0.0, 1.0] },   # s = c0 + c1·x
//!   { x0 = 2.0, x1 = 4.0, kind = "affine", params = [0.5, 1.0] },
//! ]
//! jumps = [{ x = 2.0, left = 2.0, value = 2.25, right = 2.5 }]
//! flats = []                  # (a, b, value); same as kind = "flat"
//!
//! [measure]
//! atoms = [{ x = 0.4, mass = 0.6 }]
//! densities = [{ x0 = 0.0, x1 = 4.0, coeffs = [1.0] }]            # poly in x − x0
//! geometric = []              # start, gap, ratio, mass, mass_ratio, first
//!
//! [options]                   # all optional
//! base = 1.0
//! allow_left_atom = false
//! relaxed = false
//! stilde_policy = "left"
//! ```
//!
//! Numbers are written with the shortest decimal text that parses back to
//! the same double, so writing a parsed pair and reading it again gives the
//! identical pair.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measure::{Atom, Density, DensityPiece, GeometricAtoms, Interval, MeasureError, SpeedMeasure};
use crate::pair::{validate_pair, PairError, PairOptions, QuasiPair, StildePolicy};
use crate::scale::{Jump, ScaleError, ScaleFunction, Segment};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse pair file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot write pair file: {0}")]
    Write(#[from] toml::ser::Error),
    #[error("segment ({x0}, {x1}): {msg}")]
    Segment { x0: f64, x1: f64, msg: String },
    #[error("density piece ({x0}, {x1}) needs exactly one of `coeffs` or `power`")]
    Density { x0: f64, x1: f64 },
    #[error(transparent)]
    Scale(#[from] ScaleError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Pair(#[from] PairError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    pub interval: IntervalConfig,
    pub scale: ScaleConfig,
    #[serde(default)]
    pub measure: MeasureConfig,
    #[serde(default, skip_serializing_if = "OptionsConfig::is_default")]
    pub options: OptionsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalConfig {
    #[serde(default, skip_serializing_if = "is_zero")]
    pub l: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_included: Option<bool>,
    pub r: f64,
    #[serde(default)]
    pub r_included: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentConfig {
    pub x0: f64,
    pub x1: f64,
    pub kind: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlatConfig {
    pub a: f64,
    pub b: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleConfig {
    pub segments: Vec<SegmentConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub jumps: Vec<Jump<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flats: Vec<FlatConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerConfig {
    pub coeff: f64,
    pub center: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    pub x0: f64,
    pub x1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<PowerConfig>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<Atom<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub densities: Vec<DensityConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub geometric: Vec<GeometricAtoms<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<f64>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub allow_left_atom: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub relaxed: bool,
    #[serde(default, skip_serializing_if = "is_left")]
    pub stilde_policy: StildePolicy,
}

impl OptionsConfig {
    fn is_default(&self) -> bool {
        *self == Self::default()
    }
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0 && x.is_sign_positive()
}

fn is_false(b: &bool) -> bool {
    !*b
}

fn is_left(p: &StildePolicy) -> bool {
    *p == StildePolicy::Left
}

impl PairConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    /// Builds and validates the pair.
    pub fn to_pair(&self) -> Result<QuasiPair<f64>, ConfigError> {
        let iv = &self.interval;
        let interval = Interval {
            left: iv.l,
            left_included: iv.l_included.unwrap_or(iv.l.is_finite()) && iv.l.is_finite(),
            right: iv.r,
            right_included: iv.r_included && iv.r.is_finite(),
        };
        let mut segments = Vec::with_capacity(self.scale.segments.len() + self.scale.flats.len());
        for s in &self.scale.segments {
            let bad = |msg: &str| ConfigError::Segment { x0: s.x0, x1: s.x1, msg: msg.to_string() };
            let seg = match (s.kind.as_str(), s.params.as_slice()) {
                ("affine", [c0, c1]) => Segment::affine(s.x0, s.x1, *c0, *c1),
                ("identity", []) => Segment::affine(s.x0, s.x1, 0.0, 1.0),
                ("flat", [v]) => Segment::flat(s.x0, s.x1, *v),
                ("affine", _) => return Err(bad("affine takes params [c0, c1]")),
                ("flat", _) => return Err(bad("flat takes params [value]")),
                ("identity", _) => return Err(bad("identity takes no params")),
                (k, _) => return Err(bad(&format!("unknown kind {k:?} (affine, flat, identity)"))),
            };
            segments.push(seg);
        }
        segments.extend(self.scale.flats.iter().map(|f| Segment::flat(f.a, f.b, f.value)));
        let scale = ScaleFunction::new(segments, self.scale.jumps.clone())?;
        let mut pieces = Vec::with_capacity(self.measure.densities.len());
        for d in &self.measure.densities {
            let density = match (&d.coeffs, &d.power) {
                (Some(c), None) => Density::Poly(c.clone()),
                (None, Some(p)) => Density::Power { coeff: p.coeff, center: p.center, exponent: p.exponent },
                _ => return Err(ConfigError::Density { x0: d.x0, x1: d.x1 }),
            };
            pieces.push(DensityPiece { x0: d.x0, x1: d.x1, density });
        }
        let measure = SpeedMeasure::new(interval, self.measure.atoms.clone(), pieces, self.measure.geometric.clone())?;
        let opts = PairOptions {
            allow_left_atom: self.options.allow_left_atom,
            relaxed_support: self.options.relaxed,
            base: self.options.base,
            stilde_policy: self.options.stilde_policy,
        };
        Ok(validate_pair(scale, measure, opts)?)
    }

    /// Canonical configuration of a validated pair.
    pub fn from_pair(pair: &QuasiPair<f64>) -> Self {
        let m = pair.measure();
        let iv = m.interval;
        let mut segments = Vec::new();
        let mut flats = Vec::new();
        for s in pair.scale().segments() {
            if s.is_flat() {
                flats.push(FlatConfig { a: s.x0, b: s.x1, value: s.c0 });
            } else {
                segments.push(SegmentConfig { x0: s.x0, x1: s.x1, kind: "affine".into(), params: vec![s.c0, s.c1] });
            }
        }
        let densities = m
            .densities()
            .iter()
            .map(|p| match &p.density {
                Density::Poly(c) => DensityConfig { x0: p.x0, x1: p.x1, coeffs: Some(c.clone()), power: None },
                Density::Power { coeff, center, exponent } => DensityConfig {
                    x0: p.x0,
                    x1: p.x1,
                    coeffs: None,
                    power: Some(PowerConfig { coeff: *coeff, center: *center, exponent: *exponent }),
                },
            })
            .collect();
        let o = pair.options();
        Self {
            interval: IntervalConfig {
                l: iv.left,
                l_included: (iv.left_included != iv.left.is_finite()).then_some(iv.left_included),
                r: iv.right,
                r_included: iv.right_included,
            },
            scale: ScaleConfig { segments, jumps: pair.scale().jumps().to_vec(), flats },
            measure: MeasureConfig { atoms: m.atoms().to_vec(), densities, geometric: m.sequences().to_vec() },
            options: OptionsConfig {
                base: o.base,
                allow_left_atom: o.allow_left_atom,
                relaxed: o.relaxed_support,
                stilde_policy: o.stilde_policy,
            },
        }
    }
}

pub fn read_pair(text: &str) -> Result<QuasiPair<f64>, ConfigError> {
    PairConfig::parse(text)?.to_pair()
}

pub fn write_pair(pair: &QuasiPair<f64>) -> Result<String, ConfigError> {
    PairConfig::from_pair(pair).to_toml()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn parses_documented_example() {
        let text = r#"
[interval]
r = 4.0
r_included = true

[scale]
segments = [
  { x0 = 0.0, x1 = 2.0, kind = "affine", params = [0.0, 1.0] },
  { x0 = 2.0, x1 = 4, kind = "affine", params = [0.5, 1.0] },
]
jumps = [{ x = 2.0, left = 2.0, value = 2.25, right = 2.5 }]

[measure]
atoms = [{ x = 0.4, mass = 0.6 }, { x = 1.2, mass = 0.9 }, { x = 2.0, mass = 0.5 }, { x = 2.9, mass = 0.8 }, { x = 3.6, mass = 0.7 }]

[options]
relaxed = true
"#;
        assert_eq!(read_pair(text).unwrap(), fixtures::five_atom_pair());
    }

    #[test]
    fn fixtures_round_trip() {
        for p in [
            fixtures::snapping_out(0.5),
            fixtures::gap_pair(),
            fixtures::flat_pair(),
            fixtures::three_atom_pair(),
            fixtures::birth_death(30, crate::oracle::Truncation::ReflectingAtTop).1,
        ] {
            let text = write_pair(&p).unwrap();
            let back = read_pair(&text).unwrap();
            assert_eq!(back, p, "{text}");
            assert_eq!(write_pair(&back).unwrap(), text);
        }
    }

    #[test]
    fn rejects_unknown_kind() {
        let text = "[interval]\nr = 1\n[scale]\nsegments = [{ x0 = 0, x1 = 1, kind = \"cubic\", params = [] }]\n";
        assert!(matches!(read_pair(text), Err(ConfigError::Segment { .. })));
    }
}
