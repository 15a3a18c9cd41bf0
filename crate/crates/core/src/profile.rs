//! Initial-data descriptors.
//!
//! Presets are written as short strings: `"sine_k A"` is `A sin(k pi x / J)`,
//! `"const A"` is the constant `A` and `"zero"` is the zero function.
//! Tabulated data is a list of samples on `n` uniform nodes covering `[0, J]`,
//! linearly interpolated in between.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::spectral::SpatialGrid;

#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Zero,
    Constant(f64),
    Sine { k: u32, amplitude: f64 },
    Tabulated(Vec<f64>),
}

impl Profile {
    pub fn sine(k: u32, amplitude: f64) -> Self {
        Profile::Sine { k, amplitude }
    }

    /// Evaluates the profile at `x` on the domain `(0, length)`.
    pub fn eval(&self, x: f64, length: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Constant(c) => *c,
            Profile::Sine { k, amplitude } => amplitude * (*k as f64 * PI * x / length).sin(),
            Profile::Tabulated(samples) => {
                let n = samples.len();
                if n == 1 {
                    return samples[0];
                }
                let pos = (x / length).clamp(0.0, 1.0) * (n - 1) as f64;
                let i = (pos.floor() as usize).min(n - 2);
                let w = pos - i as f64;
                samples[i] * (1.0 - w) + samples[i + 1] * w
            }
        }
    }

    /// Node samples on `grid` (length `nx + 1`).
    pub fn sample(&self, grid: &SpatialGrid) -> Vec<f64> {
        (0..=grid.nx())
            .map(|j| self.eval(grid.node(j), grid.length()))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Profile::Constant(c) if !c.is_finite() => {
                Err(Error::Parameter("constant profile must be finite".into()))
            }
            Profile::Sine { amplitude, .. } if !amplitude.is_finite() => {
                Err(Error::Parameter("sine amplitude must be finite".into()))
            }
            Profile::Sine { k: 0, .. } => Err(Error::Parameter("sine mode k must be >= 1".into())),
            Profile::Tabulated(s) if s.len() < 2 => Err(Error::Parameter(
                "tabulated profile needs at least 2 samples".into(),
            )),
            Profile::Tabulated(s) if s.iter().any(|v| !v.is_finite()) => Err(Error::Parameter(
                "tabulated profile samples must be finite".into(),
            )),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Zero => write!(f, "zero"),
            Profile::Constant(c) => write!(f, "const {c}"),
            Profile::Sine { k, amplitude } => write!(f, "sine_{k} {amplitude}"),
            Profile::Tabulated(s) => write!(f, "table[{}]", s.len()),
        }
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parameter(format!("unrecognised profile preset {s:?}"));
        let mut parts = s.split_whitespace();
        let head = parts.next().ok_or_else(bad)?;
        let arg = parts.next();
        if parts.next().is_some() {
            return Err(bad());
        }
        let number = |a: Option<&str>| -> Result<f64> {
            let v: f64 = a.ok_or_else(bad)?.parse().map_err(|_| bad())?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(bad())
            }
        };
        let profile = match head {
            "zero" if arg.is_none() => Profile::Zero,
            "const" => Profile::Constant(number(arg)?),
            h if h.starts_with("sine_") => {
                let k: u32 = h["sine_".len()..].parse().map_err(|_| bad())?;
                Profile::Sine {
                    k,
                    amplitude: number(arg)?,
                }
            }
            _ => return Err(bad()),
        };
        profile.validate()?;
        Ok(profile)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ProfileRepr {
    Preset(String),
    Table { samples: Vec<f64> },
}

impl Serialize for Profile {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Profile::Tabulated(s) => ProfileRepr::Table { samples: s.clone() },
            other => ProfileRepr::Preset(other.to_string()),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Profile {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        match ProfileRepr::deserialize(deserializer)? {
            ProfileRepr::Preset(s) => s.parse().map_err(serde::de::Error::custom),
            ProfileRepr::Table { samples } => {
                let p = Profile::Tabulated(samples);
                p.validate().map_err(serde::de::Error::custom)?;
                Ok(p)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_presets() {
        assert_eq!("sine_1 4".parse::<Profile>().unwrap(), Profile::sine(1, 4.0));
        assert_eq!("const -1".parse::<Profile>().unwrap(), Profile::Constant(-1.0));
        assert_eq!("zero".parse::<Profile>().unwrap(), Profile::Zero);
        assert!("sine_x 1".parse::<Profile>().is_err());
        assert!("sine_0 1".parse::<Profile>().is_err());
        assert!("const".parse::<Profile>().is_err());
        assert!("const nan".parse::<Profile>().is_err());
        assert!("zero 1".parse::<Profile>().is_err());
    }

    #[test]
    fn display_round_trips() {
        for p in [
            Profile::Zero,
            Profile::Constant(0.25),
            Profile::sine(3, -1.5),
        ] {
            assert_eq!(p.to_string().parse::<Profile>().unwrap(), p);
        }
    }

    #[test]
    fn tabulated_interpolates_linearly() {
        let p = Profile::Tabulated(vec![0.0, 2.0, 0.0]);
        assert_eq!(p.eval(0.0, 2.0), 0.0);
        assert_eq!(p.eval(1.0, 2.0), 2.0);
        assert_eq!(p.eval(0.5, 2.0), 1.0);
        assert_eq!(p.eval(2.0, 2.0), 0.0);
    }

    #[test]
    fn serde_forms() {
        let p: Profile = serde_json::from_str("\"sine_2 0.5\"").unwrap();
        assert_eq!(p, Profile::sine(2, 0.5));
        let t: Profile = serde_json::from_str("{\"samples\":[0,1,0]}").unwrap();
        assert_eq!(t, Profile::Tabulated(vec![0.0, 1.0, 0.0]));
        assert_eq!(serde_json::to_string(&t).unwrap(), "{\"samples\":[0.0,1.0,0.0]}");
        assert!(serde_json::from_str::<Profile>("\"cosine 1\"").is_err());
    }
}
