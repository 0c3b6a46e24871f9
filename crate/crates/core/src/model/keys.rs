//! String keys naming the built-in coefficient families, e.g.
//! `radial`, `diag:a11=2,a22=0.5` or `power:alpha=0.6,M=1`.

use std::collections::BTreeMap;

use super::{DiffusionMatrix, MonotoneFlux, Nonlinearity};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// A parsed `family:k=v,k=v` key.
#[derive(Clone, Debug, PartialEq)]
pub struct KeySpec {
    pub family: String,
    pub params: BTreeMap<String, f64>,
}

pub fn parse_key(key: &str) -> Result<KeySpec> {
    let key = key.trim();
    let (family, rest) = match key.split_once(':') {
        Some((f, r)) => (f.trim(), r),
        None => (key, ""),
    };
    if family.is_empty() {
        return Err(Error::UnknownKey(key.to_string()));
    }
    let mut params = BTreeMap::new();
    for tok in rest.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| Error::UnknownKey(key.to_string()))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::UnknownKey(key.to_string()))?;
        params.insert(k.trim().to_string(), v);
    }
    Ok(KeySpec {
        family: family.to_string(),
        params,
    })
}

impl KeySpec {
    fn take(&mut self, name: &str, default: Option<f64>) -> Result<f64> {
        match self.params.remove(name).or(default) {
            Some(v) => Ok(v),
            None => Err(Error::InvalidArgument(format!(
                "`{}` needs parameter `{name}`",
                self.family
            ))),
        }
    }

    fn finish(self, key: &str) -> Result<()> {
        if let Some(extra) = self.params.keys().next() {
            return Err(Error::UnknownKey(format!("{key} (parameter `{extra}`)")));
        }
        Ok(())
    }

    fn direction(&mut self) -> Result<usize> {
        let d = self.take("d", Some(1.0))?;
        match d as i64 {
            1 => Ok(0),
            2 => Ok(1),
            _ => Err(Error::InvalidArgument(format!(
                "direction d must be 1 or 2, got {d}"
            ))),
        }
    }
}

impl<T: Real> DiffusionMatrix<T> {
    /// `identity`, `diag:a11=..,a22=..`, `oscillating:amp=..`.
    pub fn from_key(key: &str) -> Result<Self> {
        let mut spec = parse_key(key)?;
        let out = match spec.family.as_str() {
            "identity" => Self::identity(),
            "diag" => {
                let a11 = spec.take("a11", None)?;
                let a22 = spec.take("a22", None)?;
                if !(a11 > 0.0 && a22 > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "diag entries must be > 0, got {a11}, {a22}"
                    )));
                }
                Self::diagonal(T::lit(a11), T::lit(a22))
            }
            "oscillating" => {
                let amp = spec.take("amp", Some(0.5))?;
                if !(amp.abs() < 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "|amp| must be < 1, got {amp}"
                    )));
                }
                Self::oscillating(T::lit(amp))
            }
            _ => return Err(Error::UnknownKey(key.to_string())),
        };
        spec.finish(key)?;
        Ok(out)
    }
}

impl<T: Real> MonotoneFlux<T> {
    /// `identity`, `scalar:lo=..,hi=..`, `radial`.
    pub fn from_key(key: &str) -> Result<Self> {
        let mut spec = parse_key(key)?;
        let out = match spec.family.as_str() {
            "identity" => Self::identity(),
            "radial" => Self::radial(),
            "scalar" => {
                let lo = spec.take("lo", Some(1.0))?;
                let hi = spec.take("hi", Some(2.0))?;
                if !(lo > 0.0 && hi >= lo) {
                    return Err(Error::InvalidArgument(format!(
                        "scalar flux needs 0 < lo <= hi, got lo={lo}, hi={hi}"
                    )));
                }
                Self::scalar(T::lit(lo), T::lit(hi))
            }
            _ => return Err(Error::UnknownKey(key.to_string())),
        };
        spec.finish(key)?;
        Ok(out)
    }
}

impl<T: Real> Nonlinearity<T> {
    /// `zero`, `power:alpha=..,M=..`, `linear:M=..`, `shifted:r0=..,M=..,alpha=..`,
    /// `constant:c=..`; all but `zero` take an optional direction `d=1|2`.
    pub fn from_key(key: &str) -> Result<Self> {
        let mut spec = parse_key(key)?;
        let out = match spec.family.as_str() {
            "zero" => Self::zero(),
            "power" => {
                let alpha = spec.take("alpha", None)?;
                let m = spec.take("M", Some(1.0))?;
                let d = spec.direction()?;
                if !(alpha > 0.5 && m > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "power family needs alpha > 1/2 and M > 0, got alpha={alpha}, M={m}"
                    )));
                }
                Self::power(T::lit(m), T::lit(alpha), d)
            }
            "linear" => {
                let m = spec.take("M", Some(1.0))?;
                let d = spec.direction()?;
                if !(m > 0.0) {
                    return Err(Error::InvalidArgument(format!("M must be > 0, got {m}")));
                }
                Self::linear_positive(T::lit(m), d)
            }
            "shifted" => {
                let r0 = spec.take("r0", None)?;
                let m = spec.take("M", Some(1.0))?;
                let alpha = spec.take("alpha", Some(1.0))?;
                let d = spec.direction()?;
                if !(r0 < 0.0 && m > 0.0 && alpha > 0.5) {
                    return Err(Error::InvalidArgument(format!(
                        "shifted family needs r0 < 0, M > 0, alpha > 1/2 (got r0={r0}, M={m}, alpha={alpha})"
                    )));
                }
                Self::shifted(T::lit(m), T::lit(alpha), T::lit(r0), d)
            }
            "constant" => {
                let c = spec.take("c", None)?;
                let d = spec.direction()?;
                Self::constant(T::lit(c), d)
            }
            _ => return Err(Error::UnknownKey(key.to_string())),
        };
        spec.finish(key)?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_families() {
        let f = Nonlinearity::<f64>::from_key("power:alpha=0.6,M=1").unwrap();
        assert_eq!(f.alpha, 0.6);
        assert_eq!(f.eval(2.0).y, 0.0);
        let f = Nonlinearity::<f64>::from_key("linear:M=2,d=2").unwrap();
        assert_eq!(f.eval(1.5).y, 3.0);
        assert_eq!(f.lipschitz, Some(2.0));
        assert!(MonotoneFlux::<f64>::from_key("radial").is_ok());
        assert!(DiffusionMatrix::<f64>::from_key("diag:a11=2,a22=0.5").is_ok());
    }

    #[test]
    fn rejects_unknown_keys_and_params() {
        match MonotoneFlux::<f64>::from_key("radial2") {
            Err(Error::UnknownKey(k)) => assert_eq!(k, "radial2"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            Nonlinearity::<f64>::from_key("power:alpha=0.6,beta=1"),
            Err(Error::UnknownKey(_))
        ));
        assert!(Nonlinearity::<f64>::from_key("power:M=1").is_err());
        assert!(Nonlinearity::<f64>::from_key("power:alpha=0.4").is_err());
    }
}
