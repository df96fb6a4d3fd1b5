//! Radial potentials V and bounded coefficients b, each with a limit at infinity.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    Constant {
        #[serde(with = "crate::serde_num")]
        value: f64,
    },
    /// V(x) = 1 - e^{-|x|²}, with V_P ≡ 1.
    GaussianWell,
    /// Piecewise-linear in r; constant beyond the last radius.
    TabulatedRadial {
        #[serde(with = "crate::serde_num::vec")]
        radii: Vec<f64>,
        #[serde(with = "crate::serde_num::vec")]
        values: Vec<f64>,
    },
}

fn table_lookup(radii: &[f64], values: &[f64], r: f64) -> f64 {
    if r <= radii[0] {
        return values[0];
    }
    let last = radii.len() - 1;
    if r >= radii[last] {
        return values[last];
    }
    let k = radii.partition_point(|&x| x <= r) - 1;
    let t = (r - radii[k]) / (radii[k + 1] - radii[k]);
    values[k] * (1.0 - t) + values[k + 1] * t
}

fn validate_table(radii: &[f64], values: &[f64], what: &str) -> Result<()> {
    if radii.is_empty() || radii.len() != values.len() {
        return Err(Error::InvalidParameter(format!(
            "{what}: radii and values must be nonempty and of equal length"
        )));
    }
    if radii.windows(2).any(|w| !(w[1] > w[0])) || radii[0] < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "{what}: radii must be nonnegative and strictly increasing"
        )));
    }
    if radii.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("table"));
    }
    Ok(())
}

impl PotentialSpec {
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::GaussianWell => 1.0 - (-r * r).exp(),
            Self::TabulatedRadial { radii, values } => table_lookup(radii, values, r),
        }
    }

    /// The periodic (here: radial-limit) counterpart V_P.
    pub fn eval_periodic(&self, _r: f64) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::GaussianWell => 1.0,
            Self::TabulatedRadial { values, .. } => values[values.len() - 1],
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Self::Constant { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Constant { value } => {
                if !value.is_finite() || *value < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "constant potential must be finite and >= 0, got {value}"
                    )));
                }
            }
            Self::GaussianWell => {}
            Self::TabulatedRadial { radii, values } => {
                validate_table(radii, values, "tabulated potential")?;
                if values.iter().any(|&v| v < 0.0) {
                    return Err(Error::InvalidParameter(
                        "tabulated potential must be >= 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

pub fn eval_v(spec: &PotentialSpec, r: f64) -> f64 {
    spec.eval(r)
}

pub fn eval_vp(spec: &PotentialSpec, r: f64) -> f64 {
    spec.eval_periodic(r)
}

/// Bounded positive coefficient b(x) multiplying the critical term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientSpec {
    Constant {
        #[serde(with = "crate::serde_num")]
        value: f64,
    },
    /// b(x) = base + amplitude·e^{-|x|²}; the limit at infinity is `base`.
    GaussianBump {
        #[serde(with = "crate::serde_num")]
        base: f64,
        #[serde(with = "crate::serde_num")]
        amplitude: f64,
    },
    TabulatedRadial {
        #[serde(with = "crate::serde_num::vec")]
        radii: Vec<f64>,
        #[serde(with = "crate::serde_num::vec")]
        values: Vec<f64>,
    },
}

impl CoefficientSpec {
    pub fn constant(value: f64) -> Self {
        Self::Constant { value }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::GaussianBump { base, amplitude } => base + amplitude * (-r * r).exp(),
            Self::TabulatedRadial { radii, values } => table_lookup(radii, values, r),
        }
    }

    /// Value as |x| → ∞.
    pub fn limit(&self) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::GaussianBump { base, .. } => *base,
            Self::TabulatedRadial { values, .. } => values[values.len() - 1],
        }
    }

    pub fn constant_value(&self) -> Option<f64> {
        match self {
            Self::Constant { value } => Some(*value),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Constant { value } => {
                if !(value.is_finite() && *value > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "coefficient must be positive, got {value}"
                    )));
                }
            }
            Self::GaussianBump { base, amplitude } => {
                if !(base.is_finite() && amplitude.is_finite() && *base > 0.0 && base + amplitude > 0.0)
                {
                    return Err(Error::InvalidParameter(
                        "gaussian bump coefficient must stay positive".into(),
                    ));
                }
            }
            Self::TabulatedRadial { radii, values } => {
                validate_table(radii, values, "tabulated coefficient")?;
                if values.iter().any(|&v| v <= 0.0) {
                    return Err(Error::InvalidParameter(
                        "tabulated coefficient must be positive".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}
