use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower end `kappa(n)` of the averaging window `[kappa(n), n]`.
///
/// Every variant is nondecreasing, satisfies `1 <= kappa(n) <= n` and diverges.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
#[derive(Default)]
pub enum KappaFn {
    /// `ceil(sqrt(n))`.
    #[default]
    Sqrt,
    /// `n`: the window is the single current average.
    Identity,
    /// `ceil(n^p)` for `0 < p <= 1`.
    Power(f64),
}

impl KappaFn {
    pub fn eval(&self, n: u64) -> u64 {
        if n == 0 {
            return 0;
        }
        match *self {
            KappaFn::Sqrt => {
                let s = n.isqrt();
                if s * s == n {
                    s
                } else {
                    s + 1
                }
            }
            KappaFn::Identity => n,
            KappaFn::Power(p) => ((n as f64).powf(p).ceil() as u64).clamp(1, n),
        }
    }
}

impl FromStr for KappaFn {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt" => Ok(KappaFn::Sqrt),
            "identity" | "n" => Ok(KappaFn::Identity),
            _ => {
                let p = s
                    .strip_prefix("pow:")
                    .and_then(|p| p.parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown kappa `{s}`")))?;
                if !(p > 0.0 && p <= 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "kappa exponent {p} not in (0, 1]"
                    )));
                }
                Ok(KappaFn::Power(p))
            }
        }
    }
}

impl fmt::Display for KappaFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KappaFn::Sqrt => write!(f, "sqrt"),
            KappaFn::Identity => write!(f, "identity"),
            KappaFn::Power(p) => write!(f, "pow:{p}"),
        }
    }
}

impl TryFrom<String> for KappaFn {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<KappaFn> for String {
    fn from(k: KappaFn) -> String {
        k.to_string()
    }
}
