use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sidedness {
    #[default]
    One,
    Two,
}

impl fmt::Display for Sidedness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sidedness::One => "one",
            Sidedness::Two => "two",
        })
    }
}

impl FromStr for Sidedness {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" => Ok(Sidedness::One),
            "two" => Ok(Sidedness::Two),
            _ => Err(Error::config("--sided", format!("expected one or two, got {s:?}"))),
        }
    }
}

/// Normal quantile for the given confidence and sidedness.
pub fn z_score(confidence: f64, sided: Sidedness) -> f64 {
    let n = Normal::standard();
    match sided {
        Sidedness::One => n.inverse_cdf(confidence),
        Sidedness::Two => n.inverse_cdf(1.0 - (1.0 - confidence) / 2.0),
    }
}

/// Wilson score interval for `k` successes in `n` trials.
///
/// With one-sided sidedness both ends use the one-sided quantile, so each is a
/// one-sided bound at the given confidence.
pub fn wilson_interval(k: u64, n: u64, confidence: f64, sided: Sidedness) -> Result<(f64, f64)> {
    if n == 0 || k > n {
        return Err(Error::Precondition(format!("need 0 <= k <= n and n >= 1, got k={k}, n={n}")));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Precondition(format!("confidence {confidence} outside (0, 1)")));
    }
    Ok(wilson_with_z(k, n, z_score(confidence, sided)))
}

pub(crate) fn wilson_with_z(k: u64, n: u64, z: f64) -> (f64, f64) {
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let low = if k == 0 { 0.0 } else { (center - half).clamp(0.0, p) };
    let high = if k == n { 1.0 } else { (center + half).clamp(p, 1.0) };
    (low, high)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        assert!((z_score(0.95, Sidedness::One) - 1.644_853_6).abs() < 1e-6);
        assert!((z_score(0.95, Sidedness::Two) - 1.959_964).abs() < 1e-6);
    }

    #[test]
    fn all_successes_lower_bound() {
        let z = z_score(0.95, Sidedness::One);
        let (low, high) = wilson_interval(270, 270, 0.95, Sidedness::One).unwrap();
        assert!((low - 270.0 / (270.0 + z * z)).abs() < 1e-12);
        assert_eq!(high, 1.0);
        assert_eq!(wilson_interval(0, 50, 0.95, Sidedness::Two).unwrap().0, 0.0);
    }

    #[test]
    fn bracket_the_estimate() {
        for (k, n) in [(1, 10), (5, 10), (9, 10), (2832, 10_000)] {
            let (l, h) = wilson_interval(k, n, 0.95, Sidedness::Two).unwrap();
            let p = k as f64 / n as f64;
            assert!(l <= p && p <= h && l >= 0.0 && h <= 1.0);
        }
        assert!(wilson_interval(3, 2, 0.95, Sidedness::One).is_err());
    }
}
