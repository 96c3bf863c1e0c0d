use crate::error::{Error, Result};
use crate::numeric;
use crate::quantum::Behavior;

/// Local bound of the probability form of CHSH.
pub const CHSH_LOCAL_BOUND: f64 = 3.0;

/// Contributions to the efficiency-dressed CHSH value: the quantum value `q`
/// when both detectors click, `m_a`/`m_b` when only A/B clicks and `x` when
/// neither does.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChshEtaTerms {
    pub q: f64,
    pub m_a: f64,
    pub m_b: f64,
    pub x: f64,
}

impl ChshEtaTerms {
    pub fn new(q: f64) -> Self {
        Self { q, m_a: 2.0, m_b: 2.0, x: 3.0 }
    }

    pub fn value(&self, eta_a: f64, eta_b: f64) -> f64 {
        eta_a * (1.0 - eta_b) * self.m_a
            + eta_b * (1.0 - eta_a) * self.m_b
            + eta_a * eta_b * self.q
            + (1.0 - eta_a) * (1.0 - eta_b) * self.x
    }
}

/// Efficiency-dressed CHSH value; violation iff it exceeds 3.
pub fn chsh_eta_value(q: f64, eta_a: f64, eta_b: f64) -> f64 {
    ChshEtaTerms::new(q).value(eta_a, eta_b)
}

/// Symmetric efficiency at which the dressed value reaches the local bound.
pub fn chsh_symmetric_critical(q: f64) -> Result<f64> {
    if q <= CHSH_LOCAL_BOUND {
        return Err(Error::NoViolation(format!("quantum value {q} does not exceed 3")));
    }
    let (_, hi) = numeric::bisect(0.0, 1.0, 1e-12, |eta| chsh_eta_value(q, eta, eta) > CHSH_LOCAL_BOUND);
    Ok(hi)
}

/// Best of the four probability-CHSH variants on a two-party, two-setting,
/// two-outcome behavior: `sum_{x,y} P(a xor b = (x xor s)(y xor t) xor u)`.
pub fn chsh_probability_value(behavior: &Behavior) -> Result<f64> {
    let sc = behavior.scenario();
    if sc.settings() != [2, 2] || sc.outcomes() != 2 {
        return Err(Error::DimensionMismatch("probability CHSH needs two parties, two settings, two outcomes".into()));
    }
    let mut best = f64::NEG_INFINITY;
    for s in 0..2 {
        for t in 0..2 {
            for u in 0..2 {
                let mut v = 0.0;
                for x in 0..2 {
                    for y in 0..2 {
                        let target = ((x ^ s) & (y ^ t)) ^ u;
                        for a in 0..2 {
                            for b in 0..2 {
                                if a ^ b == target {
                                    v += behavior.prob(&[x, y], &[a, b]);
                                }
                            }
                        }
                    }
                }
                best = best.max(v);
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    #[test]
    fn dressed_value_examples() {
        let q = 2.0 + SQRT_2;
        assert!((chsh_eta_value(q, 1.0, 1.0) - q).abs() < 1e-15);
        let c = 2.0 / (1.0 + SQRT_2);
        assert!((chsh_eta_value(q, c, c) - 3.0).abs() < 1e-14);
        assert_eq!(chsh_eta_value(3.3, 0.0, 0.0), 3.0);
    }

    #[test]
    fn critical_efficiency() {
        let q = 2.0 + SQRT_2;
        assert!((chsh_symmetric_critical(q).unwrap() - 2.0 / (1.0 + SQRT_2)).abs() < 1e-11);
        assert!(chsh_symmetric_critical(3.0).is_err());
        assert!(chsh_symmetric_critical(3.0 + 1e-9).unwrap() > 0.999_999);
        let r = chsh_symmetric_critical(3.2).unwrap();
        assert!((chsh_eta_value(3.2, r, r) - 3.0).abs() < 1e-10);
    }
}
