//! Lower bounds on the two-qubit violation probability from the correlation
//! part of CHSH, with two numerical cross-checks.
//!
//! The closed forms cover the asymmetric pair `(1, eta)` and the symmetric
//! pair `(eta, eta)`. Quadrature of the triangle-slice area and direct Monte
//! Carlo over the `(alpha, beta, x)` cube work for any pair.

mod quadrature;

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::{self, Execution};

pub use quadrature::{admissible_half_width, leg_points, triangle_area};

/// Closed forms within this distance of `eta = 1` are extended linearly from
/// `1 - CONTINUITY_EPS` and `1 - 2 CONTINUITY_EPS`.
pub const CONTINUITY_EPS: f64 = 1e-6;

/// Threshold of the asymmetric closed form, `1/sqrt 2`.
pub const ASYM_THRESHOLD: f64 = FRAC_1_SQRT_2;

/// Threshold of the symmetric closed form, `sqrt(5 + 4 sqrt 2) - sqrt 2 - 1`.
pub fn sym_threshold() -> f64 {
    (5.0 + 4.0 * SQRT_2).sqrt() - SQRT_2 - 1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundMethod {
    ClosedAsym,
    ClosedSym,
    Quadrature,
    GeometricMc,
}

impl fmt::Display for BoundMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundMethod::ClosedAsym => "closed-asym",
            BoundMethod::ClosedSym => "closed-sym",
            BoundMethod::Quadrature => "quadrature",
            BoundMethod::GeometricMc => "geometric-mc",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub eta_a: f64,
    pub eta_b: f64,
    pub value: f64,
    pub method: BoundMethod,
    pub error_estimate: f64,
}

fn check_eta(eta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eta) {
        Ok(())
    } else {
        Err(Error::EfficiencyOutOfRange(eta))
    }
}

fn closed(eta_a: f64, eta_b: f64, value: f64, method: BoundMethod) -> BoundResult {
    BoundResult { eta_a, eta_b, value: value.clamp(0.0, 1.0), method, error_estimate: 0.0 }
}

/// Closed form for `eta_a = 1`, `eta_b = eta`.
pub fn pv_bound_asym(eta: f64) -> Result<BoundResult> {
    check_eta(eta)?;
    if eta <= ASYM_THRESHOLD {
        return Ok(closed(1.0, eta, 0.0, BoundMethod::ClosedAsym));
    }
    // removable 0/0 at eta = 1
    let e = 1.0 - CONTINUITY_EPS;
    let value = if eta > e {
        let (f1, f2) = (asym_formula(e), asym_formula(e - CONTINUITY_EPS));
        f1 + (eta - e) * (f1 - f2) / CONTINUITY_EPS
    } else {
        asym_formula(eta)
    };
    Ok(closed(1.0, eta, value, BoundMethod::ClosedAsym))
}

fn asym_formula(e: f64) -> f64 {
    let e2 = e * e;
    let k = (2.0 * e2 - 1.0).sqrt();
    let s = (e2 + k).sqrt();
    let cot_arg = SQRT_2 * (1.0 / (k / e2 + 1.0)).sqrt() + ((e2 - k) / (e2 + k)).sqrt();
    let bracket = PI + 2.0 * (e2 - 1.0) * k - PI * e2 * e2
        + 4.0 * SQRT_2 * (s + (k * k * (e2 + k)).sqrt() - 2.0 * e2 * s)
        + 8.0 * (e2 * e2 - 1.0) * (1.0 / cot_arg).atan();
    bracket / (e2 * (e2 - 1.0))
}

/// Closed form for `eta_a = eta_b = eta`.
pub fn pv_bound_sym(eta: f64) -> Result<BoundResult> {
    check_eta(eta)?;
    if eta <= sym_threshold() {
        return Ok(closed(eta, eta, 0.0, BoundMethod::ClosedSym));
    }
    let g = sym_gamma(eta);
    let e2 = eta * eta;
    let q = e2 - 2.0 * eta + 2.0;
    let r = g * e2 + 2.0 * g * (1.0 - eta);
    let root_diff = (r + e2 * e2).max(0.0).sqrt() - (e2 * e2 - r).max(0.0).sqrt();
    let atan_arg = 4.0 * ((eta - 1.0).powi(2) * (e2 - eta + 1.0).powi(2)).sqrt() / (g * q + e2 * e2);
    let bracket = 2.0 * g + e2 * PI * q + eta * (eta - 2.0) * (2.0 * SQRT_2 * root_diff + g)
        - 4.0 * e2 * q * atan_arg.atan();
    Ok(closed(eta, eta, 2.0 / (e2 * e2) * bracket, BoundMethod::ClosedSym))
}

fn sym_gamma(eta: f64) -> f64 {
    (8.0 * (eta - eta * eta) + 4.0 * eta.powi(3) + eta.powi(4) - 4.0).max(0.0).sqrt()
}

/// Which `x` interval the quadrature integrates over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum XInterval {
    /// Where the triangle is nonempty, from the leg-point condition.
    #[default]
    Admissible,
    /// The closed-form interval of the asymmetric or symmetric case.
    Printed,
}

/// Half-width of the closed-form interval for the two special cases.
pub fn printed_half_width(eta_a: f64, eta_b: f64) -> Result<f64> {
    if eta_a == 1.0 {
        if eta_b <= ASYM_THRESHOLD {
            return Ok(0.0);
        }
        Ok((2.0 * eta_b * eta_b - 1.0).sqrt() / (eta_b * eta_b))
    } else if eta_a == eta_b {
        let e = eta_a;
        if e <= sym_threshold() {
            return Ok(0.0);
        }
        Ok(((e * e - 2.0 * e + 2.0) * sym_gamma(e) / e.powi(4)).min(1.0))
    } else {
        Err(Error::Precondition("printed interval exists only for (1, eta) and (eta, eta)".into()))
    }
}

/// Quadrature of the triangle area over the admissible interval.
pub fn pv_bound_quadrature(eta_a: f64, eta_b: f64) -> Result<BoundResult> {
    pv_bound_quadrature_with(eta_a, eta_b, XInterval::Admissible)
}

pub fn pv_bound_quadrature_with(eta_a: f64, eta_b: f64, interval: XInterval) -> Result<BoundResult> {
    check_eta(eta_a)?;
    check_eta(eta_b)?;
    let half = match interval {
        XInterval::Admissible => admissible_half_width(eta_a, eta_b),
        XInterval::Printed => printed_half_width(eta_a, eta_b)?,
    };
    // four CHSH variants times two triangles over a cube of volume 8
    let (v, e) = quadrature::integrate_area(eta_a, eta_b, half)?;
    Ok(BoundResult {
        eta_a,
        eta_b,
        value: v.clamp(0.0, 1.0),
        method: BoundMethod::Quadrature,
        error_estimate: e,
    })
}

const MC_BLOCK: usize = 1 << 16;

/// Fraction of the cube `[-1, 1]^3` violating the correlation bound, times 4.
pub fn pv_bound_geometric_mc(eta_a: f64, eta_b: f64, n: u64, seed: u64) -> Result<BoundResult> {
    pv_bound_geometric_mc_with(eta_a, eta_b, n, seed, Execution::default())
}

pub fn pv_bound_geometric_mc_with(
    eta_a: f64,
    eta_b: f64,
    n: u64,
    seed: u64,
    exec: Execution,
) -> Result<BoundResult> {
    check_eta(eta_a)?;
    check_eta(eta_b)?;
    if n == 0 {
        return Err(Error::Precondition("sample count must be at least 1".into()));
    }
    let t = if eta_a > 0.0 && eta_b > 0.0 { quadrature::threshold(eta_a, eta_b) } else { f64::INFINITY };
    let blocks = n.div_ceil(MC_BLOCK as u64) as usize;
    let hits = parallel::map_reduce(
        exec,
        blocks,
        || (),
        |_, blk| {
            let start = blk as u64 * MC_BLOCK as u64;
            let len = (n - start).min(MC_BLOCK as u64);
            let mut rng = parallel::stream_rng(parallel::derive_seed(seed, blk as u64), 0);
            let mut k = 0u64;
            for _ in 0..len {
                let alpha: f64 = rng.random_range(-1.0..1.0);
                let beta: f64 = rng.random_range(-1.0..1.0);
                let x: f64 = rng.random_range(-1.0..1.0);
                let lhs = (1.0 - x).sqrt() * alpha + (1.0 + x).sqrt() * beta;
                if lhs.abs() > t {
                    k += 1;
                }
            }
            k
        },
        || 0u64,
        |a, b| a + b,
    );
    let f = hits as f64 / n as f64;
    Ok(BoundResult {
        eta_a,
        eta_b,
        value: (4.0 * f).min(1.0),
        method: BoundMethod::GeometricMc,
        error_estimate: 4.0 * (f * (1.0 - f) / n as f64).sqrt(),
    })
}

/// `closed`, `quadrature` or `mc` as accepted by the CLI.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundChoice {
    Closed,
    Quadrature,
    Mc,
}

impl FromStr for BoundChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed" => Ok(BoundChoice::Closed),
            "quadrature" => Ok(BoundChoice::Quadrature),
            "mc" => Ok(BoundChoice::Mc),
            _ => Err(Error::config("--method", format!("unknown bound method {s:?}"))),
        }
    }
}

/// Closed form for whichever special case `(eta_a, eta_b)` is.
pub fn pv_bound_closed(eta_a: f64, eta_b: f64) -> Result<BoundResult> {
    if eta_a == 1.0 {
        pv_bound_asym(eta_b)
    } else if eta_b == 1.0 {
        let mut r = pv_bound_asym(eta_a)?;
        r.eta_a = eta_a;
        r.eta_b = 1.0;
        Ok(r)
    } else if eta_a == eta_b {
        pv_bound_sym(eta_a)
    } else {
        Err(Error::config(
            "--method",
            "closed forms exist only for (1, eta) and (eta, eta); use quadrature or mc",
        ))
    }
}
