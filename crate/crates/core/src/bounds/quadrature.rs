//! Triangle-slice geometry of the correlation cube and its integral.
//!
//! For the singlet with settings a1, a2, b1, b2 let `x = b1 . b2`,
//! `alpha = a1 . r` and `beta = a2 . r_perp` with `r`, `r_perp` the unit
//! sum and difference of the b's. The correlation part of CHSH is violated iff
//! `|sqrt(1-x) alpha + sqrt(1+x) beta| > T` with
//! `T = sqrt 2 (eta_a + eta_b - eta_a eta_b) / (eta_a eta_b)`.
//! At fixed `x` each sign gives a right triangle in the `(alpha, beta)` square.

use crate::error::{Error, Result};
use crate::numeric;

pub(super) fn threshold(eta_a: f64, eta_b: f64) -> f64 {
    std::f64::consts::SQRT_2 * (eta_a + eta_b - eta_a * eta_b) / (eta_a * eta_b)
}

/// Where the triangle legs meet the square edges `beta = 1` and `alpha = 1`.
pub fn leg_points(x: f64, eta_a: f64, eta_b: f64) -> (f64, f64) {
    let t = threshold(eta_a, eta_b);
    let pb = (t - (1.0 - x).sqrt()) / (1.0 + x).sqrt();
    let ph = (t - (1.0 + x).sqrt()) / (1.0 - x).sqrt();
    (pb, ph)
}

/// Area of one violating triangle at slice `x`; zero outside the admissible
/// interval.
pub fn triangle_area(x: f64, eta_a: f64, eta_b: f64) -> f64 {
    if !(x > -1.0 && x < 1.0) || eta_a <= 0.0 || eta_b <= 0.0 {
        return 0.0;
    }
    let s = (1.0 - x).sqrt() + (1.0 + x).sqrt() - threshold(eta_a, eta_b);
    if s <= 0.0 {
        return 0.0;
    }
    s * s / (2.0 * (1.0 - x * x).sqrt())
}

/// Half-width of the `x` interval on which the triangle is nonempty.
pub fn admissible_half_width(eta_a: f64, eta_b: f64) -> f64 {
    if eta_a <= 0.0 || eta_b <= 0.0 {
        return 0.0;
    }
    let t = threshold(eta_a, eta_b);
    let c = 0.5 * t * t - 1.0;
    if c >= 1.0 {
        return 0.0;
    }
    (1.0 - c * c).max(0.0).sqrt()
}

/// Integrates the triangle area over `[-half, half]` after substituting
/// `x = sin t`, which cancels the `1/sqrt(1-x^2)` endpoint factor.
pub(super) fn integrate_area(eta_a: f64, eta_b: f64, half: f64) -> Result<(f64, f64)> {
    if half <= 0.0 {
        return Ok((0.0, 0.0));
    }
    let sq2 = std::f64::consts::SQRT_2;
    let k = 2.0 * eta_a * eta_a * eta_b * eta_b;
    let g = |t: f64| {
        let s = t.sin();
        let v = sq2 * (eta_a + eta_b) - eta_a * eta_b * ((1.0 - s).max(0.0).sqrt() + (1.0 + s).sqrt() + sq2);
        // only the branch where the triangle is nonempty contributes
        if v < 0.0 {
            v * v / k
        } else {
            0.0
        }
    };
    let lim = half.min(1.0).asin();
    let (v, e) = numeric::integrate(&g, -lim, lim, 1e-13, 30);
    if e > 1e-8 {
        return Err(Error::Quadrature(e));
    }
    Ok((v, e))
}
