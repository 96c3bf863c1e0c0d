//! The projected CHSH expression
//! `I_C = -A1 + (1 + A1)/2 [B1 C1 + B2 C1 + B1 C2 - B2 C2] <= 1`
//! with a single nontrivial setting for the first party.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::localpolytope::BellFunctional;
use crate::numeric::{nelder_mead, NelderMead};
use crate::parallel::{derive_seed, map_collect, stream_rng, Execution};
use crate::quantum::{binned_behavior, Behavior, BlochVector, MeasurementFrame, PureState, Scenario};

/// Local bound of `I_C`.
pub const IC_LOCAL_BOUND: f64 = 1.0;

/// Smallest excess over the bound that counts as a violation.
pub const IC_VIOLATION_MARGIN: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IcSettings {
    pub a1: BlochVector,
    pub b: [BlochVector; 2],
    pub c: [BlochVector; 2],
}

impl IcSettings {
    pub fn frame(&self) -> MeasurementFrame {
        MeasurementFrame::new(vec![vec![self.a1], self.b.to_vec(), self.c.to_vec()])
            .expect("three parties with fixed setting counts")
    }

    fn from_params(p: &[f64]) -> Self {
        let d = |i: usize| BlochVector::from_angles(p[2 * i], p[2 * i + 1]);
        Self { a1: d(0), b: [d(1), d(2)], c: [d(3), d(4)] }
    }
}

/// Correlator of a subset of parties, read from their marginal.
fn marginal_correlator(b: &Behavior, parties: &[usize], settings: &[usize]) -> f64 {
    let d = b.scenario().outcomes();
    let k = parties.len();
    let mut total = 0.0;
    for code in 0..d.pow(k as u32) {
        let mut out = vec![0; k];
        let mut r = code;
        for o in out.iter_mut().rev() {
            *o = r % d;
            r /= d;
        }
        let sign: i32 = out.iter().map(|&o| b.scenario().outcome_value(o)).product();
        total += sign as f64 * b.marginal(parties, settings, &out);
    }
    total
}

/// `I_C` on a three-party two-outcome behavior; the first party uses setting 0.
pub fn eval_ic_behavior(b: &Behavior) -> Result<f64> {
    let sc = b.scenario();
    if sc.parties() != 3 || sc.outcomes() != 2 || sc.settings()[1] < 2 || sc.settings()[2] < 2 {
        return Err(Error::DimensionMismatch("I_C needs three two-outcome parties, two settings for B and C".into()));
    }
    let a1 = marginal_correlator(b, &[0], &[0]);
    let sign = |y: usize, z: usize| if y == 1 && z == 1 { -1.0 } else { 1.0 };
    let mut bracket = 0.0;
    for y in 0..2 {
        for z in 0..2 {
            let bc = marginal_correlator(b, &[1, 2], &[y, z]);
            let abc = marginal_correlator(b, &[0, 1, 2], &[0, y, z]);
            bracket += sign(y, z) * 0.5 * (bc + abc);
        }
    }
    Ok(-a1 + bracket)
}

/// `I_C` in the binning model at symmetric efficiency `eta`.
pub fn eval_ic(state: &PureState, settings: &IcSettings, eta: f64) -> Result<f64> {
    if state.parties() != 3 {
        return Err(Error::DimensionMismatch(format!("I_C needs a three-qubit state, got {} qubits", state.parties())));
    }
    eval_ic_behavior(&binned_behavior(state, &settings.frame(), &[eta; 3])?)
}

/// `I_C` as a functional on the `(1, 2, 2)` two-outcome probability table.
pub fn ic_functional() -> Result<BellFunctional> {
    let sc = Scenario::new(vec![1, 2, 2], 2)?;
    let cols = sc.outcome_tuples();
    let mut coef = vec![0.0; sc.setting_tuples() * cols];
    for s in 0..sc.setting_tuples() {
        let x = sc.decode_settings(s);
        let sign = if x[1] == 1 && x[2] == 1 { -1.0 } else { 1.0 };
        for o in 0..cols {
            let a = sc.decode_outcomes(o);
            let v: Vec<f64> = a.iter().map(|&d| sc.outcome_value(d) as f64).collect();
            // the first party's marginal appears in all four rows
            let mut c = -v[0] / 4.0;
            if v[0] > 0.0 {
                c += sign * v[1] * v[2];
            }
            coef[s * cols + o] = c;
        }
    }
    BellFunctional::new(sc, coef)
}

/// Largest `I_C` over all deterministic strategies, with their count.
pub fn ic_local_maximum() -> Result<(f64, usize)> {
    let sc = Scenario::new(vec![1, 2, 2], 2)?;
    let mut best = f64::NEG_INFINITY;
    let mut count = 0;
    for code in 0..32usize {
        let bit = |k: usize| (code >> k) & 1;
        let assignment = vec![vec![bit(0)], vec![bit(1), bit(2)], vec![bit(3), bit(4)]];
        best = best.max(eval_ic_behavior(&Behavior::deterministic(sc.clone(), &assignment)?)?);
        count += 1;
    }
    Ok((best, count))
}

fn binned_observable(n: &BlochVector, eta: f64) -> [[Complex64; 2]; 2] {
    let p = n.projector();
    let e = Complex64::new(2.0 * eta, 0.0);
    let one = Complex64::new(1.0, 0.0);
    [[e * p[0][0] - one, e * p[0][1]], [e * p[1][0], e * p[1][1] - one]]
}

/// Direct operator evaluation of `I_C`, equal to [`eval_ic`] but without
/// building the probability table.
pub(crate) fn ic_value_fast(state: &PureState, s: &IcSettings, eta: f64) -> f64 {
    let id = [[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)], [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]];
    let a = binned_observable(&s.a1, eta);
    let proj = {
        let p = s.a1.projector();
        let e = Complex64::new(eta, 0.0);
        [[e * p[0][0], e * p[0][1]], [e * p[1][0], e * p[1][1]]]
    };
    let b = [binned_observable(&s.b[0], eta), binned_observable(&s.b[1], eta)];
    let c = [binned_observable(&s.c[0], eta), binned_observable(&s.c[1], eta)];
    let mut v = -state.expectation(&[&a, &id, &id]);
    for y in 0..2 {
        for z in 0..2 {
            let sign = if y == 1 && z == 1 { -1.0 } else { 1.0 };
            v += sign * state.expectation(&[&proj, &b[y], &c[z]]);
        }
    }
    v
}

/// Ratio of the smaller to the larger Schmidt coefficient of the B-C state
/// left after the first party's `+` projection.
pub fn conditional_schmidt_ratio(state: &PureState, a1: &BlochVector) -> f64 {
    let (plus, _) = a1.eigenvectors();
    let amp = state.amplitudes();
    let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (bit_a, pa) in plus.iter().enumerate() {
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] += pa.conj() * amp[(bit_a << 2) | (i << 1) | j];
            }
        }
    }
    // singular values of a 2x2 matrix from the trace and determinant of M^dag M
    let fro: f64 = m.iter().flatten().map(|z| z.norm_sqr()).sum();
    let det = (m[0][0] * m[1][1] - m[0][1] * m[1][0]).norm();
    let disc = (fro * fro - 4.0 * det * det).max(0.0).sqrt();
    let s1 = ((fro + disc) / 2.0).sqrt();
    let s2 = ((fro - disc) / 2.0).max(0.0).sqrt();
    if s1 == 0.0 {
        0.0
    } else {
        s2 / s1
    }
}

#[derive(Clone, Copy, Debug)]
pub struct IcSearchOptions {
    pub starts: usize,
    pub max_evals: usize,
    /// Extra Nelder-Mead passes from each converged point.
    pub restarts: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for IcSearchOptions {
    fn default() -> Self {
        Self { starts: 64, max_evals: 20_000, restarts: 2, seed: 0x1c, exec: Execution::Parallel }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IcOptimum {
    pub eta: f64,
    pub value: f64,
    pub settings: IcSettings,
    pub schmidt_ratio: f64,
    params: Vec<f64>,
}

/// Settings-optimized `I_C` at one efficiency: multi-start Nelder-Mead over
/// the polar angles of the five directions in use.
pub fn ic_maximize(state: &PureState, eta: f64, opts: &IcSearchOptions) -> Result<IcOptimum> {
    ic_maximize_from(state, eta, opts, None)
}

/// As [`ic_maximize`], with one extra start at a previous optimum.
pub fn ic_maximize_from(state: &PureState, eta: f64, opts: &IcSearchOptions, warm: Option<&IcOptimum>) -> Result<IcOptimum> {
    if state.parties() != 3 {
        return Err(Error::DimensionMismatch(format!("I_C needs a three-qubit state, got {} qubits", state.parties())));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::EfficiencyOutOfRange(eta));
    }
    let nm = NelderMead { max_evals: opts.max_evals, ftol: 1e-17, xtol: 1e-11 };
    let starts = opts.starts.max(1);
    let runs = map_collect(
        opts.exec,
        starts + warm.is_some() as usize,
        || (),
        |_, k| {
            let f = |p: &[f64]| -ic_value_fast(state, &IcSettings::from_params(p), eta);
            let (x0, step) = match warm {
                Some(w) if k == starts => (w.params.clone(), 0.01),
                _ => {
                    let mut rng = stream_rng(derive_seed(opts.seed, k as u64), 0);
                    ((0..10).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect(), 0.5)
                }
            };
            let (mut x, mut v) = nelder_mead(f, &x0, step, nm);
            for r in 0..opts.restarts {
                let step = 0.05 / (r + 1) as f64;
                let (x2, v2) = nelder_mead(f, &x, step, nm);
                if v2 <= v {
                    x = x2;
                    v = v2;
                }
            }
            (x, -v)
        },
    );
    let (x, value) = runs
        .into_iter()
        .fold((Vec::new(), f64::NEG_INFINITY), |best, r| if r.1 > best.1 { r } else { best });
    let settings = IcSettings::from_params(&x);
    Ok(IcOptimum { eta, value, settings, schmidt_ratio: conditional_schmidt_ratio(state, &settings.a1), params: x })
}

/// Smallest grid efficiency at which the optimized `I_C` exceeds
/// `1 + IC_VIOLATION_MARGIN`, by bisection over the sorted grid.
///
/// The optimum is non-decreasing in `eta` (lowering the efficiency is a
/// local post-processing), so bisection over grid indices is valid. Each step
/// also restarts from the optimum at the smallest violating efficiency so far;
/// near the threshold the violating basin is too narrow for random starts.
pub fn ic_critical_search(state: &PureState, eta_grid: &[f64], opts: &IcSearchOptions) -> Result<IcOptimum> {
    if eta_grid.is_empty() || eta_grid.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
        return Err(Error::Precondition("efficiency grid must be nonempty and within (0, 1]".into()));
    }
    let mut grid = eta_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let violates = |o: &IcOptimum| o.value > IC_LOCAL_BOUND + IC_VIOLATION_MARGIN;
    let top = ic_maximize(state, grid[grid.len() - 1], opts)?;
    if !violates(&top) {
        return Err(Error::NoViolation(format!("optimized I_C is {} at the largest grid efficiency", top.value)));
    }
    let (mut lo, mut hi) = (None::<usize>, grid.len() - 1);
    let mut best = top;
    while hi > lo.map_or(0, |l| l + 1) {
        let mid = lo.map_or(0, |l| l + 1) + (hi - lo.map_or(0, |l| l + 1)) / 2;
        let o = ic_maximize_from(state, grid[mid], opts, Some(&best))?;
        if violates(&o) {
            hi = mid;
            best = o;
        } else {
            lo = Some(mid);
        }
    }
    Ok(best)
}

/// Evenly spaced grid `lo, lo + step, ...` up to `hi`.
pub fn eta_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| lo + k as f64 * step).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_settings(seed: u64) -> IcSettings {
        let mut rng = stream_rng(seed, 0);
        let p: Vec<f64> = (0..10).map(|_| rng.random_range(0.0..6.3)).collect();
        IcSettings::from_params(&p)
    }

    #[test]
    fn fast_value_matches_table() {
        for (k, state) in [PureState::ghz3(), PureState::w3(), PureState::ghz_rotated(0.4)].iter().enumerate() {
            for eta in [1.0, 0.8, 0.5] {
                let s = sample_settings(k as u64 + 10);
                let a = eval_ic(state, &s, eta).unwrap();
                let b = ic_value_fast(state, &s, eta);
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn local_bound_is_one() {
        let (m, n) = ic_local_maximum().unwrap();
        assert_eq!(n, 32);
        assert!((m - 1.0).abs() < 1e-12);
        assert!((ic_functional().unwrap().local_bound() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn functional_matches_direct_evaluation() {
        let s = sample_settings(3);
        let b = binned_behavior(&PureState::w3(), &s.frame(), &[0.9; 3]).unwrap();
        let f = ic_functional().unwrap();
        assert!((f.value(&b).unwrap() - eval_ic_behavior(&b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn schmidt_ratio_of_ghz_slices() {
        let ghz = PureState::ghz3();
        assert!((conditional_schmidt_ratio(&ghz, &BlochVector::x()) - 1.0).abs() < 1e-12);
        assert!(conditional_schmidt_ratio(&ghz, &BlochVector::z()) < 1e-12);
    }

    #[test]
    fn ghz_violates_at_full_efficiency() {
        let opts = IcSearchOptions { starts: 8, ..IcSearchOptions::default() };
        let o = ic_maximize(&PureState::ghz3(), 1.0, &opts).unwrap();
        // the conditional state can be maximally entangled: 1 + (2 sqrt 2 - 2)/2
        assert!((o.value - std::f64::consts::SQRT_2).abs() < 1e-6, "{}", o.value);
    }

    #[test]
    fn grid_helper() {
        let g = eta_grid(0.6, 0.7, 0.001);
        assert_eq!(g.len(), 101);
        assert!((g[100] - 0.7).abs() < 1e-12);
    }
}
