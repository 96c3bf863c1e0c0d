//! Three-party, two-setting, three-outcome expressions written with
//! correlators `E_xyz`, click sums `O_xyz` and pairwise click sums
//! `O_AB`, `O_AC`, `O_BC`.

use crate::error::{Error, Result};
use crate::localpolytope::BellFunctional;
use crate::quantum::{apply_three_outcome, ideal_behavior, Behavior, BlochVector, MeasurementFrame, PureState, Scenario};

// outcome digits in the three-outcome alphabet
const PLUS: usize = 0;
const MINUS: usize = 2;

fn idx(x: usize, y: usize, z: usize) -> usize {
    x * 4 + y * 2 + z
}

/// Coefficients of `sum e[xyz] E_xyz + sum o[xyz] O_xyz + o_ab O_AB + o_ac
/// O_AC + o_bc O_BC <= local_bound`, indexed by `4x + 2y + z`.
#[derive(Clone, Debug, PartialEq)]
pub struct CgThreePartyExpression {
    pub name: String,
    pub e: [f64; 8],
    pub o: [f64; 8],
    pub o_ab: f64,
    pub o_ac: f64,
    pub o_bc: f64,
    pub local_bound: f64,
}

/// Adds `w` to every permutation of `(k, l, m)` (each distinct index once).
fn add_sym(dst: &mut [f64; 8], k: usize, l: usize, m: usize, w: f64) {
    let perms = [(k, l, m), (k, m, l), (l, k, m), (l, m, k), (m, k, l), (m, l, k)];
    let mut seen = [false; 8];
    for (a, b, c) in perms {
        let i = idx(a, b, c);
        if !seen[i] {
            seen[i] = true;
            dst[i] += w;
        }
    }
}

impl CgThreePartyExpression {
    fn zero(name: &str) -> Self {
        Self { name: name.into(), e: [0.0; 8], o: [0.0; 8], o_ab: 0.0, o_ac: 0.0, o_bc: 0.0, local_bound: 0.0 }
    }

    /// `I_222 + J_222 - K_22`.
    pub fn iabc1() -> Self {
        let mut s = Self::zero("iabc1");
        s.e[idx(0, 0, 0)] += 3.0;
        add_sym(&mut s.e, 0, 0, 1, -1.0);
        add_sym(&mut s.e, 0, 1, 1, -3.0);
        s.e[idx(1, 1, 1)] += 1.0;
        s.o[idx(0, 0, 0)] -= 1.0;
        add_sym(&mut s.o, 0, 0, 1, 2.0);
        add_sym(&mut s.o, 0, 1, 1, -1.0);
        s.o[idx(1, 1, 1)] += 2.0;
        s.o_ab = -1.0;
        s.o_ac = -1.0;
        s.o_bc = -1.0;
        s
    }

    /// Mermin-type `E_000 - sym[E_011] + O_111 + sym[O_001] - K_22/2`.
    pub fn iabc2() -> Self {
        let mut s = Self::zero("iabc2");
        s.e[idx(0, 0, 0)] += 1.0;
        add_sym(&mut s.e, 0, 1, 1, -1.0);
        s.o[idx(1, 1, 1)] += 1.0;
        add_sym(&mut s.o, 0, 0, 1, 1.0);
        s.o_ab = -0.5;
        s.o_ac = -0.5;
        s.o_bc = -0.5;
        s
    }

    /// Same coefficients as [`Self::iabc2`] under the Mermin name.
    pub fn mermin_cg() -> Self {
        Self { name: "mermin-cg".into(), ..Self::iabc2() }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "iabc1" => Ok(Self::iabc1()),
            "iabc2" => Ok(Self::iabc2()),
            "mermin-cg" => Ok(Self::mermin_cg()),
            _ => Err(Error::config("--name", format!("unknown three-party expression {name:?}"))),
        }
    }

    /// The same expression as a functional on full probability tables.
    ///
    /// Pairwise marginals are read as the average over the third party's two
    /// settings, which is exact on non-signaling behaviors.
    pub fn to_functional(&self) -> Result<BellFunctional> {
        let sc = Scenario::new(vec![2, 2, 2], 3)?;
        let cols = sc.outcome_tuples();
        let mut coef = vec![0.0; sc.setting_tuples() * cols];
        for s in 0..sc.setting_tuples() {
            let x = sc.decode_settings(s);
            let i = idx(x[0], x[1], x[2]);
            for o in 0..cols {
                let a = sc.decode_outcomes(o);
                let click = |p: usize| a[p] != 1;
                let mut c = 0.0;
                if click(0) && click(1) && click(2) {
                    let sign: i32 = a.iter().map(|&d| sc.outcome_value(d)).product();
                    c += self.e[i] * sign as f64 + self.o[i];
                }
                if click(0) && click(1) {
                    c += 0.5 * self.o_ab;
                }
                if click(0) && click(2) {
                    c += 0.5 * self.o_ac;
                }
                if click(1) && click(2) {
                    c += 0.5 * self.o_bc;
                }
                coef[s * cols + o] = c;
            }
        }
        BellFunctional::new(sc, coef)
    }
}

/// Correlator and click-sum terms of a (3, 2, 3) behavior.
#[derive(Clone, Debug, PartialEq)]
pub struct CgTerms {
    pub e: [f64; 8],
    pub o: [f64; 8],
    pub o_ab: f64,
    pub o_ac: f64,
    pub o_bc: f64,
}

impl CgTerms {
    pub fn from_behavior(b: &Behavior) -> Result<Self> {
        let sc = b.scenario();
        if sc.settings() != [2, 2, 2] || sc.outcomes() != 3 {
            return Err(Error::DimensionMismatch(
                "expression needs three parties, two settings and three outcomes".into(),
            ));
        }
        let mut e = [0.0; 8];
        let mut o = [0.0; 8];
        for x in 0..2 {
            for y in 0..2 {
                for z in 0..2 {
                    let i = idx(x, y, z);
                    e[i] = b.correlator(&[x, y, z]);
                    for a in [PLUS, MINUS] {
                        for bb in [PLUS, MINUS] {
                            for c in [PLUS, MINUS] {
                                o[i] += b.prob(&[x, y, z], &[a, bb, c]);
                            }
                        }
                    }
                }
            }
        }
        let pair = |p: usize, q: usize| -> f64 {
            let mut s = 0.0;
            for u in 0..2 {
                for v in 0..2 {
                    for a in [PLUS, MINUS] {
                        for c in [PLUS, MINUS] {
                            s += b.marginal(&[p, q], &[u, v], &[a, c]);
                        }
                    }
                }
            }
            s
        };
        Ok(Self { e, o, o_ab: pair(0, 1), o_ac: pair(0, 2), o_bc: pair(1, 2) })
    }

    pub fn apply(&self, expr: &CgThreePartyExpression) -> f64 {
        let lin: f64 = (0..8).map(|i| expr.e[i] * self.e[i] + expr.o[i] * self.o[i]).sum();
        lin + expr.o_ab * self.o_ab + expr.o_ac * self.o_ac + expr.o_bc * self.o_bc
    }
}

/// Expression value on a behavior; violation iff above `expr.local_bound`.
pub fn eval_cg3(behavior: &Behavior, expr: &CgThreePartyExpression) -> Result<f64> {
    Ok(CgTerms::from_behavior(behavior)?.apply(expr))
}

/// Largest value over all 729 deterministic strategies of the scenario.
pub fn cg3_local_maximum(expr: &CgThreePartyExpression) -> Result<(f64, usize)> {
    let sc = Scenario::new(vec![2, 2, 2], 3)?;
    let mut best = f64::NEG_INFINITY;
    let mut count = 0;
    for code in 0..3usize.pow(6) {
        let mut digits = [0usize; 6];
        let mut r = code;
        for d in digits.iter_mut().rev() {
            *d = r % 3;
            r /= 3;
        }
        let assignment: Vec<Vec<usize>> = digits.chunks(2).map(|c| c.to_vec()).collect();
        let b = Behavior::deterministic(sc.clone(), &assignment)?;
        best = best.max(eval_cg3(&b, expr)?);
        count += 1;
    }
    Ok((best, count))
}

/// Rotated GHZ measured with `sigma_x` (setting 0) and `sigma_y` (setting 1)
/// by every party, in the three-outcome model at symmetric efficiency `eta`.
pub fn rotated_ghz_behavior(phi: f64, eta: f64) -> Result<Behavior> {
    let settings = vec![BlochVector::x(), BlochVector::y()];
    let frame = MeasurementFrame::new(vec![settings; 3])?;
    let ideal = ideal_behavior(&PureState::ghz_rotated(phi), &frame)?;
    apply_three_outcome(&ideal, &[eta; 3])
}

/// Quantum terms of both expressions on the rotated GHZ state.
#[derive(Clone, Debug, PartialEq)]
pub struct RotatedGhzTerms {
    pub terms: CgTerms,
    pub i222: f64,
    pub j222: f64,
    pub k22: f64,
    pub i_tilde: f64,
    pub j_tilde: f64,
    pub k_tilde: f64,
}

pub fn rotated_ghz_quantum_terms(phi: f64) -> Result<RotatedGhzTerms> {
    let t = CgTerms::from_behavior(&rotated_ghz_behavior(phi, 1.0)?)?;
    let sym = |v: &[f64; 8], k: usize, l: usize, m: usize| {
        let mut w = [0.0; 8];
        add_sym(&mut w, k, l, m, 1.0);
        (0..8).map(|i| w[i] * v[i]).sum::<f64>()
    };
    let (e, o) = (&t.e, &t.o);
    let i222 = 3.0 * e[0] - sym(e, 0, 0, 1) - 3.0 * sym(e, 0, 1, 1) + e[7];
    let j222 = -o[0] + 2.0 * sym(o, 0, 0, 1) - sym(o, 0, 1, 1) + 2.0 * o[7];
    let k22 = t.o_ab + t.o_ac + t.o_bc;
    let i_tilde = e[0] - sym(e, 0, 1, 1);
    let j_tilde = o[7] + sym(o, 0, 0, 1);
    let k_tilde = k22 / 2.0;
    Ok(RotatedGhzTerms { terms: t, i222, j222, k22, i_tilde, j_tilde, k_tilde })
}

/// `K / (I + J)`: the root of `eta^3 (I + J) - eta^2 K` in `(0, 1]`.
pub fn cg3_eta_critical(i: f64, j: f64, k: f64) -> Result<f64> {
    if !(i + j > 0.0 && k > 0.0) {
        return Err(Error::Precondition(format!("need I + J > 0 and K > 0, got I={i}, J={j}, K={k}")));
    }
    let r = k / (i + j);
    if r > 1.0 {
        return Err(Error::NoViolation(format!("critical ratio {r} exceeds 1")));
    }
    Ok(r)
}

/// `arctan(1/3)`: the phase at which the rotated GHZ gives `E_000 = 3/sqrt 10`.
pub fn optimal_rotation() -> f64 {
    (1.0_f64 / 3.0).atan()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetrization_expands_correctly() {
        let mut w = [0.0; 8];
        add_sym(&mut w, 0, 1, 1, 1.0);
        assert_eq!(w, [0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0]);
        let mut w = [0.0; 8];
        add_sym(&mut w, 0, 0, 0, 1.0);
        assert_eq!(w[0], 1.0);
        assert_eq!(w.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn functional_form_agrees_with_terms() {
        let b = rotated_ghz_behavior(optimal_rotation(), 0.8).unwrap();
        for expr in [CgThreePartyExpression::iabc1(), CgThreePartyExpression::iabc2()] {
            let f = expr.to_functional().unwrap();
            let direct = eval_cg3(&b, &expr).unwrap();
            assert!((f.value(&b).unwrap() - direct).abs() < 1e-12);
            assert!(f.local_bound().abs() < 1e-12, "{}", f.local_bound());
        }
    }

    #[test]
    fn critical_ratio_preconditions() {
        assert!(cg3_eta_critical(1.0, 0.0, 2.0).is_err());
        assert!(cg3_eta_critical(-1.0, 0.0, 2.0).is_err());
        assert_eq!(cg3_eta_critical(4.0, 4.0, 6.0).unwrap(), 0.75);
    }
}
