//! Local hidden-variable models as LP feasibility.
//!
//! A behavior is local iff some probability distribution over deterministic
//! strategies reproduces it. [`check_local_model`] answers that with a
//! phase-one simplex; when the answer is no, the dual vector is a Bell
//! functional that the behavior violates.

mod certificate;
mod matrix;
mod oracle;
mod simplex;

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

pub use certificate::BellFunctional;
pub use oracle::{brute_force_local, BRUTE_FORCE_CAP};

use crate::error::{Error, Result};
use crate::quantum::{Behavior, Scenario};
use matrix::ConstraintMatrix;

/// Default cap on the number of LP variables (deterministic strategies).
pub const DEFAULT_VARIABLE_CAP: u128 = 5_000_000;

/// Largest no-signaling defect for which redundant rows are dropped.
const NO_SIGNALING_TOL: f64 = 1e-12;

/// Default feasibility tolerance on the phase-one objective.
pub const DEFAULT_TOL: f64 = 1e-9;

/// `{x >= 0, A x = b}` for one behavior.
#[derive(Clone, Debug)]
pub struct LpProblem {
    matrix: ConstraintMatrix,
    /// The full behavior table.
    rhs: Vec<f64>,
    /// Right-hand side on the matrix rows.
    b: Vec<f64>,
}

impl LpProblem {
    pub fn scenario(&self) -> &Scenario {
        self.matrix.scenario()
    }

    pub fn variable_count(&self) -> usize {
        self.matrix.vars()
    }

    /// Equality rows actually solved; fewer than the table size when the
    /// behavior is no-signaling and redundant rows were dropped.
    pub fn row_count(&self) -> usize {
        self.matrix.rows()
    }

    /// Table index of LP row `i`.
    pub fn table_index(&self, i: usize) -> usize {
        self.matrix.full_row(i)
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// LP rows holding a one in column `j`.
    pub fn column(&self, j: usize) -> Vec<usize> {
        let mut out = Vec::new();
        self.matrix.column_into(j, &mut out);
        out
    }

    /// Outcome digits `[party][setting]` of variable `j`.
    pub fn strategy(&self, j: usize) -> Vec<Vec<usize>> {
        self.matrix.strategy(j)
    }

    /// Writes the phase-one problem in CPLEX LP format.
    pub fn dump_lp<W: Write>(&self, mut w: W) -> Result<()> {
        let sc = self.scenario();
        writeln!(
            w,
            "\\ phase-one local model: N={} m={} d={}",
            sc.parties(),
            sc.settings().iter().map(|m| m.to_string()).collect::<Vec<_>>().join(","),
            sc.outcomes()
        )?;
        writeln!(w, "Minimize")?;
        let arts: Vec<String> = (0..self.row_count()).map(|i| format!("r{i}")).collect();
        write_wrapped(&mut w, " obj: ", &arts.join(" + "))?;
        writeln!(w, "Subject To")?;
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); self.row_count()];
        for j in 0..self.variable_count() {
            for r in self.column(j) {
                rows[r].push(j);
            }
        }
        for (i, vars) in rows.iter().enumerate() {
            let mut terms: Vec<String> = vars.iter().map(|j| format!("x{j}")).collect();
            terms.push(format!("r{i}"));
            let body = format!("{} = {:.17e}", terms.join(" + "), self.b[i]);
            write_wrapped(&mut w, &format!(" c{i}: "), &body)?;
        }
        writeln!(w, "End")?;
        Ok(())
    }
}

fn write_wrapped<W: Write>(w: &mut W, head: &str, body: &str) -> Result<()> {
    let mut line = String::from(head);
    for tok in body.split(' ') {
        if line.len() + tok.len() > 250 {
            writeln!(w, "{line}")?;
            line = String::from("   ");
        }
        line.push_str(tok);
        line.push(' ');
    }
    writeln!(w, "{}", line.trim_end())?;
    Ok(())
}

/// Builds the LP with the default variable cap.
pub fn build_lp(behavior: &Behavior) -> Result<LpProblem> {
    build_lp_with_cap(behavior, DEFAULT_VARIABLE_CAP)
}

pub fn build_lp_with_cap(behavior: &Behavior, cap: u128) -> Result<LpProblem> {
    let sc = behavior.scenario();
    let vars = check_size(sc, cap)?;
    let rhs = behavior.table().to_vec();
    // signaling tables keep every row so the LP still sees the inconsistency
    let matrix = if matrix::implied_residual(sc, &rhs) <= NO_SIGNALING_TOL {
        ConstraintMatrix::reduced(sc, vars)
    } else {
        ConstraintMatrix::new(sc, vars)
    };
    let b = matrix.restrict(&rhs);
    Ok(LpProblem { matrix, rhs, b })
}

/// Number of LP variables, or an error if it exceeds `cap`.
pub fn check_size(scenario: &Scenario, cap: u128) -> Result<usize> {
    let vars = scenario.variable_count();
    if vars > cap {
        return Err(Error::ScenarioTooLarge { vars, cap });
    }
    Ok(vars as usize)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Local,
    Nonlocal,
    Borderline,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Local => "local",
            Verdict::Nonlocal => "nonlocal",
            Verdict::Borderline => "borderline",
        })
    }
}

/// Outcome of [`check_local_model`].
#[derive(Clone, Debug, PartialEq)]
pub struct FeasibilityResult {
    pub verdict: Verdict,
    /// Raw dual certificate when nonlocal.
    pub certificate: Option<BellFunctional>,
    /// Phase-one optimum: total residual of the best local fit.
    pub slack: f64,
    pub iterations: usize,
    /// Why a sample ended up borderline other than by its slack.
    pub note: Option<String>,
    rhs: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_TOL, max_iterations: 50_000 }
    }
}

pub fn check_local_model(problem: &LpProblem, tol: f64) -> FeasibilityResult {
    check_local_model_with(problem, SolverOptions { tol, ..SolverOptions::default() })
}

/// Local if the phase-one optimum is at most `tol`, borderline up to
/// `10 tol` (or on solver trouble), nonlocal beyond with a verified
/// certificate.
pub fn check_local_model_with(problem: &LpProblem, opts: SolverOptions) -> FeasibilityResult {
    let tol = opts.tol;
    let out = simplex::solve(
        &problem.matrix,
        &problem.b,
        simplex::SimplexOptions { target: tol, max_iterations: opts.max_iterations },
    );
    let mut res = FeasibilityResult {
        verdict: Verdict::Borderline,
        certificate: None,
        slack: out.objective,
        iterations: out.iterations,
        note: None,
        rhs: problem.rhs.clone(),
    };
    if out.singular {
        res.note = Some("basis became singular".into());
        return res;
    }
    if out.objective <= tol {
        res.verdict = Verdict::Local;
        return res;
    }
    if out.hit_cap {
        res.note = Some(format!("iteration cap {} reached", opts.max_iterations));
        return res;
    }
    if out.objective <= 10.0 * tol {
        return res;
    }
    let mut values = vec![0.0; problem.variable_count()];
    problem.matrix.strategy_values(&out.dual, &mut values);
    let y = problem.matrix.expand(&out.dual);
    let bound = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let value = certificate::dot(&y, &problem.rhs);
    if value - bound > tol {
        res.verdict = Verdict::Nonlocal;
        res.certificate = Some(BellFunctional::with_bound(problem.scenario().clone(), y, bound));
    } else {
        res.note = Some(format!("dual certificate gap {:e} below tolerance", value - bound));
    }
    res
}

/// Rescales a nonlocal certificate to unit max coefficient and recomputes its
/// local bound independently.
pub fn extract_inequality(result: &FeasibilityResult) -> Result<BellFunctional> {
    if result.verdict != Verdict::Nonlocal {
        return Err(Error::Precondition(format!("verdict is {}, not nonlocal", result.verdict)));
    }
    let raw = result
        .certificate
        .as_ref()
        .ok_or_else(|| Error::Certificate("nonlocal result carries no certificate".into()))?;
    let max = raw.coefficients().iter().fold(0.0_f64, |a, c| a.max(c.abs()));
    if max == 0.0 {
        return Err(Error::Certificate("certificate is identically zero".into()));
    }
    let scaled = raw.scaled(1.0 / max);
    let f = BellFunctional::new(scaled.scenario().clone(), scaled.coefficients().to_vec())?;
    let value = certificate::dot(f.coefficients(), &result.rhs);
    if value <= f.local_bound() {
        return Err(Error::Certificate(format!(
            "value {value} does not exceed recomputed local bound {}",
            f.local_bound()
        )));
    }
    Ok(f)
}

/// Convenience: build and solve in one step.
pub fn is_local(behavior: &Behavior, tol: f64) -> Result<FeasibilityResult> {
    Ok(check_local_model(&build_lp(behavior)?, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{ideal_behavior, BlochVector, MeasurementFrame, PureState};
    use std::f64::consts::FRAC_PI_4;

    fn chsh_frame() -> MeasurementFrame {
        let a = vec![BlochVector::z(), BlochVector::x()];
        let b = vec![
            BlochVector::from_angles(FRAC_PI_4, 0.0),
            BlochVector::from_angles(-FRAC_PI_4, 0.0),
        ];
        MeasurementFrame::new(vec![a, b]).unwrap()
    }

    #[test]
    fn counts_match_scenarios() {
        for (m, d, v, rows) in [(vec![2, 2], 3, 81, 25), (vec![2, 2, 2], 2, 64, 27), (vec![7, 7], 2, 16384, 64)] {
            let b = Behavior::uniform(Scenario::new(m, d).unwrap());
            let lp = build_lp(&b).unwrap();
            assert_eq!((lp.variable_count(), lp.row_count()), (v, rows));
        }
    }

    #[test]
    fn cap_is_enforced() {
        let b = Behavior::uniform(Scenario::new(vec![5, 5], 3).unwrap());
        assert!(matches!(build_lp_with_cap(&b, 1000), Err(Error::ScenarioTooLarge { .. })));
    }

    #[test]
    fn chsh_optimal_is_nonlocal() {
        let b = ideal_behavior(&PureState::singlet(), &chsh_frame()).unwrap();
        let r = is_local(&b, DEFAULT_TOL).unwrap();
        assert_eq!(r.verdict, Verdict::Nonlocal);
        let f = extract_inequality(&r).unwrap();
        assert!(f.violation(&b).unwrap() > 0.01);
        assert_eq!(brute_force_local(&b), Ok(false));
    }

    #[test]
    fn uniform_is_local() {
        let b = Behavior::uniform(Scenario::new(vec![2, 2], 3).unwrap());
        let r = is_local(&b, DEFAULT_TOL).unwrap();
        assert_eq!(r.verdict, Verdict::Local);
        assert!(extract_inequality(&r).is_err());
        assert_eq!(brute_force_local(&b), Ok(true));
    }

    #[test]
    fn dump_has_lp_sections() {
        let b = Behavior::uniform(Scenario::new(vec![1, 1], 2).unwrap());
        let mut buf = Vec::new();
        build_lp(&b).unwrap().dump_lp(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.contains("Minimize") && s.contains("Subject To") && s.trim_end().ends_with("End"));
        assert_eq!(s.matches(" c").count(), 4);
    }

    #[test]
    fn signaling_table_keeps_all_rows() {
        // signaling just inside the table validation tolerance
        let sc = Scenario::new(vec![2, 2], 2).unwrap();
        let mut t = vec![0.25; 16];
        t[0] += 5e-10;
        t[1] -= 5e-10;
        let lp = build_lp(&Behavior::new(sc.clone(), t).unwrap()).unwrap();
        assert_eq!(lp.row_count(), 16);
        assert_eq!(build_lp(&Behavior::uniform(sc)).unwrap().row_count(), 9);
    }
}
