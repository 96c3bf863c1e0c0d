use serde::{Deserialize, Serialize};

use super::matrix::ConstraintMatrix;
use crate::error::{Error, Result};
use crate::quantum::{Behavior, Scenario};

/// Strategy count up to which local bounds are recomputed one strategy at a
/// time instead of by the contracted sweep.
pub(crate) const EXPLICIT_ENUMERATION_CAP: u128 = 1_000_000;

/// Linear functional on behaviors, `sum coef[s, o] P(o | s) <= local_bound`.
///
/// Coefficients share the behavior table layout: one row of `d^N` entries per
/// setting tuple.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BellFunctional {
    scenario: Scenario,
    coefficients: Vec<f64>,
    local_bound: f64,
}

impl BellFunctional {
    /// Builds a functional and computes its local bound by enumerating all
    /// deterministic strategies.
    pub fn new(scenario: Scenario, coefficients: Vec<f64>) -> Result<Self> {
        let rows = scenario.setting_tuples() * scenario.outcome_tuples();
        if coefficients.len() != rows {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {rows} table entries",
                coefficients.len()
            )));
        }
        let local_bound = local_bound(&scenario, &coefficients)?;
        Ok(Self { scenario, coefficients, local_bound })
    }

    pub(crate) fn with_bound(scenario: Scenario, coefficients: Vec<f64>, local_bound: f64) -> Self {
        Self { scenario, coefficients, local_bound }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn local_bound(&self) -> f64 {
        self.local_bound
    }

    pub fn value(&self, behavior: &Behavior) -> Result<f64> {
        if behavior.scenario() != &self.scenario {
            return Err(Error::DimensionMismatch("functional and behavior scenarios differ".into()));
        }
        Ok(dot(&self.coefficients, behavior.table()))
    }

    /// `value - local_bound`; positive means violation.
    pub fn violation(&self, behavior: &Behavior) -> Result<f64> {
        Ok(self.value(behavior)? - self.local_bound)
    }

    /// Coefficient for a (setting tuple, outcome tuple) pair.
    pub fn coefficient(&self, settings: &[usize], outcomes: &[usize]) -> f64 {
        let s = self.scenario.encode_settings(settings);
        let o = self.scenario.encode_outcomes(outcomes);
        self.coefficients[s * self.scenario.outcome_tuples() + o]
    }

    pub(crate) fn scaled(&self, factor: f64) -> Self {
        Self {
            scenario: self.scenario.clone(),
            coefficients: self.coefficients.iter().map(|c| c * factor).collect(),
            local_bound: self.local_bound * factor,
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Maximum of the functional over deterministic local strategies.
///
/// Small scenarios are enumerated strategy by strategy; larger ones use the
/// contracted sweep of the LP pricing step, which visits the same set.
pub(crate) fn local_bound(scenario: &Scenario, coefficients: &[f64]) -> Result<f64> {
    let vars = scenario.variable_count();
    if vars > super::DEFAULT_VARIABLE_CAP {
        return Err(Error::ScenarioTooLarge { vars, cap: super::DEFAULT_VARIABLE_CAP });
    }
    let mat = ConstraintMatrix::new(scenario, vars as usize);
    if vars <= EXPLICIT_ENUMERATION_CAP {
        let mut col = Vec::new();
        let mut best = f64::NEG_INFINITY;
        for j in 0..mat.vars() {
            mat.column_into(j, &mut col);
            let v: f64 = col.iter().map(|&r| coefficients[r]).sum();
            best = best.max(v);
        }
        Ok(best)
    } else {
        let mut values = vec![0.0; mat.vars()];
        mat.strategy_values(coefficients, &mut values);
        Ok(values.into_iter().fold(f64::NEG_INFINITY, f64::max))
    }
}
