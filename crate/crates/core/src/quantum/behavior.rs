use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::state::{MeasurementFrame, PureState};
use crate::error::{Error, Result};

const NEG_TOL: f64 = 1e-12;
const SUM_TOL: f64 = 1e-9;

/// Party count, settings per party and outcome alphabet size.
///
/// Setting and outcome tuples are encoded in mixed radix with party 0 as the
/// most significant digit. Outcome digits follow the order `(+1, -1)` for
/// `d = 2` and `(+1, 0, -1)` for `d = 3`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scenario {
    settings: Vec<usize>,
    outcomes: usize,
}

impl Scenario {
    pub fn new(settings: Vec<usize>, outcomes: usize) -> Result<Self> {
        if settings.is_empty() {
            return Err(Error::DimensionMismatch("scenario needs at least one party".into()));
        }
        if settings.contains(&0) {
            return Err(Error::DimensionMismatch("every party needs at least one setting".into()));
        }
        if !(2..=3).contains(&outcomes) {
            return Err(Error::DimensionMismatch(format!("outcome alphabet size {outcomes} not in {{2, 3}}")));
        }
        Ok(Self { settings, outcomes })
    }

    pub fn parties(&self) -> usize {
        self.settings.len()
    }

    pub fn settings(&self) -> &[usize] {
        &self.settings
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    pub fn setting_tuples(&self) -> usize {
        self.settings.iter().product()
    }

    pub fn outcome_tuples(&self) -> usize {
        self.outcomes.pow(self.parties() as u32)
    }

    /// Number of deterministic local strategies, `d^(sum m_i)`.
    pub fn variable_count(&self) -> u128 {
        let total: usize = self.settings.iter().sum();
        (self.outcomes as u128).checked_pow(total as u32).unwrap_or(u128::MAX)
    }

    pub fn encode_settings(&self, x: &[usize]) -> usize {
        x.iter().zip(&self.settings).fold(0, |acc, (&xi, &mi)| acc * mi + xi)
    }

    pub fn decode_settings(&self, mut idx: usize) -> Vec<usize> {
        let mut x = vec![0; self.parties()];
        for (p, &mi) in self.settings.iter().enumerate().rev() {
            x[p] = idx % mi;
            idx /= mi;
        }
        x
    }

    pub fn encode_outcomes(&self, a: &[usize]) -> usize {
        a.iter().fold(0, |acc, &ai| acc * self.outcomes + ai)
    }

    pub fn decode_outcomes(&self, mut idx: usize) -> Vec<usize> {
        let mut a = vec![0; self.parties()];
        for slot in a.iter_mut().rev() {
            *slot = idx % self.outcomes;
            idx /= self.outcomes;
        }
        a
    }

    /// Numeric value (+1, 0 or -1) of outcome digit `idx`.
    pub fn outcome_value(&self, idx: usize) -> i32 {
        outcome_value(self.outcomes, idx)
    }
}

pub(crate) fn outcome_value(d: usize, idx: usize) -> i32 {
    match (d, idx) {
        (_, 0) => 1,
        (2, 1) | (3, 2) => -1,
        _ => 0,
    }
}

/// Conditional outcome probabilities, one row of `d^N` entries per setting
/// tuple.
#[derive(Clone, Debug, PartialEq)]
pub struct Behavior {
    scenario: Scenario,
    table: Vec<f64>,
}

impl Behavior {
    /// Validates and takes ownership of a row-major table.
    ///
    /// Entries in `[-1e-12, 0)` are clamped to zero; anything more negative,
    /// rows not summing to one, or signaling marginals are rejected.
    pub fn new(scenario: Scenario, mut table: Vec<f64>) -> Result<Self> {
        let rows = scenario.setting_tuples();
        let cols = scenario.outcome_tuples();
        if table.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "table has {} entries, scenario needs {}",
                table.len(),
                rows * cols
            )));
        }
        for (i, p) in table.iter_mut().enumerate() {
            if !p.is_finite() || *p < -NEG_TOL {
                return Err(Error::InvalidBehavior(format!("entry {i} = {p}")));
            }
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        for (r, row) in table.chunks(cols).enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > SUM_TOL {
                return Err(Error::InvalidBehavior(format!("setting tuple {r} sums to {s}")));
            }
        }
        let b = Self { scenario, table };
        b.check_non_signaling()?;
        Ok(b)
    }

    fn check_non_signaling(&self) -> Result<()> {
        let sc = &self.scenario;
        let n = sc.parties();
        if n < 2 {
            return Ok(());
        }
        let d = sc.outcomes;
        let cols = sc.outcome_tuples();
        let reduced = cols / d;
        let mut reference = vec![0.0; reduced];
        let mut current = vec![0.0; reduced];
        for j in 0..n {
            let stride = d.pow((n - 1 - j) as u32);
            let marginal = |row: &[f64], out: &mut [f64]| {
                out.iter_mut().for_each(|v| *v = 0.0);
                for (o, &p) in row.iter().enumerate() {
                    let hi = o / (stride * d);
                    let lo = o % stride;
                    out[hi * stride + lo] += p;
                }
            };
            for s in 0..sc.setting_tuples() {
                let mut x = sc.decode_settings(s);
                if x[j] != 0 {
                    continue;
                }
                marginal(self.row(s), &mut reference);
                for k in 1..sc.settings[j] {
                    x[j] = k;
                    marginal(self.row(sc.encode_settings(&x)), &mut current);
                    let dev = reference.iter().zip(&current).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    if dev > SUM_TOL {
                        return Err(Error::InvalidBehavior(format!(
                            "signaling: marginal without party {j} changes by {dev:e} with its setting"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn row(&self, setting_idx: usize) -> &[f64] {
        let c = self.scenario.outcome_tuples();
        &self.table[setting_idx * c..(setting_idx + 1) * c]
    }

    pub fn prob(&self, settings: &[usize], outcomes: &[usize]) -> f64 {
        let s = self.scenario.encode_settings(settings);
        self.row(s)[self.scenario.encode_outcomes(outcomes)]
    }

    /// Marginal probability of `outcomes` for the listed `parties` under
    /// their `settings`; the remaining parties use setting 0 and are summed.
    pub fn marginal(&self, parties: &[usize], settings: &[usize], outcomes: &[usize]) -> f64 {
        let sc = &self.scenario;
        let mut x = vec![0; sc.parties()];
        for (&p, &s) in parties.iter().zip(settings) {
            x[p] = s;
        }
        let row = self.row(sc.encode_settings(&x));
        row.iter()
            .enumerate()
            .filter(|(o, _)| {
                let a = sc.decode_outcomes(*o);
                parties.iter().zip(outcomes).all(|(&p, &v)| a[p] == v)
            })
            .map(|(_, &p)| p)
            .sum()
    }

    /// Expectation of the product of outcome values (+1/0/-1) for a setting
    /// tuple.
    pub fn correlator(&self, settings: &[usize]) -> f64 {
        let sc = &self.scenario;
        let row = self.row(sc.encode_settings(settings));
        row.iter()
            .enumerate()
            .map(|(o, &p)| {
                let v: i32 = sc.decode_outcomes(o).iter().map(|&a| sc.outcome_value(a)).product();
                v as f64 * p
            })
            .sum()
    }

    /// Maximally mixed statistics.
    pub fn uniform(scenario: Scenario) -> Self {
        let c = scenario.outcome_tuples();
        let table = vec![1.0 / c as f64; scenario.setting_tuples() * c];
        Self { scenario, table }
    }

    /// Deterministic local strategy. `assignment[p][k]` is the outcome digit
    /// of party `p` under setting `k`.
    pub fn deterministic(scenario: Scenario, assignment: &[Vec<usize>]) -> Result<Self> {
        if assignment.len() != scenario.parties()
            || assignment.iter().zip(scenario.settings()).any(|(a, &m)| a.len() != m)
            || assignment.iter().flatten().any(|&o| o >= scenario.outcomes)
        {
            return Err(Error::DimensionMismatch("assignment does not fit scenario".into()));
        }
        let c = scenario.outcome_tuples();
        let mut table = vec![0.0; scenario.setting_tuples() * c];
        for s in 0..scenario.setting_tuples() {
            let x = scenario.decode_settings(s);
            let a: Vec<usize> = x.iter().enumerate().map(|(p, &k)| assignment[p][k]).collect();
            table[s * c + scenario.encode_outcomes(&a)] = 1.0;
        }
        Ok(Self { scenario, table })
    }

    /// Applies an independent classical channel to each party's outcome.
    ///
    /// `channels[p]` is a row-stochastic `d_in x d_out` matrix in row-major
    /// order; every party must map into the same `d_out`.
    pub fn apply_channels(&self, channels: &[Vec<f64>], d_out: usize) -> Result<Self> {
        let sc = &self.scenario;
        let n = sc.parties();
        let d_in = sc.outcomes;
        if channels.len() != n || channels.iter().any(|c| c.len() != d_in * d_out) {
            return Err(Error::DimensionMismatch("one d_in x d_out channel per party is required".into()));
        }
        let out_sc = Scenario::new(sc.settings.clone(), d_out)?;
        let mut dims = vec![d_in; n];
        let mut table = self.table.clone();
        for (j, ch) in channels.iter().enumerate() {
            let row_in: usize = dims.iter().product();
            let outer: usize = dims[..j].iter().product();
            let inner: usize = dims[j + 1..].iter().product();
            let row_out = outer * d_out * inner;
            let mut next = vec![0.0; sc.setting_tuples() * row_out];
            for s in 0..sc.setting_tuples() {
                let src = &table[s * row_in..(s + 1) * row_in];
                let dst = &mut next[s * row_out..(s + 1) * row_out];
                for hi in 0..outer {
                    for a in 0..d_in {
                        for lo in 0..inner {
                            let p = src[(hi * d_in + a) * inner + lo];
                            if p == 0.0 {
                                continue;
                            }
                            for b in 0..d_out {
                                dst[(hi * d_out + b) * inner + lo] += p * ch[a * d_out + b];
                            }
                        }
                    }
                }
            }
            table = next;
            dims[j] = d_out;
        }
        Behavior::new(out_sc, table)
    }

    /// Merges the no-click outcome 0 into -1, turning a three-outcome
    /// behavior into its binned counterpart.
    pub fn merge_no_click(&self) -> Result<Self> {
        if self.scenario.outcomes != 3 {
            return Err(Error::DimensionMismatch("merge_no_click needs a three-outcome behavior".into()));
        }
        let ch = vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0];
        self.apply_channels(&vec![ch; self.scenario.parties()], 2)
    }

    /// Flips outcome +1 to -1 independently per party with probability
    /// `flip[p]`.
    pub fn flip_plus(&self, flip: &[f64]) -> Result<Self> {
        if self.scenario.outcomes != 2 {
            return Err(Error::DimensionMismatch("flip_plus needs a two-outcome behavior".into()));
        }
        check_etas(flip, self.scenario.parties())?;
        let chs: Vec<Vec<f64>> = flip.iter().map(|&q| vec![1.0 - q, q, 0.0, 1.0]).collect();
        self.apply_channels(&chs, 2)
    }
}

/// How missing detector clicks are recorded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectionKind {
    /// A no-click is a separate outcome 0.
    ThreeOutcome,
    /// A no-click is reported as -1.
    Binning,
}

impl DetectionKind {
    pub fn outcomes(self) -> usize {
        match self {
            DetectionKind::ThreeOutcome => 3,
            DetectionKind::Binning => 2,
        }
    }
}

impl fmt::Display for DetectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DetectionKind::ThreeOutcome => "three-outcome",
            DetectionKind::Binning => "binning",
        })
    }
}

impl FromStr for DetectionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "three-outcome" => Ok(DetectionKind::ThreeOutcome),
            "binning" => Ok(DetectionKind::Binning),
            _ => Err(Error::config("--model", format!("unknown detection model {s:?}"))),
        }
    }
}

/// Detection model with one efficiency per party.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionModel {
    kind: DetectionKind,
    etas: Vec<f64>,
}

impl DetectionModel {
    pub fn new(kind: DetectionKind, etas: Vec<f64>) -> Result<Self> {
        check_etas(&etas, etas.len())?;
        Ok(Self { kind, etas })
    }

    pub fn symmetric(kind: DetectionKind, eta: f64, parties: usize) -> Result<Self> {
        Self::new(kind, vec![eta; parties])
    }

    pub fn kind(&self) -> DetectionKind {
        self.kind
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    /// Behavior of `state` measured in `frame` under this model.
    pub fn behavior(&self, state: &PureState, frame: &MeasurementFrame) -> Result<Behavior> {
        match self.kind {
            DetectionKind::ThreeOutcome => apply_three_outcome(&ideal_behavior(state, frame)?, &self.etas),
            DetectionKind::Binning => binned_behavior(state, frame, &self.etas),
        }
    }
}

fn check_etas(etas: &[f64], parties: usize) -> Result<()> {
    if etas.len() != parties {
        return Err(Error::DimensionMismatch(format!("{} efficiencies for {parties} parties", etas.len())));
    }
    match etas.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        Some(&e) => Err(Error::EfficiencyOutOfRange(e)),
        None => Ok(()),
    }
}

fn check_frame(state: &PureState, frame: &MeasurementFrame) -> Result<Scenario> {
    if state.parties() != frame.parties() {
        return Err(Error::DimensionMismatch(format!(
            "state has {} parties, frame has {}",
            state.parties(),
            frame.parties()
        )));
    }
    Scenario::new(frame.settings_per_party(), 2)
}

/// Projective measurement statistics with perfect detectors.
pub fn ideal_behavior(state: &PureState, frame: &MeasurementFrame) -> Result<Behavior> {
    let sc = check_frame(state, frame)?;
    let n = sc.parties();
    // bras[p][k] = rows <n+| and <n-| of party p's k-th setting
    let bras: Vec<Vec<[[Complex64; 2]; 2]>> = (0..n)
        .map(|p| {
            frame
                .party(p)
                .iter()
                .map(|d| {
                    let (plus, minus) = d.eigenvectors();
                    [[plus[0].conj(), plus[1].conj()], [minus[0].conj(), minus[1].conj()]]
                })
                .collect()
        })
        .collect();
    let cols = sc.outcome_tuples();
    let mut table = vec![0.0; sc.setting_tuples() * cols];
    let mut v = vec![Complex64::new(0.0, 0.0); cols];
    for s in 0..sc.setting_tuples() {
        let x = sc.decode_settings(s);
        v.copy_from_slice(state.amplitudes());
        for p in 0..n {
            let op = &bras[p][x[p]];
            let stride = 1 << (n - 1 - p);
            for base in 0..cols {
                if base & stride != 0 {
                    continue;
                }
                let (a0, a1) = (v[base], v[base | stride]);
                v[base] = op[0][0] * a0 + op[0][1] * a1;
                v[base | stride] = op[1][0] * a0 + op[1][1] * a1;
            }
        }
        for (o, a) in v.iter().enumerate() {
            table[s * cols + o] = a.norm_sqr();
        }
    }
    Behavior::new(sc, table)
}

/// Adds the no-click outcome 0: each party's detector fires independently
/// with probability `etas[p]`.
pub fn apply_three_outcome(ideal: &Behavior, etas: &[f64]) -> Result<Behavior> {
    if ideal.scenario().outcomes() != 2 {
        return Err(Error::DimensionMismatch("three-outcome model needs a two-outcome input".into()));
    }
    check_etas(etas, ideal.scenario().parties())?;
    let chs: Vec<Vec<f64>> = etas.iter().map(|&e| vec![e, 1.0 - e, 0.0, 0.0, 1.0 - e, e]).collect();
    ideal.apply_channels(&chs, 3)
}

/// Statistics of the two-element POVM `{eta |n+><n+|, 1 - eta |n+><n+|}`.
pub fn binned_behavior(state: &PureState, frame: &MeasurementFrame, etas: &[f64]) -> Result<Behavior> {
    let sc = check_frame(state, frame)?;
    check_etas(etas, sc.parties())?;
    let n = sc.parties();
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let povms: Vec<Vec<[[[Complex64; 2]; 2]; 2]>> = (0..n)
        .map(|p| {
            frame
                .party(p)
                .iter()
                .map(|d| {
                    let pr = d.projector();
                    let e = etas[p];
                    let plus = [[pr[0][0] * e, pr[0][1] * e], [pr[1][0] * e, pr[1][1] * e]];
                    let minus = [[one - plus[0][0], zero - plus[0][1]], [zero - plus[1][0], one - plus[1][1]]];
                    [plus, minus]
                })
                .collect()
        })
        .collect();
    let cols = sc.outcome_tuples();
    let mut table = vec![0.0; sc.setting_tuples() * cols];
    for s in 0..sc.setting_tuples() {
        let x = sc.decode_settings(s);
        for o in 0..cols {
            let a = sc.decode_outcomes(o);
            let ops: Vec<&[[Complex64; 2]; 2]> = (0..n).map(|p| &povms[p][x[p]][a[p]]).collect();
            table[s * cols + o] = state.expectation(&ops);
        }
    }
    Behavior::new(sc, table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::BlochVector;

    fn zz() -> MeasurementFrame {
        MeasurementFrame::new(vec![vec![BlochVector::z()], vec![BlochVector::z()]]).unwrap()
    }

    #[test]
    fn encodings_round_trip() {
        let sc = Scenario::new(vec![2, 3, 2], 3).unwrap();
        for s in 0..sc.setting_tuples() {
            assert_eq!(sc.encode_settings(&sc.decode_settings(s)), s);
        }
        for o in 0..sc.outcome_tuples() {
            assert_eq!(sc.encode_outcomes(&sc.decode_outcomes(o)), o);
        }
        assert_eq!(sc.decode_settings(1), vec![0, 0, 1]);
        assert_eq!(sc.variable_count(), 3u128.pow(7));
    }

    #[test]
    fn singlet_zz_anticorrelated() {
        let b = ideal_behavior(&PureState::singlet(), &zz()).unwrap();
        let r = b.row(0);
        assert!(r[0].abs() < 1e-15 && r[3].abs() < 1e-15);
        assert!((r[1] - 0.5).abs() < 1e-15 && (r[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn three_outcome_asymmetric_example() {
        let ideal = ideal_behavior(&PureState::singlet(), &zz()).unwrap();
        let b = apply_three_outcome(&ideal, &[1.0, 0.5]).unwrap();
        // outcome digits: 0 -> +1, 1 -> 0, 2 -> -1
        assert!((b.prob(&[0, 0], &[0, 1]) - 0.25).abs() < 1e-15);
        assert!((b.prob(&[0, 0], &[2, 1]) - 0.25).abs() < 1e-15);
        assert!((b.prob(&[0, 0], &[0, 2]) - 0.25).abs() < 1e-15);
        assert!((b.prob(&[0, 0], &[2, 0]) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn efficiency_validation() {
        let ideal = ideal_behavior(&PureState::singlet(), &zz()).unwrap();
        assert_eq!(apply_three_outcome(&ideal, &[1.1, 0.5]), Err(Error::EfficiencyOutOfRange(1.1)));
        assert!(binned_behavior(&PureState::singlet(), &zz(), &[-0.1, 0.5]).is_err());
        assert!(DetectionModel::new(DetectionKind::Binning, vec![0.5, 2.0]).is_err());
    }

    #[test]
    fn rejects_invalid_tables() {
        let sc = Scenario::new(vec![1, 1], 2).unwrap();
        assert!(Behavior::new(sc.clone(), vec![0.5, 0.5, 0.1, 0.0]).is_err());
        assert!(Behavior::new(sc.clone(), vec![1.0 + 1e-13, -1e-13, 0.0, 0.0]).is_ok());
        assert!(Behavior::new(sc.clone(), vec![1.1, -0.1, 0.0, 0.0]).is_err());
        // signaling: Bob's marginal depends on Alice's setting
        let sc2 = Scenario::new(vec![2, 1], 2).unwrap();
        assert!(Behavior::new(sc2, vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn frame_party_mismatch() {
        let f = MeasurementFrame::new(vec![vec![BlochVector::z()]; 3]).unwrap();
        assert!(matches!(ideal_behavior(&PureState::singlet(), &f), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn deterministic_strategy_is_valid() {
        let sc = Scenario::new(vec![2, 2], 3).unwrap();
        let b = Behavior::deterministic(sc, &[vec![0, 1], vec![2, 2]]).unwrap();
        assert_eq!(b.prob(&[1, 0], &[1, 2]), 1.0);
        assert_eq!(b.correlator(&[0, 0]), -1.0);
        assert_eq!(b.correlator(&[1, 0]), 0.0);
    }
}
