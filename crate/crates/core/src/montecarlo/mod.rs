//! Seeded Monte Carlo estimation of the probability of violation.
//!
//! Sample `i` draws party `p`'s directions from
//! `stream_rng(derive_seed(seed, p), i)`, so frames depend only on the master
//! seed and the sample index. Frames with more settings extend those with
//! fewer, and the same frame is used under every detection model.

mod critical;
mod wilson;

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

pub use critical::{critical_eta_estimate, frame_threshold, CriticalEstimate, CriticalOptions};
pub use wilson::{wilson_interval, z_score, Sidedness};

use crate::error::{Error, Result};
use crate::localpolytope::{build_lp, check_local_model, check_size, Verdict, DEFAULT_TOL, DEFAULT_VARIABLE_CAP};
use crate::parallel::{derive_seed, map_collect, stream_rng, with_workers, Execution};
use crate::quantum::{DetectionKind, DetectionModel, MeasurementFrame, PureState, Scenario};

/// Offset separating per-point seeds of a sweep from per-party seeds.
const SWEEP_SEED_OFFSET: u64 = 1 << 32;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// State name as accepted by [`PureState::from_name`].
    pub state_name: String,
    pub state: PureState,
    pub settings: Vec<usize>,
    pub model: DetectionKind,
    pub etas: Vec<f64>,
    pub samples: u64,
    pub seed: u64,
    pub tol: f64,
    pub workers: Option<usize>,
    pub exec: Execution,
    pub confidence: f64,
    pub sided: Sidedness,
    pub progress: bool,
}

impl RunConfig {
    /// Symmetric config with `m` settings per party and default tolerances.
    pub fn new(state_name: &str, m: usize, model: DetectionKind, eta: f64, samples: u64, seed: u64) -> Result<Self> {
        let state = PureState::from_name(state_name)?;
        let n = state.parties();
        Ok(Self {
            state_name: state_name.to_string(),
            state,
            settings: vec![m; n],
            model,
            etas: vec![eta; n],
            samples,
            seed,
            tol: DEFAULT_TOL,
            workers: None,
            exec: Execution::Parallel,
            confidence: 0.95,
            sided: Sidedness::One,
            progress: false,
        })
    }

    pub fn parties(&self) -> usize {
        self.state.parties()
    }

    pub fn with_settings(&self, m: usize) -> Self {
        Self { settings: vec![m; self.parties()], ..self.clone() }
    }

    pub fn with_eta(&self, eta: f64) -> Self {
        Self { etas: vec![eta; self.parties()], ..self.clone() }
    }

    pub fn with_model(&self, model: DetectionKind) -> Self {
        Self { model, ..self.clone() }
    }

    pub fn detection_model(&self) -> Result<DetectionModel> {
        DetectionModel::new(self.model, self.etas.clone())
    }

    pub fn scenario(&self) -> Result<Scenario> {
        Scenario::new(self.settings.clone(), self.model.outcomes())
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::config("--samples", "must be at least 1"));
        }
        if self.settings.len() != self.parties() {
            return Err(Error::config(
                "--settings",
                format!("{} setting counts for a {}-party state", self.settings.len(), self.parties()),
            ));
        }
        if self.etas.len() != self.parties() {
            return Err(Error::config("--eta", format!("{} efficiencies for a {}-party state", self.etas.len(), self.parties())));
        }
        if !(self.tol > 0.0) {
            return Err(Error::config("--tol", "must be positive"));
        }
        self.detection_model()?;
        check_size(&self.scenario()?, DEFAULT_VARIABLE_CAP)?;
        Ok(())
    }
}

/// Frame of sample `index` under master seed `seed`.
pub fn sample_frame(seed: u64, index: u64, settings: &[usize]) -> Result<MeasurementFrame> {
    let mut rngs: Vec<_> = (0..settings.len()).map(|p| stream_rng(derive_seed(seed, p as u64), index)).collect();
    MeasurementFrame::sample(settings, &mut rngs)
}

/// LP verdict for one frame; construction failures count as borderline.
pub fn frame_verdict(state: &PureState, model: &DetectionModel, frame: &MeasurementFrame, tol: f64) -> Verdict {
    match model.behavior(state, frame).and_then(|b| build_lp(&b)) {
        Ok(lp) => check_local_model(&lp, tol).verdict,
        Err(_) => Verdict::Borderline,
    }
}

/// Per-sample verdicts, in sample order.
pub fn sample_verdicts(config: &RunConfig) -> Result<Vec<Verdict>> {
    config.validate()?;
    let model = config.detection_model()?;
    let n = config.samples as usize;
    let done = AtomicUsize::new(0);
    let step = (n / 10).max(1);
    Ok(with_workers(config.workers, || {
        map_collect(
            config.exec,
            n,
            || (),
            |_, i| {
                let v = match sample_frame(config.seed, i as u64, &config.settings) {
                    Ok(frame) => frame_verdict(&config.state, &model, &frame, config.tol),
                    Err(_) => Verdict::Borderline,
                };
                if config.progress {
                    let c = done.fetch_add(1, Ordering::Relaxed) + 1;
                    if c % step == 0 {
                        eprintln!("  {c}/{n} samples");
                    }
                }
                v
            },
        )
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub state: String,
    pub model: DetectionKind,
    pub parties: usize,
    pub settings: Vec<usize>,
    pub eta: Vec<f64>,
    pub seed: u64,
    pub tol: f64,
    pub n: u64,
    pub k: u64,
    pub borderline: u64,
    pub p_hat: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub z: f64,
    pub sidedness: Sidedness,
}

pub const CSV_HEADER: &str = "state,model,N,m,eta,n,k,borderline,p_hat,wilson_low,wilson_high,seed";

impl EstimateRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.state,
            self.model,
            self.parties,
            join_uniform(&self.settings, |m| m.to_string()),
            join_uniform(&self.eta, |e| sig6(*e)),
            self.n,
            self.k,
            self.borderline,
            sig6(self.p_hat),
            sig6(self.wilson_low),
            sig6(self.wilson_high),
            self.seed
        )
    }
}

/// One value when all entries agree, else `;`-separated.
fn join_uniform<T: PartialEq>(v: &[T], f: impl Fn(&T) -> String) -> String {
    if v.windows(2).all(|w| w[0] == w[1]) && !v.is_empty() {
        f(&v[0])
    } else {
        v.iter().map(f).collect::<Vec<_>>().join(";")
    }
}

/// Six significant digits, trailing zeros trimmed.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let e = x.abs().log10().floor() as i32;
    let s = if !(-5..6).contains(&e) {
        format!("{x:.5e}")
    } else {
        format!("{:.*}", (5 - e).max(0) as usize, x)
    };
    if s.contains('.') && !s.contains('e') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn write_csv<W: Write>(mut w: W, records: &[EstimateRecord]) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

fn record(config: &RunConfig, k: u64, borderline: u64) -> Result<EstimateRecord> {
    let n = config.samples;
    let (wilson_low, wilson_high) = wilson_interval(k, n, config.confidence, config.sided)?;
    Ok(EstimateRecord {
        state: config.state_name.clone(),
        model: config.model,
        parties: config.parties(),
        settings: config.settings.clone(),
        eta: config.etas.clone(),
        seed: config.seed,
        tol: config.tol,
        n,
        k,
        borderline,
        p_hat: k as f64 / n as f64,
        wilson_low,
        wilson_high,
        z: z_score(config.confidence, config.sided),
        sidedness: config.sided,
    })
}

/// Counts nonlocal samples; borderline samples are neither counted as
/// violations nor dropped from `n`.
pub fn estimate_pv(config: &RunConfig) -> Result<EstimateRecord> {
    let v = sample_verdicts(config)?;
    let k = v.iter().filter(|&&x| x == Verdict::Nonlocal).count() as u64;
    let b = v.iter().filter(|&&x| x == Verdict::Borderline).count() as u64;
    record(config, k, b)
}

/// Seed used for point `index` of a sweep.
pub fn sweep_point_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, SWEEP_SEED_OFFSET + index as u64)
}

/// One symmetric estimate per grid point, each with its own derived seed.
pub fn sweep_eta(config: &RunConfig, grid: &[f64]) -> Result<Vec<EstimateRecord>> {
    if grid.is_empty() {
        return Err(Error::config("--eta-grid", "grid is empty"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("--eta-grid", "grid must be strictly ascending"));
    }
    grid.iter()
        .enumerate()
        .map(|(i, &eta)| {
            let c = RunConfig { seed: sweep_point_seed(config.seed, i), ..config.with_eta(eta) };
            if config.progress {
                eprintln!("eta = {}", sig6(eta));
            }
            estimate_pv(&c)
        })
        .collect()
}

/// Per-sample agreement between the two detection models on shared frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelAgreement {
    pub eta: Vec<f64>,
    pub n: u64,
    pub agree: u64,
    pub disagree: u64,
    /// Samples where either model was borderline.
    pub excluded: u64,
    /// First few disagreeing sample indices.
    pub examples: Vec<u64>,
}

impl ModelAgreement {
    pub fn rate(&self) -> f64 {
        let m = self.agree + self.disagree;
        if m == 0 {
            1.0
        } else {
            self.agree as f64 / m as f64
        }
    }
}

pub fn compare_models(config: &RunConfig) -> Result<ModelAgreement> {
    let a = sample_verdicts(&config.with_model(DetectionKind::ThreeOutcome))?;
    let b = sample_verdicts(&config.with_model(DetectionKind::Binning))?;
    let mut out = ModelAgreement { eta: config.etas.clone(), n: config.samples, agree: 0, disagree: 0, excluded: 0, examples: Vec::new() };
    for (i, (x, y)) in a.iter().zip(&b).enumerate() {
        if *x == Verdict::Borderline || *y == Verdict::Borderline {
            out.excluded += 1;
        } else if x == y {
            out.agree += 1;
        } else {
            out.disagree += 1;
            if out.examples.len() < 10 {
                out.examples.push(i as u64);
            }
        }
    }
    Ok(out)
}

/// Percent growth `100 (p_m2 - p_m1) / p_m1`.
pub fn relative_growth(p_m1: f64, p_m2: f64) -> Result<f64> {
    if p_m1 <= 0.0 {
        return Err(Error::Precondition(format!("base probability must be positive, got {p_m1}")));
    }
    Ok(100.0 * (p_m2 - p_m1) / p_m1)
}
