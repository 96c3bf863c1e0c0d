//! Critical efficiency from per-frame thresholds.
//!
//! Lowering every efficiency is a local post-processing, so each frame has a
//! threshold `eta*` above which it violates. The estimate is the smallest
//! threshold among the sampled frames, optionally pushed down by a local
//! search over the best frames' directions.

use rand::Rng;

use super::{frame_verdict, sample_frame, RunConfig};
use crate::error::{Error, Result};
use crate::localpolytope::{build_lp, check_local_model, Verdict};
use crate::numeric;
use crate::parallel::{derive_seed, map_collect, stream_rng, with_workers};
use crate::quantum::{sample_direction, BlochVector, DetectionModel, MeasurementFrame, PureState};

/// Stream offset for refinement seeds, clear of the per-party seeds.
const REFINE_SEED_OFFSET: u64 = 1 << 40;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticalOptions {
    pub frames: u64,
    /// Bisection bracket width.
    pub tol: f64,
    /// Largest block of frames sharing one pruning threshold. Blocks start at
    /// 16 frames and double up to this size, so the bound tightens early.
    pub block: usize,
    /// Number of best frames handed to the local search (0 disables it).
    pub refine_frames: usize,
    pub refine_steps: usize,
    /// Initial perturbation size of the local search.
    pub refine_sigma: f64,
}

impl Default for CriticalOptions {
    fn default() -> Self {
        Self { frames: 10_000, tol: 1e-4, block: 256, refine_frames: 4, refine_steps: 6000, refine_sigma: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticalEstimate {
    /// Smallest threshold over the sampled frames.
    pub eta_sampled: f64,
    /// After local search; equal to `eta_sampled` when refinement is off.
    pub eta_refined: f64,
    pub frames: u64,
    /// Frames whose threshold was bisected (they beat the running minimum).
    pub bisected: u64,
    pub best_frame: MeasurementFrame,
}

fn violates(state: &PureState, config: &RunConfig, frame: &MeasurementFrame, eta: f64) -> bool {
    match DetectionModel::symmetric(config.model, eta, config.parties()) {
        Ok(m) => frame_verdict(state, &m, frame, config.tol) == Verdict::Nonlocal,
        Err(_) => false,
    }
}

/// Threshold of one frame if it violates at `hi`, to within `tol`.
///
/// Borderline verdicts count as local, so the result is an upper end of the
/// bracket.
pub fn frame_threshold(config: &RunConfig, frame: &MeasurementFrame, hi: f64, tol: f64) -> Option<f64> {
    if !violates(&config.state, config, frame, hi) {
        return None;
    }
    let (_, top) = numeric::bisect(0.0, hi, tol, |eta| violates(&config.state, config, frame, eta));
    Some(top)
}

/// Minimum per-frame threshold over `opts.frames` seeded frames (symmetric
/// efficiencies; `config.etas` is ignored).
///
/// Frames are processed in blocks; the running minimum is only updated
/// between blocks, so results do not depend on the worker count.
pub fn critical_eta_estimate(config: &RunConfig, opts: &CriticalOptions) -> Result<CriticalEstimate> {
    config.with_eta(1.0).validate()?;
    if opts.frames == 0 || opts.block == 0 || !(opts.tol > 0.0) {
        return Err(Error::Precondition("frames, block and tol must be positive".into()));
    }
    with_workers(config.workers, || {
        let mut best: Option<(f64, u64)> = None;
        let mut bisected = 0;
        // every frame that beat the running minimum, as refinement candidates
        let mut candidates: Vec<(f64, u64)> = Vec::new();
        let mut start = 0u64;
        let mut block = opts.block.min(16);
        while start < opts.frames {
            let len = (opts.frames - start).min(block as u64) as usize;
            block = (block * 2).min(opts.block);
            let bound = best.map_or(1.0, |(t, _)| t - opts.tol);
            let res = map_collect(
                config.exec,
                len,
                || (),
                |_, j| {
                    let idx = start + j as u64;
                    let frame = sample_frame(config.seed, idx, &config.settings).ok()?;
                    frame_threshold(config, &frame, bound, opts.tol).map(|t| (t, idx))
                },
            );
            for (t, idx) in res.into_iter().flatten() {
                bisected += 1;
                candidates.push((t, idx));
                if best.is_none_or(|(b, _)| t < b) {
                    best = Some((t, idx));
                }
            }
            if config.progress {
                eprintln!("  {}/{} frames, best {:?}", start + len as u64, opts.frames, best.map(|b| b.0));
            }
            start += len as u64;
        }
        let (eta_sampled, idx) =
            best.ok_or_else(|| Error::NoViolation(format!("none of {} frames violates at efficiency 1", opts.frames)))?;
        let mut best_frame = sample_frame(config.seed, idx, &config.settings)?;
        let mut eta_refined = eta_sampled;
        if opts.refine_frames > 0 && opts.refine_steps > 0 {
            candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            candidates.truncate(opts.refine_frames);
            let seeds = candidates
                .iter()
                .map(|&(t, i)| Ok((t, sample_frame(config.seed, i, &config.settings)?)))
                .collect::<Result<Vec<_>>>()?;
            let refined = map_collect(
                config.exec,
                seeds.len(),
                || (),
                |_, r| refine(config, opts, seeds[r].1.clone(), seeds[r].0, derive_seed(config.seed, REFINE_SEED_OFFSET + r as u64)),
            );
            for (t, f) in refined {
                if t < eta_refined {
                    eta_refined = t;
                    best_frame = f;
                }
            }
        }
        Ok(CriticalEstimate { eta_sampled, eta_refined, frames: opts.frames, bisected, best_frame })
    })
}

fn perturb<R: Rng>(v: &BlochVector, sigma: f64, rng: &mut R) -> BlochVector {
    let u = sample_direction(rng).components();
    let c = v.components();
    BlochVector::normalized(c[0] + sigma * u[0], c[1] + sigma * u[1], c[2] + sigma * u[2]).unwrap_or(*v)
}

/// Phase-one slack of a frame at `eta`; zero unless the verdict is nonlocal.
fn frame_slack(config: &RunConfig, frame: &MeasurementFrame, eta: f64) -> f64 {
    let Ok(model) = DetectionModel::symmetric(config.model, eta, config.parties()) else { return 0.0 };
    match model.behavior(&config.state, frame).and_then(|b| build_lp(&b)) {
        Ok(lp) => {
            let r = check_local_model(&lp, config.tol);
            if r.verdict == Verdict::Nonlocal {
                r.slack
            } else {
                0.0
            }
        }
        Err(_) => 0.0,
    }
}

/// (1+1) evolution strategy on the directions of one frame. A move (one
/// direction, or all of them) is kept when it increases the phase-one slack
/// at the current threshold, which is then re-bisected. The step size resets
/// once it has shrunk to its floor.
fn refine(config: &RunConfig, opts: &CriticalOptions, frame: MeasurementFrame, eta: f64, seed: u64) -> (f64, MeasurementFrame) {
    let mut rng = stream_rng(seed, 0);
    let mut cur = frame;
    let mut t = eta;
    let mut cur_slack = frame_slack(config, &cur, t);
    let mut sigma = opts.refine_sigma;
    let m = cur.settings_per_party();
    for _ in 0..opts.refine_steps {
        let mut dirs: Vec<Vec<BlochVector>> = (0..m.len()).map(|q| cur.party(q).to_vec()).collect();
        if rng.random_bool(0.5) {
            let p = rng.random_range(0..m.len());
            let k = rng.random_range(0..m[p]);
            dirs[p][k] = perturb(&dirs[p][k], sigma, &mut rng);
        } else {
            for d in dirs.iter_mut().flatten() {
                *d = perturb(d, sigma, &mut rng);
            }
        }
        let Ok(cand) = MeasurementFrame::new(dirs) else { continue };
        let s = frame_slack(config, &cand, t);
        if s > cur_slack {
            if let Some(nt) = frame_threshold(config, &cand, t, opts.tol) {
                t = t.min(nt);
            }
            cur = cand;
            cur_slack = frame_slack(config, &cur, t);
            sigma = (sigma * 1.5).min(1.0);
        } else {
            sigma *= 0.9;
            if sigma < 1e-3 {
                sigma = opts.refine_sigma;
            }
        }
    }
    (t, cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::DetectionKind;

    #[test]
    fn singlet_threshold_is_above_the_chsh_limit() {
        let c = RunConfig::new("singlet", 2, DetectionKind::Binning, 1.0, 1, 3).unwrap();
        let opts = CriticalOptions { frames: 300, refine_frames: 0, ..CriticalOptions::default() };
        let e = critical_eta_estimate(&c, &opts).unwrap();
        let limit = 2.0 / (1.0 + std::f64::consts::SQRT_2);
        assert!(e.eta_sampled >= limit - 1e-3 && e.eta_sampled < 1.0, "{}", e.eta_sampled);
        assert_eq!(e.eta_sampled, e.eta_refined);
    }

    #[test]
    fn product_state_never_violates() {
        let c = RunConfig::new("product2", 2, DetectionKind::Binning, 1.0, 1, 3).unwrap();
        let opts = CriticalOptions { frames: 20, ..CriticalOptions::default() };
        assert!(matches!(critical_eta_estimate(&c, &opts), Err(Error::NoViolation(_))));
    }
}
