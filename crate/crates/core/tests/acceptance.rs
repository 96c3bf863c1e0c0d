//! Acceptance checks. Run with `cargo test --test acceptance`; prints one
//! line per criterion.
//!
//! A few criteria are known to fail as stated (see `KNOWN_RED` and the
//! README). The run fails if any other criterion fails, or if a known red one
//! unexpectedly passes, so the list stays honest.

use std::f64::consts::PI;
use std::process::Command;
use std::time::{Duration, Instant};

use bellpv::bounds::{
    pv_bound_asym, pv_bound_geometric_mc, pv_bound_quadrature, pv_bound_quadrature_with, pv_bound_sym,
    sym_threshold, XInterval, ASYM_THRESHOLD,
};
use bellpv::inequalities::{
    cg3_eta_critical, cg3_local_maximum, eval_cg3, ic_local_maximum, optimal_rotation, rotated_ghz_behavior,
    rotated_ghz_quantum_terms, CgThreePartyExpression, IC_LOCAL_BOUND,
};
use bellpv::localpolytope::{brute_force_local, build_lp, check_local_model, Verdict};
use bellpv::montecarlo::{
    compare_models, critical_eta_estimate, estimate_pv, frame_verdict, relative_growth, sample_frame,
    sample_verdicts, wilson_interval, CriticalOptions, RunConfig, Sidedness,
};
use bellpv::parallel::Execution;
use bellpv::quantum::{DetectionKind, DetectionModel, PureState};

const KNOWN_RED: &[u32] = &[9, 10, 11];

struct Outcome {
    id: u32,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

fn timed(id: u32, f: impl FnOnce() -> (bool, String)) -> Outcome {
    let t = Instant::now();
    let (pass, detail) = f();
    let o = Outcome { id, pass, detail, elapsed: t.elapsed() };
    println!(
        "[{}] criterion {:>2}: {} ({:.1}s)",
        if o.pass { "PASS" } else { "FAIL" },
        o.id,
        o.detail,
        o.elapsed.as_secs_f64()
    );
    o
}

fn config(state: &str, m: usize, kind: DetectionKind, eta: f64, n: u64, seed: u64) -> RunConfig {
    RunConfig::new(state, m, kind, eta, n, seed).unwrap()
}

fn c1() -> (bool, String) {
    let t = Instant::now();
    let mut c = config("singlet", 2, DetectionKind::Binning, 1.0, 100_000, 1);
    c.exec = Execution::Sequential;
    let r = estimate_pv(&c).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let pass = (0.278..=0.288).contains(&r.p_hat) && secs <= 300.0;
    (pass, format!("singlet m=2 eta=1 n=1e5: p_hat={:.5}, sequential {secs:.1}s", r.p_hat))
}

fn c2() -> (bool, String) {
    let target = 2.0 * (PI - 3.0);
    let a1 = pv_bound_asym(1.0).unwrap().value;
    let s1 = pv_bound_sym(1.0).unwrap().value;
    let a0 = pv_bound_asym(ASYM_THRESHOLD).unwrap().value;
    let s0 = pv_bound_sym(sym_threshold()).unwrap().value;
    let pass = (a1 - target).abs() <= 1e-4 && (s1 - target).abs() <= 1e-4 && a0.abs() <= 1e-9 && s0.abs() <= 1e-9;
    (pass, format!("asym(1)={a1:.7} sym(1)={s1:.7} vs {target:.7}; at thresholds {a0:e} {s0:e}"))
}

fn grid(lo: f64, k: usize) -> f64 {
    lo + (1.0 - lo) * k as f64 / 100.0
}

fn c3() -> (bool, String) {
    let mut worst_a = 0.0f64;
    let mut worst_s = 0.0f64;
    for k in 1..=100 {
        let e = grid(ASYM_THRESHOLD, k);
        worst_a = worst_a.max((pv_bound_asym(e).unwrap().value - pv_bound_quadrature(1.0, e).unwrap().value).abs());
        let e = grid(sym_threshold(), k);
        let q = pv_bound_quadrature_with(e, e, XInterval::Printed).unwrap().value;
        worst_s = worst_s.max((pv_bound_sym(e).unwrap().value - q).abs());
    }
    let mut worst_z = 0.0f64;
    for (i, (a, b)) in [(1.0, 1.0), (1.0, 0.9), (0.9, 0.9), (0.95, 0.85)].into_iter().enumerate() {
        let q = pv_bound_quadrature(a, b).unwrap().value;
        let mc = pv_bound_geometric_mc(a, b, 1_000_000, 100 + i as u64).unwrap();
        worst_z = worst_z.max((q - mc.value).abs() / mc.error_estimate);
    }
    let pass = worst_a <= 1e-6 && worst_s <= 1e-6 && worst_z <= 4.0;
    (pass, format!("closed vs quadrature max diff asym {worst_a:.2e} sym {worst_s:.2e}; quadrature vs MC max {worst_z:.2} s.e."))
}

fn c4() -> (bool, String) {
    let mut pass = true;
    let mut parts = Vec::new();
    for (case, tol) in [("asym", 0.06), ("sym", 0.05)] {
        for (i, eta) in [0.90, 0.95, 1.00].into_iter().enumerate() {
            let mut c = config("singlet", 2, DetectionKind::ThreeOutcome, eta, 100_000, 40 + i as u64);
            let bound = if case == "asym" {
                c.etas = vec![1.0, eta];
                pv_bound_asym(eta).unwrap().value
            } else {
                pv_bound_sym(eta).unwrap().value
            };
            let p = estimate_pv(&c).unwrap().p_hat;
            let rel = (p - bound).abs() / p;
            pass &= rel <= tol;
            parts.push(format!("{case} {eta:.2}: p_hat={p:.4} bound={bound:.4} rel={rel:.3}"));
        }
    }
    (pass, parts.join("; "))
}

fn c5() -> (bool, String) {
    let cases: [(&str, DetectionKind, f64, f64, usize); 4] = [
        ("singlet", DetectionKind::Binning, 0.8284 - 0.005, 0.8284 + 0.005, 300),
        ("ghz3", DetectionKind::Binning, 0.667 - 0.01, 0.667 + 0.01, 6000),
        ("w3", DetectionKind::Binning, 0.667 - 0.01, 0.667 + 0.01, 20000),
        ("ghz3", DetectionKind::ThreeOutcome, 0.0, 0.74, 1000),
    ];
    let t = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for (state, kind, lo, hi, steps) in cases {
        let c = config(state, 2, kind, 1.0, 1, 2024);
        let opts = CriticalOptions { frames: 10_000, refine_steps: steps, ..CriticalOptions::default() };
        let e = critical_eta_estimate(&c, &opts).unwrap();
        let ok = (lo..=hi).contains(&e.eta_refined);
        pass &= ok;
        parts.push(format!("{state} {kind}: {:.4} (sampled {:.4}){}", e.eta_refined, e.eta_sampled, if ok { "" } else { " OUT" }));
    }
    let secs = t.elapsed().as_secs_f64();
    pass &= secs <= 1800.0;
    (pass, parts.join("; "))
}

fn c6() -> (bool, String) {
    let t = rotated_ghz_quantum_terms(optimal_rotation()).unwrap();
    let e000 = t.terms.e[0];
    let s10 = 10f64.sqrt();
    let crit1 = cg3_eta_critical(t.i222, t.j222, t.k22).unwrap();
    let t0 = rotated_ghz_quantum_terms(0.0).unwrap();
    let crit2 = cg3_eta_critical(t0.i_tilde, t0.j_tilde, t0.k_tilde).unwrap();
    let iabc1 = CgThreePartyExpression::iabc1();
    let f = |eta: f64| eval_cg3(&rotated_ghz_behavior(optimal_rotation(), eta).unwrap(), &iabc1).unwrap();
    let (mut lo, mut hi) = (0.5, 1.0);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    let target = (s10 - 1.0) / 3.0;
    let exact = [
        (e000, 3.0 / s10),
        (t.i222, 160f64.sqrt()),
        (t.j222, 4.0),
        (t.k22, 12.0),
        (crit1, target),
        (crit2, 0.75),
    ];
    let worst = exact.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let pass = worst <= 1e-12 && (root - target).abs() <= 1e-6;
    (pass, format!("E000={e000:.12} I={:.12} J={} K={}; crit {crit1:.12} {crit2:.12}; root {root:.9}; max err {worst:.1e}", t.i222, t.j222, t.k22))
}

fn c7() -> (bool, String) {
    let (m1, n1) = cg3_local_maximum(&CgThreePartyExpression::iabc1()).unwrap();
    let (m2, _) = cg3_local_maximum(&CgThreePartyExpression::iabc2()).unwrap();
    let (mi, ni) = ic_local_maximum().unwrap();
    let pass = m1 <= 1e-12 && m2 <= 1e-12 && mi <= IC_LOCAL_BOUND + 1e-12;
    (pass, format!("max over {n1} strategies: iabc1 {m1} iabc2 {m2}; I_C max over {ni} strategies {mi}"))
}

fn c8() -> (bool, String) {
    let st = PureState::singlet();
    let mut checked = 0;
    let mut agree = 0;
    let mut border = 0;
    for kind in [DetectionKind::ThreeOutcome, DetectionKind::Binning] {
        for eta in [0.85, 0.95] {
            let model = DetectionModel::symmetric(kind, eta, 2).unwrap();
            for i in 0..1000 {
                let b = model.behavior(&st, &sample_frame(8, i, &[2, 2]).unwrap()).unwrap();
                let r = check_local_model(&build_lp(&b).unwrap(), 1e-9);
                if r.verdict == Verdict::Borderline {
                    border += 1;
                    continue;
                }
                checked += 1;
                if (r.verdict == Verdict::Local) == brute_force_local(&b).unwrap() {
                    agree += 1;
                }
            }
        }
    }
    (agree == checked, format!("{agree}/{checked} agree, {border} borderline excluded"))
}

fn c9() -> (bool, String) {
    let st = PureState::singlet();
    let mut pass = true;
    let mut parts = Vec::new();
    for eta in [0.85, 0.90, 0.95, 1.0] {
        let c = config("singlet", 2, DetectionKind::Binning, eta, 1000, 9);
        let r = compare_models(&c).unwrap();
        pass &= r.disagree == 0;
        // direction of each disagreement: (three-outcome, binning)
        let mut only_three = 0;
        for &i in &r.examples {
            let f = sample_frame(9, i, &[2, 2]).unwrap();
            let v3 = frame_verdict(&st, &DetectionModel::symmetric(DetectionKind::ThreeOutcome, eta, 2).unwrap(), &f, c.tol);
            if v3 == Verdict::Nonlocal {
                only_three += 1;
            }
        }
        parts.push(format!(
            "eta {eta:.2}: {}/{} agree ({} borderline){}",
            r.agree,
            r.agree + r.disagree,
            r.excluded,
            if r.disagree > 0 { format!(", {only_three}/{} listed disagreements are three-outcome-only", r.examples.len()) } else { String::new() }
        ));
    }
    (pass, parts.join("; "))
}

fn c10() -> (bool, String) {
    let base = config("singlet", 5, DetectionKind::Binning, 0.90, 10_000, 10);
    let verdicts: Vec<Vec<Verdict>> = (2..=5).map(|m| sample_verdicts(&base.with_settings(m)).unwrap()).collect();
    let p: Vec<f64> = verdicts
        .iter()
        .map(|v| v.iter().filter(|&&x| x == Verdict::Nonlocal).count() as f64 / v.len() as f64)
        .collect();
    let increasing = p.windows(2).all(|w| w[1] > w[0]);
    let mut broken = 0;
    for w in verdicts.windows(2) {
        broken += w[0].iter().zip(&w[1]).filter(|(a, b)| **a == Verdict::Nonlocal && **b == Verdict::Local).count();
    }
    let pass = increasing && p[3] > 0.95 && broken == 0;
    let ps: Vec<String> = p.iter().map(|x| format!("{x:.4}")).collect();
    (pass, format!("p_hat m=2..5: {}; nested dominance violations {broken}", ps.join(" ")))
}

fn c11() -> (bool, String) {
    let (l1, _) = wilson_interval(270, 270, 0.95, Sidedness::One).unwrap();
    let (l2, _) = wilson_interval(2700, 2700, 0.95, Sidedness::One).unwrap();
    (l1 >= 0.99 && l2 >= 0.999, format!("lower(270/270)={l1:.6} lower(2700/2700)={l2:.6}"))
}

fn c12() -> (bool, String) {
    let base = config("singlet", 2, DetectionKind::Binning, 1.0, 100_000, 12);
    let p: Vec<f64> = (2..=4).map(|m| estimate_pv(&base.with_settings(m)).unwrap().p_hat).collect();
    let g23 = relative_growth(p[0], p[1]).unwrap();
    let g34 = relative_growth(p[1], p[2]).unwrap();
    let pass = (160.0..=195.0).contains(&g23) && (15.0..=31.0).contains(&g34);
    (pass, format!("p_hat {:.4} {:.4} {:.4}; growth 2->3 {g23:.2}%, 3->4 {g34:.2}%", p[0], p[1], p[2]))
}

fn run_estimate(workers: &str) -> Vec<u8> {
    let o = Command::new(env!("CARGO_BIN_EXE_bellpv"))
        .args(["estimate", "--state", "w3", "--model", "three-outcome", "--eta", "0.9", "--samples", "500", "--seed", "13"])
        .args(["--workers", workers])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    o.stdout
}

fn c13() -> (bool, String) {
    let a = run_estimate("1");
    let same = ["2", "4"].iter().all(|w| run_estimate(w) == a);
    (same, format!("estimate with --workers 1, 2, 4: {}", if same { "byte-identical" } else { "outputs differ" }))
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let checks: [(u32, fn() -> (bool, String)); 13] =
        [(1, c1), (2, c2), (3, c3), (4, c4), (5, c5), (6, c6), (7, c7), (8, c8), (9, c9), (10, c10), (11, c11), (12, c12), (13, c13)];
    let results: Vec<Outcome> = checks.iter().map(|&(id, f)| timed(id, f)).collect();
    let mut bad = Vec::new();
    for r in &results {
        let expected_red = KNOWN_RED.contains(&r.id);
        if r.pass == expected_red {
            bad.push(r.id);
        }
    }
    let passed = results.iter().filter(|r| r.pass).count();
    println!("{passed}/{} criteria pass; known red: {KNOWN_RED:?}", results.len());
    if !bad.is_empty() {
        println!("unexpected results for criteria {bad:?}");
        std::process::exit(1);
    }
}
