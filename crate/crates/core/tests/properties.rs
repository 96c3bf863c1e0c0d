use bellpv::bounds::{pv_bound_asym, pv_bound_sym, sym_threshold, ASYM_THRESHOLD, CONTINUITY_EPS};
use bellpv::inequalities::{
    chsh_eta_value, eval_cg3, optimal_rotation, rotated_ghz_behavior, rotated_ghz_quantum_terms,
    CgThreePartyExpression,
};
use bellpv::localpolytope::{brute_force_local, build_lp, check_local_model, extract_inequality, Verdict};
use bellpv::montecarlo::sample_frame;
use bellpv::quantum::{apply_three_outcome, binned_behavior, ideal_behavior, DetectionKind, DetectionModel, PureState};
use proptest::prelude::*;

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn state(i: usize) -> PureState {
    [PureState::singlet(), PureState::ghz3(), PureState::w3(), PureState::eberhard(0.3).unwrap()][i % 4].clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lower_efficiency_is_a_flip(seed in 0u64..10_000, s in 0usize..4, e0 in 0.05f64..1.0, r in 0.0f64..1.0) {
        let st = state(s);
        let n = st.parties();
        let frame = sample_frame(seed, 0, &vec![2; n]).unwrap();
        let eta = e0 * r;
        let hi = binned_behavior(&st, &frame, &vec![e0; n]).unwrap();
        let lo = binned_behavior(&st, &frame, &vec![eta; n]).unwrap();
        let flipped = hi.flip_plus(&vec![1.0 - eta / e0; n]).unwrap();
        prop_assert!(max_diff(lo.table(), flipped.table()) < 1e-9);
    }

    #[test]
    fn merging_no_click_is_binning(seed in 0u64..10_000, s in 0usize..4, eta in 0.0f64..=1.0) {
        let st = state(s);
        let n = st.parties();
        let frame = sample_frame(seed, 1, &vec![2; n]).unwrap();
        let three = apply_three_outcome(&ideal_behavior(&st, &frame).unwrap(), &vec![eta; n]).unwrap();
        let binned = binned_behavior(&st, &frame, &vec![eta; n]).unwrap();
        prop_assert!(max_diff(three.merge_no_click().unwrap().table(), binned.table()) < 1e-9);
    }

    #[test]
    fn global_phase_is_invisible(seed in 0u64..10_000, s in 0usize..4, phase in -10.0f64..10.0) {
        let st = state(s);
        let frame = sample_frame(seed, 2, &vec![3; st.parties()]).unwrap();
        let a = ideal_behavior(&st, &frame).unwrap();
        let b = ideal_behavior(&st.with_global_phase(phase), &frame).unwrap();
        prop_assert!(max_diff(a.table(), b.table()) < 1e-12);
    }

    #[test]
    fn lp_agrees_with_vertex_oracle(seed in 0u64..100_000, eta in 0.7f64..=1.0, three in any::<bool>()) {
        let kind = if three { DetectionKind::ThreeOutcome } else { DetectionKind::Binning };
        let st = PureState::singlet();
        let frame = sample_frame(seed, 0, &[2, 2]).unwrap();
        let b = DetectionModel::symmetric(kind, eta, 2).unwrap().behavior(&st, &frame).unwrap();
        let r = check_local_model(&build_lp(&b).unwrap(), 1e-9);
        if r.verdict != Verdict::Borderline {
            prop_assert_eq!(r.verdict == Verdict::Local, brute_force_local(&b).unwrap());
        }
        if r.verdict == Verdict::Nonlocal {
            let f = extract_inequality(&r).unwrap();
            prop_assert!(f.value(&b).unwrap() > f.local_bound());
        }
    }

    #[test]
    fn locality_is_monotone_in_efficiency(seed in 0u64..100_000) {
        let st = PureState::singlet();
        let frame = sample_frame(seed, 0, &[2, 2]).unwrap();
        let mut seen_local = false;
        for k in (0..=20).rev() {
            let eta = 0.6 + 0.02 * k as f64;
            let b = binned_behavior(&st, &frame, &[eta, eta]).unwrap();
            let v = check_local_model(&build_lp(&b).unwrap(), 1e-9).verdict;
            if seen_local {
                prop_assert_ne!(v, Verdict::Nonlocal, "nonlocal at {} below a local efficiency", eta);
            }
            seen_local |= v == Verdict::Local;
        }
    }

    #[test]
    fn more_settings_never_lose_a_violation(seed in 0u64..100_000) {
        let st = PureState::singlet();
        let model = DetectionModel::symmetric(DetectionKind::Binning, 0.9, 2).unwrap();
        let big = sample_frame(seed, 0, &[4, 4]).unwrap();
        let mut prev = Verdict::Local;
        for m in 2..=4 {
            let b = model.behavior(&st, &big.prefix(&[m, m]).unwrap()).unwrap();
            let v = check_local_model(&build_lp(&b).unwrap(), 1e-9).verdict;
            if prev == Verdict::Nonlocal {
                prop_assert_ne!(v, Verdict::Local);
            }
            prev = v;
        }
    }

    #[test]
    fn cg3_scaling_law(eta in 0.0f64..=1.0) {
        let t = rotated_ghz_quantum_terms(optimal_rotation()).unwrap();
        let v = eval_cg3(&rotated_ghz_behavior(optimal_rotation(), eta).unwrap(), &CgThreePartyExpression::iabc1()).unwrap();
        let law = eta.powi(3) * (t.i222 + t.j222) - eta * eta * t.k22;
        prop_assert!((v - law).abs() < 1e-9);
        let t0 = rotated_ghz_quantum_terms(0.0).unwrap();
        let v2 = eval_cg3(&rotated_ghz_behavior(0.0, eta).unwrap(), &CgThreePartyExpression::iabc2()).unwrap();
        prop_assert!((v2 - (eta.powi(3) * (t0.i_tilde + t0.j_tilde) - eta * eta * t0.k_tilde)).abs() < 1e-9);
    }

    #[test]
    fn dressed_chsh_is_affine_in_q(q1 in 2.0f64..3.5, q2 in 2.0f64..3.5, ea in 0.0f64..=1.0, eb in 0.0f64..=1.0, t in 0.0f64..=1.0) {
        let mix = chsh_eta_value(t * q1 + (1.0 - t) * q2, ea, eb);
        let sep = t * chsh_eta_value(q1, ea, eb) + (1.0 - t) * chsh_eta_value(q2, ea, eb);
        prop_assert!((mix - sep).abs() < 1e-12);
        prop_assert!((chsh_eta_value(q1, 1.0, 1.0) - q1).abs() < 1e-15);
    }
}

#[test]
fn closed_forms_are_monotone_and_ordered() {
    let mut prev_a = 0.0;
    let mut prev_s = 0.0;
    for k in 0..=200 {
        let eta = ASYM_THRESHOLD + (1.0 - ASYM_THRESHOLD) * k as f64 / 200.0;
        let a = pv_bound_asym(eta).unwrap().value;
        assert!(a >= prev_a - 1e-15, "asym not monotone at {eta}");
        prev_a = a;
        if eta >= sym_threshold() {
            let s = pv_bound_sym(eta).unwrap().value;
            assert!(s >= prev_s - 1e-15, "sym not monotone at {eta}");
            // the asymmetric form is evaluated just below 1 by continuity
            let slack = if eta > 1.0 - CONTINUITY_EPS { 1e-5 } else { 1e-12 };
            assert!(s <= a + slack, "sym above asym at {eta}");
            prev_s = s;
        }
    }
}

#[test]
fn models_agree_at_full_efficiency() {
    let st = PureState::singlet();
    for i in 0..300 {
        let frame = sample_frame(99, i, &[2, 2]).unwrap();
        let v: Vec<Verdict> = [DetectionKind::ThreeOutcome, DetectionKind::Binning]
            .iter()
            .map(|&k| {
                let b = DetectionModel::symmetric(k, 1.0, 2).unwrap().behavior(&st, &frame).unwrap();
                check_local_model(&build_lp(&b).unwrap(), 1e-9).verdict
            })
            .collect();
        assert_eq!(v[0], v[1], "sample {i}");
    }
}
