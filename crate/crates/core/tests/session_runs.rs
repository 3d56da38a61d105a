use svqkd_core::analysis::{binomial_stderr, estimate_si, mismatch_rate};
use svqkd_core::protocol::{quantum_max, sift, RoundClass};
use svqkd_core::session::{public_view, run_session, SessionConfig, Verdict};

#[test]
fn same_seed_same_transcript() {
    let cfg = SessionConfig::honest(3, 2_000, 0.9, 17).unwrap();
    let a = run_session(&cfg).unwrap();
    let b = run_session(&cfg).unwrap();
    assert_eq!(a, b);
    let other = run_session(&SessionConfig { seed: 18, ..cfg }).unwrap();
    assert_ne!(a.rounds(), other.rounds());
}

#[test]
fn setting_choices_are_uniform() {
    let cfg = SessionConfig::honest(4, 40_000, 1.0, 5).unwrap();
    let t = run_session(&cfg).unwrap();
    for party in 0..4 {
        let options = cfg.profile.options(party).len();
        let mut counts = vec![0usize; options];
        for r in t.rounds() {
            counts[r.settings[party]] += 1;
        }
        for c in counts {
            let freq = c as f64 / cfg.rounds as f64;
            assert!((freq - 1.0 / options as f64).abs() < 0.01, "party {party}: {freq}");
        }
    }
}

#[test]
fn pure_ghz_keys_agree_exactly() {
    let t = run_session(&SessionConfig::honest(3, 20_000, 1.0, 3).unwrap()).unwrap();
    let report = mismatch_rate(&t).unwrap();
    assert_eq!(report.mismatches, 0);
    let sifted = sift(&t);
    assert_eq!(sifted.key.signs.len(), report.count);
    for (i, &sign) in sifted.key.signs.iter().enumerate() {
        let parity = sifted.key.bits.iter().map(|b| b[i]).sum::<u8>() % 2;
        assert_eq!(parity == 0, sign == 1);
    }
    let est = t.estimate().unwrap();
    assert!((est.value.abs() - quantum_max(3)).abs() < 4.0 * est.stderr);
    assert!(t.verdict().is_accepted());
}

#[test]
fn mismatch_tracks_visibility() {
    for v in [0.0, 0.5, 0.8] {
        let t = run_session(&SessionConfig::honest(3, 100_000, v, 9).unwrap()).unwrap();
        let report = mismatch_rate(&t).unwrap();
        let expected = (1.0 - v) / 2.0;
        assert!(
            (report.rate() - expected).abs() < 4.0 * binomial_stderr(expected, report.count).max(1e-12),
            "v = {v}: {}",
            report.rate()
        );
    }
}

#[test]
fn low_visibility_aborts_high_visibility_accepts() {
    for seed in 1..=5 {
        let low = run_session(&SessionConfig::honest(3, 40_000, 0.6, seed).unwrap()).unwrap();
        assert!(matches!(low.verdict(), Verdict::Aborted(_)));
        let high = run_session(&SessionConfig::honest(3, 40_000, 0.9, seed).unwrap()).unwrap();
        assert!(high.verdict().is_accepted());
    }
}

#[test]
fn public_view_hides_key_outcomes() {
    let t = run_session(&SessionConfig::honest(3, 500, 1.0, 8).unwrap()).unwrap();
    let view = public_view(&t);
    assert_eq!(view.rounds.len(), 500);
    for (p, r) in view.rounds.iter().zip(t.rounds()) {
        assert_eq!(p.outcomes.is_some(), matches!(r.class, RoundClass::SiTest { .. }));
    }
}

#[test]
fn stderr_shrinks_with_rounds() {
    let se = |rounds| {
        let t = run_session(&SessionConfig::honest(3, rounds, 0.9, 2).unwrap()).unwrap();
        estimate_si(&t, t.config().profile.variant()).unwrap().stderr
    };
    let ratio = se(10_000) / se(160_000);
    assert!((ratio - 4.0).abs() < 0.8, "{ratio}");
}
