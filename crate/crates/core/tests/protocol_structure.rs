use proptest::prelude::*;
use svqkd_core::protocol::{
    classical_bound, classify_round, key_sign, quantum_max, standard_profile, state_si_value, svetlichny_coefficient,
    svetlichny_value, RoundClass, SettingProfile, Variant,
};
use svqkd_core::quantum::{ghz_state, joint_distribution, werner_density};

fn census(profile: &SettingProfile) -> (usize, usize, usize) {
    let (mut key, mut si, mut discard) = (0, 0, 0);
    for index in 0..profile.joint_settings() {
        match classify_round(profile, &profile.setting_indices(index)).unwrap() {
            RoundClass::Key { .. } => key += 1,
            RoundClass::SiTest { .. } => si += 1,
            RoundClass::Discard => discard += 1,
        }
    }
    (key, si, discard)
}

#[test]
fn round_class_census() {
    for n in 3..=6 {
        let p = standard_profile(n).unwrap();
        assert_eq!(census(&p), (1 << (n - 1), 1 << n, 1 << (n - 1)), "n = {n}");
    }
}

#[test]
fn key_rounds_are_deterministic_on_ghz() {
    for n in 3..=5 {
        let p = standard_profile(n).unwrap();
        let rho = ghz_state(n).unwrap().to_density();
        for index in 0..p.joint_settings() {
            let indices = p.setting_indices(index);
            if let RoundClass::Key { sign } = classify_round(&p, &indices).unwrap() {
                let angles = p.angles(&indices).unwrap();
                assert_eq!(key_sign(&angles).unwrap(), sign);
                let dist = joint_distribution(&rho, &angles).unwrap();
                for (outcomes, prob) in dist.iter() {
                    let product: i8 = outcomes.iter().product();
                    if product != sign {
                        assert!(prob < 1e-12, "n={n} setting {indices:?} leaks {prob}");
                    }
                }
            }
        }
    }
}

#[test]
fn coefficients_follow_closed_form() {
    for n in 1..=8 {
        for t in 0..1usize << n {
            let k = t.count_ones() as i64;
            let plus = if (k * (k + 1) / 2) % 2 == 0 { 1 } else { -1 };
            let minus = if (k * (k - 1) / 2) % 2 == 0 { 1 } else { -1 };
            assert_eq!(svetlichny_coefficient(Variant::Plus, t), plus);
            assert_eq!(svetlichny_coefficient(Variant::Minus, t), minus);
        }
    }
}

fn split_last(table: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (table.iter().step_by(2).copied().collect(), table.iter().skip(1).step_by(2).copied().collect())
}

proptest! {
    #[test]
    fn recursion_over_last_party(n in 4usize..=5, raw in prop::collection::vec(-1.0f64..=1.0, 32)) {
        let table = &raw[..1 << n];
        let (zero, one) = split_last(table);
        for (variant, sign) in [(Variant::Plus, -1.0), (Variant::Minus, 1.0)] {
            let full = svetlichny_value(table, variant).unwrap();
            let rec = svetlichny_value(&zero, variant).unwrap()
                + sign * svetlichny_value(&one, variant.flipped()).unwrap();
            prop_assert!((full - rec).abs() < 1e-12);
        }
    }
}

#[test]
fn ghz_reaches_quantum_max_and_werner_scales() {
    for n in 3..=5 {
        let p = standard_profile(n).unwrap();
        let ghz = state_si_value(&p, &ghz_state(n).unwrap().to_density()).unwrap();
        assert!((ghz.abs() - quantum_max(n)).abs() < 1e-9);
        assert!(quantum_max(n) > classical_bound(n));
        let w = state_si_value(&p, &werner_density(n, 0.5).unwrap()).unwrap();
        assert!((w - 0.5 * ghz).abs() < 1e-9);
    }
}

#[test]
fn incomplete_tables_are_rejected() {
    assert!(svetlichny_value(&[1.0; 6], Variant::Plus).is_err());
    assert!(svetlichny_value(&[1.0, f64::NAN, 1.0, 1.0], Variant::Plus).is_err());
    assert!(standard_profile(2).is_err());
}
