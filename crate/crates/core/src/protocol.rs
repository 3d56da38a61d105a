//! Measurement-setting profiles, round classification, the key-sign rule and the
//! coefficient structure of the N-partite Svetlichny operator.
//!
//! Setting tuples `x ∈ {0,1}^N` are encoded as integers with party 1 in the most
//! significant bit, so a correlator table is a dense slice of length `2^N`.

use std::f64::consts::{FRAC_PI_4, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{self, outcome_bit, DensityMatrix, PlanarAngle};
use crate::session::Transcript;

/// Angles closer than this (mod 2π) are the same direction.
pub const ANGLE_TOL: f64 = 1e-9;

/// Which Svetlichny operator S^± a correlator table is tested against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Plus,
    Minus,
}

impl Variant {
    pub fn flipped(self) -> Variant {
        match self {
            Variant::Plus => Variant::Minus,
            Variant::Minus => Variant::Plus,
        }
    }
}

/// Party-1 angles for the two Svetlichny settings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AngleConvention {
    /// (−π/4, π/4), the three-party layout.
    Tripartite,
    /// (π/4, 3π/4), the N-party layout.
    General,
}

impl AngleConvention {
    pub fn party_one_si_angles(self) -> [f64; 2] {
        match self {
            AngleConvention::Tripartite => [-FRAC_PI_4, FRAC_PI_4],
            AngleConvention::General => [FRAC_PI_4, 3.0 * FRAC_PI_4],
        }
    }
}

/// Per-party measurement options. Party 1 has four (two Svetlichny settings followed by
/// σ_x and σ_y); every other party has two.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProfile", into = "RawProfile")]
pub struct SettingProfile {
    options: Vec<Vec<PlanarAngle>>,
    variant: Variant,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    options: Vec<Vec<PlanarAngle>>,
}

impl TryFrom<RawProfile> for SettingProfile {
    type Error = Error;

    fn try_from(raw: RawProfile) -> Result<Self> {
        SettingProfile::new(raw.options)
    }
}

impl From<SettingProfile> for RawProfile {
    fn from(p: SettingProfile) -> Self {
        RawProfile { options: p.options }
    }
}

impl SettingProfile {
    /// Validates option counts and picks the Svetlichny variant that the GHZ state
    /// violates maximally at these angles.
    pub fn new(options: Vec<Vec<PlanarAngle>>) -> Result<Self> {
        let n = options.len();
        if n < 3 {
            return Err(Error::UnsupportedPartyCount(n));
        }
        if n > quantum::MAX_PARTIES {
            return Err(Error::InvalidPartyCount(n));
        }
        if options[0].len() != 4 {
            return Err(Error::InvalidConfig(format!(
                "party 1 needs 4 options, got {}",
                options[0].len()
            )));
        }
        if let Some((p, o)) = options.iter().enumerate().skip(1).find(|(_, o)| o.len() != 2) {
            return Err(Error::InvalidConfig(format!("party {} needs 2 options, got {}", p + 1, o.len())));
        }
        let mut profile = SettingProfile { options, variant: Variant::Minus };
        profile.variant = profile.matched_variant();
        Ok(profile)
    }

    pub fn with_convention(n: usize, convention: AngleConvention) -> Result<Self> {
        if n < 3 {
            return Err(Error::UnsupportedPartyCount(n));
        }
        let [s0, s1] = convention.party_one_si_angles();
        let mut options = vec![vec![
            PlanarAngle::new(s0),
            PlanarAngle::new(s1),
            PlanarAngle::X,
            PlanarAngle::Y,
        ]];
        options.extend((1..n).map(|_| vec![PlanarAngle::X, PlanarAngle::Y]));
        SettingProfile::new(options)
    }

    pub fn parties(&self) -> usize {
        self.options.len()
    }

    pub fn options(&self, party: usize) -> &[PlanarAngle] {
        &self.options[party]
    }

    pub fn all_options(&self) -> &[Vec<PlanarAngle>] {
        &self.options
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// 4·2^{n−1}.
    pub fn joint_settings(&self) -> usize {
        4 << (self.parties() - 1)
    }

    /// Dense index of a joint setting: party 1's option (0..4) above the others' bits.
    pub fn setting_index(&self, indices: &[usize]) -> Result<usize> {
        self.check_indices(indices)?;
        Ok(indices[1..].iter().fold(indices[0], |acc, &i| (acc << 1) | i))
    }

    pub fn setting_indices(&self, index: usize) -> Vec<usize> {
        let n = self.parties();
        let mut out = vec![index >> (n - 1)];
        out.extend((1..n).map(|p| (index >> (n - 1 - p)) & 1));
        out
    }

    pub fn angles(&self, indices: &[usize]) -> Result<Vec<PlanarAngle>> {
        self.check_indices(indices)?;
        Ok(indices.iter().zip(&self.options).map(|(&i, o)| o[i]).collect())
    }

    /// Angles for a Svetlichny setting tuple.
    pub fn si_angles(&self, tuple: usize) -> Vec<PlanarAngle> {
        let n = self.parties();
        (0..n).map(|p| self.options[p][(tuple >> (n - 1 - p)) & 1]).collect()
    }

    fn check_indices(&self, indices: &[usize]) -> Result<()> {
        if indices.len() != self.parties() {
            return Err(Error::Shape { expected: self.parties(), actual: indices.len() });
        }
        for (party, (&index, opts)) in indices.iter().zip(&self.options).enumerate() {
            if index >= opts.len() {
                return Err(Error::InvalidSetting { party: party + 1, index });
            }
        }
        Ok(())
    }

    fn matched_variant(&self) -> Variant {
        let n = self.parties();
        let ghz_table: Vec<f64> = (0..1usize << n)
            .map(|t| self.si_angles(t).iter().map(|a| a.radians()).sum::<f64>().cos())
            .collect();
        let value = |v| svetlichny_sum(&ghz_table, v);
        if value(Variant::Plus) > value(Variant::Minus) + ANGLE_TOL {
            Variant::Plus
        } else {
            Variant::Minus
        }
    }
}

/// The three-party layout for n = 3, the N-party layout otherwise.
pub fn standard_profile(n: usize) -> Result<SettingProfile> {
    let convention = if n == 3 { AngleConvention::Tripartite } else { AngleConvention::General };
    SettingProfile::with_convention(n, convention)
}

/// What a round is used for once settings are public.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum RoundClass {
    /// Outcome product is expected to equal `sign`.
    Key { sign: i8 },
    /// Feeds the correlator for setting tuple `tuple`.
    SiTest { tuple: usize },
    Discard,
}

impl RoundClass {
    pub fn is_key(&self) -> bool {
        matches!(self, RoundClass::Key { .. })
    }
}

fn is_x(a: PlanarAngle) -> bool {
    a.same_direction(PlanarAngle::X, ANGLE_TOL)
}

fn is_y(a: PlanarAngle) -> bool {
    a.same_direction(PlanarAngle::Y, ANGLE_TOL)
}

pub fn classify_round(profile: &SettingProfile, indices: &[usize]) -> Result<RoundClass> {
    let angles = profile.angles(indices)?;
    if indices[0] < 2 {
        let tuple = indices[1..].iter().fold(indices[0], |acc, &i| (acc << 1) | i);
        return Ok(RoundClass::SiTest { tuple });
    }
    match key_sign(&angles) {
        Ok(sign) => Ok(RoundClass::Key { sign }),
        Err(_) => Ok(RoundClass::Discard),
    }
}

/// Eigenvalue of ⊗σ on the GHZ state for an x/y setting with an even number of y's.
pub fn key_sign(angles: &[PlanarAngle]) -> Result<i8> {
    if !angles.iter().all(|&a| is_x(a) || is_y(a)) {
        return Err(Error::InvalidRound);
    }
    match angles.iter().filter(|&&a| is_y(a)).count() % 4 {
        0 => Ok(1),
        2 => Ok(-1),
        _ => Err(Error::InvalidRound),
    }
}

/// v^±_k = (−1)^{k(k±1)/2} where k is the number of 1s in the tuple.
pub fn svetlichny_coefficient(variant: Variant, tuple: usize) -> i8 {
    let k = tuple.count_ones() % 4;
    let positive = match variant {
        Variant::Plus => k == 0 || k == 3,
        Variant::Minus => k == 0 || k == 1,
    };
    if positive {
        1
    } else {
        -1
    }
}

fn svetlichny_sum(correlators: &[f64], variant: Variant) -> f64 {
    correlators
        .iter()
        .enumerate()
        .map(|(t, e)| f64::from(svetlichny_coefficient(variant, t)) * e)
        .sum()
}

/// Σₓ v^±_k(x)·E(x) over a dense table of length 2^N.
pub fn svetlichny_value(correlators: &[f64], variant: Variant) -> Result<f64> {
    let len = correlators.len();
    if len < 4 || !len.is_power_of_two() {
        return Err(Error::IncompleteCorrelators(len));
    }
    if let Some(t) = correlators.iter().position(|e| !e.is_finite()) {
        return Err(Error::IncompleteCorrelators(t));
    }
    Ok(svetlichny_sum(correlators, variant))
}

/// 2^{n−1}.
pub fn classical_bound(n: usize) -> f64 {
    (1u64 << (n - 1)) as f64
}

/// 2^{n−1}·√2.
pub fn quantum_max(n: usize) -> f64 {
    classical_bound(n) * SQRT_2
}

/// Exact correlators of `state` at every Svetlichny setting of `profile`.
pub fn state_correlators(profile: &SettingProfile, state: &DensityMatrix) -> Result<Vec<f64>> {
    (0..1usize << profile.parties())
        .map(|t| quantum::expectation(state, &profile.si_angles(t)))
        .collect()
}

/// Svetlichny value of `state` under the profile's own variant.
pub fn state_si_value(profile: &SettingProfile, state: &DensityMatrix) -> Result<f64> {
    svetlichny_value(&state_correlators(profile, state)?, profile.variant())
}

/// Raw key material: one bit string per party (+1 → 0, −1 → 1) plus the
/// expected outcome-product sign of every key round.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KeyMaterial {
    pub bits: Vec<Vec<u8>>,
    pub signs: Vec<i8>,
    pub rounds: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Sifted {
    pub key: KeyMaterial,
    /// Round indices per Svetlichny setting tuple.
    pub si_rounds: Vec<Vec<usize>>,
    pub discards: usize,
}

impl Sifted {
    pub fn si_count(&self) -> usize {
        self.si_rounds.iter().map(Vec::len).sum()
    }
}

/// Partitions a transcript's rounds into key material, Svetlichny buckets and discards.
pub fn sift(transcript: &Transcript) -> Sifted {
    let n = transcript.config().n;
    let mut out = Sifted {
        key: KeyMaterial { bits: vec![Vec::new(); n], ..Default::default() },
        si_rounds: vec![Vec::new(); 1 << n],
        discards: 0,
    };
    for r in transcript.rounds() {
        match r.class {
            RoundClass::Key { sign } => {
                for (bits, &o) in out.key.bits.iter_mut().zip(&r.outcomes) {
                    bits.push(outcome_bit(o));
                }
                out.key.signs.push(sign);
                out.key.rounds.push(r.index);
            }
            RoundClass::SiTest { tuple } => out.si_rounds[tuple].push(r.index),
            RoundClass::Discard => out.discards += 1,
        }
    }
    out
}

/// σ_y count of a key-round setting; used by reporting code.
pub fn y_count(angles: &[PlanarAngle]) -> usize {
    angles.iter().filter(|&&a| is_y(a)).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn a(x: f64) -> PlanarAngle {
        PlanarAngle::new(x)
    }

    #[test]
    fn standard_profiles() {
        let p3 = standard_profile(3).unwrap();
        assert_eq!(p3.options(0), &[a(-FRAC_PI_4), a(FRAC_PI_4), a(0.0), a(FRAC_PI_2)]);
        assert_eq!(p3.options(1), &[a(0.0), a(FRAC_PI_2)]);
        assert_eq!(p3.options(2), &[a(0.0), a(FRAC_PI_2)]);
        assert_eq!(p3.joint_settings(), 16);
        assert_eq!(p3.variant(), Variant::Minus);

        let p4 = standard_profile(4).unwrap();
        assert_eq!(p4.options(0), &[a(FRAC_PI_4), a(3.0 * FRAC_PI_4), a(0.0), a(FRAC_PI_2)]);
        assert_eq!(p4.variant(), Variant::Plus);
        assert_eq!(standard_profile(2), Err(Error::UnsupportedPartyCount(2)));
    }

    #[test]
    fn classification_examples() {
        let p = standard_profile(3).unwrap();
        // (0, π/2, π/2)
        assert_eq!(classify_round(&p, &[2, 1, 1]).unwrap(), RoundClass::Key { sign: -1 });
        // (−π/4, 0, π/2)
        assert_eq!(classify_round(&p, &[0, 0, 1]).unwrap(), RoundClass::SiTest { tuple: 0b001 });
        // (0, 0, π/2)
        assert_eq!(classify_round(&p, &[2, 0, 1]).unwrap(), RoundClass::Discard);
        assert_eq!(
            classify_round(&p, &[4, 0, 1]),
            Err(Error::InvalidSetting { party: 1, index: 4 })
        );
        assert_eq!(
            classify_round(&p, &[0, 2, 1]),
            Err(Error::InvalidSetting { party: 2, index: 2 })
        );
    }

    #[test]
    fn key_signs() {
        assert_eq!(key_sign(&[a(0.0); 3]), Ok(1));
        assert_eq!(key_sign(&[a(FRAC_PI_2), a(FRAC_PI_2), a(0.0)]), Ok(-1));
        let mut five = vec![a(FRAC_PI_2); 4];
        five.push(a(0.0));
        assert_eq!(key_sign(&five), Ok(1));
        assert_eq!(key_sign(&[a(FRAC_PI_4), a(0.0), a(0.0)]), Err(Error::InvalidRound));
        assert_eq!(key_sign(&[a(FRAC_PI_2), a(0.0), a(0.0)]), Err(Error::InvalidRound));
        // same direction modulo 2π
        assert_eq!(key_sign(&[a(2.0 * PI), a(FRAC_PI_2 + 2.0 * PI), a(FRAC_PI_2)]), Ok(-1));
    }

    #[test]
    fn coefficient_tables() {
        assert_eq!(svetlichny_coefficient(Variant::Plus, 0), 1);
        assert_eq!(svetlichny_coefficient(Variant::Plus, 0b011), -1);
        assert_eq!(svetlichny_coefficient(Variant::Minus, 0b111), -1);
        // + for k = 0, 1 and − for k = 2, 3.
        let signs: Vec<i8> = (0..8).map(|t| svetlichny_coefficient(Variant::Minus, t)).collect();
        assert_eq!(signs, vec![1, 1, 1, -1, 1, -1, -1, -1]);
    }

    #[test]
    fn bounds() {
        assert_eq!(classical_bound(3), 4.0);
        assert_abs_diff_eq!(quantum_max(3), 4.0 * SQRT_2, epsilon = 1e-12);
        assert_eq!(classical_bound(5), 16.0);
        assert_abs_diff_eq!(quantum_max(5), 16.0 * SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn svetlichny_value_errors_and_zero() {
        assert_eq!(svetlichny_value(&[0.0; 8], Variant::Plus), Ok(0.0));
        assert_eq!(svetlichny_value(&[0.0; 6], Variant::Plus), Err(Error::IncompleteCorrelators(6)));
        let mut t = [0.5; 8];
        t[5] = f64::NAN;
        assert_eq!(svetlichny_value(&t, Variant::Minus), Err(Error::IncompleteCorrelators(5)));
    }

    #[test]
    fn ghz_maximal_violation_small_n() {
        for n in 3..=5 {
            let p = standard_profile(n).unwrap();
            let rho = quantum::ghz_state(n).unwrap().to_density();
            assert_abs_diff_eq!(state_si_value(&p, &rho).unwrap(), quantum_max(n), epsilon = 1e-9);
        }
    }

    #[test]
    fn setting_index_roundtrip() {
        let p = standard_profile(4).unwrap();
        for i in 0..p.joint_settings() {
            assert_eq!(p.setting_index(&p.setting_indices(i)).unwrap(), i);
        }
    }
}
