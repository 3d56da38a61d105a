//! Eavesdropper models and the searches that bound what each can achieve on the
//! Svetlichny test.
//!
//! * product-state interception: Eve measures in transit and forwards spin
//!   eigenstates, described by a finite mixture of direction tuples;
//! * outcome control: Eve fixes the outcomes of `n − 1` parties as a function of
//!   their joint settings;
//! * convex combination: Eve mixes Werner-at-`v_L` correlations, which she knows,
//!   with GHZ correlations, which she does not.
//!
//! Party indices are 0-based throughout.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{local_weight, V_LOCAL};
use crate::error::{Error, Result};
use crate::protocol::{standard_profile, svetlichny_coefficient, SettingProfile, Variant};
use crate::quantum::{BlochDirection, PlanarAngle};
use crate::session::SourceModel;

/// Most atoms a product-state strategy may carry.
pub const MAX_STRATEGY_ATOMS: usize = 64;
/// Largest party count for exhaustive outcome-control enumeration.
pub const EXHAUSTIVE_LIMIT: usize = 5;
/// Largest party count for the heuristic outcome-control search.
pub const HEURISTIC_LIMIT: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyAtom {
    pub weight: f64,
    pub directions: Vec<PlanarAngle>,
}

/// Finite mixture over the direction tuples Eve collapses the particles onto.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<StrategyAtom>", into = "Vec<StrategyAtom>")]
pub struct ProductStrategy {
    atoms: Vec<StrategyAtom>,
}

impl TryFrom<Vec<StrategyAtom>> for ProductStrategy {
    type Error = Error;

    fn try_from(atoms: Vec<StrategyAtom>) -> Result<Self> {
        ProductStrategy::new(atoms)
    }
}

impl From<ProductStrategy> for Vec<StrategyAtom> {
    fn from(s: ProductStrategy) -> Self {
        s.atoms
    }
}

impl ProductStrategy {
    pub fn new(atoms: Vec<StrategyAtom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidStrategy("strategy has no atoms".into()));
        }
        if atoms.len() > MAX_STRATEGY_ATOMS {
            return Err(Error::InvalidStrategy(format!(
                "{} atoms exceeds the limit of {MAX_STRATEGY_ATOMS}",
                atoms.len()
            )));
        }
        let n = atoms[0].directions.len();
        if n == 0 || atoms.iter().any(|a| a.directions.len() != n) {
            return Err(Error::InvalidStrategy("atoms disagree on party count".into()));
        }
        if atoms.iter().any(|a| a.weight.is_nan() || a.weight < 0.0) {
            return Err(Error::InvalidStrategy("negative weight".into()));
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidStrategy(format!("weights sum to {total}")));
        }
        Ok(ProductStrategy { atoms })
    }

    pub fn single(directions: Vec<PlanarAngle>) -> Result<Self> {
        ProductStrategy::new(vec![StrategyAtom { weight: 1.0, directions }])
    }

    pub fn atoms(&self) -> &[StrategyAtom] {
        &self.atoms
    }

    pub fn parties(&self) -> usize {
        self.atoms[0].directions.len()
    }
}

/// How the one party Eve does not control answers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FreeParty {
    Uniform,
    /// Fixed outcome per option of the free party.
    Deterministic { outcomes: Vec<i8> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeControlSpec {
    /// The `n − 1` controlled parties.
    pub controlled: Vec<usize>,
    /// `assignment[joint]` lists the outcomes of the controlled parties, in the order of
    /// `controlled`, for the joint setting `joint` of the block (mixed radix, first
    /// controlled party most significant).
    pub assignment: Vec<Vec<i8>>,
    pub free: FreeParty,
}

impl OutcomeControlSpec {
    pub fn free_party(&self, n: usize) -> Option<usize> {
        (0..n).find(|p| !self.controlled.contains(p))
    }

    /// Number of joint settings of the controlled block.
    pub fn joint_settings(&self, profile: &SettingProfile) -> usize {
        self.controlled.iter().map(|&p| profile.options(p).len()).product()
    }

    /// Joint block index for the full setting tuple `settings`.
    pub fn joint_index(&self, profile: &SettingProfile, settings: &[usize]) -> usize {
        self.controlled
            .iter()
            .fold(0, |acc, &p| acc * profile.options(p).len() + settings[p])
    }

    pub fn validate(&self, profile: &SettingProfile) -> Result<()> {
        let n = profile.parties();
        if self.controlled.len() != n - 1 {
            return Err(Error::InvalidSpec(format!(
                "outcome control needs exactly {} controlled parties, got {}",
                n - 1,
                self.controlled.len()
            )));
        }
        let mut seen = vec![false; n];
        for &p in &self.controlled {
            if p >= n || seen[p] {
                return Err(Error::InvalidSpec(format!("bad controlled party {p}")));
            }
            seen[p] = true;
        }
        let joint = self.joint_settings(profile);
        if self.assignment.len() != joint {
            return Err(Error::InvalidSpec(format!(
                "assignment needs one row per joint block setting ({joint}), got {}",
                self.assignment.len()
            )));
        }
        let is_sign = |o: &i8| *o == 1 || *o == -1;
        if self.assignment.iter().any(|row| row.len() != n - 1 || !row.iter().all(is_sign)) {
            return Err(Error::InvalidSpec(format!(
                "each assignment row needs {} outcomes in {{+1,-1}}",
                n - 1
            )));
        }
        if let FreeParty::Deterministic { outcomes } = &self.free {
            let free = self.free_party(n).expect("n - 1 distinct controlled parties leave one free");
            if outcomes.len() != profile.options(free).len() || !outcomes.iter().all(is_sign) {
                return Err(Error::InvalidSpec("free-party outcomes do not match its options".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AttackSpec {
    ProductState { strategy: ProductStrategy },
    OutcomeControl(OutcomeControlSpec),
    ConvexCombination { visibility: f64 },
}

impl AttackSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            AttackSpec::ProductState { .. } => "product-state",
            AttackSpec::OutcomeControl(_) => "outcome-control",
            AttackSpec::ConvexCombination { .. } => "convex-combination",
        }
    }

    pub fn validate(&self, profile: &SettingProfile) -> Result<()> {
        match self {
            AttackSpec::ProductState { strategy } => {
                if strategy.parties() != profile.parties() {
                    return Err(Error::InvalidStrategy(format!(
                        "strategy covers {} parties, session has {}",
                        strategy.parties(),
                        profile.parties()
                    )));
                }
                Ok(())
            }
            AttackSpec::OutcomeControl(spec) => spec.validate(profile),
            AttackSpec::ConvexCombination { visibility } => check_cc_visibility(*visibility),
        }
    }
}

fn check_cc_visibility(v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidVisibility(v));
    }
    if v < V_LOCAL {
        return Err(Error::AttackUndefined(v));
    }
    Ok(())
}

pub fn product_state_source(strategy: ProductStrategy) -> SourceModel {
    SourceModel::Adversarial { attack: AttackSpec::ProductState { strategy } }
}

pub fn outcome_control_source(spec: OutcomeControlSpec, profile: &SettingProfile) -> Result<SourceModel> {
    spec.validate(profile)?;
    Ok(SourceModel::Adversarial { attack: AttackSpec::OutcomeControl(spec) })
}

/// Convex-combination attack reproducing Werner(v) statistics; requires `v ≥ 1/√2`.
pub fn cc_attack_source(v: f64) -> Result<SourceModel> {
    check_cc_visibility(v)?;
    Ok(SourceModel::Adversarial { attack: AttackSpec::ConvexCombination { visibility: v } })
}

/// Local weight used by the convex-combination attack at visibility `v`.
pub fn cc_local_weight(v: f64) -> Result<f64> {
    check_cc_visibility(v)?;
    Ok(local_weight(v))
}

/// Whether directions are restricted to the x–y plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionMode {
    Planar,
    /// Also searches the polar angle.
    Bloch,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProductAttackResult {
    pub directions: Vec<BlochDirection>,
    pub value: f64,
    pub restarts: usize,
}

impl ProductAttackResult {
    /// The maximizing direction tuple as a one-atom planar strategy.
    pub fn strategy(&self) -> Result<ProductStrategy> {
        ProductStrategy::single(self.directions.iter().map(|d| PlanarAngle::new(d.azimuth)).collect())
    }
}

/// Correlators of the product state along `directions` at every Svetlichny tuple:
/// Πᵢ sin(polarᵢ)·cos(αᵢ − azimuthᵢ).
pub fn product_correlators(profile: &SettingProfile, directions: &[BlochDirection]) -> Vec<f64> {
    let n = profile.parties();
    let means = single_party_means(profile, directions);
    (0..1usize << n)
        .map(|t| (0..n).map(|p| means[p][(t >> (n - 1 - p)) & 1]).product())
        .collect()
}

fn single_party_means(profile: &SettingProfile, directions: &[BlochDirection]) -> Vec<[f64; 2]> {
    directions
        .iter()
        .enumerate()
        .map(|(p, d)| {
            let opts = profile.options(p);
            let m = |o: usize| d.polar.sin() * (opts[o].radians() - d.azimuth).cos();
            [m(0), m(1)]
        })
        .collect()
}

fn product_value(profile: &SettingProfile, directions: &[BlochDirection]) -> f64 {
    product_correlators(profile, directions)
        .iter()
        .enumerate()
        .map(|(t, e)| f64::from(svetlichny_coefficient(profile.variant(), t)) * e)
        .sum()
}

/// Random restarts plus exact coordinate ascent over the direction angles, maximizing
/// the noise-free Svetlichny value of a single product-state atom. Mixtures cannot do
/// better than their best atom.
pub fn optimize_product_attack<R: Rng + ?Sized>(
    profile: &SettingProfile,
    iterations: usize,
    rng: &mut R,
    mode: DirectionMode,
) -> Result<ProductAttackResult> {
    if iterations == 0 {
        return Err(Error::InvalidConfig("optimizer needs at least one restart".into()));
    }
    let n = profile.parties();
    let variant = profile.variant();
    let mut best: Option<(f64, Vec<BlochDirection>)> = None;
    for _ in 0..iterations {
        let mut dirs: Vec<BlochDirection> = (0..n)
            .map(|_| BlochDirection {
                azimuth: rng.random_range(0.0..2.0 * PI),
                polar: match mode {
                    DirectionMode::Planar => FRAC_PI_2,
                    DirectionMode::Bloch => rng.random_range(0.0..PI),
                },
            })
            .collect();
        let mut value = product_value(profile, &dirs);
        for _sweep in 0..200 {
            for j in 0..n {
                let (c, d) = coordinate_coefficients(profile, variant, &dirs, j);
                // value = sin(polar_j)·(c·cos φ_j + d·sin φ_j)
                dirs[j].azimuth = d.atan2(c).rem_euclid(2.0 * PI);
                if mode == DirectionMode::Bloch {
                    let k = c * dirs[j].azimuth.cos() + d * dirs[j].azimuth.sin();
                    dirs[j].polar = if k > 0.0 { FRAC_PI_2 } else { 0.0 };
                }
            }
            let next = product_value(profile, &dirs);
            let done = next - value < 1e-13;
            value = next;
            if done {
                break;
            }
        }
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, dirs));
        }
    }
    let (value, directions) = best.expect("at least one restart ran");
    Ok(ProductAttackResult { directions, value, restarts: iterations })
}

/// Convenience wrapper on the standard profile with planar directions.
pub fn optimize_standard_product_attack(n: usize, iterations: usize, seed: u64) -> Result<ProductAttackResult> {
    let profile = standard_profile(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    optimize_product_attack(&profile, iterations, &mut rng, DirectionMode::Planar)
}

/// Coefficients (C, D) with value = sin(polar_j)·(C cos φ_j + D sin φ_j).
fn coordinate_coefficients(
    profile: &SettingProfile,
    variant: Variant,
    dirs: &[BlochDirection],
    j: usize,
) -> (f64, f64) {
    let n = profile.parties();
    let means = single_party_means(profile, dirs);
    let opts = profile.options(j);
    let (mut c, mut d) = (0.0, 0.0);
    for t in 0..1usize << n {
        let bit = (t >> (n - 1 - j)) & 1;
        let rest: f64 = (0..n).filter(|&p| p != j).map(|p| means[p][(t >> (n - 1 - p)) & 1]).product();
        let w = f64::from(svetlichny_coefficient(variant, t)) * rest;
        c += w * opts[bit].radians().cos();
        d += w * opts[bit].radians().sin();
    }
    (c, d)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchMode {
    Exhaustive,
    /// Random-restart single-flip hill climbing.
    Heuristic { restarts: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeControlOptimum {
    pub value: f64,
    /// An assignment reaching `value`, with the free party's best deterministic reply.
    pub spec: OutcomeControlSpec,
}

/// Maximum of |S^±_n| over outcome-control strategies.
///
/// Only the product of the block outcomes enters a correlator, so the search runs over
/// one sign per Svetlichny setting of the block (2^{2^{n−1}} assignments) together with
/// every deterministic reply of the free party. A uniform free party scores 0.
pub fn max_outcome_control_value(n: usize, variant: Variant, mode: SearchMode) -> Result<OutcomeControlOptimum> {
    if n < 2 {
        return Err(Error::InvalidPartyCount(n));
    }
    match mode {
        SearchMode::Exhaustive if n > EXHAUSTIVE_LIMIT => {
            return Err(Error::SizeLimit { what: "exhaustive outcome-control search", max: EXHAUSTIVE_LIMIT, n })
        }
        SearchMode::Heuristic { .. } if n > HEURISTIC_LIMIT => {
            return Err(Error::SizeLimit { what: "heuristic outcome-control search", max: HEURISTIC_LIMIT, n })
        }
        _ => {}
    }
    let mut best: Option<(f64, usize, u128, [i8; 2])> = None;
    for free in 0..n {
        let (value, signs, reply) = match mode {
            SearchMode::Exhaustive => {
                let mut local = (f64::NEG_INFINITY, 0, [1, 1]);
                for signs in 0..1u128 << (1 << (n - 1)) {
                    for reply in FREE_REPLIES {
                        let v = block_value(n, free, signs, reply, variant).abs();
                        if v > local.0 {
                            local = (v, signs, reply);
                        }
                    }
                }
                local
            }
            SearchMode::Heuristic { restarts, seed } => hill_climb(n, free, variant, restarts, seed),
        };
        if best.as_ref().is_none_or(|b| value > b.0) {
            best = Some((value, free, signs, reply));
        }
    }
    let (value, free, signs, reply) = best.expect("n >= 2 parties searched");
    Ok(OutcomeControlOptimum { value, spec: build_spec(n, free, signs, reply) })
}

const FREE_REPLIES: [[i8; 2]; 4] = [[1, 1], [1, -1], [-1, 1], [-1, -1]];

/// Block index of tuple `t` with the free party's bit removed.
fn block_index(n: usize, free: usize, t: usize) -> usize {
    let low = n - 1 - free;
    ((t >> (low + 1)) << low) | (t & ((1 << low) - 1))
}

fn block_value(n: usize, free: usize, signs: u128, reply: [i8; 2], variant: Variant) -> f64 {
    (0..1usize << n)
        .map(|t| {
            let block = if signs >> block_index(n, free, t) & 1 == 0 { 1 } else { -1 };
            let f = reply[(t >> (n - 1 - free)) & 1];
            f64::from(svetlichny_coefficient(variant, t) * block * f)
        })
        .sum()
}

fn hill_climb(n: usize, free: usize, variant: Variant, restarts: usize, seed: u64) -> (f64, u128, [i8; 2]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ free as u64);
    let width = 1usize << (n - 1);
    let mask = if width == 128 { u128::MAX } else { (1u128 << width) - 1 };
    let score = |signs| {
        FREE_REPLIES
            .iter()
            .map(|&r| (block_value(n, free, signs, r, variant).abs(), r))
            .fold((f64::NEG_INFINITY, [1, 1]), |acc, x| if x.0 > acc.0 { x } else { acc })
    };
    let mut best = (f64::NEG_INFINITY, 0, [1, 1]);
    for _ in 0..restarts.max(1) {
        let mut signs = rng.random::<u128>() & mask;
        let (mut value, mut reply) = score(signs);
        loop {
            let improved = (0..width)
                .map(|b| signs ^ (1 << b))
                .map(|cand| (cand, score(cand)))
                .find(|(_, (v, _))| *v > value);
            match improved {
                Some((cand, (v, r))) => {
                    signs = cand;
                    value = v;
                    reply = r;
                }
                None => break,
            }
        }
        if value > best.0 {
            best = (value, signs, reply);
        }
    }
    best
}

/// Spec for the standard option layout (4 options for party 0, 2 for the rest). The
/// block product is carried by the first controlled party; outside the Svetlichny
/// settings every controlled outcome is +1.
fn build_spec(n: usize, free: usize, signs: u128, reply: [i8; 2]) -> OutcomeControlSpec {
    let option_count = |p: usize| if p == 0 { 4 } else { 2 };
    let controlled: Vec<usize> = (0..n).filter(|&p| p != free).collect();
    let joint: usize = controlled.iter().map(|&p| option_count(p)).product();
    let assignment = (0..joint)
        .map(|j| {
            let mut rest = j;
            let mut opts = vec![0; controlled.len()];
            for (slot, &p) in controlled.iter().enumerate().rev() {
                opts[slot] = rest % option_count(p);
                rest /= option_count(p);
            }
            let mut row = vec![1i8; controlled.len()];
            if opts.iter().all(|&o| o < 2) {
                let b = opts.iter().fold(0, |acc, &o| (acc << 1) | o);
                if signs >> b & 1 == 1 {
                    row[0] = -1;
                }
            }
            row
        })
        .collect();
    let mut outcomes = reply.to_vec();
    outcomes.resize(option_count(free), 1);
    OutcomeControlSpec { controlled, assignment, free: FreeParty::Deterministic { outcomes } }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::classical_bound;

    #[test]
    fn strategy_validation() {
        assert!(matches!(ProductStrategy::new(vec![]), Err(Error::InvalidStrategy(_))));
        let atom = |w| StrategyAtom { weight: w, directions: vec![PlanarAngle::X; 3] };
        assert!(ProductStrategy::new(vec![atom(0.5), atom(0.5)]).is_ok());
        assert!(ProductStrategy::new(vec![atom(0.7), atom(0.5)]).is_err());
        assert!(ProductStrategy::new(vec![atom(1.5), atom(-0.5)]).is_err());
        assert!(ProductStrategy::new(vec![atom(1.0 / 65.0); 65]).is_err());
    }

    #[test]
    fn outcome_control_spec_validation() {
        let p = standard_profile(3).unwrap();
        let ok = OutcomeControlSpec { controlled: vec![0, 1], assignment: vec![vec![1, -1]; 8], free: FreeParty::Uniform };
        assert!(ok.validate(&p).is_ok());
        let mut wrong_size = ok.clone();
        wrong_size.controlled = vec![0];
        wrong_size.assignment.pop();
        assert!(matches!(outcome_control_source(wrong_size, &p), Err(Error::InvalidSpec(_))));
        let mut dup = ok.clone();
        dup.controlled = vec![1, 1];
        assert!(dup.validate(&p).is_err());
        let mut bad_outcome = ok.clone();
        bad_outcome.assignment[1] = vec![1, 0];
        assert!(bad_outcome.validate(&p).is_err());
        let mut short = ok;
        short.assignment.pop();
        assert!(short.validate(&p).is_err());
    }

    #[test]
    fn cc_weights() {
        assert_eq!(cc_local_weight(1.0), Ok(0.0));
        assert!((cc_local_weight(0.9).unwrap() - 0.341_421_356_237).abs() < 1e-9);
        assert_eq!(cc_attack_source(0.6), Err(Error::AttackUndefined(0.6)));
        assert_eq!(cc_attack_source(1.1), Err(Error::InvalidVisibility(1.1)));
    }

    #[test]
    fn outcome_control_maxima() {
        for n in 3..=5 {
            for variant in [Variant::Plus, Variant::Minus] {
                let opt = max_outcome_control_value(n, variant, SearchMode::Exhaustive).unwrap();
                assert_eq!(opt.value, classical_bound(n));
            }
        }
        assert!(matches!(
            max_outcome_control_value(6, Variant::Plus, SearchMode::Exhaustive),
            Err(Error::SizeLimit { .. })
        ));
        let h = max_outcome_control_value(6, Variant::Plus, SearchMode::Heuristic { restarts: 20, seed: 3 }).unwrap();
        assert!(h.value <= classical_bound(6));
        assert!(matches!(
            max_outcome_control_value(9, Variant::Plus, SearchMode::Heuristic { restarts: 1, seed: 3 }),
            Err(Error::SizeLimit { .. })
        ));
    }

    #[test]
    fn best_spec_is_valid_for_profile() {
        for n in 3..=5 {
            let p = standard_profile(n).unwrap();
            let opt = max_outcome_control_value(n, p.variant(), SearchMode::Exhaustive).unwrap();
            opt.spec.validate(&p).unwrap();
        }
    }

    #[test]
    fn optimizer_is_deterministic_and_bounded() {
        let a = optimize_standard_product_attack(3, 1, 11).unwrap();
        let b = optimize_standard_product_attack(3, 1, 11).unwrap();
        assert_eq!(a, b);
        let r = optimize_standard_product_attack(3, 200, 5).unwrap();
        assert!(r.value <= 2.0 + 1e-6, "{}", r.value);
        assert!(r.strategy().is_ok());
    }
}
