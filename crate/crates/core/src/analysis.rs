//! Estimation from transcripts, the Devetak–Winter key-rate bound under the
//! convex-combination attack, and brute-force oracles for the classical bounds.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{classical_bound, svetlichny_coefficient, RoundClass, Variant};
use crate::session::{RoundRecord, SessionConfig, Transcript};

/// Visibility below which the Werner state no longer violates the Svetlichny inequality.
pub const V_LOCAL: f64 = FRAC_1_SQRT_2;
/// Fewest key rounds [`empirical_rate`] accepts.
pub const MIN_EMPIRICAL_KEY_ROUNDS: usize = 10_000;
/// Largest party count for [`brute_force_local_max`].
pub const LOCAL_ORACLE_LIMIT: usize = 5;
/// Largest party count for [`brute_force_bipartition_max`].
pub const BIPARTITION_ORACLE_LIMIT: usize = 4;

/// Visibility above which the key-rate bound is positive: 1/(2 − v_L).
pub fn key_rate_threshold() -> f64 {
    1.0 / (2.0 - V_LOCAL)
}

/// q_L = (1 − v)/(1 − v_L), clamped to [0, 1].
pub fn local_weight(v: f64) -> f64 {
    ((1.0 - v) / (1.0 - V_LOCAL)).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TupleStat {
    pub mean: f64,
    /// `None` when fewer than two rounds landed in the bucket.
    pub stderr: Option<f64>,
    pub count: usize,
}

fn correlators_from(n: usize, rounds: &[RoundRecord], strict: bool) -> Result<Vec<TupleStat>> {
    let mut sums = vec![(0.0f64, 0.0f64, 0usize); 1 << n];
    for r in rounds {
        if let RoundClass::SiTest { tuple } = r.class {
            let product: f64 = r.outcomes.iter().map(|&o| f64::from(o)).product();
            let s = &mut sums[tuple];
            s.0 += product;
            s.1 += product * product;
            s.2 += 1;
        }
    }
    sums.iter()
        .enumerate()
        .map(|(tuple, &(sum, sum_sq, count))| {
            if count == 0 || (strict && count < 2) {
                return Err(Error::InsufficientStatistics(format!(
                    "setting tuple {tuple:0n$b} has {count} rounds"
                )));
            }
            let c = count as f64;
            let mean = sum / c;
            let stderr = (count >= 2).then(|| {
                let var = ((sum_sq - c * mean * mean) / (c - 1.0)).max(0.0);
                (var / c).sqrt()
            });
            Ok(TupleStat { mean, stderr, count })
        })
        .collect()
}

/// Sample mean and standard error of the outcome product for each Svetlichny tuple.
/// In strict mode a bucket with a single round is an error rather than a `None` stderr.
pub fn estimate_correlators(transcript: &Transcript, strict: bool) -> Result<Vec<TupleStat>> {
    correlators_from(transcript.config().n, transcript.rounds(), strict)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiEstimate {
    pub variant: Variant,
    pub value: f64,
    pub stderr: f64,
    pub correlators: Vec<TupleStat>,
    pub classical_bound: f64,
    pub abort_sigma: f64,
    /// |value| − abort_sigma·stderr − classical_bound; positive means accepted.
    pub margin: f64,
}

pub(crate) fn estimate_si_rounds(config: &SessionConfig, rounds: &[RoundRecord], variant: Variant) -> Result<SiEstimate> {
    let correlators = correlators_from(config.n, rounds, true)?;
    let mut value = 0.0;
    let mut var = 0.0;
    for (t, c) in correlators.iter().enumerate() {
        value += f64::from(svetlichny_coefficient(variant, t)) * c.mean;
        var += c.stderr.expect("strict mode guarantees two rounds").powi(2);
    }
    let stderr = var.sqrt();
    let bound = classical_bound(config.n);
    Ok(SiEstimate {
        variant,
        value,
        stderr,
        correlators,
        classical_bound: bound,
        abort_sigma: config.abort_sigma,
        margin: value.abs() - config.abort_sigma * stderr - bound,
    })
}

/// Svetlichny statistic with independent per-tuple errors added in quadrature.
pub fn estimate_si(transcript: &Transcript, variant: Variant) -> Result<SiEstimate> {
    estimate_si_rounds(transcript.config(), transcript.rounds(), variant)
}

/// h(p) = −p log₂ p − (1−p) log₂(1−p).
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(p));
    }
    let term = |x: f64| if x > 0.0 { -x * x.log2() } else { 0.0 };
    Ok(term(p) + term(1.0 - p))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    pub v: f64,
    pub v_local: f64,
    pub q_local: f64,
    /// H(A|E) = h((1 + q_L)/2).
    pub h_eve: f64,
    /// H(A|B,C) = h((1 + v)/2).
    pub h_abc: f64,
    /// max(0, h_eve − h_abc).
    pub r_dw: f64,
    pub threshold: f64,
    /// Set when v < v_L and q_L was clamped to 1.
    pub clamped: bool,
}

/// Devetak–Winter lower bound against the convex-combination attack on Werner(v).
pub fn dw_rate(v: f64) -> Result<KeyRateReport> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidVisibility(v));
    }
    let q_local = local_weight(v);
    let h_eve = binary_entropy((1.0 + q_local) / 2.0)?;
    let h_abc = binary_entropy((1.0 + v) / 2.0)?;
    Ok(KeyRateReport {
        v,
        v_local: V_LOCAL,
        q_local,
        h_eve,
        h_abc,
        r_dw: (h_eve - h_abc).max(0.0),
        threshold: key_rate_threshold(),
        clamped: v < V_LOCAL,
    })
}

pub fn rate_curve(grid: &[f64]) -> Result<Vec<KeyRateReport>> {
    grid.iter().map(|&v| dw_rate(v)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalRate {
    pub key_rounds: usize,
    /// Fraction of key rounds where Eve's guess equals party 1's outcome.
    pub eve_agreement: f64,
    pub h_eve: f64,
    pub h_abc: f64,
    pub rate: f64,
}

/// Plug-in H(A|guess) and H(A|setting, other outcomes) over key rounds, A being party 1's outcome.
fn conditional_entropy<K: Ord>(pairs: impl Iterator<Item = (K, bool)>) -> f64 {
    let mut table: BTreeMap<K, (usize, usize)> = BTreeMap::new();
    let mut total = 0usize;
    for (k, up) in pairs {
        let e = table.entry(k).or_default();
        if up {
            e.0 += 1;
        }
        e.1 += 1;
        total += 1;
    }
    table
        .values()
        .map(|&(up, n)| n as f64 / total as f64 * binary_entropy(up as f64 / n as f64).expect("frequency in [0,1]"))
        .sum()
}

/// Empirical counterpart of [`dw_rate`] from a convex-combination attack transcript.
pub fn empirical_rate(transcript: &Transcript) -> Result<EmpiricalRate> {
    let keys: Vec<&RoundRecord> = transcript.rounds().iter().filter(|r| r.class.is_key()).collect();
    if keys.iter().any(|r| r.eve_guess.is_none()) || transcript.rounds().iter().all(|r| r.eve_guess.is_none()) {
        return Err(Error::NotCcTranscript);
    }
    if keys.len() < MIN_EMPIRICAL_KEY_ROUNDS {
        return Err(Error::InsufficientStatistics(format!(
            "{} key rounds, need {MIN_EMPIRICAL_KEY_ROUNDS}",
            keys.len()
        )));
    }
    let agree = keys.iter().filter(|r| r.eve_guess == Some(r.outcomes[0])).count();
    let h_eve = conditional_entropy(keys.iter().map(|r| (r.eve_guess, r.outcomes[0] > 0)));
    let h_abc = conditional_entropy(
        keys.iter().map(|r| ((r.settings.clone(), r.outcomes[1..].to_vec()), r.outcomes[0] > 0)),
    );
    Ok(EmpiricalRate {
        key_rounds: keys.len(),
        eve_agreement: agree as f64 / keys.len() as f64,
        h_eve,
        h_abc,
        rate: h_eve - h_abc,
    })
}

fn svetlichny_of(n: usize, variant: Variant, correlator: impl Fn(usize) -> f64) -> f64 {
    (0..1usize << n).map(|t| f64::from(svetlichny_coefficient(variant, t)) * correlator(t)).sum()
}

fn bit_sign(word: u64, bit: usize) -> f64 {
    if word >> bit & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Maximum of |S^±_n| over every deterministic local strategy (each party picks
/// an outcome per setting), by full enumeration of the 4^n strategies.
pub fn brute_force_local_max(n: usize, variant: Variant) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidPartyCount(n));
    }
    if n > LOCAL_ORACLE_LIMIT {
        return Err(Error::SizeLimit { what: "local-strategy oracle", max: LOCAL_ORACLE_LIMIT, n });
    }
    let mut best = f64::NEG_INFINITY;
    for strategy in 0..1u64 << (2 * n) {
        let value = svetlichny_of(n, variant, |t| {
            (0..n).map(|p| bit_sign(strategy, 2 * p + ((t >> (n - 1 - p)) & 1))).product()
        });
        best = best.max(value.abs());
    }
    Ok(best)
}

/// Maximum of |S^±_n| when the parties in `block` act as one party and the rest as
/// another, each block answering with an arbitrary ±1 product per joint block setting.
pub fn bipartition_max(n: usize, block: &[usize], variant: Variant) -> Result<f64> {
    if !(2..=BIPARTITION_ORACLE_LIMIT).contains(&n) {
        return Err(Error::SizeLimit { what: "bipartition oracle", max: BIPARTITION_ORACLE_LIMIT, n });
    }
    let in_block: Vec<bool> = (0..n).map(|p| block.contains(&p)).collect();
    if block.iter().any(|&p| p >= n) || in_block.iter().all(|&b| b) || !in_block.iter().any(|&b| b) {
        return Err(Error::InvalidConfig(format!("{block:?} is not a proper bipartition of {n} parties")));
    }
    // joint setting of each side, in party order
    let side_setting = |t: usize, side: bool| {
        (0..n).filter(|&p| in_block[p] == side).fold(0usize, |acc, p| (acc << 1) | ((t >> (n - 1 - p)) & 1))
    };
    let a_size = 1usize << block.len();
    let b_size = 1usize << (n - block.len());
    let mut best = f64::NEG_INFINITY;
    for f in 0..1u64 << a_size {
        for g in 0..1u64 << b_size {
            let value = svetlichny_of(n, variant, |t| {
                bit_sign(f, side_setting(t, true)) * bit_sign(g, side_setting(t, false))
            });
            best = best.max(value.abs());
        }
    }
    Ok(best)
}

/// All bipartitions, with party 0 always in the first block.
pub fn bipartitions(n: usize) -> Vec<Vec<usize>> {
    (0..1usize << (n - 1))
        .map(|mask| std::iter::once(0).chain((1..n).filter(|p| mask >> (p - 1) & 1 == 1)).collect::<Vec<_>>())
        .filter(|b| b.len() < n)
        .collect()
}

/// Hybrid-model maximum over every bipartition.
pub fn brute_force_bipartition_max(n: usize, variant: Variant) -> Result<f64> {
    if !(2..=BIPARTITION_ORACLE_LIMIT).contains(&n) {
        return Err(Error::SizeLimit { what: "bipartition oracle", max: BIPARTITION_ORACLE_LIMIT, n });
    }
    bipartitions(n).iter().try_fold(f64::NEG_INFINITY, |best, b| Ok(best.max(bipartition_max(n, b, variant)?)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingMismatch {
    pub settings: Vec<usize>,
    pub sign: i8,
    pub mismatches: usize,
    pub count: usize,
}

impl SettingMismatch {
    pub fn rate(&self) -> f64 {
        self.mismatches as f64 / self.count as f64
    }

    pub fn stderr(&self) -> f64 {
        binomial_stderr(self.rate(), self.count)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MismatchReport {
    pub per_setting: Vec<SettingMismatch>,
    pub mismatches: usize,
    pub count: usize,
}

impl MismatchReport {
    pub fn rate(&self) -> f64 {
        self.mismatches as f64 / self.count as f64
    }

    pub fn stderr(&self) -> f64 {
        binomial_stderr(self.rate(), self.count)
    }
}

pub fn binomial_stderr(p: f64, count: usize) -> f64 {
    (p * (1.0 - p) / count as f64).sqrt()
}

/// Fraction of key rounds whose outcome product differs from the expected sign.
pub fn mismatch_rate(transcript: &Transcript) -> Result<MismatchReport> {
    let mut per: BTreeMap<Vec<usize>, SettingMismatch> = BTreeMap::new();
    for r in transcript.rounds() {
        if let RoundClass::Key { sign } = r.class {
            let entry = per.entry(r.settings.clone()).or_insert_with(|| SettingMismatch {
                settings: r.settings.clone(),
                sign,
                mismatches: 0,
                count: 0,
            });
            let product: i8 = r.outcomes.iter().product();
            entry.count += 1;
            entry.mismatches += usize::from(product != sign);
        }
    }
    if per.is_empty() {
        return Err(Error::InsufficientStatistics("no key rounds".into()));
    }
    let per_setting: Vec<SettingMismatch> = per.into_values().collect();
    Ok(MismatchReport {
        mismatches: per_setting.iter().map(|s| s.mismatches).sum(),
        count: per_setting.iter().map(|s| s.count).sum(),
        per_setting,
    })
}
