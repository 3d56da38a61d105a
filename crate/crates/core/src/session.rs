//! Protocol runs as deterministic round-by-round message passing.
//!
//! Every round the source emits, each party receives its particle, draws a setting
//! from its own random substream, measures and holds the result. Settings are
//! announced only after the final round; then rounds are classified, the Svetlichny
//! statistic is estimated and the session is accepted or aborted.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{AttackSpec, FreeParty, OutcomeControlSpec, ProductStrategy};
use crate::analysis::{self, SiEstimate, V_LOCAL};
use crate::error::{Error, Result};
use crate::protocol::{classify_round, RoundClass, SettingProfile};
use crate::quantum::{self, outcome_tuple, OutcomeDistribution, PlanarAngle};

pub const DEFAULT_ABORT_SIGMA: f64 = 3.0;

/// Stream id of the source's random substream; party `p` uses `PARTY_STREAM_BASE + p`.
pub const SOURCE_STREAM: u64 = 0;
pub const PARTY_STREAM_BASE: u64 = 1;

/// Substream `stream` of the master seed.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// What the particle source does each round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceModel {
    /// Werner state at the given visibility; `1.0` is the pure GHZ state.
    Honest { visibility: f64 },
    Adversarial { attack: AttackSpec },
}

impl SourceModel {
    pub fn validate(&self, profile: &SettingProfile) -> Result<()> {
        match self {
            SourceModel::Honest { visibility } if !(0.0..=1.0).contains(visibility) => {
                Err(Error::InvalidVisibility(*visibility))
            }
            SourceModel::Honest { .. } => Ok(()),
            SourceModel::Adversarial { attack } => attack.validate(profile),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub n: usize,
    pub rounds: usize,
    pub profile: SettingProfile,
    pub source: SourceModel,
    pub seed: u64,
    pub abort_sigma: f64,
}

impl SessionConfig {
    pub fn new(profile: SettingProfile, rounds: usize, source: SourceModel, seed: u64) -> Self {
        SessionConfig { n: profile.parties(), rounds, profile, source, seed, abort_sigma: DEFAULT_ABORT_SIGMA }
    }

    /// Werner(v) source on the standard profile.
    pub fn honest(n: usize, rounds: usize, visibility: f64, seed: u64) -> Result<Self> {
        let profile = crate::protocol::standard_profile(n)?;
        Ok(SessionConfig::new(profile, rounds, SourceModel::Honest { visibility }, seed))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n != self.profile.parties() {
            return Err(Error::Shape { expected: self.profile.parties(), actual: self.n });
        }
        if self.rounds == 0 {
            return Err(Error::InvalidConfig("rounds must be at least 1".into()));
        }
        if !(self.abort_sigma > 0.0 && self.abort_sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("abort_sigma {} must be positive", self.abort_sigma)));
        }
        self.source.validate(&self.profile)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub index: usize,
    pub settings: Vec<usize>,
    pub outcomes: Vec<i8>,
    pub class: RoundClass,
    /// Eve's guess of party 1's outcome; present only under the convex-combination attack.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eve_guess: Option<i8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum AbortReason {
    /// The estimate failed to clear the classical bound by the required margin.
    NoViolation { estimate: SiEstimate },
    InsufficientStatistics { detail: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    Accepted,
    Aborted(AbortReason),
}

impl Verdict {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Verdict::Accepted)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    config: SessionConfig,
    rounds: Vec<RoundRecord>,
    verdict: Verdict,
    estimate: Option<SiEstimate>,
}

impl Transcript {
    /// Assembles a transcript from existing records and judges it.
    pub fn judge(config: SessionConfig, rounds: Vec<RoundRecord>) -> Transcript {
        let (verdict, estimate) = match analysis::estimate_si_rounds(&config, &rounds, config.profile.variant()) {
            Ok(est) if est.margin > 0.0 => (Verdict::Accepted, Some(est)),
            Ok(est) => (Verdict::Aborted(AbortReason::NoViolation { estimate: est.clone() }), Some(est)),
            Err(e) => (Verdict::Aborted(AbortReason::InsufficientStatistics { detail: e.to_string() }), None),
        };
        Transcript { config, rounds, verdict, estimate }
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn rounds(&self) -> &[RoundRecord] {
        &self.rounds
    }

    pub fn verdict(&self) -> &Verdict {
        &self.verdict
    }

    pub fn estimate(&self) -> Option<&SiEstimate> {
        self.estimate.as_ref()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PartyPhase {
    Waiting,
    Received,
    Chosen,
    Holding,
    Announced,
}

/// One legitimate party. Per round: receive → choose → measure → hold; settings are
/// announced once, after the final round.
#[derive(Clone, Debug)]
pub struct Party {
    id: usize,
    option_count: usize,
    rounds_expected: usize,
    rng: ChaCha8Rng,
    phase: PartyPhase,
    choices: Vec<usize>,
    outcomes: Vec<i8>,
}

impl Party {
    pub fn new(id: usize, profile: &SettingProfile, rounds_expected: usize, seed: u64) -> Result<Self> {
        if id >= profile.parties() {
            return Err(Error::InvalidSetting { party: id + 1, index: 0 });
        }
        Ok(Party {
            id,
            option_count: profile.options(id).len(),
            rounds_expected,
            rng: substream(seed, PARTY_STREAM_BASE + id as u64),
            phase: PartyPhase::Waiting,
            choices: Vec::with_capacity(rounds_expected),
            outcomes: Vec::with_capacity(rounds_expected),
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn phase(&self) -> PartyPhase {
        self.phase
    }

    fn order_error(&self, action: &str) -> Error {
        Error::ProtocolOrderViolation(format!(
            "party {} cannot {action} in phase {:?} after {} of {} rounds",
            self.id + 1,
            self.phase,
            self.choices.len(),
            self.rounds_expected
        ))
    }

    pub fn receive(&mut self) -> Result<()> {
        let ready = matches!(self.phase, PartyPhase::Waiting | PartyPhase::Holding);
        if !ready || self.choices.len() >= self.rounds_expected {
            return Err(self.order_error("receive"));
        }
        self.phase = PartyPhase::Received;
        Ok(())
    }

    /// Uniform draw over this party's options.
    pub fn choose(&mut self) -> Result<usize> {
        if self.phase != PartyPhase::Received {
            return Err(self.order_error("choose"));
        }
        let choice = self.rng.random_range(0..self.option_count);
        self.choices.push(choice);
        self.phase = PartyPhase::Chosen;
        Ok(choice)
    }

    pub fn measure(&mut self, outcome: i8) -> Result<()> {
        if self.phase != PartyPhase::Chosen {
            return Err(self.order_error("measure"));
        }
        self.outcomes.push(outcome);
        self.phase = PartyPhase::Holding;
        Ok(())
    }

    /// Publishes every setting choice; only legal once all rounds are measured.
    pub fn announce(&mut self) -> Result<Vec<usize>> {
        if self.phase != PartyPhase::Holding || self.choices.len() != self.rounds_expected {
            return Err(self.order_error("announce"));
        }
        self.phase = PartyPhase::Announced;
        Ok(self.choices.clone())
    }

    pub fn outcomes(&self) -> &[i8] {
        &self.outcomes
    }
}

/// Hidden per-round variable fixed at emission time.
#[derive(Clone, Copy, Debug)]
enum Emission {
    Plain,
    Atom(usize),
    Local,
    Nonlocal,
}

enum Runtime {
    /// Joint distribution per setting, filled lazily.
    Table { visibility: f64, cache: Vec<Option<OutcomeDistribution>> },
    Product { cumulative: Vec<f64>, up_probs: Vec<Vec<Vec<f64>>> },
    Control { spec: OutcomeControlSpec, free: usize },
    Convex { q_local: f64, local: Vec<Option<OutcomeDistribution>>, nonlocal: Vec<Option<OutcomeDistribution>> },
}

/// Executable form of a [`SourceModel`] bound to one session.
struct Source<'a> {
    profile: &'a SettingProfile,
    runtime: Runtime,
}

fn werner_distribution(profile: &SettingProfile, setting: usize, v: f64) -> Result<OutcomeDistribution> {
    let n = profile.parties();
    let angles = profile.angles(&profile.setting_indices(setting))?;
    let ghz = quantum::ghz_state(n)?.distribution(&angles)?;
    // Werner(v) = v·GHZ + (1−v)·𝕀/2^n is linear in the state
    Ok(ghz.mix(v, &OutcomeDistribution::uniform(n)))
}

fn cached<'c>(
    cache: &'c mut [Option<OutcomeDistribution>],
    profile: &SettingProfile,
    setting: usize,
    v: f64,
) -> Result<&'c OutcomeDistribution> {
    if cache[setting].is_none() {
        cache[setting] = Some(werner_distribution(profile, setting, v)?);
    }
    Ok(cache[setting].as_ref().expect("filled above"))
}

fn product_up_probs(profile: &SettingProfile, strategy: &ProductStrategy) -> Result<Vec<Vec<Vec<f64>>>> {
    strategy
        .atoms()
        .iter()
        .map(|atom| {
            atom.directions
                .iter()
                .enumerate()
                .map(|(p, dir)| {
                    let state = quantum::product_state(&[*dir])?;
                    profile
                        .options(p)
                        .iter()
                        .map(|a: &PlanarAngle| Ok(quantum::joint_distribution(&state, &[*a])?.marginal_up(0)))
                        .collect()
                })
                .collect()
        })
        .collect()
}

impl<'a> Source<'a> {
    fn new(profile: &'a SettingProfile, model: &SourceModel) -> Result<Self> {
        let settings = profile.joint_settings();
        let runtime = match model {
            SourceModel::Honest { visibility } => Runtime::Table { visibility: *visibility, cache: vec![None; settings] },
            SourceModel::Adversarial { attack: AttackSpec::ProductState { strategy } } => {
                let mut acc = 0.0;
                let cumulative = strategy
                    .atoms()
                    .iter()
                    .map(|a| {
                        acc += a.weight;
                        acc
                    })
                    .collect();
                Runtime::Product { cumulative, up_probs: product_up_probs(profile, strategy)? }
            }
            SourceModel::Adversarial { attack: AttackSpec::OutcomeControl(spec) } => {
                let free = spec.free_party(profile.parties()).ok_or_else(|| Error::InvalidSpec("no free party".into()))?;
                Runtime::Control { spec: spec.clone(), free }
            }
            SourceModel::Adversarial { attack: AttackSpec::ConvexCombination { visibility } } => Runtime::Convex {
                q_local: analysis::local_weight(*visibility),
                local: vec![None; settings],
                nonlocal: vec![None; settings],
            },
        };
        Ok(Source { profile, runtime })
    }

    fn emit(&self, rng: &mut ChaCha8Rng) -> Emission {
        match &self.runtime {
            Runtime::Table { .. } | Runtime::Control { .. } => Emission::Plain,
            Runtime::Product { cumulative, .. } => {
                let u: f64 = rng.random::<f64>() * cumulative.last().copied().unwrap_or(1.0);
                Emission::Atom(cumulative.iter().position(|c| u < *c).unwrap_or(cumulative.len() - 1))
            }
            Runtime::Convex { q_local, .. } => {
                if rng.random::<f64>() < *q_local {
                    Emission::Local
                } else {
                    Emission::Nonlocal
                }
            }
        }
    }

    /// Outcomes for the chosen settings plus Eve's guess of party 1's outcome, if any.
    fn measure(&mut self, emission: Emission, settings: &[usize], rng: &mut ChaCha8Rng) -> Result<(Vec<i8>, Option<i8>)> {
        let n = self.profile.parties();
        let setting = self.profile.setting_index(settings)?;
        let sign = |up: bool| if up { 1 } else { -1 };
        match (&mut self.runtime, emission) {
            (Runtime::Table { visibility, cache }, _) => {
                let dist = cached(cache, self.profile, setting, *visibility)?;
                Ok((outcome_tuple(dist.sample_index(rng), n), None))
            }
            (Runtime::Product { up_probs, .. }, Emission::Atom(atom)) => {
                let outcomes = settings
                    .iter()
                    .enumerate()
                    .map(|(p, &s)| sign(rng.random::<f64>() < up_probs[atom][p][s]))
                    .collect();
                Ok((outcomes, None))
            }
            (Runtime::Control { spec, free }, _) => {
                let mut outcomes = vec![0; n];
                let row = &spec.assignment[spec.joint_index(self.profile, settings)];
                for (&p, &o) in spec.controlled.iter().zip(row) {
                    outcomes[p] = o;
                }
                outcomes[*free] = match &spec.free {
                    FreeParty::Uniform => sign(rng.random::<bool>()),
                    FreeParty::Deterministic { outcomes } => outcomes[settings[*free]],
                };
                Ok((outcomes, None))
            }
            (Runtime::Convex { local, .. }, Emission::Local) => {
                let dist = cached(local, self.profile, setting, V_LOCAL)?;
                let outcomes = outcome_tuple(dist.sample_index(rng), n);
                let guess = outcomes[0];
                Ok((outcomes, Some(guess)))
            }
            (Runtime::Convex { nonlocal, .. }, _) => {
                let dist = cached(nonlocal, self.profile, setting, 1.0)?;
                let outcomes = outcome_tuple(dist.sample_index(rng), n);
                Ok((outcomes, Some(sign(rng.random::<bool>()))))
            }
            (Runtime::Product { .. }, _) => unreachable!("product sources always emit an atom"),
        }
    }
}

/// Runs the whole protocol for `config`. Deterministic for a fixed seed.
pub fn run_session(config: &SessionConfig) -> Result<Transcript> {
    config.validate()?;
    let profile = &config.profile;
    let mut source = Source::new(profile, &config.source)?;
    let mut source_rng = substream(config.seed, SOURCE_STREAM);
    let mut parties = (0..config.n)
        .map(|id| Party::new(id, profile, config.rounds, config.seed))
        .collect::<Result<Vec<_>>>()?;

    let mut settings = vec![0; config.n];
    let mut outcomes_by_round = Vec::with_capacity(config.rounds);
    let mut eve = Vec::with_capacity(config.rounds);
    for _ in 0..config.rounds {
        let emission = source.emit(&mut source_rng);
        for (party, slot) in parties.iter_mut().zip(settings.iter_mut()) {
            party.receive()?;
            *slot = party.choose()?;
        }
        let (outcomes, guess) = source.measure(emission, &settings, &mut source_rng)?;
        for (party, &o) in parties.iter_mut().zip(&outcomes) {
            party.measure(o)?;
        }
        outcomes_by_round.push(outcomes);
        eve.push(guess);
    }

    let announced = parties.iter_mut().map(Party::announce).collect::<Result<Vec<_>>>()?;
    let mut rounds = Vec::with_capacity(config.rounds);
    for (index, (outcomes, eve_guess)) in outcomes_by_round.into_iter().zip(eve).enumerate() {
        let settings: Vec<usize> = announced.iter().map(|c| c[index]).collect();
        let class = classify_round(profile, &settings)?;
        rounds.push(RoundRecord { index, settings, outcomes, class, eve_guess });
    }
    Ok(Transcript::judge(config.clone(), rounds))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PublicRound {
    pub index: usize,
    pub settings: Vec<usize>,
    pub class: RoundClass,
    /// Revealed for Svetlichny-test rounds only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcomes: Option<Vec<i8>>,
}

/// What an outside observer of the classical channel sees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PublicTranscript {
    pub config: SessionConfig,
    pub rounds: Vec<PublicRound>,
    pub verdict: Verdict,
}

pub fn public_view(transcript: &Transcript) -> PublicTranscript {
    let rounds = transcript
        .rounds()
        .iter()
        .map(|r| PublicRound {
            index: r.index,
            settings: r.settings.clone(),
            class: r.class,
            outcomes: matches!(r.class, RoundClass::SiTest { .. }).then(|| r.outcomes.clone()),
        })
        .collect();
    PublicTranscript { config: transcript.config().clone(), rounds, verdict: transcript.verdict().clone() }
}
