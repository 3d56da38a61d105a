use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use svqkd_core::adversary::{
    cc_attack_source, max_outcome_control_value, optimize_product_attack, outcome_control_source,
    product_state_source, AttackSpec, DirectionMode, SearchMode, EXHAUSTIVE_LIMIT, HEURISTIC_LIMIT,
};
use svqkd_core::analysis::{
    brute_force_bipartition_max, brute_force_local_max, dw_rate, empirical_rate, mismatch_rate, rate_curve,
};
use svqkd_core::protocol::{
    classical_bound, quantum_max, sift, standard_profile, svetlichny_value, SettingProfile,
};
use svqkd_core::quantum::ghz_state;
use svqkd_core::session::{public_view, run_session, substream, AbortReason, SessionConfig, SourceModel, Transcript, Verdict};
use svqkd_core::Error;

use crate::config::{parse_grid, AttackKind, RunConfig};
use crate::error::{CliError, EXIT_ABORTED, EXIT_OK, EXIT_ORACLE_FAIL};
use crate::report::{
    write_rate_csv, write_transcript, CheckStatus, EveLine, MismatchLine, OracleCheck, RateRow, RateTable,
    SessionSummary, SettingRate, SiLine, VerifyReport,
};

/// RNG stream used by attack searches, away from the session streams.
pub const ATTACK_STREAM: u64 = 1 << 32;

const EXACT_TOL: f64 = 1e-9;

/// What a command printed and how the process should exit.
#[derive(Clone, Debug, PartialEq)]
pub struct CommandOutput {
    pub code: i32,
    pub stdout: String,
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn session_config(run: &RunConfig, profile: SettingProfile, source: SourceModel) -> SessionConfig {
    let mut cfg = SessionConfig::new(profile, run.rounds, source, run.seed);
    cfg.abort_sigma = run.abort_sigma;
    cfg
}

fn summarize(run: &RunConfig, t: &Transcript) -> SessionSummary {
    let sifted = sift(t);
    let n = t.config().n;
    let si = t.estimate().map(|e| SiLine {
        variant: e.variant,
        value: e.value,
        stderr: e.stderr,
        classical_bound: e.classical_bound,
        quantum_max: quantum_max(n),
        margin: e.margin,
    });
    let (verdict, verdict_detail) = match t.verdict() {
        Verdict::Accepted => ("accepted".to_string(), None),
        Verdict::Aborted(AbortReason::NoViolation { .. }) => ("aborted: no violation".to_string(), None),
        Verdict::Aborted(AbortReason::InsufficientStatistics { detail }) => {
            ("aborted: insufficient statistics".to_string(), Some(detail.clone()))
        }
    };
    let mismatch = mismatch_rate(t).ok().map(|m| MismatchLine {
        pooled: m.rate(),
        stderr: m.stderr(),
        count: m.count,
        per_setting: m
            .per_setting
            .iter()
            .map(|s| SettingRate { settings: s.settings.clone(), sign: s.sign, rate: s.rate(), count: s.count })
            .collect(),
    });
    SessionSummary {
        run: run.clone(),
        attack: None,
        attack_value: None,
        rounds: t.rounds().len(),
        key_rounds: sifted.key.signs.len(),
        si_rounds: sifted.si_count(),
        discard_rounds: sifted.discards,
        si,
        verdict,
        verdict_detail,
        mismatch,
        eve: None,
    }
}

fn finish_session(run: &RunConfig, t: &Transcript, summary: SessionSummary) -> Result<CommandOutput, CliError> {
    if let Some(path) = &run.transcript {
        write_transcript(create(path)?, run, &public_view(t))?;
    }
    let text = summary.render(run.format)?;
    let stdout = match &run.summary {
        Some(path) => {
            write_text(path, &text)?;
            String::new()
        }
        None => text,
    };
    let code = if t.verdict().is_accepted() { EXIT_OK } else { EXIT_ABORTED };
    Ok(CommandOutput { code, stdout })
}

/// Honest Werner-source session.
pub fn simulate(run: &RunConfig) -> Result<CommandOutput, CliError> {
    let profile = standard_profile(run.parties)?;
    let cfg = session_config(run, profile, SourceModel::Honest { visibility: run.visibility });
    let t = run_session(&cfg)?;
    finish_session(run, &t, summarize(run, &t))
}

pub fn keyrate(run: &RunConfig) -> Result<CommandOutput, CliError> {
    let grid = parse_grid(&run.grid)?;
    let rows: Vec<RateRow> = rate_curve(&grid)?.iter().map(RateRow::from).collect();
    if let Some(path) = &run.output {
        write_rate_csv(create(path)?, run, &rows)?;
    }
    let table = RateTable { run: run.clone(), rows };
    Ok(CommandOutput { code: EXIT_OK, stdout: table.render(run.format)? })
}

fn check(oracle: &str, n: usize, bound: f64, value: Result<f64, Error>) -> Result<OracleCheck, CliError> {
    let mut c = OracleCheck {
        oracle: oracle.to_string(),
        parties: n,
        value: None,
        bound,
        status: CheckStatus::Pass,
        tight: None,
        detail: None,
    };
    match value {
        Ok(v) => {
            c.value = Some(v);
            c.tight = Some((v - bound).abs() < EXACT_TOL);
            if v > bound + EXACT_TOL {
                c.status = CheckStatus::Fail;
            }
        }
        Err(e @ Error::SizeLimit { .. }) => {
            c.status = CheckStatus::SizeLimit;
            c.detail = Some(e.to_string());
        }
        Err(e) => return Err(e.into()),
    }
    Ok(c)
}

/// Runs every oracle that fits the party count against the classical bound, and
/// checks that GHZ reaches the quantum maximum on the standard settings.
pub fn verify(run: &RunConfig) -> Result<CommandOutput, CliError> {
    let n = run.parties;
    let profile = standard_profile(n)?;
    let variant = profile.variant();
    let bound = classical_bound(n);
    let mut checks = vec![
        check("local", n, bound, brute_force_local_max(n, variant))?,
        check("bipartition", n, bound, brute_force_bipartition_max(n, variant))?,
        check(
            "outcome-control",
            n,
            bound,
            max_outcome_control_value(n, variant, SearchMode::Exhaustive).map(|o| o.value),
        )?,
    ];

    let ghz = ghz_state(n)?;
    let table = (0..1usize << n)
        .map(|t| ghz.distribution(&profile.si_angles(t)).map(|d| d.correlator()))
        .collect::<Result<Vec<_>, _>>()?;
    let q = svetlichny_value(&table, variant)?.abs();
    let reached = (q - quantum_max(n)).abs() < EXACT_TOL && q > bound;
    checks.push(OracleCheck {
        oracle: "quantum-ghz".into(),
        parties: n,
        value: Some(q),
        bound: quantum_max(n),
        status: if reached { CheckStatus::Pass } else { CheckStatus::Fail },
        tight: Some(reached),
        detail: None,
    });

    let report = VerifyReport { run: run.clone(), checks };
    let text = report.render(run.format)?;
    if let Some(path) = &run.output {
        write_text(path, &text)?;
    }
    let code = if report.passed() { EXIT_OK } else { EXIT_ORACLE_FAIL };
    Ok(CommandOutput { code, stdout: text })
}

fn load_attack_spec(path: &Path) -> Result<AttackSpec, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    if path.extension().is_some_and(|e| e == "json") {
        Ok(serde_json::from_str(&text)?)
    } else {
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("attack spec {}: {e}", path.display())))
    }
}

/// Builds the attack from `run`: an explicit spec file, or the strongest instance of
/// the chosen kind. Returns the source and, when known, its exact Svetlichny value.
pub fn build_attack(run: &RunConfig, profile: &SettingProfile) -> Result<(SourceModel, Option<f64>), CliError> {
    if let Some(path) = &run.attack_spec {
        let spec = load_attack_spec(path)?;
        spec.validate(profile)?;
        return Ok((SourceModel::Adversarial { attack: spec }, None));
    }
    let n = profile.parties();
    match run.attack {
        None => Err(CliError::Usage("attack needs --attack <kind> or --attack-spec <file>".into())),
        Some(AttackKind::ProductState) => {
            if run.restarts == 0 {
                return Err(CliError::Usage("--restarts must be at least 1".into()));
            }
            let mut rng = substream(run.seed, ATTACK_STREAM);
            let best = optimize_product_attack(profile, run.restarts, &mut rng, DirectionMode::Planar)?;
            Ok((product_state_source(best.strategy()?), Some(best.value)))
        }
        Some(AttackKind::OutcomeControl) => {
            let mode = if n <= EXHAUSTIVE_LIMIT {
                SearchMode::Exhaustive
            } else if n <= HEURISTIC_LIMIT {
                SearchMode::Heuristic { restarts: run.restarts.max(1), seed: run.seed }
            } else {
                return Err(Error::SizeLimit { what: "outcome-control search", max: HEURISTIC_LIMIT, n }.into());
            };
            let best = max_outcome_control_value(n, profile.variant(), mode)?;
            Ok((outcome_control_source(best.spec, profile)?, Some(best.value)))
        }
        Some(AttackKind::ConvexCombination) => {
            let source = cc_attack_source(run.visibility)?;
            Ok((source, Some(run.visibility * quantum_max(n))))
        }
    }
}

pub fn attack(run: &RunConfig) -> Result<CommandOutput, CliError> {
    let profile = standard_profile(run.parties)?;
    let (source, attack_value) = build_attack(run, &profile)?;
    let kind = match &source {
        SourceModel::Adversarial { attack } => attack.kind().to_string(),
        SourceModel::Honest { .. } => unreachable!("attacks build adversarial sources"),
    };
    let cc_visibility = match &source {
        SourceModel::Adversarial { attack: AttackSpec::ConvexCombination { visibility } } => Some(*visibility),
        _ => None,
    };
    let cfg = session_config(run, profile, source);
    let t = run_session(&cfg)?;
    let mut summary = summarize(run, &t);
    summary.attack = Some(kind);
    summary.attack_value = attack_value;
    if let Some(v) = cc_visibility {
        let rate = dw_rate(v)?;
        let keys: Vec<_> = t.rounds().iter().filter(|r| r.class.is_key()).collect();
        let agree = keys.iter().filter(|r| r.eve_guess == Some(r.outcomes[0])).count();
        summary.eve = Some(EveLine {
            q_local: rate.q_local,
            agreement: if keys.is_empty() { 0.0 } else { agree as f64 / keys.len() as f64 },
            expected_agreement: (1.0 + rate.q_local) / 2.0,
            key_rounds: keys.len(),
            empirical_rate: empirical_rate(&t).ok().map(|e| e.rate),
            dw_rate: rate.r_dw,
        });
    }
    finish_session(run, &t, summary)
}
