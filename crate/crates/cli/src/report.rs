//! File formats: JSON-lines transcripts, CSV rate tables, and session / oracle
//! summaries rendered as aligned text or JSON. Every file starts with the resolved
//! run configuration.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use svqkd_core::analysis::KeyRateReport;
use svqkd_core::protocol::Variant;
use svqkd_core::session::{PublicRound, PublicTranscript, SessionConfig, Verdict};

use crate::config::{Format, RunConfig};
use crate::error::CliError;

/// First line of a transcript file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptHeader {
    pub run: RunConfig,
    pub session: SessionConfig,
    pub verdict: Verdict,
    pub rounds: usize,
}

pub fn write_transcript<W: Write>(mut w: W, run: &RunConfig, t: &PublicTranscript) -> Result<(), CliError> {
    let header = TranscriptHeader {
        run: run.clone(),
        session: t.config.clone(),
        verdict: t.verdict.clone(),
        rounds: t.rounds.len(),
    };
    let io = |e| CliError::Parse(format!("write failed: {e}"));
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n").map_err(io)?;
    for r in &t.rounds {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_transcript<R: BufRead>(r: R) -> Result<(RunConfig, PublicTranscript), CliError> {
    let mut lines = r.lines();
    let first = lines
        .next()
        .ok_or_else(|| CliError::Parse("empty transcript".into()))?
        .map_err(|e| CliError::Parse(e.to_string()))?;
    let header: TranscriptHeader = serde_json::from_str(&first)?;
    let mut rounds = Vec::with_capacity(header.rounds);
    for line in lines {
        let line = line.map_err(|e| CliError::Parse(e.to_string()))?;
        if !line.is_empty() {
            rounds.push(serde_json::from_str::<PublicRound>(&line)?);
        }
    }
    if rounds.len() != header.rounds {
        return Err(CliError::Parse(format!("header announces {} rounds, found {}", header.rounds, rounds.len())));
    }
    Ok((header.run, PublicTranscript { config: header.session, rounds, verdict: header.verdict }))
}

/// `# `-prefixed TOML echo of the configuration.
pub fn config_comment(run: &RunConfig) -> String {
    let text = toml::to_string(run).expect("run config serializes to TOML");
    text.lines().map(|l| format!("# {l}\n")).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub v: f64,
    pub q_local: f64,
    pub h_eve: f64,
    pub h_abc: f64,
    pub r_dw: f64,
}

impl From<&KeyRateReport> for RateRow {
    fn from(r: &KeyRateReport) -> Self {
        RateRow { v: r.v, q_local: r.q_local, h_eve: r.h_eve, h_abc: r.h_abc, r_dw: r.r_dw }
    }
}

pub fn write_rate_csv<W: Write>(mut w: W, run: &RunConfig, rows: &[RateRow]) -> Result<(), CliError> {
    w.write_all(config_comment(run).as_bytes()).map_err(|e| CliError::Parse(e.to_string()))?;
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush().map_err(|e| CliError::Parse(e.to_string()))
}

pub fn read_rate_csv<R: std::io::Read>(r: R) -> Result<Vec<RateRow>, CliError> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    reader.deserialize().map(|row| row.map_err(CliError::from)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub run: RunConfig,
    pub rows: Vec<RateRow>,
}

impl RateTable {
    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Json => Ok(serde_json::to_string_pretty(self)? + "\n"),
            Format::Table => {
                let mut s = config_comment(&self.run);
                let _ = writeln!(s, "{:>10} {:>10} {:>10} {:>10} {:>10}", "v", "q_local", "h_eve", "h_abc", "r_dw");
                for r in &self.rows {
                    let _ = writeln!(
                        s,
                        "{:>10.6} {:>10.6} {:>10.6} {:>10.6} {:>10.6}",
                        r.v, r.q_local, r.h_eve, r.h_abc, r.r_dw
                    );
                }
                Ok(s)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiLine {
    pub variant: Variant,
    pub value: f64,
    pub stderr: f64,
    pub classical_bound: f64,
    pub quantum_max: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingRate {
    pub settings: Vec<usize>,
    pub sign: i8,
    pub rate: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MismatchLine {
    pub pooled: f64,
    pub stderr: f64,
    pub count: usize,
    pub per_setting: Vec<SettingRate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EveLine {
    pub q_local: f64,
    pub agreement: f64,
    /// (1 + q_L)/2.
    pub expected_agreement: f64,
    pub key_rounds: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empirical_rate: Option<f64>,
    pub dw_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub run: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack: Option<String>,
    /// Noise-free Svetlichny value of the attack's correlations, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack_value: Option<f64>,
    pub rounds: usize,
    pub key_rounds: usize,
    pub si_rounds: usize,
    pub discard_rounds: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub si: Option<SiLine>,
    pub verdict: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict_detail: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mismatch: Option<MismatchLine>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eve: Option<EveLine>,
}

impl SessionSummary {
    pub fn render(&self, format: Format) -> Result<String, CliError> {
        if format == Format::Json {
            return Ok(serde_json::to_string_pretty(self)? + "\n");
        }
        let mut s = config_comment(&self.run);
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k:<22} {v}");
        };
        if let Some(a) = &self.attack {
            kv("attack", a.clone());
        }
        if let Some(v) = self.attack_value {
            kv("attack SI (exact)", format!("{v:.6}"));
        }
        kv("rounds", self.rounds.to_string());
        kv("key / SI / discard", format!("{} / {} / {}", self.key_rounds, self.si_rounds, self.discard_rounds));
        if let Some(si) = &self.si {
            kv("SI variant", format!("{:?}", si.variant).to_lowercase());
            kv("SI estimate", format!("{:.6} +/- {:.6}", si.value, si.stderr));
            kv("classical bound", format!("{}", si.classical_bound));
            kv("quantum maximum", format!("{:.6}", si.quantum_max));
            kv("margin", format!("{:.6}", si.margin));
        }
        kv("verdict", self.verdict.clone());
        if let Some(d) = &self.verdict_detail {
            kv("detail", d.clone());
        }
        if let Some(m) = &self.mismatch {
            kv("key mismatch", format!("{:.6} +/- {:.6} over {}", m.pooled, m.stderr, m.count));
            for r in &m.per_setting {
                kv(&format!("  settings {:?}", r.settings), format!("{:.6} over {} (sign {:+})", r.rate, r.count, r.sign));
            }
        }
        if let Some(e) = &self.eve {
            kv("local weight q_L", format!("{:.6}", e.q_local));
            kv("eve agreement", format!("{:.6} (expected {:.6})", e.agreement, e.expected_agreement));
            match e.empirical_rate {
                Some(r) => kv("empirical rate", format!("{r:.6}")),
                None => kv("empirical rate", "n/a (too few key rounds)".into()),
            }
            kv("DW rate", format!("{:.6}", e.dw_rate));
        }
        Ok(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    SizeLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub oracle: String,
    pub parties: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    pub bound: f64,
    pub status: CheckStatus,
    /// Whether the value meets the bound with equality.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tight: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub run: RunConfig,
    pub checks: Vec<OracleCheck>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn render(&self, format: Format) -> Result<String, CliError> {
        if format == Format::Json {
            return Ok(serde_json::to_string_pretty(self)? + "\n");
        }
        let mut s = config_comment(&self.run);
        let _ = writeln!(s, "{:<16} {:>12} {:>12} {:>6} {:<10}", "oracle", "value", "bound", "tight", "status");
        for c in &self.checks {
            let value = c.value.map_or("-".to_string(), |v| format!("{v:.6}"));
            let tight = c.tight.map_or("-", |t| if t { "yes" } else { "no" });
            let status = match c.status {
                CheckStatus::Pass => "PASS",
                CheckStatus::Fail => "FAIL",
                CheckStatus::SizeLimit => "size-limit",
            };
            let _ = write!(s, "{:<16} {:>12} {:>12.6} {:>6} {:<10}", c.oracle, value, c.bound, tight, status);
            if let Some(d) = &c.detail {
                let _ = write!(s, " {d}");
            }
            s.push('\n');
        }
        Ok(s)
    }
}
