//! Acceptance suite, run without the libtest harness so every criterion prints one
//! PASS/FAIL line: `cargo test -p svqkd-cli --test acceptance`.

use std::f64::consts::SQRT_2;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use svqkd_core::adversary::{
    cc_attack_source, cc_local_weight, max_outcome_control_value, optimize_product_attack, outcome_control_source,
    product_state_source, DirectionMode, FreeParty, OutcomeControlSpec, SearchMode,
};
use svqkd_core::analysis::{
    brute_force_bipartition_max, brute_force_local_max, dw_rate, empirical_rate, key_rate_threshold, mismatch_rate,
    rate_curve, V_LOCAL,
};
use svqkd_core::protocol::{
    classical_bound, classify_round, quantum_max, standard_profile, state_si_value, RoundClass,
};
use svqkd_core::quantum::{ghz_state, werner_density};
use svqkd_core::session::{run_session, SessionConfig};

const SEEDS: std::ops::RangeInclusive<u64> = 1..=20;

/// Criteria that cannot hold as stated, with the measured reason. They are still run
/// and reported as FAIL.
const KNOWN_UNATTAINABLE: &[(u8, &str)] = &[(
    3,
    "fully local deterministic strategies reach only 4 (n=4) and 8 (n=5); 2^(n-1) is the bipartition bound",
)];

struct Check {
    pass: bool,
    detail: String,
}

impl Check {
    fn new(pass: bool, detail: impl Into<String>) -> Check {
        Check { pass, detail: detail.into() }
    }
}

fn c1_tripartite_violation() -> Check {
    let p = standard_profile(3).unwrap();
    let exact = state_si_value(&p, &ghz_state(3).unwrap().to_density()).unwrap();
    let target = 4.0 * SQRT_2;
    let t = run_session(&SessionConfig::honest(3, 40_000, 1.0, 1).unwrap()).unwrap();
    let est = t.estimate().unwrap();
    let analytic = (exact.abs() - target).abs() < 1e-9;
    let sampled = (est.value.abs() - target).abs() < 4.0 * est.stderr;
    Check::new(
        analytic && sampled,
        format!("analytic {exact:.12}, sampled {:.4} +/- {:.4}", est.value, est.stderr),
    )
}

fn c2_n_party_violation() -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for n in 3..=5 {
        let p = standard_profile(n).unwrap();
        let v = state_si_value(&p, &ghz_state(n).unwrap().to_density()).unwrap().abs();
        ok &= (v - quantum_max(n)).abs() < 1e-9;
        parts.push(format!("n={n}: {v:.9}"));
    }
    Check::new(ok, parts.join(", "))
}

fn c3_classical_bounds() -> Check {
    let mut parts = Vec::new();
    let mut ok = true;
    for n in 3..=5 {
        let variant = standard_profile(n).unwrap().variant();
        let local = brute_force_local_max(n, variant).unwrap();
        ok &= local == classical_bound(n);
        parts.push(format!("local n={n}: {local} (want {})", classical_bound(n)));
    }
    for n in 3..=4 {
        let variant = standard_profile(n).unwrap().variant();
        let bip = brute_force_bipartition_max(n, variant).unwrap();
        ok &= bip == classical_bound(n);
        parts.push(format!("bipartition n={n}: {bip}"));
    }
    Check::new(ok, parts.join(", "))
}

fn c4_product_attack() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for (n, bound) in [(3, 2.0), (4, 4.0)] {
        let p = standard_profile(n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let best = optimize_product_attack(&p, 10_000, &mut rng, DirectionMode::Planar).unwrap();
        ok &= best.value <= bound + 1e-6;
        parts.push(format!("n={n} best {:.6}", best.value));
        let source = product_state_source(best.strategy().unwrap());
        let accepted = SEEDS
            .filter(|&seed| {
                let cfg = SessionConfig::new(p.clone(), 40_000, source.clone(), seed);
                run_session(&cfg).unwrap().verdict().is_accepted()
            })
            .count();
        ok &= accepted == 0;
        parts.push(format!("n={n} accepted {accepted}/20"));
    }
    Check::new(ok, parts.join(", "))
}

fn random_control_spec(n: usize, rng: &mut ChaCha8Rng) -> OutcomeControlSpec {
    let free = rng.random_range(0..n);
    let controlled: Vec<usize> = (0..n).filter(|&p| p != free).collect();
    let options = |p: usize| if p == 0 { 4 } else { 2 };
    let joint: usize = controlled.iter().map(|&p| options(p)).product();
    let sign = |rng: &mut ChaCha8Rng| if rng.random::<bool>() { 1 } else { -1 };
    let assignment = (0..joint).map(|_| (0..n - 1).map(|_| sign(rng)).collect()).collect();
    let free_mode = if rng.random::<bool>() {
        FreeParty::Uniform
    } else {
        FreeParty::Deterministic { outcomes: (0..options(free)).map(|_| sign(rng)).collect() }
    };
    OutcomeControlSpec { controlled, assignment, free: free_mode }
}

fn c5_outcome_control() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 3..=5 {
        let p = standard_profile(n).unwrap();
        let best = max_outcome_control_value(n, p.variant(), SearchMode::Exhaustive).unwrap();
        ok &= best.value == classical_bound(n);
        let mut accepted = 0;
        for seed in SEEDS {
            for spec in [best.spec.clone(), random_control_spec(n, &mut rng)] {
                let source = outcome_control_source(spec, &p).unwrap();
                if run_session(&SessionConfig::new(p.clone(), 40_000, source, seed)).unwrap().verdict().is_accepted() {
                    accepted += 1;
                }
            }
        }
        ok &= accepted == 0;
        parts.push(format!("n={n} max {} accepted {accepted}/40", best.value));
    }
    Check::new(ok, parts.join(", "))
}

fn c6_werner_threshold() -> Check {
    let p = standard_profile(3).unwrap();
    let si = |v: f64| state_si_value(&p, &werner_density(3, v).unwrap()).unwrap().abs();
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = (lo + hi) / 2.0;
        if si(mid) > 4.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let crossing = (lo + hi) / 2.0;
    let crossing_ok = (crossing - V_LOCAL).abs() < 1e-9;
    let verdicts = |v: f64| {
        SEEDS
            .filter(|&seed| run_session(&SessionConfig::honest(3, 40_000, v, seed).unwrap()).unwrap().verdict().is_accepted())
            .count()
    };
    let low = verdicts(0.68);
    let high = verdicts(0.75);
    Check::new(
        crossing_ok && low == 0 && high == 20,
        format!("crossing {crossing:.12}, v=0.68 accepted {low}/20, v=0.75 accepted {high}/20"),
    )
}

fn c7_key_rate_curve() -> Check {
    let t = key_rate_threshold();
    let at_one = dw_rate(1.0).unwrap().r_dw;
    let at_threshold = dw_rate(1.0 / (2.0 - 1.0 / 2f64.sqrt())).unwrap().r_dw;
    let grid: Vec<f64> = (0..1000).map(|i| i as f64 / 999.0).collect();
    let curve = rate_curve(&grid).unwrap();
    let monotone = curve.windows(2).all(|w| {
        if w[0].v >= t {
            w[1].r_dw > w[0].r_dw
        } else {
            w[1].r_dw >= w[0].r_dw
        }
    });
    Check::new(
        at_one == 1.0 && at_threshold.abs() < 1e-9 && (t - 0.773459).abs() < 1e-6 && monotone,
        format!("r(1) = {at_one}, r(threshold) = {at_threshold:.2e}, threshold {t:.9}, monotone {monotone}"),
    )
}

fn c8_cc_attack() -> Check {
    let p = standard_profile(3).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, v) in [0.8, 0.9, 1.0].into_iter().enumerate() {
        let cfg = SessionConfig::new(p.clone(), 100_000, cc_attack_source(v).unwrap(), 80 + i as u64);
        let t = run_session(&cfg).unwrap();
        let keys: Vec<_> = t.rounds().iter().filter(|r| r.class.is_key()).collect();
        let agree = keys.iter().filter(|r| r.eve_guess == Some(r.outcomes[0])).count() as f64 / keys.len() as f64;
        let expected = (1.0 + cc_local_weight(v).unwrap()) / 2.0;
        let se = (expected * (1.0 - expected) / keys.len() as f64).sqrt();
        let emp = empirical_rate(&t).unwrap().rate;
        let dw = dw_rate(v).unwrap().r_dw;
        ok &= (agree - expected).abs() < 4.0 * se && (emp - dw).abs() < 0.02;
        parts.push(format!("v={v}: agree {agree:.4}/{expected:.4}, rate {emp:.4}/{dw:.4}"));
    }
    Check::new(ok, parts.join(", "))
}

fn c9_key_agreement() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, v) in [0.0, 0.5, 0.8, 1.0].into_iter().enumerate() {
        let t = run_session(&SessionConfig::honest(3, 100_000, v, 90 + i as u64).unwrap()).unwrap();
        let m = mismatch_rate(&t).unwrap();
        let expected = (1.0 - v) / 2.0;
        let pooled_se = (expected * (1.0 - expected) / m.count as f64).sqrt();
        let pooled_ok = if pooled_se == 0.0 { m.rate() == expected } else { (m.rate() - expected).abs() < 4.0 * pooled_se };
        let mut sym_ok = true;
        for a in &m.per_setting {
            for b in &m.per_setting {
                let se = (a.stderr().powi(2) + b.stderr().powi(2)).sqrt();
                sym_ok &= if se == 0.0 { a.rate() == b.rate() } else { (a.rate() - b.rate()).abs() < 4.0 * se };
            }
        }
        ok &= pooled_ok && sym_ok;
        parts.push(format!("v={v}: {:.4} (want {expected})", m.rate()));
    }
    Check::new(ok, parts.join(", "))
}

fn c10_census() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in 3..=6 {
        let p = standard_profile(n).unwrap();
        let mut counts = (0, 0, 0);
        for index in 0..p.joint_settings() {
            match classify_round(&p, &p.setting_indices(index)).unwrap() {
                RoundClass::Key { .. } => counts.0 += 1,
                RoundClass::SiTest { .. } => counts.1 += 1,
                RoundClass::Discard => counts.2 += 1,
            }
        }
        ok &= counts == (1 << (n - 1), 1 << n, 1 << (n - 1));
        parts.push(format!("n={n}: {counts:?}"));
    }
    Check::new(ok, parts.join(", "))
}

/// Runs the binary inside `dir` with relative output paths, so repeated runs in
/// different directories see identical arguments.
fn run_cli(dir: &Path, tag: &str, args: &[&str], outputs: &[(&str, &str)]) -> Vec<Vec<u8>> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_svqkd"));
    cmd.current_dir(dir).args(args).env_remove("SVQKD_SEED");
    let names: Vec<String> = outputs.iter().map(|(_, name)| format!("{tag}-{name}")).collect();
    for ((flag, _), name) in outputs.iter().zip(&names) {
        cmd.arg(flag).arg(name);
    }
    let out = cmd.output().expect("cli runs");
    let mut files = vec![out.stdout, out.status.code().unwrap_or(-1).to_string().into_bytes()];
    files.extend(names.iter().map(|n| std::fs::read(dir.join(n)).expect("output file written")));
    files
}

fn c11_determinism() -> Check {
    let (dir_a, dir_b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    type Invocation<'a> = (&'a str, Vec<&'a str>, Vec<(&'a str, &'a str)>);
    let commands: Vec<Invocation> = vec![
        (
            "simulate",
            vec!["simulate", "--rounds", "20000", "--visibility", "0.9", "--seed", "7"],
            vec![("--transcript", "t.jsonl"), ("--summary", "s.txt")],
        ),
        (
            "simulate-json",
            vec!["--format", "json", "simulate", "--parties", "4", "--rounds", "20000", "--seed", "8"],
            vec![("--transcript", "t.jsonl"), ("--summary", "s.json")],
        ),
        ("keyrate", vec!["keyrate", "--grid", "0.7:1:0.01"], vec![("--output", "rate.csv")]),
        ("verify", vec!["verify", "--parties", "4"], vec![("--output", "v.txt")]),
        (
            "attack-product",
            vec!["attack", "--attack", "product-state", "--rounds", "20000", "--seed", "3", "--restarts", "50"],
            vec![("--transcript", "t.jsonl"), ("--summary", "s.txt")],
        ),
        (
            "attack-control",
            vec!["attack", "--attack", "outcome-control", "--rounds", "20000", "--seed", "3"],
            vec![("--transcript", "t.jsonl"), ("--summary", "s.txt")],
        ),
        (
            "attack-cc",
            vec!["attack", "--attack", "convex-combination", "--visibility", "0.9", "--rounds", "20000", "--seed", "3"],
            vec![("--transcript", "t.jsonl"), ("--summary", "s.txt")],
        ),
    ];
    let mut differing = Vec::new();
    for (tag, args, outputs) in &commands {
        let first = run_cli(dir_a.path(), tag, args, outputs);
        let second = run_cli(dir_b.path(), tag, args, outputs);
        if first != second {
            differing.push(*tag);
        }
    }
    Check::new(
        differing.is_empty(),
        format!("{} commands compared, differing: {differing:?}", commands.len()),
    )
}

fn main() -> std::process::ExitCode {
    type Criterion = (u8, &'static str, Option<u64>, fn() -> Check);
    let criteria: [Criterion; 11] = [
        (1, "maximal violation n=3", Some(10), c1_tripartite_violation),
        (2, "maximal violation n=3..5", Some(10), c2_n_party_violation),
        (3, "classical bounds by oracle", Some(60), c3_classical_bounds),
        (4, "product-state attack bound", Some(120), c4_product_attack),
        (5, "outcome-control bound", Some(120), c5_outcome_control),
        (6, "Werner violation threshold", None, c6_werner_threshold),
        (7, "key-rate curve", Some(1), c7_key_rate_curve),
        (8, "convex-combination attack consistency", Some(60), c8_cc_attack),
        (9, "key-agreement statistics", None, c9_key_agreement),
        (10, "round-class census", None, c10_census),
        (11, "CLI determinism", None, c11_determinism),
    ];
    let mut failing = Vec::new();
    for (id, name, limit, run) in criteria {
        let start = Instant::now();
        let check = run();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|s| elapsed < Duration::from_secs(s));
        let pass = check.pass && in_time;
        let limit_note = limit.map_or(String::new(), |s| format!(" / {s} s"));
        println!(
            "{} criterion {id:>2}: {name} [{:.2} s{limit_note}] {}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            check.detail
        );
        if !pass {
            failing.push(id);
        }
    }
    for (id, why) in KNOWN_UNATTAINABLE {
        println!("note criterion {id}: {why}");
    }
    let known: Vec<u8> = KNOWN_UNATTAINABLE.iter().map(|k| k.0).collect();
    if failing == known {
        std::process::ExitCode::SUCCESS
    } else {
        eprintln!("failing criteria {failing:?} differ from the documented unattainable set {known:?}");
        std::process::ExitCode::FAILURE
    }
}
