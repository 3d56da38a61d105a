//! Browser bindings: key-rate curve, Werner-state Svetlichny values, and a full
//! seeded session. Each export returns JSON text for the page script to plot.

use serde_json::{json, Value};
use svqkd_core::analysis::{key_rate_threshold, mismatch_rate, rate_curve};
use svqkd_core::protocol::{classical_bound, quantum_max, standard_profile, state_correlators, svetlichny_value};
use svqkd_core::quantum::werner_density;
use svqkd_core::session::{run_session, SessionConfig};
use wasm_bindgen::prelude::*;

/// Largest session the page may request.
pub const MAX_DEMO_ROUNDS: usize = 200_000;
/// Party limit for the Werner curve.
pub const MAX_DEMO_PARTIES: usize = 6;

fn grid(points: usize) -> Vec<f64> {
    let points = points.clamp(2, 2000);
    (0..points).map(|i| i as f64 / (points - 1) as f64).collect()
}

pub fn rate_curve_json(points: usize) -> Result<String, String> {
    let rows = rate_curve(&grid(points)).map_err(|e| e.to_string())?;
    let rows: Vec<Value> = rows.iter().map(|r| json!({ "v": r.v, "q_local": r.q_local, "r_dw": r.r_dw })).collect();
    Ok(json!({ "threshold": key_rate_threshold(), "rows": rows }).to_string())
}

pub fn werner_si_json(parties: usize, points: usize) -> Result<String, String> {
    if parties > MAX_DEMO_PARTIES {
        return Err(format!("at most {MAX_DEMO_PARTIES} parties in the demo"));
    }
    let profile = standard_profile(parties).map_err(|e| e.to_string())?;
    let pure = state_correlators(&profile, &werner_density(parties, 1.0).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let at_one = svetlichny_value(&pure, profile.variant()).map_err(|e| e.to_string())?.abs();
    let rows: Vec<Value> = grid(points).into_iter().map(|v| json!({ "v": v, "si": v * at_one })).collect();
    Ok(json!({
        "parties": parties,
        "classical_bound": classical_bound(parties),
        "quantum_max": quantum_max(parties),
        "rows": rows,
    })
    .to_string())
}

pub fn simulate_json(parties: usize, rounds: usize, visibility: f64, seed: u64) -> Result<String, String> {
    if rounds > MAX_DEMO_ROUNDS {
        return Err(format!("at most {MAX_DEMO_ROUNDS} rounds in the demo"));
    }
    let cfg = SessionConfig::honest(parties, rounds, visibility, seed).map_err(|e| e.to_string())?;
    let t = run_session(&cfg).map_err(|e| e.to_string())?;
    let mismatch = mismatch_rate(&t).ok().map(|m| m.rate());
    let est = t.estimate();
    Ok(json!({
        "accepted": t.verdict().is_accepted(),
        "si": est.map(|e| e.value),
        "stderr": est.map(|e| e.stderr),
        "classical_bound": classical_bound(parties),
        "quantum_max": quantum_max(parties),
        "key_mismatch": mismatch,
        "correlators": est.map(|e| e.correlators.iter().map(|c| c.mean).collect::<Vec<_>>()),
    })
    .to_string())
}

#[wasm_bindgen(js_name = rateCurve)]
pub fn rate_curve_js(points: usize) -> Result<String, JsError> {
    rate_curve_json(points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = wernerSi)]
pub fn werner_si_js(parties: usize, points: usize) -> Result<String, JsError> {
    werner_si_json(parties, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = simulate)]
pub fn simulate_js(parties: usize, rounds: usize, visibility: f64, seed: u64) -> Result<String, JsError> {
    simulate_json(parties, rounds, visibility, seed).map_err(|e| JsError::new(&e))
}
