//! wasm-bindgen entry points for the static demo page in `www/`. Every call
//! returns a JSON string so the page needs no glue beyond `JSON.parse`.
//! The `*_json` functions hold the logic and run natively in tests.

use blindsim::analysis::{blindness_sweep, AngleGrid};
use blindsim::prep::PrepStateFamily;
use blindsim::reduction::{overlap_halve_iterated, two_state_bounds, two_state_distribution};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Bound record and exact angle distribution of the two-state protocol.
pub fn two_state_report_json(n: usize) -> Result<String, String> {
    let record = two_state_bounds(n).map_err(|e| e.to_string())?;
    let dist: Vec<f64> = two_state_distribution(n)
        .map_err(|e| e.to_string())?
        .values()
        .map(|p| *p.numer() as f64 / *p.denom() as f64)
        .collect();
    Ok(json!({"record": record, "distribution": dist}).to_string())
}

/// Every halving step starting from `phi` radians.
pub fn overlap_halving_json(phi: f64, steps: usize) -> Result<String, String> {
    let chain = overlap_halve_iterated(phi, steps).map_err(|e| e.to_string())?;
    Ok(serde_json::to_string(&chain).expect("plain numbers"))
}

pub fn blindness_scan_json(family: &str, sites: usize, seed: u64) -> Result<String, String> {
    let fam = match family {
        "honest8" => PrepStateFamily::honest(),
        "cubed" => PrepStateFamily::cubed(),
        "nonweak" => PrepStateFamily::nonweak(),
        other => return Err(format!("unknown family {other:?}")),
    };
    let report = blindness_sweep(sites, &fam, AngleGrid::default_for(sites, seed)).map_err(|e| e.to_string())?;
    Ok(serde_json::to_string(&report).expect("plain numbers"))
}

#[wasm_bindgen]
pub fn two_state_report(n: usize) -> Result<String, JsError> {
    two_state_report_json(n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn overlap_halving(phi: f64, steps: usize) -> Result<String, JsError> {
    overlap_halving_json(phi, steps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn blindness_scan(family: &str, sites: usize, seed: u64) -> Result<String, JsError> {
    blindness_scan_json(family, sites, seed).map_err(|e| JsError::new(&e))
}
