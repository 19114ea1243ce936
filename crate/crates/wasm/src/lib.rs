//! Closed-form power and event-count calculators for the browser.
//!
//! The exported functions are thin wrappers; the plain-Rust versions they
//! call are what the native tests exercise, since building a `JsError`
//! needs a JavaScript host.

use jmpower_core::{power_given_events, required_events, GeneticDesign};
use wasm_bindgen::prelude::*;

pub fn power_impl(maf: f64, theta: f64, alpha_level: f64, events: f64) -> Result<f64, String> {
    power_given_events(maf, alpha_level, theta, events).map_err(|e| e.to_string())
}

pub fn events_impl(maf: f64, theta: f64, alpha_level: f64, power: f64) -> Result<f64, String> {
    let design = GeneticDesign::new(maf, alpha_level, power).map_err(|e| e.to_string())?;
    required_events(&design, theta).map_err(|e| e.to_string())
}

/// Power at each allele frequency of `mafs` for a fixed event count.
pub fn curve_impl(events: f64, theta: f64, alpha_level: f64, mafs: &[f64]) -> Result<Vec<f64>, String> {
    mafs.iter().map(|&p| power_impl(p, theta, alpha_level, events)).collect()
}

#[wasm_bindgen]
pub fn power(maf: f64, theta: f64, alpha_level: f64, events: f64) -> Result<f64, JsError> {
    power_impl(maf, theta, alpha_level, events).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = requiredEvents)]
pub fn required_events_js(maf: f64, theta: f64, alpha_level: f64, power: f64) -> Result<f64, JsError> {
    events_impl(maf, theta, alpha_level, power).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = powerByMaf)]
pub fn power_by_maf(events: f64, theta: f64, alpha_level: f64, mafs: Vec<f64>) -> Result<Vec<f64>, JsError> {
    curve_impl(events, theta, alpha_level, &mafs).map_err(|e| JsError::new(&e))
}
