//! wasm-bindgen bindings for the demo page in `www/`.
//!
//! Curves come back as flat `Float64Array`s of interleaved points so the page
//! can plot them without extra marshalling.

pub mod curves;

use wasm_bindgen::prelude::*;

fn js(e: sixstate::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// `[lambda, e_pdc, lambda, e_pdc, ...]` on a log grid of lambda.
#[wasm_bindgen(js_name = qberVsLambda)]
pub fn qber_vs_lambda(
    length_km: f64,
    eta_d: f64,
    eta_m: f64,
    lambda_min: f64,
    lambda_max: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    curves::qber_vs_lambda(length_km, eta_d, eta_m, lambda_min, lambda_max, points).map_err(js)
}

/// `[L, lambda_opt, rate, ...]` for the asymptotic rate optimized over lambda.
#[wasm_bindgen(js_name = asymptoticVsDistance)]
pub fn asymptotic_vs_distance(eta_d: f64, eta_m: f64, l_max: f64, points: usize) -> Result<Vec<f64>, JsError> {
    curves::asymptotic_vs_distance(eta_d, eta_m, l_max, points).map_err(js)
}

/// `[N, finite_rate, asymptotic_rate, ...]` on a log grid of N_source.
#[wasm_bindgen(js_name = finiteVsPulses)]
pub fn finite_vs_pulses(
    length_km: f64,
    eta_d: f64,
    eta_m: f64,
    log10_n_min: f64,
    log10_n_max: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    curves::finite_vs_pulses(length_km, eta_d, eta_m, log10_n_min, log10_n_max, points).map_err(js)
}

#[wasm_bindgen(js_name = qberThreshold)]
pub fn qber_threshold() -> f64 {
    sixstate::qber_threshold()
}
