//! wasm-bindgen exports for the static page in `www/`. Every export returns
//! a JSON string.

pub mod demo;

use wasm_bindgen::prelude::*;

fn to_js<T: serde::Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn case_names() -> String {
    serde_json::to_string(&demo::CASES).expect("static list")
}

#[wasm_bindgen]
pub fn solve_case(case: &str, cells: usize, amplitude: f64, convection: bool) -> Result<String, JsError> {
    to_js(demo::solve_case(case, cells, amplitude, convection))
}

#[wasm_bindgen]
pub fn inf_sup_sweep(cells: usize, levels: usize) -> Result<String, JsError> {
    to_js(demo::inf_sup_sweep(cells, levels))
}

#[wasm_bindgen]
pub fn mms_rates(cells: usize, levels: usize) -> Result<String, JsError> {
    to_js(demo::mms_rates(cells, levels))
}
