//! Browser bindings. Each export returns a JSON string; the work is done by
//! the plain functions in [`demo`], which are also what the tests call.

pub mod demo;

use wasm_bindgen::prelude::*;

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

/// A uniformly drawn cell for a space with `nodes` nodes and `ops` operations.
#[wasm_bindgen]
pub fn random_arch(seed: u32, nodes: u32, ops: u32) -> Result<String, JsValue> {
    js(demo::random_arch(seed as u64, nodes as usize, ops as usize))
}

/// Kernel entries, probe labels and the four metrics after `epochs` epochs.
#[wasm_bindgen]
pub fn kernel_view(arch: &str, seed: u32, epochs: u32, mode: &str) -> Result<String, JsValue> {
    js(demo::kernel_view(arch, seed as u64, epochs as usize, mode))
}

/// Per-epoch metrics, kernel drift and test accuracy.
#[wasm_bindgen]
pub fn metric_curves(arch: &str, seed: u32, epochs: u32, mode: &str) -> Result<String, JsValue> {
    js(demo::metric_curves(arch, seed as u64, epochs as usize, mode))
}
