//! Browser bindings. Each operation has a plain Rust form returning JSON
//! text (tested natively) and a `wasm_bindgen` wrapper for the page in
//! `www/`.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use contraction_lab::inequalities::{isoperimetric_profile_1d, nu_profile_closed_form, strong_poincare_check, TestFunction};
use contraction_lab::measures::{audit_grid, make_model_nu, parse_spec};
use contraction_lab::transport1d::monotone_map;
use contraction_lab::verify::contraction_claim;

/// Samples the monotone map between two 1-D spec texts on `n` points of
/// `[-8, 8]` (clipped to the map's window): `{x, t, dt, sup, claim}`.
pub fn map_table(source: &str, target: &str, n: usize) -> Result<String, String> {
    let s = parse_spec(source).map_err(|e| format!("source: {e}"))?;
    let t = parse_spec(target).map_err(|e| format!("target: {e}"))?;
    let n = n.clamp(2, 4001);
    let map = monotone_map(&s, &t).map_err(|e| e.to_string())?;
    let (lo, hi) = map.window();
    let (a, b) = (lo.max(-8.0), hi.min(8.0));
    // stay off the endpoints, where one-sided derivatives are flagged
    let pad = 1e-6 * (b - a);
    let xs: Vec<f64> = (0..n)
        .map(|k| a + pad + (b - a - 2.0 * pad) * k as f64 / (n - 1) as f64)
        .collect();
    let rows = map.tabulate(&xs).map_err(|e| e.to_string())?;
    let sup = rows.iter().map(|r| r.dt).fold(f64::NEG_INFINITY, f64::max);
    let audit: Vec<Vec<f64>> = audit_grid(&[(a, b)], 201);
    let claim = contraction_claim(&s, &t, &audit)
        .map(|c| json!({"theorem": c.theorem, "bound": c.bound}))
        .unwrap_or(Value::Null);
    Ok(json!({
        "source": s.name,
        "target": t.name,
        "x": xs,
        "t": rows.iter().map(|r| r.t).collect::<Vec<_>>(),
        "dt": rows.iter().map(|r| r.dt).collect::<Vec<_>>(),
        "sup": sup,
        "claim": claim,
    })
    .to_string())
}

/// Brute-force isoperimetric profile of `dx / cos(Ax)` next to
/// `e^{At/2} + e^{-At/2}` at `n` points of `(0, t_max]`.
pub fn model_profile(a: f64, t_max: f64, n: usize) -> Result<String, String> {
    if !(a > 0.0 && t_max > 0.0 && t_max <= 20.0) {
        return Err("need A > 0 and 0 < t_max <= 20".into());
    }
    let n = n.clamp(1, 200);
    let ts: Vec<f64> = (1..=n).map(|k| t_max * k as f64 / n as f64).collect();
    let m = make_model_nu(a).map_err(|e| e.to_string())?;
    let pts = isoperimetric_profile_1d(&m, &ts).map_err(|e| e.to_string())?;
    let closed: Vec<f64> = ts.iter().map(|&t| nu_profile_closed_form(a, t)).collect();
    let worst = pts
        .iter()
        .zip(&closed)
        .map(|(p, c)| (p.value - c).abs())
        .fold(0.0, f64::max);
    Ok(json!({
        "t": ts,
        "profile": pts.iter().map(|p| p.value).collect::<Vec<_>>(),
        "closed_form": closed,
        "max_deviation": worst,
    })
    .to_string())
}

/// Gaussian strong Poincaré for the polynomial with coefficients `coeffs`
/// (constant term first): both sides and the verdict.
pub fn poincare(coeffs: &[f64]) -> Result<String, String> {
    if coeffs.is_empty() || coeffs.len() > 12 || coeffs.iter().any(|c| !c.is_finite()) {
        return Err("give 1 to 12 finite coefficients".into());
    }
    let e = strong_poincare_check(&TestFunction::polynomial(coeffs.to_vec())).map_err(|e| e.to_string())?;
    Ok(json!({
        "name": e.name,
        "variance": e.computed,
        "bound": e.bound,
        "status": e.status,
        "note": e.note,
    })
    .to_string())
}

#[wasm_bindgen(js_name = mapTable)]
pub fn map_table_js(source: &str, target: &str, n: usize) -> Result<String, JsValue> {
    map_table(source, target, n).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = modelProfile)]
pub fn model_profile_js(a: f64, t_max: f64, n: usize) -> Result<String, JsValue> {
    model_profile(a, t_max, n).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = strongPoincare)]
pub fn poincare_js(coeffs: Vec<f64>) -> Result<String, JsValue> {
    poincare(&coeffs).map_err(|e| JsValue::from_str(&e))
}
