//! Three operations for the static demo page. Each `*_json` function is
//! plain Rust so it can be tested natively; the exported wrappers hand the
//! JSON text to JavaScript.

use diffcover::construct::{construct, ConstructConfig};
use diffcover::expr::{build_graph, classify, parse};
use diffcover::verify::{image_exhaustive, verify_cover};
use diffcover::zset::ZSet;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Enumeration budget; keeps the page responsive.
pub const BUDGET: u64 = 20_000_000;
/// Largest modulus accepted by the sumset op.
pub const MAX_SUMSET_Q: u64 = 1 << 20;
/// Elements listed back to the page.
const LIST_MAX: usize = 200;

pub fn classify_json(expr: &str) -> Result<Value, String> {
    let e = parse(expr).map_err(|e| e.to_string())?;
    let cls = classify(&e).map_err(|e| e.to_string())?;
    Ok(json!({
        "input": e.to_string(),
        "normalized": cls.normalized.to_string(),
        "graph": build_graph(&cls.normalized).describe(),
        "tag": cls.tag.name(),
        "handler": cls.tag.handler(),
    }))
}

fn parse_list(s: &str) -> Result<Vec<u64>, String> {
    s.split([',', ' '])
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<u64>().map_err(|e| format!("{t}: {e}")))
        .collect()
}

/// Builds maps (explicit primes, or the window 100..400) and enumerates
/// the image exactly.
pub fn construct_json(expr: &str, primes: &str, seed: u64) -> Result<Value, String> {
    let e = parse(expr).map_err(|e| e.to_string())?;
    let ps = parse_list(primes)?;
    let cfg = ConstructConfig {
        primes: (!ps.is_empty()).then_some(ps),
        window: (100, 400),
        seed,
        budget: BUDGET,
        ..Default::default()
    };
    let c = construct(&e, &cfg).map_err(|e| e.to_string())?;
    let rep = image_exhaustive(&e, &c.maps, Some(&c.certificate), BUDGET).map_err(|e| e.to_string())?;
    Ok(json!({
        "handler": c.details.get("handler"),
        "primes": c.maps.primes(),
        "q": c.maps.modulus.q().to_string(),
        "certificate": c.certificate.kind_name(),
        "claimed_size": c.certificate.claimed_size.to_string(),
        "image_size": rep.image_size,
        "points": rep.points,
        "violations": rep.violations,
        "pass": rep.pass,
    }))
}

fn listed(s: &ZSet) -> Value {
    let v = s.to_vec();
    json!({ "size": s.len(), "elements": &v[..v.len().min(LIST_MAX)], "truncated": v.len() > LIST_MAX })
}

/// A + B and A − A in Z_q, and whether A − A is all of Z_q.
pub fn sumset_json(a: &str, b: &str, q: u64) -> Result<Value, String> {
    if q == 0 || q > MAX_SUMSET_Q {
        return Err(format!("q must be in 1..={MAX_SUMSET_Q}"));
    }
    let a = ZSet::from_iter(q, parse_list(a)?.into_iter().map(|x| x % q));
    let b = ZSet::from_iter(q, parse_list(b)?.into_iter().map(|x| x % q));
    let sum = a.sumset(&b, u64::MAX).map_err(|e| e.to_string())?;
    let diff = a.sumset(&a.negated(), u64::MAX).map_err(|e| e.to_string())?;
    let covers = verify_cover(&a, u64::MAX).map_err(|e| e.to_string())?;
    Ok(json!({ "q": q, "a": a.len(), "b": b.len(), "sum": listed(&sum), "difference": listed(&diff), "covers": covers }))
}

fn out(r: Result<Value, String>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = classify)]
pub fn classify_js(expr: &str) -> Result<String, JsError> {
    out(classify_json(expr))
}

#[wasm_bindgen(js_name = construct)]
pub fn construct_js(expr: &str, primes: &str, seed: u64) -> Result<String, JsError> {
    out(construct_json(expr, primes, seed))
}

#[wasm_bindgen(js_name = sumset)]
pub fn sumset_js(a: &str, b: &str, q: u64) -> Result<String, JsError> {
    out(sumset_json(a, b, q))
}
