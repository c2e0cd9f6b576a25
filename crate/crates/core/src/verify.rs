//! Ground truth: exact images over the reduced footprint, sampled
//! certificate checks, explicit sumsets and the minimum-image experiment.

use crate::cert::Certificate;
use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::maps::{evaluate, MapSet};
use crate::program::Program;
use crate::residue::RingElem;
use crate::zset::ZSet;
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeSet;
use web_time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageMode {
    Exhaustive,
    Sampled,
}

/// A point and the value it produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub point: Vec<Vec<u32>>,
    pub value: Vec<u32>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImageReport {
    pub expression: String,
    pub mode: ImageMode,
    /// Size of the full domain Z_q^vars.
    pub domain_size: String,
    /// Points actually visited.
    pub points: u64,
    /// Exact image size (exhaustive mode only).
    pub image_size: Option<String>,
    pub claimed_size: String,
    /// Whether every image value was checked against the certificate.
    pub certificate_checked: bool,
    pub violations: u64,
    pub witness: Option<Witness>,
    pub wall_ms: f64,
    pub pass: bool,
}

fn domain(e: &Expression, maps: &MapSet) -> BigUint {
    maps.modulus.q().pow(e.num_vars() as u32)
}

/// Exact image by footprint-reduced enumeration. With a certificate, every
/// value is checked when the image has at most `budget` elements.
pub fn image_exhaustive(e: &Expression, maps: &MapSet, cert: Option<&Certificate>, budget: u64) -> Result<ImageReport> {
    let t0 = Instant::now();
    let prog = Program::compile(e, maps)?;
    let img = prog.image(budget).map_err(|err| match err {
        Error::Budget(m) => Error::Budget(format!("{m}; use sampled mode")),
        other => other,
    })?;
    let size = img.size();
    let primes = maps.primes();
    let mut violations = 0;
    let mut witness = None;
    let mut checked = false;
    if let Some(c) = cert {
        if let Some(vals) = img.values(budget) {
            checked = true;
            for v in vals {
                if !c.contains(&v, &primes) {
                    violations += 1;
                    witness.get_or_insert(Witness { point: vec![], value: v });
                }
            }
        }
    }
    let claimed = cert.map(|c| c.claimed_size.clone());
    let within = claimed.as_ref().is_none_or(|c| size <= *c);
    Ok(ImageReport {
        expression: e.to_string(),
        mode: ImageMode::Exhaustive,
        domain_size: domain(e, maps).to_string(),
        points: img.points,
        image_size: Some(size.to_string()),
        claimed_size: claimed.map(|c| c.to_string()).unwrap_or_default(),
        certificate_checked: checked,
        violations,
        witness,
        wall_ms: t0.elapsed().as_secs_f64() * 1e3,
        pass: violations == 0 && within,
    })
}

/// The image by plain enumeration of the whole domain through the direct
/// evaluator. Independent of the compiled program; used as an oracle.
pub fn full_domain_image(e: &Expression, maps: &MapSet, budget: u64) -> Result<BTreeSet<Vec<u32>>> {
    let q = maps.modulus.q_u64().ok_or_else(|| Error::Budget("modulus exceeds 64 bits".into()))?;
    let n = e.num_vars() as u32;
    let total = q.checked_pow(n).filter(|&t| t <= budget).ok_or_else(|| Error::Budget(format!("{q}^{n} points exceed {budget}")))?;
    let m = maps.modulus.clone();
    let big_q = BigUint::from(q);
    (0..total)
        .into_par_iter()
        .map(|idx| {
            let mut rest = idx;
            let point: Vec<RingElem> = (0..n)
                .map(|_| {
                    let z = BigUint::from(rest % q);
                    rest /= q;
                    m.split(&(z % &big_q))
                })
                .collect();
            evaluate(e, maps, &point).map(|v| v.into_residues())
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().collect())
}

const SAMPLE_CHUNK: u64 = 4096;

/// Uniform samples over the domain, each checked against the certificate.
/// Falsification only: zero violations proves nothing.
pub fn image_sampled(e: &Expression, maps: &MapSet, cert: &Certificate, samples: u64, seed: u64) -> Result<ImageReport> {
    let t0 = Instant::now();
    let prog = Program::compile(e, maps)?;
    let primes = maps.primes();
    let nv = e.num_vars();
    let chunks = samples.div_ceil(SAMPLE_CHUNK);
    let found: Vec<(u64, Option<Witness>)> = (0..chunks)
        .into_par_iter()
        .map(|ch| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ch.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let n = SAMPLE_CHUNK.min(samples - ch * SAMPLE_CHUNK);
            let mut bad = 0;
            let mut first = None;
            for _ in 0..n {
                let xs: Vec<Vec<u32>> = (0..nv).map(|_| primes.iter().map(|&p| rng.gen_range(0..p)).collect()).collect();
                let v = prog.eval(&xs);
                if !cert.contains(&v, &primes) {
                    bad += 1;
                    first.get_or_insert(Witness { point: xs, value: v });
                }
            }
            (bad, first)
        })
        .collect();
    let violations = found.iter().map(|f| f.0).sum();
    let witness = found.into_iter().find_map(|f| f.1);
    Ok(ImageReport {
        expression: e.to_string(),
        mode: ImageMode::Sampled,
        domain_size: domain(e, maps).to_string(),
        points: samples,
        image_size: None,
        claimed_size: cert.claimed_size.to_string(),
        certificate_checked: true,
        violations,
        witness,
        wall_ms: t0.elapsed().as_secs_f64() * 1e3,
        pass: violations == 0,
    })
}

/// A − A.
pub fn difference_set(a: &ZSet, budget: u64) -> Result<ZSet> {
    a.sumset(&a.negated(), budget)
}

/// S + A + … + A with k copies of A.
pub fn iterated_sumset(s: &ZSet, a: &ZSet, k: usize, budget: u64) -> Result<ZSet> {
    let mut cur = s.clone();
    for _ in 0..k {
        cur = cur.sumset(a, budget)?;
    }
    Ok(cur)
}

/// A·A.
pub fn product_set(a: &ZSet, budget: u64) -> Result<ZSet> {
    let n = a.modulus();
    let v = a.to_vec();
    if (v.len() as u64).saturating_mul(v.len() as u64) > budget {
        return Err(Error::Budget(format!("product set of {} elements", v.len())));
    }
    Ok(ZSet::from_iter(n, v.iter().flat_map(|&x| v.iter().map(move |&y| ((x as u128 * y as u128) % n as u128) as u64))))
}

/// lA² + kA.
pub fn l_sq_plus_k(a: &ZSet, l: usize, k: usize, budget: u64) -> Result<ZSet> {
    let zero = ZSet::from_iter(a.modulus(), [0]);
    let with_products = if l > 0 { iterated_sumset(&zero, &product_set(a, budget)?, l, budget)? } else { zero };
    iterated_sumset(&with_products, a, k, budget)
}

/// A − A = Z_n for an explicit set.
pub fn verify_cover(a: &ZSet, budget: u64) -> Result<bool> {
    Ok(difference_set(a, budget)?.is_full())
}

/// Minimum over all maps of |Im(α(x)β(y) + x + y)| on Z_p ⊕ Z_q.
#[derive(Debug, Clone, Serialize)]
pub struct MinImage {
    pub p: u64,
    pub q: u64,
    pub minimum: u32,
    pub alpha: Vec<u32>,
    pub beta: Vec<u32>,
    /// Maps α examined; for each the best β is found by dynamic programming.
    pub alphas_examined: u64,
}

/// Brute force over every α; for fixed α the best β is found exactly by a
/// dynamic program over y with the union of attained values as state.
/// Gated to pq ≤ 6.
pub fn min_image_experiment(p: u64, q: u64) -> Result<MinImage> {
    if !crate::primes::is_prime(p) || !crate::primes::is_prime(q) || p == q {
        return Err(Error::Precondition(format!("({p}, {q}) must be two distinct primes")));
    }
    let n = p * q;
    if n > 6 {
        return Err(Error::Budget(format!("pq = {n} exceeds the experiment gate of 6")));
    }
    let n_us = n as usize;
    let full = 1usize << n_us;
    let rot = |m: usize, s: usize| ((m << s) | (m >> (n_us - s))) & (full - 1);
    let alphas = (n_us as u64).pow(n as u32);
    let best = (0..alphas)
        .into_par_iter()
        .map(|code| {
            let mut c = code;
            let alpha: Vec<usize> = (0..n_us)
                .map(|_| {
                    let d = (c % n) as usize;
                    c /= n;
                    d
                })
                .collect();
            // t[b] = {α(x)·b + x}
            let t: Vec<usize> = (0..n_us).map(|b| (0..n_us).fold(0, |m, x| m | 1 << ((alpha[x] * b + x) % n_us))).collect();
            // layer[mask] = (previous mask, b) that reaches it
            let mut layers: Vec<Vec<Option<(usize, usize)>>> = Vec::with_capacity(n_us);
            let mut reach = vec![false; full];
            reach[0] = true;
            for y in 0..n_us {
                let mut layer = vec![None; full];
                for m in (0..full).filter(|&m| reach[m]) {
                    for (b, &tb) in t.iter().enumerate() {
                        let nm = m | rot(tb, y);
                        layer[nm].get_or_insert((m, b));
                    }
                }
                reach = layer.iter().map(Option::is_some).collect();
                layers.push(layer);
            }
            let m = (0..full).filter(|&m| reach[m]).min_by_key(|&m| (m.count_ones(), m)).expect("some mask");
            let mut beta = vec![0u32; n_us];
            let mut cur = m;
            for y in (0..n_us).rev() {
                let (prev, b) = layers[y][cur].expect("reached");
                beta[y] = b as u32;
                cur = prev;
            }
            (m.count_ones(), code, alpha.iter().map(|&a| a as u32).collect::<Vec<_>>(), beta)
        })
        .min_by_key(|r| (r.0, r.1))
        .expect("at least one map");
    Ok(MinImage { p, q, minimum: best.0, alpha: best.2, beta: best.3, alphas_examined: alphas })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_sets() {
        let a = ZSet::from_iter(5, [0, 1]);
        assert_eq!(difference_set(&a, u64::MAX).unwrap().to_vec(), vec![0, 1, 4]);
        assert_eq!(iterated_sumset(&a, &a, 1, u64::MAX).unwrap().to_vec(), vec![0, 1, 2]);
        assert_eq!(product_set(&ZSet::from_iter(7, [1, 2]), u64::MAX).unwrap().to_vec(), vec![1, 2, 4]);
        assert!(verify_cover(&ZSet::full(5), u64::MAX).unwrap());
        assert!(!verify_cover(&ZSet::from_iter(5, [0]), u64::MAX).unwrap());
        let full = ZSet::full(11);
        assert!(l_sq_plus_k(&full, 1, 2, u64::MAX).unwrap().is_full());
    }

    #[test]
    fn experiment_is_gated() {
        assert!(min_image_experiment(2, 5).is_err());
        assert!(min_image_experiment(2, 2).is_err());
        assert!(min_image_experiment(2, 4).is_err());
    }
}
