//! Identification of coordinates: affine maps cancel mixed terms along the
//! quadratic graph, then each variable's diagonal map is chosen per input so
//! that its contribution to its own coordinate is small.

use super::small::{keyed_search, small_value_bound};
use super::{prime_floor, ConstructConfig, Construction, Details};
use crate::cert::Certificate;
use crate::error::{Error, Result};
use crate::expr::{q_mod, Expression};
use crate::maps::{Body, MapSet, Rule};
use crate::program::{FunctionalSet, Program};
use crate::residue::{add_mod, mul_mod, Modulus};
use serde::Serialize;
use std::collections::VecDeque;
use std::sync::Arc;

/// One diagonal map α_{var,coord} and how small it made the coordinate.
#[derive(Debug, Clone, Serialize)]
pub struct Diagonal {
    pub var: usize,
    pub coord: usize,
    /// Degree in the free map, 0 when the coordinate does not depend on it.
    pub degree: usize,
    /// Largest |centered value| over all inputs and keys.
    pub worst: i64,
    /// Rows whose pieces of this variable feed the key.
    pub key_rows: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct IdentOutcome {
    pub maps: MapSet,
    pub certificate: Certificate,
    pub functional: FunctionalSet,
    pub diagonals: Vec<Diagonal>,
}

/// Values of the terms of `var` in row `coord` when α_var = t, indexed
/// [x · p + t]. Every other factor must already be constant there.
fn diagonal_values(e: &Expression, maps: &MapSet, var: usize, coord: usize) -> Result<(Vec<u32>, usize)> {
    let p = maps.primes()[coord];
    let mut prods: Vec<(u32, Vec<u32>)> = Vec::new();
    for t in &e.terms {
        if !t.factors.iter().any(|a| a.var as usize == var) {
            continue;
        }
        let mut coeff = q_mod(t.coeff, p)?;
        let mut shifts = Vec::new();
        for a in &t.factors {
            let s = q_mod(a.shift, p)?;
            if a.var as usize == var {
                shifts.push(s);
                continue;
            }
            let r = maps.rule(a.var as usize, coord);
            if !r.is_affine() || add_mod(r.own, s, p) != 0 {
                return Err(Error::Precondition(format!(
                    "variable {} is not constant on coordinate {coord}, where variable {var} is free",
                    a.var
                )));
            }
            coeff = mul_mod(coeff, r.constant, p);
        }
        if coeff != 0 {
            prods.push((coeff, shifts));
        }
    }
    let l = e.linear.get(var).copied().unwrap_or_default();
    let (lam, mu) = (q_mod(l.lambda, p)?, q_mod(l.mu, p)?);
    let degree = prods.iter().map(|(_, s)| s.len()).max().unwrap_or(0).max(usize::from(lam != 0));
    let pu = p as usize;
    let mut out = vec![0u32; pu * pu];
    for x in 0..p {
        for t in 0..p {
            let mut acc = add_mod(mul_mod(lam, t, p), mul_mod(mu, x, p), p);
            for (c, shifts) in &prods {
                let v = shifts.iter().fold(*c, |v, &s| mul_mod(v, add_mod(t, mul_mod(s, x, p), p), p));
                acc = add_mod(acc, v, p);
            }
            out[x as usize * pu + t as usize] = acc;
        }
    }
    Ok((out, degree))
}

/// Chooses the listed diagonal maps in order, each against the final maps
/// of its variable on the other coordinates, then certifies the functional
/// Σ_c mod_{p_c,p*}(scale_c·v_c) on the star coordinate.
pub fn identify(e: &Expression, mut maps: MapSet, diagonals: &[(usize, usize)], star: usize, scale: &[u32], budget: u64) -> Result<IdentOutcome> {
    let primes = maps.primes();
    let mut reports = Vec::new();
    for &(v, c) in diagonals {
        let pc = primes[c];
        let (vals, degree) = diagonal_values(e, &maps, v, c)?;
        if degree == 0 {
            reports.push(Diagonal { var: v, coord: c, degree, worst: 0, key_rows: vec![] });
            continue;
        }
        let prog = Program::compile(e, &maps)?;
        let mut key = Vec::new();
        let mut key_rows = Vec::new();
        for j in (0..primes.len()).filter(|&j| j != c) {
            if let Some(i) = prog.single_piece(j, v) {
                let (pj, sj) = (primes[j], scale[j]);
                key.push(prog.tabulate_piece(j, i, |w| mul_mod(w, sj, pj) % pc));
                key_rows.push(j);
            }
        }
        let pu = pc as usize;
        let mut table = Vec::with_capacity(pu * pu);
        let mut worst = 0;
        for x in 0..pu {
            let f: Vec<u32> = vals[x * pu..(x + 1) * pu].iter().map(|&w| mul_mod(w, scale[c], pc)).collect();
            let (tab, w) = keyed_search(&f, pc);
            worst = worst.max(w);
            table.extend(tab);
        }
        maps.set(v, c, Rule::with_body(Body::Keyed { key, table: Arc::new(table) }));
        reports.push(Diagonal { var: v, coord: c, degree, worst, key_rows });
    }
    let prog = Program::compile(e, &maps)?;
    let (certificate, functional) = prog.functional_certificate(star, scale.to_vec(), vec![0; primes.len()], budget)?;
    Ok(IdentOutcome { maps, certificate, functional, diagonals: reports })
}

/// Measurements shared by every identification-based handler.
pub fn outcome_details(o: &IdentOutcome, c_d: f64) -> Details {
    let primes = o.maps.primes();
    let mut d = Details::new();
    let diag: Vec<serde_json::Value> = o
        .diagonals
        .iter()
        .map(|g| {
            let bound = small_value_bound(g.degree as u32, primes[g.coord], c_d);
            serde_json::json!({
                "var": g.var, "coord": g.coord, "degree": g.degree, "worst": g.worst,
                "bound": bound, "within_bound": g.degree == 0 || (g.worst as f64) <= bound,
                "key_rows": g.key_rows,
            })
        })
        .collect();
    d.insert("diagonals".into(), diag.into());
    d.insert("star_prime".into(), primes[o.functional.star].into());
    d.insert("allowed_size".into(), o.functional.allowed.len().into());
    d.insert("blocks".into(), serde_json::to_value(&o.functional.blocks).unwrap_or_default());
    d.insert("carries".into(), serde_json::to_value(&o.functional.carries).unwrap_or_default());
    d.insert("claimed_size".into(), o.certificate.claimed_size.to_string().into());
    d
}

/// Mixed degree-two terms as (u, w, shift of u, shift of w).
fn edges(e: &Expression) -> Vec<(usize, usize, crate::expr::Q, crate::expr::Q)> {
    e.terms
        .iter()
        .filter(|t| t.is_mixed())
        .map(|t| (t.factors[0].var as usize, t.factors[1].var as usize, t.factors[0].shift, t.factors[1].shift))
        .collect()
}

/// Affine cancellation maps on coordinate `c`: a traversal of the graph
/// from c (and from the first vertex of every other component), setting
/// α_{w,c} = −b·x_{w,c} when the edge to w carries the factor (α_w + b x_w).
pub fn cancellation_maps(e: &Expression, maps: &mut MapSet, c: usize) -> Result<()> {
    let n = e.num_vars();
    let p = maps.primes()[c];
    let es = edges(e);
    let mut seen = vec![false; n];
    let mut used = vec![false; es.len()];
    let roots = std::iter::once(c).chain((0..n).filter(|&r| r != c));
    for r in roots {
        if seen[r] {
            continue;
        }
        seen[r] = true;
        let mut queue = VecDeque::from([r]);
        while let Some(u) = queue.pop_front() {
            for (k, &(a, b, sa, sb)) in es.iter().enumerate() {
                if used[k] || (a != u && b != u) {
                    continue;
                }
                used[k] = true;
                let (w, sw) = if a == u { (b, sb) } else { (a, sa) };
                if seen[w] {
                    return Err(Error::Precondition("quadratic graph has a cycle".into()));
                }
                seen[w] = true;
                maps.set(w, c, Rule::affine_q(-sw, crate::expr::qi(0), p)?);
                queue.push_back(w);
            }
        }
    }
    Ok(())
}

/// Acyclic quadratic graph: one prime per variable, variable v free on
/// coordinate v, star on the smallest prime.
pub fn acyclic_ident(e: &Expression, cfg: &ConstructConfig) -> Result<Construction> {
    let n = e.num_vars();
    let primes = cfg.pick_primes(n, prime_floor(e))?;
    acyclic_on(e, &primes, cfg)
}

/// [`acyclic_ident`] on given primes.
pub fn acyclic_on(e: &Expression, primes: &[u64], cfg: &ConstructConfig) -> Result<Construction> {
    let n = e.num_vars();
    if primes.len() != n {
        return Err(Error::Precondition(format!("{n} variables need {n} primes, {} given", primes.len())));
    }
    let modulus = Arc::new(Modulus::from_u64s(primes)?);
    let mut maps = MapSet::zero(modulus.clone(), n);
    for c in 0..n {
        cancellation_maps(e, &mut maps, c)?;
    }
    let ps = modulus.prime_values();
    let star = (0..n).min_by_key(|&c| ps[c]).unwrap_or(0);
    let diagonals: Vec<(usize, usize)> = (0..n).map(|c| (c, c)).collect();
    let o = identify(e, maps, &diagonals, star, &vec![1; n], cfg.budget)?;
    let mut d = outcome_details(&o, cfg.c_d);
    let (lo, hi) = (ps.iter().min().copied().unwrap_or(0), ps.iter().max().copied().unwrap_or(0));
    d.insert("dyadic".into(), (hi < 2 * lo).into());
    Ok(Construction::new(o.maps, o.certificate, d))
}

/// No mixed terms: one prime, every variable free on it, and the image is
/// the sumset of the per-variable small value sets.
pub fn split_single_vars(e: &Expression, cfg: &ConstructConfig) -> Result<Construction> {
    if e.terms.iter().any(|t| t.is_mixed()) {
        return Err(Error::Precondition("expression has a mixed term".into()));
    }
    let primes = cfg.pick_primes(1, prime_floor(e))?;
    let modulus = Arc::new(Modulus::from_u64s(&primes)?);
    let n = e.num_vars();
    let maps = MapSet::zero(modulus, n);
    let diagonals: Vec<(usize, usize)> = (0..n).map(|v| (v, 0)).collect();
    let o = identify(e, maps, &diagonals, 0, &[1], cfg.budget)?;
    let mut d = outcome_details(&o, cfg.c_d);
    let values: Vec<Vec<u32>> = o.functional.allowed.iter().map(|&a| vec![a]).collect();
    d.insert("image_size".into(), values.len().into());
    Ok(Construction::new(o.maps, Certificate::exact(values), d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::construct;
    use crate::expr::CaseTag;
    use crate::expr::parse;
    use crate::residue::{centered_lift, RingElem};

    fn image_1d(e: &Expression, c: &Construction) -> Vec<u32> {
        let m = c.modulus().clone();
        let p = m.prime(0) as i64;
        let n = e.num_vars();
        let mut out = std::collections::BTreeSet::new();
        let mut idx = vec![0i64; n];
        loop {
            let pt: Vec<RingElem> = idx.iter().map(|&x| RingElem::from_ints(m.clone(), &[x]).unwrap()).collect();
            out.insert(crate::maps::evaluate(e, &c.maps, &pt).unwrap().residues()[0]);
            let mut k = 0;
            while k < n {
                idx[k] += 1;
                if idx[k] < p {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == n {
                break;
            }
        }
        out.into_iter().collect()
    }

    #[test]
    fn split_blocks_are_small() {
        let e = parse("a(x)^2 + x + b(y)^2 + y").unwrap();
        let c = construct(&e, &ConstructConfig::with_primes(&[499])).unwrap();
        assert_eq!(c.tag, Some(CaseTag::SplitSingleVars));
        let img = image_1d(&e, &c);
        let n = small_value_bound(2, 499, 4.0);
        assert!(img.iter().all(|&v| (centered_lift(v, 499).abs() as f64) <= 2.0 * n));
        assert!(img.len() as f64 <= 4.0 * n + 1.0);
        for v in &img {
            assert!(c.certificate.contains(&[*v], &[499]));
        }
    }

    #[test]
    fn linear_blocks_hit_zero() {
        let e = parse("a(x)*(a(x)+x) + a(x) + b(y)*b(y) + 2*b(y) + y").unwrap();
        let c = construct(&e, &ConstructConfig::with_primes(&[11])).unwrap();
        assert_eq!(c.tag, Some(CaseTag::SplitSingleVars));
        assert!(c.certificate.claimed_size <= num_bigint::BigUint::from(11u32));
    }

    #[test]
    fn product_without_linear_part_vanishes() {
        let e = parse("a(x)*b(y) + (c(z)+z)*c(z) + d(w)^2").unwrap();
        let c = construct(&e, &ConstructConfig::with_primes(&[11, 13, 17, 19])).unwrap();
        assert_eq!(c.tag, Some(CaseTag::AcyclicIdent));
    }
}
