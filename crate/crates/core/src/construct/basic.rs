//! Basic identification of coordinates on two primes p ≤ q.

use super::affine::{install_block, solve_block};
use super::{exact_certificate, prime_floor, ConstructConfig, Construction, Details};
use crate::cert::Certificate;
use crate::error::{Error, Result};
use crate::expr::AffineBlock;
use crate::expr::{q_mod, qi, Atom, Expression, Linear, Term, Q};
use crate::maps::{Body, LiftTerm, MapSet, Rule};
use crate::program::Program;
use crate::residue::{inv_mod, Modulus};
use num_traits::{ToPrimitive, Zero};
use std::sync::Arc;

/// λ0·αβ + λ1α + μ1x + λ2β + μ2y on the primes (p, q).
pub fn basic_ident(l0: i64, l1: i64, m1: i64, l2: i64, m2: i64, p: u64, q: u64, cfg: &ConstructConfig) -> Result<Construction> {
    if (l1 == 0 && m1 != 0) || (l2 == 0 && m2 != 0) {
        return Err(Error::Precondition("λ_i = 0 requires μ_i = 0".into()));
    }
    let lin = [Linear::new(l1, m1), Linear::new(l2, m2)];
    let terms = if l0 == 0 { vec![] } else { vec![Term::new(l0, vec![Atom::new(0, 0), Atom::new(1, 0)])] };
    let e = Expression::new(terms, lin.to_vec());
    let floor = prime_floor(&e);
    if p.min(q) <= floor {
        return Err(Error::PrimeTooSmall { prime: p.min(q) as u32, coeff: floor });
    }
    let primes = [p.min(q), p.max(q)];
    if l0 == 0 {
        // each linear part vanishes on its own
        let modulus = Arc::new(Modulus::from_u64s(&primes)?);
        let mut maps = MapSet::zero(modulus.clone(), 2);
        for (v, l) in lin.iter().enumerate() {
            if l.lambda.is_zero() {
                continue;
            }
            for (c, p) in modulus.prime_values().into_iter().enumerate() {
                maps.set(v, c, Rule::affine_q(-l.mu / l.lambda, qi(0), p)?);
            }
        }
        let prog = Program::compile(&e, &maps)?;
        let cert = exact_certificate(&prog, cfg.budget, 1)?.ok_or_else(|| Error::Violation("linear part not cancelled".into()))?;
        let mut details = Details::new();
        details.insert("branch".into(), "no_product".into());
        return Ok(Construction::new(maps, cert, details));
    }
    let l0q = qi(l0);
    let scaled = [Linear { lambda: lin[0].lambda / l0q, mu: lin[0].mu / l0q }, Linear { lambda: lin[1].lambda / l0q, mu: lin[1].mu / l0q }];
    let mut norm = e.clone();
    norm.terms[0].coeff = qi(1);
    norm.linear = scaled.to_vec();
    let mut out = basic_core(&norm, &scaled, None, &primes, cfg)?;
    let ps = out.maps.primes();
    out.certificate = out.certificate.unscaled(l0q.recip(), &ps)?;
    Ok(out)
}

/// Handler for the classified case: αβ + linear on variables 0 and 1,
/// plus an optional block on variables 2 and 3 made constant.
pub fn basic_construct(e: &Expression, lin: &[Linear; 2], blk: Option<&AffineBlock>, cfg: &ConstructConfig) -> Result<Construction> {
    let primes = cfg.pick_primes(2, prime_floor(e))?;
    basic_core(e, lin, blk, &primes, cfg)
}

fn basic_core(e: &Expression, lin: &[Linear; 2], blk: Option<&AffineBlock>, primes: &[u64], cfg: &ConstructConfig) -> Result<Construction> {
    let modulus = Arc::new(Modulus::from_u64s(primes)?);
    let ps = modulus.prime_values();
    let (p, q) = (ps[0], ps[1]);
    let [Linear { lambda: l1, mu: m1 }, Linear { lambda: l2, mu: m2 }] = *lin;
    let mut maps = MapSet::zero(modulus.clone(), e.num_vars().max(2));
    // αβ + λ1α + μ1x + λ2β + μ2y = (α + λ2)(β + λ1) − λ1λ2 + μ1x + μ2y
    let branch = if m1.is_zero() {
        for (c, &pc) in ps.iter().enumerate() {
            maps.set(0, c, Rule::affine_q(qi(0), qi(1) - l2, pc)?);
            maps.set(1, c, Rule::affine_q(-m2, l1 * l2 - l1, pc)?);
        }
        "mu1_zero"
    } else if m2.is_zero() {
        for (c, &pc) in ps.iter().enumerate() {
            maps.set(0, c, Rule::affine_q(-m1, l1 * l2 - l2, pc)?);
            maps.set(1, c, Rule::affine_q(qi(0), qi(1) - l1, pc)?);
        }
        "mu2_zero"
    } else {
        if l1.is_zero() || l2.is_zero() {
            return Err(Error::Precondition("λ_i = 0 requires μ_i = 0".into()));
        }
        // β on p: −λ2⁻¹(μ1·mod_{q,p}(y_q) + μ2·y_p); α on q symmetric
        let w = |a: Q, l: Q, pc: u32| q_mod(-a / l, pc);
        let beta_p = Rule { body: Body::Lifts { terms: vec![LiftTerm { coord: 1, weight: w(m1, l2, p)?, div: 1 }] }, own: w(m2, l2, p)?, constant: 0 };
        let alpha_q = Rule { body: Body::Lifts { terms: vec![LiftTerm { coord: 0, weight: w(m2, l1, q)?, div: 1 }] }, own: w(m1, l1, q)?, constant: 0 };
        maps.set(1, 0, beta_p);
        maps.set(0, 1, alpha_q);
        "identification"
    };
    if let Some(b) = blk {
        let l = |v: u8| e.linear.get(v as usize).copied().unwrap_or_default();
        let s = solve_block(b, l(b.vars.0), l(b.vars.1), &ps)?;
        install_block(&mut maps, b, &s)?;
    }
    let prog = Program::compile(e, &maps)?;
    let mut details = Details::new();
    details.insert("branch".into(), branch.into());
    if branch != "identification" {
        let cert = exact_certificate(&prog, cfg.budget, 1)?.ok_or_else(|| Error::Violation("degenerate branch not constant".into()))?;
        return Ok(Construction::new(maps, cert, details));
    }
    let scale = vec![inv_mod(q_mod(m1, p)?, p).ok_or(Error::NotInvertible(0))?, inv_mod(q_mod(m2, q)?, q).ok_or(Error::NotInvertible(1))?];
    let (cert, fs) = prog.functional_certificate(1, scale, vec![0, 0], cfg.budget)?;
    let bound = cfg.k_const * q as f64;
    details.insert("allowed_size".into(), fs.allowed.len().into());
    details.insert("claimed_size".into(), cert.claimed_size.to_string().into());
    details.insert("bound_kq".into(), bound.into());
    details.insert("within_bound".into(), (cert.claimed_size.to_f64().unwrap_or(f64::INFINITY) <= bound).into());
    details.insert("carries".into(), serde_json::to_value(&fs.carries).unwrap_or_default());
    Ok(Construction::new(maps, cert, details))
}

/// Is the claimed size at most K·q for the larger prime q?
pub fn within_kq(c: &Certificate, q: u64, k: f64) -> bool {
    c.claimed_size.to_f64().is_some_and(|s| s <= k * q as f64)
}
