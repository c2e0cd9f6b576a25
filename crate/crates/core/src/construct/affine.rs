//! Affine maps making k1·αβ + k2·(α + ν1x)(β + ν2y) + linear constant.

use super::{exact_certificate, prime_floor, ConstructConfig, Construction, Details};
use crate::error::{Error, Result};
use crate::expr::AffineBlock;
use crate::expr::{q_mod, qi, Expression, Linear, Q};
use crate::maps::{MapSet, Rule};
use crate::program::Program;
use crate::residue::Modulus;
use std::sync::Arc;
use num_traits::Zero;
use serde::Serialize;

/// α(x) = a·x + b and β(y) = c·y + d, with the constant value attained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AffineSolution {
    pub a: Q,
    pub b: Q,
    pub c: Q,
    pub d: Q,
    pub value: Q,
}

fn div(n: Q, d: Q) -> Result<Q> {
    if d.is_zero() {
        return Err(Error::Precondition("affine system is singular for this choice of c".into()));
    }
    Ok(n / d)
}

/// Solves the weighted block over Q for a free parameter c.
pub fn affine_solve_weighted(k1: Q, k2: Q, nu1: Q, nu2: Q, l1: Linear, l2: Linear, c: Q) -> Result<AffineSolution> {
    if nu1.is_zero() || nu2.is_zero() || k1.is_zero() || k2.is_zero() {
        return Err(Error::Precondition("ν1, ν2, k1, k2 must be non-zero".into()));
    }
    let den = (k1 + k2) * c + k2 * nu2;
    let a = div(-k2 * nu1 * (c + nu2), den)?;
    let b = div(-(l2.lambda * c + l2.mu), den)?;
    let d = div(-(l1.lambda * a + l1.mu), (k1 + k2) * a + k2 * nu1)?;
    let value = (k1 + k2) * b * d + l1.lambda * b + l2.lambda * d;
    Ok(AffineSolution { a, b, c, d, value })
}

/// The unweighted lemma: αβ + (α + ν1x)(β + ν2y) + λ1α + μ1x + λ2β + μ2y.
pub fn affine_solve(nu1: i64, nu2: i64, lambda1: i64, lambda2: i64, mu1: i64, mu2: i64, c: i64) -> Result<AffineSolution> {
    affine_solve_weighted(qi(1), qi(1), qi(nu1), qi(nu2), Linear::new(lambda1, mu1), Linear::new(lambda2, mu2), qi(c))
}

impl AffineSolution {
    /// The two maps as rules on a coordinate of prime p.
    pub fn rules(&self, p: u32) -> Result<(Rule, Rule)> {
        let alpha = Rule { body: crate::maps::Body::Zero, own: q_mod(self.a, p)?, constant: q_mod(self.b, p)? };
        let beta = Rule { body: crate::maps::Body::Zero, own: q_mod(self.c, p)?, constant: q_mod(self.d, p)? };
        Ok((alpha, beta))
    }
}

/// Solves a block for the first free parameter c = 0, 1, … whose
/// solution reduces modulo every prime.
pub fn solve_block(b: &AffineBlock, l1: Linear, l2: Linear, primes: &[u32]) -> Result<AffineSolution> {
    for c in 0..64 {
        let Ok(s) = affine_solve_weighted(b.k1, b.k2, b.nu1, b.nu2, l1, l2, qi(c)) else { continue };
        if primes.iter().all(|&p| s.rules(p).is_ok() && q_mod(s.value, p).is_ok()) {
            return Ok(s);
        }
    }
    Err(Error::Precondition("no free parameter c makes the affine solution reduce mod every prime".into()))
}

/// Sets the block's affine maps on every coordinate.
pub fn install_block(maps: &mut MapSet, b: &AffineBlock, s: &AffineSolution) -> Result<()> {
    for (c, p) in maps.primes().into_iter().enumerate() {
        let (ra, rb) = s.rules(p)?;
        maps.set(b.vars.0 as usize, c, ra);
        maps.set(b.vars.1 as usize, c, rb);
    }
    Ok(())
}

/// The affine case on one prime: the expression is constant.
pub fn affine_construct(e: &Expression, b: &AffineBlock, cfg: &ConstructConfig) -> Result<Construction> {
    let primes = cfg.pick_primes(1, prime_floor(e))?;
    let modulus = Arc::new(Modulus::from_u64s(&primes)?);
    let lin = |v: u8| e.linear.get(v as usize).copied().unwrap_or_default();
    let s = solve_block(b, lin(b.vars.0), lin(b.vars.1), &modulus.prime_values())?;
    let mut maps = MapSet::zero(modulus.clone(), e.num_vars());
    install_block(&mut maps, b, &s)?;
    let prog = Program::compile(e, &maps)?;
    let cert = exact_certificate(&prog, cfg.budget, 1)?
        .ok_or_else(|| Error::Violation("affine maps did not make the expression constant".into()))?;
    let mut details = Details::new();
    details.insert("solution".into(), serde_json::to_value(s).unwrap_or_default());
    Ok(Construction::new(maps, cert, details))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_cases() {
        let s = affine_solve(1, 1, 0, 0, 0, 0, 0).unwrap();
        assert_eq!((s.a, s.b, s.c, s.d, s.value), (qi(-1), qi(0), qi(0), qi(0), qi(0)));
        let s = affine_solve(1, 1, 0, 0, 1, 1, 0).unwrap();
        assert_eq!((s.a, s.b, s.c, s.d, s.value), (qi(-1), qi(-1), qi(0), qi(1), qi(-2)));
    }

    #[test]
    fn affine_case_is_constant_over_z7() {
        let e = crate::expr::parse("a(x)*b(y) + (a(x)+x)*(b(y)+y) + x + y").unwrap();
        let c = super::super::construct(&e, &ConstructConfig::with_primes(&[7])).unwrap();
        let m = c.modulus().clone();
        let mut seen = std::collections::BTreeSet::new();
        for x in 0..7 {
            for y in 0..7 {
                let pt = [crate::residue::RingElem::from_ints(m.clone(), &[x]).unwrap(), crate::residue::RingElem::from_ints(m.clone(), &[y]).unwrap()];
                seen.insert(crate::maps::evaluate(&e, &c.maps, &pt).unwrap().residues().to_vec());
            }
        }
        assert_eq!(seen.into_iter().collect::<Vec<_>>(), vec![vec![5]]);
    }

    #[test]
    fn unweighted_closed_forms() {
        // b = −(λ2c+μ2)/(2c+ν2), a = −(ν1c+ν1ν2)/(2c+ν2),
        // d = (μ1(2c+ν2) − λ1ν1(c+ν2))/(ν1ν2)
        for (n1, n2, l1, l2, m1, m2, c) in [(1, 1, 2, 3, 1, 2, 0), (2, -1, 1, 1, 3, 0, 0), (1, 3, 2, 1, 1, 1, 0), (1, 1, 2, 3, 1, 2, 1), (2, 3, 1, 0, 1, 0, 2)] {
            let s = affine_solve(n1, n2, l1, l2, m1, m2, c).unwrap();
            let (n1, n2, l1, l2, m1, m2, c) = (qi(n1), qi(n2), qi(l1), qi(l2), qi(m1), qi(m2), qi(c));
            assert_eq!(s.b, -(l2 * c + m2) / (qi(2) * c + n2));
            assert_eq!(s.a, -(n1 * c + n1 * n2) / (qi(2) * c + n2));
            assert_eq!(s.d, (m1 * (qi(2) * c + n2) - l1 * n1 * (c + n2)) / (n1 * n2));
        }
    }
}
