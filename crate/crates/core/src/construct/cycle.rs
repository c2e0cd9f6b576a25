//! The 3-cycle cases: closed form, the degenerate three-prime construction,
//! and the five-prime construction.

use super::ident::{identify, outcome_details};
use super::{exact_certificate, prime_floor, ConstructConfig, Construction, Details};
use crate::error::{Error, Result};
use crate::expr::CycleCoeffs;
use crate::expr::{q_mod, qi, Expression, Q};
use crate::maps::{Body, LiftTerm, MapSet, Rule};
use crate::program::Program;
use crate::residue::{project_i128, Modulus};
use num_traits::Zero;
use std::collections::BTreeSet;
use std::sync::Arc;

fn ratio(n: Q, d: Q) -> Result<Q> {
    if d.is_zero() {
        return Err(Error::Precondition("cycle coefficients admit a further factorization".into()));
    }
    Ok(n / d)
}

/// The constants d1, d2, d3 making the closed-form cycle constant.
pub fn closed_form_constants(cc: &CycleCoeffs) -> Result<[Q; 3]> {
    let [c1, c2, c3, c4, c5, c6] = cc.c;
    let [l1, l2, l3] = cc.lin;
    Ok([
        ratio(l2.mu - c3 * l2.lambda, c3 - c2)?,
        ratio(l3.mu - c5 * l3.lambda, c5 - c4)?,
        ratio(l1.mu - c1 * l1.lambda, c1 - c6)?,
    ])
}

/// α = −c1x + d1, β = −c3y + d2, γ = −c5z + d3 on every coordinate.
pub fn closed_form_maps(cc: &CycleCoeffs, modulus: Arc<Modulus>) -> Result<MapSet> {
    let d = closed_form_constants(cc)?;
    let own = [cc.c[0], cc.c[2], cc.c[4]];
    let mut maps = MapSet::zero(modulus.clone(), 3);
    for (c, p) in modulus.prime_values().into_iter().enumerate() {
        for v in 0..3 {
            maps.set(v, c, Rule::affine_q(-own[v], d[v], p)?);
        }
    }
    Ok(maps)
}

pub fn closed_construct(e: &Expression, cc: &CycleCoeffs, cfg: &ConstructConfig) -> Result<Construction> {
    let primes = cfg.pick_primes(1, prime_floor(e))?;
    let maps = closed_form_maps(cc, Arc::new(Modulus::from_u64s(&primes)?))?;
    let prog = Program::compile(e, &maps)?;
    let cert = exact_certificate(&prog, cfg.budget, 1)?.ok_or_else(|| Error::Violation("closed form is not constant".into()))?;
    let mut d = Details::new();
    d.insert("constants".into(), serde_json::to_value(closed_form_constants(cc)?).unwrap_or_default());
    Ok(Construction::new(maps, cert, d))
}

/// The fixed maps shared by the degenerate and five-prime constructions on
/// the first three coordinates; γ1, β2, α3 stay free.
fn first_three(maps: &mut MapSet, cc: &CycleCoeffs) -> Result<()> {
    let ps = maps.primes();
    let [c1, c2, c3, c4, c5, _] = cc.c;
    let [l1, l2, l3] = cc.lin.map(|l| l.lambda);
    let one = qi(1);
    maps.set(0, 0, Rule::affine_q(-c1, qi(0), ps[0])?);
    maps.set(1, 0, Rule::affine_q(-c3, one - l3, ps[0])?);
    maps.set(0, 1, Rule::affine_q(-c1, qi(0), ps[1])?);
    maps.set(2, 1, Rule::affine_q(-c4, one - l2, ps[1])?);
    maps.set(1, 2, Rule::affine_q(-c2, one - l1, ps[2])?);
    maps.set(2, 2, Rule::affine_q(-c5, qi(0), ps[2])?);
    Ok(())
}

const FREE: [(usize, usize); 3] = [(2, 0), (1, 1), (0, 2)];

/// c1 = c6 and (c3 − c2)(c4 − c5) = 0, on three primes p1 < p2 < p3 < 2p1.
pub fn degenerate(e: &Expression, cc: &CycleCoeffs, cfg: &ConstructConfig) -> Result<Construction> {
    let [_, c2, c3, c4, c5, _] = cc.c;
    if !((c3 - c2) * (c4 - c5)).is_zero() {
        return Err(Error::Precondition("(c3 − c2)(c4 − c5) ≠ 0 needs the five-prime construction".into()));
    }
    let primes = cfg.pick_primes(3, prime_floor(e))?;
    let mut maps = MapSet::zero(Arc::new(Modulus::from_u64s(&primes)?), 3);
    first_three(&mut maps, cc)?;
    let o = identify(e, maps, &FREE, 0, &[1, 1, 1], cfg.budget)?;
    let d = outcome_details(&o, cfg.c_d);
    Ok(Construction::new(o.maps, o.certificate, d))
}

/// ⌊√n⌋.
pub fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// ȳ = u·M + u′ with 0 ≤ u′ < M.
pub fn division_step(y: u64, m: u64) -> (u64, u64) {
    (y / m, y % m)
}

/// Measured constants of the five-prime bookkeeping over all (ȳ3, z̄3).
#[derive(Debug, Clone, serde::Serialize)]
pub struct FivePrimeStats {
    pub m: u64,
    /// max |t − uv| with t = ⌈ȳz̄/p4⌉.
    pub max_t_minus_uv: u64,
    /// max t′ = ⌈uv(p4 − p3)/p5⌉.
    pub max_t_prime: u64,
    /// |S1| for the measured ranges of a and b.
    pub s1_size: usize,
}

/// Exhaustive measurement of |t − uv| and t′ over [0, p3)², and S1.
pub fn five_prime_stats(p3: u64, p4: u64, p5: u64) -> FivePrimeStats {
    let m = isqrt(p4);
    let (mut ea, mut eb) = (0u64, 0u64);
    for y in 0..p3 {
        let (u, _) = division_step(y, m);
        for z in 0..p3 {
            let (v, _) = division_step(z, m);
            let t = (y * z).div_ceil(p4);
            ea = ea.max(t.abs_diff(u * v));
            eb = eb.max((u * v * (p4 - p3)).div_ceil(p5));
        }
    }
    let s1 = s1_set(p3, p4, p5, ea, eb);
    FivePrimeStats { m, max_t_minus_uv: ea, max_t_prime: eb, s1_size: s1.len() }
}

/// S1 = {π_{p3}(a(p4 − p3) + p5·b) : |a| ≤ amax, |b| ≤ bmax}.
pub fn s1_set(p3: u64, p4: u64, p5: u64, amax: u64, bmax: u64) -> BTreeSet<u32> {
    let (amax, bmax) = (amax as i128, bmax as i128);
    let mut out = BTreeSet::new();
    for a in -amax..=amax {
        for b in -bmax..=bmax {
            out.insert(project_i128(a * (p4 - p3) as i128 + p5 as i128 * b, p3 as u32));
        }
    }
    out
}

/// c1 = c6 and (c3 − c2)(c4 − c5) ≠ 0, on five primes in one dyadic range.
/// Coordinates four and five absorb the y3·z3 term; the certificate is on
/// the functional Σ_i mod_{p_i,p3}(E_i).
pub fn five_prime(e: &Expression, cc: &CycleCoeffs, cfg: &ConstructConfig) -> Result<Construction> {
    let [c1, c2, c3, c4, c5, _] = cc.c;
    let k = (c3 - c2) * (c4 - c5);
    if k.is_zero() {
        return Err(Error::Precondition("(c3 − c2)(c4 − c5) = 0 needs the degenerate construction".into()));
    }
    let primes = cfg.pick_primes(5, prime_floor(e))?;
    let modulus = Arc::new(Modulus::from_u64s(&primes)?);
    let ps = modulus.prime_values();
    let mut maps = MapSet::zero(modulus.clone(), 3);
    first_three(&mut maps, cc)?;
    let (p3, p4, p5) = (primes[2], primes[3], primes[4]);
    let m = isqrt(p4) as u32;
    for c in [3, 4] {
        maps.set(0, c, Rule::affine_q(-c1, qi(0), ps[c])?);
    }
    let lift = |coord, weight, div| Body::Lifts { terms: vec![LiftTerm { coord, weight, div }] };
    maps.set(1, 3, Rule { body: lift(2, q_mod(c2 - c3, ps[3])?, 1), own: q_mod(-c3, ps[3])?, constant: 0 });
    maps.set(2, 3, Rule { body: lift(2, q_mod(c4 - c5, ps[3])?, 1), own: q_mod(-c4, ps[3])?, constant: 0 });
    maps.set(1, 4, Rule { body: lift(2, ps[4] - 1, m), own: q_mod(-c3, ps[4])?, constant: 0 });
    let w = q_mod(k * qi((p4 - p3) as i64), ps[4])?;
    maps.set(2, 4, Rule { body: lift(2, w, m), own: q_mod(-c4, ps[4])?, constant: 0 });
    let o = identify(e, maps, &FREE, 2, &[1; 5], cfg.budget)?;
    let mut d = outcome_details(&o, cfg.c_d);
    let st = five_prime_stats(p3, p4, p5);
    d.insert("sqrt_p4".into(), (p4 as f64).sqrt().into());
    d.insert("five_prime".into(), serde_json::to_value(&st).unwrap_or_default());
    Ok(Construction::new(o.maps, o.certificate, d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn division_and_root() {
        assert_eq!(isqrt(29), 5);
        assert_eq!(division_step(22, 5), (4, 2));
        assert_eq!(isqrt(25), 5);
        assert_eq!(isqrt(24), 4);
    }

    #[test]
    fn approximation_error_is_order_sqrt() {
        let st = five_prime_stats(23, 29, 31);
        assert!((st.max_t_minus_uv as f64) <= 3.0 * 29f64.sqrt());
        assert!(st.s1_size <= 23);
    }
}
