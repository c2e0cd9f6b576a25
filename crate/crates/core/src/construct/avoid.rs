//! Avoiding a forbidden value set, and the single-variable construction.

use super::{Construction, Details};
use crate::cert::{BlockMode, Certificate, CoordBlock};
use crate::error::{Error, Result};
use crate::expr::{q_mod, Expression};
use crate::maps::{Body, CoordTable, MapSet, Rule};
use crate::residue::{add_mod, mul_mod, pow_mod, Modulus};
use std::sync::Arc;

/// For every x, the first v = 0, 1, … with Σ_j c_j(x) v^j ∉ F. Inputs with
/// c_1(x) = … = c_d(x) = 0 get v = 0.
pub fn choose_alpha_avoiding(p: u32, coeffs: &[Vec<u32>], forbidden: &[u32]) -> Result<Vec<u32>> {
    let d = coeffs.len().saturating_sub(1);
    if d == 0 || p as usize <= d {
        return Err(Error::Precondition(format!("need 1 ≤ d < p, got d = {d}, p = {p}")));
    }
    let mut bad = vec![false; p as usize];
    for &f in forbidden {
        bad[(f % p) as usize] = true;
    }
    let nf = bad.iter().filter(|&&b| b).count();
    if nf * d >= p as usize {
        return Err(Error::Precondition(format!("|F| = {nf} is not below p/d = {p}/{d}")));
    }
    let mut out = Vec::with_capacity(p as usize);
    for x in 0..p as usize {
        if coeffs.iter().skip(1).all(|c| c[x] == 0) {
            out.push(0);
            continue;
        }
        let v = (0..p)
            .find(|&v| {
                let val = coeffs.iter().rev().fold(0, |acc, c| add_mod(mul_mod(acc, v, p), c[x], p));
                !bad[val as usize]
            })
            .expect("pigeonhole guarantees a value outside F");
        out.push(v);
    }
    Ok(out)
}

/// Smallest t with (1 − 1/(2d))^t < ε.
pub fn coordinates_needed(d: usize, epsilon: f64) -> usize {
    let r = 1.0 - 1.0 / (2.0 * d as f64);
    let mut t = 1;
    let mut v = r;
    while v >= epsilon {
        t += 1;
        v *= r;
    }
    t
}

/// Degree d in the map, the number t of primes for density ε, and the
/// bound every prime must exceed.
pub fn single_var_needs(e: &Expression, epsilon: f64) -> Result<(usize, usize, u64)> {
    let poly = e
        .single_var_poly()
        .ok_or_else(|| Error::Precondition("expression is not single-variable".into()))?;
    let d = poly.iter().rposition(|f| f.iter().any(|c| *c != num_traits::Zero::zero())).unwrap_or(0);
    if d == 0 {
        return Err(Error::Precondition("no term with a positive power of the map".into()));
    }
    let big_d = poly.iter().map(|f| f.len().saturating_sub(1)).max().unwrap_or(0);
    let min_p = (2 * d * (big_d + 1)) as u64;
    Ok((d, coordinates_needed(d, epsilon), min_p.max(e.max_coeff())))
}

/// Single-variable expression, variable 0: picks t window primes and on
/// each avoids F = {1, …, ⌈p/d⌉ − 1}, so the value 0 stays reachable.
pub fn single_var_construct(e: &Expression, epsilon: f64, window: &[u64]) -> Result<Construction> {
    let (d, t, floor) = single_var_needs(e, epsilon)?;
    let poly = e.single_var_poly().expect("checked above");
    let big_d = poly.iter().map(|f| f.len().saturating_sub(1)).max().unwrap_or(0);
    let primes: Vec<u64> = window.iter().copied().filter(|&p| p > floor).take(t).collect();
    if primes.len() < t {
        return Err(Error::WindowExhausted(format!("need {t} primes above {floor}, found {}", primes.len())));
    }
    let modulus = Arc::new(Modulus::from_u64s(&primes)?);
    let mut maps = MapSet::zero(modulus.clone(), 1);
    let mut blocks = Vec::new();
    let mut details = Details::new();
    let mut sizes = Vec::new();
    for (c, &p) in modulus.prime_values().iter().enumerate() {
        let coeffs: Vec<Vec<u32>> = poly
            .iter()
            .take(d + 1)
            .map(|f| {
                let fm: Vec<u32> = f.iter().map(|&q| q_mod(q, p)).collect::<Result<_>>()?;
                Ok((0..p).map(|x| fm.iter().enumerate().fold(0, |acc, (i, &a)| add_mod(acc, mul_mod(a, pow_mod(x, i as u64, p), p), p))).collect())
            })
            .collect::<Result<_>>()?;
        let forbidden: Vec<u32> = (1..p.div_ceil(d as u32)).collect();
        let alpha = choose_alpha_avoiding(p, &coeffs, &forbidden)?;
        let mut values: Vec<Vec<u32>> = (0..p as usize)
            .map(|x| vec![coeffs.iter().rev().fold(0, |acc, cf| add_mod(mul_mod(acc, alpha[x], p), cf[x], p))])
            .collect();
        values.sort();
        values.dedup();
        sizes.push(values.len());
        blocks.push(CoordBlock::new(vec![c], BlockMode::Allowed, values));
        maps.set(0, c, Rule::with_body(Body::Tables { tables: vec![CoordTable::new(vec![c], alpha)] }));
        details.insert(format!("forbidden_size_{p}"), forbidden.len().into());
    }
    let certificate = Certificate::per_coordinate(&modulus, blocks);
    details.insert("degree".into(), d.into());
    details.insert("x_degree".into(), big_d.into());
    details.insert("coordinates".into(), t.into());
    details.insert("coordinate_image_sizes".into(), sizes.into());
    details.insert("density_bound".into(), (1.0 - 1.0 / (2.0 * d as f64)).powi(t as i32).into());
    Ok(Construction::new(maps, certificate, details))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_cases() {
        let p = 7;
        let sq = vec![vec![0; 7], vec![0; 7], vec![1; 7]];
        assert_eq!(choose_alpha_avoiding(p, &sq, &[0]).unwrap(), vec![1; 7]);
        let lin = vec![vec![0; 11], vec![1; 11]];
        assert_eq!(choose_alpha_avoiding(11, &lin, &[0, 1, 2]).unwrap(), vec![3; 11]);
        assert!(choose_alpha_avoiding(7, &sq, &[0, 1, 2, 3]).is_err());
        assert_eq!(coordinates_needed(2, 0.5), 3);
    }
}
