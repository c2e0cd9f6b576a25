//! Small values of polynomials over Z_p.

use crate::error::{Error, Result};
use crate::residue::{add_mod, centered_lift, mul_mod};

/// Horner evaluation of a_0 + a_1 t + … + a_d t^d.
pub fn poly_eval(coeffs: &[u32], t: u32, p: u32) -> u32 {
    coeffs.iter().rev().fold(0, |acc, &a| add_mod(mul_mod(acc, t, p), a, p))
}

/// The first t (scanning 0, 1, …) minimizing |centered(poly(t))|, with the
/// achieved centered value.
pub fn small_value_search(coeffs: &[u32], p: u32) -> Result<(u32, i64)> {
    if coeffs.iter().skip(1).all(|&a| a % p == 0) {
        return Err(Error::Precondition("polynomial has no non-constant coefficient".into()));
    }
    let mut best = (0u32, i64::MAX);
    for t in 0..p {
        let v = centered_lift(poly_eval(coeffs, t, p), p);
        if v.abs() < best.1.abs() {
            best = (t, v);
            if v == 0 {
                break;
            }
        }
    }
    Ok(best)
}

/// The lemma's scale C_d · p^(1 − 2^(−d)).
pub fn small_value_bound(d: u32, p: u32, c_d: f64) -> f64 {
    c_d * (p as f64).powf(1.0 - 0.5f64.powi(d as i32))
}

/// For a fixed value table f(t), t ∈ Z_p, returns for every shift k the
/// first t minimizing |centered(f(t) + k)| and the largest such minimum.
/// Agrees with [`small_value_search`] applied to f + k.
pub fn keyed_search(f: &[u32], p: u32) -> (Vec<u32>, i64) {
    let pu = p as usize;
    let mut first = vec![u32::MAX; pu];
    for (t, &w) in f.iter().enumerate() {
        if first[w as usize] == u32::MAX {
            first[w as usize] = t as u32;
        }
    }
    let mut out = Vec::with_capacity(pu);
    let mut worst = 0i64;
    for k in 0..p {
        // w + k ≡ ±dist, so w ≡ ±dist − k
        let mut found = None;
        for dist in 0..=(p / 2) {
            let a = first[((dist + p - k) % p) as usize];
            let b = first[((p - dist % p + p - k) % p) as usize];
            let t = a.min(b);
            if t != u32::MAX {
                found = Some((t, dist as i64));
                break;
            }
        }
        let (t, d) = found.expect("non-empty table");
        worst = worst.max(d);
        out.push(t);
    }
    (out, worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn documented_cases() {
        assert_eq!(small_value_search(&[0, 0, 1], 13).unwrap(), (0, 0));
        assert_eq!(small_value_search(&[1, 3], 7).unwrap(), (2, 0));
        assert_eq!(small_value_search(&[1, 0, 1], 11).unwrap(), (0, 1));
        assert!(small_value_search(&[3, 0, 0], 11).is_err());
    }

    proptest! {
        #[test]
        fn keyed_agrees_with_scan(a in prop::collection::vec(0u32..31, 3), k in 0u32..31) {
            let p = 31;
            prop_assume!(a[1] != 0 || a[2] != 0);
            let f: Vec<u32> = (0..p).map(|t| poly_eval(&a, t, p)).collect();
            let (table, _) = keyed_search(&f, p);
            let shifted = [add_mod(a[0], k, p), a[1], a[2]];
            let (t, _) = small_value_search(&shifted, p).unwrap();
            let at = |t: u32| centered_lift(poly_eval(&shifted, t, p), p).abs();
            prop_assert_eq!(at(table[k as usize]), at(t));
            prop_assert_eq!(table[k as usize], t);
        }
    }
}
