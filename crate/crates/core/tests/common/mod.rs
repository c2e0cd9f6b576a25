#![allow(dead_code)]

use diffcover::residue::{lift, mod_between, project};

/// Primes up to n by trial division, independent of the library sieve.
pub fn small_primes(n: u32) -> Vec<u32> {
    (2..=n).filter(|&m| (2..m).take_while(|d| d * d <= m).all(|d| m % d != 0)).collect()
}

/// Counts checks and failures of the four carry identities for every
/// prime (pair, triple) up to `pmax`, exhaustive over the residues.
pub fn carry_identities(pmax: u32) -> (u64, u64) {
    let ps = small_primes(pmax);
    let (mut checked, mut failed) = (0u64, 0u64);
    let mut check = |ok: bool| {
        checked += 1;
        failed += !ok as u64;
    };
    for &p in &ps {
        // (1) over a window of integers of both signs
        for z in -3 * p as i64..3 * p as i64 {
            let back = lift(project(z, p));
            check((back - z) % p as i64 == 0 && (z < 0 || back <= z));
        }
        // (2)
        for x in 0..p {
            for y in 0..p {
                let v = lift(x) + lift(y) - lift((x + y) % p);
                check(v == 0 || v == p as i64);
            }
        }
    }
    for &p in &ps {
        for &pp in &ps {
            // (3)
            let carry = p % pp;
            for x in 0..p {
                for y in 0..p {
                    let v = (mod_between(x, pp) + mod_between(y, pp) + pp - mod_between((x + y) % p, pp)) % pp;
                    check(v == 0 || v == carry);
                }
            }
        }
    }
    for &p1 in &ps {
        for &p2 in &ps {
            for &p3 in &ps {
                // (4) with t = ⌈p3/p2⌉, so p3 < (t + 1)p2
                let t = p3.div_ceil(p2) as i64;
                let step = (p2 % p1) as i64;
                let allowed: Vec<u32> = (0..=t).map(|j| project(-j * step, p1)).collect();
                for x in 0..p3 {
                    let v = project(mod_between(mod_between(x, p2), p1) as i64 - mod_between(x, p1) as i64, p1);
                    check(allowed.contains(&v));
                }
            }
        }
    }
    (checked, failed)
}

use diffcover::expr::Expression;
use diffcover::maps::{Body, CoordTable, LiftTerm, MapSet, Rule};
use diffcover::residue::Modulus;
use rand::Rng;
use std::collections::BTreeSet;
use std::sync::Arc;

/// Random rules of every body kind, each reading coordinates of its own
/// variable only.
pub fn random_maps(rng: &mut impl Rng, modulus: Arc<Modulus>, nvars: usize) -> MapSet {
    let primes = modulus.prime_values();
    let n = primes.len();
    let mut maps = MapSet::zero(modulus, nvars);
    for v in 0..nvars {
        for c in 0..n {
            let p = primes[c];
            let body = match rng.gen_range(0..4) {
                0 => Body::Zero,
                1 => Body::Lifts {
                    terms: (0..rng.gen_range(1..3))
                        .map(|_| LiftTerm { coord: rng.gen_range(0..n), weight: rng.gen_range(0..p), div: rng.gen_range(1..4) })
                        .collect(),
                },
                2 => {
                    let coords: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
                    let t = CoordTable::tabulate(coords, &primes, |_| rng.gen_range(0..p));
                    Body::Tables { tables: vec![t] }
                }
                _ => {
                    let others: Vec<usize> = (0..n).filter(|&o| o != c).collect();
                    let key = CoordTable::tabulate(others, &primes, |_| rng.gen_range(0..p));
                    let table = (0..p * p).map(|_| rng.gen_range(0..p)).collect();
                    Body::Keyed { key: vec![key], table: Arc::new(table) }
                }
            };
            maps.set(v, c, Rule { body, own: rng.gen_range(0..p), constant: rng.gen_range(0..p) });
        }
    }
    maps
}

/// The image by evaluating every point residue by residue, with no
/// footprint analysis and no CRT.
pub fn naive_image(e: &Expression, maps: &MapSet) -> BTreeSet<Vec<u32>> {
    let primes = maps.primes();
    let nv = e.num_vars();
    let q: u64 = primes.iter().map(|&p| p as u64).product();
    let mut out = BTreeSet::new();
    for idx in 0..q.pow(nv as u32) {
        let mut rest = idx;
        let xs: Vec<Vec<u32>> = (0..nv)
            .map(|_| {
                let z = rest % q;
                rest /= q;
                primes.iter().map(|&p| (z % p as u64) as u32).collect()
            })
            .collect();
        let vals: Vec<Vec<u32>> = (0..nv).map(|v| maps.vars[v].eval(&xs[v], &primes)).collect();
        let value = primes
            .iter()
            .enumerate()
            .map(|(c, &p)| {
                let p64 = p as u64;
                let r = |x: diffcover::expr::Q| diffcover::expr::q_mod(x, p).unwrap() as u64;
                let atom = |v: usize, s| (vals[v][c] as u64 + r(s) * xs[v][c] as u64) % p64;
                let mut acc = 0u64;
                for t in &e.terms {
                    let prod = t.factors.iter().fold(1u64, |a, f| a * atom(f.var as usize, f.shift) % p64);
                    acc += r(t.coeff) * prod % p64;
                }
                for (v, l) in e.linear.iter().enumerate() {
                    acc += r(l.lambda) * vals[v][c] as u64 % p64 + r(l.mu) * xs[v][c] as u64 % p64;
                }
                (acc % p64) as u32
            })
            .collect();
        out.insert(value);
    }
    out
}
