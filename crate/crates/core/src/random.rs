//! Las Vegas constructions: draw at random, verify exhaustively, retry with
//! the next seed. A returned construction never violates its certificate.

use crate::cert::{BlockMode, Certificate, CoordBlock};
use crate::construct::{exact_certificate, prime_floor, ConstructConfig, Construction, Details};
use crate::error::{Error, Result};
use crate::expr::FinalExpCoeffs;
use crate::expr::{q_mod, qi, Atom, Expression, Linear, Term, Q};
use crate::maps::{Body, CoordTable, MapSet, Rule};
use crate::primes::primes_in;
use crate::program::Program;
use crate::residue::{add_mod, inv_mod, mul_mod, sub_mod, Modulus};
use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::sync::Arc;

/// Seed of the fixed generator (ChaCha8). Attempt r uses seed + r.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSpec {
    pub seed: u64,
}

impl RngSpec {
    pub const ALGORITHM: &'static str = "chacha8";

    pub fn new(seed: u64) -> Self {
        RngSpec { seed }
    }

    pub fn attempt(&self, retry: u32) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(retry as u64))
    }

    /// An independent stream, e.g. one per coordinate.
    pub fn derive(&self, stream: u64) -> RngSpec {
        RngSpec { seed: self.seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 64 }
    }
}

impl RetryPolicy {
    pub fn new(max_retries: u32) -> Result<Self> {
        if max_retries == 0 {
            return Err(Error::Precondition("max_retries must be at least 1".into()));
        }
        Ok(RetryPolicy { max_retries })
    }
}

/// Uniform on Z_p without `skip`.
fn draw_except(rng: &mut ChaCha8Rng, p: u32, skip: u32) -> u32 {
    let v = rng.gen_range(0..p - 1);
    if v >= skip {
        v + 1
    } else {
        v
    }
}

pub fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * k)
}

/// p·p!·2^p and (p−1)^p: the union bound for the two-variable lemma.
pub fn prob_union_bound(p: u64) -> (BigUint, BigUint) {
    (BigUint::from(p) * factorial(p) * (BigUint::one() << p as usize), BigUint::from(p - 1).pow(p as u32))
}

pub fn ratio_f64(num: &BigUint, den: &BigUint) -> f64 {
    BigRational::new(num.clone().into(), den.clone().into()).to_f64().unwrap_or(f64::INFINITY)
}

/// |S|·q²·q! and (q−1)^q: the evading-family condition.
pub fn evading_bound(s: u64, q: u64) -> (BigUint, BigUint) {
    (BigUint::from(s) * BigUint::from(q * q) * factorial(q), BigUint::from(q - 1).pow(q as u32))
}

pub fn evading_feasible(s: u64, q: u64) -> bool {
    let (a, b) = evading_bound(s, q);
    a < b
}

/// n = (n1, …, n7) for n1α² + α(n2x + n3β + n4y) + x(n5x + n6β + n7y).
#[derive(Debug, Clone)]
pub struct TwoVarMaps {
    pub p: u32,
    pub alpha: Vec<u32>,
    pub beta: Vec<u32>,
    pub attempts: u32,
}

struct TwoVar {
    n: [u32; 7],
    l: [u32; 4],
    p: u32,
}

impl TwoVar {
    fn new(n: &[i64; 7], lin: &[Linear; 2], p: u32) -> Result<Self> {
        let n = n.map(|v| crate::residue::project(v, p));
        let l = [q_mod(lin[0].lambda, p)?, q_mod(lin[0].mu, p)?, q_mod(lin[1].lambda, p)?, q_mod(lin[1].mu, p)?];
        if n[0] == 0 || n[2] == 0 {
            return Err(Error::Precondition("n1 and n3 must be non-zero mod p".into()));
        }
        Ok(TwoVar { n, l, p })
    }

    /// β's coefficient and the remainder: value = β·den + num.
    fn split(&self, a: u32, x: u32, y: u32) -> (u32, u32) {
        let p = self.p;
        let m = |u, v| mul_mod(u, v, p);
        let ad = |u, v| add_mod(u, v, p);
        let [n1, n2, n3, n4, n5, n6, n7] = self.n;
        let [l1, m1, l2, m2] = self.l;
        let den = ad(ad(m(n3, a), m(n6, x)), l2);
        let num = ad(
            ad(m(y, ad(ad(m(n4, a), m(n7, x)), m2)), m(a, ad(ad(m(n1, a), m(n2, x)), l1))),
            ad(m(n5, m(x, x)), m(m1, x)),
        );
        (den, num)
    }

    fn forbidden_alpha(&self, x: u32) -> u32 {
        let p = self.p;
        let inv = inv_mod(self.n[2], p).expect("n3 invertible");
        mul_mod(p - add_mod(mul_mod(self.n[5], x, p), self.l[2], p), inv, p) % p
    }
}

/// The two-variable lemma on one prime: α random off one value per x, then
/// β(y) outside S_y, so the expression never vanishes.
pub fn prob_two_var(n: &[i64; 7], lin: &[Linear; 2], p: u32, rng: &RngSpec, policy: &RetryPolicy) -> Result<TwoVarMaps> {
    if p < 23 {
        return Err(Error::Precondition(format!("prime {p} is below 23")));
    }
    let tv = TwoVar::new(n, lin, p)?;
    let mut bad_ys = Vec::new();
    'attempt: for r in 0..policy.max_retries {
        let mut g = rng.attempt(r);
        let alpha: Vec<u32> = (0..p).map(|x| draw_except(&mut g, p, tv.forbidden_alpha(x))).collect();
        let mut beta = Vec::with_capacity(p as usize);
        let mut hit = vec![u32::MAX; p as usize];
        for y in 0..p {
            for x in 0..p {
                let (den, num) = tv.split(alpha[x as usize], x, y);
                let inv = inv_mod(den, p).expect("α avoids the zero of β's coefficient");
                hit[mul_mod(p - num, inv, p) as usize % p as usize] = y;
            }
            match (0..p).find(|&v| hit[v as usize] != y) {
                Some(v) => beta.push(v),
                None => {
                    bad_ys.push(y);
                    continue 'attempt;
                }
            }
        }
        for x in 0..p {
            for y in 0..p {
                let (den, num) = tv.split(alpha[x as usize], x, y);
                if add_mod(mul_mod(beta[y as usize], den, p), num, p) == 0 {
                    return Err(Error::Violation(format!("two-variable expression vanishes at ({x}, {y}) mod {p}")));
                }
            }
        }
        return Ok(TwoVarMaps { p, alpha, beta, attempts: r + 1 });
    }
    Err(Error::RetriesExhausted { attempts: policy.max_retries, detail: format!("p = {p}, first full S_y per attempt: {bad_ys:?}") })
}

/// Fewest leading primes with ∏(p − 1)/p ≤ ε, compared exactly.
pub fn amplify_prefix(primes: &[u64], epsilon: f64) -> Result<usize> {
    let eps = BigRational::from_float(epsilon).ok_or_else(|| Error::Precondition("ε is not finite".into()))?;
    let mut num = BigUint::one();
    let mut den = BigUint::one();
    for (i, &p) in primes.iter().enumerate() {
        num *= p - 1;
        den *= p;
        if BigRational::new(num.clone().into(), den.clone().into()) <= eps {
            return Ok(i + 1);
        }
    }
    Err(Error::WindowExhausted(format!("∏(p−1)/p over all {} primes is {:.4} > ε = {epsilon}", primes.len(), ratio_f64(&num, &den))))
}

/// Coordinatewise two-variable constructions; every coordinate avoids 0.
pub fn prob_amplify(n: &[i64; 7], lin: &[Linear; 2], primes: &[u64], rng: &RngSpec, policy: &RetryPolicy) -> Result<Construction> {
    let modulus = Arc::new(Modulus::from_u64s(primes)?);
    let mut maps = MapSet::zero(modulus.clone(), 2);
    let mut blocks = Vec::new();
    let mut attempts = Vec::new();
    for (c, p) in modulus.prime_values().into_iter().enumerate() {
        let m = prob_two_var(n, lin, p, &rng.derive(c as u64), policy)?;
        maps.set(0, c, Rule::with_body(Body::Tables { tables: vec![CoordTable::new(vec![c], m.alpha)] }));
        maps.set(1, c, Rule::with_body(Body::Tables { tables: vec![CoordTable::new(vec![c], m.beta)] }));
        blocks.push(CoordBlock::new(vec![c], BlockMode::Avoided, vec![vec![0]]));
        attempts.push(m.attempts);
    }
    let cert = Certificate::per_coordinate(&modulus, blocks);
    let mut d = Details::new();
    let density: f64 = primes.iter().map(|&p| (p - 1) as f64 / p as f64).product();
    d.insert("attempts".into(), attempts.into());
    d.insert("density_bound".into(), density.into());
    d.insert("rng".into(), serde_json::json!({ "algorithm": RngSpec::ALGORITHM, "seed": rng.seed }));
    d.insert("max_retries".into(), policy.max_retries.into());
    Ok(Construction::new(maps, cert, d))
}

/// Handler: explicit primes are all used; otherwise the fewest window
/// primes (all ≥ 23) reaching density ε.
pub fn prob_two_var_construct(n: &[i64; 7], lin: &[Linear; 2], cfg: &ConstructConfig) -> Result<Construction> {
    let floor = two_var_floor(n, lin).max(22);
    let primes = match &cfg.primes {
        Some(ps) => {
            if let Some(&p) = ps.iter().find(|&&p| p <= floor) {
                return Err(Error::PrimeTooSmall { prime: p as u32, coeff: floor });
            }
            ps.clone()
        }
        None => {
            let ps = cfg.candidates(floor);
            let k = amplify_prefix(&ps, cfg.epsilon)?;
            ps[..k].to_vec()
        }
    };
    prob_amplify(n, lin, &primes, &RngSpec::new(cfg.seed), &RetryPolicy::new(cfg.max_retries)?)
}

/// Largest |coefficient| among n, the λs and the μs.
fn two_var_floor(n: &[i64; 7], lin: &[Linear; 2]) -> u64 {
    let q = |r: Q| r.numer().unsigned_abs().max(r.denom().unsigned_abs());
    let l = lin.iter().map(|l| q(l.lambda).max(q(l.mu))).max().unwrap_or(0);
    n.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0).max(l)
}

/// The evading family: α on Z_q and β_s for every s, with
/// αβ_s + (α + c1x)(β_s + c2y) + λ1α + μ1x + λ2β_s + μ2y + f(s) ≠ 0.
#[derive(Debug, Clone)]
pub struct EvadingFamily {
    pub alpha: Vec<u32>,
    /// beta[s][y].
    pub beta: Vec<Vec<u32>>,
    pub attempts: u32,
}

/// Coefficients (c1, c2, λ1, μ1, λ2, μ2) already reduced mod q.
pub fn evading_family(f: &[u32], coeffs: [u32; 6], q: u32, rng: &RngSpec, policy: &RetryPolicy) -> Result<EvadingFamily> {
    if !evading_feasible(f.len() as u64, q as u64) {
        return Err(Error::Precondition(format!("|S|·q²·q! < (q−1)^q fails for |S| = {}, q = {q}", f.len())));
    }
    let [c1, c2, l1, m1, l2, m2] = coeffs;
    let inv2 = inv_mod(2, q).expect("q odd");
    let m = |u, v| mul_mod(u, v, q);
    let ad = |u, v| add_mod(u, v, q);
    // value = β·(2α + c1x + λ2) + y(c2α + c1c2x + μ2) + λ1α + μ1x + f(s)
    let parts = |a: u32, x: u32, y: u32, fs: u32| {
        let den = ad(ad(m(2, a), m(c1, x)), l2);
        let num = ad(ad(m(y, ad(ad(m(c2, a), m(m(c1, c2), x)), m2)), ad(m(l1, a), m(m1, x))), fs);
        (den, num)
    };
    let mut failures = Vec::new();
    'attempt: for r in 0..policy.max_retries {
        let mut g = rng.attempt(r);
        let alpha: Vec<u32> = (0..q).map(|x| draw_except(&mut g, q, m(q - ad(m(c1, x), l2), inv2) % q)).collect();
        let mut beta = Vec::with_capacity(f.len());
        let mut hit = vec![u64::MAX; q as usize];
        let mut stamp = 0u64;
        for (s, &fs) in f.iter().enumerate() {
            let mut row = Vec::with_capacity(q as usize);
            for y in 0..q {
                stamp += 1;
                for x in 0..q {
                    let (den, num) = parts(alpha[x as usize], x, y, fs);
                    let inv = inv_mod(den, q).expect("α avoids the zero of β's coefficient");
                    hit[m(q - num, inv) as usize % q as usize] = stamp;
                }
                match (0..q).find(|&v| hit[v as usize] != stamp) {
                    Some(v) => row.push(v),
                    None => {
                        failures.push((s, y));
                        continue 'attempt;
                    }
                }
            }
            beta.push(row);
        }
        for (s, &fs) in f.iter().enumerate() {
            for x in 0..q {
                for y in 0..q {
                    let (den, num) = parts(alpha[x as usize], x, y, fs);
                    if ad(m(beta[s][y as usize], den), num) == 0 {
                        return Err(Error::Violation(format!("evading family vanishes at (x, y, s) = ({x}, {y}, {s})")));
                    }
                }
            }
        }
        return Ok(EvadingFamily { alpha, beta, attempts: r + 1 });
    }
    Err(Error::RetriesExhausted { attempts: policy.max_retries, detail: format!("q = {q}, failing (s, y) per attempt: {failures:?}") })
}

/// One (p, q) pair of the two-prime construction, q < p < 2q, on coordinates
/// `offset` (prime p) and `offset + 1` (prime q) of `maps`.
#[derive(Debug, Clone, Serialize)]
pub struct PairReport {
    pub p: u64,
    pub q: u64,
    pub d_constant: String,
    pub attempts: u32,
    pub designated: Vec<Vec<u32>>,
    /// Exact image size on Z_p ⊕ Z_q, when enumerated.
    pub measured_image: Option<u64>,
}

fn pair_maps(fe: &FinalExpCoeffs, maps: &mut MapSet, offset: usize, rng: &RngSpec, policy: &RetryPolicy) -> Result<PairReport> {
    let primes = maps.primes();
    let (p, q) = (primes[offset], primes[offset + 1]);
    if !(q < p && p < 2 * q) {
        return Err(Error::Precondition(format!("need q < p < 2q, got p = {p}, q = {q}")));
    }
    let (c1, c2) = (fe.c1, fe.c2);
    let [l1, l2, l3] = fe.lin;
    let a1 = c2 * l2.mu - l2.lambda - c2;
    let k = a1 + l3.lambda;
    if k.is_zero() {
        return Err(Error::Precondition("c2μ2 − λ2 + λ3 − c2 = 0".into()));
    }
    let d: Q = qi(2) * a1 * l1.mu * c1 - l1.lambda * a1 + l2.lambda * l1.mu * c1;
    // first coordinate: value y1 − π_p(ι_q(μ3 z2))
    let kinv = q_mod(k.recip(), p)?;
    let mu3q = q_mod(l3.mu, q)?;
    let (cp, cq) = (offset, offset + 1);
    maps.set(0, cp, Rule::affine_q(qi(0), a1, p)?);
    maps.set(1, cp, Rule::affine_q(-c2, -l1.mu * c1, p)?);
    let delta = CoordTable::tabulate(vec![cq], &primes, |z| {
        let t = mul_mod(mu3q, z[cq], q) % p;
        mul_mod(p - t, kinv, p) % p
    });
    maps.set(2, cp, Rule { body: Body::Tables { tables: vec![delta] }, own: q_mod(-l3.mu / k, p)?, constant: q_mod(d / k, p)? });
    // second coordinate: γ = 0 and the evading family indexed by y1
    let f: Vec<u32> = (0..p).map(|s| s % q).collect();
    let coeffs = [q_mod(c1, q)?, q_mod(c2, q)?, q_mod(l1.lambda, q)?, q_mod(l1.mu, q)?, q_mod(l2.lambda, q)?, q_mod(l2.mu, q)?];
    let fam = evading_family(&f, coeffs, q, rng, policy)?;
    maps.set(0, cq, Rule::with_body(Body::Tables { tables: vec![CoordTable::new(vec![cq], fam.alpha)] }));
    let beta = CoordTable::tabulate(vec![cp, cq], &primes, |y| fam.beta[y[cp] as usize][y[cq] as usize]);
    maps.set(1, cq, Rule::with_body(Body::Tables { tables: vec![beta] }));
    maps.set(2, cq, Rule::zero());
    let designated = (0..p - q).map(|r| vec![r % p, sub_mod(0, r % q, q)]).collect();
    Ok(PairReport { p: p as u64, q: q as u64, d_constant: d.to_string(), attempts: fam.attempts, designated, measured_image: None })
}

/// The expression αβ + (α + c1x)(β + c2y) + αγ + linear.
pub fn final_expression(fe: &FinalExpCoeffs) -> Expression {
    let a = |v| Atom::new(v, 0);
    let terms = vec![
        Term { factors: vec![a(0), a(1)], coeff: qi(1) },
        Term { factors: vec![Atom { var: 0, shift: fe.c1 }, Atom { var: 1, shift: fe.c2 }], coeff: qi(1) },
        Term { factors: vec![a(0), a(2)], coeff: qi(1) },
    ];
    Expression::new(terms, fe.lin.to_vec()).normalized()
}

/// The two-prime construction on one pair q < p < 2q. Coordinates are ordered (p, q).
pub fn final_pq(fe: &FinalExpCoeffs, p: u64, q: u64, rng: &RngSpec, policy: &RetryPolicy, budget: u64) -> Result<Construction> {
    let e = final_expression(fe);
    let floor = prime_floor(&e);
    if q <= floor {
        return Err(Error::PrimeTooSmall { prime: q as u32, coeff: floor });
    }
    let modulus = Arc::new(Modulus::from_u64s(&[p, q])?);
    let mut maps = MapSet::zero(modulus.clone(), 3);
    let mut rep = pair_maps(fe, &mut maps, 0, rng, policy)?;
    let prog = Program::compile(&e, &maps)?;
    if prog.reduced_points().is_some_and(|n| n <= budget) {
        let img = prog.image(budget)?;
        let vals: BTreeSet<Vec<u32>> = img.values(p * q).unwrap_or_default().into_iter().collect();
        if let Some(v) = rep.designated.iter().find(|v| vals.contains(*v)) {
            return Err(Error::Violation(format!("designated value {v:?} is attained")));
        }
        rep.measured_image = Some(vals.len() as u64);
    }
    let cert = Certificate::avoided(&modulus, rep.designated.clone());
    let mut d = Details::new();
    d.insert("pairs".into(), serde_json::to_value(vec![&rep]).unwrap_or_default());
    d.insert("density_bound".into(), (1.0 - (p - q) as f64 / (p * q) as f64).into());
    d.insert("rng".into(), serde_json::json!({ "algorithm": RngSpec::ALGORITHM, "seed": rng.seed }));
    Ok(Construction::new(maps, cert, d))
}

/// Prime pairs of window k: q in (2^k, 4/3·2^k), p in (5/3·2^k, 2^(k+1)).
pub fn window_pairs(k: u32) -> Vec<(u64, u64)> {
    let b = 1u64 << k;
    let qs = primes_in(b + 1, (4 * b).div_ceil(3));
    let ps = primes_in(5 * b / 3 + 1, 2 * b);
    ps.into_iter().zip(qs).collect()
}

/// Analytic density ∏(1 − (p − q)/(pq)) of a list of pairs.
pub fn pair_density(pairs: &[(u64, u64)]) -> f64 {
    pairs.iter().map(|&(p, q)| 1.0 - (p - q) as f64 / (p * q) as f64).product()
}

/// Pairs from windows k_lo..=k_hi, each an independent final_pq block,
/// stopping as soon as the density reaches ε.
pub fn pair_window_amplify(fe: &FinalExpCoeffs, epsilon: f64, k_range: (u32, u32), rng: &RngSpec, policy: &RetryPolicy, budget: u64) -> Result<Construction> {
    let e = final_expression(fe);
    let floor = prime_floor(&e);
    let mut pairs = Vec::new();
    for k in k_range.0..=k_range.1 {
        for (p, q) in window_pairs(k) {
            if q > floor && evading_feasible(p, q) {
                pairs.push((p, q));
                if pair_density(&pairs) <= epsilon {
                    return pair_build(fe, &pairs, rng, policy, budget);
                }
            }
        }
    }
    Err(Error::WindowExhausted(format!(
        "{} pairs from windows {}..={} reach density {:.6} > ε = {epsilon}",
        pairs.len(),
        k_range.0,
        k_range.1,
        pair_density(&pairs)
    )))
}

/// Builds the given pairs side by side. Coordinates are p1, q1, p2, q2, ….
pub fn pair_build(fe: &FinalExpCoeffs, pairs: &[(u64, u64)], rng: &RngSpec, policy: &RetryPolicy, budget: u64) -> Result<Construction> {
    let flat: Vec<u64> = pairs.iter().flat_map(|&(p, q)| [p, q]).collect();
    let modulus = Arc::new(Modulus::from_u64s(&flat)?);
    let mut maps = MapSet::zero(modulus.clone(), 3);
    let mut blocks = Vec::new();
    let mut reps = Vec::new();
    for (i, &(p, q)) in pairs.iter().enumerate() {
        let one = final_pq(fe, p, q, &rng.derive(i as u64), policy, budget)?;
        for v in 0..3 {
            for (k, c) in [2 * i, 2 * i + 1].into_iter().enumerate() {
                let mut r = one.maps.rule(v, k).clone();
                shift_rule(&mut r, 2 * i);
                maps.set(v, c, r);
            }
        }
        let rep: PairReport = serde_json::from_value(one.details["pairs"][0].clone()).map_err(|e| Error::Violation(e.to_string()))?;
        blocks.push(CoordBlock::new(vec![2 * i, 2 * i + 1], BlockMode::Avoided, rep.designated.clone()));
        reps.push(rep);
    }
    let cert = Certificate::per_coordinate(&modulus, blocks);
    let mut d = Details::new();
    d.insert("pairs".into(), serde_json::to_value(&reps).unwrap_or_default());
    d.insert("density_bound".into(), pair_density(pairs).into());
    Ok(Construction::new(maps, cert, d))
}

impl<'de> Deserialize<'de> for PairReport {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            p: u64,
            q: u64,
            d_constant: String,
            attempts: u32,
            designated: Vec<Vec<u32>>,
            measured_image: Option<u64>,
        }
        let r = Raw::deserialize(d)?;
        Ok(PairReport { p: r.p, q: r.q, d_constant: r.d_constant, attempts: r.attempts, designated: r.designated, measured_image: r.measured_image })
    }
}

/// Moves a rule built on coordinates (0, 1) to (base, base + 1).
fn shift_rule(r: &mut Rule, base: usize) {
    if let Body::Tables { tables } = &mut r.body {
        for t in tables.iter_mut() {
            for c in t.coords.iter_mut() {
                *c += base;
            }
        }
    }
}

/// Handler for the probabilistic final case: explicit primes give one
/// pair, otherwise pairs are drawn from the dyadic windows of `cfg.window`.
pub fn final_pq_construct(fe: &FinalExpCoeffs, cfg: &ConstructConfig) -> Result<Construction> {
    let rng = RngSpec::new(cfg.seed);
    let policy = RetryPolicy::new(cfg.max_retries)?;
    match &cfg.primes {
        Some(ps) if ps.len() == 2 => {
            let (q, p) = (ps[0].min(ps[1]), ps[0].max(ps[1]));
            final_pq(fe, p, q, &rng, &policy, cfg.budget)
        }
        Some(ps) => Err(Error::Precondition(format!("the pair construction needs 2 primes, {} given", ps.len()))),
        None => {
            let lo = 64 - cfg.window.0.max(2).leading_zeros() - 1;
            let hi = 64 - cfg.window.1.max(2).leading_zeros() - 1;
            pair_window_amplify(fe, cfg.epsilon, (lo, hi), &rng, &policy, cfg.budget).map_err(|e| match e {
                Error::WindowExhausted(m) => Error::Infeasible(m),
                other => other,
            })
        }
    }
}

/// α = A, β = −c2y + B, γ cancelling z: the expression is constant.
pub fn final_pq_simple(fe: &FinalExpCoeffs, cfg: &ConstructConfig) -> Result<Construction> {
    let e = final_expression(fe);
    let primes = match &cfg.primes {
        Some(ps) => ps.clone(),
        None => cfg.pick_primes(1, prime_floor(&e))?,
    };
    let [l1, l2, l3] = fe.lin;
    let a = fe.c2 * l2.mu - l2.lambda;
    if (a + l3.lambda).is_zero() {
        return Err(Error::Precondition("A + λ3 = 0: use the pair construction".into()));
    }
    let b = -l1.mu * fe.c1;
    let modulus = Arc::new(Modulus::from_u64s(&primes)?);
    let mut maps = MapSet::zero(modulus.clone(), 3);
    for (c, p) in modulus.prime_values().into_iter().enumerate() {
        maps.set(0, c, Rule::affine_q(qi(0), a, p)?);
        maps.set(1, c, Rule::affine_q(-fe.c2, b, p)?);
        maps.set(2, c, Rule::affine_q(-l3.mu / (a + l3.lambda), qi(0), p)?);
    }
    let prog = Program::compile(&e, &maps)?;
    let cert = exact_certificate(&prog, u64::MAX, 1)?.ok_or_else(|| Error::Violation("simple final maps are not constant".into()))?;
    let mut d = Details::new();
    d.insert("A".into(), a.to_string().into());
    d.insert("B".into(), b.to_string().into());
    Ok(Construction::new(maps, cert, d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::CaseParams;

    fn two_var_value(n: &[i64; 7], a: i64, x: i64, b: i64, y: i64, p: i64) -> i64 {
        let v = n[0] * a * a + a * (n[1] * x + n[2] * b + n[3] * y) + x * (n[4] * x + n[5] * b + n[6] * y);
        v.rem_euclid(p)
    }

    #[test]
    fn union_bounds_are_exact() {
        let (a, b) = prob_union_bound(23);
        assert!(a < b);
        assert!((ratio_f64(&a, &b) - 0.664).abs() < 0.01);
        assert!(evading_feasible(37, 31));
        let (a, b) = prob_union_bound(19);
        assert!(a > b);
    }

    #[test]
    fn forbidden_alpha_value() {
        let lin = [Linear::default(); 2];
        let tv = TwoVar::new(&[1, 0, 2, 0, 0, 1, 0], &lin, 23).unwrap();
        assert_eq!(tv.forbidden_alpha(3), 10);
    }

    #[test]
    fn seeded_two_var_never_vanishes() {
        let n = [1, 0, 2, 0, 0, 0, 0];
        let lin = [Linear::default(); 2];
        let m = prob_two_var(&n, &lin, 23, &RngSpec::new(7), &RetryPolicy::default()).unwrap();
        for x in 0..23 {
            for y in 0..23 {
                assert_ne!(two_var_value(&n, m.alpha[x] as i64, x as i64, m.beta[y] as i64, y as i64, 23), 0);
            }
        }
        let again = prob_two_var(&n, &lin, 23, &RngSpec::new(7), &RetryPolicy::default()).unwrap();
        assert_eq!((m.alpha, m.beta), (again.alpha, again.beta));
    }

    #[test]
    fn prefix_products() {
        let ps = [23, 29, 31, 37, 41, 43, 47, 53];
        let d: f64 = ps.iter().map(|&p| (p - 1) as f64 / p as f64).product();
        assert!((d - 0.79572).abs() < 1e-5);
        assert_eq!(amplify_prefix(&ps, 0.80).unwrap(), 8);
        assert_eq!(amplify_prefix(&ps, 0.82).unwrap(), 7);
        assert!(amplify_prefix(&ps, 0.79).is_err());
    }

    #[test]
    fn evading_family_avoids_zero() {
        let q = 31;
        let f: Vec<u32> = (0..37).map(|s| (s * 7 + 3) % q).collect();
        let fam = evading_family(&f, [1, 1, 2, 3, 4, 5], q, &RngSpec::new(1), &RetryPolicy::default()).unwrap();
        for (s, &fs) in f.iter().enumerate() {
            for x in 0..q {
                for y in 0..q {
                    let (a, b) = (fam.alpha[x as usize] as i64, fam.beta[s][y as usize] as i64);
                    let (x, y) = (x as i64, y as i64);
                    let v = a * b + (a + x) * (b + y) + 2 * a + 3 * x + 4 * b + 5 * y + fs as i64;
                    assert_ne!(v.rem_euclid(q as i64), 0);
                }
            }
        }
    }

    fn fe(c1: i64, c2: i64, lin: [(i64, i64); 3]) -> FinalExpCoeffs {
        FinalExpCoeffs { c1: qi(c1), c2: qi(c2), lin: lin.map(|(l, m)| Linear::new(l, m)) }
    }

    #[test]
    fn simple_final_is_constant() {
        let c = final_pq_simple(&fe(1, 1, [(0, 0), (0, 1), (0, 0)]), &ConstructConfig::with_primes(&[7])).unwrap();
        assert_eq!(c.details["A"], "1");
        assert_eq!(c.details["B"], "0");
        assert!(final_pq_simple(&fe(1, 1, [(0, 0); 3]), &ConstructConfig::with_primes(&[7])).is_err());
    }

    #[test]
    fn pair_misses_designated_values() {
        let f = fe(1, 1, [(0, 0); 3]);
        let c = final_pq(&f, 37, 31, &RngSpec::new(0), &RetryPolicy::default(), 100_000_000).unwrap();
        let pairs = c.details["pairs"][0].clone();
        assert_eq!(pairs["designated"].as_array().unwrap().len(), 6);
        let measured = pairs["measured_image"].as_u64().unwrap();
        assert!(measured <= 37 * 31 - 6, "{measured}");
    }

    #[test]
    fn classifier_routes_final_cases() {
        let e = crate::expr::parse("a(x)*b(y) + (a(x)+x)*(b(y)+y) + a(x)*c(z)").unwrap();
        let cls = crate::expr::classify(&e).unwrap();
        assert!(matches!(cls.params, CaseParams::FinalExp(_)));
    }
}
