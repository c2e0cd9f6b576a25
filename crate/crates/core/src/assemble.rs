//! Separation of functions: one modulus block per expression, staged by
//! variable count, composed into a single map φ and the set
//! A = {φ(x)} ∪ {φ(x) + x}.
//!
//! Stage 1 gives every one-variable expression its own primes. Stage 2
//! gives every two-variable expression one coordinate per ordered pair of
//! distinct residues modulo Q_1; on that coordinate φ is zero unless the
//! input reduces to one of the two residues, in which case it applies the
//! matching per-variable map.

use crate::cert::Certificate;
use crate::construct::avoid::single_var_needs;
use crate::construct::{construct, ConstructConfig};
use crate::error::{Error, Result};
use crate::expr::{canonicalize_with_map, enumerate_unreduced, Expression, Linear, Var, Q};
use crate::maps::MapSet;
use crate::primes::primes_in;
use crate::residue::{add_mod, inv_mod, mul_mod, Modulus, Prime};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use serde::Serialize;
use std::ops::Range;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Every stage must meet its share of the ε schedule.
    Strict,
    /// Sub-constructions use desk-scale primes; the achieved bound is reported.
    Relaxed,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExpressionPlan {
    pub l: usize,
    pub k: usize,
    pub epsilon: f64,
    /// Canonical expressions sorted by number of variables.
    pub expressions: Vec<Expression>,
    /// boundaries[s − 1] = number of expressions with at most s variables.
    pub boundaries: Vec<usize>,
    /// ε_1 < … < ε_N = ε.
    pub schedule: Vec<f64>,
}

impl ExpressionPlan {
    pub fn stages(&self) -> usize {
        self.boundaries.len()
    }

    /// Expression indices with exactly s variables.
    pub fn stage_range(&self, s: usize) -> Range<usize> {
        let lo = if s <= 1 { 0 } else { self.boundaries[s - 2] };
        lo..self.boundaries[s - 1]
    }

    pub fn index_of(&self, e: &Expression) -> Option<usize> {
        self.expressions.iter().position(|x| x == e)
    }
}

/// Expressions of lA² + kA with the linear schedule ε_s = ε·s/N.
pub fn plan(l: usize, k: usize, epsilon: f64) -> Result<ExpressionPlan> {
    if l > 3 {
        return Err(Error::Precondition(format!("l = {l} exceeds the supported 3")));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Precondition(format!("ε = {epsilon} must lie in (0, 1]")));
    }
    let expressions = enumerate_unreduced(l, k);
    if expressions.is_empty() || (l == 0 && k == 0) {
        return Err(Error::Precondition("l + k must be positive".into()));
    }
    let n = expressions.iter().map(|e| e.count_used_vars()).max().unwrap_or(0);
    let boundaries = (1..=n).map(|s| expressions.iter().filter(|e| e.count_used_vars() <= s).count()).collect();
    let schedule = (1..=n).map(|s| epsilon * s as f64 / n as f64).collect();
    Ok(ExpressionPlan { l, k, epsilon, expressions, boundaries, schedule })
}

fn is_linear(e: &Expression) -> bool {
    e.terms.is_empty()
}

fn log2_big(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        n.to_f64().unwrap_or(f64::INFINITY).log2()
    } else {
        let shift = bits - 64;
        (n >> shift).to_f64().unwrap_or(0.0).log2() + shift as f64
    }
}

/// log2(2^a + 2^b) without overflow.
fn log2_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY || hi.is_infinite() {
        hi
    } else {
        hi + (lo - hi).exp2().ln_1p() / std::f64::consts::LN_2
    }
}

/// Ordered tuples of `arity` distinct residues mod q: q(q−1)…(q−arity+1).
pub fn case_count(q: &BigUint, arity: usize) -> BigUint {
    (0..arity as u32).fold(BigUint::one(), |acc, j| if *q > BigUint::from(j) { acc * (q - j) } else { BigUint::zero() })
}

/// Limits of what counts as buildable at desk scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Limits {
    pub max_coordinates: u64,
    pub max_prime: u64,
    /// K in the K·q image bound of two-variable products.
    pub k_const: f64,
    /// Smallest prime used when primes are chosen automatically.
    pub window_lo: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_coordinates: 2_000_000, max_prime: u32::MAX as u64, k_const: 15.0, window_lo: 100 }
    }
}

/// Sizes past stage 2 form a tower, so they are reported on two log
/// levels; a field is `None` once its level overflows an f64.
#[derive(Debug, Clone, Serialize)]
pub struct StageEstimate {
    pub stage: usize,
    pub expressions: usize,
    pub all_linear: bool,
    /// Exact case count per expression when it has under 4096 bits.
    pub cases_per_expression: Option<String>,
    pub cases_log2: Option<f64>,
    pub cases_log2_log2: Option<f64>,
    /// Required image fraction per case, as log10.
    pub required_fraction_log10: Option<f64>,
    pub min_prime: Option<u64>,
    pub coordinates: Option<u64>,
    /// log2 of the bit length of this stage's modulus.
    pub bits_log2: Option<f64>,
    pub bits_log2_log2: Option<f64>,
    pub feasible: bool,
    pub note: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Estimate {
    /// Primes of each stage-1 expression, in plan order.
    pub stage1_primes: Vec<Vec<u64>>,
    pub stages: Vec<StageEstimate>,
    pub strict_feasible: bool,
    /// log2 of the bit length of the whole modulus.
    pub total_bits_log2: Option<f64>,
    pub total_bits_log2_log2: Option<f64>,
}

fn fin(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Counts coordinates and moduli stage by stage without building anything.
/// Stage 1 uses `base_primes` when given; later stages assume the smallest
/// primes meeting the per-case fraction.
pub fn estimate(plan: &ExpressionPlan, base_primes: Option<&[u64]>, limits: &Limits) -> Estimate {
    let mut stages = Vec::new();
    // log2 of the bit length of Q_{s−1}
    let mut prev_bits = f64::NEG_INFINITY;
    let mut last_bits2 = None;
    let mut stage1_primes: Vec<Vec<u64>> = Vec::new();
    let mut prev_exact: Option<BigUint> = Some(BigUint::one());
    let mut prev_eps = 0.0;
    let mut ok = true;
    for s in 1..=plan.stages() {
        let range = plan.stage_range(s);
        let m = range.len();
        let eps_s = plan.schedule[s - 1];
        let all_linear = plan.expressions[range.clone()].iter().all(is_linear);
        let share = (eps_s - prev_eps) / m.max(1) as f64;
        let mut note = String::new();
        let st = if s == 1 {
            let mut log2 = 0.0;
            let mut feasible = true;
            let mut next = limits.window_lo;
            let mut q1 = BigUint::one();
            for (i, e) in plan.expressions[range.clone()].iter().enumerate() {
                let ps = if is_linear(e) {
                    let p = match base_primes.and_then(|b| b.get(i).copied()) {
                        Some(p) => p,
                        None => crate::primes::primes_from(((1.0 / share).ceil() as u64).max(next), 1)[0],
                    };
                    if (1.0 / p as f64) > share + 1e-12 && feasible {
                        feasible = false;
                        note = format!("base prime {p} gives fraction above ε_1/m_1 = {share:.4}");
                    }
                    vec![p]
                } else {
                    match single_var_needs(e, share) {
                        Ok((_, t, floor)) => crate::primes::primes_from(next.max(floor + 1), t),
                        Err(err) => {
                            feasible = false;
                            note = err.to_string();
                            vec![]
                        }
                    }
                };
                next = ps.iter().max().map_or(next, |&p| p + 1);
                for &p in &ps {
                    log2 += (p as f64).log2();
                    q1 *= p;
                }
                stage1_primes.push(ps);
            }
            let coords = stage1_primes.iter().map(|v| v.len() as u64).sum();
            prev_exact = Some(q1);
            StageEstimate {
                stage: s,
                expressions: m,
                all_linear,
                cases_per_expression: Some("1".into()),
                cases_log2: Some(0.0),
                cases_log2_log2: None,
                required_fraction_log10: fin(share.log10()),
                min_prime: stage1_primes.iter().flatten().min().copied(),
                coordinates: Some(coords),
                bits_log2: fin(log2.log2()),
                bits_log2_log2: fin(log2.log2().log2()),
                feasible,
                note,
            }
        } else {
            // cases ≈ Q_{s−1}^s, so log2 cases ≈ s·bits(Q_{s−1})
            let (cases_exact, cases_log2, cases_log2_log2) = match &prev_exact {
                Some(q) => {
                    let c = case_count(q, s);
                    let l = log2_big(&c);
                    (Some(c), l, l.log2())
                }
                None => {
                    let l2 = (s as f64).log2() + prev_bits;
                    (None, l2.exp2(), l2)
                }
            };
            let frac_log10 = share.log10() - cases_log2 * std::f64::consts::LOG10_2;
            let c = if all_linear { 1.0 } else { limits.k_const };
            // a singleton case needs one prime ≥ 1/fraction, a product case K/fraction
            let need_log10 = c.log10() - frac_log10;
            let min_prime = if need_log10 < 18.0 { Some(10f64.powf(need_log10).ceil() as u64) } else { None };
            let per_case: u64 = if all_linear { 1 } else { 2 };
            let coords_log2 = cases_log2 + ((m as u64 * per_case) as f64).log2();
            let coords = if coords_log2 < 62.0 { cases_exact.as_ref().and_then(|c| c.to_u64()).map(|c| c * m as u64 * per_case) } else { None };
            let feasible = match (min_prime, coords) {
                (Some(p), Some(n)) => p <= limits.max_prime && n <= limits.max_coordinates,
                _ => false,
            };
            if !feasible {
                note = match fin(cases_log2) {
                    Some(cl) => format!("stage {s}: 2^{cl:.1} cases per expression, required fraction 10^{frac_log10:.1}; exceeds desk limits"),
                    None => format!("stage {s}: 2^(2^{cases_log2_log2:.1}) cases per expression; exceeds desk limits"),
                };
            }
            let prime_bits = min_prime.map_or(need_log10 / std::f64::consts::LOG10_2, |p| (p as f64).log2());
            let bits_log2 = coords_log2 + prime_bits.log2();
            // when cases_log2 overflows, bits ≈ 2^cases_log2 · cases_log2
            let bits_log2_log2 = if bits_log2.is_finite() { bits_log2.log2() } else { cases_log2_log2 };
            StageEstimate {
                stage: s,
                expressions: m,
                all_linear,
                cases_per_expression: cases_exact.as_ref().filter(|c| c.bits() < 4096).map(|c| c.to_string()),
                cases_log2: fin(cases_log2),
                cases_log2_log2: fin(cases_log2_log2),
                required_fraction_log10: fin(frac_log10),
                min_prime,
                coordinates: coords,
                bits_log2: fin(bits_log2),
                bits_log2_log2: fin(bits_log2_log2),
                feasible,
                note,
            }
        };
        ok &= st.feasible;
        prev_bits = log2_add(prev_bits, st.bits_log2.unwrap_or(f64::INFINITY));
        last_bits2 = st.bits_log2_log2;
        stages.push(st);
        if s > 1 {
            prev_exact = None;
        }
        prev_eps = eps_s;
    }
    Estimate { stage1_primes, strict_feasible: ok, total_bits_log2: fin(prev_bits), total_bits_log2_log2: if prev_bits.is_finite() { fin(prev_bits.log2()) } else { last_bits2 }, stages }
}

/// One block of stage-1 coordinates owned by a one-variable expression.
#[derive(Debug, Clone, Serialize)]
pub struct Stage1Block {
    pub expr: usize,
    pub coords: Range<usize>,
    /// Maps of the sub-construction (variable 0) over the block's primes.
    #[serde(skip)]
    pub maps: MapSet,
    /// Certificate over the block's coordinates.
    pub certificate: Certificate,
}

/// Stage-2 coordinates of one two-variable expression: coordinate
/// `first + t` belongs to the t-th ordered pair of distinct residues mod Q_1.
#[derive(Debug, Clone, Serialize)]
pub struct CaseBlock {
    pub expr: usize,
    pub arity: usize,
    pub first: usize,
    pub count: usize,
    /// θ_j(x) = ratios[j]·x for the variable in position j.
    pub ratios: Vec<Q>,
}

/// The assembled map φ on Z_Q.
#[derive(Debug, Clone, Serialize)]
pub struct PhiMap {
    pub modulus: Arc<Modulus>,
    /// Number of stage-1 coordinates and their product.
    pub stage1_len: usize,
    pub q1: u64,
    pub stage1: Vec<Stage1Block>,
    pub cases: Vec<CaseBlock>,
    #[serde(skip)]
    ratio_mod: Vec<Vec<u32>>,
    #[serde(skip)]
    q1_basis: Vec<u64>,
}

/// Index of an ordered tuple of distinct residues mod q.
pub fn encode_tuple(t: &[u64], q: u64) -> u64 {
    let mut idx = 0u64;
    for (j, &c) in t.iter().enumerate() {
        let below = t[..j].iter().filter(|&&u| u < c).count() as u64;
        idx = idx * (q - j as u64) + (c - below);
    }
    idx
}

/// Inverse of [`encode_tuple`].
pub fn decode_tuple(mut idx: u64, q: u64, arity: usize) -> Vec<u64> {
    let mut digits = vec![0u64; arity];
    for j in (0..arity).rev() {
        let base = q - j as u64;
        digits[j] = idx % base;
        idx /= base;
    }
    let mut out: Vec<u64> = Vec::with_capacity(arity);
    for d in digits {
        // the d-th residue not used yet
        let mut c = d;
        let mut used: Vec<u64> = out.clone();
        used.sort_unstable();
        for u in used {
            if u <= c {
                c += 1;
            }
        }
        out.push(c);
    }
    out
}

impl PhiMap {
    fn new(modulus: Arc<Modulus>, stage1_len: usize, stage1: Vec<Stage1Block>, cases: Vec<CaseBlock>) -> Result<Self> {
        let primes = modulus.prime_values();
        let q1: u64 = primes[..stage1_len].iter().map(|&p| p as u64).product();
        let q1_basis = primes[..stage1_len]
            .iter()
            .map(|&p| {
                let m = q1 / p as u64;
                let inv = inv_mod((m % p as u64) as u32, p).expect("distinct primes");
                ((m as u128 * inv as u128) % q1 as u128) as u64
            })
            .collect();
        let mut ratio_mod = Vec::with_capacity(cases.len());
        for b in &cases {
            let mut per = Vec::with_capacity(b.count * b.arity);
            for c in b.first..b.first + b.count {
                for r in &b.ratios {
                    per.push(crate::expr::q_mod(*r, primes[c])?);
                }
            }
            ratio_mod.push(per);
        }
        Ok(PhiMap { modulus, stage1_len, q1, stage1, cases, ratio_mod, q1_basis })
    }

    /// x mod Q_1 from the stage-1 residues.
    pub fn reduce_q1(&self, x: &[u32]) -> u64 {
        let acc: u128 = x[..self.stage1_len].iter().zip(&self.q1_basis).map(|(&r, &b)| r as u128 * b as u128).sum();
        (acc % self.q1 as u128) as u64
    }

    /// φ(x).
    pub fn eval(&self, x: &[u32]) -> Vec<u32> {
        let primes = self.modulus.prime_values();
        let mut out = vec![0u32; primes.len()];
        for b in &self.stage1 {
            let local: Vec<u32> = x[b.coords.clone()].to_vec();
            let lp = b.maps.primes();
            for (k, c) in b.coords.clone().enumerate() {
                out[c] = b.maps.rule(0, k).eval(k, &local, &lp);
            }
        }
        let xbar = self.reduce_q1(x);
        for (bi, b) in self.cases.iter().enumerate() {
            for (t, j) in tuples_containing(xbar, self.q1, b.arity) {
                let c = b.first + t as usize;
                let r = self.ratio_mod[bi][t as usize * b.arity + j];
                out[c] = mul_mod(r, x[c], primes[c]);
            }
        }
        out
    }

    /// Coordinates the rule at `c` reads.
    pub fn footprint(&self, c: usize) -> Vec<usize> {
        if c < self.stage1_len {
            let b = self.stage1.iter().find(|b| b.coords.contains(&c)).expect("stage-1 coordinate");
            b.coords.clone().collect()
        } else {
            let mut v: Vec<usize> = (0..self.stage1_len).collect();
            v.push(c);
            v
        }
    }
}

/// (tuple index, position) of every ordered tuple with `x` in some position.
fn tuples_containing(x: u64, q: u64, arity: usize) -> Vec<(u64, usize)> {
    if arity == 2 {
        let mut out = Vec::with_capacity(2 * (q as usize - 1));
        for other in (0..q).filter(|&o| o != x) {
            out.push((encode_tuple(&[x, other], q), 0));
            out.push((encode_tuple(&[other, x], q), 1));
        }
        return out;
    }
    let total = case_count(&BigUint::from(q), arity).to_u64().expect("small case count");
    (0..total)
        .filter_map(|t| decode_tuple(t, q, arity).iter().position(|&c| c == x).map(|j| (t, j)))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityReport {
    /// Σ over stage-1 expressions of claimed/q_i, exact.
    pub stage1: String,
    pub stage1_f64: f64,
    /// Σ over stage-2 cases of 1/r_C, rounded up to a multiple of 2^−96.
    pub stage2_upper: f64,
    pub stage2_terms: u64,
    pub method: String,
    pub total_upper: f64,
    /// The total as an exact rational (numerator/denominator strings).
    pub total_exact: (String, String),
    pub epsilon: f64,
    pub within_epsilon: bool,
}

const DYADIC_BITS: u32 = 96;

fn density(stage1: &[Stage1Block], primes: &[u32], cases: &[CaseBlock], epsilon: f64) -> DensityReport {
    let mut s1 = BigRational::zero();
    for b in stage1 {
        let q: BigUint = b.coords.clone().map(|c| BigUint::from(primes[c])).product();
        s1 += BigRational::new(BigInt::from(b.certificate.claimed_size.clone()), BigInt::from(q));
    }
    // ⌈2^96/r⌉ summed exactly, an upper bound for Σ 1/r
    let mut num: u128 = 0;
    let mut terms = 0u64;
    for b in cases {
        for c in b.first..b.first + b.count {
            let r = primes[c] as u128;
            num += (1u128 << DYADIC_BITS).div_ceil(r);
            terms += 1;
        }
    }
    let s2 = BigRational::new(BigInt::from(num), BigInt::from(1u128 << DYADIC_BITS));
    let total = &s1 + &s2;
    let eps = BigRational::from_float(epsilon).unwrap_or_else(BigRational::zero);
    DensityReport {
        stage1: s1.to_string(),
        stage1_f64: s1.to_f64().unwrap_or(f64::NAN),
        stage2_upper: s2.to_f64().unwrap_or(f64::NAN),
        stage2_terms: terms,
        method: if terms == 0 { "exact".into() } else { format!("exact stage 1, stage 2 rounded up to 2^-{DYADIC_BITS}") },
        total_upper: total.to_f64().unwrap_or(f64::NAN),
        total_exact: (total.numer().to_string(), total.denom().to_string()),
        epsilon,
        within_epsilon: total <= eps,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AssembleConfig {
    /// One prime per one-variable linear expression.
    pub base_primes: Option<Vec<u64>>,
    pub mode: Mode,
    pub limits: Limits,
    pub seed: u64,
}

impl Default for AssembleConfig {
    fn default() -> Self {
        AssembleConfig { base_primes: None, mode: Mode::Relaxed, limits: Limits::default(), seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Build {
    pub plan: ExpressionPlan,
    pub mode: Mode,
    pub phi: PhiMap,
    pub density: DensityReport,
    pub estimate: Estimate,
}

/// Per-variable multiplier −μ/λ of a linear expression, in canonical order.
fn linear_ratios(e: &Expression) -> Vec<Q> {
    e.linear.iter().filter(|l| !l.is_zero()).map(|l| -l.mu / l.lambda).collect()
}

/// Builds φ stage by stage. Only one- and two-variable stages are built;
/// stage-2 expressions must be linear. Anything else is reported
/// infeasible together with the estimate.
pub fn assemble(plan: &ExpressionPlan, cfg: &AssembleConfig) -> Result<Build> {
    let est = estimate(plan, cfg.base_primes.as_deref(), &cfg.limits);
    if cfg.mode == Mode::Strict && !est.strict_feasible {
        let bad = est.stages.iter().find(|s| !s.feasible).map(|s| s.note.clone()).unwrap_or_default();
        return Err(Error::Infeasible(format!("strict mode: {bad}")));
    }
    if plan.stages() > 2 {
        return Err(Error::Infeasible(format!(
            "{} stages; {}",
            plan.stages(),
            est.stages.iter().skip(1).find(|s| !s.feasible).map_or(String::new(), |s| s.note.clone())
        )));
    }
    // stage 1
    let r1 = plan.stage_range(1);
    let mut primes: Vec<u64> = Vec::new();
    let mut stage1 = Vec::new();
    let max_k = (plan.l + plan.k) as u64;
    if let Some(b) = &cfg.base_primes {
        let linear = plan.expressions[r1.clone()].iter().filter(|e| is_linear(e)).count();
        if b.len() < linear {
            return Err(Error::Precondition(format!("{} base primes given, {linear} needed", b.len())));
        }
    }
    for (i, idx) in r1.clone().enumerate() {
        let e = &plan.expressions[idx];
        let start = primes.len();
        let ps = &est.stage1_primes[i];
        if ps.is_empty() {
            return Err(Error::Infeasible(est.stages[0].note.clone()));
        }
        let (maps, cert) = if is_linear(e) {
            let p = ps[0];
            if p <= max_k {
                return Err(Error::PrimeTooSmall { prime: p as u32, coeff: max_k });
            }
            let m = Arc::new(Modulus::from_u64s(&[p])?);
            let mut maps = MapSet::zero(m, 1);
            let ratio = linear_ratios(e)[0];
            maps.set(0, 0, crate::maps::Rule::affine_q(ratio, Q::zero(), p as u32)?);
            primes.push(p);
            (maps, Certificate::exact(vec![vec![0]]))
        } else {
            let ccfg = ConstructConfig { epsilon: plan.schedule[0] / r1.len() as f64, seed: cfg.seed, primes: Some(ps.clone()), ..Default::default() };
            let c = construct(e, &ccfg)?;
            primes.extend(c.maps.primes().iter().map(|&p| p as u64));
            (c.maps, c.certificate)
        };
        stage1.push(Stage1Block { expr: idx, coords: start..primes.len(), maps, certificate: cert });
    }
    let stage1_len = primes.len();
    let q1 = primes.iter().try_fold(1u64, |a, &p| a.checked_mul(p)).ok_or_else(|| Error::Infeasible("Q_1 exceeds 64 bits".into()))?;
    let s1_density = {
        let m = Modulus::from_u64s(&primes)?;
        density(&stage1, &m.prime_values(), &[], plan.epsilon)
    };
    if cfg.mode == Mode::Strict && s1_density.stage1_f64 > plan.schedule[0] {
        return Err(Error::Infeasible(format!("stage-1 density {:.4} exceeds ε_1 = {}", s1_density.stage1_f64, plan.schedule[0])));
    }
    // stage 2
    let mut cases = Vec::new();
    if plan.stages() == 2 {
        let r2 = plan.stage_range(2);
        if let Some(e) = plan.expressions[r2.clone()].iter().find(|e| !is_linear(e)) {
            return Err(Error::Infeasible(format!(
                "two-variable product case {e}: 2^{:.1} case constructions needed",
                est.stages[1].cases_log2.unwrap_or(f64::INFINITY)
            )));
        }
        let per = q1 * (q1 - 1);
        let total = per * r2.len() as u64;
        if total > cfg.limits.max_coordinates {
            return Err(Error::Budget(format!("{total} stage-2 coordinates exceed {}", cfg.limits.max_coordinates)));
        }
        let budget = match cfg.mode {
            Mode::Strict => plan.schedule[1] - plan.schedule[0],
            Mode::Relaxed => plan.epsilon - s1_density.stage1_f64,
        };
        let floor = primes.iter().copied().max().unwrap_or(2).max(cfg.limits.window_lo);
        let lo = if budget > 0.0 { ((total as f64 / budget).ceil() as u64).max(floor + 1) } else { floor + 1 };
        let mut hi = lo * 2 + 1000;
        let mut fresh = primes_in(lo, hi);
        while (fresh.len() as u64) < total {
            hi *= 2;
            if hi > cfg.limits.max_prime {
                return Err(Error::Infeasible(format!("not enough primes in [{lo}, {}]", cfg.limits.max_prime)));
            }
            fresh = primes_in(lo, hi);
        }
        fresh.truncate(total as usize);
        for (i, idx) in r2.enumerate() {
            cases.push(CaseBlock { expr: idx, arity: 2, first: primes.len() + i * per as usize, count: per as usize, ratios: linear_ratios(&plan.expressions[idx]) });
        }
        primes.extend(fresh);
    }
    let modulus = Arc::new(Modulus::new(primes.iter().map(|&p| Prime::new(p)).collect::<Result<_>>()?)?);
    let pv = modulus.prime_values();
    let dens = density(&stage1, &pv, &cases, plan.epsilon);
    let phi = PhiMap::new(modulus, stage1_len, stage1, cases)?;
    Ok(Build { plan: plan.clone(), mode: cfg.mode, phi, density: dens, estimate: est })
}

/// y = φ(x), with y and y + x checked against their generator.
pub fn difference_witness(b: &Build, x: &[u32]) -> Result<Vec<u32>> {
    let primes = b.phi.modulus.prime_values();
    let y = b.phi.eval(x);
    let yx: Vec<u32> = y.iter().zip(x).zip(&primes).map(|((&a, &c), &p)| add_mod(a, c, p)).collect();
    let again = b.phi.eval(x);
    let diff: Vec<u32> = yx.iter().zip(&y).zip(&primes).map(|((&a, &c), &p)| crate::residue::sub_mod(a, c, p)).collect();
    if again != y || diff != x {
        return Err(Error::Violation("difference witness failed".into()));
    }
    Ok(y)
}

/// Which designated set an evaluated sum element must fall into.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Route {
    /// Expression whose certificate applies, after collapsing variables
    /// that agree modulo Q_1.
    pub expr: usize,
    pub coords: Vec<usize>,
}

/// The expression instantiated by distinct inputs with multiplicities a_t
/// and shift counts b_t, with `map[input] = canonical variable`.
fn linear_expression(parts: &[(i64, i64)]) -> (Expression, Vec<Var>) {
    let lin = parts.iter().map(|&(a, b)| Linear::new(a, b)).collect();
    canonicalize_with_map(&Expression::new(vec![], lin))
}

/// Certificate routing for a linear sum with distinct inputs `ys`.
pub fn route(b: &Build, parts: &[(i64, i64)], ys: &[&[u32]]) -> Result<Route> {
    let (e, map) = linear_expression(parts);
    let idx = b.plan.index_of(&e).ok_or_else(|| Error::Violation(format!("{e} is not in the plan")))?;
    let s = e.count_used_vars();
    if s == 1 {
        let blk = b.phi.stage1.iter().find(|x| x.expr == idx).ok_or_else(|| Error::Violation("no stage-1 block".into()))?;
        return Ok(Route { expr: idx, coords: blk.coords.clone().collect() });
    }
    let bars: Vec<u64> = ys.iter().map(|y| b.phi.reduce_q1(y)).collect();
    for i in 0..bars.len() {
        for j in i + 1..bars.len() {
            if bars[i] == bars[j] {
                // agree mod Q_1: on stage-1 coordinates this is the merged expression
                let mut merged: Vec<(i64, i64)> = parts.to_vec();
                merged[i].0 += merged[j].0;
                merged[i].1 += merged[j].1;
                merged.remove(j);
                let mut yy: Vec<&[u32]> = ys.to_vec();
                yy.remove(j);
                return route(b, &merged, &yy);
            }
        }
    }
    let blk = b.phi.cases.iter().find(|c| c.expr == idx).ok_or_else(|| Error::Violation(format!("no case block for {e}")))?;
    let mut ordered = vec![0u64; s];
    for (input, &v) in map.iter().enumerate().take(bars.len()) {
        ordered[v as usize] = bars[input];
    }
    let t = encode_tuple(&ordered, b.phi.q1);
    Ok(Route { expr: idx, coords: vec![blk.first + t as usize] })
}

#[derive(Debug, Clone, Serialize)]
pub struct SumSample {
    pub shifts: Vec<u8>,
    pub expression: String,
    pub route: Route,
    pub certified: bool,
}

fn random_elem(rng: &mut impl Rng, primes: &[u32]) -> Vec<u32> {
    primes.iter().map(|&p| rng.gen_range(0..p)).collect()
}

/// A random element of kA (l = 0): random inputs, some equal and some equal
/// modulo Q_1, and random shift bits. The value is checked on the routed
/// coordinates against that expression's designated set.
pub fn sample_sum_element(b: &Build, rng: &mut impl Rng) -> Result<SumSample> {
    if b.plan.l != 0 {
        return Err(Error::Unsupported("sampling is implemented for the linear family".into()));
    }
    let primes = b.phi.modulus.prime_values();
    let k = b.plan.k;
    let mut xs: Vec<Vec<u32>> = Vec::with_capacity(k);
    for i in 0..k {
        let r: f64 = rng.gen();
        let x = if i > 0 && r < 0.25 {
            xs[rng.gen_range(0..i)].clone()
        } else if i > 0 && r < 0.5 {
            let mut x = random_elem(rng, &primes);
            let src = &xs[rng.gen_range(0..i)];
            x[..b.phi.stage1_len].copy_from_slice(&src[..b.phi.stage1_len]);
            x
        } else {
            random_elem(rng, &primes)
        };
        xs.push(x);
    }
    let shifts: Vec<u8> = (0..k).map(|_| rng.gen_range(0..2)).collect();
    let mut value = vec![0u32; primes.len()];
    for (x, &s) in xs.iter().zip(&shifts) {
        let y = b.phi.eval(x);
        for c in 0..primes.len() {
            value[c] = add_mod(value[c], add_mod(y[c], if s == 1 { x[c] } else { 0 }, primes[c]), primes[c]);
        }
    }
    // group equal inputs
    let mut distinct: Vec<&[u32]> = Vec::new();
    let mut parts: Vec<(i64, i64)> = Vec::new();
    for (x, &s) in xs.iter().zip(&shifts) {
        match distinct.iter().position(|d| *d == x.as_slice()) {
            Some(i) => {
                parts[i].0 += 1;
                parts[i].1 += s as i64;
            }
            None => {
                distinct.push(x);
                parts.push((1, s as i64));
            }
        }
    }
    let r = route(b, &parts, &distinct)?;
    let certified = if let Some(blk) = b.phi.stage1.iter().find(|blk| blk.expr == r.expr && blk.coords.start == r.coords[0]) {
        let local: Vec<u32> = r.coords.iter().map(|&c| value[c]).collect();
        blk.certificate.contains(&local, &blk.maps.primes())
    } else {
        r.coords.iter().all(|&c| value[c] == 0)
    };
    Ok(SumSample { shifts, expression: b.plan.expressions[r.expr].to_string(), route: r, certified })
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverReport {
    pub exhaustive: bool,
    pub checked: u64,
    pub failures: u64,
    pub pass: bool,
}

/// Difference witnesses for every x when Q ≤ `exhaustive_limit`, else for
/// `samples` random x.
pub fn witness_sweep(b: &Build, exhaustive_limit: u64, samples: u64, rng: &mut impl Rng) -> CoverReport {
    let m = &b.phi.modulus;
    let primes = m.prime_values();
    let q = m.q_u64().filter(|&q| q <= exhaustive_limit && m.len() <= 64);
    let mut failures = 0;
    let checked = match q {
        Some(q) => {
            for z in 0..q {
                let x: Vec<u32> = primes.iter().map(|&p| (z % p as u64) as u32).collect();
                failures += difference_witness(b, &x).is_err() as u64;
            }
            q
        }
        None => {
            for _ in 0..samples {
                let x = random_elem(rng, &primes);
                failures += difference_witness(b, &x).is_err() as u64;
            }
            samples
        }
    };
    CoverReport { exhaustive: q.is_some(), checked, failures, pass: failures == 0 }
}
