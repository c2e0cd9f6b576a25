//! Constructed maps Z_q → Z_q, one rule per prime coordinate.

use crate::error::{Error, Result};
use crate::expr::{q_mod, Expression, Rewrite, Transform, Q};
use crate::residue::{add_mod, lift, mul_mod, project, sub_mod, Modulus, RingElem};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// A lookup table over a tuple of coordinates of the same variable,
/// indexed in mixed radix with the first coordinate most significant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoordTable {
    pub coords: Vec<usize>,
    pub table: Arc<Vec<u32>>,
}

impl CoordTable {
    pub fn new(coords: Vec<usize>, table: Vec<u32>) -> Self {
        CoordTable { coords, table: Arc::new(table) }
    }

    #[inline]
    pub fn index(&self, x: &[u32], primes: &[u32]) -> usize {
        let mut idx = 0usize;
        for &c in &self.coords {
            idx = idx * primes[c] as usize + x[c] as usize;
        }
        idx
    }

    /// Tabulates `f` over all assignments of `coords`.
    pub fn tabulate(coords: Vec<usize>, primes: &[u32], mut f: impl FnMut(&[u32]) -> u32) -> Self {
        let size: usize = coords.iter().map(|&c| primes[c] as usize).product();
        let mut table = Vec::with_capacity(size);
        let mut x = vec![0u32; primes.len()];
        for idx in 0..size {
            let mut rem = idx;
            for &c in coords.iter().rev() {
                x[c] = (rem % primes[c] as usize) as u32;
                rem /= primes[c] as usize;
            }
            table.push(f(&x));
        }
        CoordTable::new(coords, table)
    }
}

/// w · ⌊ι(x_coord) / div⌋, reduced into the target coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiftTerm {
    pub coord: usize,
    pub weight: u32,
    pub div: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Body {
    Zero,
    Lifts { terms: Vec<LiftTerm> },
    Tables { tables: Vec<CoordTable> },
    /// table[x_own · p + key(x)], key being a sum of tables reduced mod p.
    Keyed { key: Vec<CoordTable>, table: Arc<Vec<u32>> },
}

/// body(x) + own · x_c + constant on coordinate c.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub body: Body,
    pub own: u32,
    pub constant: u32,
}

impl Rule {
    pub fn zero() -> Self {
        Rule { body: Body::Zero, own: 0, constant: 0 }
    }

    /// own · x_c + constant.
    pub fn affine(own: i64, constant: i64, p: u32) -> Self {
        Rule { body: Body::Zero, own: project(own, p), constant: project(constant, p) }
    }

    /// own · x_c + constant with rational parameters.
    pub fn affine_q(own: Q, constant: Q, p: u32) -> Result<Self> {
        Ok(Rule { body: Body::Zero, own: q_mod(own, p)?, constant: q_mod(constant, p)? })
    }

    pub fn with_body(body: Body) -> Self {
        Rule { body, own: 0, constant: 0 }
    }

    pub fn is_affine(&self) -> bool {
        matches!(self.body, Body::Zero)
    }

    /// Value on coordinate `c` for a variable with residues `x`.
    #[inline]
    pub fn eval(&self, c: usize, x: &[u32], primes: &[u32]) -> u32 {
        let p = primes[c];
        let b = match &self.body {
            Body::Zero => 0,
            Body::Lifts { terms } => {
                let mut acc = 0u64;
                for t in terms {
                    let v = (x[t.coord] / t.div) % p;
                    acc += v as u64 * t.weight as u64 % p as u64;
                }
                (acc % p as u64) as u32
            }
            Body::Tables { tables } => {
                let mut acc = 0u64;
                for t in tables {
                    acc += t.table[t.index(x, primes)] as u64;
                }
                (acc % p as u64) as u32
            }
            Body::Keyed { key, table } => {
                let mut k = 0u64;
                for t in key {
                    k += t.table[t.index(x, primes)] as u64;
                }
                table[x[c] as usize * p as usize + (k % p as u64) as usize]
            }
        };
        add_mod(add_mod(b, mul_mod(self.own, x[c], p), p), self.constant, p)
    }

    /// Coordinates read by the body (not counting the own term).
    pub fn body_reads(&self, c: usize) -> Vec<usize> {
        let mut r: Vec<usize> = match &self.body {
            Body::Zero => vec![],
            Body::Lifts { terms } => terms.iter().map(|t| t.coord).collect(),
            Body::Tables { tables } => tables.iter().flat_map(|t| t.coords.iter().copied()).collect(),
            Body::Keyed { key, .. } => {
                let mut r: Vec<usize> = key.iter().flat_map(|t| t.coords.iter().copied()).collect();
                r.push(c);
                r
            }
        };
        r.sort_unstable();
        r.dedup();
        r
    }

    pub fn reads(&self, c: usize) -> Vec<usize> {
        let mut r = self.body_reads(c);
        if self.own != 0 && !r.contains(&c) {
            r.push(c);
            r.sort_unstable();
        }
        r
    }
}

/// A map Z_q → Z_q given coordinatewise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarMap {
    pub rules: Vec<Rule>,
}

impl VarMap {
    pub fn zero(n: usize) -> Self {
        VarMap { rules: vec![Rule::zero(); n] }
    }

    pub fn eval(&self, x: &[u32], primes: &[u32]) -> Vec<u32> {
        self.rules.iter().enumerate().map(|(c, r)| r.eval(c, x, primes)).collect()
    }
}

/// Maps for every variable of an expression over one modulus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapSet {
    pub modulus: Arc<Modulus>,
    pub vars: Vec<VarMap>,
}

impl MapSet {
    pub fn zero(modulus: Arc<Modulus>, nvars: usize) -> Self {
        let n = modulus.len();
        MapSet { modulus, vars: vec![VarMap::zero(n); nvars] }
    }

    pub fn primes(&self) -> Vec<u32> {
        self.modulus.prime_values()
    }

    pub fn set(&mut self, var: usize, coord: usize, rule: Rule) {
        self.vars[var].rules[coord] = rule;
    }

    pub fn rule(&self, var: usize, coord: usize) -> &Rule {
        &self.vars[var].rules[coord]
    }

    /// α_var(x) as a ring element.
    pub fn apply(&self, var: usize, x: &RingElem) -> Result<RingElem> {
        if **x.modulus() != *self.modulus {
            return Err(Error::ModulusMismatch);
        }
        let primes = self.primes();
        RingElem::new(self.modulus.clone(), self.vars[var].eval(x.residues(), &primes))
    }

    /// Maps for the original expression, given maps for `t.apply(original)`.
    pub fn pull_back(&self, t: &Transform) -> Result<MapSet> {
        let primes = self.primes();
        let mut cur = self.clone();
        for step in t.steps.iter().rev() {
            match step {
                Rewrite::Rename { perm } => {
                    let n = self.modulus.len();
                    let vars = perm
                        .iter()
                        .map(|&new| cur.vars.get(new as usize).cloned().unwrap_or_else(|| VarMap::zero(n)))
                        .collect();
                    cur.vars = vars;
                }
                Rewrite::Shift { var, a } => {
                    if let Some(vm) = cur.vars.get_mut(*var as usize) {
                        for (c, r) in vm.rules.iter_mut().enumerate() {
                            r.own = sub_mod(r.own, q_mod(*a, primes[c])?, primes[c]);
                        }
                    }
                }
                Rewrite::Scale { .. } | Rewrite::Regroup { .. } => {}
            }
        }
        Ok(cur)
    }
}

/// Direct evaluation of an expression at one point; an implementation
/// independent of the compiled program used by the verifier.
pub fn evaluate(e: &Expression, maps: &MapSet, point: &[RingElem]) -> Result<RingElem> {
    let m = maps.modulus.clone();
    for x in point {
        if **x.modulus() != *m {
            return Err(Error::ModulusMismatch);
        }
    }
    let primes = maps.primes();
    let alphas: Vec<Vec<u32>> = point
        .iter()
        .enumerate()
        .map(|(v, x)| maps.vars.get(v).map(|vm| vm.eval(x.residues(), &primes)).unwrap_or_else(|| vec![0; primes.len()]))
        .collect();
    let mut out = Vec::with_capacity(primes.len());
    for (c, &p) in primes.iter().enumerate() {
        let mut acc = 0u32;
        for t in &e.terms {
            let mut prod = q_mod(t.coeff, p)?;
            for a in &t.factors {
                let v = a.var as usize;
                let f = add_mod(alphas[v][c], mul_mod(q_mod(a.shift, p)?, point[v].residues()[c], p), p);
                prod = mul_mod(prod, f, p);
            }
            acc = add_mod(acc, prod, p);
        }
        for (v, l) in e.linear.iter().enumerate() {
            if l.is_zero() {
                continue;
            }
            let a = mul_mod(q_mod(l.lambda, p)?, alphas[v][c], p);
            let x = mul_mod(q_mod(l.mu, p)?, point[v].residues()[c], p);
            acc = add_mod(acc, add_mod(a, x, p), p);
        }
        out.push(acc);
    }
    RingElem::new(m, out)
}

/// ι(x) of a residue as a lift weight helper.
pub fn lift_u32(x: u32) -> i64 {
    lift(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn m(ps: &[u64]) -> Arc<Modulus> {
        Arc::new(Modulus::from_u64s(ps).unwrap())
    }

    #[test]
    fn negation_map_cancels() {
        let md = m(&[5, 7]);
        let mut maps = MapSet::zero(md.clone(), 1);
        for (c, &p) in [5u32, 7].iter().enumerate() {
            maps.set(0, c, Rule::affine(-1, 0, p));
        }
        let e = parse("a(x) + x").unwrap();
        for z in 0..35i64 {
            let x = RingElem::constant(md.clone(), z);
            let v = evaluate(&e, &maps, &[x]).unwrap();
            assert_eq!(v.residues(), &[0, 0]);
        }
    }

    #[test]
    fn rule_bodies() {
        let primes = [5u32, 7];
        let lifts = Rule { body: Body::Lifts { terms: vec![LiftTerm { coord: 1, weight: 2, div: 3 }] }, own: 1, constant: 1 };
        // 2·⌊6/3⌋ + 4 + 1 = 9 ≡ 4 mod 5
        assert_eq!(lifts.eval(0, &[4, 6], &primes), 4);
        assert_eq!(lifts.reads(0), vec![0, 1]);
        let t = CoordTable::tabulate(vec![0, 1], &primes, |x| (x[0] * 7 + x[1]) % 7);
        assert_eq!(t.table.len(), 35);
        let tab = Rule::with_body(Body::Tables { tables: vec![t] });
        assert_eq!(tab.eval(1, &[2, 3], &primes), 3);
        let keyed = Rule::with_body(Body::Keyed {
            key: vec![CoordTable::new(vec![0], vec![0, 1, 2, 3, 4])],
            table: Arc::new((0..49).map(|i| i % 7).collect()),
        });
        assert_eq!(keyed.eval(1, &[3, 2], &primes), 3);
        assert_eq!(keyed.reads(1), vec![0, 1]);
    }

    #[test]
    fn pull_back_through_shift_and_rename() {
        let e = parse("(a(x)+x)*b(y) + b(y)").unwrap();
        let c = crate::expr::classify(&e).unwrap();
        let md = m(&[7]);
        let mut maps = MapSet::zero(md.clone(), 2);
        maps.set(0, 0, Rule::affine(2, 1, 7));
        maps.set(1, 0, Rule::affine(3, 5, 7));
        let back = maps.pull_back(&c.transform).unwrap();
        let s = c.transform.total_scale();
        for a in 0..7 {
            for b in 0..7 {
                let pt = [RingElem::constant(md.clone(), a), RingElem::constant(md.clone(), b)];
                let v0 = evaluate(&e, &back, &pt).unwrap();
                let v1 = evaluate(&c.normalized, &maps, &pt).unwrap();
                assert_eq!(mul_mod(v0.residues()[0], q_mod(s, 7).unwrap(), 7), v1.residues()[0]);
            }
        }
    }
}
