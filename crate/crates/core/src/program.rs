//! An expression compiled against concrete maps: per-coordinate pieces with
//! exact read sets, used for footprint-reduced enumeration.

use crate::cert::Certificate;
use crate::error::{Error, Result};
use crate::expr::{q_mod, Expression};
use crate::maps::{CoordTable, MapSet};
use crate::residue::{add_mod, inv_mod, lift, mul_mod};
use crate::zset::ZSet;
use num_bigint::BigUint;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeSet, HashSet};

/// A (variable, coordinate) pair read during evaluation.
pub type Input = (usize, usize);

#[derive(Debug, Clone)]
struct Factor {
    var: usize,
    shift: u32,
}

#[derive(Debug, Clone)]
enum PTerm {
    Prod { coeff: u32, factors: Vec<Factor> },
    Lin { var: usize, lambda: u32, mu: u32 },
}

/// Part of one coordinate's value: either all terms of a single variable or
/// one mixed product.
#[derive(Debug, Clone)]
pub struct Piece {
    pub vars: Vec<usize>,
    pub inputs: Vec<Input>,
    terms: Vec<PTerm>,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub constant: u32,
    pub pieces: Vec<Piece>,
}

#[derive(Debug, Clone)]
pub struct Program {
    pub primes: Vec<u32>,
    pub nvars: usize,
    pub rows: Vec<Row>,
    maps: MapSet,
}

/// Variables coupled by mixed pieces, with everything they read.
#[derive(Debug, Clone)]
pub struct Group {
    pub vars: Vec<usize>,
    pub inputs: Vec<Input>,
    /// (row, piece index) pairs.
    pub pieces: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockStat {
    pub inputs: Vec<Input>,
    pub domain: u64,
    pub values: u64,
}

/// The allowed set of a linear-functional certificate and how it was built.
#[derive(Debug, Clone, Serialize)]
pub struct FunctionalSet {
    pub star: usize,
    pub allowed: Vec<u32>,
    pub blocks: Vec<BlockStat>,
    /// Per coordinate, the range of carry multiples accounted for.
    pub carries: Vec<(i64, i64)>,
}

/// Image restricted to a set of coordinates, indexed by CRT over them.
#[derive(Debug, Clone)]
pub struct Cluster {
    pub rows: Vec<usize>,
    pub q: u64,
    basis: Vec<u64>,
    pub set: ZSet,
}

impl Cluster {
    fn encode(&self, v: &[(usize, u32)]) -> u64 {
        let mut acc = 0u128;
        for &(c, r) in v {
            let k = self.rows.iter().position(|&x| x == c).expect("row in cluster");
            acc += self.basis[k] as u128 * r as u128;
        }
        (acc % self.q as u128) as u64
    }

    /// Residues on `rows` of an encoded value.
    pub fn decode(&self, idx: u64, primes: &[u32]) -> Vec<u32> {
        self.rows.iter().map(|&c| (idx % primes[c] as u64) as u32).collect()
    }
}

/// Exact image of an expression under its maps: the direct product of the
/// cluster images.
#[derive(Debug, Clone)]
pub struct Image {
    pub clusters: Vec<Cluster>,
    /// Total number of points enumerated across groups.
    pub points: u64,
    primes: Vec<u32>,
}

impl Image {
    pub fn size(&self) -> BigUint {
        self.clusters.iter().map(|c| BigUint::from(c.set.len())).product()
    }

    /// All image elements as full residue vectors, if there are at most `limit`.
    pub fn values(&self, limit: u64) -> Option<Vec<Vec<u32>>> {
        let size: u64 = self.size().try_into().ok()?;
        if size > limit {
            return None;
        }
        let n = self.primes.len();
        let mut out = vec![vec![0u32; n]];
        for cl in &self.clusters {
            let parts: Vec<Vec<u32>> = cl.set.to_vec().into_iter().map(|i| cl.decode(i, &self.primes)).collect();
            let mut next = Vec::with_capacity(out.len() * parts.len());
            for v in &out {
                for part in &parts {
                    let mut w = v.clone();
                    for (k, &c) in cl.rows.iter().enumerate() {
                        w[c] = part[k];
                    }
                    next.push(w);
                }
            }
            out = next;
        }
        out.sort();
        Some(out)
    }
}

fn union_find(n: usize) -> Vec<usize> {
    (0..n).collect()
}

fn find(uf: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while uf[r] != r {
        r = uf[r];
    }
    let mut y = x;
    while uf[y] != r {
        let next = uf[y];
        uf[y] = r;
        y = next;
    }
    r
}

fn union(uf: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(uf, a), find(uf, b));
    if ra != rb {
        uf[ra.max(rb)] = ra.min(rb);
    }
}

/// Product of the primes of the input coordinates.
pub fn domain_size(inputs: &[Input], primes: &[u32]) -> Option<u64> {
    inputs.iter().try_fold(1u64, |acc, &(_, c)| acc.checked_mul(primes[c] as u64))
}

const CHUNK: u64 = 1 << 14;

/// Enumerates every assignment of `inputs` in parallel. Unlisted residues
/// are left at zero. The fold must be order independent for determinism.
pub fn par_enumerate<A, I, S, M>(inputs: &[Input], primes: &[u32], nvars: usize, init: I, step: S, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    S: Fn(&mut A, &[Vec<u32>]) + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    let total = domain_size(inputs, primes).expect("domain overflow");
    let chunks = total.div_ceil(CHUNK).max(1);
    (0..chunks)
        .into_par_iter()
        .map(|ch| {
            let mut acc = init();
            let mut xs = vec![vec![0u32; primes.len()]; nvars];
            let start = ch * CHUNK;
            let end = (start + CHUNK).min(total);
            let mut rem = start;
            for &(v, c) in inputs.iter().rev() {
                xs[v][c] = (rem % primes[c] as u64) as u32;
                rem /= primes[c] as u64;
            }
            for _ in start..end {
                step(&mut acc, &xs);
                for &(v, c) in inputs.iter().rev() {
                    xs[v][c] += 1;
                    if xs[v][c] < primes[c] {
                        break;
                    }
                    xs[v][c] = 0;
                }
            }
            acc
        })
        .reduce(&init, &merge)
}

impl Program {
    pub fn compile(e: &Expression, maps: &MapSet) -> Result<Program> {
        let primes = maps.primes();
        let nvars = e.num_vars();
        if maps.vars.len() < nvars {
            return Err(Error::Precondition(format!("maps cover {} of {} variables", maps.vars.len(), nvars)));
        }
        let mut rows = Vec::with_capacity(primes.len());
        for (c, &p) in primes.iter().enumerate() {
            let mut constant = 0u32;
            let mut single: Vec<Vec<PTerm>> = vec![Vec::new(); nvars];
            let mut cross: Vec<PTerm> = Vec::new();
            for t in &e.terms {
                let mut coeff = q_mod(t.coeff, p)?;
                let mut live = Vec::new();
                for a in &t.factors {
                    let v = a.var as usize;
                    let s = q_mod(a.shift, p)?;
                    let r = maps.rule(v, c);
                    if r.is_affine() && add_mod(r.own, s, p) == 0 {
                        coeff = mul_mod(coeff, r.constant, p);
                    } else {
                        live.push(Factor { var: v, shift: s });
                    }
                }
                if coeff == 0 {
                    continue;
                }
                let mut vars: Vec<usize> = live.iter().map(|f| f.var).collect();
                vars.sort_unstable();
                vars.dedup();
                let term = PTerm::Prod { coeff, factors: live };
                match vars.len() {
                    0 => constant = add_mod(constant, coeff, p),
                    1 => single[vars[0]].push(term),
                    _ => cross.push(term),
                }
            }
            for (v, l) in e.linear.iter().enumerate() {
                let lambda = q_mod(l.lambda, p)?;
                let mu = q_mod(l.mu, p)?;
                if lambda == 0 && mu == 0 {
                    continue;
                }
                let r = maps.rule(v, c);
                if r.is_affine() && add_mod(mul_mod(lambda, r.own, p), mu, p) == 0 {
                    constant = add_mod(constant, mul_mod(lambda, r.constant, p), p);
                } else {
                    single[v].push(PTerm::Lin { var: v, lambda, mu });
                }
            }
            let mut pieces = Vec::new();
            for (v, terms) in single.into_iter().enumerate() {
                if !terms.is_empty() {
                    pieces.push(Self::piece(terms, maps, c, vec![v]));
                }
            }
            for t in cross {
                let mut vars: Vec<usize> = match &t {
                    PTerm::Prod { factors, .. } => factors.iter().map(|f| f.var).collect(),
                    PTerm::Lin { .. } => unreachable!(),
                };
                vars.sort_unstable();
                vars.dedup();
                pieces.push(Self::piece(vec![t], maps, c, vars));
            }
            rows.push(Row { constant, pieces });
        }
        Ok(Program { primes, nvars, rows, maps: maps.clone() })
    }

    fn piece(terms: Vec<PTerm>, maps: &MapSet, c: usize, vars: Vec<usize>) -> Piece {
        let p = maps.modulus.prime(c);
        let mut inputs = BTreeSet::new();
        for t in &terms {
            match t {
                PTerm::Prod { factors, .. } => {
                    for f in factors {
                        let r = maps.rule(f.var, c);
                        inputs.extend(r.body_reads(c).into_iter().map(|k| (f.var, k)));
                        if add_mod(r.own, f.shift, p) != 0 {
                            inputs.insert((f.var, c));
                        }
                    }
                }
                PTerm::Lin { var, lambda, mu } => {
                    let r = maps.rule(*var, c);
                    if *lambda != 0 {
                        inputs.extend(r.body_reads(c).into_iter().map(|k| (*var, k)));
                    }
                    if add_mod(mul_mod(*lambda, r.own, p), *mu, p) != 0 {
                        inputs.insert((*var, c));
                    }
                }
            }
        }
        Piece { vars, inputs: inputs.into_iter().collect(), terms }
    }

    /// Index of the single-variable piece of `var` in `row`.
    pub fn single_piece(&self, row: usize, var: usize) -> Option<usize> {
        self.rows[row].pieces.iter().position(|pc| pc.vars == [var])
    }

    /// Tabulates a single-variable piece over the coordinates it reads,
    /// applying `f` to each residue.
    pub fn tabulate_piece(&self, row: usize, idx: usize, f: impl Fn(u32) -> u32) -> CoordTable {
        let pc = &self.rows[row].pieces[idx];
        let var = pc.vars[0];
        let coords: Vec<usize> = pc.inputs.iter().map(|&(_, c)| c).collect();
        let mut xs = vec![vec![0u32; self.primes.len()]; self.nvars];
        CoordTable::tabulate(coords, &self.primes, |x| {
            xs[var].copy_from_slice(x);
            f(self.eval_piece(pc, row, &xs))
        })
    }

    pub fn maps(&self) -> &MapSet {
        &self.maps
    }

    fn eval_piece(&self, piece: &Piece, c: usize, xs: &[Vec<u32>]) -> u32 {
        let p = self.primes[c];
        let mut acc = 0u32;
        for t in &piece.terms {
            let v = match t {
                PTerm::Prod { coeff, factors } => {
                    let mut prod = *coeff;
                    for f in factors {
                        let x = &xs[f.var];
                        let a = self.maps.rule(f.var, c).eval(c, x, &self.primes);
                        prod = mul_mod(prod, add_mod(a, mul_mod(f.shift, x[c], p), p), p);
                    }
                    prod
                }
                PTerm::Lin { var, lambda, mu } => {
                    let x = &xs[*var];
                    let a = if *lambda != 0 { self.maps.rule(*var, c).eval(c, x, &self.primes) } else { 0 };
                    add_mod(mul_mod(*lambda, a, p), mul_mod(*mu, x[c], p), p)
                }
            };
            acc = add_mod(acc, v, p);
        }
        acc
    }

    /// Value of the expression at the point `xs` (one residue vector per variable).
    pub fn eval(&self, xs: &[Vec<u32>]) -> Vec<u32> {
        self.rows
            .iter()
            .enumerate()
            .map(|(c, row)| {
                let p = self.primes[c];
                row.pieces.iter().fold(row.constant, |acc, pc| add_mod(acc, self.eval_piece(pc, c, xs), p))
            })
            .collect()
    }

    /// Per coordinate, the (variable, coordinate) pairs read.
    pub fn footprint(&self) -> Vec<Vec<Input>> {
        self.rows
            .iter()
            .map(|row| {
                let s: BTreeSet<Input> = row.pieces.iter().flat_map(|p| p.inputs.iter().copied()).collect();
                s.into_iter().collect()
            })
            .collect()
    }

    /// Pieces joined by shared inputs. Distinct groups read disjoint inputs,
    /// so the image is the sum of the group images.
    pub fn groups(&self) -> Vec<Group> {
        let all: Vec<(usize, usize)> =
            self.rows.iter().enumerate().flat_map(|(c, r)| (0..r.pieces.len()).map(move |i| (c, i))).collect();
        let mut uf = union_find(all.len());
        let mut owner: std::collections::HashMap<Input, usize> = std::collections::HashMap::new();
        for (k, &(c, i)) in all.iter().enumerate() {
            for inp in &self.rows[c].pieces[i].inputs {
                match owner.get(inp) {
                    Some(&o) => union(&mut uf, o, k),
                    None => {
                        owner.insert(*inp, k);
                    }
                }
            }
        }
        let mut out: Vec<Group> = Vec::new();
        let mut slot = vec![usize::MAX; all.len()];
        for (k, &(c, i)) in all.iter().enumerate() {
            let r = find(&mut uf, k);
            if slot[r] == usize::MAX {
                slot[r] = out.len();
                out.push(Group { vars: vec![], inputs: vec![], pieces: vec![] });
            }
            let g = &mut out[slot[r]];
            let pc = &self.rows[c].pieces[i];
            g.pieces.push((c, i));
            g.vars.extend(pc.vars.iter().copied());
            g.inputs.extend(pc.inputs.iter().copied());
        }
        for g in &mut out {
            g.vars.sort_unstable();
            g.vars.dedup();
            g.inputs.sort_unstable();
            g.inputs.dedup();
        }
        out
    }

    /// Points that a footprint-reduced enumeration visits.
    pub fn reduced_points(&self) -> Option<u64> {
        self.groups().iter().try_fold(0u64, |acc, g| acc.checked_add(domain_size(&g.inputs, &self.primes)?))
    }

    /// Exact image. Each group is enumerated over its own inputs; groups
    /// sharing a coordinate are combined by sumset into one cluster, and
    /// clusters on disjoint coordinates form a direct product.
    pub fn image(&self, budget: u64) -> Result<Image> {
        let points = self.reduced_points().ok_or_else(|| Error::Budget("footprint overflow".into()))?;
        if points > budget {
            return Err(Error::Budget(format!("{points} footprint points exceed {budget}")));
        }
        let groups = self.groups();
        let n = self.primes.len();
        // cluster rows: rows touched by a common group
        let mut uf = union_find(n);
        for g in &groups {
            let rows: Vec<usize> = g.pieces.iter().map(|&(c, _)| c).collect();
            for w in rows.windows(2) {
                union(&mut uf, w[0], w[1]);
            }
        }
        let mut clusters: Vec<Cluster> = Vec::new();
        let mut slot = vec![usize::MAX; n];
        for c in 0..n {
            let r = find(&mut uf, c);
            if slot[r] == usize::MAX {
                slot[r] = clusters.len();
                clusters.push(Cluster { rows: vec![], q: 1, basis: vec![], set: ZSet::new(1) });
            }
            clusters[slot[r]].rows.push(c);
        }
        for cl in &mut clusters {
            let ps: Vec<u32> = cl.rows.iter().map(|&c| self.primes[c]).collect();
            cl.q = ps
                .iter()
                .try_fold(1u64, |a, &p| a.checked_mul(p as u64))
                .ok_or_else(|| Error::Budget("cluster modulus exceeds 64 bits".into()))?;
            cl.basis = ps
                .iter()
                .map(|&p| {
                    let m = cl.q / p as u64;
                    let inv = inv_mod((m % p as u64) as u32, p).expect("distinct primes");
                    ((m as u128 * inv as u128) % cl.q as u128) as u64
                })
                .collect();
            let consts: Vec<(usize, u32)> = cl.rows.iter().map(|&c| (c, self.rows[c].constant)).collect();
            cl.set = ZSet::from_iter(cl.q, [cl.encode(&consts)]);
        }
        for g in &groups {
            let cl = &clusters[slot[find(&mut uf, g.pieces[0].0)]];
            let vals: HashSet<u64> = par_enumerate(
                &g.inputs,
                &self.primes,
                self.nvars,
                HashSet::new,
                |acc, xs| {
                    let mut sums: Vec<(usize, u32)> = Vec::with_capacity(g.pieces.len());
                    for &(c, i) in &g.pieces {
                        let v = self.eval_piece(&self.rows[c].pieces[i], c, xs);
                        match sums.iter_mut().find(|(k, _)| *k == c) {
                            Some(e) => e.1 = add_mod(e.1, v, self.primes[c]),
                            None => sums.push((c, v)),
                        }
                    }
                    acc.insert(cl.encode(&sums));
                },
                merge_sets,
            );
            let gs = ZSet::from_iter(cl.q, vals);
            let k = slot[find(&mut uf, g.pieces[0].0)];
            clusters[k].set = clusters[k].set.sumset(&gs, budget.saturating_mul(64))?;
        }
        Ok(Image { clusters, points, primes: self.primes.clone() })
    }

    /// The allowed set S of the functional Φ(v) = Σ_c mod_{p_c,p*}(s_c v_c + o_c)
    /// over all values of the expression. Single-variable pieces of a variable
    /// form one block; mixed pieces form blocks joined by shared inputs.
    /// Every block is enumerated exactly and the carries of each coordinate
    /// are bounded from the exact lifts, so S is a sound superset.
    pub fn functional_set(&self, star: usize, scale: &[u32], offset: &[u32], budget: u64) -> Result<FunctionalSet> {
        let ps = self.primes[star];
        // blocks: lists of (row, piece)
        let mut blocks: Vec<Vec<(usize, usize)>> = vec![Vec::new(); self.nvars];
        let mut cross: Vec<(usize, usize)> = Vec::new();
        for (c, row) in self.rows.iter().enumerate() {
            for (i, pc) in row.pieces.iter().enumerate() {
                if pc.vars.len() == 1 {
                    blocks[pc.vars[0]].push((c, i));
                } else {
                    cross.push((c, i));
                }
            }
        }
        blocks.retain(|b| !b.is_empty());
        let mut uf = union_find(cross.len());
        for a in 0..cross.len() {
            for b in a + 1..cross.len() {
                let ia = &self.rows[cross[a].0].pieces[cross[a].1].inputs;
                let ib = &self.rows[cross[b].0].pieces[cross[b].1].inputs;
                if ia.iter().any(|x| ib.contains(x)) {
                    union(&mut uf, a, b);
                }
            }
        }
        let mut cross_blocks: Vec<Vec<(usize, usize)>> = vec![Vec::new(); cross.len()];
        for (k, &pc) in cross.iter().enumerate() {
            let r = find(&mut uf, k);
            cross_blocks[r].push(pc);
        }
        blocks.extend(cross_blocks.into_iter().filter(|b| !b.is_empty()));

        let consts: Vec<u32> = self
            .rows
            .iter()
            .enumerate()
            .map(|(c, row)| add_mod(mul_mod(scale[c], row.constant, self.primes[c]), offset[c], self.primes[c]))
            .collect();
        let mut fblocks = Vec::new();
        for b in &blocks {
            let mut inputs: Vec<Input> = b.iter().flat_map(|&(c, i)| self.rows[c].pieces[i].inputs.iter().copied()).collect();
            inputs.sort_unstable();
            inputs.dedup();
            let domain = domain_size(&inputs, &self.primes).ok_or_else(|| Error::Budget("block domain overflow".into()))?;
            if domain > budget {
                return Err(Error::Budget(format!("block of {domain} points exceeds {budget}")));
            }
            let mut rows: Vec<usize> = b.iter().map(|&(c, _)| c).collect();
            rows.sort_unstable();
            rows.dedup();
            let acc = par_enumerate(
                &inputs,
                &self.primes,
                self.nvars,
                || BlockAcc::new(ps, rows.len()),
                |acc, xs| {
                    let vals = rows.iter().map(|&c| {
                        let p = self.primes[c];
                        let mut v = 0u32;
                        for &(rc, i) in b {
                            if rc == c {
                                v = add_mod(v, self.eval_piece(&self.rows[c].pieces[i], c, xs), p);
                            }
                        }
                        mul_mod(scale[c], v, p)
                    });
                    acc.record(vals, ps);
                },
                BlockAcc::merge,
            );
            fblocks.push(acc.finish(rows, inputs, domain));
        }
        combine_functional(&self.primes, star, &consts, fblocks)
    }

    /// Builds the linear-functional certificate from [`Program::functional_set`].
    pub fn functional_certificate(&self, star: usize, scale: Vec<u32>, offset: Vec<u32>, budget: u64) -> Result<(Certificate, FunctionalSet)> {
        let fs = self.functional_set(star, &scale, &offset, budget)?;
        let cert = Certificate::linear_functional(&self.maps.modulus, star, scale, offset, fs.allowed.clone());
        Ok((cert, fs))
    }
}

/// Running data for one block of the functional: which Φ-values occur, and
/// per row the range of the lifted contributions.
#[derive(Debug, Clone)]
pub struct BlockAcc {
    bits: Vec<u64>,
    min: Vec<i64>,
    max: Vec<i64>,
}

impl BlockAcc {
    pub fn new(p_star: u32, rows: usize) -> Self {
        BlockAcc { bits: vec![0; (p_star as usize).div_ceil(64)], min: vec![i64::MAX; rows], max: vec![i64::MIN; rows] }
    }

    /// Records one point given its (already scaled) residue per block row.
    #[inline]
    pub fn record(&mut self, vals: impl Iterator<Item = u32>, p_star: u32) {
        let mut phi = 0u64;
        for (k, v) in vals.enumerate() {
            let w = lift(v);
            self.min[k] = self.min[k].min(w);
            self.max[k] = self.max[k].max(w);
            phi += w as u64 % p_star as u64;
        }
        let phi = (phi % p_star as u64) as usize;
        self.bits[phi / 64] |= 1 << (phi % 64);
    }

    pub fn merge(mut self, other: BlockAcc) -> BlockAcc {
        for (x, y) in self.bits.iter_mut().zip(&other.bits) {
            *x |= y;
        }
        for k in 0..self.min.len() {
            self.min[k] = self.min[k].min(other.min[k]);
            self.max[k] = self.max[k].max(other.max[k]);
        }
        self
    }

    pub fn finish(self, rows: Vec<usize>, inputs: Vec<Input>, domain: u64) -> FunctionalBlock {
        let mut phi = Vec::new();
        for (i, &w) in self.bits.iter().enumerate() {
            let mut w = w;
            while w != 0 {
                phi.push(i as u64 * 64 + w.trailing_zeros() as u64);
                w &= w - 1;
            }
        }
        let values = phi.len() as u64;
        FunctionalBlock { phi, rows, min: self.min, max: self.max, stat: BlockStat { inputs, domain, values } }
    }
}

/// One enumerated block: its Φ-values and per-row lift ranges.
#[derive(Debug, Clone)]
pub struct FunctionalBlock {
    pub phi: Vec<u64>,
    pub rows: Vec<usize>,
    pub min: Vec<i64>,
    pub max: Vec<i64>,
    pub stat: BlockStat,
}

/// Sums block value sets, the constant and the carry sets in Z_{p*}.
/// `consts[c]` is the scaled and offset constant residue of row c.
pub fn combine_functional(primes: &[u32], star: usize, consts: &[u32], blocks: Vec<FunctionalBlock>) -> Result<FunctionalSet> {
    let ps = primes[star] as u64;
    let n = primes.len();
    let mut sum_min = vec![0i64; n];
    let mut sum_max = vec![0i64; n];
    let mut c0 = 0u64;
    for c in 0..n {
        let w = lift(consts[c]);
        sum_min[c] += w;
        sum_max[c] += w;
        c0 += w as u64 % ps;
    }
    let mut total = ZSet::from_iter(ps, [c0 % ps]);
    let mut stats = Vec::new();
    for b in blocks {
        for (k, &c) in b.rows.iter().enumerate() {
            sum_min[c] += b.min[k];
            sum_max[c] += b.max[k];
        }
        total = total.sumset(&ZSet::from_iter(ps, b.phi.iter().copied()), u64::MAX)?;
        stats.push(b.stat);
    }
    // ι(Σ w_k mod p) = Σ ι(w_k) − m·p with Σ ι(w_k) ∈ [sum_min, sum_max]
    let mut carries = Vec::with_capacity(n);
    for c in 0..n {
        let p = primes[c] as i64;
        let lo = (sum_min[c] - (p - 1)).max(0);
        let lo = lo / p + i64::from(lo % p != 0);
        let hi = sum_max[c] / p;
        carries.push((lo, hi));
        let cs = ZSet::from_iter(ps, (lo..=hi).map(|m| (-m * p).rem_euclid(ps as i64) as u64));
        total = total.sumset(&cs, u64::MAX)?;
    }
    let allowed = total.to_vec().into_iter().map(|x| x as u32).collect();
    Ok(FunctionalSet { star, allowed, blocks: stats, carries })
}

fn merge_sets(mut a: HashSet<u64>, mut b: HashSet<u64>) -> HashSet<u64> {
    if a.len() < b.len() {
        std::mem::swap(&mut a, &mut b);
    }
    a.extend(b);
    a
}
