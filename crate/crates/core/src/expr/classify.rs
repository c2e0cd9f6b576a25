//! Case dispatch for expressions arising from lA² + kA with l ≤ 3.

use super::transform::{expand, Rewrite, Transform};
use super::{build_graph, Atom, Expression, Linear, Term, Var, Q};
use crate::error::{Error, Result};
use num_traits::{One, Signed, Zero};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CaseTag {
    SingleVar,
    Affine,
    BasicIdent,
    AcyclicIdent,
    SplitSingleVars,
    ThreeCycleClosed,
    ThreeCycleDegenerate,
    ThreeCycleFivePrime,
    RepeatedEdgePlusPoly,
    ProbTwoVar,
    FinalPqSimple,
    FinalPqProb,
}

impl CaseTag {
    pub fn name(self) -> &'static str {
        match self {
            CaseTag::SingleVar => "SINGLE_VAR",
            CaseTag::Affine => "AFFINE",
            CaseTag::BasicIdent => "BASIC_IDENT",
            CaseTag::AcyclicIdent => "ACYCLIC_IDENT",
            CaseTag::SplitSingleVars => "SPLIT_SINGLE_VARS",
            CaseTag::ThreeCycleClosed => "THREE_CYCLE_CLOSED",
            CaseTag::ThreeCycleDegenerate => "THREE_CYCLE_DEGENERATE",
            CaseTag::ThreeCycleFivePrime => "THREE_CYCLE_FIVE_PRIME",
            CaseTag::RepeatedEdgePlusPoly => "REPEATED_EDGE_PLUS_POLY",
            CaseTag::ProbTwoVar => "PROB_TWO_VAR",
            CaseTag::FinalPqSimple => "FINAL_PQ_SIMPLE",
            CaseTag::FinalPqProb => "FINAL_PQ_PROB",
        }
    }

    pub fn handler(self) -> &'static str {
        match self {
            CaseTag::SingleVar => "single_var_construct",
            CaseTag::Affine => "affine_solve",
            CaseTag::BasicIdent => "basic_ident",
            CaseTag::AcyclicIdent => "acyclic_ident",
            CaseTag::SplitSingleVars => "split_single_vars",
            CaseTag::ThreeCycleClosed => "three_cycle_closed_form",
            CaseTag::ThreeCycleDegenerate => "three_cycle_degenerate",
            CaseTag::ThreeCycleFivePrime => "three_cycle_five_prime",
            CaseTag::RepeatedEdgePlusPoly => "repeated_edge_plus_isolated",
            CaseTag::ProbTwoVar => "prob_two_var",
            CaseTag::FinalPqSimple => "final_pq_simple",
            CaseTag::FinalPqProb => "final_pq",
        }
    }
}

/// (α + c1 x)(β + c2 y) + (β + c3 y)(γ + c4 z) + (γ + c5 z)(α + c6 x) + linear.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleCoeffs {
    pub c: [Q; 6],
    pub lin: [Linear; 3],
}

/// αβ + (α + c1 x)(β + c2 y) + αγ + linear.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinalExpCoeffs {
    pub c1: Q,
    pub c2: Q,
    pub lin: [Linear; 3],
}

/// k1·αβ + k2·(α + ν1 x)(β + ν2 y) on variables (x, y).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineBlock {
    pub vars: (Var, Var),
    pub k1: Q,
    pub k2: Q,
    pub nu1: Q,
    pub nu2: Q,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum CaseParams {
    None,
    Affine(AffineBlock),
    /// αβ + λ1 α + μ1 x + λ2 β + μ2 y on variables 0, 1, plus an optional
    /// block cancelled by affine maps.
    Basic { lin: [Linear; 2], affine_block: Option<AffineBlock> },
    Cycle(CycleCoeffs),
    RepeatedEdge { block: AffineBlock, poly_var: Var },
    ProbTwoVar { n: [i64; 7], lin: [Linear; 2] },
    FinalExp(FinalExpCoeffs),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classified {
    pub tag: CaseTag,
    pub transform: Transform,
    /// The expression after applying `transform`.
    pub normalized: Expression,
    pub params: CaseParams,
}

fn unsupported(e: &Expression, why: &str) -> Error {
    Error::Unsupported(format!("{e}: {why}"))
}

/// Merges pairs of mixed terms on the same variable pair that share a
/// factor: c₁ = c₃ or c₂ = c₄ lets the pair factor further.
fn factorize(e: &Expression) -> Expression {
    let mut terms = e.terms.clone();
    'again: loop {
        for i in 0..terms.len() {
            for j in i + 1..terms.len() {
                let (a, b) = (&terms[i], &terms[j]);
                if !a.is_mixed() || !b.is_mixed() || a.degree() != 2 || b.degree() != 2 || a.vars() != b.vars() {
                    continue;
                }
                let sum = a.coeff + b.coeff;
                if sum.is_zero() {
                    continue;
                }
                let merged = if a.factors[0] == b.factors[0] {
                    let s = (a.coeff * a.factors[1].shift + b.coeff * b.factors[1].shift) / sum;
                    Some(vec![a.factors[0], Atom { var: a.factors[1].var, shift: s }])
                } else if a.factors[1] == b.factors[1] {
                    let s = (a.coeff * a.factors[0].shift + b.coeff * b.factors[0].shift) / sum;
                    Some(vec![Atom { var: a.factors[0].var, shift: s }, a.factors[1]])
                } else {
                    None
                };
                if let Some(factors) = merged {
                    let t = Term { factors, coeff: sum };
                    terms.remove(j);
                    terms[i] = t;
                    continue 'again;
                }
            }
        }
        break;
    }
    let mut out = Expression::new(terms, e.linear.clone()).normalized();
    out.terms.sort();
    out
}

fn perm_for(order: &[Var], n: usize) -> Vec<Var> {
    // order[new] = old  →  perm[old] = new
    let mut perm = vec![Var::MAX; n];
    for (new, &old) in order.iter().enumerate() {
        perm[old as usize] = new as Var;
    }
    let mut next = order.len() as Var;
    for p in perm.iter_mut() {
        if *p == Var::MAX {
            *p = next;
            next += 1;
        }
    }
    perm
}

struct Builder {
    t: Transform,
    cur: Expression,
}

impl Builder {
    fn step(&mut self, r: Rewrite) {
        self.t.push(r);
        self.cur = Transform { steps: vec![self.t.steps.last().unwrap().clone()] }.apply(&self.cur);
    }

    fn rename(&mut self, order: &[Var]) {
        let perm = perm_for(order, self.cur.num_vars());
        if perm.iter().enumerate().any(|(i, &p)| p as usize != i) {
            self.step(Rewrite::Rename { perm });
        }
    }

    fn shift(&mut self, var: Var, a: Q) {
        if !a.is_zero() {
            self.step(Rewrite::Shift { var, a });
        }
    }

    fn mixed_on(&self, u: Var, v: Var) -> Vec<Term> {
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        self.cur.terms.iter().filter(|t| t.is_mixed() && t.vars() == vec![a, b]).cloned().collect()
    }

    fn done(self, tag: CaseTag, params: CaseParams) -> Classified {
        Classified { tag, transform: self.t, normalized: self.cur, params }
    }
}

fn shift_of(t: &Term, v: Var) -> Q {
    t.factors.iter().find(|a| a.var == v).map(|a| a.shift).unwrap_or_else(Q::zero)
}

/// Normalizes a double edge on (0, 1) to k1·αβ + k2·(α+ν1x)(β+ν2y).
fn affine_block(b: &mut Builder, x: Var, y: Var) -> AffineBlock {
    let ts = b.mixed_on(x, y);
    let (t1, t2) = (&ts[0], &ts[1]);
    let (a1, b1) = (shift_of(t1, x), shift_of(t1, y));
    let (a2, b2) = (shift_of(t2, x), shift_of(t2, y));
    b.shift(x, a1);
    b.shift(y, b1);
    AffineBlock { vars: (x, y), k1: t1.coeff, k2: t2.coeff, nu1: a2 - a1, nu2: b2 - b1 }
}

fn lin(e: &Expression, v: Var) -> Linear {
    e.linear.get(v as usize).copied().unwrap_or_default()
}

/// Classifies a (normalized) expression and returns the normalizing
/// transform together with the handler parameters.
pub fn classify(e: &Expression) -> Result<Classified> {
    let e = {
        let mut n = e.normalized();
        n.terms.sort();
        n
    };
    if !e.terms.is_empty() && !e.linear_only_vars().is_empty() {
        return Err(Error::Precondition(format!("{e}: variable occurring only linearly; reduce first")));
    }
    let used = e.used_vars();
    if used.is_empty() {
        return Err(unsupported(&e, "empty expression"));
    }
    let mut b = Builder { t: Transform::default(), cur: e.clone() };
    b.rename(&used);
    let n = used.len();
    if n == 1 {
        return Ok(b.done(CaseTag::SingleVar, CaseParams::None));
    }
    if b.cur.terms.iter().any(|t| t.degree() > 2) {
        return Err(unsupported(&e, "multi-variable terms of degree above 2"));
    }
    if b.cur.terms.is_empty() {
        return Ok(b.done(CaseTag::SplitSingleVars, CaseParams::None));
    }
    let f = factorize(&b.cur);
    if expand(&f) == expand(&b.cur) && f != b.cur {
        b.step(Rewrite::Regroup { to: f });
    }
    let g = build_graph(&b.cur);
    if g.edges.is_empty() {
        return Ok(b.done(CaseTag::SplitSingleVars, CaseParams::None));
    }
    if g.is_acyclic() {
        if n == 2 && g.edges.len() == 1 && g.self_terms.is_empty() {
            let t = b.cur.terms[0].clone();
            b.shift(0, shift_of(&t, 0));
            b.shift(1, shift_of(&t, 1));
            if !t.coeff.is_one() {
                b.step(Rewrite::Scale { factor: t.coeff.recip() });
            }
            let lin = [lin(&b.cur, 0), lin(&b.cur, 1)];
            return Ok(b.done(CaseTag::BasicIdent, CaseParams::Basic { lin, affine_block: None }));
        }
        return Ok(b.done(CaseTag::AcyclicIdent, CaseParams::None));
    }

    let nterms = b.cur.terms.len();
    match n {
        2 => {
            if g.edges.len() == 2 && g.self_terms.is_empty() && nterms == 2 {
                let blk = affine_block(&mut b, 0, 1);
                if blk.k1.is_zero() || blk.nu1.is_zero() || blk.nu2.is_zero() {
                    return Err(unsupported(&e, "degenerate affine block"));
                }
                return Ok(b.done(CaseTag::Affine, CaseParams::Affine(blk)));
            }
            if g.edges.len() == 2 && g.self_terms.len() == 1 && nterms == 3 {
                let s = g.self_terms[0];
                let other = if s == 0 { 1 } else { 0 };
                b.rename(&[s, other]);
                let poly = expand(&Expression::new(b.cur.terms.clone(), vec![]));
                let get = |m: &[usize]| poly.get(m).copied().unwrap_or_else(Q::zero);
                // α=0, x=1, β=2, y=3
                let nq = [
                    get(&[0, 0]),
                    get(&[0, 1]),
                    get(&[0, 2]),
                    get(&[0, 3]),
                    get(&[1, 1]),
                    get(&[1, 2]),
                    get(&[1, 3]),
                ];
                let extra = poly.keys().any(|m| m.len() == 2 && m.iter().all(|&s| s >= 2));
                if extra || nq.iter().any(|q| !q.is_integer()) || nq[0].is_zero() || nq[2].is_zero() {
                    return Err(unsupported(&e, "two-variable shape outside the probabilistic lemma"));
                }
                let nn = nq.map(|q| q.to_integer());
                let lin = [lin(&b.cur, 0), lin(&b.cur, 1)];
                return Ok(b.done(CaseTag::ProbTwoVar, CaseParams::ProbTwoVar { n: nn, lin }));
            }
            Err(unsupported(&e, "two-variable cyclic shape"))
        }
        3 => {
            if g.is_three_cycle() && nterms == 3 && b.cur.terms.iter().all(|t| t.coeff.is_one()) {
                return classify_cycle(b, &e);
            }
            let mut edges = g.edges.clone();
            edges.sort();
            let double = edges.windows(2).find(|w| w[0] == w[1]).map(|w| w[0]);
            let Some((u, v)) = double else {
                return Err(unsupported(&e, "three-variable cyclic shape"));
            };
            if edges.len() == 2 && g.self_terms.len() == 1 && nterms == 3 {
                let w = g.self_terms[0];
                b.rename(&[u, v, w]);
                let blk = affine_block(&mut b, 0, 1);
                return Ok(b.done(CaseTag::RepeatedEdgePlusPoly, CaseParams::RepeatedEdge { block: blk, poly_var: 2 }));
            }
            if edges.len() == 3 && g.self_terms.is_empty() && nterms == 3 {
                let single = *edges.iter().find(|&&ed| ed != (u, v)).unwrap();
                let (x, y) = if single.0 == u || single.1 == u { (u, v) } else { (v, u) };
                let z = if single.0 == x { single.1 } else { single.0 };
                b.rename(&[x, y, z]);
                return classify_final(b, &e);
            }
            Err(unsupported(&e, "three-variable cyclic shape"))
        }
        4 => {
            let mut edges = g.edges.clone();
            edges.sort();
            if edges.len() == 3 && g.self_terms.is_empty() && nterms == 3 {
                if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
                    let (u, v) = w[0];
                    let (s, t) = *edges.iter().find(|&&ed| ed != (u, v)).unwrap();
                    if [s, t].iter().all(|x| *x != u && *x != v) {
                        b.rename(&[s, t, u, v]);
                        let blk = affine_block(&mut b, 2, 3);
                        let basic = b.mixed_on(0, 1)[0].clone();
                        b.shift(0, shift_of(&basic, 0));
                        b.shift(1, shift_of(&basic, 1));
                        if !basic.coeff.is_one() {
                            b.step(Rewrite::Scale { factor: basic.coeff.recip() });
                        }
                        let blk = AffineBlock {
                            k1: blk.k1 / basic.coeff,
                            k2: blk.k2 / basic.coeff,
                            ..blk
                        };
                        let lin = [lin(&b.cur, 0), lin(&b.cur, 1)];
                        return Ok(b.done(CaseTag::BasicIdent, CaseParams::Basic { lin, affine_block: Some(blk) }));
                    }
                }
            }
            Err(unsupported(&e, "four-variable cyclic shape"))
        }
        _ => Err(unsupported(&e, "cyclic shape with five or more variables")),
    }
}

fn cycle_coeffs(b: &Builder) -> CycleCoeffs {
    let t = |u: Var, v: Var| b.mixed_on(u, v)[0].clone();
    let (xy, yz, zx) = (t(0, 1), t(1, 2), t(2, 0));
    CycleCoeffs {
        c: [
            shift_of(&xy, 0),
            shift_of(&xy, 1),
            shift_of(&yz, 1),
            shift_of(&yz, 2),
            shift_of(&zx, 2),
            shift_of(&zx, 0),
        ],
        lin: [lin(&b.cur, 0), lin(&b.cur, 1), lin(&b.cur, 2)],
    }
}

fn classify_cycle(mut b: Builder, e: &Expression) -> Result<Classified> {
    let cc = cycle_coeffs(&b);
    let c = &cc.c;
    if c[0] != c[5] && c[1] != c[2] && c[3] != c[4] {
        return Ok(b.done(CaseTag::ThreeCycleClosed, CaseParams::Cycle(cc)));
    }
    // rotate so that the vertex with equal shifts is x
    let order: [Var; 3] = if c[0] == c[5] {
        [0, 1, 2]
    } else if c[1] == c[2] {
        [1, 2, 0]
    } else {
        [2, 0, 1]
    };
    b.rename(&order);
    let cc = cycle_coeffs(&b);
    let c = &cc.c;
    debug_assert_eq!(c[0], c[5]);
    let k = (c[2] - c[1]) * (c[3] - c[4]);
    if k.is_zero() {
        Ok(b.done(CaseTag::ThreeCycleDegenerate, CaseParams::Cycle(cc)))
    } else if k.abs().is_one() {
        Ok(b.done(CaseTag::ThreeCycleFivePrime, CaseParams::Cycle(cc)))
    } else {
        Err(unsupported(e, "three-cycle with |(c₃−c₂)(c₄−c₅)| ≠ 1"))
    }
}

fn classify_final(mut b: Builder, e: &Expression) -> Result<Classified> {
    let mut dbl = b.mixed_on(0, 1);
    let xz = b.mixed_on(0, 2)[0].clone();
    if dbl.iter().chain([&xz]).any(|t| !t.coeff.is_one()) {
        return Err(unsupported(e, "repeated edge with weighted terms"));
    }
    let c5 = shift_of(&xz, 0);
    if shift_of(&dbl[0], 0) != c5 {
        dbl.swap(0, 1);
    }
    if shift_of(&dbl[0], 0) != c5 {
        return Err(unsupported(e, "c₅ ∉ {c₁, c₃}"));
    }
    let (c1, c2) = (shift_of(&dbl[0], 0), shift_of(&dbl[0], 1));
    let (c3, c4) = (shift_of(&dbl[1], 0), shift_of(&dbl[1], 1));
    let c6 = shift_of(&xz, 2);
    b.shift(0, c1);
    b.shift(1, c2);
    b.shift(2, c6);
    let (n1, n2) = (c3 - c1, c4 - c2);
    if !n1.abs().is_one() || !n2.abs().is_one() {
        return Err(unsupported(e, "final expression needs c₁, c₂ ∈ {−1, 1}"));
    }
    let fe = FinalExpCoeffs { c1: n1, c2: n2, lin: [lin(&b.cur, 0), lin(&b.cur, 1), lin(&b.cur, 2)] };
    let [_, l2, l3] = fe.lin;
    let a_plus = fe.c2 * l2.mu - l2.lambda + l3.lambda;
    let tag = if a_plus.is_zero() { CaseTag::FinalPqProb } else { CaseTag::FinalPqSimple };
    Ok(b.done(tag, CaseParams::FinalExp(fe)))
}
