use super::{canonicalize, Atom, Expression, Linear, Term, Var, Q};
use num_traits::One;
use std::collections::BTreeSet;

fn add_term(base: &Expression, out: &mut BTreeSet<Expression>) {
    let n = base.num_vars() as Var;
    for v1 in 0..=n {
        for v2 in v1..=n + 1 {
            for s1 in 0..2 {
                for s2 in 0..2 {
                    let mut e = base.clone();
                    e.terms.push(Term::new(1, vec![Atom::new(v1, s1), Atom::new(v2, s2)]));
                    e.fit_vars();
                    out.insert(canonicalize(&e));
                }
            }
        }
    }
}

fn add_linear(base: &Expression, out: &mut BTreeSet<Expression>) {
    let n = base.num_vars() as Var;
    for v in 0..=n {
        for s in 0..2 {
            let mut e = base.clone();
            if e.linear.len() <= v as usize {
                e.linear.resize(v as usize + 1, Linear::default());
            }
            let l = &mut e.linear[v as usize];
            l.lambda += Q::one();
            l.mu += Q::from_integer(s);
            out.insert(canonicalize(&e));
        }
    }
}

/// All canonical expressions for l products and k linear summands,
/// keeping variables that occur only linearly.
pub fn enumerate_unreduced(l: usize, k: usize) -> Vec<Expression> {
    let mut cur: BTreeSet<Expression> = BTreeSet::from([Expression::default()]);
    for _ in 0..l {
        let mut next = BTreeSet::new();
        for e in &cur {
            add_term(e, &mut next);
        }
        cur = next;
    }
    for _ in 0..k {
        let mut next = BTreeSet::new();
        for e in &cur {
            add_linear(e, &mut next);
        }
        cur = next;
    }
    sort_by_vars(cur.into_iter().collect())
}

/// Removes linear-only variables when a product part is present: their
/// maps can be chosen affine so that they cancel.
pub fn reduce_linear_only(e: &Expression) -> Expression {
    if e.terms.is_empty() {
        return canonicalize(e);
    }
    let mut r = e.clone();
    for v in e.linear_only_vars() {
        r.linear[v as usize] = Linear::default();
    }
    canonicalize(&r)
}

fn sort_by_vars(mut v: Vec<Expression>) -> Vec<Expression> {
    v.sort_by_cached_key(|e| (e.count_used_vars(), e.clone()));
    v
}

/// Canonical expressions for lA² + kA after the affine-cancellation
/// reduction, sorted by number of distinct variables.
pub fn enumerate_expressions(l: usize, k: usize) -> Vec<Expression> {
    let set: BTreeSet<Expression> = enumerate_unreduced(l, k).iter().map(reduce_linear_only).collect();
    sort_by_vars(set.into_iter().collect())
}
