use super::{Atom, Expression, Linear, Term, Var, Q};

type TermKey = (Q, usize, usize, Vec<Q>, Vec<Q>);

/// Relabeling-invariant signature of one variable.
fn var_key(e: &Expression, v: Var) -> (Linear, Vec<TermKey>) {
    let mut tk = Vec::new();
    for t in &e.terms {
        let mult = t.factors.iter().filter(|a| a.var == v).count();
        if mult == 0 {
            continue;
        }
        let mut own: Vec<Q> = t.factors.iter().filter(|a| a.var == v).map(|a| a.shift).collect();
        let mut other: Vec<Q> = t.factors.iter().filter(|a| a.var != v).map(|a| a.shift).collect();
        own.sort();
        other.sort();
        tk.push((t.coeff, t.degree(), mult, own, other));
    }
    tk.sort();
    (e.linear.get(v as usize).copied().unwrap_or_default(), tk)
}

fn relabel(e: &Expression, map: &[Var]) -> Expression {
    let terms = e
        .terms
        .iter()
        .map(|t| {
            let mut factors: Vec<Atom> =
                t.factors.iter().map(|a| Atom { var: map[a.var as usize], shift: a.shift }).collect();
            factors.sort();
            Term { factors, coeff: t.coeff }
        })
        .collect::<Vec<_>>();
    let n = map.iter().filter(|&&m| m != Var::MAX).count();
    let mut linear = vec![Linear::default(); n];
    for (v, l) in e.linear.iter().enumerate() {
        if map[v] != Var::MAX {
            linear[map[v] as usize] = *l;
        }
    }
    let mut out = Expression { terms, linear }.normalized();
    out.terms.sort();
    out
}

/// Canonical representative under variable renaming and term reordering:
/// variables are ordered by an invariant signature and ties are broken by
/// the lexicographically smallest relabeled form.
pub fn canonicalize(e: &Expression) -> Expression {
    canonicalize_with_map(e).0
}

/// Like [`canonicalize`], also returning `map[old] = new` for every variable
/// slot of `e` (`Var::MAX` for unused slots).
pub fn canonicalize_with_map(e: &Expression) -> (Expression, Vec<Var>) {
    let e = e.normalized();
    let used = e.used_vars();
    let mut keyed: Vec<(_, Var)> = used.iter().map(|&v| (var_key(&e, v), v)).collect();
    keyed.sort();
    let mut groups: Vec<Vec<Var>> = Vec::new();
    for (i, (k, v)) in keyed.iter().enumerate() {
        if i > 0 && keyed[i - 1].0 == *k {
            groups.last_mut().unwrap().push(*v);
        } else {
            groups.push(vec![*v]);
        }
    }
    let mut best: Option<(Expression, Vec<Var>)> = None;
    let mut order: Vec<Var> = Vec::with_capacity(used.len());
    search(&e, &groups, 0, &mut order, &mut best);
    best.unwrap_or_default()
}

fn search(
    e: &Expression,
    groups: &[Vec<Var>],
    gi: usize,
    order: &mut Vec<Var>,
    best: &mut Option<(Expression, Vec<Var>)>,
) {
    if gi == groups.len() {
        let mut map = vec![Var::MAX; e.num_vars()];
        for (new, &old) in order.iter().enumerate() {
            map[old as usize] = new as Var;
        }
        let cand = relabel(e, &map);
        if best.as_ref().is_none_or(|b| cand < b.0) {
            *best = Some((cand, map));
        }
        return;
    }
    let g = &groups[gi];
    let mut perm = g.clone();
    permute(&mut perm, 0, &mut |p| {
        let len = order.len();
        order.extend_from_slice(p);
        search(e, groups, gi + 1, order, best);
        order.truncate(len);
    });
}

fn permute(v: &mut Vec<Var>, k: usize, f: &mut dyn FnMut(&[Var])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

/// Relabels variables by an explicit permutation (`perm[old] = new`).
pub(crate) fn rename(e: &Expression, perm: &[Var]) -> Expression {
    let mut map = perm.to_vec();
    map.resize(e.num_vars(), Var::MAX);
    let terms = e
        .terms
        .iter()
        .map(|t| {
            let mut factors: Vec<Atom> =
                t.factors.iter().map(|a| Atom { var: map[a.var as usize], shift: a.shift }).collect();
            factors.sort();
            Term { factors, coeff: t.coeff }
        })
        .collect();
    let n = map.iter().map(|&m| m as usize + 1).max().unwrap_or(0);
    let mut linear = vec![Linear::default(); n];
    for (v, l) in e.linear.iter().enumerate() {
        linear[map[v] as usize] = *l;
    }
    let mut out = Expression::new(terms, linear).normalized();
    out.terms.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::super::*;

    #[test]
    fn relabels_by_first_occurrence() {
        let e = Expression::new(vec![Term::new(1, vec![Atom::new(1, 0), Atom::new(0, 0)])], vec![]);
        let c = canonicalize(&e);
        assert_eq!(c.to_string(), "a(x)*b(y)");
    }

    #[test]
    fn merges_and_drops() {
        let t = Term::new(1, vec![Atom::new(0, 0), Atom::new(1, 0)]);
        let e = Expression::new(vec![t.clone(), t.clone()], vec![]);
        assert_eq!(canonicalize(&e).to_string(), "2*a(x)*b(y)");
        let z = Term { coeff: qi(0), ..t };
        let e = Expression::new(vec![z], vec![Linear::new(1, 0)]);
        assert_eq!(canonicalize(&e).to_string(), "a(x)");
    }

    #[test]
    fn unused_variables_are_compacted() {
        let e = Expression::new(vec![], vec![Linear::default(), Linear::new(1, 1)]);
        assert_eq!(canonicalize(&e).to_string(), "a(x) + x");
    }
}
