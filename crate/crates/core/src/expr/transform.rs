use super::canon::rename;
use super::{Atom, Expression, Linear, Term, Var, Q};
use num_traits::Zero;
use serde::Serialize;
use std::collections::BTreeMap;

/// One invertible normalizing rewrite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Rewrite {
    /// `perm[old] = new`.
    Rename { perm: Vec<Var> },
    /// The new map is α'_var = α_var + a·x_var.
    Shift { var: Var, a: Q },
    /// The new expression is factor · (old expression).
    Scale { factor: Q },
    /// Same polynomial, different grouping into atom products.
    Regroup { to: Expression },
}

/// Rewrites recorded in application order; never applied destructively.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Transform {
    pub steps: Vec<Rewrite>,
}

/// Polynomial in the symbols α_v (even index 2v) and x_v (odd index 2v+1).
pub type Poly = BTreeMap<Vec<usize>, Q>;

/// Expands an expression into a polynomial in α's and x's.
pub fn expand(e: &Expression) -> Poly {
    let mut out = Poly::new();
    let mut add = |m: Vec<usize>, c: Q| {
        let mut m = m;
        m.sort();
        let ent = out.entry(m).or_insert_with(Q::zero);
        *ent += c;
    };
    for t in &e.terms {
        let mut cur: Vec<(Vec<usize>, Q)> = vec![(Vec::new(), t.coeff)];
        for a in &t.factors {
            let mut next = Vec::new();
            for (m, c) in &cur {
                let mut ma = m.clone();
                ma.push(2 * a.var as usize);
                next.push((ma, *c));
                if !a.shift.is_zero() {
                    let mut mx = m.clone();
                    mx.push(2 * a.var as usize + 1);
                    next.push((mx, *c * a.shift));
                }
            }
            cur = next;
        }
        for (m, c) in cur {
            add(m, c);
        }
    }
    for (v, l) in e.linear.iter().enumerate() {
        if !l.lambda.is_zero() {
            add(vec![2 * v], l.lambda);
        }
        if !l.mu.is_zero() {
            add(vec![2 * v + 1], l.mu);
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

fn shift(e: &Expression, var: Var, a: Q) -> Expression {
    let terms = e
        .terms
        .iter()
        .map(|t| Term {
            factors: t
                .factors
                .iter()
                .map(|f| if f.var == var { Atom { var, shift: f.shift - a } } else { *f })
                .collect(),
            coeff: t.coeff,
        })
        .collect();
    let mut linear = e.linear.clone();
    if let Some(l) = linear.get_mut(var as usize) {
        *l = Linear { lambda: l.lambda, mu: l.mu - l.lambda * a };
    }
    let mut out = Expression::new(terms, linear).normalized();
    out.terms.sort();
    out
}

fn scale(e: &Expression, f: Q) -> Expression {
    let terms = e.terms.iter().map(|t| Term { factors: t.factors.clone(), coeff: t.coeff * f }).collect();
    let linear = e.linear.iter().map(|l| Linear { lambda: l.lambda * f, mu: l.mu * f }).collect();
    Expression::new(terms, linear)
}

impl Transform {
    pub fn push(&mut self, r: Rewrite) {
        self.steps.push(r);
    }

    pub fn apply(&self, e: &Expression) -> Expression {
        let mut cur = e.clone();
        for s in &self.steps {
            cur = match s {
                Rewrite::Rename { perm } => rename(&cur, perm),
                Rewrite::Shift { var, a } => shift(&cur, *var, *a),
                Rewrite::Scale { factor } => scale(&cur, *factor),
                Rewrite::Regroup { to } => {
                    debug_assert_eq!(expand(&cur), expand(to), "regroup must preserve the polynomial");
                    to.clone()
                }
            };
        }
        cur
    }

    /// Product of all scale factors: E' = factor · E.
    pub fn total_scale(&self) -> Q {
        self.steps.iter().fold(Q::from_integer(1), |acc, s| match s {
            Rewrite::Scale { factor } => acc * factor,
            _ => acc,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn shift_then_inverse_shift_is_identity() {
        let e = parse("(a(x)+x)*(b(y)+y) + 2*a(x) + x").unwrap();
        let t = Transform {
            steps: vec![
                Rewrite::Shift { var: 0, a: Q::from_integer(1) },
                Rewrite::Shift { var: 0, a: Q::from_integer(-1) },
            ],
        };
        assert_eq!(t.apply(&e), e);
        let t = Transform { steps: vec![Rewrite::Shift { var: 0, a: Q::from_integer(1) }] };
        assert_eq!(t.apply(&e).to_string(), "a(x)*(b(y)+y) + 2*a(x) - x");
    }

    #[test]
    fn expansion_detects_regrouping() {
        let a = parse("(a(x)+x)*b(y) + (a(x)+x)*(b(y)+y)").unwrap();
        let b = parse("2*(a(x)+x)*(b(y)+1/2*y)").unwrap();
        assert_eq!(expand(&a), expand(&b));
    }
}
