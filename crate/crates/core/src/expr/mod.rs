//! Formal expressions in variables x_i and maps α_i.

mod canon;
mod classify;
mod enumerate;
mod graph;
mod parse;
mod transform;

pub use canon::{canonicalize, canonicalize_with_map};
pub use classify::{classify, AffineBlock, CaseParams, CaseTag, Classified, CycleCoeffs, FinalExpCoeffs};
pub use enumerate::{enumerate_expressions, enumerate_unreduced, reduce_linear_only};
pub use graph::{build_graph, QuadGraph};
pub use parse::{parse, var_name};
pub use transform::{Rewrite, Transform};

use crate::error::{Error, Result};
use crate::residue::{inv_mod, mul_mod, project};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub type Var = u8;
pub type Q = num_rational::Ratio<i64>;

pub fn qi(n: i64) -> Q {
    Q::from_integer(n)
}

/// Residue of a rational number modulo p.
pub fn q_mod(r: Q, p: u32) -> Result<u32> {
    let den = project(*r.denom(), p);
    let inv = inv_mod(den, p)
        .ok_or_else(|| Error::Precondition(format!("denominator {} vanishes mod {p}", r.denom())))?;
    Ok(mul_mod(project(*r.numer(), p), inv, p))
}

/// α_var(x_var) + shift·x_var.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub var: Var,
    pub shift: Q,
}

impl Atom {
    pub fn new(var: Var, shift: i64) -> Self {
        Atom { var, shift: qi(shift) }
    }
}

/// coeff · ∏ factors, with at least two factors.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Term {
    pub factors: Vec<Atom>,
    pub coeff: Q,
}

impl Term {
    pub fn new(coeff: i64, mut factors: Vec<Atom>) -> Self {
        factors.sort();
        Term { factors, coeff: qi(coeff) }
    }

    pub fn degree(&self) -> usize {
        self.factors.len()
    }

    pub fn is_mixed(&self) -> bool {
        self.factors.iter().any(|a| a.var != self.factors[0].var)
    }

    pub fn vars(&self) -> Vec<Var> {
        let mut v: Vec<Var> = self.factors.iter().map(|a| a.var).collect();
        v.dedup();
        v
    }
}

/// λ·α(x) + μ·x for one variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Linear {
    pub lambda: Q,
    pub mu: Q,
}

impl Linear {
    pub fn new(lambda: i64, mu: i64) -> Self {
        Linear { lambda: qi(lambda), mu: qi(mu) }
    }

    pub fn is_zero(&self) -> bool {
        self.lambda.is_zero() && self.mu.is_zero()
    }
}

/// Σ terms + Σ_v (λ_v α_v + μ_v x_v) over variables 0..linear.len().
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Expression {
    pub terms: Vec<Term>,
    pub linear: Vec<Linear>,
}

impl Expression {
    pub fn new(terms: Vec<Term>, linear: Vec<Linear>) -> Self {
        let mut e = Expression { terms, linear };
        e.fit_vars();
        e
    }

    /// Pads or trims `linear` so its length is the variable count.
    pub fn fit_vars(&mut self) {
        let mut n = self.linear.len();
        while n > 0 && self.linear[n - 1].is_zero() && !self.uses_in_terms(n as Var - 1) {
            n -= 1;
        }
        for t in &self.terms {
            for a in &t.factors {
                n = n.max(a.var as usize + 1);
            }
        }
        self.linear.resize(n, Linear::default());
    }

    fn uses_in_terms(&self, v: Var) -> bool {
        self.terms.iter().any(|t| t.factors.iter().any(|a| a.var == v))
    }

    pub fn num_vars(&self) -> usize {
        self.linear.len()
    }

    /// Variables that actually occur.
    pub fn used_vars(&self) -> Vec<Var> {
        (0..self.num_vars() as Var)
            .filter(|&v| self.uses_in_terms(v) || !self.linear[v as usize].is_zero())
            .collect()
    }

    pub fn count_used_vars(&self) -> usize {
        self.used_vars().len()
    }

    pub fn degree(&self) -> usize {
        let t = self.terms.iter().map(|t| t.degree()).max().unwrap_or(0);
        let l = if self.linear.iter().any(|l| !l.is_zero()) { 1 } else { 0 };
        t.max(l)
    }

    pub fn quadratic_terms(&self) -> usize {
        self.terms.len()
    }

    /// Variables that occur in no product term but carry a linear part.
    pub fn linear_only_vars(&self) -> Vec<Var> {
        (0..self.num_vars() as Var)
            .filter(|&v| !self.uses_in_terms(v) && !self.linear[v as usize].is_zero())
            .collect()
    }

    /// Largest numerator or denominator magnitude among all coefficients.
    pub fn max_coeff(&self) -> u64 {
        let mut m = 0u64;
        let mut see = |r: Q| {
            m = m.max(r.numer().unsigned_abs()).max(r.denom().unsigned_abs());
        };
        for t in &self.terms {
            see(t.coeff);
            for a in &t.factors {
                see(a.shift);
            }
        }
        for l in &self.linear {
            see(l.lambda);
            see(l.mu);
        }
        m
    }

    /// Sorts factors, merges like terms and drops zero coefficients.
    pub fn normalized(&self) -> Expression {
        let mut merged: BTreeMap<Vec<Atom>, Q> = BTreeMap::new();
        for t in &self.terms {
            let mut f = t.factors.clone();
            f.sort();
            *merged.entry(f).or_insert_with(Q::zero) += t.coeff;
        }
        let terms = merged
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(factors, coeff)| Term { factors, coeff })
            .collect();
        Expression::new(terms, self.linear.clone())
    }

    /// Single-variable expressions as a polynomial in α: coefficient
    /// polynomials in x, `coeffs[j][i]` multiplies α^j x^i.
    pub fn single_var_poly(&self) -> Option<Vec<Vec<Q>>> {
        let used = self.used_vars();
        if used.len() != 1 {
            return None;
        }
        let v = used[0];
        let d = self.degree().max(1);
        let mut c = vec![vec![Q::zero(); d + 1]; d + 1];
        for t in &self.terms {
            // expand ∏(α + s x)
            let mut poly: BTreeMap<(usize, usize), Q> = BTreeMap::new();
            poly.insert((0, 0), t.coeff);
            for a in &t.factors {
                let mut next = BTreeMap::new();
                for (&(j, i), &val) in &poly {
                    *next.entry((j + 1, i)).or_insert_with(Q::zero) += val;
                    *next.entry((j, i + 1)).or_insert_with(Q::zero) += val * a.shift;
                }
                poly = next;
            }
            for ((j, i), val) in poly {
                c[j][i] += val;
            }
        }
        let l = self.linear[v as usize];
        c[1][0] += l.lambda;
        c[0][1] += l.mu;
        Some(c)
    }

    pub fn is_integral(&self) -> bool {
        let int = |r: &Q| r.is_integer();
        self.terms.iter().all(|t| int(&t.coeff) && t.factors.iter().all(|a| int(&a.shift)))
            && self.linear.iter().all(|l| int(&l.lambda) && int(&l.mu))
    }
}

fn fmt_q(r: Q) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn fmt_atom(a: &Atom) -> String {
    let (f, x) = parse::names(a.var);
    if a.shift.is_zero() {
        return format!("{f}({x})");
    }
    let body = if a.shift.abs().is_one() {
        format!("{}{x}", if a.shift.is_negative() { "-" } else { "+" })
    } else if a.shift.is_negative() {
        format!("-{}*{x}", fmt_q(-a.shift))
    } else {
        format!("+{}*{x}", fmt_q(a.shift))
    };
    format!("({f}({x}){body})")
}

impl std::fmt::Display for Expression {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut parts: Vec<(bool, String)> = Vec::new();
        let mut push = |c: Q, body: String| {
            let neg = c.is_negative();
            let a = c.abs();
            let s = if a.is_one() { body } else { format!("{}*{}", fmt_q(a), body) };
            parts.push((neg, s));
        };
        for t in &self.terms {
            let mut s = String::new();
            let mut i = 0;
            while i < t.factors.len() {
                let mut j = i;
                while j < t.factors.len() && t.factors[j] == t.factors[i] {
                    j += 1;
                }
                if !s.is_empty() {
                    s.push('*');
                }
                s.push_str(&fmt_atom(&t.factors[i]));
                if j - i > 1 {
                    s.push_str(&format!("^{}", j - i));
                }
                i = j;
            }
            push(t.coeff, s);
        }
        for (v, l) in self.linear.iter().enumerate() {
            let (fname, x) = parse::names(v as Var);
            if !l.lambda.is_zero() {
                push(l.lambda, format!("{fname}({x})"));
            }
            if !l.mu.is_zero() {
                push(l.mu, x);
            }
        }
        if parts.is_empty() {
            return write!(f, "0");
        }
        for (i, (neg, s)) in parts.iter().enumerate() {
            match (i, neg) {
                (0, true) => write!(f, "-{s}")?,
                (0, false) => write!(f, "{s}")?,
                (_, true) => write!(f, " - {s}")?,
                (_, false) => write!(f, " + {s}")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_mod_handles_fractions() {
        assert_eq!(q_mod(Q::new(1, 2), 7).unwrap(), 4);
        assert_eq!(q_mod(qi(-3), 7).unwrap(), 4);
        assert!(q_mod(Q::new(1, 7), 7).is_err());
    }

    #[test]
    fn single_var_poly_expands() {
        // (α+x)^2 + 3α + x
        let e = Expression::new(
            vec![Term::new(1, vec![Atom::new(0, 1), Atom::new(0, 1)])],
            vec![Linear::new(3, 1)],
        );
        let c = e.single_var_poly().unwrap();
        assert_eq!(c[2][0], qi(1));
        assert_eq!(c[1][1], qi(2));
        assert_eq!(c[0][2], qi(1));
        assert_eq!(c[1][0], qi(3));
        assert_eq!(c[0][1], qi(1));
    }

    #[test]
    fn display() {
        let e = Expression::new(
            vec![Term::new(2, vec![Atom::new(0, 0), Atom::new(1, 1)])],
            vec![Linear::new(1, -1), Linear::new(0, 3)],
        );
        assert_eq!(e.to_string(), "2*a(x)*(b(y)+y) + a(x) - x + 3*y");
    }
}
