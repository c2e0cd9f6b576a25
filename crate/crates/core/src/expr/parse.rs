//! Text syntax: sums of products of atoms, e.g. `(a(x)+x)*b(y) + 2*a(x) + 3*x`.
//!
//! ```text
//! sum     := ['-'] product (('+' | '-') product)*
//! product := power ('*' power)*
//! power   := primary ['^' integer]
//! primary := integer ['/' integer] | name '(' var ')' | var | '(' sum ')'
//! ```
//! A product of two or more atom-shaped factors is a term; a lone factor
//! contributes to the linear part. Function names must be used consistently
//! per variable.

use super::{qi, Atom, Expression, Linear, Term, Var, Q};
use crate::error::{Error, Result};
use num_traits::{One, Zero};
use std::collections::BTreeMap;

const VARS: [&str; 8] = ["x", "y", "z", "w", "u", "v", "s", "t"];
const FNS: [&str; 8] = ["a", "b", "c", "d", "e", "f", "g", "h"];

/// Display names (function, variable) for a variable id.
pub(crate) fn names(v: Var) -> (String, String) {
    let i = v as usize;
    if i < VARS.len() {
        (FNS[i].to_string(), VARS[i].to_string())
    } else {
        (format!("f{i}"), format!("x{i}"))
    }
}

pub fn var_name(v: Var) -> String {
    names(v).1
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(i64),
    Ident(String),
    Sym(char),
}

fn lex(s: &str) -> Result<Vec<(usize, Tok)>> {
    let b = s.as_bytes();
    let mut i = 0;
    let mut out = Vec::new();
    while i < b.len() {
        let c = b[i] as char;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let st = i;
            while i < b.len() && (b[i] as char).is_ascii_digit() {
                i += 1;
            }
            let n = s[st..i]
                .parse()
                .map_err(|_| Error::Parse { offset: st, msg: "integer too large".into() })?;
            out.push((st, Tok::Num(n)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let st = i;
            while i < b.len() && ((b[i] as char).is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            out.push((st, Tok::Ident(s[st..i].to_string())));
        } else if "+-*^/()".contains(c) {
            out.push((i, Tok::Sym(c)));
            i += 1;
        } else {
            return Err(Error::Parse { offset: i, msg: format!("unexpected character '{c}'") });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
enum Node {
    Num(Q),
    Alpha(String, String, usize),
    X(String),
    Group(Vec<(bool, Vec<Node>)>, usize),
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.0).unwrap_or(self.end)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse { offset: self.offset(), msg: msg.into() })
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn sum(&mut self) -> Result<Vec<(bool, Vec<Node>)>> {
        let mut out = Vec::new();
        let mut neg = self.eat('-');
        loop {
            out.push((neg, self.product()?));
            if self.eat('+') {
                neg = false;
            } else if self.eat('-') {
                neg = true;
            } else {
                return Ok(out);
            }
        }
    }

    fn product(&mut self) -> Result<Vec<Node>> {
        let mut out = self.power()?;
        while self.eat('*') {
            out.extend(self.power()?);
        }
        Ok(out)
    }

    fn power(&mut self) -> Result<Vec<Node>> {
        let p = self.primary()?;
        if self.eat('^') {
            match self.peek() {
                Some(Tok::Num(n)) if *n >= 1 && *n <= 16 => {
                    let n = *n as usize;
                    self.pos += 1;
                    Ok(vec![p; n])
                }
                _ => self.err("expected exponent between 1 and 16"),
            }
        } else {
            Ok(vec![p])
        }
    }

    fn primary(&mut self) -> Result<Node> {
        let off = self.offset();
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                if self.eat('/') {
                    match self.peek() {
                        Some(Tok::Num(d)) if *d != 0 => {
                            let d = *d;
                            self.pos += 1;
                            Ok(Node::Num(Q::new(n, d)))
                        }
                        _ => self.err("expected nonzero denominator"),
                    }
                } else {
                    Ok(Node::Num(qi(n)))
                }
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.eat('(') {
                    let var = match self.peek().cloned() {
                        Some(Tok::Ident(v)) => v,
                        _ => return self.err("expected variable name"),
                    };
                    self.pos += 1;
                    if !self.eat(')') {
                        return self.err("expected ')'");
                    }
                    Ok(Node::Alpha(name, var, off))
                } else {
                    Ok(Node::X(name))
                }
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let s = self.sum()?;
                if !self.eat(')') {
                    return self.err("expected ')'");
                }
                Ok(Node::Group(s, off))
            }
            _ => self.err("expected a number, atom or '('"),
        }
    }
}

type Lin = BTreeMap<String, (Q, Q)>;

struct Builder {
    fn_of: BTreeMap<String, String>,
    terms: Vec<(Q, Vec<(String, Q)>)>,
    linear: Lin,
}

impl Builder {
    fn note_fn(&mut self, f: &str, v: &str, off: usize) -> Result<()> {
        match self.fn_of.get(v) {
            Some(g) if g != f => Err(Error::Parse {
                offset: off,
                msg: format!("variable {v} used with two map names ({g}, {f})"),
            }),
            _ => {
                self.fn_of.insert(v.to_string(), f.to_string());
                Ok(())
            }
        }
    }

    fn to_lin(&mut self, sum: &[(bool, Vec<Node>)]) -> Result<Option<Lin>> {
        let mut out = Lin::new();
        for (neg, prod) in sum {
            let mut c = if *neg { -Q::one() } else { Q::one() };
            let mut inner: Option<Lin> = None;
            for n in prod {
                match n {
                    Node::Num(r) => c *= *r,
                    other => {
                        if inner.is_some() {
                            return Ok(None);
                        }
                        inner = match self.node_lin(other)? {
                            Some(l) => Some(l),
                            None => return Ok(None),
                        };
                    }
                }
            }
            let Some(inner) = inner else {
                return Ok(None);
            };
            for (v, (l, m)) in inner {
                let e = out.entry(v).or_insert((Q::zero(), Q::zero()));
                e.0 += c * l;
                e.1 += c * m;
            }
        }
        Ok(Some(out))
    }

    fn node_lin(&mut self, n: &Node) -> Result<Option<Lin>> {
        Ok(match n {
            Node::Num(_) => None,
            Node::Alpha(f, v, off) => {
                self.note_fn(f, v, *off)?;
                Some(Lin::from([(v.clone(), (Q::one(), Q::zero()))]))
            }
            Node::X(v) => Some(Lin::from([(v.clone(), (Q::zero(), Q::one()))])),
            Node::Group(s, _) => self.to_lin(s)?,
        })
    }

    fn add_sum(&mut self, sum: &[(bool, Vec<Node>)], scale: Q) -> Result<()> {
        for (neg, prod) in sum {
            let mut c = if *neg { -scale } else { scale };
            let mut factors: Vec<&Node> = Vec::new();
            for n in prod {
                match n {
                    Node::Num(r) => c *= *r,
                    other => factors.push(other),
                }
            }
            match factors.len() {
                0 => {
                    return Err(Error::Parse { offset: 0, msg: "constant terms are not expressions".into() })
                }
                1 => {
                    if let Some(l) = self.node_lin(factors[0])? {
                        for (v, (a, b)) in l {
                            let e = self.linear.entry(v).or_insert((Q::zero(), Q::zero()));
                            e.0 += c * a;
                            e.1 += c * b;
                        }
                    } else if let Node::Group(s, _) = factors[0] {
                        let s = s.clone();
                        self.add_sum(&s, c)?;
                    } else {
                        unreachable!()
                    }
                }
                _ => {
                    let mut atoms = Vec::new();
                    for f in factors {
                        let off = match f {
                            Node::Group(_, o) | Node::Alpha(_, _, o) => *o,
                            _ => 0,
                        };
                        let bad = || Error::Parse {
                            offset: off,
                            msg: "product factors must have the form a(x) + c*x".into(),
                        };
                        let l = self.node_lin(f)?.ok_or_else(bad)?;
                        let l: Vec<_> = l.into_iter().filter(|(_, (a, b))| !a.is_zero() || !b.is_zero()).collect();
                        if l.len() != 1 || l[0].1 .0.is_zero() {
                            return Err(bad());
                        }
                        let (v, (lam, mu)) = l.into_iter().next().unwrap();
                        c *= lam;
                        atoms.push((v, mu / lam));
                    }
                    self.terms.push((c, atoms));
                }
            }
        }
        Ok(())
    }
}

/// Parses the text syntax into a (non-canonical) expression.
pub fn parse(text: &str) -> Result<Expression> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, end: text.len() };
    let sum = p.sum()?;
    if p.pos != p.toks.len() {
        return p.err("unexpected trailing input");
    }
    let mut b = Builder { fn_of: BTreeMap::new(), terms: Vec::new(), linear: Lin::new() };
    b.add_sum(&sum, Q::one())?;

    // Variable ids: standard names in their fixed order, others after.
    let mut seen: Vec<String> = Vec::new();
    let mut note = |v: &String| {
        if !seen.contains(v) {
            seen.push(v.clone());
        }
    };
    for (_, atoms) in &b.terms {
        for (v, _) in atoms {
            note(v);
        }
    }
    for v in b.linear.keys() {
        note(v);
    }
    let rank = |v: &String| VARS.iter().position(|s| s == v).unwrap_or(usize::MAX);
    let mut order: Vec<(usize, usize, String)> =
        seen.iter().enumerate().map(|(i, v)| (rank(v), i, v.clone())).collect();
    order.sort();
    let id: BTreeMap<String, Var> = order.iter().enumerate().map(|(i, (_, _, v))| (v.clone(), i as Var)).collect();

    let terms = b
        .terms
        .iter()
        .map(|(c, atoms)| {
            let mut factors: Vec<Atom> = atoms.iter().map(|(v, s)| Atom { var: id[v], shift: *s }).collect();
            factors.sort();
            Term { factors, coeff: *c }
        })
        .collect();
    let mut linear = vec![Linear::default(); id.len()];
    for (v, (l, m)) in &b.linear {
        linear[id[v] as usize] = Linear { lambda: *l, mu: *m };
    }
    let mut e = Expression::new(terms, linear).normalized();
    e.terms.sort();
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::canonicalize;

    #[test]
    fn parses_examples() {
        let e = parse("a(x)*b(y) + a(x) + x + b(y) + y").unwrap();
        assert_eq!(e.terms.len(), 1);
        assert_eq!(e.linear, vec![Linear::new(1, 1), Linear::new(1, 1)]);
        let e = parse("(a(x)+x)*(b(y)) + 2*a(x) + 3*x").unwrap();
        assert_eq!(e.terms[0].factors, vec![Atom::new(0, 1), Atom::new(1, 0)]);
        assert_eq!(e.linear[0], Linear::new(2, 3));
        let e = parse("a(x)^2 + a(x) + x").unwrap();
        assert_eq!(e.terms[0].degree(), 2);
    }

    #[test]
    fn scaled_atoms_normalize() {
        let e = parse("a(x)*(2*b(y)+y)").unwrap();
        assert_eq!(e.terms[0].coeff, qi(2));
        assert_eq!(e.terms[0].factors[1].shift, Q::new(1, 2));
    }

    #[test]
    fn errors_carry_offsets() {
        match parse("a(x) + * b(y)") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 7),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("a(x)*x"), Err(Error::Parse { .. })));
        assert!(matches!(parse("a(x) + b(x)"), Err(Error::Parse { .. })));
        assert!(matches!(parse("a(x) + 3"), Err(Error::Parse { .. })));
        assert!(matches!(parse("a(x) $"), Err(Error::Parse { offset: 5, .. })));
    }

    #[test]
    fn print_parse_round_trip() {
        for s in [
            "a(x)*b(y) + a(x) + x + b(y) + y",
            "(a(x)+x)*a(x) + (a(x)+x)*(b(y)+y)",
            "2*a(x)*(b(y)+1/2*y) - 3*x",
            "a(x)^3 + (a(x)-x)^2",
        ] {
            let c = canonicalize(&parse(s).unwrap());
            assert_eq!(parse(&c.to_string()).unwrap(), c, "{s}");
        }
    }
}
