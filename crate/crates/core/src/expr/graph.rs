use super::{Expression, Var};
use serde::Serialize;

/// Multigraph with one edge per mixed quadratic term.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuadGraph {
    pub vertices: Vec<Var>,
    pub edges: Vec<(Var, Var)>,
    /// Variable of each same-variable product term.
    pub self_terms: Vec<Var>,
    /// Vertices with no incident edge.
    pub isolated: usize,
}

pub fn build_graph(e: &Expression) -> QuadGraph {
    let vertices = e.used_vars();
    let mut edges = Vec::new();
    let mut self_terms = Vec::new();
    for t in &e.terms {
        let vs = t.vars();
        match vs.len() {
            1 => self_terms.push(vs[0]),
            2 => edges.push((vs[0], vs[1])),
            _ => {}
        }
    }
    let isolated = vertices.iter().filter(|&&v| !edges.iter().any(|&(a, b)| a == v || b == v)).count();
    QuadGraph { vertices, edges, self_terms, isolated }
}

impl QuadGraph {
    pub fn degree(&self, v: Var) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == v || b == v).count()
    }

    pub fn has_repeated_edge(&self) -> bool {
        let mut e = self.edges.clone();
        e.sort();
        e.windows(2).any(|w| w[0] == w[1])
    }

    /// Forest without repeated edges.
    pub fn is_acyclic(&self) -> bool {
        if self.has_repeated_edge() {
            return false;
        }
        let n = self.vertices.iter().map(|&v| v as usize + 1).max().unwrap_or(0);
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &(a, b) in &self.edges {
            let (ra, rb) = (find(&mut parent, a as usize), find(&mut parent, b as usize));
            if ra == rb {
                return false;
            }
            parent[ra] = rb;
        }
        true
    }

    /// Connected components of the vertex set (self terms do not join).
    pub fn components(&self) -> Vec<Vec<Var>> {
        let mut comps: Vec<Vec<Var>> = Vec::new();
        let mut seen = Vec::new();
        for &v in &self.vertices {
            if seen.contains(&v) {
                continue;
            }
            let mut comp = vec![v];
            seen.push(v);
            let mut i = 0;
            while i < comp.len() {
                let u = comp[i];
                for &(a, b) in &self.edges {
                    let w = if a == u { b } else if b == u { a } else { continue };
                    if !seen.contains(&w) {
                        seen.push(w);
                        comp.push(w);
                    }
                }
                i += 1;
            }
            comp.sort();
            comps.push(comp);
        }
        comps
    }

    pub fn is_three_cycle(&self) -> bool {
        if self.vertices.len() != 3 || self.edges.len() != 3 || self.has_repeated_edge() {
            return false;
        }
        self.vertices.iter().all(|&v| self.degree(v) == 2)
    }

    pub fn describe(&self) -> String {
        let n = |v: Var| super::var_name(v);
        let edges: Vec<String> = self.edges.iter().map(|&(a, b)| format!("{}{}", n(a), n(b))).collect();
        let loops: Vec<String> = self.self_terms.iter().map(|&v| n(v)).collect();
        format!(
            "vertices {}; edges [{}]; same-variable terms [{}]; isolated {}",
            self.vertices.len(),
            edges.join(", "),
            loops.join(", "),
            self.isolated
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn examples() {
        let g = build_graph(&parse("a(x)*b(y)").unwrap());
        assert_eq!(g.edges, vec![(0, 1)]);
        let g = build_graph(&parse("a(x)*b(y) + (a(x)+x)*(b(y)+y) + c(z)^2").unwrap());
        assert_eq!(g.edges.len(), 2);
        assert!(g.has_repeated_edge());
        assert_eq!(g.self_terms, vec![2]);
        assert_eq!(g.isolated, 1);
        let g = build_graph(&parse("a(x)*b(y) + b(y)*c(z) + c(z)*a(x)").unwrap());
        assert!(g.is_three_cycle());
        assert!(!g.is_acyclic());
    }
}
