//! Subsets of Z_n: a bitset for moderate n, a hash set beyond.

use crate::error::{Error, Result};
use std::collections::HashSet;

/// Largest n stored as a bitset.
pub const BITSET_LIMIT: u64 = 1 << 26;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Repr {
    Bits(Vec<u64>),
    Hash(HashSet<u64>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZSet {
    n: u64,
    repr: Repr,
}

fn get_bits(src: &[u64], pos: usize, k: usize) -> u64 {
    let (w, off) = (pos / 64, pos % 64);
    let mut v = src[w] >> off;
    if off > 0 && w + 1 < src.len() {
        v |= src[w + 1] << (64 - off);
    }
    if k < 64 {
        v &= (1u64 << k) - 1;
    }
    v
}

fn or_bits(dst: &mut [u64], pos: usize, v: u64, k: usize) {
    let (w, off) = (pos / 64, pos % 64);
    dst[w] |= v << off;
    if off > 0 && off + k > 64 {
        dst[w + 1] |= v >> (64 - off);
    }
}

/// dst[ds..ds+len] |= src[ss..ss+len], bitwise.
fn or_range(dst: &mut [u64], ds: usize, src: &[u64], ss: usize, len: usize) {
    let mut i = 0;
    while i < len {
        let k = (len - i).min(64);
        let v = get_bits(src, ss + i, k);
        if v != 0 {
            or_bits(dst, ds + i, v, k);
        }
        i += k;
    }
}

impl ZSet {
    pub fn new(n: u64) -> Self {
        assert!(n > 0);
        let repr = if n <= BITSET_LIMIT {
            Repr::Bits(vec![0; n.div_ceil(64) as usize])
        } else {
            Repr::Hash(HashSet::new())
        };
        ZSet { n, repr }
    }

    pub fn from_iter(n: u64, it: impl IntoIterator<Item = u64>) -> Self {
        let mut s = ZSet::new(n);
        for x in it {
            s.insert(x);
        }
        s
    }

    pub fn full(n: u64) -> Self {
        ZSet::from_iter(n, 0..n)
    }

    pub fn modulus(&self) -> u64 {
        self.n
    }

    #[inline]
    pub fn insert(&mut self, x: u64) {
        let x = x % self.n;
        match &mut self.repr {
            Repr::Bits(b) => b[(x / 64) as usize] |= 1 << (x % 64),
            Repr::Hash(h) => {
                h.insert(x);
            }
        }
    }

    pub fn contains(&self, x: u64) -> bool {
        let x = x % self.n;
        match &self.repr {
            Repr::Bits(b) => b[(x / 64) as usize] >> (x % 64) & 1 == 1,
            Repr::Hash(h) => h.contains(&x),
        }
    }

    pub fn len(&self) -> u64 {
        match &self.repr {
            Repr::Bits(b) => b.iter().map(|w| w.count_ones() as u64).sum(),
            Repr::Hash(h) => h.len() as u64,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.n
    }

    /// Elements in increasing order.
    pub fn to_vec(&self) -> Vec<u64> {
        match &self.repr {
            Repr::Bits(b) => {
                let mut out = Vec::new();
                for (i, &w) in b.iter().enumerate() {
                    let mut w = w;
                    while w != 0 {
                        out.push(i as u64 * 64 + w.trailing_zeros() as u64);
                        w &= w - 1;
                    }
                }
                out
            }
            Repr::Hash(h) => {
                let mut v: Vec<u64> = h.iter().copied().collect();
                v.sort_unstable();
                v
            }
        }
    }

    pub fn union_with(&mut self, other: &ZSet) {
        assert_eq!(self.n, other.n);
        match (&mut self.repr, &other.repr) {
            (Repr::Bits(a), Repr::Bits(b)) => {
                for (x, y) in a.iter_mut().zip(b) {
                    *x |= y;
                }
            }
            (Repr::Hash(a), Repr::Hash(b)) => a.extend(b.iter().copied()),
            _ => unreachable!("same modulus implies same representation"),
        }
    }

    /// {x + shift} for x in self, or-ed into `dst`.
    fn or_shifted_into(&self, dst: &mut ZSet, shift: u64) {
        let shift = shift % self.n;
        match (&self.repr, &mut dst.repr) {
            (Repr::Bits(src), Repr::Bits(d)) => {
                let n = self.n as usize;
                let s = shift as usize;
                or_range(d, s, src, 0, n - s);
                or_range(d, 0, src, n - s, s);
            }
            (Repr::Hash(src), Repr::Hash(d)) => {
                for &x in src {
                    d.insert((x + shift) % self.n);
                }
            }
            _ => unreachable!(),
        }
    }

    /// A + B. Fails when the work estimate exceeds `budget`.
    pub fn sumset(&self, other: &ZSet, budget: u64) -> Result<ZSet> {
        assert_eq!(self.n, other.n);
        let (big, small) = if self.len() >= other.len() { (self, other) } else { (other, self) };
        let per_shift = match big.repr {
            Repr::Bits(_) => self.n / 64 + 1,
            Repr::Hash(_) => big.len(),
        };
        if small.len().saturating_mul(per_shift) > budget {
            return Err(Error::Budget(format!("sumset of sizes {} and {}", big.len(), small.len())));
        }
        let mut out = ZSet::new(self.n);
        for b in small.to_vec() {
            big.or_shifted_into(&mut out, b);
        }
        Ok(out)
    }

    /// −A.
    pub fn negated(&self) -> ZSet {
        ZSet::from_iter(self.n, self.to_vec().into_iter().map(|x| (self.n - x) % self.n))
    }
}
