//! Residue arithmetic in Z_q = Z_{p_1} ⊕ … ⊕ Z_{p_n}.

use crate::error::{Error, Result};
use crate::primes::is_prime;
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct Prime(u32);

impl Prime {
    pub fn new(p: u64) -> Result<Self> {
        if p < 3 || p > u32::MAX as u64 || !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        Ok(Prime(p as u32))
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn as_u64(self) -> u64 {
        self.0 as u64
    }
}

impl TryFrom<u64> for Prime {
    type Error = Error;
    fn try_from(v: u64) -> Result<Self> {
        Prime::new(v)
    }
}

impl From<Prime> for u64 {
    fn from(p: Prime) -> u64 {
        p.0 as u64
    }
}

impl fmt::Display for Prime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// ι_p: the representative in [0, p).
#[inline]
pub fn lift(x: u32) -> i64 {
    x as i64
}

/// π_p with floored reduction, so negative inputs are handled.
#[inline]
pub fn project(z: i64, p: u32) -> u32 {
    z.rem_euclid(p as i64) as u32
}

#[inline]
pub fn project_i128(z: i128, p: u32) -> u32 {
    z.rem_euclid(p as i128) as u32
}

/// mod_{p,p'} = π_{p'} ∘ ι_p.
#[inline]
pub fn mod_between(x: u32, p_to: u32) -> u32 {
    x % p_to
}

/// Representative in (−p/2, p/2].
#[inline]
pub fn centered_lift(x: u32, p: u32) -> i64 {
    let x = x as i64;
    let p = p as i64;
    if 2 * x > p {
        x - p
    } else {
        x
    }
}

/// Inverse modulo p by extended Euclid; `None` for zero.
pub fn inv_mod(a: u32, p: u32) -> Option<u32> {
    let (mut r0, mut r1) = (p as i64, (a % p) as i64);
    let (mut t0, mut t1) = (0i64, 1i64);
    while r1 != 0 {
        let k = r0 / r1;
        (r0, r1) = (r1, r0 - k * r1);
        (t0, t1) = (t1, t0 - k * t1);
    }
    if r0 != 1 {
        return None;
    }
    Some(project(t0, p))
}

#[inline]
pub fn add_mod(a: u32, b: u32, p: u32) -> u32 {
    ((a as u64 + b as u64) % p as u64) as u32
}

#[inline]
pub fn sub_mod(a: u32, b: u32, p: u32) -> u32 {
    ((a as u64 + p as u64 - b as u64) % p as u64) as u32
}

#[inline]
pub fn mul_mod(a: u32, b: u32, p: u32) -> u32 {
    ((a as u64 * b as u64) % p as u64) as u32
}

pub fn pow_mod(mut b: u32, mut e: u64, p: u32) -> u32 {
    let mut r = 1 % p;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, b, p);
        }
        b = mul_mod(b, b, p);
        e >>= 1;
    }
    r
}

/// An ordered list of distinct primes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Modulus {
    primes: Vec<Prime>,
}

impl Modulus {
    pub fn new(primes: Vec<Prime>) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(primes.len());
        for p in &primes {
            if !seen.insert(p.get()) {
                return Err(Error::RepeatedPrime(p.get()));
            }
        }
        Ok(Modulus { primes })
    }

    pub fn from_u64s(ps: &[u64]) -> Result<Self> {
        Self::new(ps.iter().map(|&p| Prime::new(p)).collect::<Result<_>>()?)
    }

    /// Rejects moduli with a prime not exceeding `max_coeff`.
    pub fn check_exceeds(&self, max_coeff: u64) -> Result<()> {
        for p in &self.primes {
            if p.as_u64() <= max_coeff {
                return Err(Error::PrimeTooSmall { prime: p.get(), coeff: max_coeff });
            }
        }
        Ok(())
    }

    pub fn primes(&self) -> &[Prime] {
        &self.primes
    }

    pub fn prime(&self, i: usize) -> u32 {
        self.primes[i].get()
    }

    pub fn prime_values(&self) -> Vec<u32> {
        self.primes.iter().map(|p| p.get()).collect()
    }

    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }

    /// The product of the primes, via a product tree so that moduli with
    /// hundreds of thousands of primes stay cheap.
    pub fn q(&self) -> BigUint {
        fn tree(ps: &[Prime]) -> BigUint {
            if ps.len() <= 16 {
                return ps.iter().fold(BigUint::from(1u32), |acc, p| acc * p.get());
            }
            let (a, b) = ps.split_at(ps.len() / 2);
            tree(a) * tree(b)
        }
        tree(&self.primes)
    }

    /// q as u64 when it fits.
    pub fn q_u64(&self) -> Option<u64> {
        self.primes.iter().try_fold(1u64, |acc, p| acc.checked_mul(p.as_u64()))
    }

    pub fn log2_q(&self) -> f64 {
        self.primes.iter().map(|p| (p.get() as f64).log2()).sum()
    }

    /// CRT split of an integer.
    pub fn split(self: &Arc<Self>, z: &BigUint) -> RingElem {
        let residues = self
            .primes
            .iter()
            .map(|p| (z % p.get()).try_into().expect("residue fits"))
            .collect();
        RingElem { modulus: self.clone(), residues }
    }

    /// CRT combination of a residue vector into [0, q).
    pub fn combine(&self, residues: &[u32]) -> BigUint {
        let q = self.q();
        let mut acc = BigUint::from(0u32);
        for (p, &r) in self.primes.iter().zip(residues) {
            let p = p.get();
            let m = &q / p;
            let m_mod = (&m % p).try_into().expect("fits");
            let inv = inv_mod(m_mod, p).expect("coprime");
            acc += m * mul_mod(r, inv, p);
        }
        acc % q
    }
}

impl Serialize for Modulus {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Modulus", 2)?;
        st.serialize_field("primes", &self.prime_values())?;
        // the decimal expansion is only useful for small moduli
        if self.len() <= 64 {
            st.serialize_field("q", &self.q().to_string())?;
        } else {
            st.serialize_field("log2_q", &self.log2_q())?;
        }
        st.end()
    }
}

impl<'de> Deserialize<'de> for Modulus {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            primes: Vec<u64>,
        }
        let raw = Raw::deserialize(d)?;
        Modulus::from_u64s(&raw.primes).map_err(serde::de::Error::custom)
    }
}

/// One residue per prime coordinate of its modulus.
#[derive(Debug, Clone)]
pub struct RingElem {
    modulus: Arc<Modulus>,
    residues: Vec<u32>,
}

impl PartialEq for RingElem {
    fn eq(&self, other: &Self) -> bool {
        (Arc::ptr_eq(&self.modulus, &other.modulus) || self.modulus == other.modulus)
            && self.residues == other.residues
    }
}

impl Eq for RingElem {}

impl RingElem {
    pub fn new(modulus: Arc<Modulus>, residues: Vec<u32>) -> Result<Self> {
        if residues.len() != modulus.len() {
            return Err(Error::ModulusMismatch);
        }
        for (r, p) in residues.iter().zip(modulus.primes()) {
            if *r >= p.get() {
                return Err(Error::Precondition(format!("residue {r} not reduced mod {p}")));
            }
        }
        Ok(RingElem { modulus, residues })
    }

    pub fn from_ints(modulus: Arc<Modulus>, values: &[i64]) -> Result<Self> {
        if values.len() != modulus.len() {
            return Err(Error::ModulusMismatch);
        }
        let residues = values.iter().zip(modulus.primes()).map(|(&v, p)| project(v, p.get())).collect();
        Ok(RingElem { modulus, residues })
    }

    pub fn constant(modulus: Arc<Modulus>, z: i64) -> Self {
        let residues = modulus.primes().iter().map(|p| project(z, p.get())).collect();
        RingElem { modulus, residues }
    }

    pub fn zero(modulus: Arc<Modulus>) -> Self {
        Self::constant(modulus, 0)
    }

    pub fn modulus(&self) -> &Arc<Modulus> {
        &self.modulus
    }

    pub fn residues(&self) -> &[u32] {
        &self.residues
    }

    pub fn into_residues(self) -> Vec<u32> {
        self.residues
    }

    fn check(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.modulus, &other.modulus) || self.modulus == other.modulus {
            Ok(())
        } else {
            Err(Error::ModulusMismatch)
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(u32, u32, u32) -> u32) -> Result<Self> {
        self.check(other)?;
        let residues = self
            .residues
            .iter()
            .zip(&other.residues)
            .zip(self.modulus.primes())
            .map(|((&a, &b), p)| f(a, b, p.get()))
            .collect();
        Ok(RingElem { modulus: self.modulus.clone(), residues })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, add_mod)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, sub_mod)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, mul_mod)
    }

    pub fn neg(&self) -> Self {
        let residues = self
            .residues
            .iter()
            .zip(self.modulus.primes())
            .map(|(&a, p)| sub_mod(0, a, p.get()))
            .collect();
        RingElem { modulus: self.modulus.clone(), residues }
    }

    pub fn inverse(&self) -> Result<Self> {
        let mut residues = Vec::with_capacity(self.residues.len());
        for (i, (&a, p)) in self.residues.iter().zip(self.modulus.primes()).enumerate() {
            residues.push(inv_mod(a, p.get()).ok_or(Error::NotInvertible(i))?);
        }
        Ok(RingElem { modulus: self.modulus.clone(), residues })
    }

    pub fn to_biguint(&self) -> BigUint {
        self.modulus.combine(&self.residues)
    }
}

impl fmt::Display for RingElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, r) in self.residues.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{r}")?;
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(ps: &[u64]) -> Arc<Modulus> {
        Arc::new(Modulus::from_u64s(ps).unwrap())
    }

    #[test]
    fn lift_project_examples() {
        assert_eq!(lift(3), 3);
        assert_eq!(lift(0), 0);
        assert_eq!(lift(6), 6);
        assert_eq!(project(12, 5), 2);
        assert_eq!(project(-1, 7), 6);
        assert_eq!(project(0, 11), 0);
    }

    #[test]
    fn mod_between_examples() {
        assert_eq!(mod_between(3, 7), 3);
        assert_eq!(mod_between(6, 5), 1);
        let carry = mod_between(3, 7) + mod_between(4, 7) - mod_between(add_mod(3, 4, 5), 7);
        assert_eq!(carry, project(5, 7));
    }

    #[test]
    fn centered_examples() {
        assert_eq!(centered_lift(6, 7), -1);
        assert_eq!(centered_lift(3, 7), 3);
        assert_eq!(centered_lift(0, 5), 0);
        assert_eq!(centered_lift(2, 4), 2);
    }

    #[test]
    fn ring_examples() {
        let md = m(&[5, 7]);
        let a = RingElem::new(md.clone(), vec![2, 3]).unwrap();
        let b = RingElem::new(md.clone(), vec![3, 5]).unwrap();
        assert_eq!(a.mul(&b).unwrap().residues(), &[1, 1]);
        let one = RingElem::new(md.clone(), vec![1, 1]).unwrap();
        assert_eq!(one.inverse().unwrap(), one);
        let bad = RingElem::new(md, vec![0, 3]).unwrap();
        assert_eq!(bad.inverse(), Err(Error::NotInvertible(0)));
    }

    #[test]
    fn mixed_modulus_is_error() {
        let a = RingElem::zero(m(&[5, 7]));
        let b = RingElem::zero(m(&[5, 11]));
        assert_eq!(a.add(&b), Err(Error::ModulusMismatch));
    }

    #[test]
    fn prime_validation() {
        assert!(Prime::new(2).is_err());
        assert!(Prime::new(9).is_err());
        assert!(Modulus::from_u64s(&[5, 5]).is_err());
        assert!(Modulus::from_u64s(&[5, 7]).unwrap().check_exceeds(5).is_err());
    }

    #[test]
    fn inverse_matches_brute_force() {
        for p in [3u32, 5, 7, 11, 13, 47] {
            for a in 1..p {
                let i = inv_mod(a, p).unwrap();
                assert_eq!(mul_mod(a, i, p), 1);
            }
            assert_eq!(inv_mod(0, p), None);
        }
    }
}
