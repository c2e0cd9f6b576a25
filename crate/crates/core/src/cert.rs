//! Machine-checkable supersets of an expression's image.

use crate::expr::{q_mod, Q};
use crate::residue::{add_mod, lift, mul_mod, Modulus};
use num_traits::One;
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockMode {
    Allowed,
    Avoided,
}

/// A constraint on the joint values of some coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoordBlock {
    pub coords: Vec<usize>,
    pub mode: BlockMode,
    /// Sorted tuples of residues, one entry per coordinate in `coords`.
    pub values: Vec<Vec<u32>>,
}

impl CoordBlock {
    pub fn new(coords: Vec<usize>, mode: BlockMode, mut values: Vec<Vec<u32>>) -> Self {
        values.sort();
        values.dedup();
        CoordBlock { coords, mode, values }
    }

    fn admits(&self, v: &[u32]) -> bool {
        let key: Vec<u32> = self.coords.iter().map(|&c| v[c]).collect();
        let hit = self.values.binary_search(&key).is_ok();
        match self.mode {
            BlockMode::Allowed => hit,
            BlockMode::Avoided => !hit,
        }
    }

    fn size(&self, primes: &[u32]) -> BigUint {
        match self.mode {
            BlockMode::Allowed => BigUint::from(self.values.len()),
            BlockMode::Avoided => {
                let total: BigUint = self.coords.iter().map(|&c| BigUint::from(primes[c])).product();
                total - self.values.len()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CertKind {
    /// The image is contained in an explicit list of ring elements.
    ExactValueSet { values: Vec<Vec<u32>> },
    /// Each block constrains its coordinates; unlisted coordinates are free.
    PerCoordinate { blocks: Vec<CoordBlock> },
    /// Σ_c mod_{p_c,p*}(scale_c·v_c + offset_c) ∈ allowed, p* = primes[star].
    LinearFunctional { star: usize, scale: Vec<u32>, offset: Vec<u32>, allowed: Vec<u32> },
    /// None of the listed ring elements is attained.
    AvoidedValues { values: Vec<Vec<u32>> },
    /// Only a size bound, checked analytically.
    SizeBoundOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: CertKind,
    #[serde(with = "biguint_str")]
    pub claimed_size: BigUint,
}

mod biguint_str {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Certificate {
    pub fn exact(mut values: Vec<Vec<u32>>) -> Self {
        values.sort();
        values.dedup();
        let claimed_size = BigUint::from(values.len());
        Certificate { kind: CertKind::ExactValueSet { values }, claimed_size }
    }

    pub fn per_coordinate(modulus: &Modulus, blocks: Vec<CoordBlock>) -> Self {
        let primes = modulus.prime_values();
        let mut free = vec![true; primes.len()];
        let mut size = BigUint::from(1u32);
        for b in &blocks {
            for &c in &b.coords {
                assert!(free[c], "coordinate {c} constrained twice");
                free[c] = false;
            }
            size *= b.size(&primes);
        }
        for (c, &p) in primes.iter().enumerate() {
            if free[c] {
                size *= p;
            }
        }
        Certificate { kind: CertKind::PerCoordinate { blocks }, claimed_size: size }
    }

    /// The preimage of `allowed` has exactly |allowed|·q/p* elements, since
    /// the star coordinate enters Φ bijectively.
    pub fn linear_functional(modulus: &Modulus, star: usize, scale: Vec<u32>, offset: Vec<u32>, mut allowed: Vec<u32>) -> Self {
        allowed.sort_unstable();
        allowed.dedup();
        let p_star = modulus.prime(star);
        let claimed_size = modulus.q() / p_star * allowed.len();
        Certificate { kind: CertKind::LinearFunctional { star, scale, offset, allowed }, claimed_size }
    }

    pub fn avoided(modulus: &Modulus, mut values: Vec<Vec<u32>>) -> Self {
        values.sort();
        values.dedup();
        let claimed_size = modulus.q() - values.len();
        Certificate { kind: CertKind::AvoidedValues { values }, claimed_size }
    }

    pub fn size_bound(claimed_size: BigUint) -> Self {
        Certificate { kind: CertKind::SizeBoundOnly, claimed_size }
    }

    /// Does the value `v` (residues over `primes`) satisfy the certificate?
    pub fn contains(&self, v: &[u32], primes: &[u32]) -> bool {
        match &self.kind {
            CertKind::ExactValueSet { values } => values.binary_search_by(|w| w.as_slice().cmp(v)).is_ok(),
            CertKind::PerCoordinate { blocks } => blocks.iter().all(|b| b.admits(v)),
            CertKind::LinearFunctional { star, scale, offset, allowed } => {
                let ps = primes[*star];
                let phi = functional(v, primes, scale, offset, ps);
                allowed.binary_search(&phi).is_ok()
            }
            CertKind::AvoidedValues { values } => values.binary_search_by(|w| w.as_slice().cmp(v)).is_err(),
            CertKind::SizeBoundOnly => true,
        }
    }

    /// The certificate for E, given this one for s·E.
    pub fn unscaled(&self, s: Q, primes: &[u32]) -> crate::Result<Certificate> {
        if s.is_one() {
            return Ok(self.clone());
        }
        let fwd: Vec<u32> = primes.iter().map(|&p| q_mod(s, p)).collect::<crate::Result<_>>()?;
        let back: Vec<u32> = primes.iter().map(|&p| q_mod(s.recip(), p)).collect::<crate::Result<_>>()?;
        let map = |vals: &[Vec<u32>], coords: &[usize]| -> Vec<Vec<u32>> {
            vals.iter()
                .map(|w| w.iter().zip(coords).map(|(&x, &c)| mul_mod(x, back[c], primes[c])).collect())
                .collect()
        };
        let all: Vec<usize> = (0..primes.len()).collect();
        let kind = match &self.kind {
            CertKind::ExactValueSet { values } => CertKind::ExactValueSet { values: sorted(map(values, &all)) },
            CertKind::AvoidedValues { values } => CertKind::AvoidedValues { values: sorted(map(values, &all)) },
            CertKind::PerCoordinate { blocks } => CertKind::PerCoordinate {
                blocks: blocks.iter().map(|b| CoordBlock::new(b.coords.clone(), b.mode, map(&b.values, &b.coords))).collect(),
            },
            CertKind::LinearFunctional { star, scale, offset, allowed } => CertKind::LinearFunctional {
                star: *star,
                scale: scale.iter().enumerate().map(|(c, &k)| mul_mod(k, fwd[c], primes[c])).collect(),
                offset: offset.clone(),
                allowed: allowed.clone(),
            },
            CertKind::SizeBoundOnly => CertKind::SizeBoundOnly,
        };
        Ok(Certificate { kind, claimed_size: self.claimed_size.clone() })
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            CertKind::ExactValueSet { .. } => "exact_value_set",
            CertKind::PerCoordinate { .. } => "per_coordinate",
            CertKind::LinearFunctional { .. } => "linear_functional",
            CertKind::AvoidedValues { .. } => "avoided_values",
            CertKind::SizeBoundOnly => "size_bound_only",
        }
    }
}

fn sorted(mut v: Vec<Vec<u32>>) -> Vec<Vec<u32>> {
    v.sort();
    v
}

/// Σ_c mod_{p_c,p*}(scale_c·v_c + offset_c) in Z_{p*}.
pub fn functional(v: &[u32], primes: &[u32], scale: &[u32], offset: &[u32], p_star: u32) -> u32 {
    let mut acc = 0u64;
    for c in 0..v.len() {
        let w = add_mod(mul_mod(scale[c], v[c], primes[c]), offset[c], primes[c]);
        acc += lift(w) as u64 % p_star as u64;
    }
    (acc % p_star as u64) as u32
}
