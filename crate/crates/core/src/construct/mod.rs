//! Deterministic constructions, one handler per classifier case, and the
//! dispatcher that maps a construction back to the original expression.

pub mod affine;
pub mod avoid;
pub mod basic;
pub mod cycle;
pub mod ident;
pub mod repeated;
pub mod small;

use crate::cert::Certificate;
use crate::error::{Error, Result};
use crate::expr::{classify, CaseParams, CaseTag};
use crate::expr::Expression;
use crate::maps::{MapSet, VarMap};
use crate::primes::primes_in;
use crate::program::Program;
use crate::residue::Modulus;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Free-form measurements reported next to a construction.
pub type Details = serde_json::Map<String, serde_json::Value>;

#[derive(Debug, Clone, Serialize)]
pub struct Construction {
    pub tag: Option<CaseTag>,
    pub maps: MapSet,
    pub certificate: Certificate,
    pub details: Details,
}

impl Construction {
    pub fn new(maps: MapSet, certificate: Certificate, details: Details) -> Self {
        Construction { tag: None, maps, certificate, details }
    }

    pub fn modulus(&self) -> &Arc<Modulus> {
        &self.maps.modulus
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructConfig {
    /// Target density for the amplifying constructions.
    pub epsilon: f64,
    /// Explicit primes; otherwise primes are taken from `window`.
    pub primes: Option<Vec<u64>>,
    pub window: (u64, u64),
    pub seed: u64,
    pub max_retries: u32,
    /// Largest number of points any enumeration may visit.
    pub budget: u64,
    /// K in the bound K·q of the basic identification.
    pub k_const: f64,
    /// C_d in the small-value bound C_d·p^(1 − 2^(−d)).
    pub c_d: f64,
}

impl Default for ConstructConfig {
    fn default() -> Self {
        ConstructConfig {
            epsilon: 0.5,
            primes: None,
            window: (100, 4000),
            seed: 0,
            max_retries: 64,
            budget: 100_000_000,
            k_const: 15.0,
            c_d: 4.0,
        }
    }
}

impl ConstructConfig {
    pub fn with_primes(primes: &[u64]) -> Self {
        ConstructConfig { primes: Some(primes.to_vec()), ..Default::default() }
    }

    /// Candidate primes above `floor`: the explicit list, or the window.
    pub fn candidates(&self, floor: u64) -> Vec<u64> {
        let mut ps = match &self.primes {
            Some(ps) => ps.clone(),
            None => primes_in(self.window.0, self.window.1),
        };
        ps.retain(|&p| p > floor);
        ps
    }

    /// `count` distinct primes above `floor`, ascending, with the largest
    /// below twice the smallest. Explicit primes must be exactly `count`.
    pub fn pick_primes(&self, count: usize, floor: u64) -> Result<Vec<u64>> {
        if let Some(ps) = &self.primes {
            if ps.len() != count {
                return Err(Error::Precondition(format!("this case needs {count} primes, {} given", ps.len())));
            }
            let mut ps = ps.clone();
            ps.sort_unstable();
            if let Some(&p) = ps.iter().find(|&&p| p <= floor) {
                return Err(Error::PrimeTooSmall { prime: p as u32, coeff: floor });
            }
            Modulus::from_u64s(&ps)?;
            return Ok(ps);
        }
        let ps = self.candidates(floor);
        ps.windows(count)
            .find(|w| w[count - 1] < 2 * w[0])
            .map(|w| w.to_vec())
            .ok_or_else(|| Error::WindowExhausted(format!("no {count} primes above {floor} in one dyadic range of {:?}", self.window)))
    }
}

/// Smallest prime allowed for an expression: above every coefficient.
pub fn prime_floor(e: &Expression) -> u64 {
    e.max_coeff().max(2)
}

/// An exact-value certificate if the image has at most `limit` elements.
pub fn exact_certificate(prog: &Program, budget: u64, limit: u64) -> Result<Option<Certificate>> {
    let img = prog.image(budget)?;
    Ok(img.values(limit).map(Certificate::exact))
}

/// Classifies, runs the case handler on the normalized expression, and
/// returns maps and certificate for `e` itself.
pub fn construct(e: &Expression, cfg: &ConstructConfig) -> Result<Construction> {
    let cls = classify(e)?;
    let n = &cls.normalized;
    let mut out = match (cls.tag, &cls.params) {
        (CaseTag::SingleVar, _) => avoid::single_var_construct(n, cfg.epsilon, &cfg.candidates(0)),
        (CaseTag::Affine, CaseParams::Affine(b)) => affine::affine_construct(n, b, cfg),
        (CaseTag::BasicIdent, CaseParams::Basic { lin, affine_block }) => basic::basic_construct(n, lin, affine_block.as_ref(), cfg),
        (CaseTag::AcyclicIdent, _) => ident::acyclic_ident(n, cfg),
        (CaseTag::SplitSingleVars, _) => ident::split_single_vars(n, cfg),
        (CaseTag::ThreeCycleClosed, CaseParams::Cycle(cc)) => cycle::closed_construct(n, cc, cfg),
        (CaseTag::ThreeCycleDegenerate, CaseParams::Cycle(cc)) => cycle::degenerate(n, cc, cfg),
        (CaseTag::ThreeCycleFivePrime, CaseParams::Cycle(cc)) => cycle::five_prime(n, cc, cfg),
        (CaseTag::RepeatedEdgePlusPoly, CaseParams::RepeatedEdge { block, .. }) => repeated::repeated_edge_plus_isolated(n, block, cfg),
        (CaseTag::ProbTwoVar, CaseParams::ProbTwoVar { n: nn, lin }) => crate::random::prob_two_var_construct(nn, lin, cfg),
        (CaseTag::FinalPqSimple, CaseParams::FinalExp(fe)) => crate::random::final_pq_simple(fe, cfg),
        (CaseTag::FinalPqProb, CaseParams::FinalExp(fe)) => crate::random::final_pq_construct(fe, cfg),
        (tag, _) => Err(Error::Unsupported(format!("no handler for {}", tag.name()))),
    }?;
    let primes = out.maps.primes();
    let mut maps = out.maps.pull_back(&cls.transform)?;
    let nv = e.num_vars();
    maps.vars.resize(nv.max(maps.vars.len()), VarMap::zero(primes.len()));
    maps.vars.truncate(nv);
    out.maps = maps;
    out.certificate = out.certificate.unscaled(cls.transform.total_scale(), &primes)?;
    out.tag = Some(cls.tag);
    out.details.insert("handler".into(), cls.tag.handler().into());
    out.details.insert("normalized".into(), n.to_string().into());
    Ok(out)
}
