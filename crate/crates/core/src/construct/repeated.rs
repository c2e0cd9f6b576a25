//! A repeated edge made constant by affine maps, plus an isolated
//! variable whose square is kept small.

use super::affine::{install_block, solve_block};
use super::ident::{identify, outcome_details};
use super::{prime_floor, ConstructConfig, Construction};
use crate::cert::Certificate;
use crate::error::Result;
use crate::expr::AffineBlock;
use crate::expr::Expression;
use crate::maps::MapSet;
use crate::residue::Modulus;
use std::sync::Arc;

pub fn repeated_edge_plus_isolated(e: &Expression, block: &AffineBlock, cfg: &ConstructConfig) -> Result<Construction> {
    let primes = cfg.pick_primes(1, prime_floor(e))?;
    let modulus = Arc::new(Modulus::from_u64s(&primes)?);
    let mut maps = MapSet::zero(modulus.clone(), e.num_vars());
    let l = |v: u8| e.linear.get(v as usize).copied().unwrap_or_default();
    let s = solve_block(block, l(block.vars.0), l(block.vars.1), &modulus.prime_values())?;
    install_block(&mut maps, block, &s)?;
    let free: Vec<(usize, usize)> = (0..e.num_vars()).filter(|&v| v != block.vars.0 as usize && v != block.vars.1 as usize).map(|v| (v, 0)).collect();
    let o = identify(e, maps, &free, 0, &[1], cfg.budget)?;
    let mut d = outcome_details(&o, cfg.c_d);
    d.insert("block_constant".into(), s.value.to_string().into());
    let values: Vec<Vec<u32>> = o.functional.allowed.iter().map(|&a| vec![a]).collect();
    Ok(Construction::new(o.maps, Certificate::exact(values), d))
}
