//! Sets with full difference set and small polynomial image in Z_q.

pub mod error;
pub mod assemble;
pub mod cert;
pub mod construct;
pub mod expr;
pub mod maps;
pub mod primes;
pub mod program;
pub mod random;
pub mod residue;
pub mod verify;
pub mod zset;

pub use error::{Error, Result};
