//! Bivariate bicycle quantum LDPC codes.
//!
//! Code construction and structural checks live in [`code`], syndrome
//! circuits in [`circuit`], circuit-level noise and detector models in
//! [`noise`], BP-OSD decoding and distance bounds in [`decode`], logical
//! operators and measurement planning in [`logical`], and Monte Carlo
//! memory experiments in [`experiment`].

pub mod circuit;
pub mod code;
pub mod decode;
pub mod error;
pub mod experiment;
pub mod gf2;
pub mod logical;
pub mod noise;

pub use code::{build_code, BBCode, BivariatePoly, CodeSpec, Group, Monomial};
pub use error::{Error, Result};
pub use gf2::{BinMatrix, BinVector, SparseBinMatrix};
