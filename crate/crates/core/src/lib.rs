//! Mismatched nearest-neighbour joint source-channel coding (NN-JSCC).
//!
//! This crate is the allocation-only core: it has no IO and builds under
//! `no_std` + `alloc`. It contains
//!
//! * [`model`]: memoryless source and additive-noise laws with exact moments,
//! * [`analytic`]: capacity, rate-distortion, dispersions and the normal
//!   approximation / moderate-deviations predictions,
//! * [`nonexcess`]: the non-excess-distortion probabilities `Ψ_sp`, `Ψ_iid`
//!   and their bounding family,
//! * [`ensemble`]: power-type partition, subcodebook sizing and the random
//!   spherical / i.i.d. Gaussian codebooks,
//! * [`codec`]: the modified minimum-distance encoder and the regularised
//!   nearest-neighbour decoder,
//! * [`montecarlo`]: trial engines, error-event bookkeeping and the
//!   random-coding-union style channel estimates.
//!
//! Type indices `i` and codeword indices `j` are 1-based throughout the
//! public API, as in `T_1, …, T_N` and `Ŝ(i, 1), …, Ŝ(i, M_i)`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod analytic;
pub mod codec;
pub mod ensemble;
mod error;
pub mod model;
pub mod montecarlo;
pub mod nonexcess;
mod order_stat;
pub mod rng;
pub mod special;

pub use error::{Error, Result};

use serde::{Deserialize, Serialize};

/// Law of a random codebook: uniform on a sphere or i.i.d. Gaussian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodebookKind {
    Spherical,
    Iid,
}

impl CodebookKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CodebookKind::Spherical => "spherical",
            CodebookKind::Iid => "iid",
        }
    }
}
