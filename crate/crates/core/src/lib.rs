// SPDX-License-Identifier: Apache-2.0

//! Dressed-state optomechanics for a nonlinearly driven (Josephson-photonics)
//! cavity in the few-photon regime.
//!
//! Two independent routes to the optomechanical damping rate live side by
//! side:
//!
//! * exact numerics: the cavity Liouvillian, its steady state, and the photon
//!   number noise spectrum from the quantum regression theorem
//!   ([`lindblad`], [`spectrum::snn_exact`]);
//! * the secular dressed-state theory: dressed energies, effective widths,
//!   population rate matrix and the transition-resolved damping sum
//!   ([`dressed`], [`spectrum::snn_secular`], [`optomech::gamma_opt_secular`]).
//!
//! A third, fully coupled cavity-plus-mechanics simulation
//! ([`optomech::gamma_opt_full_oracle`]) checks both.
//!
//! Units: `ħ = 1` and the cavity decay rate `γ = 1`. Every energy and
//! frequency in the crate is a dimensionless multiple of `γ`.
//!
//! Vectorization convention: density matrices are column-stacked,
//! `vec(ρ)[i + j·d] = ρ[i, j]`, so `vec(A X B) = (Bᵀ ⊗ A) vec(X)`. This is the
//! only convention used anywhere in the crate ([`lindblad::vectorize`]).

pub mod dressed;
pub mod error;
pub mod hilbert;
pub mod josephson;
pub mod lindblad;
pub mod linalg;
pub mod optomech;
pub mod spectrum;
pub mod sweep;
pub mod validation;

pub use error::{Error, Result};
pub use linalg::{CMat, C64};

/// Version string written into sweep metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
