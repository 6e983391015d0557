//! Spectra of one-dimensional block-disordered subwavelength resonator chains.
//!
//! Chains are built from a small set of resonator blocks ([`geometry`]) arranged by a
//! sampled symbol sequence ([`sampling`]). Their leading-order resonant frequencies are
//! the eigenvalues of the symmetrised capacitance matrix ([`capacitance`], [`eigen`]).
//! Block transfer matrices classify frequencies into shared pass bands, bandgaps and
//! hybridisation regions ([`propagation`]); inside hybridisation regions the
//! meta-atom lookup ([`metaatom`]) estimates the spectrum in linear time.
//! [`spectral_stats`] and [`thouless`] provide the empirical distribution,
//! hyperuniformity and localisation diagnostics, and [`experiments`] wires
//! everything into reproducible runs.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod capacitance;
pub mod eigen;
pub mod error;
pub mod experiments;
pub mod format;
pub mod geometry;
pub mod metaatom;
pub mod propagation;
pub mod sampling;
pub mod spectral_stats;
pub mod thouless;

pub use error::{Error, Result};
