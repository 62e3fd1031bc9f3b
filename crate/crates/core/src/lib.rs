//! Linear Landau damping for a two-species Vlasov-Poisson plasma on a periodic domain.
//!
//! Each spatial mode of the linearized density evolves through a Volterra equation
//! whose memory kernel is built from the velocity profile of the shared equilibrium.
//! The crate provides the kernels, Penrose-type stability checks, a Volterra integrator,
//! a phase-space oracle solver for cross-validation and the analysis tools that compare
//! them.

// `!(x > 0.0)` style guards deliberately reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli_io;
pub mod equilibria;
pub mod error;
pub mod interp;
pub mod kernel;
pub mod oracle;
pub mod penrose;
pub mod perturbation;
pub mod potential;
pub mod quadrature;
pub mod volterra;

pub use error::{Error, Result};

/// Serializes a rate that may be infinite as the string "inf".
pub(crate) fn serialize_rate<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() && *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}
