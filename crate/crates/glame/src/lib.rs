//! Monodromy of second-order Fuchsian equations on a complex torus.
//!
//! Two families are covered, both of the form `y'' = I(z) y` on `E_tau = C / (Z + Z tau)`:
//!
//! - the Darboux-Treibich-Verdier (DTV) equation `H(n, B)` with
//!   `I = sum n_k (n_k + 1) wp(z + omega_k/2) + B`,
//! - the generalized Lame equation `GLE(n, p, A)`, which adds apparent
//!   singularities at `+-p` with local exponents `-1/2, 3/2`.
//!
//! The crate computes their monodromy numerically, classifies it, relates it to
//! the ansatz solutions, the elliptic form of Painleve VI and its Backlund
//! group, and scans parameter space for coincidences of monodromy data.
//! The guide in `book/` walks through each piece; its code blocks are compiled
//! as doc tests of this crate.

pub mod ansatz;
pub mod backlund;
pub mod equation;
pub mod generators;
pub mod hitchin;
pub mod lattice;
pub mod monodromy;
pub mod ode;
pub mod painleve;
pub mod transport;

pub use num_complex::Complex64;

/// Shorthand used throughout the crate.
pub type C = Complex64;

/// 2x2 complex matrix.
pub type Mat2 = nalgebra::Matrix2<C>;

pub use equation::{Multiplicity, TorusEquation};
pub use lattice::{EllipticContext, LatticeError};
pub use monodromy::{MonodromyData, ProjectiveC};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod chapter_introduction {}
    #[doc = include_str!("../../../book/src/lattice.md")]
    pub mod chapter_lattice {}
    #[doc = include_str!("../../../book/src/equations.md")]
    pub mod chapter_equations {}
    #[doc = include_str!("../../../book/src/monodromy.md")]
    pub mod chapter_monodromy {}
    #[doc = include_str!("../../../book/src/ansatz.md")]
    pub mod chapter_ansatz {}
    #[doc = include_str!("../../../book/src/hitchin.md")]
    pub mod chapter_hitchin {}
    #[doc = include_str!("../../../book/src/painleve.md")]
    pub mod chapter_painleve {}
    #[doc = include_str!("../../../book/src/backlund.md")]
    pub mod chapter_backlund {}
    #[doc = include_str!("../../../book/src/generators.md")]
    pub mod chapter_generators {}
    #[doc = include_str!("../../../book/src/scans.md")]
    pub mod chapter_scans {}
}
