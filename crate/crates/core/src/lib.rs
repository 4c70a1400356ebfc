//! Invariant Ricci flow with boundary on `M = [0, 1] x G/H`.
//!
//! A `G`-invariant metric on `M` is `h(r)^2 dr^2 + sum_i f_i(r)^2 Q|p_i`,
//! where `p = p_1 + ... + p_n` splits the isotropy representation into
//! pairwise inequivalent irreducible summands. Ricci flow then reduces to a
//! one-dimensional parabolic system for `(h, f_1, ..., f_n)`, with boundary
//! conditions prescribing the second fundamental form of each end.
//!
//! The crate is organised as a pipeline:
//!
//! * [`algebra`]: structure constants of `G/H` and the numbers `d`, `beta`,
//!   `gamma` derived from them.
//! * [`expr`] and [`bc`]: the expression language for boundary maps and
//!   initial profiles.
//! * [`geometry`]: curvature, boundary geometry, volume and the
//!   `F`-functional of a sampled metric.
//! * [`deturck`]: the gauge-fixed solver, gauge recovery and flow residuals.
//! * [`perelman`]: the potential, the modified flow and the monotonicity
//!   diagnostics.
//! * [`oracle`]: independent checks used by the test suites.

pub mod algebra;
pub mod bc;
pub mod deturck;
pub mod expr;
pub mod fd;
pub mod geometry;
pub mod oracle;
pub mod perelman;

pub use algebra::{catalog_lookup, catalog_space, structure_constants, BracketTable, HomogeneousSpaceData};
pub use bc::{check_compatibility, BcSpec, InitialProfiles};
pub use geometry::FlowState;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/spaces.md")]
    mod spaces {}
    #[doc = include_str!("../../../book/src/boundary.md")]
    mod boundary {}
    #[doc = include_str!("../../../book/src/flow.md")]
    mod flow {}
    #[doc = include_str!("../../../book/src/perelman.md")]
    mod perelman {}
    #[doc = include_str!("../../../book/src/oracles.md")]
    mod oracles {}
}
