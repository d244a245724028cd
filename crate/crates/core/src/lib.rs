//! Second-order analysis of point patterns marked by closed planar curves.
//!
//! Marks are compared with elastic shape distances in the square-root velocity
//! representation ([`curves`], [`registration`], [`karcher`]). Spatial
//! correlation between marks is summarised by a mark-weighted K function
//! ([`pointprocess`]) and assessed against random labeling with permutation
//! envelope tests ([`envelopes`]). [`simulate`] generates synthetic marked
//! patterns with controllable spatial dependence in shape, orientation and size.

pub mod curves;
pub mod envelopes;
pub mod error;
pub mod karcher;
pub mod pointprocess;
pub mod registration;
pub mod rng;
pub mod simulate;

pub use curves::{Curve, SrvCurve, Vec2};
pub use envelopes::{permutation_statistics, EnvelopeOptions, EnvelopeResult};
pub use error::{Error, Result};
pub use karcher::{karcher_mean, KarcherResult};
pub use pointprocess::{KEstimate, MarkedPattern, TestFunction, Window};
pub use registration::{align, Alignment, SymmetryGroup};
pub use simulate::{generate_pattern, Scenario, ScenarioConfig};
