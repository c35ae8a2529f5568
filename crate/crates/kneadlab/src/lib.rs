//! Certified-precision toolkit for bimodal interval maps.
//!
//! The crate is organized bottom-up:
//!
//! - [`numerics`] — arbitrary-precision reals with tracked error bounds,
//!   certified signs, and certified bisection;
//! - [`symbolic`] — itinerary sequences over the five-symbol alphabet,
//!   the signed-lexicographic order, minimality and admissibility;
//! - [`families`] — the two one-parameter families of bimodal maps and
//!   their derivatives, critical points, and Schwarzian;
//! - [`orbits`] — orbit iteration: itineraries, kneading sequences,
//!   distinguished periodic orbits, pullback realization of points with a
//!   prescribed code, and derivative diagnostics along orbits;
//! - [`paramsearch`] — parameter-space bisection realizing prescribed
//!   kneading sequences, and nested shrinking parameter intervals;
//! - [`construct`] — the staged constructions that alternate expansion
//!   phases with controlled returns to a critical point, in one family or
//!   in two families simultaneously;
//! - [`verify`] — finite-depth certificates for a finished construction:
//!   derivative-growth windows, slow-recurrence checks, combinatorial
//!   equivalence, and pullback contraction measurements.

pub mod families;
pub mod numerics;
pub mod orbits;
pub mod paramsearch;
pub mod symbolic;

pub mod construct;
pub mod verify;

pub use families::{BimodalMap, Family};
pub use numerics::{BigReal, PrecisionContext, Sign};
pub use symbolic::{ItinerarySeq, Symbol};
