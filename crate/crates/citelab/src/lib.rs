//! Laboratory for a minimal citation-impact model whose attachment kernel
//! admits two readings with opposite long-run predictions.
//!
//! Under the literal kernel (attachment weight proportional to the current
//! citation count) an uncited paper has zero weight forever, so the mean-field
//! equations and the exact microscopic process both pin every paper at zero
//! citations. Adding an initial attractiveness `m` to the count makes the
//! first citation reachable and yields the closed-form ultimate impact
//! `m (e^lambda - 1)`. This crate implements both readings side by side:
//!
//! - [`model`] — system constants, aging kernels, attachment weights, and the
//!   closed-form citation curves.
//! - [`ode`] — adaptive Runge-Kutta integration of the two competing
//!   mean-field equations plus fixed-point verification.
//! - [`sim`] — exact stochastic simulation of the citation process (single
//!   paper and full growing system) and the numerical arbitration verdict.
//! - [`fit`] — maximum-likelihood recovery of the relative fitness from
//!   event histories and ultimate-impact prediction.
//! - [`io`] — history parsing, CSV/JSON emitters, and report rendering.
//! - [`cli`] — command dispatch for the `citelab` binary.

pub mod cli;
pub mod fit;
pub mod io;
pub mod model;
pub mod ode;
pub mod sim;
