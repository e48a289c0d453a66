//! Multi-functional transmit beamforming for a base station that senses a
//! radar target, serves single-antenna users and offloads computation to an
//! edge server at the same time.
//!
//! The crate is organized bottom-up:
//!
//! - [`scenario`]: steering vectors, target responses, seeded Rician channels
//!   and configuration ingestion.
//! - [`metrics`]: closed-form CRBs, SINRs, process rate, power accounting and
//!   beampatterns.
//! - [`conic`]: a small dense primal-dual interior-point solver for Hermitian
//!   PSD / nonnegative-scalar programs plus the Schur-complement lifts the
//!   algorithms need.
//! - [`algorithms`]: alternating-optimization and successive-convex-
//!   approximation designs for point and extended targets, rank-one recovery.
//! - [`mcval`]: Monte-Carlo estimators checking the CRB formulas.
//! - [`bench`]: seeded sweeps, baselines and CSV/SVG export.
//!
//! Data-parallel loops (Monte-Carlo trials, sweep cells) go through [`par`],
//! which uses rayon when the `parallel` feature is enabled and falls back to
//! plain iterators otherwise.

pub mod algorithms;
pub mod bench;
pub mod conic;
pub mod error;
pub mod linalg;
pub mod mcval;
pub mod metrics;
pub mod par;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
pub use linalg::{CMat, CVec, C64};
