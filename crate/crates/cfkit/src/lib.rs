//! Correlation filter design and evaluation toolkit.
//!
//! Frequency-domain correlation filters (MACE, OTSDF, MOSSE, MMCF) are
//! normally designed with element-wise DFT products, which correspond to
//! *circular* correlation in the spatial domain. This crate provides those
//! conventional designs together with their zero-aliasing variants, which
//! constrain the template tail to zero so that the optimized metric matches
//! the *linear* correlation actually used at test time.
//!
//! The pieces:
//!
//! * [`spectral`] — multi-channel DFTs, padding/cropping, circular and
//!   linear cross-correlation.
//! * [`constraints`] — per-bin cross-power matrices and the zero-aliasing
//!   constraint system.
//! * [`designs`] — closed-form solvers for all conventional and
//!   zero-aliasing filters, plus the reduced-aliasing padding policy.
//! * [`prox`] — accelerated proximal-gradient solvers for problems too
//!   large for the dense closed forms.
//! * [`oracle`] — slow, obviously-correct reference implementations used
//!   by tests and the self-test suite.
//! * [`eval`] — correlation-plane scoring and recognition/localization
//!   metrics, including hard-negative mining.
//! * [`synth`] — deterministic synthetic dataset generators.
//! * [`io`] — file formats (MCS1 signals, CFT1 templates, CFMAN1
//!   manifests, PGM images, CSV reports).
//! * [`cli`] — the command implementations behind the `cfkit` binary.

pub mod cli;
pub mod constraints;
pub mod designs;
pub mod error;
pub mod eval;
pub mod io;
pub mod oracle;
pub mod prox;
pub mod spectral;
pub mod synth;

pub use error::CfError;
