//! Dense tensor decompositions and multiway analysis.
//!
//! The crate is organized bottom-up:
//!
//! - [`tensor`], [`linalg`], [`index`]: the dense tensor type, multilinear
//!   products and the numeric kernels behind them.
//! - [`cpd`], [`tucker`], [`btd`], [`tt`]: CP, Tucker/MLSVD, block-term and
//!   tensor-train decompositions.
//! - [`kron_cs`]: compressed sensing with Kronecker-structured dictionaries.
//! - [`regress`]: PLS and higher-order PLS.
//! - [`lmwca`]: linked multiway component analysis.
//! - [`bss`], [`experiments`]: synthetic workloads (blind source separation,
//!   regression, classification) used by the CLI demos and tests.
//! - [`io`]: the MWT1 binary tensor format, CSV input, JSON model documents.

pub mod bss;
pub mod btd;
pub mod cpd;
pub mod error;
pub mod experiments;
pub mod index;
pub mod io;
pub mod kron_cs;
pub mod linalg;
pub mod lmwca;
pub mod metrics;
pub mod par;
pub mod regress;
pub mod tensor;
pub mod tt;
pub mod tucker;

pub use error::{Result, TensorError};
pub use linalg::Matrix;
pub use tensor::DenseTensor;
