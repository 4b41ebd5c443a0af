//! Darling–Erdős type extreme statistics of random walks normalized by
//! truncated covariances.
//!
//! The crate covers the pieces needed to study these statistics numerically:
//! iterated logarithms and normalizers ([`iterlog`]), small symmetric matrices
//! ([`matrix`]), a catalogue of increment laws with closed-form truncated
//! moments ([`models`]), truncation schemes and normalizer caches
//! ([`truncation`]), streaming statistics ([`statistics`]), the limit laws and
//! tail inequalities ([`limits`]) and a reproducible Monte Carlo runner
//! ([`harness`]).

pub mod harness;
pub mod iterlog;
pub mod limits;
pub mod matrix;
pub mod models;
pub mod quadrature;
pub mod special;
pub mod statistics;
pub mod truncation;

pub use harness::{Ecdf, ExperimentConfig, HarnessError};
pub use iterlog::{normalizers, NormalizerSet};
pub use limits::{Convergence, GumbelLaw, PhiFamily};
pub use matrix::{psd_sqrt, SymMatrix, Vector};
pub use models::{DistributionSpec, Family, FamilyId, SpecConfig, TailClass};
pub use statistics::{Mode, StatRecord};
pub use truncation::{GammaSequence, SchemeFamily, TruncationScheme, Verdict};
