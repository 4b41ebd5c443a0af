//! Limit laws, tail inequalities and the integral-test classifier.

mod gumbel;
mod integral_test;
mod tails;

pub use gumbel::GumbelLaw;
pub use integral_test::{
    integral_test_classify, integral_test_partial_sums, integral_test_term, Convergence, PartialSumReport, PhiError,
    PhiFamily, MAX_PARTIAL_SUM_N,
};
pub use tails::{
    chi_norm_tail, eq42_envelope, gaussian_norm_tail_bound, lem52_ratio, lem52_ratio_at, lem52_tail_check, Envelope,
    Lem52Report, Lem52TailCheck, LimitError, TailBound,
};
