//! Streaming trajectory statistics.
//!
//! Each statistic is a single pass over `S_1, S_2, ...` with `O(d)` state.
//! Running maxima are kept on squared quantities and the square root is
//! taken once at the end; ties go to the smallest index.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::iterlog::{kls_normalizer, ll, normalizers};
use crate::matrix::Vector;
use crate::models::DistributionSpec;
use crate::truncation::{GammaSequence, TruncationError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatError {
    #[error("{0} mode needs d = 1, got d = {1}")]
    Dimension(&'static str, usize),
    #[error("horizon cap {cap} is below the start index {n}")]
    CapBelowStart { n: u64, cap: u64 },
    #[error("normalizer cache covers indices up to {have}, {needed} requested")]
    HorizonExceeded { needed: u64, have: u64 },
    #[error("boundary radicand is negative at k = {0}")]
    NegativeRadicand(u64),
    #[error("invalid index range [{0}, {1}]")]
    BadRange(u64, u64),
    #[error("the kls mode is evaluated by kls_statistic")]
    WrongMode,
    #[error("horizon must be >= 1")]
    ZeroHorizon,
    #[error(transparent)]
    Truncation(#[from] TruncationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// `|Γ_k⁻¹ S_k| / √k`.
    SelfNormalized,
    /// `|S_k| / √k`.
    Classical,
    /// `|S_k| / √B_k`, `d = 1`.
    Feller,
    /// `sup_{k >= n} |S_k| / (√(2k LLk) σ_k)`, `d = 1`.
    Kls,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::SelfNormalized => "self_normalized",
            Mode::Classical => "classical",
            Mode::Feller => "feller",
            Mode::Kls => "kls",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One replication's statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRecord {
    pub mode: Mode,
    pub value: f64,
    pub n: u64,
    pub argmax_k: u64,
    pub seed: u64,
    pub spec_id: String,
    pub scheme_id: String,
    /// Last index of the finite sup, for the kls mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon_cap: Option<u64>,
}

/// Supplies the increments `X_1, X_2, ...`.
pub trait IncrementSource {
    fn dim(&self) -> usize;
    fn next_increment(&mut self) -> Vector;
}

/// I.i.d. draws from a catalogued law.
#[derive(Debug, Clone)]
pub struct SpecSource<'a, R> {
    spec: &'a DistributionSpec,
    rng: R,
}

impl<'a, R: Rng> SpecSource<'a, R> {
    pub fn new(spec: &'a DistributionSpec, rng: R) -> Self {
        SpecSource { spec, rng }
    }
}

impl<R: Rng> IncrementSource for SpecSource<'_, R> {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    #[inline]
    fn next_increment(&mut self) -> Vector {
        self.spec.sample(&mut self.rng)
    }
}

/// A fixed list of increments; panics when exhausted.
#[derive(Debug, Clone)]
pub struct FixedSource {
    dim: usize,
    steps: Vec<Vector>,
    pos: usize,
}

impl FixedSource {
    pub fn new(steps: Vec<Vector>) -> Self {
        let dim = steps.first().map_or(1, Vector::dim);
        FixedSource { dim, steps, pos: 0 }
    }

    /// Scalar increments, `d = 1`.
    pub fn scalar(steps: &[f64]) -> Self {
        Self::new(steps.iter().map(|&x| Vector::from_slice(&[x])).collect())
    }

    /// Increments reproducing the given partial sums.
    pub fn from_partial_sums(sums: &[f64]) -> Self {
        let mut prev = 0.0;
        Self::scalar(
            &sums
                .iter()
                .map(|&s| {
                    let x = s - prev;
                    prev = s;
                    x
                })
                .collect::<Vec<_>>(),
        )
    }
}

impl IncrementSource for FixedSource {
    fn dim(&self) -> usize {
        self.dim
    }

    fn next_increment(&mut self) -> Vector {
        let x = self.steps[self.pos];
        self.pos += 1;
        x
    }
}

/// Partial sums `S_k = S_{k-1} + X_k`, accumulated with Neumaier compensation.
#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    source: S,
    seed: u64,
    k: u64,
    sum: Vector,
    comp: Vector,
}

impl<S: IncrementSource> Trajectory<S> {
    pub fn new(source: S, seed: u64) -> Self {
        let d = source.dim();
        Trajectory { source, seed, k: 0, sum: Vector::zeros(d), comp: Vector::zeros(d) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.sum.dim()
    }

    /// Index of the last partial sum produced.
    pub fn position(&self) -> u64 {
        self.k
    }

    /// Draws `X_{k+1}` and returns `S_{k+1}`.
    #[inline]
    pub fn advance(&mut self) -> Vector {
        let x = self.source.next_increment();
        let mut out = Vector::zeros(self.sum.dim());
        for i in 0..self.sum.dim() {
            let (s, xi) = (self.sum[i], x[i]);
            let t = s + xi;
            if s.abs() >= xi.abs() {
                self.comp[i] += (s - t) + xi;
            } else {
                self.comp[i] += (xi - t) + s;
            }
            self.sum[i] = t;
            out[i] = t + self.comp[i];
        }
        self.k += 1;
        out
    }

    /// Collects `S_{k+1}, ..., S_{k+m}`.
    pub fn take_sums(&mut self, m: u64) -> Vec<Vector> {
        (0..m).map(|_| self.advance()).collect()
    }
}

/// Running maximum with smallest-index tie-breaking.
#[derive(Debug, Clone, Copy)]
struct RunningMax {
    value: f64,
    k: u64,
}

impl RunningMax {
    fn new() -> Self {
        RunningMax { value: f64::NEG_INFINITY, k: 0 }
    }

    #[inline]
    fn offer(&mut self, value: f64, k: u64) {
        if value > self.value {
            self.value = value;
            self.k = k;
        }
    }
}

fn check_horizon(gs: &GammaSequence, needed: u64) -> Result<(), StatError> {
    if needed > gs.horizon() {
        return Err(StatError::HorizonExceeded { needed, have: gs.horizon() });
    }
    Ok(())
}

/// `a_n max_{1<=k<=n} Q_k - b_{d,n}` with `Q_k` chosen by `mode`, for the
/// next `n` steps of a fresh trajectory.
///
/// `Γ_k` is taken from the cache, which already holds `Γ_{k ∨ n0}` for
/// `k < n0`. `B_k` accumulates the cached `σ_j²`.
pub fn de_statistic<S: IncrementSource>(
    traj: &mut Trajectory<S>,
    gs: &GammaSequence,
    mode: Mode,
    n: u64,
) -> Result<StatRecord, StatError> {
    if n == 0 {
        return Err(StatError::ZeroHorizon);
    }
    let d = traj.dim();
    match mode {
        Mode::Kls => return Err(StatError::WrongMode),
        Mode::Feller if d != 1 => return Err(StatError::Dimension("feller", d)),
        _ => {}
    }
    if mode != Mode::Classical {
        check_horizon(gs, n)?;
    }
    let mut cursor = gs.cursor();
    let mut best = RunningMax::new();
    let mut b_k = 0.0;
    for k in 1..=n {
        let s = traj.advance();
        let q = match mode {
            Mode::Classical => s.norm_sq() / k as f64,
            Mode::SelfNormalized => {
                let e = cursor.at(k);
                match e.inv_scale {
                    Some(c) => c * c * s.norm_sq() / k as f64,
                    None => e.gamma_inv.mul_vec(&s).norm_sq() / k as f64,
                }
            }
            Mode::Feller => {
                b_k += cursor.at(k).sigma2;
                s.norm_sq() / b_k
            }
            Mode::Kls => unreachable!(),
        };
        best.offer(q, k);
    }
    let norm = normalizers(n, d);
    Ok(StatRecord {
        mode,
        value: norm.a_n * best.value.sqrt() - norm.b_dn,
        n,
        argmax_k: best.k,
        seed: traj.seed(),
        spec_id: gs.spec().id(),
        scheme_id: gs.scheme().id(),
        horizon_cap: None,
    })
}

/// `2LLn (max_{n<=k<=cap} |S_k| / (√(2k LLk) σ_k) - 1) - 3/2 LLLn + LLLLn + log(3/√8)`.
///
/// The supremum over all `k >= n` is cut at `cap`; `σ_k² = E X² 1{|X| <= c_k}`.
pub fn kls_statistic<S: IncrementSource>(
    traj: &mut Trajectory<S>,
    gs: &GammaSequence,
    n: u64,
    cap: u64,
) -> Result<StatRecord, StatError> {
    if traj.dim() != 1 {
        return Err(StatError::Dimension("kls", traj.dim()));
    }
    if n == 0 {
        return Err(StatError::ZeroHorizon);
    }
    if cap < n {
        return Err(StatError::CapBelowStart { n, cap });
    }
    check_horizon(gs, cap)?;
    let mut cursor = gs.cursor();
    let mut best = RunningMax::new();
    for k in 1..=cap {
        let s = traj.advance();
        if k >= n {
            let kf = k as f64;
            let q = s.norm_sq() / (2.0 * kf * ll(kf) * cursor.at(k).sigma2);
            best.offer(q, k);
        }
    }
    Ok(StatRecord {
        mode: Mode::Kls,
        value: kls_normalizer(n).apply(best.value.sqrt()),
        n,
        argmax_k: best.k,
        seed: traj.seed(),
        spec_id: gs.spec().id(),
        scheme_id: gs.scheme().id(),
        horizon_cap: Some(cap),
    })
}

/// A boundary `√k φ(k)`, given through `φ²`.
pub trait Boundary {
    fn phi_squared(&self, t: f64) -> f64;
}

/// `φ ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroBoundary;

impl Boundary for ZeroBoundary {
    fn phi_squared(&self, _t: f64) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Crossings {
    pub count: u64,
    pub last: Option<u64>,
}

/// Counts `k` in `[n_lo, n_hi]` with `|Γ_k⁻¹ S_k| > √k φ(k)`.
pub fn lil_crossings<S: IncrementSource, B: Boundary + ?Sized>(
    traj: &mut Trajectory<S>,
    gs: &GammaSequence,
    phi: &B,
    n_lo: u64,
    n_hi: u64,
) -> Result<Crossings, StatError> {
    if n_lo < 3 || n_hi < n_lo {
        return Err(StatError::BadRange(n_lo, n_hi));
    }
    check_horizon(gs, n_hi)?;
    let mut cursor = gs.cursor();
    let mut out = Crossings { count: 0, last: None };
    for k in 1..=n_hi {
        let s = traj.advance();
        if k < n_lo {
            continue;
        }
        let kf = k as f64;
        let radicand = phi.phi_squared(kf);
        if !(radicand >= 0.0) {
            return Err(StatError::NegativeRadicand(k));
        }
        if cursor.at(k).normalized_norm(&s).powi(2) > kf * radicand {
            out.count += 1;
            out.last = Some(k);
        }
    }
    Ok(out)
}
