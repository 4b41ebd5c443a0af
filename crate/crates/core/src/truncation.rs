//! Truncation levels `c_n`, the normalizing matrices `Γ_n = A(c_n)` and the
//! validators for the growth and tail conditions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::iterlog::{ll, lll};
use crate::matrix::{eigen, inverse, psd_sqrt, MatrixError, SymMatrix, Vector};
use crate::models::{DistributionSpec, ModelError, TailClass, TailProfile};

/// Indices up to this are cached individually.
pub const DENSE_LIMIT: u64 = 10_000;
/// Ratio between consecutive checkpoints beyond [`DENSE_LIMIT`].
pub const CHECKPOINT_RATIO: f64 = 1.001;
/// Automatic `n0` is the first index with `λ_min(Γ_n)` at least this.
pub const AUTO_N0_LAMBDA: f64 = 0.1;
/// Search bound for the automatic `n0`.
const AUTO_N0_LIMIT: u64 = 1 << 32;

/// Formula schemes start dipping after `n = 15`, where `LLn` leaves its floor.
const ENVELOPE_KNEE: f64 = 15.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TruncationError {
    #[error("index must be >= 1")]
    ZeroIndex,
    #[error("table has {len} levels, index {n} requested")]
    TableExhausted { n: u64, len: usize },
    #[error("table levels must be positive, finite and nondecreasing")]
    BadTable,
    #[error("polylog exponent must be finite")]
    BadExponent,
    #[error("Γ_{n} is singular (λ_min = {lambda_min:e}); increase n0")]
    Singular { n: u64, lambda_min: f64 },
    #[error("no index up to {0} reaches λ_min(Γ_n) >= {AUTO_N0_LAMBDA}")]
    NoInvertibleIndex(u64),
    #[error("Feller normalization needs d = 1, got d = {0}")]
    FellerDimension(usize),
    #[error("wrong parameters for scheme {0:?}: sqrt_n_polylog takes `q`, table takes `values`, others take neither")]
    Parameters(SchemeKind),
    #[error("grid must be ascending with minimum >= {0}")]
    BadGrid(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// The level family `c_n`.
#[derive(Debug, Clone, PartialEq)]
pub enum SchemeFamily {
    /// `√n`.
    SqrtN,
    /// `√n / (LLn)^5`.
    SqrtNInvLl5,
    /// `√n (LLn)^q`.
    SqrtNPolylog { q: f64 },
    /// Explicit `c_1, c_2, ...`.
    Table { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SchemeConfig", into = "SchemeConfig")]
pub struct TruncationScheme {
    pub family: SchemeFamily,
    /// Levels below `n0` are replaced by `c_{n0}`. `None` means 1 for a bare
    /// scheme and "choose automatically" inside a [`GammaSequence`].
    pub n0: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    #[default]
    SqrtN,
    #[serde(rename = "sqrt_n_invLL5", alias = "sqrt_n_invll5")]
    SqrtNInvLl5,
    SqrtNPolylog,
    Table,
}

/// Flat configuration form of a [`TruncationScheme`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    #[serde(default)]
    pub family: SchemeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n0: Option<u64>,
}

impl TryFrom<SchemeConfig> for TruncationScheme {
    type Error = TruncationError;

    fn try_from(cfg: SchemeConfig) -> Result<Self, TruncationError> {
        let family = match (cfg.family, cfg.q, cfg.values) {
            (SchemeKind::SqrtN, None, None) => SchemeFamily::SqrtN,
            (SchemeKind::SqrtNInvLl5, None, None) => SchemeFamily::SqrtNInvLl5,
            (SchemeKind::SqrtNPolylog, Some(q), None) => SchemeFamily::SqrtNPolylog { q },
            (SchemeKind::Table, None, Some(values)) => SchemeFamily::Table { values },
            (kind, _, _) => return Err(TruncationError::Parameters(kind)),
        };
        if cfg.n0 == Some(0) {
            return Err(TruncationError::ZeroIndex);
        }
        let scheme = TruncationScheme { family, n0: cfg.n0 };
        scheme.check()?;
        Ok(scheme)
    }
}

impl From<TruncationScheme> for SchemeConfig {
    fn from(s: TruncationScheme) -> Self {
        let (family, q, values) = match s.family {
            SchemeFamily::SqrtN => (SchemeKind::SqrtN, None, None),
            SchemeFamily::SqrtNInvLl5 => (SchemeKind::SqrtNInvLl5, None, None),
            SchemeFamily::SqrtNPolylog { q } => (SchemeKind::SqrtNPolylog, Some(q), None),
            SchemeFamily::Table { values } => (SchemeKind::Table, None, Some(values)),
        };
        SchemeConfig { family, q, values, n0: s.n0 }
    }
}

impl TruncationScheme {
    pub fn new(family: SchemeFamily) -> Result<Self, TruncationError> {
        let scheme = TruncationScheme { family, n0: None };
        scheme.check()?;
        Ok(scheme)
    }

    pub fn sqrt_n() -> Self {
        TruncationScheme { family: SchemeFamily::SqrtN, n0: None }
    }

    pub fn with_n0(mut self, n0: u64) -> Self {
        self.n0 = Some(n0.max(1));
        self
    }

    pub fn check(&self) -> Result<(), TruncationError> {
        match &self.family {
            SchemeFamily::Table { values } => {
                let ok = values.iter().all(|v| v.is_finite() && *v > 0.0) && values.windows(2).all(|w| w[0] <= w[1]);
                if ok {
                    Ok(())
                } else {
                    Err(TruncationError::BadTable)
                }
            }
            SchemeFamily::SqrtNPolylog { q } if !q.is_finite() => Err(TruncationError::BadExponent),
            _ => Ok(()),
        }
    }

    pub fn id(&self) -> String {
        let base = match &self.family {
            SchemeFamily::SqrtN => "sqrt_n".to_string(),
            SchemeFamily::SqrtNInvLl5 => "sqrt_n_invLL5".to_string(),
            SchemeFamily::SqrtNPolylog { q } => format!("sqrt_n_polylog(q={q})"),
            SchemeFamily::Table { values } => format!("table(len={})", values.len()),
        };
        match self.n0 {
            Some(n0) if n0 > 1 => format!("{base},n0={n0}"),
            _ => base,
        }
    }

    /// Unshifted level `c_n`.
    ///
    /// Formula families are replaced by their running maximum so that the
    /// sequence is nondecreasing: `√n (LLn)^q` with `q < 0` falls for a while
    /// once `LLn` leaves its floor at `n = 16`, and has a single minimum, so
    /// the running maximum is `max(f(n), √15)` from there on.
    pub fn raw_level(&self, n: u64) -> Result<f64, TruncationError> {
        if n == 0 {
            return Err(TruncationError::ZeroIndex);
        }
        let t = n as f64;
        let formula = |f: f64| f.max(t.min(ENVELOPE_KNEE).sqrt());
        match &self.family {
            SchemeFamily::SqrtN => Ok(t.sqrt()),
            SchemeFamily::SqrtNInvLl5 => Ok(formula(t.sqrt() / ll(t).powi(5))),
            SchemeFamily::SqrtNPolylog { q } => Ok(formula(t.sqrt() * ll(t).powf(*q))),
            SchemeFamily::Table { values } => {
                values.get((n - 1) as usize).copied().ok_or(TruncationError::TableExhausted { n, len: values.len() })
            }
        }
    }

    /// `c_{n ∨ n0}`.
    pub fn c_level(&self, n: u64) -> Result<f64, TruncationError> {
        if n == 0 {
            return Err(TruncationError::ZeroIndex);
        }
        self.raw_level(n.max(self.n0.unwrap_or(1)))
    }

    /// Closed-form answer to the growth condition, where one exists.
    fn analytic_condition3(&self) -> Option<Verdict> {
        match self.family {
            // |log(c_n/√n)| is 0, 5 LLLn or |q| LLLn: all o((log n)^ε).
            SchemeFamily::SqrtN | SchemeFamily::SqrtNInvLl5 | SchemeFamily::SqrtNPolylog { .. } => Some(Verdict::Pass),
            SchemeFamily::Table { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsilonPoint {
    pub n: u64,
    pub c_n: f64,
    pub eps_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition3Report {
    pub scheme: String,
    pub points: Vec<EpsilonPoint>,
    /// Least-squares slope of `ε̂` against `log log n` over the upper half of the grid.
    pub tail_slope: f64,
    pub empirical: Verdict,
    pub analytic: Option<Verdict>,
    pub verdict: Verdict,
}

/// `ε̂_n = log(max(|log(c_n/√n)|, 1)) / log(log n)`.
pub fn eps_hat(c_n: f64, n: u64) -> f64 {
    let t = n as f64;
    let ratio = (c_n / t.sqrt()).ln().abs();
    ratio.max(1.0).ln() / t.ln().ln()
}

/// Geometric grid from `lo` to `hi` with `points` entries (deduplicated).
pub fn geometric_grid(lo: u64, hi: u64, points: usize) -> Vec<u64> {
    let (a, b) = ((lo.max(1) as f64).ln(), (hi.max(lo) as f64).ln());
    let mut grid: Vec<u64> = (0..points.max(2))
        .map(|i| (a + (b - a) * i as f64 / (points.max(2) - 1) as f64).exp().round() as u64)
        .collect();
    grid.dedup();
    grid
}

fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

/// Diagnoses `exp(-(log n)^{ε_n}) <= c_n/√n <= exp((log n)^{ε_n})` with `ε_n -> 0`.
///
/// The finite-grid verdict is PASS when `ε̂` vanishes on the upper half of the
/// grid or falls there, FAIL when it does not fall and stays at or above 1/2, and
/// INCONCLUSIVE otherwise. Built-in formula families get their exact answer.
pub fn validate_condition3(scheme: &TruncationScheme, n_grid: &[u64]) -> Result<Condition3Report, TruncationError> {
    if n_grid.is_empty() || n_grid[0] < 16 || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(TruncationError::BadGrid(16.0));
    }
    let points = n_grid
        .iter()
        .map(|&n| {
            let c_n = scheme.raw_level(n)?;
            Ok(EpsilonPoint { n, c_n, eps_hat: eps_hat(c_n, n) })
        })
        .collect::<Result<Vec<_>, TruncationError>>()?;
    let tail = &points[points.len() / 2..];
    let x: Vec<f64> = tail.iter().map(|p| (p.n as f64).ln().ln()).collect();
    let y: Vec<f64> = tail.iter().map(|p| p.eps_hat).collect();
    let tail_slope = ols_slope(&x, &y);
    let empirical = if y.iter().all(|&e| e == 0.0) || tail_slope < 0.0 {
        Verdict::Pass
    } else if tail_slope >= 0.0 && y.iter().all(|&e| e >= 0.5) {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    };
    let analytic = scheme.analytic_condition3();
    Ok(Condition3Report {
        scheme: scheme.id(),
        points,
        tail_slope,
        empirical,
        analytic,
        verdict: analytic.unwrap_or(empirical),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailCondition {
    /// `τ(t) = o(1/LLt)`.
    Eq7SmallO,
    /// `τ(t) = O(1/LLt)`.
    Eq9BigO,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailReport {
    pub spec: String,
    pub condition: TailCondition,
    pub profile: Vec<TailProfile>,
    pub empirical: Verdict,
    pub analytic: Verdict,
    pub verdict: Verdict,
}

/// Checks a tail condition from the profile of `τ(t) LL(t)`; the verdict is
/// the family's closed-form tail class, the empirical reading is reported
/// alongside.
pub fn validate_tail_condition(
    spec: &DistributionSpec,
    condition: TailCondition,
    t_grid: &[f64],
) -> Result<TailReport, TruncationError> {
    if t_grid.len() < 2 {
        return Err(TruncationError::BadGrid(0.0));
    }
    let profile = spec.tail_profile(t_grid)?;
    let values: Vec<f64> = profile.iter().map(|p| p.tau_times_llt).collect();
    let half = values.len() / 2;
    let head_max = values[..half.max(1)].iter().cloned().fold(0.0, f64::max);
    let tail = &values[half..];
    let tail_max = tail.iter().cloned().fold(0.0, f64::max);
    let last = tail[tail.len() - 1];
    let falling = tail.windows(2).all(|w| w[1] <= w[0]);
    let rising = tail.windows(2).all(|w| w[1] >= w[0]) && last > tail[0];
    let empirical = match condition {
        TailCondition::Eq7SmallO => {
            if last <= 1e-3 * head_max.max(1e-300) || last == 0.0 {
                Verdict::Pass
            } else if !falling || last > 0.5 * head_max {
                Verdict::Fail
            } else {
                Verdict::Inconclusive
            }
        }
        // New highs in the upper half are ambiguous: a profile converging from
        // below and one growing like a power of LLt look alike while LLt <= 7.
        TailCondition::Eq9BigO => {
            if (rising && tail_max > 2.0 * head_max) || tail_max > 4.0 * head_max {
                Verdict::Fail
            } else if tail_max <= head_max {
                Verdict::Pass
            } else {
                Verdict::Inconclusive
            }
        }
    };
    let analytic = match (spec.tail_class(), condition) {
        (TailClass::Negligible, _) => Verdict::Pass,
        (TailClass::Critical(_), TailCondition::Eq7SmallO) => Verdict::Fail,
        (TailClass::Critical(_), TailCondition::Eq9BigO) => Verdict::Pass,
        (TailClass::Divergent, _) => Verdict::Fail,
    };
    Ok(TailReport { spec: spec.id(), condition, profile, empirical, analytic, verdict: analytic })
}

/// Size class of an increment relative to the index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    /// `|x| <= √n / (LLn)^5`.
    Prime,
    /// `√n / (LLn)^5 < |x| <= √(n LLn)`.
    DoublePrime,
    /// `|x| > √(n LLn)`.
    TriplePrime,
}

pub fn split_thresholds(n: u64) -> (f64, f64) {
    let t = n.max(1) as f64;
    let llt = ll(t);
    (t.sqrt() / llt.powi(5), (t * llt).sqrt())
}

pub fn triple_split(x: &Vector, n: u64) -> Split {
    let (lo, hi) = split_thresholds(n);
    let r = x.norm();
    if r <= lo {
        Split::Prime
    } else if r <= hi {
        Split::DoublePrime
    } else {
        Split::TriplePrime
    }
}

/// Cached normalizer at one index (or one checkpoint).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaEntry {
    /// First index this entry applies to.
    pub n: u64,
    /// `c_{n ∨ n0}`.
    pub level: f64,
    /// `trace(Γ_n²) / d`.
    pub sigma2: f64,
    pub gamma: SymMatrix,
    pub gamma_inv: SymMatrix,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// `Some(s)` when `Γ_n⁻¹ = s I`.
    pub inv_scale: Option<f64>,
}

impl GammaEntry {
    fn from_second_moment(n: u64, level: f64, a2: &SymMatrix) -> Result<Self, TruncationError> {
        let gamma = psd_sqrt(a2)?;
        let e = eigen(&gamma);
        let gamma_inv = inverse(&gamma).map_err(|err| match err {
            MatrixError::NearSingular(l) => TruncationError::Singular { n, lambda_min: l },
            other => other.into(),
        })?;
        Ok(GammaEntry {
            n,
            level,
            sigma2: a2.trace() / a2.dim() as f64,
            gamma,
            gamma_inv,
            lambda_min: e.lambda_min(),
            lambda_max: e.lambda_max(),
            inv_scale: scalar_multiple(&gamma_inv),
        })
    }

    /// `|Γ_n⁻¹ s|`.
    #[inline]
    pub fn normalized_norm(&self, s: &Vector) -> f64 {
        match self.inv_scale {
            Some(k) => k * s.norm(),
            None => self.gamma_inv.mul_vec(s).norm(),
        }
    }
}

fn scalar_multiple(m: &SymMatrix) -> Option<f64> {
    let d = m.dim();
    let s = m.get(0, 0);
    for i in 0..d {
        for j in 0..d {
            let want = if i == j { s } else { 0.0 };
            if m.get(i, j) != want {
                return None;
            }
        }
    }
    Some(s)
}

/// `Γ_n` for `n = 1..=horizon`: exact for `n <= DENSE_LIMIT`, then on
/// geometric checkpoints and held constant in between.
#[derive(Debug, Clone)]
pub struct GammaSequence {
    spec: DistributionSpec,
    scheme: TruncationScheme,
    horizon: u64,
    entries: Vec<GammaEntry>,
    empirical: bool,
}

impl GammaSequence {
    /// Population normalizers from the analytic truncated moments. A scheme
    /// without `n0` gets the automatic choice.
    pub fn new(spec: &DistributionSpec, scheme: &TruncationScheme, horizon: u64) -> Result<Self, TruncationError> {
        Self::with_checkpoints(spec, scheme, horizon, DENSE_LIMIT, CHECKPOINT_RATIO)
    }

    /// Same, with a custom dense range and checkpoint ratio.
    pub fn with_checkpoints(
        spec: &DistributionSpec,
        scheme: &TruncationScheme,
        horizon: u64,
        dense_limit: u64,
        ratio: f64,
    ) -> Result<Self, TruncationError> {
        scheme.check()?;
        let mut scheme = scheme.clone();
        if scheme.n0.is_none() {
            scheme.n0 = Some(auto_n0(spec, &scheme)?);
        }
        let moment = |level: f64| spec.truncated_second_moment(level).map_err(TruncationError::from);
        let entries = build_entries(&scheme, horizon, dense_limit, ratio, moment)?;
        Ok(GammaSequence { spec: spec.clone(), scheme, horizon: horizon.max(1), entries, empirical: false })
    }

    /// Diagnostic plug-in variant: `A(c)²` estimated from `sample_size` pilot
    /// draws instead of the law. Not for acceptance runs.
    pub fn empirical(
        spec: &DistributionSpec,
        scheme: &TruncationScheme,
        horizon: u64,
        sample_size: usize,
        seed: u64,
    ) -> Result<Self, TruncationError> {
        scheme.check()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draws: Vec<(f64, Vector)> = (0..sample_size)
            .map(|_| {
                let x = spec.sample(&mut rng);
                (x.norm(), x)
            })
            .collect();
        draws.sort_by(|a, b| a.0.total_cmp(&b.0));
        let d = spec.dim();
        let mut prefix = Vec::with_capacity(draws.len() + 1);
        let mut acc = SymMatrix::zeros(d);
        prefix.push(acc);
        for (_, x) in &draws {
            acc.add_outer(x, 1.0);
            prefix.push(acc);
        }
        let m = sample_size.max(1) as f64;
        let moment = |level: f64| -> Result<SymMatrix, TruncationError> {
            let count = draws.partition_point(|(r, _)| *r <= level);
            Ok(prefix[count].scaled(1.0 / m))
        };
        let mut scheme = scheme.clone();
        if scheme.n0.is_none() {
            scheme.n0 = Some(search_n0(&scheme, moment)?);
        }
        let entries = build_entries(&scheme, horizon, DENSE_LIMIT, CHECKPOINT_RATIO, moment)?;
        Ok(GammaSequence { spec: spec.clone(), scheme, horizon: horizon.max(1), entries, empirical: true })
    }

    pub fn spec(&self) -> &DistributionSpec {
        &self.spec
    }

    /// The scheme with its resolved `n0`.
    pub fn scheme(&self) -> &TruncationScheme {
        &self.scheme
    }

    pub fn n0(&self) -> u64 {
        self.scheme.n0.unwrap_or(1)
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn is_empirical(&self) -> bool {
        self.empirical
    }

    pub fn entries(&self) -> &[GammaEntry] {
        &self.entries
    }

    /// The cache of `λ Γ_n`, as for increments multiplied by `λ > 0`.
    pub fn scaled(&self, lambda: f64) -> GammaSequence {
        let mut out = self.clone();
        for e in &mut out.entries {
            e.gamma = e.gamma.scaled(lambda);
            e.gamma_inv = e.gamma_inv.scaled(1.0 / lambda);
            e.inv_scale = e.inv_scale.map(|s| s / lambda);
            e.sigma2 *= lambda * lambda;
            e.lambda_min *= lambda;
            e.lambda_max *= lambda;
        }
        out
    }

    /// Entry in force at index `n` (`1 <= n <= horizon`).
    pub fn gamma_at(&self, n: u64) -> Result<&GammaEntry, TruncationError> {
        if n == 0 {
            return Err(TruncationError::ZeroIndex);
        }
        let i = self.entries.partition_point(|e| e.n <= n) - 1;
        Ok(&self.entries[i])
    }

    /// Sequential reader for increasing indices.
    pub fn cursor(&self) -> GammaCursor<'_> {
        GammaCursor { entries: &self.entries, pos: 0 }
    }
}

/// Walks the cache for nondecreasing indices in amortized O(1).
#[derive(Debug, Clone)]
pub struct GammaCursor<'a> {
    entries: &'a [GammaEntry],
    pos: usize,
}

impl<'a> GammaCursor<'a> {
    #[inline]
    pub fn at(&mut self, n: u64) -> &'a GammaEntry {
        while self.pos + 1 < self.entries.len() && self.entries[self.pos + 1].n <= n {
            self.pos += 1;
        }
        &self.entries[self.pos]
    }
}

fn checkpoint_indices(horizon: u64, dense_limit: u64, ratio: f64) -> Vec<u64> {
    let horizon = horizon.max(1);
    let mut out: Vec<u64> = (1..=horizon.min(dense_limit)).collect();
    let mut x = dense_limit as f64;
    loop {
        x *= ratio;
        let n = x.ceil() as u64;
        if n > horizon {
            break;
        }
        if out.last().is_some_and(|&last| n <= last) {
            continue;
        }
        out.push(n);
    }
    out
}

fn build_entries(
    scheme: &TruncationScheme,
    horizon: u64,
    dense_limit: u64,
    ratio: f64,
    moment: impl Fn(f64) -> Result<SymMatrix, TruncationError>,
) -> Result<Vec<GammaEntry>, TruncationError> {
    let mut entries: Vec<GammaEntry> = Vec::new();
    for n in checkpoint_indices(horizon, dense_limit, ratio) {
        let level = scheme.c_level(n)?;
        match entries.last() {
            // Below n0 every index shares c_{n0}.
            Some(prev) if prev.level == level => {
                let mut e = *prev;
                e.n = n;
                entries.push(e);
            }
            _ => entries.push(GammaEntry::from_second_moment(n, level, &moment(level)?)?),
        }
    }
    Ok(entries)
}

fn auto_n0(spec: &DistributionSpec, scheme: &TruncationScheme) -> Result<u64, TruncationError> {
    search_n0(scheme, |c| spec.truncated_second_moment(c).map_err(TruncationError::from))
}

/// Smallest `n` with `λ_min(A(c_n)) >= AUTO_N0_LAMBDA`, found by doubling then
/// bisection (`c_n` and hence `λ_min` are nondecreasing).
fn search_n0(
    scheme: &TruncationScheme,
    moment: impl Fn(f64) -> Result<SymMatrix, TruncationError>,
) -> Result<u64, TruncationError> {
    let ok = |n: u64| -> Result<bool, TruncationError> {
        let c = match scheme.raw_level(n) {
            Ok(c) => c,
            Err(TruncationError::TableExhausted { .. }) => return Ok(false),
            Err(e) => return Err(e),
        };
        Ok(eigen(&psd_sqrt(&moment(c)?)?).lambda_min() >= AUTO_N0_LAMBDA)
    };
    if ok(1)? {
        return Ok(1);
    }
    let mut hi = 2u64;
    while !ok(hi)? {
        if hi >= AUTO_N0_LIMIT {
            return Err(TruncationError::NoInvertibleIndex(AUTO_N0_LIMIT));
        }
        if let SchemeFamily::Table { values } = &scheme.family {
            if hi as usize >= values.len() {
                return Err(TruncationError::NoInvertibleIndex(values.len() as u64));
            }
            hi = (hi * 2).min(values.len() as u64);
        } else {
            hi *= 2;
        }
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `B_n = Σ_{j=1}^n σ_j²`, `σ_j² = E X² 1{|X| <= c_{j ∨ n0}}`.
pub fn feller_bn(spec: &DistributionSpec, scheme: &TruncationScheme, n: u64) -> Result<f64, TruncationError> {
    if spec.dim() != 1 {
        return Err(TruncationError::FellerDimension(spec.dim()));
    }
    let mut total = 0.0;
    let mut last: Option<(f64, f64)> = None;
    for j in 1..=n {
        let c = scheme.c_level(j)?;
        let s2 = match last {
            Some((lc, ls)) if lc == c => ls,
            _ => spec.truncated_variance(c)?,
        };
        last = Some((c, s2));
        total += s2;
    }
    Ok(total)
}

/// Deterministic driver `(1 - σ_n) b_{1,n}` of the shifted limit.
pub fn shift_driver(gs_sigma2: f64, n: u64) -> f64 {
    let t = n as f64;
    let b = 2.0 * ll(t) + lll(t) / 2.0 - std::f64::consts::PI.ln() / 2.0;
    (1.0 - gs_sigma2.sqrt()) * b
}
