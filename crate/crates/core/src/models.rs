//! Increment laws: samplers together with their analytic truncated moments.
//!
//! Every family is symmetric under coordinate permutations and sign flips,
//! so `E[X Xᵀ 1{|X| <= t}]` is a multiple of the identity. All families are
//! normalized to `Cov(X) = I`.
//!
//! The two ladder families put symmetric atoms at `t_k = exp(exp(k))`,
//! `k >= k0`, where `LL(t_k) = k`. The atom weights are chosen so that the
//! tail functional `τ(t) = E|X|² 1{|X| >= t}` takes the value `G(k)` on
//! `(t_{k-1}, t_k]`:
//!
//! * `atom_ladder(c)`: `G(k) = c / k`, hence `τ(t) LL(t) -> c`;
//! * `atom_ladder_fat`: `G(k) = 1 / √k`, hence `τ(t) LL(t) -> ∞`.
//!
//! The remaining mass is spread uniformly over a ball small enough to sit
//! below the first rung. Moments are computed for the full infinite ladder by
//! telescoping; only the sampler stops at the last rung whose probability is
//! representable.

use std::f64::consts::E;

use rand::distr::{Bernoulli, Distribution};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::iterlog::ll;
use crate::matrix::{SymMatrix, Vector, MAX_DIM};
use crate::quadrature::{integrate_pieces_vec, QuadratureError, Tolerance};
use crate::special::{gamma_pq, SpecialError};

/// Half-width of the unit-variance uniform law, `√3`.
const CUBE_HALF_WIDTH: f64 = 1.732_050_807_568_877_2;

/// Largest dimension for which the cube's truncated moments are computed
/// (nested quadrature, cost grows geometrically with the dimension).
pub const CUBE_MAX_DIM: usize = 4;

/// Atoms with probability below this are never sampled.
const MIN_ATOM_PROBABILITY: f64 = 1e-300;

/// `exp(exp(k))` is finite in `f64` up to this rung.
const LAST_FINITE_RUNG: u32 = 6;

pub const DEFAULT_K0: u32 = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dimension {0} outside 1..={MAX_DIM}")]
    Dimension(usize),
    #[error("uniform_cube moments are only available for d <= {CUBE_MAX_DIM}, got {0}")]
    CubeDimension(usize),
    #[error("invalid ladder parameters: {0}")]
    Ladder(String),
    #[error("levels must be ascending")]
    UnsortedGrid,
    #[error("parameter `{0}` does not apply to family {1}")]
    UnusedParameter(&'static str, &'static str),
    #[error("family {0} requires parameter `{1}`")]
    MissingParameter(&'static str, &'static str),
    #[error(transparent)]
    Special(#[from] SpecialError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionMode {
    /// Uniform direction on the sphere.
    #[default]
    Isotropic,
    /// One of the `2d` signed coordinate axes, uniformly.
    Axis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyId {
    GaussianIso,
    RademacherProduct,
    UniformCube,
    AtomLadder,
    AtomLadderFat,
}

impl FamilyId {
    pub fn name(self) -> &'static str {
        match self {
            FamilyId::GaussianIso => "gaussian_iso",
            FamilyId::RademacherProduct => "rademacher_product",
            FamilyId::UniformCube => "uniform_cube",
            FamilyId::AtomLadder => "atom_ladder",
            FamilyId::AtomLadderFat => "atom_ladder_fat",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    GaussianIso,
    RademacherProduct,
    UniformCube,
    AtomLadder { c: f64, k0: u32, direction: DirectionMode },
    AtomLadderFat { k0: u32, direction: DirectionMode },
}

impl Family {
    pub fn id(&self) -> FamilyId {
        match self {
            Family::GaussianIso => FamilyId::GaussianIso,
            Family::RademacherProduct => FamilyId::RademacherProduct,
            Family::UniformCube => FamilyId::UniformCube,
            Family::AtomLadder { .. } => FamilyId::AtomLadder,
            Family::AtomLadderFat { .. } => FamilyId::AtomLadderFat,
        }
    }
}

/// How `τ(t) LL(t)` behaves as `t -> ∞`, known in closed form for every family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailClass {
    /// `τ(t) = o(1 / LLt)`.
    Negligible,
    /// `τ(t) LL(t) -> c > 0`.
    Critical(f64),
    /// `τ(t) LL(t) -> ∞`.
    Divergent,
}

/// One level of a tail profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailProfile {
    pub t: f64,
    pub tau: f64,
    pub tau_times_llt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum LadderWeights {
    Thin(f64),
    Fat,
}

impl LadderWeights {
    /// `G(k) = Σ_{j >= k} t_j² p_j`.
    fn tail_from(self, k: u32) -> f64 {
        match self {
            LadderWeights::Thin(c) => c / k as f64,
            LadderWeights::Fat => 1.0 / (k as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone)]
struct Ladder {
    weights: LadderWeights,
    k0: u32,
    direction: DirectionMode,
    /// `t_k` for `k = k0..=LAST_FINITE_RUNG`.
    levels: Vec<f64>,
    /// Sampled rungs `k0..=k0 + radii.len() - 1`.
    radii: Vec<f64>,
    /// Draws an atom rather than the base component.
    pick_atom: Bernoulli,
    /// Entry `i`: stop at rung `i` given that rung `i` or higher is reached.
    stop_at: Vec<Bernoulli>,
    base_radius: f64,
    /// `E|X|² 1{base}`.
    base_second_moment: f64,
}

impl Ladder {
    fn new(weights: LadderWeights, k0: u32, direction: DirectionMode, dim: usize) -> Result<Self, ModelError> {
        if !(1..=5).contains(&k0) {
            return Err(ModelError::Ladder(format!("k0 must be in 1..=5, got {k0}")));
        }
        if let LadderWeights::Thin(c) = weights {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(ModelError::Ladder(format!("c must be finite and >= 0, got {c}")));
            }
        }
        let d = dim as f64;
        let ladder_moment = weights.tail_from(k0);
        if ladder_moment >= d {
            return Err(ModelError::Ladder(format!(
                "ladder second moment {ladder_moment} leaves no room for the base component (d = {dim})"
            )));
        }
        let levels: Vec<f64> = (k0..=LAST_FINITE_RUNG).map(|k| (k as f64).exp().exp()).collect();
        let mut probs = Vec::new();
        for k in k0..=LAST_FINITE_RUNG {
            let weight = weights.tail_from(k) - weights.tail_from(k + 1);
            // p_k = weight / t_k², in logs to stay finite.
            let p = if weight > 0.0 { (weight.ln() - 2.0 * (k as f64).exp()).exp() } else { 0.0 };
            if p < MIN_ATOM_PROBABILITY {
                break;
            }
            probs.push(p);
        }
        let radii = levels[..probs.len()].to_vec();
        let atom_total: f64 = probs.iter().sum();
        let base_weight = 1.0 - atom_total;
        let base_second_moment = d - ladder_moment;
        // Uniform on a ball of radius ρ: E|X|² = d ρ² / (d + 2).
        let base_radius = (base_second_moment * (d + 2.0) / (d * base_weight)).sqrt();
        if base_radius >= levels[0] {
            return Err(ModelError::Ladder("base component reaches the first rung".into()));
        }
        let mut stop_at = Vec::with_capacity(probs.len());
        for i in 0..probs.len() {
            let rest: f64 = probs[i..].iter().sum();
            let p = if rest > 0.0 { (probs[i] / rest).min(1.0) } else { 1.0 };
            stop_at.push(Bernoulli::new(p).expect("probability in [0, 1]"));
        }
        Ok(Ladder {
            weights,
            k0,
            direction,
            levels,
            radii,
            pick_atom: Bernoulli::new(atom_total).expect("probability in [0, 1]"),
            stop_at,
            base_radius,
            base_second_moment,
        })
    }

    fn level(&self, k: u32) -> f64 {
        if k > LAST_FINITE_RUNG {
            f64::INFINITY
        } else {
            self.levels[(k - self.k0) as usize]
        }
    }

    /// Ladder part of `E|X|² 1{|X| > t}` (strict) or `1{|X| >= t}` (inclusive).
    fn atom_tail(&self, t: f64, inclusive: bool) -> f64 {
        let mut k = self.k0;
        loop {
            let level = self.level(k);
            let above = if inclusive { level >= t } else { level > t };
            if above {
                return self.weights.tail_from(k);
            }
            if level.is_infinite() {
                return 0.0;
            }
            k += 1;
        }
    }

    /// Base part of `E|X|² 1{|X| > t}`; the base law is continuous.
    fn base_tail(&self, t: f64, dim: usize) -> f64 {
        if t >= self.base_radius {
            0.0
        } else {
            self.base_second_moment * (1.0 - (t / self.base_radius).powi(dim as i32 + 2))
        }
    }
}

/// A catalogued increment law in dimension `dim`.
#[derive(Debug, Clone)]
pub struct DistributionSpec {
    family: Family,
    dim: usize,
    ladder: Option<Ladder>,
}

impl PartialEq for DistributionSpec {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family && self.dim == other.dim
    }
}

impl DistributionSpec {
    pub fn new(family: Family, dim: usize) -> Result<Self, ModelError> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(ModelError::Dimension(dim));
        }
        let ladder = match family {
            Family::UniformCube if dim > CUBE_MAX_DIM => return Err(ModelError::CubeDimension(dim)),
            Family::AtomLadder { c, k0, direction } => Some(Ladder::new(LadderWeights::Thin(c), k0, direction, dim)?),
            Family::AtomLadderFat { k0, direction } => Some(Ladder::new(LadderWeights::Fat, k0, direction, dim)?),
            _ => None,
        };
        Ok(DistributionSpec { family, dim, ladder })
    }

    pub fn gaussian(dim: usize) -> Result<Self, ModelError> {
        Self::new(Family::GaussianIso, dim)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Short identifier used in output metadata.
    pub fn id(&self) -> String {
        match self.family {
            Family::AtomLadder { c, k0, direction } => {
                format!("atom_ladder(c={c},k0={k0},{})", direction_name(direction))
            }
            Family::AtomLadderFat { k0, direction } => {
                format!("atom_ladder_fat(k0={k0},{})", direction_name(direction))
            }
            other => other.id().name().to_string(),
        }
    }

    /// Ladder rungs `t_k` that can actually be drawn, in increasing order.
    pub fn atom_levels(&self) -> &[f64] {
        self.ladder.as_ref().map_or(&[], |l| &l.radii)
    }

    /// Radius of the bounded base component of a ladder law.
    pub fn base_radius(&self) -> Option<f64> {
        self.ladder.as_ref().map(|l| l.base_radius)
    }

    /// `t_k = exp(exp(k))`, or `None` for non-ladder families or `k < k0`.
    pub fn rung(&self, k: u32) -> Option<f64> {
        let ladder = self.ladder.as_ref()?;
        (k >= ladder.k0).then(|| ladder.level(k))
    }

    pub fn tail_class(&self) -> TailClass {
        match self.family {
            Family::AtomLadder { c, .. } if c > 0.0 => TailClass::Critical(c),
            Family::AtomLadderFat { .. } => TailClass::Divergent,
            _ => TailClass::Negligible,
        }
    }

    /// One i.i.d. draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        let mut x = Vector::zeros(self.dim);
        match self.family {
            Family::GaussianIso => {
                for v in x.as_mut_slice() {
                    *v = rng.sample(StandardNormal);
                }
            }
            Family::RademacherProduct => {
                let bits = rng.next_u64();
                for (i, v) in x.as_mut_slice().iter_mut().enumerate() {
                    *v = if bits >> i & 1 == 1 { 1.0 } else { -1.0 };
                }
            }
            Family::UniformCube => {
                for v in x.as_mut_slice() {
                    *v = (2.0 * rng.random::<f64>() - 1.0) * CUBE_HALF_WIDTH;
                }
            }
            Family::AtomLadder { .. } | Family::AtomLadderFat { .. } => {
                let ladder = self.ladder.as_ref().expect("ladder families carry a ladder");
                if ladder.pick_atom.sample(rng) {
                    let mut i = 0;
                    while i + 1 < ladder.stop_at.len() && !ladder.stop_at[i].sample(rng) {
                        i += 1;
                    }
                    let dir = match ladder.direction {
                        DirectionMode::Isotropic => unit_direction(self.dim, rng),
                        DirectionMode::Axis => axis_direction(self.dim, rng),
                    };
                    x = dir.scaled(ladder.radii[i]);
                } else {
                    x = uniform_ball(self.dim, ladder.base_radius, rng);
                }
            }
        }
        x
    }

    /// Scalar `m(t) / d` where `m(t) = E|X|² 1{|X| <= t}`; the truncated
    /// second-moment matrix is this value times the identity.
    pub fn truncated_variance(&self, t: f64) -> Result<f64, ModelError> {
        let d = self.dim as f64;
        if t <= 0.0 {
            return Ok(0.0);
        }
        let m = match self.family {
            Family::GaussianIso => {
                let (p, _) = gamma_pq(d / 2.0 + 1.0, t * t / 2.0)?;
                d * p
            }
            Family::RademacherProduct => {
                if t >= d.sqrt() {
                    d
                } else {
                    0.0
                }
            }
            Family::UniformCube => cube_truncated_moment(self.dim, t)?,
            Family::AtomLadder { .. } | Family::AtomLadderFat { .. } => {
                let ladder = self.ladder.as_ref().expect("ladder families carry a ladder");
                d - ladder.base_tail(t, self.dim) - ladder.atom_tail(t, false)
            }
        };
        Ok(m / d)
    }

    /// `A(t)² = [E X^(i) X^(j) 1{|X| <= t}]`.
    pub fn truncated_second_moment(&self, t: f64) -> Result<SymMatrix, ModelError> {
        Ok(SymMatrix::scaled_identity(self.dim, self.truncated_variance(t)?))
    }

    /// `τ(t) = E|X|² 1{|X| >= t}`.
    pub fn tail_second_moment(&self, t: f64) -> Result<f64, ModelError> {
        let d = self.dim as f64;
        if t <= 0.0 {
            return Ok(d);
        }
        Ok(match self.family {
            Family::GaussianIso => {
                let (_, q) = gamma_pq(d / 2.0 + 1.0, t * t / 2.0)?;
                d * q
            }
            Family::RademacherProduct => {
                if t <= d.sqrt() {
                    d
                } else {
                    0.0
                }
            }
            Family::UniformCube => d - cube_truncated_moment(self.dim, t)?,
            Family::AtomLadder { .. } | Family::AtomLadderFat { .. } => {
                let ladder = self.ladder.as_ref().expect("ladder families carry a ladder");
                ladder.base_tail(t, self.dim) + ladder.atom_tail(t, true)
            }
        })
    }

    /// `τ(t)` and `τ(t) LL(t)` on an ascending grid.
    pub fn tail_profile(&self, t_grid: &[f64]) -> Result<Vec<TailProfile>, ModelError> {
        if t_grid.windows(2).any(|w| w[0] > w[1]) {
            return Err(ModelError::UnsortedGrid);
        }
        t_grid
            .iter()
            .map(|&t| {
                let tau = self.tail_second_moment(t)?;
                Ok(TailProfile { t, tau, tau_times_llt: tau * ll(t) })
            })
            .collect()
    }
}

fn direction_name(mode: DirectionMode) -> &'static str {
    match mode {
        DirectionMode::Isotropic => "isotropic",
        DirectionMode::Axis => "axis",
    }
}

fn random_sign<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.next_u32() & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

fn unit_direction<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vector {
    if dim == 1 {
        return Vector::from_slice(&[random_sign(rng)]);
    }
    loop {
        let mut v = Vector::zeros(dim);
        for x in v.as_mut_slice() {
            *x = rng.sample(StandardNormal);
        }
        let norm = v.norm();
        if norm > 1e-300 {
            return v.scaled(1.0 / norm);
        }
    }
}

fn axis_direction<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vector {
    let mut v = Vector::zeros(dim);
    let axis = rng.random_range(0..dim);
    v[axis] = random_sign(rng);
    v
}

fn uniform_ball<R: Rng + ?Sized>(dim: usize, radius: f64, rng: &mut R) -> Vector {
    if dim == 1 {
        return Vector::from_slice(&[(2.0 * rng.random::<f64>() - 1.0) * radius]);
    }
    let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
    unit_direction(dim, rng).scaled(r)
}

/// `E|U|² 1{|U| <= t}` for `U` uniform on `[-√3, √3]^dim`.
fn cube_truncated_moment(dim: usize, t: f64) -> Result<f64, ModelError> {
    let [_, m] = cube_moments(dim, t * t)?;
    Ok(m)
}

/// `[P(Σ U_i² <= s), E Σ U_i² 1{Σ U_i² <= s}]` for `U_i` i.i.d. uniform on
/// `[0, h]`, `h = √3`. Recursion on the dimension with the last coordinate
/// integrated out; `x = √s sin θ` removes the square-root endpoint behaviour
/// and the integrand is split where the inner law has kinks.
fn cube_moments(dim: usize, s: f64) -> Result<[f64; 2], ModelError> {
    let h = CUBE_HALF_WIDTH;
    let h2 = h * h;
    if s <= 0.0 {
        return Ok([0.0, 0.0]);
    }
    if s >= dim as f64 * h2 {
        return Ok([1.0, dim as f64]);
    }
    let r = s.sqrt();
    if dim == 1 {
        let x = r.min(h);
        return Ok([x / h, x * x * x / (3.0 * h)]);
    }
    let theta_max = if r <= h { std::f64::consts::FRAC_PI_2 } else { (h / r).asin() };
    let mut breaks: Vec<f64> = (1..dim)
        .filter_map(|m| {
            let c = (m as f64 * h2).sqrt() / r;
            (c < 1.0).then(|| c.acos())
        })
        .filter(|&th| th > 0.0 && th < theta_max)
        .collect();
    breaks.sort_by(f64::total_cmp);
    let tol = Tolerance { abs: 1e-14, rel: 1e-14, max_subdivisions: 400 };
    let inner_err = std::cell::Cell::new(None);
    let integrand = |theta: f64| {
        let (sin, cos) = theta.sin_cos();
        let x = r * sin;
        let jac = r * cos / h;
        match cube_moments(dim - 1, s * cos * cos) {
            Ok([f, m]) => [jac * f, jac * (m + x * x * f)],
            Err(e) => {
                inner_err.set(Some(e));
                [0.0, 0.0]
            }
        }
    };
    let out = integrate_pieces_vec(integrand, 0.0, theta_max, &breaks, tol)?;
    if let Some(e) = inner_err.take() {
        return Err(e);
    }
    Ok(out)
}

/// Raw configuration form of a [`DistributionSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecConfig {
    pub family: FamilyId,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k0: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<DirectionMode>,
}

fn default_dim() -> usize {
    1
}

impl SpecConfig {
    pub fn family(id: FamilyId, dim: usize) -> Self {
        SpecConfig { family: id, dim, c: None, k0: None, direction: None }
    }

    pub fn build(&self) -> Result<DistributionSpec, ModelError> {
        let name = self.family.name();
        let no_ladder_params = || -> Result<(), ModelError> {
            if self.c.is_some() {
                return Err(ModelError::UnusedParameter("c", name));
            }
            if self.k0.is_some() {
                return Err(ModelError::UnusedParameter("k0", name));
            }
            if self.direction.is_some() {
                return Err(ModelError::UnusedParameter("direction", name));
            }
            Ok(())
        };
        let family = match self.family {
            FamilyId::GaussianIso => no_ladder_params().map(|_| Family::GaussianIso)?,
            FamilyId::RademacherProduct => no_ladder_params().map(|_| Family::RademacherProduct)?,
            FamilyId::UniformCube => no_ladder_params().map(|_| Family::UniformCube)?,
            FamilyId::AtomLadder => Family::AtomLadder {
                c: self.c.ok_or(ModelError::MissingParameter(name, "c"))?,
                k0: self.k0.unwrap_or(DEFAULT_K0),
                direction: self.direction.unwrap_or_default(),
            },
            FamilyId::AtomLadderFat => {
                if self.c.is_some() {
                    return Err(ModelError::UnusedParameter("c", name));
                }
                Family::AtomLadderFat {
                    k0: self.k0.unwrap_or(DEFAULT_K0),
                    direction: self.direction.unwrap_or_default(),
                }
            }
        };
        DistributionSpec::new(family, self.dim)
    }
}

impl From<&DistributionSpec> for SpecConfig {
    fn from(spec: &DistributionSpec) -> Self {
        let mut cfg = SpecConfig::family(spec.family.id(), spec.dim);
        match spec.family {
            Family::AtomLadder { c, k0, direction } => {
                cfg.c = Some(c);
                cfg.k0 = Some(k0);
                cfg.direction = Some(direction);
            }
            Family::AtomLadderFat { k0, direction } => {
                cfg.k0 = Some(k0);
                cfg.direction = Some(direction);
            }
            _ => {}
        }
        cfg
    }
}

/// `exp(exp(k))`.
pub fn ladder_level(k: u32) -> f64 {
    E.powf((k as f64).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::loewner_leq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ladder(c: f64) -> DistributionSpec {
        DistributionSpec::new(Family::AtomLadder { c, k0: 2, direction: DirectionMode::Isotropic }, 1).unwrap()
    }

    fn fat() -> DistributionSpec {
        DistributionSpec::new(Family::AtomLadderFat { k0: 2, direction: DirectionMode::Isotropic }, 1).unwrap()
    }

    fn catalogue() -> Vec<DistributionSpec> {
        let mut v = Vec::new();
        for d in 1..=3 {
            v.push(DistributionSpec::new(Family::GaussianIso, d).unwrap());
            v.push(DistributionSpec::new(Family::RademacherProduct, d).unwrap());
            v.push(DistributionSpec::new(Family::UniformCube, d).unwrap());
            for direction in [DirectionMode::Isotropic, DirectionMode::Axis] {
                v.push(DistributionSpec::new(Family::AtomLadder { c: 0.5, k0: 2, direction }, d).unwrap());
                v.push(DistributionSpec::new(Family::AtomLadderFat { k0: 2, direction }, d).unwrap());
            }
        }
        v
    }

    #[test]
    fn zero_level_and_full_level() {
        for spec in catalogue() {
            assert_eq!(spec.truncated_variance(0.0).unwrap(), 0.0, "{}", spec.id());
            assert_eq!(spec.truncated_variance(f64::INFINITY).unwrap(), 1.0, "{}", spec.id());
            assert_eq!(spec.tail_second_moment(0.0).unwrap(), spec.dim() as f64);
        }
    }

    #[test]
    fn gaussian_truncated_moment_at_one() {
        // (2Φ(1) - 1) - 2φ(1), evaluated to 30 digits.
        let v = DistributionSpec::gaussian(1).unwrap().truncated_variance(1.0).unwrap();
        assert!((v - 0.198_748_043_098_799_2).abs() < 1e-14);
    }

    #[test]
    fn rademacher_atom_is_included_at_its_level() {
        let spec = DistributionSpec::new(Family::RademacherProduct, 1).unwrap();
        assert_eq!(spec.truncated_variance(1.0).unwrap(), 1.0);
        assert_eq!(spec.truncated_variance(0.999).unwrap(), 0.0);
        let spec = DistributionSpec::new(Family::RademacherProduct, 2).unwrap();
        assert_eq!(spec.truncated_variance(2f64.sqrt()).unwrap(), 1.0);
    }

    #[test]
    fn cube_moments_one_dimension_closed_form() {
        let spec = DistributionSpec::new(Family::UniformCube, 1).unwrap();
        let h = CUBE_HALF_WIDTH;
        for &t in &[0.1, 0.5, 1.0, 1.7] {
            let want = t * t * t / (3.0 * h);
            assert!((spec.truncated_variance(t).unwrap() - want).abs() < 1e-15);
        }
        assert_eq!(spec.truncated_variance(h).unwrap(), 1.0);
    }

    /// Area of the quarter disk of radius r clipped to [0, h]².
    fn clipped_quarter_disk_area(r: f64, h: f64) -> f64 {
        if r <= h {
            std::f64::consts::PI * r * r / 4.0
        } else if r >= h * 2f64.sqrt() {
            h * h
        } else {
            h * (r * r - h * h).sqrt() + r * r / 2.0 * (std::f64::consts::FRAC_PI_2 - 2.0 * (h / r).acos())
        }
    }

    #[test]
    fn cube_probability_matches_disk_geometry() {
        let h = CUBE_HALF_WIDTH;
        for &r in &[0.3, 1.0, 1.7, 1.8, 2.0, 2.3, 2.44] {
            let [p, _] = cube_moments(2, r * r).unwrap();
            let want = clipped_quarter_disk_area(r, h) / (h * h);
            assert!((p - want).abs() < 1e-12, "r = {r}: {p} vs {want}");
        }
    }

    /// `∫∫ (x² + y²)` over the quarter disk of radius r clipped to [0, h]², in
    /// polar form: each ray contributes `L(θ)⁴ / 4`.
    fn clipped_quarter_disk_moment(r: f64, h: f64) -> f64 {
        let half_pi = std::f64::consts::FRAC_PI_2;
        if r <= h {
            return half_pi * r.powi(4) / 4.0;
        }
        // Rays with θ < θ0 leave through x = h, symmetric ones through y = h.
        let theta0 = (h / r).acos();
        let tan = theta0.tan();
        let edge = h.powi(4) / 4.0 * (tan + tan.powi(3) / 3.0);
        2.0 * edge + r.powi(4) / 4.0 * (half_pi - 2.0 * theta0)
    }

    #[test]
    fn cube_second_moment_matches_polar_closed_form() {
        let h = CUBE_HALF_WIDTH;
        let spec = DistributionSpec::new(Family::UniformCube, 2).unwrap();
        for &t in &[0.5, 1.5, 1.8, 2.0, 2.3, 2.44] {
            let m = spec.truncated_variance(t).unwrap() * 2.0;
            let want = clipped_quarter_disk_moment(t, h) / (h * h);
            assert!((m - want).abs() < 1e-12, "t = {t}: {m} vs {want}");
        }
    }

    #[test]
    fn cube_second_moment_matches_midpoint_grid_in_three_dimensions() {
        let h = CUBE_HALF_WIDTH;
        let (steps, t) = (240usize, 2.5f64);
        let step = h / steps as f64;
        let mut acc = 0.0;
        for i in 0..steps {
            for j in 0..steps {
                for k in 0..steps {
                    let r2: f64 = [i, j, k].iter().map(|&q| ((q as f64 + 0.5) * step).powi(2)).sum();
                    if r2 <= t * t {
                        acc += r2;
                    }
                }
            }
        }
        let brute = acc / (steps as f64).powi(3);
        let spec = DistributionSpec::new(Family::UniformCube, 3).unwrap();
        let m = spec.truncated_variance(t).unwrap() * 3.0;
        assert!((m - brute).abs() < 1e-3, "{m} vs {brute}");
    }

    #[test]
    fn cube_rejects_high_dimension() {
        assert_eq!(DistributionSpec::new(Family::UniformCube, 5).unwrap_err(), ModelError::CubeDimension(5));
    }

    #[test]
    fn ladder_tail_is_exact_on_rungs() {
        let spec = ladder(0.5);
        for k in 2..=6u32 {
            let t = spec.rung(k).unwrap();
            let tau = spec.tail_second_moment(t).unwrap();
            assert!((tau * k as f64 - 0.5).abs() < 1e-14, "k = {k}");
            let profile = spec.tail_profile(&[t]).unwrap();
            assert!((profile[0].tau_times_llt - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn ladder_tail_between_rungs() {
        let spec = ladder(0.5);
        let c = 0.5;
        for k in 2..=5u32 {
            // Geometric midpoint in log-log scale.
            let mid = ((k as f64 + 0.5).exp()).exp();
            let p = spec.tail_profile(&[mid]).unwrap()[0];
            let kf = k as f64;
            assert!(p.tau_times_llt >= c * kf / (kf + 1.0) && p.tau_times_llt <= c * (kf + 1.0) / kf, "k = {k}: {p:?}");
        }
    }

    #[test]
    fn fat_ladder_diverges_along_rungs() {
        let spec = fat();
        let mut last = 0.0;
        for k in 2..=6u32 {
            let p = spec.tail_profile(&[spec.rung(k).unwrap()]).unwrap()[0];
            assert!((p.tau_times_llt - (k as f64).sqrt()).abs() < 1e-12);
            assert!(p.tau_times_llt > last);
            last = p.tau_times_llt;
        }
    }

    #[test]
    fn gaussian_tail_vanishes() {
        let spec = DistributionSpec::gaussian(1).unwrap();
        let p = spec.tail_profile(&[50.0]).unwrap()[0];
        assert!(p.tau_times_llt < 1e-100);
    }

    #[test]
    fn tail_profile_rejects_unsorted() {
        let spec = DistributionSpec::gaussian(1).unwrap();
        assert_eq!(spec.tail_profile(&[2.0, 1.0]).unwrap_err(), ModelError::UnsortedGrid);
    }

    #[test]
    fn truncated_moments_are_loewner_monotone() {
        let levels = [0.0, 0.3, 0.9, 1.0, 1.5, 2.0, 3.0, 10.0, 1e3, 1e4, 1e9, 1e40, 1e100, f64::INFINITY];
        for spec in catalogue() {
            for w in levels.windows(2) {
                let a = spec.truncated_second_moment(w[0]).unwrap();
                let b = spec.truncated_second_moment(w[1]).unwrap();
                assert!(loewner_leq(&a, &b).unwrap(), "{} at {:?}", spec.id(), w);
            }
        }
    }

    #[test]
    fn tail_and_truncation_are_complementary_off_atoms() {
        for spec in catalogue() {
            for &t in &[0.4, 1.1, 2.2, 100.0, 1e30] {
                let d = spec.dim() as f64;
                let m = spec.truncated_variance(t).unwrap() * d;
                let tau = spec.tail_second_moment(t).unwrap();
                assert!((m + tau - d).abs() < 1e-12, "{} at {t}", spec.id());
            }
        }
    }

    #[test]
    fn ladder_parameter_validation() {
        let bad = |c, k0| DistributionSpec::new(Family::AtomLadder { c, k0, direction: DirectionMode::Isotropic }, 1);
        assert!(bad(-0.1, 2).is_err());
        assert!(bad(2.0, 2).is_err());
        assert!(bad(0.5, 0).is_err());
        assert!(bad(0.5, 6).is_err());
        assert!(bad(0.0, 2).is_ok());
        // The sampler stops where probabilities underflow; exp(exp(6)) is finite
        // but its atom probability is not representable.
        assert_eq!(ladder(0.5).atom_levels().len(), 4);
    }

    #[test]
    fn ladder_samples_lie_on_atoms_or_base() {
        let spec = ladder(0.5);
        let radius = spec.base_radius().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100_000 {
            let x = spec.sample(&mut rng)[0];
            assert!(x.abs() <= radius || spec.atom_levels().contains(&x.abs()));
        }
    }

    #[test]
    fn ladder_atoms_are_drawn_at_the_right_rate() {
        // P(|X| = t_2) ≈ 0.5 (1/2 - 1/3) / t_2²; bump c's rung into view by
        // checking the conditional stage directly.
        let spec = ladder(0.5);
        let l = spec.ladder.as_ref().unwrap();
        let t2 = spec.rung(2).unwrap();
        let p2 = 0.5 * (1.0 / 2.0 - 1.0 / 3.0) / (t2 * t2);
        assert!((l.pick_atom.p() - p2).abs() / p2 < 1e-6);
        assert!(l.stop_at[0].p() > 1.0 - 1e-9);
    }

    #[test]
    fn sample_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = DistributionSpec::new(Family::RademacherProduct, 1).unwrap();
        for _ in 0..100 {
            let x = spec.sample(&mut rng)[0];
            assert!(x == 1.0 || x == -1.0);
        }
        let spec = DistributionSpec::new(Family::UniformCube, 3).unwrap();
        for _ in 0..100 {
            assert!(spec.sample(&mut rng).as_slice().iter().all(|x| x.abs() <= CUBE_HALF_WIDTH));
        }
        let spec =
            DistributionSpec::new(Family::AtomLadder { c: 0.5, k0: 1, direction: DirectionMode::Axis }, 3).unwrap();
        for _ in 0..1000 {
            assert_eq!(spec.sample(&mut rng).dim(), 3);
        }
    }

    #[test]
    fn gaussian_second_moment_by_monte_carlo() {
        let spec = DistributionSpec::gaussian(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let r2 = spec.sample(&mut rng).norm_sq();
            sum += r2;
            sum_sq += r2 * r2;
        }
        let mean = sum / n as f64;
        let sd = ((sum_sq / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * sd, "mean {mean}, sd {sd}");
    }

    #[test]
    fn monte_carlo_matches_truncated_moments() {
        let n = 1_000_000;
        let tol = 4.0 / (n as f64).sqrt();
        let cases: Vec<(DistributionSpec, f64)> = vec![
            (DistributionSpec::gaussian(1).unwrap(), 1.0),
            (DistributionSpec::gaussian(2).unwrap(), 1.5),
            (DistributionSpec::new(Family::UniformCube, 2).unwrap(), 1.8),
            (DistributionSpec::new(Family::RademacherProduct, 2).unwrap(), 1.5),
            (ladder(0.5), 1.0),
            (
                DistributionSpec::new(Family::AtomLadder { c: 0.5, k0: 2, direction: DirectionMode::Isotropic }, 2)
                    .unwrap(),
                1.2,
            ),
        ];
        for (i, (spec, t)) in cases.iter().enumerate() {
            let d = spec.dim();
            let mut rng = ChaCha8Rng::seed_from_u64(100 + i as u64);
            let mut acc = vec![vec![0.0; d]; d];
            for _ in 0..n {
                let x = spec.sample(&mut rng);
                if x.norm() <= *t {
                    for a in 0..d {
                        for b in 0..d {
                            acc[a][b] += x[a] * x[b];
                        }
                    }
                }
            }
            let want = spec.truncated_second_moment(*t).unwrap();
            for a in 0..d {
                for b in 0..d {
                    let got = acc[a][b] / n as f64;
                    assert!(
                        (got - want.get(a, b)).abs() < tol,
                        "{} entry ({a},{b}): {got} vs {}",
                        spec.id(),
                        want.get(a, b)
                    );
                }
            }
        }
    }

    #[test]
    fn config_round_trip_and_validation() {
        let spec = ladder(0.5);
        let cfg = SpecConfig::from(&spec);
        assert_eq!(cfg.build().unwrap(), spec);
        let mut bad = SpecConfig::family(FamilyId::GaussianIso, 1);
        bad.c = Some(0.3);
        assert_eq!(bad.build().unwrap_err(), ModelError::UnusedParameter("c", "gaussian_iso"));
        let missing = SpecConfig::family(FamilyId::AtomLadder, 1);
        assert_eq!(missing.build().unwrap_err(), ModelError::MissingParameter("atom_ladder", "c"));
        let json = serde_json::to_string(&cfg).unwrap();
        let back: SpecConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        assert!(serde_json::from_str::<SpecConfig>(r#"{"family":"gaussian_iso","bogus":1}"#).is_err());
    }

    #[test]
    fn ladder_level_is_double_exponential() {
        assert!((ladder_level(1) - E.powf(E)).abs() < 1e-12);
        assert!((ll(ladder_level(3)) - 3.0).abs() < 1e-14);
    }
}
