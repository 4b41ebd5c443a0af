//! One function per subcommand. Each prints a table and appends its
//! machine-readable report to `<out>/<subcommand>.jsonl`.

use std::fs;
use std::path::Path;

use delab_core::harness::{
    append_jsonl, csv_path, replay, run_with_summary, shift_experiment, tightness_probe, write_outputs,
    ExperimentOutcome, Summary,
};
use delab_core::limits::{
    eq42_envelope, gaussian_norm_tail_bound, integral_test_classify, integral_test_partial_sums, lem52_ratio,
    lem52_tail_check, PhiFamily, MAX_PARTIAL_SUM_N,
};
use delab_core::models::{FamilyId, SpecConfig};
use delab_core::truncation::{
    geometric_grid, validate_condition3, validate_tail_condition, SchemeFamily, TailCondition, TruncationScheme,
};
use delab_core::{ExperimentConfig, Verdict};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::config::{parse, take};
use crate::{CliError, Common};

fn prepare_out(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out.display())))
}

fn report<T: Serialize>(out: &Path, command: &str, value: &T) -> Result<(), CliError> {
    append_jsonl(&out.join(format!("{command}.jsonl")), value).map_err(CliError::from)
}

fn experiment_config(mut table: Table, common: &Common) -> Result<ExperimentConfig, CliError> {
    if let Some(seed) = common.seed {
        table.insert("master_seed".into(), Value::Integer(seed as i64));
    }
    let cfg: ExperimentConfig = parse(table)?;
    cfg.validate()?;
    Ok(cfg)
}

fn print_summary(s: &Summary) {
    println!("experiment   {}", s.experiment);
    println!("spec         {}  (d = {})", s.spec_id, s.d);
    println!("scheme       {}", s.scheme_id);
    println!("mode         {}  n = {}  R = {}  seed = {}", s.mode, s.n, s.replications, s.master_seed);
    let q = &s.quantiles;
    println!(
        "quantiles    1%={:.4} 5%={:.4} 25%={:.4} 50%={:.4} 75%={:.4} 95%={:.4} 99%={:.4}",
        q.q01, q.q05, q.q25, q.q50, q.q75, q.q95, q.q99
    );
    println!("ks_gumbel    {:.4}", s.ks_gumbel);
    if let (Some(id), Some(ks)) = (&s.reference_spec_id, s.ks_two_sample) {
        println!("reference    {id}  ks_two_sample = {ks:.4}");
    }
    println!("runtime      {:.2} s", s.runtime_seconds);
}

fn persist(outcome: &ExperimentOutcome, out: &Path) -> Result<(), CliError> {
    for p in write_outputs(outcome, out)? {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

pub fn simulate(table: Table, common: &Common) -> Result<(), CliError> {
    let cfg = experiment_config(table, common)?;
    let outcome = run_with_summary(&cfg, common.threads)?;
    persist(&outcome, &common.out)?;
    print_summary(&outcome.summary);
    Ok(())
}

fn default_driver_grid() -> Vec<u64> {
    (2..=8).map(|k| 10u64.pow(k)).collect()
}

pub fn shift(mut table: Table, common: &Common) -> Result<(), CliError> {
    let grid: Vec<u64> = take(&mut table, "driver_grid")?.unwrap_or_else(default_driver_grid);
    let cfg = experiment_config(table, common)?;
    let (rep, outcome) = shift_experiment(&cfg, &grid, common.threads)?;
    persist(&outcome, &common.out)?;
    report(&common.out, "shift_experiment", &rep)?;
    println!("{:>12} {:>14} {:>12} {:>10}", "n", "c_n", "sigma2_n", "driver");
    for r in &rep.driver {
        println!("{:>12} {:>14.6e} {:>12.8} {:>10.6}", r.n, r.c_n, r.sigma2, r.driver);
    }
    println!("c = {}", rep.c);
    println!(
        "median {:.4} vs gaussian reference {:.4}: {}",
        rep.median,
        rep.reference_median,
        if rep.median_below_reference { "below" } else { "not below" }
    );
    Ok(())
}

pub fn tightness(mut table: Table, common: &Common) -> Result<(), CliError> {
    let horizons: Vec<u64> = take(&mut table, "horizons")?.unwrap_or_else(|| vec![10_000, 100_000, 1_000_000]);
    let y_grid: Vec<f64> = take(&mut table, "y_grid")?.unwrap_or_else(|| vec![-2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
    if !table.contains_key("n") {
        table.insert("n".into(), Value::Integer(*horizons.first().unwrap_or(&1) as i64));
    }
    let cfg = experiment_config(table, common)?;
    let (rep, outcomes) = tightness_probe(&cfg, &horizons, &y_grid, common.threads)?;
    for o in &outcomes {
        persist(o, &common.out)?;
    }
    report(&common.out, "tightness_probe", &rep)?;
    print!("{:>10} {:>9}", "n", "median");
    for y in &rep.y_grid {
        print!(" {:>9}", format!("P(M>{y})"));
    }
    println!();
    for r in &rep.rows {
        print!("{:>10} {:>9.4}", r.n, r.median);
        for p in &r.exceedance {
            print!(" {p:>9.4}");
        }
        println!();
    }
    println!(
        "exceedance mass {} across horizons (descriptive, no verdict)",
        if rep.drifts_downward { "drifts downward" } else { "does not drift downward" }
    );
    Ok(())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// Grid for the integral test. `a` is absolute; `a_offset` is relative to `d`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntegralTestConfig {
    #[serde(default = "default_dims")]
    d: OneOrMany<usize>,
    a: Option<OneOrMany<f64>>,
    a_offset: Option<OneOrMany<f64>>,
    #[serde(default = "default_b")]
    b: OneOrMany<f64>,
    #[serde(default = "default_n_max")]
    n_max: u64,
}

fn default_dims() -> OneOrMany<usize> {
    OneOrMany::Many(vec![1, 2, 3])
}

fn default_b() -> OneOrMany<f64> {
    OneOrMany::Many(vec![0.0, 1.0, 2.0, 3.0, 4.0])
}

fn default_n_max() -> u64 {
    MAX_PARTIAL_SUM_N
}

#[derive(Debug, Serialize)]
struct IntegralRow {
    d: usize,
    a: f64,
    b: f64,
    classifier: delab_core::Convergence,
    oracle: delab_core::Convergence,
    tail_exponent: f64,
    n_max: u64,
    partial_sum: f64,
    verdict: Verdict,
}

pub fn integral_test(table: Table, common: &Common) -> Result<(), CliError> {
    let cfg: IntegralTestConfig = parse(table)?;
    if cfg.a.is_some() && cfg.a_offset.is_some() {
        return Err(CliError::Config("give either a or a_offset, not both".into()));
    }
    prepare_out(&common.out)?;
    println!(
        "{:>3} {:>6} {:>6} {:>11} {:>11} {:>9} {:>12}  verdict",
        "d", "a", "b", "classifier", "oracle", "exponent", "S(n_max)"
    );
    for d in cfg.d.to_vec() {
        let a_values: Vec<f64> = match (&cfg.a, &cfg.a_offset) {
            (Some(a), _) => a.to_vec(),
            (None, Some(off)) => off.to_vec().iter().map(|o| d as f64 + o).collect(),
            (None, None) => (0..=4).map(|o| (d + o) as f64).collect(),
        };
        for &a in &a_values {
            for b in cfg.b.to_vec() {
                let phi = PhiFamily::new(a, b, d).map_err(|e| CliError::Config(e.to_string()))?;
                let classifier = integral_test_classify(&phi);
                let rep = integral_test_partial_sums(&phi, cfg.n_max).map_err(|e| match e {
                    delab_core::limits::PhiError::Horizon(_) => CliError::Config(e.to_string()),
                    other => CliError::Runtime(other.to_string()),
                })?;
                let last = rep.checkpoints.last().expect("at least one checkpoint");
                let row = IntegralRow {
                    d,
                    a,
                    b,
                    classifier,
                    oracle: rep.verdict,
                    tail_exponent: rep.tail_exponent,
                    n_max: last.n,
                    partial_sum: last.sum,
                    verdict: if classifier == rep.verdict { Verdict::Pass } else { Verdict::Fail },
                };
                println!(
                    "{:>3} {:>6} {:>6} {:>11} {:>11} {:>9.4} {:>12.6e}  {}",
                    d,
                    a,
                    b,
                    name(classifier),
                    name(rep.verdict),
                    row.tail_exponent,
                    row.partial_sum,
                    row.verdict
                );
                report(&common.out, "integral_test", &row)?;
            }
        }
    }
    Ok(())
}

fn name(c: delab_core::Convergence) -> &'static str {
    match c {
        delab_core::Convergence::Convergent => "convergent",
        delab_core::Convergence::Divergent => "divergent",
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TailBoundsConfig {
    #[serde(default = "default_sigmas")]
    sigmas: Vec<f64>,
    #[serde(default = "default_z_min")]
    z_min: f64,
    #[serde(default = "default_z_max")]
    z_max: f64,
    #[serde(default = "default_z_points")]
    z_points: usize,
    #[serde(default = "default_levels")]
    tail_levels: Vec<f64>,
    #[serde(default = "default_dims_vec")]
    envelope_dims: Vec<usize>,
    #[serde(default = "default_envelope_points")]
    envelope_points: usize,
    /// Covariance spectrum of the Gaussian vector for the norm tail bound.
    #[serde(default = "default_eigenvalues")]
    eigenvalues: Vec<f64>,
    #[serde(default = "default_x_grid")]
    x_grid: Vec<f64>,
    #[serde(default = "default_mc_draws")]
    mc_draws: u64,
    #[serde(default)]
    seed: u64,
}

fn default_sigmas() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}
fn default_z_min() -> f64 {
    0.01
}
fn default_z_max() -> f64 {
    100.0
}
fn default_z_points() -> usize {
    200
}
fn default_levels() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 4.0, 8.0]
}
fn default_dims_vec() -> Vec<usize> {
    vec![1, 2, 3]
}
fn default_envelope_points() -> usize {
    41
}
fn default_eigenvalues() -> Vec<f64> {
    vec![1.0, 0.5]
}
fn default_x_grid() -> Vec<f64> {
    vec![0.0, 1.0, 2.0, 4.0, 6.0, 8.0]
}
fn default_mc_draws() -> u64 {
    1_000_000
}

#[derive(Debug, Serialize)]
#[serde(tag = "check", rename_all = "snake_case")]
enum TailRow {
    Lem52Ratio { sigma: f64, max_ratio: f64, argmax_z: f64, bound: f64, verdict: Verdict },
    Lem52Tail { sigma: f64, t: f64, lhs: f64, rhs: f64, verdict: Verdict },
    Envelope { d: usize, c1_hat: f64, c2_hat: f64, verdict: Verdict },
    GaussianBound { x: f64, mc_frequency: f64, mc_se: f64, bound_a: Option<f64>, bound_b: f64, verdict: Verdict },
}

fn pass_if(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

pub fn tail_bounds(table: Table, common: &Common) -> Result<(), CliError> {
    let mut cfg: TailBoundsConfig = parse(table)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if !(cfg.z_min > 0.0 && cfg.z_max > cfg.z_min && cfg.z_points >= 2) {
        return Err(CliError::Config("need 0 < z_min < z_max and z_points >= 2".into()));
    }
    if cfg.eigenvalues.is_empty() || cfg.eigenvalues.iter().any(|&l| !(l > 0.0)) || cfg.mc_draws == 0 {
        return Err(CliError::Config("eigenvalues must be positive and mc_draws >= 1".into()));
    }
    prepare_out(&common.out)?;
    let mut rows = Vec::new();
    let ratio = (cfg.z_max / cfg.z_min).ln();
    let z_grid: Vec<f64> =
        (0..cfg.z_points).map(|i| cfg.z_min * (ratio * i as f64 / (cfg.z_points - 1) as f64).exp()).collect();
    for &sigma in &cfg.sigmas {
        let r = lem52_ratio(sigma, &z_grid).map_err(|e| CliError::Config(e.to_string()))?;
        rows.push(TailRow::Lem52Ratio {
            sigma,
            max_ratio: r.max_ratio,
            argmax_z: r.argmax_z,
            bound: r.bound,
            verdict: pass_if(r.holds),
        });
        for &t in &cfg.tail_levels {
            let c = lem52_tail_check(sigma, t).map_err(|e| CliError::Config(e.to_string()))?;
            rows.push(TailRow::Lem52Tail { sigma, t, lhs: c.lhs, rhs: c.rhs, verdict: pass_if(c.holds) });
        }
    }
    for &d in &cfg.envelope_dims {
        let lo = 2.0 * d as f64;
        let m = cfg.envelope_points.max(2);
        let grid: Vec<f64> = (0..m).map(|i| lo + (12.0 - lo) * i as f64 / (m - 1) as f64).collect();
        let e = eq42_envelope(d, &grid).map_err(|e| CliError::Config(e.to_string()))?;
        let ok = e.c1_hat.is_finite() && e.c2_hat.is_finite() && e.c1_hat > 0.0 && e.c2_hat > 0.0;
        rows.push(TailRow::Envelope { d, c1_hat: e.c1_hat, c2_hat: e.c2_hat, verdict: pass_if(ok) });
    }
    // By rotation invariance the norm of N(0, Σ) only depends on the spectrum.
    let trace: f64 = cfg.eigenvalues.iter().sum();
    let sigma2_max = cfg.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let scales: Vec<f64> = cfg.eigenvalues.iter().map(|l| l.sqrt()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let norms_sq: Vec<f64> = (0..cfg.mc_draws)
        .map(|_| {
            scales
                .iter()
                .map(|s| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    (s * z).powi(2)
                })
                .sum()
        })
        .collect();
    for &x in &cfg.x_grid {
        let b = gaussian_norm_tail_bound(x, trace, sigma2_max).map_err(|e| CliError::Config(e.to_string()))?;
        let hits = norms_sq.iter().filter(|&&r| r >= x * x).count() as f64;
        let p = hits / cfg.mc_draws as f64;
        let se = (p * (1.0 - p) / cfg.mc_draws as f64).sqrt();
        let bound_a = b.a_applicable.then_some(b.bound_a);
        let ok = p <= b.bound_b + 3.0 * se && bound_a.is_none_or(|a| p <= a + 3.0 * se);
        rows.push(TailRow::GaussianBound {
            x,
            mc_frequency: p,
            mc_se: se,
            bound_a,
            bound_b: b.bound_b,
            verdict: pass_if(ok),
        });
    }
    for row in &rows {
        match row {
            TailRow::Lem52Ratio { sigma, max_ratio, bound, verdict, .. } => {
                println!("lem52 ratio     sigma={sigma:<5} max={max_ratio:.6} bound={bound:.6}  {verdict}")
            }
            TailRow::Lem52Tail { sigma, t, lhs, rhs, verdict } => {
                println!("lem52 tail      sigma={sigma:<5} t={t:<5} lhs={lhs:.6e} rhs={rhs:.6e}  {verdict}")
            }
            TailRow::Envelope { d, c1_hat, c2_hat, verdict } => {
                println!("chi envelope    d={d} c1={c1_hat:.6} c2={c2_hat:.6}  {verdict}")
            }
            TailRow::GaussianBound { x, mc_frequency, bound_a, bound_b, verdict, .. } => {
                let a = bound_a.map_or("n/a".to_string(), |a| format!("{a:.4e}"));
                println!("gaussian bound  x={x:<5} mc={mc_frequency:.4e} a={a} b={bound_b:.4e}  {verdict}")
            }
        }
        report(&common.out, "tail_bounds", row)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TailCase {
    spec: SpecConfig,
    condition: TailCondition,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ValidateConfig {
    /// Defaults to √n, √n/(LLn)^5 and the linear levels c_n = n up to 10^6.
    schemes: Option<Vec<TruncationScheme>>,
    #[serde(default = "default_grid_min")]
    grid_min: u64,
    #[serde(default = "default_grid_max")]
    grid_max: u64,
    #[serde(default = "default_grid_points")]
    grid_points: usize,
    tails: Option<Vec<TailCase>>,
    /// `t = 10^{3i}` for `i = 1..=t_points`.
    #[serde(default = "default_t_points")]
    t_points: u32,
}

fn default_grid_min() -> u64 {
    16
}
fn default_grid_max() -> u64 {
    1_000_000_000_000
}
fn default_grid_points() -> usize {
    40
}
fn default_t_points() -> u32 {
    30
}

fn default_schemes() -> Vec<TruncationScheme> {
    let linear = SchemeFamily::Table { values: (1..=1_000_000u64).map(|n| n as f64).collect() };
    vec![
        TruncationScheme::sqrt_n(),
        TruncationScheme::new(SchemeFamily::SqrtNInvLl5).expect("built-in scheme"),
        TruncationScheme::new(linear).expect("built-in scheme"),
    ]
}

fn default_tails() -> Vec<TailCase> {
    let ladder = SpecConfig { c: Some(0.5), ..SpecConfig::family(FamilyId::AtomLadder, 1) };
    vec![
        TailCase { spec: SpecConfig::family(FamilyId::GaussianIso, 1), condition: TailCondition::Eq7SmallO },
        TailCase { spec: ladder.clone(), condition: TailCondition::Eq7SmallO },
        TailCase { spec: ladder, condition: TailCondition::Eq9BigO },
        TailCase { spec: SpecConfig::family(FamilyId::AtomLadderFat, 1), condition: TailCondition::Eq9BigO },
    ]
}

#[derive(Debug, Serialize)]
struct ValidateRow {
    check: &'static str,
    subject: String,
    verdict: Verdict,
    empirical: Verdict,
    detail: String,
}

pub fn validate(table: Table, common: &Common) -> Result<(), CliError> {
    let cfg: ValidateConfig = parse(table)?;
    prepare_out(&common.out)?;
    let mut rows = Vec::new();
    for scheme in cfg.schemes.unwrap_or_else(default_schemes) {
        let hi = match &scheme.family {
            SchemeFamily::Table { values } => cfg.grid_max.min(values.len() as u64),
            _ => cfg.grid_max,
        };
        let grid = geometric_grid(cfg.grid_min, hi, cfg.grid_points);
        let r = validate_condition3(&scheme, &grid)?;
        rows.push(ValidateRow {
            check: "condition3",
            subject: r.scheme,
            verdict: r.verdict,
            empirical: r.empirical,
            detail: format!("tail slope {:.4}", r.tail_slope),
        });
    }
    let t_grid: Vec<f64> = (1..=cfg.t_points.max(2)).map(|i| 10f64.powf(3.0 * i as f64)).collect();
    for case in cfg.tails.unwrap_or_else(default_tails) {
        let spec = case.spec.build()?;
        let r = validate_tail_condition(&spec, case.condition, &t_grid)?;
        let last = r.profile.last().map_or(f64::NAN, |p| p.tau_times_llt);
        rows.push(ValidateRow {
            check: match case.condition {
                TailCondition::Eq7SmallO => "tail_o",
                TailCondition::Eq9BigO => "tail_big_o",
            },
            subject: r.spec,
            verdict: r.verdict,
            empirical: r.empirical,
            detail: format!("tau*LL at largest t {last:.4e}"),
        });
    }
    println!("{:<12} {:<44} {:<8} {:<13} detail", "check", "subject", "verdict", "empirical");
    for row in &rows {
        println!(
            "{:<12} {:<44} {:<8} {:<13} {}",
            row.check,
            row.subject,
            row.verdict.to_string(),
            row.empirical.to_string(),
            row.detail
        );
        report(&common.out, "validate", row)?;
    }
    Ok(())
}

/// Keys read by the composite experiments and ignored on replay.
const EXTRA_KEYS: [&str; 3] = ["driver_grid", "horizons", "y_grid"];

pub fn replay_cmd(mut table: Table, common: &Common, index: u64, csv: Option<&Path>) -> Result<bool, CliError> {
    for key in EXTRA_KEYS {
        table.remove(key);
    }
    let cfg = experiment_config(table, common)?;
    let path = csv.map_or_else(|| csv_path(&common.out, &cfg.name), Path::to_path_buf);
    if !path.exists() {
        return Err(CliError::Config(format!("{} does not exist", path.display())));
    }
    let outcome = replay(&cfg, &path, index)?;
    println!("stored     {}", outcome.stored.join(","));
    println!("recomputed {}", outcome.recomputed.join(","));
    println!("{}", if outcome.matches { "MATCH" } else { "MISMATCH" });
    Ok(outcome.matches)
}
