//! Composite experiments built from [`run_experiment`](super::run_experiment).

use std::path::Path;

use serde::Serialize;

use super::{
    csv_row, read_csv, run_replication, run_with_summary, values, ExperimentConfig, ExperimentOutcome, HarnessError,
};
use crate::models::{DistributionSpec, FamilyId, TailClass};
use crate::statistics::Mode;
use crate::truncation::{shift_driver, TruncationScheme};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriverRow {
    pub n: u64,
    pub c_n: f64,
    /// `σ_n² = E X² 1{|X| <= c_n}` per coordinate.
    pub sigma2: f64,
    /// `(1 - σ_n) b_{1,n}`.
    pub driver: f64,
}

/// The deterministic shift `(1 - σ_n) b_{1,n}` from analytic truncated moments.
pub fn shift_driver_table(
    spec: &DistributionSpec,
    scheme: &TruncationScheme,
    n_grid: &[u64],
) -> Result<Vec<DriverRow>, HarnessError> {
    n_grid
        .iter()
        .map(|&n| {
            let c_n = scheme.c_level(n)?;
            let sigma2 = spec.truncated_variance(c_n)?;
            Ok(DriverRow { n, c_n, sigma2, driver: shift_driver(sigma2, n) })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftReport {
    pub c: f64,
    pub driver: Vec<DriverRow>,
    pub median: f64,
    pub reference_median: f64,
    pub median_below_reference: bool,
}

/// Driver table plus a classical-mode run of the ladder law against a
/// Gaussian reference at the same `n` and number of replications.
///
/// The mode and reference of `cfg` are replaced by `classical` and
/// `gaussian_iso`.
pub fn shift_experiment(
    cfg: &ExperimentConfig,
    driver_grid: &[u64],
    threads: usize,
) -> Result<(ShiftReport, ExperimentOutcome), HarnessError> {
    if cfg.spec.family != FamilyId::AtomLadder {
        return Err(HarnessError::Config(format!(
            "the shift experiment needs an atom_ladder spec, got {}",
            cfg.spec.family.name()
        )));
    }
    let cfg = ExperimentConfig { mode: Mode::Classical, reference: Some(FamilyId::GaussianIso), ..cfg.clone() };
    let spec = cfg.validate()?;
    let c = match spec.tail_class() {
        TailClass::Critical(c) => c,
        _ => 0.0,
    };
    let driver = shift_driver_table(&spec, &cfg.scheme, driver_grid)?;
    let outcome = run_with_summary(&cfg, threads)?;
    let median = values(&outcome.records).median();
    let reference_median = outcome.summary.reference_median.expect("the shift experiment has a reference");
    let report = ShiftReport { c, driver, median, reference_median, median_below_reference: median < reference_median };
    Ok((report, outcome))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightnessRow {
    pub n: u64,
    pub median: f64,
    /// `P̂{M_n > y}` for each `y` of the grid.
    pub exceedance: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightnessReport {
    pub spec_id: String,
    pub y_grid: Vec<f64>,
    pub rows: Vec<TightnessRow>,
    /// Exceedance frequencies at the last horizon are no larger than at the
    /// first for every `y`, and smaller for at least one. Descriptive only.
    pub drifts_downward: bool,
}

/// Exceedance frequencies of the classical statistic across horizons, for a
/// law whose tail violates the tightness condition.
pub fn tightness_probe(
    cfg: &ExperimentConfig,
    horizons: &[u64],
    y_grid: &[f64],
    threads: usize,
) -> Result<(TightnessReport, Vec<ExperimentOutcome>), HarnessError> {
    let spec = cfg.validate()?;
    if spec.tail_class() != TailClass::Divergent {
        return Err(HarnessError::Config(format!(
            "the tightness probe needs a law with a divergent tail sum, got {}",
            spec.id()
        )));
    }
    if horizons.is_empty() || y_grid.is_empty() {
        return Err(HarnessError::Config("horizons and y grid must be nonempty".into()));
    }
    let mut rows = Vec::new();
    let mut outcomes = Vec::new();
    for &n in horizons {
        let c = ExperimentConfig {
            name: format!("{}_n{n}", cfg.name),
            n,
            mode: Mode::Classical,
            reference: None,
            kls_cap: None,
            ..cfg.clone()
        };
        let outcome = run_with_summary(&c, threads)?;
        let e = values(&outcome.records);
        rows.push(TightnessRow {
            n,
            median: e.median(),
            exceedance: y_grid.iter().map(|&y| e.exceedance(y)).collect(),
        });
        outcomes.push(outcome);
    }
    let (first, last) = (&rows[0].exceedance, &rows[rows.len() - 1].exceedance);
    let drifts_downward =
        rows.len() > 1 && first.iter().zip(last).all(|(a, b)| b <= a) && first.iter().zip(last).any(|(a, b)| b < a);
    Ok((TightnessReport { spec_id: spec.id(), y_grid: y_grid.to_vec(), rows, drifts_downward }, outcomes))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayOutcome {
    pub index: u64,
    pub stored: Vec<String>,
    pub recomputed: Vec<String>,
    pub matches: bool,
}

/// Recomputes replication `index` and compares it field by field with row
/// `index` of the stored CSV.
pub fn replay(cfg: &ExperimentConfig, csv: &Path, index: u64) -> Result<ReplayOutcome, HarnessError> {
    let rows = read_csv(csv)?;
    let stored = rows
        .get(index as usize)
        .cloned()
        .ok_or_else(|| HarnessError::Config(format!("{} has no row {index}", csv.display())))?;
    let rec = run_replication(cfg, index)?;
    let recomputed = csv_row(index, &rec, cfg.dim()).to_vec();
    Ok(ReplayOutcome { index, matches: stored == recomputed, stored, recomputed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{csv_path, write_outputs};
    use crate::models::SpecConfig;

    fn ladder(c: f64) -> SpecConfig {
        SpecConfig { c: Some(c), ..SpecConfig::family(FamilyId::AtomLadder, 1) }
    }

    #[test]
    fn degenerate_ladder_has_no_drift() {
        let spec = ladder(0.0).build().unwrap();
        let rows = shift_driver_table(&spec, &TruncationScheme::sqrt_n(), &[100, 10_000, 100_000_000]).unwrap();
        assert!(rows.iter().all(|r| r.driver.abs() < 1e-12), "{rows:?}");
    }

    #[test]
    fn driver_is_positive_and_tracks_c() {
        let spec = ladder(0.5).build().unwrap();
        let rows = shift_driver_table(&spec, &TruncationScheme::sqrt_n(), &[1_000_000, 100_000_000]).unwrap();
        assert!(rows.iter().all(|r| r.sigma2 < 1.0 && r.driver > 0.0));
        assert!((rows[1].driver - 0.5).abs() < 0.05, "{rows:?}");
    }

    #[test]
    fn shift_experiment_requires_ladder() {
        let c = ExperimentConfig::new(SpecConfig::family(FamilyId::GaussianIso, 1), Mode::Classical, 100, 5, 1);
        assert!(matches!(shift_experiment(&c, &[100], 1), Err(HarnessError::Config(_))));
        let c = ExperimentConfig { spec: ladder(0.5), ..c };
        let (report, outcome) = shift_experiment(&c, &[100, 1000], 1).unwrap();
        assert_eq!(report.driver.len(), 2);
        assert_eq!(report.c, 0.5);
        assert!(outcome.reference.is_some());
    }

    #[test]
    fn tightness_probe_schema() {
        let gauss = ExperimentConfig::new(SpecConfig::family(FamilyId::GaussianIso, 1), Mode::Classical, 100, 5, 1);
        assert!(matches!(tightness_probe(&gauss, &[100], &[0.0], 1), Err(HarnessError::Config(_))));
        let fat = ExperimentConfig { spec: SpecConfig::family(FamilyId::AtomLadderFat, 1), ..gauss };
        let (report, outcomes) = tightness_probe(&fat, &[100, 300, 1000], &[-1.0, 0.0, 1.0, 2.0], 1).unwrap();
        assert_eq!(report.rows.len(), 3);
        assert_eq!(outcomes.len(), 3);
        assert!(report.rows.iter().all(|r| r.exceedance.len() == 4));
    }

    #[test]
    fn replay_detects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let c = ExperimentConfig {
            name: "g".into(),
            ..ExperimentConfig::new(SpecConfig::family(FamilyId::GaussianIso, 2), Mode::SelfNormalized, 200, 6, 9)
        };
        write_outputs(&run_with_summary(&c, 1).unwrap(), dir.path()).unwrap();
        let path = csv_path(dir.path(), "g");
        for i in 0..6 {
            assert!(replay(&c, &path, i).unwrap().matches);
        }
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let mut fields: Vec<String> = lines[3].split(',').map(String::from).collect();
        fields[2] = format!("{}1", fields[2]);
        lines[3] = fields.join(",");
        std::fs::write(&path, lines.join("\n") + "\n").unwrap();
        assert!(!replay(&c, &path, 2).unwrap().matches);
        assert!(replay(&c, &path, 1).unwrap().matches);
        assert!(replay(&c, &path, 6).is_err());
    }
}
