//! Experiment configuration.
//!
//! Configurations are plain serde structures; the command-line front end
//! reads them from TOML. Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::models::{DistributionSpec, FamilyId, SpecConfig};
use crate::statistics::Mode;
use crate::truncation::TruncationScheme;

/// One Monte Carlo experiment: `replications` independent runs of a
/// statistic over the first `n` partial sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Used for output file names.
    #[serde(default = "default_name")]
    pub name: String,
    pub spec: SpecConfig,
    #[serde(default = "TruncationScheme::sqrt_n")]
    pub scheme: TruncationScheme,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    pub n: u64,
    pub replications: u64,
    #[serde(default)]
    pub master_seed: u64,
    /// Last index of the finite supremum in the kls mode (default `50 n`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kls_cap: Option<u64>,
    /// A parameter-free family run with the same dimension, scheme, mode,
    /// `n` and `replications` for a two-sample comparison.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<FamilyId>,
}

fn default_name() -> String {
    "experiment".to_string()
}

fn default_mode() -> Mode {
    Mode::SelfNormalized
}

impl ExperimentConfig {
    pub fn new(spec: SpecConfig, mode: Mode, n: u64, replications: u64, master_seed: u64) -> Self {
        ExperimentConfig {
            name: default_name(),
            spec,
            scheme: TruncationScheme::sqrt_n(),
            mode,
            n,
            replications,
            master_seed,
            kls_cap: None,
            reference: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    /// Last partial-sum index a replication reads.
    pub fn horizon(&self) -> u64 {
        match self.mode {
            Mode::Kls => self.kls_cap.unwrap_or(self.n.saturating_mul(50)),
            _ => self.n,
        }
    }

    /// Checks ranges and resolves the spec and scheme.
    pub fn validate(&self) -> Result<DistributionSpec, HarnessError> {
        if self.n == 0 {
            return Err(HarnessError::Config("n must be >= 1".into()));
        }
        if self.replications == 0 {
            return Err(HarnessError::Config("replications must be >= 1".into()));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(HarnessError::Config(format!("name {:?} is not a plain file stem", self.name)));
        }
        let spec = self.spec.build()?;
        self.scheme.check()?;
        let d = spec.dim();
        match self.mode {
            Mode::Feller | Mode::Kls if d != 1 => {
                return Err(HarnessError::Config(format!("{} mode needs dim = 1, got {d}", self.mode)));
            }
            Mode::Kls if self.horizon() < self.n => {
                return Err(HarnessError::Config("kls_cap must be >= n".into()));
            }
            _ => {}
        }
        if self.mode != Mode::Kls && self.kls_cap.is_some() {
            return Err(HarnessError::Config("kls_cap is only used by the kls mode".into()));
        }
        if let Some(r) = self.reference {
            self.reference_config(r)?.spec.build()?;
        }
        Ok(spec)
    }

    /// The reference experiment for family `id`.
    pub fn reference_config(&self, id: FamilyId) -> Result<ExperimentConfig, HarnessError> {
        if matches!(id, FamilyId::AtomLadder | FamilyId::AtomLadderFat) {
            return Err(HarnessError::Config(format!("reference family {} takes parameters", id.name())));
        }
        Ok(ExperimentConfig {
            name: format!("{}_reference", self.name),
            spec: SpecConfig::family(id, self.spec.dim),
            reference: None,
            ..self.clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ExperimentConfig {
        ExperimentConfig::new(SpecConfig::family(FamilyId::GaussianIso, 1), Mode::Classical, 100, 10, 1)
    }

    #[test]
    fn ranges_checked() {
        assert!(cfg().validate().is_ok());
        assert!(ExperimentConfig { n: 0, ..cfg() }.validate().is_err());
        assert!(ExperimentConfig { replications: 0, ..cfg() }.validate().is_err());
        assert!(ExperimentConfig { name: "a/b".into(), ..cfg() }.validate().is_err());
        assert!(ExperimentConfig { kls_cap: Some(1000), ..cfg() }.validate().is_err());
        let kls = ExperimentConfig { mode: Mode::Kls, kls_cap: Some(50), ..cfg() };
        assert!(kls.validate().is_err());
        let feller2 =
            ExperimentConfig { mode: Mode::Feller, spec: SpecConfig::family(FamilyId::GaussianIso, 2), ..cfg() };
        assert!(feller2.validate().is_err());
    }

    #[test]
    fn reference_must_be_parameter_free() {
        let ok = ExperimentConfig { reference: Some(FamilyId::RademacherProduct), ..cfg() };
        assert!(ok.validate().is_ok());
        assert_eq!(ok.reference_config(FamilyId::GaussianIso).unwrap().name, "experiment_reference");
        let bad = ExperimentConfig { reference: Some(FamilyId::AtomLadder), ..cfg() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn json_round_trip_and_defaults() {
        let c: ExperimentConfig =
            serde_json::from_str(r#"{"spec":{"family":"uniform_cube","dim":2},"n":50,"replications":3}"#).unwrap();
        assert_eq!(c.mode, Mode::SelfNormalized);
        assert_eq!(c.scheme, TruncationScheme::sqrt_n());
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"spec":{"family":"x"},"n":1,"replications":1}"#).is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(
            r#"{"spec":{"family":"gaussian_iso"},"n":1,"replications":1,"bogus":1}"#
        )
        .is_err());
    }
}
