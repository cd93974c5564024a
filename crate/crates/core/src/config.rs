//! Analysis configuration: category set, reference declarations, family
//! taxonomy and numeric parameters. Parsed from TOML.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use std::path::PathBuf;

use crate::ingest::{CategorySet, Condition, IngestError, InputFormat, SystemKind, DEFAULT_CATEGORIES};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Categories(#[from] IngestError),
}

/// Which conditions count as undistorted baselines.
///
/// `levels` maps a distortion type to its undistorted level token. Types listed
/// in `pooled` have no in-type baseline and are scored against the pooled
/// reference only.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceDeclaration {
    #[serde(default)]
    pub levels: BTreeMap<String, String>,
    #[serde(default)]
    pub pooled: Vec<String>,
}

impl ReferenceDeclaration {
    pub fn is_reference(&self, condition: &Condition) -> bool {
        self.levels
            .get(&condition.distortion_type)
            .is_some_and(|l| *l == condition.distortion_level)
    }

    /// True iff the distortion type is covered by either form of declaration.
    pub fn declares(&self, distortion_type: &str) -> bool {
        self.levels.contains_key(distortion_type) || self.pooled.iter().any(|p| p == distortion_type)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyEntry {
    #[serde(default)]
    pub family: Option<String>,
    #[serde(default)]
    pub subfamily: Option<String>,
    #[serde(default)]
    pub kind: Option<SystemKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisParams {
    pub seed: u64,
    pub n_perm: usize,
    /// Dirichlet prior concentration for CLED.
    pub alpha: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub restarts: usize,
    pub lilliefors_replicates: usize,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self {
            seed: 0,
            n_perm: 2000,
            alpha: 0.5,
            k_min: 1,
            k_max: 6,
            restarts: 10,
            lilliefors_replicates: 10_000,
        }
    }
}

/// Trial files to load. Relative paths resolve against the config file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputSection {
    pub paths: Vec<PathBuf>,
    pub format: InputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub input: InputSection,
    /// Output directory; relative paths resolve against the config file.
    pub output: Option<PathBuf>,
    pub categories: Vec<String>,
    pub references: ReferenceDeclaration,
    pub taxonomy: BTreeMap<String, FamilyEntry>,
    pub analysis: AnalysisParams,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            input: InputSection::default(),
            output: None,
            categories: DEFAULT_CATEGORIES.iter().map(|s| s.to_string()).collect(),
            references: ReferenceDeclaration::default(),
            taxonomy: BTreeMap::new(),
            analysis: AnalysisParams::default(),
        }
    }
}

impl AnalysisConfig {
    pub fn from_toml(s: &str) -> Result<Self, ConfigError> {
        let cfg: AnalysisConfig = toml::from_str(s)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn category_set(&self) -> Result<CategorySet, ConfigError> {
        Ok(CategorySet::new(self.categories.iter().cloned())?)
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        let a = &self.analysis;
        if a.n_perm == 0 {
            return Err(ConfigError::Invalid("n_perm must be positive".into()));
        }
        if !(a.alpha > 0.0 && a.alpha.is_finite()) {
            return Err(ConfigError::Invalid("alpha must be positive".into()));
        }
        if a.k_min < 1 || a.k_max < a.k_min || a.k_max > 8 {
            return Err(ConfigError::Invalid(format!(
                "k range {}..{} must lie within 1..8",
                a.k_min, a.k_max
            )));
        }
        if a.restarts == 0 || a.lilliefors_replicates == 0 {
            return Err(ConfigError::Invalid(
                "restarts and lilliefors_replicates must be positive".into(),
            ));
        }
        self.category_set()?;
        Ok(())
    }
}
