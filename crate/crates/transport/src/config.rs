//! TOML configuration files for the three commands.
//!
//! ```toml
//! # estimate: column names and optional nuisance overrides
//! y = "y"
//! x = ["x1", "x2"]
//! [nuisance.q]
//! known = 0.5
//! [nuisance.mu11]
//! covariates = ["x2"]
//! intercept = false
//!
//! # simulate
//! [simulate]
//! reps = 500
//! n1 = [250, 500, 1000]
//! n0 = 5000
//!
//! # rate-sim
//! [rate]
//! reps = 1000
//! n = [1000, 2000, 5000]
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use transport_core::estimators::Method;
use transport_core::nuisance::{FeatureSpec, Family, Nuisance, NuisanceModel};
use transport_core::sim::dgm::DgmCase;
use transport_core::sim::{CorrectnessConfig, DgmConfig, McCell, RateDgmConfig};
use transport_core::{Dataset, NuisanceSpec, Scenario};

use crate::error::{AppError, AppResult};
use crate::io::Schema;

pub fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> AppResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::config(format!("{}: {e}", path.display())))?;
    parse_toml(&text).map_err(|e| e.context(path.display()))
}

pub fn parse_toml<T: serde::de::DeserializeOwned>(text: &str) -> AppResult<T> {
    toml::from_str(text).map_err(|e| AppError::config(e.to_string().trim_end().to_string()))
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct NuisanceEntry {
    /// Regressor column names; `x` columns, plus `w` columns for `mu00_w` and `pi_w`.
    pub covariates: Option<Vec<String>>,
    pub intercept: Option<bool>,
    pub family: Option<String>,
    /// Known constant value instead of a fitted model.
    pub known: Option<f64>,
}

/// Column mapping plus per-nuisance model overrides.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaFile {
    #[serde(default = "default_y")]
    pub y: String,
    #[serde(default = "default_s")]
    pub s: String,
    #[serde(default = "default_a")]
    pub a: String,
    #[serde(default)]
    pub x: Vec<String>,
    #[serde(default)]
    pub w: Vec<String>,
    #[serde(default)]
    pub nuisance: BTreeMap<String, NuisanceEntry>,
}

fn default_y() -> String {
    "y".into()
}
fn default_s() -> String {
    "s".into()
}
fn default_a() -> String {
    "a".into()
}

impl Default for SchemaFile {
    fn default() -> Self {
        parse_toml("").expect("empty schema file is valid")
    }
}

impl SchemaFile {
    pub fn schema(&self) -> Schema {
        Schema { y: self.y.clone(), s: self.s.clone(), a: self.a.clone(), x: self.x.clone(), w: self.w.clone() }
    }

    /// Default GLMs for the scenario, with the file's overrides applied.
    /// `resolved` must be the schema after filling covariate lists from the
    /// data header.
    pub fn nuisance_spec(
        &self,
        data: &Dataset,
        resolved: &Schema,
        scenario: Scenario,
        trial_target: bool,
    ) -> AppResult<NuisanceSpec> {
        let mut spec = NuisanceSpec::glm_default(data, scenario, trial_target);
        for (name, entry) in &self.nuisance {
            let nuisance =
                Nuisance::from_name(name).ok_or_else(|| AppError::config(format!("unknown nuisance {name:?}")))?;
            let model = if let Some(v) = entry.known {
                if entry.covariates.is_some() || entry.family.is_some() || entry.intercept.is_some() {
                    return Err(AppError::config(format!("nuisance {name}: known excludes model settings")));
                }
                NuisanceModel::Known(v)
            } else {
                let mut columns: Vec<&String> = resolved.x.iter().collect();
                if nuisance.uses_w() {
                    columns.extend(&resolved.w);
                }
                let indices = match &entry.covariates {
                    None => (0..columns.len()).collect(),
                    Some(names) => names
                        .iter()
                        .map(|c| {
                            columns.iter().position(|k| *k == c).ok_or_else(|| {
                                AppError::config(format!("nuisance {name}: covariate {c:?} is not in the schema"))
                            })
                        })
                        .collect::<AppResult<Vec<_>>>()?,
                };
                let family = match entry.family.as_deref() {
                    None => match spec.get(nuisance) {
                        Some(NuisanceModel::Glm(f)) => f.family,
                        _ => Family::Linear,
                    },
                    Some("logistic") => Family::Logistic,
                    Some("linear") => Family::Linear,
                    Some(other) => return Err(AppError::config(format!("nuisance {name}: unknown family {other:?}"))),
                };
                NuisanceModel::Glm(FeatureSpec::new(indices, entry.intercept.unwrap_or(true), family))
            };
            spec.set(nuisance, model);
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectnessEntry {
    pub misspecified: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub reps: usize,
    #[serde(default)]
    pub base_seed: u64,
    pub n1: Vec<usize>,
    pub n0: usize,
    #[serde(default = "default_configs")]
    pub configs: Vec<String>,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<String>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_case")]
    pub case: u8,
    #[serde(default = "default_q")]
    pub q: f64,
}

fn default_configs() -> Vec<String> {
    CorrectnessConfig::standard().into_iter().map(|c| c.name).collect()
}
fn default_estimators() -> Vec<String> {
    vec!["if".into(), "or".into(), "ipw".into()]
}
fn default_folds() -> usize {
    2
}
fn default_level() -> f64 {
    0.95
}
fn default_case() -> u8 {
    2
}
fn default_q() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateFile {
    pub simulate: SimulateSection,
    /// Additional or replacement correctness configurations by name.
    #[serde(default)]
    pub correctness: BTreeMap<String, CorrectnessEntry>,
}

impl SimulateFile {
    fn correctness(&self, name: &str) -> AppResult<CorrectnessConfig> {
        if let Some(entry) = self.correctness.get(name) {
            let misspecified = entry
                .misspecified
                .iter()
                .map(|n| Nuisance::from_name(n).ok_or_else(|| AppError::config(format!("unknown nuisance {n:?}"))))
                .collect::<AppResult<Vec<_>>>()?;
            return Ok(CorrectnessConfig::new(name, &misspecified));
        }
        CorrectnessConfig::from_name(name).ok_or_else(|| AppError::config(format!("unknown correctness configuration {name:?}")))
    }

    /// Cells in output order: sample sizes outermost, then configurations.
    pub fn cells(&self) -> AppResult<Vec<McCell>> {
        let s = &self.simulate;
        if s.reps == 0 {
            return Err(AppError::config("reps must be at least 1"));
        }
        if s.folds < 2 {
            return Err(AppError::config("folds must be at least 2"));
        }
        if !(s.level > 0.0 && s.level < 1.0) {
            return Err(AppError::config("level must lie in (0, 1)"));
        }
        let estimators = s
            .estimators
            .iter()
            .map(|e| match Method::from_name(e) {
                Some(Method::TrialTarget) | None => Err(AppError::config(format!("unsupported estimator {e:?}"))),
                Some(m) => Ok(m),
            })
            .collect::<AppResult<Vec<_>>>()?;
        let case = DgmCase::from_number(s.case)?;
        let mut cells = Vec::new();
        for &n1 in &s.n1 {
            for name in &s.configs {
                let dgm = DgmConfig { case, n1, n0: s.n0, q: s.q, ..DgmConfig::default() };
                let mut cell = McCell::new(dgm, self.correctness(name)?, estimators.clone());
                cell.folds = s.folds;
                cell.level = s.level;
                cells.push(cell);
            }
        }
        Ok(cells)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSection {
    pub reps: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "RateDgmConfig::default_sizes")]
    pub n: Vec<usize>,
    #[serde(default = "RateDgmConfig::default_rates")]
    pub r: Vec<f64>,
    #[serde(default = "default_h")]
    pub h: f64,
}

fn default_h() -> f64 {
    transport_core::sim::rate::DEFAULT_H
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateFile {
    pub rate: RateSection,
}

impl RateFile {
    /// Cells in output order: sample sizes outermost, then rates.
    pub fn cells(&self) -> AppResult<Vec<RateDgmConfig>> {
        if self.rate.reps == 0 {
            return Err(AppError::config("reps must be at least 1"));
        }
        let mut out = Vec::new();
        for &n in &self.rate.n {
            for &r in &self.rate.r {
                let c = RateDgmConfig::new(n, r, self.rate.h);
                c.validate()?;
                out.push(c);
            }
        }
        Ok(out)
    }
}
