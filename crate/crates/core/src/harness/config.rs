//! Scenario configuration, loaded from TOML with dotted-path overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::collision::CollisionMode;
use crate::energy::EhModel;
use crate::error::{Error, Result};
use crate::geometry::GeometryConfig;
use crate::interference::{CorrelationKind, CorrelationPolicy};
use crate::optimizer::{EhTimeMode, EhTimePolicy, DEFAULT_TOL_NATS};
use crate::phy::PhyParams;
use crate::sf_alloc::SfPolicy;
use crate::units::dbm_to_watts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerMode {
    /// Bisection max-min allocation.
    #[default]
    Maxmin,
    /// Every user transmits at its cap.
    FullCap,
}

impl PowerMode {
    pub fn label(self) -> &'static str {
        match self {
            PowerMode::Maxmin => "maxmin",
            PowerMode::FullCap => "full_cap",
        }
    }
}

/// Either an explicit list or `{ start, count }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    Range { start: u64, count: u64 },
}

impl Default for SeedSpec {
    fn default() -> Self {
        SeedSpec::Range { start: 0, count: 100 }
    }
}

impl SeedSpec {
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            SeedSpec::List(v) => v.clone(),
            SeedSpec::Range { start, count } => (0..*count).map(|i| start.wrapping_add(i)).collect(),
        }
    }
}

/// Extra values for each policy axis of a sweep. An empty list keeps the
/// scenario's own setting.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepAxes {
    pub sf_policy: Vec<SfPolicy>,
    pub corr_policy: Vec<CorrelationKind>,
    pub col_mode: Vec<CollisionMode>,
    pub eh_mode: Vec<EhTimeMode>,
    pub power_mode: Vec<PowerMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub geometry: GeometryConfig,
    pub phy: PhyParams,
    pub eh: EhModel,
    /// Transmit power of each power beacon.
    pub beacon_tx_w: f64,
    /// Transmit power limit of the LoRa users.
    pub p_t_dbm: f64,
    pub sf_policy: SfPolicy,
    pub corr_policy: CorrelationPolicy,
    pub col_mode: CollisionMode,
    pub eh_policy: EhTimePolicy,
    pub power_mode: PowerMode,
    /// Bisection bracket width.
    pub solver_tol_nats: f64,
    pub seeds: SeedSpec,
    /// User densities per km^2.
    pub density_sweep: Vec<f64>,
    pub sweep: SweepAxes,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            geometry: GeometryConfig::default(),
            phy: PhyParams::default(),
            eh: EhModel::default(),
            beacon_tx_w: 1.0,
            p_t_dbm: 17.0,
            sf_policy: SfPolicy::Unfair,
            corr_policy: CorrelationPolicy::default(),
            col_mode: CollisionMode::EhDependent,
            eh_policy: EhTimePolicy::default(),
            power_mode: PowerMode::Maxmin,
            solver_tol_nats: DEFAULT_TOL_NATS,
            seeds: SeedSpec::default(),
            density_sweep: vec![2e3, 4e3, 6e3, 8e3, 1e4],
            sweep: SweepAxes::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn p_t_w(&self) -> f64 {
        dbm_to_watts(self.p_t_dbm)
    }

    pub fn seed_list(&self) -> Vec<u64> {
        self.seeds.seeds()
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.phy.validate()?;
        self.eh.validate()?;
        self.corr_policy.validate()?;
        self.eh_policy.validate()?;
        if !(self.beacon_tx_w.is_finite() && self.beacon_tx_w >= 0.0) {
            return Err(Error::config("beacon_tx_w must be finite and non-negative"));
        }
        if !self.p_t_dbm.is_finite() {
            return Err(Error::config("p_t_dbm must be finite"));
        }
        if !(self.solver_tol_nats.is_finite() && self.solver_tol_nats > 0.0) {
            return Err(Error::config("solver_tol_nats must be positive"));
        }
        if self.seed_list().is_empty() {
            return Err(Error::config("seeds must not be empty"));
        }
        if self.density_sweep.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::config("density_sweep entries must be finite and non-negative"));
        }
        if self.sweep.corr_policy.contains(&CorrelationKind::Custom) && self.corr_policy.custom.is_none() {
            return Err(Error::config("sweep.corr_policy lists custom but corr_policy.custom is unset"));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Toml(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Toml(msg) => Error::Toml(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Toml(e.to_string()))
    }

    /// Applies `a.b.c=value`. The value is read as a TOML value when it
    /// parses as one (`3`, `1e4`, `"x"`, `[1, 2]`, `{ start = 0, count = 5 }`)
    /// and as a bare string otherwise.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (path, raw) = spec
            .split_once('=')
            .ok_or_else(|| Error::config(format!("override `{spec}` is not key=value")))?;
        let path = path.trim();
        let raw = raw.trim();
        let keys: Vec<&str> = path.split('.').collect();
        if keys.iter().any(|k| k.is_empty()) {
            return Err(Error::config(format!("override key `{path}` is malformed")));
        }
        let value = match format!("v = {raw}").parse::<toml::Table>() {
            Ok(mut t) => t.remove("v").expect("key present"),
            Err(_) => toml::Value::String(raw.to_string()),
        };
        let mut root = toml::Table::try_from(&*self).map_err(|e| Error::Toml(e.to_string()))?;
        let mut table = &mut root;
        for key in &keys[..keys.len() - 1] {
            let entry = table
                .entry(key.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            table = entry
                .as_table_mut()
                .ok_or_else(|| Error::config(format!("override key `{path}`: `{key}` is not a table")))?;
        }
        table.insert(keys[keys.len() - 1].to_string(), value);
        let cfg: ScenarioConfig = root
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(format!("override `{spec}`: {}", e.message())))?;
        cfg.validate()?;
        *self = cfg;
        Ok(())
    }

    pub fn apply_overrides<S: AsRef<str>>(&mut self, specs: &[S]) -> Result<()> {
        for s in specs {
            self.apply_override(s.as_ref())?;
        }
        Ok(())
    }
}
