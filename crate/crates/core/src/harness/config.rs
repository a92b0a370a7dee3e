//! Scenario configuration: JSON loading, defaults and validation.

use std::path::Path;

use conic::SolveOptions;
use serde::{Deserialize, Serialize};

use crate::algorithm::{default_beta, LoopConfig};
use crate::channel::ArrayGeometry;
use crate::precoding::{GroupAssignment, PhaseAlphabet, QosTargets};
use crate::{Result, SimError};

/// Which transmitter architectures to simulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSelection {
    Hybrid,
    Digital,
    Both,
}

impl ModeSelection {
    pub fn modes(self) -> &'static [RunMode] {
        match self {
            ModeSelection::Hybrid => &[RunMode::Hybrid],
            ModeSelection::Digital => &[RunMode::Digital],
            ModeSelection::Both => &[RunMode::Hybrid, RunMode::Digital],
        }
    }

    pub fn includes_hybrid(self) -> bool {
        self != ModeSelection::Digital
    }
}

impl std::str::FromStr for ModeSelection {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "hybrid" => Ok(Self::Hybrid),
            "digital" => Ok(Self::Digital),
            "both" => Ok(Self::Both),
            other => Err(format!(
                "unknown mode `{other}` (expected hybrid, digital or both)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Hybrid,
    Digital,
}

impl RunMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RunMode::Hybrid => "hybrid",
            RunMode::Digital => "digital",
        }
    }
}

/// Per-entry power `δ` of the phase alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMode {
    /// `δ = 1/N_tx`, so that `‖F‖²_F = N_RF`.
    RfChainBudget,
    /// `δ = 1/N_RF`.
    InverseRfChains,
    Explicit(f64),
}

/// SINR target(s) in dB: one shared value or one per group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaSpec {
    Shared(f64),
    PerGroup(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NRandRule {
    /// `N_rand = 400 + 300 (N_tx + N_rx − 11)`.
    DimensionScaled,
}

/// Randomizations per stage: a fixed count or a dimension rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NRandSpec {
    Fixed(usize),
    Rule(NRandRule),
}

/// Mean angles (degrees): explicit values, or drawn uniformly from a range
/// once per realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleConfig {
    #[serde(default)]
    pub aod_means: Option<Vec<f64>>,
    #[serde(default = "default_aod_range")]
    pub aod_range: [f64; 2],
    #[serde(default = "default_aod_spread")]
    pub aod_spread: f64,
    #[serde(default)]
    pub aoa_means: Option<Vec<f64>>,
    #[serde(default = "default_aoa_range")]
    pub aoa_range: [f64; 2],
    #[serde(default = "default_aoa_spread")]
    pub aoa_spread: f64,
}

fn default_aod_range() -> [f64; 2] {
    [-80.0, 80.0]
}
fn default_aod_spread() -> f64 {
    30.0
}
fn default_aoa_range() -> [f64; 2] {
    [-360.0, 360.0]
}
fn default_aoa_spread() -> f64 {
    60.0
}

impl Default for AngleConfig {
    fn default() -> Self {
        Self {
            aod_means: None,
            aod_range: default_aod_range(),
            aod_spread: default_aod_spread(),
            aoa_means: None,
            aoa_range: default_aoa_range(),
            aoa_spread: default_aoa_spread(),
        }
    }
}

/// One sweep dimension. Several axes form a Cartesian product, first axis
/// outermost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", rename_all = "snake_case", deny_unknown_fields)]
pub enum SweepAxis {
    NRf {
        values: Vec<usize>,
    },
    NRx {
        values: Vec<usize>,
    },
    Gamma {
        values_db: Vec<f64>,
    },
    NRandIter {
        n_rand: Vec<usize>,
        n_iter: Vec<usize>,
    },
}

impl SweepAxis {
    pub fn len(&self) -> usize {
        match self {
            SweepAxis::NRf { values } | SweepAxis::NRx { values } => values.len(),
            SweepAxis::Gamma { values_db } => values_db.len(),
            SweepAxis::NRandIter { n_rand, n_iter } => n_rand.len() * n_iter.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Applies value number `i` of this axis to `cfg`.
    fn apply(&self, i: usize, cfg: &mut ScenarioConfig) {
        match self {
            SweepAxis::NRf { values } => cfg.n_rf = values[i],
            SweepAxis::NRx { values } => cfg.n_rx = values[i],
            SweepAxis::Gamma { values_db } => cfg.gamma_db = vec![values_db[i]; cfg.num_groups],
            SweepAxis::NRandIter { n_rand, n_iter } => {
                // n_iter outermost, so that each N_iter block lists all N_rand.
                cfg.n_iter = n_iter[i / n_rand.len()];
                cfg.n_rand = NRandSpec::Fixed(n_rand[i % n_rand.len()]);
            }
        }
    }
}

/// A complete, validated experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_rf: usize,
    pub num_users: usize,
    pub num_groups: usize,
    /// One SINR target per group, in dB.
    pub gamma_db: Vec<f64>,
    pub sigma2_dbm: f64,
    pub prx_dbm: f64,
    pub alphabet_size: usize,
    pub delta_mode: DeltaMode,
    pub num_paths: usize,
    pub element_spacing: f64,
    pub angles: AngleConfig,
    pub n_iter: usize,
    pub n_rand: NRandSpec,
    /// `None` selects `G³ N_RF N_tx N_rx`.
    pub beta: Option<f64>,
    pub n_realizations: usize,
    pub master_seed: u64,
    pub mode: ModeSelection,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
    pub sweep: Vec<SweepAxis>,
}

/// The on-disk form: everything optional so that missing fields produce
/// precise messages and defaults can be applied.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    n_tx: Option<usize>,
    n_rx: Option<usize>,
    n_rf: Option<usize>,
    #[serde(alias = "K")]
    num_users: Option<usize>,
    #[serde(alias = "G")]
    num_groups: Option<usize>,
    gamma_db: Option<GammaSpec>,
    sigma2_dbm: Option<f64>,
    prx_dbm: Option<f64>,
    #[serde(alias = "L")]
    alphabet_size: Option<usize>,
    delta_mode: Option<DeltaMode>,
    #[serde(alias = "M_p")]
    num_paths: Option<usize>,
    element_spacing: Option<f64>,
    angles: Option<AngleConfig>,
    n_iter: Option<usize>,
    n_rand: Option<NRandSpec>,
    beta: Option<f64>,
    n_realizations: Option<usize>,
    master_seed: Option<u64>,
    mode: Option<ModeSelection>,
    solver_tol: Option<f64>,
    solver_max_iter: Option<usize>,
    #[serde(default)]
    sweep: Vec<SweepAxis>,
}

fn required<T>(value: Option<T>, field: &str, symbol: &str) -> Result<T> {
    value.ok_or_else(|| SimError::config(field, format!("is required ({symbol})")))
}

impl RawConfig {
    fn resolve(self) -> Result<ScenarioConfig> {
        let num_groups = required(
            self.num_groups,
            "num_groups",
            "G, number of multicast groups",
        )?;
        let gamma_db = match required(self.gamma_db, "gamma_db", "SINR target in dB")? {
            GammaSpec::Shared(g) => vec![g; num_groups],
            GammaSpec::PerGroup(v) => v,
        };
        let cfg = ScenarioConfig {
            name: self.name.unwrap_or_else(|| "scenario".into()),
            n_tx: required(self.n_tx, "n_tx", "N_tx, transmit antennas")?,
            n_rx: required(self.n_rx, "n_rx", "N_rx, receive antennas")?,
            n_rf: required(self.n_rf, "n_rf", "N_RF, transmit RF chains")?,
            num_users: required(self.num_users, "num_users", "K, number of users")?,
            num_groups,
            gamma_db,
            sigma2_dbm: self.sigma2_dbm.unwrap_or(10.0),
            prx_dbm: self.prx_dbm.unwrap_or(10.0),
            alphabet_size: self.alphabet_size.unwrap_or(8),
            delta_mode: self.delta_mode.unwrap_or(DeltaMode::RfChainBudget),
            num_paths: self.num_paths.unwrap_or(8),
            element_spacing: self.element_spacing.unwrap_or(0.5),
            angles: self.angles.unwrap_or_default(),
            n_iter: required(self.n_iter, "n_iter", "N_iter, outer iterations")?,
            n_rand: required(self.n_rand, "n_rand", "N_rand, randomizations per stage")?,
            beta: self.beta,
            n_realizations: self.n_realizations.unwrap_or(1),
            master_seed: self.master_seed.unwrap_or(0),
            mode: self.mode.unwrap_or(ModeSelection::Both),
            solver_tol: self.solver_tol.unwrap_or(SolveOptions::default().tol),
            solver_max_iter: self
                .solver_max_iter
                .unwrap_or(SolveOptions::default().max_iter),
            sweep: self.sweep,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn positive(value: usize, field: &str) -> Result<()> {
    if value == 0 {
        return Err(SimError::config(field, "must be positive"));
    }
    Ok(())
}

fn finite(value: f64, field: &str) -> Result<()> {
    if !value.is_finite() {
        return Err(SimError::config(field, "must be finite"));
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text)?;
        raw.resolve()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration always serializes")
    }

    /// Checks the configuration itself and every sweep point derived from it.
    pub fn validate(&self) -> Result<()> {
        self.validate_point()?;
        for axis in &self.sweep {
            if axis.is_empty() {
                return Err(SimError::config("sweep", "axes need at least one value"));
            }
        }
        if !self.sweep.is_empty() {
            for point in self.sweep_points() {
                point.validate_point().map_err(|e| match e {
                    SimError::Config { field, reason } => SimError::Config {
                        field,
                        reason: format!("{reason} (at sweep point {})", point.name),
                    },
                    other => other,
                })?;
            }
        }
        Ok(())
    }

    fn validate_point(&self) -> Result<()> {
        positive(self.n_tx, "n_tx")?;
        positive(self.n_rx, "n_rx")?;
        positive(self.n_rf, "n_rf")?;
        positive(self.num_users, "num_users")?;
        positive(self.num_groups, "num_groups")?;
        positive(self.alphabet_size, "alphabet_size")?;
        positive(self.num_paths, "num_paths")?;
        positive(self.n_iter, "n_iter")?;
        positive(self.n_realizations, "n_realizations")?;
        positive(self.solver_max_iter, "solver_max_iter")?;
        if self.num_users < self.num_groups {
            return Err(SimError::config(
                "num_users",
                "must be at least num_groups (every group needs a user)",
            ));
        }
        if self.mode.includes_hybrid() && !(self.num_groups <= self.n_rf && self.n_rf <= self.n_tx)
        {
            return Err(SimError::config(
                "n_rf",
                format!(
                    "must satisfy num_groups <= n_rf <= n_tx for hybrid runs (got {} <= {} <= {})",
                    self.num_groups, self.n_rf, self.n_tx
                ),
            ));
        }
        if self.gamma_db.len() != self.num_groups {
            return Err(SimError::config(
                "gamma_db",
                format!(
                    "has {} entries, expected one per group ({})",
                    self.gamma_db.len(),
                    self.num_groups
                ),
            ));
        }
        for &g in &self.gamma_db {
            finite(g, "gamma_db")?;
        }
        finite(self.sigma2_dbm, "sigma2_dbm")?;
        finite(self.prx_dbm, "prx_dbm")?;
        if !(self.element_spacing > 0.0 && self.element_spacing.is_finite()) {
            return Err(SimError::config("element_spacing", "must be positive"));
        }
        if let DeltaMode::Explicit(d) = self.delta_mode {
            if !(d > 0.0 && d.is_finite()) {
                return Err(SimError::config(
                    "delta_mode",
                    "explicit value must be positive",
                ));
            }
        }
        if let Some(b) = self.beta {
            if !(b > 0.0 && b.is_finite()) {
                return Err(SimError::config("beta", "must be positive"));
            }
        }
        if !(self.solver_tol > 0.0 && self.solver_tol < 1.0) {
            return Err(SimError::config("solver_tol", "must lie in (0, 1)"));
        }
        self.n_rand_value()?;
        let a = &self.angles;
        if !(a.aod_spread >= 0.0 && a.aoa_spread >= 0.0) {
            return Err(SimError::config("angles", "spreads must be nonnegative"));
        }
        if a.aod_range[0] > a.aod_range[1] || a.aoa_range[0] > a.aoa_range[1] {
            return Err(SimError::config(
                "angles",
                "ranges must be [low, high] with low <= high",
            ));
        }
        if let Some(m) = &a.aod_means {
            if m.len() != self.num_groups {
                return Err(SimError::config(
                    "angles.aod_means",
                    format!("needs {} entries (one per group)", self.num_groups),
                ));
            }
        }
        if let Some(m) = &a.aoa_means {
            if m.len() != self.num_users {
                return Err(SimError::config(
                    "angles.aoa_means",
                    format!("needs {} entries (one per user)", self.num_users),
                ));
            }
        }
        Ok(())
    }

    pub fn delta(&self) -> f64 {
        match self.delta_mode {
            DeltaMode::RfChainBudget => 1.0 / self.n_tx as f64,
            DeltaMode::InverseRfChains => 1.0 / self.n_rf as f64,
            DeltaMode::Explicit(d) => d,
        }
    }

    /// The penalty weight for the given architecture (`N_RF = N_tx` for the
    /// fully-digital transmitter).
    pub fn beta_for(&self, mode: RunMode) -> f64 {
        self.beta.unwrap_or_else(|| {
            let n_rf = match mode {
                RunMode::Hybrid => self.n_rf,
                RunMode::Digital => self.n_tx,
            };
            default_beta(self.num_groups, n_rf, self.n_tx, self.n_rx)
        })
    }

    pub fn n_rand_value(&self) -> Result<usize> {
        match self.n_rand {
            NRandSpec::Fixed(n) => {
                positive(n, "n_rand")?;
                Ok(n)
            }
            NRandSpec::Rule(NRandRule::DimensionScaled) => {
                let v = 400 + 300 * (self.n_tx as i64 + self.n_rx as i64 - 11);
                if v <= 0 {
                    return Err(SimError::config(
                        "n_rand",
                        format!(
                            "dimension rule gives {v} for N_tx = {}, N_rx = {}",
                            self.n_tx, self.n_rx
                        ),
                    ));
                }
                Ok(v as usize)
            }
        }
    }

    pub fn loop_config(&self, mode: RunMode) -> Result<LoopConfig> {
        Ok(LoopConfig {
            n_iter: self.n_iter,
            n_rand: self.n_rand_value()?,
            beta: self.beta_for(mode),
            solver: SolveOptions {
                tol: self.solver_tol,
                max_iter: self.solver_max_iter,
            },
        })
    }

    pub fn targets(&self) -> Result<QosTargets> {
        QosTargets::from_db(&self.gamma_db, self.sigma2_dbm, self.prx_dbm)
    }

    pub fn groups(&self) -> Result<GroupAssignment> {
        GroupAssignment::even(self.num_users, self.num_groups)
    }

    pub fn alphabet(&self) -> Result<PhaseAlphabet> {
        PhaseAlphabet::new(self.alphabet_size, self.delta())
    }

    pub fn tx_array(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::with_spacing(self.n_tx, self.element_spacing)
    }

    pub fn rx_array(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::with_spacing(self.n_rx, self.element_spacing)
    }

    pub fn num_sweep_points(&self) -> usize {
        self.sweep.iter().map(SweepAxis::len).product()
    }

    /// The configuration of every sweep point (a single point without
    /// axes), each with its sweep list cleared and a descriptive name.
    pub fn sweep_points(&self) -> Vec<ScenarioConfig> {
        let total = self.num_sweep_points();
        (0..total)
            .map(|index| {
                let mut cfg = self.clone();
                cfg.sweep.clear();
                let mut rest = index;
                let mut stride = total;
                let mut labels = Vec::new();
                for axis in &self.sweep {
                    stride /= axis.len();
                    let i = rest / stride;
                    rest %= stride;
                    axis.apply(i, &mut cfg);
                    labels.push(axis_label(axis, &cfg));
                }
                if !labels.is_empty() {
                    cfg.name = format!("{}[{}]", self.name, labels.join(","));
                }
                cfg
            })
            .collect()
    }
}

fn axis_label(axis: &SweepAxis, cfg: &ScenarioConfig) -> String {
    match axis {
        SweepAxis::NRf { .. } => format!("n_rf={}", cfg.n_rf),
        SweepAxis::NRx { .. } => format!("n_rx={}", cfg.n_rx),
        SweepAxis::Gamma { .. } => format!("gamma_db={}", cfg.gamma_db[0]),
        SweepAxis::NRandIter { .. } => match cfg.n_rand {
            NRandSpec::Fixed(n) => format!("n_iter={},n_rand={n}", cfg.n_iter),
            NRandSpec::Rule(_) => format!("n_iter={}", cfg.n_iter),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "n_tx": 12, "n_rx": 2, "n_rf": 8, "K": 60, "G": 4,
        "gamma_db": 4, "n_iter": 3, "n_rand": 500
    }"#;

    #[test]
    fn defaults_applied() {
        let cfg = ScenarioConfig::from_json(BASE).unwrap();
        assert_eq!(cfg.gamma_db, vec![4.0; 4]);
        assert_eq!(cfg.delta(), 1.0 / 12.0);
        assert_eq!(cfg.beta_for(RunMode::Hybrid), 12288.0);
        assert_eq!(cfg.alphabet_size, 8);
        assert_eq!(cfg.num_paths, 8);
        assert_eq!(cfg.sigma2_dbm, 10.0);
        assert_eq!(cfg.prx_dbm, 10.0);
    }

    #[test]
    fn missing_users_is_named() {
        let err = ScenarioConfig::from_json(
            r#"{"n_tx": 4, "n_rx": 1, "n_rf": 2, "G": 1,
            "gamma_db": 0, "n_iter": 1, "n_rand": 1}"#,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("num_users") && msg.contains('K'), "{msg}");
    }

    #[test]
    fn rf_chain_bounds_enforced() {
        let text = BASE.replace("\"n_rf\": 8", "\"n_rf\": 3");
        let err = ScenarioConfig::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("n_rf"));
        let digital = text.replace("\"G\": 4", "\"G\": 4, \"mode\": \"digital\"");
        assert!(ScenarioConfig::from_json(&digital).is_ok());
    }

    #[test]
    fn dimension_scaled_randomizations() {
        let text = BASE.replace("\"n_rand\": 500", "\"n_rand\": \"dimension_scaled\"");
        let cfg = ScenarioConfig::from_json(&text).unwrap();
        assert_eq!(cfg.n_rand_value().unwrap(), 400 + 300 * 3);
        let small = text
            .replace("\"n_tx\": 12", "\"n_tx\": 8")
            .replace("\"n_rx\": 2", "\"n_rx\": 1");
        assert!(ScenarioConfig::from_json(&small).is_err());
    }

    #[test]
    fn delta_modes() {
        let mut cfg = ScenarioConfig::from_json(BASE).unwrap();
        cfg.delta_mode = DeltaMode::InverseRfChains;
        assert_eq!(cfg.delta(), 1.0 / 8.0);
        let text = BASE.replace(
            "\"n_iter\"",
            "\"delta_mode\": {\"explicit\": 0.5}, \"n_iter\"",
        );
        assert_eq!(ScenarioConfig::from_json(&text).unwrap().delta(), 0.5);
    }

    #[test]
    fn sweep_product_order() {
        let text = BASE.replace(
            "\"n_iter\"",
            r#""sweep": [{"axis": "n_rf", "values": [5, 8]}, {"axis": "gamma", "values_db": [4, 6, 8]}], "n_iter""#,
        );
        let cfg = ScenarioConfig::from_json(&text).unwrap();
        let points = cfg.sweep_points();
        assert_eq!(points.len(), 6);
        assert_eq!((points[0].n_rf, points[0].gamma_db[0]), (5, 4.0));
        assert_eq!((points[2].n_rf, points[2].gamma_db[0]), (5, 8.0));
        assert_eq!((points[3].n_rf, points[3].gamma_db[0]), (8, 4.0));
        let bad = text.replace("[5, 8]", "[2, 8]");
        assert!(ScenarioConfig::from_json(&bad).is_err());
    }

    #[test]
    fn rejects_unknown_fields() {
        let text = BASE.replace("\"n_iter\"", "\"n_itr\": 2, \"n_iter\"");
        assert!(ScenarioConfig::from_json(&text).is_err());
    }
}
