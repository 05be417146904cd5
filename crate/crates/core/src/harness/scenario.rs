use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{DanrAttributes, EngineSchedule, PolicyParams};
use crate::netsim::{RadioModel, TopologyConfig, TrafficConfig};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("reading {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: String, message: String },
}

/// Policy knobs as written in a scenario file. Unset fields take the
/// defaults derived from the observation window.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_repeat: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub whitelist_quantile: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub whitelist_streak: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x2_attempt_limit: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grace_runs: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub removal_cap: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cooldown_runs: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cusum_sensitivity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rebuild_k: Option<usize>,
}

impl PolicyOverrides {
    pub fn resolve(&self, window: usize) -> PolicyParams {
        let d = PolicyParams::for_window(window);
        PolicyParams {
            n_repeat: self.n_repeat.unwrap_or(d.n_repeat),
            whitelist_quantile: self.whitelist_quantile.unwrap_or(d.whitelist_quantile),
            whitelist_streak: self.whitelist_streak.unwrap_or(d.whitelist_streak),
            x2_attempt_limit: self.x2_attempt_limit.unwrap_or(d.x2_attempt_limit),
            grace_runs: self.grace_runs.unwrap_or(d.grace_runs),
            removal_cap: self.removal_cap.unwrap_or(d.removal_cap),
            cooldown_runs: self.cooldown_runs.unwrap_or(d.cooldown_runs),
            cusum_sensitivity: self.cusum_sensitivity.unwrap_or(d.cusum_sensitivity),
            rebuild_k: self.rebuild_k.unwrap_or(d.rebuild_k),
        }
    }

    pub fn from_params(p: &PolicyParams) -> Self {
        Self {
            n_repeat: Some(p.n_repeat),
            whitelist_quantile: Some(p.whitelist_quantile),
            whitelist_streak: Some(p.whitelist_streak),
            x2_attempt_limit: Some(p.x2_attempt_limit),
            grace_runs: Some(p.grace_runs),
            removal_cap: Some(p.removal_cap),
            cooldown_runs: Some(p.cooldown_runs),
            cusum_sensitivity: Some(p.cusum_sensitivity),
            rebuild_k: Some(p.rebuild_k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub seed: u64,
    /// Maximum entries per NRT.
    pub nrt_capacity: usize,
    /// Base stations with D-ANR switched off.
    pub danr_inactive: Vec<u32>,
    /// PLMNs blocked from the start.
    pub plmn_blacklist: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub schedule: EngineSchedule,
    pub topology: TopologyConfig,
    pub radio: RadioModel,
    pub traffic: TrafficConfig,
    pub danr: DanrAttributes,
    pub policy: PolicyOverrides,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            seed: 1,
            nrt_capacity: 32,
            danr_inactive: Vec::new(),
            plmn_blacklist: Vec::new(),
            output_dir: None,
            schedule: EngineSchedule::default(),
            topology: TopologyConfig::default(),
            radio: RadioModel::default(),
            traffic: TrafficConfig::default(),
            danr: DanrAttributes::default(),
            policy: PolicyOverrides::default(),
        }
    }
}

impl Scenario {
    pub fn policy_params(&self) -> PolicyParams {
        self.policy.resolve(self.schedule.window)
    }

    /// Copy with every policy default written out.
    pub fn resolved(&self) -> Scenario {
        Scenario {
            policy: PolicyOverrides::from_params(&self.policy_params()),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |key: &str, message: &str| {
            Err(ScenarioError::Invalid {
                key: key.to_string(),
                message: message.to_string(),
            })
        };
        let s = &self.schedule;
        if s.anr_run_time_s == 0 {
            return invalid("schedule.anr_run_time_s", "must be positive");
        }
        if s.total_runs() == 0 {
            return invalid("schedule.time_window_s", "must cover at least one run");
        }
        if s.window == 0 {
            return invalid("schedule.window", "must be positive");
        }
        if self.nrt_capacity == 0 {
            return invalid("nrt_capacity", "must be positive");
        }
        if self.topology.bs_count == 0 {
            return invalid("topology.bs_count", "must be positive");
        }
        if !(1..=6).contains(&self.topology.cells_per_bs) {
            return invalid("topology.cells_per_bs", "must be in 1..=6");
        }
        if !(0.0..=1.0).contains(&self.topology.overshooter_fraction) {
            return invalid("topology.overshooter_fraction", "must be in [0, 1]");
        }
        if self.radio.path_loss_exponent <= 0.0 {
            return invalid("radio.path_loss_exponent", "must be positive");
        }
        if self.radio.shadowing_sigma_db < 0.0 {
            return invalid("radio.shadowing_sigma_db", "must be non-negative");
        }
        if self.radio.ref_dist_km <= 0.0 {
            return invalid("radio.ref_dist_km", "must be positive");
        }
        for (key, p) in [
            ("traffic.prep_success", self.traffic.prep_success),
            ("traffic.exec_success", self.traffic.exec_success),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return invalid(key, "must be a probability");
            }
        }
        let p = self.policy_params();
        if !(p.whitelist_quantile > 0.0 && p.whitelist_quantile <= 1.0) {
            return invalid("policy.whitelist_quantile", "must be in (0, 1]");
        }
        if p.cusum_sensitivity <= 0.0 {
            return invalid("policy.cusum_sensitivity", "must be positive");
        }
        for (key, v) in [
            ("policy.n_repeat", p.n_repeat as usize),
            ("policy.whitelist_streak", p.whitelist_streak as usize),
            ("policy.x2_attempt_limit", p.x2_attempt_limit as usize),
            ("policy.grace_runs", p.grace_runs as usize),
            ("policy.removal_cap", p.removal_cap),
            ("policy.cooldown_runs", p.cooldown_runs as usize),
            ("policy.rebuild_k", p.rebuild_k),
        ] {
            if v == 0 {
                return invalid(key, "must be positive");
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str, origin: &Path) -> Result<Scenario, ScenarioError> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Parse {
            path: origin.to_path_buf(),
            message: e.message().to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario is always representable")
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Scenario::from_toml(&text, path)
}
