use serde::{Deserialize, Serialize};

use crate::model::Stamp;

/// Run cadence of the H-ANR cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineSchedule {
    /// Length of one run window in seconds.
    pub anr_run_time_s: u64,
    /// Total campaign duration in seconds.
    pub time_window_s: u64,
    /// Observation window W in runs.
    pub window: usize,
}

impl Default for EngineSchedule {
    fn default() -> Self {
        Self {
            anr_run_time_s: 900,
            time_window_s: 30 * 900,
            window: 10,
        }
    }
}

impl EngineSchedule {
    pub fn total_runs(&self) -> u32 {
        (self.time_window_s / self.anr_run_time_s.max(1)) as u32
    }

    /// Time of the H-ANR cycle closing run `run`.
    pub fn cycle_stamp(&self, run: u32) -> Stamp {
        Stamp {
            run,
            time_s: (run as u64 + 1) * self.anr_run_time_s,
        }
    }

    /// Time of the D-ANR phase of run `run`, halfway through its window and
    /// before the cycle that closes it.
    pub fn danr_stamp(&self, run: u32) -> Stamp {
        Stamp {
            run,
            time_s: run as u64 * self.anr_run_time_s + self.anr_run_time_s / 2,
        }
    }
}

/// Knobs for the list and optimization policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyParams {
    /// Re-additions of a pair before it is blacklisted.
    pub n_repeat: u32,
    /// Fraction of an NRT counted as its top tier.
    pub whitelist_quantile: f64,
    /// Consecutive runs in the top tier (or below the median) before a
    /// relation is whitelisted (or loses the whitelist).
    pub whitelist_streak: u32,
    pub x2_attempt_limit: u32,
    /// Relations younger than this many runs are never removed.
    pub grace_runs: u32,
    pub removal_cap: usize,
    /// Runs before a removed target may be re-added by H-ANR.
    pub cooldown_runs: u32,
    pub cusum_sensitivity: f64,
    /// Number of cells used to rebuild an empty NRT; also the size of the
    /// geographic neighborhood searched for vacancy additions.
    pub rebuild_k: usize,
}

impl PolicyParams {
    /// Defaults tied to the observation window size.
    pub fn for_window(window: usize) -> Self {
        let w = window as u32;
        Self {
            n_repeat: 3,
            whitelist_quantile: 0.2,
            whitelist_streak: w,
            x2_attempt_limit: 3,
            grace_runs: w,
            removal_cap: 4,
            cooldown_runs: 2 * w,
            cusum_sensitivity: 0.5,
            rebuild_k: 16,
        }
    }
}

impl Default for PolicyParams {
    fn default() -> Self {
        Self::for_window(EngineSchedule::default().window)
    }
}
