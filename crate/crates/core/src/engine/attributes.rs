//! D-ANR attribute management: counting bad D-ANR additions and stepping
//! the internal D-ANR signal thresholds.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::metrics::{Metric, MetricWindow, SignalMetric};
use crate::model::{Actor, NeighborRelation};

/// Per-cell D-ANR control parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DanrAttributes {
    /// Internal D-ANR RSRP threshold for NR additions (dBm).
    pub cell_rsrp_thr_dbm: f64,
    /// Internal D-ANR RSRQ threshold for NR additions (dB).
    pub cell_rsrq_thr_db: f64,
    /// Minimum averaged HO share a new NR should reach.
    pub ho_min_thr: f64,
    /// Minimum averaged normalized RSRP a new NR should reach.
    pub rp_thr: f64,
    /// Minimum averaged normalized RSRQ a new NR should reach.
    pub rq_thr: f64,
    /// Distinct UEs that must report a cell before D-ANR adds it.
    pub ue_min_count: u32,
    /// Consecutive runs without HO attempts before D-ANR drops a relation.
    pub removal_timer_runs: u32,
}

impl Default for DanrAttributes {
    fn default() -> Self {
        Self {
            cell_rsrp_thr_dbm: -112.0,
            cell_rsrq_thr_db: -16.0,
            ho_min_thr: 0.01,
            rp_thr: 0.5,
            rq_thr: 0.5,
            ue_min_count: 3,
            removal_timer_runs: 12,
        }
    }
}

impl DanrAttributes {
    pub fn threshold(&self, metric: SignalMetric) -> f64 {
        match metric {
            SignalMetric::Rsrp => self.cell_rsrp_thr_dbm,
            SignalMetric::Rsrq => self.cell_rsrq_thr_db,
        }
    }

    fn threshold_mut(&mut self, metric: SignalMetric) -> &mut f64 {
        match metric {
            SignalMetric::Rsrp => &mut self.cell_rsrp_thr_dbm,
            SignalMetric::Rsrq => &mut self.cell_rsrq_thr_db,
        }
    }

    /// Raises the threshold of `metric` by exactly 1 dB.
    pub fn step_up(&mut self, metric: SignalMetric) {
        *self.threshold_mut(metric) += 1.0;
    }

    fn signal_floor(&self, metric: SignalMetric) -> f64 {
        match metric {
            SignalMetric::Rsrp => self.rp_thr,
            SignalMetric::Rsrq => self.rq_thr,
        }
    }
}

/// A new relation is bad when D-ANR created it and both its HO share and
/// its normalized signal average fall below the minimums.
pub fn is_bad_addition(
    rel: &NeighborRelation,
    window: &MetricWindow,
    attrs: &DanrAttributes,
    metric: SignalMetric,
) -> bool {
    if rel.created_by != Actor::Danr {
        return false;
    }
    let target = rel.target_db_id();
    let Ok(ns) = window.average(target, Metric::NsHo) else {
        return false;
    };
    if ns < attrs.ho_min_thr {
        let signal_metric = match metric {
            SignalMetric::Rsrp => Metric::Nrsrp,
            SignalMetric::Rsrq => Metric::Nrsrq,
        };
        if let Ok(signal) = window.average(target, signal_metric) {
            if signal < attrs.signal_floor(metric) {
                return true;
            }
        }
    }
    false
}

/// Bad additions among a base station's new relations. Each item pairs a
/// relation with its source cell's window and attributes.
pub fn count_bad_additions<'a>(
    new_relations: impl IntoIterator<
        Item = (&'a NeighborRelation, &'a MetricWindow, &'a DanrAttributes),
    >,
    metric: SignalMetric,
) -> u32 {
    new_relations
        .into_iter()
        .filter(|(rel, window, attrs)| is_bad_addition(rel, window, attrs, metric))
        .count() as u32
}

/// `bad_additions` indexed by run counter, for one base station and metric.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BadAdditions {
    pub by_run: BTreeMap<u32, u32>,
    pub increments: u32,
}

impl BadAdditions {
    pub fn get(&self, run_counter: u32) -> u32 {
        self.by_run.get(&run_counter).copied().unwrap_or(0)
    }

    /// Records this run's count and reports whether the threshold steps up:
    /// on the first run when any addition was bad, afterwards when the count
    /// exceeds the previous run's.
    pub fn record(&mut self, run_counter: u32, bad: u32) -> bool {
        self.by_run.insert(run_counter, bad);
        let step = if run_counter == 1 && bad > 0 {
            true
        } else {
            bad > self.get(run_counter.saturating_sub(1))
        };
        if step {
            self.increments += 1;
        }
        step
    }
}

/// Applies one step of threshold management to every cell of a base
/// station. Returns whether the threshold was raised.
pub fn stage_danr_attribute_management<'a>(
    cells: impl IntoIterator<Item = &'a mut DanrAttributes>,
    history: &mut BadAdditions,
    run_counter: u32,
    bad_count: u32,
    metric: SignalMetric,
) -> bool {
    let step = history.record(run_counter, bad_count);
    if step {
        for attrs in cells {
            attrs.step_up(metric);
        }
    }
    step
}
