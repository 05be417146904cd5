//! Per-run PM counter normalization and the observation-window averages
//! that feed the relation ranking.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Nrt;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no stored runs for relation toward cell {0}")]
    EmptyWindow(u64),
}

/// Counters for one relation over one run window.
///
/// Signal samples are reduced to their arithmetic mean at construction so
/// that the record can be exported and re-ingested without loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmRecord {
    pub run: u32,
    pub source_db_id: u64,
    pub target_db_id: u64,
    /// Successful HO executions.
    pub s_ho: u32,
    /// HO execution attempts.
    pub a_ho: u32,
    /// Successful HO preparations.
    pub sp_ho: u32,
    /// Attempted HO preparations.
    pub ap_ho: u32,
    pub mean_rsrp_dbm: f64,
    pub mean_rsrq_db: f64,
    pub n_samples: u32,
}

impl PmRecord {
    pub fn idle(run: u32, source_db_id: u64, target_db_id: u64) -> Self {
        Self {
            run,
            source_db_id,
            target_db_id,
            s_ho: 0,
            a_ho: 0,
            sp_ho: 0,
            ap_ho: 0,
            mean_rsrp_dbm: 0.0,
            mean_rsrq_db: 0.0,
            n_samples: 0,
        }
    }

    /// Attaches paired RSRP/RSRQ samples, storing their means.
    pub fn with_samples(mut self, rsrp_dbm: &[f64], rsrq_db: &[f64]) -> Self {
        debug_assert_eq!(rsrp_dbm.len(), rsrq_db.len());
        self.n_samples = rsrp_dbm.len() as u32;
        self.mean_rsrp_dbm = mean(rsrp_dbm);
        self.mean_rsrq_db = mean(rsrq_db);
        self
    }

    pub fn with_counters(mut self, s_ho: u32, a_ho: u32, sp_ho: u32, ap_ho: u32) -> Self {
        self.s_ho = s_ho;
        self.a_ho = a_ho;
        self.sp_ho = sp_ho;
        self.ap_ho = ap_ho;
        self
    }

    /// s_ho <= a_ho <= sp_ho <= ap_ho.
    pub fn counters_consistent(&self) -> bool {
        self.s_ho <= self.a_ho && self.a_ho <= self.sp_ho && self.sp_ho <= self.ap_ho
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// PM records of one run, grouped by source cell.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunPm {
    pub run: u32,
    pub cells: BTreeMap<u64, Vec<PmRecord>>,
}

impl RunPm {
    pub fn new(run: u32) -> Self {
        Self {
            run,
            cells: BTreeMap::new(),
        }
    }

    pub fn records(&self) -> impl Iterator<Item = &PmRecord> {
        self.cells.values().flatten()
    }
}

/// Each relation's share of the source cell's successful HOs.
///
/// When any HO succeeded the shares sum to exactly one: the last non-zero
/// share absorbs the floating point residual of the others.
pub fn normalized_success_share(records: &[PmRecord]) -> Vec<f64> {
    let total: u64 = records.iter().map(|r| r.s_ho as u64).sum();
    if total == 0 {
        return vec![0.0; records.len()];
    }
    let total = total as f64;
    let mut shares: Vec<f64> = records.iter().map(|r| r.s_ho as f64 / total).collect();
    if let Some(last) = records.iter().rposition(|r| r.s_ho > 0) {
        let head: f64 = shares[..last].iter().sum();
        shares[last] = (1.0 - head).max(0.0);
    }
    shares
}

pub fn relative_success(record: &PmRecord) -> f64 {
    ratio(record.s_ho, record.a_ho)
}

pub fn prep_success(record: &PmRecord) -> f64 {
    ratio(record.sp_ho, record.ap_ho)
}

fn ratio(num: u32, den: u32) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SignalMetric {
    Rsrp,
    Rsrq,
}

/// Non-negative reporting index of a signal level.
///
/// RSRP maps to `round(dBm + 140)` in 0..=97, RSRQ to `round(2 (dB + 19.5))`
/// in 0..=34.
pub fn reporting_index(metric: SignalMetric, value: f64) -> u32 {
    let (raw, max) = match metric {
        SignalMetric::Rsrp => ((value + 140.0).round(), 97.0),
        SignalMetric::Rsrq => ((2.0 * (value + 19.5)).round(), 34.0),
    };
    raw.clamp(0.0, max) as u32
}

/// Mean signal index of each relation divided by the largest index among
/// relations that have samples this run. Relations without samples get 0.
pub fn normalized_signal(records: &[PmRecord], metric: SignalMetric) -> Vec<f64> {
    let indices: Vec<Option<u32>> = records
        .iter()
        .map(|r| {
            (r.n_samples > 0).then(|| {
                let level = match metric {
                    SignalMetric::Rsrp => r.mean_rsrp_dbm,
                    SignalMetric::Rsrq => r.mean_rsrq_db,
                };
                reporting_index(metric, level)
            })
        })
        .collect();
    let max = indices.iter().flatten().copied().max().unwrap_or(0);
    indices
        .into_iter()
        .map(|idx| match idx {
            Some(i) if max > 0 => i as f64 / max as f64,
            _ => 0.0,
        })
        .collect()
}

/// Normalized metrics of one relation for one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub run: u32,
    pub ns_ho: f64,
    pub rs_ho: f64,
    pub ps_ho: f64,
    pub nrsrp: f64,
    pub nrsrq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    NsHo,
    RsHo,
    PsHo,
    Nrsrp,
    Nrsrq,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::NsHo,
        Metric::RsHo,
        Metric::PsHo,
        Metric::Nrsrp,
        Metric::Nrsrq,
    ];
}

impl RunMetrics {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::NsHo => self.ns_ho,
            Metric::RsHo => self.rs_ho,
            Metric::PsHo => self.ps_ho,
            Metric::Nrsrp => self.nrsrp,
            Metric::Nrsrq => self.nrsrq,
        }
    }
}

/// Normalized metrics for every relation of one source cell in one run.
pub fn run_metrics(records: &[PmRecord]) -> Vec<(u64, RunMetrics)> {
    let ns = normalized_success_share(records);
    let nrsrp = normalized_signal(records, SignalMetric::Rsrp);
    let nrsrq = normalized_signal(records, SignalMetric::Rsrq);
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            (
                r.target_db_id,
                RunMetrics {
                    run: r.run,
                    ns_ho: ns[i],
                    rs_ho: relative_success(r),
                    ps_ho: prep_success(r),
                    nrsrp: nrsrp[i],
                    nrsrq: nrsrq[i],
                },
            )
        })
        .collect()
}

/// Last `size` per-run metrics of each relation of one source cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricWindow {
    pub size: usize,
    pub series: BTreeMap<u64, VecDeque<RunMetrics>>,
}

impl MetricWindow {
    pub fn new(size: usize) -> Self {
        Self {
            size: size.max(1),
            series: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, target_db_id: u64, metrics: RunMetrics) {
        let buf = self.series.entry(target_db_id).or_default();
        buf.push_back(metrics);
        while buf.len() > self.size {
            buf.pop_front();
        }
    }

    pub fn ingest(&mut self, records: &[PmRecord]) {
        for (target, metrics) in run_metrics(records) {
            self.push(target, metrics);
        }
    }

    pub fn stored(&self, target_db_id: u64) -> usize {
        self.series.get(&target_db_id).map_or(0, VecDeque::len)
    }

    /// Mean of the stored values (fewer than `size` during warm-up).
    pub fn average(&self, target_db_id: u64, metric: Metric) -> Result<f64, MetricsError> {
        match self.series.get(&target_db_id) {
            Some(buf) if !buf.is_empty() => {
                Ok(buf.iter().map(|m| m.get(metric)).sum::<f64>() / buf.len() as f64)
            }
            _ => Err(MetricsError::EmptyWindow(target_db_id)),
        }
    }

    /// Drops series of relations no longer in `keep`.
    pub fn retain(&mut self, keep: &BTreeSet<u64>) {
        self.series.retain(|target, _| keep.contains(target));
    }
}

pub fn window_average(
    window: &MetricWindow,
    target_db_id: u64,
    metric: Metric,
) -> Result<f64, MetricsError> {
    window.average(target_db_id, metric)
}

/// Source-to-target distances of one NRT.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub dist_km: BTreeMap<u64, f64>,
    pub max_dist_km: f64,
}

impl Geometry {
    pub fn from_nrt(nrt: &Nrt) -> Self {
        Self::from_distances(
            nrt.entries
                .iter()
                .map(|e| (e.target_db_id(), e.distance_km())),
        )
    }

    pub fn from_distances(dists: impl IntoIterator<Item = (u64, f64)>) -> Self {
        let dist_km: BTreeMap<u64, f64> = dists.into_iter().collect();
        let max_dist_km = dist_km.values().copied().fold(0.0, f64::max);
        Self {
            dist_km,
            max_dist_km,
        }
    }

    /// dist / max_dist, or 0 when every target is co-located.
    pub fn normalized_distance(&self, target_db_id: u64) -> f64 {
        match self.dist_km.get(&target_db_id) {
            Some(&d) if self.max_dist_km > 0.0 => d / self.max_dist_km,
            _ => 0.0,
        }
    }
}
