//! Relation ranking and cumulative-sum detection of the poorly performing
//! cluster at the bottom of an NRT.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::PolicyParams;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("rank component {component} = {value} outside [0, 1]")]
pub struct RankError {
    pub component: &'static str,
    pub value: f64,
}

/// Window-averaged metrics of one relation plus its normalized distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankComponents {
    pub a_ns_ho: f64,
    pub a_rs_ho: f64,
    pub a_ps_ho: f64,
    pub a_nrsrp: f64,
    pub a_nrsrq: f64,
    pub n_dist: f64,
}

impl RankComponents {
    pub fn new(
        a_ns_ho: f64,
        a_rs_ho: f64,
        a_ps_ho: f64,
        a_nrsrp: f64,
        a_nrsrq: f64,
        n_dist: f64,
    ) -> Self {
        Self {
            a_ns_ho,
            a_rs_ho,
            a_ps_ho,
            a_nrsrp,
            a_nrsrq,
            n_dist,
        }
    }

    fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("a_ns_ho", self.a_ns_ho),
            ("a_rs_ho", self.a_rs_ho),
            ("a_ps_ho", self.a_ps_ho),
            ("a_nrsrp", self.a_nrsrp),
            ("a_nrsrq", self.a_nrsrq),
            ("n_dist", self.n_dist),
        ]
    }
}

/// `A_NS + A_RS * A_PS + (A_NRSRP + A_NRSRQ - N_DIST)`, in [-1, 4].
pub fn rank_relation(c: &RankComponents) -> Result<f64, RankError> {
    for (component, value) in c.named() {
        if !(0.0..=1.0).contains(&value) {
            return Err(RankError { component, value });
        }
    }
    Ok(c.a_ns_ho + (c.a_rs_ho * c.a_ps_ho) + (c.a_nrsrp + c.a_nrsrq - c.n_dist))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub target_db_id: u64,
    pub components: RankComponents,
    pub rank: f64,
    pub no_remove: bool,
    /// Run in which the relation was created.
    pub created_run: u32,
}

/// Ranks of the rankable relations of one NRT, in NRT order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub cell_db_id: u64,
    pub entries: Vec<RankEntry>,
}

impl RankTable {
    pub fn get(&self, target_db_id: u64) -> Option<&RankEntry> {
        self.entries.iter().find(|e| e.target_db_id == target_db_id)
    }

    /// Entries sorted worst first; ties broken by target id.
    pub fn ascending(&self) -> Vec<&RankEntry> {
        let mut sorted: Vec<&RankEntry> = self.entries.iter().collect();
        sorted.sort_by(|a, b| {
            a.rank
                .total_cmp(&b.rank)
                .then(a.target_db_id.cmp(&b.target_db_id))
        });
        sorted
    }

    pub fn median(&self) -> Option<f64> {
        let sorted = self.ascending();
        let n = sorted.len();
        match n {
            0 => None,
            _ if n % 2 == 1 => Some(sorted[n / 2].rank),
            _ => Some(0.5 * (sorted[n / 2 - 1].rank + sorted[n / 2].rank)),
        }
    }
}

/// Outcome of the change-point search over ascending ranks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CusumSplit {
    /// Number of relations below the change point.
    pub k: usize,
    /// Minimum of the cumulative sum, attained at `k`.
    pub s_min: f64,
    pub sigma: f64,
    /// `h * sigma * sqrt(n)`.
    pub gate: f64,
    pub significant: bool,
}

impl CusumSplit {
    /// Rank of the last relation below the change point.
    pub fn cutoff(&self, ascending: &[f64]) -> Option<f64> {
        (self.significant && self.k > 0).then(|| ascending[self.k - 1])
    }
}

/// Mean-deviation cumulative sum over ranks sorted ascending.
///
/// `S_k = sum_{j<=k} (r_j - mean)`; the change point is the first k
/// minimizing `S_k`, and it is significant when `|S_k| > h * sigma * sqrt(n)`.
pub fn cusum_split(ascending: &[f64], sensitivity: f64) -> CusumSplit {
    let n = ascending.len();
    if n == 0 {
        return CusumSplit {
            k: 0,
            s_min: 0.0,
            sigma: 0.0,
            gate: 0.0,
            significant: false,
        };
    }
    let nf = n as f64;
    // A flat table must not split on the rounding error of its mean.
    let mean = if ascending[0] == ascending[n - 1] {
        ascending[0]
    } else {
        ascending.iter().sum::<f64>() / nf
    };
    let sigma = (ascending.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / nf).sqrt();
    let mut s = 0.0;
    let mut s_min = f64::INFINITY;
    let mut k = 0;
    for (i, r) in ascending.iter().enumerate() {
        s += r - mean;
        if s < s_min {
            s_min = s;
            k = i + 1;
        }
    }
    let gate = sensitivity * sigma * nf.sqrt();
    let significant = sigma > 0.0 && s_min.abs() > gate;
    CusumSplit {
        k,
        s_min,
        sigma,
        gate,
        significant,
    }
}

/// Relations to remove from one NRT, worst first.
///
/// Nothing is removed before `window` runs have elapsed or when fewer than
/// two relations are ranked. Whitelisted relations and relations younger
/// than the grace period are dropped, and at most `removal_cap` remain.
pub fn cusum_removal_candidates(
    table: &RankTable,
    params: &PolicyParams,
    run_counter: u32,
    window: usize,
) -> (Vec<RankEntry>, Option<CusumSplit>) {
    if (run_counter as usize) < window || table.entries.len() < 2 {
        return (Vec::new(), None);
    }
    let sorted = table.ascending();
    let ranks: Vec<f64> = sorted.iter().map(|e| e.rank).collect();
    let split = cusum_split(&ranks, params.cusum_sensitivity);
    if !split.significant {
        return (Vec::new(), Some(split));
    }
    let picked = sorted[..split.k]
        .iter()
        .filter(|e| !e.no_remove)
        .filter(|e| run_counter.saturating_sub(e.created_run) >= params.grace_runs)
        .take(params.removal_cap)
        .map(|e| (*e).clone())
        .collect();
    (picked, Some(split))
}
