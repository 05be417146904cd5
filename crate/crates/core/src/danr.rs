//! Behavioral model of the per-base-station distributed ANR function and
//! the reciprocal relation additions it triggers over X2.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::metrics::PmRecord;
use crate::model::{Actor, NeighborRelation, RejectReason, RemoveError, Stamp};
use crate::network::Network;

/// One UE's measurement of a cell it is not served by.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UeReport {
    pub source_db_id: u64,
    pub target_db_id: u64,
    pub ue: u32,
    pub rsrp_dbm: f64,
    pub rsrq_db: f64,
}

/// Idle-run counters driving timer-based removal.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DanrState {
    /// Per source cell: consecutive runs without HO attempts, per target.
    pub no_ho_runs: BTreeMap<u64, BTreeMap<u64, u32>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectOutcome {
    pub added: Vec<NeighborRelation>,
    pub rejected: Vec<(u64, RejectReason)>,
}

/// Adds every intra-frequency non-member reported by enough distinct UEs
/// above both signal thresholds. Targets in `exclude` are not considered.
pub fn danr_detect_and_add(
    net: &mut Network,
    cell: u64,
    reports: &[UeReport],
    exclude: &BTreeSet<u64>,
    at: Stamp,
) -> DetectOutcome {
    let mut out = DetectOutcome::default();
    let attrs = net.attrs(cell).clone();
    let me = net.cells[&cell].clone();
    let mut ues: BTreeMap<u64, BTreeSet<u32>> = BTreeMap::new();
    for r in reports.iter().filter(|r| r.source_db_id == cell) {
        if r.rsrp_dbm >= attrs.cell_rsrp_thr_dbm && r.rsrq_db >= attrs.cell_rsrq_thr_db {
            ues.entry(r.target_db_id).or_default().insert(r.ue);
        }
    }
    for (target, seen) in ues {
        if seen.len() < attrs.ue_min_count as usize
            || exclude.contains(&target)
            || target == cell
            || net.nrts[&cell].contains(target)
            || !net.cells.get(&target).is_some_and(|t| me.same_frequency(t))
        {
            continue;
        }
        match net.insert_relation(cell, target, Actor::Danr, at) {
            Ok(rel) => out.added.push(rel),
            Err(reason) => out.rejected.push((target, reason)),
        }
    }
    out
}

/// Advances idle counters from this run's PM and removes members that have
/// been idle for the removal timer. Whitelisted members stay.
pub fn danr_timer_removal(
    net: &mut Network,
    state: &mut DanrState,
    cell: u64,
    records: &[PmRecord],
    at: Stamp,
) -> Vec<NeighborRelation> {
    let timer = net.attrs(cell).removal_timer_runs;
    let members = net.nrts[&cell].target_ids();
    let counters = state.no_ho_runs.entry(cell).or_default();
    counters.retain(|t, _| members.contains(t));
    for r in records.iter().filter(|r| members.contains(&r.target_db_id)) {
        let c = counters.entry(r.target_db_id).or_default();
        *c = if r.a_ho == 0 { *c + 1 } else { 0 };
    }
    let due: Vec<u64> = counters
        .iter()
        .filter(|&(_, &idle)| idle >= timer)
        .map(|(&t, _)| t)
        .collect();
    let mut removed = Vec::new();
    for target in due {
        match net.remove_relation(cell, target, Actor::Danr, at) {
            Ok(rel) => {
                counters.remove(&target);
                removed.push(rel);
            }
            Err(RemoveError::Protected) | Err(RemoveError::NotFound) => {}
        }
    }
    removed
}

/// Installs the reverse of an inter-BS relation in the peer cell's NRT.
/// Every call counts as an X2 setup attempt. None for intra-BS relations.
pub fn x2_reciprocal_add(
    net: &mut Network,
    rel: &NeighborRelation,
    at: Stamp,
) -> Option<Result<NeighborRelation, RejectReason>> {
    let (src_bs, dst_bs) = (rel.source.bs_id, rel.target.bs_id);
    if src_bs == dst_bs {
        return None;
    }
    net.record_x2_attempt(src_bs, dst_bs);
    let (source, target) = (rel.target_db_id(), rel.source.cell_db_id);
    if net.nrts[&source].contains(target) {
        return Some(Err(RejectReason::DuplicateTarget));
    }
    Some(net.insert_relation(source, target, Actor::X2, at))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DanrPhaseOutcome {
    pub removed: Vec<NeighborRelation>,
    pub added: Vec<NeighborRelation>,
    pub x2_added: Vec<NeighborRelation>,
    pub rejected: Vec<(u64, u64, RejectReason)>,
}

/// One D-ANR pass over every active base station: timer removal, then
/// detection, then reciprocal X2 additions. A target removed from a cell in
/// this pass is not re-added to it in the same pass.
pub fn danr_phase(
    net: &mut Network,
    state: &mut DanrState,
    pm: &BTreeMap<u64, Vec<PmRecord>>,
    reports: &[UeReport],
    at: Stamp,
) -> DanrPhaseOutcome {
    let mut out = DanrPhaseOutcome::default();
    let active: Vec<u64> = net
        .cells
        .values()
        .filter(|c| net.is_danr_active(c.bs_id))
        .map(|c| c.cell_db_id)
        .collect();
    let mut removed_from: BTreeMap<u64, BTreeSet<u64>> = BTreeMap::new();
    for &cell in &active {
        let records = pm.get(&cell).map_or(&[][..], Vec::as_slice);
        for rel in danr_timer_removal(net, state, cell, records, at) {
            removed_from
                .entry(cell)
                .or_default()
                .insert(rel.target_db_id());
            out.removed.push(rel);
        }
    }
    let mut by_source: BTreeMap<u64, Vec<UeReport>> = BTreeMap::new();
    for r in reports {
        by_source.entry(r.source_db_id).or_default().push(*r);
    }
    for &cell in &active {
        let exclude = removed_from.remove(&cell).unwrap_or_default();
        let cell_reports = by_source.get(&cell).map_or(&[][..], Vec::as_slice);
        let detect = danr_detect_and_add(net, cell, cell_reports, &exclude, at);
        out.rejected
            .extend(detect.rejected.into_iter().map(|(t, why)| (cell, t, why)));
        out.added.extend(detect.added);
    }
    for rel in out.added.clone() {
        match x2_reciprocal_add(net, &rel, at) {
            Some(Ok(reverse)) => out.x2_added.push(reverse),
            Some(Err(RejectReason::DuplicateTarget)) | None => {}
            Some(Err(why)) => out
                .rejected
                .push((rel.target_db_id(), rel.source.cell_db_id, why)),
        }
    }
    out
}
