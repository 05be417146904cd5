//! Parameter management, list management and NRT optimization stages.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::rank::{cusum_removal_candidates, CusumSplit, RankEntry, RankTable};
use super::report::{ActionKind, CycleReport};
use super::PolicyParams;
use crate::model::{nrt_diff, readditions_by, Actor, NeighborRelation, Nrt, NrtDiff, Stamp};
use crate::network::Network;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterOutcome {
    pub diff: NrtDiff,
    /// Diff entries that had no tracking record and were recorded now.
    pub untracked: usize,
    /// (target, re-addition count) pairs at or above `n_repeat`, counting
    /// only relations brought back by D-ANR or X2.
    pub repetitive_pairs: Vec<(u64, u32)>,
    pub rebuilt: Vec<NeighborRelation>,
}

impl ParameterOutcome {
    pub fn rebuilt_any(&self) -> bool {
        !self.rebuilt.is_empty()
    }
}

/// Cells nearest to `owner` that may be admitted to its NRT, same frequency
/// first when `same_frequency_first` is set.
pub fn nearest_cells(net: &Network, owner: u64, same_frequency_first: bool) -> Vec<u64> {
    let me = &net.cells[&owner];
    let mut cells: Vec<(bool, f64, u64)> = net
        .cells
        .values()
        .filter(|c| c.cell_db_id != owner)
        .filter(|c| !net.lists.is_plmn_blacklisted(&c.plmn))
        .filter(|c| !net.lists.is_nr_blacklisted(owner, c.cell_db_id))
        .map(|c| {
            (
                same_frequency_first && !me.same_frequency(c),
                me.distance_km(c),
                c.cell_db_id,
            )
        })
        .collect();
    cells.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    cells.into_iter().map(|(_, _, id)| id).collect()
}

/// Detects NRT changes since the previous cycle, records any that bypassed
/// the tracked API, lists repetitive pairs and rebuilds an empty NRT.
pub fn stage_parameter_management(
    net: &mut Network,
    cell: u64,
    prev_snapshot: Option<&Nrt>,
    params: &PolicyParams,
    stamp: Stamp,
) -> ParameterOutcome {
    let current = net.nrts[&cell].clone();
    let empty = Nrt::new(current.owner.clone(), current.capacity);
    let before = prev_snapshot.unwrap_or(&empty);
    let diff = nrt_diff(before, &current).expect("snapshots of the same cell");

    let mut untracked = 0;
    for rel in &diff.added {
        if !net.tracking.has_addition(rel.relation_db_id) {
            net.tracking.record_addition(rel, stamp);
            untracked += 1;
        }
    }
    for rel in &diff.removed {
        if !net.tracking.has_removal(rel.relation_db_id) {
            net.tracking.record_removal(rel, stamp, Actor::External);
            untracked += 1;
        }
    }

    let repetitive_pairs = readditions_by(&net.tracking, cell, |a| {
        matches!(a, Actor::Danr | Actor::X2)
    })
    .into_iter()
    .filter(|&(_, count)| count >= params.n_repeat)
    .collect();

    let mut rebuilt = Vec::new();
    if current.is_empty() {
        for target in nearest_cells(net, cell, true)
            .into_iter()
            .take(params.rebuild_k)
        {
            if let Ok(rel) = net.insert_relation(cell, target, Actor::Hanr, stamp) {
                rebuilt.push(rel);
            }
        }
    }

    ParameterOutcome {
        diff,
        untracked,
        repetitive_pairs,
        rebuilt,
    }
}

/// Consecutive-run counters behind whitelist decisions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Streak {
    pub top: u32,
    pub below_median: u32,
}

/// Advances the streak counters of one NRT from its rank table.
pub fn update_streaks(table: &RankTable, streaks: &mut BTreeMap<u64, Streak>, quantile: f64) {
    let n = table.entries.len();
    if n == 0 {
        return;
    }
    let top_count = ((quantile * n as f64).ceil() as usize).clamp(1, n);
    let mut descending = table.ascending();
    descending.reverse();
    let top: BTreeSet<u64> = descending[..top_count]
        .iter()
        .map(|e| e.target_db_id)
        .collect();
    let median = table.median().expect("non-empty");
    for entry in &table.entries {
        let s = streaks.entry(entry.target_db_id).or_default();
        s.top = if top.contains(&entry.target_db_id) {
            s.top + 1
        } else {
            0
        };
        s.below_median = if entry.rank < median {
            s.below_median + 1
        } else {
            0
        };
    }
}

/// Inputs of the list stage for one base station.
pub struct ListContext<'a> {
    pub bs_id: u32,
    /// Repetitive pairs per cell of this base station.
    pub repetitive: &'a BTreeMap<u64, Vec<(u64, u32)>>,
    pub rank_tables: &'a BTreeMap<u64, RankTable>,
    pub streaks: &'a BTreeMap<u64, BTreeMap<u64, Streak>>,
    /// Whether this base station's D-ANR thresholds were ever raised.
    pub attributes_optimized: bool,
    pub params: &'a PolicyParams,
    pub stamp: Stamp,
}

fn rank_of(tables: &BTreeMap<u64, RankTable>, cell: u64, target: u64) -> Option<f64> {
    tables
        .get(&cell)
        .and_then(|t| t.get(target))
        .map(|e| e.rank)
}

/// NR, PLMN and X2 black/whitelisting for one base station.
pub fn stage_list_management(net: &mut Network, ctx: &ListContext<'_>, report: &mut CycleReport) {
    let bs = ctx.bs_id;
    let cells = net.cells_of_bs(bs);
    let m = ctx.params.whitelist_streak;

    for &cell in &cells {
        // Repetitive pairs, once thresholds have been tuned.
        if ctx.attributes_optimized {
            for &(target, count) in ctx.repetitive.get(&cell).into_iter().flatten() {
                if net.lists.is_nr_blacklisted(cell, target) {
                    continue;
                }
                let rank = rank_of(ctx.rank_tables, cell, target);
                net.lists.blacklist_nr(cell, target);
                net.evict_relation(cell, target, Actor::Hanr, ctx.stamp);
                report.push(
                    bs,
                    Some(cell),
                    ActionKind::NrBlacklist,
                    Some(target),
                    format!("readditions={count}"),
                    rank,
                );
            }
        }

        // PLMN blacklist enforcement.
        let blocked: Vec<u64> = net.nrts[&cell]
            .entries
            .iter()
            .filter(|e| net.lists.is_plmn_blacklisted(&e.target.plmn))
            .map(|e| e.target_db_id())
            .collect();
        for target in blocked {
            let rank = rank_of(ctx.rank_tables, cell, target);
            net.evict_relation(cell, target, Actor::Hanr, ctx.stamp);
            let plmn = net.cells[&target].plmn.clone();
            report.push(
                bs,
                Some(cell),
                ActionKind::PlmnBlock,
                Some(target),
                format!("plmn={plmn}"),
                rank,
            );
        }

        // Whitelist grants and revocations.
        let Some(streaks) = ctx.streaks.get(&cell) else {
            continue;
        };
        let members: Vec<(u64, bool)> = net.nrts[&cell]
            .entries
            .iter()
            .map(|e| (e.target_db_id(), e.no_remove))
            .collect();
        for (target, protected) in members {
            let Some(s) = streaks.get(&target) else {
                continue;
            };
            let rank = rank_of(ctx.rank_tables, cell, target);
            if !protected && s.top >= m && net.lists.whitelist_nr(cell, target) {
                net.nrts
                    .get_mut(&cell)
                    .unwrap()
                    .get_mut(target)
                    .unwrap()
                    .no_remove = true;
                report.push(
                    bs,
                    Some(cell),
                    ActionKind::NrWhitelist,
                    Some(target),
                    format!("top_streak={}", s.top),
                    rank,
                );
            } else if protected && s.below_median >= m {
                net.lists.unwhitelist_nr(cell, target);
                net.nrts
                    .get_mut(&cell)
                    .unwrap()
                    .get_mut(target)
                    .unwrap()
                    .no_remove = false;
                report.push(
                    bs,
                    Some(cell),
                    ActionKind::NrWhitelist,
                    Some(target),
                    format!("revoked below_median_streak={}", s.below_median),
                    rank,
                );
            }
        }
    }

    for peer in net.bs_ids() {
        if peer == bs {
            continue;
        }
        if net.lists.is_x2_blacklisted(bs, peer) {
            continue;
        }
        let peer_cells = net.cells_of_bs(peer);
        let foreign = peer_cells
            .iter()
            .any(|c| net.lists.is_plmn_blacklisted(&net.cells[c].plmn));
        if foreign {
            net.lists.blacklist_x2(bs, peer);
            report.push(
                bs,
                None,
                ActionKind::X2Blacklist,
                Some(peer as u64),
                "plmn",
                None,
            );
            continue;
        }
        let peer_set: BTreeSet<u64> = peer_cells.iter().copied().collect();
        let linked = cells.iter().any(|c| {
            net.nrts[c]
                .entries
                .iter()
                .any(|e| peer_set.contains(&e.target_db_id()))
        });
        let attempts = net.x2_attempts_between(bs, peer);
        if !linked && attempts >= ctx.params.x2_attempt_limit {
            net.lists.blacklist_x2(bs, peer);
            report.push(
                bs,
                None,
                ActionKind::X2Blacklist,
                Some(peer as u64),
                format!("no_relations attempts={attempts}"),
                None,
            );
            continue;
        }
        if !net.lists.is_x2_whitelisted(bs, peer)
            && mutually_top_ranked(net, ctx, &cells, &peer_cells)
        {
            net.lists.whitelist_x2(bs, peer);
            report.push(
                bs,
                None,
                ActionKind::X2Whitelist,
                Some(peer as u64),
                "mutual_top",
                None,
            );
        }
    }
}

/// Every relation between the two base stations, in both directions, has
/// been in the top tier of its NRT for the whitelist streak.
fn mutually_top_ranked(net: &Network, ctx: &ListContext<'_>, ours: &[u64], theirs: &[u64]) -> bool {
    let m = ctx.params.whitelist_streak;
    let direction = |from: &[u64], to: &[u64]| -> Option<bool> {
        let to: BTreeSet<u64> = to.iter().copied().collect();
        let mut any = false;
        for c in from {
            for e in net.nrts[c]
                .entries
                .iter()
                .filter(|e| to.contains(&e.target_db_id()))
            {
                any = true;
                let top = ctx
                    .streaks
                    .get(c)
                    .and_then(|s| s.get(&e.target_db_id()))
                    .map_or(0, |s| s.top);
                if top < m {
                    return Some(false);
                }
            }
        }
        any.then_some(true)
    };
    direction(ours, theirs) == Some(true) && direction(theirs, ours) == Some(true)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimizationOutcome {
    pub removed: Vec<RankEntry>,
    pub added: Vec<u64>,
    pub split: Option<CusumSplit>,
}

/// Inputs of the optimization stage for one cell.
pub struct OptimizationContext<'a> {
    pub params: &'a PolicyParams,
    pub run_counter: u32,
    pub window: usize,
    pub stamp: Stamp,
    /// Last known rank of each target ever ranked in this NRT.
    pub history: Option<&'a BTreeMap<u64, f64>>,
}

/// Removes the bottom cluster and fills vacancies from the neighborhood.
pub fn stage_nrt_optimization(
    net: &mut Network,
    cell: u64,
    table: &RankTable,
    removed_at: &mut BTreeMap<u64, u32>,
    ctx: &OptimizationContext<'_>,
    report: &mut CycleReport,
) -> OptimizationOutcome {
    let bs = net.cells[&cell].bs_id;
    let members = net.nrts[&cell].target_ids();
    let current = RankTable {
        cell_db_id: table.cell_db_id,
        entries: table
            .entries
            .iter()
            .filter(|e| members.contains(&e.target_db_id))
            .cloned()
            .collect(),
    };
    let (candidates, split) =
        cusum_removal_candidates(&current, ctx.params, ctx.run_counter, ctx.window);
    let mut removed = Vec::new();
    for entry in candidates {
        if net
            .remove_relation(cell, entry.target_db_id, Actor::Hanr, ctx.stamp)
            .is_ok()
        {
            removed_at.insert(entry.target_db_id, ctx.run_counter);
            let k = split.map_or(0, |s| s.k);
            report.push(
                bs,
                Some(cell),
                ActionKind::NrRemove,
                Some(entry.target_db_id),
                format!("cusum k={k}"),
                Some(entry.rank),
            );
            removed.push(entry);
        }
    }

    let vacancies = net.nrts[&cell].vacancies();
    let mut pool: Vec<u64> = nearest_cells(net, cell, true)
        .into_iter()
        .take(ctx.params.rebuild_k)
        .filter(|t| !net.nrts[&cell].contains(*t))
        .filter(|t| {
            removed_at
                .get(t)
                .is_none_or(|&at| ctx.run_counter.saturating_sub(at) >= ctx.params.cooldown_runs)
        })
        .collect();
    // Known history first (best rank first), then the rest by distance.
    let known = |t: &u64| ctx.history.and_then(|h| h.get(t)).copied();
    pool.sort_by(|a, b| match (known(a), known(b)) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    let mut added = Vec::new();
    for target in pool.into_iter().take(vacancies) {
        if net
            .insert_relation(cell, target, Actor::Hanr, ctx.stamp)
            .is_ok()
        {
            let rank = known(&target);
            report.push(
                bs,
                Some(cell),
                ActionKind::NrAdd,
                Some(target),
                "vacancy",
                rank,
            );
            added.push(target);
        }
    }

    OptimizationOutcome {
        removed,
        added,
        split,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{DanrAttributes, RankComponents};
    use crate::model::{CellId, Rat};

    fn cell(id: u64, bs: u32, x: f64, freq: u32, plmn: &str) -> CellId {
        CellId {
            bs_id: bs,
            cell_db_id: id,
            plmn: plmn.into(),
            rat: Rat::Eutran,
            freq_layer: freq,
            position: (x, 0.0),
        }
    }

    fn at(run: u32) -> Stamp {
        Stamp {
            run,
            time_s: run as u64 * 900,
        }
    }

    /// Owner 101 at the origin and 20 single-cell sites at 1..=20 km. Site
    /// 21 at 0.5 km runs on another frequency.
    fn line_network(capacity: usize) -> Network {
        let mut cells = vec![cell(101, 1, 0.0, 0, "001-01")];
        for k in 1..=20u32 {
            cells.push(cell(100 * (k as u64 + 1) + 1, k + 1, k as f64, 0, "001-01"));
        }
        cells.push(cell(2201, 22, 0.5, 1, "001-01"));
        Network::new(cells, capacity, DanrAttributes::default())
    }

    fn entry(target: u64, rank: f64, created_run: u32) -> RankEntry {
        RankEntry {
            target_db_id: target,
            components: RankComponents::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
            rank,
            no_remove: false,
            created_run,
        }
    }

    #[test]
    fn empty_nrt_rebuilt_with_nearest_same_frequency() {
        let mut net = line_network(32);
        let params = PolicyParams::for_window(10);
        let out = stage_parameter_management(&mut net, 101, None, &params, at(1));
        let got: Vec<u64> = out.rebuilt.iter().map(|r| r.target_db_id()).collect();
        let want: Vec<u64> = (1..=16u64).map(|k| 100 * (k + 1) + 1).collect();
        assert_eq!(got, want);
        assert!(out.rebuilt.iter().all(|r| r.created_by == Actor::Hanr));
        assert_eq!(net.nrts[&101].len(), 16);
    }

    #[test]
    fn rebuild_skips_blacklisted() {
        let mut net = line_network(32);
        net.lists.blacklist_nr(101, 201);
        net.lists.plmn_blacklist.insert("999-99".into());
        net.cells.get_mut(&301).unwrap().plmn = "999-99".into();
        let got = nearest_cells(&net, 101, true);
        assert_eq!(&got[..2], &[401, 501]);
        assert_eq!(*got.last().unwrap(), 2201);
    }

    #[test]
    fn repetitive_pairs_count_only_danr_and_x2() {
        let mut net = line_network(32);
        let params = PolicyParams {
            n_repeat: 2,
            ..PolicyParams::for_window(10)
        };
        for run in 0..3 {
            net.insert_relation(101, 201, Actor::Danr, at(run * 2))
                .unwrap();
            net.insert_relation(101, 301, Actor::Hanr, at(run * 2))
                .unwrap();
            if run < 2 {
                net.remove_relation(101, 201, Actor::Hanr, at(run * 2 + 1))
                    .unwrap();
                net.remove_relation(101, 301, Actor::Danr, at(run * 2 + 1))
                    .unwrap();
            }
        }
        let snap = net.nrts[&101].clone();
        let out = stage_parameter_management(&mut net, 101, Some(&snap), &params, at(6));
        assert_eq!(out.repetitive_pairs, vec![(201, 2)]);
        assert!(out.diff.is_empty());
        assert!(!out.rebuilt_any());
    }

    #[test]
    fn untracked_changes_are_recorded() {
        let mut net = line_network(32);
        let snap = net.nrts[&101].clone();
        let rel = NeighborRelation::new(
            999,
            net.cells[&101].clone(),
            net.cells[&201].clone(),
            Actor::Danr,
            at(1),
        );
        net.nrts.get_mut(&101).unwrap().entries.push(rel);
        let out = stage_parameter_management(
            &mut net,
            101,
            Some(&snap),
            &PolicyParams::for_window(10),
            at(2),
        );
        assert_eq!(out.untracked, 1);
        assert!(net.tracking.has_addition(999));
    }

    fn optimize(
        net: &mut Network,
        table: &RankTable,
        removed_at: &mut BTreeMap<u64, u32>,
        run: u32,
        history: Option<&BTreeMap<u64, f64>>,
    ) -> (OptimizationOutcome, CycleReport) {
        let params = PolicyParams::for_window(10);
        let ctx = OptimizationContext {
            params: &params,
            run_counter: run,
            window: 10,
            stamp: at(run),
            history,
        };
        let mut report = CycleReport::new(run);
        let out = stage_nrt_optimization(net, 101, table, removed_at, &ctx, &mut report);
        (out, report)
    }

    /// Owner holds targets at 1..=n km; 2 low and n-2 high ranks, all old.
    fn bimodal(net: &mut Network, n: u64) -> RankTable {
        bimodal_from(net, n, 0)
    }

    fn bimodal_from(net: &mut Network, n: u64, created: u32) -> RankTable {
        let mut entries = Vec::new();
        for k in 1..=n {
            let t = 100 * (k + 1) + 1;
            net.insert_relation(101, t, Actor::Danr, at(created))
                .unwrap();
            let rank = if k > n - 2 {
                0.2
            } else {
                2.5 + 0.01 * k as f64
            };
            entries.push(entry(t, rank, created));
        }
        RankTable {
            cell_db_id: 101,
            entries,
        }
    }

    #[test]
    fn removal_then_vacancy_fill_nearest() {
        let mut net = line_network(8);
        let table = bimodal(&mut net, 8);
        let mut removed_at = BTreeMap::new();
        let (out, report) = optimize(&mut net, &table, &mut removed_at, 12, None);
        let removed: Vec<u64> = out.removed.iter().map(|e| e.target_db_id).collect();
        assert_eq!(removed, vec![801, 901]);
        assert_eq!(removed_at, BTreeMap::from([(801, 12), (901, 12)]));
        // The two freed slots go to the nearest non-members outside cooldown.
        assert_eq!(out.added, vec![1001, 1101]);
        assert_eq!(report.of_kind(ActionKind::NrRemove).count(), 2);
        assert_eq!(report.of_kind(ActionKind::NrAdd).count(), 2);
        assert_eq!(net.nrts[&101].len(), 8);
    }

    #[test]
    fn cooldown_blocks_recent_removals() {
        let mut net = line_network(8);
        let table = bimodal(&mut net, 6);
        // 701 was removed one run ago and would otherwise be first in line.
        let mut removed_at = BTreeMap::from([(701, 11)]);
        let (out, _) = optimize(&mut net, &table, &mut removed_at, 12, None);
        assert!(!out.added.contains(&701));
        assert!(out.added.contains(&801));
    }

    #[test]
    fn known_history_fills_first() {
        let mut net = line_network(4);
        for t in [201, 301] {
            net.insert_relation(101, t, Actor::Danr, at(0)).unwrap();
        }
        let table = RankTable {
            cell_db_id: 101,
            entries: vec![entry(201, 2.0, 0), entry(301, 2.0, 0)],
        };
        let history = BTreeMap::from([(1501, 1.0), (1601, 3.0)]);
        let (out, _) = optimize(&mut net, &table, &mut BTreeMap::new(), 12, Some(&history));
        assert!(out.removed.is_empty());
        assert_eq!(out.added, vec![1601, 1501]);
    }

    #[test]
    fn young_relations_survive() {
        let mut net = line_network(8);
        let table = bimodal_from(&mut net, 8, 3);
        let (out, _) = optimize(&mut net, &table, &mut BTreeMap::new(), 12, None);
        assert!(out.removed.is_empty());
        assert_eq!(out.split.map(|s| (s.k, s.significant)), Some((2, true)));
        let (out, _) = optimize(&mut net, &table, &mut BTreeMap::new(), 13, None);
        assert_eq!(out.removed.len(), 2);
    }

    fn table_of(ranks: &[(u64, f64)]) -> RankTable {
        RankTable {
            cell_db_id: 101,
            entries: ranks.iter().map(|&(t, r)| entry(t, r, 0)).collect(),
        }
    }

    #[test]
    fn streaks_track_top_and_below_median() {
        let table = table_of(&[(201, 3.0), (301, 2.0), (401, 1.0), (501, 0.5), (601, 0.1)]);
        let mut streaks = BTreeMap::new();
        for _ in 0..3 {
            update_streaks(&table, &mut streaks, 0.2);
        }
        assert_eq!(
            streaks[&201],
            Streak {
                top: 3,
                below_median: 0
            }
        );
        assert_eq!(
            streaks[&401],
            Streak {
                top: 0,
                below_median: 0
            }
        );
        assert_eq!(
            streaks[&601],
            Streak {
                top: 0,
                below_median: 3
            }
        );
        let flipped = table_of(&[(201, 0.0), (301, 2.0), (401, 1.0), (501, 0.5), (601, 3.0)]);
        update_streaks(&flipped, &mut streaks, 0.2);
        assert_eq!(
            streaks[&201],
            Streak {
                top: 0,
                below_median: 1
            }
        );
        assert_eq!(
            streaks[&601],
            Streak {
                top: 1,
                below_median: 0
            }
        );
    }

    fn list_stage(
        net: &mut Network,
        bs: u32,
        repetitive: &BTreeMap<u64, Vec<(u64, u32)>>,
        streaks: &BTreeMap<u64, BTreeMap<u64, Streak>>,
        optimized: bool,
        params: &PolicyParams,
    ) -> CycleReport {
        let tables = BTreeMap::new();
        let ctx = ListContext {
            bs_id: bs,
            repetitive,
            rank_tables: &tables,
            streaks,
            attributes_optimized: optimized,
            params,
            stamp: at(10),
        };
        let mut report = CycleReport::new(10);
        stage_list_management(net, &ctx, &mut report);
        report
    }

    #[test]
    fn whitelist_granted_after_streak_and_revoked() {
        let mut net = line_network(8);
        net.insert_relation(101, 201, Actor::Danr, at(0)).unwrap();
        let params = PolicyParams::for_window(3);
        let none = BTreeMap::new();
        let mut streaks = BTreeMap::from([(
            101,
            BTreeMap::from([(
                201,
                Streak {
                    top: 2,
                    below_median: 0,
                },
            )]),
        )]);
        let r = list_stage(&mut net, 1, &none, &streaks, false, &params);
        assert_eq!(r.of_kind(ActionKind::NrWhitelist).count(), 0);

        streaks.get_mut(&101).unwrap().get_mut(&201).unwrap().top = 3;
        let r = list_stage(&mut net, 1, &none, &streaks, false, &params);
        assert_eq!(r.of_kind(ActionKind::NrWhitelist).count(), 1);
        assert!(net.nrts[&101].get(201).unwrap().no_remove);
        assert!(net.lists.is_nr_whitelisted(101, 201));

        streaks.get_mut(&101).unwrap().insert(
            201,
            Streak {
                top: 0,
                below_median: 3,
            },
        );
        let r = list_stage(&mut net, 1, &none, &streaks, false, &params);
        let a = r.of_kind(ActionKind::NrWhitelist).next().unwrap();
        assert!(a.reason.starts_with("revoked"));
        assert!(!net.nrts[&101].get(201).unwrap().no_remove);
    }

    #[test]
    fn repetitive_pair_blacklisted_only_once_optimized() {
        let mut net = line_network(8);
        net.insert_relation(101, 201, Actor::Danr, at(0)).unwrap();
        let params = PolicyParams::for_window(10);
        let rep = BTreeMap::from([(101, vec![(201, 3)])]);
        let r = list_stage(&mut net, 1, &rep, &BTreeMap::new(), false, &params);
        assert_eq!(r.of_kind(ActionKind::NrBlacklist).count(), 0);
        assert!(net.nrts[&101].contains(201));

        let r = list_stage(&mut net, 1, &rep, &BTreeMap::new(), true, &params);
        assert_eq!(r.of_kind(ActionKind::NrBlacklist).count(), 1);
        assert!(!net.nrts[&101].contains(201));
        assert!(net.insert_relation(101, 201, Actor::Danr, at(11)).is_err());
    }

    #[test]
    fn foreign_plmn_blocks_relations_and_x2() {
        let mut net = line_network(8);
        net.cells.get_mut(&201).unwrap().plmn = "999-99".into();
        net.nrts
            .get_mut(&101)
            .unwrap()
            .entries
            .push(NeighborRelation::new(
                500,
                net.cells[&101].clone(),
                net.cells[&201].clone(),
                Actor::X2,
                at(0),
            ));
        net.lists.plmn_blacklist.insert("999-99".into());
        net.lists.whitelist_x2(1, 2);
        let params = PolicyParams::for_window(10);
        let none = BTreeMap::new();
        let r = list_stage(&mut net, 1, &none, &BTreeMap::new(), false, &params);
        assert_eq!(r.of_kind(ActionKind::PlmnBlock).count(), 1);
        assert!(!net.nrts[&101].contains(201));
        let x2: Vec<_> = r.of_kind(ActionKind::X2Blacklist).collect();
        assert_eq!(x2.len(), 1);
        assert_eq!(
            (x2[0].target_db_id, x2[0].reason.as_str()),
            (Some(2), "plmn")
        );
        // Blacklisting wins over the earlier whitelist.
        assert!(net.lists.is_x2_blacklisted(1, 2));
        assert!(!net.lists.is_x2_whitelisted(1, 2));
    }

    #[test]
    fn idle_peer_blacklisted_after_attempt_limit() {
        let mut net = line_network(8);
        let params = PolicyParams::for_window(10);
        let none = BTreeMap::new();
        for _ in 0..2 {
            net.record_x2_attempt(1, 3);
        }
        let r = list_stage(&mut net, 1, &none, &BTreeMap::new(), false, &params);
        assert_eq!(r.of_kind(ActionKind::X2Blacklist).count(), 0);
        net.record_x2_attempt(1, 3);
        let r = list_stage(&mut net, 1, &none, &BTreeMap::new(), false, &params);
        let a: Vec<_> = r.of_kind(ActionKind::X2Blacklist).collect();
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].target_db_id, Some(3));
    }

    #[test]
    fn mutual_top_relations_whitelist_x2() {
        let mut net = line_network(8);
        net.insert_relation(101, 201, Actor::Danr, at(0)).unwrap();
        net.insert_relation(201, 101, Actor::X2, at(0)).unwrap();
        let params = PolicyParams::for_window(2);
        let top = Streak {
            top: 2,
            below_median: 0,
        };
        let streaks = BTreeMap::from([
            (101, BTreeMap::from([(201, top)])),
            (201, BTreeMap::from([(101, top)])),
        ]);
        let none = BTreeMap::new();
        let r = list_stage(&mut net, 1, &none, &streaks, false, &params);
        let a: Vec<_> = r.of_kind(ActionKind::X2Whitelist).collect();
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].target_db_id, Some(2));
    }
}
