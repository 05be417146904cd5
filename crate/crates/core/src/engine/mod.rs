//! The H-ANR cycle: parameter management, D-ANR attribute management, list
//! management and NRT optimization, run once per PM window.

mod attributes;
mod params;
mod rank;
mod report;
mod stages;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use attributes::{
    count_bad_additions, is_bad_addition, stage_danr_attribute_management, BadAdditions,
    DanrAttributes,
};
pub use params::{EngineSchedule, PolicyParams};
pub use rank::{
    cusum_removal_candidates, cusum_split, rank_relation, CusumSplit, RankComponents, RankEntry,
    RankError, RankTable,
};
pub use report::{ActionKind, CycleAction, CycleReport};
pub use stages::{
    nearest_cells, stage_list_management, stage_nrt_optimization, stage_parameter_management,
    update_streaks, ListContext, OptimizationContext, OptimizationOutcome, ParameterOutcome,
    Streak,
};

use crate::metrics::{run_metrics, Geometry, Metric, MetricWindow, RunPm, SignalMetric};
use crate::model::{Actor, Nrt};
use crate::network::Network;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("expected PM for run {expected}, got run {got}")]
    RunMismatch { expected: u32, got: u32 },
    #[error("ranking cell {cell}")]
    Rank {
        cell: u64,
        #[source]
        source: RankError,
    },
}

/// Everything the engine remembers between cycles.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HanrState {
    /// Cycles completed so far.
    pub run_counter: u32,
    pub windows: BTreeMap<u64, MetricWindow>,
    /// NRTs at the end of the previous cycle.
    pub prev_snapshots: BTreeMap<u64, Nrt>,
    pub bad_rsrp: BTreeMap<u32, BadAdditions>,
    pub bad_rsrq: BTreeMap<u32, BadAdditions>,
    /// D-ANR relations already judged by attribute management.
    pub evaluated: BTreeSet<u64>,
    pub streaks: BTreeMap<u64, BTreeMap<u64, Streak>>,
    /// Run counter at which each target last left each cell's NRT.
    pub removed_at: BTreeMap<u64, BTreeMap<u64, u32>>,
    /// Last computed rank of each target, per cell. Kept after removal.
    pub last_rank: BTreeMap<u64, BTreeMap<u64, f64>>,
}

impl HanrState {
    pub fn increments(&self, bs_id: u32) -> u32 {
        let rsrp = self.bad_rsrp.get(&bs_id).map_or(0, |b| b.increments);
        let rsrq = self.bad_rsrq.get(&bs_id).map_or(0, |b| b.increments);
        rsrp + rsrq
    }
}

/// Result of one cycle, with the intermediate tables kept for inspection.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CycleOutcome {
    pub report: CycleReport,
    pub rank_tables: BTreeMap<u64, RankTable>,
    pub splits: BTreeMap<u64, CusumSplit>,
    /// Bad D-ANR additions per BS as (rsrp, rsrq) counts.
    pub bad_counts: BTreeMap<u32, (u32, u32)>,
    pub skipped: BTreeSet<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HanrEngine {
    pub schedule: EngineSchedule,
    pub params: PolicyParams,
    pub state: HanrState,
}

impl HanrEngine {
    pub fn new(schedule: EngineSchedule, params: PolicyParams) -> Self {
        Self {
            schedule,
            params,
            state: HanrState::default(),
        }
    }

    /// Next run the engine expects PM for.
    pub fn next_run(&self) -> u32 {
        self.state.run_counter + 1
    }

    pub fn run_cycle(
        &mut self,
        net: &mut Network,
        pm: &RunPm,
    ) -> Result<CycleOutcome, EngineError> {
        let run = self.next_run();
        if pm.run != run {
            return Err(EngineError::RunMismatch {
                expected: run,
                got: pm.run,
            });
        }
        let stamp = self.schedule.cycle_stamp(run);
        let mut out = CycleOutcome {
            report: CycleReport::new(run),
            ..CycleOutcome::default()
        };
        let cell_ids: Vec<u64> = net.cells.keys().copied().collect();

        // Cells whose PM does not cover their NRT are left alone this cycle.
        // Relations created during this run were not in place when it was
        // measured.
        for &cell in &cell_ids {
            let nrt = &net.nrts[&cell];
            let rows = pm.cells.get(&cell);
            let covered = |t: u64| rows.is_some_and(|r| r.iter().any(|p| p.target_db_id == t));
            let missing = nrt
                .entries
                .iter()
                .filter(|e| e.created_at.run < run)
                .map(|e| e.target_db_id())
                .find(|&t| !covered(t));
            if let Some(missing) = missing {
                out.skipped.insert(cell);
                let bs = net.cells[&cell].bs_id;
                out.report.push(
                    bs,
                    Some(cell),
                    ActionKind::CellSkipped,
                    Some(missing),
                    "missing_pm",
                    None,
                );
            }
        }

        self.ingest(net, pm, &out.skipped);

        // Stage 1.
        let mut repetitive: BTreeMap<u64, Vec<(u64, u32)>> = BTreeMap::new();
        for &cell in &cell_ids {
            let prev = self.state.prev_snapshots.get(&cell);
            let outcome = stage_parameter_management(net, cell, prev, &self.params, stamp);
            let bs = net.cells[&cell].bs_id;
            for rel in &outcome.rebuilt {
                out.report.push(
                    bs,
                    Some(cell),
                    ActionKind::Rebuild,
                    Some(rel.target_db_id()),
                    "empty_nrt",
                    None,
                );
            }
            // Removals by anyone start the re-add cooldown.
            let removed_at = self.state.removed_at.entry(cell).or_default();
            for rel in &outcome.diff.removed {
                removed_at.insert(rel.target_db_id(), run);
            }
            if !outcome.repetitive_pairs.is_empty() {
                repetitive.insert(cell, outcome.repetitive_pairs);
            }
        }

        // Stage 2.
        for bs in net.bs_ids() {
            if !net.is_danr_active(bs) {
                continue;
            }
            let cells = net.cells_of_bs(bs);
            let fresh: Vec<(u64, u64)> = cells
                .iter()
                .filter(|c| !out.skipped.contains(c))
                .flat_map(|&c| {
                    let window = self.state.windows.get(&c);
                    net.nrts[&c]
                        .entries
                        .iter()
                        .filter(|e| e.created_by == Actor::Danr)
                        .filter(|e| !self.state.evaluated.contains(&e.relation_db_id))
                        .filter(move |e| window.is_some_and(|w| w.stored(e.target_db_id()) > 0))
                        .map(move |e| (c, e.target_db_id()))
                })
                .collect();
            let empty = MetricWindow::new(self.schedule.window);
            let batch: Vec<_> = fresh
                .iter()
                .map(|(c, t)| {
                    (
                        net.nrts[c].get(*t).expect("member"),
                        self.state.windows.get(c).unwrap_or(&empty),
                        net.attrs(*c),
                    )
                })
                .collect();
            let bad_rsrp = count_bad_additions(batch.iter().copied(), SignalMetric::Rsrp);
            let bad_rsrq = count_bad_additions(batch.iter().copied(), SignalMetric::Rsrq);
            for (rel, _, _) in &batch {
                self.state.evaluated.insert(rel.relation_db_id);
            }
            out.bad_counts.insert(bs, (bad_rsrp, bad_rsrq));

            for (metric, bad, kind) in [
                (SignalMetric::Rsrp, bad_rsrp, ActionKind::ThrRsrpUp),
                (SignalMetric::Rsrq, bad_rsrq, ActionKind::ThrRsrqUp),
            ] {
                let history = match metric {
                    SignalMetric::Rsrp => self.state.bad_rsrp.entry(bs).or_default(),
                    SignalMetric::Rsrq => self.state.bad_rsrq.entry(bs).or_default(),
                };
                let attrs = net
                    .danr_attrs
                    .iter_mut()
                    .filter(|(id, _)| cells.contains(id))
                    .map(|(_, a)| a);
                if stage_danr_attribute_management(attrs, history, run, bad, metric) {
                    let thr = net.attrs(cells[0]).threshold(metric);
                    out.report
                        .push(bs, None, kind, None, format!("bad={bad} thr={thr}"), None);
                }
            }
        }

        // Ranking.
        for &cell in &cell_ids {
            if out.skipped.contains(&cell) {
                continue;
            }
            let table = self.rank_table(net, cell)?;
            if table.entries.is_empty() {
                continue;
            }
            let streaks = self.state.streaks.entry(cell).or_default();
            update_streaks(&table, streaks, self.params.whitelist_quantile);
            let history = self.state.last_rank.entry(cell).or_default();
            for e in &table.entries {
                history.insert(e.target_db_id, e.rank);
            }
            out.rank_tables.insert(cell, table);
        }

        // Stage 3.
        for bs in net.bs_ids() {
            let bs_cells: BTreeSet<u64> = net
                .cells_of_bs(bs)
                .into_iter()
                .filter(|c| !out.skipped.contains(c))
                .collect();
            let bs_repetitive: BTreeMap<u64, Vec<(u64, u32)>> = repetitive
                .iter()
                .filter(|(c, _)| bs_cells.contains(c))
                .map(|(c, v)| (*c, v.clone()))
                .collect();
            let ctx = ListContext {
                bs_id: bs,
                repetitive: &bs_repetitive,
                rank_tables: &out.rank_tables,
                streaks: &self.state.streaks,
                attributes_optimized: self.state.increments(bs) > 0,
                params: &self.params,
                stamp,
            };
            stage_list_management(net, &ctx, &mut out.report);
        }

        // Stage 4.
        for &cell in &cell_ids {
            if out.skipped.contains(&cell) {
                continue;
            }
            let table = out.rank_tables.get(&cell).cloned().unwrap_or(RankTable {
                cell_db_id: cell,
                entries: Vec::new(),
            });
            let ctx = OptimizationContext {
                params: &self.params,
                run_counter: run,
                window: self.schedule.window,
                stamp,
                history: self.state.last_rank.get(&cell),
            };
            let removed_at = self.state.removed_at.entry(cell).or_default();
            let outcome =
                stage_nrt_optimization(net, cell, &table, removed_at, &ctx, &mut out.report);
            if let Some(split) = outcome.split {
                out.splits.insert(cell, split);
            }
        }

        // Bookkeeping for the next cycle.
        for &cell in &cell_ids {
            let nrt = net.nrts[&cell].clone();
            let members = nrt.target_ids();
            if let Some(s) = self.state.streaks.get_mut(&cell) {
                s.retain(|t, _| members.contains(t));
            }
            self.state.prev_snapshots.insert(cell, nrt);
        }
        let live: BTreeSet<u64> = net
            .nrts
            .values()
            .flat_map(|n| n.entries.iter().map(|e| e.relation_db_id))
            .collect();
        self.state.evaluated.retain(|id| live.contains(id));
        self.state.run_counter = run;
        Ok(out)
    }

    /// Feeds this run's PM into the windows. A series survives only while
    /// the same relation stays in the NRT, so a re-added target starts over.
    fn ingest(&mut self, net: &Network, pm: &RunPm, skipped: &BTreeSet<u64>) {
        for (&cell, nrt) in &net.nrts {
            let window = self
                .state
                .windows
                .entry(cell)
                .or_insert_with(|| MetricWindow::new(self.schedule.window));
            let prev = self.state.prev_snapshots.get(&cell);
            let keep: BTreeSet<u64> = nrt
                .entries
                .iter()
                .filter(|e| {
                    prev.and_then(|p| p.get(e.target_db_id()))
                        .is_some_and(|p| p.relation_db_id == e.relation_db_id)
                })
                .map(|e| e.target_db_id())
                .collect();
            window.retain(&keep);
            if skipped.contains(&cell) {
                continue;
            }
            if let Some(records) = pm.cells.get(&cell) {
                for (target, metrics) in run_metrics(records) {
                    if nrt.contains(target) {
                        window.push(target, metrics);
                    }
                }
            }
        }
    }

    fn rank_table(&self, net: &Network, cell: u64) -> Result<RankTable, EngineError> {
        let nrt = &net.nrts[&cell];
        let geometry = Geometry::from_nrt(nrt);
        let mut entries = Vec::new();
        let Some(window) = self.state.windows.get(&cell) else {
            return Ok(RankTable {
                cell_db_id: cell,
                entries,
            });
        };
        for e in &nrt.entries {
            let t = e.target_db_id();
            if window.stored(t) == 0 {
                continue;
            }
            let avg = |m: Metric| window.average(t, m).expect("stored > 0");
            let components = RankComponents::new(
                avg(Metric::NsHo),
                avg(Metric::RsHo),
                avg(Metric::PsHo),
                avg(Metric::Nrsrp),
                avg(Metric::Nrsrq),
                geometry.normalized_distance(t),
            );
            let rank =
                rank_relation(&components).map_err(|source| EngineError::Rank { cell, source })?;
            entries.push(RankEntry {
                target_db_id: t,
                components,
                rank,
                no_remove: e.no_remove,
                created_run: e.created_at.run,
            });
        }
        Ok(RankTable {
            cell_db_id: cell,
            entries,
        })
    }
}
