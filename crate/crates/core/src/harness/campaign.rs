//! Campaign execution: bootstrap, per-run simulate/D-ANR/cycle steps,
//! persistence after every run, resume and replay.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use super::io::{self, CycleRow, NrtRow, PmRow, ThresholdRow, TrackingRow, X2AttemptRow};
use super::Scenario;
use crate::danr::{danr_phase, DanrPhaseOutcome, DanrState, UeReport};
use crate::engine::{CycleOutcome, CycleReport, HanrEngine};
use crate::metrics::RunPm;
use crate::model::{TrackingEvent, TrackingRecord};
use crate::netsim::{generate_topology, simulate_run, Topology};
use crate::network::Network;

/// Recorded inputs that stand in for the simulator and D-ANR.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayLog {
    pub pm: BTreeMap<u32, RunPm>,
    /// Tracking events of each run's D-ANR phase, in sequence order.
    pub events: BTreeMap<u32, Vec<TrackingRecord>>,
    pub x2_attempts: BTreeMap<u32, Vec<X2AttemptRow>>,
}

impl ReplayLog {
    /// Reads a PM export plus the tracking and X2 logs stored next to it.
    pub fn load(pm_csv: &Path, scenario: &Scenario) -> Result<ReplayLog> {
        let dir = pm_csv.parent().unwrap_or(Path::new("."));
        let pm = io::pm_by_run(io::read_csv::<PmRow>(pm_csv)?);
        let tracking: Vec<TrackingRow> = io::read_csv(&dir.join("tracking.csv"))?;
        let x2: Vec<X2AttemptRow> = io::read_csv(&dir.join("x2_attempts.csv"))?;
        let mut log = ReplayLog {
            pm,
            ..ReplayLog::default()
        };
        for row in tracking {
            let rec = TrackingRecord::from(row);
            if rec.at == scenario.schedule.danr_stamp(rec.at.run) {
                log.events.entry(rec.at.run).or_default().push(rec);
            }
        }
        for events in log.events.values_mut() {
            events.sort_by_key(|r| r.seq);
        }
        for row in x2 {
            log.x2_attempts.entry(row.run).or_default().push(row);
        }
        Ok(log)
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Mode<'a> {
    Simulate,
    Replay(&'a ReplayLog),
}

/// Everything that happened in one run.
#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub run: u32,
    pub pm: RunPm,
    pub ue_reports: Vec<UeReport>,
    pub danr: DanrPhaseOutcome,
    /// None for the bootstrap run.
    pub cycle: Option<CycleOutcome>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub cycles: Vec<CycleReport>,
    pub thresholds: Vec<ThresholdRow>,
    pub x2_attempts: Vec<X2AttemptRow>,
    /// Bad D-ANR additions per run and BS as (rsrp, rsrq).
    pub bad_counts: BTreeMap<u32, BTreeMap<u32, (u32, u32)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub scenario: Scenario,
    pub topology: Topology,
    pub network: Network,
    pub engine: HanrEngine,
    pub danr: DanrState,
    /// Next run to execute; run 0 bootstraps the NRTs before H-ANR starts.
    pub next_run: u32,
    pub history: History,
}

impl Campaign {
    pub fn new(scenario: &Scenario) -> Result<Campaign> {
        scenario.validate()?;
        let scenario = scenario.resolved();
        let topology = generate_topology(&scenario.topology, scenario.seed)?;
        let mut network = Network::new(
            topology.cell_ids().cloned(),
            scenario.nrt_capacity,
            scenario.danr.clone(),
        );
        for bs in &scenario.danr_inactive {
            network.danr_active.insert(*bs, false);
        }
        network.lists.plmn_blacklist = scenario.plmn_blacklist.iter().cloned().collect();
        let engine = HanrEngine::new(scenario.schedule.clone(), scenario.policy_params());
        Ok(Campaign {
            scenario,
            topology,
            network,
            engine,
            danr: DanrState::default(),
            next_run: 0,
            history: History::default(),
        })
    }

    /// Last run of the campaign.
    pub fn final_run(&self) -> u32 {
        self.scenario.schedule.total_runs()
    }

    pub fn is_complete(&self) -> bool {
        self.next_run > self.final_run()
    }

    pub fn step(&mut self, mode: Mode<'_>) -> Result<RunOutcome> {
        let run = self.next_run;
        let stamp = self.scenario.schedule.danr_stamp(run);
        let attempts_before = self.network.x2_attempts.clone();

        let (pm, ue_reports, danr) = match mode {
            Mode::Simulate => {
                let sim = simulate_run(
                    &self.topology,
                    &self.network.nrts,
                    &self.scenario.radio,
                    &self.scenario.traffic,
                    self.scenario.seed,
                    run,
                );
                let danr = danr_phase(
                    &mut self.network,
                    &mut self.danr,
                    &sim.pm.cells,
                    &sim.ue_reports,
                    stamp,
                );
                (sim.pm, sim.ue_reports, danr)
            }
            Mode::Replay(log) => {
                let pm = log.pm.get(&run).cloned().unwrap_or_else(|| RunPm::new(run));
                let danr = self.apply_recorded(log, run)?;
                (pm, Vec::new(), danr)
            }
        };

        for (&bs, peers) in &self.network.x2_attempts {
            for (&peer, &n) in peers {
                let before = attempts_before
                    .get(&bs)
                    .and_then(|p| p.get(&peer))
                    .copied()
                    .unwrap_or(0);
                if n > before {
                    self.history.x2_attempts.push(X2AttemptRow {
                        run,
                        bs_id: bs,
                        peer_bs_id: peer,
                        attempts: n - before,
                    });
                }
            }
        }

        let cycle = if run >= 1 {
            let out = self
                .engine
                .run_cycle(&mut self.network, &pm)
                .with_context(|| format!("cycle of run {run}"))?;
            self.history.cycles.push(out.report.clone());
            self.history.bad_counts.insert(run, out.bad_counts.clone());
            Some(out)
        } else {
            None
        };

        for bs in self.network.bs_ids() {
            let cell = self.network.cells_of_bs(bs)[0];
            let a = self.network.attrs(cell);
            self.history.thresholds.push(ThresholdRow {
                run,
                bs_id: bs,
                cell_rsrp_thr_dbm: a.cell_rsrp_thr_dbm,
                cell_rsrq_thr_db: a.cell_rsrq_thr_db,
            });
        }
        self.next_run += 1;
        Ok(RunOutcome {
            run,
            pm,
            ue_reports,
            danr,
            cycle,
        })
    }

    fn apply_recorded(&mut self, log: &ReplayLog, run: u32) -> Result<DanrPhaseOutcome> {
        let mut out = DanrPhaseOutcome::default();
        for rec in log.events.get(&run).into_iter().flatten() {
            match rec.event {
                TrackingEvent::Add => {
                    let rel = self
                        .network
                        .insert_with_id(
                            rec.source_db_id,
                            rec.target_db_id,
                            rec.relation_db_id,
                            rec.created_by,
                            rec.at,
                        )
                        .map_err(|why| {
                            anyhow::anyhow!(
                                "replayed addition {}->{} rejected: {}",
                                rec.source_db_id,
                                rec.target_db_id,
                                why.as_str()
                            )
                        })?;
                    out.added.push(rel);
                }
                TrackingEvent::Remove => {
                    let rel = self
                        .network
                        .remove_relation(rec.source_db_id, rec.target_db_id, rec.actor, rec.at)
                        .map_err(|e| {
                            anyhow::anyhow!(
                                "replayed removal {}->{} failed: {e:?}",
                                rec.source_db_id,
                                rec.target_db_id
                            )
                        })?;
                    out.removed.push(rel);
                }
            }
        }
        for row in log.x2_attempts.get(&run).into_iter().flatten() {
            for _ in 0..row.attempts {
                self.network.record_x2_attempt(row.bs_id, row.peer_bs_id);
            }
        }
        Ok(out)
    }

    /// Runs to completion without touching the filesystem.
    pub fn run_all(&mut self, mode: Mode<'_>) -> Result<Vec<RunOutcome>> {
        let mut outcomes = Vec::new();
        while !self.is_complete() {
            outcomes.push(self.step(mode)?);
        }
        Ok(outcomes)
    }
}

/// A campaign bound to an output directory.
pub struct CampaignDir {
    pub root: PathBuf,
}

impl CampaignDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn state_path(&self) -> PathBuf {
        self.root.join("state.json")
    }

    fn per_run(&self, kind: &str, run: u32) -> PathBuf {
        self.root.join(kind).join(format!("run_{run:04}.csv"))
    }

    /// Loads a saved campaign, or None when the directory has none.
    pub fn load(&self) -> Result<Option<Campaign>> {
        let path = self.state_path();
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e).with_context(|| format!("reading {}", path.display())),
        };
        let c =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(Some(c))
    }

    /// Writes the outputs of the run just completed, then the state file.
    /// The state is written last so a crash leaves the previous run's state.
    pub fn persist(&self, campaign: &Campaign, outcome: &RunOutcome) -> Result<()> {
        let run = outcome.run;
        if run == 0 {
            io::write_atomic(
                &self.root.join("resolved.toml"),
                campaign.scenario.to_toml().as_bytes(),
            )?;
        }
        io::write_csv(
            &self.per_run("pm", run),
            &io::pm_rows(&outcome.pm),
            io::PM_HEADER,
        )?;
        io::write_csv(
            &self.per_run("nrt", run),
            &io::nrt_rows(&campaign.network.nrts),
            io::NRT_HEADER,
        )?;
        let actions: Vec<CycleRow> = outcome
            .cycle
            .iter()
            .flat_map(|c| c.report.actions.iter().map(CycleRow::from))
            .collect();
        io::write_csv(&self.per_run("cycles", run), &actions, io::CYCLE_HEADER)?;

        let mut pm_all: Vec<PmRow> = Vec::new();
        for r in 0..=run {
            pm_all.extend(io::read_csv::<PmRow>(&self.per_run("pm", r))?);
        }
        io::write_csv(&self.root.join("pm.csv"), &pm_all, io::PM_HEADER)?;
        let cycles_all: Vec<CycleRow> = campaign
            .history
            .cycles
            .iter()
            .flat_map(|c| c.actions.iter().map(CycleRow::from))
            .collect();
        io::write_csv(&self.root.join("cycles.csv"), &cycles_all, io::CYCLE_HEADER)?;
        io::write_csv(
            &self.root.join("tracking.csv"),
            &io::tracking_rows(&campaign.network.tracking),
            io::TRACKING_HEADER,
        )?;
        io::write_csv(
            &self.root.join("thresholds.csv"),
            &campaign.history.thresholds,
            io::THRESHOLD_HEADER,
        )?;
        io::write_csv(
            &self.root.join("x2_attempts.csv"),
            &campaign.history.x2_attempts,
            io::X2_HEADER,
        )?;

        let state = serde_json::to_vec(campaign)?;
        io::write_atomic(&self.state_path(), &state)
    }

    /// Runs (or resumes) a campaign in this directory, persisting after
    /// every run. `stop_after` ends the session early after that run.
    pub fn run(
        &self,
        scenario: &Scenario,
        mode: Mode<'_>,
        stop_after: Option<u32>,
    ) -> Result<Campaign> {
        let mut campaign = match self.load()? {
            Some(c) => {
                if c.scenario != scenario.resolved() {
                    bail!(
                        "{} holds a campaign for a different scenario",
                        self.root.display()
                    );
                }
                c
            }
            None => Campaign::new(scenario)?,
        };
        while !campaign.is_complete() {
            let outcome = campaign.step(mode)?;
            self.persist(&campaign, &outcome)?;
            if stop_after == Some(outcome.run) {
                break;
            }
        }
        Ok(campaign)
    }

    pub fn read_nrt(&self, run: u32) -> Result<Vec<NrtRow>> {
        io::read_csv(&self.per_run("nrt", run))
    }
}
