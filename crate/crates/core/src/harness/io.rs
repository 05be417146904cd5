//! CSV row types and readers/writers for campaign outputs.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::engine::{ActionKind, CycleAction};
use crate::metrics::{PmRecord, RunPm};
use crate::model::{Actor, Nrt, RelType, Stamp, TrackingEvent, TrackingRecord, TrackingTables};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmRow {
    pub run: u32,
    pub source_db_id: u64,
    pub target_db_id: u64,
    pub s_ho: u32,
    pub a_ho: u32,
    pub sp_ho: u32,
    pub ap_ho: u32,
    pub mean_rsrp_dbm: f64,
    pub rsrq_mean_db: f64,
    pub n_samples: u32,
}

impl From<&PmRecord> for PmRow {
    fn from(r: &PmRecord) -> Self {
        Self {
            run: r.run,
            source_db_id: r.source_db_id,
            target_db_id: r.target_db_id,
            s_ho: r.s_ho,
            a_ho: r.a_ho,
            sp_ho: r.sp_ho,
            ap_ho: r.ap_ho,
            mean_rsrp_dbm: r.mean_rsrp_dbm,
            rsrq_mean_db: r.mean_rsrq_db,
            n_samples: r.n_samples,
        }
    }
}

impl From<PmRow> for PmRecord {
    fn from(r: PmRow) -> Self {
        PmRecord {
            run: r.run,
            source_db_id: r.source_db_id,
            target_db_id: r.target_db_id,
            s_ho: r.s_ho,
            a_ho: r.a_ho,
            sp_ho: r.sp_ho,
            ap_ho: r.ap_ho,
            mean_rsrp_dbm: r.mean_rsrp_dbm,
            mean_rsrq_db: r.rsrq_mean_db,
            n_samples: r.n_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NrtRow {
    pub source_db_id: u64,
    pub target_db_id: u64,
    pub relation_db_id: u64,
    #[serde(rename = "type")]
    pub rel_type: RelType,
    pub created_by: Actor,
    pub created_at_run: u32,
    pub ho_allowed: bool,
    pub no_remove: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingRow {
    pub seq: u64,
    pub event: TrackingEvent,
    pub source_db_id: u64,
    pub target_db_id: u64,
    pub relation_db_id: u64,
    #[serde(rename = "type")]
    pub rel_type: RelType,
    pub created_by: Actor,
    pub created_at_run: u32,
    pub created_at_s: u64,
    pub at_run: u32,
    pub at_s: u64,
    pub actor: Actor,
}

impl From<&TrackingRecord> for TrackingRow {
    fn from(r: &TrackingRecord) -> Self {
        Self {
            seq: r.seq,
            event: r.event,
            source_db_id: r.source_db_id,
            target_db_id: r.target_db_id,
            relation_db_id: r.relation_db_id,
            rel_type: r.rel_type,
            created_by: r.created_by,
            created_at_run: r.created_at.run,
            created_at_s: r.created_at.time_s,
            at_run: r.at.run,
            at_s: r.at.time_s,
            actor: r.actor,
        }
    }
}

impl From<TrackingRow> for TrackingRecord {
    fn from(r: TrackingRow) -> Self {
        TrackingRecord {
            seq: r.seq,
            event: r.event,
            source_db_id: r.source_db_id,
            target_db_id: r.target_db_id,
            relation_db_id: r.relation_db_id,
            rel_type: r.rel_type,
            created_by: r.created_by,
            created_at: Stamp {
                run: r.created_at_run,
                time_s: r.created_at_s,
            },
            at: Stamp {
                run: r.at_run,
                time_s: r.at_s,
            },
            actor: r.actor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRow {
    pub run: u32,
    pub bs_id: u32,
    pub cell_db_id: Option<u64>,
    pub action: String,
    pub target_db_id: Option<u64>,
    pub reason: String,
    pub rank_at_action: Option<f64>,
}

impl From<&CycleAction> for CycleRow {
    fn from(a: &CycleAction) -> Self {
        Self {
            run: a.run,
            bs_id: a.bs_id,
            cell_db_id: a.cell_db_id,
            action: a.action.as_str().to_string(),
            target_db_id: a.target_db_id,
            reason: a.reason.clone(),
            rank_at_action: a.rank_at_action,
        }
    }
}

impl TryFrom<CycleRow> for CycleAction {
    type Error = anyhow::Error;

    fn try_from(r: CycleRow) -> Result<Self> {
        Ok(CycleAction {
            run: r.run,
            bs_id: r.bs_id,
            cell_db_id: r.cell_db_id,
            action: r.action.parse::<ActionKind>()?,
            target_db_id: r.target_db_id,
            reason: r.reason,
            rank_at_action: r.rank_at_action,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub run: u32,
    pub bs_id: u32,
    pub cell_rsrp_thr_dbm: f64,
    pub cell_rsrq_thr_db: f64,
}

/// X2 setup attempts made during one run's D-ANR phase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct X2AttemptRow {
    pub run: u32,
    pub bs_id: u32,
    pub peer_bs_id: u32,
    pub attempts: u32,
}

pub fn nrt_rows(nrts: &BTreeMap<u64, Nrt>) -> Vec<NrtRow> {
    nrts.values()
        .flat_map(|nrt| {
            nrt.entries.iter().map(|e| NrtRow {
                source_db_id: e.source.cell_db_id,
                target_db_id: e.target_db_id(),
                relation_db_id: e.relation_db_id,
                rel_type: e.rel_type,
                created_by: e.created_by,
                created_at_run: e.created_at.run,
                ho_allowed: e.ho_allowed,
                no_remove: e.no_remove,
            })
        })
        .collect()
}

pub fn pm_rows(pm: &RunPm) -> Vec<PmRow> {
    pm.records().map(PmRow::from).collect()
}

pub fn tracking_rows(tracking: &TrackingTables) -> Vec<TrackingRow> {
    tracking
        .events()
        .into_iter()
        .map(TrackingRow::from)
        .collect()
}

/// Groups PM rows by run and source cell.
pub fn pm_by_run(rows: Vec<PmRow>) -> BTreeMap<u32, RunPm> {
    let mut out: BTreeMap<u32, RunPm> = BTreeMap::new();
    for row in rows {
        let run = row.run;
        let pm = out.entry(run).or_insert_with(|| RunPm::new(run));
        pm.cells
            .entry(row.source_db_id)
            .or_default()
            .push(PmRecord::from(row));
    }
    out
}

/// Serializes rows with a header line, even when there are no rows.
pub fn to_csv<T: Serialize>(rows: &[T], header: &[&str]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    write_atomic(path, &to_csv(rows, header)?)
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, row) in r.deserialize().enumerate() {
        rows.push(row.with_context(|| format!("{} row {}", path.display(), i + 1))?);
    }
    Ok(rows)
}

/// Writes through a temporary file and renames, so a crash never leaves a
/// half-written file in place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let tmp = path.with_extension("tmp");
    let mut f = File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    f.write_all(bytes)?;
    f.sync_all()?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

pub const PM_HEADER: &[&str] = &[
    "run",
    "source_db_id",
    "target_db_id",
    "s_ho",
    "a_ho",
    "sp_ho",
    "ap_ho",
    "mean_rsrp_dbm",
    "rsrq_mean_db",
    "n_samples",
];
pub const NRT_HEADER: &[&str] = &[
    "source_db_id",
    "target_db_id",
    "relation_db_id",
    "type",
    "created_by",
    "created_at_run",
    "ho_allowed",
    "no_remove",
];
pub const TRACKING_HEADER: &[&str] = &[
    "seq",
    "event",
    "source_db_id",
    "target_db_id",
    "relation_db_id",
    "type",
    "created_by",
    "created_at_run",
    "created_at_s",
    "at_run",
    "at_s",
    "actor",
];
pub const CYCLE_HEADER: &[&str] = &[
    "run",
    "bs_id",
    "cell_db_id",
    "action",
    "target_db_id",
    "reason",
    "rank_at_action",
];
pub const THRESHOLD_HEADER: &[&str] = &["run", "bs_id", "cell_rsrp_thr_dbm", "cell_rsrq_thr_db"];
pub const X2_HEADER: &[&str] = &["run", "bs_id", "peer_bs_id", "attempts"];

pub fn is_not_found(err: &anyhow::Error) -> bool {
    err.chain()
        .filter_map(|e| e.downcast_ref::<io::Error>())
        .any(|e| e.kind() == io::ErrorKind::NotFound)
}
