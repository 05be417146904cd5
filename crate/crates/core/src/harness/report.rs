//! Offline reports over a campaign's persisted outputs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{Actor, CellId, TrackingEvent, TrackingRecord};

/// One row of the removal report: relations created by X2 or D-ANR that
/// H-ANR later removed, per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovalRow {
    pub bs_id: u32,
    pub cell_db_id: u64,
    /// Empty when zero.
    pub x2: Option<u32>,
    pub danr: Option<u32>,
    /// Average source-target distance of the counted removals.
    pub avg_distance_km: Option<f64>,
}

pub const REMOVAL_HEADER: &[&str] = &["bs_id", "cell_db_id", "x2", "danr", "avg_distance_km"];

pub fn removal_report(
    cells: &BTreeMap<u64, CellId>,
    tracking: &[TrackingRecord],
) -> Vec<RemovalRow> {
    let mut per_cell: BTreeMap<u64, (u32, u32, f64)> = BTreeMap::new();
    for r in tracking {
        if r.event != TrackingEvent::Remove || r.actor != Actor::Hanr {
            continue;
        }
        let (Some(src), Some(dst)) = (cells.get(&r.source_db_id), cells.get(&r.target_db_id))
        else {
            continue;
        };
        let e = per_cell.entry(r.source_db_id).or_default();
        match r.created_by {
            Actor::X2 => e.0 += 1,
            Actor::Danr => e.1 += 1,
            _ => continue,
        }
        e.2 += src.distance_km(dst);
    }
    cells
        .values()
        .map(|c| {
            let (x2, danr, dist) = per_cell.get(&c.cell_db_id).copied().unwrap_or_default();
            let n = x2 + danr;
            RemovalRow {
                bs_id: c.bs_id,
                cell_db_id: c.cell_db_id,
                x2: (x2 > 0).then_some(x2),
                danr: (danr > 0).then_some(danr),
                avg_distance_km: (n > 0).then(|| dist / n as f64),
            }
        })
        .collect()
}

/// Fixed-width text rendering with `-` for blanks and two decimals.
pub fn render_removal_table(rows: &[RemovalRow]) -> String {
    let mut out = format!(
        "{:<6} {:<8} {:>4} {:>6} {:>12}\n",
        "bs", "cell", "X2", "D-ANR", "avg_dist_km"
    );
    let dash = |v: Option<u32>| v.map_or("-".to_string(), |n| n.to_string());
    for r in rows {
        let dist = r
            .avg_distance_km
            .map_or("-".to_string(), |d| format!("{d:.2}"));
        out.push_str(&format!(
            "{:<6} {:<8} {:>4} {:>6} {:>12}\n",
            r.bs_id,
            r.cell_db_id,
            dash(r.x2),
            dash(r.danr),
            dist
        ));
    }
    out
}
