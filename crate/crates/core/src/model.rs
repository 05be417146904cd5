//! Cells, neighbor relations, neighbor relation tables (NRTs), the addition
//! and removal tracking log, and black/whitelist state.
//!
//! Every mutation of an [`Nrt`] goes through [`nrt_insert`] or
//! [`nrt_remove`], which write exactly one [`TrackingRecord`] per effective
//! change. Relation identity for deduplication and list checks is the target
//! `cell_db_id`; `relation_db_id` is reissued on every creation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default NRT capacity.
pub const DEFAULT_NRT_CAPACITY: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("snapshot owner mismatch: {before} vs {after}")]
    OwnerMismatch { before: u64, after: u64 },
    #[error("unknown {kind} label `{label}`")]
    UnknownLabel { kind: &'static str, label: String },
}

macro_rules! labelled_enum {
    ($(#[$meta:meta])* $name:ident, $kind:literal, { $($variant:ident => $label:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "SCREAMING_SNAKE_CASE")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = ModelError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($label => Ok($name::$variant),)+
                    other => Err(ModelError::UnknownLabel { kind: $kind, label: other.to_string() }),
                }
            }
        }
    };
}

labelled_enum!(
    /// Radio access technology of a cell.
    Rat, "rat", {
        Nr5g => "NR5G",
        Eutran => "EUTRAN",
        Utran => "UTRAN",
        Geran => "GERAN",
    }
);

labelled_enum!(
    /// Relation type, derived from the RAT and carrier of both ends.
    RelType, "type", {
        Intra => "INTRA",
        Inter => "INTER",
        Irat => "IRAT",
    }
);

labelled_enum!(
    /// Who created or removed a relation. `External` marks NRT changes that
    /// happened outside the tracked API (resets, unmanaged edits) and were
    /// only discovered by diffing snapshots.
    Actor, "actor", {
        Danr => "DANR",
        X2 => "X2",
        Operator => "OPERATOR",
        Hanr => "HANR",
        External => "EXTERNAL",
    }
);

labelled_enum!(
    TrackingEvent, "event", {
        Add => "ADD",
        Remove => "REMOVE",
    }
);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellId {
    pub bs_id: u32,
    pub cell_db_id: u64,
    pub plmn: String,
    pub rat: Rat,
    pub freq_layer: u32,
    /// Planar position in km.
    pub position: (f64, f64),
}

impl CellId {
    pub fn distance_km(&self, other: &CellId) -> f64 {
        let dx = self.position.0 - other.position.0;
        let dy = self.position.1 - other.position.1;
        dx.hypot(dy)
    }

    pub fn same_frequency(&self, other: &CellId) -> bool {
        self.rat == other.rat && self.freq_layer == other.freq_layer
    }
}

impl RelType {
    pub fn between(source: &CellId, target: &CellId) -> RelType {
        if source.rat != target.rat {
            RelType::Irat
        } else if source.freq_layer == target.freq_layer {
            RelType::Intra
        } else {
            RelType::Inter
        }
    }
}

/// Point in campaign time: the run index plus seconds since campaign start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Stamp {
    pub run: u32,
    pub time_s: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborRelation {
    pub relation_db_id: u64,
    pub source: CellId,
    pub target: CellId,
    pub rel_type: RelType,
    pub created_by: Actor,
    pub created_at: Stamp,
    pub ho_allowed: bool,
    /// Whitelist protection against automated removal.
    pub no_remove: bool,
    pub blacklisted: bool,
}

impl NeighborRelation {
    pub fn new(
        relation_db_id: u64,
        source: CellId,
        target: CellId,
        created_by: Actor,
        created_at: Stamp,
    ) -> Self {
        let rel_type = RelType::between(&source, &target);
        Self {
            relation_db_id,
            source,
            target,
            rel_type,
            created_by,
            created_at,
            ho_allowed: true,
            no_remove: false,
            blacklisted: false,
        }
    }

    pub fn target_db_id(&self) -> u64 {
        self.target.cell_db_id
    }

    pub fn distance_km(&self) -> f64 {
        self.source.distance_km(&self.target)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nrt {
    pub owner: CellId,
    pub entries: Vec<NeighborRelation>,
    pub capacity: usize,
}

impl Nrt {
    pub fn new(owner: CellId, capacity: usize) -> Self {
        Self {
            owner,
            entries: Vec::new(),
            capacity: capacity.max(1),
        }
    }

    pub fn owner_db_id(&self) -> u64 {
        self.owner.cell_db_id
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn vacancies(&self) -> usize {
        self.capacity.saturating_sub(self.entries.len())
    }

    pub fn contains(&self, target_db_id: u64) -> bool {
        self.entries
            .iter()
            .any(|e| e.target_db_id() == target_db_id)
    }

    pub fn get(&self, target_db_id: u64) -> Option<&NeighborRelation> {
        self.entries
            .iter()
            .find(|e| e.target_db_id() == target_db_id)
    }

    pub fn get_mut(&mut self, target_db_id: u64) -> Option<&mut NeighborRelation> {
        self.entries
            .iter_mut()
            .find(|e| e.target_db_id() == target_db_id)
    }

    pub fn target_ids(&self) -> BTreeSet<u64> {
        self.entries.iter().map(|e| e.target_db_id()).collect()
    }

    /// Drops every entry without tracking, as a cell reset would.
    pub fn reset(&mut self) {
        self.entries.clear();
    }

    pub fn fingerprint(&self) -> Vec<RelationKey> {
        self.entries.iter().map(RelationKey::from).collect()
    }
}

/// The identity-bearing part of a relation that the tracking log preserves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationKey {
    pub target_db_id: u64,
    pub relation_db_id: u64,
    pub rel_type: RelType,
    pub created_by: Actor,
    pub created_at: Stamp,
}

impl From<&NeighborRelation> for RelationKey {
    fn from(rel: &NeighborRelation) -> Self {
        Self {
            target_db_id: rel.target_db_id(),
            relation_db_id: rel.relation_db_id,
            rel_type: rel.rel_type,
            created_by: rel.created_by,
            created_at: rel.created_at,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RejectReason {
    DuplicateTarget,
    BlacklistedNr,
    BlacklistedPlmn,
    CapacityFull,
    X2BlacklistedPeer,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::DuplicateTarget => "duplicate_target",
            RejectReason::BlacklistedNr => "blacklisted_nr",
            RejectReason::BlacklistedPlmn => "blacklisted_plmn",
            RejectReason::CapacityFull => "capacity_full",
            RejectReason::X2BlacklistedPeer => "x2_blacklisted_peer",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemoveError {
    NotFound,
    /// Whitelisted entry and the remover is not the operator.
    Protected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingRecord {
    /// Global sequence number; orders additions and removals together.
    pub seq: u64,
    pub event: TrackingEvent,
    pub source_db_id: u64,
    pub target_db_id: u64,
    pub relation_db_id: u64,
    pub rel_type: RelType,
    pub created_by: Actor,
    pub created_at: Stamp,
    /// Time of this event (addition time for additions).
    pub at: Stamp,
    /// Creator for additions, remover for removals.
    pub actor: Actor,
}

/// Append-only addition and removal logs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackingTables {
    pub additions: Vec<TrackingRecord>,
    pub removals: Vec<TrackingRecord>,
    next_seq: u64,
}

impl TrackingTables {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.additions.len() + self.removals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn record_addition(&mut self, rel: &NeighborRelation, at: Stamp) {
        let record = self.record(TrackingEvent::Add, rel, at, rel.created_by);
        self.additions.push(record);
    }

    pub fn record_removal(&mut self, rel: &NeighborRelation, at: Stamp, removed_by: Actor) {
        let record = self.record(TrackingEvent::Remove, rel, at, removed_by);
        self.removals.push(record);
    }

    fn record(
        &mut self,
        event: TrackingEvent,
        rel: &NeighborRelation,
        at: Stamp,
        actor: Actor,
    ) -> TrackingRecord {
        let seq = self.next_seq;
        self.next_seq += 1;
        TrackingRecord {
            seq,
            event,
            source_db_id: rel.source.cell_db_id,
            target_db_id: rel.target_db_id(),
            relation_db_id: rel.relation_db_id,
            rel_type: rel.rel_type,
            created_by: rel.created_by,
            created_at: rel.created_at,
            at,
            actor,
        }
    }

    /// All records in global order.
    pub fn events(&self) -> Vec<&TrackingRecord> {
        let mut all: Vec<&TrackingRecord> =
            self.additions.iter().chain(self.removals.iter()).collect();
        all.sort_by_key(|r| r.seq);
        all
    }

    pub fn has_addition(&self, relation_db_id: u64) -> bool {
        self.additions
            .iter()
            .rev()
            .any(|r| r.relation_db_id == relation_db_id)
    }

    pub fn has_removal(&self, relation_db_id: u64) -> bool {
        self.removals
            .iter()
            .rev()
            .any(|r| r.relation_db_id == relation_db_id)
    }

    /// Rebuilds a table from a record list (e.g. a parsed CSV log).
    pub fn from_records(records: Vec<TrackingRecord>) -> Self {
        let next_seq = records.iter().map(|r| r.seq + 1).max().unwrap_or(0);
        let (additions, removals) = records
            .into_iter()
            .partition(|r| r.event == TrackingEvent::Add);
        Self {
            additions,
            removals,
            next_seq,
        }
    }
}

/// Unordered base-station pair, stored as (min, max).
pub fn bs_pair(a: u32, b: u32) -> (u32, u32) {
    (a.min(b), a.max(b))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ListState {
    pub nr_blacklist: BTreeSet<(u64, u64)>,
    pub nr_whitelist: BTreeSet<(u64, u64)>,
    pub plmn_blacklist: BTreeSet<String>,
    pub x2_blacklist: BTreeSet<(u32, u32)>,
    pub x2_whitelist: BTreeSet<(u32, u32)>,
}

impl ListState {
    pub fn is_nr_blacklisted(&self, source_db_id: u64, target_db_id: u64) -> bool {
        self.nr_blacklist.contains(&(source_db_id, target_db_id))
    }

    pub fn is_nr_whitelisted(&self, source_db_id: u64, target_db_id: u64) -> bool {
        self.nr_whitelist.contains(&(source_db_id, target_db_id))
    }

    pub fn is_plmn_blacklisted(&self, plmn: &str) -> bool {
        self.plmn_blacklist.contains(plmn)
    }

    pub fn is_x2_blacklisted(&self, bs: u32, peer: u32) -> bool {
        self.x2_blacklist.contains(&bs_pair(bs, peer))
    }

    pub fn is_x2_whitelisted(&self, bs: u32, peer: u32) -> bool {
        self.x2_whitelist.contains(&bs_pair(bs, peer))
    }

    /// Blacklists a pair, revoking any whitelist entry. Returns true if new.
    pub fn blacklist_nr(&mut self, source_db_id: u64, target_db_id: u64) -> bool {
        self.nr_whitelist.remove(&(source_db_id, target_db_id));
        self.nr_blacklist.insert((source_db_id, target_db_id))
    }

    /// Whitelists a pair unless it is blacklisted. Returns true if new.
    pub fn whitelist_nr(&mut self, source_db_id: u64, target_db_id: u64) -> bool {
        if self.is_nr_blacklisted(source_db_id, target_db_id) {
            return false;
        }
        self.nr_whitelist.insert((source_db_id, target_db_id))
    }

    pub fn unwhitelist_nr(&mut self, source_db_id: u64, target_db_id: u64) -> bool {
        self.nr_whitelist.remove(&(source_db_id, target_db_id))
    }

    pub fn blacklist_x2(&mut self, bs: u32, peer: u32) -> bool {
        let pair = bs_pair(bs, peer);
        self.x2_whitelist.remove(&pair);
        self.x2_blacklist.insert(pair)
    }

    pub fn whitelist_x2(&mut self, bs: u32, peer: u32) -> bool {
        let pair = bs_pair(bs, peer);
        if self.x2_blacklist.contains(&pair) {
            return false;
        }
        self.x2_whitelist.insert(pair)
    }

    /// Why a relation from `source` to `target` may not enter an NRT, if any.
    pub fn admission(&self, rel: &NeighborRelation) -> Option<RejectReason> {
        if self.is_plmn_blacklisted(&rel.target.plmn) {
            return Some(RejectReason::BlacklistedPlmn);
        }
        if rel.blacklisted || self.is_nr_blacklisted(rel.source.cell_db_id, rel.target_db_id()) {
            return Some(RejectReason::BlacklistedNr);
        }
        if rel.created_by == Actor::X2
            && rel.source.bs_id != rel.target.bs_id
            && self.is_x2_blacklisted(rel.source.bs_id, rel.target.bs_id)
        {
            return Some(RejectReason::X2BlacklistedPeer);
        }
        None
    }
}

/// Inserts a relation, enforcing list policy, uniqueness and capacity.
///
/// On success exactly one addition record is written; on rejection neither
/// the table nor the log changes.
pub fn nrt_insert(
    nrt: &mut Nrt,
    rel: NeighborRelation,
    lists: &ListState,
    tracking: &mut TrackingTables,
) -> Result<(), RejectReason> {
    debug_assert_eq!(rel.source.cell_db_id, nrt.owner.cell_db_id);
    if let Some(reason) = lists.admission(&rel) {
        return Err(reason);
    }
    if nrt.contains(rel.target_db_id()) {
        return Err(RejectReason::DuplicateTarget);
    }
    if nrt.entries.len() >= nrt.capacity {
        return Err(RejectReason::CapacityFull);
    }
    let mut rel = rel;
    rel.no_remove = lists.is_nr_whitelisted(rel.source.cell_db_id, rel.target_db_id());
    tracking.record_addition(&rel, rel.created_at);
    nrt.entries.push(rel);
    Ok(())
}

/// Removes the relation toward `target_db_id`. Whitelisted entries can only
/// be removed by the operator.
pub fn nrt_remove(
    nrt: &mut Nrt,
    target_db_id: u64,
    removed_by: Actor,
    at: Stamp,
    tracking: &mut TrackingTables,
) -> Result<NeighborRelation, RemoveError> {
    let idx = nrt
        .entries
        .iter()
        .position(|e| e.target_db_id() == target_db_id)
        .ok_or(RemoveError::NotFound)?;
    if nrt.entries[idx].no_remove && removed_by != Actor::Operator {
        return Err(RemoveError::Protected);
    }
    let rel = nrt.entries.remove(idx);
    tracking.record_removal(&rel, at, removed_by);
    Ok(rel)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NrtDiff {
    pub added: Vec<NeighborRelation>,
    pub removed: Vec<NeighborRelation>,
}

impl NrtDiff {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty()
    }
}

/// Set difference of two snapshots of the same NRT, keyed by target cell.
pub fn nrt_diff(before: &Nrt, after: &Nrt) -> Result<NrtDiff, ModelError> {
    if before.owner.cell_db_id != after.owner.cell_db_id {
        return Err(ModelError::OwnerMismatch {
            before: before.owner.cell_db_id,
            after: after.owner.cell_db_id,
        });
    }
    let before_ids = before.target_ids();
    let after_ids = after.target_ids();
    Ok(NrtDiff {
        added: after
            .entries
            .iter()
            .filter(|e| !before_ids.contains(&e.target_db_id()))
            .cloned()
            .collect(),
        removed: before
            .entries
            .iter()
            .filter(|e| !after_ids.contains(&e.target_db_id()))
            .cloned()
            .collect(),
    })
}

/// Number of additions of the pair that follow at least one removal.
pub fn count_readditions(tracking: &TrackingTables, source_db_id: u64, target_db_id: u64) -> u32 {
    let mut seen_removal = false;
    let mut count = 0;
    for record in tracking.events() {
        if record.source_db_id != source_db_id || record.target_db_id != target_db_id {
            continue;
        }
        match record.event {
            TrackingEvent::Remove => seen_removal = true,
            TrackingEvent::Add if seen_removal => count += 1,
            TrackingEvent::Add => {}
        }
    }
    count
}

/// Re-addition counts of every target with history for one source cell.
pub fn readditions_for_source(tracking: &TrackingTables, source_db_id: u64) -> BTreeMap<u64, u32> {
    readditions_by(tracking, source_db_id, |_| true)
}

/// Like [`readditions_for_source`], counting only re-additions whose
/// creator satisfies `counted`.
pub fn readditions_by(
    tracking: &TrackingTables,
    source_db_id: u64,
    counted: impl Fn(Actor) -> bool,
) -> BTreeMap<u64, u32> {
    let mut removed: BTreeSet<u64> = BTreeSet::new();
    let mut counts: BTreeMap<u64, u32> = BTreeMap::new();
    for record in tracking.events() {
        if record.source_db_id != source_db_id {
            continue;
        }
        let count = counts.entry(record.target_db_id).or_default();
        match record.event {
            TrackingEvent::Remove => {
                removed.insert(record.target_db_id);
            }
            TrackingEvent::Add
                if removed.contains(&record.target_db_id) && counted(record.created_by) =>
            {
                *count += 1
            }
            TrackingEvent::Add => {}
        }
    }
    counts
}

/// Re-derives every NRT by replaying the log from empty tables.
pub fn replay_tracking(tracking: &TrackingTables) -> BTreeMap<u64, Vec<RelationKey>> {
    let mut tables: BTreeMap<u64, Vec<RelationKey>> = BTreeMap::new();
    for record in tracking.events() {
        let table = tables.entry(record.source_db_id).or_default();
        match record.event {
            TrackingEvent::Add => table.push(RelationKey {
                target_db_id: record.target_db_id,
                relation_db_id: record.relation_db_id,
                rel_type: record.rel_type,
                created_by: record.created_by,
                created_at: record.created_at,
            }),
            TrackingEvent::Remove => table.retain(|k| k.relation_db_id != record.relation_db_id),
        }
    }
    tables
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn cell(bs_id: u32, cell_db_id: u64, plmn: &str, x: f64) -> CellId {
        CellId {
            bs_id,
            cell_db_id,
            plmn: plmn.to_string(),
            rat: Rat::Eutran,
            freq_layer: 0,
            position: (x, 0.0),
        }
    }

    fn stamp(run: u32) -> Stamp {
        Stamp {
            run,
            time_s: run as u64 * 900,
        }
    }

    fn rel(id: u64, source: &CellId, target: &CellId, by: Actor, run: u32) -> NeighborRelation {
        NeighborRelation::new(id, source.clone(), target.clone(), by, stamp(run))
    }

    #[test]
    fn rel_type_classification() {
        let a = cell(1, 101, "001", 0.0);
        let mut b = cell(2, 201, "001", 1.0);
        assert_eq!(RelType::between(&a, &b), RelType::Intra);
        b.freq_layer = 1;
        assert_eq!(RelType::between(&a, &b), RelType::Inter);
        b.rat = Rat::Geran;
        assert_eq!(RelType::between(&a, &b), RelType::Irat);
    }

    #[test]
    fn insert_into_empty_table() {
        let a = cell(1, 101, "001", 0.0);
        let b = cell(2, 201, "001", 1.0);
        let mut nrt = Nrt::new(a.clone(), 4);
        let mut tracking = TrackingTables::new();
        nrt_insert(
            &mut nrt,
            rel(1, &a, &b, Actor::Danr, 1),
            &ListState::default(),
            &mut tracking,
        )
        .unwrap();
        assert_eq!(nrt.len(), 1);
        assert_eq!(tracking.len(), 1);
    }

    #[test]
    fn duplicate_target_is_rejected_even_with_new_relation_id() {
        let a = cell(1, 101, "001", 0.0);
        let b = cell(2, 201, "001", 1.0);
        let mut nrt = Nrt::new(a.clone(), 4);
        let mut tracking = TrackingTables::new();
        let lists = ListState::default();
        nrt_insert(
            &mut nrt,
            rel(1, &a, &b, Actor::Danr, 1),
            &lists,
            &mut tracking,
        )
        .unwrap();
        let err = nrt_insert(
            &mut nrt,
            rel(2, &a, &b, Actor::X2, 2),
            &lists,
            &mut tracking,
        );
        assert_eq!(err, Err(RejectReason::DuplicateTarget));
        assert_eq!(tracking.len(), 1);
    }

    /// Enumerates every reject reason on a three-cell fixture by building the
    /// expected verdict from the policy rules directly.
    #[test]
    fn reject_reason_state_machine() {
        let a = cell(1, 101, "001", 0.0);
        let b = cell(2, 201, "001", 1.0);
        let c = cell(3, 301, "999", 2.0);
        type Setup = fn(&mut ListState, &mut Nrt, &CellId, &CellId);
        let cases: Vec<(&str, Setup, &CellId, Actor, Option<RejectReason>)> = vec![
            ("clean", |_, _, _, _| {}, &b, Actor::Danr, None),
            (
                "nr blacklist",
                |l, _, a, b| {
                    l.blacklist_nr(a.cell_db_id, b.cell_db_id);
                },
                &b,
                Actor::Danr,
                Some(RejectReason::BlacklistedNr),
            ),
            (
                "plmn blacklist",
                |l, _, _, _| {
                    l.plmn_blacklist.insert("999".into());
                },
                &c,
                Actor::Danr,
                Some(RejectReason::BlacklistedPlmn),
            ),
            (
                "x2 blacklist applies to x2 only",
                |l, _, _, _| {
                    l.blacklist_x2(1, 2);
                },
                &b,
                Actor::Danr,
                None,
            ),
            (
                "x2 blacklist",
                |l, _, _, _| {
                    l.blacklist_x2(2, 1);
                },
                &b,
                Actor::X2,
                Some(RejectReason::X2BlacklistedPeer),
            ),
            (
                "capacity",
                |_, n, _, _| {
                    n.capacity = 0;
                },
                &b,
                Actor::Danr,
                Some(RejectReason::CapacityFull),
            ),
        ];
        for (name, setup, target, actor, expected) in cases {
            let mut lists = ListState::default();
            let mut nrt = Nrt::new(a.clone(), 4);
            setup(&mut lists, &mut nrt, &a, target);
            let mut tracking = TrackingTables::new();
            let got = nrt_insert(
                &mut nrt,
                rel(7, &a, target, actor, 1),
                &lists,
                &mut tracking,
            );
            match expected {
                None => {
                    assert_eq!(got, Ok(()), "{name}");
                    assert_eq!(tracking.additions.len(), 1, "{name}");
                }
                Some(reason) => {
                    assert_eq!(got, Err(reason), "{name}");
                    assert!(tracking.is_empty(), "{name}");
                    assert!(nrt.is_empty(), "{name}");
                }
            }
        }
    }

    #[test]
    fn removal_rules() {
        let a = cell(1, 101, "001", 0.0);
        let b = cell(2, 201, "001", 1.0);
        let c = cell(2, 202, "001", 1.0);
        let mut nrt = Nrt::new(a.clone(), 4);
        let mut tracking = TrackingTables::new();
        let lists = ListState::default();
        nrt_insert(
            &mut nrt,
            rel(1, &a, &b, Actor::Danr, 1),
            &lists,
            &mut tracking,
        )
        .unwrap();
        nrt_insert(
            &mut nrt,
            rel(2, &a, &c, Actor::Danr, 1),
            &lists,
            &mut tracking,
        )
        .unwrap();
        nrt.get_mut(202).unwrap().no_remove = true;

        assert!(nrt_remove(&mut nrt, 201, Actor::Hanr, stamp(2), &mut tracking).is_ok());
        assert_eq!(
            nrt_remove(&mut nrt, 202, Actor::Hanr, stamp(2), &mut tracking),
            Err(RemoveError::Protected)
        );
        assert!(nrt.contains(202));
        assert_eq!(
            nrt_remove(&mut nrt, 999, Actor::Hanr, stamp(2), &mut tracking),
            Err(RemoveError::NotFound)
        );
        assert!(nrt_remove(&mut nrt, 202, Actor::Operator, stamp(2), &mut tracking).is_ok());
        assert_eq!(tracking.removals.len(), 2);
    }

    #[test]
    fn diff_cases() {
        let a = cell(1, 101, "001", 0.0);
        let b = cell(2, 201, "001", 1.0);
        let c = cell(3, 301, "001", 2.0);
        let mut tracking = TrackingTables::new();
        let lists = ListState::default();
        let mut before = Nrt::new(a.clone(), 8);
        nrt_insert(
            &mut before,
            rel(1, &a, &b, Actor::Danr, 1),
            &lists,
            &mut tracking,
        )
        .unwrap();
        let same = nrt_diff(&before, &before).unwrap();
        assert!(same.is_empty());
        let mut after = before.clone();
        nrt_insert(
            &mut after,
            rel(2, &a, &c, Actor::Danr, 1),
            &lists,
            &mut tracking,
        )
        .unwrap();
        let d = nrt_diff(&before, &after).unwrap();
        assert_eq!(d.added.len(), 1);
        assert_eq!(d.added[0].target_db_id(), 301);
        assert!(d.removed.is_empty());

        let other = Nrt::new(b.clone(), 8);
        assert!(matches!(
            nrt_diff(&before, &other),
            Err(ModelError::OwnerMismatch { .. })
        ));
    }

    #[test]
    fn readdition_counting() {
        let a = cell(1, 101, "001", 0.0);
        let b = cell(2, 201, "001", 1.0);
        let mut nrt = Nrt::new(a.clone(), 8);
        let mut tracking = TrackingTables::new();
        let lists = ListState::default();
        assert_eq!(count_readditions(&tracking, 101, 201), 0);
        nrt_insert(
            &mut nrt,
            rel(1, &a, &b, Actor::Danr, 1),
            &lists,
            &mut tracking,
        )
        .unwrap();
        assert_eq!(count_readditions(&tracking, 101, 201), 0);
        nrt_remove(&mut nrt, 201, Actor::Hanr, stamp(2), &mut tracking).unwrap();
        nrt_insert(
            &mut nrt,
            rel(2, &a, &b, Actor::Danr, 3),
            &lists,
            &mut tracking,
        )
        .unwrap();
        assert_eq!(count_readditions(&tracking, 101, 201), 1);
    }

    #[test]
    fn readditions_over_scripted_sequence() {
        let a = cell(1, 101, "001", 0.0);
        let b = cell(2, 201, "001", 1.0);
        let mut nrt = Nrt::new(a.clone(), 8);
        let mut tracking = TrackingTables::new();
        let lists = ListState::default();
        let script = [true, false, true, false, true, false, true, false, true];
        // Oracle: replay the script counting adds preceded by any removal.
        let mut removed_once = false;
        let mut expected = 0;
        for (i, &add) in script.iter().enumerate() {
            if add {
                if removed_once {
                    expected += 1;
                }
                nrt_insert(
                    &mut nrt,
                    rel(i as u64, &a, &b, Actor::Danr, i as u32),
                    &lists,
                    &mut tracking,
                )
                .unwrap();
            } else {
                removed_once = true;
                nrt_remove(&mut nrt, 201, Actor::Hanr, stamp(i as u32), &mut tracking).unwrap();
            }
        }
        assert_eq!(expected, 4);
        assert_eq!(count_readditions(&tracking, 101, 201), expected);
    }

    #[test]
    fn replay_reconstructs_table() {
        let a = cell(1, 101, "001", 0.0);
        let b = cell(2, 201, "001", 1.0);
        let c = cell(3, 301, "001", 2.0);
        let mut nrt = Nrt::new(a.clone(), 8);
        let mut tracking = TrackingTables::new();
        let lists = ListState::default();
        nrt_insert(
            &mut nrt,
            rel(1, &a, &b, Actor::Danr, 1),
            &lists,
            &mut tracking,
        )
        .unwrap();
        nrt_insert(
            &mut nrt,
            rel(2, &a, &c, Actor::X2, 1),
            &lists,
            &mut tracking,
        )
        .unwrap();
        nrt_remove(&mut nrt, 201, Actor::Hanr, stamp(2), &mut tracking).unwrap();
        nrt_insert(
            &mut nrt,
            rel(3, &a, &b, Actor::Danr, 3),
            &lists,
            &mut tracking,
        )
        .unwrap();
        let replayed = replay_tracking(&tracking);
        assert_eq!(replayed[&101], nrt.fingerprint());
    }

    #[test]
    fn list_disjointness() {
        let mut lists = ListState::default();
        assert!(lists.whitelist_nr(1, 2));
        assert!(lists.blacklist_nr(1, 2));
        assert!(!lists.is_nr_whitelisted(1, 2));
        assert!(!lists.whitelist_nr(1, 2));
        assert!(lists.whitelist_x2(3, 4));
        lists.blacklist_x2(4, 3);
        assert!(lists.x2_whitelist.is_empty());
    }

    #[test]
    fn labels_round_trip() {
        for actor in [
            Actor::Danr,
            Actor::X2,
            Actor::Operator,
            Actor::Hanr,
            Actor::External,
        ] {
            assert_eq!(actor.as_str().parse::<Actor>().unwrap(), actor);
        }
        assert!("BOGUS".parse::<Rat>().is_err());
    }
}
