//! Shared network state: the cell inventory, every NRT, list state, the
//! tracking log, D-ANR control attributes and X2 setup-attempt counters.
//!
//! H-ANR, D-ANR and operator actions all mutate NRTs through this type so
//! that relation ids are allocated in one place and every change is tracked.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::engine::DanrAttributes;
use crate::model::{
    nrt_insert, nrt_remove, Actor, CellId, ListState, NeighborRelation, Nrt, RejectReason,
    RemoveError, Stamp, TrackingTables,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub cells: BTreeMap<u64, CellId>,
    /// D-ANR availability per base station.
    pub danr_active: BTreeMap<u32, bool>,
    pub nrts: BTreeMap<u64, Nrt>,
    pub lists: ListState,
    pub tracking: TrackingTables,
    pub danr_attrs: BTreeMap<u64, DanrAttributes>,
    /// X2 setup attempts per initiating BS and peer BS.
    pub x2_attempts: BTreeMap<u32, BTreeMap<u32, u32>>,
    next_relation_id: u64,
}

impl Network {
    pub fn new(
        cells: impl IntoIterator<Item = CellId>,
        capacity: usize,
        attrs: DanrAttributes,
    ) -> Self {
        let cells: BTreeMap<u64, CellId> = cells.into_iter().map(|c| (c.cell_db_id, c)).collect();
        let nrts = cells
            .values()
            .map(|c| (c.cell_db_id, Nrt::new(c.clone(), capacity)))
            .collect();
        let danr_attrs = cells.keys().map(|&id| (id, attrs.clone())).collect();
        let danr_active = cells.values().map(|c| (c.bs_id, true)).collect();
        Self {
            cells,
            danr_active,
            nrts,
            lists: ListState::default(),
            tracking: TrackingTables::new(),
            danr_attrs,
            x2_attempts: BTreeMap::new(),
            next_relation_id: 1,
        }
    }

    pub fn cell(&self, cell_db_id: u64) -> Option<&CellId> {
        self.cells.get(&cell_db_id)
    }

    pub fn nrt(&self, cell_db_id: u64) -> Option<&Nrt> {
        self.nrts.get(&cell_db_id)
    }

    pub fn bs_ids(&self) -> BTreeSet<u32> {
        self.cells.values().map(|c| c.bs_id).collect()
    }

    pub fn cells_of_bs(&self, bs_id: u32) -> Vec<u64> {
        self.cells
            .values()
            .filter(|c| c.bs_id == bs_id)
            .map(|c| c.cell_db_id)
            .collect()
    }

    pub fn is_danr_active(&self, bs_id: u32) -> bool {
        self.danr_active.get(&bs_id).copied().unwrap_or(false)
    }

    pub fn attrs(&self, cell_db_id: u64) -> &DanrAttributes {
        &self.danr_attrs[&cell_db_id]
    }

    pub fn next_relation_id(&self) -> u64 {
        self.next_relation_id
    }

    /// Creates and inserts a relation. The relation id is consumed only when
    /// the insertion succeeds.
    pub fn insert_relation(
        &mut self,
        source_db_id: u64,
        target_db_id: u64,
        actor: Actor,
        at: Stamp,
    ) -> Result<NeighborRelation, RejectReason> {
        let id = self.next_relation_id;
        self.insert_with_id(source_db_id, target_db_id, id, actor, at)
    }

    /// Inserts with a caller-supplied relation id (log replay).
    pub fn insert_with_id(
        &mut self,
        source_db_id: u64,
        target_db_id: u64,
        relation_db_id: u64,
        actor: Actor,
        at: Stamp,
    ) -> Result<NeighborRelation, RejectReason> {
        let source = self.cells[&source_db_id].clone();
        let target = self.cells[&target_db_id].clone();
        let rel = NeighborRelation::new(relation_db_id, source, target, actor, at);
        let nrt = self.nrts.get_mut(&source_db_id).expect("known source cell");
        nrt_insert(nrt, rel, &self.lists, &mut self.tracking)?;
        self.next_relation_id = self.next_relation_id.max(relation_db_id + 1);
        Ok(nrt.get(target_db_id).cloned().expect("just inserted"))
    }

    pub fn remove_relation(
        &mut self,
        source_db_id: u64,
        target_db_id: u64,
        actor: Actor,
        at: Stamp,
    ) -> Result<NeighborRelation, RemoveError> {
        let nrt = self
            .nrts
            .get_mut(&source_db_id)
            .ok_or(RemoveError::NotFound)?;
        nrt_remove(nrt, target_db_id, actor, at, &mut self.tracking)
    }

    /// Removes a relation regardless of whitelist protection, clearing the
    /// protection first. Used when a list decision dominates.
    pub fn evict_relation(
        &mut self,
        source_db_id: u64,
        target_db_id: u64,
        actor: Actor,
        at: Stamp,
    ) -> Option<NeighborRelation> {
        let nrt = self.nrts.get_mut(&source_db_id)?;
        if let Some(entry) = nrt.get_mut(target_db_id) {
            entry.no_remove = false;
        }
        nrt_remove(nrt, target_db_id, actor, at, &mut self.tracking).ok()
    }

    pub fn record_x2_attempt(&mut self, bs_id: u32, peer_bs_id: u32) {
        *self
            .x2_attempts
            .entry(bs_id)
            .or_default()
            .entry(peer_bs_id)
            .or_default() += 1;
    }

    /// Attempts in both directions between two base stations.
    pub fn x2_attempts_between(&self, a: u32, b: u32) -> u32 {
        let one = |x: u32, y: u32| {
            self.x2_attempts
                .get(&x)
                .and_then(|m| m.get(&y))
                .copied()
                .unwrap_or(0)
        };
        one(a, b) + one(b, a)
    }

    /// True when no NRT contains a blacklisted pair or blacklisted-PLMN target.
    pub fn lists_respected(&self) -> bool {
        self.nrts.values().all(|nrt| {
            nrt.entries.iter().all(|e| {
                !self
                    .lists
                    .is_nr_blacklisted(nrt.owner_db_id(), e.target_db_id())
                    && !self.lists.is_plmn_blacklisted(&e.target.plmn)
                    && !e.blacklisted
            })
        })
    }

    pub fn fingerprints(&self) -> BTreeMap<u64, Vec<crate::model::RelationKey>> {
        self.nrts
            .iter()
            .filter(|(_, nrt)| !nrt.is_empty())
            .map(|(&id, nrt)| (id, nrt.fingerprint()))
            .collect()
    }
}
