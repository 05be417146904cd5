use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    ThrRsrpUp,
    ThrRsrqUp,
    NrAdd,
    NrRemove,
    NrBlacklist,
    NrWhitelist,
    X2Blacklist,
    X2Whitelist,
    PlmnBlock,
    Rebuild,
    CellSkipped,
}

impl ActionKind {
    pub const ALL: [ActionKind; 11] = [
        ActionKind::ThrRsrpUp,
        ActionKind::ThrRsrqUp,
        ActionKind::NrAdd,
        ActionKind::NrRemove,
        ActionKind::NrBlacklist,
        ActionKind::NrWhitelist,
        ActionKind::X2Blacklist,
        ActionKind::X2Whitelist,
        ActionKind::PlmnBlock,
        ActionKind::Rebuild,
        ActionKind::CellSkipped,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::ThrRsrpUp => "THR_RSRP+1",
            ActionKind::ThrRsrqUp => "THR_RSRQ+1",
            ActionKind::NrAdd => "NR_ADD",
            ActionKind::NrRemove => "NR_REMOVE",
            ActionKind::NrBlacklist => "NR_BLACKLIST",
            ActionKind::NrWhitelist => "NR_WHITELIST",
            ActionKind::X2Blacklist => "X2_BLACKLIST",
            ActionKind::X2Whitelist => "X2_WHITELIST",
            ActionKind::PlmnBlock => "PLMN_BLOCK",
            ActionKind::Rebuild => "REBUILD",
            ActionKind::CellSkipped => "CELL_SKIPPED",
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ActionKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActionKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ModelError::UnknownLabel {
                kind: "action",
                label: s.to_string(),
            })
    }
}

/// One mutation performed by the engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleAction {
    pub run: u32,
    pub bs_id: u32,
    /// None for base-station level actions.
    pub cell_db_id: Option<u64>,
    pub action: ActionKind,
    /// Target cell, or peer base station for X2 actions.
    pub target_db_id: Option<u64>,
    pub reason: String,
    pub rank_at_action: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub run: u32,
    pub actions: Vec<CycleAction>,
}

impl CycleReport {
    pub fn new(run: u32) -> Self {
        Self {
            run,
            actions: Vec::new(),
        }
    }

    pub fn of_kind(&self, kind: ActionKind) -> impl Iterator<Item = &CycleAction> {
        self.actions.iter().filter(move |a| a.action == kind)
    }

    /// Actions other than skip flags.
    pub fn mutations(&self) -> impl Iterator<Item = &CycleAction> {
        self.actions
            .iter()
            .filter(|a| a.action != ActionKind::CellSkipped)
    }

    pub(crate) fn push(
        &mut self,
        bs_id: u32,
        cell_db_id: Option<u64>,
        action: ActionKind,
        target_db_id: Option<u64>,
        reason: impl Into<String>,
        rank_at_action: Option<f64>,
    ) {
        self.actions.push(CycleAction {
            run: self.run,
            bs_id,
            cell_db_id,
            action,
            target_db_id,
            reason: reason.into(),
            rank_at_action,
        });
    }
}
