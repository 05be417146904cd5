//! Scenario configuration, campaign execution, persistence and reports.

mod campaign;
pub mod io;
mod report;
mod scenario;

pub use campaign::{Campaign, CampaignDir, History, Mode, ReplayLog, RunOutcome};
pub use report::{removal_report, render_removal_table, RemovalRow, REMOVAL_HEADER};
pub use scenario::{load_scenario, PolicyOverrides, Scenario, ScenarioError};
