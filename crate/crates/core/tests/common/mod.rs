#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use hanr::harness::{Campaign, Mode, RunOutcome, Scenario};
use hanr::metrics::{normalized_success_share, RunPm};
use hanr::model::replay_tracking;
use hanr::network::Network;

pub fn scenario_with_runs(runs: u64) -> Scenario {
    let mut s = Scenario::default();
    s.schedule.time_window_s = runs * s.schedule.anr_run_time_s;
    s
}

pub fn simulate(s: &Scenario) -> (Campaign, Vec<RunOutcome>) {
    let mut c = Campaign::new(s).expect("valid scenario");
    let outs = c.run_all(Mode::Simulate).expect("campaign runs");
    (c, outs)
}

/// Cells whose HO shares do not sum to exactly one despite successes.
pub fn share_violations(pm: &RunPm) -> Vec<(u32, u64)> {
    pm.cells
        .iter()
        .filter(|(_, rows)| rows.iter().any(|r| r.s_ho > 0))
        .filter(|(_, rows)| normalized_success_share(rows).iter().sum::<f64>() != 1.0)
        .map(|(&cell, _)| (pm.run, cell))
        .collect()
}

/// Rebuilds every NRT from the tracking log and compares with the live tables.
pub fn replays_to_live(net: &Network) -> bool {
    let mut replayed = replay_tracking(&net.tracking);
    replayed.retain(|_, t| !t.is_empty());
    replayed == net.fingerprints()
}

/// Every file under `root`, keyed by relative path.
pub fn dir_bytes(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        let mut entries: Vec<_> = fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(
                    p.strip_prefix(root).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}
