//! Deterministic synthetic network: topology, propagation, UE placement
//! and per-run PM counters.
//!
//! Each run draws from its own ChaCha8 stream selected by the run index,
//! in a fixed order: UE placement, then shadowing, then HO outcomes.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::danr::UeReport;
use crate::metrics::{PmRecord, RunPm};
use crate::model::{CellId, Nrt, Rat};

const TOPOLOGY_STREAM: u64 = u64::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("topology needs at least one base station")]
    NoBaseStations,
    #[error("cells_per_bs must be in 1..=6, got {0}")]
    CellsPerBs(u32),
    #[error("could not place {0} base stations at the requested separation")]
    Placement(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologyConfig {
    pub bs_count: u32,
    pub cells_per_bs: u32,
    /// Base stations are placed uniformly in a square of this side (km).
    pub area_km: f64,
    pub min_separation_km: f64,
    pub plmn: String,
    pub rat: Rat,
    pub freq_layer: u32,
    pub tx_power_dbm: f64,
    /// Fraction of all cells flagged as over-shooters (rounded down).
    pub overshooter_fraction: f64,
    pub overshooter_boost_db: f64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            bs_count: 4,
            cells_per_bs: 6,
            area_km: 20.0,
            min_separation_km: 5.0,
            plmn: "001-01".into(),
            rat: Rat::Eutran,
            freq_layer: 0,
            tx_power_dbm: 15.0,
            overshooter_fraction: 0.1,
            overshooter_boost_db: 15.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimCell {
    pub id: CellId,
    pub tx_power_dbm: f64,
    pub overshooter: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub bs_positions: BTreeMap<u32, (f64, f64)>,
    pub cells: BTreeMap<u64, SimCell>,
}

impl Topology {
    pub fn cell_ids(&self) -> impl Iterator<Item = &CellId> {
        self.cells.values().map(|c| &c.id)
    }

    pub fn overshooters(&self) -> Vec<u64> {
        self.cells
            .values()
            .filter(|c| c.overshooter)
            .map(|c| c.id.cell_db_id)
            .collect()
    }
}

/// Cell ids are `100 * bs_id + k` for k in 1..=cells_per_bs.
pub fn generate_topology(config: &TopologyConfig, seed: u64) -> Result<Topology, TopologyError> {
    if config.bs_count == 0 {
        return Err(TopologyError::NoBaseStations);
    }
    if !(1..=6).contains(&config.cells_per_bs) {
        return Err(TopologyError::CellsPerBs(config.cells_per_bs));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(TOPOLOGY_STREAM);

    let mut bs_positions = BTreeMap::new();
    let mut tries = 0;
    while bs_positions.len() < config.bs_count as usize {
        tries += 1;
        if tries > 10_000 {
            return Err(TopologyError::Placement(config.bs_count));
        }
        let p = (
            rng.random::<f64>() * config.area_km,
            rng.random::<f64>() * config.area_km,
        );
        let clear = bs_positions
            .values()
            .all(|q: &(f64, f64)| (p.0 - q.0).hypot(p.1 - q.1) >= config.min_separation_km);
        if clear {
            bs_positions.insert(bs_positions.len() as u32 + 1, p);
        }
    }

    let mut cells = BTreeMap::new();
    for (&bs, &pos) in &bs_positions {
        for k in 1..=config.cells_per_bs {
            let id = CellId {
                bs_id: bs,
                cell_db_id: 100 * bs as u64 + k as u64,
                plmn: config.plmn.clone(),
                rat: config.rat,
                freq_layer: config.freq_layer,
                position: pos,
            };
            cells.insert(
                id.cell_db_id,
                SimCell {
                    id,
                    tx_power_dbm: config.tx_power_dbm,
                    overshooter: false,
                },
            );
        }
    }

    // Over-shooters come from the most remote base stations first.
    let wanted = (config.overshooter_fraction * cells.len() as f64).floor() as usize;
    let mean_dist = |bs: u32| {
        let p = bs_positions[&bs];
        let others: Vec<f64> = bs_positions
            .iter()
            .filter(|(&b, _)| b != bs)
            .map(|(_, q)| (p.0 - q.0).hypot(p.1 - q.1))
            .collect();
        if others.is_empty() {
            0.0
        } else {
            others.iter().sum::<f64>() / others.len() as f64
        }
    };
    let mut remote: Vec<u32> = bs_positions.keys().copied().collect();
    remote.sort_by(|a, b| mean_dist(*b).total_cmp(&mean_dist(*a)).then(a.cmp(b)));
    let mut picked = Vec::new();
    for bs in remote {
        let mut ids: Vec<u64> = (1..=config.cells_per_bs as u64)
            .map(|k| 100 * bs as u64 + k)
            .collect();
        // Seeded Fisher-Yates so the pick within a site varies with the seed.
        for i in (1..ids.len()).rev() {
            let j = rng.random_range(0..=i);
            ids.swap(i, j);
        }
        picked.extend(ids);
        if picked.len() >= wanted {
            break;
        }
    }
    for id in picked.into_iter().take(wanted) {
        let c = cells.get_mut(&id).expect("generated above");
        c.overshooter = true;
        c.tx_power_dbm += config.overshooter_boost_db;
    }

    Ok(Topology {
        bs_positions,
        cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioModel {
    pub pl0_db: f64,
    pub ref_dist_km: f64,
    pub path_loss_exponent: f64,
    pub shadowing_sigma_db: f64,
    /// RSRQ at -80 dBm RSRP on an unloaded cell.
    pub rsrq_ref_db: f64,
    /// dB of RSRQ per dB of RSRP.
    pub rsrq_slope: f64,
    /// Load penalty subtracted from RSRQ.
    pub rsrq_load_db: f64,
    pub rsrq_noise_db: f64,
}

impl Default for RadioModel {
    fn default() -> Self {
        Self {
            pl0_db: 55.0,
            ref_dist_km: 0.05,
            path_loss_exponent: 3.5,
            shadowing_sigma_db: 3.0,
            rsrq_ref_db: -9.0,
            rsrq_slope: 0.2,
            rsrq_load_db: 1.0,
            rsrq_noise_db: 0.1,
        }
    }
}

impl RadioModel {
    pub fn path_loss_db(&self, d_km: f64) -> f64 {
        let d = d_km.max(self.ref_dist_km);
        self.pl0_db + 10.0 * self.path_loss_exponent * (d / self.ref_dist_km).log10()
    }

    fn shadowing(&self) -> Option<Normal<f64>> {
        (self.shadowing_sigma_db > 0.0)
            .then(|| Normal::new(0.0, self.shadowing_sigma_db).expect("sigma > 0"))
    }

    /// RSRQ derived from RSRP; `noise` is a standard normal draw.
    pub fn rsrq_db(&self, rsrp_dbm: f64, noise: f64) -> f64 {
        let v = self.rsrq_ref_db + self.rsrq_slope * (rsrp_dbm + 80.0) - self.rsrq_load_db
            + self.rsrq_noise_db * noise;
        v.clamp(-19.5, -3.0)
    }
}

/// Received power of `cell` at `point`, with one shadowing draw.
pub fn rsrp_at(cell: &SimCell, point: (f64, f64), model: &RadioModel, rng: &mut impl Rng) -> f64 {
    let (x, y) = cell.id.position;
    let d = (point.0 - x).hypot(point.1 - y);
    let shadow = model.shadowing().map_or(0.0, |n| n.sample(rng));
    cell.tx_power_dbm - model.path_loss_db(d) - shadow
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficConfig {
    pub ues_per_cell: u32,
    /// UEs are placed uniformly in a disk of this radius around their cell.
    pub cell_radius_km: f64,
    pub hysteresis_db: f64,
    /// Weakest signal a UE can measure.
    pub measure_floor_dbm: f64,
    pub prep_success: f64,
    pub exec_success: f64,
    /// Distance scale of over-shooter execution success decay (km).
    pub overshooter_d_scale_km: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            ues_per_cell: 30,
            cell_radius_km: 1.0,
            hysteresis_db: 3.0,
            measure_floor_dbm: -124.0,
            prep_success: 0.98,
            exec_success: 0.97,
            overshooter_d_scale_km: 2.0,
        }
    }
}

impl TrafficConfig {
    pub fn exec_probability(&self, target: &SimCell, d_km: f64) -> f64 {
        if target.overshooter {
            self.exec_success * (-d_km / self.overshooter_d_scale_km).exp()
        } else {
            self.exec_success
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimOutput {
    pub pm: RunPm,
    pub ue_reports: Vec<UeReport>,
}

/// Simulates one run window against the NRTs in place at its start.
pub fn simulate_run(
    topology: &Topology,
    nrts: &BTreeMap<u64, Nrt>,
    model: &RadioModel,
    traffic: &TrafficConfig,
    seed: u64,
    run_index: u32,
) -> SimOutput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run_index as u64);
    let cells: Vec<&SimCell> = topology.cells.values().collect();

    // UE placement.
    let mut ues: Vec<(u64, (f64, f64))> = Vec::new();
    for c in &cells {
        for _ in 0..traffic.ues_per_cell {
            let r = traffic.cell_radius_km * rng.random::<f64>().sqrt();
            let a = std::f64::consts::TAU * rng.random::<f64>();
            let (x, y) = c.id.position;
            ues.push((c.id.cell_db_id, (x + r * a.cos(), y + r * a.sin())));
        }
    }

    // Shadowing, one draw per UE and cell, then RSRQ noise.
    let shadow = model.shadowing();
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rsrp: Vec<Vec<f64>> = Vec::with_capacity(ues.len());
    let mut rsrq: Vec<Vec<f64>> = Vec::with_capacity(ues.len());
    for (_, p) in &ues {
        let row: Vec<f64> = cells
            .iter()
            .map(|c| {
                let d = (p.0 - c.id.position.0).hypot(p.1 - c.id.position.1);
                let s = shadow.map_or(0.0, |n| n.sample(&mut rng));
                c.tx_power_dbm - model.path_loss_db(d) - s
            })
            .collect();
        let q = row
            .iter()
            .map(|&v| model.rsrq_db(v, std_normal.sample(&mut rng)))
            .collect();
        rsrp.push(row);
        rsrq.push(q);
    }

    let index: BTreeMap<u64, usize> = cells
        .iter()
        .enumerate()
        .map(|(i, c)| (c.id.cell_db_id, i))
        .collect();
    let mut samples: BTreeMap<(u64, u64), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut counters: BTreeMap<(u64, u64), [u32; 4]> = BTreeMap::new();
    let mut ue_reports = Vec::new();

    // Measurements and HO outcomes.
    for (u, (serving, _)) in ues.iter().enumerate() {
        let nrt = &nrts[serving];
        let s_idx = index[serving];
        let serving_rsrp = rsrp[u][s_idx];
        for (i, c) in cells.iter().enumerate() {
            let target = c.id.cell_db_id;
            if target == *serving || rsrp[u][i] < traffic.measure_floor_dbm {
                continue;
            }
            if nrt.contains(target) {
                let e = samples.entry((*serving, target)).or_default();
                e.0.push(rsrp[u][i]);
                e.1.push(rsrq[u][i]);
            } else {
                ue_reports.push(UeReport {
                    source_db_id: *serving,
                    target_db_id: target,
                    ue: u as u32,
                    rsrp_dbm: rsrp[u][i],
                    rsrq_db: rsrq[u][i],
                });
            }
        }
        let best = nrt
            .entries
            .iter()
            .filter(|e| e.ho_allowed)
            .map(|e| (e, rsrp[u][index[&e.target_db_id()]]))
            .filter(|&(_, v)| v > serving_rsrp + traffic.hysteresis_db)
            .max_by(|a, b| {
                a.1.total_cmp(&b.1)
                    .then(b.0.target_db_id().cmp(&a.0.target_db_id()))
            });
        if let Some((rel, _)) = best {
            let target = rel.target_db_id();
            let k = counters.entry((*serving, target)).or_default();
            k[3] += 1;
            if rng.random::<f64>() < traffic.prep_success {
                k[2] += 1;
                k[1] += 1;
                let p = traffic.exec_probability(&topology.cells[&target], rel.distance_km());
                if rng.random::<f64>() < p {
                    k[0] += 1;
                }
            }
        }
    }

    let mut pm = RunPm::new(run_index);
    for (&cell, nrt) in nrts {
        let mut targets: Vec<u64> = nrt.target_ids().into_iter().collect();
        targets.sort_unstable();
        let records = targets
            .into_iter()
            .map(|t| {
                let mut r = PmRecord::idle(run_index, cell, t);
                if let Some((p, q)) = samples.get(&(cell, t)) {
                    r = r.with_samples(p, q);
                }
                if let Some(k) = counters.get(&(cell, t)) {
                    r = r.with_counters(k[0], k[1], k[2], k[3]);
                }
                r
            })
            .collect();
        pm.cells.insert(cell, records);
    }
    SimOutput { pm, ue_reports }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Actor, NeighborRelation, Stamp};

    fn topo() -> Topology {
        generate_topology(&TopologyConfig::default(), 42).unwrap()
    }

    #[test]
    fn deterministic_topology() {
        assert_eq!(topo(), topo());
        assert_ne!(
            topo(),
            generate_topology(&TopologyConfig::default(), 43).unwrap()
        );
    }

    #[test]
    fn counts_and_ids() {
        let t = topo();
        assert_eq!(t.cells.len(), 24);
        let mut ids: Vec<u64> = t.cells.keys().copied().collect();
        ids.dedup();
        assert_eq!(ids.len(), 24);
        assert_eq!(t.overshooters().len(), 2);
        for c in t.cells.values() {
            assert_eq!(c.id.position, t.bs_positions[&c.id.bs_id]);
        }
    }

    #[test]
    fn invalid_configs() {
        let c = TopologyConfig {
            bs_count: 0,
            ..TopologyConfig::default()
        };
        assert_eq!(generate_topology(&c, 1), Err(TopologyError::NoBaseStations));
        let c = TopologyConfig {
            cells_per_bs: 7,
            ..TopologyConfig::default()
        };
        assert_eq!(generate_topology(&c, 1), Err(TopologyError::CellsPerBs(7)));
    }

    fn cell_at_origin() -> SimCell {
        SimCell {
            id: CellId {
                bs_id: 1,
                cell_db_id: 101,
                plmn: "001-01".into(),
                rat: Rat::Eutran,
                freq_layer: 0,
                position: (0.0, 0.0),
            },
            tx_power_dbm: 15.0,
            overshooter: false,
        }
    }

    #[test]
    fn propagation_closed_form() {
        let m = RadioModel {
            shadowing_sigma_db: 0.0,
            ..RadioModel::default()
        };
        let c = cell_at_origin();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let at_ref = rsrp_at(&c, (m.ref_dist_km, 0.0), &m, &mut rng);
        assert_eq!(at_ref, c.tx_power_dbm - m.pl0_db);
        let near = rsrp_at(&c, (1.0, 0.0), &m, &mut rng);
        let far = rsrp_at(&c, (2.0, 0.0), &m, &mut rng);
        // 35 * log10(2)
        assert!((near - far - 10.536).abs() < 1e-3);
        assert_eq!(rsrp_at(&c, (0.0, 1.0), &m, &mut rng), near);
    }

    fn full_nrts(t: &Topology) -> BTreeMap<u64, Nrt> {
        let at = Stamp { run: 0, time_s: 0 };
        let mut id = 0;
        t.cells
            .values()
            .map(|s| {
                let mut nrt = Nrt::new(s.id.clone(), 64);
                for o in t.cells.values().filter(|o| o.id != s.id) {
                    id += 1;
                    nrt.entries.push(NeighborRelation::new(
                        id,
                        s.id.clone(),
                        o.id.clone(),
                        Actor::Hanr,
                        at,
                    ));
                }
                (s.id.cell_db_id, nrt)
            })
            .collect()
    }

    #[test]
    fn zero_ues_gives_zero_counters() {
        let t = topo();
        let traffic = TrafficConfig {
            ues_per_cell: 0,
            ..TrafficConfig::default()
        };
        let out = simulate_run(&t, &full_nrts(&t), &RadioModel::default(), &traffic, 1, 1);
        assert!(out.ue_reports.is_empty());
        assert!(out.pm.records().all(|r| r.ap_ho == 0 && r.n_samples == 0));
    }

    #[test]
    fn forced_handover_path() {
        let mut a = cell_at_origin();
        a.tx_power_dbm = -200.0;
        let mut b = cell_at_origin();
        b.id.cell_db_id = 201;
        b.id.bs_id = 2;
        b.id.position = (0.5, 0.0);
        let t = Topology {
            bs_positions: BTreeMap::from([(1, (0.0, 0.0)), (2, (0.5, 0.0))]),
            cells: BTreeMap::from([(101, a.clone()), (201, b.clone())]),
        };
        let at = Stamp { run: 0, time_s: 0 };
        let mut nrts = BTreeMap::new();
        let mut na = Nrt::new(a.id.clone(), 4);
        na.entries.push(NeighborRelation::new(
            1,
            a.id.clone(),
            b.id.clone(),
            Actor::Hanr,
            at,
        ));
        nrts.insert(101, na);
        nrts.insert(201, Nrt::new(b.id.clone(), 4));
        let traffic = TrafficConfig {
            ues_per_cell: 1,
            cell_radius_km: 0.0,
            prep_success: 1.0,
            exec_success: 1.0,
            ..TrafficConfig::default()
        };
        let m = RadioModel {
            shadowing_sigma_db: 0.0,
            ..RadioModel::default()
        };
        let out = simulate_run(&t, &nrts, &m, &traffic, 7, 1);
        let r = &out.pm.cells[&101][0];
        assert_eq!((r.s_ho, r.a_ho, r.sp_ho, r.ap_ho), (1, 1, 1, 1));
    }

    #[test]
    fn counter_chain_over_many_runs() {
        let t = topo();
        let nrts = full_nrts(&t);
        let traffic = TrafficConfig {
            ues_per_cell: 3,
            ..TrafficConfig::default()
        };
        let mut violations = 0;
        for run in 1..=1000 {
            let out = simulate_run(&t, &nrts, &RadioModel::default(), &traffic, 5, run);
            violations += out
                .pm
                .records()
                .filter(|r| !r.counters_consistent())
                .count();
        }
        assert_eq!(violations, 0);
    }

    #[test]
    fn runs_are_reproducible() {
        let t = topo();
        let nrts = full_nrts(&t);
        let a = simulate_run(
            &t,
            &nrts,
            &RadioModel::default(),
            &TrafficConfig::default(),
            9,
            3,
        );
        let b = simulate_run(
            &t,
            &nrts,
            &RadioModel::default(),
            &TrafficConfig::default(),
            9,
            3,
        );
        assert_eq!(a, b);
        let c = simulate_run(
            &t,
            &nrts,
            &RadioModel::default(),
            &TrafficConfig::default(),
            9,
            4,
        );
        assert_ne!(a.pm, c.pm);
    }
}
