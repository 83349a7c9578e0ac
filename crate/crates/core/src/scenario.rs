//! Experiment description and static geometry.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::N_APS;

/// A point in the plane, meters.
pub type Point = [f64; 2];

/// Maximum number of candidate draws `place_users` makes before giving up.
pub const PLACEMENT_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StagePolicy {
    /// Separate decoding only.
    S1,
    /// Separate decoding plus one-sided AP cooperation.
    S1S2,
    /// Full event-triggered algorithm including central decoding.
    S1S2S3,
    /// Orthogonal time-sharing baseline with a single queue per user.
    #[serde(rename = "TDMA")]
    Tdma,
}

impl StagePolicy {
    pub const PROPOSED: [StagePolicy; 3] = [StagePolicy::S1, StagePolicy::S1S2, StagePolicy::S1S2S3];

    pub fn allows_stage2(self) -> bool {
        matches!(self, StagePolicy::S1S2 | StagePolicy::S1S2S3)
    }

    pub fn allows_stage3(self) -> bool {
        self == StagePolicy::S1S2S3
    }

    pub fn name(self) -> &'static str {
        match self {
            StagePolicy::S1 => "S1",
            StagePolicy::S1S2 => "S1S2",
            StagePolicy::S1S2S3 => "S1S2S3",
            StagePolicy::Tdma => "TDMA",
        }
    }
}

impl std::fmt::Display for StagePolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for StagePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "S1" => Ok(StagePolicy::S1),
            "S1S2" => Ok(StagePolicy::S1S2),
            "S1S2S3" | "FULL" => Ok(StagePolicy::S1S2S3),
            "TDMA" => Ok(StagePolicy::Tdma),
            other => Err(Error::Config(format!("unknown stage policy {other:?}"))),
        }
    }
}

/// Which closed form the optimizer uses for decoding-success probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SuccessModel {
    #[default]
    Corrected,
    /// The expressions exactly as printed; degenerate for the first-decoded
    /// message and for the central-decoding case. Kept for comparison.
    Verbatim,
}

/// Source of the per-AP SIC order used in a slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OrderMode {
    /// Re-sort every slot by the expected channel magnitude |ĥ|.
    #[default]
    PerSlot,
    /// Keep the order given by average path-loss gains.
    Average,
}

/// A deterministic LoS outage on one link, inclusive slot window.
/// `ap` and `ue` are 1-based, so `{ ap = 2, ue = 2 }` is the link h_22.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduledBlockage {
    pub ap: usize,
    pub ue: usize,
    pub start: u64,
    pub end: u64,
}

fn default_n_slots() -> u64 {
    5_000
}
fn default_warmup() -> u64 {
    500
}

/// Full experiment description. Loaded from TOML; key names match field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub area_m: [f64; 2],
    pub ap_positions: [Point; N_APS],
    pub n_users: usize,
    pub min_ap_distance_m: f64,
    /// Rician K-factor, linear.
    pub rician_k: f64,
    pub noise_psd_dbm_hz: f64,
    pub bandwidth_hz: f64,
    pub p_max_dbm: f64,
    pub packet_bits: f64,
    pub slot_s: f64,
    /// Total generated traffic per user, bits/s.
    pub arrival_bps: f64,
    pub hc_fraction: f64,
    /// Blockage arrival rate, blockers/s.
    pub kappa_b: f64,
    /// Unblocking rate, 1/s.
    pub mu_b: f64,
    pub nq: u32,
    pub q_max_hc: f64,
    pub q_max_lc: f64,
    pub n_e: u32,
    pub stage_policy: StagePolicy,
    #[serde(default)]
    pub success_model: SuccessModel,
    pub seed: u64,

    #[serde(default = "default_n_slots")]
    pub n_slots: u64,
    /// Leading slots excluded from delay, exceedance and cost statistics.
    #[serde(default = "default_warmup")]
    pub warmup_slots: u64,
    #[serde(default)]
    pub order_mode: OrderMode,
    /// Fixed user positions; when absent users are sampled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ue_positions: Option<Vec<Point>>,
    /// Replay these outages instead of sampling the blockage process.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blockage_schedule: Option<Vec<ScheduledBlockage>>,
}

impl Default for ScenarioConfig {
    /// Two users on a 4 MHz channel, 300 ms mean blockage at p_b = 0.05.
    fn default() -> Self {
        let mu_b = 1.0 / 0.3;
        ScenarioConfig {
            area_m: [150.0, 150.0],
            ap_positions: [[0.0, 0.0], [150.0, 150.0]],
            n_users: 2,
            min_ap_distance_m: 50.0,
            rician_k: 20.0,
            noise_psd_dbm_hz: -174.0,
            bandwidth_hz: 4e6,
            p_max_dbm: 10.0,
            packet_bits: 1_000.0,
            slot_s: 0.01,
            arrival_bps: 10e6,
            hc_fraction: 0.5,
            kappa_b: mu_b * 0.05 / 0.95,
            mu_b,
            nq: 10,
            q_max_hc: 300.0,
            q_max_lc: 1_000.0,
            n_e: 10,
            stage_policy: StagePolicy::S1S2S3,
            success_model: SuccessModel::Corrected,
            seed: 1,
            n_slots: default_n_slots(),
            warmup_slots: default_warmup(),
            order_mode: OrderMode::PerSlot,
            ue_positions: None,
            blockage_schedule: None,
        }
    }
}

impl ScenarioConfig {
    /// The default parameter table with the given user count and bandwidth.
    pub fn with_users(n_users: usize, bandwidth_hz: f64) -> Self {
        ScenarioConfig {
            n_users,
            bandwidth_hz,
            ..Default::default()
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.hc_fraction) {
            return bad("hc_fraction must lie in [0, 1]");
        }
        if !(self.kappa_b > 0.0 && self.mu_b > 0.0) {
            return bad("kappa_b and mu_b must be positive");
        }
        if !(self.slot_s > 0.0 && self.packet_bits > 0.0 && self.bandwidth_hz > 0.0) {
            return bad("slot_s, packet_bits and bandwidth_hz must be positive");
        }
        if self.n_users == 0 {
            return bad("n_users must be at least 1");
        }
        if !(self.area_m[0] > 0.0 && self.area_m[1] > 0.0) {
            return bad("area_m must be positive");
        }
        if self.min_ap_distance_m < 0.0 {
            return bad("min_ap_distance_m must be non-negative");
        }
        if !(self.rician_k >= 0.0) {
            return bad("rician_k must be non-negative");
        }
        if !(self.arrival_bps >= 0.0) {
            return bad("arrival_bps must be non-negative");
        }
        if !(self.q_max_hc > 0.0 && self.q_max_lc > 0.0) {
            return bad("queue thresholds must be positive");
        }
        if self.warmup_slots >= self.n_slots {
            return bad("warmup_slots must be smaller than n_slots");
        }
        if let Some(pos) = &self.ue_positions {
            if pos.len() != self.n_users {
                return bad("ue_positions length must equal n_users");
            }
        }
        if let Some(sched) = &self.blockage_schedule {
            for b in sched {
                if b.ap == 0 || b.ap > N_APS || b.ue == 0 || b.ue > self.n_users || b.start > b.end {
                    return Err(Error::Config(format!("bad blockage window {b:?}")));
                }
            }
        }
        Ok(())
    }

    /// Thermal noise power per AP, watts.
    pub fn noise_power_w(&self) -> f64 {
        10f64.powf((self.noise_psd_dbm_hz - 30.0) / 10.0) * self.bandwidth_hz
    }

    pub fn p_max_w(&self) -> f64 {
        10f64.powf((self.p_max_dbm - 30.0) / 10.0)
    }

    /// Mean (HC, LC) arrivals per user, packets per slot.
    pub fn arrival_means(&self) -> (f64, f64) {
        crate::queueing::arrival_means(self.hc_fraction, self.arrival_bps, self.slot_s, self.packet_bits)
    }

    /// Long-run blockage probability of every link.
    pub fn blockage_prob(&self) -> f64 {
        self.kappa_b / (self.kappa_b + self.mu_b)
    }
}

/// Static world of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub ue_positions: Vec<Point>,
    pub ap_positions: [Point; N_APS],
    /// Linear path-loss power gain, `[ap][ue]`.
    pub pathloss_gain: [Vec<f64>; N_APS],
    /// Associated AP of each user.
    pub assoc: Vec<usize>,
    /// SIC order per AP: user indices, strongest first.
    pub order: [Vec<usize>; N_APS],
    /// Thermal noise power per AP, watts.
    pub noise_power: [f64; N_APS],
}

impl Topology {
    /// Sample (or take fixed) user positions and derive gains, association and order.
    pub fn build<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<Topology> {
        let positions = match &config.ue_positions {
            Some(p) => p.clone(),
            None => place_users(config, rng)?,
        };
        Topology::from_positions(config, positions)
    }

    pub fn from_positions(config: &ScenarioConfig, ue_positions: Vec<Point>) -> Result<Topology> {
        let mut pathloss_gain: [Vec<f64>; N_APS] = Default::default();
        for (j, ap) in config.ap_positions.iter().enumerate() {
            pathloss_gain[j] = ue_positions
                .iter()
                .map(|ue| path_loss_db(distance(ap, ue) / 1_000.0).map(gain_from_db))
                .collect::<Result<_>>()?;
        }
        let noise = config.noise_power_w();
        let mut topo = Topology {
            ue_positions,
            ap_positions: config.ap_positions,
            pathloss_gain,
            assoc: Vec::new(),
            order: Default::default(),
            noise_power: [noise; N_APS],
        };
        topo.associate_and_order();
        Ok(topo)
    }

    pub fn n_users(&self) -> usize {
        self.ue_positions.len()
    }

    /// Recompute association (strongest average link) and the per-AP SIC
    /// order (descending average gain) from `pathloss_gain`.
    pub fn associate_and_order(&mut self) {
        self.assoc = associate(&self.pathloss_gain);
        for j in 0..N_APS {
            self.order[j] = decode_order(&self.pathloss_gain[j]);
        }
    }

    /// Users associated with AP `j`.
    pub fn associated(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.assoc.iter().enumerate().filter(move |(_, &a)| a == j).map(|(i, _)| i)
    }
}

fn distance(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Path loss in dB for a link of `d_km` kilometres.
pub fn path_loss_db(d_km: f64) -> Result<f64> {
    if !(d_km > 0.0) {
        return Err(domain(format!("path loss needs a positive distance, got {d_km} km")));
    }
    Ok(128.1 + 37.6 * d_km.log10())
}

pub fn gain_from_db(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

/// Uniform placement over the area, rejecting points closer than
/// `min_ap_distance_m` to any AP.
pub fn place_users<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<Vec<Point>> {
    let [w, h] = config.area_m;
    let mut users = Vec::with_capacity(config.n_users);
    let mut draws = 0u64;
    while users.len() < config.n_users {
        if draws == PLACEMENT_BUDGET {
            return Err(Error::PlacementBudget {
                draws,
                min_distance_m: config.min_ap_distance_m,
            });
        }
        draws += 1;
        let p = [rng.random::<f64>() * w, rng.random::<f64>() * h];
        if config
            .ap_positions
            .iter()
            .all(|ap| distance(ap, &p) >= config.min_ap_distance_m)
        {
            users.push(p);
        }
    }
    Ok(users)
}

/// Index of the AP with the larger gain for every user; ties go to the lower AP index.
pub fn associate(gains: &[Vec<f64>; N_APS]) -> Vec<usize> {
    (0..gains[0].len())
        .map(|i| if gains[1][i] > gains[0][i] { 1 } else { 0 })
        .collect()
}

/// User indices sorted by descending gain; ties keep the lower index first.
pub fn decode_order(gains: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..gains.len()).collect();
    idx.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]));
    idx
}

/// Inverse permutation: `rank[i]` is the 0-based position of user `i` in `order`.
pub fn ranks(order: &[usize]) -> Vec<usize> {
    let mut r = vec![0; order.len()];
    for (pos, &i) in order.iter().enumerate() {
        r[i] = pos;
    }
    r
}
