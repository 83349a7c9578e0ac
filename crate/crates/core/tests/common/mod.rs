//! Shared scenarios and reference oracles for the integration tests.
#![allow(dead_code)]

use resilink_core::optimizer::{success_probs_stage1, SuccessProbs};
use resilink_core::rng::{stream, STREAM_PLACEMENT};
use resilink_core::scenario::ScheduledBlockage;
use resilink_core::{ScenarioConfig, Topology};

/// Grid levels per power variable.
pub const GRID_LEVELS: usize = 200;

/// Two users on the default 4 MHz channel placed with `seed`.
pub fn two_user_topology(seed: u64) -> (ScenarioConfig, Topology) {
    let config = ScenarioConfig::default();
    let topology = Topology::build(&config, &mut stream(seed, STREAM_PLACEMENT)).expect("placement succeeds");
    (config, topology)
}

fn order(gains: &[f64]) -> Vec<usize> {
    let mut o: Vec<usize> = (0..gains.len()).collect();
    o.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));
    o
}

/// Separate-decoding max-min δ evaluated from first principles for two users.
pub struct TwoUserObjective {
    gains: [[f64; 2]; 2],
    noise: [f64; 2],
    assoc: [usize; 2],
    later: [[Vec<usize>; 2]; 2],
    /// ln-rate to δ factor per (user, class): s·(T/M)·B/(λ·ln 2).
    weight: [[f64; 2]; 2],
    p_max: f64,
}

impl TwoUserObjective {
    pub fn new(config: &ScenarioConfig, topology: &Topology) -> Self {
        assert_eq!(topology.n_users(), 2);
        let g = &topology.pathloss_gain;
        let gains = [[g[0][0], g[0][1]], [g[1][0], g[1][1]]];
        let orders = [order(&g[0]), order(&g[1])];
        let later = [0, 1].map(|j| {
            [0, 1].map(|i| {
                let pos = orders[j].iter().position(|&k| k == i).unwrap();
                orders[j][pos + 1..].to_vec()
            })
        });
        let probs: SuccessProbs = success_probs_stage1(
            config.blockage_prob(),
            config.kappa_b,
            config.slot_s,
            &orders,
            &topology.assoc,
            config.success_model,
        );
        let (lam_hc, lam_lc) = config.arrival_means();
        let base = config.slot_s / config.packet_bits * config.bandwidth_hz / std::f64::consts::LN_2;
        let weight = [0, 1].map(|i| [probs.p_hc_combined[i] * base / lam_hc, probs.p_lc[i] * base / lam_lc]);
        TwoUserObjective {
            gains,
            noise: topology.noise_power,
            assoc: [topology.assoc[0], topology.assoc[1]],
            later,
            weight,
            p_max: config.p_max_w(),
        }
    }

    /// SINRs `[hc_0, hc_1, lc_0, lc_1]` at watts `p = [hc_0, lc_0, hc_1, lc_1]`;
    /// HC is the worse of the two APs.
    pub fn sinrs(&self, p: [f64; 4]) -> [f64; 4] {
        let (hc, lc) = ([p[0], p[2]], [p[1], p[3]]);
        let g = &self.gains;
        let mut out = [f64::INFINITY; 4];
        for i in 0..2 {
            for j in 0..2 {
                let mut den = self.noise[j] + lc[0] * g[j][0] + lc[1] * g[j][1];
                for &k in &self.later[j][i] {
                    den += hc[k] * g[j][k];
                }
                out[i] = out[i].min(hc[i] * g[j][i] / den);
            }
            let a = self.assoc[i];
            let mut den = self.noise[a];
            let k = 1 - i;
            if self.assoc[k] != a || self.later[a][i].contains(&k) {
                den += lc[k] * g[a][k];
            }
            out[2 + i] = lc[i] * g[a][i] / den;
        }
        out
    }

    pub fn min_delta(&self, p: [f64; 4]) -> f64 {
        let s = self.sinrs(p);
        let w = &self.weight;
        [w[0][0] * s[0].ln_1p(), w[1][0] * s[1].ln_1p(), w[0][1] * s[2].ln_1p(), w[1][1] * s[3].ln_1p()]
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    /// Per-user power grid: `levels` uniform HC levels in `[0, P_max]` and
    /// `levels` LC levels (zero plus a geometric ladder from `1e-5·P_max` to
    /// `P_max`, since LC powers sit orders of magnitude below HC powers).
    pub fn grid_pairs(&self, levels: usize) -> Vec<(f64, f64)> {
        let hc: Vec<f64> = (0..levels).map(|k| self.p_max * k as f64 / (levels - 1) as f64).collect();
        let ratio = 1e5f64.powf(1.0 / (levels - 2) as f64);
        let lc: Vec<f64> = std::iter::once(0.0)
            .chain((0..levels - 1).map(|k| self.p_max * 1e-5 * ratio.powi(k as i32)))
            .collect();
        let mut pairs = Vec::new();
        for &h in &hc {
            for &l in &lc {
                if h + l <= self.p_max * (1.0 + 1e-12) {
                    pairs.push((h, l));
                }
            }
        }
        pairs
    }

    /// Exhaustive search over all combinations of both users' grid pairs.
    /// Returns the best min δ and its powers.
    pub fn grid_search(&self, levels: usize) -> (f64, [f64; 4]) {
        let pairs = self.grid_pairs(levels);
        let w = [self.weight[0][0], self.weight[1][0], self.weight[0][1], self.weight[1][1]];
        let mut best = 0.0;
        let mut arg = [0.0; 4];
        // SINR each row needs to beat the incumbent
        let mut need = [0.0; 4];
        for &(h0, l0) in &pairs {
            for &(h1, l1) in &pairs {
                let p = [h0, l0, h1, l1];
                let s = self.sinrs(p);
                if s.iter().zip(&need).all(|(s, n)| s > n) {
                    let v = self.min_delta(p);
                    if v > best {
                        best = v;
                        arg = p;
                        for k in 0..4 {
                            need[k] = (best / w[k]).exp_m1();
                        }
                    }
                }
            }
        }
        (best, arg)
    }
}

/// Fixed two-user layout and outage schedule for the queue-evolution scenario.
pub fn scripted_scenario() -> ScenarioConfig {
    let windows = [(2, 2, 66, 180), (1, 2, 95, 112), (2, 2, 195, 250), (1, 1, 437, 457)];
    ScenarioConfig {
        n_slots: 500,
        warmup_slots: 0,
        ue_positions: Some(vec![[30.0, 80.0], [122.0, 62.0]]),
        blockage_schedule: Some(
            windows
                .iter()
                .map(|&(ap, ue, start, end)| ScheduledBlockage { ap, ue, start, end })
                .collect(),
        ),
        ..ScenarioConfig::default()
    }
}
