//! Episode engine, Monte-Carlo sweeps and CSV output.

mod output;
mod sweep;

use std::collections::HashMap;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use output::{summary_csv, time_series_csv, write_summary_csv, write_time_series_csv};
pub use sweep::{run_sweep, run_sweep_with, Stat, SweepPoint, SweepSummary};

use crate::blockage::{initial_state, step_blockage, BlockageSchedule, LinkProcess, LinkState};
use crate::channel::{channel_from_draws, draw_nlos};
use crate::controller::{ControllerParams, CostCounters, SlotEvents, StageState};
use crate::error::Result;
use crate::optimizer::{solve_stage1, solve_stage3, Solution};
use crate::phy::{
    central_order, channel_vectors, coding_rates_central, coding_rates_separate, decode_central, decode_separate,
    decode_tdma, forwarded_noise, hc_targets, DecodingOutcome, PowerAllocation, SeparateContext,
};
use crate::queueing::{little_delay, sample_arrivals, ArrivalSample, QueuePair};
use crate::rng::{self, STREAM_ARRIVALS, STREAM_BLOCKAGE, STREAM_FADING, STREAM_PLACEMENT};
use crate::scenario::{decode_order, OrderMode, ScenarioConfig, ScheduledBlockage, StagePolicy, Topology};
use crate::N_APS;

/// State of one slot, logged after service and before new arrivals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub t: u64,
    pub stage: u8,
    /// True LoS indicators, `ap * n_users + ue`.
    pub beta: Vec<u8>,
    pub beta_hat: Vec<u8>,
    /// Packets left in each user's (HC, LC) buffer after this slot's service.
    /// Under TDMA the single queue is reported in the HC slot and LC is 0.
    pub backlog: Vec<(u64, u64)>,
    /// Packets that left each buffer this slot.
    pub delivered: Vec<(u64, u64)>,
}

/// Per-episode metrics over the slots after warm-up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub tau_hc: Vec<Option<f64>>,
    pub tau_lc: Vec<Option<f64>>,
    pub exceed_hc: Vec<f64>,
    pub exceed_lc: Vec<f64>,
    pub rho_mc: f64,
    pub rho_coop: [f64; N_APS],
    pub rho_opt: f64,
    pub frac_s2: f64,
    pub frac_s3: f64,
}

fn worst(v: &[Option<f64>]) -> Option<f64> {
    v.iter().flatten().copied().reduce(f64::max)
}

impl EpisodeMetrics {
    pub fn tau_hc_worst(&self) -> Option<f64> {
        worst(&self.tau_hc)
    }
    pub fn tau_lc_worst(&self) -> Option<f64> {
        worst(&self.tau_lc)
    }
    pub fn exceed_hc_worst(&self) -> f64 {
        self.exceed_hc.iter().copied().fold(0.0, f64::max)
    }
    pub fn exceed_lc_worst(&self) -> f64 {
        self.exceed_lc.iter().copied().fold(0.0, f64::max)
    }
    pub fn rho_coop_sum(&self) -> f64 {
        self.rho_coop.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub seed: u64,
    pub config_hash: u64,
    pub policy: StagePolicy,
    pub hc_fraction: f64,
    pub q_max: (f64, f64),
    pub arrival_means: (f64, f64),
    pub warmup_slots: u64,
    pub topology: Topology,
    pub baseline: Solution,
    pub records: Vec<SlotRecord>,
    /// Cost counters over the slots after warm-up.
    pub costs: CostCounters,
    pub final_queues: Vec<QueuePair>,
    /// Stage-3 solves whose optimum was not mean-stable.
    pub unstable_solves: u64,
}

impl EpisodeTrace {
    pub fn n_users(&self) -> usize {
        self.topology.n_users()
    }

    pub fn single_queue(&self) -> bool {
        self.policy == StagePolicy::Tdma
    }

    /// Per-class backlog of user `i` in record `r`. The TDMA queue is split by
    /// the HC fraction so both schemes can be compared against the same thresholds.
    pub fn class_backlog(&self, r: &SlotRecord, i: usize) -> (f64, f64) {
        let (h, l) = r.backlog[i];
        if self.single_queue() {
            let q = h as f64;
            (self.hc_fraction * q, (1.0 - self.hc_fraction) * q)
        } else {
            (h as f64, l as f64)
        }
    }

    /// Backlogs divided by their thresholds.
    pub fn normalized_backlog(&self, r: &SlotRecord, i: usize) -> (f64, f64) {
        let (h, l) = self.class_backlog(r, i);
        (h / self.q_max.0, l / self.q_max.1)
    }

    fn measured(&self) -> &[SlotRecord] {
        let w = (self.warmup_slots as usize).min(self.records.len());
        &self.records[w..]
    }

    pub fn metrics(&self) -> EpisodeMetrics {
        let recs = self.measured();
        let n = self.n_users();
        let len = recs.len().max(1) as f64;
        let mut m = EpisodeMetrics {
            tau_hc: Vec::with_capacity(n),
            tau_lc: Vec::with_capacity(n),
            exceed_hc: Vec::with_capacity(n),
            exceed_lc: Vec::with_capacity(n),
            rho_mc: self.costs.rho_mc(),
            rho_coop: [self.costs.rho_coop(0), self.costs.rho_coop(1)],
            rho_opt: self.costs.rho_opt(),
            frac_s2: recs.iter().filter(|r| r.stage == 2).count() as f64 / len,
            frac_s3: recs.iter().filter(|r| r.stage == 3).count() as f64 / len,
        };
        for i in 0..n {
            let (mut sum_h, mut sum_l, mut over_h, mut over_l) = (0.0, 0.0, 0u64, 0u64);
            for r in recs {
                let (h, l) = self.class_backlog(r, i);
                sum_h += h;
                sum_l += l;
                over_h += u64::from(h > self.q_max.0);
                over_l += u64::from(l > self.q_max.1);
            }
            m.tau_hc.push(little_delay(sum_h / len, self.arrival_means.0));
            m.tau_lc.push(little_delay(sum_l / len, self.arrival_means.1));
            m.exceed_hc.push(over_h as f64 / len);
            m.exceed_lc.push(over_l as f64 / len);
        }
        m
    }
}

/// FNV-1a over the JSON form of the config.
pub fn config_hash(config: &ScenarioConfig) -> u64 {
    let s = serde_json::to_string(config).expect("config serializes");
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Replace sampled blockage by a fixed outage schedule.
pub fn scripted_blockage(config: &ScenarioConfig, schedule: &[ScheduledBlockage]) -> ScenarioConfig {
    ScenarioConfig {
        blockage_schedule: Some(schedule.to_vec()),
        ..config.clone()
    }
}

/// Topology and stage-1 allocation of an episode; depends on the seed but
/// not on the stage policy.
pub fn prepare(config: &ScenarioConfig, seed: u64) -> Result<(Topology, Solution)> {
    config.validate()?;
    let topology = Topology::build(config, &mut rng::stream(seed, STREAM_PLACEMENT))?;
    let baseline = solve_stage1(&topology, config);
    Ok((topology, baseline))
}

/// Run one episode; fully determined by `(config, seed)`.
pub fn run_episode(config: &ScenarioConfig, seed: u64) -> Result<EpisodeTrace> {
    let (topology, baseline) = prepare(config, seed)?;
    Ok(run_prepared(config, seed, topology, baseline))
}

/// Run one episode on a prepared topology and stage-1 allocation.
pub fn run_prepared(config: &ScenarioConfig, seed: u64, topology: Topology, baseline: Solution) -> EpisodeTrace {
    Episode::new(config, seed, topology, baseline).run()
}

struct Episode<'a> {
    config: &'a ScenarioConfig,
    seed: u64,
    topology: Topology,
    baseline: Solution,
    process: LinkProcess,
    blockage_rngs: Vec<ChaCha8Rng>,
    fading_rngs: Vec<ChaCha8Rng>,
    arrival_rngs: Vec<ChaCha8Rng>,
}

impl<'a> Episode<'a> {
    fn new(config: &'a ScenarioConfig, seed: u64, topology: Topology, baseline: Solution) -> Self {
        let n = topology.n_users();
        let n_links = N_APS * n;
        let process = match &config.blockage_schedule {
            Some(s) => LinkProcess::Scripted(BlockageSchedule::new(n, s)),
            None => LinkProcess::Random {
                kappa_b: config.kappa_b,
                mu_b: config.mu_b,
                slot_s: config.slot_s,
            },
        };
        Episode {
            config,
            seed,
            topology,
            baseline,
            process,
            blockage_rngs: (0..n_links as u64).map(|l| rng::stream(seed, STREAM_BLOCKAGE + l)).collect(),
            fading_rngs: (0..n_links as u64).map(|l| rng::stream(seed, STREAM_FADING + l)).collect(),
            arrival_rngs: (0..n as u64).map(|i| rng::stream(seed, STREAM_ARRIVALS + i)).collect(),
        }
    }

    fn initial_links(&mut self) -> Vec<LinkState> {
        let p_b = self.config.blockage_prob();
        match &self.process {
            LinkProcess::Random { .. } => self.blockage_rngs.iter_mut().map(|r| initial_state(p_b, r)).collect(),
            LinkProcess::Scripted(s) => (0..self.blockage_rngs.len()).map(|l| LinkState::settled(s.beta(l, 0))).collect(),
        }
    }

    fn step_links(&mut self, links: &mut [LinkState], t: u64) {
        match &self.process {
            LinkProcess::Random { kappa_b, mu_b, slot_s } => {
                for (l, r) in links.iter_mut().zip(&mut self.blockage_rngs) {
                    *l = step_blockage(*l, *kappa_b, *mu_b, *slot_s, r);
                }
            }
            LinkProcess::Scripted(s) => {
                for (idx, l) in links.iter_mut().enumerate() {
                    *l = l.advance(s.beta(idx, t));
                }
            }
        }
    }

    fn run(mut self) -> EpisodeTrace {
        let cfg = self.config;
        let n = self.topology.n_users();
        let policy = cfg.stage_policy;
        let tdma = policy == StagePolicy::Tdma;
        let p_max = cfg.p_max_w();
        let means = cfg.arrival_means();
        let noise = self.topology.noise_power;
        let noise_fwd = forwarded_noise(&self.topology.pathloss_gain, noise, p_max, cfg.nq);
        let params = ControllerParams {
            policy,
            q_max_hc: cfg.q_max_hc,
            q_max_lc: cfg.q_max_lc,
            n_e: cfg.n_e,
            assoc: self.topology.assoc.clone(),
        };
        let mut state = StageState::new(self.baseline.allocation.clone(), N_APS * n);
        let mut solve_cache: HashMap<Vec<u8>, PowerAllocation> = HashMap::new();
        let mut unstable_solves = 0u64;

        let mut queues = vec![QueuePair::default(); n];
        let mut residual = vec![(0u64, 0u64); n];
        let mut carry = vec![(0u64, 0u64); n];
        let mut costs = CostCounters::new(n);
        let mut records = Vec::with_capacity(cfg.n_slots as usize);
        let mut links = self.initial_links();

        for t in 0..cfg.n_slots {
            if t > 0 {
                self.step_links(&mut links, t);
            }
            let nlos: Vec<_> = self.fading_rngs.iter_mut().map(|r| draw_nlos(r)).collect();
            let ch = channel_from_draws(&self.topology, &links, &nlos, cfg.rician_k);

            let mut opt_runs = 0;
            if !tdma {
                let topo = &self.topology;
                let ev = state.tick(t, &residual, &links, &params, |snapshot| {
                    let key: Vec<u8> = snapshot.iter().map(|l| l.beta_hat).collect();
                    solve_cache
                        .entry(key)
                        .or_insert_with(|| {
                            let sol = solve_stage3(topo, cfg, snapshot);
                            if !sol.report.stable {
                                unstable_solves += 1;
                            }
                            sol.allocation
                        })
                        .clone()
                });
                opt_runs = ev.optimizer_runs;
            }

            let gains = ch.gains();
            let gains_hat = ch.expected_gains();
            let outcome: Option<DecodingOutcome>;
            let mut offered: Vec<(u64, u64)>;
            if tdma {
                outcome = None;
                let pk = decode_tdma(&gains, &gains_hat, &self.topology.assoc, p_max, noise, cfg.bandwidth_hz, cfg.slot_s, cfg.packet_bits);
                offered = pk.into_iter().map(|k| (k, 0)).collect();
            } else {
                let alloc = &state.active_allocation;
                let out = if state.central_decoding {
                    let h_hat = channel_vectors(&ch.h_hat);
                    let order = match cfg.order_mode {
                        OrderMode::PerSlot => central_order(&h_hat),
                        OrderMode::Average => {
                            let g = &self.topology.pathloss_gain;
                            decode_order(&(0..n).map(|i| g[0][i] + g[1][i]).collect::<Vec<_>>())
                        }
                    };
                    let rates = coding_rates_central(&h_hat, alloc, noise_fwd, &order, cfg.bandwidth_hz);
                    decode_central(&channel_vectors(&ch.h), alloc, &rates, noise_fwd, &order, cfg.bandwidth_hz, cfg.slot_s, cfg.packet_bits)
                } else {
                    let order = match cfg.order_mode {
                        OrderMode::PerSlot => [decode_order(&gains_hat[0]), decode_order(&gains_hat[1])],
                        OrderMode::Average => self.topology.order.clone(),
                    };
                    let beta_hat = [0, 1].map(|j| (0..n).map(|i| links[j * n + i].beta_hat).collect::<Vec<_>>());
                    let targets = hc_targets(&beta_hat, &self.topology.assoc);
                    let expected = SeparateContext {
                        gains: &gains_hat,
                        noise,
                        noise_forwarded: noise_fwd,
                        order: &order,
                        assoc: &self.topology.assoc,
                        hc_target: &targets,
                        modes: state.ap_modes(),
                        bandwidth_hz: cfg.bandwidth_hz,
                    };
                    let rates = coding_rates_separate(&expected, alloc);
                    let realized = SeparateContext { gains: &gains, ..expected };
                    decode_separate(&realized, alloc, &rates, cfg.slot_s, cfg.packet_bits)
                };
                offered = (0..n).map(|i| (out.delivered_hc[i], out.delivered_lc[i])).collect();
                for (i, o) in offered.iter_mut().enumerate() {
                    o.0 += carry[i].0;
                    o.1 += carry[i].1;
                    carry[i] = (out.deferred_hc[i], out.deferred_lc[i]);
                }
                outcome = Some(out);
            }

            let mut delivered = Vec::with_capacity(n);
            for i in 0..n {
                delivered.push(queues[i].serve(offered[i]));
                residual[i] = (queues[i].q_hc, queues[i].q_lc);
                let a = sample_arrivals(means, &mut self.arrival_rngs[i]);
                queues[i].arrive(if tdma {
                    ArrivalSample {
                        a_hc: a.a_hc + a.a_lc,
                        a_lc: 0,
                    }
                } else {
                    a
                });
            }

            if t >= cfg.warmup_slots {
                let ev = match &outcome {
                    Some(out) => SlotEvents::observe(&state, out, &self.topology.assoc, opt_runs),
                    None => SlotEvents::default(),
                };
                costs.update(&ev);
            }
            records.push(SlotRecord {
                t,
                stage: state.stage().number(),
                beta: links.iter().map(|l| l.beta).collect(),
                beta_hat: links.iter().map(|l| l.beta_hat).collect(),
                backlog: residual.clone(),
                delivered,
            });
        }

        EpisodeTrace {
            seed: self.seed,
            config_hash: config_hash(cfg),
            policy,
            hc_fraction: cfg.hc_fraction,
            q_max: (cfg.q_max_hc, cfg.q_max_lc),
            arrival_means: means,
            warmup_slots: cfg.warmup_slots,
            topology: self.topology,
            baseline: self.baseline,
            records,
            costs,
            final_queues: queues,
            unstable_solves,
        }
    }
}
