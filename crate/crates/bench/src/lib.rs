//! Shared fixtures for the criterion benchmarks.

use resilink_core::optimizer::{success_probs_stage1, LinkBudget, PowerProblem};
use resilink_core::scenario::{decode_order, ScenarioConfig, Topology};
use resilink_core::rng;

/// Eight users on a 20 MHz channel with a fixed seed.
pub fn dense_config() -> ScenarioConfig {
    ScenarioConfig {
        n_slots: 2_000,
        warmup_slots: 200,
        ..ScenarioConfig::with_users(8, 20e6)
    }
}

pub fn topology(config: &ScenarioConfig, seed: u64) -> Topology {
    Topology::build(config, &mut rng::stream(seed, rng::STREAM_PLACEMENT)).expect("placement succeeds")
}

/// The stage-1 power problem of `config` at `seed`.
pub fn stage1_problem(config: &ScenarioConfig, seed: u64) -> PowerProblem {
    let topo = topology(config, seed);
    let g = &topo.pathloss_gain;
    let order = [decode_order(&g[0]), decode_order(&g[1])];
    let probs = success_probs_stage1(config.blockage_prob(), config.kappa_b, config.slot_s, &order, &topo.assoc, config.success_model);
    PowerProblem::stage1(g, topo.noise_power, &topo.assoc, &probs, &LinkBudget::from_config(config))
}
