mod common;

use proptest::prelude::*;

use common::{two_user_topology, TwoUserObjective};
use resilink_core::blockage::LinkState;
use resilink_core::channel::average_gains;
use resilink_core::optimizer::{solve_stage1, solve_stage3, success_probs_stage1, LinkBudget, PowerProblem, Solution};
use resilink_core::rng::{stream, STREAM_PLACEMENT};
use resilink_core::scenario::decode_order;
use resilink_core::{ScenarioConfig, Topology};

fn topology(n_users: usize, seed: u64) -> (ScenarioConfig, Topology) {
    let config = ScenarioConfig::with_users(n_users, 4e6);
    let topology = Topology::build(&config, &mut stream(seed, STREAM_PLACEMENT)).unwrap();
    (config, topology)
}

fn check_report(sol: &Solution, p_max: f64) -> Result<(), TestCaseError> {
    let r = &sol.report;
    prop_assert!(r.constraint_residual <= 1e-6, "residual {}", r.constraint_residual);
    for w in r.inner_trace.windows(2) {
        prop_assert!(w[1] >= w[0] - 1e-8, "inner trace {:?}", r.inner_trace);
    }
    for w in r.objective_trace.windows(2) {
        prop_assert!(w[1] >= w[0] - 1e-8, "objective trace {:?}", r.objective_trace);
    }
    let a = &sol.allocation;
    for i in 0..a.n_users() {
        prop_assert!(a.p_hc[i] >= 0.0 && a.p_lc[i] >= 0.0);
        prop_assert!(a.p_hc[i] + a.p_lc[i] <= p_max * (1.0 + 1e-6));
    }
    let t = &sol.targets;
    let smallest = t.delta_hc.iter().chain(&t.delta_lc).copied().fold(f64::INFINITY, f64::min);
    prop_assert_eq!(smallest, t.min());
    prop_assert_eq!(r.stable, t.min() > 1.0);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn stage1_solutions_are_feasible_and_monotone(n_users in 1usize..=4, seed in 0u64..10_000) {
        let (config, topo) = topology(n_users, seed);
        check_report(&solve_stage1(&topo, &config), config.p_max_w())?;
    }

    #[test]
    fn stage3_solutions_are_feasible_and_monotone(n_users in 1usize..=3, seed in 0u64..10_000, mask in prop::collection::vec(any::<bool>(), 6)) {
        let (config, topo) = topology(n_users, seed);
        let links: Vec<LinkState> = mask[..2 * n_users].iter().map(|&b| LinkState::settled(u8::from(b))).collect();
        check_report(&solve_stage3(&topo, &config, &links), config.p_max_w())?;
    }

    #[test]
    fn two_user_optimum_is_locally_unimprovable(seed in 0u64..10_000, dirs in prop::collection::vec(-1.0..1.0f64, 40)) {
        let (config, topo) = two_user_topology(seed);
        let sol = solve_stage1(&topo, &config);
        let oracle = TwoUserObjective::new(&config, &topo);
        let a = &sol.allocation;
        let x = [a.p_hc[0], a.p_lc[0], a.p_hc[1], a.p_lc[1]];
        let best = oracle.min_delta(x);
        prop_assert!((best - sol.targets.min()).abs() <= 1e-9 * best.abs());
        let p_max = config.p_max_w();
        for d in dirs.chunks(4) {
            // multiplicative moves keep tiny LC powers meaningful
            let mut y = [0.0; 4];
            for k in 0..4 {
                y[k] = x[k] * (1.0 + 0.02 * d[k]);
            }
            for u in 0..2 {
                let s = y[2 * u] + y[2 * u + 1];
                if s > p_max {
                    y[2 * u] *= p_max / s;
                    y[2 * u + 1] *= p_max / s;
                }
            }
            let v = oracle.min_delta(y);
            prop_assert!(v <= best * (1.0 + 1e-4), "perturbation improves {best} to {v}");
        }
    }
}

#[test]
fn scaling_gains_and_noise_together_changes_nothing() {
    let (config, topo) = topology(3, 42);
    let gains = average_gains(&topo);
    let order = [decode_order(&gains[0]), decode_order(&gains[1])];
    let probs = success_probs_stage1(config.blockage_prob(), config.kappa_b, config.slot_s, &order, &topo.assoc, config.success_model);
    let budget = LinkBudget::from_config(&config);
    let base = PowerProblem::stage1(&gains, topo.noise_power, &topo.assoc, &probs, &budget).solve();
    for c in [1e-3, 7.5, 1e4] {
        let scaled_gains = gains.clone().map(|g| g.iter().map(|v| v * c).collect::<Vec<f64>>());
        let scaled_noise = topo.noise_power.map(|n| n * c);
        let sol = PowerProblem::stage1(&scaled_gains, scaled_noise, &topo.assoc, &probs, &budget).solve();
        assert!((sol.targets.min() / base.targets.min() - 1.0).abs() < 1e-6, "scale {c}");
        for i in 0..3 {
            assert!((sol.allocation.p_hc[i] - base.allocation.p_hc[i]).abs() <= 1e-6 * config.p_max_w());
            assert!((sol.allocation.p_lc[i] - base.allocation.p_lc[i]).abs() <= 1e-6 * config.p_max_w());
        }
    }
}

#[test]
fn at_least_one_stability_constraint_is_tight() {
    for seed in 0..5 {
        let (config, topo) = topology(3, seed);
        let sol = solve_stage1(&topo, &config);
        let t = &sol.targets;
        let min = t.min();
        let tight = t.delta_hc.iter().chain(&t.delta_lc).filter(|&&d| (d - min).abs() <= 1e-6 * min).count();
        assert!(tight >= 1);
        // the max-min optimum balances more than a single user
        let per_user: Vec<f64> = (0..3).map(|i| t.delta_hc[i].min(t.delta_lc[i])).collect();
        let balanced = per_user.iter().filter(|&&d| (d - min).abs() <= 1e-3 * min).count();
        assert!(balanced >= 2, "seed {seed}: {per_user:?}");
    }
}
