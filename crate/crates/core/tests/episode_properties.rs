use proptest::prelude::*;

use resilink_core::harness::{time_series_csv, EpisodeTrace};
use resilink_core::scenario::ScheduledBlockage;
use resilink_core::{run_episode, ScenarioConfig, StagePolicy};

const POLICIES: [StagePolicy; 4] = [StagePolicy::S1, StagePolicy::S1S2, StagePolicy::S1S2S3, StagePolicy::Tdma];

fn short(policy: StagePolicy, mean_blockage_s: f64) -> ScenarioConfig {
    let mu_b = 1.0 / mean_blockage_s;
    ScenarioConfig {
        stage_policy: policy,
        n_slots: 400,
        warmup_slots: 50,
        mu_b,
        kappa_b: mu_b * 0.05 / 0.95,
        ..ScenarioConfig::with_users(3, 4e6)
    }
}

fn check_trace(trace: &EpisodeTrace, config: &ScenarioConfig) -> Result<(), TestCaseError> {
    let n = trace.n_users();
    prop_assert_eq!(trace.records.len() as u64, config.n_slots);
    for (t, r) in trace.records.iter().enumerate() {
        prop_assert_eq!(r.t, t as u64);
    }

    // conservation per class
    for q in &trace.final_queues {
        prop_assert_eq!(q.cum_arrivals[0] - q.cum_departures[0], q.q_hc);
        prop_assert_eq!(q.cum_arrivals[1] - q.cum_departures[1], q.q_lc);
    }

    // detection lag: the estimate only disagrees on a fresh blockage
    let mut prev: Vec<u8> = Vec::new();
    for r in &trace.records {
        for (l, (&b, &bh)) in r.beta.iter().zip(&r.beta_hat).enumerate() {
            if b != bh {
                prop_assert!(b == 0 && bh == 1);
                if !prev.is_empty() {
                    prop_assert_eq!(prev[l], 1);
                }
            }
        }
        prev = r.beta.clone();
    }

    // stages respect the policy and never skip cooperation on the way up
    for w in trace.records.windows(2) {
        prop_assert!(!(w[0].stage == 1 && w[1].stage == 3), "1 -> 3 at slot {}", w[1].t);
    }
    let max_stage = trace.records.iter().map(|r| r.stage).max().unwrap_or(1);
    let m = trace.metrics();
    for v in [m.rho_mc, m.rho_coop[0], m.rho_coop[1], m.rho_opt, m.frac_s2, m.frac_s3] {
        prop_assert!((0.0..=1.0).contains(&v));
    }
    for v in m.exceed_hc.iter().chain(&m.exceed_lc) {
        prop_assert!((0.0..=1.0).contains(v));
    }
    match config.stage_policy {
        StagePolicy::S1 | StagePolicy::Tdma => {
            prop_assert_eq!(max_stage, 1);
            prop_assert_eq!(m.rho_coop, [0.0, 0.0]);
            prop_assert_eq!(m.rho_opt, 0.0);
        }
        StagePolicy::S1S2 => {
            prop_assert!(max_stage <= 2);
            prop_assert_eq!(m.rho_opt, 0.0);
        }
        StagePolicy::S1S2S3 => {}
    }
    if config.stage_policy == StagePolicy::Tdma {
        prop_assert!(trace.records.iter().all(|r| r.backlog.iter().all(|b| b.1 == 0)));
        prop_assert_eq!(m.rho_mc, 0.0);
    }

    // worst user is the per-run maximum
    let worst = m.tau_hc.iter().flatten().copied().reduce(f64::max);
    prop_assert_eq!(m.tau_hc_worst(), worst);
    let worst_ex = m.exceed_lc.iter().copied().fold(0.0, f64::max);
    prop_assert_eq!(m.exceed_lc_worst(), worst_ex);
    prop_assert_eq!(n, config.n_users);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn episodes_respect_their_invariants(seed in 0u64..1_000_000, policy in 0usize..4, mean_blockage in 0.05..0.5f64) {
        let config = short(POLICIES[policy], mean_blockage);
        let trace = run_episode(&config, seed).unwrap();
        check_trace(&trace, &config)?;
    }
}

#[test]
fn same_config_and_seed_give_identical_csv() {
    for policy in POLICIES {
        let config = short(policy, 0.3);
        let render = || {
            let mut buf = Vec::new();
            time_series_csv(&run_episode(&config, 99).unwrap(), &mut buf).unwrap();
            buf
        };
        assert_eq!(render(), render(), "{policy}");
    }
}

#[test]
fn different_seeds_give_different_episodes() {
    let config = short(StagePolicy::S1S2S3, 0.3);
    let a = run_episode(&config, 1).unwrap();
    let b = run_episode(&config, 2).unwrap();
    assert_ne!(a.records, b.records);
}

#[test]
fn time_series_header_matches_schema() {
    let config = ScenarioConfig {
        n_users: 2,
        ..short(StagePolicy::S1, 0.3)
    };
    let mut buf = Vec::new();
    time_series_csv(&run_episode(&config, 1).unwrap(), &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(
        header,
        "t,ue,q_hc,q_lc,stage,beta_1_1,beta_1_2,beta_2_1,beta_2_2,betahat_1_1,betahat_1_2,betahat_2_1,betahat_2_2,del_hc,del_lc"
    );
    assert_eq!(text.lines().count(), 1 + 2 * config.n_slots as usize);
}

#[test]
fn scripted_outages_replay_exactly() {
    let schedule = vec![
        ScheduledBlockage { ap: 2, ue: 1, start: 20, end: 40 },
        ScheduledBlockage { ap: 2, ue: 1, start: 35, end: 60 },
        ScheduledBlockage { ap: 1, ue: 2, start: 100, end: 100 },
    ];
    let config = ScenarioConfig {
        n_slots: 200,
        warmup_slots: 0,
        blockage_schedule: Some(schedule),
        ..ScenarioConfig::default()
    };
    let trace = run_episode(&config, 4).unwrap();
    let n = 2;
    for r in &trace.records {
        let blocked: Vec<bool> = r.beta.iter().map(|&b| b == 0).collect();
        assert_eq!(blocked[n], (20..=60).contains(&r.t), "link 2_1 at {}", r.t);
        assert_eq!(blocked[1], r.t == 100, "link 1_2 at {}", r.t);
        assert!(!blocked[0] && !blocked[n + 1]);
    }
}
