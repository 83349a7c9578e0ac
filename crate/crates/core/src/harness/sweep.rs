use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{prepare, run_prepared, EpisodeMetrics};
use crate::blockage::rates_for_target;
use crate::error::Result;
use crate::rng::derive_seed;
use crate::scenario::{ScenarioConfig, StagePolicy};

/// Monte-Carlo mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub se: f64,
}

impl Stat {
    /// NaN when no sample is available.
    pub fn of(samples: &[f64]) -> Stat {
        let n = samples.len() as f64;
        if samples.is_empty() {
            return Stat { mean: f64::NAN, se: f64::NAN };
        }
        let mean = samples.iter().sum::<f64>() / n;
        let se = if samples.len() > 1 {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Stat { mean, se }
    }
}

/// Aggregate of one (mean blockage duration, policy) point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub duration_ms: f64,
    pub policy: StagePolicy,
    pub n_runs: usize,
    pub tau_hc_worst: Stat,
    pub tau_lc_worst: Stat,
    pub exceed_hc: Stat,
    pub exceed_lc: Stat,
    pub rho_mc: Stat,
    pub rho_coop_sum: Stat,
    pub rho_opt: Stat,
    pub frac_s2: Stat,
    pub frac_s3: Stat,
}

impl SweepPoint {
    fn aggregate(duration_ms: f64, policy: StagePolicy, runs: &[&EpisodeMetrics]) -> Self {
        let col = |f: &dyn Fn(&EpisodeMetrics) -> Option<f64>| Stat::of(&runs.iter().filter_map(|m| f(m)).collect::<Vec<_>>());
        SweepPoint {
            duration_ms,
            policy,
            n_runs: runs.len(),
            tau_hc_worst: col(&|m| m.tau_hc_worst()),
            tau_lc_worst: col(&|m| m.tau_lc_worst()),
            exceed_hc: col(&|m| Some(m.exceed_hc_worst())),
            exceed_lc: col(&|m| Some(m.exceed_lc_worst())),
            rho_mc: col(&|m| Some(m.rho_mc)),
            rho_coop_sum: col(&|m| Some(m.rho_coop_sum())),
            rho_opt: col(&|m| Some(m.rho_opt)),
            frac_s2: col(&|m| Some(m.frac_s2)),
            frac_s3: col(&|m| Some(m.frac_s3)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub p_b: f64,
    pub points: Vec<SweepPoint>,
}

impl SweepSummary {
    pub fn point(&self, duration_ms: f64, policy: StagePolicy) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.duration_ms == duration_ms && p.policy == policy)
    }
}

/// Sweep at the base config's blockage probability.
pub fn run_sweep(base: &ScenarioConfig, durations_ms: &[f64], policies: &[StagePolicy], n_runs: usize) -> Result<SweepSummary> {
    run_sweep_with(base, base.blockage_prob(), durations_ms, policies, n_runs)
}

/// For every mean blockage duration, set the blocking rates for probability
/// `p_b` and run `n_runs` episodes per policy. Run `r` uses seed
/// `derive_seed(base.seed, r)` at every sweep point, so points differ only in
/// the swept parameter.
pub fn run_sweep_with(base: &ScenarioConfig, p_b: f64, durations_ms: &[f64], policies: &[StagePolicy], n_runs: usize) -> Result<SweepSummary> {
    base.validate()?;
    let configs: Vec<ScenarioConfig> = durations_ms
        .iter()
        .map(|&d| {
            let (kappa_b, mu_b) = rates_for_target(p_b, d / 1e3)?;
            Ok(ScenarioConfig {
                kappa_b,
                mu_b,
                blockage_schedule: None,
                ..base.clone()
            })
        })
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..configs.len()).flat_map(|d| (0..n_runs).map(move |r| (d, r))).collect();
    let results: Vec<Vec<EpisodeMetrics>> = jobs
        .par_iter()
        .map(|&(d, r)| -> Result<Vec<EpisodeMetrics>> {
            let seed = derive_seed(base.seed, r as u64);
            let (topology, baseline) = prepare(&configs[d], seed)?;
            Ok(policies
                .iter()
                .map(|&policy| {
                    let cfg = ScenarioConfig {
                        stage_policy: policy,
                        ..configs[d].clone()
                    };
                    run_prepared(&cfg, seed, topology.clone(), baseline.clone()).metrics()
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut points = Vec::new();
    for (d, &duration_ms) in durations_ms.iter().enumerate() {
        for (k, &policy) in policies.iter().enumerate() {
            let runs: Vec<&EpisodeMetrics> = jobs
                .iter()
                .zip(&results)
                .filter(|((dd, _), _)| *dd == d)
                .map(|(_, m)| &m[k])
                .collect();
            points.push(SweepPoint::aggregate(duration_ms, policy, &runs));
        }
    }
    Ok(SweepSummary { p_b, points })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stat_values() {
        let s = Stat::of(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.se - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(Stat::of(&[]).mean.is_nan());
        assert_eq!(Stat::of(&[4.0]).se, 0.0);
    }
}
