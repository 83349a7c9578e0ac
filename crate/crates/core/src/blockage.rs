//! Per-link LoS blockage as an alternating renewal process with one-slot detection lag.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::scenario::ScheduledBlockage;

/// True and detected LoS indicators of one link (1 = LoS available).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkState {
    pub beta: u8,
    pub beta_prev: u8,
    pub beta_hat: u8,
}

impl LinkState {
    /// A link observed in state `beta` for at least one slot.
    pub fn settled(beta: u8) -> Self {
        LinkState {
            beta,
            beta_prev: beta,
            beta_hat: beta,
        }
    }

    /// Move to the next slot with the given true state.
    pub fn advance(self, beta: u8) -> Self {
        LinkState {
            beta,
            beta_prev: self.beta,
            beta_hat: detect(self.beta, beta),
        }
    }

    pub fn blocked(&self) -> bool {
        self.beta == 0
    }

    pub fn detected_blocked(&self) -> bool {
        self.beta_hat == 0
    }
}

/// A fresh blockage is seen one slot late; everything else is seen immediately.
pub fn detect(beta_prev: u8, beta: u8) -> u8 {
    if beta_prev == 1 && beta == 0 {
        1
    } else {
        beta
    }
}

/// Probability of an unblocked link becoming blocked within one slot.
pub fn block_prob(kappa_b: f64, slot_s: f64) -> f64 {
    -(-kappa_b * slot_s).exp_m1()
}

/// Probability of a blocked link recovering within one slot.
pub fn unblock_prob(mu_b: f64, slot_s: f64) -> f64 {
    -(-mu_b * slot_s).exp_m1()
}

pub fn step_blockage<R: Rng + ?Sized>(state: LinkState, kappa_b: f64, mu_b: f64, slot_s: f64, rng: &mut R) -> LinkState {
    let u: f64 = rng.random();
    let beta = if state.beta == 1 {
        u8::from(u >= block_prob(kappa_b, slot_s))
    } else {
        u8::from(u < unblock_prob(mu_b, slot_s))
    };
    state.advance(beta)
}

/// Long-run fraction of time a link is blocked.
pub fn steady_state_prob(kappa_b: f64, mu_b: f64) -> Result<f64> {
    if !(kappa_b + mu_b > 0.0) || kappa_b < 0.0 || mu_b < 0.0 {
        return Err(domain(format!("need non-negative rates with positive sum, got ({kappa_b}, {mu_b})")));
    }
    Ok(kappa_b / (kappa_b + mu_b))
}

/// Blocking and unblocking rates giving blockage probability `p_b` with the
/// given mean blockage duration.
pub fn rates_for_target(p_b: f64, mean_duration_s: f64) -> Result<(f64, f64)> {
    if !(p_b > 0.0 && p_b < 1.0) {
        return Err(domain(format!("blockage probability must lie in (0, 1), got {p_b}")));
    }
    if !(mean_duration_s > 0.0) {
        return Err(domain(format!("mean blockage duration must be positive, got {mean_duration_s}")));
    }
    let mu = 1.0 / mean_duration_s;
    Ok((mu * p_b / (1.0 - p_b), mu))
}

/// Draw a steady-state initial link: LoS with probability `1 - p_b`.
pub fn initial_state<R: Rng + ?Sized>(p_b: f64, rng: &mut R) -> LinkState {
    LinkState::settled(u8::from(rng.random::<f64>() >= p_b))
}

/// Merged, sorted outage windows for every link, indexed `ap * n_users + ue`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BlockageSchedule {
    windows: Vec<Vec<(u64, u64)>>,
}

impl BlockageSchedule {
    pub fn new(n_users: usize, entries: &[ScheduledBlockage]) -> Self {
        let mut windows = vec![Vec::new(); crate::N_APS * n_users];
        for e in entries {
            windows[(e.ap - 1) * n_users + (e.ue - 1)].push((e.start, e.end));
        }
        for w in &mut windows {
            *w = merge_windows(std::mem::take(w));
        }
        BlockageSchedule { windows }
    }

    pub fn windows(&self, link: usize) -> &[(u64, u64)] {
        &self.windows[link]
    }

    /// True LoS indicator of `link` at slot `t`.
    pub fn beta(&self, link: usize, t: u64) -> u8 {
        u8::from(!self.windows[link].iter().any(|&(s, e)| s <= t && t <= e))
    }
}

/// Merge overlapping or adjacent inclusive windows.
pub fn merge_windows(mut w: Vec<(u64, u64)>) -> Vec<(u64, u64)> {
    w.sort_unstable();
    let mut out: Vec<(u64, u64)> = Vec::with_capacity(w.len());
    for (s, e) in w {
        match out.last_mut() {
            Some(last) if s <= last.1.saturating_add(1) => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

/// Where the true LoS indicator of a link comes from.
#[derive(Debug, Clone)]
pub enum LinkProcess {
    Random { kappa_b: f64, mu_b: f64, slot_s: f64 },
    Scripted(BlockageSchedule),
}
