//! Per-user HC/LC packet queues.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Class {
    Hc,
    Lc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ArrivalSample {
    pub a_hc: u64,
    pub a_lc: u64,
}

/// Mean (HC, LC) arrivals in packets per slot.
pub fn arrival_means(hc_fraction: f64, arrival_bps: f64, slot_s: f64, packet_bits: f64) -> (f64, f64) {
    let total = arrival_bps * slot_s / packet_bits;
    (hc_fraction * total, (1.0 - hc_fraction) * total)
}

pub fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite Poisson mean");
    d.sample(rng) as u64
}

pub fn sample_arrivals<R: Rng + ?Sized>(means: (f64, f64), rng: &mut R) -> ArrivalSample {
    ArrivalSample {
        a_hc: poisson(means.0, rng),
        a_lc: poisson(means.1, rng),
    }
}

/// Whole packets a message of rate `rate_bps` carries in one slot.
pub fn packets_for_rate(rate_bps: f64, slot_s: f64, packet_bits: f64) -> u64 {
    let p = (rate_bps * slot_s / packet_bits).floor();
    if p.is_finite() && p > 0.0 {
        p as u64
    } else {
        0
    }
}

/// `max(q - served, 0) + arrived`.
pub fn step_backlog(q: u64, served: u64, arrived: u64) -> u64 {
    q.saturating_sub(served) + arrived
}

/// Backlogs of one user with cumulative counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QueuePair {
    pub q_hc: u64,
    pub q_lc: u64,
    pub cum_arrivals: [u64; 2],
    pub cum_departures: [u64; 2],
}

impl QueuePair {
    pub fn get(&self, c: Class) -> u64 {
        match c {
            Class::Hc => self.q_hc,
            Class::Lc => self.q_lc,
        }
    }

    /// Serve up to `offered` packets per class; returns what actually left.
    pub fn serve(&mut self, offered: (u64, u64)) -> (u64, u64) {
        let l_hc = offered.0.min(self.q_hc);
        let l_lc = offered.1.min(self.q_lc);
        self.q_hc -= l_hc;
        self.q_lc -= l_lc;
        self.cum_departures[0] += l_hc;
        self.cum_departures[1] += l_lc;
        (l_hc, l_lc)
    }

    pub fn arrive(&mut self, a: ArrivalSample) {
        self.q_hc += a.a_hc;
        self.q_lc += a.a_lc;
        self.cum_arrivals[0] += a.a_hc;
        self.cum_arrivals[1] += a.a_lc;
    }
}

/// One full queue update; equivalent to `step_backlog` per class.
pub fn step_queue(queue: QueuePair, delivered: (u64, u64), arrivals: ArrivalSample) -> QueuePair {
    let mut q = queue;
    q.serve(delivered);
    q.arrive(arrivals);
    q
}

/// Mean delay in slots by Little's law; `None` when the class has no traffic.
pub fn little_delay(mean_backlog: f64, mean_arrivals: f64) -> Option<f64> {
    (mean_arrivals > 0.0).then(|| mean_backlog / mean_arrivals)
}

/// (HC, LC) delays in slots from a backlog history of `(q_hc, q_lc)` samples.
pub fn delay_metrics(history: &[(u64, u64)], means: (f64, f64)) -> (Option<f64>, Option<f64>) {
    assert!(!history.is_empty(), "delay of an empty history");
    let n = history.len() as f64;
    let hc = history.iter().map(|s| s.0 as f64).sum::<f64>() / n;
    let lc = history.iter().map(|s| s.1 as f64).sum::<f64>() / n;
    (little_delay(hc, means.0), little_delay(lc, means.1))
}

/// Fraction of samples strictly above each threshold.
pub fn exceedance(history: &[(u64, u64)], q_max_hc: f64, q_max_lc: f64) -> (f64, f64) {
    if history.is_empty() {
        return (0.0, 0.0);
    }
    let n = history.len() as f64;
    let hc = history.iter().filter(|s| s.0 as f64 > q_max_hc).count() as f64;
    let lc = history.iter().filter(|s| s.1 as f64 > q_max_lc).count() as f64;
    (hc / n, lc / n)
}
