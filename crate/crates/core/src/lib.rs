//! Criticality-aware uplink simulation under stochastic line-of-sight blockage.
//!
//! Users superpose a high-criticality (HC) stream, decoded at both access
//! points as a rate-splitting common message, and a low-criticality (LC)
//! private stream decoded at the associated access point only. An
//! event-triggered controller escalates from separate decoding (stage 1) to
//! one-sided AP cooperation (stage 2) and finally to central decoding with
//! re-optimized transmit powers (stage 3) when blockage drives queues over
//! their thresholds.
//!
//! The crate is organised bottom-up:
//!
//! * [`scenario`]: geometry, path loss, association, decoding order
//! * [`blockage`]: alternating-renewal LoS process with detection lag
//! * [`channel`]: Rician block-fading realizations
//! * [`queueing`]: per-user HC/LC buffers and delay metrics
//! * [`phy`]: SINR, coding-rate and SIC decoding for all three stages and TDMA
//! * [`optimizer`]: max-min inverse-utilization power allocation (SCA + quadratic transform)
//! * [`controller`]: the stage state machine and cost counters
//! * [`harness`]: episode engine, Monte-Carlo sweeps and CSV output

pub mod blockage;
pub mod channel;
pub mod controller;
mod error;
pub mod harness;
pub mod optimizer;
pub mod phy;
pub mod queueing;
pub mod rng;
pub mod scenario;

pub use controller::{CostCounters, Stage, StageState};
pub use error::{Error, Result};
pub use harness::{run_episode, run_sweep, EpisodeTrace, SweepSummary};
pub use optimizer::{SolverReport, StabilityTargets, SuccessProbs};
pub use phy::{CodingRates, DecodingOutcome, PowerAllocation};
pub use queueing::{Class, QueuePair};
pub use scenario::{ScenarioConfig, StagePolicy, SuccessModel, Topology};

/// Number of access points. The model is restricted to the two-AP case.
pub const N_APS: usize = 2;

/// Index of the other access point.
#[inline]
pub fn other_ap(j: usize) -> usize {
    1 - j
}
