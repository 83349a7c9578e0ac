//! Block-fading Rician channels with LoS blockage.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::blockage::LinkState;
use crate::scenario::Topology;
use crate::N_APS;

/// Realized and expected channel coefficients of one slot, `[ap][ue]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSlot {
    pub h: [Vec<Complex64>; N_APS],
    pub h_hat: [Vec<Complex64>; N_APS],
    pub avg_gain: [Vec<f64>; N_APS],
}

impl ChannelSlot {
    pub fn n_users(&self) -> usize {
        self.h[0].len()
    }

    /// |h|² for every link.
    pub fn gains(&self) -> [Vec<f64>; N_APS] {
        self.h.clone().map(|v| v.iter().map(|c| c.norm_sqr()).collect())
    }

    /// |ĥ|² for every link.
    pub fn expected_gains(&self) -> [Vec<f64>; N_APS] {
        self.h_hat.clone().map(|v| v.iter().map(|c| c.norm_sqr()).collect())
    }
}

/// Amplitude weights (LoS, NLoS) for Rician factor `k`; `k = ∞` is pure LoS.
pub fn rician_weights(k: f64) -> (f64, f64) {
    if k.is_infinite() {
        (1.0, 0.0)
    } else {
        ((k / (k + 1.0)).sqrt(), (1.0 / (k + 1.0)).sqrt())
    }
}

/// Circularly-symmetric complex Gaussian with unit variance.
pub fn draw_nlos<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Combine a path-loss gain, LoS indicator and NLoS draw into a coefficient.
pub fn coefficient(pathloss_gain: f64, beta: u8, nlos: Complex64, k: f64) -> Complex64 {
    let (los, nl) = rician_weights(k);
    (Complex64::new(f64::from(beta) * los, 0.0) + nlos * nl) * pathloss_gain.sqrt()
}

/// Build the slot's channel from per-link NLoS draws. `links` and `nlos` are
/// indexed `ap * n_users + ue`.
pub fn channel_from_draws(topology: &Topology, links: &[LinkState], nlos: &[Complex64], k: f64) -> ChannelSlot {
    let n = topology.n_users();
    let mut h: [Vec<Complex64>; N_APS] = Default::default();
    let mut h_hat: [Vec<Complex64>; N_APS] = Default::default();
    for j in 0..N_APS {
        for i in 0..n {
            let l = j * n + i;
            let g = topology.pathloss_gain[j][i];
            h[j].push(coefficient(g, links[l].beta, nlos[l], k));
            h_hat[j].push(coefficient(g, links[l].beta_hat, nlos[l], k));
        }
    }
    ChannelSlot {
        h,
        h_hat,
        avg_gain: average_gains(topology),
    }
}

/// Draw one NLoS sample per link from its own stream and build the slot.
pub fn realize_channel<R: Rng>(topology: &Topology, links: &[LinkState], k: f64, link_rngs: &mut [R]) -> ChannelSlot {
    let nlos: Vec<Complex64> = link_rngs.iter_mut().map(|r| draw_nlos(r)).collect();
    channel_from_draws(topology, links, &nlos, k)
}

/// Average power gains used by the optimizers.
pub fn average_gains(topology: &Topology) -> [Vec<f64>; N_APS] {
    topology.pathloss_gain.clone()
}

/// Average gains with detected-blocked links reduced to their NLoS power share.
pub fn average_gains_with_blockage(topology: &Topology, links: &[LinkState], k: f64) -> [Vec<f64>; N_APS] {
    let n = topology.n_users();
    let nlos_share = if k.is_infinite() { 0.0 } else { 1.0 / (k + 1.0) };
    let mut g = average_gains(topology);
    for (j, row) in g.iter_mut().enumerate() {
        for (i, v) in row.iter_mut().enumerate() {
            if links[j * n + i].beta_hat == 0 {
                *v *= nlos_share;
            }
        }
    }
    g
}
