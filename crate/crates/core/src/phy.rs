//! Decoding math for separate SIC, one-sided cooperation, central decoding and TDMA.
//!
//! Separate and cooperative decoding share one successive-cancellation loop:
//! each receive branch sees every message that has not been cancelled yet as
//! interference, and a cooperative AP sums the per-branch SINRs (MRC).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::queueing::{packets_for_rate, Class};
use crate::scenario::decode_order;
use crate::{other_ap, N_APS};

/// Relative slack when comparing an achievable rate against a coding rate.
pub const RATE_TOLERANCE: f64 = 1e-12;

/// Transmit powers in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub p_hc: Vec<f64>,
    pub p_lc: Vec<f64>,
}

impl PowerAllocation {
    pub fn equal_split(n_users: usize, p_max: f64) -> Self {
        PowerAllocation {
            p_hc: vec![p_max / 2.0; n_users],
            p_lc: vec![p_max / 2.0; n_users],
        }
    }

    pub fn n_users(&self) -> usize {
        self.p_hc.len()
    }

    pub fn get(&self, ue: usize, class: Class) -> f64 {
        match class {
            Class::Hc => self.p_hc[ue],
            Class::Lc => self.p_lc[ue],
        }
    }
}

/// Per-message coding rates in bit/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodingRates {
    pub r_hc: Vec<f64>,
    pub r_lc: Vec<f64>,
}

impl CodingRates {
    pub fn get(&self, ue: usize, class: Class) -> f64 {
        match class {
            Class::Hc => self.r_hc[ue],
            Class::Lc => self.r_lc[ue],
        }
    }
}

/// Result of one slot of decoding. `delivered_*` are credited in the same
/// slot; `deferred_*` come from forwarded signals and are credited one slot later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingOutcome {
    pub eta_hc: [Vec<u8>; N_APS],
    pub eta_lc: Vec<u8>,
    pub delivered_hc: Vec<u64>,
    pub delivered_lc: Vec<u64>,
    pub deferred_hc: Vec<u64>,
    pub deferred_lc: Vec<u64>,
}

impl DecodingOutcome {
    pub fn empty(n: usize) -> Self {
        DecodingOutcome {
            eta_hc: [vec![0; n], vec![0; n]],
            eta_lc: vec![0; n],
            delivered_hc: vec![0; n],
            delivered_lc: vec![0; n],
            deferred_hc: vec![0; n],
            deferred_lc: vec![0; n],
        }
    }

    /// HC decoded at any AP.
    pub fn hc_success(&self, ue: usize) -> bool {
        self.eta_hc.iter().any(|e| e[ue] == 1)
    }
}

pub fn rate(bandwidth_hz: f64, sinr: f64) -> f64 {
    bandwidth_hz * sinr.ln_1p() / std::f64::consts::LN_2
}

pub fn decodable(achievable: f64, coding_rate: f64) -> bool {
    achievable >= coding_rate * (1.0 - RATE_TOLERANCE)
}

/// One message stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Msg {
    pub ue: usize,
    pub class: Class,
}

impl Msg {
    pub fn hc(ue: usize) -> Self {
        Msg { ue, class: Class::Hc }
    }
    pub fn lc(ue: usize) -> Self {
        Msg { ue, class: Class::Lc }
    }
}

/// A receive branch: per-user power gains and noise variance.
#[derive(Debug, Clone, Copy)]
pub struct Branch<'a> {
    pub gain: &'a [f64],
    pub noise: f64,
}

/// Messages already removed by SIC.
#[derive(Debug, Clone)]
pub struct Cancelled {
    hc: Vec<bool>,
    lc: Vec<bool>,
}

impl Cancelled {
    pub fn none(n: usize) -> Self {
        Cancelled {
            hc: vec![false; n],
            lc: vec![false; n],
        }
    }

    pub fn set(&mut self, m: Msg) {
        match m.class {
            Class::Hc => self.hc[m.ue] = true,
            Class::Lc => self.lc[m.ue] = true,
        }
    }

    pub fn is(&self, m: Msg) -> bool {
        match m.class {
            Class::Hc => self.hc[m.ue],
            Class::Lc => self.lc[m.ue],
        }
    }
}

/// Interference plus noise on `branch` for message `m`.
pub fn interference(branch: Branch, p: &PowerAllocation, cancelled: &Cancelled, m: Msg) -> f64 {
    let mut s = branch.noise;
    for k in 0..p.n_users() {
        if !cancelled.hc[k] && !(m.class == Class::Hc && m.ue == k) {
            s += branch.gain[k] * p.p_hc[k];
        }
        if !cancelled.lc[k] && !(m.class == Class::Lc && m.ue == k) {
            s += branch.gain[k] * p.p_lc[k];
        }
    }
    s
}

/// SINR of `m`, summed over branches.
pub fn sinr(branches: &[Branch], p: &PowerAllocation, cancelled: &Cancelled, m: Msg) -> f64 {
    branches
        .iter()
        .map(|b| b.gain[m.ue] * p.get(m.ue, m.class) / interference(*b, p, cancelled, m))
        .sum()
}

/// Run SIC over `schedule`. With `rates = None` every attempt is assumed to
/// succeed (expected-SINR evaluation). Returns `(msg, sinr, eta)` per attempt.
pub fn run_sic(
    branches: &[Branch],
    p: &PowerAllocation,
    schedule: &[Msg],
    rates: Option<(&CodingRates, f64)>,
) -> Vec<(Msg, f64, bool)> {
    let mut cancelled = Cancelled::none(p.n_users());
    schedule
        .iter()
        .map(|&m| {
            let g = sinr(branches, p, &cancelled, m);
            let ok = match rates {
                None => true,
                Some((r, bw)) => {
                    let target = r.get(m.ue, m.class);
                    target <= 0.0 || decodable(rate(bw, g), target)
                }
            };
            if ok {
                cancelled.set(m);
            }
            (m, g, ok)
        })
        .collect()
}

/// Whether an AP in separate mode attempts each user's HC message, from the
/// detected LoS states `beta_hat[ap][ue]`. This selects the AP(s) whose
/// SINR sets the HC coding rate; the others treat that HC stream as noise.
pub fn hc_targets(beta_hat: &[Vec<u8>; N_APS], assoc: &[usize]) -> [Vec<bool>; N_APS] {
    let mut t: [Vec<bool>; N_APS] = Default::default();
    for (j, tj) in t.iter_mut().enumerate() {
        *tj = assoc
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                if a == j {
                    beta_hat[j][i] == 1 || beta_hat[other_ap(j)][i] == 0
                } else {
                    beta_hat[j][i] == 1
                }
            })
            .collect();
    }
    t
}

/// HC messages targeted at the AP in SIC order, then LC of its associated users.
pub fn separate_schedule(order: &[usize], hc_target: &[bool], assoc: &[usize], j: usize) -> Vec<Msg> {
    let mut s: Vec<Msg> = order.iter().filter(|&&i| hc_target[i]).map(|&i| Msg::hc(i)).collect();
    s.extend(order.iter().filter(|&&i| assoc[i] == j).map(|&i| Msg::lc(i)));
    s
}

/// Decoding mode of an AP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ApMode {
    Separate,
    /// Decodes with the other AP's quantized signal as a second MRC branch.
    Cooperative,
}

/// Everything the separate/cooperative decoders need about one slot.
#[derive(Debug, Clone)]
pub struct SeparateContext<'a> {
    /// Power gains `[ap][ue]` (realized or expected).
    pub gains: &'a [Vec<f64>; N_APS],
    pub noise: [f64; N_APS],
    /// Thermal plus quantization noise of each AP's forwarded signal.
    pub noise_forwarded: [f64; N_APS],
    pub order: &'a [Vec<usize>; N_APS],
    pub assoc: &'a [usize],
    pub hc_target: &'a [Vec<bool>; N_APS],
    pub modes: [ApMode; N_APS],
    pub bandwidth_hz: f64,
}

impl<'a> SeparateContext<'a> {
    fn branches(&self, j: usize) -> Vec<Branch<'a>> {
        let own = Branch {
            gain: &self.gains[j],
            noise: self.noise[j],
        };
        match self.modes[j] {
            ApMode::Separate => vec![own],
            ApMode::Cooperative => {
                let o = other_ap(j);
                vec![
                    own,
                    Branch {
                        gain: &self.gains[o],
                        noise: self.noise_forwarded[o],
                    },
                ]
            }
        }
    }

    /// HC target set of AP `j` in its current mode.
    pub fn targets(&self, j: usize) -> Vec<bool> {
        match self.modes[j] {
            ApMode::Separate => self.hc_target[j].clone(),
            ApMode::Cooperative => vec![true; self.assoc.len()],
        }
    }

    pub fn schedule(&self, j: usize) -> Vec<Msg> {
        separate_schedule(&self.order[j], &self.targets(j), self.assoc, j)
    }

    /// SINR of every scheduled message at AP `j`, `(hc, lc)` indexed by user;
    /// unscheduled entries are `None`.
    pub fn sinrs(&self, j: usize, p: &PowerAllocation, rates: Option<&CodingRates>) -> (Vec<Option<(f64, bool)>>, Vec<Option<(f64, bool)>>) {
        let n = self.assoc.len();
        let mut hc = vec![None; n];
        let mut lc = vec![None; n];
        let res = run_sic(&self.branches(j), p, &self.schedule(j), rates.map(|r| (r, self.bandwidth_hz)));
        for (m, g, ok) in res {
            match m.class {
                Class::Hc => hc[m.ue] = Some((g, ok)),
                Class::Lc => lc[m.ue] = Some((g, ok)),
            }
        }
        (hc, lc)
    }
}

/// Coding rates from expected gains: HC at the smallest SINR over the APs
/// that target it, LC at the associated AP.
pub fn coding_rates_separate(ctx: &SeparateContext, p: &PowerAllocation) -> CodingRates {
    let n = ctx.assoc.len();
    let per_ap = [ctx.sinrs(0, p, None), ctx.sinrs(1, p, None)];
    let mut r_hc = vec![0.0; n];
    let mut r_lc = vec![0.0; n];
    for i in 0..n {
        let worst = per_ap
            .iter()
            .filter_map(|(hc, _)| hc[i].map(|(g, _)| g))
            .fold(f64::INFINITY, f64::min);
        r_hc[i] = if worst.is_finite() { rate(ctx.bandwidth_hz, worst) } else { 0.0 };
        let a = ctx.assoc[i];
        r_lc[i] = per_ap[a].1[i].map_or(0.0, |(g, _)| rate(ctx.bandwidth_hz, g));
    }
    CodingRates { r_hc, r_lc }
}

/// Decode one slot with every AP in its mode. Cooperative APs credit their
/// decodes one slot late; an HC message decoded by a separate AP is credited
/// immediately.
pub fn decode_separate(ctx: &SeparateContext, p: &PowerAllocation, rates: &CodingRates, slot_s: f64, packet_bits: f64) -> DecodingOutcome {
    let n = ctx.assoc.len();
    let mut out = DecodingOutcome::empty(n);
    let per_ap = [ctx.sinrs(0, p, Some(rates)), ctx.sinrs(1, p, Some(rates))];
    for (j, (hc, _)) in per_ap.iter().enumerate() {
        for i in 0..n {
            out.eta_hc[j][i] = u8::from(matches!(hc[i], Some((_, true))));
        }
    }
    for i in 0..n {
        let a = ctx.assoc[i];
        out.eta_lc[i] = u8::from(matches!(per_ap[a].1[i], Some((_, true))));
        let hc_pk = packets_for_rate(rates.r_hc[i], slot_s, packet_bits);
        let lc_pk = packets_for_rate(rates.r_lc[i], slot_s, packet_bits);
        let direct = (0..N_APS).any(|j| ctx.modes[j] == ApMode::Separate && out.eta_hc[j][i] == 1);
        let forwarded = (0..N_APS).any(|j| ctx.modes[j] == ApMode::Cooperative && out.eta_hc[j][i] == 1);
        if direct {
            out.delivered_hc[i] = hc_pk;
        } else if forwarded {
            out.deferred_hc[i] = hc_pk;
        }
        if out.eta_lc[i] == 1 {
            match ctx.modes[a] {
                ApMode::Separate => out.delivered_lc[i] = lc_pk,
                ApMode::Cooperative => out.deferred_lc[i] = lc_pk,
            }
        }
    }
    out
}

/// Quantization noise variance of a forwarded signal with `nq` bits.
pub fn quantization_noise(pathloss_gain: &[f64], p_max: f64, noise: f64, nq: u32) -> f64 {
    let received: f64 = pathloss_gain.iter().map(|g| p_max * g).sum::<f64>() + noise;
    received * 2f64.powi(-(nq.min(i32::MAX as u32) as i32))
}

/// Thermal plus quantization noise of each AP's forwarded signal.
pub fn forwarded_noise(pathloss_gain: &[Vec<f64>; N_APS], noise: [f64; N_APS], p_max: f64, nq: u32) -> [f64; N_APS] {
    [0, 1].map(|j| noise[j] + quantization_noise(&pathloss_gain[j], p_max, noise[j], nq))
}

/// Channel vector of one user across both APs.
pub type ChannelVec = [Complex64; N_APS];

pub fn channel_vectors(h: &[Vec<Complex64>; N_APS]) -> Vec<ChannelVec> {
    (0..h[0].len()).map(|i| [h[0][i], h[1][i]]).collect()
}

/// Hermitian 2×2 covariance `[[a, b], [conj(b), d]]`.
#[derive(Debug, Clone, Copy)]
pub struct Cov2 {
    pub a: f64,
    pub b: Complex64,
    pub d: f64,
}

impl Cov2 {
    pub fn diag(noise: [f64; N_APS]) -> Self {
        Cov2 {
            a: noise[0],
            b: Complex64::new(0.0, 0.0),
            d: noise[1],
        }
    }

    /// Add `power · h hᴴ`.
    pub fn add(&mut self, h: &ChannelVec, power: f64) {
        self.a += power * h[0].norm_sqr();
        self.d += power * h[1].norm_sqr();
        self.b += h[0] * h[1].conj() * power;
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b.norm_sqr()
    }

    /// `hᴴ Σ⁻¹ h`.
    pub fn quad_inv(&self, h: &ChannelVec) -> f64 {
        let cross = h[0].conj() * self.b * h[1];
        (self.d * h[0].norm_sqr() + self.a * h[1].norm_sqr() - 2.0 * cross.re) / self.det()
    }
}

/// Scalar SINR equivalent of a rank-one matrix SINR: `p hᴴ Σ⁻¹ h`.
pub fn central_sinr(h: &ChannelVec, power: f64, cov: &Cov2) -> f64 {
    power * cov.quad_inv(h)
}

/// `log2 det(I + p h hᴴ Σ⁻¹)` evaluated as a full 2×2 determinant.
pub fn log2_det_rate(h: &ChannelVec, power: f64, cov: &Cov2) -> f64 {
    let det = cov.det();
    // Σ⁻¹ = adj(Σ)/det
    let inv = [
        [Complex64::new(cov.d / det, 0.0), -cov.b / det],
        [-cov.b.conj() / det, Complex64::new(cov.a / det, 0.0)],
    ];
    // Γ = p h hᴴ Σ⁻¹
    let mut g = [[Complex64::new(0.0, 0.0); 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            for k in 0..2 {
                g[r][c] += h[r] * h[k].conj() * inv[k][c] * power;
            }
        }
    }
    let one = Complex64::new(1.0, 0.0);
    let det_ipg = (one + g[0][0]) * (one + g[1][1]) - g[0][1] * g[1][0];
    det_ipg.re.log2()
}

/// Central decoding order: users by descending ‖h_i‖.
pub fn central_order(h: &[ChannelVec]) -> Vec<usize> {
    let norms: Vec<f64> = h.iter().map(|v| v[0].norm_sqr() + v[1].norm_sqr()).collect();
    decode_order(&norms)
}

/// All HC messages in order, then all LC messages in order.
pub fn central_schedule(order: &[usize]) -> Vec<Msg> {
    order
        .iter()
        .map(|&i| Msg::hc(i))
        .chain(order.iter().map(|&i| Msg::lc(i)))
        .collect()
}

/// Central SIC over both forwarded signals. Returns `(msg, sinr, eta)`.
pub fn run_central_sic(
    h: &[ChannelVec],
    p: &PowerAllocation,
    noise_forwarded: [f64; N_APS],
    schedule: &[Msg],
    rates: Option<(&CodingRates, f64)>,
) -> Vec<(Msg, f64, bool)> {
    let n = h.len();
    let mut cancelled = Cancelled::none(n);
    schedule
        .iter()
        .map(|&m| {
            let mut cov = Cov2::diag(noise_forwarded);
            for k in 0..n {
                for class in [Class::Hc, Class::Lc] {
                    let other = Msg { ue: k, class };
                    if other != m && !cancelled.is(other) {
                        cov.add(&h[k], p.get(k, class));
                    }
                }
            }
            let g = central_sinr(&h[m.ue], p.get(m.ue, m.class), &cov);
            let ok = match rates {
                None => true,
                Some((r, bw)) => {
                    let target = r.get(m.ue, m.class);
                    target <= 0.0 || decodable(rate(bw, g), target)
                }
            };
            if ok {
                cancelled.set(m);
            }
            (m, g, ok)
        })
        .collect()
}

/// Central-decoding coding rates from expected channels, all earlier messages assumed cancelled.
pub fn coding_rates_central(h_hat: &[ChannelVec], p: &PowerAllocation, noise_forwarded: [f64; N_APS], order: &[usize], bandwidth_hz: f64) -> CodingRates {
    let n = h_hat.len();
    let mut r = CodingRates {
        r_hc: vec![0.0; n],
        r_lc: vec![0.0; n],
    };
    for (m, g, _) in run_central_sic(h_hat, p, noise_forwarded, &central_schedule(order), None) {
        let v = rate(bandwidth_hz, g);
        match m.class {
            Class::Hc => r.r_hc[m.ue] = v,
            Class::Lc => r.r_lc[m.ue] = v,
        }
    }
    r
}

/// Central decoding of one slot; everything is credited one slot late.
#[allow(clippy::too_many_arguments)]
pub fn decode_central(
    h: &[ChannelVec],
    p: &PowerAllocation,
    rates: &CodingRates,
    noise_forwarded: [f64; N_APS],
    order: &[usize],
    bandwidth_hz: f64,
    slot_s: f64,
    packet_bits: f64,
) -> DecodingOutcome {
    let n = h.len();
    let mut out = DecodingOutcome::empty(n);
    for (m, _, ok) in run_central_sic(h, p, noise_forwarded, &central_schedule(order), Some((rates, bandwidth_hz))) {
        if !ok {
            continue;
        }
        match m.class {
            Class::Hc => {
                out.eta_hc[0][m.ue] = 1;
                out.eta_hc[1][m.ue] = 1;
                out.deferred_hc[m.ue] = packets_for_rate(rates.r_hc[m.ue], slot_s, packet_bits);
            }
            Class::Lc => {
                out.eta_lc[m.ue] = 1;
                out.deferred_lc[m.ue] = packets_for_rate(rates.r_lc[m.ue], slot_s, packet_bits);
            }
        }
    }
    out
}

/// Rate of one user's slot share under TDMA at full power.
pub fn tdma_rate(gain: f64, p_max: f64, noise: f64, bandwidth_hz: f64, n_users: usize) -> f64 {
    rate(bandwidth_hz / n_users as f64, gain * p_max / noise)
}

/// TDMA slot: coding rate from the expected gain, success if the realized
/// gain supports it. Returns offered packets per user.
pub fn decode_tdma(gains: &[Vec<f64>; N_APS], gains_hat: &[Vec<f64>; N_APS], assoc: &[usize], p_max: f64, noise: [f64; N_APS], bandwidth_hz: f64, slot_s: f64, packet_bits: f64) -> Vec<u64> {
    let n = assoc.len();
    assoc
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let coding = tdma_rate(gains_hat[a][i], p_max, noise[a], bandwidth_hz, n);
            let achievable = tdma_rate(gains[a][i], p_max, noise[a], bandwidth_hz, n);
            if decodable(achievable, coding) {
                packets_for_rate(coding, slot_s, packet_bits)
            } else {
                0
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pa(hc: &[f64], lc: &[f64]) -> PowerAllocation {
        PowerAllocation {
            p_hc: hc.to_vec(),
            p_lc: lc.to_vec(),
        }
    }

    #[test]
    fn single_user_sinrs() {
        let g = [2.0];
        let b = [Branch { gain: &g, noise: 0.5 }];
        let p = pa(&[3.0], &[1.0]);
        let res = run_sic(&b, &p, &[Msg::hc(0), Msg::lc(0)], None);
        assert!((res[0].1 - 6.0 / (2.0 + 0.5)).abs() < 1e-15);
        assert!((res[1].1 - 2.0 / 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_rate_is_cancelled() {
        let g = [1.0];
        let b = [Branch { gain: &g, noise: 1.0 }];
        let p = pa(&[1.0], &[1.0]);
        let r = CodingRates {
            r_hc: vec![0.0],
            r_lc: vec![1e9],
        };
        let res = run_sic(&b, &p, &[Msg::hc(0), Msg::lc(0)], Some((&r, 1.0)));
        assert!(res[0].2);
        assert!((res[1].1 - 1.0).abs() < 1e-15);
        assert!(!res[1].2);
    }

    #[test]
    fn failed_message_stays_as_interference() {
        let g = [1.0, 1.0];
        let b = [Branch { gain: &g, noise: 1.0 }];
        let p = pa(&[4.0, 2.0], &[0.0, 0.0]);
        let r = CodingRates {
            r_hc: vec![1e9, 0.1],
            r_lc: vec![0.0, 0.0],
        };
        let res = run_sic(&b, &p, &[Msg::hc(0), Msg::hc(1)], Some((&r, 1.0)));
        assert!(!res[0].2);
        assert!((res[1].1 - 2.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn target_sets_follow_rate_cases() {
        let assoc = [0, 1];
        let t = hc_targets(&[vec![1, 1], vec![1, 1]], &assoc);
        assert_eq!(t, [vec![true, true], vec![true, true]]);
        // user 1's associated link blocked, cross link clear: only AP 0 targets
        let t = hc_targets(&[vec![1, 1], vec![1, 0]], &assoc);
        assert_eq!((t[0][1], t[1][1]), (true, false));
        // user 1's cross link blocked: only its associated AP targets
        let t = hc_targets(&[vec![1, 0], vec![1, 1]], &assoc);
        assert_eq!((t[0][1], t[1][1]), (false, true));
        // both blocked: associated AP keeps trying
        let t = hc_targets(&[vec![1, 0], vec![1, 0]], &assoc);
        assert_eq!((t[0][1], t[1][1]), (false, true));
    }

    #[test]
    fn cooperative_first_message_doubles_with_ideal_link() {
        let g = [vec![1.0, 0.5], vec![1.0, 0.5]];
        let order = [vec![0, 1], vec![0, 1]];
        let assoc = [0, 1];
        let tgt = [vec![true; 2], vec![true; 2]];
        let p = pa(&[1.0, 1.0], &[1.0, 1.0]);
        let sep = SeparateContext {
            gains: &g,
            noise: [1.0; 2],
            noise_forwarded: [1.0; 2],
            order: &order,
            assoc: &assoc,
            hc_target: &tgt,
            modes: [ApMode::Separate; 2],
            bandwidth_hz: 1.0,
        };
        let coop = SeparateContext {
            modes: [ApMode::Cooperative, ApMode::Separate],
            ..sep.clone()
        };
        let a = sep.sinrs(0, &p, None).0[0].unwrap().0;
        let b = coop.sinrs(0, &p, None).0[0].unwrap().0;
        assert!((b - 2.0 * a).abs() < 1e-15);
    }

    #[test]
    fn quantization_noise_examples() {
        let g = [10f64.powf(-12.81)];
        let s = 1e-15;
        let q = quantization_noise(&g, 0.01, s, 10);
        assert!((q - (0.01 * g[0] + s) / 1024.0).abs() < 1e-30);
        assert_eq!(quantization_noise(&g, 0.01, s, 5000), 0.0);
    }

    #[test]
    fn det_rate_matches_mrc_for_diagonal_noise() {
        let h = [Complex64::new(0.3, -1.2), Complex64::new(-0.7, 0.4)];
        let cov = Cov2::diag([0.5, 2.0]);
        let mrc = 1.0 + 1.7 * (h[0].norm_sqr() / 0.5 + h[1].norm_sqr() / 2.0);
        assert!((log2_det_rate(&h, 1.7, &cov) - mrc.log2()).abs() < 1e-12);
    }

    #[test]
    fn central_with_dead_branch_is_single_ap() {
        let h = [[Complex64::new(0.9, 0.1), Complex64::new(0.0, 0.0)]];
        let p = pa(&[1.0], &[0.5]);
        let res = run_central_sic(&h, &p, [0.2, 0.3], &central_schedule(&[0]), None);
        let g = h[0][0].norm_sqr();
        assert!((res[0].1 - g / (g * 0.5 + 0.2)).abs() < 1e-12);
        assert!((res[1].1 - g * 0.5 / 0.2).abs() < 1e-12);
    }

    #[test]
    fn tdma_single_user_full_band() {
        assert_eq!(tdma_rate(1.0, 1.0, 1.0, 4.0, 1), 4.0);
        assert_eq!(tdma_rate(1.0, 1.0, 1.0, 4.0, 2), 2.0);
    }
}
