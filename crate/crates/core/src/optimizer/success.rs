//! Closed-form decoding-success probabilities used as stability weights.

use serde::{Deserialize, Serialize};

use crate::scenario::{ranks, SuccessModel};
use crate::{other_ap, N_APS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessProbs {
    /// Per-AP HC success, `[ap][ue]`.
    pub p_hc: [Vec<f64>; N_APS],
    /// LC success at the associated AP.
    pub p_lc: Vec<f64>,
    /// HC decoded by at least one AP.
    pub p_hc_combined: Vec<f64>,
}

/// Success probability of a message preceded by `earlier` messages in the SIC order.
pub fn ordered_success(p_b: f64, kappa_b: f64, slot_s: f64, earlier: usize, model: SuccessModel) -> f64 {
    let fresh = (1.0 - p_b) * -(-kappa_b * slot_s).exp_m1();
    let e = earlier as i32;
    match model {
        SuccessModel::Corrected => (1.0 - p_b) * (1.0 - fresh).powi(e),
        SuccessModel::Verbatim => (1.0 - p_b) * (1.0 - fresh.powi(e)),
    }
}

/// Probability that either of two independent attempts succeeds.
pub fn either(p_first: f64, p_second: f64) -> f64 {
    p_first + (1.0 - p_first) * p_second
}

pub fn success_probs_stage1(
    p_b: f64,
    kappa_b: f64,
    slot_s: f64,
    order: &[Vec<usize>; N_APS],
    assoc: &[usize],
    model: SuccessModel,
) -> SuccessProbs {
    let n = assoc.len();
    let rank = [ranks(&order[0]), ranks(&order[1])];
    let p_hc = [0, 1].map(|j| {
        (0..n)
            .map(|i| ordered_success(p_b, kappa_b, slot_s, rank[j][i], model))
            .collect::<Vec<_>>()
    });
    let lc = ordered_success(p_b, kappa_b, slot_s, n.saturating_sub(1), model);
    let p_hc_combined = (0..n)
        .map(|i| {
            let a = assoc[i];
            either(p_hc[a][i], p_hc[other_ap(a)][i])
        })
        .collect();
    SuccessProbs {
        p_hc,
        p_lc: vec![lc; n],
        p_hc_combined,
    }
}

/// Probability that central decoding succeeds given `n_unblocked` of
/// `n_links` links currently in LoS.
pub fn success_prob_stage3(kappa_b: f64, mu_b: f64, slot_s: f64, n_unblocked: usize, n_links: usize, model: SuccessModel) -> f64 {
    let stay_los = (-kappa_b * slot_s).exp();
    let stay_blocked = (-mu_b * slot_s).exp();
    match model {
        SuccessModel::Corrected => stay_los.powi(n_unblocked as i32) * stay_blocked.powi((n_links - n_unblocked) as i32),
        SuccessModel::Verbatim => {
            let n = n_unblocked as i32;
            (1.0 - stay_los).powi(n) * (1.0 - stay_blocked).powi(1 - n)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const KAPPA: f64 = 0.175_438_596_491_228;
    const MU: f64 = 10.0 / 3.0;

    #[test]
    fn verbatim_first_message_is_zero() {
        assert_eq!(ordered_success(0.05, KAPPA, 0.01, 0, SuccessModel::Verbatim), 0.0);
    }

    #[test]
    fn corrected_third_in_order() {
        // 0.95 * (1 - 0.95 * (1 - exp(-0.00175439)))^2
        let oracle = 0.95 * (1.0 - 0.95 * (1.0 - (-0.001_754_385_964_912_28f64).exp())).powi(2);
        let p = ordered_success(0.05, KAPPA, 0.01, 2, SuccessModel::Corrected);
        assert!((p - oracle).abs() < 1e-15);
        assert!((p - 0.9468).abs() < 1e-4);
    }

    #[test]
    fn no_blockage_is_certain() {
        assert_eq!(ordered_success(0.0, 0.0, 0.01, 5, SuccessModel::Corrected), 1.0);
        assert_eq!(success_prob_stage3(0.0, 0.0, 0.01, 3, 4, SuccessModel::Corrected), 1.0);
    }

    #[test]
    fn stage3_examples() {
        let p = success_prob_stage3(KAPPA, MU, 0.01, 4, 4, SuccessModel::Corrected);
        assert!((p - 0.998_247f64.powi(4)).abs() < 1e-5);
        assert!((p - 0.99300).abs() < 1e-5);
        let v = success_prob_stage3(KAPPA, MU, 0.01, 4, 4, SuccessModel::Verbatim);
        let oracle = (1.0 - (-KAPPA * 0.01f64).exp()).powi(4) * (1.0 - (-MU * 0.01f64).exp()).powi(-3);
        assert!((v / oracle - 1.0).abs() < 1e-12);
        assert!(v < 1e-6);
    }

    #[test]
    fn combined_dominates() {
        let order = [vec![0, 1, 2], vec![2, 1, 0]];
        let s = success_probs_stage1(0.05, KAPPA, 0.01, &order, &[0, 1, 0], SuccessModel::Corrected);
        for i in 0..3 {
            assert!(s.p_hc_combined[i] >= s.p_hc[0][i].max(s.p_hc[1][i]));
            assert!(s.p_hc_combined[i] <= 1.0);
        }
    }
}
