//! Max-min inverse-utilization power allocation.
//!
//! Every stability constraint is written as `δ ≤ w·ln(1 + SINR(p))` with
//! `w = s·(T/M)·(B/ln 2)/λ`, where `s` is the decoding-success weight and `λ`
//! the mean arrivals per slot. SINRs have the common form
//! `p_s·hᵀ Σ(p)⁻¹ h` with `Σ(p) = I + Σ_k p_k h_k h_kᵀ` (powers normalized by
//! `P_max`, gains by noise). Scalar SINRs are the one-dimensional case;
//! central decoding uses two dimensions, one per AP.
//!
//! Successive convex approximation: with `y = Σ⁻¹ h √p_s` fixed, the quadratic
//! transform `1 + 2(yᵀh)√p_s − yᵀΣ(p)y` is a concave lower bound of
//! `1 + SINR` that is tight at the current iterate. The resulting convex
//! max-min problem is solved by [`barrier::maximize_min`].

pub mod barrier;
mod success;

use serde::{Deserialize, Serialize};

pub use success::{either, ordered_success, success_prob_stage3, success_probs_stage1, SuccessProbs};

use crate::blockage::LinkState;
use crate::channel::{average_gains, average_gains_with_blockage};
use crate::phy::PowerAllocation;
use crate::queueing::Class;
use crate::scenario::{decode_order, ScenarioConfig, Topology};
use crate::{other_ap, N_APS};
use barrier::Row;

pub const MAX_ITERATIONS: usize = 200;
pub const OBJECTIVE_TOL: f64 = 1e-6;

/// Inverse utilizations δ = E[L]/E[A]; infinite for a class with no traffic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityTargets {
    pub delta_hc: Vec<f64>,
    pub delta_lc: Vec<f64>,
}

impl StabilityTargets {
    pub fn min(&self) -> f64 {
        self.delta_hc.iter().chain(&self.delta_lc).copied().fold(f64::INFINITY, f64::min)
    }
}

/// One rate constraint before the transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub ue: usize,
    pub class: Class,
    /// Power variable carrying the message: `2·ue` for HC, `2·ue + 1` for LC.
    pub signal: usize,
    /// Noise-normalized channel amplitude at each receive dimension.
    pub h: [f64; N_APS],
    pub interferers: Vec<(usize, [f64; N_APS])>,
    pub weight: f64,
}

impl RateRow {
    fn cov(&self, x: &[f64]) -> [[f64; 2]; 2] {
        let mut c = [[1.0, 0.0], [0.0, 1.0]];
        for (v, h) in &self.interferers {
            let p = x[*v];
            c[0][0] += p * h[0] * h[0];
            c[0][1] += p * h[0] * h[1];
            c[1][1] += p * h[1] * h[1];
        }
        c[1][0] = c[0][1];
        c
    }

    /// Exact SINR at normalized powers `x`.
    pub fn sinr(&self, x: &[f64]) -> f64 {
        let y = self.y(x);
        let p = x[self.signal];
        if p <= 0.0 {
            return 0.0;
        }
        (y[0] * self.h[0] + y[1] * self.h[1]) * p.sqrt()
    }

    /// Transform variable at the fixed point: `Σ⁻¹ h √p_s`.
    pub fn y(&self, x: &[f64]) -> [f64; 2] {
        let c = self.cov(x);
        let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
        let s = x[self.signal].max(0.0).sqrt();
        [
            (c[1][1] * self.h[0] - c[0][1] * self.h[1]) / det * s,
            (c[0][0] * self.h[1] - c[1][0] * self.h[0]) / det * s,
        ]
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.weight * self.sinr(x).ln_1p()
    }

    fn surrogate(&self, y: [f64; 2]) -> Row {
        let dot = |h: &[f64; 2]| y[0] * h[0] + y[1] * h[1];
        Row {
            signal: self.signal,
            a: dot(&self.h),
            b: self.interferers.iter().map(|(v, h)| (*v, dot(h).powi(2))).collect(),
            c0: y[0] * y[0] + y[1] * y[1],
            w: self.weight,
        }
    }
}

/// A max-min power allocation instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerProblem {
    pub n_users: usize,
    pub p_max: f64,
    pub rows: Vec<RateRow>,
}

/// Traffic and link parameters shared by both problem builders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub bandwidth_hz: f64,
    pub slot_s: f64,
    pub packet_bits: f64,
    pub p_max: f64,
    /// Mean (HC, LC) arrivals per user, packets per slot.
    pub arrivals: (f64, f64),
}

impl LinkBudget {
    pub fn from_config(c: &ScenarioConfig) -> Self {
        LinkBudget {
            bandwidth_hz: c.bandwidth_hz,
            slot_s: c.slot_s,
            packet_bits: c.packet_bits,
            p_max: c.p_max_w(),
            arrivals: c.arrival_means(),
        }
    }

    /// `s·(T/M)·(B/ln 2)/λ`, or `None` when the class carries no traffic.
    pub fn weight(&self, success: f64, class: Class) -> Option<f64> {
        let lambda = match class {
            Class::Hc => self.arrivals.0,
            Class::Lc => self.arrivals.1,
        };
        (lambda > 0.0).then(|| success * self.slot_s / self.packet_bits * self.bandwidth_hz / std::f64::consts::LN_2 / lambda)
    }
}

fn var(ue: usize, class: Class) -> usize {
    match class {
        Class::Hc => 2 * ue,
        Class::Lc => 2 * ue + 1,
    }
}

impl PowerProblem {
    /// Separate decoding at both APs from average gains `[ap][ue]`.
    pub fn stage1(gains: &[Vec<f64>; N_APS], noise: [f64; N_APS], assoc: &[usize], probs: &SuccessProbs, budget: &LinkBudget) -> Self {
        let n = assoc.len();
        let order = [decode_order(&gains[0]), decode_order(&gains[1])];
        let amp = |j: usize, k: usize| [(gains[j][k] * budget.p_max / noise[j]).sqrt(), 0.0];
        let mut rows = Vec::new();
        for i in 0..n {
            if let Some(w) = budget.weight(probs.p_hc_combined[i], Class::Hc) {
                for j in 0..N_APS {
                    let pos = order[j].iter().position(|&k| k == i).expect("order is a permutation");
                    let mut interferers: Vec<_> = (0..n).map(|k| (var(k, Class::Lc), amp(j, k))).collect();
                    interferers.extend(order[j][pos + 1..].iter().map(|&k| (var(k, Class::Hc), amp(j, k))));
                    rows.push(RateRow {
                        ue: i,
                        class: Class::Hc,
                        signal: var(i, Class::Hc),
                        h: amp(j, i),
                        interferers,
                        weight: w,
                    });
                }
            }
            if let Some(w) = budget.weight(probs.p_lc[i], Class::Lc) {
                let a = assoc[i];
                let pos = order[a].iter().position(|&k| k == i).expect("order is a permutation");
                let later: Vec<usize> = order[a][pos + 1..].to_vec();
                let interferers = (0..n)
                    .filter(|&k| assoc[k] == other_ap(a) || (assoc[k] == a && later.contains(&k)))
                    .map(|k| (var(k, Class::Lc), amp(a, k)))
                    .collect();
                rows.push(RateRow {
                    ue: i,
                    class: Class::Lc,
                    signal: var(i, Class::Lc),
                    h: amp(a, i),
                    interferers,
                    weight: w,
                });
            }
        }
        PowerProblem {
            n_users: n,
            p_max: budget.p_max,
            rows,
        }
    }

    /// Central decoding from average gains `[ap][ue]` with forwarded-signal noise.
    pub fn stage3(gains: &[Vec<f64>; N_APS], noise_forwarded: [f64; N_APS], success: f64, budget: &LinkBudget) -> Self {
        let n = gains[0].len();
        let norms: Vec<f64> = (0..n).map(|i| gains[0][i] + gains[1][i]).collect();
        let order = decode_order(&norms);
        let amp = |k: usize| [0, 1].map(|j| (gains[j][k] * budget.p_max / noise_forwarded[j]).sqrt());
        let mut rows = Vec::new();
        for (pos, &i) in order.iter().enumerate() {
            let later = &order[pos + 1..];
            if let Some(w) = budget.weight(success, Class::Hc) {
                let mut interferers: Vec<_> = (0..n).map(|k| (var(k, Class::Lc), amp(k))).collect();
                interferers.extend(later.iter().map(|&k| (var(k, Class::Hc), amp(k))));
                rows.push(RateRow {
                    ue: i,
                    class: Class::Hc,
                    signal: var(i, Class::Hc),
                    h: amp(i),
                    interferers,
                    weight: w,
                });
            }
            if let Some(w) = budget.weight(success, Class::Lc) {
                rows.push(RateRow {
                    ue: i,
                    class: Class::Lc,
                    signal: var(i, Class::Lc),
                    h: amp(i),
                    interferers: later.iter().map(|&k| (var(k, Class::Lc), amp(k))).collect(),
                    weight: w,
                });
            }
        }
        rows.sort_by_key(|r| r.signal);
        PowerProblem {
            n_users: n,
            p_max: budget.p_max,
            rows,
        }
    }

    /// Row values (δ bounds) at normalized powers.
    pub fn values(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.value(x)).collect()
    }

    pub fn min_delta(&self, x: &[f64]) -> f64 {
        self.values(x).into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Per-message δ at normalized powers: the smallest row of each message.
    pub fn targets(&self, x: &[f64]) -> StabilityTargets {
        let mut t = StabilityTargets {
            delta_hc: vec![f64::INFINITY; self.n_users],
            delta_lc: vec![f64::INFINITY; self.n_users],
        };
        for r in &self.rows {
            let v = r.value(x);
            let slot = match r.class {
                Class::Hc => &mut t.delta_hc[r.ue],
                Class::Lc => &mut t.delta_lc[r.ue],
            };
            *slot = slot.min(v);
        }
        t
    }

    pub fn allocation(&self, x: &[f64]) -> PowerAllocation {
        PowerAllocation {
            p_hc: (0..self.n_users).map(|i| x[2 * i] * self.p_max).collect(),
            p_lc: (0..self.n_users).map(|i| x[2 * i + 1] * self.p_max).collect(),
        }
    }

    /// Largest violation of `x ≥ 0` and the per-user budget, relative to `P_max`.
    pub fn constraint_residual(&self, x: &[f64]) -> f64 {
        let neg = x.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max);
        let over = (0..self.n_users).map(|i| (x[2 * i] + x[2 * i + 1] - 1.0).max(0.0)).fold(0.0, f64::max);
        neg.max(over)
    }

    pub fn solve(&self) -> Solution {
        sca(self, MAX_ITERATIONS, OBJECTIVE_TOL)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    pub converged: bool,
    /// Exact min δ at the initial point and after every outer iteration.
    pub objective_trace: Vec<f64>,
    /// Optimal value of each convex subproblem.
    pub inner_trace: Vec<f64>,
    /// Normalized power iterates, one per entry of `objective_trace`.
    pub iterate_trace: Vec<Vec<f64>>,
    /// Largest relative change of a transform variable in the last update.
    pub fixed_point_residual: f64,
    pub constraint_residual: f64,
    pub newton_steps: usize,
    /// Optimal min δ exceeds one.
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub allocation: PowerAllocation,
    pub targets: StabilityTargets,
    pub report: SolverReport,
}

fn transform_vars(problem: &PowerProblem, x: &[f64]) -> Vec<[f64; 2]> {
    problem.rows.iter().map(|r| r.y(x)).collect()
}

fn relative_change(old: &[[f64; 2]], new: &[[f64; 2]]) -> f64 {
    old.iter()
        .zip(new)
        .map(|(a, b)| {
            let scale = b[0].hypot(b[1]).max(1e-300);
            (a[0] - b[0]).hypot(a[1] - b[1]) / scale
        })
        .fold(0.0, f64::max)
}

/// Successive convex approximation from the equal power split.
pub fn sca(problem: &PowerProblem, max_iterations: usize, tol: f64) -> Solution {
    let mut x = vec![0.5; 2 * problem.n_users];
    let mut obj = problem.min_delta(&x);
    let mut report = SolverReport {
        iterations: 0,
        converged: false,
        objective_trace: vec![obj],
        inner_trace: Vec::new(),
        iterate_trace: vec![x.clone()],
        fixed_point_residual: f64::INFINITY,
        constraint_residual: 0.0,
        newton_steps: 0,
        stable: false,
    };
    let mut y = transform_vars(problem, &x);
    if !problem.rows.is_empty() {
        for _ in 0..max_iterations {
            let rows: Vec<Row> = problem.rows.iter().zip(&y).map(|(r, &yk)| r.surrogate(yk)).collect();
            let inner = barrier::maximize_min(&rows, &x);
            report.iterations += 1;
            report.newton_steps += inner.newton_steps;
            report.inner_trace.push(inner.t);
            let new_obj = problem.min_delta(&inner.x);
            let new_y = transform_vars(problem, &inner.x);
            report.fixed_point_residual = relative_change(&y, &new_y);
            let change = (new_obj - obj).abs() / obj.abs().max(1e-300);
            x = inner.x;
            y = new_y;
            obj = new_obj;
            report.objective_trace.push(obj);
            report.iterate_trace.push(x.clone());
            if change < tol && report.fixed_point_residual < tol.sqrt() {
                report.converged = true;
                break;
            }
        }
    } else {
        report.converged = true;
        report.fixed_point_residual = 0.0;
    }
    report.constraint_residual = problem.constraint_residual(&x);
    let targets = problem.targets(&x);
    report.stable = targets.min() > 1.0;
    Solution {
        allocation: problem.allocation(&x),
        targets,
        report,
    }
}

/// Stage-1 allocation for a topology from average gains.
pub fn solve_stage1(topology: &Topology, config: &ScenarioConfig) -> Solution {
    let gains = average_gains(topology);
    let order = [decode_order(&gains[0]), decode_order(&gains[1])];
    let probs = success_probs_stage1(
        config.blockage_prob(),
        config.kappa_b,
        config.slot_s,
        &order,
        &topology.assoc,
        config.success_model,
    );
    PowerProblem::stage1(&gains, topology.noise_power, &topology.assoc, &probs, &LinkBudget::from_config(config)).solve()
}

/// Central-decoding problem for the detected link states `links` (`ap * n + ue`).
pub fn stage3_problem(topology: &Topology, config: &ScenarioConfig, links: &[LinkState]) -> PowerProblem {
    let gains = average_gains_with_blockage(topology, links, config.rician_k);
    let noise = crate::phy::forwarded_noise(&topology.pathloss_gain, topology.noise_power, config.p_max_w(), config.nq);
    let n_unblocked = links.iter().filter(|l| l.beta_hat == 1).count();
    let success = success_prob_stage3(config.kappa_b, config.mu_b, config.slot_s, n_unblocked, links.len(), config.success_model);
    PowerProblem::stage3(&gains, noise, success, &LinkBudget::from_config(config))
}

pub fn solve_stage3(topology: &Topology, config: &ScenarioConfig, links: &[LinkState]) -> Solution {
    stage3_problem(topology, config, links).solve()
}
