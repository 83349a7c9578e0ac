//! Event-triggered stage machine and cost accounting.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::blockage::LinkState;
use crate::phy::{ApMode, DecodingOutcome, PowerAllocation};
use crate::scenario::StagePolicy;
use crate::{other_ap, N_APS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    Separate = 1,
    Cooperative = 2,
    Central = 3,
}

impl Stage {
    pub fn number(self) -> u8 {
        self as u8
    }
}

/// Fixed inputs of the state machine.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerParams {
    pub policy: StagePolicy,
    pub q_max_hc: f64,
    pub q_max_lc: f64,
    pub n_e: u32,
    pub assoc: Vec<usize>,
}

impl ControllerParams {
    fn over_threshold(&self, backlog: (u64, u64)) -> bool {
        backlog.0 as f64 > self.q_max_hc || backlog.1 as f64 > self.q_max_lc
    }
}

#[derive(Debug, Clone, PartialEq)]
struct PendingAllocation {
    apply_at: u64,
    allocation: PowerAllocation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageState {
    pub stage2_active: [bool; N_APS],
    /// Users whose congestion activated cooperation at each AP.
    pub stage2_owners: [Vec<usize>; N_APS],
    pub stage3_active: bool,
    /// A re-optimized allocation has taken effect and the CU decodes everything.
    pub central_decoding: bool,
    pub over_threshold_streak: Vec<u32>,
    pub active_allocation: PowerAllocation,
    pub baseline_allocation: PowerAllocation,
    pending: VecDeque<PendingAllocation>,
    prev_beta_hat: Vec<u8>,
}

/// What happened during one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TickEvents {
    pub optimizer_runs: u32,
    pub allocation_changed: bool,
}

impl StageState {
    pub fn new(baseline: PowerAllocation, n_links: usize) -> Self {
        let n = baseline.n_users();
        StageState {
            stage2_active: [false; N_APS],
            stage2_owners: Default::default(),
            stage3_active: false,
            central_decoding: false,
            over_threshold_streak: vec![0; n],
            active_allocation: baseline.clone(),
            baseline_allocation: baseline,
            pending: VecDeque::new(),
            prev_beta_hat: vec![1; n_links],
        }
    }

    /// Reported stage S(t).
    pub fn stage(&self) -> Stage {
        if self.stage3_active {
            Stage::Central
        } else if self.stage2_active.iter().any(|&a| a) {
            Stage::Cooperative
        } else {
            Stage::Separate
        }
    }

    /// Decoding mode of each AP when the CU is not decoding.
    pub fn ap_modes(&self) -> [ApMode; N_APS] {
        self.stage2_active.map(|a| if a { ApMode::Cooperative } else { ApMode::Separate })
    }

    /// Number of slots until the earliest pending allocation, if any.
    pub fn pending_countdown(&self, t: u64) -> Option<u64> {
        self.pending.front().map(|p| p.apply_at.saturating_sub(t))
    }

    fn revert(&mut self) -> bool {
        let changed = self.central_decoding || self.active_allocation != self.baseline_allocation;
        self.stage2_active = [false; N_APS];
        self.stage2_owners = Default::default();
        self.stage3_active = false;
        self.central_decoding = false;
        self.pending.clear();
        self.over_threshold_streak.iter_mut().for_each(|s| *s = 0);
        self.active_allocation = self.baseline_allocation.clone();
        changed
    }

    /// Advance the machine at slot `t` from the previous slot's backlogs and
    /// this slot's detected link states (`ap * n_users + ue`). `reoptimize`
    /// computes a central-decoding allocation for a link-state snapshot.
    pub fn tick(
        &mut self,
        t: u64,
        backlog: &[(u64, u64)],
        links: &[LinkState],
        params: &ControllerParams,
        mut reoptimize: impl FnMut(&[LinkState]) -> PowerAllocation,
    ) -> TickEvents {
        let n = params.assoc.len();
        let beta_hat: Vec<u8> = links.iter().map(|l| l.beta_hat).collect();
        let blocked_user = |i: usize| (0..N_APS).any(|j| beta_hat[j * n + i] == 0);
        let mut ev = TickEvents::default();
        // the backlogs were produced under an escalated stage
        let served_escalated = self.stage() != Stage::Separate;

        if !params.policy.allows_stage2() {
            self.prev_beta_hat = beta_hat;
            return ev;
        }

        if beta_hat.iter().all(|&b| b == 1) {
            ev.allocation_changed = self.revert();
            self.prev_beta_hat = beta_hat;
            return ev;
        }

        // cooperation at an AP ends once all of its triggering users see LoS again
        for j in 0..N_APS {
            self.stage2_owners[j].retain(|&i| blocked_user(i));
            self.stage2_active[j] = !self.stage2_owners[j].is_empty();
        }
        for (i, &b) in backlog.iter().enumerate() {
            if params.over_threshold(b) && blocked_user(i) {
                let j = params.assoc[i];
                if !self.stage2_owners[j].contains(&i) {
                    self.stage2_owners[j].push(i);
                }
                self.stage2_active[j] = true;
            }
        }

        let escalated = served_escalated && (self.stage3_active || self.stage2_active.iter().any(|&a| a));
        for (i, s) in self.over_threshold_streak.iter_mut().enumerate() {
            *s = if escalated && params.over_threshold(backlog[i]) { *s + 1 } else { 0 };
        }

        if params.policy.allows_stage3() {
            let schedule = |state: &mut Self, ev: &mut TickEvents, reopt: &mut dyn FnMut(&[LinkState]) -> PowerAllocation| {
                state.pending.push_back(PendingAllocation {
                    apply_at: t + u64::from(params.n_e),
                    allocation: reopt(links),
                });
                ev.optimizer_runs += 1;
            };
            if !self.stage3_active {
                let in_stage2 = self.stage2_active.iter().any(|&a| a);
                if in_stage2 && self.over_threshold_streak.iter().any(|&s| s >= params.n_e) {
                    self.stage3_active = true;
                    schedule(self, &mut ev, &mut reoptimize);
                }
            } else if beta_hat != self.prev_beta_hat {
                schedule(self, &mut ev, &mut reoptimize);
            }
            while self.pending.front().is_some_and(|p| p.apply_at <= t) {
                let p = self.pending.pop_front().expect("checked non-empty");
                self.active_allocation = p.allocation;
                self.central_decoding = true;
                ev.allocation_changed = true;
            }
        }
        self.prev_beta_hat = beta_hat;
        ev
    }
}

/// Running cost-factor counts.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CostCounters {
    pub slots: u64,
    /// Slots in which each user's HC data was recovered only via the non-associated AP.
    pub mc_events: Vec<u64>,
    /// Slots in which each AP forwarded its received signal.
    pub coop_events: [u64; N_APS],
    pub optimizer_runs: u64,
}

/// Cost-relevant facts of one slot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SlotEvents {
    pub mc_users: Vec<usize>,
    pub forwarding: [bool; N_APS],
    pub optimizer_runs: u32,
}

impl SlotEvents {
    /// Derive the slot's events from the stage state and the decoding outcome.
    pub fn observe(state: &StageState, outcome: &DecodingOutcome, assoc: &[usize], optimizer_runs: u32) -> Self {
        let mut forwarding = [false; N_APS];
        if state.stage3_active {
            forwarding = [true; N_APS];
        } else {
            for j in 0..N_APS {
                if state.stage2_active[j] {
                    forwarding[other_ap(j)] = true;
                }
            }
        }
        let modes = state.ap_modes();
        let mc_users = if state.central_decoding {
            Vec::new()
        } else {
            assoc
                .iter()
                .enumerate()
                .filter(|&(i, &a)| modes[a] == ApMode::Separate && outcome.eta_hc[a][i] == 0 && outcome.eta_hc[other_ap(a)][i] == 1)
                .map(|(i, _)| i)
                .collect()
        };
        SlotEvents {
            mc_users,
            forwarding,
            optimizer_runs,
        }
    }
}

impl CostCounters {
    pub fn new(n_users: usize) -> Self {
        CostCounters {
            mc_events: vec![0; n_users],
            ..Default::default()
        }
    }

    pub fn update(&mut self, ev: &SlotEvents) {
        self.slots += 1;
        for &i in &ev.mc_users {
            self.mc_events[i] += 1;
        }
        for j in 0..N_APS {
            self.coop_events[j] += u64::from(ev.forwarding[j]);
        }
        self.optimizer_runs += u64::from(ev.optimizer_runs);
    }

    fn frac(&self, k: u64) -> f64 {
        if self.slots == 0 {
            0.0
        } else {
            k as f64 / self.slots as f64
        }
    }

    /// Multi-connectivity usage, averaged over users.
    pub fn rho_mc(&self) -> f64 {
        if self.mc_events.is_empty() {
            return 0.0;
        }
        self.mc_events.iter().map(|&k| self.frac(k)).sum::<f64>() / self.mc_events.len() as f64
    }

    pub fn rho_coop(&self, j: usize) -> f64 {
        self.frac(self.coop_events[j])
    }

    pub fn rho_opt(&self) -> f64 {
        self.frac(self.optimizer_runs)
    }
}

/// Functional form of [`CostCounters::update`].
pub fn update_costs(counters: &CostCounters, events: &SlotEvents) -> CostCounters {
    let mut c = counters.clone();
    c.update(events);
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(policy: StagePolicy) -> ControllerParams {
        ControllerParams {
            policy,
            q_max_hc: 300.0,
            q_max_lc: 1000.0,
            n_e: 10,
            assoc: vec![0, 1],
        }
    }

    fn links(bh: [u8; 4]) -> Vec<LinkState> {
        bh.iter().map(|&b| LinkState::settled(b)).collect()
    }

    fn alloc(v: f64) -> PowerAllocation {
        PowerAllocation {
            p_hc: vec![v; 2],
            p_lc: vec![v; 2],
        }
    }

    #[test]
    fn quiet_system_stays_in_stage_one() {
        let p = params(StagePolicy::S1S2S3);
        let mut s = StageState::new(alloc(0.005), 4);
        for t in 0..1000 {
            s.tick(t, &[(10, 10), (5, 5)], &links([1; 4]), &p, |_| unreachable!());
            assert_eq!(s.stage(), Stage::Separate);
        }
    }

    #[test]
    fn congestion_without_blockage_does_not_escalate() {
        let p = params(StagePolicy::S1S2S3);
        let mut s = StageState::new(alloc(0.005), 4);
        s.tick(0, &[(0, 5000), (0, 0)], &links([1; 4]), &p, |_| unreachable!());
        assert_eq!(s.stage(), Stage::Separate);
    }

    #[test]
    fn escalation_and_delay() {
        let p = params(StagePolicy::S1S2S3);
        let mut s = StageState::new(alloc(0.005), 4);
        // link (ap 1, ue 1) blocked and detected
        let l = links([1, 1, 1, 0]);
        s.tick(0, &[(0, 0), (0, 0)], &l, &p, |_| unreachable!());
        assert_eq!(s.stage(), Stage::Separate);
        s.tick(1, &[(0, 0), (0, 1001)], &l, &p, |_| unreachable!());
        assert_eq!(s.stage(), Stage::Cooperative);
        assert!(s.stage2_active[1] && !s.stage2_active[0]);
        let mut trigger = None;
        for t in 2..40 {
            let ev = s.tick(t, &[(0, 0), (0, 1500)], &l, &p, |_| alloc(0.007));
            if ev.optimizer_runs > 0 {
                trigger = Some(t);
            }
            if s.central_decoding {
                let t0 = trigger.expect("optimizer ran before the allocation applied");
                assert_eq!(t, t0 + 10);
                assert_eq!(s.active_allocation, alloc(0.007));
                break;
            }
            if trigger.is_some() {
                assert_eq!(s.stage(), Stage::Central);
                assert_eq!(s.active_allocation, alloc(0.005));
            }
        }
        // stage 2 from slot 1; its first backlog is seen at slot 2, the tenth at slot 11
        assert_eq!(trigger, Some(11));
        // recovery returns to stage 1 and the baseline allocation
        s.tick(50, &[(0, 1500), (0, 1500)], &links([1; 4]), &p, |_| unreachable!());
        assert_eq!(s.stage(), Stage::Separate);
        assert_eq!(s.active_allocation, alloc(0.005));
        assert!(!s.central_decoding);
    }

    #[test]
    fn link_change_in_stage3_reoptimizes() {
        let p = params(StagePolicy::S1S2S3);
        let mut s = StageState::new(alloc(0.005), 4);
        let l = links([1, 1, 1, 0]);
        let mut runs = 0;
        for t in 0..30 {
            runs += s.tick(t, &[(0, 0), (0, 1500)], &l, &p, |_| alloc(0.007)).optimizer_runs;
        }
        assert_eq!(runs, 1);
        let l2 = links([1, 0, 1, 0]);
        runs += s.tick(30, &[(0, 0), (0, 1500)], &l2, &p, |_| alloc(0.008)).optimizer_runs;
        assert_eq!(runs, 2);
        for t in 31..40 {
            s.tick(t, &[(0, 0), (0, 1500)], &l2, &p, |_| unreachable!());
            assert_eq!(s.active_allocation, alloc(0.007));
        }
        s.tick(40, &[(0, 0), (0, 1500)], &l2, &p, |_| unreachable!());
        assert_eq!(s.active_allocation, alloc(0.008));
    }

    #[test]
    fn stage2_policy_never_reaches_stage3() {
        let p = params(StagePolicy::S1S2);
        let mut s = StageState::new(alloc(0.005), 4);
        for t in 0..100 {
            s.tick(t, &[(0, 0), (0, 1500)], &links([1, 1, 1, 0]), &p, |_| unreachable!());
            assert!(s.stage() <= Stage::Cooperative);
        }
        assert_eq!(s.stage(), Stage::Cooperative);
    }

    #[test]
    fn cost_fractions() {
        let mut c = CostCounters::new(2);
        for k in 0..500 {
            c.update(&SlotEvents {
                mc_users: if k < 100 { vec![0] } else { vec![] },
                forwarding: [k < 50, false],
                optimizer_runs: u32::from(k == 0),
            });
        }
        assert_eq!(c.rho_opt(), 0.002);
        assert_eq!(c.rho_coop(0), 0.1);
        assert_eq!(c.rho_coop(1), 0.0);
        assert!((c.rho_mc() - 0.1).abs() < 1e-15);
    }
}
