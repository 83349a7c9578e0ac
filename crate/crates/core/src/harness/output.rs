use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::{EpisodeTrace, SweepSummary};
use crate::error::Result;
use crate::N_APS;

fn link_labels(n_users: usize) -> Vec<String> {
    (0..N_APS).flat_map(|j| (0..n_users).map(move |i| format!("{}_{}", j + 1, i + 1))).collect()
}

/// Time series: one row per (slot, user). Under TDMA the single queue is
/// reported split by the HC fraction.
pub fn time_series_csv<W: Write>(trace: &EpisodeTrace, out: W) -> Result<()> {
    let n = trace.n_users();
    let labels = link_labels(n);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string(), "ue".into(), "q_hc".into(), "q_lc".into(), "stage".into()];
    header.extend(labels.iter().map(|l| format!("beta_{l}")));
    header.extend(labels.iter().map(|l| format!("betahat_{l}")));
    header.extend(["del_hc".to_string(), "del_lc".into()]);
    w.write_record(&header)?;
    for r in &trace.records {
        for i in 0..n {
            let mut row = vec![r.t.to_string(), (i + 1).to_string()];
            if trace.single_queue() {
                let (h, l) = trace.class_backlog(r, i);
                row.push(h.to_string());
                row.push(l.to_string());
            } else {
                row.push(r.backlog[i].0.to_string());
                row.push(r.backlog[i].1.to_string());
            }
            row.push(r.stage.to_string());
            row.extend(r.beta.iter().map(|b| b.to_string()));
            row.extend(r.beta_hat.iter().map(|b| b.to_string()));
            row.push(r.delivered[i].0.to_string());
            row.push(r.delivered[i].1.to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_time_series_csv(trace: &EpisodeTrace, path: impl AsRef<Path>) -> Result<()> {
    time_series_csv(trace, std::fs::File::create(path)?)
}

#[derive(Serialize)]
struct SummaryRow {
    duration_ms: f64,
    policy: String,
    tau_hc_worst: f64,
    tau_lc_worst: f64,
    exceed_hc: f64,
    exceed_lc: f64,
    rho_mc: f64,
    rho_coop_sum: f64,
    rho_opt: f64,
    n_runs: usize,
    tau_hc_worst_se: f64,
    tau_lc_worst_se: f64,
    exceed_hc_se: f64,
    exceed_lc_se: f64,
    rho_mc_se: f64,
    rho_coop_sum_se: f64,
    rho_opt_se: f64,
    frac_s2: f64,
    frac_s3: f64,
    frac_s2_se: f64,
    frac_s3_se: f64,
}

pub fn summary_csv<W: Write>(summary: &SweepSummary, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in &summary.points {
        w.serialize(SummaryRow {
            duration_ms: p.duration_ms,
            policy: p.policy.to_string(),
            tau_hc_worst: p.tau_hc_worst.mean,
            tau_lc_worst: p.tau_lc_worst.mean,
            exceed_hc: p.exceed_hc.mean,
            exceed_lc: p.exceed_lc.mean,
            rho_mc: p.rho_mc.mean,
            rho_coop_sum: p.rho_coop_sum.mean,
            rho_opt: p.rho_opt.mean,
            n_runs: p.n_runs,
            tau_hc_worst_se: p.tau_hc_worst.se,
            tau_lc_worst_se: p.tau_lc_worst.se,
            exceed_hc_se: p.exceed_hc.se,
            exceed_lc_se: p.exceed_lc.se,
            rho_mc_se: p.rho_mc.se,
            rho_coop_sum_se: p.rho_coop_sum.se,
            rho_opt_se: p.rho_opt.se,
            frac_s2: p.frac_s2.mean,
            frac_s3: p.frac_s3.mean,
            frac_s2_se: p.frac_s2.se,
            frac_s3_se: p.frac_s3.se,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv(summary: &SweepSummary, path: impl AsRef<Path>) -> Result<()> {
    summary_csv(summary, std::fs::File::create(path)?)
}
