//! Comma-separated report files. Money is rounded half-even to 4 decimals
//! here and nowhere earlier.

use std::fmt::Write as _;
use std::path::Path;

use spotscale::format_money;
use spotscale::sim::SimResult;

use crate::CliError;

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::new("io", format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))
}

pub fn money(x: f64) -> String {
    format_money(x, 4)
}

pub fn unit_price(x: f64) -> String {
    format_money(x, 6)
}

fn quoted(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

pub fn key_values(rows: &[(&str, String)]) -> String {
    let mut s = String::from("key,value\n");
    for (k, v) in rows {
        let _ = writeln!(s, "{k},{}", quoted(v));
    }
    s
}

pub fn series_csv(r: &SimResult) -> String {
    let mut s = String::from("time_s,nodes,pods,required_pods,util,accrued_cost_usd\n");
    for p in &r.series {
        let _ = writeln!(
            s,
            "{},{},{},{},{:.4},{}",
            p.time,
            p.nodes,
            p.pods,
            p.required_pods,
            p.util,
            money(p.accrued_cost_usd)
        );
    }
    s
}

pub fn summary_rows(r: &SimResult) -> Vec<(&'static str, String)> {
    let launched = r.nodes.iter().filter(|n| n.ready_at.is_some()).count();
    vec![
        ("status", "ok".into()),
        ("policy", r.policy.clone()),
        ("seed", r.seed.to_string()),
        ("duration_s", r.duration_s.to_string()),
        ("total_cost_usd", money(r.total_cost_usd)),
        ("fixed_overhead_usd_hr", money(r.fixed_overhead_usd_hr)),
        ("slo_violation_s", r.slo_violation_s.to_string()),
        ("terminations_injected", r.terminations_injected.to_string()),
        ("terminations_handled", r.terminations_handled.to_string()),
        ("reoptimizations", r.reoptimizations.to_string()),
        ("nodes_launched", launched.to_string()),
        ("events_processed", r.events.len().to_string()),
    ]
}

pub fn cost_by_type_csv(r: &SimResult) -> String {
    let mut s = String::from("instance_type,cost_usd\n");
    for (k, v) in &r.cost_by_type {
        let _ = writeln!(s, "{k},{}", money(*v));
    }
    s
}

pub fn decisions_csv(r: &SimResult) -> String {
    let mut s = String::from("time_s,kind,detail\n");
    for d in &r.decisions {
        let _ = writeln!(s, "{},{},{}", d.time, d.kind, quoted(&d.detail));
    }
    s
}

/// Writes result, summary, cost breakdown and decision log for one run.
pub fn emit_sim(dir: &Path, r: &SimResult) -> Result<(), CliError> {
    write(dir, "result.csv", &series_csv(r))?;
    write(dir, "summary.csv", &key_values(&summary_rows(r)))?;
    write(dir, "cost_by_type.csv", &cost_by_type_csv(r))?;
    write(dir, "decisions.csv", &decisions_csv(r))
}
