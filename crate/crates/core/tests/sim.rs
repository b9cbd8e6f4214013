use std::path::Path;

use spotscale::sim::{self, compare, inject_terminations, run, Policy, Scenario, SimResult, OVERHEAD_KEY};

fn scenario(extra: &str, catalog_rows: &str, base: &str, workload: &str, min_rps: f64) -> Scenario {
    let text = format!(
        r#"
duration_s = 86400
[catalog]
overhead_cpu_fraction = 0.10
overhead_mem_mib = 512
csv = """
name,family,vcpu,mem_mib,on_demand_usd_hr,zones
{catalog_rows}
"""
[prices]
kind = "synthetic"
history_hours = 0
[prices.base]
{base}
[workload]
points = {workload}
[slo]
min_rps = {min_rps}
[pod]
cpu_millicores = 500
mem_mib = 1024
max_rps_per_pod = 60
{extra}
"#
    );
    Scenario::from_toml(&text, Path::new(".")).unwrap()
}

/// One type fitting 3 pods; 200 rps wants 6 pods, i.e. 2 nodes.
fn two_node(extra: &str) -> Scenario {
    scenario(extra, "t3.medium,t3,2,4096,0.0416,z1;z2", r#""t3.medium" = 0.0166"#, "[[0, 200.0]]", 100.0)
}

/// Independent step integral of the scenario's price for a node alive over
/// `[from, to)` in simulated seconds.
fn price_integral(s: &Scenario, ty: &str, from: i64, to: i64) -> f64 {
    let pts = &s.prices[ty].points;
    let mut cuts: Vec<i64> = vec![from, to];
    cuts.extend(pts.iter().map(|p| p.0 - s.start).filter(|&t| t > from && t < to));
    cuts.sort();
    cuts.windows(2)
        .map(|w| {
            let abs = s.start + w[0];
            let mut price = pts[0].1;
            for &(ts, p) in pts {
                if ts <= abs {
                    price = p;
                }
            }
            price * (w[1] - w[0]) as f64 / 3600.0
        })
        .sum()
}

fn oracle_total(s: &Scenario, r: &SimResult) -> f64 {
    let nodes: f64 = r
        .nodes
        .iter()
        .filter_map(|n| {
            let from = n.ready_at?;
            let to = n.ended_at.unwrap_or(r.duration_s);
            Some(if r.on_demand_pricing {
                s.catalog.get(&n.instance_type).unwrap().on_demand_usd_hr * (to - from) as f64 / 3600.0
            } else {
                price_integral(s, &n.instance_type, from, to)
            })
        })
        .sum();
    nodes + r.fixed_overhead_usd_hr * r.duration_s as f64 / 3600.0
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn constant_price_two_nodes_closed_form() {
    let s = two_node("");
    let r = run(&s, &Policy::Elastic, 0).unwrap();
    let expected = 2.0 * 0.0166 * 24.0 + 0.0632 * 24.0;
    assert!(rel(r.total_cost_usd, expected) < 1e-12, "{} vs {expected}", r.total_cost_usd);
    assert!((r.cost_by_type["t3.medium"] - 0.7968).abs() < 1e-12);
    assert_eq!(r.slo_violation_s, 0);
    assert_eq!(r.reoptimizations, 0);
}

#[test]
fn cost_by_type_sums_to_total_and_matches_integral() {
    let s = two_node("[terminations]\nrate_per_node_hour = 0.05\nseed = 4");
    for policy in [Policy::Elastic, Policy::BaselineSingleType(None), Policy::BaselineOnDemand(None)] {
        let r = run(&s, &policy, 3).unwrap();
        let sum: f64 = r.cost_by_type.values().sum();
        assert!(rel(sum, r.total_cost_usd) < 1e-12);
        assert!(rel(oracle_total(&s, &r), r.total_cost_usd) < 1e-9, "{policy}");
        assert!(r.cost_by_type.contains_key(OVERHEAD_KEY));
    }
}

#[test]
fn notice_with_spare_capacity_is_graceful() {
    // 9 slots for 6 pods; node 1 (3 pods) goes away at one hour
    let s = two_node("[optimizer]\nmin_nodes = 3\n[terminations]\nevents = [[3600, \"node:1\"]]");
    let r = run(&s, &Policy::Elastic, 0).unwrap();
    assert_eq!(r.terminations_injected, 1);
    assert_eq!(r.terminations_handled, 1);
    assert_eq!(r.slo_violation_s, 0);
    let notice = r.events.iter().find(|e| e.kind == "termination_notice").unwrap();
    assert_eq!((notice.time, notice.node), (3600, Some(1)));
    let gone: Vec<_> = r.events.iter().filter(|e| e.kind == "node_terminated").collect();
    assert_eq!(gone.len(), 1);
    assert_eq!((gone[0].time, gone[0].node), (3600 + 120, Some(1)));
    let node1 = r.nodes.iter().find(|n| n.id == 1).unwrap();
    assert_eq!(node1.ended_at, Some(3720));
    // pods conserved across the move
    assert!(r.series.iter().all(|p| p.pods == 6));
}

#[test]
fn same_seed_same_result() {
    let s = two_node("[terminations]\nrate_per_node_hour = 0.2\nseed = 1");
    assert_eq!(run(&s, &Policy::Elastic, 9).unwrap(), run(&s, &Policy::Elastic, 9).unwrap());
}

#[test]
fn events_processed_in_time_priority_sequence_order() {
    let s = two_node("[terminations]\nrate_per_node_hour = 0.3\nseed = 2");
    let r = run(&s, &Policy::Elastic, 0).unwrap();
    let prio = |k: &str| ["node_terminated", "termination_notice", "price_update", "workload_change", "provisioning_complete", "scaler_poll"]
        .iter()
        .position(|x| *x == k)
        .unwrap();
    assert!(r.events.windows(2).all(|w| (w[0].time, prio(w[0].kind), w[0].seq) < (w[1].time, prio(w[1].kind), w[1].seq)));
}

#[test]
fn every_notice_ends_in_one_termination() {
    let s = two_node("[terminations]\nrate_per_node_hour = 0.3\nseed = 5");
    let r = run(&s, &Policy::Elastic, 0).unwrap();
    assert!(r.terminations_injected > 0);
    for n in r.events.iter().filter(|e| e.kind == "termination_notice" && e.node.is_some()) {
        let ends: Vec<_> = r.events.iter().filter(|e| e.kind == "node_terminated" && e.node == n.node).collect();
        if n.time + 120 < r.duration_s {
            assert_eq!(ends.len(), 1);
            assert_eq!(ends[0].time, n.time + 120);
        } else {
            assert!(ends.is_empty());
        }
    }
}

#[test]
fn nodes_bill_only_between_ready_and_end() {
    let s = scenario(
        "[terminations]\nrate_per_node_hour = 0.1\nseed = 8",
        "a.x,a,2,4096,0.04,z1\nb.x,b,4,8192,0.08,z1",
        "\"a.x\" = 0.02\n\"b.x\" = 0.03",
        "[[0, 200.0], [20000, 900.0], [50000, 100.0]]",
        100.0,
    );
    let r = run(&s, &Policy::Elastic, 1).unwrap();
    for n in &r.nodes {
        match n.ready_at {
            None => assert_eq!(n.cost_usd, 0.0),
            Some(from) => {
                let to = n.ended_at.unwrap_or(r.duration_s);
                assert!(rel(n.cost_usd, price_integral(&s, &n.instance_type, from, to)) < 1e-9);
                assert!(n.launched_at <= from);
            }
        }
    }
}

#[test]
fn identical_single_type_catalog_saves_nothing() {
    let s = two_node("[baseline]\noverhead_usd_hr = 0.0632");
    let report = compare(&s, 0).unwrap();
    let (_, saving) = &report.savings()[0];
    assert!(saving.abs() <= 0.01, "{saving}");
}

#[test]
fn spot_at_forty_percent_of_on_demand() {
    let s = scenario(
        "[optimizer]\nfixed_overhead_usd_hr = 0.0\n[baseline]\noverhead_usd_hr = 0.0",
        "t3.medium,t3,2,4096,0.05,z1",
        "\"t3.medium\" = 0.02",
        "[[0, 200.0]]",
        100.0,
    );
    let report = compare(&s, 0).unwrap();
    let on_demand = report.savings().into_iter().find(|(p, _)| p == "baseline_on_demand").unwrap().1;
    assert!((on_demand - 0.6).abs() < 1e-9, "{on_demand}");
}

#[test]
fn scale_up_and_down_follow_the_load() {
    let s = scenario("", "a.x,a,2,4096,0.04,z1", "\"a.x\" = 0.02", "[[0, 200.0], [10000, 300.0], [40000, 100.0]]", 100.0);
    let r = run(&s, &Policy::Elastic, 0).unwrap();
    let at = |t: i64| r.series.iter().rev().find(|p| p.time <= t).unwrap();
    assert!(at(20_000).pods > at(9_000).pods);
    assert!(at(80_000).pods < at(20_000).pods);
    assert_eq!(r.slo_violation_s, 0);
}

#[test]
fn poisson_count_matches_rate() {
    // 10 nodes over 24 h at 0.05 / node-hour: mean 12
    let nodes: Vec<(u64, i64)> = (1..=10).map(|i| (i, 0)).collect();
    let (rate, hours) = (0.05, 24.0);
    let mean = rate * nodes.len() as f64 * hours;
    let total: usize = (0..200u64).map(|seed| inject_terminations(&nodes, rate, seed, 86_400).len()).sum();
    let sigma = (mean * 200.0).sqrt();
    assert!((total as f64 - mean * 200.0).abs() <= 4.0 * sigma, "{total} vs {}", mean * 200.0);
}

#[test]
fn bundled_scenario_loads() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/reconstructed-24h/scenario.toml");
    let s = Scenario::from_file(&path).unwrap();
    assert_eq!(s.catalog.types().len(), 4);
    assert_eq!(s.duration_s, 86_400);
    assert!(matches!(s.terminations, sim::TerminationSpec::Explicit(ref v) if v.len() == 3));
}

#[test]
fn load_doubling_costs_at_most_the_reaction_window() {
    // capacity runs out before new nodes can be ready: violation is bounded
    // by sustain polls plus provisioning delay
    let s = scenario("", "a.x,a,2,4096,0.04,z1", "\"a.x\" = 0.02", "[[0, 200.0], [10000, 400.0]]", 100.0);
    let r = run(&s, &Policy::Elastic, 0).unwrap();
    assert!(r.slo_violation_s > 0);
    assert!(r.slo_violation_s <= 2 * 30 + 420, "{}", r.slo_violation_s);
}
