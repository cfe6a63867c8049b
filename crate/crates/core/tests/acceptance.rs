//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any fails.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use access_sim::ablation::{select_route, Selection};
use access_sim::experiment::{load_config, run_sweep, GridSpec, SweepParams, SweepPlan};
use access_sim::grid::{grid_map, grid_node_id};
use access_sim::map::{EdgeRecord, Journey, Map, MapDocument, NodeRecord, SamplingSpec};
use access_sim::metrics::{score_vs_perfect, CellSummary, TrialOutcome};
use access_sim::routes::{build_incidence, enumerate_routes, shortest_path_oracle, RouteList};
use access_sim::stochastic::EdgeSet;
use access_sim::sample_journeys;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within_time(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed < limit, format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn diamond() -> Map {
    Map::from_json(
        r#"{"nodes":[{"id":"A","x":0,"y":0},{"id":"N1","x":70,"y":70},
                     {"id":"N2","x":106,"y":-106},{"id":"B","x":141,"y":0}],
            "edges":[{"id":"e1","u":"A","v":"N1","length_m":100},
                     {"id":"e2","u":"N1","v":"B","length_m":100},
                     {"id":"e3","u":"A","v":"N2","length_m":150},
                     {"id":"e4","u":"N2","v":"B","length_m":150}]}"#,
    )
    .unwrap()
}

fn single_edge() -> Map {
    Map::from_json(
        r#"{"nodes":[{"id":"A","x":0,"y":0},{"id":"B","x":100,"y":0}],
            "edges":[{"id":"e1","u":"A","v":"B","length_m":100}]}"#,
    )
    .unwrap()
}

fn paper_rates() -> Vec<f64> {
    GridSpec { start: 0.0, stop: 0.3, step: 0.02 }.values()
}

fn paper_profiles() -> Vec<f64> {
    GridSpec { start: 0.7, stop: 1.0, step: 0.01 }.values()
}

fn params(rates: Vec<f64>, tprs: Vec<f64>, tnrs: Vec<f64>, trials: usize, seed: u64) -> SweepParams {
    SweepParams {
        rates,
        tprs,
        tnrs,
        trials_per_cell: trials,
        master_seed: seed,
        penalty_m: 500.0,
        shared_truth: false,
    }
}

fn plan_for(map: Map, journeys: Vec<Journey>, cap_m: f64, p: SweepParams) -> SweepPlan {
    let lists: Vec<RouteList> = journeys
        .iter()
        .map(|j| enumerate_routes(&map, j, cap_m).unwrap())
        .collect();
    SweepPlan::new(map, journeys, &lists, p).unwrap()
}

/// Every simple s–t path, found by testing each edge subset: a subset is a
/// path iff walking from s along unused subset edges visits no node twice,
/// uses every edge, and stops at t.
fn brute_force_paths(map: &Map, s: usize, t: usize, cap: f64) -> BTreeSet<Vec<String>> {
    let m = map.edge_count();
    let mut out = BTreeSet::new();
    for subset in 1u32..(1 << m) {
        let mut used = 0u32;
        let mut at = s;
        let mut seen = vec![false; map.node_count()];
        seen[s] = true;
        let mut seq = Vec::new();
        let mut dist = 0.0;
        loop {
            if at == t {
                break;
            }
            let next = (0..m).find(|&e| {
                subset & (1 << e) != 0 && used & (1 << e) == 0 && {
                    let edge = map.edge(e);
                    edge.u == at || edge.v == at
                }
            });
            let Some(e) = next else { break };
            used |= 1 << e;
            let edge = map.edge(e);
            at = edge.other(at);
            if seen[at] {
                break;
            }
            seen[at] = true;
            seq.push(edge.id.clone());
            dist += edge.length_m;
        }
        if at == t && used == subset && dist <= cap {
            out.insert(seq);
        }
    }
    out
}

fn random_graph(rng: &mut ChaCha8Rng) -> Map {
    let n = rng.gen_range(2..=10);
    let m = rng.gen_range(1..=16);
    let nodes = (0..n)
        .map(|i| NodeRecord { id: format!("n{i}"), x: rng.gen_range(0.0..500.0), y: rng.gen_range(0.0..500.0) })
        .collect();
    let edges = (0..m)
        .map(|i| {
            let u = rng.gen_range(0..n);
            let v = (u + rng.gen_range(1..n)) % n;
            EdgeRecord {
                id: format!("e{i:02}"),
                u: format!("n{u}"),
                v: format!("n{v}"),
                length_m: rng.gen_range(1..=100) as f64,
                always_accessible: false,
            }
        })
        .collect();
    Map::from_document(MapDocument { nodes, edges }).unwrap()
}

fn enumeration_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xE7);
    let mut total_routes = 0;
    for g in 0..200 {
        let map = random_graph(&mut rng);
        let s = rng.gen_range(0..map.node_count());
        let t = (s + rng.gen_range(1..map.node_count())) % map.node_count();
        let cap = rng.gen_range(20.0..400.0);
        let j = Journey::new(&map, "j", &map.node(s).id, &map.node(t).id).unwrap();
        let rl = enumerate_routes(&map, &j, cap).unwrap();
        let got: BTreeSet<Vec<String>> = rl.routes.iter().map(|r| r.edge_ids.clone()).collect();
        check(got.len() == rl.len(), format!("graph {g}: duplicate routes"))?;
        let want = brute_force_paths(&map, s, t, cap);
        check(got == want, format!("graph {g}: {} routes vs brute force {}", got.len(), want.len()))?;
        total_routes += got.len();
    }
    within_time(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("200 graphs, {total_routes} routes, {:.2?}", start.elapsed()))
}

fn ablation_dijkstra() -> Outcome {
    let start = Instant::now();
    let map = grid_map(8, 8, 100.0);
    let cap = 1500.0;
    let journeys = [
        Journey::new(&map, "corner", &grid_node_id(0, 0), &grid_node_id(7, 7)).unwrap(),
        Journey::new(&map, "inner", &grid_node_id(2, 2), &grid_node_id(5, 4)).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(0xAB1);
    let (mut routed, mut impassible) = (0, 0);
    for (ji, j) in journeys.iter().enumerate() {
        let rl = enumerate_routes(&map, j, cap).unwrap();
        let inc = build_incidence(&rl, &map).unwrap();
        for i in 0..1000 {
            let density = (i % 50) as f64 / 100.0;
            let mut perceived = EdgeSet::empty(&map);
            for e in 0..map.edge_count() {
                if rng.gen::<f64>() < density {
                    perceived.insert(e);
                }
            }
            let oracle = shortest_path_oracle(&map, &j.from_node, &j.to_node, &perceived).unwrap();
            match (select_route(&inc, &perceived), oracle) {
                (Selection::Route(r), Some((d, _))) if d <= cap => {
                    check(inc.dist(r) == d, format!("journey {ji} set {i}: {} vs oracle {d}", inc.dist(r)))?;
                    routed += 1;
                }
                (Selection::Impassible, None) => impassible += 1,
                (Selection::Impassible, Some((d, _))) if d > cap => impassible += 1,
                (sel, o) => return Err(format!("journey {ji} set {i}: {sel:?} vs oracle {o:?}")),
            }
        }
    }
    within_time(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("2000 sets: {routed} routed, {impassible} impassible, {:.2?}", start.elapsed()))
}

fn three_sigma(hits: usize, n: usize, p: f64) -> Result<String, String> {
    let freq = hits as f64 / n as f64;
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    let z = (freq - p) / sigma;
    check(z.abs() <= 3.0, format!("freq {freq:.4} vs {p:.4} (z = {z:.2})"))?;
    Ok(format!("{freq:.4} vs {p:.4} (z = {z:.2})"))
}

fn analytic_impassibility() -> Outcome {
    let start = Instant::now();
    let n = 20_000;
    let map = single_edge();
    let j = Journey::new(&map, "single", "A", "B").unwrap();
    let rows = plan_for(map, vec![j], 1500.0, params(vec![0.2], vec![0.9], vec![0.9], n, 31)).run(1).unwrap();
    let reported = (rows[0].frac_reported_impassible.unwrap() * n as f64).round() as usize;
    let (r, p, t) = (0.2, 0.9, 0.9);
    let single = three_sigma(reported, n, r * p + (1.0 - r) * (1.0 - t))?;

    // Diamond: impassible iff both routes are blocked, each route blocked
    // iff either of its edges is: P(a ∪ b) = P(a) + P(b) − P(a)P(b).
    let map = diamond();
    let rate = 0.2;
    let avg = map.avg_len_m();
    let blocked = |len_a: f64, len_b: f64| {
        let (pa, pb) = (rate * len_a / avg, rate * len_b / avg);
        pa + pb - pa * pb
    };
    let exact = blocked(100.0, 100.0) * blocked(150.0, 150.0);
    let j = Journey::new(&map, "diamond", "A", "B").unwrap();
    let rows = plan_for(map, vec![j], 1500.0, params(vec![rate], vec![0.9], vec![0.9], n, 32)).run(1).unwrap();
    let gt_impassible = n - rows[0].n_gt_navigable;
    let diamond = three_sigma(gt_impassible, n, exact)?;
    within_time(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("single edge {single}; diamond {diamond}"))
}

fn perfect_system_exact() -> Outcome {
    let map = diamond();
    let j = Journey::new(&map, "diamond", "A", "B").unwrap();
    let rows = plan_for(map, vec![j], 1500.0, params(paper_rates(), vec![1.0], vec![1.0], 500, 41)).run(4).unwrap();
    check(rows.len() == 16, format!("{} cells", rows.len()))?;
    for s in &rows {
        let k = &s.key;
        check(s.n_error_a + s.n_error_b + s.n_error_c == 0, format!("rate {}: errors present", k.rate))?;
        check(s.mean_score_vs_perfect == Some(0.0), format!("rate {}: score {:?}", k.rate, s.mean_score_vs_perfect))?;
        check(
            s.frac_reported_impassible == s.frac_gt_impassible,
            format!("rate {}: reported vs truth impassibility differ", k.rate),
        )?;
    }
    Ok("16 cells, 0 errors, score exactly 0".into())
}

fn oblivious_self_score() -> Outcome {
    // Uniform edge lengths: the (tpr 0, tnr 1) tool then misses every barrier.
    let map = grid_map(8, 8, 100.0);
    let journeys = vec![
        Journey::new(&map, "short", &grid_node_id(2, 3), &grid_node_id(5, 3)).unwrap(),
        Journey::new(&map, "diag", &grid_node_id(1, 1), &grid_node_id(4, 3)).unwrap(),
    ];
    let rows = plan_for(map, journeys, 1500.0, params(paper_rates(), vec![0.0], vec![1.0], 500, 51)).run(4).unwrap();
    for s in &rows {
        check(
            s.mean_score_vs_oblivious == Some(0.0),
            format!("{}: {:?}", s.key, s.mean_score_vs_oblivious),
        )?;
    }
    Ok(format!("{} cells, score exactly 0", rows.len()))
}

fn worked_example() -> Outcome {
    let o = TrialOutcome {
        gt_navigable: true,
        reported_impassible: false,
        dist_tool: Some(1100.0),
        nbarriers_tool: 2,
        dist_perfect: Some(1100.0),
        dist_oblivious: Some(1100.0),
        nbarriers_oblivious: 2,
        error_a: false,
        error_b: false,
        error_c: true,
    };
    let score = score_vs_perfect(&o, 500.0).map_err(|e| e.to_string())?;
    let effective = score * 1100.0 + 1100.0;
    check((effective - 2100.0).abs() < 1e-9, format!("effective {effective}"))?;
    Ok(format!("effective {effective} m, score {score:.6}"))
}

fn fig5_journeys(map: &Map) -> Vec<Journey> {
    let spec = SamplingSpec { count: 10, min_crow_m: 300.0, max_crow_m: 1200.0, bins: 3 };
    sample_journeys(map, &spec, 2024).unwrap()
}

/// Count adjacent decreases of a sequence.
fn violations(xs: &[f64]) -> usize {
    xs.windows(2).filter(|w| w[1] < w[0]).count()
}

fn pooled(rows: &[&CellSummary], stat: impl Fn(&CellSummary) -> Option<f64>, weight: impl Fn(&CellSummary) -> usize) -> f64 {
    let (mut num, mut den) = (0.0, 0usize);
    for s in rows {
        if let Some(v) = stat(s) {
            num += v * weight(s) as f64;
            den += weight(s);
        }
    }
    num / den as f64
}

fn figure5_shape() -> Outcome {
    let start = Instant::now();
    let map = grid_map(20, 20, 100.0);
    let journeys = fig5_journeys(&map);
    let rates = paper_rates();
    let rows = plan_for(map, journeys, 1500.0, params(rates.clone(), vec![1.0], vec![1.0], 500, 61)).run(4).unwrap();
    let by_rate: Vec<Vec<&CellSummary>> = rates
        .iter()
        .map(|&r| rows.iter().filter(|s| s.key.rate == r).collect())
        .collect();
    let impassible: Vec<f64> = by_rate
        .iter()
        .map(|rs| pooled(rs, |s| s.frac_gt_impassible, |s| s.trials))
        .collect();
    let increase: Vec<f64> = by_rate
        .iter()
        .map(|rs| pooled(rs, |s| s.mean_rel_dist_increase_perfect_tool, |s| s.n_gt_navigable))
        .collect();
    let (vi, vd) = (violations(&impassible), violations(&increase));
    check(vi <= 1, format!("impassible fraction has {vi} decreases: {impassible:.3?}"))?;
    check(vd <= 1, format!("distance increase has {vd} decreases: {increase:.4?}"))?;
    within_time(start.elapsed(), Duration::from_secs(300))?;
    Ok(format!(
        "impassible {:.3} → {:.3} ({vi} dips), increase {:.4} → {:.4} ({vd} dips), {:.2?}",
        impassible[0],
        impassible[impassible.len() - 1],
        increase[0],
        increase[increase.len() - 1],
        start.elapsed()
    ))
}

fn throughput() -> Outcome {
    let map = grid_map(20, 20, 100.0);
    // The sampled journey with the most routes under the cap.
    let (journey, list) = fig5_journeys(&map)
        .into_iter()
        .map(|j| {
            let rl = enumerate_routes(&map, &j, 1500.0).unwrap();
            (j, rl)
        })
        .max_by_key(|(_, rl)| rl.len())
        .unwrap();
    let routes = list.len();
    let p = params(paper_rates(), paper_profiles(), paper_profiles(), 50, 71);
    let plan = SweepPlan::new(map, vec![journey], &[list], p).unwrap();
    check(plan.trial_count() == 768_800, format!("{} trials", plan.trial_count()))?;
    let start = Instant::now();
    let rows = plan.run(4).unwrap();
    let elapsed = start.elapsed();
    check(rows.len() == 15_376, format!("{} rows", rows.len()))?;
    within_time(elapsed, Duration::from_secs(60))?;
    Ok(format!("768,800 trials over {routes} routes in {elapsed:.2?}"))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let map = grid_map(8, 8, 100.0);
    std::fs::write(dir.path().join("grid.json"), map.to_json()).unwrap();
    let mut outputs = Vec::new();
    for (workers, shared) in [(1, false), (4, false), (1, true), (3, true)] {
        let cfg = serde_json::json!({
            "map_path": "grid.json",
            "sampling": {"count": 4, "min_crow_m": 300, "max_crow_m": 600, "bins": 2},
            "rate_grid": {"start": 0, "stop": 0.3, "step": 0.1},
            "tpr_grid": {"start": 0.7, "stop": 1, "step": 0.15},
            "tnr_grid": {"start": 0.7, "stop": 1, "step": 0.15},
            "trials_per_cell": 100,
            "master_seed": 99,
            "cap_m": 1000,
            "worker_count": workers,
            "shared_truth": shared,
            "output_path": format!("out_{workers}_{shared}.csv"),
        });
        let path = dir.path().join(format!("cfg_{workers}_{shared}.json"));
        std::fs::write(&path, cfg.to_string()).unwrap();
        let report = run_sweep(&load_config(&path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        outputs.push(std::fs::read(report.csv_path).unwrap());
    }
    check(outputs[0] == outputs[1], "independent-truth CSVs differ across worker counts")?;
    check(outputs[2] == outputs[3], "shared-truth CSVs differ across worker counts")?;
    Ok(format!("{} bytes identical for 1 and 4 workers", outputs[0].len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("enumeration matches brute force", enumeration_oracle),
        ("ablation matches Dijkstra", ablation_dijkstra),
        ("analytic impassibility", analytic_impassibility),
        ("perfect system exactness", perfect_system_exact),
        ("oblivious self-score", oblivious_self_score),
        ("worked penalty example", worked_example),
        ("impassibility and detour grow with rate", figure5_shape),
        ("throughput with batch selection", throughput),
        ("determinism across worker counts", determinism),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
