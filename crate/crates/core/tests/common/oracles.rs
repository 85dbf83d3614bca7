//! Independent reference computations shared by the integration tests.

use lta::backends::{PlannerSpec, ScriptedPlanner, ScriptedVlm, ToolCall, VlmNoise};
use lta::eval::trial_seed;
use lta::geometry::Vec3;
use lta::orchestrator::Executor;
use lta::planner::{error_rules, parse_plan, validate_plan, Plan, RuleId};
use lta::scene_graph::{SceneGraph, SceneNode, ROOT};
use lta::sim::{rng, WorldSpec};
use lta::tools::{self, ToolMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::path::{Path, PathBuf};

/// Shortest solution length by breadth-first search over peg assignments
/// (disc i sits on peg state[i]; smaller index = smaller disc).
pub fn bfs_optimal(n: usize, from: u8, to: u8) -> usize {
    let start = vec![from; n];
    let goal = vec![to; n];
    let mut dist: HashMap<Vec<u8>, usize> = HashMap::from([(start.clone(), 0)]);
    let mut queue = VecDeque::from([start]);
    while let Some(s) = queue.pop_front() {
        let d = dist[&s];
        if s == goal {
            return d;
        }
        // The top of each peg is its smallest disc.
        let top = |peg: u8| (0..n).find(|&i| s[i] == peg);
        for src in 0..3u8 {
            let Some(disc) = top(src) else { continue };
            for dst in (0..3u8).filter(|&p| p != src) {
                if top(dst).is_some_and(|t| t < disc) {
                    continue;
                }
                let mut next = s.clone();
                next[disc] = dst;
                if !dist.contains_key(&next) {
                    dist.insert(next.clone(), d + 1);
                    queue.push_back(next);
                }
            }
        }
    }
    unreachable!("goal is always reachable")
}

/// Replays the pick/place pairs of a plan on abstract pegs, checking every
/// move is legal; returns the number of moves and the final pegs.
pub fn replay_moves(plan: &Plan, n: usize) -> (usize, [Vec<usize>; 3]) {
    let pegs = ["base_1", "base_3", "base_2"];
    let disc_no = |name: &str| name.strip_prefix("disc_").and_then(|k| k.parse::<usize>().ok());
    let mut stacks: [Vec<usize>; 3] = [(1..=n).rev().collect(), vec![], vec![]];
    let mut held: Option<usize> = None;
    let mut moves = 0;
    for step in &plan.steps {
        match step.tool.as_str() {
            tools::PICK => {
                let d = disc_no(step.text_arg("object_name").unwrap()).unwrap();
                let src = stacks.iter().position(|s| s.last() == Some(&d)).expect("picked disc is on top of a peg");
                stacks[src].pop();
                held = Some(d);
            }
            tools::PLACE => {
                let d = held.take().expect("place follows a pick");
                let target = step.text_arg("place_position_name").unwrap();
                let dst = match pegs.iter().position(|p| *p == target) {
                    Some(p) => {
                        assert!(stacks[p].is_empty(), "placing on the base of a non-empty peg");
                        p
                    }
                    None => {
                        let below = disc_no(target).unwrap();
                        stacks.iter().position(|s| s.last() == Some(&below)).expect("target disc is on top")
                    }
                };
                assert!(stacks[dst].last().is_none_or(|&b| b > d), "disc {d} onto a smaller disc");
                stacks[dst].push(d);
                moves += 1;
            }
            _ => {}
        }
    }
    assert!(held.is_none());
    (moves, stacks)
}

/// Quadratic-time union-find over every point pair.
pub fn oracle_partition(points: &[Vec3], link: f64) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        for j in i + 1..n {
            if (points[i] - points[j]).norm() <= link {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = root(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

pub fn random_cloud(rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    let blobs = rng.random_range(1..6);
    let mut pts = Vec::new();
    for _ in 0..blobs {
        let c = Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(0.0..0.2));
        let spread = rng.random_range(0.005..0.06);
        for _ in 0..rng.random_range(5..80) {
            pts.push(c + Vec3::new(rng.random_range(-spread..spread), rng.random_range(-spread..spread), rng.random_range(-spread..spread)));
        }
    }
    for _ in 0..rng.random_range(0..20) {
        pts.push(Vec3::new(rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6), rng.random_range(0.0..0.3)));
    }
    pts
}

pub fn random_scene(seed: u64) -> WorldSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=5);
    let objects: Vec<_> = (0..n)
        .map(|i| {
            let shape = match rng.random_range(0..3) {
                0 => json!({"kind": "box", "w": rng.random_range(0.04..0.09), "d": rng.random_range(0.04..0.09), "h": rng.random_range(0.03..0.08)}),
                1 => json!({"kind": "cylinder", "r": rng.random_range(0.025..0.045), "h": rng.random_range(0.03..0.09)}),
                _ => json!({"kind": "sphere", "r": rng.random_range(0.025..0.045)}),
            };
            let x0 = -0.4 + 0.8 * i as f64 / n as f64;
            json!({
                "name": format!("obj_{i}"),
                "shape": shape,
                "xy": [x0 + 0.08, -0.6],
                "yaw": rng.random_range(-1.5..1.5),
                "region": {"x": [x0 + 0.06, x0 + 0.8 / n as f64 - 0.06], "y": [-0.8, -0.4]}
            })
        })
        .collect();
    serde_json::from_value(json!({"config": {"depth_noise": 0.001}, "objects": objects})).unwrap()
}

/// Scans every object of random scene `seed` with the vision pipeline
/// and returns each centroid error against the visible-surface truth.
pub fn scan_errors(seed: u64) -> Vec<(String, f64)> {
    let spec = random_scene(seed);
    let world = spec.build(seed, true, &[]).unwrap();
    let names: Vec<String> = spec.objects.iter().map(|o| o.name.clone()).collect();
    let mut graph = SceneGraph::new();
    for n in &names {
        graph = graph.add_object(SceneNode::new(n.as_str()), ROOT).unwrap();
    }
    let vlm = ScriptedVlm::new(VlmNoise { jitter_px: 3, ..Default::default() });
    let mut exec =
        Executor::new(world, graph, ToolMode::Vlm, Box::new(vlm), Box::new(ScriptedPlanner::new(PlannerSpec::Auto)));
    let call = ToolCall::new("scan", tools::SCAN, json!({"targets_to_scan": names}).as_object().unwrap().clone());
    let (out, _) = exec.execute(&call);
    assert!(out.result.ok, "scene {seed}: {:?}", out.result.failure_reason);
    names
        .iter()
        .map(|n| {
            let est = exec.graph.get(n).unwrap().coordinates.unwrap();
            let truth = exec.world.visible_surface_centroid(n, exec.perception.voxel, exec.perception.z_epsilon).unwrap();
            let err = ((est[0] - truth[0]).powi(2) + (est[1] - truth[1]).powi(2) + (est[2] - truth[2]).powi(2)).sqrt();
            (n.clone(), err)
        })
        .collect()
}

/// Trials whose single pointing query draws below the failure rate.
pub fn hand_count(seed: u64, trials: usize, rate: f64) -> Vec<usize> {
    (0..trials).filter(|&k| rng::unit(trial_seed(seed, k), &[rng::POINT_FAILURE, 0, 0]) >= rate).collect()
}

pub fn containment(g: &SceneGraph) -> BTreeMap<String, BTreeSet<String>> {
    g.nodes().map(|n| (n.name.clone(), n.contains.iter().cloned().collect())).collect()
}

pub fn fixture_graph() -> SceneGraph {
    SceneGraph::deserialize(include_str!("../fixtures/iii_a_initial.json")).unwrap()
}

pub fn plan_files(dir: &str) -> Vec<PathBuf> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/plans").join(dir);
    let mut v: Vec<PathBuf> = std::fs::read_dir(root).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

/// `NN_rK_description.plan` -> RK.
pub fn expected_rule(path: &Path) -> RuleId {
    let stem = path.file_stem().unwrap().to_str().unwrap();
    match stem.split('_').nth(1) {
        Some("r1") => RuleId::R1,
        Some("r2") => RuleId::R2,
        Some("r3") => RuleId::R3,
        other => panic!("{stem}: no rule tag ({other:?})"),
    }
}

/// Runs the hand-written rule fixtures; returns one line per
/// misclassified plan.
pub fn misclassified_fixtures() -> (usize, Vec<String>) {
    let g = fixture_graph();
    let clean = plan_files("clean");
    let bad = plan_files("violating");
    let mut mistakes = Vec::new();
    for f in &clean {
        let plan = parse_plan(&std::fs::read_to_string(f).unwrap()).unwrap();
        let found = validate_plan(&plan, &g);
        if !error_rules(&found).is_empty() {
            mistakes.push(format!("false positive {}: {found:?}", f.display()));
        }
    }
    for f in &bad {
        let plan = parse_plan(&std::fs::read_to_string(f).unwrap()).unwrap();
        let found = error_rules(&validate_plan(&plan, &g));
        if found != BTreeSet::from([expected_rule(f)]) {
            mistakes.push(format!("{}: expected only {:?}, got {found:?}", f.display(), expected_rule(f)));
        }
    }
    (clean.len() + bad.len(), mistakes)
}

/// Every file under `dir`, keyed by relative path.
pub fn tree_files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    files
}
