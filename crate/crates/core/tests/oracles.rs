mod common;

use std::ops::ControlFlow;

use common::*;
use explore_core::baselines::grid_shortest_path;
use explore_core::global_planner::{GlobalGraph, VertexKind};
use explore_core::local_planner::{best_path, build_tree, exploration_gain, LocalPlannerConfig};
use explore_core::motion_primitives::RobotState;
use explore_core::path::Path;
use explore_core::sensor_sim::{visible_unknown_voxels, SensorConfig};
use explore_core::voxel_map::{BoundingBox, VoxelState};
use explore_core::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit<R: Rng>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

#[test]
fn traversal_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let map = random_map(&mut rng, 12, 0.5, 1.0, 0.0);
    for _ in 0..200 {
        let o = Vec3::new(rng.gen_range(0.1..5.9), rng.gen_range(0.1..5.9), rng.gen_range(0.1..5.9));
        let d = unit(&mut rng);
        let max_t = rng.gen_range(0.5..8.0);
        let mut got = Vec::new();
        map.traverse(&o, &d, max_t, |v| {
            got.push(v.linear);
            ControlFlow::Continue(())
        })
        .unwrap();
        assert_eq!(got, brute_force_ray(&map, &o, &d, max_t));
    }
}

#[test]
fn raycast_stops_at_first_non_free_voxel() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let map = random_map(&mut rng, 12, 0.5, 0.85, 0.1);
    for _ in 0..200 {
        let o = Vec3::new(rng.gen_range(0.1..5.9), rng.gen_range(0.1..5.9), rng.gen_range(0.1..5.9));
        let d = unit(&mut rng);
        let expected = brute_force_ray(&map, &o, &d, 6.0)
            .into_iter()
            .find(|&i| map.get_linear(i) != VoxelState::Free)
            .map(|i| (map.unlinear(i), map.get_linear(i)));
        assert_eq!(map.raycast(&o, &d, 6.0).unwrap(), expected);
    }
}

fn sensor(d_max: f64, fov_h: f64, fov_v: f64) -> SensorConfig {
    SensorConfig {
        fov_horizontal: fov_h,
        fov_vertical: fov_v,
        d_max,
        map_update_range: d_max,
        ..SensorConfig::default()
    }
}

#[test]
fn visibility_matches_exhaustive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for k in 0..20 {
        let map = random_map(&mut rng, 14, 0.5, 0.55, 0.1);
        let p = Vec3::new(rng.gen_range(0.2..6.8), rng.gen_range(0.2..6.8), rng.gen_range(0.2..6.8));
        let heading = rng.gen_range(-3.1..3.1);
        let cfg = match k % 3 {
            0 => sensor(4.0, 360.0, 30.0),
            1 => sensor(5.0, 90.0, 60.0),
            _ => sensor(3.0, 360.0, 180.0),
        };
        assert_eq!(visible_unknown_voxels(&map, &p, heading, &cfg), visible_oracle(&map, &p, heading, &cfg));
    }
}

#[test]
fn two_state_gain_is_set_union() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let cfg = LocalPlannerConfig {
        discount: 1.0,
        ..LocalPlannerConfig::default()
    };
    let s = sensor(4.0, 360.0, 60.0);
    for _ in 0..10 {
        let map = random_map(&mut rng, 14, 0.5, 0.6, 0.1);
        let a = RobotState::at_rest(Vec3::new(rng.gen_range(1.0..6.0), rng.gen_range(1.0..6.0), rng.gen_range(1.0..6.0)), 0.0);
        let b = RobotState::at_rest(Vec3::new(rng.gen_range(1.0..6.0), rng.gen_range(1.0..6.0), rng.gen_range(1.0..6.0)), 1.0);
        let path = Path::from_states(vec![a, b]);
        let mut union = visible_oracle(&map, &a.position, a.heading, &s);
        union.extend(visible_oracle(&map, &b.position, b.heading, &s));
        union.sort_unstable();
        union.dedup();
        let expected = union.len() as f64 * map.voxel_volume();
        let got = exploration_gain(&map, &path, &s, &cfg);
        assert!((got - expected).abs() <= 1e-9 * expected.max(1.0), "{got} vs {expected}");
    }
}

#[test]
fn best_path_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let (model, cfg) = small_lattice();
    let s = sensor(3.0, 360.0, 60.0);
    let bbox = BoundingBox::from_dims(0.6, 0.6, 0.6).unwrap();
    for _ in 0..6 {
        let map = cluttered_room(&mut rng, 20, 0.5);
        let root = RobotState::at_rest(map.center([10, 10, 10]), rng.gen_range(-3.0..3.0));
        let tree = build_tree(&map, &root, &model, &s, &cfg, &bbox).unwrap();
        let best = best_path(&tree, &cfg);
        let all = enumerate_paths(&map, &root, &model, &s, &cfg, &bbox);
        assert_eq!(tree.len(), all.len());
        let top = all.iter().map(|c| c.utility).fold(f64::NEG_INFINITY, f64::max);
        assert!((best.utility - top).abs() <= 1e-9 * top.abs().max(1.0));
        let winners: Vec<_> = all.iter().filter(|c| (c.utility - top).abs() <= 1e-9 * top.abs().max(1.0)).collect();
        let end = best.path.states.last().unwrap().position;
        assert!(winners.iter().any(|c| c.ends.last().map_or(root.position, |e| e.position) == end));
    }
}

#[test]
fn dijkstra_matches_floyd_warshall() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..20 {
        let n = rng.gen_range(2..25);
        let mut g = GlobalGraph::new(Vec3::zeros());
        for _ in 1..n {
            g.add_vertex(Vec3::new(rng.gen_range(0.0..20.0), rng.gen_range(0.0..20.0), 0.0), VertexKind::Visited, 0.0);
        }
        let m = rng.gen_range(0..3 * n);
        for _ in 0..m {
            let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
            if a != b {
                g.add_straight_edge(a, b);
            }
        }
        let mut fw = vec![vec![f64::INFINITY; n]; n];
        for (i, row) in fw.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        for (_, e) in g.alive_edges() {
            let w = e.length;
            fw[e.a][e.b] = fw[e.a][e.b].min(w);
            fw[e.b][e.a] = fw[e.b][e.a].min(w);
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = fw[i][k] + fw[k][j];
                    if via < fw[i][j] {
                        fw[i][j] = via;
                    }
                }
            }
        }
        for src in 0..n {
            let sp = g.dijkstra(src);
            for dst in 0..n {
                let (a, b) = (sp.dist[dst], fw[src][dst]);
                assert!(a == b || (a - b).abs() < 1e-9, "{src}->{dst}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn grid_search_matches_relaxation_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let bbox = BoundingBox::from_dims(0.2, 0.2, 0.2).unwrap();
    for _ in 0..10 {
        let map = random_map(&mut rng, 10, 0.2, 0.8, 0.15);
        let ok = traversable(&map, &bbox);
        let Some(start) = (0..map.len()).find(|&i| ok[i]) else { continue };
        let oracle = grid_distances_oracle(&map, start, &bbox);
        for _ in 0..10 {
            let goal = rng.gen_range(0..map.len());
            let got = grid_shortest_path(&map, start, &bbox, |i| i == goal);
            match got {
                None => assert!(!oracle[goal].is_finite()),
                Some((seq, len)) => {
                    assert!((len - oracle[goal]).abs() < 1e-9, "{len} vs {}", oracle[goal]);
                    assert_eq!(seq.first(), Some(&start));
                    assert_eq!(seq.last(), Some(&goal));
                }
            }
        }
    }
}
