mod common;

use std::collections::HashSet;
use std::sync::Arc;

use proptest::prelude::*;
use rand::Rng;

use common::seeded;
use tapf_core::grid::{synth, GridMap, VertexId};
use tapf_core::instance::{
    check_feasibility, generate_scenario, write_scenario, ScenarioConfig, ScenarioFile,
    TapfInstance,
};

/// Kuhn's augmenting-path matching, kept deliberately naive.
fn kuhn_perfect(lists: &[Vec<VertexId>], vertices: usize) -> bool {
    fn try_agent(
        a: usize,
        lists: &[Vec<VertexId>],
        owner: &mut [Option<usize>],
        seen: &mut [bool],
    ) -> bool {
        for &v in &lists[a] {
            if seen[v] {
                continue;
            }
            seen[v] = true;
            if owner[v].is_none_or(|b| try_agent(b, lists, owner, seen)) {
                owner[v] = Some(a);
                return true;
            }
        }
        false
    }
    let mut owner = vec![None; vertices];
    (0..lists.len()).all(|a| try_agent(a, lists, &mut owner, &mut vec![false; vertices]))
}

fn mean_pairwise_jaccard(inst: &TapfInstance) -> f64 {
    let n = inst.num_agents();
    let sets: Vec<HashSet<VertexId>> = (0..n)
        .map(|i| inst.targets(i).iter().copied().collect())
        .collect();
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let inter = sets[i].intersection(&sets[j]).count();
            let union = sets[i].union(&sets[j]).count();
            sum += inter as f64 / union as f64;
        }
    }
    sum / (n * (n - 1) / 2) as f64
}

#[test]
fn hotspot_overlap_is_near_requested() {
    let map = Arc::new(synth::random_obstacles(64, 64, 20, 1));
    for (n, seed) in [(50, 1), (200, 2), (120, 3)] {
        let inst = generate_scenario(map.clone(), n, &ScenarioConfig::hotspot(seed)).unwrap();
        let j = mean_pairwise_jaccard(&inst);
        assert!((j - 0.8).abs() <= 0.1, "n={n}: mean Jaccard {j}");
        assert!((inst.target_overlap() - j).abs() < 1e-12);
    }
}

#[test]
fn hotspot_targets_share_one_window() {
    let map = Arc::new(synth::random_obstacles(64, 64, 20, 4));
    let inst = generate_scenario(map.clone(), 100, &ScenarioConfig::hotspot(9)).unwrap();
    let all: HashSet<VertexId> = (0..100).flat_map(|i| inst.targets(i).to_vec()).collect();
    let (xs, ys): (Vec<usize>, Vec<usize>) = all.iter().map(|&v| map.coords(v)).unzip();
    let spread = |c: &[usize]| c.iter().max().unwrap() - c.iter().min().unwrap();
    // 209 distinct targets at 80 % density fit well inside a 40-cell square.
    assert!(
        spread(&xs) < 40 && spread(&ys) < 40,
        "{} x {}",
        spread(&xs),
        spread(&ys)
    );
}

#[test]
fn random_targets_lie_in_band() {
    let map = Arc::new(synth::random_obstacles(32, 32, 20, 6));
    let cfg = ScenarioConfig::random(3);
    let (lo, hi) = cfg.band_for(&map);
    let inst = generate_scenario(map.clone(), 40, &cfg).unwrap();
    for i in 0..40 {
        assert_eq!(inst.targets(i).len(), 10);
        let bfs = map.bfs_distance(inst.start(i)).unwrap();
        for &g in inst.targets(i) {
            let d = bfs.get(g).unwrap();
            assert!((lo..=hi).contains(&d), "agent {i} target at distance {d}");
        }
    }
}

#[test]
fn feasibility_agrees_with_augmenting_path_oracle() {
    let mut rng = seeded(12);
    let mut infeasible = 0;
    for _ in 0..300 {
        let w = rng.random_range(2..6);
        let map = Arc::new(GridMap::from_passable(w, 2, vec![true; 2 * w]));
        let v = map.num_vertices();
        let n = rng.random_range(1..=v.min(6));
        let starts: Vec<VertexId> = rand::seq::index::sample(&mut rng, v, n)
            .into_iter()
            .collect();
        let lists: Vec<Vec<VertexId>> = (0..n)
            .map(|_| {
                let len = rng.random_range(1..=2);
                let mut l: Vec<VertexId> =
                    rand::seq::index::sample(&mut rng, v.min(3), len.min(v.min(3)))
                        .into_iter()
                        .collect();
                l.sort_unstable();
                l
            })
            .collect();
        let inst = TapfInstance::new_unchecked(map, starts, lists.clone()).unwrap();
        let want = kuhn_perfect(&lists, v);
        infeasible += usize::from(!want);
        assert_eq!(check_feasibility(&inst), want, "{lists:?}");
    }
    assert!(
        infeasible > 20,
        "oracle saw only {infeasible} infeasible cases"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_instances_are_feasible_and_round_trip(seed in any::<u64>(), hot in any::<bool>(), n in 1usize..40) {
        let map = Arc::new(synth::random_obstacles(24, 24, 15, seed % 7));
        let cfg = if hot { ScenarioConfig::hotspot(seed) } else { ScenarioConfig::random(seed) };
        let inst = generate_scenario(map.clone(), n, &cfg).unwrap();
        prop_assert!(check_feasibility(&inst));
        let starts: HashSet<_> = inst.starts().iter().collect();
        prop_assert_eq!(starts.len(), n);
        for i in 0..n {
            prop_assert!(!inst.targets(i).is_empty());
            prop_assert!(inst.targets(i).windows(2).all(|w| w[0] < w[1]));
        }
        let text = write_scenario(&inst, "m.map");
        let back = ScenarioFile::parse(&text).unwrap().to_instance(map).unwrap();
        prop_assert_eq!(back.starts(), inst.starts());
        for i in 0..n {
            prop_assert_eq!(back.targets(i), inst.targets(i));
        }
    }

    #[test]
    fn generation_is_reproducible(seed in any::<u64>()) {
        let map = Arc::new(synth::random_obstacles(20, 20, 10, 1));
        let a = generate_scenario(map.clone(), 15, &ScenarioConfig::hotspot(seed)).unwrap();
        let b = generate_scenario(map, 15, &ScenarioConfig::hotspot(seed)).unwrap();
        prop_assert_eq!(write_scenario(&a, "x"), write_scenario(&b, "x"));
    }
}
