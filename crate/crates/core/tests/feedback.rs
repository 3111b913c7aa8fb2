mod common;

use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_small_case, seeded};
use tapf_core::feedback::{
    compute_delays, conflict_counts, dbs_select, default_lanczos_cap, discrepancy_matrix,
    potential_conflict_matrix, random_select, sbs_select, sbs_subsample, select_from_spectrum,
    top_eigenpairs, SbsMode, SbsParams, SparseSymmetric,
};
use tapf_core::grid::synth;
use tapf_core::instance::{generate_scenario, ScenarioConfig, TapfInstance};
use tapf_core::mapf::{position, solve_mapf, MapfOptions};
use tapf_core::matching::{initial_assignment, Assignment};

pub fn random_sparse(rng: &mut ChaCha8Rng, dim: usize, density: f64) -> SparseSymmetric {
    let mut entries = Vec::new();
    for i in 0..dim {
        for j in i + 1..dim {
            if rng.random_bool(density) {
                entries.push((i, j, rng.random_range(-5.0..10.0)));
            }
        }
    }
    SparseSymmetric::from_entries(dim, entries)
}

fn dense_top(a: &SparseSymmetric) -> (f64, Vec<f64>) {
    let n = a.dim();
    let m = DMatrix::from_fn(n, n, |i, j| a.get(i, j));
    let eig = m.symmetric_eigen();
    let (k, &lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))
        .unwrap();
    (lambda, eig.eigenvectors.column(k).iter().copied().collect())
}

fn sign_free_distance(a: &[f64], b: &[f64]) -> f64 {
    let plus = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let minus = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x + y).abs())
        .fold(0.0, f64::max);
    plus.min(minus)
}

#[test]
fn lanczos_matches_dense_solver_at_default_cap() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..30 {
        let a = random_sparse(&mut rng, 100, 0.05);
        let (lambda, v) = dense_top(&a);
        let res = top_eigenpairs(&a, 1, default_lanczos_cap(1, 100)).unwrap();
        assert!(
            (res.values[0] - lambda).abs() <= 1e-6 * lambda.abs(),
            "{} vs {lambda}",
            res.values[0]
        );
        assert!(sign_free_distance(&res.vectors[0], &v) < 1e-6);
    }
}

#[test]
fn lanczos_top_r_match_dense() {
    let mut rng = ChaCha8Rng::seed_from_u64(78);
    for _ in 0..10 {
        let a = random_sparse(&mut rng, 40, 0.1);
        let n = a.dim();
        let m = DMatrix::from_fn(n, n, |i, j| a.get(i, j));
        let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|x, y| y.total_cmp(x));
        let res = top_eigenpairs(&a, 3, n).unwrap();
        for k in 0..3 {
            assert!((res.values[k] - ev[k]).abs() < 1e-8 * ev[0].abs());
            let norm: f64 = res.vectors[k].iter().map(|x| x * x).sum();
            assert!((norm - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn conflict_matrix_matches_naive_pairwise_scan() {
    fn naive(p: &[usize], q: &[usize]) -> u32 {
        let horizon = p.len().max(q.len());
        let mut c = 0;
        for t in 0..horizon {
            if position(p, t) == position(q, t) {
                c += 1;
            }
            if t + 1 < horizon
                && position(p, t) != position(p, t + 1)
                && position(p, t) == position(q, t + 1)
                && position(p, t + 1) == position(q, t)
            {
                c += 1;
            }
        }
        c
    }
    let mut rng = seeded(31);
    for _ in 0..50 {
        let case = random_small_case(&mut rng, 6, 6);
        let agents: Vec<usize> = (0..case.inst.num_agents()).collect();
        let m = potential_conflict_matrix(&case.inst, &case.assignment, &agents);
        let paths: Vec<Vec<usize>> = agents
            .iter()
            .map(|&i| {
                case.inst
                    .dist_table(case.assignment.target(i))
                    .canonical_path(case.inst.map(), case.inst.start(i))
                    .unwrap()
            })
            .collect();
        for a in 0..agents.len() {
            assert_eq!(m.get(a, a), 0);
            for b in a + 1..agents.len() {
                assert_eq!(m.get(a, b), naive(&paths[a], &paths[b]));
                assert_eq!(m.get(a, b), m.get(b, a));
            }
        }
    }
    // Three agents on one vertex at once count as three pairwise conflicts.
    let m = conflict_counts(&[vec![0, 4], vec![1, 4], vec![2, 4]]);
    assert_eq!((m.get(0, 1), m.get(0, 2), m.get(1, 2)), (1, 1, 1));
}

#[test]
fn delays_match_independent_recount() {
    let mut rng = seeded(32);
    for _ in 0..30 {
        let case = random_small_case(&mut rng, 6, 5);
        let Ok(sol) = solve_mapf(&case.inst, &case.assignment, &MapfOptions::new(1)) else {
            continue;
        };
        let delays = compute_delays(&case.inst, &case.assignment, &sol);
        for (i, p) in sol.paths.iter().enumerate() {
            let goal = case.assignment.target(i);
            let mut last_off = 0;
            for (t, &v) in p.iter().enumerate() {
                if v != goal {
                    last_off = t + 1;
                }
            }
            let bfs = case.inst.map().bfs_distance(case.inst.start(i)).unwrap();
            let ideal = u64::from(bfs.get(goal).unwrap());
            assert_eq!(delays.0[i], last_off as u64 - ideal);
        }
    }
}

#[test]
fn delay_examples() {
    let map = Arc::new(synth::empty(8, 1));
    let inst = TapfInstance::new(map, vec![0], vec![vec![5]]).unwrap();
    let a = Assignment::new(&inst, vec![5]).unwrap();
    let straight = tapf_core::mapf::Solution::from_paths(&inst, vec![vec![0, 1, 2, 3, 4, 5]]);
    assert_eq!(compute_delays(&inst, &a, &straight).0, vec![0]);
    let detour = tapf_core::mapf::Solution::from_paths(&inst, vec![vec![0, 1, 1, 2, 2, 3, 4, 5]]);
    assert_eq!(compute_delays(&inst, &a, &detour).0, vec![2]);
}

#[test]
fn random_select_is_uniform() {
    // Chi-square goodness of fit over 20 agents, 10^5 single draws.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 20;
    let draws = 100_000;
    let mut counts = vec![0u64; n];
    for _ in 0..draws {
        counts[random_select(n, 1, &mut rng).unwrap()[0]] += 1;
    }
    let expected = draws as f64 / n as f64;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    // 19 degrees of freedom: mean 19, sd sqrt(38); 3 sd above the mean.
    assert!(chi2 < 19.0 + 3.0 * 38f64.sqrt(), "chi2 = {chi2}");
}

fn sbs_fixture() -> (TapfInstance, Assignment, Vec<u64>) {
    let map = Arc::new(synth::random_obstacles(24, 24, 15, 2));
    let inst = generate_scenario(map, 40, &ScenarioConfig::random(3)).unwrap();
    let a = initial_assignment(&inst).unwrap();
    let sol = solve_mapf(&inst, &a, &MapfOptions::new(0)).unwrap();
    let d = compute_delays(&inst, &a, &sol).0;
    (inst, a, d)
}

#[test]
fn sbs_zero_matrix_falls_back_to_dbs() {
    let (inst, a, _) = sbs_fixture();
    let zeros = vec![0u64; inst.num_agents()];
    let params = SbsParams::new(3, SbsMode::GroupPerMode);
    let got = sbs_select(
        &inst,
        &a,
        &zeros,
        &params,
        &[],
        &mut ChaCha8Rng::seed_from_u64(4),
    )
    .unwrap();
    let want = dbs_select(&zeros, 10, 3, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    assert_eq!(got, want);
}

#[test]
fn sbs_picks_lie_in_subsample() {
    let (inst, a, delays) = sbs_fixture();
    let mut params = SbsParams::new(4, SbsMode::TopKFirst);
    params.subsample = 12;
    for seed in 0..10 {
        let mut r1 = ChaCha8Rng::seed_from_u64(seed);
        let mut r2 = r1.clone();
        let sub = sbs_subsample(&inst, 12, &[0, 1], &mut r1);
        let picks = sbs_select(&inst, &a, &delays, &params, &[0, 1], &mut r2).unwrap();
        assert_eq!(picks.len(), 4);
        let m = potential_conflict_matrix(&inst, &a, &sub);
        let d = discrepancy_matrix(&m, &delays, &sub);
        if !d.is_zero() {
            assert!(
                picks.iter().all(|p| sub.contains(p)),
                "{picks:?} not in {sub:?}"
            );
        }
    }
}

#[test]
fn subsample_prefers_agents_near_previous_bottlenecks() {
    let (inst, _, _) = sbs_fixture();
    let sub = sbs_subsample(&inst, 10, &[7], &mut ChaCha8Rng::seed_from_u64(0));
    assert_eq!(sub.len(), 10);
    assert!(sub.contains(&7));
    let mut by_dist: Vec<(usize, usize)> = (0..inst.num_agents())
        .map(|i| (inst.map().manhattan(inst.start(i), inst.start(7)), i))
        .collect();
    by_dist.sort_unstable();
    for &(_, i) in by_dist.iter().take(5) {
        assert!(sub.contains(&i));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn discrepancy_zero_pattern(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let case = random_small_case(&mut rng, 6, 6);
        let n = case.inst.num_agents();
        let agents: Vec<usize> = (0..n).collect();
        let delays: Vec<u64> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let m = potential_conflict_matrix(&case.inst, &case.assignment, &agents);
        let d = discrepancy_matrix(&m, &delays, &agents);
        for i in 0..n {
            prop_assert_eq!(d.get(i, i), 0.0);
            for j in 0..n {
                prop_assert_eq!(d.get(i, j), d.get(j, i));
                let zero = m.get(i, j) == 0 || delays[i] + delays[j] == 0;
                prop_assert_eq!(d.get(i, j) == 0.0, zero);
            }
        }
    }

    #[test]
    fn selection_ignores_delay_scale(seed in any::<u64>(), scale in 1u64..50) {
        let mut rng = seeded(seed);
        let n = rng.random_range(3..30);
        let delays: Vec<u64> = (0..n).map(|_| rng.random_range(0..20)).collect();
        let scaled: Vec<u64> = delays.iter().map(|d| d * scale).collect();
        let m = n.min(10);
        let a = dbs_select(&delays, m, 2.min(m), &mut seeded(seed)).unwrap();
        let b = dbs_select(&scaled, m, 2.min(m), &mut seeded(seed)).unwrap();
        prop_assert_eq!(a, b);

        let sparse = random_sparse(&mut rng, 20, 0.2);
        let bigger = SparseSymmetric::from_entries(
            20,
            (0..20).flat_map(|i| sparse.row(i).iter().filter(move |e| e.0 > i).map(move |&(j, x)| (i, j, x * scale as f64))).collect::<Vec<_>>(),
        );
        let agents: Vec<usize> = (0..20).collect();
        let p1 = select_from_spectrum(&sparse, &agents, 3, SbsMode::TopKFirst, None);
        let p2 = select_from_spectrum(&bigger, &agents, 3, SbsMode::TopKFirst, None);
        prop_assert_eq!(p1, p2);
    }

    #[test]
    fn argmax_is_sign_invariant(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let a = random_sparse(&mut rng, 15, 0.3);
        if let Ok(res) = top_eigenpairs(&a, 1, 15) {
            let v = &res.vectors[0];
            let flipped: Vec<f64> = v.iter().map(|x| -x).collect();
            let arg = |w: &[f64]| (0..w.len()).max_by(|&i, &j| w[i].abs().total_cmp(&w[j].abs()).then(j.cmp(&i))).unwrap();
            prop_assert_eq!(arg(v), arg(&flipped));
        }
    }
}
