mod common;

use proptest::prelude::*;

use pilotgrid::assignment::{assign_random, assign_regenerative, assign_rsa};
use pilotgrid::bnp::{bnp_solve, column_cost, mask_of};
use pilotgrid::channel::{asymptotic_sinr, power_control, GroupChannel};
use pilotgrid::geometry::{assign_marks, sample_ppp, CircularWindow, Point};
use pilotgrid::linalg::Matrix;
use pilotgrid::maxmin::{feasibility, maxmin_assign, Feasibility, PartitionInstance, PartitionStatus};
use pilotgrid::spectral::{cluster_users, normalized_spectral_embedding, BipartiteGainGraph, ClusterOptions};
use pilotgrid::theory::{assignment_probability, density_curve, fit_coefficients, AssignmentProbabilityInputs, JAMMING_COVERAGE};

use common::{min_block_distance, sequential_inhibition, small_bnp_instance};

fn gain_matrix_strategy(max_rrhs: usize, max_users: usize) -> impl Strategy<Value = Matrix<f64>> {
    (2..=max_rrhs, 2..=max_users).prop_flat_map(|(m, k)| {
        proptest::collection::vec(-12.0f64..-6.0, m * k).prop_map(move |v| Matrix::from_fn(m, k, |i, j| 10f64.powf(v[i * k + j])))
    })
}

fn marked_users(density: f64, radius: f64, seed: u64) -> pilotgrid::geometry::PointSet<f64> {
    let w = CircularWindow::centered(radius).unwrap();
    assign_marks(sample_ppp(density, &w, seed).unwrap(), seed ^ 0x5a5a)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sampling_is_seed_deterministic(seed in any::<u64>(), density in 1e-6f64..1e-4) {
        let w = CircularWindow::centered(800.0).unwrap();
        let a = sample_ppp(density, &w, seed).unwrap();
        let b = sample_ppp(density, &w, seed).unwrap();
        prop_assert_eq!(a.points(), b.points());
    }

    #[test]
    fn translated_window_translates_points(seed in any::<u64>(), dx in -1e3f64..1e3, dy in -1e3f64..1e3) {
        let w = CircularWindow::centered(500.0).unwrap();
        let by = Point::new(dx, dy);
        let a = sample_ppp(5e-5, &w, seed).unwrap();
        let b = sample_ppp(5e-5, &w.translated(by), seed).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (p, q) in a.points().iter().zip(b.points()) {
            prop_assert!((p.x + dx - q.x).abs() < 1e-9 && (p.y + dy - q.y).abs() < 1e-9);
        }
    }

    #[test]
    fn distance_is_a_metric(ax in -1e3f64..1e3, ay in -1e3f64..1e3, bx in -1e3f64..1e3, by in -1e3f64..1e3) {
        let a = Point::new(ax, ay);
        let b = Point::new(bx, by);
        prop_assert_eq!(a.distance(&b), b.distance(&a));
        prop_assert!(a.distance(&b) >= 0.0);
        prop_assert_eq!(a.distance(&b) == 0.0, ax == bx && ay == by);
        prop_assert_eq!(a.distance(&a), 0.0);
    }

    #[test]
    fn estimate_quality_below_gain(beta in gain_matrix_strategy(6, 5), snr_db in 40.0f64..100.0) {
        let ch = GroupChannel::from_beta(beta.clone(), 10f64.powf(snr_db / 10.0), 4).unwrap();
        for m in 0..beta.rows() {
            for k in 0..beta.cols() {
                prop_assert!(ch.gamma[(m, k)] < beta[(m, k)]);
                prop_assert!(ch.gamma[(m, k)] > 0.0);
            }
        }
    }

    #[test]
    fn per_rrh_power_sums_to_one(seed in any::<u64>(), pilots in 1usize..6) {
        // One group per pilot, all pilots in use.
        let users = marked_users(1e-4, 400.0, seed);
        prop_assume!(users.len() >= pilots);
        let asg = assign_random::<f64>(users.len(), pilots, seed).unwrap();
        prop_assume!(asg.groups().iter().all(|g| !g.is_empty()));
        let rrhs = marked_users(5e-5, 400.0, seed.wrapping_add(1));
        prop_assume!(!rrhs.is_empty());
        let state = pilotgrid::channel::ChannelState::compute(
            rrhs.points(), users.points(), &asg, &Default::default(), 1e8,
        ).unwrap();
        for m in 0..rrhs.len() {
            let total: f64 = (0..users.len()).map(|k| state.eta[(m, k)]).sum();
            prop_assert!((total - 1.0).abs() < 1e-9, "RRH {m}: {total}");
            for g in asg.groups() {
                let share: f64 = g.iter().map(|&k| state.eta[(m, k)]).sum();
                prop_assert!((share - 1.0 / pilots as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sinr_invariant_to_common_gamma_scaling(beta in gain_matrix_strategy(5, 4), c in 0.01f64..100.0) {
        let ch = GroupChannel::from_beta(beta.clone(), 1e9, 3).unwrap();
        let scaled = Matrix::from_fn(ch.gamma.rows(), ch.gamma.cols(), |m, k| ch.gamma[(m, k)] * c);
        let eta = power_control(&scaled, 3).unwrap();
        for t in 0..beta.cols() {
            let a = asymptotic_sinr(&ch.gamma, &ch.eta, t);
            let b = asymptotic_sinr(&scaled, &eta, t);
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn packings_are_hard_core(seed in any::<u64>(), pilots in 1usize..5, radius in 20.0f64..250.0) {
        let users = marked_users(2e-4, 500.0, seed);
        for asg in [assign_rsa(&users, pilots, radius, seed).unwrap(), assign_regenerative(&users, pilots, radius).unwrap()] {
            prop_assert!(asg.hard_core_violation(&users, radius).is_none());
        }
    }

    #[test]
    fn rsa_unassigned_users_are_blocked_on_every_pilot(seed in any::<u64>(), pilots in 1usize..5, radius in 50.0f64..250.0) {
        let users = marked_users(2e-4, 500.0, seed);
        let asg = assign_rsa(&users, pilots, radius, seed).unwrap();
        for k in (0..users.len()).filter(|&k| !asg.is_assigned(k)) {
            for p in 0..pilots {
                let blocked = (0..users.len()).any(|j| asg.pilot(j) == Some(p) && users.point(j).distance(&users.point(k)) < radius);
                prop_assert!(blocked, "user {k} could take pilot {p}");
            }
        }
    }

    #[test]
    fn single_pilot_rsa_is_sequential_inhibition(seed in any::<u64>(), radius in 30.0f64..200.0) {
        let users = marked_users(2e-4, 500.0, seed);
        let asg = assign_rsa(&users, 1, radius, seed).unwrap();
        let kept = sequential_inhibition(users.points(), &users.arrival_order(), radius);
        for (k, &want) in kept.iter().enumerate() {
            prop_assert_eq!(asg.is_assigned(k), want);
        }
    }

    #[test]
    fn assignment_probability_is_a_probability(lu in -6.0f64..-2.5, r in 10.0f64..400.0, p in 1usize..32) {
        let v = assignment_probability(&AssignmentProbabilityInputs {
            user_density: 10f64.powf(lu),
            inhibition_radius: r,
            pilots: p,
            observation_radius: 1500.0,
        }).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn maxmin_partition_is_sound(seed in any::<u64>(), n in 4usize..11, p in 2usize..4) {
        prop_assume!(n >= 2 * p);
        let w = CircularWindow::centered(300.0).unwrap();
        let users = pilotgrid::geometry::sample_uniform(n, &w, seed);
        let mut inst = PartitionInstance::new(&users, p);
        inst.epsilon = 0.5;
        let r = maxmin_assign(&inst).unwrap();
        prop_assert_eq!(r.status, PartitionStatus::OptimalWithinEpsilon);
        let mut sizes = vec![0; p];
        for &k in &r.membership {
            sizes[k] += 1;
        }
        prop_assert!(sizes.iter().all(|&s| s >= 2));
        prop_assert!(min_block_distance(&r.membership, users.points()) >= r.t_star);
    }

    #[test]
    fn feasibility_is_monotone(seed in any::<u64>(), t1 in 0.0f64..400.0, t2 in 0.0f64..400.0) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let w = CircularWindow::centered(300.0).unwrap();
        let users = pilotgrid::geometry::sample_uniform(9, &w, seed);
        let inst = PartitionInstance::new(&users, 3);
        if let Feasibility::Feasible(_) = feasibility(&inst, hi) {
            prop_assert!(matches!(feasibility(&inst, lo), Feasibility::Feasible(_)));
        }
    }

    #[test]
    fn embedding_is_an_orthonormal_eigenbasis(beta in gain_matrix_strategy(8, 10), k in 1usize..4) {
        let g = BipartiteGainGraph::build(&beta).unwrap();
        let e = normalized_spectral_embedding(&g, k, false).unwrap();
        let s = g.normalized_laplacian();
        let sz = s.mul(&e.vectors);
        let mut trace = 0.0;
        for j in 0..k {
            for i in 0..g.vertices() {
                let r = sz[(i, j)] - e.eigenvalues[j] * e.vectors[(i, j)];
                prop_assert!(r.abs() <= 1e-8, "residual {r}");
                trace += e.vectors[(i, j)] * sz[(i, j)];
            }
        }
        let gram = e.vectors.transpose().mul(&e.vectors);
        for a in 0..k {
            for b in 0..k {
                let want = if a == b { 1.0 } else { 0.0 };
                prop_assert!((gram[(a, b)] - want).abs() <= 1e-8);
            }
        }
        prop_assert!((trace - e.eigenvalues.iter().sum::<f64>()).abs() <= 1e-8);
        prop_assert!(e.spectrum.iter().all(|&l| (-1e-10..=2.0 + 1e-10).contains(&l)));
    }

    #[test]
    fn clustering_ignores_power_of_two_gain_scale(beta in gain_matrix_strategy(6, 8), e in -20i32..20, seed in any::<u64>()) {
        // Power-of-two scaling is exact, so the pipeline must not move at all.
        let c = 2f64.powi(e);
        let scaled = Matrix::from_fn(beta.rows(), beta.cols(), |i, j| beta[(i, j)] * c);
        let opts = ClusterOptions::default();
        let a = cluster_users(&beta, 3, seed, &opts).unwrap();
        let b = cluster_users(&scaled, 3, seed, &opts).unwrap();
        prop_assert_eq!(a.user_membership, b.user_membership);
        prop_assert_eq!(a.rrh_membership, b.rrh_membership);
    }

    #[test]
    fn embedding_ignores_common_gain_scale(beta in gain_matrix_strategy(6, 8), c in 1e-3f64..1e3, k in 1usize..4) {
        let g = BipartiteGainGraph::build(&beta).unwrap();
        let scaled = Matrix::from_fn(beta.rows(), beta.cols(), |i, j| beta[(i, j)] * c);
        let h = BipartiteGainGraph::build(&scaled).unwrap();
        let (s, t) = (g.normalized_laplacian(), h.normalized_laplacian());
        for i in 0..s.rows() {
            for j in 0..s.cols() {
                prop_assert!((s[(i, j)] - t[(i, j)]).abs() <= 1e-12);
            }
        }
        let a = normalized_spectral_embedding(&g, k, false).unwrap();
        // Eigenvectors are only defined up to rotation inside a repeated eigenvalue.
        let sp = &a.spectrum;
        prop_assume!((1..=k).all(|i| sp[i] - sp[i - 1] > 1e-4 && (i + 1 == sp.len() || sp[i + 1] - sp[i] > 1e-4)));
        let b = normalized_spectral_embedding(&h, k, false).unwrap();
        for j in 0..k {
            let dot: f64 = (0..g.vertices()).map(|i| a.vectors[(i, j)] * b.vectors[(i, j)]).sum();
            let sign = dot.signum();
            for i in 0..g.vertices() {
                prop_assert!((a.vectors[(i, j)] - sign * b.vectors[(i, j)]).abs() <= 1e-8);
            }
        }
    }
}

#[test]
fn density_kinetics_stay_below_jamming() {
    let fit = fit_coefficients::<f64>();
    let mut prev = f64::INFINITY;
    for i in 0..=200 {
        let theta = fit.theta_inf * i as f64 / 200.0;
        let v = fit.evaluate(theta);
        assert!(v <= prev + 1e-12, "fit increases at {theta}");
        prev = v;
    }
    for (lu, r) in [(1e-5, 100.0), (1e-4, 200.0), (1e-3, 200.0)] {
        let m = density_curve(lu, r, 2e4, 50.0).unwrap();
        let mut last = 0.0;
        for &(_, rho) in &m.curve {
            assert!(rho >= last - 1e-15);
            assert!(m.kappa * rho <= JAMMING_COVERAGE + 1e-12 && rho >= 0.0);
            last = rho;
        }
    }
}

#[test]
fn more_pilots_assign_more_users_on_average() {
    for radius in [100.0, 200.0] {
        let mut totals = vec![0usize; 6];
        for seed in 0..40u64 {
            let users = marked_users(1e-4, 800.0, seed);
            for (i, p) in (1..=6).enumerate() {
                totals[i] += assign_rsa(&users, p, radius, seed).unwrap().assigned_count();
            }
        }
        assert!(totals.windows(2).all(|w| w[1] >= w[0]), "{totals:?}");
    }
}

#[test]
fn bnp_bounds_never_increase_down_the_tree() {
    let mut checked = 0;
    for seed in 0..30u64 {
        let s = small_bnp_instance(10, 6, 3, seed, 0.0);
        let out = bnp_solve(&s.instance, std::time::Duration::from_secs(60)).unwrap();
        for &(parent, child) in &out.stats.bound_pairs {
            assert!(child <= parent + 1e-8, "seed {seed}: child {child} > parent {parent}");
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn bnp_incumbent_is_a_feasible_partition() {
    for seed in 0..30u64 {
        let s = small_bnp_instance(11, 8, 3, seed, 1.0);
        let out = match bnp_solve(&s.instance, std::time::Duration::from_secs(60)) {
            Ok(o) => o,
            Err(pilotgrid::Error::Infeasible(_)) => continue,
            Err(e) => panic!("{e}"),
        };
        assert_eq!(out.columns.len(), 3);
        let mut seen = 0u64;
        for c in &out.columns {
            assert_eq!(seen & c.mask, 0);
            seen |= c.mask;
            assert!(s.instance.cluster_feasible(c.mask));
            assert!(s.instance.set_sinr(c.mask).unwrap().iter().all(|&g| g >= s.instance.sinr_floor));
            assert_eq!(column_cost(&s.instance, c.mask), c.cost);
        }
        assert_eq!(seen, mask_of(&(0..11).collect::<Vec<_>>()));
        for k in 0..11 {
            assert!(out.assignment.is_assigned(k));
        }
    }
}
