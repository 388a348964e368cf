use ctmdp_core::average::{solve_average, VanishingSchedule};
use ctmdp_core::builtins::*;
use ctmdp_core::discounted::{bellman_operator, solve_discounted, uniformize, uniformize_row};
use ctmdp_core::lyapunov::check_assumption_a;
use ctmdp_core::model::*;
use ctmdp_core::simulate::{simulate_path, FiniteChain, PathOptions};
use proptest::prelude::*;

/// Irreducible random model: every off-diagonal rate is positive.
fn random_model() -> impl Strategy<Value = CtmdpModel> {
    (2usize..6, 1usize..4).prop_flat_map(|(n, k)| {
        (
            prop::collection::vec(prop::collection::vec(prop::collection::vec(0.05f64..3.0, n), k), n),
            prop::collection::vec(prop::collection::vec(-5.0f64..5.0, k), n),
        )
            .prop_map(move |(rates, rewards)| {
                let rows = rates
                    .iter()
                    .enumerate()
                    .map(|(x, acts)| {
                        acts.iter()
                            .map(|r| r.iter().enumerate().filter(|(y, _)| *y != x).map(|(y, &q)| (y, q)).collect())
                            .collect()
                    })
                    .collect();
                CtmdpModel::new(
                    StateSpace::plain(n),
                    ActionSets::new((0..n).map(|_| (0..k).map(|a| vec![a as f64]).collect()).collect()),
                    RateKernel::new(rows),
                    RewardTable { r: rewards },
                    None,
                    Provenance::Explicit,
                )
                .unwrap()
            })
    })
}

fn sup(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn uniformized_rows_lie_in_simplex(m in random_model()) {
        let uk = uniformize(&m);
        for x in 0..m.n_states() {
            for a in 0..m.n_actions(x) {
                let row = uk.row(x, a);
                prop_assert!(row.iter().all(|e| e.1 >= 0.0));
                let s: f64 = row.iter().map(|e| e.1).sum();
                prop_assert!((s - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn uniformize_row_keeps_mass(rates in prop::collection::vec(0.0f64..100.0, 1..10), extra in 0.0f64..5.0) {
        let x = 0;
        let mut row: Vec<(usize, f64)> = rates.iter().enumerate().map(|(i, &q)| (i + 1, q)).collect();
        let exit: f64 = rates.iter().sum();
        row.push((x, -exit));
        let u = uniformize_row(x, &row, exit + 1.0 + extra);
        let s: f64 = u.iter().map(|e| e.1).sum();
        prop_assert!((s - 1.0).abs() <= 1e-12);
        prop_assert!(u.iter().all(|e| e.1 >= 0.0));
    }

    #[test]
    fn bellman_operator_contracts(
        m in random_model(),
        alpha in 0.01f64..2.0,
        seed in prop::collection::vec(-10.0f64..10.0, 6),
        shift in prop::collection::vec(-10.0f64..10.0, 6),
    ) {
        let n = m.n_states();
        let u: Vec<f64> = seed[..n].to_vec();
        let v: Vec<f64> = u.iter().zip(&shift[..n]).map(|(a, b)| a + b).collect();
        let kappa = (0..n).map(|x| { let q = m.q_max(x) + 1.0; q / (alpha + q) }).fold(0.0, f64::max);
        let tu = bellman_operator(&m, alpha, &u);
        let tv = bellman_operator(&m, alpha, &v);
        prop_assert!(sup(&tu, &tv) <= kappa * sup(&u, &v) + 1e-12);
    }

    #[test]
    fn bellman_operator_is_monotone(
        m in random_model(),
        alpha in 0.01f64..2.0,
        seed in prop::collection::vec(-10.0f64..10.0, 6),
        bump in prop::collection::vec(0.0f64..5.0, 6),
    ) {
        let n = m.n_states();
        let u: Vec<f64> = seed[..n].to_vec();
        let v: Vec<f64> = u.iter().zip(&bump[..n]).map(|(a, b)| a + b).collect();
        let tu = bellman_operator(&m, alpha, &u);
        let tv = bellman_operator(&m, alpha, &v);
        prop_assert!(tu.iter().zip(&tv).all(|(a, b)| *a <= *b + 1e-12));
    }

    #[test]
    fn discounted_fixed_point(m in random_model(), alpha in 0.05f64..2.0) {
        let s = solve_discounted(&m, alpha, 1e-12, 1_000_000).unwrap();
        let tj = bellman_operator(&m, alpha, &s.j);
        let scale = s.j.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        prop_assert!(sup(&tj, &s.j) <= 1e-9 * scale);
    }

    #[test]
    fn truncated_birth_death_validates(
        lambda in 0.1f64..5.0,
        mu1 in 0.1f64..5.0,
        spread in 0.1f64..3.0,
        p1 in 0.0f64..1.0,
        grid in 1usize..5,
        n in 3usize..40,
    ) {
        let p = BirthDeathParams { lambda, mu1, mu2: mu1 + spread, p1, grid, n, ..Default::default() };
        let m = build_birth_death(&p).unwrap();
        let rep = validate_model(&m);
        prop_assert!(rep.ok, "{:?}", rep.violations.first());
        prop_assert_eq!(m.n_states(), n + 1);
    }

    #[test]
    fn truncated_tandem_validates(mu1 in 0.5f64..4.0, mu2 in 0.5f64..4.0, n in 2usize..8) {
        let p = TandemParams { mu1, mu1_star: mu1 + 1.0, mu2, mu2_star: mu2 + 1.0, grid: 2, n, ..Default::default() };
        let m = build_tandem(&p).unwrap();
        prop_assert!(validate_model(&m).ok);
        prop_assert_eq!(m.n_states(), (n + 1) * (n + 1));
    }

    #[test]
    fn reported_b_hat_is_feasible(m in random_model(), w in prop::collection::vec(1.0f64..10.0, 6), c in 0.01f64..2.0) {
        let n = m.n_states();
        let mut m = m;
        m.lyapunov = Some(LyapunovData::new(w[..n].to_vec(), c, 0.0, 100.0));
        let b_hat = check_assumption_a(&m).unwrap().b_hat.unwrap();
        m.lyapunov.as_mut().unwrap().b = b_hat.max(0.0) + 1e-9;
        let rep = check_assumption_a(&m).unwrap();
        for rec in rep.checks.iter().filter(|r| r.name == "drift") {
            prop_assert!(rec.pass, "{:?}", rec);
        }
    }

    #[test]
    fn gain_scales_and_shifts(m in random_model(), s in 0.1f64..4.0, k in -5.0f64..5.0) {
        let sched = VanishingSchedule::default();
        let base = solve_average(&m, &sched, 1e-9).unwrap();
        let scaled = solve_average(&m.map_rewards(|r| s * r), &sched, 1e-9).unwrap();
        let shifted = solve_average(&m.map_rewards(|r| r + k), &sched, 1e-9).unwrap();
        let tol = 1e-7 * (1.0 + base.gain.abs() + k.abs()) * (1.0 + s);
        prop_assert!((scaled.gain - s * base.gain).abs() <= tol);
        prop_assert!((shifted.gain - base.gain - k).abs() <= tol);
        for x in 0..m.n_states() {
            prop_assert!((scaled.h[x] - s * base.h[x]).abs() <= tol);
            prop_assert!((shifted.h[x] - base.h[x]).abs() <= tol);
        }
    }

    #[test]
    fn envelope_brackets_relative_values(m in random_model()) {
        let s = solve_average(&m, &VanishingSchedule::default(), 1e-8).unwrap();
        for x in 0..m.n_states() {
            prop_assert!(s.h_lower[x] <= s.h[x] && s.h[x] <= s.h_upper[x]);
        }
        prop_assert_eq!(s.h[s.x0], 0.0);
    }

    #[test]
    fn simulation_is_deterministic(m in random_model(), seed in any::<u64>(), rep in 0u64..1000) {
        let f = StationaryPolicy::first(&m);
        let chain = FiniteChain::new(&m, &f).unwrap();
        let opts = PathOptions { record_jumps: true, ..Default::default() };
        let a = simulate_path(&chain, 0, 20.0, seed, rep, &opts).unwrap();
        let b = simulate_path(&chain, 0, 20.0, seed, rep, &opts).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn validation_flags_broken_rows(m in random_model(), x in 0usize..6, bump in 0.01f64..1.0) {
        let x = x % m.n_states();
        let mut rows = m.kernel.rows().to_vec();
        rows[x][0].push((x, bump));
        let broken = CtmdpModel::new(m.states.clone(), m.actions.clone(), RateKernel::new(rows), m.rewards.clone(), None, Provenance::Explicit).unwrap();
        let rep = validate_model(&broken);
        prop_assert!(!rep.ok);
        prop_assert!(rep.violations.iter().any(|v| v.x == x && v.kind == ViolationKind::RowSum));
    }
}
