use ctmdp_core::average::{solve_average, VanishingSchedule};
use ctmdp_core::builtins::*;
use ctmdp_core::linalg::stationary_distribution;
use ctmdp_core::model::*;
use ctmdp_core::simulate::*;
use ctmdp_core::Error;

fn three_state() -> CtmdpModel {
    CtmdpModel::new(
        StateSpace::plain(3),
        ActionSets::single(3),
        RateKernel::new(vec![
            vec![vec![(1, 2.0), (2, 0.5)]],
            vec![vec![(0, 1.0), (2, 3.0)]],
            vec![vec![(0, 0.7)]],
        ]),
        RewardTable { r: vec![vec![1.0], vec![0.0], vec![-2.0]] },
        None,
        Provenance::Explicit,
    )
    .unwrap()
}

fn long_path(m: &CtmdpModel, horizon: f64) -> PathRecorder<usize> {
    let f = StationaryPolicy::first(m);
    let chain = FiniteChain::new(m, &f).unwrap();
    let opts = PathOptions { record_jumps: true, ..Default::default() };
    simulate_path(&chain, 0, horizon, 99, 0, &opts).unwrap()
}

#[test]
fn holding_times_pass_kolmogorov_smirnov() {
    let m = three_state();
    let p = long_path(&m, 3e4);
    for x in 0..3 {
        let q = m.exit_rate(x, 0);
        let mut hold: Vec<f64> = Vec::new();
        let mut t_prev = 0.0;
        for (i, &t) in p.jump_times.iter().enumerate() {
            if p.states[i] == x {
                hold.push(t - t_prev);
            }
            t_prev = t;
        }
        // The first sojourn in state 0 starts at time 0 and is complete.
        let n = hold.len();
        assert!(n >= 10_000, "only {n} sojourns in state {x}");
        hold.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let d = hold
            .iter()
            .enumerate()
            .map(|(i, &h)| {
                let f = 1.0 - (-q * h).exp();
                (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(d <= 1.628 / (n as f64).sqrt(), "state {x}: D = {d}, n = {n}");
    }
}

#[test]
fn jump_destinations_follow_rates() {
    let m = three_state();
    let p = long_path(&m, 3e4);
    for x in 0..3 {
        let q = m.exit_rate(x, 0);
        let mut counts = [0usize; 3];
        for w in p.states.windows(2) {
            if w[0] == x {
                counts[w[1]] += 1;
            }
        }
        let n: usize = counts.iter().sum();
        for &(y, rate) in m.row(x, 0) {
            if y == x {
                continue;
            }
            let pr = rate / q;
            let se = (pr * (1.0 - pr) / n as f64).sqrt();
            let freq = counts[y] as f64 / n as f64;
            assert!((freq - pr).abs() <= 4.0 * se + 1e-12, "{x}->{y}: {freq} vs {pr}");
        }
    }
}

#[test]
fn occupation_matches_stationary_distribution() {
    let m = three_state();
    let p = long_path(&m, 1e5);
    let st = stationary_distribution(&m, &StationaryPolicy::first(&m)).unwrap();
    let tv: f64 = p.occupation.iter().zip(&st.pi).map(|(o, pi)| (o / 1e5 - pi).abs()).sum::<f64>() / 2.0;
    assert!(tv <= 0.01, "total variation {tv}");
}

#[test]
fn average_reward_unbiased_across_seeds() {
    let m = build_birth_death(&BirthDeathParams { p1: 0.3, grid: 3, ..Default::default() }).unwrap();
    let s = solve_average(&m, &VanishingSchedule::default(), 1e-8).unwrap();
    let chain = FiniteChain::new(&m, &s.policy).unwrap();
    let zs: Vec<f64> = (0..20)
        .map(|seed| {
            let r = estimate_average_reward(&chain, 0, 2e3, 10, seed, &Sequential).unwrap();
            (r.mean - s.gain) / r.se
        })
        .collect();
    let mean_z = zs.iter().sum::<f64>() / zs.len() as f64;
    // Mean of 20 roughly standard normal scores: SE ≈ 0.22.
    assert!(mean_z.abs() < 0.8, "mean z {mean_z}");
    assert!(zs.iter().all(|z| z.abs() < 4.5), "{zs:?}");
}

#[test]
fn higher_start_stays_stochastically_larger() {
    let m = build_birth_death(&BirthDeathParams { grid: 2, ..Default::default() }).unwrap();
    let f = StationaryPolicy::first(&m);
    let chain = FiniteChain::new(&m, &f).unwrap();
    let times = [0.05, 0.1, 0.2, 0.5, 1.0];
    let lo = lyapunov_bound(&chain, 1.0, 4.0, 5, &times, 4000, 3, &Sequential).unwrap();
    let hi = lyapunov_bound(&chain, 1.0, 4.0, 10, &times, 4000, 3, &Sequential).unwrap();
    for (a, b) in lo.rows.iter().zip(&hi.rows) {
        assert!(b.mean + 3.0 * (a.se * a.se + b.se * b.se).sqrt() >= a.mean, "t = {}", a.t);
    }
}

#[test]
fn same_seed_same_estimate_and_streams_differ() {
    let m = three_state();
    let f = StationaryPolicy::first(&m);
    let chain = FiniteChain::new(&m, &f).unwrap();
    let a = estimate_average_reward(&chain, 0, 100.0, 4, 1, &Sequential).unwrap();
    let b = estimate_average_reward(&chain, 0, 100.0, 4, 1, &Sequential).unwrap();
    assert_eq!(a, b);
    assert!(a.values.windows(2).all(|w| w[0] != w[1]));
}

#[test]
fn runaway_paths_are_reported() {
    let m = three_state();
    let f = StationaryPolicy::first(&m);
    let chain = FiniteChain::new(&m, &f).unwrap();
    let opts = PathOptions { max_jumps: 50, ..Default::default() };
    let r = simulate_path(&chain, 0, 1e6, 0, 0, &opts);
    assert!(matches!(r, Err(Error::ExplosionSuspected { jumps: 50, .. })));
}

#[test]
fn potlach_rate_and_mean_jump() {
    let process = build_potlach(&PotlachParams::uniform(3, 4.0)).unwrap();
    let action = PotlachAction { matrix: 0, q: vec![0.5; 3] };
    let chain = PotlachChain::new(&process, action.clone()).unwrap();
    assert_eq!(chain.exit_rate(&vec![1.0, 50.0, 3.0]), 3.0);
    // Mass moves only by the scale factor: E[Δw | component i] = (1/λ − 1) x_i.
    let x = vec![1.0, 2.0, 3.0];
    assert!((process.expected_drift(&x) - (0.25 - 1.0) * 6.0).abs() < 1e-12);
    let mut rng = ctmdp_core::rng::StreamRng::new(4, 0, ctmdp_core::rng::Role::Test);
    let n = 200_000;
    let mut total = 0.0;
    for _ in 0..n {
        let y = chain.sample_jump(&x, &mut rng);
        total += process.weight(&y) - process.weight(&x);
    }
    let mean = total / n as f64 * process.exit_rate();
    assert!((mean - process.expected_drift(&x)).abs() < 0.05, "{mean}");
}

#[test]
fn moment_bound_from_model_constants() {
    let m = build_birth_death(&BirthDeathParams::default()).unwrap();
    let f = StationaryPolicy::first(&m);
    let r = check_lyapunov_bound(&m, &f, 20, &[0.1, 1.0, 5.0], 500, 2, &Sequential).unwrap();
    assert!(r.pass);
    assert_eq!(r.w0, 21.0);
}

#[test]
fn ergodicity_fit_detects_decay() {
    let m = three_state();
    let f = StationaryPolicy::first(&m);
    let probe = vec![vec![1.0, 0.0, 0.0]];
    let times = [0.05, 0.1, 0.2, 0.4, 0.8, 1.6];
    let opts = ErgodicityOptions { starts: [0, 2], checkpoints: &times, reps: 4000, seed: 8, stationary_horizon: 2e4, stationary_reps: 4 };
    let r = estimate_ergodicity(&m, &f, &probe, &opts, &Sequential).unwrap();
    assert!(r.empirical);
    assert!(r.decay_detected);
    assert!(r.rho_hat.unwrap() > 0.0);
}
