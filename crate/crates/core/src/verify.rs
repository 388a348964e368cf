//! Certificates for a candidate `(g, u, f)`: the two optimality
//! inequalities
//!
//! * upper: `max_a {r(x,a) + Σ_y u(y) q(y|x,a)} ≤ g` for all `x`, which makes
//!   `g` an upper bound on the gain of every policy;
//! * lower: `r(x,f(x)) + Σ_y u(y) q(y|x,f(x)) ≥ g` for all `x`, which makes
//!   `g` a lower bound on the gain of `f`;
//!
//! the discrepancy `Δ(x; a, u, g) = r(x,a) + Σ_y u(y) q(y|x,a) − g`, and a
//! Monte Carlo check of the drift of
//! `M_t = ∫_0^t r(x(s), f(x(s))) ds + u(x(t)) − t g`.

use alloc::string::String;
use alloc::vec::Vec;

use crate::model::{CtmdpModel, StationaryPolicy};
use crate::numeric::mean_and_se;
use crate::rng::GENERATOR;
use crate::simulate::{simulate_path, FiniteChain, PathOptions, Runner};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Direction {
    Upper,
    Lower,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CertificateReport {
    pub direction: Direction,
    pub gain: f64,
    pub policy: Option<StationaryPolicy>,
    /// Per-state residual; positive entries violate the inequality.
    pub residuals: Vec<f64>,
    pub max_violation: f64,
    pub worst_state: usize,
    pub tol: f64,
    pub pass: bool,
}

fn finish(direction: Direction, gain: f64, policy: Option<StationaryPolicy>, residuals: Vec<f64>, tol: f64) -> CertificateReport {
    let (worst_state, max_violation) = residuals
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (x, &r)| if r > acc.1 { (x, r) } else { acc });
    CertificateReport { direction, gain, policy, pass: max_violation <= tol, residuals, max_violation, worst_state, tol }
}

/// `residual(x) = max_a {r(x,a) + Σ_y u(y) q(y|x,a)} − g`.
pub fn certify_upper(model: &CtmdpModel, g: f64, u: &[f64], tol: f64) -> Result<CertificateReport> {
    model.check_vector("u", u)?;
    let residuals = (0..model.n_states())
        .map(|x| {
            (0..model.n_actions(x))
                .map(|a| model.reward(x, a) + model.apply(u, x, a))
                .fold(f64::NEG_INFINITY, f64::max)
                - g
        })
        .collect();
    Ok(finish(Direction::Upper, g, None, residuals, tol))
}

/// `residual(x) = g − r(x,f(x)) − Σ_y u(y) q(y|x,f(x))`.
pub fn certify_lower(model: &CtmdpModel, g: f64, u: &[f64], f: &StationaryPolicy, tol: f64) -> Result<CertificateReport> {
    model.check_vector("u", u)?;
    f.check(model)?;
    let residuals = (0..model.n_states())
        .map(|x| {
            let a = f.action(x);
            g - model.reward(x, a) - model.apply(u, x, a)
        })
        .collect();
    Ok(finish(Direction::Lower, g, Some(f.clone()), residuals, tol))
}

/// `Δ(x; a, u, g) = r(x,a) + Σ_y u(y) q(y|x,a) − g`.
pub fn delta(model: &CtmdpModel, x: usize, a: usize, u: &[f64], g: f64) -> Result<f64> {
    Ok(model.reward(x, a) + crate::model::generator_apply(model, u, x, a)? - g)
}

/// `Δ(x; f, u, g)` for every state.
pub fn delta_policy(model: &CtmdpModel, f: &StationaryPolicy, u: &[f64], g: f64) -> Result<Vec<f64>> {
    model.check_vector("u", u)?;
    f.check(model)?;
    Ok((0..model.n_states()).map(|x| model.reward(x, f.action(x)) + model.apply(u, x, f.action(x)) - g).collect())
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeltaEntry {
    pub x: usize,
    pub a: usize,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MartingaleReport {
    pub x0: usize,
    pub reps: u64,
    pub seed: u64,
    pub generator: String,
    pub times: Vec<f64>,
    /// Mean and standard error of `M_t` per checkpoint.
    pub means: Vec<f64>,
    pub ses: Vec<f64>,
    /// Mean and standard error of `M_{t_{j+1}} − M_{t_j}` (paired per path).
    pub diff_means: Vec<f64>,
    pub diff_ses: Vec<f64>,
    /// Every consecutive pair satisfies `diff ≥ −3 SE(diff)`.
    pub submartingale_consistent: bool,
    /// Every consecutive pair satisfies `diff ≤ 3 SE(diff)`.
    pub supermartingale_consistent: bool,
    /// `Δ(x; f, u, g)` on the states visited by the simulated paths.
    pub delta_visited: Vec<DeltaEntry>,
    /// Extremes of `Δ(x; a, u, g)` over every state-action pair.
    pub delta_all_max: DeltaEntry,
    pub delta_all_min: DeltaEntry,
    /// Extremes of `Δ(x; f, u, g)` over every state.
    pub delta_policy_max: f64,
    pub delta_policy_min: f64,
    /// Which parts of the report rest on sampling and which are exhaustive.
    pub coverage: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingaleOptions<'a> {
    pub x0: usize,
    pub checkpoints: &'a [f64],
    pub reps: u64,
    pub seed: u64,
}

/// Default checkpoints: 8 geometrically spaced times on `[1, 1000]`.
pub fn default_checkpoints() -> Vec<f64> {
    crate::numeric::geometric_grid(1.0, 1e3, 8)
}

/// Simulates `M_t(f, u, g)` from `x0` and applies the 3·SE decision rules
/// to consecutive checkpoint means; also tabulates `Δ` exhaustively.
pub fn martingale_diagnostic<R: Runner>(
    model: &CtmdpModel,
    f: &StationaryPolicy,
    u: &[f64],
    g: f64,
    opts: &MartingaleOptions<'_>,
    runner: &R,
) -> Result<MartingaleReport> {
    model.check_vector("u", u)?;
    let chain = FiniteChain::new(model, f)?;
    let n = model.n_states();
    if opts.x0 >= n {
        return Err(Error::IndexOutOfRange { what: "initial state", index: opts.x0, len: n });
    }
    if opts.reps < 2 || opts.checkpoints.is_empty() {
        return Err(Error::InvalidParameter("need at least two replications and one checkpoint".into()));
    }
    let horizon = *opts.checkpoints.last().unwrap_or(&0.0);
    let paths = runner.run(opts.reps, |k| {
        let po = PathOptions { checkpoints: opts.checkpoints, ..Default::default() };
        let p = simulate_path(&chain, opts.x0, horizon, opts.seed, k, &po)?;
        let m: Vec<f64> = p.snapshots.iter().map(|s| s.reward_integral + u[s.state] - s.t * g).collect();
        Ok((m, p.occupation))
    })?;
    let k = opts.checkpoints.len();
    let mut means = Vec::with_capacity(k);
    let mut ses = Vec::with_capacity(k);
    for j in 0..k {
        let v: Vec<f64> = paths.iter().map(|p| p.0[j]).collect();
        let (m, s) = mean_and_se(&v);
        means.push(m);
        ses.push(s);
    }
    let mut diff_means = Vec::new();
    let mut diff_ses = Vec::new();
    for j in 0..k.saturating_sub(1) {
        let v: Vec<f64> = paths.iter().map(|p| p.0[j + 1] - p.0[j]).collect();
        let (m, s) = mean_and_se(&v);
        diff_means.push(m);
        diff_ses.push(s);
    }
    let sub = diff_means.iter().zip(&diff_ses).all(|(m, s)| *m >= -3.0 * s);
    let sup = diff_means.iter().zip(&diff_ses).all(|(m, s)| *m <= 3.0 * s);
    let dp = delta_policy(model, f, u, g)?;
    let visited: Vec<bool> = (0..n).map(|x| x == opts.x0 || paths.iter().any(|p| p.1[x] > 0.0)).collect();
    let delta_visited = (0..n)
        .filter(|&x| visited[x])
        .map(|x| DeltaEntry { x, a: f.action(x), delta: dp[x] })
        .collect();
    let mut all_max = DeltaEntry { x: 0, a: 0, delta: f64::NEG_INFINITY };
    let mut all_min = DeltaEntry { x: 0, a: 0, delta: f64::INFINITY };
    for x in 0..n {
        for a in 0..model.n_actions(x) {
            let d = model.reward(x, a) + model.apply(u, x, a) - g;
            if d > all_max.delta {
                all_max = DeltaEntry { x, a, delta: d };
            }
            if d < all_min.delta {
                all_min = DeltaEntry { x, a, delta: d };
            }
        }
    }
    Ok(MartingaleReport {
        x0: opts.x0,
        reps: opts.reps,
        seed: opts.seed,
        generator: GENERATOR.into(),
        times: opts.checkpoints.to_vec(),
        means,
        ses,
        diff_means,
        diff_ses,
        submartingale_consistent: sub,
        supermartingale_consistent: sup,
        delta_visited,
        delta_all_max: all_max,
        delta_all_min: all_min,
        delta_policy_max: dp.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        delta_policy_min: dp.iter().copied().fold(f64::INFINITY, f64::min),
        coverage: "Monte Carlo means for the given policy only; delta exhaustive over all state-action pairs".into(),
    })
}
