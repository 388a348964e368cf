//! Event-driven (Gillespie) simulation of the controlled jump process under
//! a stationary policy, with estimators for the average reward, the
//! Lyapunov moment bound `E w(x(t)) ≤ e^{−ct} w(x0) + b/c` and the
//! exponential-ergodicity decay rate.
//!
//! Replications are independent: replication `k` draws from stream
//! `(k << 8) | role` of the master seed (see [`crate::rng`]). Estimators take
//! a [`Runner`] that maps replication indices to results in index order,
//! so a parallel runner gives results identical to [`Sequential`].

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::builtins::{PotlachAction, PotlachProcess};
use crate::model::{CtmdpModel, StationaryPolicy};
use crate::numeric::mean_and_se;
use crate::rng::{Role, StreamRng, GENERATOR};
use crate::{Error, Result};

pub const DEFAULT_MAX_JUMPS: u64 = 100_000_000;

/// A time-homogeneous jump process with a reward rate and a weight.
pub trait JumpProcess {
    type State: Clone;

    /// Total jump rate out of `x`; zero means absorbing.
    fn exit_rate(&self, x: &Self::State) -> f64;

    /// Draws the post-jump state.
    fn sample_jump(&self, x: &Self::State, rng: &mut StreamRng) -> Self::State;

    fn reward_rate(&self, x: &Self::State) -> f64;

    fn weight(&self, x: &Self::State) -> f64;

    /// Index for occupation-time bookkeeping on finite spaces.
    fn index(&self, _x: &Self::State) -> Option<usize> {
        None
    }

    /// Number of indexable states (0 for continuous state spaces).
    fn n_indices(&self) -> usize {
        0
    }

    /// Action taken at `x`, when the process is a policy on a tabulated model.
    fn action(&self, _x: &Self::State) -> Option<usize> {
        None
    }

    fn describe(&self, x: &Self::State) -> String;
}

/// A tabulated model run under a stationary policy.
#[derive(Debug, Clone)]
pub struct FiniteChain<'a> {
    model: &'a CtmdpModel,
    policy: StationaryPolicy,
    weights: Vec<f64>,
    /// Per state: off-diagonal targets with cumulative rates.
    cumulative: Vec<Vec<(usize, f64)>>,
    exit: Vec<f64>,
}

impl<'a> FiniteChain<'a> {
    /// Uses the model's Lyapunov `w` as weight, or `w ≡ 1` without one.
    pub fn new(model: &'a CtmdpModel, policy: &StationaryPolicy) -> Result<Self> {
        policy.check(model)?;
        let n = model.n_states();
        let mut cumulative = Vec::with_capacity(n);
        let mut exit = Vec::with_capacity(n);
        for x in 0..n {
            let mut acc = 0.0;
            let mut c = Vec::new();
            for &(y, q) in model.row(x, policy.action(x)) {
                if y != x && q > 0.0 {
                    acc += q;
                    c.push((y, acc));
                }
            }
            cumulative.push(c);
            exit.push(acc);
        }
        let weights = model.lyapunov.as_ref().map(|l| l.w.clone()).unwrap_or_else(|| vec![1.0; n]);
        Ok(FiniteChain { model, policy: policy.clone(), weights, cumulative, exit })
    }

    /// Replaces the weight function (e.g. a probe function).
    pub fn with_weights(mut self, w: Vec<f64>) -> Result<Self> {
        self.model.check_vector("weights", &w)?;
        self.weights = w;
        Ok(self)
    }

    pub fn policy(&self) -> &StationaryPolicy {
        &self.policy
    }
}

impl JumpProcess for FiniteChain<'_> {
    type State = usize;

    fn exit_rate(&self, x: &usize) -> f64 {
        // Sum of the positive off-diagonal rates; equals −q({x}|x,f(x)) on
        // conservative rows.
        self.exit[*x]
    }

    fn sample_jump(&self, x: &usize, rng: &mut StreamRng) -> usize {
        let c = &self.cumulative[*x];
        let target = rng.uniform() * self.exit[*x];
        c.iter().find(|e| target < e.1).map_or(c[c.len() - 1].0, |e| e.0)
    }

    fn reward_rate(&self, x: &usize) -> f64 {
        self.model.reward(*x, self.policy.action(*x))
    }

    fn weight(&self, x: &usize) -> f64 {
        self.weights[*x]
    }

    fn index(&self, x: &usize) -> Option<usize> {
        Some(*x)
    }

    fn n_indices(&self) -> usize {
        self.model.n_states()
    }

    fn action(&self, x: &usize) -> Option<usize> {
        Some(self.policy.action(*x))
    }

    fn describe(&self, x: &usize) -> String {
        match self.model.states.label(*x) {
            Some(l) => format!("state {x} {l:?}"),
            None => format!("state {x}"),
        }
    }
}

/// The Potlach process under a fixed action.
#[derive(Debug, Clone)]
pub struct PotlachChain<'a> {
    pub process: &'a PotlachProcess,
    pub action: PotlachAction,
}

impl<'a> PotlachChain<'a> {
    pub fn new(process: &'a PotlachProcess, action: PotlachAction) -> Result<Self> {
        process.check_action(&action)?;
        Ok(PotlachChain { process, action })
    }
}

impl JumpProcess for PotlachChain<'_> {
    type State = Vec<f64>;

    fn exit_rate(&self, _x: &Vec<f64>) -> f64 {
        self.process.exit_rate()
    }

    fn sample_jump(&self, x: &Vec<f64>, rng: &mut StreamRng) -> Vec<f64> {
        let i = rng.index(self.process.d());
        let y = rng.exponential(self.process.params.lambda);
        self.process.jump(x, &self.action, i, y)
    }

    fn reward_rate(&self, x: &Vec<f64>) -> f64 {
        self.process.reward(x, &self.action)
    }

    fn weight(&self, x: &Vec<f64>) -> f64 {
        self.process.weight(x)
    }

    fn describe(&self, x: &Vec<f64>) -> String {
        format!("{x:?}")
    }
}

/// Snapshot of a path at a checkpoint time.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Snapshot<S> {
    pub t: f64,
    pub state: S,
    pub reward_integral: f64,
    pub weight: f64,
}

/// One simulated path on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PathRecorder<S> {
    pub horizon: f64,
    /// Jump epochs (only with `record_jumps`).
    pub jump_times: Vec<f64>,
    /// Initial state followed by each post-jump state (only with `record_jumps`).
    pub states: Vec<S>,
    /// Action in force in each visited state, for tabulated models.
    pub actions: Vec<usize>,
    pub jumps: u64,
    /// `∫_0^T r(x(s), f(x(s))) ds`.
    pub reward_integral: f64,
    pub final_state: S,
    pub snapshots: Vec<Snapshot<S>>,
    /// Time spent in each indexed state (empty for continuous states).
    pub occupation: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOptions<'a> {
    pub record_jumps: bool,
    /// Increasing checkpoint times in `[0, T]`.
    pub checkpoints: &'a [f64],
    pub max_jumps: u64,
    pub role: Role,
}

impl Default for PathOptions<'_> {
    fn default() -> Self {
        PathOptions { record_jumps: false, checkpoints: &[], max_jumps: DEFAULT_MAX_JUMPS, role: Role::Path }
    }
}

/// Neumaier accumulator for the reward integral.
#[derive(Default, Clone, Copy)]
struct Acc {
    s: f64,
    c: f64,
}

impl Acc {
    fn add(&mut self, v: f64) {
        let t = self.s + v;
        if self.s.abs() >= v.abs() {
            self.c += (self.s - t) + v;
        } else {
            self.c += (v - t) + self.s;
        }
        self.s = t;
    }

    fn value(&self) -> f64 {
        self.s + self.c
    }
}

/// Simulates replication `rep` of the process from `x0` up to `horizon`.
pub fn simulate_path<P: JumpProcess>(
    process: &P,
    x0: P::State,
    horizon: f64,
    seed: u64,
    rep: u64,
    opts: &PathOptions<'_>,
) -> Result<PathRecorder<P::State>> {
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter(format!("horizon must be finite and nonnegative, got {horizon}")));
    }
    if opts.checkpoints.windows(2).any(|w| !(w[0] <= w[1])) || opts.checkpoints.iter().any(|&t| !(0.0..=horizon).contains(&t)) {
        return Err(Error::InvalidParameter("checkpoints must be increasing and lie in [0, horizon]".into()));
    }
    let mut rng = StreamRng::new(seed, rep, opts.role);
    let mut occupation = vec![0.0; process.n_indices()];
    let mut jump_times = Vec::new();
    let mut states = Vec::new();
    let mut actions = Vec::new();
    if opts.record_jumps {
        states.push(x0.clone());
        actions.extend(process.action(&x0));
    }
    let mut snapshots = Vec::with_capacity(opts.checkpoints.len());
    let mut next_cp = 0;
    let mut reward = Acc::default();
    let mut t = 0.0;
    let mut x = x0;
    let mut jumps = 0u64;
    loop {
        let rate = process.exit_rate(&x);
        let t_next = if rate > 0.0 { t + rng.exponential(rate) } else { f64::INFINITY };
        let end = if t_next < horizon { t_next } else { horizon };
        let r = process.reward_rate(&x);
        while next_cp < opts.checkpoints.len() && opts.checkpoints[next_cp] <= end {
            let tc = opts.checkpoints[next_cp];
            let mut acc = reward;
            acc.add(r * (tc - t));
            snapshots.push(Snapshot { t: tc, state: x.clone(), reward_integral: acc.value(), weight: process.weight(&x) });
            next_cp += 1;
        }
        reward.add(r * (end - t));
        if let Some(i) = process.index(&x) {
            occupation[i] += end - t;
        }
        if t_next >= horizon {
            break;
        }
        t = t_next;
        x = process.sample_jump(&x, &mut rng);
        jumps += 1;
        if opts.record_jumps {
            jump_times.push(t);
            states.push(x.clone());
            actions.extend(process.action(&x));
        }
        if jumps >= opts.max_jumps {
            return Err(Error::ExplosionSuspected { jumps, time: t, state: process.describe(&x) });
        }
    }
    Ok(PathRecorder {
        horizon,
        jump_times,
        states,
        actions,
        jumps,
        reward_integral: reward.value(),
        final_state: x,
        snapshots,
        occupation,
    })
}

/// Maps replication indices `0..reps` to results, in index order.
pub trait Runner {
    fn run<T, F>(&self, reps: u64, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64) -> Result<T> + Sync + Send;
}

/// Runs replications one after another.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Runner for Sequential {
    fn run<T, F>(&self, reps: u64, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(u64) -> Result<T> + Sync + Send,
    {
        (0..reps).map(f).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimulationReport {
    pub horizon: f64,
    pub reps: u64,
    pub seed: u64,
    pub generator: String,
    /// Per-replication `(1/T) ∫_0^T r ds`.
    pub values: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation over `sqrt(reps)`.
    pub se: f64,
    /// Occupation-time fractions averaged over replications.
    pub occupation: Vec<f64>,
    pub jumps: Vec<u64>,
}

/// Time-averaged reward `(1/T) ∫_0^T r ds` over `reps` replications.
pub fn estimate_average_reward<P, R>(process: &P, x0: P::State, horizon: f64, reps: u64, seed: u64, runner: &R) -> Result<SimulationReport>
where
    P: JumpProcess + Sync,
    P::State: Send + Sync,
    R: Runner,
{
    if reps == 0 || !(horizon > 0.0) {
        return Err(Error::InvalidParameter("need reps >= 1 and a positive horizon".into()));
    }
    let paths = runner.run(reps, |k| {
        let p = simulate_path(process, x0.clone(), horizon, seed, k, &PathOptions::default())?;
        Ok((p.reward_integral / horizon, p.occupation, p.jumps))
    })?;
    let values: Vec<f64> = paths.iter().map(|p| p.0).collect();
    let (mean, se) = mean_and_se(&values);
    let n = process.n_indices();
    let mut occupation = vec![0.0; n];
    for (_, occ, _) in &paths {
        for (o, v) in occupation.iter_mut().zip(occ) {
            *o += v / horizon / reps as f64;
        }
    }
    Ok(SimulationReport {
        horizon,
        reps,
        seed,
        generator: GENERATOR.into(),
        jumps: paths.iter().map(|p| p.2).collect(),
        values,
        mean,
        se,
        occupation,
    })
}

/// Per-checkpoint mean and standard error of `w(x(t))`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MomentRow {
    pub t: f64,
    pub mean: f64,
    pub se: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LyapunovBoundReport {
    pub c: f64,
    pub b: f64,
    pub w0: f64,
    pub reps: u64,
    pub seed: u64,
    pub rows: Vec<MomentRow>,
    pub pass: bool,
}

/// Snapshots of `reps` paths at the checkpoints.
fn snapshot_matrix<P, R>(process: &P, x0: &P::State, checkpoints: &[f64], reps: u64, seed: u64, role: Role, runner: &R) -> Result<Vec<Vec<Snapshot<P::State>>>>
where
    P: JumpProcess + Sync,
    P::State: Send + Sync,
    R: Runner,
{
    let horizon = checkpoints.last().copied().unwrap_or(0.0);
    runner.run(reps, |k| {
        let opts = PathOptions { checkpoints, role, ..Default::default() };
        Ok(simulate_path(process, x0.clone(), horizon, seed, k, &opts)?.snapshots)
    })
}

/// Checks `mean w(x(t)) ≤ e^{−ct} w(x0) + b/c + 3 SE` at each checkpoint
/// for explicit constants `(c, b)`.
pub fn lyapunov_bound<P, R>(process: &P, c: f64, b: f64, x0: P::State, checkpoints: &[f64], reps: u64, seed: u64, runner: &R) -> Result<LyapunovBoundReport>
where
    P: JumpProcess + Sync,
    P::State: Send + Sync,
    R: Runner,
{
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!("drift constant c must be positive, got {c}")));
    }
    if reps < 2 {
        return Err(Error::InvalidParameter("need at least two replications".into()));
    }
    let w0 = process.weight(&x0);
    let snaps = snapshot_matrix(process, &x0, checkpoints, reps, seed, Role::Path, runner)?;
    let rows: Vec<MomentRow> = checkpoints
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let ws: Vec<f64> = snaps.iter().map(|s| s[j].weight).collect();
            let (mean, se) = mean_and_se(&ws);
            let bound = libm::exp(-c * t) * w0 + b / c;
            MomentRow { t, mean, se, bound, pass: mean <= bound + 3.0 * se }
        })
        .collect();
    Ok(LyapunovBoundReport { c, b, w0, reps, seed, pass: rows.iter().all(|r| r.pass), rows })
}

/// [`lyapunov_bound`] with `(w, c, b)` taken from the model's Lyapunov data.
pub fn check_lyapunov_bound<R: Runner>(
    model: &CtmdpModel,
    f: &StationaryPolicy,
    x0: usize,
    checkpoints: &[f64],
    reps: u64,
    seed: u64,
    runner: &R,
) -> Result<LyapunovBoundReport> {
    let l = model.lyapunov.as_ref().ok_or(Error::MissingLyapunov("model carries no Lyapunov data"))?;
    let chain = FiniteChain::new(model, f)?;
    if x0 >= model.n_states() {
        return Err(Error::IndexOutOfRange { what: "initial state", index: x0, len: model.n_states() });
    }
    lyapunov_bound(&chain, l.c, l.b, x0, checkpoints, reps, seed, runner)
}

/// Through-origin regression of `E w(x(t)) − w(x0)` on `t · w(x0)` over
/// small times: estimates the drift coefficient `κ` in `d/dt E w = κ w`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DriftEstimate {
    pub times: Vec<f64>,
    pub mean_increments: Vec<f64>,
    pub ses: Vec<f64>,
    pub w0: f64,
    pub coefficient: f64,
    /// Standard error of the coefficient from the spread of per-replication slopes.
    pub coefficient_se: f64,
}

pub fn estimate_initial_drift<P, R>(process: &P, x0: P::State, times: &[f64], reps: u64, seed: u64, runner: &R) -> Result<DriftEstimate>
where
    P: JumpProcess + Sync,
    P::State: Send + Sync,
    R: Runner,
{
    if times.is_empty() || times[0] <= 0.0 || reps < 2 {
        return Err(Error::InvalidParameter("need positive times and at least two replications".into()));
    }
    let w0 = process.weight(&x0);
    let snaps = snapshot_matrix(process, &x0, times, reps, seed, Role::Path, runner)?;
    let tt: f64 = times.iter().map(|t| t * t).sum();
    let mut mean_increments = Vec::with_capacity(times.len());
    let mut ses = Vec::with_capacity(times.len());
    for j in 0..times.len() {
        let d: Vec<f64> = snaps.iter().map(|s| s[j].weight - w0).collect();
        let (m, se) = mean_and_se(&d);
        mean_increments.push(m);
        ses.push(se);
    }
    // Per-replication slopes make the standard error account for the
    // correlation between checkpoints of one path.
    let slopes: Vec<f64> = snaps
        .iter()
        .map(|s| times.iter().zip(s).map(|(t, sn)| t * (sn.weight - w0)).sum::<f64>() / (tt * w0))
        .collect();
    let (coefficient, coefficient_se) = mean_and_se(&slopes);
    Ok(DriftEstimate { times: times.to_vec(), mean_increments, ses, w0, coefficient, coefficient_se })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ErgodicityRow {
    pub probe: usize,
    pub start: usize,
    pub t: f64,
    pub mean: f64,
    pub se: f64,
    /// `|mean − μ̂(u)|`.
    pub distance: f64,
    /// Standard error of `distance` (combining the path and μ̂ errors).
    pub distance_se: f64,
    pub above_noise: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ErgodicityReport {
    /// `μ̂_f(u)` per probe.
    pub stationary_means: Vec<f64>,
    pub stationary_ses: Vec<f64>,
    pub rows: Vec<ErgodicityRow>,
    /// Fitted decay rate of `|E_x u(x(t)) − μ̂(u)| / w(x) ≈ R e^{−ρ t}`.
    pub rho_hat: Option<f64>,
    pub r_hat: Option<f64>,
    pub decay_detected: bool,
    pub points_used: usize,
    /// Always true: the constants are Monte Carlo fits, not bounds.
    pub empirical: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErgodicityOptions<'a> {
    pub starts: [usize; 2],
    pub checkpoints: &'a [f64],
    pub reps: u64,
    pub seed: u64,
    /// Horizon of the long runs estimating `μ̂_f`.
    pub stationary_horizon: f64,
    pub stationary_reps: u64,
}

/// Estimates `|E_x u(x(t)) − μ̂_f(u)|` at checkpoints for each probe and
/// both starts and fits `ρ̂` by least squares on points above the noise
/// floor (distance more than twice its standard error).
pub fn estimate_ergodicity<R: Runner>(
    model: &CtmdpModel,
    f: &StationaryPolicy,
    probes: &[Vec<f64>],
    opts: &ErgodicityOptions<'_>,
    runner: &R,
) -> Result<ErgodicityReport> {
    let chain = FiniteChain::new(model, f)?;
    for p in probes {
        model.check_vector("probe", p)?;
    }
    for &s in &opts.starts {
        if s >= model.n_states() {
            return Err(Error::IndexOutOfRange { what: "start state", index: s, len: model.n_states() });
        }
    }
    if opts.reps < 2 || opts.stationary_reps < 2 {
        return Err(Error::InvalidParameter("need at least two replications".into()));
    }
    let w = chain.weights.clone();
    // Long runs for μ̂_f.
    let occ = runner.run(opts.stationary_reps, |k| {
        let o = PathOptions { role: Role::Stationary, ..Default::default() };
        let p = simulate_path(&chain, opts.starts[0], opts.stationary_horizon, opts.seed, k, &o)?;
        Ok(p.occupation)
    })?;
    let mut stationary_means = Vec::new();
    let mut stationary_ses = Vec::new();
    for u in probes {
        let vals: Vec<f64> = occ
            .iter()
            .map(|o| o.iter().zip(u).map(|(t, u)| t * u).sum::<f64>() / opts.stationary_horizon)
            .collect();
        let (m, se) = mean_and_se(&vals);
        stationary_means.push(m);
        stationary_ses.push(se);
    }
    let mut rows = Vec::new();
    for (si, &start) in opts.starts.iter().enumerate() {
        let role = if si == 0 { Role::Path } else { Role::SecondPath };
        let snaps = snapshot_matrix(&chain, &start, opts.checkpoints, opts.reps, opts.seed, role, runner)?;
        for (pi, u) in probes.iter().enumerate() {
            for (j, &t) in opts.checkpoints.iter().enumerate() {
                let vals: Vec<f64> = snaps.iter().map(|s| u[s[j].state]).collect();
                let (mean, se) = mean_and_se(&vals);
                let distance = (mean - stationary_means[pi]).abs();
                let distance_se = libm::sqrt(se * se + stationary_ses[pi] * stationary_ses[pi]);
                rows.push(ErgodicityRow {
                    probe: pi,
                    start,
                    t,
                    mean,
                    se,
                    distance,
                    distance_se,
                    above_noise: distance > 2.0 * distance_se && distance > 0.0,
                });
            }
        }
    }
    // log(distance / w(start)) = log R − ρ t
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.above_noise)
        .map(|r| (r.t, libm::log(r.distance / w[r.start])))
        .collect();
    let (rho_hat, r_hat) = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let stt: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
        if stt > 0.0 {
            let slope = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum::<f64>() / stt;
            (Some(-slope), Some(libm::exp(my - slope * mt)))
        } else {
            (None, None)
        }
    } else {
        (None, None)
    };
    Ok(ErgodicityReport {
        stationary_means,
        stationary_ses,
        decay_detected: rho_hat.is_some_and(|r| r > 0.0),
        points_used: pts.len(),
        rows,
        rho_hat,
        r_hat,
        empirical: true,
    })
}
