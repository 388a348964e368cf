//! The vanishing-discount method: solve the discounted problem along
//! `α_k = α0 ρ^k`, read the gain as `α_K J*_{α_K}(x0)` and the relative
//! value as `h_{α_K} = J*_{α_K} − J*_{α_K}(x0)`, then take the greedy
//! policy against `h`.
//!
//! Also provides an independent brute-force oracle (stationary
//! distributions of every deterministic policy, or policy iteration when
//! there are too many) and a truncation-level sensitivity sweep.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::builtins::BuiltinSpec;
use crate::discounted::{extract_policy, solve_discounted_with, DiscountedOptions, DEFAULT_MAX_ITER};
use crate::linalg::{poisson_solve, stationary_distribution};
use crate::model::{grid_index, weighted_distance, CtmdpModel, StationaryPolicy};
use crate::verify::{certify_lower, certify_upper};
use crate::{Error, Result};

/// Number of trailing steps spanned by the `h_lower`/`h_upper` envelope.
pub const ENVELOPE_STEPS: usize = 5;

/// Policies enumerated exhaustively up to this count.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VanishingSchedule {
    pub alpha0: f64,
    pub ratio: f64,
    /// Final step index `K`; the schedule has `K + 1` discount rates.
    pub steps: usize,
    pub x0: usize,
}

impl Default for VanishingSchedule {
    fn default() -> Self {
        VanishingSchedule { alpha0: 0.1, ratio: 0.5, steps: 25, x0: 0 }
    }
}

impl VanishingSchedule {
    pub fn check(&self) -> Result<()> {
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(Error::NonPositiveDiscount(self.alpha0));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::InvalidParameter(format!("ratio must lie in (0, 1), got {}", self.ratio)));
        }
        let last = self.alpha0 * libm::pow(self.ratio, self.steps as f64);
        if !(last > 0.0) {
            return Err(Error::InvalidParameter("schedule underflows to zero".into()));
        }
        Ok(())
    }

    pub fn alphas(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.alpha0 * libm::pow(self.ratio, k as f64)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TraceStep {
    pub k: usize,
    pub alpha: f64,
    /// `α_k J*_{α_k}(x0)`.
    pub alpha_j_x0: f64,
    /// `‖h_{α_k} − h_{α_{k−1}}‖_w` (absent at `k = 0`).
    pub h_change: Option<f64>,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AverageSolution {
    pub gain: f64,
    pub h: Vec<f64>,
    pub policy: StationaryPolicy,
    pub x0: usize,
    pub schedule: VanishingSchedule,
    pub tol: f64,
    pub trace: Vec<TraceStep>,
    /// `max_x [max_a {r + Σ h q} − g]`.
    pub upper_residual: f64,
    /// `max_x [g − (r + Σ h q)(x, f(x))]`.
    pub lower_residual: f64,
    /// Pointwise min/max of `h_{α_k}` over the last steps.
    pub h_lower: Vec<f64>,
    pub h_upper: Vec<f64>,
    /// `‖h_upper − h_lower‖_w`.
    pub envelope_width: f64,
    pub converged: bool,
    /// First step from which every later consecutive change is within `tol`.
    pub converged_from_step: Option<usize>,
}

fn weights(model: &CtmdpModel) -> Vec<f64> {
    model.lyapunov.as_ref().map(|l| l.w.clone()).unwrap_or_else(|| vec![1.0; model.n_states()])
}

/// Runs the vanishing-discount scheme. Each discounted solve warm-starts
/// from the previous relative values and uses the tolerance
/// `max(tol · 1e−3, 1e−13)`.
pub fn solve_average(model: &CtmdpModel, schedule: &VanishingSchedule, tol: f64) -> Result<AverageSolution> {
    schedule.check()?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let n = model.n_states();
    if schedule.x0 >= n {
        return Err(Error::IndexOutOfRange { what: "reference state", index: schedule.x0, len: n });
    }
    let w = weights(model);
    let inner_tol = (tol * 1e-3).max(1e-13);
    let mut trace = Vec::with_capacity(schedule.steps + 1);
    let mut history: Vec<Vec<f64>> = Vec::new();
    let mut nus = Vec::new();
    let mut prev: Option<Vec<f64>> = None;
    let mut last = None;
    for (k, alpha) in schedule.alphas().into_iter().enumerate() {
        let opts = DiscountedOptions {
            tol: inner_tol,
            max_iter: DEFAULT_MAX_ITER,
            x0: schedule.x0,
            warm_start: prev.as_deref(),
        };
        let sol = solve_discounted_with(model, alpha, &opts)?;
        let h_change = prev.as_ref().map(|p| weighted_distance(&sol.h, p, &w));
        trace.push(TraceStep {
            k,
            alpha,
            alpha_j_x0: sol.nu,
            h_change,
            iterations: sol.iterations,
            residual: sol.residual,
        });
        nus.push(sol.nu);
        history.push(sol.h.clone());
        prev = Some(sol.h.clone());
        last = Some(sol);
    }
    let last = last.ok_or_else(|| Error::InvalidParameter("empty schedule".into()))?;
    let gain = last.nu;
    let h = last.h;
    let policy = extract_policy(model, &h);
    let tail = &history[history.len().saturating_sub(ENVELOPE_STEPS)..];
    let h_lower: Vec<f64> = (0..n).map(|x| tail.iter().map(|v| v[x]).fold(f64::INFINITY, f64::min)).collect();
    let h_upper: Vec<f64> = (0..n).map(|x| tail.iter().map(|v| v[x]).fold(f64::NEG_INFINITY, f64::max)).collect();
    let envelope_width = weighted_distance(&h_upper, &h_lower, &w);
    let step_ok: Vec<bool> = (1..trace.len())
        .map(|k| (nus[k] - nus[k - 1]).abs() <= tol && trace[k].h_change.is_some_and(|c| c <= tol))
        .collect();
    let converged = step_ok.last().copied().unwrap_or(false);
    let converged_from_step = if converged {
        let mut first = step_ok.len();
        while first > 0 && step_ok[first - 1] {
            first -= 1;
        }
        Some(first)
    } else {
        None
    };
    let upper = certify_upper(model, gain, &h, tol)?;
    let lower = certify_lower(model, gain, &h, &policy, tol)?;
    Ok(AverageSolution {
        gain,
        policy,
        x0: schedule.x0,
        schedule: *schedule,
        tol,
        trace,
        upper_residual: upper.max_violation,
        lower_residual: lower.max_violation,
        h_lower,
        h_upper,
        envelope_width,
        converged,
        converged_from_step,
        h,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum OracleMethod {
    Enumeration,
    PolicyIteration,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OracleResult {
    pub gain: f64,
    pub policy: StationaryPolicy,
    pub method: OracleMethod,
    pub policies_evaluated: u64,
    /// Some evaluated chain had states outside its recurrent class.
    pub reducible: bool,
}

/// Gain `Σ_x π_f(x) r(x, f(x))` from the stationary distribution.
pub fn policy_gain(model: &CtmdpModel, f: &StationaryPolicy) -> Result<(f64, bool)> {
    let st = stationary_distribution(model, f)?;
    let g = crate::numeric::compensated_sum(st.class.iter().map(|&x| st.pi[x] * model.reward(x, f.action(x))));
    Ok((g, st.reducible))
}

fn better(candidate: f64, best: f64) -> bool {
    candidate > best + 1e-12 * best.abs().max(1.0)
}

/// Best deterministic stationary policy by exhaustive enumeration of
/// stationary distributions; falls back to policy iteration on Poisson
/// equations when there are more than [`ENUMERATION_LIMIT`] policies.
/// Ties keep the lowest policy id (state 0 is the least significant digit).
pub fn brute_force_oracle(model: &CtmdpModel) -> Result<OracleResult> {
    let n = model.n_states();
    let count = model.policy_count();
    if count <= ENUMERATION_LIMIT {
        let mut digits = vec![0usize; n];
        let mut best: Option<(f64, StationaryPolicy)> = None;
        let mut reducible = false;
        for id in 0..count as u64 {
            let f = StationaryPolicy::new(digits.clone());
            let (g, red) = policy_gain(model, &f).map_err(|e| match e {
                Error::SingularSystem(m) => Error::SingularSystem(format!("policy {id}: {m}")),
                other => other,
            })?;
            reducible |= red;
            if best.as_ref().map_or(true, |b| better(g, b.0)) {
                best = Some((g, f));
            }
            for x in 0..n {
                digits[x] += 1;
                if digits[x] < model.n_actions(x) {
                    break;
                }
                digits[x] = 0;
            }
        }
        let (gain, policy) = best.ok_or_else(|| Error::InvalidParameter("model has no policies".into()))?;
        return Ok(OracleResult { gain, policy, method: OracleMethod::Enumeration, policies_evaluated: count as u64, reducible });
    }
    // Policy iteration from the myopic policy.
    let mut f = StationaryPolicy::new(
        (0..n)
            .map(|x| {
                (0..model.n_actions(x)).fold(0, |b, a| if model.reward(x, a) > model.reward(x, b) { a } else { b })
            })
            .collect(),
    );
    let mut evaluated = 0u64;
    for _ in 0..10_000 {
        let (_, u) = poisson_solve(model, &f, 0)?;
        evaluated += 1;
        let mut changed = false;
        for x in 0..n {
            let val = |a: usize| model.reward(x, a) + model.apply(&u, x, a);
            let cur = val(f.action(x));
            let mut best_a = f.action(x);
            let mut best_v = cur;
            for a in 0..model.n_actions(x) {
                let v = val(a);
                if better(v, best_v) {
                    best_v = v;
                    best_a = a;
                }
            }
            if best_a != f.action(x) {
                f.actions[x] = best_a;
                changed = true;
            }
        }
        if !changed {
            let (gain, reducible) = policy_gain(model, &f)?;
            return Ok(OracleResult { gain, policy: f, method: OracleMethod::PolicyIteration, policies_evaluated: evaluated, reducible });
        }
    }
    Err(Error::MaxIterations { iterations: 10_000, kappa: f64::NAN, residual: f64::NAN })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SensitivityLevel {
    pub level: usize,
    pub gain: f64,
    pub converged: bool,
    pub upper_residual: f64,
    pub lower_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SensitivityReport {
    pub family: String,
    pub levels: Vec<SensitivityLevel>,
    /// `|g_{N_{i+1}} − g_{N_i}|`.
    pub gain_gaps: Vec<f64>,
    /// `max |h_{N_i} − h_{N_{i+1}}|` over states of the inner half of level `N_i`.
    pub h_gaps: Vec<f64>,
    pub final_gap: f64,
    pub stable: bool,
}

/// Gap threshold for declaring a sweep stable.
pub const SENSITIVITY_THRESHOLD: f64 = 1e-6;

/// Solves the family at each truncation level and compares consecutive
/// levels on the shared inner states.
pub fn truncation_sensitivity(
    spec: &BuiltinSpec,
    levels: &[usize],
    schedule: &VanishingSchedule,
    tol: f64,
) -> Result<SensitivityReport> {
    let levels: Vec<usize> = if spec.truncatable() {
        if levels.is_empty() || levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("levels must be nonempty and strictly increasing".into()));
        }
        levels.to_vec()
    } else {
        // Intrinsically finite: a single level at the configured size.
        vec![spec.truncation().ok_or_else(|| Error::Unsupported(format!("{} has no tabulated model", spec.name())))?]
    };
    let mut runs = Vec::new();
    for &lv in &levels {
        let mut s = spec.clone();
        s.set_truncation(lv);
        let model = s.build()?;
        let sol = solve_average(&model, schedule, tol)?;
        runs.push((lv, model, sol));
    }
    let mut gain_gaps = Vec::new();
    let mut h_gaps = Vec::new();
    for pair in runs.windows(2) {
        let (n_a, m_a, s_a) = (&pair[0].0, &pair[0].1, &pair[0].2);
        let (n_b, _, s_b) = (&pair[1].0, &pair[1].1, &pair[1].2);
        gain_gaps.push((s_a.gain - s_b.gain).abs());
        let labels = m_a.states.labels.as_ref().ok_or_else(|| Error::Shape("truncated model without labels".into()))?;
        let half = (*n_a / 2) as i64;
        let gap = labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.iter().all(|&c| c <= half))
            .map(|(x, l)| (s_a.h[x] - s_b.h[grid_index(l, *n_b)]).abs())
            .fold(0.0, f64::max);
        h_gaps.push(gap);
    }
    let final_gap = gain_gaps.last().copied().unwrap_or(0.0);
    Ok(SensitivityReport {
        family: spec.name().into(),
        levels: runs
            .iter()
            .map(|(lv, _, s)| SensitivityLevel {
                level: *lv,
                gain: s.gain,
                converged: s.converged,
                upper_residual: s.upper_residual,
                lower_residual: s.lower_residual,
            })
            .collect(),
        gain_gaps,
        h_gaps,
        final_gap,
        stable: final_gap <= SENSITIVITY_THRESHOLD,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins::*;
    use crate::model::*;

    #[test]
    fn constant_reward_gain() {
        let m = build_mmn0(&Mmn0Params { grid: 2, ..Default::default() }).unwrap().map_rewards(|_| 2.0);
        let s = solve_average(&m, &VanishingSchedule::default(), 1e-8).unwrap();
        assert!((s.gain - 2.0).abs() < 1e-12);
        assert!(s.h.iter().all(|h| h.abs() < 1e-12));
        assert_eq!(s.converged_from_step, Some(0));
    }

    #[test]
    fn mm20_gain() {
        let m = build_mmn0(&Mmn0Params { lambda: 1.0, mu1: 2.0, mu2: 3.0, grid: 1, n: 2, p: 1.0, kappa: 0.0 }).unwrap();
        let s = solve_average(&m, &VanishingSchedule::default(), 1e-8).unwrap();
        assert!((s.gain - 6.0 / 13.0).abs() < 1e-6);
        let o = brute_force_oracle(&m).unwrap();
        assert!((o.gain - 6.0 / 13.0).abs() < 1e-14);
    }

    #[test]
    fn oracle_single_state() {
        let m = CtmdpModel::new(
            StateSpace::plain(1),
            ActionSets::new(vec![vec![vec![1.0], vec![2.0]]]),
            RateKernel::new(vec![vec![vec![], vec![]]]),
            RewardTable { r: vec![vec![1.0, 5.0]] },
            None,
            Provenance::Explicit,
        )
        .unwrap();
        let o = brute_force_oracle(&m).unwrap();
        assert_eq!(o.gain, 5.0);
        assert_eq!(o.policy.actions, vec![1]);
    }

    #[test]
    fn schedule_rejects_bad_ratio() {
        let s = VanishingSchedule { ratio: 1.0, ..Default::default() };
        assert!(s.check().is_err());
        let s = VanishingSchedule { alpha0: 0.0, ..Default::default() };
        assert!(s.check().is_err());
    }
}
