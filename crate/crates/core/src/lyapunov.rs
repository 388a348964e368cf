//! Pointwise checks of the drift, bound and monotonicity conditions on a
//! finite (truncated) model, plus the lettered parameter conditions of the
//! builtin families.
//!
//! On truncated models the rows of states on the outer face of the box are
//! distorted by the boundary redirection, so their records are reported
//! separately (`Region::Boundary`). `pass` covers every record;
//! `interior_pass` ignores boundary records.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::builtins::BuiltinSpec;
use crate::model::{CtmdpModel, LyapunovData, StationaryPolicy};
use crate::numeric::compensated_sum;
use crate::{Error, Result};

/// Slack below which a record fails.
pub const SLACK_TOL: f64 = -1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Region {
    All,
    Interior,
    Boundary,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CheckRecord {
    pub name: String,
    pub region: Region,
    pub worst_state: Option<usize>,
    pub worst_action: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`.
    pub slack: f64,
    pub pass: bool,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CheckStatus {
    Evaluated,
    Unsupported,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DriftReport {
    pub status: CheckStatus,
    pub checks: Vec<CheckRecord>,
    /// Largest `c` for which the drift inequality holds with the stored `b`.
    pub c_hat: Option<f64>,
    /// Smallest `b` for which the drift inequality holds with the stored `c`.
    pub b_hat: Option<f64>,
    pub pass: bool,
    pub interior_pass: bool,
}

impl DriftReport {
    fn from_checks(checks: Vec<CheckRecord>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        let interior_pass = checks.iter().filter(|c| c.region != Region::Boundary).all(|c| c.pass);
        DriftReport { status: CheckStatus::Evaluated, checks, c_hat: None, b_hat: None, pass, interior_pass }
    }

    pub fn check(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Running worst-slack tracker for one named inequality.
struct Worst {
    name: &'static str,
    region: Region,
    best: Option<(f64, usize, Option<usize>, f64, f64, Option<String>)>,
}

impl Worst {
    fn new(name: &'static str, region: Region) -> Self {
        Worst { name, region, best: None }
    }

    fn see(&mut self, x: usize, a: Option<usize>, lhs: f64, rhs: f64) {
        self.see_detail(x, a, lhs, rhs, None);
    }

    fn see_detail(&mut self, x: usize, a: Option<usize>, lhs: f64, rhs: f64, detail: Option<String>) {
        let slack = rhs - lhs;
        let worse = match &self.best {
            None => true,
            Some(b) => slack < b.0 || (slack.is_nan() && !b.0.is_nan()),
        };
        if worse {
            self.best = Some((slack, x, a, lhs, rhs, detail));
        }
    }

    fn finish(self) -> Option<CheckRecord> {
        self.best.map(|(slack, x, a, lhs, rhs, detail)| CheckRecord {
            name: self.name.into(),
            region: self.region,
            worst_state: Some(x),
            worst_action: a,
            lhs,
            rhs,
            slack,
            pass: slack >= SLACK_TOL,
            detail,
        })
    }
}

fn scalar_record(name: &str, lhs: f64, rhs: f64, strict: bool) -> CheckRecord {
    let slack = rhs - lhs;
    let pass = if strict { slack > 0.0 } else { slack >= SLACK_TOL };
    CheckRecord {
        name: name.into(),
        region: Region::All,
        worst_state: None,
        worst_action: None,
        lhs,
        rhs,
        slack,
        pass,
        detail: None,
    }
}

/// True for states on the outer face of a truncated box.
pub fn boundary_states(model: &CtmdpModel) -> Vec<bool> {
    let n = model.n_states();
    match (model.states.truncation_level, &model.states.labels) {
        (Some(level), Some(labels)) => labels.iter().map(|l| l.contains(&(level as i64))).collect(),
        (Some(level), None) => (0..n).map(|x| x == level).collect(),
        _ => alloc::vec![false; n],
    }
}

fn lyap(model: &CtmdpModel) -> Result<&LyapunovData> {
    model.lyapunov.as_ref().ok_or(Error::MissingLyapunov("model carries no Lyapunov data"))
}

/// Assumption A: `Σ_y w(y) q(y|x,a) ≤ −c w(x) + b` and `q(x) ≤ M_q w(x)`,
/// plus `w ≥ 1`, `c > 0`, `b ≥ 0`, `M_q > 0`. Also returns `b̂` (smallest
/// feasible `b` for the stored `c`) and `ĉ` (largest feasible `c` for the
/// stored `b`).
pub fn check_assumption_a(model: &CtmdpModel) -> Result<DriftReport> {
    let l = lyap(model)?;
    let boundary = boundary_states(model);
    let mut interior = Worst::new("drift", Region::Interior);
    let mut edge = Worst::new("drift", Region::Boundary);
    let mut rate = Worst::new("rate_bound", Region::All);
    let mut weight = Worst::new("weight_at_least_one", Region::All);
    let mut b_hat = f64::NEG_INFINITY;
    let mut c_hat = f64::INFINITY;
    for x in 0..model.n_states() {
        let wx = l.w[x];
        for a in 0..model.n_actions(x) {
            let lhs = model.apply(&l.w, x, a);
            let rhs = -l.c * wx + l.b;
            if boundary[x] {
                edge.see(x, Some(a), lhs, rhs);
            } else {
                interior.see(x, Some(a), lhs, rhs);
            }
            b_hat = b_hat.max(lhs + l.c * wx);
            c_hat = c_hat.min((l.b - lhs) / wx);
        }
        rate.see(x, None, model.q_max(x), l.m_q * wx);
        weight.see(x, None, 1.0, wx);
    }
    let mut checks: Vec<CheckRecord> =
        [interior, edge, rate, weight].into_iter().filter_map(Worst::finish).collect();
    checks.push(scalar_record("c_positive", 0.0, l.c, true));
    checks.push(scalar_record("b_nonnegative", 0.0, l.b, false));
    checks.push(scalar_record("m_q_positive", 0.0, l.m_q, true));
    let mut rep = DriftReport::from_checks(checks);
    rep.b_hat = Some(b_hat);
    rep.c_hat = Some(c_hat);
    Ok(rep)
}

/// Assumption B(3)–(4): `|r(x,a)| ≤ M w(x)`, `q(x) w(x) ≤ M' w'(x)` and the
/// growth bound `Σ_y w'(y) q(y|x,a) ≤ c' w'(x) + b'` (plus sign).
pub fn check_assumption_b(model: &CtmdpModel) -> Result<DriftReport> {
    let l = lyap(model)?;
    let m = l.m.ok_or(Error::MissingLyapunov("M"))?;
    let wp = l.wprime.as_ref().ok_or(Error::MissingLyapunov("wprime"))?;
    let cp = l.cprime.ok_or(Error::MissingLyapunov("cprime"))?;
    let bp = l.bprime.ok_or(Error::MissingLyapunov("bprime"))?;
    let mp = l.mprime.ok_or(Error::MissingLyapunov("Mprime"))?;
    let boundary = boundary_states(model);
    let mut reward = Worst::new("reward_bound", Region::All);
    let mut rate_weight = Worst::new("rate_weight_bound", Region::All);
    let mut growth_in = Worst::new("growth_drift", Region::Interior);
    let mut growth_edge = Worst::new("growth_drift", Region::Boundary);
    let mut wp_sign = Worst::new("wprime_nonnegative", Region::All);
    for x in 0..model.n_states() {
        for a in 0..model.n_actions(x) {
            reward.see(x, Some(a), model.reward(x, a).abs(), m * l.w[x]);
            let lhs = model.apply(wp, x, a);
            let rhs = cp * wp[x] + bp;
            if boundary[x] {
                growth_edge.see(x, Some(a), lhs, rhs);
            } else {
                growth_in.see(x, Some(a), lhs, rhs);
            }
        }
        rate_weight.see(x, None, model.q_max(x) * l.w[x], mp * wp[x]);
        wp_sign.see(x, None, 0.0, wp[x]);
    }
    let mut checks: Vec<CheckRecord> = [reward, rate_weight, growth_in, growth_edge, wp_sign]
        .into_iter()
        .filter_map(Worst::finish)
        .collect();
    checks.push(scalar_record("m_positive", 0.0, m, true));
    checks.push(scalar_record("cprime_positive", 0.0, cp, true));
    checks.push(scalar_record("bprime_nonnegative", 0.0, bp, false));
    checks.push(scalar_record("mprime_positive", 0.0, mp, true));
    Ok(DriftReport::from_checks(checks))
}

fn one_dimensional(model: &CtmdpModel) -> bool {
    match &model.states.labels {
        None => true,
        Some(labels) => labels.iter().all(|l| l.len() == 1) && labels.windows(2).all(|w| w[0][0] < w[1][0]),
    }
}

fn unsupported() -> DriftReport {
    DriftReport {
        status: CheckStatus::Unsupported,
        checks: Vec::new(),
        c_hat: None,
        b_hat: None,
        pass: false,
        interior_pass: false,
    }
}

/// Tail sums `T(k) = Σ_{y ≥ k} q(y|x,a)` for `k = 0..n`.
fn tails(model: &CtmdpModel, x: usize, a: usize) -> Vec<f64> {
    let n = model.n_states();
    let row = model.row(x, a);
    (0..n).map(|k| compensated_sum(row.iter().filter(|e| e.0 >= k).map(|e| e.1))).collect()
}

fn monotone_scan(model: &CtmdpModel, pick: impl Fn(usize) -> (Vec<f64>, Vec<f64>, Option<usize>)) -> DriftReport {
    let n = model.n_states();
    let boundary = boundary_states(model);
    let mut interior = Worst::new("tail_sum", Region::Interior);
    let mut edge = Worst::new("tail_sum", Region::Boundary);
    for x in 0..n.saturating_sub(1) {
        let (lo, hi, a) = pick(x);
        for k in (0..n).filter(|&k| k != x + 1) {
            let detail = Some(format!("k = {k}"));
            if boundary[x + 1] {
                edge.see_detail(x, a, lo[k], hi[k], detail);
            } else {
                interior.see_detail(x, a, lo[k], hi[k], detail);
            }
        }
    }
    DriftReport::from_checks([interior, edge].into_iter().filter_map(Worst::finish).collect())
}

/// Stochastic monotonicity of the chain under `f` on a 1-D ordered space:
/// `Σ_{y≥k} q(y|x,f(x)) ≤ Σ_{y≥k} q(y|x+1,f(x+1))` for all `k ≠ x+1`.
/// Multi-dimensional models get status `Unsupported`.
pub fn check_monotonicity(model: &CtmdpModel, f: &StationaryPolicy) -> Result<DriftReport> {
    f.check(model)?;
    if !one_dimensional(model) {
        return Ok(unsupported());
    }
    Ok(monotone_scan(model, |x| (tails(model, x, f.action(x)), tails(model, x + 1, f.action(x + 1)), Some(f.action(x)))))
}

/// Monotonicity for every stationary policy at once: compares the largest
/// tail over actions at `x` with the smallest tail over actions at `x+1`.
pub fn check_monotonicity_uniform(model: &CtmdpModel) -> DriftReport {
    if !one_dimensional(model) {
        return unsupported();
    }
    let n = model.n_states();
    let env = |x: usize, upper: bool| -> Vec<f64> {
        let all: Vec<Vec<f64>> = (0..model.n_actions(x)).map(|a| tails(model, x, a)).collect();
        (0..n)
            .map(|k| {
                let it = all.iter().map(|t| t[k]);
                if upper {
                    it.fold(f64::NEG_INFINITY, f64::max)
                } else {
                    it.fold(f64::INFINITY, f64::min)
                }
            })
            .collect()
    };
    monotone_scan(model, |x| (env(x, true), env(x + 1, false), None))
}

/// Evaluates the family's lettered conditions on the raw parameters.
pub fn check_example_conditions(spec: &BuiltinSpec) -> Result<DriftReport> {
    let mut checks = Vec::new();
    match spec {
        BuiltinSpec::BirthDeath(p) => {
            checks.push(scalar_record("E1: mu1 > lambda", p.lambda, p.mu1, true));
            checks.push(scalar_record("E2: p1 <= mu1/(2 mu2)", p.p1, p.mu1 / (2.0 * p.mu2), false));
            let m_tilde = p.cost_bound();
            let grid = p.actions_grid();
            let mut worst = Worst::new("E3: sup_a |r_c(x,a)| <= M~ (x+1)", Region::All);
            for x in 0..=p.n {
                let xf = x as f64;
                let sup = grid.iter().map(|&a| p.cost.eval(xf, a).abs()).fold(0.0, f64::max);
                worst.see(x, None, sup, m_tilde * (xf + 1.0));
            }
            checks.extend(worst.finish());
        }
        BuiltinSpec::SkipFree(p) => {
            checks.push(scalar_record("F1: mu > lambda", p.lambda, p.mu, true));
            let a2s = p.a2_grid();
            let mut ratio = Worst::new("F1: gamma2_{x+1} <= inf_a2 (d(x,a2) + mu x)/d(x+1,a2)", Region::All);
            for x in 1..p.n as i64 {
                let inf = a2s
                    .iter()
                    .map(|&a2| {
                        let den = p.d(x + 1, a2);
                        if den > 0.0 {
                            (p.d(x, a2) + p.mu * x as f64) / den
                        } else {
                            f64::INFINITY
                        }
                    })
                    .fold(f64::INFINITY, f64::min);
                ratio.see(x as usize, None, p.gamma2_at(x + 1), inf);
            }
            checks.extend(ratio.finish());
            let inf = (1..=p.n as i64)
                .flat_map(|x| a2s.iter().map(move |&a2| (x, a2)))
                .map(|(x, a2)| p.d(x, a2) * (1.0 + p.gamma2_at(x)))
                .fold(f64::INFINITY, f64::min);
            checks.push(scalar_record("F2: b <= lambda - mu + inf (d + gamma2 d)", p.b, p.lambda - p.mu + inf, false));
            let l1 = p.d_coef * p.beta;
            let l2 = p.cost.growth_constant(p.beta);
            let mut dd = Worst::new("F3: d(x,a2) <= L1 (x+1)", Region::All);
            let mut cc = Worst::new("F3: |c(x,a2)| <= L2 (x+1)", Region::All);
            for x in 0..=p.n as i64 {
                let xf = x as f64;
                let (sd, sc) = a2s.iter().fold((0.0f64, 0.0f64), |(sd, sc), &a2| {
                    (sd.max(if x == 0 { 0.0 } else { p.d(x, a2) }), sc.max(p.cost.eval(xf, a2).abs()))
                });
                dd.see(x as usize, None, sd, l1 * (xf + 1.0));
                cc.see(x as usize, None, sc, l2 * (xf + 1.0));
            }
            checks.extend(dd.finish());
            checks.extend(cc.finish());
            if p.d_coef == 2.0 {
                checks.push(scalar_record("closing: mu <= b + lambda", p.mu, p.b + p.lambda, false));
                checks.push(scalar_record(
                    "closing: gamma2 <= 1/2 + mu/(4 beta)",
                    p.gamma2,
                    0.5 + p.mu / (4.0 * p.beta),
                    false,
                ));
            }
        }
        BuiltinSpec::Tandem(p) => {
            checks.push(scalar_record("mu1 >= 3", 3.0, p.mu1, false));
            checks.push(scalar_record("mu2 >= 2", 2.0, p.mu2, false));
            let bound = p.reward.abs() * p.mu2_star + p.kappa.abs() * (p.mu1_star + p.mu2_star);
            checks.push(scalar_record("reward bounded", bound, bound, false));
        }
        BuiltinSpec::Mmn0(p) => {
            checks.push(scalar_record("mu1 > lambda", p.lambda, p.mu1, true));
        }
        BuiltinSpec::Potlach(p) => {
            checks.push(scalar_record("lambda > 1", 1.0, p.lambda, true));
            checks.push(scalar_record("q(x) <= d", p.d as f64, p.d as f64, false));
        }
    }
    Ok(DriftReport::from_checks(checks))
}
