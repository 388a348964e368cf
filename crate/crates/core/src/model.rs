//! CTMDP instances on finite (or truncated countable) state spaces.
//!
//! A model is the tuple of states, per-state finite action sets, a sparse
//! signed rate kernel `q(y|x,a)` and reward rates `r(x,a)`, optionally with
//! Lyapunov weights used by the drift checks. [`CtmdpModel::new`] enforces
//! index consistency only; the sign and conservativeness conditions on the
//! kernel are reported by [`validate_model`] so that broken input can be
//! diagnosed rather than rejected outright.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::numeric::{compensated_sum, sparse_dot};
use crate::{Error, Result};

/// Absolute tolerance on `Σ_y q(y|x,a)`.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StateSpace {
    pub size: usize,
    /// Per-state coordinates (queue lengths), all of the same dimension.
    pub labels: Option<Vec<Vec<i64>>>,
    /// Set when the space is the truncation `{0..N}^d` of a countable model.
    pub truncation_level: Option<usize>,
}

impl StateSpace {
    pub fn plain(size: usize) -> Self {
        StateSpace { size, labels: None, truncation_level: None }
    }

    pub fn label(&self, x: usize) -> Option<&[i64]> {
        self.labels.as_ref().map(|l| l[x].as_slice())
    }

    /// Label dimension, 1 when unlabeled.
    pub fn dim(&self) -> usize {
        self.labels.as_ref().and_then(|l| l.first()).map_or(1, |v| v.len())
    }
}

/// Compact interval(s) and resolution an action grid was built from.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridMeta {
    pub intervals: Vec<(f64, f64)>,
    pub resolution: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ActionSets {
    /// `actions[x][k]` is the parameter vector of the `k`-th action at `x`.
    pub actions: Vec<Vec<Vec<f64>>>,
    pub grid_meta: Option<GridMeta>,
}

impl ActionSets {
    pub fn new(actions: Vec<Vec<Vec<f64>>>) -> Self {
        ActionSets { actions, grid_meta: None }
    }

    /// One scalar-parameter action per state, e.g. for uncontrolled chains.
    pub fn single(size: usize) -> Self {
        ActionSets::new(vec![vec![vec![0.0]]; size])
    }
}

/// Sparse rate rows `q(·|x,a)`, each sorted by target and always holding
/// an explicit diagonal entry.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RateKernel {
    rows: Vec<Vec<Vec<(usize, f64)>>>,
}

impl RateKernel {
    /// Builds a kernel from raw rows indexed `[x][a]`.
    ///
    /// Entries are sorted by target and duplicates summed. A row without a
    /// diagonal entry gets one equal to minus the (compensated) sum of its
    /// off-diagonal rates; a supplied diagonal is kept untouched.
    pub fn new(rows: Vec<Vec<Vec<(usize, f64)>>>) -> Self {
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(x, per_action)| per_action.into_iter().map(|r| normalize_row(x, r)).collect())
            .collect();
        RateKernel { rows }
    }

    pub fn row(&self, x: usize, a: usize) -> &[(usize, f64)] {
        &self.rows[x][a]
    }

    pub fn rows(&self) -> &[Vec<Vec<(usize, f64)>>] {
        &self.rows
    }

    pub fn diagonal(&self, x: usize, a: usize) -> f64 {
        self.rows[x][a].iter().find(|e| e.0 == x).map_or(0.0, |e| e.1)
    }
}

fn normalize_row(x: usize, entries: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    let mut merged: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (y, q) in entries {
        merged.entry(y).or_default().push(q);
    }
    if !merged.contains_key(&x) {
        let off = compensated_sum(merged.values().flat_map(|v| v.iter().copied()));
        merged.insert(x, vec![-off]);
    }
    merged
        .into_iter()
        .map(|(y, qs)| (y, if qs.len() == 1 { qs[0] } else { compensated_sum(qs) }))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RewardTable {
    /// `r[x][a]` in reward per unit time.
    pub r: Vec<Vec<f64>>,
}

/// Lyapunov weights and constants for Assumptions A and B.
///
/// `w`, `c`, `b`, `m_q` feed the drift condition `Σ_y w(y)q(y|x,a) ≤ -c w(x) + b`
/// and `q(x) ≤ M_q w(x)`. `m` bounds the rewards, and the primed fields
/// describe the growth condition `q(x)w(x) ≤ M' w'(x)`,
/// `Σ_y w'(y)q(y|x,a) ≤ c' w'(x) + b'`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LyapunovData {
    pub w: Vec<f64>,
    pub c: f64,
    pub b: f64,
    pub m_q: f64,
    pub m: Option<f64>,
    pub wprime: Option<Vec<f64>>,
    pub cprime: Option<f64>,
    pub bprime: Option<f64>,
    pub mprime: Option<f64>,
}

impl LyapunovData {
    pub fn new(w: Vec<f64>, c: f64, b: f64, m_q: f64) -> Self {
        LyapunovData { w, c, b, m_q, m: None, wprime: None, cprime: None, bprime: None, mprime: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Provenance {
    /// Builtin family name plus a `key=value` rendering of its parameters.
    Builtin { name: String, params: String },
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CtmdpModel {
    pub states: StateSpace,
    pub actions: ActionSets,
    pub kernel: RateKernel,
    pub rewards: RewardTable,
    pub lyapunov: Option<LyapunovData>,
    pub provenance: Provenance,
}

impl CtmdpModel {
    /// Assembles a model, checking that all tables agree on the number of
    /// states and actions and that every target index is in range.
    pub fn new(
        states: StateSpace,
        actions: ActionSets,
        kernel: RateKernel,
        rewards: RewardTable,
        lyapunov: Option<LyapunovData>,
        provenance: Provenance,
    ) -> Result<Self> {
        let n = states.size;
        if n == 0 {
            return Err(Error::Shape("state space is empty".into()));
        }
        if let Some(labels) = &states.labels {
            if labels.len() != n {
                return Err(Error::Shape(format!("{} labels for {} states", labels.len(), n)));
            }
            let d = labels[0].len();
            if d == 0 || labels.iter().any(|l| l.len() != d) {
                return Err(Error::Shape("labels must share a positive dimension".into()));
            }
        }
        let check_len = |what: &str, got: usize| {
            if got != n {
                Err(Error::Shape(format!("{what} has {got} states, expected {n}")))
            } else {
                Ok(())
            }
        };
        check_len("action table", actions.actions.len())?;
        check_len("rate kernel", kernel.rows.len())?;
        check_len("reward table", rewards.r.len())?;
        for x in 0..n {
            let k = actions.actions[x].len();
            if k == 0 {
                return Err(Error::Shape(format!("state {x} has no actions")));
            }
            if kernel.rows[x].len() != k {
                return Err(Error::Shape(format!(
                    "state {x}: {} rate rows for {k} actions",
                    kernel.rows[x].len()
                )));
            }
            if rewards.r[x].len() != k {
                return Err(Error::Shape(format!(
                    "state {x}: {} rewards for {k} actions",
                    rewards.r[x].len()
                )));
            }
            for row in &kernel.rows[x] {
                for &(y, _) in row {
                    if y >= n {
                        return Err(Error::IndexOutOfRange { what: "target state", index: y, len: n });
                    }
                }
            }
        }
        if let Some(l) = &lyapunov {
            check_len("w", l.w.len())?;
            if let Some(wp) = &l.wprime {
                check_len("w'", wp.len())?;
            }
        }
        Ok(CtmdpModel { states, actions, kernel, rewards, lyapunov, provenance })
    }

    pub fn n_states(&self) -> usize {
        self.states.size
    }

    pub fn n_actions(&self, x: usize) -> usize {
        self.actions.actions[x].len()
    }

    pub fn row(&self, x: usize, a: usize) -> &[(usize, f64)] {
        self.kernel.row(x, a)
    }

    pub fn reward(&self, x: usize, a: usize) -> f64 {
        self.rewards.r[x][a]
    }

    /// `-q({x}|x,a)`.
    pub fn exit_rate(&self, x: usize, a: usize) -> f64 {
        -self.kernel.diagonal(x, a)
    }

    /// `q(x) = max_a -q({x}|x,a)`.
    pub fn q_max(&self, x: usize) -> f64 {
        (0..self.n_actions(x)).map(|a| self.exit_rate(x, a)).fold(0.0, f64::max)
    }

    /// `Σ_y u(y) q(y|x,a)` without index checks.
    #[inline]
    pub fn apply(&self, u: &[f64], x: usize, a: usize) -> f64 {
        sparse_dot(self.kernel.row(x, a), u)
    }

    /// Number of deterministic stationary policies, saturating at `u128::MAX`.
    pub fn policy_count(&self) -> u128 {
        (0..self.n_states()).fold(1u128, |acc, x| acc.saturating_mul(self.n_actions(x) as u128))
    }

    /// Copy of the model with every reward replaced by `f(r)`.
    pub fn map_rewards(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut m = self.clone();
        for row in &mut m.rewards.r {
            for r in row.iter_mut() {
                *r = f(*r);
            }
        }
        m
    }

    /// The model with `A(x)` reduced to the single action `f(x)`.
    pub fn restrict(&self, f: &StationaryPolicy) -> Result<Self> {
        f.check(self)?;
        let n = self.n_states();
        let pick = |x: usize| f.action(x);
        let actions = ActionSets {
            actions: (0..n).map(|x| vec![self.actions.actions[x][pick(x)].clone()]).collect(),
            grid_meta: None,
        };
        let kernel = RateKernel::new((0..n).map(|x| vec![self.row(x, pick(x)).to_vec()]).collect());
        let rewards = RewardTable { r: (0..n).map(|x| vec![self.reward(x, pick(x))]).collect() };
        CtmdpModel::new(self.states.clone(), actions, kernel, rewards, self.lyapunov.clone(), self.provenance.clone())
    }

    fn check_state(&self, x: usize) -> Result<()> {
        if x >= self.n_states() {
            return Err(Error::IndexOutOfRange { what: "state", index: x, len: self.n_states() });
        }
        Ok(())
    }

    fn check_action(&self, x: usize, a: usize) -> Result<()> {
        self.check_state(x)?;
        if a >= self.n_actions(x) {
            return Err(Error::IndexOutOfRange { what: "action", index: a, len: self.n_actions(x) });
        }
        Ok(())
    }

    pub(crate) fn check_vector(&self, what: &'static str, u: &[f64]) -> Result<()> {
        if u.len() != self.n_states() {
            return Err(Error::Shape(format!("{what} has length {}, expected {}", u.len(), self.n_states())));
        }
        Ok(())
    }
}

/// Deterministic stationary policy: `f(x)` is an index into `A(x)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StationaryPolicy {
    pub actions: Vec<usize>,
}

impl StationaryPolicy {
    pub fn new(actions: Vec<usize>) -> Self {
        StationaryPolicy { actions }
    }

    /// Policy choosing action 0 everywhere.
    pub fn first(model: &CtmdpModel) -> Self {
        StationaryPolicy { actions: vec![0; model.n_states()] }
    }

    pub fn action(&self, x: usize) -> usize {
        self.actions[x]
    }

    pub fn check(&self, model: &CtmdpModel) -> Result<()> {
        if self.actions.len() != model.n_states() {
            return Err(Error::Shape(format!(
                "policy has length {}, expected {}",
                self.actions.len(),
                model.n_states()
            )));
        }
        for (x, &a) in self.actions.iter().enumerate() {
            model.check_action(x, a)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ViolationKind {
    NegativeOffDiagonal,
    PositiveDiagonal,
    RowSum,
    NonFiniteRate,
    NonFiniteReward,
    DuplicateAction,
    DuplicateLabel,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Violation {
    pub kind: ViolationKind,
    pub x: usize,
    pub a: Option<usize>,
    pub y: Option<usize>,
    /// Offending value (rate, row sum, reward).
    pub value: f64,
    /// Signed margin to the constraint; negative means violated.
    pub slack: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
    /// `q(x)` per state.
    pub q: Vec<f64>,
    pub max_row_sum_error: f64,
}

/// Checks P1–P3 (sign pattern and conservative rows), finiteness of rates
/// and rewards, and distinctness of actions and labels.
pub fn validate_model(model: &CtmdpModel) -> ValidationReport {
    let mut violations = Vec::new();
    let mut max_err: f64 = 0.0;
    let n = model.n_states();
    for x in 0..n {
        for a in 0..model.n_actions(x) {
            let row = model.row(x, a);
            let mut finite = true;
            for &(y, q) in row {
                if !q.is_finite() {
                    finite = false;
                    violations.push(Violation {
                        kind: ViolationKind::NonFiniteRate,
                        x,
                        a: Some(a),
                        y: Some(y),
                        value: q,
                        slack: f64::NEG_INFINITY,
                        message: format!("rate q({y}|{x},{a}) = {q}"),
                    });
                } else if y != x && q < 0.0 {
                    violations.push(Violation {
                        kind: ViolationKind::NegativeOffDiagonal,
                        x,
                        a: Some(a),
                        y: Some(y),
                        value: q,
                        slack: q,
                        message: format!("off-diagonal q({y}|{x},{a}) = {q}"),
                    });
                } else if y == x && q > 0.0 {
                    violations.push(Violation {
                        kind: ViolationKind::PositiveDiagonal,
                        x,
                        a: Some(a),
                        y: Some(y),
                        value: q,
                        slack: -q,
                        message: format!("diagonal q({x}|{x},{a}) = {q}"),
                    });
                }
            }
            if finite {
                let sum = compensated_sum(row.iter().map(|e| e.1));
                max_err = max_err.max(sum.abs());
                if sum.abs() > ROW_SUM_TOL {
                    violations.push(Violation {
                        kind: ViolationKind::RowSum,
                        x,
                        a: Some(a),
                        y: None,
                        value: sum,
                        slack: ROW_SUM_TOL - sum.abs(),
                        message: format!("row sum = {sum}"),
                    });
                }
            }
            let r = model.reward(x, a);
            if !r.is_finite() {
                violations.push(Violation {
                    kind: ViolationKind::NonFiniteReward,
                    x,
                    a: Some(a),
                    y: None,
                    value: r,
                    slack: f64::NEG_INFINITY,
                    message: format!("reward r({x},{a}) = {r}"),
                });
            }
        }
        let acts = &model.actions.actions[x];
        for i in 0..acts.len() {
            for j in 0..i {
                if acts[i] == acts[j] {
                    violations.push(Violation {
                        kind: ViolationKind::DuplicateAction,
                        x,
                        a: Some(i),
                        y: None,
                        value: j as f64,
                        slack: -1.0,
                        message: format!("action {i} at state {x} repeats action {j}"),
                    });
                }
            }
        }
    }
    if let Some(labels) = &model.states.labels {
        let mut seen: BTreeMap<&[i64], usize> = BTreeMap::new();
        for (x, l) in labels.iter().enumerate() {
            if let Some(&prev) = seen.get(l.as_slice()) {
                violations.push(Violation {
                    kind: ViolationKind::DuplicateLabel,
                    x,
                    a: None,
                    y: Some(prev),
                    value: prev as f64,
                    slack: -1.0,
                    message: format!("label {l:?} of state {x} repeats state {prev}"),
                });
            } else {
                seen.insert(l.as_slice(), x);
            }
        }
    }
    let q = (0..n).map(|x| model.q_max(x)).collect();
    ValidationReport { ok: violations.is_empty(), violations, q, max_row_sum_error: max_err }
}

/// `Σ_y u(y) q(y|x,a)`, summed in ascending `y` with compensation.
pub fn generator_apply(model: &CtmdpModel, u: &[f64], x: usize, a: usize) -> Result<f64> {
    model.check_vector("u", u)?;
    model.check_action(x, a)?;
    Ok(model.apply(u, x, a))
}

/// `max_x |u(x)| / w(x)`.
pub fn weighted_norm(u: &[f64], w: &[f64]) -> f64 {
    u.iter().zip(w).map(|(u, w)| u.abs() / w).fold(0.0, f64::max)
}

/// Weighted distance `max_x |u(x) - v(x)| / w(x)`.
pub fn weighted_distance(u: &[f64], v: &[f64], w: &[f64]) -> f64 {
    u.iter().zip(v).zip(w).map(|((u, v), w)| (u - v).abs() / w).fold(0.0, f64::max)
}

/// A controlled chain on `{0,1,...}^d` described by callbacks, for
/// truncation into a finite [`CtmdpModel`].
pub trait CountableModel {
    fn dim(&self) -> usize;

    /// Smallest truncation level the family accepts.
    fn min_level(&self) -> usize;

    fn actions(&self, x: &[i64]) -> Vec<Vec<f64>>;

    /// Off-diagonal transitions `(y, q(y|x,a))` on the untruncated space.
    fn transitions(&self, x: &[i64], a: &[f64]) -> Vec<(Vec<i64>, f64)>;

    fn reward(&self, x: &[i64], a: &[f64]) -> f64;

    fn family(&self) -> &'static str;

    fn provenance(&self) -> Provenance {
        Provenance::Builtin { name: self.family().into(), params: String::new() }
    }

    fn grid_meta(&self) -> Option<GridMeta> {
        None
    }

    /// Lyapunov data evaluated on the given labels.
    fn lyapunov(&self, _labels: &[Vec<i64>]) -> Option<LyapunovData> {
        None
    }
}

/// Enumerates `{0..n}^d` lexicographically (first coordinate slowest).
pub fn grid_labels(d: usize, n: usize) -> Vec<Vec<i64>> {
    let side = n + 1;
    let total = side.pow(d as u32);
    (0..total)
        .map(|mut i| {
            let mut l = vec![0i64; d];
            for k in (0..d).rev() {
                l[k] = (i % side) as i64;
                i /= side;
            }
            l
        })
        .collect()
}

/// Index of a label in the lexicographic grid `{0..n}^d`.
pub fn grid_index(label: &[i64], n: usize) -> usize {
    label.iter().fold(0usize, |acc, &c| acc * (n + 1) + c as usize)
}

/// Restricts a countable model to `{0..N}^d`.
///
/// Transitions leaving the box are redirected to the componentwise-clamped
/// boundary state; resulting self-loops are dropped and each diagonal is
/// recomputed so every row stays conservative.
pub fn truncate<G: CountableModel + ?Sized>(generator: &G, n: usize) -> Result<CtmdpModel> {
    if n < generator.min_level() {
        return Err(Error::TruncationTooSmall { family: generator.family(), min: generator.min_level(), got: n });
    }
    let d = generator.dim();
    let labels = grid_labels(d, n);
    let mut actions = Vec::with_capacity(labels.len());
    let mut rows = Vec::with_capacity(labels.len());
    let mut rewards = Vec::with_capacity(labels.len());
    for (x, l) in labels.iter().enumerate() {
        let acts = generator.actions(l);
        let mut per_action = Vec::with_capacity(acts.len());
        let mut rw = Vec::with_capacity(acts.len());
        for a in &acts {
            let mut entries = Vec::new();
            for (target, rate) in generator.transitions(l, a) {
                if rate == 0.0 {
                    continue;
                }
                let clamped: Vec<i64> = target.iter().map(|&c| c.clamp(0, n as i64)).collect();
                let y = grid_index(&clamped, n);
                if y != x {
                    entries.push((y, rate));
                }
            }
            per_action.push(entries);
            rw.push(generator.reward(l, a));
        }
        actions.push(acts);
        rows.push(per_action);
        rewards.push(rw);
    }
    let lyapunov = generator.lyapunov(&labels);
    let states = StateSpace { size: labels.len(), labels: Some(labels), truncation_level: Some(n) };
    CtmdpModel::new(
        states,
        ActionSets { actions, grid_meta: generator.grid_meta() },
        RateKernel::new(rows),
        RewardTable { r: rewards },
        lyapunov,
        generator.provenance(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_state(row1: Vec<(usize, f64)>) -> CtmdpModel {
        let rows = vec![vec![vec![(0, -1.0), (1, 1.0)]], vec![row1], vec![vec![(1, 2.0), (2, -2.0)]]];
        CtmdpModel::new(
            StateSpace::plain(3),
            ActionSets::single(3),
            RateKernel::new(rows),
            RewardTable { r: vec![vec![0.0]; 3] },
            None,
            Provenance::Explicit,
        )
        .unwrap()
    }

    #[test]
    fn birth_death_row_validates() {
        let m = three_state(vec![(0, 3.0), (1, -4.0), (2, 1.0)]);
        let rep = validate_model(&m);
        assert!(rep.ok, "{:?}", rep.violations);
        assert_eq!(rep.q[1], 4.0);
    }

    #[test]
    fn perturbed_row_reports_row_sum() {
        let m = three_state(vec![(0, 3.0), (1, -3.5), (2, 1.0)]);
        let rep = validate_model(&m);
        assert!(!rep.ok);
        assert_eq!(rep.violations.len(), 1);
        let v = &rep.violations[0];
        assert_eq!(v.kind, ViolationKind::RowSum);
        assert_eq!((v.x, v.a), (1, Some(0)));
        assert_eq!(v.message, "row sum = 0.5");
    }

    #[test]
    fn negative_off_diagonal_is_reported() {
        let m = three_state(vec![(0, -1.0), (2, 1.0)]);
        let rep = validate_model(&m);
        assert!(rep.violations.iter().any(|v| v.kind == ViolationKind::NegativeOffDiagonal && v.y == Some(0)));
    }

    #[test]
    fn absorbing_single_state() {
        let m = CtmdpModel::new(
            StateSpace::plain(1),
            ActionSets::new(vec![vec![vec![1.0], vec![2.0]]]),
            RateKernel::new(vec![vec![vec![], vec![(0, 0.0)]]]),
            RewardTable { r: vec![vec![1.0, 2.0]] },
            None,
            Provenance::Explicit,
        )
        .unwrap();
        let rep = validate_model(&m);
        assert!(rep.ok);
        assert_eq!(rep.q[0], 0.0);
        assert_eq!(m.row(0, 0), &[(0, 0.0)]);
    }

    #[test]
    fn out_of_range_target_is_hard_error() {
        let r = CtmdpModel::new(
            StateSpace::plain(1),
            ActionSets::single(1),
            RateKernel::new(vec![vec![vec![(3, 1.0)]]]),
            RewardTable { r: vec![vec![0.0]] },
            None,
            Provenance::Explicit,
        );
        assert!(matches!(r, Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn generator_apply_basics() {
        let m = three_state(vec![(0, 3.0), (1, -4.0), (2, 1.0)]);
        for x in 0..3 {
            assert_eq!(generator_apply(&m, &[5.0; 3], x, 0).unwrap(), 0.0);
            let mut e = [0.0; 3];
            e[x] = 1.0;
            assert!(generator_apply(&m, &e, x, 0).unwrap() <= 0.0);
        }
        assert!(generator_apply(&m, &[1.0; 2], 0, 0).is_err());
        assert!(generator_apply(&m, &[1.0; 3], 0, 1).is_err());
    }

    #[test]
    fn weighted_norm_examples() {
        assert_eq!(weighted_norm(&[2.0, -6.0], &[1.0, 3.0]), 2.0);
        assert_eq!(weighted_norm(&[0.0, 0.0], &[1.0, 3.0]), 0.0);
        assert_eq!(weighted_norm(&[4.0, 3.0], &[4.0, 3.0]), 1.0);
    }

    #[test]
    fn grid_roundtrip() {
        let labels = grid_labels(2, 3);
        assert_eq!(labels.len(), 16);
        for (i, l) in labels.iter().enumerate() {
            assert_eq!(grid_index(l, 3), i);
        }
        assert_eq!(labels[5], vec![1, 1]);
    }
}
