//! Parametric generators for the five example families: controlled
//! birth–death with two-step deaths, upwardly skip-free processes with
//! catastrophes, a tandem pair of M/M/1 queues, the M/M/N/0 loss system,
//! and the generalized Potlach process (simulation only).
//!
//! Tabulated families come with Lyapunov data (`w`, `w'` and constants)
//! so that the drift checks in [`crate::lyapunov`] can be run directly.
//! The builders enforce only structural constraints; the stability
//! conditions of each family are evaluated by
//! [`crate::lyapunov::check_example_conditions`].

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::model::{
    truncate, ActionSets, CountableModel, CtmdpModel, GridMeta, LyapunovData, Provenance, RateKernel,
    RewardTable, StateSpace,
};
use crate::numeric::linear_grid;
use crate::{Error, Result};

pub const FAMILIES: [&str; 5] = ["birth_death", "skip_free", "tandem", "mmn0", "potlach"];

/// Control-cost shape shared by the families.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields))]
pub enum CostSpec {
    #[default]
    Zero,
    /// `κ · a · x`
    Linear { kappa: f64 },
    /// `κ · a²`
    Quadratic { kappa: f64 },
}

impl CostSpec {
    pub fn eval(&self, x: f64, a: f64) -> f64 {
        match *self {
            CostSpec::Zero => 0.0,
            CostSpec::Linear { kappa } => kappa * a * x,
            CostSpec::Quadratic { kappa } => kappa * a * a,
        }
    }

    /// Smallest `M̃` with `sup_{a ≤ a_max} |cost(x,a)| ≤ M̃ (x + 1)` for all `x ≥ 0`.
    pub fn growth_constant(&self, a_max: f64) -> f64 {
        match *self {
            CostSpec::Zero => 0.0,
            CostSpec::Linear { kappa } => kappa.abs() * a_max,
            CostSpec::Quadratic { kappa } => kappa.abs() * a_max * a_max,
        }
    }

    fn describe(&self) -> String {
        match *self {
            CostSpec::Zero => "zero".into(),
            CostSpec::Linear { kappa } => format!("linear(kappa={kappa})"),
            CostSpec::Quadratic { kappa } => format!("quadratic(kappa={kappa})"),
        }
    }
}

fn grid(lo: f64, hi: f64, g: usize) -> Vec<f64> {
    linear_grid(lo, hi, g)
}

fn require(ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg.into()))
    }
}

fn finite(vals: &[f64]) -> Result<()> {
    require(vals.iter().all(|v| v.is_finite()), "parameters must be finite")
}

/// Controlled birth–death system: death rate `a ∈ [μ1, μ2]`, births at
/// `λx` (`λ` at 0), deaths of size two with probability `p1`, reward
/// `p·x − r_c(x,a)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct BirthDeathParams {
    pub lambda: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub p1: f64,
    pub p: f64,
    pub cost: CostSpec,
    #[cfg_attr(feature = "serde", serde(rename = "G"))]
    pub grid: usize,
    #[cfg_attr(feature = "serde", serde(rename = "N"))]
    pub n: usize,
}

impl Default for BirthDeathParams {
    fn default() -> Self {
        BirthDeathParams { lambda: 1.0, mu1: 3.0, mu2: 4.0, p1: 0.0, p: 1.0, cost: CostSpec::Zero, grid: 11, n: 30 }
    }
}

impl BirthDeathParams {
    pub fn check(&self) -> Result<()> {
        finite(&[self.lambda, self.mu1, self.mu2, self.p1, self.p])?;
        require(self.lambda > 0.0, "birth_death: lambda must be positive")?;
        require(self.mu1 > 0.0 && self.mu2 > self.mu1, "birth_death: need mu2 > mu1 > 0")?;
        require((0.0..=1.0).contains(&self.p1), "birth_death: p1 must lie in [0, 1]")?;
        require(self.p >= 0.0, "birth_death: p must be nonnegative")?;
        require(self.grid >= 1, "birth_death: grid size must be at least 1")?;
        Ok(())
    }

    pub fn actions_grid(&self) -> Vec<f64> {
        grid(self.mu1, self.mu2, self.grid)
    }

    /// `M̃` of the cost bound `sup_a |r_c(x,a)| ≤ M̃ (x+1)`.
    pub fn cost_bound(&self) -> f64 {
        self.cost.growth_constant(self.mu2)
    }
}

impl CountableModel for BirthDeathParams {
    fn dim(&self) -> usize {
        1
    }

    fn min_level(&self) -> usize {
        3
    }

    fn actions(&self, _x: &[i64]) -> Vec<Vec<f64>> {
        self.actions_grid().into_iter().map(|a| vec![a]).collect()
    }

    fn transitions(&self, x: &[i64], a: &[f64]) -> Vec<(Vec<i64>, f64)> {
        let (x, a, l) = (x[0], a[0], self.lambda);
        match x {
            0 => vec![(vec![1], l)],
            1 => vec![(vec![0], a), (vec![2], l)],
            _ => {
                let xf = x as f64;
                let p2 = 1.0 - self.p1;
                vec![(vec![x - 2], self.p1 * a * xf), (vec![x - 1], p2 * a * xf), (vec![x + 1], l * xf)]
            }
        }
    }

    fn reward(&self, x: &[i64], a: &[f64]) -> f64 {
        let xf = x[0] as f64;
        self.p * xf - self.cost.eval(xf, a[0])
    }

    fn family(&self) -> &'static str {
        "birth_death"
    }

    fn provenance(&self) -> Provenance {
        Provenance::Builtin {
            name: "birth_death".into(),
            params: format!(
                "lambda={} mu1={} mu2={} p1={} p={} cost={} G={} N={}",
                self.lambda,
                self.mu1,
                self.mu2,
                self.p1,
                self.p,
                self.cost.describe(),
                self.grid,
                self.n
            ),
        }
    }

    fn grid_meta(&self) -> Option<GridMeta> {
        Some(GridMeta { intervals: vec![(self.mu1, self.mu2)], resolution: self.grid })
    }

    fn lyapunov(&self, labels: &[Vec<i64>]) -> Option<LyapunovData> {
        Some(linear_weight_data(
            labels,
            (self.mu1 - self.lambda) / 2.0,
            self.mu1 + self.lambda,
            self.mu2 + self.lambda,
            self.p + self.cost_bound(),
            6.0 * self.lambda,
        ))
    }
}

/// `w = x + 1`, `w' = (x+1)(x+2)`, `M' = M_q`, `b' = 0`.
fn linear_weight_data(labels: &[Vec<i64>], c: f64, b: f64, m_q: f64, m: f64, cprime: f64) -> LyapunovData {
    let w = labels.iter().map(|l| l[0] as f64 + 1.0).collect();
    let wp = labels.iter().map(|l| (l[0] as f64 + 1.0) * (l[0] as f64 + 2.0)).collect();
    LyapunovData {
        w,
        c,
        b,
        m_q,
        m: Some(m),
        wprime: Some(wp),
        cprime: Some(cprime),
        bprime: Some(0.0),
        mprime: Some(m_q),
    }
}

pub fn build_birth_death(params: &BirthDeathParams) -> Result<CtmdpModel> {
    params.check()?;
    truncate(params, params.n)
}

/// Upwardly skip-free process with catastrophes of size one and two.
///
/// Action `(a1, a2)`: immigration `a1 ∈ [0, b]` and catastrophe control
/// `a2 ∈ [b, β]` with catastrophe rate `d(x, a2) = d_coef · a2 · x`.
/// A catastrophe at `x ≥ 2` removes two individuals with probability
/// `gamma2` (never at `x = 1`). State 0 carries the one-component action `a1`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SkipFreeParams {
    pub lambda: f64,
    pub mu: f64,
    pub b: f64,
    pub beta: f64,
    /// `r̃(a1) = τ a1`.
    pub tau: f64,
    pub gamma2: f64,
    pub d_coef: f64,
    /// Decision cost `c(x, a2)`.
    pub cost: CostSpec,
    pub p: f64,
    pub q1: f64,
    pub q2: f64,
    #[cfg_attr(feature = "serde", serde(rename = "G"))]
    pub grid: usize,
    #[cfg_attr(feature = "serde", serde(rename = "N"))]
    pub n: usize,
}

impl Default for SkipFreeParams {
    fn default() -> Self {
        SkipFreeParams {
            lambda: 1.0,
            mu: 2.0,
            b: 3.0,
            beta: 5.0,
            tau: 1.0,
            gamma2: 0.5,
            d_coef: 2.0,
            cost: CostSpec::Zero,
            p: 1.0,
            q1: 0.5,
            q2: 0.5,
            grid: 11,
            n: 40,
        }
    }
}

impl SkipFreeParams {
    pub fn check(&self) -> Result<()> {
        finite(&[self.lambda, self.mu, self.b, self.beta, self.tau, self.gamma2, self.d_coef, self.p, self.q1, self.q2])?;
        require(self.lambda > 0.0 && self.mu > 0.0, "skip_free: lambda and mu must be positive")?;
        require(self.b > 0.0 && self.beta > self.b, "skip_free: need beta > b > 0")?;
        require((0.0..=1.0).contains(&self.gamma2), "skip_free: gamma2 must lie in [0, 1]")?;
        require(self.d_coef >= 0.0, "skip_free: d_coef must be nonnegative")?;
        require(self.p >= 0.0 && self.q1 >= 0.0 && self.q2 >= 0.0, "skip_free: p, q1, q2 must be nonnegative")?;
        require(self.grid >= 1, "skip_free: grid size must be at least 1")?;
        Ok(())
    }

    /// `γ²_x`: zero at `x ≤ 1`, `gamma2` above.
    pub fn gamma2_at(&self, x: i64) -> f64 {
        if x >= 2 {
            self.gamma2
        } else {
            0.0
        }
    }

    pub fn d(&self, x: i64, a2: f64) -> f64 {
        self.d_coef * a2 * x as f64
    }

    pub fn a1_grid(&self) -> Vec<f64> {
        grid(0.0, self.b, self.grid)
    }

    pub fn a2_grid(&self) -> Vec<f64> {
        grid(self.b, self.beta, self.grid)
    }
}

impl CountableModel for SkipFreeParams {
    fn dim(&self) -> usize {
        1
    }

    fn min_level(&self) -> usize {
        3
    }

    fn actions(&self, x: &[i64]) -> Vec<Vec<f64>> {
        if x[0] == 0 {
            return self.a1_grid().into_iter().map(|a| vec![a]).collect();
        }
        let a2s = self.a2_grid();
        self.a1_grid().into_iter().flat_map(|a1| a2s.iter().map(move |&a2| vec![a1, a2])).collect()
    }

    fn transitions(&self, x: &[i64], a: &[f64]) -> Vec<(Vec<i64>, f64)> {
        let x = x[0];
        let xf = x as f64;
        if x == 0 {
            return vec![(vec![1], a[0])];
        }
        let d = self.d(x, a[1]);
        let g2 = self.gamma2_at(x);
        let g1 = 1.0 - g2;
        let mut t = vec![(vec![x + 1], self.lambda * xf + a[0]), (vec![x - 1], self.mu * xf + d * g1)];
        if x >= 2 {
            t.push((vec![x - 2], d * g2));
        }
        t
    }

    fn reward(&self, x: &[i64], a: &[f64]) -> f64 {
        let x = x[0];
        if x == 0 {
            return self.tau * a[0];
        }
        let d = self.d(x, a[1]);
        let g2 = self.gamma2_at(x);
        let g1 = 1.0 - g2;
        self.tau * a[0] - self.cost.eval(x as f64, a[1]) - self.p * d + self.q1 * g1 * d + self.q2 * g2 * d
    }

    fn family(&self) -> &'static str {
        "skip_free"
    }

    fn provenance(&self) -> Provenance {
        Provenance::Builtin {
            name: "skip_free".into(),
            params: format!(
                "lambda={} mu={} b={} beta={} tau={} gamma2={} d_coef={} cost={} p={} q1={} q2={} G={} N={}",
                self.lambda,
                self.mu,
                self.b,
                self.beta,
                self.tau,
                self.gamma2,
                self.d_coef,
                self.cost.describe(),
                self.p,
                self.q1,
                self.q2,
                self.grid,
                self.n
            ),
        }
    }

    fn grid_meta(&self) -> Option<GridMeta> {
        Some(GridMeta { intervals: vec![(0.0, self.b), (self.b, self.beta)], resolution: self.grid })
    }

    fn lyapunov(&self, labels: &[Vec<i64>]) -> Option<LyapunovData> {
        // Drift of w = x+1 at x ≥ 1 is λx + a1 − μx − d(1 + γ²) ≤ −(μ−λ)x + b.
        let c = self.mu - self.lambda;
        let b = self.b + self.mu - self.lambda;
        let m_q = self.lambda + self.mu + self.d_coef * self.beta + self.b;
        let m = self.tau.abs() * self.b
            + self.cost.growth_constant(self.beta)
            + self.d_coef * self.beta * (self.p + self.q1 + self.q2);
        Some(linear_weight_data(labels, c, b, m_q, m, 2.0 * (self.lambda + self.b)))
    }
}

pub fn build_skip_free(params: &SkipFreeParams) -> Result<CtmdpModel> {
    params.check()?;
    truncate(params, params.n)
}

/// Weight constants for the tandem queue.
pub const TANDEM_SIGMA1: f64 = 1.06;
pub const TANDEM_SIGMA2: f64 = 1.03;
pub const TANDEM_GAMMA: f64 = 0.4;
pub const TANDEM_BETA1: f64 = 1.5;
pub const TANDEM_BETA2: f64 = 0.3;

/// `w(x1,x2) = σ1^{x1−1} + σ2^{x1+x2−1} + γ σ1^{−β1(x1−1)} σ2^{−β2(x1+x2−1)}`.
pub fn tandem_weight(x1: i64, x2: i64) -> f64 {
    let e1 = (x1 - 1) as f64;
    let e2 = (x1 + x2 - 1) as f64;
    libm::pow(TANDEM_SIGMA1, e1)
        + libm::pow(TANDEM_SIGMA2, e2)
        + TANDEM_GAMMA * libm::pow(TANDEM_SIGMA1, -TANDEM_BETA1 * e1) * libm::pow(TANDEM_SIGMA2, -TANDEM_BETA2 * e2)
}

/// Two M/M/1 queues in tandem with unit arrival rate; action `(a1, a2)`
/// is the pair of service rates. Reward: `R · a2` while the second queue
/// is busy, minus `κ (a1 + a2)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TandemParams {
    pub mu1: f64,
    pub mu1_star: f64,
    pub mu2: f64,
    pub mu2_star: f64,
    pub reward: f64,
    pub kappa: f64,
    #[cfg_attr(feature = "serde", serde(rename = "G"))]
    pub grid: usize,
    #[cfg_attr(feature = "serde", serde(rename = "N"))]
    pub n: usize,
}

impl Default for TandemParams {
    fn default() -> Self {
        TandemParams { mu1: 3.0, mu1_star: 4.0, mu2: 2.0, mu2_star: 3.0, reward: 1.0, kappa: 0.0, grid: 11, n: 10 }
    }
}

impl TandemParams {
    pub fn check(&self) -> Result<()> {
        finite(&[self.mu1, self.mu1_star, self.mu2, self.mu2_star, self.reward, self.kappa])?;
        require(self.mu1 > 0.0 && self.mu1_star > self.mu1, "tandem: need mu1_star > mu1 > 0")?;
        require(self.mu2 > 0.0 && self.mu2_star > self.mu2, "tandem: need mu2_star > mu2 > 0")?;
        require(self.grid >= 1, "tandem: grid size must be at least 1")?;
        Ok(())
    }
}

impl CountableModel for TandemParams {
    fn dim(&self) -> usize {
        2
    }

    fn min_level(&self) -> usize {
        2
    }

    fn actions(&self, _x: &[i64]) -> Vec<Vec<f64>> {
        let a2s = grid(self.mu2, self.mu2_star, self.grid);
        grid(self.mu1, self.mu1_star, self.grid)
            .into_iter()
            .flat_map(|a1| a2s.iter().map(move |&a2| vec![a1, a2]))
            .collect()
    }

    fn transitions(&self, x: &[i64], a: &[f64]) -> Vec<(Vec<i64>, f64)> {
        let (x1, x2) = (x[0], x[1]);
        let mut t = vec![(vec![x1 + 1, x2], 1.0)];
        if x1 > 0 {
            t.push((vec![x1 - 1, x2 + 1], a[0]));
        }
        if x2 > 0 {
            t.push((vec![x1, x2 - 1], a[1]));
        }
        t
    }

    fn reward(&self, x: &[i64], a: &[f64]) -> f64 {
        let busy = if x[1] > 0 { 1.0 } else { 0.0 };
        self.reward * a[1] * busy - self.kappa * (a[0] + a[1])
    }

    fn family(&self) -> &'static str {
        "tandem"
    }

    fn provenance(&self) -> Provenance {
        Provenance::Builtin {
            name: "tandem".into(),
            params: format!(
                "mu1={} mu1_star={} mu2={} mu2_star={} reward={} kappa={} G={} N={}",
                self.mu1, self.mu1_star, self.mu2, self.mu2_star, self.reward, self.kappa, self.grid, self.n
            ),
        }
    }

    fn grid_meta(&self) -> Option<GridMeta> {
        Some(GridMeta { intervals: vec![(self.mu1, self.mu1_star), (self.mu2, self.mu2_star)], resolution: self.grid })
    }

    fn lyapunov(&self, labels: &[Vec<i64>]) -> Option<LyapunovData> {
        let w: Vec<f64> = labels.iter().map(|l| tandem_weight(l[0], l[1])).collect();
        let m_q = 1.0 + self.mu1_star + self.mu2_star;
        let m = self.reward.abs() * self.mu2_star + self.kappa.abs() * (self.mu1_star + self.mu2_star);
        Some(LyapunovData {
            wprime: Some(w.clone()),
            w,
            c: 0.002,
            b: 0.0,
            m_q,
            m: Some(m),
            cprime: Some(2.0 * m_q),
            bprime: Some(0.0),
            mprime: Some(m_q),
        })
    }
}

pub fn build_tandem(params: &TandemParams) -> Result<CtmdpModel> {
    params.check()?;
    truncate(params, params.n)
}

/// M/M/N/0 loss system with controlled per-server rate `μ ∈ [μ1, μ2]`
/// (`A(0) = {0}`); reward `p·x − κ·μ·x`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Mmn0Params {
    pub lambda: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub p: f64,
    pub kappa: f64,
    #[cfg_attr(feature = "serde", serde(rename = "G"))]
    pub grid: usize,
    #[cfg_attr(feature = "serde", serde(rename = "N"))]
    pub n: usize,
}

impl Default for Mmn0Params {
    fn default() -> Self {
        Mmn0Params { lambda: 1.0, mu1: 1.5, mu2: 3.0, p: 1.0, kappa: 0.0, grid: 11, n: 2 }
    }
}

impl Mmn0Params {
    pub fn check(&self) -> Result<()> {
        finite(&[self.lambda, self.mu1, self.mu2, self.p, self.kappa])?;
        require(self.lambda > 0.0, "mmn0: lambda must be positive")?;
        require(self.mu1 > 0.0 && self.mu2 > self.mu1, "mmn0: need mu2 > mu1 > 0")?;
        require(self.n >= 1, "mmn0: need at least one server")?;
        require(self.grid >= 1, "mmn0: grid size must be at least 1")?;
        Ok(())
    }

    fn provenance(&self) -> Provenance {
        Provenance::Builtin {
            name: "mmn0".into(),
            params: format!(
                "lambda={} mu1={} mu2={} p={} kappa={} G={} N={}",
                self.lambda, self.mu1, self.mu2, self.p, self.kappa, self.grid, self.n
            ),
        }
    }
}

pub fn build_mmn0(params: &Mmn0Params) -> Result<CtmdpModel> {
    params.check()?;
    let n = params.n;
    let l = params.lambda;
    let mus = grid(params.mu1, params.mu2, params.grid);
    let mut actions = Vec::with_capacity(n + 1);
    let mut rows = Vec::with_capacity(n + 1);
    let mut rewards = Vec::with_capacity(n + 1);
    actions.push(vec![vec![0.0]]);
    rows.push(vec![vec![(1, l)]]);
    rewards.push(vec![0.0]);
    for x in 1..=n {
        let xf = x as f64;
        actions.push(mus.iter().map(|&m| vec![m]).collect());
        rows.push(
            mus.iter()
                .map(|&m| if x < n { vec![(x - 1, m * xf), (x + 1, l)] } else { vec![(x - 1, m * xf)] })
                .collect(),
        );
        rewards.push(mus.iter().map(|&m| params.p * xf - params.kappa * m * xf).collect());
    }
    let labels: Vec<Vec<i64>> = (0..=n as i64).map(|x| vec![x]).collect();
    let lyap = linear_weight_data(
        &labels,
        (params.mu1 - l) / 2.0,
        params.mu1 + l,
        params.mu2 + l,
        params.p + params.kappa.abs() * params.mu2,
        6.0 * l,
    );
    CtmdpModel::new(
        StateSpace { size: n + 1, labels: Some(labels), truncation_level: None },
        ActionSets { actions, grid_meta: Some(GridMeta { intervals: vec![(params.mu1, params.mu2)], resolution: params.grid }) },
        RateKernel::new(rows),
        RewardTable { r: rewards },
        Some(lyap),
        params.provenance(),
    )
}

/// Generalized Potlach process on `[1, ∞)^d`.
///
/// Each component fires at unit rate; when component `i` fires, its mass
/// `x_i` is removed, scaled by `y ~ Exp(λ)` and redistributed along row `i`
/// of the chosen stochastic matrix. The reward
/// `Σ_i Σ_j q_i p_ij x_j − λ Σ_i x_i` follows the printed index pattern.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PotlachParams {
    pub d: usize,
    pub lambda: f64,
    /// The finite action set `A1` of `d × d` stochastic matrices.
    pub matrices: Vec<Vec<Vec<f64>>>,
    /// Upper bounds `q*_i` of the per-component costs.
    pub q_star: Vec<f64>,
}

impl Default for PotlachParams {
    fn default() -> Self {
        PotlachParams::uniform(2, 2.0)
    }
}

impl PotlachParams {
    /// `d` components, one uniform matrix `p_ij = 1/d`, `q* ≡ 1`.
    pub fn uniform(d: usize, lambda: f64) -> Self {
        PotlachParams { d, lambda, matrices: vec![vec![vec![1.0 / d as f64; d]; d]], q_star: vec![1.0; d] }
    }

    pub fn check(&self) -> Result<()> {
        require(self.d >= 1, "potlach: d must be at least 1")?;
        require(self.lambda.is_finite() && self.lambda > 1.0, "potlach: lambda must exceed 1")?;
        require(!self.matrices.is_empty(), "potlach: need at least one matrix")?;
        for m in &self.matrices {
            require(m.len() == self.d && m.iter().all(|r| r.len() == self.d), "potlach: matrices must be d x d")?;
            for r in m {
                require(r.iter().all(|&v| v.is_finite() && v >= 0.0), "potlach: matrix entries must be nonnegative")?;
                let s: f64 = r.iter().sum();
                require((s - 1.0).abs() <= 1e-12, "potlach: matrix rows must sum to 1")?;
            }
        }
        require(self.q_star.len() == self.d, "potlach: q_star must have d entries")?;
        require(self.q_star.iter().all(|&q| q.is_finite() && q > 0.0), "potlach: q_star must be positive")?;
        Ok(())
    }
}

/// A fixed Potlach action: matrix index into `A1` and cost vector `q`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PotlachAction {
    pub matrix: usize,
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotlachProcess {
    pub params: PotlachParams,
}

impl PotlachProcess {
    pub fn d(&self) -> usize {
        self.params.d
    }

    pub fn check_action(&self, a: &PotlachAction) -> Result<()> {
        require(a.matrix < self.params.matrices.len(), "potlach: matrix index out of range")?;
        require(a.q.len() == self.params.d, "potlach: cost vector must have d entries")?;
        for (q, qs) in a.q.iter().zip(&self.params.q_star) {
            require((0.0..=*qs).contains(q), "potlach: costs must lie in [0, q*]")?;
        }
        Ok(())
    }

    /// Total jump rate; every component fires at rate one.
    pub fn exit_rate(&self) -> f64 {
        self.params.d as f64
    }

    /// State after component `i` fires with scale factor `y`.
    pub fn jump(&self, x: &[f64], a: &PotlachAction, i: usize, y: f64) -> Vec<f64> {
        let p = &self.params.matrices[a.matrix];
        let xi = x[i];
        let mut out = x.to_vec();
        out[i] = 0.0;
        for (j, o) in out.iter_mut().enumerate() {
            *o += y * xi * p[i][j];
        }
        out
    }

    pub fn reward(&self, x: &[f64], a: &PotlachAction) -> f64 {
        let p = &self.params.matrices[a.matrix];
        let d = self.params.d;
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += a.q[i] * p[i][j] * x[j];
            }
        }
        s - self.params.lambda * x.iter().sum::<f64>()
    }

    /// `w(x) = Σ_i x_i`.
    pub fn weight(&self, x: &[f64]) -> f64 {
        x.iter().sum()
    }

    /// Drift constant `c = (λ − 1)/λ` (with `b = 0`).
    pub fn drift_constant(&self) -> f64 {
        (self.params.lambda - 1.0) / self.params.lambda
    }

    /// Exact expected drift `Σ_i x_i (E[y] − 1) = −c · w(x)`.
    pub fn expected_drift(&self, x: &[f64]) -> f64 {
        x.iter().map(|xi| xi * (1.0 / self.params.lambda - 1.0)).sum()
    }
}

pub fn build_potlach(params: &PotlachParams) -> Result<PotlachProcess> {
    params.check()?;
    Ok(PotlachProcess { params: params.clone() })
}

/// Any builtin family with its parameters.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "name", content = "params", rename_all = "snake_case"))]
pub enum BuiltinSpec {
    BirthDeath(BirthDeathParams),
    SkipFree(SkipFreeParams),
    Tandem(TandemParams),
    Mmn0(Mmn0Params),
    Potlach(PotlachParams),
}

impl BuiltinSpec {
    pub fn default_for(name: &str) -> Result<Self> {
        Ok(match name {
            "birth_death" => BuiltinSpec::BirthDeath(Default::default()),
            "skip_free" => BuiltinSpec::SkipFree(Default::default()),
            "tandem" => BuiltinSpec::Tandem(Default::default()),
            "mmn0" => BuiltinSpec::Mmn0(Default::default()),
            "potlach" => BuiltinSpec::Potlach(Default::default()),
            _ => return Err(Error::UnknownBuiltin(name.into())),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            BuiltinSpec::BirthDeath(_) => "birth_death",
            BuiltinSpec::SkipFree(_) => "skip_free",
            BuiltinSpec::Tandem(_) => "tandem",
            BuiltinSpec::Mmn0(_) => "mmn0",
            BuiltinSpec::Potlach(_) => "potlach",
        }
    }

    /// Whether the family is a truncation of a countable model.
    pub fn truncatable(&self) -> bool {
        matches!(self, BuiltinSpec::BirthDeath(_) | BuiltinSpec::SkipFree(_) | BuiltinSpec::Tandem(_))
    }

    pub fn truncation(&self) -> Option<usize> {
        match self {
            BuiltinSpec::BirthDeath(p) => Some(p.n),
            BuiltinSpec::SkipFree(p) => Some(p.n),
            BuiltinSpec::Tandem(p) => Some(p.n),
            BuiltinSpec::Mmn0(p) => Some(p.n),
            BuiltinSpec::Potlach(_) => None,
        }
    }

    /// Sets the truncation level (server count for `mmn0`).
    pub fn set_truncation(&mut self, n: usize) {
        match self {
            BuiltinSpec::BirthDeath(p) => p.n = n,
            BuiltinSpec::SkipFree(p) => p.n = n,
            BuiltinSpec::Tandem(p) => p.n = n,
            BuiltinSpec::Mmn0(p) => p.n = n,
            BuiltinSpec::Potlach(_) => {}
        }
    }

    pub fn set_grid(&mut self, g: usize) {
        match self {
            BuiltinSpec::BirthDeath(p) => p.grid = g,
            BuiltinSpec::SkipFree(p) => p.grid = g,
            BuiltinSpec::Tandem(p) => p.grid = g,
            BuiltinSpec::Mmn0(p) => p.grid = g,
            BuiltinSpec::Potlach(_) => {}
        }
    }

    /// Builds the tabulated model; the Potlach process has none.
    pub fn build(&self) -> Result<CtmdpModel> {
        match self {
            BuiltinSpec::BirthDeath(p) => build_birth_death(p),
            BuiltinSpec::SkipFree(p) => build_skip_free(p),
            BuiltinSpec::Tandem(p) => build_tandem(p),
            BuiltinSpec::Mmn0(p) => build_mmn0(p),
            BuiltinSpec::Potlach(_) => {
                Err(Error::Unsupported("potlach is a continuous-state process and has no tabulated model".into()))
            }
        }
    }
}

/// Parameter documentation: `(name, meaning, default)`.
pub fn parameter_schema(name: &str) -> Result<&'static [(&'static str, &'static str, &'static str)]> {
    Ok(match name {
        "birth_death" => &[
            ("lambda", "birth rate per individual (λ at x = 0)", "1"),
            ("mu1", "lower end of the death-rate interval", "3"),
            ("mu2", "upper end of the death-rate interval", "4"),
            ("p1", "probability that a death removes two individuals", "0"),
            ("p", "reward per individual per unit time", "1"),
            ("cost", "control cost r_c: {kind: zero | linear (κ a x) | quadratic (κ a²), kappa}", "zero"),
            ("G", "grid points on [mu1, mu2]", "11"),
            ("N", "truncation level", "30"),
        ],
        "skip_free" => &[
            ("lambda", "birth rate per individual", "1"),
            ("mu", "death rate per individual", "2"),
            ("b", "immigration cap and lower end of the catastrophe-control interval", "3"),
            ("beta", "upper end of the catastrophe-control interval", "5"),
            ("tau", "immigration benefit r̃(a1) = τ a1", "1"),
            ("gamma2", "probability a catastrophe at x ≥ 2 removes two", "0.5"),
            ("d_coef", "catastrophe rate d(x, a2) = d_coef · a2 · x", "2"),
            ("cost", "decision cost c(x, a2): {kind: zero | linear | quadratic, kappa}", "zero"),
            ("p", "damage per catastrophe", "1"),
            ("q1", "benefit of a size-one catastrophe", "0.5"),
            ("q2", "benefit of a size-two catastrophe", "0.5"),
            ("G", "grid points per action component", "11"),
            ("N", "truncation level", "40"),
        ],
        "tandem" => &[
            ("mu1", "lower end of the first service-rate interval", "3"),
            ("mu1_star", "upper end of the first service-rate interval", "4"),
            ("mu2", "lower end of the second service-rate interval", "2"),
            ("mu2_star", "upper end of the second service-rate interval", "3"),
            ("reward", "reward per unit of second-queue service while busy", "1"),
            ("kappa", "cost per unit of service rate", "0"),
            ("G", "grid points per service-rate interval", "11"),
            ("N", "truncation level per queue", "10"),
        ],
        "mmn0" => &[
            ("lambda", "arrival rate", "1"),
            ("mu1", "lower end of the service-rate interval", "1.5"),
            ("mu2", "upper end of the service-rate interval", "3"),
            ("p", "reward per busy server", "1"),
            ("kappa", "cost per unit of total service rate", "0"),
            ("G", "grid points on [mu1, mu2]", "11"),
            ("N", "number of servers", "2"),
        ],
        "potlach" => &[
            ("d", "number of components", "2"),
            ("lambda", "rate of the exponential scale factor (must exceed 1)", "2"),
            ("matrices", "list of d × d stochastic matrices", "[uniform]"),
            ("q_star", "upper bounds of the per-component costs", "[1, ..., 1]"),
        ],
        _ => return Err(Error::UnknownBuiltin(name.into())),
    })
}

/// Conditions evaluated for the family by `check_example_conditions`.
pub fn condition_summary(name: &str) -> Result<&'static [&'static str]> {
    Ok(match name {
        "birth_death" => &[
            "E1: mu1 > lambda",
            "E2: p1 <= mu1 / (2 mu2)",
            "E3: sup_a |r_c(x, a)| <= M~ (x + 1)",
        ],
        "skip_free" => &[
            "F1: mu > lambda and gamma2_{x+1} <= inf_a2 (d(x, a2) + mu x) / d(x + 1, a2)",
            "F2: b <= lambda - mu + inf_{x, a2} (d(x, a2) + gamma2_x d(x, a2))",
            "F3: d(x, a2) <= L1 (x + 1) and |c(x, a2)| <= L2 (x + 1)",
        ],
        "tandem" => &["mu1 >= 3", "mu2 >= 2", "reward bounded"],
        "mmn0" => &["mu1 > lambda"],
        "potlach" => &["lambda > 1", "q(x) <= d"],
        _ => return Err(Error::UnknownBuiltin(name.into())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_model;

    #[test]
    fn birth_death_rows() {
        let p = BirthDeathParams { p1: 0.25, grid: 3, n: 10, ..Default::default() };
        let m = build_birth_death(&p).unwrap();
        assert!(validate_model(&m).ok);
        // a = mu1 = 3
        assert_eq!(m.row(0, 0), &[(0, -1.0), (1, 1.0)]);
        assert_eq!(m.row(1, 0), &[(0, 3.0), (1, -4.0), (2, 1.0)]);
        assert_eq!(m.row(4, 0), &[(2, 3.0), (3, 9.0), (4, -16.0), (5, 4.0)]);
    }

    #[test]
    fn birth_death_boundary_folds_births() {
        let p = BirthDeathParams { p1: 0.0, grid: 1, n: 5, ..Default::default() };
        let m = build_birth_death(&p).unwrap();
        assert_eq!(m.row(5, 0), &[(4, 15.0), (5, -15.0)]);
    }

    #[test]
    fn mmn0_rows() {
        let p = Mmn0Params { lambda: 1.0, mu1: 2.0, mu2: 3.0, grid: 1, n: 2, ..Default::default() };
        let m = build_mmn0(&p).unwrap();
        assert!(validate_model(&m).ok);
        assert_eq!(m.row(0, 0), &[(0, -1.0), (1, 1.0)]);
        assert_eq!(m.row(1, 0), &[(0, 2.0), (1, -3.0), (2, 1.0)]);
        assert_eq!(m.row(2, 0), &[(1, 4.0), (2, -4.0)]);
        assert_eq!(m.n_actions(0), 1);
        assert_eq!(m.actions.actions[0], vec![vec![0.0]]);
    }

    #[test]
    fn tandem_rows_and_weight() {
        let p = TandemParams { grid: 2, n: 10, ..Default::default() };
        let m = build_tandem(&p).unwrap();
        assert_eq!(m.n_states(), 121);
        assert!(validate_model(&m).ok);
        let idx = |x1: usize, x2: usize| x1 * 11 + x2;
        assert_eq!(m.row(idx(0, 0), 0), &[(0, -1.0), (idx(1, 0), 1.0)]);
        // actions ordered (a1, a2): index 0 = (3, 2)
        assert_eq!(m.actions.actions[idx(2, 1)][0], vec![3.0, 2.0]);
        let row = m.row(idx(2, 1), 0);
        assert_eq!(row, &[(idx(1, 2), 3.0), (idx(2, 0), 2.0), (idx(2, 1), -6.0), (idx(3, 1), 1.0)]);
        let want = 1.0 + 1.03 + 0.4 * libm::pow(1.03, -0.3);
        assert!((tandem_weight(1, 1) - want).abs() < 1e-15);
    }

    #[test]
    fn skip_free_rows() {
        let p = SkipFreeParams { grid: 2, n: 10, ..Default::default() };
        let m = build_skip_free(&p).unwrap();
        assert!(validate_model(&m).ok);
        // x = 0: a1 ∈ {0, 3}; action 1 immigrates at rate 3
        assert_eq!(m.row(0, 1), &[(0, -3.0), (1, 3.0)]);
        // x = 1, (a1, a2) = (0, 3): up λ, down μ + d = 2 + 6
        assert_eq!(m.row(1, 0), &[(0, 8.0), (1, -9.0), (2, 1.0)]);
        // x = 5, (a1, a2) = (0, 3): d = 30, halves to x−1 and x−2
        assert_eq!(m.row(5, 0), &[(3, 15.0), (4, 25.0), (5, -45.0), (6, 5.0)]);
    }

    #[test]
    fn potlach_jump_and_drift() {
        let proc = build_potlach(&PotlachParams::uniform(2, 2.0)).unwrap();
        let a = PotlachAction { matrix: 0, q: vec![0.0, 0.0] };
        let y = proc.jump(&[1.0, 3.0], &a, 1, 2.0);
        assert_eq!(y, vec![4.0, 3.0]);
        assert_eq!(proc.reward(&[1.0, 3.0], &a), -8.0);
        assert_eq!(proc.expected_drift(&[1.0, 3.0]), -2.0);
        assert!(build_potlach(&PotlachParams::uniform(2, 1.0)).is_err());
    }

    #[test]
    fn structural_errors() {
        let p = BirthDeathParams { mu2: 2.0, ..Default::default() };
        assert!(build_birth_death(&p).is_err());
        let p = BirthDeathParams { n: 2, ..Default::default() };
        assert!(matches!(build_birth_death(&p), Err(Error::TruncationTooSmall { .. })));
        assert!(BuiltinSpec::default_for("nope").is_err());
        assert!(BuiltinSpec::default_for("potlach").unwrap().build().is_err());
    }
}
