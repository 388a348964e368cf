//! The α-discounted problem: uniformization and value iteration for
//! `α J(x) = max_a { r(x,a) + Σ_y J(y) q(y|x,a) }`.
//!
//! With `m(x) = q(x) + 1` and `P = q/m + I` the equation reads
//! `J(x) = max_a [r(x,a) + m(x) Σ_y P(y|x,a) J(y)] / (α + m(x))`, a
//! contraction with modulus `κ = max_x m(x)/(α + m(x))`.
//!
//! For small α the values `J ~ g/α` are large while the quantities of
//! interest (differences of `J`) are O(1), and `κ` is within `α/m` of one.
//! The solver therefore iterates on the pair `(ν, h)` with
//! `J = ν/α + h`, `h(x0) = 0`, using the relative update
//! `h(x) = (G(x) - G(x0)) / (α + M)`, `ν = G(x0)` where
//! `G(x) = max_a [r(x,a) + M Σ_y P_M(y|x,a) h(y)]` is uniformized at the
//! single rate `M = max_x m(x)`. A common rate keeps the iteration a span
//! contraction (per-state rates can make it oscillate). Its fixed points
//! are exactly the solutions of the discounted equation. Stopping is on
//! the Bellman residual `|J - T_α J|` of the current iterate, which in
//! these coordinates is `|ν + α h(x) - max_a {r + Σ_y h(y) q(y|x,a)}| / (α + m(x))`
//! and never needs `ν/α`.

use alloc::vec;
use alloc::vec::Vec;

use crate::model::{weighted_norm, CtmdpModel, StationaryPolicy};
use crate::numeric::sparse_dot;
use crate::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

/// `P(·|x,a) = q(·|x,a)/m(x) + δ_x` with `m(x) = q(x) + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformizedKernel {
    pub m: Vec<f64>,
    rows: Vec<Vec<Vec<(usize, f64)>>>,
}

impl UniformizedKernel {
    pub fn row(&self, x: usize, a: usize) -> &[(usize, f64)] {
        &self.rows[x][a]
    }
}

/// Uniformizes one rate row of state `x` at rate `m`.
pub fn uniformize_row(x: usize, row: &[(usize, f64)], m: f64) -> Vec<(usize, f64)> {
    row.iter()
        .map(|&(y, q)| if y == x { (y, (m + q) / m) } else { (y, q / m) })
        .collect()
}

pub fn uniformize(model: &CtmdpModel) -> UniformizedKernel {
    let n = model.n_states();
    let m: Vec<f64> = (0..n).map(|x| model.q_max(x) + 1.0).collect();
    let rows = (0..n)
        .map(|x| (0..model.n_actions(x)).map(|a| uniformize_row(x, model.row(x, a), m[x])).collect())
        .collect();
    UniformizedKernel { m, rows }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiscountedSolution {
    pub alpha: f64,
    /// `J = ν/α + h`.
    pub j: Vec<f64>,
    /// `α J(x0)`.
    pub nu: f64,
    /// `J - J(x0)`.
    pub h: Vec<f64>,
    pub x0: usize,
    pub policy: StationaryPolicy,
    pub iterations: usize,
    /// `max_x |J(x) - T_α J(x)| / w(x)` (w ≡ 1 without Lyapunov data).
    pub residual: f64,
    /// Unweighted `max_x |J(x) - T_α J(x)|`, the stopping quantity.
    pub residual_sup: f64,
    /// `max_x m(x)/(α + m(x))`.
    pub kappa: f64,
    /// A-posteriori bound `residual_sup / (1 - κ)` on `‖J - J*_α‖_∞`.
    pub error_bound: f64,
}

/// Options for [`solve_discounted_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscountedOptions<'a> {
    pub tol: f64,
    pub max_iter: usize,
    pub x0: usize,
    /// Initial relative values (warm start), normalized to `h(x0) = 0`.
    pub warm_start: Option<&'a [f64]>,
}

impl Default for DiscountedOptions<'_> {
    fn default() -> Self {
        DiscountedOptions { tol: DEFAULT_TOL, max_iter: DEFAULT_MAX_ITER, x0: 0, warm_start: None }
    }
}

pub fn solve_discounted(model: &CtmdpModel, alpha: f64, tol: f64, max_iter: usize) -> Result<DiscountedSolution> {
    solve_discounted_with(model, alpha, &DiscountedOptions { tol, max_iter, ..Default::default() })
}

/// Best action and value of `r(x,a) + m(x) Σ_y P(y|x,a) h(y)`; the first
/// maximizer wins ties.
fn best(model: &CtmdpModel, uk: &UniformizedKernel, h: &[f64], x: usize) -> (usize, f64) {
    let mut best_a = 0;
    let mut best_v = f64::NEG_INFINITY;
    for a in 0..model.n_actions(x) {
        let v = model.reward(x, a) + uk.m[x] * sparse_dot(uk.row(x, a), h);
        if v > best_v {
            best_v = v;
            best_a = a;
        }
    }
    (best_a, best_v)
}

pub fn solve_discounted_with(
    model: &CtmdpModel,
    alpha: f64,
    opts: &DiscountedOptions<'_>,
) -> Result<DiscountedSolution> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::NonPositiveDiscount(alpha));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let n = model.n_states();
    let x0 = opts.x0;
    if x0 >= n {
        return Err(Error::IndexOutOfRange { what: "reference state", index: x0, len: n });
    }
    let uk = uniformize(model);
    let kappa = uk.m.iter().map(|m| m / (alpha + m)).fold(0.0, f64::max);
    // One rate for the whole iteration: with per-state rates the relative
    // update is not a span contraction and can oscillate.
    let big_m = uk.m.iter().copied().fold(1.0, f64::max);
    let mut h = match opts.warm_start {
        Some(w) => {
            model.check_vector("warm start", w)?;
            w.iter().map(|v| v - w[x0]).collect()
        }
        None => vec![0.0; n],
    };
    // b[x] = max_a {r(x,a) + Σ_y h(y) q(y|x,a)}
    let mut b = vec![0.0; n];
    let mut acts = vec![0usize; n];
    let fill = |h: &[f64], b: &mut [f64], acts: &mut [usize]| {
        for x in 0..n {
            let (a, v) = best_generator(model, h, x);
            b[x] = v;
            acts[x] = a;
        }
    };
    fill(&h, &mut b, &mut acts);
    let mut nu = b[x0];
    let mut resid = vec![0.0; n];
    let mut iterations = 0;
    loop {
        // J − T_α J at J = ν/α + h, uniformized at m(x):
        // (ν + α h(x) − b(x)) / (α + m(x)).
        let mut sup: f64 = 0.0;
        for x in 0..n {
            resid[x] = (nu + alpha * h[x] - b[x]) / (alpha + uk.m[x]);
            sup = sup.max(resid[x].abs());
        }
        if sup <= opts.tol {
            let w = model.lyapunov.as_ref().map(|l| l.w.clone()).unwrap_or_else(|| vec![1.0; n]);
            let j = h.iter().map(|v| nu / alpha + v).collect();
            return Ok(DiscountedSolution {
                alpha,
                j,
                nu,
                residual: weighted_norm(&resid, &w),
                residual_sup: sup,
                kappa,
                error_bound: sup / (1.0 - kappa),
                h,
                x0,
                policy: StationaryPolicy::new(acts),
                iterations,
            });
        }
        if iterations >= opts.max_iter {
            return Err(Error::MaxIterations { iterations, kappa, residual: sup });
        }
        // G(x) = b(x) + M h(x); h ← (G − G(x0)) / (α + M), ν ← G(x0).
        let g0 = b[x0] + big_m * h[x0];
        for x in 0..n {
            h[x] = (b[x] + big_m * h[x] - g0) / (alpha + big_m);
        }
        h[x0] = 0.0;
        nu = g0;
        fill(&h, &mut b, &mut acts);
        iterations += 1;
    }
}

/// Best action and value of `r(x,a) + Σ_y u(y) q(y|x,a)`; the first
/// maximizer wins ties.
fn best_generator(model: &CtmdpModel, u: &[f64], x: usize) -> (usize, f64) {
    let mut best_a = 0;
    let mut best_v = f64::NEG_INFINITY;
    for a in 0..model.n_actions(x) {
        let v = model.reward(x, a) + model.apply(u, x, a);
        if v > best_v {
            best_v = v;
            best_a = a;
        }
    }
    (best_a, best_v)
}

/// The operator `T_α J(x) = max_a [r(x,a) + m(x) Σ_y P(y|x,a) J(y)] / (α + m(x))`.
pub fn bellman_operator(model: &CtmdpModel, alpha: f64, j: &[f64]) -> Vec<f64> {
    let uk = uniformize(model);
    (0..model.n_states()).map(|x| best(model, &uk, j, x).1 / (alpha + uk.m[x])).collect()
}

/// `max_x |α J(x) - max_a {r(x,a) + Σ_y J(y) q(y|x,a)}|` for `J = ν/α + h`,
/// evaluated as `|ν + α h(x) - max_a {r(x,a) + Σ_y h(y) q(y|x,a)}|`.
pub fn original_form_residual(model: &CtmdpModel, sol: &DiscountedSolution) -> f64 {
    (0..model.n_states())
        .map(|x| {
            let best = (0..model.n_actions(x))
                .map(|a| model.reward(x, a) + model.apply(&sol.h, x, a))
                .fold(f64::NEG_INFINITY, f64::max);
            (sol.nu + sol.alpha * sol.h[x] - best).abs()
        })
        .fold(0.0, f64::max)
}

/// Greedy policy `f(x) ∈ argmax_a {r(x,a) + Σ_y u(y) q(y|x,a)}`, lowest
/// index on ties.
///
/// The discount rate does not enter: the argmax of the discounted equation
/// is the same for `J` and for `J` shifted by a constant, so passing either
/// `J*_α` or its relative values `h_α` gives the same policy (the latter
/// avoids cancellation when `α` is small).
pub fn extract_policy(model: &CtmdpModel, u: &[f64]) -> StationaryPolicy {
    StationaryPolicy::new((0..model.n_states()).map(|x| best_generator(model, u, x).0).collect())
}
