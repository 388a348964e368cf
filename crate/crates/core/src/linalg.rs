//! Dense linear solves used as independent oracles: fixed-policy discounted
//! values, Poisson equations and stationary distributions.
//!
//! All systems are assembled from the rate kernel of a fixed policy and
//! solved by LU with partial pivoting. Sizes here are those of truncated
//! test models (hundreds of states), so dense storage is adequate.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::model::{CtmdpModel, StationaryPolicy};
use crate::{Error, Result};

/// Value of a fixed policy in the form `J = nu/alpha + u` with `u(x0) = 0`.
///
/// With `alpha = 0` the same system is the Poisson equation
/// `g - Σ_y q(y|x,f) u(y) = r(x,f)` and `nu` is the gain `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeValue {
    pub nu: f64,
    pub u: Vec<f64>,
}

impl RelativeValue {
    /// `J(x) = nu/alpha + u(x)`.
    pub fn discounted_value(&self, alpha: f64) -> Vec<f64> {
        self.u.iter().map(|u| self.nu / alpha + u).collect()
    }
}

/// Solves `nu + alpha u(x) - Σ_y q(y|x,f) u(y) = r(x,f)`, `u(x0) = 0`.
///
/// Substituting `J = nu/alpha + u` into `alpha J = r_f + Q_f J` gives this
/// system, which stays well conditioned as `alpha -> 0` on unichain models
/// (the column of `u(x0)` is replaced by the unknown `nu`).
pub fn relative_value_solve(
    model: &CtmdpModel,
    f: &StationaryPolicy,
    alpha: f64,
    x0: usize,
) -> Result<RelativeValue> {
    f.check(model)?;
    let n = model.n_states();
    if x0 >= n {
        return Err(Error::IndexOutOfRange { what: "reference state", index: x0, len: n });
    }
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for x in 0..n {
        let act = f.action(x);
        for &(y, q) in model.row(x, act) {
            if y != x0 {
                a[(x, y)] -= q;
            }
        }
        if x != x0 {
            a[(x, x)] += alpha;
        }
        a[(x, x0)] = 1.0;
        rhs[x] = model.reward(x, act);
    }
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SingularSystem(format!("relative value system (alpha = {alpha})")))?;
    let nu = sol[x0];
    let u = (0..n).map(|x| if x == x0 { 0.0 } else { sol[x] }).collect();
    Ok(RelativeValue { nu, u })
}

/// Direct discounted value `J` of a fixed policy: the solution of
/// `alpha J = r_f + Q_f J`.
pub fn policy_value_direct(model: &CtmdpModel, f: &StationaryPolicy, alpha: f64) -> Result<Vec<f64>> {
    if !(alpha > 0.0) {
        return Err(Error::NonPositiveDiscount(alpha));
    }
    Ok(relative_value_solve(model, f, alpha, 0)?.discounted_value(alpha))
}

/// Gain and relative values `(g, u)` with `g - Q_f u = r_f`, `u(x0) = 0`.
pub fn poisson_solve(model: &CtmdpModel, f: &StationaryPolicy, x0: usize) -> Result<(f64, Vec<f64>)> {
    let rv = relative_value_solve(model, f, 0.0, x0)?;
    Ok((rv.nu, rv.u))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stationary {
    pub pi: Vec<f64>,
    /// States of the closed class the distribution lives on.
    pub class: Vec<usize>,
    /// True when the class is not the whole state space.
    pub reducible: bool,
}

fn reach_from(model: &CtmdpModel, f: &StationaryPolicy, start: usize) -> Vec<bool> {
    let n = model.n_states();
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(x) = stack.pop() {
        for &(y, q) in model.row(x, f.action(x)) {
            if y != x && q > 0.0 && !seen[y] {
                seen[y] = true;
                stack.push(y);
            }
        }
    }
    seen
}

/// Stationary distribution of the chain under `f` on the lowest-indexed
/// closed class reachable from state 0.
pub fn stationary_distribution(model: &CtmdpModel, f: &StationaryPolicy) -> Result<Stationary> {
    f.check(model)?;
    let n = model.n_states();
    let from0 = reach_from(model, f, 0);
    let mut class = None;
    for x in (0..n).filter(|&x| from0[x]) {
        let rx = reach_from(model, f, x);
        let closed = (0..n).filter(|&y| rx[y]).all(|y| reach_from(model, f, y)[x]);
        if closed {
            class = Some((0..n).filter(|&y| rx[y]).collect::<Vec<_>>());
            break;
        }
    }
    let class = class.ok_or_else(|| Error::SingularSystem("no closed class reachable from state 0".into()))?;
    let k = class.len();
    let mut pos = vec![usize::MAX; n];
    for (i, &x) in class.iter().enumerate() {
        pos[x] = i;
    }
    // pi Q_C = 0 transposed, last equation replaced by normalization.
    let mut a = DMatrix::<f64>::zeros(k, k);
    for (i, &x) in class.iter().enumerate() {
        for &(y, q) in model.row(x, f.action(x)) {
            let j = pos[y];
            if j != usize::MAX {
                a[(j, i)] += q;
            }
        }
    }
    for i in 0..k {
        a[(k - 1, i)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(k);
    rhs[k - 1] = 1.0;
    let sol = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SingularSystem("stationary distribution system".into()))?;
    let mut pi = vec![0.0; n];
    for (i, &x) in class.iter().enumerate() {
        pi[x] = sol[i];
    }
    Ok(Stationary { pi, reducible: k != n, class })
}
