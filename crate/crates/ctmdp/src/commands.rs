use ctmdp_core::average::{brute_force_oracle, solve_average, truncation_sensitivity, VanishingSchedule};
use ctmdp_core::builtins::{condition_summary, parameter_schema, BuiltinSpec, PotlachProcess};
use ctmdp_core::discounted::{solve_discounted_with, DiscountedOptions};
use ctmdp_core::lyapunov::{
    check_assumption_a, check_assumption_b, check_example_conditions, check_monotonicity_uniform, CheckStatus,
    DriftReport,
};
use ctmdp_core::model::{validate_model, CtmdpModel, StationaryPolicy};
use ctmdp_core::numeric::{geometric_grid, linear_grid};
use ctmdp_core::simulate::{
    check_lyapunov_bound, estimate_average_reward, estimate_ergodicity, estimate_initial_drift, lyapunov_bound,
    ErgodicityOptions, FiniteChain, JumpProcess, PotlachChain,
};
use ctmdp_core::verify::{certify_lower, certify_upper, default_checkpoints, martingale_diagnostic, MartingaleOptions};
use ctmdp_core::Error;
use serde_json::{json, Value};

use crate::args::*;
use crate::input::{load_model, load_policy, load_potlach_action, load_solution, LoadedModel, ModelKind};
use crate::report::{emit, envelope, to_value, write_csv, Cell};
use crate::runner::Parallel;
use crate::Failure;

/// Runs one subcommand. `Ok(false)` means a check failed (exit 1).
pub fn run(cmd: Command) -> Result<bool, Failure> {
    match cmd {
        Command::Validate(a) => validate(a),
        Command::Describe(a) => describe(a),
        Command::SolveDiscounted(a) => solve_discounted(a),
        Command::SolveAverage(a) => average(a),
        Command::Oracle(a) => oracle(a),
        Command::Sensitivity(a) => sensitivity(a),
        Command::Verify(a) => verify(a),
        Command::Martingale(a) => martingale(a),
        Command::Simulate(a) => simulate(a),
    }
}

fn core<T>(r: ctmdp_core::Result<T>) -> Result<T, Failure> {
    r.map_err(Failure::from_core)
}

fn finish(command: &str, model: Option<&LoadedModel>, options: Value, result: Value, out: &OutputArgs) -> Result<(), Failure> {
    emit(&envelope(command, model.map(|m| &m.source), options, result), out.out.as_deref())
}

fn runner(out: &OutputArgs) -> Result<Parallel, Failure> {
    Parallel::new(out.threads).map_err(Failure::input)
}

fn schedule(s: &ScheduleArgs) -> VanishingSchedule {
    VanishingSchedule { alpha0: s.alpha0, ratio: s.ratio, steps: s.steps, x0: s.x0 }
}

/// A drift check that cannot run for lack of data is reported, not failed.
fn optional_check(r: ctmdp_core::Result<DriftReport>) -> Result<(Value, bool), Failure> {
    match r {
        Ok(rep) => {
            let pass = rep.pass || rep.status == CheckStatus::Unsupported;
            Ok((to_value(&rep)?, pass))
        }
        Err(e @ (Error::MissingLyapunov(_) | Error::Unsupported(_))) => {
            Ok((json!({ "status": "skipped", "reason": e.to_string() }), true))
        }
        Err(e) => Err(Failure::from_core(e)),
    }
}

fn validate(a: ValidateArgs) -> Result<bool, Failure> {
    let m = load_model(&a.model)?;
    let mut result = serde_json::Map::new();
    let mut pass = true;
    if let Some(spec) = &m.builtin {
        let (v, ok) = optional_check(check_example_conditions(spec))?;
        result.insert("example_conditions".into(), v);
        pass &= ok;
    }
    if let ModelKind::Table(model) = &m.kind {
        let rep = validate_model(model);
        pass &= rep.ok;
        let ok = rep.ok;
        result.insert("generator".into(), to_value(&rep)?);
        // Drift checks on a broken generator would be meaningless.
        if ok {
            for c in &a.checks {
                let (key, r) = match c {
                    Check::Drift => ("drift", check_assumption_a(model)),
                    Check::Bounds => ("bounds", check_assumption_b(model)),
                    Check::Monotone => ("monotone", Ok(check_monotonicity_uniform(model))),
                };
                let (v, ok) = optional_check(r)?;
                result.insert(key.into(), v);
                // Stochastic monotonicity is a sufficient condition only;
                // it is reported but does not fail validation.
                if *c != Check::Monotone {
                    pass &= ok;
                }
            }
        }
    }
    result.insert("pass".into(), Value::Bool(pass));
    finish("validate", Some(&m), to_value(&a)?, Value::Object(result), &a.output)?;
    Ok(pass)
}

fn describe(a: DescribeArgs) -> Result<bool, Failure> {
    let mut result = serde_json::Map::new();
    if let Some(name) = &a.model.builtin {
        let schema: Vec<Value> = core(parameter_schema(name))?
            .iter()
            .map(|(n, meaning, default)| json!({ "name": n, "meaning": meaning, "default": default }))
            .collect();
        result.insert("builtin".into(), json!(name));
        result.insert("parameters".into(), Value::Array(schema));
        result.insert("conditions".into(), to_value(&core(condition_summary(name))?)?);
    }
    let loaded = if a.model.model.is_some() || a.model.builtin.is_some() {
        let m = load_model(&a.model)?;
        match &m.kind {
            ModelKind::Table(model) => {
                result.insert("summary".into(), summary(model));
            }
            ModelKind::Potlach(p) => {
                result.insert(
                    "summary".into(),
                    json!({ "dimension": p.d(), "matrices": p.params.matrices.len(), "drift_constant": p.drift_constant() }),
                );
            }
        }
        m
    } else {
        return Err(Failure::input("give --builtin NAME or --model FILE".into()));
    };
    finish("describe", Some(&loaded), to_value(&a)?, Value::Object(result), &a.output)?;
    Ok(true)
}

fn summary(model: &CtmdpModel) -> Value {
    let n = model.n_states();
    let actions: Vec<usize> = (0..n).map(|x| model.n_actions(x)).collect();
    let q_max = (0..n).map(|x| model.q_max(x)).fold(0.0, f64::max);
    json!({
        "states": n,
        "actions_per_state_max": actions.iter().max(),
        "state_action_pairs": actions.iter().sum::<usize>(),
        "policy_count": model.policy_count().to_string(),
        "truncation_level": model.states.truncation_level,
        "label_dimension": model.states.labels.as_ref().map(|_| model.states.dim()),
        "max_exit_rate": q_max,
        "has_lyapunov": model.lyapunov.is_some(),
    })
}

fn solve_discounted(a: DiscountedArgs) -> Result<bool, Failure> {
    let m = load_model(&a.model)?;
    let model = m.table()?;
    let opts = DiscountedOptions { tol: a.tol, max_iter: a.max_iter, x0: a.x0, warm_start: None };
    let s = core(solve_discounted_with(model, a.alpha, &opts))?;
    let result = json!({
        "alpha": s.alpha,
        "J": s.j,
        "nu": s.nu,
        "h": s.h,
        "x0": s.x0,
        "policy": s.policy.actions,
        "iters": s.iterations,
        "residual": s.residual,
        "residual_sup": s.residual_sup,
        "kappa": s.kappa,
        "error_bound": s.error_bound,
    });
    finish("solve-discounted", Some(&m), to_value(&a)?, result, &a.output)?;
    Ok(true)
}

fn average(a: AverageArgs) -> Result<bool, Failure> {
    let m = load_model(&a.model)?;
    let model = m.table()?;
    let s = core(solve_average(model, &schedule(&a.schedule), a.schedule.tol))?;
    let ok = s.converged;
    finish("solve-average", Some(&m), to_value(&a)?, to_value(&s)?, &a.output)?;
    Ok(ok)
}

fn oracle(a: OracleArgs) -> Result<bool, Failure> {
    let m = load_model(&a.model)?;
    let o = core(brute_force_oracle(m.table()?))?;
    let result = json!({
        "gain": o.gain,
        "policy": o.policy.actions,
        "method": to_value(&o.method)?,
        "policies_evaluated": o.policies_evaluated,
        "reducible": o.reducible,
    });
    finish("oracle", Some(&m), to_value(&a)?, result, &a.output)?;
    Ok(true)
}

fn sensitivity(a: SensitivityArgs) -> Result<bool, Failure> {
    let m = load_model(&a.model)?;
    let spec: &BuiltinSpec =
        m.builtin.as_ref().ok_or_else(|| Failure::input("sensitivity needs a builtin family".into()))?;
    let r = core(truncation_sensitivity(spec, &a.levels, &schedule(&a.schedule), a.schedule.tol))?;
    let ok = r.stable;
    finish("sensitivity", Some(&m), to_value(&a)?, to_value(&r)?, &a.output)?;
    Ok(ok)
}

fn verify(a: VerifyArgs) -> Result<bool, Failure> {
    let m = load_model(&a.model)?;
    let model = m.table()?;
    let s = load_solution(&a.solution)?;
    let upper = core(certify_upper(model, s.gain, &s.h, a.tol))?;
    let lower = core(certify_lower(model, s.gain, &s.h, &s.policy, a.tol))?;
    let pass = upper.pass && lower.pass;
    let result = json!({ "gain": s.gain, "upper": to_value(&upper)?, "lower": to_value(&lower)?, "pass": pass });
    finish("verify", Some(&m), to_value(&a)?, result, &a.output)?;
    Ok(pass)
}

fn martingale(a: MartingaleArgs) -> Result<bool, Failure> {
    let m = load_model(&a.model)?;
    let model = m.table()?;
    let s = load_solution(&a.solution)?;
    let star = a.policy == "star";
    let f = if star {
        core(s.policy.check(model))?;
        s.policy.clone()
    } else {
        load_policy(&a.policy, model)?
    };
    let checkpoints = a.checkpoints.clone().unwrap_or_else(default_checkpoints);
    let opts = MartingaleOptions { x0: a.x0, checkpoints: &checkpoints, reps: a.reps, seed: a.seed };
    let r = core(martingale_diagnostic(model, &f, &s.h, s.gain, &opts, &runner(&a.output)?))?;
    // Under the solution's own policy M_t should be a martingale; under any
    // other policy the upper inequality makes it a supermartingale.
    let pass = if star { r.submartingale_consistent && r.supermartingale_consistent } else { r.supermartingale_consistent };
    if let Some(path) = &a.emit_series {
        let rows: Vec<Vec<Cell>> =
            r.times.iter().zip(&r.means).zip(&r.ses).map(|((t, m), s)| nums(&[*t, *m, *s])).collect();
        write_csv(path, &["t", "mean", "se"], &rows)?;
    }
    let expected = if star { "martingale" } else { "supermartingale" };
    let result = json!({ "policy": f.actions, "expected": expected, "report": to_value(&r)?, "pass": pass });
    finish("martingale", Some(&m), to_value(&a)?, result, &a.output)?;
    Ok(pass)
}

fn simulate(a: SimulateArgs) -> Result<bool, Failure> {
    let m = load_model(&a.model)?;
    let (result, pass) = match &m.kind {
        ModelKind::Table(_) => simulate_table(&a, m.table()?)?,
        ModelKind::Potlach(p) => simulate_potlach(&a, p)?,
    };
    finish("simulate", Some(&m), to_value(&a)?, result, &a.output)?;
    Ok(pass)
}

fn checkpoints_or(a: &SimulateArgs, default: Vec<f64>) -> Vec<f64> {
    a.checkpoints.clone().unwrap_or(default)
}

fn average_csv(a: &SimulateArgs, values: &[f64]) -> Result<(), Failure> {
    if let Some(path) = &a.emit_series {
        let rows: Vec<Vec<Cell>> = values.iter().enumerate().map(|(k, v)| vec![Cell::Int(k as u64), Cell::Num(*v)]).collect();
        write_csv(path, &["rep", "value"], &rows)?;
    }
    Ok(())
}

fn nums(v: &[f64]) -> Vec<Cell> {
    v.iter().map(|&x| Cell::Num(x)).collect()
}

fn moment_csv(a: &SimulateArgs, rows: Vec<Vec<Cell>>, extra: Option<&str>) -> Result<(), Failure> {
    if let Some(path) = &a.emit_series {
        let mut header = vec!["t", "mean", "se", "bound"];
        header.extend(extra);
        write_csv(path, &header, &rows)?;
    }
    Ok(())
}

/// `E w(x(t)) − w(x0) ≤ (e^{−ct} − 1)(w(x0) − b/c)` under the drift inequality.
fn increment_bound(t: f64, c: f64, b: f64, w0: f64) -> f64 {
    ((-c * t).exp() - 1.0) * (w0 - b / c)
}

fn simulate_table(a: &SimulateArgs, model: &CtmdpModel) -> Result<(Value, bool), Failure> {
    let f = match &a.policy {
        Some(p) => load_policy(p, model)?,
        None => StationaryPolicy::first(model),
    };
    let x0: usize = match &a.x0 {
        None => 0,
        Some(s) => s.trim().parse().map_err(|_| Failure::input(format!("--x0 must be a state index, got {s:?}")))?,
    };
    if x0 >= model.n_states() {
        return Err(Failure::input(format!("--x0 {x0} out of range ({} states)", model.n_states())));
    }
    let run = runner(&a.output)?;
    let chain = core(FiniteChain::new(model, &f))?;
    let policy = to_value(&f.actions)?;
    match a.mode {
        Mode::Average => {
            let r = core(estimate_average_reward(&chain, x0, a.horizon, a.reps, a.seed, &run))?;
            average_csv(a, &r.values)?;
            Ok((json!({ "mode": "average", "policy": policy, "report": to_value(&r)? }), true))
        }
        Mode::Lyapunov => {
            let times = checkpoints_or(a, geometric_grid(0.01, 10.0, 8));
            let r = core(check_lyapunov_bound(model, &f, x0, &times, a.reps, a.seed, &run))?;
            moment_csv(a, r.rows.iter().map(|m| nums(&[m.t, m.mean, m.se, m.bound])).collect(), None)?;
            Ok((json!({ "mode": "lyapunov", "policy": policy, "report": to_value(&r)? }), r.pass))
        }
        Mode::Ergodicity => {
            let times = checkpoints_or(a, geometric_grid(0.05, 5.0, 8));
            let probe: Vec<f64> = (0..model.n_states()).map(|x| model.reward(x, f.action(x))).collect();
            let starts = [x0, if x0 + 1 < model.n_states() { model.n_states() - 1 } else { 0 }];
            let opts = ErgodicityOptions {
                starts,
                checkpoints: &times,
                reps: a.reps,
                seed: a.seed,
                stationary_horizon: a.horizon,
                stationary_reps: a.reps,
            };
            let r = core(estimate_ergodicity(model, &f, &[probe], &opts, &run))?;
            let rows = r
                .rows
                .iter()
                .map(|row| {
                    let bound = match (r.rho_hat, r.r_hat) {
                        (Some(rho), Some(rr)) => rr * chain.weight(&row.start) * (-rho * row.t).exp(),
                        _ => f64::NAN,
                    };
                    let mut cells = nums(&[row.t, row.distance, row.distance_se, bound]);
                    cells.push(Cell::Int(row.start as u64));
                    cells
                })
                .collect();
            moment_csv(a, rows, Some("start"))?;
            Ok((json!({ "mode": "ergodicity", "policy": policy, "probe": "reward under the policy", "report": to_value(&r)? }), true))
        }
        Mode::Drift => {
            let l = model.lyapunov.as_ref().ok_or_else(|| Failure::input("drift mode needs Lyapunov data".into()))?;
            let times = checkpoints_or(a, linear_grid(0.005, 0.05, 10));
            let r = core(estimate_initial_drift(&chain, x0, &times, a.reps, a.seed, &run))?;
            drift_result(a, &r, l.c, l.b, policy)
        }
    }
}

fn drift_result(
    a: &SimulateArgs,
    r: &ctmdp_core::simulate::DriftEstimate,
    c: f64,
    b: f64,
    policy: Value,
) -> Result<(Value, bool), Failure> {
    let rows: Vec<Vec<f64>> = r
        .times
        .iter()
        .zip(&r.mean_increments)
        .zip(&r.ses)
        .map(|((t, m), s)| vec![*t, *m, *s, increment_bound(*t, c, b, r.w0)])
        .collect();
    let pass = rows.iter().all(|v| v[1] <= v[3] + 3.0 * v[2]);
    let bounds: Vec<f64> = rows.iter().map(|v| v[3]).collect();
    moment_csv(a, rows.iter().map(|v| nums(v)).collect(), None)?;
    Ok((json!({ "mode": "drift", "policy": policy, "c": c, "b": b, "bounds": bounds, "report": to_value(r)?, "pass": pass }), pass))
}

fn simulate_potlach(a: &SimulateArgs, p: &PotlachProcess) -> Result<(Value, bool), Failure> {
    let action = load_potlach_action(a.policy.as_deref(), p)?;
    let x0: Vec<f64> = match &a.x0 {
        None => vec![1.0; p.d()],
        Some(s) => {
            let v: Vec<f64> = s
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| Failure::input(format!("--x0 must be comma-separated numbers, got {s:?}")))?;
            if v.len() == 1 { vec![v[0]; p.d()] } else { v }
        }
    };
    if x0.len() != p.d() || x0.iter().any(|&v| !(v >= 1.0) || !v.is_finite()) {
        return Err(Failure::input(format!("--x0 must have {} coordinates, each at least 1", p.d())));
    }
    let run = runner(&a.output)?;
    let chain = core(PotlachChain::new(p, action.clone()))?;
    let act = to_value(&action)?;
    let c = p.drift_constant();
    match a.mode {
        Mode::Average => {
            let r = core(estimate_average_reward(&chain, x0, a.horizon, a.reps, a.seed, &run))?;
            average_csv(a, &r.values)?;
            Ok((json!({ "mode": "average", "action": act, "report": to_value(&r)? }), true))
        }
        Mode::Lyapunov => {
            let times = checkpoints_or(a, geometric_grid(0.01, 10.0, 8));
            let r = core(lyapunov_bound(&chain, c, 0.0, x0, &times, a.reps, a.seed, &run))?;
            moment_csv(a, r.rows.iter().map(|m| nums(&[m.t, m.mean, m.se, m.bound])).collect(), None)?;
            Ok((json!({ "mode": "lyapunov", "action": act, "report": to_value(&r)? }), r.pass))
        }
        Mode::Drift => {
            let times = checkpoints_or(a, linear_grid(0.005, 0.05, 10));
            let r = core(estimate_initial_drift(&chain, x0, &times, a.reps, a.seed, &run))?;
            drift_result(a, &r, c, 0.0, act)
        }
        Mode::Ergodicity => Err(Failure::input("ergodicity mode needs a tabulated model".into())),
    }
}
