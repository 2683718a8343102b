//! Comparison methods: exact-Hessian cubic regularization (plain and
//! accelerated) and three first-order methods.

use std::collections::VecDeque;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, lincomb, norm, sub};
use crate::problem::LossModel;
use crate::saarc::saarc_run;
use crate::sarc::{sarc_run, Counters, RunResult, RunStatus, SolverConfig};
use crate::trace::{EpochLedger, IterationDetail, Phase, Trace, TraceRecord};

/// Plain cubic regularization with the full Hessian and no shift.
pub fn cr_run(model: &LossModel, config: &SolverConfig, x0: &[f64]) -> Result<RunResult> {
    sarc_run(model, &config.exact(), x0)
}

/// Accelerated cubic regularization with the full Hessian and no shift.
pub fn acr_run(model: &LossModel, config: &SolverConfig, x0: &[f64]) -> Result<RunResult> {
    saarc_run(model, &config.exact(), x0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirstOrderConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Gradient Lipschitz estimate; `None` uses the mean component bound.
    pub lipschitz: Option<f64>,
    /// SGD minibatch size (with replacement); `>= n` means full gradient.
    pub batch_size: usize,
    pub lbfgs_memory: usize,
    pub seed: u64,
}

impl Default for FirstOrderConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-9,
            lipschitz: None,
            batch_size: 64,
            lbfgs_memory: 10,
            seed: 0,
        }
    }
}

impl FirstOrderConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        if self.lbfgs_memory == 0 {
            return Err(Error::InvalidConfig("L-BFGS memory must be at least 1".into()));
        }
        if let Some(l) = self.lipschitz {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidConfig(format!("lipschitz must be positive, got {l}")));
            }
        }
        Ok(())
    }

    fn lipschitz_for(&self, model: &LossModel) -> f64 {
        self.lipschitz.unwrap_or_else(|| model.lipschitz_bounds().lbar)
    }
}

/// `f` blew past `1e3·f(x₀)` (or `f(x₀) + 1e3·(1 + |f(x₀)|)` when `f(x₀) ≤ 0`).
pub fn diverged(f0: f64, f: f64) -> bool {
    if !f.is_finite() {
        return true;
    }
    if f0 > 0.0 {
        f > 1e3 * f0
    } else {
        f > f0 + 1e3 * (1.0 + f0.abs())
    }
}

struct FoRun {
    trace: Trace,
    ledger: EpochLedger,
    counters: Counters,
    started: Instant,
}

impl FoRun {
    fn new(n: usize) -> Self {
        Self {
            trace: Trace::default(),
            ledger: EpochLedger::new(n),
            counters: Counters::default(),
            started: Instant::now(),
        }
    }

    fn record(&mut self, f: f64, grad_norm: f64, sample_size: usize, success: bool) {
        let rec = TraceRecord {
            iter: self.counters.iterations,
            epochs: self.ledger.epochs(),
            f,
            grad_norm,
            sigma: 0.0,
            eps_i: 0.0,
            sample_size,
            success,
            phase: Phase::FirstOrder,
        };
        let detail = IterationDetail {
            wall_time_secs: self.started.elapsed().as_secs_f64(),
            ..IterationDetail::default()
        };
        self.trace.push(rec, detail);
    }

    fn finish(self, x: Vec<f64>, f: f64, grad_norm: f64, status: RunStatus) -> RunResult {
        RunResult {
            x,
            f,
            grad_norm,
            status,
            trace: self.trace,
            ledger: self.ledger,
            counters: self.counters,
        }
    }
}

/// Nesterov's accelerated gradient (FISTA momentum) with backtracking on `L`.
///
/// Rows report `f` at the main iterate `x_k` and `‖∇f‖` at the extrapolated
/// point `y_k`, where the gradient is actually evaluated.
pub fn agd_run(model: &LossModel, config: &FirstOrderConfig, x0: &[f64]) -> Result<RunResult> {
    config.validate()?;
    model.check_vec(x0)?;
    let mut run = FoRun::new(model.n());
    let mut lip = config.lipschitz_for(model);
    let mut x = x0.to_vec();
    let mut y = x0.to_vec();
    let mut t = 1.0f64;
    let (f0, _) = model.value_and_gradient(x0)?;
    let mut fx = f0;
    loop {
        let (fy, gy) = model.value_and_gradient(&y)?;
        run.ledger.charge_full_gradient();
        let gn = norm(&gy);
        if run.counters.iterations == 0 {
            run.record(fx, gn, 0, false);
        }
        if gn <= config.grad_tol {
            return Ok(run.finish(y, fy, gn, RunStatus::Converged));
        }
        if run.counters.iterations >= config.max_iters {
            return Ok(run.finish(x, fx, gn, RunStatus::MaxIters));
        }
        let g2 = gn * gn;
        let (x_new, f_new) = loop {
            let mut cand = y.clone();
            axpy(-1.0 / lip, &gy, &mut cand);
            let fc = model.full_value(&cand)?;
            if fc.is_finite() && fc <= fy - g2 / (2.0 * lip) + 4.0 * f64::EPSILON * fy.abs() {
                break (cand, fc);
            }
            if !lip.is_finite() {
                return Err(Error::NonFinite);
            }
            lip *= 2.0;
        };
        let t_new = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let momentum = (t - 1.0) / t_new;
        y = lincomb(1.0 + momentum, &x_new, -momentum, &x);
        x = x_new;
        fx = f_new;
        t = t_new;
        run.counters.iterations += 1;
        run.counters.successes += 1;
        run.record(fx, gn, 0, true);
        if diverged(f0, fx) {
            return Ok(run.finish(x, fx, gn, RunStatus::Diverged));
        }
    }
}

/// Minibatch SGD with constant step `1/L`. Rows are written about ten times
/// per epoch; the reported `f` and `‖∇f‖` there are monitoring evaluations
/// and are not charged.
pub fn sgd_run(model: &LossModel, config: &FirstOrderConfig, x0: &[f64]) -> Result<RunResult> {
    config.validate()?;
    model.check_vec(x0)?;
    let n = model.n();
    let mut run = FoRun::new(n);
    let step = 1.0 / config.lipschitz.unwrap_or_else(|| model.lipschitz_bounds().l);
    let full = config.batch_size >= n;
    let batch_size = config.batch_size.min(n);
    let log_every = (n / (10 * batch_size)).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut x = x0.to_vec();
    let (f0, g0) = model.value_and_gradient(x0)?;
    let mut f = f0;
    let mut gn = norm(&g0);
    run.record(f, gn, 0, false);
    let mut batch = vec![0usize; batch_size];
    loop {
        if gn <= config.grad_tol {
            return Ok(run.finish(x, f, gn, RunStatus::Converged));
        }
        if run.counters.iterations >= config.max_iters {
            return Ok(run.finish(x, f, gn, RunStatus::MaxIters));
        }
        let g = if full {
            model.full_gradient(&x)?
        } else {
            batch.iter_mut().for_each(|j| *j = rng.random_range(0..n));
            model.batch_gradient(&x, &batch)?
        };
        run.ledger.charge_gradients(batch_size);
        axpy(-step, &g, &mut x);
        run.counters.iterations += 1;
        run.counters.successes += 1;
        let last = run.counters.iterations >= config.max_iters;
        if full || run.counters.iterations.is_multiple_of(log_every) || last {
            let (fv, gv) = model.value_and_gradient(&x)?;
            f = fv;
            gn = norm(&gv);
            run.record(f, gn, batch_size, true);
            if diverged(f0, f) {
                return Ok(run.finish(x, f, gn, RunStatus::Diverged));
            }
        }
    }
}

/// L-BFGS with two-loop recursion and Armijo backtracking.
pub fn lbfgs_run(model: &LossModel, config: &FirstOrderConfig, x0: &[f64]) -> Result<RunResult> {
    config.validate()?;
    model.check_vec(x0)?;
    let mut run = FoRun::new(model.n());
    let mut x = x0.to_vec();
    let (f0, mut g) = model.value_and_gradient(x0)?;
    run.ledger.charge_full_gradient();
    let mut f = f0;
    let mut gn = norm(&g);
    run.record(f, gn, 0, false);
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(config.lbfgs_memory);
    loop {
        if gn <= config.grad_tol {
            return Ok(run.finish(x, f, gn, RunStatus::Converged));
        }
        if run.counters.iterations >= config.max_iters {
            return Ok(run.finish(x, f, gn, RunStatus::MaxIters));
        }
        let mut dir = two_loop(&g, &memory);
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            memory.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -gn * gn;
        }
        let mut alpha = if memory.is_empty() { (1.0 / gn).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..60 {
            let mut cand = x.clone();
            axpy(alpha, &dir, &mut cand);
            let fc = model.full_value(&cand)?;
            // a few ulps of slack: near the optimum the decrease drops below rounding
            if fc.is_finite() && fc <= f + 1e-4 * alpha * slope + 4.0 * f64::EPSILON * f.abs() {
                accepted = Some((cand, fc));
                break;
            }
            alpha *= 0.5;
        }
        run.counters.iterations += 1;
        let Some((x_new, _)) = accepted else {
            run.record(f, gn, 0, false);
            return Ok(run.finish(x, f, gn, RunStatus::MaxIters));
        };
        let (f_new, g_new) = model.value_and_gradient(&x_new)?;
        run.ledger.charge_full_gradient();
        let s = sub(&x_new, &x);
        let yv = sub(&g_new, &g);
        let sy = dot(&s, &yv);
        if sy > 1e-12 * norm(&s) * norm(&yv) && sy > 0.0 {
            if memory.len() == config.lbfgs_memory {
                memory.pop_front();
            }
            memory.push_back((s, yv, 1.0 / sy));
        }
        x = x_new;
        f = f_new;
        g = g_new;
        gn = norm(&g);
        run.counters.successes += 1;
        run.record(f, gn, 0, true);
        if diverged(f0, f) {
            return Ok(run.finish(x, f, gn, RunStatus::Diverged));
        }
    }
}

fn two_loop(g: &[f64], memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * dot(s, &q);
        axpy(-a, y, &mut q);
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        axpy(a - b, s, &mut q);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}
