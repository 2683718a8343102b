//! Accelerated adaptive cubic regularization with a sub-sampled Hessian,
//! and the hybrid that hands over to the plain method near the solution.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cubic::{minimize_model, CubicModel, TerminationSpec};
use crate::error::{Error, Result};
use crate::linalg::{add, axpy, dot, lincomb, norm, sub};
use crate::problem::LossModel;
use crate::sampling::SubsampledHessian;
use crate::sarc::{
    drive_sarc, initial_eps, sarc_resume, Counters, Oracle, RunResult, RunStatus, SolverConfig, StepOutcome,
};
use crate::trace::{EpochLedger, IterationDetail, Phase, Trace, TraceRecord};

/// `ψ(z) = C + gᵀ(z − x̄₁) + (ς/6)‖z − x̄₁‖³`, with `C` and `g` accumulated
/// from the linear lower models at successive iterates.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatingSequence {
    anchor: Vec<f64>,
    varsigma: f64,
    lin_grad: Vec<f64>,
    lin_const: f64,
    l: usize,
}

impl EstimatingSequence {
    /// `ψ₁(z) = f(x̄₁) + (ς₁/6)‖z − x̄₁‖³`.
    pub fn new(anchor: Vec<f64>, f_anchor: f64, varsigma1: f64) -> Self {
        let d = anchor.len();
        Self {
            anchor,
            varsigma: varsigma1,
            lin_grad: vec![0.0; d],
            lin_const: f_anchor,
            l: 1,
        }
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn varsigma(&self) -> f64 {
        self.varsigma
    }

    pub fn lin_grad(&self) -> &[f64] {
        &self.lin_grad
    }

    pub fn lin_const(&self) -> f64 {
        self.lin_const
    }

    pub fn l(&self) -> usize {
        self.l
    }

    /// `l(l+1)(l+2)/6`, the total weight carried by the function values.
    pub fn weight_sum(&self) -> f64 {
        let l = self.l as f64;
        l * (l + 1.0) * (l + 2.0) / 6.0
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        let u = sub(z, &self.anchor);
        let nu = norm(&u);
        self.lin_const + dot(&self.lin_grad, &u) + self.varsigma / 6.0 * nu * nu * nu
    }

    /// `∇ψ(z) = g + (ς/2)‖z − x̄₁‖(z − x̄₁)`.
    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let u = sub(z, &self.anchor);
        let nu = norm(&u);
        let mut out = self.lin_grad.clone();
        axpy(0.5 * self.varsigma * nu, &u, &mut out);
        out
    }

    /// `min ψ = C − (2/3)‖g‖·√(2‖g‖/ς)`.
    pub fn min_value(&self) -> f64 {
        let gn = norm(&self.lin_grad);
        self.lin_const - 2.0 / 3.0 * gn * (2.0 * gn / self.varsigma).sqrt()
    }

    /// Adds `(l(l+1)/2)·(f + (z − x)ᵀ∇f(x))` for the next index `l`.
    pub fn add_linear(&mut self, x: &[f64], f: f64, grad: &[f64]) {
        self.l += 1;
        let l = self.l as f64;
        let w = l * (l + 1.0) / 2.0;
        let offset = sub(x, &self.anchor);
        self.lin_const += w * (f - dot(grad, &offset));
        axpy(w, grad, &mut self.lin_grad);
    }

    pub fn grow(&mut self, gamma3: f64) {
        self.varsigma *= gamma3;
    }
}

/// Closed-form minimizer `x̄₁ − √(2/(ς‖g‖))·g`; `x̄₁` when `g = 0`.
pub fn psi_argmin(seq: &EstimatingSequence) -> Vec<f64> {
    let gn = norm(&seq.lin_grad);
    let mut z = seq.anchor.clone();
    if gn > 0.0 {
        axpy(-(2.0 / (seq.varsigma * gn)).sqrt(), &seq.lin_grad, &mut z);
    }
    z
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaarcPhase {
    One,
    Two,
}

pub struct SaarcState {
    pub phase: SaarcPhase,
    /// Phase I iterate, then the best point `x̄_l`.
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub grad_norm: f64,
    /// Extrapolation point `y_l` and, once evaluated, `f(y_l)`, `∇f(y_l)`.
    pub y: Vec<f64>,
    y_eval: Option<(f64, Vec<f64>)>,
    pub z: Vec<f64>,
    pub seq: Option<EstimatingSequence>,
    pub sigma: f64,
    pub eps_i: f64,
    pub hessian: Option<SubsampledHessian>,
    pub terminal: bool,
    pub trace: Trace,
    pub counters: Counters,
    pub(crate) oracle: Oracle,
    spec: TerminationSpec,
    probe_rng: ChaCha8Rng,
}

impl SaarcState {
    pub fn ledger(&self) -> &EpochLedger {
        &self.oracle.ledger
    }

    pub fn l(&self) -> usize {
        self.seq.as_ref().map_or(0, EstimatingSequence::l)
    }

    fn record(&mut self, success: bool, sample_size: usize, mut detail: IterationDetail) {
        let phase = match self.phase {
            SaarcPhase::One => Phase::Phase1,
            SaarcPhase::Two => Phase::Phase2,
        };
        if let Some(seq) = &self.seq {
            detail.l = seq.l();
            detail.varsigma = seq.varsigma();
        }
        detail.t3 = self.counters.t3;
        let rec = TraceRecord {
            iter: self.counters.iterations,
            epochs: self.oracle.ledger.epochs(),
            f: self.f,
            grad_norm: self.grad_norm,
            sigma: self.sigma,
            eps_i: self.eps_i,
            sample_size,
            success,
            phase,
        };
        self.trace.push(rec, detail);
    }

    fn into_result(self, status: RunStatus) -> RunResult {
        RunResult {
            x: self.x,
            f: self.f,
            grad_norm: self.grad_norm,
            status,
            trace: self.trace,
            ledger: self.oracle.ledger,
            counters: self.counters,
        }
    }

    fn ensure_hessian(&mut self, model: &LossModel, at: &[f64]) -> Result<()> {
        let stale = self.hessian.as_ref().is_none_or(|h| h.base_point() != at);
        if stale {
            let h = self.oracle.hessian(model, at, self.eps_i, 1.0 / 3.0)?;
            self.hessian = Some(h);
        }
        Ok(())
    }

    /// Evaluates `y_l` if needed; a `y_l` meeting `grad_tol` becomes the iterate.
    fn prepare_phase2(&mut self, model: &LossModel, config: &SolverConfig) -> Result<()> {
        if self.phase != SaarcPhase::Two || self.y_eval.is_some() {
            return Ok(());
        }
        let (fy, gy) = self.oracle.value_and_gradient(model, &self.y)?;
        let gy_norm = norm(&gy);
        self.eps_i = (1.0f64).min((1.0 - config.kappa_theta) * gy_norm / 2.0);
        if gy_norm <= config.grad_tol {
            self.x = self.y.clone();
            self.f = fy;
            self.grad = gy.clone();
            self.grad_norm = gy_norm;
        }
        self.y_eval = Some((fy, gy));
        Ok(())
    }
}

fn saarc_init(model: &LossModel, config: &SolverConfig, x0: &[f64]) -> Result<SaarcState> {
    config.validate()?;
    model.check_vec(x0)?;
    let spec = config.saarc_termination()?;
    let mut oracle = Oracle::new(model, config);
    let (f, grad) = oracle.value_and_gradient(model, x0)?;
    let grad_norm = norm(&grad);
    let mut state = SaarcState {
        phase: SaarcPhase::One,
        x: x0.to_vec(),
        f,
        grad,
        grad_norm,
        y: x0.to_vec(),
        y_eval: None,
        z: x0.to_vec(),
        seq: None,
        sigma: config.sigma0,
        eps_i: initial_eps(config.kappa_theta, grad_norm),
        hessian: None,
        terminal: grad_norm == 0.0,
        trace: Trace::default(),
        counters: Counters::default(),
        oracle,
        spec,
        probe_rng: ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_7e57),
    };
    if !state.terminal {
        state.ensure_hessian(model, x0)?;
    }
    let size = state.hessian.as_ref().map_or(0, SubsampledHessian::hessian_queries);
    state.record(false, size, IterationDetail::default());
    Ok(state)
}

/// One Phase I iteration: success when `m(x, s, σ) − f(x + s) > 0`.
pub fn phase1_step(state: &mut SaarcState, model: &LossModel, config: &SolverConfig) -> Result<StepOutcome> {
    if state.phase != SaarcPhase::One || state.terminal {
        return Err(Error::InvalidConfig("phase1_step needs a live Phase I state".into()));
    }
    let started = Instant::now();
    let x = state.x.clone();
    state.ensure_hessian(model, &x)?;
    let h = state.hessian.as_ref().expect("hessian present");
    let cubic = CubicModel::new(&state.grad, h, state.sigma, state.f)?;
    let sol = minimize_model(&cubic, &state.spec, state.grad_norm, &config.subproblem)?;
    state.oracle.ledger.record_hvps(sol.hvps);
    let sample_size = h.hessian_queries();
    let scheme = h.scheme();
    let model_value = state.f - sol.model_decrease;

    let trial = add(&state.x, &sol.step);
    let f_trial = model.full_value(&trial)?;
    let theta = model_value - f_trial;
    let success = theta > 0.0 && f_trial.is_finite();

    state.counters.iterations += 1;
    state.counters.t1 += 1;
    if success {
        let (f, grad) = state.oracle.value_and_gradient(model, &trial)?;
        state.grad_norm = norm(&grad);
        state.eps_i = initial_eps(config.kappa_theta, state.grad_norm);
        state.sigma = config.sigma_min.max(state.sigma / config.gamma1);
        state.counters.successes += 1;
        // x̄₁ and ψ₁; z₁ = x̄₁ so y₁ = ¼x̄₁ + ¾z₁ = x̄₁
        let varsigma1 = config.varsigma1.unwrap_or(config.sigma0);
        let seq = EstimatingSequence::new(trial.clone(), f, varsigma1);
        state.z = psi_argmin(&seq);
        state.y = lincomb(0.25, &trial, 0.75, &state.z);
        state.y_eval = Some((f, grad.clone()));
        state.seq = Some(seq);
        state.x = trial;
        state.f = f;
        state.grad = grad;
        state.phase = SaarcPhase::Two;
        if state.grad_norm == 0.0 {
            state.terminal = true;
        }
    } else {
        state.sigma *= config.gamma1;
    }
    let detail = IterationDetail {
        wall_time_secs: started.elapsed().as_secs_f64(),
        krylov_dim: sol.dim,
        hvps: sol.hvps,
        ratio: theta,
        subproblem_unsatisfied: !sol.satisfied,
        scheme: Some(scheme),
        ..IterationDetail::default()
    };
    // the row belongs to the phase the iteration ran in
    let phase = state.phase;
    state.phase = SaarcPhase::One;
    state.record(success, sample_size, detail);
    state.phase = phase;
    Ok(StepOutcome { success, ratio: theta })
}

/// Runs Phase I until its first success (or the iteration cap).
pub fn phase1_run(model: &LossModel, config: &SolverConfig, x0: &[f64]) -> Result<SaarcState> {
    let mut state = saarc_init(model, config, x0)?;
    while state.phase == SaarcPhase::One
        && !state.terminal
        && state.grad_norm > config.grad_tol
        && state.counters.iterations < config.max_iters
    {
        phase1_step(&mut state, model, config)?;
    }
    Ok(state)
}

/// One Phase II iteration at `y_l`: success when
/// `ρ = −sᵀ∇f(y + s)/‖s‖³ ≥ η`.
pub fn phase2_step(state: &mut SaarcState, model: &LossModel, config: &SolverConfig) -> Result<StepOutcome> {
    if state.phase != SaarcPhase::Two || state.terminal {
        return Err(Error::InvalidConfig("phase2_step needs a live Phase II state".into()));
    }
    let started = Instant::now();
    state.prepare_phase2(model, config)?;
    let y = state.y.clone();
    state.ensure_hessian(model, &y)?;
    let (fy, gy) = state.y_eval.clone().expect("y evaluated");
    let gy_norm = norm(&gy);
    let h = state.hessian.as_ref().expect("hessian present");
    let cubic = CubicModel::new(&gy, h, state.sigma, fy)?;
    let sol = minimize_model(&cubic, &state.spec, gy_norm, &config.subproblem)?;
    state.oracle.ledger.record_hvps(sol.hvps);
    let sample_size = h.hessian_queries();
    let scheme = h.scheme();

    state.counters.iterations += 1;
    state.counters.t2 += 1;
    let mut detail = IterationDetail {
        krylov_dim: sol.dim,
        hvps: sol.hvps,
        subproblem_unsatisfied: !sol.satisfied,
        scheme: Some(scheme),
        ..IterationDetail::default()
    };

    let s_norm = norm(&sol.step);
    let mut rho = f64::NAN;
    let mut success = false;
    let mut trial_eval = None;
    if s_norm > 0.0 {
        let trial = add(&y, &sol.step);
        let (ft, gt) = state.oracle.value_and_gradient(model, &trial)?;
        rho = -dot(&sol.step, &gt) / (s_norm * s_norm * s_norm);
        success = rho >= config.eta && ft.is_finite();
        trial_eval = Some((trial, ft, gt));
    }
    detail.ratio = rho;

    match (success, trial_eval) {
        (true, Some((trial, ft, gt))) => {
            state.counters.successes += 1;
            state.sigma = config.sigma_min.max(state.sigma / config.gamma1);
            state.grad_norm = norm(&gt);
            state.x = trial;
            state.f = ft;
            state.grad = gt;
            update_sequence(state, config, &mut detail);
            if state.grad_norm == 0.0 {
                state.terminal = true;
            }
        }
        _ => {
            state.sigma *= config.gamma1;
        }
    }
    detail.wall_time_secs = started.elapsed().as_secs_f64();
    state.record(success, sample_size, detail);
    Ok(StepOutcome { success, ratio: rho })
}

/// ψ update with the new point, the ς-loop, and the next extrapolation point.
fn update_sequence(state: &mut SaarcState, config: &SolverConfig, detail: &mut IterationDetail) {
    let seq = state.seq.as_mut().expect("sequence exists in Phase II");
    seq.add_linear(&state.x, state.f, &state.grad);
    let target = seq.weight_sum() * state.f;
    let mut growth = 0;
    while seq.min_value() < target && growth < config.varsigma_max_growth {
        seq.grow(config.gamma3);
        growth += 1;
    }
    state.counters.t3 += growth;
    let psi_min = seq.min_value();
    if psi_min < target {
        state.counters.varsigma_cap_hits += 1;
        detail.varsigma_cap_hit = true;
    }
    let z = psi_argmin(seq);
    let psi_at_z = seq.value(&z);
    let gn = norm(seq.lin_grad());
    detail.psi_at_min = Some(psi_at_z);
    detail.psi_target = Some(target);
    detail.psi_stationarity = Some(if gn > 0.0 { norm(&seq.gradient(&z)) / gn } else { 0.0 });
    if config.check_invariants {
        detail.psi_growth_violations = probe_cubic_growth(seq, &z, &mut state.probe_rng, 20);
    }
    let l = seq.l() as f64;
    state.y = lincomb(l / (l + 3.0), &state.x, 3.0 / (l + 3.0), &z);
    state.z = z;
    state.y_eval = None;
}

/// Counts probes violating `ψ(z) − ψ(z*) ≥ (ς/12)‖z − z*‖³`.
pub fn probe_cubic_growth(seq: &EstimatingSequence, zmin: &[f64], rng: &mut ChaCha8Rng, probes: usize) -> usize {
    let base = seq.value(zmin);
    let scale = norm(&sub(zmin, seq.anchor())).max(1e-3);
    let mut violations = 0;
    for _ in 0..probes {
        let dir: Vec<f64> = (0..zmin.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let dn = norm(&dir);
        if dn == 0.0 {
            continue;
        }
        let radius = scale * 10f64.powf(rng.random_range(-3.0..1.0));
        let mut z = zmin.to_vec();
        axpy(radius / dn, &dir, &mut z);
        let lhs = seq.value(&z) - base;
        let rhs = seq.varsigma() / 12.0 * radius * radius * radius;
        let slack = 1e-9 * (seq.value(&z).abs() + base.abs());
        if lhs < rhs - slack {
            violations += 1;
        }
    }
    violations
}

/// Relative-progress test used by the hybrid to leave the accelerated phase.
pub fn relative_progress_small(f_prev: f64, f_new: f64) -> bool {
    let change = (f_new - f_prev).abs();
    if f_prev == 0.0 {
        change <= 0.1 * (1.0 + f_prev.abs())
    } else {
        change / f_prev.abs() <= 0.1
    }
}

fn step(state: &mut SaarcState, model: &LossModel, config: &SolverConfig) -> Result<StepOutcome> {
    match state.phase {
        SaarcPhase::One => phase1_step(state, model, config),
        SaarcPhase::Two => phase2_step(state, model, config),
    }
}

fn drive(model: &LossModel, config: &SolverConfig, x0: &[f64], hybrid: bool) -> Result<RunResult> {
    let mut state = saarc_init(model, config, x0)?;
    if state.terminal {
        return Ok(state.into_result(RunStatus::Stationary));
    }
    loop {
        state.prepare_phase2(model, config)?;
        if state.grad_norm <= config.grad_tol || state.terminal {
            return Ok(state.into_result(RunStatus::Converged));
        }
        if state.counters.iterations >= config.max_iters {
            return Ok(state.into_result(RunStatus::MaxIters));
        }
        let f_prev = state.f;
        let out = step(&mut state, model, config)?;
        if hybrid && out.success && relative_progress_small(f_prev, state.f) {
            let mut counters = state.counters;
            counters.switch_iter = Some(counters.iterations);
            let sarc = sarc_resume(
                model,
                config,
                state.x,
                state.f,
                state.grad,
                state.sigma,
                state.oracle,
                state.trace,
                counters,
            )?;
            return drive_sarc(sarc, model, config);
        }
    }
}

/// Phase I then Phase II until `‖∇f‖ ≤ grad_tol` or `max_iters`.
pub fn saarc_run(model: &LossModel, config: &SolverConfig, x0: &[f64]) -> Result<RunResult> {
    drive(model, config, x0, false)
}

/// Accelerated phases until one success improves `f` by at most 10%
/// (relative), then the plain method from that point with σ carried over.
pub fn sacr_run(model: &LossModel, config: &SolverConfig, x0: &[f64]) -> Result<RunResult> {
    drive(model, config, x0, true)
}
