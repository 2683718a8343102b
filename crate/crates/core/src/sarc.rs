//! Adaptive cubic regularization with a sub-sampled Hessian.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cubic::{minimize_model, CubicModel, SubproblemOptions, TerminationSpec};
use crate::error::{Error, Result};
use crate::linalg::{add, norm};
use crate::problem::{LipschitzInfo, LossModel};
use crate::sampling::{
    build_subsampled_hessian, per_iteration_delta, SamplingPlan, SamplingScheme, SubsampledHessian,
};
use crate::trace::{EpochLedger, IterationDetail, Phase, Trace, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HessianMode {
    /// Every component, no shift.
    Exact,
    /// Sample sizes from the concentration bounds, shift `ε_i/2`.
    Subsampled(SamplingScheme),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub eta: f64,
    pub sigma_min: f64,
    pub sigma0: f64,
    pub kappa_theta: f64,
    /// Target optimality; enters the per-iteration failure probability.
    pub eps: f64,
    pub delta: f64,
    pub hessian: HessianMode,
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Initial ς; `None` uses `sigma0`.
    pub varsigma1: Option<f64>,
    /// Maximum γ₃ multiplications per Phase II success.
    pub varsigma_max_growth: usize,
    pub subproblem: SubproblemOptions,
    /// Overrides the analytic Lipschitz bounds.
    pub lipschitz: Option<LipschitzInfo>,
    pub seed: u64,
    /// Evaluate estimating-sequence invariants on every success (20 random
    /// probes of the cubic-growth inequality).
    pub check_invariants: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gamma1: 2.0,
            gamma2: 4.0,
            gamma3: 2.0,
            eta: 0.01,
            sigma_min: 1e-6,
            sigma0: 1.0,
            kappa_theta: 5e-7,
            eps: 1e-9,
            delta: 0.1,
            hessian: HessianMode::Subsampled(SamplingScheme::Uniform),
            max_iters: 500,
            grad_tol: 1e-9,
            varsigma1: None,
            varsigma_max_growth: 200,
            subproblem: SubproblemOptions::default(),
            lipschitz: None,
            seed: 0,
            check_invariants: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.gamma1 > 1.0 && self.gamma2 > self.gamma1 && self.gamma2.is_finite()) {
            return bad(format!("need gamma2 > gamma1 > 1, got {} and {}", self.gamma2, self.gamma1));
        }
        if !(self.gamma3 > 1.0 && self.gamma3.is_finite()) {
            return bad(format!("need gamma3 > 1, got {}", self.gamma3));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad(format!("eta must lie in (0, 1), got {}", self.eta));
        }
        if !(self.sigma_min > 0.0 && self.sigma_min < 1.0) {
            return bad(format!("sigma_min must lie in (0, 1), got {}", self.sigma_min));
        }
        if !(self.sigma0 >= self.sigma_min && self.sigma0.is_finite()) {
            return bad(format!("sigma0 must be >= sigma_min, got {}", self.sigma0));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return bad(format!("eps must lie in (0, 1), got {}", self.eps));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !(self.grad_tol >= 0.0) {
            return bad(format!("grad_tol must be non-negative, got {}", self.grad_tol));
        }
        if let Some(v) = self.varsigma1 {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("varsigma1 must be positive, got {v}"));
            }
        }
        TerminationSpec::saarc(self.kappa_theta)?;
        Ok(())
    }

    pub fn sarc_termination(&self) -> Result<TerminationSpec> {
        TerminationSpec::sarc(self.kappa_theta, self.sigma_min)
    }

    pub fn saarc_termination(&self) -> Result<TerminationSpec> {
        TerminationSpec::saarc(self.kappa_theta)
    }

    /// Exact-Hessian copy of this configuration (the CR / ACR baselines).
    pub fn exact(&self) -> Self {
        Self {
            hessian: HessianMode::Exact,
            ..self.clone()
        }
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    /// `‖∇f‖ ≤ grad_tol`.
    Converged,
    /// Gradient exactly zero at the start.
    Stationary,
    MaxIters,
    /// A first-order baseline hit the divergence guard.
    Diverged,
}

impl RunStatus {
    pub fn reached_tolerance(self) -> bool {
        matches!(self, RunStatus::Converged | RunStatus::Stationary)
    }
}

/// Iteration counts reported by the drivers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub iterations: usize,
    pub successes: usize,
    /// Phase I iterations.
    pub t1: usize,
    /// Phase II iterations.
    pub t2: usize,
    /// ς multiplications.
    pub t3: usize,
    pub varsigma_cap_hits: usize,
    pub psd_violations: usize,
    /// Iteration after which the hybrid handed over to SARC.
    pub switch_iter: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub status: RunStatus,
    pub trace: Trace,
    pub ledger: EpochLedger,
    pub counters: Counters,
}

/// Shared oracle plumbing: charged gradients, uncharged values, Hessian
/// construction for the configured mode.
#[derive(Debug, Clone)]
pub(crate) struct Oracle {
    pub ledger: EpochLedger,
    pub rng: ChaCha8Rng,
    pub lipschitz: LipschitzInfo,
    pub mode: HessianMode,
    pub delta: f64,
    pub eps: f64,
}

impl Oracle {
    pub fn new(model: &LossModel, config: &SolverConfig) -> Self {
        Self {
            ledger: EpochLedger::new(model.n()),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            lipschitz: config.lipschitz.unwrap_or_else(|| model.lipschitz_bounds()),
            mode: config.hessian,
            delta: config.delta,
            eps: config.eps,
        }
    }

    pub fn value_and_gradient(&mut self, model: &LossModel, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let out = model.value_and_gradient(x)?;
        self.ledger.charge_full_gradient();
        Ok(out)
    }

    /// Hessian at `x` for tolerance `eps_i`; `exponent` is the power of the
    /// target ε in the per-iteration failure probability.
    pub fn hessian(
        &mut self,
        model: &LossModel,
        x: &[f64],
        eps_i: f64,
        exponent: f64,
    ) -> Result<SubsampledHessian> {
        let plan = match self.mode {
            HessianMode::Exact => SamplingPlan::exact(model, 0.0),
            HessianMode::Subsampled(scheme) => {
                let delta = per_iteration_delta(self.delta, self.eps, exponent);
                SamplingPlan::resolve(model, &self.lipschitz, x, eps_i, delta, scheme)?
            }
        };
        let h = build_subsampled_hessian(model, x, &plan, &mut self.rng)?;
        self.ledger.charge_hessian(h.hessian_queries());
        Ok(h)
    }
}

pub(crate) fn initial_eps(kappa_theta: f64, grad_norm: f64) -> f64 {
    (1.0f64).min((1.0 - kappa_theta) * grad_norm / 3.0)
}

pub struct SarcState {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub grad_norm: f64,
    pub sigma: f64,
    pub eps_i: f64,
    /// Reused verbatim across unsuccessful iterations.
    pub hessian: Option<SubsampledHessian>,
    pub terminal: bool,
    pub trace: Trace,
    pub counters: Counters,
    pub(crate) oracle: Oracle,
    spec: TerminationSpec,
}

impl SarcState {
    pub fn ledger(&self) -> &EpochLedger {
        &self.oracle.ledger
    }

    fn record(&mut self, success: bool, sample_size: usize, detail: IterationDetail) {
        let rec = TraceRecord {
            iter: self.counters.iterations,
            epochs: self.oracle.ledger.epochs(),
            f: self.f,
            grad_norm: self.grad_norm,
            sigma: self.sigma,
            eps_i: self.eps_i,
            sample_size,
            success,
            phase: Phase::Sarc,
        };
        self.trace.push(rec, detail);
    }

    pub fn into_result(self, status: RunStatus) -> RunResult {
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
}

/// Evaluates `f`, `∇f` at `x0`, sets `ε₀` and builds the first Hessian.
pub fn sarc_init(model: &LossModel, config: &SolverConfig, x0: &[f64]) -> Result<SarcState> {
    config.validate()?;
    model.check_vec(x0)?;
    let spec = config.sarc_termination()?;
    let mut oracle = Oracle::new(model, config);
    let (f, grad) = oracle.value_and_gradient(model, x0)?;
    let grad_norm = norm(&grad);
    let mut state = SarcState {
        x: x0.to_vec(),
        f,
        grad,
        grad_norm,
        sigma: config.sigma0,
        eps_i: initial_eps(config.kappa_theta, grad_norm),
        hessian: None,
        terminal: grad_norm == 0.0,
        trace: Trace::default(),
        counters: Counters::default(),
        oracle,
        spec,
    };
    if !state.terminal {
        let h = state.oracle.hessian(model, x0, state.eps_i, 0.5)?;
        state.hessian = Some(h);
    }
    let size = state.hessian.as_ref().map_or(0, SubsampledHessian::hessian_queries);
    state.record(false, size, IterationDetail::default());
    Ok(state)
}

/// Continues SARC from an iterate whose value and gradient are already
/// known (and paid for). Used by the hybrid after the switch.
pub(crate) fn sarc_resume(
    model: &LossModel,
    config: &SolverConfig,
    x: Vec<f64>,
    f: f64,
    grad: Vec<f64>,
    sigma: f64,
    oracle: Oracle,
    trace: Trace,
    counters: Counters,
) -> Result<SarcState> {
    let spec = config.sarc_termination()?;
    let grad_norm = norm(&grad);
    let _ = model;
    Ok(SarcState {
        x,
        f,
        grad,
        grad_norm,
        sigma: sigma.max(config.sigma_min),
        eps_i: initial_eps(config.kappa_theta, grad_norm),
        hessian: None,
        terminal: grad_norm == 0.0,
        trace,
        counters,
        oracle,
        spec,
    })
}

/// Outcome of one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub success: bool,
    pub ratio: f64,
}

/// Accept/reject rule on actual vs predicted decrease.
pub(crate) fn accept_theta(f: f64, f_trial: f64, predicted: f64, eta: f64) -> (bool, f64, bool, bool) {
    if !f_trial.is_finite() {
        return (false, f64::NEG_INFINITY, false, false);
    }
    if predicted.abs() < 1e-14 * f.abs() {
        return (f_trial <= f, 1.0, true, false);
    }
    if predicted <= 0.0 {
        return (false, f64::NAN, false, true);
    }
    let theta = (f - f_trial) / predicted;
    (theta >= eta, theta, false, false)
}

pub fn sarc_step(state: &mut SarcState, model: &LossModel, config: &SolverConfig) -> Result<StepOutcome> {
    if state.terminal {
        return Err(Error::InvalidConfig("sarc_step called on a terminal state".into()));
    }
    let started = Instant::now();
    let needs_rebuild = state
        .hessian
        .as_ref()
        .is_none_or(|h| h.base_point() != state.x.as_slice());
    if needs_rebuild {
        let h = state.oracle.hessian(model, &state.x, state.eps_i, 0.5)?;
        state.hessian = Some(h);
    }
    let h = state.hessian.as_ref().expect("hessian present");
    let cubic = CubicModel::new(&state.grad, h, state.sigma, state.f)?;
    let sol = minimize_model(&cubic, &state.spec, state.grad_norm, &config.subproblem)?;
    state.oracle.ledger.record_hvps(sol.hvps);
    let sample_size = h.hessian_queries();
    let scheme = h.scheme();

    let trial = add(&state.x, &sol.step);
    let f_trial = model.full_value(&trial)?;
    let (success, ratio, noise_guard, psd_violation) =
        accept_theta(state.f, f_trial, sol.model_decrease, config.eta);

    state.counters.iterations += 1;
    if psd_violation {
        state.counters.psd_violations += 1;
    }
    if success {
        let (f, grad) = state.oracle.value_and_gradient(model, &trial)?;
        state.x = trial;
        state.f = f;
        state.grad_norm = norm(&grad);
        state.grad = grad;
        state.eps_i = state
            .eps_i
            .min((1.0 - config.kappa_theta) * state.grad_norm / 3.0);
        state.sigma = config.sigma_min.max(state.sigma / config.gamma1);
        state.counters.successes += 1;
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
        ratio,
        psd_violation,
        noise_guard,
        subproblem_unsatisfied: !sol.satisfied,
        scheme: Some(scheme),
        ..IterationDetail::default()
    };
    state.record(success, sample_size, detail);
    Ok(StepOutcome { success, ratio })
}

pub(crate) fn drive_sarc(mut state: SarcState, model: &LossModel, config: &SolverConfig) -> Result<RunResult> {
    loop {
        if state.grad_norm == 0.0 && state.counters.iterations == 0 {
            return Ok(state.into_result(RunStatus::Stationary));
        }
        if state.grad_norm <= config.grad_tol || state.terminal {
            return Ok(state.into_result(RunStatus::Converged));
        }
        if state.counters.iterations >= config.max_iters {
            return Ok(state.into_result(RunStatus::MaxIters));
        }
        sarc_step(&mut state, model, config)?;
    }
}

/// Runs SARC until `‖∇f‖ ≤ grad_tol` or `max_iters`.
pub fn sarc_run(model: &LossModel, config: &SolverConfig, x0: &[f64]) -> Result<RunResult> {
    let state = sarc_init(model, config, x0)?;
    drive_sarc(state, model, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Dataset, LossFamily};
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn half_square() -> LossModel {
        // f(x) = (x·1 − 0)² · ½ via ridge-free least squares with a = 1/√2
        let a = 0.5f64.sqrt();
        let data = Dataset::from_dense(&[vec![a]], vec![0.0]).unwrap();
        LossModel::new(LossFamily::RidgeLeastSquares, Arc::new(data), 0.0).unwrap()
    }

    #[test]
    fn epsilon_zero_examples() {
        assert_relative_eq!(initial_eps(0.25, 12.0), 1.0);
        assert_relative_eq!(initial_eps(0.25, 0.4), 0.1, epsilon = 1e-15);
    }

    #[test]
    fn golden_ratio_iteration() {
        let model = half_square();
        let config = SolverConfig {
            hessian: HessianMode::Exact,
            sigma0: 1.0,
            sigma_min: 0.05,
            kappa_theta: 0.03,
            ..SolverConfig::default()
        };
        let mut state = sarc_init(&model, &config, &[1.0]).unwrap();
        assert_relative_eq!(state.f, 0.5, epsilon = 1e-15);
        let out = sarc_step(&mut state, &model, &config).unwrap();
        let s = (1.0 - 5f64.sqrt()) / 2.0;
        assert!(out.success);
        assert_relative_eq!(out.ratio, 1.225_88, epsilon = 1e-5);
        assert_relative_eq!(state.x[0], 1.0 + s, epsilon = 1e-10);
        assert_relative_eq!(state.f, 0.5 * (1.0 + s) * (1.0 + s), epsilon = 1e-10);
        assert_relative_eq!(state.sigma, 0.5);
    }

    #[test]
    fn failure_keeps_iterate_and_hessian() {
        // far on the wrong side of a 1-D logistic loss the model is nearly
        // linear, and a tiny σ overshoots into the flat region
        let data = Dataset::from_dense(&[vec![1.0]], vec![1.0]).unwrap();
        let model = LossModel::new(LossFamily::RegLogistic, Arc::new(data), 0.0).unwrap();
        let config = SolverConfig {
            hessian: HessianMode::Exact,
            sigma_min: 0.001,
            sigma0: 0.001,
            kappa_theta: 0.0005,
            eta: 0.5,
            ..SolverConfig::default()
        };
        let mut state = sarc_init(&model, &config, &[-5.0]).unwrap();
        let before = state.ledger().epochs();
        let x = state.x.clone();
        let out = sarc_step(&mut state, &model, &config).unwrap();
        assert!(!out.success);
        assert_eq!(state.x, x);
        assert_relative_eq!(state.sigma, 0.002);
        assert_eq!(state.ledger().epochs(), before);
        let out2 = sarc_step(&mut state, &model, &config).unwrap();
        if !out2.success {
            assert_eq!(state.ledger().epochs(), before);
        }
    }

    #[test]
    fn stationary_start_takes_no_iterations() {
        let model = half_square();
        let r = sarc_run(&model, &SolverConfig::default(), &[0.0]).unwrap();
        assert_eq!(r.status, RunStatus::Stationary);
        assert_eq!(r.counters.iterations, 0);
        assert_eq!(r.trace.len(), 1);
    }

    #[test]
    fn theta_rule_branches() {
        assert_eq!(accept_theta(1.0, 0.5, 0.5, 0.1), (true, 1.0, false, false));
        let (ok, _, guard, _) = accept_theta(1.0, 1.0, 1e-20, 0.1);
        assert!(ok && guard);
        let (ok, _, _, psd) = accept_theta(1.0, 0.9, -0.1, 0.1);
        assert!(!ok && psd);
        assert!(!accept_theta(1.0, f64::NAN, 0.1, 0.1).0);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = [
            SolverConfig { gamma1: 1.0, ..Default::default() },
            SolverConfig { gamma2: 1.5, ..Default::default() },
            SolverConfig { gamma3: 1.0, ..Default::default() },
            SolverConfig { eta: 1.0, ..Default::default() },
            SolverConfig { sigma_min: 1.0, ..Default::default() },
            SolverConfig { sigma0: 1e-7, ..Default::default() },
            SolverConfig { eps: 1.0, ..Default::default() },
            SolverConfig { delta: 0.0, ..Default::default() },
            SolverConfig { kappa_theta: 0.5, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
        let c = SolverConfig { kappa_theta: 0.1, ..Default::default() };
        assert!(c.sarc_termination().is_err());
        assert!(c.saarc_termination().is_ok());
    }
}
