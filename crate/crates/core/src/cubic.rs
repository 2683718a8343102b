//! Approximate minimization of the cubic model
//!
//! ```text
//! m(s) = f0 + gᵀs + ½ sᵀHs + (σ/3)‖s‖³
//! ```
//!
//! over a growing Krylov subspace `span{g, Hg, H²g, …}`. Each Lanczos step
//! adds one basis vector; the projected problem is tridiagonal and is solved
//! exactly through its secular equation, so the lifted step is optimal over
//! the current subspace. Growth stops at the first step meeting the
//! requested termination rule.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, SymmetricOperator};

/// Symmetric tridiagonal matrix: `diag` has length `k`, `off` length `k − 1`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len().max(1), "off-diagonal length must be k - 1");
        Self { diag, off }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        let k = self.dim();
        (0..k)
            .map(|i| {
                let left = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
                let right = if i + 1 < k { self.off[i].abs() } else { 0.0 };
                self.diag[i].abs() + left + right
            })
            .fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, y: &[f64]) -> Vec<f64> {
        let k = self.dim();
        (0..k)
            .map(|i| {
                let mut v = self.diag[i] * y[i];
                if i > 0 {
                    v += self.off[i - 1] * y[i - 1];
                }
                if i + 1 < k {
                    v += self.off[i] * y[i + 1];
                }
                v
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let k = self.dim();
        DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                self.diag[i]
            } else if i + 1 == j {
                self.off[i]
            } else if j + 1 == i {
                self.off[j]
            } else {
                0.0
            }
        })
    }

    /// Number of eigenvalues strictly below `mu` (Sturm count via LDLᵀ pivots).
    fn count_below(&self, mu: f64) -> usize {
        let mut count = 0;
        let mut pivot = 1.0;
        for i in 0..self.dim() {
            let coupling = if i > 0 {
                self.off[i - 1] * self.off[i - 1] / pivot
            } else {
                0.0
            };
            pivot = self.diag[i] - mu - coupling;
            if pivot == 0.0 {
                pivot = -f64::EPSILON * (self.diag[i].abs() + mu.abs() + f64::MIN_POSITIVE);
            }
            if pivot < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Smallest eigenvalue by bisection on the Sturm count.
    pub fn min_eigenvalue(&self) -> f64 {
        let r = self.norm_bound();
        let (mut lo, mut hi) = (-r - 1.0, r + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) >= 1 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// LDLᵀ of `T + λI`; `None` unless every pivot is positive.
    fn factor(&self, lambda: f64) -> Option<Ldl> {
        let k = self.dim();
        let mut d = Vec::with_capacity(k);
        let mut l = Vec::with_capacity(k.saturating_sub(1));
        for i in 0..k {
            let pivot = if i == 0 {
                self.diag[0] + lambda
            } else {
                self.diag[i] + lambda - l[i - 1] * self.off[i - 1]
            };
            if !(pivot > 0.0 && pivot.is_finite()) {
                return None;
            }
            d.push(pivot);
            if i + 1 < k {
                l.push(self.off[i] / pivot);
            }
        }
        Some(Ldl { d, l })
    }
}

struct Ldl {
    d: Vec<f64>,
    l: Vec<f64>,
}

impl Ldl {
    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let k = self.d.len();
        let mut z = rhs.to_vec();
        for i in 1..k {
            z[i] -= self.l[i - 1] * z[i - 1];
        }
        for i in 0..k {
            z[i] /= self.d[i];
        }
        for i in (0..k.saturating_sub(1)).rev() {
            z[i] -= self.l[i] * z[i + 1];
        }
        z
    }
}

/// Value of the reduced model `gnorm·y₁ + ½yᵀTy + (σ/3)‖y‖³`.
pub fn tridiagonal_model_value(t: &Tridiagonal, gnorm: f64, sigma: f64, y: &[f64]) -> f64 {
    let ny = norm(y);
    gnorm * y[0] + 0.5 * dot(y, &t.mul_vec(y)) + sigma / 3.0 * ny * ny * ny
}

/// Global minimizer of `gnorm·e₁ᵀy + ½yᵀTy + (σ/3)‖y‖³`.
///
/// Solves `(T + λI) y = −gnorm·e₁` with `λ = σ‖y‖` and
/// `λ ≥ max(0, −λ_min(T))` by safeguarded Newton iteration on
/// `1/‖y(λ)‖ − σ/λ`. When `e₁` is (numerically) orthogonal to the bottom
/// eigenspace the root sits on the boundary `λ = −λ_min` and the solution
/// is completed with a bottom eigenvector.
pub fn solve_tridiagonal_cubic(t: &Tridiagonal, gnorm: f64, sigma: f64) -> Result<Vec<f64>> {
    let k = t.dim();
    if k == 0 {
        return Ok(Vec::new());
    }
    if !(sigma > 0.0) || !(gnorm >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "cubic solve needs sigma > 0 and gnorm >= 0 (sigma = {sigma}, gnorm = {gnorm})"
        )));
    }
    let lmin = t.min_eigenvalue();
    let lo = (-lmin).max(0.0);
    if gnorm == 0.0 {
        if lmin >= 0.0 {
            return Ok(vec![0.0; k]);
        }
        return Ok(hard_case(t, gnorm, sigma, lo));
    }
    if gnorm != 1.0 {
        // y = ‖g‖ŷ where ŷ minimizes the same model with unit gradient and
        // σ‖g‖; keeps the iteration at unit scale for tiny gradients
        let scaled = sigma * gnorm;
        if scaled > 0.0 && scaled.is_finite() {
            let y = solve_tridiagonal_cubic(t, 1.0, scaled)?;
            return Ok(y.into_iter().map(|v| v * gnorm).collect());
        }
    }

    let mut rhs = vec![0.0; k];
    rhs[0] = -gnorm;
    let solve_at = |lambda: f64| t.factor(lambda).map(|f| (f.solve(&rhs), f));

    // residual of the secular equation ‖y(λ)‖ − λ/σ
    let mut a = lo;
    let mut b = t.norm_bound() + (sigma * gnorm).sqrt() + lo;
    let mut b_checked = false;
    while !b_checked {
        match solve_at(b) {
            Some((y, _)) if norm(&y) <= b / sigma => b_checked = true,
            _ => {
                a = b;
                b *= 2.0;
                if !b.is_finite() {
                    return Err(Error::BracketFailure { lo: a, hi: b });
                }
            }
        }
    }

    // ‖y(λ)‖ ≥ ‖g‖/(‖T‖ + λ), so the root lies above σ‖g‖/(‖T‖ + b)
    let floor = sigma * gnorm / (t.norm_bound() + b);
    if floor > a && floor < b {
        a = floor;
    }

    if lo > 0.0 {
        let probe = lo + lo.max(1.0) * 1e-12;
        if let Some((y, _)) = solve_at(probe) {
            if norm(&y) <= probe / sigma {
                return Ok(hard_case(t, gnorm, sigma, lo));
            }
        }
    }

    let mut lambda = b;
    for _ in 0..500 {
        let Some((y, f)) = solve_at(lambda) else {
            a = a.max(lambda);
            lambda = midpoint(a, b);
            continue;
        };
        let ny = norm(&y);
        let phi = ny - lambda / sigma;
        if phi.abs() <= 4.0 * f64::EPSILON * ny.max(lambda / sigma) || (b - a) <= f64::EPSILON * b {
            return Ok(y);
        }
        if phi > 0.0 {
            a = lambda;
        } else {
            b = lambda;
        }
        let z = f.solve(&y);
        let psi = 1.0 / ny - sigma / lambda;
        // divided step by step so tiny gradients do not underflow
        let dpsi = dot(&y, &z) / ny / ny / ny + sigma / lambda / lambda;
        let newton = lambda - psi / dpsi;
        lambda = if newton > a && newton < b && newton != lambda && newton.is_finite() {
            newton
        } else {
            midpoint(a, b)
        };
    }
    Err(Error::BracketFailure { lo: a, hi: b })
}

/// Bisection point; geometric when the bracket spans orders of magnitude.
fn midpoint(a: f64, b: f64) -> f64 {
    if a > 0.0 && b > 4.0 * a {
        (a * b).sqrt()
    } else {
        0.5 * (a + b)
    }
}

/// Boundary solution `λ = −λ_min`: the component outside the bottom
/// eigenspace plus a bottom eigenvector scaled so that `‖y‖ = λ/σ`.
fn hard_case(t: &Tridiagonal, gnorm: f64, sigma: f64, lambda: f64) -> Vec<f64> {
    let k = t.dim();
    let eig = SymmetricEigen::new(t.to_dense());
    let scale = t.norm_bound().max(1.0);
    let tol = 1e-10 * scale;
    let lmin = eig.eigenvalues.min();
    let mut y = vec![0.0; k];
    let mut bottom: Option<usize> = None;
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        let q = eig.eigenvectors.column(i);
        if ev - lmin <= tol {
            bottom.get_or_insert(i);
            continue;
        }
        let coeff = -gnorm * q[0] / (ev + lambda);
        for (yj, qj) in y.iter_mut().zip(q.iter()) {
            *yj += coeff * qj;
        }
    }
    let target = lambda / sigma;
    let tau = (target * target - dot(&y, &y)).max(0.0).sqrt();
    let Some(u) = bottom else { return y };
    let u: Vec<f64> = eig.eigenvectors.column(u).iter().copied().collect();
    let mut plus = y.clone();
    axpy(tau, &u, &mut plus);
    let mut minus = y;
    axpy(-tau, &u, &mut minus);
    if tridiagonal_model_value(t, gnorm, sigma, &plus) <= tridiagonal_model_value(t, gnorm, sigma, &minus) {
        plus
    } else {
        minus
    }
}

/// `m(s) = f0 + gᵀs + ½sᵀHs + (σ/3)‖s‖³`.
#[derive(Debug, Clone, Copy)]
pub struct CubicModel<'a, H: SymmetricOperator> {
    pub g: &'a [f64],
    pub h: &'a H,
    pub sigma: f64,
    pub f0: f64,
}

impl<'a, H: SymmetricOperator> CubicModel<'a, H> {
    pub fn new(g: &'a [f64], h: &'a H, sigma: f64, f0: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma must be positive, got {sigma}")));
        }
        if g.len() != h.dim() {
            return Err(Error::DimensionMismatch {
                expected: h.dim(),
                got: g.len(),
            });
        }
        if !g.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { g, h, sigma, f0 })
    }

    pub fn value(&self, s: &[f64]) -> f64 {
        let hs = self.h.apply(s);
        self.value_with(s, &hs)
    }

    /// Model value given a precomputed `Hs`.
    pub fn value_with(&self, s: &[f64], hs: &[f64]) -> f64 {
        let ns = norm(s);
        self.f0 + dot(self.g, s) + 0.5 * dot(s, hs) + self.sigma / 3.0 * ns * ns * ns
    }

    /// `∇m(s) = g + Hs + σ‖s‖s`.
    pub fn gradient(&self, s: &[f64]) -> Vec<f64> {
        let hs = self.h.apply(s);
        self.gradient_with(s, &hs)
    }

    pub fn gradient_with(&self, s: &[f64], hs: &[f64]) -> Vec<f64> {
        let ns = norm(s);
        let mut out = self.g.to_vec();
        axpy(1.0, hs, &mut out);
        axpy(self.sigma * ns, s, &mut out);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationKind {
    /// `‖∇m‖ ≤ κ·min(‖∇f‖, ‖∇f‖³, ‖s‖²)` plus subspace optimality.
    Condition31,
    /// `‖∇m‖ ≤ κ·min(1, ‖s‖)·min(‖s‖, ‖∇f‖)`.
    Condition41,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminationSpec {
    pub kind: TerminationKind,
    pub kappa_theta: f64,
}

impl TerminationSpec {
    /// Rule for the non-accelerated method; `κ` must satisfy
    /// `0 < κ < min(1/2, 2σ_min/3)`.
    pub fn sarc(kappa_theta: f64, sigma_min: f64) -> Result<Self> {
        let cap = (2.0 * sigma_min / 3.0).min(0.5);
        if !(kappa_theta > 0.0 && kappa_theta < cap) {
            return Err(Error::InvalidConfig(format!(
                "kappa_theta must lie in (0, min(1/2, 2 sigma_min / 3)) = (0, {cap}), got {kappa_theta}"
            )));
        }
        Ok(Self {
            kind: TerminationKind::Condition31,
            kappa_theta,
        })
    }

    /// Rule for the accelerated method; `κ ∈ (0, 1/2)`.
    pub fn saarc(kappa_theta: f64) -> Result<Self> {
        if !(kappa_theta > 0.0 && kappa_theta < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "kappa_theta must lie in (0, 1/2), got {kappa_theta}"
            )));
        }
        Ok(Self {
            kind: TerminationKind::Condition41,
            kappa_theta,
        })
    }

    /// Right-hand side of the rule for a step of norm `step_norm`.
    pub fn threshold(&self, grad_f_norm: f64, step_norm: f64) -> f64 {
        let k = self.kappa_theta;
        match self.kind {
            TerminationKind::Condition31 => {
                k * grad_f_norm
                    .min(grad_f_norm.powi(3))
                    .min(step_norm * step_norm)
            }
            TerminationKind::Condition41 => {
                k * step_norm.min(1.0) * step_norm.min(grad_f_norm)
            }
        }
    }

    pub fn is_met(&self, model_grad_norm: f64, grad_f_norm: f64, step_norm: f64) -> bool {
        model_grad_norm <= self.threshold(grad_f_norm, step_norm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reorthogonalization {
    /// Two classical Gram–Schmidt passes against the whole basis per step.
    #[default]
    Twice,
    /// A single pass; cheaper for large `d`.
    Once,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubproblemBackend {
    Lanczos(Reorthogonalization),
    /// Plain gradient descent on `m`; only meets Condition 4.1 (no subspace
    /// optimality).
    GradientDescent { max_iters: usize },
}

impl Default for SubproblemBackend {
    fn default() -> Self {
        Self::Lanczos(Reorthogonalization::Twice)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SubproblemOptions {
    /// Krylov dimension cap; `None` means `d`.
    pub max_dim: Option<usize>,
    pub backend: SubproblemBackend,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubicSolution {
    pub step: Vec<f64>,
    /// `H s`, reused by callers for the model value.
    pub hs: Vec<f64>,
    /// `f0 − m(s)`.
    pub model_decrease: f64,
    pub model_grad_norm: f64,
    /// Krylov dimension reached (iterations for gradient descent).
    pub dim: usize,
    pub hvps: usize,
    /// Whether the termination rule holds at the returned step.
    pub satisfied: bool,
    /// The Krylov space became invariant before the rule was met.
    pub breakdown: bool,
    /// Dimension cap hit before the rule was met.
    pub exhausted: bool,
}

/// Lanczos basis and projected tridiagonal.
#[derive(Debug, Clone)]
pub struct KrylovState {
    pub basis: Vec<Vec<f64>>,
    pub t: Tridiagonal,
    /// `β_k` of the last step, coupling to the next basis vector.
    pub next_beta: f64,
    next: Option<Vec<f64>>,
}

impl KrylovState {
    pub fn start(g: &[f64]) -> Self {
        let gn = norm(g);
        let q: Vec<f64> = g.iter().map(|v| v / gn).collect();
        Self {
            basis: Vec::new(),
            t: Tridiagonal::default(),
            next_beta: gn,
            next: Some(q),
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// One Lanczos step (one operator application). Returns `false` when the
    /// space is already invariant.
    pub fn grow<H: SymmetricOperator>(&mut self, h: &H, reorth: Reorthogonalization) -> bool {
        let Some(q) = self.next.take() else { return false };
        let mut w = h.apply(&q);
        let alpha = dot(&q, &w);
        axpy(-alpha, &q, &mut w);
        if let Some(prev) = self.basis.last() {
            axpy(-self.next_beta, prev, &mut w);
            self.t.off.push(self.next_beta);
        }
        self.t.diag.push(alpha);
        self.basis.push(q);
        let passes = match reorth {
            Reorthogonalization::Twice => 2,
            Reorthogonalization::Once => 1,
        };
        for _ in 0..passes {
            for b in &self.basis {
                let c = dot(b, &w);
                axpy(-c, b, &mut w);
            }
        }
        let beta = norm(&w);
        let scale = self.t.norm_bound().max(f64::MIN_POSITIVE);
        self.next_beta = beta;
        if beta > 1e-13 * scale {
            self.next = Some(w.into_iter().map(|v| v / beta).collect());
        }
        true
    }

    pub fn is_invariant(&self) -> bool {
        self.next.is_none()
    }

    /// `Q y`
    pub fn lift(&self, y: &[f64]) -> Vec<f64> {
        let d = self.basis.first().map_or(0, Vec::len);
        let mut s = vec![0.0; d];
        for (q, &c) in self.basis.iter().zip(y) {
            axpy(c, q, &mut s);
        }
        s
    }

    /// Largest entry of `|QᵀQ − I|`.
    pub fn orthogonality_loss(&self) -> f64 {
        let k = self.basis.len();
        let mut worst = 0.0f64;
        for i in 0..k {
            for j in 0..=i {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(&self.basis[i], &self.basis[j]) - target).abs());
            }
        }
        worst
    }
}

/// Minimizes the cubic model until `spec` holds at the returned step.
///
/// `grad_f_norm` is `‖∇f‖` at the point the model is built at (usually
/// `‖g‖`). A zero gradient returns `s = 0`.
pub fn minimize_model<H: SymmetricOperator>(
    model: &CubicModel<'_, H>,
    spec: &TerminationSpec,
    grad_f_norm: f64,
    opts: &SubproblemOptions,
) -> Result<CubicSolution> {
    let d = model.h.dim();
    let gnorm = norm(model.g);
    if gnorm == 0.0 {
        return Ok(CubicSolution {
            step: vec![0.0; d],
            hs: vec![0.0; d],
            model_decrease: 0.0,
            model_grad_norm: 0.0,
            dim: 0,
            hvps: 0,
            satisfied: true,
            breakdown: false,
            exhausted: false,
        });
    }
    let max_dim = opts.max_dim.unwrap_or(d).clamp(1, d);
    match opts.backend {
        SubproblemBackend::Lanczos(reorth) => lanczos_solve(model, spec, grad_f_norm, max_dim, reorth),
        SubproblemBackend::GradientDescent { max_iters } => {
            if spec.kind == TerminationKind::Condition31 {
                return Err(Error::InvalidConfig(
                    "gradient-descent subproblem backend cannot certify subspace optimality".into(),
                ));
            }
            gradient_descent_solve(model, spec, grad_f_norm, max_iters)
        }
    }
}

fn lanczos_solve<H: SymmetricOperator>(
    model: &CubicModel<'_, H>,
    spec: &TerminationSpec,
    grad_f_norm: f64,
    max_dim: usize,
    reorth: Reorthogonalization,
) -> Result<CubicSolution> {
    let gnorm = norm(model.g);
    let mut krylov = KrylovState::start(model.g);
    let mut hvps = 0;
    loop {
        if !krylov.grow(model.h, reorth) {
            unreachable!("grow is only called on a non-invariant space");
        }
        hvps += 1;
        let y = solve_tridiagonal_cubic(&krylov.t, gnorm, model.sigma)?;
        let step = krylov.lift(&y);
        let hs = model.h.apply(&step);
        hvps += 1;
        let grad = model.gradient_with(&step, &hs);
        let model_grad_norm = norm(&grad);
        let step_norm = norm(&step);
        let satisfied = spec.is_met(model_grad_norm, grad_f_norm, step_norm);
        let breakdown = krylov.is_invariant();
        let exhausted = krylov.dim() >= max_dim;
        if satisfied || breakdown || exhausted {
            let model_decrease = model.f0 - model.value_with(&step, &hs);
            return Ok(CubicSolution {
                step,
                hs,
                model_decrease,
                model_grad_norm,
                dim: krylov.dim(),
                hvps,
                satisfied,
                breakdown: breakdown && !satisfied,
                exhausted: exhausted && !satisfied && !breakdown,
            });
        }
    }
}

fn gradient_descent_solve<H: SymmetricOperator>(
    model: &CubicModel<'_, H>,
    spec: &TerminationSpec,
    grad_f_norm: f64,
    max_iters: usize,
) -> Result<CubicSolution> {
    let d = model.h.dim();
    let gnorm = norm(model.g);
    let sigma = model.sigma;
    let mut hvps = 0;

    // ‖H‖ by power iteration
    let mut v: Vec<f64> = model.g.iter().map(|x| x / gnorm).collect();
    let mut beta = 0.0;
    for _ in 0..30 {
        let hv = model.h.apply(&v);
        hvps += 1;
        beta = norm(&hv);
        if beta == 0.0 {
            break;
        }
        v = hv.into_iter().map(|x| x / beta).collect();
    }
    // ‖s*‖ ≤ radius for the global minimizer
    let half = beta / (2.0 * sigma);
    let radius = half + (half * half + gnorm / sigma).sqrt();
    let step_size = 1.0 / (beta + 2.0 * sigma * radius);

    let mut s = vec![0.0; d];
    let mut hs = vec![0.0; d];
    let mut iters = 0;
    loop {
        let grad = model.gradient_with(&s, &hs);
        let model_grad_norm = norm(&grad);
        let satisfied = spec.is_met(model_grad_norm, grad_f_norm, norm(&s));
        if satisfied || iters >= max_iters {
            return Ok(CubicSolution {
                model_decrease: model.f0 - model.value_with(&s, &hs),
                step: s,
                hs,
                model_grad_norm,
                dim: iters,
                hvps,
                satisfied,
                breakdown: false,
                exhausted: !satisfied,
            });
        }
        axpy(-step_size, &grad, &mut s);
        hs = model.h.apply(&s);
        hvps += 1;
        iters += 1;
    }
}
