//! Sample-size rules and the sub-sampled Hessian operator.
//!
//! The operator is
//!
//! ```text
//! H(x) = (1 / (n|S|)) Σ_{j∈S} (1/p_j) ∇²f_j(x) + (ε_i/2) I
//! ```
//!
//! with `S` drawn i.i.d. with replacement from `p` (uniform, or proportional
//! to `|φ_j''(a_jᵀx)|‖a_j‖²`). Component Hessians only enter through
//! products; a dense matrix exists only for the spectral-error check.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::SymmetricOperator;
use crate::problem::{Dataset, LipschitzInfo, LossModel};

/// Largest dimension for which dense reference matrices are built.
pub const DEFAULT_DENSE_CAP: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SamplingScheme {
    #[default]
    Uniform,
    Nonuniform,
}

impl SamplingScheme {
    pub fn name(self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::Nonuniform => "nonuniform",
        }
    }
}

impl fmt::Display for SamplingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplingScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "nonuniform" | "non-uniform" => Ok(Self::Nonuniform),
            other => Err(Error::InvalidConfig(format!("unknown sampling scheme `{other}`"))),
        }
    }
}

/// Failure probability handed to the log factor of one Hessian build:
/// `log(2d ε^{-exponent} / δ) = log(2d / (δ ε^{exponent}))`.
pub fn per_iteration_delta(delta: f64, target_eps: f64, exponent: f64) -> f64 {
    delta * target_eps.powf(exponent)
}

/// Real-valued uniform-sampling bound
/// `max{16L²/ε², 4L/ε} · log(2d/δ)`.
pub fn uniform_bound(eps: f64, per_iter_delta: f64, l: f64, d: usize) -> f64 {
    let branch = (16.0 * l * l / (eps * eps)).max(4.0 * l / eps);
    branch * (2.0 * d as f64 / per_iter_delta).ln()
}

/// Real-valued non-uniform bound
/// `max{4L̄²/ε², (2L/ε)(n + 1/p_min − 2)/n} · log(2d/δ)`.
pub fn nonuniform_bound(
    eps: f64,
    per_iter_delta: f64,
    l: f64,
    lbar: f64,
    p_min: f64,
    d: usize,
    n: usize,
) -> f64 {
    let nf = n as f64;
    let first = 4.0 * lbar * lbar / (eps * eps);
    let second = (2.0 * l / eps) * (nf + 1.0 / p_min - 2.0) / nf;
    first.max(second) * (2.0 * d as f64 / per_iter_delta).ln()
}

fn resolve_size(bound: f64, n: usize) -> usize {
    if !(bound < n as f64) {
        n
    } else {
        (bound.ceil() as usize).clamp(1, n)
    }
}

fn check_unit_interval(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1), got {v}")));
    }
    Ok(())
}

/// Uniform sample size, capped at `n`.
pub fn sample_size_uniform(
    eps: f64,
    per_iter_delta: f64,
    l: f64,
    d: usize,
    n: usize,
) -> Result<usize> {
    check_unit_interval("per-iteration delta", per_iter_delta)?;
    if !(eps > 0.0 && l > 0.0 && d > 0 && n > 0) {
        return Err(Error::InvalidConfig(format!(
            "sample size needs eps, L, d, n > 0 (eps = {eps}, L = {l}, d = {d}, n = {n})"
        )));
    }
    Ok(resolve_size(uniform_bound(eps, per_iter_delta, l, d), n))
}

/// Non-uniform sample size, capped at `n`. `p_min == 0` means the support is
/// empty and the caller should fall back to uniform sampling.
pub fn sample_size_nonuniform(
    eps: f64,
    per_iter_delta: f64,
    l: f64,
    lbar: f64,
    p_min: f64,
    d: usize,
    n: usize,
) -> Result<usize> {
    if p_min == 0.0 {
        return Err(Error::DegenerateCurvature);
    }
    if !(p_min > 0.0 && p_min <= 1.0) {
        return Err(Error::InvalidConfig(format!("p_min must lie in (0, 1], got {p_min}")));
    }
    if !(lbar > 0.0 && lbar <= l) {
        return Err(Error::InvalidConfig(format!(
            "need 0 < Lbar <= L, got L = {l}, Lbar = {lbar}"
        )));
    }
    check_unit_interval("per-iteration delta", per_iter_delta)?;
    if !(eps > 0.0 && d > 0 && n > 0) {
        return Err(Error::InvalidConfig("sample size needs eps, d, n > 0".into()));
    }
    Ok(resolve_size(
        nonuniform_bound(eps, per_iter_delta, l, lbar, p_min, d, n),
        n,
    ))
}

/// Importance distribution over components at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureDistribution {
    pub probabilities: Vec<f64>,
    /// Smallest nonzero probability.
    pub p_min: f64,
    /// Number of components with nonzero probability.
    pub support: usize,
}

/// `p_j ∝ |φ_j''(a_jᵀx)| ‖a_j‖²`.
pub fn nonuniform_distribution(model: &LossModel, x: &[f64]) -> Result<CurvatureDistribution> {
    if !model.family().is_separable() {
        return Err(Error::NotSeparable(model.family().name()));
    }
    model.check_vec(x)?;
    let data = model.dataset();
    let weights: Vec<f64> = (0..model.n())
        .map(|j| model.rank_one_curvature(j, x).abs() * data.row(j).norm_sq())
        .collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateCurvature);
    }
    let probabilities: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let positive = probabilities.iter().copied().filter(|&p| p > 0.0);
    let support = positive.clone().count();
    let p_min = positive.fold(f64::INFINITY, f64::min);
    Ok(CurvatureDistribution {
        probabilities,
        p_min,
        support,
    })
}

/// Everything needed to draw one sub-sampled Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    /// Scheme the caller asked for.
    pub requested: SamplingScheme,
    /// Scheme actually used for the draw (the smaller resolved size wins).
    pub scheme: SamplingScheme,
    /// Hessian tolerance `ε_i`; the formulas use `ε_i/2` as their accuracy.
    pub eps_i: f64,
    pub per_iter_delta: f64,
    /// Resolved `|S|`, capped at `n`.
    pub size: usize,
    /// True when `|S| = n`: every component is used once with weight `1/n`.
    pub exact: bool,
    /// Diagonal shift added to the sampled operator.
    pub shift: f64,
    pub probabilities: Option<Vec<f64>>,
    pub p_min: Option<f64>,
    pub uniform_size: usize,
    pub nonuniform_size: Option<usize>,
}

impl SamplingPlan {
    /// Resolves sizes at `x` with accuracy `ε_i/2` and shift `ε_i/2`.
    pub fn resolve(
        model: &LossModel,
        lipschitz: &LipschitzInfo,
        x: &[f64],
        eps_i: f64,
        per_iter_delta: f64,
        requested: SamplingScheme,
    ) -> Result<Self> {
        if !(eps_i > 0.0 && eps_i.is_finite()) {
            return Err(Error::InvalidConfig(format!("eps_i must be positive, got {eps_i}")));
        }
        let (n, d) = (model.n(), model.d());
        let accuracy = eps_i / 2.0;
        let uniform_size = sample_size_uniform(accuracy, per_iter_delta, lipschitz.l, d, n)?;
        let mut plan = Self {
            requested,
            scheme: SamplingScheme::Uniform,
            eps_i,
            per_iter_delta,
            size: uniform_size,
            exact: uniform_size >= n,
            shift: eps_i / 2.0,
            probabilities: None,
            p_min: None,
            uniform_size,
            nonuniform_size: None,
        };
        if requested == SamplingScheme::Nonuniform && model.family().is_separable() {
            match nonuniform_distribution(model, x) {
                Ok(dist) => {
                    let size = sample_size_nonuniform(
                        accuracy,
                        per_iter_delta,
                        lipschitz.l,
                        lipschitz.lbar.min(lipschitz.l),
                        dist.p_min,
                        d,
                        n,
                    )?;
                    plan.nonuniform_size = Some(size);
                    plan.p_min = Some(dist.p_min);
                    if size < uniform_size {
                        plan.scheme = SamplingScheme::Nonuniform;
                        plan.size = size;
                        plan.exact = size >= n;
                        plan.probabilities = Some(dist.probabilities);
                    }
                }
                Err(Error::DegenerateCurvature) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(plan)
    }

    /// Every component once, with the given shift (zero for plain CR/ACR).
    pub fn exact(model: &LossModel, shift: f64) -> Self {
        Self {
            requested: SamplingScheme::Uniform,
            scheme: SamplingScheme::Uniform,
            eps_i: 2.0 * shift,
            per_iter_delta: 0.0,
            size: model.n(),
            exact: true,
            shift,
            probabilities: None,
            p_min: None,
            uniform_size: model.n(),
            nonuniform_size: None,
        }
    }

    /// Plan with a fixed size and explicit distribution; used by experiments
    /// that pin `|S|` instead of deriving it.
    pub fn fixed(
        model: &LossModel,
        size: usize,
        shift: f64,
        probabilities: Option<Vec<f64>>,
    ) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidConfig("sample size must be at least 1".into()));
        }
        if let Some(p) = &probabilities {
            if p.len() != model.n() {
                return Err(Error::DimensionMismatch {
                    expected: model.n(),
                    got: p.len(),
                });
            }
        }
        let scheme = if probabilities.is_some() {
            SamplingScheme::Nonuniform
        } else {
            SamplingScheme::Uniform
        };
        let p_min = probabilities
            .as_ref()
            .map(|p| p.iter().copied().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min));
        Ok(Self {
            requested: scheme,
            scheme,
            eps_i: 2.0 * shift,
            per_iter_delta: 0.0,
            size,
            exact: false,
            shift,
            probabilities,
            p_min,
            uniform_size: size,
            nonuniform_size: None,
        })
    }
}

/// `v ↦ Σ_j c_j (a_jᵀv) a_j + diag · v` over the distinct sampled indices.
#[derive(Debug, Clone)]
pub struct SubsampledHessian {
    data: Arc<Dataset>,
    /// `(j, multiplicity, weight)` with weight `multiplicity / (n|S|p_j)`, sorted by `j`.
    sample: Vec<(usize, u32, f64)>,
    /// Rank-one coefficient `weight_j · κ_j(x)` per entry of `sample`.
    coefficients: Vec<f64>,
    /// Diagonal coming from the components' own `rI` terms.
    component_diag: f64,
    shift: f64,
    base_point: Vec<f64>,
    queries: usize,
    scheme: SamplingScheme,
    exact: bool,
}

impl SubsampledHessian {
    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn base_point(&self) -> &[f64] {
        &self.base_point
    }

    /// Number of component-Hessian queries charged for this build (`|S|`).
    pub fn hessian_queries(&self) -> usize {
        self.queries
    }

    pub fn scheme(&self) -> SamplingScheme {
        self.scheme
    }

    pub fn is_exact(&self) -> bool {
        self.exact
    }

    /// Sampled multiset as `(index, multiplicity)` in increasing index order.
    pub fn sample(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.sample.iter().map(|&(j, m, _)| (j, m))
    }

    /// Same sampled operator with a different diagonal shift.
    pub fn with_shift(&self, shift: f64) -> Self {
        Self {
            shift,
            ..self.clone()
        }
    }

    /// Dense matrix of the operator, including the shift.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.base_point.len();
        let mut m = DMatrix::zeros(d, d);
        let mut e = vec![0.0; d];
        let mut col = vec![0.0; d];
        for k in 0..d {
            e[k] = 1.0;
            self.apply_into(&e, &mut col);
            m.column_mut(k).copy_from_slice(&col);
            e[k] = 0.0;
        }
        m
    }
}

impl SymmetricOperator for SubsampledHessian {
    fn dim(&self) -> usize {
        self.base_point.len()
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let diag = self.component_diag + self.shift;
        for (o, vi) in out.iter_mut().zip(v) {
            *o = diag * vi;
        }
        for (&(j, _, _), &c) in self.sample.iter().zip(&self.coefficients) {
            let row = self.data.row(j);
            row.axpy_into(c * row.dot(v), out);
        }
    }
}

/// Draws `plan.size` indices with replacement from the plan's distribution and
/// assembles the shifted operator at `x`.
pub fn build_subsampled_hessian(
    model: &LossModel,
    x: &[f64],
    plan: &SamplingPlan,
    rng: &mut ChaCha8Rng,
) -> Result<SubsampledHessian> {
    model.check_vec(x)?;
    let n = model.n();
    let nf = n as f64;
    let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
    if plan.exact {
        counts.extend((0..n).map(|j| (j, 1)));
    } else {
        match &plan.probabilities {
            None => {
                for _ in 0..plan.size {
                    *counts.entry(rng.random_range(0..n)).or_insert(0) += 1;
                }
            }
            Some(p) => {
                let dist = WeightedIndex::new(p).map_err(|e| {
                    Error::InvalidConfig(format!("bad sampling distribution: {e}"))
                })?;
                for _ in 0..plan.size {
                    *counts.entry(dist.sample(rng)).or_insert(0) += 1;
                }
            }
        }
    }
    let size = if plan.exact { n } else { plan.size } as f64;
    let sample: Vec<(usize, u32, f64)> = counts
        .into_iter()
        .map(|(j, m)| {
            let p = match (&plan.probabilities, plan.exact) {
                (Some(p), false) => p[j],
                _ => 1.0 / nf,
            };
            (j, m, m as f64 / (nf * size * p))
        })
        .collect();
    let coefficients = sample
        .iter()
        .map(|&(j, _, w)| w * model.rank_one_curvature(j, x))
        .collect();
    let weight_sum: f64 = sample.iter().map(|s| s.2).sum();
    Ok(SubsampledHessian {
        data: Arc::clone(model.dataset()),
        sample,
        coefficients,
        component_diag: weight_sum * model.shift_curvature(),
        shift: plan.shift,
        base_point: x.to_vec(),
        queries: if plan.exact { n } else { plan.size },
        scheme: plan.scheme,
        exact: plan.exact,
    })
}

/// Dense `∇²f(x)` assembled column by column from per-component products.
pub fn dense_exact_hessian(model: &LossModel, x: &[f64], cap: usize) -> Result<DMatrix<f64>> {
    let d = model.d();
    if d > cap {
        return Err(Error::DenseCapExceeded { d, cap });
    }
    let mut m = DMatrix::zeros(d, d);
    let inv_n = 1.0 / model.n() as f64;
    let mut e = vec![0.0; d];
    for k in 0..d {
        e[k] = 1.0;
        for j in 0..model.n() {
            let col = model.component_hvp(j, x, &e)?;
            for (i, v) in col.iter().enumerate() {
                m[(i, k)] += inv_n * v;
            }
        }
        e[k] = 0.0;
    }
    Ok(m)
}

/// Spectral norm of a symmetric matrix.
pub fn symmetric_spectral_norm(m: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// `‖H̃(x) − ∇²f(x)‖₂` where `H̃` is `op` without its shift.
pub fn spectral_error(op: &SubsampledHessian, model: &LossModel, x: &[f64], cap: usize) -> Result<f64> {
    let reference = dense_exact_hessian(model, x, cap)?;
    Ok(spectral_distance(op, &reference))
}

/// `‖H̃ − reference‖₂` against a precomputed dense reference.
pub fn spectral_distance(op: &SubsampledHessian, reference: &DMatrix<f64>) -> f64 {
    let sampled = op.with_shift(0.0).to_dense();
    symmetric_spectral_norm(sampled - reference)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use crate::problem::{LossFamily, LossModel};
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn logistic(rows: &[Vec<f64>], labels: &[f64]) -> LossModel {
        let data = Dataset::from_dense(rows, labels.to_vec()).unwrap();
        LossModel::new(LossFamily::RegLogistic, Arc::new(data), 0.0).unwrap()
    }

    #[test]
    fn uniform_size_examples() {
        // 64 ln 2000 = 486.46...
        assert_eq!(sample_size_uniform(0.5, 0.01, 1.0, 10, 1_000_000).unwrap(), 487);
        assert_eq!(sample_size_uniform(0.5, 0.01, 1.0, 10, 100).unwrap(), 100);
    }

    #[test]
    fn uniform_size_grows_with_dimension_by_log_two() {
        let a = uniform_bound(0.5, 0.01, 1.0, 10);
        let b = uniform_bound(0.5, 0.01, 1.0, 20);
        assert_relative_eq!(b - a, 64.0 * 2f64.ln(), epsilon = 1e-9);
        let sa = sample_size_uniform(0.5, 0.01, 1.0, 10, usize::MAX).unwrap();
        let sb = sample_size_uniform(0.5, 0.01, 1.0, 20, usize::MAX).unwrap();
        assert_eq!(sb, (a + 64.0 * 2f64.ln()).ceil() as usize);
        assert!(sb > sa);
    }

    #[test]
    fn nonuniform_size_examples() {
        // max{16, 7.92} ln 2000 = 121.61...
        assert_eq!(
            sample_size_nonuniform(0.5, 0.01, 1.0, 1.0, 0.01, 10, 100).unwrap(),
            100
        );
        assert_eq!(
            sample_size_nonuniform(0.5, 0.01, 1.0, 1.0, 0.01, 10, 1_000_000).unwrap_or(0),
            // with n = 10^6 the second branch is (4)(10^6 + 98)/10^6, still below 16
            122
        );
        assert!(matches!(
            sample_size_nonuniform(0.5, 0.01, 1.0, 1.0, 0.0, 10, 100),
            Err(Error::DegenerateCurvature)
        ));
    }

    #[test]
    fn nonuniform_size_at_n_100_matches_hand_value() {
        let b = nonuniform_bound(0.5, 0.01, 1.0, 1.0, 0.01, 10, 100);
        assert_relative_eq!(b, 16.0 * 2000f64.ln(), epsilon = 1e-12);
        assert_eq!(b.ceil() as usize, 122);
    }

    #[test]
    fn single_component_second_branch_vanishes() {
        let b = nonuniform_bound(0.5, 0.01, 3.0, 2.0, 1.0, 4, 1);
        assert_relative_eq!(b, 4.0 * 4.0 / 0.25 * (8f64 / 0.01).ln(), epsilon = 1e-9);
    }

    #[test]
    fn distribution_examples() {
        // |φ''| = 1/4 at x = 0, so weights are ‖a‖²/4: 3 and 1
        let m = logistic(&[vec![12f64.sqrt()], vec![2.0]], &[1.0, -1.0]);
        let dist = nonuniform_distribution(&m, &[0.0]).unwrap();
        assert_relative_eq!(dist.probabilities[0], 0.75, epsilon = 1e-15);
        assert_relative_eq!(dist.probabilities[1], 0.25, epsilon = 1e-15);
        assert_relative_eq!(dist.p_min, 0.25, epsilon = 1e-15);

        let same = logistic(&vec![vec![1.0, 1.0]; 4], &[1.0; 4]);
        let dist = nonuniform_distribution(&same, &[0.3, -0.2]).unwrap();
        assert!(dist.probabilities.iter().all(|&p| (p - 0.25).abs() < 1e-15));
    }

    #[test]
    fn zero_curvature_component_leaves_support() {
        // φ'' = 0 for the SVM loss at t = 0
        let data = Dataset::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![1.0, 1.0]).unwrap();
        let m = LossModel::new(LossFamily::NonconvexSvm, Arc::new(data), 0.0).unwrap();
        let dist = nonuniform_distribution(&m, &[0.0, 0.5]).unwrap();
        assert_eq!(dist.probabilities[0], 0.0);
        assert_eq!(dist.probabilities[1], 1.0);
        assert_eq!(dist.p_min, 1.0);
        assert_eq!(dist.support, 1);
        assert!(matches!(
            nonuniform_distribution(&m, &[0.0, 0.0]),
            Err(Error::DegenerateCurvature)
        ));
    }

    #[test]
    fn exact_plan_reproduces_full_hessian_plus_shift() {
        let m = logistic(&[vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.3, 0.3]], &[1.0, -1.0, 1.0]);
        let x = [0.2, -0.4];
        let plan = SamplingPlan::exact(&m, 0.125);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = build_subsampled_hessian(&m, &x, &plan, &mut rng).unwrap();
        let v = [0.7, -1.1];
        let mut expect = m.full_hvp(&x, &v).unwrap();
        expect.iter_mut().zip(&v).for_each(|(e, vi)| *e += 0.125 * vi);
        let got = h.apply(&v);
        assert_relative_eq!(got[0], expect[0], epsilon = 1e-14);
        assert_relative_eq!(got[1], expect[1], epsilon = 1e-14);
        assert_eq!(h.hessian_queries(), 3);
        assert!(spectral_error(&h, &m, &x, 8).unwrap() < 1e-14);
    }

    #[test]
    fn single_component_any_scheme() {
        let m = logistic(&[vec![1.0, 2.0]], &[1.0]);
        let x = [0.1, 0.1];
        let plan = SamplingPlan::fixed(&m, 5, 0.5, Some(vec![1.0])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = build_subsampled_hessian(&m, &x, &plan, &mut rng).unwrap();
        let v = [1.0, -1.0];
        let mut expect = m.component_hvp(0, &x, &v).unwrap();
        expect.iter_mut().zip(&v).for_each(|(e, vi)| *e += 0.5 * vi);
        let got = h.apply(&v);
        assert_relative_eq!(got[0], expect[0], epsilon = 1e-14);
        assert_relative_eq!(got[1], expect[1], epsilon = 1e-14);
    }

    #[test]
    fn same_seed_same_sample() {
        let rows: Vec<Vec<f64>> = (0..50).map(|j| vec![j as f64 / 10.0, 1.0]).collect();
        let labels: Vec<f64> = (0..50).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let m = logistic(&rows, &labels);
        let plan = SamplingPlan::fixed(&m, 20, 0.0, None).unwrap();
        let a = build_subsampled_hessian(&m, &[0.0, 0.0], &plan, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = build_subsampled_hessian(&m, &[0.0, 0.0], &plan, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a.sample().collect::<Vec<_>>(), b.sample().collect::<Vec<_>>());
        assert_eq!(a.sample().map(|s| s.1 as usize).sum::<usize>(), 20);
    }

    #[test]
    fn operator_is_symmetric() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|j| vec![(j as f64).sin(), (j as f64 * 0.7).cos(), 0.1 * j as f64])
            .collect();
        let labels: Vec<f64> = (0..30).map(|j| if j % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let m = logistic(&rows, &labels);
        let x = [0.3, -0.2, 0.05];
        let dist = nonuniform_distribution(&m, &x).unwrap();
        let plan = SamplingPlan::fixed(&m, 12, 0.3, Some(dist.probabilities)).unwrap();
        let h = build_subsampled_hessian(&m, &x, &plan, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let u = [1.0, 2.0, -0.5];
        let v = [-0.3, 0.8, 1.7];
        assert!((dot(&u, &h.apply(&v)) - dot(&v, &h.apply(&u))).abs() < 1e-12);
    }

    #[test]
    fn spectral_error_of_one_draw_from_two_components() {
        // ∇²f_1 = aaᵀ/4, ∇²f_2 = ccᵀ/4 at x = 0; a single uniform draw of
        // component 1 has error ‖(aaᵀ − ccᵀ)/8‖ = ‖a‖‖c‖ sin∠(a,c)/8 for
        // equal-norm a, c; reflections give the same error either way.
        let m = logistic(&[vec![1.0, 1.0], vec![1.0, -1.0]], &[1.0, 1.0]);
        let plan = SamplingPlan::fixed(&m, 1, 0.0, None).unwrap();
        let mut errors = Vec::new();
        for seed in 0..8 {
            let h = build_subsampled_hessian(&m, &[0.0, 0.0], &plan, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            errors.push(spectral_error(&h, &m, &[0.0, 0.0], 8).unwrap());
        }
        for e in errors {
            assert_relative_eq!(e, 0.25, epsilon = 1e-14);
        }
    }

    #[test]
    fn dense_cap_is_enforced() {
        let m = logistic(&[vec![1.0, 1.0, 1.0]], &[1.0]);
        assert!(matches!(
            dense_exact_hessian(&m, &[0.0; 3], 2),
            Err(Error::DenseCapExceeded { d: 3, cap: 2 })
        ));
    }

    #[test]
    fn nonuniform_plan_picks_smaller_size() {
        // one dominant row makes L ≫ L̄
        let mut rows: Vec<Vec<f64>> = (0..400).map(|j| vec![0.05 * ((j % 7) as f64 + 1.0), 0.02]).collect();
        rows[0] = vec![30.0, 0.0];
        let labels = vec![1.0; 400];
        let m = logistic(&rows, &labels);
        let lip = m.lipschitz_bounds();
        let plan = SamplingPlan::resolve(&m, &lip, &[0.0, 0.0], 0.9, 0.05, SamplingScheme::Nonuniform).unwrap();
        let nonuni = plan.nonuniform_size.unwrap();
        assert_eq!(plan.size, nonuni.min(plan.uniform_size));
        assert_eq!(plan.requested, SamplingScheme::Nonuniform);
        assert_eq!(plan.shift, 0.45);
    }
}
