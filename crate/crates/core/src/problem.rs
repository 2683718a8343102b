//! Datasets and the finite-sum loss families.
//!
//! Every objective has the form `f(x) = (1/n) Σ_j f_j(x)`. For the three
//! classification/regression families each component is
//! `f_j(x) = φ_j(a_jᵀx) + R(x)` with a ridge term `R` folded into every
//! component, so a sub-sample of components still averages complete `f_j`.
//! The PCA subroutine uses `f_j(x) = ½xᵀ(μI − a_j a_jᵀ)x + cᵀx`.
//!
//! Component Hessians are never formed. Every family decomposes as
//! `∇²f_j(x) = κ_j(x) a_j a_jᵀ + r I`, which is what [`LossModel::component_hvp`]
//! and the sub-sampled operator use.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, axpy, dot, norm, SparseRow};

/// Sparse observations `(a_j, b_j)`, immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Vec<SparseRow>,
    labels: Vec<f64>,
    d: usize,
}

impl Dataset {
    pub fn new(rows: Vec<SparseRow>, labels: Vec<f64>, d: usize) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidDataset("no observations".into()));
        }
        if d == 0 {
            return Err(Error::InvalidDataset("feature dimension is zero".into()));
        }
        if rows.len() != labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        for (j, row) in rows.iter().enumerate() {
            if let Some(max) = row.max_index() {
                if max >= d {
                    return Err(Error::InvalidDataset(format!(
                        "row {j} has index {max} outside [0, {d})"
                    )));
                }
            }
            if !all_finite(row.values()) {
                return Err(Error::InvalidDataset(format!("row {j} has a non-finite entry")));
            }
        }
        if !all_finite(&labels) {
            return Err(Error::InvalidDataset("non-finite label".into()));
        }
        Ok(Self { rows, labels, d })
    }

    pub fn from_dense(rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bad.len(),
            });
        }
        Self::new(rows.iter().map(|r| SparseRow::from_dense(r)).collect(), labels, d)
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, j: usize) -> &SparseRow {
        &self.rows[j]
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn label(&self, j: usize) -> f64 {
        self.labels[j]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// True when every label is exactly −1 or +1.
    pub fn has_binary_labels(&self) -> bool {
        self.labels.iter().all(|&b| b == 1.0 || b == -1.0)
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(SparseRow::nnz).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossFamily {
    /// `(a_jᵀx − b_j)² + R(x)`
    RidgeLeastSquares,
    /// `log(1 + exp(−b_j a_jᵀx)) + R(x)`
    RegLogistic,
    /// `1 − tanh(b_j a_jᵀx) + R(x)`, nonconvex components.
    NonconvexSvm,
    /// `½xᵀ(μI − a_j a_jᵀ)x + cᵀx`; `lambda` carries μ.
    PcaQuadratic,
}

impl LossFamily {
    pub fn name(self) -> &'static str {
        match self {
            Self::RidgeLeastSquares => "ridge_least_squares",
            Self::RegLogistic => "reg_logistic",
            Self::NonconvexSvm => "nonconvex_svm",
            Self::PcaQuadratic => "pca_quadratic",
        }
    }

    /// Whether components are `φ_j(a_jᵀx)` plus a data-independent ridge term.
    ///
    /// The PCA subroutine is excluded: its components carry the `μI` shift and a
    /// linear term that are not a regularizer of the observation.
    pub fn is_separable(self) -> bool {
        !matches!(self, Self::PcaQuadratic)
    }

    pub fn needs_binary_labels(self) -> bool {
        matches!(self, Self::RegLogistic | Self::NonconvexSvm)
    }

    /// `sup_t |φ''(t)|` for unit labels.
    pub fn curvature_bound(self) -> f64 {
        match self {
            Self::RidgeLeastSquares => 2.0,
            Self::RegLogistic => 0.25,
            // max |2 tanh(t) sech²(t)| attained at tanh(t) = 1/√3
            Self::NonconvexSvm => 4.0 / (3.0 * 3f64.sqrt()),
            Self::PcaQuadratic => 1.0,
        }
    }
}

impl fmt::Display for LossFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ridge_least_squares" | "ridge" | "least_squares" => Ok(Self::RidgeLeastSquares),
            "reg_logistic" | "logistic" => Ok(Self::RegLogistic),
            "nonconvex_svm" | "svm" => Ok(Self::NonconvexSvm),
            "pca_quadratic" | "pca" => Ok(Self::PcaQuadratic),
            other => Err(Error::InvalidConfig(format!("unknown loss family `{other}`"))),
        }
    }
}

/// Scaling of the ridge term folded into each component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RidgeForm {
    /// `λ‖x‖²`
    #[default]
    Full,
    /// `(λ/2)‖x‖²`
    Half,
}

impl RidgeForm {
    fn coefficient(self) -> f64 {
        match self {
            Self::Full => 1.0,
            Self::Half => 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LipschitzSource {
    Analytic,
    UserSupplied,
    Estimated,
}

/// Gradient-Lipschitz constants of the components: `l = max_j L_j`,
/// `lbar = (1/n) Σ_j L_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzInfo {
    pub l: f64,
    pub lbar: f64,
    pub source: LipschitzSource,
}

impl LipschitzInfo {
    pub fn user_supplied(l: f64, lbar: f64) -> Result<Self> {
        if !(l.is_finite() && lbar > 0.0 && lbar <= l) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < Lbar <= L < inf, got L = {l}, Lbar = {lbar}"
            )));
        }
        Ok(Self {
            l,
            lbar,
            source: LipschitzSource::UserSupplied,
        })
    }
}

/// A loss family bound to a dataset.
#[derive(Debug, Clone)]
pub struct LossModel {
    family: LossFamily,
    lambda: f64,
    ridge: RidgeForm,
    linear: Option<Vec<f64>>,
    data: Arc<Dataset>,
}

impl LossModel {
    pub fn new(family: LossFamily, data: Arc<Dataset>, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "regularization weight must be finite and >= 0, got {lambda}"
            )));
        }
        if family.needs_binary_labels() && !data.has_binary_labels() {
            return Err(Error::InvalidDataset(format!(
                "{family} needs labels in {{-1, +1}}"
            )));
        }
        Ok(Self {
            family,
            lambda,
            ridge: RidgeForm::default(),
            linear: None,
            data,
        })
    }

    pub fn with_ridge_form(mut self, ridge: RidgeForm) -> Self {
        self.ridge = ridge;
        self
    }

    /// Sets the linear term `c` of the PCA subroutine.
    pub fn with_linear_term(mut self, c: Vec<f64>) -> Result<Self> {
        if self.family != LossFamily::PcaQuadratic {
            return Err(Error::InvalidConfig(format!(
                "linear term only applies to pca_quadratic, not {}",
                self.family
            )));
        }
        self.check_vec(&c)?;
        self.linear = Some(c);
        Ok(self)
    }

    pub fn family(&self) -> LossFamily {
        self.family
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn ridge_form(&self) -> RidgeForm {
        self.ridge
    }

    pub fn dataset(&self) -> &Arc<Dataset> {
        &self.data
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn d(&self) -> usize {
        self.data.d()
    }

    pub fn check_vec(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                got: x.len(),
            });
        }
        if !all_finite(x) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j >= self.n() {
            return Err(Error::IndexOutOfRange { index: j, n: self.n() });
        }
        Ok(())
    }

    /// Curvature `r` of the data-independent part, so that
    /// `∇²f_j = κ_j a_j a_jᵀ + r I`.
    pub fn shift_curvature(&self) -> f64 {
        match self.family {
            LossFamily::PcaQuadratic => self.lambda,
            _ => 2.0 * self.ridge.coefficient() * self.lambda,
        }
    }

    fn shift_value(&self, x: &[f64]) -> f64 {
        let sq = dot(x, x);
        match self.family {
            LossFamily::PcaQuadratic => {
                0.5 * self.lambda * sq + self.linear.as_deref().map_or(0.0, |c| dot(c, x))
            }
            _ => self.ridge.coefficient() * self.lambda * sq,
        }
    }

    /// Adds the gradient of the data-independent part at `x` to `out`.
    fn add_shift_gradient(&self, x: &[f64], out: &mut [f64]) {
        axpy(self.shift_curvature(), x, out);
        if let Some(c) = &self.linear {
            axpy(1.0, c, out);
        }
    }

    fn phi(&self, b: f64, t: f64) -> f64 {
        match self.family {
            LossFamily::RidgeLeastSquares => (t - b) * (t - b),
            LossFamily::RegLogistic => softplus(-b * t),
            LossFamily::NonconvexSvm => 1.0 - (b * t).tanh(),
            LossFamily::PcaQuadratic => -0.5 * t * t,
        }
    }

    fn phi_prime(&self, b: f64, t: f64) -> f64 {
        match self.family {
            LossFamily::RidgeLeastSquares => 2.0 * (t - b),
            LossFamily::RegLogistic => -b * logistic(-b * t),
            LossFamily::NonconvexSvm => {
                let th = (b * t).tanh();
                -b * (1.0 - th * th)
            }
            LossFamily::PcaQuadratic => -t,
        }
    }

    fn phi_second(&self, b: f64, t: f64) -> f64 {
        match self.family {
            LossFamily::RidgeLeastSquares => 2.0,
            LossFamily::RegLogistic => {
                let p = logistic(b * t);
                b * b * p * (1.0 - p)
            }
            LossFamily::NonconvexSvm => {
                let th = (b * t).tanh();
                2.0 * b * b * th * (1.0 - th * th)
            }
            LossFamily::PcaQuadratic => -1.0,
        }
    }

    /// Coefficient `κ_j(x)` of `a_j a_jᵀ` in `∇²f_j(x)`; defined for every family.
    pub(crate) fn rank_one_curvature(&self, j: usize, x: &[f64]) -> f64 {
        let t = self.data.row(j).dot(x);
        self.phi_second(self.data.label(j), t)
    }

    pub fn component_value(&self, j: usize, x: &[f64]) -> Result<f64> {
        self.check_index(j)?;
        self.check_vec(x)?;
        let t = self.data.row(j).dot(x);
        Ok(self.phi(self.data.label(j), t) + self.shift_value(x))
    }

    pub fn component_gradient(&self, j: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check_index(j)?;
        self.check_vec(x)?;
        let row = self.data.row(j);
        let mut g = vec![0.0; self.d()];
        row.axpy_into(self.phi_prime(self.data.label(j), row.dot(x)), &mut g);
        self.add_shift_gradient(x, &mut g);
        Ok(g)
    }

    /// `∇²f_j(x) v`, computed as `κ_j(x)(a_jᵀv) a_j + r v`.
    pub fn component_hvp(&self, j: usize, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check_index(j)?;
        self.check_vec(x)?;
        self.check_vec(v)?;
        let row = self.data.row(j);
        let mut out: Vec<f64> = v.iter().map(|vi| self.shift_curvature() * vi).collect();
        row.axpy_into(self.rank_one_curvature(j, x) * row.dot(v), &mut out);
        Ok(out)
    }

    /// `φ_j''(a_jᵀx)`; only for separable families.
    pub fn scalar_second_derivative(&self, j: usize, x: &[f64]) -> Result<f64> {
        if !self.family.is_separable() {
            return Err(Error::NotSeparable(self.family.name()));
        }
        self.check_index(j)?;
        self.check_vec(x)?;
        Ok(self.rank_one_curvature(j, x))
    }

    pub fn full_value(&self, x: &[f64]) -> Result<f64> {
        self.check_vec(x)?;
        let data: f64 = self
            .data
            .rows()
            .iter()
            .zip(self.data.labels())
            .map(|(row, &b)| self.phi(b, row.dot(x)))
            .sum();
        Ok(data / self.n() as f64 + self.shift_value(x))
    }

    pub fn full_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.value_and_gradient(x)?.1)
    }

    /// One pass over the data producing `f(x)` and `∇f(x)`.
    pub fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_vec(x)?;
        let inv_n = 1.0 / self.n() as f64;
        let mut g = vec![0.0; self.d()];
        let mut value = 0.0;
        for (row, &b) in self.data.rows().iter().zip(self.data.labels()) {
            let t = row.dot(x);
            value += self.phi(b, t);
            row.axpy_into(self.phi_prime(b, t) * inv_n, &mut g);
        }
        self.add_shift_gradient(x, &mut g);
        Ok((value * inv_n + self.shift_value(x), g))
    }

    /// Gradient of the average over the multiset `batch` of component indices.
    pub fn batch_gradient(&self, x: &[f64], batch: &[usize]) -> Result<Vec<f64>> {
        self.check_vec(x)?;
        let mut g = vec![0.0; self.d()];
        let w = 1.0 / batch.len().max(1) as f64;
        for &j in batch {
            self.check_index(j)?;
            let row = self.data.row(j);
            row.axpy_into(w * self.phi_prime(self.data.label(j), row.dot(x)), &mut g);
        }
        self.add_shift_gradient(x, &mut g);
        Ok(g)
    }

    /// Exact `∇²f(x) v`.
    pub fn full_hvp(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check_vec(x)?;
        self.check_vec(v)?;
        let inv_n = 1.0 / self.n() as f64;
        let mut out: Vec<f64> = v.iter().map(|vi| self.shift_curvature() * vi).collect();
        for (row, &b) in self.data.rows().iter().zip(self.data.labels()) {
            let t = row.dot(x);
            row.axpy_into(inv_n * self.phi_second(b, t) * row.dot(v), &mut out);
        }
        Ok(out)
    }

    /// Per-component gradient-Lipschitz constant `L_j`.
    pub fn component_lipschitz(&self, j: usize) -> f64 {
        let a2 = self.data.row(j).norm_sq();
        match self.family {
            LossFamily::PcaQuadratic => {
                // eigenvalues of μI − aaᵀ are μ (multiplicity d−1) and μ − ‖a‖²
                let mu = self.lambda;
                let tail = if self.d() > 1 { mu.abs() } else { 0.0 };
                (mu - a2).abs().max(tail)
            }
            fam => fam.curvature_bound() * a2 + self.shift_curvature(),
        }
    }

    /// Analytic `L` and `L̄`. Components with a zero bound are floored at the
    /// smallest positive double so the result stays strictly positive.
    pub fn lipschitz_bounds(&self) -> LipschitzInfo {
        let mut l = 0.0f64;
        let mut sum = 0.0;
        for j in 0..self.n() {
            let lj = self.component_lipschitz(j);
            l = l.max(lj);
            sum += lj;
        }
        let lbar = (sum / self.n() as f64).min(l);
        LipschitzInfo {
            l: l.max(f64::MIN_POSITIVE),
            lbar: lbar.max(f64::MIN_POSITIVE),
            source: LipschitzSource::Analytic,
        }
    }

    /// Power-iteration estimate of `‖∇²f_j(x)‖` over a random subset of
    /// components. A local estimate at `x`, not a global bound.
    pub fn estimate_lipschitz(
        &self,
        x: &[f64],
        components: usize,
        iterations: usize,
        seed: u64,
    ) -> Result<LipschitzInfo> {
        self.check_vec(x)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = components.clamp(1, self.n());
        let picked = sample_indices(&mut rng, self.n(), m).into_vec();
        let mut l = 0.0f64;
        let mut sum = 0.0;
        for j in picked {
            let mut v: Vec<f64> = (0..self.d()).map(|_| StandardNormal.sample(&mut rng)).collect();
            let mut est = 0.0;
            for _ in 0..iterations.max(1) {
                let nv = norm(&v);
                if nv == 0.0 {
                    break;
                }
                v.iter_mut().for_each(|vi| *vi /= nv);
                let hv = self.component_hvp(j, x, &v)?;
                est = norm(&hv);
                v = hv;
            }
            l = l.max(est);
            sum += est;
        }
        let lbar = sum / m as f64;
        Ok(LipschitzInfo {
            l: l.max(f64::MIN_POSITIVE),
            lbar: lbar.clamp(f64::MIN_POSITIVE, l.max(f64::MIN_POSITIVE)),
            source: LipschitzSource::Estimated,
        })
    }
}

/// `log(1 + e^z)` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `1 / (1 + e^{-z})`
pub(crate) fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn model(family: LossFamily, rows: &[Vec<f64>], labels: &[f64], lambda: f64) -> LossModel {
        let data = Dataset::from_dense(rows, labels.to_vec()).unwrap();
        LossModel::new(family, Arc::new(data), lambda).unwrap()
    }

    #[test]
    fn full_value_examples() {
        let ls = model(LossFamily::RidgeLeastSquares, &[vec![1.0, 0.0]], &[0.0], 0.0);
        assert_eq!(ls.full_value(&[0.0, 0.0]).unwrap(), 0.0);

        let lg = model(LossFamily::RegLogistic, &[vec![1.0]], &[1.0], 0.0);
        assert_relative_eq!(lg.full_value(&[0.0]).unwrap(), std::f64::consts::LN_2, epsilon = 1e-15);

        let svm = model(LossFamily::NonconvexSvm, &[vec![1.0]], &[1.0], 0.0);
        assert_eq!(svm.full_value(&[0.0]).unwrap(), 1.0);
    }

    #[test]
    fn full_gradient_examples() {
        let ls = model(LossFamily::RidgeLeastSquares, &[vec![1.0, 0.0]], &[0.0], 0.0);
        assert_eq!(ls.full_gradient(&[2.0, 5.0]).unwrap(), vec![4.0, 0.0]);

        let lg = model(LossFamily::RegLogistic, &[vec![1.0]], &[1.0], 0.0);
        assert_eq!(lg.full_gradient(&[0.0]).unwrap(), vec![-0.5]);

        // least squares with b = a^T x* is stationary at x*
        let ls2 = model(
            LossFamily::RidgeLeastSquares,
            &[vec![1.0, 2.0], vec![-1.0, 0.5]],
            &[5.0, 0.0],
            0.0,
        );
        let g = ls2.full_gradient(&[1.0, 2.0]).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn component_hvp_examples() {
        let ls = model(LossFamily::RidgeLeastSquares, &[vec![1.0, 0.0]], &[0.0], 0.0);
        assert_eq!(ls.component_hvp(0, &[3.0, -1.0], &[1.0, 1.0]).unwrap(), vec![2.0, 0.0]);
        assert_eq!(ls.component_hvp(0, &[3.0, -1.0], &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);

        let pca = model(LossFamily::PcaQuadratic, &[vec![1.0, 0.0]], &[0.0], 3.0);
        assert_eq!(pca.component_hvp(0, &[0.3, 0.1], &[1.0, 0.0]).unwrap(), vec![2.0, 0.0]);
    }

    #[test]
    fn scalar_second_derivative_examples() {
        let lg = model(LossFamily::RegLogistic, &[vec![1.0]], &[1.0], 0.7);
        assert_eq!(lg.scalar_second_derivative(0, &[0.0]).unwrap(), 0.25);

        let ls = model(LossFamily::RidgeLeastSquares, &[vec![1.0, 2.0]], &[3.0], 0.1);
        assert_eq!(ls.scalar_second_derivative(0, &[-4.0, 9.0]).unwrap(), 2.0);

        let svm = model(LossFamily::NonconvexSvm, &[vec![1.0]], &[1.0], 0.0);
        assert_eq!(svm.scalar_second_derivative(0, &[0.0]).unwrap(), 0.0);

        let pca = model(LossFamily::PcaQuadratic, &[vec![1.0]], &[0.0], 2.0);
        assert!(matches!(
            pca.scalar_second_derivative(0, &[0.0]),
            Err(Error::NotSeparable(_))
        ));
    }

    #[test]
    fn lipschitz_examples() {
        let one = model(LossFamily::RegLogistic, &[vec![2.0]], &[1.0], 0.0);
        let info = one.lipschitz_bounds();
        assert_eq!((info.l, info.lbar), (1.0, 1.0));
        assert_eq!(info.source, LipschitzSource::Analytic);

        let two = model(LossFamily::RegLogistic, &[vec![2.0, 0.0], vec![6.0, 8.0]], &[1.0, -1.0], 0.0);
        let info = two.lipschitz_bounds();
        assert_eq!((info.l, info.lbar), (25.0, 13.0));

        let ridge = model(LossFamily::RegLogistic, &[vec![2.0]], &[1.0], 0.5);
        assert_eq!(ridge.lipschitz_bounds().l, 2.0);
        let half = ridge.clone().with_ridge_form(RidgeForm::Half);
        assert_eq!(half.lipschitz_bounds().l, 1.5);
    }

    #[test]
    fn estimated_lipschitz_stays_below_analytic() {
        let m = model(
            LossFamily::RidgeLeastSquares,
            &[vec![1.0, 2.0], vec![0.0, 3.0], vec![-1.0, 1.0]],
            &[0.0, 1.0, 2.0],
            0.1,
        );
        let est = m.estimate_lipschitz(&[0.5, 0.5], 3, 50, 7).unwrap();
        let exact = m.lipschitz_bounds();
        assert_eq!(est.source, LipschitzSource::Estimated);
        assert!(est.l <= exact.l * (1.0 + 1e-12));
        assert_relative_eq!(est.l, exact.l, max_relative = 1e-8);
    }

    #[test]
    fn error_paths() {
        let lg = model(LossFamily::RegLogistic, &[vec![1.0, 0.0]], &[1.0], 0.0);
        assert!(matches!(lg.full_value(&[0.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(lg.full_value(&[f64::NAN, 0.0]), Err(Error::NonFinite)));
        assert!(matches!(
            lg.component_hvp(3, &[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::IndexOutOfRange { .. })
        ));
        let data = Dataset::from_dense(&[vec![1.0]], vec![0.5]).unwrap();
        assert!(LossModel::new(LossFamily::RegLogistic, Arc::new(data), 0.0).is_err());
        assert!(Dataset::new(vec![SparseRow::from_dense(&[0.0, 1.0])], vec![1.0], 1).is_err());
    }

    #[test]
    fn logistic_is_stable_far_out() {
        assert_relative_eq!(softplus(800.0), 800.0);
        assert_eq!(softplus(-800.0), 0.0);
        assert_eq!(logistic(-800.0), 0.0);
        assert_eq!(logistic(800.0), 1.0);
    }
}
