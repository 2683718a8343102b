#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use sarc_core::problem::{Dataset, LossFamily, LossModel, RidgeForm};

pub fn gaussian_vec(rng: &mut ChaCha8Rng, d: usize, std: f64) -> Vec<f64> {
    (0..d)
        .map(|_| {
            let v: f64 = StandardNormal.sample(rng);
            std * v
        })
        .collect()
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| -> f64 { StandardNormal.sample(rng) })
}

/// Least squares `(1/n) Σ (a_jᵀx)²` with `∇²f = diag(eigs)` in a random
/// orthogonal basis. The minimizer is 0 and `f* = 0`.
pub fn rotated_quadratic(d: usize, condition: f64, seed: u64) -> LossModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = gaussian_matrix(&mut rng, d, d).qr().q();
    let n = d as f64;
    let rows: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let ev = condition.powf(-(i as f64) / (d as f64 - 1.0));
            // component Hessians are 2 a_j a_jᵀ, averaged over n
            let s = (ev * n / 2.0).sqrt();
            (0..d).map(|k| s * q[(k, i)]).collect()
        })
        .collect();
    let ds = Dataset::from_dense(&rows, vec![0.0; d]).unwrap();
    LossModel::new(LossFamily::RidgeLeastSquares, Arc::new(ds), 0.0).unwrap()
}

/// Small random instance of `family` with Gaussian rows; PCA gets a linear
/// term so its gradient is not identically zero at the origin.
pub fn random_model(family: LossFamily, n: usize, d: usize, seed: u64) -> LossModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| gaussian_vec(&mut rng, d, 1.0)).collect();
    let labels: Vec<f64> = (0..n)
        .map(|j| match family {
            LossFamily::RidgeLeastSquares => gaussian_vec(&mut rng, 1, 1.0)[0],
            _ => if j % 3 == 0 { -1.0 } else { 1.0 },
        })
        .collect();
    let ds = Arc::new(Dataset::from_dense(&rows, labels).unwrap());
    match family {
        LossFamily::PcaQuadratic => {
            let c = gaussian_vec(&mut rng, d, 1.0);
            LossModel::new(family, ds, 2.5).unwrap().with_linear_term(c).unwrap()
        }
        _ => LossModel::new(family, ds, 0.01).unwrap(),
    }
}

pub fn logistic_model(ds: Dataset, lambda: f64) -> LossModel {
    LossModel::new(LossFamily::RegLogistic, Arc::new(ds), lambda)
        .unwrap()
        .with_ridge_form(RidgeForm::Half)
}

/// Global minimizer of `gᵀs + ½sᵀHs + (σ/3)‖s‖³` computed in the eigenbasis
/// of `H` by bisection on the secular equation `‖s(λ)‖ = λ/σ`.
pub fn cubic_global_min(h: &DMatrix<f64>, g: &[f64], sigma: f64) -> (Vec<f64>, f64) {
    let d = g.len();
    let eig = SymmetricEigen::new(h.clone());
    let q = eig.eigenvectors;
    let lam = eig.eigenvalues;
    let gt = q.transpose() * DVector::from_column_slice(g);
    let lmin = lam.iter().cloned().fold(f64::INFINITY, f64::min);
    let norm_at = |shift: f64| -> f64 {
        (0..d)
            .map(|i| {
                let den = lam[i] + shift;
                if den <= 0.0 {
                    if gt[i] == 0.0 { 0.0 } else { f64::INFINITY }
                } else {
                    (gt[i] / den).powi(2)
                }
            })
            .sum::<f64>()
            .sqrt()
    };
    let lo0 = (-lmin).max(0.0);
    // φ(λ) = ‖s(λ)‖ − λ/σ is decreasing on (lo0, ∞)
    let phi = |l: f64| norm_at(l) - l / sigma;
    let coords: Vec<f64>;
    let eps_gap = 1e-13 * lo0.max(1.0);
    if phi(lo0 + eps_gap) <= 0.0 {
        // hard case: s = −(Λ + λI)⁺ g̃ + τ u over the bottom eigenspace
        let shift = lo0;
        let mut c: Vec<f64> = (0..d)
            .map(|i| {
                let den = lam[i] + shift;
                if den > 1e-12 * lo0.max(1.0) { -gt[i] / den } else { 0.0 }
            })
            .collect();
        let base = c.iter().map(|v| v * v).sum::<f64>();
        let target = shift / sigma;
        let tau = (target * target - base).max(0.0).sqrt();
        let k = (0..d).min_by(|&a, &b| lam[a].total_cmp(&lam[b])).unwrap();
        c[k] += tau;
        coords = c;
    } else {
        let mut lo = lo0;
        let mut hi = lo0.max(1.0);
        while phi(hi) > 0.0 {
            hi *= 2.0;
        }
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if phi(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let l = 0.5 * (lo + hi);
        coords = (0..d).map(|i| -gt[i] / (lam[i] + l)).collect();
    }
    let s = &q * DVector::from_vec(coords);
    let s: Vec<f64> = s.iter().copied().collect();
    let value = cubic_value(h, g, sigma, &s);
    (s, value)
}

pub fn cubic_value(h: &DMatrix<f64>, g: &[f64], sigma: f64, s: &[f64]) -> f64 {
    let sv = DVector::from_column_slice(s);
    let gv = DVector::from_column_slice(g);
    let hs = h * &sv;
    gv.dot(&sv) + 0.5 * sv.dot(&hs) + sigma / 3.0 * sv.norm().powi(3)
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Central-difference check of `grad` against `f` at `x`, relative to the
/// gradient scale.
pub fn fd_gradient_error(f: impl Fn(&[f64]) -> f64, grad: &[f64], x: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    let scale = grad.iter().fold(0.0f64, |m, g| m.max(g.abs())).max(1e-8);
    for k in 0..x.len() {
        let h = 1e-5 * x[k].abs().max(1.0);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[k] += h;
        xm[k] -= h;
        let fd = (f(&xp) - f(&xm)) / (2.0 * h);
        worst = worst.max((fd - grad[k]).abs() / scale);
    }
    worst
}
