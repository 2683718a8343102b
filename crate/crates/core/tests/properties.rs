mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sarc_core::cubic::{
    minimize_model, solve_tridiagonal_cubic, tridiagonal_model_value, CubicModel, KrylovState,
    Reorthogonalization, SubproblemOptions, TerminationSpec, Tridiagonal,
};
use sarc_core::linalg::{dot, norm, DenseSymmetric, SymmetricOperator};
use sarc_core::problem::LossFamily;
use sarc_core::saarc::{psi_argmin, EstimatingSequence};
use sarc_core::sampling::{sample_size_nonuniform, sample_size_uniform};
use sarc_core::trace::{read_records, write_records, EpochLedger, Phase, TraceRecord};

use common::{
    cubic_global_min, cubic_value, fd_gradient_error, gaussian_matrix, gaussian_vec, random_model,
};

fn family_strategy() -> impl Strategy<Value = LossFamily> {
    prop_oneof![
        Just(LossFamily::RidgeLeastSquares),
        Just(LossFamily::RegLogistic),
        Just(LossFamily::NonconvexSvm),
        Just(LossFamily::PcaQuadratic),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gradient_matches_finite_differences(
        family in family_strategy(), n in 1usize..12, d in 1usize..6, seed in any::<u64>(),
    ) {
        let m = random_model(family, n, d, seed);
        let x = gaussian_vec(&mut ChaCha8Rng::seed_from_u64(seed ^ 1), d, 0.7);
        let g = m.full_gradient(&x).unwrap();
        let err = fd_gradient_error(|y| m.full_value(y).unwrap(), &g, &x);
        prop_assert!(err < 1e-5, "relative error {err}");
        let j = (seed as usize) % n;
        let gj = m.component_gradient(j, &x).unwrap();
        let err = fd_gradient_error(|y| m.component_value(j, y).unwrap(), &gj, &x);
        prop_assert!(err < 1e-5, "component relative error {err}");
    }

    #[test]
    fn hvp_matches_gradient_differences(
        family in family_strategy(), n in 1usize..12, d in 1usize..6, seed in any::<u64>(),
    ) {
        let m = random_model(family, n, d, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let x = gaussian_vec(&mut rng, d, 0.7);
        let v = gaussian_vec(&mut rng, d, 1.0);
        let hv = m.full_hvp(&x, &v).unwrap();
        let h = 1e-5;
        let xp: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + h * b).collect();
        let xm: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a - h * b).collect();
        let gp = m.full_gradient(&xp).unwrap();
        let gm = m.full_gradient(&xm).unwrap();
        let scale = norm(&hv).max(1e-8);
        let err = gp.iter().zip(&gm).zip(&hv)
            .map(|((p, q), t)| ((p - q) / (2.0 * h) - t).abs())
            .fold(0.0f64, f64::max) / scale;
        prop_assert!(err < 1e-5, "relative error {err}");
    }

    #[test]
    fn csv_round_trip(
        rows in proptest::collection::vec(
            (0.0f64..1e3, -1e6f64..1e6, 0.0f64..1e3, 1e-9f64..1e3, 0.0f64..1.0, 0usize..10_000, any::<bool>(), 0usize..4),
            0..20,
        ),
    ) {
        let phases = [Phase::Sarc, Phase::Phase1, Phase::Phase2, Phase::FirstOrder];
        let records: Vec<TraceRecord> = rows.iter().enumerate()
            .map(|(i, &(e, f, g, s, eps, size, ok, p))| TraceRecord {
                iter: i, epochs: e, f, grad_norm: g, sigma: s, eps_i: eps,
                sample_size: size, success: ok, phase: phases[p],
            })
            .collect();
        let mut buf = Vec::new();
        write_records(&records, &mut buf).unwrap();
        prop_assert_eq!(read_records(&buf[..]).unwrap(), records.clone());
        let mut again = Vec::new();
        write_records(&read_records(&buf[..]).unwrap(), &mut again).unwrap();
        prop_assert_eq!(buf, again);
    }

    #[test]
    fn lanczos_projection_is_tridiagonal(d in 2usize..9, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = gaussian_matrix(&mut rng, d, d);
        let h = DenseSymmetric(&b + b.transpose());
        let g = gaussian_vec(&mut rng, d, 1.0);
        let mut k = KrylovState::start(&g);
        while k.dim() < d && k.grow(&h, Reorthogonalization::Twice) {}
        let q = DMatrix::from_fn(d, k.dim(), |i, j| k.basis[j][i]);
        let projected = q.transpose() * &h.0 * &q;
        let t = k.t.to_dense();
        let scale = h.0.norm();
        prop_assert!((projected - t).norm() <= 1e-9 * scale);
        prop_assert!(k.orthogonality_loss() <= 1e-10);
    }

    #[test]
    fn model_minimum_decreases_with_subspace(d in 2usize..8, sigma in 0.1f64..10.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = gaussian_matrix(&mut rng, d, d);
        let h = DenseSymmetric(&b + b.transpose());
        let g = gaussian_vec(&mut rng, d, 1.0);
        let mut k = KrylovState::start(&g);
        k.grow(&h, Reorthogonalization::Twice);
        let gnorm = norm(&g);
        let mut prev = f64::INFINITY;
        loop {
            let t = Tridiagonal::new(k.t.diag.clone(), k.t.off.clone());
            let y = solve_tridiagonal_cubic(&t, gnorm, sigma).unwrap();
            let v = tridiagonal_model_value(&t, gnorm, sigma, &y);
            prop_assert!(v <= prev + 1e-10 * prev.abs().max(1.0));
            prev = v;
            if k.dim() >= d || !k.grow(&h, Reorthogonalization::Twice) {
                break;
            }
        }
        let (_, global) = cubic_global_min(&h.0, &g, sigma);
        prop_assert!((prev - global).abs() <= 1e-8 * global.abs().max(1.0));
    }

    #[test]
    fn solver_never_beats_global_oracle(d in 1usize..6, sigma in 0.1f64..10.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = gaussian_matrix(&mut rng, d, d);
        let h = DenseSymmetric(&b + b.transpose());
        let g = gaussian_vec(&mut rng, d, 1.0);
        let model = CubicModel::new(&g, &h, sigma, 0.0).unwrap();
        let spec = TerminationSpec::saarc(0.25).unwrap();
        let sol = minimize_model(&model, &spec, norm(&g), &SubproblemOptions::default()).unwrap();
        let (_, global) = cubic_global_min(&h.0, &g, sigma);
        let value = cubic_value(&h.0, &g, sigma, &sol.step);
        prop_assert!(value >= global - 1e-9 * global.abs().max(1.0));
        prop_assert!((value + sol.model_decrease).abs() <= 1e-9 * value.abs().max(1.0));
        prop_assert!(sol.satisfied);
        prop_assert!(spec.is_met(norm(&model.gradient(&sol.step)), norm(&g), norm(&sol.step) ) || sol.model_grad_norm <= 1e-12);
    }

    #[test]
    fn ledger_epochs_are_exact(
        n in 1usize..5000,
        events in proptest::collection::vec((0u8..3, 0usize..10_000), 0..50),
    ) {
        let mut l = EpochLedger::new(n);
        let (mut grads, mut hess) = (0u64, 0u64);
        let mut last = 0.0;
        for (kind, size) in events {
            match kind {
                0 => { l.charge_full_gradient(); grads += n as u64; }
                1 => { l.charge_gradients(size); grads += size as u64; }
                _ => { l.charge_hessian(size); hess += size as u64; }
            }
            prop_assert!(l.epochs() >= last);
            last = l.epochs();
        }
        prop_assert_eq!(l.gradient_queries(), grads);
        prop_assert_eq!(l.hessian_queries(), hess);
        prop_assert_eq!(l.epochs(), (grads + hess) as f64 / n as f64);
    }

    #[test]
    fn psi_argmin_is_stationary(
        d in 1usize..6, varsigma in 1e-3f64..1e3, seed in any::<u64>(), steps in 1usize..8,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let anchor = gaussian_vec(&mut rng, d, 1.0);
        let mut seq = EstimatingSequence::new(anchor, 1.0, varsigma);
        for _ in 0..steps {
            let x = gaussian_vec(&mut rng, d, 1.0);
            let g = gaussian_vec(&mut rng, d, 1.0);
            seq.add_linear(&x, 0.5, &g);
        }
        let z = psi_argmin(&seq);
        let gn = norm(seq.lin_grad());
        prop_assert!(norm(&seq.gradient(&z)) <= 1e-10 * gn.max(1e-300));
        prop_assert!((seq.value(&z) - seq.min_value()).abs() <= 1e-10 * seq.value(&z).abs().max(1.0));
        // a convex function is minimized at its stationary point
        let w = gaussian_vec(&mut rng, d, 0.3);
        let probe: Vec<f64> = z.iter().zip(&w).map(|(a, b)| a + b).collect();
        prop_assert!(seq.value(&probe) >= seq.value(&z) - 1e-10 * seq.value(&z).abs().max(1.0));
    }

    #[test]
    fn sample_sizes_shrink_as_tolerance_loosens(
        e1 in 1e-3f64..1.0, factor in 1.0f64..10.0, l in 0.1f64..10.0, n in 1usize..1_000_000,
    ) {
        let e2 = e1 * factor;
        let a = sample_size_uniform(e1, 0.05, l, 20, n).unwrap();
        let b = sample_size_uniform(e2, 0.05, l, 20, n).unwrap();
        prop_assert!(b <= a && a <= n && b >= 1);
        let lbar = l / 3.0;
        let p_min = 0.5 / n as f64;
        let c = sample_size_nonuniform(e1, 0.05, l, lbar, p_min, 20, n).unwrap();
        let e = sample_size_nonuniform(e2, 0.05, l, lbar, p_min, 20, n).unwrap();
        prop_assert!(e <= c && c <= n);
    }
}

#[test]
fn rank_one_hessian_applies_like_dense() {
    let m = random_model(LossFamily::RegLogistic, 9, 4, 3);
    let x = [0.3, -0.2, 0.1, 0.5];
    let dense = sarc_core::sampling::dense_exact_hessian(&m, &x, 16).unwrap();
    let v = [1.0, 2.0, -1.0, 0.5];
    let hv = m.full_hvp(&x, &v).unwrap();
    let dv = &dense * nalgebra::DVector::from_column_slice(&v);
    for k in 0..4 {
        assert!((hv[k] - dv[k]).abs() < 1e-12);
    }
    assert!(dot(&v, &hv) > 0.0);
    let op = DenseSymmetric(dense);
    assert_eq!(op.dim(), 4);
}
