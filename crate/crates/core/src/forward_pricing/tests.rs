// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;

use super::*;
use crate::factor_models::{JumpSpec, KernelFn, Start};
use crate::numerics::transition_covariance;
use crate::pricing_system::is_coint_pair;
use crate::simulation::{mean_with_stderr, simulate, TimeGrid};

fn m(rows: &[&[f64]]) -> DenseMatrix {
    DenseMatrix::from_rows(rows).unwrap()
}

fn block_model(mu3: f64, sigma: f64, x0: Vec<f64>) -> FactorModel {
    FactorModel::mv_ou(
        vec![0.0, 0.0, mu3],
        DenseMatrix::from_diag(&[-1.0, -2.0, 0.0]),
        DenseMatrix::from_diag(&[1.0, 2.0, sigma]),
        DriverSpec::brownian(m(&[&[1.0, 0.5, 0.0], &[0.5, 1.0, 0.0], &[0.0, 0.0, 1.0]])).unwrap(),
        Start::At(x0),
    )
    .unwrap()
}

fn sys(c: &[f64]) -> PricingSystem {
    PricingSystem::new(m(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 1.0]]), Some(c.to_vec()), Some(2)).unwrap()
}

#[test]
fn kernel_at_zero() {
    let k = affine_kernel_ou(&block_model(0.3, 0.2, vec![0.0; 3])).unwrap();
    assert_eq!(k.big_a(0.0).unwrap(), DenseMatrix::identity(3));
    assert_eq!(k.small_a(0.0, 0.0).unwrap(), vec![0.0; 3]);
    assert!(k.is_homogeneous());
}

#[test]
fn block_kernel_structure() {
    let k = affine_kernel_ou(&block_model(0.3, 0.2, vec![0.0; 3])).unwrap();
    let a = k.big_a(2.0).unwrap();
    assert_eq!(a[(0, 2)], 0.0);
    assert_eq!(a[(1, 2)], 0.0);
    assert_eq!(a[(2, 2)], 1.0);
    assert!((a[(0, 0)] - (-2.0f64).exp()).abs() < 1e-15);
    let v = k.small_a(0.0, 2.0).unwrap();
    assert!((v[2] - 0.6).abs() < 1e-14);
    assert_eq!(v[0], 0.0);
}

#[test]
fn scalar_ou_kernel() {
    let model = FactorModel::mv_ou(vec![1.0], m(&[&[-2.0]]), m(&[&[1.0]]), DriverSpec::standard(1), Start::At(vec![0.0])).unwrap();
    let k = affine_kernel_ou(&model).unwrap();
    assert!((k.big_a(1.0).unwrap()[(0, 0)] - (-2.0f64).exp()).abs() < 1e-15);
    let want = (1.0 - (-2.0f64).exp()) / 2.0;
    assert!((k.small_a(3.0, 4.0).unwrap()[0] - want).abs() < 1e-14);
}

#[test]
fn spot_consistency_and_closed_form() {
    let k = affine_kernel_ou(&block_model(0.3, 0.2, vec![0.0; 3])).unwrap();
    let s = sys(&[1.0, -1.0]);
    let x_t = [1.0, -1.0, 2.0];
    let f = forward_curve_affine(&s, &k, &x_t, &[0.0, 2.0], None).unwrap();
    assert_eq!(f.at(0), s.p.matvec(&x_t).unwrap());
    let e2 = (-2.0f64).exp();
    let e4 = (-4.0f64).exp();
    let want = [e2 + 2.0 + 0.6, -e4 + 2.0 + 0.6];
    for (g, w) in f.at(1).iter().zip(want) {
        assert!((g - w).abs() < 1e-13, "{g} vs {w}");
    }
}

#[test]
fn martingale_factors_are_flat() {
    let model = FactorModel::drifted_bm(vec![0.0; 2], DenseMatrix::identity(2), vec![0.0; 2]).unwrap();
    let k = affine_kernel_ou(&model).unwrap();
    let s = PricingSystem::new(DenseMatrix::identity(2), None, None).unwrap();
    let f = forward_curve_affine(&s, &k, &[0.4, -1.2], &[0.0, 1.0, 7.5], None).unwrap();
    for j in 0..3 {
        assert_eq!(f.at(j), vec![0.4, -1.2]);
    }
}

#[test]
fn forward_matches_monte_carlo() {
    let x_t = vec![1.0, -1.0, 2.0];
    let model = block_model(0.3, 0.2, x_t.clone());
    let k = affine_kernel_ou(&model).unwrap();
    let s = sys(&[1.0, -1.0]);
    let f = forward_curve_affine(&s, &k, &x_t, &[2.0], None).unwrap();
    let e = simulate(&model, &TimeGrid::new(vec![2.0]).unwrap(), 40_000, 21).unwrap();
    for i in 0..2 {
        let (mean, se) = mean_with_stderr(&e.project(0, s.p.row(i)).unwrap());
        assert!((mean - f.values[i][0]).abs() < 3.0 * se, "{i}: {mean} vs {}", f.values[i][0]);
    }
}

#[test]
fn tower_property() {
    // F(t, T) for T = 3 observed at t = 1 and t = 2 has the same mean.
    let x0 = vec![0.5, 0.0, 1.0];
    let model = block_model(0.3, 0.2, x0.clone());
    let k = affine_kernel_ou(&model).unwrap();
    let s = sys(&[1.0, -1.0]);
    let e = simulate(&model, &TimeGrid::new(vec![1.0, 2.0]).unwrap(), 40_000, 5).unwrap();
    let fwd = |ti: usize, t: f64| -> Vec<f64> {
        (0..e.n_paths)
            .map(|p| forward_curve_affine(&s, &k, e.at(p, ti), &[3.0 - t], None).unwrap().values[0][0])
            .collect()
    };
    let (m1, s1) = mean_with_stderr(&fwd(0, 1.0));
    let (m2, s2) = mean_with_stderr(&fwd(1, 2.0));
    let f0 = forward_curve_affine(&s, &k, &x0, &[3.0], None).unwrap().values[0][0];
    assert!((m1 - m2).abs() < 3.0 * (s1 * s1 + s2 * s2).sqrt());
    assert!((m1 - f0).abs() < 3.0 * s1);
}

#[test]
fn forward_cointegration_checks() {
    let k = affine_kernel_ou(&block_model(0.3, 0.2, vec![0.0; 3])).unwrap();
    for x in [0.0, 0.5, 3.0, 20.0] {
        assert_eq!(forward_coint_check(&sys(&[1.0, -1.0]), &k, x).unwrap().verdict, ForwardCointVerdict::Yes);
    }
    let mixing = AffineKernel::custom(
        3,
        Arc::new(|x| {
            let mut a = DenseMatrix::identity(3);
            a[(0, 2)] = x;
            a
        }),
        Arc::new(|_| vec![0.0; 3]),
    )
    .unwrap();
    assert_eq!(forward_coint_check(&sys(&[1.0, -1.0]), &mixing, 1.0).unwrap().verdict, ForwardCointVerdict::No);
    for c in [[1.0, -1.0], [1.0, 0.0], [0.0, 2.0]] {
        let s = sys(&c);
        let want = is_coint_pair(&s.p, &c, 2).unwrap().yes;
        let got = forward_coint_check(&s, &mixing, 0.0).unwrap().verdict == ForwardCointVerdict::Yes;
        assert_eq!(want, got);
    }
    let seasonal = affine_kernel_ou_time_dependent(
        &block_model(0.3, 0.2, vec![0.0; 3]),
        Arc::new(|s: f64| vec![0.0, 0.0, s.sin()]),
    )
    .unwrap();
    assert_eq!(
        forward_coint_check(&sys(&[1.0, -1.0]), &seasonal, 1.0).unwrap().verdict,
        ForwardCointVerdict::NotApplicable
    );
}

#[test]
fn detrending() {
    let model = block_model(0.3, 0.2, vec![0.0; 3]);
    let s = sys(&[1.0, -1.0]);
    let x_t = [0.2, 0.7, -1.0];
    let grid = [0.0, 0.5, 2.0];
    let k = affine_kernel_ou(&model).unwrap();
    let bar = detrended_curve(&s, &k, &x_t, &grid, 0.0).unwrap();
    for (j, x) in grid.iter().enumerate() {
        assert_eq!(bar.at(j), s.p.matvec(&k.big_a(*x).unwrap().matvec(&x_t).unwrap()).unwrap());
    }
    let sin_k = affine_kernel_ou_time_dependent(&model, Arc::new(|s: f64| vec![0.0, 0.0, s.sin()])).unwrap();
    let cos_k = affine_kernel_ou_time_dependent(&model, Arc::new(|s: f64| vec![0.0, 0.0, 3.0 * s.cos()])).unwrap();
    let b1 = detrended_curve(&s, &sin_k, &x_t, &grid, 1.3).unwrap();
    let b2 = detrended_curve(&s, &cos_k, &x_t, &grid, 1.3).unwrap();
    assert_eq!(b1.values, b2.values);
    assert_eq!(b1.values, bar.values);
    assert_eq!(b1.at(0), s.p.matvec(&x_t).unwrap());

    assert!(forward_curve_affine(&s, &sin_k, &x_t, &grid, None).is_err());
    let f = forward_curve_affine(&s, &sin_k, &x_t, &grid, Some(1.3)).unwrap();
    let want = 1.3f64.cos() - 3.3f64.cos();
    let got = f.values[0][2] - bar.values[0][2];
    assert!((got - want).abs() < 1e-9, "{got} vs {want}");
}

fn closed_form_a(c: &DenseMatrix, mu: &[f64], q: &DenseMatrix, tau: f64, z: &[f64]) -> f64 {
    dot(z, &integrate_mat_exp(c, mu, tau).unwrap()) + 0.5 * transition_covariance(c, q, tau).unwrap().quad_form(z)
}

#[test]
fn exp_affine_examples() {
    let ou = FactorModel::mv_ou(vec![0.0], m(&[&[-1.0]]), m(&[&[1.0]]), DriverSpec::standard(1), Start::At(vec![0.0])).unwrap();
    let k = exp_affine_kernel_ou(&ou).unwrap();
    assert_eq!(k.alpha(0.0, &[0.7]).unwrap(), vec![0.7]);
    assert_eq!(k.a_scalar(0.0, &[0.7]).unwrap(), 0.0);
    // Lognormal mean: half the variance integral ∫ e^{-2s} ds.
    assert!((k.a_scalar(40.0, &[1.0]).unwrap() - 0.25).abs() < 1e-9);
    assert_eq!(k.alpha(2.0, &[0.0]).unwrap(), vec![0.0]);
    assert_eq!(k.a_scalar(2.0, &[0.0]).unwrap(), 0.0);
}

#[test]
fn exp_affine_rejects_jumps() {
    let jumps = JumpSpec {
        rate: 1.0,
        mean: vec![0.1],
        cov: m(&[&[0.1]]),
    };
    let driver = DriverSpec::compound_poisson(m(&[&[1.0]]), jumps).unwrap();
    let ou = FactorModel::mv_ou(vec![0.0], m(&[&[-1.0]]), m(&[&[1.0]]), driver, Start::At(vec![0.0])).unwrap();
    assert!(matches!(exp_affine_kernel_ou(&ou), Err(Error::Unsupported(_))));
}

#[test]
fn geometric_spot_and_monte_carlo() {
    let x_t = vec![0.1, -0.2, 0.3];
    let model = block_model(0.05, 0.2, x_t.clone());
    let k = exp_affine_kernel_ou(&model).unwrap();
    let s = sys(&[1.0, -1.0]);
    let g0 = geometric_forward(&s, &k, &x_t, 0.0).unwrap();
    let spot = s.p.matvec(&x_t).unwrap();
    assert_eq!(g0.log_forward, spot);
    assert_eq!(g0.forward, spot.iter().map(|v| v.exp()).collect::<Vec<_>>());

    let g = geometric_forward(&s, &k, &x_t, 1.0).unwrap();
    let e = simulate(&model, &TimeGrid::new(vec![1.0]).unwrap(), 40_000, 8).unwrap();
    for i in 0..2 {
        let vals: Vec<f64> = e.project(0, s.p.row(i)).unwrap().iter().map(|v| v.exp()).collect();
        let (mean, se) = mean_with_stderr(&vals);
        assert!((mean - g.forward[i]).abs() < 3.0 * se, "{i}: {mean} vs {}", g.forward[i]);
    }
}

#[test]
fn log_forwards_inherit_cointegration() {
    let k = exp_affine_kernel_ou(&block_model(0.3, 0.2, vec![0.0; 3])).unwrap();
    let s = sys(&[1.0, -1.0]);
    let c = [1.0, -1.0];
    let base = [0.3, -0.4, 1.0];
    let moved = [0.3, -0.4, 6.0];
    let a = geometric_forward(&s, &k, &base, 1.5).unwrap().log_forward;
    let b = geometric_forward(&s, &k, &moved, 1.5).unwrap().log_forward;
    assert!((dot(&c, &a) - dot(&c, &b)).abs() < 1e-12);
}

fn unit_ls() -> LsKernel {
    LsKernel::new(KernelFn::exponential(1.0).unwrap(), DriverSpec::standard(1), true).unwrap()
}

#[test]
fn ls_drift_gaussian() {
    let s = PricingSystem::new(m(&[&[1.0]]), None, Some(1)).unwrap();
    let tail = LevyTail::new(vec![], DriverSpec::standard(0)).unwrap();
    for x in [0.1, 1.0, 5.0] {
        let h = ls_forward_drift(&s, &unit_ls(), &tail, x, true).unwrap();
        let want = (1.0 - (-2.0 * x).exp()) / 4.0;
        assert!((h[0] - want).abs() < 1e-8, "x {x}: {} vs {want}", h[0]);
    }
    let f = ls_forward_log(&s, &unit_ls(), &tail, 0.0, &[0.37], &[], true).unwrap();
    assert_eq!(f.h, vec![0.0]);
    assert_eq!(f.log_forward, vec![0.37]);
    assert!(matches!(ls_forward_log(&s, &unit_ls(), &tail, 1.0, &[0.0], &[], false), Err(Error::Precondition(_))));
}

/// Composite Gauss-Legendre with 5 nodes per panel.
fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let nodes = [
        (0.0, 128.0 / 225.0),
        (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
        (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
        (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
        (0.906_179_845_938_664, 0.236_926_885_056_189_1),
    ];
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let mid = a + (p as f64 + 0.5) * h;
            nodes.iter().map(|(x, w)| w * f(mid + 0.5 * h * x)).sum::<f64>() * 0.5 * h
        })
        .sum()
}

#[test]
fn ls_drift_compound_poisson() {
    let (rate, jm, jv, bv) = (1.5, 0.2, 0.09, 0.5);
    let jumps = JumpSpec {
        rate,
        mean: vec![jm],
        cov: m(&[&[jv]]),
    };
    let driver = DriverSpec::compound_poisson(m(&[&[bv]]), jumps).unwrap();
    let ls = LsKernel::new(KernelFn::exponential(0.7).unwrap(), driver, true).unwrap();
    let tail_driver = DriverSpec::brownian(m(&[&[0.04]])).unwrap();
    let tail = LevyTail::new(vec![0.01], tail_driver).unwrap();
    let s = PricingSystem::new(m(&[&[1.0, 0.5], &[2.0, -1.0]]), None, Some(1)).unwrap();
    let kappa = |u: f64| 0.5 * bv * u * u + rate * ((jm * u + 0.5 * jv * u * u).exp() - 1.0 - jm * u);
    for x in [0.1, 1.0, 5.0] {
        let h = ls_forward_drift(&s, &ls, &tail, x, true).unwrap();
        for (i, (pm, ph)) in [(1.0, 0.5), (2.0, -1.0)].iter().enumerate() {
            let head = gauss_legendre(|u| kappa(pm * (-0.7 * u).exp()), 0.0, x, 200);
            let want = head + x * (0.01 * ph + 0.5 * 0.04 * ph * ph);
            assert!((h[i] - want).abs() < 1e-8, "x {x} i {i}: {} vs {want}", h[i]);
        }
    }
}

#[test]
fn ls_drift_domain_error() {
    let jumps = JumpSpec {
        rate: 1.0,
        mean: vec![800.0],
        cov: m(&[&[1.0]]),
    };
    let driver = DriverSpec::compound_poisson(m(&[&[1.0]]), jumps).unwrap();
    let ls = LsKernel::new(KernelFn::exponential(1.0).unwrap(), driver, true).unwrap();
    let s = PricingSystem::new(m(&[&[1.0]]), None, Some(1)).unwrap();
    let tail = LevyTail::new(vec![], DriverSpec::standard(0)).unwrap();
    assert!(matches!(ls_forward_drift(&s, &ls, &tail, 1.0, true), Err(Error::Domain(_))));
}

#[test]
fn ls_cointegrated_log_forward() {
    // P^T c loads only the LS block, so c^T ln f ignores the Levy state.
    let tail = LevyTail::new(vec![0.2], DriverSpec::standard(1)).unwrap();
    let s = PricingSystem::new(m(&[&[1.0, 1.0], &[2.0, 1.0]]), Some(vec![1.0, -1.0]), Some(1)).unwrap();
    let c = [1.0, -1.0];
    let a = ls_forward_log(&s, &unit_ls(), &tail, 0.8, &[0.3], &[0.0], true).unwrap();
    let b = ls_forward_log(&s, &unit_ls(), &tail, 0.8, &[0.3], &[9.0], true).unwrap();
    assert!((dot(&c, &a.log_forward) - dot(&c, &b.log_forward)).abs() < 1e-12);
    assert!((dot(&c, &a.log_forward) - (-0.3 + dot(&c, &a.h))).abs() < 1e-12);
}

#[test]
fn curve_csv() {
    let k = affine_kernel_ou(&block_model(0.3, 0.2, vec![0.0; 3])).unwrap();
    let f = forward_curve_affine(&sys(&[1.0, -1.0]), &k, &[0.0; 3], &[0.0, 1.0], None).unwrap();
    let mut buf = Vec::new();
    f.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), "x,f1,f2");
    assert_eq!(text.lines().count(), 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn spot_consistency(x1 in -5.0f64..5.0, x2 in -5.0f64..5.0, x3 in -5.0f64..5.0, mu in -1.0f64..1.0) {
        let model = block_model(mu, 0.2, vec![0.0; 3]);
        let s = sys(&[1.0, -1.0]);
        let x_t = [x1, x2, x3];
        let spot = s.p.matvec(&x_t).unwrap();
        let f = forward_curve_affine(&s, &affine_kernel_ou(&model).unwrap(), &x_t, &[0.0], None).unwrap();
        prop_assert_eq!(f.at(0), spot.clone());
        let g = geometric_forward(&s, &exp_affine_kernel_ou(&model).unwrap(), &x_t, 0.0).unwrap();
        prop_assert_eq!(g.log_forward, spot);
    }

    #[test]
    fn exp_affine_matches_closed_form(
        a in 0.3f64..3.0, b in 0.3f64..3.0, off in -0.5f64..0.5,
        z1 in -1.0f64..1.0, z2 in -1.0f64..1.0, tau in 0.01f64..6.0,
    ) {
        let c = m(&[&[-a, off], &[0.0, -b]]);
        let mu = vec![0.2, -0.1];
        let sigma = m(&[&[1.0, 0.0], &[0.3, 0.8]]);
        let w = m(&[&[1.0, 0.4], &[0.4, 1.0]]);
        let k = ExpAffineKernel::new(c.clone(), mu.clone(), &sigma, &w).unwrap();
        let q = sigma.matmul(&w).unwrap().matmul(&sigma.transpose()).unwrap();
        let z = [z1, z2];
        let want = closed_form_a(&c, &mu, &q, tau, &z);
        prop_assert!((k.a_scalar(tau, &z).unwrap() - want).abs() < 1e-8);
    }

    #[test]
    fn geometric_small_noise_limit(x1 in -1.0f64..1.0, x3 in -1.0f64..1.0, x in 0.0f64..3.0) {
        let model = block_model(0.3, 1e-7, vec![0.0; 3]);
        let quiet = FactorModel::mv_ou(
            vec![0.0, 0.0, 0.3],
            DenseMatrix::from_diag(&[-1.0, -2.0, 0.0]),
            DenseMatrix::from_diag(&[1e-7, 1e-7, 1e-7]),
            DriverSpec::standard(3),
            Start::At(vec![0.0; 3]),
        ).unwrap();
        let s = sys(&[1.0, -1.0]);
        let x_t = [x1, 0.5, x3];
        let lin = forward_curve_affine(&s, &affine_kernel_ou(&model).unwrap(), &x_t, &[x], None).unwrap();
        let g = geometric_forward(&s, &exp_affine_kernel_ou(&quiet).unwrap(), &x_t, x).unwrap();
        for i in 0..2 {
            prop_assert!((g.log_forward[i] - lin.values[i][0]).abs() < 1e-10);
        }
    }
}
