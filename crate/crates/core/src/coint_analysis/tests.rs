// SPDX-License-Identifier: Apache-2.0

use proptest::prelude::*;

use super::*;
use crate::factor_models::{DriverSpec, JumpSpec, Start};

fn m(rows: &[&[f64]]) -> DenseMatrix {
    DenseMatrix::from_rows(rows).unwrap()
}

fn paper_model(mu3: f64, sigma: f64) -> FactorModel {
    FactorModel::mv_ou(
        vec![0.0, 0.0, mu3],
        DenseMatrix::from_diag(&[-1.0, -2.0, 0.0]),
        DenseMatrix::from_diag(&[1.0, 2.0, sigma]),
        DriverSpec::brownian(m(&[&[1.0, 0.5, 0.0], &[0.5, 1.0, 0.0], &[0.0, 0.0, 1.0]])).unwrap(),
        Start::At(vec![0.0; 3]),
    )
    .unwrap()
}

fn paper_system(c: &[f64]) -> PricingSystem {
    PricingSystem::new(m(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 1.0]]), Some(c.to_vec()), Some(2)).unwrap()
}

fn opts(seed: u64) -> EmpiricalOptions {
    EmpiricalOptions {
        n_paths: 4000,
        ..EmpiricalOptions::new(seed)
    }
}

#[test]
fn paper_pair_is_analytic() {
    let r = classify(&paper_model(0.3, 0.2), &paper_system(&[1.0, -1.0]), &opts(1)).unwrap();
    assert_eq!(r.verdict, Verdict::CointegratedAnalytic);
    assert!(r.details.cf.is_none());
}

#[test]
fn drift_loaded_pairs_are_rejected() {
    for c in [[1.0, 1.0], [1.0, 0.0], [0.0, 1.0]] {
        let r = classify(&paper_model(0.3, 0.2), &paper_system(&c), &opts(1)).unwrap();
        assert_eq!(r.verdict, Verdict::NotCointegrated, "c = {c:?}");
    }
    let r = classify(&paper_model(0.3, 0.2), &paper_system(&[1.0, 1.0]), &opts(1)).unwrap();
    assert!((r.details.drift_loading - 0.6).abs() < 1e-15);
}

#[test]
fn driftless_random_walk_fails_empirically() {
    let r = classify(&paper_model(0.0, 0.5), &paper_system(&[1.0, 0.0]), &opts(2)).unwrap();
    assert_eq!(r.verdict, Verdict::NotCointegrated);
    let cf = r.details.cf.unwrap();
    assert!(cf.d() > cf.d_star());
}

/// X1 stationary OU, X2 and X3 OU around a common linear trend.
fn trend_model() -> FactorModel {
    FactorModel::mv_ou(
        vec![0.0; 3],
        DenseMatrix::from_diag(&[-1.0, -0.5, -0.8]),
        DenseMatrix::from_diag(&[1.0, 0.7, 0.4]),
        DriverSpec::brownian(m(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.3], &[0.0, 0.3, 1.0]])).unwrap(),
        Start::At(vec![0.0; 3]),
    )
    .unwrap()
    .with_trend(vec![0.0, 0.4, 0.4])
    .unwrap()
}

#[test]
fn common_trend_direction_is_empirical() {
    let sys = PricingSystem::new(DenseMatrix::identity(3), Some(vec![0.0, 1.0, -1.0]), Some(1))
        .unwrap()
        .with_declared_directions(vec![vec![0.0, 1.0, -1.0]])
        .unwrap();
    let r = classify(&trend_model(), &sys, &opts(3)).unwrap();
    assert!(!r.details.coint_pair);
    assert!(r.details.in_declared_span);
    assert_eq!(r.details.drift_loading, 0.0);
    assert_eq!(r.verdict, Verdict::CointegratedEmpirical);

    let sys2 = sys.with_c(vec![0.0, 1.0, 0.0]).unwrap();
    let r2 = classify(&trend_model(), &sys2, &opts(3)).unwrap();
    assert_eq!(r2.verdict, Verdict::NotCointegrated);
}

#[test]
fn empirical_examples() {
    let model = paper_model(0.3, 0.2);
    let z = default_z_grid();
    let s = empirical_cf_convergence(&model, &paper_system(&[1.0, -1.0]), 8.0, 16.0, &z, 5000, 500, 7).unwrap();
    assert!(s.is_stationary(), "D {} D* {}", s.d(), s.d_star());
    let s = empirical_cf_convergence(&model, &paper_system(&[1.0, 0.0]), 8.0, 16.0, &z, 5000, 500, 7).unwrap();
    assert!(!s.is_stationary(), "D {} D* {}", s.d(), s.d_star());
    let s = empirical_cf_convergence(&model, &paper_system(&[0.0, 0.0]), 8.0, 16.0, &z, 1000, 100, 7).unwrap();
    assert_eq!(s.d(), 0.0);
    assert!(s.is_stationary());
}

#[test]
fn empirical_cf_matches_limit() {
    // Limit CF of (1,-1)X is exp(-z^2 v / 2) with v = 5/6.
    let model = paper_model(0.3, 0.2);
    let z = default_z_grid();
    let s = empirical_cf_convergence(&model, &paper_system(&[1.0, -1.0]), 8.0, 16.0, &z, 20_000, 10, 9).unwrap();
    for (zi, v) in z.iter().zip(&s.test.cf2) {
        let want = (-0.5 * zi * zi * 5.0 / 6.0).exp();
        assert!((v.re - want).abs() < 0.03 && v.im.abs() < 0.03, "z {zi}: {v} vs {want}");
    }
}

#[test]
fn empirical_errors() {
    let model = paper_model(0.3, 0.2);
    let sys = paper_system(&[1.0, -1.0]);
    let z = default_z_grid();
    assert!(matches!(
        empirical_cf_convergence(&model, &sys, 8.0, 16.0, &z, 999, 10, 0),
        Err(Error::InsufficientSamples { .. })
    ));
    assert!(empirical_cf_convergence(&model, &sys, 16.0, 8.0, &z, 1000, 10, 0).is_err());
    assert!(empirical_cf_convergence(&model, &sys, 8.0, 16.0, &[0.1, 0.2], 1000, 10, 0).is_err());
    let no_m = PricingSystem::new(sys.p.clone(), Some(vec![1.0, -1.0]), None).unwrap();
    assert!(matches!(classify(&model, &no_m, &opts(0)), Err(Error::Precondition(_))));
}

#[test]
fn limiting_law_examples() {
    let model = paper_model(0.3, 0.2);
    let law = limiting_law(&model, &paper_system(&[1.0, -1.0])).unwrap().unwrap();
    assert!((law.variance - 5.0 / 6.0).abs() < 1e-10);
    assert!(law.mean.abs() < 1e-14 && law.gaussian);

    let zero = limiting_law(&model, &paper_system(&[0.0, 0.0])).unwrap().unwrap();
    assert_eq!((zero.mean, zero.variance), (0.0, 0.0));
    assert!(limiting_law(&model, &paper_system(&[1.0, 0.0])).unwrap().is_none());

    let (alpha, eta) = (1.5, 0.8);
    let ou = FactorModel::mv_ou(
        vec![0.0],
        m(&[&[-alpha]]),
        m(&[&[eta]]),
        DriverSpec::standard(1),
        Start::At(vec![0.0]),
    )
    .unwrap();
    let sys = PricingSystem::new(m(&[&[1.0]]), Some(vec![1.0]), Some(1)).unwrap();
    let law = limiting_law(&ou, &sys).unwrap().unwrap();
    assert!((law.variance - eta * eta / (2.0 * alpha)).abs() < 1e-12);
}

#[test]
fn jump_driver_reports_moments_only() {
    let jumps = JumpSpec {
        rate: 2.0,
        mean: vec![0.0],
        cov: m(&[&[0.25]]),
    };
    let driver = DriverSpec::compound_poisson(m(&[&[1.0]]), jumps).unwrap();
    let ou = FactorModel::mv_ou(vec![0.0], m(&[&[-1.0]]), m(&[&[1.0]]), driver, Start::Stationary).unwrap();
    let sys = PricingSystem::new(m(&[&[1.0]]), Some(vec![1.0]), Some(1)).unwrap();
    assert!(matches!(limiting_law(&ou, &sys), Err(Error::Unsupported(_))));
    let mo = limiting_moments(&ou, &sys).unwrap().unwrap();
    // (1 + 2 * 0.25) / 2
    assert!((mo.variance - 0.75).abs() < 1e-12);
    assert!(!mo.gaussian);
}

#[test]
fn coupled_block_is_not_separable() {
    let model = FactorModel::mv_ou(
        vec![0.0; 2],
        m(&[&[-1.0, 0.5], &[0.0, 0.0]]),
        DenseMatrix::identity(2),
        DriverSpec::standard(2),
        Start::At(vec![0.0; 2]),
    )
    .unwrap();
    assert!(leading_block(&model, 1).is_none());
    let lower = FactorModel::mv_ou(
        vec![0.0; 2],
        m(&[&[-1.0, 0.0], &[0.5, 0.0]]),
        DenseMatrix::identity(2),
        DriverSpec::standard(2),
        Start::At(vec![0.0; 2]),
    )
    .unwrap();
    assert_eq!(leading_block(&lower, 1).unwrap().dim(), 1);
}

#[test]
fn two_sample_basics() {
    let xs: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin()).collect();
    let t = cf_two_sample_test(&xs, &xs, &default_z_grid(), 50, 1).unwrap();
    assert_eq!(t.d, 0.0);
    assert!(t.passes());
    let again = cf_two_sample_test(&xs, &xs, &default_z_grid(), 50, 1).unwrap();
    assert_eq!(t, again);
    let shifted: Vec<f64> = xs.iter().map(|x| x + 3.0).collect();
    assert!(!cf_two_sample_test(&xs, &shifted, &default_z_grid(), 50, 1).unwrap().passes());
}

#[test]
fn report_serialization() {
    let r = classify(&paper_model(0.3, 0.2), &paper_system(&[1.0, -1.0]), &opts(1)).unwrap();
    let mut buf = Vec::new();
    r.write_text(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("verdict: cointegrated_analytic\n"));
    assert!(text.contains("coint_pair: true"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scale_equivariance(k in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0], c1 in -2.0f64..2.0) {
        let model = paper_model(0.3, 0.2);
        let c = [c1, -c1];
        let kc = [k * c1, -k * c1];
        let r = classify(&model, &paper_system(&c), &opts(0)).unwrap();
        let rk = classify(&model, &paper_system(&kc), &opts(0)).unwrap();
        prop_assert_eq!(r.verdict, rk.verdict);
        let v = limiting_law(&model, &paper_system(&c)).unwrap().unwrap().variance;
        let vk = limiting_law(&model, &paper_system(&kc)).unwrap().unwrap().variance;
        prop_assert!((vk - k * k * v).abs() <= 1e-10 * vk.abs().max(1.0));
    }

    #[test]
    fn drift_is_never_cointegrated(
        mu3 in prop_oneof![-2.0f64..-0.01, 0.01f64..2.0],
        c1 in -3.0f64..3.0,
        c2 in -3.0f64..3.0,
    ) {
        prop_assume!((c1 + c2).abs() > 1e-6);
        let r = classify(&paper_model(mu3, 0.2), &paper_system(&[c1, c2]), &opts(0)).unwrap();
        prop_assert!(r.details.drift_loading != 0.0);
        prop_assert!(!r.verdict.is_cointegrated());
    }
}
