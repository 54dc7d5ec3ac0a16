use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::fem::{kinetic_energy, norms, FeField};
use crate::mesh::{generate_annulus, MeshHierarchy};

fn disc(level: usize) -> Discretization {
    let h = MeshHierarchy::new(generate_annulus(20, 18, 1.0, 0.1).unwrap(), level).unwrap();
    Discretization::new(Arc::new(h.level(level).clone())).unwrap()
}

fn polygon_annulus_area() -> f64 {
    let tau = std::f64::consts::TAU;
    10.0 * (tau / 20.0).sin() - 9.0 * (tau / 18.0).sin() * 0.01
}

fn exponential_record(times: &[f64], f: impl Fn(f64) -> f64) -> RunRecord {
    let mut r = RunRecord::new(1e-11, 0);
    for &t in times {
        r.push(t, 1.0, f(t), 2.0 * f(t));
    }
    r
}

fn grid(n: usize, dt: f64) -> Vec<f64> {
    (0..n).map(|i| i as f64 * dt).collect()
}

#[test]
fn grashof_trivial_cases() {
    let d = disc(0);
    assert_eq!(grashof(&d, &|_| [0.0, 0.0], 0.1, 5.0).unwrap(), 0.0);
    // constant force c has norm c sqrt(area)
    let (nu, lambda1) = (0.2, 7.0);
    let c = nu * nu * lambda1 / polygon_annulus_area().sqrt();
    let g = grashof(&d, &|_| [0.0, c], nu, lambda1).unwrap();
    assert!((g - 1.0).abs() < 1e-12, "{g}");
    assert!(grashof(&d, &|_| [1.0, 0.0], 0.0, 1.0).is_err());
    assert!(grashof(&d, &|_| [1.0, 0.0], 1.0, -1.0).is_err());
}

#[test]
fn force_norm_of_polynomial_field() {
    // |(x, y)|^2 = r^2 over the polygonal annulus: sum over triangles is exact
    // for a quadratic integrand, compared with the vertex-formula polygon moment
    let d = disc(0);
    let got = force_l2_norm(&d, &|p| [p[0], p[1]]).powi(2);
    let moment = |n: usize, r: f64| {
        // polar moment of a regular n-gon with circumradius r
        let a = std::f64::consts::TAU / n as f64;
        n as f64 * r.powi(4) * a.sin() * (2.0 + a.cos()) / 12.0
    };
    let want = moment(20, 1.0) - moment(18, 0.1);
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn grashof_scales_inversely_with_nu_squared(nu in 1e-3f64..1.0, alpha in 0.1f64..10.0, lambda1 in 0.5f64..50.0) {
        let g1 = grashof_from_norm(3.0, nu, lambda1).unwrap();
        let g2 = grashof_from_norm(3.0, alpha * nu, lambda1).unwrap();
        prop_assert!((g2 - g1 / (alpha * alpha)).abs() <= 1e-12 * g1 / (alpha * alpha));
    }

    #[test]
    fn decay_fit_is_scale_invariant(sigma in -1.0f64..3.0, scale in 1e-3f64..1e3) {
        let t = grid(40, 0.05);
        let a = exponential_record(&t, |s| (-sigma * s).exp());
        let b = exponential_record(&t, |s| scale * (-sigma * s).exp());
        let fa = fit_decay_rate(&a, (0.0, 10.0)).unwrap();
        let fb = fit_decay_rate(&b, (0.0, 10.0)).unwrap();
        prop_assert!((fa.sigma - sigma).abs() < 1e-9);
        prop_assert!((fa.sigma - fb.sigma).abs() < 1e-9);
    }
}

#[test]
fn decay_fit_of_exact_exponential() {
    let t = grid(101, 0.01);
    let rec = exponential_record(&t, |s| 3.0 * (-2.0 * s).exp());
    let fit = fit_decay_rate(&rec, (0.0, 1.0)).unwrap();
    assert!((fit.sigma - 2.0).abs() < 1e-8, "{}", fit.sigma);
    assert!(fit.residual < 1e-12);
    assert_eq!((fit.used, fit.excluded), (101, 0));

    let flat = exponential_record(&t, |_| 0.25);
    assert!(fit_decay_rate(&flat, (0.0, 1.0)).unwrap().sigma.abs() < 1e-12);
}

#[test]
fn decay_fit_excludes_round_off_floor() {
    let t = grid(30, 0.1);
    // floor at sample i is 1e-12 i; samples from index 20 on sit below it
    let rec = exponential_record(&t, |s| if s < 1.95 { (-s).exp() } else { 1e-13 });
    let fit = fit_decay_rate(&rec, (0.0, 3.0)).unwrap();
    assert_eq!((fit.used, fit.excluded), (20, 10));
    assert!((fit.sigma - 1.0).abs() < 1e-9);

    let mut zeros = exponential_record(&grid(12, 0.1), |s| (-s).exp());
    zeros.l2_error[3] = 0.0;
    zeros.l2_error[7] = 0.0;
    match fit_decay_rate(&zeros, (0.0, 2.0)) {
        Err(AnalysisError::InsufficientSamples { found: 10, excluded: 2, .. }) => panic!("ten usable samples suffice"),
        Ok(fit) => assert_eq!((fit.used, fit.excluded), (10, 2)),
        Err(e) => panic!("{e}"),
    }
    zeros.l2_error[9] = 0.0;
    assert!(matches!(
        fit_decay_rate(&zeros, (0.0, 2.0)),
        Err(AnalysisError::InsufficientSamples { found: 9, excluded: 3, .. })
    ));
}

#[test]
fn mu_range_hand_examples() {
    let fine = mu_range(MuRangeInput::unit_constants(1, 1.0 / 64.0, 1.0 / 512.0, 1.0, 1.0, 1.0)).unwrap();
    let lower = 2.0 * (std::f64::consts::E + 1.0);
    assert!((fine.lower_bound - lower).abs() <= 1e-9 * lower);
    assert!((fine.lower_bound - 7.437).abs() < 1e-3);
    assert!((fine.upper_bound - 64.0).abs() <= 1e-9 * 64.0);
    assert!(fine.feasible);

    let coarse = mu_range(MuRangeInput::unit_constants(1, 1.0 / 8.0, 1.0 / 64.0, 1.0, 1.0, 1.0)).unwrap();
    assert!((coarse.upper_bound - 1.0).abs() <= 1e-9);
    assert!(!coarse.feasible);

    // alternative route: 4 h^-2 = 4 * 512^2 far above 64
    assert!((fine.alt_lower_bound - 4.0 * 512.0 * 512.0).abs() < 1e-6);
    assert!(!fine.alt_achievable);
    assert!(fine.to_text().contains("alt_route: clearly not achievable"));
    assert!(fine.to_text().contains("feasible: true"));

    let calm = mu_range(MuRangeInput::unit_constants(2, 0.5, 0.1, 1.0, 1.0, 0.0)).unwrap();
    assert_eq!(calm.lower_bound, 0.0);
    assert!(calm.feasible && calm.alt_achievable);
}

#[test]
fn mu_range_rejects_bad_inputs() {
    let ok = MuRangeInput::unit_constants(1, 0.25, 0.125, 1.0, 1.0, 1.0);
    assert!(mu_range(ok).is_ok());
    assert!(mu_range(MuRangeInput { big_h: 0.1, h: 0.2, ..ok }).is_err());
    assert!(mu_range(MuRangeInput { nu: 0.0, ..ok }).is_err());
    assert!(mu_range(MuRangeInput { lambda1: -1.0, ..ok }).is_err());
    assert!(mu_range(MuRangeInput { c0: 0.0, ..ok }).is_err());
    assert!(mu_range(MuRangeInput { grashof: -1.0, ..ok }).is_err());
    assert!(mu_range(MuRangeInput { k: 0, ..ok }).is_err());
}

#[test]
fn mu_range_is_monotone_on_a_grid() {
    let hs = [1.0 / 4.0, 1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let gs = [0.1, 0.3, 0.5, 0.8, 1.0];
    for k in 1..=2 {
        for &g in &gs {
            // finer data (smaller H) with h fixed raises the upper bound
            let ups: Vec<f64> = hs
                .iter()
                .map(|&big_h| mu_range(MuRangeInput::unit_constants(k, big_h, 1.0 / 128.0, 0.5, 2.0, g)).unwrap().upper_bound)
                .collect();
            assert!(ups.windows(2).all(|w| w[1] > w[0]), "{ups:?}");
        }
        for &big_h in &hs {
            let lows: Vec<f64> = gs
                .iter()
                .map(|&g| mu_range(MuRangeInput::unit_constants(k, big_h, 1.0 / 128.0, 0.5, 2.0, g)).unwrap().lower_bound)
                .collect();
            assert!(lows.windows(2).all(|w| w[1] > w[0]), "{lows:?}");
        }
    }
}

#[test]
fn compare_identical_and_scaled_records() {
    let t = grid(50, 0.1);
    let mut a = exponential_record(&t, |s| 2.0 * (-1.5 * s).exp());
    a.sync_time = Some(4.9);
    let same = compare_runs(&a, &a.clone()).unwrap();
    assert_eq!(same.sync_ratio, Some(1.0));
    assert_eq!(same.rate_ratio, Some(1.0));
    assert_eq!(same.final_ratio, 1.0);
    assert!(same.a_faster_or_equal());

    let mut b = a.clone();
    b.sync_time = None;
    b.l2_error.iter_mut().for_each(|e| *e *= 10.0);
    a.sync_time = None;
    let c = compare_runs(&a, &b).unwrap();
    assert!((c.rate_ratio.unwrap() - 1.0).abs() < 1e-9);
    assert!((c.final_ratio - 0.1).abs() < 1e-12);
    assert!(c.a_faster_or_equal());
    assert!(!compare_runs(&b, &a).unwrap().a_faster_or_equal());
    let text = c.to_text();
    assert!(text.lines().all(|l| l.contains(": ")));
    assert!(text.contains("sync_ratio: none"));
}

#[test]
fn compare_uses_common_prefix_and_rejects_mismatch() {
    let a = exponential_record(&grid(50, 0.1), |s| (-s).exp());
    let mut b = exponential_record(&grid(30, 0.1), |s| (-2.0 * s).exp());
    b.sync_time = Some(2.9);
    let c = compare_runs(&a, &b).unwrap();
    assert!((c.common_window.1 - 2.9).abs() < 1e-12);
    assert!(!c.a_faster_or_equal());
    assert!((c.rate_ratio.unwrap() - 0.5).abs() < 1e-9);

    let shifted = exponential_record(&grid(30, 0.11), |s| (-s).exp());
    assert!(matches!(compare_runs(&a, &shifted), Err(AnalysisError::MismatchedTimes(1))));
}

#[test]
fn record_csv_round_trip() {
    let rec = exponential_record(&grid(7, 0.1), |s| (-s).exp() / 3.0);
    let mut buf = Vec::new();
    rec.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert_eq!(text.lines().next(), Some(RECORD_HEADER));
    let back = RunRecord::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.times, rec.times);
    assert_eq!(back.l2_error, rec.l2_error);
    assert_eq!(back.h1_error, rec.h1_error);

    let bad = text.replacen("0.1,", "0.0,", 1);
    assert!(RunRecord::read_csv(bad.as_bytes()).is_err());
    assert!(matches!(
        RunRecord::read_csv("t,ke,l2_err,h1_err\n0,1,x,2\n".as_bytes()),
        Err(AnalysisError::Parse { line: 2, .. })
    ));
}

#[test]
fn kinetic_energy_matches_quadrature_norm() {
    let d = disc(1);
    let f = FeField::interpolate_vector(d.velocity_space().clone(), |p| [p[1].sin() * p[0], (2.0 * p[0]).cos()]);
    let ke = kinetic_energy(d.mass(), f.coeffs());
    let l2 = norms(&f).l2;
    assert!((ke - 0.5 * l2 * l2).abs() <= 1e-12 * ke, "{ke} vs {}", 0.5 * l2 * l2);
}

#[test]
fn lambda1_is_positive_consistent_and_settles() {
    // Taylor-Hood discretely divergence-free subspaces are not nested, so the
    // estimates need not decrease; they must converge at a super-linear rate.
    let mut values = Vec::new();
    for level in 0..4 {
        let d = disc(level);
        let est = estimate_lambda1(&d, 500, 1e-6).unwrap();
        assert!(est.lambda > 0.0);
        assert!(est.residual <= 1e-6);
        let w = est.eigenfield.coeffs();
        let rq = d.stiffness().dot(w, w) / d.mass().dot(w, w);
        assert!((rq - est.lambda).abs() <= 1e-8 * est.lambda);
        assert!(d.divergence_defect(w) < 1e-8);
        values.push(est.lambda);
    }
    let gaps: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    assert!(gaps.windows(2).all(|g| g[1] < g[0] / 3.0), "{values:?}");
}

#[test]
fn lambda1_reports_nonconvergence() {
    let d = disc(0);
    assert!(matches!(estimate_lambda1(&d, 1, 1e-14), Err(AnalysisError::NoConvergence { iterations: 1, .. })));
}
