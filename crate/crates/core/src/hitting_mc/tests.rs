use super::level_set::box_shell_weight;
use super::*;
use crate::quadrature::{integrate_with_breaks, QuadOptions};
use crate::spectral_field::{ExactFbm, FieldSample, FieldSource, Lattice, SpectralModel};
use crate::stats;
use crate::variance_model::{classify_polarity, FieldParams, Hurst, Regime};
use std::f64::consts::PI;

fn bm(d: usize) -> FieldParams {
    FieldParams::with_defaults(1, d, Hurst::rational(1, 2).unwrap(), 0.0).unwrap()
}

fn bm_source(d: usize) -> FieldSource {
    FieldSource::ExactFbm(bm(d))
}

fn unit_half() -> (Vec<f64>, Vec<f64>) {
    (vec![0.5], vec![1.0])
}

#[test]
fn brownian_alpha_matches_closed_form_through_spectral_covariance() {
    let model = SpectralModel::new(bm(1), 1.0).unwrap();
    let dec = make_decomposition(&FieldSource::Spectral(model), &[0.75], 0.5).unwrap();
    assert_eq!(dec.halvings, 0);
    assert_eq!(dec.alpha(&[0.75]).unwrap(), 1.0);
    for t in dec.grid(50) {
        let want = t[0].min(0.75) / 0.75;
        assert!((dec.alpha(&t).unwrap() - want).abs() < 1e-6, "t = {}", t[0]);
    }
    assert!(dec.alpha_min >= 0.5 && dec.alpha_max <= 1.5);
    let holder = dec.alpha_holder_exponent.unwrap();
    assert!((holder - 1.0).abs() < 0.05, "{holder}");
}

#[test]
fn rho0_is_halved_until_alpha_bounds_hold() {
    let dec = make_decomposition(&bm_source(1), &[0.1], 1.0).unwrap();
    assert!(dec.halvings > 0);
    let (lo, hi) = dec.interval();
    assert!(lo[0] > 0.0);
    // Independent 1000-point check of the reported interval.
    for i in 0..1000 {
        let t = lo[0] + (hi[0] - lo[0]) * i as f64 / 999.0;
        let a = t.min(0.1) / 0.1;
        assert!((0.5..=1.5).contains(&a), "alpha({t}) = {a}");
    }
    assert!(make_decomposition(&bm_source(1), &[0.0], 1.0).is_err());
}

fn bm_lattice(h: f64) -> Lattice {
    Lattice::new(vec![0.5], vec![1.0], h).unwrap()
}

#[test]
fn split_identities_hold_sitewise() {
    let src = bm_source(2);
    let dec = make_decomposition(&src, &[0.75], 0.5).unwrap();
    let lat = bm_lattice(2f64.powi(-8));
    let f = ExactFbm::new(&lat, &bm(2)).unwrap().sample(5).unwrap();
    let (x1, x2) = split_field(&f, &dec).unwrap();
    let plan = dec.plan(&lat).unwrap();
    assert!(x1.site_values(plan.t0_site).iter().all(|&v| v == 0.0));
    for (i, (&x, (&a, &b))) in f.values.iter().zip(x1.values.iter().zip(&x2.values)).enumerate() {
        let scale = x.abs().max(b.abs());
        assert!((a + b - x).abs() <= 4.0 * f64::EPSILON * scale, "index {i}");
    }
    let off = Decomposition { t0: vec![0.7501], ..dec };
    assert!(split_field(&f, &off).unwrap_err().to_string().contains("off-lattice"));
}

#[test]
fn brownian_x1_variance_and_independence() {
    let src = bm_source(1);
    let dec = make_decomposition(&src, &[0.75], 0.5).unwrap();
    let lat = bm_lattice(2f64.powi(-6));
    let probes: Vec<usize> = [0.5, 0.625, 0.6875, 0.875, 1.0].iter().map(|&t| ((t - 0.5) * 64.0) as usize).collect();
    let rep = independence_study(&dec, &lat, &probes, 2000, 11).unwrap();
    assert!(rep.pass, "{rep:?}");
    for p in &rep.probes {
        let t = p.t[0];
        let want = t - t.min(0.75).powi(2) / 0.75;
        assert!((p.x1_variance / want - 1.0).abs() < 0.05, "t = {t}: {} vs {want}", p.x1_variance);
    }
}

#[test]
fn x3_identity_and_stubs() {
    let src = bm_source(2);
    let dec = make_decomposition(&src, &[0.75], 0.5).unwrap();
    let lat = bm_lattice(2f64.powi(-8));
    let f = ExactFbm::new(&lat, &bm(2)).unwrap().sample(6).unwrap();
    let plan = dec.plan(&lat).unwrap();
    let z = [0.3, -0.1];
    let x3 = x3_field(&f, &plan, &z).unwrap();
    assert!(x3_identity_residual(&f, &x3, &plan, &z) < 1e-10);

    // z equal to the field at one site makes X3 hit X(t0) there.
    let site = 17;
    let z_hit = f.site_values(site).to_vec();
    let x3 = x3_field(&f, &plan, &z_hit).unwrap();
    for c in 0..2 {
        assert!((x3.value(site, c) - f.value(plan.t0_site, c)).abs() < 1e-12);
    }

    // α ≡ 1 gives X3 = z − X1.
    let flat = SplitPlan { t0_site: plan.t0_site, alpha: vec![1.0; lat.len()] };
    let x3 = x3_field(&f, &flat, &z).unwrap();
    let (x1, _) = split_with_plan(&f, &flat).unwrap();
    for s in 0..lat.len() {
        for c in 0..2 {
            assert_eq!(x3.value(s, c), z[c] - x1.value(s, c));
        }
    }
}

#[test]
fn x3_range_volume_proxy_shrinks() {
    let src = bm_source(2);
    let dec = make_decomposition(&src, &[0.75], 0.5).unwrap();
    let lat = bm_lattice(2f64.powi(-14));
    let f = ExactFbm::new(&lat, &bm(2)).unwrap().sample(7).unwrap();
    let plan = dec.plan(&lat).unwrap();
    let x3 = x3_field(&f, &plan, &[0.3, 0.0]).unwrap();
    let vols: Vec<f64> = (2..=7).map(|k| box_count(&x3, 2f64.powi(-k)).unwrap().volume).collect();
    assert!(vols.windows(2).all(|w| w[1] < w[0]), "{vols:?}");
}

fn quick_hit(d: usize, paths: usize, seed: u64) -> HitReport {
    let mut z = vec![0.0; d];
    z[0] = 0.3;
    let deltas: Vec<f64> = (4..=7).map(|k| 2f64.powi(-k)).collect();
    let (lo, hi) = unit_half();
    let exp = HitExperiment::new(bm_source(d), lo, hi, z, deltas, paths).unwrap();
    hit_probability(&exp, seed).unwrap()
}

#[test]
fn hitting_probabilities_are_nested_and_follow_regime_trends() {
    let sub = quick_hit(1, 400, 1);
    assert_eq!(sub.trend.regime, Regime::Subcritical);
    assert!(sub.points.windows(2).all(|w| w[1].prob <= w[0].prob));
    assert!(sub.trend.min_prob > 0.2 && sub.trend.plateau, "{:?}", sub.points);
    let sup = quick_hit(3, 400, 2);
    assert_eq!(sup.trend.regime, Regime::Supercritical);
    assert!(sup.points.windows(2).all(|w| w[1].prob <= w[0].prob));
    assert!(sup.points.last().unwrap().prob < sup.points[0].prob);
    let mut buf = Vec::new();
    write_hit_csv(&mut buf, &sub).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with("delta,hit_prob,ci_lo,ci_hi\n"));
}

#[test]
fn huge_delta_is_a_certain_hit() {
    let (lo, hi) = unit_half();
    let exp = HitExperiment::new(bm_source(1), lo, hi, vec![0.3], vec![100.0, 0.25], 50).unwrap();
    let rep = hit_probability(&exp, 3).unwrap();
    assert_eq!(rep.points[0].prob, 1.0);
}

#[test]
fn hitting_resolution_rule_is_enforced() {
    let e = HitExperiment::with_lattice(bm_source(1), bm_lattice(2f64.powi(-6)), vec![0.3], vec![0.25, 0.0625], 10)
        .unwrap_err();
    assert!(e.to_string().contains("resolution"), "{e}");
    assert!(HitExperiment::with_lattice(bm_source(1), bm_lattice(2f64.powi(-10)), vec![0.3], vec![0.1, 0.2], 10).is_err());
}

fn constant_field(lat: &Lattice, params: FieldParams, value: &[f64]) -> FieldSample {
    let values = (0..lat.len()).flat_map(|_| value.iter().copied()).collect();
    FieldSample::new(params, lat.clone(), value.len(), values, 0, None).unwrap()
}

#[test]
fn mu_n_stub_bounds_and_additivity() {
    let lat = bm_lattice(2f64.powi(-8));
    let z = [0.3, 0.1];
    let stub = constant_field(&lat, bm(2), &z);
    for n in [1u64, 4, 64] {
        let mu = mu_n_measure(&stub, &z, &[0.5], &[1.0], n).unwrap();
        let want = 2.0 * PI * n as f64 * 0.5;
        assert!((mu / want - 1.0).abs() < 1e-13, "{mu} vs {want}");
    }
    // Missing z by m = 0.2 everywhere.
    let miss = constant_field(&lat, bm(2), &[0.5, 0.1]);
    for n in [1u64, 16, 256] {
        let mu = mu_n_measure(&miss, &z, &[0.5], &[1.0], n).unwrap();
        let bound = 2.0 * PI * n as f64 * (-(n as f64) * 0.04 / 2.0).exp() * 0.5;
        assert!(mu <= bound * (1.0 + 1e-12));
    }
    let f = ExactFbm::new(&lat, &bm(2)).unwrap().sample(8).unwrap();
    let whole = mu_n_measure(&f, &z, &[0.5], &[1.0], 8).unwrap();
    let left = mu_n_measure(&f, &z, &[0.5], &[0.75], 8).unwrap();
    let right = mu_n_measure(&f, &z, &[0.75], &[1.0], 8).unwrap();
    assert!(whole >= 0.0 && left >= 0.0 && right >= 0.0);
    assert!((left + right - whole).abs() <= 1e-12 * whole.max(1e-300));
    assert!(mu_n_measure(&f, &z, &[0.25], &[1.0], 8).is_err());
}

#[test]
fn mu_n_expectation_brackets_the_monte_carlo_mean() {
    let src = bm_source(1);
    let (lo, hi) = unit_half();
    let ladder = [1u64, 4, 16];
    let lat = bm_lattice(mu_spacing_limit(&bm(1), 16).unwrap().log2().floor().exp2());
    let study = mu_n_study(&src, &lat, &[0.3], &lo, &hi, &ladder, 4000, 21).unwrap();
    let lower = mu_n_lower_bound(&src, &[0.3], &lo, &hi, 1.0, 1.0).unwrap();
    for (k, &n) in ladder.iter().enumerate() {
        let exact = mu_n_expectation(&src, &[0.3], &lo, &hi, n).unwrap();
        assert!(exact >= lower);
        assert!(study.means[k] >= lower, "n = {n}: {} < {lower}", study.means[k]);
        let z = (study.means[k] - exact) / study.mean_se[k];
        assert!(z.abs() < 4.0, "n = {n}: mean {} vs exact {exact} ({z} SE)", study.means[k]);
    }
}

#[test]
fn second_moment_closed_form_and_divergence_flag() {
    let b = mu_n_second_moment_bound(&bm(1), &[0.5], &[1.0]).unwrap();
    let want = 8.0 / 3.0 * 0.5f64.powf(1.5);
    assert!(!b.diverges && !b.retried);
    assert!((b.double_integral.unwrap() - want).abs() < 1e-6, "{:?}", b);

    let cases = [
        (1, 1, 0.5, 0.0),
        (1, 2, 0.5, 0.0),
        (1, 2, 0.5, 0.5),
        (1, 2, 0.5, 0.75),
        (1, 3, 0.5, 0.0),
        (2, 3, 0.5, 0.0),
        (2, 4, 0.5, 0.2),
        (2, 4, 0.5, 0.4),
    ];
    for (n, d, h, g) in cases {
        let p = FieldParams::new(n, d, Hurst::float(h).unwrap(), g, 0.5).unwrap();
        let lo = vec![0.5; n];
        let hi = vec![0.75; n];
        let b = mu_n_second_moment_bound(&p, &lo, &hi).unwrap();
        assert_eq!(b.diverges, classify_polarity(&p).integral_diverges, "{n} {d} {h} {g}");
        assert_eq!(b.double_integral.is_none(), b.diverges);
        if let Some(v) = b.double_integral {
            assert!(v.is_finite() && v > 0.0);
        }
    }
}

#[test]
fn box_shell_weight_reproduces_box_volume_squared() {
    for sides in [vec![0.5], vec![0.5, 0.25], vec![0.3, 0.2, 0.1]] {
        let n = sides.len() as i32;
        let diam = sides.iter().map(|l| l * l).sum::<f64>().sqrt();
        let mut breaks = vec![0.0, diam];
        breaks.extend(sides.iter().copied());
        breaks.sort_by(f64::total_cmp);
        let q = integrate_with_breaks(|r| r.powi(n - 1) * box_shell_weight(&sides, r).unwrap(), &breaks, QuadOptions::rel(1e-10))
            .unwrap();
        let vol: f64 = sides.iter().product();
        assert!((q.value / (vol * vol) - 1.0).abs() < 1e-7, "{sides:?}: {}", q.value);
    }
}

#[test]
fn empirical_second_moment_is_below_the_bound() {
    let src = bm_source(1);
    let (lo, hi) = unit_half();
    let cal = calibrate_slnd_constant(&src, &lo, &hi, 41).unwrap();
    assert!((cal.c_hat - 0.5).abs() < 0.02, "{cal:?}");
    let pre = second_moment_prefactor(&src, &lo, &hi, cal.c_hat).unwrap();
    let bound = mu_n_second_moment_bound(&bm(1), &lo, &hi).unwrap().bound(pre).unwrap();
    let lat = bm_lattice(2f64.powi(-12));
    let study = mu_n_study(&src, &lat, &[0.3], &lo, &hi, &[1, 4, 16], 1000, 5).unwrap();
    for k in 0..3 {
        assert!(study.mean_squares[k] <= bound * (1.0 + 3.0 * study.square_se[k]));
    }
    let mut buf = Vec::new();
    write_mu_csv(&mut buf, &study, Some(bound)).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with("n,mean_mu,mean_mu_sq,bound\n"));
    let mut buf = Vec::new();
    write_mu_csv(&mut buf, &study, None).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with("n,mean_mu,mean_mu_sq\n"));
}

#[test]
fn weak_limit_stub_is_not_tight_and_short_ladders_fail() {
    let lat = bm_lattice(2f64.powi(-6));
    let stub = constant_field(&lat, bm(1), &[0.3]);
    let ladder = default_mu_ladder();
    let row: Vec<f64> = ladder.iter().map(|&n| mu_n_measure(&stub, &[0.3], &[0.5], &[1.0], n).unwrap()).collect();
    let rep = weak_limit_witness(&ladder, &vec![row; 10]).unwrap();
    assert!(!rep.tight);
    assert!(rep.medians.windows(2).all(|w| w[1] > w[0]));
    assert!(weak_limit_witness(&ladder[..3], &[vec![1.0; 3]]).is_err());
}

#[test]
fn weak_limit_on_brownian_benchmarks() {
    let (lo, hi) = unit_half();
    let ladder = default_mu_ladder();
    let h = mu_spacing_limit(&bm(1), 256).unwrap().log2().floor().exp2();
    let lat = bm_lattice(h);
    let sub = mu_n_study(&bm_source(1), &lat, &[0.3], &lo, &hi, &ladder, 400, 9).unwrap();
    let rep = weak_limit_witness(&ladder, &sub.values).unwrap();
    assert!(rep.consistent && rep.tight, "{rep:?}");

    let lat3 = bm_lattice(mu_spacing_limit(&bm(3), 256).unwrap().log2().floor().exp2());
    let sup = mu_n_study(&bm_source(3), &lat3, &[0.3, 0.0, 0.0], &lo, &hi, &ladder, 200, 10).unwrap();
    let rep = weak_limit_witness(&ladder, &sup.values).unwrap();
    assert!(rep.medians_decreasing, "{:?}", rep.medians);
    assert!(stats::median(&sup.values.iter().map(|v| v[8]).collect::<Vec<_>>()) < 0.05);
}
