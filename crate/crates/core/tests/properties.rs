//! Property-based checks of the structural invariants of every module.

use critfield::construction_lab::{
    build_ladder, random_ladder, sample_configuration, verify_p1_to_p4, BranchAssignment, LadderCase, P4_REL_TOL,
};
use critfield::covering_lab::{occupancy_measure, vitali_select, Ball, Region};
use critfield::hitting_mc::{
    hit_probability, make_decomposition, mu_n_measure, split_field, HitExperiment,
};
use critfield::rng::{purpose, stream};
use critfield::sojourn_lab::sojourn_time;
use critfield::spectral_field::{synthesize, ExactFbm, FieldSource, Lattice, SpectralModel};
use critfield::variance_model::{
    classify_polarity, f_gauge, integral_criterion, psi, sigma, sigma_log, sigma_monotone_bound, sigma_star,
    FieldParams, Hurst, LogScale, Regime,
};
use proptest::prelude::*;

fn params(n: usize, d: usize, h: f64, gamma: f64) -> FieldParams {
    FieldParams::with_defaults(n, d, Hurst::float(h).unwrap(), gamma).unwrap()
}

fn bm() -> FieldParams {
    FieldParams::with_defaults(1, 1, Hurst::rational(1, 2).unwrap(), 0.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sigma_is_increasing_below_its_monotone_bound(h in 0.05f64..0.95, gamma in -2.0f64..2.0, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let p = params(1, 1, h, gamma);
        let rbar = sigma_monotone_bound(&p);
        let (a, b) = (rbar * u.min(v), rbar * u.max(v));
        prop_assume!(a > 1e-300 && b < rbar && b > a * (1.0 + 1e-9));
        prop_assert!(sigma(a, &p).unwrap() < sigma(b, &p).unwrap());
    }

    #[test]
    fn sigma_star_inverts_sigma_without_log_factor(h in 0.05f64..0.95, r in 1e-12f64..0.999) {
        let p = params(1, 1, h, 0.0);
        let back = sigma_star(sigma(r, &p).unwrap(), &p).unwrap();
        prop_assert!((back / r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psi_equals_f_below_the_threshold(d in 1usize..6, h in 0.1f64..0.9, frac in -3.0f64..0.99, lam in 20.0f64..700.0) {
        let p = params(1, d, h, frac / d as f64);
        let eps = (-lam).exp();
        let (a, b) = (psi(eps, &p).unwrap(), f_gauge(eps, &p).unwrap());
        prop_assert!((a / b - 1.0).abs() < 1e-12, "{} vs {}", a, b);
    }

    #[test]
    fn rational_and_float_hurst_classify_alike(q in 2u64..12, k in 1u64..12, n in 1usize..4, gamma in -1.0f64..1.0) {
        prop_assume!(k < q);
        let rational = FieldParams::with_defaults(n, 1, Hurst::rational(k, q).unwrap(), gamma).unwrap();
        for d in 1..=8 {
            let pr = rational.with_d(d).unwrap();
            let pf = FieldParams::with_defaults(n, d, Hurst::float(k as f64 / q as f64).unwrap(), gamma).unwrap();
            prop_assert_eq!(classify_polarity(&pr), classify_polarity(&pf));
            prop_assert_eq!(pr.regime() == Regime::Critical, (d as u64) * k == (n as u64) * q);
        }
    }

    #[test]
    fn divergence_flag_follows_the_sign_test(n in 1usize..4, d in 1usize..9, num in 1u64..8, gamma in -1.0f64..1.5) {
        let h = Hurst::rational(num, 8).unwrap();
        let p = FieldParams::with_defaults(n, d, h, gamma).unwrap();
        let excess = n as i64 * 8 - num as i64 * d as i64;
        let want = excess < 0 || (excess == 0 && gamma * d as f64 <= 1.0 + 1e-12);
        prop_assert_eq!(integral_criterion(&p, 1e-6).unwrap().diverges, want);
    }

    #[test]
    fn log_domain_sigma_matches_direct_evaluation(h in 0.05f64..0.95, gamma in -2.0f64..2.0, log_r in -690.0f64..-0.11) {
        let p = params(1, 1, h, gamma);
        let r = log_r.exp();
        let direct = sigma(r, &p).unwrap();
        prop_assume!(direct > 1e-300 && direct.is_finite());
        let via_log = sigma_log(LogScale::from_radius(r).unwrap(), &p).exp();
        prop_assert!((via_log / direct - 1.0).abs() < 1e-10);
    }

    #[test]
    fn synthesis_is_bit_reproducible(seed in any::<u64>()) {
        let p = params(1, 2, 0.5, 0.2);
        let lat = Lattice::new(vec![0.0], vec![1.0], 1.0 / 64.0).unwrap();
        let model = SpectralModel::new(p, 1.0).unwrap();
        let a = synthesize(&lat, &model, seed, None).unwrap();
        let b = synthesize(&lat, &model, seed, None).unwrap();
        prop_assert_eq!(a.values, b.values);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sojourn_time_is_bounded_and_nested_in_eps(seed in any::<u64>()) {
        let p = FieldParams::with_defaults(1, 2, Hurst::rational(1, 2).unwrap(), 0.0).unwrap();
        let beta = 1.2;
        let eps_grid = [2f64.powi(-3), 2f64.powi(-4), 2f64.powi(-5)];
        let h = sigma_star(eps_grid[2], &p).unwrap() / 8.0;
        let lat = Lattice::centered(1, eps_grid[0].powf(beta), h.log2().floor().exp2()).unwrap();
        let f = ExactFbm::new(&lat, &p).unwrap().sample(seed).unwrap();
        // One lattice serves every eps: it covers the largest ball at the finest spacing.
        let mut prev = f64::INFINITY;
        for &eps in &eps_grid {
            let t = sojourn_time(&f, eps, beta).unwrap();
            prop_assert!(t >= 0.0 && t <= 2.0 * eps.powf(beta) + 1e-12);
            prop_assert!(t <= prev);
            prev = t;
        }
    }

    #[test]
    fn random_ladders_pass_all_four_properties(seed in any::<u64>(), index in 0usize..1000, critical in any::<bool>()) {
        let case = if critical { LadderCase::CriticalGamma } else { LadderCase::SubcriticalGamma };
        let (p, spec) = random_ladder(seed, index, case).unwrap();
        let ladder = build_ladder(spec, &p).unwrap();
        let v = verify_p1_to_p4(&ladder, &p);
        prop_assert!(v.all_hold(), "{:?}", v);
        if critical {
            for &ratio in &v.p4_ratios {
                prop_assert!((ratio / spec.constant - 1.0).abs() <= P4_REL_TOL, "{} vs {}", ratio, spec.constant);
            }
        }
        let mut rng = stream(seed, &[purpose::FAMILY, index as u64]);
        let branch = BranchAssignment::random(spec.p, &mut rng);
        let c = sample_configuration(&ladder, &branch, &p, &mut rng).unwrap();
        let checks = c.checks.as_ref().unwrap();
        prop_assert!(checks.geometry_ok());
        if v.p2.holds && v.p3.holds {
            prop_assert!(checks.cond_margin.is_none_or(|m| m >= 0.0));
        }
    }

    #[test]
    fn vitali_selection_is_disjoint_and_five_covers(
        balls in prop::collection::vec((prop::collection::vec(-1.0f64..1.0, 2), 0.001f64..0.3), 1..60),
        dim1 in any::<bool>(),
    ) {
        let balls: Vec<Ball> = balls
            .into_iter()
            .map(|(c, r)| Ball::new(if dim1 { vec![c[0]] } else { c }, r).unwrap())
            .collect();
        let sel = vitali_select(&balls);
        prop_assert!(sel.verify(&balls).ok());
    }

    #[test]
    fn occupancy_is_monotone_in_radius(seed in any::<u64>(), r1 in 0.01f64..0.5, r2 in 0.01f64..0.5) {
        let p = FieldParams::with_defaults(1, 2, Hurst::rational(1, 2).unwrap(), 0.0).unwrap();
        let lat = Lattice::new(vec![0.5], vec![1.0], 2f64.powi(-10)).unwrap();
        let f = ExactFbm::new(&lat, &p).unwrap().sample(seed).unwrap();
        let region = Region::Box { lo: vec![0.5], hi: vec![1.0] };
        let centre = f.site_values(100).to_vec();
        let (a, b) = (r1.min(r2), r1.max(r2));
        let small = occupancy_measure(&f, &region, &Ball::new(centre.clone(), a).unwrap()).unwrap();
        let large = occupancy_measure(&f, &region, &Ball::new(centre, b).unwrap()).unwrap();
        prop_assert!(small <= large && small > 0.0);
    }

    #[test]
    fn hit_probabilities_are_nested(seed in any::<u64>(), z in 0.05f64..1.0) {
        let deltas: Vec<f64> = (2..=6).map(|k| 2f64.powi(-k)).collect();
        let exp = HitExperiment::new(FieldSource::ExactFbm(bm()), vec![0.5], vec![1.0], vec![z], deltas, 40).unwrap();
        let rep = hit_probability(&exp, seed).unwrap();
        for w in rep.points.windows(2) {
            prop_assert!(w[1].hits <= w[0].hits);
        }
    }

    #[test]
    fn mu_n_is_nonnegative_and_additive(seed in any::<u64>(), cut in 1usize..127, n in 1u64..300, z in -1.0f64..1.0) {
        let lat = Lattice::new(vec![0.5], vec![1.0], 2f64.powi(-8)).unwrap();
        let f = ExactFbm::new(&lat, &bm()).unwrap().sample(seed).unwrap();
        let mid = 0.5 + cut as f64 * 2f64.powi(-8);
        let whole = mu_n_measure(&f, &[z], &[0.5], &[1.0], n).unwrap();
        let left = mu_n_measure(&f, &[z], &[0.5], &[mid], n).unwrap();
        let right = mu_n_measure(&f, &[z], &[mid], &[1.0], n).unwrap();
        prop_assert!(whole >= 0.0 && left >= 0.0 && right >= 0.0);
        prop_assert!((left + right - whole).abs() <= 1e-12 * whole.max(1e-300));
    }

    #[test]
    fn decomposition_identities_hold_at_random_anchors(seed in any::<u64>(), anchor in 0usize..=64) {
        let t0 = 0.5 + anchor as f64 / 128.0;
        let src = FieldSource::ExactFbm(bm());
        let dec = make_decomposition(&src, &[t0], 0.25).unwrap();
        let lat = Lattice::new(vec![0.5], vec![1.0], 2f64.powi(-7)).unwrap();
        let f = ExactFbm::new(&lat, &bm()).unwrap().sample(seed).unwrap();
        let (x1, x2) = split_field(&f, &dec).unwrap();
        let plan = dec.plan(&lat).unwrap();
        prop_assert_eq!(x1.value(plan.t0_site, 0), 0.0);
        for s in 0..lat.len() {
            let (x, a, b) = (f.value(s, 0), x1.value(s, 0), x2.value(s, 0));
            prop_assert!((a + b - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(b.abs()));
        }
    }
}
