use fracrelax::fitting::objective;
use fracrelax::mlf::{eval_ml, eval_weighted, CmWeightedParams, MlQuery};
use fracrelax::powerlaw::{
    max_relative_coeff_diff, nth_level_derivative, projector_apply, rl_integral, PowerSum, Term,
};
use fracrelax::relax::{cm_numeric_check, cm_verdict, evaluate_solution, solve_relaxation, RelaxationProblem};
use fracrelax::special::{gamma, reciprocal_gamma};
use fracrelax::specparams::{
    classify, kernel_basis, laplace_form, triangle_region, validate, DerivativeSpec, RegionLabel, SpecClass,
};
use proptest::prelude::*;

/// Fractions in [0, 1] with the endpoints drawn often.
fn fraction() -> impl Strategy<Value = f64> {
    prop_oneof![1 => Just(0.0), 1 => Just(1.0), 6 => 0.0..=1.0f64]
}

/// Valid specs: γ_k is a fraction of the room k - α - s_{k-1} left by the
/// previous factors.
fn valid_spec() -> impl Strategy<Value = DerivativeSpec> {
    (0.05..=1.0f64, prop::collection::vec(fraction(), 1..=3)).prop_map(|(alpha, u)| {
        let mut s = 0.0;
        let gamma = u
            .iter()
            .enumerate()
            .map(|(i, &f)| {
                let g = f * ((i + 1) as f64 - alpha - s);
                s += g;
                g
            })
            .collect();
        DerivativeSpec::new(alpha, gamma).unwrap()
    })
}

/// Truly nth-level specs from ordered σ in [α-1, 0].
fn truly_nth() -> impl Strategy<Value = DerivativeSpec> {
    (0.05..=1.0f64, prop::collection::vec(0.0..1.0f64, 1..=3)).prop_filter_map("distinct sigma", |(alpha, u)| {
        let mut sigma: Vec<f64> = u.iter().map(|&t| (alpha - 1.0) * t).collect();
        sigma.sort_by(|a, b| b.total_cmp(a));
        if sigma.windows(2).any(|w| w[0] - w[1] < 1e-3) || sigma.last().unwrap() <= &-0.999 {
            return None;
        }
        let mut prev = 0.0;
        let gamma = sigma
            .iter()
            .enumerate()
            .map(|(i, &sg)| {
                let s = sg - alpha + (i + 1) as f64;
                let g = s - prev;
                prev = s;
                g
            })
            .collect();
        let spec = DerivativeSpec::new(alpha, gamma).ok()?;
        validate(&spec).ok()?.truly_nth_level.then_some(spec)
    })
}

fn power_sum(lo: f64) -> impl Strategy<Value = PowerSum> {
    prop::collection::vec((-2.0..2.0f64, lo..=3.0f64), 1..=4)
        .prop_map(|t| PowerSum::from_terms(t.into_iter().map(|(c, mu)| Term { c, mu })).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn truly_nth_sigma_is_ordered_in_range(spec in truly_nth()) {
        let sigma = spec.sigma();
        prop_assert!(sigma[0] >= spec.alpha - 1.0 - 1e-12);
        prop_assert!(sigma.iter().all(|&s| s > -1.0 && s <= 1e-12));
        prop_assert!(sigma.windows(2).all(|w| w[0] > w[1]));
        let c = classify(&spec).unwrap();
        prop_assert!(!c.is_reduced());
        prop_assert_eq!(c.kept, (0..spec.n).collect::<Vec<_>>());
    }

    #[test]
    fn classification_is_idempotent(spec in valid_spec()) {
        let c = classify(&spec).unwrap();
        prop_assert!(validate(&c.effective).unwrap().truly_nth_level);
        let again = classify(&c.effective).unwrap();
        prop_assert!(!again.is_reduced());
        prop_assert_eq!(&again.class, &c.base);
        prop_assert_eq!(&again.effective, &c.effective);
        let sigma = spec.sigma();
        let eff = c.effective.sigma();
        for (j, &k) in c.kept.iter().enumerate() {
            prop_assert!((eff[j] - sigma[k]).abs() <= 1e-12);
        }
    }

    #[test]
    fn kernel_has_one_power_per_kept_factor(spec in valid_spec()) {
        let c = classify(&spec).unwrap();
        let basis = kernel_basis(&spec).unwrap();
        prop_assert_eq!(basis.len(), c.kept.len());
        prop_assert_eq!(basis.len() == spec.n, validate(&spec).unwrap().truly_nth_level);
    }

    #[test]
    fn kernel_is_annihilated(spec in truly_nth()) {
        for b in kernel_basis(&spec).unwrap() {
            let d = nth_level_derivative(&spec, &b).unwrap();
            prop_assert!(d.max_abs_coeff() <= 1e-12, "{:?}", d);
        }
    }

    #[test]
    fn triangle_matches_constraints(alpha in 0.05..=1.0f64, g1 in 0.0..=1.0f64, g2 in 0.0..=1.5f64) {
        let spec = DerivativeSpec::new(alpha, vec![g1, g2]).unwrap();
        let v = validate(&spec).unwrap();
        let inside = triangle_region(&spec).unwrap() != RegionLabel::OutsideTriangle;
        prop_assert_eq!(inside, v.valid && v.cm_admissible && g2 <= 1.0);
    }

    #[test]
    fn laplace_exponents_stay_in_range(spec in valid_spec()) {
        let a = vec![1.0; spec.n];
        let n = spec.n as f64;
        for t in laplace_form(&spec, &a).unwrap().terms {
            prop_assert!(t.exponent > -1.0 && t.exponent <= n - 1.0 + 1e-12, "{}", t.exponent);
        }
    }

    #[test]
    fn index_law(a in 0.0..2.0f64, b in 0.0..2.0f64, f in power_sum(-0.9)) {
        let lhs = rl_integral(a, &rl_integral(b, &f).unwrap()).unwrap();
        let rhs = rl_integral(a + b, &f).unwrap();
        prop_assert!(max_relative_coeff_diff(&lhs, &rhs, 1e-300) <= 1e-12);
    }

    #[test]
    fn derivative_inverts_the_integral(spec in valid_spec(), c in -2.0..2.0f64, t in 0.0..1.0f64) {
        let mu = (-0.5f64).max(-spec.alpha) + 1e-3 + t * 3.0;
        let f = PowerSum::monomial(c, mu).unwrap();
        let back = nth_level_derivative(&spec, &rl_integral(spec.alpha, &f).unwrap()).unwrap();
        prop_assert!(max_relative_coeff_diff(&back, &f, 1e-300) <= 1e-10, "{:?} vs {:?}", back, f);
    }

    #[test]
    fn projector_remainder_is_integral_of_derivative(spec in truly_nth(), f in power_sum(0.0)) {
        let (_, rem) = projector_apply(&spec, &f).unwrap();
        let d = nth_level_derivative(&spec, &f).unwrap();
        let id = rl_integral(spec.alpha, &d).unwrap();
        let scale = f.max_abs_coeff().max(1.0);
        prop_assert!(rem.sub(&id).max_abs_coeff() <= 1e-10 * scale);
    }

    #[test]
    fn ml_recurrence(alpha in 0.1..=1.0f64, beta in 0.1..=2.0f64, z in -30.0..=0.0f64) {
        let e = |b: f64| eval_ml(&MlQuery::new(alpha, b, z).unwrap()).unwrap();
        let lhs = e(beta);
        let shifted = z * e(alpha + beta);
        let rhs = shifted + reciprocal_gamma(beta);
        let scale = 1.0 + lhs.abs() + shifted.abs();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * scale, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn gamma_times_reciprocal(x in -20.0..60.0f64) {
        prop_assume!((x - x.round()).abs() > 1e-6 || x > 0.5);
        prop_assert!((gamma(x) * reciprocal_gamma(x) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn cm_weighted_is_decreasing(alpha in 0.1..=1.0f64, db in 0.0..1.0f64, gw in 0.05..=1.0f64, lambda in 0.1..3.0f64) {
        let p = CmWeightedParams { alpha, beta: alpha + db, gamma_w: gw, lambda };
        let xs: Vec<f64> = (0..30).map(|i| 0.01 * 1.3f64.powi(i)).collect();
        let v: Vec<f64> = xs.iter().map(|&x| eval_weighted(&p, x).unwrap()).collect();
        prop_assert!(v.iter().all(|&h| h >= -1e-14));
        prop_assert!(v.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-14), "{:?}", v);
    }

    #[test]
    fn caputo_solution_starts_at_initial_value(alpha in 0.1..=1.0f64, lambda in 0.1..3.0f64, y in -5.0..5.0f64) {
        let spec = DerivativeSpec::caputo(alpha).unwrap();
        prop_assert_eq!(classify(&spec).unwrap().class, SpecClass::Caputo);
        let sol = solve_relaxation(&RelaxationProblem::new(spec, lambda, vec![y]).unwrap()).unwrap();
        let x: f64 = 1e-12;
        let v = evaluate_solution(&sol, x).unwrap();
        let bound = lambda * x.powf(alpha) / gamma(alpha + 1.0) * 2.0 * y.abs() + 1e-14;
        prop_assert!((v - y).abs() <= bound, "{} vs {}", v, y);
    }

    #[test]
    fn objective_ignores_data_order(seed in any::<u64>(), alpha in 0.3..=1.0f64, lambda in 0.2..2.0f64) {
        let theta = [alpha, 1.0 - alpha, lambda, 1.0];
        let mut data: Vec<(f64, f64)> = (0..20).map(|i| {
            let x = 0.1 + 0.3 * i as f64;
            (x, (-x).exp() + 0.01 * ((seed >> (i % 60)) & 1) as f64)
        }).collect();
        let w: Vec<f64> = (0..20).map(|i| 1.0 + (i % 3) as f64).collect();
        let a = objective(1, &theta, &data, &w).unwrap();
        let mut paired: Vec<((f64, f64), f64)> = data.drain(..).zip(w).collect();
        paired.reverse();
        paired.rotate_left((seed % 20) as usize);
        let (d2, w2): (Vec<_>, Vec<_>) = paired.into_iter().unzip();
        let b = objective(1, &theta, &d2, &w2).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn admissible_solutions_show_no_violations(
        alpha in 0.3..=1.0f64,
        u in 0.0..=1.0f64,
        v in 0.0..=1.0f64,
        y in prop::collection::vec(0.0..2.0f64, 2),
    ) {
        // a point of the closed CM triangle
        let g1 = u * (1.0 - alpha);
        let g2 = 1.0 - g1 + v * g1;
        let spec = DerivativeSpec::new(alpha, vec![g1, g2]).unwrap();
        let k = classify(&spec).unwrap().kept.len();
        let p = RelaxationProblem::new(spec, 1.0, y[..k].to_vec()).unwrap();
        prop_assert_eq!(cm_verdict(&p).unwrap().admissible_by_theorem, Some(true));
        let sol = solve_relaxation(&p).unwrap();
        let r = cm_numeric_check(|x| evaluate_solution(&sol, x), 1e-2, 10.0, 2).unwrap();
        prop_assert!(r.violations.is_empty(), "{:?}", r.violations.first());
    }
}
