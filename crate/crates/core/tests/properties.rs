use fdlimit::farfield::radius_ladder;
use fdlimit::reference::{phi, phi_prime};
use fdlimit::verify::random_strict_params;
use fdlimit::{integrate_profile, Params, ProfileOptions};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #[test]
    fn exponent_identity(seed in any::<u64>()) {
        let p = random_strict_params(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!(p.validate(true).is_valid());
        let d = p.derive().unwrap();
        let lhs = d.alpha_m * (1.0 - p.m);
        let rhs = 2.0 * p.beta + p.rho1;
        prop_assert!((lhs - rhs).abs() <= 4.0 * f64::EPSILON * rhs);
        prop_assert!(d.a3 > 0.0);
    }

    #[test]
    fn phi_is_increasing(m in 0.0f64..0.6, u in 1e-3f64..1e3, k in 1.001f64..2.0) {
        prop_assert!(phi(m, u * k) > phi(m, u));
        prop_assert!(phi_prime(m, u) > 0.0);
        prop_assert_eq!(phi(m, 1.0), 0.0);
    }

    #[test]
    fn ladder_is_geometric(lo in 1.0f64..100.0, span in 1.5f64..1e3, count in 3usize..12) {
        let l = radius_ladder(lo, lo * span, count);
        prop_assert_eq!(l.len(), count);
        prop_assert!((l[0] - lo).abs() <= 1e-12 * lo);
        let q = l[1] / l[0];
        for w in l.windows(2) {
            prop_assert!(((w[1] / w[0]) / q - 1.0).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// v_λ(r) = λ^{2/(1-m)} v_1(λ r).
    #[test]
    fn scaling_family(m in 0.0f64..0.25, lambda in 0.5f64..3.0, r in 0.2f64..3.0) {
        let base = Params::default().with_m(m);
        let opts = ProfileOptions::default().with_rho_max(10.0).with_tol(1e-11);
        let one = integrate_profile(&base, &opts).unwrap();
        let scaled = integrate_profile(&base.with_lambda(lambda), &opts).unwrap();
        prop_assume!(lambda * r <= one.r_max() && r <= scaled.r_max());
        let want = lambda.powf(2.0 / (1.0 - m)) * one.eval_v(lambda * r).unwrap();
        let got = scaled.eval_v(r).unwrap();
        prop_assert!((got / want - 1.0).abs() < 1e-8, "{got} vs {want}");
    }
}
