use proptest::prelude::*;

use seasonal_vol::spread::{copula_spread_call, implied_correlation, spread_forward_value};
use seasonal_vol::vanilla::{black76_price, implied_vol, price_put_by_inversion, price_vanilla};
use seasonal_vol::{
    cso_call, cso_put, CfEngine, CsoSpec, FuturesCurve, ModelConfig, OptionKind, Pattern, SeasonalitySpec, VanillaSpec,
    VolFactor,
};

fn pattern() -> impl Strategy<Value = Pattern> {
    prop_oneof![
        Just(Pattern::Constant),
        Just(Pattern::Sinusoid),
        Just(Pattern::ExpSinusoid),
        Just(Pattern::Sawtooth),
        Just(Pattern::Triangle),
        Just(Pattern::Spiked),
    ]
}

fn seasonality() -> impl Strategy<Value = SeasonalitySpec> {
    (pattern(), 0.05..0.4f64, 0.0..0.3f64, 0.0..0.999f64).prop_map(|(p, a, b, t0)| {
        // Keep the sinusoid strictly positive.
        let b = if p == Pattern::Sinusoid { b.min(0.9 * a) } else { b };
        SeasonalitySpec::new(p, a, b, t0).unwrap()
    })
}

fn one_factor_engine(s: SeasonalitySpec, sigma: f64, rho: f64, rate: f64) -> CfEngine {
    let f = VolFactor::new(1.0, 0.8, sigma, rho, 0.1, s).unwrap();
    CfEngine::new(ModelConfig::new(vec![f], rate, FuturesCurve::flat(100.0).unwrap()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn theta_is_periodic_and_bounded(s in seasonality(), t in 0.0..5.0f64) {
        let b = s.bounds();
        let v = s.theta(t);
        prop_assert!((v - s.theta(t + 1.0)).abs() <= 1e-12 * (1.0 + v.abs()));
        prop_assert!(v >= b.theta_min - 1e-12 && v <= b.theta_max + 1e-12);
    }

    #[test]
    fn transform_is_additive(s in seasonality(), t1 in 0.05..2.0f64, dt in 0.05..1.5f64, lambda in -3.0..3.0f64) {
        let t2 = t1 + dt;
        let whole = s.transform(t2, lambda).unwrap();
        let head = s.transform(t1, lambda).unwrap();
        // ∫_{t1}^{t2} θ(t) e^{λt} dt, by shifting the origin of a copy of the pattern.
        let shifted = SeasonalitySpec::new_allowing_negative(s.pattern(), s.a(), s.b(), (s.t0() - t1).rem_euclid(1.0)).unwrap();
        let tail = (lambda * t1).exp() * shifted.transform(dt, lambda).unwrap();
        prop_assert!((whole - head - tail).abs() <= 1e-9 * (1.0 + whole.abs()), "{} vs {}", whole, head + tail);
    }

    #[test]
    fn transform_matches_oracle(s in seasonality(), t in 0.05..3.0f64, lambda in -3.0..3.0f64) {
        let closed = s.transform(t, lambda).unwrap();
        let oracle = s.transform_oracle(t, lambda).unwrap();
        prop_assert!((closed - oracle).abs() <= 1e-10 * (1.0 + oracle.abs()));
    }

    #[test]
    fn black_implied_vol_round_trip(f in 50.0..150.0f64, k in 50.0..150.0f64, t in 0.1..3.0f64, vol in 0.05..1.5f64, put in any::<bool>()) {
        let kind = if put { OptionKind::Put } else { OptionKind::Call };
        let p = black76_price(f, k, t, vol, 0.01, kind);
        // Skip prices indistinguishable from intrinsic.
        let intrinsic = (-0.01 * t).exp() * if put { (k - f).max(0.0) } else { (f - k).max(0.0) };
        prop_assume!(p - intrinsic > 1e-6);
        let back = implied_vol(p, f, k, t, 0.01, kind).unwrap();
        prop_assert!((back - vol).abs() < 1e-6, "{} vs {}", back, vol);
    }

    #[test]
    fn copula_implied_correlation_round_trip(rho in -0.95..0.95f64, k in -10.0..10.0f64, t in 0.2..2.0f64) {
        let (fw, vols) = ((100.0, 98.0), (0.35, 0.25));
        let price = copula_spread_call(fw, vols, t, k, rho, 0.0);
        prop_assume!(price > 1e-6);
        let back = implied_correlation(price, fw, vols, t, k, 0.0).unwrap();
        prop_assert!((back - rho).abs() < 1e-6, "{} vs {}", back, rho);
    }
}

proptest! {
    // Fourier pricing is comparatively slow; fewer cases.
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn vanilla_within_bounds_and_parity(
        s in seasonality(),
        sigma in 0.0..1.5f64,
        rho in -0.9..0.9f64,
        t in 0.1..2.0f64,
        k in 70.0..130.0f64,
    ) {
        let engine = one_factor_engine(s, sigma, rho, 0.02);
        let df = (-0.02 * t).exp();
        let call = price_vanilla(&engine, &VanillaSpec::new(k, t, t, OptionKind::Call).unwrap()).unwrap().price;
        prop_assert!(call >= df * (100.0 - k).max(0.0) - 1e-12 && call <= df * 100.0);
        let put_spec = VanillaSpec::new(k, t, t, OptionKind::Put).unwrap();
        let parity_put = price_vanilla(&engine, &put_spec).unwrap().price;
        let direct_put = price_put_by_inversion(&engine, &put_spec).unwrap().price;
        prop_assert!((parity_put - direct_put).abs() < 1e-7, "{} vs {}", parity_put, direct_put);
        prop_assert!((call - parity_put - df * (100.0 - k)).abs() < 1e-9);
    }

    #[test]
    fn vanilla_decreasing_and_convex_in_strike(s in seasonality(), sigma in 0.0..1.5f64, t in 0.1..2.0f64) {
        let engine = one_factor_engine(s, sigma, -0.3, 0.0);
        let prices: Vec<f64> = [85.0, 95.0, 105.0, 115.0]
            .iter()
            .map(|&k| price_vanilla(&engine, &VanillaSpec::call(k, t).unwrap()).unwrap().price)
            .collect();
        prop_assert!(prices.windows(2).all(|w| w[1] < w[0]));
        prop_assert!(prices.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] > -1e-9));
    }

    #[test]
    fn spread_call_put_parity_and_monotone(s in seasonality(), t in 0.2..1.5f64, gap in 0.1..1.0f64) {
        let s2 = SeasonalitySpec::constant(0.04).unwrap();
        let f1 = VolFactor::new(2.0, 0.8, 1.2, -0.25, 0.10, s).unwrap();
        let f2 = VolFactor::new(0.5, 0.8, 0.9, -0.25, 0.04, s2).unwrap();
        let curve = FuturesCurve::new(vec![(0.0, 100.0), (4.0, 96.0)]).unwrap();
        let engine = CfEngine::new(ModelConfig::new(vec![f1, f2], 0.01, curve).unwrap());
        let mut last = f64::INFINITY;
        for k in [-5.0, 0.0, 5.0] {
            let spec = CsoSpec::new(t, t, t + gap, k).unwrap();
            let call = cso_call(&engine, &spec).unwrap().price;
            let put = cso_put(&engine, &spec).unwrap().price;
            let fwd = spread_forward_value(&engine, &spec).unwrap();
            prop_assert!((call - put - fwd).abs() < 1e-10);
            prop_assert!(call >= fwd.max(0.0) - 1e-8);
            prop_assert!(call < last);
            last = call;
        }
    }
}
