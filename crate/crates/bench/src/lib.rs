//! Shared models for the pricing benchmarks.

use num_complex::Complex64;
use seasonal_vol::{CfEngine, FuturesCurve, ModelConfig, Pattern, SeasonalitySpec, VolFactor};

/// One stochastic-volatility factor with sinusoidal seasonality peaking at 7/12.
pub fn one_factor() -> ModelConfig {
    let s = SeasonalitySpec::new(Pattern::Sinusoid, 0.25, 0.15, 7.0 / 12.0).unwrap();
    let f = VolFactor::new(1.0, 0.8, 1.2, -0.25, 0.10, s).unwrap();
    ModelConfig::new(vec![f], 0.0, FuturesCurve::flat(100.0).unwrap()).unwrap()
}

/// Two stochastic-volatility factors, seasonal on the first, as used for
/// calendar spreads.
pub fn two_factor() -> ModelConfig {
    let s1 = SeasonalitySpec::new(Pattern::Sinusoid, 0.25, 0.15, 7.0 / 12.0).unwrap();
    let s2 = SeasonalitySpec::constant(0.10).unwrap();
    let f1 = VolFactor::new(2.0, 0.8, 1.2, -0.25, 0.10, s1).unwrap();
    let f2 = VolFactor::new(0.5, 0.8, 0.9, -0.25, 0.04, s2).unwrap();
    ModelConfig::new(vec![f1, f2], 0.005, FuturesCurve::flat(100.0).unwrap()).unwrap()
}

pub fn engine(model: ModelConfig) -> CfEngine {
    CfEngine::new(model)
}

/// Real-axis arguments shifted by −i, the points the vanilla integrand visits.
pub fn shifted_grid(n: usize) -> Vec<Complex64> {
    (1..=n).map(|k| Complex64::new(0.5 * k as f64, -1.0)).collect()
}
