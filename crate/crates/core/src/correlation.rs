//! Instantaneous correlation between two futures returns in the two-factor
//! model, with deterministic variances for the seasonal illustrations.

use crate::error::{Error, Result};
use crate::model::{ModelConfig, VolFactor};

/// Solution of v' = κ(θ(t) − v), v(0) = v₀:
/// v(t) = e^{−κt}(v₀ + κ θ̂_t(κ)).
///
/// The stochastic parameters σ and ρ are ignored; callers that need the
/// σ = 0 restriction enforce it themselves.
pub fn deterministic_variance(factor: &VolFactor, t: f64) -> f64 {
    let theta_hat = factor
        .seasonality
        .transform(t, factor.kappa)
        .expect("transform of a validated spec over a finite horizon");
    (-factor.kappa * t).exp() * (factor.v0 + factor.kappa * theta_hat)
}

/// ρ(t) for the two-factor model given the factor variances at t.
pub fn instantaneous_correlation(lambdas: (f64, f64), t: f64, t1: f64, t2: f64, v1: f64, v2: f64) -> Result<f64> {
    if !(t <= t1 && t1 < t2) {
        return Err(Error::invalid(
            "t",
            format!("need t <= T1 < T2, got t={t}, T1={t1}, T2={t2}"),
        ));
    }
    if v1 < 0.0 || v2 < 0.0 {
        return Err(Error::invalid("v", "variances must be non-negative"));
    }
    if v1 == 0.0 && v2 == 0.0 {
        return Err(Error::invalid("v", "correlation undefined when both variances vanish"));
    }
    let (l1, l2) = lambdas;
    let num = (-l1 * (t1 + t2 - 2.0 * t)).exp() * v1 + (-l2 * (t1 + t2 - 2.0 * t)).exp() * v2;
    let d1 = (-2.0 * l1 * (t1 - t)).exp() * v1 + (-2.0 * l2 * (t1 - t)).exp() * v2;
    let d2 = (-2.0 * l1 * (t2 - t)).exp() * v1 + (-2.0 * l2 * (t2 - t)).exp() * v2;
    Ok((num / (d1.sqrt() * d2.sqrt())).min(1.0))
}

/// Correlation curve on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

/// Seasonal correlation, its non-seasonal benchmark (b = 0 on every factor)
/// and their difference, plus the variance paths that produce them.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrTermStructure {
    pub seasonal: CorrCurve,
    pub benchmark: CorrCurve,
    pub difference: Vec<f64>,
    pub variances: Vec<(f64, f64)>,
    pub benchmark_variances: Vec<(f64, f64)>,
}

/// `n` uniform nodes on `[0, t1]`.
pub fn default_grid(t1: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|i| t1 * i as f64 / (n - 1) as f64).collect()
}

/// Instantaneous correlation term structure for a deterministic two-factor model.
pub fn corr_term_structure(config: &ModelConfig, t1: f64, t2: f64, grid: &[f64]) -> Result<CorrTermStructure> {
    let factors = config.factors();
    if factors.len() != 2 {
        return Err(Error::invalid(
            "factors",
            format!("need exactly 2 factors, got {}", factors.len()),
        ));
    }
    if let Some((i, _)) = factors.iter().enumerate().find(|(_, f)| !f.is_deterministic()) {
        return Err(Error::invalid(
            format!("factor.{}.sigma", i + 1),
            "instantaneous correlation curves need sigma = 0",
        ));
    }
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("grid", "must be non-empty and strictly increasing"));
    }
    let lambdas = (factors[0].lambda, factors[1].lambda);
    let flat: Vec<VolFactor> = factors
        .iter()
        .map(|f| VolFactor {
            seasonality: f.seasonality.without_seasonality(),
            ..*f
        })
        .collect();

    let curve = |fs: &[VolFactor]| -> Result<(CorrCurve, Vec<(f64, f64)>)> {
        let mut values = Vec::with_capacity(grid.len());
        let mut vars = Vec::with_capacity(grid.len());
        for &t in grid {
            let v1 = deterministic_variance(&fs[0], t);
            let v2 = deterministic_variance(&fs[1], t);
            values.push(instantaneous_correlation(lambdas, t, t1, t2, v1, v2)?);
            vars.push((v1, v2));
        }
        Ok((
            CorrCurve {
                grid: grid.to_vec(),
                values,
            },
            vars,
        ))
    };
    let (seasonal, variances) = curve(factors)?;
    let (benchmark, benchmark_variances) = curve(&flat)?;
    let difference = seasonal
        .values
        .iter()
        .zip(&benchmark.values)
        .map(|(a, b)| a - b)
        .collect();
    Ok(CorrTermStructure {
        seasonal,
        benchmark,
        difference,
        variances,
        benchmark_variances,
    })
}
