//! Model and market parameters.

use crate::error::{Error, Result};
use crate::seasonality::SeasonalitySpec;

/// One stochastic variance factor.
///
/// The factor loads on futures with maturity `T_m` through the damping
/// `exp(-lambda (T_m - t))`, and its variance follows a square-root process
/// reverting to the seasonal level θ(t) at speed `kappa`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolFactor {
    pub lambda: f64,
    pub kappa: f64,
    pub sigma: f64,
    pub rho: f64,
    pub v0: f64,
    pub seasonality: SeasonalitySpec,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FellerCheck {
    pub strict_positive: bool,
    /// 2κθ_min − σ².
    pub margin: f64,
}

impl VolFactor {
    pub fn new(lambda: f64, kappa: f64, sigma: f64, rho: f64, v0: f64, seasonality: SeasonalitySpec) -> Result<Self> {
        let f = Self {
            lambda,
            kappa,
            sigma,
            rho,
            v0,
            seasonality,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::invalid("lambda", format!("must be > 0, got {}", self.lambda)));
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::invalid("kappa", format!("must be > 0, got {}", self.kappa)));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::invalid("sigma", format!("must be >= 0, got {}", self.sigma)));
        }
        if !(self.rho.is_finite() && self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::invalid("rho", format!("must lie in (-1, 1), got {}", self.rho)));
        }
        if !(self.v0.is_finite() && self.v0 > 0.0) {
            return Err(Error::invalid("v0", format!("must be > 0, got {}", self.v0)));
        }
        Ok(())
    }

    /// Feller condition σ² < 2κθ_min evaluated with the lower bound of θ.
    /// A violation is reported, not rejected.
    pub fn feller_check(&self) -> FellerCheck {
        let margin = 2.0 * self.kappa * self.seasonality.bounds().theta_min - self.sigma * self.sigma;
        FellerCheck {
            strict_positive: margin > 0.0,
            margin,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        self.sigma == 0.0
    }
}

/// Initial futures curve `F(0, T_m)`, linearly interpolated in price.
#[derive(Debug, Clone, PartialEq)]
pub struct FuturesCurve {
    points: Vec<(f64, f64)>,
}

impl FuturesCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("curve", "needs at least one point"));
        }
        for (i, &(t, p)) in points.iter().enumerate() {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::invalid("curve", format!("maturity #{i} must be >= 0, got {t}")));
            }
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::invalid("curve", format!("price #{i} must be > 0, got {p}")));
            }
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::invalid("curve", "maturities must be strictly increasing"));
        }
        Ok(Self { points })
    }

    /// A curve flat in price.
    pub fn flat(price: f64) -> Result<Self> {
        Self::new(vec![(0.0, price)])
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn price(&self, maturity: f64) -> Result<f64> {
        let pts = &self.points;
        if pts.len() == 1 {
            return Ok(pts[0].1);
        }
        let (first, last) = (pts[0].0, pts[pts.len() - 1].0);
        if maturity < first || maturity > last || maturity.is_nan() {
            return Err(Error::invalid(
                "maturity",
                format!("{maturity} outside the curve range [{first}, {last}]"),
            ));
        }
        let i = pts.partition_point(|p| p.0 <= maturity);
        if i == 0 {
            return Ok(pts[0].1);
        }
        let (t0, p0) = pts[i - 1];
        if t0 == maturity || i == pts.len() {
            return Ok(p0);
        }
        let (t1, p1) = pts[i];
        Ok(p0 + (p1 - p0) * (maturity - t0) / (t1 - t0))
    }
}

/// Factors plus market data.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    factors: Vec<VolFactor>,
    rate: f64,
    curve: FuturesCurve,
}

impl ModelConfig {
    pub fn new(factors: Vec<VolFactor>, rate: f64, curve: FuturesCurve) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::invalid("factors", "at least one volatility factor is required"));
        }
        for (i, f) in factors.iter().enumerate() {
            f.validate().map_err(|e| match e {
                Error::InvalidParameter { field, reason } => {
                    Error::invalid(format!("factor.{}.{}", i + 1, field), reason)
                }
                other => other,
            })?;
        }
        if !rate.is_finite() {
            return Err(Error::invalid("rate", "must be finite"));
        }
        Ok(Self { factors, rate, curve })
    }

    pub fn factors(&self) -> &[VolFactor] {
        &self.factors
    }
    pub fn rate(&self) -> f64 {
        self.rate
    }
    pub fn curve(&self) -> &FuturesCurve {
        &self.curve
    }

    pub fn initial_price(&self, maturity: f64) -> Result<f64> {
        self.curve.price(maturity)
    }

    pub fn discount(&self, t: f64) -> f64 {
        (-self.rate * t).exp()
    }

    pub fn is_deterministic(&self) -> bool {
        self.factors.iter().all(VolFactor::is_deterministic)
    }

    /// Copy with every factor transformed by `f`.
    pub fn map_factors(&self, f: impl Fn(&VolFactor) -> VolFactor) -> Result<Self> {
        Self::new(self.factors.iter().map(f).collect(), self.rate, self.curve.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seasonality::Pattern;

    fn sinusoid() -> SeasonalitySpec {
        SeasonalitySpec::new(Pattern::Sinusoid, 0.25, 0.15, 7.0 / 12.0).unwrap()
    }

    #[test]
    fn feller_examples() {
        let f = VolFactor::new(1.0, 0.8, 1.2, -0.25, 0.1, sinusoid()).unwrap();
        let c = f.feller_check();
        assert!(!c.strict_positive);
        assert!((c.margin - (0.16 - 1.44)).abs() < 1e-12);

        let f = VolFactor::new(1.0, 0.8, 0.0, -0.25, 0.1, sinusoid()).unwrap();
        assert!(f.feller_check().strict_positive);

        let f = VolFactor::new(1.0, 1.0, 0.4, 0.0, 0.1, sinusoid()).unwrap();
        assert!(f.feller_check().strict_positive);
    }

    #[test]
    fn field_named_in_errors() {
        let e = VolFactor::new(1.0, 0.8, 1.2, 1.0, 0.1, sinusoid()).unwrap_err();
        assert!(e.to_string().contains("rho"));
        let bad = VolFactor {
            kappa: -1.0,
            ..VolFactor::new(1.0, 0.8, 1.2, 0.0, 0.1, sinusoid()).unwrap()
        };
        let e = ModelConfig::new(vec![bad], 0.0, FuturesCurve::flat(100.0).unwrap()).unwrap_err();
        assert!(e.to_string().contains("factor.1.kappa"), "{e}");
    }

    #[test]
    fn curve_lookup() {
        let flat = FuturesCurve::flat(100.0).unwrap();
        assert_eq!(flat.price(0.83).unwrap(), 100.0);
        let c = FuturesCurve::new(vec![(1.0, 90.0), (2.0, 110.0)]).unwrap();
        assert!((c.price(1.5).unwrap() - 100.0).abs() < 1e-12);
        assert_eq!(c.price(2.0).unwrap(), 110.0);
        assert_eq!(c.price(1.0).unwrap(), 90.0);
        assert!(c.price(2.5).is_err());
        assert!(c.price(0.5).is_err());
    }

    #[test]
    fn curve_validation() {
        assert!(FuturesCurve::new(vec![]).is_err());
        assert!(FuturesCurve::new(vec![(1.0, 90.0), (1.0, 95.0)]).is_err());
        assert!(FuturesCurve::new(vec![(1.0, -90.0)]).is_err());
    }
}
