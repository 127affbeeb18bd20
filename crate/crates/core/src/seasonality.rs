//! Seasonal mean-reversion levels θ(t) and their exponential transforms
//! θ̂_T(λ) = ∫₀ᵀ θ(t) e^{λt} dt.
//!
//! Every pattern is one-year periodic and parameterised by a level `a`, a
//! magnitude `b` and a peak time `t0` (fraction of the year). Closed-form
//! transforms exist for the constant, sinusoidal, sawtooth and triangle
//! shapes; the exponential-sinusoidal and spiked shapes are integrated
//! numerically with their kinks as breakpoints.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::quad::{self, QuadOptions};

/// Below this |λ| the closed forms (which carry 1/λ factors) are bypassed in
/// favour of quadrature.
pub const SMALL_LAMBDA: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pattern {
    Constant,
    Sinusoid,
    ExpSinusoid,
    Sawtooth,
    Triangle,
    Spiked,
}

impl Pattern {
    pub const ALL: [Pattern; 6] = [
        Pattern::Constant,
        Pattern::Sinusoid,
        Pattern::ExpSinusoid,
        Pattern::Sawtooth,
        Pattern::Triangle,
        Pattern::Spiked,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pattern::Constant => "constant",
            Pattern::Sinusoid => "sinusoid",
            Pattern::ExpSinusoid => "exp-sinusoid",
            Pattern::Sawtooth => "sawtooth",
            Pattern::Triangle => "triangle",
            Pattern::Spiked => "spiked",
        }
    }

    /// Whether θ̂ has a closed form for this pattern.
    pub fn has_closed_form(self) -> bool {
        matches!(
            self,
            Pattern::Constant | Pattern::Sinusoid | Pattern::Sawtooth | Pattern::Triangle
        )
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace(['_', ' '], "-");
        match norm.as_str() {
            "constant" | "flat" => Ok(Pattern::Constant),
            "sinusoid" | "sinusoidal" => Ok(Pattern::Sinusoid),
            "exp-sinusoid" | "exp-sinusoidal" | "expsinusoid" => Ok(Pattern::ExpSinusoid),
            "sawtooth" => Ok(Pattern::Sawtooth),
            "triangle" => Ok(Pattern::Triangle),
            "spiked" => Ok(Pattern::Spiked),
            _ => Err(Error::invalid("pattern", format!("unknown seasonality pattern `{s}`"))),
        }
    }
}

/// Lower and upper bounds of θ over all t ≥ 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaBounds {
    pub theta_min: f64,
    pub theta_max: f64,
}

/// A validated seasonality specification. Immutable once built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeasonalitySpec {
    pattern: Pattern,
    a: f64,
    b: f64,
    t0: f64,
}

/// Fractional part in `[0, 1)` for any finite real, including negatives.
pub fn frac(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

impl SeasonalitySpec {
    pub fn new(pattern: Pattern, a: f64, b: f64, t0: f64) -> Result<Self> {
        let spec = Self::new_allowing_negative(pattern, a, b, t0)?;
        if pattern == Pattern::Sinusoid && a - b <= 0.0 {
            return Err(Error::invalid(
                "b",
                format!("sinusoid needs a - b > 0 for a positive minimum, got a={a}, b={b}"),
            ));
        }
        Ok(spec)
    }

    /// As [`new`](Self::new) but lets a sinusoid dip below zero (b ≥ a).
    /// The strong-seasonality calendar spread case uses a = 0.25, b = 0.35;
    /// the CF stays well defined and the simulated variance is floored at
    /// zero, but [`bounds`](Self::bounds) then reports a negative minimum.
    pub fn new_allowing_negative(pattern: Pattern, a: f64, b: f64, t0: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::invalid("a", format!("level must be > 0, got {a}")));
        }
        if !(b.is_finite() && b >= 0.0) {
            return Err(Error::invalid("b", format!("magnitude must be >= 0, got {b}")));
        }
        if !(t0.is_finite() && (0.0..1.0).contains(&t0)) {
            return Err(Error::invalid("t0", format!("peak time must lie in [0, 1), got {t0}")));
        }
        Ok(Self { pattern, a, b, t0 })
    }

    pub fn constant(a: f64) -> Result<Self> {
        Self::new(Pattern::Constant, a, 0.0, 0.0)
    }

    pub fn pattern(&self) -> Pattern {
        self.pattern
    }
    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// Same shape with the magnitude set to zero (the non-seasonal benchmark).
    pub fn without_seasonality(&self) -> Self {
        Self { b: 0.0, ..*self }
    }

    /// θ(t).
    pub fn theta(&self, t: f64) -> f64 {
        let (a, b, t0) = (self.a, self.b, self.t0);
        match self.pattern {
            Pattern::Constant => a,
            Pattern::Sinusoid => a + b * (2.0 * PI * (t - t0)).cos(),
            Pattern::ExpSinusoid => a * (b * (2.0 * PI * (t - t0)).cos()).exp(),
            Pattern::Sawtooth => a + b * frac(t - t0),
            Pattern::Triangle => a + b * (0.5 - frac(t - t0)).abs(),
            Pattern::Spiked => {
                let s = (PI * (t - t0)).sin().abs();
                let g = 2.0 / (1.0 + s) - 1.0;
                a + b * g * g
            }
        }
    }

    pub fn bounds(&self) -> ThetaBounds {
        let (a, b) = (self.a, self.b);
        let (theta_min, theta_max) = match self.pattern {
            Pattern::Constant => (a, a),
            Pattern::Sinusoid => (a - b, a + b),
            Pattern::ExpSinusoid => (a * (-b).exp(), a * b.exp()),
            Pattern::Sawtooth => (a, a + b),
            Pattern::Triangle => (a, a + 0.5 * b),
            Pattern::Spiked => (a, a + b),
        };
        ThetaBounds { theta_min, theta_max }
    }

    /// Points in `(lo, hi)` where θ is discontinuous or not differentiable.
    pub fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        let offsets: &[f64] = match self.pattern {
            Pattern::Constant | Pattern::Sinusoid | Pattern::ExpSinusoid => &[],
            Pattern::Sawtooth | Pattern::Spiked => &[0.0],
            Pattern::Triangle => &[0.0, 0.5],
        };
        if offsets.is_empty() || self.b == 0.0 {
            return Vec::new();
        }
        let mut pts = Vec::new();
        let k0 = (lo - self.t0).floor() as i64 - 1;
        let k1 = (hi - self.t0).ceil() as i64 + 1;
        for k in k0..=k1 {
            for off in offsets {
                let p = self.t0 + k as f64 + off;
                if p > lo && p < hi {
                    pts.push(p);
                }
            }
        }
        pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        pts
    }

    /// θ̂_T(λ) = ∫₀ᵀ θ(t) e^{λt} dt; closed form where available.
    pub fn transform(&self, horizon: f64, lambda: f64) -> Result<f64> {
        if horizon < 0.0 || !horizon.is_finite() {
            return Err(Error::invalid("T", format!("horizon must be >= 0, got {horizon}")));
        }
        if horizon == 0.0 {
            return Ok(0.0);
        }
        if !self.pattern.has_closed_form() || lambda.abs() < SMALL_LAMBDA {
            return self.transform_oracle(horizon, lambda);
        }
        let level = self.a * exp_integral(horizon, lambda);
        if self.b == 0.0 {
            return Ok(level);
        }
        let seasonal = match self.pattern {
            Pattern::Constant => 0.0,
            Pattern::Sinusoid => sinusoid_part(horizon, lambda, self.t0),
            Pattern::Sawtooth => periodic_part(horizon, lambda, self.t0, |x| sawtooth_cell(x, lambda)),
            Pattern::Triangle => periodic_part(horizon, lambda, self.t0, |x| triangle_cell(x, lambda)),
            Pattern::ExpSinusoid | Pattern::Spiked => unreachable!(),
        };
        Ok(level + self.b * seasonal)
    }

    /// Adaptive quadrature of θ(t)e^{λt} over `[0, T]`, split at every kink
    /// and jump of θ.
    pub fn transform_oracle(&self, horizon: f64, lambda: f64) -> Result<f64> {
        if horizon == 0.0 {
            return Ok(0.0);
        }
        let bps = self.breakpoints(0.0, horizon);
        quad::integrate(
            |t| self.theta(t) * (lambda * t).exp(),
            0.0,
            horizon,
            &bps,
            QuadOptions::new(1e-12, 1e-12),
        )
        .map(|r| r.value)
    }
}

/// ∫₀ˣ e^{λy} dy.
fn exp_integral(x: f64, lambda: f64) -> f64 {
    (lambda * x).exp_m1() / lambda
}

/// ∫₀ˣ y e^{λy} dy.
fn exp_moment(x: f64, lambda: f64) -> f64 {
    x * (lambda * x).exp() / lambda - (lambda * x).exp_m1() / (lambda * lambda)
}

/// ∫₀ᵀ cos(2π(t − t0)) e^{λt} dt.
fn sinusoid_part(horizon: f64, lambda: f64, t0: f64) -> f64 {
    let w = 2.0 * PI;
    let denom = lambda * lambda + w * w;
    let phase = w * (horizon - t0);
    (lambda * horizon).exp() / denom * (w * phase.sin() + lambda * phase.cos())
        + (w * (w * t0).sin() - lambda * (w * t0).cos()) / denom
}

/// ∫₀ˣ y e^{λy} dy for the sawtooth cell g(y) = y on [0, 1].
fn sawtooth_cell(x: f64, lambda: f64) -> f64 {
    exp_moment(x, lambda)
}

/// ∫₀ˣ |½ − y| e^{λy} dy for x in [0, 1].
fn triangle_cell(x: f64, lambda: f64) -> f64 {
    let rising = |x: f64| 0.5 * exp_integral(x, lambda) - exp_moment(x, lambda);
    if x <= 0.5 {
        rising(x)
    } else {
        rising(0.5) + (exp_moment(x, lambda) - exp_moment(0.5, lambda))
            - 0.5 * (exp_integral(x, lambda) - exp_integral(0.5, lambda))
    }
}

/// ∫₀ᵀ g(frac(t − t0)) e^{λt} dt for a one-period cell primitive
/// `cell(x) = ∫₀ˣ g(y) e^{λy} dy`, x ∈ [0, 1].
///
/// Substituting y = t − t0 the range becomes [−t0, T − t0]. With
/// n = ⌊T − t0⌋ and α = frac(T − t0), whole periods contribute a geometric
/// sum ∑_{k=0}^{n−1} e^{λk} (empty when n < 1).
fn periodic_part<G: Fn(f64) -> f64>(horizon: f64, lambda: f64, t0: f64, cell: G) -> f64 {
    let full = cell(1.0);
    let shift = horizon - t0;
    let n = shift.floor();
    let alpha = frac(shift);
    let e_minus = (-lambda).exp();
    let inner = if n < 0.0 {
        // Both ends inside the period [−1, 0).
        e_minus * (cell(1.0 - t0 + horizon) - cell(1.0 - t0))
    } else {
        let head = e_minus * (full - cell(1.0 - t0));
        let periods = if n >= 1.0 {
            (lambda * n).exp_m1() / lambda.exp_m1()
        } else {
            0.0
        };
        head + periods * full + (lambda * n).exp() * cell(alpha)
    };
    (lambda * t0).exp() * inner
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn table1() -> Vec<SeasonalitySpec> {
        let t0 = 7.0 / 12.0;
        vec![
            SeasonalitySpec::new(Pattern::Sinusoid, 0.25, 0.15, t0).unwrap(),
            SeasonalitySpec::new(Pattern::ExpSinusoid, 0.20, 0.68, t0).unwrap(),
            SeasonalitySpec::new(Pattern::Sawtooth, 0.10, 0.30, t0).unwrap(),
            SeasonalitySpec::new(Pattern::Triangle, 0.10, 0.60, t0).unwrap(),
            SeasonalitySpec::new(Pattern::Spiked, 0.10, 0.30, t0).unwrap(),
        ]
    }

    #[test]
    fn sinusoid_peak_and_trough() {
        let s = SeasonalitySpec::new(Pattern::Sinusoid, 0.25, 0.15, 7.0 / 12.0).unwrap();
        assert_relative_eq!(s.theta(7.0 / 12.0), 0.40, epsilon = 1e-15);
        assert_relative_eq!(s.theta(1.0 / 12.0), 0.10, epsilon = 1e-15);
    }

    #[test]
    fn sawtooth_at_t0_is_level() {
        let s = SeasonalitySpec::new(Pattern::Sawtooth, 0.1, 0.3, 7.0 / 12.0).unwrap();
        assert_eq!(s.theta(7.0 / 12.0), 0.1);
        assert_eq!(s.theta(7.0 / 12.0 + 2.0), 0.1);
    }

    #[test]
    fn frac_is_half_open_for_negatives() {
        assert_eq!(frac(-0.25), 0.75);
        assert_eq!(frac(-1.0), 0.0);
        assert_eq!(frac(2.0), 0.0);
        assert!(frac(-1e-18) < 1.0);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(SeasonalitySpec::new(Pattern::Sinusoid, 0.1, 0.1, 0.0).is_err());
        assert!(SeasonalitySpec::new(Pattern::Sawtooth, 0.0, 0.1, 0.0).is_err());
        assert!(SeasonalitySpec::new(Pattern::Sawtooth, 0.1, -0.1, 0.0).is_err());
        let e = SeasonalitySpec::new(Pattern::Triangle, 0.1, 0.1, 1.0).unwrap_err();
        assert!(e.to_string().contains("t0"));
    }

    #[test]
    fn bounds_examples() {
        let s = SeasonalitySpec::new(Pattern::Sinusoid, 0.25, 0.15, 0.3).unwrap();
        let bd = s.bounds();
        assert_relative_eq!(bd.theta_min, 0.10, epsilon = 1e-15);
        assert_relative_eq!(bd.theta_max, 0.40, epsilon = 1e-15);
        let e = SeasonalitySpec::new(Pattern::ExpSinusoid, 0.20, 0.68, 0.3).unwrap();
        let bd = e.bounds();
        assert_relative_eq!(bd.theta_min, 0.20 * (-0.68f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(bd.theta_max, 0.20 * 0.68f64.exp(), epsilon = 1e-15);
    }

    #[test]
    fn sampled_minimum_respects_bounds() {
        for s in table1() {
            let bd = s.bounds();
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for i in 0..=30_000 {
                let v = s.theta(i as f64 * 1e-4);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            assert!(lo >= bd.theta_min - 1e-9, "{}: {lo} < {}", s.pattern(), bd.theta_min);
            assert!(hi <= bd.theta_max + 1e-12, "{}", s.pattern());
            assert!(bd.theta_min > 0.0);
        }
    }

    #[test]
    fn periodicity() {
        for s in table1() {
            for i in 0..500 {
                let t = i as f64 * 0.01;
                assert!((s.theta(t + 1.0) - s.theta(t)).abs() < 1e-12, "{}", s.pattern());
            }
        }
    }

    #[test]
    fn transform_trivial_cases() {
        for s in table1() {
            assert_eq!(s.transform(0.0, 1.3).unwrap(), 0.0);
        }
        let s = SeasonalitySpec::new(Pattern::Sinusoid, 0.3, 0.0, 0.4).unwrap();
        assert_relative_eq!(
            s.transform(1.0, 2.0).unwrap(),
            0.3 * (2.0f64.exp() - 1.0) / 2.0,
            max_relative = 1e-14
        );
        let c = SeasonalitySpec::constant(1.0).unwrap();
        assert_relative_eq!(
            c.transform_oracle(1.0, 1.0).unwrap(),
            std::f64::consts::E - 1.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn sawtooth_closed_form_matches_quadrature() {
        let s = SeasonalitySpec::new(Pattern::Sawtooth, 0.10, 0.30, 7.0 / 12.0).unwrap();
        let cf = s.transform(2.0, 1.0).unwrap();
        let q = s.transform_oracle(2.0, 1.0).unwrap();
        assert_relative_eq!(cf, q, max_relative = 1e-10);
    }

    #[test]
    fn triangle_short_horizon_negative_rate() {
        let s = SeasonalitySpec::new(Pattern::Triangle, 0.10, 0.60, 7.0 / 12.0).unwrap();
        let cf = s.transform(0.5, -0.8).unwrap();
        let q = s.transform_oracle(0.5, -0.8).unwrap();
        assert!((cf - q).abs() <= 1e-10 * (1.0 + q.abs()));
    }

    #[test]
    fn spiked_zero_rate_against_simpson() {
        let s = SeasonalitySpec::new(Pattern::Spiked, 0.10, 0.30, 7.0 / 12.0).unwrap();
        let q = s.transform(1.0, 0.0).unwrap();
        // Composite Simpson, split at the spike so each half is smooth.
        let simpson = |lo: f64, hi: f64, n: usize| {
            let h = (hi - lo) / n as f64;
            let mut acc = s.theta(lo) + s.theta(hi);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * s.theta(lo + i as f64 * h);
            }
            acc * h / 3.0
        };
        let t0 = 7.0 / 12.0;
        let reference = simpson(0.0, t0, 1_000_000) + simpson(t0, 1.0, 1_000_000);
        assert!((q - reference).abs() < 1e-9);
    }

    #[test]
    fn small_lambda_uses_quadrature() {
        let s = SeasonalitySpec::new(Pattern::Sawtooth, 0.10, 0.30, 0.2).unwrap();
        let v = s.transform(1.5, 1e-9).unwrap();
        let v0 = s.transform_oracle(1.5, 0.0).unwrap();
        assert!((v - v0).abs() < 1e-8);
    }

    #[test]
    fn pattern_names_round_trip() {
        for p in Pattern::ALL {
            assert_eq!(p.name().parse::<Pattern>().unwrap(), p);
        }
        assert!("wobbly".parse::<Pattern>().is_err());
    }
}
