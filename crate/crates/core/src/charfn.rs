//! Joint characteristic function of two futures log-returns.
//!
//! For factor j write f₁(t) = Σₖ uₖ e^{−λⱼ(Tₖ−t)} and f₂(t) = Σₖ uₖ e^{−2λⱼ(Tₖ−t)}.
//! The factor's contribution to log E[exp(i u₁X₁ + i u₂X₂)] is
//!
//! ```text
//!   −i ρ/σ f₁(0) (v₀ + κ θ̂_T(λ)) + A(0,T) v₀ + B(0,T)
//! ```
//!
//! with A solving the Riccati equation A' − κA + ½σ²A² + q = 0,
//! A(T) = i ρ/σ f₁(T), and B' + κθ(t)A = 0, B(T) = 0.
//!
//! Substituting Ã = A − i ρ/σ f₁ and absorbing the prefactor into B̃
//! removes every 1/σ term:
//!
//! ```text
//!   Ã' = (κ − iρσ f₁) Ã − ½σ²Ã² + ½f₁² + ½ i f₂,   Ã(T) = 0
//!   B̃' = −κ θ(t) Ã,                                 B̃(T) = 0
//! ```
//!
//! and the contribution is simply Ã(0)v₀ + B̃(0). [`CfEngine::joint_cf`] uses
//! this form; [`CfEngine::joint_cf_proposition`] evaluates the original
//! form literally, with cached θ̂ values, and the two are tested against
//! each other.

use std::collections::HashMap;
use std::sync::RwLock;

use num_complex::Complex64;

use crate::correlation::deterministic_variance;
use crate::error::{Error, Result};
use crate::model::{ModelConfig, VolFactor};
use crate::ode::{self, OdeOptions};
use crate::quad::{self, QuadOptions};
use crate::seasonality::SeasonalitySpec;

pub type ComplexValue = Complex64;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Arguments of the joint characteristic function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfArgs {
    pub u1: Complex64,
    pub u2: Complex64,
    /// Evaluation horizon T.
    pub t: f64,
    pub t1: f64,
    pub t2: f64,
}

impl CfArgs {
    pub fn new(u1: Complex64, u2: Complex64, t: f64, t1: f64, t2: f64) -> Result<Self> {
        let a = Self { u1, u2, t, t1, t2 };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t.is_finite() && self.t > 0.0) {
            return Err(Error::invalid("T", format!("horizon must be > 0, got {}", self.t)));
        }
        if self.t > self.t1.min(self.t2) {
            return Err(Error::invalid(
                "T",
                format!(
                    "horizon {} exceeds a futures maturity ({}, {})",
                    self.t, self.t1, self.t2
                ),
            ));
        }
        Ok(())
    }

    fn is_zero(&self) -> bool {
        self.u1 == Complex64::new(0.0, 0.0) && self.u2 == Complex64::new(0.0, 0.0)
    }
}

/// f₁(u, t) = u₁e^{−λ(T₁−t)} + u₂e^{−λ(T₂−t)}.
pub fn f1(lambda: f64, u1: Complex64, u2: Complex64, t: f64, t1: f64, t2: f64) -> Complex64 {
    u1 * (-lambda * (t1 - t)).exp() + u2 * (-lambda * (t2 - t)).exp()
}

/// f₂(u, t) = u₁e^{−2λ(T₁−t)} + u₂e^{−2λ(T₂−t)}.
pub fn f2(lambda: f64, u1: Complex64, u2: Complex64, t: f64, t1: f64, t2: f64) -> Complex64 {
    f1(2.0 * lambda, u1, u2, t, t1, t2)
}

/// q(u, t) = iρ(κ−λ)/σ f₁ − ½(1−ρ²)f₁² − ½ i f₂. Requires σ > 0.
pub fn q_coeff(factor: &VolFactor, u1: Complex64, u2: Complex64, t: f64, t1: f64, t2: f64) -> Result<Complex64> {
    if factor.sigma <= 0.0 {
        return Err(Error::invalid("sigma", "q is undefined for a deterministic factor"));
    }
    let VolFactor {
        lambda,
        kappa,
        sigma,
        rho,
        ..
    } = *factor;
    let g1 = f1(lambda, u1, u2, t, t1, t2);
    let g2 = f2(lambda, u1, u2, t, t1, t2);
    Ok(I * (rho * (kappa - lambda) / sigma) * g1 - 0.5 * (1.0 - rho * rho) * g1 * g1 - 0.5 * I * g2)
}

/// Solution of the literal Riccati system for one factor.
#[derive(Debug, Clone)]
pub struct FactorOdeSolution {
    /// Time nodes in ascending order, from 0 to T.
    pub grid: Vec<f64>,
    /// A(t, T) at each node.
    pub a: Vec<Complex64>,
    pub b_at_0: Complex64,
}

impl FactorOdeSolution {
    pub fn a_at_0(&self) -> Complex64 {
        self.a[0]
    }
}

/// θ breakpoints of `spec` inside (0, T), mapped to τ = T − t and sorted,
/// with the end points 0 and T included.
fn tau_segments(spec: &SeasonalitySpec, horizon: f64) -> Vec<f64> {
    let mut taus: Vec<f64> = spec
        .breakpoints(0.0, horizon)
        .into_iter()
        .map(|t| horizon - t)
        .collect();
    taus.push(0.0);
    taus.push(horizon);
    taus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    taus.dedup();
    taus
}

/// Integrates the literal system of the proposition backward from T to 0.
pub fn solve_factor_odes(
    factor: &VolFactor,
    u1: Complex64,
    u2: Complex64,
    horizon: f64,
    t1: f64,
    t2: f64,
    opts: &OdeOptions,
) -> Result<FactorOdeSolution> {
    if factor.sigma <= 0.0 {
        return Err(Error::invalid("sigma", "the Riccati system needs sigma > 0"));
    }
    let VolFactor {
        lambda,
        kappa,
        sigma,
        rho,
        seasonality,
        ..
    } = *factor;
    let a_terminal = I * (rho / sigma) * f1(lambda, u1, u2, horizon, t1, t2);
    let mut grid = vec![horizon];
    let mut values = vec![a_terminal];
    let mut state = [a_terminal, Complex64::new(0.0, 0.0)];
    let mut h = 0.02f64.min(horizon);
    let segments = tau_segments(&seasonality, horizon);
    for w in segments.windows(2) {
        // Interior of the segment: θ is continuous here.
        let theta_mid_t = horizon - 0.5 * (w[0] + w[1]);
        let rhs = |tau: f64, y: &[Complex64; 2]| {
            let t = horizon - tau;
            let q = q_coeff(factor, u1, u2, t, t1, t2).unwrap();
            let theta = theta_inside(&seasonality, t, theta_mid_t, w[0], w[1], horizon);
            [
                -kappa * y[0] + 0.5 * sigma * sigma * y[0] * y[0] + q,
                kappa * theta * y[0],
            ]
        };
        let (y, h_last, _) = ode::dopri5_observed(
            rhs,
            |tau, y| {
                grid.push(horizon - tau);
                values.push(y[0]);
            },
            w[0],
            w[1],
            state,
            h,
            opts,
        )?;
        state = y;
        h = h_last;
    }
    grid.reverse();
    values.reverse();
    Ok(FactorOdeSolution {
        grid,
        a: values,
        b_at_0: state[1],
    })
}

/// θ(t) for a point of the τ-segment `[tau_lo, tau_hi]`, taking one-sided
/// limits at the segment ends so a jump is never sampled from the wrong side.
#[inline]
fn theta_inside(spec: &SeasonalitySpec, t: f64, t_mid: f64, tau_lo: f64, tau_hi: f64, horizon: f64) -> f64 {
    let t_hi = horizon - tau_lo;
    let t_lo = horizon - tau_hi;
    let width = t_hi - t_lo;
    let guard = 1e-12 * width.max(1e-300);
    let tc = t.clamp(t_lo + guard, t_hi - guard);
    if width > 0.0 {
        spec.theta(tc)
    } else {
        spec.theta(t_mid)
    }
}

/// Log of one factor's CF contribution, `Ã(0)v₀ + B̃(0)`, from the
/// σ-regular Riccati form. Works for σ = 0 as well.
pub fn factor_exponent(
    factor: &VolFactor,
    u1: Complex64,
    u2: Complex64,
    horizon: f64,
    t1: f64,
    t2: f64,
    opts: &OdeOptions,
) -> Result<Complex64> {
    if u1 == Complex64::new(0.0, 0.0) && u2 == Complex64::new(0.0, 0.0) {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let VolFactor {
        lambda,
        kappa,
        sigma,
        rho,
        v0,
        seasonality,
    } = *factor;
    let half_s2 = 0.5 * sigma * sigma;
    let mut state = [Complex64::new(0.0, 0.0); 2];
    let mut h = 0.02f64.min(horizon);
    let segments = tau_segments(&seasonality, horizon);
    for w in segments.windows(2) {
        let t_mid = horizon - 0.5 * (w[0] + w[1]);
        let rhs = |tau: f64, y: &[Complex64; 2]| {
            let t = horizon - tau;
            let g1 = f1(lambda, u1, u2, t, t1, t2);
            let g2 = f2(lambda, u1, u2, t, t1, t2);
            let a = y[0];
            let da = -(kappa - I * (rho * sigma) * g1) * a + half_s2 * a * a - 0.5 * g1 * g1 - 0.5 * I * g2;
            let theta = theta_inside(&seasonality, t, t_mid, w[0], w[1], horizon);
            [da, kappa * theta * a]
        };
        let (y, h_last, _) = ode::dopri5(rhs, w[0], w[1], state, h, opts)?;
        state = y;
        h = h_last;
    }
    Ok(state[0] * v0 + state[1])
}

/// Covariance of the Gaussian log-returns generated by a deterministic
/// variance factor: entries ∫₀ᵀ e^{−λ(Tₖ−t)} e^{−λ(Tₘ−t)} v(t) dt.
pub fn deterministic_covariance(factor: &VolFactor, horizon: f64, t1: f64, t2: f64) -> Result<[[f64; 2]; 2]> {
    let lambda = factor.lambda;
    let bps = factor.seasonality.breakpoints(0.0, horizon);
    let opts = QuadOptions::new(1e-14, 1e-12);
    let entry = |ta: f64, tb: f64| -> Result<f64> {
        quad::integrate(
            |t| (-lambda * (ta - t)).exp() * (-lambda * (tb - t)).exp() * deterministic_variance(factor, t),
            0.0,
            horizon,
            &bps,
            opts,
        )
        .map(|r| r.value)
    };
    let c11 = entry(t1, t1)?;
    let c22 = entry(t2, t2)?;
    let c12 = entry(t1, t2)?;
    Ok([[c11, c12], [c12, c22]])
}

fn gaussian_exponent(cov: &[[f64; 2]; 2], u1: Complex64, u2: Complex64) -> Complex64 {
    let quad_form = u1 * u1 * cov[0][0] + 2.0 * u1 * u2 * cov[0][1] + u2 * u2 * cov[1][1];
    -0.5 * quad_form - 0.5 * I * (u1 * cov[0][0] + u2 * cov[1][1])
}

type CacheKey = (u8, u64, u64, u64, u64, u64);

/// Characteristic-function evaluator bound to one model.
///
/// Holds the ODE tolerances and a cache of θ̂ values used by the literal
/// evaluation path. The cache lock is never held while a value is computed.
#[derive(Debug)]
pub struct CfEngine {
    config: ModelConfig,
    ode: OdeOptions,
    theta_cache: RwLock<HashMap<CacheKey, f64>>,
}

impl Clone for CfEngine {
    fn clone(&self) -> Self {
        Self::with_options(self.config.clone(), self.ode)
    }
}

impl CfEngine {
    pub fn new(config: ModelConfig) -> Self {
        Self::with_options(config, OdeOptions::default())
    }

    pub fn with_options(config: ModelConfig, ode: OdeOptions) -> Self {
        Self {
            config,
            ode,
            theta_cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn ode_options(&self) -> &OdeOptions {
        &self.ode
    }

    /// φ(u; T, T₁, T₂) = E[exp(i u₁X₁(T) + i u₂X₂(T))].
    pub fn joint_cf(&self, args: &CfArgs) -> Result<Complex64> {
        Ok(self.joint_log_cf(args)?.exp())
    }

    /// log φ, summed over factors.
    pub fn joint_log_cf(&self, args: &CfArgs) -> Result<Complex64> {
        args.validate()?;
        if args.is_zero() {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let mut total = Complex64::new(0.0, 0.0);
        for factor in self.config.factors() {
            total += if factor.is_deterministic() {
                let cov = deterministic_covariance(factor, args.t, args.t1, args.t2)?;
                gaussian_exponent(&cov, args.u1, args.u2)
            } else {
                factor_exponent(factor, args.u1, args.u2, args.t, args.t1, args.t2, &self.ode)?
            };
        }
        Ok(total)
    }

    /// CF of the single log-return X₁(T) of the contract maturing at `t1`.
    pub fn single_cf(&self, u: Complex64, horizon: f64, t1: f64) -> Result<Complex64> {
        self.joint_cf(&CfArgs::new(u, Complex64::new(0.0, 0.0), horizon, t1, t1)?)
    }

    /// Φ(u) = exp(i Σ uₖ ln F(0,Tₖ)) φ(u), the CF of the log-prices.
    pub fn log_price_cf(&self, args: &CfArgs) -> Result<Complex64> {
        let ln_f1 = self.config.initial_price(args.t1)?.ln();
        let ln_f2 = self.config.initial_price(args.t2)?.ln();
        let phase = I * (args.u1 * ln_f1 + args.u2 * ln_f2);
        Ok((phase + self.joint_log_cf(args)?).exp())
    }

    /// Bivariate Gaussian CF of the log-returns when every factor is
    /// deterministic (σ = 0).
    pub fn deterministic_cf(&self, args: &CfArgs) -> Result<Complex64> {
        args.validate()?;
        if let Some((i, _)) = self
            .config
            .factors()
            .iter()
            .enumerate()
            .find(|(_, f)| !f.is_deterministic())
        {
            return Err(Error::invalid(
                format!("factor.{}.sigma", i + 1),
                "deterministic CF requires sigma = 0 on every factor",
            ));
        }
        let cov = self.log_return_covariance(args.t, args.t1, args.t2)?;
        Ok(gaussian_exponent(&cov, args.u1, args.u2).exp())
    }

    /// Sum over factors of the deterministic-variance covariance matrix.
    pub fn log_return_covariance(&self, horizon: f64, t1: f64, t2: f64) -> Result<[[f64; 2]; 2]> {
        let mut cov = [[0.0; 2]; 2];
        for f in self.config.factors() {
            let c = deterministic_covariance(f, horizon, t1, t2)?;
            for i in 0..2 {
                for j in 0..2 {
                    cov[i][j] += c[i][j];
                }
            }
        }
        Ok(cov)
    }

    /// θ̂_T(λ) with memoisation keyed on the exact seasonality parameters.
    pub fn theta_hat(&self, spec: &SeasonalitySpec, horizon: f64, lambda: f64) -> Result<f64> {
        let key = (
            spec.pattern() as u8,
            spec.a().to_bits(),
            spec.b().to_bits(),
            spec.t0().to_bits(),
            lambda.to_bits(),
            horizon.to_bits(),
        );
        if let Some(v) = self.theta_cache.read().unwrap().get(&key) {
            return Ok(*v);
        }
        let v = spec.transform(horizon, lambda)?;
        self.theta_cache.write().unwrap().insert(key, v);
        Ok(v)
    }

    pub fn theta_cache_len(&self) -> usize {
        self.theta_cache.read().unwrap().len()
    }

    /// The proposition's product formula evaluated literally: prefactor with
    /// θ̂_T(λⱼ), A from the Riccati equation with A(T) = iρ/σ f₁(T), and B by
    /// integrating κθA. Deterministic factors use the Gaussian form.
    pub fn joint_cf_proposition(&self, args: &CfArgs) -> Result<Complex64> {
        args.validate()?;
        if args.is_zero() {
            return Ok(Complex64::new(1.0, 0.0));
        }
        let mut total = Complex64::new(0.0, 0.0);
        for factor in self.config.factors() {
            if factor.is_deterministic() {
                let cov = deterministic_covariance(factor, args.t, args.t1, args.t2)?;
                total += gaussian_exponent(&cov, args.u1, args.u2);
                continue;
            }
            let VolFactor {
                lambda,
                kappa,
                sigma,
                rho,
                v0,
                seasonality,
            } = *factor;
            let sol = solve_factor_odes(factor, args.u1, args.u2, args.t, args.t1, args.t2, &self.ode)?;
            let theta_hat = self.theta_hat(&seasonality, args.t, lambda)?;
            let f1_0 = f1(lambda, args.u1, args.u2, 0.0, args.t1, args.t2);
            total += -I * (rho / sigma) * f1_0 * (v0 + kappa * theta_hat) + sol.a_at_0() * v0 + sol.b_at_0;
        }
        Ok(total.exp())
    }
}
