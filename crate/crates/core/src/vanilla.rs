//! European options on futures: Fourier pricing from the single CF and
//! Black-76 quoting.

use std::f64::consts::{FRAC_1_PI, SQRT_2};

use num_complex::Complex64;
use statrs::function::erf::erfc;

use crate::charfn::{CfArgs, CfEngine};
use crate::error::{Error, Result};
use crate::quad::{self, QuadOptions, TailOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptionKind {
    Call,
    Put,
}

/// Contract terms of a vanilla option on a futures contract.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VanillaSpec {
    pub strike: f64,
    /// Option expiry T.
    pub expiry: f64,
    /// Maturity of the underlying futures contract, ≥ T.
    pub futures_maturity: f64,
    pub kind: OptionKind,
}

impl VanillaSpec {
    pub fn new(strike: f64, expiry: f64, futures_maturity: f64, kind: OptionKind) -> Result<Self> {
        if !(strike.is_finite() && strike > 0.0) {
            return Err(Error::invalid("strike", format!("must be > 0, got {strike}")));
        }
        if !(expiry.is_finite() && expiry > 0.0) {
            return Err(Error::invalid("expiry", format!("must be > 0, got {expiry}")));
        }
        if !(futures_maturity >= expiry) {
            return Err(Error::invalid(
                "futures_maturity",
                format!("must be >= expiry {expiry}, got {futures_maturity}"),
            ));
        }
        Ok(Self {
            strike,
            expiry,
            futures_maturity,
            kind,
        })
    }

    /// Market convention: option and futures mature together.
    pub fn call(strike: f64, maturity: f64) -> Result<Self> {
        Self::new(strike, maturity, maturity, OptionKind::Call)
    }
}

/// Price with numerical diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceResult {
    pub price: f64,
    /// Absolute error estimate of the Fourier quadrature, in price units.
    pub error_estimate: f64,
    /// Number of integrand evaluations.
    pub evaluations: usize,
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Black-76 price of a European option on a futures contract.
pub fn black76_price(forward: f64, strike: f64, expiry: f64, vol: f64, rate: f64, kind: OptionKind) -> f64 {
    let df = (-rate * expiry).exp();
    let sd = vol * expiry.sqrt();
    if sd <= 0.0 {
        return df
            * match kind {
                OptionKind::Call => (forward - strike).max(0.0),
                OptionKind::Put => (strike - forward).max(0.0),
            };
    }
    let d1 = ((forward / strike).ln() + 0.5 * sd * sd) / sd;
    let d2 = d1 - sd;
    match kind {
        OptionKind::Call => df * (forward * norm_cdf(d1) - strike * norm_cdf(d2)),
        OptionKind::Put => df * (strike * norm_cdf(-d2) - forward * norm_cdf(-d1)),
    }
}

fn black76_vega(forward: f64, strike: f64, expiry: f64, vol: f64, rate: f64) -> f64 {
    let sd = vol * expiry.sqrt();
    let d1 = ((forward / strike).ln() + 0.5 * sd * sd) / sd;
    (-rate * expiry).exp() * forward * (-0.5 * d1 * d1).exp() / (2.0 * std::f64::consts::PI).sqrt() * expiry.sqrt()
}

pub const IMPLIED_VOL_LOWER: f64 = 1e-6;
pub const IMPLIED_VOL_UPPER: f64 = 5.0;

/// Black-76 implied volatility, solved to a price error of 1e-10 by Newton
/// steps safeguarded with bisection inside `[1e-6, 5]`.
pub fn implied_vol(price: f64, forward: f64, strike: f64, expiry: f64, rate: f64, kind: OptionKind) -> Result<f64> {
    let (mut lo, mut hi) = (IMPLIED_VOL_LOWER, IMPLIED_VOL_UPPER);
    let p_lo = black76_price(forward, strike, expiry, lo, rate, kind);
    let p_hi = black76_price(forward, strike, expiry, hi, rate, kind);
    if !(price > p_lo && price < p_hi) {
        return Err(Error::NoSolution {
            target: price,
            lower: p_lo,
            upper: p_hi,
        });
    }
    let mut vol = {
        // Brenner–Subrahmanyam style starting point.
        let df = (-rate * expiry).exp();
        (price / (df * forward) * (2.0 * std::f64::consts::PI / expiry).sqrt()).clamp(lo * 10.0, hi * 0.5)
    };
    for _ in 0..200 {
        let diff = black76_price(forward, strike, expiry, vol, rate, kind) - price;
        if diff.abs() <= 1e-10 {
            return Ok(vol);
        }
        if diff > 0.0 {
            hi = vol;
        } else {
            lo = vol;
        }
        let vega = black76_vega(forward, strike, expiry, vol, rate);
        let newton = vol - diff / vega;
        vol = if vega > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-15 {
            return Ok(vol);
        }
    }
    Ok(vol)
}

/// Tail settings for the vanilla Fourier integral, panel width scaled to
/// the expected spread of the log-return.
fn tail_options(expiry: f64) -> TailOptions {
    TailOptions {
        panel_width: (4.0 / expiry.sqrt()).clamp(2.0, 40.0),
        tail_tol: 1e-13,
        quiet_panels: 3,
        max_panels: 2000,
        panel: QuadOptions::new(1e-14, 1e-10),
    }
}

fn forward_and_discount(engine: &CfEngine, spec: &VanillaSpec) -> Result<(f64, f64)> {
    let cfg = engine.config();
    Ok((cfg.initial_price(spec.futures_maturity)?, cfg.discount(spec.expiry)))
}

/// Call value in units of the discounted forward, computed as
/// ½(1 − e^k) + (1/π)∫₀^∞ Re[e^{−iuk}(φ(u−i) − e^k φ(u))/(iu)] du with
/// k = ln(K/F). This is F·P₁ − K·P₂ of the two-probability representation.
fn normalized_call(engine: &CfEngine, spec: &VanillaSpec, k: f64) -> Result<quad::QuadResult> {
    let t = spec.expiry;
    let tm = spec.futures_maturity;
    let ek = k.exp();
    let mut failure = None;
    let integrand = |u: f64| {
        let zero = Complex64::new(0.0, 0.0);
        let phi_shift = CfArgs::new(Complex64::new(u, -1.0), zero, t, tm, tm).and_then(|a| engine.joint_cf(&a));
        let phi = CfArgs::new(Complex64::new(u, 0.0), zero, t, tm, tm).and_then(|a| engine.joint_cf(&a));
        match (phi_shift, phi) {
            (Ok(a), Ok(b)) => {
                let z = Complex64::new(0.0, -u * k).exp() * (a - ek * b);
                // Re[z / (iu)] = Im(z) / u
                z.im / u
            }
            (Err(e), _) | (_, Err(e)) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    let r = quad::integrate_to_infinity(integrand, 0.0, tail_options(t));
    if let Some(e) = failure {
        return Err(e);
    }
    r
}

/// European call or put price by Fourier inversion. Puts follow from
/// put–call parity.
pub fn price_vanilla(engine: &CfEngine, spec: &VanillaSpec) -> Result<PriceResult> {
    let (fwd, df) = forward_and_discount(engine, spec)?;
    let k = (spec.strike / fwd).ln();
    let r = normalized_call(engine, spec, k)?;
    let scale = df * fwd;
    let call = scale * (0.5 * (1.0 - k.exp()) + FRAC_1_PI * r.value);
    // Clip tiny quadrature noise outside the no-arbitrage band.
    let call = call.clamp((df * (fwd - spec.strike)).max(0.0), scale);
    let price = match spec.kind {
        OptionKind::Call => call,
        OptionKind::Put => call - df * (fwd - spec.strike),
    };
    Ok(PriceResult {
        price,
        error_estimate: scale * FRAC_1_PI * r.abs_error,
        evaluations: 2 * r.evaluations,
    })
}

/// Put priced directly from the inverted probabilities,
/// P = e^{−rT}[K(1 − P₂) − F(1 − P₁)], without invoking parity.
pub fn price_put_by_inversion(engine: &CfEngine, spec: &VanillaSpec) -> Result<PriceResult> {
    let (fwd, df) = forward_and_discount(engine, spec)?;
    let k = (spec.strike / fwd).ln();
    let r = normalized_call(engine, spec, k)?;
    let scale = df * fwd;
    // 1 − P_j = ½ − (1/π) I_j, so the put is the mirror of the call integral.
    let put = scale * (0.5 * (k.exp() - 1.0) + FRAC_1_PI * r.value);
    Ok(PriceResult {
        price: put,
        error_estimate: scale * FRAC_1_PI * r.abs_error,
        evaluations: 2 * r.evaluations,
    })
}

/// Black-76 implied volatility of the model price.
pub fn model_implied_vol(engine: &CfEngine, spec: &VanillaSpec) -> Result<f64> {
    let (fwd, _) = forward_and_discount(engine, spec)?;
    let p = price_vanilla(engine, spec)?;
    resolved_implied_vol(&p, fwd, spec, engine.config().rate())
}

/// Implied vol of a Fourier price, inverted on the out-of-the-money side.
/// Fails with `NoSolution` when the time value is within the pricing error,
/// as for deep in-the-money options where any vol reproduces the price.
pub fn resolved_implied_vol(p: &PriceResult, forward: f64, spec: &VanillaSpec, rate: f64) -> Result<f64> {
    let df = (-rate * spec.expiry).exp();
    let (otm_kind, otm_price) = match (spec.kind, spec.strike >= forward) {
        (OptionKind::Call, true) | (OptionKind::Put, false) => (spec.kind, p.price),
        (OptionKind::Call, false) => (OptionKind::Put, p.price - df * (forward - spec.strike)),
        (OptionKind::Put, true) => (OptionKind::Call, p.price + df * (forward - spec.strike)),
    };
    let resolution = (10.0 * p.error_estimate).max(1e-8 * df * forward);
    if otm_price <= resolution {
        return Err(Error::NoSolution {
            target: otm_price,
            lower: resolution,
            upper: df * forward,
        });
    }
    implied_vol(otm_price, forward, spec.strike, spec.expiry, rate, otm_kind)
}

/// Black-76 price using the Gaussian total variance of a deterministic
/// (σ = 0) model: Σⱼ ∫₀ᵀ e^{−2λⱼ(T_m−t)} vⱼ(t) dt.
pub fn gaussian_model_price(engine: &CfEngine, spec: &VanillaSpec) -> Result<f64> {
    let (fwd, _) = forward_and_discount(engine, spec)?;
    let cov = engine.log_return_covariance(spec.expiry, spec.futures_maturity, spec.futures_maturity)?;
    let vol = (cov[0][0] / spec.expiry).sqrt();
    Ok(black76_price(
        fwd,
        spec.strike,
        spec.expiry,
        vol,
        engine.config().rate(),
        spec.kind,
    ))
}
