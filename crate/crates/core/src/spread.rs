//! Calendar spread options.
//!
//! The call is priced from the joint characteristic function with a lower
//! bound of the form e^{−rT} E[(F₁ − F₂ − K) 1{Y > k}], where
//! Y = x₁ − β x₂ is a tilted combination of the two log-returns. For a fixed
//! tilt β the bound, damped by e^{δk}, has the one-dimensional Fourier
//! transform
//!
//! ```text
//!   Ψ(γ) = [F₁ φ(z−i, −βz) − F₂ φ(z, −βz−i) − K φ(z, −βz)] / (iz),  z = γ − iδ,
//! ```
//!
//! so every threshold k is recovered from the same Ψ samples and the bound
//! is maximised over k at negligible cost. The tilt comes from linearising
//! ln(F₂ + K) around the forward, β = F₂/(F₂ + K); at K = 0 this gives
//! β = 1 and the region {Y > 0} is the exact exercise region, so the bound is
//! the price.
//!
//! Implied correlations invert a Gaussian-copula (bivariate lognormal)
//! spread pricer in its correlation parameter.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::{FRAC_1_PI, PI, SQRT_2};
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::charfn::{CfArgs, CfEngine};
use crate::error::{Error, Result};
use crate::quad::{self, QuadOptions, TailOptions};
use crate::vanilla::{black76_price, model_implied_vol, OptionKind, PriceResult, VanillaSpec};

/// Calendar spread option terms, payoff (F(T,T₁) − F(T,T₂) − K)⁺ for the call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsoSpec {
    pub expiry: f64,
    pub t1: f64,
    pub t2: f64,
    /// May be negative.
    pub strike: f64,
}

impl CsoSpec {
    pub fn new(expiry: f64, t1: f64, t2: f64, strike: f64) -> Result<Self> {
        if !(expiry.is_finite() && expiry > 0.0) {
            return Err(Error::invalid("expiry", format!("must be > 0, got {expiry}")));
        }
        if !(expiry <= t1) {
            return Err(Error::invalid("t1", format!("must be >= expiry {expiry}, got {t1}")));
        }
        if !(t1 < t2) {
            return Err(Error::invalid("t2", format!("must exceed T1 = {t1}, got {t2}")));
        }
        if !strike.is_finite() {
            return Err(Error::invalid("strike", "must be finite"));
        }
        Ok(Self { expiry, t1, t2, strike })
    }
}

/// Numerical settings of the spread pricer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadOptions {
    /// Exponential damping δ of the threshold transform.
    pub damping: f64,
    /// Maximise the bound over the threshold (otherwise use the linearised one).
    pub optimize_threshold: bool,
    /// Absolute tail tolerance of the Fourier integral, in price units.
    pub tail_tol: f64,
    /// Relative tolerance of the adaptive quadrature on each panel.
    pub rel_tol: f64,
}

impl Default for SpreadOptions {
    fn default() -> Self {
        Self {
            damping: 0.75,
            optimize_threshold: true,
            tail_tol: 1e-8,
            rel_tol: 1e-8,
        }
    }
}

/// Diagnostics of a lower-bound evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsoResult {
    pub price: PriceResult,
    pub tilt: f64,
    /// Optimal threshold on the tilted log-return combination.
    pub threshold: f64,
    pub damping: f64,
}

/// Lower-bound calendar spread call.
pub fn cso_call(engine: &CfEngine, spec: &CsoSpec) -> Result<PriceResult> {
    cso_call_detailed(engine, spec, &SpreadOptions::default()).map(|r| r.price)
}

/// Calendar spread put by the model-free parity
/// CSP = CSC − e^{−rT}(F₁ − F₂ − K).
pub fn cso_put(engine: &CfEngine, spec: &CsoSpec) -> Result<PriceResult> {
    let call = cso_call(engine, spec)?;
    Ok(PriceResult {
        price: call.price - spread_forward_value(engine, spec)?,
        ..call
    })
}

/// e^{−rT}(F(0,T₁) − F(0,T₂) − K).
pub fn spread_forward_value(engine: &CfEngine, spec: &CsoSpec) -> Result<f64> {
    let cfg = engine.config();
    Ok(cfg.discount(spec.expiry) * (cfg.initial_price(spec.t1)? - cfg.initial_price(spec.t2)? - spec.strike))
}

/// Lower-bound call with explicit options. If the CF is not finite on the
/// damped contour the damping is halved (twice at most) before giving up.
pub fn cso_call_detailed(engine: &CfEngine, spec: &CsoSpec, opts: &SpreadOptions) -> Result<CsoResult> {
    let mut damping = opts.damping;
    let mut last_err = None;
    for _ in 0..3 {
        match lower_bound(engine, spec, opts, damping) {
            Ok(r) => return Ok(r),
            Err(e @ Error::OdeFailure { .. }) => {
                last_err = Some(e);
                damping *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap())
}

fn lower_bound(engine: &CfEngine, spec: &CsoSpec, opts: &SpreadOptions, damping: f64) -> Result<CsoResult> {
    let cfg = engine.config();
    let f1 = cfg.initial_price(spec.t1)?;
    let f2 = cfg.initial_price(spec.t2)?;
    let df = cfg.discount(spec.expiry);
    let strike = spec.strike;
    let (tilt, k_lin) = if f2 + strike > 0.0 {
        (f2 / (f2 + strike), ((f2 + strike) / f1).ln())
    } else {
        // Deeply negative strikes: the call is almost surely exercised.
        (1.0, (f2 / f1).ln() - 1.0)
    };

    let zero_d = Complex64::new(0.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let cf = |u1: Complex64, u2: Complex64| -> Result<Complex64> {
        engine.joint_cf(&CfArgs {
            u1,
            u2,
            t: spec.expiry,
            t1: spec.t1,
            t2: spec.t2,
        })
    };
    let psi = |gamma: f64| -> Result<Complex64> {
        let z = Complex64::new(gamma, -damping);
        let a = cf(z - i, -tilt * z)?;
        let b = cf(z, -tilt * z - i)?;
        let c = if strike != 0.0 { cf(z, -tilt * z)? } else { zero_d };
        Ok((f1 * a - f2 * b - strike * c) / (i * z))
    };

    let cache: RefCell<HashMap<u64, Complex64>> = RefCell::new(HashMap::new());
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let psi_cached = |gamma: f64| -> Complex64 {
        if let Some(v) = cache.borrow().get(&gamma.to_bits()) {
            return *v;
        }
        let v = match psi(gamma) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                zero_d
            }
        };
        cache.borrow_mut().insert(gamma.to_bits(), v);
        v
    };
    let integrand = |k: f64| move |gamma: f64| (Complex64::new(0.0, -gamma * k).exp() * psi_cached(gamma)).re;

    let tail = TailOptions {
        panel_width: (3.0 / spec.expiry.sqrt()).clamp(2.0, 30.0),
        tail_tol: opts.tail_tol,
        quiet_panels: 3,
        max_panels: 2000,
        panel: QuadOptions::new(opts.tail_tol * 1e-2, opts.rel_tol),
    };
    let base = quad::integrate_to_infinity(integrand(k_lin), 0.0, tail);
    if let Some(e) = failure.borrow_mut().take() {
        return Err(e);
    }
    let base = base?;
    let bound_at = |k: f64| -> f64 {
        let v = quad::apply_gk21(integrand(k), &base.intervals);
        (-damping * k).exp() * FRAC_1_PI * v
    };

    let (threshold, value) = if opts.optimize_threshold {
        maximize(&bound_at, k_lin, 0.1)
    } else {
        (k_lin, bound_at(k_lin))
    };
    if let Some(e) = failure.borrow_mut().take() {
        return Err(e);
    }
    let floor = (f1 - f2 - strike).max(0.0);
    let evaluations = cache.borrow().len();
    Ok(CsoResult {
        price: PriceResult {
            price: df * value.max(floor),
            error_estimate: df * (-damping * threshold).exp() * FRAC_1_PI * base.abs_error,
            evaluations,
        },
        tilt,
        threshold,
        damping,
    })
}

/// Golden-section maximisation of a unimodal function starting from a
/// bracket `[x0 − w, x0 + w]` that is widened until the maximum is interior.
fn maximize<F: Fn(f64) -> f64>(f: &F, x0: f64, w: f64) -> (f64, f64) {
    let (mut a, mut b) = (x0 - w, x0 + w);
    let fm = f(x0);
    for _ in 0..20 {
        let (fa, fb) = (f(a), f(b));
        if fa <= fm && fb <= fm {
            break;
        }
        let step = b - a;
        if fa > fm {
            a -= step;
        }
        if fb > fm {
            b += step;
        }
    }
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-9 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    if fx >= fm {
        (x, fx)
    } else {
        (x0, fm)
    }
}

fn hermite_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| quad::gauss_hermite(200))
}

/// Gaussian-copula spread call with Black-76 margins: conditions on the
/// second leg's driver and integrates the conditional Black price with a
/// 200-node Gauss–Hermite rule.
pub fn copula_spread_call(
    forwards: (f64, f64),
    vols: (f64, f64),
    expiry: f64,
    strike: f64,
    rho: f64,
    rate: f64,
) -> f64 {
    let (x, w) = hermite_rule();
    let (f1, f2) = forwards;
    let sd1 = vols.0 * expiry.sqrt();
    let sd2 = vols.1 * expiry.sqrt();
    let cond_sd = sd1 * (1.0 - rho * rho).max(0.0).sqrt();
    let mut acc = 0.0;
    for (xi, wi) in x.iter().zip(w) {
        let z = SQRT_2 * xi;
        let s2 = f2 * (sd2 * z - 0.5 * sd2 * sd2).exp();
        let f1c = f1 * (rho * sd1 * z - 0.5 * rho * rho * sd1 * sd1).exp();
        let k_eff = s2 + strike;
        let v = if k_eff <= 0.0 {
            f1c - k_eff
        } else if cond_sd <= 0.0 {
            (f1c - k_eff).max(0.0)
        } else {
            black76_price(f1c, k_eff, 1.0, cond_sd, 0.0, OptionKind::Call)
        };
        acc += wi * v;
    }
    (-rate * expiry).exp() * acc / PI.sqrt()
}

/// Correlation bracket of the implied-correlation search.
pub const CORR_EPS: f64 = 1e-9;

/// Correlation of the Gaussian-copula pricer that reproduces `target`.
pub fn implied_correlation(
    target: f64,
    forwards: (f64, f64),
    leg_vols: (f64, f64),
    expiry: f64,
    strike: f64,
    rate: f64,
) -> Result<f64> {
    let price = |rho: f64| copula_spread_call(forwards, leg_vols, expiry, strike, rho, rate);
    let (mut lo, mut hi) = (-1.0 + CORR_EPS, 1.0 - CORR_EPS);
    let (p_lo, p_hi) = (price(lo), price(hi));
    // Price decreases in ρ.
    if !(target <= p_lo && target >= p_hi) {
        return Err(Error::NoSolution {
            target,
            lower: p_hi,
            upper: p_lo,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let diff = price(mid) - target;
        if diff.abs() <= 1e-12 || hi - lo < 1e-14 {
            return Ok(mid);
        }
        if diff > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Implied correlation of a model CSO price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpliedCorrelation {
    pub correlation: f64,
    pub cso_price: f64,
    pub leg_vols: (f64, f64),
}

/// Prices the CSO in the model, then inverts the copula pricer. Leg vols
/// default to the model's ATM implied vols of each leg at the option expiry.
pub fn model_implied_correlation(
    engine: &CfEngine,
    spec: &CsoSpec,
    leg_vols: Option<(f64, f64)>,
) -> Result<ImpliedCorrelation> {
    let cfg = engine.config();
    let f1 = cfg.initial_price(spec.t1)?;
    let f2 = cfg.initial_price(spec.t2)?;
    let leg_vols = match leg_vols {
        Some(v) => v,
        None => {
            let v1 = model_implied_vol(engine, &VanillaSpec::new(f1, spec.expiry, spec.t1, OptionKind::Call)?)?;
            let v2 = model_implied_vol(engine, &VanillaSpec::new(f2, spec.expiry, spec.t2, OptionKind::Call)?)?;
            (v1, v2)
        }
    };
    let cso_price = cso_call(engine, spec)?.price;
    let correlation = implied_correlation(cso_price, (f1, f2), leg_vols, spec.expiry, spec.strike, cfg.rate())?;
    Ok(ImpliedCorrelation {
        correlation,
        cso_price,
        leg_vols,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(CsoSpec::new(0.5, 0.4, 1.0, 0.0).is_err());
        assert!(CsoSpec::new(0.5, 0.5, 0.5, 0.0).is_err());
        assert!(CsoSpec::new(0.5, 0.5, 1.0, -10.0).is_ok());
    }

    #[test]
    fn copula_independent_legs_match_monte_carlo_free_limit() {
        // ρ = 0 with a vanishing second leg collapses to Black on leg one.
        let p = copula_spread_call((100.0, 1e-9), (0.3, 0.2), 1.0, 5.0, 0.0, 0.0);
        let b = black76_price(100.0, 5.0, 1.0, 0.3, 0.0, OptionKind::Call);
        assert!((p - b).abs() < 1e-8);
    }

    #[test]
    fn copula_decreasing_in_correlation() {
        let mut prev = f64::INFINITY;
        for i in 0..=40 {
            let rho = -0.99 + i as f64 * 0.0495;
            let p = copula_spread_call((100.0, 100.0), (0.3, 0.2), 0.5, 2.0, rho, 0.0);
            assert!(p < prev);
            prev = p;
        }
    }

    #[test]
    fn copula_perfect_correlation_equal_legs_is_worthless() {
        let p = copula_spread_call((100.0, 100.0), (0.25, 0.25), 1.0, 0.0, 1.0 - CORR_EPS, 0.0);
        assert!(p < 1e-3);
        let rho = implied_correlation(1e-3, (100.0, 100.0), (0.25, 0.25), 1.0, 0.0, 0.0).unwrap();
        assert!(rho > 0.999);
    }

    #[test]
    fn implied_correlation_round_trip() {
        let p = copula_spread_call((100.0, 98.0), (0.35, 0.22), 0.75, 3.0, 0.5, 0.01);
        let rho = implied_correlation(p, (100.0, 98.0), (0.35, 0.22), 0.75, 3.0, 0.01).unwrap();
        assert!((rho - 0.5).abs() < 1e-8, "{rho}");
    }

    #[test]
    fn unattainable_target_reported() {
        match implied_correlation(500.0, (100.0, 100.0), (0.3, 0.2), 0.5, 0.0, 0.0) {
            Err(Error::NoSolution { lower, upper, .. }) => assert!(lower < upper),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn golden_section_finds_interior_max() {
        let (x, fx) = maximize(&|x: f64| -(x - 0.37) * (x - 0.37) + 2.0, 0.0, 0.1);
        assert!((x - 0.37).abs() < 1e-6 && (fx - 2.0).abs() < 1e-10);
    }
}
