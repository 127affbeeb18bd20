//! Monte Carlo simulation of the futures/variance system.
//!
//! Log-futures use a log-Euler step whose loading is the exact standard
//! deviation of ∫ e^{−λ(T_m−s)} dB_s over the step with the variance frozen,
//! so each step is an exact martingale increment. Variances follow
//! full-truncation Euler with θ evaluated at the left endpoint.
//!
//! Paths are simulated in fixed-size blocks; block `b` draws from its own
//! ChaCha stream, so results do not depend on the number of threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ModelConfig, VolFactor};
use crate::seasonality::SeasonalitySpec;
use crate::spread::CsoSpec;
use crate::vanilla::{OptionKind, VanillaSpec};

/// Paths per RNG stream.
const BLOCK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McSettings {
    pub paths: usize,
    pub steps_per_year: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            paths: 100_000,
            steps_per_year: 400,
            seed: 42,
            antithetic: true,
        }
    }
}

impl McSettings {
    pub fn validate(&self) -> Result<()> {
        if self.paths < 2 {
            return Err(Error::invalid(
                "mc.paths",
                format!("need at least 2 paths, got {}", self.paths),
            ));
        }
        if self.steps_per_year < 50 {
            return Err(Error::invalid(
                "mc.steps_per_year",
                format!("need at least 50 steps per year, got {}", self.steps_per_year),
            ));
        }
        Ok(())
    }

    fn steps(&self, horizon: f64) -> usize {
        ((horizon * self.steps_per_year as f64).ceil() as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub paths_used: usize,
}

impl McEstimate {
    /// Number of standard errors separating the estimate from `x`.
    pub fn z_score(&self, x: f64) -> f64 {
        if self.stderr == 0.0 {
            if self.value == x {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.value - x) / self.stderr
        }
    }
}

/// Running sums of one estimator.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn merge(&mut self, other: &Moments) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    fn estimate(&self, paths_used: usize) -> McEstimate {
        let n = self.n as f64;
        let mean = self.sum / n;
        let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        McEstimate {
            value: mean,
            stderr: (var / n).sqrt(),
            paths_used,
        }
    }
}

/// Per-factor constants of one time step.
struct FactorStep {
    kappa: f64,
    sigma: f64,
    rho: f64,
    rho_c: f64,
    seasonality: SeasonalitySpec,
}

/// Simulator for terminal futures prices at a set of maturities.
struct Simulator {
    factors: Vec<FactorStep>,
    v0: Vec<f64>,
    /// loadings[step][factor * m + k]: standard deviation per unit √v of
    /// the log-return of maturity k over the step.
    loadings: Vec<Vec<f64>>,
    times: Vec<f64>,
    dt: f64,
    sqrt_dt: f64,
    f0: Vec<f64>,
}

impl Simulator {
    fn new(config: &ModelConfig, horizon: f64, maturities: &[f64], settings: &McSettings) -> Result<Self> {
        settings.validate()?;
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::invalid("expiry", format!("must be > 0, got {horizon}")));
        }
        if maturities.is_empty() {
            return Err(Error::invalid("maturities", "need at least one futures maturity"));
        }
        if let Some(m) = maturities.iter().find(|&&m| !(m >= horizon)) {
            return Err(Error::invalid(
                "maturities",
                format!("maturity {m} precedes the horizon {horizon}"),
            ));
        }
        let n_steps = settings.steps(horizon);
        let dt = horizon / n_steps as f64;
        let times: Vec<f64> = (0..n_steps).map(|i| i as f64 * dt).collect();
        let m = maturities.len();
        let loadings = times
            .iter()
            .map(|&t| {
                let mut row = Vec::with_capacity(config.factors().len() * m);
                for f in config.factors() {
                    for &tm in maturities {
                        row.push(step_loading(f.lambda, t, dt, tm));
                    }
                }
                row
            })
            .collect();
        let factors = config
            .factors()
            .iter()
            .map(|f| FactorStep {
                kappa: f.kappa,
                sigma: f.sigma,
                rho: f.rho,
                rho_c: (1.0 - f.rho * f.rho).max(0.0).sqrt(),
                seasonality: f.seasonality,
            })
            .collect();
        let f0 = maturities
            .iter()
            .map(|&tm| config.initial_price(tm))
            .collect::<Result<_>>()?;
        Ok(Self {
            factors,
            v0: config.factors().iter().map(|f| f.v0).collect(),
            loadings,
            times,
            dt,
            sqrt_dt: dt.sqrt(),
            f0,
        })
    }

    fn maturities(&self) -> usize {
        self.f0.len()
    }

    /// Simulates one path from the normals produced by `normal`, writing
    /// terminal prices to `out`. `v` and `x` are scratch buffers.
    fn path(&self, normal: &mut impl FnMut() -> f64, v: &mut [f64], x: &mut [f64], out: &mut [f64]) {
        let m = self.maturities();
        v.copy_from_slice(&self.v0);
        x.iter_mut().for_each(|xi| *xi = 0.0);
        for (step, &t) in self.times.iter().enumerate() {
            let load = &self.loadings[step];
            for (j, f) in self.factors.iter().enumerate() {
                let z1: f64 = normal();
                let z2: f64 = normal();
                let vp = v[j].max(0.0);
                let sv = vp.sqrt();
                for k in 0..m {
                    let l = load[j * m + k];
                    x[k] += -0.5 * l * l * vp + l * sv * z1;
                }
                let zv = f.rho * z1 + f.rho_c * z2;
                v[j] += f.kappa * (f.seasonality.theta(t) - vp) * self.dt + f.sigma * sv * self.sqrt_dt * zv;
            }
        }
        for k in 0..m {
            out[k] = self.f0[k] * x[k].exp();
        }
    }
}

/// √(∫_t^{t+Δt} e^{−2λ(T_m−s)} ds).
fn step_loading(lambda: f64, t: f64, dt: f64, maturity: f64) -> f64 {
    let var = if (lambda * dt).abs() < 1e-8 {
        (-2.0 * lambda * (maturity - t)).exp() * dt
    } else {
        // e^{−2λ(T_m−t−Δt)} (1 − e^{−2λΔt}) / (2λ)
        (-2.0 * lambda * (maturity - t - dt)).exp() * (-(-2.0 * lambda * dt).exp_m1()) / (2.0 * lambda)
    };
    var.sqrt()
}

/// Streams terminal prices through `payoff`, which writes `n_out` values per
/// path; returns one estimate per output. With antithetic variates the
/// average over each pair is one sample.
pub fn mc_expectation<P>(
    config: &ModelConfig,
    horizon: f64,
    maturities: &[f64],
    settings: &McSettings,
    n_out: usize,
    payoff: P,
) -> Result<Vec<McEstimate>>
where
    P: Fn(&[f64], &mut [f64]) + Sync,
{
    let sim = Simulator::new(config, horizon, maturities, settings)?;
    let samples = if settings.antithetic {
        settings.paths.div_ceil(2)
    } else {
        settings.paths
    };
    let blocks = samples.div_ceil(BLOCK);
    let partial: Vec<Vec<Moments>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = block_rng(settings.seed, b as u64);
            let n = BLOCK.min(samples - b * BLOCK);
            let nf = sim.factors.len();
            let m = sim.maturities();
            let (mut v, mut x) = (vec![0.0; nf], vec![0.0; m]);
            let mut prices = vec![0.0; m];
            let mut vals = vec![0.0; n_out];
            let mut vals_anti = vec![0.0; n_out];
            let mut acc = vec![Moments::default(); n_out];
            let mut draws: Vec<f64> = Vec::with_capacity(sim.times.len() * nf * 2);
            for _ in 0..n {
                if settings.antithetic {
                    draws.clear();
                    let mut normal = || {
                        let z: f64 = rng.sample(StandardNormal);
                        draws.push(z);
                        z
                    };
                    sim.path(&mut normal, &mut v, &mut x, &mut prices);
                    payoff(&prices, &mut vals);
                    let mut it = draws.iter();
                    let mut mirrored = || -*it.next().expect("antithetic draw count");
                    sim.path(&mut mirrored, &mut v, &mut x, &mut prices);
                    payoff(&prices, &mut vals_anti);
                    for (a, (p, q)) in acc.iter_mut().zip(vals.iter().zip(&vals_anti)) {
                        a.push(0.5 * (p + q));
                    }
                } else {
                    let mut normal = || rng.sample::<f64, _>(StandardNormal);
                    sim.path(&mut normal, &mut v, &mut x, &mut prices);
                    payoff(&prices, &mut vals);
                    for (a, p) in acc.iter_mut().zip(&vals) {
                        a.push(*p);
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Moments::default(); n_out];
    for block in &partial {
        for (t, m) in total.iter_mut().zip(block) {
            t.merge(m);
        }
    }
    let used = if settings.antithetic { 2 * samples } else { samples };
    Ok(total.iter().map(|m| m.estimate(used)).collect())
}

fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

/// Joint terminal samples of F(T, T_m), `values[path * m + k]`. Antithetic
/// partners occupy consecutive paths.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalSamples {
    pub maturities: Vec<f64>,
    pub values: Vec<f64>,
}

impl TerminalSamples {
    pub fn paths(&self) -> usize {
        self.values.len() / self.maturities.len()
    }

    pub fn path(&self, i: usize) -> &[f64] {
        let m = self.maturities.len();
        &self.values[i * m..(i + 1) * m]
    }
}

pub fn simulate_terminal(
    config: &ModelConfig,
    horizon: f64,
    maturities: &[f64],
    settings: &McSettings,
) -> Result<TerminalSamples> {
    let sim = Simulator::new(config, horizon, maturities, settings)?;
    let m = sim.maturities();
    let per_sample = if settings.antithetic { 2 } else { 1 };
    let samples = settings.paths.div_ceil(per_sample);
    let blocks = samples.div_ceil(BLOCK);
    let chunks: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = block_rng(settings.seed, b as u64);
            let n = BLOCK.min(samples - b * BLOCK);
            let (mut v, mut x) = (vec![0.0; sim.factors.len()], vec![0.0; m]);
            let mut prices = vec![0.0; m];
            let mut out = Vec::with_capacity(n * m * per_sample);
            let mut draws = Vec::new();
            for _ in 0..n {
                draws.clear();
                let mut normal = || {
                    let z: f64 = rng.sample(StandardNormal);
                    draws.push(z);
                    z
                };
                sim.path(&mut normal, &mut v, &mut x, &mut prices);
                out.extend_from_slice(&prices);
                if settings.antithetic {
                    let mut it = draws.iter();
                    let mut mirrored = || -*it.next().expect("antithetic draw count");
                    sim.path(&mut mirrored, &mut v, &mut x, &mut prices);
                    out.extend_from_slice(&prices);
                }
            }
            out
        })
        .collect();
    Ok(TerminalSamples {
        maturities: maturities.to_vec(),
        values: chunks.concat(),
    })
}

pub fn mc_price_vanilla(config: &ModelConfig, spec: &VanillaSpec, settings: &McSettings) -> Result<McEstimate> {
    let df = config.discount(spec.expiry);
    let (k, kind) = (spec.strike, spec.kind);
    let est = mc_expectation(config, spec.expiry, &[spec.futures_maturity], settings, 1, |f, out| {
        out[0] = df
            * match kind {
                OptionKind::Call => (f[0] - k).max(0.0),
                OptionKind::Put => (k - f[0]).max(0.0),
            };
    })?;
    Ok(est[0])
}

/// Calendar spread call, put and the pathwise call − put difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSpread {
    pub call: McEstimate,
    pub put: McEstimate,
    pub call_minus_put: McEstimate,
}

pub fn mc_price_cso(config: &ModelConfig, spec: &CsoSpec, settings: &McSettings) -> Result<McSpread> {
    let df = config.discount(spec.expiry);
    let k = spec.strike;
    let est = mc_expectation(config, spec.expiry, &[spec.t1, spec.t2], settings, 3, |f, out| {
        let w = f[0] - f[1] - k;
        out[0] = df * w.max(0.0);
        out[1] = df * (-w).max(0.0);
        out[2] = df * w;
    })?;
    Ok(McSpread {
        call: est[0],
        put: est[1],
        call_minus_put: est[2],
    })
}

/// Sample estimate of E[e^{iu ln(F(T,T₁)/F(0,T₁))}] as (real, imaginary).
pub fn mc_single_cf(
    config: &ModelConfig,
    u: f64,
    horizon: f64,
    t1: f64,
    settings: &McSettings,
) -> Result<(McEstimate, McEstimate)> {
    let f0 = config.initial_price(t1)?;
    let est = mc_expectation(config, horizon, &[t1], settings, 2, |f, out| {
        let x = u * (f[0] / f0).ln();
        out[0] = x.cos();
        out[1] = x.sin();
    })?;
    Ok((est[0], est[1]))
}

/// Outcome of the pathwise comparison between a seasonal variance process
/// and its constant-θ_min counterpart driven by the same increments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonResult {
    pub violation_fraction: f64,
    pub violations: u64,
    pub checks: u64,
    /// Smallest simulated value of the seasonal process (before truncation).
    pub min_v: f64,
}

/// Slack allowed before ṽ > v counts as a violation.
pub const COMPARISON_TOL: f64 = 1e-12;

/// Simulates v (seasonal θ) and ṽ (constant `theta_min`, started at
/// min(v₀, θ_min)) on shared Brownian increments over `horizon` and reports
/// how often the truncated ṽ exceeds the truncated v.
pub fn comparison_test(
    factor: &VolFactor,
    theta_min: f64,
    horizon: f64,
    settings: &McSettings,
) -> Result<ComparisonResult> {
    settings.validate()?;
    factor.validate()?;
    if !(horizon > 0.0) {
        return Err(Error::invalid("horizon", "must be > 0"));
    }
    let n_steps = settings.steps(horizon);
    let dt = horizon / n_steps as f64;
    let sq = dt.sqrt();
    let blocks = settings.paths.div_ceil(BLOCK);
    let tilde_v0 = factor.v0.min(theta_min);
    let parts: Vec<(u64, u64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = block_rng(settings.seed, b as u64);
            let n = BLOCK.min(settings.paths - b * BLOCK);
            let (mut viol, mut checks, mut min_v) = (0u64, 0u64, f64::INFINITY);
            for _ in 0..n {
                let (mut v, mut w) = (factor.v0, tilde_v0);
                for i in 0..n_steps {
                    let t = i as f64 * dt;
                    let z: f64 = rng.sample(StandardNormal);
                    let (vp, wp) = (v.max(0.0), w.max(0.0));
                    v += factor.kappa * (factor.seasonality.theta(t) - vp) * dt + factor.sigma * vp.sqrt() * sq * z;
                    w += factor.kappa * (theta_min - wp) * dt + factor.sigma * wp.sqrt() * sq * z;
                    checks += 1;
                    if w.max(0.0) > v.max(0.0) + COMPARISON_TOL {
                        viol += 1;
                    }
                    min_v = min_v.min(v);
                }
            }
            (viol, checks, min_v)
        })
        .collect();
    let (violations, checks, min_v) = parts
        .iter()
        .fold((0, 0, f64::INFINITY), |(a, b, c), &(x, y, z)| (a + x, b + y, c.min(z)));
    Ok(ComparisonResult {
        violation_fraction: violations as f64 / checks as f64,
        violations,
        checks,
        min_v,
    })
}

/// Smallest value reached by the full-truncation Euler variance of `factor`
/// across all paths and steps over `horizon`.
pub fn positivity_scan(factor: &VolFactor, horizon: f64, settings: &McSettings) -> Result<f64> {
    let theta_min = factor.seasonality.bounds().theta_min;
    comparison_test(factor, theta_min, horizon, settings).map(|r| r.min_v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FuturesCurve;
    use crate::seasonality::Pattern;

    fn flat_config(factors: Vec<VolFactor>) -> ModelConfig {
        ModelConfig::new(factors, 0.0, FuturesCurve::flat(100.0).unwrap()).unwrap()
    }

    #[test]
    fn settings_validation() {
        assert!(McSettings {
            paths: 1,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(McSettings {
            steps_per_year: 49,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn step_loading_integrates_squared_damping() {
        let (lambda, t, dt, tm) = (1.7, 0.3, 0.01, 1.2);
        let n = 100_000;
        let h = dt / n as f64;
        let mid: f64 = (0..n)
            .map(|i| (-2.0 * lambda * (tm - t - (i as f64 + 0.5) * h)).exp() * h)
            .sum();
        assert!((step_loading(lambda, t, dt, tm).powi(2) - mid).abs() < 1e-12);
        assert!((step_loading(0.0, t, dt, tm).powi(2) - dt).abs() < 1e-15);
    }

    #[test]
    fn deterministic_constant_variance_is_exact_martingale() {
        let s = SeasonalitySpec::constant(0.09).unwrap();
        let f = VolFactor::new(1.0, 2.0, 0.0, 0.0, 0.09, s).unwrap();
        let cfg = flat_config(vec![f]);
        let settings = McSettings {
            paths: 20_000,
            steps_per_year: 50,
            seed: 7,
            antithetic: true,
        };
        let est = mc_expectation(&cfg, 1.0, &[1.0, 1.5], &settings, 2, |p, o| o.copy_from_slice(p)).unwrap();
        for e in est {
            assert!(e.z_score(100.0).abs() < 3.0, "{e:?}");
        }
    }

    #[test]
    fn reproducible_across_thread_counts() {
        let s = SeasonalitySpec::new(Pattern::Sinusoid, 0.25, 0.15, 7.0 / 12.0).unwrap();
        let f = VolFactor::new(1.0, 0.8, 1.2, -0.25, 0.10, s).unwrap();
        let cfg = flat_config(vec![f]);
        let spec = VanillaSpec::call(100.0, 0.25).unwrap();
        let settings = McSettings {
            paths: 10_000,
            steps_per_year: 100,
            seed: 3,
            antithetic: true,
        };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| mc_price_vanilla(&cfg, &spec, &settings)).unwrap();
        let b = three.install(|| mc_price_vanilla(&cfg, &spec, &settings)).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    }

    #[test]
    fn huge_strike_is_worthless() {
        let s = SeasonalitySpec::constant(0.04).unwrap();
        let f = VolFactor::new(1.0, 1.0, 0.3, 0.0, 0.04, s).unwrap();
        let cfg = flat_config(vec![f]);
        let e = mc_price_vanilla(
            &cfg,
            &VanillaSpec::call(1e6, 0.5).unwrap(),
            &McSettings {
                paths: 2000,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn identical_processes_never_violate() {
        let s = SeasonalitySpec::constant(0.10).unwrap();
        let f = VolFactor::new(1.0, 0.8, 1.2, -0.25, 0.10, s).unwrap();
        let r = comparison_test(
            &f,
            0.10,
            1.0,
            &McSettings {
                paths: 2000,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(r.violations, 0);
    }

    #[test]
    fn terminal_samples_layout() {
        let s = SeasonalitySpec::constant(0.04).unwrap();
        let f = VolFactor::new(1.0, 1.0, 0.3, 0.0, 0.04, s).unwrap();
        let cfg = flat_config(vec![f]);
        let settings = McSettings {
            paths: 10,
            steps_per_year: 50,
            seed: 1,
            antithetic: true,
        };
        let s = simulate_terminal(&cfg, 0.5, &[0.5, 1.0], &settings).unwrap();
        assert_eq!(s.paths(), 10);
        assert!(s.values.iter().all(|v| *v > 0.0));
        assert!(simulate_terminal(&cfg, 0.5, &[0.4], &settings).is_err());
    }
}
