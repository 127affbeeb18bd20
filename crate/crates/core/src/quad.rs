//! Numerical integration: adaptive 21-point Gauss–Kronrod with
//! user-supplied breakpoints, semi-infinite panel marching for Fourier
//! integrands, and Gauss–Hermite nodes for Gaussian expectations.

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_745_831_861,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Outcome of an adaptive integration.
#[derive(Debug, Clone)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
    /// Final accepted subintervals, sorted by left endpoint.
    pub intervals: Vec<(f64, f64)>,
}

/// Tolerances and limits for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_intervals: 4000,
        }
    }
}

impl QuadOptions {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }
}

/// One application of the 21-point Kronrod rule and its embedded 10-point
/// Gauss rule on `[a, b]`. Returns `(kronrod, error_estimate)`.
pub fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (result, err)
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]`, never placing a
/// node across any of the interior `breakpoints`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            abs_error: 0.0,
            evaluations: 0,
            intervals: Vec::new(),
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut edges: Vec<f64> = breakpoints.iter().copied().filter(|&p| p > lo && p < hi).collect();
    edges.push(lo);
    edges.push(hi);
    edges.sort_by(|x, y| x.partial_cmp(y).unwrap());
    edges.dedup();

    // (a, b, value, error)
    let mut panels: Vec<(f64, f64, f64, f64)> = Vec::new();
    let mut evaluations = 0;
    for w in edges.windows(2) {
        let (v, e) = gk21(&mut f, w[0], w[1]);
        evaluations += 21;
        panels.push((w[0], w[1], v, e));
    }

    loop {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        let target = opts.abs_tol.max(opts.rel_tol * total.abs());
        if err <= target {
            break;
        }
        let (idx, worst) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap())
            .map(|(i, p)| (i, *p))
            .unwrap();
        let mid = 0.5 * (worst.0 + worst.1);
        let too_narrow = (worst.1 - worst.0) <= 1e3 * f64::EPSILON * mid.abs().max(1.0);
        if panels.len() >= opts.max_intervals || too_narrow {
            return Err(Error::Quadrature {
                achieved: err,
                requested: target,
            });
        }
        let (v1, e1) = gk21(&mut f, worst.0, mid);
        let (v2, e2) = gk21(&mut f, mid, worst.1);
        evaluations += 42;
        panels[idx] = (worst.0, mid, v1, e1);
        panels.push((mid, worst.1, v2, e2));
    }

    panels.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    Ok(QuadResult {
        value: sign * panels.iter().map(|p| p.2).sum::<f64>(),
        abs_error: panels.iter().map(|p| p.3).sum(),
        evaluations,
        intervals: panels.iter().map(|p| (p.0, p.1)).collect(),
    })
}

/// Re-applies the Kronrod rule over a fixed set of intervals, typically the
/// `intervals` of an earlier [`integrate`] call on a related integrand.
pub fn apply_gk21<F: FnMut(f64) -> f64>(mut f: F, intervals: &[(f64, f64)]) -> f64 {
    intervals.iter().map(|&(a, b)| gk21(&mut f, a, b).0).sum()
}

/// Settings for integrals over `[start, ∞)` evaluated panel by panel.
#[derive(Debug, Clone, Copy)]
pub struct TailOptions {
    pub panel_width: f64,
    /// A panel whose absolute contribution is below this counts as negligible.
    pub tail_tol: f64,
    /// Number of consecutive negligible panels that ends the march.
    pub quiet_panels: usize,
    pub max_panels: usize,
    pub panel: QuadOptions,
}

impl Default for TailOptions {
    fn default() -> Self {
        Self {
            panel_width: 5.0,
            tail_tol: 1e-12,
            quiet_panels: 3,
            max_panels: 4000,
            panel: QuadOptions::new(1e-13, 1e-11),
        }
    }
}

/// Integrates `f` over `[start, U]`, extending `U` one panel at a time until
/// `quiet_panels` consecutive panels contribute less than `tail_tol`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(mut f: F, start: f64, opts: TailOptions) -> Result<QuadResult> {
    let mut value = 0.0;
    let mut abs_error = 0.0;
    let mut evaluations = 0;
    let mut intervals = Vec::new();
    let mut quiet = 0;
    let mut a = start;
    for _ in 0..opts.max_panels {
        let b = a + opts.panel_width;
        let r = integrate(&mut f, a, b, &[], opts.panel)?;
        value += r.value;
        abs_error += r.abs_error;
        evaluations += r.evaluations;
        intervals.extend(r.intervals);
        if r.value.abs() < opts.tail_tol {
            quiet += 1;
            if quiet >= opts.quiet_panels {
                return Ok(QuadResult {
                    value,
                    abs_error,
                    evaluations,
                    intervals,
                });
            }
        } else {
            quiet = 0;
        }
        a = b;
    }
    Err(Error::Quadrature {
        achieved: abs_error.max(opts.tail_tol * 10.0),
        requested: opts.tail_tol,
    })
}

/// Gauss–Hermite rule for weight `exp(-x²)`: returns `(nodes, weights)`
/// sorted ascending.
///
/// Roots of the orthonormal Hermite polynomial are bracketed on a fine grid
/// of the positive half-line and polished by safeguarded Newton steps.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let nf = n as f64;
    // (p_n(z), p_{n-1}(z)) for the orthonormal family.
    let eval = |z: f64| {
        let mut p1 = pim4;
        let mut p2 = 0.0;
        for j in 0..n {
            let p3 = p2;
            p2 = p1;
            let jf = j as f64;
            p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
        }
        (p1, p2)
    };
    let mut roots = Vec::with_capacity(n);
    if n % 2 == 1 {
        roots.push(0.0);
    }
    let upper = (2.0 * nf + 1.0).sqrt() + 1.0;
    let cells = (upper / 1e-3).ceil() as usize;
    let h = upper / cells as f64;
    let mut a = 1e-12;
    let mut fa = eval(a).0;
    for k in 1..=cells {
        let b = k as f64 * h;
        let fb = eval(b).0;
        if fa == 0.0 || fa.signum() != fb.signum() {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            let mut z = 0.5 * (lo + hi);
            for _ in 0..100 {
                let (p, pm1) = eval(z);
                if p == 0.0 {
                    break;
                }
                if p.signum() == flo.signum() {
                    lo = z;
                    flo = p;
                } else {
                    hi = z;
                }
                let dp = (2.0 * nf).sqrt() * pm1;
                let newton = z - p / dp;
                let next = if newton > lo && newton < hi {
                    newton
                } else {
                    0.5 * (lo + hi)
                };
                if (next - z).abs() <= 1e-15 * z.abs().max(1.0) {
                    z = next;
                    break;
                }
                z = next;
            }
            roots.push(z);
            roots.push(-z);
        }
        a = b;
        fa = fb;
    }
    assert_eq!(roots.len(), n, "Gauss-Hermite root search missed nodes");
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let weights = roots
        .iter()
        .map(|&z| {
            let pp = (2.0 * nf).sqrt() * eval(z).1;
            2.0 / (pp * pp)
        })
        .collect();
    (roots, weights)
}
