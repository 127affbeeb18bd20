//! Adaptive Dormand–Prince 5(4) integration of small complex systems.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Any state component exceeding this modulus is treated as a blow-up.
    pub blowup: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-9,
            max_steps: 200_000,
            blowup: 1e12,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

type State<const N: usize> = [Complex64; N];

#[inline]
fn axpy<const N: usize>(y: &State<N>, h: f64, terms: &[(f64, &State<N>)]) -> State<N> {
    let mut out = *y;
    for (c, k) in terms {
        let ch = c * h;
        for i in 0..N {
            out[i] += k[i] * ch;
        }
    }
    out
}

/// Integrates `dy/dt = f(t, y)` from `t0` to `t1` (either direction).
/// `h_init` is a hint for the first step; the returned tuple carries the
/// final state and the size of the last accepted step so that piecewise
/// callers can warm-start the next segment.
pub fn dopri5<const N: usize, F>(
    f: F,
    t0: f64,
    t1: f64,
    y0: State<N>,
    h_init: f64,
    opts: &OdeOptions,
) -> Result<(State<N>, f64, usize)>
where
    F: FnMut(f64, &State<N>) -> State<N>,
{
    dopri5_observed(f, |_, _| {}, t0, t1, y0, h_init, opts)
}

/// As [`dopri5`], calling `observe(t, y)` after every accepted step.
pub fn dopri5_observed<const N: usize, F, O>(
    mut f: F,
    mut observe: O,
    t0: f64,
    t1: f64,
    y0: State<N>,
    h_init: f64,
    opts: &OdeOptions,
) -> Result<(State<N>, f64, usize)>
where
    F: FnMut(f64, &State<N>) -> State<N>,
    O: FnMut(f64, &State<N>),
{
    let span = t1 - t0;
    if span == 0.0 {
        return Ok((y0, h_init, 0));
    }
    let dir = span.signum();
    let mut h = h_init.abs().min(span.abs()).max(1e-6 * span.abs()) * dir;
    let h_min = 1e-13 * span.abs().max(1.0);
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut steps = 0;
    let mut last_ok = h;

    while (t1 - t) * dir > 0.0 {
        if steps >= opts.max_steps {
            return Err(Error::OdeFailure {
                t,
                reason: format!("exceeded {} steps", opts.max_steps),
            });
        }
        let last = (t + h - t1) * dir >= 0.0;
        if last {
            h = t1 - t;
        }
        let k2 = f(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
        let k3 = f(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(
            t + C5 * h,
            &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            t + h,
            &axpy(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y_new = axpy(&y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let t_new = if last { t1 } else { t + h };
        let k7 = f(t_new, &y_new);
        steps += 1;

        let mut err = 0.0f64;
        let mut finite = true;
        for i in 0..N {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
            let scale = opts.abs_tol + opts.rel_tol * y[i].norm().max(y_new[i].norm());
            err = err.max(e.norm() / scale);
            finite &= y_new[i].re.is_finite() && y_new[i].im.is_finite();
        }
        if !finite || err.is_nan() {
            err = f64::INFINITY;
        }

        if err <= 1.0 {
            t = t_new;
            y = y_new;
            k1 = k7;
            last_ok = h;
            observe(t, &y);
            if y.iter().any(|c| c.norm() > opts.blowup) {
                return Err(Error::OdeFailure {
                    t,
                    reason: "solution blew up".into(),
                });
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= factor;
        } else {
            let factor = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            h *= factor;
            if h.abs() < h_min {
                return Err(Error::OdeFailure {
                    t,
                    reason: "step size underflow".into(),
                });
            }
        }
    }
    Ok((y, last_ok.abs(), steps))
}
