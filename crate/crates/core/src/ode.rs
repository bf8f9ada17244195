//! Embedded Dormand–Prince 5(4) integrator with adaptive step control.
//!
//! Only what the profile integrator needs: fixed-size state, a hard upper
//! bound on the step, and a callback that sees every accepted step. The
//! caller owns dense output (it has derivative information the integrator
//! does not need to know about).

use crate::error::{Error, Result};

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

// Fifth- minus fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Step-size control settings.
#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-10,
            h_init: 1e-6,
            h_max: f64::INFINITY,
            max_steps: 5_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

/// Integrate `y' = f(x, y)` from `x0` to `x_end > x0`.
///
/// `on_step(x, y, dy)` is invoked for the initial point and after every
/// accepted step with the state and its derivative there. Returning an error
/// from the callback aborts integration. Failures report the independent
/// variable in the `rho` field; callers integrating in another variable
/// translate it.
pub fn integrate<const N: usize, F, S>(
    mut f: F,
    x0: f64,
    y0: [f64; N],
    x_end: f64,
    ctrl: &StepControl,
    mut on_step: S,
) -> Result<Stats>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    S: FnMut(f64, &[f64; N], &[f64; N]) -> Result<()>,
{
    let mut stats = Stats::default();
    let mut x = x0;
    let mut y = y0;
    let mut k1 = f(x, &y);
    stats.evaluations += 1;
    on_step(x, &y, &k1)?;

    let mut h = ctrl.h_init.min(ctrl.h_max).min(x_end - x0);
    let h_floor = |x: f64| 64.0 * f64::EPSILON * x.abs().max(1.0);

    while x < x_end {
        if stats.accepted + stats.rejected >= ctrl.max_steps {
            return Err(Error::IntegrationFailure {
                rho: x,
                reason: format!("step budget of {} exhausted", ctrl.max_steps),
            });
        }
        let last = x + h >= x_end;
        if last {
            h = x_end - x;
        }

        let k2 = f(x + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
        let k3 = f(x + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(x + C4 * h, &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(
            x + C5 * h,
            &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            x + h,
            &axpy(
                &y,
                h,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
        );
        let y_new = axpy(
            &y,
            h,
            &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
        );
        let x_new = if last { x_end } else { x + h };
        let k7 = f(x_new, &y_new);
        stats.evaluations += 6;

        let mut err2 = 0.0;
        for i in 0..N {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = ctrl.atol + ctrl.rtol * y[i].abs().max(y_new[i].abs());
            err2 += (e / sc) * (e / sc);
        }
        let err = (err2 / N as f64).sqrt();

        if err.is_finite() && err <= 1.0 && y_new.iter().all(|v| v.is_finite()) {
            x = x_new;
            y = y_new;
            k1 = k7;
            stats.accepted += 1;
            on_step(x, &y, &k1)?;
            let grow = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (h * grow).min(ctrl.h_max);
        } else {
            stats.rejected += 1;
            let shrink = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            h *= shrink;
            if h < h_floor(x) {
                return Err(Error::IntegrationFailure {
                    rho: x,
                    reason: format!("step size collapsed to {h:e}"),
                });
            }
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_matches_closed_form() {
        let ctrl = StepControl {
            rtol: 1e-12,
            atol: 1e-12,
            h_init: 1e-3,
            ..StepControl::default()
        };
        let mut last = (0.0, [0.0]);
        integrate(
            |_, y: &[f64; 1]| [-2.0 * y[0]],
            0.0,
            [1.0],
            3.0,
            &ctrl,
            |x, y, _| {
                last = (x, *y);
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(last.0, 3.0);
        assert!((last.1[0] - (-6.0f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn harmonic_oscillator_conserves_energy() {
        let ctrl = StepControl {
            rtol: 1e-11,
            atol: 1e-11,
            h_max: 0.1,
            ..StepControl::default()
        };
        let mut worst: f64 = 0.0;
        integrate(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [1.0, 0.0],
            20.0,
            &ctrl,
            |x, y, _| {
                worst = worst.max((y[0] - x.cos()).abs());
                Ok(())
            },
        )
        .unwrap();
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn stiff_decay_is_stable() {
        // Explicit but error controlled: the step settles at the stability limit.
        let ctrl = StepControl::default();
        let mut last = 0.0;
        let stats = integrate(
            |x, y: &[f64; 1]| [-1e4 * (y[0] - x.cos())],
            0.0,
            [0.0],
            1.0,
            &ctrl,
            |_, y, _| {
                last = y[0];
                Ok(())
            },
        )
        .unwrap();
        assert!((last - 1f64.cos()).abs() < 1e-3);
        assert!(stats.accepted > 1000);
    }

    #[test]
    fn collapse_is_reported() {
        let ctrl = StepControl::default();
        let out = integrate(
            |_, y: &[f64; 1]| [y[0] * y[0]],
            0.0,
            [1.0],
            2.0,
            &ctrl,
            |_, _, _| Ok(()),
        );
        assert!(matches!(out, Err(Error::IntegrationFailure { .. })));
    }
}
