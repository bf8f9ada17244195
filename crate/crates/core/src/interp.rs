//! Quintic Hermite interpolation from values, first and second derivatives.

/// Value and first two derivatives of the quintic Hermite interpolant on
/// `[x0, x1]` at `x`. Each endpoint supplies `(f, f', f'')`.
pub fn hermite5(x0: f64, x1: f64, left: [f64; 3], right: [f64; 3], x: f64) -> [f64; 3] {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let [p0, d0, s0] = left;
    let [p1, d1, s1] = right;
    let dp = p1 - p0;
    let hh = h * h;

    let c1 = h * d0;
    let c2 = 0.5 * hh * s0;
    let c3 = 10.0 * dp - h * (6.0 * d0 + 4.0 * d1) - 0.5 * hh * (3.0 * s0 - s1);
    let c4 = -15.0 * dp + h * (8.0 * d0 + 7.0 * d1) + 0.5 * hh * (3.0 * s0 - 2.0 * s1);
    let c5 = 6.0 * dp - 3.0 * h * (d0 + d1) - 0.5 * hh * (s0 - s1);

    let value = p0 + t * (c1 + t * (c2 + t * (c3 + t * (c4 + t * c5))));
    let dt = c1 + t * (2.0 * c2 + t * (3.0 * c3 + t * (4.0 * c4 + t * 5.0 * c5)));
    let dtt = 2.0 * c2 + t * (6.0 * c3 + t * (12.0 * c4 + t * 20.0 * c5));
    [value, dt / h, dtt / hh]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reproduces_endpoint_data() {
        let l = [1.0, -2.0, 3.0];
        let r = [4.0, 0.5, -1.0];
        let a = hermite5(0.3, 0.8, l, r, 0.3);
        let b = hermite5(0.3, 0.8, l, r, 0.8);
        for i in 0..3 {
            assert!((a[i] - l[i]).abs() < 1e-12);
            assert!((b[i] - r[i]).abs() < 1e-10);
        }
    }

    proptest! {
        // Exact on quintic polynomials.
        #[test]
        fn exact_for_quintics(c in prop::array::uniform6(-2.0f64..2.0), x in 0.0f64..1.0) {
            let f = |x: f64| [
                c[0] + x * (c[1] + x * (c[2] + x * (c[3] + x * (c[4] + x * c[5])))),
                c[1] + x * (2.0 * c[2] + x * (3.0 * c[3] + x * (4.0 * c[4] + x * 5.0 * c[5]))),
                2.0 * c[2] + x * (6.0 * c[3] + x * (12.0 * c[4] + x * 20.0 * c[5])),
            ];
            let got = hermite5(0.0, 1.0, f(0.0), f(1.0), x);
            let want = f(x);
            for i in 0..3 {
                prop_assert!((got[i] - want[i]).abs() < 1e-10);
            }
        }
    }
}
