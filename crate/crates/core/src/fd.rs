//! Central finite differences with Richardson extrapolation (Ridders'
//! scheme), used to validate analytic derivatives.

/// Derivative of `f` at `x` from central differences with initial step
/// `h0`, extrapolated over a shrinking step sequence. Returns the estimate
/// and its error estimate.
pub fn ridders<F: Fn(f64) -> f64>(f: F, x: f64, h0: f64) -> (f64, f64) {
    const NTAB: usize = 10;
    const CON: f64 = 1.4;
    let con2 = CON * CON;
    let mut a = [[0.0f64; NTAB]; NTAB];
    let mut hh = h0;
    a[0][0] = (f(x + hh) - f(x - hh)) / (2.0 * hh);
    let mut err = f64::INFINITY;
    let mut ans = a[0][0];
    for i in 1..NTAB {
        hh /= CON;
        a[0][i] = (f(x + hh) - f(x - hh)) / (2.0 * hh);
        let mut fac = con2;
        for j in 1..=i {
            a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - 1.0);
            fac *= con2;
            let e = (a[j][i] - a[j - 1][i]).abs().max((a[j][i] - a[j - 1][i - 1]).abs());
            if e <= err {
                err = e;
                ans = a[j][i];
            }
        }
        if (a[i][i] - a[i - 1][i - 1]).abs() >= 2.0 * err {
            break;
        }
    }
    (ans, err)
}

/// Ridders from h0, h0/10, … keeping the estimate with the smallest error.
/// Sums of terms at very different scales can have features far finer than
/// h0 suggests.
pub fn ridders_adaptive<F: Fn(f64) -> f64>(f: F, x: f64, h0: f64) -> (f64, f64) {
    let mut best = (0.0, f64::INFINITY);
    let mut h = h0;
    for _ in 0..5 {
        let r = ridders(&f, x, h);
        if r.1 < best.1 {
            best = r;
        }
        if best.1 <= 1e-9 * best.0.abs() {
            break;
        }
        h *= 0.1;
    }
    best
}

/// Gradient of `f` at `z`, one Ridders estimate per coordinate.
pub fn gradient<F: Fn(&[f64]) -> f64>(f: F, z: &[f64], h0: f64) -> Vec<f64> {
    (0..z.len())
        .map(|i| {
            let g = |t: f64| {
                let mut p = z.to_vec();
                p[i] = t;
                f(&p)
            };
            ridders_adaptive(g, z[i], h0).0
        })
        .collect()
}

/// Jacobian of a vector field: row i is ∂F/∂z_i.
pub fn jacobian<F: Fn(&[f64]) -> Vec<f64>>(f: F, z: &[f64], h0: f64) -> Vec<Vec<f64>> {
    let n = f(z).len();
    (0..z.len())
        .map(|i| {
            (0..n)
                .map(|j| {
                    let g = |t: f64| {
                        let mut p = z.to_vec();
                        p[i] = t;
                        f(&p)[j]
                    };
                    ridders_adaptive(g, z[i], h0).0
                })
                .collect()
        })
        .collect()
}

/// ‖a − b‖ / ‖a‖, zero when both vanish.
pub fn relative_error(exact: &[f64], approx: &[f64]) -> f64 {
    let e: f64 = exact.iter().zip(approx).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let n: f64 = exact.iter().map(|a| a * a).sum::<f64>().sqrt();
    if e == 0.0 {
        0.0
    } else if n == 0.0 {
        f64::INFINITY
    } else {
        e / n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_smooth_functions() {
        let (d, _) = ridders(f64::sin, 0.7, 0.1);
        assert!((d - 0.7f64.cos()).abs() < 1e-12);
        let g = gradient(|z| z[0] * z[0] * z[1], &[1.5, -2.0], 0.1);
        assert!(relative_error(&[-6.0, 2.25], &g) < 1e-12);
    }
}
