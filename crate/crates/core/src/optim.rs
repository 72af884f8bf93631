//! Local optimization primitives: golden section, box-projected gradient
//! descent and a thin LP wrapper.

use microlp::{ComparisonOp, OptimizationDirection, Problem};

/// Minimize a unimodal function on [a, b].
pub fn golden<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
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
    let mut best = (c, fc);
    if fd < best.1 {
        best = (d, fd);
    }
    for x in [a, b] {
        let fx = f(x);
        if fx < best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Minimize a univariate function on [a, b] from a uniform grid followed by
/// golden refinement around the best grid point. Robust to mild nonconvexity.
pub fn grid_golden<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize, tol: f64) -> (f64, f64) {
    if b <= a {
        return (a, f(a));
    }
    let n = n.max(2);
    let h = (b - a) / (n - 1) as f64;
    let mut bi = 0;
    let mut bv = f64::INFINITY;
    for i in 0..n {
        let v = f(a + i as f64 * h);
        if v < bv {
            bv = v;
            bi = i;
        }
    }
    let lo = a + (bi.saturating_sub(1)) as f64 * h;
    let hi = (a + (bi + 1) as f64 * h).min(b);
    let (x, v) = golden(&f, lo, hi, tol);
    if v <= bv {
        (x, v)
    } else {
        (a + bi as f64 * h, bv)
    }
}

/// Approximate minimum of g over the closed ball B_ε(c), and whether the
/// minimizer lies on the sphere. Golden search in 1-D; in higher dimensions
/// a low-discrepancy fill followed by a shrinking pattern search.
pub fn ball_min<G: Fn(&[f64]) -> f64>(g: &G, c: &[f64], eps: f64) -> (f64, bool) {
    let s = c.len();
    let on_sphere = |p: &[f64]| crate::linalg::dist(p, c) >= eps * (1.0 - 1e-12);
    match s {
        0 => (g(c), false),
        1 => {
            let (t, v) = grid_golden(|t| g(&[t]), c[0] - eps, c[0] + eps, 33, 1e-12 * eps.max(1e-300));
            (v, on_sphere(&[t]))
        }
        _ => {
            let bs = crate::sampling::BallSampler::new(s, 11);
            let to_ball = |d: Vec<f64>| -> Vec<f64> { c.iter().zip(d).map(|(ci, di)| ci + eps * di).collect() };
            let mut best = (c.to_vec(), g(c));
            for i in 0..64 * s {
                for p in [to_ball(bs.in_ball(i)), to_ball(bs.on_sphere(i))] {
                    let v = g(&p);
                    if v < best.1 {
                        best = (p, v);
                    }
                }
            }
            let mut step = 0.1 * eps;
            while step > 1e-10 * eps {
                let mut improved = false;
                for i in 0..s {
                    for sgn in [step, -step] {
                        let mut p = best.0.clone();
                        p[i] += sgn;
                        let d = crate::linalg::dist(&p, c);
                        if d > eps {
                            p = c.iter().zip(&p).map(|(ci, pi)| ci + (pi - ci) * eps / d).collect();
                        }
                        let v = g(&p);
                        if v < best.1 {
                            best = (p, v);
                            improved = true;
                        }
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
            let sphere = on_sphere(&best.0);
            (best.1, sphere)
        }
    }
}

pub fn clamp_box(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PgOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for PgOptions {
    fn default() -> Self {
        PgOptions { max_iter: 2000, tol: 1e-12 }
    }
}

/// Projected gradient with Barzilai–Borwein steps and Armijo backtracking
/// on a box. `f` returns value and gradient.
pub fn projected_gradient<F>(f: F, x0: &[f64], lo: &[f64], hi: &[f64], opts: PgOptions) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    clamp_box(&mut x, lo, hi);
    let (mut fx, mut g) = f(&x);
    if !fx.is_finite() {
        return (x, fx);
    }
    let mut step = 1.0;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    for _ in 0..opts.max_iter {
        if let Some((px, pg)) = &prev {
            let s: Vec<f64> = (0..n).map(|i| x[i] - px[i]).collect();
            let y: Vec<f64> = (0..n).map(|i| g[i] - pg[i]).collect();
            let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
            let ss: f64 = s.iter().map(|a| a * a).sum();
            if sy > 1e-300 {
                step = (ss / sy).clamp(1e-12, 1e12);
            }
        }
        let mut t = step;
        let mut accepted = None;
        for _ in 0..60 {
            let mut xn: Vec<f64> = (0..n).map(|i| x[i] - t * g[i]).collect();
            clamp_box(&mut xn, lo, hi);
            let dec: f64 = (0..n).map(|i| g[i] * (x[i] - xn[i])).sum();
            let (fn_, gn) = f(&xn);
            if fn_.is_finite() && fn_ <= fx - 1e-4 * dec {
                accepted = Some((xn, fn_, gn, dec));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fn_, gn, dec)) = accepted else {
            break;
        };
        let moved: f64 = (0..n).map(|i| (xn[i] - x[i]).abs()).fold(0.0, f64::max);
        let df = fx - fn_;
        prev = Some((std::mem::replace(&mut x, xn), std::mem::replace(&mut g, gn)));
        fx = fn_;
        if moved <= opts.tol * (1.0 + x.iter().map(|v| v.abs()).fold(0.0, f64::max)) || (df <= 1e-16 * (1.0 + fx.abs()) && dec <= 1e-16) {
            break;
        }
    }
    (x, fx)
}

/// Cyclic golden-section coordinate descent on a box, for nonsmooth
/// convex functions where gradients are unreliable.
pub fn coordinate_golden<F>(f: F, x0: &[f64], lo: &[f64], hi: &[f64], radius: f64, sweeps: usize, tol: f64) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let mut x = x0.to_vec();
    clamp_box(&mut x, lo, hi);
    let mut fx = f(&x);
    let mut r = radius;
    for _ in 0..sweeps {
        let before = fx;
        for i in 0..x.len() {
            let a = (x[i] - r).max(lo[i]);
            let b = (x[i] + r).min(hi[i]);
            let base = x.clone();
            let (t, v) = golden(
                |t| {
                    let mut y = base.clone();
                    y[i] = t;
                    f(&y)
                },
                a,
                b,
                tol,
            );
            if v < fx {
                x[i] = t;
                fx = v;
            }
        }
        if before - fx <= 1e-15 * (1.0 + fx.abs()) {
            r *= 0.5;
            if r < tol {
                break;
            }
        }
    }
    (x, fx)
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, x: Vec<f64> },
    Unbounded,
    Infeasible,
}

/// maximize ⟨obj, u⟩ subject to A u ≤ rhs, u free.
pub fn lp_max(obj: &[f64], a: &[Vec<f64>], rhs: &[f64]) -> LpOutcome {
    let mut p = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = obj.iter().map(|&c| p.add_var(c, (f64::NEG_INFINITY, f64::INFINITY))).collect();
    for (row, &r) in a.iter().zip(rhs) {
        let terms: Vec<_> = vars.iter().zip(row).filter(|(_, c)| **c != 0.0).map(|(v, c)| (*v, *c)).collect();
        if terms.is_empty() {
            if r < 0.0 {
                return LpOutcome::Infeasible;
            }
            continue;
        }
        p.add_constraint(terms, ComparisonOp::Le, r);
    }
    match p.solve() {
        Ok(out) => match out.solution() {
            Some(sol) => LpOutcome::Optimal { value: sol.objective(), x: vars.iter().map(|v| sol.var_value(*v)).collect() },
            None => LpOutcome::Infeasible,
        },
        Err(microlp::Error::Unbounded) => LpOutcome::Unbounded,
        Err(_) => LpOutcome::Infeasible,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_minimum() {
        let (x, v) = golden(|t| (t - 0.3).powi(2) + 1.0, -1.0, 2.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-6 && (v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projected_gradient_respects_box() {
        let f = |x: &[f64]| ((x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2), vec![2.0 * (x[0] - 3.0), 2.0 * (x[1] + 1.0)]);
        let (x, _) = projected_gradient(f, &[0.0, 0.0], &[-1.0, -2.0], &[1.0, 2.0], PgOptions::default());
        assert!((x[0] - 1.0).abs() < 1e-10 && (x[1] + 1.0).abs() < 1e-8);
    }

    #[test]
    fn lp_cases() {
        let a = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, -1.0]];
        match lp_max(&[1.0, 1.0], &a, &[1.0, 2.0, 0.0]) {
            LpOutcome::Optimal { value, .. } => assert!((value - 3.0).abs() < 1e-9),
            o => panic!("{o:?}"),
        }
        assert_eq!(lp_max(&[-1.0, 0.0], &a, &[1.0, 2.0, 0.0]), LpOutcome::Optimal { value: 2.0, x: vec![-2.0, 2.0] });
        assert_eq!(lp_max(&[1.0], &[vec![-1.0]], &[0.0]), LpOutcome::Unbounded);
        assert_eq!(lp_max(&[1.0], &[vec![1.0], vec![-1.0]], &[0.0, -1.0]), LpOutcome::Infeasible);
    }
}
