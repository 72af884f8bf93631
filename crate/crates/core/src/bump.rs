//! The smooth convex transition function θ.
//!
//! θ(s) = ∫_{-∞}^s ψ(t) dt with ψ(t) = g(t) / (g(t) + g(1 − t)) and
//! g(t) = exp(−1/t) for t > 0, zero otherwise. θ vanishes on (−∞, 0],
//! equals s + b on [1, ∞) with b = −1/2, and is C∞, nondecreasing and convex.
//!
//! Values on (0, 1/4] are computed in the variable v = 1/t − 1/(1−t), where
//! the integral becomes a Gauss–Laguerre integral with a smooth kernel. This
//! keeps full relative accuracy as θ(s) decays like exp(−1/s), and gives a
//! log-domain value that stays finite long after θ itself underflows.

use std::num::NonZeroUsize;

use gauss_quad::{GaussLaguerre, GaussLegendre};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LAGUERRE_NODES: usize = 32;
const LEGENDRE_NODES: usize = 20;
const SPLIT: f64 = 0.25;
/// Beyond this |h| the logistic factor is below f64 resolution.
const H_CUTOFF: f64 = 700.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "BumpParams", into = "BumpParams")]
pub struct SmoothBump {
    pub offset_b: f64,
    pub quad_abs_tol: f64,
    laguerre: Vec<(f64, f64)>,
    legendre: Vec<(f64, f64)>,
    theta_split: f64,
    sup_derivs: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct BumpParams {
    offset_b: f64,
    quad_abs_tol: f64,
}

impl From<BumpParams> for SmoothBump {
    fn from(p: BumpParams) -> Self {
        SmoothBump::with_tolerance(p.quad_abs_tol)
    }
}

impl From<SmoothBump> for BumpParams {
    fn from(b: SmoothBump) -> Self {
        BumpParams { offset_b: b.offset_b, quad_abs_tol: b.quad_abs_tol }
    }
}

impl Default for SmoothBump {
    fn default() -> Self {
        Self::new()
    }
}

impl PartialEq for SmoothBump {
    fn eq(&self, other: &Self) -> bool {
        self.offset_b == other.offset_b && self.quad_abs_tol == other.quad_abs_tol
    }
}

/// h(t) = 1/t − 1/(1−t) and its first two derivatives.
#[inline]
fn h_parts(t: f64) -> (f64, f64, f64) {
    let u = 1.0 - t;
    let h = 1.0 / t - 1.0 / u;
    let h1 = -1.0 / (t * t) - 1.0 / (u * u);
    let h2 = 2.0 / (t * t * t) - 2.0 / (u * u * u);
    (h, h1, h2)
}

/// ln(1 + e^x) without overflow.
#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl SmoothBump {
    pub fn new() -> Self {
        Self::with_tolerance(1e-12)
    }

    pub fn with_tolerance(quad_abs_tol: f64) -> Self {
        let lag = GaussLaguerre::new(LAGUERRE_NODES.try_into().unwrap(), 0.0.try_into().unwrap());
        let laguerre: Vec<(f64, f64)> = lag.iter().map(|(x, w)| (*x, *w)).collect();
        let leg = GaussLegendre::new(NonZeroUsize::new(LEGENDRE_NODES).unwrap());
        let legendre: Vec<(f64, f64)> = leg.iter().map(|(x, w)| (*x, *w)).collect();
        let mut bump = SmoothBump { offset_b: -0.5, quad_abs_tol, laguerre, legendre, theta_split: 0.0, sup_derivs: [1.0, 0.0, 0.0] };
        bump.theta_split = bump.theta_small(SPLIT);
        bump.offset_b = bump.composite_psi_integral(0.0, 1.0, 64) - 1.0;
        let mut s2: f64 = 0.0;
        let mut s3: f64 = 0.0;
        let n = 4000;
        for i in 1..n {
            let t = i as f64 / n as f64;
            let (_, d1, d2) = bump.psi_derivs(t);
            s2 = s2.max(d1.abs());
            s3 = s3.max(d2.abs());
        }
        bump.sup_derivs = [1.0, s2, s3];
        bump
    }

    /// ψ, ψ′, ψ″ at t.
    pub fn psi_derivs(&self, t: f64) -> (f64, f64, f64) {
        if t <= 0.0 {
            return (0.0, 0.0, 0.0);
        }
        if t >= 1.0 {
            return (1.0, 0.0, 0.0);
        }
        let (h, h1, h2) = h_parts(t);
        if h > H_CUTOFF {
            return (0.0, 0.0, 0.0);
        }
        if h < -H_CUTOFF {
            return (1.0, 0.0, 0.0);
        }
        let e = (-h.abs()).exp();
        let psi = if h > 0.0 { e / (1.0 + e) } else { 1.0 / (1.0 + e) };
        let q = e / ((1.0 + e) * (1.0 + e));
        let d1 = -q * h1;
        let q1 = d1 * (1.0 - 2.0 * psi);
        let d2 = -(q1 * h1 + q * h2);
        (psi, d1, d2)
    }

    #[inline]
    pub fn psi(&self, t: f64) -> f64 {
        self.psi_derivs(t).0
    }

    /// ln ψ(t); −∞ for t ≤ 0.
    pub fn ln_psi(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if t >= 1.0 {
            return 0.0;
        }
        let (h, _, _) = h_parts(t);
        -softplus(h)
    }

    /// (ln θ, ln θ′, ln θ″) at s; entries are −∞ where the value is zero.
    pub fn ln_derivs(&self, s: f64) -> (f64, f64, f64) {
        if s <= 0.0 {
            return (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        }
        if s >= 1.0 {
            return ((s + self.offset_b).ln(), 0.0, f64::NEG_INFINITY);
        }
        let (h, h1, _) = h_parts(s);
        let lp = -softplus(h);
        let lq = lp - softplus(-h);
        (self.ln_theta(s), lp, lq + (-h1).ln())
    }

    /// G(s) with θ(s) = exp(−h(s)) · G(s) for s ∈ (0, 1/2].
    fn laguerre_factor(&self, s: f64) -> f64 {
        let hs = h_parts(s).0;
        self.laguerre
            .iter()
            .map(|&(x, w)| {
                let v = hs + x;
                let t = 2.0 / ((v + 2.0) + (v * v + 4.0).sqrt());
                let u = 1.0 - t;
                let jac = t * t * u * u / (t * t + u * u);
                w * jac / (1.0 + (-v).exp())
            })
            .sum()
    }

    fn theta_small(&self, s: f64) -> f64 {
        (-h_parts(s).0).exp() * self.laguerre_factor(s)
    }

    fn legendre_psi(&self, a: f64, b: f64) -> f64 {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        r * self.legendre.iter().map(|&(x, w)| w * self.psi(c + r * x)).sum::<f64>()
    }

    fn composite_psi_integral(&self, a: f64, b: f64, panels: usize) -> f64 {
        let step = (b - a) / panels as f64;
        (0..panels).map(|i| self.legendre_psi(a + i as f64 * step, a + (i + 1) as f64 * step)).sum()
    }

    /// θ(s), total over all reals.
    pub fn theta(&self, s: f64) -> f64 {
        if s <= 0.0 {
            0.0
        } else if s >= 1.0 {
            s + self.offset_b
        } else if s <= SPLIT {
            self.theta_small(s)
        } else if s <= 0.5 {
            self.theta_split + self.legendre_psi(SPLIT, s)
        } else {
            s + self.offset_b + self.theta(1.0 - s)
        }
    }

    /// ln θ(s); −∞ for s ≤ 0, finite for every s > 0.
    pub fn ln_theta(&self, s: f64) -> f64 {
        if s <= 0.0 {
            f64::NEG_INFINITY
        } else if s <= SPLIT {
            -h_parts(s).0 + self.laguerre_factor(s).ln()
        } else {
            self.theta(s).ln()
        }
    }

    /// θ^(k)(s) for k ∈ {0, 1, 2, 3}.
    pub fn eval(&self, s: f64, k: u8) -> Result<f64> {
        if !s.is_finite() {
            return Err(Error::Domain(format!("theta argument {s} is not finite")));
        }
        match k {
            0 => Ok(self.theta(s)),
            1 => Ok(self.psi_derivs(s).0),
            2 => Ok(self.psi_derivs(s).1),
            3 => Ok(self.psi_derivs(s).2),
            _ => Err(Error::Domain(format!("derivative order {k} exceeds 3"))),
        }
    }

    /// (θ, θ′, θ″) at s.
    #[inline]
    pub fn theta_012(&self, s: f64) -> (f64, f64, f64) {
        let (p, p1, _) = self.psi_derivs(s);
        (self.theta(s), p, p1)
    }

    pub fn offset(&self) -> f64 {
        self.offset_b
    }

    /// sup |θ^(k)| for k = 1, 2, 3.
    pub fn sup_derivative(&self, k: u8) -> f64 {
        match k {
            1..=3 => self.sup_derivs[(k - 1) as usize],
            _ => f64::INFINITY,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Adaptive Simpson on ψ, independent of the Laguerre path.
    fn simpson_theta(b: &SmoothBump, s: f64) -> f64 {
        #[allow(clippy::too_many_arguments)]
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, c: f64, fa: f64, fm: f64, fc: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + c);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + c);
            let flm = f(lm);
            let frm = f(rm);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (c - m) / 6.0 * (fm + 4.0 * frm + fc);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, c, fm, frm, fc, right, tol / 2.0, depth - 1)
        }
        let f = |t: f64| b.psi(t);
        let (a, c) = (0.0, s.min(1.0));
        let m = 0.5 * (a + c);
        let whole = (c - a) / 6.0 * (f(a) + 4.0 * f(m) + f(c));
        let core = rec(&f, a, c, f(a), f(m), f(c), whole, 1e-15, 50);
        core + (s - 1.0).max(0.0)
    }

    #[test]
    fn vanishes_on_negative_axis() {
        let b = SmoothBump::new();
        for s in [-10.0, -1.0, -1e-300, 0.0] {
            assert_eq!(b.theta(s), 0.0);
            assert_eq!(b.eval(s, 1).unwrap(), 0.0);
        }
        assert_eq!(b.eval(-1.0, 0).unwrap(), 0.0);
    }

    #[test]
    fn offset_is_minus_half() {
        let b = SmoothBump::new();
        assert!((b.offset() + 0.5).abs() < 1e-12);
        assert!(b.offset() > -1.0 && b.offset() < 0.0);
        assert!((b.theta(2.0) - 1.5).abs() < 1e-12);
        assert!((simpson_theta(&b, 1.0) - 1.0 - b.offset()).abs() < 1e-10);
    }

    #[test]
    fn psi_at_half() {
        let b = SmoothBump::new();
        assert!((b.eval(0.5, 1).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn theta_half_matches_oracle() {
        let b = SmoothBump::new();
        let frozen = 0.068_887_474_134_463_59;
        assert!((simpson_theta(&b, 0.5) - frozen).abs() < 1e-12);
        assert!((b.theta(0.5) - frozen).abs() < 1e-13);
    }

    #[test]
    fn agrees_with_simpson_on_unit_interval() {
        let b = SmoothBump::new();
        for i in 1..100 {
            let s = i as f64 / 100.0;
            let o = simpson_theta(&b, s);
            let v = b.theta(s);
            assert!((v - o).abs() <= 1e-12 + 1e-9 * o, "s={s} v={v} o={o}");
        }
    }

    #[test]
    fn ln_theta_consistent() {
        let b = SmoothBump::new();
        for s in [0.01, 0.05, 0.2, 0.3, 0.7, 1.5] {
            assert!((b.ln_theta(s) - b.theta(s).ln()).abs() < 1e-12);
        }
        let deep = b.ln_theta(1e-3);
        assert!(deep.is_finite() && deep < -990.0);
        assert_eq!(b.theta(1e-3), 0.0);
    }

    #[test]
    fn ln_derivs_consistent() {
        let b = SmoothBump::new();
        for s in [0.02, 0.1, 0.4, 0.6, 0.95, 2.0] {
            let (l0, l1, l2) = b.ln_derivs(s);
            let (d0, d1, d2) = b.theta_012(s);
            assert!((l0.exp() - d0).abs() <= 1e-14 * (1.0 + d0));
            assert!((l1.exp() - d1).abs() <= 1e-14 * (1.0 + d1));
            assert!((l2.exp() - d2).abs() <= 1e-12 * (1.0 + d2), "s={s}");
        }
    }

    #[test]
    fn continuity_at_split_points() {
        let b = SmoothBump::new();
        for p in [0.25, 0.5, 1.0] {
            let l = b.theta(p - 1e-12);
            let r = b.theta(p + 1e-12);
            assert!((l - r).abs() < 1e-11, "p={p}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        let b = SmoothBump::new();
        assert!(b.eval(f64::NAN, 0).is_err());
        assert!(b.eval(0.3, 4).is_err());
    }

    #[test]
    fn finite_difference_consistency() {
        let b = SmoothBump::new();
        let h = 1e-5;
        for i in 0..500 {
            let s = -0.5 + 2.0 * i as f64 / 499.0;
            for k in 0..3u8 {
                let fd = (b.eval(s + h, k).unwrap() - b.eval(s - h, k).unwrap()) / (2.0 * h);
                let ex = b.eval(s, k + 1).unwrap();
                assert!((fd - ex).abs() <= 1e-6 * (1.0 + ex.abs()), "s={s} k={k} fd={fd} ex={ex}");
            }
        }
    }

    #[test]
    fn serde_round_trip() {
        let b = SmoothBump::new();
        let js = serde_json::to_string(&b).unwrap();
        let c: SmoothBump = serde_json::from_str(&js).unwrap();
        assert_eq!(b, c);
        assert_eq!(b.theta(0.3), c.theta(0.3));
    }
}
