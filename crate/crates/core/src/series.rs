//! The representation series
//!
//! ```text
//! φ(x, y) = Σ_n w_n θ((⟨x*_n, x⟩ − ½‖x‖² − β_n)/ζ_n) · θ((⟨z*_n, y⟩ − γ_n)/ξ_n)
//! ```
//!
//! with ζ_n = 1 + |β_n| + ‖x*_n‖, ξ_n = 1 + ‖z*_n‖ + |γ_n| and
//! w_n = (ζ_n^n ξ_n^n 2^n)^{-1}. A missing ball or halfspace factor is the
//! constant 1 with ζ_n = 1 or ξ_n = 1.
//!
//! Weights and bump values underflow quickly, so values are also available
//! in the log domain: `ln_eval` is finite exactly where φ > 0.

use serde::{Deserialize, Serialize};

use crate::bump::SmoothBump;
use crate::cuts::{sampling_region, GraphCut};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::{norm, SquareMatrix};
use crate::oracles::{Aabb, ParamMultifunction, SetOracle};
use crate::sampling::{BoxSampler, Halton};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RepData", into = "RepData")]
pub struct SeriesRep {
    pub cuts: Vec<GraphCut>,
    pub zeta: Vec<f64>,
    pub xi: Vec<f64>,
    /// ln w_n
    pub ln_weights: Vec<f64>,
    pub bump: SmoothBump,
    /// Parameter dimension.
    pub s: usize,
    /// Value dimension.
    pub m: usize,
}

#[derive(Serialize, Deserialize)]
struct RepData {
    s: usize,
    m: usize,
    bump: SmoothBump,
    cuts: Vec<GraphCut>,
    #[serde(default)]
    zeta: Vec<f64>,
    #[serde(default)]
    xi: Vec<f64>,
    #[serde(default)]
    ln_weights: Vec<f64>,
}

impl TryFrom<RepData> for SeriesRep {
    type Error = Error;
    fn try_from(d: RepData) -> Result<Self> {
        assemble_dims(d.cuts, d.bump, d.s, d.m)
    }
}

impl From<SeriesRep> for RepData {
    fn from(r: SeriesRep) -> Self {
        RepData { s: r.s, m: r.m, bump: r.bump, cuts: r.cuts, zeta: r.zeta, xi: r.xi, ln_weights: r.ln_weights }
    }
}

impl PartialEq for SeriesRep {
    fn eq(&self, o: &Self) -> bool {
        self.s == o.s && self.m == o.m && self.cuts == o.cuts && self.bump == o.bump
    }
}

/// Build φ from cuts in generation order; dimensions are taken from the cuts.
pub fn assemble(cuts: Vec<GraphCut>, bump: SmoothBump) -> Result<SeriesRep> {
    let first = cuts.first().ok_or_else(|| Error::Invalid("cannot assemble a series without cuts".into()))?;
    let s = first.ball.as_ref().map_or(0, |b| b.x_star.len());
    let m = first.half.as_ref().map_or(0, |h| h.z_star.len());
    assemble_dims(cuts, bump, s, m)
}

/// As [`assemble`] with explicit dimensions; an empty cut list gives φ ≡ 0.
pub fn assemble_dims(cuts: Vec<GraphCut>, bump: SmoothBump, s: usize, m: usize) -> Result<SeriesRep> {
    let mut zeta = Vec::with_capacity(cuts.len());
    let mut xi = Vec::with_capacity(cuts.len());
    let mut ln_weights = Vec::with_capacity(cuts.len());
    for (k, c) in cuts.iter().enumerate() {
        let z = match &c.ball {
            Some(b) => {
                if b.x_star.len() != s {
                    return Err(Error::Dimension { expected: s, got: b.x_star.len() });
                }
                1.0 + b.beta.abs() + norm(&b.x_star)
            }
            None => 1.0,
        };
        let x = match &c.half {
            Some(h) => {
                if h.z_star.len() != m {
                    return Err(Error::Dimension { expected: m, got: h.z_star.len() });
                }
                1.0 + norm(&h.z_star) + h.gamma.abs()
            }
            None => 1.0,
        };
        let n = (k + 1) as f64;
        zeta.push(z);
        xi.push(x);
        ln_weights.push(-n * (z.ln() + x.ln() + std::f64::consts::LN_2));
    }
    Ok(SeriesRep { cuts, zeta, xi, ln_weights, bump, s, m })
}

/// Per-term log factors at a point.
struct TermLogs {
    /// ln w + ln θ(a) + ln θ(b)
    ln_t: f64,
    a: Option<(f64, f64, f64)>,
    b: Option<(f64, f64, f64)>,
}

fn log_sum_exp(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let mx = v.clone().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + v.map(|t| (t - mx).exp()).sum::<f64>().ln()
}

/// Derivatives of φ over the stacked variable (x, y).
#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Option<SquareMatrix>,
}

impl SeriesRep {
    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.s + self.m
    }

    pub fn weights(&self) -> Vec<f64> {
        self.ln_weights.iter().map(|l| l.exp()).collect()
    }

    /// Split a stacked point into (x, y).
    pub fn split<'a>(&self, z: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        z.split_at(self.s)
    }

    fn arg_a(&self, n: usize, x: &[f64]) -> Option<f64> {
        self.cuts[n].ball.as_ref().map(|b| b.margin(x) / self.zeta[n])
    }

    fn arg_b(&self, n: usize, y: &[f64]) -> Option<f64> {
        self.cuts[n].half.as_ref().map(|h| h.margin(y) / self.xi[n])
    }

    /// Log factors of the active terms (both arguments positive).
    fn active_terms(&self, x: &[f64], y: &[f64]) -> Vec<(usize, TermLogs)> {
        let mut out = Vec::new();
        for n in 0..self.cuts.len() {
            let a = self.arg_a(n, x);
            if a.is_some_and(|v| v <= 0.0) {
                continue;
            }
            let b = self.arg_b(n, y);
            if b.is_some_and(|v| v <= 0.0) {
                continue;
            }
            let la = a.map(|v| self.bump.ln_derivs(v));
            let lb = b.map(|v| self.bump.ln_derivs(v));
            let ln_t = self.ln_weights[n] + la.map_or(0.0, |l| l.0) + lb.map_or(0.0, |l| l.0);
            out.push((n, TermLogs { ln_t, a: la, b: lb }));
        }
        out
    }

    fn check(&self, x: &[f64], y: &[f64]) -> Result<()> {
        if x.len() != self.s {
            return Err(Error::Dimension { expected: self.s, got: x.len() });
        }
        if y.len() != self.m {
            return Err(Error::Dimension { expected: self.m, got: y.len() });
        }
        Ok(())
    }

    /// ln φ(x, y); −∞ exactly where φ = 0.
    pub fn ln_eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let terms = self.active_terms(x, y);
        log_sum_exp(terms.iter().map(|(_, t)| t.ln_t))
    }

    /// φ(x, y) ≥ 0.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.ln_eval(x, y).exp()
    }

    pub fn try_eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check(x, y)?;
        Ok(self.eval(x, y))
    }

    pub fn eval_flat(&self, z: &[f64]) -> f64 {
        let (x, y) = self.split(z);
        self.eval(x, y)
    }

    pub fn ln_eval_flat(&self, z: &[f64]) -> f64 {
        let (x, y) = self.split(z);
        self.ln_eval(x, y)
    }

    /// Per-term gradient of ln T_n over (x, y), given its log factors.
    fn ln_term_grad(&self, n: usize, t: &TermLogs, x: &[f64], out: &mut [f64], weight: f64) {
        if let (Some(b), Some((l0, l1, _))) = (&self.cuts[n].ball, t.a) {
            let r = (l1 - l0).exp() / self.zeta[n];
            for i in 0..self.s {
                out[i] += weight * r * (b.x_star[i] - x[i]);
            }
        }
        if let (Some(h), Some((l0, l1, _))) = (&self.cuts[n].half, t.b) {
            let r = (l1 - l0).exp() / self.xi[n];
            for j in 0..self.m {
                out[self.s + j] += weight * r * h.z_star[j];
            }
        }
    }

    /// (ln φ, ∇ ln φ); the gradient is zero where φ = 0.
    pub fn ln_grad(&self, x: &[f64], y: &[f64]) -> (f64, Vec<f64>) {
        let terms = self.active_terms(x, y);
        let lse = log_sum_exp(terms.iter().map(|(_, t)| t.ln_t));
        let mut g = vec![0.0; self.dim()];
        if lse == f64::NEG_INFINITY {
            return (lse, g);
        }
        for (n, t) in &terms {
            self.ln_term_grad(*n, t, x, &mut g, (t.ln_t - lse).exp());
        }
        (lse, g)
    }

    /// Value, gradient and (for order 2) Hessian over (x, y).
    pub fn derivatives(&self, x: &[f64], y: &[f64], order: u8) -> Derivatives {
        let d = self.dim();
        let terms = self.active_terms(x, y);
        let mut value = 0.0;
        let mut grad = vec![0.0; d];
        let mut hess = (order >= 2).then(|| SquareMatrix::zeros(d));
        for (n, t) in &terms {
            let tv = t.ln_t.exp();
            if tv == 0.0 {
                continue;
            }
            value += tv;
            // ∇a, ∇b as dense vectors over (x, y), with ratios θ′/θ and θ″/θ.
            let mut ga = vec![0.0; d];
            let mut gb = vec![0.0; d];
            let (mut ra1, mut ra2, mut rb1, mut rb2) = (0.0, 0.0, 0.0, 0.0);
            if let (Some(b), Some((l0, l1, l2))) = (&self.cuts[*n].ball, t.a) {
                for i in 0..self.s {
                    ga[i] = (b.x_star[i] - x[i]) / self.zeta[*n];
                }
                ra1 = (l1 - l0).exp();
                ra2 = (l2 - l0).exp();
            }
            if let (Some(h), Some((l0, l1, l2))) = (&self.cuts[*n].half, t.b) {
                for j in 0..self.m {
                    gb[self.s + j] = h.z_star[j] / self.xi[*n];
                }
                rb1 = (l1 - l0).exp();
                rb2 = (l2 - l0).exp();
            }
            for i in 0..d {
                grad[i] += tv * (ra1 * ga[i] + rb1 * gb[i]);
            }
            if let Some(hm) = hess.as_mut() {
                for i in 0..d {
                    for j in i..d {
                        let mut v = ra2 * ga[i] * ga[j] + rb2 * gb[i] * gb[j] + ra1 * rb1 * (ga[i] * gb[j] + gb[i] * ga[j]);
                        if i == j && i < self.s && self.cuts[*n].ball.is_some() {
                            v -= ra1 / self.zeta[*n];
                        }
                        hm.add_at(i, j, tv * v);
                    }
                }
            }
        }
        if let Some(hm) = hess.as_mut() {
            for i in 0..d {
                for j in 0..i {
                    let v = hm.get(j, i);
                    hm.set(i, j, v);
                }
            }
        }
        Derivatives { value, grad, hess }
    }

    pub fn gradient(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.derivatives(x, y, 1).grad
    }

    pub fn hessian(&self, x: &[f64], y: &[f64]) -> SquareMatrix {
        self.derivatives(x, y, 2).hess.expect("order 2 requested")
    }

    /// Analytic weak-convexity constant: ∇²_x φ + L(‖y‖+1) I ⪰ 0.
    ///
    /// Only ball terms depend on x; each contributes −w θ′(a) θ(b)/ζ · I,
    /// and θ(b) ≤ max(b, 0) ≤ ‖y‖ + 1 for halfspace factors.
    pub fn weak_convexity_constant(&self) -> f64 {
        let sup1 = self.bump.sup_derivative(1);
        (0..self.len()).filter(|&n| self.cuts[n].ball.is_some()).map(|n| sup1 * self.ln_weights[n].exp() / self.zeta[n]).sum()
    }
}

/// Halfspace cover of a convex set (s = 0) or ball cover of a closed set
/// (m = 0), assembled into a series.
pub fn represent_set(
    oracle: &SetOracle,
    mode: crate::cuts::CoverMode,
    budget: usize,
    opts: &crate::cuts::CoverOptions,
) -> Result<(SeriesRep, crate::cuts::CoverReport)> {
    let cover = crate::cuts::cover_complement(oracle, mode, budget, opts)?;
    let d = oracle.dim();
    let (s, m) = match mode {
        crate::cuts::CoverMode::Halfspace | crate::cuts::CoverMode::Hull => (0, d),
        crate::cuts::CoverMode::Ball => (d, 0),
    };
    let rep = assemble_dims(cover.cuts.clone(), SmoothBump::new(), s, m)?;
    Ok((rep, cover))
}

/// Graph cover of a convex-valued multifunction, assembled into a series.
pub fn represent_graph(
    pmf: &ParamMultifunction,
    budget: usize,
    opts: &crate::cuts::CoverOptions,
) -> Result<(SeriesRep, crate::cuts::CoverReport)> {
    let cover = crate::cuts::cover_complement_graph(pmf, budget, opts)?;
    let s = pmf.param_dim;
    let m = pmf.value_dim;
    // Parameterless families keep their ball factor as the whole space.
    let rep = assemble_dims(cover.cuts.clone(), SmoothBump::new(), s, m)?;
    Ok((rep, cover))
}

/// Where a fitted supremum was attained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedBound {
    pub value: f64,
    pub at: Vec<f64>,
}

impl FittedBound {
    fn new() -> Self {
        FittedBound { value: 0.0, at: Vec::new() }
    }

    fn offer(&mut self, v: f64, at: &[f64]) {
        if v > self.value {
            self.value = v;
            self.at = at.to_vec();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepCertificate {
    pub l: f64,
    pub c1: FittedBound,
    pub c2: FittedBound,
    pub r: FittedBound,
    /// min over samples of the smallest eigenvalue of ∇²_x φ + L(‖y‖+1) I.
    pub min_weak_convexity_eig: f64,
    /// min over samples of the smallest eigenvalue of ∇²_y φ.
    pub min_yy_eig: f64,
    pub n_samples: usize,
    pub valid: bool,
}

/// Low-discrepancy points over `region` (in stacked (x, y) coordinates).
pub fn region_samples(region: &Aabb, n: usize, seed: u64) -> Vec<Vec<f64>> {
    BoxSampler::new(region.lo.clone(), region.hi.clone(), seed).points(n)
}

/// Fit growth constants and check the weak-convexity bound on `samples`.
pub fn certify(rep: &SeriesRep, samples: &[Vec<f64>], exec: Exec) -> RepCertificate {
    let l = rep.weak_convexity_constant();
    let s = rep.s;
    let per = exec.map_slice(samples, |z| {
        let (x, y) = rep.split(z);
        let d = rep.derivatives(x, y, 2);
        let h = d.hess.unwrap();
        let nx = norm(x);
        let ny = norm(y);
        let c1 = norm(&d.grad) / ((ny + 1.0) * (nx + 1.0));
        let c2 = h.spectral_norm() / ((ny + 1.0) * (nx * nx + 1.0));
        let gy = norm(&d.grad[s..]);
        let hyy = h.block(s, rep.m);
        let r = gy.max(hyy.spectral_norm()) / (nx + 1.0);
        let wc = if s > 0 {
            let mut hxx = h.block(0, s);
            for i in 0..s {
                hxx.add_at(i, i, l * (ny + 1.0));
            }
            hxx.min_eigenvalue()
        } else {
            0.0
        };
        let yy = if rep.m > 0 { hyy.min_eigenvalue() } else { 0.0 };
        (c1, c2, r, wc, yy)
    });
    let mut cert = RepCertificate {
        l,
        c1: FittedBound::new(),
        c2: FittedBound::new(),
        r: FittedBound::new(),
        min_weak_convexity_eig: f64::INFINITY,
        min_yy_eig: f64::INFINITY,
        n_samples: samples.len(),
        valid: true,
    };
    for (z, (c1, c2, r, wc, yy)) in samples.iter().zip(per) {
        cert.c1.offer(c1, z);
        cert.c2.offer(c2, z);
        cert.r.offer(r, z);
        cert.min_weak_convexity_eig = cert.min_weak_convexity_eig.min(wc);
        cert.min_yy_eig = cert.min_yy_eig.min(yy);
    }
    cert.valid = cert.min_weak_convexity_eig >= -1e-8
        && [cert.l, cert.c1.value, cert.c2.value, cert.r.value].iter().all(|v| v.is_finite() && *v >= 0.0);
    cert
}

/// What a representation is supposed to reproduce.
#[derive(Clone, Copy)]
pub enum Target<'a> {
    /// A set represented with halfspace cuts (points are y, s = 0) or ball
    /// cuts (points are x, m = 0).
    Set(&'a SetOracle),
    Graph(&'a ParamMultifunction),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// max φ over set or graph samples.
    pub r_in: f64,
    /// min φ over exterior samples at distance ≥ δ.
    pub r_out: f64,
    /// ln r_out; finite exactly when r_out is mathematically positive.
    pub ln_r_out: f64,
    pub delta: f64,
    pub n_in: usize,
    pub n_out: usize,
    /// Fraction of exterior samples at distance ≥ δ with φ > 0.
    pub coverage: f64,
    pub r_out_at: Vec<f64>,
}

/// Stacked sample of target points and exterior probes with their distance.
pub fn residual_samples(rep: &SeriesRep, target: Target<'_>, n: usize, seed: u64, margin: f64) -> (Vec<Vec<f64>>, Vec<(Vec<f64>, f64)>) {
    match target {
        Target::Set(o) => {
            let inside = o.sample(n, seed);
            let region = sampling_region(o.bounding_box(), margin);
            let outside = region.sampler(seed ^ 0x9e37_79b9).points(n).into_iter().map(|p| {
                let d = o.distance(&p);
                (p, d)
            });
            let _ = rep;
            (inside, outside.collect())
        }
        Target::Graph(pmf) => {
            let inside = pmf.sample_graph(n, seed).into_iter().map(|(x, y)| [x, y].concat()).collect();
            let (dom, vb) = crate::cuts::graph_region(pmf, margin);
            let h = Halton::new(pmf.param_dim + pmf.value_dim, seed ^ 0x9e37_79b9);
            let s = pmf.param_dim;
            let outside = (0..n)
                .map(|i| {
                    let u = h.unit(i);
                    let x: Vec<f64> = (0..s).map(|j| dom.lo[j] + u[j] * (dom.hi[j] - dom.lo[j])).collect();
                    let y: Vec<f64> = (0..pmf.value_dim).map(|j| vb.lo[j] + u[s + j] * (vb.hi[j] - vb.lo[j])).collect();
                    let d = pmf.graph_distance(&x, &y);
                    ([x, y].concat(), d)
                })
                .collect();
            (inside, outside)
        }
    }
}

/// r_in / r_out residuals of the zero set against the target.
pub fn zero_set_residual(
    rep: &SeriesRep,
    target: Target<'_>,
    n_samples: usize,
    delta: f64,
    seed: u64,
    exec: Exec,
) -> Result<ResidualReport> {
    if !(delta > 0.0) {
        return Err(Error::Invalid("delta must be positive".into()));
    }
    let (inside, outside) = residual_samples(rep, target, n_samples, seed, 0.5);
    let r_in = exec.map_slice(&inside, |z| rep.eval_flat(z)).into_iter().fold(0.0, f64::max);
    let far: Vec<&Vec<f64>> = outside.iter().filter(|(_, d)| *d >= delta).map(|(p, _)| p).collect();
    let lns = exec.map_slice(&far, |z| rep.ln_eval_flat(z));
    let mut ln_r_out = f64::INFINITY;
    let mut at = Vec::new();
    let mut hit = 0usize;
    for (z, l) in far.iter().zip(&lns) {
        if *l > f64::NEG_INFINITY {
            hit += 1;
        }
        if *l < ln_r_out {
            ln_r_out = *l;
            at = z.to_vec();
        }
    }
    Ok(ResidualReport {
        r_in,
        r_out: ln_r_out.exp(),
        ln_r_out,
        delta,
        n_in: inside.len(),
        n_out: far.len(),
        coverage: if far.is_empty() { 1.0 } else { hit as f64 / far.len() as f64 },
        r_out_at: at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cuts::{BallCut, HalfspaceCut};

    fn halfline_rep() -> SeriesRep {
        assemble(vec![GraphCut::halfspace(HalfspaceCut { z_star: vec![1.0], gamma: 0.0 })], SmoothBump::new()).unwrap()
    }

    #[test]
    fn single_cut_halfline() {
        let r = halfline_rep();
        assert_eq!(r.xi, vec![2.0]);
        assert_eq!(r.zeta, vec![1.0]);
        assert!((r.weights()[0] - 0.25).abs() < 1e-16);
        assert_eq!(r.eval(&[], &[-1.0]), 0.0);
        assert!((r.eval(&[], &[2.0]) - 0.125).abs() < 1e-12);
        let b = SmoothBump::new();
        assert!((r.eval(&[], &[0.7]) - b.theta(0.35) / 4.0).abs() < 1e-15);
    }

    #[test]
    fn weights_bounded() {
        let cuts = (0..5).map(|k| GraphCut::halfspace(HalfspaceCut { z_star: vec![1.0, 0.0], gamma: k as f64 })).collect();
        let r = assemble(cuts, SmoothBump::new()).unwrap();
        for (n, w) in r.weights().iter().enumerate() {
            assert!(*w <= 0.5f64.powi(n as i32 + 1));
            assert!(r.zeta[n] >= 1.0 && r.xi[n] >= 1.0);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let cuts = vec![
            GraphCut::halfspace(HalfspaceCut { z_star: vec![1.0], gamma: 0.0 }),
            GraphCut::halfspace(HalfspaceCut { z_star: vec![1.0, 0.0], gamma: 0.0 }),
        ];
        assert!(matches!(assemble(cuts, SmoothBump::new()), Err(Error::Dimension { .. })));
        assert!(halfline_rep().try_eval(&[], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn deep_first_cut_contribution() {
        let r = assemble(
            vec![GraphCut {
                ball: Some(BallCut::from_center_radius(vec![0.0], 3.0)),
                half: Some(HalfspaceCut { z_star: vec![1.0], gamma: 0.0 }),
            }],
            SmoothBump::new(),
        )
        .unwrap();
        // a = (4.5 − ½x²)/ζ with ζ = 5.5, b = y/2: pick x = 0, y = 2 → a < 1.
        let w = r.weights()[0];
        let b = SmoothBump::new();
        let v = r.eval(&[0.0], &[2.0]);
        assert!((v - w * b.theta(4.5 / 5.5) * b.theta(1.0)).abs() < 1e-15);
        let r2 = assemble(
            vec![GraphCut {
                ball: Some(BallCut::from_center_radius(vec![0.0], 10.0)),
                half: Some(HalfspaceCut { z_star: vec![1.0], gamma: 0.0 }),
            }],
            SmoothBump::new(),
        )
        .unwrap();
        let wv = r2.weights()[0];
        let v = r2.eval(&[0.0], &[3.0]);
        // a = 50/51 < 1 so only b ≥ 1 is in the linear regime.
        assert!((v - wv * b.theta(50.0 / 51.0) * 1.0).abs() < 1e-15);
    }

    #[test]
    fn hessian_symmetric_and_zero_inside() {
        let cuts = vec![
            GraphCut {
                ball: Some(BallCut::from_center_radius(vec![0.5, 0.0], 1.0)),
                half: Some(HalfspaceCut { z_star: vec![0.6, 0.8], gamma: 0.1 }),
            },
            GraphCut {
                ball: Some(BallCut::from_center_radius(vec![-0.5, 0.2], 1.5)),
                half: Some(HalfspaceCut { z_star: vec![-1.0, 0.0], gamma: 0.3 }),
            },
        ];
        let r = assemble(cuts, SmoothBump::new()).unwrap();
        let h = r.hessian(&[0.1, 0.2], &[1.0, 1.0]);
        assert_eq!(h.max_asymmetry(), 0.0);
        let d = r.derivatives(&[5.0, 5.0], &[0.0, 0.0], 2);
        assert_eq!(d.value, 0.0);
        assert!(d.grad.iter().all(|v| *v == 0.0));
        assert!(d.hess.unwrap().data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn ln_grad_matches_plain_gradient() {
        let cuts = vec![
            GraphCut {
                ball: Some(BallCut::from_center_radius(vec![0.5], 1.0)),
                half: Some(HalfspaceCut { z_star: vec![1.0], gamma: 0.1 }),
            },
            GraphCut {
                ball: Some(BallCut::from_center_radius(vec![-0.5], 1.5)),
                half: Some(HalfspaceCut { z_star: vec![-1.0], gamma: 0.3 }),
            },
        ];
        let r = assemble(cuts, SmoothBump::new()).unwrap();
        let (x, y) = ([0.2], [0.9]);
        let d = r.derivatives(&x, &y, 1);
        let (l, g) = r.ln_grad(&x, &y);
        assert!((l.exp() - d.value).abs() < 1e-15);
        for i in 0..2 {
            assert!((g[i] * d.value - d.grad[i]).abs() < 1e-12 * d.grad[i].abs().max(1e-300));
        }
    }

    #[test]
    fn serde_round_trip_is_stable() {
        let r = halfline_rep();
        let js = serde_json::to_string(&r).unwrap();
        let back: SeriesRep = serde_json::from_str(&js).unwrap();
        assert_eq!(r, back);
        assert_eq!(serde_json::to_string(&back).unwrap(), js);
    }
}
