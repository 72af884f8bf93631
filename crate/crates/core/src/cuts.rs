//! Separating cut families: halfspaces for convex sets, balls for closed
//! sets, and ball × halfspace products for graphs of multifunctions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::{dist, dot, norm, norm_sq, scale, sub};
use crate::oracles::{Aabb, ParamMultifunction, SetOracle};
use crate::sampling::Halton;

/// Open region {u : ⟨z*, u⟩ > γ}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceCut {
    pub z_star: Vec<f64>,
    pub gamma: f64,
}

impl HalfspaceCut {
    pub fn margin(&self, u: &[f64]) -> f64 {
        dot(&self.z_star, u) - self.gamma
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        self.margin(u) > 0.0
    }
}

/// Open ball {x : ⟨x, x*⟩ − ½‖x‖² > β}, i.e. B_ε(x*) with β = ½‖x*‖² − ½ε².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallCut {
    pub x_star: Vec<f64>,
    pub beta: f64,
}

impl BallCut {
    pub fn from_center_radius(center: Vec<f64>, eps: f64) -> Self {
        let beta = 0.5 * norm_sq(&center) - 0.5 * eps * eps;
        BallCut { x_star: center, beta }
    }

    pub fn radius(&self) -> f64 {
        (norm_sq(&self.x_star) - 2.0 * self.beta).max(0.0).sqrt()
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        dot(x, &self.x_star) - 0.5 * norm_sq(x) - self.beta
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.margin(x) > 0.0
    }
}

/// Product region ball × halfspace. A missing factor means the whole space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphCut {
    pub ball: Option<BallCut>,
    pub half: Option<HalfspaceCut>,
}

impl GraphCut {
    pub fn halfspace(h: HalfspaceCut) -> Self {
        GraphCut { ball: None, half: Some(h) }
    }

    pub fn ball(b: BallCut) -> Self {
        GraphCut { ball: Some(b), half: None }
    }

    pub fn contains(&self, x: &[f64], y: &[f64]) -> bool {
        self.ball.as_ref().is_none_or(|b| b.contains(x)) && self.half.as_ref().is_none_or(|h| h.contains(y))
    }

    /// Smallest factor margin; positive exactly when the cut contains (x, y).
    pub fn margin(&self, x: &[f64], y: &[f64]) -> f64 {
        let b = self.ball.as_ref().map_or(f64::INFINITY, |b| b.margin(x));
        let h = self.half.as_ref().map_or(f64::INFINITY, |h| h.margin(y));
        b.min(h)
    }

    fn param_distance(&self, other: &GraphCut) -> f64 {
        let mut d = 0.0;
        match (&self.ball, &other.ball) {
            (Some(a), Some(b)) => d += dist(&a.x_star, &b.x_star) + (a.radius() - b.radius()).abs(),
            (None, None) => {}
            _ => return f64::INFINITY,
        }
        match (&self.half, &other.half) {
            (Some(a), Some(b)) => d += dist(&a.z_star, &b.z_star) + (a.gamma - b.gamma).abs(),
            (None, None) => {}
            _ => return f64::INFINITY,
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverMode {
    Halfspace,
    Ball,
    /// Halfspaces against the closed convex hull, from support values.
    Hull,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverOptions {
    pub seed: u64,
    /// Low-discrepancy candidate points drawn over the sampling region.
    pub n_samples: usize,
    /// Relative inflation of the bounding box for the sampling region.
    pub margin: f64,
    /// Cuts closer than this in parameter space are merged.
    pub dedup_tol: f64,
    /// Smallest radius tried by the graph ε search.
    pub eps_floor: f64,
    /// Bisection steps that enlarge an accepted ε toward the first rejected one.
    pub eps_refine: usize,
    #[serde(default)]
    pub exec: Exec,
}

impl Default for CoverOptions {
    fn default() -> Self {
        CoverOptions { seed: 0, n_samples: 2048, margin: 0.5, dedup_tol: 1e-9, eps_floor: 1e-6, eps_refine: 6, exec: Exec::Auto }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverReport {
    pub cuts: Vec<GraphCut>,
    /// Candidate points found outside the set or graph.
    pub n_exterior: usize,
    /// Fraction of those covered by the selected cuts.
    pub coverage: f64,
    /// Candidates whose separation failed.
    pub skipped: usize,
    pub warning: Option<String>,
}

/// Sampling region for a set: its bounding box inflated by `margin` times
/// max(diameter, 1).
pub fn sampling_region(b: &Aabb, margin: f64) -> Aabb {
    b.inflate(margin * b.diameter().max(1.0))
}

/// Supporting halfspace through the projection of an exterior point.
pub fn separate_point_convex(oracle: &SetOracle, p: &[f64]) -> Result<HalfspaceCut> {
    if !oracle.is_convex() {
        return Err(Error::Nonconvex("halfspace separation needs a convex set".into()));
    }
    if oracle.member(p) {
        return Err(Error::NoSeparation);
    }
    let q = oracle.try_project(p).ok_or_else(|| Error::EmptySet("cannot separate from the empty set".into()))?;
    let d = sub(p, &q);
    let n = norm(&d);
    if n <= 0.0 {
        return Err(Error::NoSeparation);
    }
    let z = scale(&d, 1.0 / n);
    let gamma = dot(&z, &q);
    Ok(HalfspaceCut { z_star: z, gamma })
}

/// Halfspace {⟨d, z⟩ > σ(d)} through the support hyperplane of cl co S that
/// maximizes the gap ⟨d, p⟩ − σ(d) over unit directions d.
pub fn separate_point_hull(oracle: &SetOracle, p: &[f64]) -> Result<HalfspaceCut> {
    if oracle.is_empty() {
        return Err(Error::EmptySet("cannot separate from the empty set".into()));
    }
    let dim = p.len();
    let gap = |d: &[f64]| dot(d, p) - oracle.support(d);
    let (d, g) = match dim {
        1 => [vec![1.0], vec![-1.0]]
            .into_iter()
            .map(|d| {
                let g = gap(&d);
                (d, g)
            })
            .fold((vec![1.0], f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a }),
        2 => {
            let at = |t: f64| vec![t.cos(), t.sin()];
            let (t, v) = crate::optim::grid_golden(|t| -gap(&at(t)), 0.0, std::f64::consts::TAU, 361, 1e-12);
            (at(t), -v)
        }
        _ => {
            let dirs = crate::sampling::directions(dim, 1024, 7);
            let mut best = dirs
                .into_iter()
                .map(|d| {
                    let g = gap(&d);
                    (d, g)
                })
                .fold((vec![0.0; dim], f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
            let mut step = 0.05;
            while step > 1e-9 {
                let mut improved = false;
                for i in 0..dim {
                    for sgn in [step, -step] {
                        let mut c = best.0.clone();
                        c[i] += sgn;
                        let c = scale(&c, 1.0 / norm(&c));
                        let g = gap(&c);
                        if g > best.1 {
                            best = (c, g);
                            improved = true;
                        }
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
            best
        }
    };
    if !(g > crate::oracles::TOL) {
        return Err(Error::NoSeparation);
    }
    let gamma = oracle.support(&d);
    Ok(HalfspaceCut { z_star: d, gamma })
}

/// Greedy max-new-coverage ordering over bitsets; ties go to the lowest
/// index. Once no candidate adds coverage, the remaining budget is filled
/// by farthest-point order in cut-parameter space.
fn greedy_order(cover: &[Vec<u64>], budget: usize, spread: impl Fn(usize, usize) -> f64) -> (Vec<usize>, Vec<u64>) {
    let words = cover.first().map_or(0, |c| c.len());
    let mut covered = vec![0u64; words];
    let mut used = vec![false; cover.len()];
    let mut order = Vec::new();
    while order.len() < budget {
        let mut best = None;
        let mut best_gain = 0u32;
        for (i, bits) in cover.iter().enumerate() {
            if used[i] {
                continue;
            }
            let gain: u32 = bits.iter().zip(&covered).map(|(b, c)| (b & !c).count_ones()).sum();
            if gain > best_gain {
                best_gain = gain;
                best = Some(i);
            }
        }
        let Some(i) = best else { break };
        used[i] = true;
        for (c, b) in covered.iter_mut().zip(&cover[i]) {
            *c |= b;
        }
        order.push(i);
    }
    let mut gap: Vec<f64> = (0..cover.len()).map(|j| order.iter().map(|&i| spread(i, j)).fold(f64::INFINITY, f64::min)).collect();
    while order.len() < budget {
        let mut best = None;
        let mut best_gap = 0.0;
        for j in 0..cover.len() {
            if !used[j] && gap[j] > best_gap {
                best_gap = gap[j];
                best = Some(j);
            }
        }
        let Some(i) = best else { break };
        used[i] = true;
        for j in 0..cover.len() {
            gap[j] = gap[j].min(spread(i, j));
        }
        for (c, b) in covered.iter_mut().zip(&cover[i]) {
            *c |= b;
        }
        order.push(i);
    }
    (order, covered)
}

fn bitset<F: Fn(usize) -> bool>(n: usize, f: F) -> Vec<u64> {
    let mut bits = vec![0u64; n.div_ceil(64)];
    for i in 0..n {
        if f(i) {
            bits[i / 64] |= 1 << (i % 64);
        }
    }
    bits
}

fn dedup(cands: Vec<(usize, GraphCut)>, tol: f64) -> Vec<(usize, GraphCut)> {
    let mut out: Vec<(usize, GraphCut)> = Vec::new();
    for (i, c) in cands {
        if !out.iter().any(|(_, o)| o.param_distance(&c) <= tol) {
            out.push((i, c));
        }
    }
    out
}

/// Greedy selection of at most `budget` cuts covering `points`, given
/// one candidate per point (or `None` when separation failed).
fn select(points: &[(Vec<f64>, Vec<f64>)], cands: Vec<Option<GraphCut>>, budget: usize, opts: &CoverOptions) -> CoverReport {
    let n = points.len();
    let skipped = cands.iter().filter(|c| c.is_none()).count();
    let cands: Vec<(usize, GraphCut)> = cands.into_iter().enumerate().filter_map(|(i, c)| c.map(|c| (i, c))).collect();
    let cands = dedup(cands, opts.dedup_tol);
    let bits: Vec<Vec<u64>> = opts.exec.map(cands.len(), |k| bitset(n, |i| cands[k].1.contains(&points[i].0, &points[i].1)));
    let (order, covered) = greedy_order(&bits, budget, |i, j| {
        let d = cands[i].1.param_distance(&cands[j].1);
        if d.is_finite() {
            d
        } else {
            f64::MAX
        }
    });
    let count: u32 = covered.iter().map(|w| w.count_ones()).sum();
    CoverReport {
        cuts: order.iter().map(|&k| cands[k].1.clone()).collect(),
        n_exterior: n,
        coverage: if n == 0 { 1.0 } else { count as f64 / n as f64 },
        skipped,
        warning: None,
    }
}

/// Cover the exterior points `pts` of `oracle` with at most `budget` cuts.
pub fn cover_from_points(oracle: &SetOracle, mode: CoverMode, budget: usize, pts: &[Vec<f64>], opts: &CoverOptions) -> Result<CoverReport> {
    if mode == CoverMode::Halfspace && !oracle.is_convex() {
        return Err(Error::Nonconvex("halfspace cover needs a convex set".into()));
    }
    let mut ext: Vec<Vec<f64>> = pts.iter().filter(|p| !oracle.member(p)).cloned().collect();
    let mut hull_cuts = Vec::new();
    if mode == CoverMode::Hull {
        let cands = opts.exec.map_slice(&ext, |p| separate_point_hull(oracle, p).ok());
        let kept: Vec<(Vec<f64>, HalfspaceCut)> = ext.into_iter().zip(cands).filter_map(|(p, c)| c.map(|c| (p, c))).collect();
        ext = kept.iter().map(|(p, _)| p.clone()).collect();
        hull_cuts = kept.into_iter().map(|(_, c)| Some(GraphCut::halfspace(c))).collect();
    }
    if ext.is_empty() {
        return Ok(CoverReport {
            cuts: Vec::new(),
            n_exterior: 0,
            coverage: 1.0,
            skipped: 0,
            warning: Some("no exterior samples: the set fills the sampling region".into()),
        });
    }
    let cands: Vec<Option<GraphCut>> = if mode == CoverMode::Hull {
        hull_cuts
    } else {
        opts.exec.map_slice(&ext, |p| match mode {
            CoverMode::Halfspace | CoverMode::Hull => separate_point_convex(oracle, p).ok().map(GraphCut::halfspace),
            CoverMode::Ball => {
                let eps = oracle.distance(p);
                (eps > 0.0 && eps.is_finite()).then(|| GraphCut::ball(BallCut::from_center_radius(p.clone(), eps)))
            }
        })
    };
    let points: Vec<(Vec<f64>, Vec<f64>)> = ext
        .into_iter()
        .map(|p| match mode {
            CoverMode::Halfspace | CoverMode::Hull => (Vec::new(), p),
            CoverMode::Ball => (p, Vec::new()),
        })
        .collect();
    Ok(select(&points, cands, budget, opts))
}

/// Cover the complement of a set with seeded low-discrepancy samples.
pub fn cover_complement(oracle: &SetOracle, mode: CoverMode, budget: usize, opts: &CoverOptions) -> Result<CoverReport> {
    if oracle.is_empty() {
        return Err(Error::EmptySet("cannot represent the empty set by cuts".into()));
    }
    let region = sampling_region(oracle.bounding_box(), opts.margin);
    let pts = region.sampler(opts.seed).points(opts.n_samples);
    cover_from_points(oracle, mode, budget, &pts, opts)
}

/// Probe points for the ball B_ε(x̂): center, ±ε e_i, ±ε/2 e_i and the
/// 2^s diagonal points at radius ε.
/// The flag marks probes on the sphere of radius ε, where the strict
/// inequality of the open ball relaxes to its closure.
fn ball_probes(center: &[f64], eps: f64) -> Vec<(Vec<f64>, bool)> {
    let s = center.len();
    let mut out = vec![(center.to_vec(), false)];
    for i in 0..s {
        for t in [eps, -eps, 0.5 * eps, -0.5 * eps] {
            let mut p = center.to_vec();
            p[i] += t;
            out.push((p, t.abs() == eps));
        }
    }
    if (2..=6).contains(&s) {
        let r = eps / (s as f64).sqrt();
        for mask in 0..(1usize << s) {
            out.push(((0..s).map(|i| center[i] + if mask >> i & 1 == 1 { r } else { -r }).collect(), true));
        }
    }
    out
}

/// Separate (x̂, ŷ) from the graph of a convex-valued multifunction by a
/// product of a parameter ball and a value halfspace.
pub fn separate_graph_point(pmf: &ParamMultifunction, x_hat: &[f64], y_hat: &[f64], eps_floor: f64) -> Result<GraphCut> {
    separate_graph_point_with(pmf, x_hat, y_hat, eps_floor, 0)
}

pub fn separate_graph_point_with(
    pmf: &ParamMultifunction,
    x_hat: &[f64],
    y_hat: &[f64],
    eps_floor: f64,
    refine: usize,
) -> Result<GraphCut> {
    if !pmf.values_convex {
        return Err(Error::Nonconvex("graph separation needs convex values".into()));
    }
    let vs = pmf.value_set(x_hat);
    if vs.member(y_hat) {
        return Err(Error::NoSeparation);
    }
    let m = pmf.value_dim;
    let (y_star, alpha) = match vs.try_project(y_hat) {
        None => {
            let n = norm(y_hat);
            let y_star = if n > 0.0 {
                scale(y_hat, -1.0 / n)
            } else {
                let mut e = vec![0.0; m];
                e[0] = 1.0;
                e
            };
            let alpha = dot(&y_star, y_hat) + 1.0;
            (y_star, alpha)
        }
        Some(q) => {
            let d = sub(&q, y_hat);
            let n = norm(&d);
            if n <= 0.0 {
                return Err(Error::NoSeparation);
            }
            let y_star = scale(&d, 1.0 / n);
            let neg: Vec<f64> = y_star.iter().map(|v| -v).collect();
            let beta = -pmf.support(x_hat, &neg);
            let at = dot(&y_star, y_hat);
            if !(beta > at) {
                return Err(Error::NoSeparation);
            }
            let alpha = if beta.is_finite() { 0.5 * (beta + at) } else { at + 1.0 };
            (y_star, alpha)
        }
    };
    let neg: Vec<f64> = y_star.iter().map(|v| -v).collect();
    let lower = |xp: &[f64]| -pmf.support(xp, &neg);
    let accepts = |eps: f64| {
        let ok = |v: f64, on_sphere: bool| v > alpha || (on_sphere && v >= alpha);
        ball_probes(x_hat, eps).iter().all(|(xp, on_sphere)| ok(lower(xp), *on_sphere)) && {
            let (v, on_sphere) = crate::optim::ball_min(&lower, x_hat, eps);
            ok(v, on_sphere)
        }
    };
    let mut eps = (pmf.domain.diameter() / 4.0).max(eps_floor);
    let mut rejected = None;
    loop {
        if accepts(eps) {
            break;
        }
        rejected = Some(eps);
        eps *= 0.5;
        if eps < eps_floor {
            return Err(Error::CertificateFailed(x_hat.to_vec()));
        }
    }
    if let Some(mut hi) = rejected {
        for _ in 0..refine {
            let mid = 0.5 * (eps + hi);
            if accepts(mid) {
                eps = mid;
            } else {
                hi = mid;
            }
        }
    }
    Ok(GraphCut {
        ball: if pmf.param_dim == 0 { None } else { Some(BallCut::from_center_radius(x_hat.to_vec(), eps)) },
        half: Some(HalfspaceCut { z_star: neg, gamma: -alpha }),
    })
}

/// Graph sampling region: domain × inflated value box.
pub fn graph_region(pmf: &ParamMultifunction, margin: f64) -> (Aabb, Aabb) {
    (pmf.domain.clone(), sampling_region(&pmf.value_box, margin))
}

/// Cover the complement of gph M with at most `budget` product cuts.
pub fn cover_complement_graph(pmf: &ParamMultifunction, budget: usize, opts: &CoverOptions) -> Result<CoverReport> {
    let (dom, vb) = graph_region(pmf, opts.margin);
    let s = pmf.param_dim;
    let h = Halton::new(s + pmf.value_dim, opts.seed);
    let raw: Vec<(Vec<f64>, Vec<f64>)> = (0..opts.n_samples)
        .map(|i| {
            let u = h.unit(i);
            let x = (0..s).map(|j| dom.lo[j] + u[j] * (dom.hi[j] - dom.lo[j])).collect();
            let y = (0..pmf.value_dim).map(|j| vb.lo[j] + u[s + j] * (vb.hi[j] - vb.lo[j])).collect();
            (x, y)
        })
        .collect();
    cover_graph_from_points(pmf, budget, &raw, opts)
}

pub fn cover_graph_from_points(
    pmf: &ParamMultifunction,
    budget: usize,
    pts: &[(Vec<f64>, Vec<f64>)],
    opts: &CoverOptions,
) -> Result<CoverReport> {
    if !pmf.values_convex {
        return Err(Error::Nonconvex("graph cover needs convex values".into()));
    }
    let flags = opts.exec.map_slice(pts, |(x, y)| !pmf.graph_member(x, y));
    let ext: Vec<(Vec<f64>, Vec<f64>)> = pts.iter().zip(flags).filter(|(_, f)| *f).map(|(p, _)| p.clone()).collect();
    if ext.is_empty() {
        return Ok(CoverReport {
            cuts: Vec::new(),
            n_exterior: 0,
            coverage: 1.0,
            skipped: 0,
            warning: Some("no exterior samples: the graph fills the sampling region".into()),
        });
    }
    let cands = opts.exec.map_slice(&ext, |(x, y)| separate_graph_point_with(pmf, x, y, opts.eps_floor, opts.eps_refine).ok());
    let mut rep = select(&ext, cands, budget, opts);
    if rep.skipped > 0 {
        rep.warning = Some(format!("{} samples failed the pseudo-usc certificate", rep.skipped));
    }
    Ok(rep)
}

/// Number of (point, cut) pairs where a set or graph point lies inside a cut
/// by a margin above `tol`. Points sampled on a tangent cut's boundary give
/// rounding-level margins, hence the tolerance.
pub fn cut_violations(cuts: &[GraphCut], points: &[(Vec<f64>, Vec<f64>)], tol: f64) -> usize {
    points.iter().map(|(x, y)| cuts.iter().filter(|c| c.margin(x, y) > tol).count()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{make_param_multifunction, PmfKind, PmfSpec, ShapeSpec};

    fn pmf(kind: PmfKind, r: f64) -> ParamMultifunction {
        make_param_multifunction(&PmfSpec { kind, domain: Aabb::cube(1, r), value_box: None }, true).unwrap()
    }

    fn halfline_up(offset: &str) -> PmfKind {
        PmfKind::Translated {
            x_vars: vec!["x".into()],
            base: ShapeSpec::Halfspace { normal: vec![-1.0], offset: 0.0, bbox: Some(Aabb::cube(1, 2.0)) },
            offset: vec![offset.into()],
        }
    }

    #[test]
    fn convex_separation_examples() {
        let b = SetOracle::ball(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(separate_point_convex(&b, &[2.0, 0.0]).unwrap(), HalfspaceCut { z_star: vec![1.0, 0.0], gamma: 1.0 });
        let hl = SetOracle::polytope(vec![vec![1.0]], vec![0.0], Some(Aabb::cube(1, 2.0))).unwrap();
        assert_eq!(separate_point_convex(&hl, &[1.0]).unwrap(), HalfspaceCut { z_star: vec![1.0], gamma: 0.0 });
        let bx = SetOracle::boxed(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let c = separate_point_convex(&bx, &[2.0, 2.0]).unwrap();
        let r = 0.5f64.sqrt();
        assert!((c.z_star[0] - r).abs() < 1e-15 && (c.z_star[1] - r).abs() < 1e-15);
        assert!((c.gamma - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(separate_point_convex(&b, &[0.0, 0.0]), Err(Error::NoSeparation));
    }

    #[test]
    fn ball_cover_of_origin() {
        let o = SetOracle::points(vec![vec![0.0]]).unwrap();
        let rep = cover_from_points(&o, CoverMode::Ball, 2, &[vec![1.0], vec![-1.0]], &CoverOptions::default()).unwrap();
        assert_eq!(rep.cuts.len(), 2);
        let radii: Vec<f64> = rep.cuts.iter().map(|c| c.ball.as_ref().unwrap().radius()).collect();
        assert_eq!(radii, vec![1.0, 1.0]);
        assert_eq!(rep.cuts[0].ball.as_ref().unwrap().x_star, vec![1.0]);
        assert_eq!(rep.cuts[1].ball.as_ref().unwrap().x_star, vec![-1.0]);
    }

    #[test]
    fn interval_halfspace_cover() {
        let o = SetOracle::boxed(vec![0.0], vec![1.0]).unwrap();
        let rep = cover_from_points(&o, CoverMode::Halfspace, 8, &[vec![2.0], vec![-1.0], vec![3.0]], &CoverOptions::default()).unwrap();
        assert_eq!(rep.cuts.len(), 2);
        assert!(rep.cuts.contains(&GraphCut::halfspace(HalfspaceCut { z_star: vec![1.0], gamma: 1.0 })));
        assert!(rep.cuts.contains(&GraphCut::halfspace(HalfspaceCut { z_star: vec![-1.0], gamma: 0.0 })));
    }

    #[test]
    fn ball_tangent_cover_coverage() {
        let b = SetOracle::ball(vec![0.0, 0.0], 1.0).unwrap();
        let opts = CoverOptions { n_samples: 1024, ..Default::default() };
        let rep = cover_complement(&b, CoverMode::Halfspace, 16, &opts).unwrap();
        assert_eq!(rep.cuts.len(), 16);
        let region = sampling_region(b.bounding_box(), opts.margin);
        let probes: Vec<Vec<f64>> = region.sampler(99).points(2000).into_iter().filter(|p| b.distance(p) >= 0.1).collect();
        let hit = probes.iter().filter(|p| rep.cuts.iter().any(|c| c.contains(&[], p))).count();
        assert!(hit as f64 / probes.len() as f64 >= 0.95);
    }

    #[test]
    fn full_region_warns() {
        let b = SetOracle::boxed(vec![-10.0], vec![10.0]).unwrap();
        let rep = cover_from_points(&b, CoverMode::Halfspace, 4, &[vec![0.0]], &CoverOptions::default()).unwrap();
        assert!(rep.cuts.is_empty() && rep.warning.is_some());
    }

    #[test]
    fn graph_separation_halfline() {
        let m = pmf(halfline_up("x"), 1.0);
        let c = separate_graph_point(&m, &[0.0], &[-1.0], 1e-6).unwrap();
        let h = c.half.as_ref().unwrap();
        assert_eq!(h.z_star, vec![-1.0]);
        assert_eq!(h.gamma, 0.5);
        assert_eq!(c.ball.as_ref().unwrap().radius(), 0.5);
    }

    #[test]
    fn graph_separation_constant_ball() {
        let m = pmf(PmfKind::Constant { set: ShapeSpec::Ball { center: vec![0.0, 0.0], radius: 1.0 } }, 1.0);
        let c = separate_graph_point(&m, &[0.0], &[2.0, 0.0], 1e-6).unwrap();
        let h = c.half.as_ref().unwrap();
        assert_eq!(h.z_star, vec![1.0, -0.0]);
        assert_eq!(h.gamma, 1.5);
        assert_eq!(c.ball.as_ref().unwrap().radius(), 0.5);
    }

    #[test]
    fn graph_separation_empty_values() {
        let m = pmf(PmfKind::Empty { value_dim: 1 }, 1.0);
        let c = separate_graph_point(&m, &[0.0], &[0.0], 1e-6).unwrap();
        let h = c.half.as_ref().unwrap();
        assert_eq!(h.z_star, vec![-1.0]);
        assert_eq!(h.gamma, -1.0);
        assert_eq!(c.ball.as_ref().unwrap().radius(), 0.5);
    }

    #[test]
    fn diagonal_graph_cover_is_disjoint() {
        let diag =
            PmfKind::Translated { x_vars: vec!["x".into()], base: ShapeSpec::Points { points: vec![vec![0.0]] }, offset: vec!["x".into()] };
        let m = pmf(diag, 2.0);
        let opts = CoverOptions { n_samples: 512, ..Default::default() };
        let rep = cover_complement_graph(&m, 8, &opts).unwrap();
        assert!(rep.cuts.len() <= 8 && !rep.cuts.is_empty());
        let above = rep.cuts.iter().any(|c| c.half.as_ref().unwrap().z_star[0] > 0.0);
        let below = rep.cuts.iter().any(|c| c.half.as_ref().unwrap().z_star[0] < 0.0);
        assert!(above && below);
        let graph = m.sample_graph(1000, 5);
        assert_eq!(cut_violations(&rep.cuts, &graph, 0.0), 0);
    }

    #[test]
    fn parabola_graph_cover_is_disjoint() {
        let m = pmf(halfline_up("x^2"), 2.0);
        let opts = CoverOptions { n_samples: 512, ..Default::default() };
        let rep = cover_complement_graph(&m, 32, &opts).unwrap();
        let graph = m.sample_graph(1000, 6);
        assert_eq!(cut_violations(&rep.cuts, &graph, 0.0), 0);
    }

    #[test]
    fn coverage_monotone_in_budget() {
        let b = SetOracle::boxed(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let opts = CoverOptions { n_samples: 512, ..Default::default() };
        let mut last = 0.0;
        for n in [1, 2, 4, 8, 16] {
            let c = cover_complement(&b, CoverMode::Halfspace, n, &opts).unwrap().coverage;
            assert!(c >= last);
            last = c;
        }
    }

    #[test]
    fn deterministic() {
        let b = SetOracle::ball(vec![0.0, 0.0], 1.0).unwrap();
        let opts = CoverOptions { n_samples: 256, seed: 4, ..Default::default() };
        let a = cover_complement(&b, CoverMode::Halfspace, 8, &opts).unwrap();
        let c = cover_complement(&b, CoverMode::Halfspace, 8, &CoverOptions { exec: Exec::Sequential, ..opts }).unwrap();
        assert_eq!(a.cuts, c.cuts);
    }
}
