//! Set oracles and parametric multifunctions built from declarative specs.
//!
//! A [`SetOracle`] answers membership, projection, distance and support
//! queries for a closed set in ℝ^d. A [`ParamMultifunction`] maps a parameter
//! `x` to such a set `M(x)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::linalg::{dist, dot, lex_cmp, norm};
use crate::optim::{grid_golden, lp_max, LpOutcome};
use crate::sampling::{BallSampler, BoxSampler, Halton};

/// Membership and projection tolerance.
pub const TOL: f64 = 1e-9;

/// Axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Aabb {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Dimension { expected: lo.len(), got: hi.len() });
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::Invalid(format!("box bounds {lo:?} / {hi:?} are not ordered and finite")));
        }
        Ok(Aabb { lo, hi })
    }

    pub fn cube(dim: usize, r: f64) -> Self {
        Aabb { lo: vec![-r; dim], hi: vec![r; dim] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| *v >= l - tol && *v <= h + tol)
    }

    pub fn clamp(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(self.lo.iter().zip(&self.hi)).map(|(v, (l, h))| v.clamp(*l, *h)).collect()
    }

    pub fn diameter(&self) -> f64 {
        dist(&self.lo, &self.hi)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn inflate(&self, margin: f64) -> Aabb {
        Aabb { lo: self.lo.iter().map(|v| v - margin).collect(), hi: self.hi.iter().map(|v| v + margin).collect() }
    }

    /// Scale about the center.
    pub fn scaled(&self, factor: f64) -> Aabb {
        let c = self.center();
        Aabb {
            lo: self.lo.iter().zip(&c).map(|(l, c)| c + factor * (l - c)).collect(),
            hi: self.hi.iter().zip(&c).map(|(h, c)| c + factor * (h - c)).collect(),
        }
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            lo: self.lo.iter().zip(&other.lo).map(|(a, b)| a.min(*b)).collect(),
            hi: self.hi.iter().zip(&other.hi).map(|(a, b)| a.max(*b)).collect(),
        }
    }

    pub fn product(&self, other: &Aabb) -> Aabb {
        Aabb { lo: [self.lo.clone(), other.lo.clone()].concat(), hi: [self.hi.clone(), other.hi.clone()].concat() }
    }

    pub fn support(&self, d: &[f64]) -> f64 {
        d.iter().zip(self.lo.iter().zip(&self.hi)).map(|(d, (l, h))| if *d >= 0.0 { d * h } else { d * l }).sum()
    }

    pub fn sampler(&self, seed: u64) -> BoxSampler {
        BoxSampler::new(self.lo.clone(), self.hi.clone(), seed)
    }
}

/// Declarative shape description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ShapeSpec {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    /// {u : ⟨normal, u⟩ ≤ offset}
    Halfspace {
        normal: Vec<f64>,
        offset: f64,
        #[serde(default)]
        bbox: Option<Aabb>,
    },
    /// {u : A u ≤ c}
    Polytope {
        a: Vec<Vec<f64>>,
        c: Vec<f64>,
        #[serde(default)]
        bbox: Option<Aabb>,
    },
    Points {
        points: Vec<Vec<f64>>,
    },
    Union {
        parts: Vec<ShapeSpec>,
    },
    /// {(y, α) : y ∈ [lo, hi], f(y) ≤ α} for a convex f over the named variables.
    Epigraph {
        f: String,
        vars: Vec<String>,
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
struct Polytope {
    a: Vec<Vec<f64>>,
    c: Vec<f64>,
    anchor: Vec<f64>,
}

#[derive(Debug, Clone)]
struct EpiShape {
    f: Expr,
    fixed: Vec<f64>,
    boxed: Aabb,
}

#[derive(Debug, Clone)]
enum Kind {
    Empty,
    Ball { center: Vec<f64>, radius: f64 },
    Boxed(Aabb),
    Polytope(Polytope),
    Points(Vec<Vec<f64>>),
    Union(Vec<SetOracle>),
    Epigraph(EpiShape),
}

/// Closed set in ℝ^dim with exact membership and nearest-point projection.
#[derive(Debug, Clone)]
pub struct SetOracle {
    kind: Kind,
    dim: usize,
    bbox: Aabb,
    convex: bool,
}

/// Anything that can report the Euclidean distance to a set.
pub trait DistanceOracle: Sync {
    fn dim(&self) -> usize;
    fn distance(&self, x: &[f64]) -> f64;
}

impl DistanceOracle for SetOracle {
    fn dim(&self) -> usize {
        self.dim
    }
    fn distance(&self, x: &[f64]) -> f64 {
        SetOracle::distance(self, x)
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        Err(Error::Dimension { expected, got })
    } else {
        Ok(())
    }
}

/// Minimize a convex function over a box given value and (sub)gradient.
/// Each coordinate step bisects on the sign of the partial derivative,
/// which reaches full precision even across kinks.
fn min_convex_box<F: Fn(&[f64]) -> (f64, Vec<f64>)>(f: F, b: &Aabb, start: Option<&[f64]>) -> (Vec<f64>, f64) {
    let d = b.dim();
    if d == 0 {
        return (Vec::new(), f(&[]).0);
    }
    let mut best = start.map(|p| b.clamp(p)).unwrap_or_else(|| b.center());
    let mut bv = f(&best).0;
    if d == 1 {
        let (t, v) = grid_golden(|t| f(&[t]).0, b.lo[0], b.hi[0], 65, 1e-3 * (b.hi[0] - b.lo[0]).max(1e-300));
        if v < bv {
            best = vec![t];
        }
    } else {
        let s = b.sampler(0x5eed);
        for i in 0..64 * d {
            let p = s.point(i);
            let v = f(&p).0;
            if v < bv {
                bv = v;
                best = p;
            }
        }
    }
    let mut x = best;
    for _ in 0..400 {
        let before = x.clone();
        for i in 0..d {
            let partial = |t: f64| {
                let mut y = x.clone();
                y[i] = t;
                f(&y).1[i]
            };
            let (mut lo, mut hi) = (b.lo[i], b.hi[i]);
            x[i] = if partial(lo) >= 0.0 {
                lo
            } else if partial(hi) <= 0.0 {
                hi
            } else {
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if partial(mid) > 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                0.5 * (lo + hi)
            };
        }
        if dist(&before, &x) <= 1e-15 * (1.0 + norm(&x)) {
            break;
        }
    }
    let v = f(&x).0;
    (x, v)
}

impl Polytope {
    fn feasible(&self, u: &[f64], tol: f64) -> bool {
        self.a.iter().zip(&self.c).all(|(row, c)| dot(row, u) <= c + tol)
    }

    /// Primal active-set method for min ½‖u − p‖² s.t. A u ≤ c.
    fn project(&self, p: &[f64]) -> Vec<f64> {
        if self.feasible(p, 0.0) {
            return p.to_vec();
        }
        let n = p.len();
        let mut u = self.anchor.clone();
        let mut work: Vec<usize> = Vec::new();
        for _ in 0..50 * (self.a.len() + n + 1) {
            let g: Vec<f64> = (0..n).map(|i| p[i] - u[i]).collect();
            let (d, lambda) = if work.is_empty() {
                (g.clone(), Vec::new())
            } else {
                let k = work.len();
                let aw = DMatrix::from_fn(k, n, |r, c| self.a[work[r]][c]);
                let gv = DVector::from_column_slice(&g);
                let m = &aw * aw.transpose();
                let rhs = &aw * &gv;
                match m.lu().solve(&rhs) {
                    Some(l) => {
                        let d = &gv - aw.transpose() * &l;
                        (d.iter().copied().collect::<Vec<_>>(), l.iter().copied().collect::<Vec<_>>())
                    }
                    None => {
                        work.pop();
                        continue;
                    }
                }
            };
            if norm(&d) <= 1e-14 * (1.0 + norm(&g)) {
                let (mut mi, mut mv) = (usize::MAX, -1e-13);
                for (i, &l) in lambda.iter().enumerate() {
                    if l < mv {
                        mv = l;
                        mi = i;
                    }
                }
                if mi == usize::MAX {
                    break;
                }
                work.remove(mi);
                continue;
            }
            let mut alpha = 1.0;
            let mut block = None;
            for i in 0..self.a.len() {
                if work.contains(&i) {
                    continue;
                }
                let ad = dot(&self.a[i], &d);
                if ad > 1e-15 {
                    let slack = (self.c[i] - dot(&self.a[i], &u)).max(0.0);
                    let t = slack / ad;
                    if t < alpha {
                        alpha = t;
                        block = Some(i);
                    }
                }
            }
            for i in 0..n {
                u[i] += alpha * d[i];
            }
            match block {
                Some(b) => work.push(b),
                None => {
                    if lambda.iter().all(|l| *l >= -1e-13) {
                        break;
                    }
                }
            }
        }
        u
    }
}

impl EpiShape {
    fn value(&self, y: &[f64]) -> f64 {
        if self.fixed.is_empty() {
            self.f.eval(y)
        } else {
            let z: Vec<f64> = self.fixed.iter().chain(y).copied().collect();
            self.f.eval(&z)
        }
    }

    fn value_grad(&self, y: &[f64]) -> (f64, Vec<f64>) {
        let k = self.fixed.len();
        if k == 0 {
            self.f.grad(y)
        } else {
            let z: Vec<f64> = self.fixed.iter().chain(y).copied().collect();
            let (v, g) = self.f.grad(&z);
            (v, g[k..].to_vec())
        }
    }

    fn min_on_box(&self) -> (Vec<f64>, f64) {
        min_convex_box(|y| self.value_grad(y), &self.boxed, None)
    }

    fn max_on_box(&self) -> f64 {
        let d = self.boxed.dim();
        let s = self.boxed.sampler(11);
        let mut m = f64::NEG_INFINITY;
        for i in 0..(64 * d.max(1)) {
            m = m.max(self.value(&s.point(i)));
        }
        for mask in 0..(1usize << d.min(10)) {
            let corner: Vec<f64> = (0..d).map(|j| if mask >> j & 1 == 1 { self.boxed.hi[j] } else { self.boxed.lo[j] }).collect();
            m = m.max(self.value(&corner));
        }
        m
    }
}

impl SetOracle {
    pub fn empty(dim: usize) -> Self {
        SetOracle { kind: Kind::Empty, dim, bbox: Aabb::cube(dim, 1.0), convex: true }
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::Invalid(format!("ball radius {radius} must be finite and nonnegative")));
        }
        let dim = center.len();
        let bbox = Aabb { lo: center.iter().map(|c| c - radius).collect(), hi: center.iter().map(|c| c + radius).collect() };
        Ok(SetOracle { kind: Kind::Ball { center, radius }, dim, bbox, convex: true })
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let b = Aabb::new(lo, hi)?;
        Ok(SetOracle { dim: b.dim(), bbox: b.clone(), kind: Kind::Boxed(b), convex: true })
    }

    pub fn polytope(a: Vec<Vec<f64>>, c: Vec<f64>, bbox: Option<Aabb>) -> Result<Self> {
        if a.len() != c.len() {
            return Err(Error::Dimension { expected: a.len(), got: c.len() });
        }
        let dim = bbox.as_ref().map(|b| b.dim()).or_else(|| a.first().map(|r| r.len())).unwrap_or(0);
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for (row, ci) in a.iter().zip(&c) {
            check_dim(dim, row.len())?;
            let n = norm(row);
            if n == 0.0 {
                if *ci < 0.0 {
                    return Err(Error::EmptySet("zero row with negative bound".into()));
                }
                continue;
            }
            rows.push(row.iter().map(|v| v / n).collect::<Vec<_>>());
            rhs.push(ci / n);
        }
        let anchor = match lp_max(&vec![0.0; dim], &rows, &rhs) {
            LpOutcome::Optimal { x, .. } => x,
            LpOutcome::Unbounded => vec![0.0; dim],
            LpOutcome::Infeasible => return Err(Error::EmptySet("polytope constraints are infeasible".into())),
        };
        let region = match bbox {
            Some(b) => b,
            None => {
                let mut lo = vec![0.0; dim];
                let mut hi = vec![0.0; dim];
                for i in 0..dim {
                    let mut e = vec![0.0; dim];
                    e[i] = 1.0;
                    match lp_max(&e, &rows, &rhs) {
                        LpOutcome::Optimal { value, .. } => hi[i] = value,
                        _ => return Err(Error::Unbounded("polytope".into())),
                    }
                    e[i] = -1.0;
                    match lp_max(&e, &rows, &rhs) {
                        LpOutcome::Optimal { value, .. } => lo[i] = -value,
                        _ => return Err(Error::Unbounded("polytope".into())),
                    }
                }
                Aabb { lo, hi }
            }
        };
        Ok(SetOracle { kind: Kind::Polytope(Polytope { a: rows, c: rhs, anchor }), dim, bbox: region, convex: true })
    }

    pub fn points(points: Vec<Vec<f64>>) -> Result<Self> {
        let first = points.first().ok_or_else(|| Error::EmptySet("point list is empty".into()))?;
        let dim = first.len();
        let mut b = Aabb { lo: first.clone(), hi: first.clone() };
        for p in &points {
            check_dim(dim, p.len())?;
            b = b.union(&Aabb { lo: p.clone(), hi: p.clone() });
        }
        let convex = points.iter().all(|p| dist(p, first) == 0.0);
        Ok(SetOracle { kind: Kind::Points(points), dim, bbox: b, convex })
    }

    pub fn union(parts: Vec<SetOracle>) -> Result<Self> {
        let parts: Vec<SetOracle> = parts.into_iter().filter(|p| !p.is_empty()).collect();
        let first = parts.first().ok_or_else(|| Error::EmptySet("union of no sets".into()))?;
        let dim = first.dim;
        let mut b = first.bbox.clone();
        for p in &parts {
            check_dim(dim, p.dim)?;
            b = b.union(&p.bbox);
        }
        let convex = parts.len() == 1 && parts[0].convex;
        Ok(SetOracle { kind: Kind::Union(parts), dim, bbox: b, convex })
    }

    /// Epigraph of `f(fixed, y)` over `y ∈ boxed`.
    pub fn epigraph(f: Expr, fixed: Vec<f64>, boxed: Aabb) -> Result<Self> {
        check_dim(f.arity(), fixed.len() + boxed.dim())?;
        let e = EpiShape { f, fixed, boxed };
        let (_, fmin) = e.min_on_box();
        let fmax = e.max_on_box();
        if !fmin.is_finite() || !fmax.is_finite() {
            return Err(Error::Domain("epigraph function is not finite on its box".into()));
        }
        let dim = e.boxed.dim() + 1;
        let bbox = e.boxed.product(&Aabb { lo: vec![fmin], hi: vec![fmax + 1.0] });
        Ok(SetOracle { kind: Kind::Epigraph(e), dim, bbox, convex: true })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_convex(&self) -> bool {
        self.convex
    }

    pub fn is_empty(&self) -> bool {
        matches!(self.kind, Kind::Empty)
    }

    pub fn bounding_box(&self) -> &Aabb {
        &self.bbox
    }

    pub fn member(&self, p: &[f64]) -> bool {
        self.member_tol(p, TOL)
    }

    pub fn member_tol(&self, p: &[f64], tol: f64) -> bool {
        match &self.kind {
            Kind::Empty => false,
            Kind::Ball { center, radius } => dist(p, center) <= radius + tol,
            Kind::Boxed(b) => b.contains(p, tol),
            Kind::Polytope(poly) => poly.feasible(p, tol),
            Kind::Points(pts) => pts.iter().any(|q| dist(p, q) <= tol),
            Kind::Union(parts) => parts.iter().any(|s| s.member_tol(p, tol)),
            Kind::Epigraph(e) => {
                let (y, a) = p.split_at(self.dim - 1);
                e.boxed.contains(y, tol) && e.value(&e.boxed.clamp(y)) <= a[0] + tol
            }
        }
    }

    /// Nearest point of the set, or `None` for the empty set.
    pub fn try_project(&self, p: &[f64]) -> Option<Vec<f64>> {
        Some(match &self.kind {
            Kind::Empty => return None,
            Kind::Ball { center, radius } => {
                let d = dist(p, center);
                if d <= *radius {
                    p.to_vec()
                } else {
                    center.iter().zip(p).map(|(c, x)| c + (x - c) * radius / d).collect()
                }
            }
            Kind::Boxed(b) => b.clamp(p),
            Kind::Polytope(poly) => poly.project(p),
            Kind::Points(pts) => nearest_lex(pts.iter().cloned(), p),
            Kind::Union(parts) => nearest_lex(parts.iter().filter_map(|s| s.try_project(p)), p),
            Kind::Epigraph(e) => {
                let (y, a) = p.split_at(self.dim - 1);
                let q = a[0];
                if e.boxed.contains(y, 0.0) && e.value(y) <= q {
                    return Some(p.to_vec());
                }
                let obj = |u: &[f64]| {
                    let (fv, fg) = e.value_grad(u);
                    let excess = (fv - q).max(0.0);
                    let v = u.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() + excess * excess;
                    let g = (0..u.len()).map(|i| 2.0 * (u[i] - y[i]) + 2.0 * excess * fg[i]).collect();
                    (v, g)
                };
                let (u, _) = min_convex_box(obj, &e.boxed, Some(y));
                let alpha = e.value(&u).max(q);
                let mut out = u;
                out.push(alpha);
                out
            }
        })
    }

    /// Nearest point of the set. Panics on the empty set.
    pub fn project(&self, p: &[f64]) -> Vec<f64> {
        self.try_project(p).expect("projection onto the empty set")
    }

    /// Euclidean distance; +∞ for the empty set.
    pub fn distance(&self, p: &[f64]) -> f64 {
        match self.try_project(p) {
            Some(q) => dist(p, &q),
            None => f64::INFINITY,
        }
    }

    /// σ(d) = sup over the set of ⟨d, u⟩; −∞ for the empty set.
    pub fn support(&self, d: &[f64]) -> f64 {
        match &self.kind {
            Kind::Empty => f64::NEG_INFINITY,
            Kind::Ball { center, radius } => dot(d, center) + radius * norm(d),
            Kind::Boxed(b) => b.support(d),
            Kind::Polytope(poly) => match lp_max(d, &poly.a, &poly.c) {
                LpOutcome::Optimal { value, .. } => value,
                LpOutcome::Unbounded => f64::INFINITY,
                LpOutcome::Infeasible => f64::NEG_INFINITY,
            },
            Kind::Points(pts) => pts.iter().map(|p| dot(d, p)).fold(f64::NEG_INFINITY, f64::max),
            Kind::Union(parts) => parts.iter().map(|s| s.support(d)).fold(f64::NEG_INFINITY, f64::max),
            Kind::Epigraph(e) => {
                let (dy, da) = d.split_at(self.dim - 1);
                let da = da[0];
                if da > 0.0 {
                    f64::INFINITY
                } else if da == 0.0 {
                    e.boxed.support(dy)
                } else {
                    let obj = |y: &[f64]| {
                        let (fv, fg) = e.value_grad(y);
                        (-dot(dy, y) - da * fv, (0..y.len()).map(|i| -dy[i] - da * fg[i]).collect())
                    };
                    let (_, v) = min_convex_box(obj, &e.boxed, None);
                    -v
                }
            }
        }
    }

    /// Deterministic sample of points in the set: low-discrepancy points of
    /// the (slightly inflated) bounding box, projected onto the set.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        match &self.kind {
            Kind::Empty => Vec::new(),
            Kind::Points(pts) => (0..n).map(|i| pts[i % pts.len()].clone()).collect(),
            Kind::Ball { center, radius } => {
                let s = BallSampler::new(self.dim, seed);
                (0..n)
                    .map(|i| {
                        let d = if i % 4 == 0 { s.on_sphere(i) } else { s.in_ball(i) };
                        center.iter().zip(&d).map(|(c, v)| c + radius * v).collect()
                    })
                    .collect()
            }
            _ => {
                let b = self.bbox.scaled(1.25);
                let s = b.sampler(seed);
                (0..n).map(|i| self.project(&s.point(i))).collect()
            }
        }
    }
}

fn nearest_lex<I: Iterator<Item = Vec<f64>>>(cands: I, p: &[f64]) -> Vec<f64> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for q in cands {
        let d = dist(p, &q);
        best = match best {
            None => Some((d, q)),
            Some((bd, bq)) => {
                let tie = (d - bd).abs() <= 1e-12 * (1.0 + bd);
                if (tie && lex_cmp(&q, &bq).is_lt()) || (!tie && d < bd) {
                    Some((d, q))
                } else {
                    Some((bd, bq))
                }
            }
        };
    }
    best.expect("nearest point over an empty candidate list").1
}

/// Build an oracle from a spec.
pub fn make_shape_oracle(spec: &ShapeSpec) -> Result<SetOracle> {
    match spec {
        ShapeSpec::Ball { center, radius } => SetOracle::ball(center.clone(), *radius),
        ShapeSpec::Box { lo, hi } => SetOracle::boxed(lo.clone(), hi.clone()),
        ShapeSpec::Halfspace { normal, offset, bbox } => SetOracle::polytope(vec![normal.clone()], vec![*offset], bbox.clone()),
        ShapeSpec::Polytope { a, c, bbox } => SetOracle::polytope(a.clone(), c.clone(), bbox.clone()),
        ShapeSpec::Points { points } => SetOracle::points(points.clone()),
        ShapeSpec::Union { parts } => SetOracle::union(parts.iter().map(make_shape_oracle).collect::<Result<Vec<_>>>()?),
        ShapeSpec::Epigraph { f, vars, lo, hi } => {
            let names: Vec<&str> = vars.iter().map(String::as_str).collect();
            let e = Expr::parse(f, &names)?;
            SetOracle::epigraph(e, Vec::new(), Aabb::new(lo.clone(), hi.clone())?)
        }
    }
}

/// Euclidean distance to an oracle (free function form).
pub fn distance(oracle: &SetOracle, x: &[f64]) -> f64 {
    oracle.distance(x)
}

/// Declarative multifunction family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PmfKind {
    /// M(x) = {y : A y ≤ c + B x}
    AffinePolytope { a: Vec<Vec<f64>>, c: Vec<f64>, b: Vec<Vec<f64>> },
    /// M(x) = ball(h(x), r(x))
    MovingBall { x_vars: Vec<String>, center: Vec<String>, radius: String },
    /// M(x) = base + h(x)
    Translated { x_vars: Vec<String>, base: ShapeSpec, offset: Vec<String> },
    /// M(x) = {(y, α) : y ∈ [y_lo, y_hi], f(x, y) ≤ α}
    Epigraph { x_vars: Vec<String>, y_vars: Vec<String>, f: String, y_lo: Vec<f64>, y_hi: Vec<f64> },
    /// M(x) = S for every x
    Constant { set: ShapeSpec },
    /// M(x) = ∅ for every x
    Empty { value_dim: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmfSpec {
    #[serde(flatten)]
    pub kind: PmfKind,
    /// Parameter region.
    pub domain: Aabb,
    /// Value region used for sampling; estimated from the values if absent.
    #[serde(default)]
    pub value_box: Option<Aabb>,
}

#[derive(Debug, Clone)]
enum Family {
    Affine { a: Vec<Vec<f64>>, c: Vec<f64>, b: Vec<Vec<f64>> },
    MovingBall { center: Vec<Expr>, radius: Expr },
    Translated { base: SetOracle, offset: Vec<Expr> },
    Epigraph { f: Expr, boxed: Aabb },
    Constant(SetOracle),
    Empty,
}

/// Parametric multifunction x ↦ M(x) ⊂ ℝ^m over x ∈ ℝ^s.
#[derive(Debug, Clone)]
pub struct ParamMultifunction {
    pub param_dim: usize,
    pub value_dim: usize,
    pub domain: Aabb,
    pub value_box: Aabb,
    pub values_convex: bool,
    family: Family,
}

fn parse_all(srcs: &[String], vars: &[String]) -> Result<Vec<Expr>> {
    let names: Vec<&str> = vars.iter().map(String::as_str).collect();
    srcs.iter().map(|s| Expr::parse(s, &names)).collect()
}

impl ParamMultifunction {
    /// M(x) as a set oracle.
    pub fn value_set(&self, x: &[f64]) -> SetOracle {
        let m = self.value_dim;
        match &self.family {
            Family::Empty => SetOracle::empty(m),
            Family::Constant(s) => s.clone(),
            Family::Affine { a, c, b } => {
                let rhs: Vec<f64> = c.iter().zip(b).map(|(ci, bi)| ci + dot(bi, x)).collect();
                SetOracle::polytope(a.clone(), rhs, Some(self.value_box.clone())).unwrap_or_else(|_| SetOracle::empty(m))
            }
            Family::MovingBall { center, radius } => {
                let c = center.iter().map(|e| e.eval(x)).collect();
                let r = radius.eval(x).max(0.0);
                SetOracle::ball(c, r).unwrap_or_else(|_| SetOracle::empty(m))
            }
            Family::Translated { base, offset } => {
                let h: Vec<f64> = offset.iter().map(|e| e.eval(x)).collect();
                translate(base, &h)
            }
            Family::Epigraph { f, boxed } => {
                SetOracle::epigraph(f.clone(), x.to_vec(), boxed.clone()).unwrap_or_else(|_| SetOracle::empty(m))
            }
        }
    }

    /// σ_{M(x)}(d).
    pub fn support(&self, x: &[f64], d: &[f64]) -> f64 {
        match &self.family {
            Family::Empty => f64::NEG_INFINITY,
            Family::Constant(s) => s.support(d),
            Family::Affine { a, c, b } => {
                let rhs: Vec<f64> = c.iter().zip(b).map(|(ci, bi)| ci + dot(bi, x)).collect();
                match lp_max(d, a, &rhs) {
                    LpOutcome::Optimal { value, .. } => value,
                    LpOutcome::Unbounded => f64::INFINITY,
                    LpOutcome::Infeasible => f64::NEG_INFINITY,
                }
            }
            Family::MovingBall { center, radius } => {
                let c: Vec<f64> = center.iter().map(|e| e.eval(x)).collect();
                let r = radius.eval(x);
                if r < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    dot(d, &c) + r * norm(d)
                }
            }
            Family::Translated { base, offset } => {
                let h: Vec<f64> = offset.iter().map(|e| e.eval(x)).collect();
                base.support(d) + dot(d, &h)
            }
            Family::Epigraph { .. } => self.value_set(x).support(d),
        }
    }

    pub fn graph_member(&self, x: &[f64], y: &[f64]) -> bool {
        self.value_set(x).member(y)
    }

    /// Vertical distance d(y, M(x)).
    pub fn value_distance(&self, x: &[f64], y: &[f64]) -> f64 {
        self.value_set(x).distance(y)
    }

    /// Euclidean distance from (x, y) to gph M over the domain. The vertical
    /// distance bounds the search radius in x.
    pub fn graph_distance(&self, x: &[f64], y: &[f64]) -> f64 {
        let v = self.value_distance(x, y);
        if v == 0.0 || !v.is_finite() || self.param_dim == 0 {
            return v;
        }
        let g = |xp: &[f64]| {
            if !self.domain.contains(xp, 0.0) {
                return f64::INFINITY;
            }
            let dy = self.value_distance(xp, y);
            crate::linalg::dist(xp, x).powi(2) + dy * dy
        };
        let (d2, _) = crate::optim::ball_min(&g, x, v);
        d2.min(v * v).sqrt()
    }

    /// Region of (x, y) space used for sampling.
    pub fn graph_box(&self) -> Aabb {
        self.domain.product(&self.value_box)
    }

    /// Deterministic graph sample: parameters from the domain, values
    /// projected from the value box onto M(x).
    pub fn sample_graph(&self, n: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
        let h = Halton::new(self.param_dim + self.value_dim, seed);
        let vb = self.value_box.scaled(1.25);
        let mut out = Vec::with_capacity(n);
        let mut i = 0;
        while out.len() < n && i < 4 * n + 16 {
            let u = h.unit(i);
            i += 1;
            let x: Vec<f64> = (0..self.param_dim).map(|j| self.domain.lo[j] + u[j] * (self.domain.hi[j] - self.domain.lo[j])).collect();
            let y0: Vec<f64> = (0..self.value_dim).map(|j| vb.lo[j] + u[self.param_dim + j] * (vb.hi[j] - vb.lo[j])).collect();
            if let Some(y) = self.value_set(&x).try_project(&y0) {
                out.push((x, y));
            }
        }
        out
    }
}

fn translate(base: &SetOracle, h: &[f64]) -> SetOracle {
    let shift = |v: &[f64]| -> Vec<f64> { v.iter().zip(h).map(|(a, b)| a + b).collect() };
    let kind = match &base.kind {
        Kind::Empty => Kind::Empty,
        Kind::Ball { center, radius } => Kind::Ball { center: shift(center), radius: *radius },
        Kind::Boxed(b) => Kind::Boxed(Aabb { lo: shift(&b.lo), hi: shift(&b.hi) }),
        Kind::Polytope(p) => Kind::Polytope(Polytope {
            a: p.a.clone(),
            c: p.c.iter().zip(&p.a).map(|(c, a)| c + dot(a, h)).collect(),
            anchor: shift(&p.anchor),
        }),
        Kind::Points(pts) => Kind::Points(pts.iter().map(|p| shift(p)).collect()),
        Kind::Union(parts) => Kind::Union(parts.iter().map(|s| translate(s, h)).collect()),
        Kind::Epigraph(_) => {
            return base.clone();
        }
    };
    SetOracle { kind, dim: base.dim, bbox: Aabb { lo: shift(&base.bbox.lo), hi: shift(&base.bbox.hi) }, convex: base.convex }
}

/// Build a multifunction; with `require_convex`, nonconvex values are an error.
pub fn make_param_multifunction(spec: &PmfSpec, require_convex: bool) -> Result<ParamMultifunction> {
    let s = spec.domain.dim();
    let (family, m, convex) = match &spec.kind {
        PmfKind::AffinePolytope { a, c, b } => {
            if a.len() != c.len() || a.len() != b.len() {
                return Err(Error::Dimension { expected: a.len(), got: c.len().min(b.len()) });
            }
            let m = a.first().map(|r| r.len()).ok_or_else(|| Error::Invalid("affine polytope without rows".into()))?;
            for (ra, rb) in a.iter().zip(b) {
                check_dim(m, ra.len())?;
                check_dim(s, rb.len())?;
            }
            (Family::Affine { a: a.clone(), c: c.clone(), b: b.clone() }, m, true)
        }
        PmfKind::MovingBall { x_vars, center, radius } => {
            check_dim(s, x_vars.len())?;
            let center = parse_all(center, x_vars)?;
            let radius = parse_all(std::slice::from_ref(radius), x_vars)?.remove(0);
            let m = center.len();
            (Family::MovingBall { center, radius }, m, true)
        }
        PmfKind::Translated { x_vars, base, offset } => {
            check_dim(s, x_vars.len())?;
            let base = make_shape_oracle(base)?;
            let offset = parse_all(offset, x_vars)?;
            check_dim(base.dim(), offset.len())?;
            let (m, c) = (base.dim(), base.is_convex());
            (Family::Translated { base, offset }, m, c)
        }
        PmfKind::Epigraph { x_vars, y_vars, f, y_lo, y_hi } => {
            check_dim(s, x_vars.len())?;
            let names: Vec<&str> = x_vars.iter().chain(y_vars).map(String::as_str).collect();
            let f = Expr::parse(f, &names)?;
            let boxed = Aabb::new(y_lo.clone(), y_hi.clone())?;
            check_dim(y_vars.len(), boxed.dim())?;
            let m = boxed.dim() + 1;
            (Family::Epigraph { f, boxed }, m, true)
        }
        PmfKind::Constant { set } => {
            let o = make_shape_oracle(set)?;
            let (m, c) = (o.dim(), o.is_convex());
            (Family::Constant(o), m, c)
        }
        PmfKind::Empty { value_dim } => (Family::Empty, *value_dim, true),
    };
    if require_convex && !convex {
        return Err(Error::Nonconvex("multifunction values".into()));
    }
    let mut pmf = ParamMultifunction {
        param_dim: s,
        value_dim: m,
        domain: spec.domain.clone(),
        value_box: spec.value_box.clone().unwrap_or_else(|| Aabb::cube(m, 1.0)),
        values_convex: convex,
        family,
    };
    if let Some(vb) = &spec.value_box {
        check_dim(m, vb.dim())?;
    } else {
        pmf.value_box = estimate_value_box(&pmf);
    }
    Ok(pmf)
}

fn estimate_value_box(pmf: &ParamMultifunction) -> Aabb {
    let m = pmf.value_dim;
    let s = pmf.domain.sampler(3);
    let mut corners: Vec<Vec<f64>> = (0..64).map(|i| s.point(i)).collect();
    corners.push(pmf.domain.lo.clone());
    corners.push(pmf.domain.hi.clone());
    let mut acc: Option<Aabb> = None;
    for x in corners {
        let v = match &pmf.family {
            Family::Affine { .. } => {
                let set = pmf.value_set(&x);
                if set.is_empty() {
                    continue;
                }
                // LP bounds where finite, unit spread otherwise.
                let mut lo = vec![0.0; m];
                let mut hi = vec![0.0; m];
                let anchor = set.project(&vec![0.0; m]);
                for i in 0..m {
                    let mut e = vec![0.0; m];
                    e[i] = 1.0;
                    let up = pmf.support(&x, &e);
                    e[i] = -1.0;
                    let dn = -pmf.support(&x, &e);
                    hi[i] = if up.is_finite() { up } else { anchor[i] + 1.0 };
                    lo[i] = if dn.is_finite() { dn } else { anchor[i] - 1.0 };
                }
                Aabb { lo, hi }
            }
            _ => {
                let set = pmf.value_set(&x);
                if set.is_empty() {
                    continue;
                }
                set.bounding_box().clone()
            }
        };
        acc = Some(match acc {
            None => v,
            Some(a) => a.union(&v),
        });
    }
    acc.map(|a| a.inflate(1.0)).unwrap_or_else(|| Aabb::cube(m, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball2() -> SetOracle {
        SetOracle::ball(vec![0.0, 0.0], 1.0).unwrap()
    }

    #[test]
    fn ball_projection() {
        let b = ball2();
        assert_eq!(b.project(&[2.0, 0.0]), vec![1.0, 0.0]);
        assert_eq!(b.distance(&[2.0, 0.0]), 1.0);
    }

    #[test]
    fn box_membership_and_distance() {
        let b = SetOracle::boxed(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert!(b.member(&[0.5, 0.5]));
        assert!((b.distance(&[2.0, 2.0]) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn union_tie_breaks_low() {
        let u = make_shape_oracle(&ShapeSpec::Union {
            parts: vec![ShapeSpec::Box { lo: vec![-2.0], hi: vec![-1.0] }, ShapeSpec::Box { lo: vec![1.0], hi: vec![2.0] }],
        })
        .unwrap();
        assert_eq!(u.project(&[0.0]), vec![-1.0]);
        assert!(!u.is_convex());
        let grid_min =
            (0..=4000).map(|i| -2.0 + i as f64 * 1e-3).filter(|t| u.member(&[*t])).map(|t| t.abs()).fold(f64::INFINITY, f64::min);
        assert!((u.distance(&[0.0]) - grid_min).abs() < 1e-12);
    }

    #[test]
    fn two_point_distance() {
        let p = SetOracle::points(vec![vec![-1.0], vec![1.0]]).unwrap();
        assert_eq!(p.distance(&[0.25]), 0.75);
    }

    #[test]
    fn polytope_projection_matches_box() {
        let a = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        let p = SetOracle::polytope(a, vec![1.0, 0.0, 1.0, 0.0], None).unwrap();
        let b = SetOracle::boxed(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(p.bounding_box(), b.bounding_box());
        for q in [[2.0, 2.0], [0.5, -3.0], [-1.0, 0.3], [0.2, 0.7], [3.0, 0.5]] {
            let x = p.project(&q);
            let y = b.project(&q);
            assert!(dist(&x, &y) < 1e-12, "{q:?}: {x:?} vs {y:?}");
        }
    }

    #[test]
    fn triangle_projection_against_brute_force() {
        let a = vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, 1.0]];
        let t = SetOracle::polytope(a, vec![0.0, 0.0, 1.0], None).unwrap();
        let s = BoxSampler::new(vec![-2.0, -2.0], vec![3.0, 3.0], 1);
        for i in 0..50 {
            let q = s.point(i);
            let x = t.project(&q);
            assert!(t.member(&x));
            let mut best = f64::INFINITY;
            for a in 0..=200 {
                for b in 0..=(200 - a) {
                    best = best.min(dist(&q, &[a as f64 / 200.0, b as f64 / 200.0]));
                }
            }
            assert!(dist(&q, &x) <= best + 1e-12);
            assert!(dist(&q, &x) >= best - 6e-3);
        }
    }

    #[test]
    fn infeasible_and_unbounded_polytopes() {
        assert!(matches!(SetOracle::polytope(vec![vec![1.0], vec![-1.0]], vec![0.0, -1.0], None), Err(Error::EmptySet(_))));
        assert!(matches!(SetOracle::polytope(vec![vec![1.0]], vec![0.0], None), Err(Error::Unbounded(_))));
        let h = SetOracle::polytope(vec![vec![1.0]], vec![0.0], Some(Aabb::cube(1, 2.0))).unwrap();
        assert_eq!(h.project(&[1.0]), vec![0.0]);
        assert_eq!(h.support(&[1.0]), 0.0);
        assert_eq!(h.support(&[-1.0]), f64::INFINITY);
    }

    #[test]
    fn epigraph_projection_and_support() {
        let f = Expr::parse("abs(y)", &["y"]).unwrap();
        let e = SetOracle::epigraph(f, vec![], Aabb::cube(1, 2.0)).unwrap();
        assert!(e.member(&[0.5, 0.6]));
        assert!(!e.member(&[0.5, 0.4]));
        let p = e.project(&[0.0, -1.0]);
        assert!(dist(&p, &[0.0, 0.0]) < 1e-9, "{p:?}");
        let p = e.project(&[1.0, 0.0]);
        assert!(dist(&p, &[0.5, 0.5]) < 1e-9, "{p:?}");
        assert!(e.support(&[0.0, -1.0]).abs() < 1e-12);
        assert_eq!(e.support(&[0.0, 1.0]), f64::INFINITY);
    }

    #[test]
    fn multifunction_examples() {
        let halfline_up = PmfSpec {
            kind: PmfKind::Translated {
                x_vars: vec!["x".into()],
                base: ShapeSpec::Halfspace { normal: vec![-1.0], offset: 0.0, bbox: Some(Aabb::cube(1, 2.0)) },
                offset: vec!["x".into()],
            },
            domain: Aabb::cube(1, 2.0),
            value_box: None,
        };
        let m = make_param_multifunction(&halfline_up, true).unwrap();
        assert_eq!(m.support(&[0.0], &[-1.0]), 0.0);
        let sq = PmfSpec {
            kind: PmfKind::Translated {
                x_vars: vec!["x".into()],
                base: ShapeSpec::Halfspace { normal: vec![-1.0], offset: 0.0, bbox: Some(Aabb::cube(1, 2.0)) },
                offset: vec!["x^2".into()],
            },
            domain: Aabb::cube(1, 2.0),
            value_box: None,
        };
        let m = make_param_multifunction(&sq, true).unwrap();
        assert!(!m.value_set(&[2.0]).member(&[3.0]));
        assert!(m.value_set(&[2.0]).member(&[4.0]));

        let epi = PmfSpec {
            kind: PmfKind::Epigraph {
                x_vars: vec!["x".into()],
                y_vars: vec!["y".into()],
                f: "abs(y - x)".into(),
                y_lo: vec![-2.0],
                y_hi: vec![2.0],
            },
            domain: Aabb::cube(1, 1.0),
            value_box: None,
        };
        let m = make_param_multifunction(&epi, true).unwrap();
        assert!(m.support(&[0.0], &[0.0, -1.0]).abs() < 1e-12);
    }

    #[test]
    fn nonconvex_values_rejected_when_required() {
        let spec = PmfSpec {
            kind: PmfKind::Constant { set: ShapeSpec::Points { points: vec![vec![-1.0], vec![1.0]] } },
            domain: Aabb::cube(1, 1.0),
            value_box: None,
        };
        assert!(matches!(make_param_multifunction(&spec, true), Err(Error::Nonconvex(_))));
        assert!(make_param_multifunction(&spec, false).is_ok());
    }

    #[test]
    fn affine_polytope_support() {
        // M(x) = {y : y ≥ x, y ≤ x + 1}
        let spec = PmfSpec {
            kind: PmfKind::AffinePolytope { a: vec![vec![-1.0], vec![1.0]], c: vec![0.0, 1.0], b: vec![vec![-1.0], vec![1.0]] },
            domain: Aabb::cube(1, 1.0),
            value_box: None,
        };
        let m = make_param_multifunction(&spec, true).unwrap();
        assert!((m.support(&[0.5], &[1.0]) - 1.5).abs() < 1e-9);
        assert!((m.support(&[0.5], &[-1.0]) + 0.5).abs() < 1e-9);
        assert!(m.value_set(&[0.5]).member(&[1.0]));
        assert!(m.value_box.lo[0] <= -1.0 && m.value_box.hi[0] >= 2.0);
    }
}
