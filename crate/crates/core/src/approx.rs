//! Sublevel approximants M^k(x) = {z : φ(x, z) ≤ ε_k}, the monotone smooth
//! integrands f^k read off epigraph representations, and Moreau envelopes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::expr::Expr;
use crate::linalg::{axpy, dist, norm, scale};
use crate::metrics::{dbar, epi_dbar, Dbar, MetricConfig};
use crate::optim::{coordinate_golden, golden};
use crate::oracles::{Aabb, DistanceOracle, SetOracle};
use crate::sampling::directions;
use crate::series::SeriesRep;

/// Strictly decreasing positive levels ε₁ > ε₂ > …, stored as ln ε_k so
/// that deep levels do not underflow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleSpec", into = "ScheduleSpec")]
pub struct LevelSchedule {
    ln_eps: Vec<f64>,
}

/// Either an explicit list or the geometric rule ε_k = ε₁ r^{k−1}.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScheduleSpec {
    Geometric { eps1: f64, ratio: f64, steps: usize },
    LnGeometric { eps1: f64, ln_ratio: f64, steps: usize },
    Iterated { eps1: f64, power: f64, steps: usize },
    LnList { ln_eps: Vec<f64> },
    List { eps: Vec<f64> },
}

impl TryFrom<ScheduleSpec> for LevelSchedule {
    type Error = Error;
    fn try_from(s: ScheduleSpec) -> Result<Self> {
        match s {
            ScheduleSpec::Geometric { eps1, ratio, steps } => LevelSchedule::geometric(eps1, ratio, steps),
            ScheduleSpec::LnGeometric { eps1, ln_ratio, steps } => LevelSchedule::ln_geometric(eps1, ln_ratio, steps),
            ScheduleSpec::Iterated { eps1, power, steps } => LevelSchedule::iterated(eps1, power, steps),
            ScheduleSpec::LnList { ln_eps } => LevelSchedule::from_ln(ln_eps),
            ScheduleSpec::List { eps } => LevelSchedule::from_ln(eps.iter().map(|e| e.ln()).collect()),
        }
    }
}

impl From<LevelSchedule> for ScheduleSpec {
    fn from(s: LevelSchedule) -> Self {
        ScheduleSpec::LnList { ln_eps: s.ln_eps }
    }
}

/// The default schedule is ε_k = ε₁^{q^{k−1}} with ε₁ = 0.1 (1 + b)² and
/// q = DEFAULT_POWER. A ball factor of radius r is of order e^{−2ζ/r²}, so
/// level k resolves cuts down to r ~ (2ζ / |ln ε_k|)^{1/2}, shrinking by √q
/// per level.
pub const DEFAULT_POWER: f64 = 7.5;
pub const DEFAULT_STEPS: usize = 10;

impl LevelSchedule {
    pub fn from_ln(ln_eps: Vec<f64>) -> Result<Self> {
        if ln_eps.is_empty() {
            return Err(Error::Invalid("empty level schedule".into()));
        }
        if ln_eps.iter().any(|l| !(l.is_finite())) {
            return Err(Error::Invalid("levels must be positive and finite".into()));
        }
        if ln_eps.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Invalid("levels must decrease strictly".into()));
        }
        Ok(LevelSchedule { ln_eps })
    }

    pub fn geometric(eps1: f64, ratio: f64, steps: usize) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::Invalid(format!("ratio = {ratio} must lie in (0, 1)")));
        }
        Self::ln_geometric(eps1, ratio.ln(), steps)
    }

    /// ε_k = ε₁ r^{k−1} with r given by its logarithm, for ratios below the
    /// smallest positive double.
    pub fn ln_geometric(eps1: f64, ln_ratio: f64, steps: usize) -> Result<Self> {
        if !(eps1 > 0.0 && eps1.is_finite()) {
            return Err(Error::Invalid(format!("eps1 = {eps1} must be positive")));
        }
        if !(ln_ratio < 0.0 && ln_ratio.is_finite()) {
            return Err(Error::Invalid(format!("ln ratio = {ln_ratio} must be negative")));
        }
        Self::from_ln((0..steps).map(|k| eps1.ln() + k as f64 * ln_ratio).collect())
    }

    /// ε_k = ε₁^{q^{k−1}}, ln ε_k = q^{k−1} ln ε₁, for ε₁ < 1 and q > 1.
    pub fn iterated(eps1: f64, power: f64, steps: usize) -> Result<Self> {
        if !(eps1 > 0.0 && eps1 < 1.0) {
            return Err(Error::Invalid(format!("eps1 = {eps1} must lie in (0, 1)")));
        }
        if !(power > 1.0 && power.is_finite()) {
            return Err(Error::Invalid(format!("power = {power} must exceed 1")));
        }
        Self::from_ln((0..steps).map(|k| eps1.ln() * power.powi(k as i32)).collect())
    }

    /// Default levels for a bump with offset b.
    pub fn default_for(offset_b: f64) -> Self {
        Self::iterated(0.1 * (1.0 + offset_b).powi(2), DEFAULT_POWER, DEFAULT_STEPS).expect("valid default schedule")
    }

    pub fn len(&self) -> usize {
        self.ln_eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ln_eps.is_empty()
    }

    pub fn ln_eps(&self) -> &[f64] {
        &self.ln_eps
    }

    /// ε_k; may underflow to 0 for very deep levels.
    pub fn eps(&self) -> Vec<f64> {
        self.ln_eps.iter().map(|l| l.exp()).collect()
    }
}

/// The sublevel multifunction M(x) = {z : φ(x, z) ≤ ε}.
#[derive(Debug, Clone, Copy)]
pub struct LevelSetApprox<'a> {
    pub rep: &'a SeriesRep,
    pub ln_eps: f64,
    /// Largest distance searched along a ray.
    pub search_range: f64,
}

impl LevelSetApprox<'_> {
    /// Dimension of the sections: the value space, or the parameter space
    /// for reps of closed sets built from ball cuts.
    pub fn section_dim(&self) -> usize {
        if self.rep.m > 0 {
            self.rep.m
        } else {
            self.rep.s
        }
    }

    fn ln_phi(&self, x: &[f64], z: &[f64]) -> f64 {
        if self.rep.m > 0 {
            self.rep.ln_eval(x, z)
        } else {
            self.rep.ln_eval(z, &[])
        }
    }

    /// (ln φ, ∇_z ln φ) over the section variable.
    fn ln_phi_grad(&self, x: &[f64], z: &[f64]) -> (f64, Vec<f64>) {
        if self.rep.m > 0 {
            let (l, g) = self.rep.ln_grad(x, z);
            (l, g[self.rep.s..].to_vec())
        } else {
            self.rep.ln_grad(z, &[])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub z: Vec<f64>,
    pub t: f64,
    /// ln φ(x, z) − ln ε
    pub ln_residual: f64,
    pub grad_y: Vec<f64>,
    /// ln ‖∇_y φ(x, z)‖, finite when the gradient is nonzero.
    pub ln_grad_norm: f64,
}

impl BoundaryPoint {
    pub fn grad_norm(&self) -> f64 {
        self.ln_grad_norm.exp()
    }
}

impl<'a> LevelSetApprox<'a> {
    pub fn new(rep: &'a SeriesRep, ln_eps: f64) -> Self {
        LevelSetApprox { rep, ln_eps, search_range: 1e3 }
    }

    pub fn eps(&self) -> f64 {
        self.ln_eps.exp()
    }

    /// φ(x, z) ≤ ε; `x` is ignored for reps without a value block.
    pub fn member(&self, x: &[f64], z: &[f64]) -> bool {
        self.ln_phi(x, z) <= self.ln_eps
    }

    /// Crossing of {φ(x, ·) = ε} along z₀ + t d, t > 0, by bisection on ln φ.
    pub fn boundary_point(&self, x: &[f64], d: &[f64], z0: &[f64]) -> Result<BoundaryPoint> {
        let dn = norm(d);
        if !(dn > 0.0) {
            return Err(Error::Invalid("zero ray direction".into()));
        }
        let m = self.section_dim();
        if d.len() != m || z0.len() != m {
            return Err(Error::Dimension { expected: m, got: d.len().min(z0.len()) });
        }
        let g = |t: f64| self.ln_phi(x, &axpy(z0, t, d)) - self.ln_eps;
        if !(g(0.0) < 0.0) {
            return Err(Error::Invalid("ray origin is not interior to the level set".into()));
        }
        let mut lo = 0.0;
        let mut hi = 1.0 / (64.0 * dn);
        let mut ghi = g(hi);
        while !(ghi > 0.0) {
            lo = hi;
            hi *= 2.0;
            if hi * dn > self.search_range {
                return Err(Error::UnboundedDirection(hi * dn));
            }
            ghi = g(hi);
        }
        let mut t = lo;
        let mut res = g(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let v = g(mid);
            if v > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if v.abs() <= 1e-10 {
                t = mid;
                res = v;
                break;
            }
            t = lo;
            res = g(lo);
        }
        let z = axpy(z0, t, d);
        let (lnphi, gy_ln) = self.ln_phi_grad(x, &z);
        let lgn = lnphi + norm(&gy_ln).ln();
        let grad_y = scale(&gy_ln, lnphi.exp());
        Ok(BoundaryPoint { z, t, ln_residual: res, grad_y, ln_grad_norm: lgn })
    }

    /// Distance oracle for the cross-section M(x), tabulated from rays out of
    /// an interior point `z0`.
    pub fn cross_section(&self, x: &[f64], z0: &[f64], n_rays: usize, exec: Exec) -> Result<SublevelDistance<'a>> {
        SublevelDistance::build(*self, x, z0, n_rays, exec)
    }
}

/// Distance to a convex cross-section {z : φ(x, z) ≤ ε}. In one dimension the
/// section is an interval; in two it is approximated by the inscribed polygon
/// through boundary points on evenly spaced rays; in higher dimensions by the
/// nearest tabulated boundary point refined by a local search over rays.
pub struct SublevelDistance<'a> {
    ls: LevelSetApprox<'a>,
    x: Vec<f64>,
    z0: Vec<f64>,
    shape: Section,
    /// Rays that left the search range; their vertices sit at the range.
    pub truncated: usize,
}

enum Section {
    Interval(f64, f64),
    Polygon(Vec<[f64; 2]>),
    Cloud(Vec<(Vec<f64>, Vec<f64>)>),
}

impl<'a> SublevelDistance<'a> {
    fn build(ls: LevelSetApprox<'a>, x: &[f64], z0: &[f64], n_rays: usize, exec: Exec) -> Result<Self> {
        let m = ls.section_dim();
        let mut truncated = 0;
        let ray = |d: &[f64]| -> Result<(Vec<f64>, bool)> {
            match ls.boundary_point(x, d, z0) {
                Ok(b) => Ok((b.z, false)),
                Err(Error::UnboundedDirection(_)) => Ok((axpy(z0, ls.search_range / norm(d), d), true)),
                Err(e) => Err(e),
            }
        };
        let shape = match m {
            0 => return Err(Error::Unsupported("sublevel distance in dimension 0".into())),
            1 => {
                let (hi, th) = ray(&[1.0])?;
                let (lo, tl) = ray(&[-1.0])?;
                let hi = if th { f64::INFINITY } else { hi[0] };
                let lo = if tl { f64::NEG_INFINITY } else { lo[0] };
                truncated += th as usize + tl as usize;
                Section::Interval(lo, hi)
            }
            _ => {
                let dirs = directions(m, n_rays.max(16), 11);
                let pts = exec.map_slice(&dirs, |d| {
                    ls.boundary_point(x, d, z0).map(|b| (b.z, false)).or_else(|e| match e {
                        Error::UnboundedDirection(_) => Ok((axpy(z0, ls.search_range, d), true)),
                        e => Err(e),
                    })
                });
                let mut verts = Vec::with_capacity(pts.len());
                for p in pts {
                    let (z, t) = p?;
                    truncated += t as usize;
                    verts.push(z);
                }
                if m == 2 {
                    Section::Polygon(verts.iter().map(|v| [v[0], v[1]]).collect())
                } else {
                    Section::Cloud(dirs.into_iter().zip(verts).collect())
                }
            }
        };
        Ok(SublevelDistance { ls, x: x.to_vec(), z0: z0.to_vec(), shape, truncated })
    }

    fn refine_cloud(&self, p: &[f64], d0: &[f64], best: f64) -> f64 {
        let m = d0.len();
        let eval = |d: &[f64]| match self.ls.boundary_point(&self.x, d, &self.z0) {
            Ok(b) => dist(&b.z, p),
            Err(_) => f64::INFINITY,
        };
        let mut d = d0.to_vec();
        let mut fd = best;
        let mut step = 0.05;
        for _ in 0..40 {
            let mut improved = false;
            for i in 0..m {
                for s in [step, -step] {
                    let mut c = d.clone();
                    c[i] += s;
                    let c = scale(&c, 1.0 / norm(&c));
                    let v = eval(&c);
                    if v < fd {
                        fd = v;
                        d = c;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
                if step < 1e-6 {
                    break;
                }
            }
        }
        fd
    }
}

fn point_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let l2 = d[0] * d[0] + d[1] * d[1];
    let t = if l2 > 0.0 { (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0) } else { 0.0 };
    ((p[0] - a[0] - t * d[0]).powi(2) + (p[1] - a[1] - t * d[1]).powi(2)).sqrt()
}

impl DistanceOracle for SublevelDistance<'_> {
    fn dim(&self) -> usize {
        self.ls.section_dim()
    }

    fn distance(&self, p: &[f64]) -> f64 {
        if self.ls.member(&self.x, p) {
            return 0.0;
        }
        match &self.shape {
            Section::Interval(lo, hi) => (lo - p[0]).max(p[0] - hi).max(0.0),
            Section::Polygon(v) => {
                let q = [p[0], p[1]];
                (0..v.len()).map(|i| point_segment(q, v[i], v[(i + 1) % v.len()])).fold(f64::INFINITY, f64::min)
            }
            Section::Cloud(c) => {
                let (mut bi, mut bd) = (0, f64::INFINITY);
                for (i, (_, z)) in c.iter().enumerate() {
                    let d = dist(z, p);
                    if d < bd {
                        (bi, bd) = (i, d);
                    }
                }
                self.refine_cloud(p, &c[bi].0, bd)
            }
        }
    }
}

/// Rays per cross-section in [`convex_body_sequence`].
pub const SECTION_RAYS: usize = 720;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionDiagnostics {
    pub k: usize,
    pub ln_eps: f64,
    /// A point with φ < ε_k.
    pub interior_witness: Vec<f64>,
    pub ln_phi_witness: f64,
    pub boundary: Vec<BoundaryPoint>,
    pub dbar: Dbar,
    pub truncated_rays: usize,
}

/// For each level: an interior witness, boundary samples along 16 or more
/// directions and d̄ against the base cross-section.
pub fn convex_body_sequence(
    rep: &SeriesRep,
    schedule: &LevelSchedule,
    x: &[f64],
    base: &SetOracle,
    n_boundary: usize,
    cfg: &MetricConfig,
) -> Result<Vec<SectionDiagnostics>> {
    if base.is_empty() {
        return Err(Error::EmptySet("base cross-section".into()));
    }
    let witness = base.project(&base.bounding_box().center());
    let ln_w = LevelSetApprox::new(rep, 0.0).ln_phi(x, &witness);
    let dirs = directions(LevelSetApprox::new(rep, 0.0).section_dim(), n_boundary.max(16), cfg.seed);
    let mut out = Vec::with_capacity(schedule.len());
    for (k, &le) in schedule.ln_eps().iter().enumerate() {
        let ls = LevelSetApprox::new(rep, le);
        if !(ln_w < le) {
            return Err(Error::Invalid(format!("witness is not interior at level {}", k + 1)));
        }
        let boundary = cfg.exec.map_slice(&dirs, |d| ls.boundary_point(x, d, &witness)).into_iter().collect::<Result<Vec<_>>>()?;
        let sec = ls.cross_section(x, &witness, SECTION_RAYS, cfg.exec)?;
        let d = dbar(&sec, base, cfg)?;
        out.push(SectionDiagnostics {
            k: k + 1,
            ln_eps: le,
            interior_witness: witness.clone(),
            ln_phi_witness: ln_w,
            boundary,
            dbar: d,
            truncated_rays: sec.truncated,
        });
    }
    Ok(out)
}

/// f^ε(x, y) = inf{α : φ(x, (y, α)) ≤ ε} for an epigraph representation,
/// by bisection on [lo, hi]; returns the feasible end.
pub fn smooth_integrand_value(epi_rep: &SeriesRep, ln_eps: f64, x: &[f64], y: &[f64], bracket: (f64, f64)) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    if epi_rep.m != y.len() + 1 {
        return Err(Error::Dimension { expected: epi_rep.m - 1, got: y.len() });
    }
    let mut z = y.to_vec();
    z.push(hi);
    let feas = |z: &mut Vec<f64>, a: f64| {
        *z.last_mut().unwrap() = a;
        epi_rep.ln_eval(x, z) <= ln_eps
    };
    if !(lo < hi) || !feas(&mut z, hi) {
        return Err(Error::Bracket(format!("upper end {hi} is not in the level set")));
    }
    if feas(&mut z, lo) {
        return Err(Error::Bracket(format!("lower end {lo} is already in the level set")));
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if feas(&mut z, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// [`smooth_integrand_value`] starting from a known feasible height `upper`
/// (for instance f(x, y) itself), widening the lower end geometrically.
/// Returns −∞ if no infeasible height exists above `upper − max_drop`.
pub fn smooth_integrand_from(epi_rep: &SeriesRep, ln_eps: f64, x: &[f64], y: &[f64], upper: f64, max_drop: f64) -> Result<f64> {
    let mut step = 1.0;
    loop {
        match smooth_integrand_value(epi_rep, ln_eps, x, y, (upper - step, upper)) {
            Err(Error::Bracket(msg)) if msg.starts_with("lower") => {
                step *= 2.0;
                if step > max_drop {
                    return Ok(f64::NEG_INFINITY);
                }
            }
            r => return r,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MoreauJob {
    pub f: Expr,
    pub lambda: f64,
    pub search: Aabb,
    #[serde(default = "default_refine_tol")]
    pub tol: f64,
}

fn default_refine_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoreauResult {
    pub value: f64,
    pub argmin: Vec<f64>,
    /// Value of the same problem on the box inflated twofold.
    pub inflated_value: f64,
    pub prox_bounded: bool,
}

fn grid_points(dim: usize) -> usize {
    match dim {
        1 => 1025,
        2 => 129,
        _ => 64,
    }
}

impl MoreauJob {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Invalid(format!("lambda = {} must be positive", self.lambda)));
        }
        if self.f.arity() != self.search.dim() {
            return Err(Error::Dimension { expected: self.search.dim(), got: self.f.arity() });
        }
        if self.search.dim() == 0 || self.search.dim() > 3 {
            return Err(Error::Unsupported("Moreau envelopes in dimensions 1 to 3".into()));
        }
        Ok(())
    }

    fn objective<'a>(&'a self, x: &'a [f64]) -> impl Fn(&[f64]) -> f64 + 'a {
        move |z: &[f64]| self.f.eval(z) + dist(x, z).powi(2) / (2.0 * self.lambda)
    }

    /// Grid search on `region` then coordinate golden refinement.
    fn solve_on(&self, x: &[f64], region: &Aabb) -> Result<(f64, Vec<f64>)> {
        let d = region.dim();
        let n = grid_points(d);
        let h: Vec<f64> = (0..d).map(|i| (region.hi[i] - region.lo[i]) / (n - 1) as f64).collect();
        let obj = self.objective(x);
        let mut best = (f64::INFINITY, vec![0.0; d]);
        let total = n.pow(d as u32);
        let mut z = vec![0.0; d];
        for idx in 0..total {
            let mut r = idx;
            for i in 0..d {
                z[i] = region.lo[i] + (r % n) as f64 * h[i];
                r /= n;
            }
            let fz = self.f.eval(&z);
            if !fz.is_finite() {
                return Err(Error::Domain(format!("integrand is not finite at {z:?}")));
            }
            let v = fz + dist(x, &z).powi(2) / (2.0 * self.lambda);
            if v < best.0 {
                best = (v, z.clone());
            }
        }
        let radius = h.iter().copied().fold(0.0, f64::max);
        let (z, v) = if d == 1 {
            let a = (best.1[0] - radius).max(region.lo[0]);
            let b = (best.1[0] + radius).min(region.hi[0]);
            let (t, v) = golden(|t| obj(&[t]), a, b, self.tol);
            (vec![t], v)
        } else {
            coordinate_golden(&obj, &best.1, &region.lo, &region.hi, radius, 200, self.tol)
        };
        Ok(if v <= best.0 { (v, z) } else { best })
    }

    /// e_λ f(x) = inf_z f(z) + ‖x − z‖²/(2λ) over the search box, with the
    /// inflated-box prox-boundedness check.
    pub fn envelope(&self, x: &[f64]) -> Result<MoreauResult> {
        self.validate()?;
        let (value, argmin) = self.solve_on(x, &self.search)?;
        let (inflated_value, _) = self.solve_on(x, &self.search.scaled(2.0))?;
        let prox_bounded = (value - inflated_value).abs() <= 1e-6 * (1.0 + value.abs());
        Ok(MoreauResult { value, argmin, inflated_value, prox_bounded })
    }

    /// Envelope value without the boundedness check.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.validate()?;
        Ok(self.solve_on(x, &self.search)?.0)
    }
}

pub fn moreau_envelope(job: &MoreauJob, x: &[f64]) -> Result<MoreauResult> {
    job.envelope(x)
}

/// Closed form of e_λ|·|.
pub fn huber(x: f64, lambda: f64) -> f64 {
    if x.abs() <= lambda {
        x * x / (2.0 * lambda)
    } else {
        x.abs() - 0.5 * lambda
    }
}

/// Truncated epigraph distance between e_λ f and f for a scalar integrand
/// on `window`, searching the prox point over the job's box.
pub fn moreau_epi_dbar(job: &MoreauJob, window: (f64, f64), cfg: &MetricConfig) -> Result<Dbar> {
    job.validate()?;
    if job.search.dim() != 1 {
        return Err(Error::Unsupported("epigraph distances for scalar integrands".into()));
    }
    let f = |y: f64| job.f.eval(&[y]);
    let e = |y: f64| job.value(&[y]).unwrap_or(f64::NAN);
    epi_dbar(e, f, window.0, window.1, cfg)
}

/// Largest λ = 2^{−j}, j = 0..=max_halvings, whose envelope is within 1/n
/// of f in truncated epigraph distance.
pub fn select_lambda(
    f: &Expr,
    search: &Aabb,
    window: (f64, f64),
    n: usize,
    max_halvings: usize,
    cfg: &MetricConfig,
) -> Result<Option<(f64, f64)>> {
    let target = 1.0 / n.max(1) as f64;
    for j in 0..=max_halvings {
        let lambda = 0.5f64.powi(j as i32);
        let job = MoreauJob { f: f.clone(), lambda, search: search.clone(), tol: default_refine_tol() };
        let d = moreau_epi_dbar(&job, window, cfg)?.value;
        if d <= target {
            return Ok(Some((lambda, d)));
        }
    }
    Ok(None)
}

/// α‖y‖² + β ≤ f(y) on a grid of `n` points per axis of `region`.
pub fn quadratic_growth_holds(f: &Expr, region: &Aabb, alpha: f64, beta: f64, n: usize) -> bool {
    let d = region.dim();
    let n = n.max(2);
    let mut z = vec![0.0; d];
    (0..n.pow(d as u32)).all(|idx| {
        let mut r = idx;
        for i in 0..d {
            z[i] = region.lo[i] + (r % n) as f64 * (region.hi[i] - region.lo[i]) / (n - 1) as f64;
            r /= n;
        }
        alpha * norm(&z).powi(2) + beta <= f.eval(&z)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bump::SmoothBump;
    use crate::cuts::{CoverMode, CoverOptions};
    use crate::series::represent_set;

    fn ball_rep(n: usize) -> (SetOracle, SeriesRep) {
        let o = SetOracle::ball(vec![0.0, 0.0], 1.0).unwrap();
        let (rep, _) = represent_set(&o, CoverMode::Halfspace, n, &CoverOptions::default()).unwrap();
        (o, rep)
    }

    #[test]
    fn schedule_rules() {
        let s = LevelSchedule::default_for(-0.5);
        assert_eq!(s.len(), 10);
        assert!((s.eps()[0] - 0.025).abs() < 1e-15);
        assert!(s.ln_eps().windows(2).all(|w| w[1] < w[0]));
        assert!(LevelSchedule::geometric(0.1, 1.0, 3).is_err());
        assert!(LevelSchedule::from_ln(vec![-1.0, -1.0]).is_err());
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<LevelSchedule>(&j).unwrap(), s);
        let g: LevelSchedule = serde_json::from_str(r#"{"eps1":0.1,"ratio":0.5,"steps":4}"#).unwrap();
        assert!((g.eps()[3] - 0.0125).abs() < 1e-15);
    }

    #[test]
    fn boundary_of_singleton_rep() {
        let o = SetOracle::points(vec![vec![0.0]]).unwrap();
        let (rep, _) = represent_set(&o, CoverMode::Ball, 32, &CoverOptions::default()).unwrap();
        let mut last = f64::INFINITY;
        for le in [-25.0, -30.0, -40.0, -60.0] {
            let ls = LevelSetApprox::new(&rep, le);
            let b = ls.boundary_point(&[], &[1.0], &[0.0]).unwrap();
            assert!(b.z[0] > 0.0 && b.z[0] < last);
            assert!(b.ln_residual.abs() <= 1e-10);
            assert!(b.ln_grad_norm.is_finite());
            last = b.z[0];
        }
    }

    #[test]
    fn level_nesting_and_graph_membership() {
        let (o, rep) = ball_rep(64);
        let s = LevelSchedule::default_for(-0.5);
        for p in o.sample(50, 1) {
            assert!(s.ln_eps().iter().all(|le| LevelSetApprox::new(&rep, *le).member(&[], &p)));
        }
        let far = [1.5, 0.0];
        assert!(!LevelSetApprox::new(&rep, *s.ln_eps().last().unwrap()).member(&[], &far));
        let b = LevelSetApprox::new(&rep, s.ln_eps()[3]).boundary_point(&[], &[0.3, 1.0], &[0.0, 0.0]).unwrap();
        assert!(LevelSetApprox::new(&rep, s.ln_eps()[2]).member(&[], &b.z));
    }

    #[test]
    fn unbounded_ray_reported() {
        let o = SetOracle::polytope(vec![vec![0.0, -1.0]], vec![0.0], Some(Aabb::cube(2, 2.0))).unwrap();
        let (rep, _) = represent_set(&o, CoverMode::Halfspace, 8, &CoverOptions::default()).unwrap();
        let ls = LevelSetApprox::new(&rep, -10.0);
        assert!(matches!(ls.boundary_point(&[], &[0.0, 1.0], &[0.0, 0.5]), Err(Error::UnboundedDirection(_))));
    }

    #[test]
    fn cross_section_distance_close_to_ball() {
        let (o, rep) = ball_rep(128);
        let ls = LevelSetApprox::new(&rep, -400.0);
        let sec = ls.cross_section(&[], &[0.0, 0.0], 360, Exec::Auto).unwrap();
        for p in [[2.0, 0.0], [0.0, -3.0], [1.0, 1.0]] {
            assert!((sec.distance(&p) - o.distance(&p)).abs() < 0.02);
        }
        assert_eq!(sec.distance(&[0.2, 0.1]), 0.0);
    }

    #[test]
    fn moreau_of_abs() {
        let f = Expr::parse("abs(z)", &["z"]).unwrap();
        let job = MoreauJob { f, lambda: 1.0, search: Aabb::cube(1, 4.0), tol: 1e-10 };
        let r = job.envelope(&[2.0]).unwrap();
        assert!((r.value - 1.5).abs() < 1e-8 && r.prox_bounded);
        assert!(job.envelope(&[0.0]).unwrap().value.abs() < 1e-9);
        for x in [-3.0, -0.7, 0.2, 1.0, 3.5] {
            assert!((job.value(&[x]).unwrap() - huber(x, 1.0)).abs() < 1e-8);
        }
    }

    #[test]
    fn moreau_flags_concave_quadratic() {
        let f = Expr::parse("-z^2", &["z"]).unwrap();
        let job = MoreauJob { f, lambda: 1.0, search: Aabb::cube(1, 4.0), tol: 1e-10 };
        assert!(!job.envelope(&[0.5]).unwrap().prox_bounded);
    }

    #[test]
    fn moreau_in_two_dimensions() {
        let f = Expr::parse("abs(u) + abs(v)", &["u", "v"]).unwrap();
        let job = MoreauJob { f, lambda: 0.5, search: Aabb::cube(2, 3.0), tol: 1e-10 };
        let r = job.envelope(&[2.0, -0.25]).unwrap();
        assert!((r.value - (huber(2.0, 0.5) + huber(0.25, 0.5))).abs() < 1e-7);
        assert!(r.prox_bounded);
    }

    #[test]
    fn moreau_rejects_bad_jobs() {
        let f = Expr::parse("exp(1/z)", &["z"]).unwrap();
        let job = MoreauJob { f: f.clone(), lambda: 1.0, search: Aabb::cube(1, 1.0), tol: 1e-10 };
        assert!(matches!(job.envelope(&[0.0]), Err(Error::Domain(_))));
        let job = MoreauJob { f, lambda: 0.0, search: Aabb::cube(1, 1.0), tol: 1e-10 };
        assert!(job.envelope(&[0.0]).is_err());
    }

    #[test]
    fn integrand_bracket_errors() {
        let f = Expr::parse("abs(y)", &["y"]).unwrap();
        let o = SetOracle::epigraph(f, vec![], Aabb::cube(1, 2.0)).unwrap();
        let (rep, _) = represent_set(&o, CoverMode::Halfspace, 32, &CoverOptions::default()).unwrap();
        assert!(matches!(smooth_integrand_value(&rep, -50.0, &[], &[0.5], (-3.0, -2.0)), Err(Error::Bracket(_))));
        let v = smooth_integrand_value(&rep, -50.0, &[], &[0.5], (-1.0, 0.5)).unwrap();
        assert!(v <= 0.5 && v > 0.0);
        let _ = SmoothBump::new();
    }
}
