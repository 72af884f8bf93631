//! Multistart penalized local search for problems of the form
//!
//! ```text
//! min Σ_j w_j ψ_j(z)  s.t.  φ_i(x(z), y_i(z)) ≤ ε for every block i,  z ∈ box
//! ```
//!
//! The penalty μ max(0, ln φ_i − ln ε)² acts on ln φ so that the deep levels
//! of a schedule stay representable; its gradient uses the exact series
//! gradient. Points with φ_i = 0 for every block are feasible at every level
//! and serve as anchors for feasibility restoration.
//!
//! [`Model`] nests this for two-stage problems: an outer search over the
//! first-stage x and an inner recourse solve with x fixed, plus graph cuts
//! added wherever the tail solution leaves a true graph.

use serde::{Deserialize, Serialize};

use crate::approx::LevelSchedule;
use crate::cuts::{separate_graph_point_with, GraphCut};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::expr::Expr;
use crate::optim::{clamp_box, coordinate_golden, golden, projected_gradient, PgOptions};
use crate::oracles::{Aabb, ParamMultifunction};
use crate::sampling::Halton;
use crate::series::{assemble_dims, SeriesRep};

/// w ψ(z[vars]).
#[derive(Debug, Clone)]
pub struct Term {
    pub weight: f64,
    pub f: Expr,
    pub vars: Vec<usize>,
}

/// ln φ(z[x], z[y]) ≤ ln ε.
#[derive(Debug, Clone)]
pub struct Constraint<'a> {
    pub rep: &'a SeriesRep,
    pub x: Vec<usize>,
    pub y: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub bounds: Aabb,
    pub objective: Vec<Term>,
    pub constraints: Vec<Constraint<'a>>,
    /// Points with φ_i = 0 for every block.
    pub anchors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverOptions {
    pub starts: usize,
    pub mu0: f64,
    pub mu_max: f64,
    pub mu_factor: f64,
    pub max_iter: usize,
    pub seed: u64,
    #[serde(default)]
    pub exec: Exec,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { starts: 8, mu0: 1.0, mu_max: 1e6, mu_factor: 10.0, max_iter: 400, seed: 0, exec: Exec::Auto }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.starts < 8 {
            return Err(Error::Invalid(format!("{} starts; at least 8 are required", self.starts)));
        }
        if !(self.mu0 > 0.0 && self.mu_max >= self.mu0 && self.mu_factor > 1.0) {
            return Err(Error::Invalid("penalty schedule must increase from a positive start".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSolution {
    pub k: usize,
    pub ln_eps: f64,
    pub value: f64,
    pub z: Vec<f64>,
    /// max_i (ln φ_i − ln ε), ≤ 0 when feasible.
    pub max_violation: f64,
    pub feasible: bool,
    /// Starts that ended feasible.
    pub feasible_starts: usize,
    /// Deeper level whose solution was adopted, when it improved this one.
    pub adopted_from: Option<usize>,
}

impl Problem<'_> {
    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        for t in &self.objective {
            if t.f.arity() != t.vars.len() || t.vars.iter().any(|&v| v >= n) {
                return Err(Error::Dimension { expected: t.f.arity(), got: t.vars.len() });
            }
        }
        for c in &self.constraints {
            if c.x.len() != c.rep.s || c.y.len() != c.rep.m || c.x.iter().chain(&c.y).any(|&v| v >= n) {
                return Err(Error::Dimension { expected: c.rep.s + c.rep.m, got: c.x.len() + c.y.len() });
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, z: &[f64]) -> f64 {
        self.objective.iter().map(|t| t.weight * t.f.eval(&pick(z, &t.vars))).sum()
    }

    fn objective_grad(&self, z: &[f64]) -> (f64, Vec<f64>) {
        let mut g = vec![0.0; z.len()];
        let mut v = 0.0;
        for t in &self.objective {
            let (fv, fg) = t.f.grad(&pick(z, &t.vars));
            v += t.weight * fv;
            for (k, &i) in t.vars.iter().enumerate() {
                g[i] += t.weight * fg[k];
            }
        }
        (v, g)
    }

    /// ln φ_i at z for every block.
    pub fn ln_phis(&self, z: &[f64]) -> Vec<f64> {
        self.constraints.iter().map(|c| c.rep.ln_eval(&pick(z, &c.x), &pick(z, &c.y))).collect()
    }

    pub fn max_violation(&self, z: &[f64], ln_eps: f64) -> f64 {
        self.ln_phis(z).into_iter().map(|l| l - ln_eps).fold(f64::NEG_INFINITY, f64::max)
    }

    /// ψ + μ Σ_i max(0, (ln φ_i − ln ε)/s)² with s = max(1, |ln ε|).
    fn penalized(&self, z: &[f64], ln_eps: f64, mu: f64) -> (f64, Vec<f64>) {
        let (mut v, mut g) = self.objective_grad(z);
        let scale = ln_eps.abs().max(1.0);
        for c in &self.constraints {
            let (x, y) = (pick(z, &c.x), pick(z, &c.y));
            let (l, lg) = c.rep.ln_grad(&x, &y);
            let e = (l - ln_eps) / scale;
            if e > 0.0 {
                v += mu * e * e;
                for (k, &i) in c.x.iter().chain(&c.y).enumerate() {
                    g[i] += 2.0 * mu * e * lg[k] / scale;
                }
            }
        }
        (v, g)
    }

    /// Largest feasible step from the nearest anchor toward z.
    fn restore(&self, anchors: &[Vec<f64>], z: &[f64], ln_eps: f64) -> Option<Vec<f64>> {
        let a = anchors.iter().min_by(|a, b| crate::linalg::dist(a, z).total_cmp(&crate::linalg::dist(b, z)))?;
        if !(self.max_violation(a, ln_eps) <= 0.0) {
            return None;
        }
        let at = |t: f64| -> Vec<f64> { a.iter().zip(z).map(|(p, q)| p + t * (q - p)).collect() };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.max_violation(&at(mid), ln_eps) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(at(lo))
    }
}

fn pick(z: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| z[i]).collect()
}

fn halton_starts(p: &Problem<'_>, opts: &SolverOptions) -> Vec<Vec<f64>> {
    let h = Halton::new(p.dim(), opts.seed);
    (0..opts.starts)
        .map(|i| {
            let u = h.unit(i);
            (0..p.dim()).map(|j| p.bounds.lo[j] + u[j] * (p.bounds.hi[j] - p.bounds.lo[j])).collect()
        })
        .collect()
}

/// Penalty continuation from one start, then restoration if needed.
fn local_solve(p: &Problem<'_>, z0: &[f64], ln_eps: f64, opts: &SolverOptions) -> Option<(f64, Vec<f64>)> {
    local_solve_in(p, &p.bounds, &p.anchors, z0, ln_eps, opts)
}

fn local_solve_in(
    p: &Problem<'_>,
    bounds: &Aabb,
    anchors: &[Vec<f64>],
    z0: &[f64],
    ln_eps: f64,
    opts: &SolverOptions,
) -> Option<(f64, Vec<f64>)> {
    let (lo, hi) = (&bounds.lo, &bounds.hi);
    let mut z = z0.to_vec();
    clamp_box(&mut z, lo, hi);
    let pg = PgOptions { max_iter: opts.max_iter, tol: 1e-12 };
    let mut mu = opts.mu0;
    loop {
        z = projected_gradient(|u| p.penalized(u, ln_eps, mu), &z, lo, hi, pg).0;
        if mu >= opts.mu_max {
            break;
        }
        mu = (mu * opts.mu_factor).min(opts.mu_max);
    }
    if !(p.max_violation(&z, ln_eps) <= 0.0) {
        z = p.restore(anchors, &z, ln_eps)?;
    }
    // Descent that rejects infeasible trial points.
    let feasible_obj = |u: &[f64]| if p.max_violation(u, ln_eps) <= 0.0 { p.objective_grad(u) } else { (f64::NAN, vec![0.0; u.len()]) };
    z = projected_gradient(feasible_obj, &z, lo, hi, pg).0;
    Some((p.objective_value(&z), z))
}

/// Feasible end points of every start, seeded and `warm`.
pub fn solve_level_all(p: &Problem<'_>, ln_eps: f64, warm: &[Vec<f64>], opts: &SolverOptions) -> Result<Vec<(f64, Vec<f64>)>> {
    opts.validate()?;
    p.validate()?;
    let mut starts = halton_starts(p, opts);
    starts.extend(warm.iter().cloned());
    Ok(solve_starts(p, ln_eps, &starts, opts))
}

fn solve_starts(p: &Problem<'_>, ln_eps: f64, starts: &[Vec<f64>], opts: &SolverOptions) -> Vec<(f64, Vec<f64>)> {
    opts.exec.map_slice(starts, |z0| local_solve(p, z0, ln_eps, opts)).into_iter().flatten().collect()
}

/// Best feasible point over the seeded starts and the extra `warm` starts.
pub fn solve_level(p: &Problem<'_>, ln_eps: f64, warm: &[Vec<f64>], opts: &SolverOptions) -> Result<(Option<(f64, Vec<f64>)>, usize)> {
    opts.validate()?;
    p.validate()?;
    let mut starts = halton_starts(p, opts);
    starts.extend(warm.iter().cloned());
    let sols = opts.exec.map_slice(&starts, |z0| local_solve(p, z0, ln_eps, opts));
    let n_feasible = sols.iter().filter(|s| s.is_some()).count();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for s in sols.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| s.0 < b.0) {
            best = Some(s);
        }
    }
    Ok((best, n_feasible))
}

/// Solve every level of the schedule; each level is warm started from the
/// previous solution. Since the feasible sets shrink with k, a solution at
/// a deeper level is feasible at every earlier one, and a final pass adopts
/// it wherever it is better, so the reported values are nondecreasing.
pub fn solve_schedule(p: &Problem<'_>, schedule: &LevelSchedule, opts: &SolverOptions) -> Result<Vec<LevelSolution>> {
    let mut out: Vec<LevelSolution> = Vec::with_capacity(schedule.len());
    let mut warm: Vec<Vec<f64>> = Vec::new();
    for (k, &le) in schedule.ln_eps().iter().enumerate() {
        let sols = solve_level_all(p, le, &warm, opts)?;
        let feasible_starts = sols.len();
        let best = sols.into_iter().min_by(|a, b| a.0.total_cmp(&b.0));
        let sol = match best {
            Some((value, z)) => {
                warm = vec![z.clone()];
                LevelSolution {
                    k: k + 1,
                    ln_eps: le,
                    value,
                    max_violation: p.max_violation(&z, le),
                    feasible: true,
                    z,
                    feasible_starts,
                    adopted_from: None,
                }
            }
            None => LevelSolution {
                k: k + 1,
                ln_eps: le,
                value: f64::NAN,
                z: Vec::new(),
                max_violation: f64::INFINITY,
                feasible: false,
                feasible_starts,
                adopted_from: None,
            },
        };
        out.push(sol);
    }
    adopt_deeper(p, &mut out);
    Ok(out)
}

/// Replace each level's solution by a better one from a deeper level; the
/// deeper feasible sets are nested inside the earlier ones.
fn adopt_deeper(p: &Problem<'_>, out: &mut [LevelSolution]) {
    for k in (0..out.len()).rev() {
        for j in k + 1..out.len() {
            if out[j].feasible && (!out[k].feasible || out[j].value < out[k].value) {
                let le = out[k].ln_eps;
                let z = out[j].z.clone();
                out[k] = LevelSolution {
                    value: out[j].value,
                    max_violation: p.max_violation(&z, le),
                    z,
                    feasible: true,
                    adopted_from: Some(j + 1),
                    ..out[k].clone()
                };
            }
        }
    }
}

/// Values nondecreasing along the schedule, up to `tol`.
pub fn values_nondecreasing(levels: &[LevelSolution], tol: f64) -> bool {
    levels.windows(2).all(|w| !w[0].feasible || !w[1].feasible || w[1].value >= w[0].value - tol)
}

/// One constrained block: a multifunction, its representation and the
/// positions of its parameter and value variables in z.
#[derive(Debug, Clone)]
pub struct Block {
    pub pmf: ParamMultifunction,
    pub rep: SeriesRep,
    pub x: Vec<usize>,
    pub y: Vec<usize>,
}

/// A two-stage problem that owns its representations, so that they can be
/// refined. z[..n_first] is the first-stage variable x, and every block
/// takes its parameters from x and its values from the rest of z.
#[derive(Debug, Clone)]
pub struct Model {
    pub bounds: Aabb,
    pub n_first: usize,
    pub objective: Vec<Term>,
    pub blocks: Vec<Block>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineOptions {
    /// First-stage candidates evaluated at every level.
    pub points: usize,
    pub rounds: usize,
    /// Graph distance below which a solution is accepted.
    pub tol: f64,
    /// Cap on the cuts of each block.
    pub max_cuts: usize,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions { points: 33, rounds: 128, tol: 1e-3, max_cuts: 2048 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineRound {
    pub round: usize,
    pub value: f64,
    /// Largest distance d(y_i, M_i(x)) at the tail solution.
    pub graph_violation: f64,
    pub cuts_added: usize,
    /// Whether the round's solution came from the whole schedule or from
    /// the tail level alone.
    pub full_schedule: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedSolution {
    pub levels: Vec<LevelSolution>,
    pub rounds: Vec<RefineRound>,
}

impl Model {
    pub fn problem(&self) -> Problem<'_> {
        Problem {
            bounds: self.bounds.clone(),
            objective: self.objective.clone(),
            constraints: self.blocks.iter().map(|b| Constraint { rep: &b.rep, x: b.x.clone(), y: b.y.clone() }).collect(),
            anchors: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_first;
        if n > self.bounds.dim() {
            return Err(Error::Dimension { expected: self.bounds.dim(), got: n });
        }
        if self.blocks.iter().any(|b| b.x.iter().any(|&i| i >= n) || b.y.iter().any(|&i| i < n)) {
            return Err(Error::Invalid("block parameters must be first-stage variables and values second-stage ones".into()));
        }
        self.problem().validate()
    }

    fn first_stage(&self) -> Aabb {
        Aabb { lo: self.bounds.lo[..self.n_first].to_vec(), hi: self.bounds.hi[..self.n_first].to_vec() }
    }

    /// max_i d(y_i, M_i(x)) at z.
    pub fn graph_violation(&self, z: &[f64]) -> f64 {
        self.blocks.iter().map(|b| b.pmf.value_distance(&pick(z, &b.x), &pick(z, &b.y))).fold(0.0, f64::max)
    }

    /// x with each block's values projected from the box center onto
    /// M_i(x); a point of every true graph, hence of every zero set.
    fn anchor(&self, x: &[f64]) -> Option<Vec<f64>> {
        let mut z = self.bounds.center();
        z[..self.n_first].copy_from_slice(x);
        for b in &self.blocks {
            let y = b.pmf.value_set(&pick(&z, &b.x)).try_project(&pick(&z, &b.y))?;
            for (&i, v) in b.y.iter().zip(y) {
                z[i] = v;
            }
        }
        Some(z)
    }

    /// Second-stage minimum with x held fixed, from the anchor and a warm
    /// start. For convex values and ψ convex in y this is a convex problem.
    fn recourse(&self, p: &Problem<'_>, x: &[f64], ln_eps: f64, warm: Option<&[f64]>, opts: &SolverOptions) -> Option<(f64, Vec<f64>)> {
        if self.scalar_blocks() {
            return self.recourse_scalar(p, self.anchor(x)?, ln_eps);
        }
        self.recourse_general(p, x, ln_eps, warm, opts)
    }

    fn recourse_general(
        &self,
        p: &Problem<'_>,
        x: &[f64],
        ln_eps: f64,
        warm: Option<&[f64]>,
        opts: &SolverOptions,
    ) -> Option<(f64, Vec<f64>)> {
        let n = self.n_first;
        let a = self.anchor(x)?;
        let mut fixed = self.bounds.clone();
        fixed.lo[..n].copy_from_slice(x);
        fixed.hi[..n].copy_from_slice(x);
        let mut starts = vec![a.clone()];
        if let Some(w) = warm {
            let mut z = w.to_vec();
            z[..n].copy_from_slice(x);
            starts.push(z);
        }
        let anchors = [a];
        starts.iter().filter_map(|z0| local_solve_in(p, &fixed, &anchors, z0, ln_eps, opts)).min_by(|a, b| a.0.total_cmp(&b.0))
    }

    /// Every second-stage value is a block's only value and every term sees
    /// at most one block's value.
    fn scalar_blocks(&self) -> bool {
        let n = self.n_first;
        let owner = |i: usize| self.blocks.iter().position(|b| b.y == [i]);
        (n..self.bounds.dim()).all(|i| owner(i).is_some())
            && self.blocks.iter().all(|b| b.y.len() == 1)
            && self
                .objective
                .iter()
                .all(|t| t.vars.iter().filter(|&&i| i >= n).map(|&i| owner(i)).collect::<std::collections::BTreeSet<_>>().len() <= 1)
    }

    /// Recourse block by block when each value is scalar: the slice of a
    /// zero set at x is an interval holding the anchor, so the minimizer
    /// is the unconstrained one or the last feasible point toward it.
    fn recourse_scalar(&self, p: &Problem<'_>, mut z: Vec<f64>, ln_eps: f64) -> Option<(f64, Vec<f64>)> {
        for (b, c) in self.blocks.iter().zip(&p.constraints) {
            let j = b.y[0];
            let xs = pick(&z, &c.x);
            let feasible = |t: f64| c.rep.ln_eval(&xs, &[t]) <= ln_eps;
            let a = z[j];
            if !feasible(a) {
                return None;
            }
            let terms: Vec<&Term> = self.objective.iter().filter(|t| t.vars.contains(&j)).collect();
            let mut w = z.clone();
            let h = |t: f64| {
                let mut w = w.clone();
                w[j] = t;
                terms.iter().map(|term| term.weight * term.f.eval(&pick(&w, &term.vars))).sum::<f64>()
            };
            let (lo, hi) = (self.bounds.lo[j], self.bounds.hi[j]);
            let u = golden(h, lo, hi, 1e-12 * (hi - lo).max(1.0)).0;
            let t = if feasible(u) {
                u
            } else {
                let (mut inside, mut outside) = (a, u);
                for _ in 0..64 {
                    let mid = 0.5 * (inside + outside);
                    if feasible(mid) {
                        inside = mid;
                    } else {
                        outside = mid;
                    }
                }
                inside
            };
            w[j] = t;
            z = w;
        }
        Some((p.objective_value(&z), z))
    }

    /// Seeded first-stage candidates over the first-stage box.
    fn seeded_candidates(&self, opts: &SolverOptions, refine: &RefineOptions) -> Vec<Vec<f64>> {
        let first = self.first_stage();
        let h = Halton::new(self.n_first, opts.seed);
        (0..refine.points)
            .map(|i| h.unit(i).iter().enumerate().map(|(j, u)| first.lo[j] + u * (first.hi[j] - first.lo[j])).collect())
            .collect()
    }

    /// Best recourse value over the first-stage candidates, optionally
    /// polished by coordinate search within `radius`. Also returns the
    /// recourse solution of every candidate.
    #[allow(clippy::too_many_arguments)]
    fn solve_level_nested(
        &self,
        p: &Problem<'_>,
        k: usize,
        ln_eps: f64,
        cands: &[Vec<f64>],
        warm: Option<&[f64]>,
        polish: Option<f64>,
        opts: &SolverOptions,
    ) -> (LevelSolution, Vec<Vec<f64>>) {
        let n = self.n_first;
        let first = self.first_stage();
        let sols: Vec<(f64, Vec<f64>)> =
            opts.exec.map_slice(cands, |x| self.recourse(p, x, ln_eps, warm, opts)).into_iter().flatten().collect();
        let feasible_starts = sols.len();
        let Some((mut value, mut z)) = sols.iter().min_by(|a, b| a.0.total_cmp(&b.0)).cloned() else {
            let l = LevelSolution {
                k,
                ln_eps,
                value: f64::NAN,
                z: Vec::new(),
                max_violation: f64::INFINITY,
                feasible: false,
                feasible_starts,
                adopted_from: None,
            };
            return (l, Vec::new());
        };
        if let Some(radius) = polish.filter(|_| n > 0) {
            let z0 = z.clone();
            let q = |x: &[f64]| self.recourse(p, x, ln_eps, Some(&z0), opts).map_or(f64::INFINITY, |r| r.0);
            let (x, qv) = coordinate_golden(q, &z0[..n], &first.lo, &first.hi, radius, 2, 1e-7 * first.diameter().max(1.0));
            if qv < value {
                if let Some(r) = self.recourse(p, &x, ln_eps, Some(&z0), opts).filter(|r| r.0 < value) {
                    (value, z) = r;
                }
            }
        }
        let l = LevelSolution {
            k,
            ln_eps,
            value,
            max_violation: p.max_violation(&z, ln_eps),
            feasible: true,
            z,
            feasible_starts,
            adopted_from: None,
        };
        (l, sols.into_iter().map(|s| s.1).collect())
    }

    /// Every level of the schedule by the nested solve, warm started from
    /// the previous level and polished at the tail, with deeper solutions
    /// adopted where they improve earlier ones.
    pub fn solve_nested(&self, schedule: &LevelSchedule, opts: &SolverOptions, refine: &RefineOptions) -> Result<Vec<LevelSolution>> {
        opts.validate()?;
        self.validate()?;
        if refine.points == 0 {
            return Err(Error::Invalid("at least one first-stage candidate is required".into()));
        }
        let p = self.problem();
        let n = schedule.len();
        let seeded = self.seeded_candidates(opts, refine);
        let radius = 2.0 * self.first_stage().diameter() / refine.points as f64;
        let mut out: Vec<LevelSolution> = Vec::with_capacity(n);
        for (k, &le) in schedule.ln_eps().iter().enumerate() {
            let prev = out.last().filter(|l| l.feasible).map(|l| l.z.clone());
            let mut cands = seeded.clone();
            cands.extend(prev.iter().map(|z| z[..self.n_first].to_vec()));
            let polish = (k + 1 == n).then_some(radius);
            out.push(self.solve_level_nested(&p, k + 1, le, &cands, prev.as_deref(), polish, opts).0);
        }
        adopt_deeper(&p, &mut out);
        Ok(out)
    }

    /// First-stage points on the axes through x at offsets r·j/4, |j| ≤ 4.
    fn local_candidates(&self, x: &[f64], r: f64) -> Vec<Vec<f64>> {
        let first = self.first_stage();
        let mut out = vec![x.to_vec()];
        for i in 0..x.len() {
            for j in (-4i32..=4).filter(|&j| j != 0) {
                let mut c = x.to_vec();
                c[i] = (x[i] + r * j as f64 / 4.0).clamp(first.lo[i], first.hi[i]);
                out.push(c);
            }
        }
        out
    }

    /// Exterior probes around z for each block at distance v > tol from its
    /// graph: a ladder from y toward its projection q onto M(x) at depths
    /// v, v/2, v/4, … down to tol, and y itself at x shifted by ±v/2, ±v
    /// along each parameter axis.
    pub fn local_probes(&self, z: &[f64], tol: f64) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for b in &self.blocks {
            let (x, y) = (pick(z, &b.x), pick(z, &b.y));
            let Some(q) = b.pmf.value_set(&x).try_project(&y) else {
                continue;
            };
            let v = crate::linalg::dist(&y, &q);
            if !(v > tol && v.is_finite()) {
                continue;
            }
            let mut t = 0.5 * v;
            while t > tol {
                let mut p = z.to_vec();
                for (k, &i) in b.y.iter().enumerate() {
                    p[i] = q[k] + (y[k] - q[k]) * t / v;
                }
                out.push(p);
                t *= 0.5;
            }
            for &i in &b.x {
                for dx in [-v, -0.5 * v, 0.5 * v, v] {
                    let mut p = z.to_vec();
                    p[i] = (z[i] + dx).clamp(self.bounds.lo[i], self.bounds.hi[i]);
                    out.push(p);
                }
            }
        }
        out
    }

    /// Add a cut for every point that leaves a true graph by more than
    /// `tol`, in front of that block's series. Returns the number added.
    pub fn cut_points(&mut self, points: &[Vec<f64>], tol: f64, max_cuts: usize) -> Result<usize> {
        let mut added = 0;
        for b in &mut self.blocks {
            let mut fresh: Vec<GraphCut> = Vec::new();
            for z in points {
                let (x, y) = (pick(z, &b.x), pick(z, &b.y));
                if b.rep.len() + fresh.len() >= max_cuts || b.pmf.value_distance(&x, &y) <= tol {
                    continue;
                }
                if fresh.iter().any(|c| c.contains(&x, &y)) {
                    continue;
                }
                if let Ok(cut) = separate_graph_point_with(&b.pmf, &x, &y, 1e-9, 12) {
                    fresh.push(cut);
                }
            }
            if !fresh.is_empty() {
                added += fresh.len();
                fresh.extend(b.rep.cuts.iter().cloned());
                b.rep = assemble_dims(fresh, b.rep.bump.clone(), b.rep.s, b.rep.m)?;
            }
        }
        Ok(added)
    }

    /// Nested solve with cutting-plane refinement. While the tail solution
    /// leaves a true graph by more than `tol`, it and the exterior points
    /// around it are cut, and the tail level is solved again over first
    /// stage points near it. When no cut is added the whole schedule is
    /// solved again, and refinement ends once that solution needs no cut
    /// either.
    pub fn solve_refined(&mut self, schedule: &LevelSchedule, opts: &SolverOptions, refine: &RefineOptions) -> Result<RefinedSolution> {
        if !(refine.tol >= 0.0) {
            return Err(Error::Invalid(format!("refinement tolerance {} must be nonnegative", refine.tol)));
        }
        let mut levels = self.solve_nested(schedule, opts, refine)?;
        let mut tail = levels.last().cloned();
        let mut nearby: Vec<Vec<f64>> = Vec::new();
        let mut full = true;
        let mut rounds = Vec::new();
        while let Some(best) = tail.clone().filter(|l| l.feasible) {
            let round = rounds.len();
            let viol = self.graph_violation(&best.z);
            let added = if viol > refine.tol && round < refine.rounds {
                let mut pts = vec![best.z.clone()];
                pts.extend(self.local_probes(&best.z, refine.tol));
                pts.append(&mut nearby);
                self.cut_points(&pts, refine.tol, refine.max_cuts)?
            } else {
                0
            };
            rounds.push(RefineRound { round, value: best.value, graph_violation: viol, cuts_added: added, full_schedule: full });
            if added > 0 {
                let p = self.problem();
                let r = 4.0 * viol.max(refine.tol);
                let cands = self.local_candidates(&best.z[..self.n_first], r);
                let (l, sols) = self.solve_level_nested(&p, best.k, best.ln_eps, &cands, Some(&best.z), Some(0.5 * r), opts);
                tail = Some(l);
                nearby = sols;
                full = false;
            } else if full {
                break;
            } else {
                levels = self.solve_nested(schedule, opts, refine)?;
                tail = levels.last().cloned();
                nearby.clear();
                full = true;
            }
        }
        if !full {
            levels = self.solve_nested(schedule, opts, refine)?;
        }
        Ok(RefinedSolution { levels, rounds })
    }
}

fn grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOptimum {
    pub value: f64,
    pub x: Vec<f64>,
    pub y: Vec<Vec<f64>>,
}

/// Grid minimum of Σ_i p_i ψ_i(x, y_i) over y_i ∈ M_i(x), for scalar x and
/// scalar values, with `n` points per axis. One scenario is the MPEC case.
pub fn brute_force_two_stage(
    psi: &[(f64, &Expr)],
    pmfs: &[&ParamMultifunction],
    x_range: (f64, f64),
    y_range: (f64, f64),
    n: usize,
) -> Result<GridOptimum> {
    if psi.len() != pmfs.len() || pmfs.iter().any(|m| m.param_dim != 1 || m.value_dim != 1) {
        return Err(Error::Unsupported("grid oracle for scalar parameters and values".into()));
    }
    let ys: Vec<f64> = grid(y_range.0, y_range.1, n).collect();
    let mut best: Option<GridOptimum> = None;
    for x in grid(x_range.0, x_range.1, n) {
        let mut total = 0.0;
        let mut yb = Vec::with_capacity(psi.len());
        for ((w, f), m) in psi.iter().zip(pmfs) {
            let vs = m.value_set(&[x]);
            let scen =
                ys.iter().filter(|y| vs.member(&[**y])).map(|&y| (f.eval(&[x, y]), y)).fold(None, |a: Option<(f64, f64)>, b| match a {
                    Some(a) if a.0 <= b.0 => Some(a),
                    _ => Some(b),
                });
            match scen {
                Some((v, y)) => {
                    total += w * v;
                    yb.push(vec![y]);
                }
                None => {
                    total = f64::INFINITY;
                    break;
                }
            }
        }
        if total.is_finite() && best.as_ref().is_none_or(|b| total < b.value) {
            best = Some(GridOptimum { value: total, x: vec![x], y: yb });
        }
    }
    best.ok_or_else(|| Error::EmptySet("no feasible grid point".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cuts::CoverOptions;
    use crate::oracles::{make_param_multifunction, PmfKind, PmfSpec, ShapeSpec};
    use crate::series::represent_graph;

    fn above(slope: &str) -> ParamMultifunction {
        let half = ShapeSpec::Halfspace { normal: vec![-1.0], offset: 0.0, bbox: Some(Aabb::new(vec![0.0], vec![6.0]).unwrap()) };
        let spec = PmfSpec {
            kind: PmfKind::Translated { x_vars: vec!["x".into()], base: half, offset: vec![slope.into()] },
            domain: Aabb::cube(1, 2.0),
            value_box: Some(Aabb::new(vec![-3.0], vec![5.0]).unwrap()),
        };
        make_param_multifunction(&spec, true).unwrap()
    }

    #[test]
    fn unconstrained_problem() {
        let f = Expr::parse("(x-1)^2 + (y-1)^2", &["x", "y"]).unwrap();
        let p = Problem {
            bounds: Aabb::cube(2, 2.0),
            objective: vec![Term { weight: 1.0, f, vars: vec![0, 1] }],
            constraints: vec![],
            anchors: vec![],
        };
        let s = solve_schedule(&p, &LevelSchedule::geometric(0.1, 0.5, 3).unwrap(), &SolverOptions::default()).unwrap();
        for l in &s {
            assert!(l.value < 1e-12);
            assert!((l.z[0] - 1.0).abs() < 1e-6 && (l.z[1] - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn active_constraint_matches_grid() {
        let m = above("x");
        let (rep, _) = represent_graph(&m, 96, &CoverOptions::default()).unwrap();
        let f = Expr::parse("(x-1)^2 + (y+1)^2", &["x", "y"]).unwrap();
        let mut model = Model {
            bounds: Aabb::new(vec![-2.0, -3.0], vec![2.0, 5.0]).unwrap(),
            n_first: 1,
            objective: vec![Term { weight: 1.0, f: f.clone(), vars: vec![0, 1] }],
            blocks: vec![Block { pmf: m.clone(), rep, x: vec![0], y: vec![1] }],
        };
        let sol = model.solve_refined(&LevelSchedule::default_for(-0.5), &SolverOptions::default(), &RefineOptions::default()).unwrap();
        assert!(values_nondecreasing(&sol.levels, 0.0));
        let oracle = brute_force_two_stage(&[(1.0, &f)], &[&m], (-2.0, 2.0), (-3.0, 5.0), 401).unwrap();
        assert!((oracle.value - 2.0).abs() < 1e-12);
        let tail = sol.levels.last().unwrap();
        assert!(tail.feasible && (tail.value - oracle.value).abs() < 1e-2, "{} vs {}", tail.value, oracle.value);
        assert!(sol.rounds.last().unwrap().graph_violation <= RefineOptions::default().tol);
    }

    #[test]
    fn scalar_recourse_matches_penalty_solve() {
        let m = above("x");
        let (rep, _) = represent_graph(&m, 48, &CoverOptions::default()).unwrap();
        let f = Expr::parse("(x-1)^2 + (y+1)^2", &["x", "y"]).unwrap();
        let model = Model {
            bounds: Aabb::new(vec![-2.0, -3.0], vec![2.0, 5.0]).unwrap(),
            n_first: 1,
            objective: vec![Term { weight: 1.0, f, vars: vec![0, 1] }],
            blocks: vec![Block { pmf: m, rep, x: vec![0], y: vec![1] }],
        };
        assert!(model.scalar_blocks());
        let p = model.problem();
        let ln_eps = LevelSchedule::default_for(-0.5).ln_eps()[2];
        for x in [-1.5, -0.3, 0.4, 1.7] {
            let (a, za) = model.recourse_scalar(&p, model.anchor(&[x]).unwrap(), ln_eps).unwrap();
            let (b, _) = model.recourse_general(&p, &[x], ln_eps, None, &SolverOptions::default()).unwrap();
            assert!(p.max_violation(&za, ln_eps) <= 0.0);
            assert!(a <= b + 1e-9 && b - a <= 1e-4 * (1.0 + b), "{a} vs {b} at x = {x}");
        }
    }

    #[test]
    fn refinement_rejects_negative_tolerance() {
        let mut model = Model { bounds: Aabb::cube(1, 1.0), n_first: 1, objective: vec![], blocks: vec![] };
        let r = RefineOptions { tol: -1.0, ..Default::default() };
        assert!(model.solve_refined(&LevelSchedule::default_for(-0.5), &SolverOptions::default(), &r).is_err());
    }
}
