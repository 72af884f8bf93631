//! Check suites. Each appends named checks, tables and results to a report.

use smoothrep::approx::{convex_body_sequence, smooth_integrand_from, MoreauJob};
use smoothrep::bump::SmoothBump;
use smoothrep::cuts::{cut_violations, graph_region, sampling_region, CoverMode, CoverReport};
use smoothrep::expr::Expr;
use smoothrep::fd;
use smoothrep::linalg::{dist, dot, norm, sub};
use smoothrep::metrics::{dbar, epi_dbar};
use smoothrep::oracles::{Aabb, ParamMultifunction, SetOracle, ShapeSpec};
use smoothrep::series::{certify, region_samples, represent_graph, represent_set, zero_set_residual, SeriesRep, Target};
use smoothrep::stochastic::{convexify_scenarios, represent_scenarios, IntegralFunctional, SelectionVector};
use smoothrep::Exec;

use crate::instance::{ApproxTask, Instance, IntegralTask, IntegrandTask, MoreauTask, Result, SetDistTask};
use crate::report::{Report, Table};

/// Samples per residual and certificate pass.
pub const N_CERT: usize = 1000;
/// Held-out samples for the growth bound.
pub const N_HELD_OUT: usize = 10_000;
/// Points per finite-difference pass.
pub const N_FD: usize = 100;
/// Cut margins at or below this count as boundary contact.
pub const MARGIN_TOL: f64 = 1e-9;
pub const FD_TOL: f64 = 1e-5;
pub const EIG_TOL: f64 = -1e-8;
/// Exterior distance for the residual r_out.
pub const RESIDUAL_DELTA: f64 = 0.2;
pub const MIN_COVERAGE: f64 = 0.95;
/// Allowed excess of the held-out growth ratio over the fitted constant.
pub const GROWTH_SLACK: f64 = 0.1;
/// Smallest admissible ‖∇_y φ‖ at located boundary points.
pub const MIN_BOUNDARY_GRADIENT: f64 = 1e-8;

/// Transition function: vanishing, linear tail, convexity and offset.
pub fn bump(report: &mut Report) {
    let b = SmoothBump::new();
    let zero = (0..=1000).map(|i| -10.0 * i as f64 / 1000.0).all(|s| b.theta(s) == 0.0);
    report.check("bump/vanishes_below_zero", zero, 0.0, None, "theta(s) == 0 for s in [-10, 0]");
    let tail = (0..=1000).map(|i| 1.0 + 9.0 * i as f64 / 1000.0).map(|s| (b.theta(s) - (s - 0.5)).abs()).fold(0.0, f64::max);
    report.check("bump/linear_tail", tail <= 1e-10, tail, Some(1e-10), "max |theta(s) - (s - 0.5)| on [1, 10]");
    let curv = (0..10_000).map(|i| -0.5 + 2.0 * i as f64 / 9999.0).map(|s| b.theta_012(s).2).fold(f64::INFINITY, f64::min);
    report.check("bump/convex", curv >= -1e-12, curv, Some(-1e-12), "min theta'' on 10^4 points of [-0.5, 1.5]");
    let off = b.offset();
    report.check("bump/offset", (off + 0.5).abs() <= 1e-10, off, Some(-0.5), "b");
    report.result("bump/theta_half", &b.theta(0.5));
}

/// Oracle invariants: 1-Lipschitz distance and, for convex sets, a
/// nonexpansive projection with monotone x − P x.
pub fn oracle(report: &mut Report, name: &str, o: &SetOracle, seed: u64) {
    let region = sampling_region(o.bounding_box(), 0.5);
    let pts = region_samples(&region, 400, seed);
    let mut lip: f64 = 0.0;
    let mut expans: f64 = 0.0;
    let mut mono = f64::INFINITY;
    for w in pts.chunks(2).filter(|w| w.len() == 2) {
        let (p, q) = (&w[0], &w[1]);
        let d = dist(p, q);
        lip = lip.max((o.distance(p) - o.distance(q)).abs() - d);
        if o.is_convex() {
            let (pp, pq) = (o.project(p), o.project(q));
            expans = expans.max(dist(&pp, &pq) - d);
            mono = mono.min(dot(&sub(&sub(p, &pp), &sub(q, &pq)), &sub(p, q)));
        }
    }
    let tol = 1e-9;
    report.check(format!("oracle/{name}/distance_lipschitz"), lip <= tol, lip, Some(tol), "max |d(p) - d(q)| - |p - q|");
    if o.is_convex() {
        report.check(format!("oracle/{name}/projection_nonexpansive"), expans <= tol, expans, Some(tol), "max |Pp - Pq| - |p - q|");
        report.check(format!("oracle/{name}/monotone_residual"), mono >= -tol, mono, Some(-tol), "min <(p - Pp) - (q - Pq), p - q>");
    }
}

pub enum RepTarget {
    Set(SetOracle),
    Graph(ParamMultifunction),
}

pub struct BuiltRep {
    pub rep: SeriesRep,
    pub cover: CoverReport,
    pub target: RepTarget,
    /// Sampling region in stacked (x, y) coordinates.
    pub region: Aabb,
    pub convex_values: bool,
}

impl BuiltRep {
    pub fn residual_target(&self) -> Target<'_> {
        match &self.target {
            RepTarget::Set(o) => Target::Set(o),
            RepTarget::Graph(m) => Target::Graph(m),
        }
    }
}

/// Halfspace cuts for a convex shape, ball cuts for a nonconvex one, graph
/// cuts for a multifunction.
pub fn build(inst: &Instance, name: &str, budget: Option<usize>) -> Result<BuiltRep> {
    let budget = budget.unwrap_or(inst.representation.budget);
    let opts = inst.cover_options();
    if inst.shapes.contains_key(name) {
        let o = inst.shape(name)?;
        let convex = o.is_convex();
        let mode = if convex { CoverMode::Halfspace } else { CoverMode::Ball };
        let (rep, cover) = represent_set(&o, mode, budget, &opts)?;
        let region = sampling_region(o.bounding_box(), 0.5);
        Ok(BuiltRep { rep, cover, target: RepTarget::Set(o), region, convex_values: convex })
    } else {
        let m = inst.multifunction(name)?;
        let (rep, cover) = represent_graph(&m, budget, &opts)?;
        let (dom, vb) = graph_region(&m, 0.5);
        let convex = m.values_convex;
        Ok(BuiltRep { rep, cover, target: RepTarget::Graph(m), region: dom.product(&vb), convex_values: convex })
    }
}

/// Worst relative errors of the analytic gradient and Hessian against
/// Ridders differences, with steps scaled by ‖∇ ln φ‖∞.
pub fn fd_errors(rep: &SeriesRep, pts: &[Vec<f64>], exec: Exec) -> (f64, f64) {
    let per = exec.map_slice(pts, |z| {
        let (x, y) = rep.split(z);
        let d = rep.derivatives(x, y, 2);
        let h = d.hess.expect("second order requested");
        let (_, lg) = rep.ln_grad(x, y);
        let step = 0.05 / lg.iter().map(|v| v.abs()).fold(1.0, f64::max);
        let fdg = fd::gradient(|p| rep.eval_flat(p), z, step);
        let fdh = fd::jacobian(
            |p| {
                let (a, b) = rep.split(p);
                rep.gradient(a, b)
            },
            z,
            step,
        );
        let eg = if norm(&d.grad) > 0.0 { fd::relative_error(&d.grad, &fdg) } else { 0.0 };
        let n = z.len();
        let exact: Vec<f64> = (0..n * n).map(|k| h.get(k / n, k % n)).collect();
        let approx: Vec<f64> = fdh.iter().flatten().copied().collect();
        let eh = if norm(&exact) > 0.0 { fd::relative_error(&exact, &approx) } else { 0.0 };
        (eg, eh)
    });
    per.into_iter().fold((0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)))
}

/// sup ‖Dφ‖ / ((‖y‖ + 1)(‖x‖ + 1)) over `pts`.
pub fn growth_ratio(rep: &SeriesRep, pts: &[Vec<f64>], exec: Exec) -> f64 {
    exec.map_slice(pts, |z| {
        let (x, y) = rep.split(z);
        norm(&rep.gradient(x, y)) / ((norm(y) + 1.0) * (norm(x) + 1.0))
    })
    .into_iter()
    .fold(0.0, f64::max)
}

/// Zero-set fidelity, cut disjointness, calculus and the certificate.
pub fn representation(report: &mut Report, inst: &Instance, name: &str, budget: Option<usize>) -> Result<BuiltRep> {
    let b = build(inst, name, budget)?;
    let seed = inst.seed;
    let p = format!("rep/{name}");
    let rep = &b.rep;
    let res = zero_set_residual(rep, b.residual_target(), N_CERT, RESIDUAL_DELTA, seed, Exec::Auto)?;
    report.check(format!("{p}/r_in_zero"), res.r_in == 0.0, res.r_in, Some(0.0), format!("max phi over {} target samples", res.n_in));
    report.check(
        format!("{p}/r_out_positive"),
        res.ln_r_out > f64::NEG_INFINITY,
        res.ln_r_out,
        None,
        format!("ln of min phi over {} exterior samples at distance >= {}, attained at {:?}", res.n_out, res.delta, res.r_out_at),
    );
    report.check(format!("{p}/exterior_coverage"), res.coverage >= MIN_COVERAGE, res.coverage, Some(MIN_COVERAGE), "");
    let inside: Vec<(Vec<f64>, Vec<f64>)> = match &b.target {
        RepTarget::Set(o) => {
            o.sample(N_CERT, seed).into_iter().map(|u| if rep.s == 0 { (Vec::new(), u) } else { (u, Vec::new()) }).collect()
        }
        RepTarget::Graph(m) => m.sample_graph(N_CERT, seed),
    };
    let viol = cut_violations(&rep.cuts, &inside, MARGIN_TOL);
    report.check(format!("{p}/cut_disjointness"), viol == 0, viol as f64, Some(0.0), "target samples inside some cut");
    let fd_pts = region_samples(&b.region, N_FD, seed ^ 0x5eed);
    let (eg, eh) = fd_errors(rep, &fd_pts, Exec::Auto);
    report.check(format!("{p}/gradient_fd"), eg <= FD_TOL, eg, Some(FD_TOL), "worst relative error");
    report.check(format!("{p}/hessian_fd"), eh <= FD_TOL, eh, Some(FD_TOL), "worst relative error");
    let samples = region_samples(&b.region, N_CERT, seed);
    let cert = certify(rep, &samples, Exec::Auto);
    if b.convex_values && rep.m > 0 {
        report.check(format!("{p}/hessian_yy_psd"), cert.min_yy_eig >= EIG_TOL, cert.min_yy_eig, Some(EIG_TOL), "min eigenvalue");
    }
    if rep.s > 0 {
        let has_ball = rep.cuts.iter().any(|c| c.ball.is_some());
        report.check(format!("{p}/weak_convexity_constant"), !has_ball || cert.l > 0.0, cert.l, None, "L");
    }
    report.check(
        format!("{p}/weak_convexity"),
        cert.min_weak_convexity_eig >= EIG_TOL,
        cert.min_weak_convexity_eig,
        Some(EIG_TOL),
        "min eigenvalue of Dxx phi + L(|y|+1) I",
    );
    report.check(format!("{p}/certificate_valid"), cert.valid, cert.c1.value, None, "fitted constants finite");
    let held_out = region_samples(&b.region, N_HELD_OUT, seed.wrapping_add(0x0ddba11));
    let g = growth_ratio(rep, &held_out, Exec::Auto);
    let bound = (1.0 + GROWTH_SLACK) * cert.c1.value;
    report.check(format!("{p}/growth_held_out"), g <= bound, g, Some(bound), "held-out sup of |D phi| / ((|y|+1)(|x|+1))");
    report.result(format!("{p}/certificate"), &cert);
    report.result(format!("{p}/residual"), &res);
    report.result(
        format!("{p}/cover"),
        &serde_json::json!({ "cuts": rep.len(), "coverage": b.cover.coverage, "skipped": b.cover.skipped, "warning": b.cover.warning }),
    );
    Ok(b)
}

/// Sublevel sets of a convex shape along the schedule.
pub fn approx(report: &mut Report, inst: &Instance, t: &ApproxTask) -> Result<()> {
    let o = inst.shape(&t.target)?;
    let sched = inst.schedule(t.schedule.as_deref())?;
    let (rep, _) = represent_set(&o, CoverMode::Halfspace, inst.representation.budget, &inst.cover_options())?;
    let p = format!("approx/{}", t.target);
    let region = sampling_region(o.bounding_box(), 0.5);
    let samples = region_samples(&region, t.n_probes, inst.seed);
    let lns = Exec::Auto.map_slice(&samples, |z| rep.ln_eval(&[], z));
    let le = sched.ln_eps();
    let nest_bad = lns.iter().filter(|&&l| le.windows(2).any(|w| l <= w[1] && l > w[0])).count();
    report.check(format!("{p}/nesting"), nest_bad == 0, nest_bad as f64, Some(0.0), "samples in a deeper level set only");
    let mut probes = 0;
    let mut kept = 0;
    let mut first_exit = Table::new(&["probe", "distance", "ln_phi", "first_excluding_level"]);
    for (z, &l) in samples.iter().zip(&lns) {
        let d = o.distance(z);
        if d < t.probe_delta {
            continue;
        }
        let k = le.iter().position(|&e| l > e);
        if k.is_none() {
            kept += 1;
        }
        first_exit.push(vec![probes.into(), d.into(), l.into(), k.map_or(0, |k| k + 1).into()]);
        probes += 1;
    }
    report.check(
        format!("{p}/exterior_probes_excluded"),
        kept == 0,
        kept as f64,
        Some(0.0),
        format!("{probes} probes at distance >= {}; count never excluded", t.probe_delta),
    );
    report.table(format!("approx_{}_probes", t.target), first_exit);
    let cfg = inst.metric_config();
    let seq = convex_body_sequence(&rep, &sched, &[], &o, t.n_boundary, &cfg)?;
    let mut levels = Table::new(&["k", "ln_eps", "dbar", "min_ln_grad_norm", "truncated_rays"]);
    let mut min_ln_grad = f64::INFINITY;
    for s in &seq {
        let g = s.boundary.iter().map(|b| b.ln_grad_norm).fold(f64::INFINITY, f64::min);
        min_ln_grad = min_ln_grad.min(g);
        levels.push(vec![s.k.into(), s.ln_eps.into(), s.dbar.value.into(), g.into(), s.truncated_rays.into()]);
    }
    let d: Vec<f64> = seq.iter().map(|s| s.dbar.value).collect();
    let worst_rise = d.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    report.check(format!("{p}/dbar_nonincreasing"), worst_rise <= 0.0, worst_rise, Some(0.0), "largest increase of dbar along k");
    let tail = *d.last().unwrap_or(&f64::INFINITY);
    report.check(format!("{p}/dbar_tail"), tail <= t.dbar_tail_max, tail, Some(t.dbar_tail_max), "dbar at the last level");
    let trunc: usize = seq.iter().map(|s| s.truncated_rays).sum();
    report.check(format!("{p}/sections_bounded"), trunc == 0, trunc as f64, Some(0.0), "truncated rays");
    // At deep levels φ = ε_k is tiny on the boundary and so is its gradient.
    report.flag(
        format!("{p}/boundary_gradient_small"),
        min_ln_grad < MIN_BOUNDARY_GRADIENT.ln(),
        min_ln_grad,
        "min ln |grad_y phi| over located boundary points",
    );
    report.table(format!("approx_{}_levels", t.target), levels);
    report.result(format!("{p}/schedule"), &sched);
    Ok(())
}

pub fn setdist(report: &mut Report, inst: &Instance, t: &SetDistTask) -> Result<()> {
    let (a, b) = (inst.shape(&t.a)?, inst.shape(&t.b)?);
    let cfg = inst.metric_config();
    let ab = dbar(&a, &b, &cfg)?;
    let ba = dbar(&b, &a, &cfg)?;
    let p = format!("setdist/{}/{}", t.a, t.b);
    let asym = (ab.value - ba.value).abs();
    report.check(format!("{p}/symmetric"), asym <= 1e-12, asym, Some(1e-12), "");
    if let Some(e) = t.expect {
        let err = (ab.value - e).abs();
        report.check(format!("{p}/value"), err <= t.tol, ab.value, Some(e), format!("within {}", t.tol));
    }
    let mut rows = Table::new(&["rho", "weight", "d_rho"]);
    for r in &ab.rows {
        rows.push(vec![r.rho.into(), r.weight.into(), r.d_rho.into()]);
    }
    report.table(format!("setdist_{}_{}", t.a, t.b), rows);
    report.result(format!("{p}/dbar"), &ab.value);
    Ok(())
}

pub fn moreau(report: &mut Report, inst: &Instance, t: &MoreauTask) -> Result<()> {
    let f = inst.objective(&t.objective)?;
    let p = format!("moreau/{}", t.objective);
    let mut lambdas = t.lambdas.clone();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    let mut rows = Table::new(&["lambda", "point", "value", "f", "prox_bounded"]);
    let mut unbounded = false;
    let mut below = f64::NEG_INFINITY;
    let mut rise = f64::NEG_INFINITY;
    for (j, &lambda) in lambdas.iter().enumerate() {
        let job = MoreauJob { f: f.clone(), lambda, search: t.search.clone(), tol: 1e-10 };
        for (i, pt) in t.points.iter().enumerate() {
            let r = job.envelope(&pt.x)?;
            let fx = f.eval(&pt.x);
            rows.push(vec![lambda.into(), i.into(), r.value.into(), fx.into(), (r.prox_bounded as usize).into()]);
            if !r.prox_bounded {
                unbounded = true;
                report.flag(
                    format!("{p}/not_prox_bounded/{lambda}/{i}"),
                    true,
                    r.value - r.inflated_value,
                    "value drops on the inflated box",
                );
                continue;
            }
            below = below.max(r.value - fx);
            if j > 0 {
                let prev = MoreauJob { lambda: lambdas[j - 1], ..job.clone() }.value(&pt.x)?;
                rise = rise.max(prev - r.value);
            }
            if let (Some(e), true) = (pt.expect, pt.lambda.unwrap_or(t.lambdas[0]) == lambda) {
                let err = (r.value - e).abs();
                report.check(format!("{p}/value/{i}"), err <= pt.tol, r.value, Some(e), format!("at lambda = {lambda}, within {}", pt.tol));
            }
        }
    }
    if t.expect_not_prox_bounded {
        report.check(format!("{p}/not_prox_bounded_detected"), unbounded, unbounded as usize as f64, None, "expected flag");
        report.table(format!("moreau_{}", t.objective), rows);
        return Ok(());
    }
    report.check(format!("{p}/prox_bounded"), !unbounded, unbounded as usize as f64, None, "");
    if below > f64::NEG_INFINITY {
        report.check(format!("{p}/below_f"), below <= 1e-12, below, Some(1e-12), "max e_lambda f - f");
    }
    if rise > f64::NEG_INFINITY {
        report.check(format!("{p}/monotone_in_lambda"), rise <= 1e-9, rise, Some(1e-9), "max increase of e_lambda f as lambda grows");
    }
    if let Some(w) = t.window {
        let cfg = inst.metric_config();
        let mut dists = Vec::new();
        let mut drow = Table::new(&["lambda", "epi_dbar"]);
        for &lambda in &lambdas {
            let job = MoreauJob { f: f.clone(), lambda, search: t.search.clone(), tol: 1e-10 };
            let d = epi_dbar(|y| job.value(&[y]).unwrap_or(f64::NAN), |y| f.eval(&[y]), w.0, w.1, &cfg)?.value;
            drow.push(vec![lambda.into(), d.into()]);
            dists.push(d);
        }
        let worst = dists.windows(2).map(|d| d[1] - d[0]).fold(f64::NEG_INFINITY, f64::max);
        report.check(format!("{p}/epi_dbar_decreasing"), worst < 0.0, worst, Some(0.0), "largest change as lambda halves");
        report.table(format!("moreau_{}_epi_dbar", t.objective), drow);
    }
    report.table(format!("moreau_{}", t.objective), rows);
    Ok(())
}

pub fn smooth_integrand(report: &mut Report, inst: &Instance, t: &IntegrandTask) -> Result<()> {
    let Some(ShapeSpec::Epigraph { f, vars, lo, hi }) = inst.shapes.get(&t.target) else { unreachable!("validated as a scalar epigraph") };
    let names: Vec<&str> = vars.iter().map(String::as_str).collect();
    let f = Expr::parse(f, &names).map_err(crate::instance::InstanceError::from)?;
    let o = inst.shape(&t.target)?;
    let sched = inst.schedule(t.schedule.as_deref())?;
    let (rep, _) = represent_set(&o, CoverMode::Halfspace, inst.representation.budget, &inst.cover_options())?;
    let n = t.n_grid.max(2);
    let ys: Vec<f64> = (0..n).map(|i| lo[0] + (hi[0] - lo[0]) * i as f64 / (n - 1) as f64).collect();
    let fs: Vec<f64> = ys.iter().map(|y| f.eval(&[*y])).collect();
    let mut prev: Option<Vec<f64>> = None;
    let mut above = f64::NEG_INFINITY;
    let mut drop = f64::NEG_INFINITY;
    let mut levels = Table::new(&["k", "ln_eps", "max_gap"]);
    let mut gap = f64::INFINITY;
    for (k, &le) in sched.ln_eps().iter().enumerate() {
        let vals = Exec::Auto
            .map(n, |i| smooth_integrand_from(&rep, le, &[], &[ys[i]], fs[i], 1e6))
            .into_iter()
            .collect::<smoothrep::Result<Vec<f64>>>()?;
        gap = vals.iter().zip(&fs).map(|(v, f)| f - v).fold(0.0, f64::max);
        above = above.max(vals.iter().zip(&fs).map(|(v, f)| v - f).fold(f64::NEG_INFINITY, f64::max));
        if let Some(p) = &prev {
            drop = drop.max(p.iter().zip(&vals).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max));
        }
        levels.push(vec![(k + 1).into(), le.into(), gap.into()]);
        prev = Some(vals);
    }
    let p = format!("smooth_integrand/{}", t.target);
    report.check(format!("{p}/below_f"), above <= 0.0, above, Some(0.0), "max f^k - f over the grid");
    report.check(format!("{p}/nondecreasing"), drop <= 0.0, drop, Some(0.0), "max f^k - f^(k+1) over the grid");
    report.check(format!("{p}/tail_gap"), gap <= t.tail_gap_max, gap, Some(t.tail_gap_max), "max |f^k - f| at the last level");
    report.table(format!("smooth_integrand_{}", t.target), levels);
    Ok(())
}

fn flat(points: &[Vec<f64>]) -> Vec<f64> {
    points.iter().flatten().copied().collect()
}

fn unflat(z: &[f64], like: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(like.len());
    let mut i = 0;
    for p in like {
        out.push(z[i..i + p.len()].to_vec());
        i += p.len();
    }
    out
}

fn selection_grad_error(i: &IntegralFunctional, sel: &SelectionVector) -> smoothrep::Result<f64> {
    let v = i.eval(sel)?;
    let g = flat(&i.grad(sel)?);
    let step = 0.05 / (g.iter().map(|x| x.abs()).fold(0.0, f64::max) / v).max(1.0);
    let fdg = fd::gradient(
        |z| i.eval(&SelectionVector { points: unflat(z, &sel.points), p: sel.p }).unwrap_or(f64::NAN),
        &flat(&sel.points),
        step,
    );
    Ok(fd::relative_error(&g, &fdg))
}

/// Integral functional of scenario reps: exact zeros on feasible
/// selections, gradients, null scenarios and convexified midpoints.
pub fn integral(report: &mut Report, inst: &Instance, t: &IntegralTask) -> Result<()> {
    let space = inst.space(&t.space)?;
    let sets: Vec<SetOracle> = t.sets.iter().map(|s| inst.shape(s)).collect::<Result<_>>()?;
    let budget = inst.representation.budget;
    let opts = inst.cover_options();
    let (direct, _) = represent_scenarios(&sets, space.clone(), budget, &opts)?;
    let (hull, _) = convexify_scenarios(&sets, space.clone(), budget, &opts)?;
    let w = space.weights();
    let p = format!("integral/{}", t.space);
    let mut rows = Table::new(&["selection", "feasible", "value", "norm"]);
    for s in &t.selections {
        let sel = SelectionVector::new(s.points.clone(), s.p)?;
        let truth = s.points.iter().zip(&sets).zip(&w).all(|((x, o), &wi)| wi == 0.0 || o.member(x));
        let v = direct.eval(&sel)?;
        rows.push(vec![s.name.clone().into(), (truth as usize).into(), v.into(), sel.norm(&space).into()]);
        if truth {
            report.check(format!("{p}/{}/feasible_is_zero", s.name), v == 0.0, v, Some(0.0), "");
        } else {
            report.check(format!("{p}/{}/infeasible_is_positive", s.name), v > 0.0, v, None, "");
            let e = selection_grad_error(&direct, &sel)?;
            report.check(format!("{p}/{}/gradient_fd", s.name), e <= FD_TOL, e, Some(FD_TOL), "worst relative error");
        }
        for (k, _) in w.iter().enumerate().filter(|(_, &wi)| wi == 0.0) {
            let mut moved = s.points.clone();
            for c in &mut moved[k] {
                *c += 3.0;
            }
            let v2 = direct.eval(&SelectionVector::new(moved, s.p)?)?;
            let gk = norm(&direct.grad(&sel)?[k]);
            report.check(format!("{p}/{}/null_scenario_{k}_ignored", s.name), v2 == v && gk == 0.0, (v2 - v).abs() + gk, Some(0.0), "");
        }
    }
    for (a, b) in &t.midpoints {
        let pa = &t.selections.iter().find(|s| &s.name == a).expect("validated").points;
        let pb = &t.selections.iter().find(|s| &s.name == b).expect("validated").points;
        let mid: Vec<Vec<f64>> = pa.iter().zip(pb).map(|(u, v)| u.iter().zip(v).map(|(x, y)| 0.5 * (x + y)).collect()).collect();
        let sel = SelectionVector::new(mid, 2.0)?;
        let vh = hull.eval(&sel)?;
        let vd = direct.eval(&sel)?;
        report.check(format!("{p}/midpoint_{a}_{b}/convexified_feasible"), vh == 0.0, vh, Some(0.0), "");
        rows.push(vec![format!("midpoint_{a}_{b}").into(), ((vh == 0.0) as usize).into(), vd.into(), sel.norm(&space).into()]);
    }
    report.table(format!("integral_{}", t.space), rows);
    Ok(())
}
