//! MPEC and two-stage demo problems built from an instance.

use smoothrep::approx::LevelSchedule;
use smoothrep::expr::Expr;
use smoothrep::oracles::{Aabb, ParamMultifunction};
use smoothrep::series::represent_graph;
use smoothrep::solver::{brute_force_two_stage, values_nondecreasing, Block, Model, RefinedSolution, Term};

use crate::instance::{Instance, InstanceError, Result, SolveTask};
use crate::report::{Report, Table};

pub struct StageProblem {
    pub model: Model,
    pub schedule: LevelSchedule,
    pub weights: Vec<f64>,
    pub objectives: Vec<Expr>,
    pub pmfs: Vec<Option<ParamMultifunction>>,
    /// Positions of each scenario's values in z.
    pub y_index: Vec<Vec<usize>>,
}

/// z = (x, y_1, …, y_S) with ψ_i over (x, y_i) and one constrained block
/// per scenario that has a multifunction.
pub fn build(inst: &Instance, t: &SolveTask) -> Result<StageProblem> {
    let s = t.first_stage.dim();
    let weights = match &t.space {
        Some(sp) => inst.space(sp)?.weights(),
        None => vec![1.0],
    };
    let mut lo = t.first_stage.lo.clone();
    let mut hi = t.first_stage.hi.clone();
    let mut objective = Vec::new();
    let mut blocks = Vec::new();
    let mut objectives = Vec::new();
    let mut pmfs = Vec::new();
    let mut y_index = Vec::new();
    for (sc, &w) in t.scenarios.iter().zip(&weights) {
        let f = inst.objective(&sc.objective)?;
        let pmf = sc.multifunction.as_deref().map(|m| inst.multifunction(m)).transpose()?;
        let vb = match &pmf {
            Some(m) => {
                if m.param_dim != s {
                    return Err(InstanceError::Invalid(format!(
                        "{} has parameter dimension {}",
                        sc.multifunction.as_deref().unwrap_or(""),
                        m.param_dim
                    )));
                }
                m.value_box.clone()
            }
            None => t.value_box.clone().expect("validated"),
        };
        if f.arity() != s + vb.dim() {
            return Err(InstanceError::Invalid(format!(
                "objective {} takes {} variables, expected {}",
                sc.objective,
                f.arity(),
                s + vb.dim()
            )));
        }
        let ys: Vec<usize> = (lo.len()..lo.len() + vb.dim()).collect();
        lo.extend(&vb.lo);
        hi.extend(&vb.hi);
        objective.push(Term { weight: w, f: f.clone(), vars: (0..s).chain(ys.iter().copied()).collect() });
        if let Some(m) = &pmf {
            let (rep, _) = represent_graph(m, inst.representation.budget, &inst.cover_options())?;
            blocks.push(Block { pmf: m.clone(), rep, x: (0..s).collect(), y: ys.clone() });
        }
        objectives.push(f);
        pmfs.push(pmf);
        y_index.push(ys);
    }
    let bounds = Aabb::new(lo, hi)?;
    let schedule = inst.schedule(t.schedule.as_deref())?;
    Ok(StageProblem { model: Model { bounds, n_first: s, objective, blocks }, schedule, weights, objectives, pmfs, y_index })
}

pub fn run(report: &mut Report, inst: &Instance, t: &SolveTask, kind: &str, idx: usize) -> Result<RefinedSolution> {
    let mut sp = build(inst, t)?;
    let sol = sp.model.solve_refined(&sp.schedule, &inst.solver_options(), &inst.solver.refine)?;
    let label = t.label.clone().unwrap_or_else(|| idx.to_string());
    let p = format!("{kind}/{label}");
    let mut levels = Table::new(&["k", "ln_eps", "value", "feasible", "max_violation", "feasible_starts", "adopted_from", "z"]);
    for l in &sol.levels {
        let z: Vec<String> = l.z.iter().map(|v| format!("{v}")).collect();
        levels.push(vec![
            l.k.into(),
            l.ln_eps.into(),
            l.value.into(),
            (l.feasible as usize).into(),
            l.max_violation.into(),
            l.feasible_starts.into(),
            l.adopted_from.unwrap_or(0).into(),
            z.join(" ").into(),
        ]);
    }
    let mut rounds = Table::new(&["round", "value", "graph_violation", "cuts_added", "full_schedule"]);
    for r in &sol.rounds {
        rounds.push(vec![r.round.into(), r.value.into(), r.graph_violation.into(), r.cuts_added.into(), (r.full_schedule as usize).into()]);
    }
    let tail = sol.levels.last().expect("nonempty schedule");
    report.check(format!("{p}/tail_feasible"), tail.feasible, tail.max_violation, Some(0.0), "max ln phi - ln eps at the last level");
    let all = sol.levels.iter().all(|l| l.feasible);
    report.check(format!("{p}/every_level_feasible"), all, sol.levels.iter().filter(|l| l.feasible).count() as f64, None, "");
    report.check(format!("{p}/values_nondecreasing"), values_nondecreasing(&sol.levels, 0.0), tail.value, None, "");
    let gv = sp.model.graph_violation(&tail.z);
    let tol = inst.solver.refine.tol;
    report.check(format!("{p}/graph_violation"), gv <= tol, gv, Some(tol), "max distance of y_i to M_i(x) at the tail");
    if let Some(e) = t.expect {
        let err = (tail.value - e).abs();
        report.check(format!("{p}/expected_value"), err <= 1e-2, tail.value, Some(e), "within 1e-2");
    }
    if let Some(o) = &t.oracle {
        let pm: Option<Vec<&ParamMultifunction>> = sp.pmfs.iter().map(|m| m.as_ref()).collect();
        let pm = pm.ok_or_else(|| InstanceError::Invalid("the grid oracle needs a multifunction per scenario".into()))?;
        let psi: Vec<(f64, &Expr)> = sp.weights.iter().copied().zip(&sp.objectives).collect();
        let g = brute_force_two_stage(&psi, &pm, o.x_range, o.y_range, o.n)?;
        let err = (tail.value - g.value).abs();
        report.check(
            format!("{p}/matches_grid_oracle"),
            err <= o.tol,
            err,
            Some(o.tol),
            format!("grid optimum {} on {} points per axis", g.value, o.n),
        );
        report.result(format!("{p}/grid_oracle"), &g);
    }
    report.result(format!("{p}/solution"), &serde_json::json!({ "value": tail.value, "z": tail.z, "y_index": sp.y_index }));
    report.table(format!("{kind}_{label}_levels"), levels);
    report.table(format!("{kind}_{label}_refinement"), rounds);
    Ok(sol)
}
