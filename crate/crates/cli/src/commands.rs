//! Subcommands: each runs one task section of an instance into a report.

use std::time::Instant;

use crate::instance::{Instance, InstanceError, Result};
use crate::report::Report;
use crate::{solve, suites};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    BuildRep,
    Check,
    Approx,
    Setdist,
    Moreau,
    SmoothIntegrand,
    Integral,
    SolveMpec,
    #[value(name = "solve-2stage")]
    Solve2Stage,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::BuildRep => "build-rep",
            Command::Check => "check",
            Command::Approx => "approx",
            Command::Setdist => "setdist",
            Command::Moreau => "moreau",
            Command::SmoothIntegrand => "smooth-integrand",
            Command::Integral => "integral",
            Command::SolveMpec => "solve-mpec",
            Command::Solve2Stage => "solve-2stage",
        }
    }
}

struct Timer<'a> {
    report: &'a mut Report,
}

impl Timer<'_> {
    fn section<T>(&mut self, name: &str, f: impl FnOnce(&mut Report) -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f(self.report)?;
        let ms = t.elapsed().as_secs_f64() * 1e3;
        *self.report.timing.sections_ms.entry(name.to_string()).or_insert(0.0) += ms;
        Ok(out)
    }
}

fn require(empty: bool, what: &str) -> Result<()> {
    if empty {
        return Err(InstanceError::Invalid(format!("the instance has no {what} tasks")));
    }
    Ok(())
}

fn rep_targets(inst: &Instance) -> Vec<(String, Option<usize>)> {
    if inst.tasks.build_rep.is_empty() {
        inst.shapes.keys().chain(inst.multifunctions.keys()).map(|n| (n.clone(), None)).collect()
    } else {
        inst.tasks.build_rep.iter().map(|t| (t.target.clone(), t.budget)).collect()
    }
}

fn build_reps(t: &mut Timer<'_>, inst: &Instance) -> Result<()> {
    for (name, budget) in rep_targets(inst) {
        t.section("build_rep", |r| {
            let b = suites::representation(r, inst, &name, budget)?;
            r.artifact(format!("rep_{name}"), &b.rep);
            Ok(())
        })?;
    }
    Ok(())
}

/// Run `cmd` on `inst`. Errors are schema, reference or numerical failures
/// that prevent a report; failed checks are recorded in the report.
pub fn run(cmd: Command, inst: &Instance) -> Result<Report> {
    let start = Instant::now();
    let config = serde_json::to_value(inst).expect("instance serializes");
    let mut report = Report::new(cmd.name(), &inst.name, inst.seed, config);
    let mut t = Timer { report: &mut report };
    let tasks = &inst.tasks;
    let all = cmd == Command::Check;
    if all {
        t.section("bump", |r| {
            suites::bump(r);
            Ok(())
        })?;
        for name in inst.shapes.keys() {
            let o = inst.shape(name)?;
            t.section("oracle", |r| {
                suites::oracle(r, name, &o, inst.seed);
                Ok(())
            })?;
        }
    }
    if all || cmd == Command::BuildRep {
        build_reps(&mut t, inst)?;
    }
    if cmd == Command::Approx {
        require(tasks.approx.is_empty(), "approx")?;
    }
    if all || cmd == Command::Approx {
        for a in &tasks.approx {
            t.section("approx", |r| suites::approx(r, inst, a))?;
        }
    }
    if cmd == Command::Setdist {
        require(tasks.setdist.is_empty(), "setdist")?;
    }
    if all || cmd == Command::Setdist {
        for a in &tasks.setdist {
            t.section("setdist", |r| suites::setdist(r, inst, a))?;
        }
    }
    if cmd == Command::Moreau {
        require(tasks.moreau.is_empty(), "moreau")?;
    }
    if all || cmd == Command::Moreau {
        for a in &tasks.moreau {
            t.section("moreau", |r| suites::moreau(r, inst, a))?;
        }
    }
    if cmd == Command::SmoothIntegrand {
        require(tasks.smooth_integrand.is_empty(), "smooth_integrand")?;
    }
    if all || cmd == Command::SmoothIntegrand {
        for a in &tasks.smooth_integrand {
            t.section("smooth_integrand", |r| suites::smooth_integrand(r, inst, a))?;
        }
    }
    if cmd == Command::Integral {
        require(tasks.integral.is_empty(), "integral")?;
    }
    if all || cmd == Command::Integral {
        for a in &tasks.integral {
            t.section("integral", |r| suites::integral(r, inst, a))?;
        }
    }
    if cmd == Command::SolveMpec {
        require(tasks.solve_mpec.is_empty(), "solve_mpec")?;
    }
    if all || cmd == Command::SolveMpec {
        for (i, a) in tasks.solve_mpec.iter().enumerate() {
            t.section("solve_mpec", |r| solve::run(r, inst, a, "mpec", i).map(|_| ()))?;
        }
    }
    if cmd == Command::Solve2Stage {
        require(tasks.solve_2stage.is_empty(), "solve_2stage")?;
    }
    if all || cmd == Command::Solve2Stage {
        for (i, a) in tasks.solve_2stage.iter().enumerate() {
            t.section("solve_2stage", |r| solve::run(r, inst, a, "two_stage", i).map(|_| ()))?;
        }
    }
    report.timing.total_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}
