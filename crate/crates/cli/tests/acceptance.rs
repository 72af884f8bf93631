//! Runs `check` on every stock instance and grades the twelve acceptance
//! criteria from the named checks in the reports.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use smoothrep_cli::report::{Check, CheckKind};
use smoothrep_cli::{run, Command, Instance, Report};

const SUITE_LIMIT: Duration = Duration::from_secs(60);

fn instances() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("instances");
    let mut v: Vec<PathBuf> =
        std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).filter(|p| p.extension().is_some_and(|e| e == "json")).collect();
    v.sort();
    v
}

struct Run {
    file: String,
    report: Report,
    elapsed: Duration,
}

fn check_all() -> Vec<Run> {
    instances()
        .into_iter()
        .map(|p| {
            let inst = Instance::load(&p).unwrap();
            let t = Instant::now();
            let report = run(Command::Check, &inst).unwrap();
            Run { file: p.file_name().unwrap().to_string_lossy().into_owned(), report, elapsed: t.elapsed() }
        })
        .collect()
}

struct Criterion {
    id: usize,
    name: &'static str,
    /// Selects the checks it covers by name.
    select: fn(&str) -> bool,
    /// Flags that must stay down for the criterion to hold.
    flags: fn(&str) -> bool,
    /// Fragments that some selected check name must contain.
    needs: &'static [&'static str],
}

fn rep_check(n: &str, suffixes: &[&str]) -> bool {
    n.starts_with("rep/") && suffixes.iter().any(|s| n.ends_with(s))
}

fn none(_: &str) -> bool {
    false
}

const CRITERIA: [Criterion; 11] = [
    Criterion { id: 1, name: "bump", select: |n| n.starts_with("bump/"), flags: none, needs: &[] },
    Criterion {
        id: 2,
        name: "zero-set fidelity",
        select: |n| rep_check(n, &["/r_in_zero", "/r_out_positive", "/exterior_coverage", "/cut_disjointness"]),
        flags: none,
        needs: &["rep/unit_ball/", "rep/unit_box/", "rep/triangle/", "rep/two/", "rep/diagonal/"],
    },
    Criterion {
        id: 3,
        name: "calculus",
        select: |n| rep_check(n, &["/gradient_fd", "/hessian_fd", "/hessian_yy_psd"]),
        flags: none,
        needs: &["rep/unit_ball/hessian_yy_psd", "rep/triangle/hessian_yy_psd"],
    },
    Criterion {
        id: 4,
        name: "weak convexity certificate",
        select: |n| rep_check(n, &["/weak_convexity", "/weak_convexity_constant", "/certificate_valid"]),
        flags: none,
        needs: &["rep/diagonal/weak_convexity"],
    },
    Criterion {
        id: 5,
        name: "derivative growth",
        select: |n| rep_check(n, &["/growth_held_out"]),
        flags: none,
        needs: &["rep/unit_ball/growth_held_out"],
    },
    Criterion {
        id: 6,
        name: "level-set laws",
        select: |n| n.starts_with("approx/") && (n.ends_with("/nesting") || n.ends_with("/exterior_probes_excluded")),
        flags: |n| n.starts_with("approx/") && n.ends_with("/boundary_gradient_small"),
        needs: &["approx/unit_ball/nesting"],
    },
    Criterion {
        id: 7,
        name: "set-distance convergence",
        select: |n| {
            n.starts_with("setdist/") || n.ends_with("/dbar_nonincreasing") || n.ends_with("/dbar_tail") || n.ends_with("/sections_bounded")
        },
        flags: none,
        needs: &["approx/unit_ball/dbar_tail", "setdist/unit_ball/unit_ball/value", "setdist/origin/one/value"],
    },
    Criterion {
        id: 8,
        name: "monotone integrand approximation",
        select: |n| n.starts_with("smooth_integrand/"),
        flags: none,
        needs: &["smooth_integrand/abs_epi/tail_gap"],
    },
    Criterion {
        id: 9,
        name: "moreau envelopes",
        select: |n| n.starts_with("moreau/"),
        flags: none,
        needs: &["moreau/abs/value/", "moreau/abs/epi_dbar_decreasing", "moreau/neg_square/not_prox_bounded_detected"],
    },
    Criterion {
        id: 10,
        name: "integral functionals",
        select: |n| n.starts_with("integral/"),
        flags: none,
        needs: &["/feasible_is_zero", "/gradient_fd", "/null_scenario_", "/convexified_feasible"],
    },
    Criterion {
        id: 11,
        name: "demo solvers",
        select: |n| n.starts_with("mpec/") || n.starts_with("two_stage/"),
        flags: none,
        needs: &["mpec/parabola/matches_grid_oracle", "two_stage/affine/matches_grid_oracle", "two_stage/affine/values_nondecreasing"],
    },
];

fn describe(c: &Check) -> String {
    format!("{} = {} ({:?})", c.name, c.value, c.threshold)
}

#[test]
fn acceptance() {
    let runs = check_all();
    let checks: Vec<&Check> = runs.iter().flat_map(|r| &r.report.checks).collect();
    let mut lines = Vec::new();
    let mut hard_failures = Vec::new();
    for cr in &CRITERIA {
        let selected: Vec<&Check> = checks.iter().copied().filter(|c| c.kind == CheckKind::Check && (cr.select)(&c.name)).collect();
        let raised: Vec<&Check> =
            checks.iter().copied().filter(|c| c.kind == CheckKind::Flag && (cr.flags)(&c.name) && !c.passed).collect();
        let missing: Vec<&str> = cr.needs.iter().copied().filter(|p| !selected.iter().any(|c| c.name.contains(p))).collect();
        let failed: Vec<&Check> = selected.iter().copied().filter(|c| !c.passed).collect();
        let checks_ok = failed.is_empty() && missing.is_empty() && !selected.is_empty();
        let ok = checks_ok && raised.is_empty();
        let mut line = format!("{} criterion {:>2} {}: {} checks", if ok { "PASS" } else { "FAIL" }, cr.id, cr.name, selected.len());
        for c in &failed {
            line += &format!("; failed {}", describe(c));
        }
        for m in &missing {
            line += &format!("; missing {m}");
        }
        if !raised.is_empty() {
            line += &format!("; raised {}", raised.iter().map(|c| describe(c)).collect::<Vec<_>>().join(", "));
        }
        lines.push(line);
        // A raised flag records a known limit; everything else must hold.
        if !checks_ok {
            hard_failures.push(cr.id);
        }
    }

    let again = check_all();
    let mut differ = Vec::new();
    for (a, b) in runs.iter().zip(&again) {
        if a.report.canonical_json() != b.report.canonical_json() {
            differ.push(a.file.clone());
        }
    }
    let failing: Vec<&str> = runs.iter().filter(|r| !r.report.passed).map(|r| r.file.as_str()).collect();
    let slow: Vec<String> = runs.iter().filter(|r| r.elapsed > SUITE_LIMIT).map(|r| format!("{} {:.1?}", r.file, r.elapsed)).collect();
    let ok = differ.is_empty() && failing.is_empty();
    let mut line = format!("{} criterion 12 reproducibility: {} instances", if ok { "PASS" } else { "FAIL" }, runs.len());
    if !differ.is_empty() {
        line += &format!("; reports differ for {differ:?}");
    }
    if !failing.is_empty() {
        line += &format!("; check fails on {failing:?}");
    }
    lines.push(line);
    if !ok {
        hard_failures.push(12);
    }

    for r in &runs {
        println!("time {} {:.2?}", r.file, r.elapsed);
    }
    for l in &lines {
        println!("{l}");
    }
    assert!(slow.is_empty(), "suites over {SUITE_LIMIT:?}: {slow:?}");
    assert!(hard_failures.is_empty(), "criteria failing: {hard_failures:?}");
}
