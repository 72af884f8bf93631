use std::sync::OnceLock;

use proptest::prelude::*;
use smoothrep::approx::MoreauJob;
use smoothrep::bump::SmoothBump;
use smoothrep::cuts::{CoverMode, CoverOptions, GraphCut};
use smoothrep::expr::Expr;
use smoothrep::linalg::dist;
use smoothrep::metrics::{dbar, MetricConfig, PointCloud};
use smoothrep::oracles::{make_param_multifunction, Aabb, PmfKind, PmfSpec, SetOracle, ShapeSpec};
use smoothrep::series::{represent_graph, represent_set, SeriesRep};
use smoothrep::stochastic::{IntegralFunctional, ScenarioRep, ScenarioSpace, SelectionVector};

fn shapes() -> Vec<SetOracle> {
    vec![
        SetOracle::ball(vec![0.5, -0.25], 1.0).unwrap(),
        SetOracle::boxed(vec![-1.0, 0.0], vec![1.0, 0.5]).unwrap(),
        SetOracle::polytope(vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, 1.0]], vec![0.0, 0.0, 1.0], None).unwrap(),
    ]
}

/// Halfspace reps of the shapes with their cuts.
fn reps() -> &'static [(SetOracle, SeriesRep, Vec<GraphCut>)] {
    static R: OnceLock<Vec<(SetOracle, SeriesRep, Vec<GraphCut>)>> = OnceLock::new();
    R.get_or_init(|| {
        shapes()
            .into_iter()
            .map(|s| {
                let (rep, cover) =
                    represent_set(&s, CoverMode::Halfspace, 48, &CoverOptions { n_samples: 1024, ..Default::default() }).unwrap();
                (s, rep, cover.cuts)
            })
            .collect()
    })
}

/// Graph rep of M(x) = [x², ∞) on [-1, 1].
fn graph_rep() -> &'static (SeriesRep, Vec<GraphCut>) {
    static R: OnceLock<(SeriesRep, Vec<GraphCut>)> = OnceLock::new();
    R.get_or_init(|| {
        let half = ShapeSpec::Halfspace { normal: vec![-1.0], offset: 0.0, bbox: Some(Aabb::new(vec![0.0], vec![4.0]).unwrap()) };
        let kind = PmfKind::Translated { x_vars: vec!["x".into()], base: half, offset: vec!["x^2".into()] };
        let spec = PmfSpec { kind, domain: Aabb::cube(1, 1.0), value_box: Some(Aabb::new(vec![-2.0], vec![3.0]).unwrap()) };
        let m = make_param_multifunction(&spec, true).unwrap();
        let (rep, cover) = represent_graph(&m, 64, &CoverOptions { n_samples: 1024, ..Default::default() }).unwrap();
        (rep, cover.cuts)
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, 2)
}

fn cloud() -> impl Strategy<Value = PointCloud> {
    prop::collection::vec(point(), 1..4).prop_map(PointCloud)
}

proptest! {
    #[test]
    fn bump_is_convex_nondecreasing_and_one_lipschitz(a in -2.0..3.0f64, b in -2.0..3.0f64) {
        let t = SmoothBump::new();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(t.theta(lo) >= 0.0);
        prop_assert!(t.theta(lo) <= t.theta(hi));
        prop_assert!(t.theta(hi) - t.theta(lo) <= hi - lo + 1e-12);
        prop_assert!(t.theta(0.5 * (lo + hi)) <= 0.5 * (t.theta(lo) + t.theta(hi)) + 1e-12);
        prop_assert!(t.theta(lo) >= lo + t.offset() - 1e-12);
        if lo <= 0.0 {
            prop_assert_eq!(t.theta(lo), 0.0);
        }
    }

    #[test]
    fn projections_are_nonexpansive(p in point(), q in point()) {
        for s in shapes() {
            let (pp, pq) = (s.project(&p), s.project(&q));
            prop_assert!(s.member_tol(&pp, 1e-9));
            prop_assert!(dist(&pp, &pq) <= dist(&p, &q) + 1e-9);
            prop_assert!((s.distance(&p) - s.distance(&q)).abs() <= dist(&p, &q) + 1e-9);
            prop_assert!((s.distance(&p) - dist(&p, &pp)).abs() <= 1e-9);
        }
    }

    #[test]
    fn cuts_miss_the_set_and_phi_vanishes_there(p in point()) {
        for (s, rep, cuts) in reps() {
            let inside = s.project(&p);
            prop_assert!(cuts.iter().all(|c| c.margin(&[], &inside) <= 1e-9));
            prop_assert_eq!(rep.eval(&[], &inside), 0.0);
            prop_assert!(rep.eval(&[], &p) >= 0.0);
        }
    }

    #[test]
    fn graph_cuts_miss_the_graph(x in -1.0..1.0f64, h in 0.0..2.0f64, y1 in -2.0..3.0f64, y2 in -2.0..3.0f64, t in 0.0..1.0f64) {
        let (rep, cuts) = graph_rep();
        let y = x * x + h;
        prop_assert!(cuts.iter().all(|c| c.margin(&[x], &[y]) <= 1e-9));
        prop_assert_eq!(rep.eval(&[x], &[y]), 0.0);
        let chord = (1.0 - t) * rep.eval(&[x], &[y1]) + t * rep.eval(&[x], &[y2]);
        prop_assert!(rep.eval(&[x], &[(1.0 - t) * y1 + t * y2]) <= chord * (1.0 + 1e-10) + 1e-300);
    }

    #[test]
    fn phi_is_convex(p in point(), q in point(), t in 0.0..1.0f64) {
        for (_, rep, _) in reps() {
            let m: Vec<f64> = p.iter().zip(&q).map(|(a, b)| (1.0 - t) * a + t * b).collect();
            let chord = (1.0 - t) * rep.eval(&[], &p) + t * rep.eval(&[], &q);
            prop_assert!(rep.eval(&[], &m) <= chord * (1.0 + 1e-10) + 1e-300);
        }
    }

    #[test]
    fn integral_is_nonnegative_and_convex(p in prop::collection::vec(point(), 3), q in prop::collection::vec(point(), 3), w in prop::collection::vec(0.0..1.0f64, 3)) {
        prop_assume!(w.iter().sum::<f64>() > 1e-3);
        let total: f64 = w.iter().sum();
        let space = ScenarioSpace::from_weights(&w.iter().map(|v| v / total).collect::<Vec<_>>()).unwrap();
        let i = IntegralFunctional::new(space, reps().iter().map(|r| ScenarioRep::new(r.1.clone())).collect()).unwrap();
        let sel = |pts: Vec<Vec<f64>>| SelectionVector::new(pts, 2.0).unwrap();
        let mid: Vec<Vec<f64>> = p.iter().zip(&q).map(|(a, b)| a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()).collect();
        let (vp, vq, vm) = (i.eval(&sel(p)).unwrap(), i.eval(&sel(q)).unwrap(), i.eval(&sel(mid)).unwrap());
        prop_assert!(vp >= 0.0 && vq >= 0.0);
        prop_assert!(vm <= 0.5 * (vp + vq) * (1.0 + 1e-10) + 1e-300);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dbar_is_a_pseudometric(a in cloud(), b in cloud(), c in cloud()) {
        let cfg = MetricConfig { n_dir: 64, ..Default::default() };
        let d = |x: &PointCloud, y: &PointCloud| dbar(x, y, &cfg).unwrap().value;
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert!((d(&a, &b) - d(&b, &a)).abs() <= 1e-12);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
    }

    #[test]
    fn moreau_envelope_lies_below_and_falls_with_lambda(x in -3.0..3.0f64, l1 in 0.05..2.0f64, l2 in 0.05..2.0f64) {
        let f = Expr::parse("abs(z) + 0.25 * z^2", &["z"]).unwrap();
        let (small, large) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
        let e = |lambda: f64| MoreauJob { f: f.clone(), lambda, search: Aabb::cube(1, 5.0), tol: 1e-10 }.value(&[x]).unwrap();
        let fx = f.eval(&[x]);
        prop_assert!(e(small) <= fx + 1e-12);
        prop_assert!(e(large) <= e(small) + 1e-9);
    }
}
