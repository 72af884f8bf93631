//! Set distances: the sampled d_ρ, the integrated distance
//! d̄(A, B) = ∫₀^∞ e^{−ρ} d_ρ(A, B) dρ, its essential supremum over
//! scenarios, a truncated epigraph distance and Painlevé–Kuratowski probes.

use gauss_quad::GaussLaguerre;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::{dist, scale};
use crate::oracles::DistanceOracle;
use crate::sampling::BallSampler;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricConfig {
    pub n_quad: usize,
    pub n_dir: usize,
    /// Epigraph truncation height; max f + 1 when absent.
    #[serde(default)]
    pub alpha_cap: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub exec: Exec,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig { n_quad: 16, n_dir: 512, alpha_cap: None, seed: 0, exec: Exec::Auto }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_quad < 4 {
            return Err(Error::Invalid(format!("n_quad = {} < 4", self.n_quad)));
        }
        if self.n_dir < 64 {
            return Err(Error::Invalid(format!("n_dir = {} < 64", self.n_dir)));
        }
        Ok(())
    }
}

/// A sampled supremum and where it was attained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sampled {
    pub value: f64,
    pub at: Vec<f64>,
}

/// Unit-ball template: the origin, then alternating sphere and interior points.
fn template(dim: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let s = BallSampler::new(dim, seed);
    let mut out = vec![vec![0.0; dim]];
    for i in 1..n {
        out.push(if i % 2 == 1 { s.on_sphere(i) } else { s.in_ball(i) });
    }
    out
}

fn max_gap(a: &dyn DistanceOracle, b: &dyn DistanceOracle, pts: &[Vec<f64>], exec: Exec) -> Sampled {
    let gaps = exec.map_slice(pts, |p| {
        let (da, db) = (a.distance(p), b.distance(p));
        if da == db {
            0.0
        } else {
            (da - db).abs()
        }
    });
    let mut best = Sampled { value: 0.0, at: pts.first().cloned().unwrap_or_default() };
    for (p, g) in pts.iter().zip(gaps) {
        if g > best.value {
            best = Sampled { value: g, at: p.clone() };
        }
    }
    best
}

fn check_dims(a: &dyn DistanceOracle, b: &dyn DistanceOracle) -> Result<usize> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension { expected: a.dim(), got: b.dim() });
    }
    Ok(a.dim())
}

/// Sampled max over ‖x‖ ≤ ρ of |d(x, A) − d(x, B)|; a lower bound on d_ρ.
pub fn d_rho(a: &dyn DistanceOracle, b: &dyn DistanceOracle, rho: f64, cfg: &MetricConfig) -> Result<Sampled> {
    cfg.validate()?;
    if !(rho >= 0.0) {
        return Err(Error::Invalid("rho must be nonnegative".into()));
    }
    let dim = check_dims(a, b)?;
    let pts: Vec<Vec<f64>> = template(dim, cfg.n_dir, cfg.seed).iter().map(|u| scale(u, rho)).collect();
    Ok(max_gap(a, b, &pts, cfg.exec))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbarRow {
    pub rho: f64,
    pub weight: f64,
    pub d_rho: f64,
    pub at: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dbar {
    pub value: f64,
    pub rows: Vec<DbarRow>,
}

/// Gauss–Laguerre quadrature of e^{−ρ} d_ρ. The sample set at each node
/// includes those of all smaller nodes, so the tabulated d_ρ is monotone.
pub fn dbar(a: &dyn DistanceOracle, b: &dyn DistanceOracle, cfg: &MetricConfig) -> Result<Dbar> {
    cfg.validate()?;
    let dim = check_dims(a, b)?;
    let rule = GaussLaguerre::new(cfg.n_quad.try_into().unwrap(), 0.0.try_into().unwrap());
    let mut nodes: Vec<(f64, f64)> = rule.iter().map(|(x, w)| (*x, *w)).collect();
    nodes.sort_by(|p, q| p.0.total_cmp(&q.0));
    let unit = template(dim, cfg.n_dir, cfg.seed);
    let mut running = Sampled { value: 0.0, at: vec![0.0; dim] };
    let mut rows = Vec::with_capacity(nodes.len());
    let mut value = 0.0;
    for (rho, w) in nodes {
        let pts: Vec<Vec<f64>> = unit.iter().map(|u| scale(u, rho)).collect();
        let s = max_gap(a, b, &pts, cfg.exec);
        if s.value > running.value {
            running = s;
        }
        value += w * running.value;
        rows.push(DbarRow { rho, weight: w, d_rho: running.value, at: running.at.clone() });
    }
    Ok(Dbar { value, rows })
}

/// One scenario's pair of sets and its probability weight.
pub struct ScenarioPair<'a> {
    pub a: &'a dyn DistanceOracle,
    pub b: &'a dyn DistanceOracle,
    pub weight: f64,
}

/// Max of d̄ over scenarios with positive weight, and the maximizing index.
pub fn ess_sup_dbar(pairs: &[ScenarioPair<'_>], cfg: &MetricConfig) -> Result<(f64, Option<usize>)> {
    let mut best = (0.0, None);
    for (i, p) in pairs.iter().enumerate() {
        if !(p.weight > 0.0) {
            continue;
        }
        let d = dbar(p.a, p.b, cfg)?.value;
        if best.1.is_none() || d > best.0 {
            best = (d, Some(i));
        }
    }
    Ok(best)
}

fn point_segment(p: &[f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let l2 = d[0] * d[0] + d[1] * d[1];
    let t = if l2 > 0.0 { (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0) } else { 0.0 };
    let q = [a[0] + t * d[0], a[1] + t * d[1]];
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

/// Epigraph {(y, α) : y ∈ [y_0, y_n], g(y) ≤ α ≤ cap} of the piecewise-linear
/// interpolant of a table g(y_i).
#[derive(Debug, Clone)]
pub struct TabulatedEpigraph {
    ys: Vec<f64>,
    gs: Vec<f64>,
    cap: f64,
    segments: Vec<([f64; 2], [f64; 2])>,
}

impl TabulatedEpigraph {
    pub fn new(ys: Vec<f64>, gs: Vec<f64>, cap: f64) -> Result<Self> {
        if ys.len() < 2 || ys.len() != gs.len() {
            return Err(Error::Invalid("epigraph table needs at least two matching nodes".into()));
        }
        if gs.iter().any(|g| !g.is_finite()) {
            return Err(Error::Domain("non-finite epigraph table value".into()));
        }
        let gmin = gs.iter().copied().fold(f64::INFINITY, f64::min);
        if cap < gmin {
            return Err(Error::EmptySet(format!("truncation height {cap} lies below min f = {gmin}")));
        }
        let mut segments = Vec::new();
        let n = ys.len();
        for i in 0..n - 1 {
            let (y0, y1, g0, g1) = (ys[i], ys[i + 1], gs[i], gs[i + 1]);
            // Sub-interval where the interpolant stays below the cap.
            let (mut a, mut b) = (0.0, 1.0);
            if g0 > cap && g1 > cap {
                continue;
            }
            if g0 > cap {
                a = (g0 - cap) / (g0 - g1);
            }
            if g1 > cap {
                b = (cap - g0) / (g1 - g0);
            }
            let pa = [y0 + a * (y1 - y0), g0 + a * (g1 - g0)];
            let pb = [y0 + b * (y1 - y0), g0 + b * (g1 - g0)];
            segments.push((pa, pb));
            segments.push(([pa[0], cap], [pb[0], cap]));
        }
        if gs[0] <= cap {
            segments.push(([ys[0], gs[0]], [ys[0], cap]));
        }
        if gs[n - 1] <= cap {
            segments.push(([ys[n - 1], gs[n - 1]], [ys[n - 1], cap]));
        }
        Ok(TabulatedEpigraph { ys, gs, cap, segments })
    }

    pub fn value(&self, y: f64) -> Option<f64> {
        let n = self.ys.len();
        if y < self.ys[0] || y > self.ys[n - 1] {
            return None;
        }
        let i = self.ys.partition_point(|v| *v <= y).clamp(1, n - 1) - 1;
        let t = (y - self.ys[i]) / (self.ys[i + 1] - self.ys[i]);
        Some(self.gs[i] + t * (self.gs[i + 1] - self.gs[i]))
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        matches!(self.value(p[0]), Some(g) if g <= p[1] && p[1] <= self.cap)
    }
}

impl DistanceOracle for TabulatedEpigraph {
    fn dim(&self) -> usize {
        2
    }

    fn distance(&self, p: &[f64]) -> f64 {
        if self.contains(p) {
            return 0.0;
        }
        let q = [p[0], p[1]];
        self.segments.iter().map(|(a, b)| point_segment(&q, *a, *b)).fold(f64::INFINITY, f64::min)
    }
}

/// Tabulate a scalar function's truncated epigraph on `n` nodes of [lo, hi].
pub fn tabulate_epigraph<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize, cap: f64) -> Result<TabulatedEpigraph> {
    let ys: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let gs = ys.iter().map(|y| f(*y)).collect();
    TabulatedEpigraph::new(ys, gs, cap)
}

/// Nodes used by [`epi_dbar`] to tabulate epigraphs.
pub const EPI_NODES: usize = 801;

/// d̄ between the truncated epigraphs of two scalar functions on [lo, hi].
/// The truncation height is `cfg.alpha_cap`, or max f + 1 on the box.
pub fn epi_dbar<F, G>(f: F, g: G, lo: f64, hi: f64, cfg: &MetricConfig) -> Result<Dbar>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let ys: Vec<f64> = (0..EPI_NODES).map(|i| lo + (hi - lo) * i as f64 / (EPI_NODES - 1) as f64).collect();
    let fs: Vec<f64> = ys.iter().map(|y| f(*y)).collect();
    let gs: Vec<f64> = ys.iter().map(|y| g(*y)).collect();
    let fmax = fs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cap = cfg.alpha_cap.unwrap_or(fmax + 1.0);
    let ef = TabulatedEpigraph::new(ys.clone(), fs, cap)?;
    let eg = TabulatedEpigraph::new(ys, gs, cap)?;
    dbar(&ef, &eg, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PkProbe {
    pub probe: Vec<f64>,
    pub distances: Vec<f64>,
    /// Distance from the probe to the candidate limit.
    pub limit_distance: f64,
    /// Smallest distance over the second half of the sequence.
    pub tail_liminf: f64,
    /// Tail distance below tolerance: the probe lies in the sampled limsup.
    pub in_limsup: bool,
    /// Probe in the limit but the sequence does not approach it.
    pub violates_liminf: bool,
}

/// Painlevé–Kuratowski diagnostics for a finite sequence of sets.
pub fn pk_check(seq: &[&dyn DistanceOracle], limit: &dyn DistanceOracle, probes: &[Vec<f64>], tol: f64) -> Vec<PkProbe> {
    probes
        .iter()
        .map(|p| {
            let distances: Vec<f64> = seq.iter().map(|a| a.distance(p)).collect();
            let half = distances.len() / 2;
            let tail_liminf = distances[half..].iter().copied().fold(f64::INFINITY, f64::min);
            let limit_distance = limit.distance(p);
            let last = distances.last().copied().unwrap_or(f64::INFINITY);
            PkProbe {
                probe: p.clone(),
                in_limsup: tail_liminf <= tol,
                violates_liminf: limit_distance <= tol && last > tol,
                tail_liminf,
                limit_distance,
                distances,
            }
        })
        .collect()
}

/// Distance oracle for a finite point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud(pub Vec<Vec<f64>>);

impl DistanceOracle for PointCloud {
    fn dim(&self) -> usize {
        self.0.first().map_or(0, |p| p.len())
    }
    fn distance(&self, x: &[f64]) -> f64 {
        self.0.iter().map(|p| dist(p, x)).fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::SetOracle;

    fn pt(v: f64) -> SetOracle {
        SetOracle::points(vec![vec![v]]).unwrap()
    }

    #[test]
    fn identical_sets_give_zero() {
        let a = SetOracle::ball(vec![0.0, 0.0], 1.0).unwrap();
        let cfg = MetricConfig::default();
        assert_eq!(dbar(&a, &a, &cfg).unwrap().value, 0.0);
        assert_eq!(d_rho(&a, &a, 2.0, &cfg).unwrap().value, 0.0);
    }

    #[test]
    fn two_points_on_the_line() {
        let cfg = MetricConfig::default();
        let (a, b) = (pt(0.0), pt(1.0));
        for rho in [0.1, 1.0, 5.0] {
            assert!((d_rho(&a, &b, rho, &cfg).unwrap().value - 1.0).abs() < 1e-15);
        }
        assert!((dbar(&a, &b, &cfg).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn concentric_balls() {
        let a = SetOracle::ball(vec![0.0, 0.0], 1.0).unwrap();
        let b = SetOracle::ball(vec![0.0, 0.0], 1.2).unwrap();
        let v = d_rho(&a, &b, 3.0, &MetricConfig::default()).unwrap().value;
        assert!((v - 0.2).abs() < 1e-12);
    }

    #[test]
    fn d_rho_rows_monotone_and_symmetric() {
        let a = SetOracle::ball(vec![0.3, 0.0], 1.0).unwrap();
        let b = SetOracle::boxed(vec![-1.0, -0.5], vec![0.5, 0.5]).unwrap();
        let cfg = MetricConfig::default();
        let ab = dbar(&a, &b, &cfg).unwrap();
        let ba = dbar(&b, &a, &cfg).unwrap();
        assert_eq!(ab.value, ba.value);
        for w in ab.rows.windows(2) {
            assert!(w[1].d_rho >= w[0].d_rho);
        }
    }

    #[test]
    fn ess_sup_ignores_null_scenarios() {
        let cfg = MetricConfig::default();
        let (a, b, c) = (pt(0.0), pt(0.1), pt(0.3));
        let far = pt(100.0);
        let pairs = [
            ScenarioPair { a: &a, b: &b, weight: 0.5 },
            ScenarioPair { a: &a, b: &c, weight: 0.5 },
            ScenarioPair { a: &a, b: &far, weight: 0.0 },
        ];
        let (v, i) = ess_sup_dbar(&pairs, &cfg).unwrap();
        assert!((v - 0.3).abs() < 1e-12);
        assert_eq!(i, Some(1));
    }

    #[test]
    fn epigraph_distance_matches_geometry() {
        let e = tabulate_epigraph(|y| y.abs(), -2.0, 2.0, 401, 3.0).unwrap();
        assert_eq!(e.distance(&[0.0, 1.0]), 0.0);
        assert!((e.distance(&[0.0, -1.0]) - 1.0).abs() < 1e-12);
        assert!((e.distance(&[1.0, 0.0]) - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((e.distance(&[0.0, 4.0]) - 1.0).abs() < 1e-12);
        assert!(matches!(tabulate_epigraph(|y| y.abs(), -2.0, 2.0, 11, -1.0), Err(Error::EmptySet(_))));
    }

    #[test]
    fn epigraph_shift_increases_distance() {
        let cfg = MetricConfig::default();
        let mut last = 0.0;
        for c in [0.1, 0.2, 0.4] {
            let d = epi_dbar(|y: f64| y.abs(), |y: f64| y.abs() + c, -2.0, 2.0, &cfg).unwrap().value;
            assert!(d > last);
            last = d;
        }
    }

    #[test]
    fn pk_shrinking_balls() {
        let seq: Vec<SetOracle> = (1..=8).map(|k| SetOracle::ball(vec![0.0, 0.0], 1.0 + 1.0 / k as f64).unwrap()).collect();
        let refs: Vec<&dyn DistanceOracle> = seq.iter().map(|s| s as &dyn DistanceOracle).collect();
        let lim = SetOracle::ball(vec![0.0, 0.0], 1.0).unwrap();
        let rep = pk_check(&refs, &lim, &[vec![1.0, 0.0], vec![2.0, 0.0]], 1e-9);
        assert!(rep[0].distances.iter().all(|d| *d == 0.0));
        assert!(rep[0].in_limsup && !rep[0].violates_liminf);
        let d = &rep[1].distances;
        assert!(d.windows(2).all(|w| w[1] >= w[0]));
        assert!((d.last().unwrap() - (1.0 - 1.0 / 8.0)).abs() < 1e-12);
        assert!(!rep[1].in_limsup);
    }
}
