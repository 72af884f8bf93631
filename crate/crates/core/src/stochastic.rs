//! Finite scenario spaces, selections and the integral functional
//! I(x) = Σ_i p_i φ_i(x_i), whose zero set is the set of selections.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cuts::{CoverMode, CoverOptions, CoverReport};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::{norm, SquareMatrix};
use crate::oracles::SetOracle;
use crate::series::{represent_set, SeriesRep};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Scenario>", into = "Vec<Scenario>")]
pub struct ScenarioSpace {
    scenarios: Vec<Scenario>,
}

impl TryFrom<Vec<Scenario>> for ScenarioSpace {
    type Error = Error;
    fn try_from(v: Vec<Scenario>) -> Result<Self> {
        ScenarioSpace::new(v)
    }
}

impl From<ScenarioSpace> for Vec<Scenario> {
    fn from(s: ScenarioSpace) -> Self {
        s.scenarios
    }
}

impl ScenarioSpace {
    pub fn new(scenarios: Vec<Scenario>) -> Result<Self> {
        for (i, s) in scenarios.iter().enumerate() {
            if !(s.weight >= 0.0 && s.weight.is_finite()) {
                return Err(Error::Invalid(format!("scenario {} has weight {}", s.id, s.weight)));
            }
            if scenarios[..i].iter().any(|o| o.id == s.id) {
                return Err(Error::Invalid(format!("duplicate scenario id {}", s.id)));
            }
        }
        Ok(ScenarioSpace { scenarios })
    }

    /// Scenarios named "0", "1", … with the given weights.
    pub fn from_weights(w: &[f64]) -> Result<Self> {
        Self::new(w.iter().enumerate().map(|(i, &weight)| Scenario { id: i.to_string(), weight }).collect())
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.scenarios.iter().map(|s| s.weight).collect()
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    pub fn total_mass(&self) -> f64 {
        self.scenarios.iter().map(|s| s.weight).sum()
    }
}

fn ser_exponent<S: Serializer>(p: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if p.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*p)
    }
}

fn de_exponent<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum P {
        N(f64),
        S(String),
    }
    match P::deserialize(d)? {
        P::N(v) => Ok(v),
        P::S(s) if s == "inf" => Ok(f64::INFINITY),
        P::S(s) => Err(serde::de::Error::custom(format!("bad exponent {s}"))),
    }
}

fn default_exponent() -> f64 {
    2.0
}

/// One point per scenario, with the L^p exponent used for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionVector {
    pub points: Vec<Vec<f64>>,
    #[serde(default = "default_exponent", serialize_with = "ser_exponent", deserialize_with = "de_exponent")]
    pub p: f64,
}

impl SelectionVector {
    pub fn new(points: Vec<Vec<f64>>, p: f64) -> Result<Self> {
        if !(p >= 1.0) {
            return Err(Error::Invalid(format!("exponent {p} < 1")));
        }
        if let Some(first) = points.first() {
            if let Some(bad) = points.iter().find(|q| q.len() != first.len()) {
                return Err(Error::Dimension { expected: first.len(), got: bad.len() });
            }
        }
        Ok(SelectionVector { points, p })
    }

    /// ‖x‖_p over the scenario measure.
    pub fn norm(&self, space: &ScenarioSpace) -> f64 {
        let ns = self.points.iter().map(|q| norm(q));
        if self.p.is_infinite() {
            ns.zip(space.weights()).filter(|(_, w)| *w > 0.0).map(|(n, _)| n).fold(0.0, f64::max)
        } else {
            ns.zip(space.weights()).map(|(n, w)| w * n.powf(self.p)).sum::<f64>().powf(1.0 / self.p)
        }
    }
}

/// Per-scenario representation: the selection lives in the value block of
/// the rep at a fixed parameter, or in the parameter block of a rep
/// without values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRep {
    pub rep: SeriesRep,
    #[serde(default)]
    pub param: Vec<f64>,
}

impl ScenarioRep {
    pub fn new(rep: SeriesRep) -> Self {
        ScenarioRep { rep, param: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        if self.rep.m > 0 {
            self.rep.m
        } else {
            self.rep.s
        }
    }

    fn args<'a>(&'a self, z: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        if self.rep.m > 0 {
            (&self.param, z)
        } else {
            (z, &[])
        }
    }

    fn block(&self) -> std::ops::Range<usize> {
        if self.rep.m > 0 {
            self.rep.s..self.rep.s + self.rep.m
        } else {
            0..self.rep.s
        }
    }

    pub fn ln_eval(&self, z: &[f64]) -> f64 {
        let (x, y) = self.args(z);
        self.rep.ln_eval(x, y)
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.ln_eval(z).exp()
    }

    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let (x, y) = self.args(z);
        self.rep.gradient(x, y)[self.block()].to_vec()
    }

    pub fn hessian(&self, z: &[f64]) -> SquareMatrix {
        let (x, y) = self.args(z);
        let r = self.block();
        self.rep.hessian(x, y).block(r.start, r.len())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralFunctional {
    pub space: ScenarioSpace,
    pub reps: Vec<ScenarioRep>,
    #[serde(default)]
    pub exec: Exec,
}

impl IntegralFunctional {
    pub fn new(space: ScenarioSpace, reps: Vec<ScenarioRep>) -> Result<Self> {
        if space.len() != reps.len() {
            return Err(Error::Dimension { expected: space.len(), got: reps.len() });
        }
        Ok(IntegralFunctional { space, reps, exec: Exec::Auto })
    }

    fn check(&self, sel: &SelectionVector) -> Result<()> {
        if sel.points.len() != self.reps.len() {
            return Err(Error::Dimension { expected: self.reps.len(), got: sel.points.len() });
        }
        for (r, q) in self.reps.iter().zip(&sel.points) {
            if r.dim() != q.len() {
                return Err(Error::Dimension { expected: r.dim(), got: q.len() });
            }
        }
        Ok(())
    }

    /// Per-scenario values p_i φ_i(x_i); zero-weight scenarios contribute 0.
    pub fn terms(&self, sel: &SelectionVector) -> Result<Vec<f64>> {
        self.check(sel)?;
        let w = self.space.weights();
        Ok(self.exec.map(self.reps.len(), |i| if w[i] > 0.0 { w[i] * self.reps[i].eval(&sel.points[i]) } else { 0.0 }))
    }

    /// Σ_i p_i φ_i(x_i), summed in scenario order.
    pub fn eval(&self, sel: &SelectionVector) -> Result<f64> {
        Ok(self.terms(sel)?.iter().sum())
    }

    /// ln of [`eval`](Self::eval), finite wherever the value is positive.
    pub fn ln_eval(&self, sel: &SelectionVector) -> Result<f64> {
        self.check(sel)?;
        let w = self.space.weights();
        let ls: Vec<f64> =
            self.exec
                .map(self.reps.len(), |i| if w[i] > 0.0 { w[i].ln() + self.reps[i].ln_eval(&sel.points[i]) } else { f64::NEG_INFINITY });
        let mx = ls.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if mx == f64::NEG_INFINITY {
            return Ok(mx);
        }
        Ok(mx + ls.iter().map(|l| (l - mx).exp()).sum::<f64>().ln())
    }

    /// Component i is p_i ∇φ_i(x_i).
    pub fn grad(&self, sel: &SelectionVector) -> Result<Vec<Vec<f64>>> {
        self.check(sel)?;
        let w = self.space.weights();
        Ok(self.exec.map(self.reps.len(), |i| {
            let r = &self.reps[i];
            if w[i] > 0.0 {
                r.gradient(&sel.points[i]).into_iter().map(|g| w[i] * g).collect()
            } else {
                vec![0.0; r.dim()]
            }
        }))
    }

    /// Block-diagonal second derivative: p_i ∇²φ_i(x_i) per scenario.
    pub fn hessian_blocks(&self, sel: &SelectionVector) -> Result<Vec<SquareMatrix>> {
        self.check(sel)?;
        let w = self.space.weights();
        Ok(self.exec.map(self.reps.len(), |i| {
            let mut h = self.reps[i].hessian(&sel.points[i]);
            for v in h.data.iter_mut() {
                *v *= w[i];
            }
            h
        }))
    }

    /// I(x) ≤ tol.
    pub fn feasible(&self, sel: &SelectionVector, tol: f64) -> Result<bool> {
        Ok(self.eval(sel)? <= tol)
    }
}

pub fn integral_eval(i: &IntegralFunctional, sel: &SelectionVector) -> Result<f64> {
    i.eval(sel)
}

pub fn integral_grad(i: &IntegralFunctional, sel: &SelectionVector) -> Result<Vec<Vec<f64>>> {
    i.grad(sel)
}

pub fn selection_feasible(i: &IntegralFunctional, sel: &SelectionVector, tol: f64) -> Result<bool> {
    if !(tol >= 0.0) {
        return Err(Error::Invalid("tolerance must be nonnegative".into()));
    }
    i.feasible(sel, tol)
}

/// Reps of the closed convex hulls of per-scenario sets, from halfspace
/// cuts placed by support values.
pub fn convexify_scenarios(
    sets: &[SetOracle],
    space: ScenarioSpace,
    budget: usize,
    opts: &CoverOptions,
) -> Result<(IntegralFunctional, Vec<CoverReport>)> {
    let mut reps = Vec::with_capacity(sets.len());
    let mut reports = Vec::with_capacity(sets.len());
    for s in sets {
        let (rep, cov) = represent_set(s, CoverMode::Hull, budget, opts)?;
        reps.push(ScenarioRep::new(rep));
        reports.push(cov);
    }
    Ok((IntegralFunctional::new(space, reps)?, reports))
}

/// Direct per-scenario reps: halfspace cuts for convex sets, ball cuts otherwise.
pub fn represent_scenarios(
    sets: &[SetOracle],
    space: ScenarioSpace,
    budget: usize,
    opts: &CoverOptions,
) -> Result<(IntegralFunctional, Vec<CoverReport>)> {
    let mut reps = Vec::with_capacity(sets.len());
    let mut reports = Vec::with_capacity(sets.len());
    for s in sets {
        let mode = if s.is_convex() { CoverMode::Halfspace } else { CoverMode::Ball };
        let (rep, cov) = represent_set(s, mode, budget, opts)?;
        reps.push(ScenarioRep::new(rep));
        reports.push(cov);
    }
    Ok((IntegralFunctional::new(space, reps)?, reports))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point() -> SetOracle {
        SetOracle::points(vec![vec![-1.0], vec![1.0]]).unwrap()
    }

    fn functional(w: &[f64]) -> IntegralFunctional {
        let sets = vec![SetOracle::ball(vec![0.0, 0.0], 1.0).unwrap(), SetOracle::boxed(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap()];
        represent_scenarios(&sets, ScenarioSpace::from_weights(w).unwrap(), 48, &CoverOptions::default()).unwrap().0
    }

    #[test]
    fn space_validation() {
        assert!(ScenarioSpace::from_weights(&[0.5, -0.1]).is_err());
        let dup = vec![Scenario { id: "a".into(), weight: 1.0 }, Scenario { id: "a".into(), weight: 1.0 }];
        assert!(ScenarioSpace::new(dup).is_err());
        let s: ScenarioSpace = serde_json::from_str(r#"[{"id":"w","weight":0.25}]"#).unwrap();
        assert_eq!(s.total_mass(), 0.25);
    }

    #[test]
    fn feasible_selection_is_zero() {
        let i = functional(&[0.5, 0.5]);
        let sel = SelectionVector::new(vec![vec![0.3, -0.2], vec![0.5, 1.5]], 2.0).unwrap();
        assert_eq!(i.eval(&sel).unwrap(), 0.0);
        assert!(i.grad(&sel).unwrap().iter().flatten().all(|g| *g == 0.0));
        assert!(selection_feasible(&i, &sel, 0.0).unwrap());
    }

    #[test]
    fn infeasible_and_null_scenarios() {
        let sel = SelectionVector::new(vec![vec![1.5, 0.0], vec![0.5, 1.5]], 2.0).unwrap();
        let i = functional(&[0.5, 0.5]);
        assert!(i.eval(&sel).unwrap() > 0.0);
        assert!(!selection_feasible(&i, &sel, 0.0).unwrap());
        assert!(selection_feasible(&i, &sel, f64::INFINITY).unwrap());
        let null = functional(&[0.0, 0.5]);
        assert_eq!(null.eval(&sel).unwrap(), 0.0);
    }

    #[test]
    fn gradient_is_linear_in_weights() {
        let sel = SelectionVector::new(vec![vec![1.2, 0.3], vec![1.1, -0.2]], 2.0).unwrap();
        let a = functional(&[0.25, 0.5]).grad(&sel).unwrap();
        let b = functional(&[0.5, 0.5]).grad(&sel).unwrap();
        for (x, y) in a[0].iter().zip(&b[0]) {
            assert_eq!(2.0 * x, *y);
        }
        assert_eq!(a[1], b[1]);
    }

    #[test]
    fn convexified_two_point_set() {
        let space = ScenarioSpace::from_weights(&[1.0]).unwrap();
        let (hull, reports) = convexify_scenarios(&[two_point()], space.clone(), 16, &CoverOptions::default()).unwrap();
        assert!(reports[0].coverage >= 0.99);
        let (direct, _) = represent_scenarios(&[two_point()], space, 64, &CoverOptions::default()).unwrap();
        let mid = SelectionVector::new(vec![vec![0.0]], 1.0).unwrap();
        assert_eq!(hull.eval(&mid).unwrap(), 0.0);
        assert!(direct.eval(&mid).unwrap() > 0.0);
        for y in [-1.0, -0.4, 1.0] {
            assert_eq!(hull.eval(&SelectionVector::new(vec![vec![y]], 1.0).unwrap()).unwrap(), 0.0);
        }
        assert!(hull.ln_eval(&SelectionVector::new(vec![vec![1.3]], 1.0).unwrap()).unwrap().is_finite());
    }

    #[test]
    fn exponent_serde() {
        let s = SelectionVector::new(vec![vec![1.0]], f64::INFINITY).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert!(j.contains("\"inf\""));
        assert_eq!(serde_json::from_str::<SelectionVector>(&j).unwrap(), s);
    }
}
