//! Experiments: the projection net `P(T_t x)` against the mean vector, the
//! attractive-to-fixed pipeline, and the three counterexamples.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attractive::{
    attractive_to_fixed, build_model, is_attractive_on, project_onto_model, AttractiveModel, Battery,
    PipelineReport,
};
use crate::convex::{ConvexSet, DYKSTRA_MAX_ITER};
use crate::error::{Error, Result};
use crate::hilbert::Vector;
use crate::mappings::{
    check_asymptotically_nonexpansive, check_asymptotically_nonexpansive_on, check_generalized_hybrid_on,
    check_nonexpansive, check_nonexpansive_on, Mapping, PropertyReport, Witness,
};
use crate::means::{mean_vector, stage_average, AveragingScheme, MeanVectorReport};
use crate::semigroup::{Address, Boundedness, SemigroupAction};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Cauchy tolerance for the mean vector.
    pub mean: f64,
    /// Consecutive Cauchy passes required.
    pub window: usize,
    /// `||P(T_t x) - T_mu x||` allowed for agreement.
    pub agree: f64,
    /// Slack for the non-increase of `||T_t x - P(T_t x)||`.
    pub monotone: f64,
    pub dykstra: f64,
    /// Rows used for the Cauchy test of the projection net.
    pub net_window: usize,
    pub attractive: f64,
    pub fixed: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            mean: 1e-8,
            window: 3,
            agree: 1e-5,
            monotone: 1e-9,
            dykstra: 1e-12,
            net_window: 20,
            attractive: 1e-6,
            fixed: 1e-6,
        }
    }
}

impl Tolerances {
    /// Multiplies every tolerance (not the window counts) by `factor`.
    pub fn scaled(self, factor: f64) -> Tolerances {
        Tolerances {
            mean: self.mean * factor,
            agree: self.agree * factor,
            monotone: self.monotone * factor,
            dykstra: self.dykstra * factor,
            attractive: self.attractive * factor,
            fixed: self.fixed * factor,
            ..self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Agree,
    Disagree,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub element: Address,
    pub point: Vector,
    pub projected: Vector,
    /// `||T_t x - P(T_t x)||`.
    pub distance: f64,
    pub projection_residual: f64,
    /// Uniform average of the points in this and all earlier rows.
    pub running_average: Vector,
    pub gap_to_mean: Option<f64>,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErgodicTrace {
    pub rows: Vec<TraceRow>,
    /// `||x - P(x)||`, the distance before any element acts.
    pub start_distance: f64,
    pub flagged: usize,
    /// Largest `||P_i - P_last||` over the last `net_window` rows.
    pub net_residual: f64,
    pub mean: Option<MeanVectorReport>,
    pub final_gap: Option<f64>,
    pub verdict: Verdict,
    pub model_size: usize,
    pub tolerances: Tolerances,
}

impl ErgodicTrace {
    pub fn last_projection(&self) -> Option<&Vector> {
        self.rows.last().map(|r| &r.projected)
    }
}

/// Elements preceding `s` by one generator, `None` standing for the
/// identity (the start point).
fn predecessors(s: &Address) -> Vec<Option<Address>> {
    match s {
        Address::Multi(n) => (0..n.len())
            .filter(|&i| n[i] > 0)
            .map(|i| {
                let mut m = n.clone();
                m[i] -= 1;
                m.iter().any(|&v| v > 0).then_some(Address::Multi(m))
            })
            .collect(),
        Address::Word(w) => vec![(w.len() > 1).then(|| Address::Word(w[1..].to_vec()))],
    }
}

/// Projects the first `horizon` orbit points onto `model` and checks that
/// the distance to the model never increases along the semigroup order.
pub fn run_projection_net(
    action: &SemigroupAction,
    model: &AttractiveModel,
    x: &Vector,
    horizon: usize,
    tol: &Tolerances,
) -> Result<ErgodicTrace> {
    let orbit = action.orbit(x, horizon)?;
    if orbit.verdict == Boundedness::No {
        return Err(Error::DivergingOrbit { norm: orbit.max_norm, threshold: crate::semigroup::DEFAULT_BLOWUP });
    }
    let start = project_onto_model(model, x, DYKSTRA_MAX_ITER, tol.dykstra)?;
    let start_distance = x.dist(&start.point)?;
    let projections: Vec<_> = orbit
        .points
        .par_iter()
        .map(|(_, p)| project_onto_model(model, p, DYKSTRA_MAX_ITER, tol.dykstra))
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(orbit.points.len());
    let mut distance_of: HashMap<Address, f64> = HashMap::new();
    let mut sum = x.scale(0.0);
    for (k, ((s, p), proj)) in orbit.points.into_iter().zip(projections).enumerate() {
        let distance = p.dist(&proj.point)?;
        let flagged = predecessors(&s).iter().any(|pred| {
            let before = match pred {
                None => Some(start_distance),
                Some(t) => distance_of.get(t).copied(),
            };
            before.is_some_and(|b| distance > b + tol.monotone)
        });
        distance_of.insert(s.clone(), distance);
        sum = sum.add(&p)?;
        rows.push(TraceRow {
            element: s,
            point: p,
            projected: proj.point,
            distance,
            projection_residual: proj.residual,
            running_average: sum.scale(1.0 / (k + 1) as f64),
            gap_to_mean: None,
            flagged,
        });
    }
    let net_residual = match rows.last() {
        None => f64::INFINITY,
        Some(last) => {
            let from = rows.len().saturating_sub(tol.net_window);
            let mut r = 0.0f64;
            for row in &rows[from..] {
                r = r.max(row.projected.dist(&last.projected)?);
            }
            r
        }
    };
    Ok(ErgodicTrace {
        flagged: rows.iter().filter(|r| r.flagged).count(),
        rows,
        start_distance,
        net_residual,
        mean: None,
        final_gap: None,
        verdict: Verdict::Inconclusive,
        model_size: model.len(),
        tolerances: *tol,
    })
}

#[derive(Clone, Debug)]
pub struct ErgodicSetup {
    pub action: SemigroupAction,
    pub scheme: AveragingScheme,
    pub start: Vector,
    pub battery: Battery,
    pub horizon: usize,
    pub max_stage: usize,
    pub tolerances: Tolerances,
}

/// Builds the model from the battery plus the orbit of the start point (each
/// paired with every generator), so that the model constraints include the
/// ones the monotonicity argument uses.
pub fn ergodic_model(setup: &ErgodicSetup) -> Result<AttractiveModel> {
    let mut model = build_model(&setup.action, &setup.battery.points, &setup.battery.elements)?;
    let orbit = setup.action.orbit(&setup.start, setup.horizon)?;
    let mut sources = vec![setup.start.clone()];
    sources.extend(orbit.points.into_iter().map(|(_, p)| p));
    model.extend(&setup.action, &sources, &setup.action.generator_addresses())?;
    Ok(model)
}

/// Compares the limit of the projection net with the mean vector.
pub fn run_ergodic_check(setup: &ErgodicSetup) -> Result<ErgodicTrace> {
    let tol = setup.tolerances;
    let mean = mean_vector(&setup.scheme, &setup.action, &setup.start, tol.mean, setup.max_stage, tol.window)?;
    let model = ergodic_model(setup)?;
    let excess = model.max_excess(&mean.value)?;
    if excess > tol.attractive * (1.0 + mean.value.norm()) {
        return Err(Error::ModelEmpty(format!(
            "the mean vector {} lies {excess:.3e} outside the model",
            mean.value
        )));
    }
    let mut trace = run_projection_net(&setup.action, &model, &setup.start, setup.horizon, &tol)?;
    for row in &mut trace.rows {
        row.gap_to_mean = Some(row.projected.dist(&mean.value)?);
    }
    let gap = trace.rows.last().and_then(|r| r.gap_to_mean).unwrap_or(f64::INFINITY);
    trace.verdict = if gap <= tol.agree {
        Verdict::Agree
    } else if mean.converged && trace.net_residual <= tol.agree {
        Verdict::Disagree
    } else {
        Verdict::Inconclusive
    };
    trace.final_gap = Some(gap);
    trace.mean = Some(mean);
    Ok(trace)
}

/// Mean vector, its attractiveness on the battery, and the pipeline
/// `u = P_C(T_mu x)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineExperiment {
    pub mean: MeanVectorReport,
    pub attractive: PropertyReport,
    pub pipeline: Option<PipelineReport>,
    pub passed: bool,
}

pub fn run_pipeline(
    action: &SemigroupAction,
    scheme: &AveragingScheme,
    x: &Vector,
    battery: &Battery,
    c: &ConvexSet,
    max_stage: usize,
    tol: &Tolerances,
) -> Result<PipelineExperiment> {
    let mean = mean_vector(scheme, action, x, tol.mean, max_stage, tol.window)?;
    let attractive = is_attractive_on(&mean.value, action, battery, tol.attractive)?;
    let pipeline = if attractive.holds {
        Some(attractive_to_fixed(&mean.value, c, action, battery, tol.attractive)?)
    } else {
        None
    };
    let passed = mean.converged && pipeline.as_ref().is_some_and(|p| p.is_fixed(tol.fixed));
    Ok(PipelineExperiment { mean, attractive, pipeline, passed })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Counterexample {
    #[serde(rename = "shift-remark33")]
    Shift,
    #[serde(rename = "translation")]
    Translation,
    #[serde(rename = "sqrt-section3")]
    Sqrt,
}

impl Counterexample {
    pub const ALL: [Counterexample; 3] = [Counterexample::Shift, Counterexample::Translation, Counterexample::Sqrt];

    pub fn name(self) -> &'static str {
        match self {
            Counterexample::Shift => "shift-remark33",
            Counterexample::Translation => "translation",
            Counterexample::Sqrt => "sqrt-section3",
        }
    }

    pub fn from_name(name: &str) -> Option<Counterexample> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, value: f64, detail: String) -> Check {
        Check { name: name.to_string(), passed, value, detail }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CounterexampleReport {
    pub name: String,
    pub checks: Vec<Check>,
    /// Refuting witnesses (shift only): candidate `a` and the `x`, `s`
    /// violating `||a - T_s x|| <= ||a - x||`.
    pub witnesses: Vec<(Vector, Witness)>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleParams {
    /// Grid points per axis for shift candidates.
    pub grid: usize,
    pub grid_radius: f64,
    pub translation: Vec<f64>,
    pub cesaro_stage: usize,
    pub n_tail: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for CounterexampleParams {
    fn default() -> Self {
        CounterexampleParams {
            grid: 11,
            grid_radius: 2.0,
            translation: vec![1.0, 0.0],
            cesaro_stage: 1000,
            n_tail: 50,
            samples: 64,
            seed: 0,
        }
    }
}

pub fn run_counterexample(which: Counterexample, params: &CounterexampleParams) -> Result<CounterexampleReport> {
    let (checks, witnesses) = match which {
        Counterexample::Shift => shift_checks(params)?,
        Counterexample::Translation => (translation_checks(params)?, Vec::new()),
        Counterexample::Sqrt => (sqrt_checks(params)?, Vec::new()),
    };
    Ok(CounterexampleReport {
        name: which.name().to_string(),
        passed: checks.iter().all(|c| c.passed),
        checks,
        witnesses,
    })
}

type Found = (Vec<Check>, Vec<(Vector, Witness)>);

fn shift_checks(params: &CounterexampleParams) -> Result<Found> {
    let shift = Mapping::shift()?;
    let action = SemigroupAction::single(shift.clone());
    let zero = Vector::sparse_zero();
    let residual = shift.apply(&zero)?.dist(&zero)?;
    let mut checks = vec![Check::new("fixed point at 0", residual == 0.0, residual, "||T0 - 0||".into())];

    // probes along e1 refute any candidate (||a - T(te1)||^2 - ||a - te1||^2
    // = t^2 - 2 t a2), random domain points add variety
    let mut points: Vec<Vector> =
        [0.5, 1.0, 2.0, 4.0, 8.0, 16.0].iter().map(|&t| Vector::sparse([(0, t)])).collect::<Result<_>>()?;
    points.extend(action.domain().sample(params.samples, 2.0 * params.grid_radius, params.seed)?);
    let battery = Battery { points, elements: vec![Address::one()] };

    let k = params.grid.max(1);
    let step = if k > 1 { 2.0 * params.grid_radius / (k - 1) as f64 } else { 0.0 };
    let coord = |i: usize| if k > 1 { -params.grid_radius + i as f64 * step } else { 0.0 };
    let candidates: Vec<Vector> = (0..k * k * k)
        .map(|m| Vector::sparse([(0, coord(m / (k * k))), (1, coord(m / k % k)), (2, coord(m % k))]))
        .collect::<Result<_>>()?;
    let reports: Vec<PropertyReport> =
        candidates.par_iter().map(|a| is_attractive_on(a, &action, &battery, 0.0)).collect::<Result<_>>()?;
    let mut witnesses = Vec::new();
    let mut weakest = f64::INFINITY;
    for (a, r) in candidates.into_iter().zip(reports) {
        if let Some(w) = r.witness {
            weakest = weakest.min(w.violation());
            witnesses.push((a, w));
        }
    }
    let total = k * k * k;
    checks.push(Check::new(
        "every grid candidate refuted",
        witnesses.len() == total,
        weakest,
        format!("{} of {total} candidates refuted; smallest violation {weakest:.3e}", witnesses.len()),
    ));
    // pairs differing in the first coordinate are stretched by the shift
    let ne = check_nonexpansive(&shift, params.samples, 2.0, 1e-12, params.seed)?;
    checks.push(Check::new(
        "not nonexpansive in l2",
        !ne.holds,
        ne.worst,
        "||Tx - Ty||^2 = ||x - y||^2 + (x1 - y1)^2".into(),
    ));
    Ok((checks, witnesses))
}

fn translation_checks(params: &CounterexampleParams) -> Result<Vec<Check>> {
    let v = Vector::try_dense(params.translation.clone())?;
    let vn = v.norm();
    if vn == 0.0 {
        return Err(Error::InvalidMapping("translation vector must be nonzero".into()));
    }
    let t = Mapping::translation(v.clone())?;
    let action = SemigroupAction::single(t.clone());
    let ne = check_nonexpansive(&t, params.samples, 10.0, 1e-9, params.seed)?;
    let mut checks = vec![Check::new("nonexpansive", ne.holds, ne.worst, "sampled pairs".into())];

    let pts = t.domain().sample(params.samples, 10.0, params.seed)?;
    let mut min_move = f64::INFINITY;
    for x in &pts {
        min_move = min_move.min(t.apply(x)?.dist(x)?);
    }
    checks.push(Check::new(
        "fixed-point free",
        min_move >= vn * (1.0 - 1e-12),
        min_move,
        format!("min ||Tx - x|| = {min_move} against ||v|| = {vn}"),
    ));

    let zero = v.scale(0.0);
    let orbit = action.orbit_with_threshold(&zero, 100, 50.0 * vn)?;
    checks.push(Check::new(
        "unbounded orbit",
        orbit.verdict == Boundedness::No,
        orbit.max_norm,
        format!("max norm {} after 100 steps, threshold {}", orbit.max_norm, 50.0 * vn),
    ));

    let n = params.cesaro_stage;
    let avg = stage_average(&AveragingScheme::Cesaro, &action, &zero, n)?;
    let expected = (n as f64 + 1.0) / 2.0 * vn;
    let rel = (avg.norm() - expected).abs() / expected;
    checks.push(Check::new(
        "diverging Cesaro average",
        rel <= 1e-9,
        avg.norm(),
        format!("||avg_{n}|| = {} against (n+1)/2 ||v|| = {expected}", avg.norm()),
    ));
    Ok(checks)
}

fn sqrt_checks(params: &CounterexampleParams) -> Result<Vec<Check>> {
    let m = Mapping::sqrt_section()?;
    let x0 = Vector::dense(vec![0.0]);
    let x1 = Vector::dense(vec![0.01]);
    let probe = check_nonexpansive_on(&m, &[x0.clone(), x1.clone()], 1e-12)?;
    let gap = probe.worst;
    let at_witness = probe.witness.as_ref().is_some_and(|w| w.x == x0 && w.y.as_ref() == Some(&x1));
    let mut checks = vec![Check::new(
        "nonexpansive fails at (0, 0.01)",
        !probe.holds && at_witness && gap >= 0.89,
        gap,
        probe.witness.map_or("no witness".into(), |w| format!("|T0 - T0.01| = {} vs |0 - 0.01| = {}", w.lhs, w.rhs)),
    )];
    let sampled = check_nonexpansive(&m, params.samples, 1.0, 1e-12, params.seed)?;
    checks.push(Check::new("nonexpansive fails on samples", !sampled.holds, sampled.worst, "sampled pairs".into()));

    let mut pts = vec![x0, x1];
    pts.extend(m.domain().sample(params.samples, 1.0, params.seed)?);
    let asym = check_asymptotically_nonexpansive_on(&m, &pts, params.n_tail, 1e-9)?;
    checks.push(Check::new(
        "asymptotic surrogate passes",
        asym.holds,
        asym.worst,
        asym.note.clone().unwrap_or_default(),
    ));
    let asym = check_asymptotically_nonexpansive(&m, params.samples, 1.0, params.n_tail, 1e-9, params.seed + 1)?;
    checks.push(Check::new(
        "asymptotic surrogate passes on fresh samples",
        asym.holds,
        asym.worst,
        asym.note.unwrap_or_default(),
    ));
    Ok(checks)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HybridReport {
    pub alpha: f64,
    pub beta: f64,
    pub hybrid: PropertyReport,
    pub nonexpansive: PropertyReport,
    pub mean: MeanVectorReport,
    pub attractive: PropertyReport,
    pub passed: bool,
}

/// For a generalized hybrid map that is not nonexpansive: checks the hybrid
/// inequality on all ordered pairs of `grid`, and that the mean vector of
/// `x` is attractive on `battery`.
#[allow(clippy::too_many_arguments)]
pub fn run_hybrid_check(
    m: &Mapping,
    alpha: f64,
    beta: f64,
    grid: &[Vector],
    scheme: &AveragingScheme,
    x: &Vector,
    battery: &Battery,
    max_stage: usize,
    tol: &Tolerances,
) -> Result<HybridReport> {
    let hybrid = check_generalized_hybrid_on(m, alpha, beta, grid, 1e-12)?;
    let nonexpansive = check_nonexpansive_on(m, grid, 1e-12)?;
    let action = SemigroupAction::single(m.clone());
    let mean = mean_vector(scheme, &action, x, tol.mean, max_stage, tol.window)?;
    let attractive = is_attractive_on(&mean.value, &action, battery, tol.attractive)?;
    let passed = hybrid.holds && !nonexpansive.holds && mean.converged && attractive.holds;
    Ok(HybridReport { alpha, beta, hybrid, nonexpansive, mean, attractive, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attractive::elements_up_to;
    use crate::convex::Space;
    use crate::means::WeightRule;

    fn d(v: &[f64]) -> Vector {
        Vector::dense(v.to_vec())
    }

    fn bump() -> AveragingScheme {
        AveragingScheme::Weighted(WeightRule::Bump)
    }

    fn setup(action: SemigroupAction, start: Vector, centre: &Vector, horizon: usize) -> ErgodicSetup {
        let battery = Battery::sample(&action, 100, 5.0, Some(centre), 1, 7).unwrap();
        ErgodicSetup {
            action,
            scheme: bump(),
            start,
            battery,
            horizon,
            max_stage: 1 << 14,
            tolerances: Tolerances::default(),
        }
    }

    #[test]
    fn rotation_net_is_constant_at_centre() {
        let p = d(&[1.0, -2.0]);
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let a = SemigroupAction::single(Mapping::rotation(p.clone(), golden).unwrap());
        let s = setup(a, d(&[2.0, -2.0]), &p, 64);
        let trace = run_ergodic_check(&s).unwrap();
        assert_eq!(trace.verdict, Verdict::Agree, "gap {:?}", trace.final_gap);
        assert_eq!(trace.flagged, 0);
        for row in &trace.rows {
            assert!(row.projected.dist(&p).unwrap() < 1e-9);
            assert!((row.distance - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn identity_net_is_fixed() {
        let id = SemigroupAction::single(Mapping::affine(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0; 2]).unwrap());
        let c = ConvexSet::ball(d(&[0.0, 0.0]), 1.0).unwrap();
        let proj = SemigroupAction::single(Mapping::projection(c).unwrap());
        let model = build_model(&proj, &proj.domain().sample(30, 3.0, 1).unwrap(), &[Address::one()]).unwrap();
        let x = d(&[2.0, 2.0]);
        let trace = run_projection_net(&id, &model, &x, 10, &Tolerances::default()).unwrap();
        let first = trace.rows[0].projected.clone();
        assert!(trace.rows.iter().all(|r| r.projected == first));
    }

    #[test]
    fn contraction_net_converges_to_fixed_point() {
        // A = 0.5 R with R a quarter turn; (I - A)^{-1} = 0.8 [[1, -0.5], [0.5, 1]]
        let m = Mapping::affine(vec![vec![0.0, -0.5], vec![0.5, 0.0]], vec![1.0, -1.0]).unwrap();
        let a = SemigroupAction::single(m);
        let star = d(&[0.8 * (1.0 + 0.5), 0.8 * (0.5 - 1.0)]);
        // check the oracle solves x = Ax + b
        let img = a.act(&Address::one(), &star).unwrap();
        assert!(img.dist(&star).unwrap() < 1e-12);
        let s = setup(a, d(&[5.0, 5.0]), &star, 128);
        let trace = run_ergodic_check(&s).unwrap();
        assert_eq!(trace.verdict, Verdict::Agree);
        assert_eq!(trace.flagged, 0);
        assert!(trace.last_projection().unwrap().dist(&star).unwrap() < 1e-9);
        assert!(trace.rows.last().unwrap().distance < 1e-9);
    }

    #[test]
    fn commuting_rotations_agree_on_box_average() {
        let p = d(&[0.5, 0.5]);
        let gens = vec![Mapping::rotation(p.clone(), 1.0).unwrap(), Mapping::rotation(p.clone(), 2.5).unwrap()];
        let a = SemigroupAction::commutative(gens).unwrap();
        let s = setup(a, d(&[3.0, 0.0]), &p, 66);
        let trace = run_ergodic_check(&s).unwrap();
        assert_eq!(trace.verdict, Verdict::Agree);
        assert_eq!(trace.flagged, 0);
        assert!(trace.mean.unwrap().value.dist(&p).unwrap() < 1e-7);
    }

    #[test]
    fn shift_has_no_mean_in_model() {
        // the orbit of e1 is unbounded: T^n e1 = e1 + ... + e_{n+1}
        let shift = SemigroupAction::single(Mapping::shift().unwrap());
        let battery = Battery { points: vec![Vector::sparse_basis(0)], elements: vec![Address::one()] };
        let s = ErgodicSetup {
            action: shift,
            scheme: AveragingScheme::Cesaro,
            start: Vector::sparse_basis(0),
            battery,
            horizon: 8,
            max_stage: 1 << 8,
            tolerances: Tolerances::default(),
        };
        let tr = run_ergodic_check(&s).unwrap();
        assert_ne!(tr.verdict, Verdict::Agree);
    }

    #[test]
    fn predecessor_relation() {
        assert_eq!(predecessors(&Address::Multi(vec![1, 0])), vec![None]);
        assert_eq!(
            predecessors(&Address::Multi(vec![1, 2])),
            vec![Some(Address::Multi(vec![0, 2])), Some(Address::Multi(vec![1, 1]))]
        );
        assert_eq!(predecessors(&Address::Word(vec![1, 0])), vec![Some(Address::Word(vec![0]))]);
    }

    #[test]
    fn counterexamples_confirm() {
        let params = CounterexampleParams { grid: 5, samples: 32, ..Default::default() };
        for c in Counterexample::ALL {
            let r = run_counterexample(c, &params).unwrap();
            assert!(r.passed, "{r:?}");
        }
        let shift = run_counterexample(Counterexample::Shift, &params).unwrap();
        assert_eq!(shift.witnesses.len(), 125);
        assert_eq!(shift.checks[0].value, 0.0);
    }

    #[test]
    fn counterexample_names_round_trip() {
        for c in Counterexample::ALL {
            assert_eq!(Counterexample::from_name(c.name()), Some(c));
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(json, format!("\"{}\"", c.name()));
        }
    }

    #[test]
    fn pipeline_on_projection_map() {
        let c = ConvexSet::ball(d(&[1.0, 1.0]), 0.5).unwrap();
        let a = SemigroupAction::single(Mapping::projection(c).unwrap());
        let battery = Battery::sample(&a, 50, 4.0, None, 2, 2).unwrap();
        let whole = ConvexSet::whole_space(Space::Dense(2)).unwrap();
        let r = run_pipeline(&a, &bump(), &d(&[4.0, 0.0]), &battery, &whole, 1 << 12, &Tolerances::default()).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(elements_up_to(&a, 2).len(), 2);
    }

    #[test]
    fn hybrid_specimen() {
        let dom = ConvexSet::boxed(vec![0.0], vec![3.0]).unwrap();
        let m = Mapping::piecewise_linear(vec![2.0], vec![0.0, 0.0], vec![0.0, 1.0], dom).unwrap();
        let grid: Vec<Vector> = (0..100).map(|i| d(&[3.0 * i as f64 / 99.0])).collect();
        let battery = Battery { points: grid.clone(), elements: vec![Address::one(), Address::Multi(vec![2])] };
        let r = run_hybrid_check(&m, 2.0, 1.0, &grid, &bump(), &d(&[2.5]), &battery, 1 << 12, &Tolerances::default())
            .unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.mean.value.norm() < 1e-8);
    }
}
