//! JSON experiment configs: descriptors for sets, mappings, actions and
//! schemes, and their validation into runnable experiments.
//!
//! Errors carry a JSON pointer to the offending key. Coordinate indices in
//! descriptors (rotation planes, half-line coordinates) are 1-based, like
//! the keys of sparse vector literals.

use std::fmt::Display;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::attractive::{elements_up_to, Battery};
use crate::convex::{ConvexSet, Space};
use crate::ergodic::{Counterexample, CounterexampleParams, ErgodicSetup, Tolerances};
use crate::error::{Error, Result};
use crate::hilbert::Vector;
use crate::mappings::Mapping;
use crate::means::{AveragingScheme, WeightRule, DEFAULT_MAX_STAGE};
use crate::semigroup::{SemigroupAction, Structure};

pub const DEFAULT_HORIZON: usize = 256;
pub const MAX_HORIZON: usize = 4096;

/// Support bound used when sampling sequence-space sets.
const SEQUENCE_SAMPLE_DIM: usize = 4;

fn err(at: &str, message: impl Display) -> Error {
    Error::Config { pointer: if at.is_empty() { "/".into() } else { at.to_string() }, message: message.to_string() }
}

/// Re-anchors library errors at `at`; config errors keep their pointer.
fn at<T>(at: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config { .. } => e,
        other => err(at, other),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SetSpec {
    /// `dim` for `R^d`; omit it (or set `sequence`) for `l^2`.
    Whole {
        dim: Option<usize>,
        #[serde(default)]
        sequence: bool,
    },
    /// `null` bounds are infinite.
    Box { lower: Vec<Option<f64>>, upper: Vec<Option<f64>> },
    Ball { center: Vector, radius: f64 },
    Halfspace { normal: Vector, offset: f64 },
    Affine { anchor: Vector, directions: Vec<Vector> },
    /// `{x : x_index >= 0}`; in `l^2` unless `dim` is given.
    Halfline { index: usize, dim: Option<usize> },
    Intersection { members: Vec<SetSpec>, witness: Vector },
}

impl SetSpec {
    pub fn build(&self, p: &str) -> Result<ConvexSet> {
        match self {
            SetSpec::Whole { dim, sequence } => match (dim, sequence) {
                (Some(_), true) => Err(err(p, "give either dim or sequence")),
                (Some(0), _) => Err(err(&format!("{p}/dim"), "dimension must be positive")),
                (Some(d), false) => at(p, ConvexSet::whole_space(Space::Dense(*d))),
                (None, _) => at(p, ConvexSet::whole_space(Space::Sequence(SEQUENCE_SAMPLE_DIM))),
            },
            SetSpec::Box { lower, upper } => {
                if lower.len() != upper.len() {
                    return Err(err(&format!("{p}/upper"), "lower and upper must have equal length"));
                }
                let lo: Vec<f64> = lower.iter().map(|v| v.unwrap_or(f64::NEG_INFINITY)).collect();
                let hi: Vec<f64> = upper.iter().map(|v| v.unwrap_or(f64::INFINITY)).collect();
                for (k, (l, u)) in lo.iter().zip(&hi).enumerate() {
                    if l > u {
                        return Err(err(&format!("{p}/lower/{k}"), format!("lower bound {l} exceeds upper bound {u}")));
                    }
                }
                at(p, ConvexSet::boxed(lo, hi))
            }
            SetSpec::Ball { center, radius } => {
                if !(radius.is_finite() && *radius >= 0.0) {
                    return Err(err(&format!("{p}/radius"), format!("radius must be finite and nonnegative, got {radius}")));
                }
                at(p, ConvexSet::ball(center.clone(), *radius))
            }
            SetSpec::Halfspace { normal, offset } => {
                if normal.norm() == 0.0 {
                    return Err(err(&format!("{p}/normal"), "normal must be nonzero"));
                }
                at(p, ConvexSet::halfspace(normal.clone(), *offset))
            }
            SetSpec::Affine { anchor, directions } => at(&format!("{p}/directions"), ConvexSet::affine(anchor.clone(), directions.clone())),
            SetSpec::Halfline { index, dim } => {
                if *index == 0 {
                    return Err(err(&format!("{p}/index"), "coordinates are 1-based"));
                }
                let space = match dim {
                    Some(d) => Space::Dense(*d),
                    None => Space::Sequence(SEQUENCE_SAMPLE_DIM.max(*index)),
                };
                at(&format!("{p}/index"), ConvexSet::halfline_coordinate(space, index - 1))
            }
            SetSpec::Intersection { members, witness } => {
                let sets = members
                    .iter()
                    .enumerate()
                    .map(|(k, m)| m.build(&format!("{p}/members/{k}")))
                    .collect::<Result<Vec<_>>>()?;
                at(&format!("{p}/witness"), ConvexSet::intersection(sets, witness.clone()))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MappingSpec {
    Rotation {
        center: Vector,
        angle: f64,
        /// 1-based coordinate pair, default `[1, 2]`.
        plane: Option<[usize; 2]>,
        domain: Option<SetSpec>,
    },
    Translation { vector: Vector, domain: Option<SetSpec> },
    Affine { matrix: Vec<Vec<f64>>, offset: Vec<f64>, domain: Option<SetSpec> },
    Projection { set: SetSpec, domain: Option<SetSpec> },
    #[serde(rename = "shift-remark33")]
    Shift {},
    #[serde(rename = "sqrt-section3")]
    Sqrt {},
    PiecewiseLinear { breaks: Vec<f64>, slopes: Vec<f64>, intercepts: Vec<f64>, domain: SetSpec },
    /// Applied right to left.
    Compose { maps: Vec<MappingSpec>, domain: Option<SetSpec> },
}

impl MappingSpec {
    pub fn build(&self, p: &str) -> Result<Mapping> {
        let (m, domain) = match self {
            MappingSpec::Rotation { center, angle, plane, domain } => {
                if !angle.is_finite() {
                    return Err(err(&format!("{p}/angle"), "angle must be finite"));
                }
                let [i, j] = plane.unwrap_or([1, 2]);
                if i == 0 || j == 0 {
                    return Err(err(&format!("{p}/plane"), "coordinates are 1-based"));
                }
                let m = at(&format!("{p}/plane"), Mapping::rotation_in_plane(center.clone(), *angle, (i - 1, j - 1)))?;
                (m, domain)
            }
            MappingSpec::Translation { vector, domain } => (at(&format!("{p}/vector"), Mapping::translation(vector.clone()))?, domain),
            MappingSpec::Affine { matrix, offset, domain } => {
                (at(&format!("{p}/matrix"), Mapping::affine(matrix.clone(), offset.clone()))?, domain)
            }
            MappingSpec::Projection { set, domain } => (at(p, Mapping::projection(set.build(&format!("{p}/set"))?))?, domain),
            MappingSpec::Shift {} => return at(p, Mapping::shift()),
            MappingSpec::Sqrt {} => return at(p, Mapping::sqrt_section()),
            MappingSpec::PiecewiseLinear { breaks, slopes, intercepts, domain } => {
                let dom = domain.build(&format!("{p}/domain"))?;
                return at(p, Mapping::piecewise_linear(breaks.clone(), slopes.clone(), intercepts.clone(), dom));
            }
            MappingSpec::Compose { maps, domain } => {
                if maps.is_empty() {
                    return Err(err(&format!("{p}/maps"), "composition needs at least one map"));
                }
                let built = maps
                    .iter()
                    .enumerate()
                    .map(|(k, m)| m.build(&format!("{p}/maps/{k}")))
                    .collect::<Result<Vec<_>>>()?;
                (at(&format!("{p}/maps"), Mapping::compose(built))?, domain)
            }
        };
        match domain {
            None => Ok(m),
            Some(d) => {
                let pd = format!("{p}/domain");
                at(&pd, m.with_domain(d.build(&pd)?))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSpec {
    pub structure: Structure,
    pub generators: Vec<MappingSpec>,
}

impl ActionSpec {
    pub fn build(&self, p: &str) -> Result<SemigroupAction> {
        if self.generators.is_empty() {
            return Err(err(&format!("{p}/generators"), "an action needs at least one generator"));
        }
        let gens = self
            .generators
            .iter()
            .enumerate()
            .map(|(k, g)| g.build(&format!("{p}/generators/{k}")))
            .collect::<Result<Vec<_>>>()?;
        let pg = format!("{p}/generators");
        match self.structure {
            Structure::Commutative => at(&pg, SemigroupAction::commutative(gens)),
            Structure::FreeWords => at(&pg, SemigroupAction::free(gens)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SchemeSpec {
    Cesaro,
    Box,
    Bump,
    Weighted { weights: Vec<Vec<f64>> },
}

impl SchemeSpec {
    pub fn build(&self, p: &str, action: &SemigroupAction) -> Result<AveragingScheme> {
        let scheme = match self {
            SchemeSpec::Cesaro => AveragingScheme::Cesaro,
            SchemeSpec::Box => AveragingScheme::Box,
            SchemeSpec::Bump => AveragingScheme::Weighted(WeightRule::Bump),
            SchemeSpec::Weighted { weights } => AveragingScheme::Weighted(WeightRule::Table(weights.clone())),
        };
        at(p, scheme.validate(action))?;
        Ok(scheme)
    }
}

fn default_battery_points() -> usize {
    200
}
fn default_battery_radius() -> f64 {
    5.0
}
fn default_max_len() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatterySpec {
    #[serde(default = "default_battery_points")]
    pub points: usize,
    #[serde(default = "default_battery_radius")]
    pub radius: f64,
    /// Sampling centre; defaults to the start point.
    pub center: Option<Vector>,
    /// Elements of length up to `max_len` are checked.
    #[serde(default = "default_max_len")]
    pub max_len: usize,
}

impl Default for BatterySpec {
    fn default() -> Self {
        BatterySpec { points: default_battery_points(), radius: default_battery_radius(), center: None, max_len: 1 }
    }
}

impl BatterySpec {
    fn build(&self, p: &str, action: &SemigroupAction, start: &Vector, seed: u64) -> Result<Battery> {
        if self.points == 0 {
            return Err(err(&format!("{p}/points"), "battery needs at least one point"));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(err(&format!("{p}/radius"), "radius must be positive"));
        }
        if self.max_len == 0 {
            return Err(err(&format!("{p}/max_len"), "max_len must be at least 1"));
        }
        let center = self.center.as_ref().unwrap_or(start);
        at(p, Battery::sample(action, self.points, self.radius, Some(center), self.max_len, seed))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    pub mean: Option<f64>,
    pub window: Option<usize>,
    pub agree: Option<f64>,
    pub monotone: Option<f64>,
    pub dykstra: Option<f64>,
    pub net_window: Option<usize>,
    pub attractive: Option<f64>,
    pub fixed: Option<f64>,
}

impl ToleranceSpec {
    /// Scaled defaults, then explicit overrides.
    fn build(&self, p: &str, scale: f64) -> Result<Tolerances> {
        let mut t = Tolerances::default().scaled(scale);
        let set = |field: &str, v: Option<f64>, slot: &mut f64| -> Result<()> {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(err(&format!("{p}/{field}"), "tolerances must be positive"));
                }
                *slot = v;
            }
            Ok(())
        };
        set("mean", self.mean, &mut t.mean)?;
        set("agree", self.agree, &mut t.agree)?;
        set("monotone", self.monotone, &mut t.monotone)?;
        set("dykstra", self.dykstra, &mut t.dykstra)?;
        set("attractive", self.attractive, &mut t.attractive)?;
        set("fixed", self.fixed, &mut t.fixed)?;
        if let Some(w) = self.window {
            t.window = w.max(1);
        }
        if let Some(w) = self.net_window {
            t.net_window = w.max(1);
        }
        Ok(t)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
}

impl GridSpec {
    fn build(&self, p: &str) -> Result<Vec<Vector>> {
        if self.points < 2 {
            return Err(err(&format!("{p}/points"), "grid needs at least two points"));
        }
        if self.lower.partial_cmp(&self.upper) != Some(std::cmp::Ordering::Less) {
            return Err(err(&format!("{p}/upper"), "upper must exceed lower"));
        }
        let step = (self.upper - self.lower) / (self.points - 1) as f64;
        Ok((0..self.points).map(|i| Vector::dense(vec![self.lower + i as f64 * step])).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErgodicSpec {
    pub name: Option<String>,
    pub seed: Option<u64>,
    pub action: ActionSpec,
    pub start: Vector,
    pub scheme: SchemeSpec,
    pub battery: Option<BatterySpec>,
    pub horizon: Option<usize>,
    pub max_stage: Option<usize>,
    /// When given, the mean vector is also fed through the pipeline onto
    /// this set.
    pub set: Option<SetSpec>,
    pub tolerances: Option<ToleranceSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSpec {
    pub name: Option<String>,
    pub seed: Option<u64>,
    pub action: ActionSpec,
    pub set: Option<SetSpec>,
    pub start: Vector,
    pub scheme: SchemeSpec,
    pub battery: Option<BatterySpec>,
    pub max_stage: Option<usize>,
    pub tolerances: Option<ToleranceSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleSpec {
    pub name: Option<String>,
    pub seed: Option<u64>,
    pub counterexample: Counterexample,
    pub params: Option<ParamSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HybridSpec {
    pub name: Option<String>,
    pub seed: Option<u64>,
    pub map: MappingSpec,
    pub alpha: f64,
    pub beta: f64,
    pub grid: GridSpec,
    pub start: Vector,
    pub scheme: SchemeSpec,
    /// Elements checked on the grid points for attractiveness.
    #[serde(default = "default_hybrid_len")]
    pub max_len: usize,
    pub max_stage: Option<usize>,
    pub tolerances: Option<ToleranceSpec>,
    /// Free-form provenance of the specimen.
    pub derivation: Option<String>,
}

/// Selected by the `experiment` key.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum ExperimentSpec {
    Ergodic(ErgodicSpec),
    Pipeline(PipelineSpec),
    Counterexample(CounterexampleSpec),
    Hybrid(HybridSpec),
}

fn default_hybrid_len() -> usize {
    2
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub grid: Option<usize>,
    pub grid_radius: Option<f64>,
    pub translation: Option<Vec<f64>>,
    pub cesaro_stage: Option<usize>,
    pub n_tail: Option<usize>,
    pub samples: Option<usize>,
}

#[derive(Clone, Debug)]
pub enum Experiment {
    Ergodic { setup: ErgodicSetup, set: Option<ConvexSet> },
    Pipeline {
        action: SemigroupAction,
        scheme: AveragingScheme,
        start: Vector,
        battery: Battery,
        set: ConvexSet,
        max_stage: usize,
        tolerances: Tolerances,
    },
    Counterexample { which: Counterexample, params: CounterexampleParams },
    Hybrid {
        map: Mapping,
        alpha: f64,
        beta: f64,
        grid: Vec<Vector>,
        scheme: AveragingScheme,
        start: Vector,
        battery: Battery,
        max_stage: usize,
        tolerances: Tolerances,
    },
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Ergodic { .. } => "ergodic",
            Experiment::Pipeline { .. } => "pipeline",
            Experiment::Counterexample { .. } => "counterexample",
            Experiment::Hybrid { .. } => "hybrid",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Prepared {
    pub name: String,
    pub seed: u64,
    pub experiment: Experiment,
}

fn check_start(p: &str, action: &SemigroupAction, start: &Vector) -> Result<()> {
    let dom = action.domain();
    if !dom.space().accepts(start) || !dom.contains(start, 1e-9 * (1.0 + start.norm())) {
        return Err(err(&format!("{p}/start"), "start point is not in the action's domain"));
    }
    Ok(())
}

fn max_stage(p: &str, v: Option<usize>) -> Result<usize> {
    match v {
        None => Ok(DEFAULT_MAX_STAGE),
        Some(0) => Err(err(&format!("{p}/max_stage"), "max_stage must be positive")),
        Some(n) => Ok(n),
    }
}

impl ExperimentSpec {
    pub fn name(&self) -> Option<&str> {
        match self {
            ExperimentSpec::Ergodic(e) => e.name.as_deref(),
            ExperimentSpec::Pipeline(e) => e.name.as_deref(),
            ExperimentSpec::Counterexample(e) => e.name.as_deref(),
            ExperimentSpec::Hybrid(e) => e.name.as_deref(),
        }
    }

    fn seed(&self) -> Option<u64> {
        match self {
            ExperimentSpec::Ergodic(e) => e.seed,
            ExperimentSpec::Pipeline(e) => e.seed,
            ExperimentSpec::Counterexample(e) => e.seed,
            ExperimentSpec::Hybrid(e) => e.seed,
        }
    }

    /// Validates every descriptor. `seed` (from the command line) overrides
    /// the config's seed; `tol_scale` multiplies the default tolerances.
    pub fn prepare(&self, p: &str, default_name: &str, seed: Option<u64>, tol_scale: f64) -> Result<Prepared> {
        let seed = seed.or(self.seed()).unwrap_or(0);
        let name = self.name().unwrap_or(default_name).to_string();
        if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
            return Err(err(&format!("{p}/name"), "name must be a plain file name"));
        }
        let tols = |t: &Option<ToleranceSpec>| t.clone().unwrap_or_default().build(&format!("{p}/tolerances"), tol_scale);
        let experiment = match self {
            ExperimentSpec::Ergodic(ErgodicSpec { action, start, scheme, battery, horizon, max_stage: ms, set, tolerances, .. }) => {
                let action = action.build(&format!("{p}/action"))?;
                check_start(p, &action, start)?;
                let scheme = scheme.build(&format!("{p}/scheme"), &action)?;
                let battery =
                    battery.clone().unwrap_or_default().build(&format!("{p}/battery"), &action, start, seed)?;
                let horizon = horizon.unwrap_or(DEFAULT_HORIZON);
                if horizon == 0 || horizon > MAX_HORIZON {
                    return Err(err(&format!("{p}/horizon"), format!("horizon must be in 1..={MAX_HORIZON}")));
                }
                let set = set.as_ref().map(|s| s.build(&format!("{p}/set"))).transpose()?;
                let setup = ErgodicSetup {
                    action,
                    scheme,
                    start: start.clone(),
                    battery,
                    horizon,
                    max_stage: max_stage(p, *ms)?,
                    tolerances: tols(tolerances)?,
                };
                Experiment::Ergodic { setup, set }
            }
            ExperimentSpec::Pipeline(PipelineSpec { action, set, start, scheme, battery, max_stage: ms, tolerances, .. }) => {
                let action = action.build(&format!("{p}/action"))?;
                check_start(p, &action, start)?;
                let scheme = scheme.build(&format!("{p}/scheme"), &action)?;
                let battery =
                    battery.clone().unwrap_or_default().build(&format!("{p}/battery"), &action, start, seed)?;
                let set = match set {
                    Some(s) => s.build(&format!("{p}/set"))?,
                    None => action.domain().clone(),
                };
                Experiment::Pipeline {
                    action,
                    scheme,
                    start: start.clone(),
                    battery,
                    set,
                    max_stage: max_stage(p, *ms)?,
                    tolerances: tols(tolerances)?,
                }
            }
            ExperimentSpec::Counterexample(CounterexampleSpec { counterexample, params, .. }) => {
                let spec = params.clone().unwrap_or_default();
                let d = CounterexampleParams::default();
                let pp = format!("{p}/params");
                let params = CounterexampleParams {
                    grid: spec.grid.unwrap_or(d.grid),
                    grid_radius: spec.grid_radius.unwrap_or(d.grid_radius),
                    translation: spec.translation.unwrap_or(d.translation),
                    cesaro_stage: spec.cesaro_stage.unwrap_or(d.cesaro_stage),
                    n_tail: spec.n_tail.unwrap_or(d.n_tail),
                    samples: spec.samples.unwrap_or(d.samples),
                    seed,
                };
                if params.grid == 0 {
                    return Err(err(&format!("{pp}/grid"), "grid must be positive"));
                }
                if !(params.grid_radius.is_finite() && params.grid_radius > 0.0) {
                    return Err(err(&format!("{pp}/grid_radius"), "grid_radius must be positive"));
                }
                if params.translation.iter().all(|v| *v == 0.0) || params.translation.iter().any(|v| !v.is_finite()) {
                    return Err(err(&format!("{pp}/translation"), "translation must be finite and nonzero"));
                }
                if params.n_tail < 2 {
                    return Err(err(&format!("{pp}/n_tail"), "n_tail must be at least 2"));
                }
                if params.cesaro_stage == 0 || params.samples < 2 {
                    return Err(err(&pp, "cesaro_stage must be positive and samples at least 2"));
                }
                Experiment::Counterexample { which: *counterexample, params }
            }
            ExperimentSpec::Hybrid(HybridSpec { map, alpha, beta, grid, start, scheme, max_len, max_stage: ms, tolerances, .. }) => {
                let m = map.build(&format!("{p}/map"))?;
                let action = SemigroupAction::single(m.clone());
                check_start(p, &action, start)?;
                let scheme = scheme.build(&format!("{p}/scheme"), &action)?;
                let grid = grid.build(&format!("{p}/grid"))?;
                for (k, g) in grid.iter().enumerate() {
                    if !m.domain().contains(g, 1e-12) {
                        return Err(err(&format!("{p}/grid"), format!("grid point {k} lies outside the domain")));
                    }
                }
                if !(alpha.is_finite() && beta.is_finite()) {
                    return Err(err(&format!("{p}/alpha"), "alpha and beta must be finite"));
                }
                let battery = Battery { points: grid.clone(), elements: elements_up_to(&action, (*max_len).max(1)) };
                Experiment::Hybrid {
                    map: m,
                    alpha: *alpha,
                    beta: *beta,
                    grid,
                    scheme,
                    start: start.clone(),
                    battery,
                    max_stage: max_stage(p, *ms)?,
                    tolerances: tols(tolerances)?,
                }
            }
        };
        Ok(Prepared { name, seed, experiment })
    }
}

/// Converts a `serde_path_to_error` path into a JSON pointer.
fn pointer_of(prefix: &str, path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = prefix.to_string();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { .. } | Segment::Unknown => {}
        }
    }
    out
}

fn parse_as<T: serde::de::DeserializeOwned>(value: Value, p: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let pointer = pointer_of(p, e.path());
        err(&pointer, e.into_inner())
    })
}

fn parse_one(value: &Value, p: &str) -> Result<ExperimentSpec> {
    let Some(obj) = value.as_object() else {
        return Err(err(p, "expected an experiment object"));
    };
    let mut body = obj.clone();
    let kind = match body.remove("experiment") {
        Some(Value::String(k)) => k,
        Some(_) => return Err(err(&format!("{p}/experiment"), "expected a string")),
        None => return Err(err(p, "missing key \"experiment\"")),
    };
    let body = Value::Object(body);
    Ok(match kind.as_str() {
        "ergodic" => ExperimentSpec::Ergodic(parse_as(body, p)?),
        "pipeline" => ExperimentSpec::Pipeline(parse_as(body, p)?),
        "counterexample" => ExperimentSpec::Counterexample(parse_as(body, p)?),
        "hybrid" => ExperimentSpec::Hybrid(parse_as(body, p)?),
        other => {
            return Err(err(
                &format!("{p}/experiment"),
                format!("unknown experiment {other:?}; expected ergodic, pipeline, counterexample or hybrid"),
            ))
        }
    })
}

/// A config is either one experiment object or `{"experiments": [...]}`.
pub fn parse_config(text: &str) -> Result<Vec<(String, ExperimentSpec)>> {
    let value: Value = serde_json::from_str(text).map_err(|e| err("", format!("invalid JSON: {e}")))?;
    match value.get("experiments") {
        Some(list) => {
            if value.as_object().is_some_and(|o| o.len() > 1) {
                return Err(err("", "a config with \"experiments\" may not have other keys"));
            }
            let Some(items) = list.as_array().filter(|a| !a.is_empty()) else {
                return Err(err("/experiments", "expected a nonempty array"));
            };
            items
                .iter()
                .enumerate()
                .map(|(k, v)| {
                    let p = format!("/experiments/{k}");
                    Ok((p.clone(), parse_one(v, &p)?))
                })
                .collect()
        }
        None => Ok(vec![(String::new(), parse_one(&value, "")?)]),
    }
}

/// Parses and validates every experiment in `text`.
pub fn load(text: &str, seed: Option<u64>, tol_scale: f64) -> Result<Vec<Prepared>> {
    let specs = parse_config(text)?;
    let many = specs.len() > 1;
    let prepared = specs
        .iter()
        .enumerate()
        .map(|(k, (p, spec))| {
            let default_name = if many { format!("experiment-{k}") } else { "experiment".into() };
            spec.prepare(p, &default_name, seed, tol_scale)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut names: Vec<&str> = prepared.iter().map(|p| p.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(err("/experiments", "experiment names must be unique"));
    }
    Ok(prepared)
}

/// SHA-256 of the config's canonical JSON (object keys sorted).
pub fn config_hash(text: &str) -> Result<String> {
    use sha2::{Digest, Sha256};
    let value: Value = serde_json::from_str(text)?;
    // serde_json's map is ordered by key, so re-serialising canonicalises
    let canonical = serde_json::to_string(&value)?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}
