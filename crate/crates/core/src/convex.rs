//! Closed convex sets with exact metric projections.
//!
//! Primitive kinds have closed-form projections. Intersections are projected
//! with Dykstra's algorithm, which converges to the metric projection onto
//! the intersection (plain alternating projections only reach some point of
//! it).

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::hilbert::Vector;

pub const DYKSTRA_MAX_ITER: usize = 10_000;
pub const DYKSTRA_TOL: f64 = 1e-10;

/// Draws rejected before falling back to projecting the draw onto the set.
const REJECTION_ATTEMPTS: usize = 8;

/// Ambient space of a set.
///
/// `Sequence(n)` is `l^2`; `n` only bounds the support of sampled points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    Dense(usize),
    Sequence(usize),
}

impl Space {
    pub fn of(v: &Vector) -> Space {
        match v {
            Vector::Dense(c) => Space::Dense(c.len()),
            Vector::Sparse(s) => Space::Sequence(s.extent().max(1)),
        }
    }

    pub fn zero(&self) -> Vector {
        match self {
            Space::Dense(d) => Vector::zeros(*d),
            Space::Sequence(_) => Vector::sparse_zero(),
        }
    }

    pub fn sample_dim(&self) -> usize {
        match self {
            Space::Dense(d) | Space::Sequence(d) => *d,
        }
    }

    pub fn accepts(&self, x: &Vector) -> bool {
        match self {
            Space::Dense(d) => x.extent() <= *d && (x.is_sparse() || x.extent() == *d),
            Space::Sequence(_) => true,
        }
    }

    pub fn from_coords(&self, coords: Vec<f64>) -> Vector {
        match self {
            Space::Dense(_) => Vector::dense(coords),
            Space::Sequence(_) => Vector::dense(coords).to_sparse(),
        }
    }

    fn check(&self, x: &Vector) -> Result<()> {
        if self.accepts(x) {
            Ok(())
        } else {
            Err(Error::IncompatibleSpace {
                left: format!("{self:?}"),
                right: x.describe(),
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SetKind {
    WholeSpace,
    /// Per-coordinate bounds; infinite bounds are allowed.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vector, radius: f64 },
    /// `{x : <x|normal> <= offset}`.
    HalfSpace { normal: Vector, offset: f64 },
    /// `anchor + span(basis)`, basis orthonormal.
    Affine { anchor: Vector, basis: Vec<Vector> },
    /// `{x : x_index >= 0}`.
    HalflineCoordinate { index: usize },
    Intersection { members: Vec<ConvexSet>, witness: Vector },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvexSet {
    space: Space,
    kind: SetKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionReport {
    pub point: Vector,
    pub iterations: usize,
    /// Largest distance from `point` to any member set.
    pub residual: f64,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub holds: bool,
    /// The sampled `c` minimising `<x-u|u-c>`.
    pub witness: Option<Vector>,
    pub worst: f64,
    pub samples: usize,
}

impl ConvexSet {
    pub fn whole_space(space: Space) -> Result<ConvexSet> {
        if space.sample_dim() == 0 {
            return Err(Error::InvalidSet("zero-dimensional space".into()));
        }
        Ok(ConvexSet { space, kind: SetKind::WholeSpace })
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<ConvexSet> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::InvalidSet("box bounds must have equal, nonzero length".into()));
        }
        for (k, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if l.is_nan() || u.is_nan() || l > u || *l == f64::INFINITY || *u == f64::NEG_INFINITY {
                return Err(Error::InvalidSet(format!("box bounds out of order at coordinate {k}")));
            }
        }
        Ok(ConvexSet { space: Space::Dense(lower.len()), kind: SetKind::Box { lower, upper } })
    }

    pub fn ball(center: Vector, radius: f64) -> Result<ConvexSet> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::InvalidSet(format!("ball radius {radius} must be finite and >= 0")));
        }
        Ok(ConvexSet { space: Space::of(&center), kind: SetKind::Ball { center, radius } })
    }

    pub fn halfspace(normal: Vector, offset: f64) -> Result<ConvexSet> {
        if normal.norm() == 0.0 {
            return Err(Error::InvalidSet("half-space normal must be nonzero".into()));
        }
        if !offset.is_finite() {
            return Err(Error::NonFinite("half-space offset"));
        }
        Ok(ConvexSet { space: Space::of(&normal), kind: SetKind::HalfSpace { normal, offset } })
    }

    /// Affine subspace through `anchor`; `directions` are orthonormalised.
    pub fn affine(anchor: Vector, directions: Vec<Vector>) -> Result<ConvexSet> {
        let mut basis: Vec<Vector> = Vec::with_capacity(directions.len());
        for dir in directions {
            let mut r = dir.in_representation_of(&anchor)?;
            let scale = r.norm();
            for b in &basis {
                let c = r.inner(b)?;
                r = r.add_scaled(-c, b)?;
            }
            let n = r.norm();
            if n <= 1e-12 * scale.max(1.0) {
                return Err(Error::InvalidSet("affine directions are linearly dependent".into()));
            }
            basis.push(r.scale(1.0 / n));
        }
        Ok(ConvexSet { space: Space::of(&anchor), kind: SetKind::Affine { anchor, basis } })
    }

    /// `{x : x_index >= 0}` (0-based index).
    pub fn halfline_coordinate(space: Space, index: usize) -> Result<ConvexSet> {
        if let Space::Dense(d) = space {
            if index >= d {
                return Err(Error::InvalidSet(format!("coordinate {index} outside dimension {d}")));
            }
        }
        Ok(ConvexSet { space, kind: SetKind::HalflineCoordinate { index } })
    }

    /// Intersection certified nonempty by `witness`. Nested intersections are
    /// flattened.
    pub fn intersection(members: Vec<ConvexSet>, witness: Vector) -> Result<ConvexSet> {
        let mut flat = Vec::with_capacity(members.len());
        for m in members {
            match m.kind {
                SetKind::Intersection { members, .. } => flat.extend(members),
                _ => flat.push(m),
            }
        }
        let Some(first) = flat.first() else {
            return Err(Error::InvalidSet("empty intersection list".into()));
        };
        let space = first.space;
        for m in &flat {
            m.space.check(&witness)?;
            let tol = 1e-9 * (1.0 + witness.norm());
            let dist = m.dist(&witness)?;
            if dist > tol {
                return Err(Error::InvalidSet(format!(
                    "witness is not in every member (distance {dist:.3e})"
                )));
            }
        }
        Ok(ConvexSet { space, kind: SetKind::Intersection { members: flat, witness } })
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    pub fn is_primitive(&self) -> bool {
        !matches!(self.kind, SetKind::Intersection { .. })
    }

    /// Closed-form metric projection for primitive kinds.
    pub fn project(&self, x: &Vector) -> Result<Vector> {
        self.space.check(x)?;
        match &self.kind {
            SetKind::WholeSpace => Ok(x.clone()),
            SetKind::Box { lower, upper } => {
                let mut c = x.to_dense(lower.len())?;
                for ((v, l), u) in c.iter_mut().zip(lower).zip(upper) {
                    *v = v.clamp(*l, *u);
                }
                Vector::dense(c).in_representation_of(x)
            }
            SetKind::Ball { center, radius } => {
                let diff = x.sub(center)?;
                let n = diff.norm();
                if n <= *radius {
                    Ok(x.clone())
                } else {
                    center.add_scaled(radius / n, &diff)
                }
            }
            SetKind::HalfSpace { normal, offset } => {
                let excess = x.inner(normal)? - offset;
                if excess <= 0.0 {
                    Ok(x.clone())
                } else {
                    x.add_scaled(-excess / normal.norm_sq(), normal)
                }
            }
            SetKind::Affine { anchor, basis } => {
                let diff = x.sub(anchor)?;
                let mut out = anchor.clone();
                for b in basis {
                    out = out.add_scaled(diff.inner(b)?, b)?;
                }
                Ok(out)
            }
            SetKind::HalflineCoordinate { index } => {
                if x.get(*index) >= 0.0 {
                    return Ok(x.clone());
                }
                match x {
                    Vector::Dense(c) => {
                        let mut c = c.clone();
                        c[*index] = 0.0;
                        Ok(Vector::dense(c))
                    }
                    Vector::Sparse(s) => {
                        Vector::sparse(s.iter().filter(|(i, _)| i != index))
                    }
                }
            }
            SetKind::Intersection { .. } => Err(Error::UseDykstra),
        }
    }

    /// Projection for any kind; intersections go through Dykstra with the
    /// default budget.
    pub fn project_any(&self, x: &Vector) -> Result<Vector> {
        match &self.kind {
            SetKind::Intersection { members, .. } => {
                Ok(dykstra_project(members, x, DYKSTRA_MAX_ITER, DYKSTRA_TOL)?.point)
            }
            _ => self.project(x),
        }
    }

    /// Distance to the set for primitives; for intersections, the largest
    /// distance to a member (a lower bound on the true distance).
    pub fn dist(&self, x: &Vector) -> Result<f64> {
        match &self.kind {
            SetKind::Intersection { members, .. } => members
                .iter()
                .map(|m| m.dist(x))
                .try_fold(0.0f64, |acc, d| Ok(acc.max(d?))),
            _ => self.project(x)?.dist(x),
        }
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        match &self.kind {
            SetKind::Intersection { members, .. } => members.iter().all(|m| m.contains(x, tol)),
            _ => self.dist(x).is_ok_and(|d| d <= tol),
        }
    }

    /// A canonical point of the set, used as the default sampling centre.
    pub fn anchor_point(&self) -> Result<Vector> {
        match &self.kind {
            SetKind::Ball { center, .. } => Ok(center.clone()),
            SetKind::Affine { anchor, .. } => Ok(anchor.clone()),
            SetKind::Intersection { witness, .. } => Ok(witness.clone()),
            _ => self.project(&self.space.zero()),
        }
    }

    /// `n` deterministic points of `self ∩ ball(anchor_point, radius)`.
    pub fn sample(&self, n: usize, radius: f64, seed: u64) -> Result<Vec<Vector>> {
        self.sample_near(&self.anchor_point()?, n, radius, seed)
    }

    /// `n` deterministic points of `self ∩ ball(reference, radius)`.
    ///
    /// Uniform draws from the ball are accepted when they land in the set;
    /// after a few misses the draw is projected instead, which stays in the
    /// ball because `reference` lies in the set and projections are
    /// nonexpansive.
    pub fn sample_near(&self, reference: &Vector, n: usize, radius: f64, seed: u64) -> Result<Vec<Vector>> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidSet(format!("sampling radius {radius} must be positive")));
        }
        let ref_tol = 1e-9 * (1.0 + reference.norm());
        if !self.contains(reference, ref_tol) {
            return Err(Error::NotInSet { distance: self.dist(reference)? });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = self.space.sample_dim();
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let mut accepted = None;
            let mut last = None;
            for _ in 0..REJECTION_ATTEMPTS {
                let offset = self.space.from_coords(uniform_ball(&mut rng, dim, radius));
                let y = reference.add(&offset)?;
                if self.contains(&y, 0.0) {
                    accepted = Some(y);
                    break;
                }
                last = Some(y);
            }
            let point = match accepted {
                Some(y) => y,
                None => self.project_any(&last.expect("at least one draw"))?,
            };
            out.push(point);
        }
        Ok(out)
    }
}

fn uniform_ball(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Vec<f64> {
    let mut g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    let n = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
    if n > 0.0 {
        g.iter_mut().for_each(|x| *x *= r / n);
    }
    g
}

/// Samples `c` in the set around `u` and checks `<x-u|u-c> >= -tol`, the
/// variational characterisation of `u = P(x)`.
pub fn verify_projection(
    set: &ConvexSet,
    x: &Vector,
    u: &Vector,
    samples: usize,
    tol: f64,
    seed: u64,
) -> Result<VerifyReport> {
    if !set.contains(u, tol) {
        return Err(Error::NotInSet { distance: set.dist(u)? });
    }
    let gap = x.sub(u)?;
    let reference = if set.contains(u, 0.0) { u.clone() } else { set.project_any(u)? };
    let radius = (2.0 * gap.norm()).max(1.0);
    let cs = set.sample_near(&reference, samples, radius, seed)?;
    let mut worst = f64::INFINITY;
    let mut witness = None;
    for c in cs {
        let v = gap.inner(&u.sub(&c)?)?;
        if v < worst {
            worst = v;
            witness = Some(c);
        }
    }
    let holds = worst >= -tol;
    Ok(VerifyReport {
        holds,
        witness: if holds { None } else { witness },
        worst: if samples == 0 { 0.0 } else { worst },
        samples,
    })
}

/// Dykstra's algorithm for the projection of `x` onto the intersection of
/// `sets`.
///
/// Stops once every member is within `tol` and the correction terms have
/// settled (total change below `tol`). A report with `converged == false`
/// means the budget ran out.
pub fn dykstra_project(sets: &[ConvexSet], x: &Vector, max_iter: usize, tol: f64) -> Result<ProjectionReport> {
    let mut flat: Vec<&ConvexSet> = Vec::with_capacity(sets.len());
    for s in sets {
        match &s.kind {
            SetKind::Intersection { members, .. } => flat.extend(members.iter()),
            _ => flat.push(s),
        }
    }
    if flat.is_empty() {
        return Ok(ProjectionReport { point: x.clone(), iterations: 0, residual: 0.0, converged: true });
    }
    let mut cur = x.clone();
    let mut corrections: Vec<Vector> = vec![x.scale(0.0); flat.len()];
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let mut change = 0.0;
        for (set, corr) in flat.iter().zip(corrections.iter_mut()) {
            let y = cur.add(corr)?;
            let p = set.project(&y)?;
            let next = y.sub(&p)?;
            change += next.sub(corr)?.norm_sq();
            *corr = next;
            cur = p;
        }
        residual = flat.iter().try_fold(0.0f64, |acc, s| Ok::<_, Error>(acc.max(s.dist(&cur)?)))?;
        if residual <= tol && change.sqrt() <= tol {
            return Ok(ProjectionReport { point: cur, iterations: it, residual, converged: true });
        }
    }
    Ok(ProjectionReport { point: cur, iterations: max_iter, residual, converged: false })
}

/// Dykstra specialised to half-spaces `<a|n_i> <= o_i` over dense
/// coordinates. Each correction is a multiple of its normal, so only one
/// scalar per constraint is stored. Normals need not be unit length but must
/// be nonzero.
pub(crate) fn dykstra_halfspaces(
    normals: &[Vec<f64>],
    offsets: &[f64],
    x: &[f64],
    max_iter: usize,
    tol: f64,
) -> (Vec<f64>, usize, f64, bool) {
    let unit: Vec<(Vec<f64>, f64)> = normals
        .iter()
        .zip(offsets)
        .map(|(n, o)| {
            let len = n.iter().map(|v| v * v).sum::<f64>().sqrt();
            (n.iter().map(|v| v / len).collect(), o / len)
        })
        .collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let mut cur = x.to_vec();
    let mut corr = vec![0.0; unit.len()];
    let mut residual = unit.iter().map(|(n, o)| (dot(&cur, n) - o).max(0.0)).fold(0.0, f64::max);
    if residual == 0.0 {
        return (cur, 0, 0.0, true);
    }
    for it in 1..=max_iter {
        let mut change = 0.0;
        for ((n, o), c) in unit.iter().zip(corr.iter_mut()) {
            let excess = dot(&cur, n) + *c - o;
            let next = excess.max(0.0);
            let step = *c - next;
            if step != 0.0 {
                cur.iter_mut().zip(n).for_each(|(v, w)| *v += step * w);
            }
            change += step * step;
            *c = next;
        }
        residual = unit.iter().map(|(n, o)| (dot(&cur, n) - o).max(0.0)).fold(0.0, f64::max);
        if residual <= tol && change.sqrt() <= tol {
            return (cur, it, residual, true);
        }
    }
    (cur, max_iter, residual, false)
}

/// Exact projection onto `<a|n_i> <= o_i` by the dual active-set method of
/// Goldfarb and Idnani (identity Hessian). Constraints enter one at a time,
/// most violated first, and leave when their multiplier would turn negative,
/// so active normals stay independent and the run is finite. Returns the same
/// tuple as [`dykstra_halfspaces`]; `converged == false` means the budget ran
/// out or the active normals became numerically dependent.
pub(crate) fn active_set_halfspaces(
    normals: &[Vec<f64>],
    offsets: &[f64],
    x: &[f64],
    max_iter: usize,
    tol: f64,
) -> (Vec<f64>, usize, f64, bool) {
    let unit: Vec<(DVector<f64>, f64)> = normals
        .iter()
        .zip(offsets)
        .map(|(n, o)| {
            let n = DVector::from_column_slice(n);
            let len = n.norm();
            (n / len, o / len)
        })
        .collect();
    let violation = |u: &DVector<f64>, i: usize| unit[i].0.dot(u) - unit[i].1;
    let max_violation = |u: &DVector<f64>| (0..unit.len()).map(|i| violation(u, i).max(0.0)).fold(0.0, f64::max);
    let mut u = DVector::from_column_slice(x);
    let mut active: Vec<usize> = Vec::new();
    let mut lambda: Vec<f64> = Vec::new();
    let mut iterations = 0;
    let give_up = |u: DVector<f64>, it: usize| {
        let r = max_violation(&u);
        (u.iter().copied().collect(), it, r, false)
    };

    loop {
        let mut pick = None;
        let mut worst = tol;
        for i in 0..unit.len() {
            let v = violation(&u, i);
            if v > worst && !active.contains(&i) {
                worst = v;
                pick = Some(i);
            }
        }
        let Some(p) = pick else { break };
        let np = &unit[p].0;
        let mut lambda_p = 0.0;
        let mut slack = worst;
        loop {
            iterations += 1;
            if iterations > max_iter {
                return give_up(u, max_iter);
            }
            // r solves (N_A N_A^T) r = N_A n_p; z is n_p minus its part in span(N_A)
            let r = if active.is_empty() {
                DVector::zeros(0)
            } else {
                let na = DMatrix::from_fn(active.len(), x.len(), |row, col| unit[active[row]].0[col]);
                let Some(chol) = (&na * na.transpose()).cholesky() else {
                    return give_up(u, iterations);
                };
                chol.solve(&(&na * np))
            };
            let mut z = np.clone();
            for (k, &j) in active.iter().enumerate() {
                z.axpy(-r[k], &unit[j].0, 1.0);
            }
            let zz = z.norm_squared();
            let mut partial = f64::INFINITY;
            let mut blocking = None;
            for k in 0..active.len() {
                if r[k] > 0.0 && lambda[k] / r[k] < partial {
                    partial = lambda[k] / r[k];
                    blocking = Some(k);
                }
            }
            let full = if zz > 1e-24 { slack / zz } else { f64::INFINITY };
            if partial.is_infinite() && full.is_infinite() {
                // n_p lies in the span of active normals with no way to relax
                return give_up(u, iterations);
            }
            let t = partial.min(full);
            if full.is_finite() {
                u.axpy(-t, &z, 1.0);
                slack -= t * zz;
            }
            for k in 0..active.len() {
                lambda[k] -= t * r[k];
            }
            lambda_p += t;
            if full <= partial {
                active.push(p);
                lambda.push(lambda_p);
                break;
            }
            let k = blocking.expect("a partial step has a blocking constraint");
            active.remove(k);
            lambda.remove(k);
        }
    }
    let residual = max_violation(&u);
    (u.iter().copied().collect(), iterations, residual, true)
}
