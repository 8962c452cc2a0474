//! Attractive points and the half-space model of the attractive set.
//!
//! Squaring `||a - T_s x|| <= ||a - x||` and expanding gives
//! `2<a | x - T_s x> <= ||x||^2 - ||T_s x||^2`, which is linear in `a`. Each
//! sampled pair `(x, s)` therefore contributes one half-space, and the
//! intersection of those half-spaces contains every attractive point.

use rayon::prelude::*;
use serde::Serialize;

use crate::convex::{active_set_halfspaces, dykstra_halfspaces, ConvexSet, ProjectionReport, DYKSTRA_MAX_ITER, DYKSTRA_TOL};
use crate::error::{Error, Result};
use crate::hilbert::Vector;
use crate::mappings::{worst_case, PropertyReport, Witness};
use crate::semigroup::{Address, SemigroupAction};

pub const PIPELINE_TOL: f64 = 1e-6;

/// Cosine above which two constraint normals count as parallel.
const DEDUP_COS: f64 = 1.0 - 1e-10;
const DEDUP_OFFSET: f64 = 1e-10;

/// Test points and semigroup elements on which attractiveness is checked.
#[derive(Clone, Debug, PartialEq)]
pub struct Battery {
    pub points: Vec<Vector>,
    pub elements: Vec<Address>,
}

impl Battery {
    /// `n` domain points within `radius` of `center` (or of the domain's
    /// anchor), paired with every element of length at most `max_len`.
    pub fn sample(
        a: &SemigroupAction,
        n: usize,
        radius: f64,
        center: Option<&Vector>,
        max_len: usize,
        seed: u64,
    ) -> Result<Battery> {
        let points = match center {
            Some(c) => a.domain().sample_near(c, n, radius, seed)?,
            None => a.domain().sample(n, radius, seed)?,
        };
        Ok(Battery { points, elements: elements_up_to(a, max_len) })
    }

    pub fn pairs(&self) -> usize {
        self.points.len() * self.elements.len()
    }
}

/// Every element of length `1..=max_len`, in enumeration order.
pub fn elements_up_to(a: &SemigroupAction, max_len: usize) -> Vec<Address> {
    (1..=max_len).flat_map(|l| a.layer(l)).collect()
}

/// `||a - T_s x|| <= ||a - x|| + tol` for every test point and element.
pub fn is_attractive(
    a: &Vector,
    action: &SemigroupAction,
    testpoints: &[Vector],
    elements: &[Address],
    tol: f64,
) -> Result<PropertyReport> {
    let cases: Vec<(usize, usize)> =
        (0..testpoints.len()).flat_map(|i| (0..elements.len()).map(move |j| (i, j))).collect();
    let found = worst_case(&cases, |&(i, j)| {
        let x = &testpoints[i];
        let tx = action.act(&elements[j], x)?;
        Ok((a.dist(&tx)?, a.dist(x)?))
    })?;
    let worst = found.map(|(k, lhs, rhs)| {
        let (i, j) = cases[k];
        Witness { x: testpoints[i].clone(), y: None, element: Some(elements[j].clone()), lhs, rhs }
    });
    Ok(PropertyReport::from_worst(worst, tol, testpoints.len()))
}

pub fn is_attractive_on(a: &Vector, action: &SemigroupAction, battery: &Battery, tol: f64) -> Result<PropertyReport> {
    is_attractive(a, action, &battery.points, &battery.elements, tol)
}

/// Finite-horizon surrogate for `limsup_n ||a - (T_t)^n x|| <= ||a - x||`,
/// taking the maximum over `n` in `[n_tail, 2*n_tail]`.
pub fn is_asymptotically_attractive(
    a: &Vector,
    action: &SemigroupAction,
    testpoints: &[Vector],
    elements: &[Address],
    n_tail: usize,
    tol: f64,
) -> Result<PropertyReport> {
    if n_tail < 2 {
        return Err(Error::InvalidMapping("tail window must start at n >= 2".into()));
    }
    let cases: Vec<(usize, usize)> =
        (0..testpoints.len()).flat_map(|i| (0..elements.len()).map(move |j| (i, j))).collect();
    let found = worst_case(&cases, |&(i, j)| {
        let x = &testpoints[i];
        let t = &elements[j];
        let mut y = x.clone();
        let mut tail = 0.0f64;
        for n in 1..=2 * n_tail {
            y = action.act(t, &y)?;
            if n >= n_tail {
                tail = tail.max(a.dist(&y)?);
            }
        }
        Ok((tail, a.dist(x)?))
    })?;
    let worst = found.map(|(k, lhs, rhs)| {
        let (i, j) = cases[k];
        Witness { x: testpoints[i].clone(), y: None, element: Some(elements[j].clone()), lhs, rhs }
    });
    Ok(PropertyReport::from_worst(worst, tol, testpoints.len())
        .with_note(&format!("finite-horizon surrogate: max over n in [{n_tail}, {}]", 2 * n_tail)))
}

/// `<a | normal> <= offset`, built from the pair `(source, element)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub normal: Vector,
    pub offset: f64,
    pub source: Vector,
    pub image: Vector,
    pub element: Address,
}

impl Constraint {
    pub fn new(source: Vector, image: Vector, element: Address) -> Result<Constraint> {
        let diff = source.sub(&image)?;
        // ||x||^2 - ||Tx||^2 = <x - Tx | x + Tx>, without the cancellation
        let offset = diff.inner(&source.add(&image)?)?;
        Ok(Constraint { normal: diff.scale(2.0), offset, source, image, element })
    }

    /// Signed distance of `a` past the boundary (positive means violated).
    pub fn excess(&self, a: &Vector) -> Result<f64> {
        Ok((a.inner(&self.normal)? - self.offset) / self.normal.norm())
    }

    fn unit(&self) -> (Vector, f64) {
        let len = self.normal.norm();
        (self.normal.scale(1.0 / len), self.offset / len)
    }
}

#[derive(Serialize)]
struct ConstraintRecord<'a> {
    normal: &'a Vector,
    offset: f64,
    source: SourceRecord<'a>,
}

#[derive(Serialize)]
struct SourceRecord<'a> {
    x: &'a Vector,
    s: &'a Address,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AttractiveModel {
    pub constraints: Vec<Constraint>,
    /// Pairs with `T_s x = x` give the vacuous constraint `0 <= 0`.
    pub vacuous: usize,
    pub duplicates: usize,
}

/// One half-space per `(x, s)`, deduplicated; constraint order follows the
/// sample order, then the element order.
pub fn build_model(action: &SemigroupAction, sample_x: &[Vector], elements: &[Address]) -> Result<AttractiveModel> {
    let mut model = AttractiveModel::default();
    model.extend(action, sample_x, elements)?;
    Ok(model)
}

impl AttractiveModel {
    pub fn extend(&mut self, action: &SemigroupAction, sample_x: &[Vector], elements: &[Address]) -> Result<()> {
        let cases: Vec<(usize, usize)> =
            (0..sample_x.len()).flat_map(|i| (0..elements.len()).map(move |j| (i, j))).collect();
        let built: Vec<Constraint> = cases
            .par_iter()
            .map(|&(i, j)| {
                let x = &sample_x[i];
                Constraint::new(x.clone(), action.act(&elements[j], x)?, elements[j].clone())
            })
            .collect::<Result<_>>()?;
        let mut units: Vec<(Vector, f64)> = self.constraints.iter().map(Constraint::unit).collect();
        for c in built {
            if c.normal.norm() <= 1e-12 * (1.0 + c.source.norm()) {
                self.vacuous += 1;
                continue;
            }
            let (n, o) = c.unit();
            let mut dup = false;
            for (m, p) in &units {
                if (o - p).abs() <= DEDUP_OFFSET && n.inner(m)? >= DEDUP_COS {
                    dup = true;
                    break;
                }
            }
            if dup {
                self.duplicates += 1;
            } else {
                units.push((n, o));
                self.constraints.push(c);
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Largest signed distance past any boundary (0 for the empty model).
    pub fn max_excess(&self, a: &Vector) -> Result<f64> {
        let mut worst = 0.0f64;
        for c in &self.constraints {
            worst = worst.max(c.excess(a)?);
        }
        Ok(worst)
    }

    pub fn contains(&self, a: &Vector, tol: f64) -> Result<bool> {
        Ok(self.max_excess(a)? <= tol)
    }

    /// JSON array of `{normal, offset, source: {x, s}}`.
    pub fn to_json(&self) -> Result<String> {
        let records: Vec<ConstraintRecord> = self
            .constraints
            .iter()
            .map(|c| ConstraintRecord {
                normal: &c.normal,
                offset: c.offset,
                source: SourceRecord { x: &c.source, s: &c.element },
            })
            .collect();
        Ok(serde_json::to_string_pretty(&records)?)
    }

    /// Common dense dimension of the constraints and `x`.
    fn dim(&self, x: &Vector) -> usize {
        match x {
            Vector::Dense(v) => v.len(),
            Vector::Sparse(_) => self.constraints.iter().map(|c| c.normal.extent()).fold(x.extent(), usize::max),
        }
    }
}

/// Projection onto the model's half-spaces by the dual active-set method,
/// falling back to Dykstra if that breaks down. Dykstra alone stalls on the
/// nested polygons that orbits of contractions produce. The answer comes back
/// in the representation of `x`.
pub fn project_onto_model(model: &AttractiveModel, x: &Vector, max_iter: usize, tol: f64) -> Result<ProjectionReport> {
    if model.is_empty() {
        return Ok(ProjectionReport { point: x.clone(), iterations: 0, residual: 0.0, converged: true });
    }
    let d = model.dim(x);
    let normals: Vec<Vec<f64>> = model.constraints.iter().map(|c| c.normal.to_dense(d)).collect::<Result<_>>()?;
    let offsets: Vec<f64> = model.constraints.iter().map(|c| c.offset).collect();
    let xd = x.to_dense(d)?;
    let mut found = active_set_halfspaces(&normals, &offsets, &xd, max_iter, tol);
    if !found.3 {
        found = dykstra_halfspaces(&normals, &offsets, &xd, max_iter, tol);
    }
    let (p, iterations, residual, converged) = found;
    let point = Vector::try_dense(p)?.in_representation_of(x)?;
    Ok(ProjectionReport { point, iterations, residual, converged })
}

pub fn project_onto_model_default(model: &AttractiveModel, x: &Vector) -> Result<ProjectionReport> {
    project_onto_model(model, x, DYKSTRA_MAX_ITER, DYKSTRA_TOL)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineReport {
    pub attractive_candidate: Vector,
    pub projected_fixed_candidate: Vector,
    pub max_fixed_residual: f64,
    /// `||g(u) - u||` per generator.
    pub residuals: Vec<f64>,
}

impl PipelineReport {
    pub fn is_fixed(&self, tol: f64) -> bool {
        self.max_fixed_residual <= tol
    }
}

/// Projects an attractive point onto `c` and measures how far the result is
/// from being fixed by every generator. Fails if `a` is not attractive on
/// the battery.
pub fn attractive_to_fixed(
    a: &Vector,
    c: &ConvexSet,
    action: &SemigroupAction,
    battery: &Battery,
    tol: f64,
) -> Result<PipelineReport> {
    let report = is_attractive_on(a, action, battery, tol)?;
    if let Some(w) = report.witness {
        return Err(Error::NotAttractive(Box::new(w)));
    }
    let u = c.project_any(a)?;
    let residuals: Vec<f64> =
        action.generators().iter().map(|g| g.apply(&u)?.dist(&u)).collect::<Result<_>>()?;
    let max_fixed_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(PipelineReport { attractive_candidate: a.clone(), projected_fixed_candidate: u, max_fixed_residual, residuals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::Space;
    use crate::mappings::Mapping;
    use crate::means::{mean_vector, AveragingScheme, WeightRule};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn d(v: &[f64]) -> Vector {
        Vector::dense(v.to_vec())
    }

    fn grid(lo: f64, hi: f64, k: usize) -> Vec<Vector> {
        let step = (hi - lo) / (k - 1) as f64;
        (0..k)
            .flat_map(|i| (0..k).map(move |j| d(&[lo + i as f64 * step, lo + j as f64 * step])))
            .collect()
    }

    fn rot(p: &[f64], angle: f64) -> SemigroupAction {
        SemigroupAction::single(Mapping::rotation(d(p), angle).unwrap())
    }

    fn identity2() -> SemigroupAction {
        SemigroupAction::single(Mapping::affine(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0; 2]).unwrap())
    }

    #[test]
    fn shift_origin_is_not_attractive() {
        let shift = SemigroupAction::single(Mapping::shift().unwrap());
        let r = is_attractive(&Vector::sparse_zero(), &shift, &[Vector::sparse_basis(0)], &[Address::one()], 1e-12)
            .unwrap();
        assert!(!r.holds);
        let w = r.witness.unwrap();
        assert!((w.lhs - 2f64.sqrt()).abs() < 1e-15 && w.rhs == 1.0);
    }

    #[test]
    fn fixed_point_of_nonexpansive_map_is_attractive() {
        let m = Mapping::compose(vec![
            Mapping::projection(ConvexSet::ball(d(&[0.0, 0.0]), 2.0).unwrap()).unwrap(),
            Mapping::rotation(d(&[1.0, 0.0]), 0.8).unwrap(),
        ])
        .unwrap();
        let a = SemigroupAction::single(m);
        let battery = Battery::sample(&a, 50, 5.0, None, 4, 3).unwrap();
        assert!(is_attractive_on(&d(&[1.0, 0.0]), &a, &battery, 1e-12).unwrap().holds);
    }

    #[test]
    fn off_centre_point_fails_for_rotation() {
        let a = rot(&[0.0, 0.0], FRAC_PI_2);
        let r = is_attractive(&d(&[0.1, 0.0]), &a, &grid(-2.0, 2.0, 21), &[Address::one()], 1e-12).unwrap();
        assert!(!r.holds);
        let w = r.witness.unwrap();
        // recompute the violation from the witness
        let tx = a.act(w.element.as_ref().unwrap(), &w.x).unwrap();
        let a0 = d(&[0.1, 0.0]);
        assert_eq!(a0.dist(&tx).unwrap(), w.lhs);
        assert!(w.lhs > a0.dist(&w.x).unwrap());
    }

    #[test]
    fn asymptotic_examples() {
        let sqrt = SemigroupAction::single(Mapping::sqrt_section().unwrap());
        let pts: Vec<Vector> = (1..=20).map(|k| d(&[k as f64 / 20.0])).collect();
        let r = is_asymptotically_attractive(&d(&[1.0]), &sqrt, &pts, &[Address::one()], 50, 1e-9).unwrap();
        assert!(r.holds);

        let id = identity2();
        let pts = grid(-1.0, 1.0, 5);
        let r = is_asymptotically_attractive(&d(&[0.3, 0.7]), &id, &pts, &[Address::one()], 10, 0.0).unwrap();
        assert!(r.holds);
        assert_eq!(r.worst, 0.0);

        let t = SemigroupAction::single(Mapping::translation(d(&[1.0, 0.0])).unwrap());
        let r = is_asymptotically_attractive(&Vector::zeros(2), &t, &pts, &[Address::one()], 10, 1e-9).unwrap();
        assert!(!r.holds);
    }

    #[test]
    fn rotation_model_is_the_centre() {
        let a = rot(&[0.0, 0.0], FRAC_PI_2);
        let samples = [d(&[1.0, 0.0]), d(&[-1.0, 0.0]), d(&[0.0, 1.0]), d(&[0.0, -1.0])];
        let model = build_model(&a, &samples, &[Address::one()]).unwrap();
        assert_eq!(model.len(), 4);
        assert!(model.contains(&Vector::zeros(2), 1e-15).unwrap());
        for probe in [d(&[1e-3, 0.0]), d(&[0.0, -1e-3]), d(&[1e-3, 1e-3])] {
            assert!(!model.contains(&probe, 1e-6).unwrap());
        }
        let p = project_onto_model_default(&model, &d(&[3.0, 1.0])).unwrap();
        assert!(p.converged);
        assert!(p.point.norm() < 1e-9);
    }

    #[test]
    fn identity_model_is_everything() {
        let model = build_model(&identity2(), &grid(-1.0, 1.0, 4), &[Address::one()]).unwrap();
        assert!(model.is_empty());
        assert_eq!(model.vacuous, 16);
        let x = d(&[4.0, -2.0]);
        assert_eq!(project_onto_model_default(&model, &x).unwrap().point, x);
    }

    #[test]
    fn single_constraint_projection() {
        // rotation by pi maps (1/4, 0) to (-1/4, 0): constraint <a|e1> <= 0
        let a = rot(&[0.0, 0.0], PI);
        let model = build_model(&a, &[d(&[0.25, 0.0])], &[Address::one()]).unwrap();
        assert_eq!(model.len(), 1);
        assert!((model.constraints[0].normal.dist(&d(&[1.0, 0.0])).unwrap()) < 1e-15);
        let p = project_onto_model_default(&model, &d(&[2.0, 5.0])).unwrap();
        assert!(p.point.dist(&d(&[0.0, 5.0])).unwrap() < 1e-12);
    }

    #[test]
    fn contraction_model_contains_fixed_point() {
        // x* solves x = A x + b with A = 0.5 I, b = (1, -1): x* = (2, -2)
        let m = Mapping::affine(vec![vec![0.5, 0.0], vec![0.0, 0.5]], vec![1.0, -1.0]).unwrap();
        let a = SemigroupAction::single(m);
        let pts = a.domain().sample(100, 10.0, 4).unwrap();
        let model = build_model(&a, &pts, &elements_up_to(&a, 3)).unwrap();
        assert!(model.contains(&d(&[2.0, -2.0]), 1e-12).unwrap());
    }

    #[test]
    fn parallel_constraints_are_merged() {
        let a = rot(&[0.0, 0.0], PI);
        let model = build_model(&a, &[d(&[1.0, 0.0]), d(&[2.0, 0.0]), d(&[0.0, 1.0])], &[Address::one()]).unwrap();
        assert_eq!(model.len(), 2);
        assert_eq!(model.duplicates, 1);
    }

    #[test]
    fn model_export_has_provenance() {
        let a = SemigroupAction::single(Mapping::affine(vec![vec![-1.0, 0.0], vec![0.0, -1.0]], vec![0.0; 2]).unwrap());
        let model = build_model(&a, &[d(&[1.0, 0.0])], &[Address::one()]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&model.to_json().unwrap()).unwrap();
        assert_eq!(v[0]["offset"], 0.0);
        assert_eq!(v[0]["normal"], serde_json::json!([4.0, 0.0]));
        assert_eq!(v[0]["source"]["x"], serde_json::json!([1.0, 0.0]));
        assert_eq!(v[0]["source"]["s"], serde_json::json!({"multi": [1]}));
    }

    #[test]
    fn sparse_model_projection_keeps_representation() {
        let shift = SemigroupAction::single(Mapping::shift().unwrap());
        let pts = vec![Vector::sparse_basis(0), Vector::sparse([(0, 2.0), (2, 1.0)]).unwrap()];
        let model = build_model(&shift, &pts, &[Address::one()]).unwrap();
        let p = project_onto_model_default(&model, &Vector::sparse_zero()).unwrap();
        assert!(p.point.is_sparse());
        assert!(model.contains(&p.point, 1e-9).unwrap());
    }

    #[test]
    fn pipeline_examples() {
        let p = [1.5, -0.5];
        let a = rot(&p, 1.3);
        let bump = AveragingScheme::Weighted(WeightRule::Bump);
        let mean = mean_vector(&bump, &a, &d(&[4.0, 4.0]), 1e-8, 1 << 14, 3).unwrap();
        let battery = Battery::sample(&a, 100, 5.0, Some(&d(&p)), 3, 1).unwrap();
        let whole = ConvexSet::whole_space(Space::Dense(2)).unwrap();
        let rep = attractive_to_fixed(&mean.value, &whole, &a, &battery, PIPELINE_TOL).unwrap();
        assert!(rep.is_fixed(PIPELINE_TOL));
        assert!(rep.projected_fixed_candidate.dist(&d(&p)).unwrap() < 1e-7);

        let shift = SemigroupAction::single(Mapping::shift().unwrap());
        let battery = Battery { points: vec![Vector::sparse_basis(0)], elements: vec![Address::one()] };
        let half = ConvexSet::halfline_coordinate(Space::Sequence(4), 0).unwrap();
        let err = attractive_to_fixed(&Vector::sparse_zero(), &half, &shift, &battery, PIPELINE_TOL).unwrap_err();
        assert!(matches!(err, Error::NotAttractive(_)));

        let id = identity2();
        let bx = ConvexSet::boxed(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let battery = Battery::sample(&id, 10, 2.0, None, 1, 0).unwrap();
        let rep = attractive_to_fixed(&d(&[3.0, -1.0]), &bx, &id, &battery, PIPELINE_TOL).unwrap();
        assert_eq!(rep.projected_fixed_candidate, d(&[1.0, 0.0]));
        assert_eq!(rep.max_fixed_residual, 0.0);
    }

    #[test]
    fn adding_constraints_never_enlarges_the_model() {
        let a = SemigroupAction::single(
            Mapping::affine(vec![vec![0.6, -0.3], vec![0.3, 0.6]], vec![0.5, 0.0]).unwrap(),
        );
        let pts = a.domain().sample(60, 6.0, 8).unwrap();
        let els = elements_up_to(&a, 2);
        let exterior = d(&[7.0, 7.0]);
        let mut model = AttractiveModel::default();
        let mut last = 0.0;
        for chunk in pts.chunks(10) {
            model.extend(&a, chunk, &els).unwrap();
            let p = project_onto_model_default(&model, &exterior).unwrap();
            let dist = p.point.dist(&exterior).unwrap();
            assert!(dist >= last - 1e-9);
            last = dist;
        }
    }

    proptest! {
        #[test]
        fn model_matches_membership(a0 in -3.0f64..3.0, a1 in -3.0f64..3.0, seed in 0u64..1000) {
            let act = SemigroupAction::single(
                Mapping::affine(vec![vec![0.2, -0.7], vec![0.5, 0.1]], vec![1.0, 0.3]).unwrap(),
            );
            let pts = act.domain().sample(15, 4.0, seed).unwrap();
            let els = elements_up_to(&act, 2);
            let a = d(&[a0, a1]);
            let model = build_model(&act, &pts, &els).unwrap();
            let attr = is_attractive(&a, &act, &pts, &els, 0.0).unwrap();
            if attr.holds {
                for c in &model.constraints {
                    prop_assert!(a.inner(&c.normal).unwrap() <= c.offset + 1e-9);
                }
            }
        }
    }
}
