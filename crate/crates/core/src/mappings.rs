//! Self-maps of convex sets and sampled property checkers.
//!
//! The checkers are falsifiers: `holds == true` means no counterexample was
//! found among the sampled pairs. A failing report always carries the worst
//! pair found, so the violation can be recomputed exactly.

use rayon::prelude::*;
use serde::Serialize;

use crate::convex::{ConvexSet, Space};
use crate::error::{Error, Result};
use crate::hilbert::Vector;
use crate::semigroup::Address;

/// Samples drawn when spot-checking that a mapping sends its domain into
/// itself.
const SELF_MAP_SAMPLES: usize = 16;
const SELF_MAP_RADIUS: f64 = 10.0;

#[derive(Clone, Debug, PartialEq)]
pub enum MapKind {
    /// Rotation by `angle` in the coordinate plane `plane` about `center`.
    Rotation { center: Vector, angle: f64, plane: (usize, usize) },
    Translation { displacement: Vector },
    /// `x -> matrix * x + offset` (row-major).
    Affine { matrix: Vec<Vec<f64>>, offset: Vec<f64> },
    Projection(ConvexSet),
    /// `(x1, x2, x3, ...) -> (x1, x1, x2, x3, ...)` on `{x1 >= 0}`.
    Shift,
    /// `x -> sqrt(x)` on `[0, 1]` with the value at 0 redefined as 1.
    SqrtSection,
    /// One-dimensional map; piece `k` covers `(breaks[k-1], breaks[k]]`.
    PiecewiseLinear { breaks: Vec<f64>, slopes: Vec<f64>, intercepts: Vec<f64> },
    /// Applied right to left: `[f, g]` is `f(g(x))`.
    Composition(Vec<Mapping>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mapping {
    kind: MapKind,
    domain: ConvexSet,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub x: Vector,
    pub y: Option<Vector>,
    pub element: Option<Address>,
    /// The checked inequality is `lhs <= rhs (+ tol)`.
    pub lhs: f64,
    pub rhs: f64,
}

impl Witness {
    pub fn violation(&self) -> f64 {
        self.lhs - self.rhs
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyReport {
    pub holds: bool,
    pub witness: Option<Witness>,
    /// Largest `lhs - rhs` over everything checked.
    pub worst: f64,
    pub samples_used: usize,
    pub note: Option<String>,
}

impl PropertyReport {
    pub(crate) fn from_worst(worst: Option<Witness>, tol: f64, samples_used: usize) -> PropertyReport {
        let w = worst.as_ref().map_or(f64::NEG_INFINITY, Witness::violation);
        let holds = w <= tol;
        PropertyReport {
            holds,
            witness: if holds { None } else { worst },
            worst: w,
            samples_used,
            note: None,
        }
    }

    pub(crate) fn with_note(mut self, note: &str) -> Self {
        self.note = Some(note.to_string());
        self
    }
}

/// Evaluates `eval` on every index in `items` (in parallel) and returns the
/// item with the largest violation; ties go to the earliest item, so the
/// answer does not depend on scheduling.
pub(crate) fn worst_case<T, F>(items: &[T], eval: F) -> Result<Option<(usize, f64, f64)>>
where
    T: Sync,
    F: Fn(&T) -> Result<(f64, f64)> + Sync,
{
    let evaluated: Vec<(f64, f64)> = items.par_iter().map(&eval).collect::<Result<_>>()?;
    let mut best: Option<(usize, f64, f64)> = None;
    for (k, (lhs, rhs)) in evaluated.into_iter().enumerate() {
        if best.is_none_or(|(_, l, r)| lhs - rhs > l - r) {
            best = Some((k, lhs, rhs));
        }
    }
    Ok(best)
}

impl Mapping {
    /// Builds a mapping and spot-checks that it maps `domain` into itself.
    pub fn new(kind: MapKind, domain: ConvexSet) -> Result<Mapping> {
        let m = Mapping { kind, domain };
        m.check_self_map()?;
        Ok(m)
    }

    pub fn rotation(center: Vector, angle: f64) -> Result<Mapping> {
        Self::rotation_in_plane(center, angle, (0, 1))
    }

    pub fn rotation_in_plane(center: Vector, angle: f64, plane: (usize, usize)) -> Result<Mapping> {
        let d = match &center {
            Vector::Dense(c) => c.len(),
            Vector::Sparse(_) => return Err(Error::InvalidMapping("rotation centre must be dense".into())),
        };
        if plane.0 == plane.1 || plane.0.max(plane.1) >= d || !angle.is_finite() {
            return Err(Error::InvalidMapping(format!("bad rotation plane {plane:?} in dimension {d}")));
        }
        Self::new(MapKind::Rotation { center, angle, plane }, ConvexSet::whole_space(Space::Dense(d))?)
    }

    pub fn translation(displacement: Vector) -> Result<Mapping> {
        let space = Space::of(&displacement);
        Self::new(MapKind::Translation { displacement }, ConvexSet::whole_space(space)?)
    }

    pub fn affine(matrix: Vec<Vec<f64>>, offset: Vec<f64>) -> Result<Mapping> {
        let d = offset.len();
        if d == 0 || matrix.len() != d || matrix.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidMapping("affine matrix must be square and match the offset".into()));
        }
        if matrix.iter().flatten().chain(&offset).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("affine coefficients"));
        }
        Self::new(MapKind::Affine { matrix, offset }, ConvexSet::whole_space(Space::Dense(d))?)
    }

    pub fn projection(set: ConvexSet) -> Result<Mapping> {
        let domain = ConvexSet::whole_space(set.space())?;
        Self::new(MapKind::Projection(set), domain)
    }

    pub fn shift() -> Result<Mapping> {
        Self::new(MapKind::Shift, ConvexSet::halfline_coordinate(Space::Sequence(4), 0)?)
    }

    pub fn sqrt_section() -> Result<Mapping> {
        Self::new(MapKind::SqrtSection, ConvexSet::boxed(vec![0.0], vec![1.0])?)
    }

    pub fn piecewise_linear(
        breaks: Vec<f64>,
        slopes: Vec<f64>,
        intercepts: Vec<f64>,
        domain: ConvexSet,
    ) -> Result<Mapping> {
        if slopes.len() != breaks.len() + 1 || intercepts.len() != slopes.len() {
            return Err(Error::InvalidMapping("need one slope and intercept per piece".into()));
        }
        if breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidMapping("breakpoints must be strictly increasing".into()));
        }
        if domain.space() != Space::Dense(1) {
            return Err(Error::InvalidMapping("piecewise-linear maps are one-dimensional".into()));
        }
        Self::new(MapKind::PiecewiseLinear { breaks, slopes, intercepts }, domain)
    }

    /// `[f, g, h]` is `f∘g∘h`; the domain is the innermost map's domain.
    pub fn compose(maps: Vec<Mapping>) -> Result<Mapping> {
        let Some(inner) = maps.last() else {
            return Err(Error::InvalidMapping("empty composition".into()));
        };
        let domain = inner.domain.clone();
        Self::new(MapKind::Composition(maps), domain)
    }

    /// Restricts the mapping to `domain`, which must be invariant.
    pub fn with_domain(self, domain: ConvexSet) -> Result<Mapping> {
        Self::new(self.kind, domain)
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    pub fn domain(&self) -> &ConvexSet {
        &self.domain
    }

    fn check_self_map(&self) -> Result<()> {
        for x in self.domain.sample(SELF_MAP_SAMPLES, SELF_MAP_RADIUS, 0)? {
            let y = self.apply(&x)?;
            let tol = 1e-9 * (1.0 + y.norm());
            if !self.domain.contains(&y, tol) {
                return Err(Error::InvalidMapping(format!("image of {x} leaves the domain")));
            }
        }
        Ok(())
    }

    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        let tol = 1e-9 * (1.0 + x.norm());
        if !self.domain.contains(x, tol) {
            let distance = self.domain.dist(x).unwrap_or(f64::INFINITY);
            return Err(Error::Domain { distance });
        }
        let y = self.eval(x)?;
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::NonFinite("mapping"))
        }
    }

    /// `T^n x`.
    pub fn iterate(&self, x: &Vector, n: usize) -> Result<Vector> {
        let mut y = x.clone();
        for _ in 0..n {
            y = self.apply(&y)?;
        }
        Ok(y)
    }

    fn eval(&self, x: &Vector) -> Result<Vector> {
        match &self.kind {
            MapKind::Rotation { center, angle, plane } => {
                let Vector::Dense(c) = center else { unreachable!("checked at construction") };
                let mut v = x.to_dense(c.len())?;
                let (i, j) = *plane;
                let (s, co) = angle.sin_cos();
                let (a, b) = (v[i] - c[i], v[j] - c[j]);
                v[i] = c[i] + co * a - s * b;
                v[j] = c[j] + s * a + co * b;
                Ok(Vector::Dense(v))
            }
            MapKind::Translation { displacement } => x.add(displacement),
            MapKind::Affine { matrix, offset } => {
                let v = x.to_dense(offset.len())?;
                let out = matrix
                    .iter()
                    .zip(offset)
                    .map(|(row, b)| row.iter().zip(&v).map(|(a, x)| a * x).sum::<f64>() + b)
                    .collect();
                Ok(Vector::Dense(out))
            }
            MapKind::Projection(set) => set.project_any(x),
            MapKind::Shift => {
                let first = x.get(0);
                let tail: Vec<(usize, f64)> = match x {
                    Vector::Sparse(s) => s.iter().map(|(i, v)| (i + 1, v)).collect(),
                    Vector::Dense(c) => c.iter().enumerate().map(|(i, v)| (i + 1, *v)).collect(),
                };
                Vector::sparse(std::iter::once((0, first)).chain(tail))
            }
            MapKind::SqrtSection => {
                let v = x.to_dense(1)?[0];
                let out = if v == 0.0 { 1.0 } else { v.max(0.0).sqrt() };
                Vector::Dense(vec![out]).in_representation_of(x)
            }
            MapKind::PiecewiseLinear { breaks, slopes, intercepts } => {
                let v = x.to_dense(1)?[0];
                let k = breaks.iter().take_while(|b| v > **b).count();
                Vector::Dense(vec![slopes[k] * v + intercepts[k]]).in_representation_of(x)
            }
            MapKind::Composition(maps) => {
                let mut y = x.clone();
                for m in maps.iter().rev() {
                    y = m.apply(&y)?;
                }
                Ok(y)
            }
        }
    }
}

fn unordered_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

fn ordered_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect()
}

fn pair_witness(points: &[Vector], found: Option<(usize, f64, f64)>, pairs: &[(usize, usize)]) -> Option<Witness> {
    found.map(|(k, lhs, rhs)| {
        let (i, j) = pairs[k];
        Witness { x: points[i].clone(), y: Some(points[j].clone()), element: None, lhs, rhs }
    })
}

/// `||Tx - Ty|| <= ||x - y|| + tol` on pairs of sampled domain points.
pub fn check_nonexpansive(m: &Mapping, samples: usize, radius: f64, tol: f64, seed: u64) -> Result<PropertyReport> {
    let points = m.domain().sample(samples, radius, seed)?;
    check_nonexpansive_on(m, &points, tol)
}

pub fn check_nonexpansive_on(m: &Mapping, points: &[Vector], tol: f64) -> Result<PropertyReport> {
    let images: Vec<Vector> = points.iter().map(|x| m.apply(x)).collect::<Result<_>>()?;
    let pairs = unordered_pairs(points.len());
    let found = worst_case(&pairs, |&(i, j)| {
        Ok((images[i].dist(&images[j])?, points[i].dist(&points[j])?))
    })?;
    let worst = pair_witness(points, found, &pairs);
    Ok(PropertyReport::from_worst(worst, tol, points.len()))
}

/// Finite-horizon surrogate for `limsup_n ||T^n x - T^n y|| <= ||x - y||`:
/// the limsup is replaced by the maximum over `n` in `[n_tail, 2*n_tail]`.
pub fn check_asymptotically_nonexpansive(
    m: &Mapping,
    samples: usize,
    radius: f64,
    n_tail: usize,
    tol: f64,
    seed: u64,
) -> Result<PropertyReport> {
    let points = m.domain().sample(samples, radius, seed)?;
    check_asymptotically_nonexpansive_on(m, &points, n_tail, tol)
}

pub fn check_asymptotically_nonexpansive_on(
    m: &Mapping,
    points: &[Vector],
    n_tail: usize,
    tol: f64,
) -> Result<PropertyReport> {
    if n_tail < 2 {
        return Err(Error::InvalidMapping("tail window must start at n >= 2".into()));
    }
    let tails: Vec<Vec<Vector>> = points
        .par_iter()
        .map(|x| {
            let mut y = m.iterate(x, n_tail)?;
            let mut tail = Vec::with_capacity(n_tail + 1);
            tail.push(y.clone());
            for _ in 0..n_tail {
                y = m.apply(&y)?;
                tail.push(y.clone());
            }
            Ok(tail)
        })
        .collect::<Result<_>>()?;
    let pairs = unordered_pairs(points.len());
    let found = worst_case(&pairs, |&(i, j)| {
        let mut tail_max = 0.0f64;
        for (a, b) in tails[i].iter().zip(&tails[j]) {
            tail_max = tail_max.max(a.dist(b)?);
        }
        Ok((tail_max, points[i].dist(&points[j])?))
    })?;
    let worst = pair_witness(points, found, &pairs);
    Ok(PropertyReport::from_worst(worst, tol, points.len())
        .with_note(&format!("finite-horizon surrogate: max over n in [{n_tail}, {}]", 2 * n_tail)))
}

/// `a||Tx-Ty||^2 + (1-a)||x-Ty||^2 <= b||Tx-y||^2 + (1-b)||x-y||^2 + tol`
/// over all ordered pairs of sampled points.
pub fn check_generalized_hybrid(
    m: &Mapping,
    alpha: f64,
    beta: f64,
    samples: usize,
    radius: f64,
    tol: f64,
    seed: u64,
) -> Result<PropertyReport> {
    let points = m.domain().sample(samples, radius, seed)?;
    check_generalized_hybrid_on(m, alpha, beta, &points, tol)
}

pub fn check_generalized_hybrid_on(
    m: &Mapping,
    alpha: f64,
    beta: f64,
    points: &[Vector],
    tol: f64,
) -> Result<PropertyReport> {
    let images: Vec<Vector> = points.iter().map(|x| m.apply(x)).collect::<Result<_>>()?;
    let pairs = ordered_pairs(points.len());
    let found = worst_case(&pairs, |&(i, j)| {
        let (x, y, tx, ty) = (&points[i], &points[j], &images[i], &images[j]);
        let lhs = alpha * tx.sub(ty)?.norm_sq() + (1.0 - alpha) * x.sub(ty)?.norm_sq();
        let rhs = beta * tx.sub(y)?.norm_sq() + (1.0 - beta) * x.sub(y)?.norm_sq();
        Ok((lhs, rhs))
    })?;
    let worst = pair_witness(points, found, &pairs);
    Ok(PropertyReport::from_worst(worst, tol, points.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn d(v: &[f64]) -> Vector {
        Vector::dense(v.to_vec())
    }

    fn doubling() -> Mapping {
        Mapping::affine(vec![vec![2.0]], vec![0.0]).unwrap()
    }

    #[test]
    fn apply_examples() {
        let shift = Mapping::shift().unwrap();
        let e1 = Vector::sparse_basis(0);
        assert_eq!(shift.apply(&e1).unwrap(), Vector::sparse([(0, 1.0), (1, 1.0)]).unwrap());
        let sqrt = Mapping::sqrt_section().unwrap();
        assert_eq!(sqrt.apply(&d(&[0.0])).unwrap(), d(&[1.0]));
        assert_eq!(sqrt.apply(&d(&[0.25])).unwrap(), d(&[0.5]));
        let rot = Mapping::rotation(Vector::zeros(2), FRAC_PI_2).unwrap();
        assert!(rot.apply(&d(&[1.0, 0.0])).unwrap().dist(&d(&[0.0, 1.0])).unwrap() < 1e-15);
    }

    #[test]
    fn shift_fixes_zero() {
        let shift = Mapping::shift().unwrap();
        assert_eq!(shift.apply(&Vector::sparse_zero()).unwrap(), Vector::sparse_zero());
    }

    #[test]
    fn apply_outside_domain() {
        let sqrt = Mapping::sqrt_section().unwrap();
        assert!(matches!(sqrt.apply(&d(&[2.0])), Err(Error::Domain { .. })));
        let shift = Mapping::shift().unwrap();
        let neg = Vector::sparse([(0, -1.0)]).unwrap();
        assert!(matches!(shift.apply(&neg), Err(Error::Domain { .. })));
    }

    #[test]
    fn composition_is_right_to_left() {
        let t = Mapping::translation(d(&[1.0, 0.0])).unwrap();
        let r = Mapping::rotation(Vector::zeros(2), FRAC_PI_2).unwrap();
        let rt = Mapping::compose(vec![r.clone(), t.clone()]).unwrap();
        // rotate(translate((0,0))) = rotate((1,0)) = (0,1)
        assert!(rt.apply(&Vector::zeros(2)).unwrap().dist(&d(&[0.0, 1.0])).unwrap() < 1e-15);
        let tr = Mapping::compose(vec![t, r]).unwrap();
        assert_eq!(tr.apply(&Vector::zeros(2)).unwrap(), d(&[1.0, 0.0]));
    }

    #[test]
    fn self_map_spot_check() {
        let ball = ConvexSet::ball(Vector::zeros(2), 1.0).unwrap();
        let t = Mapping::translation(d(&[5.0, 0.0])).unwrap();
        assert!(t.clone().with_domain(ball.clone()).is_err());
        let r = Mapping::rotation(Vector::zeros(2), 0.3).unwrap();
        assert!(r.with_domain(ball).is_ok());
    }

    #[test]
    fn piecewise_linear_pieces() {
        let dom = ConvexSet::boxed(vec![0.0], vec![3.0]).unwrap();
        let m = Mapping::piecewise_linear(vec![2.0], vec![0.0, 0.0], vec![0.0, 1.0], dom).unwrap();
        assert_eq!(m.apply(&d(&[2.0])).unwrap(), d(&[0.0]));
        assert_eq!(m.apply(&d(&[2.0 + 1e-9])).unwrap(), d(&[1.0]));
    }

    #[test]
    fn nonexpansive_examples() {
        let t = Mapping::translation(d(&[1.0, -2.0])).unwrap();
        assert!(check_nonexpansive(&t, 40, 5.0, 1e-9, 1).unwrap().holds);

        let sqrt = Mapping::sqrt_section().unwrap();
        let pts = [d(&[0.0]), d(&[0.01]), d(&[0.5])];
        let r = check_nonexpansive_on(&sqrt, &pts, 1e-9).unwrap();
        assert!(!r.holds);
        let w = r.witness.unwrap();
        assert_eq!((w.x.clone(), w.y.clone().unwrap()), (d(&[0.0]), d(&[0.01])));
        assert!((w.lhs - 0.9).abs() < 1e-12 && (w.rhs - 0.01).abs() < 1e-15);

        let r = check_nonexpansive(&doubling(), 10, 1.0, 1e-9, 0).unwrap();
        assert!(!r.holds);
    }

    #[test]
    fn shift_is_not_nonexpansive_in_l2() {
        // ||T x - T y||^2 = ||x - y||^2 + (x1 - y1)^2, so pairs differing in
        // the first coordinate expand.
        let shift = Mapping::shift().unwrap();
        let r = check_nonexpansive(&shift, 30, 2.0, 1e-9, 5).unwrap();
        assert!(!r.holds);
        let w = r.witness.unwrap();
        let y = w.y.unwrap();
        let d1 = w.x.get(0) - y.get(0);
        let expected = (w.x.dist(&y).unwrap().powi(2) + d1 * d1).sqrt();
        assert!((w.lhs - expected).abs() < 1e-12);
        // pairs with equal first coordinate are isometric
        let a = Vector::sparse([(0, 1.0), (1, 2.0)]).unwrap();
        let b = Vector::sparse([(0, 1.0), (2, -1.0)]).unwrap();
        assert!(check_nonexpansive_on(&shift, &[a, b], 1e-12).unwrap().holds);
    }

    #[test]
    fn asymptotic_examples() {
        let sqrt = Mapping::sqrt_section().unwrap();
        let r = check_asymptotically_nonexpansive(&sqrt, 30, 1.0, 50, 1e-9, 3).unwrap();
        assert!(r.holds);
        assert!(r.note.unwrap().contains("[50, 100]"));
        let pts = [d(&[0.0]), d(&[0.01]), d(&[1.0])];
        assert!(check_asymptotically_nonexpansive_on(&sqrt, &pts, 50, 1e-9).unwrap().holds);

        let t = Mapping::translation(d(&[0.5, 0.5])).unwrap();
        assert!(check_asymptotically_nonexpansive(&t, 20, 3.0, 10, 1e-9, 0).unwrap().holds);

        let r = check_asymptotically_nonexpansive(&doubling(), 10, 1.0, 5, 1e-9, 0).unwrap();
        assert!(!r.holds && r.witness.is_some());
        assert!(check_asymptotically_nonexpansive(&doubling(), 10, 1.0, 1, 1e-9, 0).is_err());
    }

    #[test]
    fn hybrid_examples() {
        let rot = Mapping::rotation(Vector::zeros(2), PI).unwrap();
        assert!(check_generalized_hybrid(&rot, 1.0, 0.0, 30, 4.0, 1e-9, 2).unwrap().holds);
        let ball = ConvexSet::ball(d(&[1.0, 1.0]), 1.0).unwrap();
        let proj = Mapping::projection(ball).unwrap();
        assert!(check_generalized_hybrid(&proj, 1.0, 0.0, 30, 4.0, 1e-9, 2).unwrap().holds);
        assert!(!check_generalized_hybrid(&doubling(), 1.0, 0.0, 10, 1.0, 1e-9, 0).unwrap().holds);
    }

    #[test]
    fn hybrid_one_zero_agrees_with_nonexpansive() {
        let maps = [
            Mapping::rotation(d(&[1.0, 2.0]), 0.7).unwrap(),
            Mapping::projection(ConvexSet::halfspace(d(&[1.0, 1.0]), 0.5).unwrap()).unwrap(),
            Mapping::affine(vec![vec![1.5, 0.0], vec![0.0, 0.2]], vec![0.0, 1.0]).unwrap(),
            Mapping::affine(vec![vec![0.3, 0.4], vec![-0.2, 0.5]], vec![1.0, 1.0]).unwrap(),
        ];
        for m in &maps {
            let pts = m.domain().sample(25, 3.0, 9).unwrap();
            let a = check_nonexpansive_on(m, &pts, 1e-9).unwrap().holds;
            let b = check_generalized_hybrid_on(m, 1.0, 0.0, &pts, 1e-9).unwrap().holds;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn projections_and_compositions_are_nonexpansive() {
        let sets = [
            ConvexSet::ball(d(&[0.5, -1.0]), 2.0).unwrap(),
            ConvexSet::boxed(vec![-1.0, 0.0], vec![1.0, 3.0]).unwrap(),
            ConvexSet::halfspace(d(&[2.0, -1.0]), 1.0).unwrap(),
            ConvexSet::affine(d(&[1.0, 1.0]), vec![d(&[1.0, 2.0])]).unwrap(),
        ];
        let mut maps = Vec::new();
        for s in sets {
            let p = Mapping::projection(s).unwrap();
            assert!(check_nonexpansive(&p, 40, 6.0, 1e-12, 4).unwrap().holds);
            maps.push(p);
        }
        maps.push(Mapping::rotation(d(&[0.0, 1.0]), 1.1).unwrap());
        let comp = Mapping::compose(maps).unwrap();
        assert!(check_nonexpansive(&comp, 40, 6.0, 1e-12, 4).unwrap().holds);
    }
}
