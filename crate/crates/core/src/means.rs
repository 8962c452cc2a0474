//! Asymptotically invariant averages of orbits and the mean vector `T_mu x`
//! as their limit.
//!
//! All schemes average over `T^1 x, ..., T^n x` (the identity is never
//! included). On `N^k` the average runs over the box `1 <= n_i <= n`, with
//! product weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::Vector;
use crate::semigroup::{Address, SemigroupAction, Structure, DEFAULT_BLOWUP};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_WINDOW: usize = 3;
pub const DEFAULT_MAX_STAGE: usize = 1 << 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightRule {
    /// Row `n - 1` holds the weights of `T^1 x, ..., T^m x` at stage `n`.
    Table(Vec<Vec<f64>>),
    /// `w_k` proportional to `exp(-1 / (t (1 - t)))` at `t = k / (n + 1)`.
    /// Its Fourier transform decays faster than any power, so averages of
    /// quasi-periodic and convergent orbits settle much sooner than Cesaro.
    Bump,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AveragingScheme {
    /// `(1/n) sum_{k=1..n} T^k x`; single generator only.
    Cesaro,
    /// Uniform average over `{1..n}^k`.
    Box,
    Weighted(WeightRule),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeanVectorReport {
    pub value: Vector,
    pub stage: usize,
    pub cauchy_residual: f64,
    pub converged: bool,
    /// Every stage after the first.
    pub history: Vec<StageRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageRecord {
    pub stage: usize,
    /// `||avg(stage) - avg(stage / 2)||`.
    pub residual: f64,
    pub value: Vector,
}

fn bump(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        (-1.0 / (t * (1.0 - t))).exp()
    }
}

impl AveragingScheme {
    pub fn name(&self) -> &'static str {
        match self {
            AveragingScheme::Cesaro => "cesaro",
            AveragingScheme::Box => "box",
            AveragingScheme::Weighted(WeightRule::Table(_)) => "weighted",
            AveragingScheme::Weighted(WeightRule::Bump) => "bump",
        }
    }

    pub fn validate(&self, a: &SemigroupAction) -> Result<()> {
        let single = a.rank() == 1;
        match self {
            AveragingScheme::Cesaro if !single => {
                Err(Error::InvalidScheme("cesaro averages need a single generator; use box".into()))
            }
            AveragingScheme::Weighted(WeightRule::Table(_)) if !single => {
                Err(Error::InvalidScheme("weight tables need a single generator".into()))
            }
            _ if a.structure() == Structure::FreeWords && !single => Err(Error::InvalidScheme(
                "averages are only defined for commutative actions".into(),
            )),
            AveragingScheme::Weighted(WeightRule::Table(rows)) => {
                for (n, row) in rows.iter().enumerate() {
                    let sum: f64 = row.iter().sum();
                    if row.is_empty() || row.iter().any(|w| w.is_nan() || *w < 0.0) || (sum - 1.0).abs() > 1e-12 {
                        return Err(Error::InvalidScheme(format!("stage {} weights are not a mean", n + 1)));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Per-axis weights at stage `n`; they are nonnegative and sum to 1.
    pub fn axis_weights(&self, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::InvalidScheme("stage must be at least 1".into()));
        }
        Ok(match self {
            AveragingScheme::Cesaro | AveragingScheme::Box => vec![1.0 / n as f64; n],
            AveragingScheme::Weighted(WeightRule::Table(rows)) => rows
                .get(n - 1)
                .cloned()
                .ok_or_else(|| Error::InvalidScheme(format!("no weights for stage {n}")))?,
            AveragingScheme::Weighted(WeightRule::Bump) => {
                let raw: Vec<f64> = (1..=n).map(|k| bump(k as f64 / (n + 1) as f64)).collect();
                let total: f64 = raw.iter().sum();
                raw.into_iter().map(|w| w / total).collect()
            }
        })
    }

    fn uniform(&self) -> bool {
        matches!(self, AveragingScheme::Cesaro | AveragingScheme::Box)
    }
}

/// Weighted box sum together with the largest orbit norm visited.
fn accumulate(
    scheme: &AveragingScheme,
    a: &SemigroupAction,
    x: &Vector,
    n: usize,
    threshold: f64,
) -> Result<(Vector, f64)> {
    scheme.validate(a)?;
    let weights = scheme.axis_weights(n)?;
    // uniform weights are summed first and divided once
    let w: Vec<f64> = if scheme.uniform() { vec![1.0; weights.len()] } else { weights.clone() };
    let mut sup = 0.0f64;
    let mut sum = x.scale(0.0);
    let gens = a.generators();
    // axis j applies generator j; the innermost point has received all axes
    let mut stack: Vec<(usize, Vector, f64)> = vec![(gens.len(), x.clone(), 1.0)];
    while let Some((axis, y, coef)) = stack.pop() {
        if axis == 0 {
            sum = sum.add_scaled(coef, &y)?;
            continue;
        }
        let g = &gens[axis - 1];
        let mut z = y;
        for wk in &w {
            z = g.apply(&z)?;
            let norm = z.norm();
            if norm > threshold {
                return Err(Error::DivergingOrbit { norm, threshold });
            }
            sup = sup.max(norm);
            if *wk > 0.0 {
                stack.push((axis - 1, z.clone(), coef * wk));
            }
        }
    }
    if scheme.uniform() {
        sum = sum.scale(1.0 / (n as f64).powi(gens.len() as i32));
    }
    Ok((sum, sup))
}

/// The stage-`n` average of the orbit of `x`.
pub fn stage_average(scheme: &AveragingScheme, a: &SemigroupAction, x: &Vector, n: usize) -> Result<Vector> {
    stage_average_with_threshold(scheme, a, x, n, DEFAULT_BLOWUP)
}

pub fn stage_average_with_threshold(
    scheme: &AveragingScheme,
    a: &SemigroupAction,
    x: &Vector,
    n: usize,
    threshold: f64,
) -> Result<Vector> {
    Ok(accumulate(scheme, a, x, n, threshold)?.0)
}

/// `||avg_n(x) - avg_n(T_s x)||`.
pub fn invariance_defect(
    scheme: &AveragingScheme,
    a: &SemigroupAction,
    x: &Vector,
    n: usize,
    s: &Address,
) -> Result<f64> {
    Ok(invariance_defect_with_sup(scheme, a, x, n, s)?.0)
}

/// The defect together with the largest orbit norm seen by either average.
/// For Cesaro with `s = 1` the defect is at most `2 * sup / n`.
pub fn invariance_defect_with_sup(
    scheme: &AveragingScheme,
    a: &SemigroupAction,
    x: &Vector,
    n: usize,
    s: &Address,
) -> Result<(f64, f64)> {
    let (avg, sup_x) = accumulate(scheme, a, x, n, DEFAULT_BLOWUP)?;
    let shifted = a.act(s, x)?;
    let (avg_s, sup_s) = accumulate(scheme, a, &shifted, n, DEFAULT_BLOWUP)?;
    Ok((avg.dist(&avg_s)?, sup_x.max(sup_s)))
}

/// Doubles the stage until `window` consecutive Cauchy residuals
/// `||avg(2n) - avg(n)||` are at most `tol`, or `max_stage` is passed.
pub fn mean_vector(
    scheme: &AveragingScheme,
    a: &SemigroupAction,
    x: &Vector,
    tol: f64,
    max_stage: usize,
    window: usize,
) -> Result<MeanVectorReport> {
    let window = window.max(1);
    let mut n = 1;
    let mut prev = stage_average(scheme, a, x, n)?;
    let mut history = Vec::new();
    let mut passes = 0;
    let mut residual = f64::INFINITY;
    while n * 2 <= max_stage {
        n *= 2;
        let cur = stage_average(scheme, a, x, n)?;
        residual = cur.dist(&prev)?;
        history.push(StageRecord { stage: n, residual, value: cur.clone() });
        prev = cur;
        passes = if residual <= tol { passes + 1 } else { 0 };
        if passes >= window {
            break;
        }
    }
    Ok(MeanVectorReport {
        value: prev,
        stage: n,
        cauchy_residual: residual,
        converged: passes >= window,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mappings::Mapping;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn d(v: &[f64]) -> Vector {
        Vector::dense(v.to_vec())
    }

    fn rotation(p: &[f64], angle: f64) -> SemigroupAction {
        SemigroupAction::single(Mapping::rotation(d(p), angle).unwrap())
    }

    #[test]
    fn stage_average_examples() {
        let r = rotation(&[0.0, 0.0], FRAC_PI_2);
        let avg = stage_average(&AveragingScheme::Cesaro, &r, &d(&[1.0, 0.0]), 4).unwrap();
        assert!(avg.norm() < 1e-15);

        let id = SemigroupAction::single(Mapping::affine(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0; 2]).unwrap());
        let x = d(&[0.3, -7.0]);
        for n in [1, 3, 10] {
            assert!(stage_average(&AveragingScheme::Cesaro, &id, &x, n).unwrap().dist(&x).unwrap() < 1e-15);
        }

        let v = d(&[1.0, 2.0]);
        let t = SemigroupAction::single(Mapping::translation(v.clone()).unwrap());
        for n in [1usize, 7, 100] {
            let avg = stage_average(&AveragingScheme::Cesaro, &t, &Vector::zeros(2), n).unwrap();
            assert!(avg.dist(&v.scale((n as f64 + 1.0) / 2.0)).unwrap() < 1e-12 * n as f64);
        }
    }

    #[test]
    fn weights_are_means() {
        for scheme in [AveragingScheme::Cesaro, AveragingScheme::Box, AveragingScheme::Weighted(WeightRule::Bump)] {
            for n in [1, 2, 5, 64, 1000] {
                let w = scheme.axis_weights(n).unwrap();
                assert_eq!(w.len(), n);
                assert!(w.iter().all(|v| *v >= 0.0));
                assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scheme_validation() {
        let pair = SemigroupAction::commutative(vec![
            Mapping::rotation(d(&[0.0, 0.0]), 0.3).unwrap(),
            Mapping::rotation(d(&[0.0, 0.0]), 0.5).unwrap(),
        ])
        .unwrap();
        let x = d(&[1.0, 0.0]);
        assert!(stage_average(&AveragingScheme::Cesaro, &pair, &x, 4).is_err());
        assert!(stage_average(&AveragingScheme::Box, &pair, &x, 4).is_ok());
        let table = AveragingScheme::Weighted(WeightRule::Table(vec![vec![1.0], vec![0.7, 0.2]]));
        assert!(table.validate(&rotation(&[0.0, 0.0], 1.0)).is_err());
        let table = AveragingScheme::Weighted(WeightRule::Table(vec![vec![1.0], vec![0.0, 1.0]]));
        let r = rotation(&[0.0, 0.0], FRAC_PI_2);
        assert!(stage_average(&table, &r, &x, 2).unwrap().dist(&d(&[-1.0, 0.0])).unwrap() < 1e-15);
        assert!(stage_average(&table, &r, &x, 3).is_err());
    }

    #[test]
    fn box_average_of_commuting_rotations() {
        let pair = SemigroupAction::commutative(vec![
            Mapping::rotation(d(&[0.0, 0.0]), FRAC_PI_2).unwrap(),
            Mapping::rotation(d(&[0.0, 0.0]), PI).unwrap(),
        ])
        .unwrap();
        // sum over n1 of i^n1 vanishes for n = 4
        let avg = stage_average(&AveragingScheme::Box, &pair, &d(&[1.0, 0.0]), 4).unwrap();
        assert!(avg.norm() < 1e-15);
    }

    #[test]
    fn defect_examples() {
        let r = rotation(&[0.0, 0.0], 1.0);
        let x = d(&[1.0, 0.0]);
        let (def, sup) = invariance_defect_with_sup(&AveragingScheme::Cesaro, &r, &x, 100, &Address::one()).unwrap();
        assert!(def <= 2.0 / 100.0 && def <= 2.0 * sup / 100.0);
        // telescoped form
        let direct = r.act(&Address::Multi(vec![101]), &x).unwrap().sub(&r.act(&Address::one(), &x).unwrap()).unwrap();
        assert!((def - direct.norm() / 100.0).abs() < 1e-14);

        let id = SemigroupAction::single(Mapping::affine(vec![vec![1.0]], vec![0.0]).unwrap());
        assert_eq!(invariance_defect(&AveragingScheme::Cesaro, &id, &d(&[2.5]), 17, &Address::one()).unwrap(), 0.0);

        let v = d(&[3.0, 4.0]);
        let t = SemigroupAction::single(Mapping::translation(v.clone()).unwrap());
        for n in [10, 100, 1000] {
            let def = invariance_defect(&AveragingScheme::Cesaro, &t, &Vector::zeros(2), n, &Address::one()).unwrap();
            assert!((def - v.norm()).abs() < 1e-9 * n as f64);
        }
    }

    #[test]
    fn diverging_orbit_is_an_error() {
        let m = SemigroupAction::single(Mapping::affine(vec![vec![2.0]], vec![0.0]).unwrap());
        let err = stage_average(&AveragingScheme::Cesaro, &m, &d(&[1.0]), 100).unwrap_err();
        assert!(matches!(err, Error::DivergingOrbit { .. }));
        assert!(mean_vector(&AveragingScheme::Cesaro, &m, &d(&[1.0]), 1e-8, 1 << 10, 3).is_err());
    }

    #[test]
    fn mean_vector_of_rotation_is_centre() {
        let p = [2.0, -1.0];
        let r = rotation(&p, 0.9);
        let bump = AveragingScheme::Weighted(WeightRule::Bump);
        let rep = mean_vector(&bump, &r, &d(&[5.0, 3.0]), 1e-8, 1 << 14, 3).unwrap();
        assert!(rep.converged, "{rep:?}");
        assert!(rep.cauchy_residual <= 1e-8);
        assert!(rep.value.dist(&d(&p)).unwrap() < 1e-7);

        // Cesaro converges at rate O(1/n) and does not reach 1e-8 here
        let rep = mean_vector(&AveragingScheme::Cesaro, &r, &d(&[5.0, 3.0]), 1e-8, 1 << 12, 3).unwrap();
        assert!(!rep.converged);
        assert!(rep.value.dist(&d(&p)).unwrap() < 20.0 / 4096.0);
    }

    #[test]
    fn mean_vector_of_affine_contraction() {
        // x* = (I - A)^{-1} b solved by hand for this A
        let a = vec![vec![0.5, 0.2], vec![-0.1, 0.3]];
        let b = vec![1.0, 2.0];
        // I - A = [[0.5, -0.2], [0.1, 0.7]]
        let det = 0.5 * 0.7 + 0.2 * 0.1;
        let star = d(&[(0.7 * 1.0 + 0.2 * 2.0) / det, (-0.1 * 1.0 + 0.5 * 2.0) / det]);
        let m = SemigroupAction::single(Mapping::affine(a, b).unwrap());
        let bump = AveragingScheme::Weighted(WeightRule::Bump);
        let rep = mean_vector(&bump, &m, &d(&[-4.0, 9.0]), 1e-8, 1 << 12, 3).unwrap();
        assert!(rep.converged);
        assert!(rep.value.dist(&star).unwrap() < 1e-7, "{} vs {}", rep.value, star);
    }

    #[test]
    fn shift_mean_at_fixed_point() {
        let shift = SemigroupAction::single(Mapping::shift().unwrap());
        let rep = mean_vector(&AveragingScheme::Cesaro, &shift, &Vector::sparse_zero(), 1e-8, 64, 3).unwrap();
        assert!(rep.converged);
        assert_eq!(rep.value, Vector::sparse_zero());
    }

    #[test]
    fn averages_stay_in_orbit_hull() {
        let r = rotation(&[1.0, 1.0], 2.2);
        let x = d(&[0.0, 4.0]);
        let orbit = r.orbit(&x, 64).unwrap();
        for scheme in [AveragingScheme::Cesaro, AveragingScheme::Weighted(WeightRule::Bump)] {
            let avg = stage_average(&scheme, &r, &x, 64).unwrap();
            assert!(avg.norm() <= orbit.max_norm + 1e-12);
        }
    }
}
