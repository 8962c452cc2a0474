#![allow(dead_code)]

use ergodic_core::convex::{ConvexSet, Space};
use ergodic_core::hilbert::Vector;
use ergodic_core::mappings::Mapping;
use ergodic_core::semigroup::SemigroupAction;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn d(v: &[f64]) -> Vector {
    Vector::dense(v.to_vec())
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, dim: usize, r: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-r..r)).collect()
}

/// Brute-force projection of `x` onto `{u : <n_i|u> <= b_i}` by trying every
/// active set with independent normals and keeping the nearest KKT point.
pub fn qp_halfspaces(normals: &[Vec<f64>], offsets: &[f64], x: &[f64]) -> Vec<f64> {
    let m = normals.len();
    let dim = x.len();
    let xv = DVector::from_column_slice(x);
    let feasible = |u: &DVector<f64>| {
        normals.iter().zip(offsets).all(|(n, b)| DVector::from_column_slice(n).dot(u) <= b + 1e-9)
    };
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << m) {
        let active: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        if active.len() > dim {
            continue;
        }
        let u = if active.is_empty() {
            xv.clone()
        } else {
            let a = DMatrix::from_fn(active.len(), dim, |r, c| normals[active[r]][c]);
            let gram = &a * a.transpose();
            if gram.clone().svd(false, false).singular_values.min() < 1e-12 {
                continue;
            }
            let rhs = &a * &xv - DVector::from_iterator(active.len(), active.iter().map(|&i| offsets[i]));
            let Some(lambda) = gram.lu().solve(&rhs) else { continue };
            if lambda.iter().any(|&l| l < -1e-12) {
                continue;
            }
            &xv - a.transpose() * lambda
        };
        if !feasible(&u) {
            continue;
        }
        let dist = (&u - &xv).norm();
        if best.as_ref().is_none_or(|(b, _)| dist < *b) {
            best = Some((dist, u));
        }
    }
    best.expect("feasible instance").1.iter().copied().collect()
}

/// A bounded-orbit action on `R^2` with a known mean for every start point.
pub struct Instance {
    pub name: String,
    pub action: SemigroupAction,
    pub start: Vector,
    /// Invariant set used as `C` in the pipeline.
    pub set: ConvexSet,
    /// Closed-form limit of the averages of `start`.
    pub mean: Vector,
}

fn contraction(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    // A = s R(phi) with s < 1, fixed point x* = (I - A)^{-1} b
    let s = rng.random_range(0.3..0.8);
    let phi: f64 = rng.random_range(-1.0..1.0);
    let a = vec![vec![s * phi.cos(), -s * phi.sin()], vec![s * phi.sin(), s * phi.cos()]];
    let star = uniform_vec(rng, 2, 2.0);
    let b = vec![
        star[0] - (a[0][0] * star[0] + a[0][1] * star[1]),
        star[1] - (a[1][0] * star[0] + a[1][1] * star[1]),
    ];
    (a, b, star)
}

/// Twenty instances cycling through rotations, contractions, projection maps
/// and compositions, alternately on `N` and `N^2`.
pub fn pipeline_instances(seed: u64) -> Vec<Instance> {
    let mut rng = rng(seed);
    let whole = ConvexSet::whole_space(Space::Dense(2)).unwrap();
    (0..20)
        .map(|k| {
            let p = uniform_vec(&mut rng, 2, 2.0);
            let pv = d(&p);
            let start = pv.add(&d(&uniform_vec(&mut rng, 2, 2.0))).unwrap();
            let rank2 = k % 2 == 1;
            let (name, gens, set, mean) = match (k / 2) % 4 {
                0 => {
                    let t1 = rng.random_range(0.5..2.8);
                    let t2 = rng.random_range(0.5..2.8);
                    let mut g = vec![Mapping::rotation(pv.clone(), t1).unwrap()];
                    if rank2 {
                        g.push(Mapping::rotation(pv.clone(), t2).unwrap());
                    }
                    let r = start.dist(&pv).unwrap() + 1.0;
                    ("rotation", g, ConvexSet::ball(pv.clone(), r).unwrap(), pv.clone())
                }
                1 => {
                    let (a, b, star) = contraction(&mut rng);
                    let t = Mapping::affine(a, b).unwrap();
                    let mut g = vec![t.clone()];
                    if rank2 {
                        g.push(Mapping::compose(vec![t.clone(), t]).unwrap());
                    }
                    ("contraction", g, whole.clone(), d(&star))
                }
                2 => {
                    let r = rng.random_range(0.5..1.5);
                    let ball = ConvexSet::ball(pv.clone(), r).unwrap();
                    let proj = ball.project(&start).unwrap();
                    let mut g = vec![Mapping::projection(ball.clone()).unwrap()];
                    if rank2 {
                        let big = ConvexSet::ball(pv.clone(), r + 0.5).unwrap();
                        g.push(Mapping::projection(big).unwrap());
                    }
                    ("projection", g, whole.clone(), proj)
                }
                _ => {
                    let t1 = rng.random_range(0.5..2.8);
                    let r = rng.random_range(0.5..1.5);
                    let rot = Mapping::rotation(pv.clone(), t1).unwrap();
                    let proj = Mapping::projection(ConvexSet::ball(pv.clone(), r).unwrap()).unwrap();
                    let mut g = vec![Mapping::compose(vec![rot.clone(), proj]).unwrap()];
                    if rank2 {
                        g.push(rot);
                    }
                    ("composition", g, whole.clone(), pv.clone())
                }
            };
            let action = if rank2 {
                SemigroupAction::commutative(gens).unwrap()
            } else {
                SemigroupAction::single(gens.into_iter().next().unwrap())
            };
            Instance {
                name: format!("{name}-{}{k}", if rank2 { "n2-" } else { "n-" }),
                action,
                start,
                set,
                mean,
            }
        })
        .collect()
}
