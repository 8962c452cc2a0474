//! Discrete semigroups acting on a convex set: `N^k` through `k` commuting
//! generators, and free word semigroups.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::convex::ConvexSet;
use crate::error::{Error, Result};
use crate::hilbert::Vector;
use crate::mappings::{worst_case, Mapping, PropertyReport, Witness};

pub const DEFAULT_BLOWUP: f64 = 1e6;

const COMMUTE_SAMPLES: usize = 32;
const COMMUTE_RADIUS: f64 = 10.0;
const COMMUTE_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Structure {
    Commutative,
    FreeWords,
}

/// Element of the semigroup. `Multi(n)` is `T_1^{n_1} ... T_k^{n_k}`;
/// `Word(w)` is `T_{w[0]} T_{w[1]} ...`, applied right to left.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Address {
    Multi(Vec<u64>),
    Word(Vec<usize>),
}

impl Address {
    /// The semigroup product `self * other`.
    pub fn product(&self, other: &Address) -> Result<Address> {
        match (self, other) {
            (Address::Multi(a), Address::Multi(b)) if a.len() == b.len() => {
                Ok(Address::Multi(a.iter().zip(b).map(|(p, q)| p + q).collect()))
            }
            (Address::Word(a), Address::Word(b)) => Ok(Address::Word([a.as_slice(), b].concat())),
            _ => Err(Error::InvalidAddress(format!("cannot multiply {self} by {other}"))),
        }
    }

    /// Total number of generator applications.
    pub fn length(&self) -> u64 {
        match self {
            Address::Multi(n) => n.iter().sum(),
            Address::Word(w) => w.len() as u64,
        }
    }

    /// `Multi([1])`, the generator of `N`.
    pub fn one() -> Address {
        Address::Multi(vec![1])
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: Vec<String>| v.join(",");
        match self {
            Address::Multi(n) => write!(f, "({})", join(n.iter().map(u64::to_string).collect())),
            Address::Word(w) => write!(f, "w[{}]", join(w.iter().map(usize::to_string).collect())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundedness {
    No,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrbitTrace {
    pub points: Vec<(Address, Vector)>,
    pub max_norm: f64,
    pub verdict: Boundedness,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SemigroupAction {
    generators: Vec<Mapping>,
    structure: Structure,
}

/// Pairwise commutation of `gens` on samples from the first generator's
/// domain. An empty or single-generator list holds vacuously.
pub fn check_commuting(gens: &[Mapping], samples: usize, tol: f64, seed: u64) -> Result<PropertyReport> {
    let Some(first) = gens.first() else {
        return Ok(PropertyReport::from_worst(None, tol, 0));
    };
    let points = first.domain().sample(samples, COMMUTE_RADIUS, seed)?;
    let cases: Vec<(usize, usize, usize)> = (0..points.len())
        .flat_map(|p| (0..gens.len()).flat_map(move |i| (i + 1..gens.len()).map(move |j| (p, i, j))))
        .collect();
    let found = worst_case(&cases, |&(p, i, j)| {
        let x = &points[p];
        let ij = gens[i].apply(&gens[j].apply(x)?)?;
        let ji = gens[j].apply(&gens[i].apply(x)?)?;
        Ok((ij.dist(&ji)?, 0.0))
    })?;
    let worst = found.map(|(k, lhs, rhs)| {
        let (p, i, j) = cases[k];
        let mut n = vec![0; gens.len()];
        n[i] = 1;
        n[j] = 1;
        Witness { x: points[p].clone(), y: None, element: Some(Address::Multi(n)), lhs, rhs }
    });
    Ok(PropertyReport::from_worst(worst, tol, points.len()))
}

impl SemigroupAction {
    /// `N^k` generated by commuting maps; commutation is checked on samples.
    pub fn commutative(generators: Vec<Mapping>) -> Result<SemigroupAction> {
        Self::shared_domain(&generators)?;
        let report = check_commuting(&generators, COMMUTE_SAMPLES, COMMUTE_TOL, 0)?;
        if let Some(w) = report.witness {
            return Err(Error::NotCommuting(Box::new(w)));
        }
        Ok(SemigroupAction { generators, structure: Structure::Commutative })
    }

    pub fn single(generator: Mapping) -> SemigroupAction {
        SemigroupAction { generators: vec![generator], structure: Structure::Commutative }
    }

    pub fn free(generators: Vec<Mapping>) -> Result<SemigroupAction> {
        Self::shared_domain(&generators)?;
        Ok(SemigroupAction { generators, structure: Structure::FreeWords })
    }

    fn shared_domain(generators: &[Mapping]) -> Result<()> {
        let Some(first) = generators.first() else {
            return Err(Error::InvalidMapping("an action needs at least one generator".into()));
        };
        if generators.iter().any(|g| g.domain() != first.domain()) {
            return Err(Error::InvalidMapping("generators must share one domain".into()));
        }
        Ok(())
    }

    pub fn generators(&self) -> &[Mapping] {
        &self.generators
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn domain(&self) -> &ConvexSet {
        self.generators[0].domain()
    }

    /// Single-generator addresses `e_i` (or the one-letter words).
    pub fn generator_addresses(&self) -> Vec<Address> {
        (0..self.rank())
            .map(|i| match self.structure {
                Structure::Commutative => {
                    let mut n = vec![0; self.rank()];
                    n[i] = 1;
                    Address::Multi(n)
                }
                Structure::FreeWords => Address::Word(vec![i]),
            })
            .collect()
    }

    pub fn validate(&self, s: &Address) -> Result<()> {
        let ok = match (self.structure, s) {
            (Structure::Commutative, Address::Multi(n)) => n.len() == self.rank() && n.iter().any(|&k| k > 0),
            (Structure::FreeWords, Address::Word(w)) => !w.is_empty() && w.iter().all(|&i| i < self.rank()),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidAddress(format!("{s} for a rank-{} {:?} action", self.rank(), self.structure)))
        }
    }

    /// `T_s x`.
    pub fn act(&self, s: &Address, x: &Vector) -> Result<Vector> {
        self.validate(s)?;
        let mut y = x.clone();
        match s {
            Address::Multi(n) => {
                for (g, &k) in self.generators.iter().zip(n).rev() {
                    for _ in 0..k {
                        y = g.apply(&y)?;
                    }
                }
            }
            Address::Word(w) => {
                for &i in w.iter().rev() {
                    y = self.generators[i].apply(&y)?;
                }
            }
        }
        Ok(y)
    }

    pub fn orbit(&self, x: &Vector, budget: usize) -> Result<OrbitTrace> {
        self.orbit_with_threshold(x, budget, DEFAULT_BLOWUP)
    }

    /// The first `budget` orbit points in graded-lex (commutative) or
    /// length-lex (free) order, excluding `x` itself. Enumeration stops
    /// early if the iterates overflow.
    pub fn orbit_with_threshold(&self, x: &Vector, budget: usize, threshold: f64) -> Result<OrbitTrace> {
        let mut points: Vec<(Address, Vector)> = Vec::with_capacity(budget);
        let mut overflow = false;
        let mut prev: HashMap<Address, usize> = HashMap::new();
        let mut degree = 0usize;
        'outer: while points.len() < budget {
            degree += 1;
            let mut layer = HashMap::new();
            for s in self.layer(degree) {
                if points.len() == budget {
                    break 'outer;
                }
                let (g, rest) = self.split(&s);
                let base = match &rest {
                    None => x,
                    Some(r) => &points[prev[r]].1,
                };
                match self.generators[g].apply(base) {
                    Ok(y) => {
                        layer.insert(s.clone(), points.len());
                        points.push((s, y));
                    }
                    Err(Error::NonFinite(_)) => {
                        overflow = true;
                        break 'outer;
                    }
                    Err(e) => return Err(e),
                }
            }
            prev = layer;
        }
        let max_norm = points.iter().map(|(_, p)| p.norm()).fold(0.0, f64::max);
        let verdict = if overflow || max_norm > threshold { Boundedness::No } else { Boundedness::Unknown };
        Ok(OrbitTrace { points, max_norm, verdict })
    }

    /// All elements of length `degree` in enumeration order.
    pub fn layer(&self, degree: usize) -> Vec<Address> {
        let k = self.rank();
        match self.structure {
            Structure::Commutative => {
                let mut out = Vec::new();
                let mut cur = vec![0u64; k];
                compositions(degree as u64, 0, &mut cur, &mut out);
                out.into_iter().map(Address::Multi).collect()
            }
            Structure::FreeWords => {
                let mut out: Vec<Vec<usize>> = vec![Vec::new()];
                for _ in 0..degree {
                    out = out
                        .into_iter()
                        .flat_map(|w| (0..k).map(move |i| [w.as_slice(), &[i]].concat()))
                        .collect();
                }
                out.into_iter().map(Address::Word).collect()
            }
        }
    }

    /// Writes `s = g * rest` with `g` a generator index; `rest` is `None`
    /// when `s` is a single generator.
    fn split(&self, s: &Address) -> (usize, Option<Address>) {
        match s {
            Address::Multi(n) => {
                let g = n.iter().rposition(|&v| v > 0).expect("nonzero multi-index");
                let mut rest = n.clone();
                rest[g] -= 1;
                (g, rest.iter().any(|&v| v > 0).then_some(Address::Multi(rest)))
            }
            Address::Word(w) => (w[0], (w.len() > 1).then(|| Address::Word(w[1..].to_vec()))),
        }
    }
}

/// Multi-indices of length `cur.len()` summing to `total`, lexicographically.
fn compositions(total: u64, pos: usize, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
    if pos + 1 == cur.len() {
        cur[pos] = total;
        out.push(cur.clone());
        return;
    }
    for v in 0..=total {
        cur[pos] = v;
        compositions(total - v, pos + 1, cur, out);
    }
    cur[pos] = 0;
}
