//! Real Hilbert-space arithmetic.
//!
//! A [`Vector`] is either a dense element of `R^d` or a finitely supported
//! element of `l^2`. Dense and sparse vectors can be mixed as long as the
//! dense coordinate range covers the sparse support; the result of a mixed
//! operation is dense.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::Error as _;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Finitely supported sequence. Indices are 0-based, strictly increasing,
/// and no stored value is zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseVec {
    idx: Vec<usize>,
    val: Vec<f64>,
}

impl SparseVec {
    fn from_sorted(idx: Vec<usize>, val: Vec<f64>) -> Self {
        debug_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(val.iter().all(|v| *v != 0.0));
        SparseVec { idx, val }
    }

    pub fn nnz(&self) -> usize {
        self.idx.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.idx.iter().copied().zip(self.val.iter().copied())
    }

    /// One past the largest stored index (0 for the zero sequence).
    pub fn extent(&self) -> usize {
        self.idx.last().map_or(0, |i| i + 1)
    }

    pub fn get(&self, i: usize) -> f64 {
        match self.idx.binary_search(&i) {
            Ok(k) => self.val[k],
            Err(_) => 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Vector {
    Dense(Vec<f64>),
    Sparse(SparseVec),
}

impl Vector {
    pub fn dense(coords: Vec<f64>) -> Vector {
        debug_assert!(coords.iter().all(|c| c.is_finite()));
        Vector::Dense(coords)
    }

    /// Builds a sparse vector from `(index, value)` pairs with 0-based
    /// indices. Zeros are dropped; duplicate indices are rejected.
    pub fn sparse<I>(pairs: I) -> Result<Vector>
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let mut pairs: Vec<(usize, f64)> = pairs.into_iter().collect();
        if pairs.iter().any(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite("sparse literal"));
        }
        pairs.sort_by_key(|(i, _)| *i);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidSet("duplicate sparse index".into()));
        }
        let (idx, val) = pairs.into_iter().filter(|(_, v)| *v != 0.0).unzip();
        Ok(Vector::Sparse(SparseVec::from_sorted(idx, val)))
    }

    pub fn try_dense(coords: Vec<f64>) -> Result<Vector> {
        if coords.iter().all(|c| c.is_finite()) {
            Ok(Vector::Dense(coords))
        } else {
            Err(Error::NonFinite("dense literal"))
        }
    }

    pub fn zeros(d: usize) -> Vector {
        Vector::Dense(vec![0.0; d])
    }

    pub fn sparse_zero() -> Vector {
        Vector::Sparse(SparseVec::default())
    }

    /// Dense unit vector `e_i` of `R^d`.
    pub fn basis(d: usize, i: usize) -> Vector {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        Vector::Dense(v)
    }

    /// Sparse unit vector `e_i` of `l^2`.
    pub fn sparse_basis(i: usize) -> Vector {
        Vector::Sparse(SparseVec::from_sorted(vec![i], vec![1.0]))
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, Vector::Sparse(_))
    }

    /// Smallest dense dimension able to hold every nonzero coordinate
    /// (the full length for dense vectors).
    pub fn extent(&self) -> usize {
        match self {
            Vector::Dense(v) => v.len(),
            Vector::Sparse(s) => s.extent(),
        }
    }

    pub fn get(&self, i: usize) -> f64 {
        match self {
            Vector::Dense(v) => v.get(i).copied().unwrap_or(0.0),
            Vector::Sparse(s) => s.get(i),
        }
    }

    /// Dense coordinates padded to dimension `d`.
    pub fn to_dense(&self, d: usize) -> Result<Vec<f64>> {
        match self {
            Vector::Dense(v) if v.len() == d => Ok(v.clone()),
            Vector::Sparse(s) if s.extent() <= d => {
                let mut out = vec![0.0; d];
                for (i, x) in s.iter() {
                    out[i] = x;
                }
                Ok(out)
            }
            _ => Err(Error::IncompatibleSpace {
                left: self.describe(),
                right: format!("dense({d})"),
            }),
        }
    }

    /// Re-expresses the vector in the representation of `like`.
    pub fn in_representation_of(&self, like: &Vector) -> Result<Vector> {
        match like {
            Vector::Dense(v) => Ok(Vector::Dense(self.to_dense(v.len())?)),
            Vector::Sparse(_) => Ok(self.to_sparse()),
        }
    }

    pub fn to_sparse(&self) -> Vector {
        match self {
            Vector::Sparse(_) => self.clone(),
            Vector::Dense(v) => {
                let (idx, val) = v
                    .iter()
                    .enumerate()
                    .filter(|(_, x)| **x != 0.0)
                    .map(|(i, x)| (i, *x))
                    .unzip();
                Vector::Sparse(SparseVec::from_sorted(idx, val))
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Vector::Dense(v) => format!("dense({})", v.len()),
            Vector::Sparse(s) => format!("sparse(extent {})", s.extent()),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Vector::Dense(v) => v.iter().all(|x| x.is_finite()),
            Vector::Sparse(s) => s.val.iter().all(|x| x.is_finite()),
        }
    }

    pub fn compatible(&self, other: &Vector) -> bool {
        match (self, other) {
            (Vector::Dense(a), Vector::Dense(b)) => a.len() == b.len(),
            (Vector::Sparse(_), Vector::Sparse(_)) => true,
            (Vector::Dense(a), Vector::Sparse(s)) | (Vector::Sparse(s), Vector::Dense(a)) => {
                s.extent() <= a.len()
            }
        }
    }

    fn check(&self, other: &Vector) -> Result<()> {
        if self.compatible(other) {
            Ok(())
        } else {
            Err(Error::IncompatibleSpace {
                left: self.describe(),
                right: other.describe(),
            })
        }
    }

    pub fn inner(&self, other: &Vector) -> Result<f64> {
        self.check(other)?;
        let ip = match (self, other) {
            (Vector::Dense(a), Vector::Dense(b)) => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            (Vector::Dense(a), Vector::Sparse(s)) | (Vector::Sparse(s), Vector::Dense(a)) => {
                s.iter().map(|(i, x)| x * a[i]).sum()
            }
            (Vector::Sparse(a), Vector::Sparse(b)) => {
                let (mut i, mut j, mut acc) = (0, 0, 0.0);
                while i < a.idx.len() && j < b.idx.len() {
                    match a.idx[i].cmp(&b.idx[j]) {
                        std::cmp::Ordering::Less => i += 1,
                        std::cmp::Ordering::Greater => j += 1,
                        std::cmp::Ordering::Equal => {
                            acc += a.val[i] * b.val[j];
                            i += 1;
                            j += 1;
                        }
                    }
                }
                acc
            }
        };
        if ip.is_finite() {
            Ok(ip)
        } else {
            Err(Error::NonFinite("inner product"))
        }
    }

    pub fn norm_sq(&self) -> f64 {
        match self {
            Vector::Dense(v) => v.iter().map(|x| x * x).sum(),
            Vector::Sparse(s) => s.val.iter().map(|x| x * x).sum(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `a*self + b*other`.
    pub fn lincomb(&self, a: f64, other: &Vector, b: f64) -> Result<Vector> {
        self.check(other)?;
        let out = match (self, other) {
            (Vector::Dense(x), Vector::Dense(y)) => {
                Vector::Dense(x.iter().zip(y).map(|(p, q)| a * p + b * q).collect())
            }
            (Vector::Dense(x), Vector::Sparse(s)) => {
                let mut v: Vec<f64> = x.iter().map(|p| a * p).collect();
                for (i, q) in s.iter() {
                    v[i] += b * q;
                }
                Vector::Dense(v)
            }
            (Vector::Sparse(s), Vector::Dense(y)) => {
                let mut v: Vec<f64> = y.iter().map(|q| b * q).collect();
                for (i, p) in s.iter() {
                    v[i] += a * p;
                }
                Vector::Dense(v)
            }
            (Vector::Sparse(x), Vector::Sparse(y)) => {
                let mut idx = Vec::with_capacity(x.nnz() + y.nnz());
                let mut val = Vec::with_capacity(x.nnz() + y.nnz());
                let mut push = |i: usize, v: f64| {
                    if v != 0.0 {
                        idx.push(i);
                        val.push(v);
                    }
                };
                let (mut i, mut j) = (0, 0);
                while i < x.idx.len() || j < y.idx.len() {
                    let xi = x.idx.get(i).copied().unwrap_or(usize::MAX);
                    let yj = y.idx.get(j).copied().unwrap_or(usize::MAX);
                    if xi < yj {
                        push(xi, a * x.val[i]);
                        i += 1;
                    } else if yj < xi {
                        push(yj, b * y.val[j]);
                        j += 1;
                    } else {
                        push(xi, a * x.val[i] + b * y.val[j]);
                        i += 1;
                        j += 1;
                    }
                }
                Vector::Sparse(SparseVec::from_sorted(idx, val))
            }
        };
        if out.is_finite() {
            Ok(out)
        } else {
            Err(Error::NonFinite("linear combination"))
        }
    }

    pub fn add(&self, other: &Vector) -> Result<Vector> {
        self.lincomb(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Vector) -> Result<Vector> {
        self.lincomb(1.0, other, -1.0)
    }

    pub fn scale(&self, a: f64) -> Vector {
        match self {
            Vector::Dense(v) => Vector::Dense(v.iter().map(|x| a * x).collect()),
            Vector::Sparse(_) if a == 0.0 => Vector::sparse_zero(),
            Vector::Sparse(s) => {
                Vector::Sparse(SparseVec::from_sorted(s.idx.clone(), s.val.iter().map(|x| a * x).collect()))
            }
        }
    }

    /// `self + a*other`.
    pub fn add_scaled(&self, a: f64, other: &Vector) -> Result<Vector> {
        self.lincomb(1.0, other, a)
    }

    pub fn dist(&self, other: &Vector) -> Result<f64> {
        Ok(self.sub(other)?.norm())
    }
}

/// `lambda*x + (1 - lambda)*y`.
pub fn combine(lambda: f64, x: &Vector, y: &Vector) -> Result<Vector> {
    x.lincomb(lambda, y, 1.0 - lambda)
}

pub fn inner(x: &Vector, y: &Vector) -> Result<f64> {
    x.inner(y)
}

pub fn norm(x: &Vector) -> f64 {
    x.norm()
}

impl fmt::Display for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Vector::Dense(v) => {
                write!(f, "[")?;
                for (k, x) in v.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "]")
            }
            Vector::Sparse(s) => {
                write!(f, "{{")?;
                for (k, (i, x)) in s.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{}: {x}", i + 1)?;
                }
                write!(f, "}}")
            }
        }
    }
}

// Literal syntax: dense `[1.0, 2.0]`, sparse `{"3": 1.5}` with 1-based keys.

impl Serialize for Vector {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Vector::Dense(v) => v.serialize(ser),
            Vector::Sparse(s) => {
                let mut map = ser.serialize_map(Some(s.nnz()))?;
                for (i, x) in s.iter() {
                    map.serialize_entry(&(i + 1).to_string(), &x)?;
                }
                map.end()
            }
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Literal {
    Dense(Vec<f64>),
    Sparse(BTreeMap<String, f64>),
}

impl<'de> Deserialize<'de> for Vector {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        match Literal::deserialize(de)? {
            Literal::Dense(v) => Vector::try_dense(v).map_err(D::Error::custom),
            Literal::Sparse(map) => {
                let mut pairs = Vec::with_capacity(map.len());
                for (key, x) in map {
                    let k: usize = key
                        .parse()
                        .map_err(|_| D::Error::custom(format!("sparse key {key:?} is not an index")))?;
                    if k == 0 {
                        return Err(D::Error::custom("sparse keys are 1-based"));
                    }
                    pairs.push((k - 1, x));
                }
                Vector::sparse(pairs).map_err(D::Error::custom)
            }
        }
    }
}
