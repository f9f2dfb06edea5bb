//! Finite measure spaces and square-integrable functions on them.
//!
//! A space is an ordered list of labelled points with strictly positive weights.
//! Every function carries a handle to its space; binary operations check that both
//! operands live on the same space (structurally, so round-trips through JSON
//! compare equal).

use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, PartialEq)]
struct SpaceData {
    ids: Vec<String>,
    weights: Vec<f64>,
}

/// Finite measure space: ordered labelled points with positive weights.
/// Cheap to clone; equality is structural.
#[derive(Debug, Clone)]
pub struct MeasureSpace {
    data: Arc<SpaceData>,
}

impl PartialEq for MeasureSpace {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.data, &other.data) || self.data == other.data
    }
}

impl MeasureSpace {
    pub fn new(ids: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::InvalidSpace("space must have at least one point".into()));
        }
        if ids.len() != weights.len() {
            return Err(Error::InvalidSpace(format!(
                "{} point ids but {} weights",
                ids.len(),
                weights.len()
            )));
        }
        for (i, w) in weights.iter().enumerate() {
            if !w.is_finite() || *w <= 0.0 {
                return Err(Error::InvalidSpace(format!(
                    "weight of point {:?} must be finite and positive, got {w}",
                    ids[i]
                )));
            }
        }
        let mut seen = ids.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidSpace("point ids must be distinct".into()));
        }
        Ok(Self { data: Arc::new(SpaceData { ids, weights }) })
    }

    /// Counting measure on `n` points labelled `p0..p{n-1}`.
    pub fn counting(n: usize) -> Self {
        Self::new((0..n).map(|i| format!("p{i}")).collect(), vec![1.0; n])
            .expect("counting measure is valid for n >= 1")
    }

    pub fn with_weights(weights: Vec<f64>) -> Result<Self> {
        let ids = (0..weights.len()).map(|i| format!("p{i}")).collect();
        Self::new(ids, weights)
    }

    pub fn len(&self) -> usize {
        self.data.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn ids(&self) -> &[String] {
        &self.data.ids
    }

    pub fn weights(&self) -> &[f64] {
        &self.data.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.data.weights[i]
    }

    pub fn total_mass(&self) -> f64 {
        self.data.weights.iter().sum()
    }

    pub fn min_weight(&self) -> f64 {
        self.data.weights.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn check_same(&self, other: &Self, what: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::DomainMismatch(format!("{what}: operands live on different spaces")))
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SpaceJson {
    points: Vec<String>,
    weights: Vec<f64>,
}

impl Serialize for MeasureSpace {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SpaceJson { points: self.data.ids.clone(), weights: self.data.weights.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MeasureSpace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = SpaceJson::deserialize(d)?;
        MeasureSpace::new(raw.points, raw.weights).map_err(serde::de::Error::custom)
    }
}

/// Choice of pointwise lattice operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatticeOp {
    Vee,
    Wedge,
}

/// Real-valued function on a [`MeasureSpace`], identified with its value vector.
#[derive(Debug, Clone, PartialEq)]
pub struct L2Fn {
    space: MeasureSpace,
    values: Vec<f64>,
}

impl L2Fn {
    pub fn new(space: MeasureSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::InvalidFunction(format!(
                "space has {} points but {} values given",
                space.len(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidFunction(format!("values must be finite, got {v}")));
        }
        Ok(Self { space, values })
    }

    pub fn zero(space: &MeasureSpace) -> Self {
        Self { space: space.clone(), values: vec![0.0; space.len()] }
    }

    pub fn constant(space: &MeasureSpace, c: f64) -> Result<Self> {
        Self::new(space.clone(), vec![c; space.len()])
    }

    pub fn from_fn(space: &MeasureSpace, f: impl FnMut(usize) -> f64) -> Result<Self> {
        Self::new(space.clone(), (0..space.len()).map(f).collect())
    }

    pub fn space(&self) -> &MeasureSpace {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Weighted inner product `sum_x m(x) f(x) g(x)`.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.space.check_same(&other.space, "inner")?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .zip(self.space.weights())
            .map(|((a, b), w)| w * a * b)
            .sum())
    }

    /// L2(m) norm.
    pub fn norm(&self) -> f64 {
        self.inner(self).expect("same space").sqrt()
    }

    pub fn linf(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Pointwise maximum.
    pub fn vee(&self, other: &Self) -> Result<Self> {
        self.space.check_same(&other.space, "vee")?;
        Ok(self.zip_with(other, f64::max))
    }

    /// Pointwise minimum.
    pub fn wedge(&self, other: &Self) -> Result<Self> {
        self.space.check_same(&other.space, "wedge")?;
        Ok(self.zip_with(other, f64::min))
    }

    pub fn lattice(&self, other: &Self, op: LatticeOp) -> Result<Self> {
        match op {
            LatticeOp::Vee => self.vee(other),
            LatticeOp::Wedge => self.wedge(other),
        }
    }

    /// Pointwise clamp of `self` into the band `[lower, upper]`.
    /// Errors unless `lower <= upper` everywhere.
    pub fn median_clamp(&self, lower: &Self, upper: &Self) -> Result<Self> {
        self.space.check_same(&lower.space, "median_clamp")?;
        self.space.check_same(&upper.space, "median_clamp")?;
        for i in 0..self.len() {
            if lower.values[i] > upper.values[i] {
                return Err(Error::InvalidBand(format!(
                    "lower {} exceeds upper {} at point {}",
                    lower.values[i], upper.values[i], self.space.ids()[i]
                )));
            }
        }
        Ok(Self {
            space: self.space.clone(),
            values: (0..self.len())
                .map(|i| self.values[i].max(lower.values[i]).min(upper.values[i]))
                .collect(),
        })
    }

    /// Clamp of `self` into the band `[center - alpha, center + alpha]` pointwise.
    pub fn band_around(&self, center: &Self, alpha: f64) -> Result<Self> {
        self.space.check_same(&center.space, "band_around")?;
        if !(alpha >= 0.0) {
            return Err(Error::InvalidBand(format!("band half-width must be >= 0, got {alpha}")));
        }
        Ok(Self {
            space: self.space.clone(),
            values: self
                .values
                .iter()
                .zip(&center.values)
                .map(|(f, c)| f.max(c - alpha).min(c + alpha))
                .collect(),
        })
    }

    pub fn map(&self, f: impl FnMut(f64) -> f64) -> Self {
        Self { space: self.space.clone(), values: self.values.iter().cloned().map(f).collect() }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            space: self.space.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: f64, other: &Self) -> Self {
        assert!(self.space == other.space, "add_scaled: operands live on different spaces");
        self.zip_with(other, |a, b| a + c * b)
    }
}

macro_rules! fn_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait for &L2Fn {
            type Output = L2Fn;
            fn $method(self, rhs: &L2Fn) -> L2Fn {
                assert!(
                    self.space == rhs.space,
                    concat!(stringify!($method), ": operands live on different spaces")
                );
                self.zip_with(rhs, |a, b| a $op b)
            }
        }
    };
}

fn_binop!(Add, add, +);
fn_binop!(Sub, sub, -);

impl Neg for &L2Fn {
    type Output = L2Fn;
    fn neg(self) -> L2Fn {
        self.map(|v| -v)
    }
}

impl Mul<f64> for &L2Fn {
    type Output = L2Fn;
    fn mul(self, c: f64) -> L2Fn {
        self.scale(c)
    }
}
