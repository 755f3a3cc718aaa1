//! Multi-dimensional intervals.

use crate::error::{Error, Result};
use crate::poly::RangeBound;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Axis-aligned box `[l, u]` with `l <= u` componentwise.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalVector {
    l: DVector<f64>,
    u: DVector<f64>,
}

impl IntervalVector {
    pub fn new(l: DVector<f64>, u: DVector<f64>) -> Result<Self> {
        if l.len() != u.len() {
            return Err(Error::DimensionMismatch(format!(
                "interval bounds of lengths {} and {}",
                l.len(),
                u.len()
            )));
        }
        for i in 0..l.len() {
            if !(l[i] <= u[i]) {
                return Err(Error::InvalidSet(format!(
                    "interval bound inverted in component {i}: [{}, {}]",
                    l[i], u[i]
                )));
            }
        }
        Ok(Self { l, u })
    }

    pub fn point(x: DVector<f64>) -> Self {
        Self { l: x.clone(), u: x }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            l: DVector::zeros(dim),
            u: DVector::zeros(dim),
        }
    }

    /// The unit box `[-1, 1]^dim`.
    pub fn unit(dim: usize) -> Self {
        Self {
            l: DVector::from_element(dim, -1.0),
            u: DVector::from_element(dim, 1.0),
        }
    }

    pub fn from_components(c: &[RangeBound]) -> Self {
        Self {
            l: DVector::from_iterator(c.len(), c.iter().map(|b| b.lo)),
            u: DVector::from_iterator(c.len(), c.iter().map(|b| b.hi)),
        }
    }

    pub fn dim(&self) -> usize {
        self.l.len()
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.l
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.u
    }

    pub fn mid(&self) -> DVector<f64> {
        (&self.l + &self.u) * 0.5
    }

    pub fn rad(&self) -> DVector<f64> {
        (&self.u - &self.l) * 0.5
    }

    pub fn widths(&self) -> DVector<f64> {
        &self.u - &self.l
    }

    pub fn component(&self, i: usize) -> RangeBound {
        RangeBound::new(self.l[i], self.u[i])
    }

    pub fn components(&self) -> Vec<RangeBound> {
        (0..self.dim()).map(|i| self.component(i)).collect()
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.len() == self.dim()
            && (0..self.dim()).all(|i| self.l[i] - tol <= x[i] && x[i] <= self.u[i] + tol)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "interval sum of dimensions {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(Self {
            l: &self.l + &other.l,
            u: &self.u + &other.u,
        })
    }

    /// Stacks `self` on top of `other`.
    pub fn stack(&self, other: &Self) -> Self {
        let mut l = DVector::zeros(self.dim() + other.dim());
        let mut u = DVector::zeros(self.dim() + other.dim());
        l.rows_mut(0, self.dim()).copy_from(&self.l);
        l.rows_mut(self.dim(), other.dim()).copy_from(&other.l);
        u.rows_mut(0, self.dim()).copy_from(&self.u);
        u.rows_mut(self.dim(), other.dim()).copy_from(&other.u);
        Self { l, u }
    }

    pub fn translate(&self, v: &DVector<f64>) -> Self {
        Self {
            l: &self.l + v,
            u: &self.u + v,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.l.iter().all(|v| v.is_finite()) && self.u.iter().all(|v| v.is_finite())
    }

    pub fn sample<R: rand::Rng>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|i| {
                if self.l[i] == self.u[i] {
                    self.l[i]
                } else {
                    rng.random_range(self.l[i]..=self.u[i])
                }
            }),
        )
    }
}

/// Serialized as `{"l": [...], "u": [...]}`.
#[derive(Serialize, Deserialize)]
struct IntervalJson {
    l: Vec<f64>,
    u: Vec<f64>,
}

impl Serialize for IntervalVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        IntervalJson {
            l: self.l.iter().cloned().collect(),
            u: self.u.iter().cloned().collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for IntervalVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = IntervalJson::deserialize(d)?;
        IntervalVector::new(DVector::from_vec(raw.l), DVector::from_vec(raw.u))
            .map_err(serde::de::Error::custom)
    }
}
