//! Zonotopes: the convex carrier for enclosures, inputs and error sets.

use crate::error::{Error, Result};
use crate::interval::IntervalVector;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Reduction method used when a zonotope is crushed to order 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReductionMethod {
    /// Girard's box reduction: replace the generators by the axis-aligned
    /// box spanned by their absolute row sums.
    #[default]
    GirardBox,
}

/// `{c + sum_i beta_i G(.,i) | beta_i in [-1,1]}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Zonotope {
    c: DVector<f64>,
    g: DMatrix<f64>,
}

impl Zonotope {
    pub fn new(c: DVector<f64>, g: DMatrix<f64>) -> Result<Self> {
        if g.nrows() != c.len() {
            return Err(Error::DimensionMismatch(format!(
                "zonotope center of dimension {} with generator rows {}",
                c.len(),
                g.nrows()
            )));
        }
        Ok(Self { c, g })
    }

    pub fn point(c: DVector<f64>) -> Self {
        let n = c.len();
        Self { c, g: DMatrix::zeros(n, 0) }
    }

    pub fn zero(dim: usize) -> Self {
        Self::point(DVector::zeros(dim))
    }

    pub fn from_interval(iv: &IntervalVector) -> Self {
        let rad = iv.rad();
        Self {
            c: iv.mid(),
            g: DMatrix::from_diagonal(&rad),
        }
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn generators(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn num_generators(&self) -> usize {
        self.g.ncols()
    }

    /// Componentwise sum of absolute generator entries.
    pub fn abs_generator_sum(&self) -> DVector<f64> {
        let mut s = DVector::zeros(self.dim());
        for j in 0..self.g.ncols() {
            for i in 0..self.dim() {
                s[i] += self.g[(i, j)].abs();
            }
        }
        s
    }

    pub fn interval_hull(&self) -> IntervalVector {
        let r = self.abs_generator_sum();
        IntervalVector::new(&self.c - &r, &self.c + &r).expect("radii are non-negative")
    }

    /// Exact support value `max_{x in Z} d^T x`.
    pub fn support(&self, d: &DVector<f64>) -> f64 {
        let mut s = d.dot(&self.c);
        for j in 0..self.g.ncols() {
            s += d.dot(&self.g.column(j).into_owned()).abs();
        }
        s
    }

    pub fn linear_map(&self, m: &DMatrix<f64>) -> Result<Self> {
        if m.ncols() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "matrix with {} columns applied to a zonotope of dimension {}",
                m.ncols(),
                self.dim()
            )));
        }
        Ok(Self {
            c: m * &self.c,
            g: m * &self.g,
        })
    }

    pub fn minkowski_sum(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "zonotope sum of dimensions {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        let mut g = DMatrix::zeros(self.dim(), self.g.ncols() + other.g.ncols());
        g.columns_mut(0, self.g.ncols()).copy_from(&self.g);
        g.columns_mut(self.g.ncols(), other.g.ncols())
            .copy_from(&other.g);
        Ok(Self { c: &self.c + &other.c, g })
    }

    pub fn translate(&self, v: &DVector<f64>) -> Self {
        Self {
            c: &self.c + v,
            g: self.g.clone(),
        }
    }

    /// Stacks `self` on top of `other` (Cartesian product).
    pub fn cartesian_product(&self, other: &Self) -> Self {
        let n1 = self.dim();
        let n2 = other.dim();
        let mut c = DVector::zeros(n1 + n2);
        c.rows_mut(0, n1).copy_from(&self.c);
        c.rows_mut(n1, n2).copy_from(&other.c);
        let mut g = DMatrix::zeros(n1 + n2, self.g.ncols() + other.g.ncols());
        g.view_mut((0, 0), (n1, self.g.ncols())).copy_from(&self.g);
        g.view_mut((n1, self.g.ncols()), (n2, other.g.ncols()))
            .copy_from(&other.g);
        Self { c, g }
    }

    /// Scales the generators by `1 + lambda` about the center.
    pub fn enlarge(&self, lambda: f64) -> Self {
        Self {
            c: self.c.clone(),
            g: &self.g * (1.0 + lambda),
        }
    }

    /// Reduces to order 1 by enclosing the generators with a box.
    pub fn reduce_to_box(&self, method: ReductionMethod) -> Self {
        match method {
            ReductionMethod::GirardBox => {
                let r = self.abs_generator_sum();
                Self {
                    c: self.c.clone(),
                    g: DMatrix::from_diagonal(&r),
                }
            }
        }
    }

    /// Drops all-zero generator columns.
    pub fn drop_zero_generators(&self) -> Self {
        let cols: Vec<usize> = (0..self.g.ncols())
            .filter(|&j| self.g.column(j).iter().any(|v| *v != 0.0))
            .collect();
        let mut g = DMatrix::zeros(self.dim(), cols.len());
        for (k, &j) in cols.iter().enumerate() {
            g.set_column(k, &self.g.column(j));
        }
        Self { c: self.c.clone(), g }
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|v| v.is_finite()) && self.g.iter().all(|v| v.is_finite())
    }

    /// A point of the zonotope for given factor values (clamped nowhere;
    /// caller supplies `beta` in `[-1,1]^q`).
    pub fn point_at(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.c + &self.g * beta
    }

    pub fn sample<R: rand::Rng>(&self, rng: &mut R) -> DVector<f64> {
        let beta = DVector::from_iterator(
            self.g.ncols(),
            (0..self.g.ncols()).map(|_| rng.random_range(-1.0..=1.0)),
        );
        self.point_at(&beta)
    }

    /// Vertices of a two-dimensional zonotope in counter-clockwise order.
    pub fn polygon_2d(&self) -> Result<Vec<(f64, f64)>> {
        if self.dim() != 2 {
            return Err(Error::DimensionMismatch(format!(
                "2-D polygon of a zonotope with dimension {}",
                self.dim()
            )));
        }
        let z = self.drop_zero_generators();
        let m = z.g.ncols();
        if m == 0 {
            return Ok(vec![(z.c[0], z.c[1])]);
        }
        // orient all generators into the upper half plane, sort by angle
        let mut gens: Vec<(f64, f64)> = (0..m)
            .map(|j| {
                let (x, y) = (z.g[(0, j)], z.g[(1, j)]);
                if y < 0.0 || (y == 0.0 && x < 0.0) {
                    (-x, -y)
                } else {
                    (x, y)
                }
            })
            .collect();
        gens.sort_by(|a, b| {
            a.1.atan2(a.0)
                .partial_cmp(&b.1.atan2(b.0))
                .expect("finite angles")
        });
        let sum: (f64, f64) = gens.iter().fold((0.0, 0.0), |s, g| (s.0 + g.0, s.1 + g.1));
        let mut chain = Vec::with_capacity(m + 1);
        let mut p = (z.c[0] - sum.0, z.c[1] - sum.1);
        chain.push(p);
        for g in &gens {
            p = (p.0 + 2.0 * g.0, p.1 + 2.0 * g.1);
            chain.push(p);
        }
        // lower chain is the point reflection of the upper chain through c
        let mut verts = chain.clone();
        for q in chain.iter().take(m).skip(1) {
            verts.push((2.0 * z.c[0] - q.0, 2.0 * z.c[1] - q.1));
        }
        Ok(verts)
    }
}

/// Serialized as `{"c": [...], "G": [[row], ...]}` with row-major generators.
#[derive(Serialize, Deserialize)]
struct ZonotopeJson {
    c: Vec<f64>,
    #[serde(rename = "G")]
    g: Vec<Vec<f64>>,
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub(crate) fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    for r in rows {
        if r.len() != ncols {
            return Err(Error::InvalidSet("ragged matrix rows".to_string()));
        }
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl Serialize for Zonotope {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ZonotopeJson {
            c: self.c.iter().cloned().collect(),
            g: matrix_to_rows(&self.g),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Zonotope {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = ZonotopeJson::deserialize(d)?;
        let c = DVector::from_vec(raw.c);
        let mut g = rows_to_matrix(&raw.g).map_err(serde::de::Error::custom)?;
        if g.nrows() == 0 {
            g = DMatrix::zeros(c.len(), 0);
        }
        Zonotope::new(c, g).map_err(serde::de::Error::custom)
    }
}
