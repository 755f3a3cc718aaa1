//! Sparse polynomial zonotopes and the set operations on them.

use crate::error::{Error, Result};
use crate::interval::IntervalVector;
use crate::poly::{PolyExpr, Term};
use crate::taylor_model::TaylorModel;
use crate::zonotope::{matrix_to_rows, rows_to_matrix, ReductionMethod, Zonotope};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

/// Issues globally unique dependent-factor identifiers. Every id handed out
/// is greater than all previously issued ids of this generator.
#[derive(Debug)]
pub struct IdGenerator {
    next: AtomicU64,
}

impl Default for IdGenerator {
    fn default() -> Self {
        Self::new()
    }
}

impl IdGenerator {
    pub fn new() -> Self {
        Self { next: AtomicU64::new(1) }
    }

    /// Continues issuing above an existing id, e.g. after loading stored sets.
    pub fn starting_after(max_id: u64) -> Self {
        Self {
            next: AtomicU64::new(max_id + 1),
        }
    }

    pub fn fresh(&self) -> u64 {
        self.next.fetch_add(1, AtomicOrdering::Relaxed)
    }

    pub fn fresh_block(&self, k: usize) -> Vec<u64> {
        let start = self.next.fetch_add(k as u64, AtomicOrdering::Relaxed);
        (start..start + k as u64).collect()
    }
}

/// Sparse polynomial zonotope
/// `{ sum_i (prod_k alpha_k^E(k,i)) G(.,i) + sum_j beta_j GI(.,j) }`
/// over `alpha_k, beta_j in [-1,1]`, with an identifier per dependent factor.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyZonotope {
    g: DMatrix<f64>,
    gi: DMatrix<f64>,
    e: DMatrix<u32>,
    id: Vec<u64>,
}

impl PolyZonotope {
    pub fn new(g: DMatrix<f64>, gi: DMatrix<f64>, e: DMatrix<u32>, id: Vec<u64>) -> Result<Self> {
        if gi.nrows() != g.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "dependent generators with {} rows, independent with {}",
                g.nrows(),
                gi.nrows()
            )));
        }
        if e.ncols() != g.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "exponent matrix with {} columns for {} dependent generators",
                e.ncols(),
                g.ncols()
            )));
        }
        if e.nrows() != id.len() {
            return Err(Error::DimensionMismatch(format!(
                "exponent matrix with {} rows for {} identifiers",
                e.nrows(),
                id.len()
            )));
        }
        let mut seen = id.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != id.len() {
            return Err(Error::InvalidSet("duplicate factor identifiers".to_string()));
        }
        if id.iter().any(|&i| i == 0) {
            return Err(Error::InvalidSet("identifiers must be positive".to_string()));
        }
        Ok(Self { g, gi, e, id })
    }

    /// The single point `{x}`.
    pub fn from_point(x: DVector<f64>) -> Self {
        let n = x.len();
        Self {
            g: DMatrix::from_columns(&[x]),
            gi: DMatrix::zeros(n, 0),
            e: DMatrix::zeros(0, 1),
            id: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn num_dependent(&self) -> usize {
        self.g.ncols()
    }

    pub fn num_independent(&self) -> usize {
        self.gi.ncols()
    }

    pub fn num_factors(&self) -> usize {
        self.id.len()
    }

    /// Order `rho = (h + q) / n`.
    pub fn order(&self) -> f64 {
        (self.num_dependent() + self.num_independent()) as f64 / self.dim() as f64
    }

    pub fn dep_generators(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn indep_generators(&self) -> &DMatrix<f64> {
        &self.gi
    }

    pub fn exponents(&self) -> &DMatrix<u32> {
        &self.e
    }

    pub fn ids(&self) -> &[u64] {
        &self.id
    }

    pub fn max_id(&self) -> u64 {
        self.id.iter().copied().max().unwrap_or(0)
    }

    pub fn is_finite(&self) -> bool {
        self.g.iter().all(|v| v.is_finite()) && self.gi.iter().all(|v| v.is_finite())
    }

    // -- point evaluation helpers ------------------------------------------

    /// Values of the monomial variable parts at `alpha`, one per column.
    pub fn monomials(&self, alpha: &[f64]) -> Vec<f64> {
        assert_eq!(alpha.len(), self.num_factors());
        (0..self.g.ncols())
            .map(|j| {
                let mut m = 1.0;
                for k in 0..self.e.nrows() {
                    let e = self.e[(k, j)];
                    if e > 0 {
                        m *= alpha[k].powi(e as i32);
                    }
                }
                m
            })
            .collect()
    }

    /// Dependent part `f_{G,E}(alpha)`.
    pub fn dependent_value(&self, alpha: &[f64]) -> DVector<f64> {
        let monos = self.monomials(alpha);
        let mut x = DVector::zeros(self.dim());
        for (j, m) in monos.iter().enumerate() {
            x.axpy(*m, &self.g.column(j).into_owned(), 1.0);
        }
        x
    }

    /// The point for explicit factor values.
    pub fn point_at(&self, alpha: &[f64], beta: &[f64]) -> DVector<f64> {
        assert_eq!(beta.len(), self.num_independent());
        let mut x = self.dependent_value(alpha);
        for (j, b) in beta.iter().enumerate() {
            x.axpy(*b, &self.gi.column(j).into_owned(), 1.0);
        }
        x
    }

    pub fn sample<R: rand::Rng>(&self, rng: &mut R) -> DVector<f64> {
        let alpha: Vec<f64> = (0..self.num_factors())
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        let beta: Vec<f64> = (0..self.num_independent())
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        self.point_at(&alpha, &beta)
    }

    // -- preliminary operations --------------------------------------------

    /// Rewrites two sets over a common identifier list: the first set's ids,
    /// then the second set's novel ids in order. Exponent rows are zero-padded.
    pub fn merge_id(pz1: &Self, pz2: &Self) -> (Self, Self) {
        let mut merged = pz1.id.clone();
        for &i in &pz2.id {
            if !merged.contains(&i) {
                merged.push(i);
            }
        }
        let a = merged.len();
        let mut e1 = DMatrix::zeros(a, pz1.e.ncols());
        e1.view_mut((0, 0), (pz1.e.nrows(), pz1.e.ncols()))
            .copy_from(&pz1.e);
        let mut e2 = DMatrix::zeros(a, pz2.e.ncols());
        for (i, mid) in merged.iter().enumerate() {
            if let Some(j) = pz2.id.iter().position(|x| x == mid) {
                for col in 0..pz2.e.ncols() {
                    e2[(i, col)] = pz2.e[(j, col)];
                }
            }
        }
        (
            Self {
                g: pz1.g.clone(),
                gi: pz1.gi.clone(),
                e: e1,
                id: merged.clone(),
            },
            Self {
                g: pz2.g.clone(),
                gi: pz2.gi.clone(),
                e: e2,
                id: merged,
            },
        )
    }

    /// Compressed representation: merges monomials with identical variable
    /// parts (preserving first-occurrence order), drops exactly-zero
    /// generator columns, and prunes all-zero exponent rows.
    pub fn compact(&self) -> Self {
        let h = self.g.ncols();
        let p = self.e.nrows();
        let cmp_cols = |&a: &usize, &b: &usize| -> Ordering {
            for k in 0..p {
                match self.e[(k, a)].cmp(&self.e[(k, b)]) {
                    Ordering::Equal => {}
                    other => return other,
                }
            }
            Ordering::Equal
        };
        let mut order: Vec<usize> = (0..h).collect();
        order.sort_by(cmp_cols);

        // group identical exponent columns; representative = first occurrence
        let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
        let mut i = 0;
        while i < h {
            let mut j = i + 1;
            while j < h && cmp_cols(&order[i], &order[j]) == Ordering::Equal {
                j += 1;
            }
            let members: Vec<usize> = order[i..j].to_vec();
            let rep = *members.iter().min().expect("non-empty group");
            groups.push((rep, members));
            i = j;
        }
        groups.sort_by_key(|(rep, _)| *rep);

        let mut cols_g: Vec<DVector<f64>> = Vec::with_capacity(groups.len());
        let mut cols_e: Vec<Vec<u32>> = Vec::with_capacity(groups.len());
        for (rep, members) in &groups {
            let mut col = DVector::zeros(self.dim());
            for &m in members {
                col += self.g.column(m);
            }
            if col.iter().all(|v| *v == 0.0) {
                continue;
            }
            cols_g.push(col);
            cols_e.push((0..p).map(|k| self.e[(k, *rep)]).collect());
        }

        let g = cols_to_matrix(self.dim(), &cols_g);
        let e = exp_cols_to_matrix(p, &cols_e);
        Self {
            g,
            gi: self.gi.clone(),
            e,
            id: self.id.clone(),
        }
        .prune_zero_rows()
    }

    /// Removes exponent rows that are zero everywhere, together with their ids.
    pub fn prune_zero_rows(&self) -> Self {
        let keep: Vec<usize> = (0..self.e.nrows())
            .filter(|&k| (0..self.e.ncols()).any(|j| self.e[(k, j)] != 0))
            .collect();
        if keep.len() == self.e.nrows() {
            return self.clone();
        }
        let mut e = DMatrix::zeros(keep.len(), self.e.ncols());
        for (r, &k) in keep.iter().enumerate() {
            for j in 0..self.e.ncols() {
                e[(r, j)] = self.e[(k, j)];
            }
        }
        Self {
            g: self.g.clone(),
            gi: self.gi.clone(),
            e,
            id: keep.iter().map(|&k| self.id[k]).collect(),
        }
    }

    /// Appends any of `ids` missing from this set as all-zero exponent rows.
    /// The represented set is unchanged.
    pub fn ensure_ids(&self, ids: &[u64]) -> Self {
        let missing: Vec<u64> = ids
            .iter()
            .copied()
            .filter(|i| !self.id.contains(i))
            .collect();
        if missing.is_empty() {
            return self.clone();
        }
        let p = self.e.nrows();
        let mut e = DMatrix::zeros(p + missing.len(), self.e.ncols());
        e.view_mut((0, 0), (p, self.e.ncols())).copy_from(&self.e);
        let mut id = self.id.clone();
        id.extend(missing);
        Self {
            g: self.g.clone(),
            gi: self.gi.clone(),
            e,
            id,
        }
    }

    // -- conversions ---------------------------------------------------------

    pub fn from_zonotope(z: &Zonotope, idgen: &IdGenerator) -> Self {
        let n = z.dim();
        let m = z.num_generators();
        let mut g = DMatrix::zeros(n, m + 1);
        g.set_column(0, z.center());
        for j in 0..m {
            g.set_column(j + 1, &z.generators().column(j));
        }
        let mut e = DMatrix::zeros(m, m + 1);
        for k in 0..m {
            e[(k, k + 1)] = 1;
        }
        Self {
            g,
            gi: DMatrix::zeros(n, 0),
            e,
            id: idgen.fresh_block(m),
        }
    }

    pub fn from_interval(iv: &IntervalVector, idgen: &IdGenerator) -> Self {
        Self::from_zonotope(&Zonotope::from_interval(iv), idgen)
    }

    /// Equivalent representation of the set of a Taylor model: the domain is
    /// rescaled onto unit factors, the remainder becomes a centered box.
    pub fn from_taylor_model(tm: &TaylorModel, idgen: &IdGenerator) -> Self {
        let n = tm.dim();
        let dom_mid = tm.domain().mid();
        let dom_rad = tm.domain().rad();
        let subs: Vec<PolyExpr> = (0..n)
            .map(|k| {
                PolyExpr::constant(n, dom_mid[k])
                    .add(&PolyExpr::variable(n, k).scale(dom_rad[k]))
            })
            .collect();

        let rem_mid = tm.remainder().mid();
        let rem_rad = tm.remainder().rad();
        let mut cols_g: Vec<DVector<f64>> = vec![rem_mid];
        let mut cols_e: Vec<Vec<u32>> = vec![vec![0; n]];
        for (i, p) in tm.polys().iter().enumerate() {
            let rescaled = p.compose(&subs);
            for t in rescaled.terms() {
                let mut col = DVector::zeros(n);
                col[i] = t.coeff;
                cols_g.push(col);
                cols_e.push(t.exps.clone());
            }
        }
        let gi_cols: Vec<DVector<f64>> = (0..n)
            .filter(|&i| rem_rad[i] != 0.0)
            .map(|i| {
                let mut col = DVector::zeros(n);
                col[i] = rem_rad[i];
                col
            })
            .collect();
        Self {
            g: cols_to_matrix(n, &cols_g),
            gi: cols_to_matrix(n, &gi_cols),
            e: exp_cols_to_matrix(n, &cols_e),
            id: idgen.fresh_block(n),
        }
        .compact()
    }

    /// Re-declares every independent generator as a fresh dependent factor.
    /// The represented set is unchanged.
    pub fn remove_independent(&self, idgen: &IdGenerator) -> Self {
        let q = self.num_independent();
        if q == 0 {
            return self.clone();
        }
        let n = self.dim();
        let h = self.num_dependent();
        let p = self.num_factors();
        let mut g = DMatrix::zeros(n, h + q);
        g.view_mut((0, 0), (n, h)).copy_from(&self.g);
        g.view_mut((0, h), (n, q)).copy_from(&self.gi);
        let mut e = DMatrix::zeros(p + q, h + q);
        e.view_mut((0, 0), (p, h)).copy_from(&self.e);
        for j in 0..q {
            e[(p + j, h + j)] = 1;
        }
        let mut id = self.id.clone();
        id.extend(idgen.fresh_block(q));
        Self {
            g,
            gi: DMatrix::zeros(n, 0),
            e,
            id,
        }
    }

    // -- enclosures ----------------------------------------------------------

    /// Index sets of the dependent columns: all-zero exponents, all-even
    /// exponents (excluding the former), and the rest.
    fn column_classes(&self) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
        let mut zero = Vec::new();
        let mut even = Vec::new();
        let mut rest = Vec::new();
        for j in 0..self.e.ncols() {
            let mut all_zero = true;
            let mut all_even = true;
            for k in 0..self.e.nrows() {
                let e = self.e[(k, j)];
                if e != 0 {
                    all_zero = false;
                }
                if e % 2 == 1 {
                    all_even = false;
                }
            }
            if all_zero {
                zero.push(j);
            } else if all_even {
                even.push(j);
            } else {
                rest.push(j);
            }
        }
        (zero, even, rest)
    }

    /// Enclosing zonotope: all-even monomials range over `[0,1]` and are
    /// split into a half-generator plus center shift; the rest over `[-1,1]`.
    pub fn enclose_zonotope(&self) -> Zonotope {
        let (zero, even, rest) = self.column_classes();
        let mut c = DVector::zeros(self.dim());
        for &j in &zero {
            c += self.g.column(j);
        }
        for &j in &even {
            c += self.g.column(j) * 0.5;
        }
        let mut gens: Vec<DVector<f64>> =
            Vec::with_capacity(even.len() + rest.len() + self.num_independent());
        for &j in &even {
            gens.push(self.g.column(j).into_owned() * 0.5);
        }
        for &j in &rest {
            gens.push(self.g.column(j).into_owned());
        }
        for j in 0..self.num_independent() {
            gens.push(self.gi.column(j).into_owned());
        }
        Zonotope::new(c, cols_to_matrix(self.dim(), &gens)).expect("consistent dims")
    }

    /// Projects the dependent part onto `d` as a polynomial over the factors.
    pub fn projected_polynomial(&self, d: &DVector<f64>) -> PolyExpr {
        let p = self.num_factors();
        let terms: Vec<Term> = (0..self.g.ncols())
            .map(|j| Term {
                coeff: d.dot(&self.g.column(j).into_owned()),
                exps: (0..p).map(|k| self.e[(k, j)]).collect(),
            })
            .collect();
        PolyExpr::from_terms(p, terms)
    }

    /// Over-approximative support value along `d`: range-bound the projected
    /// dependent polynomial on the unit box, add the independent magnitudes.
    pub fn support_function(&self, d: &DVector<f64>) -> Result<f64> {
        if d.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "direction of length {} for a set of dimension {}",
                d.len(),
                self.dim()
            )));
        }
        let w = self.projected_polynomial(d);
        let bound = w.bound();
        let mut s = bound.hi;
        for j in 0..self.num_independent() {
            s += d.dot(&self.gi.column(j).into_owned()).abs();
        }
        Ok(s)
    }

    /// Interval hull from the support function along the coordinate axes.
    pub fn enclose_interval(&self) -> IntervalVector {
        let n = self.dim();
        let mut lo = DVector::zeros(n);
        let mut hi = DVector::zeros(n);
        for i in 0..n {
            let mut d = DVector::zeros(n);
            d[i] = 1.0;
            let w = self.projected_polynomial(&d);
            let b = w.bound();
            let mut s = 0.0;
            for j in 0..self.num_independent() {
                s += self.gi[(i, j)].abs();
            }
            lo[i] = b.lo - s;
            hi[i] = b.hi + s;
        }
        IntervalVector::new(lo, hi).expect("bound ordering")
    }

    /// Template enclosure: support value per direction.
    pub fn enclose_template(&self, dirs: &[DVector<f64>]) -> Result<Vec<(DVector<f64>, f64)>> {
        dirs.iter()
            .map(|d| self.support_function(d).map(|s| (d.clone(), s)))
            .collect()
    }

    // -- basic operations ------------------------------------------------------

    pub fn linear_map(&self, m: &DMatrix<f64>) -> Result<Self> {
        if m.ncols() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "matrix with {} columns applied to a set of dimension {}",
                m.ncols(),
                self.dim()
            )));
        }
        Ok(Self {
            g: m * &self.g,
            gi: m * &self.gi,
            e: self.e.clone(),
            id: self.id.clone(),
        })
    }

    /// Minkowski sum of two polynomial zonotopes. The operands are treated as
    /// independent: the second operand's factors are relabeled with fresh ids.
    pub fn minkowski_sum(&self, other: &Self, idgen: &IdGenerator) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "Minkowski sum of dimensions {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        let relabeled = Self {
            g: other.g.clone(),
            gi: other.gi.clone(),
            e: other.e.clone(),
            id: idgen.fresh_block(other.num_factors()),
        };
        let (a, b) = Self::merge_id(self, &relabeled);
        Ok(concat_with_shared_ids(&a, &b).compact())
    }

    /// Exact addition: shared ids are retained, so dependencies between the
    /// operands are preserved.
    pub fn exact_add(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "exact addition of dimensions {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        let (a, b) = Self::merge_id(self, other);
        Ok(concat_with_shared_ids(&a, &b).compact())
    }

    /// Minkowski sum with a zonotope: the center joins the dependent part
    /// with a zero exponent column, the generators join the independent part.
    pub fn minkowski_sum_zonotope(&self, z: &Zonotope) -> Result<Self> {
        if self.dim() != z.dim() {
            return Err(Error::DimensionMismatch(format!(
                "Minkowski sum of dimensions {} and {}",
                self.dim(),
                z.dim()
            )));
        }
        let n = self.dim();
        let h = self.num_dependent();
        let q = self.num_independent();
        let m = z.num_generators();
        let mut g = DMatrix::zeros(n, h + 1);
        g.set_column(0, z.center());
        g.view_mut((0, 1), (n, h)).copy_from(&self.g);
        let mut e = DMatrix::zeros(self.num_factors(), h + 1);
        e.view_mut((0, 1), (self.num_factors(), h)).copy_from(&self.e);
        let mut gi = DMatrix::zeros(n, q + m);
        gi.view_mut((0, 0), (n, q)).copy_from(&self.gi);
        gi.view_mut((0, q), (n, m)).copy_from(z.generators());
        Ok(Self {
            g,
            gi,
            e,
            id: self.id.clone(),
        })
    }

    /// Exact translation by `v`; constant columns are merged afterwards.
    pub fn translate(&self, v: &DVector<f64>) -> Self {
        self.minkowski_sum_zonotope(&Zonotope::point(v.clone()))
            .expect("same dimension")
            .compact()
    }

    /// Stacks this set on top of a zonotope. The zonotope center becomes a
    /// zero-exponent dependent column, its generators independent ones.
    pub fn cartesian_product_zonotope(&self, z: &Zonotope) -> Self {
        let n = self.dim();
        let m = z.dim();
        if m == 0 {
            return self.clone();
        }
        let h = self.num_dependent();
        let q = self.num_independent();
        let zg = z.num_generators();
        let mut g = DMatrix::zeros(n + m, h + 1);
        g.view_mut((0, 0), (n, h)).copy_from(&self.g);
        g.view_mut((n, h), (m, 1)).copy_from(z.center());
        let mut e = DMatrix::zeros(self.num_factors(), h + 1);
        e.view_mut((0, 0), (self.num_factors(), h)).copy_from(&self.e);
        let mut gi = DMatrix::zeros(n + m, q + zg);
        gi.view_mut((0, 0), (n, q)).copy_from(&self.gi);
        gi.view_mut((n, q), (m, zg)).copy_from(z.generators());
        Self {
            g,
            gi,
            e,
            id: self.id.clone(),
        }
    }

    // -- quadratic map ---------------------------------------------------------

    /// Quadratic map `x_i = s^T Q_i s`. Exact when the set has no independent
    /// generators; otherwise monomials touching independent factors are
    /// enclosed by a zonotope and the result over-approximates.
    pub fn quadratic_map(&self, q_mats: &[DMatrix<f64>], idgen: &IdGenerator) -> Result<Self> {
        let n = self.dim();
        for qm in q_mats {
            if qm.nrows() != n || qm.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "quadratic form of shape {}x{} on a set of dimension {}",
                    qm.nrows(),
                    qm.ncols(),
                    n
                )));
            }
        }
        let m_out = q_mats.len();
        if self.num_independent() == 0 {
            return Ok(pure_quadratic_map(&self.g, &self.e, q_mats, &self.id).compact());
        }

        // extend: independent generators become temporary dependent factors
        let h = self.num_dependent();
        let q = self.num_independent();
        let p = self.num_factors();
        let mut ghat = DMatrix::zeros(n, h + q);
        ghat.view_mut((0, 0), (n, h)).copy_from(&self.g);
        ghat.view_mut((0, h), (n, q)).copy_from(&self.gi);
        let mut ehat = DMatrix::zeros(p + q, h + q);
        ehat.view_mut((0, 0), (p, h)).copy_from(&self.e);
        for j in 0..q {
            ehat[(p + j, h + j)] = 1;
        }
        let mut idhat = self.id.clone();
        idhat.extend(idgen.fresh_block(q));

        let mapped = pure_quadratic_map(&ghat, &ehat, q_mats, &idhat);

        // split columns: pure original factors vs. any lifted factor involved
        let mut dep_cols_g: Vec<DVector<f64>> = Vec::new();
        let mut dep_cols_e: Vec<Vec<u32>> = Vec::new();
        let mut mix_cols_g: Vec<DVector<f64>> = Vec::new();
        let mut mix_cols_e: Vec<Vec<u32>> = Vec::new();
        for j in 0..mapped.g.ncols() {
            let touches_lifted = (p..p + q).any(|k| mapped.e[(k, j)] != 0);
            if touches_lifted {
                mix_cols_g.push(mapped.g.column(j).into_owned());
                mix_cols_e.push((0..p + q).map(|k| mapped.e[(k, j)]).collect());
            } else {
                dep_cols_g.push(mapped.g.column(j).into_owned());
                dep_cols_e.push((0..p).map(|k| mapped.e[(k, j)]).collect());
            }
        }
        let mix = Self {
            g: cols_to_matrix(m_out, &mix_cols_g),
            gi: DMatrix::zeros(m_out, 0),
            e: exp_cols_to_matrix(p + q, &mix_cols_e),
            id: idhat,
        };
        let zmix = mix.enclose_zonotope();

        let mut g = DMatrix::zeros(m_out, dep_cols_g.len() + 1);
        g.set_column(0, zmix.center());
        for (j, col) in dep_cols_g.iter().enumerate() {
            g.set_column(j + 1, col);
        }
        let mut e = DMatrix::zeros(p, dep_cols_e.len() + 1);
        for (j, exps) in dep_cols_e.iter().enumerate() {
            for k in 0..p {
                e[(k, j + 1)] = exps[k];
            }
        }
        Ok(Self {
            g,
            gi: zmix.generators().clone(),
            e,
            id: self.id.clone(),
        }
        .compact())
    }

    // -- order reduction ---------------------------------------------------------

    /// Reduces the order below `rho_d` by enclosing the smallest generators
    /// (dependent and independent pooled by 2-norm) with a box zonotope.
    pub fn reduce(&self, rho_d: f64) -> Self {
        self.reduce_with(rho_d, ReductionMethod::default())
    }

    pub fn reduce_with(&self, rho_d: f64, method: ReductionMethod) -> Self {
        debug_assert!(rho_d >= 1.0);
        let n = self.dim();
        let h = self.num_dependent();
        let q = self.num_independent();
        if h + q == 0 || self.order() <= rho_d {
            return self.clone();
        }
        let a = ((h + q) as f64 - n as f64 * (rho_d - 1.0) + 1.0).ceil() as i64;
        let a = a.clamp(0, (h + q) as i64) as usize;
        if a == 0 {
            return self.clone();
        }

        // pool all generators by 2-norm; ties resolved deterministically
        let mut norms: Vec<(f64, bool, usize)> = (0..h)
            .map(|j| (self.g.column(j).norm(), false, j))
            .chain((0..q).map(|j| (self.gi.column(j).norm(), true, j)))
            .collect();
        norms.sort_by(|x, y| {
            x.0.partial_cmp(&y.0)
                .unwrap_or(Ordering::Equal)
                .then(x.1.cmp(&y.1))
                .then(x.2.cmp(&y.2))
        });
        let selected = &norms[..a];
        let sel_dep: Vec<usize> = selected
            .iter()
            .filter(|(_, indep, _)| !indep)
            .map(|(_, _, j)| *j)
            .collect();
        let sel_indep: Vec<usize> = selected
            .iter()
            .filter(|(_, indep, _)| *indep)
            .map(|(_, _, j)| *j)
            .collect();
        let keep_dep: Vec<usize> = (0..h).filter(|j| !sel_dep.contains(j)).collect();
        let keep_indep: Vec<usize> = (0..q).filter(|j| !sel_indep.contains(j)).collect();

        let pooled = Self {
            g: select_columns(&self.g, &sel_dep),
            gi: select_columns(&self.gi, &sel_indep),
            e: select_exp_columns(&self.e, &sel_dep),
            id: self.id.clone(),
        };
        let zbox = pooled.enclose_zonotope().reduce_to_box(method);

        let keep_g = select_columns(&self.g, &keep_dep);
        let keep_e = select_exp_columns(&self.e, &keep_dep);
        let n_keep = keep_dep.len();
        let center_is_zero = zbox.center().iter().all(|v| *v == 0.0);
        let extra = usize::from(!center_is_zero);
        let mut g = DMatrix::zeros(n, n_keep + extra);
        let mut e = DMatrix::zeros(self.num_factors(), n_keep + extra);
        if extra == 1 {
            g.set_column(0, zbox.center());
        }
        g.view_mut((0, extra), (n, n_keep)).copy_from(&keep_g);
        e.view_mut((0, extra), (self.num_factors(), n_keep))
            .copy_from(&keep_e);

        let box_gens = zbox.drop_zero_generators();
        let mut gi = DMatrix::zeros(n, keep_indep.len() + box_gens.num_generators());
        gi.view_mut((0, 0), (n, keep_indep.len()))
            .copy_from(&select_columns(&self.gi, &keep_indep));
        gi.view_mut((0, keep_indep.len()), (n, box_gens.num_generators()))
            .copy_from(box_gens.generators());

        Self {
            g,
            gi,
            e,
            id: self.id.clone(),
        }
        .compact()
    }

    // -- restructure ---------------------------------------------------------------

    /// Turns the independent part into fresh dependent factors (after a box
    /// reduction), restoring dependency tracking. `p_d` caps the total factor
    /// count; excess factors are shed by enclosing their columns.
    pub fn restructure(&self, idgen: &IdGenerator, p_d: usize) -> Self {
        self.restructure_protected(idgen, p_d, &[])
    }

    /// Like [`restructure`](Self::restructure), but never sheds the factors in
    /// `protected` when enforcing the cap.
    pub fn restructure_protected(
        &self,
        idgen: &IdGenerator,
        p_d: usize,
        protected: &[u64],
    ) -> Self {
        let n = self.dim();
        let q = self.num_independent();
        if q == 0 {
            // only a zero-column center concatenation; set unchanged
            return self
                .minkowski_sum_zonotope(&Zonotope::zero(n))
                .expect("same dimension")
                .compact();
        }

        let mut base = self.clone();
        // enforce the factor cap before lifting: shed the weakest factors
        if base.num_factors() + n > p_d {
            let excess = base.num_factors() + n - p_d;
            base = base.shed_factors(excess, protected);
        }

        let zi = Zonotope::new(DVector::zeros(n), base.gi.clone())
            .expect("consistent dims")
            .reduce_to_box(ReductionMethod::default());
        let box_gens = zi.generators();

        let h = base.num_dependent();
        let p = base.num_factors();
        let mut lifted_cols: Vec<DVector<f64>> = Vec::new();
        let mut lifted_axes: Vec<usize> = Vec::new();
        for j in 0..box_gens.ncols() {
            let col = box_gens.column(j).into_owned();
            if col.iter().any(|v| *v != 0.0) {
                lifted_cols.push(col);
                lifted_axes.push(j);
            }
        }
        let k = lifted_cols.len();
        let mut g = DMatrix::zeros(n, h + k + 1);
        g.set_column(0, zi.center());
        g.view_mut((0, 1), (n, h)).copy_from(&base.g);
        for (j, col) in lifted_cols.iter().enumerate() {
            g.set_column(h + 1 + j, col);
        }
        let mut e = DMatrix::zeros(p + k, h + k + 1);
        e.view_mut((0, 1), (p, h)).copy_from(&base.e);
        for j in 0..k {
            e[(p + j, h + 1 + j)] = 1;
        }
        let mut id = base.id.clone();
        id.extend(idgen.fresh_block(k));
        Self {
            g,
            gi: DMatrix::zeros(n, 0),
            e,
            id,
        }
        .compact()
    }

    /// Sheds `count` dependent factors by enclosing every column that touches
    /// them with a zonotope (folded into the independent part). Factors are
    /// ranked by the total 2-norm of the columns they touch; protected ids
    /// are kept.
    fn shed_factors(&self, count: usize, protected: &[u64]) -> Self {
        let p = self.num_factors();
        let mut weight: Vec<(f64, usize)> = (0..p)
            .filter(|&k| !protected.contains(&self.id[k]))
            .map(|k| {
                let w: f64 = (0..self.e.ncols())
                    .filter(|&j| self.e[(k, j)] != 0)
                    .map(|j| self.g.column(j).norm())
                    .sum();
                (w, k)
            })
            .collect();
        weight.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
        let shed_rows: Vec<usize> = weight.iter().take(count).map(|&(_, k)| k).collect();
        if shed_rows.is_empty() {
            return self.clone();
        }
        let shed_cols: Vec<usize> = (0..self.e.ncols())
            .filter(|&j| shed_rows.iter().any(|&k| self.e[(k, j)] != 0))
            .collect();
        let keep_cols: Vec<usize> = (0..self.e.ncols())
            .filter(|j| !shed_cols.contains(j))
            .collect();
        let sub = Self {
            g: select_columns(&self.g, &shed_cols),
            gi: DMatrix::zeros(self.dim(), 0),
            e: select_exp_columns(&self.e, &shed_cols),
            id: self.id.clone(),
        };
        let z = sub.enclose_zonotope().drop_zero_generators();
        let kept = Self {
            g: select_columns(&self.g, &keep_cols),
            gi: self.gi.clone(),
            e: select_exp_columns(&self.e, &keep_cols),
            id: self.id.clone(),
        };
        kept.minkowski_sum_zonotope(&z)
            .expect("same dimension")
            .compact()
    }

    // -- heuristics ---------------------------------------------------------------

    /// Volume of the interval hull of the independent part relative to the
    /// interval hull of the enclosed dependent part. Returns infinity when the
    /// dependent hull is flat but the independent part is not.
    pub fn vol_ratio(&self) -> f64 {
        if self.num_independent() == 0 {
            return 0.0;
        }
        let zi = Zonotope::new(DVector::zeros(self.dim()), self.gi.clone())
            .expect("consistent dims");
        let num = zi.interval_hull().widths();
        let dep = Self {
            g: self.g.clone(),
            gi: DMatrix::zeros(self.dim(), 0),
            e: self.e.clone(),
            id: self.id.clone(),
        };
        let den = dep.enclose_zonotope().interval_hull().widths();
        let mut ratio = 1.0;
        for i in 0..self.dim() {
            if num[i] == 0.0 {
                return 0.0;
            }
            if den[i] == 0.0 {
                return f64::INFINITY;
            }
            ratio *= num[i] / den[i];
        }
        ratio
    }

    // -- evaluation -----------------------------------------------------------------

    /// Total evaluation: fixes every dependent factor, leaving the zonotope
    /// spanned by the independent generators.
    pub fn eval(&self, alpha: &[f64]) -> Result<Zonotope> {
        if alpha.len() != self.num_factors() {
            return Err(Error::FactorLengthMismatch {
                got: alpha.len(),
                expected: self.num_factors(),
            });
        }
        for (i, &a) in alpha.iter().enumerate() {
            if a.abs() > 1.0 + 1e-12 {
                return Err(Error::FactorOutOfRange { index: i, value: a });
            }
        }
        Ok(Zonotope::new(self.dependent_value(alpha), self.gi.clone())
            .expect("consistent dims"))
    }

    /// Partial evaluation: fixes the factors named in `ids` (in that order) at
    /// the given values; all other dependent factors and the independent part
    /// stay free. Ids absent from this set are ignored.
    pub fn partial_eval(&self, ids: &[u64], alpha: &[f64]) -> Result<Self> {
        if ids.len() != alpha.len() {
            return Err(Error::FactorLengthMismatch {
                got: alpha.len(),
                expected: ids.len(),
            });
        }
        for (i, &a) in alpha.iter().enumerate() {
            if a.abs() > 1.0 + 1e-12 {
                return Err(Error::FactorOutOfRange { index: i, value: a });
            }
        }
        let mut fixed: Vec<(usize, f64)> = Vec::new();
        for (pos, &fid) in ids.iter().enumerate() {
            if let Some(row) = self.id.iter().position(|&x| x == fid) {
                fixed.push((row, alpha[pos]));
            }
        }
        if fixed.is_empty() {
            return Ok(self.clone());
        }
        let h = self.num_dependent();
        let mut g = self.g.clone();
        let mut e = self.e.clone();
        for j in 0..h {
            let mut scale = 1.0;
            for &(row, value) in &fixed {
                let exp = e[(row, j)];
                if exp > 0 {
                    scale *= value.powi(exp as i32);
                    e[(row, j)] = 0;
                }
            }
            if scale != 1.0 {
                for i in 0..self.dim() {
                    g[(i, j)] *= scale;
                }
            }
        }
        Ok(Self {
            g,
            gi: self.gi.clone(),
            e,
            id: self.id.clone(),
        }
        .compact())
    }
}

// -- helpers --------------------------------------------------------------------

fn cols_to_matrix(nrows: usize, cols: &[DVector<f64>]) -> DMatrix<f64> {
    if cols.is_empty() {
        return DMatrix::zeros(nrows, 0);
    }
    DMatrix::from_columns(cols)
}

fn exp_cols_to_matrix(nrows: usize, cols: &[Vec<u32>]) -> DMatrix<u32> {
    let mut e = DMatrix::zeros(nrows, cols.len());
    for (j, col) in cols.iter().enumerate() {
        for (k, &v) in col.iter().enumerate() {
            e[(k, j)] = v;
        }
    }
    e
}

fn select_columns(m: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), cols.len());
    for (k, &j) in cols.iter().enumerate() {
        out.set_column(k, &m.column(j));
    }
    out
}

fn select_exp_columns(m: &DMatrix<u32>, cols: &[usize]) -> DMatrix<u32> {
    let mut out = DMatrix::zeros(m.nrows(), cols.len());
    for (k, &j) in cols.iter().enumerate() {
        for i in 0..m.nrows() {
            out[(i, k)] = m[(i, j)];
        }
    }
    out
}

/// Concatenates generators of two sets that already share an id list.
fn concat_with_shared_ids(a: &PolyZonotope, b: &PolyZonotope) -> PolyZonotope {
    debug_assert_eq!(a.id, b.id);
    let n = a.dim();
    let p = a.id.len();
    let mut g = DMatrix::zeros(n, a.g.ncols() + b.g.ncols());
    g.view_mut((0, 0), (n, a.g.ncols())).copy_from(&a.g);
    g.view_mut((0, a.g.ncols()), (n, b.g.ncols())).copy_from(&b.g);
    let mut e = DMatrix::zeros(p, a.e.ncols() + b.e.ncols());
    e.view_mut((0, 0), (p, a.e.ncols())).copy_from(&a.e);
    e.view_mut((0, a.e.ncols()), (p, b.e.ncols())).copy_from(&b.e);
    let mut gi = DMatrix::zeros(n, a.gi.ncols() + b.gi.ncols());
    gi.view_mut((0, 0), (n, a.gi.ncols())).copy_from(&a.gi);
    gi.view_mut((0, a.gi.ncols()), (n, b.gi.ncols()))
        .copy_from(&b.gi);
    PolyZonotope { g, gi, e, id: a.id.clone() }
}

/// Exact quadratic map of a set without independent generators, built from
/// symmetric generator pairs.
fn pure_quadratic_map(
    g: &DMatrix<f64>,
    e: &DMatrix<u32>,
    q_mats: &[DMatrix<f64>],
    id: &[u64],
) -> PolyZonotope {
    let h = g.ncols();
    let p = e.nrows();
    let m_out = q_mats.len();
    // P_i[j,k] = g_j^T (Q_i + Q_i^T) g_k
    let pm: Vec<DMatrix<f64>> = q_mats
        .iter()
        .map(|qi| g.transpose() * (qi + qi.transpose()) * g)
        .collect();
    let ncols = h * (h + 1) / 2;
    let mut out_g = DMatrix::zeros(m_out, ncols);
    let mut out_e = DMatrix::zeros(p, ncols);
    let mut col = 0;
    for j in 0..h {
        for k in j..h {
            for (i, pi) in pm.iter().enumerate() {
                out_g[(i, col)] = if j == k { 0.5 * pi[(j, j)] } else { pi[(j, k)] };
            }
            for r in 0..p {
                out_e[(r, col)] = e[(r, j)] + e[(r, k)];
            }
            col += 1;
        }
    }
    PolyZonotope {
        g: out_g,
        gi: DMatrix::zeros(m_out, 0),
        e: out_e,
        id: id.to_vec(),
    }
}

// -- serialization -----------------------------------------------------------------

/// Serialized as `{"G": rows, "GI": rows, "E": rows, "id": [...]}` with
/// row-major matrices.
#[derive(Serialize, Deserialize)]
struct PolyZonotopeJson {
    #[serde(rename = "G")]
    g: Vec<Vec<f64>>,
    #[serde(rename = "GI")]
    gi: Vec<Vec<f64>>,
    #[serde(rename = "E")]
    e: Vec<Vec<u32>>,
    id: Vec<u64>,
}

impl Serialize for PolyZonotope {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolyZonotopeJson {
            g: matrix_to_rows(&self.g),
            gi: matrix_to_rows(&self.gi),
            e: (0..self.e.nrows())
                .map(|i| (0..self.e.ncols()).map(|j| self.e[(i, j)]).collect())
                .collect(),
            id: self.id.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PolyZonotope {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = PolyZonotopeJson::deserialize(d)?;
        let g = rows_to_matrix(&raw.g).map_err(serde::de::Error::custom)?;
        let n = g.nrows();
        let mut gi = rows_to_matrix(&raw.gi).map_err(serde::de::Error::custom)?;
        if gi.nrows() == 0 {
            gi = DMatrix::zeros(n, 0);
        }
        let p = raw.id.len();
        let mut e = DMatrix::zeros(p, g.ncols());
        if raw.e.len() != p {
            return Err(serde::de::Error::custom(format!(
                "exponent matrix with {} rows for {} identifiers",
                raw.e.len(),
                p
            )));
        }
        for (i, row) in raw.e.iter().enumerate() {
            if row.len() != g.ncols() {
                return Err(serde::de::Error::custom("ragged exponent matrix".to_string()));
            }
            for (j, &v) in row.iter().enumerate() {
                e[(i, j)] = v;
            }
        }
        PolyZonotope::new(g, gi, e, raw.id).map_err(serde::de::Error::custom)
    }
}
