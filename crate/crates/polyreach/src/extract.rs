//! Exploiting preserved dependencies: reachable-subset extraction, point
//! parameterization, falsification, safe partitioning of the initial set and
//! optimization over reachable sets.

use crate::dynamics::{simulate, InputSignal, NonlinearSystem, Trajectory};
use crate::error::{Error, Result};
use crate::poly::{PolyExpr, RangeBound, Term};
use crate::polyzono::PolyZonotope;
use crate::reach::ReachResult;
use crate::zonotope::Zonotope;
use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use crate::lp::{point_in_zonotope, point_in_zonotope_margin};

/// Linear inequality specification `a^T x <= b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfspaceSpec {
    pub a: Vec<f64>,
    pub b: f64,
}

impl HalfspaceSpec {
    pub fn new(a: Vec<f64>, b: f64) -> Result<Self> {
        if a.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidSet("halfspace normal must be nonzero".to_string()));
        }
        Ok(Self { a, b })
    }

    /// Parses the textual form `a=1,2;b=6.4`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut a = None;
        let mut b = None;
        for part in text.split(';') {
            let part = part.trim();
            if let Some(rest) = part.strip_prefix("a=") {
                let vals = rest
                    .split(',')
                    .map(|v| v.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<f64>, _>>()
                    .map_err(|e| Error::Syntax {
                        position: 0,
                        message: format!("bad halfspace normal: {e}"),
                    })?;
                a = Some(vals);
            } else if let Some(rest) = part.strip_prefix("b=") {
                b = Some(rest.trim().parse::<f64>().map_err(|e| Error::Syntax {
                    position: 0,
                    message: format!("bad halfspace offset: {e}"),
                })?);
            } else if !part.is_empty() {
                return Err(Error::Syntax {
                    position: 0,
                    message: format!("unknown spec component `{part}`"),
                });
            }
        }
        match (a, b) {
            (Some(a), Some(b)) => Self::new(a, b),
            _ => Err(Error::Syntax {
                position: 0,
                message: "spec must contain `a=...` and `b=...`".to_string(),
            }),
        }
    }

    pub fn normal(&self) -> DVector<f64> {
        DVector::from_vec(self.a.clone())
    }

    pub fn holds(&self, x: &DVector<f64>) -> bool {
        self.normal().dot(x) <= self.b
    }
}

/// Box of factor values inside the unit cube; `lo > hi` marks emptiness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AlphaBox {
    pub fn full(p: usize) -> Self {
        Self {
            lo: vec![-1.0; p],
            hi: vec![1.0; p],
        }
    }

    pub fn empty(p: usize) -> Self {
        Self {
            lo: vec![1.0; p],
            hi: vec![-1.0; p],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| l > h)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| h - l)
            .product()
    }

    pub fn components(&self) -> Vec<RangeBound> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| RangeBound::new(l, h))
            .collect()
    }

    pub fn contains(&self, alpha: &[f64]) -> bool {
        alpha.len() == self.dim()
            && alpha
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(a, (l, h))| l <= a && a <= h)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| if l == h { l } else { rng.random_range(l..=h) })
            .collect()
    }
}

/// Outcome of the falsification search.
#[derive(Debug, Clone)]
pub struct FalsificationResult {
    /// Initial-set factor values of the candidate.
    pub alpha_star: Vec<f64>,
    /// Candidate initial state `eval(X0)(alpha*)`.
    pub x0_star: DVector<f64>,
    /// Worst-case value of `a^T x` over the extracted final set.
    pub objective: f64,
    /// Whether the simulated trajectory provably violates the spec.
    pub verified: bool,
    /// The simulated trajectory from `x0_star`.
    pub witness: Trajectory,
}

/// Reachable subsets for fixed initial-set factor values.
#[derive(Debug, Clone)]
pub struct ExtractedSets {
    pub time_points: Vec<(f64, PolyZonotope)>,
    pub time_intervals: Vec<(f64, f64, PolyZonotope)>,
}

fn check_alpha(res: &ReachResult, alpha: &[f64]) -> Result<()> {
    if alpha.len() != res.x0_ids.len() {
        return Err(Error::FactorLengthMismatch {
            got: alpha.len(),
            expected: res.x0_ids.len(),
        });
    }
    for (i, &a) in alpha.iter().enumerate() {
        if a.abs() > 1.0 + 1e-12 {
            return Err(Error::FactorOutOfRange { index: i, value: a });
        }
    }
    Ok(())
}

/// Extracts the reachable subset for fixed initial-set factors by partial
/// evaluation of every stored set. Factors introduced after t = 0 stay free,
/// as does the independent part; the cost is quadratic in the dimension and
/// independent of the reachability run itself.
pub fn extract(res: &ReachResult, alpha: &[f64]) -> Result<ExtractedSets> {
    check_alpha(res, alpha)?;
    let time_points = res
        .time_points
        .iter()
        .map(|(t, set)| Ok((*t, set.partial_eval(&res.x0_ids, alpha)?)))
        .collect::<Result<Vec<_>>>()?;
    let time_intervals = res
        .time_intervals
        .iter()
        .map(|(t0, t1, set)| Ok((*t0, *t1, set.partial_eval(&res.x0_ids, alpha)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExtractedSets {
        time_points,
        time_intervals,
    })
}

/// Zonotope enclosure of the extracted set at the final time. Exact (no
/// enclosure step) when no later-introduced dependent factors remain.
pub fn extract_final(res: &ReachResult, alpha: &[f64]) -> Result<Zonotope> {
    check_alpha(res, alpha)?;
    let slice = res.final_set().partial_eval(&res.x0_ids, alpha)?;
    Ok(slice.enclose_zonotope())
}

/// Inverts the parameterization of an affine initial set with an invertible
/// dependent generator block: `alpha = Gdep^{-1} (x - c)`.
pub fn parameterize_point(x0: &PolyZonotope, x: &DVector<f64>) -> Result<Vec<f64>> {
    let n = x0.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "point of length {} in a set of dimension {}",
            x.len(),
            n
        )));
    }
    if x0.num_independent() != 0 {
        return Err(Error::NotAffine(
            "independent generators present".to_string(),
        ));
    }
    let p = x0.num_factors();
    if p != n {
        return Err(Error::NotAffine(format!(
            "{p} dependent factors for dimension {n}"
        )));
    }
    let e = x0.exponents();
    let mut center = DVector::zeros(n);
    let mut gdep = nalgebra::DMatrix::zeros(n, p);
    let mut factor_seen = vec![false; p];
    for j in 0..x0.num_dependent() {
        let degree: u32 = (0..p).map(|k| e[(k, j)]).sum();
        match degree {
            0 => center += x0.dep_generators().column(j),
            1 => {
                let k = (0..p).find(|&k| e[(k, j)] == 1).expect("degree 1");
                if factor_seen[k] {
                    return Err(Error::NotAffine(format!(
                        "factor {} owns several generator columns",
                        x0.ids()[k]
                    )));
                }
                factor_seen[k] = true;
                gdep.set_column(k, &x0.dep_generators().column(j));
            }
            _ => {
                return Err(Error::NotAffine(
                    "higher-degree monomials present".to_string(),
                ))
            }
        }
    }
    let rhs = x - center;
    let alpha = gdep
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NotAffine("dependent generator block is singular".to_string()))?;
    for i in 0..p {
        if alpha[i].abs() > 1.0 + 1e-9 {
            return Err(Error::OutsideSet(format!(
                "factor {} would need value {}",
                x0.ids()[i],
                alpha[i]
            )));
        }
    }
    Ok(alpha.iter().cloned().map(|v| v.clamp(-1.0, 1.0)).collect())
}

/// Image of a factor box through an affine initial set: the zonotope
/// `c + Gdep mid(box) + Gdep diag(rad(box)) [-1,1]^p`.
pub fn alpha_box_image(x0: &PolyZonotope, b: &AlphaBox) -> Result<Zonotope> {
    if b.dim() != x0.num_factors() {
        return Err(Error::FactorLengthMismatch {
            got: b.dim(),
            expected: x0.num_factors(),
        });
    }
    let n = x0.dim();
    let p = x0.num_factors();
    let e = x0.exponents();
    if x0.num_independent() != 0 {
        return Err(Error::NotAffine("independent generators present".to_string()));
    }
    let mut center = DVector::zeros(n);
    let mut gdep = nalgebra::DMatrix::zeros(n, p);
    for j in 0..x0.num_dependent() {
        let degree: u32 = (0..p).map(|k| e[(k, j)]).sum();
        match degree {
            0 => center += x0.dep_generators().column(j),
            1 => {
                let k = (0..p).find(|&k| e[(k, j)] == 1).expect("degree 1");
                gdep.set_column(k, &(gdep.column(k) + x0.dep_generators().column(j)));
            }
            _ => {
                return Err(Error::NotAffine(
                    "higher-degree monomials present".to_string(),
                ))
            }
        }
    }
    if b.is_empty() {
        return Ok(Zonotope::point(center));
    }
    let mid = DVector::from_fn(p, |k, _| 0.5 * (b.lo[k] + b.hi[k]));
    let rad = DVector::from_fn(p, |k, _| 0.5 * (b.hi[k] - b.lo[k]));
    let c = center + &gdep * mid;
    let g = gdep * nalgebra::DMatrix::from_diagonal(&rad);
    Zonotope::new(c, g)
}

/// Projection of a halfspace spec onto a reachable set: the non-constant part
/// of `a^T f_{G,E}` as a polynomial over the set's factors, and the margin
/// `b - a^T c - sum_j |a^T GI_j|`. The spec holds on `eval(R)(alpha)` exactly
/// when `g(alpha) <= margin`.
pub fn project_spec(r_tf: &PolyZonotope, spec: &HalfspaceSpec) -> Result<(PolyExpr, f64)> {
    let a = spec.normal();
    if a.len() != r_tf.dim() {
        return Err(Error::DimensionMismatch(format!(
            "spec normal of length {} for a set of dimension {}",
            a.len(),
            r_tf.dim()
        )));
    }
    let p = r_tf.num_factors();
    let e = r_tf.exponents();
    let mut constant = 0.0;
    let mut terms: Vec<Term> = Vec::new();
    for j in 0..r_tf.num_dependent() {
        let coeff = a.dot(&r_tf.dep_generators().column(j).into_owned());
        let exps: Vec<u32> = (0..p).map(|k| e[(k, j)]).collect();
        if exps.iter().all(|&v| v == 0) {
            constant += coeff;
        } else {
            terms.push(Term { coeff, exps });
        }
    }
    let g = PolyExpr::from_terms(p, terms);
    let mut indep = 0.0;
    for j in 0..r_tf.num_independent() {
        indep += a.dot(&r_tf.indep_generators().column(j).into_owned()).abs();
    }
    Ok((g, spec.b - constant - indep))
}

/// `g` bounded over a box on the initial-set factors, with every
/// later-introduced factor ranging over the full unit interval.
fn bound_g_over(
    g: &PolyExpr,
    ids: &[u64],
    x0_ids: &[u64],
    alpha_box: &AlphaBox,
) -> RangeBound {
    let comps: Vec<RangeBound> = ids
        .iter()
        .map(|fid| match x0_ids.iter().position(|x| x == fid) {
            Some(k) => RangeBound::new(alpha_box.lo[k], alpha_box.hi[k]),
            None => RangeBound::UNIT,
        })
        .collect();
    g.eval_interval(&comps).expect("dimensions match")
}

/// Gradient ascent step data for the falsification search.
struct Objective {
    g: PolyExpr,
    grad: Vec<PolyExpr>,
}

impl Objective {
    fn new(g: PolyExpr) -> Self {
        let grad = (0..g.nvars()).map(|k| g.differentiate(k)).collect();
        Self { g, grad }
    }

    fn value(&self, alpha: &[f64]) -> f64 {
        self.g.eval_point(alpha).expect("dimension match")
    }

    fn gradient(&self, alpha: &[f64]) -> Vec<f64> {
        self.grad
            .iter()
            .map(|d| d.eval_point(alpha).expect("dimension match"))
            .collect()
    }

    /// Projected gradient ascent with backtracking; deterministic.
    fn ascend(&self, start: &[f64]) -> (Vec<f64>, f64) {
        let mut x: Vec<f64> = start.to_vec();
        let mut fx = self.value(&x);
        let mut step = 0.5;
        for _ in 0..300 {
            if step < 1e-10 {
                break;
            }
            let grad = self.gradient(&x);
            let cand: Vec<f64> = x
                .iter()
                .zip(&grad)
                .map(|(xi, gi)| (xi + step * gi).clamp(-1.0, 1.0))
                .collect();
            let fc = self.value(&cand);
            if fc > fx + 1e-15 {
                x = cand;
                fx = fc;
            } else {
                step *= 0.5;
            }
        }
        (x, fx)
    }
}

/// Searches the factor box for the largest violation of the spec on the
/// final reachable set, then verifies the candidate by simulation.
///
/// Best effort: failure to verify is reported through `verified = false`,
/// not as an error.
pub fn falsify(
    res: &ReachResult,
    sys: &NonlinearSystem,
    spec: &HalfspaceSpec,
    seed: u64,
) -> Result<FalsificationResult> {
    let final_set = res.final_set();
    let (g, margin) = project_spec(final_set, spec)?;
    let p_full = final_set.num_factors();
    let objective = Objective::new(g);

    let mut starts: Vec<Vec<f64>> = Vec::new();
    starts.push(vec![0.0; p_full]);
    // coarse axis grid
    for k in 0..p_full.min(16) {
        for v in [-1.0, -0.5, 0.5, 1.0] {
            let mut s = vec![0.0; p_full];
            s[k] = v;
            starts.push(s);
        }
    }
    // corners over the leading coordinates
    let corner_dims = p_full.min(10);
    for mask in 0..(1usize << corner_dims) {
        let mut s = vec![0.0; p_full];
        for (k, sk) in s.iter_mut().enumerate().take(corner_dims) {
            *sk = if mask >> k & 1 == 1 { 1.0 } else { -1.0 };
        }
        starts.push(s);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..32 {
        starts.push((0..p_full).map(|_| rng.random_range(-1.0..=1.0)).collect());
    }

    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in &starts {
        let (x, fx) = objective.ascend(s);
        if best.as_ref().is_none_or(|(_, fb)| fx > *fb) {
            best = Some((x, fx));
        }
    }
    let (alpha_full, _g_best) = best.expect("at least one start");

    // restrict to the initial-set factors for the candidate initial state
    let final_ids = final_set.ids();
    let alpha_star: Vec<f64> = res
        .x0_ids
        .iter()
        .map(|fid| {
            final_ids
                .iter()
                .position(|x| x == fid)
                .map_or(0.0, |k| alpha_full[k])
        })
        .collect();

    let x0 = res.initial_set();
    let x0_star = x0
        .partial_eval(&res.x0_ids, &alpha_star)?
        .enclose_zonotope()
        .center()
        .clone();

    let extracted = extract_final(res, &alpha_star)?;
    let objective_value = extracted.support(&spec.normal());

    let witness = simulate(sys, &x0_star, &InputSignal::none(), res.settings.tf, 1e-4)?;
    let violation = spec.normal().dot(witness.endpoint()) - spec.b;
    let verified = violation > 1e-6;
    let _ = margin;
    Ok(FalsificationResult {
        alpha_star,
        x0_star,
        objective: objective_value,
        verified,
        witness,
    })
}

/// Recursive bisection of the initial factor box. A box is certified safe
/// when the interval bound of the projected spec polynomial over it (with
/// later factors free) stays below the margin; everything else at the depth
/// limit is reported unknown.
pub fn partition_safe(
    res: &ReachResult,
    spec: &HalfspaceSpec,
    depth: usize,
) -> Result<(Vec<AlphaBox>, Vec<AlphaBox>)> {
    let final_set = res.final_set();
    let (g, margin) = project_spec(final_set, spec)?;
    let ids = final_set.ids().to_vec();
    let p = res.x0_ids.len();
    let mut safe = Vec::new();
    let mut unknown = Vec::new();
    let mut stack = vec![(AlphaBox::full(p), depth)];
    while let Some((box_, d)) = stack.pop() {
        let bound = bound_g_over(&g, &ids, &res.x0_ids, &box_);
        if bound.hi <= margin {
            safe.push(box_);
        } else if d == 0 {
            unknown.push(box_);
        } else {
            // split the longest edge, lowest index on ties
            let (mut split, mut width) = (0, -1.0);
            for k in 0..p {
                let w = box_.hi[k] - box_.lo[k];
                if w > width + 1e-15 {
                    width = w;
                    split = k;
                }
            }
            let mid = 0.5 * (box_.lo[split] + box_.hi[split]);
            let mut left = box_.clone();
            left.hi[split] = mid;
            let mut right = box_;
            right.lo[split] = mid;
            stack.push((left, d - 1));
            stack.push((right, d - 1));
        }
    }
    let key = |b: &AlphaBox| {
        b.lo.iter()
            .chain(b.hi.iter())
            .map(|v| v.to_bits())
            .collect::<Vec<_>>()
    };
    safe.sort_by_key(key);
    unknown.sort_by_key(key);
    Ok((safe, unknown))
}

/// Maximizes the volume of a factor box subject to the certified spec bound:
/// symmetric shrink via bisection on a contraction scalar, then deterministic
/// coordinate-wise expansion passes. The returned box always satisfies the
/// interval-certified constraint; an empty box signals that even the center
/// point fails.
pub fn optimize_initial_box(
    res: &ReachResult,
    spec: &HalfspaceSpec,
    tol: f64,
) -> Result<AlphaBox> {
    let final_set = res.final_set();
    let (g, margin) = project_spec(final_set, spec)?;
    let ids = final_set.ids().to_vec();
    let p = res.x0_ids.len();
    let feasible = |b: &AlphaBox| bound_g_over(&g, &ids, &res.x0_ids, b).hi <= margin;

    let scaled = |s: f64| AlphaBox {
        lo: vec![-s; p],
        hi: vec![s; p],
    };
    if feasible(&AlphaBox::full(p)) {
        return Ok(AlphaBox::full(p));
    }
    if !feasible(&scaled(0.0)) {
        return Ok(AlphaBox::empty(p));
    }
    let (mut lo_s, mut hi_s) = (0.0f64, 1.0f64);
    while hi_s - lo_s > tol.max(1e-12) {
        let mid = 0.5 * (lo_s + hi_s);
        if feasible(&scaled(mid)) {
            lo_s = mid;
        } else {
            hi_s = mid;
        }
    }
    let mut best = scaled(lo_s);

    // coordinate-wise expansion toward the box walls
    for _pass in 0..32 {
        let before = best.volume();
        for k in 0..p {
            // expand the upper bound
            let (mut lo_e, mut hi_e) = (best.hi[k], 1.0f64);
            while hi_e - lo_e > tol.max(1e-12) {
                let mid = 0.5 * (lo_e + hi_e);
                let mut cand = best.clone();
                cand.hi[k] = mid;
                if feasible(&cand) {
                    lo_e = mid;
                } else {
                    hi_e = mid;
                }
            }
            best.hi[k] = lo_e;
            // expand the lower bound
            let (mut lo_e, mut hi_e) = (-1.0f64, best.lo[k]);
            while hi_e - lo_e > tol.max(1e-12) {
                let mid = 0.5 * (lo_e + hi_e);
                let mut cand = best.clone();
                cand.lo[k] = mid;
                if feasible(&cand) {
                    hi_e = mid;
                } else {
                    lo_e = mid;
                }
            }
            best.lo[k] = hi_e;
        }
        if best.volume() - before <= tol {
            break;
        }
    }
    debug_assert!(feasible(&best));
    Ok(best)
}
