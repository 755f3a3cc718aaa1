//! Self-contained dense two-phase simplex and the zonotope membership test
//! built on it.

use crate::zonotope::Zonotope;
use nalgebra::{DMatrix, DVector};

const LP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum LpResult {
    Optimal { objective: f64, x: DVector<f64> },
    Infeasible,
    Unbounded,
}

/// Minimizes `c^T x` subject to `A x = b`, `x >= 0`, using the two-phase
/// simplex method with Bland's rule for anti-cycling.
pub fn solve_lp(a: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>) -> LpResult {
    let m = a.nrows();
    let n = a.ncols();
    assert_eq!(b.len(), m);
    assert_eq!(c.len(), n);

    // normalize b >= 0
    let mut a = a.clone();
    let mut b = b.clone();
    for i in 0..m {
        if b[i] < 0.0 {
            b[i] = -b[i];
            for j in 0..n {
                a[(i, j)] = -a[(i, j)];
            }
        }
    }

    // phase 1 tableau with artificial variables: columns [x | artificial | rhs]
    let total = n + m;
    let mut t = DMatrix::zeros(m + 1, total + 1);
    t.view_mut((0, 0), (m, n)).copy_from(&a);
    for i in 0..m {
        t[(i, n + i)] = 1.0;
        t[(i, total)] = b[i];
    }
    // phase-1 objective: sum of artificials, expressed in terms of non-basics
    for j in 0..n {
        let mut s = 0.0;
        for i in 0..m {
            s += t[(i, j)];
        }
        t[(m, j)] = -s;
    }
    let mut rhs_obj = 0.0;
    for i in 0..m {
        rhs_obj += t[(i, total)];
    }
    t[(m, total)] = -rhs_obj;

    let mut basis: Vec<usize> = (n..total).collect();
    if !simplex_iterate(&mut t, &mut basis, total) {
        return LpResult::Unbounded; // cannot happen in phase 1, defensive exit
    }
    if -t[(m, total)] > LP_TOL {
        return LpResult::Infeasible;
    }

    // drive artificial variables out of the basis where possible
    for i in 0..m {
        if basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| t[(i, j)].abs() > LP_TOL) {
                pivot(&mut t, i, j, total);
                basis[i] = j;
            }
        }
    }

    // phase 2: rebuild the objective row from c over the current basis
    for j in 0..=total {
        t[(m, j)] = 0.0;
    }
    for j in 0..n {
        t[(m, j)] = c[j];
    }
    for i in 0..m {
        if basis[i] < n {
            let cb = c[basis[i]];
            if cb != 0.0 {
                for j in 0..=total {
                    let v = t[(i, j)];
                    t[(m, j)] -= cb * v;
                }
            }
        }
    }
    // forbid re-entering artificial columns
    for j in n..total {
        t[(m, j)] = f64::INFINITY;
    }

    if !simplex_iterate(&mut t, &mut basis, n) {
        return LpResult::Unbounded;
    }

    let mut x = DVector::zeros(n);
    for i in 0..m {
        if basis[i] < n {
            x[basis[i]] = t[(i, total)];
        }
    }
    LpResult::Optimal {
        objective: c.dot(&x),
        x,
    }
}

/// Runs simplex pivots until optimal; returns false on unboundedness.
/// Entering columns are restricted to `0..allowed`.
fn simplex_iterate(t: &mut DMatrix<f64>, basis: &mut [usize], allowed: usize) -> bool {
    let m = t.nrows() - 1;
    let total = t.ncols() - 1;
    loop {
        // Bland: entering variable = lowest index with negative reduced cost
        let entering = (0..allowed).find(|&j| t[(m, j)] < -LP_TOL);
        let Some(j) = entering else {
            return true;
        };
        // ratio test, Bland ties by lowest basis index
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let aij = t[(i, j)];
            if aij > LP_TOL {
                let ratio = t[(i, total)] / aij;
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - LP_TOL
                            || (ratio < lr + LP_TOL && basis[i] < basis[li])
                        {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((i, _)) = leave else {
            return false;
        };
        pivot(t, i, j, total);
        basis[i] = j;
    }
}

fn pivot(t: &mut DMatrix<f64>, row: usize, col: usize, total: usize) {
    let piv = t[(row, col)];
    for j in 0..=total {
        t[(row, j)] /= piv;
    }
    for i in 0..t.nrows() {
        if i != row {
            let f = t[(i, col)];
            if f != 0.0 && f.is_finite() {
                for j in 0..=total {
                    let v = t[(row, j)];
                    t[(i, j)] -= f * v;
                }
            }
        }
    }
}

/// Result of the membership LP: the smallest attainable `max_j |beta_j|`
/// with `G beta = x - c`, or `None` when the equality system is infeasible.
pub fn min_inf_norm_factor(z: &Zonotope, x: &DVector<f64>) -> Option<f64> {
    let g = z.generators();
    let n = z.dim();
    let q = g.ncols();
    let d = x - z.center();
    if q == 0 {
        return if d.amax() <= LP_TOL { Some(0.0) } else { None };
    }
    // variables: u (q), v (q), s (q), t (1); beta = u - v
    // constraints: G u - G v = d;  u_j + v_j + s_j - t = 0
    let nvars = 3 * q + 1;
    let m = n + q;
    let mut a = DMatrix::zeros(m, nvars);
    let mut b = DVector::zeros(m);
    for i in 0..n {
        for j in 0..q {
            a[(i, j)] = g[(i, j)];
            a[(i, q + j)] = -g[(i, j)];
        }
        b[i] = d[i];
    }
    for j in 0..q {
        a[(n + j, j)] = 1.0;
        a[(n + j, q + j)] = 1.0;
        a[(n + j, 2 * q + j)] = 1.0;
        a[(n + j, 3 * q)] = -1.0;
    }
    let mut c = DVector::zeros(nvars);
    c[3 * q] = 1.0;
    match solve_lp(&a, &b, &c) {
        LpResult::Optimal { objective, .. } => Some(objective),
        LpResult::Infeasible => None,
        LpResult::Unbounded => None,
    }
}

/// Decides `x in Z`. Fast necessary filter on the interval hull, fast
/// sufficient check via a least-squares factor, exact LP decision otherwise.
pub fn point_in_zonotope(z: &Zonotope, x: &DVector<f64>) -> bool {
    point_in_zonotope_margin(z, x).is_some()
}

/// Like [`point_in_zonotope`] but reports `1 - ||beta||_inf` for a feasible
/// factor vector when the point is inside (a non-negative slack).
pub fn point_in_zonotope_margin(z: &Zonotope, x: &DVector<f64>) -> Option<f64> {
    assert_eq!(z.dim(), x.len(), "dimension mismatch in membership test");
    let tol = 1e-9;
    if !z.interval_hull().contains(x, tol) {
        return None;
    }
    let d = x - z.center();
    let scale = 1.0 + d.amax();
    if z.num_generators() == 0 {
        return if d.amax() <= tol * scale { Some(1.0) } else { None };
    }
    // least-squares fast accept
    let svd = z.generators().clone().svd(true, true);
    if let Ok(beta) = svd.solve(&d, 1e-12) {
        let residual = (z.generators() * &beta - &d).amax();
        if residual <= 1e-9 * scale && beta.amax() <= 1.0 + tol {
            return Some((1.0 - beta.amax()).max(0.0));
        }
    }
    // exact decision
    match min_inf_norm_factor(z, x) {
        Some(t) if t <= 1.0 + tol => Some((1.0 - t).max(0.0)),
        _ => None,
    }
}
