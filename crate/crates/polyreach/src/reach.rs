//! Dependency-preserving reachability for polynomial nonlinear systems.
//!
//! Each step abstracts the dynamics by a Taylor expansion of order 2 around
//! a fresh expansion point, propagates the dependent structure exactly
//! through the linearized flow, and pushes every time-varying contribution
//! (input variation, intra-step drift coupling, Taylor residual) into
//! rigorously enclosed zonotopic terms.

use crate::dynamics::{lagrange_remainder, taylor, NonlinearSystem, TaylorCoeffs};
use crate::error::{Error, Result};
use crate::interval::IntervalVector;
use crate::poly::RangeBound;
use crate::polyzono::{IdGenerator, PolyZonotope};
use crate::zonotope::Zonotope;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Engine parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ReachSettings {
    /// Time horizon in seconds.
    pub tf: f64,
    /// Step size in seconds.
    pub r: f64,
    /// Enlargement factor for the abstraction-error fixed point.
    pub lambda: f64,
    /// Target order for reduction after each step.
    pub rho_d: f64,
    /// Volume-ratio threshold triggering restructure.
    pub mu_d: f64,
    /// Maximum number of dependent factors after restructure.
    pub p_d: usize,
    /// Truncation order of the matrix-exponential series.
    pub eta: usize,
    /// Bound on the abstraction-error fixed-point iterations per step.
    pub max_abstraction_iters: usize,
}

impl Default for ReachSettings {
    fn default() -> Self {
        Self {
            tf: 1.0,
            r: 0.005,
            lambda: 0.1,
            rho_d: 50.0,
            mu_d: 0.01,
            p_d: 100,
            eta: 6,
            max_abstraction_iters: 10,
        }
    }
}

impl ReachSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0) {
            return Err(Error::InvalidSettings("r must be positive".to_string()));
        }
        if !(self.tf >= self.r) {
            return Err(Error::InvalidSettings(format!(
                "tf = {} must be at least the step size r = {}",
                self.tf, self.r
            )));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidSettings("lambda must be positive".to_string()));
        }
        if !(self.rho_d >= 1.0) {
            return Err(Error::InvalidSettings("rho_d must be at least 1".to_string()));
        }
        if !(self.mu_d >= 0.0) {
            return Err(Error::InvalidSettings("mu_d must be non-negative".to_string()));
        }
        if self.eta < 2 {
            return Err(Error::InvalidSettings("eta must be at least 2".to_string()));
        }
        if self.max_abstraction_iters == 0 {
            return Err(Error::InvalidSettings(
                "max_abstraction_iters must be positive".to_string(),
            ));
        }
        Ok(())
    }

    pub fn num_steps(&self) -> usize {
        (self.tf / self.r - 1e-9).ceil().max(1.0) as usize
    }
}

/// Truncated matrix series together with a rigorous entrywise bound on the
/// truncation error.
#[derive(Debug, Clone)]
pub struct TruncatedMatrix {
    pub mat: DMatrix<f64>,
    /// Every entry of the truncated tail has magnitude at most this bound.
    pub err: f64,
}

fn inf_norm(a: &DMatrix<f64>) -> f64 {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// Entrywise tail bound for the exponential series truncated after `eta`.
fn truncation_bound(a: &DMatrix<f64>, r: f64, eta: usize) -> Result<f64> {
    let norm = inf_norm(a) * r;
    let epsilon = norm / (eta as f64 + 2.0);
    if epsilon >= 1.0 {
        return Err(Error::TruncationDiverged { epsilon });
    }
    Ok(norm.powi(eta as i32 + 1) / factorial(eta + 1) / (1.0 - epsilon))
}

/// `e^{Ar}` as a truncated series `sum_{i=0}^{eta} (Ar)^i / i!`.
pub fn exp_enclosure(a: &DMatrix<f64>, r: f64, eta: usize) -> Result<TruncatedMatrix> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch("matrix exponential of a non-square matrix".to_string()));
    }
    let err = truncation_bound(a, r, eta)?;
    let mut mat = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for i in 1..=eta {
        term = (&term * a) * (r / i as f64);
        mat += &term;
    }
    Ok(TruncatedMatrix { mat, err })
}

/// `Gamma(r) = int_0^r e^{A tau} d tau` truncated after `eta`; the tail is
/// bounded by `r` times the exponential tail bound.
pub fn gamma(a: &DMatrix<f64>, r: f64, eta: usize) -> Result<TruncatedMatrix> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch("Gamma of a non-square matrix".to_string()));
    }
    let err = truncation_bound(a, r, eta)? * r;
    let mut mat = DMatrix::identity(n, n) * r;
    let mut power = DMatrix::identity(n, n);
    let mut coeff = r;
    for i in 1..=eta {
        power = &power * a;
        coeff *= r / (i as f64 + 1.0);
        mat += &power * coeff;
    }
    Ok(TruncatedMatrix { mat, err })
}

/// Sound enclosure of the particular solution
/// `{ int_0^t e^{A(t-s)} v(s) ds | t <= r, v(s) in V }`
/// from the interval hull of `V`, enlarged to contain the origin and
/// symmetrized so that partial integrals stay covered.
pub fn particular_solution(
    a: &DMatrix<f64>,
    r: f64,
    eta: usize,
    hull: &IntervalVector,
) -> Result<Zonotope> {
    let n = a.nrows();
    let b = DVector::from_fn(n, |i, _| hull.lower()[i].abs().max(hull.upper()[i].abs()));
    if b.iter().all(|v| *v == 0.0) {
        return Ok(Zonotope::zero(n));
    }
    let exp_err = truncation_bound(a, r, eta)?;
    let mut gens: Vec<DVector<f64>> = Vec::new();
    let mut power = DMatrix::identity(n, n);
    let mut coeff = r;
    for i in 0..=eta {
        if i > 0 {
            power = &power * a;
            coeff *= r / (i as f64 + 1.0);
        }
        let block = &power * DMatrix::from_diagonal(&b) * coeff;
        for j in 0..n {
            let col = block.column(j).into_owned();
            if col.iter().any(|v| *v != 0.0) {
                gens.push(col);
            }
        }
    }
    // tail of the series applied to the symmetrized box
    let tail = exp_err * r * b.sum();
    if tail > 0.0 {
        for j in 0..n {
            let mut col = DVector::zeros(n);
            col[j] = tail;
            gens.push(col);
        }
    }
    let g = if gens.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&gens)
    };
    Ok(Zonotope::new(DVector::zeros(n), g).expect("consistent dims"))
}

/// Sound enclosure of the state drift within one step,
/// `{x(t) - x(0) | t in [0, r]}`, from the enclosing zonotope of the shifted
/// time-point set and a candidate bound on the total forcing.
pub fn post_delta(
    delta_zono: &Zonotope,
    psi_bar: &Zonotope,
    a: &DMatrix<f64>,
    r: f64,
    eta: usize,
) -> Result<Zonotope> {
    let n = a.nrows();
    // interval matrix enclosing e^{A tau} - I over tau in [0, r]
    let mut center = DMatrix::zeros(n, n);
    let mut radius = DMatrix::zeros(n, n);
    let mut power = DMatrix::identity(n, n);
    let mut coeff = 1.0;
    for i in 1..=eta {
        power = &power * a;
        coeff *= r / i as f64;
        for row in 0..n {
            for col in 0..n {
                let v = power[(row, col)] * coeff;
                center[(row, col)] += 0.5 * v;
                radius[(row, col)] += 0.5 * v.abs();
            }
        }
    }
    let tail = truncation_bound(a, r, eta)?;
    for row in 0..n {
        for col in 0..n {
            radius[(row, col)] += tail;
        }
    }
    // interval matrix times zonotope
    let c = center.clone() * delta_zono.center();
    let mut gens: Vec<DVector<f64>> = Vec::new();
    let mapped = &center * delta_zono.generators();
    for j in 0..mapped.ncols() {
        let col = mapped.column(j).into_owned();
        if col.iter().any(|v| *v != 0.0) {
            gens.push(col);
        }
    }
    let mut reach_mag = delta_zono.abs_generator_sum();
    for i in 0..n {
        reach_mag[i] += delta_zono.center()[i].abs();
    }
    let slack = &radius * &reach_mag;
    for j in 0..n {
        if slack[j] != 0.0 {
            let mut col = DVector::zeros(n);
            col[j] = slack[j];
            gens.push(col);
        }
    }
    let g = if gens.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&gens)
    };
    let linear_part = Zonotope::new(c, g).expect("consistent dims");
    let forced_part = particular_solution(a, r, eta, &psi_bar.interval_hull())?;
    linear_part.minkowski_sum(&forced_part)
}

/// `[x]^T M [y]` for interval vectors and a real matrix.
fn interval_quadratic(x: &[RangeBound], m: &DMatrix<f64>, y: &[RangeBound]) -> RangeBound {
    let mut total = RangeBound::ZERO;
    for (j, xj) in x.iter().enumerate() {
        let mut row = RangeBound::ZERO;
        for (k, yk) in y.iter().enumerate() {
            row = row.add(yk.scale(m[(j, k)]));
        }
        total = total.add(xj.mul(row));
    }
    total
}

/// Variation of the abstraction inputs within a step: the direct input term
/// plus an interval enclosure of the quadratic coupling between the step's
/// start sets and the intra-step drift.
pub fn var_inputs(
    delta_zono: &Zonotope,
    drift: &Zonotope,
    u_delta: &Zonotope,
    b: &DMatrix<f64>,
    d: &[DMatrix<f64>],
) -> Zonotope {
    let n = delta_zono.dim();
    let direct = if u_delta.dim() > 0 {
        u_delta
            .linear_map(b)
            .expect("input matrix matches input dimension")
    } else {
        Zonotope::zero(n)
    };
    let z1 = delta_zono
        .interval_hull()
        .stack(&u_delta.interval_hull())
        .components();
    let z2 = drift
        .interval_hull()
        .stack(&u_delta.interval_hull())
        .components();
    let cross: Vec<RangeBound> = d
        .iter()
        .map(|di| {
            interval_quadratic(&z1, di, &z2)
                .scale(0.5)
                .add(interval_quadratic(&z2, di, &z1).scale(0.5))
                .add(interval_quadratic(&z2, di, &z2).scale(0.5))
        })
        .collect();
    let cross_zono = Zonotope::from_interval(&IntervalVector::from_components(&cross));
    direct
        .minkowski_sum(&cross_zono)
        .expect("matching dimensions")
}

/// Per-step abstraction-error data.
#[derive(Debug, Clone)]
pub struct StepError {
    /// Time-varying forcing: input variation plus drift coupling.
    pub v_delta: Zonotope,
    /// Enclosure of the Taylor residual over the time-interval set.
    pub lagrange: IntervalVector,
    /// `v_delta + lagrange`.
    pub psi_delta: Zonotope,
    /// Time-interval reachable set `R(tau_s)` (unshifted coordinates).
    pub r_tau: PolyZonotope,
}

/// Computes the abstraction error for one step given the candidate bound
/// `psi_bar` on the total forcing.
pub fn abstr_err(
    r_ts: &PolyZonotope,
    psi_bar: &Zonotope,
    tc: &TaylorCoeffs,
    u: &Zonotope,
    settings: &ReachSettings,
) -> Result<StepError> {
    let n = r_ts.dim();
    let x_star = DVector::from_fn(n, |i, _| tc.zstar[i]);
    let delta_r = r_ts.translate(&(-&x_star));
    let u_delta = u.translate(&(-u.center()));
    let delta_zono = delta_r.enclose_zonotope();

    let drift = post_delta(&delta_zono, psi_bar, &tc.a, settings.r, settings.eta)?;
    let v_delta = var_inputs(&delta_zono, &drift, &u_delta, &tc.b, &tc.d);

    let r_tau = r_ts.minkowski_sum_zonotope(&drift)?;
    let z_box = r_tau.enclose_interval().stack(&u.interval_hull());
    let lagrange = lagrange_remainder(tc, &z_box)?;
    if !lagrange.is_finite() {
        return Err(Error::NonFinite("Lagrange remainder diverged".to_string()));
    }

    let psi_delta = v_delta.minkowski_sum(&Zonotope::from_interval(&lagrange))?;
    Ok(StepError {
        v_delta,
        lagrange,
        psi_delta,
        r_tau,
    })
}

/// One propagation step:
/// `e^{Ar} (R - x*) (exact-add) Gamma(r) V (+) particular(V_delta + L) (+) x*`,
/// with the series truncation errors folded into the zonotopic tail.
pub fn post(
    r_ts: &PolyZonotope,
    tc: &TaylorCoeffs,
    v: &PolyZonotope,
    v_delta: &Zonotope,
    lagrange: &IntervalVector,
    settings: &ReachSettings,
) -> Result<PolyZonotope> {
    let n = r_ts.dim();
    let x_star = DVector::from_fn(n, |i, _| tc.zstar[i]);
    let delta_r = r_ts.translate(&(-&x_star));

    let phi = exp_enclosure(&tc.a, settings.r, settings.eta)?;
    let gm = gamma(&tc.a, settings.r, settings.eta)?;

    let f1 = delta_r.linear_map(&phi.mat)?;
    let f2 = v.linear_map(&gm.mat)?;
    let dependent = f1.exact_add(&f2)?;

    let forcing = v_delta.minkowski_sum(&Zonotope::from_interval(lagrange))?;
    let particular = particular_solution(&tc.a, settings.r, settings.eta, &forcing.interval_hull())?;

    // truncation errors of both series, as centered boxes
    let trunc_r = series_error_box(phi.err, &delta_r.enclose_interval());
    let trunc_v = series_error_box(gm.err, &v.enclose_interval());

    let tail = particular
        .minkowski_sum(&trunc_r)?
        .minkowski_sum(&trunc_v)?
        .translate(&x_star);
    dependent.minkowski_sum_zonotope(&tail).map(|pz| pz.compact())
}

/// `err`-bounded interval matrix applied to the hull of a set, as a centered
/// box zonotope.
fn series_error_box(err: f64, hull: &IntervalVector) -> Zonotope {
    let n = hull.dim();
    let mag: f64 = (0..n)
        .map(|i| hull.lower()[i].abs().max(hull.upper()[i].abs()))
        .sum();
    let radius = err * mag;
    if radius == 0.0 {
        return Zonotope::zero(n);
    }
    Zonotope::new(
        DVector::zeros(n),
        DMatrix::from_diagonal(&DVector::from_element(n, radius)),
    )
    .expect("consistent dims")
}

/// Result of a reachability run.
#[derive(Debug, Clone)]
pub struct ReachResult {
    /// `(t_s, R(t_s))`, starting with `(0, X0)`.
    pub time_points: Vec<(f64, PolyZonotope)>,
    /// `(t_s, t_{s+1}, R(tau_s))`.
    pub time_intervals: Vec<(f64, f64, PolyZonotope)>,
    /// The applied total-forcing bound per step (replay input).
    pub abstraction_errors: Vec<Zonotope>,
    /// Expansion point `z*_s` per step (replay input).
    pub expansion_points: Vec<DVector<f64>>,
    /// Fixed-point iterations used per step.
    pub abstraction_iters: Vec<usize>,
    /// Identifiers of the initial set's dependent factors.
    pub x0_ids: Vec<u64>,
    pub settings: ReachSettings,
}

impl ReachResult {
    pub fn final_set(&self) -> &PolyZonotope {
        &self.time_points.last().expect("at least the initial set").1
    }

    pub fn initial_set(&self) -> &PolyZonotope {
        &self.time_points.first().expect("at least the initial set").1
    }

    /// The per-step replay inputs for dependency-preservation checks.
    pub fn replay_inputs(&self) -> Vec<(Zonotope, DVector<f64>)> {
        self.abstraction_errors
            .iter()
            .cloned()
            .zip(self.expansion_points.iter().cloned())
            .collect()
    }

    pub fn max_id(&self) -> u64 {
        self.time_points
            .iter()
            .map(|(_, s)| s.max_id())
            .chain(self.time_intervals.iter().map(|(_, _, s)| s.max_id()))
            .max()
            .unwrap_or(0)
    }

    /// Structural consistency: time grids contiguous, initial ids carried
    /// through every stored set.
    pub fn validate(&self) -> Result<()> {
        let n_steps = self.time_intervals.len();
        if self.time_points.len() != n_steps + 1
            || self.abstraction_errors.len() != n_steps
            || self.expansion_points.len() != n_steps
        {
            return Err(Error::InvalidSet(format!(
                "inconsistent list lengths: {} point sets for {} interval sets",
                self.time_points.len(),
                n_steps
            )));
        }
        for (s, (t0, t1, _)) in self.time_intervals.iter().enumerate() {
            let tp0 = self.time_points[s].0;
            let tp1 = self.time_points[s + 1].0;
            if (t0 - tp0).abs() > 1e-9 || (t1 - tp1).abs() > 1e-9 {
                return Err(Error::InvalidSet(format!(
                    "time grid mismatch at step {s}: interval [{t0}, {t1}] against points {tp0}, {tp1}"
                )));
            }
        }
        for (t, set) in &self.time_points {
            for fid in &self.x0_ids {
                if !set.ids().contains(fid) {
                    return Err(Error::IdMismatch(format!(
                        "initial factor {fid} missing from the set at t = {t}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Computes the reachable set over `[0, tf]`.
///
/// The initial set must have no independent generators (apply
/// `remove_independent` first); the input set `U` is a zonotope of the
/// system's input dimension.
pub fn reach(
    sys: &NonlinearSystem,
    x0: &PolyZonotope,
    u: &Zonotope,
    settings: &ReachSettings,
) -> Result<ReachResult> {
    reach_with_replay(sys, x0, u, settings, None)
}

/// Like [`reach`], but optionally replays precomputed abstraction errors and
/// expansion points instead of running the fixed-point iteration. Used to
/// check dependency preservation on subsets of the initial set.
pub fn reach_with_replay(
    sys: &NonlinearSystem,
    x0: &PolyZonotope,
    u: &Zonotope,
    settings: &ReachSettings,
    replay: Option<&[(Zonotope, DVector<f64>)]>,
) -> Result<ReachResult> {
    settings.validate()?;
    let n = sys.state_dim();
    let m = sys.input_dim();
    if x0.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "initial set of dimension {} for state dimension {}",
            x0.dim(),
            n
        )));
    }
    if x0.num_independent() != 0 {
        return Err(Error::InvalidSet(
            "initial set must have no independent generators; apply remove_independent first"
                .to_string(),
        ));
    }
    if u.dim() != m {
        return Err(Error::DimensionMismatch(format!(
            "input set of dimension {} for input dimension {}",
            u.dim(),
            m
        )));
    }
    let n_steps = settings.num_steps();
    if let Some(list) = replay {
        if list.len() != n_steps {
            return Err(Error::InvalidSet(format!(
                "replay data for {} steps, expected {}",
                list.len(),
                n_steps
            )));
        }
    }

    let x0_ids = x0.ids().to_vec();
    let idgen = IdGenerator::starting_after(x0.max_id());
    let u_delta = u.translate(&(-u.center()));

    let mut result = ReachResult {
        time_points: vec![(0.0, x0.clone())],
        time_intervals: Vec::with_capacity(n_steps),
        abstraction_errors: Vec::with_capacity(n_steps),
        expansion_points: Vec::with_capacity(n_steps),
        abstraction_iters: Vec::with_capacity(n_steps),
        x0_ids: x0_ids.clone(),
        settings: settings.clone(),
    };

    let mut current = x0.clone();
    for s in 0..n_steps {
        let t_s = s as f64 * settings.r;

        let (zstar, replayed_psi) = match replay {
            Some(list) => (list[s].1.clone(), Some(list[s].0.clone())),
            None => {
                let hull = current.enclose_interval();
                if !hull.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "reachable set diverged before step {s}"
                    )));
                }
                let mut z = DVector::zeros(n + m);
                z.rows_mut(0, n).copy_from(&hull.mid());
                if m > 0 {
                    z.rows_mut(n, m).copy_from(u.center());
                }
                (z, None)
            }
        };
        let tc = taylor(sys, &zstar)?;
        let x_star = DVector::from_fn(n, |i, _| zstar[i]);

        // V(t_s) = w (+) 1/2 sq(D, (R - x*) x U^Delta); the center-input term
        // is absorbed into w because the expansion point uses the input center
        let delta_r = current.translate(&(-&x_star));
        let quad_arg = delta_r.cartesian_product_zonotope(&u_delta);
        let q_half: Vec<DMatrix<f64>> = tc.d.iter().map(|di| di * 0.5).collect();
        let v = quad_arg
            .quadratic_map(&q_half, &idgen)?
            .translate(&tc.w);

        // abstraction-error fixed point
        let mut psi = Zonotope::zero(n);
        let mut converged: Option<(Zonotope, StepError)> = None;
        let mut iters = 0;
        for _ in 0..settings.max_abstraction_iters {
            iters += 1;
            let psi_bar = match &replayed_psi {
                Some(fixed) => fixed.clone(),
                None => psi.enlarge(settings.lambda),
            };
            let step = abstr_err(&current, &psi_bar, &tc, u, settings)?;
            let psi_new_hull = v
                .enclose_interval()
                .add(&step.psi_delta.interval_hull())?;
            if replayed_psi.is_some() || box_contained(&psi_new_hull, &psi_bar.interval_hull()) {
                converged = Some((psi_bar, step));
                break;
            }
            psi = Zonotope::from_interval(&psi_new_hull);
        }
        let Some((psi_bar, step)) = converged else {
            return Err(Error::AbstractionDiverged {
                step: s,
                max_iters: settings.max_abstraction_iters,
            });
        };

        let raw = post(&current, &tc, &v, &step.v_delta, &step.lagrange, settings)?;
        let mut next = raw.reduce(settings.rho_d);
        if next.vol_ratio() > settings.mu_d {
            next = next.restructure_protected(&idgen, settings.p_d, &x0_ids);
        }
        next = next.ensure_ids(&x0_ids);
        if !next.is_finite() {
            return Err(Error::NonFinite(format!(
                "reachable set diverged at step {s}"
            )));
        }

        result
            .time_intervals
            .push((t_s, t_s + settings.r, step.r_tau.ensure_ids(&x0_ids)));
        result.abstraction_errors.push(psi_bar);
        result.expansion_points.push(zstar);
        result.abstraction_iters.push(iters);
        result.time_points.push((t_s + settings.r, next.clone()));
        current = next;
    }
    Ok(result)
}

fn box_contained(inner: &IntervalVector, outer: &IntervalVector) -> bool {
    let tol = 1e-12;
    (0..inner.dim()).all(|i| {
        let scale = 1.0 + outer.lower()[i].abs().max(outer.upper()[i].abs());
        outer.lower()[i] - tol * scale <= inner.lower()[i]
            && inner.upper()[i] <= outer.upper()[i] + tol * scale
    })
}

// -- serialization ------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TimePointJson {
    t: f64,
    set: PolyZonotope,
}

#[derive(Serialize, Deserialize)]
struct TimeIntervalJson {
    t0: f64,
    t1: f64,
    set: PolyZonotope,
}

#[derive(Serialize, Deserialize)]
struct ReachResultJson {
    time_points: Vec<TimePointJson>,
    time_intervals: Vec<TimeIntervalJson>,
    abstraction_errors: Vec<Zonotope>,
    expansion_points: Vec<Vec<f64>>,
    abstraction_iters: Vec<usize>,
    x0_ids: Vec<u64>,
    settings: ReachSettings,
}

impl Serialize for ReachResult {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ReachResultJson {
            time_points: self
                .time_points
                .iter()
                .map(|(t, set)| TimePointJson { t: *t, set: set.clone() })
                .collect(),
            time_intervals: self
                .time_intervals
                .iter()
                .map(|(t0, t1, set)| TimeIntervalJson {
                    t0: *t0,
                    t1: *t1,
                    set: set.clone(),
                })
                .collect(),
            abstraction_errors: self.abstraction_errors.clone(),
            expansion_points: self
                .expansion_points
                .iter()
                .map(|z| z.iter().cloned().collect())
                .collect(),
            abstraction_iters: self.abstraction_iters.clone(),
            x0_ids: self.x0_ids.clone(),
            settings: self.settings.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ReachResult {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = ReachResultJson::deserialize(d)?;
        Ok(ReachResult {
            time_points: raw.time_points.into_iter().map(|x| (x.t, x.set)).collect(),
            time_intervals: raw
                .time_intervals
                .into_iter()
                .map(|x| (x.t0, x.t1, x.set))
                .collect(),
            abstraction_errors: raw.abstraction_errors,
            expansion_points: raw
                .expansion_points
                .into_iter()
                .map(DVector::from_vec)
                .collect(),
            abstraction_iters: raw.abstraction_iters,
            x0_ids: raw.x0_ids,
            settings: raw.settings,
        })
    }
}
