//! Polynomial ODE models, Taylor coefficient extraction and a fixed-step
//! simulation oracle.

use crate::error::{Error, Result};
use crate::interval::IntervalVector;
use crate::poly::PolyExpr;
use nalgebra::{DMatrix, DVector};

/// `x' = f(x, u)` with polynomial right-hand side over `z = [x^T u^T]^T`.
#[derive(Debug, Clone)]
pub struct NonlinearSystem {
    n: usize,
    m: usize,
    f: Vec<PolyExpr>,
}

impl NonlinearSystem {
    pub fn new(n: usize, m: usize, f: Vec<PolyExpr>) -> Result<Self> {
        if f.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} field components for state dimension {}",
                f.len(),
                n
            )));
        }
        for (i, fi) in f.iter().enumerate() {
            if fi.nvars() != n + m {
                return Err(Error::DimensionMismatch(format!(
                    "component {} is over {} variables, expected {}",
                    i,
                    fi.nvars(),
                    n + m
                )));
            }
        }
        Ok(Self { n, m, f })
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    pub fn field(&self) -> &[PolyExpr] {
        &self.f
    }

    pub fn eval_field(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        let mut z = Vec::with_capacity(self.n + self.m);
        z.extend(x.iter());
        z.extend(u.iter());
        let mut dx = DVector::zeros(self.n);
        for i in 0..self.n {
            dx[i] = self.f[i].eval_point(&z)?;
        }
        Ok(dx)
    }
}

/// Taylor expansion data of the field at an expansion point: value, Jacobian
/// blocks, Hessians, and the full degree-3-and-up residual kept symbolically
/// in the shifted coordinates `delta = z - z*`.
#[derive(Debug, Clone)]
pub struct TaylorCoeffs {
    pub zstar: DVector<f64>,
    pub w: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub d: Vec<DMatrix<f64>>,
    pub third: Vec<PolyExpr>,
}

/// Expands the field around `zstar`. The decomposition
/// `f(z) = w + [A B](z - z*) + 0.5 (z - z*)^T D (z - z*) + r3(z - z*)`
/// is exact: all blocks are read off one symbolic shift of the polynomials.
pub fn taylor(sys: &NonlinearSystem, zstar: &DVector<f64>) -> Result<TaylorCoeffs> {
    let n = sys.state_dim();
    let m = sys.input_dim();
    let nz = n + m;
    if zstar.len() != nz {
        return Err(Error::DimensionMismatch(format!(
            "expansion point of length {} for a system with {} variables",
            zstar.len(),
            nz
        )));
    }
    // substitute z_k = zstar_k + delta_k
    let subs: Vec<PolyExpr> = (0..nz)
        .map(|k| PolyExpr::constant(nz, zstar[k]).add(&PolyExpr::variable(nz, k)))
        .collect();

    let mut w = DVector::zeros(n);
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, m);
    let mut d = vec![DMatrix::zeros(nz, nz); n];
    let mut third = Vec::with_capacity(n);
    for i in 0..n {
        let shifted = sys.field()[i].compose(&subs);
        for t in shifted.terms() {
            match t.total_degree() {
                0 => w[i] = t.coeff,
                1 => {
                    let k = t.exps.iter().position(|&e| e == 1).expect("degree 1");
                    if k < n {
                        a[(i, k)] = t.coeff;
                    } else {
                        b[(i, k - n)] = t.coeff;
                    }
                }
                2 => {
                    let vars: Vec<usize> = (0..nz).filter(|&k| t.exps[k] > 0).collect();
                    match vars.as_slice() {
                        [k] => d[i][(*k, *k)] = 2.0 * t.coeff,
                        [j, k] => {
                            d[i][(*j, *k)] = t.coeff;
                            d[i][(*k, *j)] = t.coeff;
                        }
                        _ => unreachable!("degree-2 term touches at most two variables"),
                    }
                }
                _ => {}
            }
        }
        third.push(shifted.high_degree_part(3));
    }
    Ok(TaylorCoeffs {
        zstar: zstar.clone(),
        w,
        a,
        b,
        d,
        third,
    })
}

/// Sound componentwise enclosure of the Taylor residual over `z in box`.
/// The residual is the exact symbolic remainder beyond order 2, so for
/// polynomial dynamics no further Lagrange-form slack is needed.
pub fn lagrange_remainder(tc: &TaylorCoeffs, box_: &IntervalVector) -> Result<IntervalVector> {
    let nz = tc.zstar.len();
    if box_.dim() != nz {
        return Err(Error::DimensionMismatch(format!(
            "remainder box of dimension {} for {} variables",
            box_.dim(),
            nz
        )));
    }
    let shifted = box_.translate(&(-&tc.zstar));
    let comps = shifted.components();
    let bounds: Vec<crate::poly::RangeBound> = tc
        .third
        .iter()
        .map(|r3| r3.eval_interval(&comps))
        .collect::<Result<_>>()?;
    Ok(IntervalVector::from_components(&bounds))
}

/// Piecewise-constant input signal; empty for autonomous systems.
#[derive(Debug, Clone, Default)]
pub struct InputSignal {
    switch_times: Vec<f64>,
    values: Vec<DVector<f64>>,
}

impl InputSignal {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn constant(u: DVector<f64>) -> Self {
        Self {
            switch_times: vec![0.0],
            values: vec![u],
        }
    }

    /// `values[k]` applies from `switch_times[k]` (ascending) onwards.
    pub fn piecewise(switch_times: Vec<f64>, values: Vec<DVector<f64>>) -> Result<Self> {
        if switch_times.len() != values.len() {
            return Err(Error::DimensionMismatch(
                "switch times and values differ in length".to_string(),
            ));
        }
        if switch_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSet(
                "input switch times must be strictly increasing".to_string(),
            ));
        }
        Ok(Self { switch_times, values })
    }

    pub fn value_at(&self, t: f64, m: usize) -> DVector<f64> {
        if self.values.is_empty() {
            return DVector::zeros(m);
        }
        let mut idx = 0;
        for (k, &ts) in self.switch_times.iter().enumerate() {
            if ts <= t + 1e-12 {
                idx = k;
            } else {
                break;
            }
        }
        self.values[idx].clone()
    }
}

/// Simulated solution samples.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn endpoint(&self) -> &DVector<f64> {
        self.states.last().expect("non-empty trajectory")
    }
}

/// Classical fixed-step fourth-order Runge-Kutta. Deterministic; reports
/// divergence when the state leaves the finite range.
pub fn simulate(
    sys: &NonlinearSystem,
    x0: &DVector<f64>,
    u: &InputSignal,
    tf: f64,
    dt: f64,
) -> Result<Trajectory> {
    if dt <= 0.0 {
        return Err(Error::InvalidSettings("dt must be positive".to_string()));
    }
    if tf < 0.0 {
        return Err(Error::InvalidSettings("tf must be non-negative".to_string()));
    }
    if x0.len() != sys.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state of length {} for state dimension {}",
            x0.len(),
            sys.state_dim()
        )));
    }
    let m = sys.input_dim();
    let mut times = vec![0.0];
    let mut states = vec![x0.clone()];
    let mut t = 0.0;
    let mut x = x0.clone();
    while t < tf - 1e-12 {
        let h = dt.min(tf - t);
        let uv = u.value_at(t, m);
        let k1 = sys.eval_field(&x, &uv)?;
        let k2 = sys.eval_field(&(&x + &k1 * (h / 2.0)), &uv)?;
        let k3 = sys.eval_field(&(&x + &k2 * (h / 2.0)), &uv)?;
        let k4 = sys.eval_field(&(&x + &k3 * h), &uv)?;
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        t += h;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("state diverged at t = {t}")));
        }
        times.push(t);
        states.push(x.clone());
    }
    Ok(Trajectory { times, states })
}

/// Parses the documented system JSON shape into a model plus its names.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SystemSpec {
    pub n: usize,
    pub m: usize,
    pub vars: Vec<String>,
    pub inputs: Vec<String>,
    pub f: Vec<String>,
}

impl SystemSpec {
    pub fn build(&self) -> Result<NonlinearSystem> {
        if self.vars.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "{} variable names for n = {}",
                self.vars.len(),
                self.n
            )));
        }
        if self.inputs.len() != self.m {
            return Err(Error::DimensionMismatch(format!(
                "{} input names for m = {}",
                self.inputs.len(),
                self.m
            )));
        }
        let mut names = self.vars.clone();
        names.extend(self.inputs.iter().cloned());
        let f = self
            .f
            .iter()
            .map(|src| crate::poly::parse(src, &names))
            .collect::<Result<Vec<_>>>()?;
        NonlinearSystem::new(self.n, self.m, f)
    }
}

/// The Van der Pol oscillator, used throughout the tests.
pub fn van_der_pol() -> NonlinearSystem {
    let names = vec!["x1".to_string(), "x2".to_string()];
    let f = vec![
        crate::poly::parse("x2", &names).expect("valid"),
        crate::poly::parse("(1 - x1^2)*x2 - x1", &names).expect("valid"),
    ];
    NonlinearSystem::new(2, 0, f).expect("valid system")
}
