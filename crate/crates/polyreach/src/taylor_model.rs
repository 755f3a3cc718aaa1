//! Taylor models: polynomial part plus interval remainder over a box domain.

use crate::error::{Error, Result};
use crate::interval::IntervalVector;
use crate::poly::PolyExpr;

/// `{ p(x) + y | x in domain, y in remainder }` with one polynomial per
/// output dimension, all over the same `n` domain variables.
#[derive(Debug, Clone)]
pub struct TaylorModel {
    polys: Vec<PolyExpr>,
    remainder: IntervalVector,
    domain: IntervalVector,
}

impl TaylorModel {
    pub fn new(
        polys: Vec<PolyExpr>,
        remainder: IntervalVector,
        domain: IntervalVector,
    ) -> Result<Self> {
        let n = polys.len();
        if remainder.dim() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} polynomials with remainder dimension {}",
                n,
                remainder.dim()
            )));
        }
        if domain.dim() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} polynomials with domain dimension {}",
                n,
                domain.dim()
            )));
        }
        for p in &polys {
            if p.nvars() != n {
                return Err(Error::DimensionMismatch(format!(
                    "Taylor model polynomial over {} variables, expected {}",
                    p.nvars(),
                    n
                )));
            }
        }
        Ok(Self { polys, remainder, domain })
    }

    pub fn dim(&self) -> usize {
        self.polys.len()
    }

    pub fn polys(&self) -> &[PolyExpr] {
        &self.polys
    }

    pub fn remainder(&self) -> &IntervalVector {
        &self.remainder
    }

    pub fn domain(&self) -> &IntervalVector {
        &self.domain
    }
}
