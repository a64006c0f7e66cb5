use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, C64};

/// Pure state of a trajectory; `time` is in the same units as the rates.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub amplitudes: Vec<C64>,
    pub time: f64,
}

impl StateVector {
    pub fn basis(dimension: usize, index: usize) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); dimension];
        amplitudes[index] = C64::new(1.0, 0.0);
        StateVector {
            amplitudes,
            time: 0.0,
        }
    }

    /// Normalized state from arbitrary amplitudes.
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Result<Self> {
        let mut s = StateVector {
            amplitudes,
            time: 0.0,
        };
        s.normalize()?;
        Ok(s)
    }

    pub fn dimension(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amplitudes)
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Internal(format!("cannot normalize state with squared norm {n}")));
        }
        let inv = n.sqrt().recip();
        self.amplitudes.iter_mut().for_each(|a| *a *= inv);
        Ok(())
    }
}

pub(crate) fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

/// `⟨ψ|O|ψ⟩` for a normalized state.
pub fn expectation(state: &StateVector, op: &CsrMatrix) -> Result<C64> {
    if op.nrows() != state.dimension() || op.ncols() != state.dimension() {
        return Err(Error::DimensionMismatch {
            expected: state.dimension(),
            found: op.nrows(),
        });
    }
    Ok(op.quadratic_form(&state.amplitudes))
}
