use nalgebra::DMatrix;

use super::SlowSystem;
use crate::averaging::Perturbation;
use crate::birkhoff::BirkhoffVector;
use crate::dynamics::PairLinear;
use crate::error::{Error, Result};

/// The un-averaged equation in Birkhoff coordinates, in slow time,
///
/// ```text
/// dv_k = nu^{-1} W_k J v_k dtau + P_k(v) dtau + sum_j B_kj(v) dbeta_j,
/// ```
///
/// with constant prescribed frequencies `W`. Setting `W = 0` removes the fast
/// rotation, which turns the system into a negative control for averaging.
pub struct FastSystem {
    fields: Perturbation,
    linear: PairLinear,
}

impl FastSystem {
    pub fn new(fields: Perturbation, freqs: &[f64], nu: f64) -> Result<Self> {
        let n = fields.n_pairs();
        if freqs.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: freqs.len(),
            });
        }
        if !(nu > 0.0) {
            return Err(Error::Config(format!("nu = {nu} must be positive")));
        }
        let linear = PairLinear::heat(n).with_freqs(freqs.iter().map(|w| w / nu).collect());
        Ok(Self { fields, linear })
    }

    /// Frequencies taken from the backend at `I = 0`.
    pub fn with_backend_frequencies(fields: Perturbation, nu: f64) -> Result<Self> {
        let w = fields.backend().frequencies(&crate::ActionVector(vec![0.0; fields.n_pairs()]))?;
        Self::new(fields, &w, nu)
    }
}

impl SlowSystem for FastSystem {
    fn n_pairs(&self) -> usize {
        self.fields.n_pairs()
    }

    fn linear(&self) -> &PairLinear {
        &self.linear
    }

    fn coefficients(&self, v: &BirkhoffVector, noise: bool) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let pd = self.fields.evaluate(v)?;
        let mut drift = pd.drift();
        for (i, (d, x)) in drift.iter_mut().zip(v.as_slice()).enumerate() {
            *d -= self.linear.rates[i / 2] * x;
        }
        let cols = if noise {
            pd.dispersion
        } else {
            DMatrix::zeros(drift.len(), 0)
        };
        Ok((drift, cols))
    }

    fn tag(&self) -> &'static str {
        "fast"
    }
}
