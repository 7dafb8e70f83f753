use nalgebra::DMatrix;

use super::{ActionVector, BirkhoffBackend, BirkhoffVector, Capabilities};
use crate::error::{Error, Result};
use crate::field::FourierField;

/// The linearization at zero, `v_s = |s|^{-1/2} u_s`.
///
/// Exact for the Airy flow `u_t + u_xxx = 0`, under which pair `j` rotates
/// clockwise at rate `j^3`; in the counter-clockwise angle convention the
/// frequencies are therefore `W_j = -j^3`.
#[derive(Debug, Clone)]
pub struct LinearBackend {
    n_pairs: usize,
}

impl LinearBackend {
    pub fn new(n_pairs: usize) -> Self {
        Self { n_pairs }
    }

    fn check(&self, u: &FourierField) -> Result<()> {
        if u.s_max() < self.n_pairs {
            return Err(Error::Dimension {
                expected: self.n_pairs,
                found: u.s_max(),
            });
        }
        Ok(())
    }
}

impl BirkhoffBackend for LinearBackend {
    fn name(&self) -> &'static str {
        "linear"
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            forward: true,
            inverse: true,
            jacobian: true,
            hessian: true,
            frequencies: true,
            angles: true,
        }
    }

    fn n_pairs(&self) -> usize {
        self.n_pairs
    }

    fn forward(&self, u: &FourierField) -> Result<BirkhoffVector> {
        self.check(u)?;
        let v = u.coeffs()[..2 * self.n_pairs]
            .iter()
            .enumerate()
            .map(|(i, c)| c / ((i / 2 + 1) as f64).sqrt())
            .collect();
        BirkhoffVector::from_vec(v)
    }

    fn inverse(&self, v: &BirkhoffVector) -> Result<FourierField> {
        FourierField::from_coeffs(
            v.as_slice()
                .iter()
                .enumerate()
                .map(|(i, c)| c * ((i / 2 + 1) as f64).sqrt())
                .collect(),
        )
    }

    fn jacobian(&self, u: &FourierField) -> Result<DMatrix<f64>> {
        self.check(u)?;
        let mut j = DMatrix::zeros(2 * self.n_pairs, 2 * u.s_max());
        for i in 0..2 * self.n_pairs {
            j[(i, i)] = 1.0 / ((i / 2 + 1) as f64).sqrt();
        }
        Ok(j)
    }

    fn hessian_diag(&self, u: &FourierField, _coord: usize) -> Result<Vec<f64>> {
        self.check(u)?;
        Ok(vec![0.0; 2 * self.n_pairs])
    }

    fn frequencies(&self, _actions: &ActionVector) -> Result<Vec<f64>> {
        Ok((1..=self.n_pairs).map(|j| -((j * j * j) as f64)).collect())
    }
}
