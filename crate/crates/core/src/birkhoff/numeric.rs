use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::BirkhoffBackend;
use crate::error::{Error, Result};
use crate::field::FourierField;

/// Central finite-difference step sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteDifference {
    pub jacobian_step: f64,
    pub hessian_step: f64,
}

impl Default for FiniteDifference {
    fn default() -> Self {
        Self {
            jacobian_step: 1e-5,
            hessian_step: 1e-3,
        }
    }
}

fn shifted(u: &FourierField, coord: usize, h: f64) -> FourierField {
    let mut out = u.clone();
    out.coeffs_mut()[coord] += h;
    out
}

/// Central-difference `dPsi(u)`, one column per field coordinate.
///
/// Columns are evaluated in parallel and assembled by index, so the result does
/// not depend on scheduling.
pub fn numeric_jacobian<B: BirkhoffBackend + ?Sized>(
    backend: &B,
    u: &FourierField,
    fd: &FiniteDifference,
) -> Result<DMatrix<f64>> {
    let h = fd.jacobian_step;
    let rows = 2 * backend.n_pairs();
    let cols: Vec<Vec<f64>> = (0..2 * u.s_max())
        .into_par_iter()
        .map(|c| {
            let plus = backend.forward(&shifted(u, c, h))?;
            let minus = backend.forward(&shifted(u, c, -h))?;
            let col: Vec<f64> = plus
                .as_slice()
                .iter()
                .zip(minus.as_slice())
                .map(|(p, m)| (p - m) / (2.0 * h))
                .collect();
            if col.iter().any(|x| !x.is_finite()) {
                return Err(Error::Differentiation(c));
            }
            Ok(col)
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(rows, cols.len(), |r, c| cols[c][r]))
}

/// Central second difference `d^2 Psi(u)(e_c, e_c)`.
pub fn numeric_hessian_diag<B: BirkhoffBackend + ?Sized>(
    backend: &B,
    u: &FourierField,
    coord: usize,
    fd: &FiniteDifference,
) -> Result<Vec<f64>> {
    let h = fd.hessian_step;
    let plus = backend.forward(&shifted(u, coord, h))?;
    let mid = backend.forward(u)?;
    let minus = backend.forward(&shifted(u, coord, -h))?;
    let out: Vec<f64> = plus
        .as_slice()
        .iter()
        .zip(mid.as_slice())
        .zip(minus.as_slice())
        .map(|((p, c), m)| (p - 2.0 * c + m) / (h * h))
        .collect();
    if out.iter().any(|x| !x.is_finite()) {
        return Err(Error::Differentiation(coord));
    }
    Ok(out)
}
