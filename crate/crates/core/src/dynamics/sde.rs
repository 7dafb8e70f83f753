use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng;

/// Linear part acting on each pair `b_k` as `(rate_k + freq_k J) b_k`, with `J`
/// the counter-clockwise generator; integrated exactly.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairLinear {
    pub rates: Vec<f64>,
    pub freqs: Vec<f64>,
}

impl PairLinear {
    /// Rates `-k^2`, no rotation.
    pub fn heat(n_pairs: usize) -> Self {
        Self {
            rates: (1..=n_pairs).map(|k| -((k * k) as f64)).collect(),
            freqs: vec![0.0; n_pairs],
        }
    }

    pub fn with_freqs(mut self, freqs: Vec<f64>) -> Self {
        self.freqs = freqs;
        self
    }

    pub fn propagate(&self, x: &mut [f64], h: f64) {
        for ((pair, &r), &w) in x.chunks_exact_mut(2).zip(&self.rates).zip(&self.freqs) {
            let damp = (r * h).exp();
            let (s, c) = (w * h).sin_cos();
            let (a, b) = (pair[0], pair[1]);
            pair[0] = damp * (c * a - s * b);
            pair[1] = damp * (s * a + c * b);
        }
    }
}

/// One step `x -> E_dt (x + drift(x) dt + sum_c col_c sqrt(dt) xi_c)`.
///
/// `E_dt` is the exact flow of `linear` (identity when `None`), so a stiff
/// diagonal is handled by an exponential factor and everything else is
/// Euler-Maruyama. One standard normal is drawn per dispersion column, in
/// column order.
pub fn sde_step<D, B>(
    x: &[f64],
    drift: D,
    dispersion: B,
    linear: Option<&PairLinear>,
    dt: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>>
where
    D: FnOnce(&[f64]) -> Result<Vec<f64>>,
    B: FnOnce(&[f64]) -> Result<DMatrix<f64>>,
{
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt = {dt} must be positive")));
    }
    let a = drift(x)?;
    let cols = dispersion(x)?;
    if a.len() != x.len() || (cols.ncols() > 0 && cols.nrows() != x.len()) {
        return Err(Error::Dimension {
            expected: x.len(),
            found: if a.len() != x.len() { a.len() } else { cols.nrows() },
        });
    }
    let mut y: Vec<f64> = x.iter().zip(&a).map(|(x, a)| x + a * dt).collect();
    let sq = dt.sqrt();
    for col in cols.column_iter() {
        let xi = rng::normal(rng) * sq;
        for (y, c) in y.iter_mut().zip(col.iter()) {
            *y += c * xi;
        }
    }
    if let Some(lin) = linear {
        lin.propagate(&mut y, dt);
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            path: 0,
            tau: f64::NAN,
            last_good: x.to_vec(),
        });
    }
    Ok(y)
}
