//! Actions from the periodic spectrum of the Hill operator `L = -d^2/dx^2 + u`
//! on `[0, 2 pi]`.
//!
//! `u_t + u_xxx - 6 u u_x = 0` is the isospectral Lax flow of `L`, so the
//! periodic and antiperiodic eigenvalues, and with them the gap lengths, are
//! integrals of motion. Gap `j` sits near `(j/2)^2` between the combined
//! eigenvalues `lambda_{2j-1} <= lambda_{2j}`: odd gaps come from the
//! antiperiodic block, even gaps from the periodic one. At small amplitude the
//! gap length is `gamma_j ~ 2 |q_j|` with `q_j` the complex Fourier coefficient
//! of `u`, i.e. `gamma_j ~ |(u_j, u_-j)| / sqrt(pi)`. Actions are calibrated to
//! that leading order:
//!
//! ```text
//! I_j = pi gamma_j^2 / (2 j)   ->   (u_j^2 + u_-j^2) / (2 j)
//! ```
//!
//! This is exact in the conserved quantity (a function of `gamma_j` only) and
//! approximate as a normalization of the true KdV action.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix};

use super::{ActionVector, BirkhoffBackend, Capabilities};
use crate::error::{Error, Result};
use crate::field::FourierField;

#[derive(Debug, Clone)]
pub struct HillBackend {
    n_gaps: usize,
    resolution: usize,
}

impl HillBackend {
    /// `resolution` is the ratio of Hill-matrix Fourier modes to the field
    /// truncation order.
    pub fn new(n_gaps: usize, resolution: usize) -> Result<Self> {
        if n_gaps == 0 || resolution < 2 {
            return Err(Error::Config(format!(
                "hill backend needs n_gaps >= 1 and resolution >= 2 (got {n_gaps}, {resolution})"
            )));
        }
        Ok(Self { n_gaps, resolution })
    }

    pub fn n_gaps(&self) -> usize {
        self.n_gaps
    }

    fn n_modes(&self, u: &FourierField) -> usize {
        (self.resolution * u.s_max()).max(8)
    }

    pub fn spectrum(&self, u: &FourierField) -> Result<HillSpectrum> {
        let m = self.n_modes(u);
        if 2 * self.n_gaps > m {
            return Err(Error::SpectralResolution(format!(
                "{} gaps requested but only {m} Fourier modes in the Hill matrix",
                self.n_gaps
            )));
        }
        let qhat = |k: i64| -> Complex<f64> {
            if k == 0 || k.unsigned_abs() as usize > u.s_max() {
                return Complex::new(0.0, 0.0);
            }
            let a = k.unsigned_abs() as i64;
            let c = Complex::new(u.get(a), -u.get(-a)) * (0.5 / PI.sqrt());
            if k > 0 {
                c
            } else {
                c.conj()
            }
        };
        let block = |freqs: Vec<f64>, ints: Vec<i64>| -> Vec<f64> {
            let n = freqs.len();
            let h = DMatrix::from_fn(n, n, |a, b| {
                let mut z = qhat(ints[a] - ints[b]);
                if a == b {
                    z += Complex::new(freqs[a] * freqs[a], 0.0);
                }
                z
            });
            let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            ev
        };
        let mi = m as i64;
        let per_ints: Vec<i64> = (-mi..=mi).collect();
        let periodic = block(per_ints.iter().map(|&n| n as f64).collect(), per_ints);
        let anti_ints: Vec<i64> = (-mi..mi).collect();
        let antiperiodic = block(anti_ints.iter().map(|&n| n as f64 + 0.5).collect(), anti_ints);
        let spectrum = HillSpectrum {
            periodic,
            antiperiodic,
        };
        spectrum.check_ordering(self.n_gaps)?;
        Ok(spectrum)
    }
}

/// Sorted periodic and antiperiodic eigenvalues of a truncated Hill operator.
#[derive(Debug, Clone)]
pub struct HillSpectrum {
    pub periodic: Vec<f64>,
    pub antiperiodic: Vec<f64>,
}

impl HillSpectrum {
    /// Edges `(lambda_{2j-1}, lambda_{2j})` of gap `j >= 1`.
    pub fn gap(&self, j: usize) -> (f64, f64) {
        let block = if j % 2 == 1 {
            &self.antiperiodic
        } else {
            &self.periodic
        };
        (block[j - 1], block[j])
    }

    pub fn gap_length(&self, j: usize) -> f64 {
        let (lo, hi) = self.gap(j);
        (hi - lo).max(0.0)
    }

    /// Verifies that the gap edges read from each block are the `2j-1`, `2j`
    /// entries of the merged spectrum, i.e. no band from the other block has
    /// crossed into a gap.
    fn check_ordering(&self, n_gaps: usize) -> Result<()> {
        let mut merged: Vec<(f64, bool)> = self
            .periodic
            .iter()
            .map(|&x| (x, true))
            .chain(self.antiperiodic.iter().map(|&x| (x, false)))
            .collect();
        merged.sort_by(|a, b| a.0.total_cmp(&b.0));
        if !merged[0].1 {
            return Err(Error::SpectralResolution(
                "ground state is not periodic".into(),
            ));
        }
        for j in 1..=n_gaps {
            let periodic = j % 2 == 0;
            let (lo, hi) = (merged[2 * j - 1], merged[2 * j]);
            if lo.1 != periodic || hi.1 != periodic {
                return Err(Error::SpectralResolution(format!(
                    "edges of gap {j} interleave with the other boundary condition"
                )));
            }
        }
        Ok(())
    }
}

impl BirkhoffBackend for HillBackend {
    fn name(&self) -> &'static str {
        "hill"
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities::default()
    }

    fn n_pairs(&self) -> usize {
        self.n_gaps
    }

    fn actions(&self, u: &FourierField) -> Result<ActionVector> {
        let spec = self.spectrum(u)?;
        Ok(ActionVector(
            (1..=self.n_gaps)
                .map(|j| PI * spec.gap_length(j).powi(2) / (2.0 * j as f64))
                .collect(),
        ))
    }
}
