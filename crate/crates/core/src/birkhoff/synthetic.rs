use nalgebra::DMatrix;

use super::{BirkhoffBackend, BirkhoffVector, Capabilities};
use crate::error::{Error, Result};
use crate::field::FourierField;

/// Near-identity polynomial diffeomorphism of `R^{2N}` with closed-form inverse
/// and derivatives.
///
/// In complex notation `z_k = w_k + i w_-k`:
///
/// ```text
/// z'_k = z_k (1 + eps |z_{k+1}|^2) + eps z_{k+1}^2    k < N
/// z'_N = z_N
/// ```
///
/// The map is triangular, so it is inverted by back-substitution from the last
/// pair. It is a bijection wherever `1 + eps |z_{k+1}|^2 > 0`, which holds on
/// the working ball `|w| <= radius` whenever `eps >= 0` or `|eps| radius^2 < 1`.
/// The `z_{k+1}^2` coupling is not rotation-equivariant, so torus averages of
/// quantities built from this map are non-trivial.
#[derive(Debug, Clone)]
pub struct SyntheticMap {
    n_pairs: usize,
    eps: f64,
    radius: f64,
}

impl SyntheticMap {
    pub fn new(n_pairs: usize, eps: f64, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !eps.is_finite() {
            return Err(Error::Config(format!(
                "synthetic map needs radius > 0 and finite eps (got {radius}, {eps})"
            )));
        }
        if eps < 0.0 && -eps * radius * radius >= 1.0 {
            return Err(Error::Config(format!(
                "eps_map = {eps} is not invertible on the ball of radius {radius}"
            )));
        }
        Ok(Self { n_pairs, eps, radius })
    }

    pub fn n_pairs(&self) -> usize {
        self.n_pairs
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    fn check_ball(&self, w: &[f64]) -> Result<()> {
        if w.len() != 2 * self.n_pairs {
            return Err(Error::Dimension {
                expected: 2 * self.n_pairs,
                found: w.len(),
            });
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm <= self.radius) {
            return Err(Error::Domain(format!(
                "|w| = {norm:.4} outside the invertibility ball of radius {}",
                self.radius
            )));
        }
        Ok(())
    }

    pub fn apply(&self, w: &BirkhoffVector) -> Result<BirkhoffVector> {
        let w = w.as_slice();
        self.check_ball(w)?;
        let eps = self.eps;
        let mut out = w.to_vec();
        for k in 0..self.n_pairs.saturating_sub(1) {
            let (a, b) = (w[2 * k], w[2 * k + 1]);
            let (p, q) = (w[2 * k + 2], w[2 * k + 3]);
            let g = 1.0 + eps * (p * p + q * q);
            out[2 * k] = a * g + eps * (p * p - q * q);
            out[2 * k + 1] = b * g + eps * 2.0 * p * q;
        }
        BirkhoffVector::from_vec(out)
    }

    pub fn invert(&self, v: &BirkhoffVector) -> Result<BirkhoffVector> {
        let v = v.as_slice();
        if v.len() != 2 * self.n_pairs {
            return Err(Error::Dimension {
                expected: 2 * self.n_pairs,
                found: v.len(),
            });
        }
        let eps = self.eps;
        let mut w = v.to_vec();
        for k in (0..self.n_pairs.saturating_sub(1)).rev() {
            let (p, q) = (w[2 * k + 2], w[2 * k + 3]);
            let g = 1.0 + eps * (p * p + q * q);
            if !(g > 0.0) {
                return Err(Error::Domain(format!("map not invertible at pair {}", k + 1)));
            }
            w[2 * k] = (v[2 * k] - eps * (p * p - q * q)) / g;
            w[2 * k + 1] = (v[2 * k + 1] - eps * 2.0 * p * q) / g;
        }
        self.check_ball(&w)?;
        BirkhoffVector::from_vec(w)
    }

    /// `dF(w)`, a `2N x 2N` matrix.
    pub fn jacobian(&self, w: &BirkhoffVector) -> Result<DMatrix<f64>> {
        let w = w.as_slice();
        self.check_ball(w)?;
        let eps = self.eps;
        let n = 2 * self.n_pairs;
        let mut j = DMatrix::identity(n, n);
        for k in 0..self.n_pairs.saturating_sub(1) {
            let (a, b) = (w[2 * k], w[2 * k + 1]);
            let (p, q) = (w[2 * k + 2], w[2 * k + 3]);
            let g = 1.0 + eps * (p * p + q * q);
            let (x, y) = (2 * k, 2 * k + 1);
            j[(x, x)] = g;
            j[(y, y)] = g;
            j[(x, x + 2)] = 2.0 * eps * p * (a + 1.0);
            j[(x, x + 3)] = 2.0 * eps * q * (a - 1.0);
            j[(y, x + 2)] = 2.0 * eps * (p * b + q);
            j[(y, x + 3)] = 2.0 * eps * (q * b + p);
        }
        Ok(j)
    }

    /// `d^2 F(w)(e_c, e_c)` for the coordinate direction `c`.
    pub fn second_diag(&self, w: &BirkhoffVector, coord: usize) -> Result<Vec<f64>> {
        let w = w.as_slice();
        self.check_ball(w)?;
        let eps = self.eps;
        let mut out = vec![0.0; 2 * self.n_pairs];
        let pair = coord / 2;
        if pair == 0 || pair >= self.n_pairs {
            return Ok(out);
        }
        let k = pair - 1;
        let (a, b) = (w[2 * k], w[2 * k + 1]);
        if coord % 2 == 0 {
            out[2 * k] = 2.0 * eps * (a + 1.0);
        } else {
            out[2 * k] = 2.0 * eps * (a - 1.0);
        }
        out[2 * k + 1] = 2.0 * eps * b;
        Ok(out)
    }
}

/// `Psi = F o dPsi(0)`: the linear scaling followed by a [`SyntheticMap`].
#[derive(Debug, Clone)]
pub struct SyntheticBackend {
    map: SyntheticMap,
}

impl SyntheticBackend {
    pub fn new(map: SyntheticMap) -> Self {
        Self { map }
    }

    pub fn map(&self) -> &SyntheticMap {
        &self.map
    }

    fn scaled(&self, u: &FourierField) -> Result<BirkhoffVector> {
        let n = self.map.n_pairs;
        if u.s_max() < n {
            return Err(Error::Dimension {
                expected: n,
                found: u.s_max(),
            });
        }
        BirkhoffVector::from_vec(
            u.coeffs()[..2 * n]
                .iter()
                .enumerate()
                .map(|(i, c)| c / ((i / 2 + 1) as f64).sqrt())
                .collect(),
        )
    }
}

impl BirkhoffBackend for SyntheticBackend {
    fn name(&self) -> &'static str {
        "synthetic"
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            forward: true,
            inverse: true,
            jacobian: true,
            hessian: true,
            frequencies: false,
            angles: true,
        }
    }

    fn n_pairs(&self) -> usize {
        self.map.n_pairs
    }

    fn forward(&self, u: &FourierField) -> Result<BirkhoffVector> {
        self.map.apply(&self.scaled(u)?)
    }

    fn inverse(&self, v: &BirkhoffVector) -> Result<FourierField> {
        let w = self.map.invert(v)?;
        FourierField::from_coeffs(
            w.as_slice()
                .iter()
                .enumerate()
                .map(|(i, c)| c * ((i / 2 + 1) as f64).sqrt())
                .collect(),
        )
    }

    fn jacobian(&self, u: &FourierField) -> Result<DMatrix<f64>> {
        let w = self.scaled(u)?;
        let inner = self.map.jacobian(&w)?;
        let n = 2 * self.map.n_pairs;
        let mut j = DMatrix::zeros(n, 2 * u.s_max());
        for c in 0..n {
            let scale = 1.0 / ((c / 2 + 1) as f64).sqrt();
            for r in 0..n {
                j[(r, c)] = inner[(r, c)] * scale;
            }
        }
        Ok(j)
    }

    fn hessian_diag(&self, u: &FourierField, coord: usize) -> Result<Vec<f64>> {
        let w = self.scaled(u)?;
        if coord >= 2 * self.map.n_pairs {
            return Ok(vec![0.0; 2 * self.map.n_pairs]);
        }
        let scale = 1.0 / (coord / 2 + 1) as f64;
        let mut h = self.map.second_diag(&w, coord)?;
        h.iter_mut().for_each(|x| *x *= scale);
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::birkhoff::numeric::{numeric_hessian_diag, numeric_jacobian, FiniteDifference};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_in_ball(rng: &mut impl Rng, n: usize, r: f64) -> BirkhoffVector {
        let v: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = r * rng.random_range(0.0..1.0f64) / norm;
        BirkhoffVector::from_vec(v.into_iter().map(|x| x * scale).collect()).unwrap()
    }

    #[test]
    fn zero_eps_is_identity() {
        let m = SyntheticMap::new(3, 0.0, 5.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = random_in_ball(&mut rng, 3, 4.0);
        assert_eq!(m.apply(&w).unwrap(), w);
    }

    #[test]
    fn inverse_round_trip_in_ball() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for eps in [0.3, -0.2] {
            let m = SyntheticMap::new(4, eps, 2.0).unwrap();
            for _ in 0..100 {
                let w = random_in_ball(&mut rng, 4, 2.0);
                let back = m.invert(&m.apply(&w).unwrap()).unwrap();
                for (a, b) in back.as_slice().iter().zip(w.as_slice()) {
                    assert!((a - b).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn outside_ball_is_domain_error() {
        let m = SyntheticMap::new(2, 0.1, 1.0).unwrap();
        let w = BirkhoffVector::from_pairs(&[(1.0, 0.0), (0.0, 1.0)]);
        assert!(matches!(m.apply(&w), Err(Error::Domain(_))));
        assert!(SyntheticMap::new(2, -0.5, 2.0).is_err());
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = SyntheticBackend::new(SyntheticMap::new(3, 0.25, 10.0).unwrap());
        let fd = FiniteDifference::default();
        for _ in 0..20 {
            let w = random_in_ball(&mut rng, 3, 2.0);
            let u = b.inverse(&w).unwrap().resized(4);
            let exact = b.jacobian(&u).unwrap();
            let approx = numeric_jacobian(&b, &u, &fd).unwrap();
            assert_eq!(exact.shape(), approx.shape());
            for (x, y) in exact.iter().zip(approx.iter()) {
                assert!((x - y).abs() < 1e-6, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn hessian_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = SyntheticBackend::new(SyntheticMap::new(3, 0.25, 10.0).unwrap());
        let fd = FiniteDifference::default();
        for _ in 0..10 {
            let u = b.inverse(&random_in_ball(&mut rng, 3, 2.0)).unwrap();
            for c in 0..6 {
                let exact = b.hessian_diag(&u, c).unwrap();
                let approx = numeric_hessian_diag(&b, &u, c, &fd).unwrap();
                for (x, y) in exact.iter().zip(&approx) {
                    assert!((x - y).abs() < 1e-6, "coord {c}: {x} vs {y}");
                }
            }
        }
    }
}
