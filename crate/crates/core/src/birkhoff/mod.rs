//! Birkhoff (action-angle) coordinates and pluggable realizations of the
//! nonlinear Fourier transform.
//!
//! A [`BirkhoffVector`] holds pairs `b_j = (v_j, v_-j)`, `j = 1..=N`, interleaved
//! like field coefficients. Actions are `I_j = |b_j|^2 / 2`, angles are
//! `phi_j = atan2(v_-j, v_j)` in `[0, 2 pi)` with `phi_j = 0` when `b_j = 0`.
//! [`rotate`] turns every pair counter-clockwise, so angles add under rotation.

mod hill;
mod linear;
mod numeric;
mod synthetic;

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FourierField;

pub use hill::{HillBackend, HillSpectrum};
pub use linear::LinearBackend;
pub use numeric::{numeric_hessian_diag, numeric_jacobian, FiniteDifference};
pub use synthetic::{SyntheticBackend, SyntheticMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffVector(Vec<f64>);

impl BirkhoffVector {
    pub fn zeros(n_pairs: usize) -> Self {
        Self(vec![0.0; 2 * n_pairs])
    }

    pub fn from_vec(v: Vec<f64>) -> Result<Self> {
        if v.len() % 2 != 0 {
            return Err(Error::Dimension {
                expected: v.len() + 1,
                found: v.len(),
            });
        }
        Ok(Self(v))
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        Self(pairs.iter().flat_map(|&(a, b)| [a, b]).collect())
    }

    pub fn n_pairs(&self) -> usize {
        self.0.len() / 2
    }

    /// Pair `b_j` for `j` starting at 1.
    pub fn pair(&self, j: usize) -> (f64, f64) {
        (self.0[2 * (j - 1)], self.0[2 * (j - 1) + 1])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// `|v|_r^2 = sum_j j^{1+2r} |b_j|^2`.
    pub fn weighted_norm_sq(&self, r: f64) -> f64 {
        self.0
            .chunks_exact(2)
            .enumerate()
            .map(|(i, b)| ((i + 1) as f64).powf(1.0 + 2.0 * r) * (b[0] * b[0] + b[1] * b[1]))
            .sum()
    }

    /// Plain Euclidean norm squared (the `|.|_0` of the uniqueness argument,
    /// without weights).
    pub fn euclid_sq(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionVector(pub Vec<f64>);

impl ActionVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `|I|_{h^p_I} = 2 sum_j j^{1+2p} |I_j|`.
    pub fn h_norm(&self, p: f64) -> f64 {
        2.0 * self
            .0
            .iter()
            .enumerate()
            .map(|(i, x)| ((i + 1) as f64).powf(1.0 + 2.0 * p) * x.abs())
            .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleVector(pub Vec<f64>);

impl AngleVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Reduces an angle into `[0, 2 pi)`.
pub fn wrap_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

pub fn actions(v: &BirkhoffVector) -> ActionVector {
    ActionVector(
        v.0.chunks_exact(2)
            .map(|b| 0.5 * (b[0] * b[0] + b[1] * b[1]))
            .collect(),
    )
}

pub fn angles(v: &BirkhoffVector) -> AngleVector {
    AngleVector(
        v.0.chunks_exact(2)
            .map(|b| {
                if b[0] == 0.0 && b[1] == 0.0 {
                    0.0
                } else {
                    wrap_angle(b[1].atan2(b[0]))
                }
            })
            .collect(),
    )
}

/// `Phi_theta`: rotates pair `j` by `theta_j`.
pub fn rotate(v: &BirkhoffVector, theta: &[f64]) -> Result<BirkhoffVector> {
    if theta.len() != v.n_pairs() {
        return Err(Error::Dimension {
            expected: v.n_pairs(),
            found: theta.len(),
        });
    }
    let mut out = v.clone();
    rotate_in_place(out.as_mut_slice(), theta);
    Ok(out)
}

/// Rotates the leading `theta.len()` pairs of an interleaved slice.
pub fn rotate_in_place(v: &mut [f64], theta: &[f64]) {
    for (b, &t) in v.chunks_exact_mut(2).zip(theta) {
        let (s, c) = t.sin_cos();
        let (x, y) = (b[0], b[1]);
        b[0] = c * x - s * y;
        b[1] = s * x + c * y;
    }
}

/// `V_theta(I)`: pair `j` is `sqrt(2 I_j) (cos theta_j, sin theta_j)`.
pub fn reconstruct(actions: &ActionVector, theta: &AngleVector) -> Result<BirkhoffVector> {
    if actions.len() != theta.len() {
        return Err(Error::Dimension {
            expected: actions.len(),
            found: theta.len(),
        });
    }
    let mut v = Vec::with_capacity(2 * actions.len());
    for (j, (&i, &t)) in actions.0.iter().zip(&theta.0).enumerate() {
        if !(i >= 0.0) {
            return Err(Error::Domain(format!("negative action I_{} = {i}", j + 1)));
        }
        let r = (2.0 * i).sqrt();
        let (s, c) = t.sin_cos();
        v.push(r * c);
        v.push(r * s);
    }
    Ok(BirkhoffVector(v))
}

/// Which optional members a backend implements.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub forward: bool,
    pub inverse: bool,
    pub jacobian: bool,
    pub hessian: bool,
    pub frequencies: bool,
    pub angles: bool,
}

impl Capabilities {
    /// Everything the effective-equation pipeline needs (Hessian may come from
    /// finite differences).
    pub fn full(&self) -> bool {
        self.forward && self.inverse && self.jacobian
    }
}

/// A realization of the nonlinear Fourier transform restricted to `N` pairs.
///
/// Field coordinates are the interleaved coefficient vector of a
/// [`FourierField`]; the Jacobian is the `2N x 2S` matrix of `dPsi(u)` in those
/// coordinates and `hessian_diag(u, c)` is `d^2 Psi(u)(e_c, e_c)`.
pub trait BirkhoffBackend: Send + Sync {
    fn name(&self) -> &'static str;

    fn capabilities(&self) -> Capabilities;

    fn n_pairs(&self) -> usize;

    fn forward(&self, _u: &FourierField) -> Result<BirkhoffVector> {
        Err(self.missing("forward"))
    }

    fn actions(&self, u: &FourierField) -> Result<ActionVector> {
        Ok(actions(&self.forward(u)?))
    }

    fn angles(&self, u: &FourierField) -> Result<AngleVector> {
        if !self.capabilities().angles {
            return Err(self.missing("angles"));
        }
        Ok(angles(&self.forward(u)?))
    }

    /// `Psi^{-1}`; the returned field is truncated at `S = N`.
    fn inverse(&self, _v: &BirkhoffVector) -> Result<FourierField> {
        Err(self.missing("inverse"))
    }

    fn jacobian(&self, _u: &FourierField) -> Result<DMatrix<f64>> {
        Err(self.missing("jacobian"))
    }

    fn hessian_diag(&self, _u: &FourierField, _coord: usize) -> Result<Vec<f64>> {
        Err(self.missing("hessian"))
    }

    fn frequencies(&self, _actions: &ActionVector) -> Result<Vec<f64>> {
        Err(self.missing("frequencies"))
    }

    fn missing(&self, capability: &'static str) -> Error {
        Error::MissingCapability {
            backend: self.name().to_string(),
            capability,
        }
    }
}

/// Backend selection as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum BackendSpec {
    Linear,
    Hill {
        n_gaps: usize,
        #[serde(default = "default_hill_resolution")]
        resolution: usize,
    },
    Synthetic {
        eps_map: f64,
        #[serde(default = "default_synthetic_radius")]
        radius: f64,
    },
}

fn default_hill_resolution() -> usize {
    4
}

fn default_synthetic_radius() -> f64 {
    10.0
}

impl BackendSpec {
    pub fn build(&self, n_pairs: usize) -> Result<Box<dyn BirkhoffBackend>> {
        Ok(match *self {
            BackendSpec::Linear => Box::new(LinearBackend::new(n_pairs)),
            BackendSpec::Hill { n_gaps, resolution } => {
                Box::new(HillBackend::new(n_gaps, resolution)?)
            }
            BackendSpec::Synthetic { eps_map, radius } => {
                Box::new(SyntheticBackend::new(SyntheticMap::new(n_pairs, eps_map, radius)?))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn action_examples() {
        let v = BirkhoffVector::from_pairs(&[(2f64.sqrt(), 0.0)]);
        assert!((actions(&v).0[0] - 1.0).abs() < 1e-15);
        assert_eq!(actions(&BirkhoffVector::zeros(3)).0, vec![0.0; 3]);
        let v = BirkhoffVector::from_pairs(&[(3.0, 4.0)]);
        assert_eq!(actions(&v).0[0], 12.5);
    }

    #[test]
    fn angle_examples() {
        let a = angles(&BirkhoffVector::from_pairs(&[(1.0, 0.0), (0.0, 2.0), (0.0, 0.0)]));
        assert_eq!(a.0[0], 0.0);
        assert!((a.0[1] - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(a.0[2], 0.0);
        let a = angles(&BirkhoffVector::from_pairs(&[(0.0, -1.0)]));
        assert!((a.0[0] - 1.5 * PI).abs() < 1e-15);
    }

    #[test]
    fn rotate_quarter_turn() {
        let v = BirkhoffVector::from_pairs(&[(1.0, 0.0)]);
        let r = rotate(&v, &[FRAC_PI_2]).unwrap();
        assert!(r.as_slice()[0].abs() < 1e-16);
        assert!((r.as_slice()[1] - 1.0).abs() < 1e-16);
        assert_eq!(rotate(&v, &[0.0]).unwrap(), v);
        assert!(rotate(&v, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn reconstruct_examples() {
        let v = reconstruct(&ActionVector(vec![1.0]), &AngleVector(vec![0.0])).unwrap();
        assert_eq!(v.pair(1), (2f64.sqrt(), 0.0));
        let v = reconstruct(&ActionVector(vec![0.0; 2]), &AngleVector(vec![0.3, 2.0])).unwrap();
        assert!(v.as_slice().iter().all(|x| x.abs() == 0.0));
        assert!(matches!(
            reconstruct(&ActionVector(vec![-1e-3]), &AngleVector(vec![0.0])),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn norms() {
        let v = BirkhoffVector::from_pairs(&[(1.0, 0.0), (0.0, 1.0)]);
        assert_eq!(v.weighted_norm_sq(0.0), 1.0 + 2.0);
        assert_eq!(v.weighted_norm_sq(1.0), 1.0 + 8.0);
        let i = ActionVector(vec![0.5, 0.25]);
        assert_eq!(i.h_norm(0.0), 2.0 * (0.5 + 2.0 * 0.25));
    }

    fn pairs(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-5.0f64..5.0, 2 * n)
    }

    proptest! {
        #[test]
        fn rotation_preserves_actions(v in pairs(4), theta in proptest::collection::vec(-10.0f64..10.0, 4)) {
            let v = BirkhoffVector::from_vec(v).unwrap();
            let i0 = actions(&v);
            let i1 = actions(&rotate(&v, &theta).unwrap());
            for (a, b) in i0.0.iter().zip(&i1.0) {
                prop_assert!((a - b).abs() <= 1e-14 * a.max(1e-300) + 1e-300);
            }
        }

        #[test]
        fn rotation_adds_angles(v in pairs(3), theta in proptest::collection::vec(-10.0f64..10.0, 3)) {
            let v = BirkhoffVector::from_vec(v).unwrap();
            let a0 = angles(&v);
            let a1 = angles(&rotate(&v, &theta).unwrap());
            for j in 0..3 {
                let (x, y) = v.pair(j + 1);
                prop_assume!(x.hypot(y) > 1e-6);
                let d = wrap_angle(a1.0[j] - a0.0[j] - theta[j]);
                prop_assert!(d.min(TAU - d) < 1e-10);
            }
        }

        #[test]
        fn rotation_group_law(v in pairs(3), a in proptest::collection::vec(-7.0f64..7.0, 3), b in proptest::collection::vec(-7.0f64..7.0, 3)) {
            let v = BirkhoffVector::from_vec(v).unwrap();
            let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let lhs = rotate(&rotate(&v, &a).unwrap(), &b).unwrap();
            let rhs = rotate(&v, &ab).unwrap();
            for (x, y) in lhs.as_slice().iter().zip(rhs.as_slice()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn reconstruct_round_trip(v in pairs(5)) {
            let v = BirkhoffVector::from_vec(v).unwrap();
            for j in 1..=5 { let (x, y) = v.pair(j); prop_assume!(x.hypot(y) > 1e-8); }
            let back = reconstruct(&actions(&v), &angles(&v)).unwrap();
            for (x, y) in back.as_slice().iter().zip(v.as_slice()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn reconstruct_hits_actions(i in proptest::collection::vec(0.0f64..4.0, 4), t in proptest::collection::vec(0.0f64..TAU, 4)) {
            let v = reconstruct(&ActionVector(i.clone()), &AngleVector(t)).unwrap();
            for (a, b) in actions(&v).0.iter().zip(&i) {
                prop_assert!((a - b).abs() <= 4.0 * f64::EPSILON * b.max(1e-300));
            }
        }
    }
}
