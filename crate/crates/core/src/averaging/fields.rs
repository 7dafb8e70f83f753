use std::sync::Arc;

use nalgebra::DMatrix;

use crate::birkhoff::{numeric_hessian_diag, numeric_jacobian, FiniteDifference};
use crate::birkhoff::{BirkhoffBackend, BirkhoffVector};
use crate::dynamics::NoiseSpec;
use crate::error::{Error, Result};
use crate::field::FourierField;

/// `v -> P(v)` on `R^{2N}`.
pub trait DriftField: Send + Sync {
    fn eval(&self, v: &BirkhoffVector) -> Result<Vec<f64>>;
}

/// `v -> B(v)`, a `2N x (noise dim)` matrix of `2 x 2` blocks `B_kj`.
pub trait DispersionField: Send + Sync {
    fn eval(&self, v: &BirkhoffVector) -> Result<DMatrix<f64>>;
}

impl<F> DriftField for F
where
    F: Fn(&BirkhoffVector) -> Result<Vec<f64>> + Send + Sync,
{
    fn eval(&self, v: &BirkhoffVector) -> Result<Vec<f64>> {
        self(v)
    }
}

/// Wraps a closure as a [`DispersionField`] (a separate wrapper keeps the two
/// blanket impls apart).
pub struct FnDispersion<F>(pub F);

impl<F> DispersionField for FnDispersion<F>
where
    F: Fn(&BirkhoffVector) -> Result<DMatrix<f64>> + Send + Sync,
{
    fn eval(&self, v: &BirkhoffVector) -> Result<DMatrix<f64>> {
        (self.0)(v)
    }
}

/// Which part of the drift to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftTerm {
    /// `P^1 = dPsi(u) u_xx`.
    Heat,
    /// `P^2_k = 1/2 sum_j b_j^2 [d^2 Psi_k(u)(e_j, e_j) + d^2 Psi_k(u)(e_-j, e_-j)]`.
    Ito,
    Total,
}

/// Everything the perturbation contributes at one point.
#[derive(Debug, Clone)]
pub struct PointData {
    pub heat: Vec<f64>,
    pub ito: Vec<f64>,
    /// `B_kj = b_j dPsi(u)_kj`.
    pub dispersion: DMatrix<f64>,
}

impl PointData {
    pub fn drift(&self) -> Vec<f64> {
        self.heat.iter().zip(&self.ito).map(|(a, b)| a + b).collect()
    }
}

/// The perturbation `u_xx dtau + sum b_s e_s dbeta_s` pushed through a
/// backend into Birkhoff coordinates, for `v` with `N` pairs and `u = Psi^{-1}(v)`
/// truncated at `S = N`.
///
/// Analytic Jacobian and Hessian are used when the backend has them,
/// central differences otherwise.
#[derive(Clone)]
pub struct Perturbation {
    backend: Arc<dyn BirkhoffBackend>,
    noise: NoiseSpec,
    fd: FiniteDifference,
}

pub fn build_perturbation_fields(backend: Arc<dyn BirkhoffBackend>, noise: &NoiseSpec) -> Result<Perturbation> {
    Perturbation::new(backend, noise, FiniteDifference::default())
}

impl Perturbation {
    pub fn new(backend: Arc<dyn BirkhoffBackend>, noise: &NoiseSpec, fd: FiniteDifference) -> Result<Self> {
        let caps = backend.capabilities();
        for (ok, name) in [(caps.forward, "forward"), (caps.inverse, "inverse")] {
            if !ok {
                return Err(Error::Config(format!(
                    "backend '{}' lacks {name}, which the perturbation fields need",
                    backend.name()
                )));
            }
        }
        let noise = noise.truncated(backend.n_pairs())?;
        Ok(Self { backend, noise, fd })
    }

    pub fn backend(&self) -> &Arc<dyn BirkhoffBackend> {
        &self.backend
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn n_pairs(&self) -> usize {
        self.backend.n_pairs()
    }

    pub fn noise_dim(&self) -> usize {
        2 * self.n_pairs()
    }

    fn field(&self, v: &BirkhoffVector) -> Result<FourierField> {
        Ok(self.backend.inverse(v)?.resized(self.n_pairs()))
    }

    fn jacobian(&self, u: &FourierField) -> Result<DMatrix<f64>> {
        if self.backend.capabilities().jacobian {
            self.backend.jacobian(u)
        } else {
            numeric_jacobian(self.backend.as_ref(), u, &self.fd)
        }
    }

    fn hessian(&self, u: &FourierField, coord: usize) -> Result<Vec<f64>> {
        if self.backend.capabilities().hessian {
            self.backend.hessian_diag(u, coord)
        } else {
            numeric_hessian_diag(self.backend.as_ref(), u, coord, &self.fd)
        }
    }

    fn ito_at(&self, u: &FourierField) -> Result<Vec<f64>> {
        let n = self.noise_dim();
        let mut out = vec![0.0; n];
        for coord in 0..n {
            let b = self.noise.coefficients()[coord / 2];
            for (o, h) in out.iter_mut().zip(self.hessian(u, coord)?) {
                *o += 0.5 * b * b * h;
            }
        }
        Ok(out)
    }

    pub fn evaluate(&self, v: &BirkhoffVector) -> Result<PointData> {
        let u = self.field(v)?;
        let jac = self.jacobian(&u)?;
        let uxx = nalgebra::DVector::from_column_slice(u.second_derivative().coeffs());
        let heat = (&jac * uxx).as_slice().to_vec();
        let ito = self.ito_at(&u)?;
        let mut dispersion = jac;
        for (c, mut col) in dispersion.column_iter_mut().enumerate() {
            col *= self.noise.coefficients()[c / 2];
        }
        Ok(PointData { heat, ito, dispersion })
    }

    pub fn drift_term(&self, v: &BirkhoffVector, term: DriftTerm) -> Result<Vec<f64>> {
        match term {
            DriftTerm::Heat => {
                let u = self.field(v)?;
                let jac = self.jacobian(&u)?;
                let uxx = nalgebra::DVector::from_column_slice(u.second_derivative().coeffs());
                Ok((&jac * uxx).as_slice().to_vec())
            }
            DriftTerm::Ito => self.ito_at(&self.field(v)?),
            DriftTerm::Total => Ok(self.evaluate(v)?.drift()),
        }
    }

    /// A [`DriftField`] view of one term.
    pub fn term(&self, term: DriftTerm) -> TermField<'_> {
        TermField { fields: self, term }
    }
}

impl DriftField for Perturbation {
    fn eval(&self, v: &BirkhoffVector) -> Result<Vec<f64>> {
        self.drift_term(v, DriftTerm::Total)
    }
}

impl DispersionField for Perturbation {
    fn eval(&self, v: &BirkhoffVector) -> Result<DMatrix<f64>> {
        Ok(self.evaluate(v)?.dispersion)
    }
}

pub struct TermField<'a> {
    fields: &'a Perturbation,
    term: DriftTerm,
}

impl DriftField for TermField<'_> {
    fn eval(&self, v: &BirkhoffVector) -> Result<Vec<f64>> {
        self.fields.drift_term(v, self.term)
    }
}
