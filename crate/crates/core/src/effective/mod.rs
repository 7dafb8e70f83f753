//! The effective equation in Birkhoff coordinates,
//!
//! ```text
//! dv = <P>(v) dtau + sum_{l,q} column_{l,q}(v) dbeta_{l,q}(tau),
//! ```
//!
//! with drift and noise columns from [`crate::averaging`]. The drift is split as
//! `<P>(v) = -k^2 v + R0(v)`: the diagonal heat part is integrated by an exact
//! exponential factor, `R0` and the noise explicitly.

mod fast;

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use fast::FastSystem;

use crate::averaging::{build_perturbation_fields, effective_coefficients, effective_drift, Perturbation, TorusQuadrature};
use crate::birkhoff::{actions, angles, BirkhoffBackend, BirkhoffVector};
use crate::dynamics::{sde_step, NoiseSpec, PairLinear};
use crate::error::{Error, Result};
use crate::rng;
use crate::trajectory::{Snapshot, TrajectoryRecord};

/// Anything integrated by [`integrate`]: an exactly solvable per-pair linear
/// part plus explicit drift and noise columns.
pub trait SlowSystem: Sync {
    fn n_pairs(&self) -> usize;
    fn linear(&self) -> &PairLinear;
    /// Explicit drift and dispersion columns at `v`.
    fn coefficients(&self, v: &BirkhoffVector, noise: bool) -> Result<(Vec<f64>, DMatrix<f64>)>;
    fn tag(&self) -> &'static str;
}

pub struct EffectiveSystem {
    fields: Perturbation,
    quad: TorusQuadrature,
    stiff: PairLinear,
}

/// Builds the effective system; the backend needs forward, inverse and a
/// Jacobian (a missing Hessian falls back to finite differences).
pub fn assemble(backend: Arc<dyn BirkhoffBackend>, noise: &NoiseSpec, quad: TorusQuadrature) -> Result<EffectiveSystem> {
    if !backend.capabilities().full() {
        return Err(Error::Config(format!(
            "backend '{}' cannot drive the effective equation: forward, inverse and jacobian are required",
            backend.name()
        )));
    }
    if quad.dims() > backend.n_pairs() {
        return Err(Error::Dimension {
            expected: backend.n_pairs(),
            found: quad.dims(),
        });
    }
    let n = backend.n_pairs();
    Ok(EffectiveSystem {
        fields: build_perturbation_fields(backend, noise)?,
        quad,
        stiff: PairLinear::heat(n),
    })
}

impl EffectiveSystem {
    pub fn fields(&self) -> &Perturbation {
        &self.fields
    }

    pub fn quadrature(&self) -> &TorusQuadrature {
        &self.quad
    }

    /// Per-pair stiff rates, `-k^2`.
    pub fn stiff_diag(&self) -> &[f64] {
        &self.stiff.rates
    }

    /// `<P^1 + P^2>(v)`.
    pub fn drift(&self, v: &BirkhoffVector) -> Result<Vec<f64>> {
        effective_drift(&self.fields, v, &self.quad)
    }

    fn remove_stiff(&self, v: &BirkhoffVector, drift: &mut [f64]) {
        for (i, (d, x)) in drift.iter_mut().zip(v.as_slice()).enumerate() {
            *d -= self.stiff.rates[i / 2] * x;
        }
    }

    /// `R0(v) = <P>(v) + k^2 v`.
    pub fn drift_residual(&self, v: &BirkhoffVector) -> Result<Vec<f64>> {
        let mut d = self.drift(v)?;
        self.remove_stiff(v, &mut d);
        Ok(d)
    }

    /// `max_i |<P>(v)_i - (stiff v + R0(v))_i|`.
    pub fn split_defect(&self, v: &BirkhoffVector) -> Result<f64> {
        let full = self.drift(v)?;
        let r0 = self.drift_residual(v)?;
        Ok(full
            .iter()
            .zip(&r0)
            .zip(v.as_slice())
            .enumerate()
            .map(|(i, ((f, r), x))| (f - (self.stiff.rates[i / 2] * x + r)).abs())
            .fold(0.0, f64::max))
    }

    pub fn noise_columns(&self, v: &BirkhoffVector) -> Result<DMatrix<f64>> {
        crate::averaging::dispersion_columns(&self.fields, v, &self.quad)
    }
}

impl SlowSystem for EffectiveSystem {
    fn n_pairs(&self) -> usize {
        self.fields.n_pairs()
    }

    fn linear(&self) -> &PairLinear {
        &self.stiff
    }

    fn coefficients(&self, v: &BirkhoffVector, noise: bool) -> Result<(Vec<f64>, DMatrix<f64>)> {
        if noise {
            let (mut drift, cols) = effective_coefficients(&self.fields, v, &self.quad)?;
            self.remove_stiff(v, &mut drift);
            Ok((drift, cols))
        } else {
            Ok((self.drift_residual(v)?, DMatrix::zeros(v.as_slice().len(), 0)))
        }
    }

    fn tag(&self) -> &'static str {
        "effective"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConfig {
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub seed: u64,
    /// Slow times to record, strictly increasing within `[0, horizon]`.
    pub record: Vec<f64>,
    #[serde(default = "yes")]
    pub noise: bool,
    #[serde(default)]
    pub store_state: bool,
}

fn default_dt() -> f64 {
    1e-3
}

fn yes() -> bool {
    true
}

impl IntegrationConfig {
    pub fn new(horizon: f64, seed: u64, record: Vec<f64>) -> Self {
        Self {
            horizon,
            dt: default_dt(),
            seed,
            record,
            noise: true,
            store_state: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.dt > 0.0) {
            return Err(Error::Config("horizon and dt must be positive".into()));
        }
        let in_range = self.record.iter().all(|&t| (0.0..=self.horizon * (1.0 + 1e-12)).contains(&t));
        let increasing = self.record.windows(2).all(|w| w[1] > w[0]);
        if self.record.is_empty() || !in_range || !increasing {
            return Err(Error::Config("record grid must be non-empty, strictly increasing, within [0, T]".into()));
        }
        Ok(())
    }
}

fn snapshot(tau: f64, v: &BirkhoffVector, store: bool) -> Snapshot {
    Snapshot {
        tau,
        actions: actions(v).0,
        angles: angles(v).0,
        field: None,
        state: store.then(|| v.as_slice().to_vec()),
        sobolev_sq: None,
    }
}

/// One path. Noise for path `p` comes from stream `(seed, p)`, one normal per
/// noise column per step, so two systems with the same column count driven
/// with the same `(seed, path)` share their noise realization.
pub fn integrate_path<S: SlowSystem + ?Sized>(
    sys: &S,
    v0: &BirkhoffVector,
    cfg: &IntegrationConfig,
    path: usize,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    if v0.n_pairs() != sys.n_pairs() {
        return Err(Error::Dimension {
            expected: sys.n_pairs(),
            found: v0.n_pairs(),
        });
    }
    if v0.as_slice().iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("non-finite initial state".into()));
    }
    let mut rng = rng::stream(cfg.seed, path as u64, 0);
    let mut v = v0.clone();
    let mut tau = 0.0;
    let mut out = TrajectoryRecord {
        path,
        system: Some(sys.tag()),
        snapshots: Vec::with_capacity(cfg.record.len()),
    };
    for &target in &cfg.record {
        while target - tau > cfg.dt * 1e-9 {
            let h = (target - tau).min(cfg.dt);
            let (drift, cols) = sys.coefficients(&v, cfg.noise).map_err(|e| tag(e, path, tau, &v))?;
            let next = sde_step(v.as_slice(), |_| Ok(drift), |_| Ok(cols), Some(sys.linear()), h, &mut rng)
                .map_err(|e| tag(e, path, tau, &v))?;
            v = BirkhoffVector::from_vec(next)?;
            tau += h;
        }
        tau = target;
        out.snapshots.push(snapshot(target, &v, cfg.store_state));
    }
    Ok(out)
}

fn tag(e: Error, path: usize, tau: f64, v: &BirkhoffVector) -> Error {
    match e {
        Error::NonFinite { .. } => Error::NonFinite {
            path,
            tau,
            last_good: v.as_slice().to_vec(),
        },
        other => other,
    }
}

/// Path 0.
pub fn integrate<S: SlowSystem + ?Sized>(sys: &S, v0: &BirkhoffVector, cfg: &IntegrationConfig) -> Result<TrajectoryRecord> {
    integrate_path(sys, v0, cfg, 0)
}

/// Independent paths `0..n_paths`, in path order regardless of worker count.
pub fn ensemble<S: SlowSystem + ?Sized>(
    sys: &S,
    v0: &BirkhoffVector,
    cfg: &IntegrationConfig,
    n_paths: usize,
) -> Result<Vec<TrajectoryRecord>> {
    if n_paths == 0 {
        return Err(Error::Config("n_paths must be at least 1".into()));
    }
    (0..n_paths).into_par_iter().map(|p| integrate_path(sys, v0, cfg, p)).collect()
}

/// `E |w(tau)|_0^2` for `w = v^a - v^b` driven by shared noise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractionCurve {
    pub taus: Vec<f64>,
    pub mean_sq: Vec<f64>,
    /// Smallest `C` with `E|w(tau)|^2 <= E|w(0)|^2 exp(C tau)` on the grid;
    /// `None` when `w(0) = 0`.
    pub gronwall_rate: Option<f64>,
}

pub fn contraction_test<S: SlowSystem + ?Sized>(
    sys: &S,
    v0a: &BirkhoffVector,
    v0b: &BirkhoffVector,
    cfg: &IntegrationConfig,
    n_paths: usize,
) -> Result<ContractionCurve> {
    let mut cfg = cfg.clone();
    cfg.store_state = true;
    let a = ensemble(sys, v0a, &cfg, n_paths)?;
    let b = ensemble(sys, v0b, &cfg, n_paths)?;
    let taus = cfg.record.clone();
    let mean_sq: Vec<f64> = (0..taus.len())
        .map(|i| {
            let per_path: Vec<f64> = a
                .iter()
                .zip(&b)
                .map(|(ra, rb)| {
                    let (x, y) = (ra.snapshots[i].state.as_ref().unwrap(), rb.snapshots[i].state.as_ref().unwrap());
                    x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>()
                })
                .collect();
            crate::averaging::pairwise_sum(&per_path) / n_paths as f64
        })
        .collect();
    let w0: f64 = v0a.as_slice().iter().zip(v0b.as_slice()).map(|(p, q)| (p - q).powi(2)).sum();
    let gronwall_rate = (w0 > 0.0).then(|| {
        taus.iter()
            .zip(&mean_sq)
            .filter(|(t, _)| **t > 0.0)
            .map(|(t, m)| (m / w0).ln() / t)
            .fold(f64::NEG_INFINITY, f64::max)
    });
    Ok(ContractionCurve {
        taus,
        mean_sq,
        gronwall_rate,
    })
}
