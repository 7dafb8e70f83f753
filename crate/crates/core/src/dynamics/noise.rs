use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Forcing coefficients `b_s = b_-s`, `s = 1..=S`.
///
/// Only `|s|` is stored, so evenness holds by construction. Non-zero entries and
/// the configured decay bounds `|b_s| <= C_m |s|^{-m}` are checked on
/// construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    b: Vec<f64>,
}

/// Shipped forcing profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "lowercase")]
pub enum NoiseProfile {
    /// `b_s = c exp(-gamma |s|)`
    Exp { c: f64, gamma: f64 },
    /// `b_s = c |s|^{-m}`
    Poly { c: f64, m: f64 },
    /// Explicit `b_1..b_S`.
    Table { b: Vec<f64> },
}

impl NoiseProfile {
    pub fn coefficients(&self, s_max: usize) -> Vec<f64> {
        match self {
            NoiseProfile::Exp { c, gamma } => (1..=s_max).map(|s| c * (-gamma * s as f64).exp()).collect(),
            NoiseProfile::Poly { c, m } => (1..=s_max).map(|s| c * (s as f64).powf(-m)).collect(),
            NoiseProfile::Table { b } => b.iter().copied().take(s_max).collect(),
        }
    }
}

impl NoiseSpec {
    pub fn new(b: Vec<f64>) -> Result<Self> {
        if b.is_empty() {
            return Err(Error::Config("noise needs at least one mode".into()));
        }
        if let Some((i, x)) = b.iter().enumerate().find(|(_, x)| !(x.is_finite() && **x != 0.0)) {
            return Err(Error::Config(format!("b_{} = {x} must be finite and non-zero", i + 1)));
        }
        Ok(Self { b })
    }

    /// Builds from a profile and enforces each `(m, C_m)` decay bound.
    pub fn from_profile(profile: &NoiseProfile, s_max: usize, decay: &[(u32, f64)]) -> Result<Self> {
        let b = profile.coefficients(s_max);
        if b.len() < s_max {
            return Err(Error::Config(format!(
                "noise table has {} entries, truncation needs {s_max}",
                b.len()
            )));
        }
        let spec = Self::new(b)?;
        spec.check_decay(decay)?;
        Ok(spec)
    }

    pub fn check_decay(&self, decay: &[(u32, f64)]) -> Result<()> {
        for &(m, cm) in decay {
            for (i, b) in self.b.iter().enumerate() {
                let s = (i + 1) as f64;
                if b.abs() > cm * s.powi(-(m as i32)) {
                    return Err(Error::Config(format!(
                        "|b_{}| = {:.3e} violates the decay bound C_{m} |s|^-{m} with C_{m} = {cm}",
                        i + 1,
                        b.abs()
                    )));
                }
            }
        }
        Ok(())
    }

    /// `b_s` for `s != 0`.
    pub fn b(&self, s: i64) -> f64 {
        self.b[s.unsigned_abs() as usize - 1]
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.b
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    pub fn max_sq(&self) -> f64 {
        self.b.iter().map(|x| x * x).fold(0.0, f64::max)
    }

    pub fn truncated(&self, s_max: usize) -> Result<Self> {
        if s_max > self.b.len() {
            return Err(Error::Dimension {
                expected: s_max,
                found: self.b.len(),
            });
        }
        Ok(Self {
            b: self.b[..s_max].to_vec(),
        })
    }
}
