//! Zero-mean real fields on the circle in the normalized trigonometric basis
//!
//! ```text
//! e_s(x) = cos(s x) / sqrt(pi)   s > 0
//! e_s(x) = sin(|s| x) / sqrt(pi) s < 0
//! ```
//!
//! Coefficients are stored interleaved as `[u_1, u_-1, u_2, u_-2, ..., u_S, u_-S]`,
//! the same ordering used for Birkhoff vectors, so linear maps between the two
//! spaces are plain `2N x 2S` matrices. There is no `s = 0` slot.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Position of mode `s` (non-zero) in the interleaved coefficient layout.
#[inline]
pub fn mode_index(s: i64) -> usize {
    debug_assert!(s != 0);
    2 * (s.unsigned_abs() as usize - 1) + usize::from(s < 0)
}

/// Inverse of [`mode_index`].
#[inline]
pub fn index_mode(i: usize) -> i64 {
    let s = (i / 2 + 1) as i64;
    if i % 2 == 0 {
        s
    } else {
        -s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FourierField {
    s_max: usize,
    coeffs: Vec<f64>,
}

impl FourierField {
    pub fn zeros(s_max: usize) -> Self {
        Self {
            s_max,
            coeffs: vec![0.0; 2 * s_max],
        }
    }

    /// Builds a field from interleaved coefficients; the length must be even.
    pub fn from_coeffs(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() % 2 != 0 || coeffs.is_empty() {
            return Err(Error::Dimension {
                expected: 2 * (coeffs.len() / 2).max(1),
                found: coeffs.len(),
            });
        }
        Ok(Self {
            s_max: coeffs.len() / 2,
            coeffs,
        })
    }

    /// Builds a field from `(s, u_s)` pairs. Unlisted modes are zero.
    pub fn from_modes(s_max: usize, modes: &[(i64, f64)]) -> Result<Self> {
        let mut f = Self::zeros(s_max);
        for &(s, value) in modes {
            if s == 0 {
                return Err(Error::Domain("mode s = 0 does not exist (zero mean)".into()));
            }
            if s.unsigned_abs() as usize > s_max {
                return Err(Error::Domain(format!("mode {s} exceeds truncation S = {s_max}")));
            }
            f.coeffs[mode_index(s)] = value;
        }
        Ok(f)
    }

    pub fn s_max(&self) -> usize {
        self.s_max
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Coefficient `u_s`; zero outside the truncation.
    pub fn get(&self, s: i64) -> f64 {
        if s == 0 || s.unsigned_abs() as usize > self.s_max {
            0.0
        } else {
            self.coeffs[mode_index(s)]
        }
    }

    pub fn set(&mut self, s: i64, value: f64) {
        self.coeffs[mode_index(s)] = value;
    }

    /// Copy with truncation order changed (zero-padded or cut).
    pub fn resized(&self, s_max: usize) -> Self {
        let mut out = Self::zeros(s_max);
        let n = 2 * s_max.min(self.s_max);
        out.coeffs[..n].copy_from_slice(&self.coeffs[..n]);
        out
    }

    /// Coefficient-space (equivalently `L^2(S^1)`) inner product.
    pub fn dot(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// `u_xx`: multiplies mode `s` by `-s^2`.
    pub fn second_derivative(&self) -> Self {
        let mut out = self.clone();
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            let s = (i / 2 + 1) as f64;
            *c *= -s * s;
        }
        out
    }

    /// `u_x`: cos(sx) -> -s sin(sx), sin(sx) -> s cos(sx).
    pub fn derivative(&self) -> Self {
        let mut out = Self::zeros(self.s_max);
        for k in 0..self.s_max {
            let s = (k + 1) as f64;
            let (a, b) = (self.coeffs[2 * k], self.coeffs[2 * k + 1]);
            out.coeffs[2 * k] = s * b;
            out.coeffs[2 * k + 1] = -s * a;
        }
        out
    }

    /// Values `sum_s u_s e_s(x_i)` at `x_i = 2 pi i / n_points`.
    pub fn to_grid(&self, n_points: usize) -> Result<Vec<f64>> {
        let required = 2 * self.s_max + 2;
        if n_points < required {
            return Err(Error::Truncation {
                n_points,
                s_max: self.s_max,
                required,
            });
        }
        with_transform(n_points, |t| Ok(t.synthesize(&self.coeffs)))
    }

    /// Projection of grid values onto modes `1..=s_max`. The grid mean is discarded.
    pub fn from_grid(values: &[f64], s_max: usize) -> Result<Self> {
        let n = values.len();
        let required = 2 * s_max + 2;
        if n < required {
            return Err(Error::Truncation {
                n_points: n,
                s_max,
                required,
            });
        }
        with_transform(n, |t| {
            let mut out = Self::zeros(s_max);
            t.analyze(values, &mut out.coeffs);
            Ok(out)
        })
    }

    /// `6 u u_x = 3 (u^2)_x`, projected on `|s| <= S`, computed with an alias-free grid.
    pub fn kdv_nonlinearity(&self) -> Self {
        let mut out = Self::zeros(self.s_max);
        with_nonlinearity(self.s_max, |nl| nl.apply(&self.coeffs, &mut out.coeffs));
        out
    }

    /// `||u||_m^2 = sum_s s^{2m} u_s^2`.
    pub fn sobolev_norm_sq(&self, m: u32) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| ((i / 2 + 1) as f64).powi(2 * m as i32) * c * c)
            .sum()
    }

    pub fn sobolev_norm(&self, m: u32) -> f64 {
        self.sobolev_norm_sq(m).sqrt()
    }
}

/// Planned forward/inverse FFTs for one grid size, mapping between the
/// normalized real basis and physical values.
pub struct GridTransform {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl GridTransform {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            n,
            forward,
            inverse,
            buf: vec![Complex64::default(); n],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    // c_s = (a_s - i b_s) / (2 sqrt(pi)), c_{-s} = conj(c_s)
    fn load(&mut self, coeffs: &[f64]) {
        let scale = 0.5 / PI.sqrt();
        self.buf.fill(Complex64::default());
        for k in 0..coeffs.len() / 2 {
            let c = Complex64::new(coeffs[2 * k], -coeffs[2 * k + 1]) * scale;
            self.buf[k + 1] = c;
            self.buf[self.n - k - 1] = c.conj();
        }
    }

    fn synthesize_into(&mut self, coeffs: &[f64], out: &mut [f64]) {
        self.load(coeffs);
        self.inverse
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        for (o, b) in out.iter_mut().zip(&self.buf) {
            *o = b.re;
        }
    }

    pub fn synthesize(&mut self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.synthesize_into(coeffs, &mut out);
        out
    }

    pub fn analyze(&mut self, values: &[f64], coeffs: &mut [f64]) {
        for (b, v) in self.buf.iter_mut().zip(values) {
            *b = Complex64::new(*v, 0.0);
        }
        self.forward
            .process_with_scratch(&mut self.buf, &mut self.scratch);
        let scale = 2.0 * PI.sqrt() / self.n as f64;
        for k in 0..coeffs.len() / 2 {
            let c = self.buf[k + 1] * scale;
            coeffs[2 * k] = c.re;
            coeffs[2 * k + 1] = -c.im;
        }
    }
}

/// Dealiased evaluation of `3 (u^2)_x` for a fixed truncation order.
///
/// The grid has more than `3S` points so the square of a degree-`S`
/// trigonometric polynomial is recovered exactly on `|s| <= S`.
pub struct Nonlinearity {
    s_max: usize,
    transform: GridTransform,
    grid: Vec<f64>,
    square: Vec<f64>,
}

impl Nonlinearity {
    pub fn new(s_max: usize) -> Self {
        let n = dealiased_grid_size(s_max);
        Self {
            s_max,
            transform: GridTransform::new(n),
            grid: vec![0.0; n],
            square: vec![0.0; 2 * s_max],
        }
    }

    pub fn s_max(&self) -> usize {
        self.s_max
    }

    pub fn apply(&mut self, coeffs: &[f64], out: &mut [f64]) {
        let mut grid = std::mem::take(&mut self.grid);
        self.transform.synthesize_into(coeffs, &mut grid);
        for g in grid.iter_mut() {
            *g *= *g;
        }
        self.transform.analyze(&grid, &mut self.square);
        self.grid = grid;
        for k in 0..self.s_max {
            let s = (k + 1) as f64;
            out[2 * k] = 3.0 * s * self.square[2 * k + 1];
            out[2 * k + 1] = -3.0 * s * self.square[2 * k];
        }
    }
}

/// Smallest power of two strictly above `3S`.
pub fn dealiased_grid_size(s_max: usize) -> usize {
    (3 * s_max + 1).next_power_of_two().max(4)
}

thread_local! {
    static TRANSFORMS: RefCell<HashMap<usize, GridTransform>> = RefCell::new(HashMap::new());
    static NONLINEAR: RefCell<HashMap<usize, Nonlinearity>> = RefCell::new(HashMap::new());
}

fn with_transform<T>(n: usize, f: impl FnOnce(&mut GridTransform) -> T) -> T {
    TRANSFORMS.with(|cell| {
        let mut map = cell.borrow_mut();
        f(map.entry(n).or_insert_with(|| GridTransform::new(n)))
    })
}

fn with_nonlinearity<T>(s_max: usize, f: impl FnOnce(&mut Nonlinearity) -> T) -> T {
    NONLINEAR.with(|cell| {
        let mut map = cell.borrow_mut();
        f(map
            .entry(s_max)
            .or_insert_with(|| Nonlinearity::new(s_max)))
    })
}

#[derive(Serialize, Deserialize)]
struct FieldJson {
    #[serde(rename = "S")]
    s_max: usize,
    coeffs: Vec<(i64, f64)>,
}

impl Serialize for FourierField {
    fn serialize<Ser: Serializer>(&self, serializer: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| (index_mode(i), c))
            .collect();
        FieldJson {
            s_max: self.s_max,
            coeffs,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for FourierField {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = FieldJson::deserialize(deserializer)?;
        FourierField::from_modes(raw.s_max, &raw.coeffs).map_err(serde::de::Error::custom)
    }
}
