//! Post-processing of ensembles: distances between action laws, the
//! convergence study, angle equidistribution and occupation times.

mod convergence;

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use convergence::{
    convergence_report, convergence_study, plot_scripts, ConvergenceEntry, ConvergenceReport, ConvergenceRun,
    ConvergenceSetup,
};

use crate::error::{Error, Result};
use crate::rng::splitmix64;
use crate::trajectory::TrajectoryRecord;

/// Action samples at one recorded time, one row per path.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalLaw {
    samples: Vec<Vec<f64>>,
}

impl EmpiricalLaw {
    pub fn new(samples: Vec<Vec<f64>>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("empirical law"));
        }
        let dim = samples[0].len();
        if samples.iter().any(|s| s.len() != dim || s.iter().any(|x| !x.is_finite())) {
            return Err(Error::Domain("empirical law samples must be finite and of equal length".into()));
        }
        Ok(Self { samples })
    }

    /// Actions of every record at snapshot `index`.
    pub fn from_records(records: &[TrajectoryRecord], index: usize) -> Result<Self> {
        Self::new(records.iter().map(|r| r.snapshots[index].actions.clone()).collect())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.samples[0].len()
    }

    /// `I_k` samples, `k` from 1.
    pub fn marginal(&self, k: usize) -> Result<Vec<f64>> {
        if k == 0 || k > self.dims() {
            return Err(Error::Dimension {
                expected: self.dims(),
                found: k,
            });
        }
        Ok(self.samples.iter().map(|s| s[k - 1]).collect())
    }

    /// First and second half of the samples (paths are exchangeable).
    pub fn halves(&self) -> Result<(Self, Self)> {
        let mid = self.len() / 2;
        Ok((Self::new(self.samples[..mid].to_vec())?, Self::new(self.samples[mid..].to_vec())?))
    }
}

/// 1-Wasserstein distance between two samples on the line, `int |F_a - F_b| dx`.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("sample"));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    if x.len() == y.len() {
        return Ok(x.iter().zip(&y).map(|(p, q)| (p - q).abs()).sum::<f64>() / x.len() as f64);
    }
    let (na, nb) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut prev = x[0].min(y[0]);
    let mut total = 0.0;
    while i < x.len() || j < y.len() {
        let next = match (x.get(i), y.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        total += (i as f64 / na - j as f64 / nb).abs() * (next - prev);
        while i < x.len() && x[i] <= next {
            i += 1;
        }
        while j < y.len() && y[j] <= next {
            j += 1;
        }
        prev = next;
    }
    Ok(total)
}

/// `W_1` between the `k`-th action marginals.
pub fn action_law_distance(a: &EmpiricalLaw, b: &EmpiricalLaw, k: usize) -> Result<f64> {
    wasserstein1(&a.marginal(k)?, &b.marginal(k)?)
}

/// Trapezoid weights `dtau_i` of a grid, so that `sum_i f_i dtau_i` integrates `f`.
pub fn trapezoid_weights(taus: &[f64]) -> Vec<f64> {
    let n = taus.len();
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let h = taus[i + 1] - taus[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    w
}

/// The uniform mollifier `f = 1 / (tau_last - tau_first)` on a grid.
pub fn uniform_mollifier(taus: &[f64]) -> Vec<f64> {
    let span = taus.last().copied().unwrap_or(0.0) - taus.first().copied().unwrap_or(0.0);
    vec![1.0 / span; taus.len()]
}

/// `sin^2` bump over the recorded span, normalized so that its trapezoid sum
/// is one. Its Fourier transform decays like `omega^-3`, so a rotation at rate
/// `omega` leaves an `O(omega^-3)` imprint on the pooled law instead of the
/// `O(omega^-1)` left by the uniform window.
pub fn smooth_mollifier(taus: &[f64]) -> Vec<f64> {
    let (a, b) = (taus.first().copied().unwrap_or(0.0), taus.last().copied().unwrap_or(0.0));
    let raw: Vec<f64> = taus.iter().map(|t| (std::f64::consts::PI * (t - a) / (b - a)).sin().powi(2)).collect();
    let total: f64 = trapezoid_weights(taus).iter().zip(&raw).map(|(w, f)| w * f).sum();
    raw.iter().map(|f| f / total).collect()
}

/// Circular Kolmogorov-Smirnov distance to the uniform law for weighted
/// angles. Samples are first rotated so that their circular mean sits at `pi`
/// (a vanishing resultant leaves them unrotated); the statistic is then the
/// ordinary KS distance on `[0, 2 pi)`.
pub fn circular_ks(angles: &[f64], weights: &[f64]) -> Result<f64> {
    if angles.len() != weights.len() {
        return Err(Error::Dimension {
            expected: angles.len(),
            found: weights.len(),
        });
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(Error::Domain("pooling weights must be non-negative with positive sum".into()));
    }
    let (s, c) = angles
        .iter()
        .zip(weights)
        .fold((0.0, 0.0), |(s, c), (a, w)| (s + w * a.sin(), c + w * a.cos()));
    let shift = if s.hypot(c) > 1e-12 * total { std::f64::consts::PI - s.atan2(c) } else { 0.0 };
    let mut pts: Vec<(f64, f64)> = angles
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(a, w)| ((a + shift).rem_euclid(TAU), w / total))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cdf = 0.0;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < pts.len() {
        let x = pts[i].0;
        let u = x / TAU;
        d = d.max((u - cdf).abs());
        while i < pts.len() && pts[i].0 == x {
            cdf += pts[i].1;
            i += 1;
        }
        d = d.max((cdf - u).abs());
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquidistributionResult {
    /// KS distance per mode.
    pub ks: Vec<f64>,
    /// Mean KS distance of i.i.d. uniform samples carrying the same weights.
    pub uniform_floor: f64,
    pub n_samples: usize,
}

/// Pools the angles of every path over the recorded grid with weights
/// `f(tau_i) dtau_i` and measures each mode's distance to the uniform law.
/// Requires `sum_i f_i dtau_i = 1` (trapezoid rule) within `1e-6`.
pub fn angle_equidistribution(
    records: &[TrajectoryRecord],
    f: &[f64],
    floor_replicates: usize,
    seed: u64,
) -> Result<EquidistributionResult> {
    let first = records.first().ok_or(Error::Empty("trajectory ensemble"))?;
    let taus = first.taus();
    if f.len() != taus.len() {
        return Err(Error::Dimension {
            expected: taus.len(),
            found: f.len(),
        });
    }
    let w: Vec<f64> = trapezoid_weights(&taus).iter().zip(f).map(|(d, f)| d * f).collect();
    let mass: f64 = w.iter().sum();
    if mass == 0.0 || w.iter().all(|x| *x == 0.0) {
        return Err(Error::Domain("mollifier puts no weight on the recorded grid".into()));
    }
    if (mass - 1.0).abs() > 1e-6 {
        return Err(Error::Domain(format!("mollifier integrates to {mass}, not 1")));
    }
    let n_modes = first.snapshots[0].angles.len();
    if n_modes == 0 {
        return Err(Error::Domain("trajectories carry no angles".into()));
    }
    let weights: Vec<f64> = records.iter().flat_map(|_| w.iter().copied()).collect();
    let ks = (0..n_modes)
        .map(|m| {
            let angles: Vec<f64> = records.iter().flat_map(|r| r.snapshots.iter().map(move |s| s.angles[m])).collect();
            circular_ks(&angles, &weights)
        })
        .collect::<Result<Vec<_>>>()?;
    let uniform_floor = uniform_ks_floor(&weights, floor_replicates, seed)?;
    Ok(EquidistributionResult {
        ks,
        uniform_floor,
        n_samples: weights.len(),
    })
}

/// Mean circular KS distance of i.i.d. uniform angles carrying `weights`.
pub fn uniform_ks_floor(weights: &[f64], replicates: usize, seed: u64) -> Result<f64> {
    if replicates == 0 {
        return Err(Error::Config("at least one floor replicate is needed".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x6b73));
    let mut total = 0.0;
    for _ in 0..replicates {
        let angles: Vec<f64> = weights.iter().map(|_| TAU * rng.random::<f64>()).collect();
        total += circular_ks(&angles, weights)?;
    }
    Ok(total / replicates as f64)
}

/// `E int_0^T 1{I_k(tau) <= delta} dtau`, trapezoid rule on the recorded grid.
pub fn occupation_below(records: &[TrajectoryRecord], delta: f64, k: usize) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("delta = {delta} must be positive")));
    }
    if records.is_empty() {
        return Err(Error::Empty("trajectory ensemble"));
    }
    let per_path: Vec<f64> = records
        .iter()
        .map(|r| {
            let w = trapezoid_weights(&r.taus());
            r.snapshots
                .iter()
                .zip(&w)
                .map(|(s, w)| if s.actions[k - 1] <= delta { *w } else { 0.0 })
                .sum()
        })
        .collect();
    Ok(crate::averaging::pairwise_sum(&per_path) / records.len() as f64)
}

/// Gnuplot data and script (`{stem}.dat`, `{stem}.gp`) for the pooled,
/// weighted angle histogram of `mode` (from 1), normalized as a density on
/// `[0, 2 pi)`.
pub fn angle_histogram(
    records: &[TrajectoryRecord],
    f: &[f64],
    mode: usize,
    bins: usize,
    stem: &str,
) -> Result<Vec<(String, String)>> {
    let first = records.first().ok_or(Error::Empty("trajectory ensemble"))?;
    let w: Vec<f64> = trapezoid_weights(&first.taus()).iter().zip(f).map(|(d, f)| d * f).collect();
    let mut hist = vec![0.0; bins.max(1)];
    let width = TAU / hist.len() as f64;
    let mut total = 0.0;
    for r in records {
        for (s, w) in r.snapshots.iter().zip(&w) {
            let a = s.angles.get(mode - 1).ok_or(Error::Domain("trajectories carry no angles".into()))?;
            let b = ((a.rem_euclid(TAU) / width) as usize).min(hist.len() - 1);
            hist[b] += w;
            total += w;
        }
    }
    let mut data = String::from("# angle density\n");
    for (i, h) in hist.iter().enumerate() {
        data.push_str(&format!("{:e} {:e}\n", (i as f64 + 0.5) * width, h / (total * width)));
    }
    let script = format!(
        "set xrange [0:2*pi]\nset xlabel 'phi_{mode}'\nset ylabel 'density'\nset style fill solid 0.5\n\
         plot '{stem}.dat' using 1:2 with boxes title 'pooled', 1/(2*pi) with lines title 'uniform'\n"
    );
    Ok(vec![(format!("{stem}.dat"), data), (format!("{stem}.gp"), script)])
}
