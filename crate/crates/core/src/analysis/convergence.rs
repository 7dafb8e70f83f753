use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{action_law_distance, wasserstein1, EmpiricalLaw};
use crate::birkhoff::{actions, angles, reconstruct, AngleVector, BirkhoffBackend};
use crate::dynamics::{kdv_ensemble, NoiseSpec, SpdeConfig};
use crate::effective::{ensemble, EffectiveSystem, IntegrationConfig};
use crate::error::{Error, Result};
use crate::field::FourierField;
use crate::rng::splitmix64;
use crate::trajectory::TrajectoryRecord;

/// Inputs of a convergence study. The SPDE template's `nu` and `record` are
/// overwritten per arm; the effective configuration's `record` must match.
pub struct ConvergenceSetup<'a> {
    pub u0: &'a FourierField,
    pub noise: &'a NoiseSpec,
    pub backend: Arc<dyn BirkhoffBackend>,
    pub spde: SpdeConfig,
    pub effective: &'a EffectiveSystem,
    pub effective_cfg: IntegrationConfig,
    pub nus: Vec<f64>,
    pub n_paths: usize,
    /// Initial angles of the effective arm, `v(0) = V_theta(I(u0))`; `None`
    /// uses the angles of `Psi(u0)`.
    pub theta: Option<AngleVector>,
    pub bootstrap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceEntry {
    pub nu: f64,
    /// `distance[t][k]`: W1 between arm and reference laws of `I_{k+1}` at `taus[t]`.
    pub distance: Vec<Vec<f64>>,
    /// Bootstrap standard deviation of `distance`.
    pub error_bar: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub nus: Vec<f64>,
    pub taus: Vec<f64>,
    pub n_paths: usize,
    pub entries: Vec<ConvergenceEntry>,
    /// Same-law floor: W1 between the two halves of the reference ensemble.
    pub floor: Vec<Vec<f64>>,
    /// `monotone[t][k]`: distance strictly decreases along the (decreasing) `nus`.
    pub monotone: Vec<Vec<bool>>,
    /// `within_floor[t][k]`: smallest-`nu` distance at most twice the floor.
    pub within_floor: Vec<Vec<bool>>,
}

pub struct ConvergenceRun {
    pub report: ConvergenceReport,
    pub arms: Vec<Vec<TrajectoryRecord>>,
    pub reference: Vec<TrajectoryRecord>,
}

fn bootstrap_sd(a: &[f64], b: &[f64], reps: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    if reps < 2 {
        return Ok(0.0);
    }
    let mut values = Vec::with_capacity(reps);
    for _ in 0..reps {
        let ra: Vec<f64> = (0..a.len()).map(|_| a[rng.random_range(0..a.len())]).collect();
        let rb: Vec<f64> = (0..b.len()).map(|_| b[rng.random_range(0..b.len())]).collect();
        values.push(wasserstein1(&ra, &rb)?);
    }
    let mean = values.iter().sum::<f64>() / reps as f64;
    Ok((values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt())
}

/// Compares each arm's action laws with the reference ensemble at every
/// recorded time. `arms` must be ordered by decreasing `nu`.
pub fn convergence_report(
    arms: &[(f64, &[TrajectoryRecord])],
    reference: &[TrajectoryRecord],
    bootstrap: usize,
    seed: u64,
) -> Result<ConvergenceReport> {
    let first = reference.first().ok_or(Error::Empty("reference ensemble"))?;
    let taus = first.taus();
    let modes = first.snapshots[0].actions.len();
    if arms.windows(2).any(|w| w[1].0 >= w[0].0) {
        return Err(Error::Config("nu list must be strictly decreasing".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x626f6f74));
    let mut floor = Vec::with_capacity(taus.len());
    for t in 0..taus.len() {
        let (h1, h2) = EmpiricalLaw::from_records(reference, t)?.halves()?;
        floor.push((1..=modes).map(|k| action_law_distance(&h1, &h2, k)).collect::<Result<Vec<_>>>()?);
    }
    let mut entries = Vec::with_capacity(arms.len());
    for &(nu, records) in arms {
        if records.first().map(|r| r.taus()) != Some(taus.clone()) {
            return Err(Error::Config(format!("arm nu = {nu} was recorded on a different grid")));
        }
        let mut distance = Vec::with_capacity(taus.len());
        let mut error_bar = Vec::with_capacity(taus.len());
        for t in 0..taus.len() {
            let a = EmpiricalLaw::from_records(records, t)?;
            let b = EmpiricalLaw::from_records(reference, t)?;
            let mut d = Vec::with_capacity(modes);
            let mut e = Vec::with_capacity(modes);
            for k in 1..=modes {
                let (x, y) = (a.marginal(k)?, b.marginal(k)?);
                d.push(wasserstein1(&x, &y)?);
                e.push(bootstrap_sd(&x, &y, bootstrap, &mut rng)?);
            }
            distance.push(d);
            error_bar.push(e);
        }
        entries.push(ConvergenceEntry { nu, distance, error_bar });
    }
    let monotone = (0..taus.len())
        .map(|t| {
            (0..modes)
                .map(|k| entries.windows(2).all(|w| w[1].distance[t][k] < w[0].distance[t][k]))
                .collect()
        })
        .collect();
    let within_floor = (0..taus.len())
        .map(|t| {
            (0..modes)
                .map(|k| entries.last().is_some_and(|e| e.distance[t][k] <= 2.0 * floor[t][k]))
                .collect()
        })
        .collect();
    Ok(ConvergenceReport {
        nus: arms.iter().map(|a| a.0).collect(),
        taus,
        n_paths: reference.len(),
        entries,
        floor,
        monotone,
        within_floor,
    })
}

/// Runs one SPDE ensemble per `nu` and one effective ensemble, all from the
/// same initial data, and compares their action laws.
pub fn convergence_study(setup: &ConvergenceSetup) -> Result<ConvergenceRun> {
    if setup.nus.is_empty() {
        return Err(Error::Config("empty nu list".into()));
    }
    let taus = setup.effective_cfg.record.clone();
    let v_init = setup.backend.forward(setup.u0)?;
    let theta = setup.theta.clone().unwrap_or_else(|| angles(&v_init));
    let v0 = reconstruct(&actions(&v_init), &theta)?;
    let reference = ensemble(setup.effective, &v0, &setup.effective_cfg, setup.n_paths)?;
    let mut arms = Vec::with_capacity(setup.nus.len());
    for &nu in &setup.nus {
        let cfg = SpdeConfig {
            nu,
            record: taus.clone(),
            ..setup.spde.clone()
        };
        arms.push(kdv_ensemble(setup.u0, &cfg, setup.noise, setup.backend.as_ref(), setup.n_paths)?);
    }
    let labelled: Vec<(f64, &[TrajectoryRecord])> = setup.nus.iter().copied().zip(arms.iter().map(|a| a.as_slice())).collect();
    let report = convergence_report(&labelled, &reference, setup.bootstrap, setup.effective_cfg.seed)?;
    Ok(ConvergenceRun { report, arms, reference })
}

/// Gnuplot data and scripts: `d(nu)` against `nu` on log-log axes at the last
/// recorded time, one curve per mode, with the floor as a horizontal line.
pub fn plot_scripts(report: &ConvergenceReport) -> Vec<(String, String)> {
    let t = report.taus.len() - 1;
    let modes = report.floor[t].len();
    let mut data = String::from("# nu");
    for k in 1..=modes {
        data.push_str(&format!(" d{k} err{k}"));
    }
    data.push('\n');
    for e in &report.entries {
        data.push_str(&format!("{:e}", e.nu));
        for k in 0..modes {
            data.push_str(&format!(" {:e} {:e}", e.distance[t][k], e.error_bar[t][k]));
        }
        data.push('\n');
    }
    let mut script = format!(
        "set logscale xy\nset xlabel 'nu'\nset ylabel 'W1 distance at tau = {}'\nset key left top\nplot \\\n",
        report.taus[t]
    );
    let curves: Vec<String> = (0..modes)
        .flat_map(|k| {
            [
                format!("  'convergence.dat' using 1:{}:{} with yerrorlines title 'I_{}'", 2 + 2 * k, 3 + 2 * k, k + 1),
                format!("  {:e} with lines dashtype 2 title 'floor I_{}'", report.floor[t][k], k + 1),
            ]
        })
        .collect();
    script.push_str(&curves.join(", \\\n"));
    script.push('\n');
    vec![("convergence.dat".into(), data), ("convergence.gp".into(), script)]
}
