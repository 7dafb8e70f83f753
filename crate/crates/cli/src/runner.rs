//! Executes a planned experiment and writes its artifact directory.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use kdvlab::analysis::{
    angle_equidistribution, angle_histogram, convergence_study, occupation_below, plot_scripts, smooth_mollifier,
    uniform_mollifier, ConvergenceSetup,
};
use kdvlab::averaging::{averaged_diffusion, dispersion_columns, effective_drift};
use kdvlab::dynamics::{exp_moment, kdv_ensemble, kdv_flow, no_growth_trend, sobolev_moment};
use kdvlab::effective::{assemble, ensemble};
use kdvlab::{actions, angles, reconstruct, rotate, BirkhoffVector, TrajectoryRecord};

use crate::config::{ConfigError, ExperimentConfig, Mode, Mollifier, Plan};

pub const MANIFEST: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("solver failure: {0}")]
    Solver(#[from] kdvlab::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            RunError::Solver(_) => 3,
            RunError::Io { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub core_version: String,
    pub mode: Mode,
    pub seed: u64,
    /// SHA-256 of `config_toml`.
    pub config_sha256: String,
    /// Canonical TOML of the effective configuration (after overrides).
    pub config_toml: String,
    pub config: ExperimentConfig,
    pub artifacts: Vec<Artifact>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path).map_err(|source| RunError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: not a run manifest: {e}", path.display())).into())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

struct Output {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
}

impl Output {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), RunError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|source| RunError::Io { path, source })?;
        self.artifacts.push(Artifact {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn jsonl(&mut self, name: &str, records: &[TrajectoryRecord]) -> Result<(), RunError> {
        let mut buf = Vec::new();
        for r in records {
            r.write_jsonl(&mut buf).expect("writing to memory");
        }
        self.write(name, &buf)
    }

    fn files(&mut self, files: Vec<(String, String)>) -> Result<(), RunError> {
        for (name, content) in files {
            self.write(&name, content.as_bytes())?;
        }
        Ok(())
    }
}

/// Runs `config` into `out` and returns the manifest written there.
pub fn run(config: &ExperimentConfig, out: &Path) -> Result<Manifest, RunError> {
    let plan = config.plan()?;
    fs::create_dir_all(out).map_err(|source| RunError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let mut output = Output {
        dir: out.to_path_buf(),
        artifacts: Vec::new(),
    };
    match config.mode {
        Mode::Spde => run_spde(&plan, &mut output)?,
        Mode::Effective => run_effective(&plan, &mut output)?,
        Mode::Convergence => run_convergence(&plan, &mut output)?,
        Mode::Equidistribution => run_equidistribution(&plan, &mut output)?,
        Mode::Diagnostics => run_diagnostics(&plan, &mut output)?,
    }
    let config_toml = config.to_toml();
    let manifest = Manifest {
        manifest_version: MANIFEST_VERSION,
        tool: "kdvlab".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        core_version: kdvlab::VERSION.into(),
        mode: config.mode,
        seed: config.seed,
        config_sha256: sha256_hex(config_toml.as_bytes()),
        config_toml,
        config: config.clone(),
        artifacts: output.artifacts,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    let path = out.join(MANIFEST);
    fs::write(&path, text).map_err(|source| RunError::Io { path, source })?;
    Ok(manifest)
}

fn run_spde(plan: &Plan, out: &mut Output) -> Result<(), RunError> {
    let sigma = 1.0 / (4.0 * plan.noise.max_sq());
    let mut moments = Vec::new();
    for (i, &nu) in plan.config.nus.iter().enumerate() {
        let cfg = plan.spde_config(nu);
        let records = kdv_ensemble(&plan.u0, &cfg, &plan.noise, plan.backend.as_ref(), plan.config.paths)?;
        out.jsonl(&format!("spde_nu{i}.jsonl"), &records)?;
        let exp = exp_moment(&records, sigma);
        let sobolev: Vec<Vec<f64>> = (0..=3).map(|m| sobolev_moment(&records, m, 2)).collect();
        moments.push(json!({
            "nu": nu,
            "taus": plan.record,
            "exp_sigma": sigma,
            "exp_moment": exp,
            "exp_moment_no_growth": no_growth_trend(&exp),
            "sobolev_sq_mean": sobolev,
            "sobolev_no_growth": sobolev.iter().map(|s| no_growth_trend(s)).collect::<Vec<_>>(),
        }));
    }
    out.json("moments.json", &moments)
}

fn initial_state(plan: &Plan) -> Result<BirkhoffVector, RunError> {
    let v = plan.backend.forward(&plan.u0)?;
    let theta = plan.theta.clone().unwrap_or_else(|| angles(&v));
    Ok(reconstruct(&actions(&v), &theta)?)
}

fn run_effective(plan: &Plan, out: &mut Output) -> Result<(), RunError> {
    let sys = assemble(plan.backend.clone(), &plan.noise, plan.quadrature.clone())?;
    let v0 = initial_state(plan)?;
    let records = ensemble(&sys, &v0, &plan.integration_config(), plan.config.paths)?;
    out.jsonl("effective.jsonl", &records)?;
    let deltas = &plan.config.analysis.deltas;
    let occupation = (1..=plan.config.n_pairs)
        .map(|k| deltas.iter().map(|d| occupation_below(&records, *d, k)).collect::<kdvlab::Result<Vec<_>>>())
        .collect::<kdvlab::Result<Vec<_>>>()?;
    out.json("occupation.json", &json!({ "deltas": deltas, "occupation": occupation }))
}

fn run_convergence(plan: &Plan, out: &mut Output) -> Result<(), RunError> {
    let sys = assemble(plan.backend.clone(), &plan.noise, plan.quadrature.clone())?;
    let setup = ConvergenceSetup {
        u0: &plan.u0,
        noise: &plan.noise,
        backend: plan.backend.clone(),
        spde: plan.spde_config(plan.config.nus[0]),
        effective: &sys,
        effective_cfg: plan.integration_config(),
        nus: plan.config.nus.clone(),
        n_paths: plan.config.paths,
        theta: plan.theta.clone(),
        bootstrap: plan.config.analysis.bootstrap,
    };
    let run = convergence_study(&setup)?;
    for (i, arm) in run.arms.iter().enumerate() {
        out.jsonl(&format!("spde_nu{i}.jsonl"), arm)?;
    }
    out.jsonl("effective.jsonl", &run.reference)?;
    out.json("convergence.json", &run.report)?;
    out.files(plot_scripts(&run.report))
}

fn run_equidistribution(plan: &Plan, out: &mut Output) -> Result<(), RunError> {
    let a = &plan.config.analysis;
    let f = match a.mollifier {
        Mollifier::Smooth => smooth_mollifier(&plan.record),
        Mollifier::Uniform => uniform_mollifier(&plan.record),
    };
    let mut entries = Vec::new();
    for (i, &nu) in plan.config.nus.iter().enumerate() {
        let records = kdv_ensemble(&plan.u0, &plan.spde_config(nu), &plan.noise, plan.backend.as_ref(), plan.config.paths)?;
        out.jsonl(&format!("spde_nu{i}.jsonl"), &records)?;
        let res = angle_equidistribution(&records, &f, a.floor_replicates, plan.config.seed)?;
        for mode in 1..=plan.config.n_pairs {
            out.files(angle_histogram(&records, &f, mode, a.histogram_bins, &format!("angles_nu{i}_mode{mode}"))?)?;
        }
        entries.push(json!({
            "nu": nu,
            "ks": res.ks,
            "uniform_floor": res.uniform_floor,
            "n_samples": res.n_samples,
            "within_twice_floor": res.ks.iter().map(|k| *k <= 2.0 * res.uniform_floor).collect::<Vec<_>>(),
        }));
    }
    out.json(
        "equidistribution.json",
        &json!({ "mollifier": a.mollifier, "taus": plan.record, "entries": entries }),
    )
}

fn run_diagnostics(plan: &Plan, out: &mut Output) -> Result<(), RunError> {
    let b = plan.backend.as_ref();
    let caps = b.capabilities();
    let i0 = b.actions(&plan.u0)?;
    let dt = kdvlab::dynamics::SpdeConfig::default_dt(plan.config.s_max);
    let i1 = b.actions(&kdv_flow(&plan.u0, plan.config.time.horizon, dt, true))?;
    let kdv_drift: Vec<f64> = i0.0.iter().zip(&i1.0).map(|(a, c)| (a - c).abs() / a.max(f64::MIN_POSITIVE)).collect();
    let mut report = json!({
        "backend": b.name(),
        "capabilities": caps,
        "n_pairs": b.n_pairs(),
        "initial_actions": i0.0,
        "kdv_flow_time": plan.config.time.horizon,
        "kdv_relative_action_drift": kdv_drift,
        "quadrature_nodes": plan.quadrature.len(),
    });
    if caps.full() {
        let sys = assemble(plan.backend.clone(), &plan.noise, plan.quadrature.clone())?;
        let mut rng = ChaCha8Rng::seed_from_u64(plan.config.seed);
        let mut states = vec![initial_state(plan)?];
        for _ in 1..plan.config.paths {
            states.push(BirkhoffVector::from_vec(
                (0..2 * plan.config.n_pairs).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )?);
        }
        let (mut percival, mut asymmetry, mut split, mut equivariance) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for v in &states {
            let cols = dispersion_columns(sys.fields(), v, &plan.quadrature)?;
            let avg = averaged_diffusion(sys.fields(), v, &plan.quadrature)?;
            percival = percival.max((&cols * cols.transpose() - &avg.matrix).amax());
            asymmetry = asymmetry.max(avg.asymmetry);
            split = split.max(sys.split_defect(v)?);
            let sigma: Vec<f64> = (0..plan.config.n_pairs).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
            let neg: Vec<f64> = sigma.iter().map(|s| -s).collect();
            let shifted = BirkhoffVector::from_vec(effective_drift(sys.fields(), &rotate(v, &sigma)?, &plan.quadrature)?)?;
            let back = rotate(&shifted, &neg)?;
            let direct = effective_drift(sys.fields(), v, &plan.quadrature)?;
            equivariance = equivariance.max(back.as_slice().iter().zip(&direct).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
        }
        report["states"] = json!(states.len());
        report["percival_residual"] = json!(percival);
        report["diffusion_asymmetry"] = json!(asymmetry);
        report["split_defect"] = json!(split);
        report["equivariance_defect"] = json!(equivariance);
    }
    out.json("diagnostics.json", &report)
}
