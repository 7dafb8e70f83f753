use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kdvlab::analysis::{wasserstein1, EmpiricalLaw};
use kdvlab::averaging::{effective_drift, TorusQuadrature};
use kdvlab::birkhoff::{
    actions, rotate, BirkhoffBackend, BirkhoffVector, HillBackend, LinearBackend, SyntheticBackend, SyntheticMap,
};
use kdvlab::dynamics::{kdv_ensemble, kdv_flow, no_growth_trend, sobolev_moment, NoiseSpec, SpdeConfig};
use kdvlab::effective::{assemble, ensemble, EffectiveSystem, IntegrationConfig};
use kdvlab::rng;
use kdvlab::FourierField;

fn synthetic_system(noise: &NoiseSpec, m: usize) -> EffectiveSystem {
    let backend: Arc<dyn BirkhoffBackend> = Arc::new(SyntheticBackend::new(SyntheticMap::new(2, 0.2, 10.0).unwrap()));
    assemble(backend, noise, TorusQuadrature::tensor(2, m).unwrap()).unwrap()
}

fn random_v(rng: &mut ChaCha8Rng, n: usize) -> BirkhoffVector {
    BirkhoffVector::from_vec((0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn hill_actions_conserved_by_kdv() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut u = FourierField::zeros(16);
    for s in 1..=16i64 {
        u.set(s, 0.05 * (-0.5 * s as f64).exp() * rng.random_range(-1.0..1.0));
        u.set(-s, 0.05 * (-0.5 * s as f64).exp() * rng.random_range(-1.0..1.0));
    }
    let hill = HillBackend::new(6, 4).unwrap();
    let before = hill.actions(&u).unwrap();
    let after = hill.actions(&kdv_flow(&u, 1.0, SpdeConfig::default_dt(16), true)).unwrap();
    for (a, b) in before.0.iter().zip(&after.0) {
        assert!((a - b).abs() < 1e-3 * a, "{a} vs {b}");
    }
}

#[test]
fn split_consistency_at_random_points() {
    let noise = NoiseSpec::new(vec![0.7, 0.5]).unwrap();
    let linear = assemble(Arc::new(LinearBackend::new(2)), &noise, TorusQuadrature::tensor(2, 4).unwrap()).unwrap();
    let synthetic = synthetic_system(&noise, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for sys in [&linear, &synthetic] {
        for _ in 0..100 {
            let v = random_v(&mut rng, 2);
            assert!(sys.split_defect(&v).unwrap() < 1e-12);
            let direct = effective_drift(sys.fields(), &v, sys.quadrature()).unwrap();
            let split = sys.drift(&v).unwrap();
            assert!(direct.iter().zip(&split).all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }
}

/// The law of `I(v(tau))` depends on `v0` only through `I(v0)`.
#[test]
fn action_law_invariant_under_initial_rotation() {
    let noise = NoiseSpec::new(vec![0.7, 0.5]).unwrap();
    let sys = synthetic_system(&noise, 8);
    let v0 = BirkhoffVector::from_pairs(&[(0.6, 0.1), (-0.2, 0.4)]);
    let turned = rotate(&v0, &[2.1, -0.7]).unwrap();
    assert!((actions(&v0).0[1] - actions(&turned).0[1]).abs() < 1e-15);
    let mut cfg = IntegrationConfig::new(0.5, 30, vec![0.5]);
    cfg.dt = 5e-3;
    let a = ensemble(&sys, &v0, &cfg, 256).unwrap();
    cfg.seed = 31;
    let b = ensemble(&sys, &turned, &cfg, 256).unwrap();
    let (la, lb) = (EmpiricalLaw::from_records(&a, 0).unwrap(), EmpiricalLaw::from_records(&b, 0).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for k in 1..=2 {
        let (x, y) = (la.marginal(k).unwrap(), lb.marginal(k).unwrap());
        let d = wasserstein1(&x, &y).unwrap();
        let mut pooled: Vec<f64> = x.iter().chain(&y).copied().collect();
        let mut null: Vec<f64> = (0..200)
            .map(|_| {
                for i in (1..pooled.len()).rev() {
                    pooled.swap(i, rng.random_range(0..=i));
                }
                let (p, q) = pooled.split_at(x.len());
                wasserstein1(p, q).unwrap()
            })
            .collect();
        null.sort_by(f64::total_cmp);
        assert!(d <= null[189], "mode {k}: {d} above the 95% band {}", null[189]);
    }
}

/// Weak error of `E I_k(T)` on the linear backend, estimated against an exact
/// Ornstein-Uhlenbeck path driven by the same normals.
fn weak_error(sys: &EffectiveSystem, b: &[f64], v0: &BirkhoffVector, dt: f64, paths: usize) -> Vec<f64> {
    let t = 0.5;
    let mut cfg = IntegrationConfig::new(t, 40, vec![t]);
    cfg.dt = dt;
    let records = ensemble(sys, v0, &cfg, paths).unwrap();
    let steps = (t / dt).round() as usize;
    let mut err = vec![0.0; b.len()];
    for (p, rec) in records.iter().enumerate() {
        let mut stream = rng::stream(cfg.seed, p as u64, 0);
        let mut x = v0.as_slice().to_vec();
        for _ in 0..steps {
            for (i, xi) in x.iter_mut().enumerate() {
                let k = (i / 2 + 1) as f64;
                let lambda = k * k;
                let sd = b[i / 2] / k.sqrt() * ((1.0 - (-2.0 * lambda * dt).exp()) / (2.0 * lambda)).sqrt();
                *xi = (-lambda * dt).exp() * *xi + sd * rng::normal(&mut stream);
            }
        }
        let exact = actions(&BirkhoffVector::from_vec(x).unwrap());
        for (k, e) in err.iter_mut().enumerate() {
            *e += rec.snapshots[0].actions[k] - exact.0[k];
        }
    }
    err.iter().map(|e| e / paths as f64).collect()
}

#[test]
fn effective_scheme_has_weak_order_one() {
    let b = [0.7, 0.9];
    let noise = NoiseSpec::new(b.to_vec()).unwrap();
    let sys = assemble(Arc::new(LinearBackend::new(2)), &noise, TorusQuadrature::tensor(2, 1).unwrap()).unwrap();
    let cols = sys.noise_columns(&BirkhoffVector::zeros(2)).unwrap();
    for r in 0..4 {
        for c in 0..4 {
            let expected = if r == c { b[r / 2] / ((r / 2 + 1) as f64).sqrt() } else { 0.0 };
            assert!((cols[(r, c)] - expected).abs() < 1e-14);
        }
    }
    let v0 = BirkhoffVector::from_pairs(&[(0.4, 0.0), (0.0, 0.2)]);
    let dts = [0.05, 0.025, 0.0125];
    let errs: Vec<Vec<f64>> = dts.iter().map(|dt| weak_error(&sys, &b, &v0, *dt, 4000)).collect();
    for k in 0..2 {
        let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
        let ys: Vec<f64> = errs.iter().map(|e| e[k].abs().ln()).collect();
        let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
        let order = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!((order - 1.0).abs() < 0.1, "mode {}: order {order}, errors {errs:?}", k + 1);
        assert!(errs.windows(2).all(|w| w[1][k].abs() < w[0][k].abs()));
    }
}

#[test]
fn sobolev_moments_show_no_growth() {
    let noise = NoiseSpec::new((1..=8).map(|s| 0.5 * (-(s as f64)).exp()).collect()).unwrap();
    let u0 = FourierField::from_modes(8, &[(1, 0.2), (-2, 0.1)]).unwrap();
    let cfg = SpdeConfig::new(0.1, 1.0, 8, 50, (0..=10).map(|i| i as f64 / 10.0).collect());
    let records = kdv_ensemble(&u0, &cfg, &noise, &LinearBackend::new(2), 64).unwrap();
    for m in 0..=3 {
        for k in 1..=4 {
            let series = sobolev_moment(&records, m, k);
            assert!(series.iter().all(|x| x.is_finite()));
            assert!(no_growth_trend(&series), "m = {m}, k = {k}: {series:?}");
        }
    }
}
