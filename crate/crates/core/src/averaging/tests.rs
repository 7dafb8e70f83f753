use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::birkhoff::{actions, rotate, BirkhoffBackend, LinearBackend, SyntheticBackend, SyntheticMap};
use crate::dynamics::NoiseSpec;

fn noise(n: usize) -> NoiseSpec {
    NoiseSpec::new((1..=n).map(|s| 0.9 * (-0.4 * s as f64).exp()).collect()).unwrap()
}

fn synthetic(n: usize, eps: f64) -> Perturbation {
    let backend: Arc<dyn BirkhoffBackend> = Arc::new(SyntheticBackend::new(SyntheticMap::new(n, eps, 10.0).unwrap()));
    build_perturbation_fields(backend, &noise(n)).unwrap()
}

fn linear(n: usize) -> Perturbation {
    build_perturbation_fields(Arc::new(LinearBackend::new(n)), &noise(n)).unwrap()
}

fn random_v(rng: &mut impl Rng, n: usize, scale: f64) -> BirkhoffVector {
    BirkhoffVector::from_vec((0..2 * n).map(|_| scale * rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn random_theta(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.0..TAU)).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn torus_average_examples() {
    let quad = TorusQuadrature::tensor(2, 8).unwrap();
    let v = BirkhoffVector::from_pairs(&[(0.7, -0.2), (0.1, 0.4)]);
    let i1 = actions(&v).0[0];
    let avg = torus_average(|x| Ok(vec![actions(x).0[0]]), &v, &quad).unwrap();
    assert!((avg[0] - i1).abs() < 1e-14);
    let first = torus_average(|x| Ok(vec![x.as_slice()[0]]), &v, &quad).unwrap();
    assert!(first[0].abs() < 1e-15);
    let sq = torus_average(|x| Ok(vec![x.as_slice()[0].powi(2)]), &v, &quad).unwrap();
    assert!((sq[0] - i1).abs() < 1e-14);
}

#[test]
fn effective_drift_examples() {
    let quad = TorusQuadrature::tensor(3, 8).unwrap();
    let heat = |x: &BirkhoffVector| -> Result<Vec<f64>> {
        Ok(x.as_slice().iter().enumerate().map(|(i, b)| -(((i / 2 + 1) * (i / 2 + 1)) as f64) * b).collect())
    };
    let v = BirkhoffVector::from_pairs(&[(0.3, 0.1), (-0.5, 0.2), (0.05, 0.9)]);
    let avg = effective_drift(&heat, &v, &quad).unwrap();
    assert!(max_diff(&avg, &heat(&v).unwrap()) < 1e-12);

    let q1 = TorusQuadrature::tensor(1, 8).unwrap();
    let constant = |_: &BirkhoffVector| -> Result<Vec<f64>> { Ok(vec![0.7, -1.3]) };
    let avg = effective_drift(&constant, &BirkhoffVector::from_pairs(&[(1.0, 2.0)]), &q1).unwrap();
    assert!(avg.iter().all(|x| x.abs() < 1e-15));
}

#[test]
fn synthetic_drift_matches_refined_quadrature() {
    let f = synthetic(2, 0.2);
    let coarse = TorusQuadrature::tensor(2, 16).unwrap();
    let fine = TorusQuadrature::tensor(2, 160).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..10 {
        let v = random_v(&mut rng, 2, 1.0);
        let a = effective_drift(&f, &v, &coarse).unwrap();
        let b = effective_drift(&f, &v, &fine).unwrap();
        assert!(max_diff(&a, &b) < 1e-6, "{a:?} vs {b:?}");
    }
}

#[test]
fn averaged_diffusion_examples() {
    let quad = TorusQuadrature::tensor(2, 8).unwrap();
    let v = BirkhoffVector::from_pairs(&[(0.3, 0.1), (-0.5, 0.2)]);
    let sig = [0.4, 1.5];
    let diag = DMatrix::from_fn(4, 4, |r, c| if r == c { sig[r / 2] } else { 0.0 });
    let constant = {
        let d = diag.clone();
        FnDispersion(move |_: &BirkhoffVector| Ok(d.clone()))
    };
    let avg = averaged_diffusion(&constant, &v, &quad).unwrap();
    assert!((&avg.matrix - &diag * diag.transpose()).amax() < 1e-15);

    let zero = FnDispersion(|_: &BirkhoffVector| Ok(DMatrix::zeros(4, 4)));
    assert_eq!(averaged_diffusion(&zero, &v, &quad).unwrap().matrix.amax(), 0.0);
}

#[test]
fn synthetic_diffusion_matches_refined_quadrature_and_is_psd() {
    let f = synthetic(2, 0.25);
    let coarse = TorusQuadrature::tensor(2, 16).unwrap();
    let fine = TorusQuadrature::tensor(2, 160).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let v = random_v(&mut rng, 2, 1.0);
        let a = averaged_diffusion(&f, &v, &coarse).unwrap();
        let b = averaged_diffusion(&f, &v, &fine).unwrap();
        assert!((&a.matrix - &b.matrix).amax() < 1e-6);
        assert!(a.asymmetry < 1e-12);
        let eig = a.matrix.clone().symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|l| *l > -1e-10));
    }
}

#[test]
fn kernel_examples() {
    let f = synthetic(3, 0.2);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let v = random_v(&mut rng, 3, 1.0);
    let bm = DispersionField::eval(&f, &v).unwrap();
    for k in 1..=3 {
        for l in 1..=3 {
            let r = dispersion_kernel(&f, &v, k, l, &[0.0; 3]).unwrap();
            for a in 0..2 {
                for b in 0..2 {
                    assert_eq!(r[(a, b)], bm[(2 * k - 2 + a, 2 * l - 2 + b)]);
                }
            }
        }
    }
    let lin = linear(2);
    let theta = [0.7, -1.1];
    let r = dispersion_kernel(&lin, &v_pairs2(), 2, 2, &theta).unwrap();
    let amp = lin.noise().coefficients()[1] / 2f64.sqrt();
    let (s, c) = (-theta[1]).sin_cos();
    let expected = Matrix2::new(c, -s, s, c) * amp;
    assert!((r - expected).amax() < 1e-15);
    assert_eq!(dispersion_kernel(&lin, &v_pairs2(), 1, 2, &theta).unwrap().amax(), 0.0);
}

fn v_pairs2() -> BirkhoffVector {
    BirkhoffVector::from_pairs(&[(0.2, 0.3), (-0.1, 0.4)])
}

/// `Phi^k_{-phi_k} R(k; l, theta)(Phi_phi v) = R(k; l, theta + phi)(v)`.
#[test]
fn kernel_equivariance() {
    let f = synthetic(3, 0.3);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        let v = random_v(&mut rng, 3, 1.0);
        let theta = random_theta(&mut rng, 3);
        let phi = random_theta(&mut rng, 3);
        let vphi = rotate(&v, &phi).unwrap();
        let sum: Vec<f64> = theta.iter().zip(&phi).map(|(a, b)| a + b).collect();
        for k in 1..=3 {
            for l in 1..=3 {
                let lhs = dispersion_kernel(&f, &vphi, k, l, &theta).unwrap();
                let (s, c) = (-phi[k - 1]).sin_cos();
                let lhs = Matrix2::new(c, -s, s, c) * lhs;
                let rhs = dispersion_kernel(&f, &v, k, l, &sum).unwrap();
                assert!((lhs - rhs).amax() < 1e-12);
            }
        }
    }
}

#[test]
fn percival_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for n in 1..=3 {
        let quad = TorusQuadrature::tensor(n, 6).unwrap();
        for f in [linear(n), synthetic(n, 0.2)] {
            for _ in 0..20 {
                let v = random_v(&mut rng, n, 1.0);
                let cols = dispersion_columns(&f, &v, &quad).unwrap();
                assert_eq!(cols.ncols(), quad.len() * 2 * n);
                let gram = &cols * cols.transpose();
                let avg = averaged_diffusion(&f, &v, &quad).unwrap();
                assert!((gram - avg.matrix).amax() < 1e-10);
            }
        }
    }
}

#[test]
fn rotated_columns_generate_conjugated_gram() {
    let f = synthetic(2, 0.2);
    let quad = TorusQuadrature::tensor(2, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for i in 0..5 {
        let v = random_v(&mut rng, 2, 1.0);
        let sigma = quad.node_shift(3 + 7 * i).unwrap();
        let g_at_shift = {
            let c = dispersion_columns(&f, &rotate(&v, &sigma).unwrap(), &quad).unwrap();
            &c * c.transpose()
        };
        let g = {
            let c = dispersion_columns(&f, &v, &quad).unwrap();
            &c * c.transpose()
        };
        let r = rotation_matrix(4, &sigma);
        assert!((g_at_shift - &r * g * r.transpose()).amax() < 1e-10);
    }
}

#[test]
fn drift_equivariance_lattice_and_generic_shifts() {
    let f = synthetic(2, 0.2);
    let quad = TorusQuadrature::tensor(2, 16).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for i in 0..10 {
        let v = random_v(&mut rng, 2, 1.0);
        let base = effective_drift(&f, &v, &quad).unwrap();
        for sigma in [quad.node_shift(5 + 11 * i).unwrap(), random_theta(&mut rng, 2)] {
            let mut back = effective_drift(&f, &rotate(&v, &sigma).unwrap(), &quad).unwrap();
            rotate_in_place(&mut back, &negated(&sigma));
            assert!(max_diff(&back, &base) < 1e-10);
        }
    }
}

#[test]
fn linear_action_drift_closed_form() {
    let f = linear(3);
    let quad = TorusQuadrature::tensor(3, 4).unwrap();
    let b = f.noise().coefficients().to_vec();
    for i in [vec![0.0, 0.0, 0.0], vec![0.3, 0.05, 1.2]] {
        let drift = averaged_action_drift(&f, &ActionVector(i.clone()), &quad).unwrap();
        for k in 1..=3 {
            let kf = k as f64;
            let expected = -2.0 * kf * kf * i[k - 1] + b[k - 1] * b[k - 1] / kf;
            assert!((drift[k - 1] - expected).abs() < 1e-10);
            assert!(drift[k - 1] > 0.0 || i[k - 1] > 0.0);
        }
    }
}

#[test]
fn synthetic_action_drift_depends_on_actions_only() {
    let f = synthetic(2, 0.2);
    let quad = TorusQuadrature::tensor(2, 16).unwrap();
    let fine = TorusQuadrature::tensor(2, 160).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..3 {
        let i = ActionVector((0..2).map(|_| rng.random_range(0.0..0.5)).collect());
        let base = averaged_action_drift(&f, &i, &quad).unwrap();
        let oracle = averaged_action_drift(&f, &i, &fine).unwrap();
        assert!(max_diff(&base, &oracle) < 1e-6);
        let samples: Vec<Vec<f64>> = (0..10)
            .map(|_| averaged_action_drift_at(&f, &i, &AngleVector(random_theta(&mut rng, 2)), &quad).unwrap())
            .collect();
        for k in 0..2 {
            let mean = samples.iter().map(|s| s[k]).sum::<f64>() / 10.0;
            let var = samples.iter().map(|s| (s[k] - mean).powi(2)).sum::<f64>() / 10.0;
            assert!(var < 1e-20, "var {var}");
        }
    }
}

/// Action-level diffusion `S_km = <b_k^t B B^t b_m>` from the averaged blocks is
/// symmetric positive semi-definite and, for the linear backend, diagonal with
/// entries `2 I_k b_k^2 / k`.
#[test]
fn action_diffusion_contraction() {
    let f = linear(2);
    let quad = TorusQuadrature::tensor(2, 8).unwrap();
    let i = ActionVector(vec![0.4, 0.1]);
    let v = reconstruct(&i, &AngleVector(vec![0.3, 1.9])).unwrap();
    let s = torus_average(
        |x| {
            let bm = DispersionField::eval(&f, x)?;
            let m = &bm * bm.transpose();
            let b = x.as_slice();
            let mut out = Vec::new();
            for k in 0..2 {
                for l in 0..2 {
                    let mut acc = 0.0;
                    for a in 0..2 {
                        for c in 0..2 {
                            acc += b[2 * k + a] * m[(2 * k + a, 2 * l + c)] * b[2 * l + c];
                        }
                    }
                    out.push(acc);
                }
            }
            Ok(out)
        },
        &v,
        &quad,
    )
    .unwrap();
    let bcoef = f.noise().coefficients();
    assert!((s[0] - 2.0 * 0.4 * bcoef[0].powi(2)).abs() < 1e-12);
    assert!((s[3] - 2.0 * 0.1 * bcoef[1].powi(2) / 2.0).abs() < 1e-12);
    assert!(s[1].abs() < 1e-15 && s[2].abs() < 1e-15);
}

/// The symmetric square root, used only as an oracle: its Gram matrix is the
/// same averaged diffusion the kernel columns reproduce.
#[test]
fn symmetric_root_oracle() {
    let f = synthetic(2, 0.3);
    let quad = TorusQuadrature::tensor(2, 8).unwrap();
    let v = BirkhoffVector::from_pairs(&[(0.5, -0.2), (0.3, 0.6)]);
    let avg = averaged_diffusion(&f, &v, &quad).unwrap().matrix;
    let eig = avg.clone().symmetric_eigen();
    let root = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()))
        * eig.eigenvectors.transpose();
    let cols = dispersion_columns(&f, &v, &quad).unwrap();
    assert!((&root * &root - &cols * cols.transpose()).amax() < 1e-10);
}

#[test]
fn combined_coefficients_agree() {
    let f = synthetic(2, 0.2);
    let quad = TorusQuadrature::tensor(2, 6).unwrap();
    let v = BirkhoffVector::from_pairs(&[(0.5, -0.2), (0.3, 0.6)]);
    let (drift, cols) = effective_coefficients(&f, &v, &quad).unwrap();
    assert!(max_diff(&drift, &effective_drift(&f, &v, &quad).unwrap()) < 1e-14);
    assert!((cols - dispersion_columns(&f, &v, &quad).unwrap()).amax() < 1e-15);
}

#[test]
fn quadrature_refinement_converges() {
    let f = synthetic(3, 0.2);
    let v = BirkhoffVector::from_pairs(&[(0.5, -0.2), (0.3, 0.6), (-0.4, 0.1)]);
    let d4 = effective_drift(&f, &v, &TorusQuadrature::tensor(3, 4).unwrap()).unwrap();
    let d8 = effective_drift(&f, &v, &TorusQuadrature::tensor(3, 8).unwrap()).unwrap();
    let d16 = effective_drift(&f, &v, &TorusQuadrature::tensor(3, 16).unwrap()).unwrap();
    let (e1, e2) = (max_diff(&d4, &d16), max_diff(&d8, &d16));
    assert!(e2 <= e1 * 0.1 + 1e-14, "{e1} {e2}");
}

#[test]
fn frozen_spectators_beyond_quadrature_dims() {
    let quad = TorusQuadrature::tensor(1, 8).unwrap();
    let v = BirkhoffVector::from_pairs(&[(0.5, -0.2), (0.3, 0.6), (-0.4, 0.1)]);
    let avg = torus_average(|x| Ok(x.as_slice().to_vec()), &v, &quad).unwrap();
    assert!(avg[0].abs() < 1e-15 && avg[1].abs() < 1e-15);
    assert!(max_diff(&avg[2..], &v.as_slice()[2..]) < 1e-15);
    let small = BirkhoffVector::from_pairs(&[(1.0, 0.0)]);
    assert!(torus_average(|x| Ok(x.as_slice().to_vec()), &small, &TorusQuadrature::tensor(2, 2).unwrap()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn averages_are_rotation_invariant_for_lattice_shifts(
        seed in any::<u64>(), shift in 0usize..64,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let quad = TorusQuadrature::tensor(2, 8).unwrap();
        let v = random_v(&mut rng, 2, 1.0);
        let sigma = quad.node_shift(shift).unwrap();
        let f = |x: &BirkhoffVector| Ok(vec![x.as_slice()[0] * x.as_slice()[2], x.as_slice()[1].powi(3)]);
        let a = torus_average(f, &v, &quad).unwrap();
        let b = torus_average(f, &rotate(&v, &sigma).unwrap(), &quad).unwrap();
        prop_assert!(max_diff(&a, &b) < 1e-14);
    }
}
