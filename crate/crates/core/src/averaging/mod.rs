//! Torus averages over the first `dims` angles.
//!
//! All integrals over `T^N` are replaced by a fixed [`TorusQuadrature`]. Node
//! evaluations run in parallel and are reduced by a pairwise sum in node order,
//! so every result is independent of scheduling. With `Phi_theta` the pairwise
//! counter-clockwise rotation:
//!
//! ```text
//! <f>(v)      = sum_q w_q f(Phi_q v)
//! <P>(v)      = sum_q w_q Phi_{-q} P(Phi_q v)
//! <BB^t>(v)   = sum_q w_q Phi_{-q} (B B^t)(Phi_q v) Phi_q
//! column(l,q) = sqrt(w_q) Phi_{-q} B(Phi_q v) e_l
//! ```
//!
//! The Gram matrix of the columns is `<BB^t>` for any quadrature (discrete
//! Percival identity).

mod fields;
mod quadrature;

use nalgebra::{DMatrix, Matrix2};
use rayon::prelude::*;

pub use fields::{
    build_perturbation_fields, DispersionField, DriftField, DriftTerm, FnDispersion, Perturbation, PointData,
    TermField,
};
pub use quadrature::{QuadratureKind, QuadratureSpec, TorusQuadrature};

use crate::birkhoff::{reconstruct, rotate_in_place, ActionVector, AngleVector, BirkhoffVector};
use crate::error::{Error, Result};

/// Pairwise (cascade) summation in index order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        n if n <= 8 => xs.iter().sum(),
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

fn negated(theta: &[f64]) -> Vec<f64> {
    theta.iter().map(|t| -t).collect()
}

fn rotated(v: &BirkhoffVector, theta: &[f64]) -> BirkhoffVector {
    let mut x = v.clone();
    rotate_in_place(x.as_mut_slice(), theta);
    x
}

/// Evaluates `f(q, theta_q)` at every node, in node order.
fn per_node<T, F>(quad: &TorusQuadrature, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &[f64]) -> Result<T> + Send + Sync,
{
    if quad.len() >= 64 {
        (0..quad.len()).into_par_iter().map(|q| f(q, quad.node(q))).collect()
    } else {
        (0..quad.len()).map(|q| f(q, quad.node(q))).collect()
    }
}

/// Componentwise `sum_q w_q x_q` with pairwise reduction.
fn weighted_sum(quad: &TorusQuadrature, values: &[Vec<f64>]) -> Vec<f64> {
    let dim = values.first().map_or(0, Vec::len);
    let mut column = vec![0.0; values.len()];
    (0..dim)
        .map(|i| {
            for (q, x) in values.iter().enumerate() {
                column[q] = quad.weight(q) * x[i];
            }
            pairwise_sum(&column)
        })
        .collect()
}

fn check_dims(v: &BirkhoffVector, quad: &TorusQuadrature) -> Result<()> {
    if quad.dims() > v.n_pairs() {
        return Err(Error::Dimension {
            expected: v.n_pairs(),
            found: quad.dims(),
        });
    }
    Ok(())
}

/// `<f>(v)`, for vector-valued `f`.
pub fn torus_average<F>(f: F, v: &BirkhoffVector, quad: &TorusQuadrature) -> Result<Vec<f64>>
where
    F: Fn(&BirkhoffVector) -> Result<Vec<f64>> + Send + Sync,
{
    check_dims(v, quad)?;
    let values = per_node(quad, |_, theta| f(&rotated(v, theta)))?;
    Ok(weighted_sum(quad, &values))
}

/// `<P>(v)`.
pub fn effective_drift(p: &dyn DriftField, v: &BirkhoffVector, quad: &TorusQuadrature) -> Result<Vec<f64>> {
    check_dims(v, quad)?;
    let values = per_node(quad, |_, theta| {
        let mut out = p.eval(&rotated(v, theta))?;
        rotate_in_place(&mut out, &negated(theta));
        Ok(out)
    })?;
    Ok(weighted_sum(quad, &values))
}

/// `<BB^t>(v)` after symmetrization, with the pre-symmetrization asymmetry
/// `max |M - M^t|` kept as a quality diagnostic.
#[derive(Debug, Clone)]
pub struct AveragedDiffusion {
    pub matrix: DMatrix<f64>,
    pub asymmetry: f64,
}

fn rotation_matrix(dim: usize, theta: &[f64]) -> DMatrix<f64> {
    let mut r = DMatrix::identity(dim, dim);
    for (k, t) in theta.iter().enumerate() {
        let (s, c) = t.sin_cos();
        r[(2 * k, 2 * k)] = c;
        r[(2 * k, 2 * k + 1)] = -s;
        r[(2 * k + 1, 2 * k)] = s;
        r[(2 * k + 1, 2 * k + 1)] = c;
    }
    r
}

/// `<BB^t>(v)`, computed by explicit conjugation `Phi_{-q} (BB^t) Phi_q` at every node.
pub fn averaged_diffusion(b: &dyn DispersionField, v: &BirkhoffVector, quad: &TorusQuadrature) -> Result<AveragedDiffusion> {
    check_dims(v, quad)?;
    let n = 2 * v.n_pairs();
    let values = per_node(quad, |_, theta| {
        let bm = b.eval(&rotated(v, theta))?;
        let r = rotation_matrix(n, theta);
        let m = r.transpose() * (&bm * bm.transpose()) * r;
        Ok(m.as_slice().to_vec())
    })?;
    let raw = DMatrix::from_column_slice(n, n, &weighted_sum(quad, &values));
    let asymmetry = (&raw - raw.transpose()).amax();
    let matrix = (&raw + raw.transpose()) * 0.5;
    Ok(AveragedDiffusion { matrix, asymmetry })
}

/// `R(k; l, theta)(v) = Phi^k_{-theta_k} B_kl(Phi_theta v)`, pairs `k, l` from 1.
pub fn dispersion_kernel(
    b: &dyn DispersionField,
    v: &BirkhoffVector,
    k: usize,
    l: usize,
    theta: &[f64],
) -> Result<Matrix2<f64>> {
    let bm = b.eval(&rotated(v, theta))?;
    if k == 0 || l == 0 || 2 * k > bm.nrows() || 2 * l > bm.ncols() {
        return Err(Error::Dimension {
            expected: bm.nrows().min(bm.ncols()) / 2,
            found: k.max(l),
        });
    }
    let block: Matrix2<f64> = bm.fixed_view::<2, 2>(2 * (k - 1), 2 * (l - 1)).into_owned();
    let t = theta.get(k - 1).copied().unwrap_or(0.0);
    let (s, c) = t.sin_cos();
    let back = Matrix2::new(c, s, -s, c);
    Ok(back * block)
}

/// Columns `sqrt(w_q) Phi_{-q} B(Phi_q v) e_l`, ordered node-major: column
/// `q * noise_dim + l`.
pub fn dispersion_columns(b: &dyn DispersionField, v: &BirkhoffVector, quad: &TorusQuadrature) -> Result<DMatrix<f64>> {
    check_dims(v, quad)?;
    let blocks = per_node(quad, |q, theta| {
        let mut bm = b.eval(&rotated(v, theta))?;
        let back = negated(theta);
        let scale = quad.weight(q).sqrt();
        for mut col in bm.column_iter_mut() {
            rotate_in_place(col.as_mut_slice(), &back);
            col *= scale;
        }
        Ok(bm)
    })?;
    let rows = 2 * v.n_pairs();
    let per = blocks.first().map_or(0, |m| m.ncols());
    let mut out = DMatrix::zeros(rows, per * blocks.len());
    for (q, m) in blocks.iter().enumerate() {
        out.columns_mut(q * per, per).copy_from(m);
    }
    Ok(out)
}

/// `<P>(v)` and the dispersion columns together, evaluating the perturbation
/// once per node.
pub fn effective_coefficients(
    fields: &Perturbation,
    v: &BirkhoffVector,
    quad: &TorusQuadrature,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    check_dims(v, quad)?;
    let nodes = per_node(quad, |q, theta| {
        let pd = fields.evaluate(&rotated(v, theta))?;
        let back = negated(theta);
        let mut drift = pd.drift();
        rotate_in_place(&mut drift, &back);
        let mut bm = pd.dispersion;
        let scale = quad.weight(q).sqrt();
        for mut col in bm.column_iter_mut() {
            rotate_in_place(col.as_mut_slice(), &back);
            col *= scale;
        }
        Ok((drift, bm))
    })?;
    let (drifts, blocks): (Vec<Vec<f64>>, Vec<DMatrix<f64>>) = nodes.into_iter().unzip();
    let per = fields.noise_dim();
    let mut cols = DMatrix::zeros(2 * v.n_pairs(), per * blocks.len());
    for (q, m) in blocks.iter().enumerate() {
        cols.columns_mut(q * per, per).copy_from(m);
    }
    Ok((weighted_sum(quad, &drifts), cols))
}

/// Drift of the averaged action equation at `v = V_0(I)`:
///
/// ```text
/// F_k(I) = <b_k . P^1_k> + <b_k . P^2_k> + 1/2 <sum_j |B_kj|_HS^2>
/// ```
pub fn averaged_action_drift(fields: &Perturbation, actions: &ActionVector, quad: &TorusQuadrature) -> Result<Vec<f64>> {
    averaged_action_drift_at(fields, actions, &AngleVector::zeros(actions.len()), quad)
}

/// As [`averaged_action_drift`], from the point `V_theta0(I)`; the result
/// depends on `theta0` only through quadrature error.
pub fn averaged_action_drift_at(
    fields: &Perturbation,
    actions: &ActionVector,
    theta0: &AngleVector,
    quad: &TorusQuadrature,
) -> Result<Vec<f64>> {
    let v = reconstruct(actions, theta0)?;
    torus_average(
        |x| {
            let pd = fields.evaluate(x)?;
            let b = x.as_slice();
            Ok((0..x.n_pairs())
                .map(|k| {
                    let (i, j) = (2 * k, 2 * k + 1);
                    let heat = b[i] * pd.heat[i] + b[j] * pd.heat[j];
                    let ito = b[i] * pd.ito[i] + b[j] * pd.ito[j];
                    let hs = pd.dispersion.row(i).norm_squared() + pd.dispersion.row(j).norm_squared();
                    heat + ito + 0.5 * hs
                })
                .collect())
        },
        &v,
        quad,
    )
}

#[cfg(test)]
mod tests;
