use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pairwise_sum;
use crate::error::{Error, Result};
use crate::rng::splitmix64;

/// Quadrature selection as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum QuadratureSpec {
    Tensor {
        nodes_per_dim: usize,
    },
    Lattice {
        total_nodes: usize,
        #[serde(default)]
        seed: u64,
    },
    Mc {
        total_nodes: usize,
        #[serde(default)]
        seed: u64,
    },
}

impl QuadratureSpec {
    /// 16-point trapezoid per angle up to three angles, a shifted rank-1
    /// lattice with `2^13` nodes beyond.
    pub fn default_for(dims: usize) -> Self {
        if dims <= 3 {
            QuadratureSpec::Tensor { nodes_per_dim: 16 }
        } else {
            QuadratureSpec::Lattice {
                total_nodes: 1 << 13,
                seed: 0,
            }
        }
    }

    pub fn build(&self, dims: usize) -> Result<TorusQuadrature> {
        match *self {
            QuadratureSpec::Tensor { nodes_per_dim } => TorusQuadrature::tensor(dims, nodes_per_dim),
            QuadratureSpec::Lattice { total_nodes, seed } => TorusQuadrature::lattice(dims, total_nodes, seed),
            QuadratureSpec::Mc { total_nodes, seed } => TorusQuadrature::monte_carlo(dims, total_nodes, seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuadratureKind {
    Tensor,
    Lattice,
    Mc,
}

/// Nodes and weights on `T^dims`, weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusQuadrature {
    dims: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    kind: QuadratureKind,
    /// Tensor: points per angle. Lattice: the generating vector.
    generator: Vec<usize>,
}

impl TorusQuadrature {
    /// Trapezoid rule with `m` points per angle; exact for every character
    /// `exp(i k.theta)` with `|k|_inf < m`.
    pub fn tensor(dims: usize, m: usize) -> Result<Self> {
        if dims == 0 || m == 0 {
            return Err(Error::Config("tensor quadrature needs dims >= 1 and nodes_per_dim >= 1".into()));
        }
        let total = m
            .checked_pow(dims as u32)
            .filter(|&n| n <= 1 << 22)
            .ok_or_else(|| Error::Config(format!("{m}^{dims} tensor nodes is too many")))?;
        let mut nodes = Vec::with_capacity(total * dims);
        for q in 0..total {
            let mut rest = q;
            for _ in 0..dims {
                nodes.push(TAU * (rest % m) as f64 / m as f64);
                rest /= m;
            }
        }
        Ok(Self {
            dims,
            nodes,
            weights: vec![1.0 / total as f64; total],
            kind: QuadratureKind::Tensor,
            generator: vec![m],
        })
    }

    /// Rank-1 Korobov lattice `theta_q = 2 pi ({q z / n} + Delta)`, with `z`
    /// chosen among a deterministic candidate set to minimize the `P_2`
    /// criterion and `Delta` a random shift derived from `seed`.
    pub fn lattice(dims: usize, n: usize, seed: u64) -> Result<Self> {
        if dims == 0 || n < 2 {
            return Err(Error::Config("lattice quadrature needs dims >= 1 and at least 2 nodes".into()));
        }
        let z = korobov_generator(dims, n);
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
        let shift: Vec<f64> = (0..dims).map(|_| rng.random::<f64>()).collect();
        let mut nodes = Vec::with_capacity(n * dims);
        for q in 0..n {
            for (zj, dj) in z.iter().zip(&shift) {
                let x = ((q * zj) % n) as f64 / n as f64 + dj;
                nodes.push(TAU * (x - x.floor()));
            }
        }
        Ok(Self {
            dims,
            nodes,
            weights: vec![1.0 / n as f64; n],
            kind: QuadratureKind::Lattice,
            generator: z,
        })
    }

    pub fn monte_carlo(dims: usize, n: usize, seed: u64) -> Result<Self> {
        if dims == 0 || n == 0 {
            return Err(Error::Config("monte-carlo quadrature needs dims >= 1 and nodes >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
        let nodes = (0..n * dims).map(|_| TAU * rng.random::<f64>()).collect();
        Ok(Self {
            dims,
            nodes,
            weights: vec![1.0 / n as f64; n],
            kind: QuadratureKind::Mc,
            generator: Vec::new(),
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn kind(&self) -> QuadratureKind {
        self.kind
    }

    pub fn node(&self, q: usize) -> &[f64] {
        &self.nodes[q * self.dims..(q + 1) * self.dims]
    }

    pub fn weight(&self, q: usize) -> f64 {
        self.weights[q]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight_sum(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    /// Largest `d` such that every non-trivial character with `|k|_inf <= d`
    /// integrates to zero, when known in closed form.
    pub fn exactness_degree(&self) -> Option<usize> {
        match self.kind {
            QuadratureKind::Tensor => Some(self.generator[0] - 1),
            _ => None,
        }
    }

    /// `sum_q w_q exp(i k.theta_q)` as `(re, im)`.
    pub fn character(&self, k: &[i64]) -> (f64, f64) {
        let (re, im): (Vec<f64>, Vec<f64>) = (0..self.len())
            .map(|q| {
                let phase: f64 = self.node(q).iter().zip(k).map(|(t, &k)| k as f64 * t).sum();
                let (s, c) = phase.sin_cos();
                (self.weights[q] * c, self.weights[q] * s)
            })
            .unzip();
        (pairwise_sum(&re), pairwise_sum(&im))
    }

    /// A shift `sigma` that maps the node set onto itself (mod `2 pi`); `i`
    /// indexes the available shifts. `None` for Monte Carlo nodes.
    pub fn node_shift(&self, i: usize) -> Option<Vec<f64>> {
        match self.kind {
            QuadratureKind::Tensor => {
                let m = self.generator[0];
                let mut rest = i;
                Some(
                    (0..self.dims)
                        .map(|_| {
                            let t = TAU * (rest % m) as f64 / m as f64;
                            rest /= m;
                            t
                        })
                        .collect(),
                )
            }
            QuadratureKind::Lattice => {
                let n = self.len();
                Some(
                    self.generator
                        .iter()
                        .map(|z| TAU * ((i * z) % n) as f64 / n as f64)
                        .collect(),
                )
            }
            QuadratureKind::Mc => None,
        }
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn korobov_generator(dims: usize, n: usize) -> Vec<usize> {
    let powers = |a: usize| -> Vec<usize> {
        let mut z = Vec::with_capacity(dims);
        let mut x = 1usize;
        for _ in 0..dims {
            z.push(x);
            x = (x * a) % n;
        }
        z
    };
    if dims == 1 || n < 4 {
        return powers(1);
    }
    let b2 = |x: f64| x * x - x + 1.0 / 6.0;
    let p2 = |z: &[usize]| -> f64 {
        (0..n)
            .map(|q| {
                z.iter()
                    .map(|&zj| 1.0 + 2.0 * std::f64::consts::PI.powi(2) * b2(((q * zj) % n) as f64 / n as f64))
                    .product::<f64>()
            })
            .sum::<f64>()
            / n as f64
    };
    let candidates = 128usize.min(n / 2);
    let mut best = (f64::INFINITY, 1usize);
    for c in 0..candidates {
        let mut a = 2 + c * (n / 2 - 2).max(1) / candidates.max(1);
        while gcd(a, n) != 1 {
            a += 1;
        }
        let z = powers(a);
        let score = p2(&z);
        if score < best.0 {
            best = (score, a);
        }
    }
    powers(best.1)
}
