//! Restarted Lanczos with full reorthogonalization and locking, for the
//! largest eigenvalues of a symmetric operator given only by its action.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct LanczosSettings {
    /// Relative residual `β·|s_m| ≤ tol·|θ|` for locking a Ritz pair.
    pub tol: f64,
    pub max_restarts: usize,
    /// Krylov dimension per cycle; chosen from `k` when `None`.
    pub krylov_dim: Option<usize>,
    pub seed: u64,
}

impl Default for LanczosSettings {
    fn default() -> Self {
        LanczosSettings { tol: 1e-10, max_restarts: 60, krylov_dim: None, seed: 0x5eed }
    }
}

pub struct RitzPairs {
    /// Descending.
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub restarts: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b);
            axpy(-c, b, v);
        }
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let nrm = dot(v, v).sqrt();
    if nrm > 0.0 {
        v.iter_mut().for_each(|x| *x /= nrm);
    }
    nrm
}

/// `k` largest eigenpairs of the symmetric map `op` on ℝⁿ.
pub fn largest_eigenpairs<F>(n: usize, k: usize, mut op: F, s: &LanczosSettings) -> Result<RitzPairs>
where
    F: FnMut(&[f64], &mut [f64]),
{
    if k == 0 {
        return Ok(RitzPairs { values: vec![], vectors: vec![], restarts: 0 });
    }
    if k > n {
        return Err(Error::Invalid(format!("{k} eigenpairs requested on {n} unknowns")));
    }
    let m = s.krylov_dim.unwrap_or((2 * k + 10).max(30)).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let random = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| rng.random::<f64>() - 0.5).collect() };

    let mut locked_vals: Vec<f64> = Vec::new();
    let mut locked: Vec<Vec<f64>> = Vec::new();
    let mut start = random(&mut rng);
    let mut w = vec![0.0; n];

    for restart in 0..=s.max_restarts {
        let mut v0 = start.clone();
        orthogonalize(&mut v0, &locked);
        if normalize(&mut v0) == 0.0 {
            v0 = random(&mut rng);
            orthogonalize(&mut v0, &locked);
            normalize(&mut v0);
        }
        let room = m.min(n - locked.len());
        let mut basis: Vec<Vec<f64>> = vec![v0];
        let mut alpha = Vec::with_capacity(room);
        let mut beta: Vec<f64> = Vec::with_capacity(room);
        let last_beta;
        loop {
            let j = basis.len() - 1;
            op(&basis[j], &mut w);
            let a = dot(&w, &basis[j]);
            alpha.push(a);
            orthogonalize(&mut w, &locked);
            orthogonalize(&mut w, &basis);
            let b = dot(&w, &w).sqrt();
            let scale = alpha.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
            if basis.len() == room || b <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
                last_beta = if basis.len() == room { b } else { 0.0 };
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
        }
        let p = basis.len();
        let mut t = DMatrix::zeros(p, p);
        for i in 0..p {
            t[(i, i)] = alpha[i];
            if i + 1 < p {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

        let want = k - locked.len();
        let ritz = |c: usize| -> Vec<f64> {
            let mut x = vec![0.0; n];
            for (i, bv) in basis.iter().enumerate() {
                axpy(eig.eigenvectors[(i, c)], bv, &mut x);
            }
            x
        };
        let mut restart_vec = vec![0.0; n];
        for &c in order.iter().take(want) {
            let theta = eig.eigenvalues[c];
            let res = last_beta * eig.eigenvectors[(p - 1, c)].abs();
            let mut x = ritz(c);
            if res <= s.tol * theta.abs() {
                orthogonalize(&mut x, &locked);
                normalize(&mut x);
                locked_vals.push(theta);
                locked.push(x);
            } else {
                axpy(1.0, &x, &mut restart_vec);
            }
        }
        if locked.len() >= k {
            let mut idx: Vec<usize> = (0..locked.len()).collect();
            idx.sort_by(|&a, &b| locked_vals[b].total_cmp(&locked_vals[a]));
            return Ok(RitzPairs {
                values: idx.iter().map(|&i| locked_vals[i]).collect(),
                vectors: idx.iter().map(|&i| locked[i].clone()).collect(),
                restarts: restart,
            });
        }
        let noise = random(&mut rng);
        let rn = dot(&restart_vec, &restart_vec).sqrt();
        if rn > 0.0 {
            restart_vec.iter_mut().for_each(|x| *x /= rn);
            let nn = dot(&noise, &noise).sqrt();
            axpy(1e-3 / nn, &noise, &mut restart_vec);
            start = restart_vec;
        } else {
            start = noise;
        }
    }
    Err(Error::NoConvergence { restarts: s.max_restarts, converged: locked.len(), wanted: k })
}
