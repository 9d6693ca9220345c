//! Smallest eigenpairs, small-eigenvalue counts, QSD and exit densities.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::domain::{Region, BOUNDARY_SAMPLES};
use crate::error::{Error, Result};
use crate::grid::{Bc, Grid};
use crate::lanczos::{largest_eigenpairs, LanczosSettings};
use crate::operator::DiscreteOperator;
use crate::sparse::SkylineCholesky;
use crate::{nu, Point, DEFAULT_NU_EXPONENT};

#[derive(Clone, Debug)]
pub struct EigenSettings {
    pub lanczos: LanczosSettings,
    /// Shift δ relative to `2d·h²/Δx²`.
    pub shift_rel: f64,
}

impl Default for EigenSettings {
    fn default() -> Self {
        EigenSettings { lanczos: LanczosSettings::default(), shift_rel: 1e-10 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Nodal values, orthonormal in the trapezoid inner product.
    pub eigenvectors: Vec<Vec<f64>>,
    /// `‖A y - λ y‖` in the symmetric coordinates.
    pub residual_norms: Vec<f64>,
    /// Eigenvalues ≤ h^{6/5}, when that count is conclusive.
    pub m_small: Option<usize>,
    pub n_dofs: usize,
    pub matrix_norm: f64,
    pub h: f64,
    pub bc: Bc,
    pub form_degree: u8,
}

/// The `k` smallest eigenpairs of `op` by shift-invert Lanczos, refined by a
/// Rayleigh–Ritz step on the edge energy so that eigenvalues far below the
/// shift stay accurate.
pub fn smallest_eigenpairs(op: &DiscreteOperator, k: usize, s: &EigenSettings) -> Result<SpectralResult> {
    let n = op.n();
    if k > n {
        return Err(Error::Invalid(format!("{k} eigenpairs requested on {n} unknowns")));
    }
    let d = op.grid.dim as f64;
    let mut delta = s.shift_rel * 2.0 * d * op.h * op.h / (op.grid.dx * op.grid.dx);
    let mut chol = SkylineCholesky::factor(&op.matrix, delta);
    for _ in 0..3 {
        if chol.is_ok() {
            break;
        }
        delta *= 100.0;
        chol = SkylineCholesky::factor(&op.matrix, delta);
    }
    let chol = chol?;
    let ritz = largest_eigenpairs(
        n,
        k,
        |x, y| {
            y.copy_from_slice(x);
            chol.solve_in_place(y);
        },
        &s.lanczos,
    )?;

    // One more inverse iteration damps the roundoff left by reorthogonalization
    // on steep rows, which the energy form would otherwise amplify. Then
    // Rayleigh–Ritz on that span with the energy form.
    let psi: Vec<Vec<f64>> = ritz
        .vectors
        .iter()
        .map(|y| {
            let mut z = y.clone();
            chol.solve_in_place(&mut z);
            let nz = z.iter().map(|v| v * v).sum::<f64>().sqrt();
            z.iter_mut().for_each(|v| *v /= nz);
            op.to_nodal(&z)
        })
        .collect();
    let mut g = DMatrix::zeros(k, k);
    let mut b = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..=i {
            g[(i, j)] = op.inner(&psi[i], &psi[j]);
            g[(j, i)] = g[(i, j)];
            b[(i, j)] = op.energy(&psi[i], &psi[j]);
            b[(j, i)] = b[(i, j)];
        }
    }
    let (values, coeffs) = if k > 0 {
        let l = g.cholesky().ok_or(Error::Invalid("Ritz vectors are linearly dependent".into()))?.l();
        let linv = l.clone().try_inverse().ok_or(Error::Invalid("singular Gram matrix".into()))?;
        let c = &linv * &b * linv.transpose();
        let c = (&c + c.transpose()) * 0.5;
        let eig = SymmetricEigen::new(c);
        let coeffs = linv.transpose() * &eig.eigenvectors;
        (eig.eigenvalues, coeffs)
    } else {
        (nalgebra::DVector::zeros(0), DMatrix::zeros(0, 0))
    };
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &c| values[a].total_cmp(&values[c]));

    let norm = op.norm();
    let mut eigenvalues = Vec::with_capacity(k);
    let mut eigenvectors = Vec::with_capacity(k);
    let mut residual_norms = Vec::with_capacity(k);
    for &c in &order {
        let mut v = vec![0.0; n];
        for (i, p) in psi.iter().enumerate() {
            let w = coeffs[(i, c)];
            for (vi, pi) in v.iter_mut().zip(p) {
                *vi += w * pi;
            }
        }
        let (mx, mn) = v.iter().fold((f64::MIN, f64::MAX), |(a, b), &x| (a.max(x), b.min(x)));
        if -mn > mx {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        let lambda = values[c].max(0.0);
        let y = op.from_nodal(&v);
        let ay = op.apply(&y);
        let res = ay.iter().zip(&y).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
        if res > 1e-8 * norm {
            return Err(Error::NoConvergence { restarts: ritz.restarts, converged: eigenvalues.len(), wanted: k });
        }
        eigenvalues.push(lambda);
        eigenvectors.push(v);
        residual_norms.push(res);
    }
    let mut result = SpectralResult {
        eigenvalues,
        eigenvectors,
        residual_norms,
        m_small: None,
        n_dofs: n,
        matrix_norm: norm,
        h: op.h,
        bc: op.bc,
        form_degree: op.form_degree,
    };
    result.m_small = count_small(&result, nu(op.h, DEFAULT_NU_EXPONENT)).ok();
    Ok(result)
}

/// Number of eigenvalues ≤ ν. Inconclusive when every computed eigenvalue
/// is below ν and the spectrum is not complete.
pub fn count_small(r: &SpectralResult, nu: f64) -> Result<usize> {
    let m = r.eigenvalues.iter().filter(|&&l| l <= nu).count();
    if m == r.eigenvalues.len() && m < r.n_dofs {
        return Err(Error::Inconclusive(m));
    }
    Ok(m)
}

/// Count small eigenvalues, doubling the number of computed pairs until the
/// count is conclusive.
pub fn count_small_auto(
    op: &DiscreteOperator,
    nu: f64,
    k0: usize,
    s: &EigenSettings,
) -> Result<(usize, SpectralResult)> {
    let mut k = k0.max(1).min(op.n());
    loop {
        let r = smallest_eigenpairs(op, k, s)?;
        match count_small(&r, nu) {
            Ok(m) => return Ok((m, r)),
            Err(Error::Inconclusive(_)) if k < op.n() => k = (2 * k).min(op.n()),
            Err(e) => return Err(e),
        }
    }
}

/// Exit rate λ = λ₁/(2h) of the process.
pub fn generator_rate(lambda1: f64, h: f64) -> f64 {
    lambda1 / (2.0 * h)
}

/// QSD density ∝ u₁·e^{-f/h} at the nodes, normalized in the trapezoid rule.
pub fn qsd_density(op: &DiscreteOperator, u1: &[f64]) -> Result<Vec<f64>> {
    let mx = u1.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let mn = u1.iter().copied().fold(f64::INFINITY, f64::min);
    let sign = if u1.iter().copied().fold(f64::MIN, f64::max) >= -mn { 1.0 } else { -1.0 };
    let worst = u1.iter().map(|&x| sign * x).fold(f64::INFINITY, f64::min);
    if worst < -1e-8 * mx {
        return Err(Error::Sign(worst / mx));
    }
    let rho: Vec<f64> =
        u1.iter().zip(&op.f_nodes).map(|(&u, &f)| (sign * u).max(0.0) * (-f / op.h).exp()).collect();
    let z = op.inner(&rho, &vec![1.0; rho.len()]);
    Ok(rho.into_iter().map(|r| r / z).collect())
}

/// A density on ∂Ω sampled at quadrature points; 1D: two point masses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDensity {
    pub points: Vec<Point>,
    /// Angle in 2D, 0/1 for the endpoints in 1D.
    pub params: Vec<f64>,
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
}

impl BoundaryDensity {
    /// Normalize nonnegative samples; negatives up to 1e-6 of the total
    /// mass are clipped.
    pub fn from_samples(points: Vec<Point>, params: Vec<f64>, values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = values.iter().zip(&weights).map(|(v, w)| v.abs() * w).sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Invalid("boundary density has no mass".into()));
        }
        let neg: f64 = values.iter().zip(&weights).filter(|(v, _)| **v < 0.0).map(|(v, w)| -v * w).sum();
        if neg > 1e-6 * total {
            return Err(Error::NegativeMass(neg / total));
        }
        let pos: f64 = values.iter().zip(&weights).map(|(v, w)| v.max(0.0) * w).sum();
        let values = values.into_iter().map(|v| v.max(0.0) / pos).collect();
        Ok(BoundaryDensity { points, params, values, weights })
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// L¹ distance to a density on the same samples.
    pub fn l1_distance(&self, other: &BoundaryDensity) -> f64 {
        self.values.iter().zip(&other.values).zip(&self.weights).map(|((a, b), w)| (a - b).abs() * w).sum()
    }

    /// Probability of each of `bins` equal slices of the parameter range
    /// (angle in 2D). In 1D the two masses are returned.
    pub fn bin_masses(&self, bins: usize) -> Vec<f64> {
        if self.points.len() == 2 && self.params == [0.0, 1.0] {
            return self.values.iter().zip(&self.weights).map(|(v, w)| v * w).collect();
        }
        let mut out = vec![0.0; bins];
        let tau = std::f64::consts::TAU;
        for ((t, v), w) in self.params.iter().zip(&self.values).zip(&self.weights) {
            let b = ((t.rem_euclid(tau) / tau) * bins as f64) as usize;
            out[b.min(bins - 1)] += v * w;
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("param,x,y,density,weight\n");
        for i in 0..self.values.len() {
            let p = self.points[i];
            let _ = writeln!(s, "{},{},{},{:.12e},{:.12e}", self.params[i], p[0], p[1], self.values[i], self.weights[i]);
        }
        s
    }
}

fn lattice_value(grid: &Grid, phi: &[f64], i: isize, j: isize) -> f64 {
    grid.dof_at(i, j).map_or(0.0, |d| phi[d])
}

fn bilinear(grid: &Grid, phi: &[f64], p: &Point) -> f64 {
    let u = (p[0] - grid.origin[0]) / grid.dx;
    let v = (p[1] - grid.origin[1]) / grid.dx;
    let (i, j) = (u.floor(), v.floor());
    let (a, b) = (u - i, v - j);
    let (i, j) = (i as isize, j as isize);
    (1.0 - a) * (1.0 - b) * lattice_value(grid, phi, i, j)
        + a * (1.0 - b) * lattice_value(grid, phi, i + 1, j)
        + (1.0 - a) * b * lattice_value(grid, phi, i, j + 1)
        + a * b * lattice_value(grid, phi, i + 1, j + 1)
}

/// Normalized `-∂ₙ(e^{-f/h}u₁)` on ∂Ω from a Dirichlet ground state, by
/// second-order one-sided differences along the inward normal.
pub fn exit_density_pde(op: &DiscreteOperator, u1: &[f64]) -> Result<BoundaryDensity> {
    if op.bc != Bc::Dirichlet || op.form_degree != 0 {
        return Err(Error::Invalid("exit density needs a Dirichlet 0-form solve".into()));
    }
    let phi: Vec<f64> = u1.iter().zip(&op.f_nodes).map(|(&u, &f)| u * (-f / op.h).exp()).collect();
    let grid = &op.grid;
    let dx = grid.dx;
    match grid.region {
        Region::Interval { lo, hi } => {
            let n = phi.len();
            let left = (4.0 * phi[0] - phi[1]) / (2.0 * dx);
            let right = (4.0 * phi[n - 1] - phi[n - 2]) / (2.0 * dx);
            BoundaryDensity::from_samples(
                vec![[lo, 0.0], [hi, 0.0]],
                vec![0.0, 1.0],
                vec![left, right],
                vec![1.0, 1.0],
            )
        }
        Region::Disc { .. } => {
            let (s1, s2) = (2.0 * dx, 3.0 * dx);
            let w1 = s2 / (s1 * (s2 - s1));
            let w2 = -s1 / (s2 * (s2 - s1));
            let samples = grid.region.boundary_samples(BOUNDARY_SAMPLES);
            let mut values = Vec::with_capacity(samples.len());
            for s in &samples {
                let at = |t: f64| [s.point[0] - t * s.normal[0], s.point[1] - t * s.normal[1]];
                values.push(w1 * bilinear(grid, &phi, &at(s1)) + w2 * bilinear(grid, &phi, &at(s2)));
            }
            BoundaryDensity::from_samples(
                samples.iter().map(|s| s.point).collect(),
                samples.iter().map(|s| s.param).collect(),
                values,
                samples.iter().map(|s| s.weight).collect(),
            )
        }
    }
}

impl SpectralResult {
    pub fn eigenvalues_csv(&self) -> String {
        let mut s = String::from("index,eigenvalue,residual\n");
        for (k, (l, r)) in self.eigenvalues.iter().zip(&self.residual_norms).enumerate() {
            let _ = writeln!(s, "{},{:.17e},{:.6e}", k + 1, l, r);
        }
        s
    }

    pub fn eigenvector_csv(&self, grid: &Grid, k: usize) -> String {
        let mut s = String::from("x,y,value\n");
        for (p, v) in grid.coords.iter().zip(&self.eigenvectors[k]) {
            let _ = writeln!(s, "{},{},{:.12e}", p[0], p[1], v);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::operator::assemble_witten0;
    use crate::potential::{Potential, ScalarField};
    use crate::Mat2;

    struct Zero;
    impl ScalarField for Zero {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, _: &Point) -> f64 {
            0.0
        }
        fn gradient(&self, _: &Point) -> Point {
            [0.0; 2]
        }
        fn hessian(&self, _: &Point) -> Mat2 {
            [[0.0; 2]; 2]
        }
    }

    #[test]
    fn free_dirichlet_laplacian() {
        let g = build_grid(&Region::interval(0.0, 1.0), 0.02, Bc::Dirichlet).unwrap();
        let op = assemble_witten0(&Zero, &g, 1.0).unwrap();
        let r = smallest_eigenpairs(&op, 4, &EigenSettings::default()).unwrap();
        let dx: f64 = 0.02;
        for (k, l) in r.eigenvalues.iter().enumerate() {
            let exact = (2.0 / dx).powi(2) * ((k + 1) as f64 * std::f64::consts::PI * dx / 2.0).sin().powi(2);
            assert!((l - exact).abs() < 1e-9 * exact, "{l} vs {exact}");
        }
    }

    #[test]
    fn generator_rate_dictionary() {
        assert_eq!(generator_rate(0.0, 0.3), 0.0);
        assert!((generator_rate(0.4, 0.2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_doublewell_exits_evenly() {
        let f = Potential::doublewell1d();
        let g = build_grid(&Region::interval(-1.0, 1.0), 1.0 / 400.0, Bc::Dirichlet).unwrap();
        let op = assemble_witten0(&f, &g, 0.2).unwrap();
        let r = smallest_eigenpairs(&op, 2, &EigenSettings::default()).unwrap();
        let d = exit_density_pde(&op, &r.eigenvectors[0]).unwrap();
        assert!((d.values[0] - 0.5).abs() < 1e-8 && (d.values[1] - 0.5).abs() < 1e-8);
        let q = qsd_density(&op, &r.eigenvectors[0]).unwrap();
        assert!((op.inner(&q, &vec![1.0; q.len()]) - 1.0).abs() < 1e-12);
    }
}
