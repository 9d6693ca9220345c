//! Composite steps shared by the command-line tool, the browser demo and the
//! acceptance run.

use serde::{Deserialize, Serialize};

use crate::domain::{DomainPair, Region};
use crate::error::Result;
use crate::grid::{build_grid, Bc, GridPolicy};
use crate::mc::QsdSampler;
use crate::operator::{assemble_witten0, assemble_witten1_1d, DiscreteOperator};
use crate::potential::{boundary_critical_points, ScalarField};
use crate::spectra::{count_small_auto, exit_density_pde, qsd_density, smallest_eigenpairs, BoundaryDensity, EigenSettings, SpectralResult};

pub struct Solve {
    pub op: DiscreteOperator,
    pub result: SpectralResult,
}

/// 0-form solve on `region` with the spacing chosen by `policy`.
pub fn solve0(
    f: &dyn ScalarField,
    region: &Region,
    bc: Bc,
    h: f64,
    policy: &GridPolicy,
    k: usize,
    s: &EigenSettings,
) -> Result<Solve> {
    let (dx, warning) = policy.spacing(f, region, h);
    let grid = build_grid(region, dx, bc)?;
    let mut op = assemble_witten0(f, &grid, h)?;
    if op.warning.is_none() {
        op.warning = warning;
    }
    let result = smallest_eigenpairs(&op, k.min(op.n()), s)?;
    Ok(Solve { op, result })
}

/// Small-eigenvalue counts at one h.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub h: f64,
    pub nu: f64,
    pub m0_neumann_minus: usize,
    /// 1D only.
    pub m1_neumann_minus: Option<usize>,
    pub m0_dirichlet_plus: usize,
    /// 1D: Dirichlet 1-form on the shell; 2D: number of local minima of
    /// f|∂Ω₊ with positive normal derivative.
    pub m1_dirichlet_shell: usize,
    pub eigenvalues_neumann_minus: Vec<f64>,
    pub eigenvalues_dirichlet_plus: Vec<f64>,
}

/// Boundary minima of f|∂Ω with ∂ₙf > 0.
pub fn boundary_minimum_count(f: &dyn ScalarField, region: &Region) -> usize {
    boundary_critical_points(f, region)
        .iter()
        .filter(|c| c.index == 0 && c.normal_derivative.is_some_and(|d| d > 0.0))
        .count()
}

pub fn spectral_counts(
    f: &dyn ScalarField,
    pair: &DomainPair,
    h: f64,
    policy: &GridPolicy,
    nu: f64,
    s: &EigenSettings,
) -> Result<Counts> {
    let count0 = |region: &Region, bc: Bc| -> Result<(usize, SpectralResult)> {
        let (dx, _) = policy.spacing(f, region, h);
        let op = assemble_witten0(f, &build_grid(region, dx, bc)?, h)?;
        count_small_auto(&op, nu, 4, s)
    };
    let (m0n, rn) = count0(&pair.minus, Bc::Neumann)?;
    let (m0d, rd) = count0(&pair.plus, Bc::Dirichlet)?;
    let (m1n, m1d) = if pair.dim() == 1 {
        let count1 = |region: &Region, bc: Bc| -> Result<usize> {
            let (dx, _) = policy.spacing(f, region, h);
            Ok(count_small_auto(&assemble_witten1_1d(f, region, dx, bc, h)?, nu, 4, s)?.0)
        };
        let m1n = count1(&pair.minus, Bc::Neumann)?;
        let mut m1d = 0;
        for r in pair.shell_intervals()? {
            m1d += count1(&r, Bc::Dirichlet)?;
        }
        (Some(m1n), m1d)
    } else {
        (None, boundary_minimum_count(f, &pair.plus))
    };
    Ok(Counts {
        h,
        nu,
        m0_neumann_minus: m0n,
        m1_neumann_minus: m1n,
        m0_dirichlet_plus: m0d,
        m1_dirichlet_shell: m1d,
        eigenvalues_neumann_minus: rn.eigenvalues,
        eigenvalues_dirichlet_plus: rd.eigenvalues,
    })
}

/// Dirichlet solve on Ω₊ with the derived QSD, its sampler and the PDE exit
/// density.
pub struct QsdSetup {
    pub solve: Solve,
    pub density: Vec<f64>,
    pub sampler: QsdSampler,
    pub exit_density: BoundaryDensity,
}

impl QsdSetup {
    pub fn lambda1(&self) -> f64 {
        self.solve.result.eigenvalues[0]
    }
}

pub fn qsd_setup(f: &dyn ScalarField, omega_plus: &Region, h: f64, policy: &GridPolicy, s: &EigenSettings) -> Result<QsdSetup> {
    let solve = solve0(f, omega_plus, Bc::Dirichlet, h, policy, 2, s)?;
    let u1 = &solve.result.eigenvectors[0];
    let density = qsd_density(&solve.op, u1)?;
    let sampler = QsdSampler::new(&solve.op.grid, &density)?;
    let exit_density = exit_density_pde(&solve.op, u1)?;
    Ok(QsdSetup { solve, density, sampler, exit_density })
}
