//! Exponentially fitted assembly of boundary Witten Laplacians.
//!
//! With `K` the stiffness matrix and `M` the lumped mass, the operator is the
//! symmetric matrix `A = M^{-1/2} K M^{-1/2}`. On every lattice edge
//! `K_ij = -ω` and `K_ii` collects `ω·e^{(f_i - f_j)/h}`, where
//! `ω = h²·Δx^{d-2}`. Interior entries of `A` are therefore the usual
//! `-h²/Δx²` and, for Neumann conditions, `K` annihilates `e^{-f/h}` exactly.

use crate::domain::Region;
use crate::error::{Error, Result};
use crate::grid::{build_grid, Bc, Grid};
use crate::potential::ScalarField;
use crate::sparse::CsrMatrix;
use crate::{Mat2, Point};

/// Exponents are clamped here to stay finite on steep fields.
pub const EXP_CLAMP: f64 = 700.0;

fn ex(t: f64) -> f64 {
    t.min(EXP_CLAMP).exp()
}

/// `-f`, used for 1-forms in 1D.
struct Neg<'a>(&'a dyn ScalarField);

impl ScalarField for Neg<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value(&self, x: &Point) -> f64 {
        -self.0.value(x)
    }
    fn gradient(&self, x: &Point) -> Point {
        let g = self.0.gradient(x);
        [-g[0], -g[1]]
    }
    fn hessian(&self, x: &Point) -> Mat2 {
        let m = self.0.hessian(x);
        [[-m[0][0], -m[0][1]], [-m[1][0], -m[1][1]]]
    }
}

/// Diagonal contribution of a Dirichlet cut edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutTerm {
    pub dof: usize,
    /// `(ω/θ)·e^{(f_i - f_b)/h}`.
    pub coeff: f64,
}

#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    pub matrix: CsrMatrix,
    pub grid: Grid,
    pub bc: Bc,
    pub form_degree: u8,
    pub h: f64,
    /// Field at the dofs after subtracting `f_shift` (for 1-forms: of −f).
    pub f_nodes: Vec<f64>,
    pub f_shift: f64,
    pub omega: f64,
    pub cut_terms: Vec<CutTerm>,
    /// Set when Δx exceeds h/(2 max|∇f|).
    pub warning: Option<String>,
}

/// Zero-form Witten Laplacian of `f` on `grid` with the grid's boundary
/// condition.
pub fn assemble_witten0(f: &dyn ScalarField, grid: &Grid, h: f64) -> Result<DiscreteOperator> {
    assemble(f, grid, h, 0)
}

/// One-form Witten Laplacian on an interval, realized as the zero-form
/// operator of −f with the other boundary condition.
pub fn assemble_witten1_1d(
    f: &dyn ScalarField,
    region: &Region,
    spacing: f64,
    bc: Bc,
    h: f64,
) -> Result<DiscreteOperator> {
    if f.dim() != 1 || region.dim() != 1 {
        return Err(Error::Dimension { expected: 1, got: f.dim().max(region.dim()) });
    }
    let grid = build_grid(region, spacing, bc.swapped())?;
    let mut op = assemble(&Neg(f), &grid, h, 1)?;
    op.bc = bc;
    Ok(op)
}

fn assemble(f: &dyn ScalarField, grid: &Grid, h: f64, degree: u8) -> Result<DiscreteOperator> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Invalid(format!("h = {h}")));
    }
    if f.dim() != grid.dim {
        return Err(Error::Dimension { expected: grid.dim, got: f.dim() });
    }
    grid.check_resolution()?;
    let n = grid.n_dofs();
    let raw: Vec<f64> = grid.coords.iter().map(|p| f.value(p)).collect();
    let fb: Vec<f64> = grid.cut_edges.iter().map(|c| f.value(&c.point)).collect();
    let shift = raw.iter().chain(&fb).copied().fold(f64::INFINITY, f64::min);
    if !shift.is_finite() {
        return Err(Error::Invalid("non-finite potential on the grid".into()));
    }
    let fv: Vec<f64> = raw.iter().map(|v| v - shift).collect();
    let omega = h * h * grid.dx.powi(grid.dim as i32 - 2);

    let mut diag = vec![0.0; n];
    for &(i, j) in &grid.edges {
        diag[i] += omega * ex((fv[i] - fv[j]) / h);
        diag[j] += omega * ex((fv[j] - fv[i]) / h);
    }
    let mut cut_terms = Vec::with_capacity(grid.cut_edges.len());
    for (c, &b) in grid.cut_edges.iter().zip(&fb) {
        let coeff = omega / c.theta * ex((fv[c.dof] - (b - shift)) / h);
        diag[c.dof] += coeff;
        cut_terms.push(CutTerm { dof: c.dof, coeff });
    }

    let s: Vec<f64> = grid.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut trip = Vec::with_capacity(n + 2 * grid.edges.len());
    for i in 0..n {
        trip.push((i, i, diag[i] * s[i] * s[i]));
    }
    for &(i, j) in &grid.edges {
        let v = -omega * s[i] * s[j];
        trip.push((i, j, v));
        trip.push((j, i, v));
    }

    let gmax = grid.coords.iter().map(|p| f.gradient(p)).map(|g| g[0].hypot(g[1])).fold(0.0, f64::max);
    let warning = (gmax > 0.0 && grid.dx > h / (2.0 * gmax)).then(|| {
        format!("consistency: dx = {:.3e} exceeds h/(2 max|grad f|) = {:.3e}", grid.dx, h / (2.0 * gmax))
    });

    Ok(DiscreteOperator {
        matrix: CsrMatrix::from_triplets(n, trip),
        grid: grid.clone(),
        bc: grid.bc,
        form_degree: degree,
        h,
        f_nodes: fv,
        f_shift: shift,
        omega,
        cut_terms,
        warning,
    })
}

/// Refuse `h` when `e^{-2κ/h}` drowns in double-precision roundoff.
pub fn check_h_range(kappa: f64, h: f64) -> Result<()> {
    let scale = (-2.0 * kappa / h).exp();
    if scale < 1e-12 {
        return Err(Error::HOutOfRange { h, scale });
    }
    Ok(())
}

impl DiscreteOperator {
    pub fn n(&self) -> usize {
        self.matrix.n
    }

    pub fn norm(&self) -> f64 {
        self.matrix.norm_inf()
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        self.matrix.mul(y)
    }

    /// Nodal values ψ from the symmetric coordinates y = M^{1/2} ψ.
    pub fn to_nodal(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.grid.mass).map(|(v, m)| v / m.sqrt()).collect()
    }

    pub fn from_nodal(&self, psi: &[f64]) -> Vec<f64> {
        psi.iter().zip(&self.grid.mass).map(|(v, m)| v * m.sqrt()).collect()
    }

    /// `M^{-1} K ψ`, the discrete operator acting on nodal values.
    pub fn nodal_apply(&self, psi: &[f64]) -> Vec<f64> {
        let y = self.apply(&self.from_nodal(psi));
        self.to_nodal(&y)
    }

    /// `aᵀ K b` for nodal vectors, written as a sum of edge terms so that it
    /// stays accurate when the result is far below `‖K‖`.
    pub fn energy(&self, a: &[f64], b: &[f64]) -> f64 {
        let h2 = 2.0 * self.h;
        let f = &self.f_nodes;
        let mut s = 0.0;
        for &(i, j) in &self.grid.edges {
            let p = ex((f[i] - f[j]) / h2);
            let q = ex((f[j] - f[i]) / h2);
            s += self.omega * (a[i] * p - a[j] * q) * (b[i] * p - b[j] * q);
        }
        for c in &self.cut_terms {
            s += c.coeff * a[c.dof] * b[c.dof];
        }
        s
    }

    /// Mass inner product of nodal vectors.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(&self.grid.mass).map(|((x, y), m)| x * y * m).sum()
    }

    /// Nodal `e^{-f/h}` of the normalized field.
    pub fn ground_state(&self) -> Vec<f64> {
        self.f_nodes.iter().map(|v| (-v / self.h).exp()).collect()
    }

    pub fn to_matrix_market(&self) -> String {
        self.matrix.to_matrix_market()
    }
}
