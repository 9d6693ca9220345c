use exitlab::grid::GridPolicy;
use exitlab::spectra::{count_small_auto, EigenSettings};
use exitlab::*;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn dense_eigenvalues(op: &DiscreteOperator) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(op.matrix.to_dense()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Bidiagonal edge factor `B` of a 1D Dirichlet operator, `BᵀB = A`, built
/// from the off-diagonal entries and the nodal field. Its smallest singular
/// value resolves λ₁ to relative precision, unlike a dense solve of `A`
/// whose error floor is eps·‖A‖.
fn edge_factor(op: &DiscreteOperator) -> DMatrix<f64> {
    let (n, a) = (op.n(), &op.matrix);
    let mut b = DMatrix::zeros(n + 1, n);
    let mut rest: Vec<f64> = (0..n).map(|i| a.get(i, i)).collect();
    for i in 0..n - 1 {
        let c = -a.get(i, i + 1);
        let rho = ((op.f_nodes[i] - op.f_nodes[i + 1]) / (2.0 * op.h)).exp();
        b[(i + 1, i)] = c.sqrt() * rho;
        b[(i + 1, i + 1)] = -c.sqrt() / rho;
        rest[i] -= c * rho * rho;
        rest[i + 1] -= c / (rho * rho);
    }
    b[(0, 0)] = rest[0].sqrt();
    b[(n, n - 1)] = rest[n - 1].sqrt();
    b
}

#[test]
fn doublewell_dirichlet_matches_dense_oracle() {
    let f = Potential::doublewell1d();
    let g = build_grid(&Region::interval(-1.0, 1.0), 1.0 / 400.0, Bc::Dirichlet).unwrap();
    let op = assemble_witten0(&f, &g, 0.2).unwrap();
    let ours = smallest_eigenpairs(&op, 3, &EigenSettings::default()).unwrap().eigenvalues;

    let b = edge_factor(&op);
    let recon = (b.transpose() * &b - op.matrix.to_dense()).abs().max();
    assert!(recon <= 1e-14 * op.norm(), "factor residual {recon}");
    let smin = b.svd(false, false).singular_values.iter().fold(f64::INFINITY, |m, &s| m.min(s));
    let rel = (ours[0] / (smin * smin) - 1.0).abs();
    assert!(rel <= 1e-10, "{} vs {} (rel {rel:e})", ours[0], smin * smin);

    // The plain dense solve agrees to its own absolute floor.
    let dense = dense_eigenvalues(&op);
    for k in 0..3 {
        assert!((ours[k] - dense[k]).abs() <= 1e-14 * op.norm() * op.n() as f64);
    }
}

#[test]
fn flatbottom_shell_one_forms_have_a_zero_mode_each() {
    let f = Potential::flatbottom1d();
    let shells = f.default_domains().shell_intervals().unwrap();
    let (Region::Interval { hi: a, .. }, Region::Interval { lo: b, .. }) = (&shells[0], &shells[1]) else {
        panic!("shell should be two intervals")
    };
    assert!(a < b);
    for r in &shells {
        let op = assemble_witten1_1d(&f, r, 1e-3, Bc::Dirichlet, 0.1).unwrap();
        assert_eq!(op.bc, Bc::Dirichlet);
        assert_eq!(op.grid.bc, Bc::Neumann);
        // e^{f/h} spans the kernel of the swapped operator.
        let psi: Vec<f64> = op.grid.coords.iter().map(|x| (f.value(x) / 0.1).exp()).collect();
        let y = op.from_nodal(&psi);
        let ay = op.apply(&y);
        let (na, ny) = (ay.iter().map(|v| v * v).sum::<f64>().sqrt(), y.iter().map(|v| v * v).sum::<f64>().sqrt());
        assert!(na <= 1e-12 * op.norm() * ny, "{na:e}");
        let ev = smallest_eigenpairs(&op, 2, &EigenSettings::default()).unwrap().eigenvalues;
        assert!(ev[0] <= 1e-12 * op.norm() && ev[1] > 1e-3, "{ev:?}");
    }
}

#[test]
fn doublewell_neumann_one_form_counts_one_saddle() {
    let f = Potential::doublewell1d();
    let minus = f.default_domains().minus;
    let h = 0.15;
    let (dx, _) = GridPolicy::default().spacing(&f, &minus, h);
    let op = assemble_witten1_1d(&f, &minus, dx, Bc::Neumann, h).unwrap();
    let nu = exitlab::nu(h, DEFAULT_NU_EXPONENT);
    let dense = dense_eigenvalues(&op);
    assert_eq!(dense.iter().filter(|&&l| l <= nu).count(), 1, "{:?}", &dense[..3]);
    assert_eq!(count_small_auto(&op, nu, 4, &EigenSettings::default()).unwrap().0, 1);
}

#[test]
fn consistency_is_second_order() {
    let f = Potential::harmonic1d();
    let h = 0.5;
    // Not e^{-x²}, which is the exact ground state here.
    let u = |x: f64| x.cos() + x / 3.0;
    let exact = |x: f64| h * h * x.cos() + (x * x - h) * u(x);
    let err = |dx: f64| {
        let g = build_grid(&Region::interval(-1.0, 1.0), dx, Bc::Dirichlet).unwrap();
        let op = assemble_witten0(&f, &g, h).unwrap();
        assert!(op.warning.is_none());
        let psi: Vec<f64> = g.coords.iter().map(|x| u(x[0])).collect();
        let a = op.nodal_apply(&psi);
        g.coords.iter().zip(&a).filter(|(x, _)| x[0].abs() <= 0.5).map(|(x, v)| (v - exact(x[0])).abs()).fold(0.0, f64::max)
    };
    let (e1, e2) = (err(1.0 / 50.0), err(1.0 / 100.0));
    let order = (e1 / e2).log2();
    assert!(order >= 1.9, "errors {e1:e} {e2:e}, order {order}");
}

#[test]
fn dirichlet_eigenvalues_decrease_with_the_domain() {
    for f in [Potential::doublewell1d(), Potential::Triplewell1d(Default::default())] {
        let pair = f.default_domains();
        let ev = |r: &Region| {
            let op = assemble_witten0(&f, &build_grid(r, 1e-3, Bc::Dirichlet).unwrap(), 0.2).unwrap();
            smallest_eigenpairs(&op, 3, &EigenSettings::default()).unwrap().eigenvalues
        };
        let (small, large) = (ev(&pair.minus), ev(&pair.plus));
        for k in 0..3 {
            assert!(small[k] >= large[k], "{}: {small:?} vs {large:?}", f.name());
        }
    }
}

#[test]
fn matrix_market_round_trip() {
    let f = Potential::radial2d();
    let g = build_grid(&f.default_domains().plus, 0.1, Bc::Dirichlet).unwrap();
    let op = assemble_witten0(&f, &g, 0.3).unwrap();
    let text = op.to_matrix_market();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("%%MatrixMarket matrix coordinate real symmetric"));
    let dims: Vec<usize> = lines.next().unwrap().split_whitespace().map(|t| t.parse().unwrap()).collect();
    assert_eq!(&dims[..2], &[op.n(), op.n()]);
    let mut seen = 0;
    for l in lines {
        let t: Vec<&str> = l.split_whitespace().collect();
        let (i, j, v): (usize, usize, f64) = (t[0].parse().unwrap(), t[1].parse().unwrap(), t[2].parse().unwrap());
        assert!(j <= i);
        assert_eq!(v, op.matrix.get(i - 1, j - 1));
        seen += 1;
    }
    assert_eq!(seen, dims[2]);
    let lower = (0..op.n()).map(|i| op.matrix.row(i).filter(|&(j, _)| j <= i).count()).sum::<usize>();
    assert_eq!(seen, lower);
}

#[test]
fn disc_grid_interior_stencil() {
    let f = Potential::radial2d();
    let g = build_grid(&f.default_domains().plus, 0.05, Bc::Dirichlet).unwrap();
    let h = 0.4;
    let op = assemble_witten0(&f, &g, h).unwrap();
    for i in 0..op.n() {
        for (j, v) in op.matrix.row(i).filter(|&(j, _)| j != i) {
            // Cut-cell masses only enter through the diagonal scaling.
            let expect = -op.omega / (g.mass[i] * g.mass[j]).sqrt();
            assert!((v - expect).abs() <= 4.0 * f64::EPSILON * expect.abs(), "{v} vs {expect}");
        }
    }
    assert!(!op.cut_terms.is_empty());
}

fn catalog_operator(idx: usize, h: f64, neumann: bool) -> DiscreteOperator {
    let f = &Potential::catalog()[idx];
    let region = f.default_domains().plus;
    let cells = if f.dim() == 1 { 80 } else { 20 };
    let bc = if neumann { Bc::Neumann } else { Bc::Dirichlet };
    let g = build_grid(&region, region.diameter() / cells as f64, bc).unwrap();
    assemble_witten0(f, &g, h).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn assembled_matrix_is_symmetric_and_psd(idx in 0usize..11, h in 0.1f64..1.0, neumann: bool) {
        let op = catalog_operator(idx, h, neumann);
        prop_assert_eq!(op.matrix.asymmetry(), 0.0);
        // Steep fields on coarse grids give diagonals spread over 150 orders
        // of magnitude, where dense QR eigensolvers return NaN. Cholesky of
        // A/‖A‖ + εI is backward stable there and exists iff λ_min > -ε‖A‖.
        let n = op.n();
        let shifted = op.matrix.to_dense() / op.norm() + DMatrix::<f64>::identity(n, n) * 1e-11;
        prop_assert!(shifted.cholesky().is_some());
    }

    #[test]
    fn neumann_kernel_is_the_ground_state(idx in 0usize..11, h in 0.05f64..1.0) {
        let op = catalog_operator(idx, h, true);
        let y = op.from_nodal(&op.ground_state());
        let ay = op.apply(&y);
        let norm = |v: &[f64]| v.iter().map(|t| t * t).sum::<f64>().sqrt();
        prop_assert!(norm(&ay) <= 1e-12 * op.norm() * norm(&y));
        prop_assert!(op.energy(&op.ground_state(), &op.ground_state()).abs() <= 1e-12 * op.norm() * op.inner(&op.ground_state(), &op.ground_state()));
    }
}
