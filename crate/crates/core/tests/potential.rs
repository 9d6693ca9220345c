use exitlab::potential::*;
use exitlab::{DomainPair, Point, Potential, Region, ScalarField};
use proptest::prelude::*;

const PROBE: f64 = 1e-4;

/// Centered difference of `g` along axis `k`, Richardson-extrapolated from
/// steps δ and δ/2 so the truncation error is O(δ⁴).
fn richardson(x: &Point, k: usize, g: impl Fn(&Point) -> Point) -> Point {
    let central = |d: f64| {
        let (mut a, mut b) = (*x, *x);
        a[k] += d;
        b[k] -= d;
        let (ga, gb) = (g(&a), g(&b));
        [(ga[0] - gb[0]) / (2.0 * d), (ga[1] - gb[1]) / (2.0 * d)]
    };
    let (c1, c2) = (central(PROBE), central(0.5 * PROBE));
    [(4.0 * c2[0] - c1[0]) / 3.0, (4.0 * c2[1] - c1[1]) / 3.0]
}

fn fd_gradient(f: &dyn ScalarField, x: &Point) -> Point {
    let mut g = [0.0; 2];
    for k in 0..f.dim() {
        g[k] = richardson(x, k, |p| [f.value(p), 0.0])[0];
    }
    g
}

fn fd_hessian(f: &dyn ScalarField, x: &Point) -> [[f64; 2]; 2] {
    let mut hm = [[0.0; 2]; 2];
    for k in 0..f.dim() {
        let col = richardson(x, k, |p| f.gradient(p));
        for i in 0..f.dim() {
            hm[i][k] = col[i];
        }
    }
    hm
}

/// Random points in Ω₊ of a catalog entry, from unit-square samples.
fn probe_point(p: &Potential, u: f64, v: f64) -> Point {
    match p.default_domains().plus {
        Region::Interval { lo, hi } => [lo + u * (hi - lo), 0.0],
        Region::Disc { center, radius } => {
            let (r, t) = (radius * u.sqrt(), std::f64::consts::TAU * v);
            [center[0] + r * t.cos(), center[1] + r * t.sin()]
        }
    }
}

/// Largest |∇f| and Hessian entry over a lattice of Ω₊.
fn derivative_scales(p: &Potential) -> (f64, f64) {
    let r = p.default_domains().plus;
    lattice_points(&r, r.diameter() / 200.0).iter().fold((0.0f64, 0.0f64), |(g, h), x| {
        let (gr, hm) = (p.gradient(x), p.hessian(x));
        (g.max(gr[0].abs()).max(gr[1].abs()), h.max(hm[0][0].abs()).max(hm[0][1].abs()).max(hm[1][1].abs()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn derivatives_match_finite_differences(idx in 0usize..11, u in 0.01f64..0.99, v in 0.0f64..1.0) {
        let p = &Potential::catalog()[idx];
        let x = probe_point(p, u, v);
        let (gs, hs) = derivative_scales(p);
        let (g, fg) = (p.gradient(&x), fd_gradient(p, &x));
        for k in 0..p.dim() {
            prop_assert!((g[k] - fg[k]).abs() <= 1e-6 * gs, "{} grad at {:?}: {:?} vs {:?}", p.name(), x, g, fg);
        }
        let (hm, fh) = (p.hessian(&x), fd_hessian(p, &x));
        for i in 0..p.dim() {
            for j in 0..p.dim() {
                prop_assert!((hm[i][j] - fh[i][j]).abs() <= 1e-6 * hs, "{} hess at {:?}: {:?} vs {:?}", p.name(), x, hm, fh);
            }
        }
    }

    #[test]
    fn loosening_tolerances_never_breaks_a_pass(idx in 0usize..8, s in 0.0f64..1.0) {
        let p = &Potential::catalog()[idx];
        let pair = p.default_domains();
        let tight = check_hypotheses(p, &pair, 2e-3, &HypTolerances::default()).unwrap();
        let loose = check_hypotheses(p, &pair, 2e-3, &HypTolerances::default().scaled(s)).unwrap();
        prop_assert!(!tight.hyp0_ok || loose.hyp0_ok);
        prop_assert!(!tight.hyp3_ok || loose.hyp3_ok);
        prop_assert!(!tight.morse_ok || loose.morse_ok);
        prop_assert!(!tight.distinctness_ok || loose.distinctness_ok);
        prop_assert!(!tight.cvmax_condition_ok || loose.cvmax_condition_ok);
    }
}

#[test]
fn evaluator_examples() {
    assert_eq!(eval_field(&Potential::harmonic1d(), &[0.0, 0.0]), (0.0, [0.0, 0.0], [[1.0, 0.0], [0.0, 0.0]]));
    let flat = Potential::flatbottom1d();
    for x in [-0.2, -0.1, 0.0, 0.13, 0.2] {
        let (v, g, hm) = eval_field(&flat, &[x, 0.0]);
        assert_eq!((v, g[0], hm[0][0]), (0.0, 0.0, 0.0));
    }
    let (v, g, _) = eval_field(&Potential::radial2d(), &[0.0, 0.0]);
    assert!((v - (-1.0f64).exp()).abs() < 1e-15);
    assert_eq!(g, [0.0, 0.0]);
}

fn interior(p: &Potential, r: &Region) -> Vec<CriticalPoint> {
    find_critical_points(p, r, 1e-3, &CritTolerances::default()).unwrap()
}

#[test]
fn critical_point_examples() {
    let c = interior(&Potential::harmonic1d(), &Region::interval(-1.0, 1.0));
    assert_eq!(c.len(), 1);
    assert!(c[0].location[0].abs() < 1e-12 && c[0].index == 0 && c[0].morse);

    let c = interior(&Potential::flatbottom1d(), &Region::interval(-1.0, 1.0));
    assert_eq!(c.len(), 1);
    assert_eq!(c[0].kind, CriticalKind::Component);
    assert!(!c[0].morse);
    let [a, b] = c[0].extent.unwrap();
    // e^{-w/d} is below the gradient tolerance a little outside [a1, b1].
    assert!(a[0] <= -0.2 && a[0] > -0.22 && b[0] >= 0.2 && b[0] < 0.22, "{a:?} {b:?}");

    // Roots of 4x(x² − 1/4), cross-checked against a dense sign scan of f′.
    let dw = Potential::doublewell1d();
    let c = interior(&dw, &Region::interval(-1.0, 1.0));
    let found: Vec<(f64, usize)> = c.iter().map(|c| (c.location[0], c.index)).collect();
    let scan: Vec<f64> = (0..20_000)
        .map(|k| -1.0 + (k as f64 + 0.5) * 1e-4)
        .filter(|&x| dw.gradient(&[x, 0.0])[0] * dw.gradient(&[x + 1e-4, 0.0])[0] < 0.0)
        .collect();
    assert_eq!(scan.len(), 3);
    assert_eq!(found.len(), 3);
    for (x, idx) in found {
        let expect = if x.abs() < 0.25 { (0.0, 1) } else { (0.5 * x.signum(), 0) };
        assert!((x - expect.0).abs() < 1e-10, "{x}");
        assert_eq!(idx, expect.1);
        assert!(scan.iter().any(|s| (s - x).abs() <= 2e-4));
    }
}

#[test]
fn boundary_point_examples() {
    let r = Potential::radial2d();
    let pair = r.default_domains();
    let minima: Vec<_> = boundary_critical_points(&r, &pair.plus).into_iter().filter(|c| c.index == 0).collect();
    assert_eq!(minima.len(), 1);
    assert!(minima[0].normal_derivative.unwrap() > 0.0);

    let h = boundary_critical_points(&Potential::harmonic1d(), &Region::interval(-1.0, 1.0));
    assert_eq!(h.len(), 2);
    assert!(h.iter().all(|c| c.normal_derivative.unwrap() > 0.0 && c.dirichlet_index == Some(1)));

    let d = boundary_critical_points(&Potential::doublewell1d(), &Region::interval(-1.0, 1.0));
    assert_eq!(d.iter().filter(|c| c.index == 0).count(), 2);
}

#[test]
fn hypothesis_examples() {
    let ok = Potential::Doublewell1d(Doublewell1d { tilt: 0.01, ..Default::default() });
    let r = check_hypotheses(&ok, &ok.default_domains(), 1e-3, &HypTolerances::default()).unwrap();
    assert!(r.hyp0_ok && r.hyp3_ok && r.morse_ok && r.distinctness_ok && r.cvmax_condition_ok, "{:?}", r.witnesses);
    assert!(r.kappa_f >= 0.0);

    let flat = Potential::flatbottom1d();
    let r = check_hypotheses(&flat, &flat.default_domains(), 1e-3, &HypTolerances::default()).unwrap();
    assert!(!r.morse_ok);
    assert!(r.hyp0_ok && r.hyp3_ok && r.distinctness_ok && r.cvmax_condition_ok, "{:?}", r.witnesses);

    let bad = Potential::FigNotok1d;
    let r = check_hypotheses(&bad, &bad.default_domains(), 1e-3, &HypTolerances::default()).unwrap();
    assert!(!r.cvmax_condition_ok);
    assert!(r.witnesses.iter().any(|w| w.check == "cvmax_condition"));
}

#[test]
fn kappa_and_cvmax_examples() {
    let plus = Region::interval(-1.0, 1.0);
    assert!((kappa(&Potential::harmonic1d(), &plus, 1e-3) - 0.5).abs() < 1e-14);
    assert!((kappa(&Potential::doublewell1d(), &plus, 1e-3) - 0.5625).abs() < 1e-12);
    assert_eq!(cvmax(&Potential::flatbottom1d(), &Region::interval(-0.6, 0.6), 1e-3).unwrap(), 0.0);
    let lin = Potential::Polynomial1d(Polynomial1d { coeffs: vec![0.0, 1.0] });
    assert!(matches!(cvmax(&lin, &plus, 1e-2), Err(exitlab::Error::EmptyCriticalSet)));
}

#[test]
fn generalized_counts_match_interior_counts() {
    // Morse 1D entries: minima inside Ω₋ equal minima inside Ω₊, and saddles
    // of Ω₊ are those of Ω₋ plus the Dirichlet index-1 points of the shell.
    for p in [Potential::harmonic1d(), Potential::doublewell1d(), Potential::Triplewell1d(Default::default())] {
        let pair: DomainPair = p.default_domains();
        let count = |r: &Region, i: usize| interior(&p, r).iter().filter(|c| c.index == i).count();
        assert_eq!(count(&pair.minus, 0), count(&pair.plus, 0), "{}", p.name());
        let shell_saddles: usize = pair.shell_intervals().unwrap().iter().map(|r| count(r, 1)).sum();
        assert_eq!(count(&pair.plus, 1), count(&pair.minus, 1) + shell_saddles);
    }
}
