use exitlab::agmon::*;
use exitlab::potential::Polynomial1d;
use exitlab::*;
use proptest::prelude::*;

fn node_at(g: &Grid, x: f64, y: f64) -> usize {
    (0..g.n_dofs())
        .min_by(|&a, &b| {
            let da = (g.coords[a][0] - x).hypot(g.coords[a][1] - y);
            let db = (g.coords[b][0] - x).hypot(g.coords[b][1] - y);
            da.total_cmp(&db)
        })
        .unwrap()
}

#[test]
fn radial_segment_matches_the_radial_integral() {
    // Inside the unit disc radial2d is e^{-1/(r²-1)²}, decreasing in r.
    let f = Potential::radial2d();
    let g = build_grid(&Region::disc([0.0, 0.0], 1.0), 0.01, Bc::Neumann).unwrap();
    let graph = agmon_graph(&f, &g, false);
    let (a, b) = (node_at(&g, 0.1, 0.0), node_at(&g, 0.9, 0.0));
    let (ra, rb) = (g.coords[a][0], g.coords[b][0]);
    assert!(g.coords[a][1].abs() < 1e-12 && g.coords[b][1].abs() < 1e-12);
    // Walk the axis edge by edge.
    let (mut i, mut sum, mut err) = (a, 0.0, 0.0);
    while i != b {
        let k = (graph.offsets[i]..graph.offsets[i + 1])
            .find(|&k| {
                let c = graph.coords[graph.targets[k]];
                c[1].abs() < 1e-12 && c[0] > graph.coords[i][0]
            })
            .unwrap();
        sum += graph.weights[k];
        err += graph.errors[k];
        i = graph.targets[k];
    }
    let exact = (f.value(&[ra, 0.0]) - f.value(&[rb, 0.0])).abs();
    assert!((sum - exact).abs() <= 2.0 * err + 1e-14, "{sum} vs {exact} (err {err:e})");
    // The graph distance cannot exceed the straight path.
    assert!(agmon_distance(&graph, &[a], &[b]) <= sum + 1e-15);
}

#[test]
fn monotone_segment_distance_is_the_value_difference() {
    let f = Potential::harmonic1d();
    let g = build_grid(&Region::interval(0.0, 1.0), 1e-3, Bc::Neumann).unwrap();
    let graph = agmon_graph(&f, &g, false);
    let (dist, err) = graph.dijkstra(&[node_at(&g, 0.1, 0.0)]);
    for x in [0.2, 0.5, 0.95] {
        let j = node_at(&g, x, 0.0);
        let exact = f.value(&g.coords[j]) - 0.005;
        assert!((dist[j] - exact).abs() <= 2.0 * err[j] + 1e-14, "{x}: {} vs {exact}", dist[j]);
    }
    let s = node_at(&g, 0.3, 0.0);
    assert_eq!(agmon_distance(&graph, &[s], &[s]), 0.0);
}

#[test]
fn doublewell_legs_and_refinement() {
    // x = -0.4 and y = 0.3 sit in different wells; the geodesic climbs to
    // the saddle at 0 monotonically from each side.
    let f = Potential::doublewell1d();
    let exact = 2.0 * f.value(&[0.0, 0.0]) - f.value(&[-0.4, 0.0]) - f.value(&[0.3, 0.0]);
    let mut last = f64::INFINITY;
    for dx in [1e-2, 5e-3, 2.5e-3, 1.25e-3] {
        let g = build_grid(&Region::interval(-1.0, 1.0), dx, Bc::Neumann).unwrap();
        let graph = agmon_graph(&f, &g, false);
        let d = agmon_distance(&graph, &[node_at(&g, -0.4, 0.0)], &[node_at(&g, 0.3, 0.0)]);
        let e = (d - exact).abs();
        assert!(e < last || e <= 1e-15, "dx {dx}: {e:e} after {last:e}");
        last = e;
    }
    assert!(last <= 1e-3);
}

#[test]
fn disconnected_nodes_are_at_infinity() {
    let graph = AgmonGraph {
        coords: vec![[0.0, 0.0], [1.0, 0.0], [5.0, 0.0]],
        offsets: vec![0, 1, 2, 2],
        targets: vec![1, 0],
        weights: vec![0.5, 0.5],
        errors: vec![0.0, 0.0],
    };
    assert_eq!(agmon_distance(&graph, &[0], &[1]), 0.5);
    assert_eq!(agmon_distance(&graph, &[0], &[2]), f64::INFINITY);
    assert_eq!(agmon_distance(&graph, &[0], &[2, 1]), 0.5);
}

#[test]
fn constant_field_has_zero_distances() {
    let f = Potential::Polynomial1d(Polynomial1d { coeffs: vec![2.0] });
    let g = build_grid(&Region::interval(0.0, 1.0), 0.25, Bc::Neumann).unwrap();
    let graph = agmon_graph(&f, &g, false);
    assert!(graph.weights.iter().all(|&w| w == 0.0));
    assert!(graph.dijkstra(&[0]).0.iter().all(|&d| d == 0.0));
}

#[test]
fn conddag_examples() {
    let h = Potential::harmonic1d();
    let r = check_conddag(&h, &h.default_domains(), 1e-3, 0.0).unwrap();
    assert!(r.ok && r.rhs == f64::NEG_INFINITY && r.lhs > 0.0);
    let ok = check_conddag(&Potential::FigOk1d, &Potential::FigOk1d.default_domains(), 1e-3, 0.0).unwrap();
    assert!(ok.ok && ok.lhs > ok.rhs, "{ok:?}");
    let bad = check_conddag(&Potential::FigNotok1d, &Potential::FigNotok1d.default_domains(), 1e-3, 0.0).unwrap();
    assert!(!bad.ok && bad.lhs < bad.rhs, "{bad:?}");
}

fn catalog_graph(idx: usize) -> (Grid, AgmonGraph) {
    let f = &Potential::catalog()[idx];
    let r = f.default_domains().minus;
    let cells = if f.dim() == 1 { 400.0 } else { 24.0 };
    let g = build_grid(&r, r.diameter() / cells, Bc::Neumann).unwrap();
    let graph = agmon_graph(f, &g, true);
    (g, graph)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distances_form_a_pseudometric(idx in 0usize..11, u in 0.0f64..1.0, v in 0.0f64..1.0, w in 0.0f64..1.0) {
        let (g, graph) = catalog_graph(idx);
        let pick = |t: f64| ((t * g.n_dofs() as f64) as usize).min(g.n_dofs() - 1);
        let (a, b, c) = (pick(u), pick(v), pick(w));
        prop_assert!(graph.weights.iter().all(|&x| x >= 0.0));
        let (da, _) = graph.dijkstra(&[a]);
        let (db, _) = graph.dijkstra(&[b]);
        let tol = 1e-12 * (1.0 + da[c] + db[c]);
        prop_assert!(da[c] <= da[b] + db[c] + tol);
        prop_assert!((da[b] - db[a]).abs() <= tol);
        prop_assert_eq!(da[a], 0.0);
    }
}
