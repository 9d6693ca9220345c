//! Agmon distances on lattice graphs and the sufficient condition comparing
//! them with the barrier heights.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::domain::DomainPair;
use crate::error::Result;
use crate::grid::{build_grid, Bc, Grid};
use crate::potential::{find_critical_points, CritTolerances, CriticalKind, HypothesisReport, ScalarField};
use crate::Point;

/// Lattice graph with edge weights `(|∇f(x_i)| + |∇f(x_j)|)/2·‖x_j − x_i‖`.
#[derive(Clone, Debug)]
pub struct AgmonGraph {
    pub coords: Vec<Point>,
    pub offsets: Vec<usize>,
    pub targets: Vec<usize>,
    pub weights: Vec<f64>,
    /// Trapezoid error estimate of each edge weight.
    pub errors: Vec<f64>,
}

pub fn agmon_graph(f: &dyn ScalarField, grid: &Grid, use_diagonals: bool) -> AgmonGraph {
    let n = grid.n_dofs();
    let g: Vec<f64> = grid.coords.iter().map(|p| f.gradient(p)).map(|v| v[0].hypot(v[1])).collect();
    let mut edges = grid.edges.clone();
    if use_diagonals && grid.dim == 2 {
        let nx = grid.shape[0];
        for (d, &l) in grid.dof_to_lattice.iter().enumerate() {
            let (i, j) = ((l % nx) as isize, (l / nx) as isize);
            for dj in [-1isize, 1] {
                if let Some(e) = grid.dof_at(i + 1, j + dj) {
                    edges.push((d.min(e), d.max(e)));
                }
            }
        }
    }
    let mut adj: Vec<Vec<(usize, f64, f64)>> = vec![Vec::new(); n];
    for &(i, j) in &edges {
        let (a, b) = (grid.coords[i], grid.coords[j]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
        let gm = f.gradient(&mid);
        let trap = 0.5 * (g[i] + g[j]);
        let w = trap * len;
        let err = 2.0 / 3.0 * (trap - gm[0].hypot(gm[1])).abs() * len;
        adj[i].push((j, w, err));
        adj[j].push((i, w, err));
    }
    let mut offsets = vec![0];
    let (mut targets, mut weights, mut errors) = (Vec::new(), Vec::new(), Vec::new());
    for row in adj {
        for (t, w, e) in row {
            targets.push(t);
            weights.push(w);
            errors.push(e);
        }
        offsets.push(targets.len());
    }
    AgmonGraph { coords: grid.coords.clone(), offsets, targets, weights, errors }
}

#[derive(PartialEq)]
struct Item(f64, usize);
impl Eq for Item {}
impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

impl AgmonGraph {
    pub fn n(&self) -> usize {
        self.coords.len()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.targets[r.clone()].iter().copied().zip(self.weights[r].iter().copied())
    }

    /// Multi-source shortest distances and the accumulated quadrature error
    /// along each shortest path. Unreachable nodes get +∞.
    pub fn dijkstra(&self, sources: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n();
        let mut dist = vec![f64::INFINITY; n];
        let mut err = vec![0.0; n];
        let mut heap = BinaryHeap::new();
        for &s in sources {
            dist[s] = 0.0;
            heap.push(Item(0.0, s));
        }
        while let Some(Item(d, i)) = heap.pop() {
            if d > dist[i] {
                continue;
            }
            for k in self.offsets[i]..self.offsets[i + 1] {
                let j = self.targets[k];
                let nd = d + self.weights[k];
                if nd < dist[j] {
                    dist[j] = nd;
                    err[j] = err[i] + self.errors[k];
                    heap.push(Item(nd, j));
                }
            }
        }
        (dist, err)
    }

    /// Largest per-edge error estimate.
    pub fn max_edge_error(&self) -> f64 {
        self.errors.iter().copied().fold(0.0, f64::max)
    }

    pub fn distance_csv(&self, dist: &[f64]) -> String {
        let mut s = String::from("x,y,distance\n");
        for (p, d) in self.coords.iter().zip(dist) {
            let _ = writeln!(s, "{},{},{:.12e}", p[0], p[1], d);
        }
        s
    }
}

/// `min over sources and targets` of the graph distance; +∞ if disconnected.
pub fn agmon_distance(graph: &AgmonGraph, sources: &[usize], targets: &[usize]) -> f64 {
    let (d, _) = graph.dijkstra(sources);
    targets.iter().map(|&t| d[t]).fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConddagResult {
    pub ok: bool,
    pub lhs: f64,
    /// −∞ when there are no index-1 points.
    pub rhs: f64,
    /// Set when the field is not Morse on Ω₋.
    pub heuristic: bool,
}

/// Dofs of a grid on Ω̄₋ lying on or next to ∂Ω₋.
fn rim_nodes(grid: &Grid) -> Vec<usize> {
    if grid.dim == 1 {
        return vec![0, grid.n_dofs() - 1];
    }
    let nx = grid.shape[0];
    (0..grid.n_dofs())
        .filter(|&d| {
            let l = grid.dof_to_lattice[d];
            let (i, j) = ((l % nx) as isize, (l / nx) as isize);
            [(1, 0), (-1, 0), (0, 1), (0, -1)].iter().any(|(a, b)| grid.dof_at(i + a, j + b).is_none())
        })
        .collect()
}

fn nearest(grid: &Grid, p: &Point) -> usize {
    (0..grid.n_dofs())
        .min_by(|&a, &b| {
            let da = (grid.coords[a][0] - p[0]).hypot(grid.coords[a][1] - p[1]);
            let db = (grid.coords[b][0] - p[0]).hypot(grid.coords[b][1] - p[1]);
            da.total_cmp(&db)
        })
        .unwrap()
}

/// Compare `d_Ag(∂Ω₋, minima)` with `max f(U⁽¹⁾) − f(U⁽⁰⁾)` on a lattice of
/// Ω̄₋ with the given spacing.
pub fn check_conddag(f: &dyn ScalarField, pair: &DomainPair, spacing: f64, margin: f64) -> Result<ConddagResult> {
    let grid = build_grid(&pair.minus, spacing, Bc::Neumann)?;
    let graph = agmon_graph(f, &grid, true);
    let cps = find_critical_points(f, &pair.minus, spacing, &CritTolerances::default())?;
    let heuristic = cps.iter().any(|c| !c.morse || c.kind == CriticalKind::Component);
    let mut minima = Vec::new();
    let mut min_value = f64::INFINITY;
    for c in cps.iter().filter(|c| c.index == 0) {
        min_value = min_value.min(c.value);
        match (c.kind, c.extent) {
            (CriticalKind::Component, Some([a, b])) => {
                let tol = 1e-10 * (1.0 + c.value.abs());
                for d in 0..grid.n_dofs() {
                    let p = grid.coords[d];
                    let inside = (0..grid.dim).all(|k| p[k] >= a[k].min(b[k]) - 1e-12 && p[k] <= a[k].max(b[k]) + 1e-12);
                    if inside && (f.value(&p) - c.value).abs() <= tol {
                        minima.push(d);
                    }
                }
                minima.push(nearest(&grid, &c.location));
            }
            _ => minima.push(nearest(&grid, &c.location)),
        }
    }
    let lhs = agmon_distance(&graph, &rim_nodes(&grid), &minima);
    let saddle = cps.iter().filter(|c| c.index == 1 && c.kind != CriticalKind::Boundary).map(|c| c.value).fold(f64::NEG_INFINITY, f64::max);
    let rhs = if saddle.is_finite() && min_value.is_finite() { saddle - min_value } else { f64::NEG_INFINITY };
    Ok(ConddagResult { ok: !rhs.is_finite() || lhs > rhs + margin, lhs, rhs, heuristic })
}

/// Fill the conddag fields of a hypothesis report.
pub fn fill_conddag(report: &mut HypothesisReport, f: &dyn ScalarField, pair: &DomainPair, spacing: f64) -> Result<ConddagResult> {
    let r = check_conddag(f, pair, spacing, 0.0)?;
    report.conddag_ok = Some(r.ok);
    report.conddag_lhs = Some(r.lhs);
    report.conddag_rhs = r.rhs.is_finite().then_some(r.rhs);
    report.conddag_heuristic = r.heuristic;
    Ok(r)
}
