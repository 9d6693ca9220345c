//! Uniform lattices on intervals and discs with a degree-of-freedom map.

use serde::{Deserialize, Serialize};

use crate::domain::Region;
use crate::error::{Error, Result};
use crate::potential::{gradient_scale, ScalarField};
use crate::Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bc {
    Dirichlet,
    Neumann,
}

impl Bc {
    pub fn swapped(self) -> Bc {
        match self {
            Bc::Dirichlet => Bc::Neumann,
            Bc::Neumann => Bc::Dirichlet,
        }
    }
}

pub const MAX_NODES_1D: usize = 10_000;
pub const MAX_NODES_PER_AXIS_2D: usize = 300;

/// How to choose the lattice spacing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridPolicy {
    /// Δx = h / (factor · max|∇f| over the region), capped in node count.
    Auto { factor: f64 },
    Spacing(f64),
    /// Number of cells across the region's diameter.
    Cells(usize),
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy::Auto { factor: 8.0 }
    }
}

impl GridPolicy {
    /// Spacing for `region` at `h`, plus a warning when the mesh condition
    /// Δx ≤ h/(2 max|∇f|) is violated.
    pub fn spacing(&self, f: &dyn ScalarField, region: &Region, h: f64) -> (f64, Option<String>) {
        let diam = region.diameter();
        let cap = if region.dim() == 1 { MAX_NODES_1D - 1 } else { MAX_NODES_PER_AXIS_2D - 1 };
        let min_dx = diam / cap as f64;
        let gmax = gradient_scale(f, region, diam / 200.0);
        let dx = match *self {
            GridPolicy::Auto { factor } => {
                if gmax > 0.0 {
                    (h / (factor * gmax)).max(min_dx).min(diam / 16.0)
                } else {
                    diam / 64.0
                }
            }
            GridPolicy::Spacing(s) => s,
            GridPolicy::Cells(n) => diam / n.max(1) as f64,
        };
        let warn = (gmax > 0.0 && dx > h / (2.0 * gmax)).then(|| {
            format!("mesh condition violated: dx = {dx:.3e} > h/(2 max|grad f|) = {:.3e}", h / (2.0 * gmax))
        });
        (dx, warn)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeClass {
    Interior,
    Boundary,
    Outside,
}

/// A lattice edge from an active node to a point of ∂Ω at fraction `theta`
/// of the spacing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutEdge {
    pub dof: usize,
    pub point: Point,
    pub theta: f64,
}

pub const THETA_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct Grid {
    pub dim: usize,
    pub dx: f64,
    pub origin: Point,
    /// Lattice nodes per axis (`[n, 1]` in 1D).
    pub shape: [usize; 2],
    pub region: Region,
    pub bc: Bc,
    pub class: Vec<NodeClass>,
    pub lattice_to_dof: Vec<usize>,
    pub dof_to_lattice: Vec<usize>,
    pub coords: Vec<Point>,
    /// Trapezoid weights of the active nodes.
    pub mass: Vec<f64>,
    /// Lattice edges between active nodes, `i < j`.
    pub edges: Vec<(usize, usize)>,
    pub cut_edges: Vec<CutEdge>,
}

pub const INACTIVE: usize = usize::MAX;

impl Grid {
    /// Interior nodes along the widest lattice row.
    pub fn interior_across(&self) -> usize {
        let n = self.shape[0];
        (0..self.shape[1])
            .map(|j| (0..n).filter(|&i| self.class[j * n + i] == NodeClass::Interior).count())
            .max()
            .unwrap_or(0)
    }

    /// Operators need at least 8 interior nodes across the domain.
    pub fn check_resolution(&self) -> Result<()> {
        let k = self.interior_across();
        if k < 8 {
            return Err(Error::TooCoarse(format!("{k} interior nodes across the domain")));
        }
        Ok(())
    }

    pub fn n_dofs(&self) -> usize {
        self.coords.len()
    }

    pub fn lattice_point(&self, i: usize, j: usize) -> Point {
        [self.origin[0] + i as f64 * self.dx, self.origin[1] + j as f64 * self.dx]
    }

    pub fn lattice_index(&self, i: usize, j: usize) -> usize {
        j * self.shape[0] + i
    }

    /// Dof at lattice position, if active.
    pub fn dof_at(&self, i: isize, j: isize) -> Option<usize> {
        if i < 0 || j < 0 || i as usize >= self.shape[0] || j as usize >= self.shape[1] {
            return None;
        }
        let d = self.lattice_to_dof[self.lattice_index(i as usize, j as usize)];
        (d != INACTIVE).then_some(d)
    }
}

/// Lattice on the bounding box of `region`; nodes strictly inside are
/// interior, 1D endpoints are boundary nodes. Dirichlet keeps interior nodes
/// only and records cut edges; Neumann keeps all nodes of the closure in 1D
/// and interior nodes in 2D (edge omission).
pub fn build_grid(region: &Region, spacing: f64, bc: Bc) -> Result<Grid> {
    region.validate()?;
    if !(spacing > 0.0) {
        return Err(Error::Invalid(format!("spacing {spacing}")));
    }
    match *region {
        Region::Interval { lo, hi } => {
            let cells = ((hi - lo) / spacing).round().max(1.0) as usize;
            if cells < 2 {
                return Err(Error::TooCoarse("no interior node".into()));
            }
            let dx = (hi - lo) / cells as f64;
            let n = cells + 1;
            let mut class = vec![NodeClass::Interior; n];
            class[0] = NodeClass::Boundary;
            class[n - 1] = NodeClass::Boundary;
            let active: Vec<bool> = (0..n).map(|k| bc == Bc::Neumann || class[k] == NodeClass::Interior).collect();
            let mut lattice_to_dof = vec![INACTIVE; n];
            let mut dof_to_lattice = Vec::new();
            let mut coords = Vec::new();
            let mut mass = Vec::new();
            for k in 0..n {
                if active[k] {
                    lattice_to_dof[k] = dof_to_lattice.len();
                    dof_to_lattice.push(k);
                    coords.push([lo + k as f64 * dx, 0.0]);
                    mass.push(if class[k] == NodeClass::Boundary { 0.5 * dx } else { dx });
                }
            }
            let mut edges = Vec::new();
            for k in 0..n - 1 {
                if active[k] && active[k + 1] {
                    edges.push((lattice_to_dof[k], lattice_to_dof[k + 1]));
                }
            }
            let mut cut_edges = Vec::new();
            if bc == Bc::Dirichlet {
                cut_edges.push(CutEdge { dof: lattice_to_dof[1], point: [lo, 0.0], theta: 1.0 });
                cut_edges.push(CutEdge { dof: lattice_to_dof[n - 2], point: [hi, 0.0], theta: 1.0 });
            }
            Ok(Grid {
                dim: 1,
                dx,
                origin: [lo, 0.0],
                shape: [n, 1],
                region: region.clone(),
                bc,
                class,
                lattice_to_dof,
                dof_to_lattice,
                coords,
                mass,
                edges,
                cut_edges,
            })
        }
        Region::Disc { center, radius } => {
            let cells = (2.0 * radius / spacing).round().max(1.0) as usize;
            let dx = 2.0 * radius / cells as f64;
            let n = cells + 1;
            let origin = [center[0] - radius, center[1] - radius];
            let eps = 1e-12 * radius;
            let at = |i: usize, j: usize| [origin[0] + i as f64 * dx, origin[1] + j as f64 * dx];
            let mut class = Vec::with_capacity(n * n);
            for j in 0..n {
                for i in 0..n {
                    let sd = region.signed_distance(&at(i, j));
                    class.push(if sd < -eps {
                        NodeClass::Interior
                    } else if sd <= eps {
                        NodeClass::Boundary
                    } else {
                        NodeClass::Outside
                    });
                }
            }
            let mut lattice_to_dof = vec![INACTIVE; n * n];
            let mut dof_to_lattice = Vec::new();
            let mut coords = Vec::new();
            for j in 0..n {
                for i in 0..n {
                    let l = j * n + i;
                    if class[l] == NodeClass::Interior {
                        lattice_to_dof[l] = dof_to_lattice.len();
                        dof_to_lattice.push(l);
                        coords.push(at(i, j));
                    }
                }
            }
            let mass = vec![dx * dx; coords.len()];
            let mut edges = Vec::new();
            let mut cut_edges = Vec::new();
            for (d, &l) in dof_to_lattice.iter().enumerate() {
                let (i, j) = ((l % n) as isize, (l / n) as isize);
                for (di, dj) in [(1isize, 0isize), (0, 1), (-1, 0), (0, -1)] {
                    let (a, b) = (i + di, j + dj);
                    let nb = if a >= 0 && b >= 0 && (a as usize) < n && (b as usize) < n {
                        lattice_to_dof[b as usize * n + a as usize]
                    } else {
                        INACTIVE
                    };
                    if nb != INACTIVE {
                        if d < nb {
                            edges.push((d, nb));
                        }
                    } else if bc == Bc::Dirichlet {
                        let p = coords[d];
                        let dir = [di as f64, dj as f64];
                        let theta = ray_exit(&p, &dir, &center, radius, dx).max(THETA_FLOOR);
                        cut_edges.push(CutEdge {
                            dof: d,
                            point: [p[0] + theta * dx * dir[0], p[1] + theta * dx * dir[1]],
                            theta,
                        });
                    }
                }
            }
            Ok(Grid {
                dim: 2,
                dx,
                origin,
                shape: [n, n],
                region: region.clone(),
                bc,
                class,
                lattice_to_dof,
                dof_to_lattice,
                coords,
                mass,
                edges,
                cut_edges,
            })
        }
    }
}

/// Fraction t ∈ (0, 1] at which `p + t·dx·dir` reaches the circle.
fn ray_exit(p: &Point, dir: &Point, c: &Point, r: f64, dx: f64) -> f64 {
    let q = [p[0] - c[0], p[1] - c[1]];
    // |q + s·dir|² = r², s = t·dx
    let b = q[0] * dir[0] + q[1] * dir[1];
    let cc = q[0] * q[0] + q[1] * q[1] - r * r;
    let s = -b + (b * b - cc).max(0.0).sqrt();
    (s / dx).clamp(0.0, 1.0)
}
