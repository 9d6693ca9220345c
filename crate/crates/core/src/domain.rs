//! Bounded regions of the line and the plane, and nested pairs Ω₋ ⊂⊂ Ω₊.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Point;

/// Number of boundary samples used for 2D boundary quadrature and searches.
pub const BOUNDARY_SAMPLES: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Interval { lo: f64, hi: f64 },
    Disc { center: Point, radius: f64 },
}

/// A point on the boundary with its outward unit normal and quadrature weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundarySample {
    pub point: Point,
    pub normal: Point,
    /// Arc parameter: the endpoint index in 1D, the angle in 2D.
    pub param: f64,
    pub weight: f64,
}

impl Region {
    pub fn interval(lo: f64, hi: f64) -> Self {
        Region::Interval { lo, hi }
    }

    pub fn disc(center: Point, radius: f64) -> Self {
        Region::Disc { center, radius }
    }

    pub fn dim(&self) -> usize {
        match self {
            Region::Interval { .. } => 1,
            Region::Disc { .. } => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Region::Interval { lo, hi } if lo.is_finite() && hi.is_finite() && lo < hi => Ok(()),
            Region::Disc { center, radius }
                if radius > 0.0 && radius.is_finite() && center.iter().all(|c| c.is_finite()) =>
            {
                Ok(())
            }
            _ => Err(Error::Invalid(format!("degenerate region {self:?}"))),
        }
    }

    /// Signed distance, negative inside.
    pub fn signed_distance(&self, x: &Point) -> f64 {
        match *self {
            Region::Interval { lo, hi } => (lo - x[0]).max(x[0] - hi),
            Region::Disc { center, radius } => {
                ((x[0] - center[0]).hypot(x[1] - center[1])) - radius
            }
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.signed_distance(x) < 0.0
    }

    pub fn measure(&self) -> f64 {
        match *self {
            Region::Interval { lo, hi } => hi - lo,
            Region::Disc { radius, .. } => std::f64::consts::PI * radius * radius,
        }
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            Region::Interval { lo, hi } => hi - lo,
            Region::Disc { radius, .. } => 2.0 * radius,
        }
    }

    /// Axis-aligned bounding box as (lower corner, upper corner).
    pub fn bounding_box(&self) -> (Point, Point) {
        match *self {
            Region::Interval { lo, hi } => ([lo, 0.0], [hi, 0.0]),
            Region::Disc { center, radius } => (
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
        }
    }

    pub fn boundary_point(&self, theta: f64) -> Point {
        match *self {
            Region::Interval { lo, hi } => {
                if theta < 0.5 {
                    [lo, 0.0]
                } else {
                    [hi, 0.0]
                }
            }
            Region::Disc { center, radius } => {
                [center[0] + radius * theta.cos(), center[1] + radius * theta.sin()]
            }
        }
    }

    /// Outward unit normal at the boundary point nearest to `x`.
    pub fn outward_normal(&self, x: &Point) -> Point {
        match *self {
            Region::Interval { lo, hi } => {
                if (x[0] - lo).abs() <= (x[0] - hi).abs() {
                    [-1.0, 0.0]
                } else {
                    [1.0, 0.0]
                }
            }
            Region::Disc { center, .. } => {
                let d = [x[0] - center[0], x[1] - center[1]];
                let r = d[0].hypot(d[1]);
                if r == 0.0 {
                    [1.0, 0.0]
                } else {
                    [d[0] / r, d[1] / r]
                }
            }
        }
    }

    /// Boundary samples: the two endpoints in 1D (weight 1), `n` equispaced
    /// angles in 2D with arc-length trapezoid weights.
    pub fn boundary_samples(&self, n: usize) -> Vec<BoundarySample> {
        match *self {
            Region::Interval { lo, hi } => vec![
                BoundarySample { point: [lo, 0.0], normal: [-1.0, 0.0], param: 0.0, weight: 1.0 },
                BoundarySample { point: [hi, 0.0], normal: [1.0, 0.0], param: 1.0, weight: 1.0 },
            ],
            Region::Disc { center, radius } => {
                let w = 2.0 * std::f64::consts::PI * radius / n as f64;
                (0..n)
                    .map(|k| {
                        let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                        let (s, c) = t.sin_cos();
                        BoundarySample {
                            point: [center[0] + radius * c, center[1] + radius * s],
                            normal: [c, s],
                            param: t,
                            weight: w,
                        }
                    })
                    .collect()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainPair {
    pub minus: Region,
    pub plus: Region,
}

impl DomainPair {
    pub fn new(minus: Region, plus: Region) -> Result<Self> {
        let pair = DomainPair { minus, plus };
        pair.validate()?;
        Ok(pair)
    }

    pub fn dim(&self) -> usize {
        self.plus.dim()
    }

    /// Smallest distance from ∂Ω₋ to ∂Ω₊, measured on boundary samples.
    pub fn margin(&self) -> f64 {
        self.minus
            .boundary_samples(BOUNDARY_SAMPLES)
            .iter()
            .map(|s| -self.plus.signed_distance(&s.point))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        self.minus.validate()?;
        self.plus.validate()?;
        if self.minus.dim() != self.plus.dim() {
            return Err(Error::Dimension { expected: self.plus.dim(), got: self.minus.dim() });
        }
        if self.margin() <= 0.0 {
            return Err(Error::Invalid("closure of the inner domain leaves the outer one".into()));
        }
        Ok(())
    }

    /// Connected components of Ω₊ ∖ Ω̄₋ in 1D.
    pub fn shell_intervals(&self) -> Result<[Region; 2]> {
        match (&self.minus, &self.plus) {
            (Region::Interval { lo: a, hi: b }, Region::Interval { lo: ap, hi: bp }) => {
                Ok([Region::interval(*ap, *a), Region::interval(*b, *bp)])
            }
            _ => Err(Error::Dimension { expected: 1, got: 2 }),
        }
    }
}
