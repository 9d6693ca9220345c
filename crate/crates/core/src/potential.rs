//! Potential catalog, critical points and the hypothesis checks on (f, Ω₋, Ω₊).

use serde::{Deserialize, Serialize};

use crate::domain::{DomainPair, Region, BOUNDARY_SAMPLES};
use crate::error::{Error, Result};
use crate::{Mat2, Point};

pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &Point) -> f64;
    fn gradient(&self, x: &Point) -> Point;
    fn hessian(&self, x: &Point) -> Mat2;
    fn smoothness_note(&self) -> &'static str {
        "C∞"
    }
}

pub fn eval_field(f: &dyn ScalarField, x: &Point) -> (f64, Point, Mat2) {
    (f.value(x), f.gradient(x), f.hessian(x))
}

fn norm(v: &Point) -> f64 {
    v[0].hypot(v[1])
}

/// Eigenvalues of a symmetric 2×2 matrix, ascending.
pub fn sym2_eigenvalues(m: &Mat2) -> [f64; 2] {
    let a = m[0][0];
    let d = m[1][1];
    let b = 0.5 * (m[0][1] + m[1][0]);
    let mean = 0.5 * (a + d);
    let r = (0.5 * (a - d)).hypot(b);
    [mean - r, mean + r]
}

// ---------------------------------------------------------------------------
// Catalog

fn c_1() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Harmonic1d {
    pub center: f64,
    pub stiffness: f64,
}

impl Default for Harmonic1d {
    fn default() -> Self {
        Harmonic1d { center: 0.0, stiffness: 1.0 }
    }
}

/// `depth·(x² − a²)² + tilt·x` with `a⁴ = barrier/depth`, so the barrier
/// between the wells is `barrier` when untilted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Doublewell1d {
    pub depth: f64,
    pub barrier: f64,
    pub tilt: f64,
}

impl Default for Doublewell1d {
    fn default() -> Self {
        Doublewell1d { depth: 1.0, barrier: 1.0 / 16.0, tilt: 0.0 }
    }
}

/// Zero on `[a1, b1]`, rising as `amplitude·exp(−width/d)` at distance `d`
/// outside it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Flatbottom1d {
    pub a1: f64,
    pub b1: f64,
    #[serde(rename = "a+")]
    pub a_plus: f64,
    #[serde(rename = "b+")]
    pub b_plus: f64,
    #[serde(rename = "a-")]
    pub a_minus: f64,
    #[serde(rename = "b-")]
    pub b_minus: f64,
    pub width: f64,
    pub amplitude: f64,
}

impl Default for Flatbottom1d {
    fn default() -> Self {
        Flatbottom1d {
            a1: -0.2,
            b1: 0.2,
            a_plus: -1.0,
            b_plus: 1.0,
            a_minus: -0.6,
            b_minus: 0.6,
            width: 0.25,
            amplitude: 1.0,
        }
    }
}

/// `2n+1` flat plateaus of half-width `half_width` centred at multiples of
/// `spacing`, separated by smooth bumps of height `height`, with flatbottom
/// flanks outside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Multiflat1d {
    pub n: usize,
    pub spacing: f64,
    pub half_width: f64,
    pub height: f64,
    pub width: f64,
    pub amplitude: f64,
}

impl Default for Multiflat1d {
    fn default() -> Self {
        Multiflat1d { n: 1, spacing: 0.8, half_width: 0.1, height: 0.3, width: 0.25, amplitude: 1.0 }
    }
}

/// `stiffness·x²(x² − well²)² + tilt·x + quad·x²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Triplewell1d {
    pub stiffness: f64,
    pub well: f64,
    pub tilt: f64,
    pub quad: f64,
}

impl Default for Triplewell1d {
    fn default() -> Self {
        Triplewell1d { stiffness: 40.0, well: 0.6, tilt: 0.02, quad: 0.0 }
    }
}

/// Coefficients in ascending order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Polynomial1d {
    pub coeffs: Vec<f64>,
}

impl Default for Polynomial1d {
    fn default() -> Self {
        Polynomial1d { coeffs: vec![0.0, 0.0, 0.5] }
    }
}

/// `φ_in(x) + φ_ext(x/2)` with `φ_in = exp(−1/(|x|²−1)²)` inside the unit disc
/// and `φ_ext(y) = (|y|−1)⁴` outside it. Flat on the ring `1 ≤ |x| ≤ 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Radial2d {
    #[serde(rename = "R")]
    pub r: f64,
}

impl Default for Radial2d {
    fn default() -> Self {
        Radial2d { r: 4.0 }
    }
}

/// `confinement·|x|²/2 − Σ depth_k·exp(−|x−c_k|²/r_k²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Multiwell2d {
    pub centers: Vec<Point>,
    pub radii: Vec<f64>,
    pub depths: Vec<f64>,
    #[serde(default = "c_1")]
    pub confinement: f64,
}

impl Default for Multiwell2d {
    fn default() -> Self {
        Multiwell2d {
            centers: vec![[-0.6, 0.0], [0.6, 0.0]],
            radii: vec![0.4, 0.4],
            depths: vec![1.0, 0.8],
            confinement: 1.0,
        }
    }
}

/// Radial field `S(|x|²)` with `S` the natural cubic spline through
/// `(r_k², value_k)`; linear extrapolation beyond the knots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadialSpline2d {
    pub knots: Vec<[f64; 2]>,
}

impl Default for RadialSpline2d {
    fn default() -> Self {
        RadialSpline2d { knots: vec![[0.0, 0.0], [0.5, 0.25], [1.0, 1.0], [1.5, 2.25], [2.0, 4.0]] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name")]
pub enum Potential {
    #[serde(rename = "harmonic1d")]
    Harmonic1d(Harmonic1d),
    #[serde(rename = "doublewell1d")]
    Doublewell1d(Doublewell1d),
    #[serde(rename = "flatbottom1d")]
    Flatbottom1d(Flatbottom1d),
    #[serde(rename = "multiflat1d")]
    Multiflat1d(Multiflat1d),
    #[serde(rename = "fig-ok-1d")]
    FigOk1d,
    #[serde(rename = "fig-notok-1d")]
    FigNotok1d,
    #[serde(rename = "triplewell1d")]
    Triplewell1d(Triplewell1d),
    #[serde(rename = "polynomial1d")]
    Polynomial1d(Polynomial1d),
    #[serde(rename = "radial2d")]
    Radial2d(Radial2d),
    #[serde(rename = "multiwell2d")]
    Multiwell2d(Multiwell2d),
    #[serde(rename = "radialspline2d")]
    RadialSpline2d(RadialSpline2d),
}

const FIG_OK_TILT: f64 = 0.05;
const FIG_NOTOK_TILT: f64 = -0.15;

impl Potential {
    pub fn harmonic1d() -> Self {
        Potential::Harmonic1d(Harmonic1d::default())
    }

    pub fn doublewell1d() -> Self {
        Potential::Doublewell1d(Doublewell1d::default())
    }

    pub fn flatbottom1d() -> Self {
        Potential::Flatbottom1d(Flatbottom1d::default())
    }

    pub fn radial2d() -> Self {
        Potential::Radial2d(Radial2d::default())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Potential::Harmonic1d(_) => "harmonic1d",
            Potential::Doublewell1d(_) => "doublewell1d",
            Potential::Flatbottom1d(_) => "flatbottom1d",
            Potential::Multiflat1d(_) => "multiflat1d",
            Potential::FigOk1d => "fig-ok-1d",
            Potential::FigNotok1d => "fig-notok-1d",
            Potential::Triplewell1d(_) => "triplewell1d",
            Potential::Polynomial1d(_) => "polynomial1d",
            Potential::Radial2d(_) => "radial2d",
            Potential::Multiwell2d(_) => "multiwell2d",
            Potential::RadialSpline2d(_) => "radialspline2d",
        }
    }

    /// Every catalog entry with default parameters.
    pub fn catalog() -> Vec<Potential> {
        vec![
            Potential::harmonic1d(),
            Potential::doublewell1d(),
            Potential::flatbottom1d(),
            Potential::Multiflat1d(Multiflat1d::default()),
            Potential::FigOk1d,
            Potential::FigNotok1d,
            Potential::Triplewell1d(Triplewell1d::default()),
            Potential::Polynomial1d(Polynomial1d::default()),
            Potential::radial2d(),
            Potential::Multiwell2d(Multiwell2d::default()),
            Potential::RadialSpline2d(RadialSpline2d::default()),
        ]
    }

    pub fn default_domains(&self) -> DomainPair {
        let iv = Region::interval;
        let (minus, plus) = match self {
            Potential::Flatbottom1d(p) => (iv(p.a_minus, p.b_minus), iv(p.a_plus, p.b_plus)),
            Potential::Multiflat1d(p) => {
                let e = p.n as f64 * p.spacing + p.half_width;
                (iv(-e - 0.3, e + 0.3), iv(-e - 0.6, e + 0.6))
            }
            Potential::Triplewell1d(_) => (iv(-0.7, 0.7), iv(-0.76, 0.76)),
            Potential::Radial2d(p) => {
                (Region::disc([-p.r, 0.0], 2.0 * p.r - 1.0), Region::disc([-p.r, 0.0], 2.0 * p.r))
            }
            Potential::Multiwell2d(_) => (Region::disc([0.0, 0.0], 1.3), Region::disc([0.0, 0.0], 1.6)),
            Potential::RadialSpline2d(_) => {
                (Region::disc([0.0, 0.0], 1.0), Region::disc([0.0, 0.0], 1.5))
            }
            _ => (iv(-0.8, 0.8), iv(-1.0, 1.0)),
        };
        DomainPair { minus, plus }
    }

    fn doublewell(&self) -> Option<Doublewell1d> {
        match self {
            Potential::Doublewell1d(p) => Some(p.clone()),
            Potential::FigOk1d => Some(Doublewell1d { tilt: FIG_OK_TILT, ..Default::default() }),
            Potential::FigNotok1d => Some(Doublewell1d { tilt: FIG_NOTOK_TILT, ..Default::default() }),
            _ => None,
        }
    }

    /// Value and first two derivatives of a 1D entry.
    fn eval1(&self, x: f64) -> (f64, f64, f64) {
        if let Some(p) = self.doublewell() {
            let a2 = (p.barrier / p.depth).sqrt();
            let q = x * x - a2;
            return (
                p.depth * q * q + p.tilt * x,
                4.0 * p.depth * x * q + p.tilt,
                p.depth * (12.0 * x * x - 4.0 * a2),
            );
        }
        match self {
            Potential::Harmonic1d(p) => {
                let d = x - p.center;
                (0.5 * p.stiffness * d * d, p.stiffness * d, p.stiffness)
            }
            Potential::Flatbottom1d(p) => {
                let (l, dl, ddl) = flank((p.a1 - x) / p.width);
                let (r, dr, ddr) = flank((x - p.b1) / p.width);
                let w = p.width;
                (
                    p.amplitude * (l + r),
                    p.amplitude * (dr - dl) / w,
                    p.amplitude * (ddl + ddr) / (w * w),
                )
            }
            Potential::Multiflat1d(p) => multiflat(p, x),
            Potential::Triplewell1d(p) => {
                let s2 = p.well * p.well;
                let q = x * x - s2;
                let k = p.stiffness;
                (
                    k * x * x * q * q + p.tilt * x + p.quad * x * x,
                    2.0 * k * x * q * (3.0 * x * x - s2) + p.tilt + 2.0 * p.quad * x,
                    k * (30.0 * x.powi(4) - 24.0 * s2 * x * x + 2.0 * s2 * s2) + 2.0 * p.quad,
                )
            }
            Potential::Polynomial1d(p) => {
                let (mut v, mut d, mut dd) = (0.0, 0.0, 0.0);
                for c in p.coeffs.iter().rev() {
                    dd = dd * x + 2.0 * d;
                    d = d * x + v;
                    v = v * x + c;
                }
                (v, d, dd)
            }
            _ => unreachable!("eval1 on a 2D field"),
        }
    }

    fn eval2(&self, x: &Point) -> (f64, Point, Mat2) {
        match self {
            Potential::Radial2d(_) => radial2d(x),
            Potential::Multiwell2d(p) => {
                let c = p.confinement;
                let mut v = 0.5 * c * (x[0] * x[0] + x[1] * x[1]);
                let mut g = [c * x[0], c * x[1]];
                let mut hm = [[c, 0.0], [0.0, c]];
                for (k, ctr) in p.centers.iter().enumerate() {
                    let r2 = p.radii.get(k).copied().unwrap_or(0.4).powi(2);
                    let dep = p.depths.get(k).copied().unwrap_or(1.0);
                    let d = [x[0] - ctr[0], x[1] - ctr[1]];
                    let e = dep * (-(d[0] * d[0] + d[1] * d[1]) / r2).exp();
                    v -= e;
                    for i in 0..2 {
                        g[i] += 2.0 * e * d[i] / r2;
                        for j in 0..2 {
                            let delta = if i == j { 1.0 } else { 0.0 };
                            hm[i][j] += e * (2.0 * delta / r2 - 4.0 * d[i] * d[j] / (r2 * r2));
                        }
                    }
                }
                (v, g, hm)
            }
            Potential::RadialSpline2d(p) => {
                let s = x[0] * x[0] + x[1] * x[1];
                let (v, d1, d2) = Spline::natural(&p.knots).eval(s);
                let g = [2.0 * d1 * x[0], 2.0 * d1 * x[1]];
                let mut hm = [[0.0; 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        hm[i][j] = 2.0 * d1 * delta + 4.0 * d2 * x[i] * x[j];
                    }
                }
                (v, g, hm)
            }
            _ => unreachable!("eval2 on a 1D field"),
        }
    }
}

impl ScalarField for Potential {
    fn dim(&self) -> usize {
        match self {
            Potential::Radial2d(_) | Potential::Multiwell2d(_) | Potential::RadialSpline2d(_) => 2,
            _ => 1,
        }
    }

    fn value(&self, x: &Point) -> f64 {
        if self.dim() == 1 {
            self.eval1(x[0]).0
        } else {
            self.eval2(x).0
        }
    }

    fn gradient(&self, x: &Point) -> Point {
        if self.dim() == 1 {
            [self.eval1(x[0]).1, 0.0]
        } else {
            self.eval2(x).1
        }
    }

    fn hessian(&self, x: &Point) -> Mat2 {
        if self.dim() == 1 {
            [[self.eval1(x[0]).2, 0.0], [0.0, 0.0]]
        } else {
            self.eval2(x).2
        }
    }

    fn smoothness_note(&self) -> &'static str {
        match self {
            Potential::Radial2d(_) => "C³ at |x| = 2 (exterior profile (|y|-1)^4), C∞ elsewhere",
            Potential::RadialSpline2d(_) => "C² (cubic spline in |x|²)",
            _ => "C∞",
        }
    }
}

/// `ψ(t) = exp(−1/t)` for t > 0 with its first two derivatives.
fn flank(t: f64) -> (f64, f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let e = (-1.0 / t).exp();
    let t2 = t * t;
    (e, e / t2, e * (1.0 / (t2 * t2) - 2.0 / (t2 * t)))
}

/// `exp(1 − 1/(1 − s²))` on |s| < 1 with derivatives in s.
fn smooth_bump(s: f64) -> (f64, f64, f64) {
    if s.abs() >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let q = 1.0 - s * s;
    let b = (1.0 - 1.0 / q).exp();
    // d/ds (−1/q) = −2s/q²
    let a1 = -2.0 * s / (q * q);
    let a2 = -2.0 / (q * q) - 8.0 * s * s / (q * q * q);
    (b, b * a1, b * (a1 * a1 + a2))
}

fn multiflat(p: &Multiflat1d, x: f64) -> (f64, f64, f64) {
    let n = p.n as f64;
    let edge = n * p.spacing + p.half_width;
    let w = p.width;
    let (l, dl, ddl) = flank((-edge - x) / w);
    let (r, dr, ddr) = flank((x - edge) / w);
    let mut v = p.amplitude * (l + r);
    let mut d = p.amplitude * (dr - dl) / w;
    let mut dd = p.amplitude * (ddl + ddr) / (w * w);
    let half_gap = 0.5 * p.spacing - p.half_width;
    for k in 0..(2 * p.n) {
        let mid = (k as f64 - n + 0.5) * p.spacing;
        let (b, db, ddb) = smooth_bump((x - mid) / half_gap);
        v += p.height * b;
        d += p.height * db / half_gap;
        dd += p.height * ddb / (half_gap * half_gap);
    }
    (v, d, dd)
}

fn radial2d(x: &Point) -> (f64, Point, Mat2) {
    let u = x[0] * x[0] + x[1] * x[1];
    let mut v = 0.0;
    let mut g = [0.0; 2];
    let mut hm = [[0.0; 2]; 2];
    if u < 1.0 {
        let w = 1.0 - u;
        let e = (-1.0 / (w * w)).exp();
        let g1 = -2.0 * e / (w * w * w);
        let g2 = e * (4.0 / w.powi(6) - 6.0 / w.powi(4));
        v += e;
        for i in 0..2 {
            g[i] += 2.0 * g1 * x[i];
            for j in 0..2 {
                let delta = if i == j { 1.0 } else { 0.0 };
                hm[i][j] += 2.0 * g1 * delta + 4.0 * g2 * x[i] * x[j];
            }
        }
    }
    let r = u.sqrt();
    let rho = 0.5 * r;
    if rho > 1.0 {
        let t = rho - 1.0;
        v += t.powi(4);
        let p1 = 4.0 * t.powi(3);
        let p2 = 12.0 * t * t;
        let n = [x[0] / r, x[1] / r];
        for i in 0..2 {
            g[i] += 0.5 * p1 * n[i];
            for j in 0..2 {
                let delta = if i == j { 1.0 } else { 0.0 };
                hm[i][j] += 0.25 * p2 * n[i] * n[j] + 0.5 * p1 / r * (delta - n[i] * n[j]);
            }
        }
    }
    (v, g, hm)
}

/// Natural cubic spline through `(r_k², value_k)`.
struct Spline {
    s: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl Spline {
    fn natural(knots: &[[f64; 2]]) -> Spline {
        let s: Vec<f64> = knots.iter().map(|k| k[0] * k[0]).collect();
        let y: Vec<f64> = knots.iter().map(|k| k[1]).collect();
        let n = s.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the second-derivative system.
            let mut diag = vec![0.0; n];
            let mut rhs = vec![0.0; n];
            let mut upper = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = s[i] - s[i - 1];
                let h1 = s[i + 1] - s[i];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
                if i > 1 {
                    let lower = h0;
                    let f = lower / diag[i - 1];
                    diag[i] -= f * upper[i - 1];
                    rhs[i] -= f * rhs[i - 1];
                }
            }
            for i in (1..n - 1).rev() {
                let next = if i + 1 < n - 1 { upper[i] * m[i + 1] } else { 0.0 };
                m[i] = (rhs[i] - next) / diag[i];
            }
        }
        Spline { s, y, m }
    }

    fn eval(&self, t: f64) -> (f64, f64, f64) {
        let n = self.s.len();
        if n == 1 {
            return (self.y[0], 0.0, 0.0);
        }
        let slope = |i: usize| {
            let hh = self.s[i + 1] - self.s[i];
            (self.y[i + 1] - self.y[i]) / hh - hh * (2.0 * self.m[i] + self.m[i + 1]) / 6.0
        };
        if t <= self.s[0] {
            let d = slope(0);
            return (self.y[0] + d * (t - self.s[0]), d, 0.0);
        }
        if t >= self.s[n - 1] {
            let i = n - 2;
            let hh = self.s[i + 1] - self.s[i];
            let d = (self.y[i + 1] - self.y[i]) / hh + hh * (self.m[i] + 2.0 * self.m[i + 1]) / 6.0;
            return (self.y[n - 1] + d * (t - self.s[n - 1]), d, 0.0);
        }
        let i = self.s.partition_point(|&v| v <= t).clamp(1, n - 1) - 1;
        let hh = self.s[i + 1] - self.s[i];
        let a = (self.s[i + 1] - t) / hh;
        let b = (t - self.s[i]) / hh;
        let (mi, mj) = (self.m[i], self.m[i + 1]);
        let v = a * self.y[i] + b * self.y[i + 1] + ((a.powi(3) - a) * mi + (b.powi(3) - b) * mj) * hh * hh / 6.0;
        let d = (self.y[i + 1] - self.y[i]) / hh - (3.0 * a * a - 1.0) * hh * mi / 6.0
            + (3.0 * b * b - 1.0) * hh * mj / 6.0;
        let dd = a * mi + b * mj;
        (v, d, dd)
    }
}

// ---------------------------------------------------------------------------
// Perturbations

/// `amplitude·exp(1 − 1/(1 − |x−center|²/radius²))`, compactly supported.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub center: Point,
    pub radius: f64,
    pub amplitude: f64,
}

impl Bump {
    fn parts(&self, x: &Point, dim: usize) -> (f64, Point, Mat2) {
        let mut d = [x[0] - self.center[0], x[1] - self.center[1]];
        if dim == 1 {
            d[1] = 0.0;
        }
        let r2 = self.radius * self.radius;
        let q = (d[0] * d[0] + d[1] * d[1]) / r2;
        if q >= 1.0 {
            return (0.0, [0.0; 2], [[0.0; 2]; 2]);
        }
        let w = 1.0 - q;
        let g = (1.0 - 1.0 / w).exp();
        let g1 = -g / (w * w);
        let g2 = g * (1.0 / w.powi(4) - 2.0 / w.powi(3));
        let a = self.amplitude;
        let mut hm = [[0.0; 2]; 2];
        for i in 0..dim {
            for j in 0..dim {
                let delta = if i == j { 1.0 } else { 0.0 };
                hm[i][j] = a * (4.0 * g2 * d[i] * d[j] / (r2 * r2) + 2.0 * g1 * delta / r2);
            }
        }
        (a * g, [2.0 * a * g1 * d[0] / r2, 2.0 * a * g1 * d[1] / r2], hm)
    }
}

/// A catalog potential with an optional compactly supported perturbation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub potential: Potential,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bump: Option<Bump>,
}

impl Field {
    pub fn new(potential: Potential) -> Self {
        Field { potential, bump: None }
    }

    pub fn with_bump(potential: Potential, bump: Bump) -> Self {
        Field { potential, bump: Some(bump) }
    }

    /// The perturbation δf alone.
    pub fn delta(&self, x: &Point) -> f64 {
        self.bump.as_ref().map_or(0.0, |b| b.parts(x, self.dim()).0)
    }
}

impl From<Potential> for Field {
    fn from(p: Potential) -> Self {
        Field::new(p)
    }
}

impl ScalarField for Field {
    fn dim(&self) -> usize {
        self.potential.dim()
    }

    fn value(&self, x: &Point) -> f64 {
        self.potential.value(x) + self.delta(x)
    }

    fn gradient(&self, x: &Point) -> Point {
        let mut g = self.potential.gradient(x);
        if let Some(b) = &self.bump {
            let d = b.parts(x, self.dim()).1;
            g[0] += d[0];
            g[1] += d[1];
        }
        g
    }

    fn hessian(&self, x: &Point) -> Mat2 {
        let mut hm = self.potential.hessian(x);
        if let Some(b) = &self.bump {
            let d = b.parts(x, self.dim()).2;
            for i in 0..2 {
                for j in 0..2 {
                    hm[i][j] += d[i][j];
                }
            }
        }
        hm
    }

    fn smoothness_note(&self) -> &'static str {
        self.potential.smoothness_note()
    }
}

/// Evaluate a closure on a uniform lattice of the closure of `region`
/// (only nodes inside or on the boundary in 2D).
pub fn lattice_points(region: &Region, spacing: f64) -> Vec<Point> {
    let (lo, hi) = region.bounding_box();
    match region.dim() {
        1 => {
            let n = ((hi[0] - lo[0]) / spacing).ceil().max(1.0) as usize;
            let dx = (hi[0] - lo[0]) / n as f64;
            (0..=n).map(|k| [lo[0] + k as f64 * dx, 0.0]).collect()
        }
        _ => {
            let n = ((hi[0] - lo[0]) / spacing).ceil().max(1.0) as usize;
            let dx = (hi[0] - lo[0]) / n as f64;
            let mut out = Vec::new();
            for j in 0..=n {
                for i in 0..=n {
                    let p = [lo[0] + i as f64 * dx, lo[1] + j as f64 * dx];
                    if region.signed_distance(&p) <= 1e-12 {
                        out.push(p);
                    }
                }
            }
            out
        }
    }
}

/// Largest |∇f| on a lattice of the closure of `region`.
pub fn gradient_scale(f: &dyn ScalarField, region: &Region, spacing: f64) -> f64 {
    let mut pts = lattice_points(region, spacing);
    pts.extend(region.boundary_samples(256).iter().map(|s| s.point));
    pts.iter().map(|p| norm(&f.gradient(p))).fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Critical points

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalKind {
    Interior,
    /// A connected set of degenerate critical nodes (non-Morse).
    Component,
    Boundary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub location: Point,
    pub value: f64,
    /// Number of negative Hessian eigenvalues (of f|∂Ω for boundary points).
    pub index: usize,
    pub hessian_det: f64,
    pub morse: bool,
    pub kind: CriticalKind,
    /// Outward normal derivative, boundary points only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normal_derivative: Option<f64>,
    /// Index as a generalized critical point of the Dirichlet realization.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dirichlet_index: Option<usize>,
    /// Bounding box of a critical component.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extent: Option<[Point; 2]>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CritTolerances {
    /// Relative to the largest |∇f| on the seed grid.
    pub grad_rel: f64,
    /// Relative to the largest Hessian entry on the seed grid.
    pub eig_rel: f64,
    /// In units of the seed spacing.
    pub merge_factor: f64,
}

impl Default for CritTolerances {
    fn default() -> Self {
        CritTolerances { grad_rel: 1e-8, eig_rel: 1e-6, merge_factor: 2.0 }
    }
}

struct Scales {
    tol_grad: f64,
    tol_eig: f64,
}

fn scales(f: &dyn ScalarField, pts: &[Point], tol: &CritTolerances) -> Scales {
    let mut g: f64 = 0.0;
    let mut hmax: f64 = 0.0;
    for p in pts {
        g = g.max(norm(&f.gradient(p)));
        let hm = f.hessian(p);
        hmax = hmax.max(hm[0][0].abs().max(hm[1][1].abs()).max(hm[0][1].abs()));
    }
    Scales { tol_grad: tol.grad_rel * g.max(1e-300), tol_eig: tol.eig_rel * hmax.max(1e-300) }
}

fn classify(f: &dyn ScalarField, x: &Point, dim: usize, tol_eig: f64) -> (usize, f64, bool) {
    let hm = f.hessian(x);
    if dim == 1 {
        let e = hm[0][0];
        return ((e < -tol_eig) as usize, e, e.abs() > tol_eig);
    }
    let ev = sym2_eigenvalues(&hm);
    let idx = ev.iter().filter(|&&e| e < -tol_eig).count();
    (idx, ev[0] * ev[1], ev.iter().all(|e| e.abs() > tol_eig))
}

/// Root of `g` in `[a, b]` where `g(a)·g(b) < 0`, Newton with bisection fallback.
fn safe_newton(g: impl Fn(f64) -> (f64, f64), mut a: f64, mut b: f64, tol: f64) -> Option<f64> {
    let (ga, _) = g(a);
    if ga > 0.0 {
        std::mem::swap(&mut a, &mut b);
    }
    // now g(a) < 0 < g(b)
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let (gx, dg) = g(x);
        if gx.abs() <= tol {
            return Some(x);
        }
        if gx < 0.0 {
            a = x;
        } else {
            b = x;
        }
        let newton = x - gx / dg;
        let inside = (newton - a) * (newton - b) < 0.0;
        x = if dg != 0.0 && inside { newton } else { 0.5 * (a + b) };
        if (a - b).abs() < 1e-15 * (1.0 + x.abs()) {
            return Some(x);
        }
    }
    None
}

pub fn find_critical_points(
    f: &dyn ScalarField,
    region: &Region,
    spacing: f64,
    tol: &CritTolerances,
) -> Result<Vec<CriticalPoint>> {
    let pts = lattice_points(region, spacing);
    let sc = scales(f, &pts, tol);
    let merge = tol.merge_factor * spacing;
    let mut out = if region.dim() == 1 {
        critical_1d(f, region, &pts, &sc)?
    } else {
        critical_2d(f, region, spacing, &sc)
    };
    // collapse duplicates
    let mut merged: Vec<CriticalPoint> = Vec::new();
    for c in out.drain(..) {
        let dup = merged.iter().any(|m| {
            m.kind == c.kind
                && (m.location[0] - c.location[0]).hypot(m.location[1] - c.location[1]) < merge
        });
        if !dup {
            merged.push(c);
        }
    }
    merged.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(merged)
}

fn component_index(f: &dyn ScalarField, value: f64, neighbours: &[Point]) -> usize {
    let above = neighbours.iter().filter(|p| f.value(p) > value).count();
    if above == neighbours.len() {
        0
    } else if above == 0 {
        f.dim()
    } else {
        1
    }
}

fn critical_1d(
    f: &dyn ScalarField,
    region: &Region,
    pts: &[Point],
    sc: &Scales,
) -> Result<Vec<CriticalPoint>> {
    let n = pts.len();
    let g: Vec<f64> = pts.iter().map(|p| f.gradient(p)[0]).collect();
    let flat: Vec<bool> = pts
        .iter()
        .zip(&g)
        .map(|(p, gi)| gi.abs() <= sc.tol_grad && f.hessian(p)[0][0].abs() <= sc.tol_eig)
        .collect();
    let mut out = Vec::new();
    let mut k = 0;
    while k < n {
        if flat[k] {
            let start = k;
            while k + 1 < n && flat[k + 1] {
                k += 1;
            }
            if k > start {
                let lo = pts[start];
                let hi = pts[k];
                let mid = [0.5 * (lo[0] + hi[0]), 0.0];
                let value = f.value(&mid);
                let mut nb = Vec::new();
                if start > 0 {
                    nb.push(pts[start - 1]);
                }
                if k + 1 < n {
                    nb.push(pts[k + 1]);
                }
                out.push(CriticalPoint {
                    location: mid,
                    value,
                    index: component_index(f, value, &nb),
                    hessian_det: 0.0,
                    morse: false,
                    kind: CriticalKind::Component,
                    normal_derivative: None,
                    dirichlet_index: None,
                    extent: Some([lo, hi]),
                });
            }
        }
        k += 1;
    }
    let in_component = |x: f64| {
        out.iter().any(|c: &CriticalPoint| {
            c.extent.is_some_and(|e| x >= e[0][0] - 1e-12 && x <= e[1][0] + 1e-12)
        })
    };
    let mut points = Vec::new();
    let deriv = |x: f64| {
        let p = [x, 0.0];
        (f.gradient(&p)[0], f.hessian(&p)[0][0])
    };
    for k in 0..n - 1 {
        if flat[k] || flat[k + 1] {
            continue;
        }
        let (a, b) = (pts[k][0], pts[k + 1][0]);
        let root = if g[k] == 0.0 {
            Some(a)
        } else if g[k] * g[k + 1] < 0.0 {
            match safe_newton(deriv, a, b, sc.tol_grad) {
                Some(r) => Some(r),
                None => return Err(Error::NonConvergence([a, 0.0])),
            }
        } else {
            None
        };
        if let Some(r) = root {
            let p = [r, 0.0];
            if !region.contains(&p) || in_component(r) {
                continue;
            }
            if f.gradient(&p)[0].abs() > sc.tol_grad {
                return Err(Error::NonConvergence(p));
            }
            let (index, det, morse) = classify(f, &p, 1, sc.tol_eig);
            points.push(CriticalPoint {
                location: p,
                value: f.value(&p),
                index,
                hessian_det: det,
                morse,
                kind: CriticalKind::Interior,
                normal_derivative: None,
                dirichlet_index: None,
                extent: None,
            });
        }
    }
    out.extend(points);
    Ok(out)
}

fn critical_2d(f: &dyn ScalarField, region: &Region, spacing: f64, sc: &Scales) -> Vec<CriticalPoint> {
    let (lo, hi) = region.bounding_box();
    let n = ((hi[0] - lo[0]) / spacing).ceil().max(1.0) as usize + 1;
    let dx = (hi[0] - lo[0]) / (n - 1) as f64;
    let at = |i: usize, j: usize| [lo[0] + i as f64 * dx, lo[1] + j as f64 * dx];
    let idx = |i: usize, j: usize| j * n + i;
    let inside: Vec<bool> = (0..n * n).map(|k| region.contains(&at(k % n, k / n))).collect();
    let gnorm: Vec<f64> =
        (0..n * n).map(|k| if inside[k] { norm(&f.gradient(&at(k % n, k / n))) } else { f64::INFINITY }).collect();
    let flat: Vec<bool> = (0..n * n)
        .map(|k| {
            inside[k] && gnorm[k] <= sc.tol_grad && {
                let hm = f.hessian(&at(k % n, k / n));
                hm[0][0].abs().max(hm[1][1].abs()).max(hm[0][1].abs()) <= sc.tol_eig
            }
        })
        .collect();
    let neighbours = |k: usize| {
        let (i, j) = ((k % n) as isize, (k / n) as isize);
        let mut v = Vec::with_capacity(8);
        for dj in -1..=1 {
            for di in -1..=1 {
                if di == 0 && dj == 0 {
                    continue;
                }
                let (a, b) = (i + di, j + dj);
                if a >= 0 && b >= 0 && (a as usize) < n && (b as usize) < n {
                    v.push(idx(a as usize, b as usize));
                }
            }
        }
        v
    };
    let mut out = Vec::new();
    // flat components by flood fill
    let mut seen = vec![false; n * n];
    for k0 in 0..n * n {
        if !flat[k0] || seen[k0] {
            continue;
        }
        let mut stack = vec![k0];
        seen[k0] = true;
        let mut members = Vec::new();
        while let Some(k) = stack.pop() {
            members.push(k);
            for m in neighbours(k) {
                if flat[m] && !seen[m] {
                    seen[m] = true;
                    stack.push(m);
                }
            }
        }
        if members.len() < 3 {
            continue;
        }
        let mut bl = [f64::INFINITY; 2];
        let mut tr = [f64::NEG_INFINITY; 2];
        let mut vsum = 0.0;
        for &k in &members {
            let p = at(k % n, k / n);
            for c in 0..2 {
                bl[c] = bl[c].min(p[c]);
                tr[c] = tr[c].max(p[c]);
            }
            vsum += f.value(&p);
        }
        let value = vsum / members.len() as f64;
        let rim: Vec<Point> = members
            .iter()
            .flat_map(|&k| neighbours(k))
            .filter(|&m| inside[m] && !flat[m])
            .map(|m| at(m % n, m / n))
            .collect();
        let rep = members[members.len() / 2];
        out.push(CriticalPoint {
            location: at(rep % n, rep / n),
            value,
            index: component_index(f, value, &rim),
            hessian_det: 0.0,
            morse: false,
            kind: CriticalKind::Component,
            normal_derivative: None,
            dirichlet_index: None,
            extent: Some([bl, tr]),
        });
    }
    // isolated points: Newton from local minima of |∇f|
    for k in 0..n * n {
        if !inside[k] || flat[k] {
            continue;
        }
        if neighbours(k).iter().any(|&m| gnorm[m] < gnorm[k] || flat[m]) {
            continue;
        }
        let seed = at(k % n, k / n);
        let mut x = seed;
        let mut ok = false;
        for _ in 0..60 {
            let g = f.gradient(&x);
            if norm(&g) <= sc.tol_grad {
                ok = true;
                break;
            }
            let hm = f.hessian(&x);
            let det = hm[0][0] * hm[1][1] - hm[0][1] * hm[1][0];
            if det.abs() < 1e-300 {
                break;
            }
            let step = [
                (hm[1][1] * g[0] - hm[0][1] * g[1]) / det,
                (-hm[1][0] * g[0] + hm[0][0] * g[1]) / det,
            ];
            x = [x[0] - step[0], x[1] - step[1]];
            if (x[0] - seed[0]).hypot(x[1] - seed[1]) > 4.0 * dx {
                break;
            }
        }
        if !ok || !region.contains(&x) {
            continue;
        }
        let (index, det, morse) = classify(f, &x, 2, sc.tol_eig);
        if !morse {
            continue;
        }
        out.push(CriticalPoint {
            location: x,
            value: f.value(&x),
            index,
            hessian_det: det,
            morse,
            kind: CriticalKind::Interior,
            normal_derivative: None,
            dirichlet_index: None,
            extent: None,
        });
    }
    out
}

/// Critical points of f restricted to the boundary of `region`, annotated with
/// the outward normal derivative and the Dirichlet generalized index
/// (index of f|∂Ω plus one when ∂ₙf > 0).
pub fn boundary_critical_points(f: &dyn ScalarField, region: &Region) -> Vec<CriticalPoint> {
    let bnd = |p: Point, n: Point, index: usize, det: f64, morse: bool, extent: Option<[Point; 2]>| {
        let g = f.gradient(&p);
        let dn = g[0] * n[0] + g[1] * n[1];
        CriticalPoint {
            location: p,
            value: f.value(&p),
            index,
            hessian_det: det,
            morse,
            kind: CriticalKind::Boundary,
            normal_derivative: Some(dn),
            dirichlet_index: (dn > 0.0).then_some(index + 1),
            extent,
        }
    };
    match *region {
        Region::Interval { .. } => region
            .boundary_samples(2)
            .iter()
            .map(|s| bnd(s.point, s.normal, 0, 1.0, true, None))
            .collect(),
        Region::Disc { center, radius } => {
            let m = BOUNDARY_SAMPLES;
            let pt = |t: f64| [center[0] + radius * t.cos(), center[1] + radius * t.sin()];
            // derivatives of θ ↦ f(σ(θ)) with respect to arc length
            let ds = |t: f64| {
                let p = pt(t);
                let tang = [-t.sin(), t.cos()];
                let nrm = [t.cos(), t.sin()];
                let g = f.gradient(&p);
                let hm = f.hessian(&p);
                let d1 = g[0] * tang[0] + g[1] * tang[1];
                let tht = tang[0] * (hm[0][0] * tang[0] + hm[0][1] * tang[1])
                    + tang[1] * (hm[1][0] * tang[0] + hm[1][1] * tang[1]);
                let d2 = tht - (g[0] * nrm[0] + g[1] * nrm[1]) / radius;
                (d1, d2)
            };
            let step = 2.0 * std::f64::consts::PI / m as f64;
            let vals: Vec<(f64, f64)> = (0..m).map(|k| ds(k as f64 * step)).collect();
            let gscale = vals.iter().map(|v| v.0.abs()).fold(0.0, f64::max);
            let hscale = vals.iter().map(|v| v.1.abs()).fold(0.0, f64::max);
            let tol_g = 1e-10 * gscale.max(1e-300);
            let tol_h = 1e-6 * hscale.max(1e-300);
            let mut out = Vec::new();
            let flat: Vec<bool> = vals.iter().map(|v| v.0.abs() <= tol_g && v.1.abs() <= tol_h).collect();
            if flat.iter().all(|&b| b) {
                let p = pt(0.0);
                out.push(bnd(p, [1.0, 0.0], 0, 0.0, false, Some([pt(0.0), pt(0.0)])));
                return out;
            }
            for k in 0..m {
                let k1 = (k + 1) % m;
                let (t0, t1) = (k as f64 * step, (k as f64 + 1.0) * step);
                if flat[k] {
                    if !flat[(k + m - 1) % m] {
                        // start of a flat arc
                        let mut e = k;
                        while flat[(e + 1) % m] {
                            e = (e + 1) % m;
                        }
                        let p = pt(t0);
                        let n = [t0.cos(), t0.sin()];
                        out.push(bnd(p, n, 0, 0.0, false, Some([p, pt(e as f64 * step)])));
                    }
                    continue;
                }
                if flat[k1] {
                    continue;
                }
                let (g0, g1) = (vals[k].0, vals[k1].0);
                if g0 == 0.0 || g0 * g1 < 0.0 {
                    let t = if g0 == 0.0 {
                        t0
                    } else {
                        safe_newton(|t| ds(t), t0, t1, tol_g).unwrap_or(0.5 * (t0 + t1))
                    };
                    let (_, d2) = ds(t);
                    let p = pt(t);
                    let n = [t.cos(), t.sin()];
                    out.push(bnd(p, n, (d2 < 0.0) as usize, d2, d2.abs() > tol_h, None));
                }
            }
            out
        }
    }
}

// ---------------------------------------------------------------------------
// Hypotheses

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub check: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub location: Option<Point>,
    pub value: f64,
    pub note: String,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HypTolerances {
    /// |∇f| must exceed this on the shell.
    pub grad_floor: f64,
    /// Minimal separation of critical values, relative to their range.
    pub separation_rel: f64,
}

impl Default for HypTolerances {
    fn default() -> Self {
        HypTolerances { grad_floor: 1e-10, separation_rel: 1e-6 }
    }
}

impl HypTolerances {
    /// Scale every threshold by `s` (s < 1 loosens).
    pub fn scaled(&self, s: f64) -> Self {
        HypTolerances { grad_floor: self.grad_floor * s, separation_rel: self.separation_rel * s }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub hyp0_ok: bool,
    pub hyp3_ok: bool,
    pub morse_ok: bool,
    pub distinctness_ok: bool,
    pub cvmax_condition_ok: bool,
    pub conddag_ok: Option<bool>,
    pub conddag_lhs: Option<f64>,
    pub conddag_rhs: Option<f64>,
    pub conddag_heuristic: bool,
    pub c0_margin: f64,
    pub kappa_f: f64,
    pub cvmax: f64,
    pub smoothness_note: String,
    pub critical_points: Vec<CriticalPoint>,
    pub boundary_points: Vec<CriticalPoint>,
    pub witnesses: Vec<Witness>,
}

impl HypothesisReport {
    /// Hypotheses 0, 3 and the Morse-case sufficient conditions.
    pub fn morse_pathway_ok(&self) -> bool {
        self.hyp0_ok
            && self.hyp3_ok
            && self.morse_ok
            && self.distinctness_ok
            && (self.conddag_ok == Some(true) || self.cvmax_condition_ok)
    }
}

/// Minimum of f over the closure of `region`: lattice minimum, then damped
/// Newton descent kept inside the region.
pub fn region_min(f: &dyn ScalarField, region: &Region, spacing: f64) -> (Point, f64) {
    let mut pts = lattice_points(region, spacing);
    pts.extend(region.boundary_samples(1024).iter().map(|s| s.point));
    let mut best = pts[0];
    let mut bv = f.value(&best);
    for p in &pts {
        let v = f.value(p);
        if v < bv {
            bv = v;
            best = *p;
        }
    }
    let dim = region.dim();
    for _ in 0..50 {
        let g = f.gradient(&best);
        if norm(&g) < 1e-14 {
            break;
        }
        let hm = f.hessian(&best);
        let step = if dim == 1 {
            if hm[0][0] > 0.0 {
                [g[0] / hm[0][0], 0.0]
            } else {
                [g[0] * spacing / norm(&g), 0.0]
            }
        } else {
            let ev = sym2_eigenvalues(&hm);
            let det = hm[0][0] * hm[1][1] - hm[0][1] * hm[1][0];
            if ev[0] > 0.0 {
                [(hm[1][1] * g[0] - hm[0][1] * g[1]) / det, (-hm[1][0] * g[0] + hm[0][0] * g[1]) / det]
            } else {
                [g[0] * spacing / norm(&g), g[1] * spacing / norm(&g)]
            }
        };
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-6 {
            let cand = [best[0] - t * step[0], best[1] - t * step[1]];
            if region.signed_distance(&cand) <= 0.0 && f.value(&cand) < bv {
                best = cand;
                bv = f.value(&cand);
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (best, bv)
}

fn boundary_min(f: &dyn ScalarField, region: &Region) -> (Point, f64) {
    let mut best = ([0.0; 2], f64::INFINITY);
    for s in region.boundary_samples(BOUNDARY_SAMPLES) {
        let v = f.value(&s.point);
        if v < best.1 {
            best = (s.point, v);
        }
    }
    for c in boundary_critical_points(f, region) {
        if c.value < best.1 {
            best = (c.location, c.value);
        }
    }
    best
}

/// κ_f = min_{∂Ω₊} f − min_{Ω₊} f.
pub fn kappa(f: &dyn ScalarField, omega_plus: &Region, spacing: f64) -> f64 {
    boundary_min(f, omega_plus).1 - region_min(f, omega_plus, spacing).1
}

/// Largest critical value of f inside Ω₋ (points and flat components).
pub fn cvmax(f: &dyn ScalarField, omega_minus: &Region, spacing: f64) -> Result<f64> {
    let cps = find_critical_points(f, omega_minus, spacing, &CritTolerances::default())?;
    cps.iter().map(|c| c.value).fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v)))).ok_or(Error::EmptyCriticalSet)
}

pub fn check_hypotheses(
    f: &dyn ScalarField,
    pair: &DomainPair,
    spacing: f64,
    tol: &HypTolerances,
) -> Result<HypothesisReport> {
    pair.validate()?;
    let mut witnesses = Vec::new();
    let crit = find_critical_points(f, &pair.minus, spacing, &CritTolerances::default())?;
    let outer_crit = find_critical_points(f, &pair.plus, spacing, &CritTolerances::default())?;
    let bpts = boundary_critical_points(f, &pair.plus);

    // Hypothesis 0
    let mut hyp0 = true;
    let shell: Vec<Point> = lattice_points(&pair.plus, spacing)
        .into_iter()
        .filter(|p| !pair.minus.contains(p))
        .chain(pair.plus.boundary_samples(BOUNDARY_SAMPLES).iter().map(|s| s.point))
        .chain(pair.minus.boundary_samples(BOUNDARY_SAMPLES).iter().map(|s| s.point))
        .collect();
    if let Some((p, g)) = shell
        .iter()
        .map(|p| (*p, norm(&f.gradient(p))))
        .min_by(|a, b| a.1.total_cmp(&b.1))
    {
        if g <= tol.grad_floor {
            hyp0 = false;
            witnesses.push(Witness {
                check: "hyp0".into(),
                location: Some(p),
                value: g,
                note: "|grad f| vanishes on the closed shell".into(),
            });
        }
    }
    let (dn_p, dn_min) = pair
        .minus
        .boundary_samples(BOUNDARY_SAMPLES)
        .iter()
        .map(|s| {
            let g = f.gradient(&s.point);
            (s.point, g[0] * s.normal[0] + g[1] * s.normal[1])
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    if dn_min <= 0.0 {
        hyp0 = false;
        witnesses.push(Witness {
            check: "hyp0".into(),
            location: Some(dn_p),
            value: dn_min,
            note: "outward normal derivative on the inner boundary is not positive".into(),
        });
    }
    let (bp_plus, min_plus) = boundary_min(f, &pair.plus);
    let (_, min_minus) = boundary_min(f, &pair.minus);
    if min_plus < min_minus {
        hyp0 = false;
        witnesses.push(Witness {
            check: "hyp0".into(),
            location: Some(bp_plus),
            value: min_plus - min_minus,
            note: "min of f on the outer boundary is below its min on the inner boundary".into(),
        });
    }

    // Hypothesis 3 on all critical points of Ω₊
    let cv = outer_crit.iter().map(|c| c.value).fold(f64::NEG_INFINITY, f64::max);
    let c0_margin = min_plus - cv;
    let hyp3 = c0_margin > 0.0;
    if !hyp3 {
        witnesses.push(Witness {
            check: "hyp3".into(),
            location: None,
            value: c0_margin,
            note: "a critical value reaches the outer boundary minimum".into(),
        });
    }

    // Morse: interior points and f restricted to ∂Ω₊
    let mut morse = true;
    for c in crit.iter().chain(bpts.iter()) {
        if !c.morse {
            morse = false;
            witnesses.push(Witness {
                check: "morse".into(),
                location: Some(c.location),
                value: c.hessian_det,
                note: format!("degenerate {:?} critical set", c.kind),
            });
        }
    }

    // distinctness
    let mut values: Vec<f64> = crit.iter().map(|c| c.value).collect();
    values.sort_by(f64::total_cmp);
    let range = values.last().copied().unwrap_or(0.0) - values.first().copied().unwrap_or(0.0);
    let sep = tol.separation_rel * range.max(1e-300);
    let mut distinct = true;
    for w in values.windows(2) {
        if w[1] - w[0] <= sep {
            distinct = false;
            witnesses.push(Witness {
                check: "distinctness".into(),
                location: None,
                value: w[1] - w[0],
                note: "two critical values coincide".into(),
            });
        }
    }
    let minima: Vec<&CriticalPoint> = crit.iter().filter(|c| c.index == 0).collect();
    let saddles: Vec<&CriticalPoint> = crit.iter().filter(|c| c.index == 1).collect();
    let mut diffs: Vec<f64> =
        saddles.iter().flat_map(|s| minima.iter().map(move |m| s.value - m.value)).collect();
    diffs.sort_by(f64::total_cmp);
    for w in diffs.windows(2) {
        if w[1] - w[0] <= sep {
            distinct = false;
            witnesses.push(Witness {
                check: "distinctness".into(),
                location: None,
                value: w[1] - w[0],
                note: "two barrier heights coincide".into(),
            });
        }
    }

    // cvmax condition
    let cvm = crit.iter().map(|c| c.value).fold(f64::NEG_INFINITY, f64::max);
    let min_in = region_min(f, &pair.minus, spacing).1;
    let cvmax_ok = !crit.is_empty() && (min_minus - cvm) > (cvm - min_in);
    if !cvmax_ok {
        witnesses.push(Witness {
            check: "cvmax_condition".into(),
            location: None,
            value: (min_minus - cvm) - (cvm - min_in),
            note: "min on inner boundary minus cvmax does not exceed cvmax minus min".into(),
        });
    }

    Ok(HypothesisReport {
        hyp0_ok: hyp0,
        hyp3_ok: hyp3,
        morse_ok: morse,
        distinctness_ok: distinct,
        cvmax_condition_ok: cvmax_ok,
        conddag_ok: None,
        conddag_lhs: None,
        conddag_rhs: None,
        conddag_heuristic: false,
        c0_margin,
        kappa_f: min_plus - region_min(f, &pair.plus, spacing).1,
        cvmax: cvm,
        smoothness_note: f.smoothness_note().to_string(),
        critical_points: crit,
        boundary_points: bpts,
        witnesses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_at_origin() {
        let f = Potential::harmonic1d();
        let (v, g, hm) = eval_field(&f, &[0.0, 0.0]);
        assert_eq!((v, g[0], hm[0][0]), (0.0, 0.0, 1.0));
    }

    #[test]
    fn flatbottom_is_flat_on_core() {
        let f = Potential::flatbottom1d();
        for x in [-0.2, -0.1, 0.0, 0.13, 0.2] {
            let (v, g, hm) = eval_field(&f, &[x, 0.0]);
            assert_eq!((v, g[0], hm[0][0]), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn radial2d_origin() {
        let f = Potential::radial2d();
        let (v, g, hm) = eval_field(&f, &[0.0, 0.0]);
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(g, [0.0, 0.0]);
        // u = |x|², φ = exp(−(1−u)^{−2}), φ'(0) = −2/e, Hessian = 2φ'(0)·I
        assert!((hm[0][0] + 4.0 / std::f64::consts::E).abs() < 1e-14);
    }

    #[test]
    fn polynomial_horner_derivatives() {
        let f = Potential::Polynomial1d(Polynomial1d { coeffs: vec![1.0, -2.0, 0.5, 3.0] });
        let x = 0.7;
        let (v, g, hm) = eval_field(&f, &[x, 0.0]);
        assert!((v - (1.0 - 2.0 * x + 0.5 * x * x + 3.0 * x * x * x)).abs() < 1e-14);
        assert!((g[0] - (-2.0 + x + 9.0 * x * x)).abs() < 1e-14);
        assert!((hm[0][0] - (1.0 + 18.0 * x)).abs() < 1e-14);
    }

    #[test]
    fn spline_reproduces_linear_data() {
        let f = Potential::RadialSpline2d(RadialSpline2d::default());
        for p in [[0.3, 0.2], [1.1, -0.4], [0.0, 1.9], [2.5, 0.0]] {
            let r2 = p[0] * p[0] + p[1] * p[1];
            assert!((f.value(&p) - r2).abs() < 1e-12);
        }
    }

    #[test]
    fn serde_catalog_roundtrip() {
        for p in Potential::catalog() {
            let s = serde_json::to_string(&p).unwrap();
            let back: Potential = serde_json::from_str(&s).unwrap();
            assert_eq!(p, back, "{s}");
        }
        let p: Potential = serde_json::from_str(r#"{"name":"doublewell1d","tilt":0.01}"#).unwrap();
        assert_eq!(p, Potential::Doublewell1d(Doublewell1d { tilt: 0.01, ..Default::default() }));
        let p: Potential = serde_json::from_str(r#"{"name":"flatbottom1d","a+":-2}"#).unwrap();
        assert!(matches!(p, Potential::Flatbottom1d(Flatbottom1d { a_plus, .. }) if a_plus == -2.0));
        assert!(serde_json::from_str::<Potential>(r#"{"name":"doublewell1d","depht":1}"#).is_err());
    }
}
