//! Euler–Maruyama exit simulation from the QSD, exit-law tests and the
//! hyperdynamics comparison.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::Region;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::potential::ScalarField;
use crate::stats::{histogram, ks_two_sample, tv_distance};
use crate::Point;

/// Bridge crossing probabilities below e^{-BRIDGE_CUTOFF} are not drawn.
const BRIDGE_CUTOFF: f64 = 40.0;

/// `x − ∇f(x)·dt + √(2dt/β)·noise`.
pub fn em_step(f: &dyn ScalarField, x: &Point, dt: f64, beta: f64, noise: &Point) -> Point {
    let g = f.gradient(x);
    let s = (2.0 * dt / beta).sqrt();
    if f.dim() == 1 {
        [x[0] - g[0] * dt + s * noise[0], 0.0]
    } else {
        [x[0] - g[0] * dt + s * noise[0], x[1] - g[1] * dt + s * noise[1]]
    }
}

/// Default time step min(h²/10, 10⁻³).
pub fn default_dt(h: f64) -> f64 {
    (h * h / 10.0).min(1e-3)
}

/// Per-sample random stream keyed by (seed, index).
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Sampler for a QSD given at grid nodes.
#[derive(Clone, Debug)]
pub enum QsdSampler {
    /// Nodes (including the endpoints) and cumulative trapezoid masses.
    Interval { x: Vec<f64>, cdf: Vec<f64> },
    /// Rejection sampling from the bounding box against bilinear interpolation.
    Disc { grid: Grid, density: Vec<f64>, envelope: f64 },
}

impl QsdSampler {
    pub fn new(grid: &Grid, density: &[f64]) -> Result<Self> {
        if density.len() != grid.n_dofs() {
            return Err(Error::Dimension { expected: grid.n_dofs(), got: density.len() });
        }
        if density.iter().any(|d| *d < 0.0 || !d.is_finite()) {
            return Err(Error::Invalid("density must be finite and nonnegative".into()));
        }
        match grid.region {
            Region::Interval { lo, hi } => {
                let mut x = Vec::with_capacity(grid.shape[0]);
                let mut v = Vec::with_capacity(grid.shape[0]);
                for k in 0..grid.shape[0] {
                    x.push(lo + k as f64 * grid.dx);
                    v.push(grid.dof_at(k as isize, 0).map_or(0.0, |d| density[d]));
                }
                *x.last_mut().unwrap() = hi;
                let mut cdf = vec![0.0; x.len()];
                for k in 1..x.len() {
                    cdf[k] = cdf[k - 1] + 0.5 * (v[k - 1] + v[k]) * (x[k] - x[k - 1]);
                }
                let total = *cdf.last().unwrap();
                if !(total > 0.0) {
                    return Err(Error::Invalid("density has no mass".into()));
                }
                cdf.iter_mut().for_each(|c| *c /= total);
                Ok(QsdSampler::Interval { x, cdf })
            }
            Region::Disc { .. } => {
                let mx = density.iter().copied().fold(0.0, f64::max);
                if !(mx > 0.0) {
                    return Err(Error::Invalid("density has no mass".into()));
                }
                Ok(QsdSampler::Disc { grid: grid.clone(), density: density.to_vec(), envelope: 1.01 * mx })
            }
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Result<Point> {
        match self {
            QsdSampler::Interval { x, cdf } => {
                let u: f64 = rng.random();
                let k = cdf.partition_point(|c| *c < u).clamp(1, x.len() - 1);
                let w = cdf[k] - cdf[k - 1];
                let t = if w > 0.0 { (u - cdf[k - 1]) / w } else { 0.5 };
                Ok([x[k - 1] + t * (x[k] - x[k - 1]), 0.0])
            }
            QsdSampler::Disc { grid, density, envelope } => {
                let (lo, hi) = grid.region.bounding_box();
                loop {
                    let p = [lo[0] + rng.random::<f64>() * (hi[0] - lo[0]), lo[1] + rng.random::<f64>() * (hi[1] - lo[1])];
                    let u: f64 = rng.random();
                    if !grid.region.contains(&p) {
                        continue;
                    }
                    let d = interpolate(grid, density, &p);
                    if d > *envelope {
                        return Err(Error::EnvelopeBust);
                    }
                    if u * envelope < d {
                        return Ok(p);
                    }
                }
            }
        }
    }
}

fn interpolate(grid: &Grid, v: &[f64], p: &Point) -> f64 {
    let u = (p[0] - grid.origin[0]) / grid.dx;
    let w = (p[1] - grid.origin[1]) / grid.dx;
    let (i, j) = (u.floor(), w.floor());
    let (a, b) = (u - i, w - j);
    let (i, j) = (i as isize, j as isize);
    let at = |i: isize, j: isize| grid.dof_at(i, j).map_or(0.0, |d| v[d]);
    (1.0 - a) * (1.0 - b) * at(i, j) + a * (1.0 - b) * at(i + 1, j) + (1.0 - a) * b * at(i, j + 1) + a * b * at(i + 1, j + 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitSample {
    pub index: u64,
    pub tau: f64,
    pub exit_location: Point,
    /// 0/1 for the left/right endpoint in 1D, the angle in [0, 2π) in 2D.
    pub param: f64,
    pub steps: u64,
    pub censored: bool,
}

fn boundary_param(region: &Region, p: &Point) -> f64 {
    match *region {
        Region::Interval { lo, hi } => {
            if (p[0] - lo).abs() <= (p[0] - hi).abs() {
                0.0
            } else {
                1.0
            }
        }
        Region::Disc { center, .. } => (p[1] - center[1]).atan2(p[0] - center[0]).rem_euclid(std::f64::consts::TAU),
    }
}

fn project(region: &Region, p: &Point) -> Point {
    match *region {
        Region::Interval { lo, hi } => [if (p[0] - lo).abs() <= (p[0] - hi).abs() { lo } else { hi }, 0.0],
        Region::Disc { center, radius } => {
            let d = [p[0] - center[0], p[1] - center[1]];
            let r = d[0].hypot(d[1]).max(f64::MIN_POSITIVE);
            [center[0] + radius * d[0] / r, center[1] + radius * d[1] / r]
        }
    }
}

/// Fraction s ∈ [0, 1] at which the segment a → b leaves the region.
fn crossing_fraction(region: &Region, a: &Point, b: &Point) -> f64 {
    match *region {
        Region::Interval { lo, hi } => {
            let e = if b[0] >= hi { hi } else { lo };
            ((e - a[0]) / (b[0] - a[0])).clamp(0.0, 1.0)
        }
        Region::Disc { center, radius } => {
            let q = [a[0] - center[0], a[1] - center[1]];
            let d = [b[0] - a[0], b[1] - a[1]];
            let aa = d[0] * d[0] + d[1] * d[1];
            let bb = q[0] * d[0] + q[1] * d[1];
            let cc = q[0] * q[0] + q[1] * q[1] - radius * radius;
            if aa == 0.0 {
                return 1.0;
            }
            ((-bb + (bb * bb - aa * cc).max(0.0).sqrt()) / aa).clamp(0.0, 1.0)
        }
    }
}

/// One trajectory advanced step by step.
struct Walker {
    x: Point,
    steps: u64,
    done: Option<(f64, Point)>,
}

impl Walker {
    fn new(x0: Point) -> Self {
        Walker { x: x0, steps: 0, done: None }
    }

    fn step<R: Rng>(
        &mut self,
        f: &dyn ScalarField,
        region: &Region,
        dt: f64,
        beta: f64,
        noise: &Point,
        rng: &mut R,
    ) {
        let y = em_step(f, &self.x, dt, beta, noise);
        self.steps += 1;
        let t0 = (self.steps - 1) as f64 * dt;
        if region.signed_distance(&y) >= 0.0 {
            let s = crossing_fraction(region, &self.x, &y);
            let p = [self.x[0] + s * (y[0] - self.x[0]), self.x[1] + s * (y[1] - self.x[1])];
            self.done = Some((t0 + s * dt, project(region, &p)));
            return;
        }
        // Brownian bridge: the path may have left and come back within the step.
        let sigma2 = 2.0 / beta;
        let bridge = |d0: f64, d1: f64| 2.0 * d0 * d1 / (sigma2 * dt);
        let exit_point = match *region {
            Region::Interval { lo, hi } => {
                let e_lo = bridge(self.x[0] - lo, y[0] - lo);
                let e_hi = bridge(hi - self.x[0], hi - y[0]);
                let (e, b) = if e_lo < e_hi { (e_lo, lo) } else { (e_hi, hi) };
                (e < BRIDGE_CUTOFF && rng.random::<f64>() < (-e).exp()).then_some([b, 0.0])
            }
            Region::Disc { .. } => {
                let e = bridge(-region.signed_distance(&self.x), -region.signed_distance(&y));
                (e < BRIDGE_CUTOFF && rng.random::<f64>() < (-e).exp())
                    .then(|| project(region, &[0.5 * (self.x[0] + y[0]), 0.5 * (self.x[1] + y[1])]))
            }
        };
        if let Some(p) = exit_point {
            self.done = Some((t0 + 0.5 * dt, p));
            return;
        }
        self.x = y;
    }

    fn finish(&self, region: &Region, index: u64, dt: f64) -> ExitSample {
        match self.done {
            Some((tau, p)) => ExitSample { index, tau, exit_location: p, param: boundary_param(region, &p), steps: self.steps, censored: false },
            None => ExitSample {
                index,
                tau: self.steps as f64 * dt,
                exit_location: self.x,
                param: f64::NAN,
                steps: self.steps,
                censored: true,
            },
        }
    }
}

fn normal<R: Rng>(rng: &mut R, dim: usize) -> Point {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = if dim == 2 { rng.sample(StandardNormal) } else { 0.0 };
    [a, b]
}

/// Run Euler–Maruyama from `x0` until the path leaves `region`. The exit
/// point of a step that ends outside is found by linear interpolation; a
/// step that stays inside may still exit with the Brownian-bridge crossing
/// probability, at the step midpoint.
pub fn simulate_exit<R: Rng>(
    f: &dyn ScalarField,
    region: &Region,
    x0: Point,
    dt: f64,
    beta: f64,
    max_steps: u64,
    rng: &mut R,
    index: u64,
) -> Result<ExitSample> {
    if !(dt > 0.0) || !(beta > 0.0) {
        return Err(Error::Invalid(format!("dt = {dt}, beta = {beta}")));
    }
    if !region.contains(&x0) {
        return Err(Error::Invalid("starting point outside the domain".into()));
    }
    let mut w = Walker::new(x0);
    while w.done.is_none() && w.steps < max_steps {
        let xi = normal(rng, f.dim());
        w.step(f, region, dt, beta, &xi, rng);
    }
    Ok(w.finish(region, index, dt))
}

/// The same Brownian path at steps dt and dt/2: each coarse increment is the
/// sum of two fine ones.
pub fn simulate_exit_coupled<R: Rng>(
    f: &dyn ScalarField,
    region: &Region,
    x0: Point,
    dt: f64,
    beta: f64,
    max_steps: u64,
    rng: &mut R,
    index: u64,
) -> Result<(ExitSample, ExitSample)> {
    if !region.contains(&x0) {
        return Err(Error::Invalid("starting point outside the domain".into()));
    }
    let (mut coarse, mut fine) = (Walker::new(x0), Walker::new(x0));
    let r = std::f64::consts::FRAC_1_SQRT_2;
    while (coarse.done.is_none() || fine.done.is_none()) && coarse.steps < max_steps {
        let a = normal(rng, f.dim());
        let b = normal(rng, f.dim());
        if fine.done.is_none() {
            fine.step(f, region, 0.5 * dt, beta, &a, rng);
            if fine.done.is_none() {
                fine.step(f, region, 0.5 * dt, beta, &b, rng);
            }
        }
        if coarse.done.is_none() {
            coarse.step(f, region, dt, beta, &[r * (a[0] + b[0]), r * (a[1] + b[1])], rng);
        } else {
            coarse.steps += 1;
        }
    }
    let mut c = coarse.finish(region, index, dt);
    c.steps = c.steps.min(coarse.steps);
    Ok((c, fine.finish(region, index, 0.5 * dt)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McHeader {
    pub beta: f64,
    pub dt: f64,
    pub n: usize,
    pub seed: u64,
    pub max_steps: u64,
    pub field_id: String,
    pub domain_id: String,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitStatistics {
    pub config: McHeader,
    pub samples: Vec<ExitSample>,
}

#[derive(Clone, Debug)]
pub struct McSettings {
    pub beta: f64,
    pub dt: f64,
    pub n: usize,
    pub seed: u64,
    pub max_steps: u64,
}

fn run_indexed<T: Send>(n: usize, job: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n as u64).into_par_iter().map(job).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n as u64).map(job).collect()
    }
}

fn header(s: &McSettings, dt: f64, field_id: &str, region: &Region) -> McHeader {
    McHeader {
        beta: s.beta,
        dt,
        n: s.n,
        seed: s.seed,
        max_steps: s.max_steps,
        field_id: field_id.to_string(),
        domain_id: serde_json_like(region),
        version: crate::VERSION.to_string(),
    }
}

fn serde_json_like(region: &Region) -> String {
    match *region {
        Region::Interval { lo, hi } => format!("interval({lo},{hi})"),
        Region::Disc { center, radius } => format!("disc(({},{}),{radius})", center[0], center[1]),
    }
}

/// `n` exit samples from QSD starts; sample `i` uses the stream (seed, i),
/// so the result does not depend on the number of worker threads.
pub fn exit_ensemble(
    f: &dyn ScalarField,
    region: &Region,
    qsd: &QsdSampler,
    s: &McSettings,
    field_id: &str,
) -> Result<ExitStatistics> {
    let samples = run_indexed(s.n, |i| {
        let mut rng = sample_rng(s.seed, i);
        let x0 = qsd.sample(&mut rng)?;
        simulate_exit(f, region, x0, s.dt, s.beta, s.max_steps, &mut rng, i)
    })?;
    Ok(ExitStatistics { config: header(s, s.dt, field_id, region), samples })
}

/// Coupled ensembles at dt and dt/2 from the same starts and noise.
pub fn exit_ensemble_coupled(
    f: &dyn ScalarField,
    region: &Region,
    qsd: &QsdSampler,
    s: &McSettings,
    field_id: &str,
) -> Result<(ExitStatistics, ExitStatistics)> {
    let pairs = run_indexed(s.n, |i| {
        let mut rng = sample_rng(s.seed, i);
        let x0 = qsd.sample(&mut rng)?;
        simulate_exit_coupled(f, region, x0, s.dt, s.beta, s.max_steps, &mut rng, i)
    })?;
    let (a, b): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    Ok((
        ExitStatistics { config: header(s, s.dt, field_id, region), samples: a },
        ExitStatistics { config: header(s, 0.5 * s.dt, field_id, region), samples: b },
    ))
}

impl ExitStatistics {
    pub fn exited(&self) -> impl Iterator<Item = &ExitSample> {
        self.samples.iter().filter(|s| !s.censored)
    }

    pub fn taus(&self) -> Vec<f64> {
        self.exited().map(|s| s.tau).collect()
    }

    pub fn censored_fraction(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().filter(|s| s.censored).count() as f64 / self.samples.len() as f64
    }

    /// Mean exit time and its standard error.
    pub fn mean_tau(&self) -> (f64, f64) {
        let t = self.taus();
        let n = t.len() as f64;
        if n < 2.0 {
            return (t.first().copied().unwrap_or(f64::NAN), f64::NAN);
        }
        let m = t.iter().sum::<f64>() / n;
        let v = t.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    }

    pub fn empirical_rate(&self) -> f64 {
        1.0 / self.mean_tau().0
    }

    /// Exit-location category: endpoint in 1D, angle bin in 2D.
    pub fn location_bins(&self, bins: usize) -> (Vec<usize>, usize) {
        let is_1d = self.config.domain_id.starts_with("interval");
        let cats = if is_1d { 2 } else { bins };
        let v = self
            .exited()
            .map(|s| {
                if is_1d {
                    s.param as usize
                } else {
                    ((s.param / std::f64::consts::TAU * bins as f64) as usize).min(bins - 1)
                }
            })
            .collect();
        (v, cats)
    }

    /// Normalized histogram of exit locations over `bins` slices of the
    /// parameter range ([0, 1] in 1D, [0, 2π) in 2D).
    pub fn location_histogram(&self, bins: usize) -> Vec<f64> {
        let is_1d = self.config.domain_id.starts_with("interval");
        let hi = if is_1d { 1.0 + 1e-9 } else { std::f64::consts::TAU };
        histogram(&self.exited().map(|s| s.param).collect::<Vec<_>>(), 0.0, hi, bins)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,tau,x,y,param,steps,censored\n");
        for e in &self.samples {
            let _ = writeln!(
                s,
                "{},{:.17e},{:.17e},{:.17e},{},{},{}",
                e.index, e.tau, e.exit_location[0], e.exit_location[1], e.param, e.steps, e.censored
            );
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperdynReport {
    pub boost: f64,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
    pub tv_distance: f64,
    pub bins: usize,
    pub alpha: f64,
    pub tv_tolerance: f64,
    pub ks_pass: bool,
    pub tv_pass: bool,
}

/// Two-sample KS between τ and B·τ^{δf}, and TV distance between the exit
/// location histograms.
pub fn hyperdyn_compare(a: &ExitStatistics, b: &ExitStatistics, boost: f64, bins: usize, alpha: f64, tv_tolerance: f64) -> HyperdynReport {
    let ta = a.taus();
    let tb: Vec<f64> = b.taus().iter().map(|t| boost * t).collect();
    let (d, p) = ks_two_sample(&ta, &tb);
    let tv = tv_distance(&a.location_histogram(bins), &b.location_histogram(bins));
    HyperdynReport {
        boost,
        ks_statistic: d,
        ks_p_value: p,
        tv_distance: tv,
        bins,
        alpha,
        tv_tolerance,
        ks_pass: p > alpha,
        tv_pass: tv <= tv_tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Potential;

    #[test]
    fn step_examples() {
        let f = Potential::harmonic1d();
        let x = em_step(&f, &[0.4, 0.0], 0.01, 5.0, &[0.0, 0.0]);
        assert!((x[0] - 0.4 * 0.99).abs() < 1e-15);
        let flat = Potential::flatbottom1d();
        assert_eq!(em_step(&flat, &[0.0, 0.0], 0.01, 5.0, &[0.0, 0.0]), [0.0, 0.0]);
    }

    #[test]
    fn fast_exit_near_boundary() {
        let f = Potential::Polynomial1d(crate::potential::Polynomial1d { coeffs: vec![0.0, -50.0] });
        let r = Region::interval(-1.0, 1.0);
        let mut rng = sample_rng(1, 0);
        let e = simulate_exit(&f, &r, [0.999, 0.0], 1e-3, 10.0, 1000, &mut rng, 0).unwrap();
        assert!(!e.censored);
        assert!(e.tau <= 2e-3);
        assert_eq!(e.exit_location, [1.0, 0.0]);
        assert_eq!(e.param, 1.0);
    }
}
