//! Laplace integrals, the exit-rate and exit-density formulas and the boost
//! factor, by quadrature and by Hessian (Laplace-method) evaluation.
//!
//! Every integral of `e^{-2f/h}` is returned relative to a caller-chosen
//! `reference` value, i.e. as `∫ e^{-2(f - reference)/h}`, so that ratios
//! never under- or overflow.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::domain::{DomainPair, Region, BOUNDARY_SAMPLES};
use crate::error::{Error, Result};
use crate::potential::{
    boundary_critical_points, find_critical_points, lattice_points, region_min, sym2_eigenvalues,
    CritTolerances, CriticalKind, CriticalPoint, Field, ScalarField,
};
use crate::spectra::BoundaryDensity;
use crate::Point;

pub const QUADRATURE_CELLS_1D: usize = 20_000;
pub const QUADRATURE_CELLS_2D: usize = 600;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Quadrature,
    Hessian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityForm {
    Flux,
    GaussianMixture,
}

/// Quadrature nodes and weights on the closure of `region`.
pub fn quadrature_nodes(region: &Region) -> Vec<(Point, f64)> {
    match *region {
        Region::Interval { lo, hi } => {
            let n = QUADRATURE_CELLS_1D;
            let dx = (hi - lo) / n as f64;
            (0..=n)
                .map(|k| ([lo + k as f64 * dx, 0.0], if k == 0 || k == n { 0.5 * dx } else { dx }))
                .collect()
        }
        Region::Disc { radius, .. } => {
            let dx = 2.0 * radius / QUADRATURE_CELLS_2D as f64;
            lattice_points(region, dx)
                .into_iter()
                .filter(|p| region.signed_distance(p) < 0.0)
                .map(|p| (p, dx * dx))
                .collect()
        }
    }
}

fn seed_spacing(region: &Region) -> f64 {
    region.diameter() / if region.dim() == 1 { 2000.0 } else { 200.0 }
}

/// Interior local minima; flat or degenerate ones are an error.
fn morse_minima(f: &dyn ScalarField, region: &Region) -> Result<Vec<CriticalPoint>> {
    let cps = find_critical_points(f, region, seed_spacing(region), &CritTolerances::default())?;
    let mut out = Vec::new();
    for c in cps.into_iter().filter(|c| c.index == 0) {
        if c.kind == CriticalKind::Component || !c.morse || c.hessian_det <= 0.0 {
            return Err(Error::DegenerateMinimum(c.location));
        }
        out.push(c);
    }
    Ok(out)
}

/// `∫_Ω e^{-2(f - reference)/h} dx`.
pub fn laplace_volume_integral(
    f: &dyn ScalarField,
    region: &Region,
    h: f64,
    method: Method,
    reference: f64,
) -> Result<f64> {
    match method {
        Method::Quadrature => {
            Ok(quadrature_nodes(region).iter().map(|(p, w)| w * (-2.0 * (f.value(p) - reference) / h).exp()).sum())
        }
        Method::Hessian => {
            let d = region.dim() as f64;
            let mins = morse_minima(f, region)?;
            if mins.is_empty() {
                return Err(Error::EmptyCriticalSet);
            }
            Ok(mins
                .iter()
                .map(|c| (-2.0 * (c.value - reference) / h).exp() * (PI * h).powf(d / 2.0) / c.hessian_det.sqrt())
                .sum())
        }
    }
}

/// Local minima of f|∂Ω; each must have ∂ₙf > 0.
fn boundary_minima(f: &dyn ScalarField, region: &Region) -> Result<Vec<CriticalPoint>> {
    let mut out = Vec::new();
    for c in boundary_critical_points(f, region).into_iter().filter(|c| c.index == 0) {
        let dn = c.normal_derivative.unwrap_or(0.0);
        if dn <= 0.0 {
            return Err(Error::NegativeNormalDerivative { at: c.location, value: dn });
        }
        if !c.morse || c.hessian_det <= 0.0 {
            return Err(Error::DegenerateMinimum(c.location));
        }
        out.push(c);
    }
    Ok(out)
}

/// `∫_∂Ω 2∂ₙf e^{-2(f - reference)/h} dσ`; in 1D a two-term sum.
pub fn boundary_flux_integral(
    f: &dyn ScalarField,
    region: &Region,
    h: f64,
    method: Method,
    reference: f64,
) -> Result<f64> {
    match method {
        Method::Quadrature => Ok(region
            .boundary_samples(BOUNDARY_SAMPLES)
            .iter()
            .map(|s| {
                let g = f.gradient(&s.point);
                let dn = g[0] * s.normal[0] + g[1] * s.normal[1];
                s.weight * 2.0 * dn * (-2.0 * (f.value(&s.point) - reference) / h).exp()
            })
            .sum()),
        Method::Hessian => {
            let e = (region.dim() as f64 - 1.0) / 2.0;
            Ok(boundary_minima(f, region)?
                .iter()
                .map(|c| {
                    2.0 * c.normal_derivative.unwrap() * (-2.0 * (c.value - reference) / h).exp() * (PI * h).powf(e)
                        / c.hessian_det.sqrt()
                })
                .sum())
        }
    }
}

/// Minimum of f over the closure of `region`.
pub fn min_value(f: &dyn ScalarField, region: &Region) -> f64 {
    region_min(f, region, seed_spacing(region)).1
}

/// Leading-order λ₁ of the Dirichlet operator on Ω₊:
/// `h·∫_∂Ω 2∂ₙf e^{-2f/h} / ∫_Ω e^{-2f/h}`, with both integrals by
/// quadrature (`Flux`) or by the Laplace method (`Hessian`).
pub fn lambda1_asymptotic(f: &dyn ScalarField, pair: &DomainPair, h: f64, method: Method) -> Result<f64> {
    let r = &pair.plus;
    let reference = min_value(f, r);
    let top = boundary_flux_integral(f, r, h, method, reference)?;
    let bottom = laplace_volume_integral(f, r, h, method, reference)?;
    Ok(h * top / bottom)
}

/// Leading-order exit density on ∂Ω₊.
pub fn exit_density_asymptotic(
    f: &dyn ScalarField,
    region: &Region,
    h: f64,
    form: DensityForm,
) -> Result<BoundaryDensity> {
    let samples = region.boundary_samples(BOUNDARY_SAMPLES);
    let points: Vec<Point> = samples.iter().map(|s| s.point).collect();
    let params: Vec<f64> = samples.iter().map(|s| s.param).collect();
    let weights: Vec<f64> = samples.iter().map(|s| s.weight).collect();
    let reference = samples.iter().map(|s| f.value(&s.point)).fold(f64::INFINITY, f64::min);
    match form {
        DensityForm::Flux => {
            let values = samples
                .iter()
                .map(|s| {
                    let g = f.gradient(&s.point);
                    let dn = g[0] * s.normal[0] + g[1] * s.normal[1];
                    2.0 * dn * (-2.0 * (f.value(&s.point) - reference) / h).exp()
                })
                .collect();
            BoundaryDensity::from_samples(points, params, values, weights)
        }
        DensityForm::GaussianMixture => {
            let mins = boundary_minima(f, region)?;
            let t: Vec<f64> = mins
                .iter()
                .map(|c| {
                    let lam = if region.dim() == 1 { 1.0 } else { c.hessian_det };
                    let mass = if region.dim() == 1 { 1.0 } else { (PI * h / lam).sqrt() };
                    2.0 * c.normal_derivative.unwrap() * (-2.0 * (c.value - reference) / h).exp() * mass
                })
                .collect();
            let mut values = vec![0.0; samples.len()];
            match *region {
                Region::Interval { .. } => {
                    for (c, tk) in mins.iter().zip(&t) {
                        let k = if c.location[0] <= points[0][0] { 0 } else { 1 };
                        values[k] += tk;
                    }
                }
                Region::Disc { center, radius } => {
                    for (c, tk) in mins.iter().zip(&t) {
                        let theta0 = (c.location[1] - center[1]).atan2(c.location[0] - center[0]);
                        let sigma = (h / (2.0 * c.hessian_det)).sqrt();
                        let mut g: Vec<f64> = params
                            .iter()
                            .map(|th| {
                                let ds = radius * ((th - theta0 + PI).rem_euclid(2.0 * PI) - PI);
                                if ds.abs() > 6.0 * sigma {
                                    0.0
                                } else {
                                    (-0.5 * (ds / sigma).powi(2)).exp()
                                }
                            })
                            .collect();
                        let z: f64 = g.iter().zip(&weights).map(|(a, w)| a * w).sum();
                        if z > 0.0 {
                            g.iter_mut().for_each(|v| *v /= z);
                        } else {
                            // narrower than the sampling: put the mass on the nearest sample
                            let k = params
                                .iter()
                                .enumerate()
                                .min_by(|a, b| {
                                    let da = ((a.1 - theta0 + PI).rem_euclid(2.0 * PI) - PI).abs();
                                    let db = ((b.1 - theta0 + PI).rem_euclid(2.0 * PI) - PI).abs();
                                    da.total_cmp(&db)
                                })
                                .unwrap()
                                .0;
                            g[k] = 1.0 / weights[k];
                        }
                        for (v, gi) in values.iter_mut().zip(&g) {
                            *v += tk * gi;
                        }
                    }
                }
            }
            BoundaryDensity::from_samples(points, params, values, weights)
        }
    }
}

/// Mixture weights t_k, normalized, with their boundary points.
pub fn mixture_weights(f: &dyn ScalarField, region: &Region, h: f64) -> Result<Vec<(Point, f64)>> {
    let mins = boundary_minima(f, region)?;
    let reference = mins.iter().map(|c| c.value).fold(f64::INFINITY, f64::min);
    let t: Vec<f64> = mins
        .iter()
        .map(|c| {
            let mass = if region.dim() == 1 { 1.0 } else { (PI * h / c.hessian_det).sqrt() };
            2.0 * c.normal_derivative.unwrap() * (-2.0 * (c.value - reference) / h).exp() * mass
        })
        .collect();
    let s: f64 = t.iter().sum();
    Ok(mins.iter().zip(t).map(|(c, tk)| (c.location, tk / s)).collect())
}

/// `B = ∫_Ω₊ e^{-2f/h} / ∫_Ω₊ e^{-2(f+δf)/h}` for the bump of `field`.
pub fn boost_factor(field: &Field, pair: &DomainPair, h: f64) -> Result<f64> {
    let Some(_) = &field.bump else {
        return Ok(1.0);
    };
    let plus = &pair.plus;
    let rim = pair.minus.boundary_samples(BOUNDARY_SAMPLES);
    let outside = lattice_points(plus, seed_spacing(plus))
        .into_iter()
        .filter(|p| !pair.minus.contains(p))
        .chain(rim.iter().map(|s| s.point));
    for p in outside {
        let d = field.delta(&p);
        if d.abs() > 1e-12 {
            return Err(Error::SupportViolation { at: p, value: d });
        }
    }
    let f = &field.potential;
    let reference = min_value(f, plus);
    let nodes = quadrature_nodes(plus);
    let (mut a, mut b) = (0.0, 0.0);
    for (p, w) in &nodes {
        let v = f.value(p) - reference;
        a += w * (-2.0 * v / h).exp();
        b += w * (-2.0 * (v + field.delta(p)) / h).exp();
    }
    Ok(a / b)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    /// Extrapolated limit of h·log λ₁ as h → 0.
    pub limit: f64,
    pub slope: f64,
    pub r2: f64,
}

/// Least-squares fit of `h·log λ₁ = limit + slope·h`.
pub fn slope_fit(hs: &[f64], lambdas: &[f64]) -> Result<SlopeFit> {
    if hs.len() < 3 || hs.len() != lambdas.len() {
        return Err(Error::Invalid("slope fit needs at least three (h, λ₁) pairs".into()));
    }
    if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0)) {
        return Err(Error::Invalid(format!("non-positive eigenvalue {l}")));
    }
    let (lo, hi) = hs.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &h| (a.min(h), b.max(h)));
    if hi < 1.5 * lo {
        return Err(Error::IllConditioned);
    }
    let y: Vec<f64> = hs.iter().zip(lambdas).map(|(h, l)| h * l.ln()).collect();
    let n = hs.len() as f64;
    let mx = hs.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = hs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = hs.iter().zip(&y).map(|(x, v)| (x - mx) * (v - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let limit = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(SlopeFit { limit, slope, r2 })
}

/// Bracket `[(1/C_f)h^{d/2}, Vol(Ω)]` for `∫_Ω e^{-2(f - min f)/h}`, with
/// C_f from the Laplace method and a factor 2 of margin. For degenerate
/// minima the largest Hessian eigenvalue near the minimum set is used.
pub fn laplace_bracket(f: &dyn ScalarField, region: &Region, h: f64) -> Result<(f64, f64)> {
    let reference = min_value(f, region);
    let d = region.dim() as f64;
    let lower = match laplace_volume_integral(f, region, h, Method::Hessian, reference) {
        Ok(v) => 0.5 * v,
        Err(Error::DegenerateMinimum(_)) | Err(Error::EmptyCriticalSet) => {
            let lam = lattice_points(region, seed_spacing(region))
                .iter()
                .filter(|p| f.value(p) - reference <= h)
                .map(|p| {
                    let ev = sym2_eigenvalues(&f.hessian(p));
                    ev[0].abs().max(ev[1].abs())
                })
                .fold(0.0, f64::max)
                .max(1e-12);
            0.5 * (PI * h / lam).powf(d / 2.0)
        }
        Err(e) => return Err(e),
    };
    Ok((lower, region.measure()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegralPair {
    pub quadrature: f64,
    pub hessian: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub h: f64,
    pub kappa_f: f64,
    /// Integrals below are relative to this value of f.
    pub reference: f64,
    pub volume_integral: IntegralPair,
    pub boundary_flux_integral: IntegralPair,
    pub lambda1_asym_flux: f64,
    pub lambda1_asym_hessian: Option<f64>,
    pub lambda1_numeric: Option<f64>,
    pub ratio_numeric_flux: Option<f64>,
    pub ratio_hessian_flux: Option<f64>,
    pub boost_factor_b: Option<f64>,
    pub bracket: (f64, f64),
    pub notes: Vec<String>,
}

/// All asymptotic quantities at one `h`. Hessian-form values are left empty
/// (with a note) when the field is not Morse on Ω₊.
pub fn asymptotic_report(field: &Field, pair: &DomainPair, h: f64, lambda1_numeric: Option<f64>) -> Result<AsymptoticReport> {
    let f: &dyn ScalarField = &field.potential;
    let r = &pair.plus;
    let reference = min_value(f, r);
    let kappa_f = r.boundary_samples(BOUNDARY_SAMPLES).iter().map(|s| f.value(&s.point)).fold(f64::INFINITY, f64::min)
        - reference;
    let mut notes = Vec::new();
    let mut hess = |res: Result<f64>, what: &str| match res {
        Ok(v) => Some(v),
        Err(e) => {
            notes.push(format!("{what}: {e}"));
            None
        }
    };
    let vq = laplace_volume_integral(f, r, h, Method::Quadrature, reference)?;
    let vh = hess(laplace_volume_integral(f, r, h, Method::Hessian, reference), "hessian volume integral");
    let bq = boundary_flux_integral(f, r, h, Method::Quadrature, reference)?;
    let bh = hess(boundary_flux_integral(f, r, h, Method::Hessian, reference), "hessian boundary integral");
    let flux = h * bq / vq;
    let lh = match (vh, bh) {
        (Some(v), Some(b)) => Some(h * b / v),
        _ => None,
    };
    let boost = if field.bump.is_some() { Some(boost_factor(field, pair, h)?) } else { None };
    Ok(AsymptoticReport {
        h,
        kappa_f,
        reference,
        volume_integral: IntegralPair { quadrature: vq, hessian: vh },
        boundary_flux_integral: IntegralPair { quadrature: bq, hessian: bh },
        lambda1_asym_flux: flux,
        lambda1_asym_hessian: lh,
        lambda1_numeric,
        ratio_numeric_flux: lambda1_numeric.map(|l| l / flux),
        ratio_hessian_flux: lh.map(|l| l / flux),
        boost_factor_b: boost,
        bracket: laplace_bracket(f, r, h)?,
        notes,
    })
}
