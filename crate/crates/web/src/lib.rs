//! Browser demo: three small exitlab computations on one-dimensional fields,
//! exported to JavaScript with JSON in and JSON out.
//!
//! The plain functions (`profile`, `rate_series`, `exit_histogram`) are what
//! the native tests call; the `*_json` wrappers are the wasm entry points.

use exitlab::asymptotics::{asymptotic_report, slope_fit, SlopeFit};
use exitlab::mc::{default_dt, exit_ensemble, McSettings};
use exitlab::pipeline::{qsd_setup, solve0};
use exitlab::spectra::{generator_rate, EigenSettings};
use exitlab::{beta_from_h, h_from_beta, Bc, DomainPair, Field, GridPolicy, Potential, ScalarField};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Largest ensemble the page may request.
pub const MAX_SAMPLES: usize = 20_000;

/// What the page sends: a catalog potential, optional domains and grid.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Setup {
    pub potential: Potential,
    #[serde(default)]
    pub domains: Option<DomainPair>,
    #[serde(default)]
    pub grid: GridPolicy,
}

impl Setup {
    pub fn parse(json: &str) -> Result<Self, String> {
        let s: Setup = serde_json::from_str(json).map_err(|e| e.to_string())?;
        if s.potential.dim() != 1 {
            return Err(format!("{} is two-dimensional; the demo runs 1D fields only", s.potential.name()));
        }
        let pair = s.pair();
        pair.validate().map_err(|e| e.to_string())?;
        if pair.dim() != 1 {
            return Err("domains must be intervals".into());
        }
        Ok(s)
    }

    fn pair(&self) -> DomainPair {
        self.domains.clone().unwrap_or_else(|| self.potential.default_domains())
    }

    fn field(&self) -> Field {
        Field { potential: self.potential.clone(), bump: None }
    }
}

fn positive(name: &str, v: f64) -> Result<(), String> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(format!("{name} must be positive, got {v}"))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Profile {
    pub h: f64,
    pub x: Vec<f64>,
    pub f: Vec<f64>,
    /// QSD density at the nodes.
    pub qsd: Vec<f64>,
    pub lambda1: f64,
    /// Exit rate of the diffusion, λ₁/(2h).
    pub rate: f64,
    /// Exit probability through the left and right endpoints.
    pub exit_left: f64,
    pub exit_right: f64,
}

/// Potential, QSD and exit-point law on Ω₊ at one h.
pub fn profile(setup: &Setup, h: f64) -> Result<Profile, String> {
    positive("h", h)?;
    let field = setup.field();
    let pair = setup.pair();
    let q = qsd_setup(&field, &pair.plus, h, &setup.grid, &EigenSettings::default()).map_err(|e| e.to_string())?;
    let grid = &q.solve.op.grid;
    let x: Vec<f64> = grid.coords.iter().map(|p| p[0]).collect();
    let f = grid.coords.iter().map(|p| field.value(p)).collect();
    let d = &q.exit_density;
    let mut side = [0.0; 2];
    for ((p, v), w) in d.params.iter().zip(&d.values).zip(&d.weights) {
        side[usize::from(*p > 0.5)] += v * w;
    }
    let total = side[0] + side[1];
    Ok(Profile {
        h,
        x,
        f,
        qsd: q.density.clone(),
        lambda1: q.lambda1(),
        rate: generator_rate(q.lambda1(), h),
        exit_left: side[0] / total,
        exit_right: side[1] / total,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RatePoint {
    pub h: f64,
    pub numeric: f64,
    pub asym_flux: f64,
    pub asym_hessian: Option<f64>,
    /// numeric / asym_flux.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateSeries {
    pub kappa_f: f64,
    pub points: Vec<RatePoint>,
    /// Fit of h·log λ₁ against h; absent with fewer than three points.
    pub fit: Option<SlopeFit>,
}

/// Smallest Dirichlet eigenvalue on Ω₊ against its asymptotic formula, on
/// `n` h values spaced geometrically in `[h_min, h_max]`.
pub fn rate_series(setup: &Setup, h_min: f64, h_max: f64, n: usize) -> Result<RateSeries, String> {
    positive("h_min", h_min)?;
    positive("h_max", h_max)?;
    if h_max < h_min || n == 0 || n > 40 {
        return Err("need h_min ≤ h_max and 1 ≤ n ≤ 40".into());
    }
    let field = setup.field();
    let pair = setup.pair();
    let hs: Vec<f64> = (0..n)
        .map(|i| if n == 1 { h_min } else { h_min * (h_max / h_min).powf(i as f64 / (n - 1) as f64) })
        .collect();
    let mut points = Vec::with_capacity(n);
    let mut kappa_f = f64::NAN;
    for &h in &hs {
        exitlab::operator::check_h_range(exitlab::potential::kappa(&field, &pair.plus, pair.plus.diameter() / 2000.0), h)
            .map_err(|e| e.to_string())?;
        let s = solve0(&field, &pair.plus, Bc::Dirichlet, h, &setup.grid, 2, &EigenSettings::default())
            .map_err(|e| e.to_string())?;
        let l1 = s.result.eigenvalues[0];
        let r = asymptotic_report(&field, &pair, h, Some(l1)).map_err(|e| e.to_string())?;
        kappa_f = r.kappa_f;
        points.push(RatePoint {
            h,
            numeric: l1,
            asym_flux: r.lambda1_asym_flux,
            asym_hessian: r.lambda1_asym_hessian,
            ratio: r.ratio_numeric_flux,
        });
    }
    let lambdas: Vec<f64> = points.iter().map(|p| p.numeric).collect();
    let fit = if n >= 3 { slope_fit(&hs, &lambdas).ok() } else { None };
    Ok(RateSeries { kappa_f, points, fit })
}

#[derive(Clone, Debug, Serialize)]
pub struct Histogram {
    pub beta: f64,
    pub h: f64,
    pub n: usize,
    pub seed: u64,
    pub version: &'static str,
    /// Bin edges in time, `bins + 1` of them.
    pub edges: Vec<f64>,
    /// Empirical density of τ per bin.
    pub density: Vec<f64>,
    /// Exponential density with the spectral rate at bin centers.
    pub model: Vec<f64>,
    pub rate: f64,
    pub mean_tau: f64,
    pub exit_left: f64,
    pub exit_right: f64,
    pub censored: usize,
}

/// Monte Carlo exit times from the QSD at inverse temperature `beta`,
/// histogrammed against the exponential law with the spectral rate.
pub fn exit_histogram(setup: &Setup, beta: f64, n: usize, seed: u64, bins: usize) -> Result<Histogram, String> {
    positive("beta", beta)?;
    if n == 0 || n > MAX_SAMPLES || bins == 0 || bins > 200 {
        return Err(format!("need 1 ≤ n ≤ {MAX_SAMPLES} and 1 ≤ bins ≤ 200"));
    }
    let h = h_from_beta(beta);
    let field = setup.field();
    let pair = setup.pair();
    let q = qsd_setup(&field, &pair.plus, h, &setup.grid, &EigenSettings::default()).map_err(|e| e.to_string())?;
    let rate = generator_rate(q.lambda1(), h);
    let settings = McSettings { beta: beta_from_h(h), dt: default_dt(h), n, seed, max_steps: 20_000_000 };
    let st = exit_ensemble(&field, &pair.plus, &q.sampler, &settings, setup.potential.name()).map_err(|e| e.to_string())?;
    let taus = st.taus();
    let censored = n - taus.len();
    if taus.is_empty() {
        return Err("every trajectory was censored".into());
    }

    // Cover about 99% of the exponential law.
    let t_max = (4.6 / rate).max(taus.iter().copied().fold(0.0, f64::max).min(10.0 / rate));
    let width = t_max / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| i as f64 * width).collect();
    let mut counts = vec![0usize; bins];
    for &t in &taus {
        let b = (t / width) as usize;
        if b < bins {
            counts[b] += 1;
        }
    }
    let m = taus.len() as f64;
    let density = counts.iter().map(|&c| c as f64 / (m * width)).collect();
    let model = (0..bins).map(|i| rate * (-rate * (i as f64 + 0.5) * width).exp()).collect();
    let right = st.exited().filter(|s| s.param > 0.5).count() as f64;
    Ok(Histogram {
        beta,
        h,
        n,
        seed,
        version: exitlab::VERSION,
        edges,
        density,
        model,
        rate,
        mean_tau: taus.iter().sum::<f64>() / m,
        exit_left: 1.0 - right / m,
        exit_right: right / m,
        censored,
    })
}

/// The catalog entries the page offers, with default parameters.
pub fn catalog() -> Vec<serde_json::Value> {
    Potential::catalog()
        .into_iter()
        .filter(|p| p.dim() == 1)
        .map(|p| serde_json::to_value(&p).expect("potentials serialize"))
        .collect()
}

fn to_json<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string())).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = catalog)]
pub fn catalog_json() -> String {
    serde_json::to_string(&catalog()).expect("catalog serializes")
}

#[wasm_bindgen(js_name = profile)]
pub fn profile_json(setup: &str, h: f64) -> Result<String, JsError> {
    to_json(Setup::parse(setup).and_then(|s| profile(&s, h)))
}

#[wasm_bindgen(js_name = rateSeries)]
pub fn rate_series_json(setup: &str, h_min: f64, h_max: f64, n: usize) -> Result<String, JsError> {
    to_json(Setup::parse(setup).and_then(|s| rate_series(&s, h_min, h_max, n)))
}

#[wasm_bindgen(js_name = exitHistogram)]
pub fn exit_histogram_json(setup: &str, beta: f64, n: usize, seed: u64, bins: usize) -> Result<String, JsError> {
    to_json(Setup::parse(setup).and_then(|s| exit_histogram(&s, beta, n, seed, bins)))
}
