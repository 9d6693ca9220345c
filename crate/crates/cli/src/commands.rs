use std::fmt::Write as _;
use std::path::PathBuf;

use exitlab::agmon::{agmon_graph, fill_conddag};
use exitlab::asymptotics::{asymptotic_report, boost_factor, exit_density_asymptotic, slope_fit, DensityForm};
use exitlab::mc::{exit_ensemble, hyperdyn_compare, ExitStatistics};
use exitlab::pipeline::{qsd_setup, solve0, spectral_counts, Counts, Solve};
use exitlab::potential::{check_hypotheses, region_min, HypTolerances};
use exitlab::spectra::{exit_density_pde, generator_rate, qsd_density};
use exitlab::stats::{independence_test, ks_exponential, tv_distance};
use exitlab::{build_grid, nu, Bc, Error, Field, Region, VERSION};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{ConfigError, ExperimentConfig};

/// What a command produced: a pass/fail verdict, the `result` member of the
/// report and the files to write, relative to the output directory.
pub struct Outcome {
    pub pass: bool,
    pub result: Value,
    pub files: Vec<(PathBuf, String)>,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numeric(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::SupportViolation { .. } | Error::Dimension { .. } | Error::HOutOfRange { .. } => Failure::Usage(e.to_string()),
            e => Failure::Numeric(e),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.0)
    }
}

type Res<T> = std::result::Result<T, Failure>;

fn h_dir(h: f64) -> PathBuf {
    PathBuf::from(format!("h_{h}"))
}

/// Run `job` for every h concurrently, keeping the input order.
fn per_h<T: Send>(hs: &[f64], job: impl Fn(f64) -> Res<T> + Sync + Send) -> Res<Vec<T>> {
    hs.par_iter().map(|&h| job(h)).collect()
}

fn tag(seed: u64) -> String {
    format!("# exitlab {VERSION} seed={seed}\n")
}

fn samples_csv(s: &ExitStatistics) -> String {
    let c = &s.config;
    let mut out = tag(c.seed);
    let _ = writeln!(out, "# field={} domain={} beta={} dt={} n={}", c.field_id, c.domain_id, c.beta, c.dt, c.n);
    out + &s.to_csv()
}

fn base_field(cfg: &ExperimentConfig) -> Field {
    Field::new(cfg.potential.clone())
}

pub fn check(cfg: &ExperimentConfig) -> Res<Outcome> {
    let f = cfg.field();
    let pair = cfg.pair();
    let spacing = cfg.check_spacing();
    let mut rep = check_hypotheses(&f, &pair, spacing, &HypTolerances::default())?;
    let conddag = fill_conddag(&mut rep, &f, &pair, spacing)?;
    let morse = rep.morse_pathway_ok();

    // Degenerate fields: hypotheses on the small spectra are checked
    // directly, by requiring the counts to be stable in h and ν.
    let non_morse = if !rep.morse_ok && rep.hyp0_ok && rep.hyp3_ok {
        let es = cfg.eigen.settings();
        let jobs: Vec<(f64, f64)> =
            cfg.check.count_h.iter().flat_map(|&h| cfg.check.nu_scales.iter().map(move |&s| (h, s))).collect();
        let counts: Vec<Counts> = jobs
            .par_iter()
            .map(|&(h, s)| spectral_counts(&f, &pair, h, &cfg.grid, s * nu(h, cfg.nu_exponent), &es))
            .collect::<Result<_, _>>()?;
        let key = |c: &Counts| (c.m0_neumann_minus, c.m1_neumann_minus, c.m0_dirichlet_plus, c.m1_dirichlet_shell);
        let stable = counts.windows(2).all(|w| key(&w[0]) == key(&w[1]));
        let valid = stable && counts.first().is_some_and(|c| c.m0_neumann_minus >= 1);
        let rows: Vec<Value> = jobs
            .iter()
            .zip(&counts)
            .map(|(&(h, s), c)| {
                json!({
                    "h": h,
                    "nu_scale": s,
                    "nu": c.nu,
                    "m0_neumann_minus": c.m0_neumann_minus,
                    "m1_neumann_minus": c.m1_neumann_minus,
                    "m0_dirichlet_plus": c.m0_dirichlet_plus,
                    "m1_dirichlet_shell": c.m1_dirichlet_shell,
                })
            })
            .collect();
        Some(json!({ "stable": stable, "valid": valid, "counts": rows }))
    } else {
        None
    };
    let non_morse_valid = non_morse.as_ref().is_some_and(|v| v["valid"] == true);

    // Agmon distance to the lowest point of Ω̄₋.
    let grid = build_grid(&pair.minus, spacing, Bc::Neumann)?;
    let graph = agmon_graph(&f, &grid, true);
    let (pmin, _) = region_min(&f, &pair.minus, spacing);
    let src = (0..grid.n_dofs())
        .min_by(|&a, &b| {
            let d = |i: usize| (grid.coords[i][0] - pmin[0]).hypot(grid.coords[i][1] - pmin[1]);
            d(a).total_cmp(&d(b))
        })
        .unwrap_or(0);
    let (dist, _) = graph.dijkstra(&[src]);

    let pass = morse || non_morse_valid;
    Ok(Outcome {
        pass,
        result: json!({
            "field": cfg.field_id(),
            "spacing": spacing,
            "morse_pathway_ok": morse,
            "non_morse": non_morse,
            "conddag": conddag,
            "hypotheses": rep,
            "agmon": {
                "source": grid.coords[src],
                "max_edge_error": graph.max_edge_error(),
            },
        }),
        files: vec![("agmon.csv".into(), graph.distance_csv(&dist))],
    })
}

fn spectral_files(dir: &PathBuf, name: &str, s: &Solve, vectors: usize) -> Vec<(PathBuf, String)> {
    let d = dir.join(name);
    let mut files = vec![(d.join("eigenvalues.csv"), s.result.eigenvalues_csv())];
    for k in 0..vectors.min(s.result.eigenvectors.len()) {
        files.push((d.join(format!("eigenvector_{}.csv", k + 1)), s.result.eigenvector_csv(&s.op.grid, k)));
    }
    files
}

pub fn spectrum(cfg: &ExperimentConfig) -> Res<Outcome> {
    let f = cfg.field();
    let pair = cfg.pair();
    let es = cfg.eigen.settings();
    let rows = per_h(&cfg.hs(), |h| {
        let counts = spectral_counts(&f, &pair, h, &cfg.grid, nu(h, cfg.nu_exponent), &es)?;
        let plus = solve0(&f, &pair.plus, Bc::Dirichlet, h, &cfg.grid, cfg.eigen.k, &es)?;
        let minus = solve0(&f, &pair.minus, Bc::Neumann, h, &cfg.grid, cfg.eigen.k, &es)?;
        let dir = h_dir(h);
        let mut files = spectral_files(&dir, "plus_dirichlet", &plus, cfg.eigen.vectors);
        files.extend(spectral_files(&dir, "minus_neumann", &minus, cfg.eigen.vectors));
        let matched = counts.m0_dirichlet_plus == counts.m0_neumann_minus;
        let row = json!({
            "h": h,
            "counts": counts,
            "counts_match": matched,
            "plus_dirichlet": { "n_dofs": plus.result.n_dofs, "eigenvalues": plus.result.eigenvalues, "residual_norms": plus.result.residual_norms, "mesh_warning": plus.op.warning },
            "minus_neumann": { "n_dofs": minus.result.n_dofs, "eigenvalues": minus.result.eigenvalues, "residual_norms": minus.result.residual_norms, "mesh_warning": minus.op.warning },
        });
        Ok((matched, row, files))
    })?;
    Ok(collect(rows, |rows| json!({ "field": cfg.field_id(), "per_h": rows })))
}

fn collect(rows: Vec<(bool, Value, Vec<(PathBuf, String)>)>, wrap: impl FnOnce(Vec<Value>) -> Value) -> Outcome {
    let mut pass = true;
    let mut values = Vec::new();
    let mut files = Vec::new();
    for (p, v, f) in rows {
        pass &= p;
        values.push(v);
        files.extend(f);
    }
    Outcome { pass, result: wrap(values), files }
}

pub fn asymptotics(cfg: &ExperimentConfig) -> Res<Outcome> {
    let field = cfg.field();
    let base = base_field(cfg);
    let pair = cfg.pair();
    let es = cfg.eigen.settings();
    let hs = cfg.hs();
    let rows = per_h(&hs, |h| {
        let s = solve0(&base, &pair.plus, Bc::Dirichlet, h, &cfg.grid, 2, &es)?;
        let l1 = s.result.eigenvalues[0];
        let mut rep = asymptotic_report(&field, &pair, h, Some(l1))?;
        let dir = h_dir(h);
        let mut files = Vec::new();
        let u1 = &s.result.eigenvectors[0];
        match qsd_density(&s.op, u1).and_then(|_| exit_density_pde(&s.op, u1)) {
            Ok(d) => files.push((dir.join("exitdensity.csv"), d.to_csv())),
            Err(e) => rep.notes.push(format!("exit density: {e}")),
        }
        match exit_density_asymptotic(&base, &pair.plus, h, DensityForm::Flux) {
            Ok(d) => files.push((dir.join("exitdensity_asymptotic.csv"), d.to_csv())),
            Err(e) => rep.notes.push(format!("asymptotic exit density: {e}")),
        }
        Ok((l1, rep, files))
    })?;

    let mut series = String::from("h,lambda1_numeric,lambda1_asym_flux,lambda1_asym_hessian,ratio_numeric_flux,ratio_hessian_flux\n");
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.17e}"));
    for (_, r, _) in &rows {
        let _ = writeln!(
            series,
            "{},{},{:.17e},{},{},{}",
            r.h,
            opt(r.lambda1_numeric),
            r.lambda1_asym_flux,
            opt(r.lambda1_asym_hessian),
            opt(r.ratio_numeric_flux),
            opt(r.ratio_hessian_flux)
        );
    }
    let lambdas: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let fit = if hs.len() >= 3 {
        match slope_fit(&hs, &lambdas) {
            Ok(f) => json!(f),
            Err(e) => json!({ "error": e.to_string() }),
        }
    } else {
        Value::Null
    };
    let mut files = vec![(PathBuf::from("hseries.csv"), series)];
    let mut reports = Vec::new();
    for (_, r, f) in rows {
        reports.push(r);
        files.extend(f);
    }
    Ok(Outcome { pass: true, result: json!({ "field": cfg.field_id(), "per_h": reports, "slope_fit": fit }), files })
}

fn location_bins(region: &Region, bins: usize) -> usize {
    if region.dim() == 1 {
        2
    } else {
        bins
    }
}

pub fn mc(cfg: &ExperimentConfig) -> Res<Outcome> {
    let field = cfg.field();
    let pair = cfg.pair();
    let es = cfg.eigen.settings();
    let m = &cfg.mc;
    let rows = per_h(&cfg.hs(), |h| {
        let q = qsd_setup(&field, &pair.plus, h, &cfg.grid, &es)?;
        let st = exit_ensemble(&field, &pair.plus, &q.sampler, &m.settings(h), &cfg.field_id())?;
        let rate = generator_rate(q.lambda1(), h);
        let taus = st.taus();
        let mut notes = Vec::new();
        let ks = match ks_exponential(&taus, rate) {
            Ok((d, p)) => Some((d, p)),
            Err(e) => {
                notes.push(format!("exponential KS: {e}"));
                None
            }
        };
        let (cats, ncat) = st.location_bins(m.bins);
        let ind = match independence_test(&taus, &cats, m.time_bins, ncat) {
            Ok(r) => Some(r),
            Err(e) => {
                notes.push(format!("independence: {e}"));
                None
            }
        };
        let bins = location_bins(&pair.plus, m.bins);
        let tv = tv_distance(&st.location_histogram(bins), &q.exit_density.bin_masses(bins));
        let (mean, se) = st.mean_tau();
        let pass = ks.is_some_and(|k| k.1 > m.alpha)
            && ind.as_ref().is_none_or(|r| r.p_value > m.alpha)
            && tv <= m.tv_tolerance
            && st.censored_fraction() == 0.0;
        let row = json!({
            "h": h,
            "beta": st.config.beta,
            "dt": st.config.dt,
            "n": st.config.n,
            "seed": st.config.seed,
            "lambda1": q.lambda1(),
            "rate": rate,
            "mean_tau": mean,
            "mean_tau_se": se,
            "censored_fraction": st.censored_fraction(),
            "ks_statistic": ks.map(|k| k.0),
            "ks_p_value": ks.map(|k| k.1),
            "independence": ind,
            "exit_tv_distance": tv,
            "pass": pass,
            "notes": notes,
        });
        let dir = h_dir(h);
        let files = vec![(dir.join("samples.csv"), samples_csv(&st)), (dir.join("exitdensity.csv"), q.exit_density.to_csv())];
        Ok((pass, row, files))
    })?;
    Ok(collect(rows, |rows| json!({ "field": cfg.field_id(), "alpha": m.alpha, "tv_tolerance": m.tv_tolerance, "per_h": rows })))
}

pub fn hyperdyn(cfg: &ExperimentConfig) -> Res<Outcome> {
    if cfg.bump.is_none() {
        return Err(Failure::Usage("hyperdyn needs a bump in the configuration".into()));
    }
    let biased = cfg.field();
    let base = base_field(cfg);
    let pair = cfg.pair();
    let es = cfg.eigen.settings();
    let m = &cfg.mc;
    let rows = per_h(&cfg.hs(), |h| {
        let boost = boost_factor(&biased, &pair, h)?;
        let qa = qsd_setup(&base, &pair.plus, h, &cfg.grid, &es)?;
        let qb = qsd_setup(&biased, &pair.plus, h, &cfg.grid, &es)?;
        let sa = m.settings(h);
        let sb = exitlab::mc::McSettings { seed: sa.seed.wrapping_add(1), ..sa.clone() };
        let a = exit_ensemble(&base, &pair.plus, &qa.sampler, &sa, cfg.potential.name())?;
        let b = exit_ensemble(&biased, &pair.plus, &qb.sampler, &sb, &cfg.field_id())?;
        let bins = m.bins;
        let rep = hyperdyn_compare(&a, &b, boost, bins, m.alpha, m.tv_tolerance);
        let control = hyperdyn_compare(&a, &b, 2.0 * boost, bins, m.alpha, m.tv_tolerance);
        let pass = rep.ks_pass && rep.tv_pass;
        let row = json!({
            "h": h,
            "beta": sa.beta,
            "dt": sa.dt,
            "n": sa.n,
            "seed": sa.seed,
            "seed_biased": sb.seed,
            "boost": boost,
            "lambda1": qa.lambda1(),
            "lambda1_biased": qb.lambda1(),
            "lambda_ratio": qb.lambda1() / qa.lambda1(),
            "compare": rep,
            "control_double_boost": control,
            "pass": pass,
        });
        let dir = h_dir(h);
        let files = vec![(dir.join("samples.csv"), samples_csv(&a)), (dir.join("samples_biased.csv"), samples_csv(&b))];
        Ok((pass, row, files))
    })?;
    Ok(collect(rows, |rows| json!({ "field": cfg.field_id(), "per_h": rows })))
}

