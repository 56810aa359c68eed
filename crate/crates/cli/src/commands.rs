//! One runner per subcommand. Runners are pure apart from reading weight
//! files; writing the result is left to the caller.

use std::ops::ControlFlow;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use rayon::prelude::*;

use dsod_core::field::{sample_chi, sample_eta, ChiSampler, FieldKind};
use dsod_core::green::{hitting_times_to, mass_constant_l_from, mass_constant_l_spectral, spectral_odometer, w_field, PoissonSolver};
use dsod_core::kernel::{kernel_limit, kernel_lowdim, kernel_mollified, periodized_singularity, KernelQuery, KernelValue};
use dsod_core::limit::{
    exact_pairing_variance, remainder_grid, remainder_variance, sobolev_norm_field, sobolev_norm_minus1,
    PairingExperiment, PairingMode, TestFunction,
};
use dsod_core::rng;
use dsod_core::sandpile::{
    draw_weights, draw_weights_with, init_configuration, stabilize, stabilize_with, SandpileConfig, Stabilization,
    WeightDistribution, DEFAULT_MAX_SWEEPS, DEFAULT_TOL,
};
use dsod_core::snapshot::SnapshotKind;
use dsod_core::stats::{gaussian_moment_factor, spearman, spearman_positive_p, Estimate};
use dsod_core::torus::{check_eigenvalue_bounds, RealGrid, TorusLattice};
use dsod_core::Error;

use crate::config::Params;
use crate::error::{CliError, EXIT_FAILED_CHECK, EXIT_INTERRUPTED, EXIT_NONCONVERGENCE, EXIT_OK};
use crate::output::{Snapshot, Table};

/// Trials per worker between interrupt checks.
const TRIALS_PER_WORKER: usize = 8;

/// Shared run state: the interrupt flag set by Ctrl-C.
#[derive(Debug, Clone, Default)]
pub struct Context {
    interrupted: Arc<AtomicBool>,
}

impl Context {
    pub fn new(interrupted: Arc<AtomicBool>) -> Self {
        Context { interrupted }
    }

    pub fn interrupted(&self) -> bool {
        self.interrupted.load(Ordering::SeqCst)
    }
}

pub struct Outcome {
    pub table: Table,
    pub snapshot: Option<Snapshot>,
    pub exit: i32,
}

impl Outcome {
    fn finished(table: Table) -> Self {
        let exit = if table.truncated { EXIT_INTERRUPTED } else { EXIT_OK };
        Outcome { table, snapshot: None, exit }
    }
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn dimension(p: &Params) -> usize {
    p.d.unwrap_or(1)
}

fn single_n(p: &Params) -> Result<usize, CliError> {
    match p.n.as_slice() {
        [n] => Ok(*n),
        [] => Err(usage("--n is required")),
        _ => Err(usage("this command takes a single --n")),
    }
}

fn lattice(p: &Params) -> Result<TorusLattice, CliError> {
    Ok(TorusLattice::new(dimension(p), single_n(p)?)?)
}

fn n_list(p: &Params) -> Result<Vec<usize>, CliError> {
    if p.n.is_empty() {
        return Err(usage("the n-list is empty"));
    }
    Ok(p.n.clone())
}

fn seed(p: &Params, command: &str) -> Result<u64, CliError> {
    p.seed.ok_or_else(|| usage(format!("{command} is stochastic and needs --seed")))
}

fn distribution(p: &Params) -> Result<WeightDistribution, CliError> {
    Ok(p.dist.as_deref().unwrap_or("gaussian").parse()?)
}

fn test_function(p: &Params) -> Result<TestFunction, CliError> {
    let text = p.u.as_deref().ok_or_else(|| usage("--u is required"))?;
    Ok(TestFunction::parse(dimension(p), text)?)
}

fn pairing_mode(p: &Params, default: PairingMode) -> Result<PairingMode, CliError> {
    p.mode.as_deref().map(str::parse).transpose().map(|m| m.unwrap_or(default)).map_err(CliError::from)
}

fn parse_values(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| usage(format!("'{s}': {e}"))))
        .collect()
}

/// Lattice holding `len` values: `n` from `--n` if given, else `len^{1/d}`.
fn lattice_for_values(p: &Params, len: usize) -> Result<TorusLattice, CliError> {
    let d = dimension(p);
    let n = match p.n.as_slice() {
        [n] => *n,
        [] => (len as f64).powf(1.0 / d as f64).round() as usize,
        _ => return Err(usage("this command takes a single --n")),
    };
    let lat = TorusLattice::new(d, n)?;
    if lat.size() != len {
        return Err(usage(format!("{len} values do not fill a torus with d = {d}, n = {n}")));
    }
    Ok(lat)
}

/// Runs `f(0..count)` in parallel chunks, stopping early on interrupt.
/// Results are in trial order whatever the number of workers.
fn run_trials<T: Send>(
    ctx: &Context,
    count: usize,
    f: impl Fn(u64) -> dsod_core::Result<T> + Sync,
) -> Result<(Vec<T>, bool), CliError> {
    let mut out = Vec::with_capacity(count);
    let mut start = 0;
    while start < count {
        if ctx.interrupted() {
            return Ok((out, true));
        }
        let end = (start + TRIALS_PER_WORKER * rayon::current_num_threads()).min(count);
        let part = (start as u64..end as u64).into_par_iter().map(&f).collect::<dsod_core::Result<Vec<T>>>()?;
        out.extend(part);
        start = end;
    }
    Ok((out, false))
}

fn coord_columns(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("x{i}")).collect()
}

fn site_cells(lat: &TorusLattice, x: usize) -> Vec<String> {
    let mut cells = vec![x.to_string()];
    cells.extend(lat.coords(x).iter().map(usize::to_string));
    cells
}

fn lattice_meta(table: &mut Table, lat: &TorusLattice) {
    table.meta("d", lat.d());
    table.meta("n", lat.n());
}

pub fn run_stabilize(p: &Params, ctx: &Context) -> Result<Outcome, CliError> {
    let tol = p.tol.unwrap_or(DEFAULT_TOL);
    let max_sweeps = p.max_sweeps.unwrap_or(DEFAULT_MAX_SWEEPS);
    let (config, source) = if let Some(mass) = &p.mass {
        let values = parse_values(mass)?;
        let lat = lattice_for_values(p, values.len())?;
        (SandpileConfig::new(RealGrid::from_vec(lat, values)?), "mass")
    } else if p.weights.is_some() || p.weights_file.is_some() {
        let text = match (&p.weights, &p.weights_file) {
            (Some(w), None) => w.clone(),
            (None, Some(path)) => std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?,
            _ => return Err(usage("give either --weights or --weights-file")),
        };
        let values = parse_values(&text)?;
        let lat = lattice_for_values(p, values.len())?;
        (init_configuration(&RealGrid::from_vec(lat, values)?), "weights")
    } else {
        let lat = lattice(p)?;
        let sigma = draw_weights(&lat, &distribution(p)?, seed(p, "stabilize with drawn weights")?);
        (init_configuration(&sigma), "drawn")
    };
    let lat = *config.lattice();

    let result = stabilize_with(&config, tol, max_sweeps, |_, _| {
        if ctx.interrupted() {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    });
    let (st, status, exit, truncated): (Stabilization, _, _, _) = match result {
        Ok(st) => (st, "converged", EXIT_OK, false),
        Err(Error::NonConvergence { partial, .. }) => (*partial, "nonconvergence", EXIT_NONCONVERGENCE, false),
        Err(Error::Cancelled { partial, .. }) => (*partial, "interrupted", EXIT_INTERRUPTED, true),
        Err(e) => return Err(e.into()),
    };

    let mut columns = vec!["site".to_string()];
    columns.extend(coord_columns(lat.d()));
    columns.extend(["s_initial", "s_final", "odometer_raw", "odometer"].map(String::from));
    let mut table = Table { columns, truncated, ..Default::default() };
    lattice_meta(&mut table, &lat);
    table.meta("input", source);
    table.meta("tol", num(tol));
    table.meta("max_sweeps", max_sweeps);
    table.meta("status", status);
    table.meta("sweeps", st.sweeps);
    table.meta("residual", num(st.residual));
    table.meta("total_mass", num(config.total()));
    for x in 0..lat.size() {
        let mut cells = site_cells(&lat, x);
        cells.push(num(config.mass()[x]));
        cells.push(num(st.final_config.mass()[x]));
        cells.push(num(st.odometer.raw()[x]));
        cells.push(num(st.odometer.values()[x]));
        table.row(cells);
    }
    Ok(Outcome { table, snapshot: None, exit })
}

pub fn run_odometer_compare(p: &Params, ctx: &Context) -> Result<Outcome, CliError> {
    let lat = lattice(p)?;
    let seed = seed(p, "odometer-compare")?;
    let dist = distribution(p)?;
    let tol = p.tol.unwrap_or(DEFAULT_TOL);
    let max_sweeps = p.max_sweeps.unwrap_or(DEFAULT_MAX_SWEEPS);
    let runs = p.trials.unwrap_or(1);
    let (rows, truncated) = run_trials(ctx, runs, |r| {
        let sigma = draw_weights_with(&lat, &dist, &mut rng::stream(seed, r));
        let s = init_configuration(&sigma);
        let st = stabilize(&s, tol, max_sweeps)?;
        let spectral = spectral_odometer(&s)?;
        Ok((st.sweeps, st.residual, st.odometer.values().sup_distance(spectral.values())?))
    })?;
    let mut table = Table::new(&["run", "sweeps", "residual", "sup_distance"]);
    table.truncated = truncated;
    lattice_meta(&mut table, &lat);
    table.meta("dist", dist.name());
    table.meta("tol", num(tol));
    let worst = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    table.meta("max_sup_distance", num(worst));
    for (r, (sweeps, residual, dist)) in rows.into_iter().enumerate() {
        table.row(vec![r.to_string(), sweeps.to_string(), num(residual), num(dist)]);
    }
    Ok(Outcome::finished(table))
}

pub fn run_sample_field(p: &Params, _ctx: &Context) -> Result<Outcome, CliError> {
    let lat = lattice(p)?;
    let seed = seed(p, "sample-field")?;
    let kind: FieldKind = p.kind.as_deref().unwrap_or("chi").parse()?;
    let values = match kind {
        FieldKind::Chi => sample_chi(&lat, seed).values,
        FieldKind::Eta => sample_eta(&lat, seed).values,
        FieldKind::W => w_field(&draw_weights(&lat, &distribution(p)?, seed)),
    };
    let mut columns = vec!["site".to_string()];
    columns.extend(coord_columns(lat.d()));
    columns.push("value".into());
    let mut table = Table { columns, ..Default::default() };
    lattice_meta(&mut table, &lat);
    table.meta("kind", p.kind.as_deref().unwrap_or("chi"));
    if kind == FieldKind::W {
        table.meta("dist", distribution(p)?.name());
    }
    for x in 0..lat.size() {
        let mut cells = site_cells(&lat, x);
        cells.push(num(values[x]));
        table.row(cells);
    }
    let snapshot = Some(Snapshot { grid: values, kind: SnapshotKind::from(kind) });
    Ok(Outcome { table, snapshot, exit: EXIT_OK })
}

/// Variance of the weights that enters the pairing variance.
fn weight_variance(mode: PairingMode, dist: &WeightDistribution) -> f64 {
    match mode {
        PairingMode::Chi => 1.0,
        _ => dist.variance(),
    }
}

pub fn run_pair(p: &Params, ctx: &Context) -> Result<Outcome, CliError> {
    let lat = lattice(p)?;
    let u = test_function(p)?;
    let seed = seed(p, "pair")?;
    let mode = pairing_mode(p, PairingMode::Odometer)?;
    let dist = distribution(p)?;
    let exp = PairingExperiment::new(&u, lat, mode, dist.clone())?
        .with_stabilization(p.tol.unwrap_or(DEFAULT_TOL), p.max_sweeps.unwrap_or(DEFAULT_MAX_SWEEPS));
    let trials = p.trials.unwrap_or(1);
    let (values, truncated) = run_trials(ctx, trials, |t| exp.trial(seed, t))?;

    let mut table = Table::new(&["trial", "n", "d", "mode", "value", "seed"]);
    table.truncated = truncated;
    lattice_meta(&mut table, &lat);
    table.meta("mode", mode.name());
    table.meta("u", &u);
    table.meta("norm_minus1", num(sobolev_norm_minus1(&u)));
    table.meta("exact_variance", num(exact_pairing_variance(&u, &lat)? * weight_variance(mode, &dist)));
    if values.len() > 1 {
        let sq: Vec<f64> = values.iter().map(|v| v * v).collect();
        let e = Estimate::from_samples(&sq);
        table.meta("mc_second_moment", num(e.mean));
        table.meta("mc_std_error", num(e.std_error));
    }
    for (t, v) in values.iter().enumerate() {
        table.row(vec![t.to_string(), lat.n().to_string(), lat.d().to_string(), mode.name().into(), num(*v), seed.to_string()]);
    }
    Ok(Outcome::finished(table))
}

pub fn run_moments(p: &Params, ctx: &Context) -> Result<Outcome, CliError> {
    let lat = lattice(p)?;
    let u = test_function(p)?;
    let seed = seed(p, "moments")?;
    let mode = pairing_mode(p, PairingMode::W)?;
    let dist = distribution(p)?;
    let orders = if p.m.is_empty() { vec![1, 2, 3, 4] } else { p.m.clone() };
    if orders.contains(&0) {
        return Err(usage("moment orders start at 1"));
    }
    let trials = p.trials.unwrap_or(1000);
    if trials < 2 {
        return Err(usage("moments need at least two trials"));
    }
    let exp = PairingExperiment::new(&u, lat, mode, dist.clone())?
        .with_stabilization(p.tol.unwrap_or(DEFAULT_TOL), p.max_sweeps.unwrap_or(DEFAULT_MAX_SWEEPS));
    let (values, truncated) = run_trials(ctx, trials, |t| exp.trial(seed, t))?;
    let var = exact_pairing_variance(&u, &lat)? * weight_variance(mode, &dist);

    let mut table = Table::new(&["m", "estimate", "std_error", "gaussian_target", "z_score"]);
    table.truncated = truncated;
    lattice_meta(&mut table, &lat);
    table.meta("mode", mode.name());
    table.meta("dist", dist.name());
    table.meta("u", &u);
    table.meta("trials_completed", values.len());
    table.meta("exact_variance", num(var));
    table.meta("norm_minus1", num(sobolev_norm_minus1(&u)));
    if values.len() >= 2 {
        for &m in &orders {
            let e = dsod_core::limit::moment_from_samples(&values, m);
            let target = gaussian_moment_factor(m) * var.powf(m as f64 / 2.0);
            table.row(vec![m.to_string(), num(e.mean), num(e.std_error), num(target), num(e.z_score(target))]);
        }
    }
    Ok(Outcome::finished(table))
}

pub fn run_sweep(p: &Params, ctx: &Context) -> Result<Outcome, CliError> {
    let ns = n_list(p)?;
    let d = dimension(p);
    let u = test_function(p)?;
    let mode = pairing_mode(p, PairingMode::W)?;
    let dist = distribution(p)?;
    let trials = p.trials.unwrap_or(0);
    let seed = if trials > 0 { Some(seed(p, "sweep with Monte Carlo trials")?) } else { p.seed };
    let norm = sobolev_norm_minus1(&u);

    let mut table = Table::new(&[
        "n",
        "exact_variance",
        "mc_second_moment",
        "mc_std_error",
        "norm_minus1",
        "remainder_variance",
        "sup_remainder",
    ]);
    table.meta("d", d);
    table.meta("mode", mode.name());
    table.meta("u", &u);
    table.meta("column exact_variance", "closed-form variance of the pairing at this n");
    table.meta("column mc_second_moment", "Monte Carlo mean of the squared pairing (blank without trials)");
    table.meta("column mc_std_error", "standard error of mc_second_moment");
    table.meta("column norm_minus1", "limit variance, the squared H^-1 norm of u");
    table.meta("column remainder_variance", "exact second moment of the cell-averaging remainder");
    table.meta("column sup_remainder", "max over sites of |n^d T_n(z) - u(z/n)|");
    for n in ns {
        if ctx.interrupted() {
            table.truncated = true;
            break;
        }
        let lat = TorusLattice::new(d, n)?;
        let exact = exact_pairing_variance(&u, &lat)? * weight_variance(mode, &dist);
        let (mc, se) = match seed.filter(|_| trials > 0) {
            Some(seed) => {
                let exp = PairingExperiment::new(&u, lat, mode, dist.clone())?.with_stabilization(
                    p.tol.unwrap_or(DEFAULT_TOL),
                    p.max_sweeps.unwrap_or(DEFAULT_MAX_SWEEPS),
                );
                let (values, truncated) = run_trials(ctx, trials, |t| exp.trial(seed, t))?;
                if truncated {
                    table.truncated = true;
                    break;
                }
                let e = dsod_core::limit::moment_from_samples(&values, 2);
                (num(e.mean), num(e.std_error))
            }
            None => (String::new(), String::new()),
        };
        let sup = remainder_grid(&u, &lat)?.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        table.row(vec![
            n.to_string(),
            num(exact),
            mc,
            se,
            num(norm),
            num(remainder_variance(&u, &lat)?),
            num(sup),
        ]);
    }
    Ok(Outcome::finished(table))
}

pub fn run_sobolev(p: &Params, ctx: &Context) -> Result<Outcome, CliError> {
    let ns = if p.n.is_empty() { vec![8, 16, 32, 64] } else { p.n.clone() };
    let d = dimension(p);
    let eps = p.eps.ok_or_else(|| usage("sobolev needs --eps"))?;
    let seed = seed(p, "sobolev")?;
    let kind: FieldKind = p.kind.as_deref().unwrap_or("chi").parse()?;
    let dist = distribution(p)?;
    let trials = p.trials.unwrap_or(100);
    if trials < 2 {
        return Err(usage("sobolev needs at least two samples per n"));
    }

    let mut table = Table::new(&["n", "mean_norm", "std_error", "max_tail_bound", "cutoff"]);
    table.meta("d", d);
    table.meta("eps", num(eps));
    table.meta("kind", p.kind.as_deref().unwrap_or("chi"));
    let mut xs = Vec::new();
    let mut means = Vec::new();
    for n in ns {
        if ctx.interrupted() {
            table.truncated = true;
            break;
        }
        let lat = TorusLattice::new(d, n)?;
        let chi = ChiSampler::new(lat);
        let poisson = PoissonSolver::new(lat);
        let (reports, truncated) = run_trials(ctx, trials, |t| {
            let mut rng = rng::stream(seed, t);
            let h = match kind {
                // the constant offset of η has no weight in the norm
                FieldKind::Chi | FieldKind::Eta => chi.sample(&mut rng),
                FieldKind::W => poisson.w_field(&draw_weights_with(&lat, &dist, &mut rng))?,
            };
            sobolev_norm_field(&h, eps, p.cutoff)
        })?;
        if truncated {
            table.truncated = true;
            break;
        }
        let values: Vec<f64> = reports.iter().map(|r| r.value).collect();
        let e = Estimate::from_samples(&values);
        let tail = reports.iter().map(|r| r.tail_bound).fold(0.0, f64::max);
        table.row(vec![n.to_string(), num(e.mean), num(e.std_error), num(tail), reports[0].cutoff.to_string()]);
        xs.push(n as f64);
        means.push(e.mean);
    }
    if xs.len() >= 2 {
        table.meta("spearman_rho", num(spearman(&xs, &means)));
        if xs.len() <= 8 {
            let pval = spearman_positive_p(&xs, &means);
            table.meta("spearman_p_increasing", num(pval));
            table.meta("increasing_trend_at_5pct", pval < 0.05);
        }
    }
    Ok(Outcome::finished(table))
}

fn default_theta(d: usize) -> Vec<f64> {
    if d >= 5 {
        vec![0.1, 0.01, 0.001]
    } else {
        (0..=10).map(|i| i as f64 / 20.0).collect()
    }
}

pub fn run_kernel(p: &Params, ctx: &Context) -> Result<Outcome, CliError> {
    let d = dimension(p);
    let kappa = p.kappa.unwrap_or(0.0);
    let mode = p.mode.clone().unwrap_or_else(|| if kappa > 0.0 { "mollified".into() } else { "lowdim".into() });
    let thetas = if p.theta.is_empty() { default_theta(d) } else { p.theta.clone() };
    let shells = p.shells.unwrap_or(1);

    let mut table = Table::new(&["theta", "value", "error_bound", "cutoff"]);
    table.meta("d", d);
    table.meta("mode", &mode);
    table.meta("kappa", num(kappa));
    table.meta("points", "theta = (t, 0, ..., 0)");
    for t in thetas {
        if ctx.interrupted() {
            table.truncated = true;
            break;
        }
        let mut theta = vec![0.0; d];
        theta[0] = t;
        let query = || -> Result<KernelQuery, CliError> {
            let q = KernelQuery::new(&theta, kappa)?;
            Ok(match p.cutoff {
                Some(m) => q.with_cutoff(m),
                None => q,
            })
        };
        let (value, error, cutoff): (f64, Option<f64>, usize) = match mode.as_str() {
            "lowdim" => from_kernel(kernel_lowdim(&query()?)?),
            "mollified" => from_kernel(kernel_mollified(&query()?)?),
            "limit" => from_kernel(kernel_limit(&theta, p.kappa)?),
            "singularity" => (periodized_singularity(&theta, shells)?, None, shells),
            "difference" => {
                let lim = kernel_limit(&theta, p.kappa)?;
                (lim.value - periodized_singularity(&theta, shells)?, Some(lim.error_bound), lim.cutoff)
            }
            other => return Err(usage(format!("unknown kernel mode '{other}'"))),
        };
        table.row(vec![num(t), num(value), error.map(num).unwrap_or_default(), cutoff.to_string()]);
    }
    Ok(Outcome::finished(table))
}

fn from_kernel(v: KernelValue) -> (f64, Option<f64>, usize) {
    (v.value, Some(v.error_bound), v.cutoff)
}

pub fn run_verify_bounds(p: &Params, _ctx: &Context) -> Result<Outcome, CliError> {
    let ds = match p.d {
        Some(d) => vec![d],
        None => vec![1, 2, 3],
    };
    let ns = if p.n.is_empty() { (2..=64).collect() } else { p.n.clone() };
    let cases: Vec<(usize, usize)> = ds.iter().flat_map(|&d| ns.iter().map(move |&n| (d, n))).collect();
    let reports = cases
        .par_iter()
        .map(|&(d, n)| Ok(check_eigenvalue_bounds(&TorusLattice::new(d, n)?)))
        .collect::<dsod_core::Result<Vec<_>>>()?;

    let mut table = Table::new(&["d", "n", "checked", "lower_violations", "sandwich_violations", "constant_c"]);
    let passed = reports.iter().all(|r| r.passed());
    table.meta("verdict", if passed { "pass" } else { "fail" });
    for d in &ds {
        let c = reports.iter().filter(|r| r.d == *d).map(|r| r.constant_c).fold(f64::NEG_INFINITY, f64::max);
        table.meta(&format!("max_constant_c_d{d}"), num(c));
    }
    for r in &reports {
        table.row(vec![
            r.d.to_string(),
            r.n.to_string(),
            r.checked.to_string(),
            r.lower_violations.to_string(),
            r.sandwich_violations.to_string(),
            num(r.constant_c),
        ]);
    }
    let exit = if passed { EXIT_OK } else { EXIT_FAILED_CHECK };
    Ok(Outcome { table, snapshot: None, exit })
}

pub fn run_hitting(p: &Params, _ctx: &Context) -> Result<Outcome, CliError> {
    let lat = lattice(p)?;
    let times = hitting_times_to(&lat, 0)?;
    let mut columns = vec!["site".to_string()];
    columns.extend(coord_columns(lat.d()));
    columns.push("hitting_time_to_origin".into());
    let mut table = Table { columns, ..Default::default() };
    lattice_meta(&mut table, &lat);
    table.meta("l_from_origin", num(mass_constant_l_from(&lat, 0)?));
    table.meta("l_from_last_site", num(mass_constant_l_from(&lat, lat.size() - 1)?));
    table.meta("l_spectral", num(mass_constant_l_spectral(&lat)));
    for x in 0..lat.size() {
        let mut cells = site_cells(&lat, x);
        cells.push(num(times[x]));
        table.row(cells);
    }
    Ok(Outcome::finished(table))
}
