//! Acceptance suite. Runs every criterion, prints one line each and exits
//! non-zero if any of them failed.

mod common;

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;

use common::{dsod, table, Csv};
use dsod_core::field::{covariance_h, ChiSampler};
use dsod_core::green::mass_constant_l_from;
use dsod_core::rng;
use dsod_core::stats::{log_log_slope, Estimate};
use dsod_core::torus::TorusLattice;

const SEED: &str = "20240611";
/// √2 cos(2πx) as a test function.
const U_COS: &str = "1:0.7071067811865476";

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn odometer_equivalence() -> Verdict {
    let (csv, took) = timed(|| {
        table(&["odometer-compare", "--d", "2", "--n", "32", "--trials", "20", "--tol", "1e-10", "--seed", SEED])
    });
    let worst = csv.column("sup_distance").into_iter().fold(0.0, f64::max);
    let runs = csv.rows.len();
    verdict(
        runs == 20 && worst <= 1e-6 && took <= Duration::from_secs(60),
        format!("{runs} runs, max sup distance {worst:.3e}, {:.1} s", took.as_secs_f64()),
    )
}

fn hitting_time_constant() -> Verdict {
    let csv = table(&["hitting", "--d", "1", "--n", "3"]);
    let want = 4.0 / 9.0;
    let lat = TorusLattice::new(1, 3).unwrap();
    let mut from_each: Vec<f64> = (0..3).map(|x| mass_constant_l_from(&lat, x).unwrap()).collect();
    from_each.push(csv.meta_f64("l_from_origin"));
    from_each.push(csv.meta_f64("l_from_last_site"));
    let err = from_each.iter().map(|l| (l - want).abs()).fold(0.0, f64::max);
    let spread = from_each.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - from_each.iter().cloned().fold(f64::INFINITY, f64::min);
    verdict(err <= 1e-12 && spread <= 1e-12, format!("max |L - 4/9| = {err:.1e}, spread over x = {spread:.1e}"))
}

/// `H(0, k)` summed straight from the frequency representation.
fn h_direct(n: usize, k: usize) -> f64 {
    let nf = n as f64;
    (1..n)
        .map(|a| {
            let s = (PI * a as f64 / nf).sin().powi(2);
            (2.0 * PI * (a * k) as f64 / nf).cos() / (s * s)
        })
        .sum::<f64>()
        / (16.0 * nf)
}

fn covariance() -> Verdict {
    let small = covariance_h(&TorusLattice::new(1, 2).unwrap(), 0, 0);
    let exact_ok = (small - 1.0 / 32.0).abs() <= 1e-14;

    let n = 8;
    let lat = TorusLattice::new(1, n).unwrap();
    let sampler = ChiSampler::new(lat);
    let seed: u64 = SEED.parse().unwrap();
    let samples = 100_000;
    let mut products = vec![Vec::with_capacity(samples); n];
    for t in 0..samples {
        let chi = sampler.sample(&mut rng::stream(seed, t as u64));
        for (k, p) in products.iter_mut().enumerate() {
            p.push(chi[0] * chi[k]);
        }
    }
    let worst_z = products
        .iter()
        .enumerate()
        .map(|(k, p)| Estimate::from_samples(p).z_score(h_direct(n, k)).abs())
        .fold(0.0, f64::max);

    let mut min_eig = f64::INFINITY;
    for (d, n) in [(1, 8), (1, 16), (2, 6), (3, 4)] {
        let lat = TorusLattice::new(d, n).unwrap();
        let m = DMatrix::from_fn(lat.size(), lat.size(), |x, y| covariance_h(&lat, x, y));
        min_eig = min_eig.min(m.symmetric_eigenvalues().min());
    }
    verdict(
        exact_ok && worst_z <= 3.0 && min_eig >= -1e-12,
        format!("H(0,0) at n=2 is {small:?}, worst |z| over row 0 = {worst_z:.2}, min eigenvalue {min_eig:.2e}"),
    )
}

fn variance_chain() -> Verdict {
    let exact = table(&["pair", "--d", "1", "--n", "128", "--u", U_COS, "--mode", "w", "--seed", SEED]);
    let v128 = exact.meta_f64("exact_variance");
    let norm = exact.meta_f64("norm_minus1");
    let close = (v128 - 1.0).abs() <= 0.05 && (norm - 1.0).abs() < 1e-12;

    let (mc, took) = timed(|| {
        table(&["pair", "--d", "1", "--n", "32", "--u", U_COS, "--mode", "odometer", "--trials", "10000", "--seed", SEED])
    });
    let est = Estimate {
        mean: mc.meta_f64("mc_second_moment"),
        std_error: mc.meta_f64("mc_std_error"),
        samples: 10_000,
    };
    let target = mc.meta_f64("exact_variance");
    let z = est.z_score(target);
    verdict(
        close && z.abs() <= 3.0 && took <= Duration::from_secs(300),
        format!(
            "exact variance at n=128 {v128:.6}, MC at n=32 {:.4} ± {:.4} vs {target:.4} (z = {z:.2}), {:.1} s",
            est.mean,
            est.std_error,
            took.as_secs_f64()
        ),
    )
}

fn moment_rows(csv: &Csv) -> Vec<(u32, f64, f64)> {
    let z = csv.column("z_score");
    let m = csv.column("m");
    let target = csv.column("gaussian_target");
    m.iter().zip(z).zip(target).map(|((m, z), t)| (*m as u32, z, t)).collect()
}

fn moments() -> Verdict {
    let csv = table(&[
        "moments", "--d", "1", "--n", "64", "--u", U_COS, "--m", "1,3,4", "--trials", "10000", "--seed", SEED,
    ]);
    let var = csv.meta_f64("exact_variance");
    let rows = moment_rows(&csv);
    let fourth_target = rows.iter().find(|r| r.0 == 4).map(|r| r.2).unwrap_or(f64::NAN);
    let target_ok = (fourth_target - 3.0 * var * var).abs() <= 1e-12;
    let pass = rows.len() == 3 && target_ok && rows.iter().all(|r| r.1.abs() <= 3.0);
    let zs: Vec<String> = rows.iter().map(|(m, z, _)| format!("m={m}: z={z:.2}")).collect();
    verdict(pass, zs.join(", "))
}

fn universality() -> Verdict {
    let gaussian = table(&["pair", "--d", "1", "--n", "64", "--u", U_COS, "--mode", "w", "--seed", SEED]);
    let gauss_var = gaussian.meta_f64("exact_variance");
    let mut pass = true;
    let mut parts = Vec::new();
    for dist in ["rademacher", "uniform", "truncated_gaussian:3"] {
        let csv = table(&[
            "moments", "--d", "1", "--n", "64", "--u", U_COS, "--m", "2", "--dist", dist, "--trials", "10000",
            "--seed", SEED,
        ]);
        // v_R: second moment of the weight law
        let v_r = csv.meta_f64("exact_variance") / gauss_var;
        let est = csv.column("estimate")[0] / v_r;
        let se = csv.column("std_error")[0] / v_r;
        let z = (est - gauss_var) / se;
        pass &= z.abs() <= 3.0;
        parts.push(format!("{dist}: {est:.4} ± {se:.4} (z = {z:.2})"));
    }
    verdict(pass, format!("target {gauss_var:.4}; {}", parts.join("; ")))
}

fn remainder_decay() -> Verdict {
    let csv = table(&["sweep", "--d", "1", "--n", "8,16,32,64,128,256", "--u", U_COS]);
    let ns = csv.column("n");
    let sup = csv.column("sup_remainder");
    let slope = log_log_slope(&ns, &sup);
    let rv = csv.column("remainder_variance");
    let decreasing = rv.windows(2).all(|w| w[1] < w[0]);
    verdict(
        (-1.3..=-0.7).contains(&slope) && decreasing,
        format!("sup|K_n| slope {slope:.3} (window [-1.3, -0.7]), E[R_n^2] decreasing: {decreasing}"),
    )
}

fn eigenvalue_bounds() -> Verdict {
    let out = dsod(&["verify-bounds"]);
    let csv = Csv::parse(&String::from_utf8_lossy(&out.stdout));
    let cases = csv.rows.len();
    let verdict_meta = csv.meta.get("verdict").cloned().unwrap_or_default();
    verdict(
        out.status.code() == Some(0) && verdict_meta == "pass" && cases == 3 * 63,
        format!("exit {:?}, verdict {verdict_meta}, {cases} (d, n) cases", out.status.code()),
    )
}

/// `B_4` on [0, 1).
fn b4(t: f64) -> f64 {
    t.powi(4) - 2.0 * t.powi(3) + t * t - 1.0 / 30.0
}

fn kernel() -> Verdict {
    let zero = table(&["kernel", "--d", "1", "--theta", "0", "--cutoff", "10000"]).column("value")[0];
    let zero_err = (zero - PI.powi(4) / 45.0).abs();

    let grid = ["0.05", "0.15", "0.25", "0.35", "0.45", "0.5"];
    let csv = table(&["kernel", "--d", "1", "--theta", &grid.join(","), "--cutoff", "10000"]);
    let grid_err = csv
        .column("theta")
        .iter()
        .zip(csv.column("value"))
        .map(|(t, v)| (v - (-(2.0 * PI).powi(4) / 24.0 * b4(*t))).abs())
        .fold(0.0, f64::max);

    let ts = [1e-1, 1e-2, 1e-3];
    let sing = table(&["kernel", "--d", "5", "--mode", "singularity", "--theta", "0.1,0.01,0.001"]);
    let scaled: Vec<f64> = ts.iter().zip(sing.column("value")).map(|(t, p)| t * p).collect();
    // quadratic through (t, t·P(t)), read off at t = 0
    let limit: f64 = (0..3)
        .map(|i| {
            let w: f64 = (0..3).filter(|&j| j != i).map(|j| ts[j] / (ts[j] - ts[i])).product();
            w * scaled[i]
        })
        .sum();
    let raw_rel = (scaled[2] - PI * PI).abs() / (PI * PI);
    let lim_rel = (limit - PI * PI).abs() / (PI * PI);

    let diff = table(&["kernel", "--d", "5", "--mode", "difference", "--theta", "0.1,0.01,0.001"]).column("value");
    let abs: Vec<f64> = diff.iter().map(|v| v.abs()).collect();
    let ratio = abs.iter().cloned().fold(0.0, f64::max) / abs.iter().cloned().fold(f64::INFINITY, f64::min);

    verdict(
        zero_err <= 1e-8 && grid_err <= 1e-8 && lim_rel <= 0.01 && ratio <= 10.0,
        format!(
            "d=1: |K(0) - pi^4/45| = {zero_err:.1e}, Bernoulli max err {grid_err:.1e}; \
             d=5: |t|P at 1e-3 = {:.4} ({:.1}% off), extrapolated {limit:.5} ({:.3}% off), difference ratio {ratio:.4}",
            scaled[2],
            100.0 * raw_rel,
            100.0 * lim_rel
        ),
    )
}

fn tightness() -> Verdict {
    let csv = table(&["sobolev", "--d", "1", "--eps", "1.5", "--n", "8,16,32,64", "--trials", "100", "--seed", SEED]);
    let p = csv.meta_f64("spearman_p_increasing");
    let means: Vec<String> = csv.column("mean_norm").iter().map(|m| format!("{m:.4}")).collect();
    verdict(p >= 0.05, format!("means [{}], Spearman rho {}, one-sided p {p:.3}", means.join(", "), csv.meta["spearman_rho"]))
}

fn determinism() -> Verdict {
    let runs: [&[&str]; 6] = [
        &["pair", "--d", "1", "--n", "16", "--u", U_COS, "--trials", "600", "--seed", SEED],
        &["moments", "--d", "2", "--n", "8", "--u", "1;0:0.5,-1;0:0.5", "--trials", "700", "--seed", SEED],
        &["odometer-compare", "--d", "2", "--n", "8", "--trials", "5", "--seed", SEED],
        &["sobolev", "--d", "1", "--eps", "1.5", "--n", "8,16", "--trials", "300", "--seed", SEED],
        &["sample-field", "--d", "2", "--n", "16", "--kind", "eta", "--seed", SEED],
        &["kernel", "--d", "2", "--theta", "0.1,0.3"],
    ];
    let mut mismatched = Vec::new();
    for args in runs {
        let outputs: Vec<Vec<u8>> = ["1", "3", "1"]
            .iter()
            .map(|w| {
                let mut a = args.to_vec();
                a.extend(["--workers", w]);
                let out = dsod(&a);
                assert!(out.status.success(), "{a:?} failed");
                out.stdout
            })
            .collect();
        if outputs.windows(2).any(|w| w[0] != w[1]) {
            mismatched.push(args[0]);
        }
    }
    verdict(
        mismatched.is_empty(),
        format!("{} commands x workers {{1, 3, 1}}, mismatched: {mismatched:?}", runs.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("odometer equivalence", odometer_equivalence),
        ("hitting-time constant", hitting_time_constant),
        ("covariance", covariance),
        ("variance chain", variance_chain),
        ("moments", moments),
        ("universality", universality),
        ("remainder decay", remainder_decay),
        ("eigenvalue bounds", eigenvalue_bounds),
        ("kernel", kernel),
        ("tightness", tightness),
        ("determinism", determinism),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let k = i + 1;
        if !only.is_empty() && !only.contains(&k) {
            continue;
        }
        let v = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| {
                let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
                verdict(false, format!("panicked: {}", msg.unwrap_or_default()))
            });
        if !v.pass {
            failed += 1;
        }
        println!("acceptance {k} ({name}): {} | {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    if failed > 0 {
        println!("acceptance: {failed} criterion(s) failed");
        std::process::exit(1);
    }
}
