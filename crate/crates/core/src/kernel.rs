//! The continuum bilaplacian kernel on `T^d`,
//!
//! ```text
//! 𝒦(θ) = Σ_{ν≠0} e^{2πiθ·ν} / ‖ν‖⁴,
//! ```
//!
//! as a truncated spectral sum with a tail bound (d ≤ 3), with a Gaussian
//! mollifier `e^{−κ²‖ν‖²}` (any d), and through its leading singularity
//! `π^{4−d/2} Γ((d−4)/2) ‖θ‖^{4−d}` summed over nearby images (d ≥ 5).
//!
//! Frequency sums run shell by shell (`‖ν‖_∞ = k`); shell totals are
//! combined by pairwise summation so the result does not depend on how the
//! shells were scheduled.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use libm::{erfc, tgamma};

use crate::error::{Error, Result};

/// Relative size of the ignored tail at which adaptive sums stop.
pub const ADAPTIVE_REL_TOL: f64 = 1e-10;
/// Ewald splitting parameter for the mollified sum in d ≥ 5.
const EWALD_T: f64 = PI;
/// Exponent below which Gaussian-damped shells are dropped in the Ewald sums.
const EWALD_DECAY: f64 = 40.0;

/// Default frequency cutoff per dimension.
pub fn default_cutoff(d: usize) -> usize {
    match d {
        1 => 10_000,
        2 | 3 => 200,
        _ => 64,
    }
}

/// A point `θ ∈ T^d` with mollification scale and optional frequency cutoff.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelQuery {
    pub theta: Vec<f64>,
    pub kappa: f64,
    pub cutoff: Option<usize>,
}

impl KernelQuery {
    /// Reduces `θ` to `[−½, ½)^d`.
    pub fn new(theta: &[f64], kappa: f64) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::InvalidParameter("θ must have at least one coordinate".into()));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("θ must be finite".into()));
        }
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!("κ = {kappa} must be finite and nonnegative")));
        }
        let theta = theta.iter().map(|&t| t - (t + 0.5).floor()).collect();
        Ok(KernelQuery { theta, kappa, cutoff: None })
    }

    pub fn with_cutoff(mut self, cutoff: usize) -> Self {
        self.cutoff = Some(cutoff);
        self
    }

    pub fn d(&self) -> usize {
        self.theta.len()
    }

    fn is_lattice_point(&self) -> bool {
        self.theta.iter().all(|&t| t == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelValue {
    pub value: f64,
    /// Bound on the truncation error (extrapolation error for limits).
    pub error_bound: f64,
    /// Largest shell summed.
    pub cutoff: usize,
}

/// Calls `f` on every `ν ∈ Z^d` with `‖ν‖_∞ = k` (k ≥ 1).
pub fn for_each_in_shell(d: usize, k: i64, mut f: impl FnMut(&[i64])) {
    let mut nu = vec![0i64; d];
    // the first coordinate with |ν_i| = k is `first`
    for first in 0..d {
        for sign in [-k, k] {
            nu[first] = sign;
            fill(&mut nu, 0, first, k, &mut f);
        }
    }

    fn fill(nu: &mut [i64], pos: usize, first: usize, k: i64, f: &mut impl FnMut(&[i64])) {
        if pos == nu.len() {
            f(nu);
            return;
        }
        if pos == first {
            return fill(nu, pos + 1, first, k, f);
        }
        let bound = if pos < first { k - 1 } else { k };
        for v in -bound..=bound {
            nu[pos] = v;
            fill(nu, pos + 1, first, k, f);
        }
    }
}

/// Number of points with `‖ν‖_∞ = k` is at most `2d 3^{d−1} k^{d−1}`.
fn shell_count_bound(d: usize, k: f64) -> f64 {
    2.0 * d as f64 * 3f64.powi(d as i32 - 1) * k.powi(d as i32 - 1)
}

/// Pairwise (cascade) summation in a fixed tree.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        len => {
            let (a, b) = xs.split_at(len / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

fn shell_sum(d: usize, k: usize, term: &(impl Fn(&[i64]) -> f64 + Sync)) -> f64 {
    let mut s = 0.0;
    for_each_in_shell(d, k as i64, |nu| s += term(nu));
    s
}

fn shells_sum(d: usize, range: std::ops::RangeInclusive<usize>, term: &(impl Fn(&[i64]) -> f64 + Sync)) -> f64 {
    let parts: Vec<f64> = range.into_par_iter().map(|k| shell_sum(d, k, term)).collect();
    pairwise_sum(&parts)
}

fn norm_sq(nu: &[i64]) -> f64 {
    nu.iter().map(|&v| (v * v) as f64).sum()
}

fn phase_cos(theta: &[f64], nu: &[i64]) -> f64 {
    let p: f64 = theta.iter().zip(nu).map(|(t, &v)| t * v as f64).sum();
    (2.0 * PI * p).cos()
}

/// `Σ_{‖ν‖>M} ‖ν‖^{−4} ≤ 2d 3^{d−1} M^{d−4} / (4 − d)` for d ≤ 3.
pub fn lowdim_tail_bound(d: usize, m: usize) -> f64 {
    shell_count_bound(d, 1.0) * (m as f64).powi(d as i32 - 4) / (4 - d) as f64
}

/// `𝒦(θ)` summed over `0 < ‖ν‖_∞ ≤ M` for d ≤ 3.
pub fn kernel_lowdim(q: &KernelQuery) -> Result<KernelValue> {
    let d = q.d();
    if d >= 4 {
        return Err(Error::DivergentSum { d });
    }
    if q.kappa != 0.0 {
        return Err(Error::InvalidParameter("the bare kernel takes κ = 0".into()));
    }
    let m = q.cutoff.unwrap_or_else(|| default_cutoff(d));
    if m == 0 {
        return Err(Error::InvalidParameter("cutoff must be positive".into()));
    }
    let theta = &q.theta;
    let term = |nu: &[i64]| {
        let r2 = norm_sq(nu);
        phase_cos(theta, nu) / (r2 * r2)
    };
    Ok(KernelValue { value: shells_sum(d, 1..=m, &term), error_bound: lowdim_tail_bound(d, m), cutoff: m })
}

/// `Σ_{j>k} 2d 3^{d−1} j^{d−1} g(j)` for a positive `g` whose successive
/// ratios `b_{j+1}/b_j` decrease, closed by a geometric bound.
fn decreasing_series_tail(d: usize, k: usize, g: impl Fn(f64) -> f64) -> f64 {
    let b = |j: usize| shell_count_bound(d, j as f64) * g(j as f64);
    let mut sum = 0.0;
    let mut j = k + 1;
    let mut bj = b(j);
    for _ in 0..10_000_000 {
        let next = b(j + 1);
        let r = next / bj;
        sum += bj;
        if r < 0.9 || bj == 0.0 {
            return sum + if bj == 0.0 { 0.0 } else { next / (1.0 - r) };
        }
        j += 1;
        bj = next;
    }
    f64::INFINITY
}

fn mollified_tail_bound(d: usize, m: usize, kappa: f64) -> f64 {
    let k2 = kappa * kappa;
    let gaussian = if d <= 5 {
        // j^{d−5} ≤ M^{d−5} and e^{−κ²j²} ≤ e^{−κ²M²} e^{−2κ²M(j−M)} for j > M
        let mf = m as f64;
        shell_count_bound(d, 1.0) * mf.powi(d as i32 - 5) * (-k2 * mf * mf).exp() / (2.0 * k2 * mf).exp_m1()
    } else {
        decreasing_series_tail(d, m, |j| (-k2 * j * j).exp() / (j * j * j * j))
    };
    if d <= 3 {
        gaussian.min(lowdim_tail_bound(d, m))
    } else {
        gaussian
    }
}

/// `Σ_{ν≠0} e^{−κ²‖ν‖²} e^{2πiθ·ν} / ‖ν‖⁴` for κ > 0.
///
/// Without an explicit cutoff, shells are added until the tail bound falls
/// below `1e−10` of the accumulated absolute mass, up to the default cutoff.
/// In d ≥ 5 with κ < 1 and no explicit cutoff the sum is evaluated by an
/// Ewald split instead, which converges independently of κ.
pub fn kernel_mollified(q: &KernelQuery) -> Result<KernelValue> {
    let d = q.d();
    let kappa = q.kappa;
    if kappa <= 0.0 {
        return Err(Error::InvalidParameter("the mollified kernel needs κ > 0".into()));
    }
    if d >= 5 && kappa < 1.0 && q.cutoff.is_none() {
        return Ok(ewald_mollified(&q.theta, kappa));
    }
    let theta = &q.theta;
    let k2 = kappa * kappa;
    let term = |nu: &[i64]| {
        let r2 = norm_sq(nu);
        (-k2 * r2).exp() * phase_cos(theta, nu) / (r2 * r2)
    };
    if let Some(m) = q.cutoff {
        let value = shells_sum(d, 1..=m, &term);
        return Ok(KernelValue { value, error_bound: mollified_tail_bound(d, m, kappa), cutoff: m });
    }
    let cap = default_cutoff(d);
    let abs_term = |nu: &[i64]| {
        let r2 = norm_sq(nu);
        (-k2 * r2).exp() / (r2 * r2)
    };
    let mut parts = Vec::new();
    let mut mass = 0.0;
    let mut k = 0;
    let mut tail = f64::INFINITY;
    // add shells in blocks so the parallel map has work to share
    let mut block = 8usize;
    while k < cap {
        let hi = (k + block).min(cap);
        let new: Vec<(f64, f64)> =
            (k + 1..=hi).into_par_iter().map(|j| (shell_sum(d, j, &term), shell_sum(d, j, &abs_term))).collect();
        for (s, a) in new {
            k += 1;
            parts.push(s);
            mass += a;
            tail = mollified_tail_bound(d, k, kappa);
            if tail <= ADAPTIVE_REL_TOL * mass {
                return Ok(KernelValue { value: pairwise_sum(&parts), error_bound: tail, cutoff: k });
            }
        }
        block *= 2;
    }
    Ok(KernelValue { value: pairwise_sum(&parts), error_bound: tail, cutoff: k })
}

/// Upper incomplete gamma `Γ(a, x)` for `a ∈ {½, 1, 3/2, …}`.
pub fn upper_gamma_half_integer(a: f64, x: f64) -> f64 {
    let twice = 2.0 * a;
    assert!(a > 0.0 && twice == twice.round(), "a = {a} must be a positive half-integer");
    let (mut s, mut g) = if twice as i64 % 2 == 1 {
        (0.5, PI.sqrt() * erfc(x.sqrt()))
    } else {
        (1.0, (-x).exp())
    };
    while s < a {
        g = s * g + x.powf(s) * (-x).exp();
        s += 1.0;
    }
    g
}

/// Ewald form of the mollified sum, from `‖w‖^{−4} = ∫_0^∞ t e^{−t‖w‖²} dt`
/// split at `t = T`: a rapidly decaying direct sum plus an image sum of
/// incomplete gamma functions.
fn ewald_mollified(theta: &[f64], kappa: f64) -> KernelValue {
    let d = theta.len();
    let k2 = kappa * kappa;
    let t = EWALD_T;
    let hi = t + k2;
    let half = d as f64 / 2.0;

    let direct_shells = ((EWALD_DECAY / hi).sqrt().ceil() as usize).max(1) + 1;
    let direct = |nu: &[i64]| {
        let r2 = norm_sq(nu);
        phase_cos(theta, nu) * (-hi * r2).exp() * (t * r2 + 1.0) / (r2 * r2)
    };
    let direct_sum = shells_sum(d, 1..=direct_shells, &direct);
    let direct_tail =
        decreasing_series_tail(d, direct_shells, |j| (-hi * j * j).exp() * (t * j * j + 1.0) / (j * j * j * j));

    let image = |m: &[i64]| {
        let c = PI * PI * theta.iter().zip(m).map(|(x, &v)| (x + v as f64).powi(2)).sum::<f64>();
        if c == 0.0 {
            // ∫_{κ²}^{T+κ²} (s^{1−d/2} − κ² s^{−d/2}) ds
            let p = |e: f64| (hi.powf(e) - k2.powf(e)) / e;
            return p(2.0 - half) - k2 * p(1.0 - half);
        }
        let (lo_x, hi_x) = (c / hi, c / k2);
        c.powf(2.0 - half) * (upper_gamma_half_integer(half - 2.0, lo_x) - upper_gamma_half_integer(half - 2.0, hi_x))
            - k2 * c.powf(1.0 - half)
                * (upper_gamma_half_integer(half - 1.0, lo_x) - upper_gamma_half_integer(half - 1.0, hi_x))
    };
    let image_shells = ((EWALD_DECAY * hi).sqrt() / PI + 1.5).ceil() as usize;
    let image_sum = image(&vec![0; d]) + shells_sum(d, 1..=image_shells, &image);
    // each image with ‖θ+m‖ ≥ j − ½ contributes at most T (T+κ²)^{1−d/2} e^{−π²(j−½)²/(T+κ²)}
    let image_tail = decreasing_series_tail(d, image_shells, |j| {
        t * hi.powf(1.0 - half) * (-PI * PI * (j - 0.5).powi(2) / hi).exp()
    });
    let scale = PI.powf(half);

    KernelValue {
        value: direct_sum - t * t / 2.0 + scale * image_sum,
        error_bound: direct_tail + scale * image_tail,
        cutoff: direct_shells.max(image_shells),
    }
}

/// `lim_{κ→0}` of the mollified kernel by Richardson extrapolation in κ²
/// from `κ0, κ0/2, κ0/4`. The default `κ0` is `0.01·‖θ‖` (or 0.01 at
/// θ = 0, where d ≥ 5 is singular).
pub fn kernel_limit(theta: &[f64], kappa0: Option<f64>) -> Result<KernelValue> {
    let base = KernelQuery::new(theta, 0.0)?;
    let d = base.d();
    let dist = base.theta.iter().map(|t| t * t).sum::<f64>().sqrt();
    if dist == 0.0 && d >= 4 {
        return Err(Error::SingularPoint);
    }
    let k0 = kappa0.unwrap_or(if dist > 0.0 { 0.01 * dist } else { 0.01 });
    let eval = |k: f64| kernel_mollified(&KernelQuery { kappa: k, ..base.clone() });
    let f0 = eval(k0)?;
    let f1 = eval(k0 / 2.0)?;
    let f2 = eval(k0 / 4.0)?;
    let r1a = (4.0 * f1.value - f0.value) / 3.0;
    let r1b = (4.0 * f2.value - f1.value) / 3.0;
    let r2 = (16.0 * r1b - r1a) / 15.0;
    let trunc = (f0.error_bound + 4.0 * f1.error_bound) / 3.0 * 16.0 / 15.0
        + (4.0 * f2.error_bound + f1.error_bound) / 3.0 * 16.0 / 15.0;
    Ok(KernelValue { value: r2, error_bound: (r2 - r1b).abs() + trunc, cutoff: f2.cutoff })
}

/// `π^{4−d/2} Γ((d−4)/2)`, the coefficient of `‖θ‖^{4−d}`.
pub fn singularity_coefficient(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    PI.powf(4.0 - half) * tgamma(half - 2.0)
}

/// `π^{4−d/2} Γ((d−4)/2) Σ_{‖w‖_∞ ≤ W} ‖θ + w‖^{4−d}` for d ≥ 5.
pub fn periodized_singularity(theta: &[f64], shells: usize) -> Result<f64> {
    let q = KernelQuery::new(theta, 0.0)?;
    let d = q.d();
    if d < 5 {
        return Err(Error::InvalidParameter(format!("the singular expansion needs d ≥ 5, got {d}")));
    }
    if shells == 0 {
        return Err(Error::InvalidParameter("at least one image shell is required".into()));
    }
    if q.is_lattice_point() {
        return Err(Error::SingularPoint);
    }
    let power = 4.0 - d as f64;
    let term = |w: &[i64]| {
        let r2: f64 = q.theta.iter().zip(w).map(|(t, &v)| (t + v as f64).powi(2)).sum();
        r2.powf(power / 2.0)
    };
    let center = term(&vec![0; d]);
    let sum = center + shells_sum(d, 1..=shells, &term);
    Ok(singularity_coefficient(d) * sum)
}

/// `B₄(θ) = θ⁴ − 2θ³ + θ² − 1/30` on `[0, 1)`, extended periodically.
pub fn bernoulli_b4(theta: f64) -> f64 {
    let t = theta - theta.floor();
    t * t * t * t - 2.0 * t * t * t + t * t - 1.0 / 30.0
}

/// Closed form of the one-dimensional kernel, `−(2π⁴/3) B₄(θ)`.
pub fn kernel_1d_closed_form(theta: f64) -> f64 {
    -2.0 * PI.powi(4) / 3.0 * bernoulli_b4(theta)
}
