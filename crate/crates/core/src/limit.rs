//! Test functions and the rescaled field `Ξ_n`: pairings, their exact and
//! Monte Carlo variances, moments, remainders and Sobolev norms.
//!
//! A site `z` of `Z_n^d` is identified with the point `z/n` of `T^d` and
//! owns the cell `B(z, 1/2n)`. For a grid function `h`,
//!
//! ```text
//! ⟨Ξ_n, u⟩ = 4π² n^{(d−4)/2} Σ_z h(z) T_n(z),    T_n(z) = ∫_{B(z,1/2n)} u.
//! ```
//!
//! Variances are evaluated in the frequency domain through
//! `Σ_{x,y} H(x,y) f(x) f(y) = n^d/16 · Σ_{a≠0} |f̂(a)|² / S_a²`,
//! `S_a = Σ_i sin²(π a_i/n)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ChiSampler;
use crate::green::PoissonSolver;
use crate::rng;
use crate::sandpile::{draw_weights_with, init_configuration, stabilize, WeightDistribution};
use crate::stats::Estimate;
use crate::torus::{Fourier, RealGrid, TorusLattice};

const HERMITIAN_TOL: f64 = 1e-12;

/// Real trigonometric polynomial with zero mean, stored by its Fourier
/// coefficients `û(ν)`, `ν ∈ Z^d \ {0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    d: usize,
    coeffs: BTreeMap<Vec<i64>, Complex64>,
}

impl TestFunction {
    /// Validates dimension, `ν ≠ 0`, and `û(−ν) = conj û(ν)`. Zero
    /// coefficients are dropped.
    pub fn new(d: usize, terms: impl IntoIterator<Item = (Vec<i64>, Complex64)>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        let mut coeffs = BTreeMap::new();
        for (nu, c) in terms {
            check_frequency(d, &nu)?;
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::InvalidParameter(format!("coefficient at {nu:?} is not finite")));
            }
            if coeffs.insert(nu.clone(), c).is_some() {
                return Err(Error::InvalidParameter(format!("frequency {nu:?} given twice")));
            }
        }
        for (nu, c) in &coeffs {
            let neg: Vec<i64> = nu.iter().map(|v| -v).collect();
            let partner = coeffs.get(&neg).copied().unwrap_or_default();
            let scale = c.norm().max(1.0);
            if (partner - c.conj()).norm() > HERMITIAN_TOL * scale {
                return Err(Error::InvalidParameter(format!(
                    "coefficients at {nu:?} and {neg:?} are not conjugate"
                )));
            }
        }
        coeffs.retain(|_, c| *c != Complex64::default());
        if coeffs.is_empty() {
            return Err(Error::InvalidParameter("test function has no coefficients".into()));
        }
        Ok(TestFunction { d, coeffs })
    }

    /// Like [`TestFunction::new`], adding `conj û(ν)` at `−ν` wherever
    /// `−ν` is not listed.
    pub fn hermitian(d: usize, terms: impl IntoIterator<Item = (Vec<i64>, Complex64)>) -> Result<Self> {
        let mut given: Vec<(Vec<i64>, Complex64)> = terms.into_iter().collect();
        let listed: Vec<Vec<i64>> = given.iter().map(|(nu, _)| nu.clone()).collect();
        let mut extra = Vec::new();
        for (nu, c) in &given {
            let neg: Vec<i64> = nu.iter().map(|v| -v).collect();
            if !listed.contains(&neg) {
                extra.push((neg, c.conj()));
            }
        }
        given.extend(extra);
        Self::new(d, given)
    }

    /// `amplitude · cos(2π ν·x)`.
    pub fn cosine(nu: &[i64], amplitude: f64) -> Result<Self> {
        let c = Complex64::new(amplitude / 2.0, 0.0);
        Self::hermitian(nu.len(), [(nu.to_vec(), c)])
    }

    /// `amplitude · sin(2π ν·x)`.
    pub fn sine(nu: &[i64], amplitude: f64) -> Result<Self> {
        let c = Complex64::new(0.0, -amplitude / 2.0);
        Self::hermitian(nu.len(), [(nu.to_vec(), c)])
    }

    /// Parses `"nu:coeff,nu:coeff,..."` where the components of `nu` are
    /// separated by `;` and `coeff` is a complex number such as `0.5`,
    /// `1-2i`. Missing conjugate partners are filled in.
    pub fn parse(d: usize, text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (nu, c) = item
                .rsplit_once(':')
                .ok_or_else(|| Error::InvalidParameter(format!("term '{item}' is not nu:coeff")))?;
            let nu = nu
                .split(';')
                .map(|v| v.trim().parse::<i64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidParameter(format!("frequency '{nu}': {e}")))?;
            let c = Complex64::from_str(&c.replace(' ', ""))
                .map_err(|_| Error::InvalidParameter(format!("coefficient '{c}' is not a number")))?;
            terms.push((nu, c));
        }
        Self::hermitian(d, terms)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn coefficients(&self) -> impl Iterator<Item = (&[i64], Complex64)> {
        self.coeffs.iter().map(|(nu, c)| (nu.as_slice(), *c))
    }

    pub fn coefficient(&self, nu: &[i64]) -> Complex64 {
        self.coeffs.get(nu).copied().unwrap_or_default()
    }

    pub fn scaled(&self, factor: f64) -> TestFunction {
        let coeffs = self.coeffs.iter().map(|(nu, c)| (nu.clone(), c * factor)).collect();
        TestFunction { d: self.d, coeffs }
    }

    /// `u(x)` for `x ∈ R^d`.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .map(|(nu, c)| {
                let phase: f64 = nu.iter().zip(x).map(|(&v, &t)| v as f64 * t).sum();
                (c * Complex64::from_polar(1.0, 2.0 * PI * phase)).re
            })
            .sum()
    }

    /// Largest `‖ν‖_∞` in the support.
    pub fn max_frequency(&self) -> i64 {
        self.coeffs.keys().flat_map(|nu| nu.iter().map(|v| v.abs())).max().unwrap_or(0)
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .map(|(nu, c)| {
                let nu: Vec<String> = nu.iter().map(i64::to_string).collect();
                format!("{}:{}{:+}i", nu.join(";"), c.re, c.im)
            })
            .collect();
        f.write_str(&terms.join(","))
    }
}

fn check_frequency(d: usize, nu: &[i64]) -> Result<()> {
    if nu.len() != d {
        return Err(Error::InvalidParameter(format!("frequency {nu:?} is not {d}-dimensional")));
    }
    if nu.iter().all(|&v| v == 0) {
        return Err(Error::InvalidParameter("zero frequency is excluded (u has mean zero)".into()));
    }
    Ok(())
}

fn check_dims(u: &TestFunction, lattice: &TorusLattice) -> Result<()> {
    if u.d() != lattice.d() {
        return Err(Error::InvalidParameter(format!(
            "test function is {}-dimensional, lattice is {}-dimensional",
            u.d(),
            lattice.d()
        )));
    }
    Ok(())
}

/// `∫_{k/n − 1/2n}^{k/n + 1/2n} e^{2πiνx} dx / e^{2πiνk/n}`.
fn cell_factor(nu: i64, n: usize) -> f64 {
    if nu == 0 {
        1.0 / n as f64
    } else {
        let v = nu as f64;
        (PI * v / n as f64).sin() / (PI * v)
    }
}

/// `T_n(z) = ∫_{B(z,1/2n)} u`.
pub fn cell_average_t(u: &TestFunction, lattice: &TorusLattice, z: usize) -> f64 {
    let n = lattice.n();
    let coords = lattice.coords(z);
    u.coefficients()
        .map(|(nu, c)| {
            let mut phase = 0.0;
            let mut factor = 1.0;
            for (&v, &k) in nu.iter().zip(&coords) {
                phase += (v * k as i64).rem_euclid(n as i64) as f64 / n as f64;
                factor *= cell_factor(v, n);
            }
            (c * Complex64::from_polar(factor, 2.0 * PI * phase)).re
        })
        .sum()
}

/// `T_n` at every site.
pub fn cell_averages(u: &TestFunction, lattice: &TorusLattice) -> Result<RealGrid> {
    check_dims(u, lattice)?;
    Ok(RealGrid::from_fn(*lattice, |z| cell_average_t(u, lattice, z)))
}

/// `K_n(z) = n^d T_n(z) − u(z/n)`.
pub fn remainder_k(u: &TestFunction, lattice: &TorusLattice, z: usize) -> f64 {
    let n = lattice.n() as f64;
    let x: Vec<f64> = lattice.coords(z).iter().map(|&k| k as f64 / n).collect();
    lattice.size() as f64 * cell_average_t(u, lattice, z) - u.evaluate(&x)
}

pub fn remainder_grid(u: &TestFunction, lattice: &TorusLattice) -> Result<RealGrid> {
    check_dims(u, lattice)?;
    Ok(RealGrid::from_fn(*lattice, |z| remainder_k(u, lattice, z)))
}

/// `‖u‖²_{−1} = Σ_{ν≠0} |û(ν)|² / ‖ν‖⁴`.
pub fn sobolev_norm_minus1(u: &TestFunction) -> f64 {
    u.coefficients()
        .map(|(nu, c)| {
            let r2: f64 = nu.iter().map(|&v| (v * v) as f64).sum();
            c.norm_sqr() / (r2 * r2)
        })
        .sum()
}

fn pairing_scale(lattice: &TorusLattice) -> f64 {
    4.0 * PI * PI * (lattice.n() as f64).powf((lattice.d() as f64 - 4.0) / 2.0)
}

/// `⟨Ξ_n, u⟩` built from the grid function `h`.
pub fn pair_field(h: &RealGrid, u: &TestFunction) -> Result<f64> {
    Pairing::new(u, h.lattice())?.pair(h)
}

/// Precomputed cell averages for repeated pairings against one `u`.
#[derive(Debug, Clone)]
pub struct Pairing {
    cells: RealGrid,
    scale: f64,
}

impl Pairing {
    pub fn new(u: &TestFunction, lattice: &TorusLattice) -> Result<Self> {
        Ok(Pairing { cells: cell_averages(u, lattice)?, scale: pairing_scale(lattice) })
    }

    pub fn cells(&self) -> &RealGrid {
        &self.cells
    }

    pub fn pair(&self, h: &RealGrid) -> Result<f64> {
        if h.lattice() != self.cells.lattice() {
            return Err(Error::LatticeMismatch);
        }
        let s: f64 = h.values().iter().zip(self.cells.values()).map(|(a, b)| a * b).sum();
        Ok(self.scale * s)
    }
}

/// `Σ_{x,y} H(x,y) f(x) f(y)` via `n^d/16 · Σ_{a≠0} |f̂(a)|²/S_a²`.
pub fn bilaplacian_quadratic_form(f: &RealGrid) -> f64 {
    let lat = *f.lattice();
    let coeffs = Fourier::new(lat).dft_real(f).expect("same lattice");
    let sum: f64 = (1..lat.size())
        .map(|a| {
            let s = lat.sin2_sum(a);
            coeffs[a].norm_sqr() / (s * s)
        })
        .sum();
    lat.size() as f64 / 16.0 * sum
}

/// `Var⟨Ξ_n, u⟩ = 16π⁴ n^{d−4} Σ H(z,z') T_n(z) T_n(z')` for unit-variance
/// weights.
pub fn exact_pairing_variance(u: &TestFunction, lattice: &TorusLattice) -> Result<f64> {
    let cells = cell_averages(u, lattice)?;
    let scale = pairing_scale(lattice);
    Ok(scale * scale * bilaplacian_quadratic_form(&cells))
}

/// `E[R_n(u)²]` where `R_n(u) = 4π² n^{(d−4)/2} n^{-d} Σ_z χ(z) K_n(z)` is
/// the part of `⟨Ξ_n, u⟩` not captured by point values of `u`.
pub fn remainder_variance(u: &TestFunction, lattice: &TorusLattice) -> Result<f64> {
    let k = remainder_grid(u, lattice)?;
    let scale = pairing_scale(lattice) / lattice.size() as f64;
    Ok(scale * scale * bilaplacian_quadratic_form(&k))
}

/// Which grid function is paired with `u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairingMode {
    /// Stabilize `s = 1 + σ − mean σ` and pair the odometer (as `e/2d`).
    Odometer,
    /// Pair an exact sample of `χ`.
    Chi,
    /// Pair `w = (2d)^{-1} Σ_x g(x, ·) σ(x)` from the same weights.
    W,
}

impl PairingMode {
    pub fn name(self) -> &'static str {
        match self {
            PairingMode::Odometer => "odometer",
            PairingMode::Chi => "chi",
            PairingMode::W => "w",
        }
    }
}

impl FromStr for PairingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "odometer" => Ok(PairingMode::Odometer),
            "chi" => Ok(PairingMode::Chi),
            "w" => Ok(PairingMode::W),
            _ => Err(Error::InvalidParameter(format!("unknown pairing mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairingReport {
    pub n: usize,
    pub d: usize,
    pub mode: PairingMode,
    pub value: f64,
    pub seed: u64,
}

/// Everything needed to draw independent pairings `⟨Ξ_n, u⟩`.
pub struct PairingExperiment {
    lattice: TorusLattice,
    pairing: Pairing,
    mode: PairingMode,
    dist: WeightDistribution,
    tol: f64,
    max_sweeps: u64,
    poisson: PoissonSolver,
    chi: Option<ChiSampler>,
}

impl PairingExperiment {
    pub fn new(u: &TestFunction, lattice: TorusLattice, mode: PairingMode, dist: WeightDistribution) -> Result<Self> {
        Ok(PairingExperiment {
            lattice,
            pairing: Pairing::new(u, &lattice)?,
            mode,
            dist,
            tol: crate::sandpile::DEFAULT_TOL,
            max_sweeps: crate::sandpile::DEFAULT_MAX_SWEEPS,
            poisson: PoissonSolver::new(lattice),
            chi: (mode == PairingMode::Chi).then(|| ChiSampler::new(lattice)),
        })
    }

    /// Stopping rule for [`PairingMode::Odometer`].
    pub fn with_stabilization(mut self, tol: f64, max_sweeps: u64) -> Self {
        self.tol = tol;
        self.max_sweeps = max_sweeps;
        self
    }

    pub fn lattice(&self) -> &TorusLattice {
        &self.lattice
    }

    /// The pairing of trial `trial`, drawn from stream `trial` of `seed`.
    pub fn trial(&self, seed: u64, trial: u64) -> Result<f64> {
        let mut rng = rng::stream(seed, trial);
        let h = match self.mode {
            PairingMode::Chi => self.chi.as_ref().expect("built for chi").sample(&mut rng),
            PairingMode::W => {
                let sigma = draw_weights_with(&self.lattice, &self.dist, &mut rng);
                self.poisson.w_field(&sigma)?
            }
            PairingMode::Odometer => {
                let sigma = draw_weights_with(&self.lattice, &self.dist, &mut rng);
                let s = init_configuration(&sigma);
                stabilize(&s, self.tol, self.max_sweeps)?.odometer.potential()
            }
        };
        self.pairing.pair(&h)
    }

    pub fn report(&self, seed: u64, trial: u64) -> Result<PairingReport> {
        Ok(PairingReport {
            n: self.lattice.n(),
            d: self.lattice.d(),
            mode: self.mode,
            value: self.trial(seed, trial)?,
            seed,
        })
    }

    /// Trials `0..trials` in order; independent of the number of workers.
    pub fn samples(&self, trials: usize, seed: u64) -> Result<Vec<f64>> {
        (0..trials as u64).into_par_iter().map(|t| self.trial(seed, t)).collect()
    }
}

/// Monte Carlo estimate of `E⟨Ξ_n, u⟩^m` from given samples.
pub fn moment_from_samples(samples: &[f64], m: u32) -> Estimate {
    let powers: Vec<f64> = samples.iter().map(|x| x.powi(m as i32)).collect();
    Estimate::from_samples(&powers)
}

/// `E⟨Ξ_{w_n}, u⟩^m` over `trials` independent weight draws.
pub fn empirical_moment(
    u: &TestFunction,
    lattice: &TorusLattice,
    m: u32,
    trials: usize,
    dist: &WeightDistribution,
    seed: u64,
) -> Result<Estimate> {
    if m == 0 || trials == 0 {
        return Err(Error::InvalidParameter("need m ≥ 1 and at least one trial".into()));
    }
    let exp = PairingExperiment::new(u, *lattice, PairingMode::W, dist.clone())?;
    Ok(moment_from_samples(&exp.samples(trials, seed)?, m))
}

/// Lower bound on `ε` for the field norm.
pub fn sobolev_threshold(d: usize) -> f64 {
    (1.0 + d as f64 / 4.0).max(d as f64 / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SobolevNorm {
    /// Sum over `0 < ‖ν‖_∞ ≤ cutoff`.
    pub value: f64,
    /// Bound on the omitted part `‖ν‖_∞ > cutoff`.
    pub tail_bound: f64,
    pub cutoff: usize,
}

/// `‖Ξ_n‖²_{H_{−ε/2}} = Σ_{ν≠0} ‖ν‖^{−2ε} |Ξ̂_n(ν)|²` truncated to
/// `‖ν‖_∞ ≤ cutoff` (default `4n`).
pub fn sobolev_norm_field(h: &RealGrid, eps: f64, cutoff: Option<usize>) -> Result<SobolevNorm> {
    let lat = *h.lattice();
    let (d, n) = (lat.d(), lat.n());
    let threshold = sobolev_threshold(d);
    if eps.is_nan() || eps <= threshold {
        return Err(Error::EpsilonTooSmall { eps, threshold });
    }
    let m = cutoff.unwrap_or(4 * n);
    if m < n {
        return Err(Error::InvalidParameter(format!("cutoff {m} is below n = {n}")));
    }
    let coeffs = Fourier::new(lat).dft_real(h)?;
    // |Ξ̂(ν)|² = (4π² n^{(d−4)/2} n^d)² P(ν)² |ĥ(ν mod n)|²
    let amp = pairing_scale(&lat) * lat.size() as f64;
    let amp2 = amp * amp;
    let side = 2 * m + 1;
    let factors: Vec<f64> = (0..side).map(|i| cell_factor(i as i64 - m as i64, n).powi(2)).collect();

    let mut value = 0.0;
    let mut idx = vec![0usize; d];
    loop {
        let nu = idx.iter().map(|&i| i as i64 - m as i64);
        let r2: f64 = nu.clone().map(|v| (v * v) as f64).sum();
        if r2 > 0.0 {
            let site = lat.index_of(&nu.collect::<Vec<_>>());
            let p2: f64 = idx.iter().map(|&i| factors[i]).product();
            value += r2.powf(-eps) * p2 * coeffs[site].norm_sqr();
        }
        let mut axis = d;
        loop {
            if axis == 0 {
                let sup = coeffs.values().iter().map(|c| c.norm_sqr()).fold(0.0, f64::max);
                let tail_bound = field_tail_bound(d, n, m, eps) * sup;
                return Ok(SobolevNorm { value: amp2 * value, tail_bound, cutoff: m });
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < side {
                break;
            }
            idx[axis] = 0;
        }
    }
}

/// Tail of the field norm per unit `max_a |ĥ(a)|²`:
/// `16π² n^{d−2} · 2d 3^{d−1} · M^{d−2−2ε}/(2ε+2−d)`.
fn field_tail_bound(d: usize, n: usize, m: usize, eps: f64) -> f64 {
    let d_f = d as f64;
    16.0 * PI * PI * (n as f64).powf(d_f - 2.0) * 2.0 * d_f * 3f64.powi(d as i32 - 1) * (m as f64).powf(d_f - 2.0 - 2.0 * eps)
        / (2.0 * eps + 2.0 - d_f)
}
