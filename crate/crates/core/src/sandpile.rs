//! Divisible sandpile on the torus with synchronous toppling.
//!
//! An unstable site (`s(x) > 1`) keeps mass 1 and sends the excess in equal
//! parts to its 2d neighbours; every unstable site topples in the same sweep.
//! The odometer is the total mass each site emits.

use std::ops::ControlFlow;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use libm::erf;

use crate::error::{Error, Result};
use crate::rng;
use crate::torus::{RealGrid, TorusLattice};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_SWEEPS: u64 = 10_000_000;
const PROGRESS_EVERY: u64 = 10_000;
const PARALLEL_SWEEP_MIN_SITES: usize = 1 << 15;

/// Law of the i.i.d. weights `σ(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightDistribution {
    Gaussian,
    Rademacher,
    /// Uniform on `[-√3, √3]`.
    Uniform,
    /// `σ·1{|σ| < R} − m_R` with `σ` standard Gaussian.
    TruncatedGaussian { threshold: f64, mean: f64, variance: f64 },
}

impl WeightDistribution {
    pub fn truncated_gaussian(threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(Error::InvalidParameter(format!("truncation threshold {threshold} must be positive")));
        }
        // symmetric truncation of a centered law keeps mean zero
        let mean = 0.0;
        let density = (-0.5 * threshold * threshold).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let second_moment = erf(threshold / std::f64::consts::SQRT_2) - 2.0 * threshold * density;
        Ok(WeightDistribution::TruncatedGaussian {
            threshold,
            mean,
            variance: second_moment - mean * mean,
        })
    }

    pub fn mean(&self) -> f64 {
        0.0
    }

    pub fn variance(&self) -> f64 {
        match *self {
            WeightDistribution::TruncatedGaussian { variance, .. } => variance,
            _ => 1.0,
        }
    }

    /// Whether the law is symmetric about zero (odd moments vanish).
    pub fn is_symmetric(&self) -> bool {
        true
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            WeightDistribution::Gaussian => StandardNormal.sample(rng),
            WeightDistribution::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            WeightDistribution::Uniform => {
                let s3 = 3f64.sqrt();
                rng.random_range(-s3..s3)
            }
            WeightDistribution::TruncatedGaussian { threshold, mean, .. } => {
                let g: f64 = StandardNormal.sample(rng);
                if g.abs() < threshold {
                    g - mean
                } else {
                    -mean
                }
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            WeightDistribution::Gaussian => "gaussian".into(),
            WeightDistribution::Rademacher => "rademacher".into(),
            WeightDistribution::Uniform => "uniform".into(),
            WeightDistribution::TruncatedGaussian { threshold, .. } => format!("truncated_gaussian({threshold})"),
        }
    }
}

impl std::str::FromStr for WeightDistribution {
    type Err = Error;

    /// `gaussian`, `rademacher`, `uniform`, or `truncated_gaussian:R`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "gaussian" => Ok(WeightDistribution::Gaussian),
            "rademacher" => Ok(WeightDistribution::Rademacher),
            "uniform" => Ok(WeightDistribution::Uniform),
            _ => {
                let r = s
                    .strip_prefix("truncated_gaussian:")
                    .or_else(|| s.strip_prefix("truncated-gaussian:"))
                    .ok_or_else(|| Error::InvalidParameter(format!("unknown distribution {s:?}")))?;
                let r: f64 = r
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad truncation threshold {r:?}")))?;
                WeightDistribution::truncated_gaussian(r)
            }
        }
    }
}

/// i.i.d. weights drawn from stream 0 of `seed`.
pub fn draw_weights(lattice: &TorusLattice, dist: &WeightDistribution, seed: u64) -> RealGrid {
    draw_weights_with(lattice, dist, &mut rng::stream(seed, 0))
}

pub fn draw_weights_with<R: Rng + ?Sized>(lattice: &TorusLattice, dist: &WeightDistribution, rng: &mut R) -> RealGrid {
    RealGrid::from_fn(*lattice, |_| dist.sample(rng))
}

/// Real-valued mass per site.
#[derive(Debug, Clone, PartialEq)]
pub struct SandpileConfig {
    mass: RealGrid,
}

impl SandpileConfig {
    pub fn new(mass: RealGrid) -> Self {
        SandpileConfig { mass }
    }

    pub fn lattice(&self) -> &TorusLattice {
        self.mass.lattice()
    }

    pub fn mass(&self) -> &RealGrid {
        &self.mass
    }

    pub fn into_mass(self) -> RealGrid {
        self.mass
    }

    pub fn total(&self) -> f64 {
        self.mass.sum()
    }

    /// `max_x (s(x) − 1)`, clamped at zero.
    pub fn max_excess(&self) -> f64 {
        (self.mass.max() - 1.0).max(0.0)
    }
}

/// `s(x) = 1 + σ(x) − |V|^{-1} Σ_y σ(y)`.
pub fn init_configuration(sigma: &RealGrid) -> SandpileConfig {
    let mean = sigma.sum() / sigma.lattice().size() as f64;
    SandpileConfig::new(sigma.map(|&v| 1.0 + (v - mean)))
}

/// Nonnegative grid function with minimum 0; the unshifted accumulation is
/// kept alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct Odometer {
    shifted: RealGrid,
    raw: RealGrid,
}

impl Odometer {
    pub fn from_raw(raw: RealGrid) -> Self {
        let min = raw.min();
        let shifted = raw.map(|&v| (v - min).max(0.0));
        Odometer { shifted, raw }
    }

    pub fn lattice(&self) -> &TorusLattice {
        self.shifted.lattice()
    }

    /// `e − min e`.
    pub fn values(&self) -> &RealGrid {
        &self.shifted
    }

    pub fn raw(&self) -> &RealGrid {
        &self.raw
    }

    /// The odometer divided by the degree 2d: the solution of
    /// `Δ_g φ = 1 − s` with `min φ = 0`. This is the scale on which the
    /// rescaled field `Ξ_n` and its Gaussian limit are stated.
    pub fn potential(&self) -> RealGrid {
        let deg = self.lattice().degree() as f64;
        self.shifted.map(|&v| v / deg)
    }
}

fn sweep_kernel(lat: &TorusLattice, read: &[f64], write: &mut [f64], emitted: &mut [f64]) {
    let inv_deg = 1.0 / lat.degree() as f64;
    let update = |x: usize| {
        let incoming: f64 = lat.neighbors(x).map(|y| (read[y] - 1.0).max(0.0)).sum();
        (read[x].min(1.0) + inv_deg * incoming, (read[x] - 1.0).max(0.0))
    };
    if read.len() >= PARALLEL_SWEEP_MIN_SITES {
        write
            .par_iter_mut()
            .zip(emitted.par_iter_mut())
            .enumerate()
            .for_each(|(x, (w, e))| (*w, *e) = update(x));
    } else {
        for x in 0..read.len() {
            (write[x], emitted[x]) = update(x);
        }
    }
}

/// One synchronous toppling sweep. Returns the new configuration and the
/// mass emitted by each site, `max(s(x) − 1, 0)`.
pub fn parallel_topple_sweep(s: &SandpileConfig) -> (SandpileConfig, RealGrid) {
    let lat = *s.lattice();
    let mut next = vec![0.0; lat.size()];
    let mut emitted = vec![0.0; lat.size()];
    sweep_kernel(&lat, s.mass.values(), &mut next, &mut emitted);
    (
        SandpileConfig::new(RealGrid::from_vec(lat, next).expect("sized")),
        RealGrid::from_vec(lat, emitted).expect("sized"),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stabilization {
    pub odometer: Odometer,
    pub final_config: SandpileConfig,
    pub sweeps: u64,
    /// `max_x (s(x) − 1)` of the final configuration.
    pub residual: f64,
}

impl Stabilization {
    pub fn converged(&self, tol: f64) -> bool {
        self.residual <= tol
    }
}

/// Topple until `max_x (s(x) − 1) ≤ tol`.
pub fn stabilize(s: &SandpileConfig, tol: f64, max_sweeps: u64) -> Result<Stabilization> {
    stabilize_with(s, tol, max_sweeps, |_, _| ControlFlow::Continue(()))
}

/// As [`stabilize`], calling `observer(sweep, residual)` after every sweep;
/// returning `Break` cancels the run.
pub fn stabilize_with(
    s: &SandpileConfig,
    tol: f64,
    max_sweeps: u64,
    mut observer: impl FnMut(u64, f64) -> ControlFlow<()>,
) -> Result<Stabilization> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    let lat = *s.lattice();
    let size = lat.size();
    let mut read = s.mass.values().to_vec();
    let mut write = vec![0.0; size];
    let mut emitted = vec![0.0; size];
    let mut odometer = vec![0.0; size];
    let mut residual = excess(&read);
    let mut sweeps = 0u64;

    let finish = |read: Vec<f64>, odometer: Vec<f64>, sweeps, residual| Stabilization {
        odometer: Odometer::from_raw(RealGrid::from_vec(lat, odometer).expect("sized")),
        final_config: SandpileConfig::new(RealGrid::from_vec(lat, read).expect("sized")),
        sweeps,
        residual,
    };

    while residual > tol {
        if sweeps >= max_sweeps {
            return Err(Error::NonConvergence {
                sweeps,
                residual,
                partial: Box::new(finish(read, odometer, sweeps, residual)),
            });
        }
        sweep_kernel(&lat, &read, &mut write, &mut emitted);
        for (o, e) in odometer.iter_mut().zip(&emitted) {
            *o += e;
        }
        std::mem::swap(&mut read, &mut write);
        sweeps += 1;
        residual = excess(&read);
        if sweeps % PROGRESS_EVERY == 0 {
            log::debug!("sweep {sweeps}: max excess {residual:e}");
        }
        if observer(sweeps, residual).is_break() {
            return Err(Error::Cancelled {
                sweeps,
                partial: Box::new(finish(read, odometer, sweeps, residual)),
            });
        }
    }
    Ok(finish(read, odometer, sweeps, residual))
}

fn excess(mass: &[f64]) -> f64 {
    mass.iter().fold(0.0f64, |m, &v| m.max(v - 1.0))
}
