//! Exact sampling of the discrete bilaplacian fields on the torus.
//!
//! `χ` is the centered Gaussian field with covariance
//!
//! ```text
//! H(x, y) = n^{-d}/16 · Σ_{z≠0} exp(2πi (y−x)·z/n) / (Σ_i sin²(π z_i/n))²
//! ```
//!
//! and `η = Y + χ` adds an independent constant `Y ~ N(0, (2d)^{-2} n^d L²)`.
//! Sampling is by spectral synthesis: `χ̂(a) = n^{-d/2} Z_a / (4 Σ_i sin²(π a_i/n))`
//! with Hermitian-paired standard complex Gaussians `Z_a`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::green::mass_constant_l_spectral;
use crate::rng;
use crate::torus::{ComplexGrid, Fourier, RealGrid, TorusLattice};

const IMAGINARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Chi,
    Eta,
    W,
}

impl FieldKind {
    pub fn code(self) -> u32 {
        match self {
            FieldKind::Chi => 1,
            FieldKind::Eta => 2,
            FieldKind::W => 3,
        }
    }
}

impl std::str::FromStr for FieldKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chi" => Ok(FieldKind::Chi),
            "eta" => Ok(FieldKind::Eta),
            "w" => Ok(FieldKind::W),
            _ => Err(Error::InvalidParameter(format!("unknown field kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub values: RealGrid,
    pub kind: FieldKind,
}

/// `H(x, y)` by direct summation over frequencies.
pub fn covariance_h(lattice: &TorusLattice, x: usize, y: usize) -> f64 {
    let diff = lattice.coords(lattice.difference(x, y));
    let n = lattice.n() as f64;
    let sum: f64 = (1..lattice.size())
        .map(|a| {
            let phase: f64 = lattice
                .coords(a)
                .iter()
                .zip(&diff)
                .map(|(&ai, &di)| ((ai * di) % lattice.n()) as f64)
                .sum();
            let s = lattice.sin2_sum(a);
            (2.0 * PI * phase / n).cos() / (s * s)
        })
        .sum();
    sum / (16.0 * lattice.size() as f64)
}

/// `H(0, k)` for every `k`, by one inverse transform.
pub fn covariance_row(lattice: &TorusLattice) -> RealGrid {
    let size = lattice.size() as f64;
    let mut coeffs: Vec<Complex64> = (0..lattice.size())
        .map(|a| {
            if a == 0 {
                Complex64::default()
            } else {
                let s = lattice.sin2_sum(a);
                Complex64::new(1.0 / (16.0 * size * s * s), 0.0)
            }
        })
        .collect();
    Fourier::new(*lattice).idft_in_place(&mut coeffs);
    ComplexGrid::from_vec(*lattice, coeffs)
        .expect("sized")
        .into_real(IMAGINARY_TOL)
        .expect("H is real")
}

/// Variance of the constant mode `Y` of `η`: `(2d)^{-2} n^d L²`.
pub fn eta_offset_variance(lattice: &TorusLattice) -> f64 {
    let l = mass_constant_l_spectral(lattice);
    let deg = lattice.degree() as f64;
    lattice.size() as f64 * l * l / (deg * deg)
}

#[derive(Debug, Clone, Copy)]
enum Mode {
    Zero,
    /// Self-conjugate frequency: one real draw.
    Real,
    /// First member of a ±pair: one complex draw, conjugate goes to `partner`.
    Pair { partner: usize },
    /// Second member of a ±pair, filled by its partner.
    Mirror,
}

/// Spectral synthesizer for `χ` on one lattice.
pub struct ChiSampler {
    fourier: Fourier,
    amplitude: Vec<f64>,
    modes: Vec<Mode>,
}

impl ChiSampler {
    pub fn new(lattice: TorusLattice) -> Self {
        let size = lattice.size();
        let norm = (size as f64).sqrt();
        let amplitude = (0..size)
            .map(|a| if a == 0 { 0.0 } else { 1.0 / (4.0 * norm * lattice.sin2_sum(a)) })
            .collect();
        let modes = (0..size)
            .map(|a| {
                let neg = lattice.negate(a);
                match a {
                    0 => Mode::Zero,
                    _ if neg == a => Mode::Real,
                    _ if a < neg => Mode::Pair { partner: neg },
                    _ => Mode::Mirror,
                }
            })
            .collect();
        ChiSampler { fourier: Fourier::new(lattice), amplitude, modes }
    }

    pub fn lattice(&self) -> &TorusLattice {
        self.fourier.lattice()
    }

    /// Number of underlying real standard Gaussians per sample (`n^d − 1`).
    pub fn degrees_of_freedom(&self) -> usize {
        self.lattice().size() - 1
    }

    /// The field built from a given vector of independent standard normals,
    /// consumed in storage order of the frequencies.
    pub fn synthesize(&self, normals: &[f64]) -> Result<RealGrid> {
        if normals.len() != self.degrees_of_freedom() {
            return Err(Error::InvalidParameter(format!(
                "expected {} normals, got {}",
                self.degrees_of_freedom(),
                normals.len()
            )));
        }
        let mut draws = normals.iter().copied();
        self.build(|| draws.next().expect("counted"))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> RealGrid {
        self.build(|| StandardNormal.sample(rng)).expect("spectral synthesis is real")
    }

    fn build(&self, mut normal: impl FnMut() -> f64) -> Result<RealGrid> {
        let size = self.lattice().size();
        let mut coeffs = vec![Complex64::default(); size];
        for a in 0..size {
            match self.modes[a] {
                Mode::Zero | Mode::Mirror => {}
                Mode::Real => coeffs[a] = Complex64::new(self.amplitude[a] * normal(), 0.0),
                Mode::Pair { partner } => {
                    let re = normal() * FRAC_1_SQRT_2;
                    let im = normal() * FRAC_1_SQRT_2;
                    let z = Complex64::new(re, im) * self.amplitude[a];
                    coeffs[a] = z;
                    coeffs[partner] = z.conj();
                }
            }
        }
        self.fourier.idft_in_place(&mut coeffs);
        ComplexGrid::from_vec(*self.lattice(), coeffs)?.into_real(IMAGINARY_TOL)
    }
}

pub fn sample_chi(lattice: &TorusLattice, seed: u64) -> FieldSample {
    let values = ChiSampler::new(*lattice).sample(&mut rng::stream(seed, 0));
    FieldSample { values, kind: FieldKind::Chi }
}

/// `η = Y + χ`; `χ` uses stream 0 of `seed`, `Y` stream 1.
pub fn sample_eta(lattice: &TorusLattice, seed: u64) -> FieldSample {
    let chi = sample_chi(lattice, seed).values;
    let z: f64 = StandardNormal.sample(&mut rng::stream(seed, 1));
    let y = eta_offset_variance(lattice).sqrt() * z;
    FieldSample { values: chi.map(|&v| v + y), kind: FieldKind::Eta }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green::green_function;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, SymmetricEigen};

    fn lat(d: usize, n: usize) -> TorusLattice {
        TorusLattice::new(d, n).unwrap()
    }

    fn h_matrix(l: &TorusLattice) -> DMatrix<f64> {
        DMatrix::from_fn(l.size(), l.size(), |x, y| covariance_h(l, x, y))
    }

    #[test]
    fn h_examples() {
        let l = lat(1, 2);
        assert_abs_diff_eq!(covariance_h(&l, 0, 0), 1.0 / 32.0, epsilon = 1e-15);
        assert_abs_diff_eq!(covariance_h(&l, 1, 1), 1.0 / 32.0, epsilon = 1e-15);
        let l = lat(2, 5);
        for (x, y) in [(0, 3), (7, 19), (4, 4)] {
            assert_abs_diff_eq!(covariance_h(&l, x, y), covariance_h(&l, y, x), epsilon = 1e-15);
        }
    }

    #[test]
    fn h_is_positive_semidefinite() {
        for (d, n) in [(1, 8), (2, 4)] {
            let eig = SymmetricEigen::new(h_matrix(&lat(d, n))).eigenvalues;
            assert!(eig.min() >= -1e-12, "min eigenvalue {}", eig.min());
        }
    }

    #[test]
    fn covariance_row_matches_direct_sum() {
        let l = lat(2, 6);
        let row = covariance_row(&l);
        for k in 0..l.size() {
            assert_abs_diff_eq!(row[k], covariance_h(&l, 0, k), epsilon = 1e-14);
        }
    }

    /// The synthesis is linear in its normals; pushing each unit vector
    /// through it gives a factor `A` with `A Aᵀ` the exact covariance.
    #[test]
    fn synthesis_reproduces_h_exactly() {
        for (d, n) in [(1, 2), (1, 7), (1, 8), (2, 3), (2, 4)] {
            let l = lat(d, n);
            let sampler = ChiSampler::new(l);
            let k = sampler.degrees_of_freedom();
            let mut a = DMatrix::<f64>::zeros(l.size(), k);
            for j in 0..k {
                let mut e = vec![0.0; k];
                e[j] = 1.0;
                let col = sampler.synthesize(&e).unwrap();
                for x in 0..l.size() {
                    a[(x, j)] = col[x];
                }
            }
            let cov = &a * a.transpose();
            let h = h_matrix(&l);
            assert!((cov - h).abs().max() < 1e-13);
        }
    }

    fn empirical_cov(samples: &[RealGrid], x: usize, y: usize) -> (f64, f64) {
        let prods: Vec<f64> = samples.iter().map(|s| s[x] * s[y]).collect();
        let m = prods.len() as f64;
        let mean = prods.iter().sum::<f64>() / m;
        let var = prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (m - 1.0);
        (mean, (var / m).sqrt())
    }

    #[test]
    fn monte_carlo_variance_small_torus() {
        let l = lat(1, 2);
        let sampler = ChiSampler::new(l);
        let mut rng = rng::stream(77, 0);
        let samples: Vec<RealGrid> = (0..100_000).map(|_| sampler.sample(&mut rng)).collect();
        let (var, se) = empirical_cov(&samples, 0, 0);
        assert!((var - 1.0 / 32.0).abs() <= 3.0 * se, "{var} vs 1/32 (se {se})");
    }

    #[test]
    fn spectral_and_dense_samplers_agree() {
        // same normals through both factorizations; empirical covariances agree
        let l = lat(2, 4);
        let h = h_matrix(&l);
        let eig = SymmetricEigen::new(h.clone());
        let root = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
        let sampler = ChiSampler::new(l);
        let k = sampler.degrees_of_freedom();
        let mut rng = rng::stream(5, 0);
        let trials = 100_000;
        let (mut spectral, mut dense) = (Vec::with_capacity(trials), Vec::with_capacity(trials));
        for _ in 0..trials {
            let xi: Vec<f64> = (0..l.size()).map(|_| StandardNormal.sample(&mut rng)).collect();
            spectral.push(sampler.synthesize(&xi[..k]).unwrap());
            let v = &root * nalgebra::DVector::from_vec(xi);
            dense.push(RealGrid::from_vec(l, v.as_slice().to_vec()).unwrap());
        }
        for (x, y) in [(0, 0), (0, 1), (0, 5), (3, 12)] {
            let (a, sa) = empirical_cov(&spectral, x, y);
            let (b, sb) = empirical_cov(&dense, x, y);
            assert!((a - b).abs() <= 3.0 * (sa * sa + sb * sb).sqrt(), "({x},{y}): {a} vs {b}");
            assert!((a - h[(x, y)]).abs() <= 3.0 * sa);
        }
    }

    #[test]
    fn chi_has_zero_sum_and_is_deterministic() {
        let l = lat(2, 8);
        let a = sample_chi(&l, 1);
        assert!(a.values.sum().abs() <= 1e-10);
        assert_eq!(a, sample_chi(&l, 1));
        assert_ne!(a, sample_chi(&l, 2));
    }

    #[test]
    fn eta_offset_variance_example() {
        assert_abs_diff_eq!(eta_offset_variance(&lat(1, 3)), 4.0 / 27.0, epsilon = 1e-15);
        let l = lat(2, 5);
        let eta = sample_eta(&l, 9);
        let chi = sample_chi(&l, 9);
        // η − χ is one constant
        let diff = eta.values.values()[0] - chi.values.values()[0];
        assert!(eta.values.values().iter().zip(chi.values.values()).all(|(e, c)| (e - c - diff).abs() < 1e-12));
    }

    #[test]
    fn eta_covariance_matches_green_product() {
        let l = lat(1, 4);
        let g = green_function(&l);
        let samples: Vec<RealGrid> = (0..100_000).map(|s| sample_eta(&l, s).values).collect();
        for (x, y) in [(0, 0), (0, 1), (0, 2), (1, 3)] {
            let target: f64 = (0..4).map(|w| g.get(x, w) * g.get(w, y)).sum::<f64>() / 4.0;
            let (cov, se) = empirical_cov(&samples, x, y);
            assert!((cov - target).abs() <= 3.0 * se, "({x},{y}): {cov} vs {target} (se {se})");
        }
    }
}
