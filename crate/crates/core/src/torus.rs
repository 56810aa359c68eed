//! The discrete torus `Z_n^d`: site indexing, frequency labels, Fourier
//! transforms and the spectrum of the nearest-neighbour graph Laplacian.
//!
//! Sites are stored row-major over canonical coordinates `{0, …, n-1}^d`
//! (last axis fastest). The Fourier convention is
//!
//! ```text
//! f̂(a) = n^{-d} Σ_x f(x) ψ_{-a}(x),     f(x) = Σ_a f̂(a) ψ_a(x),
//! ψ_a(x) = exp(2πi x·a / n),
//! ```
//!
//! so Parseval reads `n^{-d} Σ_x |f(x)|² = Σ_a |f̂(a)|²`.

use std::f64::consts::PI;
use std::ops::{Add, Index, IndexMut, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusLattice {
    d: usize,
    n: usize,
    size: usize,
}

impl TorusLattice {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidLattice("dimension must be at least 1".into()));
        }
        if n < 2 {
            return Err(Error::InvalidLattice(format!("side length {n} < 2")));
        }
        let size = u32::try_from(d)
            .ok()
            .and_then(|d| n.checked_pow(d))
            .filter(|s| s.checked_mul(std::mem::size_of::<Complex64>()).is_some())
            .ok_or_else(|| Error::InvalidLattice(format!("{n}^{d} sites overflow")))?;
        Ok(TorusLattice { d, n, size })
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of sites, `n^d`.
    #[inline]
    pub fn size(&self) -> usize {
        self.size
    }

    /// Number of neighbours of every site, counted with multiplicity.
    #[inline]
    pub fn degree(&self) -> usize {
        2 * self.d
    }

    /// Index distance between consecutive coordinates along `axis`.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.d - 1 - axis) as u32)
    }

    pub fn coords(&self, index: usize) -> Vec<usize> {
        let mut out = vec![0; self.d];
        let mut rest = index;
        for c in out.iter_mut().rev() {
            *c = rest % self.n;
            rest /= self.n;
        }
        out
    }

    /// Row-major index of a coordinate vector; components are reduced mod n.
    pub fn index_of(&self, coords: &[i64]) -> usize {
        debug_assert_eq!(coords.len(), self.d);
        let n = self.n as i64;
        coords
            .iter()
            .fold(0usize, |acc, &c| acc * self.n + c.rem_euclid(n) as usize)
    }

    /// Index of `x + sign·e_axis`.
    #[inline]
    pub fn shift(&self, index: usize, axis: usize, forward: bool) -> usize {
        let stride = self.stride(axis);
        let c = (index / stride) % self.n;
        match (forward, c) {
            (true, c) if c + 1 == self.n => index - (self.n - 1) * stride,
            (true, _) => index + stride,
            (false, 0) => index + (self.n - 1) * stride,
            (false, _) => index - stride,
        }
    }

    /// The 2d neighbours of a site, with multiplicity (for n = 2 both
    /// directions along an axis reach the same site).
    pub fn neighbors(&self, index: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.d).flat_map(move |axis| [self.shift(index, axis, true), self.shift(index, axis, false)])
    }

    /// Index of `y - x`.
    pub fn difference(&self, x: usize, y: usize) -> usize {
        let n = self.n;
        let mut out = 0;
        let (mut xr, mut yr) = (x, y);
        let mut place = 1;
        for _ in 0..self.d {
            let c = (yr % n + n - xr % n) % n;
            out += c * place;
            place *= n;
            xr /= n;
            yr /= n;
        }
        out
    }

    /// Index of `-x`.
    pub fn negate(&self, x: usize) -> usize {
        self.difference(x, 0)
    }

    /// Centered representative in `(-n/2, n/2]` of a storage coordinate.
    #[inline]
    pub fn centered(&self, c: usize) -> i64 {
        let (c, n) = (c as i64, self.n as i64);
        if 2 * c > n {
            c - n
        } else {
            c
        }
    }

    pub fn frequency(&self, index: usize) -> FrequencyIndex {
        FrequencyIndex::from_storage(self, &self.coords(index))
    }

    /// `Σ_i sin²(π a_i / n)` for the frequency stored at `index`; equals `-λ_a / 4`.
    pub fn sin2_sum(&self, index: usize) -> f64 {
        let n = self.n as f64;
        let mut rest = index;
        let mut acc = 0.0;
        for _ in 0..self.d {
            let s = (PI * (rest % self.n) as f64 / n).sin();
            acc += s * s;
            rest /= self.n;
        }
        acc
    }

    /// `λ_a` for every frequency, in storage order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        (0..self.size).map(|i| -4.0 * self.sin2_sum(i)).collect()
    }
}

/// A frequency label with both its storage representative in `{0,…,n-1}^d`
/// and its centered representative in `(-n/2, n/2]^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FrequencyIndex {
    storage: Vec<usize>,
    centered: Vec<i64>,
}

impl FrequencyIndex {
    pub fn from_storage(lattice: &TorusLattice, storage: &[usize]) -> Self {
        let storage: Vec<usize> = storage.iter().map(|&c| c % lattice.n()).collect();
        let centered = storage.iter().map(|&c| lattice.centered(c)).collect();
        FrequencyIndex { storage, centered }
    }

    /// Any integer vector; reduced modulo n.
    pub fn from_integer(lattice: &TorusLattice, a: &[i64]) -> Self {
        let n = lattice.n() as i64;
        let storage: Vec<usize> = a.iter().map(|&c| c.rem_euclid(n) as usize).collect();
        Self::from_storage(lattice, &storage)
    }

    pub fn storage(&self) -> &[usize] {
        &self.storage
    }

    pub fn centered(&self) -> &[i64] {
        &self.centered
    }

    pub fn is_zero(&self) -> bool {
        self.storage.iter().all(|&c| c == 0)
    }

    /// Euclidean norm of the centered representative.
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.centered.iter().map(|&c| (c * c) as f64).sum()
    }

    pub fn index(&self, lattice: &TorusLattice) -> usize {
        self.storage.iter().fold(0, |acc, &c| acc * lattice.n() + c)
    }
}

/// `λ_a = -4 Σ_i sin²(π a_i / n)`.
pub fn laplacian_eigenvalue(lattice: &TorusLattice, a: &FrequencyIndex) -> f64 {
    let n = lattice.n() as f64;
    -4.0 * a
        .storage()
        .iter()
        .map(|&c| (PI * c as f64 / n).sin().powi(2))
        .sum::<f64>()
}

/// A function on the sites (or frequencies) of a torus.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    lattice: TorusLattice,
    values: Vec<T>,
}

pub type RealGrid = Grid<f64>;
pub type ComplexGrid = Grid<Complex64>;

impl<T> Grid<T> {
    pub fn from_vec(lattice: TorusLattice, values: Vec<T>) -> Result<Self> {
        if values.len() != lattice.size() {
            return Err(Error::InvalidParameter(format!(
                "{} values for a lattice of {} sites",
                values.len(),
                lattice.size()
            )));
        }
        Ok(Grid { lattice, values })
    }

    pub fn from_fn(lattice: TorusLattice, f: impl FnMut(usize) -> T) -> Self {
        Grid { lattice, values: (0..lattice.size()).map(f).collect() }
    }

    pub fn lattice(&self) -> &TorusLattice {
        &self.lattice
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid { lattice: self.lattice, values: self.values.iter().map(f).collect() }
    }
}

impl<T: Clone> Grid<T> {
    pub fn constant(lattice: TorusLattice, value: T) -> Self {
        Grid { lattice, values: vec![value; lattice.size()] }
    }
}

impl<T> Index<usize> for Grid<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.values[i]
    }
}

impl<T> IndexMut<usize> for Grid<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.values[i]
    }
}

impl RealGrid {
    pub fn zeros(lattice: TorusLattice) -> Self {
        Self::constant(lattice, 0.0)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_complex(&self) -> ComplexGrid {
        self.map(|&v| Complex64::new(v, 0.0))
    }

    /// Sup-norm distance to another grid on the same lattice.
    pub fn sup_distance(&self, other: &RealGrid) -> Result<f64> {
        if self.lattice != other.lattice {
            return Err(Error::LatticeMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// The grid translated by `shift`: `out(x) = self(x - shift)`.
    pub fn translated(&self, shift: usize) -> RealGrid {
        let lat = self.lattice;
        Grid::from_fn(lat, |x| self.values[lat.difference(shift, x)])
    }
}

impl ComplexGrid {
    /// The character `ψ_a(x) = exp(2πi x·a/n)` as a grid function.
    pub fn character(lattice: TorusLattice, a: &FrequencyIndex) -> Self {
        let n = lattice.n() as f64;
        Grid::from_fn(lattice, |x| {
            let phase: f64 = lattice
                .coords(x)
                .iter()
                .zip(a.storage())
                .map(|(&xi, &ai)| ((xi * ai) % lattice.n()) as f64)
                .sum();
            Complex64::from_polar(1.0, 2.0 * PI * phase / n)
        })
    }

    /// Largest absolute imaginary part.
    pub fn imaginary_residue(&self) -> f64 {
        self.values.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// Drop the imaginary part, provided it is at most `tol` everywhere.
    pub fn into_real(self, tol: f64) -> Result<RealGrid> {
        let residue = self.imaginary_residue();
        if residue > tol {
            return Err(Error::ImaginaryResidue(residue));
        }
        Ok(self.map(|z| z.re))
    }
}

/// Planned multi-dimensional FFT for one lattice.
pub struct Fourier {
    lattice: TorusLattice,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fourier {
    pub fn new(lattice: TorusLattice) -> Self {
        let mut planner = FftPlanner::new();
        Fourier {
            lattice,
            forward: planner.plan_fft_forward(lattice.n()),
            inverse: planner.plan_fft_inverse(lattice.n()),
        }
    }

    pub fn lattice(&self) -> &TorusLattice {
        &self.lattice
    }

    /// Unnormalized transform along every axis, in place.
    fn transform(&self, data: &mut [Complex64], fft: &dyn Fft<f64>) {
        let lat = &self.lattice;
        let n = lat.n();
        let size = lat.size();
        let mut lines = vec![Complex64::default(); size];
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        for axis in 0..lat.d() {
            let stride = lat.stride(axis);
            if stride == 1 {
                fft.process_with_scratch(data, &mut scratch);
                continue;
            }
            // gather each line along `axis` into a contiguous chunk
            let block = stride * n;
            let mut k = 0;
            for base in (0..size).step_by(block) {
                for off in 0..stride {
                    for j in 0..n {
                        lines[k] = data[base + off + j * stride];
                        k += 1;
                    }
                }
            }
            fft.process_with_scratch(&mut lines, &mut scratch);
            let mut k = 0;
            for base in (0..size).step_by(block) {
                for off in 0..stride {
                    for j in 0..n {
                        data[base + off + j * stride] = lines[k];
                        k += 1;
                    }
                }
            }
        }
    }

    pub fn dft_in_place(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.lattice.size());
        self.transform(data, self.forward.as_ref());
        let scale = 1.0 / self.lattice.size() as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    pub fn idft_in_place(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.lattice.size());
        self.transform(data, self.inverse.as_ref());
    }

    pub fn dft(&self, f: &ComplexGrid) -> Result<ComplexGrid> {
        self.check(f.lattice())?;
        let mut out = f.clone();
        self.dft_in_place(out.values_mut());
        Ok(out)
    }

    pub fn dft_real(&self, f: &RealGrid) -> Result<ComplexGrid> {
        self.check(f.lattice())?;
        let mut out = f.to_complex();
        self.dft_in_place(out.values_mut());
        Ok(out)
    }

    pub fn idft(&self, coeffs: &ComplexGrid) -> Result<ComplexGrid> {
        self.check(coeffs.lattice())?;
        let mut out = coeffs.clone();
        self.idft_in_place(out.values_mut());
        Ok(out)
    }

    fn check(&self, lattice: &TorusLattice) -> Result<()> {
        if *lattice != self.lattice {
            return Err(Error::LatticeMismatch);
        }
        Ok(())
    }
}

/// `f̂(a) = n^{-d} Σ_x f(x) ψ_{-a}(x)`.
pub fn dft(f: &ComplexGrid) -> ComplexGrid {
    let mut out = f.clone();
    Fourier::new(*f.lattice()).dft_in_place(out.values_mut());
    out
}

pub fn dft_real(f: &RealGrid) -> ComplexGrid {
    dft(&f.to_complex())
}

/// `f(x) = Σ_a F(a) ψ_a(x)`.
pub fn idft(coeffs: &ComplexGrid) -> ComplexGrid {
    let mut out = coeffs.clone();
    Fourier::new(*coeffs.lattice()).idft_in_place(out.values_mut());
    out
}

/// `Δ_g f(x) = Σ_{y∼x} (f(y) − f(x))`, neighbours counted with multiplicity.
pub fn discrete_laplacian<T>(f: &Grid<T>) -> Grid<T>
where
    T: Copy + Default + Add<Output = T> + Sub<Output = T>,
{
    let lat = *f.lattice();
    Grid::from_fn(lat, |x| {
        let fx = f[x];
        lat.neighbors(x).fold(T::default(), |acc, y| acc + (f[y] - fx))
    })
}

/// Outcome of checking, for every `a ≠ 0` with centered representative `w`,
///
/// ```text
/// n² Σ_i sin²(π w_i/n) ≥ 4‖w‖²                                  (lower)
/// 1/‖πw‖⁴ ≤ n^{-4} (Σ_i sin²(π w_i/n))^{-2} ≤ (1/‖πw‖² + c/n²)²   (sandwich)
/// ```
///
/// The sandwich holds with the smallest admissible `c`, reported as
/// `constant_c`; comparisons allow a relative slack of `1e-12`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenvalueBoundReport {
    pub d: usize,
    pub n: usize,
    pub checked: usize,
    pub lower_violations: usize,
    pub sandwich_violations: usize,
    pub constant_c: f64,
}

impl EigenvalueBoundReport {
    pub fn passed(&self) -> bool {
        self.lower_violations == 0 && self.sandwich_violations == 0 && self.constant_c.is_finite()
    }
}

pub fn check_eigenvalue_bounds(lattice: &TorusLattice) -> EigenvalueBoundReport {
    const SLACK: f64 = 1e-12;
    let n = lattice.n() as f64;
    let mut report = EigenvalueBoundReport {
        d: lattice.d(),
        n: lattice.n(),
        checked: 0,
        lower_violations: 0,
        sandwich_violations: 0,
        constant_c: f64::NEG_INFINITY,
    };
    for a in 1..lattice.size() {
        let w2 = lattice.frequency(a).norm_sq();
        let s = lattice.sin2_sum(a);
        report.checked += 1;
        if n * n * s < 4.0 * w2 * (1.0 - SLACK) {
            report.lower_violations += 1;
        }
        // left half of the sandwich is n² S ≤ π² ‖w‖²
        if n * n * s > PI * PI * w2 * (1.0 + SLACK) {
            report.sandwich_violations += 1;
        }
        let c = 1.0 / s - n * n / (PI * PI * w2);
        report.constant_c = report.constant_c.max(c);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn lat(d: usize, n: usize) -> TorusLattice {
        TorusLattice::new(d, n).unwrap()
    }

    #[test]
    fn rejects_degenerate_lattices() {
        assert!(TorusLattice::new(0, 4).is_err());
        assert!(TorusLattice::new(2, 1).is_err());
        assert!(TorusLattice::new(64, 1 << 20).is_err());
    }

    #[test]
    fn every_site_has_2d_neighbors() {
        for (d, n) in [(1, 2), (2, 2), (3, 5), (2, 7)] {
            let l = lat(d, n);
            for x in 0..l.size() {
                assert_eq!(l.neighbors(x).count(), 2 * d);
            }
        }
        // n = 2: both directions along an axis hit the same site
        let l = lat(1, 2);
        assert_eq!(l.neighbors(1).collect::<Vec<_>>(), vec![0, 0]);
    }

    #[test]
    fn eigenvalue_examples() {
        let l = lat(1, 4);
        assert_abs_diff_eq!(laplacian_eigenvalue(&l, &FrequencyIndex::from_integer(&l, &[1])), -2.0, epsilon = 1e-15);
        let l = lat(2, 2);
        assert_abs_diff_eq!(laplacian_eigenvalue(&l, &FrequencyIndex::from_integer(&l, &[1, 1])), -8.0, epsilon = 1e-15);
        let l = lat(3, 5);
        assert_eq!(laplacian_eigenvalue(&l, &FrequencyIndex::from_integer(&l, &[0, 0, 0])), 0.0);
    }

    #[test]
    fn eigenvalue_is_representative_independent() {
        let l = lat(2, 6);
        let a = FrequencyIndex::from_integer(&l, &[-2, 5]);
        let b = FrequencyIndex::from_integer(&l, &[4, -1]);
        assert_eq!(a, b);
        assert_eq!(a.centered(), &[-2, -1]);
        assert_abs_diff_eq!(laplacian_eigenvalue(&l, &a), -4.0 * l.sin2_sum(a.index(&l)), epsilon = 1e-14);
    }

    #[test]
    fn even_nyquist_is_positive() {
        let l = lat(1, 8);
        let a = FrequencyIndex::from_storage(&l, &[4]);
        assert_eq!(a.centered(), &[4]);
        let a = FrequencyIndex::from_storage(&l, &[5]);
        assert_eq!(a.centered(), &[-3]);
    }

    #[test]
    fn laplacian_stencil_examples() {
        let l = lat(1, 3);
        let f = Grid::from_vec(l, vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(discrete_laplacian(&f).values(), &[-2.0, 1.0, 1.0]);
        let c = RealGrid::constant(lat(2, 5), 3.5);
        assert!(discrete_laplacian(&c).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn laplacian_of_character() {
        let l = lat(1, 4);
        let a = FrequencyIndex::from_integer(&l, &[1]);
        let psi = ComplexGrid::character(l, &a);
        let lap = discrete_laplacian(&psi);
        for x in 0..4 {
            assert!((lap[x] + 2.0 * psi[x]).norm() < 1e-14);
        }
    }

    #[test]
    fn dft_of_constant_and_character() {
        let l = lat(2, 4);
        let c = dft_real(&RealGrid::constant(l, 2.5));
        assert!((c[0] - Complex64::new(2.5, 0.0)).norm() < 1e-14);
        assert!(c.values()[1..].iter().all(|z| z.norm() < 1e-14));

        let b = FrequencyIndex::from_integer(&l, &[1, 3]);
        let f = dft(&ComplexGrid::character(l, &b));
        for i in 0..l.size() {
            let expect = if i == b.index(&l) { 1.0 } else { 0.0 };
            assert!((f[i] - Complex64::new(expect, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn idft_examples() {
        let l = lat(1, 6);
        let mut delta = ComplexGrid::constant(l, Complex64::default());
        delta[0] = Complex64::new(1.0, 0.0);
        assert!(idft(&delta).values().iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-14));

        let mut cosine = ComplexGrid::constant(l, Complex64::default());
        cosine[1] = Complex64::new(0.5, 0.0);
        cosine[5] = Complex64::new(0.5, 0.0);
        let f = idft(&cosine);
        for x in 0..6 {
            assert_abs_diff_eq!(f[x].re, (2.0 * PI * x as f64 / 6.0).cos(), epsilon = 1e-14);
            assert_abs_diff_eq!(f[x].im, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn difference_and_negate() {
        let l = lat(2, 5);
        let x = l.index_of(&[1, 4]);
        let y = l.index_of(&[3, 2]);
        assert_eq!(l.difference(x, y), l.index_of(&[2, -2]));
        assert_eq!(l.negate(x), l.index_of(&[-1, -4]));
    }

    #[test]
    fn into_real_rejects_residue() {
        let l = lat(1, 2);
        let g = Grid::from_vec(l, vec![Complex64::new(1.0, 1e-3), Complex64::new(0.0, 0.0)]).unwrap();
        assert!(matches!(g.into_real(1e-10), Err(Error::ImaginaryResidue(_))));
    }
    #[test]
    fn eigenvalue_bounds_exhaustive_small() {
        for d in 1..=3 {
            for n in 2..=12 {
                let r = check_eigenvalue_bounds(&TorusLattice::new(d, n).unwrap());
                assert!(r.passed(), "{r:?}");
                assert_eq!(r.checked, n.pow(d as u32) - 1);
                assert!(r.constant_c < 1.0);
            }
        }
        // the lower bound is an equality at w = n/2 in d = 1
        let r = check_eigenvalue_bounds(&TorusLattice::new(1, 8).unwrap());
        assert!((r.constant_c - (1.0 - 4.0 / (PI * PI))).abs() < 1e-12);
    }
}
