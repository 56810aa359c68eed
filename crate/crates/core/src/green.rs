//! Green's function of simple random walk on the torus, expected hitting
//! times, the constant `L`, and the closed-form odometer.
//!
//! With `g(x, y) = |V|^{-1} Σ_z g^z(x, y)` (expected visits to `y` before
//! hitting a uniformly chosen `z`) the Fourier coefficients are
//!
//! ```text
//! ĝ(0) = L,    ĝ(a) = 2d n^{-d} / (−λ_a)   (a ≠ 0),
//! ```
//!
//! as a function of the difference `y − x`, and
//! `L = n^{-2d} Σ_q E_x[τ_q] = 2d n^{-d} Σ_{a≠0} 1/(−λ_a)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sandpile::{Odometer, SandpileConfig};
use crate::torus::{ComplexGrid, Fourier, RealGrid, TorusLattice};

/// Largest lattice for which hitting times are obtained by a linear solve.
pub const MAX_HITTING_SOLVE_SITES: usize = 10_000;
const DENSE_SOLVE_SITES: usize = 1024;
const ZERO_MEAN_TOL: f64 = 1e-6;

/// `E_q[τ_z]` for every start `q`: the unique `h` with `h(z) = 0` and
/// `Δ_g h = −2d` away from `z`.
pub fn hitting_times_to(lattice: &TorusLattice, z: usize) -> Result<RealGrid> {
    let size = lattice.size();
    if z >= size {
        return Err(Error::InvalidParameter(format!("site {z} outside lattice")));
    }
    if size > MAX_HITTING_SOLVE_SITES {
        return Err(Error::InvalidParameter(format!(
            "hitting-time solve limited to {MAX_HITTING_SOLVE_SITES} sites, lattice has {size}"
        )));
    }
    let h = if size <= DENSE_SOLVE_SITES {
        dense_hitting_solve(lattice, z)?
    } else {
        cg_hitting_solve(lattice, z)?
    };
    RealGrid::from_vec(*lattice, h)
}

/// `E_x[τ_z]`.
pub fn expected_hitting_time(lattice: &TorusLattice, x: usize, z: usize) -> Result<f64> {
    if x >= lattice.size() {
        return Err(Error::InvalidParameter(format!("site {x} outside lattice")));
    }
    Ok(hitting_times_to(lattice, z)?[x])
}

// Unknowns are all sites but z, packed by skipping z.
fn dense_hitting_solve(lattice: &TorusLattice, z: usize) -> Result<Vec<f64>> {
    let size = lattice.size();
    let m = size - 1;
    let pack = |x: usize| if x < z { x } else { x - 1 };
    let deg = lattice.degree() as f64;
    let mut a = DMatrix::<f64>::zeros(m, m);
    for x in (0..size).filter(|&x| x != z) {
        let i = pack(x);
        a[(i, i)] += deg;
        for y in lattice.neighbors(x).filter(|&y| y != z) {
            a[(i, pack(y))] -= 1.0;
        }
    }
    let b = DVector::from_element(m, deg);
    let sol = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::SolveFailure("singular hitting-time system".into()))?;
    let mut h = vec![0.0; size];
    for x in (0..size).filter(|&x| x != z) {
        h[x] = sol[pack(x)];
    }
    Ok(h)
}

// Matrix-free conjugate gradients on the same SPD system; z stays pinned at 0.
fn cg_hitting_solve(lattice: &TorusLattice, z: usize) -> Result<Vec<f64>> {
    let size = lattice.size();
    let deg = lattice.degree() as f64;
    let apply = |v: &[f64], out: &mut [f64]| {
        for x in 0..size {
            out[x] = if x == z {
                0.0
            } else {
                deg * v[x] - lattice.neighbors(x).filter(|&y| y != z).map(|y| v[y]).sum::<f64>()
            };
        }
    };
    let mut b = vec![deg; size];
    b[z] = 0.0;
    let mut x = vec![0.0; size];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut ap = vec![0.0; size];
    let b_norm = dot(&b, &b).sqrt();
    let mut rr = dot(&r, &r);
    for _ in 0..20 * size {
        if rr.sqrt() <= 1e-14 * b_norm {
            return Ok(x);
        }
        apply(&p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for i in 0..size {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..size {
            p[i] = r[i] + beta * p[i];
        }
    }
    Err(Error::SolveFailure(format!("conjugate gradients stalled at residual {:e}", rr.sqrt())))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `L = n^{-2d} Σ_q E_x[τ_q]` from the base point `x`.
///
/// On a vertex-transitive graph `E_x[τ_q] = E_q[τ_x]`, so one solve for the
/// hitting times of `x` suffices.
pub fn mass_constant_l_from(lattice: &TorusLattice, x: usize) -> Result<f64> {
    let h = hitting_times_to(lattice, x)?;
    Ok(h.sum() / (lattice.size() as f64).powi(2))
}

/// `L = 2d n^{-d} Σ_{a≠0} 1/(−λ_a)`.
pub fn mass_constant_l_spectral(lattice: &TorusLattice) -> f64 {
    let sum: f64 = (1..lattice.size()).map(|a| 1.0 / (4.0 * lattice.sin2_sum(a))).sum();
    lattice.degree() as f64 * sum / lattice.size() as f64
}

/// `L` by hitting times when the lattice is small enough, spectrally otherwise.
pub fn mass_constant_l(lattice: &TorusLattice) -> Result<f64> {
    if lattice.size() <= MAX_HITTING_SOLVE_SITES {
        mass_constant_l_from(lattice, 0)
    } else {
        Ok(mass_constant_l_spectral(lattice))
    }
}

/// `g(x, y)` stored as the single row `g(0, y − x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenTable {
    row: RealGrid,
    l: f64,
}

impl GreenTable {
    pub fn lattice(&self) -> &TorusLattice {
        self.row.lattice()
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.row[self.lattice().difference(x, y)]
    }

    /// `g(0, ·)`.
    pub fn row(&self) -> &RealGrid {
        &self.row
    }

    pub fn l(&self) -> f64 {
        self.l
    }
}

pub fn green_function(lattice: &TorusLattice) -> GreenTable {
    let solver = PoissonSolver::new(*lattice);
    let mut coeffs = vec![Complex64::default(); lattice.size()];
    coeffs[0] = Complex64::new(solver.l, 0.0);
    let scale = lattice.degree() as f64 / lattice.size() as f64;
    for (c, inv) in coeffs.iter_mut().zip(&solver.inv_neg_eig).skip(1) {
        *c = Complex64::new(scale * inv, 0.0);
    }
    solver.fourier.idft_in_place(&mut coeffs);
    let row = ComplexGrid::from_vec(*lattice, coeffs)
        .expect("sized")
        .into_real(1e-10)
        .expect("g is real");
    GreenTable { row, l: solver.l }
}

/// Spectral solver for the torus Poisson problems behind the odometer and
/// the w-field. Holds the FFT plan and `1/(−λ_a)`.
pub struct PoissonSolver {
    fourier: Fourier,
    inv_neg_eig: Vec<f64>,
    l: f64,
}

impl PoissonSolver {
    pub fn new(lattice: TorusLattice) -> Self {
        let mut inv_neg_eig: Vec<f64> = (0..lattice.size()).map(|a| 1.0 / (4.0 * lattice.sin2_sum(a))).collect();
        inv_neg_eig[0] = 0.0;
        PoissonSolver {
            fourier: Fourier::new(lattice),
            inv_neg_eig,
            l: mass_constant_l_spectral(&lattice),
        }
    }

    pub fn lattice(&self) -> &TorusLattice {
        self.fourier.lattice()
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    /// Zero-mean solution of `Δ_g v = f`; the zero mode of `f` is discarded.
    pub fn solve(&self, f: &RealGrid) -> Result<RealGrid> {
        if f.lattice() != self.lattice() {
            return Err(Error::LatticeMismatch);
        }
        let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fourier.dft_in_place(&mut data);
        for (c, inv) in data.iter_mut().zip(&self.inv_neg_eig) {
            *c *= -inv;
        }
        self.fourier.idft_in_place(&mut data);
        ComplexGrid::from_vec(*self.lattice(), data)?.into_real(1e-8)
    }

    /// Odometer of `s`: `e = v − min v` with `(2d)^{-1} Δ_g v = 1 − s`.
    pub fn odometer(&self, s: &SandpileConfig) -> Result<Odometer> {
        let lat = *self.lattice();
        let rhs = s.mass().map(|&m| 1.0 - m);
        let imbalance = rhs.sum();
        if imbalance.abs() > ZERO_MEAN_TOL * lat.size() as f64 {
            return Err(Error::ZeroMeanViolation { imbalance });
        }
        let deg = lat.degree() as f64;
        let v = self.solve(&rhs.map(|&r| deg * r))?;
        Ok(Odometer::from_raw(v))
    }

    /// `w(y) = (2d)^{-1} Σ_x g(x, y) σ(x)`.
    pub fn w_field(&self, sigma: &RealGrid) -> Result<RealGrid> {
        let lat = *self.lattice();
        if sigma.lattice() != &lat {
            return Err(Error::LatticeMismatch);
        }
        let mut data: Vec<Complex64> = sigma.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fourier.dft_in_place(&mut data);
        data[0] *= self.l * lat.size() as f64 / lat.degree() as f64;
        for (c, inv) in data.iter_mut().zip(&self.inv_neg_eig).skip(1) {
            *c *= *inv;
        }
        self.fourier.idft_in_place(&mut data);
        ComplexGrid::from_vec(lat, data)?.into_real(1e-8)
    }
}

/// Closed-form odometer of a configuration with total mass `n^d`.
pub fn spectral_odometer(s: &SandpileConfig) -> Result<Odometer> {
    PoissonSolver::new(*s.lattice()).odometer(s)
}

pub fn w_field(sigma: &RealGrid) -> RealGrid {
    PoissonSolver::new(*sigma.lattice()).w_field(sigma).expect("same lattice")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sandpile::{draw_weights, init_configuration, stabilize, WeightDistribution};
    use crate::torus::discrete_laplacian;
    use approx::assert_abs_diff_eq;

    fn lat(d: usize, n: usize) -> TorusLattice {
        TorusLattice::new(d, n).unwrap()
    }

    #[test]
    fn hitting_time_examples() {
        let l3 = lat(1, 3);
        assert_eq!(expected_hitting_time(&l3, 1, 1).unwrap(), 0.0);
        assert_abs_diff_eq!(expected_hitting_time(&l3, 0, 1).unwrap(), 2.0, epsilon = 1e-12);
        let l4 = lat(1, 4);
        assert_abs_diff_eq!(expected_hitting_time(&l4, 0, 1).unwrap(), 3.0, epsilon = 1e-12);
        // cycle identity k(n − k)
        let l9 = lat(1, 9);
        let h = hitting_times_to(&l9, 0).unwrap();
        for k in 0..9 {
            assert_abs_diff_eq!(h[k], (k * (9 - k)) as f64, epsilon = 1e-10);
        }
    }

    #[test]
    fn dense_and_cg_solves_agree() {
        let l = lat(2, 9);
        let dense = dense_hitting_solve(&l, 5).unwrap();
        let cg = cg_hitting_solve(&l, 5).unwrap();
        for (a, b) in dense.iter().zip(&cg) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9 * a.abs().max(1.0));
        }
    }

    #[test]
    fn l_examples() {
        assert_abs_diff_eq!(mass_constant_l(&lat(1, 3)).unwrap(), 4.0 / 9.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mass_constant_l(&lat(1, 2)).unwrap(), 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(mass_constant_l(&lat(1, 4)).unwrap(), 0.625, epsilon = 1e-12);
    }

    #[test]
    fn l_by_definition_matches_spectral_identity() {
        for (d, n) in [(1, 5), (1, 8), (2, 4), (2, 5), (3, 3)] {
            let l = lat(d, n);
            // literal definition: n^{-2d} Σ_q E_x[τ_q], one solve per target
            let x = l.size() / 2;
            let by_targets: f64 =
                (0..l.size()).map(|q| expected_hitting_time(&l, x, q).unwrap()).sum::<f64>() / (l.size() as f64).powi(2);
            let spectral = mass_constant_l_spectral(&l);
            assert_abs_diff_eq!(by_targets, spectral, epsilon = 1e-12 * spectral);
            let a = mass_constant_l_from(&l, 0).unwrap();
            let b = mass_constant_l_from(&l, l.size() - 1).unwrap();
            assert!((a - b).abs() <= 1e-12 * a);
        }
    }

    /// g^z(x, y): expected visits to y before τ_z, from an absorbing-walk solve.
    fn stopped_green(l: &TorusLattice, z: usize) -> DMatrix<f64> {
        let size = l.size();
        let deg = l.degree() as f64;
        // (I − P_z) G = I restricted to sites ≠ z
        let mut a = DMatrix::<f64>::identity(size, size);
        for x in (0..size).filter(|&x| x != z) {
            for y in l.neighbors(x).filter(|&y| y != z) {
                a[(x, y)] -= 1.0 / deg;
            }
        }
        let mut g = a.try_inverse().unwrap();
        for i in 0..size {
            g[(z, i)] = 0.0;
            g[(i, z)] = 0.0;
        }
        g
    }

    #[test]
    fn green_table_matches_random_walk_definition() {
        for (d, n) in [(1, 3), (1, 6), (2, 3), (2, 4)] {
            let l = lat(d, n);
            let size = l.size();
            let mut avg = DMatrix::<f64>::zeros(size, size);
            for z in 0..size {
                avg += stopped_green(&l, z);
            }
            avg /= size as f64;
            let table = green_function(&l);
            for x in 0..size {
                for y in 0..size {
                    assert_abs_diff_eq!(table.get(x, y), avg[(x, y)], epsilon = 1e-11);
                }
            }
        }
    }

    #[test]
    fn green_table_properties() {
        let l = lat(2, 6);
        let table = green_function(&l);
        assert_abs_diff_eq!(table.row().sum() / l.size() as f64, table.l(), epsilon = 1e-12);
        for y in 0..l.size() {
            assert_abs_diff_eq!(table.row()[y], table.row()[l.negate(y)], epsilon = 1e-12);
        }
        // Δ_g in x of g(·, y) equals 2d (n^{-d} − δ_y)
        let y = 7;
        let col = RealGrid::from_fn(l, |x| table.get(x, y));
        let lap = discrete_laplacian(&col);
        for x in 0..l.size() {
            let expect = 4.0 * (1.0 / l.size() as f64 - if x == y { 1.0 } else { 0.0 });
            assert_abs_diff_eq!(lap[x], expect, epsilon = 1e-11);
        }
    }

    #[test]
    fn spectral_odometer_examples() {
        let l = lat(1, 3);
        let ones = SandpileConfig::new(RealGrid::constant(l, 1.0));
        assert!(spectral_odometer(&ones).unwrap().values().values().iter().all(|v| v.abs() < 1e-14));

        let s = SandpileConfig::new(RealGrid::from_vec(l, vec![2.0, 0.5, 0.5]).unwrap());
        let e = spectral_odometer(&s).unwrap();
        for (v, want) in e.values().values().iter().zip([1.0, 0.0, 0.0]) {
            assert_abs_diff_eq!(*v, want, epsilon = 1e-14);
        }

        let l4 = lat(1, 4);
        let s = SandpileConfig::new(RealGrid::from_vec(l4, vec![3.0, 1.0, 1.0, -1.0]).unwrap());
        let dynamic = stabilize(&s, 1e-12, 1_000_000).unwrap();
        let spectral = spectral_odometer(&s).unwrap();
        assert!(dynamic.odometer.values().sup_distance(spectral.values()).unwrap() <= 1e-8);
    }

    #[test]
    fn odometer_residual_and_zero_mean_guard() {
        let l = lat(2, 16);
        let s = init_configuration(&draw_weights(&l, &WeightDistribution::Gaussian, 8));
        let e = spectral_odometer(&s).unwrap();
        let lap = discrete_laplacian(e.values());
        for x in 0..l.size() {
            assert_abs_diff_eq!(lap[x] / 4.0, 1.0 - s.mass()[x], epsilon = 1e-9);
        }
        assert_eq!(e.values().min(), 0.0);
        let heavy = SandpileConfig::new(RealGrid::constant(l, 1.5));
        assert!(matches!(spectral_odometer(&heavy), Err(Error::ZeroMeanViolation { .. })));
    }

    #[test]
    fn random_inputs_match_dynamics() {
        let l = lat(2, 16);
        let s = init_configuration(&draw_weights(&l, &WeightDistribution::Gaussian, 21));
        let dynamic = stabilize(&s, 1e-12, 10_000_000).unwrap();
        let spectral = spectral_odometer(&s).unwrap();
        assert!(dynamic.odometer.values().sup_distance(spectral.values()).unwrap() <= 1e-8);
    }

    #[test]
    fn w_field_matches_green_sum() {
        let l = lat(2, 5);
        let sigma = draw_weights(&l, &WeightDistribution::Gaussian, 4);
        let table = green_function(&l);
        let w = w_field(&sigma);
        for y in 0..l.size() {
            let direct: f64 = (0..l.size()).map(|x| table.get(x, y) * sigma[x]).sum::<f64>() / 4.0;
            assert_abs_diff_eq!(w[y], direct, epsilon = 1e-11);
        }
        assert!(w_field(&RealGrid::zeros(l)).values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn w_field_is_translation_covariant() {
        let l = lat(2, 6);
        let sigma = draw_weights(&l, &WeightDistribution::Uniform, 12);
        let shift = l.index_of(&[2, 5]);
        let lhs = w_field(&sigma.translated(shift));
        let rhs = w_field(&sigma).translated(shift);
        assert!(lhs.sup_distance(&rhs).unwrap() < 1e-12);
    }
}
