//! Small statistics helpers for Monte Carlo reports.

use serde::Serialize;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Estimate {
        let m = xs.len();
        let mean = xs.iter().sum::<f64>() / m as f64;
        let std_error = if m > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
            (var / m as f64).sqrt()
        } else {
            f64::NAN
        };
        Estimate { mean, std_error, samples: m }
    }

    /// `|mean − target| ≤ k · SE`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error
    }

    /// Distance to `target` in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target) / self.std_error
    }
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Spearman rank correlation.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    pearson(&ranks(xs), &ranks(ys))
}

/// One-sided p-value for a positive Spearman correlation, `P(ρ ≥ ρ_obs)`
/// under independence, by exhaustive permutation (at most 8 points).
pub fn spearman_positive_p(xs: &[f64], ys: &[f64]) -> f64 {
    assert!(xs.len() <= 8, "exact permutation test limited to 8 points");
    let rho = spearman(xs, ys);
    let rx = ranks(xs);
    let ry = ranks(ys);
    let mut perm: Vec<usize> = (0..ry.len()).collect();
    let (mut hits, mut total) = (0u64, 0u64);
    permute(&mut perm, 0, &mut |p| {
        let shuffled: Vec<f64> = p.iter().map(|&i| ry[i]).collect();
        total += 1;
        if pearson(&rx, &shuffled) >= rho - 1e-12 {
            hits += 1;
        }
    });
    hits as f64 / total as f64
}

fn permute(v: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == v.len() {
        visit(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, visit);
        v.swap(k, i);
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

/// `(m − 1)!!` for even `m`, 0 for odd `m`: the m-th moment of a standard Gaussian.
pub fn gaussian_moment_factor(m: u32) -> f64 {
    if m % 2 == 1 {
        return 0.0;
    }
    (1..m).step_by(2).map(|k| k as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_basics() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        assert!((e.std_error - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!(e.within(2.5, 0.0));
    }

    #[test]
    fn spearman_values() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&x, &[10.0, 20.0, 30.0, 40.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&x, &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        // ties get average ranks
        assert!((spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]) - 0.866_025_403_784_438_6).abs() < 1e-12);
    }

    #[test]
    fn permutation_p_values() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman_positive_p(&x, &[1.0, 2.0, 3.0, 4.0]) - 1.0 / 24.0).abs() < 1e-15);
        assert_eq!(spearman_positive_p(&x, &[4.0, 3.0, 2.0, 1.0]), 1.0);
    }

    #[test]
    fn slope_and_double_factorial() {
        let xs = [8.0, 16.0, 32.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-1.5)).collect();
        assert!((log_log_slope(&xs, &ys) + 1.5).abs() < 1e-12);
        assert_eq!(gaussian_moment_factor(2), 1.0);
        assert_eq!(gaussian_moment_factor(4), 3.0);
        assert_eq!(gaussian_moment_factor(6), 15.0);
        assert_eq!(gaussian_moment_factor(3), 0.0);
    }
}
