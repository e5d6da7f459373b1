//! Heat kernels of the rate-`k` random walk on the discrete torus, computed
//! spectrally. Along one axis of side `L` the kernel is
//!
//! ```text
//! (1/L) sum_{m=0}^{L-1} exp(k t lambda_m) cos(2 pi m x / L),   lambda_m = 2 (cos(2 pi m / L) - 1)
//! ```
//!
//! and the `d`-dimensional kernel is the product over axes. Time integrals
//! are taken term by term, so they are exact up to rounding.

use std::f64::consts::PI;

use crate::lattice::Torus;

#[derive(Debug, Clone)]
pub struct TorusKernel {
    dim: usize,
    side: usize,
    rate: f64,
    eigen: Vec<f64>,
    cos_table: Vec<f64>,
}

/// `(e^z - 1) / z`, continuous at 0.
fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 + 0.5 * z
    } else {
        z.exp_m1() / z
    }
}

/// `(e^z - 1 - z) / z^2`, continuous at 0.
fn phi2(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        // sum_n z^n / (n + 2)!
        let mut term = 0.5;
        let mut sum = 0.5;
        for n in 1..12 {
            term *= z / (n + 2) as f64;
            sum += term;
        }
        sum
    } else {
        (z.exp_m1() - z) / (z * z)
    }
}

impl TorusKernel {
    /// Kernel `q^torus_{k t}` of the walk that jumps to each neighbour at rate `k`.
    pub fn new(torus: &Torus, k: usize) -> Self {
        let side = torus.side();
        let cos_table: Vec<f64> = (0..side)
            .map(|i| (2.0 * PI * i as f64 / side as f64).cos())
            .collect();
        let eigen = cos_table.iter().map(|c| 2.0 * (c - 1.0)).collect();
        Self {
            dim: torus.dim(),
            side,
            rate: k as f64,
            eigen,
            cos_table,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// One-axis kernel at displacements `0..L`.
    pub fn axis_row(&self, t: f64) -> Vec<f64> {
        let weights: Vec<f64> = self.eigen.iter().map(|l| (self.rate * t * l).exp()).collect();
        self.axis_transform(&weights)
    }

    /// `(1/L) sum_m c_m cos(2 pi m x / L)` for every `x`.
    fn axis_transform(&self, coeffs: &[f64]) -> Vec<f64> {
        let l = self.side;
        (0..l)
            .map(|x| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(m, c)| c * self.cos_table[(m * x) % l])
                    .sum::<f64>()
                    / l as f64
            })
            .collect()
    }

    /// `q^torus_{kt}(O, O)`.
    pub fn origin(&self, t: f64) -> f64 {
        let axis: f64 = self.eigen.iter().map(|l| (self.rate * t * l).exp()).sum::<f64>() / self.side as f64;
        axis.powi(self.dim as i32)
    }

    /// `q^torus_{kt}(O, x)` for the site with the given coordinates.
    pub fn at(&self, t: f64, coords: &[usize]) -> f64 {
        let row = self.axis_row(t);
        coords.iter().map(|&c| row[c % self.side]).product()
    }

    /// Kernel from the origin to every site, row-major.
    pub fn all_sites(&self, t: f64) -> Vec<f64> {
        let row = self.axis_row(t);
        let mut out = vec![1.0];
        for _ in 0..self.dim {
            out = out.iter().flat_map(|&a| row.iter().map(move |&b| a * b)).collect();
        }
        out
    }

    /// Distinct per-axis eigenvalues with multiplicities.
    fn axis_spectrum(&self) -> Vec<(f64, f64)> {
        let l = self.side;
        (0..=l / 2)
            .map(|m| {
                let mult = if m == 0 || 2 * m == l { 1.0 } else { 2.0 };
                (self.eigen[m], mult)
            })
            .collect()
    }

    /// Eigenvalues `sum_i lambda_{m_i}` of the `d`-dimensional Laplacian,
    /// grouped with their multiplicities.
    fn spectrum(&self) -> Vec<(f64, f64)> {
        let axis = self.axis_spectrum();
        let mut out = vec![(0.0, 1.0)];
        for _ in 0..self.dim {
            out = out
                .iter()
                .flat_map(|&(a, ma)| axis.iter().map(move |&(b, mb)| (a + b, ma * mb)))
                .collect();
        }
        out
    }

    fn volume(&self) -> f64 {
        (self.side as f64).powi(self.dim as i32)
    }

    /// `int_0^a (a - r) q^torus_{kr}(O, O) dr`.
    pub fn lag_weighted_integral(&self, a: f64) -> f64 {
        self.spectrum()
            .iter()
            .map(|&(lam, mult)| mult * a * a * phi2(self.rate * lam * a))
            .sum::<f64>()
            / self.volume()
    }

    /// `int_0^s int_0^t q^torus_{k|u - v|}(O, O) du dv` for `0 <= s <= t`.
    pub fn occupation_cov_integral(&self, s: f64, t: f64) -> f64 {
        let (s, t) = if s <= t { (s, t) } else { (t, s) };
        self.lag_weighted_integral(s) + self.lag_weighted_integral(t) - self.lag_weighted_integral(t - s)
    }

    /// `v^torus(t, x) = int_0^t q^torus_{ks}(O, x) ds` for every site, row-major.
    pub fn integrated_all_sites(&self, t: f64) -> Vec<f64> {
        let l = self.side;
        let n = l.pow(self.dim as u32);
        // Coefficients over the multi-index m, then one cosine transform per axis.
        let mut data: Vec<f64> = (0..n)
            .map(|idx| {
                let mut rest = idx;
                let mut lam = 0.0;
                for _ in 0..self.dim {
                    lam += self.eigen[rest % l];
                    rest /= l;
                }
                t * phi1(self.rate * lam * t)
            })
            .collect();
        let mut line = vec![0.0; l];
        for axis in 0..self.dim {
            let stride = l.pow((self.dim - 1 - axis) as u32);
            for base in 0..n {
                if (base / stride) % l != 0 {
                    continue;
                }
                for (m, v) in line.iter_mut().enumerate() {
                    *v = data[base + m * stride];
                }
                let out = self.axis_transform(&line);
                for (x, v) in out.into_iter().enumerate() {
                    data[base + x * stride] = v;
                }
            }
        }
        data
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_helpers_continuous() {
        for &z in &[-1e-2, -1e-4, 0.0, 1e-4, 1e-2] {
            let a = phi2(z);
            let direct = if z == 0.0 { 0.5 } else { (z.exp_m1() - z) / (z * z) };
            assert!((a - direct).abs() < 1e-9);
        }
        assert_eq!(phi1(0.0), 1.0);
    }

    #[test]
    fn integrated_matches_quadrature_in_two_dimensions() {
        let torus = Torus::new(2, 5).unwrap();
        let kern = TorusKernel::new(&torus, 2);
        let v = kern.integrated_all_sites(0.7);
        for site in [0, 1, 7, 24] {
            let coords = torus.coords(site).unwrap();
            let quad = crate::kernels::quadrature::gauss_legendre(|s| kern.at(s, &coords), 0.0, 0.7, 8);
            assert!((v[site] - quad).abs() < 1e-13, "site {site}: {} vs {quad}", v[site]);
        }
    }
}
