//! Closed-form limit objects: the species covariance matrix, its square
//! root, the dimension-dependent scalings and limit covariances, and the
//! exact finite-time occupation covariance.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{self, QuadratureSpec, TorusKernel};
use crate::lattice::Torus;
use crate::state::ModelParams;

/// Dense symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovMatrix {
    n: usize,
    data: Vec<f64>,
}

const SYMMETRY_TOL: f64 = 1e-12;
const NEGATIVE_EIGEN_TOL: f64 = 1e-9;
const JACOBI_OFF_TOL: f64 = 1e-13;

impl CovMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Usage("matrix rows must all have the same length as the row count".into()));
        }
        let m = Self {
            n,
            data: rows.iter().flatten().copied().collect(),
        };
        for i in 0..n {
            for j in 0..i {
                if (m.get(i, j) - m.get(j, i)).abs() > SYMMETRY_TOL {
                    return Err(Error::Domain(format!(
                        "matrix is not symmetric: entries ({i},{j}) and ({j},{i}) differ"
                    )));
                }
            }
        }
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    pub fn matmul(&self, other: &CovMatrix) -> Vec<Vec<f64>> {
        let n = self.n;
        (0..n)
            .map(|i| (0..n).map(|j| (0..n).map(|k| self.get(i, k) * other.get(k, j)).sum()).collect())
            .collect()
    }

    fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    fn off_diagonal(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    s += self.get(i, j).powi(2);
                }
            }
        }
        s.sqrt()
    }

    /// Eigenvalues and eigenvectors (as columns of the returned row-major
    /// matrix) by the cyclic Jacobi method.
    pub fn jacobi_eigen(&self) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.n;
        let mut a = self.clone();
        let mut v = CovMatrix::identity(n);
        let target = JACOBI_OFF_TOL * self.frobenius().max(1.0);
        for _sweep in 0..100 {
            if a.off_diagonal() < target {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a.get(p, q);
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..n {
                        let apk = a.get(p, k);
                        let aqk = a.get(q, k);
                        a.set(p, k, c * apk - s * aqk);
                        a.set(q, k, s * apk + c * aqk);
                    }
                    for k in 0..n {
                        let vkp = v.get(k, p);
                        let vkq = v.get(k, q);
                        v.set(k, p, c * vkp - s * vkq);
                        v.set(k, q, s * vkp + c * vkq);
                    }
                }
            }
        }
        ((0..n).map(|i| a.get(i, i)).collect(), v.rows())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.jacobi_eigen().0.into_iter().fold(f64::INFINITY, f64::min)
    }
}

/// `A = diag(p) - p p^T`, the covariance of one multinomial draw.
pub fn matrix_a(params: &ModelParams) -> CovMatrix {
    let p = params.densities();
    let rows: Vec<Vec<f64>> = (0..p.len())
        .map(|i| {
            (0..p.len())
                .map(|j| if i == j { p[i] * (1.0 - p[i]) } else { -p[i] * p[j] })
                .collect()
        })
        .collect();
    CovMatrix {
        n: p.len(),
        data: rows.into_iter().flatten().collect(),
    }
}

/// Entry `A(j1, j2)` for 0-based tracked species.
pub fn a_entry(params: &ModelParams, j1: usize, j2: usize) -> f64 {
    let p = params.densities();
    if j1 == j2 {
        p[j1] * (1.0 - p[j1])
    } else {
        -p[j1] * p[j2]
    }
}

/// Symmetric positive semidefinite square root via Jacobi eigendecomposition.
pub fn matrix_sqrt(m: &CovMatrix) -> Result<CovMatrix> {
    let (vals, vecs) = m.jacobi_eigen();
    if let Some(bad) = vals.iter().find(|&&l| l < -NEGATIVE_EIGEN_TOL) {
        return Err(Error::Domain(format!("matrix has negative eigenvalue {bad:e}")));
    }
    let roots: Vec<f64> = vals.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let n = m.dim();
    let mut out = CovMatrix { n, data: vec![0.0; n * n] };
    for i in 0..n {
        for j in 0..n {
            let s: f64 = (0..n).map(|k| vecs[i][k] * roots[k] * vecs[j][k]).sum();
            out.set(i, j, s);
        }
    }
    // Symmetrise away rounding.
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (out.get(i, j) + out.get(j, i));
            out.set(i, j, avg);
            out.set(j, i, avg);
        }
    }
    Ok(out)
}

/// Scaling `h_d(t)`: `t^{3/4}` (d = 1), `sqrt(t log t)` (d = 2), `sqrt(t)` (d >= 3).
pub fn h_scaling(d: usize, t: f64) -> Result<f64> {
    match d {
        0 => Err(Error::Domain("dimension must be at least 1".into())),
        1 if t > 0.0 => Ok(t.powf(0.75)),
        2 if t > 1.0 => Ok((t * t.ln()).sqrt()),
        2 => Err(Error::Domain(format!("h_2(t) needs t > 1 so that log t > 0, got {t}"))),
        _ if t > 0.0 => Ok(t.sqrt()),
        _ => Err(Error::Domain(format!("scaling needs t > 0, got {t}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    OneDimensional,
    TwoDimensional,
    Transient,
}

impl Regime {
    pub fn of(d: usize) -> Self {
        match d {
            1 => Regime::OneDimensional,
            2 => Regime::TwoDimensional,
            _ => Regime::Transient,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LimitProcess {
    Brownian,
    /// Fractional Brownian motion with Hurst index 3/4.
    FractionalBrownian,
}

/// Variance prefactor `c_d` with `Var(V^j_1) = c_d A(j, j)`.
///
/// Everything is routed through the rescaled kernel `qhat = q_{k.}`:
/// `c_d = 2 k lim (int qhat)/scale`, so the `k` only cancels numerically in
/// `d >= 2` (`int_0^inf qhat = Gamma_d / k` and `u qhat_u -> 1/(4 pi k)`).
pub fn variance_prefactor(d: usize, k: usize, green: Option<f64>) -> Result<f64> {
    let kf = k as f64;
    match Regime::of(d) {
        // lim N^{-3/2} int_0^N int_0^u qhat = 2 / (3 sqrt(pi k))
        Regime::OneDimensional => Ok(2.0 * kf * (2.0 / (3.0 * (PI * kf).sqrt()))),
        Regime::TwoDimensional => Ok(2.0 * kf * kernels::local_clt_limit_2d(k)),
        Regime::Transient => {
            let gamma = match green {
                Some(g) => g,
                None => kernels::green_constant(d, &QuadratureSpec::default())?,
            };
            Ok(2.0 * kf * (gamma / kf))
        }
    }
}

/// Description of the scaling limit for given `(d, k, p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSpec {
    pub dim: usize,
    pub regime: Regime,
    pub slots: usize,
    pub densities: Vec<f64>,
    pub prefactor: f64,
    pub process: LimitProcess,
}

impl LimitSpec {
    pub fn new(d: usize, params: &ModelParams, green: Option<f64>) -> Result<Self> {
        let regime = Regime::of(d);
        Ok(Self {
            dim: d,
            regime,
            slots: params.slots(),
            densities: params.densities().to_vec(),
            prefactor: variance_prefactor(d, params.slots(), green)?,
            process: if regime == Regime::OneDimensional {
                LimitProcess::FractionalBrownian
            } else {
                LimitProcess::Brownian
            },
        })
    }
}

/// `Cov(V^{j1}_s, V^{j2}_t)` of the scaling limit.
pub fn limit_covariance(
    d: usize,
    params: &ModelParams,
    s: f64,
    t: f64,
    j1: usize,
    j2: usize,
    green: Option<f64>,
) -> Result<f64> {
    check_species(params, j1, j2)?;
    if !(s >= 0.0 && t >= 0.0) {
        return Err(Error::Domain(format!("times must be non-negative, got {s}, {t}")));
    }
    let (s, t) = (s.min(t), s.max(t));
    let a = a_entry(params, j1, j2);
    let c = variance_prefactor(d, params.slots(), green)?;
    Ok(match Regime::of(d) {
        Regime::OneDimensional => c * a * 0.5 * (t.powf(1.5) + s.powf(1.5) - (t - s).powf(1.5)),
        _ => c * a * s,
    })
}

/// Covariance of the Gaussian limit of the initial-state part
/// `N^{-3/4} Phi_0^{tN, j}(psi_0)` in one dimension.
pub fn initial_part_covariance(params: &ModelParams, t1: f64, j1: usize, t2: f64, j2: usize) -> Result<f64> {
    check_species(params, j1, j2)?;
    if !(t1 > 0.0 && t2 > 0.0) {
        return Err(Error::Domain(format!("times must be positive, got {t1}, {t2}")));
    }
    let k = params.slots() as f64;
    let shape = (t1 + t2).powf(1.5) - t1.powf(1.5) - t2.powf(1.5);
    Ok(2.0 * k.sqrt() / (3.0 * PI.sqrt()) * a_entry(params, j1, j2) * shape)
}

/// Which kernel the exact finite-time covariance uses.
#[derive(Debug, Clone, Copy)]
pub enum Geometry<'a> {
    Lattice,
    Torus(&'a Torus),
}

/// Exact `Cov(beta^{j1}_s, beta^{j2}_t) = k A(j1, j2) D(s, t)` under the
/// stationary start.
pub fn exact_occupation_cov(
    d: usize,
    params: &ModelParams,
    s: f64,
    t: f64,
    j1: usize,
    j2: usize,
    geometry: Geometry<'_>,
    spec: &QuadratureSpec,
) -> Result<f64> {
    check_species(params, j1, j2)?;
    let (s, t) = (s.min(t), s.max(t));
    let k = params.slots();
    let integral = match geometry {
        Geometry::Lattice => kernels::occupation_cov_integral(d, k, s, t, spec)?,
        Geometry::Torus(torus) => {
            if torus.dim() != d {
                return Err(Error::Usage(format!(
                    "torus dimension {} does not match d = {d}",
                    torus.dim()
                )));
            }
            TorusKernel::new(torus, k).occupation_cov_integral(s, t)
        }
    };
    Ok(k as f64 * a_entry(params, j1, j2) * integral)
}

fn check_species(params: &ModelParams, j1: usize, j2: usize) -> Result<()> {
    let l = params.species();
    if j1 >= l || j2 >= l {
        return Err(Error::Usage(format!(
            "species indices ({}, {}) out of range 1..={l}",
            j1 + 1,
            j2 + 1
        )));
    }
    Ok(())
}
