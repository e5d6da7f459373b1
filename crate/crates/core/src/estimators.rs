//! Replica-ensemble statistics: covariances with jackknife errors, Hurst
//! slope fits, normality diagnostics and the martingale drift check.

use std::io::Write;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::dynamics::{OccupationPath, ReplicaOutput};
use crate::error::{Error, Result};
use crate::kernels::TorusKernel;
use crate::lattice::Torus;
use crate::state::ModelParams;

pub const MIN_ENSEMBLE: usize = 30;
pub const MIN_NORMALITY: usize = 200;

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut s = CompensatedSum::default();
    xs.into_iter().for_each(|x| s.add(x));
    s.value()
}

/// Running mean and variance from compensated sums of shifted values.
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    n: usize,
    shift: f64,
    s1: CompensatedSum,
    s2: CompensatedSum,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        if self.n == 0 {
            self.shift = x;
        }
        let y = x - self.shift;
        self.n += 1;
        self.s1.add(y);
        self.s2.add(y * y);
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.shift + self.s1.value() / self.n as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        let n = self.n as f64;
        let m = self.s1.value() / n;
        ((self.s2.value() - n * m * m) / (n - 1.0)).max(0.0)
    }

    pub fn standard_error(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }
}

/// Mean and standard error of a sample.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let mut m = Moments::default();
    xs.iter().for_each(|&x| m.push(x));
    (m.mean(), m.standard_error())
}

/// Unbiased sample covariance and its leave-one-out jackknife standard error.
pub fn covariance_with_se(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let n = xs.len();
    if ys.len() != n {
        return Err(Error::Usage("covariance needs samples of equal length".into()));
    }
    if n < 3 {
        return Err(Error::Usage("jackknife covariance needs at least 3 replicas".into()));
    }
    let nf = n as f64;
    let mx = compensated_sum(xs.iter().copied()) / nf;
    let my = compensated_sum(ys.iter().copied()) / nf;
    let prods: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let s = compensated_sum(prods.iter().copied());
    let cov = s / (nf - 1.0);
    // Dropping replica i leaves a centered cross-product sum S - n/(n-1) a_i b_i.
    let loo: Vec<f64> = prods.iter().map(|ab| (s - nf / (nf - 1.0) * ab) / (nf - 2.0)).collect();
    let loo_mean = compensated_sum(loo.iter().copied()) / nf;
    let ss = compensated_sum(loo.iter().map(|c| (c - loo_mean).powi(2)));
    Ok((cov, ((nf - 1.0) / nf * ss).sqrt()))
}

/// Per-checkpoint means and covariance matrices of `beta / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub species: usize,
    pub replicas: usize,
    pub scale: f64,
    /// `mean[i][j]`
    pub mean: Vec<Vec<f64>>,
    /// `cov[i][j1][j2]`
    pub cov: Vec<Vec<Vec<f64>>>,
    pub se: Vec<Vec<Vec<f64>>>,
    /// Every replica identical at some checkpoint beyond `t = 0`: errors are
    /// meaningless there.
    pub degenerate: bool,
}

impl EnsembleStats {
    /// CSV rows `t,j1,j2,cov,se,n_replicas` (1-based species, `j1 <= j2`).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# schema=v1")?;
        writeln!(out, "t,j1,j2,cov,se,n_replicas")?;
        for (i, t) in self.times.iter().enumerate() {
            for j1 in 0..self.species {
                for j2 in j1..self.species {
                    writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        t,
                        j1 + 1,
                        j2 + 1,
                        self.cov[i][j1][j2],
                        self.se[i][j1][j2],
                        self.replicas
                    )?;
                }
            }
        }
        Ok(())
    }
}

fn check_ensemble(paths: &[&OccupationPath], min: usize) -> Result<()> {
    if paths.len() < min {
        return Err(Error::Usage(format!("need at least {min} replicas, got {}", paths.len())));
    }
    let first = paths[0];
    if paths
        .iter()
        .any(|p| p.times != first.times || p.species() != first.species())
    {
        return Err(Error::Usage("replicas were recorded on different checkpoint grids".into()));
    }
    Ok(())
}

/// Sample covariances of `beta / scale` at every checkpoint.
pub fn ensemble_covariance(paths: &[&OccupationPath], scale: f64) -> Result<EnsembleStats> {
    check_ensemble(paths, MIN_ENSEMBLE)?;
    if !(scale > 0.0) {
        return Err(Error::Usage(format!("scale must be positive, got {scale}")));
    }
    let times = paths[0].times.clone();
    let l = paths[0].species();
    let column = |j: usize, i: usize| -> Vec<f64> { paths.iter().map(|p| p.beta(j, i) / scale).collect() };
    let mut mean = Vec::with_capacity(times.len());
    let mut cov = Vec::with_capacity(times.len());
    let mut se = Vec::with_capacity(times.len());
    let mut degenerate = false;
    for i in 0..times.len() {
        let cols: Vec<Vec<f64>> = (0..l).map(|j| column(j, i)).collect();
        mean.push(cols.iter().map(|c| mean_se(c).0).collect());
        let mut c = vec![vec![0.0; l]; l];
        let mut e = vec![vec![0.0; l]; l];
        for j1 in 0..l {
            for j2 in j1..l {
                let (v, s) = covariance_with_se(&cols[j1], &cols[j2])?;
                c[j1][j2] = v;
                c[j2][j1] = v;
                e[j1][j2] = s;
                e[j2][j1] = s;
            }
        }
        if i > 0 && (0..l).any(|j| e[j][j] == 0.0) {
            degenerate = true;
        }
        cov.push(c);
        se.push(e);
    }
    Ok(EnsembleStats {
        times,
        species: l,
        replicas: paths.len(),
        scale,
        mean,
        cov,
        se,
        degenerate,
    })
}

/// `Cov(beta^{j1}_{t_{i1}}, beta^{j2}_{t_{i2}})` with its jackknife error.
pub fn cross_covariance(paths: &[&OccupationPath], i1: usize, j1: usize, i2: usize, j2: usize) -> Result<(f64, f64)> {
    check_ensemble(paths, 3)?;
    let xs: Vec<f64> = paths.iter().map(|p| p.beta(j1, i1)).collect();
    let ys: Vec<f64> = paths.iter().map(|p| p.beta(j2, i2)).collect();
    covariance_with_se(&xs, &ys)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    /// Replica-jackknife error of the slope, when fitted from replicas.
    pub slope_se: Option<f64>,
    pub points: usize,
    pub dropped: Vec<f64>,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = compensated_sum(xs.iter().copied()) / n;
    let my = compensated_sum(ys.iter().copied()) / n;
    let sxy = compensated_sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)));
    let sxx = compensated_sum(xs.iter().map(|x| (x - mx).powi(2)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss = compensated_sum(xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)));
    (slope, intercept, (rss / n).sqrt())
}

/// Least-squares slope of `log var` against `log t`. Points with a
/// non-positive variance are dropped with a warning.
pub fn hurst_fit(times: &[f64], variances: &[f64]) -> Result<SlopeFit> {
    if times.len() != variances.len() {
        return Err(Error::Usage("times and variances differ in length".into()));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut dropped = Vec::new();
    for (&t, &v) in times.iter().zip(variances) {
        if !(t > 0.0) {
            continue;
        }
        if v > 0.0 {
            xs.push(t.ln());
            ys.push(v.ln());
        } else {
            warn!("dropping checkpoint t = {t}: variance estimate {v} is not positive");
            dropped.push(t);
        }
    }
    if xs.len() < 4 {
        return Err(Error::Domain(format!("only {} usable checkpoints, need 4", xs.len())));
    }
    let span = (xs.last().unwrap() - xs[0]) / std::f64::consts::LN_2;
    if span < 3.0 - 1e-9 {
        return Err(Error::Usage(format!("fit grid spans {span:.2} octaves, need 3")));
    }
    let (slope, intercept, residual_rms) = least_squares(&xs, &ys);
    Ok(SlopeFit {
        slope,
        intercept,
        residual_rms,
        slope_se: None,
        points: xs.len(),
        dropped,
    })
}

/// Hurst fit of `Var(beta^j_t)` across replicas, with a replica-jackknife
/// standard error on the slope.
pub fn hurst_fit_ensemble(paths: &[&OccupationPath], species: usize) -> Result<SlopeFit> {
    check_ensemble(paths, MIN_ENSEMBLE)?;
    let times = &paths[0].times;
    let n = paths.len();
    let nf = n as f64;
    // Per checkpoint: centered values and their sum of squares.
    let mut centered = Vec::with_capacity(times.len());
    let mut ss = Vec::with_capacity(times.len());
    let mut variances = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        let col: Vec<f64> = paths.iter().map(|p| p.beta(species, i)).collect();
        let m = compensated_sum(col.iter().copied()) / nf;
        let c: Vec<f64> = col.iter().map(|x| x - m).collect();
        let s = compensated_sum(c.iter().map(|x| x * x));
        variances.push(s / (nf - 1.0));
        centered.push(c);
        ss.push(s);
    }
    let mut fit = hurst_fit(times, &variances)?;
    let used: Vec<usize> = (0..times.len())
        .filter(|&i| times[i] > 0.0 && variances[i] > 0.0)
        .collect();
    let xs: Vec<f64> = used.iter().map(|&i| times[i].ln()).collect();
    let mut loo = Vec::with_capacity(n);
    for r in 0..n {
        let ys: Vec<f64> = used
            .iter()
            .map(|&i| {
                let a = centered[i][r];
                ((ss[i] - nf / (nf - 1.0) * a * a) / (nf - 2.0)).max(f64::MIN_POSITIVE).ln()
            })
            .collect();
        loo.push(least_squares(&xs, &ys).0);
    }
    let lm = compensated_sum(loo.iter().copied()) / nf;
    let var = (nf - 1.0) / nf * compensated_sum(loo.iter().map(|s| (s - lm).powi(2)));
    fit.slope_se = Some(var.sqrt());
    Ok(fit)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityCheck {
    pub n: usize,
    pub skewness: f64,
    pub skewness_se: f64,
    pub excess_kurtosis: f64,
    pub kurtosis_se: f64,
    pub pass: bool,
}

/// Sample skewness and excess kurtosis with their standard errors under
/// normality; passes when both lie within 4 SE of 0.
pub fn normality_check(values: &[f64]) -> Result<NormalityCheck> {
    let n = values.len();
    if n < MIN_NORMALITY {
        return Err(Error::Usage(format!("normality check needs {MIN_NORMALITY} values, got {n}")));
    }
    let nf = n as f64;
    let m = compensated_sum(values.iter().copied()) / nf;
    let m2 = compensated_sum(values.iter().map(|x| (x - m).powi(2))) / nf;
    let m3 = compensated_sum(values.iter().map(|x| (x - m).powi(3))) / nf;
    let m4 = compensated_sum(values.iter().map(|x| (x - m).powi(4))) / nf;
    if m2 == 0.0 {
        return Err(Error::Domain("normality check on a constant sample".into()));
    }
    let skewness = m3 / m2.powf(1.5);
    let excess_kurtosis = m4 / (m2 * m2) - 3.0;
    let skewness_se = (6.0 * nf * (nf - 1.0) / ((nf - 2.0) * (nf + 1.0) * (nf + 3.0))).sqrt();
    let kurtosis_se = 2.0 * skewness_se * ((nf * nf - 1.0) / ((nf - 3.0) * (nf + 5.0))).sqrt();
    let pass = skewness.abs() <= 4.0 * skewness_se && excess_kurtosis.abs() <= 4.0 * kurtosis_se;
    Ok(NormalityCheck {
        n,
        skewness,
        skewness_se,
        excess_kurtosis,
        kurtosis_se,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftPoint {
    pub s: f64,
    pub species: usize,
    pub mean: f64,
    pub se: f64,
}

/// `M^{t,j}_s = Phi^{t,j}_s(psi_s) - Phi^{t,j}_0(psi_0) + beta^j_s` with
/// `Phi^{t,j}_s(psi) = sum_x (eta(x, j) - k p_j) v^torus(t - s, x)`,
/// evaluated at the checkpoints `s_indices` of runs with snapshots, where
/// checkpoint `t_index` is the fixed time `t`.
pub fn martingale_drift(
    outputs: &[ReplicaOutput],
    torus: &Torus,
    params: &ModelParams,
    t_index: usize,
    s_indices: &[usize],
) -> Result<Vec<DriftPoint>> {
    let first = outputs.first().ok_or_else(|| Error::Usage("no replicas".into()))?;
    if outputs.iter().any(|o| o.snapshots.is_none()) {
        return Err(Error::Usage("martingale drift needs replicas recorded with snapshots".into()));
    }
    let times = &first.path.times;
    if t_index >= times.len() || s_indices.iter().any(|&i| i > t_index) {
        return Err(Error::Usage("checkpoint index out of range or past t".into()));
    }
    let t = times[t_index];
    let k = params.slots();
    let l = params.species();
    let kernel = TorusKernel::new(torus, k);
    let weights_at = |u: f64| -> Vec<f64> {
        if u == 0.0 {
            vec![0.0; torus.site_count()]
        } else {
            kernel.integrated_all_sites(u)
        }
    };
    let w0 = weights_at(t);
    let phi = |cfg: &crate::state::SlotConfig, w: &[f64]| -> Vec<f64> {
        let eta = cfg.project(params.labels());
        (0..l)
            .map(|j| {
                let c = k as f64 * params.density(j);
                compensated_sum((0..torus.site_count()).map(|x| (eta.get(x, j) as f64 - c) * w[x]))
            })
            .collect()
    };
    let phi0: Vec<Vec<f64>> = outputs
        .iter()
        .map(|o| phi(&o.snapshots.as_ref().unwrap()[0], &w0))
        .collect();
    let mut out = Vec::new();
    for &si in s_indices {
        let s = times[si];
        let ws = weights_at(t - s);
        let mut acc = vec![Moments::default(); l];
        for (o, p0) in outputs.iter().zip(&phi0) {
            let snaps = o.snapshots.as_ref().unwrap();
            let cfg = snaps.get(si).ok_or_else(|| Error::Usage("missing snapshot".into()))?;
            let ps = phi(cfg, &ws);
            for j in 0..l {
                acc[j].push(ps[j] - p0[j] + o.path.beta(j, si));
            }
        }
        for (j, m) in acc.iter().enumerate() {
            out.push(DriftPoint {
                s,
                species: j,
                mean: m.mean(),
                se: m.standard_error(),
            });
        }
    }
    Ok(out)
}
