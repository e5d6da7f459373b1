//! Adaptive quadrature for the smooth, slowly decaying kernel integrands.
//!
//! The range is cut into dyadic segments `[0,1], [1,2], [2,4], ..` so that
//! each segment sees an integrand varying on the scale of its own length,
//! then each segment runs composite Simpson with doubling panel counts and
//! Richardson acceptance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the infinite-range tail of a return-probability integral is modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailModel {
    /// Leading local-CLT power law only; the split point is pushed out until
    /// the first neglected correction is below tolerance.
    LeadingOrder,
    /// Local-CLT expansion with correction terms in `1/u`; the split point
    /// stays at its configured value unless the next term is too large.
    Corrected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Absolute error target.
    pub tolerance: f64,
    /// Where numerical integration hands over to the analytic tail.
    pub split_point: f64,
    pub tail: TailModel,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            split_point: 100.0,
            tail: TailModel::LeadingOrder,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("quadrature tolerance must be positive".into()));
        }
        if !(self.split_point > 0.0) {
            return Err(Error::InvalidParameter("tail split point must be positive".into()));
        }
        Ok(())
    }
}

/// Relative floor below which absolute targets are meaningless in doubles.
const RELATIVE_FLOOR: f64 = 1e-13;
const MAX_LEVEL: u32 = 22;

/// Dyadic breakpoints covering `[a, b]`.
fn segments(a: f64, b: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut lo = a;
    let mut hi = if a < 1.0 { 1.0 } else { 2.0 * a };
    while lo < b {
        let top = hi.min(b);
        out.push((lo, top));
        lo = top;
        hi = 2.0 * top.max(1.0);
    }
    out
}

/// `int_a^b f` to absolute tolerance `tol` (or relative `1e-13`, whichever is looser).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let segs = segments(a, b);
    let seg_tol = tol / segs.len() as f64;
    let mut total = 0.0;
    for (lo, hi) in segs {
        total += simpson_richardson(&f, lo, hi, seg_tol)?;
    }
    Ok(total)
}

fn simpson_richardson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    // Simpson on n panels = (h/3) [f_ends + 4 odd + 2 even]; doubling keeps all
    // previous nodes, which become the new even nodes.
    let ends = f(a) + f(b);
    let mut n = 2usize;
    let mut odd = f(0.5 * (a + b));
    let mut even = 0.0;
    let mut prev = (b - a) / 6.0 * (ends + 4.0 * odd);
    let mut err = f64::INFINITY;
    for _ in 0..MAX_LEVEL {
        even += odd;
        n *= 2;
        let h = (b - a) / n as f64;
        odd = (0..n / 2).map(|i| f(a + (2 * i + 1) as f64 * h)).sum();
        let cur = h / 3.0 * (ends + 4.0 * odd + 2.0 * even);
        err = (cur - prev).abs() / 15.0;
        if n >= 8 && err <= tol.max(RELATIVE_FLOOR * cur.abs()) {
            return Ok(cur + (cur - prev) / 15.0);
        }
        prev = cur;
    }
    Err(Error::Quadrature {
        tolerance: tol,
        achieved: err,
    })
}

/// Composite Gauss-Legendre (10 nodes per panel) over `panels` equal panels.
/// Used where the integrand is expensive and known to be analytic.
pub fn gauss_legendre<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (&x, &w) in GL10_NODES.iter().zip(&GL10_WEIGHTS) {
            total += w * (f(mid - 0.5 * h * x) + f(mid + 0.5 * h * x));
        }
    }
    0.5 * h * total
}

/// Positive nodes of the 10-point Gauss-Legendre rule on `[-1, 1]`.
pub const GL10_NODES: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
pub const GL10_WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982_0,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];
