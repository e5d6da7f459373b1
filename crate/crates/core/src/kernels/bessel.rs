//! Exponentially scaled modified Bessel functions `e^{-x} I_n(x)`.
//!
//! The unscaled values overflow long before the heat kernels stop being
//! interesting, so everything here works in scaled form.

use std::f64::consts::PI;

/// Arguments at or below this use the ascending series; above it the
/// asymptotic expansion (small orders) or backward recurrence.
pub const SERIES_LIMIT: f64 = 30.0;

const EPS: f64 = 1e-17;

/// `e^{-x} I_n(x)` for `x >= 0`.
pub fn scaled_bessel_i(n: u32, x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if x <= SERIES_LIMIT {
        series(n, x)
    } else if 4.0 * (n as f64) * (n as f64) <= x {
        asymptotic(n, x)
    } else {
        backward_recurrence(n, x)
    }
}

/// Ascending series `sum_m (x/2)^{2m+n} / (m! (m+n)!)`, scaled by `e^{-x}`.
/// All terms are positive, so the relative error stays at rounding level.
pub(crate) fn series(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    // Leading term e^{-x} (x/2)^n / n!, built multiplicatively to avoid overflow.
    let mut term = (-x).exp();
    for i in 1..=n {
        term *= half / i as f64;
        if term == 0.0 {
            return 0.0;
        }
    }
    let q = half * half;
    let mut sum = term;
    let mut m = 1u32;
    loop {
        term *= q / (m as f64 * (m + n) as f64);
        sum += term;
        if term <= EPS * sum {
            return sum;
        }
        m += 1;
    }
}

/// Hankel expansion `(2 pi x)^{-1/2} sum_k (-1)^k a_k(n) / x^k`.
/// Only used where `4 n^2 <= x`, so the terms decrease until `k ~ 2x` and
/// the smallest term is far below rounding for `x > 30`.
pub(crate) fn asymptotic(n: u32, x: f64) -> f64 {
    let mu = 4.0 * (n as f64) * (n as f64);
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut k = 1.0f64;
    loop {
        let odd = 2.0 * k - 1.0;
        let next = -term * (mu - odd * odd) / (8.0 * k * x);
        if next.abs() >= term.abs() || next.abs() < EPS * sum.abs() {
            if next.abs() < term.abs() {
                sum += next;
            }
            break;
        }
        sum += next;
        term = next;
        k += 1.0;
    }
    sum / (2.0 * PI * x).sqrt()
}

/// Start index for Miller's algorithm: the neglected minimal-solution
/// contamination is about `(I_start / I_n)^2 ~ exp(-(start^2 - n^2) / x)`.
fn miller_start(n: u32, x: f64) -> usize {
    let n = n as f64;
    ((n * n + 50.0 * x).sqrt() + 2.0 * (40.0 * n).sqrt() + 20.0).ceil() as usize
}

/// Miller's backward recurrence `I_{j-1} = I_{j+1} + (2j/x) I_j`, normalised
/// against the asymptotic `e^{-x} I_0(x)`.
pub(crate) fn backward_recurrence(n: u32, x: f64) -> f64 {
    let start = miller_start(n, x);
    let mut above = 0.0f64;
    let mut cur = 1.0f64;
    let mut at_n = 0.0;
    for j in (1..=start).rev() {
        let below = above + (2.0 * j as f64 / x) * cur;
        above = cur;
        cur = below;
        if cur > 1e250 {
            cur *= 1e-250;
            above *= 1e-250;
            at_n *= 1e-250;
        }
        if j - 1 == n as usize {
            at_n = cur;
        }
    }
    at_n / cur * asymptotic(0, x)
}

/// `e^{-x} I_j(x)` for all `0 <= j <= max_order`, normalised with the
/// identity `I_0 + 2 sum_{j>=1} I_j = e^x`.
pub fn scaled_bessel_i_row(max_order: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; max_order + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = miller_start(max_order as u32, x).max(max_order + 2);
    let mut vals = vec![0.0; start + 2];
    vals[start] = 1.0;
    for j in (1..=start).rev() {
        vals[j - 1] = vals[j + 1] + (2.0 * j as f64 / x) * vals[j];
        if vals[j - 1] > 1e250 {
            for v in &mut vals[j - 1..] {
                *v *= 1e-250;
            }
        }
    }
    let norm = vals[0] + 2.0 * vals[1..].iter().sum::<f64>();
    for (o, v) in out.iter_mut().zip(&vals) {
        *o = v / norm;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from 40-digit arbitrary-precision evaluation.
    const REFERENCE: &[(u32, f64, f64)] = &[
        (0, 0.5, 0.64503527044915006811),
        (0, 2.0, 0.30850832255367103953),
        (3, 2.0, 0.028791222639470898409),
        (0, 29.9, 0.073269219046001907707),
        (0, 30.1, 0.073023294131060941854),
        (5, 30.1, 0.047912933274993209026),
        (0, 100.0, 0.039944379299096682648),
        (1, 100.0, 0.039744153025130252674),
        (7, 100.0, 0.031229165630467613268),
        (40, 100.0, 0.000014291436336308280118),
        (0, 2e4, 0.0028209655491591628818),
        (150, 2e4, 0.0016073193534241071222),
        (200, 50.0, 2.0730980771108430743e-116),
        (0, 1e5, 0.0012615678379767767669),
    ];

    #[test]
    fn matches_reference_values() {
        for &(n, x, want) in REFERENCE {
            let got = scaled_bessel_i(n, x);
            assert!(
                ((got - want) / want).abs() < 1e-12,
                "I_{n}({x}): got {got:e}, want {want:e}"
            );
        }
    }

    #[test]
    fn branches_agree_at_switch_point() {
        let x = SERIES_LIMIT;
        for n in 0..12 {
            let s = series(n, x);
            let r = backward_recurrence(n, x);
            assert!((s - r).abs() < 1e-11, "order {n}: series {s} recurrence {r}");
            if 4 * n * n <= 30 {
                let a = asymptotic(n, x);
                assert!((s - a).abs() < 1e-11, "order {n}: series {s} asymptotic {a}");
            }
        }
    }

    #[test]
    fn row_matches_scalar() {
        for &x in &[0.3, 2.0, 29.0, 31.0, 400.0, 5e4] {
            let row = scaled_bessel_i_row(60, x);
            for (n, &r) in row.iter().enumerate() {
                let s = scaled_bessel_i(n as u32, x);
                assert!((r - s).abs() < 1e-14 + 1e-12 * s, "x={x} n={n}: {r} vs {s}");
            }
        }
    }

    #[test]
    fn zero_argument() {
        assert_eq!(scaled_bessel_i(0, 0.0), 1.0);
        assert_eq!(scaled_bessel_i(3, 0.0), 0.0);
    }
}
