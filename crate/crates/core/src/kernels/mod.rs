//! Heat kernels of the continuous-time simple random walk and the integrals
//! built from them.
//!
//! `q_t` is the kernel of the walk jumping to each of its `2d` neighbours at
//! rate 1; `qhat_t = q_{kt}`. In one dimension `q_t(0, n) = e^{-2t} I_n(2t)`
//! and the `d` coordinates are independent, so every infinite-lattice kernel
//! reduces to scaled Bessel functions.

pub mod bessel;
pub mod quadrature;
pub mod torus;

use std::f64::consts::PI;

pub use bessel::{scaled_bessel_i, scaled_bessel_i_row};
pub use quadrature::{integrate, QuadratureSpec, TailModel};
pub use torus::TorusKernel;

use crate::error::{Error, Result};
use crate::lattice::Torus;

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time must be finite and non-negative, got {t}")));
    }
    Ok(())
}

/// One-dimensional factor `e^{-2t} I_{|n|}(2t)`.
pub fn q1d(t: f64, n: i64) -> f64 {
    scaled_bessel_i(n.unsigned_abs() as u32, 2.0 * t)
}

/// `q_t(O, x)` on `Z^d` with `d = x.len()`.
pub fn q(t: f64, x: &[i64]) -> f64 {
    x.iter().map(|&c| q1d(t, c)).product()
}

/// `qhat_t(O, x) = q_{kt}(O, x)`.
pub fn qhat(k: usize, t: f64, x: &[i64]) -> f64 {
    q(k as f64 * t, x)
}

/// `qhat_t(O, O)` in dimension `d`.
pub fn qhat_origin(d: usize, k: usize, t: f64) -> f64 {
    q1d(k as f64 * t, 0).powi(d as i32)
}

/// Torus kernel `qhat^torus_t(O, x)` on `(Z/LZ)^d`.
pub fn q_torus(d: usize, side: usize, k: usize, t: f64, x: &[usize]) -> Result<f64> {
    check_time(t)?;
    let torus = Torus::new(d, side)?;
    if x.len() != d {
        return Err(Error::Usage(format!("expected {d} coordinates, got {}", x.len())));
    }
    Ok(TorusKernel::new(&torus, k).at(t, x))
}

/// `v(t, x) = int_0^t qhat_s(O, x) ds` on `Z^d`.
pub fn v(k: usize, t: f64, x: &[i64], spec: &QuadratureSpec) -> Result<f64> {
    check_time(t)?;
    spec.validate()?;
    integrate(|s| qhat(k, s, x), 0.0, t, spec.tolerance)
}

/// `int_0^a (a - r) qhat_r(O, O) dr`.
pub fn lag_weighted_integral(d: usize, k: usize, a: f64, spec: &QuadratureSpec) -> Result<f64> {
    integrate(|r| (a - r) * qhat_origin(d, k, r), 0.0, a, spec.tolerance)
}

/// `D(s, t) = int_0^s int_0^t qhat_{|u-v|}(O, O) du dv` on `Z^d`, evaluated as
/// `G(s) + G(t) - G(t - s)` with `G` the lag-weighted single integral.
pub fn occupation_cov_integral(d: usize, k: usize, s: f64, t: f64, spec: &QuadratureSpec) -> Result<f64> {
    check_time(s)?;
    check_time(t)?;
    spec.validate()?;
    if s > t {
        return Err(Error::Usage(format!("expected s <= t, got s = {s}, t = {t}")));
    }
    let g = |a: f64| lag_weighted_integral(d, k, a, spec);
    Ok(g(s)? + g(t)? - g(t - s)?)
}

/// Coefficients `b_j` of `sqrt(4 pi u) q_u(0, 0) ~ sum_j b_j u^{-j}` in one dimension.
fn local_clt_coefficients(terms: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(terms);
    let mut b = 1.0;
    out.push(b);
    for j in 1..terms {
        let odd = (2 * j - 1) as f64;
        b *= odd * odd / (j as f64 * 16.0);
        out.push(b);
    }
    out
}

/// `(sum_j b_j u^{-j})^d`, truncated to `terms` coefficients.
fn power_series(base: &[f64], power: usize) -> Vec<f64> {
    let mut out = vec![0.0; base.len()];
    out[0] = 1.0;
    for _ in 0..power {
        let mut next = vec![0.0; base.len()];
        for (i, &a) in out.iter().enumerate() {
            for (j, &b) in base.iter().enumerate().take(base.len() - i) {
                next[i + j] += a * b;
            }
        }
        out = next;
    }
    out
}

/// Analytic tail `int_T^inf q_u(O, O) du` from the local-CLT expansion with
/// `terms` coefficients, and the size of the first neglected term.
pub fn green_tail(d: usize, split: f64, terms: usize) -> (f64, f64) {
    let coeffs = power_series(&local_clt_coefficients(terms + 1), d);
    let half = d as f64 / 2.0;
    let pref = (4.0 * PI).powf(-half);
    let term = |j: usize| pref * coeffs[j] * split.powf(1.0 - half - j as f64) / (half + j as f64 - 1.0);
    let tail: f64 = (0..terms).map(term).sum();
    (tail, term(terms))
}

/// Green constant `Gamma_d = int_0^inf q_u(O, O) du`, finite for `d >= 3`.
pub fn green_constant(d: usize, spec: &QuadratureSpec) -> Result<f64> {
    if d < 3 {
        return Err(Error::Domain(format!(
            "the Green constant diverges in dimension {d}; it requires d >= 3"
        )));
    }
    spec.validate()?;
    let terms = match spec.tail {
        TailModel::LeadingOrder => 1,
        TailModel::Corrected => 4,
    };
    let mut split = spec.split_point;
    let (tail, _) = loop {
        let (tail, err) = green_tail(d, split, terms);
        if err < 0.5 * spec.tolerance {
            break (tail, err);
        }
        split *= 2.0;
        if split > 1e12 {
            return Err(Error::Quadrature {
                tolerance: spec.tolerance,
                achieved: err,
            });
        }
    };
    let body = integrate(|u| q1d(u, 0).powi(d as i32), 0.0, split, 0.5 * spec.tolerance)?;
    Ok(body + tail)
}

/// `lim_u sqrt(u) qhat_u(O, O)` in one dimension.
pub fn local_clt_limit_1d(k: usize) -> f64 {
    1.0 / (4.0 * PI * k as f64).sqrt()
}

/// `lim_u u qhat_u(O, O)` in two dimensions.
pub fn local_clt_limit_2d(k: usize) -> f64 {
    1.0 / (4.0 * PI * k as f64)
}

/// `sup_{u >= 0} u^power qhat_u(O, O)`: `K_1` for `(d, power) = (1, 1/2)` and
/// `C_2` for `(2, 1)`. Log-grid scan over `[1e-3, 1e9]` followed by
/// golden-section refinement around the best grid point.
pub fn sup_weighted_return(d: usize, k: usize, power: f64) -> f64 {
    let f = |u: f64| u.powf(power) * qhat_origin(d, k, u);
    let grid: Vec<f64> = (0..=1200).map(|i| 10f64.powf(-3.0 + 12.0 * i as f64 / 1200.0)).collect();
    let (best, _) = grid
        .iter()
        .enumerate()
        .map(|(i, &u)| (i, f(u)))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    let mut lo = grid[best.saturating_sub(1)];
    let mut hi = grid[(best + 1).min(grid.len() - 1)];
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let a = hi - ratio * (hi - lo);
        let b = lo + ratio * (hi - lo);
        if f(a) > f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    f(0.5 * (lo + hi)).max(f(grid[best]))
}

/// `(k p (1-p) / (N log N)) int_0^inf s e^{-s/N} qhat_s(O, O) ds` in two
/// dimensions: the second moment of the resolvent remainder.
pub fn resolvent_second_moment(k: usize, p: f64, n: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(n >= 2.0) {
        return Err(Error::Domain(format!("resolvent scale N must be at least 2, got {n}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("density must lie in (0, 1), got {p}")));
    }
    spec.validate()?;
    // e^{-s/N} < 1e-30 beyond 70 N.
    let integral = integrate(|s| s * (-s / n).exp() * qhat_origin(2, k, s), 0.0, 70.0 * n, spec.tolerance)?;
    Ok(k as f64 * p * (1.0 - p) / (n * n.ln()) * integral)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    /// Ascending series `sum_m t^{2m} / (m!)^2` times `e^{-2t}`, truncated at `terms`.
    fn q1d_series_oracle(t: f64, terms: usize) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for m in 1..terms {
            term *= t * t / (m as f64 * m as f64);
            sum += term;
        }
        (-2.0 * t).exp() * sum
    }

    #[test]
    fn q1d_examples() {
        assert_eq!(q1d(0.0, 0), 1.0);
        assert_eq!(q1d(0.0, 3), 0.0);
        let a = q1d_series_oracle(1.0, 30);
        let b = q1d_series_oracle(1.0, 50);
        assert!((a - b).abs() < 1e-16);
        assert!((q1d(1.0, 0) - a).abs() < 1e-12);
        assert!((q1d(1.0, 0) - 0.308_508_322_553_671).abs() < 1e-12);
    }

    #[test]
    fn product_structure() {
        for &t in &[0.3, 1.0, 7.5] {
            assert!((q(t, &[0, 0]) - q1d(t, 0).powi(2)).abs() < 1e-15);
            assert_eq!(qhat(1, t, &[1, -2]), q(t, &[1, -2]));
            assert_eq!(q(t, &[3, -1]), q(t, &[-3, 1]));
        }
        // (0.308508322553671)^3
        assert!((q(1.0, &[0, 0, 0]) - 0.029_363_015_417_581).abs() < 1e-14);
    }

    #[test]
    fn infinite_lattice_normalization() {
        for &(d, k, t) in &[(1usize, 1usize, 0.5f64), (1, 2, 40.0), (2, 1, 3.0), (2, 2, 25.0), (3, 1, 2.0)] {
            let kt = k as f64 * t;
            let r = (6.0 * (2.0 * kt).sqrt() + 10.0).ceil() as usize;
            let row = scaled_bessel_i_row(r, 2.0 * kt);
            let axis: f64 = row[0] + 2.0 * row[1..].iter().sum::<f64>();
            let total = axis.powi(d as i32);
            assert!(total > 1.0 - 1e-9 && total < 1.0 + 1e-12, "d={d} k={k} t={t}: {total}");
        }
    }

    #[test]
    fn v_examples() {
        assert_eq!(v(1, 0.0, &[0], &spec()).unwrap(), 0.0);
        let got = v(1, 1.0, &[0], &spec()).unwrap();
        // Independent route: 10-point Gauss-Legendre on 4 panels, halved to 8.
        let gl4 = quadrature::gauss_legendre(|s| q1d_series_oracle(s, 40), 0.0, 1.0, 4);
        let gl8 = quadrature::gauss_legendre(|s| q1d_series_oracle(s, 40), 0.0, 1.0, 8);
        assert!((gl4 - gl8).abs() < 1e-14);
        assert!((got - gl8).abs() < 1e-10, "{got} vs {gl8}");
        assert!((got - 0.523_777_611_802_608_6).abs() < 1e-10);
    }

    #[test]
    fn occupation_integral_examples() {
        assert_eq!(occupation_cov_integral(1, 1, 0.0, 3.0, &spec()).unwrap(), 0.0);
        let d = occupation_cov_integral(1, 1, 1.0, 1.0, &spec()).unwrap();
        let oracle = 2.0 * quadrature::gauss_legendre(|r| (1.0 - r) * q1d_series_oracle(r, 40), 0.0, 1.0, 8);
        assert!((d - oracle).abs() < 1e-10, "{d} vs {oracle}");
        assert!((d - 0.626_613_719_320_499).abs() < 1e-10);
        for &s in &[0.5, 2.0, 10.0] {
            let d = occupation_cov_integral(2, 2, s, s, &spec()).unwrap();
            assert!(d <= s * s && d > 0.0);
        }
        assert!(occupation_cov_integral(1, 1, 2.0, 1.0, &spec()).is_err());
    }

    #[test]
    fn occupation_integral_matches_direct_double_integral() {
        // Brute-force double integral, the inner one split at the kink u = v.
        let (k, s, t) = (2usize, 1.5, 2.5);
        let f = |r: f64| q1d_series_oracle(k as f64 * r, 60);
        let inner = |v: f64| {
            quadrature::gauss_legendre(|u| f(v - u), 0.0, v, 6)
                + quadrature::gauss_legendre(|u| f(u - v), v, t, 6)
        };
        let direct = quadrature::gauss_legendre(inner, 0.0, s, 12);
        let got = occupation_cov_integral(1, k, s, t, &spec()).unwrap();
        assert!((got - direct).abs() < 1e-9, "{got} vs {direct}");
    }

    #[test]
    fn green_constant_three_dimensions() {
        let g = green_constant(3, &spec()).unwrap();
        // Watson's simple-cubic return constant divided by the jump rate 2d = 6.
        let watson = 1.516_386_059_151_978 / 6.0;
        assert!(((g - watson) / watson).abs() < 1e-8, "{g} vs {watson}");
        assert!((g - 0.252_731_009_858_662).abs() < 1e-9);
        let corrected = green_constant(
            3,
            &QuadratureSpec {
                tail: TailModel::Corrected,
                ..spec()
            },
        )
        .unwrap();
        assert!((g - corrected).abs() < 2e-10);
        assert!(green_constant(4, &spec()).unwrap() < g);
        assert!(matches!(green_constant(2, &spec()), Err(Error::Domain(_))));
    }

    #[test]
    fn green_tail_model_sanity() {
        for &split in &[50.0, 100.0, 400.0] {
            let numeric = integrate(|u| q1d(u, 0).powi(3), split, 10.0 * split, 1e-12).unwrap();
            let (full, _) = green_tail(3, split, 1);
            let (beyond, _) = green_tail(3, 10.0 * split, 1);
            let model = full - beyond;
            assert!(numeric < 1.1 * model && numeric > 0.9 * model, "T*={split}: {numeric} vs {model}");
        }
    }

    #[test]
    fn local_clt_limits() {
        for k in [1usize, 2, 4] {
            let u: f64 = 1e4;
            let r1 = u.sqrt() * qhat_origin(1, k, u) / local_clt_limit_1d(k);
            assert!((r1 - 1.0).abs() < 0.01);
            let r2 = u * qhat_origin(2, k, u) / local_clt_limit_2d(k);
            assert!((r2 - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn sup_constants() {
        // Maxima are attained at small u, well above the local-CLT limits;
        // reference values from bounded scalar optimisation in double precision.
        for (k, k1_ref, c2_ref) in [(1usize, 0.331_507_466_745_493_5, 0.109_897_200_508_014_5), (2, 0.234_411_177_749_712_4, 0.054_948_600_254_007_26)] {
            let k1 = sup_weighted_return(1, k, 0.5);
            let c2 = sup_weighted_return(2, k, 1.0);
            assert!((k1 - k1_ref).abs() < 1e-10, "K1 {k1}");
            assert!((c2 - c2_ref).abs() < 1e-10, "C2 {c2}");
            assert!(k1 > local_clt_limit_1d(k) && c2 > local_clt_limit_2d(k));
        }
    }

    #[test]
    fn resolvent_moment_decreases_and_is_bounded() {
        let c2 = sup_weighted_return(2, 1, 1.0);
        let mut last = f64::INFINITY;
        for n in [1e2, 1e3, 1e4] {
            let val = resolvent_second_moment(1, 0.5, n, &spec()).unwrap();
            assert!(val > 0.0 && val < last);
            assert!(val * n.ln() <= 0.25 * c2);
            last = val;
        }
        let a = resolvent_second_moment(2, 0.5, 1e3, &spec()).unwrap();
        let b = resolvent_second_moment(2, 0.3, 1e3, &spec()).unwrap();
        assert!((a / b - 0.25 / 0.21).abs() < 1e-12);
        assert!(resolvent_second_moment(1, 0.5, 1.0, &spec()).is_err());
    }

    #[test]
    fn torus_kernel_examples() {
        let t0 = q_torus(2, 5, 1, 0.0, &[0, 0]).unwrap();
        assert!((t0 - 1.0).abs() < 1e-14);
        assert!(q_torus(2, 5, 1, 0.0, &[1, 0]).unwrap().abs() < 1e-14);
        // k t = 50 L^2: uniform law
        let l = 6usize;
        let t = 50.0 * (l * l) as f64;
        let u = q_torus(2, l, 1, t, &[2, 3]).unwrap();
        assert!((u - 1.0 / 36.0).abs() < 1e-12);
        // Wrapped sum of the infinite-lattice kernel.
        let spectral = q_torus(1, 16, 1, 1.0, &[0]).unwrap();
        let wrapped: f64 = (-2..=2).map(|w| q1d(1.0, 16 * w)).sum();
        assert!((spectral - wrapped).abs() < 1e-12);
    }

    #[test]
    fn torus_normalization_and_wrapped_sums() {
        for &(d, l, k, t) in &[(1usize, 7usize, 1usize, 0.3), (1, 16, 2, 5.0), (2, 5, 2, 1.7), (3, 4, 1, 0.9)] {
            let torus = Torus::new(d, l).unwrap();
            let kern = TorusKernel::new(&torus, k);
            let all = kern.all_sites(t);
            assert!((all.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            // Wrapped-sum route per axis.
            let kt = k as f64 * t;
            let row = kern.axis_row(t);
            for (x, &r) in row.iter().enumerate() {
                let wrapped: f64 = (-40i64..=40).map(|w| q1d(kt, x as i64 + w * l as i64)).sum();
                assert!((r - wrapped).abs() < 1e-12, "d={d} L={l} x={x}: {r} vs {wrapped}");
            }
        }
    }

    #[test]
    fn torus_chapman_kolmogorov() {
        for &(d, l, k) in &[(1usize, 9usize, 2usize), (2, 5, 1), (3, 3, 2)] {
            let torus = Torus::new(d, l).unwrap();
            let kern = TorusKernel::new(&torus, k);
            let (s, t) = (0.4, 1.3);
            let a = kern.all_sites(t);
            let b = kern.all_sites(s);
            let c = kern.all_sites(s + t);
            for x in 0..torus.site_count() {
                let conv: f64 = (0..torus.site_count())
                    .map(|z| a[z] * b[torus.difference(x, z).unwrap()])
                    .sum();
                assert!((conv - c[x]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn torus_integrals() {
        let torus = Torus::new(1, 12).unwrap();
        let kern = TorusKernel::new(&torus, 2);
        let v = kern.integrated_all_sites(3.0);
        assert!((v.iter().sum::<f64>() - 3.0).abs() < 1e-12);
        assert!(kern.integrated_all_sites(0.0).iter().all(|&x| x == 0.0));
        // Spectral double integral against quadrature of the lag-weighted form.
        let (s, t) = (1.2, 2.0);
        let g = |a: f64| quadrature::gauss_legendre(|r| (a - r) * kern.origin(r), 0.0, a, 16);
        let want = g(s) + g(t) - g(t - s);
        assert!((kern.occupation_cov_integral(s, t) - want).abs() < 1e-12);
    }
}
