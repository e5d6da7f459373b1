//! Exact computations for tiny tori: the full species-count generator,
//! uniformized exponentials, two-time correlations and occupation
//! covariances.
//!
//! States are enumerated site by site. The compositions of `k` cars into
//! `l + 1` labels are listed in lexicographic order of the count vector
//! `(eta(x, 0), .., eta(x, l))`; a configuration's index is the mixed-radix
//! number whose digit for site 0 is the most significant.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::quadrature::{GL10_NODES, GL10_WEIGHTS};
use crate::lattice::Torus;
use crate::state::{ModelParams, SpeciesCounts};

pub const STATE_LIMIT: usize = 100_000;
const POISSON_TAIL: f64 = 1e-12;
/// Largest uniformization rate times time handled in one chunk.
const CHUNK_MEAN: f64 = 50.0;

fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct StateSpace {
    sites: usize,
    labels: usize,
    local: Vec<Vec<u32>>,
    local_index: HashMap<Vec<u32>, usize>,
    size: usize,
}

impl StateSpace {
    pub fn new(torus: &Torus, params: &ModelParams) -> Result<Self> {
        let labels = params.labels();
        let local = compositions(params.slots() as u32, labels);
        let states = (local.len() as u128).checked_pow(torus.site_count() as u32).unwrap_or(u128::MAX);
        if states > STATE_LIMIT as u128 {
            return Err(Error::StateSpaceTooLarge {
                states,
                limit: STATE_LIMIT,
            });
        }
        let local_index = local.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        Ok(Self {
            sites: torus.site_count(),
            labels,
            local,
            local_index,
            size: states as usize,
        })
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    /// Local composition index of every site, site 0 first.
    fn digits(&self, mut index: usize) -> Vec<usize> {
        let base = self.local.len();
        let mut d = vec![0; self.sites];
        for site in (0..self.sites).rev() {
            d[site] = index % base;
            index /= base;
        }
        d
    }

    fn from_digits(&self, digits: &[usize]) -> usize {
        digits.iter().fold(0, |acc, &d| acc * self.local.len() + d)
    }

    pub fn state(&self, index: usize) -> SpeciesCounts {
        let counts = self
            .digits(index)
            .into_iter()
            .flat_map(|d| self.local[d].iter().copied())
            .collect();
        SpeciesCounts::from_counts(self.labels, counts).expect("whole sites")
    }

    pub fn index_of(&self, counts: &SpeciesCounts) -> Result<usize> {
        if counts.labels() != self.labels || counts.site_count() != self.sites {
            return Err(Error::Usage("configuration does not match the state space".into()));
        }
        let digits: Option<Vec<usize>> = (0..self.sites)
            .map(|s| self.local_index.get(counts.site(s)).copied())
            .collect();
        digits
            .map(|d| self.from_digits(&d))
            .ok_or_else(|| Error::Usage("site does not hold exactly k cars".into()))
    }

    /// Restriction of `nu_p` to the torus: product of multinomials.
    pub fn stationary(&self, params: &ModelParams) -> Vec<f64> {
        let k = params.slots();
        let mut probs: Vec<f64> = params.densities().to_vec();
        probs.push(params.untracked_density());
        let local: Vec<f64> = self
            .local
            .iter()
            .map(|c| {
                let mut w = (1..=k).map(|i| i as f64).product::<f64>();
                for (j, &n) in c.iter().enumerate() {
                    w /= (1..=n).map(|i| i as f64).product::<f64>();
                    w *= probs[j].powi(n as i32);
                }
                w
            })
            .collect();
        (0..self.size)
            .map(|i| self.digits(i).into_iter().map(|d| local[d]).product())
            .collect()
    }
}

/// Rate matrix stored by rows; every row lists its off-diagonal entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorMatrix {
    rows: Vec<Vec<(usize, f64)>>,
    diagonal: Vec<f64>,
}

impl GeneratorMatrix {
    pub fn len(&self) -> usize {
        self.diagonal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diagonal.is_empty()
    }

    pub fn rate(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return self.diagonal[a];
        }
        self.rows[a].iter().filter(|e| e.0 == b).map(|e| e.1).sum()
    }

    pub fn exit_rate(&self, a: usize) -> f64 {
        -self.diagonal[a]
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|a| {
                let mut row = vec![0.0; self.len()];
                row[a] = self.diagonal[a];
                for &(b, r) in &self.rows[a] {
                    row[b] += r;
                }
                row
            })
            .collect()
    }

    pub fn max_row_sum(&self) -> f64 {
        (0..self.len())
            .map(|a| (self.diagonal[a] + self.rows[a].iter().map(|e| e.1).sum::<f64>()).abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|pi_a Q(a, b) - pi_b Q(b, a)|`.
    pub fn detailed_balance_defect(&self, pi: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for a in 0..self.len() {
            for &(b, r) in &self.rows[a] {
                worst = worst.max((pi[a] * r - pi[b] * self.rate(b, a)).abs());
            }
        }
        worst
    }

    /// `y = Q x`
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for a in 0..self.len() {
            y[a] = self.diagonal[a] * x[a] + self.rows[a].iter().map(|&(b, r)| r * x[b]).sum::<f64>();
        }
    }

    /// `y = x Q`
    fn apply_left(&self, x: &[f64], y: &mut [f64]) {
        for (a, v) in y.iter_mut().enumerate() {
            *v = self.diagonal[a] * x[a];
        }
        for a in 0..self.len() {
            for &(b, r) in &self.rows[a] {
                y[b] += x[a] * r;
            }
        }
    }
}

/// Generator of the projected dynamics: for each unordered edge `{x, y}`
/// and ordered labels `i != j`, a brand-`i` car at `x` and a brand-`j` car
/// at `y` exchange at rate `eta(x, i) eta(y, j)`.
pub fn build_generator(torus: &Torus, params: &ModelParams) -> Result<(StateSpace, GeneratorMatrix)> {
    let space = StateSpace::new(torus, params)?;
    let labels = params.labels();
    let edges = torus.edges();
    let mut rows = Vec::with_capacity(space.len());
    let mut diagonal = Vec::with_capacity(space.len());
    for a in 0..space.len() {
        let mut digits = space.digits(a);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for &(x, y) in &edges {
            let (cx, cy) = (space.local[digits[x]].clone(), space.local[digits[y]].clone());
            for i in 0..labels {
                for j in 0..labels {
                    let r = cx[i] as f64 * cy[j] as f64;
                    if i == j || r == 0.0 {
                        continue;
                    }
                    let mut nx = cx.clone();
                    let mut ny = cy.clone();
                    nx[i] -= 1;
                    nx[j] += 1;
                    ny[j] -= 1;
                    ny[i] += 1;
                    let (ox, oy) = (digits[x], digits[y]);
                    digits[x] = space.local_index[&nx];
                    digits[y] = space.local_index[&ny];
                    row.push((space.from_digits(&digits), r));
                    digits[x] = ox;
                    digits[y] = oy;
                }
            }
        }
        diagonal.push(-row.iter().map(|e| e.1).sum::<f64>());
        rows.push(row);
    }
    let gen = GeneratorMatrix { rows, diagonal };
    if gen.max_row_sum() > 1e-12 {
        return Err(Error::Domain("generator rows do not sum to zero".into()));
    }
    let defect = gen.detailed_balance_defect(&space.stationary(params));
    if defect > 1e-12 {
        return Err(Error::Domain(format!("detailed balance fails by {defect:e}")));
    }
    Ok((space, gen))
}

/// Whether `expm_action` evolves an observable (`e^{Qt} g`) or a
/// distribution (`mu e^{Qt}`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Observable,
    Distribution,
}

/// Uniformization: `e^{Qt} = sum_n Pois(n; R t) P^n` with `P = I + Q / R`
/// and `R` the largest exit rate; long times are split into chunks with
/// `R dt <= 50`, each truncated once the Poisson tail is below `1e-12`.
pub fn expm_action(gen: &GeneratorMatrix, t: f64, v: &[f64], side: Side) -> Result<Vec<f64>> {
    if !(t >= 0.0) {
        return Err(Error::Usage(format!("time must be non-negative, got {t}")));
    }
    if v.len() != gen.len() {
        return Err(Error::Usage("vector length does not match the generator".into()));
    }
    let rate = (0..gen.len()).map(|a| gen.exit_rate(a)).fold(0.0, f64::max);
    if t == 0.0 || rate == 0.0 {
        return Ok(v.to_vec());
    }
    let chunks = (rate * t / CHUNK_MEAN).ceil().max(1.0) as usize;
    let lambda = rate * t / chunks as f64;
    let tail = POISSON_TAIL / chunks as f64;
    let mut cur = v.to_vec();
    let mut scratch = vec![0.0; v.len()];
    for _ in 0..chunks {
        let mut term = cur.clone();
        let mut weight = (-lambda).exp();
        let mut mass = weight;
        let mut out: Vec<f64> = term.iter().map(|x| weight * x).collect();
        let mut n = 0usize;
        while 1.0 - mass > tail && n < 10_000 {
            n += 1;
            // term <- term P
            match side {
                Side::Observable => gen.apply(&term, &mut scratch),
                Side::Distribution => gen.apply_left(&term, &mut scratch),
            }
            for (x, q) in term.iter_mut().zip(&scratch) {
                *x += q / rate;
            }
            weight *= lambda / n as f64;
            mass += weight;
            for (o, x) in out.iter_mut().zip(&term) {
                *o += weight * x;
            }
        }
        cur = out;
    }
    Ok(cur)
}

/// `x -> eta(O, j)` as a vector over states.
pub fn origin_observable(space: &StateSpace, species: usize) -> Vec<f64> {
    (0..space.len()).map(|a| space.state(a).get(0, species) as f64).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    crate::estimators::compensated_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

/// `Cov_pi(eta_0(O, j1), eta_r(O, j2))` from the generator.
pub fn two_time_correlation(
    space: &StateSpace,
    gen: &GeneratorMatrix,
    pi: &[f64],
    r: f64,
    j1: usize,
    j2: usize,
) -> Result<f64> {
    let f = origin_observable(space, j1);
    let g = origin_observable(space, j2);
    let evolved = expm_action(gen, r, &g, Side::Observable)?;
    let pf: Vec<f64> = pi.iter().zip(&f).map(|(p, x)| p * x).collect();
    Ok(dot(&pf, &evolved) - dot(pi, &f) * dot(pi, &g))
}

/// `int_0^s int_0^t Cov(eta_u(O, j1), eta_v(O, j2)) du dv` with `s <= t`.
///
/// With `C(r)` the stationary two-time covariance (symmetric in the lag by
/// detailed balance) the integral is `H(s) + H(t) - H(t - s)`,
/// `H(a) = int_0^a (a - r) C(r) dr`, each evaluated by composite
/// Gauss-Legendre with panels no wider than `1 / (2 R)`.
pub fn exact_occupation_cov_small(
    space: &StateSpace,
    gen: &GeneratorMatrix,
    pi: &[f64],
    s: f64,
    t: f64,
    j1: usize,
    j2: usize,
) -> Result<f64> {
    if !(0.0 <= s && s <= t) {
        return Err(Error::Usage(format!("need 0 <= s <= t, got s = {s}, t = {t}")));
    }
    let rate = (0..gen.len()).map(|a| gen.exit_rate(a)).fold(0.0, f64::max).max(1.0);
    let h = |a: f64| -> Result<f64> {
        if a == 0.0 {
            return Ok(0.0);
        }
        let panels = (2.0 * rate * a).ceil().max(4.0) as usize;
        let width = a / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * width;
            for (x, w) in GL10_NODES.iter().zip(GL10_WEIGHTS) {
                for r in [mid - 0.5 * width * x, mid + 0.5 * width * x] {
                    total += 0.5 * width * w * (a - r) * two_time_correlation(space, gen, pi, r, j1, j2)?;
                }
            }
        }
        Ok(total)
    };
    Ok(h(s)? + h(t)? - h(t - s)?)
}

/// Exact law at time `t` from an initial distribution.
pub fn law_at_time(gen: &GeneratorMatrix, initial: &[f64], t: f64) -> Result<Vec<f64>> {
    expm_action(gen, t, initial, Side::Distribution)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LawComparison {
    pub samples: usize,
    pub states: usize,
    pub total_variation: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Total-variation distance between the empirical law of `samples` (state
/// indices) and `law`; passes below `4 sqrt(|S| / n)`.
pub fn compare_to_simulation(law: &[f64], samples: &[usize]) -> Result<LawComparison> {
    if samples.is_empty() {
        return Err(Error::Usage("no samples".into()));
    }
    let mut counts = vec![0usize; law.len()];
    for &s in samples {
        *counts
            .get_mut(s)
            .ok_or_else(|| Error::Usage(format!("sample state {s} outside the state space")))? += 1;
    }
    let n = samples.len() as f64;
    let total_variation = 0.5 * law.iter().zip(&counts).map(|(p, &c)| (p - c as f64 / n).abs()).sum::<f64>();
    let threshold = 4.0 * (law.len() as f64 / n).sqrt();
    Ok(LawComparison {
        samples: samples.len(),
        states: law.len(),
        total_variation,
        threshold,
        pass: total_variation < threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::TorusKernel;

    fn setup(k: usize, p: &[f64]) -> (Torus, ModelParams, StateSpace, GeneratorMatrix, Vec<f64>) {
        let torus = Torus::new(1, 3).unwrap();
        let params = ModelParams::new(k, p.to_vec()).unwrap();
        let (space, gen) = build_generator(&torus, &params).unwrap();
        let pi = space.stationary(&params);
        (torus, params, space, gen, pi)
    }

    #[test]
    fn enumeration_round_trips() {
        let (_, _, space, _, pi) = setup(2, &[0.3, 0.2]);
        assert_eq!(space.len(), 216);
        for a in 0..space.len() {
            assert_eq!(space.index_of(&space.state(a)).unwrap(), a);
        }
        assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn exclusion_on_three_sites() {
        let (_, _, space, gen, _) = setup(1, &[0.5]);
        assert_eq!(space.len(), 8);
        // One particle: both neighbouring holes can take it.
        let one = SpeciesCounts::from_counts(2, vec![1, 0, 0, 1, 0, 1]).unwrap();
        assert_eq!(gen.exit_rate(space.index_of(&one).unwrap()), 2.0);
        let two = SpeciesCounts::from_counts(2, vec![1, 0, 1, 0, 0, 1]).unwrap();
        assert_eq!(gen.exit_rate(space.index_of(&two).unwrap()), 2.0);
        let full = SpeciesCounts::from_counts(2, vec![1, 0, 1, 0, 1, 0]).unwrap();
        assert_eq!(gen.exit_rate(space.index_of(&full).unwrap()), 0.0);
    }

    #[test]
    fn single_species_everywhere_is_absorbing() {
        let (_, _, space, gen, _) = setup(2, &[0.3, 0.2]);
        for lab in 0..3 {
            let mut c = vec![0u32; 9];
            for s in 0..3 {
                c[s * 3 + lab] = 2;
            }
            let a = space.index_of(&SpeciesCounts::from_counts(3, c).unwrap()).unwrap();
            assert_eq!(gen.exit_rate(a), 0.0);
        }
    }

    #[test]
    fn generator_structure() {
        for (k, p) in [(1, vec![0.4]), (2, vec![0.4]), (1, vec![0.3, 0.2]), (2, vec![0.3, 0.2])] {
            let (_, _, _, gen, pi) = setup(k, &p);
            assert!(gen.max_row_sum() <= 1e-12);
            assert!(gen.detailed_balance_defect(&pi) <= 1e-12);
            assert!(gen.to_dense().iter().flatten().enumerate().all(|(i, &x)| i % (gen.len() + 1) == 0 || x >= 0.0));
        }
    }

    #[test]
    fn refuses_huge_spaces() {
        let torus = Torus::new(2, 4).unwrap();
        let params = ModelParams::new(2, vec![0.3, 0.2]).unwrap();
        assert!(matches!(
            build_generator(&torus, &params),
            Err(Error::StateSpaceTooLarge { .. })
        ));
        assert!(Torus::new(1, 2).is_err());
    }

    #[test]
    fn uniformization_basics() {
        let (_, _, _, gen, pi) = setup(2, &[0.3, 0.2]);
        let v: Vec<f64> = (0..gen.len()).map(|i| i as f64).collect();
        assert_eq!(expm_action(&gen, 0.0, &v, Side::Observable).unwrap(), v);
        for t in [0.3, 2.0, 10.0] {
            let evolved = law_at_time(&gen, &pi, t).unwrap();
            let diff = evolved.iter().zip(&pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(diff < 1e-10);
            let mut point = vec![0.0; gen.len()];
            point[17] = 1.0;
            let law = law_at_time(&gen, &point, t).unwrap();
            assert!((law.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            assert!(law.iter().all(|&x| x >= -1e-10));
        }
    }

    #[test]
    fn semigroup_property() {
        let (_, _, _, gen, _) = setup(2, &[0.4]);
        let mut point = vec![0.0; gen.len()];
        point[3] = 1.0;
        let once = law_at_time(&gen, &point, 1.7).unwrap();
        let twice = law_at_time(&gen, &law_at_time(&gen, &point, 0.9).unwrap(), 0.8).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn two_point_identity() {
        let torus = Torus::new(1, 3).unwrap();
        for (k, p) in [(1, vec![0.4]), (2, vec![0.4]), (1, vec![0.3, 0.2]), (2, vec![0.3, 0.2])] {
            let (_, params, space, gen, pi) = setup(k, &p);
            let kernel = TorusKernel::new(&torus, k);
            for r in [0.0, 0.1, 0.7, 3.0] {
                for j1 in 0..p.len() {
                    for j2 in 0..p.len() {
                        let got = two_time_correlation(&space, &gen, &pi, r, j1, j2).unwrap();
                        let a = crate::theory::a_entry(&params, j1, j2);
                        let want = k as f64 * a * kernel.origin(r);
                        assert!((got - want).abs() < 1e-8, "k={k} r={r} ({j1},{j2}): {got} vs {want}");
                    }
                }
            }
        }
    }

    #[test]
    fn occupation_covariance_small() {
        let (torus, params, space, gen, pi) = setup(2, &[0.3, 0.2]);
        assert_eq!(exact_occupation_cov_small(&space, &gen, &pi, 0.0, 1.0, 0, 0).unwrap(), 0.0);
        let spec = crate::kernels::QuadratureSpec::default();
        for (s, t, j1, j2) in [(0.5, 1.0, 0, 0), (1.0, 2.0, 0, 1), (2.0, 2.0, 1, 1)] {
            let got = exact_occupation_cov_small(&space, &gen, &pi, s, t, j1, j2).unwrap();
            let want = crate::theory::exact_occupation_cov(
                1,
                &params,
                s,
                t,
                j1,
                j2,
                crate::theory::Geometry::Torus(&torus),
                &spec,
            )
            .unwrap();
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
            if j1 != j2 {
                assert!(got < 0.0);
            }
        }
    }

    #[test]
    fn comparison_threshold() {
        let law = vec![0.5, 0.5];
        let c = compare_to_simulation(&law, &[0, 1, 0, 1]).unwrap();
        assert_eq!(c.total_variation, 0.0);
        assert!((c.threshold - 4.0 * (0.5f64).sqrt()).abs() < 1e-15);
        assert!(compare_to_simulation(&law, &[2]).is_err());
    }
}
