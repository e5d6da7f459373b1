//! Configurations of the stirring process and the product stationary measure.
//!
//! Species are 0-based internally: labels `0..l` are the tracked species and
//! label `l` is the untracked species `l + 1`. Text and CSV outputs use the
//! 1-based numbering.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Torus;

/// Slots per site `k` and the densities `p_1..p_l` of the tracked species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    slots: usize,
    densities: Vec<f64>,
}

impl ModelParams {
    pub fn new(slots: usize, densities: Vec<f64>) -> Result<Self> {
        if slots == 0 {
            return Err(Error::InvalidParameter("slots per site k must be at least 1".into()));
        }
        if densities.is_empty() {
            return Err(Error::InvalidParameter("at least one tracked species is required".into()));
        }
        if densities.len() > 254 {
            return Err(Error::InvalidParameter("at most 254 tracked species are supported".into()));
        }
        if let Some((j, p)) = densities
            .iter()
            .enumerate()
            .find(|(_, p)| !(p.is_finite() && **p > 0.0))
        {
            return Err(Error::InvalidParameter(format!(
                "density p_{} = {p} must be strictly positive",
                j + 1
            )));
        }
        let total: f64 = densities.iter().sum();
        if total >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "densities must sum to less than 1, got {total}"
            )));
        }
        Ok(Self { slots, densities })
    }

    /// `k`.
    pub fn slots(&self) -> usize {
        self.slots
    }

    /// `l`, the number of tracked species.
    pub fn species(&self) -> usize {
        self.densities.len()
    }

    /// `l + 1`, including the untracked species.
    pub fn labels(&self) -> usize {
        self.densities.len() + 1
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    /// Density of label `j` (0-based), including the untracked one.
    pub fn density(&self, j: usize) -> f64 {
        if j < self.densities.len() {
            self.densities[j]
        } else {
            self.untracked_density()
        }
    }

    pub fn untracked_density(&self) -> f64 {
        1.0 - self.densities.iter().sum::<f64>()
    }
}

/// Labelled-slot configuration: `labels[site * k + slot]` is the species of
/// the car parked in `slot` at `site`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotConfig {
    slots: usize,
    labels: Vec<u8>,
}

impl SlotConfig {
    pub fn from_labels(slots: usize, labels: Vec<u8>) -> Result<Self> {
        if slots == 0 || labels.len() % slots != 0 {
            return Err(Error::Usage(format!(
                "{} labels do not fill whole sites of {slots} slots",
                labels.len()
            )));
        }
        Ok(Self { slots, labels })
    }

    /// Every slot of every site holds `label`.
    pub fn uniform(torus: &Torus, slots: usize, label: u8) -> Self {
        Self {
            slots,
            labels: vec![label; torus.site_count() * slots],
        }
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn site_count(&self) -> usize {
        self.labels.len() / self.slots
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub(crate) fn labels_mut(&mut self) -> &mut [u8] {
        &mut self.labels
    }

    pub fn get(&self, site: usize, slot: usize) -> u8 {
        self.labels[site * self.slots + slot]
    }

    pub fn set(&mut self, site: usize, slot: usize, label: u8) {
        self.labels[site * self.slots + slot] = label;
    }

    /// `eta(x, j) = sum_m psi(x, m, j)`.
    pub fn project(&self, labels: usize) -> SpeciesCounts {
        let sites = self.site_count();
        let mut counts = vec![0u32; sites * labels];
        for (site, chunk) in self.labels.chunks_exact(self.slots).enumerate() {
            for &lab in chunk {
                let lab = lab as usize;
                if lab < labels {
                    counts[site * labels + lab] += 1;
                }
            }
        }
        SpeciesCounts { labels, counts }
    }

    /// Places the cars of `counts` into slots in label order (first slots get
    /// the lowest label). Any slot filling projects back onto `counts`.
    pub fn from_counts(counts: &SpeciesCounts, slots: usize) -> Result<Self> {
        let mut labels = Vec::with_capacity(counts.site_count() * slots);
        for site in 0..counts.site_count() {
            let row = counts.site(site);
            if row.iter().map(|&c| c as usize).sum::<usize>() != slots {
                return Err(Error::Usage(format!("site {site} does not hold exactly {slots} cars")));
            }
            for (lab, &c) in row.iter().enumerate() {
                labels.extend(std::iter::repeat_n(lab as u8, c as usize));
            }
        }
        Ok(Self { slots, labels })
    }
}

/// Species-count configuration: `counts[site * (l + 1) + j] = eta(site, j)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeciesCounts {
    labels: usize,
    counts: Vec<u32>,
}

impl SpeciesCounts {
    pub fn from_counts(labels: usize, counts: Vec<u32>) -> Result<Self> {
        if labels == 0 || counts.len() % labels != 0 {
            return Err(Error::Usage(format!(
                "{} counts do not fill whole sites of {labels} species",
                counts.len()
            )));
        }
        Ok(Self { labels, counts })
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn site_count(&self) -> usize {
        self.counts.len() / self.labels
    }

    pub fn site(&self, site: usize) -> &[u32] {
        &self.counts[site * self.labels..(site + 1) * self.labels]
    }

    pub fn get(&self, site: usize, label: usize) -> u32 {
        self.counts[site * self.labels + label]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.counts
    }

    /// Total number of cars of `label` on the torus.
    pub fn total(&self, label: usize) -> u64 {
        self.counts
            .chunks_exact(self.labels)
            .map(|row| row[label] as u64)
            .sum()
    }

    /// Writes one line per site: the site index followed by the `l + 1` counts.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        let mut line = String::new();
        for site in 0..self.site_count() {
            line.clear();
            write!(line, "{site}").unwrap();
            for c in self.site(site) {
                write!(line, " {c}").unwrap();
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut labels = None;
        let mut counts = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = |what: &str| Error::Usage(format!("line {}: {what}", lineno + 1));
            let site: usize = fields[0].parse().map_err(|_| bad("site index is not an integer"))?;
            let width = fields.len() - 1;
            if width == 0 {
                return Err(bad("missing counts"));
            }
            if *labels.get_or_insert(width) != width {
                return Err(bad("inconsistent number of species"));
            }
            if site != counts.len() / width {
                return Err(bad("sites must be listed in order starting from 0"));
            }
            for f in &fields[1..] {
                counts.push(f.parse().map_err(|_| bad("count is not a non-negative integer"))?);
            }
        }
        let labels = labels.ok_or_else(|| Error::Usage("empty configuration".into()))?;
        Self::from_counts(labels, counts)
    }
}

/// Outcome of [`validate_counts`] / [`validate_slots`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Validation {
    Ok,
    /// `site` is `None` when the configuration does not even have the right shape.
    Violation { site: Option<usize>, reason: String },
}

impl Validation {
    pub fn is_ok(&self) -> bool {
        matches!(self, Validation::Ok)
    }
}

/// Checks the sum-to-`k` property at every site and reports the first offender.
pub fn validate_counts(counts: &SpeciesCounts, torus: &Torus, params: &ModelParams) -> Validation {
    if counts.labels() != params.labels() {
        return Validation::Violation {
            site: None,
            reason: format!("expected {} species columns, found {}", params.labels(), counts.labels()),
        };
    }
    if counts.site_count() != torus.site_count() {
        return Validation::Violation {
            site: None,
            reason: format!(
                "expected {} sites, found {}",
                torus.site_count(),
                counts.site_count()
            ),
        };
    }
    for site in 0..counts.site_count() {
        let sum: u64 = counts.site(site).iter().map(|&c| c as u64).sum();
        if sum != params.slots() as u64 {
            return Validation::Violation {
                site: Some(site),
                reason: format!("site holds {sum} cars instead of {}", params.slots()),
            };
        }
    }
    Validation::Ok
}

pub fn validate_slots(config: &SlotConfig, torus: &Torus, params: &ModelParams) -> Validation {
    if config.slots() != params.slots() || config.labels().len() != torus.site_count() * params.slots() {
        return Validation::Violation {
            site: None,
            reason: format!(
                "expected {} sites of {} slots, found {} labels in slots of {}",
                torus.site_count(),
                params.slots(),
                config.labels().len(),
                config.slots()
            ),
        };
    }
    if let Some(i) = config.labels().iter().position(|&lab| lab as usize >= params.labels()) {
        return Validation::Violation {
            site: Some(i / params.slots()),
            reason: format!("label {} out of range", config.labels()[i]),
        };
    }
    validate_counts(&config.project(params.labels()), torus, params)
}

/// Draws every slot label independently with `P(label = j) = p_j`, the
/// product measure `mu_p`; its projection is `nu_p` with binomial marginals.
pub fn sample_stationary<R: Rng + ?Sized>(params: &ModelParams, torus: &Torus, rng: &mut R) -> SlotConfig {
    let mut cumulative: Vec<f64> = params
        .densities()
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    // Guard against `u` landing above the last tracked threshold by rounding.
    cumulative.push(f64::INFINITY);
    let labels = (0..torus.site_count() * params.slots())
        .map(|_| {
            let u: f64 = rng.random();
            cumulative.iter().position(|&c| u < c).unwrap() as u8
        })
        .collect();
    SlotConfig {
        slots: params.slots(),
        labels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_rng;
    use proptest::prelude::*;

    fn binom(k: u64, n: u64, p: f64) -> f64 {
        let mut c = 1.0;
        for i in 0..n {
            c = c * (k - i) as f64 / (i + 1) as f64;
        }
        c * p.powi(n as i32) * (1.0 - p).powi((k - n) as i32)
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(2, vec![0.3, 0.2]).is_ok());
        assert!(ModelParams::new(2, vec![0.0]).is_err());
        assert!(ModelParams::new(2, vec![0.5, 0.5]).is_err());
        assert!(ModelParams::new(0, vec![0.5]).is_err());
        assert!(ModelParams::new(1, vec![]).is_err());
    }

    #[test]
    fn project_examples() {
        let psi = SlotConfig::from_labels(2, vec![0, 0]).unwrap();
        assert_eq!(psi.project(2).site(0), &[2, 0]);
        let psi = SlotConfig::from_labels(3, vec![0, 1, 1]).unwrap();
        assert_eq!(psi.project(3).site(0), &[1, 2, 0]);
        let psi = SlotConfig::from_labels(1, vec![1, 0, 2]).unwrap();
        let eta = psi.project(3);
        assert_eq!(eta.site(0), &[0, 1, 0]);
        assert_eq!(eta.site(1), &[1, 0, 0]);
        assert_eq!(eta.site(2), &[0, 0, 1]);
    }

    #[test]
    fn validation_reports() {
        let torus = Torus::new(1, 4).unwrap();
        let params = ModelParams::new(2, vec![0.3, 0.2]).unwrap();
        let psi = sample_stationary(&params, &torus, &mut replica_rng(1, 0));
        assert!(validate_slots(&psi, &torus, &params).is_ok());

        let mut counts = psi.project(3).as_slice().to_vec();
        counts[2 * 3] = 0;
        counts[2 * 3 + 1] = 1;
        counts[2 * 3 + 2] = 0;
        let bad = SpeciesCounts::from_counts(3, counts).unwrap();
        assert_eq!(
            validate_counts(&bad, &torus, &params),
            Validation::Violation { site: Some(2), reason: "site holds 1 cars instead of 2".into() }
        );

        let empty = SpeciesCounts::from_counts(3, vec![]).unwrap();
        assert!(matches!(
            validate_counts(&empty, &torus, &params),
            Validation::Violation { site: None, .. }
        ));
    }

    #[test]
    fn text_roundtrip() {
        let torus = Torus::new(2, 3).unwrap();
        let params = ModelParams::new(3, vec![0.3, 0.2]).unwrap();
        let eta = sample_stationary(&params, &torus, &mut replica_rng(3, 0)).project(3);
        let mut buf = Vec::new();
        eta.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("0 "));
        assert_eq!(SpeciesCounts::read_text(buf.as_slice()).unwrap(), eta);
    }

    #[test]
    fn from_counts_projects_back() {
        let counts = SpeciesCounts::from_counts(3, vec![1, 1, 0, 0, 0, 2]).unwrap();
        let psi = SlotConfig::from_counts(&counts, 2).unwrap();
        assert_eq!(psi.project(3), counts);
    }

    #[test]
    fn stationary_marginals_are_binomial() {
        // 10^6 sampled sites, each bin within 4 sigma of the binomial pmf.
        let params = ModelParams::new(2, vec![0.3, 0.2]).unwrap();
        let torus = Torus::new(1, 1_000_000).unwrap();
        let eta = sample_stationary(&params, &torus, &mut replica_rng(11, 0)).project(3);
        let n = torus.site_count() as f64;
        for j in 0..3 {
            let p = params.density(j);
            let mut hist = [0u64; 3];
            for x in 0..torus.site_count() {
                hist[eta.get(x, j) as usize] += 1;
            }
            for (c, &h) in hist.iter().enumerate() {
                let pmf = binom(2, c as u64, p);
                let dev = (h as f64 / n - pmf).abs();
                assert!(dev < 4.0 * (pmf * (1.0 - pmf) / n).sqrt(), "species {j} count {c}: {dev}");
            }
        }
        // Sites are independent: neighbouring counts are uncorrelated.
        let xs: Vec<f64> = (0..torus.site_count()).map(|x| eta.get(x, 0) as f64).collect();
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let cov = xs.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / (n - 1.0);
        let corr = cov / var;
        assert!(corr.abs() < 4.0 / n.sqrt(), "correlation {corr}");
    }

    #[test]
    fn binomial_examples() {
        assert!((binom(2, 1, 0.5) - 0.5).abs() < 1e-15);
        assert!((binom(2, 1, 0.3) - 0.42).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn project_ignores_slot_order(labels in proptest::collection::vec(0u8..3, 12), seed in any::<u64>()) {
            let psi = SlotConfig::from_labels(4, labels.clone()).unwrap();
            let mut shuffled = labels;
            for chunk in shuffled.chunks_mut(4) {
                let r = (seed % 4) as usize;
                chunk.rotate_left(r);
                chunk.reverse();
            }
            let psi2 = SlotConfig::from_labels(4, shuffled).unwrap();
            prop_assert_eq!(psi.project(3), psi2.project(3));
        }
    }
}
