//! Event-driven simulation of the stirring process with exact accumulation
//! of the centered occupation times at the origin.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Torus;
use crate::rng::replica_rng;
use crate::state::{sample_stationary, validate_slots, ModelParams, SlotConfig, Validation};
use crate::tracer::{EventLog, SwapEvent};

/// Model time and number of events applied so far.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SimClock {
    pub time: f64,
    pub events: u64,
}

/// Precomputed tables for drawing events: all `edge_count * k^2` slot pairs
/// ring at rate 1, so the superposition rings at that total rate and each
/// ring picks a uniform (edge, m, n).
#[derive(Debug, Clone)]
pub struct Stirrer {
    forward: Vec<u32>,
    dim: u32,
    slots: u64,
    rate: f64,
    pick: Uniform<u64>,
}

impl Stirrer {
    pub fn new(torus: &Torus, slots: usize) -> Self {
        let pairs = (torus.edge_count() * slots * slots) as u64;
        Self {
            forward: torus.forward_table(),
            dim: torus.dim() as u32,
            slots: slots as u64,
            rate: pairs as f64,
            pick: Uniform::new(0, pairs).expect("torus has at least one edge"),
        }
    }

    /// Total event rate `R = edge_count * k^2`.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Holding time and the swapped pair of the next event.
    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, u32, u32, u32, u32) {
        let hold: f64 = Exp1.sample(rng);
        let idx = self.pick.sample(rng);
        let (edge, m, n) = if self.slots == 1 {
            (idx, 0, 0)
        } else {
            let kk = self.slots * self.slots;
            let rem = idx % kk;
            (idx / kk, rem / self.slots, rem % self.slots)
        };
        let edge = edge as usize;
        let x = edge as u32 / self.dim;
        let y = self.forward[edge];
        (hold / self.rate, x, m as u32, y, n as u32)
    }
}

/// Advances `state` by one event.
pub fn step<R: Rng + ?Sized>(
    state: &mut SlotConfig,
    clock: &mut SimClock,
    stirrer: &Stirrer,
    rng: &mut R,
) -> SwapEvent {
    let (dt, x, m, y, n) = stirrer.draw(rng);
    clock.time += dt;
    clock.events += 1;
    let k = state.slots();
    state
        .labels_mut()
        .swap(x as usize * k + m as usize, y as usize * k + n as usize);
    SwapEvent { time: clock.time, x, m, y, n }
}

/// Initial configuration of a replica.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialCondition {
    /// A fresh draw from the product stationary measure.
    Stationary,
    Fixed(SlotConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaSpec {
    pub torus: Torus,
    pub params: ModelParams,
    pub horizon: f64,
    /// Positive checkpoint times; `t_0 = 0` is implicit.
    pub grid: Vec<f64>,
    pub seed: u64,
    pub replica: u64,
    pub initial: InitialCondition,
    pub record_events: bool,
    pub record_snapshots: bool,
}

impl ReplicaSpec {
    pub fn new(torus: Torus, params: ModelParams, horizon: f64, grid: Vec<f64>, seed: u64, replica: u64) -> Self {
        Self {
            torus,
            params,
            horizon,
            grid,
            seed,
            replica,
            initial: InitialCondition::Stationary,
            record_events: false,
            record_snapshots: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.grid.first().is_some_and(|&t| !(t > 0.0)) {
            return Err(Error::InvalidParameter("checkpoint times must be positive".into()));
        }
        if self.grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("checkpoint grid must be strictly increasing".into()));
        }
        if self.grid.last().is_some_and(|&t| t > self.horizon) {
            return Err(Error::InvalidParameter("checkpoint grid extends past the horizon".into()));
        }
        if let InitialCondition::Fixed(cfg) = &self.initial {
            if cfg.slots() != self.params.slots() {
                return Err(Error::InvalidParameter("initial configuration has the wrong slot count".into()));
            }
            if let Validation::Violation { reason, .. } = validate_slots(cfg, &self.torus, &self.params) {
                return Err(Error::InvalidParameter(format!("initial configuration: {reason}")));
            }
        }
        Ok(())
    }
}

/// Geometric grid `t_i = T 2^{i - G}` for `i = 0..=G`.
pub fn geometric_grid(horizon: f64, octaves: usize) -> Vec<f64> {
    (0..=octaves)
        .map(|i| horizon * 2f64.powi(i as i32 - octaves as i32))
        .collect()
}

/// Centered occupation times `beta^j_{t_i}` for every tracked species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationPath {
    /// Checkpoint times starting with 0.
    pub times: Vec<f64>,
    /// `values[j][i] = beta^{j}_{t_i}`, species 0-based.
    pub values: Vec<Vec<f64>>,
}

impl OccupationPath {
    pub fn species(&self) -> usize {
        self.values.len()
    }

    pub fn beta(&self, species: usize, checkpoint: usize) -> f64 {
        self.values[species][checkpoint]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaOutput {
    pub replica: u64,
    pub path: OccupationPath,
    pub initial: SlotConfig,
    pub final_state: SlotConfig,
    pub clock: SimClock,
    /// States at every checkpoint (including `t_0 = 0`) when requested.
    pub snapshots: Option<Vec<SlotConfig>>,
    pub events: Option<EventLog>,
}

/// Simulates one replica up to its horizon.
pub fn run_replica(spec: &ReplicaSpec) -> Result<ReplicaOutput> {
    spec.validate()?;
    let mut rng = replica_rng(spec.seed, spec.replica);
    let k = spec.params.slots();
    let l = spec.params.species();
    let mut state = match &spec.initial {
        InitialCondition::Stationary => sample_stationary(&spec.params, &spec.torus, &mut rng),
        InitialCondition::Fixed(cfg) => cfg.clone(),
    };
    let initial = state.clone();
    let stirrer = Stirrer::new(&spec.torus, k);
    let center: Vec<f64> = spec.params.densities().iter().map(|p| k as f64 * p).collect();

    let mut counts = vec![0u32; l + 1];
    let origin_counts = |labels: &[u8], counts: &mut [u32]| {
        counts.iter_mut().for_each(|c| *c = 0);
        for &lab in &labels[..k] {
            counts[lab as usize] += 1;
        }
    };
    origin_counts(state.labels(), &mut counts);

    let mut acc = vec![0.0f64; l];
    let mut last = 0.0f64;
    let mut values: Vec<Vec<f64>> = vec![vec![0.0]; l];
    let mut snapshots = spec.record_snapshots.then(|| vec![state.clone()]);
    let mut events = spec.record_events.then(Vec::new);
    let mut clock = SimClock::default();
    let mut next_cp = 0usize;
    let grid = &spec.grid;

    loop {
        let (dt, x, m, y, n) = stirrer.draw(&mut rng);
        let t_new = clock.time + dt;
        while next_cp < grid.len() && grid[next_cp] < t_new {
            let c = grid[next_cp];
            for j in 0..l {
                values[j].push(acc[j] + (counts[j] as f64 - center[j]) * (c - last));
            }
            if let Some(s) = snapshots.as_mut() {
                s.push(state.clone());
            }
            next_cp += 1;
        }
        if t_new > spec.horizon {
            break;
        }
        let labels = state.labels_mut();
        labels.swap(x as usize * k + m as usize, y as usize * k + n as usize);
        if x == 0 || y == 0 {
            for j in 0..l {
                acc[j] += (counts[j] as f64 - center[j]) * (t_new - last);
            }
            last = t_new;
            origin_counts(labels, &mut counts);
        }
        clock.time = t_new;
        clock.events += 1;
        if let Some(ev) = events.as_mut() {
            ev.push(SwapEvent { time: t_new, x, m, y, n });
        }
    }

    let times = std::iter::once(0.0).chain(grid.iter().copied()).collect();
    Ok(ReplicaOutput {
        replica: spec.replica,
        path: OccupationPath { times, values },
        initial,
        final_state: state,
        clock,
        snapshots,
        events: events.map(|ev| EventLog::from_sorted(k, spec.horizon, ev)),
    })
}

/// Runs independent replicas on `parallelism` worker threads. Output order
/// follows `specs`, and every replica is bit-identical to `run_replica`.
pub fn run_batch(specs: &[ReplicaSpec], parallelism: usize) -> Result<Vec<ReplicaOutput>> {
    let mut seen = std::collections::HashSet::with_capacity(specs.len());
    for s in specs {
        if !seen.insert(s.replica) {
            return Err(Error::Usage(format!("replica index {} appears twice in the batch", s.replica)));
        }
    }
    let tag = |s: &ReplicaSpec| {
        run_replica(s).map_err(|e| Error::Replica {
            index: s.replica,
            source: Box::new(e),
        })
    };
    if parallelism <= 1 {
        return specs.iter().map(tag).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| specs.par_iter().map(tag).collect())
}

/// CSV of occupation paths: `replica,species,t,beta` with 1-based species.
pub fn write_paths_csv<W: Write>(mut out: W, outputs: &[ReplicaOutput]) -> Result<()> {
    writeln!(out, "# schema=v1")?;
    writeln!(out, "replica,species,t,beta")?;
    for o in outputs {
        for (j, row) in o.path.values.iter().enumerate() {
            for (t, b) in o.path.times.iter().zip(row) {
                writeln!(out, "{},{},{},{}", o.replica, j + 1, t, b)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(d: usize, side: usize, k: usize, p: &[f64], horizon: f64) -> ReplicaSpec {
        ReplicaSpec::new(
            Torus::new(d, side).unwrap(),
            ModelParams::new(k, p.to_vec()).unwrap(),
            horizon,
            vec![horizon / 4.0, horizon / 2.0, horizon],
            11,
            0,
        )
    }

    #[test]
    fn mean_holding_time_is_inverse_rate() {
        let torus = Torus::new(1, 3).unwrap();
        let stirrer = Stirrer::new(&torus, 2);
        assert_eq!(stirrer.rate(), 12.0);
        let mut rng = replica_rng(1, 0);
        let n = 200_000;
        let mean: f64 = (0..n).map(|_| stirrer.draw(&mut rng).0).sum::<f64>() / n as f64;
        let se = (1.0 / 12.0) / (n as f64).sqrt();
        assert!((mean - 1.0 / 12.0).abs() < 4.0 * se);
    }

    #[test]
    fn draws_cover_every_pair_uniformly() {
        let torus = Torus::new(2, 3).unwrap();
        let stirrer = Stirrer::new(&torus, 2);
        let mut rng = replica_rng(2, 0);
        let mut hist = std::collections::HashMap::new();
        let n = 180_000;
        for _ in 0..n {
            let (_, x, m, y, nn) = stirrer.draw(&mut rng);
            let c = torus.coords(x as usize).unwrap();
            let cy = torus.coords(y as usize).unwrap();
            let differs = c.iter().zip(&cy).filter(|(a, b)| a != b).count();
            assert_eq!(differs, 1);
            *hist.entry((x, m, y, nn)).or_insert(0usize) += 1;
        }
        assert_eq!(hist.len(), 18 * 4);
        let expect = n as f64 / 72.0;
        for &c in hist.values() {
            assert!((c as f64 - expect).abs() < 5.0 * expect.sqrt());
        }
    }

    #[test]
    fn step_swaps_two_slots() {
        let torus = Torus::new(1, 4).unwrap();
        let mut state = SlotConfig::from_labels(2, vec![0, 1, 2, 2, 1, 0, 2, 2]).unwrap();
        let before = state.clone();
        let mut clock = SimClock::default();
        let stirrer = Stirrer::new(&torus, 2);
        let mut rng = replica_rng(3, 0);
        let ev = step(&mut state, &mut clock, &stirrer, &mut rng);
        assert_eq!(clock.events, 1);
        assert!(clock.time > 0.0 && clock.time == ev.time);
        let a = (ev.x as usize, ev.m as usize);
        let b = (ev.y as usize, ev.n as usize);
        assert_eq!(state.get(a.0, a.1), before.get(b.0, b.1));
        assert_eq!(state.get(b.0, b.1), before.get(a.0, a.1));
    }

    #[test]
    fn frozen_origin_gives_linear_beta() {
        // A single-species torus: every swap exchanges identical labels.
        let mut s = spec(1, 8, 2, &[0.3], 5.0);
        s.initial = InitialCondition::Fixed(SlotConfig::uniform(&s.torus, 2, 0));
        let out = run_replica(&s).unwrap();
        for (i, &t) in out.path.times.iter().enumerate() {
            assert!((out.path.beta(0, i) - (2.0 - 0.6) * t).abs() < 1e-12);
        }
    }

    #[test]
    fn path_starts_at_zero_and_is_lipschitz() {
        let s = spec(2, 5, 2, &[0.3, 0.2], 20.0);
        let out = run_replica(&s).unwrap();
        let p = &out.path;
        assert_eq!(p.times[0], 0.0);
        for (j, &pj) in [0.3f64, 0.2].iter().enumerate() {
            assert_eq!(p.beta(j, 0), 0.0);
            let lip = 2.0 * pj.max(1.0 - pj);
            for i in 1..p.times.len() {
                let dt = p.times[i] - p.times[i - 1];
                assert!((p.beta(j, i) - p.beta(j, i - 1)).abs() <= lip * dt + 1e-12);
            }
        }
    }

    #[test]
    fn replica_is_deterministic() {
        let s = spec(1, 16, 2, &[0.4], 30.0);
        assert_eq!(run_replica(&s).unwrap(), run_replica(&s).unwrap());
        let mut other = s.clone();
        other.replica = 1;
        assert_ne!(run_replica(&s).unwrap().path, run_replica(&other).unwrap().path);
    }

    #[test]
    fn spec_validation() {
        let mut s = spec(1, 8, 1, &[0.5], 10.0);
        s.grid = vec![2.0, 1.0];
        assert!(s.validate().is_err());
        s.grid = vec![1.0, 11.0];
        assert!(s.validate().is_err());
        s.grid = vec![1.0];
        s.horizon = 0.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn geometric_grid_example() {
        assert_eq!(geometric_grid(8.0, 3), vec![1.0, 2.0, 4.0, 8.0]);
    }
}
