//! Backward tracers by reverse replay of a recorded swap history.
//!
//! A tracer started at slot `(x, m)` at time `t` follows the car parked
//! there back to time 0: walking the history backwards, it moves whenever a
//! swap touches its current slot. Hence `psi_t(x, m) = psi_0(Lambda_t)` holds
//! for every realized history.

use std::collections::HashMap;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::Stirrer;
use crate::error::{Error, Result};
use crate::kernels::TorusKernel;
use crate::lattice::Torus;
use crate::rng::replica_rng;
use crate::state::SlotConfig;

/// One realized swap `psi(x, m) <-> psi(y, n)` at `time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwapEvent {
    pub time: f64,
    pub x: u32,
    pub m: u32,
    pub y: u32,
    pub n: u32,
}

/// Time-ordered swap history on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    slots: usize,
    horizon: f64,
    events: Vec<SwapEvent>,
}

impl EventLog {
    pub fn new(slots: usize, horizon: f64, events: Vec<SwapEvent>) -> Result<Self> {
        if events.windows(2).any(|w| !(w[1].time > w[0].time)) {
            return Err(Error::Usage("event times must be strictly increasing".into()));
        }
        if events.first().is_some_and(|e| !(e.time > 0.0)) || events.last().is_some_and(|e| e.time > horizon) {
            return Err(Error::Usage("event times must lie in (0, horizon]".into()));
        }
        if events.iter().any(|e| e.m as usize >= slots || e.n as usize >= slots) {
            return Err(Error::Usage(format!("event slot out of range 1..={slots}")));
        }
        Ok(Self::from_sorted(slots, horizon, events))
    }

    pub(crate) fn from_sorted(slots: usize, horizon: f64, events: Vec<SwapEvent>) -> Self {
        Self { slots, horizon, events }
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn events(&self) -> &[SwapEvent] {
        &self.events
    }

    /// CSV dump `time,x,m,y,n`; sites are 0-based indices, slots 1-based.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# schema=v1")?;
        writeln!(out, "time,x,m,y,n")?;
        for e in &self.events {
            writeln!(out, "{},{},{},{},{}", e.time, e.x, e.m + 1, e.y, e.n + 1)?;
        }
        Ok(())
    }

    /// Applies the swaps with time `<= t` to `initial`.
    pub fn replay_forward(&self, initial: &SlotConfig, t: f64) -> Result<SlotConfig> {
        if t > self.horizon {
            return Err(Error::Usage(format!("time {t} beyond log horizon {}", self.horizon)));
        }
        let mut state = initial.clone();
        let k = self.slots;
        for e in self.events.iter().take_while(|e| e.time <= t) {
            let a = (e.x as usize, e.m as usize);
            let b = (e.y as usize, e.n as usize);
            let va = state.get(a.0, a.1);
            state.set(a.0, a.1, state.get(b.0, b.1));
            state.set(b.0, b.1, va);
        }
        debug_assert_eq!(state.slots(), k);
        Ok(state)
    }
}

/// Position `Lambda = (Theta, V)` of a tracer: a site and a 0-based slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TracerState {
    pub site: usize,
    pub slot: usize,
}

/// Piecewise-constant backward path: `jumps[i] = (u_i, state)` means the
/// tracer sits at `state` from backward time `u_i` on. `jumps[0]` is the start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracerPath {
    pub jumps: Vec<(f64, TracerState)>,
}

impl TracerPath {
    pub fn start(&self) -> TracerState {
        self.jumps[0].1
    }

    /// Position at backward time `u`.
    pub fn at(&self, u: f64) -> TracerState {
        let i = self.jumps.partition_point(|&(v, _)| v <= u);
        self.jumps[i.max(1) - 1].1
    }

    pub fn end(&self) -> TracerState {
        self.jumps.last().unwrap().1
    }
}

/// Traces every target back from time `t` to time 0.
pub fn trace_back(log: &EventLog, t: f64, targets: &[TracerState]) -> Result<Vec<TracerPath>> {
    if t > log.horizon || t < 0.0 {
        return Err(Error::Usage(format!("trace time {t} outside [0, {}]", log.horizon)));
    }
    let k = log.slots;
    if targets.iter().any(|s| s.slot >= k) {
        return Err(Error::Usage(format!("target slot out of range 1..={k}")));
    }
    // Which tracer currently sits at a given slot index; tracers never share.
    let mut owner: HashMap<usize, usize> = HashMap::with_capacity(targets.len());
    let mut paths: Vec<TracerPath> = Vec::with_capacity(targets.len());
    for (i, s) in targets.iter().enumerate() {
        paths.push(TracerPath { jumps: vec![(0.0, *s)] });
        if owner.insert(s.site * k + s.slot, i).is_some() {
            return Err(Error::Usage("targets must be distinct slots".into()));
        }
    }
    let upto = log.events.partition_point(|e| e.time <= t);
    for e in log.events[..upto].iter().rev() {
        let a = e.x as usize * k + e.m as usize;
        let b = e.y as usize * k + e.n as usize;
        let oa = owner.remove(&a);
        let ob = owner.remove(&b);
        let u = t - e.time;
        if let Some(i) = oa {
            owner.insert(b, i);
            paths[i].jumps.push((u, TracerState { site: e.y as usize, slot: e.n as usize }));
        }
        if let Some(i) = ob {
            owner.insert(a, i);
            paths[i].jumps.push((u, TracerState { site: e.x as usize, slot: e.m as usize }));
        }
    }
    Ok(paths)
}

/// Number of targets violating `psi_t(x, m) = psi_0(Lambda_t)`.
pub fn duality_violations(
    log: &EventLog,
    initial: &SlotConfig,
    at_t: &SlotConfig,
    t: f64,
    targets: &[TracerState],
) -> Result<usize> {
    let paths = trace_back(log, t, targets)?;
    Ok(targets
        .iter()
        .zip(&paths)
        .filter(|(s, p)| {
            let end = p.end();
            at_t.get(s.site, s.slot) != initial.get(end.site, end.slot)
        })
        .count())
}

/// True when no two paths ever occupy the same slot at the same backward time.
pub fn collision_free(paths: &[TracerPath]) -> bool {
    let mut times: Vec<f64> = paths.iter().flat_map(|p| p.jumps.iter().map(|j| j.0)).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut occupied = std::collections::HashSet::with_capacity(paths.len());
    times.iter().all(|&u| {
        occupied.clear();
        paths.iter().all(|p| occupied.insert(p.at(u)))
    })
}

/// Swap history of the stirring process on `[0, horizon]`. Tracers do not
/// depend on labels, so no configuration is simulated.
pub fn simulate_log<R: Rng + ?Sized>(torus: &Torus, slots: usize, horizon: f64, rng: &mut R) -> EventLog {
    let stirrer = Stirrer::new(torus, slots);
    let mut events = Vec::new();
    let mut time = 0.0;
    loop {
        let (dt, x, m, y, n) = stirrer.draw(rng);
        time += dt;
        if time > horizon {
            break;
        }
        events.push(SwapEvent { time, x, m, y, n });
    }
    EventLog::from_sorted(slots, horizon, events)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarginalCheck {
    pub replicas: usize,
    /// Empirical law of `Theta_t` over torus sites.
    pub empirical: Vec<f64>,
    /// `qhat^torus_t(x, .)`.
    pub exact: Vec<f64>,
    pub total_variation: f64,
    /// Empirical law of the slot `V_t`.
    pub slot_empirical: Vec<f64>,
    /// Slot law implied by the joint tracer jumps: it leaves its start at
    /// rate `2 d k` and every jump lands on a uniform slot.
    pub slot_exact: Vec<f64>,
    /// Largest `|empirical - exact| / sigma` over slots.
    pub slot_max_z: f64,
}

/// Empirical law of a single tracer started at `start` at time `t`.
pub fn tracer_marginal_check(
    torus: &Torus,
    slots: usize,
    t: f64,
    start: TracerState,
    replicas: usize,
    seed: u64,
) -> Result<MarginalCheck> {
    if !(t >= 0.0) || replicas == 0 {
        return Err(Error::Usage("need t >= 0 and at least one replica".into()));
    }
    let sites = torus.site_count();
    let mut site_counts = vec![0usize; sites];
    let mut slot_counts = vec![0usize; slots];
    for r in 0..replicas {
        let mut rng = replica_rng(seed, r as u64);
        let log = simulate_log(torus, slots, t, &mut rng);
        let end = trace_back(&log, t, &[start])?[0].end();
        site_counts[end.site] += 1;
        slot_counts[end.slot] += 1;
    }
    let n = replicas as f64;
    let empirical: Vec<f64> = site_counts.iter().map(|&c| c as f64 / n).collect();
    let kernel = TorusKernel::new(torus, slots);
    let exact: Vec<f64> = (0..sites)
        .map(|z| {
            let rel = torus.difference(z, start.site).unwrap();
            kernel.at(t, &torus.coords(rel).unwrap())
        })
        .collect();
    let total_variation = 0.5 * empirical.iter().zip(&exact).map(|(a, b)| (a - b).abs()).sum::<f64>();
    let stay = (-2.0 * torus.dim() as f64 * slots as f64 * t).exp();
    let slot_exact: Vec<f64> = (0..slots)
        .map(|s| (1.0 - stay) / slots as f64 + if s == start.slot { stay } else { 0.0 })
        .collect();
    let slot_empirical: Vec<f64> = slot_counts.iter().map(|&c| c as f64 / n).collect();
    let slot_max_z = slot_empirical
        .iter()
        .zip(&slot_exact)
        .map(|(e, p)| {
            let sd = (p * (1.0 - p) / n).sqrt();
            if sd > 0.0 {
                (e - p).abs() / sd
            } else if (e - p).abs() > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    Ok(MarginalCheck {
        replicas,
        empirical,
        exact,
        total_variation,
        slot_empirical,
        slot_exact,
        slot_max_z,
    })
}

/// Monte Carlo probability with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub replicas: usize,
}

impl Estimate {
    fn from_indicators(hits: usize, n: usize) -> Self {
        let p = hits as f64 / n as f64;
        Self {
            value: p,
            se: (p * (1.0 - p) / n as f64).sqrt(),
            replicas: n,
        }
    }
}

/// Estimates `P(Lambda^{t2, z, n}_{t2} = Lambda^{t1, x, m}_{t1})`: the two
/// cars seen at `(x, m)` at `t1` and at `(z, n)` at `t2` are the same car.
pub fn collision_probability(
    torus: &Torus,
    slots: usize,
    t1: f64,
    first: TracerState,
    t2: f64,
    second: TracerState,
    replicas: usize,
    seed: u64,
) -> Result<Estimate> {
    if !(0.0 <= t1 && t1 <= t2) || replicas == 0 {
        return Err(Error::Usage("need 0 <= t1 <= t2 and at least one replica".into()));
    }
    let mut hits = 0;
    for r in 0..replicas {
        let mut rng = replica_rng(seed, r as u64);
        let log = simulate_log(torus, slots, t2, &mut rng);
        let a = trace_back(&log, t1, &[first])?[0].end();
        let b = trace_back(&log, t2, &[second])?[0].end();
        hits += usize::from(a == b);
    }
    Ok(Estimate::from_indicators(hits, replicas))
}

/// Paired estimate of `P(a -> b) - P(b -> a)` for tracers run to time `u`.
pub fn symmetry_check(
    torus: &Torus,
    slots: usize,
    u: f64,
    a: TracerState,
    b: TracerState,
    replicas: usize,
    seed: u64,
) -> Result<(Estimate, Estimate, Estimate)> {
    let mut ab = 0usize;
    let mut ba = 0usize;
    let mut diff = crate::estimators::Moments::default();
    for r in 0..replicas {
        let mut rng = replica_rng(seed, r as u64);
        let log = simulate_log(torus, slots, u, &mut rng);
        let paths = trace_back(&log, u, &[a, b])?;
        let hit_ab = paths[0].end() == b;
        let hit_ba = paths[1].end() == a;
        ab += usize::from(hit_ab);
        ba += usize::from(hit_ba);
        diff.push(f64::from(u8::from(hit_ab)) - f64::from(u8::from(hit_ba)));
    }
    let d = Estimate {
        value: diff.mean(),
        se: diff.standard_error(),
        replicas,
    };
    Ok((Estimate::from_indicators(ab, replicas), Estimate::from_indicators(ba, replicas), d))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(site: usize, slot: usize) -> TracerState {
        TracerState { site, slot }
    }

    #[test]
    fn empty_log_keeps_tracer_in_place() {
        let log = EventLog::new(2, 5.0, vec![]).unwrap();
        let p = trace_back(&log, 5.0, &[ts(3, 1)]).unwrap();
        assert_eq!(p[0].jumps, vec![(0.0, ts(3, 1))]);
        assert_eq!(p[0].at(4.9), ts(3, 1));
    }

    #[test]
    fn single_swap() {
        let ev = SwapEvent { time: 1.0, x: 2, m: 0, y: 3, n: 1 };
        let log = EventLog::new(2, 4.0, vec![ev]).unwrap();
        let p = &trace_back(&log, 3.0, &[ts(2, 0)]).unwrap()[0];
        assert_eq!(p.at(1.999), ts(2, 0));
        assert_eq!(p.at(2.0), ts(3, 1));
        assert_eq!(p.end(), ts(3, 1));
        // Before the swap happened nothing moves.
        let p = &trace_back(&log, 0.5, &[ts(2, 0)]).unwrap()[0];
        assert_eq!(p.end(), ts(2, 0));
    }

    #[test]
    fn rejects_bad_logs_and_times() {
        let e = |time| SwapEvent { time, x: 0, m: 0, y: 1, n: 0 };
        assert!(EventLog::new(1, 3.0, vec![e(2.0), e(1.0)]).is_err());
        assert!(EventLog::new(1, 1.5, vec![e(1.0), e(2.0)]).is_err());
        let log = EventLog::new(1, 3.0, vec![e(1.0)]).unwrap();
        assert!(matches!(trace_back(&log, 3.5, &[ts(0, 0)]), Err(Error::Usage(_))));
    }

    #[test]
    fn same_slot_same_time_collides_surely() {
        let torus = Torus::new(1, 8).unwrap();
        let est = collision_probability(&torus, 2, 1.0, ts(0, 0), 1.0, ts(0, 0), 50, 1).unwrap();
        assert_eq!(est.value, 1.0);
        let est = collision_probability(&torus, 2, 1.0, ts(0, 0), 1.0, ts(0, 1), 200, 1).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn zero_time_marginal_is_point_mass() {
        let torus = Torus::new(1, 8).unwrap();
        let m = tracer_marginal_check(&torus, 2, 0.0, ts(3, 1), 20, 1).unwrap();
        assert_eq!(m.empirical[3], 1.0);
        assert!(m.total_variation < 1e-12);
        assert_eq!(m.slot_empirical[1], 1.0);
    }

    #[test]
    fn csv_dump_has_schema_header() {
        let ev = SwapEvent { time: 0.5, x: 1, m: 0, y: 2, n: 1 };
        let log = EventLog::new(2, 1.0, vec![ev]).unwrap();
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# schema=v1\ntime,x,m,y,n\n0.5,1,1,2,2\n");
    }
}
