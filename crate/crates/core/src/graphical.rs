//! Marked Poisson clocks and the oriented space-time graph built on them.
//!
//! A space-time point is `(v, 0)` (the root layer) or `(v, T)` for a clock
//! event of `v`. There is an edge `(u, s) → (x, T)` whenever `x` lies in the
//! closed 2-neighborhood of `u` (closed neighborhood in one-step mode) and
//! `T > s`. The edge set is never materialized: reachability only needs the
//! earliest (forward) or latest (backward) reachable time per vertex, because
//! any later point of the same vertex is reachable from an earlier one.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId};
use crate::rng::StreamKey;
use crate::saw::{walk_remnant_saws, walk_saws};

/// Which dependence neighborhood the space-time edges use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// `𝒩_u⁺`: needed for kernels that rewrite neighbors.
    #[default]
    TwoStep,
    /// `𝒩_u`: sufficient for self-updating kernels.
    OneStep,
}

impl Mode {
    /// Closed neighborhood table of `g` for this mode.
    pub fn neighborhoods(self, g: &Graph) -> Vec<Vec<VertexId>> {
        g.vertices()
            .map(|v| match self {
                Mode::TwoStep => g.closed_two_neighborhood(v),
                Mode::OneStep => g.closed_neighborhood(v),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockEvent {
    pub time: f64,
    pub mark: f64,
    pub index: usize,
}

/// Per-vertex marked Poisson events on `(0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockRealization {
    pub horizon: f64,
    pub events: Vec<Vec<ClockEvent>>,
}

fn check_horizon(horizon: f64) -> Result<()> {
    if horizon > 0.0 && horizon.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "horizon must be positive and finite, got {horizon}"
        )))
    }
}

/// Events of one vertex from its own streams.
pub fn vertex_clock(rate: f64, horizon: f64, seed: u64, key: u64) -> Vec<ClockEvent> {
    let mut out = Vec::new();
    if rate == 0.0 {
        return out;
    }
    let base = StreamKey::new(seed).with(key);
    let mut rng = base.with_tag("clock").rng();
    let mut t = 0.0;
    loop {
        // 1 - u lies in (0, 1], so the gap is finite; a zero gap is redrawn to
        // keep times strictly increasing.
        let gap = -(1.0 - rng.random::<f64>()).ln() / rate;
        if gap <= 0.0 || t + gap <= t {
            continue;
        }
        t += gap;
        if t > horizon {
            return out;
        }
        let index = out.len();
        out.push(ClockEvent {
            time: t,
            mark: base.with_tag("mark").with(index as u64).uniform(),
            index,
        });
    }
}

/// Samples clocks with vertex `v` keyed by `v` itself.
pub fn sample_clocks(g: &Graph, rates: &[f64], horizon: f64, seed: u64) -> Result<ClockRealization> {
    let keys: Vec<u64> = g.vertices().map(|v| v as u64).collect();
    sample_clocks_keyed(rates, &keys, horizon, seed)
}

/// Samples clocks with vertex `v` keyed by `keys[v]`, so that realizations on
/// different windows agree on shared keys.
pub fn sample_clocks_keyed(
    rates: &[f64],
    keys: &[u64],
    horizon: f64,
    seed: u64,
) -> Result<ClockRealization> {
    check_horizon(horizon)?;
    if rates.len() != keys.len() {
        return Err(Error::InvalidParameter(format!(
            "{} rates for {} vertices",
            rates.len(),
            keys.len()
        )));
    }
    for (vertex, &rate) in rates.iter().enumerate() {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::InvalidRate { vertex, rate });
        }
    }
    Ok(ClockRealization {
        horizon,
        events: rates
            .iter()
            .zip(keys)
            .map(|(&r, &k)| vertex_clock(r, horizon, seed, k))
            .collect(),
    })
}

impl ClockRealization {
    /// A realization with explicit event times; marks are set to 0.5.
    pub fn from_times(horizon: f64, times: Vec<Vec<f64>>) -> Result<Self> {
        check_horizon(horizon)?;
        let events = times
            .into_iter()
            .map(|ts| {
                ts.into_iter()
                    .enumerate()
                    .map(|(index, time)| ClockEvent {
                        time,
                        mark: 0.5,
                        index,
                    })
                    .collect()
            })
            .collect();
        let r = ClockRealization { horizon, events };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        for (v, evs) in self.events.iter().enumerate() {
            let mut prev = 0.0;
            for (i, e) in evs.iter().enumerate() {
                if !(e.time > prev && e.time <= self.horizon) || e.index != i {
                    return Err(Error::InvalidParameter(format!(
                        "clock of vertex {v}: event {i} at {} is out of order or outside (0, {}]",
                        e.time, self.horizon
                    )));
                }
                if !(0.0..=1.0).contains(&e.mark) {
                    return Err(Error::InvalidParameter(format!(
                        "clock of vertex {v}: mark {} outside [0, 1]",
                        e.mark
                    )));
                }
                prev = e.time;
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.events.len()
    }

    pub fn event_count(&self) -> usize {
        self.events.iter().map(Vec::len).sum()
    }

    pub fn events_of(&self, v: VertexId) -> &[ClockEvent] {
        &self.events[v]
    }

    /// First event of `v` strictly after `s`.
    pub fn first_after(&self, v: VertexId, s: f64) -> Option<&ClockEvent> {
        let evs = &self.events[v];
        evs.get(evs.partition_point(|e| e.time <= s))
    }

    /// Last event of `v` strictly before `s`.
    pub fn last_before(&self, v: VertexId, s: f64) -> Option<&ClockEvent> {
        let evs = &self.events[v];
        evs[..evs.partition_point(|e| e.time < s)].last()
    }

    /// Last event of `v` at or before `s`.
    pub fn last_at_or_before(&self, v: VertexId, s: f64) -> Option<&ClockEvent> {
        let evs = &self.events[v];
        evs[..evs.partition_point(|e| e.time <= s)].last()
    }

    /// All events in `(time, vertex)` order.
    pub fn chronological(&self) -> Vec<(f64, VertexId, usize)> {
        let mut all: Vec<(f64, VertexId, usize)> = self
            .events
            .iter()
            .enumerate()
            .flat_map(|(v, evs)| evs.iter().map(move |e| (e.time, v, e.index)))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t > self.horizon {
            Err(Error::BeyondHorizon {
                t,
                horizon: self.horizon,
            })
        } else {
            Ok(())
        }
    }

    /// CSV dump `vertex,index,time,mark` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "vertex,index,time,mark")?;
        for (v, evs) in self.events.iter().enumerate() {
            for e in evs {
                writeln!(out, "{v},{},{:.16e},{:.16e}", e.index, e.time, e.mark)?;
            }
        }
        Ok(())
    }
}

/// Finite-time key for heaps. Times are non-negative, where the bit pattern
/// of an `f64` orders like the value.
fn time_key(t: f64) -> u64 {
    debug_assert!(t >= 0.0);
    t.to_bits()
}

/// Space-time graph of one clock realization.
#[derive(Debug, Clone)]
pub struct SpaceTime<'a> {
    clocks: &'a ClockRealization,
    nbrs: Vec<Vec<VertexId>>,
    mode: Mode,
}

impl<'a> SpaceTime<'a> {
    pub fn new(g: &Graph, clocks: &'a ClockRealization, mode: Mode) -> Result<Self> {
        if clocks.n() != g.n() {
            return Err(Error::InvalidParameter(format!(
                "clock realization has {} vertices, graph has {}",
                clocks.n(),
                g.n()
            )));
        }
        Ok(SpaceTime {
            clocks,
            nbrs: mode.neighborhoods(g),
            mode,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn clocks(&self) -> &ClockRealization {
        self.clocks
    }

    pub fn dependence(&self, v: VertexId) -> &[VertexId] {
        &self.nbrs[v]
    }

    /// Earliest reachable time per vertex from the roots `(s, 0)`, `s` in
    /// `sources`, considering points at times `≤ t`. Sources get `Some(0.0)`.
    pub fn forward_reach(&self, sources: &[VertexId], t: f64) -> Result<Vec<Option<f64>>> {
        self.clocks.check_time(t)?;
        let n = self.nbrs.len();
        let mut best: Vec<Option<f64>> = vec![None; n];
        let mut heap = BinaryHeap::new();
        for &s in sources {
            if s >= n {
                return Err(Error::UnknownVertex(s));
            }
            best[s] = Some(0.0);
            heap.push(Reverse((time_key(0.0), s)));
        }
        let mut done = vec![false; n];
        while let Some(Reverse((_, u))) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            let at = best[u].expect("queued vertices are labelled");
            for &x in &self.nbrs[u] {
                if done[x] {
                    continue;
                }
                if let Some(e) = self.clocks.first_after(x, at) {
                    if e.time <= t && best[x].is_none_or(|b| e.time < b) {
                        best[x] = Some(e.time);
                        heap.push(Reverse((time_key(e.time), x)));
                    }
                }
            }
        }
        Ok(best)
    }

    /// Latest time per vertex from which a point of that vertex still reaches
    /// an event of some target at time `≤ t`. For a target this is its last
    /// event `≤ t`; every earlier event of the vertex reaches as well.
    /// Also returns the set of vertices whose root `(w, 0)` reaches a target
    /// point (targets included by convention).
    pub fn backward_reach(
        &self,
        targets: &[VertexId],
        t: f64,
    ) -> Result<(Vec<Option<f64>>, Vec<bool>)> {
        self.clocks.check_time(t)?;
        let n = self.nbrs.len();
        let mut latest: Vec<Option<f64>> = vec![None; n];
        let mut rooted = vec![false; n];
        let mut heap = BinaryHeap::new();
        for &z in targets {
            if z >= n {
                return Err(Error::UnknownVertex(z));
            }
            rooted[z] = true;
            if let Some(e) = self.clocks.last_at_or_before(z, t) {
                if latest[z].is_none() {
                    latest[z] = Some(e.time);
                    heap.push((time_key(e.time), z));
                }
            }
        }
        let mut done = vec![false; n];
        while let Some((_, y)) = heap.pop() {
            if done[y] {
                continue;
            }
            done[y] = true;
            let at = latest[y].expect("queued vertices are labelled");
            // neighborhoods are symmetric, so the vertices with an edge into y
            // are exactly nbrs[y]
            for &x in &self.nbrs[y] {
                rooted[x] = true;
                if done[x] {
                    continue;
                }
                if let Some(e) = self.clocks.last_before(x, at) {
                    if latest[x].is_none_or(|b| e.time > b) {
                        latest[x] = Some(e.time);
                        heap.push((time_key(e.time), x));
                    }
                }
            }
        }
        Ok((latest, rooted))
    }

    /// `E_t(w, v)`: a directed path from `(w, 0)` to an event of `v` at time
    /// `≤ t`. `E_t(v, v)` holds by convention.
    pub fn affects(&self, w: VertexId, v: VertexId, t: f64) -> Result<bool> {
        for x in [w, v] {
            if x >= self.nbrs.len() {
                return Err(Error::UnknownVertex(x));
            }
        }
        if w == v {
            self.clocks.check_time(t)?;
            return Ok(true);
        }
        Ok(self.forward_reach(&[w], t)?[v].is_some())
    }

    /// `C_{v,t}`: vertices affecting some member of the dependence
    /// neighborhood of `v` by time `t`, sorted.
    pub fn cluster(&self, v: VertexId, t: f64) -> Result<Vec<VertexId>> {
        if v >= self.nbrs.len() {
            return Err(Error::UnknownVertex(v));
        }
        let (_, rooted) = self.backward_reach(&self.nbrs[v], t)?;
        Ok(rooted
            .iter()
            .enumerate()
            .filter_map(|(w, &r)| r.then_some(w))
            .collect())
    }

    /// Generation of every clock event by one chronological sweep. Events at
    /// equal times are processed as a batch, since no edge joins them.
    pub fn generations(&self) -> GenerationPartition {
        let n = self.nbrs.len();
        let mut gen: Vec<Vec<u32>> = self.clocks.events.iter().map(|e| vec![0; e.len()]).collect();
        let mut last = vec![0u32; n];
        let order = self.clocks.chronological();
        let mut ties = 0;
        let mut i = 0;
        while i < order.len() {
            let mut j = i + 1;
            while j < order.len() && order[j].0 == order[i].0 {
                j += 1;
            }
            if j - i > 1 {
                ties += j - i;
            }
            let batch: Vec<(VertexId, usize, u32)> = order[i..j]
                .iter()
                .map(|&(_, v, idx)| {
                    let g = 1 + self.nbrs[v].iter().map(|&u| last[u]).max().unwrap_or(0);
                    (v, idx, g)
                })
                .collect();
            for (v, idx, g) in batch {
                gen[v][idx] = g;
                last[v] = g;
            }
            i = j;
        }
        GenerationPartition { gen, ties }
    }
}

/// `E_t(w, v)` on `g` with the given clocks.
pub fn affects(
    g: &Graph,
    clocks: &ClockRealization,
    w: VertexId,
    v: VertexId,
    t: f64,
    mode: Mode,
) -> Result<bool> {
    g.check_vertex(w)?;
    SpaceTime::new(g, clocks, mode)?.affects(w, v, t)
}

/// `C_{v,t}` on `g` with the given clocks.
pub fn cluster(
    g: &Graph,
    clocks: &ClockRealization,
    v: VertexId,
    t: f64,
    mode: Mode,
) -> Result<Vec<VertexId>> {
    SpaceTime::new(g, clocks, mode)?.cluster(v, t)
}

pub fn generations(g: &Graph, clocks: &ClockRealization, mode: Mode) -> Result<GenerationPartition> {
    Ok(SpaceTime::new(g, clocks, mode)?.generations())
}

/// Generation numbers of all clock events; the root layer has generation 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationPartition {
    /// `gen[v][i]` is the generation of the `i`-th event of `v`.
    pub gen: Vec<Vec<u32>>,
    /// Number of events that shared their time with another event.
    pub ties: usize,
}

/// A point of the space-time graph. `index: None` is the root `(v, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SpaceTimePoint {
    pub vertex: VertexId,
    pub index: Option<usize>,
}

impl GenerationPartition {
    pub fn of(&self, p: SpaceTimePoint) -> u32 {
        p.index.map_or(0, |i| self.gen[p.vertex][i])
    }

    /// Classes `𝔊_k`, each sorted by point.
    pub fn classes(&self) -> BTreeMap<u32, Vec<SpaceTimePoint>> {
        let mut out: BTreeMap<u32, Vec<SpaceTimePoint>> = BTreeMap::new();
        for (v, gens) in self.gen.iter().enumerate() {
            out.entry(0).or_default().push(SpaceTimePoint {
                vertex: v,
                index: None,
            });
            for (i, &g) in gens.iter().enumerate() {
                out.entry(g).or_default().push(SpaceTimePoint {
                    vertex: v,
                    index: Some(i),
                });
            }
        }
        for class in out.values_mut() {
            class.sort();
        }
        out
    }

    pub fn max_generation(&self) -> u32 {
        self.gen.iter().flatten().copied().max().unwrap_or(0)
    }

    /// Checks the structural claims: the classes cover every point exactly
    /// once, generation 0 is exactly the root layer, and generations strictly
    /// increase along each vertex.
    pub fn check(&self) -> std::result::Result<(), String> {
        let total: usize = self.gen.iter().map(|g| g.len() + 1).sum();
        let classes = self.classes();
        let covered: usize = classes.values().map(Vec::len).sum();
        let mut seen = std::collections::HashSet::new();
        for p in classes.values().flatten() {
            if !seen.insert(*p) {
                return Err(format!("point {p:?} lies in two classes"));
            }
        }
        if covered != total {
            return Err(format!("{covered} points classified out of {total}"));
        }
        if classes
            .get(&0)
            .is_some_and(|c| c.iter().any(|p| p.index.is_some()))
        {
            return Err("a clock event has generation 0".into());
        }
        for (v, gens) in self.gen.iter().enumerate() {
            if gens.windows(2).any(|w| w[0] >= w[1]) {
                return Err(format!("generations not increasing at vertex {v}"));
            }
        }
        Ok(())
    }
}

/// Direction of a direct-affect tail event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `v` directly affects a far vertex: `E'_t(v, w)`.
    Outgoing,
    /// A far vertex directly affects `v`: `E'_t(w, v)`.
    Incoming,
}

/// Vertices `w` with `E'_t(v, w)` (outgoing) or `E'_t(w, v)` (incoming):
/// reachable along a time-ordered path whose vertex sequence is a remnant SAW
/// (two-step mode) or a SAW of `g` (one-step mode). `v` itself is included.
///
/// For a fixed vertex sequence the greedy choice (earliest next event going
/// forward, latest previous event going backward) is optimal, so a
/// depth-first search over walks with greedy times is exact.
pub fn direct_affect_set(
    g: &Graph,
    clocks: &ClockRealization,
    v: VertexId,
    t: f64,
    mode: Mode,
    direction: Direction,
) -> Result<Vec<VertexId>> {
    g.check_vertex(v)?;
    clocks.check_time(t)?;
    let mut hit = vec![false; g.n()];
    hit[v] = true;
    let mut times: Vec<f64> = Vec::new();
    let start = match direction {
        Direction::Outgoing => 0.0,
        Direction::Incoming => match clocks.last_at_or_before(v, t) {
            Some(e) => e.time,
            None => return Ok(vec![v]),
        },
    };
    let mut visit = |walk: &[VertexId]| -> bool {
        // times[i] is the chosen time of walk[i]
        times.truncate(walk.len() - 1);
        if times.is_empty() {
            times.push(start);
        }
        let prev = *times.last().expect("start time pushed");
        let w = *walk.last().expect("walk is non-empty");
        match direction {
            Direction::Outgoing => match clocks.first_after(w, prev) {
                Some(e) if e.time <= t => {
                    hit[w] = true;
                    times.push(e.time);
                    true
                }
                _ => false,
            },
            Direction::Incoming => {
                // the far end only needs its root, which precedes every event
                hit[w] = true;
                match clocks.last_before(w, prev) {
                    Some(e) => {
                        times.push(e.time);
                        true
                    }
                    None => false,
                }
            }
        }
    };
    let max_len = g.n();
    match mode {
        Mode::TwoStep => {
            let plus = g.two_step_graph();
            walk_remnant_saws(g, &plus, v, max_len, &mut visit);
        }
        Mode::OneStep => walk_saws(g, v, max_len, &mut visit),
    }
    Ok(hit
        .iter()
        .enumerate()
        .filter_map(|(w, &h)| h.then_some(w))
        .collect())
}

/// Whether some `w` with `dist(w, v) ≥ n` in the dependence graph (`G⁺` or
/// `G`) is in the direct-affect set by time `t`.
pub fn direct_affect_tail_event(
    g: &Graph,
    clocks: &ClockRealization,
    v: VertexId,
    n: usize,
    t: f64,
    mode: Mode,
    direction: Direction,
) -> Result<bool> {
    let host = match mode {
        Mode::TwoStep => g.two_step_graph(),
        Mode::OneStep => g.clone(),
    };
    let dist = host.distances_from(v)?;
    Ok(direct_affect_set(g, clocks, v, t, mode, direction)?
        .into_iter()
        .any(|w| dist[w].is_some_and(|d| d >= n)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEstimate {
    pub n: usize,
    pub time: f64,
    pub hits: usize,
    pub replicas: usize,
    pub frequency: f64,
}

/// Monte Carlo frequency of the tail event at time `δ n` over an ensemble.
pub fn direct_affect_tail(
    g: &Graph,
    ensemble: &[ClockRealization],
    v: VertexId,
    delta: f64,
    n: usize,
    mode: Mode,
    direction: Direction,
) -> Result<TailEstimate> {
    use rayon::prelude::*;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "delta must be positive, got {delta}"
        )));
    }
    let t = delta * n as f64;
    let hits = ensemble
        .par_iter()
        .map(|c| direct_affect_tail_event(g, c, v, n, t, mode, direction).map(usize::from))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let replicas = ensemble.len();
    Ok(TailEstimate {
        n,
        time: t,
        hits,
        replicas,
        frequency: if replicas == 0 {
            0.0
        } else {
            hits as f64 / replicas as f64
        },
    })
}
