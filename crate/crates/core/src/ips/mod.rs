//! Jump rate kernels and the event-driven construction of the process on top
//! of a clock realization.

mod models;

pub use models::{BirthDeath, Contact, DiscreteSandpile, DivisibleSandpile, ModelSpec, Urn, Voter};

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId, Window};
use crate::graphical::{sample_clocks, ClockRealization, Mode, SpaceTime};
use crate::rng::StreamKey;

/// State of one site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalState {
    Spin(u8),
    Grains(u64),
    Mass(f64),
    Urn { white: u64, black: u64 },
}

/// New local states of the vertices a jump changes.
pub type Patch = Vec<(VertexId, LocalState)>;

#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub patch: Patch,
    pub rate: f64,
}

/// Jump rate kernel `α*_v` of one model, evaluated on full configurations
/// (implementations read only `x` on the closed neighborhood of `v`).
pub trait JumpKernel: Send + Sync {
    fn name(&self) -> &'static str;

    /// Sitewise bound `c_v`, also the clock intensity at `v`.
    fn rate_bound(&self, g: &Graph, v: VertexId) -> f64;

    /// Whether every jump at `v` changes only `x(v)`.
    fn self_updating(&self) -> bool;

    fn validate_state(&self, s: &LocalState) -> Result<()>;

    /// `α*_v(x)`, computed independently of [`JumpKernel::targets`].
    fn total_rate(&self, g: &Graph, v: VertexId, x: &[LocalState]) -> f64;

    /// Targets with positive rates.
    fn targets(&self, g: &Graph, v: VertexId, x: &[LocalState]) -> Vec<Target>;

    /// Finite local state space, if there is one.
    fn finite_domain(&self) -> Option<Vec<LocalState>> {
        None
    }
}

impl<K: JumpKernel + ?Sized> JumpKernel for Box<K> {
    fn name(&self) -> &'static str {
        (**self).name()
    }
    fn rate_bound(&self, g: &Graph, v: VertexId) -> f64 {
        (**self).rate_bound(g, v)
    }
    fn self_updating(&self) -> bool {
        (**self).self_updating()
    }
    fn validate_state(&self, s: &LocalState) -> Result<()> {
        (**self).validate_state(s)
    }
    fn total_rate(&self, g: &Graph, v: VertexId, x: &[LocalState]) -> f64 {
        (**self).total_rate(g, v, x)
    }
    fn targets(&self, g: &Graph, v: VertexId, x: &[LocalState]) -> Vec<Target> {
        (**self).targets(g, v, x)
    }
    fn finite_domain(&self) -> Option<Vec<LocalState>> {
        (**self).finite_domain()
    }
}

static CONTRACT_CHECKS: AtomicU64 = AtomicU64::new(0);

/// Number of local contract checks performed by this process so far. Every
/// check that fails aborts the caller with an error, so a battery that
/// completes with a positive count has had every check pass.
pub fn contract_checks() -> u64 {
    CONTRACT_CHECKS.load(Ordering::Relaxed)
}

const RATE_TOL: f64 = 1e-12;

/// Checks the kernel contract at `(v, x)`: target rates are positive and sum
/// to `α*_v(x)`, `α*_v(x) ≤ c_v`, targets only touch `𝒩_v` (only `v` for a
/// self-updating kernel), and every new local state is valid.
pub fn check_local_contract<K: JumpKernel + ?Sized>(
    kernel: &K,
    g: &Graph,
    v: VertexId,
    x: &[LocalState],
) -> Result<Vec<Target>> {
    CONTRACT_CHECKS.fetch_add(1, Ordering::Relaxed);
    let c = kernel.rate_bound(g, v);
    let total = kernel.total_rate(g, v, x);
    let targets = kernel.targets(g, v, x);
    let sum: f64 = targets.iter().map(|t| t.rate).sum();
    let contract = |detail: String| Error::KernelContract { vertex: v, detail };
    if (sum - total).abs() > RATE_TOL * total.max(1.0) {
        return Err(contract(format!("target rates sum to {sum}, total rate is {total}")));
    }
    if total > c * (1.0 + RATE_TOL) {
        return Err(Error::RateBound {
            vertex: v,
            total,
            bound: c,
        });
    }
    for t in &targets {
        if !(t.rate > 0.0 && t.rate.is_finite()) {
            return Err(contract(format!("target rate {}", t.rate)));
        }
        for (u, s) in &t.patch {
            let allowed = if kernel.self_updating() {
                *u == v
            } else {
                *u == v || g.has_edge(*u, v)
            };
            if !allowed {
                return Err(contract(format!("target changes vertex {u}")));
            }
            kernel.validate_state(s)?;
        }
    }
    Ok(targets)
}

/// One tick of the thinned clock at `v` with mark `mark`.
///
/// The mark seeds a private stream; its first uniform `u` gives `u c_v`,
/// which selects a target by cumulative rate when below `α*_v(x)` and leaves
/// `x` unchanged otherwise. Equal marks give equal outcomes on every window.
pub fn mu_step<K: JumpKernel + ?Sized>(
    kernel: &K,
    g: &Graph,
    v: VertexId,
    x: &[LocalState],
    mark: f64,
) -> Result<Option<Patch>> {
    let c = kernel.rate_bound(g, v);
    if c <= 0.0 {
        return Ok(None);
    }
    let targets = check_local_contract(kernel, g, v, x)?;
    let draw = StreamKey::new(mark.to_bits()).with_tag("mu").uniform() * c;
    let mut acc = 0.0;
    for t in targets {
        acc += t.rate;
        if draw < acc {
            return Ok(Some(t.patch));
        }
    }
    Ok(None)
}

/// Clock intensities `c_v` for every vertex.
pub fn rate_profile<K: JumpKernel + ?Sized>(kernel: &K, g: &Graph) -> Vec<f64> {
    g.vertices().map(|v| kernel.rate_bound(g, v)).collect()
}

/// Clocks with intensities `c_v`, keyed by vertex id.
pub fn model_clocks<K: JumpKernel + ?Sized>(
    kernel: &K,
    g: &Graph,
    horizon: f64,
    seed: u64,
) -> Result<ClockRealization> {
    sample_clocks(g, &rate_profile(kernel, g), horizon, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEvent {
    pub time: f64,
    pub vertex: VertexId,
    /// Index of the clock event at `vertex`.
    pub index: usize,
    pub old: Patch,
    pub new: Patch,
}

/// Piecewise-constant path of the (possibly truncated) process. Only jumps
/// that change the configuration are recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub initial: Vec<LocalState>,
    pub core: Vec<VertexId>,
    pub until: f64,
    pub events: Vec<TrajectoryEvent>,
}

impl Trajectory {
    pub fn state_at(&self, t: f64) -> Vec<LocalState> {
        let mut x = self.initial.clone();
        for e in self.events.iter().take_while(|e| e.time <= t) {
            for &(u, s) in &e.new {
                x[u] = s;
            }
        }
        x
    }

    pub fn final_state(&self) -> Vec<LocalState> {
        self.state_at(f64::INFINITY)
    }

    /// Changes at vertices of `set`, as `(time, vertex, new state)`.
    pub fn restricted_to(&self, set: &[VertexId]) -> Vec<(f64, VertexId, LocalState)> {
        self.events
            .iter()
            .flat_map(|e| {
                e.new
                    .iter()
                    .filter(|(u, _)| set.contains(u))
                    .map(move |&(u, s)| (e.time, u, s))
            })
            .collect()
    }

    /// JSON lines: a header with the initial configuration, then one line per
    /// jump `{"t", "v", "patch"}`.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Header<'a> {
            initial: BTreeMap<VertexId, LocalState>,
            core: &'a [VertexId],
            until: f64,
        }
        #[derive(Serialize)]
        struct Line {
            t: f64,
            v: VertexId,
            patch: BTreeMap<VertexId, LocalState>,
        }
        let header = Header {
            initial: self.initial.iter().copied().enumerate().collect(),
            core: &self.core,
            until: self.until,
        };
        serde_json::to_writer(&mut out, &header)?;
        writeln!(out)?;
        for e in &self.events {
            serde_json::to_writer(
                &mut out,
                &Line {
                    t: e.time,
                    v: e.vertex,
                    patch: e.new.iter().copied().collect(),
                },
            )?;
            writeln!(out)?;
        }
        Ok(())
    }
}

fn check_run_inputs<K: JumpKernel + ?Sized>(
    g: &Graph,
    kernel: &K,
    x0: &[LocalState],
    clocks: &ClockRealization,
    until: f64,
) -> Result<()> {
    if x0.len() != g.n() {
        return Err(Error::InvalidParameter(format!(
            "configuration has {} sites, graph has {}",
            x0.len(),
            g.n()
        )));
    }
    if clocks.n() != g.n() {
        return Err(Error::InvalidParameter(format!(
            "clock realization has {} vertices, graph has {}",
            clocks.n(),
            g.n()
        )));
    }
    if until > clocks.horizon {
        return Err(Error::BeyondHorizon {
            t: until,
            horizon: clocks.horizon,
        });
    }
    for s in x0 {
        kernel.validate_state(s)?;
    }
    Ok(())
}

/// Applies the tick `(time, v, index)`, appending a trajectory event if the
/// configuration changed.
fn apply_tick<K: JumpKernel + ?Sized>(
    kernel: &K,
    g: &Graph,
    window: &Window,
    clocks: &ClockRealization,
    x: &mut [LocalState],
    (time, v, index): (f64, VertexId, usize),
    events: &mut Vec<TrajectoryEvent>,
) -> Result<()> {
    if !window.in_ambient(v) || g.neighbors(v).iter().any(|&u| !window.in_ambient(u)) {
        return Err(Error::InvalidParameter(format!(
            "event at vertex {v} whose neighborhood leaves the window"
        )));
    }
    let mark = clocks.events_of(v)[index].mark;
    if let Some(patch) = mu_step(kernel, g, v, x, mark)? {
        let old: Patch = patch.iter().map(|&(u, _)| (u, x[u])).collect();
        if old != patch {
            for &(u, s) in &patch {
                x[u] = s;
            }
            events.push(TrajectoryEvent {
                time,
                vertex: v,
                index,
                old,
                new: patch,
            });
        }
    }
    Ok(())
}

/// The truncated process `ξ^{W,x}` on `[0, until]`: a chronological sweep over
/// the clock events of core vertices.
pub fn run<K: JumpKernel + ?Sized>(
    g: &Graph,
    window: &Window,
    kernel: &K,
    x0: &[LocalState],
    clocks: &ClockRealization,
    until: f64,
) -> Result<Trajectory> {
    check_run_inputs(g, kernel, x0, clocks, until)?;
    let mut x = x0.to_vec();
    let mut events = Vec::new();
    for tick in clocks.chronological() {
        if tick.0 > until {
            break;
        }
        if window.in_core(tick.1) {
            apply_tick(kernel, g, window, clocks, &mut x, tick, &mut events)?;
        }
    }
    Ok(Trajectory {
        initial: x0.to_vec(),
        core: window.core().to_vec(),
        until,
        events,
    })
}

/// Same process, evaluated generation by generation: all events of generation
/// 1, then 2, and so on, ordered by `(vertex, time)` inside a generation.
/// Generations are computed on the core clocks up to `until`. Two-step mode is
/// valid for every kernel, one-step mode for self-updating ones.
pub fn run_by_generations<K: JumpKernel + ?Sized>(
    g: &Graph,
    window: &Window,
    kernel: &K,
    x0: &[LocalState],
    clocks: &ClockRealization,
    until: f64,
    mode: Mode,
) -> Result<Trajectory> {
    check_run_inputs(g, kernel, x0, clocks, until)?;
    if mode == Mode::OneStep && !kernel.self_updating() {
        return Err(Error::InvalidParameter(format!(
            "one-step generations need a self-updating kernel, {} is not",
            kernel.name()
        )));
    }
    let restricted = ClockRealization {
        horizon: clocks.horizon,
        events: clocks
            .events
            .iter()
            .enumerate()
            .map(|(v, evs)| {
                if window.in_core(v) {
                    evs.iter().copied().take_while(|e| e.time <= until).collect()
                } else {
                    Vec::new()
                }
            })
            .collect(),
    };
    let part = SpaceTime::new(g, &restricted, mode)?.generations();
    let mut order: Vec<(u32, VertexId, f64, usize)> = restricted
        .events
        .iter()
        .enumerate()
        .flat_map(|(v, evs)| {
            let part = &part;
            evs.iter().map(move |e| (part.gen[v][e.index], v, e.time, e.index))
        })
        .collect();
    order.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.total_cmp(&b.2)));
    let mut x = x0.to_vec();
    let mut events = Vec::new();
    for (_, v, time, index) in order {
        apply_tick(kernel, g, window, clocks, &mut x, (time, v, index), &mut events)?;
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.vertex.cmp(&b.vertex)));
    Ok(Trajectory {
        initial: x0.to_vec(),
        core: window.core().to_vec(),
        until,
        events,
    })
}

/// Function of the configuration that depends only on the sites in `base`.
/// The closure receives the states on `base`, in order.
#[derive(Clone)]
pub struct Observable {
    base: Vec<VertexId>,
    f: Arc<dyn Fn(&[LocalState]) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for Observable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Observable").field("base", &self.base).finish()
    }
}

impl Observable {
    pub fn new<F>(base: Vec<VertexId>, f: F) -> Self
    where
        F: Fn(&[LocalState]) -> f64 + Send + Sync + 'static,
    {
        Observable {
            base,
            f: Arc::new(f),
        }
    }

    pub fn constant(c: f64) -> Self {
        Observable::new(Vec::new(), move |_| c)
    }

    /// `1{x(v) = s}`.
    pub fn indicator(v: VertexId, s: LocalState) -> Self {
        Observable::new(vec![v], move |y| f64::from(u8::from(y[0] == s)))
    }

    pub fn base(&self) -> &[VertexId] {
        &self.base
    }

    pub fn eval(&self, x: &[LocalState]) -> f64 {
        let local: Vec<LocalState> = self.base.iter().map(|&v| x[v]).collect();
        (self.f)(&local)
    }
}

/// `G_W f(x) = Σ_{v ∈ 𝒩_A ∩ W} Σ_y (f(x|v|y) − f(x)) α*_v(x, y)`, where `A` is
/// the base of `f`. Only vertices whose neighborhood meets `A` contribute.
pub fn apply_generator<K: JumpKernel + ?Sized>(
    kernel: &K,
    g: &Graph,
    core: &[VertexId],
    f: &Observable,
    x: &[LocalState],
) -> Result<f64> {
    for &a in f.base() {
        g.check_vertex(a)?;
    }
    if x.len() != g.n() {
        return Err(Error::InvalidParameter(format!(
            "configuration has {} sites, graph has {}",
            x.len(),
            g.n()
        )));
    }
    let fx = f.eval(x);
    let mut total = 0.0;
    let mut y = x.to_vec();
    for v in g.neighborhood_of_set(f.base())? {
        if !core.contains(&v) {
            continue;
        }
        for t in check_local_contract(kernel, g, v, x)? {
            for &(u, s) in &t.patch {
                y[u] = s;
            }
            total += (f.eval(&y) - fx) * t.rate;
            for &(u, _) in &t.patch {
                y[u] = x[u];
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::LocalState::*;
    use super::*;
    use crate::graphical::ClockEvent;

    fn scripted(horizon: f64, ticks: Vec<Vec<(f64, f64)>>) -> ClockRealization {
        ClockRealization {
            horizon,
            events: ticks
                .into_iter()
                .map(|evs| {
                    evs.into_iter()
                        .enumerate()
                        .map(|(index, (time, mark))| ClockEvent { time, mark, index })
                        .collect()
                })
                .collect(),
        }
    }

    /// A mark whose private uniform falls below `p`, or not.
    fn mark_with(below: bool, p: f64) -> f64 {
        (0..)
            .map(|i| f64::from(i) / 1000.0)
            .find(|&m| {
                let u = StreamKey::new(f64::to_bits(m)).with_tag("mu").uniform();
                (u < p) == below
            })
            .unwrap()
    }

    #[test]
    fn mu_step_trivial_cases() {
        let g = Graph::path(2);
        let voter = Voter::new(1.0).unwrap();
        // consensus: α* = 0
        for i in 0..100 {
            let m = f64::from(i) / 100.0;
            assert_eq!(mu_step(&voter, &g, 0, &[Spin(1), Spin(1)], m).unwrap(), None);
        }
        // α* = c with one target
        for i in 0..100 {
            let m = f64::from(i) / 100.0;
            assert_eq!(
                mu_step(&voter, &g, 0, &[Spin(1), Spin(0)], m).unwrap(),
                Some(vec![(0, Spin(0))])
            );
        }
    }

    #[test]
    fn mu_step_thins_at_the_right_frequency() {
        // center of a 2-star with one disagreeing leaf: α* = 1, c = 2
        let g = Graph::star(2);
        let voter = Voter::new(1.0).unwrap();
        let x = [Spin(0), Spin(1), Spin(0)];
        let n = 10_000u64;
        let jumps = (0..n)
            .filter(|&i| {
                let m = StreamKey::new(3).with(i).uniform();
                mu_step(&voter, &g, 0, &x, m).unwrap().is_some()
            })
            .count() as f64;
        let sd = (0.25 / n as f64).sqrt();
        assert!((jumps / n as f64 - 0.5).abs() < 3.0 * sd);
    }

    struct Greedy;
    impl JumpKernel for Greedy {
        fn name(&self) -> &'static str {
            "greedy"
        }
        fn rate_bound(&self, _: &Graph, _: VertexId) -> f64 {
            1.0
        }
        fn self_updating(&self) -> bool {
            true
        }
        fn validate_state(&self, _: &LocalState) -> Result<()> {
            Ok(())
        }
        fn total_rate(&self, _: &Graph, _: VertexId, _: &[LocalState]) -> f64 {
            2.0
        }
        fn targets(&self, _: &Graph, v: VertexId, _: &[LocalState]) -> Vec<Target> {
            vec![Target {
                patch: vec![(v, Spin(1))],
                rate: 2.0,
            }]
        }
    }

    #[test]
    fn contract_violation_aborts() {
        let g = Graph::path(2);
        let err = mu_step(&Greedy, &g, 0, &[Spin(0), Spin(0)], 0.3).unwrap_err();
        assert!(matches!(err, Error::RateBound { vertex: 0, .. }));
    }

    #[test]
    fn no_events_freezes_the_configuration() {
        let g = Graph::path(3);
        let voter = Voter::new(1.0).unwrap();
        let clocks = scripted(1.0, vec![vec![]; 3]);
        let x0 = vec![Spin(0), Spin(1), Spin(0)];
        let tr = run(&g, &Window::full(&g), &voter, &x0, &clocks, 1.0).unwrap();
        assert!(tr.events.is_empty());
        assert_eq!(tr.final_state(), x0);
    }

    #[test]
    fn stable_sandpile_never_moves() {
        let g = Graph::edgeless(1);
        let pile = DiscreteSandpile::new(1.0).unwrap();
        let clocks = scripted(5.0, vec![vec![(1.0, 0.1), (2.0, 0.7), (3.0, 0.9)]]);
        let tr = run(&g, &Window::full(&g), &pile, &[Grains(0)], &clocks, 5.0).unwrap();
        assert!(tr.events.is_empty());
        let p2 = Graph::path(2);
        let clocks = scripted(5.0, vec![vec![(1.0, 0.1), (2.0, 0.7)], vec![(1.5, 0.3)]]);
        let tr = run(&p2, &Window::full(&p2), &pile, &[Grains(1), Grains(0)], &clocks, 5.0).unwrap();
        assert!(tr.events.is_empty());
    }

    #[test]
    fn hand_simulated_voter_on_a_path() {
        // P3 = 0-1-2, k = 1, start (1, 0, 0).
        // t=1 at 1: α* = 1, c = 2, mark jumps -> (1, 1, 0)
        // t=2 at 2: α* = 1, c = 1, always jumps -> (1, 1, 1)
        // t=3 at 0: consensus, nothing happens
        // t=4 at 1: consensus, nothing happens
        let g = Graph::path(3);
        let voter = Voter::new(1.0).unwrap();
        let jump = mark_with(true, 0.5);
        let clocks = scripted(
            5.0,
            vec![vec![(3.0, 0.2)], vec![(1.0, jump), (4.0, 0.3)], vec![(2.0, 0.9)]],
        );
        let x0 = vec![Spin(1), Spin(0), Spin(0)];
        let tr = run(&g, &Window::full(&g), &voter, &x0, &clocks, 5.0).unwrap();
        let got: Vec<(f64, VertexId)> = tr.events.iter().map(|e| (e.time, e.vertex)).collect();
        assert_eq!(got, vec![(1.0, 1), (2.0, 2)]);
        assert_eq!(tr.final_state(), vec![Spin(1); 3]);
        assert_eq!(tr.state_at(1.5), vec![Spin(1), Spin(1), Spin(0)]);
        // a thinned first tick leaves 1 at 0 and 2 stays
        let stay = mark_with(false, 0.5);
        let clocks = scripted(5.0, vec![vec![], vec![(1.0, stay)], vec![(2.0, 0.9)]]);
        let tr = run(&g, &Window::full(&g), &voter, &x0, &clocks, 5.0).unwrap();
        assert!(tr.events.is_empty());
    }

    #[test]
    fn truncation_ignores_outside_clocks() {
        let g = Graph::path(5);
        let voter = Voter::new(1.0).unwrap();
        let clocks = model_clocks(&voter, &g, 3.0, 11).unwrap();
        let x0 = vec![Spin(0), Spin(1), Spin(0), Spin(1), Spin(0)];
        let w = Window::new(&g, &[2]).unwrap();
        let tr = run(&g, &w, &voter, &x0, &clocks, 3.0).unwrap();
        assert!(tr.events.iter().all(|e| e.vertex == 2));
        let end = tr.final_state();
        assert_eq!(end[0], x0[0]);
        assert_eq!(end[4], x0[4]);
        assert!(run(&g, &w, &voter, &x0, &clocks, 4.0).is_err());
    }

    #[test]
    fn generation_replay_matches_chronological() {
        for seed in 0..200u64 {
            let g = Graph::cycle(7);
            let models: Vec<(Box<dyn JumpKernel>, Vec<LocalState>)> = vec![
                (Box::new(Voter::new(1.0).unwrap()), (0..7).map(|i| Spin((i % 2) as u8)).collect()),
                (Box::new(DiscreteSandpile::new(1.0).unwrap()), (0..7).map(|i| Grains(i % 4)).collect()),
                (Box::new(Contact::new(1.2, 1.0).unwrap()), (0..7).map(|i| Spin(u8::from(i < 3))).collect()),
            ];
            for (m, x0) in &models {
                let clocks = model_clocks(m, &g, 2.0, seed).unwrap();
                let w = Window::full(&g);
                let a = run(&g, &w, m, x0, &clocks, 2.0).unwrap();
                let b = run_by_generations(&g, &w, m, x0, &clocks, 2.0, Mode::TwoStep).unwrap();
                assert_eq!(a, b);
                if m.self_updating() {
                    let c = run_by_generations(&g, &w, m, x0, &clocks, 2.0, Mode::OneStep).unwrap();
                    assert_eq!(a, c);
                }
            }
        }
    }

    #[test]
    fn jsonl_export() {
        let g = Graph::path(2);
        let voter = Voter::new(1.0).unwrap();
        let clocks = scripted(1.0, vec![vec![(0.5, 0.1)], vec![]]);
        let tr = run(&g, &Window::full(&g), &voter, &[Spin(0), Spin(1)], &clocks, 1.0).unwrap();
        let mut buf = Vec::new();
        tr.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1], r#"{"t":0.5,"v":0,"patch":{"0":{"spin":1}}}"#);
        assert!(lines[0].starts_with(r#"{"initial":{"0":{"spin":0},"1":{"spin":1}}"#));
    }

    #[test]
    fn generator_examples() {
        let k2 = Graph::path(2);
        let voter = Voter::new(1.0).unwrap();
        let x = [Spin(1), Spin(0)];
        let core = [0, 1];
        assert_eq!(
            apply_generator(&voter, &k2, &core, &Observable::constant(3.0), &x).unwrap(),
            0.0
        );
        // vertex 0 flips to 0 at rate 1
        let f = Observable::indicator(0, Spin(1));
        assert_eq!(apply_generator(&voter, &k2, &core, &f, &x).unwrap(), -1.0);
        // outside the core nothing counts
        assert_eq!(apply_generator(&voter, &k2, &[1], &f, &x).unwrap(), 0.0);
        let bad = Observable::indicator(5, Spin(1));
        assert!(apply_generator(&voter, &k2, &core, &bad, &x).is_err());
    }

    #[test]
    fn generator_norm_bound() {
        let g = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (1, 3)]).unwrap();
        let m = Contact::new(2.0, 1.0).unwrap();
        let core: Vec<VertexId> = g.vertices().collect();
        for bits in 0u32..32 {
            let x: Vec<LocalState> = (0..5).map(|i| Spin(((bits >> i) & 1) as u8)).collect();
            for a in g.vertices() {
                let f = Observable::indicator(a, Spin(1));
                let na = g.neighborhood_of_set(&[a]).unwrap();
                let c = na.iter().map(|&v| m.rate_bound(&g, v)).fold(0.0, f64::max);
                let val = apply_generator(&m, &g, &core, &f, &x).unwrap();
                assert!(val.abs() <= 2.0 * c * na.len() as f64);
            }
        }
    }
}
