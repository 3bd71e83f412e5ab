use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{CtmcOracle, ExperimentReport, Measurement, Provenance};
use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId, Window};
use crate::graphical::{
    cluster, direct_affect_tail, sample_clocks, ClockRealization, Direction, Mode, SpaceTime,
};
use crate::ips::{
    apply_generator, contract_checks, model_clocks, rate_profile, run, run_by_generations,
    DiscreteSandpile, DivisibleSandpile, JumpKernel, LocalState, Observable, Voter,
};
use crate::random_graphs::{
    grain_radius, grg_from_radii, grg_saw_sum_exact, lrp_neighbors,
    lrp_saw_sum_exact, mean_and_se, CouplingField, PointSet, RadiusLaw, RandomGraphSpec,
};
use crate::rng::{replica_seed, StreamKey};
use crate::saw::{trail_table, walk_saws};

/// Time grid of the generator check.
pub const GENERATOR_TIMES: [f64; 3] = [0.04, 0.02, 0.01];

/// Slack on the halving ratio of the generator error between grid points.
const LINEAR_SLACK: f64 = 1.25;

fn build_oracle<K: JumpKernel + ?Sized>(
    kernel: &K,
    g: &Graph,
    domains: Option<&[Vec<LocalState>]>,
) -> Result<CtmcOracle> {
    match domains {
        Some(d) => CtmcOracle::with_domains(kernel, g, d),
        None => CtmcOracle::new(kernel, g),
    }
}

fn oracle_index(oracle: &CtmcOracle, x: &[LocalState]) -> Result<usize> {
    oracle
        .index_of(x)
        .ok_or_else(|| Error::InvalidParameter(format!("{x:?} is outside the oracle state space")))
}

/// Compares `(P_t f(x) − f(x))/t` from the exact semigroup with `G f(x)` on a
/// decreasing time grid, for each named observable.
pub fn generator_consistency<K: JumpKernel + ?Sized>(
    kernel: &K,
    g: &Graph,
    domains: Option<&[Vec<LocalState>]>,
    observables: &[(String, Observable)],
    x: &[LocalState],
    times: &[f64],
) -> Result<ExperimentReport> {
    let start = Instant::now();
    let oracle = build_oracle(kernel, g, domains)?;
    let i = oracle_index(&oracle, x)?;
    let mut times = times.to_vec();
    times.sort_by(|a, b| b.total_cmp(a));
    let mut report = ExperimentReport::new(
        format!("generator_consistency/{}", kernel.name()),
        json!({
            "model": kernel.name(),
            "vertices": g.n(),
            "states": oracle.len(),
            "x": x,
            "times": times,
        }),
    );
    report.push(Measurement::at_most(
        "generator row sums",
        oracle.row_sum_error(),
        0.0,
        1e-10,
        Provenance::Property,
    ));
    let all: Vec<VertexId> = g.vertices().collect();
    let mut max_overflow: f64 = 0.0;
    for (name, f) in observables {
        let gf = apply_generator(kernel, g, &all, f, x)?;
        let fx = f.eval(x);
        let mut errs = Vec::with_capacity(times.len());
        for &t in &times {
            let (ptf, overflow) = oracle.expectation(f, i, t);
            max_overflow = max_overflow.max(overflow);
            errs.push(((ptf - fx) / t - gf).abs());
        }
        report.push(Measurement::info(format!("{name}: Gf(x)"), gf));
        let c = errs
            .iter()
            .zip(&times)
            .map(|(e, t)| e / t)
            .fold(0.0, f64::max);
        report.push(Measurement::info(format!("{name}: fitted C"), c));
        for k in 1..times.len() {
            report.push(Measurement::at_most(
                format!("{name}: err(t={})", times[k]),
                errs[k],
                LINEAR_SLACK * times[k] / times[k - 1] * errs[k - 1],
                1e-10,
                Provenance::Oracle,
            ));
        }
        if let (Some(&t), Some(&e)) = (times.last(), errs.last()) {
            report.push(Measurement::at_most(
                format!("{name}: relative err(t={t})"),
                e / gf.abs().max(1.0),
                0.02,
                0.0,
                Provenance::Oracle,
            ));
        }
    }
    if oracle.overflow().is_some() {
        report.note("state space truncated with an absorbing overflow state");
        report.push(Measurement::at_most(
            "cap-hit probability",
            max_overflow,
            1e-4,
            0.0,
            Provenance::Oracle,
        ));
    }
    Ok(report.finish(start))
}

/// The first `count` indicators of cylinder events `{x(A) = a}`, ordered by
/// `|A|`, then `A` lexicographically, then `a` by position in `domain`.
pub fn cylinder_indicators(n: usize, domain: &[LocalState], count: usize) -> Vec<(String, Observable)> {
    let mut out = Vec::new();
    for size in 1..=n {
        let mut base: Vec<VertexId> = (0..size).collect();
        loop {
            let mut digits = vec![0usize; size];
            loop {
                if out.len() == count {
                    return out;
                }
                let values: Vec<LocalState> = digits.iter().map(|&d| domain[d]).collect();
                let name = format!("1{{x{base:?}={values:?}}}");
                let target = values.clone();
                out.push((
                    name,
                    Observable::new(base.clone(), move |y| f64::from(u8::from(y == target.as_slice()))),
                ));
                // odometer over values, last position fastest
                let mut i = size;
                loop {
                    if i == 0 {
                        break;
                    }
                    i -= 1;
                    digits[i] += 1;
                    if digits[i] < domain.len() {
                        break;
                    }
                    digits[i] = 0;
                    if i == 0 {
                        i = usize::MAX;
                        break;
                    }
                }
                if i == usize::MAX || domain.is_empty() {
                    break;
                }
            }
            // next subset of the same size in lexicographic order
            let Some(i) = (0..size).rev().find(|&i| base[i] < n - size + i) else {
                break;
            };
            base[i] += 1;
            for j in i + 1..size {
                base[j] = base[j - 1] + 1;
            }
        }
    }
    out
}

/// Total-variation distance between the empirical law of `ξ_t` over
/// `replicas` runs and the oracle row of `exp(tQ)`.
pub fn simulation_vs_oracle<K: JumpKernel + ?Sized>(
    kernel: &K,
    g: &Graph,
    domains: Option<&[Vec<LocalState>]>,
    x0: &[LocalState],
    t: f64,
    replicas: usize,
    seed: u64,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("time must be non-negative, got {t}")));
    }
    let oracle = build_oracle(kernel, g, domains)?;
    let i = oracle_index(&oracle, x0)?;
    let mut report = ExperimentReport::new(
        format!("simulation_vs_oracle/{}", kernel.name()),
        json!({
            "model": kernel.name(),
            "vertices": g.n(),
            "states": oracle.len(),
            "x0": x0,
            "t": t,
            "seed": seed,
        }),
    );
    report.replicas = replicas;
    report.push(Measurement::at_most(
        "generator row sums",
        oracle.row_sum_error(),
        0.0,
        1e-10,
        Provenance::Property,
    ));
    let row = oracle.transition_row(i, t);
    report.push(Measurement::within(
        "P_t row sum",
        row.iter().sum(),
        1.0,
        1e-9,
        Provenance::Property,
    ));
    report.push(Measurement::at_most(
        "P_t negative part",
        -row.iter().copied().fold(0.0, f64::min),
        0.0,
        1e-12,
        Provenance::Property,
    ));
    if oracle.len() <= super::DENSE_CAP {
        let s = if t > 0.0 { t } else { 0.1 };
        report.push(Measurement::at_most(
            "Chapman-Kolmogorov",
            oracle.chapman_kolmogorov_error(s / 3.0, 2.0 * s / 3.0)?,
            0.0,
            1e-8,
            Provenance::Property,
        ));
    }
    let window = Window::full(g);
    let outside = oracle.len();
    let finals: Vec<usize> = if t == 0.0 {
        vec![i; replicas]
    } else {
        (0..replicas as u64)
            .into_par_iter()
            .map(|r| {
                let clocks = model_clocks(kernel, g, t, replica_seed(seed, r))?;
                let traj = run(g, &window, kernel, x0, &clocks, t)?;
                Ok(oracle.index_of(&traj.final_state()).unwrap_or(outside))
            })
            .collect::<Result<_>>()?
    };
    let mut counts = vec![0usize; outside + 1];
    for j in finals {
        counts[j] += 1;
    }
    let n = replicas.max(1) as f64;
    let mut tv = counts[outside] as f64 / n;
    for (j, &p) in row.iter().enumerate() {
        tv += (counts[j] as f64 / n - p).abs();
    }
    report.push(Measurement::at_most(
        "total variation",
        tv / 2.0,
        0.0,
        0.01,
        Provenance::Oracle,
    ));
    Ok(report.finish(start))
}

/// One window of a ladder: its label (for `[−m, m]` windows, `m`) and core.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rung {
    pub m: usize,
    pub core: Vec<VertexId>,
}

/// Windows `[−m, m]` of a one-dimensional lattice point set.
pub fn interval_ladder(points: &PointSet, ms: &[usize]) -> Result<Vec<Rung>> {
    ms.iter()
        .map(|&m| {
            let core = (-(m as i64)..=m as i64)
                .map(|i| {
                    points.index_of(&[i as f64]).ok_or_else(|| {
                        Error::InvalidParameter(format!("window [-{m}, {m}] exceeds the point set"))
                    })
                })
                .collect::<Result<_>>()?;
            Ok(Rung { m, core })
        })
        .collect()
}

/// Runs the truncated processes on a window ladder for every seed and checks
/// that the trajectory at `v` is identical on every window that contains the
/// cluster `C_{v,t}`. A seed is certified when some rung with label at most
/// `certify_m` contains the cluster; at least `min_certified` seeds must be.
#[allow(clippy::too_many_arguments)]
pub fn window_convergence<K: JumpKernel + ?Sized>(
    g: &Graph,
    kernel: &K,
    x0: &[LocalState],
    v: VertexId,
    t: f64,
    ladder: &[Rung],
    seeds: &[u64],
    mode: Mode,
    certify_m: usize,
    min_certified: usize,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    let windows: Vec<Window> = ladder
        .iter()
        .map(|r| Window::new(g, &r.core))
        .collect::<Result<_>>()?;
    let per_seed: Vec<(Option<usize>, usize)> = seeds
        .par_iter()
        .map(|&seed| {
            let clocks = model_clocks(kernel, g, t, seed)?;
            let cl = cluster(g, &clocks, v, t, mode)?;
            let Some(first) = windows.iter().position(|w| cl.iter().all(|&u| w.in_core(u))) else {
                return Ok((None, 0));
            };
            let reference = run(g, &windows[first], kernel, x0, &clocks, t)?.restricted_to(&[v]);
            let mut mismatches = 0;
            for w in &windows[first + 1..] {
                if run(g, w, kernel, x0, &clocks, t)?.restricted_to(&[v]) != reference {
                    mismatches += 1;
                }
            }
            Ok((Some(ladder[first].m), mismatches))
        })
        .collect::<Result<_>>()?;
    let mut hist: BTreeMap<String, usize> = BTreeMap::new();
    for (m, _) in &per_seed {
        *hist
            .entry(m.map_or("none".into(), |m| m.to_string()))
            .or_default() += 1;
    }
    let mut report = ExperimentReport::new(
        format!("window_convergence/{}", kernel.name()),
        json!({
            "model": kernel.name(),
            "vertex": v,
            "t": t,
            "ladder": ladder.iter().map(|r| r.m).collect::<Vec<_>>(),
            "seeds": seeds.len(),
            "mode": mode,
            "certify_m": certify_m,
            "m_star_histogram": hist,
        }),
    );
    report.replicas = seeds.len();
    report.push(Measurement::zero(
        "trajectory mismatches beyond m*",
        per_seed.iter().map(|p| p.1).sum(),
    ));
    let certified = per_seed
        .iter()
        .filter(|p| p.0.is_some_and(|m| m <= certify_m))
        .count();
    report.push(Measurement::info("certified seeds", certified as f64));
    report.push(Measurement::at_most(
        format!("seeds without a certificate at m <= {certify_m}"),
        (seeds.len() - certified) as f64,
        seeds.len().saturating_sub(min_certified) as f64,
        0.0,
        Provenance::Property,
    ));
    Ok(report.finish(start))
}

/// Exact moments `E[deg(v)^n]`, `n = 1..=n_max`, of a sum of independent
/// Bernoulli variables.
pub fn bernoulli_sum_moments(probs: &[f64], n_max: u32) -> Vec<f64> {
    let mut dist = vec![1.0];
    for &p in probs {
        let mut next = vec![0.0; dist.len() + 1];
        for (k, &q) in dist.iter().enumerate() {
            next[k] += q * (1.0 - p);
            next[k + 1] += q * p;
        }
        dist = next;
    }
    (1..=n_max)
        .map(|n| {
            dist.iter()
                .enumerate()
                .map(|(k, &q)| q * (k as f64).powi(n as i32))
                .sum()
        })
        .collect()
}

fn origin(points: &PointSet) -> Result<VertexId> {
    points
        .index_of(&vec![0.0; points.dim()])
        .ok_or_else(|| Error::InvalidParameter("the point set does not contain the origin".into()))
}

/// Monte Carlo `E[deg(0)^n]` for long-range percolation on `Z^dim ∩ [−r, r]`,
/// against `(β Ĵ)^n` with a one-sided 3σ band, plus the exact moments of
/// the window as an oracle.
pub fn lrp_moment_bound(
    field: &CouplingField,
    points: &PointSet,
    j_hat: f64,
    n_max: u32,
    replicas: usize,
    seed: u64,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    let o = origin(points)?;
    let degrees: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| lrp_neighbors(points, field, replica_seed(seed, r), o).len() as f64)
        .collect();
    let probs: Vec<f64> = (0..points.len())
        .filter(|&u| u != o)
        .map(|u| field.edge_probability(&points.points[o], &points.points[u]))
        .collect();
    let exact = bernoulli_sum_moments(&probs, n_max);
    let mut report = ExperimentReport::new(
        "bounds/lrp_degree_moments",
        json!({
            "beta": field.beta,
            "p": field.p,
            "J_hat": j_hat,
            "points": points.len(),
            "n_max": n_max,
            "seed": seed,
        }),
    );
    report.replicas = replicas;
    for n in 1..=n_max {
        let vals: Vec<f64> = degrees.iter().map(|d| d.powi(n as i32)).collect();
        let (mean, se) = mean_and_se(&vals);
        report.push(Measurement::at_most(
            format!("E[deg^{n}]"),
            mean,
            (field.beta * j_hat).powi(n as i32),
            3.0 * se,
            Provenance::Inequality,
        ));
        report.push(Measurement::within(
            format!("E[deg^{n}] vs exact window moment"),
            mean,
            exact[n as usize - 1],
            4.0 * se,
            Provenance::Oracle,
        ));
    }
    Ok(report.finish(start))
}

/// Exact `Σ P(SAW)^{1/p}` over `n`-step walks from the origin, against
/// `(β^{1/p} Ĵ)^n`. No tolerance.
pub fn lrp_saw_sum_bound(
    field: &CouplingField,
    points: &PointSet,
    j_hat: f64,
    n_max: usize,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    let o = origin(points)?;
    let mut report = ExperimentReport::new(
        "bounds/lrp_saw_sum",
        json!({
            "beta": field.beta,
            "p": field.p,
            "J_hat": j_hat,
            "points": points.len(),
            "n_max": n_max,
        }),
    );
    let base = field.beta.powf(1.0 / field.p) * j_hat;
    for n in 1..=n_max {
        report.push(Measurement::at_most(
            format!("saw sum n={n}"),
            lrp_saw_sum_exact(points, field, o, n),
            base.powi(n as i32),
            0.0,
            Provenance::Inequality,
        ));
    }
    Ok(report.finish(start))
}

fn grg_radii(points: &PointSet, law: &RadiusLaw, seed: u64) -> Vec<f64> {
    points
        .points
        .iter()
        .map(|p| grain_radius(law, seed, p.key))
        .collect()
}

/// Monte Carlo `E[deg(0)^n]` for the geometric random graph against
/// `(K^{2s} S)^n`, one-sided 3σ.
pub fn grg_moment_bound(
    law: &RadiusLaw,
    points: &PointSet,
    s: f64,
    s_hat: f64,
    n_max: u32,
    replicas: usize,
    seed: u64,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    law.validate()?;
    let o = origin(points)?;
    let k = law.moment_constant();
    let degrees: Vec<f64> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let s = replica_seed(seed, r);
            let r0 = grain_radius(law, s, points.points[o].key);
            (0..points.len())
                .filter(|&u| {
                    u != o && {
                        let d = points.distance(o, u);
                        d < r0 && d < grain_radius(law, s, points.points[u].key)
                    }
                })
                .count() as f64
        })
        .collect();
    let mut report = ExperimentReport::new(
        "bounds/grg_degree_moments",
        json!({
            "radius_law": law,
            "K": k,
            "s": s,
            "S_hat": s_hat,
            "points": points.len(),
            "n_max": n_max,
            "seed": seed,
        }),
    );
    report.replicas = replicas;
    for n in 1..=n_max {
        let vals: Vec<f64> = degrees.iter().map(|d| d.powi(n as i32)).collect();
        let (mean, se) = mean_and_se(&vals);
        report.push(Measurement::at_most(
            format!("E[deg^{n}]"),
            mean,
            (k.powf(2.0 * s) * s_hat).powi(n as i32),
            3.0 * se,
            Provenance::Inequality,
        ));
    }
    Ok(report.finish(start))
}

/// `Σ P(SAW)^{1/p}` for the geometric random graph, with each walk
/// probability estimated over radius draws, against
/// `K^{⌈sp⌉/p} (S K^{⌈sp⌉/p})^n`. The band is the sum of the per-walk
/// delta-method standard errors. The exact product-form sum is reported and
/// checked against the same right side.
#[allow(clippy::too_many_arguments)]
pub fn grg_saw_sum_bound(
    law: &RadiusLaw,
    points: &PointSet,
    s: f64,
    s_hat: f64,
    p: f64,
    n_max: usize,
    replicas: usize,
    seed: u64,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    law.validate()?;
    let o = origin(points)?;
    let counts: BTreeMap<Vec<VertexId>, u64> = (0..replicas as u64)
        .into_par_iter()
        .fold(BTreeMap::new, |mut acc, r| {
            let g = grg_from_radii(points, &grg_radii(points, law, replica_seed(seed, r)));
            walk_saws(&g, o, n_max, |w| {
                *acc.entry(w.to_vec()).or_insert(0u64) += 1;
                true
            });
            acc
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (k, c) in b {
                *a.entry(k).or_insert(0) += c;
            }
            a
        });
    let k = law.moment_constant();
    let kq = k.powf((s * p).ceil() / p);
    let mut report = ExperimentReport::new(
        "bounds/grg_saw_sum",
        json!({
            "radius_law": law,
            "K": k,
            "s": s,
            "S_hat": s_hat,
            "p": p,
            "points": points.len(),
            "n_max": n_max,
            "seed": seed,
        }),
    );
    report.replicas = replicas;
    let nrep = replicas as f64;
    for n in 1..=n_max {
        let (mut lhs, mut band) = (0.0, 0.0);
        for (_, &c) in counts.iter().filter(|(w, _)| w.len() == n + 1) {
            let ph = c as f64 / nrep;
            lhs += ph.powf(1.0 / p);
            band += ph.powf(1.0 / p - 1.0) / p * (ph * (1.0 - ph) / nrep).sqrt();
        }
        let rhs = kq * (s_hat * kq).powi(n as i32);
        report.push(Measurement::at_most(
            format!("saw sum n={n} (monte carlo)"),
            lhs,
            rhs,
            3.0 * band,
            Provenance::Inequality,
        ));
        report.push(Measurement::at_most(
            format!("saw sum n={n} (exact)"),
            grg_saw_sum_exact(points, law, p, o, n),
            rhs,
            0.0,
            Provenance::Inequality,
        ));
    }
    Ok(report.finish(start))
}

/// Mean raw double-trail sums `E[Σ_{SAW*_n(0)} Π c(v_i)]` over sampled random
/// graphs, with a log-linear fit in `n`. Geometric growth of the mean means
/// the successive ratios stay bounded; the check asserts that no late ratio
/// exceeds `ratio_slack` times the largest early one.
pub fn trail_growth<K: JumpKernel + ?Sized>(
    spec: &RandomGraphSpec,
    kernel: &K,
    n_max: usize,
    replicas: usize,
    seed: u64,
    ratio_slack: f64,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    if n_max < 4 {
        return Err(Error::InvalidParameter("trail growth needs n_max >= 4".into()));
    }
    let points = spec.points()?;
    let o = origin(&points)?;
    let tables: Vec<Vec<f64>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let (_, g) = spec.sample(replica_seed(seed, r))?;
            Ok(trail_table(&g, &rate_profile(kernel, &g), o, n_max)?.raw_double)
        })
        .collect::<Result<_>>()?;
    let means: Vec<f64> = (0..n_max - 1)
        .map(|i| tables.iter().map(|t| t[i]).sum::<f64>() / replicas.max(1) as f64)
        .collect();
    let mut report = ExperimentReport::new(
        format!("trail_growth/{}", kernel.name()),
        json!({ "graph": spec, "model": kernel.name(), "n_max": n_max, "seed": seed }),
    );
    report.replicas = replicas;
    for (i, m) in means.iter().enumerate() {
        report.push(Measurement::info(format!("mean raw double sum n={}", i + 2), *m));
    }
    let pts: Vec<(f64, f64)> = means
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0.0)
        .map(|(i, &m)| ((i + 2) as f64, m.ln()))
        .collect();
    if pts.len() >= 2 {
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
        report.push(Measurement::info("log-linear slope", sxy / sxx));
        if syy > 0.0 {
            report.push(Measurement::info("log-linear r^2", sxy * sxy / (sxx * syy)));
        }
    }
    let ratios: Vec<f64> = means
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
        .collect();
    let half = ratios.len() / 2;
    let early = ratios[..half.max(1)].iter().copied().fold(0.0, f64::max);
    for (i, r) in ratios.iter().enumerate().skip(half.max(1)) {
        report.push(Measurement::at_most(
            format!("ratio n={}->{}", i + 2, i + 3),
            *r,
            ratio_slack * early,
            0.0,
            Provenance::Inequality,
        ));
    }
    Ok(report.finish(start))
}

/// Tail frequencies of the direct-affect event at times `δn`, both
/// directions, with the successive-ratio check `f(n) ≤ ratio · f(n−1)` for
/// `n > from_n`.
#[allow(clippy::too_many_arguments)]
pub fn percolation_suite(
    g: &Graph,
    rates: &[f64],
    v: VertexId,
    delta: f64,
    ns: std::ops::RangeInclusive<usize>,
    replicas: usize,
    seed: u64,
    mode: Mode,
    ratio: f64,
    from_n: usize,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    let horizon = delta * *ns.end() as f64;
    let ensemble: Vec<ClockRealization> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| sample_clocks(g, rates, horizon, replica_seed(seed, r)))
        .collect::<Result<_>>()?;
    let mut report = ExperimentReport::new(
        "percolation",
        json!({
            "vertices": g.n(),
            "vertex": v,
            "delta": delta,
            "n": [ns.start(), ns.end()],
            "mode": mode,
            "seed": seed,
            "ratio": ratio,
            "from_n": from_n,
        }),
    );
    report.replicas = replicas;
    let mut all_zero_late = true;
    for (dir, label) in [(Direction::Outgoing, "outgoing"), (Direction::Incoming, "incoming")] {
        let mut prev: Option<f64> = None;
        for n in ns.clone() {
            let est = direct_affect_tail(g, &ensemble, v, delta, n, mode, dir)?;
            report.push(Measurement::info(format!("{label} f({n})"), est.frequency));
            if n > from_n {
                all_zero_late &= est.hits == 0;
                if let Some(p) = prev {
                    report.push(Measurement::at_most(
                        format!("{label} f({n}) vs {ratio} f({})", n - 1),
                        est.frequency,
                        ratio * p,
                        0.0,
                        Provenance::Inequality,
                    ));
                }
            }
            prev = Some(est.frequency);
        }
    }
    for n in ns {
        report.push(Measurement::info(format!("reference 2^-{n}"), 0.5f64.powi(n as i32)));
    }
    if all_zero_late {
        report.note(format!(
            "no tail event observed beyond n = {from_n}; the ratio checks hold with zero frequencies"
        ));
    }
    Ok(report.finish(start))
}

/// Random connected-or-not graph on `2..=max_n` vertices with edge
/// probability `p`, keyed by `seed`.
pub fn random_small_graph(seed: u64, max_n: usize, p: f64) -> Graph {
    let key = StreamKey::new(seed).with_tag("small_graph");
    let n = 2 + (key.with_tag("n").uniform() * (max_n - 1) as f64) as usize;
    let n = n.min(max_n);
    let mut edges = Vec::new();
    for u in 0..n {
        for w in u + 1..n {
            if key.with(u as u64).with(w as u64).uniform() < p {
                edges.push((u, w));
            }
        }
    }
    Graph::from_edges(n, &edges).expect("valid edges")
}

/// Generation partition checks on sampled realizations: each sample draws a
/// graph, clocks and spins, checks the partition structure in both modes and
/// compares generation-ordered replay with chronological replay.
pub fn generation_suite(samples: usize, max_n: usize, seed: u64) -> Result<ExperimentReport> {
    let start = Instant::now();
    let voter = Voter::new(1.0)?;
    let sandpile = DiscreteSandpile::new(1.0)?;
    let results: Vec<(usize, usize)> = (0..samples as u64)
        .into_par_iter()
        .map(|r| {
            let s = replica_seed(seed, r);
            let g = random_small_graph(s, max_n, 0.3);
            let window = Window::full(&g);
            let key = StreamKey::new(s).with_tag("spins");
            let spins: Vec<LocalState> = g
                .vertices()
                .map(|v| LocalState::Spin(u8::from(key.with(v as u64).uniform() < 0.5)))
                .collect();
            let grains: Vec<LocalState> = g
                .vertices()
                .map(|v| {
                    let u = key.with_tag("grains").with(v as u64).uniform();
                    LocalState::Grains((u * 2.0 * (g.degree(v) + 1) as f64) as u64)
                })
                .collect();
            let horizon = 2.0;
            let mut partition_failures = 0;
            let mut replay_failures = 0;
            let clocks = model_clocks(&voter, &g, horizon, s)?;
            for mode in [Mode::TwoStep, Mode::OneStep] {
                if SpaceTime::new(&g, &clocks, mode)?.generations().check().is_err() {
                    partition_failures += 1;
                }
                let a = run(&g, &window, &voter, &spins, &clocks, horizon)?;
                let b = run_by_generations(&g, &window, &voter, &spins, &clocks, horizon, mode)?;
                replay_failures += usize::from(a != b);
            }
            let clocks = model_clocks(&sandpile, &g, horizon, s)?;
            let a = run(&g, &window, &sandpile, &grains, &clocks, horizon)?;
            let b = run_by_generations(&g, &window, &sandpile, &grains, &clocks, horizon, Mode::TwoStep)?;
            replay_failures += usize::from(a != b);
            Ok((partition_failures, replay_failures))
        })
        .collect::<Result<_>>()?;
    let mut report = ExperimentReport::new(
        "generation_partition",
        json!({ "samples": samples, "max_vertices": max_n, "seed": seed }),
    );
    report.replicas = samples;
    report.push(Measurement::zero(
        "partition failures",
        results.iter().map(|r| r.0).sum(),
    ));
    report.push(Measurement::zero(
        "replay mismatches",
        results.iter().map(|r| r.1).sum(),
    ));
    Ok(report.finish(start))
}

/// Conservation of grains and mass over at least `min_events` topplings of
/// each sandpile, counted per event on the patch it writes.
pub fn conservation_suite(min_events: usize, seed: u64) -> Result<ExperimentReport> {
    let start = Instant::now();
    let checks_before = contract_checks();
    let discrete = DiscreteSandpile::new(1.0)?;
    let divisible = DivisibleSandpile::new(1.0, 1.0)?;
    let (mut grain_events, mut grain_failures) = (0usize, 0usize);
    let (mut mass_events, mut max_mass_err) = (0usize, 0.0f64);
    let mut round = 0u64;
    while grain_events < min_events || mass_events < min_events {
        let s = replica_seed(seed, round);
        round += 1;
        let g = random_small_graph(s, 20, 0.3);
        let window = Window::full(&g);
        let key = StreamKey::new(s).with_tag("load");
        let horizon = 5.0;
        if grain_events < min_events {
            let x0: Vec<LocalState> = g
                .vertices()
                .map(|v| LocalState::Grains((key.with(v as u64).uniform() * 3.0 * (g.degree(v) + 1) as f64) as u64))
                .collect();
            let clocks = model_clocks(&discrete, &g, horizon, s)?;
            for e in run(&g, &window, &discrete, &x0, &clocks, horizon)?.events {
                let total = |p: &[(VertexId, LocalState)]| -> u64 {
                    p.iter()
                        .map(|(_, s)| match s {
                            LocalState::Grains(n) => *n,
                            _ => 0,
                        })
                        .sum()
                };
                grain_events += 1;
                grain_failures += usize::from(total(&e.old) != total(&e.new));
            }
        }
        if mass_events < min_events {
            let x0: Vec<LocalState> = g
                .vertices()
                .map(|v| LocalState::Mass(key.with_tag("mass").with(v as u64).uniform() * 3.0))
                .collect();
            let clocks = model_clocks(&divisible, &g, horizon, s)?;
            for e in run(&g, &window, &divisible, &x0, &clocks, horizon)?.events {
                let total = |p: &[(VertexId, LocalState)]| -> f64 {
                    p.iter()
                        .map(|(_, s)| match s {
                            LocalState::Mass(m) => *m,
                            _ => 0.0,
                        })
                        .sum()
                };
                mass_events += 1;
                max_mass_err = max_mass_err.max((total(&e.old) - total(&e.new)).abs());
            }
        }
    }
    let mut report = ExperimentReport::new(
        "conservation",
        json!({ "min_events": min_events, "seed": seed }),
    );
    report.replicas = round as usize;
    report.push(Measurement::info("toppling events (discrete)", grain_events as f64));
    report.push(Measurement::info("toppling events (divisible)", mass_events as f64));
    report.push(Measurement::zero("grain count changes", grain_failures));
    report.push(Measurement::at_most(
        "mass change per event",
        max_mass_err,
        0.0,
        1e-12,
        Provenance::Property,
    ));
    report.push(Measurement::info(
        "kernel contract checks passed",
        (contract_checks() - checks_before) as f64,
    ));
    Ok(report.finish(start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ips::{Contact, LocalState::Spin};
    use crate::random_graphs::Coupling;

    fn spins(v: &[u8]) -> Vec<LocalState> {
        v.iter().map(|&s| Spin(s)).collect()
    }

    #[test]
    fn constant_observable_has_zero_generator() {
        let r = generator_consistency(
            &Voter::new(1.0).unwrap(),
            &Graph::complete(3),
            None,
            &[("one".into(), Observable::constant(1.0))],
            &spins(&[1, 0, 0]),
            &GENERATOR_TIMES,
        )
        .unwrap();
        assert!(r.passed);
        assert!(r.measurements.iter().all(|m| m.value.abs() < 1e-12));
    }

    #[test]
    fn voter_all_equal_generator_by_hand() {
        // from (1,0,0) on K3: vertex 0 flips at rate 2 to consensus, 1 and 2
        // flip at rate 1 each away from it; Gf = 2 for f = 1{all equal}
        let f = Observable::new(vec![0, 1, 2], |y| f64::from(u8::from(y[0] == y[1] && y[1] == y[2])));
        let g = Graph::complete(3);
        let gf = apply_generator(&Voter::new(1.0).unwrap(), &g, &[0, 1, 2], &f, &spins(&[1, 0, 0])).unwrap();
        assert_eq!(gf, 2.0);
        let r = generator_consistency(
            &Voter::new(1.0).unwrap(),
            &g,
            None,
            &[("all equal".into(), f)],
            &spins(&[1, 0, 0]),
            &GENERATOR_TIMES,
        )
        .unwrap();
        assert!(r.passed, "{r:#?}");
    }

    #[test]
    fn sandpile_generator_flags_truncation() {
        let g = Graph::path(3);
        let domains = vec![(0..=6).map(LocalState::Grains).collect::<Vec<_>>(); 3];
        let f = Observable::new(vec![1], |y| match y[0] {
            LocalState::Grains(n) => n as f64,
            _ => 0.0,
        });
        let x = vec![LocalState::Grains(3), LocalState::Grains(1), LocalState::Grains(0)];
        let r = generator_consistency(
            &DiscreteSandpile::new(1.0).unwrap(),
            &g,
            Some(&domains),
            &[("grains at 1".into(), f)],
            &x,
            &GENERATOR_TIMES,
        )
        .unwrap();
        assert!(r.notes.iter().any(|n| n.contains("truncated")));
        assert!(r.passed, "{r:#?}");
    }

    #[test]
    fn zero_time_has_zero_total_variation() {
        let r = simulation_vs_oracle(
            &Contact::new(1.5, 1.0).unwrap(),
            &Graph::complete(2),
            None,
            &spins(&[1, 0]),
            0.0,
            100,
            1,
        )
        .unwrap();
        let tv = r.measurements.iter().find(|m| m.name == "total variation").unwrap();
        assert_eq!(tv.value, 0.0);
    }

    #[test]
    fn tiny_horizon_certifies_at_first_rung() {
        let points = PointSet::integer_lattice(1, 20);
        // nearest-neighbor Z: the two-step neighborhood of 0 is [-2, 2]
        let g = Graph::path(41);
        let ladder = interval_ladder(&points, &[2, 5, 20]).unwrap();
        let x0 = vec![Spin(0); g.n()];
        let seeds: Vec<u64> = (0..20).collect();
        let r = window_convergence(
            &g,
            &Voter::new(1.0).unwrap(),
            &x0,
            points.index_of(&[0.0]).unwrap(),
            1e-9,
            &ladder,
            &seeds,
            Mode::TwoStep,
            2,
            20,
        )
        .unwrap();
        assert!(r.passed, "{}", crate::verify::render_table(std::slice::from_ref(&r)));
        assert_eq!(r.parameters["m_star_histogram"]["2"], 20, "{}", r.parameters);
    }

    #[test]
    fn zero_coupling_gives_zero_left_sides() {
        let points = PointSet::integer_lattice(1, 5);
        let field = CouplingField::new(Coupling::Zero, 1.5, 1.0).unwrap();
        let r = lrp_saw_sum_bound(&field, &points, 0.0, 3).unwrap();
        assert!(r.measurements.iter().all(|m| m.value == 0.0));
        let r = lrp_moment_bound(&field, &points, 0.0, 3, 50, 1).unwrap();
        assert!(r.passed);
    }

    #[test]
    fn cylinder_order() {
        let names: Vec<String> = cylinder_indicators(3, &[Spin(0), Spin(1)], 7)
            .into_iter()
            .map(|c| c.0)
            .collect();
        assert_eq!(names[0], "1{x[0]=[Spin(0)]}");
        assert_eq!(names[5], "1{x[2]=[Spin(1)]}");
        assert_eq!(names[6], "1{x[0, 1]=[Spin(0), Spin(0)]}");
        assert_eq!(cylinder_indicators(2, &[Spin(0), Spin(1)], 100).len(), 4 + 4);
    }

    #[test]
    fn weak_coupling_breaks_the_product_moment_bound() {
        // E[deg^2] >= E[deg] is linear in beta, (beta J)^2 is quadratic
        let beta = 0.1;
        let probs: Vec<f64> = (1..=200)
            .flat_map(|z| [z, -z])
            .map(|z: i32| -(-beta * f64::from(z.abs()).powi(-3)).exp_m1())
            .collect();
        let m = bernoulli_sum_moments(&probs, 2);
        let bound = (beta * std::f64::consts::PI.powi(2) / 3.0).powi(2);
        assert!(m[1] > 2.0 * bound, "{} vs {bound}", m[1]);
    }

    #[test]
    fn bernoulli_moments_match_binomial() {
        // Bin(2, 1/2): E[X] = 1, E[X^2] = 3/2, E[X^3] = 5/2
        assert_eq!(bernoulli_sum_moments(&[0.5, 0.5], 3), vec![1.0, 1.5, 2.5]);
    }

    #[test]
    fn reports_are_reproducible() {
        let run = || {
            let mut r = simulation_vs_oracle(
                &Voter::new(1.0).unwrap(),
                &Graph::complete(3),
                None,
                &spins(&[1, 0, 0]),
                0.5,
                2000,
                9,
            )
            .unwrap();
            r.meta = Default::default();
            serde_json::to_string(&r).unwrap()
        };
        assert_eq!(run(), run());
    }
}
