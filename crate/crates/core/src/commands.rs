//! Batch commands behind the `particle-forge` binary. Each one reads an
//! [`ExperimentConfig`] and writes its data files into an output directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentSpec, GraphSpec, SystemSpec, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId, Window};
use crate::ips::{model_clocks, rate_profile, run, JumpKernel, LocalState, ModelSpec};
use crate::random_graphs::{zeta, CouplingField, PointSet};
use crate::rng::replica_seed;
use crate::saw::{trail_table, write_trails_csv, TrailTable};
use crate::verify::{
    conservation_suite, cylinder_indicators, generation_suite, generator_consistency,
    grg_moment_bound, grg_saw_sum_bound, interval_ladder, lrp_moment_bound, lrp_saw_sum_bound,
    merge_reports, percolation_suite, render_table, simulation_vs_oracle, trail_growth,
    window_convergence, ExperimentReport, Rung,
};

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn graph_of(cfg: &ExperimentConfig, spec: &GraphSpec) -> Result<(Graph, Option<PointSet>)> {
    spec.build(cfg.stream("graph"))
}

/// Writes `graph.json`.
pub fn cmd_gen_graph(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    let (g, _) = graph_of(cfg, cfg.graph_spec()?)?;
    let path = out.join("graph.json");
    let mut w = create(&path)?;
    writeln!(w, "{}", g.to_json())?;
    w.flush()?;
    Ok(path)
}

/// Trail tables for the configured vertices. Rates are the clock
/// intensities of the model, or 1 everywhere without one.
pub fn trail_tables(cfg: &ExperimentConfig) -> Result<Vec<TrailTable>> {
    let spec = cfg
        .trails
        .as_ref()
        .ok_or_else(|| Error::Config("config has no trails section".into()))?;
    let (g, _) = graph_of(cfg, cfg.graph_spec()?)?;
    let rates = match &cfg.model {
        Some(m) => rate_profile(m.build()?.as_ref(), &g),
        None => vec![1.0; g.n()],
    };
    let vertices: Vec<VertexId> = match &spec.vertices {
        Some(vs) => vs.clone(),
        None => g.vertices().collect(),
    };
    vertices
        .par_iter()
        .map(|&v| trail_table(&g, &rates, v, spec.n_max))
        .collect()
}

/// Writes `trails.csv`, one row per vertex and walk length.
pub fn cmd_trails(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    let tables = trail_tables(cfg)?;
    let path = out.join("trails.csv");
    let mut w = create(&path)?;
    write_trails_csv(&tables, &mut w)?;
    w.flush()?;
    Ok(path)
}

/// Runs the model on the configured window up to the horizon and writes
/// `trajectory.jsonl` and `clocks.csv`.
pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let (gspec, mspec, ispec) = cfg.system(&SystemSpec::default())?;
    let (g, _) = graph_of(cfg, &gspec)?;
    let kernel = mspec.build()?;
    let horizon = cfg.horizon()?;
    let window = match &cfg.window {
        Some(core) => Window::new(&g, core)?,
        None => Window::full(&g),
    };
    let x0 = ispec.build(g.n(), cfg.seed)?;
    let clocks = model_clocks(kernel.as_ref(), &g, horizon, cfg.stream("clocks"))?;
    let trajectory = run(&g, &window, kernel.as_ref(), &x0, &clocks, horizon)?;

    let traj_path = out.join("trajectory.jsonl");
    let mut w = create(&traj_path)?;
    trajectory.write_jsonl(&mut w)?;
    w.flush()?;
    let clock_path = out.join("clocks.csv");
    let mut w = create(&clock_path)?;
    clocks.write_csv(&mut w)?;
    w.flush()?;
    Ok(vec![traj_path, clock_path])
}

/// Per-vertex domains for the oracle (`None` when the model has its own),
/// and the single-site domain used for cylinder observables.
type Domains = (Option<Vec<Vec<LocalState>>>, Vec<LocalState>);

/// Per-vertex state spaces for the oracle: the model's own finite domain, or
/// grain counts `0..=grain_cap` for grain-valued models.
fn oracle_domains(
    kernel: &dyn JumpKernel,
    model: &ModelSpec,
    n: usize,
    grain_cap: Option<u64>,
) -> Result<Domains> {
    if let Some(d) = kernel.finite_domain() {
        return Ok((None, d));
    }
    match (model, grain_cap) {
        (ModelSpec::DiscreteSandpile { .. } | ModelSpec::BirthDeath { .. }, Some(cap)) => {
            let d: Vec<LocalState> = (0..=cap).map(LocalState::Grains).collect();
            Ok((Some(vec![d.clone(); n]), d))
        }
        (ModelSpec::DiscreteSandpile { .. } | ModelSpec::BirthDeath { .. }, None) => Err(
            Error::Config("oracle experiments on grain models need grain_cap".into()),
        ),
        _ => Err(Error::Config(format!(
            "model {} has no finite state space for the oracle",
            kernel.name()
        ))),
    }
}

/// Windows for a convergence ladder: centred intervals on one-dimensional
/// lattices, graph balls around `v` otherwise.
fn ladder(g: &Graph, points: Option<&PointSet>, v: VertexId, ms: &[usize]) -> Result<Vec<Rung>> {
    if let Some(p) = points.filter(|p| p.dim() == 1) {
        if p.index_of(&[0.0]) == Some(v) {
            return interval_ladder(p, ms);
        }
    }
    let dist = g.distances_from(v)?;
    Ok(ms
        .iter()
        .map(|&m| Rung {
            m,
            core: g
                .vertices()
                .filter(|&u| dist[u].is_some_and(|d| d <= m))
                .collect(),
        })
        .collect())
}

fn lrp_field(coupling: &crate::random_graphs::Coupling, p: f64, beta: f64) -> Result<(CouplingField, f64)> {
    let field = CouplingField::new(coupling.clone(), p, beta)?;
    let j_hat = field
        .analytic_sum_on_z(p)
        .ok_or_else(|| Error::Config("coupling is not p-summable on Z".into()))?;
    Ok((field, j_hat))
}

/// `Σ_{z ∈ Z∖{0}} |z|^{-s}`.
fn s_hat(s: f64) -> Result<f64> {
    if s > 1.0 {
        Ok(2.0 * zeta(s))
    } else {
        Err(Error::Config(format!("s must exceed 1, got {s}")))
    }
}

/// Runs one experiment entry.
pub fn run_experiment(cfg: &ExperimentConfig, e: &ExperimentSpec) -> Result<Vec<ExperimentReport>> {
    let seed = cfg.stream(e.name());
    let one = |r: Result<ExperimentReport>| r.map(|r| vec![r]);
    match e {
        ExperimentSpec::OracleMatch { system, t, replicas } => {
            let (gspec, mspec, ispec) = cfg.system(system)?;
            let (g, _) = graph_of(cfg, &gspec)?;
            let kernel = mspec.build()?;
            let (domains, _) = oracle_domains(kernel.as_ref(), &mspec, g.n(), system.grain_cap)?;
            let x0 = ispec.build(g.n(), cfg.seed)?;
            one(simulation_vs_oracle(
                kernel.as_ref(),
                &g,
                domains.as_deref(),
                &x0,
                *t,
                *replicas,
                seed,
            ))
        }
        ExperimentSpec::Generator {
            system,
            times,
            observables,
        } => {
            let (gspec, mspec, ispec) = cfg.system(system)?;
            let (g, _) = graph_of(cfg, &gspec)?;
            let kernel = mspec.build()?;
            let (domains, domain) = oracle_domains(kernel.as_ref(), &mspec, g.n(), system.grain_cap)?;
            let x0 = ispec.build(g.n(), cfg.seed)?;
            let obs = cylinder_indicators(g.n(), &domain, *observables);
            one(generator_consistency(
                kernel.as_ref(),
                &g,
                domains.as_deref(),
                &obs,
                &x0,
                times,
            ))
        }
        ExperimentSpec::WindowConvergence {
            system,
            vertex,
            horizon,
            ladder: ms,
            seeds,
            certify_m,
            min_certified,
            mode,
        } => {
            let (gspec, mspec, ispec) = cfg.system(system)?;
            let (g, points) = graph_of(cfg, &gspec)?;
            let kernel = mspec.build()?;
            let v = match vertex {
                Some(v) => *v,
                None => gspec.default_vertex()?,
            };
            let t = match horizon {
                Some(t) => *t,
                None => cfg.horizon()?,
            };
            let ms = ms
                .as_ref()
                .or(cfg.window_ladder.as_ref())
                .ok_or_else(|| Error::Config("window_convergence needs a ladder".into()))?;
            let rungs = ladder(&g, points.as_ref(), v, ms)?;
            let x0 = ispec.build(g.n(), cfg.seed)?;
            let seeds: Vec<u64> = (0..*seeds as u64).map(|i| replica_seed(seed, i)).collect();
            one(window_convergence(
                &g,
                kernel.as_ref(),
                &x0,
                v,
                t,
                &rungs,
                &seeds,
                *mode,
                *certify_m,
                *min_certified,
            ))
        }
        ExperimentSpec::LrpMoments {
            beta,
            coupling,
            p,
            radius,
            n_max,
            replicas,
        } => {
            let (field, j_hat) = lrp_field(coupling, *p, *beta)?;
            let points = PointSet::integer_lattice(1, *radius);
            one(lrp_moment_bound(&field, &points, j_hat, *n_max, *replicas, seed))
        }
        ExperimentSpec::LrpSawSum {
            beta,
            coupling,
            p,
            radius,
            n_max,
        } => {
            let (field, j_hat) = lrp_field(coupling, *p, *beta)?;
            let points = PointSet::integer_lattice(1, *radius);
            one(lrp_saw_sum_bound(&field, &points, j_hat, *n_max))
        }
        ExperimentSpec::GrgMoments {
            s,
            radius_law,
            radius,
            n_max,
            replicas,
        } => {
            let points = PointSet::integer_lattice(1, *radius);
            one(grg_moment_bound(radius_law, &points, *s, s_hat(*s)?, *n_max, *replicas, seed))
        }
        ExperimentSpec::GrgSawSum {
            s,
            radius_law,
            p,
            radius,
            n_max,
            replicas,
        } => {
            let points = PointSet::integer_lattice(1, *radius);
            one(grg_saw_sum_bound(
                radius_law,
                &points,
                *s,
                s_hat(*s)?,
                *p,
                *n_max,
                *replicas,
                seed,
            ))
        }
        ExperimentSpec::TrailGrowth {
            system,
            n_max,
            replicas,
            ratio_slack,
        } => {
            let (gspec, mspec, _) = cfg.system(system)?;
            let spec = gspec
                .random()
                .ok_or_else(|| Error::Config("trail_growth needs an lrp or grg graph".into()))?;
            let kernel = mspec.build()?;
            one(trail_growth(&spec, kernel.as_ref(), *n_max, *replicas, seed, *ratio_slack))
        }
        ExperimentSpec::Percolation {
            half_length,
            rate,
            delta,
            n_min,
            n_max,
            replicas,
            ratio,
            from_n,
            mode,
        } => {
            let g = Graph::path(2 * half_length + 1);
            let rates = vec![*rate; g.n()];
            one(percolation_suite(
                &g,
                &rates,
                *half_length,
                *delta,
                *n_min..=*n_max,
                *replicas,
                seed,
                *mode,
                *ratio,
                *from_n,
            ))
        }
        ExperimentSpec::GenerationPartition {
            samples,
            max_vertices,
        } => one(generation_suite(*samples, *max_vertices, seed)),
        ExperimentSpec::Conservation { min_events } => one(conservation_suite(*min_events, seed)),
    }
}

/// Experiments whose name matches `selection`, or all of them.
fn selected<'a>(cfg: &'a ExperimentConfig, selection: Option<&str>) -> Result<Vec<&'a ExperimentSpec>> {
    let picked: Vec<_> = cfg
        .experiments
        .iter()
        .filter(|e| selection.is_none_or(|s| e.name() == s))
        .collect();
    match selection {
        Some(s) if picked.is_empty() => Err(Error::Config(format!("no experiment named {s}"))),
        _ => Ok(picked),
    }
}

/// Runs the selected experiments in config order.
pub fn run_experiments(cfg: &ExperimentConfig, selection: Option<&str>) -> Result<Vec<ExperimentReport>> {
    let mut reports = Vec::new();
    for e in selected(cfg, selection)? {
        reports.extend(run_experiment(cfg, e)?);
    }
    Ok(merge_reports(reports))
}

#[derive(Serialize)]
struct ReportFile<'a> {
    schema_version: u32,
    seed: u64,
    passed: bool,
    reports: &'a [ExperimentReport],
}

pub struct VerifyOutcome {
    pub reports: Vec<ExperimentReport>,
    pub passed: bool,
    pub json: PathBuf,
    pub table: PathBuf,
}

/// Runs the experiments and writes `report.json` and `report.txt`.
pub fn cmd_verify(cfg: &ExperimentConfig, out: &Path, selection: Option<&str>) -> Result<VerifyOutcome> {
    let reports = run_experiments(cfg, selection)?;
    let passed = reports.iter().all(|r| r.passed);
    let json = out.join("report.json");
    let mut w = create(&json)?;
    serde_json::to_writer_pretty(
        &mut w,
        &ReportFile {
            schema_version: SCHEMA_VERSION,
            seed: cfg.seed,
            passed,
            reports: &reports,
        },
    )?;
    writeln!(w)?;
    w.flush()?;
    let table = out.join("report.txt");
    fs::write(&table, render_table(&reports))?;
    Ok(VerifyOutcome {
        reports,
        passed,
        json,
        table,
    })
}

#[derive(Serialize)]
struct SeriesRow<'a> {
    series: &'a str,
    key: String,
    value: f64,
    target: Option<f64>,
}

/// Writes `series.csv` in long format `series,key,value,target`: every
/// measurement of the selected experiments, then successive trail ratios
/// `raw(n+1)/raw(n)` when the config has a trails section.
pub fn cmd_plot_data(cfg: &ExperimentConfig, out: &Path, selection: Option<&str>) -> Result<PathBuf> {
    let reports = run_experiments(cfg, selection)?;
    let path = out.join("series.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    for r in &reports {
        for m in &r.measurements {
            w.serialize(SeriesRow {
                series: &r.id,
                key: m.name.clone(),
                value: m.value,
                target: m.target,
            })?;
        }
    }
    if cfg.trails.is_some() && selection.is_none() {
        for t in trail_tables(cfg)? {
            let series = format!("trails/v{}", t.vertex);
            for (kind, raw) in [("simple", &t.raw_simple), ("double", &t.raw_double)] {
                for (i, pair) in raw.windows(2).enumerate() {
                    if pair[0] > 0.0 {
                        w.serialize(SeriesRow {
                            series: &series,
                            key: format!("ratio_{kind}/{}", i + 3),
                            value: pair[1] / pair[0],
                            target: None,
                        })?;
                    }
                }
            }
        }
    }
    w.flush()?;
    Ok(path)
}
