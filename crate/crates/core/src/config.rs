//! Versioned JSON experiment configs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId};
use crate::graphical::Mode;
use crate::ips::{LocalState, ModelSpec};
use crate::random_graphs::{Coupling, LatticeWindow, PointSet, RadiusLaw, RandomGraphSpec};
use crate::rng::StreamKey;
use crate::verify::GENERATOR_TIMES;

pub const SCHEMA_VERSION: u32 = 1;

/// Where the graph comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    Explicit {
        n: usize,
        edges: Vec<(VertexId, VertexId)>,
    },
    /// Graph JSON file, relative to the config file.
    File { path: PathBuf },
    Path { n: usize },
    Cycle { n: usize },
    Complete { n: usize },
    Lrp {
        beta: f64,
        #[serde(rename = "J")]
        coupling: Coupling,
        p: f64,
        window: LatticeWindow,
    },
    Grg {
        s: f64,
        radius_law: RadiusLaw,
        window: LatticeWindow,
    },
}

impl GraphSpec {
    /// The random graph model behind an `lrp` or `grg` spec.
    pub fn random(&self) -> Option<RandomGraphSpec> {
        match self {
            GraphSpec::Lrp {
                beta,
                coupling,
                p,
                window,
            } => Some(RandomGraphSpec::Lrp {
                beta: *beta,
                coupling: coupling.clone(),
                p: *p,
                window: window.clone(),
            }),
            GraphSpec::Grg {
                s,
                radius_law,
                window,
            } => Some(RandomGraphSpec::Grg {
                s: *s,
                radius_law: radius_law.clone(),
                window: window.clone(),
            }),
            _ => None,
        }
    }

    /// The graph, and the lattice points behind it for random models.
    /// Random graphs are sampled with `seed`.
    pub fn build(&self, seed: u64) -> Result<(Graph, Option<PointSet>)> {
        if let Some(r) = self.random() {
            let (points, g) = r.sample(seed)?;
            return Ok((g, Some(points)));
        }
        let g = match self {
            GraphSpec::Explicit { n, edges } => Graph::from_edges(*n, edges)?,
            GraphSpec::File { path } => Graph::from_json(&std::fs::read_to_string(path)?)?,
            GraphSpec::Path { n } => Graph::path(*n),
            GraphSpec::Cycle { n } => Graph::cycle(*n),
            GraphSpec::Complete { n } => Graph::complete(*n),
            GraphSpec::Lrp { .. } | GraphSpec::Grg { .. } => unreachable!(),
        };
        Ok((g, None))
    }

    /// Vertex at the lattice origin, or 0 for explicit graphs.
    pub fn default_vertex(&self) -> Result<VertexId> {
        match self.random() {
            Some(r) => {
                let points = r.points()?;
                points
                    .index_of(&vec![0.0; points.dim()])
                    .ok_or_else(|| Error::Config("lattice window does not contain the origin".into()))
            }
            None => Ok(0),
        }
    }
}

/// Initial configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Constant { state: LocalState },
    Explicit { states: Vec<LocalState> },
    /// Independent spins, 1 with probability `p`.
    RandomSpins { p: f64 },
    /// Independent grain counts uniform on `0..=max`.
    RandomGrains { max: u64 },
    /// Independent masses uniform on `[0, max)`.
    RandomMass { max: f64 },
}

impl InitialSpec {
    /// Default for a model: fair spins, grain counts up to 4, masses
    /// below 2, urns at `(1, 1)`, empty birth-death sites.
    pub fn default_for(model: &ModelSpec) -> Self {
        match model {
            ModelSpec::Voter { .. } | ModelSpec::Contact { .. } => InitialSpec::RandomSpins { p: 0.5 },
            ModelSpec::DiscreteSandpile { .. } => InitialSpec::RandomGrains { max: 4 },
            ModelSpec::DivisibleSandpile { .. } => InitialSpec::RandomMass { max: 2.0 },
            ModelSpec::Urn { .. } => InitialSpec::Constant {
                state: LocalState::Urn { white: 1, black: 1 },
            },
            ModelSpec::BirthDeath { .. } => InitialSpec::Constant {
                state: LocalState::Grains(0),
            },
        }
    }

    pub fn build(&self, n: usize, seed: u64) -> Result<Vec<LocalState>> {
        let key = StreamKey::new(seed).with_tag("initial");
        let u = |v: usize| key.with(v as u64).uniform();
        Ok(match self {
            InitialSpec::Constant { state } => vec![*state; n],
            InitialSpec::Explicit { states } => {
                if states.len() != n {
                    return Err(Error::Config(format!(
                        "initial configuration has {} sites, graph has {n}",
                        states.len()
                    )));
                }
                states.clone()
            }
            InitialSpec::RandomSpins { p } => (0..n).map(|v| LocalState::Spin(u8::from(u(v) < *p))).collect(),
            InitialSpec::RandomGrains { max } => (0..n)
                .map(|v| LocalState::Grains(((u(v) * (*max + 1) as f64) as u64).min(*max)))
                .collect(),
            InitialSpec::RandomMass { max } => (0..n).map(|v| LocalState::Mass(u(v) * max)).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrailsSpec {
    pub n_max: usize,
    /// Vertices to tabulate; all vertices when absent.
    #[serde(default)]
    pub vertices: Option<Vec<VertexId>>,
}

/// Graph and model for experiments that run on one system. Missing fields
/// fall back to the top-level config.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(default)]
    pub graph: Option<GraphSpec>,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub initial: Option<InitialSpec>,
    /// Grain cap of the oracle state space for grain-valued models.
    #[serde(default)]
    pub grain_cap: Option<u64>,
}

fn default_times() -> Vec<f64> {
    GENERATOR_TIMES.to_vec()
}
fn five() -> usize {
    5
}
fn default_ratio() -> f64 {
    0.7
}

/// One entry of the experiment list; the tag is the name used by
/// `--experiment`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentSpec {
    OracleMatch {
        #[serde(default)]
        system: SystemSpec,
        t: f64,
        replicas: usize,
    },
    Generator {
        #[serde(default)]
        system: SystemSpec,
        #[serde(default = "default_times")]
        times: Vec<f64>,
        /// Number of cylinder indicators, in canonical order.
        #[serde(default = "five")]
        observables: usize,
    },
    WindowConvergence {
        #[serde(default)]
        system: SystemSpec,
        #[serde(default)]
        vertex: Option<VertexId>,
        #[serde(default)]
        horizon: Option<f64>,
        #[serde(default)]
        ladder: Option<Vec<usize>>,
        seeds: usize,
        certify_m: usize,
        min_certified: usize,
        #[serde(default)]
        mode: Mode,
    },
    LrpMoments {
        beta: f64,
        #[serde(rename = "J")]
        coupling: Coupling,
        p: f64,
        radius: i64,
        n_max: u32,
        replicas: usize,
    },
    LrpSawSum {
        beta: f64,
        #[serde(rename = "J")]
        coupling: Coupling,
        p: f64,
        radius: i64,
        n_max: usize,
    },
    GrgMoments {
        s: f64,
        radius_law: RadiusLaw,
        radius: i64,
        n_max: u32,
        replicas: usize,
    },
    GrgSawSum {
        s: f64,
        radius_law: RadiusLaw,
        p: f64,
        radius: i64,
        n_max: usize,
        replicas: usize,
    },
    TrailGrowth {
        #[serde(default)]
        system: SystemSpec,
        n_max: usize,
        replicas: usize,
        ratio_slack: f64,
    },
    Percolation {
        /// Path `[-half_length, half_length]` around the tail vertex.
        half_length: usize,
        rate: f64,
        delta: f64,
        n_min: usize,
        n_max: usize,
        replicas: usize,
        #[serde(default = "default_ratio")]
        ratio: f64,
        from_n: usize,
        #[serde(default)]
        mode: Mode,
    },
    GenerationPartition {
        samples: usize,
        max_vertices: usize,
    },
    Conservation {
        min_events: usize,
    },
}

impl ExperimentSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentSpec::OracleMatch { .. } => "oracle_match",
            ExperimentSpec::Generator { .. } => "generator",
            ExperimentSpec::WindowConvergence { .. } => "window_convergence",
            ExperimentSpec::LrpMoments { .. } => "lrp_moments",
            ExperimentSpec::LrpSawSum { .. } => "lrp_saw_sum",
            ExperimentSpec::GrgMoments { .. } => "grg_moments",
            ExperimentSpec::GrgSawSum { .. } => "grg_saw_sum",
            ExperimentSpec::TrailGrowth { .. } => "trail_growth",
            ExperimentSpec::Percolation { .. } => "percolation",
            ExperimentSpec::GenerationPartition { .. } => "generation_partition",
            ExperimentSpec::Conservation { .. } => "conservation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Master seed; every random stream of a run derives from it.
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub graph: Option<GraphSpec>,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub initial: Option<InitialSpec>,
    /// Core of the simulation window; the whole graph when absent.
    #[serde(default)]
    pub window: Option<Vec<VertexId>>,
    /// Default ladder for window convergence.
    #[serde(default)]
    pub window_ladder: Option<Vec<usize>>,
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub trails: Option<TrailsSpec>,
    #[serde(default)]
    pub experiments: Vec<ExperimentSpec>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {}, expected {SCHEMA_VERSION}",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    /// Reads a config and resolves file references against its directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base)?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) -> Result<()> {
        let mut specs: Vec<&mut GraphSpec> = self.graph.iter_mut().collect();
        for e in &mut self.experiments {
            if let ExperimentSpec::OracleMatch { system, .. }
            | ExperimentSpec::Generator { system, .. }
            | ExperimentSpec::WindowConvergence { system, .. }
            | ExperimentSpec::TrailGrowth { system, .. } = e
            {
                specs.extend(system.graph.iter_mut());
            }
        }
        for spec in specs {
            if let GraphSpec::File { path } = spec {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
                if !path.exists() {
                    return Err(Error::Config(format!(
                        "graph file {} does not exist",
                        path.display()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn graph_spec(&self) -> Result<&GraphSpec> {
        self.graph
            .as_ref()
            .ok_or_else(|| Error::Config("config has no graph".into()))
    }

    pub fn model_spec(&self) -> Result<&ModelSpec> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::Config("config has no model".into()))
    }

    pub fn horizon(&self) -> Result<f64> {
        self.horizon
            .ok_or_else(|| Error::Config("config has no horizon".into()))
    }

    /// Fills the gaps of an experiment's system from the top level.
    pub fn system(&self, s: &SystemSpec) -> Result<(GraphSpec, ModelSpec, InitialSpec)> {
        let graph = match &s.graph {
            Some(g) => g.clone(),
            None => self.graph_spec()?.clone(),
        };
        let model = match &s.model {
            Some(m) => m.clone(),
            None => self.model_spec()?.clone(),
        };
        let initial = s
            .initial
            .clone()
            .or_else(|| self.initial.clone())
            .unwrap_or_else(|| InitialSpec::default_for(&model));
        Ok((graph, model, initial))
    }

    /// Stream seed for one named part of a run.
    pub fn stream(&self, name: &str) -> u64 {
        StreamKey::new(self.seed).with_tag(name).raw()
    }
}
