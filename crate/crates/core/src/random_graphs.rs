//! Long-range percolation and geometric random graphs on explicit point sets.
//!
//! Both samplers draw every random quantity from a stream keyed by stable
//! point keys (see [`crate::rng`]), so nested windows sampled with the same
//! seed agree on every pair they share.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId};
use crate::rng::{coordinate_key, StreamKey};

/// A point with a stable key. Keys, not positions in a list, identify points
/// across windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub key: u64,
    pub coords: Vec<f64>,
}

/// Finite set of points in Euclidean space. Vertex `i` of a sampled graph is
/// `points[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    pub points: Vec<Point>,
    /// Uniform discreteness radius, when known.
    pub r_pack: Option<f64>,
    /// Covering radius, when known.
    pub r_cov: Option<f64>,
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

impl PointSet {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        let set = PointSet {
            points,
            r_pack: None,
            r_cov: None,
        };
        let mut keys: Vec<u64> = set.points.iter().map(|p| p.key).collect();
        keys.sort_unstable();
        if keys.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("point keys must be distinct".into()));
        }
        Ok(set)
    }

    /// `Z^d ∩ [-radius, radius]^d`, in lexicographic order of coordinates.
    pub fn integer_lattice(dim: usize, radius: i64) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        let side: Vec<i64> = (-radius..=radius).collect();
        let mut points = Vec::new();
        let mut idx = vec![0usize; dim];
        loop {
            let coords: Vec<i64> = idx.iter().map(|&i| side[i]).collect();
            points.push(Point {
                key: coordinate_key(&coords),
                coords: coords.iter().map(|&c| c as f64).collect(),
            });
            let mut d = dim;
            loop {
                if d == 0 {
                    return PointSet {
                        points,
                        r_pack: Some(0.5),
                        r_cov: Some((dim as f64).sqrt() / 2.0),
                    };
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < side.len() {
                    break;
                }
                idx[d] = 0;
            }
        }
    }

    /// Points `B k` (rows of `basis` are the lattice vectors, `k ∈ Z^d`) lying
    /// in the box `[-half_width, half_width]^d`.
    pub fn lattice_points(basis: &[Vec<f64>], half_width: f64) -> Result<Self> {
        let dim = basis.len();
        if dim == 0 || basis.iter().any(|row| row.len() != dim) {
            return Err(Error::InvalidParameter("basis must be a square matrix".into()));
        }
        // Columns of m are the basis vectors so that x = m k.
        let m = DMatrix::from_fn(dim, dim, |i, j| basis[j][i]);
        let inv = m
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidParameter("basis is singular".into()))?;
        // Coefficient bound from the box corners.
        let mut bound = 0.0f64;
        for corner in 0..(1usize << dim) {
            let x = nalgebra::DVector::from_fn(dim, |i, _| {
                if corner >> i & 1 == 1 {
                    half_width
                } else {
                    -half_width
                }
            });
            let k = &inv * x;
            bound = bound.max(k.amax());
        }
        let kmax = bound.ceil() as i64 + 1;
        let mut points = Vec::new();
        let mut k = vec![-kmax; dim];
        let eps = 1e-9 * half_width.max(1.0);
        loop {
            let kv = nalgebra::DVector::from_fn(dim, |i, _| k[i] as f64);
            let x = &m * kv;
            if x.iter().all(|c| c.abs() <= half_width + eps) {
                points.push(Point {
                    key: coordinate_key(&k),
                    coords: x.iter().copied().collect(),
                });
            }
            let mut d = dim;
            loop {
                if d == 0 {
                    points.sort_by(|a, b| {
                        a.coords
                            .partial_cmp(&b.coords)
                            .expect("coordinates are finite")
                    });
                    return PointSet::new(points);
                }
                d -= 1;
                k[d] += 1;
                if k[d] <= kmax {
                    break;
                }
                k[d] = -kmax;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, |p| p.coords.len())
    }

    pub fn distance(&self, i: VertexId, j: VertexId) -> f64 {
        distance(&self.points[i].coords, &self.points[j].coords)
    }

    /// Index of the point at the given coordinates, if present.
    pub fn index_of(&self, coords: &[f64]) -> Option<VertexId> {
        self.points
            .iter()
            .position(|p| distance(&p.coords, coords) < 1e-9)
    }

    /// Applies `map` to every coordinate vector, keeping keys.
    pub fn mapped<F: Fn(&[f64]) -> Vec<f64>>(&self, map: F) -> PointSet {
        PointSet {
            points: self
                .points
                .iter()
                .map(|p| Point {
                    key: p.key,
                    coords: map(&p.coords),
                })
                .collect(),
            r_pack: None,
            r_cov: None,
        }
    }
}

/// Coupling constants `J(u, v)` as a function of the points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Coupling {
    /// `J(u,v) = scale · |u - v|^{-exponent}`.
    Power {
        exponent: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `J ≡ 0`.
    Zero,
}

fn one() -> f64 {
    1.0
}

impl Coupling {
    pub fn evaluate(&self, a: &Point, b: &Point) -> f64 {
        match *self {
            Coupling::Power { exponent, scale } => {
                let d = distance(&a.coords, &b.coords);
                if d == 0.0 {
                    0.0
                } else {
                    scale * d.powf(-exponent)
                }
            }
            Coupling::Zero => 0.0,
        }
    }
}

/// Coupling field with summability exponent `p` and inverse temperature `beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingField {
    #[serde(rename = "J")]
    pub coupling: Coupling,
    pub p: f64,
    pub beta: f64,
}

impl CouplingField {
    pub fn new(coupling: Coupling, p: f64, beta: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!("p must exceed 1, got {p}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "beta must be positive, got {beta}"
            )));
        }
        Ok(CouplingField { coupling, p, beta })
    }

    pub fn j(&self, a: &Point, b: &Point) -> f64 {
        self.coupling.evaluate(a, b)
    }

    /// `P(a ~ b) = 1 - exp(-beta J(a, b))`.
    pub fn edge_probability(&self, a: &Point, b: &Point) -> f64 {
        -(-self.beta * self.j(a, b)).exp_m1()
    }

    /// Limiting uniform `q`-sum `sup_u Σ_v J(u,v)^{1/q}` on the full lattice
    /// `Z` when that is analytically available (power law in one dimension).
    pub fn analytic_sum_on_z(&self, q: f64) -> Option<f64> {
        match self.coupling {
            Coupling::Power { exponent, scale } => {
                let s = exponent / q;
                (s > 1.0).then(|| 2.0 * scale.powf(1.0 / q) * zeta(s))
            }
            Coupling::Zero => Some(0.0),
        }
    }
}

/// Riemann zeta for real `s > 1` (direct sum plus Euler–Maclaurin tail).
pub fn zeta(s: f64) -> f64 {
    assert!(s > 1.0, "zeta needs s > 1");
    let n = 2000.0f64;
    let head: f64 = (1..2000).map(|k| (k as f64).powf(-s)).sum();
    let tail = n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s) + s * n.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * n.powf(-s - 3.0) / 720.0;
    head + tail
}

fn lrp_uniform(seed: u64, a: u64, b: u64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    StreamKey::new(seed)
        .with_tag("lrp")
        .with(lo)
        .with(hi)
        .uniform()
}

/// Long-range percolation: `u ~ v` independently with probability
/// `1 - exp(-beta J(u,v))`. The uniform for a pair is keyed by
/// `(seed, min key, max key)`.
pub fn sample_lrp(points: &PointSet, field: &CouplingField, seed: u64) -> Graph {
    let n = points.len();
    let edges: Vec<(VertexId, VertexId)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|u| {
            let pu = &points.points[u];
            (u + 1..n).filter_map(move |v| {
                let pv = &points.points[v];
                let prob = field.edge_probability(pu, pv);
                (prob > 0.0 && lrp_uniform(seed, pu.key, pv.key) < prob).then_some((u, v))
            })
        })
        .collect();
    Graph::from_edges(n, &edges).expect("sampled edges are valid")
}

/// Neighbors of `v` in the LRP realization of [`sample_lrp`], without
/// sampling the other pairs.
pub fn lrp_neighbors(
    points: &PointSet,
    field: &CouplingField,
    seed: u64,
    v: VertexId,
) -> Vec<VertexId> {
    let pv = &points.points[v];
    (0..points.len())
        .filter(|&u| {
            if u == v {
                return false;
            }
            let pu = &points.points[u];
            let prob = field.edge_probability(pv, pu);
            prob > 0.0 && lrp_uniform(seed, pv.key, pu.key) < prob
        })
        .collect()
}

/// Distribution of the grain radius `Z`, with a declared bound `E[Z^n] ≤ K^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadiusLaw {
    /// Uniform on `[0, max]`; `E[Z^n] = max^n/(n+1) ≤ max^n`.
    Uniform { max: f64 },
    /// Point mass at `value`.
    Constant { value: f64 },
}

impl RadiusLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            RadiusLaw::Uniform { max } => max > 0.0 && max.is_finite(),
            RadiusLaw::Constant { value } => value >= 0.0 && value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid radius law {self:?}")))
        }
    }

    /// Declared moment constant `K ≥ 1` with `E[Z^n] ≤ K^n` for all `n`.
    pub fn moment_constant(&self) -> f64 {
        match *self {
            RadiusLaw::Uniform { max } => max.max(1.0),
            RadiusLaw::Constant { value } => value.max(1.0),
        }
    }

    /// Inverse-CDF draw from a uniform `u ∈ [0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            RadiusLaw::Uniform { max } => u * max,
            RadiusLaw::Constant { value } => value,
        }
    }

    /// `P(Z > x)`.
    pub fn survival(&self, x: f64) -> f64 {
        match *self {
            RadiusLaw::Uniform { max } => {
                if x < 0.0 {
                    1.0
                } else if x >= max {
                    0.0
                } else {
                    1.0 - x / max
                }
            }
            RadiusLaw::Constant { value } => {
                if value > x {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Exact `E[Z^n]`.
    pub fn moment(&self, n: i32) -> f64 {
        match *self {
            RadiusLaw::Uniform { max } => max.powi(n) / f64::from(n + 1),
            RadiusLaw::Constant { value } => value.powi(n),
        }
    }

    /// Monte Carlo check of `E[Z^n] ≤ K^n` for `n = 1..=n_max`: returns the
    /// empirical moments and whether each lies below `K^n` within 3σ.
    pub fn check_moment_bound(&self, samples: usize, n_max: i32, seed: u64) -> Vec<(f64, bool)> {
        let k = self.moment_constant();
        let draws: Vec<f64> = (0..samples as u64)
            .map(|i| self.quantile(StreamKey::new(seed).with_tag("zcheck").with(i).uniform()))
            .collect();
        (1..=n_max)
            .map(|n| {
                let vals: Vec<f64> = draws.iter().map(|z| z.powi(n)).collect();
                let (mean, se) = mean_and_se(&vals);
                (mean, mean <= k.powi(n) + 3.0 * se)
            })
            .collect()
    }
}

pub(crate) fn mean_and_se(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Grain radius of a point, keyed by `(seed, point key)`.
pub fn grain_radius(law: &RadiusLaw, seed: u64, key: u64) -> f64 {
    law.quantile(StreamKey::new(seed).with_tag("radius").with(key).uniform())
}

/// Geometric random graph: `u ~ v` iff `δ(u,v) < min(R_u, R_v)`.
pub fn sample_grg(points: &PointSet, law: &RadiusLaw, seed: u64) -> Graph {
    let radii: Vec<f64> = points
        .points
        .iter()
        .map(|p| grain_radius(law, seed, p.key))
        .collect();
    grg_from_radii(points, &radii)
}

pub fn grg_from_radii(points: &PointSet, radii: &[f64]) -> Graph {
    let n = points.len();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if points.distance(u, v) < radii[u].min(radii[v]) {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, &edges).expect("sampled edges are valid")
}

/// A finite-window supremum together with the window it was taken over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowSum {
    pub value: f64,
    pub argmax: Option<VertexId>,
    pub window_size: usize,
}

fn window_sup<F: Fn(VertexId) -> f64 + Sync>(n: usize, at: F) -> WindowSum {
    let best = (0..n)
        .into_par_iter()
        .map(|u| (at(u), u))
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX),
            |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );
    if n == 0 {
        WindowSum {
            value: 0.0,
            argmax: None,
            window_size: 0,
        }
    } else {
        WindowSum {
            value: best.0,
            argmax: Some(best.1),
            window_size: n,
        }
    }
}

/// `Σ_{v≠u} J(u,v)^{1/p}` at one point.
pub fn p_sum_at(field: &CouplingField, points: &PointSet, u: VertexId) -> f64 {
    let pu = &points.points[u];
    points
        .points
        .iter()
        .enumerate()
        .filter(|&(v, _)| v != u)
        .map(|(_, pv)| field.j(pu, pv).powf(1.0 / field.p))
        .sum()
}

/// Finite-window uniform `p`-sum `sup_u Σ_{v≠u} J(u,v)^{1/p}`.
pub fn p_sum(field: &CouplingField, points: &PointSet) -> WindowSum {
    window_sup(points.len(), |u| p_sum_at(field, points, u))
}

/// `Σ_{w≠v} δ(v,w)^{-s}` at one point.
pub fn s_sum_at(points: &PointSet, s: f64, v: VertexId) -> f64 {
    (0..points.len())
        .filter(|&w| w != v)
        .map(|w| points.distance(v, w).powf(-s))
        .sum()
}

/// Finite-window `S(V; s) = sup_v Σ_{w≠v} δ(v,w)^{-s}`.
pub fn s_sum(points: &PointSet, s: f64) -> Result<WindowSum> {
    if !(s > 1.0) {
        return Err(Error::InvalidParameter(format!("s must exceed 1, got {s}")));
    }
    Ok(window_sup(points.len(), |v| s_sum_at(points, s, v)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeloneReport {
    pub min_pairwise_distance: Option<f64>,
    pub uniformly_discrete: bool,
    pub probes: usize,
    /// Largest distance from a probe center to its nearest point.
    pub worst_probe_distance: Option<f64>,
    pub relatively_dense: bool,
}

impl DeloneReport {
    pub fn passed(&self) -> bool {
        self.uniformly_discrete && self.relatively_dense
    }
}

/// Checks the two Delone conditions on a finite window.
///
/// Uniform discreteness is checked exactly as `min pairwise distance ≥ 2 r_pack`.
/// Relative density is probed with `probes` random ball centers drawn from the
/// bounding box shrunk by `r_cov` on each side (so each probe ball lies inside
/// the window); each ball must contain a point.
pub fn delone_check(
    points: &PointSet,
    r_pack: f64,
    r_cov: f64,
    probes: usize,
    seed: u64,
) -> DeloneReport {
    let n = points.len();
    let mut min_d: Option<f64> = None;
    for u in 0..n {
        for v in u + 1..n {
            let d = points.distance(u, v);
            min_d = Some(min_d.map_or(d, |m| m.min(d)));
        }
    }
    let uniformly_discrete = min_d.is_none_or(|d| d >= 2.0 * r_pack);
    let dim = points.dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for p in &points.points {
        for (i, &c) in p.coords.iter().enumerate() {
            lo[i] = lo[i].min(c);
            hi[i] = hi[i].max(c);
        }
    }
    let inner: Vec<(f64, f64)> = lo
        .iter()
        .zip(&hi)
        .map(|(&l, &h)| (l + r_cov, h - r_cov))
        .collect();
    let feasible = n > 0 && inner.iter().all(|&(l, h)| l <= h);
    let mut worst: Option<f64> = None;
    let mut relatively_dense = true;
    let mut run = 0;
    if feasible {
        for i in 0..probes as u64 {
            let key = StreamKey::new(seed).with_tag("probe").with(i);
            let center: Vec<f64> = inner
                .iter()
                .enumerate()
                .map(|(d, &(l, h))| l + (h - l) * key.with(d as u64).uniform())
                .collect();
            let nearest = points
                .points
                .iter()
                .map(|p| distance(&p.coords, &center))
                .fold(f64::INFINITY, f64::min);
            worst = Some(worst.map_or(nearest, |w| w.max(nearest)));
            if nearest > r_cov {
                relatively_dense = false;
            }
            run += 1;
        }
    }
    DeloneReport {
        min_pairwise_distance: min_d,
        uniformly_discrete,
        probes: run,
        worst_probe_distance: worst,
        relatively_dense,
    }
}

/// Exact `Σ_{distinct v_1..v_n ≠ v} P(v, v_1, …, v_n is a SAW)^{1/p}` for
/// long-range percolation on a window. Edges are independent, so the
/// probability of a walk is the product of its edge probabilities.
pub fn lrp_saw_sum_exact(
    points: &PointSet,
    field: &CouplingField,
    v: VertexId,
    n: usize,
) -> f64 {
    let m = points.len();
    let weight: Vec<Vec<f64>> = (0..m)
        .map(|a| {
            (0..m)
                .map(|b| {
                    if a == b {
                        0.0
                    } else {
                        field
                            .edge_probability(&points.points[a], &points.points[b])
                            .powf(1.0 / field.p)
                    }
                })
                .collect()
        })
        .collect();
    tuple_sum(m, v, n, |path| {
        path.windows(2).map(|w| weight[w[0]][w[1]]).product()
    })
}

/// Probability that `v_0, …, v_n` (distinct points) is a path of the
/// geometric random graph. Each vertex constrains only its own radius, so the
/// probability factorizes over vertices.
pub fn grg_saw_probability(points: &PointSet, law: &RadiusLaw, path: &[VertexId]) -> f64 {
    let k = path.len();
    if k < 2 {
        return 1.0;
    }
    let d: Vec<f64> = path
        .windows(2)
        .map(|w| points.distance(w[0], w[1]))
        .collect();
    (0..k)
        .map(|i| {
            let need = match (i.checked_sub(1).map(|j| d[j]), d.get(i)) {
                (Some(a), Some(&b)) => a.max(b),
                (Some(a), None) => a,
                (None, Some(&b)) => b,
                (None, None) => unreachable!(),
            };
            law.survival(need)
        })
        .product()
}

/// Exact `Σ_{distinct v_1..v_n ≠ v} P(v, v_1, …, v_n is a SAW)^{1/p}` for the
/// geometric random graph, using the product form of the walk probability.
pub fn grg_saw_sum_exact(points: &PointSet, law: &RadiusLaw, p: f64, v: VertexId, n: usize) -> f64 {
    tuple_sum(points.len(), v, n, |path| {
        grg_saw_probability(points, law, path).powf(1.0 / p)
    })
}

/// Sum of `f(path)` over ordered tuples of distinct vertices `v, v_1..v_n`.
/// Branches whose partial weight is zero are pruned by evaluating `f` on
/// every prefix.
fn tuple_sum<F: Fn(&[VertexId]) -> f64>(m: usize, v: VertexId, n: usize, f: F) -> f64 {
    fn rec<F: Fn(&[VertexId]) -> f64>(
        m: usize,
        n: usize,
        path: &mut Vec<VertexId>,
        used: &mut [bool],
        f: &F,
    ) -> f64 {
        if path.len() == n + 1 {
            return f(path);
        }
        let mut total = 0.0;
        for w in 0..m {
            if used[w] {
                continue;
            }
            path.push(w);
            if f(path) > 0.0 {
                used[w] = true;
                total += rec(m, n, path, used, f);
                used[w] = false;
            }
            path.pop();
        }
        total
    }
    let mut used = vec![false; m];
    used[v] = true;
    rec(m, n, &mut vec![v], &mut used, &f)
}

/// Configs for the two random graph models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum RandomGraphSpec {
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

/// `Z^dim ∩ [-radius, radius]^dim`, or the lattice spanned by `basis` inside
/// the same box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeWindow {
    pub dim: usize,
    pub radius: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<Vec<Vec<f64>>>,
}

impl LatticeWindow {
    pub fn points(&self) -> Result<PointSet> {
        match &self.basis {
            None => Ok(PointSet::integer_lattice(self.dim, self.radius)),
            Some(b) => {
                if b.len() != self.dim {
                    return Err(Error::InvalidParameter(
                        "basis dimension does not match window dim".into(),
                    ));
                }
                PointSet::lattice_points(b, self.radius as f64)
            }
        }
    }
}

impl RandomGraphSpec {
    pub fn points(&self) -> Result<PointSet> {
        match self {
            RandomGraphSpec::Lrp { window, .. } | RandomGraphSpec::Grg { window, .. } => {
                window.points()
            }
        }
    }

    pub fn sample(&self, seed: u64) -> Result<(PointSet, Graph)> {
        let points = self.points()?;
        let graph = match self {
            RandomGraphSpec::Lrp {
                beta, coupling, p, ..
            } => {
                let field = CouplingField::new(coupling.clone(), *p, *beta)?;
                sample_lrp(&points, &field, seed)
            }
            RandomGraphSpec::Grg { radius_law, s, .. } => {
                radius_law.validate()?;
                if !(*s > 1.0) {
                    return Err(Error::InvalidParameter(format!("s must exceed 1, got {s}")));
                }
                sample_grg(&points, radius_law, seed)
            }
        };
        Ok((points, graph))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn power(exponent: f64, p: f64, beta: f64) -> CouplingField {
        CouplingField::new(Coupling::Power { exponent, scale: 1.0 }, p, beta).unwrap()
    }

    #[test]
    fn zero_coupling_gives_edgeless_graph() {
        let pts = PointSet::integer_lattice(1, 20);
        let f = CouplingField::new(Coupling::Zero, 1.5, 1.0).unwrap();
        assert_eq!(sample_lrp(&pts, &f, 9).edge_count(), 0);
        assert_eq!(p_sum(&f, &pts).value, 0.0);
    }

    #[test]
    fn large_beta_forces_edges() {
        let pts = PointSet::integer_lattice(1, 3);
        let f = power(3.0, 1.5, 1e6);
        let g = sample_lrp(&pts, &f, 1);
        assert_eq!(g.edge_count(), 7 * 6 / 2);
    }

    #[test]
    fn lrp_edge_frequency_matches_probability() {
        let pts = PointSet::integer_lattice(1, 2);
        let f = power(3.0, 1.5, 1.0);
        let a = pts.index_of(&[0.0]).unwrap();
        let b = pts.index_of(&[1.0]).unwrap();
        let trials = 100_000u64;
        let hits = (0..trials)
            .filter(|&s| lrp_neighbors(&pts, &f, s, a).contains(&b))
            .count() as f64;
        let p = 1.0 - (-1.0f64).exp();
        let sd = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((hits / trials as f64 - p).abs() < 3.0 * sd);
    }

    #[test]
    fn lrp_is_consistent_across_nested_windows() {
        let f = power(2.5, 1.2, 2.0);
        let small = PointSet::integer_lattice(1, 10);
        let big = PointSet::integer_lattice(1, 40);
        let gs = sample_lrp(&small, &f, 77);
        let gb = sample_lrp(&big, &f, 77);
        let map: Vec<_> = small
            .points
            .iter()
            .map(|p| big.index_of(&p.coords).unwrap())
            .collect();
        for u in 0..small.len() {
            for v in 0..small.len() {
                assert_eq!(gs.has_edge(u, v), gb.has_edge(map[u], map[v]));
            }
            assert_eq!(lrp_neighbors(&small, &f, 77, u), gs.neighbors(u));
        }
    }

    #[test]
    fn grg_edge_rule() {
        let pts = PointSet::new(vec![
            Point { key: 1, coords: vec![0.0] },
            Point { key: 2, coords: vec![2.0] },
        ])
        .unwrap();
        assert_eq!(grg_from_radii(&pts, &[3.0, 1.5]).edge_count(), 0);
        assert_eq!(grg_from_radii(&pts, &[3.0, 2.5]).edge_count(), 1);
        // strict inequality
        assert_eq!(grg_from_radii(&pts, &[2.0, 2.0]).edge_count(), 0);
        let z = PointSet::integer_lattice(1, 5);
        assert_eq!(sample_grg(&z, &RadiusLaw::Constant { value: 0.0 }, 3).edge_count(), 0);
        // constant radius 1.5: nearest-neighbor graph on the line
        let g = sample_grg(&z, &RadiusLaw::Constant { value: 1.5 }, 3);
        assert_eq!(g, Graph::path(11));
    }

    #[test]
    fn uniform_law_moments() {
        let law = RadiusLaw::Uniform { max: 3.0 };
        for (n, (m, ok)) in law.check_moment_bound(50_000, 6, 4).into_iter().enumerate() {
            let exact = law.moment(n as i32 + 1);
            assert!(ok);
            assert!((m - exact).abs() < 0.05 * exact, "n={} m={m} exact={exact}", n + 1);
        }
        assert!((law.survival(2.0) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn p_and_s_sums_on_z() {
        let f = power(3.0, 1.5, 1.0);
        let n = 10_000;
        let pts = PointSet::integer_lattice(1, n);
        let center = pts.index_of(&[0.0]).unwrap();
        let val = p_sum_at(&f, &pts, center);
        assert!((val - PI * PI / 3.0).abs() < 1e-3);
        assert!((f.analytic_sum_on_z(1.5).unwrap() - PI * PI / 3.0).abs() < 1e-10);
        assert!((s_sum_at(&pts, 2.0, center) - PI * PI / 3.0).abs() < 1e-3);
        // the window supremum sits at the center
        let small = PointSet::integer_lattice(1, 30);
        let sup = p_sum(&f, &small);
        assert_eq!(sup.argmax, small.index_of(&[0.0]));
        assert_eq!(sup.window_size, 61);
        // monotone in the window
        let bigger = PointSet::integer_lattice(1, 60);
        assert!(p_sum(&f, &bigger).value >= sup.value);
        // single point windows
        let one = PointSet::integer_lattice(1, 0);
        assert_eq!(p_sum(&f, &one).value, 0.0);
        assert_eq!(s_sum(&one, 2.0).unwrap().value, 0.0);
        let two = PointSet::new(vec![
            Point { key: 1, coords: vec![0.0, 0.0] },
            Point { key: 2, coords: vec![3.0, 4.0] },
        ])
        .unwrap();
        assert!((s_sum(&two, 2.0).unwrap().value - 1.0 / 25.0).abs() < 1e-15);
    }

    #[test]
    fn zeta_values() {
        assert!((zeta(2.0) - PI * PI / 6.0).abs() < 1e-12);
        assert!((zeta(3.0) - 1.202_056_903_159_594_3).abs() < 1e-12);
        assert!((zeta(4.0) - PI.powi(4) / 90.0).abs() < 1e-12);
    }

    #[test]
    fn lattices() {
        let z2 = PointSet::integer_lattice(2, 2);
        assert_eq!(z2.len(), 25);
        let id = PointSet::lattice_points(&[vec![1.0, 0.0], vec![0.0, 1.0]], 2.0).unwrap();
        assert_eq!(id.len(), 25);
        assert_eq!(PointSet::integer_lattice(1, 4).len(), 9);
        // Sheared basis with unit covolume: count ≈ box area.
        let sheared =
            PointSet::lattice_points(&[vec![1.0, 0.0], vec![0.5, 1.0]], 20.0).unwrap();
        let area = 40.0 * 40.0;
        let rel = (sheared.len() as f64 - area).abs() / area;
        assert!(rel < 0.06, "count {} vs {area}", sheared.len());
        // brute force over a generous coefficient range
        let mut brute = 0;
        for a in -60i64..=60 {
            for b in -60i64..=60 {
                let x = a as f64 + 0.5 * b as f64;
                let y = b as f64;
                if x.abs() <= 20.0 + 1e-9 && y.abs() <= 20.0 + 1e-9 {
                    brute += 1;
                }
            }
        }
        assert_eq!(sheared.len(), brute);
        assert!(PointSet::lattice_points(&[vec![1.0, 2.0], vec![2.0, 4.0]], 3.0).is_err());
    }

    #[test]
    fn delone_checks() {
        let z2 = PointSet::integer_lattice(2, 6);
        let eps = 1e-6;
        assert!(delone_check(&z2, 0.5 - eps, 2f64.sqrt() / 2.0 + eps, 2_000, 1).passed());
        // a covering radius below the hole radius must fail some probe
        assert!(!delone_check(&z2, 0.5 - eps, 0.5, 2_000, 1).relatively_dense);

        let iid = PointSet::new(
            (0..200u64)
                .map(|i| Point {
                    key: i,
                    coords: vec![
                        10.0 * StreamKey::new(5).with(i).with(0).uniform(),
                        10.0 * StreamKey::new(5).with(i).with(1).uniform(),
                    ],
                })
                .collect(),
        )
        .unwrap();
        assert!(!delone_check(&iid, 0.2, 2.0, 100, 2).uniformly_discrete);

        let single = PointSet::integer_lattice(2, 0);
        assert!(delone_check(&single, 0.5, 1e6, 10, 3).passed());
    }

    #[test]
    fn bilipschitz_scaling_bound() {
        // Φ(x) = K x has bi-Lipschitz constant K, so S(V₂;s) ≤ K^s S(V₁;s).
        let v1 = PointSet::integer_lattice(2, 5);
        for &k in &[1.5f64, 2.0, 3.0] {
            let v2 = v1.mapped(|c| c.iter().map(|x| x * k).collect());
            for &s in &[2.0f64, 3.0] {
                let s1 = s_sum(&v1, s).unwrap().value;
                let s2 = s_sum(&v2, s).unwrap().value;
                assert!(s2 <= k.powf(s) * s1 * (1.0 + 1e-12));
                assert!(s1 <= k.powf(s) * s2 * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn exact_lrp_saw_sum_small_cases() {
        let pts = PointSet::integer_lattice(1, 2);
        let f = power(3.0, 1.5, 1.0);
        let v = pts.index_of(&[0.0]).unwrap();
        let n1: f64 = (0..pts.len())
            .filter(|&u| u != v)
            .map(|u| f.edge_probability(&pts.points[v], &pts.points[u]).powf(1.0 / 1.5))
            .sum();
        assert!((lrp_saw_sum_exact(&pts, &f, v, 1) - n1).abs() < 1e-14);
        let zero = CouplingField::new(Coupling::Zero, 1.5, 1.0).unwrap();
        assert_eq!(lrp_saw_sum_exact(&pts, &zero, v, 2), 0.0);
    }

    #[test]
    fn grg_walk_probability_matches_monte_carlo() {
        let pts = PointSet::integer_lattice(1, 3);
        let law = RadiusLaw::Uniform { max: 3.0 };
        let path = [
            pts.index_of(&[0.0]).unwrap(),
            pts.index_of(&[1.0]).unwrap(),
            pts.index_of(&[-1.0]).unwrap(),
        ];
        let exact = grg_saw_probability(&pts, &law, &path);
        // (1 - 1/3) * (1 - 2/3) * (1 - 2/3)
        assert!((exact - 2.0 / 27.0).abs() < 1e-15);
        let trials = 40_000u64;
        let hits = (0..trials)
            .filter(|&s| {
                let g = sample_grg(&pts, &law, s);
                g.has_edge(path[0], path[1]) && g.has_edge(path[1], path[2])
            })
            .count() as f64;
        let sd = (exact * (1.0 - exact) / trials as f64).sqrt();
        assert!((hits / trials as f64 - exact).abs() < 4.0 * sd);
    }

    #[test]
    fn spec_json_round_trip() {
        let text = r#"{"model":"lrp","beta":1.0,"J":{"kind":"power","exponent":3.0},"p":1.5,"window":{"dim":1,"radius":200}}"#;
        let spec: RandomGraphSpec = serde_json::from_str(text).unwrap();
        let (pts, g) = spec.sample(1).unwrap();
        assert_eq!(pts.len(), 401);
        assert_eq!(g.n(), 401);
        let grg: RandomGraphSpec = serde_json::from_str(
            r#"{"model":"grg","s":2,"radius_law":{"kind":"uniform","max":3},"window":{"dim":2,"radius":3}}"#,
        )
        .unwrap();
        assert_eq!(grg.sample(1).unwrap().1.n(), 49);
    }
}
