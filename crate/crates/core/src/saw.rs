//! Self-avoiding walks, remnant walks on the 2-step graph, and jump rate trails.
//!
//! A walk `γ = v_0, …, v_n` in the 2-step graph `G⁺` is a *remnant* SAW when
//! every hop that is not an edge of `G` can be bridged by a common
//! `G`-neighbor `u_j`, with all bridges distinct from each other and from the
//! walk itself, so that re-inserting them yields a SAW in `G`.
//!
//! Trails are reported for finite `n` only. For a SAW `v_0, …, v_n` the weight
//! is `c(v_1)·…·c(v_{n-1})` (interior vertices); the raw sum over all such
//! walks is stored alongside its `(n-1)`-th root.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId};

/// Default upper bound on enumerated walk length.
pub const DEFAULT_ENUMERATION_CAP: usize = 12;

/// Environment variable overriding [`DEFAULT_ENUMERATION_CAP`].
pub const CAP_ENV_VAR: &str = "PARTICLE_FORGE_CAP_N";

/// Walks materialized by a single `enumerate_*` call are limited to this many.
pub const MAX_MATERIALIZED_WALKS: usize = 20_000_000;

/// Current enumeration cap, honoring `PARTICLE_FORGE_CAP_N`.
pub fn enumeration_cap() -> usize {
    std::env::var(CAP_ENV_VAR)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_ENUMERATION_CAP)
}

fn check_cap(n: usize) -> Result<()> {
    let cap = enumeration_cap();
    if n > cap {
        Err(Error::EnumerationCap { requested: n, cap })
    } else {
        Ok(())
    }
}

/// Ordered vertex sequence. Its length is the number of hops.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Walk {
    pub vertices: Vec<VertexId>,
}

impl Walk {
    pub fn new(vertices: Vec<VertexId>) -> Self {
        Walk { vertices }
    }

    pub fn len(&self) -> usize {
        self.vertices.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() <= 1
    }

    pub fn first(&self) -> Option<VertexId> {
        self.vertices.first().copied()
    }

    pub fn last(&self) -> Option<VertexId> {
        self.vertices.last().copied()
    }

    pub fn is_self_avoiding(&self) -> bool {
        let mut seen = self.vertices.clone();
        seen.sort_unstable();
        seen.windows(2).all(|w| w[0] != w[1])
    }

    /// True when consecutive vertices are adjacent in `host`.
    pub fn is_path_in(&self, host: &Graph) -> bool {
        self.vertices.iter().all(|&v| host.contains(v))
            && self.vertices.windows(2).all(|w| host.has_edge(w[0], w[1]))
    }

    pub fn is_saw_in(&self, host: &Graph) -> bool {
        self.is_path_in(host) && self.is_self_avoiding()
    }
}

impl From<Vec<VertexId>> for Walk {
    fn from(vertices: Vec<VertexId>) -> Self {
        Walk { vertices }
    }
}

/// Depth-first traversal of all SAWs in `g` from `v` up to length `max_len`.
/// `visit(prefix)` is called for every walk of length `1..=max_len` in
/// lexicographic preorder.
fn for_each_saw<F: FnMut(&[VertexId])>(g: &Graph, v: VertexId, max_len: usize, mut visit: F) {
    walk_saws(g, v, max_len, |w| {
        visit(w);
        true
    });
}

/// Pruned variant of [`for_each_saw`]: `visit` returns whether to descend.
pub(crate) fn walk_saws<F: FnMut(&[VertexId]) -> bool>(
    g: &Graph,
    v: VertexId,
    max_len: usize,
    mut visit: F,
) {
    let mut on_walk = vec![false; g.n()];
    let mut walk = vec![v];
    on_walk[v] = true;
    fn rec<F: FnMut(&[VertexId]) -> bool>(
        g: &Graph,
        max_len: usize,
        walk: &mut Vec<VertexId>,
        on_walk: &mut [bool],
        visit: &mut F,
    ) {
        let last = *walk.last().expect("walk is never empty");
        for &w in g.neighbors(last) {
            if on_walk[w] {
                continue;
            }
            walk.push(w);
            on_walk[w] = true;
            if visit(walk) && walk.len() <= max_len {
                rec(g, max_len, walk, on_walk, visit);
            }
            on_walk[w] = false;
            walk.pop();
        }
    }
    if max_len >= 1 {
        rec(g, max_len, &mut walk, &mut on_walk, &mut visit);
    }
}

/// All SAWs of exactly `n` hops from `v`, lexicographically ordered.
pub fn enumerate_saws(g: &Graph, v: VertexId, n: usize) -> Result<Vec<Walk>> {
    g.check_vertex(v)?;
    if n == 0 {
        return Err(Error::InvalidParameter("walk length must be at least 1".into()));
    }
    check_cap(n)?;
    let mut out = Vec::new();
    let mut overflow = false;
    for_each_saw(g, v, n, |w| {
        if w.len() == n + 1 && !overflow {
            if out.len() == MAX_MATERIALIZED_WALKS {
                overflow = true;
            } else {
                out.push(Walk::new(w.to_vec()));
            }
        }
    });
    if overflow {
        return Err(Error::TooManyWalks {
            limit: MAX_MATERIALIZED_WALKS,
        });
    }
    Ok(out)
}

/// `|SAW_n(v)|` for `n = 1..=n_max`.
pub fn count_saws(g: &Graph, v: VertexId, n_max: usize) -> Result<Vec<u64>> {
    g.check_vertex(v)?;
    check_cap(n_max)?;
    let mut counts = vec![0u64; n_max];
    for_each_saw(g, v, n_max, |w| counts[w.len() - 2] += 1);
    Ok(counts)
}

/// Estimates `|SAW_n(v)|^{1/n}` for `n = 1..=n_max`.
pub fn connective_constant_estimate(g: &Graph, v: VertexId, n_max: usize) -> Result<Vec<f64>> {
    let counts = count_saws(g, v, n_max)?;
    Ok(counts
        .iter()
        .enumerate()
        .map(|(i, &c)| (c as f64).powf(1.0 / (i + 1) as f64))
        .collect())
}

/// Finds distinct bridging vertices for the gaps of a `G⁺`-walk.
///
/// `gaps[j]` lists the candidate bridges for the j-th non-`G`-edge hop.
/// Returns one chosen bridge per gap, or `None` if no system of distinct
/// representatives exists.
fn assign_bridges(gaps: &[Vec<VertexId>]) -> Option<Vec<VertexId>> {
    // Most constrained gap first; the search is exhaustive either way.
    let mut order: Vec<usize> = (0..gaps.len()).collect();
    order.sort_by_key(|&j| (gaps[j].len(), j));
    let mut chosen = vec![usize::MAX; gaps.len()];
    fn rec(
        gaps: &[Vec<VertexId>],
        order: &[usize],
        depth: usize,
        chosen: &mut [VertexId],
    ) -> bool {
        if depth == order.len() {
            return true;
        }
        let j = order[depth];
        for &u in &gaps[j] {
            if order[..depth].iter().any(|&i| chosen[i] == u) {
                continue;
            }
            chosen[j] = u;
            if rec(gaps, order, depth + 1, chosen) {
                return true;
            }
        }
        chosen[j] = usize::MAX;
        false
    }
    rec(gaps, &order, 0, &mut chosen).then_some(chosen)
}

/// Bridge assignment witnessing that `walk` (a SAW in `G⁺`) is a remnant of a
/// SAW in `G`: entry `i` is the vertex inserted between `walk[i]` and
/// `walk[i+1]`, or `None` for a direct `G`-edge.
pub fn remnant_witness(g: &Graph, walk: &[VertexId]) -> Option<Vec<Option<VertexId>>> {
    let mut gap_index = Vec::new();
    let mut gaps = Vec::new();
    for (i, pair) in walk.windows(2).enumerate() {
        let (a, b) = (pair[0], pair[1]);
        if g.has_edge(a, b) {
            continue;
        }
        let cands: Vec<VertexId> = g
            .common_neighbors(a, b)
            .into_iter()
            .filter(|u| !walk.contains(u))
            .collect();
        if cands.is_empty() {
            return None;
        }
        gap_index.push(i);
        gaps.push(cands);
    }
    let chosen = assign_bridges(&gaps)?;
    let mut witness = vec![None; walk.len().saturating_sub(1)];
    for (i, u) in gap_index.into_iter().zip(chosen) {
        witness[i] = Some(u);
    }
    Some(witness)
}

/// Expands a walk with its bridge witness into the underlying `G`-walk.
pub fn expand_with_witness(walk: &[VertexId], witness: &[Option<VertexId>]) -> Vec<VertexId> {
    let mut out = Vec::with_capacity(walk.len() + witness.len());
    for (i, &v) in walk.iter().enumerate() {
        out.push(v);
        if let Some(Some(u)) = witness.get(i) {
            out.push(*u);
        }
    }
    out
}

/// Decides whether a SAW of `G⁺` is a remnant of a SAW of `G`.
pub fn is_remnant_saw(g: &Graph, walk: &Walk) -> Result<bool> {
    if walk.vertices.is_empty() {
        return Err(Error::InvalidWalk {
            host: "2-step",
            detail: "empty walk".into(),
        });
    }
    for w in walk.vertices.windows(2) {
        let ok = g.contains(w[0])
            && g.contains(w[1])
            && w[0] != w[1]
            && (g.has_edge(w[0], w[1]) || !g.common_neighbors(w[0], w[1]).is_empty());
        if !ok {
            return Err(Error::InvalidWalk {
                host: "2-step",
                detail: format!("{} and {} are not 2-step neighbors", w[0], w[1]),
            });
        }
    }
    if let Some(&v) = walk.vertices.iter().find(|&&v| !g.contains(v)) {
        return Err(Error::UnknownVertex(v));
    }
    if !walk.is_self_avoiding() {
        return Err(Error::InvalidWalk {
            host: "2-step",
            detail: "walk revisits a vertex".into(),
        });
    }
    Ok(remnant_witness(g, &walk.vertices).is_some())
}

/// Depth-first traversal of remnant SAWs from `v` up to `max_len` hops.
/// `plus` must be `g.two_step_graph()`.
fn for_each_remnant_saw<F: FnMut(&[VertexId])>(
    g: &Graph,
    plus: &Graph,
    v: VertexId,
    max_len: usize,
    mut visit: F,
) {
    walk_remnant_saws(g, plus, v, max_len, |w| {
        visit(w);
        true
    });
}

/// Like [`for_each_remnant_saw`], but `visit` returns whether to descend
/// below the walk it was given. Remnant SAWs are closed under prefixes, so a
/// pruned subtree contains no walk the caller still needs.
pub(crate) fn walk_remnant_saws<F: FnMut(&[VertexId]) -> bool>(
    g: &Graph,
    plus: &Graph,
    v: VertexId,
    max_len: usize,
    mut visit: F,
) {
    struct State<'a> {
        g: &'a Graph,
        plus: &'a Graph,
        max_len: usize,
        walk: Vec<VertexId>,
        on_walk: Vec<bool>,
    }
    fn rec<F: FnMut(&[VertexId]) -> bool>(
        st: &mut State<'_>,
        witness: &[Option<VertexId>],
        visit: &mut F,
    ) {
        let last = *st.walk.last().expect("walk is never empty");
        let next: Vec<VertexId> = st.plus.neighbors(last).to_vec();
        for w in next {
            if st.on_walk[w] {
                continue;
            }
            st.walk.push(w);
            st.on_walk[w] = true;
            let extended = extend_witness(st.g, &st.walk, witness);
            if let Some(wit) = extended {
                if visit(&st.walk) && st.walk.len() <= st.max_len {
                    rec(st, &wit, visit);
                }
            }
            st.on_walk[w] = false;
            st.walk.pop();
        }
    }
    if max_len == 0 {
        return;
    }
    let mut on_walk = vec![false; g.n()];
    on_walk[v] = true;
    let mut st = State {
        g,
        plus,
        max_len,
        walk: vec![v],
        on_walk,
    };
    rec(&mut st, &[], &mut visit);
}

/// Witness for `walk` given a witness for `walk` minus its last vertex.
/// Falls back to the exhaustive search when the cheap extension fails, so the
/// result is exact.
fn extend_witness(
    g: &Graph,
    walk: &[VertexId],
    prefix_witness: &[Option<VertexId>],
) -> Option<Vec<Option<VertexId>>> {
    let k = walk.len();
    let (a, b) = (walk[k - 2], walk[k - 1]);
    let used = |u: VertexId| prefix_witness.contains(&Some(u));
    if !used(b) {
        if g.has_edge(a, b) {
            let mut wit = prefix_witness.to_vec();
            wit.push(None);
            return Some(wit);
        }
        if let Some(u) = g
            .common_neighbors(a, b)
            .into_iter()
            .find(|&u| !walk.contains(&u) && !used(u))
        {
            let mut wit = prefix_witness.to_vec();
            wit.push(Some(u));
            return Some(wit);
        }
    }
    remnant_witness(g, walk)
}

/// All remnant SAWs (`SAW*_n(v)`) of exactly `n` hops, lexicographically ordered.
pub fn enumerate_remnant_saws(g: &Graph, v: VertexId, n: usize) -> Result<Vec<Walk>> {
    g.check_vertex(v)?;
    if n == 0 {
        return Err(Error::InvalidParameter("walk length must be at least 1".into()));
    }
    check_cap(n)?;
    let plus = g.two_step_graph();
    let mut out = Vec::new();
    let mut overflow = false;
    for_each_remnant_saw(g, &plus, v, n, |w| {
        if w.len() == n + 1 && !overflow {
            if out.len() == MAX_MATERIALIZED_WALKS {
                overflow = true;
            } else {
                out.push(Walk::new(w.to_vec()));
            }
        }
    });
    if overflow {
        return Err(Error::TooManyWalks {
            limit: MAX_MATERIALIZED_WALKS,
        });
    }
    Ok(out)
}

/// Reduces a path in `G⁺` to a subpath with the same endpoints that is a SAW
/// in `G⁺` and a remnant of a SAW in `G`.
///
/// The reduced prefix is extended one input vertex at a time while a bridge
/// witness is carried along:
/// - a vertex already on the reduced walk truncates back to it;
/// - a vertex currently used as a bridge truncates to the bridge's left end,
///   which is a `G`-neighbor;
/// - a direct `G`-edge appends;
/// - otherwise a common neighbor is used as a new bridge if it is fresh, and
///   if every common neighbor is already on the underlying `G`-walk the walk
///   is cut back to where that neighbor sits.
pub fn reduce_path_to_remnant_saw(g: &Graph, path: &Walk) -> Result<Walk> {
    let verts = &path.vertices;
    if verts.is_empty() {
        return Err(Error::InvalidWalk {
            host: "2-step",
            detail: "empty path".into(),
        });
    }
    if let Some(&v) = verts.iter().find(|&&v| !g.contains(v)) {
        return Err(Error::UnknownVertex(v));
    }
    let mut reduced: Vec<VertexId> = vec![verts[0]];
    let mut witness: Vec<Option<VertexId>> = Vec::new();
    for &x in &verts[1..] {
        let last = *reduced.last().expect("reduced walk is never empty");
        let direct = g.has_edge(last, x);
        let common = g.common_neighbors(last, x);
        if x == last || (!direct && common.is_empty()) {
            return Err(Error::InvalidWalk {
                host: "2-step",
                detail: format!("{last} and {x} are not 2-step neighbors"),
            });
        }
        if let Some(i) = reduced.iter().position(|&r| r == x) {
            reduced.truncate(i + 1);
            witness.truncate(i);
            continue;
        }
        if let Some(j) = witness.iter().position(|&u| u == Some(x)) {
            // x bridges reduced[j] -> reduced[j+1], so reduced[j] ~ x in G.
            reduced.truncate(j + 1);
            witness.truncate(j);
            reduced.push(x);
            witness.push(None);
            continue;
        }
        if direct {
            reduced.push(x);
            witness.push(None);
            continue;
        }
        let on_g_walk = |u: VertexId| reduced.contains(&u) || witness.contains(&Some(u));
        if let Some(&u) = common.iter().find(|&&u| !on_g_walk(u)) {
            reduced.push(x);
            witness.push(Some(u));
            continue;
        }
        // Every bridge candidate already lies on the G-walk; cut back to it.
        let u = common[0];
        if let Some(i) = reduced.iter().position(|&r| r == u) {
            reduced.truncate(i + 1);
            witness.truncate(i);
            reduced.push(x);
            witness.push(None);
        } else {
            let i = witness
                .iter()
                .position(|&w| w == Some(u))
                .expect("u lies on the G-walk");
            reduced.truncate(i + 1);
            witness.truncate(i);
            reduced.push(x);
            witness.push(Some(u));
        }
    }
    Ok(Walk::new(reduced))
}

fn check_rates(g: &Graph, rates: &[f64]) -> Result<()> {
    if rates.len() != g.n() {
        return Err(Error::InvalidParameter(format!(
            "rate profile has {} entries for {} vertices",
            rates.len(),
            g.n()
        )));
    }
    for (v, &c) in rates.iter().enumerate() {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::InvalidRate { vertex: v, rate: c });
        }
    }
    Ok(())
}

/// Finite prefixes of the simple and double jump rate trails at one vertex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrailTable {
    pub vertex: VertexId,
    pub n_max: usize,
    /// `Σ_{SAW_n(v)} Π_{i=1}^{n-1} c(v_i)` for `n = 2..=n_max`.
    pub raw_simple: Vec<f64>,
    pub theta_simple: Vec<f64>,
    /// Same sum over `SAW*_n(v)`.
    pub raw_double: Vec<f64>,
    pub theta_double: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct TrailRow {
    vertex: VertexId,
    n: usize,
    raw_sum_simple: f64,
    theta_simple: f64,
    raw_sum_double: f64,
    theta_double: f64,
}

fn root(raw: f64, n: usize) -> f64 {
    if raw == 0.0 {
        0.0
    } else {
        raw.powf(1.0 / (n - 1) as f64)
    }
}

impl TrailTable {
    pub fn ns(&self) -> std::ops::RangeInclusive<usize> {
        2..=self.n_max
    }

    pub fn raw_simple_at(&self, n: usize) -> f64 {
        self.raw_simple[n - 2]
    }

    pub fn raw_double_at(&self, n: usize) -> f64 {
        self.raw_double[n - 2]
    }

    /// Largest of the last three successive ratios `raw(n+1)/raw(n)`, for the
    /// simple and double sums respectively. A stable value suggests
    /// geometric growth of the raw sums (finite limsup of the trail).
    pub fn growth_diagnostic(&self) -> (Option<f64>, Option<f64>) {
        fn diag(raw: &[f64]) -> Option<f64> {
            let ratios: Vec<f64> = raw
                .windows(2)
                .filter(|w| w[0] > 0.0)
                .map(|w| w[1] / w[0])
                .collect();
            ratios
                .iter()
                .rev()
                .take(3)
                .copied()
                .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))))
        }
        (diag(&self.raw_simple), diag(&self.raw_double))
    }

    pub fn write_csv<W: Write>(&self, writer: &mut csv::Writer<W>) -> Result<()> {
        for n in self.ns() {
            writer.serialize(TrailRow {
                vertex: self.vertex,
                n,
                raw_sum_simple: self.raw_simple_at(n),
                theta_simple: self.theta_simple[n - 2],
                raw_sum_double: self.raw_double_at(n),
                theta_double: self.theta_double[n - 2],
            })?;
        }
        Ok(())
    }
}

/// Writes several trail tables as one CSV with the header
/// `vertex,n,raw_sum_simple,theta_simple,raw_sum_double,theta_double`.
pub fn write_trails_csv<W: Write>(tables: &[TrailTable], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for t in tables {
        t.write_csv(&mut writer)?;
    }
    writer.flush()?;
    Ok(())
}

/// Accumulates `Σ Π_{i=1}^{len-1} c(v_i)` per walk length.
fn accumulate_interior(raw: &mut [f64], walk: &[VertexId], rates: &[f64], prefix: &mut Vec<f64>) {
    // prefix[d] = Π_{i=1}^{d-1} c(v_i) for the walk prefix of d hops.
    let d = walk.len() - 1;
    prefix.truncate(d);
    let p = if d == 1 {
        1.0
    } else {
        prefix[d - 1] * rates[walk[d - 1]]
    };
    prefix.push(p);
    if d >= 2 {
        raw[d - 2] += p;
    }
}

/// Computes `Θ_(n)` and `Θ*_(n)` at `v` for `n = 2..=n_max`.
pub fn trail_table(g: &Graph, rates: &[f64], v: VertexId, n_max: usize) -> Result<TrailTable> {
    g.check_vertex(v)?;
    check_rates(g, rates)?;
    if n_max < 2 {
        return Err(Error::InvalidParameter("n_max must be at least 2".into()));
    }
    check_cap(n_max)?;
    let len = n_max - 1;
    let mut raw_simple = vec![0.0; len];
    let mut prefix = vec![1.0];
    for_each_saw(g, v, n_max, |w| {
        accumulate_interior(&mut raw_simple, w, rates, &mut prefix)
    });
    let plus = g.two_step_graph();
    let mut raw_double = vec![0.0; len];
    let mut prefix = vec![1.0];
    for_each_remnant_saw(g, &plus, v, n_max, |w| {
        accumulate_interior(&mut raw_double, w, rates, &mut prefix)
    });
    let theta = |raw: &[f64]| {
        raw.iter()
            .enumerate()
            .map(|(i, &r)| root(r, i + 2))
            .collect::<Vec<_>>()
    };
    Ok(TrailTable {
        vertex: v,
        n_max,
        theta_simple: theta(&raw_simple),
        theta_double: theta(&raw_double),
        raw_simple,
        raw_double,
    })
}

/// `Σ_{SAW*_n(v)} Π_{i=1}^{n} c(v_i)` for `n = 1..=n_max`: the remnant sum
/// whose weight includes the terminal vertex.
pub fn shifted_remnant_sums(
    g: &Graph,
    rates: &[f64],
    v: VertexId,
    n_max: usize,
) -> Result<Vec<f64>> {
    g.check_vertex(v)?;
    check_rates(g, rates)?;
    check_cap(n_max)?;
    let plus = g.two_step_graph();
    let mut raw = vec![0.0; n_max];
    let mut prefix: Vec<f64> = vec![1.0];
    for_each_remnant_saw(g, &plus, v, n_max, |w| {
        let d = w.len() - 1;
        prefix.truncate(d);
        let p = prefix[d - 1] * rates[w[d]];
        prefix.push(p);
        raw[d - 1] += p;
    });
    Ok(raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn walks(list: &[&[usize]]) -> Vec<Walk> {
        list.iter().map(|w| Walk::new(w.to_vec())).collect()
    }

    #[test]
    fn saws_on_small_graphs() {
        let p = Graph::path(3);
        assert_eq!(enumerate_saws(&p, 0, 2).unwrap(), walks(&[&[0, 1, 2]]));
        let k3 = Graph::complete(3);
        for v in 0..3 {
            assert_eq!(enumerate_saws(&k3, v, 2).unwrap().len(), 2);
        }
        let s = Graph::star(4);
        assert_eq!(enumerate_saws(&s, 0, 1).unwrap().len(), 4);
        assert_eq!(enumerate_saws(&s, 2, 1).unwrap(), walks(&[&[2, 0]]));
        assert!(enumerate_saws(&p, 7, 1).is_err());
        assert!(matches!(
            enumerate_saws(&p, 0, DEFAULT_ENUMERATION_CAP + 1),
            Err(Error::EnumerationCap { .. })
        ));
    }

    #[test]
    fn remnant_basic_cases() {
        let p = Graph::path(3);
        // already a SAW in g
        assert!(is_remnant_saw(&p, &Walk::new(vec![0, 1, 2])).unwrap());
        // skip over 1
        assert!(is_remnant_saw(&p, &Walk::new(vec![0, 2])).unwrap());
        // 1 is on the walk, so it cannot bridge 0 -> 2
        assert!(!is_remnant_saw(&p, &Walk::new(vec![1, 0, 2])).unwrap());
        // not a 2-step walk at all
        assert!(is_remnant_saw(&Graph::path(4), &Walk::new(vec![0, 3])).is_err());
    }

    #[test]
    fn remnant_requires_distinct_bridges() {
        // Star with center 0: leaves 1,2,3 pairwise bridged only by 0.
        let s = Graph::star(3);
        assert!(is_remnant_saw(&s, &Walk::new(vec![1, 2])).unwrap());
        assert!(!is_remnant_saw(&s, &Walk::new(vec![1, 2, 3])).unwrap());
        // A second hub lets the two gaps use different bridges.
        let g = Graph::from_edges(5, &[(0, 1), (0, 2), (4, 2), (4, 3)]).unwrap();
        assert!(is_remnant_saw(&g, &Walk::new(vec![1, 2, 3])).unwrap());
        // Exhaustive check against all bridge choices.
        let g = Graph::from_edges(5, &[(0, 1), (0, 2), (0, 3), (2, 4)]).unwrap();
        let walk = Walk::new(vec![1, 2, 3]);
        let brute = g.common_neighbors(1, 2).iter().any(|&a| {
            g.common_neighbors(2, 3)
                .iter()
                .any(|&b| a != b && ![1, 2, 3].contains(&a) && ![1, 2, 3].contains(&b))
        });
        assert!(!brute);
        assert!(!is_remnant_saw(&g, &walk).unwrap());
    }

    #[test]
    fn remnant_saws_of_p5_include_skips() {
        let p5 = Graph::path(5);
        let got = enumerate_remnant_saws(&p5, 0, 2).unwrap();
        assert_eq!(got, walks(&[&[0, 1, 2], &[0, 1, 3], &[0, 2, 3], &[0, 2, 4]]));
        // brute force: all 2-hop SAWs of G⁺ with a valid bridge assignment
        let plus = p5.two_step_graph();
        let all = enumerate_saws(&plus, 0, 2).unwrap();
        let want: Vec<_> = all
            .into_iter()
            .filter(|w| is_remnant_saw(&p5, w).unwrap())
            .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn remnant_saws_on_complete_graph_equal_two_step_saws() {
        let k3 = Graph::complete(3);
        for v in 0..3 {
            assert_eq!(
                enumerate_remnant_saws(&k3, v, 2).unwrap(),
                enumerate_saws(&k3.two_step_graph(), v, 2).unwrap()
            );
        }
    }

    #[test]
    fn reduce_leaves_remnant_saws_alone() {
        let p5 = Graph::path(5);
        let w = Walk::new(vec![0, 2, 3]);
        assert_eq!(reduce_path_to_remnant_saw(&p5, &w).unwrap(), w);
    }

    #[test]
    fn reduce_shortens_revisiting_paths() {
        let p5 = Graph::path(5);
        let w = Walk::new(vec![0, 1, 2, 1, 3]);
        let r = reduce_path_to_remnant_saw(&p5, &w).unwrap();
        assert!(r.len() < w.len());
        assert_eq!(r.first(), Some(0));
        assert_eq!(r.last(), Some(3));
        assert!(is_remnant_saw(&p5, &r).unwrap());
    }

    #[test]
    fn reduce_repairs_bridge_collisions() {
        // star: 1 -> 2 uses bridge 0, then 2 -> 3 needs 0 again.
        let s = Graph::star(3);
        let r = reduce_path_to_remnant_saw(&s, &Walk::new(vec![1, 2, 3])).unwrap();
        assert_eq!(r, Walk::new(vec![1, 3]));
        // walking onto the bridge itself
        let r = reduce_path_to_remnant_saw(&s, &Walk::new(vec![1, 2, 0])).unwrap();
        assert_eq!(r, Walk::new(vec![1, 0]));
        assert!(reduce_path_to_remnant_saw(&Graph::path(4), &Walk::new(vec![0, 3])).is_err());
    }

    #[test]
    fn trail_on_p4_with_constant_rate() {
        let g = Graph::path(4);
        let t = trail_table(&g, &[2.0; 4], 0, 3).unwrap();
        assert_eq!(t.raw_simple_at(2), 2.0);
        assert_eq!(t.theta_simple[0], 2.0);
        // n = 3: (0,1,2,3) with c(1)c(2) = 4 -> Θ = 4^{1/2}
        assert_eq!(t.raw_simple_at(3), 4.0);
        assert_eq!(t.theta_simple[1], 2.0);
    }

    #[test]
    fn unit_rates_count_walks() {
        let g = Graph::cycle(6);
        let t = trail_table(&g, &[1.0; 6], 0, 5).unwrap();
        let counts = count_saws(&g, 0, 5).unwrap();
        for n in 2..=5 {
            let want = (counts[n - 1] as f64).powf(1.0 / (n - 1) as f64);
            assert!((t.theta_simple[n - 2] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn isolated_vertex_has_zero_trails() {
        let g = Graph::edgeless(3);
        let t = trail_table(&g, &[1.0; 3], 1, 4).unwrap();
        assert!(t.theta_simple.iter().chain(&t.theta_double).all(|&x| x == 0.0));
        assert_eq!(t.growth_diagnostic(), (None, None));
    }

    #[test]
    fn negative_rates_are_rejected() {
        let g = Graph::path(3);
        assert!(matches!(
            trail_table(&g, &[1.0, -1.0, 1.0], 0, 2),
            Err(Error::InvalidRate { vertex: 1, .. })
        ));
    }

    #[test]
    fn connective_constant_on_a_line_window() {
        let g = Graph::path(41);
        let est = connective_constant_estimate(&g, 20, 10).unwrap();
        for (i, e) in est.iter().enumerate() {
            let n = (i + 1) as f64;
            assert!((e - 2f64.powf(1.0 / n)).abs() < 1e-12);
        }
        assert_eq!(connective_constant_estimate(&Graph::complete(3), 0, 1).unwrap(), vec![2.0]);
        assert_eq!(connective_constant_estimate(&Graph::edgeless(2), 0, 3).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn shifted_sum_exceeds_next_trail_at_a_dead_end() {
        // 0 - 1: one remnant walk of one hop, none of two hops.
        let g = Graph::path(2);
        let shifted = shifted_remnant_sums(&g, &[1.0, 3.0], 0, 1).unwrap();
        let t = trail_table(&g, &[1.0, 3.0], 0, 2).unwrap();
        assert_eq!(shifted, vec![3.0]);
        assert_eq!(t.raw_double_at(2), 0.0);
    }

    #[test]
    fn trails_csv_header() {
        let g = Graph::path(4);
        let t = trail_table(&g, &[1.0; 4], 0, 3).unwrap();
        let mut buf = Vec::new();
        write_trails_csv(&[t], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("vertex,n,raw_sum_simple,theta_simple,raw_sum_double,theta_double")
        );
        assert_eq!(lines.count(), 2);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn small_graph(max_n: usize) -> impl Strategy<Value = Graph> {
            (2usize..=max_n).prop_flat_map(|n| {
                proptest::collection::vec(proptest::bool::weighted(0.45), n * (n - 1) / 2)
                    .prop_map(move |bits| {
                        let mut edges = Vec::new();
                        let mut k = 0;
                        for u in 0..n {
                            for v in u + 1..n {
                                if bits[k] {
                                    edges.push((u, v));
                                }
                                k += 1;
                            }
                        }
                        Graph::from_edges(n, &edges).unwrap()
                    })
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn shifted_sum_bounded_by_next_trail_on_extendable_walks(
                g in small_graph(7),
                rates in proptest::collection::vec(0.1f64..5.0, 7),
            ) {
                // Dead-end walks have no (n+1)-hop extension; the comparison
                // holds for the walks that do extend.
                let rates = &rates[..g.n()];
                for v in g.vertices() {
                    let n_max = 4;
                    let shifted = shifted_remnant_sums(&g, rates, v, n_max).unwrap();
                    let t = trail_table(&g, rates, v, n_max + 1).unwrap();
                    for n in 1..=n_max {
                        let longer = enumerate_remnant_saws(&g, v, n + 1).unwrap();
                        let mut lhs = 0.0;
                        let mut all = 0.0;
                        for w in enumerate_remnant_saws(&g, v, n).unwrap() {
                            let weight: f64 = w.vertices[1..].iter().map(|&x| rates[x]).product();
                            all += weight;
                            if longer.iter().any(|l| l.vertices[..=n] == w.vertices[..]) {
                                lhs += weight;
                            }
                        }
                        prop_assert!((all - shifted[n - 1]).abs() <= 1e-9 * all.max(1.0));
                        let rhs = t.raw_double_at(n + 1);
                        prop_assert!(lhs <= rhs * (1.0 + 1e-12),
                            "n={} lhs={} rhs={}", n, lhs, rhs);
                    }
                }
            }

            #[test]
            fn remnant_enumeration_matches_filtered_two_step_saws(g in small_graph(6)) {
                let plus = g.two_step_graph();
                for v in g.vertices() {
                    for n in 1..=3 {
                        let want: Vec<_> = enumerate_saws(&plus, v, n).unwrap()
                            .into_iter()
                            .filter(|w| is_remnant_saw(&g, w).unwrap())
                            .collect();
                        prop_assert_eq!(enumerate_remnant_saws(&g, v, n).unwrap(), want);
                    }
                }
            }
        }
    }
}
