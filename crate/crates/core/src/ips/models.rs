use serde::{Deserialize, Serialize};

use super::{JumpKernel, LocalState, Patch, Target};
use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId};

/// `n^k` with `0^k = 0` for every `k`, so an empty count never drives a jump.
fn count_pow(n: usize, k: f64) -> f64 {
    if n == 0 {
        0.0
    } else {
        (n as f64).powf(k)
    }
}

fn check_k(k: f64) -> Result<()> {
    if k >= 0.0 && k.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("k must be non-negative, got {k}")))
    }
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {x}")))
    }
}

fn spin(x: &[LocalState], v: VertexId) -> u8 {
    match x[v] {
        LocalState::Spin(s) => s,
        ref other => panic!("expected a spin at {v}, found {other:?}"),
    }
}

fn grains(x: &[LocalState], v: VertexId) -> u64 {
    match x[v] {
        LocalState::Grains(n) => n,
        ref other => panic!("expected a grain count at {v}, found {other:?}"),
    }
}

fn mass(x: &[LocalState], v: VertexId) -> f64 {
    match x[v] {
        LocalState::Mass(m) => m,
        ref other => panic!("expected a mass at {v}, found {other:?}"),
    }
}

fn urn(x: &[LocalState], v: VertexId) -> (u64, u64) {
    match x[v] {
        LocalState::Urn { white, black } => (white, black),
        ref other => panic!("expected an urn at {v}, found {other:?}"),
    }
}

fn expect_spin(s: &LocalState) -> Result<()> {
    match s {
        LocalState::Spin(0 | 1) => Ok(()),
        other => Err(Error::InvalidParameter(format!("expected spin 0 or 1, got {other:?}"))),
    }
}

/// Voter model: `v` adopts state `s` at rate `(#neighbors in state s)^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Voter {
    pub k: f64,
}

impl Voter {
    pub fn new(k: f64) -> Result<Self> {
        check_k(k)?;
        Ok(Voter { k })
    }
}

impl JumpKernel for Voter {
    fn name(&self) -> &'static str {
        "voter"
    }

    fn rate_bound(&self, g: &Graph, v: VertexId) -> f64 {
        count_pow(g.degree(v), self.k)
    }

    fn self_updating(&self) -> bool {
        true
    }

    fn validate_state(&self, s: &LocalState) -> Result<()> {
        expect_spin(s)
    }

    fn total_rate(&self, g: &Graph, v: VertexId, x: &[LocalState]) -> f64 {
        let me = spin(x, v);
        let disagree = g.neighbors(v).iter().filter(|&&w| spin(x, w) != me).count();
        count_pow(disagree, self.k)
    }

    fn targets(&self, g: &Graph, v: VertexId, x: &[LocalState]) -> Vec<Target> {
        let other = 1 - spin(x, v);
        let n = g.neighbors(v).iter().filter(|&&w| spin(x, w) == other).count();
        let rate = count_pow(n, self.k);
        if rate > 0.0 {
            vec![Target {
                patch: vec![(v, LocalState::Spin(other))],
                rate,
            }]
        } else {
            Vec::new()
        }
    }

    fn finite_domain(&self) -> Option<Vec<LocalState>> {
        Some(vec![LocalState::Spin(0), LocalState::Spin(1)])
    }
}

/// Discrete sandpile: an unstable site (`x(v) > deg(v)`) topples at rate
/// `deg(v)^k`, sending one grain to each neighbor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSandpile {
    pub k: f64,
}

impl DiscreteSandpile {
    pub fn new(k: f64) -> Result<Self> {
        check_k(k)?;
        Ok(DiscreteSandpile { k })
    }
}

impl JumpKernel for DiscreteSandpile {
    fn name(&self) -> &'static str {
        "discrete_sandpile"
    }

    fn rate_bound(&self, g: &Graph, v: VertexId) -> f64 {
        count_pow(g.degree(v), self.k)
    }

    fn self_updating(&self) -> bool {
        false
    }

    fn validate_state(&self, s: &LocalState) -> Result<()> {
        match s {
            LocalState::Grains(_) => Ok(()),
            other => Err(Error::InvalidParameter(format!("expected grains, got {other:?}"))),
        }
    }

    fn total_rate(&self, g: &Graph, v: VertexId, x: &[LocalState]) -> f64 {
        let d = g.degree(v);
        if grains(x, v) > d as u64 {
            count_pow(d, self.k)
        } else {
            0.0
        }
    }

    fn targets(&self, g: &Graph, v: VertexId, x: &[LocalState]) -> Vec<Target> {
        let d = g.degree(v);
        let here = grains(x, v);
        if d == 0 || here <= d as u64 {
            return Vec::new();
        }
        let mut patch: Patch = vec![(v, LocalState::Grains(here - d as u64))];
        for &w in g.neighbors(v) {
            patch.push((w, LocalState::Grains(grains(x, w) + 1)));
        }
        vec![Target {
            patch,
            rate: count_pow(d, self.k),
        }]
    }
}

/// Divisible sandpile: a site with mass above `lambda` topples at rate
/// `deg(v)^k`, moving `lambda` to its neighbors in equal parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivisibleSandpile {
    pub k: f64,
    pub lambda: f64,
}

impl DivisibleSandpile {
    pub fn new(k: f64, lambda: f64) -> Result<Self> {
        check_k(k)?;
        check_positive("lambda", lambda)?;
        Ok(DivisibleSandpile { k, lambda })
    }
}

impl JumpKernel for DivisibleSandpile {
    fn name(&self) -> &'static str {
        "divisible_sandpile"
    }

    fn rate_bound(&self, g: &Graph, v: VertexId) -> f64 {
        count_pow(g.degree(v), self.k)
    }

    fn self_updating(&self) -> bool {
        false
    }

    fn validate_state(&self, s: &LocalState) -> Result<()> {
        match s {
            LocalState::Mass(m) if *m >= 0.0 && m.is_finite() => Ok(()),
            other => Err(Error::InvalidParameter(format!(
                "expected a non-negative mass, got {other:?}"
            ))),
        }
    }

    fn total_rate(&self, g: &Graph, v: VertexId, x: &[LocalState]) -> f64 {
        if mass(x, v) > self.lambda {
            count_pow(g.degree(v), self.k)
        } else {
            0.0
        }
    }

    fn targets(&self, g: &Graph, v: VertexId, x: &[LocalState]) -> Vec<Target> {
        let d = g.degree(v);
        let here = mass(x, v);
        if d == 0 || here <= self.lambda {
            return Vec::new();
        }
        let share = self.lambda / d as f64;
        let mut patch: Patch = vec![(v, LocalState::Mass(here - self.lambda))];
        for &w in g.neighbors(v) {
            patch.push((w, LocalState::Mass(mass(x, w) + share)));
        }
        vec![Target {
            patch,
            rate: count_pow(d, self.k),
        }]
    }
}

/// Contact process: infected sites recover at rate 1, healthy sites are
/// infected at rate `lambda (#infected neighbors)^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    pub lambda: f64,
    pub k: f64,
}

impl Contact {
    pub fn new(lambda: f64, k: f64) -> Result<Self> {
        check_k(k)?;
        check_positive("lambda", lambda)?;
        Ok(Contact { lambda, k })
    }

    fn infection(&self, g: &Graph, v: VertexId, x: &[LocalState]) -> f64 {
        let n = g.neighbors(v).iter().filter(|&&w| spin(x, w) == 1).count();
        self.lambda * count_pow(n, self.k)
    }
}

impl JumpKernel for Contact {
    fn name(&self) -> &'static str {
        "contact"
    }

    fn rate_bound(&self, g: &Graph, v: VertexId) -> f64 {
        f64::max(1.0, self.lambda * count_pow(g.degree(v), self.k))
    }

    fn self_updating(&self) -> bool {
        true
    }

    fn validate_state(&self, s: &LocalState) -> Result<()> {
        expect_spin(s)
    }

    fn total_rate(&self, g: &Graph, v: VertexId, x: &[LocalState]) -> f64 {
        if spin(x, v) == 1 {
            1.0
        } else {
            self.infection(g, v, x)
        }
    }

    fn targets(&self, g: &Graph, v: VertexId, x: &[LocalState]) -> Vec<Target> {
        let (to, rate) = if spin(x, v) == 1 {
            (0, 1.0)
        } else {
            (1, self.infection(g, v, x))
        };
        if rate > 0.0 {
            vec![Target {
                patch: vec![(v, LocalState::Spin(to))],
                rate,
            }]
        } else {
            Vec::new()
        }
    }

    fn finite_domain(&self) -> Option<Vec<LocalState>> {
        Some(vec![LocalState::Spin(0), LocalState::Spin(1)])
    }
}

/// Interacting urns. The clock at `v` ticks at rate `deg(v)^k`; a tick draws
/// a ball from the urn at `v` (with replacement) and adds `m` balls to every
/// neighboring urn: `alpha` white for a white draw, `beta` black for a black
/// draw, the rest of the other color.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Urn {
    pub alpha: u64,
    pub beta: u64,
    pub m: u64,
    pub k: f64,
}

impl Urn {
    pub fn new(alpha: u64, beta: u64, m: u64, k: f64) -> Result<Self> {
        check_k(k)?;
        if alpha > m || beta > m {
            return Err(Error::InvalidParameter(format!(
                "urn needs alpha, beta <= m, got alpha={alpha} beta={beta} m={m}"
            )));
        }
        Ok(Urn { alpha, beta, m, k })
    }
}

impl JumpKernel for Urn {
    fn name(&self) -> &'static str {
        "urn"
    }

    fn rate_bound(&self, g: &Graph, v: VertexId) -> f64 {
        count_pow(g.degree(v), self.k)
    }

    fn self_updating(&self) -> bool {
        false
    }

    fn validate_state(&self, s: &LocalState) -> Result<()> {
        match s {
            LocalState::Urn { .. } => Ok(()),
            other => Err(Error::InvalidParameter(format!("expected an urn, got {other:?}"))),
        }
    }

    fn total_rate(&self, g: &Graph, v: VertexId, x: &[LocalState]) -> f64 {
        let (w, b) = urn(x, v);
        if w + b == 0 {
            0.0
        } else {
            count_pow(g.degree(v), self.k)
        }
    }

    fn targets(&self, g: &Graph, v: VertexId, x: &[LocalState]) -> Vec<Target> {
        let (w, b) = urn(x, v);
        let c = count_pow(g.degree(v), self.k);
        if w + b == 0 || c == 0.0 {
            return Vec::new();
        }
        let total = (w + b) as f64;
        let add = |dw: u64, db: u64| -> Patch {
            g.neighbors(v)
                .iter()
                .map(|&u| {
                    let (uw, ub) = urn(x, u);
                    (
                        u,
                        LocalState::Urn {
                            white: uw + dw,
                            black: ub + db,
                        },
                    )
                })
                .collect()
        };
        let mut out = Vec::new();
        if w > 0 {
            out.push(Target {
                patch: add(self.alpha, self.m - self.alpha),
                rate: c * w as f64 / total,
            });
        }
        if b > 0 {
            out.push(Target {
                patch: add(self.m - self.beta, self.beta),
                rate: c * b as f64 / total,
            });
        }
        out
    }
}

/// Birth-death with a per-site capacity. Immigration at rate `b0` while below
/// `cap`; an occupied site loses one organism at rate
/// `d0 + lambda · Σ_{w~v} x(w)`. Illustrative only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BirthDeath {
    pub b0: f64,
    pub d0: f64,
    pub lambda: f64,
    pub cap: u64,
}

impl BirthDeath {
    pub fn new(b0: f64, d0: f64, lambda: f64, cap: u64) -> Result<Self> {
        for (name, x) in [("b0", b0), ("d0", d0), ("lambda", lambda)] {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be non-negative, got {x}"
                )));
            }
        }
        if cap == 0 {
            return Err(Error::InvalidParameter("cap must be positive".into()));
        }
        Ok(BirthDeath { b0, d0, lambda, cap })
    }

    fn death(&self, g: &Graph, v: VertexId, x: &[LocalState]) -> f64 {
        let pressure: u64 = g.neighbors(v).iter().map(|&w| grains(x, w)).sum();
        self.d0 + self.lambda * pressure as f64
    }
}

impl JumpKernel for BirthDeath {
    fn name(&self) -> &'static str {
        "birth_death"
    }

    fn rate_bound(&self, g: &Graph, v: VertexId) -> f64 {
        self.b0 + self.d0 + self.lambda * (g.degree(v) as u64 * self.cap) as f64
    }

    fn self_updating(&self) -> bool {
        true
    }

    fn validate_state(&self, s: &LocalState) -> Result<()> {
        match s {
            LocalState::Grains(n) if *n <= self.cap => Ok(()),
            other => Err(Error::InvalidParameter(format!(
                "expected a count at most {}, got {other:?}",
                self.cap
            ))),
        }
    }

    fn total_rate(&self, g: &Graph, v: VertexId, x: &[LocalState]) -> f64 {
        let n = grains(x, v);
        let birth = if n < self.cap { self.b0 } else { 0.0 };
        let death = if n > 0 { self.death(g, v, x) } else { 0.0 };
        birth + death
    }

    fn targets(&self, g: &Graph, v: VertexId, x: &[LocalState]) -> Vec<Target> {
        let n = grains(x, v);
        let mut out = Vec::new();
        if n < self.cap && self.b0 > 0.0 {
            out.push(Target {
                patch: vec![(v, LocalState::Grains(n + 1))],
                rate: self.b0,
            });
        }
        if n > 0 {
            let d = self.death(g, v, x);
            if d > 0.0 {
                out.push(Target {
                    patch: vec![(v, LocalState::Grains(n - 1))],
                    rate: d,
                });
            }
        }
        out
    }

    fn finite_domain(&self) -> Option<Vec<LocalState>> {
        Some((0..=self.cap).map(LocalState::Grains).collect())
    }
}

/// Serializable model selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Voter {
        k: f64,
    },
    DiscreteSandpile {
        k: f64,
    },
    DivisibleSandpile {
        k: f64,
        lambda: f64,
    },
    Contact {
        lambda: f64,
        k: f64,
    },
    Urn {
        alpha: u64,
        beta: u64,
        m: u64,
        k: f64,
    },
    BirthDeath {
        b0: f64,
        d0: f64,
        lambda: f64,
        cap: u64,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<Box<dyn JumpKernel>> {
        Ok(match *self {
            ModelSpec::Voter { k } => Box::new(Voter::new(k)?),
            ModelSpec::DiscreteSandpile { k } => Box::new(DiscreteSandpile::new(k)?),
            ModelSpec::DivisibleSandpile { k, lambda } => {
                Box::new(DivisibleSandpile::new(k, lambda)?)
            }
            ModelSpec::Contact { lambda, k } => Box::new(Contact::new(lambda, k)?),
            ModelSpec::Urn { alpha, beta, m, k } => Box::new(Urn::new(alpha, beta, m, k)?),
            ModelSpec::BirthDeath { b0, d0, lambda, cap } => {
                Box::new(BirthDeath::new(b0, d0, lambda, cap)?)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ips::check_local_contract;
    use crate::ips::LocalState::{Grains, Mass, Spin};

    fn spins(v: &[u8]) -> Vec<LocalState> {
        v.iter().map(|&s| Spin(s)).collect()
    }

    #[test]
    fn voter_rates() {
        let star = Graph::star(3);
        let m = Voter::new(1.0).unwrap();
        assert_eq!(m.rate_bound(&star, 0), 3.0);
        // center 0 with leaves 1,0,1: flips toward 1 at rate 2
        let x = spins(&[0, 1, 0, 1]);
        let t = m.targets(&star, 0, &x);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].rate, 2.0);
        assert_eq!(t[0].patch, vec![(0, Spin(1))]);
        let m2 = Voter::new(2.0).unwrap();
        assert_eq!(m2.targets(&star, 0, &x)[0].rate, 4.0);
        assert_eq!(m2.rate_bound(&star, 0), 9.0);
        // deg 0 is inert
        let iso = Graph::edgeless(1);
        assert_eq!(m.rate_bound(&iso, 0), 0.0);
        assert!(m.targets(&iso, 0, &spins(&[1])).is_empty());
        // consensus is absorbing
        assert!(m.targets(&star, 0, &spins(&[1, 1, 1, 1])).is_empty());
    }

    #[test]
    fn discrete_sandpile_rates() {
        let p3 = Graph::path(3);
        let m = DiscreteSandpile::new(2.0).unwrap();
        assert_eq!(m.rate_bound(&p3, 1), 4.0);
        let x = vec![Grains(0), Grains(3), Grains(5)];
        let t = m.targets(&p3, 1, &x);
        assert_eq!(t[0].rate, 4.0);
        assert_eq!(t[0].patch, vec![(1, Grains(1)), (0, Grains(1)), (2, Grains(6))]);
        // at threshold: stable
        assert!(m.targets(&p3, 1, &[Grains(0), Grains(2), Grains(0)]).is_empty());
        assert_eq!(m.rate_bound(&Graph::edgeless(1), 0), 0.0);
        assert!(m.targets(&Graph::edgeless(1), 0, &[Grains(9)]).is_empty());
    }

    #[test]
    fn divisible_sandpile_rates() {
        let star = Graph::star(4);
        let m = DivisibleSandpile::new(1.0, 2.0).unwrap();
        let mut x = vec![Mass(0.25); 5];
        x[0] = Mass(3.0);
        let t = m.targets(&star, 0, &x);
        assert_eq!(t[0].rate, 4.0);
        assert_eq!(t[0].patch[0], (0, Mass(1.0)));
        assert_eq!(t[0].patch[1], (1, Mass(0.75)));
        x[0] = Mass(2.0);
        assert!(m.targets(&star, 0, &x).is_empty());
        assert!(DivisibleSandpile::new(1.0, 0.0).is_err());
        assert_eq!(m.rate_bound(&Graph::edgeless(1), 0), 0.0);
    }

    #[test]
    fn contact_rates() {
        let star = Graph::star(3);
        let m = Contact::new(1.5, 1.0).unwrap();
        assert_eq!(m.rate_bound(&star, 0), 4.5);
        assert_eq!(m.rate_bound(&star, 1), 1.5);
        let x = spins(&[0, 1, 1, 0]);
        assert_eq!(m.targets(&star, 0, &x)[0].rate, 3.0);
        assert_eq!(m.targets(&star, 1, &x)[0].rate, 1.0);
        assert_eq!(m.targets(&star, 1, &x)[0].patch, vec![(1, Spin(0))]);
        // isolated sites still recover
        let iso = Graph::edgeless(1);
        assert_eq!(m.rate_bound(&iso, 0), 1.0);
        assert!(m.targets(&iso, 0, &spins(&[0])).is_empty());
        let low = Contact::new(0.2, 1.0).unwrap();
        assert_eq!(low.rate_bound(&star, 0), 1.0);
    }

    #[test]
    fn urn_rates() {
        let p3 = Graph::path(3);
        let m = Urn::new(2, 2, 3, 1.0).unwrap();
        let x = vec![
            LocalState::Urn { white: 0, black: 0 },
            LocalState::Urn { white: 1, black: 3 },
            LocalState::Urn { white: 5, black: 5 },
        ];
        let t = m.targets(&p3, 1, &x);
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].rate, 0.5);
        assert_eq!(t[1].rate, 1.5);
        assert_eq!(t[0].patch, vec![(0, LocalState::Urn { white: 2, black: 1 }), (2, LocalState::Urn { white: 7, black: 6 })]);
        assert_eq!(t[1].patch, vec![(0, LocalState::Urn { white: 1, black: 2 }), (2, LocalState::Urn { white: 6, black: 7 })]);
        // empty urn does not act
        assert!(m.targets(&p3, 0, &x).is_empty());
        assert_eq!(m.total_rate(&p3, 0, &x), 0.0);
        assert!(Urn::new(4, 1, 3, 1.0).is_err());
        assert_eq!(m.rate_bound(&Graph::edgeless(1), 0), 0.0);
    }

    #[test]
    fn birth_death_rates() {
        let p3 = Graph::path(3);
        let m = BirthDeath::new(1.0, 0.5, 0.25, 4).unwrap();
        assert_eq!(m.rate_bound(&p3, 1), 1.0 + 0.5 + 0.25 * 8.0);
        let x = vec![Grains(2), Grains(1), Grains(4)];
        let t = m.targets(&p3, 1, &x);
        assert_eq!(t[0], Target { patch: vec![(1, Grains(2))], rate: 1.0 });
        assert_eq!(t[1], Target { patch: vec![(1, Grains(0))], rate: 0.5 + 0.25 * 6.0 });
        // full site: only deaths
        assert_eq!(m.targets(&p3, 2, &x).len(), 1);
        assert!(m.validate_state(&Grains(5)).is_err());
    }

    #[test]
    fn monotone_in_k() {
        let star = Graph::star(5);
        for v in star.vertices() {
            let mut prev = 0.0;
            for k in [0.0, 0.5, 1.0, 2.0, 3.0] {
                let cs = [
                    Voter::new(k).unwrap().rate_bound(&star, v),
                    DiscreteSandpile::new(k).unwrap().rate_bound(&star, v),
                    Contact::new(1.0, k).unwrap().rate_bound(&star, v),
                    Urn::new(1, 1, 2, k).unwrap().rate_bound(&star, v),
                ];
                assert!(cs.iter().all(|&c| c >= prev));
                prev = cs[0];
            }
        }
    }

    #[test]
    fn spec_round_trip() {
        let spec: ModelSpec = serde_json::from_str(r#"{"model":"contact","lambda":1.5,"k":1}"#).unwrap();
        assert_eq!(spec.build().unwrap().name(), "contact");
        assert!(serde_json::from_str::<ModelSpec>(r#"{"model":"voter","k":1,"extra":2}"#).is_err());
    }

    #[test]
    fn contracts_hold_on_random_configurations() {
        use crate::rng::StreamKey;
        let g = Graph::from_edges(6, &[(0, 1), (0, 2), (0, 3), (3, 4), (4, 5), (1, 2)]).unwrap();
        let models: Vec<(Box<dyn JumpKernel>, fn(f64) -> LocalState)> = vec![
            (Box::new(Voter::new(1.5).unwrap()), |u| Spin((u * 2.0) as u8)),
            (Box::new(Contact::new(0.7, 2.0).unwrap()), |u| Spin((u * 2.0) as u8)),
            (Box::new(DiscreteSandpile::new(1.0).unwrap()), |u| Grains((u * 8.0) as u64)),
            (Box::new(DivisibleSandpile::new(1.0, 1.3).unwrap()), |u| Mass(u * 4.0)),
            (Box::new(Urn::new(1, 2, 3, 1.0).unwrap()), |u| {
                let n = (u * 36.0) as u64;
                LocalState::Urn { white: n / 6, black: n % 6 }
            }),
            (Box::new(BirthDeath::new(1.0, 0.3, 0.2, 3).unwrap()), |u| Grains((u * 4.0) as u64)),
        ];
        for (m, draw) in &models {
            for trial in 0..10_000u64 {
                let key = StreamKey::new(trial).with_tag(m.name());
                let x: Vec<LocalState> =
                    g.vertices().map(|v| draw(key.with(v as u64).uniform())).collect();
                let v = (key.with_tag("v").uniform() * g.n() as f64) as usize;
                check_local_contract(m.as_ref(), &g, v, &x).unwrap();
            }
        }
    }
}
