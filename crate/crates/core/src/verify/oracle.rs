//! Exact transient law of a tiny system by explicit state enumeration.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexId};
use crate::ips::{apply_generator, check_local_contract, JumpKernel, LocalState, Observable};

/// Largest state space the oracle will enumerate.
pub const STATE_CAP: usize = 50_000;

/// Largest state space for which dense matrix exponentials are formed.
pub const DENSE_CAP: usize = 2_000;

/// Generator of the process on a finite graph with every vertex active,
/// restricted to a finite product domain. Jumps that leave the domain go to
/// one extra absorbing overflow state.
#[derive(Debug, Clone)]
pub struct CtmcOracle {
    states: Vec<Vec<LocalState>>,
    domains: Vec<Vec<LocalState>>,
    overflow: Option<usize>,
    /// Off-diagonal entries per row.
    rows: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
}

impl CtmcOracle {
    /// Uses the kernel's own finite local state space at every vertex.
    pub fn new<K: JumpKernel + ?Sized>(kernel: &K, g: &Graph) -> Result<Self> {
        let domain = kernel.finite_domain().ok_or_else(|| {
            Error::InvalidParameter(format!(
                "{} has no finite local state space; pass explicit domains",
                kernel.name()
            ))
        })?;
        Self::with_domains(kernel, g, &vec![domain; g.n()])
    }

    /// `domains[v]` lists the allowed states at `v`.
    pub fn with_domains<K: JumpKernel + ?Sized>(
        kernel: &K,
        g: &Graph,
        domains: &[Vec<LocalState>],
    ) -> Result<Self> {
        if domains.len() != g.n() {
            return Err(Error::InvalidParameter(format!(
                "{} domains for {} vertices",
                domains.len(),
                g.n()
            )));
        }
        let mut count: usize = 1;
        for d in domains {
            if d.is_empty() {
                return Err(Error::InvalidParameter("empty local domain".into()));
            }
            count = count
                .checked_mul(d.len())
                .filter(|&c| c <= STATE_CAP)
                .ok_or(Error::StateSpaceTooLarge {
                    states: usize::MAX,
                    cap: STATE_CAP,
                })?;
        }
        let mut states = Vec::with_capacity(count);
        let mut digits = vec![0usize; g.n()];
        for _ in 0..count {
            states.push(digits.iter().enumerate().map(|(v, &i)| domains[v][i]).collect());
            for (v, d) in digits.iter_mut().enumerate() {
                *d += 1;
                if *d < domains[v].len() {
                    break;
                }
                *d = 0;
            }
        }
        let mut oracle = CtmcOracle {
            states,
            domains: domains.to_vec(),
            overflow: None,
            rows: Vec::new(),
            diag: Vec::new(),
        };
        oracle.assemble(kernel, g)?;
        Ok(oracle)
    }

    fn assemble<K: JumpKernel + ?Sized>(&mut self, kernel: &K, g: &Graph) -> Result<()> {
        let all: Vec<VertexId> = g.vertices().collect();
        let n = self.states.len();
        let mut rows = vec![Vec::new(); n];
        let mut leak = vec![0.0; n];
        for (i, row) in rows.iter_mut().enumerate() {
            let x = self.states[i].clone();
            let mut candidates = Vec::new();
            for &v in &all {
                for t in check_local_contract(kernel, g, v, &x)? {
                    let mut y = x.clone();
                    for &(u, s) in &t.patch {
                        y[u] = s;
                    }
                    match self.index_of(&y) {
                        Some(j) if j != i => candidates.push(j),
                        Some(_) => {}
                        None => leak[i] += t.rate,
                    }
                }
            }
            candidates.sort_unstable();
            candidates.dedup();
            for j in candidates {
                let target = self.states[j].clone();
                let ind = Observable::new(all.clone(), move |y| f64::from(u8::from(y == target)));
                let q = apply_generator(kernel, g, &all, &ind, &x)?;
                if q > 0.0 {
                    row.push((j, q));
                }
            }
        }
        if leak.iter().any(|&l| l > 0.0) {
            if n + 1 > STATE_CAP {
                return Err(Error::StateSpaceTooLarge {
                    states: n + 1,
                    cap: STATE_CAP,
                });
            }
            for (row, &l) in rows.iter_mut().zip(&leak) {
                if l > 0.0 {
                    row.push((n, l));
                }
            }
            rows.push(Vec::new());
            self.overflow = Some(n);
        }
        self.diag = rows
            .iter()
            .map(|r| -r.iter().map(|&(_, q)| q).sum::<f64>())
            .collect();
        self.rows = rows;
        Ok(())
    }

    /// Number of states including the overflow state.
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn overflow(&self) -> Option<usize> {
        self.overflow
    }

    pub fn state(&self, i: usize) -> Option<&[LocalState]> {
        self.states.get(i).map(Vec::as_slice)
    }

    pub fn index_of(&self, x: &[LocalState]) -> Option<usize> {
        if x.len() != self.domains.len() {
            return None;
        }
        let mut idx = 0;
        let mut stride = 1;
        for (v, s) in x.iter().enumerate() {
            let d = self.domains[v].iter().position(|t| t == s)?;
            idx += d * stride;
            stride *= self.domains[v].len();
        }
        Some(idx)
    }

    pub fn generator(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut q = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, r) in row {
                q[(i, j)] += r;
            }
            q[(i, i)] = self.diag[i];
        }
        q
    }

    /// Largest absolute row sum of the generator.
    pub fn row_sum_error(&self) -> f64 {
        self.rows
            .iter()
            .zip(&self.diag)
            .map(|(r, &d)| (r.iter().map(|&(_, q)| q).sum::<f64>() + d).abs())
            .fold(0.0, f64::max)
    }

    /// `P_t = exp(tQ)` as a dense matrix.
    pub fn transition_matrix(&self, t: f64) -> Result<DMatrix<f64>> {
        if self.len() > DENSE_CAP {
            return Err(Error::StateSpaceTooLarge {
                states: self.len(),
                cap: DENSE_CAP,
            });
        }
        Ok(expm(&(self.generator() * t)))
    }

    /// Row `i` of `P_t`: by the dense exponential when small, otherwise by
    /// uniformization on the sparse generator.
    pub fn transition_row(&self, i: usize, t: f64) -> Vec<f64> {
        if self.len() <= DENSE_CAP {
            let p = self.transition_matrix(t).expect("size checked");
            return p.row(i).iter().copied().collect();
        }
        let mut p = vec![0.0; self.len()];
        p[i] = 1.0;
        self.uniformize(p, t)
    }

    /// `p P_t` by uniformization, with the time split so that `Λt ≤ 50`.
    pub fn uniformize(&self, p: Vec<f64>, t: f64) -> Vec<f64> {
        let lambda = self.diag.iter().map(|d| -d).fold(0.0, f64::max);
        if lambda == 0.0 || t == 0.0 {
            return p;
        }
        let steps = (lambda * t / 50.0).ceil().max(1.0) as usize;
        let h = t / steps as f64;
        let mut p = p;
        for _ in 0..steps {
            p = self.uniformize_step(&p, lambda, h);
        }
        p
    }

    fn uniformize_step(&self, p: &[f64], lambda: f64, t: f64) -> Vec<f64> {
        let lt = lambda * t;
        let mut weight = (-lt).exp();
        let mut cumulative = weight;
        let mut term = p.to_vec();
        let mut out: Vec<f64> = term.iter().map(|x| x * weight).collect();
        let mut k = 0usize;
        while 1.0 - cumulative > 1e-15 && k < 10_000 {
            // term ← term (I + Q/Λ)
            let mut next: Vec<f64> = term
                .iter()
                .zip(&self.diag)
                .map(|(x, d)| x * (1.0 + d / lambda))
                .collect();
            for (i, row) in self.rows.iter().enumerate() {
                if term[i] != 0.0 {
                    for &(j, q) in row {
                        next[j] += term[i] * q / lambda;
                    }
                }
            }
            term = next;
            k += 1;
            weight *= lt / k as f64;
            cumulative += weight;
            for (o, x) in out.iter_mut().zip(&term) {
                *o += weight * x;
            }
        }
        out
    }

    /// `(P_t f)(x_i)` together with the probability of the overflow state,
    /// on which `f` is taken to be 0.
    pub fn expectation(&self, f: &Observable, i: usize, t: f64) -> (f64, f64) {
        let row = self.transition_row(i, t);
        let mut value = 0.0;
        for (j, &p) in row.iter().enumerate() {
            if Some(j) != self.overflow {
                value += p * f.eval(&self.states[j]);
            }
        }
        (value, self.overflow.map_or(0.0, |o| row[o]))
    }

    /// `max |P_s P_t − P_{s+t}|` entrywise.
    pub fn chapman_kolmogorov_error(&self, s: f64, t: f64) -> Result<f64> {
        let lhs = self.transition_matrix(s)? * self.transition_matrix(t)?;
        let rhs = self.transition_matrix(s + t)?;
        Ok((lhs - rhs).amax())
    }
}

/// Matrix exponential by scaling and squaring with a Taylor core.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    let norm1 = (0..n)
        .map(|j| a.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm1 > 0.5 {
        (norm1 / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let b = a / 2f64.powi(squarings);
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=40 {
        term = &term * &b / k as f64;
        sum += &term;
        if term.amax() < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ips::{Contact, DiscreteSandpile, LocalState::*, Voter};

    #[test]
    fn expm_known_values() {
        // rotation generator
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let e = expm(&(a * 1.3));
        assert!((e[(0, 0)] - 1.3f64.cos()).abs() < 1e-14);
        assert!((e[(1, 0)] - 1.3f64.sin()).abs() < 1e-14);
        // two-state chain with rates a, b: P_t(0,0) = b/(a+b) + a/(a+b) e^{-(a+b)t}
        let (ra, rb, t) = (2.0, 0.5, 0.7);
        let q = DMatrix::from_row_slice(2, 2, &[-ra, ra, rb, -rb]);
        let p = expm(&(q * t));
        let exact = rb / (ra + rb) + ra / (ra + rb) * (-(ra + rb) * t).exp();
        assert!((p[(0, 0)] - exact).abs() < 1e-14);
        // large norm exercises squaring
        let big = DMatrix::from_row_slice(2, 2, &[-50.0, 50.0, 30.0, -30.0]);
        let p = expm(&big);
        for i in 0..2 {
            assert!((p.row(i).sum() - 1.0).abs() < 1e-12, "{}", p.row(i).sum() - 1.0);
        }
    }

    #[test]
    fn voter_k2_generator() {
        // K2 voter: from (1,0) each vertex flips at rate 1 to consensus.
        let g = Graph::path(2);
        let o = CtmcOracle::new(&Voter::new(1.0).unwrap(), &g).unwrap();
        assert_eq!(o.len(), 4);
        let i = o.index_of(&[Spin(1), Spin(0)]).unwrap();
        let q = o.generator();
        assert_eq!(q[(i, i)], -2.0);
        assert_eq!(q[(i, o.index_of(&[Spin(0), Spin(0)]).unwrap())], 1.0);
        assert_eq!(q[(i, o.index_of(&[Spin(1), Spin(1)]).unwrap())], 1.0);
        assert!(o.row_sum_error() < 1e-12);
        // P(still discordant at t) = e^{-2t}
        let row = o.transition_row(i, 0.4);
        assert!((row[i] - (-0.8f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn uniformization_matches_dense_exponential() {
        let g = Graph::complete(3);
        for kernel in [
            Box::new(Voter::new(1.0).unwrap()) as Box<dyn JumpKernel>,
            Box::new(Contact::new(1.5, 1.0).unwrap()),
        ] {
            let o = CtmcOracle::new(&kernel, &g).unwrap();
            for t in [0.1, 0.5, 3.0] {
                let p = o.transition_matrix(t).unwrap();
                for i in 0..o.len() {
                    let mut e = vec![0.0; o.len()];
                    e[i] = 1.0;
                    let u = o.uniformize(e, t);
                    for j in 0..o.len() {
                        assert!((u[j] - p[(i, j)]).abs() < 1e-12);
                    }
                    assert!((p.row(i).sum() - 1.0).abs() < 1e-9);
                    assert!(p.row(i).iter().all(|&x| x >= -1e-12));
                }
            }
            assert!(o.chapman_kolmogorov_error(0.2, 0.3).unwrap() < 1e-8);
        }
    }

    #[test]
    fn full_generator_matches_pairwise_assembly() {
        // brute force: Q(x,y) = G 1_y (x) for every pair
        let g = Graph::path(3);
        let kernel = Contact::new(0.8, 2.0).unwrap();
        let o = CtmcOracle::new(&kernel, &g).unwrap();
        let q = o.generator();
        let all = vec![0, 1, 2];
        for i in 0..o.len() {
            for j in 0..o.len() {
                if i == j {
                    continue;
                }
                let target = o.state(j).unwrap().to_vec();
                let ind = Observable::new(all.clone(), move |y| f64::from(u8::from(y == target)));
                let val = apply_generator(&kernel, &g, &all, &ind, o.state(i).unwrap()).unwrap();
                assert_eq!(q[(i, j)], val);
            }
        }
    }

    #[test]
    fn sandpile_overflow_is_absorbing() {
        let g = Graph::path(2);
        let domains = vec![(0..=3).map(Grains).collect::<Vec<_>>(); 2];
        let o = CtmcOracle::with_domains(&DiscreteSandpile::new(1.0).unwrap(), &g, &domains).unwrap();
        // two grains in total can never exceed the cap
        let i = o.index_of(&[Grains(2), Grains(0)]).unwrap();
        let (_, mass) = o.expectation(&Observable::constant(1.0), i, 5.0);
        assert!(mass.abs() < 1e-15);
        let star = Graph::star(2);
        let domains = vec![(0..=2).map(Grains).collect::<Vec<_>>(); 3];
        let o = CtmcOracle::with_domains(&DiscreteSandpile::new(1.0).unwrap(), &star, &domains).unwrap();
        let of = o.overflow().unwrap();
        let i = o.index_of(&[Grains(2), Grains(2), Grains(0)]).unwrap();
        // the center holds 2 = deg and is stable; leaf 1 holds 2 > 1 and
        // topples into the center, which would reach 3 > cap
        let q = o.generator();
        assert_eq!(q[(i, of)], 1.0);
        assert!(q.row(of).iter().all(|&x| x == 0.0));
        let (_, mass) = o.expectation(&Observable::constant(1.0), i, 2.0);
        assert!(mass > 0.5);
    }

    #[test]
    fn state_cap() {
        let g = Graph::path(17);
        let err = CtmcOracle::new(&Voter::new(1.0).unwrap(), &g).unwrap_err();
        assert!(matches!(err, Error::StateSpaceTooLarge { .. }));
    }
}
