//! Exact Hepp bound oracles and the labelled-graph ensemble enumeration used
//! to test the polynomial-time tables.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dimension::Rational;
use crate::error::{Error, Result};
use crate::graph::{CanonicalForm, Graph, UnionFind};
use crate::montecarlo::Accumulator;
use crate::symanzik::Scratch;
use crate::Mode;

/// Hepp bound by the edge-deletion recursion. Errors when a 1PI subgraph
/// with vanishing ω is reached.
pub fn hepp_exact(g: &Graph, d: &Rational) -> Result<Rational> {
    HeppEval::new(g, d, Mode::Plain)?.eval(full_mask(g.edge_count()))
}

/// Positive Hepp bound: 1PI calls with ω ≤ 0 return zero.
pub fn hepp_positive_exact(g: &Graph, d: &Rational) -> Result<Rational> {
    HeppEval::new(g, d, Mode::Positive)?.eval(full_mask(g.edge_count()))
}

pub fn hepp_with_mode(g: &Graph, d: &Rational, mode: Mode) -> Result<Rational> {
    HeppEval::new(g, d, mode)?.eval(full_mask(g.edge_count()))
}

fn full_mask(e: usize) -> u64 {
    if e == 64 {
        u64::MAX
    } else {
        (1u64 << e) - 1
    }
}

/// Memoized on the bitmask of surviving edges; the memo lives for one call.
struct HeppEval<'a> {
    g: &'a Graph,
    d: &'a Rational,
    mode: Mode,
    memo: HashMap<u64, Rational>,
}

impl<'a> HeppEval<'a> {
    fn new(g: &'a Graph, d: &'a Rational, mode: Mode) -> Result<Self> {
        if g.edge_count() > 64 {
            return Err(Error::Contract(format!(
                "Hepp oracle limited to 64 edges, got {}",
                g.edge_count()
            )));
        }
        Ok(HeppEval {
            g,
            d,
            mode,
            memo: HashMap::new(),
        })
    }

    fn eval(&mut self, mask: u64) -> Result<Rational> {
        if mask == 0 {
            return Ok(Rational::one());
        }
        if let Some(v) = self.memo.get(&mask) {
            return Ok(v.clone());
        }
        let pieces = self.one_pi_pieces(mask);
        let value = if pieces.len() == 1 && pieces[0] == mask {
            self.eval_one_pi(mask)?
        } else {
            let mut prod = Rational::one();
            for p in pieces {
                prod *= self.eval(p)?;
                if prod.is_zero() {
                    break;
                }
            }
            prod
        };
        self.memo.insert(mask, value.clone());
        Ok(value)
    }

    fn eval_one_pi(&mut self, mask: u64) -> Result<Rational> {
        let e = mask.count_ones() as i64;
        let mut touched = vec![false; self.g.vertex_count()];
        for i in bits(mask) {
            let (a, b) = self.g.edges()[i];
            touched[a] = true;
            touched[b] = true;
        }
        let v = touched.iter().filter(|&&t| t).count() as i64;
        let loops = e - v + 1;
        let omega = Rational::from_integer(e.into())
            - self.d * Rational::new(loops.into(), BigInt::from(2));
        if omega.is_zero() || (self.mode == Mode::Positive && omega.is_negative()) {
            if self.mode == Mode::Positive {
                return Ok(Rational::zero());
            }
            return Err(Error::NonGenericDimension {
                what: format!("subgraph {}", self.describe(mask)),
            });
        }
        let mut sum = Rational::zero();
        for i in bits(mask) {
            sum += self.eval(mask & !(1u64 << i))?;
        }
        Ok(sum / omega)
    }

    /// Edge masks of the 2-edge-connected pieces with at least one edge.
    /// Bridges are dropped since they contribute a factor of one.
    fn one_pi_pieces(&self, mask: u64) -> Vec<u64> {
        let idx: Vec<usize> = bits(mask).collect();
        let sub = Graph::from_parts(
            self.g.vertex_count(),
            idx.iter().map(|&i| self.g.edges()[i]).collect(),
            Vec::new(),
            None,
        );
        let bridges = sub.bridges();
        let mut uf = UnionFind::new(self.g.vertex_count());
        let mut is_bridge = vec![false; idx.len()];
        for &b in &bridges {
            is_bridge[b] = true;
        }
        for (p, &(a, b)) in sub.edges().iter().enumerate() {
            if !is_bridge[p] {
                uf.union(a, b);
            }
        }
        let mut by_root: Vec<(usize, u64)> = Vec::new();
        for (p, &(a, _)) in sub.edges().iter().enumerate() {
            if is_bridge[p] {
                continue;
            }
            let r = uf.find(a);
            match by_root.iter_mut().find(|(root, _)| *root == r) {
                Some((_, m)) => *m |= 1u64 << idx[p],
                None => by_root.push((r, 1u64 << idx[p])),
            }
        }
        by_root.into_iter().map(|(_, m)| m).collect()
    }

    fn describe(&self, mask: u64) -> String {
        bits(mask)
            .map(|i| {
                let (a, b) = self.g.edges()[i];
                format!("{a}:{b}")
            })
            .collect::<Vec<_>>()
            .join(",")
    }
}

fn bits(mask: u64) -> impl Iterator<Item = usize> {
    (0..64).filter(move |&i| mask >> i & 1 == 1)
}

/// Plain Monte Carlo over the unit cube of ∏dz / U^tr(z)^{D/2}.
pub fn hepp_cubical_mc(g: &Graph, d: f64, n_samples: u64, seed: u64) -> Result<(f64, f64)> {
    if n_samples == 0 {
        return Err(Error::Contract("zero samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scratch = Scratch::new();
    let mut acc = Accumulator::new();
    let mut z = vec![0.0; g.edge_count()];
    for _ in 0..n_samples {
        for c in z.iter_mut() {
            *c = 1.0 - rng.random::<f64>();
        }
        let lut = scratch.log_u_tropical(g, &z)?;
        acc.push((-0.5 * d * lut).exp());
    }
    Ok((acc.mean(), acc.stderr()))
}

/// Vertex count of a k-regular sector, if integral and non-negative.
pub fn sector_vertex_count(k: usize, loops: usize, legs: usize) -> Result<usize> {
    let invalid = |reason: &str| Error::InvalidSector {
        k,
        loops,
        legs,
        reason: reason.into(),
    };
    if k < 3 {
        return Err(invalid("k must be at least 3"));
    }
    let num = 2 * loops as i64 - 2 + legs as i64;
    if num < 0 || num % (k as i64 - 2) != 0 {
        return Err(invalid("2(L-1)+n is not a non-negative multiple of k-2"));
    }
    Ok((num / (k as i64 - 2)) as usize)
}

/// One isomorphism class (all legs fixed) of 1PI graphs in a sector.
#[derive(Debug, Clone)]
pub struct EnsembleClass {
    pub graph: Graph,
    /// 1/|Aut(G)|.
    pub weight: Rational,
    pub hepp: Rational,
}

/// Z(L,n) = Σ_G H(G)/|Aut(G)| over 1PI k-regular graphs with labelled legs.
pub fn ensemble_sum_oracle(
    k: usize,
    d: &Rational,
    loops: usize,
    legs: usize,
    mode: Mode,
) -> Result<Rational> {
    let classes = ensemble_classes(k, d, loops, legs, mode)?;
    Ok(classes.iter().map(|c| &c.weight * &c.hepp).sum())
}

/// Enumerates labelled-vertex configurations (legs placed on vertices, then
/// a multigraph on the remaining valences) and groups them by isomorphism
/// class. A configuration with edge multiplicities a_uv and s_v self-loops at
/// v arises from (k!)^V / (∏a_uv! ∏2^{s_v}s_v!) half-edge pairings, so its
/// share of 1/|Aut| is 1/(V! ∏a_uv! ∏2^{s_v}s_v!).
///
/// Vertex relabelling is factored out by placing leg blocks on the first
/// vertices only: a partition of the legs into b blocks has V!/(V−b)!
/// placements with equal contributions.
pub fn ensemble_classes(
    k: usize,
    d: &Rational,
    loops: usize,
    legs: usize,
    mode: Mode,
) -> Result<Vec<EnsembleClass>> {
    let v = sector_vertex_count(k, loops, legs)?;
    if v == 0 || v > 10 {
        return Err(Error::InvalidSector {
            k,
            loops,
            legs,
            reason: format!("{v} vertices is outside the enumerable range 1..=10"),
        });
    }
    if loops == 0 && v >= 2 {
        // Every tree with an edge has a bridge.
        return Ok(Vec::new());
    }
    let mut en = Enumerator {
        k,
        v,
        d,
        mode,
        classes: Vec::new(),
        index: HashMap::new(),
        leg_vertex: vec![0; legs],
        residual: vec![k; v],
        adj: vec![vec![0; v]; v],
        self_loops: vec![0; v],
        block_prefactor: Rational::one(),
        error: None,
    };
    en.partitions(0, 0);
    if let Some(e) = en.error {
        return Err(e);
    }
    Ok(en.classes)
}

struct Enumerator<'a> {
    k: usize,
    v: usize,
    d: &'a Rational,
    mode: Mode,
    classes: Vec<EnsembleClass>,
    index: HashMap<CanonicalForm, usize>,
    leg_vertex: Vec<usize>,
    residual: Vec<usize>,
    adj: Vec<Vec<usize>>,
    self_loops: Vec<usize>,
    block_prefactor: Rational,
    error: Option<Error>,
}

impl Enumerator<'_> {
    /// Restricted growth strings: leg i joins an existing block or opens
    /// block `blocks`.
    fn partitions(&mut self, leg: usize, blocks: usize) {
        if self.error.is_some() {
            return;
        }
        if leg == self.leg_vertex.len() {
            self.block_prefactor = Rational::new(BigInt::one(), factorial(self.v - blocks));
            self.vertex(0);
            return;
        }
        for b in 0..=blocks.min(self.v - 1) {
            if self.residual[b] == 0 {
                continue;
            }
            self.leg_vertex[leg] = b;
            self.residual[b] -= 1;
            self.partitions(leg + 1, blocks.max(b + 1));
            self.residual[b] += 1;
        }
    }

    fn vertex(&mut self, u: usize) {
        if u == self.v {
            self.emit();
            return;
        }
        let r = self.residual[u];
        for s in 0..=r / 2 {
            self.self_loops[u] = s;
            self.residual[u] -= 2 * s;
            self.spread(u, u + 1);
            self.residual[u] += 2 * s;
        }
        self.self_loops[u] = 0;
    }

    /// Distributes the residual valence of `u` over vertices w ≥ `w0`.
    fn spread(&mut self, u: usize, w0: usize) {
        if self.residual[u] == 0 {
            self.vertex(u + 1);
            return;
        }
        if w0 == self.v {
            return;
        }
        let max = self.residual[u].min(self.residual[w0]);
        for c in (0..=max).rev() {
            self.adj[u][w0] = c;
            self.residual[u] -= c;
            self.residual[w0] -= c;
            self.spread(u, w0 + 1);
            self.residual[u] += c;
            self.residual[w0] += c;
        }
        self.adj[u][w0] = 0;
    }

    fn emit(&mut self) {
        if self.error.is_some() {
            return;
        }
        let mut edges = Vec::new();
        let mut denom = BigInt::one();
        for u in 0..self.v {
            let s = self.self_loops[u];
            for _ in 0..s {
                edges.push((u, u));
            }
            denom *= factorial(s) * BigInt::from(2u32).pow(s as u32);
            for w in u + 1..self.v {
                let a = self.adj[u][w];
                for _ in 0..a {
                    edges.push((u, w));
                }
                denom *= factorial(a);
            }
        }
        let g = Graph::from_parts(self.v, edges, self.leg_vertex.clone(), None);
        if !g.is_one_particle_irreducible() {
            return;
        }
        debug_assert!(g.is_k_regular(self.k));
        let share = &self.block_prefactor / Rational::from_integer(denom);
        let key = g.canonical_form().expect("at most ten vertices");
        if let Some(&i) = self.index.get(&key) {
            self.classes[i].weight += share;
            return;
        }
        match hepp_with_mode(&g, self.d, self.mode) {
            Ok(hepp) => {
                self.index.insert(key, self.classes.len());
                self.classes.push(EnsembleClass {
                    graph: g,
                    weight: share,
                    hepp,
                });
            }
            Err(e) => self.error = Some(e),
        }
    }
}

fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}
