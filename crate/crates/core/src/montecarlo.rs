//! Streaming estimators over the moduli space of metric graphs.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::sampler::Sampler;
use crate::symanzik::{residual_f_with, Scratch, SymanzikContext};
use crate::tables::{omega, CoefficientTables};
use crate::Mode;

/// Single-pass mean and variance with pairwise merging.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Accumulator {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
    pub aux_count: u64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Accumulator) {
        if other.count == 0 {
            self.aux_count += other.aux_count;
            return;
        }
        if self.count == 0 {
            let aux = self.aux_count;
            *self = *other;
            self.aux_count += aux;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        let wa = self.count as f64 / n;
        let wb = other.count as f64 / n;
        self.mean = wa * self.mean + wb * other.mean;
        self.m2 += other.m2 + delta * delta * self.count as f64 * wb;
        self.count += other.count;
        self.aux_count += other.aux_count;
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population variance m2/count.
    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.m2 / self.count as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSpec {
    pub n_samples: u64,
    pub seed: u64,
    pub workers: usize,
    pub chunk_size: u64,
}

impl RunSpec {
    pub fn new(n_samples: u64, seed: u64, workers: usize) -> Self {
        RunSpec {
            n_samples,
            seed,
            workers,
            chunk_size: 1 << 16,
        }
    }
}

/// Splits the run into chunks, each with its own RNG stream (the chunk
/// index), and merges chunk accumulators in chunk order. The result
/// therefore does not depend on the worker count.
///
/// `make` builds per-chunk state; the returned closure fills one value per
/// channel and reports an aux hit.
pub fn run_parallel<M, F>(spec: &RunSpec, channels: usize, make: M) -> Result<Vec<Accumulator>>
where
    M: Fn() -> F + Sync,
    F: FnMut(&mut ChaCha8Rng, &mut [f64]) -> Result<bool>,
{
    if spec.n_samples == 0 {
        return Err(Error::Contract("zero samples requested".into()));
    }
    if spec.workers == 0 || spec.chunk_size == 0 {
        return Err(Error::Contract("workers and chunk size must be positive".into()));
    }
    let chunks = spec.n_samples.div_ceil(spec.chunk_size);
    let work = |c: u64| -> std::result::Result<Vec<Accumulator>, (u64, Error)> {
        let start = c * spec.chunk_size;
        let len = spec.chunk_size.min(spec.n_samples - start);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(c);
        let mut eval = make();
        let mut acc = vec![Accumulator::new(); channels];
        let mut vals = vec![0.0; channels];
        for i in 0..len {
            match eval(&mut rng, &mut vals) {
                Ok(hit) => {
                    for (a, &v) in acc.iter_mut().zip(&vals) {
                        a.push(v);
                    }
                    if hit {
                        acc[0].aux_count += 1;
                    }
                }
                Err(e) => return Err((i, e)),
            }
        }
        Ok(acc)
    };
    let results: Vec<_> = if spec.workers == 1 {
        (0..chunks).map(work).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(spec.workers)
            .build()
            .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
        pool.install(|| (0..chunks).into_par_iter().map(work).collect())
    };
    let mut total = vec![Accumulator::new(); channels];
    let mut completed = 0;
    let mut failure = None;
    for r in results {
        match r {
            Ok(acc) => {
                completed += acc[0].count;
                for (t, a) in total.iter_mut().zip(&acc) {
                    t.merge(a);
                }
            }
            Err((done, e)) => {
                completed += done;
                failure.get_or_insert(e);
            }
        }
    }
    match failure {
        Some(e) => Err(Error::PartialResult {
            completed,
            reason: e.to_string(),
        }),
        None => Ok(total),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub name: String,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub quantity: String,
    pub k: usize,
    pub dimension: f64,
    pub loops: usize,
    pub legs: usize,
    pub samples: u64,
    pub aux_hits: u64,
    pub value: f64,
    pub stderr: f64,
    pub normalization: f64,
    pub wall_time_s: f64,
    /// Further quantities estimated from the same samples.
    pub companions: Vec<Estimate>,
}

impl EstimateReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }

    pub fn csv_header() -> &'static str {
        "L,samples,value,stderr,time_s"
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{:?},{:?},{:.3}",
            self.loops, self.samples, self.value, self.stderr, self.wall_time_s
        )
    }
}

/// Γ̃ for φ³ at D = 3 with n legs: Z(L,n)·E[f] over 1PI samples.
pub fn estimate_phi3_vertex(loops: usize, n_samples: u64, seed: u64, workers: usize) -> Result<EstimateReport> {
    let tables = CoefficientTables::build_for_sector(3, 3.0, Mode::Plain, loops, 3)?;
    estimate_residual(&tables, loops, 3, 1.0, &RunSpec::new(n_samples, seed, workers))
}

/// Z(L,n)·E[f] for any plain-mode table with ω(L,n) > 0.
pub fn estimate_residual(
    tables: &CoefficientTables,
    loops: usize,
    legs: usize,
    mass_ratio: f64,
    spec: &RunSpec,
) -> Result<EstimateReport> {
    let invalid = |reason: &str| Error::InvalidSector {
        k: tables.k(),
        loops,
        legs,
        reason: reason.into(),
    };
    if tables.mode() != Mode::Plain {
        return Err(Error::Contract("residual estimator needs plain-mode tables".into()));
    }
    if legs < 2 || loops == 0 {
        return Err(invalid("needs at least one loop and two legs"));
    }
    let w = omega(tables.k(), tables.dimension(), loops, legs)?;
    if !(w > 0.0) {
        return Err(invalid("superficial degree of divergence is not positive"));
    }
    let z = tables.z(loops, legs);
    if !tables.contains(loops, legs) || !(z > 0.0) {
        return Err(invalid("Z(L,n) is not positive in the given tables"));
    }
    let ctx = SymanzikContext::new(tables.dimension(), mass_ratio, w)?;
    let sampler = Sampler::new(tables);
    let start = Instant::now();
    let acc = run_parallel(spec, 1, || {
        let mut scratch = Scratch::new();
        let sampler = &sampler;
        move |rng: &mut ChaCha8Rng, out: &mut [f64]| {
            let s = sampler.sample_one_pi(loops, legs, rng)?;
            out[0] = residual_f_with(&mut scratch, &s.graph, s.coords.coords(), &ctx)?;
            Ok(false)
        }
    })?;
    Ok(EstimateReport {
        quantity: "gamma_tilde".into(),
        k: tables.k(),
        dimension: tables.dimension(),
        loops,
        legs,
        samples: acc[0].count,
        aux_hits: 0,
        value: z * acc[0].mean(),
        stderr: z * acc[0].stderr(),
        normalization: z,
        wall_time_s: start.elapsed().as_secs_f64(),
        companions: Vec::new(),
    })
}

/// Primitive φ⁴ β-function and its Hepp version at loop order L.
pub fn estimate_beta_prim(loops: usize, n_samples: u64, seed: u64, workers: usize) -> Result<EstimateReport> {
    let tables = CoefficientTables::build_for_sector(4, 4.0, Mode::Positive, loops, 4)?;
    estimate_beta_prim_with(&tables, loops, &RunSpec::new(n_samples, seed, workers))
}

pub fn estimate_beta_prim_with(
    tables: &CoefficientTables,
    loops: usize,
    spec: &RunSpec,
) -> Result<EstimateReport> {
    if tables.k() != 4 || tables.dimension() != 4.0 || tables.mode() != Mode::Positive {
        return Err(Error::Contract(format!(
            "β estimator needs k=4, D=4 positive tables, got k={}, D={}, mode={}",
            tables.k(),
            tables.dimension(),
            tables.mode()
        )));
    }
    let sampler = Sampler::new(tables);
    if !sampler.is_projective_top(loops, 4) {
        return Err(Error::InvalidSector {
            k: 4,
            loops,
            legs: 4,
            reason: "no positive top-level normalization for this loop order".into(),
        });
    }
    let norm = 2.0 * tables.z_top(loops, 4);
    let start = Instant::now();
    let acc = run_parallel(spec, 2, || {
        let mut scratch = Scratch::new();
        let mut cuts = CutChecker::default();
        let sampler = &sampler;
        move |rng: &mut ChaCha8Rng, out: &mut [f64]| {
            let s = sampler.sample_one_pi(loops, 4, rng)?;
            if !cuts.is_primitive(&s.graph)? {
                out[0] = 0.0;
                out[1] = 0.0;
                return Ok(false);
            }
            let x = s.coords.coords();
            let lut = scratch.log_u_tropical(&s.graph, x)?;
            let lu = scratch.log_u_exact(&s.graph, x)?;
            out[0] = (2.0 * (lut - lu)).exp();
            out[1] = 1.0;
            Ok(true)
        }
    })?;
    Ok(EstimateReport {
        quantity: "beta_prim".into(),
        k: 4,
        dimension: 4.0,
        loops,
        legs: 4,
        samples: acc[0].count,
        aux_hits: acc[0].aux_count,
        value: norm * acc[0].mean(),
        stderr: norm * acc[0].stderr(),
        normalization: norm,
        wall_time_s: start.elapsed().as_secs_f64(),
        companions: vec![Estimate {
            name: "beta_hepp_prim".into(),
            value: norm * acc[1].mean(),
            stderr: norm * acc[1].stderr(),
        }],
    })
}

/// Whether a 4-regular, 4-leg 1PI graph has no subdivergence.
pub fn is_primitive(g: &Graph) -> Result<bool> {
    CutChecker::default().is_primitive(g)
}

/// Cut enumeration with reusable buffers. Every internal-edge set C with
/// |C| ≤ 4 is removed in lexicographic order; when the rest falls apart,
/// each component K with at least two vertices is tested for
/// ext(K) = 4|K| − 2·(edges inside K) ≤ 4.
#[derive(Debug, Default)]
pub struct CutChecker {
    mult: Vec<u8>,
    adj: Vec<u64>,
    cand: Vec<(usize, usize)>,
}

impl CutChecker {
    pub fn is_primitive(&mut self, g: &Graph) -> Result<bool> {
        let n = g.vertex_count();
        if !g.is_k_regular(4) || g.leg_count() != 4 || n > 64 || !g.is_one_particle_irreducible() {
            return Err(Error::Contract(format!(
                "primitivity needs a 1PI 4-regular 4-point graph with at most 64 vertices: {g}"
            )));
        }
        if n <= 2 {
            return Ok(true);
        }
        self.mult.clear();
        self.mult.resize(n * n, 0);
        self.adj.clear();
        self.adj.resize(n, 0);
        self.cand.clear();
        for &(a, b) in g.edges() {
            if a == b {
                continue;
            }
            self.mult[a * n + b] += 1;
            self.mult[b * n + a] += 1;
            self.adj[a] |= 1 << b;
            self.adj[b] |= 1 << a;
            self.cand.push((a, b));
        }
        let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let m = self.cand.len();
        let mut idx = [0usize; 4];
        for size in 1..=4.min(m) {
            for (i, slot) in idx.iter_mut().enumerate().take(size) {
                *slot = i;
            }
            loop {
                for &e in &idx[..size] {
                    self.remove(self.cand[e], n);
                }
                let reach = reach_from(&self.adj, 0);
                let bad = reach != full && self.has_small_component(g, reach, full);
                for &e in &idx[..size] {
                    self.restore(self.cand[e], n);
                }
                if bad {
                    return Ok(false);
                }
                // Next combination in lexicographic order.
                let mut p = size;
                while p > 0 && idx[p - 1] == m - size + p - 1 {
                    p -= 1;
                }
                if p == 0 {
                    break;
                }
                idx[p - 1] += 1;
                for q in p..size {
                    idx[q] = idx[q - 1] + 1;
                }
            }
        }
        Ok(true)
    }

    fn remove(&mut self, (a, b): (usize, usize), n: usize) {
        self.mult[a * n + b] -= 1;
        self.mult[b * n + a] -= 1;
        if self.mult[a * n + b] == 0 {
            self.adj[a] &= !(1 << b);
            self.adj[b] &= !(1 << a);
        }
    }

    fn restore(&mut self, (a, b): (usize, usize), n: usize) {
        self.mult[a * n + b] += 1;
        self.mult[b * n + a] += 1;
        self.adj[a] |= 1 << b;
        self.adj[b] |= 1 << a;
    }

    fn has_small_component(&self, g: &Graph, first: u64, full: u64) -> bool {
        let mut left = full;
        let mut comp = first;
        loop {
            left &= !comp;
            if comp.count_ones() >= 2 {
                let inside = g
                    .edges()
                    .iter()
                    .filter(|&&(a, b)| comp >> a & 1 == 1 && comp >> b & 1 == 1)
                    .count() as u32;
                if 4 * comp.count_ones() <= 4 + 2 * inside {
                    return true;
                }
            }
            if left == 0 {
                return false;
            }
            comp = reach_from(&self.adj, left.trailing_zeros() as usize);
        }
    }
}

fn reach_from(adj: &[u64], start: usize) -> u64 {
    let mut seen = 1u64 << start;
    let mut frontier = seen;
    while frontier != 0 {
        let v = frontier.trailing_zeros() as usize;
        frontier &= frontier - 1;
        let nb = adj[v] & !seen;
        seen |= nb;
        frontier |= nb;
    }
    seen
}

/// A-priori bound on the relative error of one sample: 2^{E·D/2}·E^{ω}.
/// Tree sectors have constant integrand and bound 1.
pub fn relative_error_bound(loops: usize, legs: usize, k: usize, d: f64) -> f64 {
    if loops == 0 {
        return 1.0;
    }
    let e = ((loops as f64 - 1.0) * k as f64 + legs as f64) / (k as f64 - 2.0);
    let w = e - loops as f64 * d / 2.0;
    (e * d / 2.0 * std::f64::consts::LN_2 + w.max(0.0) * e.ln()).exp()
}
