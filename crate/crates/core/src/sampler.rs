//! Exact sampling of metric 1PI and beaded graphs from the tropical measure.
//!
//! Both algorithms are driven by one explicit work stack, so the recursion
//! depth at high loop order never touches the native stack.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, MetricAssignment};
use crate::tables::CoefficientTables;
use crate::Mode;

const OMEGA_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricGraphSample {
    pub graph: Graph,
    pub coords: MetricAssignment,
    pub loops: usize,
    pub legs: usize,
}

impl MetricGraphSample {
    /// Divides all coordinates by the maximum.
    pub fn to_projective(&self) -> Result<MetricGraphSample> {
        Ok(MetricGraphSample {
            graph: self.graph.clone(),
            coords: self.coords.to_projective()?,
            loops: self.loops,
            legs: self.legs,
        })
    }

    /// `graph-text | x1,x2,...` with shortest round-trip decimals.
    pub fn to_line(&self) -> String {
        let coords: Vec<String> = self.coords.coords().iter().map(|x| format!("{x:?}")).collect();
        format!("{} | {}", self.graph, coords.join(","))
    }
}

enum Task {
    OnePi(usize, usize),
    Beaded(usize, usize),
    /// Glue the special legs, rescale by κ = λ^{1/ω}; `None` fixes κ = 1.
    Glue(Option<f64>),
    Promote,
    Concat(Vec<usize>),
}

pub struct Sampler<'t> {
    tables: &'t CoefficientTables,
}

impl<'t> Sampler<'t> {
    pub fn new(tables: &'t CoefficientTables) -> Self {
        Sampler { tables }
    }

    pub fn tables(&self) -> &CoefficientTables {
        self.tables
    }

    fn invalid(&self, loops: usize, legs: usize, reason: &str) -> Error {
        Error::InvalidSector {
            k: self.tables.k(),
            loops,
            legs,
            reason: reason.into(),
        }
    }

    /// Whether the outermost 1PI draw uses the fixed-maximum gauge.
    pub fn is_projective_top(&self, loops: usize, legs: usize) -> bool {
        self.tables.mode() == Mode::Positive
            && loops > 0
            && self
                .tables
                .omega(loops, legs)
                .is_ok_and(|w| w.abs() < OMEGA_EPS)
            && self.tables.z_top(loops, legs) > 0.0
    }

    pub fn sample_one_pi<R: Rng + ?Sized>(
        &self,
        loops: usize,
        legs: usize,
        rng: &mut R,
    ) -> Result<MetricGraphSample> {
        if !self.tables.contains(loops, legs) {
            return Err(self.invalid(loops, legs, "outside the built tables"));
        }
        let first = if self.is_projective_top(loops, legs) {
            vec![Task::Glue(None), Task::Beaded(loops - 1, legs + 2)]
        } else {
            if !(self.tables.z(loops, legs) > 0.0) {
                return Err(self.invalid(loops, legs, "Z(L,n) is not positive"));
            }
            vec![Task::OnePi(loops, legs)]
        };
        self.run(first, loops, legs, rng)
    }

    pub fn sample_beaded<R: Rng + ?Sized>(
        &self,
        loops: usize,
        legs: usize,
        rng: &mut R,
    ) -> Result<MetricGraphSample> {
        if !self.tables.contains(loops, legs) || !(self.tables.b(loops, legs) > 0.0) {
            return Err(self.invalid(loops, legs, "B(L,n) is not positive"));
        }
        self.run(vec![Task::Beaded(loops, legs)], loops, legs, rng)
    }

    fn run<R: Rng + ?Sized>(
        &self,
        mut tasks: Vec<Task>,
        loops: usize,
        legs: usize,
        rng: &mut R,
    ) -> Result<MetricGraphSample> {
        let k = self.tables.k();
        let mut values: Vec<(Graph, Vec<f64>)> = Vec::new();
        let mut pool: Vec<usize> = Vec::new();
        while let Some(task) = tasks.pop() {
            match task {
                Task::OnePi(l, n) => {
                    if l == 0 && n == k {
                        values.push((Graph::vertex(k), Vec::new()));
                    } else if l == 0 {
                        return Err(self.invalid(l, n, "no tree-level 1PI graph"));
                    } else {
                        let w = self.tables.omega(l, n)?;
                        tasks.push(Task::Glue(Some(w)));
                        tasks.push(Task::Beaded(l - 1, n + 2));
                    }
                }
                Task::Beaded(l, n) => {
                    let alias = self
                        .tables
                        .alias(l, n)
                        .ok_or_else(|| self.invalid(l, n, "no beaded sampler for this cell"))?;
                    let outcome = alias.sample(rng);
                    if outcome == 0 {
                        tasks.push(Task::Promote);
                        tasks.push(Task::OnePi(l, n));
                    } else {
                        let lp = (outcome - 1) / (n - 1);
                        let np = (outcome - 1) % (n - 1);
                        // Partial Fisher–Yates over the labels 3..=n.
                        pool.clear();
                        pool.extend(3..=n);
                        for i in 0..np {
                            let j = rng.random_range(i..pool.len());
                            pool.swap(i, j);
                        }
                        let mut subset = pool[..np].to_vec();
                        subset.sort_unstable();
                        tasks.push(Task::Concat(subset));
                        tasks.push(Task::Beaded(l - lp, n - np));
                        tasks.push(Task::OnePi(lp, np + 2));
                    }
                }
                Task::Glue(w) => {
                    let (g, mut x) = values.pop().expect("beaded value present");
                    let glued = g.glue_special_legs()?;
                    let kappa = match w {
                        Some(w) => uniform_open_closed(rng).powf(1.0 / w),
                        None => 1.0,
                    };
                    for c in x.iter_mut() {
                        *c *= kappa;
                    }
                    x.push(kappa);
                    values.push((glued, x));
                }
                Task::Promote => {
                    let (g, x) = values.pop().expect("1PI value present");
                    values.push((g.with_special_legs(Some((1, 2)))?, x));
                }
                Task::Concat(subset) => {
                    let (b, xb) = values.pop().expect("tail value present");
                    let (a, mut xa) = values.pop().expect("head value present");
                    let g = Graph::concatenate_beaded(&a, &b, &subset)?;
                    xa.extend_from_slice(&xb);
                    xa.push(uniform_open_closed(rng));
                    values.push((g, xa));
                }
            }
        }
        let (graph, coords) = values.pop().expect("one result");
        debug_assert!(values.is_empty());
        Ok(MetricGraphSample {
            graph,
            coords: MetricAssignment::from_vec(coords),
            loops,
            legs,
        })
    }
}

/// Uniform on (0,1].
pub fn uniform_open_closed<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tree_vertex() {
        let t = CoefficientTables::build(3, 3.0, Mode::Plain, 2, 8).unwrap();
        let s = Sampler::new(&t);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = s.sample_one_pi(0, 3, &mut rng).unwrap();
        assert_eq!(v.graph, Graph::vertex(3));
        assert!(v.coords.is_empty());
    }

    #[test]
    fn bubble_glued_edge_is_max() {
        let t = CoefficientTables::build(3, 3.0, Mode::Plain, 2, 8).unwrap();
        let s = Sampler::new(&t);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let b = s.sample_one_pi(1, 2, &mut rng).unwrap();
            assert_eq!(b.graph.edge_count(), 2);
            assert!(b.graph.is_one_particle_irreducible());
            let x = b.coords.coords();
            assert!(x[1] >= x[0]);
        }
    }

    #[test]
    fn beaded_tree_is_two_vertices() {
        let t = CoefficientTables::build(3, 3.0, Mode::Plain, 1, 6).unwrap();
        let s = Sampler::new(&t);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let b = s.sample_beaded(0, 4, &mut rng).unwrap();
            assert_eq!(b.graph.vertex_count(), 2);
            assert_eq!(b.graph.bridges(), vec![0]);
            assert!(b.graph.is_beaded());
        }
    }

    #[test]
    fn samples_are_well_formed() {
        let t = CoefficientTables::build(3, 3.0, Mode::Plain, 4, 12).unwrap();
        let s = Sampler::new(&t);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for l in 1..=4 {
            for n in 2..=4 {
                let one = s.sample_one_pi(l, n, &mut rng).unwrap();
                assert!(one.graph.is_k_regular(3));
                assert!(one.graph.is_one_particle_irreducible());
                assert_eq!((one.graph.loop_number(), one.graph.leg_count()), (l, n));
                assert!(one.coords.coords().iter().all(|&x| x > 0.0 && x <= 1.0));
                let bead = s.sample_beaded(l, n, &mut rng).unwrap();
                assert!(bead.graph.is_beaded());
                assert_eq!((bead.graph.loop_number(), bead.graph.leg_count()), (l, n));
            }
        }
    }

    #[test]
    fn determinism() {
        let t = CoefficientTables::build(3, 3.0, Mode::Plain, 3, 9).unwrap();
        let s = Sampler::new(&t);
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..20).map(|_| s.sample_one_pi(3, 3, &mut rng).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
    }

    #[test]
    fn invalid_sectors() {
        let t = CoefficientTables::build(4, 4.0, Mode::Positive, 3, 10).unwrap();
        let s = Sampler::new(&t);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(s.sample_one_pi(2, 2, &mut rng).is_err());
        assert!(s.sample_one_pi(9, 4, &mut rng).is_err());
        // ω = 0 at the top uses the fixed gauge.
        let top = s.sample_one_pi(3, 4, &mut rng).unwrap();
        assert_eq!(*top.coords.coords().last().unwrap(), 1.0);
    }

    #[test]
    fn projective_form() {
        let t = CoefficientTables::build(3, 3.0, Mode::Plain, 2, 8).unwrap();
        let s = Sampler::new(&t);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = s.sample_one_pi(2, 2, &mut rng).unwrap().to_projective().unwrap();
        assert_eq!(x.coords.coords().iter().copied().fold(0.0, f64::max), 1.0);
    }
}
