//! First Symanzik polynomial, its tropical approximation, the mass term and
//! the residual integrand. Everything is evaluated in log space.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::graph::{Graph, MetricAssignment, UnionFind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymanzikContext {
    pub dimension: f64,
    pub mass_ratio: f64,
    pub omega: f64,
}

impl SymanzikContext {
    pub fn new(dimension: f64, mass_ratio: f64, omega: f64) -> Result<Self> {
        if !dimension.is_finite() || !(mass_ratio > 0.0) || !omega.is_finite() {
            return Err(Error::Contract(format!(
                "bad context D={dimension}, mass ratio={mass_ratio}, omega={omega}"
            )));
        }
        Ok(SymanzikContext {
            dimension,
            mass_ratio,
            omega,
        })
    }
}

/// Reusable buffers so the sampling hot path does not allocate.
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    order: Vec<usize>,
    uf: Option<UnionFind>,
    weights: Vec<f64>,
}

impl Scratch {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn log_u_tropical(&mut self, g: &Graph, x: &[f64]) -> Result<f64> {
        let n = g.vertex_count();
        self.order.clear();
        self.order.extend(0..x.len());
        // Stable sort keeps ties in edge-index order.
        self.order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
        let uf = self.uf.get_or_insert_with(|| UnionFind::new(n));
        uf.reset(n);
        let mut joined = 0;
        let mut total = 0.0;
        let mut tree = 0.0;
        for &e in &self.order {
            let (a, b) = g.edges()[e];
            let lx = x[e].ln();
            total += lx;
            if a != b && joined + 1 < n && uf.union(a, b) {
                joined += 1;
                tree += lx;
            }
        }
        if joined + 1 != n {
            return Err(Error::Disconnected);
        }
        Ok(total - tree)
    }

    pub fn log_u_exact(&mut self, g: &Graph, x: &[f64]) -> Result<f64> {
        let n = g.vertex_count();
        if n == 0 {
            return Err(Error::Disconnected);
        }
        let sum_log: f64 = x.iter().map(|v| v.ln()).sum();
        if n == 1 {
            return Ok(sum_log);
        }
        let xmin = x.iter().copied().fold(f64::INFINITY, f64::min);
        // Off-diagonal weights of the Laplacian with edge weights xmin/x_e,
        // all in (0,1]. The last vertex is the ground.
        let w = &mut self.weights;
        w.clear();
        w.resize(n * n, 0.0);
        for (e, &(a, b)) in g.edges().iter().enumerate() {
            if a != b {
                let c = xmin / x[e];
                w[a * n + b] += c;
                w[b * n + a] += c;
            }
        }
        // Eliminate vertices 0..n-1 in order. Each pivot is the sum of the
        // remaining off-diagonal weights, so no subtraction ever occurs.
        let mut log_det = 0.0;
        for i in 0..n - 1 {
            let mut pivot = 0.0;
            for j in i + 1..n {
                pivot += w[i * n + j];
            }
            if !(pivot > 0.0) || !pivot.is_finite() {
                return Err(Error::Evaluation {
                    graph: g.to_string(),
                    reason: format!("non-positive pivot {pivot} at vertex {i}"),
                });
            }
            log_det += pivot.ln();
            for j in i + 1..n {
                let wij = w[i * n + j];
                if wij == 0.0 {
                    continue;
                }
                let f = wij / pivot;
                for k in j + 1..n {
                    let add = f * w[i * n + k];
                    if add != 0.0 {
                        w[j * n + k] += add;
                        w[k * n + j] += add;
                    }
                }
            }
        }
        Ok(sum_log + log_det - (n - 1) as f64 * xmin.ln())
    }
}

pub fn log_u_tropical(g: &Graph, m: &MetricAssignment) -> Result<f64> {
    Scratch::new().log_u_tropical(g, m.coords())
}

pub fn log_u_exact(g: &Graph, m: &MetricAssignment) -> Result<f64> {
    Scratch::new().log_u_exact(g, m.coords())
}

pub fn v_tropical(g: &Graph, m: &MetricAssignment) -> Result<f64> {
    if g.edge_count() == 0 {
        return Err(Error::Contract("V^tr of an edgeless graph".into()));
    }
    Ok(m.coords().iter().copied().fold(f64::MIN, f64::max))
}

pub fn v_exact(_g: &Graph, m: &MetricAssignment, mass_ratio: f64) -> f64 {
    mass_ratio * m.coords().iter().sum::<f64>()
}

/// Γ(ω+1)·(U^tr/U)^{D/2}·(V^tr/V)^ω.
pub fn residual_f(g: &Graph, m: &MetricAssignment, ctx: &SymanzikContext) -> Result<f64> {
    residual_f_with(&mut Scratch::new(), g, m.coords(), ctx)
}

pub fn residual_f_with(
    scratch: &mut Scratch,
    g: &Graph,
    x: &[f64],
    ctx: &SymanzikContext,
) -> Result<f64> {
    let lut = scratch.log_u_tropical(g, x)?;
    let lu = scratch.log_u_exact(g, x)?;
    let mut log_f = ln_gamma(ctx.omega + 1.0) + 0.5 * ctx.dimension * (lut - lu);
    if ctx.omega != 0.0 {
        let vtr = x.iter().copied().fold(f64::MIN, f64::max);
        let v = ctx.mass_ratio * x.iter().sum::<f64>();
        log_f += ctx.omega * (vtr.ln() - v.ln());
    }
    Ok(log_f.exp())
}

/// Number of spanning trees by an exact integer determinant of the reduced
/// Laplacian at unit weights (fraction-free elimination).
pub fn spanning_tree_count(g: &Graph) -> BigInt {
    let n = g.vertex_count();
    if n <= 1 {
        return BigInt::from(u8::from(n == 1));
    }
    let m = n - 1;
    let mut a = vec![vec![BigInt::zero(); m]; m];
    for &(u, v) in g.edges() {
        if u == v {
            continue;
        }
        if u < m {
            a[u][u] += 1;
        }
        if v < m {
            a[v][v] += 1;
        }
        if u < m && v < m {
            a[u][v] -= 1;
            a[v][u] -= 1;
        }
    }
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..m {
        if a[k][k].is_zero() {
            let Some(r) = (k + 1..m).find(|&r| !a[r][k].is_zero()) else {
                return BigInt::zero();
            };
            a.swap(k, r);
            sign = -sign;
        }
        for i in k + 1..m {
            for j in k + 1..m {
                let t = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                a[i][j] = t / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    (sign * &a[m - 1][m - 1]).abs()
}
