//! Independent oracles shared by the integration tests. Nothing here calls
//! into the code paths it is used to check.
#![allow(dead_code)]

use std::collections::HashMap;
use std::ops::Range;

use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use tropsamp::hepp::hepp_with_mode;
use tropsamp::{Graph, Mode, Rational};

pub fn q(p: i64, r: i64) -> Rational {
    Rational::new(p.into(), r.into())
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    let scale = a.abs().max(b.abs());
    scale == 0.0 || (a - b).abs() <= tol * scale
}

// ---------------------------------------------------------------- trees

/// Every spanning tree as a list of edge indices, by testing all
/// (V−1)-subsets of the non-loop edges for acyclicity.
pub fn spanning_trees(g: &Graph) -> Vec<Vec<usize>> {
    let v = g.vertex_count();
    let edges: Vec<usize> = (0..g.edge_count())
        .filter(|&e| g.edges()[e].0 != g.edges()[e].1)
        .collect();
    let mut out = Vec::new();
    if v == 1 {
        out.push(Vec::new());
        return out;
    }
    let mut pick = Vec::new();
    choose(&edges, v - 1, 0, &mut pick, &mut |subset| {
        let mut parent: Vec<usize> = (0..v).collect();
        fn root(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                x = p[x];
            }
            x
        }
        for &e in subset {
            let (a, b) = g.edges()[e];
            let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
            if ra == rb {
                return;
            }
            parent[ra] = rb;
        }
        out.push(subset.to_vec());
    });
    out
}

fn choose(items: &[usize], k: usize, from: usize, pick: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if pick.len() == k {
        f(pick);
        return;
    }
    for i in from..items.len() {
        if items.len() - i < k - pick.len() {
            break;
        }
        pick.push(items[i]);
        choose(items, k, i + 1, pick, f);
        pick.pop();
    }
}

/// Complement products ∏_{e∉T} x_e for every spanning tree T.
pub fn complement_products(g: &Graph, x: &[f64]) -> Vec<f64> {
    spanning_trees(g)
        .iter()
        .map(|t| {
            (0..g.edge_count())
                .filter(|e| !t.contains(e))
                .map(|e| x[e])
                .product()
        })
        .collect()
}

pub fn u_brute(g: &Graph, x: &[f64]) -> f64 {
    complement_products(g, x).iter().sum()
}

pub fn u_tropical_brute(g: &Graph, x: &[f64]) -> f64 {
    complement_products(g, x).into_iter().fold(0.0, f64::max)
}

// ------------------------------------------------------------ primitivity

/// Subdivergence test by brute force over connected vertex subsets S with
/// 2 ≤ |S| < V: ext(S) = 4|S| − 2·(edges inside S) ≤ 4.
pub fn primitive_by_subsets(g: &Graph) -> bool {
    let v = g.vertex_count();
    assert!(v <= 20);
    for s in 1u32..(1 << v) - 1 {
        if s.count_ones() < 2 {
            continue;
        }
        let inside: Vec<&(usize, usize)> = g
            .edges()
            .iter()
            .filter(|&&(a, b)| s >> a & 1 == 1 && s >> b & 1 == 1)
            .collect();
        if 4 * s.count_ones() as usize > 4 + 2 * inside.len() {
            continue;
        }
        // Connected?
        let start = s.trailing_zeros();
        let mut seen = 1u32 << start;
        loop {
            let mut grown = seen;
            for &&(a, b) in &inside {
                if seen >> a & 1 == 1 || seen >> b & 1 == 1 {
                    grown |= 1 << a | 1 << b;
                }
            }
            if grown == seen {
                break;
            }
            seen = grown;
        }
        if seen == s {
            return false;
        }
    }
    true
}

// ------------------------------------------------------------ generators

/// A connected multigraph: random spanning tree on v vertices plus `extra`
/// random edges (self-loops allowed when `loops` is set), with v and extra
/// drawn from the given ranges.
pub fn random_connected<R: Rng>(rng: &mut R, v: Range<usize>, extra: Range<usize>, loops: bool) -> Graph {
    let v = rng.random_range(v);
    let extra = rng.random_range(extra);
    let mut edges = Vec::new();
    for u in 1..v {
        edges.push((rng.random_range(0..u), u));
    }
    for _ in 0..extra {
        let a = rng.random_range(0..v);
        let mut b = rng.random_range(0..v);
        while !loops && a == b && v > 1 {
            b = rng.random_range(0..v);
        }
        edges.push((a.min(b), a.max(b)));
    }
    Graph::new(v, edges, Vec::new(), None).unwrap()
}

/// Coordinates in (0,1], occasionally with exact ties.
pub fn random_coords<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut x: Vec<f64> = (0..n).map(|_| 1.0 - rng.random::<f64>()).collect();
    if n > 1 && rng.random_bool(0.2) {
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        x[i] = x[j];
    }
    x
}

// ------------------------------------------------------------ Wick sums

/// Z(L,n) by raw Wick contraction: every perfect pairing of the n leg ends
/// with the k·V vertex half-edges, weight 1/(V!·(k!)^V), keeping connected
/// 1PI graphs where no leg pairs with another leg. Feasible only for tiny V.
pub fn wick_sum(k: usize, d: &Rational, v: usize, n: usize, mode: Mode) -> Rational {
    let total = n + k * v;
    // Leg ends are 0..n, vertex half-edges n.. with owner (h − n) / k.
    let mut partner = vec![usize::MAX; total];
    let mut sum = Rational::zero();
    let mut cache: HashMap<String, Rational> = HashMap::new();
    let mut count = 0u64;
    pair(&mut partner, n, &mut |p| {
        count += 1;
        let mut edges = Vec::new();
        let mut legs = vec![0; n];
        for h in 0..total {
            let o = p[h];
            if h < n {
                legs[h] = (o - n) / k;
            } else if o >= n && h < o {
                edges.push(((h - n) / k, (o - n) / k));
            }
        }
        let g = Graph::new(v, edges, legs, None).unwrap();
        if !g.is_connected() || !g.is_one_particle_irreducible() {
            return;
        }
        let key = g.to_string();
        let h = cache
            .entry(key)
            .or_insert_with(|| hepp_with_mode(&g, d, mode).unwrap())
            .clone();
        sum += h;
    });
    let mut norm = Rational::from_integer(1.into());
    for i in 1..=v {
        norm *= Rational::from_integer(i.into());
    }
    let kf: usize = (1..=k).product();
    for _ in 0..v {
        norm *= Rational::from_integer(kf.into());
    }
    sum / norm
}

fn pair(partner: &mut Vec<usize>, n: usize, f: &mut dyn FnMut(&[usize])) {
    let Some(first) = partner.iter().position(|&p| p == usize::MAX) else {
        f(partner);
        return;
    };
    let lo = if first < n { n } else { first + 1 };
    for other in lo..partner.len() {
        if partner[other] != usize::MAX {
            continue;
        }
        partner[first] = other;
        partner[other] = first;
        pair(partner, n, f);
        partner[first] = usize::MAX;
        partner[other] = usize::MAX;
    }
}

// ------------------------------------------------------------ statistics

/// Upper tail of Pearson's χ² statistic over cells with expected counts.
pub fn chi_square_p(observed: &[u64], expected: &[f64]) -> (f64, f64) {
    assert_eq!(observed.len(), expected.len());
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    let dof = (observed.len() - 1) as f64;
    let p = ChiSquared::new(dof).unwrap().sf(stat);
    (stat, p)
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF, with the
/// asymptotic Kolmogorov tail and Stephens' small-sample correction.
pub fn ks_p(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let mut dmax: f64 = 0.0;
    for (i, &s) in samples.iter().enumerate() {
        let c = cdf(s);
        dmax = dmax.max(c - i as f64 / n).max((i + 1) as f64 / n - c);
    }
    let sn = n.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * dmax;
    let mut p = 0.0;
    for j in 1..=100 {
        let j = j as f64;
        let term = 2.0 * (-1f64).powf(j - 1.0) * (-2.0 * j * j * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    (dmax, p.clamp(0.0, 1.0))
}

// ------------------------------------------------------------ reference series

/// A known low-order coefficient of the tropical effective action: φ power, coupling
/// powers, and the rational function of D (None at a pole).
pub struct ReferenceTerm {
    pub phi: u32,
    pub lambdas: &'static [(usize, u32)],
    pub value: fn(&Rational) -> Option<Rational>,
}

fn poly(d: &Rational, coeffs: &[i64]) -> Rational {
    // coeffs in increasing degree
    let mut acc = Rational::zero();
    for &c in coeffs.iter().rev() {
        acc = acc * d + q(c, 1);
    }
    acc
}

fn ratio(num: Rational, den: Rational) -> Option<Rational> {
    if den.is_zero() {
        None
    } else {
        Some(num / den)
    }
}

fn lin(d: &Rational, a: i64, b: i64) -> Rational {
    // a·D + b
    q(a, 1) * d + q(b, 1)
}

pub const REFERENCE_TERMS: &[ReferenceTerm] = &[
    ReferenceTerm {
        phi: 1,
        lambdas: &[(3, 1)],
        value: |d| ratio(q(-1, 1), lin(d, 1, -2)),
    },
    ReferenceTerm {
        phi: 0,
        lambdas: &[(4, 1)],
        value: |d| ratio(q(1, 1), q(2, 1) * lin(d, 1, -2) * lin(d, 1, -2)),
    },
    ReferenceTerm {
        phi: 0,
        lambdas: &[(3, 2)],
        value: |d| ratio(q(1, 1), lin(d, 1, -3) * lin(d, 1, -4)),
    },
    ReferenceTerm {
        phi: 1,
        lambdas: &[(3, 3)],
        value: |d| ratio(lin(d, 5, -24), lin(d, 1, -4) * lin(d, 1, -4) * lin(d, 1, -6)),
    },
    ReferenceTerm {
        phi: 1,
        lambdas: &[(5, 1)],
        value: |d| ratio(q(1, 1), q(2, 1) * lin(d, 1, -2) * lin(d, 1, -2)),
    },
    ReferenceTerm {
        phi: 1,
        lambdas: &[(3, 1), (4, 1)],
        value: |d| ratio(q(2, 1) * lin(d, 2, -5), lin(d, 1, -2) * lin(d, 1, -3) * lin(d, 1, -4)),
    },
    ReferenceTerm {
        phi: 2,
        lambdas: &[(3, 2)],
        value: |d| ratio(q(-1, 1), lin(d, 1, -4)),
    },
    ReferenceTerm {
        phi: 2,
        lambdas: &[(4, 1)],
        value: |d| ratio(q(-1, 1), q(2, 1) * lin(d, 1, -2)),
    },
    ReferenceTerm {
        phi: 0,
        lambdas: &[(3, 1), (5, 1)],
        value: |d| ratio(q(-2, 1), lin(d, 1, -2) * lin(d, 1, -3) * lin(d, 1, -4)),
    },
    ReferenceTerm {
        phi: 0,
        lambdas: &[(3, 4)],
        value: |d| {
            let den = lin(d, 1, -4).pow(3) * lin(d, 1, -5) * lin(d, 1, -6) * lin(d, 1, -8);
            ratio(q(-2, 3) * poly(d, &[-2400, 1412, -272, 17]), den)
        },
    },
    ReferenceTerm {
        phi: 0,
        lambdas: &[(6, 1)],
        value: |d| ratio(q(-1, 1), q(6, 1) * lin(d, 1, -2).pow(3)),
    },
    ReferenceTerm {
        phi: 0,
        lambdas: &[(4, 2)],
        value: |d| {
            let den = lin(d, 1, -2).pow(2) * lin(d, 1, -3) * lin(d, 1, -4) * lin(d, 3, -8);
            ratio(-poly(d, &[32, -25, 5]), den)
        },
    },
    ReferenceTerm {
        phi: 0,
        lambdas: &[(3, 2), (4, 1)],
        value: |d| {
            let den = lin(d, 1, -2) * lin(d, 1, -4).pow(2) * lin(d, 1, -6) * lin(d, 3, -10);
            ratio(-poly(d, &[480, -290, 39]), den)
        },
    },
];
