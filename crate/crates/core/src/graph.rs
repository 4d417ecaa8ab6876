//! Multigraphs with labelled legs.
//!
//! A graph is an edge list of vertex pairs plus a leg list. The position of a
//! leg in `legs` is its label minus one. Beaded graphs additionally carry an
//! ordered pair of special leg labels.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
    legs: Vec<usize>,
    special_legs: Option<(usize, usize)>,
}

impl Graph {
    pub fn new(
        vertex_count: usize,
        edges: Vec<(usize, usize)>,
        legs: Vec<usize>,
        special_legs: Option<(usize, usize)>,
    ) -> Result<Self> {
        for &(u, v) in &edges {
            if u >= vertex_count || v >= vertex_count {
                return Err(Error::Contract(format!(
                    "edge {u}:{v} out of range for {vertex_count} vertices"
                )));
            }
        }
        if let Some(&v) = legs.iter().find(|&&v| v >= vertex_count) {
            return Err(Error::Contract(format!("leg attached to missing vertex {v}")));
        }
        if let Some((i, j)) = special_legs {
            if i == j || i == 0 || j == 0 || i > legs.len() || j > legs.len() {
                return Err(Error::Contract(format!("bad special legs {i},{j}")));
            }
        }
        Ok(Self::from_parts(vertex_count, edges, legs, special_legs))
    }

    pub(crate) fn from_parts(
        vertex_count: usize,
        edges: Vec<(usize, usize)>,
        legs: Vec<usize>,
        special_legs: Option<(usize, usize)>,
    ) -> Self {
        Graph {
            vertex_count,
            edges,
            legs,
            special_legs,
        }
    }

    /// The single k-valent vertex with legs 1..=k.
    pub fn vertex(k: usize) -> Self {
        Self::from_parts(1, Vec::new(), vec![0; k], None)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn legs(&self) -> &[usize] {
        &self.legs
    }

    pub fn leg_count(&self) -> usize {
        self.legs.len()
    }

    pub fn special_legs(&self) -> Option<(usize, usize)> {
        self.special_legs
    }

    pub fn with_special_legs(mut self, special: Option<(usize, usize)>) -> Result<Self> {
        if let Some((i, j)) = special {
            if i == j || i == 0 || j == 0 || i > self.legs.len() || j > self.legs.len() {
                return Err(Error::Contract(format!("bad special legs {i},{j}")));
            }
        }
        self.special_legs = special;
        Ok(self)
    }

    /// Edge ends plus legs at `v`. A self-loop counts twice.
    pub fn degree(&self, v: usize) -> usize {
        let ends: usize = self
            .edges
            .iter()
            .map(|&(a, b)| usize::from(a == v) + usize::from(b == v))
            .sum();
        ends + self.legs.iter().filter(|&&w| w == v).count()
    }

    pub fn is_k_regular(&self, k: usize) -> bool {
        let mut deg = vec![0usize; self.vertex_count];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        for &v in &self.legs {
            deg[v] += 1;
        }
        deg.iter().all(|&d| d == k)
    }

    /// Component label per vertex and the number of components.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let mut uf = UnionFind::new(self.vertex_count);
        for &(a, b) in &self.edges {
            uf.union(a, b);
        }
        let mut label = vec![usize::MAX; self.vertex_count];
        let mut count = 0;
        let mut out = vec![0; self.vertex_count];
        for (v, slot) in out.iter_mut().enumerate() {
            let r = uf.find(v);
            if label[r] == usize::MAX {
                label[r] = count;
                count += 1;
            }
            *slot = label[r];
        }
        (out, count)
    }

    pub fn is_connected(&self) -> bool {
        self.vertex_count > 0 && self.components().1 == 1
    }

    pub fn loop_number(&self) -> usize {
        let (_, c) = self.components();
        self.edges.len() + c - self.vertex_count
    }

    /// Internal edges whose deletion increases the component count, in
    /// ascending index order. Iterative lowpoint traversal.
    pub fn bridges(&self) -> Vec<usize> {
        let n = self.vertex_count;
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (i, &(a, b)) in self.edges.iter().enumerate() {
            if a != b {
                adj[a].push((b, i));
                adj[b].push((a, i));
            }
        }
        let mut disc = vec![usize::MAX; n];
        let mut low = vec![0usize; n];
        let mut out = Vec::new();
        let mut timer = 0;
        // (vertex, edge used to enter, next adjacency position)
        let mut stack: Vec<(usize, usize, usize)> = Vec::new();
        for root in 0..n {
            if disc[root] != usize::MAX {
                continue;
            }
            disc[root] = timer;
            low[root] = timer;
            timer += 1;
            stack.push((root, usize::MAX, 0));
            while let Some(top) = stack.last_mut() {
                let (v, via, pos) = *top;
                if pos < adj[v].len() {
                    top.2 += 1;
                    let (w, e) = adj[v][pos];
                    if e == via {
                        continue;
                    }
                    if disc[w] == usize::MAX {
                        disc[w] = timer;
                        low[w] = timer;
                        timer += 1;
                        stack.push((w, e, 0));
                    } else {
                        low[v] = low[v].min(disc[w]);
                    }
                } else {
                    stack.pop();
                    if let Some(&(p, _, _)) = stack.last() {
                        low[p] = low[p].min(low[v]);
                        if low[v] > disc[p] {
                            out.push(via);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn is_one_particle_irreducible(&self) -> bool {
        self.is_connected() && self.bridges().is_empty()
    }

    /// Connected, with a special pair, and every bridge separates the two
    /// special legs.
    pub fn is_beaded(&self) -> bool {
        let Some((i, j)) = self.special_legs else {
            return false;
        };
        if !self.is_connected() {
            return false;
        }
        let (si, sj) = (self.legs[i - 1], self.legs[j - 1]);
        self.bridges().into_iter().all(|e| {
            let g = self.without_edge(e);
            let (comp, _) = g.components();
            comp[si] != comp[sj]
        })
    }

    pub fn without_edge(&self, e: usize) -> Graph {
        let mut edges = self.edges.clone();
        edges.remove(e);
        Self::from_parts(self.vertex_count, edges, self.legs.clone(), self.special_legs)
    }

    /// Removes both special legs and joins their vertices with a new last
    /// edge. Remaining legs keep their relative order.
    pub fn glue_special_legs(&self) -> Result<Graph> {
        let (i, j) = self
            .special_legs
            .ok_or_else(|| Error::Contract("glue_special_legs needs special legs".into()))?;
        let mut edges = self.edges.clone();
        edges.push((self.legs[i - 1], self.legs[j - 1]));
        let legs = self
            .legs
            .iter()
            .enumerate()
            .filter(|&(p, _)| p + 1 != i && p + 1 != j)
            .map(|(_, &v)| v)
            .collect();
        Ok(Self::from_parts(self.vertex_count, edges, legs, None))
    }

    /// Joins `a` (1PI, legs 1..=n'+2) to beaded `b` by a bridge from a's leg 2
    /// to b's first special leg. `subset` lists, in ascending order, the labels
    /// from 3..=n that a's legs 3.. receive; b's plain legs receive the rest.
    /// The result has special legs (1, 2), a's vertices first, and the bridge
    /// appended as the last edge.
    pub fn concatenate_beaded(a: &Graph, b: &Graph, subset: &[usize]) -> Result<Graph> {
        let (bi, bj) = b
            .special_legs
            .ok_or_else(|| Error::Contract("tail graph is not beaded".into()))?;
        if a.legs.len() < 2 {
            return Err(Error::Contract("head graph needs at least two legs".into()));
        }
        let n = a.legs.len() + b.legs.len() - 2;
        if subset.len() != a.legs.len() - 2 {
            return Err(Error::Contract(format!(
                "subset has {} labels, head needs {}",
                subset.len(),
                a.legs.len() - 2
            )));
        }
        let mut taken = vec![false; n + 1];
        let mut prev = 2;
        for &s in subset {
            if s <= prev || s > n || taken[s] {
                return Err(Error::Contract(format!("bad leg label {s} in subset")));
            }
            taken[s] = true;
            prev = s;
        }
        let off = a.vertex_count;
        let mut legs = vec![0usize; n];
        legs[0] = a.legs[0];
        legs[1] = b.legs[bj - 1] + off;
        for (p, &s) in subset.iter().enumerate() {
            legs[s - 1] = a.legs[p + 2];
        }
        let mut free = (3..=n).filter(|&l| !taken[l]);
        for (p, &v) in b.legs.iter().enumerate() {
            if p + 1 == bi || p + 1 == bj {
                continue;
            }
            let l = free.next().expect("label count checked above");
            legs[l - 1] = v + off;
        }
        let mut edges = Vec::with_capacity(a.edges.len() + b.edges.len() + 1);
        edges.extend_from_slice(&a.edges);
        edges.extend(b.edges.iter().map(|&(u, v)| (u + off, v + off)));
        edges.push((a.legs[1], b.legs[bi - 1] + off));
        Ok(Self::from_parts(
            a.vertex_count + b.vertex_count,
            edges,
            legs,
            Some((1, 2)),
        ))
    }

    /// Disjoint union; legs of `other` follow those of `self`.
    pub fn disjoint_union(&self, other: &Graph) -> Graph {
        let off = self.vertex_count;
        let mut edges = self.edges.clone();
        edges.extend(other.edges.iter().map(|&(u, v)| (u + off, v + off)));
        let mut legs = self.legs.clone();
        legs.extend(other.legs.iter().map(|&v| v + off));
        Self::from_parts(self.vertex_count + other.vertex_count, edges, legs, None)
    }

    /// Same graph with vertices renamed by `perm[old] = new` and edges listed
    /// in the order given by `edge_order`.
    pub fn relabelled(&self, perm: &[usize], edge_order: &[usize]) -> Graph {
        let edges = edge_order
            .iter()
            .map(|&e| {
                let (u, v) = self.edges[e];
                (perm[u], perm[v])
            })
            .collect();
        let legs = self.legs.iter().map(|&v| perm[v]).collect();
        Self::from_parts(self.vertex_count, edges, legs, self.special_legs)
    }

    /// Canonical code under vertex relabelling with all leg labels fixed.
    /// Two graphs are isomorphic (legs fixed) iff their codes agree. Returns
    /// `None` above ten vertices.
    pub fn canonical_form(&self) -> Option<CanonicalForm> {
        let n = self.vertex_count;
        if n > 10 {
            return None;
        }
        // Colour refinement: only permutations inside a colour class can
        // produce the minimum code, and colours are isomorphism invariant.
        let initial: Vec<(Vec<usize>, usize, usize)> = (0..n)
            .map(|v| {
                let legs = (0..self.legs.len()).filter(|&p| self.legs[p] == v).collect();
                let loops = self.edges.iter().filter(|&&(a, b)| a == v && b == v).count();
                let deg = self
                    .edges
                    .iter()
                    .filter(|&&(a, b)| a != b && (a == v || b == v))
                    .count();
                (legs, loops, deg)
            })
            .collect();
        let mut colour = rank(&initial);
        let mut classes = colour.iter().max().map_or(0, |m| m + 1);
        loop {
            let sigs: Vec<(usize, Vec<usize>)> = (0..n)
                .map(|v| {
                    let mut nb: Vec<usize> = self
                        .edges
                        .iter()
                        .filter_map(|&(a, b)| match (a == v, b == v) {
                            (true, false) => Some(colour[b]),
                            (false, true) => Some(colour[a]),
                            _ => None,
                        })
                        .collect();
                    nb.sort_unstable();
                    (colour[v], nb)
                })
                .collect();
            let next = rank(&sigs);
            let count = next.iter().max().map_or(0, |m| m + 1);
            colour = next;
            if count == classes {
                break;
            }
            classes = count;
        }
        let mut cells: Vec<Vec<usize>> = vec![Vec::new(); classes];
        for v in 0..n {
            cells[colour[v]].push(v);
        }
        let mut best: Option<Vec<u32>> = None;
        let mut perm = vec![0usize; n];
        let mut order: Vec<Vec<usize>> = cells.clone();
        self.canon_search(&cells, &mut order, 0, &mut perm, &mut best);
        best.map(CanonicalForm)
    }

    fn canon_search(
        &self,
        cells: &[Vec<usize>],
        order: &mut Vec<Vec<usize>>,
        cell: usize,
        perm: &mut [usize],
        best: &mut Option<Vec<u32>>,
    ) {
        if cell == cells.len() {
            let mut next = 0;
            for c in order.iter() {
                for &v in c {
                    perm[v] = next;
                    next += 1;
                }
            }
            let code = self.code(perm);
            if best.as_ref().is_none_or(|b| code < *b) {
                *best = Some(code);
            }
            return;
        }
        // Heap's algorithm over the current cell.
        let len = order[cell].len();
        let mut c = vec![0usize; len];
        self.canon_search(cells, order, cell + 1, perm, best);
        let mut i = 0;
        while i < len {
            if c[i] < i {
                if i % 2 == 0 {
                    order[cell].swap(0, i);
                } else {
                    order[cell].swap(c[i], i);
                }
                self.canon_search(cells, order, cell + 1, perm, best);
                c[i] += 1;
                i = 0;
            } else {
                c[i] = 0;
                i += 1;
            }
        }
    }

    fn code(&self, perm: &[usize]) -> Vec<u32> {
        let mut edges: Vec<(u32, u32)> = self
            .edges
            .iter()
            .map(|&(u, v)| {
                let (a, b) = (perm[u] as u32, perm[v] as u32);
                (a.min(b), a.max(b))
            })
            .collect();
        edges.sort_unstable();
        let mut code = Vec::with_capacity(4 + 2 * edges.len() + self.legs.len());
        code.push(self.vertex_count as u32);
        code.push(edges.len() as u32);
        for (a, b) in edges {
            code.push(a);
            code.push(b);
        }
        code.extend(self.legs.iter().map(|&v| perm[v] as u32));
        match self.special_legs {
            Some((i, j)) => code.extend([i as u32, j as u32]),
            None => code.extend([0, 0]),
        }
        code
    }
}

/// Dense ranks of `items` in sorted order.
fn rank<T: Ord>(items: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.sort_by(|&a, &b| items[a].cmp(&items[b]));
    let mut out = vec![0; items.len()];
    let mut r = 0;
    for w in 0..idx.len() {
        if w > 0 && items[idx[w - 1]] != items[idx[w]] {
            r += 1;
        }
        out[idx[w]] = r;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalForm(Vec<u32>);

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "V={} E=", self.vertex_count)?;
        for (i, (u, v)) in self.edges.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{u}:{v}")?;
        }
        f.write_str(" LEGS=")?;
        for (i, v) in self.legs.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        match self.special_legs {
            Some((i, j)) => write!(f, " SPECIAL={i},{j}"),
            None => f.write_str(" SPECIAL=none"),
        }
    }
}

impl FromStr for Graph {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |what: &str| Error::Parse(format!("{what} in graph line {s:?}"));
        let mut vertex_count = None;
        let mut edges = None;
        let mut legs = None;
        let mut special = None;
        for field in s.split_whitespace() {
            let (key, value) = field.split_once('=').ok_or_else(|| bad("missing '='"))?;
            match key {
                "V" => vertex_count = Some(value.parse::<usize>().map_err(|_| bad("bad V"))?),
                "E" => {
                    let mut list = Vec::new();
                    for item in value.split(',').filter(|t| !t.is_empty()) {
                        let (u, v) = item.split_once(':').ok_or_else(|| bad("bad edge"))?;
                        list.push((
                            u.parse().map_err(|_| bad("bad edge"))?,
                            v.parse().map_err(|_| bad("bad edge"))?,
                        ));
                    }
                    edges = Some(list);
                }
                "LEGS" => {
                    let list: std::result::Result<Vec<usize>, _> =
                        value.split(',').filter(|t| !t.is_empty()).map(str::parse).collect();
                    legs = Some(list.map_err(|_| bad("bad leg"))?);
                }
                "SPECIAL" => {
                    special = Some(if value == "none" {
                        None
                    } else {
                        let (i, j) = value.split_once(',').ok_or_else(|| bad("bad SPECIAL"))?;
                        Some((
                            i.parse().map_err(|_| bad("bad SPECIAL"))?,
                            j.parse().map_err(|_| bad("bad SPECIAL"))?,
                        ))
                    })
                }
                _ => return Err(bad("unknown field")),
            }
        }
        Graph::new(
            vertex_count.ok_or_else(|| bad("missing V"))?,
            edges.ok_or_else(|| bad("missing E"))?,
            legs.ok_or_else(|| bad("missing LEGS"))?,
            special.ok_or_else(|| bad("missing SPECIAL"))?,
        )
    }
}

/// Per-edge cubical coordinates in (0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct MetricAssignment {
    coords: Vec<f64>,
}

impl MetricAssignment {
    pub fn new(g: &Graph, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != g.edge_count() {
            return Err(Error::Contract(format!(
                "{} coordinates for {} edges",
                coords.len(),
                g.edge_count()
            )));
        }
        if let Some(x) = coords.iter().find(|&&x| !(x > 0.0 && x <= 1.0)) {
            return Err(Error::Contract(format!("coordinate {x} outside (0,1]")));
        }
        Ok(MetricAssignment { coords })
    }

    pub(crate) fn from_vec(coords: Vec<f64>) -> Self {
        MetricAssignment { coords }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Rescales so the largest coordinate is exactly 1.
    pub fn to_projective(&self) -> Result<MetricAssignment> {
        let max = self.coords.iter().copied().fold(f64::NAN, f64::max);
        if self.coords.is_empty() {
            return Err(Error::Contract("projective form of an edgeless graph".into()));
        }
        Ok(MetricAssignment {
            coords: self.coords.iter().map(|&x| if x == max { 1.0 } else { x / max }).collect(),
        })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn reset(&mut self, n: usize) {
        self.parent.clear();
        self.parent.extend(0..n);
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}
