//! Coefficient grids Z(L,n) and B(L,n) for 1PI and beaded k-regular graph
//! ensembles, filled by the tropical loop recursion.
//!
//! Cells are valid on the staircase n + 2L ≤ n_max, which is exactly the
//! region closed under the recursion: Z(L,n) reads B(L−1,n+2) and B(L,n)
//! only reads cells with smaller or equal L and n.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::alias::AliasSampler;
use crate::error::{Error, Result};
use crate::Mode;

pub const FORMAT_VERSION: u32 = 1;

/// Cells with |ω| below this are treated as ω = 0.
const OMEGA_EPS: f64 = 1e-12;

/// ω^k_D(L,n) = ((L−1)k + n)/(k−2) − L·D/2.
pub fn omega(k: usize, d: f64, loops: usize, legs: usize) -> Result<f64> {
    let num = 2 * loops as i64 - 2 + legs as i64;
    if k < 3 || num.rem_euclid(k as i64 - 2) != 0 {
        return Err(Error::InvalidSector {
            k,
            loops,
            legs,
            reason: "2(L-1)+n is not a multiple of k-2".into(),
        });
    }
    let e = ((loops as f64 - 1.0) * k as f64 + legs as f64) / (k as f64 - 2.0);
    Ok(e - loops as f64 * d / 2.0)
}

fn valid_sector(k: usize, loops: usize, legs: usize) -> bool {
    let num = 2 * loops as i64 - 2 + legs as i64;
    num >= 0 && num % (k as i64 - 2) == 0
}

#[derive(Debug, Clone)]
pub struct CoefficientTables {
    k: usize,
    dimension: f64,
    mode: Mode,
    l_max: usize,
    n_max: usize,
    z: Vec<f64>,
    b: Vec<f64>,
    z_top: Vec<f64>,
    alias: Vec<Option<AliasSampler>>,
}

impl CoefficientTables {
    /// Builds Z and B for 0 ≤ L ≤ l_max on the staircase n + 2L ≤ n_max.
    pub fn build(k: usize, d: f64, mode: Mode, l_max: usize, n_max: usize) -> Result<Self> {
        if k < 3 {
            return Err(Error::Contract(format!("k = {k} must be at least 3")));
        }
        if !d.is_finite() {
            return Err(Error::Contract(format!("dimension {d} is not finite")));
        }
        let mut t = Self::empty(k, d, mode, l_max, n_max);
        t.fill()?;
        t.build_aliases()?;
        Ok(t)
    }

    /// Smallest staircase containing the sector (loops, legs).
    pub fn build_for_sector(k: usize, d: f64, mode: Mode, loops: usize, legs: usize) -> Result<Self> {
        Self::build(k, d, mode, loops, legs + 2 * loops)
    }

    fn empty(k: usize, d: f64, mode: Mode, l_max: usize, n_max: usize) -> Self {
        let cells = (l_max + 1) * (n_max + 1);
        CoefficientTables {
            k,
            dimension: d,
            mode,
            l_max,
            n_max,
            z: vec![0.0; cells],
            b: vec![0.0; cells],
            z_top: vec![0.0; cells],
            alias: Vec::new(),
        }
    }

    fn idx(&self, loops: usize, legs: usize) -> usize {
        loops * (self.n_max + 1) + legs
    }

    pub fn contains(&self, loops: usize, legs: usize) -> bool {
        loops <= self.l_max && legs + 2 * loops <= self.n_max
    }

    fn fill(&mut self) -> Result<()> {
        let k = self.k;
        let binom = binomials(self.n_max);
        let mut all_omega_positive = true;
        for l in 0..=self.l_max {
            if 2 * l > self.n_max {
                break;
            }
            let width = self.n_max - 2 * l;
            if l == 0 {
                if k <= width {
                    let i = self.idx(0, k);
                    self.z[i] = 1.0;
                }
            } else {
                for n in 2..=width {
                    if !valid_sector(k, l, n) {
                        continue;
                    }
                    let w = omega(k, self.dimension, l, n)?;
                    let below = self.b[self.idx(l - 1, n + 2)];
                    let i = self.idx(l, n);
                    if w.abs() < OMEGA_EPS {
                        all_omega_positive = false;
                        match self.mode {
                            Mode::Positive => self.z_top[i] = below / 2.0,
                            Mode::Plain if below != 0.0 => {
                                return Err(Error::NonGenericDimension {
                                    what: format!("cell (L={l}, n={n})"),
                                })
                            }
                            Mode::Plain => {}
                        }
                    } else if w < 0.0 {
                        all_omega_positive = false;
                        if self.mode == Mode::Plain {
                            self.z[i] = below / (2.0 * w);
                        }
                    } else {
                        self.z[i] = below / (2.0 * w);
                    }
                }
            }
            for n in 2..=width {
                if !valid_sector(k, l, n) {
                    continue;
                }
                let mut acc = self.z[self.idx(l, n)];
                for lp in 0..=l {
                    for np in 0..=n - 2 {
                        let zz = self.z[self.idx(lp, np + 2)];
                        if zz == 0.0 {
                            continue;
                        }
                        acc += binom[n - 2][np] * zz * self.b[self.idx(l - lp, n - np)];
                    }
                }
                if !acc.is_finite() {
                    return Err(Error::Internal(format!("B(L={l}, n={n}) overflowed")));
                }
                let i = self.idx(l, n);
                self.b[i] = acc;
            }
        }
        let must_be_nonnegative = self.mode == Mode::Positive || all_omega_positive;
        if must_be_nonnegative {
            if let Some(p) = self.z.iter().chain(&self.b).position(|&v| v < 0.0) {
                let p = p % self.z.len();
                return Err(Error::Internal(format!(
                    "negative coefficient at (L={}, n={})",
                    p / (self.n_max + 1),
                    p % (self.n_max + 1)
                )));
            }
        }
        Ok(())
    }

    fn build_aliases(&mut self) -> Result<()> {
        let mut alias = Vec::with_capacity(self.z.len());
        let mut weights = Vec::new();
        for l in 0..=self.l_max {
            for n in 0..=self.n_max {
                alias.push(None);
                if n < 2 || !self.contains(l, n) || self.b(l, n) <= 0.0 {
                    continue;
                }
                self.outcome_weights(l, n, &mut weights);
                if weights.iter().any(|&w| w < 0.0) {
                    // Signed ensembles (plain mode, ω < 0) cannot be sampled.
                    continue;
                }
                *alias.last_mut().unwrap() = Some(AliasSampler::new(&weights)?);
            }
        }
        self.alias = alias;
        Ok(())
    }

    /// Unnormalized weights of the beaded outcomes: index 0 is the 1PI
    /// outcome, index 1 + L'(n−1) + n' the split (L', n').
    pub fn outcome_weights(&self, loops: usize, legs: usize, out: &mut Vec<f64>) {
        out.clear();
        out.resize(1 + (loops + 1) * (legs - 1), 0.0);
        out[0] = self.z(loops, legs);
        let mut c = 1.0;
        for np in 0..=legs - 2 {
            // c = binom(legs-2, np)
            for lp in 0..=loops {
                let zz = self.z[self.idx(lp, np + 2)];
                if zz != 0.0 {
                    out[1 + lp * (legs - 1) + np] = c * zz * self.b[self.idx(loops - lp, legs - np)];
                }
            }
            c = c * (legs - 2 - np) as f64 / (np + 1) as f64;
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dimension(&self) -> f64 {
        self.dimension
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn omega(&self, loops: usize, legs: usize) -> Result<f64> {
        omega(self.k, self.dimension, loops, legs)
    }

    /// Z(L,n); zero outside the staircase.
    pub fn z(&self, loops: usize, legs: usize) -> f64 {
        if self.contains(loops, legs) {
            self.z[self.idx(loops, legs)]
        } else {
            0.0
        }
    }

    pub fn b(&self, loops: usize, legs: usize) -> f64 {
        if self.contains(loops, legs) {
            self.b[self.idx(loops, legs)]
        } else {
            0.0
        }
    }

    /// Top-level normalization B(L−1,n+2)/2 of a positive-mode ω = 0 cell.
    pub fn z_top(&self, loops: usize, legs: usize) -> f64 {
        if self.contains(loops, legs) {
            self.z_top[self.idx(loops, legs)]
        } else {
            0.0
        }
    }

    pub fn alias(&self, loops: usize, legs: usize) -> Option<&AliasSampler> {
        if self.contains(loops, legs) {
            self.alias[self.idx(loops, legs)].as_ref()
        } else {
            None
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let file = TableFile {
            format_version: FORMAT_VERSION,
            k: self.k,
            dimension: format!("{:?}", self.dimension),
            mode: self.mode,
            l_max: self.l_max,
            n_max: self.n_max,
            z: self.z.clone(),
            b: self.b.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("plain data serializes");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    /// Loads and checks the header against the expected parameters.
    pub fn load_expecting(path: &Path, k: usize, d: f64, mode: Mode) -> Result<Self> {
        let t = Self::load(path)?;
        if t.k != k || t.dimension != d || t.mode != mode {
            return Err(Error::Format(format!(
                "table file has k={}, D={}, mode={}; expected k={k}, D={d}, mode={mode}",
                t.k, t.dimension, t.mode
            )));
        }
        Ok(t)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let f: TableFile =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("table file: {e}")))?;
        if f.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "format version {} not supported",
                f.format_version
            )));
        }
        let d: f64 = f
            .dimension
            .parse()
            .map_err(|_| Error::Format(format!("bad dimension {:?}", f.dimension)))?;
        if f.k < 3 {
            return Err(Error::Format(format!("bad k {}", f.k)));
        }
        let cells = (f.l_max + 1) * (f.n_max + 1);
        if f.z.len() != cells || f.b.len() != cells {
            return Err(Error::Format(format!(
                "expected {cells} cells, found z={} b={}",
                f.z.len(),
                f.b.len()
            )));
        }
        let mut t = Self::empty(f.k, d, f.mode, f.l_max, f.n_max);
        t.z = f.z;
        t.b = f.b;
        if t.mode == Mode::Positive {
            for l in 1..=t.l_max {
                for n in 2..=t.n_max {
                    if t.contains(l, n) && valid_sector(t.k, l, n) {
                        let w = omega(t.k, d, l, n)?;
                        if w.abs() < OMEGA_EPS {
                            let i = t.idx(l, n);
                            t.z_top[i] = t.b[t.idx(l - 1, n + 2)] / 2.0;
                        }
                    }
                }
            }
        }
        t.build_aliases()?;
        Ok(t)
    }

    /// Largest relative residual of the Z and B recursions over the grid.
    pub fn recursion_residual(&self) -> f64 {
        let binom = binomials(self.n_max);
        let mut worst: f64 = 0.0;
        let rel = |lhs: f64, rhs: f64| {
            let scale = lhs.abs().max(rhs.abs());
            if scale == 0.0 {
                0.0
            } else {
                (lhs - rhs).abs() / scale
            }
        };
        for l in 0..=self.l_max {
            for n in 2..=self.n_max {
                if !self.contains(l, n) || !valid_sector(self.k, l, n) {
                    continue;
                }
                if l >= 1 {
                    let w = omega(self.k, self.dimension, l, n).unwrap_or(0.0);
                    if w > OMEGA_EPS || (self.mode == Mode::Plain && w < -OMEGA_EPS) {
                        worst = worst.max(rel(2.0 * w * self.z(l, n), self.b(l - 1, n + 2)));
                    }
                }
                let mut rhs = self.z(l, n);
                let mut scale = rhs.abs();
                for lp in 0..=l {
                    for np in 0..=n - 2 {
                        let t = binom[n - 2][np] * self.z(lp, np + 2) * self.b(l - lp, n - np);
                        rhs += t;
                        scale += t.abs();
                    }
                }
                if scale > 0.0 {
                    worst = worst.max((self.b(l, n) - rhs).abs() / scale);
                }
            }
        }
        worst
    }
}

#[derive(Serialize, Deserialize)]
struct TableFile {
    format_version: u32,
    k: usize,
    dimension: String,
    mode: Mode,
    l_max: usize,
    n_max: usize,
    z: Vec<f64>,
    b: Vec<f64>,
}

fn binomials(n: usize) -> Vec<Vec<f64>> {
    let mut c = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..=n {
        c[i][0] = 1.0;
        for j in 1..=i {
            c[i][j] = c[i - 1][j - 1] + if j < i { c[i - 1][j] } else { 0.0 };
        }
    }
    c
}
