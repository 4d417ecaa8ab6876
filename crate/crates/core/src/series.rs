//! Exact fixed-point solver for the tropical loop equation at a fixed
//! rational dimension.
//!
//! Γ is a power series in φ and couplings λ_k. A monomial φ^n ∏λ_k^{m_k}
//! has loop grading L = 1 + Σ m_k(k−2)/2 − n/2 and is an eigenvector of the
//! scaling operator with eigenvalue 2ω = −D − (1−D/2)n + Σ m_k(k − D(k/2−1)).
//!
//! Truncation keeps L ≤ L_max and n ≤ N + 2(L_max − L). This staircase is
//! closed under the iteration, so every retained coefficient is exact.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::dimension::Rational;
use crate::error::{Error, Result};
use crate::tables::CoefficientTables;

/// Exponents of φ and of λ_{k_min}, λ_{k_min+1}, ...
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial {
    pub phi: u32,
    pub lambdas: Vec<u32>,
}

impl Monomial {
    fn twice_loop(&self, k_min: usize) -> i64 {
        let mut t = 2 - self.phi as i64;
        for (i, &m) in self.lambdas.iter().enumerate() {
            t += m as i64 * (k_min + i) as i64 - 2 * m as i64;
        }
        t
    }

    fn times(&self, other: &Monomial) -> Monomial {
        Monomial {
            phi: self.phi + other.phi,
            lambdas: self.lambdas.iter().zip(&other.lambdas).map(|(a, b)| a + b).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingularPolicy {
    /// Any vanishing eigenvalue is an error.
    Error,
    /// Coefficients with a vanishing eigenvalue, and everything they feed,
    /// are marked singular instead of computed.
    Track,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSeries {
    k_min: usize,
    k_max: usize,
    loop_max: i64,
    phi_max: i64,
    terms: BTreeMap<Monomial, Rational>,
    singular: BTreeSet<Monomial>,
}

impl TruncatedSeries {
    pub fn zero(k_min: usize, k_max: usize, loop_max: usize, phi_max: usize) -> Self {
        TruncatedSeries {
            k_min,
            k_max,
            loop_max: loop_max as i64,
            phi_max: phi_max as i64,
            terms: BTreeMap::new(),
            singular: BTreeSet::new(),
        }
    }

    fn empty_like(&self) -> Self {
        TruncatedSeries {
            terms: BTreeMap::new(),
            singular: BTreeSet::new(),
            ..*self
        }
    }

    pub fn monomial(&self, phi: u32, lambdas: &[(usize, u32)]) -> Monomial {
        let mut m = vec![0; self.k_max - self.k_min + 1];
        for &(k, e) in lambdas {
            m[k - self.k_min] = e;
        }
        Monomial { phi, lambdas: m }
    }

    pub fn loop_order(&self, m: &Monomial) -> i64 {
        m.twice_loop(self.k_min).div_euclid(2)
    }

    pub fn within(&self, m: &Monomial) -> bool {
        let t = m.twice_loop(self.k_min);
        t <= 2 * self.loop_max && (m.phi as i64) <= self.phi_max + 2 * self.loop_max - t
    }

    /// Adds `c` to the coefficient of `m` if it lies inside the truncation.
    pub fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() || !self.within(&m) {
            return;
        }
        match self.terms.entry(m) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                v.insert(c);
            }
        }
    }

    pub fn coefficient(&self, m: &Monomial) -> Rational {
        self.terms.get(m).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn is_singular(&self, m: &Monomial) -> bool {
        self.singular.contains(m)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn singular_monomials(&self) -> impl Iterator<Item = &Monomial> {
        self.singular.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out.singular.extend(other.singular.iter().cloned());
        out.drop_singular_terms();
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = self.empty_like();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                let m = a.times(b);
                if out.within(&m) {
                    out.add_term(m, ca * cb);
                }
            }
        }
        let lhs = self.terms.keys().chain(&self.singular);
        for a in lhs {
            let a_sing = self.singular.contains(a);
            for b in other.terms.keys().chain(&other.singular) {
                if a_sing || other.singular.contains(b) {
                    let m = a.times(b);
                    if out.within(&m) {
                        out.singular.insert(m);
                    }
                }
            }
        }
        out.drop_singular_terms();
        out
    }

    /// ∂²/∂φ².
    pub fn second_derivative(&self) -> Self {
        let mut out = self.empty_like();
        for (m, c) in &self.terms {
            if m.phi >= 2 {
                let f = Rational::from_integer(BigInt::from(m.phi) * BigInt::from(m.phi - 1));
                let d = Monomial {
                    phi: m.phi - 2,
                    lambdas: m.lambdas.clone(),
                };
                out.add_term(d, c * f);
            }
        }
        for m in &self.singular {
            if m.phi >= 2 {
                let d = Monomial {
                    phi: m.phi - 2,
                    lambdas: m.lambdas.clone(),
                };
                if out.within(&d) {
                    out.singular.insert(d);
                }
            }
        }
        out
    }

    /// (1 − Q)^{-1} − 1 = Q + Q² + ...; requires Q without constant term.
    pub fn geometric_minus_one(&self) -> Result<Self> {
        let one = Monomial {
            phi: 0,
            lambdas: vec![0; self.k_max - self.k_min + 1],
        };
        if self.terms.contains_key(&one) || self.singular.contains(&one) {
            return Err(Error::Contract("geometric series of a unit".into()));
        }
        let mut sum = self.clone();
        let mut power = self.clone();
        loop {
            power = power.mul(self);
            if power.terms.is_empty() && power.singular.is_empty() {
                return Ok(sum);
            }
            sum = sum.add(&power);
        }
    }

    fn drop_singular_terms(&mut self) {
        for m in &self.singular {
            self.terms.remove(m);
        }
    }

    /// 2ω of a monomial at dimension d.
    pub fn eigenvalue(&self, m: &Monomial, d: &Rational) -> Rational {
        let half = Rational::new(BigInt::one(), BigInt::from(2));
        let n = Rational::from_integer(m.phi.into());
        let mut e = -d.clone() - (Rational::one() - d * &half) * n;
        for (i, &mk) in m.lambdas.iter().enumerate() {
            if mk == 0 {
                continue;
            }
            let k = Rational::from_integer(((self.k_min + i) as i64).into());
            let per = &k - d * (&k * &half - Rational::one());
            e += per * Rational::from_integer(mk.into());
        }
        e
    }
}

impl TruncatedSeries {
    pub fn format_monomial(&self, m: &Monomial) -> String {
        let mut parts = Vec::new();
        match m.phi {
            0 => {}
            1 => parts.push("phi".to_string()),
            p => parts.push(format!("phi^{p}")),
        }
        for (i, &e) in m.lambdas.iter().enumerate() {
            let k = self.k_min + i;
            match e {
                0 => {}
                1 => parts.push(format!("l{k}")),
                e => parts.push(format!("l{k}^{e}")),
            }
        }
        if parts.is_empty() {
            "1".into()
        } else {
            parts.join("*")
        }
    }

    /// Lines `L=<loop> <monomial> = <p/q>` sorted by loop order; singular
    /// coefficients print as `singular`.
    pub fn to_lines(&self) -> Vec<String> {
        let mut rows: Vec<(i64, &Monomial, String)> = self
            .terms
            .iter()
            .map(|(m, c)| (self.loop_order(m), m, c.to_string()))
            .chain(self.singular.iter().map(|m| (self.loop_order(m), m, "singular".into())))
            .collect();
        rows.sort();
        rows.into_iter()
            .map(|(l, m, c)| format!("L={l} {} = {c}", self.format_monomial(m)))
            .collect()
    }
}

/// Divides each coefficient by its eigenvalue; a vanishing eigenvalue is a
/// non-generic-dimension error.
pub fn apply_inverse_pd(series: &TruncatedSeries, d: &Rational) -> Result<TruncatedSeries> {
    inverse_pd(series, d, SingularPolicy::Error)
}

fn inverse_pd(series: &TruncatedSeries, d: &Rational, policy: SingularPolicy) -> Result<TruncatedSeries> {
    let mut out = series.empty_like();
    for (m, c) in &series.terms {
        let e = series.eigenvalue(m, d);
        if e.is_zero() {
            match policy {
                SingularPolicy::Error => {
                    return Err(Error::NonGenericDimension {
                        what: format!("monomial {}", series.format_monomial(m)),
                    })
                }
                SingularPolicy::Track => {
                    out.singular.insert(m.clone());
                }
            }
        } else {
            out.terms.insert(m.clone(), c / e);
        }
    }
    if policy == SingularPolicy::Error {
        if let Some(m) = series.singular.iter().next() {
            return Err(Error::NonGenericDimension {
                what: format!("monomial {}", series.format_monomial(m)),
            });
        }
    }
    out.singular.extend(series.singular.iter().cloned());
    Ok(out)
}

/// Tree term Σ_k λ_k φ^k/k!.
fn tree_term(base: &TruncatedSeries) -> TruncatedSeries {
    let mut t = base.empty_like();
    let mut fact = BigInt::one();
    for k in 1..=base.k_max {
        fact *= BigInt::from(k);
        if k >= base.k_min {
            let m = base.monomial(k as u32, &[(k, 1)]);
            t.add_term(m, Rational::new(BigInt::one(), fact.clone()));
        }
    }
    t
}

/// One application of f(P) = tree + P_D^{-1}((1 − P'')^{-1} − 1).
pub fn fixed_point_map(p: &TruncatedSeries, d: &Rational, policy: SingularPolicy) -> Result<TruncatedSeries> {
    let rhs = p.second_derivative().geometric_minus_one()?;
    Ok(tree_term(p).add(&inverse_pd(&rhs, d, policy)?))
}

/// Γ^tr with couplings λ_{k_min}..λ_{k_max}, loop orders up to `loop_max`
/// and at most `phi_max` legs at the top loop order. Vanishing eigenvalues
/// are tracked as singular coefficients.
pub fn solve_gamma_tr(
    k_min: usize,
    k_max: usize,
    d: &Rational,
    loop_max: usize,
    phi_max: usize,
) -> Result<TruncatedSeries> {
    solve_gamma_tr_with(k_min, k_max, d, loop_max, phi_max, SingularPolicy::Track)
}

pub fn solve_gamma_tr_with(
    k_min: usize,
    k_max: usize,
    d: &Rational,
    loop_max: usize,
    phi_max: usize,
    policy: SingularPolicy,
) -> Result<TruncatedSeries> {
    if k_min < 3 || k_max < k_min {
        return Err(Error::Contract(format!("bad coupling range {k_min}..={k_max}")));
    }
    let mut p = TruncatedSeries::zero(k_min, k_max, loop_max, phi_max);
    for _ in 0..=loop_max {
        p = fixed_point_map(&p, d, policy)?;
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossCheckReport {
    pub checked: usize,
    pub skipped: usize,
    /// (L, n, series value, table value)
    pub failures: Vec<(usize, usize, f64, f64)>,
}

impl CrossCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Compares n!·[φ^n λ_k^m]Γ with Z(L,n) for every cell of the tables up to
/// `l_max` that the series covers. Cells without an integral m, or singular
/// in the series, are skipped.
pub fn cross_check_tables(
    series: &TruncatedSeries,
    tables: &CoefficientTables,
    l_max: usize,
) -> Result<CrossCheckReport> {
    let k = tables.k();
    if series.k_min > k || series.k_max < k {
        return Err(Error::Contract(format!("series does not contain λ{k}")));
    }
    let mut report = CrossCheckReport {
        checked: 0,
        skipped: 0,
        failures: Vec::new(),
    };
    for l in 0..=l_max.min(tables.l_max()) {
        for n in 2..=tables.n_max() {
            if !tables.contains(l, n) {
                continue;
            }
            let num = 2 * l as i64 - 2 + n as i64;
            if num < 0 || num % (k as i64 - 2) != 0 {
                report.skipped += 1;
                continue;
            }
            let m = series.monomial(n as u32, &[(k, (num / (k as i64 - 2)) as u32)]);
            if !series.within(&m) || series.is_singular(&m) {
                report.skipped += 1;
                continue;
            }
            let fact: BigInt = (1..=n).map(BigInt::from).product();
            let value = series.coefficient(&m) * Rational::from_integer(fact);
            let v = num_traits::ToPrimitive::to_f64(&value).unwrap_or(f64::NAN);
            let z = tables.z(l, n);
            report.checked += 1;
            let scale = v.abs().max(z.abs());
            if scale > 0.0 && (v - z).abs() > 1e-10 * scale || v.is_nan() {
                report.failures.push((l, n, v, z));
            }
        }
    }
    Ok(report)
}
