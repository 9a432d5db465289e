//! Transit count vectors and the lattice sets they form.

use std::fmt;
use std::io::Write;
use std::ops::Deref;

use crate::error::{Error, Result};
use crate::scalar::{short, Scalar};

/// Default cap on the number of lattice points any enumeration may produce.
pub const DEFAULT_MAX_TERMS: usize = 10_000_000;

/// A member `k` of the lattice `L_M`: `k_0 = 1` and the support of `k` is an
/// initial segment.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TransitCountVector(Vec<u32>);

impl TransitCountVector {
    pub fn new(entries: Vec<u32>) -> Result<Self> {
        if !is_member(&entries) {
            return Err(Error::InvalidArgument(format!(
                "{entries:?} is not a transit count vector"
            )));
        }
        Ok(TransitCountVector(entries))
    }

    pub(crate) fn new_unchecked(entries: Vec<u32>) -> Self {
        debug_assert!(is_member(&entries));
        TransitCountVector(entries)
    }

    /// Index `M` of the deepest interface this vector is defined over.
    pub fn layers(&self) -> usize {
        self.0.len() - 1
    }

    /// `|k| = k_0 + ... + k_M`.
    pub fn total(&self) -> u64 {
        self.0.iter().map(|&v| v as u64).sum()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<u32> {
        self.0
    }
}

impl Deref for TransitCountVector {
    type Target = [u32];
    fn deref(&self) -> &[u32] {
        &self.0
    }
}

impl fmt::Display for TransitCountVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// Membership predicate for `L_M`.
pub fn is_member(k: &[u32]) -> bool {
    !k.is_empty() && k[0] == 1 && k.windows(2).all(|w| w[1] == 0 || w[0] > 0)
}

/// `<k, tau>`, accumulated left to right.
pub fn arrival_time<S: Scalar>(k: &[u32], tau: &[S]) -> S {
    k.iter().zip(tau).fold(S::zero(), |acc, (&v, t)| {
        acc + S::from_int(v as i64) * t.clone()
    })
}

/// A finite set of transit count vectors of a common dimension, stored flat
/// in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSet<S> {
    dim: usize,
    entries: Vec<u32>,
    tau: Vec<S>,
    bound: S,
}

impl<S: Scalar> LatticeSet<S> {
    pub fn len(&self) -> usize {
        self.entries.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of entries in each vector (`M + 1`).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tau(&self) -> &[S] {
        &self.tau
    }

    pub fn bound(&self) -> &S {
        &self.bound
    }

    pub fn get(&self, i: usize) -> &[u32] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[u32]> + '_ {
        self.entries.chunks_exact(self.dim.max(1))
    }

    pub fn time(&self, i: usize) -> S {
        arrival_time(self.get(i), &self.tau)
    }

    pub fn times(&self) -> Vec<S> {
        self.iter().map(|k| arrival_time(k, &self.tau)).collect()
    }

    pub fn position(&self, k: &[u32]) -> Option<usize> {
        if k.len() != self.dim {
            return None;
        }
        let (mut lo, mut hi) = (0, self.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.get(mid).cmp(k) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    pub fn contains(&self, k: &[u32]) -> bool {
        self.position(k).is_some()
    }

    pub fn to_vectors(&self) -> Vec<TransitCountVector> {
        self.iter()
            .map(|k| TransitCountVector(k.to_vec()))
            .collect()
    }

    /// CSV with one row per vector: its entries, then `<k, tau>`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (0..self.dim).map(|n| format!("k{n}")).collect();
        writeln!(w, "{},time", header.join(","))?;
        for k in self.iter() {
            let row: Vec<String> = k.iter().map(u32::to_string).collect();
            writeln!(w, "{},{}", row.join(","), arrival_time(k, &self.tau))?;
        }
        Ok(())
    }
}

fn check_tau<S: Scalar>(tau: &[S]) -> Result<()> {
    if tau.is_empty() {
        return Err(Error::InvalidArgument("travel-time vector is empty".into()));
    }
    if let Some(index) = tau.iter().position(|t| *t <= S::zero()) {
        return Err(Error::NonPositiveTravelTime {
            index,
            value: short(&tau[index]),
        });
    }
    Ok(())
}

struct Walker<'a, S, F> {
    tau: &'a [S],
    bound: &'a S,
    min_entry: u32,
    max_terms: usize,
    count: usize,
    k: Vec<u32>,
    visit: F,
}

impl<S: Scalar, F: FnMut(&[u32], &S)> Walker<'_, S, F> {
    fn emit(&mut self, time: &S) -> Result<()> {
        self.count += 1;
        if self.count > self.max_terms {
            return Err(Error::GuardExceeded {
                what: "lattice enumeration",
                limit: self.max_terms,
            });
        }
        (self.visit)(&self.k, time);
        Ok(())
    }

    /// Fills position `n` onwards given the time of the prefix `k_0..k_{n-1}`.
    fn descend(&mut self, n: usize, partial: S) -> Result<()> {
        if n == self.k.len() {
            return self.emit(&partial);
        }
        let mut v = self.min_entry;
        if v == 0 {
            // k_n = 0 forces the remaining entries to zero.
            for e in &mut self.k[n..] {
                *e = 0;
            }
            self.emit(&partial)?;
            v = 1;
        }
        loop {
            let t = partial.clone() + S::from_int(v as i64) * self.tau[n].clone();
            if t > *self.bound {
                break;
            }
            self.k[n] = v;
            self.descend(n + 1, t)?;
            v += 1;
        }
        Ok(())
    }
}

fn walk<S: Scalar, F: FnMut(&[u32], &S)>(
    tau: &[S],
    bound: &S,
    min_entry: u32,
    max_terms: usize,
    visit: F,
) -> Result<()> {
    check_tau(tau)?;
    let t0 = tau[0].clone();
    if t0 > *bound {
        return Ok(());
    }
    let mut walker = Walker {
        tau,
        bound,
        min_entry,
        max_terms,
        count: 0,
        k: vec![0; tau.len()],
        visit,
    };
    walker.k[0] = 1;
    walker.descend(1, S::zero() + S::from_int(1) * t0)
}

/// Calls `visit(k, <k,tau>)` for every `k` in `L_M` with `<k,tau> <= bound`,
/// in lexicographic order.
pub fn visit_lattice<S: Scalar>(
    tau: &[S],
    bound: &S,
    max_terms: usize,
    visit: impl FnMut(&[u32], &S),
) -> Result<()> {
    walk(tau, bound, 0, max_terms, visit)
}

/// Calls `visit` for every member of the restricted set `L_{n,s}`: vectors of
/// length `n + 1` with every entry at least one and time at most `s`.
pub fn visit_restricted<S: Scalar>(
    tau_prefix: &[S],
    s: &S,
    max_terms: usize,
    visit: impl FnMut(&[u32], &S),
) -> Result<()> {
    walk(tau_prefix, s, 1, max_terms, visit)
}

fn collect<S: Scalar>(
    tau: &[S],
    bound: &S,
    min_entry: u32,
    max_terms: usize,
) -> Result<LatticeSet<S>> {
    let mut entries = Vec::new();
    walk(tau, bound, min_entry, max_terms, |k, _| {
        entries.extend_from_slice(k)
    })?;
    Ok(LatticeSet {
        dim: tau.len(),
        entries,
        tau: tau.to_vec(),
        bound: bound.clone(),
    })
}

/// `{k in L_M : <k,tau> <= bound}` in lexicographic order.
pub fn enumerate_lattice_set<S: Scalar>(tau: &[S], bound: &S) -> Result<LatticeSet<S>> {
    enumerate_lattice_set_with(tau, bound, DEFAULT_MAX_TERMS)
}

pub fn enumerate_lattice_set_with<S: Scalar>(
    tau: &[S],
    bound: &S,
    max_terms: usize,
) -> Result<LatticeSet<S>> {
    collect(tau, bound, 0, max_terms)
}

/// The restricted set `L_{n,s}` for the prefix `tau_0..tau_n`.
pub fn enumerate_restricted<S: Scalar>(tau_prefix: &[S], n: usize, s: &S) -> Result<LatticeSet<S>> {
    enumerate_restricted_with(tau_prefix, n, s, DEFAULT_MAX_TERMS)
}

pub fn enumerate_restricted_with<S: Scalar>(
    tau_prefix: &[S],
    n: usize,
    s: &S,
    max_terms: usize,
) -> Result<LatticeSet<S>> {
    if tau_prefix.len() != n + 1 {
        return Err(Error::DimensionMismatch {
            expected: n + 1,
            found: tau_prefix.len(),
        });
    }
    collect(tau_prefix, s, 1, max_terms)
}

/// `k^n`: `n + 1` ones followed by `M - n` zeros.
pub fn primary_vector(n: usize, m: usize) -> Result<TransitCountVector> {
    if n > m {
        return Err(Error::IndexOutOfRange { index: n, limit: m });
    }
    Ok(TransitCountVector(
        (0..=m).map(|j| u32::from(j <= n)).collect(),
    ))
}

/// `k~ = (k_1, ..., k_M, 0)`.
pub fn left_shift(k: &[u32]) -> Vec<u32> {
    let mut out: Vec<u32> = k.iter().skip(1).copied().collect();
    out.push(0);
    out
}

/// Corners `(u, hi)` of the box `V(k)`: `u = min(1, k~)`, `hi = min(k, k~)`.
pub fn branch_box(k: &[u32]) -> (Vec<u32>, Vec<u32>) {
    let shifted = left_shift(k);
    let u = shifted.iter().map(|&v| v.min(1)).collect();
    let hi = k.iter().zip(&shifted).map(|(&a, &b)| a.min(b)).collect();
    (u, hi)
}

/// Number of integer points in `V(k)`.
pub fn branch_box_size(k: &[u32]) -> u64 {
    let (u, hi) = branch_box(k);
    u.iter()
        .zip(&hi)
        .map(|(&a, &b)| (b - a + 1) as u64)
        .product()
}

/// `<k,tau> / ||tau||` for every vector of `ls`, in the set's order.
pub fn project_onto_tau<S: Scalar>(
    ls: &LatticeSet<S>,
    tau: &[S],
) -> Result<Vec<(TransitCountVector, f64)>> {
    if tau.len() != ls.dim() {
        return Err(Error::DimensionMismatch {
            expected: ls.dim(),
            found: tau.len(),
        });
    }
    let norm = tau
        .iter()
        .map(|t| t.to_f64() * t.to_f64())
        .sum::<f64>()
        .sqrt();
    Ok(ls
        .iter()
        .map(|k| {
            (
                TransitCountVector(k.to_vec()),
                arrival_time(k, tau).to_f64() / norm,
            )
        })
        .collect())
}
