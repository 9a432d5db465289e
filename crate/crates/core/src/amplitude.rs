//! The amplitude polynomial `a(x, k)`: the summed weight of every scattering
//! sequence with transit count vector `k`.
//!
//! Each `(1 - x_n^2)` factor is kept atomic, so coefficients stay small
//! integers and exact evaluation needs no square roots.

use std::io::Write;

use crate::error::{Error, Result};
use crate::lattice::{branch_box, is_member, left_shift, TransitCountVector};
use crate::scalar::Scalar;

/// `coeff * prod_n x_n^{x_exponents[n]} (1 - x_n^2)^{q_exponents[n]}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmplitudeTerm {
    pub coeff: i64,
    pub x_exponents: Vec<u32>,
    pub q_exponents: Vec<u32>,
}

impl AmplitudeTerm {
    /// `sum x_exponents + 2 sum q_exponents`.
    pub fn degree(&self) -> u64 {
        self.x_exponents.iter().map(|&e| e as u64).sum::<u64>()
            + 2 * self.q_exponents.iter().map(|&e| e as u64).sum::<u64>()
    }
}

pub(crate) fn binomial(n: u32, r: u32) -> Option<i64> {
    if r > n {
        return Some(0);
    }
    let r = r.min(n - r) as i64;
    let n = n as i64;
    let mut acc: i64 = 1;
    for i in 0..r {
        // acc * (n - i) is divisible by i + 1 at every step.
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// Product of entrywise binomials `C(k, b) = prod_n C(k_n, b_n)`.
pub fn multi_binomial(k: &[u32], b: &[u32]) -> Option<i64> {
    k.iter()
        .zip(b)
        .try_fold(1i64, |acc, (&n, &r)| acc.checked_mul(binomial(n, r)?))
}

/// Steps `b` to the next point of the box `[lo, hi]` in lexicographic order.
pub(crate) fn next_in_box(b: &mut [u32], lo: &[u32], hi: &[u32]) -> bool {
    for n in (0..b.len()).rev() {
        if b[n] < hi[n] {
            b[n] += 1;
            return true;
        }
        b[n] = lo[n];
    }
    false
}

/// One term per `b` in `V(k)`, in lexicographic order of `b`.
pub fn amplitude_terms(k: &[u32]) -> Result<Vec<AmplitudeTerm>> {
    if !is_member(k) {
        return Err(Error::InvalidArgument(format!(
            "{k:?} is not a transit count vector"
        )));
    }
    let shifted = left_shift(k);
    let (u, hi) = branch_box(k);
    let shifted_minus_u: Vec<u32> = shifted.iter().zip(&u).map(|(a, b)| a - b).collect();
    let overflow = || Error::BinomialOverflow(k.to_vec());
    let mut terms = Vec::new();
    let mut b = u.clone();
    loop {
        let b_minus_u: Vec<u32> = b.iter().zip(&u).map(|(a, c)| a - c).collect();
        let magnitude = multi_binomial(k, &b)
            .and_then(|c| c.checked_mul(multi_binomial(&shifted_minus_u, &b_minus_u)?))
            .ok_or_else(overflow)?;
        let sign_exp: u64 = shifted.iter().zip(&b).map(|(s, v)| (s - v) as u64).sum();
        let coeff = if sign_exp.is_multiple_of(2) {
            magnitude
        } else {
            -magnitude
        };
        let x_exponents = (0..k.len())
            .map(|n| (shifted[n] - b[n]) + (k[n] - b[n]))
            .collect();
        terms.push(AmplitudeTerm {
            coeff,
            x_exponents,
            q_exponents: b.clone(),
        });
        if !next_in_box(&mut b, &u, &hi) {
            break;
        }
    }
    Ok(terms)
}

/// Evaluates a term list at `x`.
pub fn eval_terms<S: Scalar>(x: &[S], terms: &[AmplitudeTerm]) -> S {
    S::eval_terms(x, terms)
}

/// `a(x, k)`, exact in rational mode.
pub fn amplitude_eval<S: Scalar>(x: &[S], k: &[u32]) -> Result<S> {
    if x.len() != k.len() {
        return Err(Error::DimensionMismatch {
            expected: k.len(),
            found: x.len(),
        });
    }
    Ok(S::eval_terms(x, &amplitude_terms(k)?))
}

/// `k + e^n` when `k_{n-1} = k_n = k_{n+1} = 1`; then
/// `a(x, k + e^n) = -2 x_{n-1} x_n a(x, k)`.
pub fn redundancy_ratio_check(k: &[u32], n: usize) -> Option<TransitCountVector> {
    if n == 0 || n + 1 >= k.len() || !is_member(k) {
        return None;
    }
    if k[n - 1] == 1 && k[n] == 1 && k[n + 1] == 1 {
        let mut out = k.to_vec();
        out[n] += 1;
        Some(TransitCountVector::new_unchecked(out))
    } else {
        None
    }
}

/// CSV of a term list: `coeff, x0.., q0..`.
pub fn write_terms_csv<W: Write>(terms: &[AmplitudeTerm], mut w: W) -> Result<()> {
    let dim = terms.first().map_or(0, |t| t.x_exponents.len());
    let mut header = vec!["coeff".to_string()];
    header.extend((0..dim).map(|n| format!("x{n}")));
    header.extend((0..dim).map(|n| format!("q{n}")));
    writeln!(w, "{}", header.join(","))?;
    for t in terms {
        let mut row = vec![t.coeff.to_string()];
        row.extend(t.x_exponents.iter().map(u32::to_string));
        row.extend(t.q_exponents.iter().map(u32::to_string));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
