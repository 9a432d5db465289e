//! Ground truth from first principles: walk every scattering sequence,
//! multiply reflection and transmission factors step by step, and add up
//! the weights by arrival time.
//!
//! This is deliberately independent of the amplitude polynomial and is only
//! meant for small instances.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use crate::amplitude::multi_binomial;
use crate::error::{Error, Result};
use crate::lattice::{arrival_time, branch_box, left_shift, TransitCountVector};
use crate::model::{default_time_tol, normalize, Data, Model};
use crate::scalar::Scalar;

/// Default cap on the number of sequences walked.
pub const DEFAULT_MAX_SEQUENCES: usize = 10_000_000;

/// A walk over interface indices `-1, 0, ..., M` that starts and ends at the
/// reference depth `-1` and moves one interface per step.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ScatteringSequence(Vec<i32>);

impl ScatteringSequence {
    pub fn new(path: Vec<i32>, m: usize) -> Result<Self> {
        let valid = path.len() >= 3
            && path[0] == -1
            && path[path.len() - 1] == -1
            && path[1..path.len() - 1]
                .iter()
                .all(|&p| (0..=m as i32).contains(&p))
            && path.windows(2).all(|w| (w[0] - w[1]).abs() == 1);
        if !valid {
            return Err(Error::InvalidArgument(format!(
                "{path:?} is not a scattering sequence for M = {m}"
            )));
        }
        Ok(ScatteringSequence(path))
    }

    pub fn path(&self) -> &[i32] {
        &self.0
    }

    /// Number of steps `L`.
    pub fn steps(&self) -> usize {
        self.0.len() - 1
    }
}

/// Per-interface exponents of `R_j`, `-R_j` and `T_j` collected along a walk.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WeightExponents {
    pub reflect_below: Vec<u32>,
    pub reflect_above: Vec<u32>,
    pub transmit: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceStats {
    /// Transit count vector: down-steps into each interface.
    pub kappa: TransitCountVector,
    /// Branch counts: maximal stretches at depth `>= n` that reach `n + 1`.
    pub beta: Vec<u32>,
    /// Exponents accumulated step by step.
    pub exponents: WeightExponents,
}

/// Computes `kappa`, `beta` and the stepwise weight exponents of `p`, a
/// sequence over interfaces `0..=m`.
pub fn stats(p: &ScatteringSequence, m: usize) -> SequenceStats {
    stats_of_path(&p.0, m)
}

fn stats_of_path(path: &[i32], m: usize) -> SequenceStats {
    let dim = m + 1;
    let mut kappa = vec![0u32; dim];
    for w in path.windows(2) {
        if w[1] > w[0] {
            kappa[w[1] as usize] += 1;
        }
    }
    let interior = &path[1..path.len() - 1];
    let mut beta = vec![0u32; dim];
    for (n, b) in beta.iter_mut().enumerate() {
        let n = n as i32;
        let mut in_run = false;
        let mut deeper = false;
        for &p in interior {
            if p >= n {
                in_run = true;
                deeper |= p > n;
            } else {
                if in_run && deeper {
                    *b += 1;
                }
                in_run = false;
                deeper = false;
            }
        }
        if in_run && deeper {
            *b += 1;
        }
    }
    let mut exponents = WeightExponents {
        reflect_below: vec![0; dim],
        reflect_above: vec![0; dim],
        transmit: vec![0; dim],
    };
    for w in path.windows(3) {
        let j = w[1] as usize;
        if w[0] == w[2] && w[0] < w[1] {
            exponents.reflect_below[j] += 1;
        } else if w[0] == w[2] {
            exponents.reflect_above[j] += 1;
        } else {
            exponents.transmit[j] += 1;
        }
    }
    SequenceStats {
        kappa: TransitCountVector::new_unchecked(kappa),
        beta,
        exponents,
    }
}

/// Closed-form exponents `(k - b, k~ - b, 2b)` for given `kappa` and `beta`.
pub fn closed_form_exponents(kappa: &[u32], beta: &[u32]) -> Option<WeightExponents> {
    let shifted = left_shift(kappa);
    let sub = |a: &[u32]| -> Option<Vec<u32>> {
        a.iter().zip(beta).map(|(x, y)| x.checked_sub(*y)).collect()
    };
    Some(WeightExponents {
        reflect_below: sub(kappa)?,
        reflect_above: sub(&shifted)?,
        transmit: beta.iter().map(|b| 2 * b).collect(),
    })
}

/// `w = (-R)^{k~-b} R^{k-b} T^{2b}` with `T_j^2 = 1 - R_j^2`, after checking
/// that the closed form agrees with the stepwise exponents.
pub fn weight_eval<S: Scalar>(s: &SequenceStats, refl: &[S]) -> Result<S> {
    if refl.len() != s.beta.len() {
        return Err(Error::DimensionMismatch {
            expected: s.beta.len(),
            found: refl.len(),
        });
    }
    let closed = closed_form_exponents(&s.kappa, &s.beta).ok_or_else(|| {
        Error::Internal(format!(
            "branch counts {:?} exceed kappa {}",
            s.beta, s.kappa
        ))
    })?;
    if closed != s.exponents {
        return Err(Error::Internal(format!(
            "stepwise weight exponents {:?} disagree with the closed form {:?}",
            s.exponents, closed
        )));
    }
    let mut w = S::one();
    for (j, r) in refl.iter().enumerate() {
        let e = &s.exponents;
        w = w * r.powu(e.reflect_below[j]) * (-r.clone()).powu(e.reflect_above[j]);
        w = w * (S::one() - r.clone() * r.clone()).powu(e.transmit[j] / 2);
    }
    Ok(w)
}

/// Depth-first walk over sequences with `<kappa, tau> <= t_max`, trying the
/// shallower step first, so sequences arrive in lexicographic order.
fn walk_sequences<S: Scalar>(
    tau: &[S],
    t_max: &S,
    max_sequences: usize,
    limit: Option<&[u32]>,
    visit: &mut dyn FnMut(&[i32]),
) -> Result<()> {
    struct Walk<'a, S> {
        tau: &'a [S],
        t_max: &'a S,
        limit: Option<&'a [u32]>,
        max: usize,
        count: usize,
        path: Vec<i32>,
        kappa: Vec<u32>,
    }
    impl<S: Scalar> Walk<'_, S> {
        fn step(&mut self, time: S, visit: &mut dyn FnMut(&[i32])) -> Result<()> {
            let here = *self.path.last().unwrap();
            // Up first.
            self.path.push(here - 1);
            if here == 0 {
                self.count += 1;
                if self.count > self.max {
                    return Err(Error::GuardExceeded {
                        what: "scattering sequences",
                        limit: self.max,
                    });
                }
                visit(&self.path);
            } else {
                self.step(time.clone(), visit)?;
            }
            self.path.pop();
            let next = (here + 1) as usize;
            if next < self.tau.len() && self.limit.is_none_or(|l| self.kappa[next] < l[next]) {
                let t = time + self.tau[next].clone();
                if t <= *self.t_max {
                    self.kappa[next] += 1;
                    self.path.push(here + 1);
                    self.step(t, visit)?;
                    self.path.pop();
                    self.kappa[next] -= 1;
                }
            }
            Ok(())
        }
    }
    if tau.is_empty() || tau[0] > *t_max {
        return Ok(());
    }
    let mut walk = Walk {
        tau,
        t_max,
        limit,
        max: max_sequences,
        count: 0,
        path: vec![-1, 0],
        kappa: vec![0; tau.len()],
    };
    walk.kappa[0] = 1;
    walk.step(tau[0].clone(), visit)
}

/// All scattering sequences over interfaces `0..=m` arriving by `t_max`,
/// in lexicographic order.
pub fn enumerate_sequences<S: Scalar>(
    m: usize,
    tau: &[S],
    t_max: &S,
) -> Result<Vec<ScatteringSequence>> {
    enumerate_sequences_with(m, tau, t_max, DEFAULT_MAX_SEQUENCES)
}

pub fn enumerate_sequences_with<S: Scalar>(
    m: usize,
    tau: &[S],
    t_max: &S,
    max_sequences: usize,
) -> Result<Vec<ScatteringSequence>> {
    if tau.len() != m + 1 {
        return Err(Error::DimensionMismatch {
            expected: m + 1,
            found: tau.len(),
        });
    }
    let mut out = Vec::new();
    walk_sequences(tau, t_max, max_sequences, None, &mut |p| {
        out.push(ScatteringSequence(p.to_vec()))
    })?;
    Ok(out)
}

/// Sum of sequence weights for every transit count vector reached by
/// `t_max`, in lexicographic order of `k`.
pub fn oracle_weight_sums<S: Scalar>(
    m: &Model<S>,
    t_max: &S,
    max_sequences: usize,
) -> Result<Vec<(TransitCountVector, S)>> {
    let layers = m.layers();
    let mut weights: HashMap<(Vec<u32>, Vec<u32>), S> = HashMap::new();
    let mut sums: BTreeMap<Vec<u32>, S> = BTreeMap::new();
    let mut failure = None;
    walk_sequences(m.tau(), t_max, max_sequences, None, &mut |path| {
        if failure.is_some() {
            return;
        }
        let s = stats_of_path(path, layers);
        let key = (s.kappa.to_vec(), s.beta.clone());
        let w = match weights.get(&key) {
            Some(w) => w.clone(),
            None => match weight_eval(&s, m.refl()) {
                Ok(w) => {
                    weights.insert(key, w.clone());
                    w
                }
                Err(e) => {
                    failure = Some(e);
                    return;
                }
            },
        };
        let slot = sums.entry(s.kappa.into_vec()).or_insert_with(S::zero);
        *slot = slot.clone() + w;
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(sums
        .into_iter()
        .map(|(k, w)| (TransitCountVector::new_unchecked(k), w))
        .collect())
}

/// The impulse response obtained by summing every sequence weight.
pub fn oracle_response<S: Scalar>(m: &Model<S>, t_max: &S) -> Result<Data<S>> {
    oracle_response_with(m, t_max, DEFAULT_MAX_SEQUENCES)
}

pub fn oracle_response_with<S: Scalar>(
    m: &Model<S>,
    t_max: &S,
    max_sequences: usize,
) -> Result<Data<S>> {
    let sums = oracle_weight_sums(m, t_max, max_sequences)?;
    let terms: Vec<(S, S)> = sums
        .into_iter()
        .map(|(k, w)| (arrival_time(&k, m.tau()), w))
        .collect();
    let data = normalize(&terms, &default_time_tol(std::iter::once(t_max)))?;
    if data.is_empty() {
        return Err(Error::EmptyResponse);
    }
    Ok(data)
}

/// Number of sequences with transit count vector `k`, keyed by branch count
/// vector, found by exhaustive search.
pub fn branch_histogram(k: &[u32], max_sequences: usize) -> Result<BTreeMap<Vec<u32>, u64>> {
    let kv = TransitCountVector::new(k.to_vec())?;
    // Unit travel times make |k| the exact time bound.
    let tau = vec![1i64; k.len()];
    let tau: Vec<crate::scalar::Rational> = tau
        .into_iter()
        .map(crate::scalar::Rational::from_int)
        .collect();
    let bound = crate::scalar::Rational::from_int(kv.total() as i64);
    let m = k.len() - 1;
    let mut hist = BTreeMap::new();
    walk_sequences(&tau, &bound, max_sequences, Some(k), &mut |path| {
        let s = stats_of_path(path, m);
        if s.kappa.as_slice() == k {
            *hist.entry(s.beta).or_insert(0) += 1;
        }
    })?;
    Ok(hist)
}

/// Exhaustive count of sequences with `(kappa, beta) = (k, b)`.
pub fn count_sequences_by(k: &[u32], b: &[u32]) -> Result<u64> {
    count_sequences_by_with(k, b, DEFAULT_MAX_SEQUENCES)
}

pub fn count_sequences_by_with(k: &[u32], b: &[u32], max_sequences: usize) -> Result<u64> {
    if b.len() != k.len() {
        return Err(Error::DimensionMismatch {
            expected: k.len(),
            found: b.len(),
        });
    }
    Ok(branch_histogram(k, max_sequences)?
        .get(b)
        .copied()
        .unwrap_or(0))
}

/// Closed-form tree count `C(k, b) C(k~ - u, b - u)`; zero outside `V(k)`.
pub fn tree_count(k: &[u32], b: &[u32]) -> Option<u64> {
    let (u, hi) = branch_box(k);
    if b.iter()
        .zip(&u)
        .zip(&hi)
        .any(|((v, lo), up)| v < lo || v > up)
    {
        return Some(0);
    }
    let shifted = left_shift(k);
    let top: Vec<u32> = shifted.iter().zip(&u).map(|(s, v)| s - v).collect();
    let bottom: Vec<u32> = b.iter().zip(&u).map(|(s, v)| s - v).collect();
    let c = multi_binomial(k, b)?.checked_mul(multi_binomial(&top, &bottom)?)?;
    u64::try_from(c).ok()
}

/// CSV of per-`k` weight sums: entries, time, weight sum.
pub fn write_weight_sums_csv<S: Scalar, W: Write>(
    sums: &[(TransitCountVector, S)],
    tau: &[S],
    mut w: W,
) -> Result<()> {
    let dim = tau.len();
    let header: Vec<String> = (0..dim).map(|n| format!("k{n}")).collect();
    writeln!(w, "{},time,weight", header.join(","))?;
    for (k, s) in sums {
        let row: Vec<String> = k.iter().map(u32::to_string).collect();
        writeln!(w, "{},{},{}", row.join(","), arrival_time(k, tau), s)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amplitude::amplitude_eval;
    use crate::forward::forward;
    use crate::lattice::primary_vector;
    use crate::scalar::Rational;

    fn q(p: i64, d: i64) -> Rational {
        Rational::from_ratio(p, d)
    }

    fn paths(v: &[ScatteringSequence]) -> Vec<Vec<i32>> {
        v.iter().map(|s| s.path().to_vec()).collect()
    }

    #[test]
    fn sequence_enumeration_by_window() {
        let tau = [1.0, 1.0];
        assert_eq!(
            paths(&enumerate_sequences(1, &tau, &1.0).unwrap()),
            vec![vec![-1, 0, -1]]
        );
        assert_eq!(
            paths(&enumerate_sequences(1, &tau, &2.0).unwrap()),
            vec![vec![-1, 0, -1], vec![-1, 0, 1, 0, -1]]
        );
        assert_eq!(
            paths(&enumerate_sequences(1, &tau, &3.0).unwrap()),
            vec![
                vec![-1, 0, -1],
                vec![-1, 0, 1, 0, -1],
                vec![-1, 0, 1, 0, 1, 0, -1]
            ]
        );
    }

    #[test]
    fn sequence_guard() {
        assert!(matches!(
            enumerate_sequences_with(2, &[1.0, 0.1, 0.1], &3.0, 100),
            Err(Error::GuardExceeded { .. })
        ));
    }

    #[test]
    fn sequence_validation() {
        assert!(ScatteringSequence::new(vec![-1, 0, -1], 0).is_ok());
        assert!(ScatteringSequence::new(vec![-1, 0, 2, 0, -1], 2).is_err());
        assert!(ScatteringSequence::new(vec![-1, 0, -1, 0, -1], 1).is_err());
        assert!(ScatteringSequence::new(vec![-1, 0, 1, 0, -1], 0).is_err());
    }

    #[test]
    fn stats_examples() {
        let r = [0.5, 0.7];
        let s = stats(&ScatteringSequence::new(vec![-1, 0, -1], 1).unwrap(), 1);
        assert_eq!(s.kappa.as_slice(), &[1, 0]);
        assert_eq!(s.beta, vec![0, 0]);
        assert_eq!(weight_eval(&s, &r).unwrap(), 0.5);

        let s = stats(
            &ScatteringSequence::new(vec![-1, 0, 1, 0, -1], 1).unwrap(),
            1,
        );
        assert_eq!(s.kappa.as_slice(), &[1, 1]);
        assert_eq!(s.beta, vec![1, 0]);
        assert!((weight_eval(&s, &r).unwrap() - 0.525).abs() < 1e-15);

        let s = stats(
            &ScatteringSequence::new(vec![-1, 0, 1, 0, 1, 0, -1], 1).unwrap(),
            1,
        );
        assert_eq!(s.kappa.as_slice(), &[1, 2]);
        assert_eq!(s.beta, vec![1, 0]);
        assert!((weight_eval(&s, &r).unwrap() + 0.18375).abs() < 1e-15);
        assert_eq!(s.exponents.reflect_above, vec![1, 0]);
    }

    #[test]
    fn inconsistent_stats_are_reported() {
        let mut s = stats(
            &ScatteringSequence::new(vec![-1, 0, 1, 0, -1], 1).unwrap(),
            1,
        );
        s.exponents.transmit[0] = 0;
        assert!(matches!(
            weight_eval(&s, &[0.5, 0.7]),
            Err(Error::Internal(_))
        ));
    }

    #[test]
    fn oracle_matches_one_layer_forward() {
        let m = Model::new(vec![1.0, 0.5], vec![0.5, 0.7]).unwrap();
        let d = oracle_response(&m, &1.5).unwrap();
        let (f, _) = forward(&m, None).unwrap();
        assert_eq!(d.sigma(), f.sigma());
        assert!((d.alpha()[1] - f.alpha()[1]).abs() < 1e-15);
    }

    #[test]
    fn oracle_reproduces_cancellation() {
        let r1 = std::f64::consts::FRAC_1_SQRT_2;
        let m = Model::new(vec![1.0, 0.5, 0.5], vec![0.5, r1, 0.5]).unwrap();
        let d = oracle_response(&m, &2.0).unwrap();
        assert_eq!(d.sigma(), &[1.0, 1.5]);
    }

    #[test]
    fn oracle_with_only_surface_reflector() {
        let m = Model::new(
            vec![q(1, 1), q(1, 3), q(1, 2)],
            vec![q(1, 3), q(0, 1), q(0, 1)],
        )
        .unwrap();
        let d = oracle_response(&m, &q(3, 1)).unwrap();
        assert_eq!(d.sigma(), &[q(1, 1)]);
        assert_eq!(d.alpha(), &[q(1, 3)]);
    }

    #[test]
    fn per_k_sums_match_amplitude_polynomial() {
        let m = Model::new(
            vec![q(1, 1), q(1, 3), q(1, 5)],
            vec![q(1, 2), q(-2, 5), q(3, 7)],
        )
        .unwrap();
        for (k, w) in oracle_weight_sums(&m, &q(3, 1), DEFAULT_MAX_SEQUENCES).unwrap() {
            assert_eq!(w, amplitude_eval(m.refl(), &k).unwrap(), "k = {k}");
        }
    }

    #[test]
    fn tree_count_examples() {
        assert_eq!(count_sequences_by(&[1, 1, 0], &[1, 0, 0]).unwrap(), 1);
        // Only (-1,0,1,0,1,0,-1) has kappa (1,2,0), and it branches once at depth 0.
        assert_eq!(count_sequences_by(&[1, 2, 0], &[1, 0, 0]).unwrap(), 1);
        assert_eq!(tree_count(&[1, 2, 0], &[1, 0, 0]), Some(1));
        for m in 0..4 {
            for n in 0..=m {
                let k = primary_vector(n, m).unwrap();
                let b = left_shift(&k);
                assert_eq!(count_sequences_by(&k, &b).unwrap(), 1);
            }
        }
    }

    #[test]
    fn tree_count_matches_exhaustive_search() {
        for k in [
            vec![1, 2, 2, 0],
            vec![1, 3, 2],
            vec![1, 2, 3, 1],
            vec![1, 1, 2, 2],
        ] {
            let hist = branch_histogram(&k, DEFAULT_MAX_SEQUENCES).unwrap();
            let (u, hi) = branch_box(&k);
            let mut b = u.clone();
            loop {
                assert_eq!(
                    hist.get(&b).copied().unwrap_or(0),
                    tree_count(&k, &b).unwrap(),
                    "k={k:?} b={b:?}"
                );
                if !crate::amplitude::next_in_box(&mut b, &u, &hi) {
                    break;
                }
            }
            let total: u64 = hist.values().sum();
            let boxed: u64 = hist
                .keys()
                .filter(|b| tree_count(&k, b).unwrap() > 0)
                .map(|b| hist[b])
                .sum();
            assert_eq!(total, boxed, "every branch vector lies in V(k)");
        }
    }
}
