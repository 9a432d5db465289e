//! Recovering a model from its impulse response.
//!
//! Stage I finds the travel times from arrival times alone, peeling one layer
//! at a time: every arrival explained by the layers found so far is removed,
//! and the earliest unexplained one must be the next primary. Stage II reads
//! the reflectivities off the primary amplitudes. Stage III re-estimates the
//! reflectivities from ratios of redundant multiples when amplitudes are
//! distorted.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::lattice::{
    arrival_time, enumerate_lattice_set_with, primary_vector, visit_restricted, LatticeSet,
    TransitCountVector, DEFAULT_MAX_TERMS,
};
use crate::model::{check_time_tol, total_cmp, validate_model, Data, Model};
use crate::scalar::{short, Scalar};

/// Smallest `|R''_{n-1}|` Stage III will divide by.
pub const DIVISION_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct InverseOptions<S> {
    /// Matching tolerance for arrival times; `1e-9 sigma_d` in float mode and
    /// zero in rational mode when absent.
    pub time_tol: Option<S>,
    /// Reject arrivals that look like primaries but have no multiples.
    pub robust: bool,
    pub max_layers: usize,
    pub max_iterations: usize,
    pub max_terms: usize,
}

impl<S> Default for InverseOptions<S> {
    fn default() -> Self {
        InverseOptions {
            time_tol: None,
            robust: false,
            max_layers: 64,
            max_iterations: 100_000,
            max_terms: DEFAULT_MAX_TERMS,
        }
    }
}

impl<S: Scalar> InverseOptions<S> {
    pub fn robust() -> Self {
        InverseOptions {
            robust: true,
            ..Default::default()
        }
    }

    fn resolve_tol(&self, sigma: &[S]) -> Result<S> {
        match &self.time_tol {
            Some(t) => {
                check_time_tol(t)?;
                Ok(t.clone())
            }
            None => Ok(S::default_time_tol(sigma.last().expect("non-empty sigma"))),
        }
    }
}

/// Output of Stage I.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalTimeInversion<S> {
    pub tau: Vec<S>,
    /// Data indices rejected as spurious, in rejection order.
    pub rejected: Vec<usize>,
    /// Data index to the lattice point that explained it, when unique.
    pub matched: BTreeMap<usize, TransitCountVector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseReport<S> {
    pub model: Model<S>,
    /// `(sigma, alpha)` of every arrival rejected as spurious.
    pub rejected_arrivals: Vec<(S, S)>,
    /// Data index (0-based) to the lattice point explaining it.
    pub matched: BTreeMap<usize, TransitCountVector>,
    /// 0-based data index of the primary `k^N` for `N = 0..=M`.
    pub primary_indices: Vec<usize>,
}

/// Stage I on arrival times alone.
pub fn invert_arrival_times<S: Scalar>(
    sigma: &[S],
    opts: &InverseOptions<S>,
) -> Result<ArrivalTimeInversion<S>> {
    let d = sigma.len();
    if d < 2 {
        return Err(Error::InvalidData(format!(
            "inversion needs at least two arrivals, got {d}"
        )));
    }
    if sigma.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidData(
            "sigma is not strictly increasing".into(),
        ));
    }
    let tol = opts.resolve_tol(sigma)?;
    let bound = sigma[d - 1].clone() + tol.clone();

    let mut alive = vec![true; d];
    alive[0] = false;
    alive[1] = false;
    let mut remaining = d - 2;
    let mut matched = BTreeMap::new();
    matched.insert(0, primary_vector(0, 0)?);
    matched.insert(1, TransitCountVector::new_unchecked(vec![1, 1]));
    let mut tau = vec![sigma[0].clone(), sigma[1].clone() - sigma[0].clone()];
    let mut rejected = Vec::new();
    let mut iterations = 0;

    let min_alive = |alive: &[bool]| alive.iter().position(|&a| a);
    let lookup = |t: &S| -> Option<usize> {
        let i = sigma.partition_point(|s| s < t);
        [i.wrapping_sub(1), i]
            .into_iter()
            .filter(|&j| j < d && (sigma[j].clone() - t.clone()).abs() <= tol)
            .min_by(|&a, &b| {
                total_cmp(
                    &(sigma[a].clone() - t.clone()).abs(),
                    &(sigma[b].clone() - t.clone()).abs(),
                )
            })
    };

    while remaining > 0 {
        iterations += 1;
        if iterations > opts.max_iterations {
            return Err(Error::GuardExceeded {
                what: "inversion iterations",
                limit: opts.max_iterations,
            });
        }
        let n = tau.len() - 1;
        let mut hits: BTreeMap<usize, Option<Vec<u32>>> = BTreeMap::new();
        visit_restricted(&tau, &bound, opts.max_terms, |k, t| {
            if let Some(j) = lookup(t) {
                if alive[j] {
                    hits.entry(j)
                        .and_modify(|e| *e = None)
                        .or_insert_with(|| Some(k.to_vec()));
                }
            }
        })?;
        let first = min_alive(&alive).expect("remaining > 0");
        if opts.robust && n >= 2 && remaining > 1 && hits.len() == 1 && hits.contains_key(&first) {
            alive[first] = false;
            remaining -= 1;
            rejected.push(first);
            let next = min_alive(&alive).expect("more than one arrival remained");
            let below = tau[..n].iter().fold(S::zero(), |a, t| a + t.clone());
            tau[n] = sigma[next].clone() - below;
            if tau[n] <= S::zero() {
                return Err(Error::InversionStalled {
                    layer: n,
                    reason: "non-positive travel time".into(),
                });
            }
            continue;
        }
        if n >= 2 && hits.is_empty() {
            return Err(Error::InversionStalled {
                layer: n,
                reason: "no remaining arrival is explained by the current layers".into(),
            });
        }
        for (j, k) in hits {
            alive[j] = false;
            remaining -= 1;
            if let Some(k) = k {
                matched.insert(j, TransitCountVector::new_unchecked(k));
            }
        }
        if remaining == 0 {
            break;
        }
        if tau.len() > opts.max_layers {
            return Err(Error::GuardExceeded {
                what: "layer count",
                limit: opts.max_layers,
            });
        }
        let next = min_alive(&alive).expect("remaining > 0");
        let total = tau.iter().fold(S::zero(), |a, t| a + t.clone());
        let new_tau = sigma[next].clone() - total;
        if new_tau <= S::zero() {
            return Err(Error::InversionStalled {
                layer: n + 1,
                reason: "non-positive travel time".into(),
            });
        }
        tau.push(new_tau);
    }
    // Pad every match to the final dimension.
    let dim = tau.len();
    let matched = matched
        .into_iter()
        .map(|(j, k)| {
            let mut v = k.into_vec();
            v.resize(dim, 0);
            (j, TransitCountVector::new_unchecked(v))
        })
        .collect();
    Ok(ArrivalTimeInversion {
        tau,
        rejected,
        matched,
    })
}

fn locate_primaries<S: Scalar>(tau: &[S], data: &Data<S>, tol: &S) -> Result<Vec<usize>> {
    let m = tau.len() - 1;
    (0..=m)
        .map(|n| {
            let t = arrival_time(&primary_vector(n, m)?, tau);
            data.find_time(&t, tol)
                .ok_or_else(|| Error::PrimaryNotFound {
                    layer: n,
                    time: short(&t),
                })
        })
        .collect()
}

fn check_reflectivity<S: Scalar>(index: usize, r: &S) -> Result<()> {
    if r.abs() >= S::one() {
        return Err(Error::RecoveredReflectivityOutOfRange {
            index,
            value: short(r),
        });
    }
    Ok(())
}

/// Stage II: reflectivities from the primary amplitudes.
pub fn invert_amplitudes<S: Scalar>(
    tau: &[S],
    data: &Data<S>,
    tol: &S,
) -> Result<(Vec<S>, Vec<usize>)> {
    let rho = locate_primaries(tau, data, tol)?;
    let alpha = data.alpha();
    let mut refl = vec![alpha[rho[0]].clone()];
    check_reflectivity(0, &refl[0])?;
    for n in 1..rho.len() {
        let prev = refl[n - 1].clone();
        let r = alpha[rho[n]].clone() * prev.clone()
            / (alpha[rho[n - 1]].clone() * (S::one() - prev.clone() * prev));
        check_reflectivity(n, &r)?;
        refl.push(r);
    }
    Ok((refl, rho))
}

/// Stages I and II.
pub fn invert<S: Scalar>(data: &Data<S>, opts: &InverseOptions<S>) -> Result<InverseReport<S>> {
    let stage1 = invert_arrival_times(data.sigma(), opts)?;
    let tol = opts.resolve_tol(data.sigma())?;
    let (refl, primary_indices) = invert_amplitudes(&stage1.tau, data, &tol)?;
    let model = validate_model(stage1.tau, refl)?;
    let rejected_arrivals = stage1
        .rejected
        .iter()
        .map(|&j| (data.sigma()[j].clone(), data.alpha()[j].clone()))
        .collect();
    Ok(InverseReport {
        model,
        rejected_arrivals,
        matched: stage1.matched,
        primary_indices,
    })
}

/// Pairs `(k, k + e^n)` of `ls` with `k_{n-1} = k_n = k_{n+1} = 1`.
pub fn redundancy_pairs<S: Scalar>(
    ls: &LatticeSet<S>,
    n: usize,
) -> Vec<(TransitCountVector, TransitCountVector)> {
    if n == 0 || n + 1 >= ls.dim() {
        return Vec::new();
    }
    let mut out = Vec::new();
    for k in ls.iter() {
        if k[n - 1] == 1 && k[n] == 1 && k[n + 1] == 1 {
            let mut kp = k.to_vec();
            kp[n] = 2;
            if ls.contains(&kp) {
                out.push((
                    TransitCountVector::new_unchecked(k.to_vec()),
                    TransitCountVector::new_unchecked(kp),
                ));
            }
        }
    }
    out
}

/// Mean of the largest cluster of `values`, where neighbours in sorted order
/// within `cluster_tol` share a cluster. Equal-size clusters are ranked by
/// smaller spread, then smaller mean. `None` for an empty list.
pub fn consensus<S: Scalar>(values: &[S], cluster_tol: &S) -> Option<S> {
    let mut sorted = values.to_vec();
    sorted.sort_by(total_cmp);
    let mut best: Option<(usize, S, S)> = None;
    let mut start = 0;
    for i in 1..=sorted.len() {
        if i < sorted.len() && sorted[i].clone() - sorted[i - 1].clone() <= *cluster_tol {
            continue;
        }
        let cluster = &sorted[start..i];
        start = i;
        let len = S::from_int(cluster.len() as i64);
        // Offsets from the first member keep the mean of identical values exact.
        let base = cluster[0].clone();
        let mean = base.clone()
            + cluster
                .iter()
                .fold(S::zero(), |a, v| a + (v.clone() - base.clone()))
                / len.clone();
        let spread = cluster.iter().fold(S::zero(), |a, v| {
            a + (v.clone() - mean.clone()) * (v.clone() - mean.clone())
        }) / len;
        let better = match &best {
            None => true,
            Some((size, var, mu)) => {
                cluster.len() > *size
                    || (cluster.len() == *size && (spread < *var || (spread == *var && mean < *mu)))
            }
        };
        if better {
            best = Some((cluster.len(), spread, mean));
        }
    }
    best.map(|(_, _, mean)| mean)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionSet<S> {
    pub n: usize,
    /// `E_n`: redundant pairs whose arrivals were both found in the data.
    pub pairs: Vec<(TransitCountVector, TransitCountVector)>,
    /// `C_n`: the ratios `-alpha_j' / (2 alpha_j)`, one per pair.
    pub ratios: Vec<S>,
    /// `c_n`, an estimate of `R_{n-1} R_n`.
    pub consensus: Option<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionSets<S> {
    pub sets: Vec<CorrectionSet<S>>,
}

impl<S: Scalar> CorrectionSets<S> {
    /// CSV with one row per ratio: `n`, `k`, `k'`, ratio, consensus.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,k,k_prime,ratio,consensus")?;
        for set in &self.sets {
            let c = set
                .consensus
                .as_ref()
                .map(ToString::to_string)
                .unwrap_or_default();
            for ((k, kp), r) in set.pairs.iter().zip(&set.ratios) {
                writeln!(w, "{},\"{}\",\"{}\",{},{}", set.n, k, kp, r, c)?;
            }
        }
        Ok(())
    }
}

/// Default clustering tolerance for Stage III: `1e-6` in float mode, zero in
/// rational mode.
pub fn default_cluster_tol<S: Scalar>() -> S {
    if S::EXACT {
        S::zero()
    } else {
        S::from_f64(1e-6).expect("finite")
    }
}

/// Stage III on the output of [`invert`].
pub fn correct_reflectivity<S: Scalar>(
    report: &InverseReport<S>,
    data: &Data<S>,
    cluster_tol: &S,
) -> Result<(Vec<S>, CorrectionSets<S>)> {
    correct_reflectivity_with(
        report.model.tau(),
        &report.model.refl()[0],
        data,
        cluster_tol,
        None,
    )
}

/// Stage III from travel times `tau` and the surface reflectivity `r0`.
///
/// `R''_n = c_n / R''_{n-1}` for `1 <= n <= M-4`; the last four come from
/// their primaries. With fewer than four layers every `R''_n` with `n >= 1`
/// comes from its primary.
pub fn correct_reflectivity_with<S: Scalar>(
    tau: &[S],
    r0: &S,
    data: &Data<S>,
    cluster_tol: &S,
    time_tol: Option<&S>,
) -> Result<(Vec<S>, CorrectionSets<S>)> {
    if tau.len() < 2 {
        return Err(Error::TooFewInterfaces {
            min: 2,
            found: tau.len(),
        });
    }
    if data.is_empty() {
        return Err(Error::InvalidData("no arrivals".into()));
    }
    if *cluster_tol < S::zero() {
        return Err(Error::InvalidArgument(
            "cluster tolerance must be >= 0".into(),
        ));
    }
    let m = tau.len() - 1;
    let tol = match time_tol {
        Some(t) => {
            check_time_tol(t)?;
            t.clone()
        }
        None => S::default_time_tol(data.sigma().last().expect("non-empty")),
    };
    check_reflectivity(0, r0)?;
    let bound = data.sigma().last().expect("non-empty").clone() + tol.clone();
    let lattice = enumerate_lattice_set_with(tau, &bound, DEFAULT_MAX_TERMS)?;
    let alpha = data.alpha();

    let mut sets = Vec::new();
    for n in 1..=m.saturating_sub(3) {
        let mut pairs = Vec::new();
        let mut ratios = Vec::new();
        for (k, kp) in redundancy_pairs(&lattice, n) {
            let j = data.find_time(&arrival_time(&k, tau), &tol);
            let jp = data.find_time(&arrival_time(&kp, tau), &tol);
            if let (Some(j), Some(jp)) = (j, jp) {
                ratios.push(-alpha[jp].clone() / (S::from_int(2) * alpha[j].clone()));
                pairs.push((k, kp));
            }
        }
        let consensus = consensus(&ratios, cluster_tol);
        sets.push(CorrectionSet {
            n,
            pairs,
            ratios,
            consensus,
        });
    }

    let floor = S::from_f64(DIVISION_FLOOR).expect("finite");
    let mut refl = vec![r0.clone()];
    let tail_start = m.saturating_sub(3).max(1);
    for n in 1..tail_start {
        let c = sets[n - 1]
            .consensus
            .clone()
            .ok_or(Error::EmptyCorrectionSet { n })?;
        let prev = &refl[n - 1];
        if prev.abs() < floor {
            return Err(Error::DivisionFloor { index: n - 1 });
        }
        let r = c / prev.clone();
        check_reflectivity(n, &r)?;
        refl.push(r);
    }
    for n in tail_start..=m {
        let t = arrival_time(&primary_vector(n, m)?, tau);
        let j = data
            .find_time(&t, &tol)
            .ok_or_else(|| Error::PrimaryNotFound {
                layer: n,
                time: short(&t),
            })?;
        let transmission = refl
            .iter()
            .fold(S::one(), |a, r| a * (S::one() - r.clone() * r.clone()));
        let r = alpha[j].clone() / transmission;
        check_reflectivity(n, &r)?;
        refl.push(r);
    }
    Ok((refl, CorrectionSets { sets }))
}

/// Stage I followed by Stage III, skipping the primary recursion. Works on
/// data whose distorted amplitudes would drive Stage II out of range.
pub fn invert_corrected<S: Scalar>(
    data: &Data<S>,
    opts: &InverseOptions<S>,
    cluster_tol: &S,
) -> Result<(Model<S>, CorrectionSets<S>)> {
    let stage1 = invert_arrival_times(data.sigma(), opts)?;
    let (refl, sets) = correct_reflectivity_with(
        &stage1.tau,
        &data.alpha()[0],
        data,
        cluster_tol,
        opts.time_tol.as_ref(),
    )?;
    Ok((validate_model(stage1.tau, refl)?, sets))
}
