//! Layered-medium models, impulse-response data, and normal-form construction.

use std::cmp::Ordering;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::scalar::{short, Scalar};

/// Largest allowed time span of one cluster, in units of the time tolerance.
pub const MAX_CLUSTER_SPAN_FACTOR: i64 = 8;

/// A layered model: two-way travel times `tau` and reflection coefficients
/// `refl`, both indexed by interface `0..=M`.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<S> {
    tau: Vec<S>,
    refl: Vec<S>,
}

impl<S: Scalar> Model<S> {
    /// Validates an `M >= 1` layer model.
    pub fn new(tau: Vec<S>, refl: Vec<S>) -> Result<Self> {
        validate_model(tau, refl)
    }

    pub fn tau(&self) -> &[S] {
        &self.tau
    }

    pub fn refl(&self) -> &[S] {
        &self.refl
    }

    /// Number of layers `M` (one less than the number of interfaces).
    pub fn layers(&self) -> usize {
        self.tau.len() - 1
    }

    pub fn total_travel_time(&self) -> S {
        total_travel_time(self)
    }

    pub fn into_parts(self) -> (Vec<S>, Vec<S>) {
        (self.tau, self.refl)
    }

    /// Re-expresses the model in another numeric mode (exact where possible).
    pub fn convert<T: Scalar>(&self) -> Model<T> {
        let conv = |v: &S| T::from_rational(&v.to_rational());
        Model {
            tau: self.tau.iter().map(conv).collect(),
            refl: self.refl.iter().map(conv).collect(),
        }
    }
}

/// Validates `(tau, refl)` as a model with at least one layer.
pub fn validate_model<S: Scalar>(tau: Vec<S>, refl: Vec<S>) -> Result<Model<S>> {
    validate_model_with(tau, refl, false)
}

/// Like [`validate_model`], optionally accepting a single interface (`M = 0`).
pub fn validate_model_with<S: Scalar>(
    tau: Vec<S>,
    refl: Vec<S>,
    allow_single_interface: bool,
) -> Result<Model<S>> {
    if tau.len() != refl.len() {
        return Err(Error::LengthMismatch {
            tau: tau.len(),
            refl: refl.len(),
        });
    }
    let min = if allow_single_interface { 1 } else { 2 };
    if tau.len() < min {
        return Err(Error::TooFewInterfaces {
            min,
            found: tau.len(),
        });
    }
    if let Some(index) = tau.iter().position(|t| *t <= S::zero()) {
        return Err(Error::NonPositiveTravelTime {
            index,
            value: short(&tau[index]),
        });
    }
    let one = S::one();
    if let Some(index) = refl.iter().position(|r| r.abs() >= one) {
        return Err(Error::ReflectivityOutOfRange {
            index,
            value: short(&refl[index]),
        });
    }
    Ok(Model { tau, refl })
}

/// `|tau| = tau_0 + ... + tau_M`, accumulated left to right.
pub fn total_travel_time<S: Scalar>(m: &Model<S>) -> S {
    m.tau.iter().fold(S::zero(), |acc, t| acc + t.clone())
}

/// Piecewise-constant physical medium.
///
/// `depths` holds `z_{-1} < z_0 < ... < z_M`. `densities` and `moduli` hold
/// one value per medium: the upper half space containing the reference depth
/// `z_{-1}`, then layers `1..=M`, then the lower half space below `z_M`, so
/// each has `M + 2` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalProfile {
    pub depths: Vec<f64>,
    pub densities: Vec<f64>,
    pub moduli: Vec<f64>,
}

impl PhysicalProfile {
    fn validate(&self) -> Result<()> {
        let media = self.depths.len();
        if media < 2 {
            return Err(Error::InvalidProfile(
                "need at least the reference depth and one interface".into(),
            ));
        }
        if self.densities.len() != media || self.moduli.len() != media {
            return Err(Error::InvalidProfile(format!(
                "expected {media} densities and moduli (one per medium), got {} and {}",
                self.densities.len(),
                self.moduli.len()
            )));
        }
        if self.depths.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidProfile(
                "depths must be strictly increasing".into(),
            ));
        }
        let bad = |v: &f64| !(v.is_finite() && *v > 0.0);
        if self.densities.iter().any(bad) || self.moduli.iter().any(bad) {
            return Err(Error::InvalidProfile(
                "densities and moduli must be finite and positive".into(),
            ));
        }
        Ok(())
    }
}

/// Converts depths, densities and bulk moduli to travel times and
/// reflection coefficients.
///
/// Medium `j` has speed `sqrt(K_j / rho_j)` and impedance `sqrt(K_j rho_j)`.
/// `tau_n` is the two-way time through the medium above interface `n` and
/// `R_n` compares the impedances on either side of interface `n`; for `n = 0`
/// the upper medium is the reference half space.
pub fn from_physical(profile: &PhysicalProfile) -> Result<Model<f64>> {
    profile.validate()?;
    let interfaces = profile.depths.len() - 1;
    let speed = |j: usize| (profile.moduli[j] / profile.densities[j]).sqrt();
    let impedance = |j: usize| (profile.moduli[j] * profile.densities[j]).sqrt();
    let tau = (0..interfaces)
        .map(|n| 2.0 * (profile.depths[n + 1] - profile.depths[n]) / speed(n))
        .collect();
    let refl = (0..interfaces)
        .map(|n| {
            let (upper, lower) = (impedance(n), impedance(n + 1));
            (upper - lower) / (upper + lower)
        })
        .collect();
    validate_model_with(tau, refl, true)
}

/// Normal-form impulse response: strictly increasing `sigma`, nonzero `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct Data<S> {
    sigma: Vec<S>,
    alpha: Vec<S>,
}

impl<S: Scalar> Data<S> {
    /// Validates non-empty normal-form data.
    pub fn new(sigma: Vec<S>, alpha: Vec<S>) -> Result<Self> {
        if sigma.len() != alpha.len() {
            return Err(Error::InvalidData(format!(
                "sigma has {} entries but alpha has {}",
                sigma.len(),
                alpha.len()
            )));
        }
        if sigma.is_empty() {
            return Err(Error::InvalidData(
                "at least one arrival is required".into(),
            ));
        }
        if let Some(i) = sigma.windows(2).position(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidData(format!(
                "sigma is not strictly increasing at index {}",
                i + 1
            )));
        }
        if let Some(i) = alpha.iter().position(|a| a.is_zero()) {
            return Err(Error::InvalidData(format!("alpha[{i}] is zero")));
        }
        Ok(Data { sigma, alpha })
    }

    /// Builds data already known to be in normal form (may be empty).
    pub(crate) fn from_normal_form(sigma: Vec<S>, alpha: Vec<S>) -> Self {
        debug_assert_eq!(sigma.len(), alpha.len());
        Data { sigma, alpha }
    }

    pub fn sigma(&self) -> &[S] {
        &self.sigma
    }

    pub fn alpha(&self) -> &[S] {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&S, &S)> {
        self.sigma.iter().zip(&self.alpha)
    }

    pub fn to_terms(&self) -> RawTermList<S> {
        self.terms().map(|(s, a)| (s.clone(), a.clone())).collect()
    }

    /// Index of the arrival within `tol` of `t`, if any (nearest wins).
    pub fn find_time(&self, t: &S, tol: &S) -> Option<usize> {
        let i = self.sigma.partition_point(|s| s < t);
        let mut best: Option<(usize, S)> = None;
        for j in [i.wrapping_sub(1), i] {
            if let Some(s) = self.sigma.get(j) {
                let gap = (s.clone() - t.clone()).abs();
                if gap <= *tol && best.as_ref().is_none_or(|(_, g)| gap < *g) {
                    best = Some((j, gap));
                }
            }
        }
        best.map(|(j, _)| j)
    }

    pub fn into_parts(self) -> (Vec<S>, Vec<S>) {
        (self.sigma, self.alpha)
    }

    pub fn convert<T: Scalar>(&self) -> Data<T> {
        let conv = |v: &S| T::from_rational(&v.to_rational());
        Data {
            sigma: self.sigma.iter().map(conv).collect(),
            alpha: self.alpha.iter().map(conv).collect(),
        }
    }
}

/// Unordered `(time, amplitude)` pairs prior to normalization.
pub type RawTermList<S> = Vec<(S, S)>;

/// Default time tolerance for a set of times: `1e-9 * max|t|` in float mode,
/// zero in rational mode.
pub fn default_time_tol<'a, S: Scalar>(times: impl IntoIterator<Item = &'a S>) -> S {
    let scale = times
        .into_iter()
        .fold(S::zero(), |m, t| if t.abs() > m { t.abs() } else { m });
    S::default_time_tol(&scale)
}

pub(crate) fn total_cmp<S: PartialOrd>(a: &S, b: &S) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

/// Splits sorted `times` into maximal chains whose neighbours are within
/// `tol`, rejecting chains that span more than `MAX_CLUSTER_SPAN_FACTOR * tol`.
pub(crate) fn cluster_sorted<S: Scalar>(times: &[S], tol: &S) -> Result<Vec<Range<usize>>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=times.len() {
        if i == times.len() || times[i].clone() - times[i - 1].clone() > *tol {
            if i > start {
                let span = times[i - 1].clone() - times[start].clone();
                let limit = S::from_int(MAX_CLUSTER_SPAN_FACTOR) * tol.clone();
                if span > limit {
                    return Err(Error::ClusterSpan {
                        span: short(&span),
                        limit: short(&limit),
                    });
                }
                out.push(start..i);
            }
            start = i;
        }
    }
    Ok(out)
}

pub(crate) fn check_time_tol<S: Scalar>(time_tol: &S) -> Result<()> {
    if *time_tol < S::zero() {
        return Err(Error::InvalidArgument(format!(
            "time tolerance must be >= 0, got {time_tol}"
        )));
    }
    if S::EXACT && !time_tol.is_zero() {
        return Err(Error::InvalidArgument(
            "time tolerance must be 0 in rational mode".into(),
        ));
    }
    Ok(())
}

/// Puts a term list in normal form.
///
/// Times within `time_tol` of each other (transitively) form one arrival at
/// the cluster's earliest time; amplitudes in a cluster are summed and
/// clusters that cancel are dropped. The result may be empty.
pub fn normalize<S: Scalar>(terms: &[(S, S)], time_tol: &S) -> Result<Data<S>> {
    check_time_tol(time_tol)?;
    let mut sorted: Vec<&(S, S)> = terms.iter().collect();
    sorted.sort_by(|a, b| total_cmp(&a.0, &b.0).then_with(|| total_cmp(&a.1, &b.1)));
    let times: Vec<S> = sorted.iter().map(|t| t.0.clone()).collect();
    let mut sigma = Vec::new();
    let mut alpha = Vec::new();
    for range in cluster_sorted(&times, time_tol)? {
        let (sum, magnitude) = sorted[range.clone()]
            .iter()
            .fold((S::zero(), S::zero()), |(s, m), t| {
                (s + t.1.clone(), m + t.1.abs())
            });
        if !S::cancels(&sum, &magnitude) {
            sigma.push(times[range.start].clone());
            alpha.push(sum);
        }
    }
    Ok(Data::from_normal_form(sigma, alpha))
}

/// Convenience: `normalize` with the default tolerance for the given terms.
pub fn normalize_default<S: Scalar>(terms: &[(S, S)]) -> Result<Data<S>> {
    let tol = default_time_tol(terms.iter().map(|t| &t.0));
    normalize(terms, &tol)
}
