//! Controlled damage to impulse responses: decimation, spurious arrivals,
//! additive sine distortion and time shifts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{total_cmp, Data};
use crate::scalar::Scalar;

/// Drops every arrival with `|alpha| < threshold`.
pub fn decimate<S: Scalar>(data: &Data<S>, threshold: &S) -> Result<Data<S>> {
    if *threshold < S::zero() {
        return Err(Error::InvalidArgument(format!(
            "decimation threshold must be >= 0, got {threshold}"
        )));
    }
    let (sigma, alpha): (Vec<S>, Vec<S>) = data
        .terms()
        .filter(|(_, a)| a.abs() >= *threshold)
        .map(|(s, a)| (s.clone(), a.clone()))
        .unzip();
    if sigma.is_empty() {
        return Err(Error::InvalidData(
            "decimation removed every arrival".into(),
        ));
    }
    Ok(Data::from_normal_form(sigma, alpha))
}

/// Merges extra arrivals into `data`. Each must be farther than `guard_tol`
/// from every other arrival and have a nonzero amplitude.
pub fn add_spurious<S: Scalar>(
    data: &Data<S>,
    points: &[(S, S)],
    guard_tol: &S,
) -> Result<Data<S>> {
    let mut terms = data.to_terms();
    for (t, a) in points {
        if a.is_zero() {
            return Err(Error::InvalidArgument(format!(
                "spurious arrival at {t} has zero amplitude"
            )));
        }
        if *t <= S::zero() {
            return Err(Error::InvalidArgument(format!(
                "spurious arrival time {t} is not positive"
            )));
        }
        terms.push((t.clone(), a.clone()));
    }
    terms.sort_by(|x, y| total_cmp(&x.0, &y.0));
    if let Some(w) = terms
        .windows(2)
        .find(|w| w[1].0.clone() - w[0].0.clone() <= *guard_tol)
    {
        return Err(Error::InvalidArgument(format!(
            "spurious arrival collides with the arrival at {} (guard {guard_tol})",
            w[0].0
        )));
    }
    let (sigma, alpha) = terms.into_iter().unzip();
    Ok(Data::from_normal_form(sigma, alpha))
}

/// How random spurious arrivals are drawn.
#[derive(Debug, Clone)]
pub struct SpuriousSpec {
    pub count: usize,
    pub seed: u64,
    /// Times are uniform on this window; `(sigma_2, sigma_d)` when absent.
    pub window: Option<(f64, f64)>,
    /// Magnitudes are uniform on this range, with a random sign.
    pub amplitude_range: (f64, f64),
    /// Minimum separation from every other arrival.
    pub guard_tol: f64,
    pub max_attempts: usize,
}

impl SpuriousSpec {
    pub fn new(count: usize, seed: u64) -> Self {
        SpuriousSpec {
            count,
            seed,
            window: None,
            amplitude_range: (0.01, 0.2),
            guard_tol: 1e-6,
            max_attempts: 100_000,
        }
    }
}

/// Draws spurious arrivals for `data`. Times are rounded to multiples of
/// `2^-40` so they are exact in both numeric modes.
pub fn random_spurious<S: Scalar>(data: &Data<S>, spec: &SpuriousSpec) -> Result<Vec<(S, S)>> {
    let sigma: Vec<f64> = data.sigma().iter().map(Scalar::to_f64).collect();
    let (lo, hi) = match spec.window {
        Some(w) => w,
        None if sigma.len() >= 2 => (sigma[1], sigma[sigma.len() - 1]),
        None => {
            return Err(Error::InvalidData(
                "need at least two arrivals to place spurious ones".into(),
            ))
        }
    };
    if !(lo < hi)
        || !(spec.amplitude_range.0 > 0.0 && spec.amplitude_range.0 <= spec.amplitude_range.1)
    {
        return Err(Error::InvalidArgument(
            "empty spurious time window or amplitude range".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut taken = sigma.clone();
    let mut out = Vec::with_capacity(spec.count);
    let mut attempts = 0;
    while out.len() < spec.count {
        attempts += 1;
        if attempts > spec.max_attempts {
            return Err(Error::ResampleBudget {
                attempts: spec.max_attempts,
            });
        }
        let t = dyadic(rng.gen_range(lo..hi), 40);
        let magnitude = dyadic(
            rng.gen_range(spec.amplitude_range.0..=spec.amplitude_range.1),
            30,
        );
        let a = if rng.gen_bool(0.5) {
            magnitude
        } else {
            -magnitude
        };
        let i = taken.partition_point(|&s| s < t);
        let clear = [i.wrapping_sub(1), i]
            .into_iter()
            .filter_map(|j| taken.get(j))
            .all(|&s| (s - t).abs() > spec.guard_tol);
        if !clear || t <= lo || a == 0.0 {
            continue;
        }
        taken.insert(i, t);
        out.push((
            S::from_f64(t).expect("finite"),
            S::from_f64(a).expect("finite"),
        ));
    }
    out.sort_by(|x, y| total_cmp(&x.0, &y.0));
    Ok(out)
}

fn dyadic(v: f64, bits: i32) -> f64 {
    let scale = 2f64.powi(bits);
    (v * scale).round() / scale
}

/// Adds `amplitude * sin(omega * sigma_j + phase)` to every `alpha_j` with
/// `sigma_j` in `[start, end]`, dropping terms that become zero.
///
/// The sine is evaluated in floating point and converted exactly in
/// rational mode.
pub fn sine_distort<S: Scalar>(
    data: &Data<S>,
    amplitude: f64,
    window: (f64, f64),
    omega: f64,
    phase: f64,
) -> Result<Data<S>> {
    let (start, end) = window;
    if !(start <= end)
        || ![amplitude, start, end, omega, phase]
            .iter()
            .all(|v| v.is_finite())
    {
        return Err(Error::InvalidArgument(format!(
            "invalid sine distortion window ({start}, {end})"
        )));
    }
    let mut sigma = Vec::with_capacity(data.len());
    let mut alpha = Vec::with_capacity(data.len());
    for (s, a) in data.terms() {
        let t = s.to_f64();
        let value = if amplitude != 0.0 && t >= start && t <= end {
            a.clone() + S::from_f64(amplitude * (omega * t + phase).sin()).expect("finite")
        } else {
            a.clone()
        };
        if !value.is_zero() {
            sigma.push(s.clone());
            alpha.push(value);
        }
    }
    if sigma.is_empty() {
        return Err(Error::InvalidData(
            "distortion cancelled every arrival".into(),
        ));
    }
    Ok(Data::from_normal_form(sigma, alpha))
}

/// Shifts every arrival time by `kappa`.
pub fn shift_times<S: Scalar>(data: &Data<S>, kappa: &S) -> Result<Data<S>> {
    let first = data.sigma()[0].clone() + kappa.clone();
    if first <= S::zero() {
        return Err(Error::InvalidArgument(format!(
            "shift {kappa} makes the first arrival time {first} non-positive"
        )));
    }
    let sigma = data
        .sigma()
        .iter()
        .map(|s| s.clone() + kappa.clone())
        .collect();
    Data::new(sigma, data.alpha().to_vec())
}

/// Default sine angular frequency (one cycle per second).
pub const DEFAULT_OMEGA: f64 = 2.0 * std::f64::consts::PI;

/// A combination of perturbations, applied in the order decimate, spurious,
/// sine, shift.
#[derive(Debug, Clone, Default)]
pub struct PerturbSpec<S> {
    pub decimate_threshold: Option<S>,
    pub spurious_points: Vec<(S, S)>,
    pub spurious_random: Option<SpuriousSpec>,
    pub spurious_guard_tol: Option<S>,
    /// `(amplitude, (start, end), omega, phase)`.
    pub sine: Option<(f64, (f64, f64), f64, f64)>,
    pub shift: Option<S>,
}

pub fn apply<S: Scalar>(data: &Data<S>, spec: &PerturbSpec<S>) -> Result<Data<S>> {
    let mut out = data.clone();
    if let Some(t) = &spec.decimate_threshold {
        out = decimate(&out, t)?;
    }
    let mut points = spec.spurious_points.clone();
    if let Some(r) = &spec.spurious_random {
        points.extend(random_spurious(&out, r)?);
    }
    if !points.is_empty() {
        let guard = spec.spurious_guard_tol.clone().unwrap_or_else(S::zero);
        out = add_spurious(&out, &points, &guard)?;
    }
    if let Some((a, w, omega, phase)) = spec.sine {
        out = sine_distort(&out, a, w, omega, phase)?;
    }
    if let Some(k) = &spec.shift {
        out = shift_times(&out, k)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use proptest::prelude::*;

    fn data() -> Data<f64> {
        Data::new(vec![1.0, 2.0, 3.0], vec![0.5, 1e-5, 0.3]).unwrap()
    }

    #[test]
    fn decimate_examples() {
        assert_eq!(decimate(&data(), &0.0).unwrap(), data());
        let d = decimate(&data(), &1e-4).unwrap();
        assert_eq!(d.sigma(), &[1.0, 3.0]);
        assert!(decimate(&data(), &1.0).is_err());
        assert!(decimate(&data(), &-1.0).is_err());
    }

    #[test]
    fn add_spurious_examples() {
        assert_eq!(add_spurious(&data(), &[], &0.0).unwrap(), data());
        let d = add_spurious(&data(), &[(1.5, 0.1)], &1e-9).unwrap();
        assert_eq!(d.sigma(), &[1.0, 1.5, 2.0, 3.0]);
        assert_eq!(d.alpha()[1], 0.1);
        assert!(add_spurious(&data(), &[(2.0 + 1e-12, 0.1)], &1e-9).is_err());
        assert!(add_spurious(&data(), &[(1.5, 0.0)], &1e-9).is_err());
    }

    #[test]
    fn random_spurious_is_seeded_and_clear() {
        let base = Data::new((1..=50).map(|i| i as f64 * 0.1).collect(), vec![0.1; 50]).unwrap();
        let spec = SpuriousSpec::new(12, 7);
        let a: Vec<(f64, f64)> = random_spurious(&base, &spec).unwrap();
        let b: Vec<(f64, f64)> = random_spurious(&base, &spec).unwrap();
        assert_eq!(a, b);
        let merged = add_spurious(&base, &a, &1e-6).unwrap();
        assert_eq!(merged.len(), 62);
        assert!(a.iter().all(|(t, _)| *t > 0.2 && *t < 5.0));
        let exact: Vec<(Rational, Rational)> = random_spurious(&base.convert(), &spec).unwrap();
        assert_eq!(
            exact.iter().map(|(t, _)| t.to_f64()).collect::<Vec<_>>(),
            a.iter().map(|p| p.0).collect::<Vec<_>>()
        );
    }

    #[test]
    fn sine_examples() {
        assert_eq!(
            sine_distort(&data(), 0.0, (0.0, 10.0), 1.0, 0.0).unwrap(),
            data()
        );
        // sin(pi/2) = 1 at sigma = 2 only.
        let d = sine_distort(&data(), 0.2, (1.5, 2.5), std::f64::consts::FRAC_PI_2, 0.0).unwrap();
        assert_eq!(d.alpha()[0], 0.5);
        assert!((d.alpha()[1] - (1e-5 + 0.2 * (std::f64::consts::PI).sin())).abs() < 1e-15);
        let d = sine_distort(&data(), 0.2, (1.5, 2.5), std::f64::consts::PI / 4.0, 0.0).unwrap();
        assert!((d.alpha()[1] - (1e-5 + 0.2)).abs() < 1e-15);
        assert!(sine_distort(&data(), 0.2, (3.0, 1.0), 1.0, 0.0).is_err());
    }

    #[test]
    fn shift_examples() {
        assert_eq!(shift_times(&data(), &0.0).unwrap(), data());
        assert_eq!(
            shift_times(&data(), &1.0).unwrap().sigma(),
            &[2.0, 3.0, 4.0]
        );
        assert!(shift_times(&data(), &-1.0).is_err());
    }

    #[test]
    fn combined_spec() {
        let spec = PerturbSpec {
            decimate_threshold: Some(1e-4),
            spurious_points: vec![(1.5, 0.1)],
            shift: Some(0.5),
            ..Default::default()
        };
        let d = apply(&data(), &spec).unwrap();
        assert_eq!(d.sigma(), &[1.5, 2.0, 3.5]);
    }

    proptest! {
        #[test]
        fn decimate_is_idempotent(alpha in prop::collection::vec(-1.0f64..1.0, 1..20), th in 0.0f64..0.5) {
            let alpha: Vec<f64> = alpha.into_iter().map(|a| if a == 0.0 { 0.75 } else { a }).collect();
            let sigma = (1..=alpha.len()).map(|i| i as f64).collect();
            let d = Data::new(sigma, alpha).unwrap();
            if let Ok(once) = decimate(&d, &th) {
                prop_assert_eq!(decimate(&once, &th).unwrap(), once);
            }
        }
    }
}
