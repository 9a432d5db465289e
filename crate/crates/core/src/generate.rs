//! Seeded random generic models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::forward::{is_generic_with, ForwardOptions};
use crate::lattice::DEFAULT_MAX_TERMS;
use crate::model::Model;
use crate::scalar::{Rational, Scalar};

/// Travel times are multiples of `2^-TAU_BITS`.
pub const TAU_BITS: i32 = 40;
/// Reflectivity magnitudes are multiples of `2^-REFL_BITS`.
pub const REFL_BITS: i32 = 20;

#[derive(Debug, Clone)]
pub struct GenOptions {
    /// Minimum gap between distinct lattice arrival times.
    pub margin_floor: f64,
    pub tau_range: (f64, f64),
    /// Range of `|R_n|`; signs are random.
    pub refl_range: (f64, f64),
    pub max_attempts: usize,
    /// Lattice size cap; larger candidates are resampled.
    pub max_terms: usize,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions {
            margin_floor: 1e-9,
            tau_range: (0.1, 2.0),
            refl_range: (0.05, 0.8),
            max_attempts: 1000,
            max_terms: DEFAULT_MAX_TERMS,
        }
    }
}

fn dyadic(v: f64, bits: i32) -> Rational {
    let scale = 2f64.powi(bits);
    Rational::from_f64((v * scale).round() / scale).expect("finite")
}

/// Draws one candidate model (no genericity check).
pub fn sample_model(
    layers: usize,
    rng: &mut impl Rng,
    opts: &GenOptions,
) -> Result<Model<Rational>> {
    let (t_lo, t_hi) = opts.tau_range;
    let (r_lo, r_hi) = opts.refl_range;
    if !(0.0 < t_lo && t_lo < t_hi) || !(0.0 < r_lo && r_lo <= r_hi && r_hi < 1.0) {
        return Err(Error::InvalidArgument(
            "invalid travel-time or reflectivity range".into(),
        ));
    }
    let tau = (0..=layers)
        .map(|_| dyadic(rng.gen_range(t_lo..=t_hi), TAU_BITS))
        .collect();
    let refl = (0..=layers)
        .map(|_| {
            let r = dyadic(rng.gen_range(r_lo..=r_hi), REFL_BITS);
            if rng.gen_bool(0.5) {
                r
            } else {
                -r
            }
        })
        .collect();
    Model::new(tau, refl)
}

/// A random generic model with `layers` layers whose lattice arrival times
/// are at least `margin_floor` apart. All entries are dyadic, so the model is
/// exactly representable in both numeric modes.
pub fn gen_random_generic(layers: usize, seed: u64, opts: &GenOptions) -> Result<Model<Rational>> {
    if layers == 0 {
        return Err(Error::InvalidArgument("need at least one layer".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let floor = Rational::from_f64(opts.margin_floor)
        .ok_or_else(|| Error::InvalidArgument("margin floor".into()))?;
    let fwd = ForwardOptions {
        max_terms: opts.max_terms,
        ..Default::default()
    };
    for _ in 0..opts.max_attempts {
        let m = sample_model(layers, &mut rng, opts)?;
        let report = match is_generic_with(&m, &fwd) {
            Ok(r) => r,
            Err(Error::GuardExceeded { .. }) => continue,
            Err(e) => return Err(e),
        };
        if report.is_generic() && report.margin.as_ref().is_none_or(|g| *g >= floor) {
            return Ok(m);
        }
    }
    Err(Error::ResampleBudget {
        attempts: opts.max_attempts,
    })
}
