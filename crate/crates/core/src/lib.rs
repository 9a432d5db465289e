//! Exact forward and inverse modelling of plane-wave reflection in
//! piecewise-constant layered media.
//!
//! A [`Model`] holds two-way travel times `tau` and reflection coefficients
//! `R` for interfaces `0..=M`. Its impulse response on `[0, |tau|]` is a
//! finite train of arrivals, [`Data`], computed by [`forward`] from the
//! amplitude polynomials and inverted by [`invert`]. Every algorithm runs in
//! either `f64` or exact [`Rational`] arithmetic.
//!
//! ```
//! use layerwave::{forward, invert, InverseOptions, Model, Rational, Scalar};
//!
//! let q = |p, d| Rational::from_ratio(p, d);
//! let m = Model::new(vec![q(1, 1), q(1, 3), q(1, 5)], vec![q(1, 2), q(-1, 4), q(2, 5)]).unwrap();
//! let (data, _) = forward(&m, None).unwrap();
//! let report = invert(&data, &InverseOptions::default()).unwrap();
//! assert_eq!(report.model, m);
//! ```

// Ordering checks are written `!(a < b)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amplitude;
pub mod error;
pub mod forward;
pub mod generate;
pub mod inverse;
pub mod io;
pub mod lattice;
pub mod model;
pub mod oracle;
pub mod perturb;
pub mod scalar;

pub use amplitude::{amplitude_eval, amplitude_terms, redundancy_ratio_check, AmplitudeTerm};
pub use error::{Error, ErrorKind, Result};
pub use forward::{
    enumeration_matrix, forward, forward_with, ill_posed_pair, is_generic, EnumerationMap,
    EnumerationMatrix, ForwardOptions, GenericityReport,
};
pub use generate::{gen_random_generic, GenOptions};
pub use inverse::{
    consensus, correct_reflectivity, correct_reflectivity_with, invert, invert_arrival_times,
    invert_corrected, redundancy_pairs, CorrectionSet, CorrectionSets, InverseOptions,
    InverseReport,
};
pub use lattice::{
    branch_box, enumerate_lattice_set, enumerate_restricted, left_shift, primary_vector,
    project_onto_tau, LatticeSet, TransitCountVector,
};
pub use model::{
    from_physical, normalize, total_travel_time, validate_model, Data, Model, PhysicalProfile,
    RawTermList,
};
pub use oracle::{
    count_sequences_by, enumerate_sequences, oracle_response, stats, weight_eval,
    ScatteringSequence,
};
pub use perturb::{add_spurious, decimate, shift_times, sine_distort, PerturbSpec};
pub use scalar::{Rational, Scalar};
