//! Forward modelling: from a model to its finite-time impulse response.

use std::io::Write;

use rayon::prelude::*;

use crate::amplitude::amplitude_eval;
use crate::error::{Error, Result};
use crate::lattice::{
    arrival_time, enumerate_lattice_set_with, primary_vector, LatticeSet, TransitCountVector,
    DEFAULT_MAX_TERMS,
};
use crate::model::{
    check_time_tol, cluster_sorted, default_time_tol, total_cmp, validate_model, Data, Model,
};
use crate::scalar::Scalar;

/// Factor applied to the time tolerance when deciding whether two lattice
/// arrival times are distinct in float mode.
pub const GENERIC_MARGIN_FACTOR: i64 = 10;

#[derive(Debug, Clone)]
pub struct ForwardOptions<S> {
    /// Time window end; `|tau|` when absent.
    pub t_max: Option<S>,
    /// Coincidence tolerance; the mode's default when absent.
    pub time_tol: Option<S>,
    pub max_terms: usize,
}

impl<S> Default for ForwardOptions<S> {
    fn default() -> Self {
        ForwardOptions {
            t_max: None,
            time_tol: None,
            max_terms: DEFAULT_MAX_TERMS,
        }
    }
}

/// The enumeration function `psi`: which data index each lattice point
/// contributes to, with `0` marking points whose arrival cancelled.
#[derive(Debug, Clone)]
pub struct EnumerationMap<S> {
    lattice: LatticeSet<S>,
    times: Vec<S>,
    amplitudes: Vec<S>,
    psi: Vec<usize>,
    sigma: Vec<S>,
}

impl<S: Scalar> EnumerationMap<S> {
    pub fn lattice(&self) -> &LatticeSet<S> {
        &self.lattice
    }

    /// Number of data terms `d`.
    pub fn d(&self) -> usize {
        self.sigma.len()
    }

    /// `psi` of the `i`-th lattice point (lexicographic index).
    pub fn psi(&self, i: usize) -> usize {
        self.psi[i]
    }

    pub fn psi_values(&self) -> &[usize] {
        &self.psi
    }

    pub fn psi_of(&self, k: &[u32]) -> Option<usize> {
        self.lattice.position(k).map(|i| self.psi[i])
    }

    pub fn time(&self, i: usize) -> &S {
        &self.times[i]
    }

    /// `a(R, k)` of the `i`-th lattice point.
    pub fn amplitude(&self, i: usize) -> &S {
        &self.amplitudes[i]
    }

    /// Lattice indices with `psi = n` (`n` is 1-based).
    pub fn preimage(&self, n: usize) -> Vec<usize> {
        (0..self.psi.len()).filter(|&i| self.psi[i] == n).collect()
    }

    /// Whether `psi` is a bijection onto `1..=d`.
    pub fn is_bijective(&self) -> bool {
        let mut seen = vec![false; self.d() + 1];
        for &p in &self.psi {
            if p == 0 || seen[p] {
                return false;
            }
            seen[p] = true;
        }
        self.psi.len() == self.d()
    }

    /// CSV with one row per lattice point: entries, time, amplitude, psi.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let dim = self.lattice.dim();
        let header: Vec<String> = (0..dim).map(|n| format!("k{n}")).collect();
        writeln!(w, "{},time,amplitude,psi", header.join(","))?;
        for (i, k) in self.lattice.iter().enumerate() {
            let row: Vec<String> = k.iter().map(u32::to_string).collect();
            writeln!(
                w,
                "{},{},{},{}",
                row.join(","),
                self.times[i],
                self.amplitudes[i],
                self.psi[i]
            )?;
        }
        Ok(())
    }
}

/// Lattice points with their times and amplitudes, clustered by time.
struct Assembled<S> {
    lattice: LatticeSet<S>,
    times: Vec<S>,
    amplitudes: Vec<S>,
    /// Lattice indices sorted by (time, k).
    order: Vec<usize>,
    clusters: Vec<std::ops::Range<usize>>,
}

fn assemble<S: Scalar>(m: &Model<S>, opts: &ForwardOptions<S>) -> Result<Assembled<S>> {
    let t_max = opts.t_max.clone().unwrap_or_else(|| m.total_travel_time());
    let lattice = enumerate_lattice_set_with(m.tau(), &t_max, opts.max_terms)?;
    let times = lattice.times();
    let tol = match &opts.time_tol {
        Some(t) => {
            check_time_tol(t)?;
            t.clone()
        }
        None => default_time_tol(std::iter::once(&t_max)),
    };
    let refl = m.refl();
    let amplitudes = (0..lattice.len())
        .into_par_iter()
        .map(|i| amplitude_eval(refl, lattice.get(i)))
        .collect::<Result<Vec<S>>>()?;
    let mut order: Vec<usize> = (0..lattice.len()).collect();
    order.sort_by(|&a, &b| total_cmp(&times[a], &times[b]).then(a.cmp(&b)));
    let sorted_times: Vec<S> = order.iter().map(|&i| times[i].clone()).collect();
    let clusters = cluster_sorted(&sorted_times, &tol)?;
    Ok(Assembled {
        lattice,
        times,
        amplitudes,
        order,
        clusters,
    })
}

/// Computes the impulse response of `m` on `[0, t_max]` together with its
/// enumeration map.
pub fn forward<S: Scalar>(m: &Model<S>, t_max: Option<&S>) -> Result<(Data<S>, EnumerationMap<S>)> {
    forward_with(
        m,
        &ForwardOptions {
            t_max: t_max.cloned(),
            ..Default::default()
        },
    )
}

pub fn forward_with<S: Scalar>(
    m: &Model<S>,
    opts: &ForwardOptions<S>,
) -> Result<(Data<S>, EnumerationMap<S>)> {
    let Assembled {
        lattice,
        times,
        amplitudes,
        order,
        clusters,
    } = assemble(m, opts)?;
    let mut psi = vec![0usize; lattice.len()];
    let mut sigma = Vec::new();
    let mut alpha = Vec::new();
    for range in clusters {
        let members = &order[range];
        let (sum, magnitude) = members.iter().fold((S::zero(), S::zero()), |(s, g), &i| {
            (s + amplitudes[i].clone(), g + amplitudes[i].abs())
        });
        if S::cancels(&sum, &magnitude) {
            continue;
        }
        sigma.push(times[members[0]].clone());
        alpha.push(sum);
        for &i in members {
            psi[i] = sigma.len();
        }
    }
    if sigma.is_empty() {
        return Err(Error::EmptyResponse);
    }
    let map = EnumerationMap {
        lattice,
        times,
        amplitudes,
        psi,
        sigma: sigma.clone(),
    };
    Ok((Data::from_normal_form(sigma, alpha), map))
}

/// Square matrix `K_M`: its columns are the primary vectors `k^0..k^M`.
pub fn k_matrix(m: usize) -> Vec<Vec<i64>> {
    (0..=m)
        .map(|i| (0..=m).map(|j| i64::from(i <= j)).collect())
        .collect()
}

/// `J_M = K_M^{-1}`: ones on the diagonal, minus ones just above it.
pub fn j_matrix(m: usize) -> Vec<Vec<i64>> {
    (0..=m)
        .map(|i| {
            (0..=m)
                .map(|j| match j.wrapping_sub(i) {
                    0 => 1,
                    1 => -1,
                    _ => 0,
                })
                .collect()
        })
        .collect()
}

/// Integer matrix product.
pub fn mat_mul(a: &[Vec<i64>], b: &[Vec<i64>]) -> Vec<Vec<i64>> {
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| row.iter().zip(b).map(|(x, r)| x * r[j]).sum())
                .collect()
        })
        .collect()
}

/// Row vector times integer matrix.
pub fn row_times<S: Scalar>(row: &[S], mat: &[Vec<i64>]) -> Vec<S> {
    let cols = mat.first().map_or(0, Vec::len);
    (0..cols)
        .map(|j| {
            row.iter().zip(mat).fold(S::zero(), |acc, (v, r)| {
                if r[j] == 0 {
                    acc
                } else {
                    acc + S::from_int(r[j]) * v.clone()
                }
            })
        })
        .collect()
}

/// `A_psi`: `M + 1` rows, one column per data term holding `psi^{-1}(n)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnumerationMatrix {
    rows: usize,
    columns: Vec<TransitCountVector>,
}

impl EnumerationMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.columns[j][i]
    }

    pub fn column(&self, j: usize) -> &TransitCountVector {
        &self.columns[j]
    }

    pub fn to_rows(&self) -> Vec<Vec<i64>> {
        (0..self.rows)
            .map(|i| self.columns.iter().map(|c| c[i] as i64).collect())
            .collect()
    }

    /// `tau A_psi`, which reproduces the arrival times.
    pub fn apply<S: Scalar>(&self, tau: &[S]) -> Vec<S> {
        self.columns.iter().map(|c| arrival_time(c, tau)).collect()
    }

    /// Column positions of `k^0..k^M` (the data indices `rho(N) - 1`).
    pub fn primary_columns(&self) -> Result<Vec<usize>> {
        let m = self.rows - 1;
        (0..=m)
            .map(|n| {
                let k = primary_vector(n, m)?;
                self.columns.iter().position(|c| *c == k).ok_or_else(|| {
                    Error::Internal(format!("primary vector {k} missing from A_psi"))
                })
            })
            .collect()
    }
}

/// Builds `A_psi` and checks `sigma = tau A_psi` against the map's data.
pub fn enumeration_matrix<S: Scalar>(em: &EnumerationMap<S>) -> Result<EnumerationMatrix> {
    if !em.is_bijective() {
        return Err(Error::NonGeneric(
            "enumeration map is not a bijection".into(),
        ));
    }
    let mut columns = vec![None; em.d()];
    for (i, k) in em.lattice.iter().enumerate() {
        columns[em.psi[i] - 1] = Some(TransitCountVector::new_unchecked(k.to_vec()));
    }
    let columns: Vec<TransitCountVector> = columns.into_iter().map(Option::unwrap).collect();
    let matrix = EnumerationMatrix {
        rows: em.lattice.dim(),
        columns,
    };
    let tau = em.lattice.tau();
    let scale = em.sigma.last().cloned().unwrap_or_else(S::zero);
    let tol = S::default_time_tol(&scale);
    for (n, (t, s)) in matrix.apply(tau).iter().zip(&em.sigma).enumerate() {
        if (t.clone() - s.clone()).abs() > tol {
            return Err(Error::Internal(format!(
                "tau A_psi differs from sigma at column {n}"
            )));
        }
    }
    Ok(matrix)
}

/// Outcome of the genericity test on `L^tau_M`.
#[derive(Debug, Clone)]
pub struct GenericityReport<S> {
    pub time_injective: bool,
    /// Lattice points whose arrival times coincide (adjacent in time order).
    pub collisions: Vec<(TransitCountVector, TransitCountVector)>,
    /// Lattice points with `a(R, k) = 0` or whose arrival cancelled.
    pub zero_amplitudes: Vec<TransitCountVector>,
    /// Smallest gap between consecutive distinct lattice arrival times;
    /// absent when there is a single lattice point.
    pub margin: Option<S>,
}

impl<S: Scalar> GenericityReport<S> {
    pub fn is_generic(&self) -> bool {
        self.time_injective && self.zero_amplitudes.is_empty()
    }
}

/// Checks both genericity conditions: distinct arrival times on the lattice
/// set and nonvanishing amplitudes.
pub fn is_generic<S: Scalar>(m: &Model<S>) -> Result<GenericityReport<S>> {
    is_generic_with(m, &ForwardOptions::default())
}

pub fn is_generic_with<S: Scalar>(
    m: &Model<S>,
    opts: &ForwardOptions<S>,
) -> Result<GenericityReport<S>> {
    let opts = ForwardOptions {
        time_tol: Some(S::zero()),
        ..opts.clone()
    };
    let Assembled {
        lattice,
        times,
        amplitudes,
        order,
        ..
    } = assemble(m, &opts)?;
    let t_max = opts.t_max.clone().unwrap_or_else(|| m.total_travel_time());
    let threshold = S::from_int(GENERIC_MARGIN_FACTOR) * default_time_tol(std::iter::once(&t_max));
    let vector = |i: usize| TransitCountVector::new_unchecked(lattice.get(i).to_vec());
    let mut collisions = Vec::new();
    let mut margin: Option<S> = None;
    let mut zero_amplitudes: Vec<usize> = Vec::new();
    let mut group: Vec<usize> = Vec::new();
    let flush_group = |group: &mut Vec<usize>, zeros: &mut Vec<usize>| {
        if group.len() > 1 {
            let (sum, magnitude) = group.iter().fold((S::zero(), S::zero()), |(s, g), &i| {
                (s + amplitudes[i].clone(), g + amplitudes[i].abs())
            });
            if S::cancels(&sum, &magnitude) {
                zeros.extend(group.iter().copied());
            }
        }
        group.clear();
    };
    for (pos, &i) in order.iter().enumerate() {
        if amplitudes[i].is_zero() {
            zero_amplitudes.push(i);
        }
        if pos > 0 {
            let prev = order[pos - 1];
            let gap = times[i].clone() - times[prev].clone();
            if gap <= threshold {
                collisions.push((vector(prev), vector(i)));
            } else {
                flush_group(&mut group, &mut zero_amplitudes);
            }
            if margin.as_ref().is_none_or(|g| gap < *g) {
                margin = Some(gap);
            }
        }
        group.push(i);
    }
    flush_group(&mut group, &mut zero_amplitudes);
    zero_amplitudes.sort_unstable();
    zero_amplitudes.dedup();
    Ok(GenericityReport {
        time_injective: collisions.is_empty(),
        collisions,
        zero_amplitudes: zero_amplitudes.into_iter().map(vector).collect(),
        margin,
    })
}

/// A constant-travel-time model and its one-layer extension that produce the
/// same impulse response.
///
/// The extra reflectivity is chosen so that every arrival at the extension's
/// total travel time cancels.
pub fn ill_posed_pair<S: Scalar>(
    tau_const: &S,
    m: usize,
    refl: &[S],
) -> Result<(Model<S>, Model<S>)> {
    if refl.len() != m + 1 {
        return Err(Error::LengthMismatch {
            tau: m + 1,
            refl: refl.len(),
        });
    }
    let short = validate_model(vec![tau_const.clone(); m + 1], refl.to_vec())?;
    let tau_ext = vec![tau_const.clone(); m + 2];
    let mut refl_ext = refl.to_vec();
    refl_ext.push(S::zero());
    let total = S::from_int(m as i64 + 2) * tau_const.clone();
    let ones = vec![1u32; m + 2];
    let mut sum = S::zero();
    let lattice = enumerate_lattice_set_with(&tau_ext, &total, DEFAULT_MAX_TERMS)?;
    for k in lattice.iter() {
        if k != ones.as_slice() && arrival_time(k, &tau_ext) == total {
            sum = sum + amplitude_eval(&refl_ext, k)?;
        }
    }
    let transmission = refl
        .iter()
        .fold(S::one(), |acc, r| acc * (S::one() - r.clone() * r.clone()));
    let induced = -sum / transmission;
    if induced.is_zero() || induced.abs() >= S::one() {
        return Err(Error::InducedReflectivity {
            value: crate::scalar::short(&induced),
        });
    }
    refl_ext[m + 1] = induced;
    let long = validate_model(tau_ext, refl_ext)?;
    Ok((short, long))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn q(p: i64, d: i64) -> Rational {
        Rational::from_ratio(p, d)
    }

    fn model(tau: &[f64], refl: &[f64]) -> Model<f64> {
        Model::new(tau.to_vec(), refl.to_vec()).unwrap()
    }

    #[test]
    fn one_layer_response() {
        let (d, map) = forward(&model(&[1.0, 0.5], &[0.5, 0.7]), None).unwrap();
        assert_eq!(d.sigma(), &[1.0, 1.5]);
        assert_eq!(d.alpha()[0], 0.5);
        assert!((d.alpha()[1] - 0.525).abs() < 1e-15);
        assert_eq!(map.psi_values(), &[1, 2]);
        let a = enumeration_matrix(&map).unwrap();
        assert_eq!(a.to_rows(), k_matrix(1));
    }

    #[test]
    fn cancelling_two_layer_response() {
        let r1 = std::f64::consts::FRAC_1_SQRT_2;
        let (d, map) = forward(&model(&[1.0, 0.5, 0.5], &[0.5, r1, 0.5]), None).unwrap();
        assert_eq!(d.sigma(), &[1.0, 1.5]);
        assert_eq!(d.alpha()[0], 0.5);
        assert!((d.alpha()[1] - 0.75 / 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(map.psi_of(&[1, 2, 0]), Some(0));
        assert_eq!(map.psi_of(&[1, 1, 1]), Some(0));
        assert!(!map.is_bijective());
        assert!(matches!(
            enumeration_matrix(&map),
            Err(Error::NonGeneric(_))
        ));
    }

    #[test]
    fn extended_window() {
        let m = model(&[1.0, 0.6], &[0.5, 0.7]);
        let (d, map) = forward(&m, Some(&2.3)).unwrap();
        assert_eq!(d.sigma(), &[1.0, 1.6, 2.2]);
        assert!((d.alpha()[1] - 0.525).abs() < 1e-15);
        assert!((d.alpha()[2] + 0.18375).abs() < 1e-15);
        let a = enumeration_matrix(&map).unwrap();
        assert_eq!(a.to_rows(), vec![vec![1, 1, 1], vec![0, 1, 2]]);
        assert_eq!(a.primary_columns().unwrap(), vec![0, 1]);
    }

    #[test]
    fn rational_response_is_exact() {
        let m = Model::new(vec![q(1, 1), q(3, 5)], vec![q(1, 2), q(7, 10)]).unwrap();
        let (d, _) = forward(&m, Some(&q(23, 10))).unwrap();
        assert_eq!(d.sigma(), &[q(1, 1), q(8, 5), q(11, 5)]);
        assert_eq!(d.alpha(), &[q(1, 2), q(21, 40), q(-147, 800)]);
    }

    #[test]
    fn empty_response_is_an_error() {
        let m = model(&[1.0, 1.0], &[0.0, 0.5]);
        assert!(matches!(forward(&m, Some(&1.5)), Err(Error::EmptyResponse)));
    }

    #[test]
    fn k_and_j_are_inverse() {
        for m in 0..=20 {
            let id = mat_mul(&k_matrix(m), &j_matrix(m));
            for (i, row) in id.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    assert_eq!(v, i64::from(i == j));
                }
            }
        }
    }

    #[test]
    fn sigma_psi_times_j_gives_tau() {
        let sigma = vec![q(1, 1), q(8, 5), q(19, 10)];
        assert_eq!(
            row_times(&sigma, &j_matrix(2)),
            vec![q(1, 1), q(3, 5), q(3, 10)]
        );
    }

    #[test]
    fn constant_tau_is_not_injective() {
        let m = model(&[1.0, 1.0, 1.0], &[0.3, 0.4, 0.5]);
        let report = is_generic(&m).unwrap();
        assert!(!report.time_injective);
        let pair = (
            TransitCountVector::new(vec![1, 1, 1]).unwrap(),
            TransitCountVector::new(vec![1, 2, 0]).unwrap(),
        );
        assert_eq!(report.collisions, vec![pair]);
        assert_eq!(report.margin, Some(0.0));
    }

    #[test]
    fn cancelling_model_reports_zero_amplitudes() {
        let r1 = std::f64::consts::FRAC_1_SQRT_2;
        let report = is_generic(&model(&[1.0, 0.5, 0.5], &[0.5, r1, 0.5])).unwrap();
        assert!(!report.time_injective);
        assert_eq!(report.zero_amplitudes.len(), 2);
        assert!(!report.is_generic());
    }

    #[test]
    fn irrational_looking_tau_is_generic() {
        let report = is_generic(&model(
            &[1.0, 0.327971, 0.152455, 1.51957],
            &[0.3, -0.2, 0.4, 0.25],
        ))
        .unwrap();
        assert!(report.is_generic(), "{report:?}");
        assert!(report.margin.unwrap() > 1e-6);
    }

    #[test]
    fn ill_posed_pair_recovers_the_textbook_example() {
        let r1 = std::f64::consts::FRAC_1_SQRT_2;
        let (short, long) = ill_posed_pair(&1.0, 1, &[0.5, r1]).unwrap();
        assert_eq!(short.tau(), &[1.0, 1.0]);
        assert!((long.refl()[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ill_posed_pair_rational() {
        let (short, long) = ill_posed_pair(&q(1, 1), 1, &[q(3, 10), q(2, 5)]).unwrap();
        assert_eq!(long.refl()[2], q(4, 70));
        let (a, _) = forward(&short, None).unwrap();
        let (b, _) = forward(&long, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ill_posed_pair_rejects_zero_induced_value() {
        assert!(matches!(
            ill_posed_pair(&q(1, 1), 1, &[q(0, 1), q(1, 2)]),
            Err(Error::InducedReflectivity { .. })
        ));
    }
}
