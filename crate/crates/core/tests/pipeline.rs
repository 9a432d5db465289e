use layerwave::inverse::default_cluster_tol;
use layerwave::io::{data_from_json, data_to_json, model_from_json, model_to_json, report_to_json};
use layerwave::perturb::DEFAULT_OMEGA;
use layerwave::*;
use num_traits::Signed;
use proptest::prelude::*;

fn q(p: i64, d: i64) -> Rational {
    Rational::from_ratio(p, d)
}

fn small_generic(layers: usize, seed: u64) -> Model<Rational> {
    gen_random_generic(
        layers,
        seed,
        &GenOptions {
            max_terms: 1500,
            ..Default::default()
        },
    )
    .unwrap()
}

#[test]
fn forward_matches_oracle_on_hand_model() {
    let m = Model::new(
        vec![q(1, 1), q(2, 3), q(3, 7)],
        vec![q(1, 2), q(-1, 3), q(2, 5)],
    )
    .unwrap();
    let t = m.total_travel_time();
    let (data, _) = forward(&m, None).unwrap();
    assert_eq!(data, oracle_response(&m, &t).unwrap());
}

#[test]
fn forward_respects_shorter_window() {
    let m = small_generic(3, 4);
    let (full, _) = forward(&m, None).unwrap();
    let t = full.sigma()[full.len() / 2].clone();
    let (part, _) = forward(&m, Some(&t)).unwrap();
    assert_eq!(part.len(), full.len() / 2 + 1);
    assert!(part.terms().zip(full.terms()).all(|(a, b)| a == b));
}

#[test]
fn stage_one_ignores_amplitudes() {
    let m = small_generic(4, 1);
    let (data, _) = forward(&m, None).unwrap();
    let flipped = Data::new(
        data.sigma().to_vec(),
        data.alpha().iter().map(|a| -a.clone() * q(3, 2)).collect(),
    )
    .unwrap();
    let a = invert_arrival_times(data.sigma(), &InverseOptions::default()).unwrap();
    let b = invert_arrival_times(flipped.sigma(), &InverseOptions::default()).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.tau, m.tau());
}

#[test]
fn matched_lattice_points_reproduce_times() {
    let m = small_generic(5, 2);
    let (data, em) = forward(&m, None).unwrap();
    let report = invert(&data, &InverseOptions::default()).unwrap();
    assert_eq!(report.matched.len(), data.len());
    for (j, k) in &report.matched {
        assert_eq!(em.psi_of(k).unwrap(), j + 1);
    }
}

/// Every primary below the second has a multiple reaching its interface
/// before the end of the record.
fn corroborated(m: &Model<Rational>) -> bool {
    let tau = m.tau();
    (2..m.layers()).all(|n| {
        let shortest = tau[1..=n].iter().min().unwrap();
        let rest: Rational = tau[n + 1..].iter().cloned().sum();
        *shortest <= rest
    })
}

#[test]
fn robust_mode_is_inert_on_corroborated_clean_data() {
    let mut checked = 0;
    for seed in 0..40 {
        let m = small_generic(4, seed);
        if !corroborated(&m) {
            continue;
        }
        checked += 1;
        let (data, _) = forward(&m, None).unwrap();
        let report = invert(&data, &InverseOptions::robust()).unwrap();
        assert!(report.rejected_arrivals.is_empty());
        assert_eq!(report.model, m);
    }
    assert!(checked >= 5);
}

#[test]
fn robust_mode_rejects_an_uncorroborated_primary() {
    // No multiple reaching interface 2 arrives before k^3, so k^2 looks spurious.
    let m = Model::new(
        vec![q(1, 1), q(3, 1), q(5, 2), q(1, 4)],
        vec![q(1, 2), q(1, 3), q(1, 4), q(1, 5)],
    )
    .unwrap();
    let (data, _) = forward(&m, None).unwrap();
    assert_eq!(invert(&data, &InverseOptions::default()).unwrap().model, m);
    let report = invert(&data, &InverseOptions::robust()).unwrap();
    assert_eq!(report.rejected_arrivals.len(), 1);
    assert_ne!(report.model, m);
}

#[test]
fn single_spurious_arrival_is_rejected() {
    let m = small_generic(5, 3);
    let (data, _) = forward(&m, None).unwrap();
    let t =
        data.sigma()[3].clone() + (data.sigma()[4].clone() - data.sigma()[3].clone()) * q(7, 19);
    let noisy = add_spurious(&data, &[(t.clone(), q(1, 10))], &q(1, 1_000_000)).unwrap();
    let report = invert(&noisy, &InverseOptions::robust()).unwrap();
    assert_eq!(report.model, m);
    assert_eq!(report.rejected_arrivals, vec![(t, q(1, 10))]);
}

#[test]
fn correction_is_identity_on_clean_data() {
    let m = small_generic(7, 5);
    let (data, _) = forward(&m, None).unwrap();
    let report = invert(&data, &InverseOptions::default()).unwrap();
    let (refl, sets) = correct_reflectivity(&report, &data, &Rational::from_int(0)).unwrap();
    assert_eq!(refl, m.refl());
    for set in &sets.sets {
        let expected = m.refl()[set.n - 1].clone() * m.refl()[set.n].clone();
        assert!(set.ratios.iter().all(|r| *r == expected));
    }
}

#[test]
fn corrected_pipeline_survives_out_of_range_primary_recursion() {
    // Plain inversion of this distorted response produces |R| > 1.
    let m = gen_random_generic(
        11,
        3,
        &GenOptions {
            max_terms: 20_000,
            ..Default::default()
        },
    )
    .unwrap();
    let (data, _) = forward(&m, None).unwrap();
    let end: f64 = m.tau()[..=8].iter().map(Scalar::to_f64).sum::<f64>() - 1e-3;
    let start = (data.sigma()[0].to_f64() + data.sigma()[1].to_f64()) / 2.0;
    let distorted = sine_distort(&data, 0.2, (start, end), DEFAULT_OMEGA, 0.0).unwrap();
    let err = invert(&distorted, &InverseOptions::default()).unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Algorithm);
    let (model, _) = invert_corrected(
        &distorted,
        &InverseOptions::default(),
        &default_cluster_tol(),
    )
    .unwrap();
    assert_eq!(model, m);
}

#[test]
fn json_round_trips() {
    let m = small_generic(3, 9);
    let (data, _) = forward(&m, None).unwrap();
    assert_eq!(model_from_json::<Rational>(&model_to_json(&m)).unwrap(), m);
    assert_eq!(
        data_from_json::<Rational>(&data_to_json(&data)).unwrap(),
        data
    );
    let report = invert(&data, &InverseOptions::default()).unwrap();
    let v = report_to_json(&report);
    assert_eq!(model_from_json::<Rational>(&v["model"]).unwrap(), m);
    assert_eq!(v["primary_indices"].as_array().unwrap().len(), 4);
}

#[test]
fn non_generic_model_is_reported() {
    // Equal travel times make k = (1,2,0) and (1,1,1) arrive together.
    let m = Model::new(vec![q(1, 1); 3], vec![q(1, 2), q(1, 3), q(1, 4)]).unwrap();
    let report = is_generic(&m).unwrap();
    assert!(!report.time_injective);
    assert!(!report.is_generic());
    let (_, em) = forward(&m, None).unwrap();
    assert_eq!(
        enumeration_matrix(&em).unwrap_err().kind(),
        ErrorKind::Algorithm
    );
}

#[test]
fn physical_profile_feeds_forward() {
    let profile = PhysicalProfile {
        depths: vec![0.0, 1.0, 2.5, 4.0],
        densities: vec![1.0, 2.0, 1.5, 3.0],
        moduli: vec![1.0, 8.0, 6.0, 27.0],
    };
    let m = from_physical(&profile).unwrap();
    let (data, _) = forward(&m, None).unwrap();
    let back = invert(&data, &InverseOptions::default()).unwrap();
    for (a, b) in back.model.refl().iter().zip(m.refl()) {
        assert!((a - b).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rational_round_trip(layers in 1usize..6, seed in 0u64..10_000) {
        let m = small_generic(layers, seed);
        let (data, _) = forward(&m, None).unwrap();
        prop_assert_eq!(invert(&data, &InverseOptions::default()).unwrap().model, m);
    }

    #[test]
    fn float_round_trip(layers in 1usize..6, seed in 0u64..10_000) {
        let m = small_generic(layers, seed).convert::<f64>();
        let (data, _) = forward(&m, None).unwrap();
        let back = invert(&data, &InverseOptions::default()).unwrap().model;
        for (a, b) in back.tau().iter().zip(m.tau()) {
            prop_assert!((a - b).abs() <= 1e-9 * b);
        }
        for (a, b) in back.refl().iter().zip(m.refl()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn oracle_agrees(layers in 1usize..4, seed in 0u64..10_000) {
        let m = gen_random_generic(layers, seed, &GenOptions { max_terms: 300, ..Default::default() }).unwrap();
        let t = m.total_travel_time();
        let (data, _) = forward(&m, None).unwrap();
        prop_assert_eq!(data, oracle_response(&m, &t).unwrap());
    }

    #[test]
    fn shift_covariance(seed in 0u64..10_000, kappa in 1i64..500) {
        let m = small_generic(3, seed);
        let (data, _) = forward(&m, None).unwrap();
        let kappa = q(kappa, 100);
        let back = invert(&shift_times(&data, &kappa).unwrap(), &InverseOptions::default()).unwrap().model;
        prop_assert_eq!(&back.tau()[0], &(m.tau()[0].clone() + kappa));
        prop_assert_eq!(&back.tau()[1..], &m.tau()[1..]);
        prop_assert_eq!(back.refl(), m.refl());
    }

    #[test]
    fn decimated_data_stays_normal(seed in 0u64..10_000, thr in 1i64..200) {
        let m = small_generic(4, seed);
        let (data, _) = forward(&m, None).unwrap();
        if let Ok(d) = decimate(&data, &q(thr, 1000)) {
            prop_assert!(d.sigma().windows(2).all(|w| w[0] < w[1]));
            prop_assert!(d.alpha().iter().all(|a| a.abs() >= q(thr, 1000)));
        }
    }
}
