use std::collections::HashMap;

use mapenum::asymptotics_enum::map_series;
use mapenum::char_system::solve_characteristic;
use mapenum::maps::census;
use mapenum::sampler_limit::{
    exact_moments, limit_report, sample_records, sample_uniform, CountTables, SamplerError,
};
use mapenum::surface::Surface;
use mapenum::tree_gf::DegreeSet;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn d(x: &[u32]) -> DegreeSet {
    DegreeSet::new(x).unwrap()
}

#[test]
fn cylinder_maps_with_six_leaves_are_uniform() {
    let s = Surface::cylinder();
    let delta = d(&[3]);
    let class = census(&s, delta.degrees(), 6);
    let index: HashMap<_, usize> = class.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
    let tables = CountTables::build(&s, &delta, 6).unwrap();
    assert_eq!(tables.total(), &num_bigint::BigInt::from(class.len()));
    let draws = 100_000u64;
    let mut hits = vec![0u64; class.len()];
    for i in 0..draws {
        let m = sample_uniform(&tables, 2024, i).assemble().canonical();
        hits[index[&m]] += 1;
    }
    let expected = draws as f64 / class.len() as f64;
    let stat: f64 = hits.iter().map(|&h| (h as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new((class.len() - 1) as f64).unwrap().cdf(stat);
    assert!(p > 1e-3, "chi-square {stat} over {} classes, p = {p}", class.len());
    let sigma = expected.sqrt();
    assert!(hits.iter().all(|&h| (h as f64 - expected).abs() < 5.0 * sigma));
}

#[test]
fn every_sample_has_n_leaves_on_the_right_surface() {
    for (s, delta, n) in [
        (Surface::cylinder(), d(&[3]), 301),
        (Surface::moebius(), d(&[4]), 200),
        (Surface::orientable(1, 1), d(&[3, 4]), 151),
        (Surface::orientable(0, 3), d(&[3]), 120),
        (Surface::non_orientable(1, 2), d(&[3, 5]), 97),
    ] {
        let t = CountTables::build(&s, &delta, n).unwrap();
        for i in 0..30 {
            let x = sample_uniform(&t, 5, i);
            assert_eq!(x.leaf_count(), n);
            let m = x.assemble();
            assert_eq!(m.surface(), Some(s));
            let degrees = m.degrees();
            assert_eq!(degrees.iter().filter(|&&g| g == 1).count(), n);
            assert!(degrees.iter().all(|&g| g == 1 || delta.contains(g)));
            assert!(m.face_orbits().len() / 2 == s.boundaries as usize);
        }
    }
}

#[test]
fn inadmissible_sizes_are_empty() {
    let err = CountTables::build(&Surface::orientable(1, 1), &d(&[4]), 7).unwrap_err();
    assert!(matches!(err, SamplerError::EmptyClass { .. }));
    let a = map_series(&Surface::cylinder(), &d(&[3]), 4).unwrap();
    assert_eq!(CountTables::build(&Surface::cylinder(), &d(&[3]), 4).unwrap().total(), &a.coeff(4));
}

#[test]
fn records_do_not_depend_on_thread_count() {
    let t = CountTables::build(&Surface::orientable(1, 1), &d(&[3]), 200).unwrap();
    let one = sample_records(&t, 99, 40, 1, true);
    let three = sample_records(&t, 99, 40, 3, true);
    assert_eq!(one, three);
    assert_eq!(sample_uniform(&t, 99, 17), sample_uniform(&t, 99, 17));
    assert_ne!(sample_uniform(&t, 99, 17), sample_uniform(&t, 100, 17));
}

#[test]
fn balanced_samples_are_dissections() {
    for (s, delta, n) in [(Surface::cylinder(), d(&[3]), 400), (Surface::orientable(1, 1), d(&[3, 4]), 300)] {
        let t = CountTables::build(&s, &delta, n).unwrap();
        let records = sample_records(&t, 3, 2_000, 2, true);
        assert!(records.iter().any(|r| r.all_balanced));
        for r in &records {
            if r.all_balanced {
                assert_eq!(r.is_dissection, Some(true), "sample {}", r.index);
            }
        }
    }
}

#[test]
fn mean_structuring_edges_scale_with_root_n() {
    let delta = d(&[3]);
    let s = Surface::cylinder();
    let small = CountTables::build(&s, &delta, 400).unwrap();
    let large = CountTables::build(&s, &delta, 800).unwrap();
    let exact = exact_moments(&large, 1)[1] / exact_moments(&small, 1)[1];
    assert!((exact / 2f64.sqrt() - 1.0).abs() < 0.02, "{exact}");
    let c = solve_characteristic(&delta, 1e-13).unwrap();
    let mean = |t: &CountTables| {
        let r = limit_report(t, &sample_records(t, 11, 4_000, 2, false), 1, 11, &c);
        let m = &r.moments[1];
        (m.empirical * (t.n as f64).sqrt(), m.standard_error * (t.n as f64).sqrt())
    };
    let ((m1, e1), (m2, e2)) = (mean(&small), mean(&large));
    let ratio = m2 / m1;
    let err = ratio * ((e1 / m1).powi(2) + (e2 / m2).powi(2)).sqrt();
    assert!((ratio - 2f64.sqrt()).abs() < 4.0 * err, "{ratio} ± {err}");
}

#[test]
fn empirical_moments_track_exact_finite_n_moments() {
    let delta = d(&[3]);
    let t = CountTables::build(&Surface::orientable(1, 1), &delta, 300).unwrap();
    let c = solve_characteristic(&delta, 1e-13).unwrap();
    let report = limit_report(&t, &sample_records(&t, 8, 5_000, 2, false), 3, 8, &c);
    let exact = exact_moments(&t, 3);
    for m in &report.moments[1..] {
        let want = exact[m.order as usize] / 300f64.powf(m.order as f64 / 2.0);
        assert!((m.empirical - want).abs() < 5.0 * m.standard_error, "r={}: {} vs {want}", m.order, m.empirical);
    }
}
