//! Resampling, interval construction and influence-function variance.

mod common;

use std::collections::BTreeMap;

use common::{random_panel, regional_fixture, unit};
use interdid::inference::{
    bayesian_weights, bootstrap, bootstrap_ci, bootstrap_replicate, influence_values, percentile,
    rng_stream, stratified_resample, IntervalEstimate,
};
use interdid::{
    estimate_panel, fit_nuisances, make_comparison, parametric_ci_panel, preset_windows,
    BootstrapFlavor, BootstrapSpec, Estimand, ExposureStatus, Method, NuisanceSpec, PanelDataset,
    PsMode, Scale, UnitId, UnitRecord, WindowPreset,
};

fn spec() -> NuisanceSpec {
    NuisanceSpec::new(PsMode::TimeInvariant, &["size", "urban"], &["size", "urban"])
}

fn sized_panel(sizes: &[(&str, ExposureStatus, usize)]) -> PanelDataset<f64> {
    let mut units: Vec<UnitRecord<f64>> = Vec::new();
    for (s, status, k) in sizes {
        for i in 0..*k {
            let x = i as f64;
            units.push(unit(&format!("{s}{i}"), s, *status, vec![x], vec![x], vec![x + 1.0], Vec::new()));
        }
    }
    PanelDataset::new(units, 1, vec!["x".into()], None, Vec::new()).unwrap()
}

#[test]
fn stratified_resample_keeps_every_stratum_size() {
    let ds = sized_panel(&[
        ("a", ExposureStatus::TREATED, 40),
        ("b", ExposureStatus::CONTROL, 15),
        ("c", ExposureStatus::NEIGHBOR, 19),
        ("d", ExposureStatus::CONTROL, 51),
    ]);
    let expected: BTreeMap<String, usize> =
        [("a", 40), ("b", 15), ("c", 19), ("d", 51)].iter().map(|(s, k)| (s.to_string(), *k)).collect();
    for b in 0..1000 {
        let r = stratified_resample(&ds, &mut rng_stream(17, b));
        assert_eq!(r.stratum_counts(), expected, "replicate {b}");
        assert!(r.units().iter().all(|u| u.id.to_string().starts_with(&*u.stratum)));
    }
}

#[test]
fn singleton_stratum_is_drawn_exactly_once() {
    let ds = sized_panel(&[("solo", ExposureStatus::TREATED, 1), ("rest", ExposureStatus::CONTROL, 9)]);
    for b in 0..50 {
        let r = stratified_resample(&ds, &mut rng_stream(2, b));
        let solo: Vec<_> = r.units().iter().filter(|u| &*u.stratum == "solo").collect();
        assert_eq!(solo.len(), 1);
        assert_eq!(solo[0].outcomes, ds.units()[0].outcomes);
    }
}

#[test]
fn bayesian_weights_have_unit_mean() {
    let w: Vec<f64> = bayesian_weights(500, &mut rng_stream(4, 0));
    assert!((w.iter().sum::<f64>() / 500.0 - 1.0).abs() < 1e-12);
    assert!(w.iter().all(|&x| x > 0.0));
}

fn dr_annual(ds: &PanelDataset<f64>) -> f64 {
    let windows = preset_windows(WindowPreset::Annual, ds.n_m()).unwrap();
    estimate_panel(ds, Estimand::Att, Method::Dr, &spec(), Scale::Additive, &windows)
        .unwrap()
        .aggregates[0]
        .1
}

#[test]
fn unit_weights_reproduce_the_unweighted_estimate() {
    let (ds, _) = regional_fixture(8);
    let ones = ds.with_weights(&vec![1.0; ds.len()]).unwrap();
    assert!((dr_annual(&ones) - dr_annual(&ds)).abs() < 1e-12);
}

#[test]
fn integer_weights_act_as_duplicated_units() {
    let (ds, _) = regional_fixture(9);
    let mut weights = vec![1.0; ds.len()];
    let mut units = ds.units().to_vec();
    for (k, i) in [3usize, 10, 200, 250, 400].into_iter().enumerate() {
        weights[i] = 2.0;
        let mut copy = ds.units()[i].clone();
        copy.id = UnitId::new(format!("dup{k}"));
        units.push(copy);
    }
    let weighted = ds.with_weights(&weights).unwrap();
    let duplicated =
        PanelDataset::new(units, 13, vec!["size".into(), "urban".into()], None, vec!["zone".into()]).unwrap();
    assert!((dr_annual(&weighted) - dr_annual(&duplicated)).abs() < 1e-10);
}

#[test]
fn replicates_depend_only_on_seed_and_index() {
    let ds = random_panel(5, 10, 2, 2);
    for flavor in [BootstrapFlavor::Stratified, BootstrapFlavor::Bayesian] {
        let spec = BootstrapSpec { seed: 11, flavor, ..BootstrapSpec::default() };
        assert_eq!(bootstrap_replicate(&ds, &spec, 7), bootstrap_replicate(&ds, &spec, 7));
        assert_ne!(bootstrap_replicate(&ds, &spec, 7), bootstrap_replicate(&ds, &spec, 8));
    }
}

fn draws_with_threads(threads: usize) -> Vec<Vec<f64>> {
    let (ds, _) = regional_fixture(3);
    let windows = preset_windows(WindowPreset::Seasonal, 13).unwrap();
    let boot = BootstrapSpec { replicates: 40, seed: 99, ..BootstrapSpec::default() };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        bootstrap(&ds, &boot, |d| {
            Ok(estimate_panel(d, Estimand::Att, Method::Dr, &spec(), Scale::Additive, &windows)?.flatten())
        })
        .unwrap()
        .values
    })
}

#[test]
fn bootstrap_is_bit_identical_across_thread_counts() {
    let one = draws_with_threads(1);
    for t in [2, 4, 7] {
        let many = draws_with_threads(t);
        assert_eq!(one.len(), many.len());
        for (a, b) in one.iter().zip(&many) {
            let bits = |v: &Vec<f64>| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b), "{t} threads");
        }
    }
}

#[test]
fn influence_values_average_to_zero() {
    for seed in 0..10 {
        let (ds, _) = regional_fixture(seed);
        for estimand in Estimand::ALL {
            let frame = make_comparison(&ds, estimand).unwrap();
            let nuis = fit_nuisances(&frame, &spec()).unwrap();
            for m in [1, 7, 13] {
                let (_, psi) = influence_values(&frame, &nuis, m).unwrap();
                let mean = psi.iter().sum::<f64>() / psi.len() as f64;
                assert!(mean.abs() < 1e-8, "seed {seed} {estimand} m={m}: {mean}");
            }
        }
    }
}

#[test]
fn parametric_interval_is_narrower_than_stratified_bootstrap() {
    let (ds, _) = regional_fixture(21);
    let windows = preset_windows(WindowPreset::Annual, 13).unwrap();
    let boot = BootstrapSpec { replicates: 300, seed: 5, ..BootstrapSpec::default() };
    for estimand in Estimand::ALL {
        let par = parametric_ci_panel(&ds, estimand, &spec(), &windows, 0.95).unwrap();
        let bs = bootstrap_ci(&ds, estimand, Method::Dr, &spec(), Scale::Additive, &windows, &boot).unwrap();
        let width = |iv: &IntervalEstimate<f64>| iv.upper - iv.lower;
        assert!(
            width(&par.windows[0]) < width(&bs.windows[0]),
            "{estimand}: parametric {} vs bootstrap {}",
            width(&par.windows[0]),
            width(&bs.windows[0])
        );
        assert!((par.estimate.aggregates[0].1 - bs.estimate.aggregates[0].1).abs() < 1e-12);
    }
}

#[test]
fn constant_draws_give_a_degenerate_interval() {
    let iv = IntervalEstimate::from_draws(2.5, &[2.5; 40], 0.95);
    assert_eq!((iv.lower, iv.upper), (2.5, 2.5));
    assert!(iv.contains(2.5));
}

#[test]
fn percentile_interpolates_between_order_statistics() {
    // type-7 sample quantiles of 1..=10
    let v: Vec<f64> = (1..=10).rev().map(f64::from).collect();
    assert!((percentile(&v, 0.025) - 1.225).abs() < 1e-12);
    assert!((percentile(&v, 0.975) - 9.775).abs() < 1e-12);
    assert_eq!(percentile(&v, 0.5), 5.5);
}
