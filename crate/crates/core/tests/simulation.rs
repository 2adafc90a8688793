//! Generated panels behave as their scenarios say.

use interdid::inference::{bootstrap_ci, parametric_ci_panel, rng_stream};
use interdid::simulation::{
    arm, gen_covariates, gen_exposures, gen_outcomes, run_scenario, simulate, GridConfig,
    OutcomeNoise, SimulationScenario,
};
use interdid::{
    fit_nuisances, make_comparison, BootstrapSpec, Estimand, ExposureStatus, Method, NuisanceSpec,
    PsMode, Scale, Window,
};

const COVS: [&str; 4] = ["x1", "x2", "x3", "x4"];

fn spec() -> NuisanceSpec {
    NuisanceSpec::new(PsMode::TimeInvariant, &COVS, &COVS)
}

fn annual(n_m: usize) -> Vec<Window> {
    vec![Window::new("Annual", 1..=n_m)]
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    for (k, &i) in idx.iter().enumerate() {
        r[i] = k as f64;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn fitted_propensity_tracks_true_propensity() {
    let s = SimulationScenario::preset("2a").unwrap();
    let mut rng = rng_stream(s.seed, 0);
    let draw = gen_covariates(s.n, s.n_m, &mut rng);
    let x_a = draw.standardized(s.exposure_covariates);
    let x_mu = draw.standardized(s.outcome_covariates);
    let exposures = gen_exposures(&draw, &x_a[0], &s, &mut rng);
    let (ds, _) = gen_outcomes(&s, &draw, &x_mu, &exposures, OutcomeNoise::default(), &mut rng);

    let frame = make_comparison(&arm(&ds, Estimand::Atn), Estimand::Atn).unwrap();
    let nuis = fit_nuisances(&frame, &spec()).unwrap();
    let fitted = nuis.pi_hat(&frame, 1).unwrap();
    let truth: Vec<f64> = frame
        .unit_ids
        .iter()
        .map(|id| {
            let i: usize = id.to_string()[1..].parse().unwrap();
            let b = &s.beta_n;
            let lin = b[0] + (0..4).map(|j| b[j + 1] * x_a[0][i][j]).sum::<f64>();
            1.0 / (1.0 + (-lin).exp())
        })
        .collect();
    let rho = pearson(&ranks(&fitted), &ranks(&truth));
    assert!(rho > 0.9, "rank correlation {rho}");
}

fn within_three_se(scenario: &str, estimand: Estimand, method: Method) {
    let s = SimulationScenario::preset(scenario).unwrap();
    let sim = simulate(&s, &mut rng_stream(s.seed, 0));
    let data = arm(&sim.dataset, estimand);
    let boot = BootstrapSpec {
        replicates: 100,
        seed: 3,
        ..BootstrapSpec::default()
    };
    let iv = bootstrap_ci(&data, estimand, method, &spec(), Scale::Additive, &annual(s.n_m), &boot).unwrap();
    // half-width of a 95% percentile interval is about 1.96 SE
    let w = &iv.windows[0];
    let se = (w.upper - w.lower) / (2.0 * 1.96);
    let truth = match estimand {
        Estimand::Att => sim.truth.att_true,
        Estimand::Atn => sim.truth.atn_true,
    };
    let est = iv.estimate.aggregates[0].1;
    assert!((est - truth).abs() < 3.0 * se, "{scenario} {estimand} {method}: {est} vs {truth}, se {se}");
}

#[test]
fn correctly_specified_outcome_model_recovers_att() {
    within_three_se("2a", Estimand::Att, Method::Or);
}

#[test]
fn correctly_specified_propensity_recovers_att() {
    within_three_se("2c", Estimand::Att, Method::Ipw);
}

#[test]
fn zero_effects_give_null_estimates() {
    let s = SimulationScenario::preset("2a").unwrap().without_effects();
    let sim = simulate(&s, &mut rng_stream(s.seed, 7));
    assert_eq!(sim.truth.att_true, 0.0);
    assert_eq!(sim.truth.atn_true, 0.0);
    for estimand in Estimand::ALL {
        let data = arm(&sim.dataset, estimand);
        let iv = parametric_ci_panel(&data, estimand, &spec(), &annual(s.n_m), 0.95).unwrap();
        for m in 0..s.n_m {
            let p = &iv.per_m[m];
            let se = (p.upper - p.lower) / (2.0 * 1.959964);
            assert!(p.point.abs() < 3.0 * se, "{estimand} m={}: {} (se {se})", m + 1, p.point);
        }
    }
}

#[test]
fn truths_follow_the_effect_schedule() {
    let s = SimulationScenario::preset("2b").unwrap();
    let sim = simulate(&s, &mut rng_stream(s.seed, 1));
    let mean_tau = s.tau_att_m.iter().sum::<f64>() / s.n_m as f64;
    assert_eq!(sim.truth.att_true, mean_tau);

    let d: Vec<f64> = sim.exposures.distance.iter().flatten().copied().collect();
    assert!(!d.is_empty());
    assert!(d.iter().all(|&x| (0.1..=0.9).contains(&x)));
    let share = d.iter().map(|x| 1.0 - x).sum::<f64>() / d.len() as f64;
    let expected = s.tau_atn_star_m.iter().map(|t| t * share).sum::<f64>() / s.n_m as f64;
    assert!((sim.truth.atn_true - expected).abs() < 1e-12);

    // distances exist exactly for neighbors
    for (st, dist) in sim.exposures.status.iter().zip(&sim.exposures.distance) {
        assert_eq!(*st == ExposureStatus::NEIGHBOR, dist.is_some());
    }
    assert_eq!(sim.exposures.att_arm.iter().filter(|&&a| a).count(), s.att_arm_size());
}

#[test]
fn arms_partition_the_panel() {
    let s = SimulationScenario::preset("3a").unwrap();
    let sim = simulate(&s, &mut rng_stream(s.seed, 2));
    let att = arm(&sim.dataset, Estimand::Att);
    let atn = arm(&sim.dataset, Estimand::Atn);
    assert_eq!(att.len() + atn.len(), s.n);
    assert_eq!(att.len(), s.att_arm_size());
    assert!(att.units().iter().all(|u| u.exposure != ExposureStatus::NEIGHBOR));
    assert!(atn.units().iter().all(|u| u.exposure != ExposureStatus::TREATED));
    assert_eq!(sim.dataset.stratum_counts().len(), 4);
}

#[test]
fn grid_is_reproducible() {
    let mut s = SimulationScenario::preset("2a").unwrap();
    s.n = 600;
    let config = GridConfig::new(Method::ALL.to_vec(), 6, None);
    let a = run_scenario(&s, &config).unwrap();
    let b = run_scenario(&s, &config).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 8);
    s.seed += 1;
    let c = run_scenario(&s, &config).unwrap();
    assert_ne!(a, c);
}

#[test]
fn scenarios_round_trip_through_toml() {
    for s in SimulationScenario::all_presets() {
        let back = SimulationScenario::from_toml(&s.to_toml().unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
