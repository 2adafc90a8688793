#![allow(dead_code)]

use interdid::inference::rng_stream;
use interdid::{ComparisonFrame, Estimand, ExposureStatus, PanelDataset, UnitId, UnitRecord};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

/// Random frame with `p` covariates, at least `min_group` units per group,
/// exposure depending on the covariates and a covariate-driven trend.
pub fn random_frame(seed: u64, n: usize, n_m: usize, p: usize, min_group: usize) -> ComparisonFrame<f64> {
    let mut rng = rng_stream(seed, 0);
    loop {
        let mut exposed = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        let mut post = Vec::with_capacity(n);
        let mut covs = Vec::with_capacity(n);
        for _ in 0..n {
            let x: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
            let lin: f64 = x.iter().sum::<f64>() * 0.3;
            let r = rng.gen::<f64>() < 1.0 / (1.0 + (-lin).exp());
            let base: f64 = rng.sample::<f64, _>(StandardNormal) + 5.0;
            let y0: Vec<f64> = (0..n_m)
                .map(|m| base + 0.3 * m as f64 + rng.sample::<f64, _>(StandardNormal))
                .collect();
            let y1: Vec<f64> = (0..n_m)
                .map(|m| {
                    y0[m] + 1.0 + lin + if r { 2.0 } else { 0.0 } + rng.sample::<f64, _>(StandardNormal)
                })
                .collect();
            exposed.push(r);
            pre.push(y0);
            post.push(y1);
            covs.push(x);
        }
        let k = exposed.iter().filter(|&&r| r).count();
        if k >= min_group && n - k >= min_group {
            return ComparisonFrame::from_outcomes(Estimand::Att, exposed, pre, post, covs, names(p))
                .expect("well-formed frame");
        }
    }
}

pub fn unit(
    id: &str,
    stratum: &str,
    exposure: ExposureStatus,
    covariates: Vec<f64>,
    pre: Vec<f64>,
    post: Vec<f64>,
    labels: Vec<String>,
) -> UnitRecord<f64> {
    UnitRecord {
        id: UnitId::new(id),
        stratum: stratum.into(),
        exposure,
        covariates,
        varying: Vec::new(),
        outcomes: [pre, post],
        labels,
        weight: 1.0,
    }
}

/// Small random panel with all three exposure groups.
pub fn random_panel(seed: u64, per_group: usize, n_m: usize, p: usize) -> PanelDataset<f64> {
    let mut rng = rng_stream(seed, 1);
    let mut units = Vec::new();
    let groups = [
        ("treated", ExposureStatus::TREATED, 2.0),
        ("neighbor", ExposureStatus::NEIGHBOR, 1.0),
        ("control", ExposureStatus::CONTROL, 0.0),
    ];
    for (g, status, effect) in groups {
        for i in 0..per_group {
            let x: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
            let base = 10.0 + x.iter().sum::<f64>();
            let pre: Vec<f64> = (0..n_m)
                .map(|m| base + m as f64 * 0.1 + rng.sample::<f64, _>(StandardNormal))
                .collect();
            let post: Vec<f64> = pre
                .iter()
                .map(|y| y + 0.5 + 0.3 * x[0] + effect + 0.5 * rng.sample::<f64, _>(StandardNormal))
                .collect();
            units.push(unit(&format!("{g}{i}"), g, status, x, pre, post, Vec::new()));
        }
    }
    PanelDataset::new(units, n_m, names(p), None, Vec::new()).expect("valid panel")
}

/// Panel shaped like a four-region study: 180 treated, 60 + 267 controls
/// (138 of the latter flagged for exclusion), 51 neighbors, n_m = 13,
/// with a `zone` label on every unit.
pub fn regional_fixture(seed: u64) -> (PanelDataset<f64>, Vec<bool>) {
    let mut rng = rng_stream(seed, 2);
    let regions = [
        ("Philadelphia", ExposureStatus::TREATED, 180, -3.0, 20),
        ("Baltimore", ExposureStatus::CONTROL, 60, 0.0, 6),
        ("Border", ExposureStatus::NEIGHBOR, 51, 1.0, 10),
        ("NonBorder", ExposureStatus::CONTROL, 267, 0.0, 25),
    ];
    let n_m = 13;
    let mut units = Vec::new();
    let mut excluded = Vec::new();
    for (region, status, count, effect, zones) in regions {
        for i in 0..count {
            let size: f64 = rng.gen_range(0.5..2.0);
            let urban: f64 = rng.gen_range(0.0..1.0);
            let base = 40.0 + 10.0 * size + 5.0 * urban;
            let pre: Vec<f64> = (0..n_m)
                .map(|m| base + 3.0 * ((m as f64) / 2.0).sin() + rng.sample::<f64, _>(StandardNormal))
                .collect();
            let post: Vec<f64> = pre
                .iter()
                .map(|y| y - 1.0 + 0.5 * urban + effect + rng.sample::<f64, _>(StandardNormal))
                .collect();
            let zone = format!("{}{}", &region[..1], i % zones);
            units.push(unit(
                &format!("{region}-{i}"),
                region,
                status,
                vec![size, urban],
                pre,
                post,
                vec![zone],
            ));
            excluded.push(region == "NonBorder" && i < 138);
        }
    }
    let ds = PanelDataset::new(units, n_m, vec!["size".into(), "urban".into()], None, vec!["zone".into()])
        .expect("valid panel");
    (ds, excluded)
}

/// Mean of `f` over the units of `frame` where `pick` holds.
pub fn group_mean(frame: &ComparisonFrame<f64>, pick: impl Fn(usize) -> bool, f: impl Fn(usize) -> f64) -> f64 {
    let idx: Vec<usize> = (0..frame.len()).filter(|&i| pick(i)).collect();
    idx.iter().map(|&i| f(i)).sum::<f64>() / idx.len() as f64
}
