//! Monte Carlo grid over scenarios, estimands and methods.

use std::io::Write;

use rayon::prelude::*;

use super::dgp::{arm, simulate};
use super::scenario::SimulationScenario;
use crate::error::{Error, Result};
use crate::estimators::{estimate_methods, Method, Window};
use crate::inference::{
    bootstrap, check_failures, percentile, rng_stream, BootstrapSpec,
};
use crate::nuisance::{NuisanceSpec, PsMode};
use crate::panel::{make_comparison, Estimand, PanelDataset};

use super::dgp::COVARIATE_NAMES;

/// How the grid estimates and covers each cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub methods: Vec<Method>,
    pub replicates: usize,
    /// Bootstrap settings for intervals; `None` skips coverage.
    pub ci: Option<BootstrapSpec>,
    pub nuisance: NuisanceSpec,
}

impl GridConfig {
    /// All four covariates in both nuisance models, time-invariant propensity.
    pub fn new(methods: Vec<Method>, replicates: usize, ci: Option<BootstrapSpec>) -> Self {
        GridConfig {
            methods,
            replicates,
            ci,
            nuisance: NuisanceSpec::new(PsMode::TimeInvariant, &COVARIATE_NAMES, &COVARIATE_NAMES),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub scenario: String,
    pub estimand: Estimand,
    pub method: Method,
    pub bias_pct: f64,
    pub std_err: f64,
    /// `None` when intervals were not requested.
    pub coverage_pct: Option<f64>,
    pub n_failed: usize,
}

/// One replicate's annual estimates for one estimand.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub truth: f64,
    pub estimates: Vec<f64>,
    /// Per-method (lower, upper), when intervals were requested.
    pub intervals: Option<Vec<(f64, f64)>>,
}

fn annual_estimates(
    dataset: &PanelDataset<f64>,
    estimand: Estimand,
    config: &GridConfig,
    windows: &[Window],
) -> Result<Vec<f64>> {
    let frame = make_comparison(dataset, estimand)?;
    Ok(estimate_methods(&frame, &config.nuisance, &config.methods, windows)?
        .iter()
        .map(|e| e.aggregates[0].1)
        .collect())
}

/// Simulates replicate `r` of a scenario and estimates both estimands.
pub fn run_replicate(
    scenario: &SimulationScenario,
    config: &GridConfig,
    r: usize,
) -> [Result<ReplicateOutcome>; 2] {
    let mut rng = rng_stream(scenario.seed, r as u64);
    let sim = simulate(scenario, &mut rng);
    let windows = [Window::new("Annual", 1..=scenario.n_m)];
    Estimand::ALL.map(|estimand| {
        let data = arm(&sim.dataset, estimand);
        let truth = match estimand {
            Estimand::Att => sim.truth.att_true,
            Estimand::Atn => sim.truth.atn_true,
        };
        let estimates = annual_estimates(&data, estimand, config, &windows)?;
        let intervals = match &config.ci {
            None => None,
            Some(spec) => {
                // a distinct bootstrap stream per replicate and estimand
                let boot = BootstrapSpec {
                    seed: spec
                        .seed
                        .wrapping_add((r as u64) << 1 | (estimand == Estimand::Atn) as u64),
                    ..*spec
                };
                let draws = bootstrap(&data, &boot, |d| annual_estimates(d, estimand, config, &windows))?;
                let alpha = (1.0 - boot.level) / 2.0;
                Some(
                    (0..config.methods.len())
                        .map(|k| {
                            let col = draws.column(k);
                            (percentile(&col, alpha), percentile(&col, 1.0 - alpha))
                        })
                        .collect(),
                )
            }
        };
        Ok(ReplicateOutcome {
            truth,
            estimates,
            intervals,
        })
    })
}

fn summarize(
    scenario: &str,
    estimand: Estimand,
    methods: &[Method],
    outcomes: &[&ReplicateOutcome],
    n_failed: usize,
) -> Vec<MetricsRow> {
    methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let n = outcomes.len() as f64;
            let bias_pct = 100.0
                * outcomes
                    .iter()
                    .map(|o| (o.estimates[k] - o.truth) / o.truth.abs())
                    .sum::<f64>()
                / n;
            let mean = outcomes.iter().map(|o| o.estimates[k]).sum::<f64>() / n;
            let std_err = (outcomes
                .iter()
                .map(|o| (o.estimates[k] - mean).powi(2))
                .sum::<f64>()
                / (n - 1.0))
                .sqrt();
            let coverage_pct = outcomes
                .iter()
                .map(|o| {
                    o.intervals
                        .as_ref()
                        .map(|iv| (iv[k].0 <= o.truth && o.truth <= iv[k].1) as u8 as f64)
                })
                .sum::<Option<f64>>()
                .map(|c| 100.0 * c / n);
            MetricsRow {
                scenario: scenario.to_string(),
                estimand,
                method,
                bias_pct,
                std_err,
                coverage_pct,
                n_failed,
            }
        })
        .collect()
}

/// Metrics for every (estimand, method) cell of one scenario.
pub fn run_scenario(scenario: &SimulationScenario, config: &GridConfig) -> Result<Vec<MetricsRow>> {
    if config.replicates < 2 {
        return Err(Error::InvalidArgument("at least 2 replicates required".into()));
    }
    if config.methods.is_empty() {
        return Err(Error::InvalidArgument("no methods requested".into()));
    }
    scenario.validate()?;
    let results: Vec<[Result<ReplicateOutcome>; 2]> = (0..config.replicates)
        .into_par_iter()
        .map(|r| run_replicate(scenario, config, r))
        .collect();
    let mut rows = Vec::new();
    for (e, estimand) in Estimand::ALL.iter().enumerate() {
        let ok: Vec<&ReplicateOutcome> = results.iter().filter_map(|r| r[e].as_ref().ok()).collect();
        let failures: Vec<String> = results
            .iter()
            .filter_map(|r| r[e].as_ref().err().map(|err| err.to_string()))
            .collect();
        check_failures(failures.len(), config.replicates, failures.first().map(String::as_str))?;
        rows.extend(summarize(
            &scenario.name,
            *estimand,
            &config.methods,
            &ok,
            failures.len(),
        ));
    }
    Ok(rows)
}

pub fn run_grid(scenarios: &[SimulationScenario], config: &GridConfig) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::new();
    for s in scenarios {
        rows.extend(run_scenario(s, config)?);
    }
    Ok(rows)
}

/// Published (bias %, standard error, coverage %) for a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedCell {
    pub bias_pct: f64,
    pub std_err: f64,
    pub coverage_pct: f64,
}

// Rows: bias TWFE OR IPW DR, std. err. (same order), coverage (same order).
const REFERENCE: [(&str, Estimand, [f64; 12]); 24] = [
    ("1a", Estimand::Att, [-12.784, -0.069, 0.929, -0.103, 0.564, 0.045, 0.389, 0.047, 91.9, 94.1, 98.5, 95.0]),
    ("1b", Estimand::Att, [-39.051, -0.067, -2.251, -0.096, 0.571, 0.045, 0.49, 0.047, 72.0, 95.3, 96.5, 96.3]),
    ("1c", Estimand::Att, [-7.286, -9.348, -0.225, -2.754, 0.597, 0.386, 0.492, 0.472, 93.2, 93.5, 97.7, 95.3]),
    ("1d", Estimand::Att, [22.566, 28.382, 35.917, 32.824, 0.624, 0.397, 0.538, 0.453, 88.0, 72.8, 73.3, 70.3]),
    ("2a", Estimand::Att, [-10.887, -0.002, -0.003, 0.032, 0.226, 0.038, 0.209, 0.040, 83.4, 94.7, 95.3, 94.3]),
    ("2b", Estimand::Att, [-45.221, -0.062, -1.576, -0.059, 0.224, 0.037, 0.148, 0.038, 1.7, 94.7, 91.0, 95.0]),
    ("2c", Estimand::Att, [-5.278, -8.913, -0.391, -0.745, 0.208, 0.138, 0.199, 0.187, 90.6, 75.2, 94.6, 93.7]),
    ("2d", Estimand::Att, [19.201, 29.893, 35.902, 33.978, 0.206, 0.134, 0.171, 0.141, 35.8, 0.6, 1.1, 0.0]),
    ("3a", Estimand::Att, [-11.976, 0.128, 0.713, 0.139, 0.423, 0.057, 0.353, 0.059, 90.5, 93.1, 97.1, 93.8]),
    ("3b", Estimand::Att, [-43.696, 0.152, -1.364, 0.187, 0.436, 0.058, 0.33, 0.059, 45.4, 92.5, 94.8, 94.0]),
    ("3c", Estimand::Att, [-5.75, -9.288, -0.239, -2.410, 0.394, 0.279, 0.620, 0.451, 93.7, 88.7, 95.0, 92.8]),
    ("3d", Estimand::Att, [18.497, 27.495, 34.590, 32.256, 0.400, 0.253, 0.352, 0.288, 83.2, 42.4, 42.9, 34.1]),
    ("1a", Estimand::Atn, [-58.815, 0.078, 0.005, 0.186, 0.502, 0.037, 0.347, 0.042, 75.2, 100.0, 98.6, 100.0]),
    ("1b", Estimand::Atn, [-13.883, -0.166, -24.357, -0.082, 0.497, 0.039, 0.801, 0.043, 93.2, 99.7, 98.2, 99.7]),
    ("1c", Estimand::Atn, [45.954, -28.936, -0.928, -4.004, 0.519, 0.359, 0.561, 0.526, 84.8, 88.6, 97.0, 93.7]),
    ("1d", Estimand::Atn, [10.542, -53.447, -63.872, -49.881, 0.539, 0.355, 0.750, 0.405, 93.8, 64.4, 85.2, 72.8]),
    ("2a", Estimand::Atn, [-49.862, -0.051, 0.064, 0.013, 0.194, 0.031, 0.128, 0.033, 27.2, 98.2, 95.7, 98.0]),
    ("2b", Estimand::Atn, [-26.739, 0.026, -28.104, 0.018, 0.193, 0.032, 0.420, 0.035, 71.7, 97.0, 66.8, 97.5]),
    ("2c", Estimand::Atn, [52.672, -28.980, 0.132, -0.578, 0.174, 0.127, 0.139, 0.193, 14.7, 37.1, 94.6, 93.2]),
    ("2d", Estimand::Atn, [-5.510, -51.219, -58.066, -42.967, 0.175, 0.120, 0.233, 0.200, 84.8, 0.4, 2.7, 11.8]),
    ("3a", Estimand::Atn, [-51.2, -0.080, 0.005, -0.166, 0.357, 0.048, 0.229, 0.051, 72.2, 98.7, 96.7, 98.4]),
    ("3b", Estimand::Atn, [-23.631, -0.040, -24.953, -0.021, 0.369, 0.044, 0.590, 0.048, 89.4, 99.0, 94.5, 98.9]),
    ("3c", Estimand::Atn, [50.125, -30.159, -0.983, -7.144, 0.353, 0.247, 0.249, 0.304, 69.9, 77.8, 95.9, 93.1]),
    ("3d", Estimand::Atn, [-1.775, -51.697, -59.399, -46.790, 0.352, 0.243, 0.426, 0.330, 94.6, 41.8, 49.0, 55.6]),
];

/// Published simulation result for a preset cell, if one exists.
pub fn published_reference(scenario: &str, estimand: Estimand, method: Method) -> Option<PublishedCell> {
    let k = match method {
        Method::Twfe => 0,
        Method::Or => 1,
        Method::Ipw => 2,
        Method::Dr => 3,
    };
    REFERENCE
        .iter()
        .find(|(s, e, _)| *s == scenario && *e == estimand)
        .map(|(_, _, v)| PublishedCell {
            bias_pct: v[k],
            std_err: v[4 + k],
            coverage_pct: v[8 + k],
        })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.3}"))
}

/// Writes metrics as CSV; `compare_published` appends the published values.
pub fn write_metrics<W: Write>(rows: &[MetricsRow], compare_published: bool, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec![
        "scenario", "estimand", "method", "bias_pct", "std_err", "coverage_pct", "n_failed",
    ];
    if compare_published {
        header.extend(["published_bias_pct", "published_std_err", "published_coverage_pct"]);
    }
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![
            row.scenario.clone(),
            row.estimand.to_string(),
            row.method.to_string(),
            format!("{:.3}", row.bias_pct),
            format!("{:.3}", row.std_err),
            fmt_opt(row.coverage_pct),
            row.n_failed.to_string(),
        ];
        if compare_published {
            let cell = published_reference(&row.scenario, row.estimand, row.method);
            rec.push(fmt_opt(cell.map(|c| c.bias_pct)));
            rec.push(fmt_opt(cell.map(|c| c.std_err)));
            rec.push(cell.map_or_else(String::new, |c| format!("{:.1}", c.coverage_pct)));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_lookup() {
        let c = published_reference("2a", Estimand::Att, Method::Dr).unwrap();
        assert_eq!((c.bias_pct, c.coverage_pct), (0.032, 94.3));
        assert_eq!(published_reference("2b", Estimand::Att, Method::Twfe).unwrap().coverage_pct, 1.7);
        assert_eq!(published_reference("3c", Estimand::Atn, Method::Dr).unwrap().bias_pct, -7.144);
        assert_eq!(published_reference("2b", Estimand::Atn, Method::Ipw).unwrap().bias_pct, -28.104);
        assert!(published_reference("9z", Estimand::Att, Method::Dr).is_none());
    }

    #[test]
    fn small_grid_shape_and_determinism() {
        let mut s = SimulationScenario::preset("2a").unwrap();
        s.n = 400;
        let ci = BootstrapSpec {
            replicates: 20,
            seed: 3,
            ..Default::default()
        };
        let config = GridConfig::new(vec![Method::Dr, Method::Twfe], 4, Some(ci));
        let rows = run_scenario(&s, &config).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].estimand, Estimand::Att);
        assert_eq!(rows[2].estimand, Estimand::Atn);
        assert!(rows.iter().all(|r| r.coverage_pct.is_some() && r.n_failed == 0));
        assert_eq!(run_scenario(&s, &config).unwrap(), rows);

        let mut out = Vec::new();
        write_metrics(&rows, true, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("scenario,estimand,method,bias_pct,std_err,coverage_pct,n_failed,published_bias_pct"));
        assert!(text.contains("2a,ATT,DR,"));
        assert!(text.lines().nth(1).unwrap().ends_with(",0.032,0.040,94.3"));
    }
}
