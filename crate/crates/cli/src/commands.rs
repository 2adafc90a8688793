use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::Path;

use serde::Serialize;

use interdid::inference::{pretrend_intervals, rng_stream, EffectIntervals, IntervalEstimate};
use interdid::panel::LoadedPanel;
use interdid::simulation::{
    run_grid, simulate as simulate_panel, twfe_heterogeneity_demo, write_metrics, GridConfig, SimulationScenario, PRESET_NAMES,
};
use interdid::subgroups::{
    compute_proxies, estimate_subgroup, exposed_label_values, kmeans, standardize_points,
    SubgroupEstimate, SubgroupOptions, ZoneMeasure,
};
use interdid::{
    apply_exclusion, estimate_with_ci, load_panel, preset_windows, BootstrapFlavor, BootstrapSpec,
    CiKind, EffectEstimate, Error, Estimand, ExposureStatus, Method, NuisanceSpec, Panel,
    PanelSchema, PsMode, Scale, Window, WindowPreset, write_panel,
};

use crate::{
    CiArg, EstimandArg, EstimateArgs, InputArgs, MethodArg, ModelArgs, OutputArgs, PretrendArgs,
    PsModeArg, ScaleArg, SimulateArgs, SubgroupArgs, TrajectoryArgs, ValidateArgs, WindowsArg,
};

pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_input_error() { 2 } else { 3 },
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::input(e.to_string())
    }
}

type CmdResult = std::result::Result<(), Failure>;

impl From<EstimandArg> for Estimand {
    fn from(a: EstimandArg) -> Self {
        match a {
            EstimandArg::Att => Estimand::Att,
            EstimandArg::Atn => Estimand::Atn,
        }
    }
}

impl From<MethodArg> for Method {
    fn from(a: MethodArg) -> Self {
        match a {
            MethodArg::Twfe => Method::Twfe,
            MethodArg::Or => Method::Or,
            MethodArg::Ipw => Method::Ipw,
            MethodArg::Dr => Method::Dr,
        }
    }
}

impl From<ScaleArg> for Scale {
    fn from(a: ScaleArg) -> Self {
        match a {
            ScaleArg::Additive => Scale::Additive,
            ScaleArg::Relative => Scale::Relative,
        }
    }
}

impl From<CiArg> for CiKind {
    fn from(a: CiArg) -> Self {
        match a {
            CiArg::None => CiKind::None,
            CiArg::Stratified => CiKind::Stratified,
            CiArg::Bayesian => CiKind::Bayesian,
            CiArg::Parametric => CiKind::Parametric,
        }
    }
}

impl From<WindowsArg> for WindowPreset {
    fn from(a: WindowsArg) -> Self {
        match a {
            WindowsArg::Annual => WindowPreset::Annual,
            WindowsArg::Seasonal => WindowPreset::Seasonal,
            WindowsArg::AllM => WindowPreset::AllM,
        }
    }
}

fn ps_mode(a: PsModeArg) -> PsMode {
    match a {
        PsModeArg::Invariant => PsMode::TimeInvariant,
        PsModeArg::PerM => PsMode::PerM,
    }
}

/// CSV sink that starts with the run configuration as `#` lines.
fn open_output<C: Serialize>(command: &str, config: &C, out: &OutputArgs) -> Result<Box<dyn Write>, Failure> {
    let mut sink: Box<dyn Write> = match &out.output {
        Some(p) => Box::new(io::BufWriter::new(File::create(p)?)),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    };
    writeln!(sink, "# interdid {} {}", env!("CARGO_PKG_VERSION"), command)?;
    let echo = toml::to_string(config).map_err(|e| Failure::input(e.to_string()))?;
    for line in echo.lines().filter(|l| !l.trim().is_empty()) {
        writeln!(sink, "# {line}")?;
    }
    Ok(sink)
}

fn warn(msg: &str) {
    eprintln!("warning: {msg}");
}

fn load(input: &InputArgs, extra_labels: &[&str]) -> Result<Panel, Failure> {
    let mut label_columns = input.label_columns.clone();
    for l in extra_labels {
        if !label_columns.iter().any(|c| c == l) {
            label_columns.push(l.to_string());
        }
    }
    let schema = PanelSchema {
        varying_covariate: input.varying_covariate.clone(),
        label_columns,
    };
    let file = File::open(&input.input)
        .map_err(|e| Failure::input(format!("{}: {e}", input.input.display())))?;
    let LoadedPanel { dataset, excluded } = load_panel::<f64, _>(BufReader::new(file), &schema)?;
    if !input.apply_exclusion {
        return Ok(dataset);
    }
    let flags = excluded.ok_or_else(|| {
        Failure::input("--apply-exclusion needs an `excluded` column in the input")
    })?;
    let ex = apply_exclusion(&dataset, &flags)?;
    for w in &ex.warnings {
        warn(w);
    }
    Ok(ex.dataset)
}

fn nuisance_spec(
    dataset: &Panel,
    mode: PsModeArg,
    mu: &Option<Vec<String>>,
    pi: &Option<Vec<String>>,
) -> Result<NuisanceSpec, Failure> {
    let pick = |chosen: &Option<Vec<String>>| -> Result<Vec<String>, Failure> {
        match chosen {
            None => Ok(dataset.covariate_names().to_vec()),
            Some(names) => {
                let names: Vec<String> = names.iter().filter(|n| !n.is_empty()).cloned().collect();
                for n in &names {
                    dataset.covariate_index(n)?;
                }
                Ok(names)
            }
        }
    };
    Ok(NuisanceSpec {
        ps_mode: ps_mode(mode),
        mu_covariates: pick(mu)?,
        pi_covariates: pick(pi)?,
        ..NuisanceSpec::default()
    })
}

fn boot_spec(reps: usize, seed: u64, level: f64, ci: CiKind) -> BootstrapSpec {
    BootstrapSpec {
        replicates: reps,
        seed,
        flavor: if ci == CiKind::Bayesian {
            BootstrapFlavor::Bayesian
        } else {
            BootstrapFlavor::Stratified
        },
        level,
    }
}

fn windows_for(dataset: &Panel, preset: WindowsArg) -> Result<Vec<Window>, Failure> {
    Ok(preset_windows(preset.into(), dataset.n_m())?)
}

fn fmt_bound(iv: Option<&IntervalEstimate<f64>>, f: impl Fn(&IntervalEstimate<f64>) -> f64) -> String {
    iv.map_or_else(String::new, |iv| f(iv).to_string())
}

/// Rows of (window, estimate, lower, upper).
fn effect_rows(
    estimate: &EffectEstimate<f64>,
    intervals: Option<&EffectIntervals<f64>>,
) -> Vec<[String; 4]> {
    estimate
        .aggregates
        .iter()
        .enumerate()
        .map(|(k, (name, value))| {
            let iv = intervals.map(|i| &i.windows[k]);
            [
                name.clone(),
                value.to_string(),
                fmt_bound(iv, |i| i.lower),
                fmt_bound(iv, |i| i.upper),
            ]
        })
        .collect()
}

fn report_failed(intervals: Option<&EffectIntervals<f64>>, what: &str) {
    if let Some(iv) = intervals {
        if iv.failed > 0 {
            warn(&format!("{what}: {} bootstrap replicates failed and were dropped", iv.failed));
        }
    }
}

pub fn validate(args: &ValidateArgs) -> CmdResult {
    let ds = load(&args.input, &[])?;
    let mut out = io::stdout().lock();
    writeln!(out, "units,{}", ds.len())?;
    writeln!(out, "n_m,{}", ds.n_m())?;
    for (status, count) in ds.status_counts() {
        writeln!(out, "exposure,{},{}", status.label(), count)?;
    }
    let strata = ds.stratum_counts();
    writeln!(out, "strata,{}", strata.len())?;
    for (stratum, count) in &strata {
        writeln!(out, "stratum,{stratum},{count}")?;
    }
    for (j, name) in ds.covariate_names().iter().enumerate() {
        let vals: Vec<f64> = ds.units().iter().map(|u| u.covariates[j]).collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt();
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let varying = if ds.varying_covariate() == Some(j) { " (varying; m=1)" } else { "" };
        writeln!(out, "covariate,{name}{varying},mean={mean},sd={sd},min={min},max={max}")?;
    }
    for name in ds.label_names() {
        writeln!(out, "label,{name}")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EstimateEcho<'a> {
    #[serde(flatten)]
    args: &'a EstimateArgs,
    mu_covariates: &'a [String],
    pi_covariates: &'a [String],
}

pub fn estimate(args: &EstimateArgs) -> CmdResult {
    let ds = load(&args.input, &[])?;
    let m = &args.model;
    let spec = nuisance_spec(&ds, m.ps_mode, &m.mu_covs, &m.pi_covs)?;
    let windows = windows_for(&ds, args.windows)?;
    let ci: CiKind = m.ci.into();
    let boot = boot_spec(m.reps, m.seed, m.level, ci);
    let mut results = Vec::new();
    for &e in &m.estimand {
        for &meth in &m.method {
            let (est, iv) = estimate_with_ci(
                &ds,
                e.into(),
                meth.into(),
                &spec,
                args.scale.into(),
                &windows,
                ci,
                &boot,
            )?;
            report_failed(iv.as_ref(), &format!("{} {}", Estimand::from(e), Method::from(meth)));
            results.push((est, iv));
        }
    }
    let echo = EstimateEcho {
        args,
        mu_covariates: &spec.mu_covariates,
        pi_covariates: &spec.pi_covariates,
    };
    let mut w = csv::Writer::from_writer(open_output("estimate", &echo, &args.out)?);
    w.write_record(["estimand", "method", "scale", "window", "estimate", "lower", "upper"])?;
    for (est, iv) in &results {
        let scale = match est.scale {
            Scale::Additive => "additive",
            Scale::Relative => "relative",
        };
        for row in effect_rows(est, iv.as_ref()) {
            let mut rec = vec![est.estimand.to_string(), est.method.to_string(), scale.to_string()];
            rec.extend(row);
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn pretrend_model(args: &ModelArgs, ds: &Panel) -> Result<NuisanceSpec, Failure> {
    nuisance_spec(ds, args.ps_mode, &args.mu_covs, &args.pi_covs)
}

pub fn pretrends(args: &PretrendArgs) -> CmdResult {
    let ds = load(&args.input, &[])?;
    let m = &args.model;
    let spec = pretrend_model(m, &ds)?;
    let ci: CiKind = m.ci.into();
    let boot = boot_spec(m.reps, m.seed, m.level, ci);
    let mut rows = Vec::new();
    for &e in &m.estimand {
        for &meth in &m.method {
            let table = pretrend_intervals(&ds, e.into(), meth.into(), &spec, ci, &boot)?;
            rows.push((Estimand::from(e), Method::from(meth), table));
        }
    }
    let mut w = csv::Writer::from_writer(open_output("pretrends", args, &args.out)?);
    w.write_record(["estimand", "method", "m", "estimate", "lower", "upper", "contains_zero"])?;
    for (e, meth, table) in &rows {
        for r in table {
            let iv = r.interval.as_ref();
            w.write_record([
                e.to_string(),
                meth.to_string(),
                r.m.to_string(),
                r.estimate.to_string(),
                fmt_bound(iv, |i| i.lower),
                fmt_bound(iv, |i| i.upper),
                iv.map_or_else(String::new, |i| i.contains(0.0).to_string()),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> CmdResult {
    if let Some(_demo) = args.demo {
        let mut reports = Vec::new();
        for het in [false, true] {
            reports.push(twfe_heterogeneity_demo(args.n, args.reps, het, args.seed.unwrap_or(0))?);
        }
        let mut w = csv::Writer::from_writer(open_output("simulate", args, &args.out)?);
        w.write_record(["design", "n", "replicates", "mean_estimate", "mean_truth", "bias_pct"])?;
        for r in &reports {
            w.write_record([
                if r.heterogeneous { "heterogeneous" } else { "homogeneous" }.to_string(),
                r.n.to_string(),
                r.replicates.to_string(),
                format!("{:.6}", r.mean_estimate),
                format!("{:.6}", r.mean_truth),
                format!("{:.3}", r.bias_pct),
            ])?;
        }
        w.flush()?;
        return Ok(());
    }
    let mut scenarios = Vec::new();
    for name in &args.scenario {
        if name == "all" {
            scenarios.extend(SimulationScenario::all_presets());
        } else {
            scenarios.push(SimulationScenario::preset(name).map_err(|e| {
                Failure::input(format!("{e}; available: {}, all", PRESET_NAMES.join(", ")))
            })?);
        }
    }
    for path in &args.scenario_file {
        let src = std::fs::read_to_string(path)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        scenarios.push(SimulationScenario::from_toml(&src)?);
    }
    if scenarios.is_empty() {
        return Err(Failure::input("give --scenario, --scenario-file or --demo"));
    }
    if let Some(seed) = args.seed {
        for s in &mut scenarios {
            s.seed = seed;
        }
    }
    if let Some(path) = &args.emit_panel {
        let sim = simulate_panel(&scenarios[0], &mut rng_stream(scenarios[0].seed, 0));
        let file = File::create(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        write_panel(&sim.dataset, None, io::BufWriter::new(file))?;
        eprintln!(
            "wrote {} units; ATT truth {}, ATN truth {}",
            sim.dataset.len(),
            sim.truth.att_true,
            sim.truth.atn_true
        );
        return Ok(());
    }
    let ci: CiKind = args.ci.into();
    let boot = match ci {
        CiKind::None => None,
        CiKind::Stratified | CiKind::Bayesian => {
            Some(boot_spec(args.boot_reps, args.seed.unwrap_or(0), 0.95, ci))
        }
        CiKind::Parametric => {
            return Err(Failure::input("simulate supports --ci none, stratified or bayesian"));
        }
    };
    let methods: Vec<Method> = args.methods.iter().map(|&m| m.into()).collect();
    let config = GridConfig::new(methods, args.reps, boot);
    let rows = run_grid(&scenarios, &config)?;
    for r in rows.iter().filter(|r| r.n_failed > 0) {
        warn(&format!(
            "{} {} {}: {} replicates failed and were dropped",
            r.scenario, r.estimand, r.method, r.n_failed
        ));
    }
    let sink = open_output("simulate", args, &args.out)?;
    write_metrics(&rows, args.compare_paper, sink)?;
    Ok(())
}

fn read_edges(path: &Path) -> Result<Vec<(String, String)>, Failure> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let mut edges = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(Failure::input(format!("{} row {}: expected taxed_zone,neighbor_zone", path.display(), i + 2)));
        }
        edges.push((rec[0].to_string(), rec[1].to_string()));
    }
    Ok(edges)
}

fn read_zone_measures(path: &Path) -> Result<Vec<ZoneMeasure<f64>>, Failure> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |k: usize, col: &str| -> Result<f64, Failure> {
            rec.get(k)
                .and_then(|v| v.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| {
                    Failure::input(format!("{} row {}: bad `{col}` value", path.display(), i + 2))
                })
        };
        out.push(ZoneMeasure {
            zone: rec.get(0).unwrap_or_default().to_string(),
            population: num(1, "population")?,
            yty_diff: num(2, "yty_diff")?,
        });
    }
    Ok(out)
}

struct Subgroup {
    name: String,
    result: SubgroupEstimate<f64>,
}

pub fn subgroup(args: &SubgroupArgs) -> CmdResult {
    let zone_column = args.zone_column.as_deref();
    let extra: Vec<&str> = zone_column.into_iter().chain(args.filter_column.as_deref()).collect();
    let ds = load(&args.input, &extra)?;
    let estimand: Estimand = args.estimand.into();
    let ci: CiKind = args.ci.into();
    let options = SubgroupOptions {
        estimand,
        method: args.method.into(),
        scale: args.scale.into(),
        windows: windows_for(&ds, args.windows)?,
        nuisance: nuisance_spec(&ds, args.ps_mode, &args.mu_covs, &args.pi_covs)?,
        ci,
        bootstrap: boot_spec(args.reps, args.seed, args.level, ci),
        hold_nuisances: false,
    };
    let target: ExposureStatus = estimand.exposed_status();

    let (label, groups): (usize, Vec<(String, BTreeSet<String>)>) = match (&args.adjacency, &args.filter_column) {
        (Some(adjacency), _) => {
            let zone_column = zone_column.expect("clap enforces --zone-column");
            let label = ds.label_index(zone_column).expect("loaded as a label column");
            let edges = read_edges(adjacency)?;
            let measures = read_zone_measures(args.zone_measures.as_deref().expect("clap enforces --zone-measures"))?;
            let zones = exposed_label_values(&ds, estimand, label);
            let proxies = compute_proxies(&measures, &edges, &zones)?;
            let raw: Vec<Vec<f64>> = proxies
                .iter()
                .map(|p| vec![p.available_traffic, p.available_sales])
                .collect();
            let fit = kmeans(&standardize_points(&raw), args.k, args.seed, args.restarts)?;
            // number clusters by increasing traffic center
            let mut order: Vec<usize> = (0..args.k).collect();
            order.sort_by(|&a, &b| fit.centers[a][0].total_cmp(&fit.centers[b][0]));
            let rank: BTreeMap<usize, usize> = order.iter().enumerate().map(|(r, &c)| (c, r)).collect();
            if let Some(path) = &args.assignments {
                let mut w = csv::Writer::from_path(path)?;
                w.write_record(["zone", "available_traffic", "available_sales", "cluster"])?;
                for ((z, p), &l) in zones.iter().zip(&proxies).zip(&fit.labels) {
                    w.write_record([
                        z.clone(),
                        p.available_traffic.to_string(),
                        p.available_sales.to_string(),
                        rank[&l].to_string(),
                    ])?;
                }
                w.flush()?;
            }
            let mut groups = vec![BTreeSet::new(); args.k];
            for (z, &l) in zones.iter().zip(&fit.labels) {
                groups[rank[&l]].insert(z.clone());
            }
            (
                label,
                groups
                    .into_iter()
                    .enumerate()
                    .map(|(c, g)| (format!("cluster={c}"), g))
                    .collect(),
            )
        }
        (None, Some(col)) => {
            let label = ds.label_index(col).expect("loaded as a label column");
            let groups = exposed_label_values(&ds, estimand, label)
                .into_iter()
                .map(|v| (format!("{col}={v}"), BTreeSet::from([v])))
                .collect();
            (label, groups)
        }
        (None, None) => return Err(Failure::input("give --adjacency with --zone-measures and --zone-column, or --filter-column")),
    };

    let mut results = Vec::new();
    for (name, members) in groups {
        let result = estimate_subgroup(
            &ds,
            |u| u.exposure == target && members.contains(&u.labels[label]),
            &options,
        )
        .map_err(|e| Failure::from(e).with_context(&name))?;
        for w in &result.warnings {
            warn(&format!("{name}: {w}"));
        }
        report_failed(result.intervals.as_ref(), &name);
        results.push(Subgroup { name, result });
    }

    let mut w = csv::Writer::from_writer(open_output("subgroup", args, &args.out)?);
    w.write_record([
        "subgroup", "n_exposed", "estimand", "method", "scale", "window", "estimate", "lower", "upper",
    ])?;
    for s in &results {
        let est = &s.result.estimate;
        let scale = match est.scale {
            Scale::Additive => "additive",
            Scale::Relative => "relative",
        };
        for row in effect_rows(est, s.result.intervals.as_ref()) {
            let mut rec = vec![
                s.name.clone(),
                s.result.exposed.to_string(),
                est.estimand.to_string(),
                est.method.to_string(),
                scale.to_string(),
            ];
            rec.extend(row);
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

impl Failure {
    fn with_context(mut self, what: &str) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

/// Mean outcome per exposure group, t and m, and its ratio to the group's
/// pre-period mean.
pub fn trajectories(args: &TrajectoryArgs) -> CmdResult {
    let ds = load(&args.input, &[])?;
    let mut w = csv::Writer::from_writer(open_output("trajectories", args, &args.out)?);
    w.write_record(["exposure", "t", "m", "n_units", "mean_outcome", "relative_to_pre"])?;
    for status in ds.status_counts().keys() {
        let units: Vec<_> = ds.units().iter().filter(|u| u.exposure == *status).collect();
        let n = units.len() as f64;
        let mean = |t: usize, m: usize| units.iter().map(|u| u.outcomes[t][m - 1]).sum::<f64>() / n;
        let baseline = (1..=ds.n_m()).map(|m| mean(0, m)).sum::<f64>() / ds.n_m() as f64;
        for t in 0..2 {
            for m in 1..=ds.n_m() {
                let v = mean(t, m);
                let rel = if baseline != 0.0 { (v / baseline).to_string() } else { String::new() };
                w.write_record([
                    status.label().to_string(),
                    t.to_string(),
                    m.to_string(),
                    units.len().to_string(),
                    v.to_string(),
                    rel,
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
