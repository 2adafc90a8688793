//! Interval estimation: stratified and Bayesian bootstrap, and an
//! influence-function variance for DR.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimators::{
    estimate_dr, estimate_pretrends, estimate_scaled, exposed_share, validate_windows, EffectEstimate, Method, Scale,
    Window,
};
use crate::nuisance::{fit_nuisances, NuisanceSet, NuisanceSpec};
use crate::panel::{make_comparison, ComparisonFrame, Estimand, PanelDataset, UnitRecord};
use crate::scalar::Scalar;

/// Largest tolerated share of failed bootstrap replicates.
pub const MAX_FAILURE_SHARE: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BootstrapFlavor {
    /// Resample whole units with replacement within each stratum.
    #[default]
    Stratified,
    /// Reweight units by normalized standard-exponential draws.
    Bayesian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSpec {
    pub replicates: usize,
    pub seed: u64,
    pub flavor: BootstrapFlavor,
    pub level: f64,
}

impl Default for BootstrapSpec {
    fn default() -> Self {
        BootstrapSpec {
            replicates: 500,
            seed: 0,
            flavor: BootstrapFlavor::Stratified,
            level: 0.95,
        }
    }
}

impl BootstrapSpec {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::InvalidArgument("at least 2 bootstrap replicates required".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "confidence level {} outside (0, 1)",
                self.level
            )));
        }
        Ok(())
    }
}

/// Independent RNG for replicate `index` under `seed`.
pub fn rng_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws each stratum's original size with replacement from that stratum.
/// Copies of a unit receive distinct ids.
pub fn stratified_resample<T: Scalar, R: Rng + ?Sized>(
    dataset: &PanelDataset<T>,
    rng: &mut R,
) -> PanelDataset<T> {
    let mut groups: Vec<(Arc<str>, Vec<usize>)> = Vec::new();
    let mut slot: HashMap<Arc<str>, usize> = HashMap::new();
    for (i, u) in dataset.units().iter().enumerate() {
        let k = *slot.entry(u.stratum.clone()).or_insert_with(|| {
            groups.push((u.stratum.clone(), Vec::new()));
            groups.len() - 1
        });
        groups[k].1.push(i);
    }
    let mut units: Vec<UnitRecord<T>> = Vec::with_capacity(dataset.len());
    let mut copies = vec![0u32; dataset.len()];
    for (_, members) in &groups {
        for _ in 0..members.len() {
            let i = members[rng.gen_range(0..members.len())];
            copies[i] += 1;
            let mut unit = dataset.units()[i].clone();
            unit.id = unit.id.with_copy(copies[i]);
            units.push(unit);
        }
    }
    dataset.with_units(units)
}

/// Standard-exponential weights normalized to mean 1.
pub fn bayesian_weights<T: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<T> {
    let draws: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    draws.into_iter().map(|d| T::lit(d / mean)).collect()
}

/// Replicate `index` of `dataset` under `spec`.
pub fn bootstrap_replicate<T: Scalar>(
    dataset: &PanelDataset<T>,
    spec: &BootstrapSpec,
    index: usize,
) -> PanelDataset<T> {
    let mut rng = rng_stream(spec.seed, index as u64);
    match spec.flavor {
        BootstrapFlavor::Stratified => stratified_resample(dataset, &mut rng),
        BootstrapFlavor::Bayesian => {
            let w: Vec<T> = bayesian_weights(dataset.len(), &mut rng);
            let scaled: Vec<T> = dataset
                .units()
                .iter()
                .zip(&w)
                .map(|(u, &wi)| u.weight * wi)
                .collect();
            dataset.with_weights(&scaled).expect("one weight per unit")
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapDraws<T> {
    /// Statistic vectors of the successful replicates, in replicate order.
    pub values: Vec<Vec<T>>,
    /// Replicate index and message of each failure.
    pub failures: Vec<(usize, String)>,
    pub total: usize,
}

impl<T: Scalar> BootstrapDraws<T> {
    /// Draws of coordinate `k` of the statistic.
    pub fn column(&self, k: usize) -> Vec<T> {
        self.values.iter().map(|v| v[k]).collect()
    }
}

/// Runs `statistic` on every replicate in parallel. Failed replicates are
/// excluded; more than 10% failures is an error.
pub fn bootstrap<T, F>(
    dataset: &PanelDataset<T>,
    spec: &BootstrapSpec,
    statistic: F,
) -> Result<BootstrapDraws<T>>
where
    T: Scalar,
    F: Fn(&PanelDataset<T>) -> Result<Vec<T>> + Sync,
{
    spec.validate()?;
    let outcomes: Vec<Result<Vec<T>>> = (0..spec.replicates)
        .into_par_iter()
        .map(|b| statistic(&bootstrap_replicate(dataset, spec, b)))
        .collect();
    let mut values = Vec::with_capacity(spec.replicates);
    let mut failures = Vec::new();
    for (b, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(v) if v.iter().all(|x| x.is_finite()) => values.push(v),
            Ok(_) => failures.push((b, "non-finite estimate".to_string())),
            Err(e) => failures.push((b, e.to_string())),
        }
    }
    check_failures(failures.len(), spec.replicates, failures.first().map(|f| f.1.as_str()))?;
    Ok(BootstrapDraws {
        values,
        failures,
        total: spec.replicates,
    })
}

pub(crate) fn check_failures(failed: usize, total: usize, first: Option<&str>) -> Result<()> {
    if failed as f64 > MAX_FAILURE_SHARE * total as f64 {
        return Err(Error::InferenceUnstable {
            failed,
            total,
            first: first.unwrap_or("").to_string(),
        });
    }
    Ok(())
}

/// Sample quantile by linear interpolation between order statistics
/// (position `q·(n−1)` in the sorted sample).
pub fn percentile<T: Scalar>(values: &[T], q: f64) -> T {
    assert!(!values.is_empty(), "percentile of empty sample");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let h = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = T::lit(h - lo as f64);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMethod {
    PercentileBootstrap,
    Parametric,
}

impl fmt::Display for IntervalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IntervalMethod::PercentileBootstrap => "percentile_bootstrap",
            IntervalMethod::Parametric => "parametric",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalEstimate<T> {
    pub point: T,
    pub lower: T,
    pub upper: T,
    pub level: f64,
    pub method: IntervalMethod,
}

impl<T: Scalar> IntervalEstimate<T> {
    pub fn contains(&self, value: T) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub fn from_draws(point: T, draws: &[T], level: f64) -> Self {
        let alpha = (1.0 - level) / 2.0;
        IntervalEstimate {
            point,
            lower: percentile(draws, alpha),
            upper: percentile(draws, 1.0 - alpha),
            level,
            method: IntervalMethod::PercentileBootstrap,
        }
    }
}

/// Percentile intervals for every coordinate of a statistic.
pub fn percentile_intervals<T: Scalar>(
    point: &[T],
    draws: &BootstrapDraws<T>,
    level: f64,
) -> Vec<IntervalEstimate<T>> {
    point
        .iter()
        .enumerate()
        .map(|(k, &p)| IntervalEstimate::from_draws(p, &draws.column(k), level))
        .collect()
}

/// Intervals for one estimate: per window (in window order) and per m.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectIntervals<T> {
    pub estimate: EffectEstimate<T>,
    pub windows: Vec<IntervalEstimate<T>>,
    pub per_m: Vec<IntervalEstimate<T>>,
    /// Replicates excluded because estimation failed on them.
    pub failed: usize,
}

impl<T: Scalar> EffectIntervals<T> {
    fn split(estimate: EffectEstimate<T>, all: Vec<IntervalEstimate<T>>, failed: usize) -> Self {
        let k = estimate.aggregates.len();
        let (windows, per_m) = all.split_at(k);
        EffectIntervals {
            windows: windows.to_vec(),
            per_m: per_m.to_vec(),
            estimate,
            failed,
        }
    }
}

/// Full estimation pipeline from a panel: comparison frame, nuisance fits, estimate.
pub fn estimate_panel<T: Scalar>(
    dataset: &PanelDataset<T>,
    estimand: Estimand,
    method: Method,
    spec: &NuisanceSpec,
    scale: Scale,
    windows: &[Window],
) -> Result<EffectEstimate<T>> {
    let frame = make_comparison(dataset, estimand)?;
    estimate_scaled(&frame, spec, method, scale, windows)
}

/// Bootstrap percentile intervals. Each replicate reruns the whole pipeline,
/// nuisance fits included, and aggregates windows before percentiles are taken.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_ci<T: Scalar>(
    dataset: &PanelDataset<T>,
    estimand: Estimand,
    method: Method,
    spec: &NuisanceSpec,
    scale: Scale,
    windows: &[Window],
    boot: &BootstrapSpec,
) -> Result<EffectIntervals<T>> {
    let estimate = estimate_panel(dataset, estimand, method, spec, scale, windows)?;
    let draws = bootstrap(dataset, boot, |d| {
        Ok(estimate_panel(d, estimand, method, spec, scale, windows)?.flatten())
    })?;
    let intervals = percentile_intervals(&estimate.flatten(), &draws, boot.level);
    Ok(EffectIntervals::split(estimate, intervals, draws.failures.len()))
}

/// Two-sided normal critical value for `level`.
pub fn normal_quantile(level: f64) -> f64 {
    Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(1.0 - (1.0 - level) / 2.0)
}

/// DR estimate and influence values
/// ψ_i = ŵ_i(ΔY_im − μ̂_{Δ,m}(X_i)) − (R_i/p̂_r)·τ̂(m).
pub fn influence_values<T: Scalar>(
    frame: &ComparisonFrame<T>,
    nuisances: &NuisanceSet<T>,
    m: usize,
) -> Result<(T, Vec<T>)> {
    let tau = estimate_dr(frame, nuisances, m)?;
    let wv = crate::estimators::compute_weights(frame, nuisances, m)?;
    let mu = nuisances.mu_hat(frame, m)?;
    let p_r = exposed_share(frame);
    let psi = (0..frame.len())
        .map(|i| {
            let r = if frame.exposed[i] { T::one() } else { T::zero() };
            wv.w[i] * (frame.delta_y(i, m) - mu[i]) - r / p_r * tau
        })
        .collect();
    Ok((tau, psi))
}

/// Variance of τ̂_dr(m): mean(ψ²)/n, with unit weights as multiplicities.
pub fn parametric_variance<T: Scalar>(
    frame: &ComparisonFrame<T>,
    nuisances: &NuisanceSet<T>,
    m: usize,
) -> Result<T> {
    let (_, psi) = influence_values(frame, nuisances, m)?;
    let total: T = frame.weights.iter().copied().sum();
    let mean_sq = psi
        .iter()
        .zip(&frame.weights)
        .map(|(&p, &w)| w * p * p)
        .sum::<T>()
        / total;
    Ok(mean_sq / total)
}

/// Normal intervals for DR from the influence-function variance. Window
/// variances assume independent per-m estimates: Σ var(m) / |W|².
pub fn parametric_ci<T: Scalar>(
    frame: &ComparisonFrame<T>,
    nuisances: &NuisanceSet<T>,
    windows: &[Window],
    level: f64,
) -> Result<EffectIntervals<T>> {
    validate_windows(windows, frame.n_m())?;
    let z = T::lit(normal_quantile(level));
    let mut per_m_point = Vec::with_capacity(frame.n_m());
    let mut per_m_var = Vec::with_capacity(frame.n_m());
    for m in 1..=frame.n_m() {
        per_m_point.push(estimate_dr(frame, nuisances, m)?);
        per_m_var.push(parametric_variance(frame, nuisances, m)?);
    }
    let interval = |point: T, var: T| IntervalEstimate {
        point,
        lower: point - z * var.sqrt(),
        upper: point + z * var.sqrt(),
        level,
        method: IntervalMethod::Parametric,
    };
    let mut aggregates = Vec::with_capacity(windows.len());
    let mut window_iv = Vec::with_capacity(windows.len());
    for w in windows {
        let k = T::from_count(w.members.len());
        let point = w.members.iter().map(|&m| per_m_point[m - 1]).sum::<T>() / k;
        let var = w.members.iter().map(|&m| per_m_var[m - 1]).sum::<T>() / (k * k);
        aggregates.push((w.name.clone(), point));
        window_iv.push(interval(point, var));
    }
    let per_m = per_m_point
        .iter()
        .zip(&per_m_var)
        .map(|(&p, &v)| interval(p, v))
        .collect();
    Ok(EffectIntervals {
        estimate: EffectEstimate {
            estimand: frame.estimand,
            method: Method::Dr,
            per_m: per_m_point,
            aggregates,
            scale: Scale::Additive,
        },
        windows: window_iv,
        per_m,
        failed: 0,
    })
}

/// Parametric intervals straight from a panel.
pub fn parametric_ci_panel<T: Scalar>(
    dataset: &PanelDataset<T>,
    estimand: Estimand,
    spec: &NuisanceSpec,
    windows: &[Window],
    level: f64,
) -> Result<EffectIntervals<T>> {
    let frame = make_comparison(dataset, estimand)?;
    let nuisances = fit_nuisances(&frame, spec)?;
    parametric_ci(&frame, &nuisances, windows, level)
}

/// How intervals are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CiKind {
    #[default]
    None,
    Stratified,
    Bayesian,
    Parametric,
}

impl FromStr for CiKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(CiKind::None),
            "stratified" => Ok(CiKind::Stratified),
            "bayesian" => Ok(CiKind::Bayesian),
            "parametric" => Ok(CiKind::Parametric),
            other => Err(Error::InvalidArgument(format!("unknown interval method `{other}`"))),
        }
    }
}

impl fmt::Display for CiKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CiKind::None => "none",
            CiKind::Stratified => "stratified",
            CiKind::Bayesian => "bayesian",
            CiKind::Parametric => "parametric",
        })
    }
}

/// Point estimate plus intervals of the requested kind.
#[allow(clippy::too_many_arguments)]
pub fn estimate_with_ci<T: Scalar>(
    dataset: &PanelDataset<T>,
    estimand: Estimand,
    method: Method,
    spec: &NuisanceSpec,
    scale: Scale,
    windows: &[Window],
    ci: CiKind,
    boot: &BootstrapSpec,
) -> Result<(EffectEstimate<T>, Option<EffectIntervals<T>>)> {
    match ci {
        CiKind::None => Ok((
            estimate_panel(dataset, estimand, method, spec, scale, windows)?,
            None,
        )),
        CiKind::Stratified | CiKind::Bayesian => {
            let boot = BootstrapSpec {
                flavor: if ci == CiKind::Bayesian {
                    BootstrapFlavor::Bayesian
                } else {
                    BootstrapFlavor::Stratified
                },
                ..*boot
            };
            let iv = bootstrap_ci(dataset, estimand, method, spec, scale, windows, &boot)?;
            Ok((iv.estimate.clone(), Some(iv)))
        }
        CiKind::Parametric => {
            if method != Method::Dr || scale != Scale::Additive {
                return Err(Error::InvalidArgument(
                    "parametric intervals are available for additive DR estimates only".into(),
                ));
            }
            let iv = parametric_ci_panel(dataset, estimand, spec, windows, boot.level)?;
            Ok((iv.estimate.clone(), Some(iv)))
        }
    }
}

/// Pre-period effect at one pseudo-period.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrendRow<T> {
    pub m: usize,
    pub estimate: T,
    pub interval: Option<IntervalEstimate<T>>,
}

/// Pre-period effects for m = 2..=n_m with intervals of the requested kind.
pub fn pretrend_intervals<T: Scalar>(
    dataset: &PanelDataset<T>,
    estimand: Estimand,
    method: Method,
    spec: &NuisanceSpec,
    ci: CiKind,
    boot: &BootstrapSpec,
) -> Result<Vec<PretrendRow<T>>> {
    let frame = make_comparison(dataset, estimand)?;
    if frame.n_m() < 2 {
        return Err(Error::DegenerateComparison(frame.n_m()));
    }
    let ms: Vec<usize> = (2..=frame.n_m()).collect();
    let points = ms
        .iter()
        .map(|&m| estimate_pretrends(&frame, spec, method, m))
        .collect::<Result<Vec<T>>>()?;
    let intervals: Vec<Option<IntervalEstimate<T>>> = match ci {
        CiKind::None => vec![None; ms.len()],
        CiKind::Stratified | CiKind::Bayesian => {
            let boot = BootstrapSpec {
                flavor: if ci == CiKind::Bayesian {
                    BootstrapFlavor::Bayesian
                } else {
                    BootstrapFlavor::Stratified
                },
                ..*boot
            };
            let draws = bootstrap(dataset, &boot, |d| {
                let f = make_comparison(d, estimand)?;
                ms.iter().map(|&m| estimate_pretrends(&f, spec, method, m)).collect()
            })?;
            percentile_intervals(&points, &draws, boot.level)
                .into_iter()
                .map(Some)
                .collect()
        }
        CiKind::Parametric => {
            if method != Method::Dr {
                return Err(Error::InvalidArgument(
                    "parametric intervals are available for additive DR estimates only".into(),
                ));
            }
            let whole = [Window::new("m=1", [1])];
            ms.iter()
                .map(|&m| {
                    let pseudo = frame.pretrend_frame(m)?;
                    let nuisances = fit_nuisances(&pseudo, spec)?;
                    let iv = parametric_ci(&pseudo, &nuisances, &whole, boot.level)?;
                    Ok(Some(iv.per_m[0]))
                })
                .collect::<Result<_>>()?
        }
    };
    Ok(ms
        .into_iter()
        .zip(points)
        .zip(intervals)
        .map(|((m, estimate), interval)| PretrendRow { m, estimate, interval })
        .collect())
}
