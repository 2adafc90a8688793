//! Point estimators for ATT/ATN (TWFE, OR, IPW, DR), window aggregation,
//! pre-trend effects and relative effects.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nuisance::{fit_nuisances, fit_ols_weighted, NuisanceSet, NuisanceSpec};
use crate::panel::{ComparisonFrame, Estimand};
use crate::scalar::Scalar;

/// Propensities at or above `1 - OVERLAP_EPS` are treated as positivity failures.
pub const OVERLAP_EPS: f64 = 1e-6;
/// Smallest admissible magnitude of a relative-effect denominator.
pub const RATIO_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Twfe,
    Or,
    Ipw,
    Dr,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Twfe, Method::Or, Method::Ipw, Method::Dr];

    pub fn needs_nuisances(self) -> bool {
        self != Method::Twfe
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Twfe => "TWFE",
            Method::Or => "OR",
            Method::Ipw => "IPW",
            Method::Dr => "DR",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "twfe" => Ok(Method::Twfe),
            "or" => Ok(Method::Or),
            "ipw" => Ok(Method::Ipw),
            "dr" => Ok(Method::Dr),
            other => Err(Error::InvalidArgument(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Additive,
    Relative,
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Additive => "additive",
            Scale::Relative => "relative",
        })
    }
}

/// Named set of observation times (1-based).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub name: String,
    pub members: Vec<usize>,
}

impl Window {
    pub fn new(name: impl Into<String>, members: impl IntoIterator<Item = usize>) -> Self {
        Window {
            name: name.into(),
            members: members.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowPreset {
    /// One window covering every m.
    Annual,
    /// Winter 1-3, Spring 4-6, Summer 7-9, Fall 10-13, then Annual. Requires n_m = 13.
    Seasonal,
    /// One singleton window per m.
    AllM,
}

impl FromStr for WindowPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "annual" => Ok(WindowPreset::Annual),
            "seasonal" => Ok(WindowPreset::Seasonal),
            "all-m" => Ok(WindowPreset::AllM),
            other => Err(Error::InvalidArgument(format!("unknown window preset `{other}`"))),
        }
    }
}

pub fn preset_windows(preset: WindowPreset, n_m: usize) -> Result<Vec<Window>> {
    let annual = Window::new("Annual", 1..=n_m);
    match preset {
        WindowPreset::Annual => Ok(vec![annual]),
        WindowPreset::Seasonal => {
            if n_m != 13 {
                return Err(Error::Preset {
                    preset: "seasonal".into(),
                    reason: format!("needs n_m = 13, data has n_m = {n_m}"),
                });
            }
            Ok(vec![
                Window::new("Winter", 1..=3),
                Window::new("Spring", 4..=6),
                Window::new("Summer", 7..=9),
                Window::new("Fall", 10..=13),
                annual,
            ])
        }
        WindowPreset::AllM => Ok((1..=n_m).map(|m| Window::new(format!("m={m}"), [m])).collect()),
    }
}

pub fn validate_windows(windows: &[Window], n_m: usize) -> Result<()> {
    for w in windows {
        if w.members.is_empty() {
            return Err(Error::InvalidArgument(format!("window `{}` is empty", w.name)));
        }
        if let Some(&m) = w.members.iter().find(|&&m| m == 0 || m > n_m) {
            return Err(Error::Bounds { m, n_m });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectEstimate<T> {
    pub estimand: Estimand,
    pub method: Method,
    /// τ̂(m) for m = 1..=n_m.
    pub per_m: Vec<T>,
    /// Window aggregates in the order the windows were given.
    pub aggregates: Vec<(String, T)>,
    pub scale: Scale,
}

impl<T: Scalar> EffectEstimate<T> {
    pub fn aggregate(&self, name: &str) -> Option<T> {
        self.aggregates
            .iter()
            .find(|(n, _)| n == name)
            .map(|&(_, v)| v)
    }

    /// Window aggregates followed by per-m values, as one flat vector.
    pub fn flatten(&self) -> Vec<T> {
        self.aggregates
            .iter()
            .map(|&(_, v)| v)
            .chain(self.per_m.iter().copied())
            .collect()
    }
}

/// Arithmetic mean of `per_m` over each window.
pub fn aggregate<T: Scalar>(per_m: &[T], windows: &[Window]) -> Result<Vec<(String, T)>> {
    validate_windows(windows, per_m.len())?;
    Ok(windows
        .iter()
        .map(|w| {
            let s: T = w.members.iter().map(|&m| per_m[m - 1]).sum();
            (w.name.clone(), s / T::from_count(w.members.len()))
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector<T> {
    pub w: Vec<T>,
    /// Estimated P(R = 1): the weighted share of exposed units.
    pub p_r: T,
}

fn weighted_total<T: Scalar>(frame: &ComparisonFrame<T>) -> T {
    frame.weights.iter().copied().sum()
}

/// Weighted empirical mean over all frame units.
fn frame_mean<T: Scalar>(frame: &ComparisonFrame<T>, f: impl Fn(usize) -> T) -> T {
    let total = weighted_total(frame);
    (0..frame.len())
        .map(|i| frame.weights[i] * f(i))
        .sum::<T>()
        / total
}

/// Weighted share of exposed units.
pub fn exposed_share<T: Scalar>(frame: &ComparisonFrame<T>) -> T {
    frame_mean(frame, |i| if frame.exposed[i] { T::one() } else { T::zero() })
}

/// Regression of Y on (1, X, t, R, t·R) over the stacked rows for (0, m)
/// and (1, m); returns the t·R coefficient.
pub fn estimate_twfe<T: Scalar>(
    frame: &ComparisonFrame<T>,
    m: usize,
    covariates: &[String],
) -> Result<T> {
    frame.check_m(m)?;
    let cols = frame.covariate_indices(covariates)?;
    let n = frame.len();
    let p = cols.len();
    let mut x = Matrix::zeros(2 * n, p + 4);
    let mut y = Vec::with_capacity(2 * n);
    let mut w = Vec::with_capacity(2 * n);
    for t in 0..2 {
        for i in 0..n {
            let row = t * n + i;
            x.set(row, 0, T::one());
            for (c, &j) in cols.iter().enumerate() {
                x.set(row, c + 1, frame.covariate(i, j, m));
            }
            let tv = T::from_count(t);
            let rv = if frame.exposed[i] { T::one() } else { T::zero() };
            x.set(row, p + 1, tv);
            x.set(row, p + 2, rv);
            x.set(row, p + 3, tv * rv);
            y.push(if t == 0 { frame.pre[i][m - 1] } else { frame.post[i][m - 1] });
            w.push(frame.weights[i]);
        }
    }
    let mut names = covariates.to_vec();
    names.extend(["t".to_string(), "R".to_string(), "t:R".to_string()]);
    let model = fit_ols_weighted(&x, &y, Some(&w), &names)?;
    Ok(model.coefficients[p + 3])
}

/// Mean over exposed units of ΔY_m − μ̂_{Δ,m}(X).
pub fn estimate_or<T: Scalar>(
    frame: &ComparisonFrame<T>,
    nuisances: &NuisanceSet<T>,
    m: usize,
) -> Result<T> {
    let mu = nuisances.mu_hat(frame, m)?;
    let (mut num, mut den) = (T::zero(), T::zero());
    for i in (0..frame.len()).filter(|&i| frame.exposed[i]) {
        num = num + frame.weights[i] * (frame.delta_y(i, m) - mu[i]);
        den = den + frame.weights[i];
    }
    Ok(num / den)
}

/// w_i = (R_i − π̂_i) / (p̂_r (1 − π̂_i)).
pub fn compute_weights<T: Scalar>(
    frame: &ComparisonFrame<T>,
    nuisances: &NuisanceSet<T>,
    m: usize,
) -> Result<WeightVector<T>> {
    let pi = nuisances.pi_hat(frame, m)?;
    weights_from_propensity(frame, &pi)
}

pub fn weights_from_propensity<T: Scalar>(
    frame: &ComparisonFrame<T>,
    pi: &[T],
) -> Result<WeightVector<T>> {
    let limit = T::one() - T::lit(OVERLAP_EPS);
    let offenders: Vec<String> = (0..frame.len())
        .filter(|&i| !(pi[i] < limit))
        .map(|i| frame.unit_ids[i].to_string())
        .collect();
    if !offenders.is_empty() {
        return Err(Error::NonOverlap { units: offenders });
    }
    let p_r = exposed_share(frame);
    let w = (0..frame.len())
        .map(|i| {
            let r = if frame.exposed[i] { T::one() } else { T::zero() };
            (r - pi[i]) / (p_r * (T::one() - pi[i]))
        })
        .collect();
    Ok(WeightVector { w, p_r })
}

/// Mean over all units of ŵ·ΔY_m.
pub fn estimate_ipw<T: Scalar>(
    frame: &ComparisonFrame<T>,
    nuisances: &NuisanceSet<T>,
    m: usize,
) -> Result<T> {
    let wv = compute_weights(frame, nuisances, m)?;
    Ok(frame_mean(frame, |i| wv.w[i] * frame.delta_y(i, m)))
}

/// Mean over all units of ŵ·(ΔY_m − μ̂_{Δ,m}(X)).
pub fn estimate_dr<T: Scalar>(
    frame: &ComparisonFrame<T>,
    nuisances: &NuisanceSet<T>,
    m: usize,
) -> Result<T> {
    let wv = compute_weights(frame, nuisances, m)?;
    let mu = nuisances.mu_hat(frame, m)?;
    Ok(frame_mean(frame, |i| wv.w[i] * (frame.delta_y(i, m) - mu[i])))
}

fn estimate_at<T: Scalar>(
    frame: &ComparisonFrame<T>,
    method: Method,
    nuisances: Option<&NuisanceSet<T>>,
    twfe_covariates: &[String],
    m: usize,
) -> Result<T> {
    let need = || {
        nuisances.ok_or_else(|| {
            Error::InvalidArgument(format!("{method} needs fitted nuisance models"))
        })
    };
    match method {
        Method::Twfe => estimate_twfe(frame, m, twfe_covariates),
        Method::Or => estimate_or(frame, need()?, m),
        Method::Ipw => estimate_ipw(frame, need()?, m),
        Method::Dr => estimate_dr(frame, need()?, m),
    }
}

fn build_estimate<T: Scalar>(
    frame: &ComparisonFrame<T>,
    method: Method,
    nuisances: Option<&NuisanceSet<T>>,
    twfe_covariates: &[String],
    windows: &[Window],
) -> Result<EffectEstimate<T>> {
    validate_windows(windows, frame.n_m())?;
    let per_m = (1..=frame.n_m())
        .map(|m| estimate_at(frame, method, nuisances, twfe_covariates, m))
        .collect::<Result<Vec<T>>>()?;
    let aggregates = aggregate(&per_m, windows)?;
    Ok(EffectEstimate {
        estimand: frame.estimand,
        method,
        per_m,
        aggregates,
        scale: Scale::Additive,
    })
}

/// Per-m estimates and window means for one method with given nuisances.
/// TWFE adjusts for the outcome-model covariates.
pub fn estimate_effects<T: Scalar>(
    frame: &ComparisonFrame<T>,
    nuisances: &NuisanceSet<T>,
    method: Method,
    windows: &[Window],
) -> Result<EffectEstimate<T>> {
    let twfe_covs = nuisances
        .mu
        .first()
        .map(|m| m.covariate_names.clone())
        .unwrap_or_default();
    build_estimate(frame, method, Some(nuisances), &twfe_covs, windows)
}

/// Fits nuisances once (only when some method needs them) and estimates
/// every requested method.
pub fn estimate_methods<T: Scalar>(
    frame: &ComparisonFrame<T>,
    spec: &NuisanceSpec,
    methods: &[Method],
    windows: &[Window],
) -> Result<Vec<EffectEstimate<T>>> {
    let nuisances = if methods.iter().any(|m| m.needs_nuisances()) {
        Some(fit_nuisances(frame, spec)?)
    } else {
        None
    };
    methods
        .iter()
        .map(|&method| build_estimate(frame, method, nuisances.as_ref(), &spec.mu_covariates, windows))
        .collect()
}

/// Pseudo-DiD between pre-period time 1 and pre-period time `m`, with
/// nuisances refit on the pseudo-periods.
pub fn estimate_pretrends<T: Scalar>(
    frame: &ComparisonFrame<T>,
    spec: &NuisanceSpec,
    method: Method,
    m: usize,
) -> Result<T> {
    let pseudo = frame.pretrend_frame(m)?;
    let nuisances = if method.needs_nuisances() {
        Some(fit_nuisances(&pseudo, spec)?)
    } else {
        None
    };
    estimate_at(&pseudo, method, nuisances.as_ref(), &spec.mu_covariates, 1)
}

/// Numerator and denominator of the per-m relative effect:
/// `num = E_n[R·Y_1m]`, `den = num − p̂_r·τ̂_dr(m)`.
pub fn relative_parts<T: Scalar>(
    frame: &ComparisonFrame<T>,
    nuisances: &NuisanceSet<T>,
    m: usize,
) -> Result<(T, T)> {
    let tau = estimate_dr(frame, nuisances, m)?;
    let p_r = exposed_share(frame);
    let num = frame_mean(frame, |i| {
        if frame.exposed[i] {
            frame.post[i][m - 1]
        } else {
            T::zero()
        }
    });
    Ok((num, num - p_r * tau))
}

fn checked_ratio<T: Scalar>(num: T, den: T) -> Result<T> {
    if !(den.abs() > T::lit(RATIO_EPS)) {
        return Err(Error::UnstableRatio(den.as_f64()));
    }
    Ok(num / den)
}

/// DR relative effect: exposed post mean over its DR counterfactual.
/// Windows use the ratio of window-summed numerators and denominators.
pub fn estimate_relative<T: Scalar>(
    frame: &ComparisonFrame<T>,
    nuisances: &NuisanceSet<T>,
    windows: &[Window],
) -> Result<EffectEstimate<T>> {
    validate_windows(windows, frame.n_m())?;
    let parts = (1..=frame.n_m())
        .map(|m| relative_parts(frame, nuisances, m))
        .collect::<Result<Vec<_>>>()?;
    let per_m = parts
        .iter()
        .map(|&(n, d)| checked_ratio(n, d))
        .collect::<Result<Vec<T>>>()?;
    let aggregates = windows
        .iter()
        .map(|w| {
            let (n, d) = w.members.iter().fold((T::zero(), T::zero()), |(a, b), &m| {
                (a + parts[m - 1].0, b + parts[m - 1].1)
            });
            Ok((w.name.clone(), checked_ratio(n, d)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EffectEstimate {
        estimand: frame.estimand,
        method: Method::Dr,
        per_m,
        aggregates,
        scale: Scale::Relative,
    })
}

/// Fits nuisances and produces the estimate on the requested scale.
/// The relative scale is defined for DR only.
pub fn estimate_scaled<T: Scalar>(
    frame: &ComparisonFrame<T>,
    spec: &NuisanceSpec,
    method: Method,
    scale: Scale,
    windows: &[Window],
) -> Result<EffectEstimate<T>> {
    match scale {
        Scale::Additive => Ok(estimate_methods(frame, spec, &[method], windows)?.remove(0)),
        Scale::Relative => {
            if method != Method::Dr {
                return Err(Error::InvalidArgument(format!(
                    "relative effects are computed with DR, not {method}"
                )));
            }
            let nuisances = fit_nuisances(frame, spec)?;
            estimate_relative(frame, &nuisances, windows)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nuisance::{LinearModel, LogisticModel, PropensityFit};

    fn toy_frame() -> ComparisonFrame<f64> {
        // (R, ΔY) = (1,5), (1,7), (0,2), (0,4)
        let dy = [5.0, 7.0, 2.0, 4.0];
        ComparisonFrame::from_outcomes(
            Estimand::Att,
            vec![true, true, false, false],
            dy.iter().map(|_| vec![0.0]).collect(),
            dy.iter().map(|&d| vec![d]).collect(),
            vec![vec![]; 4],
            vec![],
        )
        .unwrap()
    }

    fn constant_nuisances(mu: f64, pi: f64, n_m: usize) -> NuisanceSet<f64> {
        NuisanceSet {
            mu: (0..n_m)
                .map(|_| LinearModel {
                    coefficients: vec![mu],
                    covariate_names: vec![],
                })
                .collect(),
            pi: PropensityFit::TimeInvariant(LogisticModel::fixed(
                vec![(pi / (1.0 - pi)).ln()],
                vec![],
            )),
        }
    }

    #[test]
    fn twfe_is_difference_in_means() {
        let f: ComparisonFrame<f64> = ComparisonFrame::from_outcomes(
            Estimand::Att,
            vec![true, true, false, false],
            vec![vec![9.0], vec![11.0], vec![4.0], vec![6.0]],
            vec![vec![7.0], vec![9.0], vec![5.0], vec![7.0]],
            vec![vec![]; 4],
            vec![],
        )
        .unwrap();
        assert!((estimate_twfe(&f, 1, &[]).unwrap() + 3.0).abs() < 1e-10);
    }

    #[test]
    fn twfe_parallel_trends_is_zero() {
        let f: ComparisonFrame<f64> = ComparisonFrame::from_outcomes(
            Estimand::Atn,
            vec![true, false, true, false],
            vec![vec![1.0], vec![2.0], vec![3.0], vec![7.0]],
            vec![vec![2.5], vec![3.5], vec![4.5], vec![8.5]],
            vec![vec![]; 4],
            vec![],
        )
        .unwrap();
        assert!(estimate_twfe(&f, 1, &[]).unwrap().abs() < 1e-10);
    }

    #[test]
    fn or_example() {
        let f: ComparisonFrame<f64> = ComparisonFrame::from_outcomes(
            Estimand::Att,
            vec![true, true, false, false],
            vec![vec![0.0]; 4],
            vec![vec![5.0], vec![7.0], vec![1.0], vec![2.0]],
            vec![vec![]; 4],
            vec![],
        )
        .unwrap();
        let est = estimate_or(&f, &constant_nuisances(3.0, 0.5, 1), 1).unwrap();
        assert!((est - 3.0).abs() < 1e-12);
    }

    #[test]
    fn weight_examples() {
        let f = toy_frame();
        let wv = compute_weights(&f, &constant_nuisances(0.0, 0.5, 1), 1).unwrap();
        assert!((wv.p_r - 0.5).abs() < 1e-15);
        for (w, e) in wv.w.iter().zip([2.0, 2.0, -2.0, -2.0]) {
            assert!((w - e).abs() < 1e-12);
        }
        let wv = weights_from_propensity(&f, &[0.5, 0.5, 0.8, 0.5]).unwrap();
        assert!((wv.w[2] + 8.0).abs() < 1e-12);
    }

    #[test]
    fn nonoverlap_lists_units() {
        let f = toy_frame();
        match weights_from_propensity(&f, &[0.5, 0.5, 1.0 - 1e-7, 0.2]) {
            Err(Error::NonOverlap { units }) => assert_eq!(units, vec!["u2"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ipw_and_dr_examples() {
        let f = toy_frame();
        let ipw = estimate_ipw(&f, &constant_nuisances(0.0, 0.5, 1), 1).unwrap();
        assert!((ipw - 3.0).abs() < 1e-12);
        let dr = estimate_dr(&f, &constant_nuisances(3.0, 0.5, 1), 1).unwrap();
        assert!((dr - 3.0).abs() < 1e-12);
        let dr0 = estimate_dr(&f, &constant_nuisances(0.0, 0.5, 1), 1).unwrap();
        assert_eq!(dr0, ipw);
    }

    #[test]
    fn windows_and_presets() {
        let per_m: Vec<f64> = (1..=13).map(|m| m as f64).collect();
        let w = preset_windows(WindowPreset::Seasonal, 13).unwrap();
        let agg = aggregate(&per_m, &w).unwrap();
        assert_eq!(agg[0], ("Winter".to_string(), 2.0));
        assert_eq!(agg[3], ("Fall".to_string(), 11.5));
        assert_eq!(agg[4], ("Annual".to_string(), 7.0));
        assert!(matches!(
            preset_windows(WindowPreset::Seasonal, 12),
            Err(Error::Preset { .. })
        ));
        assert_eq!(
            aggregate(&[-2.0, -2.0, -2.0], &preset_windows(WindowPreset::Annual, 3).unwrap())
                .unwrap()[0]
                .1,
            -2.0
        );
        assert!(matches!(
            aggregate(&[1.0, 2.0], &[Window::new("bad", [3])]),
            Err(Error::Bounds { m: 3, n_m: 2 })
        ));
    }

    #[test]
    fn relative_examples() {
        // exposed post mean 5 and DR effect −2
        let f: ComparisonFrame<f64> = ComparisonFrame::from_outcomes(
            Estimand::Att,
            vec![true, true, false, false],
            vec![vec![6.0], vec![8.0], vec![1.0], vec![3.0]],
            vec![vec![4.0], vec![6.0], vec![1.0], vec![3.0]],
            vec![vec![]; 4],
            vec![],
        )
        .unwrap();
        let nuis = constant_nuisances(0.0, 0.5, 1);
        assert!((estimate_dr(&f, &nuis, 1).unwrap() + 2.0).abs() < 1e-12);
        let rel = estimate_relative(&f, &nuis, &preset_windows(WindowPreset::Annual, 1).unwrap())
            .unwrap();
        assert!((rel.per_m[0] - 5.0 / 7.0).abs() < 1e-12);
        assert!((rel.aggregate("Annual").unwrap() - 0.7143).abs() < 1e-4);

        let g: ComparisonFrame<f64> = ComparisonFrame::from_outcomes(
            Estimand::Att,
            vec![true, true, false, false],
            vec![vec![6.0], vec![8.0], vec![1.0], vec![3.0]],
            vec![vec![7.0], vec![9.0], vec![2.0], vec![4.0]],
            vec![vec![]; 4],
            vec![],
        )
        .unwrap();
        let rel = estimate_relative(&g, &nuis, &[]).unwrap();
        assert!((rel.per_m[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn relative_rejects_zero_denominator() {
        let f: ComparisonFrame<f64> = ComparisonFrame::from_outcomes(
            Estimand::Att,
            vec![true, true, false, false],
            vec![vec![0.0], vec![0.0], vec![0.0], vec![0.0]],
            vec![vec![2.0], vec![2.0], vec![0.0], vec![0.0]],
            vec![vec![]; 4],
            vec![],
        )
        .unwrap();
        assert!(matches!(
            estimate_relative(&f, &constant_nuisances(0.0, 0.5, 1), &[]),
            Err(Error::UnstableRatio(_))
        ));
    }

    #[test]
    fn pretrends_examples() {
        // exposed drift +1 per m in the pre-period, controls flat
        let exposed = vec![true, true, false, false, false];
        let pre: Vec<Vec<f64>> = exposed
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                (1..=4)
                    .map(|m| i as f64 + if r { m as f64 } else { 0.0 })
                    .collect()
            })
            .collect();
        let f: ComparisonFrame<f64> = ComparisonFrame::from_outcomes(
            Estimand::Att,
            exposed,
            pre.clone(),
            pre,
            vec![vec![]; 5],
            vec![],
        )
        .unwrap();
        let spec = NuisanceSpec::default();
        for method in Method::ALL {
            let est = estimate_pretrends(&f, &spec, method, 3).unwrap();
            assert!((est - 2.0).abs() < 1e-10, "{method}: {est}");
        }
        assert!(matches!(
            estimate_pretrends(&f, &spec, Method::Dr, 1),
            Err(Error::DegenerateComparison(1))
        ));
    }
}
