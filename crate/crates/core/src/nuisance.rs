//! Nuisance models: per-m outcome-trend regressions fit on controls and
//! propensity models for membership in the exposed group.

use serde::{Deserialize, Serialize};

use crate::error::{Error, NuisanceKind, Result};
use crate::linalg::{dot, weighted_lstsq, Matrix};
use crate::panel::ComparisonFrame;
use crate::scalar::{expit, softplus, Scalar};

const INTERCEPT: &str = "(intercept)";

fn column_name(names: &[String], j: usize) -> String {
    if j == 0 {
        INTERCEPT.to_string()
    } else {
        names
            .get(j - 1)
            .cloned()
            .unwrap_or_else(|| format!("column {j}"))
    }
}

fn check_shape<T: Scalar>(x: &Matrix<T>, n: usize, w: Option<&[T]>) -> Result<usize> {
    if x.rows() != n {
        return Err(Error::InvalidArgument(format!(
            "design has {} rows but response has {n}",
            x.rows()
        )));
    }
    if let Some(w) = w {
        if w.len() != n {
            return Err(Error::InvalidArgument("weight length mismatch".into()));
        }
    }
    let effective = match w {
        Some(w) => w.iter().filter(|&&v| v > T::zero()).count(),
        None => n,
    };
    if effective < x.cols() {
        return Err(Error::Underdetermined {
            rows: effective,
            cols: x.cols(),
        });
    }
    Ok(effective)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel<T> {
    /// Intercept first.
    pub coefficients: Vec<T>,
    pub covariate_names: Vec<String>,
}

impl<T: Scalar> LinearModel<T> {
    /// Prediction for a covariate vector without the leading 1.
    pub fn predict(&self, x: &[T]) -> T {
        self.coefficients[0] + dot(&self.coefficients[1..], x)
    }

    /// Predictions for every unit of `frame` at observation time `m`.
    pub fn predict_frame(&self, frame: &ComparisonFrame<T>, m: usize) -> Result<Vec<T>> {
        let cols = frame.covariate_indices(&self.covariate_names)?;
        Ok((0..frame.len())
            .map(|i| {
                cols.iter()
                    .zip(&self.coefficients[1..])
                    .fold(self.coefficients[0], |acc, (&j, &b)| {
                        acc + b * frame.covariate(i, j, m)
                    })
            })
            .collect())
    }
}

/// Ordinary least squares on a design whose first column is the intercept.
pub fn fit_ols<T: Scalar>(x: &Matrix<T>, y: &[T], names: &[String]) -> Result<LinearModel<T>> {
    fit_ols_weighted(x, y, None, names)
}

/// Weighted least squares; weights act as unit multiplicities.
pub fn fit_ols_weighted<T: Scalar>(
    x: &Matrix<T>,
    y: &[T],
    w: Option<&[T]>,
    names: &[String],
) -> Result<LinearModel<T>> {
    check_shape(x, y.len(), w)?;
    let coefficients = weighted_lstsq(x, y, w).map_err(|cols| Error::SingularDesign {
        columns: cols.iter().map(|&j| column_name(names, j)).collect(),
    })?;
    Ok(LinearModel {
        coefficients,
        covariate_names: names.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticOptions {
    /// Convergence threshold on the sup-norm of the score `X'(r - p)`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Coefficient-norm cap (standardized scale) beyond which separation is reported.
    pub separation_cap: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        LogisticOptions {
            tolerance: 1e-8,
            max_iterations: 100,
            separation_cap: 1e4,
        }
    }
}

impl LogisticOptions {
    pub fn for_scalar<T: Scalar>() -> Self {
        LogisticOptions {
            tolerance: T::SCORE_TOL,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel<T> {
    /// Intercept first.
    pub coefficients: Vec<T>,
    pub covariate_names: Vec<String>,
    pub converged: bool,
    pub iterations: usize,
    /// Sup-norm of the score at the returned coefficients.
    pub score_norm: T,
}

impl<T: Scalar> LogisticModel<T> {
    /// Model with fixed coefficients, e.g. a constant propensity.
    pub fn fixed(coefficients: Vec<T>, covariate_names: Vec<String>) -> Self {
        LogisticModel {
            coefficients,
            covariate_names,
            converged: true,
            iterations: 0,
            score_norm: T::zero(),
        }
    }

    pub fn predict(&self, x: &[T]) -> T {
        expit(self.coefficients[0] + dot(&self.coefficients[1..], x))
    }

    pub fn predict_frame(&self, frame: &ComparisonFrame<T>, m: usize) -> Result<Vec<T>> {
        let cols = frame.covariate_indices(&self.covariate_names)?;
        Ok((0..frame.len())
            .map(|i| {
                expit(
                    cols.iter()
                        .zip(&self.coefficients[1..])
                        .fold(self.coefficients[0], |acc, (&j, &b)| {
                            acc + b * frame.covariate(i, j, m)
                        }),
                )
            })
            .collect())
    }
}

fn log_likelihood<T: Scalar>(eta: &[T], r: &[bool], w: &[T]) -> T {
    eta.iter()
        .zip(r)
        .zip(w)
        .map(|((&e, &ri), &wi)| {
            let term = if ri { -softplus(-e) } else { -softplus(e) };
            wi * term
        })
        .sum()
}

fn score<T: Scalar>(x: &Matrix<T>, eta: &[T], r: &[bool], w: &[T]) -> Vec<T> {
    let resid: Vec<T> = eta
        .iter()
        .zip(r)
        .zip(w)
        .map(|((&e, &ri), &wi)| {
            let y = if ri { T::one() } else { T::zero() };
            wi * (y - expit(e))
        })
        .collect();
    x.t_mul_vec(&resid)
}

fn sup_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
}

/// Logistic regression by IRLS with step-halving.
///
/// The first column of `x` must be the intercept. Remaining columns are
/// centred and scaled internally; returned coefficients are on the original
/// scale.
pub fn fit_logistic<T: Scalar>(
    x: &Matrix<T>,
    r: &[bool],
    w: Option<&[T]>,
    names: &[String],
    options: &LogisticOptions,
) -> Result<LogisticModel<T>> {
    let n = r.len();
    check_shape(x, n, w)?;
    let w: Vec<T> = match w {
        Some(w) => w.to_vec(),
        None => vec![T::one(); n],
    };
    let ones = r.iter().zip(&w).filter(|(&ri, &wi)| ri && wi > T::zero()).count();
    let zeros = r.iter().zip(&w).filter(|(&ri, &wi)| !ri && wi > T::zero()).count();
    if ones == 0 || zeros == 0 {
        return Err(Error::DegenerateResponse { n: ones + zeros });
    }

    // Standardize non-intercept columns by weighted moments.
    let p = x.cols();
    let total: T = w.iter().copied().sum();
    let mut center = vec![T::zero(); p];
    let mut scale = vec![T::one(); p];
    for j in 1..p {
        let mean = (0..n).map(|i| w[i] * x.get(i, j)).sum::<T>() / total;
        let var = (0..n)
            .map(|i| w[i] * (x.get(i, j) - mean).powi(2))
            .sum::<T>()
            / total;
        center[j] = mean;
        scale[j] = if var > T::zero() { var.sqrt() } else { T::one() };
    }
    let mut z = Matrix::zeros(n, p);
    for i in 0..n {
        z.set(i, 0, T::one());
        for j in 1..p {
            z.set(i, j, (x.get(i, j) - center[j]) / scale[j]);
        }
    }
    let to_original = |b: &[T]| -> Vec<T> {
        let mut out = vec![T::zero(); p];
        out[0] = b[0];
        for j in 1..p {
            out[j] = b[j] / scale[j];
            out[0] = out[0] - b[j] * center[j] / scale[j];
        }
        out
    };

    let share = T::from_count(ones) / T::from_count(ones + zeros);
    let mut beta = vec![T::zero(); p];
    beta[0] = (share / (T::one() - share)).ln();
    let mut eta = z.mul_vec(&beta);
    let mut ll = log_likelihood(&eta, r, &w);
    let tol = T::lit(options.tolerance);
    let cap = T::lit(options.separation_cap);
    let tiny = T::lit(1e-300).max(T::min_positive_value());

    let mut iterations = 0;
    let mut converged = false;
    let mut score_norm;
    let mut best_score = T::infinity();
    let mut stalls = 0;
    loop {
        let orig = to_original(&beta);
        score_norm = sup_norm(&score(x, &x.mul_vec(&orig), r, &w));
        if score_norm < tol {
            converged = true;
            break;
        }
        if iterations >= options.max_iterations {
            break;
        }
        // at the rounding floor the score stops shrinking
        if score_norm < best_score {
            best_score = score_norm;
            stalls = 0;
        } else {
            stalls += 1;
            if stalls >= 3 {
                break;
            }
        }
        iterations += 1;

        // Newton step: weighted least squares of the working residual on Z.
        let mut work_w = Vec::with_capacity(n);
        let mut work_y = Vec::with_capacity(n);
        for i in 0..n {
            let pi = expit(eta[i]);
            let v = (pi * (T::one() - pi)).max(tiny);
            let y = if r[i] { T::one() } else { T::zero() };
            work_w.push(w[i] * v);
            work_y.push((y - pi) / v);
        }
        let step = weighted_lstsq(&z, &work_y, Some(&work_w)).map_err(|cols| {
            Error::SingularDesign {
                columns: cols.iter().map(|&j| column_name(names, j)).collect(),
            }
        })?;

        let mut t = T::one();
        let mut improved = false;
        for _ in 0..40 {
            let candidate: Vec<T> = beta.iter().zip(&step).map(|(&b, &s)| b + t * s).collect();
            let cand_eta = z.mul_vec(&candidate);
            let cand_ll = log_likelihood(&cand_eta, r, &w);
            // differences below rounding of ll are not evidence against the step
            let slack = T::epsilon() * T::lit(64.0) * ll.abs().max(T::one());
            if cand_ll.is_finite() && cand_ll >= ll - slack {
                beta = candidate;
                eta = cand_eta;
                ll = cand_ll;
                improved = true;
                break;
            }
            t = t * T::lit(0.5);
        }
        let norm = beta.iter().map(|&b| b * b).sum::<T>().sqrt();
        if norm > cap {
            return Err(Error::Separation {
                norm: norm.as_f64(),
                cap: options.separation_cap,
            });
        }
        if !improved {
            break;
        }
    }

    // A finite maximum exists only if no hyperplane classifies every unit
    // correctly; if the fit does, the likelihood has no maximum.
    let separated = eta
        .iter()
        .zip(r)
        .zip(&w)
        .filter(|(_, &wi)| wi > T::zero())
        .all(|((&e, &ri), _)| if ri { e > T::zero() } else { e < T::zero() });
    if separated {
        let norm = beta.iter().map(|&b| b * b).sum::<T>().sqrt();
        return Err(Error::Separation {
            norm: norm.as_f64(),
            cap: options.separation_cap,
        });
    }

    Ok(LogisticModel {
        coefficients: to_original(&beta),
        covariate_names: names.to_vec(),
        converged,
        iterations,
        score_norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsMode {
    /// One propensity model fit on the covariates at m = 1 and used for every m.
    #[default]
    TimeInvariant,
    /// A separate propensity model for each m.
    PerM,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NuisanceSpec {
    pub ps_mode: PsMode,
    pub mu_covariates: Vec<String>,
    pub pi_covariates: Vec<String>,
    #[serde(default)]
    pub logistic: LogisticOptions,
}

impl NuisanceSpec {
    pub fn new(ps_mode: PsMode, mu_covariates: &[&str], pi_covariates: &[&str]) -> Self {
        NuisanceSpec {
            ps_mode,
            mu_covariates: mu_covariates.iter().map(|s| s.to_string()).collect(),
            pi_covariates: pi_covariates.iter().map(|s| s.to_string()).collect(),
            logistic: LogisticOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PropensityFit<T> {
    TimeInvariant(LogisticModel<T>),
    PerM(Vec<LogisticModel<T>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceSet<T> {
    /// `mu[m - 1]`, fit on controls only.
    pub mu: Vec<LinearModel<T>>,
    pub pi: PropensityFit<T>,
}

impl<T: Scalar> NuisanceSet<T> {
    pub fn propensity_model(&self, m: usize) -> &LogisticModel<T> {
        match &self.pi {
            PropensityFit::TimeInvariant(model) => model,
            PropensityFit::PerM(models) => &models[m - 1],
        }
    }

    /// μ̂_{Δ,m}(X_i) for every unit of the frame.
    pub fn mu_hat(&self, frame: &ComparisonFrame<T>, m: usize) -> Result<Vec<T>> {
        frame.check_m(m)?;
        let model = self.mu.get(m - 1).ok_or(Error::Bounds {
            m,
            n_m: self.mu.len(),
        })?;
        model.predict_frame(frame, m)
    }

    /// π̂(X_i) for every unit of the frame.
    pub fn pi_hat(&self, frame: &ComparisonFrame<T>, m: usize) -> Result<Vec<T>> {
        frame.check_m(m)?;
        match &self.pi {
            PropensityFit::TimeInvariant(model) => model.predict_frame(frame, 1),
            PropensityFit::PerM(models) => models
                .get(m - 1)
                .ok_or(Error::Bounds {
                    m,
                    n_m: models.len(),
                })?
                .predict_frame(frame, m),
        }
    }
}

fn fit_mu<T: Scalar>(
    frame: &ComparisonFrame<T>,
    cols: &[usize],
    names: &[String],
    m: usize,
) -> Result<LinearModel<T>> {
    let rows: Vec<usize> = (0..frame.len()).filter(|&i| !frame.exposed[i]).collect();
    let x = frame.design(m, cols, &rows);
    let y: Vec<T> = rows.iter().map(|&i| frame.delta_y(i, m)).collect();
    let w: Vec<T> = rows.iter().map(|&i| frame.weights[i]).collect();
    fit_ols_weighted(&x, &y, Some(&w), names)
}

fn fit_pi<T: Scalar>(
    frame: &ComparisonFrame<T>,
    cols: &[usize],
    names: &[String],
    m: usize,
    options: &LogisticOptions,
) -> Result<LogisticModel<T>> {
    let rows: Vec<usize> = (0..frame.len()).collect();
    let x = frame.design(m, cols, &rows);
    fit_logistic(&x, &frame.exposed, Some(&frame.weights), names, options)
}

/// Fits μ_{Δ,m} for every m and the propensity model(s).
pub fn fit_nuisances<T: Scalar>(
    frame: &ComparisonFrame<T>,
    spec: &NuisanceSpec,
) -> Result<NuisanceSet<T>> {
    let mu_cols = frame.covariate_indices(&spec.mu_covariates)?;
    let pi_cols = frame.covariate_indices(&spec.pi_covariates)?;
    let mu = (1..=frame.n_m())
        .map(|m| {
            fit_mu(frame, &mu_cols, &spec.mu_covariates, m)
                .map_err(|e| e.in_nuisance(NuisanceKind::OutcomeTrend, m))
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = |m: usize| {
        fit_pi(frame, &pi_cols, &spec.pi_covariates, m, &spec.logistic)
            .map_err(|e| e.in_nuisance(NuisanceKind::Propensity, m))
    };
    let pi = match spec.ps_mode {
        PsMode::TimeInvariant => PropensityFit::TimeInvariant(fit(1)?),
        PsMode::PerM => {
            PropensityFit::PerM((1..=frame.n_m()).map(fit).collect::<Result<Vec<_>>>()?)
        }
    };
    Ok(NuisanceSet { mu, pi })
}
