//! Bias of the covariate-interacted TWFE regression under effect
//! heterogeneity in a covariate.
//!
//! X ~ N(0, 1), A ~ Bernoulli(expit(0.5 − 0.5X)),
//! Y_it ~ N(10 + t + 2A + 2X + tX + 4·t·A·θ, 0.1) with θ = 1, or
//! θ = 1 + 1[X ≥ 0.5] in the heterogeneous case. The regression is
//! Y ~ 1 + X + tX + t + A + tA and the tA coefficient estimates the effect.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::inference::rng_stream;
use crate::linalg::Matrix;
use crate::nuisance::fit_ols;
use crate::scalar::expit;

const NOISE_VAR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemoDraw {
    pub estimate: f64,
    /// 4 in the homogeneous case, 4 + P̂(X ≥ 0.5 | A = 1) otherwise.
    pub truth: f64,
}

/// One simulated sample and its TWFE estimate.
pub fn twfe_demo_draw<R: Rng + ?Sized>(n: usize, heterogeneous: bool, rng: &mut R) -> Result<DemoDraw> {
    let eps = Normal::new(0.0, NOISE_VAR.sqrt()).expect("valid normal");
    let mut x_mat = Matrix::zeros(2 * n, 6);
    let mut y = vec![0.0; 2 * n];
    let (mut treated, mut treated_high) = (0usize, 0usize);
    for i in 0..n {
        let x: f64 = rng.sample(StandardNormal);
        let a = if rng.gen::<f64>() < expit(0.5 - 0.5 * x) { 1.0 } else { 0.0 };
        let high = x >= 0.5;
        let theta = if heterogeneous && high { 2.0 } else { 1.0 };
        if a == 1.0 {
            treated += 1;
            treated_high += high as usize;
        }
        for t in 0..2 {
            let tf = t as f64;
            let row = t * n + i;
            y[row] = 10.0 + tf + 2.0 * a + 2.0 * x + tf * x + 4.0 * tf * a * theta + eps.sample(rng);
            for (c, v) in [1.0, x, tf * x, tf, a, tf * a].into_iter().enumerate() {
                x_mat.set(row, c, v);
            }
        }
    }
    if treated == 0 || treated == n {
        return Err(Error::InvalidArgument("demo sample has a single treatment arm".into()));
    }
    let names: Vec<String> = ["x", "t:x", "t", "a", "t:a"].iter().map(|s| s.to_string()).collect();
    let fit = fit_ols(&x_mat, &y, &names)?;
    let truth = if heterogeneous {
        4.0 + treated_high as f64 / treated as f64
    } else {
        4.0
    };
    Ok(DemoDraw {
        estimate: fit.coefficients[5],
        truth,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoReport {
    pub heterogeneous: bool,
    pub n: usize,
    pub replicates: usize,
    pub mean_estimate: f64,
    pub mean_truth: f64,
    /// 100 · mean((τ̂ − truth) / truth).
    pub bias_pct: f64,
}

pub fn twfe_heterogeneity_demo(
    n: usize,
    replicates: usize,
    heterogeneous: bool,
    seed: u64,
) -> Result<DemoReport> {
    if n < 100 {
        return Err(Error::InvalidArgument("demo needs n >= 100".into()));
    }
    if replicates == 0 {
        return Err(Error::InvalidArgument("demo needs at least one replicate".into()));
    }
    let stream_base = if heterogeneous { 1u64 << 32 } else { 0 };
    let draws = (0..replicates)
        .into_par_iter()
        .map(|r| twfe_demo_draw(n, heterogeneous, &mut rng_stream(seed, stream_base + r as u64)))
        .collect::<Result<Vec<_>>>()?;
    let k = replicates as f64;
    Ok(DemoReport {
        heterogeneous,
        n,
        replicates,
        mean_estimate: draws.iter().map(|d| d.estimate).sum::<f64>() / k,
        mean_truth: draws.iter().map(|d| d.truth).sum::<f64>() / k,
        bias_pct: 100.0 * draws.iter().map(|d| (d.estimate - d.truth) / d.truth).sum::<f64>() / k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn homogeneous_is_unbiased_heterogeneous_is_not() {
        let hom = twfe_heterogeneity_demo(4000, 10, false, 1).unwrap();
        assert!(hom.bias_pct.abs() < 0.5, "{hom:?}");
        let het = twfe_heterogeneity_demo(4000, 10, true, 1).unwrap();
        assert!(het.bias_pct > 6.0, "{het:?}");
    }

    #[test]
    fn heterogeneous_truth_matches_monte_carlo_probability() {
        // P(X >= 0.5 | A = 1) by direct simulation of the assignment model
        let mut rng = rng_stream(11, 0);
        let (mut a1, mut hi) = (0usize, 0usize);
        for _ in 0..400_000 {
            let x: f64 = rng.sample(StandardNormal);
            if rng.gen::<f64>() < expit(0.5 - 0.5 * x) {
                a1 += 1;
                hi += (x >= 0.5) as usize;
            }
        }
        let p = hi as f64 / a1 as f64;
        let report = twfe_heterogeneity_demo(10_000, 20, true, 5).unwrap();
        assert!((report.mean_truth - (4.0 + p)).abs() < 0.005, "{} vs {}", report.mean_truth, 4.0 + p);
    }

    #[test]
    fn small_n_rejected() {
        assert!(twfe_heterogeneity_demo(50, 2, false, 0).is_err());
    }
}
