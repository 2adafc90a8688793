//! Data-generating process for the simulation study.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::scenario::{CovariateSet, SimulationScenario};
use crate::panel::{ExposureStatus, PanelDataset, UnitId, UnitRecord};
use crate::scalar::expit;

pub const COVARIATE_NAMES: [&str; 4] = ["x1", "x2", "x3", "x4"];
/// Stratum labels of the four simulated groups.
pub const ATT_TREATED: &str = "att_treated";
pub const ATT_CONTROL: &str = "att_control";
pub const ATN_NEIGHBOR: &str = "atn_neighbor";
pub const ATN_CONTROL: &str = "atn_control";

const WALK_DRIFT: f64 = 0.25;
const WALK_VAR: f64 = 0.25;
const DISTANCE_VAR: f64 = 0.05;
const NOISE_VAR: f64 = 0.5;

/// Kang–Schafer transform of one original covariate row (X4 at one m).
pub fn observed_from_original(x: [f64; 4]) -> [f64; 4] {
    [
        (0.6 + x[0] * x[2] / 25.0).powi(3),
        10.0 + x[1] / (1.0 + x[2].exp()),
        (0.5 * x[2]).exp(),
        (20.0 + x[1] * x[3]).powi(2),
    ]
}

/// Original and observed covariates; `x4` entries are indexed by m − 1.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateDraw {
    pub original: Vec<[f64; 3]>,
    pub original_x4: Vec<Vec<f64>>,
    pub observed: Vec<[f64; 3]>,
    pub observed_x4: Vec<Vec<f64>>,
}

impl CovariateDraw {
    pub fn len(&self) -> usize {
        self.original.len()
    }

    pub fn is_empty(&self) -> bool {
        self.original.is_empty()
    }

    pub fn n_m(&self) -> usize {
        self.original_x4.first().map_or(0, Vec::len)
    }

    /// Row `i` of the chosen set at observation time `m`.
    pub fn row(&self, set: CovariateSet, i: usize, m: usize) -> [f64; 4] {
        let (c, x4) = match set {
            CovariateSet::Original => (&self.original[i], &self.original_x4[i]),
            CovariateSet::Observed => (&self.observed[i], &self.observed_x4[i]),
        };
        [c[0], c[1], c[2], x4[m - 1]]
    }

    /// Rows of `set` at every m, centred and scaled by the sample moments of
    /// the m = 1 slice. Indexed `[m - 1][i]`.
    pub fn standardized(&self, set: CovariateSet) -> Vec<Vec<[f64; 4]>> {
        let n = self.len() as f64;
        let base: Vec<[f64; 4]> = (0..self.len()).map(|i| self.row(set, i, 1)).collect();
        let mut mean = [0.0; 4];
        let mut sd = [0.0; 4];
        for j in 0..4 {
            mean[j] = base.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = base.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
            sd[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        (1..=self.n_m())
            .map(|m| {
                (0..self.len())
                    .map(|i| {
                        let r = self.row(set, i, m);
                        std::array::from_fn(|j| (r[j] - mean[j]) / sd[j])
                    })
                    .collect()
            })
            .collect()
    }
}

/// X^(orig) ~ N(0, I_4) with X4 following a drifting random walk over m,
/// plus the observed transform.
pub fn gen_covariates<R: Rng + ?Sized>(n: usize, n_m: usize, rng: &mut R) -> CovariateDraw {
    let step = Normal::new(WALK_DRIFT, WALK_VAR.sqrt()).expect("valid normal");
    let mut original = Vec::with_capacity(n);
    let mut original_x4 = Vec::with_capacity(n);
    let mut observed = Vec::with_capacity(n);
    let mut observed_x4 = Vec::with_capacity(n);
    for _ in 0..n {
        let x: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let mut walk = Vec::with_capacity(n_m);
        walk.push(x[3]);
        for m in 1..n_m {
            let prev = walk[m - 1];
            walk.push(prev + step.sample(rng));
        }
        let obs1 = observed_from_original(x);
        observed_x4.push(
            walk.iter()
                .map(|&x4| observed_from_original([x[0], x[1], x[2], x4])[3])
                .collect(),
        );
        original.push([x[0], x[1], x[2]]);
        observed.push([obs1[0], obs1[1], obs1[2]]);
        original_x4.push(walk);
    }
    CovariateDraw {
        original,
        original_x4,
        observed,
        observed_x4,
    }
}

/// Bounds a distance draw to [0.1, 0.9].
pub fn clamp_distance(d: f64) -> f64 {
    d.clamp(0.1, 0.9)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exposures {
    /// True for units in the ATT comparison.
    pub att_arm: Vec<bool>,
    pub status: Vec<ExposureStatus>,
    /// Distance to the border for neighbor units.
    pub distance: Vec<Option<f64>>,
}

fn linear_predictor(beta: &[f64], x: &[f64; 4]) -> f64 {
    beta[0] + beta[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
}

/// Splits units into the two comparisons and draws exposure within each.
/// `x_a` holds the standardized exposure covariates at m = 1.
pub fn gen_exposures<R: Rng + ?Sized>(
    draw: &CovariateDraw,
    x_a: &[[f64; 4]],
    scenario: &SimulationScenario,
    rng: &mut R,
) -> Exposures {
    let n = draw.len();
    let n_att = (scenario.att_share * n as f64).round() as usize;
    let noise = Normal::new(0.0, DISTANCE_VAR.sqrt()).expect("valid normal");
    let mut att_arm = Vec::with_capacity(n);
    let mut status = Vec::with_capacity(n);
    let mut distance = Vec::with_capacity(n);
    for i in 0..n {
        let in_att = i < n_att;
        let beta = if in_att { &scenario.beta_t } else { &scenario.beta_n };
        let exposed = rng.gen::<f64>() < expit(linear_predictor(beta, &x_a[i]));
        let s = match (in_att, exposed) {
            (true, true) => ExposureStatus::TREATED,
            (false, true) => ExposureStatus::NEIGHBOR,
            _ => ExposureStatus::CONTROL,
        };
        let d = if s == ExposureStatus::NEIGHBOR {
            let o = draw.row(CovariateSet::Observed, i, 1);
            let centre = 1.0 / (1.0 + (o[1] + o[2] + o[3]).exp());
            Some(clamp_distance(centre + noise.sample(rng)))
        } else {
            None
        };
        att_arm.push(in_att);
        status.push(s);
        distance.push(d);
    }
    Exposures {
        att_arm,
        status,
        distance,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedTruth {
    pub att_true: f64,
    pub atn_true: f64,
}

/// ATN truth: mean over m of τ*_m times the neighbor mean of (1 − D).
pub fn atn_truth(tau_atn_star_m: &[f64], distance: &[Option<f64>]) -> f64 {
    let d: Vec<f64> = distance.iter().flatten().copied().collect();
    if d.is_empty() {
        return f64::NAN;
    }
    let share = d.iter().map(|x| 1.0 - x).sum::<f64>() / d.len() as f64;
    tau_atn_star_m.iter().map(|t| t * share).sum::<f64>() / tau_atn_star_m.len() as f64
}

#[derive(Debug, Clone)]
pub struct SimulatedPanel {
    pub dataset: PanelDataset<f64>,
    pub truth: SimulatedTruth,
    pub exposures: Exposures,
}

/// Noise switches for deterministic checks of the outcome model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeNoise {
    pub unit_intercepts: bool,
    pub errors: bool,
}

impl Default for OutcomeNoise {
    fn default() -> Self {
        OutcomeNoise {
            unit_intercepts: true,
            errors: true,
        }
    }
}

/// Outcomes Y_itm = 20 + α_i + α_g + γ_m + t·γ_t + λ_tm·ΣX^(μ)_m
/// + t·(τ_att,m·1[treated] + τ*_atn,m·1[neighbor]·(1 − D)) + ε.
pub fn gen_outcomes<R: Rng + ?Sized>(
    scenario: &SimulationScenario,
    draw: &CovariateDraw,
    x_mu: &[Vec<[f64; 4]>],
    exposures: &Exposures,
    noise: OutcomeNoise,
    rng: &mut R,
) -> (PanelDataset<f64>, SimulatedTruth) {
    let n = draw.len();
    let n_m = scenario.n_m;
    let eps = Normal::new(0.0, NOISE_VAR.sqrt()).expect("valid normal");
    let mut units = Vec::with_capacity(n);
    for i in 0..n {
        let status = exposures.status[i];
        let in_att = exposures.att_arm[i];
        let (alpha_g, stratum) = match (in_att, status == ExposureStatus::CONTROL) {
            (true, false) => (scenario.alpha_group.att_treated, ATT_TREATED),
            (true, true) => (scenario.alpha_group.att_control, ATT_CONTROL),
            (false, false) => (scenario.alpha_group.atn_neighbor, ATN_NEIGHBOR),
            (false, true) => (scenario.alpha_group.atn_control, ATN_CONTROL),
        };
        let alpha_i: f64 = if noise.unit_intercepts {
            rng.sample(StandardNormal)
        } else {
            0.0
        };
        let mut outcomes = [Vec::with_capacity(n_m), Vec::with_capacity(n_m)];
        for (t, out) in outcomes.iter_mut().enumerate() {
            let tf = t as f64;
            for m in 1..=n_m {
                let lambda = scenario.lambda_0m[m - 1] * (1.0 + tf);
                let confounding: f64 = lambda * x_mu[m - 1][i].iter().sum::<f64>();
                let effect = if status == ExposureStatus::TREATED {
                    scenario.tau_att_m[m - 1]
                } else if status == ExposureStatus::NEIGHBOR {
                    scenario.tau_atn_star_m[m - 1] * (1.0 - exposures.distance[i].unwrap_or(0.0))
                } else {
                    0.0
                };
                let e = if noise.errors { eps.sample(rng) } else { 0.0 };
                out.push(
                    20.0 + alpha_i
                        + alpha_g
                        + scenario.gamma_m[m - 1]
                        + tf * scenario.gamma_t
                        + confounding
                        + tf * effect
                        + e,
                );
            }
        }
        let obs = draw.row(CovariateSet::Observed, i, 1);
        units.push(UnitRecord {
            id: UnitId::new(format!("u{i}")),
            stratum: stratum.into(),
            exposure: status,
            covariates: obs.to_vec(),
            varying: draw.observed_x4[i].clone(),
            outcomes,
            labels: Vec::new(),
            weight: 1.0,
        });
    }
    let dataset = PanelDataset::new(
        units,
        n_m,
        COVARIATE_NAMES.iter().map(|s| s.to_string()).collect(),
        Some(3),
        Vec::new(),
    )
    .expect("generated panel is consistent");
    let truth = SimulatedTruth {
        att_true: scenario.tau_att_m.iter().sum::<f64>() / n_m as f64,
        atn_true: atn_truth(&scenario.tau_atn_star_m, &exposures.distance),
    };
    (dataset, truth)
}

/// One full draw from the scenario.
pub fn simulate<R: Rng + ?Sized>(scenario: &SimulationScenario, rng: &mut R) -> SimulatedPanel {
    simulate_with(scenario, OutcomeNoise::default(), rng)
}

pub fn simulate_with<R: Rng + ?Sized>(
    scenario: &SimulationScenario,
    noise: OutcomeNoise,
    rng: &mut R,
) -> SimulatedPanel {
    let draw = gen_covariates(scenario.n, scenario.n_m, rng);
    let x_a = draw.standardized(scenario.exposure_covariates);
    let x_mu = draw.standardized(scenario.outcome_covariates);
    let exposures = gen_exposures(&draw, &x_a[0], scenario, rng);
    let (dataset, truth) = gen_outcomes(scenario, &draw, &x_mu, &exposures, noise, rng);
    SimulatedPanel {
        dataset,
        truth,
        exposures,
    }
}

/// Units of one comparison arm (ATT: treated and ATT controls; ATN:
/// neighbors and ATN controls).
pub fn arm(dataset: &PanelDataset<f64>, estimand: crate::panel::Estimand) -> PanelDataset<f64> {
    let prefix = match estimand {
        crate::panel::Estimand::Att => "att_",
        crate::panel::Estimand::Atn => "atn_",
    };
    dataset.filter(|u| u.stratum.starts_with(prefix))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::rng_stream;
    use crate::panel::Estimand;

    #[test]
    fn transform_examples() {
        let z = observed_from_original([0.0; 4]);
        assert!((z[0] - 0.216).abs() < 1e-12);
        assert_eq!([z[1], z[2], z[3]], [10.0, 1.0, 400.0]);
        let x = observed_from_original([0.0, 2.0, 0.0, 1.0]);
        assert_eq!(x[1], 11.0);
        assert_eq!(x[3], 484.0);
    }

    #[test]
    fn walk_increments_have_drift() {
        let draw = gen_covariates(100_000, 2, &mut rng_stream(5, 0));
        let mean = draw
            .original_x4
            .iter()
            .map(|w| w[1] - w[0])
            .sum::<f64>()
            / 100_000.0;
        assert!((mean - 0.25).abs() < 0.01, "{mean}");
    }

    #[test]
    fn zero_beta_gives_even_split_and_arm_size() {
        let mut s = SimulationScenario::preset("2a").unwrap();
        s.n = 100_000;
        s.beta_t = vec![0.0; 5];
        let mut rng = rng_stream(1, 1);
        let draw = gen_covariates(s.n, s.n_m, &mut rng);
        let x_a = draw.standardized(s.exposure_covariates);
        let e = gen_exposures(&draw, &x_a[0], &s, &mut rng);
        let arm_size = e.att_arm.iter().filter(|&&a| a).count();
        assert_eq!(arm_size, (0.43_f64 * 100_000.0).round() as usize);
        let treated = e
            .status
            .iter()
            .filter(|&&st| st == ExposureStatus::TREATED)
            .count();
        assert!((treated as f64 / arm_size as f64 - 0.5).abs() < 0.01);
        assert!(e
            .distance
            .iter()
            .flatten()
            .all(|&d| (0.1..=0.9).contains(&d)));
    }

    #[test]
    fn clamp_bounds() {
        assert_eq!(clamp_distance(0.95), 0.9);
        assert_eq!(clamp_distance(-0.3), 0.1);
        assert_eq!(clamp_distance(0.5), 0.5);
    }

    #[test]
    fn deterministic_skeleton_recovers_att() {
        let mut s = SimulationScenario::preset("3a").unwrap();
        s.lambda_0m = vec![0.0; s.n_m];
        s.tau_att_m = vec![-2.0, -1.0, -3.0, -2.5];
        let noise = OutcomeNoise {
            unit_intercepts: false,
            errors: false,
        };
        let sim = simulate_with(&s, noise, &mut rng_stream(3, 0));
        let units = sim.dataset.units();
        let treated = units
            .iter()
            .find(|u| u.exposure == ExposureStatus::TREATED)
            .unwrap();
        let control = units
            .iter()
            .find(|u| &*u.stratum == ATT_CONTROL)
            .unwrap();
        for m in 0..s.n_m {
            let dt = treated.outcomes[1][m] - treated.outcomes[0][m];
            let dc = control.outcomes[1][m] - control.outcomes[0][m];
            assert!((dt - dc - s.tau_att_m[m]).abs() < 1e-12);
        }
    }

    #[test]
    fn truth_bookkeeping() {
        let s = SimulationScenario::preset("2b").unwrap();
        let sim = simulate(&s, &mut rng_stream(77, 0));
        assert_eq!(sim.truth.att_true, -2.0);
        let d: Vec<f64> = sim.exposures.distance.iter().flatten().copied().collect();
        let brute = d.iter().map(|x| 1.0 - x).sum::<f64>() / d.len() as f64;
        assert!((sim.truth.atn_true - brute).abs() < 1e-12);
        let att = arm(&sim.dataset, Estimand::Att);
        let atn = arm(&sim.dataset, Estimand::Atn);
        assert_eq!(att.len(), 860);
        assert_eq!(att.len() + atn.len(), 2000);
    }
}
