//! Proximity subgroups: "available" traffic and sales proxies for neighbor
//! zones, k-means grouping, and effects on filtered exposed groups.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;

use crate::error::{Error, Result};
use crate::estimators::{estimate_effects, estimate_relative, EffectEstimate, Method, Scale, Window};
use crate::inference::{estimate_with_ci, rng_stream, BootstrapSpec, CiKind, EffectIntervals};
use crate::nuisance::{fit_nuisances, NuisanceSpec};
use crate::panel::{make_comparison, Estimand, ExposureStatus, PanelDataset, UnitRecord};
use crate::scalar::Scalar;

/// Exposed-group size below which subgroup intervals are flagged as unreliable.
pub const SMALL_SUBGROUP: usize = 15;

/// Measures of one taxed zone.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneMeasure<T> {
    pub zone: String,
    pub population: T,
    pub yty_diff: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxyMeasures<T> {
    pub available_traffic: T,
    pub available_sales: T,
}

/// Each taxed zone splits its measures evenly over the neighbor zones it
/// touches; a neighbor zone's proxy is the sum of the shares it receives.
/// Returns one proxy per entry of `neighbors`, in order.
pub fn compute_proxies<T: Scalar>(
    taxed: &[ZoneMeasure<T>],
    edges: &[(String, String)],
    neighbors: &[String],
) -> Result<Vec<ProxyMeasures<T>>> {
    let mut adjacency: HashMap<&str, BTreeSet<&str>> = HashMap::new();
    for (t, n) in edges {
        adjacency.entry(t.as_str()).or_default().insert(n.as_str());
    }
    let mut totals: HashMap<&str, (T, T)> = HashMap::new();
    for z in taxed {
        let touched = adjacency
            .get(z.zone.as_str())
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::DegenerateAdjacency(z.zone.clone()))?;
        let degree = T::from_count(touched.len());
        for &n in touched {
            let e = totals.entry(n).or_insert((T::zero(), T::zero()));
            e.0 = e.0 + z.population / degree;
            e.1 = e.1 + z.yty_diff / degree;
        }
    }
    Ok(neighbors
        .iter()
        .map(|n| {
            let (a, b) = totals.get(n.as_str()).copied().unwrap_or((T::zero(), T::zero()));
            ProxyMeasures {
                available_traffic: a,
                available_sales: b,
            }
        })
        .collect())
}

/// Column-wise z-scores; constant columns are only centred.
pub fn standardize_points<T: Scalar>(points: &[Vec<T>]) -> Vec<Vec<T>> {
    if points.is_empty() {
        return Vec::new();
    }
    let d = points[0].len();
    let n = T::from_count(points.len());
    let mut out = points.to_vec();
    for j in 0..d {
        let mean = points.iter().map(|p| p[j]).sum::<T>() / n;
        let sd = (points.iter().map(|p| (p[j] - mean).powi(2)).sum::<T>() / n).sqrt();
        let sd = if sd > T::zero() { sd } else { T::one() };
        for p in out.iter_mut() {
            p[j] = (p[j] - mean) / sd;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment<T> {
    pub labels: Vec<usize>,
    pub centers: Vec<Vec<T>>,
    pub inertia: T,
    /// Inertia after each assignment step of the selected run.
    pub trace: Vec<T>,
}

impl<T: Scalar> ClusterAssignment<T> {
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.centers.len()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

fn nearest<T: Scalar>(p: &[T], centers: &[Vec<T>]) -> (usize, T) {
    let mut best = (0, sq_dist(p, &centers[0]));
    for (c, center) in centers.iter().enumerate().skip(1) {
        let d = sq_dist(p, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init<T: Scalar, R: Rng + ?Sized>(points: &[Vec<T>], k: usize, rng: &mut R) -> Vec<Vec<T>> {
    let n = points.len();
    let mut centers = vec![points[rng.gen_range(0..n)].clone()];
    let mut d2: Vec<T> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: T = d2.iter().copied().sum();
        let pick = if total > T::zero() {
            let mut u = T::lit(rng.gen::<f64>()) * total;
            let mut idx = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > T::zero() && u < d {
                    idx = i;
                    break;
                }
                u = u - d;
            }
            if d2[idx] == T::zero() {
                idx = d2.iter().rposition(|&d| d > T::zero()).unwrap_or(idx);
            }
            idx
        } else {
            // all remaining points coincide with chosen centers
            rng.gen_range(0..n)
        };
        centers.push(points[pick].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &points[pick]));
        }
    }
    centers
}

fn lloyd<T: Scalar>(points: &[Vec<T>], mut centers: Vec<Vec<T>>, max_iter: usize) -> ClusterAssignment<T> {
    let n = points.len();
    let k = centers.len();
    let d = points[0].len();
    let mut labels = vec![usize::MAX; n];
    let mut trace = Vec::new();
    for _ in 0..max_iter {
        let mut changed = false;
        let mut inertia = T::zero();
        for (i, p) in points.iter().enumerate() {
            let (c, dist) = nearest(p, &centers);
            inertia = inertia + dist;
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }
        trace.push(inertia);
        if !changed {
            break;
        }
        let mut sums = vec![vec![T::zero(); d]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, &v) in sums[l].iter_mut().zip(p) {
                *s = *s + v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let m = T::from_count(counts[c]);
                centers[c] = sums[c].iter().map(|&s| s / m).collect();
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // reseed an empty cluster at the point farthest from its center
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(&points[a], &centers[labels[a]]);
                        let db = sq_dist(&points[b], &centers[labels[b]]);
                        da.partial_cmp(&db).expect("finite distances")
                    })
                    .expect("non-empty");
                centers[c] = points[far].clone();
                counts[c] = 1;
            }
        }
    }
    let inertia = *trace.last().expect("at least one assignment");
    ClusterAssignment {
        labels,
        centers,
        inertia,
        trace,
    }
}

/// Lloyd's algorithm from `restarts` k-means++ initializations; the run with
/// the smallest inertia wins.
pub fn kmeans<T: Scalar>(
    points: &[Vec<T>],
    k: usize,
    seed: u64,
    restarts: usize,
) -> Result<ClusterAssignment<T>> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::InfeasibleClustering { k, n });
    }
    let d = points[0].len();
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::InvalidArgument("points have different dimensions".into()));
    }
    let mut best: Option<ClusterAssignment<T>> = None;
    for r in 0..restarts.max(1) {
        let mut rng = rng_stream(seed, r as u64);
        let run = lloyd(points, plus_plus_init(points, k, &mut rng), 300);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Subgroup result with optional intervals and warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgroupEstimate<T> {
    pub estimate: EffectEstimate<T>,
    pub intervals: Option<EffectIntervals<T>>,
    pub exposed: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubgroupOptions {
    pub estimand: Estimand,
    pub method: Method,
    pub scale: Scale,
    pub windows: Vec<Window>,
    pub nuisance: NuisanceSpec,
    pub ci: CiKind,
    pub bootstrap: BootstrapSpec,
    /// Use nuisances fit on the full comparison instead of refitting on the subgroup.
    pub hold_nuisances: bool,
}

/// Keeps the exposed units selected by `keep` and every control unit.
pub fn filter_exposed<T: Scalar>(
    dataset: &PanelDataset<T>,
    estimand: Estimand,
    keep: impl Fn(&UnitRecord<T>) -> bool,
) -> PanelDataset<T> {
    let target = estimand.exposed_status();
    dataset.filter(|u| u.exposure != target || keep(u))
}

/// Effect on the exposed units selected by `keep`, against the full control group.
pub fn estimate_subgroup<T: Scalar>(
    dataset: &PanelDataset<T>,
    keep: impl Fn(&UnitRecord<T>) -> bool,
    options: &SubgroupOptions,
) -> Result<SubgroupEstimate<T>> {
    let sub = filter_exposed(dataset, options.estimand, keep);
    let target = options.estimand.exposed_status();
    let exposed = sub.units().iter().filter(|u| u.exposure == target).count();
    let mut warnings = Vec::new();
    if exposed < SMALL_SUBGROUP {
        warnings.push(format!(
            "subgroup has only {exposed} exposed units (< {SMALL_SUBGROUP}); intervals may be wide"
        ));
    }
    if options.hold_nuisances {
        if options.ci != CiKind::None {
            return Err(Error::InvalidArgument(
                "held nuisances are supported for point estimates only".into(),
            ));
        }
        let full = make_comparison(dataset, options.estimand)?;
        let nuisances = fit_nuisances(&full, &options.nuisance)?;
        let frame = make_comparison(&sub, options.estimand)?;
        let estimate = match options.scale {
            Scale::Additive => estimate_effects(&frame, &nuisances, options.method, &options.windows)?,
            Scale::Relative => estimate_relative(&frame, &nuisances, &options.windows)?,
        };
        return Ok(SubgroupEstimate {
            estimate,
            intervals: None,
            exposed,
            warnings,
        });
    }
    let (estimate, intervals) = estimate_with_ci(
        &sub,
        options.estimand,
        options.method,
        &options.nuisance,
        options.scale,
        &options.windows,
        options.ci,
        &options.bootstrap,
    )?;
    Ok(SubgroupEstimate {
        estimate,
        intervals,
        exposed,
        warnings,
    })
}

/// Distinct values of a label column among the estimand's exposed units.
pub fn exposed_label_values<T: Scalar>(
    dataset: &PanelDataset<T>,
    estimand: Estimand,
    label: usize,
) -> Vec<String> {
    let target: ExposureStatus = estimand.exposed_status();
    dataset
        .units()
        .iter()
        .filter(|u| u.exposure == target)
        .map(|u| u.labels[label].clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}
