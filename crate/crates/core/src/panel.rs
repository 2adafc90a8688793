//! Long-format panel data under a binary exposure mapping.
//!
//! A unit's exposure is the pair (own treatment, adjacency exposure). Units
//! that are taxed themselves are `(1,0)`, untaxed units next to a taxed
//! region are `(0,1)`, and everything else is `(0,0)`. The combination
//! `(1,1)` does not occur and is rejected.
//!
//! Outcomes are indexed by treatment period `t ∈ {0,1}` and observation time
//! `m ∈ 1..=n_m` within each period.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExposureStatus {
    own_treatment: bool,
    adjacency_exposure: bool,
}

impl ExposureStatus {
    pub const TREATED: ExposureStatus = ExposureStatus {
        own_treatment: true,
        adjacency_exposure: false,
    };
    pub const NEIGHBOR: ExposureStatus = ExposureStatus {
        own_treatment: false,
        adjacency_exposure: true,
    };
    pub const CONTROL: ExposureStatus = ExposureStatus {
        own_treatment: false,
        adjacency_exposure: false,
    };

    pub fn new(own_treatment: bool, adjacency_exposure: bool) -> Result<Self> {
        if own_treatment && adjacency_exposure {
            return Err(Error::InvalidArgument(
                "exposure (1,1) is not part of the exposure mapping".into(),
            ));
        }
        Ok(ExposureStatus {
            own_treatment,
            adjacency_exposure,
        })
    }

    pub fn own_treatment(&self) -> bool {
        self.own_treatment
    }

    pub fn adjacency_exposure(&self) -> bool {
        self.adjacency_exposure
    }

    /// CSV label: `treated`, `neighbor` or `control`.
    pub fn label(&self) -> &'static str {
        match (self.own_treatment, self.adjacency_exposure) {
            (true, _) => "treated",
            (false, true) => "neighbor",
            (false, false) => "control",
        }
    }

    pub fn from_label(label: &str) -> Result<Self> {
        match label {
            "treated" => Ok(Self::TREATED),
            "neighbor" => Ok(Self::NEIGHBOR),
            "control" => Ok(Self::CONTROL),
            other => Err(Error::Schema(format!(
                "unknown exposure label `{other}` (expected treated, neighbor or control)"
            ))),
        }
    }
}

impl fmt::Display for ExposureStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({},{})",
            self.own_treatment as u8, self.adjacency_exposure as u8
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimand {
    Att,
    Atn,
}

impl Estimand {
    pub const ALL: [Estimand; 2] = [Estimand::Att, Estimand::Atn];

    /// Exposure status of the `R = 1` group.
    pub fn exposed_status(self) -> ExposureStatus {
        match self {
            Estimand::Att => ExposureStatus::TREATED,
            Estimand::Atn => ExposureStatus::NEIGHBOR,
        }
    }
}

impl fmt::Display for Estimand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimand::Att => "ATT",
            Estimand::Atn => "ATN",
        })
    }
}

/// Unit identifier. Bootstrap copies of a unit keep its base id and carry a
/// copy number so every unit in a resampled panel is distinct.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct UnitId {
    base: Arc<str>,
    copy: u32,
}

impl UnitId {
    pub fn new(base: impl Into<Arc<str>>) -> Self {
        UnitId {
            base: base.into(),
            copy: 0,
        }
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub(crate) fn with_copy(&self, copy: u32) -> Self {
        UnitId {
            base: self.base.clone(),
            copy,
        }
    }
}

impl fmt::Display for UnitId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.copy == 0 {
            f.write_str(&self.base)
        } else {
            write!(f, "{}#{}", self.base, self.copy)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitRecord<T> {
    pub id: UnitId,
    pub stratum: Arc<str>,
    pub exposure: ExposureStatus,
    /// One value per covariate. For the m-varying covariate this is its value at m = 1.
    pub covariates: Vec<T>,
    /// Values of the m-varying covariate for m = 1..=n_m; empty when the panel has none.
    pub varying: Vec<T>,
    /// `outcomes[t][m - 1]`.
    pub outcomes: [Vec<T>; 2],
    /// Per-unit string labels, aligned with [`PanelDataset::label_names`].
    pub labels: Vec<String>,
    /// Multiplicity in empirical means and fits (1 unless Bayesian-bootstrap weighted).
    pub weight: T,
}

impl<T: Scalar> UnitRecord<T> {
    pub fn covariate(&self, j: usize, varying_index: Option<usize>, m: usize) -> T {
        match varying_index {
            Some(v) if v == j => self.varying[m - 1],
            _ => self.covariates[j],
        }
    }
}

/// Complete, immutable panel.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset<T> {
    units: Vec<UnitRecord<T>>,
    n_m: usize,
    covariate_names: Vec<String>,
    varying_covariate: Option<usize>,
    label_names: Vec<String>,
}

impl<T: Scalar> PanelDataset<T> {
    pub fn new(
        units: Vec<UnitRecord<T>>,
        n_m: usize,
        covariate_names: Vec<String>,
        varying_covariate: Option<usize>,
        label_names: Vec<String>,
    ) -> Result<Self> {
        if n_m == 0 {
            return Err(Error::InvalidArgument("n_m must be at least 1".into()));
        }
        if let Some(v) = varying_covariate {
            if v >= covariate_names.len() {
                return Err(Error::InvalidArgument(format!(
                    "varying covariate index {v} out of range"
                )));
            }
        }
        let p = covariate_names.len();
        for u in &units {
            let unit = u.id.to_string();
            if u.outcomes[0].len() != n_m || u.outcomes[1].len() != n_m {
                return Err(Error::IncompletePanel {
                    unit,
                    detail: format!("expected {} outcomes per period", n_m),
                });
            }
            if u.covariates.len() != p {
                return Err(Error::Consistency {
                    unit,
                    detail: format!("{} covariates, expected {p}", u.covariates.len()),
                });
            }
            let expected_varying = if varying_covariate.is_some() { n_m } else { 0 };
            if u.varying.len() != expected_varying {
                return Err(Error::Consistency {
                    unit,
                    detail: "m-varying covariate length does not match n_m".into(),
                });
            }
            if u.labels.len() != label_names.len() {
                return Err(Error::Consistency {
                    unit,
                    detail: "label count does not match label columns".into(),
                });
            }
        }
        Ok(PanelDataset {
            units,
            n_m,
            covariate_names,
            varying_covariate,
            label_names,
        })
    }

    pub fn units(&self) -> &[UnitRecord<T>] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn n_m(&self) -> usize {
        self.n_m
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn varying_covariate(&self) -> Option<usize> {
        self.varying_covariate
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn label_index(&self, name: &str) -> Option<usize> {
        self.label_names.iter().position(|l| l == name)
    }

    pub fn covariate_index(&self, name: &str) -> Result<usize> {
        self.covariate_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownCovariate(name.to_string()))
    }

    pub fn status_counts(&self) -> BTreeMap<ExposureStatus, usize> {
        let mut counts = BTreeMap::new();
        for u in &self.units {
            *counts.entry(u.exposure).or_insert(0) += 1;
        }
        counts
    }

    pub fn stratum_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for u in &self.units {
            *counts.entry(u.stratum.to_string()).or_insert(0) += 1;
        }
        counts
    }

    /// Keeps the units for which `keep` returns true.
    pub fn filter(&self, mut keep: impl FnMut(&UnitRecord<T>) -> bool) -> Self {
        PanelDataset {
            units: self.units.iter().filter(|u| keep(u)).cloned().collect(),
            n_m: self.n_m,
            covariate_names: self.covariate_names.clone(),
            varying_covariate: self.varying_covariate,
            label_names: self.label_names.clone(),
        }
    }

    pub(crate) fn with_units(&self, units: Vec<UnitRecord<T>>) -> Self {
        PanelDataset {
            units,
            n_m: self.n_m,
            covariate_names: self.covariate_names.clone(),
            varying_covariate: self.varying_covariate,
            label_names: self.label_names.clone(),
        }
    }

    /// Same units with the given multiplicities.
    pub fn with_weights(&self, weights: &[T]) -> Result<Self> {
        if weights.len() != self.units.len() {
            return Err(Error::InvalidArgument(format!(
                "{} weights for {} units",
                weights.len(),
                self.units.len()
            )));
        }
        let units = self
            .units
            .iter()
            .zip(weights)
            .map(|(u, &w)| UnitRecord {
                weight: w,
                ..u.clone()
            })
            .collect();
        Ok(self.with_units(units))
    }
}

/// How to read a long-format panel file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PanelSchema {
    /// Covariate allowed to vary over m; all others must be constant per unit.
    pub varying_covariate: Option<String>,
    /// Columns holding per-unit string labels instead of numeric covariates.
    pub label_columns: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct LoadedPanel<T> {
    pub dataset: PanelDataset<T>,
    /// Per-unit values of the optional `excluded` column.
    pub excluded: Option<Vec<bool>>,
}

struct UnitRows<T> {
    id: String,
    first_row: usize,
    stratum: Option<String>,
    exposure: ExposureStatus,
    excluded: Option<bool>,
    labels: Vec<String>,
    cells: HashMap<(u8, usize), (T, Vec<T>, usize)>,
}

fn parse_number<T: Scalar>(raw: &str, column: &str, row: usize) -> Result<T> {
    raw.parse::<T>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| {
            Error::Schema(format!(
                "row {row}: column `{column}` has non-numeric or non-finite value `{raw}`"
            ))
        })
}

/// Reads and validates a long-format panel:
/// `unit_id,stratum,exposure,t,m,outcome,<covariates...>` with optional
/// `stratum` and `excluded` columns. Rows of a unit are collated into one
/// record; strata default to the exposure label.
pub fn load_panel<T: Scalar, R: Read>(source: R, schema: &PanelSchema) -> Result<LoadedPanel<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let require = |name: &str| {
        find(name).ok_or_else(|| Error::Schema(format!("missing required column `{name}`")))
    };
    let col_unit = require("unit_id")?;
    let col_exposure = require("exposure")?;
    let col_t = require("t")?;
    let col_m = require("m")?;
    let col_outcome = require("outcome")?;
    let col_stratum = find("stratum");
    let col_excluded = find("excluded");

    let mut label_cols = Vec::with_capacity(schema.label_columns.len());
    for name in &schema.label_columns {
        label_cols.push(
            find(name).ok_or_else(|| Error::Schema(format!("missing label column `{name}`")))?,
        );
    }
    let reserved = ["unit_id", "stratum", "exposure", "t", "m", "outcome", "excluded"];
    let cov_cols: Vec<usize> = (0..headers.len())
        .filter(|&c| !reserved.contains(&headers[c].as_str()) && !label_cols.contains(&c))
        .collect();
    let covariate_names: Vec<String> = cov_cols.iter().map(|&c| headers[c].clone()).collect();
    let varying_covariate = match &schema.varying_covariate {
        Some(name) => Some(
            covariate_names
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::Schema(format!("m-varying covariate `{name}` not found")))?,
        ),
        None => None,
    };

    let mut order: Vec<UnitRows<T>> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut n_m = 0usize;

    for (k, record) in reader.records().enumerate() {
        let record = record?;
        // header is line 1
        let row = k + 2;
        let field = |c: usize| record.get(c).unwrap_or("");
        let id = field(col_unit).to_string();
        if id.is_empty() {
            return Err(Error::Schema(format!("row {row}: empty unit_id")));
        }
        let exposure = ExposureStatus::from_label(field(col_exposure))
            .map_err(|e| Error::Schema(format!("row {row}: {e}")))?;
        let t: u8 = match field(col_t) {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::Schema(format!(
                    "row {row}: t must be 0 or 1, got `{other}`"
                )))
            }
        };
        let m: usize = field(col_m)
            .parse()
            .ok()
            .filter(|&m| m >= 1)
            .ok_or_else(|| {
                Error::Schema(format!(
                    "row {row}: m must be a positive integer, got `{}`",
                    field(col_m)
                ))
            })?;
        n_m = n_m.max(m);
        let outcome: T = parse_number(field(col_outcome), "outcome", row)?;
        let covs = cov_cols
            .iter()
            .map(|&c| parse_number(field(c), &headers[c], row))
            .collect::<Result<Vec<T>>>()?;
        let stratum = col_stratum.map(|c| field(c).to_string());
        let excluded = match col_excluded {
            Some(c) => Some(match field(c) {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Schema(format!(
                        "row {row}: excluded must be 0 or 1, got `{other}`"
                    )))
                }
            }),
            None => None,
        };
        let labels: Vec<String> = label_cols.iter().map(|&c| field(c).to_string()).collect();

        let slot = *index.entry(id.clone()).or_insert_with(|| {
            order.push(UnitRows {
                id: id.clone(),
                first_row: row,
                stratum: stratum.clone(),
                exposure,
                excluded,
                labels: labels.clone(),
                cells: HashMap::new(),
            });
            order.len() - 1
        });
        let unit = &mut order[slot];
        let mismatch = |what: &str| Error::Consistency {
            unit: id.clone(),
            detail: format!(
                "row {row}: {what} differs from row {}",
                unit.first_row
            ),
        };
        if unit.exposure != exposure {
            return Err(mismatch("exposure"));
        }
        if unit.stratum != stratum {
            return Err(mismatch("stratum"));
        }
        if unit.excluded != excluded {
            return Err(mismatch("excluded flag"));
        }
        if unit.labels != labels {
            return Err(mismatch("label"));
        }
        if let Some(prev) = unit.cells.insert((t, m), (outcome, covs, row)) {
            return Err(Error::Consistency {
                unit: id.clone(),
                detail: format!("rows {} and {row} both give (t={t}, m={m})", prev.2),
            });
        }
    }

    if order.is_empty() {
        return Err(Error::Schema("panel has no data rows".into()));
    }

    let mut units = Vec::with_capacity(order.len());
    let mut excluded_flags = col_excluded.map(|_| Vec::with_capacity(order.len()));
    for rows in order {
        let mut outcomes = [vec![T::zero(); n_m], vec![T::zero(); n_m]];
        let mut varying = Vec::new();
        let mut covariates: Option<Vec<T>> = None;
        let mut reference_row = 0;
        for m in 1..=n_m {
            let mut slice_value: Option<T> = None;
            for t in 0..2u8 {
                let (y, covs, row) =
                    rows.cells
                        .get(&(t, m))
                        .ok_or_else(|| Error::IncompletePanel {
                            unit: rows.id.clone(),
                            detail: format!("missing row for (t={t}, m={m})"),
                        })?;
                outcomes[t as usize][m - 1] = *y;
                if let Some(v) = varying_covariate {
                    match slice_value {
                        None => slice_value = Some(covs[v]),
                        Some(prev) if prev != covs[v] => {
                            return Err(Error::Consistency {
                                unit: rows.id.clone(),
                                detail: format!(
                                    "row {row}: m-varying covariate `{}` differs between t=0 and t=1 at m={m}",
                                    covariate_names[v]
                                ),
                            })
                        }
                        Some(_) => {}
                    }
                }
                match &covariates {
                    None => {
                        covariates = Some(covs.clone());
                        reference_row = *row;
                    }
                    Some(reference) => {
                        for (j, (a, b)) in reference.iter().zip(covs).enumerate() {
                            if Some(j) != varying_covariate && a != b {
                                return Err(Error::Consistency {
                                    unit: rows.id.clone(),
                                    detail: format!(
                                        "row {row}: covariate `{}` is {b} but row {reference_row} has {a}",
                                        covariate_names[j]
                                    ),
                                });
                            }
                        }
                    }
                }
            }
            if let Some(v) = slice_value {
                varying.push(v);
            }
        }
        let mut covariates = covariates.expect("n_m >= 1");
        if let Some(v) = varying_covariate {
            covariates[v] = varying[0];
        }
        if let (Some(flags), Some(flag)) = (excluded_flags.as_mut(), rows.excluded) {
            flags.push(flag);
        }
        let stratum: Arc<str> = match rows.stratum {
            Some(s) if !s.is_empty() => s.into(),
            _ => rows.exposure.label().into(),
        };
        units.push(UnitRecord {
            id: UnitId::new(rows.id),
            stratum,
            exposure: rows.exposure,
            covariates,
            varying,
            outcomes,
            labels: rows.labels,
            weight: T::one(),
        });
    }

    let dataset = PanelDataset::new(
        units,
        n_m,
        covariate_names,
        varying_covariate,
        schema.label_columns.clone(),
    )?;
    Ok(LoadedPanel {
        dataset,
        excluded: excluded_flags,
    })
}

/// Writes the panel in the long format read by [`load_panel`].
pub fn write_panel<T: Scalar, W: Write>(
    dataset: &PanelDataset<T>,
    excluded: Option<&[bool]>,
    sink: W,
) -> Result<()> {
    if let Some(flags) = excluded {
        if flags.len() != dataset.len() {
            return Err(Error::InvalidArgument(
                "exclusion flag count does not match unit count".into(),
            ));
        }
    }
    let mut writer = csv::Writer::from_writer(sink);
    let mut header: Vec<String> = ["unit_id", "stratum", "exposure", "t", "m", "outcome"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(dataset.covariate_names.iter().cloned());
    header.extend(dataset.label_names.iter().cloned());
    if excluded.is_some() {
        header.push("excluded".into());
    }
    writer.write_record(&header)?;
    for (k, u) in dataset.units.iter().enumerate() {
        for t in 0..2 {
            for m in 1..=dataset.n_m {
                let mut rec = vec![
                    u.id.to_string(),
                    u.stratum.to_string(),
                    u.exposure.label().to_string(),
                    t.to_string(),
                    m.to_string(),
                    u.outcomes[t][m - 1].to_string(),
                ];
                for j in 0..dataset.covariate_names.len() {
                    rec.push(u.covariate(j, dataset.varying_covariate, m).to_string());
                }
                rec.extend(u.labels.iter().cloned());
                if let Some(flags) = excluded {
                    rec.push(if flags[k] { "1" } else { "0" }.to_string());
                }
                writer.write_record(&rec)?;
            }
        }
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Exclusion<T> {
    pub dataset: PanelDataset<T>,
    pub warnings: Vec<String>,
}

/// Drops flagged units. Warns when an exposure status present before the
/// exclusion has no units left.
pub fn apply_exclusion<T: Scalar>(
    dataset: &PanelDataset<T>,
    excluded: &[bool],
) -> Result<Exclusion<T>> {
    if excluded.len() != dataset.len() {
        return Err(Error::InvalidArgument(format!(
            "{} exclusion flags for {} units",
            excluded.len(),
            dataset.len()
        )));
    }
    let mut flags = excluded.iter();
    let kept = dataset.filter(|_| !*flags.next().expect("length checked"));
    let before = dataset.status_counts();
    let after = kept.status_counts();
    let warnings = before
        .keys()
        .filter(|s| !after.contains_key(s))
        .map(|s| format!("all {} units ({}) were excluded", s.label(), s))
        .collect();
    Ok(Exclusion {
        dataset: kept,
        warnings,
    })
}

/// Two-group view of a panel for one estimand: `R = 1` for the estimand's
/// exposed group and `R = 0` for controls.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonFrame<T> {
    pub estimand: Estimand,
    pub unit_ids: Vec<UnitId>,
    pub strata: Vec<Arc<str>>,
    pub exposed: Vec<bool>,
    /// `pre[i][m - 1]` = Y_{i,0,m}
    pub pre: Vec<Vec<T>>,
    /// `post[i][m - 1]` = Y_{i,1,m}
    pub post: Vec<Vec<T>>,
    pub covariates: Vec<Vec<T>>,
    /// m-varying covariate: index and `values[i][m - 1]`.
    pub varying: Option<(usize, Vec<Vec<T>>)>,
    pub covariate_names: Vec<String>,
    pub weights: Vec<T>,
    n_m: usize,
}

/// Builds the comparison frame for `estimand`, dropping units whose exposure
/// belongs to the other comparison.
pub fn make_comparison<T: Scalar>(
    dataset: &PanelDataset<T>,
    estimand: Estimand,
) -> Result<ComparisonFrame<T>> {
    let target = estimand.exposed_status();
    let units: Vec<&UnitRecord<T>> = dataset
        .units
        .iter()
        .filter(|u| u.exposure == target || u.exposure == ExposureStatus::CONTROL)
        .collect();
    for status in [target, ExposureStatus::CONTROL] {
        let count = units.iter().filter(|u| u.exposure == status).count();
        if count < 2 {
            return Err(Error::GroupEmpty {
                estimand,
                status,
                count,
            });
        }
    }
    let varying = dataset
        .varying_covariate
        .map(|v| (v, units.iter().map(|u| u.varying.clone()).collect()));
    Ok(ComparisonFrame {
        estimand,
        unit_ids: units.iter().map(|u| u.id.clone()).collect(),
        strata: units.iter().map(|u| u.stratum.clone()).collect(),
        exposed: units.iter().map(|u| u.exposure == target).collect(),
        pre: units.iter().map(|u| u.outcomes[0].clone()).collect(),
        post: units.iter().map(|u| u.outcomes[1].clone()).collect(),
        covariates: units.iter().map(|u| u.covariates.clone()).collect(),
        varying,
        covariate_names: dataset.covariate_names.clone(),
        weights: units.iter().map(|u| u.weight).collect(),
        n_m: dataset.n_m,
    })
}

impl<T: Scalar> ComparisonFrame<T> {
    /// Frame built directly from per-unit arrays, with ids `u0, u1, ...`,
    /// strata equal to the group label and unit weights of 1.
    pub fn from_outcomes(
        estimand: Estimand,
        exposed: Vec<bool>,
        pre: Vec<Vec<T>>,
        post: Vec<Vec<T>>,
        covariates: Vec<Vec<T>>,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        let n = exposed.len();
        let n_m = pre.first().map_or(0, Vec::len);
        if n_m == 0
            || pre.len() != n
            || post.len() != n
            || covariates.len() != n
            || pre.iter().chain(&post).any(|r| r.len() != n_m)
            || covariates.iter().any(|c| c.len() != covariate_names.len())
        {
            return Err(Error::InvalidArgument("ragged comparison frame".into()));
        }
        let exposed_status = estimand.exposed_status();
        Ok(ComparisonFrame {
            estimand,
            unit_ids: (0..n).map(|i| UnitId::new(format!("u{i}"))).collect(),
            strata: exposed
                .iter()
                .map(|&r| {
                    let s = if r { exposed_status } else { ExposureStatus::CONTROL };
                    Arc::from(s.label())
                })
                .collect(),
            exposed,
            pre,
            post,
            covariates,
            varying: None,
            covariate_names,
            weights: vec![T::one(); n],
            n_m,
        })
    }

    pub fn len(&self) -> usize {
        self.exposed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exposed.is_empty()
    }

    pub fn n_m(&self) -> usize {
        self.n_m
    }

    pub fn exposed_count(&self) -> usize {
        self.exposed.iter().filter(|&&r| r).count()
    }

    pub(crate) fn check_m(&self, m: usize) -> Result<()> {
        if m == 0 || m > self.n_m {
            Err(Error::Bounds { m, n_m: self.n_m })
        } else {
            Ok(())
        }
    }

    /// ΔY_{i,m} = Y_{i,1,m} − Y_{i,0,m}.
    #[inline]
    pub fn delta_y(&self, i: usize, m: usize) -> T {
        self.post[i][m - 1] - self.pre[i][m - 1]
    }

    #[inline]
    pub fn covariate(&self, i: usize, j: usize, m: usize) -> T {
        match &self.varying {
            Some((v, values)) if *v == j => values[i][m - 1],
            _ => self.covariates[i][j],
        }
    }

    pub fn covariate_indices(&self, names: &[String]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                self.covariate_names
                    .iter()
                    .position(|c| c == n)
                    .ok_or_else(|| Error::UnknownCovariate(n.clone()))
            })
            .collect()
    }

    /// Design matrix `[1, X_selected]` at observation time `m` for the given rows.
    pub fn design(&self, m: usize, columns: &[usize], rows: &[usize]) -> Matrix<T> {
        let mut x = Matrix::zeros(rows.len(), columns.len() + 1);
        for (r, &i) in rows.iter().enumerate() {
            x.set(r, 0, T::one());
            for (c, &j) in columns.iter().enumerate() {
                x.set(r, c + 1, self.covariate(i, j, m));
            }
        }
        x
    }

    /// Frame whose single period pair is (pre-period time 1, pre-period time m).
    pub fn pretrend_frame(&self, m: usize) -> Result<Self> {
        if m < 2 || m > self.n_m {
            return Err(Error::DegenerateComparison(m));
        }
        let slice = |rows: &Vec<Vec<T>>, k: usize| -> Vec<Vec<T>> {
            rows.iter().map(|r| vec![r[k - 1]]).collect()
        };
        Ok(ComparisonFrame {
            estimand: self.estimand,
            unit_ids: self.unit_ids.clone(),
            strata: self.strata.clone(),
            exposed: self.exposed.clone(),
            pre: slice(&self.pre, 1),
            post: slice(&self.pre, m),
            covariates: self.covariates.clone(),
            varying: self
                .varying
                .as_ref()
                .map(|(v, values)| (*v, slice(values, m))),
            covariate_names: self.covariate_names.clone(),
            weights: self.weights.clone(),
            n_m: 1,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_unit_csv() -> String {
        let mut s = String::from("unit_id,stratum,exposure,t,m,outcome,x\n");
        for (u, e) in [("a", "treated"), ("b", "control")] {
            for t in 0..2 {
                for m in 1..=2 {
                    s.push_str(&format!("{u},r1,{e},{t},{m},{}.5,1.25\n", 10 * t + m));
                }
            }
        }
        s
    }

    #[test]
    fn smallest_complete_panel_loads() {
        let loaded: LoadedPanel<f64> =
            load_panel(two_unit_csv().as_bytes(), &PanelSchema::default()).unwrap();
        assert_eq!(loaded.dataset.len(), 2);
        assert_eq!(loaded.dataset.n_m(), 2);
        assert!(loaded.excluded.is_none());
        assert_eq!(loaded.dataset.units()[0].outcomes[1], vec![11.5, 12.5]);
    }

    #[test]
    fn missing_row_names_the_unit() {
        let csv: String = two_unit_csv()
            .lines()
            .filter(|l| !l.starts_with("b,r1,control,1,2"))
            .map(|l| format!("{l}\n"))
            .collect();
        match load_panel::<f64, _>(csv.as_bytes(), &PanelSchema::default()) {
            Err(Error::IncompletePanel { unit, .. }) => assert_eq!(unit, "b"),
            other => panic!("expected incomplete panel, got {other:?}"),
        }
    }

    #[test]
    fn unknown_exposure_label_is_schema_error() {
        let csv = two_unit_csv().replace("treated", "taxed");
        assert!(matches!(
            load_panel::<f64, _>(csv.as_bytes(), &PanelSchema::default()),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn inconsistent_constant_covariate_is_rejected() {
        let csv = two_unit_csv().replacen("a,r1,treated,1,2,12.5,1.25", "a,r1,treated,1,2,12.5,1.5", 1);
        assert!(matches!(
            load_panel::<f64, _>(csv.as_bytes(), &PanelSchema::default()),
            Err(Error::Consistency { .. })
        ));
    }

    #[test]
    fn varying_covariate_may_change_over_m() {
        let csv = two_unit_csv()
            .replace("a,r1,treated,0,2,2.5,1.25", "a,r1,treated,0,2,2.5,9")
            .replace("a,r1,treated,1,2,12.5,1.25", "a,r1,treated,1,2,12.5,9");
        let schema = PanelSchema {
            varying_covariate: Some("x".into()),
            ..Default::default()
        };
        let d: PanelDataset<f64> = load_panel(csv.as_bytes(), &schema).unwrap().dataset;
        assert_eq!(d.units()[0].varying, vec![1.25, 9.0]);
        assert!(load_panel::<f64, _>(csv.as_bytes(), &PanelSchema::default()).is_err());
    }

    #[test]
    fn stratum_defaults_to_exposure_label() {
        let csv = two_unit_csv().replace(",r1,", ",,");
        let d: PanelDataset<f64> = load_panel(csv.as_bytes(), &PanelSchema::default())
            .unwrap()
            .dataset;
        assert_eq!(&*d.units()[0].stratum, "treated");
        assert_eq!(&*d.units()[1].stratum, "control");
    }

    #[test]
    fn exposure_one_one_is_rejected() {
        assert!(ExposureStatus::new(true, true).is_err());
        assert_eq!(ExposureStatus::new(false, true).unwrap(), ExposureStatus::NEIGHBOR);
        assert_eq!(ExposureStatus::TREATED.to_string(), "(1,0)");
    }

    fn unit(id: &str, exposure: ExposureStatus, pre: f64, post: f64) -> UnitRecord<f64> {
        UnitRecord {
            id: UnitId::new(id),
            stratum: exposure.label().into(),
            exposure,
            covariates: vec![],
            varying: vec![],
            outcomes: [vec![pre], vec![post]],
            labels: vec![],
            weight: 1.0,
        }
    }

    fn mixed_dataset() -> PanelDataset<f64> {
        let mut units = Vec::new();
        for k in 0..3 {
            units.push(unit(&format!("t{k}"), ExposureStatus::TREATED, 10.0, 8.0));
        }
        for k in 0..2 {
            units.push(unit(&format!("n{k}"), ExposureStatus::NEIGHBOR, 1.0, 2.0));
        }
        for k in 0..4 {
            units.push(unit(&format!("c{k}"), ExposureStatus::CONTROL, 5.0, 6.0));
        }
        PanelDataset::new(units, 1, vec![], None, vec![]).unwrap()
    }

    #[test]
    fn comparison_frames_select_groups() {
        let d = mixed_dataset();
        let att = make_comparison(&d, Estimand::Att).unwrap();
        assert_eq!(att.len(), 7);
        assert_eq!(att.exposed, vec![true, true, true, false, false, false, false]);
        assert_eq!(att.delta_y(0, 1), -2.0);
        let atn = make_comparison(&d, Estimand::Atn).unwrap();
        assert_eq!(atn.len(), 6);
        assert_eq!(atn.exposed_count(), 2);
        let controls = |f: &ComparisonFrame<f64>| -> Vec<UnitId> {
            f.unit_ids
                .iter()
                .zip(&f.exposed)
                .filter(|(_, &r)| !r)
                .map(|(id, _)| id.clone())
                .collect()
        };
        assert_eq!(controls(&att), controls(&atn));
    }

    #[test]
    fn empty_group_is_reported() {
        let d = mixed_dataset().filter(|u| u.exposure != ExposureStatus::NEIGHBOR);
        match make_comparison(&d, Estimand::Atn) {
            Err(Error::GroupEmpty {
                estimand, status, count,
            }) => {
                assert_eq!((estimand, status, count), (Estimand::Atn, ExposureStatus::NEIGHBOR, 0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn exclusion_drops_flagged_units() {
        let d = mixed_dataset();
        let mut flags = vec![false; 9];
        flags[0] = true;
        flags[4] = true;
        flags[8] = true;
        let out = apply_exclusion(&d, &flags).unwrap();
        assert_eq!(out.dataset.len(), 6);
        assert!(out.warnings.is_empty());
        assert_eq!(d.len(), 9);
        let again = apply_exclusion(&d, &vec![false; 9]).unwrap();
        assert_eq!(again.dataset, d);
    }

    #[test]
    fn excluding_a_whole_status_warns() {
        let d = mixed_dataset();
        let flags: Vec<bool> = d.units().iter().map(|u| u.exposure == ExposureStatus::NEIGHBOR).collect();
        let out = apply_exclusion(&d, &flags).unwrap();
        assert_eq!(out.warnings.len(), 1);
        assert!(out.warnings[0].contains("neighbor"));
    }
}
