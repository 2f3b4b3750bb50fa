//! Batch inspection over a CSV manifest with pooled, per-group metrics.
//!
//! Manifest columns: `image,period_rows,period_cols,gt,group`. `gt` and
//! `group` may be empty. Relative paths resolve against the manifest's
//! directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::defect_fusion::{inspect, InspectOptions};
use crate::error::{Error, Result};
use crate::evaluation::{ConfusionCounts, Metrics};
use crate::gabor_bank::{kernel_size_from_periodicity, GaborBankConfig};
use crate::imaging::load_grayscale;
use crate::periodic_blocks::Periodicity;

/// Group name used for rows with an empty `group` column.
pub const DEFAULT_GROUP: &str = "ungrouped";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub image: PathBuf,
    pub period_rows: usize,
    pub period_cols: usize,
    #[serde(default, deserialize_with = "empty_as_none")]
    pub gt: Option<PathBuf>,
    #[serde(default, deserialize_with = "empty_as_none")]
    pub group: Option<String>,
}

fn empty_as_none<'de, D, V>(de: D) -> std::result::Result<Option<V>, D::Error>
where
    D: serde::Deserializer<'de>,
    V: From<String>,
{
    let raw: Option<String> = Option::deserialize(de)?;
    Ok(raw.filter(|s| !s.trim().is_empty()).map(|s| V::from(s.trim().to_string())))
}

impl ManifestRow {
    pub fn group_name(&self) -> &str {
        self.group.as_deref().unwrap_or(DEFAULT_GROUP)
    }
}

/// Parses a manifest, resolving relative paths against its directory.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRow>> {
    let path = path.as_ref();
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let resolve = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
    reader
        .deserialize::<ManifestRow>()
        .map(|row| {
            let row = row?;
            Ok(ManifestRow {
                image: resolve(row.image),
                gt: row.gt.map(resolve),
                ..row
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct CorpusOptions {
    /// Wavelet parameters; the kernel window is re-derived per row from its periodicity.
    pub bank: GaborBankConfig<f64>,
    /// Applied to every row; its `ground_truth` is ignored.
    pub inspect: InspectOptions<f64>,
    /// Only rows of this group are run.
    pub group: Option<String>,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        Self { bank: GaborBankConfig::default(), inspect: InspectOptions::default(), group: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageEntry {
    pub image: PathBuf,
    pub group: String,
    pub status: RowStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    pub defective_blocks: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub counts: Option<ConfusionCounts>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub metrics: Option<Metrics>,
}

/// Micro-averaged metrics of the rows that carried ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub images: usize,
    pub scored_images: usize,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    /// Blocks are counted once per corner crop.
    pub unit: String,
    pub images: Vec<ImageEntry>,
    pub groups: BTreeMap<String, GroupSummary>,
    pub overall: Option<GroupSummary>,
    pub failures: usize,
}

impl CorpusReport {
    /// True when at least one row ran and none failed.
    pub fn succeeded(&self) -> bool {
        !self.images.is_empty() && self.failures == 0
    }
}

fn run_row(row: &ManifestRow, opts: &CorpusOptions) -> Result<ImageEntry> {
    let period = Periodicity::new(row.period_rows, row.period_cols)?;
    let (kh, kw) = kernel_size_from_periodicity(period)?;
    let bank = opts.bank.with_kernel_size(kh, kw);
    let image = load_grayscale::<f64>(&row.image)?;
    let ground_truth = match &row.gt {
        Some(p) => {
            let gt = load_grayscale::<f64>(p)?;
            Some(gt.map(|v| if v > 0.5 { 1.0 } else { 0.0 }))
        }
        None => None,
    };
    let inspect_opts = InspectOptions { ground_truth, ..opts.inspect.clone() };
    let report = inspect(&image, period, &bank, &inspect_opts)?;
    Ok(ImageEntry {
        image: row.image.clone(),
        group: row.group_name().to_string(),
        status: RowStatus::Ok,
        error: None,
        defective_blocks: report.num_defective_blocks(),
        counts: report.counts,
        metrics: report.metrics,
    })
}

fn summarize<'a>(entries: impl Iterator<Item = &'a ImageEntry>) -> GroupSummary {
    let mut images = 0;
    let mut scored = 0;
    let mut counts = ConfusionCounts::default();
    for e in entries {
        images += 1;
        if let Some(c) = e.counts {
            scored += 1;
            counts += c;
        }
    }
    GroupSummary { images, scored_images: scored, counts, metrics: counts.metrics() }
}

/// Inspects every row (concurrently), pooling counts per group and overall.
/// A failing row is recorded and excluded from the aggregates.
pub fn corpus_run(rows: &[ManifestRow], opts: &CorpusOptions) -> CorpusReport {
    let selected: Vec<&ManifestRow> = rows
        .iter()
        .filter(|r| opts.group.as_deref().is_none_or(|g| r.group_name() == g))
        .collect();
    let images: Vec<ImageEntry> = selected
        .par_iter()
        .map(|row| {
            run_row(row, opts).unwrap_or_else(|err| {
                log::warn!("{}: {err}", row.image.display());
                ImageEntry {
                    image: row.image.clone(),
                    group: row.group_name().to_string(),
                    status: RowStatus::Failed,
                    error: Some(err.to_string()),
                    defective_blocks: 0,
                    counts: None,
                    metrics: None,
                }
            })
        })
        .collect();

    let ok = || images.iter().filter(|e| e.status == RowStatus::Ok);
    let mut groups = BTreeMap::new();
    for name in ok().map(|e| e.group.clone()) {
        if !groups.contains_key(&name) {
            let summary = summarize(ok().filter(|e| e.group == name));
            groups.insert(name, summary);
        }
    }
    let overall = (ok().count() > 0).then(|| summarize(ok()));
    let failures = images.iter().filter(|e| e.status == RowStatus::Failed).count();
    CorpusReport { unit: "per_crop_block".to_string(), images, groups, overall, failures }
}

/// Reads `path` and runs [`corpus_run`].
pub fn corpus_run_manifest(path: impl AsRef<Path>, opts: &CorpusOptions) -> Result<CorpusReport> {
    let rows = read_manifest(path.as_ref()).map_err(|e| match e {
        Error::Csv(err) => Error::argument(format!("{}: {err}", path.as_ref().display())),
        other => other,
    })?;
    Ok(corpus_run(&rows, opts))
}
