//! Data pipeline: CSV ingestion with missing-value accounting, per-city
//! series extraction and cleaning, z-score normalization, sliding-window
//! dataset construction, chronological splitting, and a seeded synthetic
//! generator for desk-scale runs.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Temperatures at or below this value are treated as missing-data
/// sentinels unless a run overrides the threshold.
pub const DEFAULT_MISSING_THRESHOLD: f64 = -90.0;

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    use std::fmt::Write;
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// One typed row of the input CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub region: String,
    pub country: String,
    pub state: String,
    pub city: String,
    pub month: u32,
    pub day: u32,
    pub year: i32,
    pub avg_temperature: f64,
}

impl RawRecord {
    pub fn city_key(&self) -> CityKey {
        CityKey {
            region: self.region.clone(),
            country: self.country.clone(),
            state: self.state.clone(),
            city: self.city.clone(),
        }
    }
}

/// Identifies a series: region/country/state/city.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CityKey {
    pub region: String,
    pub country: String,
    pub state: String,
    pub city: String,
}

impl std::fmt::Display for CityKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}/{}/{}/{}",
            self.region, self.country, self.state, self.city
        )
    }
}

/// Ingestion summary emitted as JSON by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestStats {
    pub rows: u64,
    pub cities: u64,
    pub year_min: i32,
    pub year_max: i32,
    pub missing_count: u64,
}

/// A row that failed to parse; collected rather than fatal while bad rows
/// stay under 10% of the file.
#[derive(Debug, Clone, Serialize)]
pub struct BadRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug)]
pub struct ParseOutcome {
    pub records: Vec<RawRecord>,
    pub stats: IngestStats,
    pub bad_rows: Vec<BadRow>,
}

const REQUIRED_COLUMNS: [&str; 8] = [
    "region",
    "country",
    "state",
    "city",
    "month",
    "day",
    "year",
    "avgtemperature",
];

/// Reads the eight-field temperature CSV. Header names match
/// case-insensitively in any column order; extra columns are ignored.
pub fn parse_csv(path: &Path, missing_threshold: f64) -> Result<ParseOutcome> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => {
                Error::Io(std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()))
            }
            _ => Error::EmptyFile,
        })?;

    let headers = reader
        .headers()
        .map_err(|_| Error::EmptyFile)?
        .clone();
    let mut column_index: BTreeMap<&str, usize> = BTreeMap::new();
    for (idx, name) in headers.iter().enumerate() {
        let normalized = name.trim().to_ascii_lowercase();
        if let Some(pos) = REQUIRED_COLUMNS.iter().position(|c| **c == normalized) {
            column_index.entry(REQUIRED_COLUMNS[pos]).or_insert(idx);
        }
    }
    for col in REQUIRED_COLUMNS {
        if !column_index.contains_key(col) {
            let display = if col == "avgtemperature" {
                "AvgTemperature".to_string()
            } else {
                let mut c = col.to_string();
                c[..1].make_ascii_uppercase();
                c
            };
            return Err(Error::MissingColumn(display));
        }
    }

    let mut records = Vec::new();
    let mut bad_rows = Vec::new();
    let mut total_rows: usize = 0;
    for (row_idx, row) in reader.records().enumerate() {
        total_rows += 1;
        let line = row_idx as u64 + 2; // header is line 1
        match row {
            Ok(row) => match parse_record(&row, &column_index) {
                Ok(record) => records.push(record),
                Err(reason) => bad_rows.push(BadRow { line, reason }),
            },
            Err(e) => bad_rows.push(BadRow {
                line,
                reason: e.to_string(),
            }),
        }
    }

    if total_rows == 0 {
        return Err(Error::EmptyFile);
    }
    if bad_rows.len() * 10 > total_rows {
        let first = &bad_rows[0];
        return Err(Error::TooManyBadRows {
            bad: bad_rows.len(),
            total: total_rows,
            first_line: first.line,
            first_reason: first.reason.clone(),
        });
    }

    let mut cities = std::collections::BTreeSet::new();
    let mut year_min = i32::MAX;
    let mut year_max = i32::MIN;
    let mut missing_count = 0u64;
    for r in &records {
        cities.insert(r.city_key());
        year_min = year_min.min(r.year);
        year_max = year_max.max(r.year);
        if r.avg_temperature <= missing_threshold {
            missing_count += 1;
        }
    }
    let stats = IngestStats {
        rows: records.len() as u64,
        cities: cities.len() as u64,
        year_min,
        year_max,
        missing_count,
    };
    Ok(ParseOutcome {
        records,
        stats,
        bad_rows,
    })
}

fn parse_record(
    row: &csv::StringRecord,
    columns: &BTreeMap<&str, usize>,
) -> std::result::Result<RawRecord, String> {
    let field = |name: &str| -> std::result::Result<&str, String> {
        row.get(columns[name])
            .ok_or_else(|| format!("row too short; no '{name}' field"))
    };
    let month: u32 = field("month")?
        .trim()
        .parse()
        .map_err(|_| format!("bad month '{}'", field("month").unwrap_or("")))?;
    let day: u32 = field("day")?
        .trim()
        .parse()
        .map_err(|_| format!("bad day '{}'", field("day").unwrap_or("")))?;
    let year: i32 = field("year")?
        .trim()
        .parse()
        .map_err(|_| format!("bad year '{}'", field("year").unwrap_or("")))?;
    let avg_temperature: f64 = field("avgtemperature")?
        .trim()
        .parse()
        .map_err(|_| format!("bad temperature '{}'", field("avgtemperature").unwrap_or("")))?;
    if !avg_temperature.is_finite() {
        return Err(format!("non-finite temperature '{avg_temperature}'"));
    }
    Ok(RawRecord {
        region: field("region")?.trim().to_string(),
        country: field("country")?.trim().to_string(),
        state: field("state")?.trim().to_string(),
        city: field("city")?.trim().to_string(),
        month,
        day,
        year,
        avg_temperature,
    })
}

/// A cleaned, date-ordered temperature series for one city.
#[derive(Debug, Clone, PartialEq)]
pub struct CitySeries {
    pub key: String,
    pub points: Vec<(NaiveDate, f64)>,
}

impl CitySeries {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|(_, v)| *v).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// How to handle missing-sentinel observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingPolicy {
    Drop,
    Interpolate,
}

impl std::str::FromStr for MissingPolicy {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "drop" => Ok(MissingPolicy::Drop),
            "interpolate" => Ok(MissingPolicy::Interpolate),
            other => Err(format!("unknown missing policy '{other}' (expected drop|interpolate)")),
        }
    }
}

/// Extracts, orders, and cleans one city's series.
///
/// Invalid calendar dates are removed first; duplicate dates collapse to the
/// mean of their non-missing values (values are sorted before summing so the
/// result is independent of input order). Sentinel observations are then
/// dropped or linearly interpolated between their surviving neighbors;
/// leading/trailing runs with only one neighbor are dropped either way.
pub fn clean_series(
    records: &[RawRecord],
    key: &CityKey,
    policy: MissingPolicy,
    missing_threshold: f64,
) -> Result<CitySeries> {
    let mut dated: Vec<(NaiveDate, f64)> = records
        .iter()
        .filter(|r| {
            r.region == key.region
                && r.country == key.country
                && r.state == key.state
                && r.city == key.city
        })
        .filter_map(|r| {
            NaiveDate::from_ymd_opt(r.year, r.month, r.day).map(|d| (d, r.avg_temperature))
        })
        .collect();
    dated.sort_by_key(|(d, _)| *d);

    // collapse duplicate dates
    let mut collapsed: Vec<(NaiveDate, f64)> = Vec::with_capacity(dated.len());
    let mut i = 0;
    while i < dated.len() {
        let date = dated[i].0;
        let mut group: Vec<f64> = Vec::new();
        while i < dated.len() && dated[i].0 == date {
            group.push(dated[i].1);
            i += 1;
        }
        let valid: Vec<f64> = group
            .iter()
            .copied()
            .filter(|v| *v > missing_threshold)
            .collect();
        let value = if valid.is_empty() {
            missing_threshold // all duplicates missing: keep one sentinel
        } else {
            let mut sorted = valid;
            sorted.sort_by(f64::total_cmp);
            sorted.iter().sum::<f64>() / sorted.len() as f64
        };
        collapsed.push((date, value));
    }

    let points = match policy {
        MissingPolicy::Drop => collapsed
            .into_iter()
            .filter(|(_, v)| *v > missing_threshold)
            .collect::<Vec<_>>(),
        MissingPolicy::Interpolate => interpolate_missing(collapsed, missing_threshold),
    };

    if points.is_empty() {
        return Err(Error::EmptySeries {
            key: key.to_string(),
        });
    }
    Ok(CitySeries {
        key: key.to_string(),
        points,
    })
}

/// Linear interpolation (by position) across runs of missing values; runs
/// touching either end of the series are dropped.
fn interpolate_missing(
    points: Vec<(NaiveDate, f64)>,
    threshold: f64,
) -> Vec<(NaiveDate, f64)> {
    let n = points.len();
    let mut out: Vec<(NaiveDate, f64)> = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if points[i].1 > threshold {
            out.push(points[i]);
            i += 1;
            continue;
        }
        // run of missing values [i, j)
        let mut j = i;
        while j < n && points[j].1 <= threshold {
            j += 1;
        }
        let prev = out.last().copied();
        let next = if j < n { Some(points[j]) } else { None };
        if let (Some((_, lo)), Some((_, hi))) = (prev, next) {
            let run = (j - i) as f64;
            for (step, point) in points[i..j].iter().enumerate() {
                let frac = (step + 1) as f64 / (run + 1.0);
                out.push((point.0, lo + (hi - lo) * frac));
            }
        }
        // no neighbor on one side: run is dropped
        i = j;
    }
    out
}

/// z-score statistics of a training slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
}

impl NormStats {
    /// Population mean/std over `values`; errors on fewer than two values
    /// or zero variance.
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::SeriesTooShort {
                length: values.len(),
                window: 2,
                horizon: 0,
            });
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        if std == 0.0 {
            return Err(Error::ZeroVariance);
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }

    pub fn apply_slice(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&v| self.apply(v)).collect()
    }

    pub fn invert_slice(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&v| self.invert(v)).collect()
    }
}

/// Fits statistics on `values` and returns the z-scored copy with them.
pub fn normalize(values: &[f64]) -> Result<(Vec<f64>, NormStats)> {
    let stats = NormStats::fit(values)?;
    Ok((stats.apply_slice(values), stats))
}

/// Where a dataset's values came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
}

impl Provenance {
    pub fn synthetic() -> Self {
        Self {
            source: "synthetic".to_string(),
            start: None,
            end: None,
        }
    }
}

/// Supervised (window, next-value) pairs over a normalized series.
///
/// `inputs` is `[W, window, 1]`, `targets` is `[W, 1]`, both in normalized
/// units; `normalization` holds the statistics needed to map either back to
/// physical units.
#[derive(Debug, Clone)]
pub struct WindowedDataset {
    pub inputs: Tensor,
    pub targets: Tensor,
    pub normalization: NormStats,
    pub provenance: Provenance,
    window: usize,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.targets.dim(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Copies the given rows into contiguous batch tensors.
    pub fn gather(&self, rows: &[usize]) -> (Tensor, Tensor) {
        let w = self.window;
        let mut inputs = vec![0.0; rows.len() * w];
        let mut targets = vec![0.0; rows.len()];
        for (out_idx, &row) in rows.iter().enumerate() {
            inputs[out_idx * w..(out_idx + 1) * w]
                .copy_from_slice(&self.inputs.data()[row * w..(row + 1) * w]);
            targets[out_idx] = self.targets.data()[row];
        }
        (
            Tensor::from_parts(vec![rows.len(), w, 1], inputs),
            Tensor::from_parts(vec![rows.len(), 1], targets),
        )
    }

    /// Targets mapped back to physical units.
    pub fn targets_physical(&self) -> Vec<f64> {
        self.normalization.invert_slice(self.targets.data())
    }

    /// sha256 fingerprint of shapes and exact float contents; identical
    /// datasets hash identically regardless of how they were produced.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for t in [&self.inputs, &self.targets] {
            for d in t.shape() {
                hasher.update(d.to_le_bytes());
            }
            for v in t.data() {
                hasher.update(v.to_le_bytes());
            }
        }
        hex_string(&hasher.finalize())
    }
}

/// Slides a window over normalized `values`: for each `i`,
/// input = `values[i .. i+window]`, target = `values[i+window+horizon-1]`.
pub fn make_windows(
    values: &[f64],
    window: usize,
    horizon: usize,
    normalization: NormStats,
    provenance: Provenance,
) -> Result<WindowedDataset> {
    if window == 0 || horizon == 0 {
        return Err(Error::InvalidConfig(
            "window and horizon must be positive".to_string(),
        ));
    }
    let needed = window + horizon;
    if values.len() < needed {
        return Err(Error::SeriesTooShort {
            length: values.len(),
            window,
            horizon,
        });
    }
    let count = values.len() - window - horizon + 1;
    let mut inputs = Vec::with_capacity(count * window);
    let mut targets = Vec::with_capacity(count);
    for i in 0..count {
        inputs.extend_from_slice(&values[i..i + window]);
        targets.push(values[i + window + horizon - 1]);
    }
    Ok(WindowedDataset {
        inputs: Tensor::from_parts(vec![count, window, 1], inputs),
        targets: Tensor::from_parts(vec![count, 1], targets),
        normalization,
        provenance,
        window,
    })
}

/// Earliest `floor(fraction * len)` items to train, the rest to test.
pub fn chronological_split<T: Clone>(values: &[T], train_fraction: f64) -> Result<(Vec<T>, Vec<T>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::FractionOutOfRange(train_fraction));
    }
    let cut = (train_fraction * values.len() as f64).floor() as usize;
    Ok((values[..cut].to_vec(), values[cut..].to_vec()))
}

/// Train/test datasets produced by [`prepare_datasets`].
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: WindowedDataset,
    pub test: WindowedDataset,
    pub normalization: NormStats,
}

/// Full preprocessing for one series: chronological split first, z-score
/// statistics fit on the train slice only, then windows built per slice so
/// none straddles the boundary.
pub fn prepare_datasets(
    series: &CitySeries,
    window: usize,
    horizon: usize,
    train_fraction: f64,
) -> Result<PreparedData> {
    let (train_points, test_points) = chronological_split(&series.points, train_fraction)?;
    let train_values: Vec<f64> = train_points.iter().map(|(_, v)| *v).collect();
    let test_values: Vec<f64> = test_points.iter().map(|(_, v)| *v).collect();
    let stats = NormStats::fit(&train_values)?;

    let span = |points: &[(NaiveDate, f64)]| Provenance {
        source: series.key.clone(),
        start: points.first().map(|(d, _)| *d),
        end: points.last().map(|(d, _)| *d),
    };

    let train = make_windows(
        &stats.apply_slice(&train_values),
        window,
        horizon,
        stats,
        span(&train_points),
    )?;
    let test = make_windows(
        &stats.apply_slice(&test_values),
        window,
        horizon,
        stats,
        span(&test_points),
    )?;
    Ok(PreparedData {
        train,
        test,
        normalization: stats,
    })
}

/// Parameters for the seeded sinusoid-plus-trend generator.
#[derive(Debug, Clone, Copy)]
pub struct SynthParams {
    pub length: usize,
    pub seed: u64,
    pub noise_std: f64,
    pub amplitude: f64,
    pub period: f64,
    pub trend: f64,
}

impl SynthParams {
    pub fn new(length: usize, seed: u64, noise_std: f64) -> Self {
        Self {
            length,
            seed,
            noise_std,
            amplitude: 15.0,
            period: 365.0,
            trend: 0.001,
        }
    }
}

/// `v[t] = amplitude * sin(2*pi*t/period) + trend*t + noise`, with seeded
/// Gaussian noise; an annual-cycle stand-in for real temperature data.
pub fn synthesize_series(length: usize, seed: u64, noise_std: f64) -> CitySeries {
    synthesize_series_with(SynthParams::new(length, seed, noise_std))
}

pub fn synthesize_series_with(params: SynthParams) -> CitySeries {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let noise = Normal::new(0.0, params.noise_std.max(0.0)).expect("valid noise std");
    let start = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");
    let points = (0..params.length)
        .map(|t| {
            let angle = 2.0 * std::f64::consts::PI * t as f64 / params.period;
            let clean = params.amplitude * angle.sin() + params.trend * t as f64;
            let eps: f64 = noise.sample(&mut rng);
            (
                start + chrono::Days::new(t as u64),
                clean + eps,
            )
        })
        .collect();
    CitySeries {
        key: "synthetic".to_string(),
        points,
    }
}
