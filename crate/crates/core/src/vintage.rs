//! First-release data vintages: storage, merging, transforms, deflation.
//!
//! A vintage is the snapshot of one variable as published at a given month.
//! Because only first releases are stored, successive vintages of a variable
//! extend each other by exactly one observation and never disagree on shared
//! dates; the merged series is the diagonal of the publication matrix.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dates::YearMonth;
use crate::error::{Error, Result};
use crate::series::MonthlySeries;

/// Predictor group tags, mirroring the dataset's category structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Prices,
    EcAct,
    Cu,
    Et,
    ExRates,
    Inventories,
    Target,
}

impl FromStr for Group {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "prices" => Ok(Group::Prices),
            "ec_act" | "ecact" => Ok(Group::EcAct),
            "cu" => Ok(Group::Cu),
            "et" => Ok(Group::Et),
            "ex_rates" | "exrates" => Ok(Group::ExRates),
            "inventories" => Ok(Group::Inventories),
            "target" => Ok(Group::Target),
            other => Err(Error::Config(format!("unknown group '{other}'"))),
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Group::Prices => "prices",
            Group::EcAct => "ec_act",
            Group::Cu => "cu",
            Group::Et => "et",
            Group::ExRates => "ex_rates",
            Group::Inventories => "inventories",
            Group::Target => "target",
        };
        f.write_str(s)
    }
}

/// Transformation applied to a variable before it enters a forecasting model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    None,
    Log,
    DLog,
    D2Log,
}

impl Transform {
    /// Leading observations consumed by differencing.
    pub fn leading_drop(self) -> usize {
        match self {
            Transform::None | Transform::Log => 0,
            Transform::DLog => 1,
            Transform::D2Log => 2,
        }
    }
}

impl FromStr for Transform {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Transform::None),
            "log" => Ok(Transform::Log),
            "dlog" => Ok(Transform::DLog),
            "d2log" => Ok(Transform::D2Log),
            other => Err(Error::Config(format!("unknown transform '{other}'"))),
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Transform::None => "none",
            Transform::Log => "log",
            Transform::DLog => "dlog",
            Transform::D2Log => "d2log",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceFrequency {
    Monthly,
    DailyAveraged,
}

/// Static description of one variable in the panel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub id: String,
    pub group: Group,
    pub transform: Transform,
    /// Months between a reference period and its first publication.
    pub publication_lag: u32,
    pub source_frequency: SourceFrequency,
    /// For metal price and inventory variables, the metal they refer to.
    #[serde(default)]
    pub metal: Option<Metal>,
}

/// One variable's snapshot as published at `as_of`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vintage {
    pub as_of: YearMonth,
    pub values: MonthlySeries,
}

impl Vintage {
    /// Number of months between `as_of` and the vintage's last observation.
    pub fn missing_tail(&self, as_of: YearMonth) -> u32 {
        as_of.months_since(self.values.end()).max(0) as u32
    }
}

/// One variable with its full vintage history.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariableVintages {
    pub meta: SeriesMeta,
    pub vintages: Vec<Vintage>,
}

impl VariableVintages {
    /// Latest vintage published at or before `as_of`.
    pub fn vintage_at(&self, as_of: YearMonth) -> Option<&Vintage> {
        self.vintages.iter().rev().find(|v| v.as_of <= as_of)
    }
}

/// The full real-time information set: per-variable first-release vintages.
/// Immutable after construction; safe to share across parallel workers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RealTimePanel {
    variables: Vec<VariableVintages>,
    span: (YearMonth, YearMonth),
}

impl RealTimePanel {
    /// Validates the first-release structure: within each variable,
    /// consecutive vintages agree exactly on shared dates and extend by
    /// exactly one observation.
    pub fn new(variables: Vec<VariableVintages>) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::Config("panel has no variables".into()));
        }
        let mut ids = BTreeSet::new();
        for var in &variables {
            if !ids.insert(var.meta.id.clone()) {
                return Err(Error::Integrity(format!(
                    "duplicate variable id '{}'",
                    var.meta.id
                )));
            }
            if var.vintages.is_empty() {
                return Err(Error::Integrity(format!(
                    "variable '{}' has no vintages",
                    var.meta.id
                )));
            }
            for pair in var.vintages.windows(2) {
                let (a, b) = (&pair[0], &pair[1]);
                if b.as_of <= a.as_of {
                    return Err(Error::Integrity(format!(
                        "'{}': vintages not strictly ordered at {}",
                        var.meta.id, b.as_of
                    )));
                }
                if b.values.start() != a.values.start()
                    || b.values.len() != a.values.len() + 1
                {
                    return Err(Error::Integrity(format!(
                        "'{}': vintage {} does not extend {} by exactly one observation",
                        var.meta.id, b.as_of, a.as_of
                    )));
                }
                if a.values.values() != &b.values.values()[..a.values.len()] {
                    return Err(Error::Integrity(format!(
                        "'{}': first-release violation between vintages {} and {}",
                        var.meta.id, a.as_of, b.as_of
                    )));
                }
            }
        }
        let first = variables
            .iter()
            .map(|v| v.vintages[0].as_of)
            .min()
            .expect("non-empty");
        let last = variables
            .iter()
            .map(|v| v.vintages.last().expect("non-empty").as_of)
            .max()
            .expect("non-empty");
        Ok(RealTimePanel {
            variables,
            span: (first, last),
        })
    }

    pub fn span(&self) -> (YearMonth, YearMonth) {
        self.span
    }

    pub fn variables(&self) -> &[VariableVintages] {
        &self.variables
    }

    pub fn variable(&self, id: &str) -> Option<&VariableVintages> {
        self.variables.iter().find(|v| v.meta.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.variables.iter().map(|v| v.meta.id.as_str())
    }
}

/// Which real metal price a deflated series refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metal {
    Aluminum,
    Copper,
    Nickel,
    Zinc,
}

impl Metal {
    pub const ALL: [Metal; 4] = [Metal::Aluminum, Metal::Copper, Metal::Nickel, Metal::Zinc];

    pub fn name(self) -> &'static str {
        match self {
            Metal::Aluminum => "aluminum",
            Metal::Copper => "copper",
            Metal::Nickel => "nickel",
            Metal::Zinc => "zinc",
        }
    }
}

impl FromStr for Metal {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "aluminum" | "aluminium" => Ok(Metal::Aluminum),
            "copper" => Ok(Metal::Copper),
            "nickel" => Ok(Metal::Nickel),
            "zinc" => Ok(Metal::Zinc),
            other => Err(Error::Config(format!("unknown metal '{other}'"))),
        }
    }
}

impl fmt::Display for Metal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Deflated price path in USD per metric ton at a fixed CPI base month.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RealPriceSeries {
    pub metal: Metal,
    pub base_month: YearMonth,
    pub values: MonthlySeries,
}

/// Reads a vintage CSV: header `obs_date,<as_of_1>,<as_of_2>,...`, one row
/// per observation date, empty cell = not yet published.
///
/// Returned vintages are ordered by `as_of`. When `meta.publication_lag`
/// implies a last-observation date, it is enforced.
pub fn ingest_vintage_csv(path: &Path, meta: &SeriesMeta) -> Result<Vec<Vintage>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_path(path)
        .map_err(|e| Error::parse(0, format!("{}: {e}", path.display())))?;

    let mut rows = reader.records();
    let header = match rows.next() {
        None => return Ok(Vec::new()), // empty file -> empty list
        Some(r) => r.map_err(|e| Error::parse(1, e.to_string()))?,
    };
    if header.get(0) != Some("obs_date") {
        return Err(Error::parse(1, "first header field must be 'obs_date'"));
    }
    let mut as_ofs = Vec::new();
    let mut seen = BTreeSet::new();
    for i in 1..header.len() {
        let raw = header.get(i).unwrap_or("");
        let as_of: YearMonth = raw
            .parse()
            .map_err(|_| Error::parse(1, format!("bad as_of column '{raw}'")))?;
        if !seen.insert(as_of) {
            return Err(Error::Integrity(format!(
                "duplicated as_of column {as_of} in {}",
                path.display()
            )));
        }
        as_ofs.push(as_of);
    }

    let mut obs_dates: Vec<YearMonth> = Vec::new();
    let mut cells: Vec<Vec<Option<f64>>> = vec![Vec::new(); as_ofs.len()];
    for (idx, record) in rows.enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| Error::parse(line, e.to_string()))?;
        if record.len() != as_ofs.len() + 1 {
            return Err(Error::parse(
                line,
                format!("expected {} fields, got {}", as_ofs.len() + 1, record.len()),
            ));
        }
        let date: YearMonth = record
            .get(0)
            .unwrap()
            .parse()
            .map_err(|_| Error::parse(line, format!("bad obs_date '{}'", record.get(0).unwrap())))?;
        if let Some(&prev) = obs_dates.last() {
            if date <= prev {
                return Err(Error::Integrity(format!(
                    "non-monotone observation dates at line {line} ({date} after {prev})"
                )));
            }
        }
        obs_dates.push(date);
        for (col, slot) in cells.iter_mut().enumerate() {
            let raw = record.get(col + 1).unwrap().trim();
            if raw.is_empty() {
                slot.push(None);
            } else {
                let v: f64 = raw
                    .parse()
                    .map_err(|_| Error::parse(line, format!("bad value '{raw}'")))?;
                slot.push(Some(v));
            }
        }
    }

    let mut order: Vec<usize> = (0..as_ofs.len()).collect();
    order.sort_by_key(|&i| as_ofs[i]);

    let mut vintages = Vec::with_capacity(as_ofs.len());
    for &col in &order {
        let as_of = as_ofs[col];
        let pairs: Vec<(YearMonth, f64)> = obs_dates
            .iter()
            .zip(&cells[col])
            .filter_map(|(&d, v)| v.map(|v| (d, v)))
            .collect();
        if pairs.is_empty() {
            return Err(Error::Integrity(format!(
                "vintage {as_of} in {} has no observations",
                path.display()
            )));
        }
        // Interior gaps inside a column are integrity errors; from_pairs
        // rejects anything non-contiguous.
        let contiguous_rows = obs_dates
            .windows(2)
            .all(|w| w[1].months_since(w[0]) == 1);
        let values = MonthlySeries::from_pairs(&pairs).map_err(|_| {
            Error::Integrity(format!(
                "vintage {as_of} in {} has an interior gap{}",
                path.display(),
                if contiguous_rows { "" } else { " (rows are not consecutive months)" }
            ))
        })?;
        let expected_end = as_of.add_months(-(meta.publication_lag as i32));
        if values.end() != expected_end {
            return Err(Error::Integrity(format!(
                "vintage {as_of} of '{}' ends at {} but publication lag {} implies {expected_end}",
                meta.id,
                values.end(),
                meta.publication_lag
            )));
        }
        vintages.push(Vintage { as_of, values });
    }
    Ok(vintages)
}

/// Collapses ordered vintages into the first-release series: for each
/// observation date, the value from the earliest vintage containing it.
pub fn merge_first_release(vintages: &[Vintage]) -> Result<MonthlySeries> {
    if vintages.is_empty() {
        return Err(Error::Degenerate("no vintages to merge".into()));
    }
    let mut merged = vintages[0].values.clone();
    for v in &vintages[1..] {
        for (date, value) in v.values.iter() {
            match merged.get(date) {
                Some(existing) => {
                    if existing != value {
                        return Err(Error::Integrity(format!(
                            "first-release violation at {date}: {existing} (earlier vintage) vs {value} (vintage {})",
                            v.as_of
                        )));
                    }
                }
                None => {
                    if date != merged.end().next() {
                        return Err(Error::Integrity(format!(
                            "vintage {} jumps from {} to {date}",
                            v.as_of,
                            merged.end()
                        )));
                    }
                    merged.push(value);
                }
            }
        }
    }
    Ok(merged)
}

/// Rebases index vintages to a common base: every vintage is rescaled so its
/// first observation equals 100 while all within-vintage growth rates are
/// preserved.
pub fn rebase_index(vintages: &[Vintage]) -> Result<Vec<Vintage>> {
    if vintages.is_empty() {
        return Ok(Vec::new());
    }
    let first_date = vintages[0].values.start();
    for v in vintages {
        if v.values.start() != first_date {
            return Err(Error::Integrity(format!(
                "vintage {} starts at {}, expected common first observation {first_date}",
                v.as_of,
                v.values.start()
            )));
        }
        if let Some((d, x)) = v.values.iter().find(|&(_, x)| x <= 0.0) {
            return Err(Error::Domain(format!(
                "non-positive index value {x} at {d} in vintage {}",
                v.as_of
            )));
        }
    }
    Ok(vintages
        .iter()
        .map(|v| {
            let vals = v.values.values();
            let mut out = Vec::with_capacity(vals.len());
            out.push(100.0);
            for i in 1..vals.len() {
                let prev: f64 = out[i - 1];
                out.push(prev * (vals[i] / vals[i - 1]));
            }
            Vintage {
                as_of: v.as_of,
                values: MonthlySeries::new(first_date, out).expect("non-empty"),
            }
        })
        .collect())
}

/// Applies a transformation code to a series. Differencing drops leading
/// observations, so the output starts later than the input.
pub fn apply_transform(series: &MonthlySeries, code: Transform) -> Result<MonthlySeries> {
    let needs_log = matches!(code, Transform::Log | Transform::DLog | Transform::D2Log);
    if needs_log {
        if let Some((d, x)) = series.iter().find(|&(_, x)| x <= 0.0) {
            return Err(Error::Domain(format!(
                "non-positive value {x} at {d} under {code} transform"
            )));
        }
    }
    match code {
        Transform::None => Ok(series.clone()),
        Transform::Log => Ok(series.map(f64::ln)),
        Transform::DLog => {
            let v = series.values();
            if v.len() < 2 {
                return Err(Error::InsufficientData { needed: 2, got: v.len() });
            }
            let out: Vec<f64> = v.windows(2).map(|w| w[1].ln() - w[0].ln()).collect();
            MonthlySeries::new(series.start().next(), out)
        }
        Transform::D2Log => {
            let v = series.values();
            if v.len() < 3 {
                return Err(Error::InsufficientData { needed: 3, got: v.len() });
            }
            let d1: Vec<f64> = v.windows(2).map(|w| w[1].ln() - w[0].ln()).collect();
            let out: Vec<f64> = d1.windows(2).map(|w| w[1] - w[0]).collect();
            MonthlySeries::new(series.start().add_months(2), out)
        }
    }
}

/// Deflates a nominal price path with a CPI path:
/// `real_t = nominal_t * CPI(base_month) / CPI(t)`.
pub fn deflate_nominal(
    metal: Metal,
    nominal: &MonthlySeries,
    cpi: &MonthlySeries,
    base_month: YearMonth,
) -> Result<RealPriceSeries> {
    let cpi_base = cpi.get(base_month).ok_or_else(|| {
        Error::Coverage(format!("CPI series does not cover base month {base_month}"))
    })?;
    if cpi_base <= 0.0 {
        return Err(Error::Domain(format!("non-positive CPI at base {base_month}")));
    }
    let mut out = Vec::with_capacity(nominal.len());
    for (date, p) in nominal.iter() {
        let c = cpi.get(date).ok_or_else(|| {
            Error::Coverage(format!(
                "CPI series does not cover {date}; was the nowcast fill skipped?"
            ))
        })?;
        if c <= 0.0 {
            return Err(Error::Domain(format!("non-positive CPI at {date}")));
        }
        let real = p * cpi_base / c;
        if real <= 0.0 {
            return Err(Error::Domain(format!("non-positive real price at {date}")));
        }
        out.push(real);
    }
    Ok(RealPriceSeries {
        metal,
        base_month,
        values: MonthlySeries::new(nominal.start(), out)?,
    })
}

/// Number of missing trailing months per variable as of `as_of`, in panel
/// order.
pub fn ragged_edge_profile(
    panel: &RealTimePanel,
    as_of: YearMonth,
) -> Result<Vec<(String, u32)>> {
    panel
        .variables()
        .iter()
        .map(|var| {
            let v = var
                .vintage_at(as_of)
                .ok_or_else(|| Error::MissingVariable(var.meta.id.clone()))?;
            Ok((var.meta.id.clone(), v.missing_tail(as_of)))
        })
        .collect()
}

/// Data manifest: `key = value` lines with dotted keys binding variable ids
/// to files and metadata, e.g.
///
/// ```text
/// IP.file = ip.csv
/// IP.group = ec_act
/// IP.transform = dlog
/// IP.lag = 2
/// ```
#[derive(Debug, Clone)]
pub struct ManifestEntry {
    pub meta: SeriesMeta,
    pub file: String,
    /// Metal price variables carry the metal they quote.
    pub metal: Option<Metal>,
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    struct Partial {
        file: Option<String>,
        group: Option<Group>,
        transform: Option<Transform>,
        lag: Option<u32>,
        frequency: Option<SourceFrequency>,
        metal: Option<Metal>,
    }
    let mut order: Vec<String> = Vec::new();
    let mut parts: std::collections::BTreeMap<String, Partial> = Default::default();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| Error::parse(line, format!("expected key = value, got '{trimmed}'")))?;
        let (id, field) = key
            .trim()
            .split_once('.')
            .ok_or_else(|| Error::parse(line, format!("expected <id>.<field> key, got '{key}'")))?;
        let value = value.trim();
        if !parts.contains_key(id) {
            order.push(id.to_string());
            parts.insert(
                id.to_string(),
                Partial {
                    file: None,
                    group: None,
                    transform: None,
                    lag: None,
                    frequency: None,
                    metal: None,
                },
            );
        }
        let p = parts.get_mut(id).unwrap();
        match field.trim() {
            "file" => p.file = Some(value.to_string()),
            "group" => p.group = Some(value.parse()?),
            "transform" => p.transform = Some(value.parse()?),
            "lag" => {
                p.lag = Some(
                    value
                        .parse()
                        .map_err(|_| Error::parse(line, format!("bad lag '{value}'")))?,
                )
            }
            "frequency" => {
                p.frequency = Some(match value.to_ascii_lowercase().as_str() {
                    "monthly" => SourceFrequency::Monthly,
                    "daily_averaged" => SourceFrequency::DailyAveraged,
                    other => {
                        return Err(Error::parse(line, format!("unknown frequency '{other}'")))
                    }
                })
            }
            "metal" => p.metal = Some(value.parse()?),
            other => return Err(Error::parse(line, format!("unknown field '{other}'"))),
        }
    }

    order
        .into_iter()
        .map(|id| {
            let p = parts.remove(&id).unwrap();
            let file = p
                .file
                .ok_or_else(|| Error::Config(format!("manifest entry '{id}' missing file")))?;
            let group = p
                .group
                .ok_or_else(|| Error::Config(format!("manifest entry '{id}' missing group")))?;
            let transform = p
                .transform
                .ok_or_else(|| Error::Config(format!("manifest entry '{id}' missing transform")))?;
            Ok(ManifestEntry {
                meta: SeriesMeta {
                    id,
                    group,
                    transform,
                    publication_lag: p.lag.unwrap_or(0),
                    source_frequency: p.frequency.unwrap_or(SourceFrequency::Monthly),
                    metal: p.metal,
                },
                file,
                metal: p.metal,
            })
        })
        .collect()
}

/// Loads a panel from a manifest file, reading each referenced vintage CSV
/// relative to the manifest's directory.
pub fn load_panel(manifest_path: &Path) -> Result<(RealTimePanel, Vec<ManifestEntry>)> {
    let text = std::fs::read_to_string(manifest_path)?;
    let entries = parse_manifest(&text)?;
    if entries.is_empty() {
        return Err(Error::Config(format!(
            "manifest {} binds no variables",
            manifest_path.display()
        )));
    }
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut variables = Vec::with_capacity(entries.len());
    for entry in &entries {
        let vintages = ingest_vintage_csv(&dir.join(&entry.file), &entry.meta)?;
        if vintages.is_empty() {
            return Err(Error::Integrity(format!(
                "variable '{}' has an empty vintage file",
                entry.meta.id
            )));
        }
        variables.push(VariableVintages {
            meta: entry.meta.clone(),
            vintages,
        });
    }
    Ok((RealTimePanel::new(variables)?, entries))
}
