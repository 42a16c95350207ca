//! Market benchmarks that require no estimation: futures-implied real-price
//! forecasts and interpolated professional-forecaster surveys.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dates::YearMonth;
use crate::error::{Error, Result};
use crate::series::MonthlySeries;
use crate::vintage::Metal;

/// Maturities quoted in the futures data.
pub const FUTURES_MATURITIES: [usize; 2] = [3, 15];
/// Fixed-horizon range covered by survey interpolation.
pub const SURVEY_HORIZONS: std::ops::RangeInclusive<usize> = 6..=18;
/// Months between consecutive survey event dates.
pub const SURVEY_EVENT_SPACING: usize = 3;

/// One futures quote: price agreed at `quote_date` for delivery
/// `maturity_months` ahead, in nominal USD per metric ton.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuturesQuote {
    pub metal: Metal,
    pub quote_date: YearMonth,
    pub maturity_months: usize,
    pub price: f64,
}

impl FuturesQuote {
    pub fn validate(&self) -> Result<()> {
        if self.price <= 0.0 {
            return Err(Error::Domain(format!(
                "futures price {} must be positive",
                self.price
            )));
        }
        if !FUTURES_MATURITIES.contains(&self.maturity_months) {
            return Err(Error::Config(format!(
                "futures maturity {} months not quoted (available: {FUTURES_MATURITIES:?})",
                self.maturity_months
            )));
        }
        Ok(())
    }
}

/// Projected CPI index used to express a nominal quote in real terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpiProjection {
    /// Index level at the projection origin.
    pub current: f64,
    pub horizon: usize,
    /// Sample mean h-period growth rate.
    pub growth: f64,
    /// Projected index level: current * (1 + growth).
    pub projected: f64,
}

/// Projects the CPI `h` months ahead using the sample mean h-period growth
/// rate over the given history window.
pub fn cpi_index_projection(cpi: &MonthlySeries, h: usize) -> Result<CpiProjection> {
    let v = cpi.values();
    if v.len() < h + 1 {
        return Err(Error::InsufficientData { needed: h + 1, got: v.len() });
    }
    if let Some((d, x)) = cpi.iter().find(|&(_, x)| x <= 0.0) {
        return Err(Error::Domain(format!("non-positive CPI {x} at {d}")));
    }
    let n = v.len() - h;
    let growth = (0..n).map(|i| v[i + h] / v[i] - 1.0).sum::<f64>() / n as f64;
    let current = v[v.len() - 1];
    let projected = current * (1.0 + growth);
    if projected <= 0.0 {
        return Err(Error::Domain(format!(
            "projected CPI {projected} not positive"
        )));
    }
    Ok(CpiProjection { current, horizon: h, growth, projected })
}

impl CpiProjection {
    /// Projected index relative to the deflation base level.
    pub fn relative_to(&self, base_level: f64) -> Result<f64> {
        if base_level <= 0.0 {
            return Err(Error::Domain("non-positive CPI base level".into()));
        }
        Ok(self.projected / base_level)
    }
}

/// Futures-implied real price: `F / p_hat`, with `deflator` the projected
/// CPI expressed relative to the deflation base month, so the result is in
/// the same real units as the evaluation tables.
pub fn futures_implied_real_price(quote: &FuturesQuote, proj: &CpiProjection, base_level: f64) -> Result<f64> {
    quote.validate()?;
    if proj.horizon != quote.maturity_months {
        return Err(Error::Config(format!(
            "CPI projection horizon {} does not match futures maturity {}",
            proj.horizon, quote.maturity_months
        )));
    }
    let deflator = proj.relative_to(base_level)?;
    Ok(quote.price / deflator)
}

/// One survey snapshot: mean forecasts for fixed quarterly event months.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedEventSurvey {
    pub metal: Metal,
    pub survey_date: YearMonth,
    /// (event month, mean forecast level), ascending by event month.
    pub events: Vec<(YearMonth, f64)>,
}

impl FixedEventSurvey {
    pub fn validate(&self) -> Result<()> {
        for w in self.events.windows(2) {
            let gap = w[1].0.months_since(w[0].0);
            if gap != SURVEY_EVENT_SPACING as i32 {
                return Err(Error::Integrity(format!(
                    "survey events {} and {} are {gap} months apart, expected {SURVEY_EVENT_SPACING}",
                    w[0].0, w[1].0
                )));
            }
        }
        if let Some((d, _)) = self.events.iter().find(|(d, _)| !d.is_quarter_end()) {
            return Err(Error::Integrity(format!(
                "survey event {d} is not a quarterly month"
            )));
        }
        Ok(())
    }
}

/// Converts a fixed-event survey into a fixed-horizon forecast `h` months
/// past the survey date, linearly weighting the two bracketing events:
/// `((d - |h-h1|)/d) y1 + ((d - |h-h2|)/d) y2`.
pub fn fixed_event_to_fixed_horizon(survey: &FixedEventSurvey, h: usize) -> Result<f64> {
    survey.validate()?;
    let target = survey.survey_date.add_months(h as i32);
    let d = SURVEY_EVENT_SPACING as f64;
    // exact event hit: single term with weight 1
    if let Some(&(_, y)) = survey.events.iter().find(|(e, _)| *e == target) {
        return Ok(y);
    }
    let pair = survey
        .events
        .windows(2)
        .find(|w| w[0].0 < target && target < w[1].0);
    match pair {
        Some(w) => {
            let (e1, y1) = w[0];
            let (e2, y2) = w[1];
            let d1 = target.months_since(e1).unsigned_abs() as f64;
            let d2 = e2.months_since(target).unsigned_abs() as f64;
            // single division keeps integer-weight cases exact
            Ok(((d - d1) * y1 + (d - d2) * y2) / d)
        }
        None => Err(Error::Coverage(format!(
            "horizon {h} (target {target}) not bracketed by survey events"
        ))),
    }
}

/// Reads `metal,quote_date,maturity_months,price` rows.
pub fn read_futures_csv(path: &Path) -> Result<Vec<FuturesQuote>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::parse(0, format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::parse(line, e.to_string()))?;
        if rec.len() != 4 {
            return Err(Error::parse(line, format!("expected 4 fields, got {}", rec.len())));
        }
        let quote = FuturesQuote {
            metal: rec[0]
                .parse()
                .map_err(|_| Error::parse(line, format!("bad metal '{}'", &rec[0])))?,
            quote_date: rec[1]
                .parse()
                .map_err(|_| Error::parse(line, format!("bad quote_date '{}'", &rec[1])))?,
            maturity_months: rec[2]
                .parse()
                .map_err(|_| Error::parse(line, format!("bad maturity '{}'", &rec[2])))?,
            price: rec[3]
                .parse()
                .map_err(|_| Error::parse(line, format!("bad price '{}'", &rec[3])))?,
        };
        quote.validate().map_err(|e| e.context(&format!("line {line}")))?;
        out.push(quote);
    }
    Ok(out)
}

/// Reads `metal,survey_date,event_date,mean_forecast` rows, grouping them
/// into one survey per (metal, survey date).
pub fn read_surveys_csv(path: &Path) -> Result<Vec<FixedEventSurvey>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::parse(0, format!("{}: {e}", path.display())))?;
    let mut grouped: std::collections::BTreeMap<(Metal, YearMonth), Vec<(YearMonth, f64)>> =
        Default::default();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::parse(line, e.to_string()))?;
        if rec.len() != 4 {
            return Err(Error::parse(line, format!("expected 4 fields, got {}", rec.len())));
        }
        let metal: Metal = rec[0]
            .parse()
            .map_err(|_| Error::parse(line, format!("bad metal '{}'", &rec[0])))?;
        let survey_date: YearMonth = rec[1]
            .parse()
            .map_err(|_| Error::parse(line, format!("bad survey_date '{}'", &rec[1])))?;
        let event: YearMonth = rec[2]
            .parse()
            .map_err(|_| Error::parse(line, format!("bad event_date '{}'", &rec[2])))?;
        let value: f64 = rec[3]
            .parse()
            .map_err(|_| Error::parse(line, format!("bad mean_forecast '{}'", &rec[3])))?;
        grouped.entry((metal, survey_date)).or_default().push((event, value));
    }
    grouped
        .into_iter()
        .map(|((metal, survey_date), mut events)| {
            events.sort_by_key(|&(e, _)| e);
            let s = FixedEventSurvey { metal, survey_date, events };
            s.validate()?;
            Ok(s)
        })
        .collect()
}
