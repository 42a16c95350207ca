//! The forecasting model zoo: random walk with drift, autoregressions,
//! distributed-lag and diffusion-index regressions, and (factor-augmented)
//! vector autoregressions, all estimated as direct h-step projections over
//! a rolling window of transformed, nowcast-completed data.
//!
//! Models forecast the one-month log growth of the real price at each
//! horizon through separate per-horizon projections; level forecasts
//! cumulate the growth fan from the origin price. No RNG enters this
//! module: every forecast is a pure function of (window, spec).

mod projection;

pub use projection::{direct_projection_fit, ProjectionFit};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dates::YearMonth;
use crate::error::{Error, Result};
use crate::factors::{extract_factors, standardize_panel, FactorScale};
use crate::nowcast::Snapshot;
use crate::vintage::{apply_transform, deflate_nominal, Group, Metal, Transform};

/// Placeholder ids resolved per metal in VAR/FAVAR endogenous lists.
pub const TARGET_TOKEN: &str = "@target";
pub const INVENTORY_TOKEN: &str = "@inventory";

/// Lag-order choice: fixed or AIC-selected up to a bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lags {
    Fixed(usize),
    Aic { max: usize },
}

impl Lags {
    fn candidates(self) -> Vec<usize> {
        match self {
            Lags::Fixed(p) => vec![p],
            Lags::Aic { max } => (1..=max).collect(),
        }
    }

    fn max(self) -> usize {
        match self {
            Lags::Fixed(p) => p,
            Lags::Aic { max } => max,
        }
    }

    pub fn validate(self) -> Result<()> {
        if self.max() == 0 {
            return Err(Error::Config("lag order must be >= 1".into()));
        }
        Ok(())
    }
}

/// Exogenous regressor selection for ARDL models.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorSet {
    Ids(Vec<String>),
    Group(Group),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum ModelFamily {
    Rwd,
    Ar {
        p: Lags,
    },
    Ardl {
        p: Lags,
        s: Lags,
        predictors: PredictorSet,
    },
    Ardi {
        p: Lags,
        s: Lags,
        factors: usize,
    },
    Var {
        p: usize,
        endogenous: Vec<String>,
        /// Iterate a one-step system instead of direct per-horizon fits
        /// (sensitivity check).
        #[serde(default)]
        iterated: bool,
    },
    Favar {
        p: usize,
        factors: usize,
        endogenous: Vec<String>,
        #[serde(default)]
        iterated: bool,
    },
}

/// Default endogenous block: the metal's own price growth, its inventory,
/// and primary-metal new orders.
pub fn default_endogenous() -> Vec<String> {
    vec![
        TARGET_TOKEN.to_string(),
        INVENTORY_TOKEN.to_string(),
        "NO-M".to_string(),
    ]
}

/// A forecasting model: display id plus family parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub id: String,
    #[serde(flatten)]
    pub family: ModelFamily,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match &self.family {
            ModelFamily::Rwd => Ok(()),
            ModelFamily::Ar { p } => p.validate(),
            ModelFamily::Ardl { p, s, .. } => {
                p.validate()?;
                s.validate()
            }
            ModelFamily::Ardi { p, s, .. } => {
                p.validate()?;
                s.validate()
            }
            ModelFamily::Var { p, endogenous, .. }
            | ModelFamily::Favar { p, endogenous, .. } => {
                if *p == 0 {
                    return Err(Error::Config(format!("{}: VAR order must be >= 1", self.id)));
                }
                if endogenous.is_empty() {
                    return Err(Error::Config(format!(
                        "{}: endogenous set must not be empty",
                        self.id
                    )));
                }
                Ok(())
            }
        }
    }
}

/// One transformed predictor column over the window dates.
#[derive(Debug, Clone)]
pub struct PredictorColumn {
    pub id: String,
    pub group: Group,
    pub values: Vec<f64>,
}

/// Rolling-window slice of transformed data for one (metal, origin) pair.
/// Everything a model needs to produce its growth-forecast fan.
#[derive(Debug, Clone)]
pub struct DataWindow {
    pub metal: Metal,
    pub origin: YearMonth,
    /// Window dates, contiguous, ending at `origin`.
    pub dates: Vec<YearMonth>,
    /// One-month log growth of the real target price over `dates`.
    pub target: Vec<f64>,
    /// Real price level (deflated) at the origin.
    pub origin_price: f64,
    pub predictors: Vec<PredictorColumn>,
    /// Column id of the target metal's own price growth.
    pub target_price_id: String,
    /// Column id of the target metal's inventory series, when present.
    pub inventory_id: Option<String>,
    pub factor_scale: FactorScale,
}

impl DataWindow {
    /// Builds the window from a completed snapshot: deflates every metal
    /// price with the snapshot CPI (rebased to `base_month`), applies each
    /// variable's transform, and slices the last `window` months.
    pub fn from_snapshot(
        snapshot: &Snapshot,
        metal: Metal,
        base_month: YearMonth,
        window: usize,
        factor_scale: FactorScale,
    ) -> Result<DataWindow> {
        if window < 2 {
            return Err(Error::Config("window must be at least 2 months".into()));
        }
        let origin = snapshot.as_of;
        let win_start = origin.add_months(-(window as i32) + 1);
        let cpi = &snapshot
            .series_of("CPI")
            .ok_or_else(|| Error::Config("snapshot has no 'CPI' variable".into()))?
            .values;

        let mut predictors = Vec::with_capacity(snapshot.series.len());
        let mut target: Option<Vec<f64>> = None;
        let mut target_price_id = None;
        let mut inventory_id = None;
        let mut origin_price = None;
        for s in &snapshot.series {
            let transformed = if s.meta.group == Group::Target {
                let m = s.meta.metal.ok_or_else(|| {
                    Error::Config(format!("price variable '{}' has no metal tag", s.meta.id))
                })?;
                let real = deflate_nominal(m, &s.values, cpi, base_month)
                    .map_err(|e| e.context(&s.meta.id))?;
                if m == metal {
                    origin_price = Some(real.values.get(origin).ok_or_else(|| {
                        Error::Coverage(format!("real price missing at origin {origin}"))
                    })?);
                    target_price_id = Some(s.meta.id.clone());
                }
                apply_transform(&real.values, Transform::DLog)
            } else {
                if s.meta.group == Group::Inventories && s.meta.metal == Some(metal) {
                    inventory_id = Some(s.meta.id.clone());
                }
                apply_transform(&s.values, s.meta.transform)
            }
            .map_err(|e| e.context(&s.meta.id))?;
            let sliced = transformed
                .slice(win_start, origin)
                .map_err(|e| e.context(&s.meta.id))?;
            let column = PredictorColumn {
                id: s.meta.id.clone(),
                group: s.meta.group,
                values: sliced.values().to_vec(),
            };
            if s.meta.group == Group::Target && s.meta.metal == Some(metal) {
                target = Some(column.values.clone());
            }
            predictors.push(column);
        }
        let target = target.ok_or_else(|| {
            Error::Config(format!("snapshot has no target price variable for {metal}"))
        })?;
        Ok(DataWindow {
            metal,
            origin,
            dates: win_start.range_to(origin).collect(),
            target,
            origin_price: origin_price.expect("set with target"),
            predictors,
            target_price_id: target_price_id.expect("set with target"),
            inventory_id,
            factor_scale,
        })
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn column(&self, id: &str) -> Option<&PredictorColumn> {
        self.predictors.iter().find(|c| c.id == id)
    }

    /// Resolves a predictor selection to column references. A group
    /// selection keeps every column in the group except the target's own
    /// price, so other metals' prices act as predictors for this one.
    pub fn resolve_predictors(&self, set: &PredictorSet) -> Result<Vec<&PredictorColumn>> {
        match set {
            PredictorSet::Ids(ids) => ids
                .iter()
                .map(|id| {
                    self.column(id)
                        .ok_or_else(|| Error::Config(format!("unknown predictor id '{id}'")))
                })
                .collect(),
            PredictorSet::Group(g) => Ok(self
                .predictors
                .iter()
                .filter(|c| c.group == *g && c.id != self.target_price_id)
                .collect()),
        }
    }

    fn resolve_endogenous(&self, ids: &[String]) -> Result<Vec<&PredictorColumn>> {
        ids.iter()
            .map(|raw| {
                let id = match raw.as_str() {
                    TARGET_TOKEN => self.target_price_id.as_str(),
                    INVENTORY_TOKEN => self
                        .inventory_id
                        .as_deref()
                        .ok_or_else(|| {
                            Error::Config(format!("no inventory series for {}", self.metal))
                        })?,
                    other => other,
                };
                self.column(id)
                    .ok_or_else(|| Error::Config(format!("unknown endogenous id '{id}'")))
            })
            .collect()
    }

    /// Factor scores over the window, excluding the given column ids.
    pub fn factor_columns(&self, r: usize, exclude: &[String]) -> Result<Vec<Vec<f64>>> {
        if r == 0 {
            return Ok(Vec::new());
        }
        let columns: Vec<(String, Vec<f64>)> = self
            .predictors
            .iter()
            .map(|c| (c.id.clone(), c.values.clone()))
            .collect();
        let std = standardize_panel(&columns, exclude)?;
        let fm = extract_factors(&std, r, self.factor_scale, exclude.to_vec())?;
        Ok((0..r)
            .map(|k| (0..self.len()).map(|i| fm.factors[(i, k)]).collect())
            .collect())
    }
}

/// Assembles the regression design for an ARDL-type model: rows are window
/// indices `first_row..len`, columns `[1, y lags 0..p-1, per-lag Z blocks]`.
fn build_design(
    target: &[f64],
    z_cols: &[&[f64]],
    p: usize,
    s: usize,
    first_row: usize,
) -> (DMatrix<f64>, Vec<f64>) {
    let len = target.len();
    let rows = len - first_row;
    let k_z = z_cols.len();
    let ncols = 1 + p + s * k_z;
    let mut x = DMatrix::zeros(rows, ncols);
    let mut y = Vec::with_capacity(rows);
    for (row, i) in (first_row..len).enumerate() {
        x[(row, 0)] = 1.0;
        for lag in 0..p {
            x[(row, 1 + lag)] = target[i - lag];
        }
        for lag in 0..s {
            for (z_idx, z) in z_cols.iter().enumerate() {
                x[(row, 1 + p + lag * k_z + z_idx)] = z[i - lag];
            }
        }
        y.push(target[i]);
    }
    (x, y)
}

/// Fits one ARDL direct projection at horizon `h` and returns the fit plus
/// the origin-dated forecast.
fn fit_ardl_once(
    target: &[f64],
    z_cols: &[&[f64]],
    p: usize,
    s: usize,
    first_row: usize,
    h: usize,
) -> Result<(ProjectionFit, f64)> {
    let (x, y) = build_design(target, z_cols, p, s, first_row);
    let fit = direct_projection_fit(&y, &x, h)?;
    let last = x.row(x.nrows() - 1).iter().copied().collect::<Vec<f64>>();
    let forecast = fit.predict(&last);
    Ok((fit, forecast))
}

/// A fitted ARDL-type direct projection with its coefficients unpacked
/// into the intercept, own-lag, and per-lag predictor blocks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectProjection {
    pub horizon: usize,
    pub intercept: f64,
    /// Coefficients on the target at lags 0..p-1 (today backwards).
    pub own_coeffs: Vec<f64>,
    /// `predictor_coeffs[lag][k]`: coefficient on predictor k at that lag.
    pub predictor_coeffs: Vec<Vec<f64>>,
    /// Maximum-likelihood residual variance on the fitting sample.
    pub resid_var: f64,
    pub nobs: usize,
}

impl DirectProjection {
    fn from_fit(fit: &ProjectionFit, p: usize, k_z: usize) -> Self {
        let s = (fit.coeffs.len() - 1 - p).checked_div(k_z).unwrap_or(0);
        DirectProjection {
            horizon: fit.horizon,
            intercept: fit.coeffs[0],
            own_coeffs: fit.coeffs[1..1 + p].to_vec(),
            predictor_coeffs: (0..s)
                .map(|lag| fit.coeffs[1 + p + lag * k_z..1 + p + (lag + 1) * k_z].to_vec())
                .collect(),
            resid_var: fit.resid_var,
            nobs: fit.nobs,
        }
    }
}

/// Fits an ARDL direct projection at one horizon and returns the
/// block-structured coefficients together with the origin-dated forecast.
pub fn ardl_projection(
    win: &DataWindow,
    p: usize,
    s: usize,
    predictors: &PredictorSet,
    h: usize,
) -> Result<(DirectProjection, f64)> {
    let cols = win.resolve_predictors(predictors)?;
    let z: Vec<&[f64]> = cols.iter().map(|c| c.values.as_slice()).collect();
    let (fit, forecast) = ardl_forecast(&win.target, &z, Lags::Fixed(p), Lags::Fixed(s), h)?;
    Ok((DirectProjection::from_fit(&fit, p, z.len()), forecast))
}

/// ARDL family engine shared by AR / ARDL / ARDI: joint (p, s) selection by
/// AIC on the common aligned sample when requested.
fn ardl_forecast(
    target: &[f64],
    z_cols: &[&[f64]],
    p: Lags,
    s: Lags,
    h: usize,
) -> Result<(ProjectionFit, f64)> {
    let k_z = z_cols.len();
    let p_cands = p.candidates();
    let s_cands = if k_z == 0 { vec![0] } else { s.candidates() };
    // all candidates fit on the sample aligned to the largest lags
    let lag_reach = if k_z == 0 { p.max() } else { p.max().max(s.max()) };
    let first_row = lag_reach - 1;
    let mut best: Option<(f64, ProjectionFit, f64)> = None;
    for &pc in &p_cands {
        for &sc in &s_cands {
            let (fit, fc) = fit_ardl_once(target, z_cols, pc, sc, first_row, h)?;
            let aic = fit.aic();
            if best.as_ref().is_none_or(|(b, _, _)| aic < *b) {
                best = Some((aic, fit, fc));
            }
        }
    }
    let (_, fit, fc) = best.expect("at least one candidate");
    Ok((fit, fc))
}

/// Fits the target equation of a direct-projection (FA)VAR at horizon `h`:
/// target growth regressed on `p` lags of all endogenous columns plus,
/// optionally, `p` lags of factor columns.
pub fn fit_var_equation(
    win: &DataWindow,
    p: usize,
    endogenous: &[String],
    factor_cols: &[Vec<f64>],
    h: usize,
) -> Result<(ProjectionFit, f64)> {
    let endo = win.resolve_endogenous(endogenous)?;
    let mut z_cols: Vec<&[f64]> = endo.iter().map(|c| c.values.as_slice()).collect();
    for f in factor_cols {
        z_cols.push(f.as_slice());
    }
    // every component enters symmetrically with p lags; no separate
    // own-lag block
    let (x, y) = build_design(&win.target, &z_cols, 0, p, p - 1);
    let fit = direct_projection_fit(&y, &x, h)?;
    let last = x.row(x.nrows() - 1).iter().copied().collect::<Vec<f64>>();
    let forecast = fit.predict(&last);
    Ok((fit, forecast))
}

/// One-step system estimation iterated forward: every state component
/// (endogenous plus factors) gets a one-step-ahead regression on `p` lags of
/// the full state, and the fitted system is rolled out to each horizon. The
/// target's row of the rolled-out state is returned per horizon.
fn iterated_var_fan(
    win: &DataWindow,
    p: usize,
    endogenous: &[String],
    factor_cols: &[Vec<f64>],
    horizons: &[usize],
) -> Result<Vec<f64>> {
    let endo = win.resolve_endogenous(endogenous)?;
    let target_pos = endo
        .iter()
        .position(|c| c.id == win.target_price_id)
        .ok_or_else(|| {
            Error::Config("iterated VAR needs the target among the endogenous variables".into())
        })?;
    let mut state_cols: Vec<&[f64]> = endo.iter().map(|c| c.values.as_slice()).collect();
    for f in factor_cols {
        state_cols.push(f.as_slice());
    }
    let n_state = state_cols.len();
    let len = win.len();
    if len < p {
        return Err(Error::InsufficientData { needed: p, got: len });
    }

    // shared design: [1, p lags of the state], rows p-1..len
    let rows = len - (p - 1);
    let k = 1 + p * n_state;
    let mut x = DMatrix::zeros(rows, k);
    for (row, i) in ((p - 1)..len).enumerate() {
        x[(row, 0)] = 1.0;
        for lag in 0..p {
            for (s_idx, s) in state_cols.iter().enumerate() {
                x[(row, 1 + lag * n_state + s_idx)] = s[i - lag];
            }
        }
    }
    let fits: Vec<ProjectionFit> = state_cols
        .iter()
        .map(|s| {
            let y: Vec<f64> = ((p - 1)..len).map(|i| s[i]).collect();
            direct_projection_fit(&y, &x, 1)
        })
        .collect::<Result<Vec<_>>>()?;

    // roll the state forward; `recent[0]` is the newest lag
    let mut recent: Vec<Vec<f64>> = (0..p)
        .map(|lag| state_cols.iter().map(|s| s[len - 1 - lag]).collect())
        .collect();
    let max_h = horizons.iter().copied().max().unwrap_or(0);
    let mut fan_by_h = Vec::with_capacity(max_h);
    for _ in 0..max_h {
        let mut regressors = Vec::with_capacity(k);
        regressors.push(1.0);
        for lag_values in recent.iter().take(p) {
            regressors.extend(lag_values.iter().copied());
        }
        let next: Vec<f64> = fits.iter().map(|f| f.predict(&regressors)).collect();
        fan_by_h.push(next[target_pos]);
        recent.rotate_right(1);
        recent[0] = next;
    }
    Ok(horizons.iter().map(|&h| fan_by_h[h - 1]).collect())
}

impl ModelSpec {
    /// Growth forecast (one-month log growth of the real price at
    /// `origin + h`) for a single horizon.
    pub fn forecast_growth(&self, win: &DataWindow, h: usize) -> Result<f64> {
        Ok(self.forecast_fan(win, &[h])?[0])
    }

    /// Growth forecasts for several horizons with shared preparation
    /// (factor extraction, predictor resolution).
    pub fn forecast_fan(&self, win: &DataWindow, horizons: &[usize]) -> Result<Vec<f64>> {
        self.validate()?;
        if let Some(&bad) = horizons.iter().find(|&&h| h == 0) {
            return Err(Error::Config(format!("{}: horizon {bad} invalid", self.id)));
        }
        let out: Vec<f64> = match &self.family {
            ModelFamily::Rwd => {
                if win.len() < 2 {
                    return Err(Error::InsufficientData { needed: 2, got: win.len() });
                }
                let drift = win.target.iter().sum::<f64>() / win.len() as f64;
                horizons.iter().map(|_| drift).collect()
            }
            ModelFamily::Ar { p } => horizons
                .iter()
                .map(|&h| ardl_forecast(&win.target, &[], *p, Lags::Fixed(1), h).map(|r| r.1))
                .collect::<Result<Vec<f64>>>()?,
            ModelFamily::Ardl { p, s, predictors } => {
                let cols = win.resolve_predictors(predictors)?;
                let z: Vec<&[f64]> = cols.iter().map(|c| c.values.as_slice()).collect();
                horizons
                    .iter()
                    .map(|&h| ardl_forecast(&win.target, &z, *p, *s, h).map(|r| r.1))
                    .collect::<Result<Vec<f64>>>()?
            }
            ModelFamily::Ardi { p, s, factors } => {
                let fcols = win.factor_columns(*factors, std::slice::from_ref(&win.target_price_id))?;
                let z: Vec<&[f64]> = fcols.iter().map(|c| c.as_slice()).collect();
                horizons
                    .iter()
                    .map(|&h| ardl_forecast(&win.target, &z, *p, *s, h).map(|r| r.1))
                    .collect::<Result<Vec<f64>>>()?
            }
            ModelFamily::Var { p, endogenous, iterated } => {
                if *iterated {
                    iterated_var_fan(win, *p, endogenous, &[], horizons)?
                } else {
                    horizons
                        .iter()
                        .map(|&h| fit_var_equation(win, *p, endogenous, &[], h).map(|r| r.1))
                        .collect::<Result<Vec<f64>>>()?
                }
            }
            ModelFamily::Favar { p, factors, endogenous, iterated } => {
                let resolved: Vec<String> = win
                    .resolve_endogenous(endogenous)?
                    .iter()
                    .map(|c| c.id.clone())
                    .collect();
                let fcols = win.factor_columns(*factors, &resolved)?;
                if *iterated {
                    iterated_var_fan(win, *p, endogenous, &fcols, horizons)?
                } else {
                    horizons
                        .iter()
                        .map(|&h| fit_var_equation(win, *p, endogenous, &fcols, h).map(|r| r.1))
                        .collect::<Result<Vec<f64>>>()?
                }
            }
        };
        if let Some(bad) = out.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "{}: non-finite growth forecast {bad}",
                self.id
            )));
        }
        Ok(out)
    }
}

pub const MAX_HORIZON: usize = 24;

/// Record of one model's forecast for one (metal, origin, horizon) cell.
/// `growth` is the cumulative log growth over the horizon, so
/// `level = origin_price * exp(growth)` for every model family.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub metal: Metal,
    pub model: String,
    pub origin: YearMonth,
    pub horizon: usize,
    /// Cumulative log growth over months origin+1 ..= origin+horizon;
    /// absent for model-free forecasts quoted directly in levels.
    pub growth: Option<f64>,
    /// Level forecast in real USD per metric ton.
    pub level: f64,
    /// Realized real price, filled once published.
    pub realized: Option<f64>,
}

impl ForecastRecord {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.horizon > MAX_HORIZON {
            return Err(Error::Config(format!(
                "horizon {} outside 1..={MAX_HORIZON}",
                self.horizon
            )));
        }
        if self.level <= 0.0 || !self.level.is_finite() {
            return Err(Error::Domain(format!(
                "level forecast {} must be positive",
                self.level
            )));
        }
        Ok(())
    }
}

/// Cumulates a per-month growth fan into the level forecast at horizon
/// `h`: `P_T * exp(g_1 + ... + g_h)`. The fan must cover every
/// intermediate horizon.
pub fn reconstruct_level(origin_price: f64, growth_fan: &[f64], h: usize) -> Result<f64> {
    if origin_price <= 0.0 {
        return Err(Error::Domain(format!(
            "origin price {origin_price} must be positive"
        )));
    }
    if h == 0 || growth_fan.len() < h {
        return Err(Error::Coverage(format!(
            "incomplete growth fan: need horizons 1..={h}, have {}",
            growth_fan.len()
        )));
    }
    let level = origin_price * growth_fan[..h].iter().sum::<f64>().exp();
    if !level.is_finite() || level <= 0.0 {
        return Err(Error::Domain(format!("level forecast {level} invalid")));
    }
    Ok(level)
}
